//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "sciu.h"

int main(void) {
    SciuDataset *d = NULL;
    SciuReport *r = NULL;
    if (sciu_dataset_generate("{\"per_class\": 25, \"n_classes\": 3, \"dim\": 5}", &d) != SCIU_STATUS_OK) return 10;
    size_t n = 0;
    sciu_dataset_len(d, &n);
    if (n != 75) return 11;
    SciuStatus s = sciu_run(d, SCIU_MODE_SCIU, "{\"epochs\": 6, \"warmup_epochs\": 2, \"window_t\": 2, \"batch_size\": 8, \"lambda\": 0.1}", &r);
    if (s != SCIU_STATUS_OK) { fprintf(stderr, "%s\n", sciu_last_error()); return 12; }
    double war = -1.0;
    sciu_report_war(r, &war);
    if (war < 0.0 || war > 1.0) return 13;
    char *json = NULL;
    sciu_report_to_json(r, &json);
    if (strstr(json, "\"pruning_log\"") == NULL) return 14;
    sciu_string_free(json);
    if (sciu_run(d, 42, NULL, &r) != SCIU_STATUS_INVALID_ARGUMENT) return 15;
    if (sciu_last_error() == NULL) return 16;
    sciu_report_free(r);
    sciu_dataset_free(d);
    printf("war %.4f\n", war);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps, next to the static library
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("libsciu_ffi.a");
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .expect("C compiler runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("war "));
}
