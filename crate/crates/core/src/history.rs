use std::collections::VecDeque;

/// Fixed-capacity window over the most recent per-epoch observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<T> {
    buf: VecDeque<T>,
    capacity: usize,
    epochs_recorded: usize,
}

impl<T> Window<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Window {
            buf: VecDeque::with_capacity(capacity),
            capacity,
            epochs_recorded: 0,
        }
    }

    pub fn push(&mut self, value: T) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(value);
        self.epochs_recorded += 1;
    }

    /// True once a whole window has been observed since the last clear.
    pub fn is_full(&self) -> bool {
        self.epochs_recorded >= self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epochs_recorded(&self) -> usize {
        self.epochs_recorded
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.buf.iter()
    }

    pub fn clear(&mut self) {
        self.buf.clear();
        self.epochs_recorded = 0;
    }
}
