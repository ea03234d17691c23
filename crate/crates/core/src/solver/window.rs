//! Bounded newest-first history of iterates and their cached residuals.

use std::collections::VecDeque;

use nalgebra::DVector;

/// One stored iterate with its cached `g(x)` and `q(x) = x - g(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowEntry {
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub q: DVector<f64>,
}

impl WindowEntry {
    pub fn new(x: DVector<f64>, g: DVector<f64>) -> Self {
        let q = &x - &g;
        Self { x, g, q }
    }
}

/// Entry 0 is always the current iterate `x_k`; entry `i` is `x_{k-i}`.
#[derive(Clone, Debug)]
pub struct Window {
    capacity: usize,
    entries: VecDeque<WindowEntry>,
}

impl Window {
    /// Window for NGMRES(m): holds up to `m + 1` entries.
    pub fn for_window_size(m: usize) -> Self {
        Self {
            capacity: m + 1,
            entries: VecDeque::with_capacity(m + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Makes `entry` the newest, evicting the oldest beyond capacity.
    pub fn push(&mut self, entry: WindowEntry) {
        self.entries.push_front(entry);
        self.entries.truncate(self.capacity);
    }

    pub fn newest(&self) -> Option<&WindowEntry> {
        self.entries.front()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Iterates newest first.
    pub fn iter(&self) -> impl Iterator<Item = &WindowEntry> {
        self.entries.iter()
    }
}
