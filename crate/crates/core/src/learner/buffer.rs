use std::collections::VecDeque;

use rand::Rng;

use crate::designenv::DesignState;

/// One distillation target: visit-count policy over `state.candidates` and
/// the raw terminal reward of the episode it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayItem {
    pub state: DesignState,
    pub pi: Vec<f64>,
    pub z: f64,
}

/// FIFO ring of replay items.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<ReplayItem>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, item: ReplayItem) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayItem> {
        self.items.iter()
    }

    /// `count` items drawn uniformly with replacement.
    pub fn sample<'a>(&'a self, count: usize, rng: &mut impl Rng) -> Vec<&'a ReplayItem> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..count).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}
