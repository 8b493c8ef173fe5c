//! Binary sum tree over a power-of-two number of leaves.
//!
//! Internal node `i` holds the sum of its children `2i` and `2i + 1`; the root
//! lives at index 1 and leaf `j` at index `capacity + j`.

use super::ReplayError;

#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// Creates a tree with at least `min_leaves` leaves, rounded up to a power of two.
    pub fn new(min_leaves: usize) -> Self {
        let capacity = min_leaves.max(1).next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    /// Sets a leaf priority and recomputes its ancestors in O(log capacity).
    ///
    /// Parents are recomputed from their children rather than patched with a
    /// delta, so floating point drift cannot accumulate at the root.
    pub fn set(&mut self, leaf: usize, priority: f64) -> Result<(), ReplayError> {
        if leaf >= self.capacity {
            return Err(ReplayError::UnknownLeaf(format!(
                "leaf {leaf} outside tree capacity {}",
                self.capacity
            )));
        }
        if !(priority.is_finite() && priority >= 0.0) {
            return Err(ReplayError::InvalidPriority(priority));
        }
        let mut idx = self.capacity + leaf;
        self.nodes[idx] = priority;
        while idx > 1 {
            idx /= 2;
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1];
        }
        Ok(())
    }

    /// Returns the leaf whose cumulative-sum bracket `[lo, lo + p)` contains `u`.
    ///
    /// `u` is clamped into `[0, total)`; zero-priority leaves are never returned
    /// while the total is positive.
    pub fn find_prefix(&self, u: f64) -> usize {
        let total = self.total();
        let mut u = u.clamp(0.0, total);
        let mut idx = 1;
        while idx < self.capacity {
            let left = 2 * idx;
            let left_sum = self.nodes[left];
            if u < left_sum || self.nodes[left + 1] <= 0.0 {
                idx = left;
            } else {
                u -= left_sum;
                idx = left + 1;
            }
        }
        let mut leaf = idx - self.capacity;
        // Rounding can land on an empty leaf at the right edge; walk back to
        // the last leaf with mass.
        while self.get(leaf) <= 0.0 && leaf > 0 && total > 0.0 {
            leaf -= 1;
        }
        leaf
    }

    /// Sum of all leaves computed by a linear scan.
    pub fn leaf_sum(&self) -> f64 {
        self.nodes[self.capacity..].iter().sum()
    }
}
