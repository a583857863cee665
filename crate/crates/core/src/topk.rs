//! Bounded top-k selection with a deterministic total order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::lattice::Site;

/// A scored site. Higher score ranks first; equal scores rank the
/// lexicographically smaller site first.
#[derive(Clone, Debug)]
pub struct Ranked<T> {
    pub score: f64,
    pub site: Site,
    pub payload: T,
}

impl<T> Ranked<T> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.site.cmp(&self.site))
    }
}

impl<T> PartialEq for Ranked<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Ranked<T> {}

impl<T> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Ranked<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Keeps the `k` best entries seen so far in O(k) memory.
#[derive(Clone, Debug)]
pub struct TopK<T> {
    k: usize,
    heap: BinaryHeap<Reverse<Ranked<T>>>,
}

impl<T> TopK<T> {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// Score of the current k-th best entry, if k entries are held.
    pub fn threshold(&self) -> Option<f64> {
        if self.is_full() {
            self.heap.peek().map(|r| r.0.score)
        } else {
            None
        }
    }

    /// Would an entry with this score and site be retained?
    pub fn admits(&self, score: f64, site: &[i64]) -> bool {
        match self.heap.peek() {
            Some(worst) if self.is_full() => match score.total_cmp(&worst.0.score) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => site < worst.0.site.coords(),
            },
            _ => true,
        }
    }

    pub fn offer(&mut self, item: Ranked<T>) {
        if !self.is_full() {
            self.heap.push(Reverse(item));
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if item > worst.0 {
                *worst = Reverse(item);
            }
        }
    }

    pub fn merge(&mut self, other: TopK<T>) {
        for Reverse(item) in other.heap {
            self.offer(item);
        }
    }

    /// Entries sorted best first.
    pub fn into_sorted(self) -> Vec<Ranked<T>> {
        let mut v: Vec<_> = self.heap.into_iter().map(|r| r.0).collect();
        v.sort_by(|a, b| b.cmp(a));
        v
    }
}
