//! Adaptive Replacement Cache.
//!
//! Resident pages live in `t1` (seen once recently) and `t2` (seen at least
//! twice). `b1` and `b2` are ghost lists holding the ids of pages recently
//! evicted from `t1` and `t2`. A hit in a ghost list moves the target size
//! `p` of `t1`: towards recency on a `b1` hit, towards frequency on a `b2`
//! hit. The adaptation step is `max(1, |other ghost| / |this ghost|)` and
//! `p` is kept as a real number in `[0, c]`.
//!
//! Reads and writes are both plain page touches.

use super::list::PageList;
use super::ReplacementPolicy;

/// Sizes of the four lists and the adaptation target at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcState {
    pub t1: usize,
    pub t2: usize,
    pub b1: usize,
    pub b2: usize,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct ArcCache {
    capacity: usize,
    target: f64,
    t1: PageList,
    t2: PageList,
    b1: PageList,
    b2: PageList,
}

impl ArcCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be at least one page");
        ArcCache {
            capacity,
            target: 0.0,
            t1: PageList::with_capacity(capacity),
            t2: PageList::with_capacity(capacity),
            b1: PageList::with_capacity(capacity),
            b2: PageList::with_capacity(capacity),
        }
    }

    pub fn state(&self) -> ArcState {
        ArcState {
            t1: self.t1.len(),
            t2: self.t2.len(),
            b1: self.b1.len(),
            b2: self.b2.len(),
            target: self.target,
        }
    }

    /// Demotes the LRU page of `t1` or `t2` into its ghost list.
    fn replace(&mut self, hit_in_b2: bool) {
        let t1 = self.t1.len();
        let t1_f = t1 as f64;
        let from_t1 = t1 >= 1 && ((hit_in_b2 && t1_f == self.target) || t1_f > self.target);
        // Only reachable with a full cache, so the chosen list is non-empty.
        if from_t1 || self.t2.len() == 0 {
            if let Some(old) = self.t1.pop_back() {
                self.b1.push_front(old);
            }
        } else if let Some(old) = self.t2.pop_back() {
            self.b2.push_front(old);
        }
    }
}

impl ReplacementPolicy for ArcCache {
    fn access(&mut self, page: u64) -> bool {
        let c = self.capacity;

        if self.t1.remove(page) {
            self.t2.push_front(page);
            return true;
        }
        if self.t2.contains(page) {
            self.t2.move_to_front(page);
            return true;
        }

        if self.b1.contains(page) {
            let (b1, b2) = (self.b1.len(), self.b2.len());
            let delta = if b1 >= b2 { 1.0 } else { b2 as f64 / b1 as f64 };
            self.target = (self.target + delta).min(c as f64);
            self.replace(false);
            self.b1.remove(page);
            self.t2.push_front(page);
            return false;
        }
        if self.b2.contains(page) {
            let (b1, b2) = (self.b1.len(), self.b2.len());
            let delta = if b2 >= b1 { 1.0 } else { b1 as f64 / b2 as f64 };
            self.target = (self.target - delta).max(0.0);
            self.replace(true);
            self.b2.remove(page);
            self.t2.push_front(page);
            return false;
        }

        // Complete miss.
        let l1 = self.t1.len() + self.b1.len();
        if l1 == c {
            if self.t1.len() < c {
                self.b1.pop_back();
                self.replace(false);
            } else {
                self.t1.pop_back();
            }
        } else {
            let total = l1 + self.t2.len() + self.b2.len();
            if total >= c {
                if total == 2 * c {
                    self.b2.pop_back();
                }
                self.replace(false);
            }
        }
        self.t1.push_front(page);
        false
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident(&self) -> usize {
        self.t1.len() + self.t2.len()
    }
}
