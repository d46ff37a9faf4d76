//! Reference models shared by the integration tests. They are written
//! independently of the library's data structures and favor clarity over
//! speed.

#![allow(dead_code)]

use std::collections::VecDeque;

/// xorshift64* for test inputs, kept separate from the library generator.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn trace(&mut self, len: usize, distinct: u64) -> Vec<u64> {
        (0..len).map(|_| self.below(distinct)).collect()
    }
}

/// LRU over a plain vector, most recent first.
pub fn naive_lru_hits(trace: &[u64], capacity: usize) -> Vec<bool> {
    let mut stack: Vec<u64> = Vec::new();
    trace
        .iter()
        .map(|&p| {
            let hit = match stack.iter().position(|&q| q == p) {
                Some(i) => {
                    stack.remove(i);
                    true
                }
                None => {
                    if stack.len() == capacity {
                        stack.pop();
                    }
                    false
                }
            };
            stack.insert(0, p);
            hit
        })
        .collect()
}

/// ARC transcribed case by case from the published pseudocode. Front of each
/// deque is the MRU end.
pub struct OracleArc {
    c: usize,
    pub p: f64,
    pub t1: VecDeque<u64>,
    pub t2: VecDeque<u64>,
    pub b1: VecDeque<u64>,
    pub b2: VecDeque<u64>,
}

fn take(list: &mut VecDeque<u64>, x: u64) -> bool {
    match list.iter().position(|&y| y == x) {
        Some(i) => {
            list.remove(i);
            true
        }
        None => false,
    }
}

impl OracleArc {
    pub fn new(c: usize) -> Self {
        OracleArc {
            c,
            p: 0.0,
            t1: VecDeque::new(),
            t2: VecDeque::new(),
            b1: VecDeque::new(),
            b2: VecDeque::new(),
        }
    }

    // REPLACE(x, p)
    fn replace(&mut self, x_in_b2: bool) {
        let t1 = self.t1.len() as f64;
        if !self.t1.is_empty() && (t1 > self.p || (x_in_b2 && t1 == self.p)) {
            let lru = self.t1.pop_back().expect("T1 non-empty");
            self.b1.push_front(lru);
        } else {
            let lru = self.t2.pop_back().expect("REPLACE found T2 empty");
            self.b2.push_front(lru);
        }
    }

    pub fn access(&mut self, x: u64) -> bool {
        let c = self.c;
        // Case I
        if take(&mut self.t1, x) || take(&mut self.t2, x) {
            self.t2.push_front(x);
            return true;
        }
        // Case II
        if self.b1.contains(&x) {
            let d = if self.b1.len() >= self.b2.len() {
                1.0
            } else {
                self.b2.len() as f64 / self.b1.len() as f64
            };
            self.p = (self.p + d).min(c as f64);
            self.replace(false);
            take(&mut self.b1, x);
            self.t2.push_front(x);
            return false;
        }
        // Case III
        if self.b2.contains(&x) {
            let d = if self.b2.len() >= self.b1.len() {
                1.0
            } else {
                self.b1.len() as f64 / self.b2.len() as f64
            };
            self.p = (self.p - d).max(0.0);
            self.replace(true);
            take(&mut self.b2, x);
            self.t2.push_front(x);
            return false;
        }
        // Case IV
        let l1 = self.t1.len() + self.b1.len();
        let l2 = self.t2.len() + self.b2.len();
        if l1 == c {
            if self.t1.len() < c {
                self.b1.pop_back();
                self.replace(false);
            } else {
                self.t1.pop_back();
            }
        } else if l1 < c && l1 + l2 >= c {
            if l1 + l2 == 2 * c {
                self.b2.pop_back();
            }
            self.replace(false);
        }
        self.t1.push_front(x);
        false
    }
}
