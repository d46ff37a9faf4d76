use super::list::PageList;
use super::ReplacementPolicy;

#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: usize,
    pages: PageList,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache capacity must be at least one page");
        LruCache {
            capacity,
            pages: PageList::with_capacity(capacity + 1),
        }
    }

    /// Resident pages from most to least recently used.
    pub fn resident_pages(&self) -> Vec<u64> {
        self.pages.iter().collect()
    }
}

impl ReplacementPolicy for LruCache {
    fn access(&mut self, page: u64) -> bool {
        if self.pages.contains(page) {
            self.pages.move_to_front(page);
            return true;
        }
        self.pages.push_front(page);
        if self.pages.len() > self.capacity {
            self.pages.pop_back();
        }
        false
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn resident(&self) -> usize {
        self.pages.len()
    }
}
