use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
struct Link {
    prev: Option<u64>,
    next: Option<u64>,
}

/// Doubly linked recency list of page ids with O(1) membership, removal and
/// move-to-front. `head` is the most recently used end.
#[derive(Debug, Default, Clone)]
pub(crate) struct PageList {
    links: HashMap<u64, Link>,
    head: Option<u64>,
    tail: Option<u64>,
}

impl PageList {
    pub(crate) fn with_capacity(cap: usize) -> Self {
        PageList {
            links: HashMap::with_capacity(cap),
            head: None,
            tail: None,
        }
    }

    #[inline]
    pub(crate) fn len(&self) -> usize {
        self.links.len()
    }

    #[inline]
    pub(crate) fn contains(&self, page: u64) -> bool {
        self.links.contains_key(&page)
    }

    /// Inserts `page` at the MRU end. The page must not already be present.
    pub(crate) fn push_front(&mut self, page: u64) {
        debug_assert!(!self.contains(page));
        let old = self.head;
        self.links.insert(page, Link { prev: None, next: old });
        match old {
            Some(h) => self.link_mut(h).prev = Some(page),
            None => self.tail = Some(page),
        }
        self.head = Some(page);
    }

    pub(crate) fn remove(&mut self, page: u64) -> bool {
        let Some(link) = self.links.remove(&page) else {
            return false;
        };
        match link.prev {
            Some(p) => self.link_mut(p).next = link.next,
            None => self.head = link.next,
        }
        match link.next {
            Some(n) => self.link_mut(n).prev = link.prev,
            None => self.tail = link.prev,
        }
        true
    }

    pub(crate) fn move_to_front(&mut self, page: u64) {
        if self.head != Some(page) && self.remove(page) {
            self.push_front(page);
        }
    }

    /// Removes and returns the LRU page.
    pub(crate) fn pop_back(&mut self) -> Option<u64> {
        let t = self.tail?;
        self.remove(t);
        Some(t)
    }

    /// Pages from MRU to LRU.
    pub(crate) fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::successors(self.head, move |p| self.links[p].next)
    }

    fn link_mut(&mut self, page: u64) -> &mut Link {
        self.links.get_mut(&page).expect("linked page missing from index")
    }
}
