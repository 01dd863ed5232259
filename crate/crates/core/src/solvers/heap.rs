//! Addressable binary max-heap over node ids `0..n`.
//!
//! Keys are non-negative reals (absolute gradient entries). Among equal keys
//! the lowest id sits on top, so `top()` is the lowest-id argmax.

#[derive(Debug, Clone)]
pub struct IndexedMaxHeap {
    /// heap position -> id
    heap: Vec<usize>,
    /// id -> heap position
    pos: Vec<usize>,
    keys: Vec<f64>,
}

impl IndexedMaxHeap {
    pub fn from_keys(keys: Vec<f64>) -> Self {
        let n = keys.len();
        let mut h = Self {
            heap: (0..n).collect(),
            pos: (0..n).collect(),
            keys,
        };
        for i in (0..n / 2).rev() {
            h.sift_down(i);
        }
        h
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// `(id, key)` of the maximum.
    pub fn top(&self) -> Option<(usize, f64)> {
        self.heap.first().map(|&id| (id, self.keys[id]))
    }

    pub fn key(&self, id: usize) -> f64 {
        self.keys[id]
    }

    pub fn update(&mut self, id: usize, key: f64) {
        let old = self.keys[id];
        self.keys[id] = key;
        let at = self.pos[id];
        if key > old {
            self.sift_up(at);
        } else if key < old {
            self.sift_down(at);
        }
    }

    #[inline]
    fn above(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.keys[a], self.keys[b]);
        ka > kb || (ka == kb && a < b)
    }

    fn swap(&mut self, i: usize, j: usize) {
        self.heap.swap(i, j);
        self.pos[self.heap[i]] = i;
        self.pos[self.heap[j]] = j;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.above(self.heap[i], self.heap[parent]) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < n && self.above(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < n && self.above(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_top(keys: &[f64]) -> usize {
        let mut best = 0;
        for (i, &k) in keys.iter().enumerate() {
            if k > keys[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn ties_prefer_lowest_id() {
        let h = IndexedMaxHeap::from_keys(vec![1.0, 3.0, 3.0, 0.0, 3.0]);
        assert_eq!(h.top(), Some((1, 3.0)));
        let h = IndexedMaxHeap::from_keys(vec![0.0; 7]);
        assert_eq!(h.top(), Some((0, 0.0)));
    }

    #[test]
    fn empty_heap() {
        let h = IndexedMaxHeap::from_keys(vec![]);
        assert!(h.is_empty());
        assert_eq!(h.top(), None);
    }

    proptest! {
        #[test]
        fn top_matches_brute_force(
            init in prop::collection::vec(0u8..6, 1..40),
            ops in prop::collection::vec((0usize..40, 0u8..6), 0..200),
        ) {
            // small integer keys force many ties
            let mut keys: Vec<f64> = init.iter().map(|&k| k as f64).collect();
            let mut h = IndexedMaxHeap::from_keys(keys.clone());
            for (id, k) in ops {
                let id = id % keys.len();
                keys[id] = k as f64;
                h.update(id, k as f64);
                let (top, key) = h.top().unwrap();
                prop_assert_eq!(top, brute_top(&keys));
                prop_assert_eq!(key, keys[top]);
            }
        }
    }
}
