//! Bounded top-k over a stream of scored items.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// A score with a tie-breaking id. Greater means better: a higher score
/// wins, and among equal scores the smaller id wins.
#[derive(Debug, Clone, Copy)]
pub struct Scored<T> {
    pub score: f64,
    pub id: T,
}

impl<T> Scored<T> {
    #[inline]
    pub fn new(score: f64, id: T) -> Self {
        // +0.0 folds -0.0 into 0.0 so the two compare as a tie.
        Self { score: score + 0.0, id }
    }
}

impl<T: Ord> Ord for Scored<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl<T: Ord> PartialOrd for Scored<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Ord> PartialEq for Scored<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Ord> Eq for Scored<T> {}

/// Keeps the `k` best items seen so far in a min-heap of size `k`.
pub struct TopK<T> {
    k: usize,
    heap: BinaryHeap<Reverse<Scored<T>>>,
}

impl<T: Ord> TopK<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 20) + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, score: f64, id: T) {
        if self.k == 0 {
            return;
        }
        let item = Scored::new(score, id);
        if self.heap.len() < self.k {
            self.heap.push(Reverse(item));
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if item > worst.0 {
                *worst = Reverse(item);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Items from best to worst.
    pub fn into_sorted_vec(self) -> Vec<Scored<T>> {
        // ascending order of Reverse is descending order of Scored
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_prefer_smaller_ids() {
        let mut top = TopK::new(2);
        for (c, s) in [((0, 0), 0.9), ((0, 1), 0.2), ((1, 0), 0.9), ((1, 1), 0.5)] {
            top.push(s, c);
        }
        let ids: Vec<(u8, u8)> = top.into_sorted_vec().iter().map(|s| s.id).collect();
        assert_eq!(ids, [(0, 0), (1, 0)]);
    }

    #[test]
    fn negative_zero_ties_with_zero() {
        let mut top = TopK::new(1);
        top.push(0.0, 5);
        top.push(-0.0, 1);
        assert_eq!(top.into_sorted_vec()[0].id, 1);
    }

    proptest! {
        #[test]
        fn matches_full_sort(scores in proptest::collection::vec(-3i32..3, 0..60), k in 0usize..20) {
            let mut top = TopK::new(k);
            for (i, &s) in scores.iter().enumerate() {
                top.push(s as f64, i);
            }
            let mut all: Vec<(i32, usize)> = scores.iter().copied().zip(0..).collect();
            all.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all.iter().take(k).map(|x| x.1).collect();
            let got: Vec<usize> = top.into_sorted_vec().iter().map(|s| s.id).collect();
            prop_assert_eq!(got, expect);
        }
    }
}
