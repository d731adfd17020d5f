use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::error::Result;
use crate::input_tree::InputTree;
use crate::lqr::{DecompositionMetrics, FitnessEvaluator};

/// Fitness cache keyed by canonical tree-key bytes. Safe to share between
/// workers; when two workers race on a new key the first insert wins.
#[derive(Debug, Default)]
pub struct MemoTable {
    map: RwLock<HashMap<Vec<u8>, DecompositionMetrics>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl MemoTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &[u8]) -> Option<DecompositionMetrics> {
        self.map.read().expect("memo lock").get(key).copied()
    }

    /// Cached metrics for `key`, computing them with `eval` on a miss.
    pub fn get_or_insert_with<F>(&self, key: Vec<u8>, eval: F) -> Result<DecompositionMetrics>
    where
        F: FnOnce() -> Result<DecompositionMetrics>,
    {
        if let Some(m) = self.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(m);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let metrics = eval()?;
        let mut map = self.map.write().expect("memo lock");
        Ok(*map.entry(key).or_insert(metrics))
    }

    /// Metrics of `tree` through the cache.
    pub fn evaluate(&self, evaluator: &FitnessEvaluator, tree: &InputTree) -> Result<DecompositionMetrics> {
        let key = tree.key()?.to_bytes();
        self.get_or_insert_with(key, || evaluator.evaluate(tree))
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Number of distinct decompositions evaluated.
    pub fn unique(&self) -> usize {
        self.map.read().expect("memo lock").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn second_request_is_a_hit() {
        let memo = MemoTable::new();
        let calls = Cell::new(0);
        let m = DecompositionMetrics::new(0.5, 0.25);
        let eval = || {
            calls.set(calls.get() + 1);
            Ok(m)
        };
        let a = memo.get_or_insert_with(vec![1, 2], eval).unwrap();
        let b = memo
            .get_or_insert_with(vec![1, 2], || {
                calls.set(calls.get() + 1);
                Ok(DecompositionMetrics::new(9.0, 9.0))
            })
            .unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(a, b);
        assert_eq!((memo.hits(), memo.misses(), memo.unique()), (1, 1, 1));
    }

    #[test]
    fn first_writer_wins() {
        let memo = MemoTable::new();
        let first = DecompositionMetrics::new(1.0, 0.5);
        memo.get_or_insert_with(vec![7], || Ok(first)).unwrap();
        // A racing writer that computed something else still sees the first value.
        let seen = {
            let mut map = memo.map.write().unwrap();
            *map.entry(vec![7]).or_insert(DecompositionMetrics::new(2.0, 0.5))
        };
        assert_eq!(seen, first);
    }
}
