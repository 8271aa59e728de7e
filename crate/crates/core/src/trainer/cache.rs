use std::collections::HashMap;
use std::sync::Arc;

use crate::sigproc::SignalTrace;

/// One stored evaluation for a gain bucket.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub reward: f64,
    /// Processed trace of the representative run.
    pub trace: Arc<SignalTrace>,
    pub diverged: bool,
    pub hits: usize,
}

/// Quantized gain buckets, each evaluated by a single plant run.
///
/// A disabled cache keeps the quantization (every action is still run at
/// its bucket representative) but never stores, so each lookup misses.
#[derive(Debug, Clone)]
pub struct EvalCache {
    resolution: f64,
    enabled: bool,
    entries: HashMap<i64, CacheEntry>,
    lookups: usize,
    hits: usize,
}

impl EvalCache {
    pub fn new(resolution: f64, enabled: bool) -> Self {
        Self {
            resolution,
            enabled,
            entries: HashMap::new(),
            lookups: 0,
            hits: 0,
        }
    }

    pub fn bucket(&self, kp: f64) -> i64 {
        (kp / self.resolution).round() as i64
    }

    pub fn representative(&self, bucket: i64) -> f64 {
        bucket as f64 * self.resolution
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Looks up a bucket and counts the access.
    pub fn lookup(&mut self, bucket: i64) -> Option<&CacheEntry> {
        self.lookups += 1;
        if !self.enabled {
            return None;
        }
        let entry = self.entries.get_mut(&bucket)?;
        entry.hits += 1;
        self.hits += 1;
        Some(entry)
    }

    pub fn insert(&mut self, bucket: i64, reward: f64, trace: Arc<SignalTrace>, diverged: bool) {
        if self.enabled {
            self.entries.insert(
                bucket,
                CacheEntry {
                    reward,
                    trace,
                    diverged,
                    hits: 0,
                },
            );
        }
    }

    pub fn get(&self, bucket: i64) -> Option<&CacheEntry> {
        self.entries.get(&bucket)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookups(&self) -> usize {
        self.lookups
    }

    pub fn hits(&self) -> usize {
        self.hits
    }
}
