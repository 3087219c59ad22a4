//! Multiply-accumulate instrumentation.
//!
//! Kernels report the MACs they perform at loop-nest granularity (one
//! `add` per packed tile product or projection pass), so counting costs
//! nothing measurable inside the inner loops.
//!
//! Counting convention: one MAC is one multiply plus one accumulate. An
//! accumulation of a partial result into the output counts as one MAC with
//! a unit multiplier. Interpolation of skipped output samples is not counted.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct MacCounter(AtomicU64);

impl MacCounter {
    pub fn new() -> Self {
        MacCounter::default()
    }

    #[inline]
    pub fn add(&self, macs: u64) {
        self.0.fetch_add(macs, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}
