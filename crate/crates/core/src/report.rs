//! Engine outputs: verified periods and streaming-space measurements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mismatch_sketch::Backend;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KPeriod {
    pub period: usize,
    /// Positions `i` with `S[i] != S[i + period]`. The two-pass engine leaves
    /// this `None` when `n - period ≤ k` makes the period hold without any
    /// comparison.
    pub mismatches: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub n: usize,
    pub k: usize,
    pub periods: Vec<KPeriod>,
    /// Named counters describing the run (candidates examined, fallbacks…).
    pub diagnostics: BTreeMap<String, u64>,
}

impl PeriodReport {
    pub fn period_values(&self) -> Vec<usize> {
        self.periods.iter().map(|p| p.period).collect()
    }

    pub fn get(&self, period: usize) -> Option<&KPeriod> {
        self.periods
            .binary_search_by_key(&period, |p| p.period)
            .ok()
            .map(|i| &self.periods[i])
    }

    pub(crate) fn bump(&mut self, key: &str, by: u64) {
        *self.diagnostics.entry(key.to_owned()).or_default() += by;
    }

    pub(crate) fn raise(&mut self, key: &str, value: u64) {
        let slot = self.diagnostics.entry(key.to_owned()).or_default();
        *slot = (*slot).max(value);
    }
}

/// Peak streaming state, in bytes, observed during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceStats {
    pub peak_state_bytes: usize,
    pub peak_by_module: BTreeMap<String, usize>,
    pub n: usize,
    pub k: usize,
    pub passes: u8,
    pub backend: Option<Backend>,
    pub wall_time_secs: f64,
}

/// Samples an engine's state size about a thousand times per pass.
#[derive(Debug, Clone)]
pub struct SpaceMeter {
    every: usize,
    stats: SpaceStats,
}

impl SpaceMeter {
    pub fn new(n: usize) -> Self {
        Self {
            every: (n / 1024).max(1),
            stats: SpaceStats::default(),
        }
    }

    pub fn due(&self, position: usize) -> bool {
        position.is_multiple_of(self.every)
    }

    pub fn record(&mut self, modules: &[(&str, usize)]) {
        let total: usize = modules.iter().map(|(_, b)| b).sum();
        self.stats.peak_state_bytes = self.stats.peak_state_bytes.max(total);
        for &(name, bytes) in modules {
            let slot = self.stats.peak_by_module.entry(name.to_owned()).or_default();
            *slot = (*slot).max(bytes);
        }
    }

    pub fn into_stats(self) -> SpaceStats {
        self.stats
    }
}

/// Parameters shared by both engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub k: usize,
    pub seed: u64,
    pub backend: Backend,
}

impl EngineOptions {
    pub fn new(k: usize, seed: u64, backend: Backend) -> Self {
        Self { k, seed, backend }
    }
}
