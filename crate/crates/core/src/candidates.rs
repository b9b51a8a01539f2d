//! Compressed candidate sets.
//!
//! A range of shifts is cut into `2·k·ceil(log2 n) + 2` intervals. Per
//! interval only the first candidate and the gcd of all differences to it are
//! kept; recovery lists the arithmetic progression they span, which contains
//! every inserted candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mismatch_sketch::ceil_log2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalPartition {
    offset: usize,
    len: usize,
    intervals: usize,
    width: usize,
}

impl IntervalPartition {
    /// Partition of `[offset + 1, offset + len]` for budget `k` on a stream
    /// of declared length `n`.
    pub fn new(offset: usize, len: usize, k: usize, n: usize) -> Self {
        let intervals = 2 * k * ceil_log2(n) + 2;
        let width = len.div_ceil(intervals).max(1);
        Self {
            offset,
            len,
            intervals,
            width,
        }
    }

    /// Partition of the closed range `[lo, hi]` (empty when `lo > hi`).
    pub fn for_range(lo: usize, hi: usize, k: usize, n: usize) -> Self {
        let len = if hi >= lo { hi - lo + 1 } else { 0 };
        Self::new(lo.saturating_sub(1), len, k, n)
    }

    pub fn interval_count(&self) -> usize {
        self.intervals
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn lo(&self) -> usize {
        self.offset + 1
    }

    pub fn hi(&self) -> usize {
        self.offset + self.len
    }

    /// Closed bounds of interval `j`, or `None` if it is empty.
    pub fn bounds(&self, j: usize) -> Option<(usize, usize)> {
        let lo = j * self.width + 1;
        let hi = ((j + 1) * self.width).min(self.len);
        (j < self.intervals && lo <= hi).then(|| (self.offset + lo, self.offset + hi))
    }

    pub fn interval_of(&self, i: usize) -> Result<usize> {
        if i <= self.offset || i > self.offset + self.len {
            return Err(Error::Range {
                value: i,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        Ok((i - self.offset - 1) / self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub first: Option<usize>,
    pub pi: i64,
}

impl Default for IntervalRecord {
    fn default() -> Self {
        Self { first: None, pi: -1 }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// An arithmetic progression `first, first + step, …` of `count` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progression {
    pub first: usize,
    pub step: usize,
    pub count: usize,
}

impl Progression {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let Progression { first, step, count } = *self;
        (0..count).map(move |c| first + c * step)
    }

    pub fn last(&self) -> usize {
        self.first + self.count.saturating_sub(1) * self.step
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTable {
    partition: IntervalPartition,
    records: Vec<IntervalRecord>,
}

impl CandidateTable {
    pub fn new(partition: IntervalPartition) -> Self {
        Self {
            records: vec![IntervalRecord::default(); partition.interval_count()],
            partition,
        }
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    pub fn records(&self) -> &[IntervalRecord] {
        &self.records
    }

    pub fn insert(&mut self, i: usize) -> Result<()> {
        let j = self.partition.interval_of(i)?;
        let rec = &mut self.records[j];
        let Some(first) = rec.first else {
            rec.first = Some(i);
            return Ok(());
        };
        if i == first {
            return Ok(());
        }
        let diff = i.abs_diff(first) as u64;
        rec.pi = if rec.pi < 0 {
            diff as i64
        } else {
            gcd(rec.pi as u64, diff) as i64
        };
        // out-of-order inserts move the anchor down; congruence is unchanged
        rec.first = Some(first.min(i));
        Ok(())
    }

    /// The progression recovered from each non-empty interval.
    pub fn progressions(&self) -> Vec<Progression> {
        let mut out = Vec::new();
        for (j, rec) in self.records.iter().enumerate() {
            let Some(first) = rec.first else { continue };
            let (_, hi) = self.partition.bounds(j).expect("occupied interval is non-empty");
            let p = if rec.pi < 0 {
                Progression {
                    first,
                    step: 0,
                    count: 1,
                }
            } else {
                let step = rec.pi as usize;
                Progression {
                    first,
                    step,
                    count: (hi - first) / step + 1,
                }
            };
            out.push(p);
        }
        out
    }

    /// Sorted, duplicate-free superset of the inserted candidates.
    pub fn recover(&self) -> Vec<usize> {
        self.progressions().iter().flat_map(Progression::iter).collect()
    }

    pub fn state_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.records.len() * std::mem::size_of::<IntervalRecord>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_covers_range() {
        for (lo, hi, k, n) in [(1, 100, 2, 1000), (51, 75, 1, 100), (1, 3, 3, 1 << 16)] {
            let part = IntervalPartition::for_range(lo, hi, k, n);
            let mut covered = Vec::new();
            for j in 0..part.interval_count() {
                if let Some((a, b)) = part.bounds(j) {
                    assert!(b - a < part.width());
                    covered.extend(a..=b);
                }
            }
            assert_eq!(covered, (lo..=hi).collect::<Vec<_>>());
            for i in lo..=hi {
                let (a, b) = part.bounds(part.interval_of(i).unwrap()).unwrap();
                assert!(a <= i && i <= b);
            }
            assert!(part.interval_of(hi + 1).is_err());
        }
    }

    fn one_interval() -> CandidateTable {
        // k = 0 gives two intervals; widen the first to [1, 35]
        let mut part = IntervalPartition::new(0, 40, 0, 2);
        part.width = 35;
        CandidateTable::new(part)
    }

    #[test]
    fn gcd_trace_and_recovery() {
        let mut t = one_interval();
        let mut trace = Vec::new();
        for i in [10, 22, 26, 32] {
            t.insert(i).unwrap();
            trace.push(t.records()[0].pi);
        }
        assert_eq!(trace, vec![-1, 12, 4, 2]);
        assert_eq!(t.recover(), (10..=34).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn single_and_duplicate() {
        let mut t = one_interval();
        t.insert(7).unwrap();
        t.insert(7).unwrap();
        assert_eq!(t.records()[0], IntervalRecord { first: Some(7), pi: -1 });
        assert_eq!(t.recover(), vec![7]);
        assert!(CandidateTable::new(IntervalPartition::new(0, 10, 1, 10))
            .recover()
            .is_empty());
        assert!(matches!(t.insert(41), Err(Error::Range { .. })));
    }

    #[test]
    fn round_trips_as_json() {
        let mut t = CandidateTable::new(IntervalPartition::for_range(5, 60, 2, 128));
        for i in [6, 9, 12, 40] {
            t.insert(i).unwrap();
        }
        let back: CandidateTable = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
