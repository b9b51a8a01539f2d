//! Two-pass detection of every k-period.
//!
//! Pass 1 runs prefix matchers and folds the matched shifts into compressed
//! candidate tables: shifts up to `n/2` are matched against `S[1, n/2]`,
//! larger shifts against prefixes that shrink geometrically so the window
//! always fits. Every k-period survives this filter.
//!
//! Pass 2 replays the stream and, for each recovered progression of
//! candidates `t`, logs the prefix sketches `P(t)` and `P(n - t)` along the
//! progression. At the end `S[1, n-t]` and `S[t+1, n]` are rebuilt for every
//! candidate and compared.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateTable, IntervalPartition, Progression};
use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, FingerprintContext};
use crate::mismatch_sketch::{
    ceil_log2, comparisons_performed, Distance, MismatchSketch, SketchConfig,
};
use crate::prefix_matcher::MatcherInstance;
use crate::progression::ProgressionLog;
use crate::report::{EngineOptions, KPeriod, PeriodReport, SpaceMeter, SpaceStats};

/// A block of candidate shifts `[lo, hi]` matched against `S[1, x]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRange {
    pub lo: usize,
    pub hi: usize,
    pub x: usize,
}

/// Ranges tiling `[1, n-1]`: first `[1, n/2]` with `x = n/2`, then ranges
/// ending at `n - floor(n / 2^(r+1))` with `x = floor(n / 2^(r+1))`.
pub fn shift_layout(n: usize) -> Vec<ShiftRange> {
    if n < 2 {
        return Vec::new();
    }
    let half = n / 2;
    let mut out = vec![ShiftRange {
        lo: 1,
        hi: half,
        x: half,
    }];
    let mut covered = half;
    let mut r = 1;
    while covered < n - 1 {
        let x = n >> (r + 1).min(usize::BITS as usize - 1);
        let hi = (n - x).min(n - 1);
        if hi > covered {
            out.push(ShiftRange {
                lo: covered + 1,
                hi,
                x,
            });
            covered = hi;
        }
        r += 1;
    }
    out
}

/// Block-record budget per progression log before it stops compressing.
pub fn block_record_cap(n: usize, k: usize) -> usize {
    32 * k * k * ceil_log2(n) + 1
}

/// Everything pass 2 needs from pass 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterPassState {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub backend: crate::mismatch_sketch::Backend,
    pub whole: Fingerprint,
    pub small: CandidateTable,
    pub large: Vec<CandidateTable>,
}

impl InterPassState {
    pub fn tables(&self) -> impl Iterator<Item = &CandidateTable> {
        std::iter::once(&self.small).chain(self.large.iter())
    }

    pub fn state_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.tables().map(CandidateTable::state_bytes).sum::<usize>()
    }
}

#[derive(Debug, Clone)]
struct Scan {
    matcher: MatcherInstance,
    table: CandidateTable,
}

/// First pass: candidate collection.
#[derive(Debug, Clone)]
pub struct PassOne {
    n: usize,
    opts: EngineOptions,
    running: MismatchSketch,
    position: usize,
    scans: Vec<Scan>,
}

impl PassOne {
    pub fn new(n: usize, opts: EngineOptions) -> Result<Self> {
        if n < 2 {
            return Err(Error::DegenerateInput(format!(
                "stream of length {n} has no shift in [1, n-1]"
            )));
        }
        let cfg = SketchConfig::new(FingerprintContext::new(opts.seed), opts.k, opts.backend, n);
        let scans = shift_layout(n)
            .into_iter()
            .map(|r| {
                Ok(Scan {
                    matcher: MatcherInstance::new(&cfg, r.x, opts.k, r.lo, r.hi)?,
                    table: CandidateTable::new(IntervalPartition::for_range(r.lo, r.hi, opts.k, n)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            opts,
            running: MismatchSketch::empty(&cfg, 1),
            position: 0,
            scans,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn feed(&mut self, byte: u8) -> Result<()> {
        if self.position == self.n {
            return Err(Error::LengthMismatch {
                declared: self.n,
                fed: self.n + 1,
            });
        }
        self.position += 1;
        self.running.push(byte);
        for scan in &mut self.scans {
            if scan.matcher.is_finished() {
                continue;
            }
            for event in scan.matcher.advance(self.position, &self.running)? {
                scan.table.insert(event.shift)?;
            }
        }
        Ok(())
    }

    pub fn state_modules(&self) -> Vec<(&'static str, usize)> {
        let matchers = self.scans.iter().map(|s| s.matcher.state_bytes()).sum();
        let tables = self.scans.iter().map(|s| s.table.state_bytes()).sum();
        vec![
            ("fingerprint", self.running.state_bytes()),
            ("input_buffer", self.running.shared_bytes()),
            ("prefix_matcher", matchers),
            ("candidates", tables),
        ]
    }

    pub fn finish(self) -> Result<InterPassState> {
        if self.position != self.n {
            return Err(Error::LengthMismatch {
                declared: self.n,
                fed: self.position,
            });
        }
        let mut tables = self.scans.into_iter().map(|s| s.table);
        let small = tables.next().expect("layout always has the small range");
        Ok(InterPassState {
            n: self.n,
            k: self.opts.k,
            seed: self.opts.seed,
            backend: self.opts.backend,
            whole: *self.running.fingerprint(),
            small,
            large: tables.collect(),
        })
    }
}

/// How pass 2 stores the prefix sketches along a candidate progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyMode {
    /// Keep only blocks where consecutive gaps differ.
    #[default]
    Compressed,
    /// Keep one sketch per candidate; used to cross-check the compressed path.
    PerCandidate,
}

#[derive(Debug, Clone)]
struct IntervalCheck {
    at_t: ProgressionLog,
    at_rest: ProgressionLog,
}

/// Second pass: verification of recovered candidates.
#[derive(Debug, Clone)]
pub struct PassTwo {
    state: InterPassState,
    running: MismatchSketch,
    position: usize,
    checks: Vec<IntervalCheck>,
    queue: BinaryHeap<Reverse<(usize, usize)>>,
}

impl PassTwo {
    pub fn new(state: InterPassState, mode: VerifyMode) -> Result<Self> {
        let n = state.n;
        let cfg = SketchConfig::new(FingerprintContext::new(state.seed), state.k, state.backend, n);
        let cap = match mode {
            VerifyMode::Compressed => block_record_cap(n, state.k),
            VerifyMode::PerCandidate => 0,
        };
        let progressions: Vec<Progression> =
            state.tables().flat_map(CandidateTable::progressions).collect();
        let mut checks = Vec::with_capacity(progressions.len());
        let mut queue = BinaryHeap::new();
        for prog in progressions {
            if prog.last() >= n {
                return Err(Error::Range {
                    value: prog.last(),
                    lo: 1,
                    hi: n - 1,
                });
            }
            let at_t = ProgressionLog::new(prog.first, prog.step, prog.count, cap)?;
            let at_rest = ProgressionLog::new(n - prog.last(), prog.step, prog.count, cap)?;
            for (side, log) in [&at_t, &at_rest].into_iter().enumerate() {
                if let Some(p) = log.next_point() {
                    queue.push(Reverse((p, 2 * checks.len() + side)));
                }
            }
            checks.push(IntervalCheck { at_t, at_rest });
        }
        Ok(Self {
            state,
            running: MismatchSketch::empty(&cfg, 1),
            position: 0,
            checks,
            queue,
        })
    }
}

impl PassTwo {
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn feed(&mut self, byte: u8) -> Result<()> {
        let n = self.state.n;
        if self.position == n {
            return Err(Error::LengthMismatch {
                declared: n,
                fed: n + 1,
            });
        }
        self.position += 1;
        self.running.push(byte);
        let pos = self.position;
        while let Some(&Reverse((p, id))) = self.queue.peek() {
            if p != pos {
                break;
            }
            self.queue.pop();
            let check = &mut self.checks[id / 2];
            let log = if id % 2 == 0 {
                &mut check.at_t
            } else {
                &mut check.at_rest
            };
            log.observe(pos, &self.running)?;
            if let Some(next) = log.next_point() {
                self.queue.push(Reverse((next, id)));
            }
        }
        Ok(())
    }

    pub fn state_modules(&self) -> Vec<(&'static str, usize)> {
        let logs = self
            .checks
            .iter()
            .map(|c| c.at_t.state_bytes() + c.at_rest.state_bytes())
            .sum::<usize>()
            + self.queue.len() * std::mem::size_of::<(usize, usize)>();
        vec![
            ("fingerprint", self.running.state_bytes()),
            ("input_buffer", self.running.shared_bytes()),
            ("candidates", self.state.state_bytes()),
            ("verifier", logs),
        ]
    }

    pub fn finish(self) -> Result<PeriodReport> {
        let InterPassState { n, k, whole, .. } = self.state;
        if self.position != n {
            return Err(Error::LengthMismatch {
                declared: n,
                fed: self.position,
            });
        }
        if *self.running.fingerprint() != whole {
            return Err(Error::StreamMutation);
        }
        let before = comparisons_performed();
        let mut report = PeriodReport {
            n,
            k,
            ..PeriodReport::default()
        };
        for check in &self.checks {
            report.bump("logs_overflowed", check.at_t.overflowed() as u64);
            report.bump("logs_overflowed", check.at_rest.overflowed() as u64);
            report.raise("block_records_max", check.at_t.record_count() as u64);
            report.raise("block_records_max", check.at_rest.record_count() as u64);
            for ((t, at_t), (rest, at_rest)) in
                check.at_t.iter_forward().zip(check.at_rest.iter_reverse())
            {
                debug_assert_eq!(t + rest, n);
                report.bump("candidates_recovered", 1);
                if rest <= k {
                    report.periods.push(KPeriod {
                        period: t,
                        mismatches: None,
                    });
                    continue;
                }
                let suffix = self.running.subtract_prefix(&at_t)?;
                if let Distance::AtMost { mismatches, .. } = at_rest.distance(&suffix)? {
                    report.periods.push(KPeriod {
                        period: t,
                        mismatches: Some(mismatches.iter().map(|m| m.position).collect()),
                    });
                }
            }
        }
        report.periods.sort_by_key(|p| p.period);
        report.bump("comparisons", comparisons_performed().saturating_sub(before));
        Ok(report)
    }
}

/// Anything that can be replayed from the start, once per pass.
pub trait Replayable {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn replay(&self, sink: &mut dyn FnMut(u8) -> Result<()>) -> Result<()>;
}

impl Replayable for [u8] {
    fn len(&self) -> usize {
        <[u8]>::len(self)
    }

    fn replay(&self, sink: &mut dyn FnMut(u8) -> Result<()>) -> Result<()> {
        self.iter().try_for_each(|&b| sink(b))
    }
}

impl Replayable for Vec<u8> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn replay(&self, sink: &mut dyn FnMut(u8) -> Result<()>) -> Result<()> {
        self.as_slice().replay(sink)
    }
}

/// Runs both passes, sampling streaming state along the way.
pub fn run_two_pass_with_stats(
    source: &(impl Replayable + ?Sized),
    opts: EngineOptions,
    mode: VerifyMode,
) -> Result<(PeriodReport, SpaceStats)> {
    let started = Instant::now();
    let n = source.len();
    let mut meter = SpaceMeter::new(n);
    let report = if n < 2 {
        PeriodReport {
            n,
            k: opts.k,
            ..PeriodReport::default()
        }
    } else {
        let mut first = PassOne::new(n, opts)?;
        source.replay(&mut |b| {
            first.feed(b)?;
            if meter.due(first.position()) {
                meter.record(&first.state_modules());
            }
            Ok(())
        })?;
        meter.record(&first.state_modules());
        let state = first.finish()?;

        let mut second = PassTwo::new(state, mode)?;
        source.replay(&mut |b| {
            second.feed(b)?;
            if meter.due(second.position()) {
                meter.record(&second.state_modules());
            }
            Ok(())
        })?;
        meter.record(&second.state_modules());
        second.finish()?
    };
    let mut stats = meter.into_stats();
    stats.n = n;
    stats.k = opts.k;
    stats.passes = 2;
    stats.backend = Some(opts.backend);
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((report, stats))
}

/// All k-periods of `source`.
pub fn run_two_pass(source: &(impl Replayable + ?Sized), opts: EngineOptions) -> Result<PeriodReport> {
    run_two_pass_with_stats(source, opts, VerifyMode::Compressed).map(|(r, _)| r)
}
