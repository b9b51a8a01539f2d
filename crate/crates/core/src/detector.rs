//! Single-pass verification of shifts in a range against a prefix `S[1, N]`.
//!
//! A shift `i` is a candidate once `S[i+1, i+x]` matches `S[1, x]`; the
//! match is reported at time `i + x`, which must not exceed `N - i` so that
//! `P(N - i)` is still ahead. When detection is over, every stored candidate
//! gets a progression log over the positions `N - i`. At time `N` the pairs
//! `S[1, N-i]`, `S[i+1, N]` are rebuilt and compared.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mismatch_sketch::{Distance, Mismatch, MismatchSketch, SketchConfig};
use crate::prefix_matcher::{MatchEvent, MatcherInstance};
use crate::progression::{ProgressionLog, RunStore};

#[derive(Debug, Clone)]
enum Store {
    Compressed(RunStore),
    Direct(Vec<(usize, MismatchSketch)>),
}

impl Store {
    fn len(&self) -> usize {
        match self {
            Store::Compressed(r) => r.len(),
            Store::Direct(v) => v.len(),
        }
    }

    fn push(&mut self, i: usize, prefix: MismatchSketch) -> Result<()> {
        match self {
            Store::Compressed(r) => r.push_back(i, prefix),
            Store::Direct(v) => {
                v.push((i, prefix));
                Ok(())
            }
        }
    }

    fn pop_back(&mut self) -> Option<(usize, MismatchSketch)> {
        match self {
            Store::Compressed(r) => r.pop_back(),
            Store::Direct(v) => v.pop(),
        }
    }

    /// `(head, gap, count)` per stored run.
    fn runs(&self) -> Vec<(usize, usize, usize)> {
        match self {
            Store::Compressed(r) => r.runs().collect(),
            Store::Direct(v) => v.iter().map(|&(i, _)| (i, 0, 1)).collect(),
        }
    }

    fn state_bytes(&self) -> usize {
        match self {
            Store::Compressed(r) => r.state_bytes(),
            Store::Direct(v) => v.iter().map(|(_, s)| s.state_bytes()).sum(),
        }
    }
}

/// A verified shift with its mismatches (`byte_a = S[q]`,
/// `byte_b = S[q + period]`) and the prefix sketch `P(N - period)`.
#[derive(Debug, Clone)]
pub(crate) struct Verified {
    pub period: usize,
    pub mismatches: Vec<Mismatch>,
    pub rest: MismatchSketch,
}

#[derive(Debug, Clone)]
pub(crate) struct Detector {
    target: usize,
    limit: usize,
    cap: usize,
    matcher: MatcherInstance,
    store: Store,
    logs: Option<Vec<ProgressionLog>>,
    detected: usize,
}

impl Detector {
    /// Verifies shifts in `[lo, hi]` against `S[1, target]` using window `x`.
    pub fn new(
        cfg: &Arc<SketchConfig>,
        target: usize,
        x: usize,
        lo: usize,
        hi: usize,
        limit: usize,
        cap: usize,
    ) -> Result<Self> {
        if hi >= lo && 2 * hi + x > target {
            return Err(Error::Precondition(format!(
                "shift {hi} would be reported at {} after position {} has passed",
                hi + x,
                target.saturating_sub(hi)
            )));
        }
        Ok(Self {
            target,
            limit,
            cap,
            matcher: MatcherInstance::new(cfg, x, limit, lo, hi)?,
            store: Store::Compressed(RunStore::new()),
            logs: None,
            detected: 0,
        })
    }

    /// Keeps one sketch per candidate instead of compressing runs.
    pub fn use_direct_storage(&mut self) -> Result<()> {
        if self.store.len() > 0 {
            return Err(Error::Precondition("storage mode fixed after first candidate".into()));
        }
        self.store = Store::Direct(Vec::new());
        Ok(())
    }

    pub fn detected(&self) -> usize {
        self.detected
    }

    /// Advances to `pos` with `running = P(pos)`; returns new candidates.
    pub fn step(&mut self, pos: usize, running: &MismatchSketch) -> Result<Vec<MatchEvent>> {
        let mut events = Vec::new();
        if !self.matcher.is_finished() {
            events = self.matcher.advance(pos, running)?;
            for e in &events {
                self.store.push(e.shift, e.prefix.clone())?;
                self.detected += 1;
            }
        }
        if self.logs.is_none() && self.matcher.is_finished() {
            let mut logs = Vec::new();
            for (head, gap, count) in self.store.runs() {
                let tail = head + gap * (count - 1);
                let first = self.target - tail;
                debug_assert!(first >= pos, "log point {first} already passed at {pos}");
                logs.push(ProgressionLog::new(first, gap, count, self.cap)?);
            }
            self.logs = Some(logs);
        }
        if pos <= self.target {
            for log in self.logs.iter_mut().flatten() {
                log.observe(pos, running)?;
            }
        }
        Ok(events)
    }

    /// Compares every candidate; `whole = P(target)`. Visits candidates from
    /// the largest shift down.
    pub fn finalize(
        &mut self,
        whole: &MismatchSketch,
        mut visit: impl FnMut(usize),
    ) -> Result<Vec<Verified>> {
        if whole.start() != 1 || whole.len() != self.target {
            return Err(Error::LengthMismatch {
                declared: self.target,
                fed: whole.len(),
            });
        }
        let logs = self
            .logs
            .take()
            .ok_or_else(|| Error::Precondition("detection did not finish".into()))?;
        let mut out = Vec::new();
        for log in logs.iter().rev() {
            if !log.is_complete() {
                return Err(Error::Precondition("progression log missed a point".into()));
            }
            for (rest_pos, rest) in log.iter_forward() {
                let (i, prefix) = self.store.pop_back().expect("one stored shift per log point");
                debug_assert_eq!(rest_pos + i, self.target);
                visit(i);
                let suffix = whole.subtract_prefix(&prefix)?;
                if let Distance::AtMost { mismatches, .. } = rest.distance_within(&suffix, self.limit)? {
                    out.push(Verified {
                        period: i,
                        mismatches,
                        rest,
                    });
                }
            }
        }
        out.reverse();
        Ok(out)
    }

    pub fn state_bytes(&self) -> usize {
        let logs: usize = self.logs.iter().flatten().map(ProgressionLog::state_bytes).sum();
        self.matcher.state_bytes() + self.store.state_bytes() + logs
    }
}
