//! Online self-matching of a stream against its own length-`x` prefix.
//!
//! A shift `i` is reported when `HAM(S[1, x], S[i+1, i+x]) ≤ k`, exactly on
//! reading position `i + x`. Shifts are filtered through prefixes of
//! doubling length: a shift is tested against `S[1, ℓ]` at time `i + ℓ` and
//! only survivors wait for the next level. Survivors of one level agree with
//! a common prefix up to `k` mismatches, so they are nearly periodic and each
//! level's queue compresses into few runs.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mismatch_sketch::{Distance, Mismatch, MismatchSketch, SketchConfig};
use crate::progression::RunStore;

/// A matched shift together with the prefix sketch `P(shift)` and the
/// mismatches (pattern-side positions in `[1, x]`).
#[derive(Debug, Clone)]
pub struct MatchEvent {
    pub shift: usize,
    pub prefix: MismatchSketch,
    pub mismatches: Vec<Mismatch>,
}

/// Lengths of the filtering levels for prefix length `x`.
fn level_lengths(x: usize, k: usize) -> Vec<usize> {
    let mut levels = Vec::new();
    let mut len = 1usize;
    while len < x {
        if len > 2 * k {
            levels.push(len);
        }
        len *= 2;
    }
    if x > 0 {
        levels.push(x);
    }
    levels
}

#[derive(Debug, Clone)]
pub struct MatcherInstance {
    cfg: Arc<SketchConfig>,
    x: usize,
    limit: usize,
    lo: usize,
    hi: usize,
    levels: Vec<usize>,
    patterns: Vec<Option<MismatchSketch>>,
    stages: Vec<RunStore>,
    position: usize,
    running: Option<MismatchSketch>,
    last_emitted: Option<usize>,
}

impl MatcherInstance {
    /// Matches shifts in `[lo, hi]` against `S[1, x]` with at most `limit`
    /// mismatches (`limit ≤ cfg.k()`).
    pub fn new(cfg: &Arc<SketchConfig>, x: usize, limit: usize, lo: usize, hi: usize) -> Result<Self> {
        if limit > cfg.k() {
            return Err(Error::Precondition(format!(
                "mismatch limit {limit} exceeds sketch budget {}",
                cfg.k()
            )));
        }
        let levels = level_lengths(x, limit);
        Ok(Self {
            cfg: Arc::clone(cfg),
            x,
            limit,
            lo: lo.max(1),
            hi,
            patterns: vec![None; levels.len()],
            stages: vec![RunStore::new(); levels.len()],
            levels,
            position: 0,
            running: None,
            last_emitted: None,
        })
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn position(&self) -> usize {
        self.position
    }

    /// Every shift in range has been decided.
    pub fn is_finished(&self) -> bool {
        self.lo > self.hi || self.position >= self.hi.saturating_add(self.x)
    }

    /// Shifts currently awaiting a decision.
    pub fn pending(&self) -> usize {
        self.stages.iter().map(RunStore::len).sum()
    }

    /// Feeds one byte, maintaining a private running prefix sketch.
    pub fn feed(&mut self, position: usize, byte: u8) -> Result<Vec<MatchEvent>> {
        if position != self.position + 1 {
            return Err(Error::StreamOrder {
                expected: self.position + 1,
                got: position,
            });
        }
        let mut running = self
            .running
            .take()
            .unwrap_or_else(|| MismatchSketch::empty(&self.cfg, 1));
        running.push(byte);
        let out = self.advance(position, &running);
        self.running = Some(running);
        out
    }

    /// Advances to `position` given the shared running sketch `P(position)`.
    pub fn advance(&mut self, position: usize, running: &MismatchSketch) -> Result<Vec<MatchEvent>> {
        if position != self.position + 1 {
            return Err(Error::StreamOrder {
                expected: self.position + 1,
                got: position,
            });
        }
        if running.start() != 1 || running.len() != position {
            return Err(Error::Adjacency(format!(
                "running sketch covers [{}, {}) at position {position}",
                running.start(),
                running.end()
            )));
        }
        self.position = position;
        let mut events = Vec::new();

        if self.x == 0 {
            if (self.lo..=self.hi).contains(&position) {
                events.push(MatchEvent {
                    shift: position,
                    prefix: running.clone(),
                    mismatches: Vec::new(),
                });
            }
            self.note_emitted(&events);
            return Ok(events);
        }

        for (j, &len) in self.levels.iter().enumerate() {
            if len == position {
                self.patterns[j] = Some(running.clone());
            }
        }

        // Deeper stages first so a promotion never jumps a queue this round.
        for j in (0..self.levels.len()).rev() {
            let len = self.levels[j];
            let Some(shift) = self.stages[j].front() else {
                continue;
            };
            if shift + len != position {
                continue;
            }
            let (shift, prefix) = self.stages[j].pop_front().expect("front exists");
            let pattern = self.patterns[j]
                .as_ref()
                .expect("pattern is captured before its first test");
            let text = running.subtract_prefix(&prefix)?;
            match pattern.distance_within(&text, self.limit)? {
                Distance::MoreThan(_) => {}
                Distance::AtMost { mismatches, .. } => {
                    if j + 1 == self.levels.len() {
                        events.push(MatchEvent {
                            shift,
                            prefix,
                            mismatches,
                        });
                    } else {
                        self.stages[j + 1].push_back(shift, prefix)?;
                    }
                }
            }
        }

        if (self.lo..=self.hi).contains(&position) {
            self.stages[0].push_back(position, running.clone())?;
        }
        self.note_emitted(&events);
        Ok(events)
    }

    fn note_emitted(&mut self, events: &[MatchEvent]) {
        debug_assert!(events.len() <= 1);
        if let Some(e) = events.last() {
            debug_assert!(self.last_emitted.is_none_or(|l| l < e.shift));
            self.last_emitted = Some(e.shift);
        }
    }

    pub fn state_bytes(&self) -> usize {
        let patterns: usize = self.patterns.iter().flatten().map(|p| p.state_bytes()).sum();
        let stages: usize = self.stages.iter().map(RunStore::state_bytes).sum();
        let running = self.running.as_ref().map_or(0, |r| r.state_bytes());
        std::mem::size_of::<Self>() + patterns + stages + running
    }
}
