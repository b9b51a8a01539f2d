//! Compressed storage for prefix sketches taken along arithmetic progressions.
//!
//! Both structures exploit the same fact: if `i` and `i + g` are consecutive
//! stored positions, `P(i + g)` is `P(i)` followed by the block
//! `S[i+1, i+g]`. Whenever consecutive blocks have equal content one block
//! sketch serves the whole stretch.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mismatch_sketch::MismatchSketch;

const ADJACENT: &str = "progression blocks are adjacent by construction";

#[derive(Debug, Clone)]
struct Run {
    head: usize,
    head_sketch: MismatchSketch,
    tail: usize,
    tail_sketch: MismatchSketch,
    gap: usize,
    block: Option<MismatchSketch>,
    count: usize,
}

impl Run {
    fn single(i: usize, sketch: MismatchSketch) -> Self {
        Self {
            head: i,
            head_sketch: sketch.clone(),
            tail: i,
            tail_sketch: sketch,
            gap: 0,
            block: None,
            count: 1,
        }
    }

    fn state_bytes(&self) -> usize {
        let mut total = self.head_sketch.state_bytes() + std::mem::size_of::<Self>();
        if self.count > 1 {
            total += self.tail_sketch.state_bytes();
        }
        total + self.block.as_ref().map_or(0, |b| b.state_bytes())
    }
}

/// FIFO of `(i, P(i))` pairs with increasing `i`, stored as runs of constant
/// gap and identical gap content.
#[derive(Debug, Clone, Default)]
pub struct RunStore {
    runs: VecDeque<Run>,
    len: usize,
}

impl RunStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of stored positions.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    /// `(head, gap, count)` of each run, oldest first.
    pub fn runs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.runs.iter().map(|r| (r.head, r.gap, r.count))
    }

    pub fn front(&self) -> Option<usize> {
        self.runs.front().map(|r| r.head)
    }

    pub fn back(&self) -> Option<usize> {
        self.runs.back().map(|r| r.tail)
    }

    /// Appends `(i, P(i))`; `i` must exceed every stored position.
    pub fn push_back(&mut self, i: usize, prefix: MismatchSketch) -> Result<()> {
        if let Some(last) = self.back() {
            if i <= last {
                return Err(Error::StreamOrder {
                    expected: last + 1,
                    got: i,
                });
            }
        }
        self.len += 1;
        let Some(run) = self.runs.back_mut() else {
            self.runs.push_back(Run::single(i, prefix));
            return Ok(());
        };
        let block = prefix.subtract_prefix(&run.tail_sketch)?;
        let extends = match &run.block {
            None => true,
            Some(b) => i - run.tail == run.gap && b.same_content(&block),
        };
        if extends {
            if run.block.is_none() {
                run.gap = i - run.tail;
                run.block = Some(block);
            }
            run.tail = i;
            run.tail_sketch = prefix;
            run.count += 1;
        } else {
            self.runs.push_back(Run::single(i, prefix));
        }
        Ok(())
    }

    pub fn pop_front(&mut self) -> Option<(usize, MismatchSketch)> {
        let run = self.runs.front_mut()?;
        self.len -= 1;
        let out = (run.head, run.head_sketch.clone());
        if run.count == 1 {
            self.runs.pop_front();
        } else {
            let block = run.block.as_ref().expect("multi-element run has a block");
            run.head += run.gap;
            run.count -= 1;
            run.head_sketch = if run.count == 1 {
                run.tail_sketch.clone()
            } else {
                let next = block.shifted(run.head_sketch.end());
                run.head_sketch.concat(&next).expect(ADJACENT)
            };
        }
        Some(out)
    }

    pub fn pop_back(&mut self) -> Option<(usize, MismatchSketch)> {
        let run = self.runs.back_mut()?;
        self.len -= 1;
        let out = (run.tail, run.tail_sketch.clone());
        if run.count == 1 {
            self.runs.pop_back();
        } else {
            let block = run.block.as_ref().expect("multi-element run has a block");
            run.tail -= run.gap;
            run.count -= 1;
            run.tail_sketch = if run.count == 1 {
                run.head_sketch.clone()
            } else {
                let last = block.shifted(run.tail + 1);
                run.tail_sketch.without_suffix(&last).expect(ADJACENT)
            };
        }
        Some(out)
    }

    pub fn state_bytes(&self) -> usize {
        self.runs.iter().map(Run::state_bytes).sum()
    }
}

/// Prefix sketches `P(a_c)` for `a_c = first + c·step`, `c < count`, fed in
/// stream order.
///
/// Only the blocks where consecutive gaps differ in content are stored. If
/// that exceeds `cap` records the log falls back to keeping every later
/// prefix sketch explicitly.
#[derive(Debug, Clone)]
pub struct ProgressionLog {
    first: usize,
    step: usize,
    count: usize,
    cap: usize,
    seen: usize,
    anchor: Option<MismatchSketch>,
    last: Option<MismatchSketch>,
    records: Vec<(usize, MismatchSketch)>,
    overflow_from: Option<usize>,
    explicit: Vec<MismatchSketch>,
}

impl ProgressionLog {
    pub fn new(first: usize, step: usize, count: usize, cap: usize) -> Result<Self> {
        if count > 1 && step == 0 {
            return Err(Error::Precondition(
                "progression with several points needs a positive step".into(),
            ));
        }
        Ok(Self {
            first,
            step,
            count,
            cap,
            seen: 0,
            anchor: None,
            last: None,
            records: Vec::new(),
            overflow_from: None,
            explicit: Vec::new(),
        })
    }

    pub fn point(&self, c: usize) -> usize {
        self.first + c * self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_complete(&self) -> bool {
        self.seen == self.count
    }

    /// Whether the log gave up on compression.
    pub fn overflowed(&self) -> bool {
        self.overflow_from.is_some()
    }

    /// Next stream position this log wants to see, if any.
    pub fn next_point(&self) -> Option<usize> {
        (self.seen < self.count).then(|| self.point(self.seen))
    }

    /// Feeds the running prefix sketch `P(pos)`; positions off the
    /// progression are ignored.
    pub fn observe(&mut self, pos: usize, running: &MismatchSketch) -> Result<()> {
        if self.next_point() != Some(pos) {
            return Ok(());
        }
        let c = self.seen;
        self.seen += 1;
        if let Some(from) = self.overflow_from {
            debug_assert!(c >= from);
            self.explicit.push(running.clone());
            self.last = Some(running.clone());
            return Ok(());
        }
        let Some(last) = self.last.take() else {
            self.anchor = Some(running.clone());
            self.last = Some(running.clone());
            return Ok(());
        };
        let block = running.subtract_prefix(&last)?;
        let repeats = self
            .records
            .last()
            .is_some_and(|(_, b)| b.same_content(&block));
        if !repeats {
            if self.records.len() >= self.cap {
                self.overflow_from = Some(c);
                self.explicit = vec![last, running.clone()];
                self.last = Some(running.clone());
                return Ok(());
            }
            self.records.push((c, block));
        }
        self.last = Some(running.clone());
        Ok(())
    }

    /// Block `S[a_{c-1}+1, a_c]` for a compressed index `c ≥ 1`.
    fn block_for(&self, c: usize) -> &MismatchSketch {
        let idx = self.records.partition_point(|(rc, _)| *rc <= c);
        &self.records[idx - 1].1
    }

    fn explicit_at(&self, c: usize) -> Option<&MismatchSketch> {
        let from = self.overflow_from?;
        (c + 1 >= from).then(|| &self.explicit[c + 1 - from])
    }

    /// `(a_c, P(a_c))` in increasing order of `c`.
    pub fn iter_forward(&self) -> impl Iterator<Item = (usize, MismatchSketch)> + '_ {
        let mut current: Option<MismatchSketch> = None;
        (0..self.seen).map(move |c| {
            let sketch = if let Some(e) = self.explicit_at(c) {
                e.clone()
            } else if let Some(prev) = current.take() {
                let block = self.block_for(c).shifted(prev.end());
                prev.concat(&block).expect(ADJACENT)
            } else {
                self.anchor.clone().expect("observed log has an anchor")
            };
            current = Some(sketch.clone());
            (self.point(c), sketch)
        })
    }

    /// `(a_c, P(a_c))` in decreasing order of `c`.
    pub fn iter_reverse(&self) -> impl Iterator<Item = (usize, MismatchSketch)> + '_ {
        let mut current: Option<MismatchSketch> = None;
        (0..self.seen).rev().map(move |c| {
            let sketch = if let Some(e) = self.explicit_at(c) {
                e.clone()
            } else if let Some(next) = current.take() {
                let block = self.block_for(c + 1).shifted(self.point(c) + 1);
                next.without_suffix(&block).expect(ADJACENT)
            } else if c + 1 == self.seen {
                self.last.clone().expect("observed log has a last point")
            } else {
                unreachable!("reverse iteration starts at the last point")
            };
            current = Some(sketch.clone());
            (self.point(c), sketch)
        })
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn state_bytes(&self) -> usize {
        let sketches = self
            .anchor
            .iter()
            .chain(self.last.iter())
            .chain(self.records.iter().map(|(_, b)| b))
            .chain(self.explicit.iter());
        std::mem::size_of::<Self>() + sketches.map(MismatchSketch::state_bytes).sum::<usize>()
    }
}
