//! One-pass detection of every k-period `p ≤ n/2`.
//!
//! Two processes share the stream.
//!
//! *Small shifts* `p ≤ n/4` are matched against `S[1, n/2]`; a match is
//! known by time `p + n/2 ≤ n - p`, early enough to log `P(n - p)`.
//!
//! *Large shifts* `n/4 < p ≤ n/2` cannot wait that long, so they are grouped
//! by the window `2^m`, the largest power of two not exceeding `n - 2p`,
//! giving ranges `I_m = [n/2 - 2^m + 1, n/2 - 2^(m-1)]`. Each group has its
//! own matcher. A nested detector finds the smallest k-period `π_m ≤ 2^m/4`
//! of `S[1, 2^m]`. When `π_m < 2^m/4` the group's candidates are
//! near-periodic and are stored compressed, and the group also tracks how
//! far the `π_m` structure extends (`x_d`, `y`, `Δ`); those values are
//! reported as diagnostics. Otherwise candidates are few and kept one by
//! one.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use crate::detector::{Detector, Verified};
use crate::error::{Error, Result};
use crate::fingerprint::FingerprintContext;
use crate::mismatch_sketch::{Distance, Mismatch, MismatchSketch, SketchConfig};
use crate::report::{EngineOptions, KPeriod, PeriodReport, SpaceMeter, SpaceStats};
use crate::two_pass::block_record_cap;

/// Positions `z ∈ [i+1, i+N-π]` with `S[z] != S[z+π]`, derived without
/// looking at the stream from:
/// * `period_mismatches`: the π-mismatches of `S[1, N]` (`byte_a = S[q]`,
///   `byte_b = S[q+π]`),
/// * `window`: the mismatches between `S[1, N]` and `S[i+1, i+N]`
///   (`byte_a = S[q]`, `byte_b = S[i+q]`).
pub(crate) fn window_period_mismatches(
    period_mismatches: &[Mismatch],
    window: &[Mismatch],
    len: usize,
    pi: usize,
    shift: usize,
) -> Vec<usize> {
    if pi >= len {
        return Vec::new();
    }
    let e: BTreeMap<usize, &Mismatch> = period_mismatches.iter().map(|m| (m.position, m)).collect();
    let d: BTreeMap<usize, &Mismatch> = window.iter().map(|m| (m.position, m)).collect();
    let mut probe: BTreeSet<usize> = e.keys().copied().collect();
    for &q in d.keys() {
        probe.insert(q);
        if q > pi {
            probe.insert(q - pi);
        }
    }
    let mut out = Vec::new();
    for q in probe.into_iter().filter(|&q| q >= 1 && q + pi <= len) {
        let (left, right) = match e.get(&q) {
            Some(m) => (m.byte_a, m.byte_b),
            None => {
                // S[q] == S[q+π], and at least one of them is a window mismatch
                let known = d
                    .get(&q)
                    .or_else(|| d.get(&(q + pi)))
                    .map(|m| m.byte_a)
                    .expect("probe positions touch a window mismatch");
                (known, known)
            }
        };
        let left = d.get(&q).map_or(left, |m| m.byte_b);
        let right = d.get(&(q + pi)).map_or(right, |m| m.byte_b);
        if left != right {
            out.push(shift + q);
        }
    }
    out
}

/// Counts mismatches between consecutive length-`π` blocks following a
/// boundary, stopping once the total exceeds `limit` or `blocks` were seen.
#[derive(Debug, Clone)]
struct BlockCounter {
    pi: usize,
    limit: usize,
    prev: MismatchSketch,
    boundary: MismatchSketch,
    next_at: usize,
    remaining: usize,
    cum: usize,
    blocks: usize,
}

impl BlockCounter {
    /// `prev` is the block ending at the boundary; `boundary = P(pos)`.
    fn new(
        pi: usize,
        limit: usize,
        base: usize,
        prev: MismatchSketch,
        boundary: MismatchSketch,
        blocks: usize,
    ) -> Self {
        Self {
            pi,
            limit,
            next_at: boundary.end() - 1 + pi,
            prev,
            boundary,
            remaining: if base > limit { 0 } else { blocks },
            cum: base,
            blocks: 0,
        }
    }

    fn active(&self) -> bool {
        self.remaining > 0
    }

    /// Returns the running total after a completed block, if any.
    fn observe(&mut self, pos: usize, running: &MismatchSketch) -> Result<Option<usize>> {
        if !self.active() || pos != self.next_at {
            return Ok(None);
        }
        let block = running.subtract_prefix(&self.boundary)?;
        self.cum += match self.prev.distance_within(&block, self.limit)? {
            Distance::AtMost { count, .. } => count,
            Distance::MoreThan(_) => self.limit + 1,
        };
        self.blocks += 1;
        self.remaining -= 1;
        if self.cum > self.limit {
            self.remaining = 0;
        }
        self.prev = block;
        self.boundary = running.clone();
        self.next_at += self.pi;
        Ok(Some(self.cum))
    }

    /// Blocks appended while the total stayed within `limit`.
    fn within(&self) -> i64 {
        if self.cum > self.limit {
            self.blocks as i64 - 1
        } else {
            self.blocks as i64
        }
    }

    fn state_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.prev.state_bytes() + self.boundary.state_bytes()
    }
}

/// Smallest k-period `π ≤ N/4` of `S[1, N]` with its mismatches and the
/// last block `S[N-π+1, N]`.
#[derive(Debug, Clone)]
struct Probe {
    pi: usize,
    records: Vec<Mismatch>,
    tail: MismatchSketch,
}

#[derive(Debug, Clone)]
struct LargeGroup {
    window: usize,
    detector: Detector,
    prober: Option<Detector>,
    probe: Option<Probe>,
    xd: Option<BlockCounter>,
    xd_table: Vec<i64>,
    y: Option<BlockCounter>,
    z: BTreeSet<usize>,
}

type Diag = BTreeMap<String, u64>;

fn bump(diag: &mut Diag, key: &str, by: u64) {
    *diag.entry(key.to_owned()).or_default() += by;
}

fn raise(diag: &mut Diag, key: &str, value: u64) {
    let slot = diag.entry(key.to_owned()).or_default();
    *slot = (*slot).max(value);
}

impl LargeGroup {
    fn new(
        cfg: &Arc<SketchConfig>,
        n: usize,
        window: usize,
        lo: usize,
        hi: usize,
        k: usize,
        cap: usize,
    ) -> Result<Self> {
        let mut detector = Detector::new(cfg, n, window, lo, hi, k, cap)?;
        let prober = if window >= 4 {
            Some(Detector::new(cfg, window, window / 2, 1, window / 4, k, cap)?)
        } else {
            detector.use_direct_storage()?;
            None
        };
        Ok(Self {
            window,
            detector,
            prober,
            probe: None,
            xd: None,
            xd_table: Vec::new(),
            y: None,
            z: BTreeSet::new(),
        })
    }

    fn compressed(&self) -> bool {
        self.probe.is_some()
    }

    fn resolve_probe(&mut self, running: &MismatchSketch, budget: usize) -> Result<()> {
        let Some(mut prober) = self.prober.take() else {
            return Ok(());
        };
        let found = prober.finalize(running, |_| {})?.into_iter().next();
        match found {
            Some(Verified {
                period,
                mismatches,
                rest,
            }) if 4 * period < self.window => {
                let tail = running.subtract_prefix(&rest)?;
                let c0 = mismatches.len();
                self.xd_table = (0..=budget)
                    .map(|d| if c0 <= d { 0 } else { -1 })
                    .collect();
                self.xd = Some(BlockCounter::new(
                    period,
                    budget,
                    c0,
                    tail.clone(),
                    running.clone(),
                    self.window / period,
                ));
                self.probe = Some(Probe {
                    pi: period,
                    records: mismatches,
                    tail,
                });
            }
            _ => self.detector.use_direct_storage()?,
        }
        Ok(())
    }

    fn step(
        &mut self,
        pos: usize,
        running: &MismatchSketch,
        half: usize,
        budget: usize,
    ) -> Result<()> {
        if let Some(prober) = &mut self.prober {
            prober.step(pos, running)?;
            if pos == self.window {
                self.resolve_probe(running, budget)?;
            }
        }
        if let Some(xd) = &mut self.xd {
            if let Some(cum) = xd.observe(pos, running)? {
                let blocks = xd.blocks as i64;
                for slot in self.xd_table.iter_mut().skip(cum) {
                    *slot = blocks;
                }
            }
        }
        if let Some(y) = &mut self.y {
            y.observe(pos, running)?;
        }
        for event in self.detector.step(pos, running)? {
            let Some(probe) = &self.probe else { continue };
            let (pi, shift) = (probe.pi, event.shift);
            let found =
                window_period_mismatches(&probe.records, &event.mismatches, self.window, pi, shift);
            let base = found.len();
            self.z.extend(found);
            // the block before the first tracked one is the probe tail, moved
            // under the window and patched where the window differs
            let mut prev = probe.tail.shifted(shift + self.window - pi + 1);
            let patches: Vec<(usize, u8, u8)> = event
                .mismatches
                .iter()
                .filter(|m| m.position + pi > self.window)
                .map(|m| (shift + m.position, m.byte_a, m.byte_b))
                .collect();
            prev.apply_substitutions(&patches)?;
            let blocks = half.saturating_sub(shift) / pi;
            self.y = Some(BlockCounter::new(pi, budget, base, prev, running.clone(), blocks));
        }
        Ok(())
    }

    fn finalize(
        &mut self,
        whole: &MismatchSketch,
        budget: usize,
        diag: &mut Diag,
    ) -> Result<Vec<Verified>> {
        let compressed = self.compressed();
        let LargeGroup {
            detector,
            z,
            xd_table,
            y,
            probe,
            window,
            ..
        } = self;
        let y_within = y.as_ref().map(BlockCounter::within);
        let mut last: Option<usize> = None;
        let mut after = 0i64;
        let mut deltas = Vec::new();
        let verified = detector.finalize(whole, |i| {
            if !compressed {
                return;
            }
            let i_r = *last.get_or_insert(i);
            let delta = if i < i_r { z.range(i + 1..=i_r).count() } else { 0 };
            deltas.push((delta, after));
            after += 1;
        })?;

        let detected = detector.detected() as u64;
        bump(diag, "large_candidates", detected);
        match probe {
            Some(_) => {
                bump(diag, "groups_compressed", 1);
                for (delta, after) in deltas {
                    raise(diag, "delta_max", delta as u64);
                    if delta > budget {
                        bump(diag, "delta_over_bound", 1);
                        continue;
                    }
                    let expected = xd_table[budget - delta];
                    if y_within.is_none_or(|y| y + after != expected) {
                        bump(diag, "consistency_flags", 1);
                    }
                }
                if let Some(y) = y {
                    bump(diag, "y_reached_s", u64::from(!y.active() && y.cum <= budget));
                }
            }
            None if *window >= 4 => {
                bump(diag, "groups_direct", 1);
                raise(diag, "direct_group_max_candidates", detected);
            }
            None => bump(diag, "groups_direct", 1),
        }
        Ok(verified)
    }

    fn state_bytes(&self) -> usize {
        let probe = self
            .probe
            .as_ref()
            .map_or(0, |p| p.tail.state_bytes() + p.records.len() * std::mem::size_of::<Mismatch>());
        self.detector.state_bytes()
            + self.prober.as_ref().map_or(0, Detector::state_bytes)
            + probe
            + self.xd.as_ref().map_or(0, BlockCounter::state_bytes)
            + self.y.as_ref().map_or(0, BlockCounter::state_bytes)
            + self.z.len() * std::mem::size_of::<usize>()
            + self.xd_table.len() * std::mem::size_of::<i64>()
    }
}

/// `(window, lo, hi)` for each group of large shifts `(n/4, n/2]`; the
/// window is the largest power of two not above `n - 2i`, or 0 at `i = n/2`
/// for even `n`.
pub fn large_groups(n: usize) -> Vec<(usize, usize, usize)> {
    let (first, last) = (n / 4 + 1, n / 2);
    if first > last {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut window = 1usize;
    while window <= n - 2 * first {
        // 2i ∈ (n - 2·window, n - window]
        let hi = ((n - window) / 2).min(last);
        let lo = if n >= 2 * window {
            ((n - 2 * window) / 2 + 1).max(first)
        } else {
            first
        };
        if lo <= hi {
            out.push((window, lo, hi));
        }
        window *= 2;
    }
    if n.is_multiple_of(2) {
        out.push((0, last, last));
    }
    out.sort_by_key(|&(_, lo, _)| lo);
    out
}

/// Single-pass engine over a stream of declared length `n`.
#[derive(Debug, Clone)]
pub struct OnePass {
    n: usize,
    k: usize,
    budget: usize,
    running: MismatchSketch,
    position: usize,
    small: Option<Detector>,
    groups: Vec<LargeGroup>,
}

impl OnePass {
    pub fn new(n: usize, opts: EngineOptions) -> Result<Self> {
        let k = opts.k;
        let budget = 3 * k;
        let ctx = FingerprintContext::new(opts.seed);
        let cfg = SketchConfig::new(ctx, budget, opts.backend, n.max(2));
        let cap = block_record_cap(n, k);
        let small = if n / 4 >= 1 {
            Some(Detector::new(&cfg, n, n / 2, 1, n / 4, k, cap)?)
        } else {
            None
        };
        let groups = large_groups(n)
            .into_iter()
            .map(|(window, lo, hi)| LargeGroup::new(&cfg, n, window, lo, hi, k, cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            k,
            budget,
            running: MismatchSketch::empty(&cfg, 1),
            position: 0,
            small,
            groups,
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
        let pos = self.position;
        if let Some(small) = &mut self.small {
            small.step(pos, &self.running)?;
        }
        for group in &mut self.groups {
            group.step(pos, &self.running, self.n / 2, self.budget)?;
        }
        Ok(())
    }

    pub fn state_modules(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("fingerprint", self.running.state_bytes()),
            ("input_buffer", self.running.shared_bytes()),
            ("small_process", self.small.as_ref().map_or(0, Detector::state_bytes)),
            (
                "large_process",
                self.groups.iter().map(LargeGroup::state_bytes).sum(),
            ),
        ]
    }

    pub fn finish(mut self) -> Result<PeriodReport> {
        if self.position != self.n {
            return Err(Error::LengthMismatch {
                declared: self.n,
                fed: self.position,
            });
        }
        let before = crate::mismatch_sketch::comparisons_performed();
        let mut diag = Diag::new();
        let mut verified = Vec::new();
        if let Some(small) = &mut self.small {
            verified.extend(small.finalize(&self.running, |_| {})?);
            bump(&mut diag, "small_candidates", small.detected() as u64);
        }
        for group in &mut self.groups {
            verified.extend(group.finalize(&self.running, self.budget, &mut diag)?);
        }
        let mut periods: Vec<KPeriod> = verified
            .into_iter()
            .map(|v| KPeriod {
                period: v.period,
                mismatches: Some(v.mismatches.iter().map(|m| m.position).collect()),
            })
            .collect();
        periods.sort_by_key(|p| p.period);
        let mut report = PeriodReport {
            n: self.n,
            k: self.k,
            periods,
            diagnostics: diag,
        };
        report.bump(
            "comparisons",
            crate::mismatch_sketch::comparisons_performed().saturating_sub(before),
        );
        Ok(report)
    }
}

/// Runs the single pass over `bytes`, sampling streaming state.
pub fn run_one_pass_with_stats(
    bytes: impl IntoIterator<Item = u8>,
    n: usize,
    opts: EngineOptions,
) -> Result<(PeriodReport, SpaceStats)> {
    let started = Instant::now();
    let mut engine = OnePass::new(n, opts)?;
    let mut meter = SpaceMeter::new(n);
    for b in bytes {
        engine.feed(b)?;
        if meter.due(engine.position()) {
            meter.record(&engine.state_modules());
        }
    }
    meter.record(&engine.state_modules());
    let report = engine.finish()?;
    let mut stats = meter.into_stats();
    stats.n = n;
    stats.k = opts.k;
    stats.passes = 1;
    stats.backend = Some(opts.backend);
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((report, stats))
}

/// All k-periods `p ≤ n/2` of `bytes`.
pub fn run_one_pass(bytes: &[u8], opts: EngineOptions) -> Result<PeriodReport> {
    run_one_pass_with_stats(bytes.iter().copied(), bytes.len(), opts).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mismatch_sketch::Backend;
    use crate::oracle::{brute_force_k_periods, mismatch_positions};

    const BACKENDS: [Backend; 2] = [Backend::Exact, Backend::ResidueFamily];

    fn periods(s: &[u8], k: usize, backend: Backend) -> Vec<usize> {
        run_one_pass(s, EngineOptions::new(k, 1, backend))
            .unwrap()
            .period_values()
    }

    fn oracle(s: &[u8], k: usize) -> Vec<usize> {
        brute_force_k_periods(s, k)
            .into_iter()
            .map(|p| p.period)
            .filter(|&p| p <= s.len() / 2)
            .collect()
    }

    #[test]
    fn groups_tile_large_shifts() {
        for n in 1..400 {
            let mut next = n / 4 + 1;
            for (w, lo, hi) in large_groups(n) {
                assert_eq!(lo, next, "n={n}");
                for i in lo..=hi {
                    let gap = n - 2 * i;
                    let want = if gap == 0 { 0 } else { 1 << gap.ilog2() };
                    assert_eq!(w, want, "n={n} i={i}");
                }
                next = hi + 1;
            }
            assert_eq!(next, n / 2 + 1, "n={n}");
        }
        assert_eq!(large_groups(32)[0], (8, 9, 12));
    }

    #[test]
    fn worked_examples() {
        for b in BACKENDS {
            assert_eq!(periods(b"abcabcadcabc", 2, b), vec![3, 6]);
            assert_eq!(periods(b"abababab", 0, b), vec![2, 4]);
            assert_eq!(periods(b"aaaaba", 1, b), vec![2, 3]);
            assert_eq!(periods(&[b'a'; 16], 0, b), (1..=8).collect::<Vec<_>>());
            assert!(periods(b"", 0, b).is_empty());
            assert!(periods(b"ab", 0, b).is_empty());
        }
        let r = run_one_pass(b"aaaaaabbccd", EngineOptions::new(3, 2, Backend::ResidueFamily)).unwrap();
        assert_eq!(r.get(1).unwrap().mismatches, Some(vec![6, 8, 10]));
    }

    #[test]
    fn window_mismatch_derivation() {
        let s = b"abcabcabxabcabcabcabcaxcabcab";
        let n_win = 12;
        let pi = 3;
        let e: Vec<Mismatch> = mismatch_positions(&s[..n_win], pi)
            .into_iter()
            .map(|q| Mismatch {
                position: q,
                byte_a: s[q - 1],
                byte_b: s[q - 1 + pi],
            })
            .collect();
        for shift in 1..=s.len() - n_win {
            let d: Vec<Mismatch> = (1..=n_win)
                .filter(|&q| s[q - 1] != s[shift + q - 1])
                .map(|q| Mismatch {
                    position: q,
                    byte_a: s[q - 1],
                    byte_b: s[shift + q - 1],
                })
                .collect();
            let want: Vec<usize> = (shift + 1..=shift + n_win - pi)
                .filter(|&z| s[z - 1] != s[z - 1 + pi])
                .collect();
            assert_eq!(window_period_mismatches(&e, &d, n_win, pi, shift), want, "shift {shift}");
        }
    }

    #[test]
    fn matches_oracle_on_short_binary_strings() {
        for n in 1..=11usize {
            for bits in 0u32..(1 << n) {
                let s: Vec<u8> = (0..n).map(|i| b'0' + (bits >> i & 1) as u8).collect();
                for k in 0..=2 {
                    let want = oracle(&s, k);
                    for b in BACKENDS {
                        assert_eq!(periods(&s, k, b), want, "{s:?} k={k} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn structured_inputs_match_oracle() {
        use crate::corpus::{gen_planted, gen_random};
        for seed in 0..40u64 {
            let p = 2 + (seed as usize % 9);
            let n = 64 + 7 * seed as usize;
            let block = gen_random(p, 3, seed);
            let s = gen_planted(&block, n, &[n / 5, n / 2], seed).unwrap_or_else(|_| gen_random(n, 2, seed));
            for k in [1, 2, 3] {
                let r = run_one_pass(&s, EngineOptions::new(k, seed, Backend::ResidueFamily)).unwrap();
                assert_eq!(r.period_values(), oracle(&s, k), "seed {seed} k {k}");
                assert_eq!(r.diagnostics.get("delta_over_bound").copied().unwrap_or(0), 0);
            }
        }
    }
}
