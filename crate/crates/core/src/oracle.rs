//! Ground truth and structural checks.
//!
//! Quadratic brute force for k-periods, the hop walk between `i` and
//! `i + gcd(p, q)`, and validators measuring how far the gcd of matched
//! shifts is from being a match itself.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::candidates::IntervalPartition;
use crate::error::{Error, Result};
use crate::mismatch_sketch::ceil_log2;
use crate::report::KPeriod;

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// 1-based positions `i ≤ n - p` with `S[i] != S[i + p]`.
pub fn mismatch_positions(s: &[u8], p: usize) -> Vec<usize> {
    if p >= s.len() {
        return Vec::new();
    }
    (0..s.len() - p)
        .filter(|&i| s[i] != s[i + p])
        .map(|i| i + 1)
        .collect()
}

/// Every k-period of `s`, ascending, with its mismatch positions.
pub fn brute_force_k_periods(s: &[u8], k: usize) -> Vec<KPeriod> {
    (1..s.len())
        .filter_map(|p| {
            let mm = mismatch_positions(s, p);
            (mm.len() <= k).then_some(KPeriod {
                period: p,
                mismatches: Some(mm),
            })
        })
        .collect()
}

pub fn brute_force_period_set(s: &[u8], k: usize) -> Vec<usize> {
    brute_force_k_periods(s, k).into_iter().map(|p| p.period).collect()
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(g, x, y)` with `a·x + b·y = g = gcd(a, b)`.
fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = extended_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Walk from `i` to `i + gcd(p, q)` in steps of `±p` and `±q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopSequence {
    pub p: usize,
    pub q: usize,
    pub d: usize,
    pub i: usize,
    pub steps: Vec<usize>,
}

impl HopSequence {
    /// Checks step sizes, the window `[1, p + q]`, congruence and endpoints.
    pub fn is_valid(&self) -> bool {
        let (p, q, d) = (self.p, self.q, self.d);
        let ends = self.steps.first() == Some(&self.i) && self.steps.last() == Some(&(self.i + d));
        let hops = self.steps.windows(2).all(|w| {
            let diff = w[0].abs_diff(w[1]);
            diff == p || diff == q
        });
        let inside = self
            .steps
            .iter()
            .all(|&t| (1..=p + q).contains(&t) && t % d == self.i % d);
        ends && hops && inside
    }
}

/// Requires `p < q` and `1 ≤ i ≤ p + q - gcd(p, q)`. The walk can touch
/// `p + q` itself, so the window is closed.
pub fn hop_sequence(p: usize, q: usize, i: usize) -> Result<HopSequence> {
    if p == 0 || p >= q {
        return Err(Error::Precondition(format!("need 0 < p < q, got p={p}, q={q}")));
    }
    let d = gcd(p, q);
    if i == 0 || i > p + q - d {
        return Err(Error::Range {
            value: i,
            lo: 1,
            hi: p + q - d,
        });
    }
    // the sign of the Bezout coefficient picks the shorter direction
    let (_, a, _) = extended_gcd(p as i64, q as i64);
    let mut steps = vec![i];
    let mut t = i;
    while t != i + d {
        t = if a > 0 {
            if t <= q {
                t + p
            } else {
                t - q
            }
        } else if t <= p {
            t + q
        } else {
            t - p
        };
        steps.push(t);
        if steps.len() > (p + q) / d + 1 {
            return Err(Error::Precondition(format!(
                "hop walk from {i} did not close for p={p}, q={q}"
            )));
        }
    }
    Ok(HopSequence { p, q, d, i, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Two shifts, each `≤ x/(4k+2)`; bound `16k² + 1`.
    Pairwise,
    /// `m` shifts, each `≤ x/(2(mk+1))`; bound `8mk² + 1`.
    MultiWay,
    /// Shifts sharing one interval of the candidate partition of `[1, x]`;
    /// gcd of differences, bound `32·ceil(log2 n)·k² + 1`.
    Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub n: usize,
    pub x: usize,
    pub k: usize,
    pub d: usize,
    pub observed: usize,
    pub bound: usize,
    pub holds: bool,
}

fn window_ham(s: &[u8], x: usize, shift: usize) -> usize {
    hamming(&s[..x], &s[shift..shift + x])
}

/// Measures `HAM(S[1, x], S[d+1, d+x])` for the gcd `d` of `candidates`.
pub fn gcd_bound_validate(
    s: &[u8],
    x: usize,
    candidates: &[usize],
    k: usize,
    kind: BoundKind,
) -> Result<BoundCheck> {
    let n = s.len();
    if x == 0 || 2 * x > n {
        return Err(Error::Precondition(format!("window {x} must lie in [1, n/2] for n={n}")));
    }
    if candidates.is_empty() {
        return Err(Error::Precondition("no candidates".into()));
    }
    for &c in candidates {
        if c == 0 || c + x > n || window_ham(s, x, c) > k {
            return Err(Error::Precondition(format!("shift {c} is not a {k}-mismatch match")));
        }
    }
    let m = candidates.len();
    let too_large = |limit_den: usize| candidates.iter().find(|&&c| c * limit_den > x).copied();
    let (d, bound) = match kind {
        BoundKind::Pairwise => {
            if m != 2 || candidates[0] == candidates[1] {
                return Err(Error::Precondition("pairwise check takes two distinct shifts".into()));
            }
            if let Some(c) = too_large(4 * k + 2) {
                return Err(Error::Precondition(format!("shift {c} exceeds x/(4k+2)")));
            }
            (gcd(candidates[0], candidates[1]), 16 * k * k + 1)
        }
        BoundKind::MultiWay => {
            if let Some(c) = too_large(2 * (m * k + 1)) {
                return Err(Error::Precondition(format!("shift {c} exceeds x/(2(mk+1))")));
            }
            (candidates.iter().fold(0, |g, &c| gcd(g, c)), 8 * m * k * k + 1)
        }
        BoundKind::Interval => {
            let part = IntervalPartition::new(0, x, k, n);
            let j = part.interval_of(candidates[0])?;
            for &c in candidates {
                if part.interval_of(c)? != j {
                    return Err(Error::Precondition(format!(
                        "shift {c} is outside the interval of {}",
                        candidates[0]
                    )));
                }
            }
            let lo = *candidates.iter().min().expect("non-empty");
            let d = candidates.iter().fold(0, |g, &c| gcd(g, c - lo));
            let d = if d == 0 { lo } else { d };
            (d, 32 * ceil_log2(n) * k * k + 1)
        }
    };
    let observed = window_ham(s, x, d);
    Ok(BoundCheck {
        kind,
        n,
        x,
        k,
        d,
        observed,
        bound,
        holds: observed <= bound,
    })
}

/// Writes sweep results as CSV with a header row.
pub fn write_bound_csv<W: Write>(rows: &[BoundCheck], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
