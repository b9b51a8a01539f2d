//! Bounded-mismatch comparator.
//!
//! A [`MismatchSketch`] summarises a range of the stream so that two sketches
//! of equal length can be compared: either the Hamming distance exceeds the
//! limit, or the exact set of mismatching positions (with both bytes) is
//! returned.
//!
//! Two backends share one interface:
//!
//! * `ResidueFamily` keeps, for each prime `p` of a small family and each
//!   residue `r < p`, a fingerprint of the positions `≡ r (mod p)`. A class
//!   holding exactly one mismatch decodes it directly; decoded mismatches are
//!   peeled out of every other class until nothing changes. State size is
//!   `Σ p` fingerprints, independent of the covered length.
//! * `Exact` keeps the raw bytes (as a view into a shared append-only buffer)
//!   and serves as the reference.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{
    add_mod, decode_delta, mul_mod, reduce_signed, sub_mod, substitution_delta, symbol_value,
    Decoded, Fingerprint, FingerprintContext, MODULUS,
};

static COMPARISONS: AtomicU64 = AtomicU64::new(0);

/// Number of sketch comparisons performed by this process so far.
pub fn comparisons_performed() -> u64 {
    COMPARISONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    ResidueFamily,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::ResidueFamily => f.write_str("sketch"),
        }
    }
}

/// The first `max(3, ceil(log2 n))` primes strictly greater than `2k`.
pub fn prime_family(k: usize, length_hint: usize) -> Vec<usize> {
    let count = ceil_log2(length_hint).max(3);
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2 * k + 1;
    while primes.len() < count {
        if is_small_prime(candidate) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

fn is_small_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Shared, immutable parameters of a family of comparable sketches.
#[derive(Debug)]
pub struct SketchConfig {
    ctx: FingerprintContext,
    k: usize,
    backend: Backend,
    primes: Vec<usize>,
    offsets: Vec<usize>,
    classes: usize,
}

impl SketchConfig {
    /// `k` is the largest mismatch count the sketches must be able to
    /// report; `length_hint` is the declared stream length.
    pub fn new(ctx: FingerprintContext, k: usize, backend: Backend, length_hint: usize) -> Arc<Self> {
        let primes = prime_family(k, length_hint);
        let mut offsets = Vec::with_capacity(primes.len());
        let mut classes = 0;
        for &p in &primes {
            offsets.push(classes);
            classes += p;
        }
        Arc::new(Self {
            ctx,
            k,
            backend,
            primes,
            offsets,
            classes,
        })
    }

    pub fn ctx(&self) -> &FingerprintContext {
        &self.ctx
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn primes(&self) -> &[usize] {
        &self.primes
    }

    /// Number of residue classes kept per sketch by the residue backend.
    pub fn class_count(&self) -> usize {
        self.classes
    }

    fn compatible(&self, other: &SketchConfig) -> bool {
        self.ctx == other.ctx
            && self.k == other.k
            && self.backend == other.backend
            && self.primes == other.primes
    }
}

/// A view into an append-only byte buffer shared between exact sketches.
#[derive(Clone)]
struct ByteView {
    buf: Arc<RwLock<Vec<u8>>>,
    off: usize,
    len: usize,
}

impl ByteView {
    fn new(bytes: Vec<u8>) -> Self {
        let len = bytes.len();
        Self {
            buf: Arc::new(RwLock::new(bytes)),
            off: 0,
            len,
        }
    }

    fn to_vec(&self) -> Vec<u8> {
        let guard = self.buf.read().expect("byte buffer poisoned");
        guard[self.off..self.off + self.len].to_vec()
    }

    fn with_slice<R>(&self, f: impl FnOnce(&[u8]) -> R) -> R {
        let guard = self.buf.read().expect("byte buffer poisoned");
        f(&guard[self.off..self.off + self.len])
    }

    fn push(&mut self, byte: u8) {
        let end = self.off + self.len;
        {
            let mut guard = self.buf.write().expect("byte buffer poisoned");
            if guard.len() == end {
                guard.push(byte);
                self.len += 1;
                return;
            }
            if guard[end] == byte {
                self.len += 1;
                return;
            }
        }
        let mut bytes = self.to_vec();
        bytes.push(byte);
        *self = ByteView::new(bytes);
    }

    fn extend(&mut self, right: &ByteView) {
        let end = self.off + self.len;
        if Arc::ptr_eq(&self.buf, &right.buf) && right.off == end {
            self.len += right.len;
            return;
        }
        let tail = right.to_vec();
        {
            let mut guard = self.buf.write().expect("byte buffer poisoned");
            if guard.len() == end {
                guard.extend_from_slice(&tail);
                self.len += tail.len();
                return;
            }
            if guard.len() >= end + tail.len() && guard[end..end + tail.len()] == tail[..] {
                self.len += tail.len();
                return;
            }
        }
        let mut bytes = self.to_vec();
        bytes.extend_from_slice(&tail);
        *self = ByteView::new(bytes);
    }

    fn narrow(&self, from: usize, len: usize) -> Self {
        debug_assert!(from + len <= self.len);
        Self {
            buf: Arc::clone(&self.buf),
            off: self.off + from,
            len,
        }
    }

    fn substitute(&mut self, index: usize, byte: u8) {
        let mut bytes = self.to_vec();
        bytes[index] = byte;
        *self = ByteView::new(bytes);
    }
}

#[derive(Clone)]
enum Body {
    Exact(ByteView),
    Residue(Vec<[u64; 3]>),
}

/// One mismatch between the `a` side and the `b` side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mismatch {
    pub position: usize,
    pub byte_a: u8,
    pub byte_b: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Distance {
    /// Hamming distance is `count` (≤ the limit); `mismatches` are sorted by
    /// position, expressed in the coordinates of the first argument.
    AtMost {
        count: usize,
        mismatches: Vec<Mismatch>,
    },
    MoreThan(usize),
}

impl Distance {
    pub fn is_within(&self) -> bool {
        matches!(self, Distance::AtMost { .. })
    }

    pub fn positions(&self) -> Option<Vec<usize>> {
        match self {
            Distance::AtMost { mismatches, .. } => {
                Some(mismatches.iter().map(|m| m.position).collect())
            }
            Distance::MoreThan(_) => None,
        }
    }
}

/// Fingerprint of a single residue class of a residue-family sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassFingerprint {
    pub prime: usize,
    pub residue: usize,
    pub start: usize,
    pub len: usize,
    pub h: [u64; 3],
}

/// Compares one residue class of two sketches covering the same positions.
pub fn peel_class(
    ctx: &FingerprintContext,
    a: &ClassFingerprint,
    b: &ClassFingerprint,
) -> Result<Decoded> {
    if a.prime != b.prime || a.residue != b.residue || a.start != b.start || a.len != b.len {
        return Err(Error::Adjacency(format!(
            "class ({}, {}) over [{}, +{}) vs class ({}, {}) over [{}, +{})",
            a.prime, a.residue, a.start, a.len, b.prime, b.residue, b.start, b.len
        )));
    }
    if a.len == 0 {
        return Ok(Decoded::Equal);
    }
    let d = [
        sub_mod(a.h[0], b.h[0]),
        sub_mod(a.h[1], b.h[1]),
        sub_mod(a.h[2], b.h[2]),
    ];
    Ok(
        match decode_delta(ctx, d[0], d[1], d[2], a.start, a.start + a.len - 1) {
            Decoded::One { position, .. } if position % a.prime != a.residue => Decoded::Many,
            other => other,
        },
    )
}

#[derive(Clone)]
pub struct MismatchSketch {
    cfg: Arc<SketchConfig>,
    whole: Fingerprint,
    body: Body,
}

impl fmt::Debug for MismatchSketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MismatchSketch")
            .field("backend", &self.cfg.backend)
            .field("start", &self.whole.start)
            .field("len", &self.whole.len)
            .finish()
    }
}

#[inline]
fn is_zero(h: &[u64; 3]) -> bool {
    h[0] == 0 && h[1] == 0 && h[2] == 0
}

impl MismatchSketch {
    /// Empty sketch anchored so that the next appended byte is at `start`.
    pub fn empty(cfg: &Arc<SketchConfig>, start: usize) -> Self {
        let body = match cfg.backend {
            Backend::Exact => Body::Exact(ByteView::new(Vec::new())),
            Backend::ResidueFamily => Body::Residue(vec![[0; 3]; cfg.classes]),
        };
        Self {
            cfg: Arc::clone(cfg),
            whole: Fingerprint::empty(start),
            body,
        }
    }

    pub fn from_bytes(cfg: &Arc<SketchConfig>, start: usize, bytes: &[u8]) -> Self {
        let mut sk = Self::empty(cfg, start);
        for &b in bytes {
            sk.push(b);
        }
        sk
    }

    pub fn config(&self) -> &Arc<SketchConfig> {
        &self.cfg
    }

    pub fn start(&self) -> usize {
        self.whole.start
    }

    pub fn len(&self) -> usize {
        self.whole.len
    }

    pub fn is_empty(&self) -> bool {
        self.whole.len == 0
    }

    /// One past the last covered position.
    pub fn end(&self) -> usize {
        self.whole.end()
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.whole
    }

    /// Appends the byte at position `end()`.
    pub fn push(&mut self, byte: u8) {
        let position = self.end();
        let ctx = self.cfg.ctx;
        let w = ctx.pow(position as i64);
        let v = symbol_value(byte);
        let vw = mul_mod(v, w);
        let pvw = mul_mod(position as u64 % MODULUS, vw);
        let v2w = mul_mod(v, vw);
        self.whole.h0 = add_mod(self.whole.h0, vw);
        self.whole.h1 = add_mod(self.whole.h1, pvw);
        self.whole.h2 = add_mod(self.whole.h2, v2w);
        self.whole.len += 1;
        match &mut self.body {
            Body::Exact(view) => view.push(byte),
            Body::Residue(classes) => {
                for (q, &p) in self.cfg.primes.iter().enumerate() {
                    let c = &mut classes[self.cfg.offsets[q] + position % p];
                    c[0] = add_mod(c[0], vw);
                    c[1] = add_mod(c[1], pvw);
                    c[2] = add_mod(c[2], v2w);
                }
            }
        }
    }

    pub fn append(&self, byte: u8) -> Self {
        let mut out = self.clone();
        out.push(byte);
        out
    }

    fn check_compatible(&self, other: &MismatchSketch) -> Result<()> {
        if Arc::ptr_eq(&self.cfg, &other.cfg) || self.cfg.compatible(&other.cfg) {
            Ok(())
        } else {
            Err(Error::IncompatibleSketch(
                "sketches were built with different parameters".into(),
            ))
        }
    }

    fn zip_classes(&mut self, other: &MismatchSketch, op: fn(u64, u64) -> u64) {
        if let (Body::Residue(mine), Body::Residue(theirs)) = (&mut self.body, &other.body) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                m[0] = op(m[0], t[0]);
                m[1] = op(m[1], t[1]);
                m[2] = op(m[2], t[2]);
            }
        }
    }

    /// Sketch of the concatenation; `right` must start at `self.end()`.
    pub fn concat(&self, right: &MismatchSketch) -> Result<Self> {
        self.check_compatible(right)?;
        let whole = self.whole.concat(&right.whole)?;
        let mut out = self.clone();
        out.whole = whole;
        match (&mut out.body, &right.body) {
            (Body::Exact(view), Body::Exact(r)) => view.extend(r),
            _ => out.zip_classes(right, add_mod),
        }
        Ok(out)
    }

    /// Removes a prefix sharing this sketch's start.
    pub fn subtract_prefix(&self, prefix: &MismatchSketch) -> Result<Self> {
        self.check_compatible(prefix)?;
        let whole = self.whole.subtract_prefix(&prefix.whole)?;
        let mut out = self.clone();
        out.whole = whole;
        match &mut out.body {
            Body::Exact(view) => *view = view.narrow(prefix.len(), whole.len),
            Body::Residue(_) => out.zip_classes(prefix, sub_mod),
        }
        Ok(out)
    }

    /// Removes a suffix ending at this sketch's end.
    pub fn without_suffix(&self, suffix: &MismatchSketch) -> Result<Self> {
        self.check_compatible(suffix)?;
        if suffix.end() != self.end() || suffix.len() > self.len() {
            return Err(Error::Adjacency(format!(
                "[{}, {}) is not a suffix of [{}, {})",
                suffix.start(),
                suffix.end(),
                self.start(),
                self.end()
            )));
        }
        let mut out = self.clone();
        out.whole = Fingerprint {
            start: self.whole.start,
            len: self.whole.len - suffix.whole.len,
            h0: sub_mod(self.whole.h0, suffix.whole.h0),
            h1: sub_mod(self.whole.h1, suffix.whole.h1),
            h2: sub_mod(self.whole.h2, suffix.whole.h2),
        };
        match &mut out.body {
            Body::Exact(view) => *view = view.narrow(0, out.whole.len),
            Body::Residue(_) => out.zip_classes(suffix, sub_mod),
        }
        Ok(out)
    }

    /// Same content placed at `new_start`.
    pub fn shifted(&self, new_start: usize) -> Self {
        let delta = new_start as i64 - self.start() as i64;
        if delta == 0 {
            return self.clone();
        }
        let ctx = &self.cfg.ctx;
        let whole = self.whole.shifted(ctx, new_start);
        let body = match &self.body {
            Body::Exact(view) => Body::Exact(view.clone()),
            Body::Residue(classes) => {
                let scale = ctx.pow(delta);
                let d = reduce_signed(delta);
                let mut out = vec![[0u64; 3]; classes.len()];
                for (q, &p) in self.cfg.primes.iter().enumerate() {
                    let off = self.cfg.offsets[q];
                    let rot = delta.rem_euclid(p as i64) as usize;
                    for r in 0..p {
                        let h = &classes[off + r];
                        out[off + (r + rot) % p] = [
                            mul_mod(scale, h[0]),
                            mul_mod(scale, add_mod(h[1], mul_mod(d, h[0]))),
                            mul_mod(scale, h[2]),
                        ];
                    }
                }
                Body::Residue(out)
            }
        };
        Self {
            cfg: Arc::clone(&self.cfg),
            whole,
            body,
        }
    }

    /// Whether both sketches describe the same byte content (wherever placed).
    pub fn same_content(&self, other: &MismatchSketch) -> bool {
        if self.len() != other.len() {
            return false;
        }
        match (&self.body, &other.body) {
            (Body::Exact(a), Body::Exact(b)) => {
                if Arc::ptr_eq(&a.buf, &b.buf) && a.off == b.off {
                    return true;
                }
                let theirs = b.to_vec();
                a.with_slice(|mine| mine == &theirs[..])
            }
            _ => self.whole.same_content(&self.cfg.ctx, &other.whole),
        }
    }

    /// Replaces the byte at each `position` (currently `from`) with `to`.
    pub fn apply_substitutions(&mut self, edits: &[(usize, u8, u8)]) -> Result<()> {
        for &(position, from, to) in edits {
            if position < self.start() || position >= self.end() {
                return Err(Error::Range {
                    value: position,
                    lo: self.start(),
                    hi: self.end().saturating_sub(1),
                });
            }
            if from == to {
                continue;
            }
            let d = substitution_delta(&self.cfg.ctx, position, to, from);
            self.whole.h0 = add_mod(self.whole.h0, d[0]);
            self.whole.h1 = add_mod(self.whole.h1, d[1]);
            self.whole.h2 = add_mod(self.whole.h2, d[2]);
            match &mut self.body {
                Body::Exact(view) => view.substitute(position - self.whole.start, to),
                Body::Residue(classes) => {
                    for (q, &p) in self.cfg.primes.iter().enumerate() {
                        let c = &mut classes[self.cfg.offsets[q] + position % p];
                        c[0] = add_mod(c[0], d[0]);
                        c[1] = add_mod(c[1], d[1]);
                        c[2] = add_mod(c[2], d[2]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Class fingerprint for prime index `q` and residue `r` (residue backend only).
    pub fn class_fingerprint(&self, q: usize, r: usize) -> Option<ClassFingerprint> {
        match &self.body {
            Body::Residue(classes) => {
                let p = *self.cfg.primes.get(q)?;
                (r < p).then(|| ClassFingerprint {
                    prime: p,
                    residue: r,
                    start: self.start(),
                    len: self.len(),
                    h: classes[self.cfg.offsets[q] + r],
                })
            }
            Body::Exact(_) => None,
        }
    }

    /// Raw bytes (exact backend only).
    pub fn bytes(&self) -> Option<Vec<u8>> {
        match &self.body {
            Body::Exact(view) => Some(view.to_vec()),
            Body::Residue(_) => None,
        }
    }

    /// Streaming state held by this sketch, in bytes. Exact views share one
    /// buffer, which is counted by [`Self::shared_bytes`] instead.
    pub fn state_bytes(&self) -> usize {
        let header = std::mem::size_of::<Self>();
        match &self.body {
            Body::Exact(_) => header,
            Body::Residue(classes) => header + classes.len() * std::mem::size_of::<[u64; 3]>(),
        }
    }

    /// Size of the byte buffer behind an exact view; 0 for sketches.
    pub fn shared_bytes(&self) -> usize {
        match &self.body {
            Body::Exact(view) => view.buf.read().expect("byte buffer lock").len(),
            Body::Residue(_) => 0,
        }
    }

    /// Compares two equal-length sketches with the configured budget `k`.
    pub fn distance(&self, other: &MismatchSketch) -> Result<Distance> {
        self.distance_within(other, self.cfg.k)
    }

    /// Compares with a tighter budget `limit ≤ k`. Mismatch positions are
    /// reported in `self`'s coordinates; `byte_a` is from `self`.
    pub fn distance_within(&self, other: &MismatchSketch, limit: usize) -> Result<Distance> {
        self.check_compatible(other)?;
        if self.len() != other.len() {
            return Err(Error::IncompatibleSketch(format!(
                "lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        if limit > self.cfg.k {
            return Err(Error::IncompatibleSketch(format!(
                "limit {limit} exceeds sketch budget {}",
                self.cfg.k
            )));
        }
        COMPARISONS.fetch_add(1, Ordering::Relaxed);
        match (&self.body, &other.body) {
            (Body::Exact(a), Body::Exact(b)) => Ok(exact_distance(a, b, self.start(), limit)),
            (Body::Residue(a), Body::Residue(b)) => {
                Ok(self.residue_distance(a, other, b, limit))
            }
            _ => Err(Error::IncompatibleSketch("backends differ".into())),
        }
    }

    fn residue_distance(
        &self,
        mine: &[[u64; 3]],
        other: &MismatchSketch,
        theirs: &[[u64; 3]],
        limit: usize,
    ) -> Distance {
        let ctx = &self.cfg.ctx;
        if self.whole == other.whole.shifted(ctx, self.start()) {
            return Distance::AtMost {
                count: 0,
                mismatches: Vec::new(),
            };
        }
        if self.is_empty() {
            return Distance::AtMost {
                count: 0,
                mismatches: Vec::new(),
            };
        }
        let delta = self.start() as i64 - other.start() as i64;
        let scale = ctx.pow(delta);
        let dm = reduce_signed(delta);
        let lo = self.start();
        let hi = self.end() - 1;

        let mut deltas = vec![[0u64; 3]; mine.len()];
        for (q, &p) in self.cfg.primes.iter().enumerate() {
            let off = self.cfg.offsets[q];
            let mut nonzero = 0;
            for r in 0..p {
                let br = (r as i64 - delta).rem_euclid(p as i64) as usize;
                let h = &theirs[off + br];
                let aligned = if delta == 0 {
                    *h
                } else {
                    [
                        mul_mod(scale, h[0]),
                        mul_mod(scale, add_mod(h[1], mul_mod(dm, h[0]))),
                        mul_mod(scale, h[2]),
                    ]
                };
                let a = &mine[off + r];
                let d = [
                    sub_mod(a[0], aligned[0]),
                    sub_mod(a[1], aligned[1]),
                    sub_mod(a[2], aligned[2]),
                ];
                if !is_zero(&d) {
                    nonzero += 1;
                }
                deltas[off + r] = d;
            }
            // disjoint non-empty classes each hold at least one mismatch
            if nonzero > limit {
                return Distance::MoreThan(limit);
            }
        }

        let mut found: Vec<Mismatch> = Vec::new();
        loop {
            let mut progress = false;
            for (q, &p) in self.cfg.primes.iter().enumerate() {
                let off = self.cfg.offsets[q];
                for r in 0..p {
                    let d = deltas[off + r];
                    if is_zero(&d) {
                        continue;
                    }
                    let Decoded::One {
                        position,
                        byte_a,
                        byte_b,
                    } = decode_delta(ctx, d[0], d[1], d[2], lo, hi)
                    else {
                        continue;
                    };
                    if position % p != r || found.iter().any(|m| m.position == position) {
                        continue;
                    }
                    found.push(Mismatch {
                        position,
                        byte_a,
                        byte_b,
                    });
                    if found.len() > limit {
                        return Distance::MoreThan(limit);
                    }
                    let c = substitution_delta(ctx, position, byte_a, byte_b);
                    for (q2, &p2) in self.cfg.primes.iter().enumerate() {
                        let cell = &mut deltas[self.cfg.offsets[q2] + position % p2];
                        cell[0] = sub_mod(cell[0], c[0]);
                        cell[1] = sub_mod(cell[1], c[1]);
                        cell[2] = sub_mod(cell[2], c[2]);
                    }
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if deltas.iter().all(is_zero) {
            found.sort();
            Distance::AtMost {
                count: found.len(),
                mismatches: found,
            }
        } else {
            Distance::MoreThan(limit)
        }
    }
}

fn exact_distance(a: &ByteView, b: &ByteView, start: usize, limit: usize) -> Distance {
    const CHUNK: usize = 64;
    let theirs_guard;
    let guard = a.buf.read().expect("byte buffer poisoned");
    let mine = &guard[a.off..a.off + a.len];
    let theirs: &[u8] = if Arc::ptr_eq(&a.buf, &b.buf) {
        &guard[b.off..b.off + b.len]
    } else {
        theirs_guard = b.buf.read().expect("byte buffer poisoned");
        &theirs_guard[b.off..b.off + b.len]
    };
    let mut mismatches = Vec::new();
    let mut base = 0;
    for (ca, cb) in mine.chunks(CHUNK).zip(theirs.chunks(CHUNK)) {
        if ca != cb {
            for (i, (&x, &y)) in ca.iter().zip(cb).enumerate() {
                if x != y {
                    mismatches.push(Mismatch {
                        position: start + base + i,
                        byte_a: x,
                        byte_b: y,
                    });
                    if mismatches.len() > limit {
                        return Distance::MoreThan(limit);
                    }
                }
            }
        }
        base += ca.len();
    }
    Distance::AtMost {
        count: mismatches.len(),
        mismatches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(backend: Backend, k: usize, n: usize, seed: u64) -> Arc<SketchConfig> {
        SketchConfig::new(FingerprintContext::new(seed), k, backend, n)
    }

    #[test]
    fn prime_family_shape() {
        assert_eq!(prime_family(0, 4), vec![2, 3, 5]);
        assert_eq!(prime_family(2, 12), vec![5, 7, 11, 13]);
        assert_eq!(prime_family(1, 1 << 10).len(), 10);
        assert!(prime_family(3, 100).iter().all(|&p| p > 6));
    }

    #[test]
    fn worked_example_mismatches() {
        let s = b"aaaaaabbccd";
        for backend in [Backend::Exact, Backend::ResidueFamily] {
            let c = cfg(backend, 3, s.len(), 1);
            let a = MismatchSketch::from_bytes(&c, 1, &s[..s.len() - 1]);
            let b = MismatchSketch::from_bytes(&c, 2, &s[1..]);
            let d = a.distance(&b).unwrap();
            assert_eq!(d.positions(), Some(vec![6, 8, 10]), "{backend}");
            if let Distance::AtMost { count, .. } = d {
                assert_eq!(count, 3);
            }
        }
    }

    #[test]
    fn identical_and_far() {
        for backend in [Backend::Exact, Backend::ResidueFamily] {
            let c = cfg(backend, 2, 8, 3);
            let a = MismatchSketch::from_bytes(&c, 1, b"abcd");
            assert_eq!(
                a.distance(&a.clone()).unwrap(),
                Distance::AtMost {
                    count: 0,
                    mismatches: vec![]
                }
            );
            let x = MismatchSketch::from_bytes(&c, 1, b"aaaa");
            let y = MismatchSketch::from_bytes(&c, 1, b"bbbb");
            assert_eq!(x.distance(&y).unwrap(), Distance::MoreThan(2));
        }
    }

    #[test]
    fn incremental_equals_batch() {
        for backend in [Backend::Exact, Backend::ResidueFamily] {
            let c = cfg(backend, 2, 16, 9);
            let mut sk = MismatchSketch::empty(&c, 1);
            sk.push(b'a');
            assert_eq!(sk.len(), 1);
            sk.push(b'b');
            sk.push(b'c');
            let batch = MismatchSketch::from_bytes(&c, 1, b"abc");
            assert!(sk.same_content(&batch));
            assert_eq!(sk.fingerprint(), batch.fingerprint());
        }
    }

    #[test]
    fn errors_on_incompatible() {
        let c1 = cfg(Backend::ResidueFamily, 2, 16, 1);
        let c2 = cfg(Backend::ResidueFamily, 2, 16, 2);
        let a = MismatchSketch::from_bytes(&c1, 1, b"ab");
        let b = MismatchSketch::from_bytes(&c2, 1, b"ab");
        assert!(matches!(a.distance(&b), Err(Error::IncompatibleSketch(_))));
        let c = MismatchSketch::from_bytes(&c1, 1, b"abc");
        assert!(matches!(a.distance(&c), Err(Error::IncompatibleSketch(_))));
    }

    #[test]
    fn peel_single_class() {
        let c = cfg(Backend::ResidueFamily, 1, 32, 4);
        let s: Vec<u8> = b"abcdefghijklmnopqrstuvwxyzabcdef".to_vec();
        let mut t = s.clone();
        t[9] = b'#'; // position 10
        let a = MismatchSketch::from_bytes(&c, 1, &s);
        let b = MismatchSketch::from_bytes(&c, 1, &t);
        let ctx = *c.ctx();
        for (q, &p) in c.primes().iter().enumerate() {
            for r in 0..p {
                let ca = a.class_fingerprint(q, r).unwrap();
                let cb = b.class_fingerprint(q, r).unwrap();
                let d = peel_class(&ctx, &ca, &cb).unwrap();
                if r == 10 % p {
                    assert_eq!(
                        d,
                        Decoded::One {
                            position: 10,
                            byte_a: b'j',
                            byte_b: b'#'
                        }
                    );
                } else {
                    assert_eq!(d, Decoded::Equal);
                }
            }
        }
        // two mismatches planted in the same class of the first prime
        let p = c.primes()[0];
        let mut u = s.clone();
        u[0] = b'#';
        u[p] = b'#';
        let b2 = MismatchSketch::from_bytes(&c, 1, &u);
        let d = peel_class(
            &ctx,
            &a.class_fingerprint(0, 1 % p).unwrap(),
            &b2.class_fingerprint(0, 1 % p).unwrap(),
        )
        .unwrap();
        assert_eq!(d, Decoded::Many);
    }

    #[test]
    fn substitutions_and_suffix() {
        for backend in [Backend::Exact, Backend::ResidueFamily] {
            let c = cfg(backend, 2, 16, 11);
            let mut a = MismatchSketch::from_bytes(&c, 5, b"hello");
            a.apply_substitutions(&[(6, b'e', b'a')]).unwrap();
            assert!(a.same_content(&MismatchSketch::from_bytes(&c, 1, b"hallo")));
            let whole = MismatchSketch::from_bytes(&c, 1, b"abcdef");
            let suffix = MismatchSketch::from_bytes(&c, 4, b"def");
            let head = whole.without_suffix(&suffix).unwrap();
            assert!(head.same_content(&MismatchSketch::from_bytes(&c, 1, b"abc")));
            assert_eq!(head.end(), 4);
        }
    }

    #[test]
    fn shifted_comparison_reports_left_coordinates() {
        for backend in [Backend::Exact, Backend::ResidueFamily] {
            let c = cfg(backend, 2, 64, 5);
            let s = b"abcabcadcabc";
            let a = MismatchSketch::from_bytes(&c, 1, &s[..9]);
            let b = MismatchSketch::from_bytes(&c, 4, &s[3..]);
            let d = a.distance(&b).unwrap();
            assert_eq!(d.positions(), Some(vec![5, 8]));
            if let Distance::AtMost { mismatches, .. } = d {
                assert_eq!(mismatches[0].byte_a, b'b');
                assert_eq!(mismatches[0].byte_b, b'd');
            }
        }
    }

    #[test]
    fn backends_agree_on_short_binary_strings() {
        for seed in [1u64, 2, 3] {
            for k in 0..=3 {
                let ex = cfg(Backend::Exact, k, 12, seed);
                let rf = cfg(Backend::ResidueFamily, k, 12, seed);
                for len in [1usize, 5, 8] {
                    for x in 0u32..(1 << len) {
                        let a: Vec<u8> = (0..len).map(|i| b'0' + (x >> i & 1) as u8).collect();
                        for y in (0u32..(1 << len)).step_by(3) {
                            let b: Vec<u8> =
                                (0..len).map(|i| b'0' + (y >> i & 1) as u8).collect();
                            let de = MismatchSketch::from_bytes(&ex, 1, &a)
                                .distance(&MismatchSketch::from_bytes(&ex, 2, &b))
                                .unwrap();
                            let dr = MismatchSketch::from_bytes(&rf, 1, &a)
                                .distance(&MismatchSketch::from_bytes(&rf, 2, &b))
                                .unwrap();
                            assert_eq!(de, dr, "{a:?} {b:?} k={k}");
                        }
                    }
                }
            }
        }
    }
}
