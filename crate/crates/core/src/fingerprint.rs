//! Position-anchored polynomial fingerprints over the Mersenne prime 2^61 - 1.
//!
//! A fingerprint of `S[a, b]` carries three sums over the covered positions
//! `j` with symbol value `v = S[j] + 1`:
//!
//! * `h0 = Σ v · B^j`
//! * `h1 = Σ j · v · B^j`
//! * `h2 = Σ v² · B^j`
//!
//! Because every term is weighted by its absolute position, fingerprints of
//! adjacent ranges add and a prefix can be subtracted without rescaling.
//! When two equal ranges differ at a single position the pair of differences
//! `(Δh0, Δh1)` pins the position (`Δh1 / Δh0`), and `Δh2 / Δh0` gives the sum
//! of the two symbol values, which recovers both bytes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed modulus, 2^61 - 1.
pub const MODULUS: u64 = (1 << 61) - 1;

#[inline]
pub(crate) fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MODULUS {
        s - MODULUS
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + MODULUS - b
    }
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64) -> u64 {
    let p = a as u128 * b as u128;
    let lo = (p as u64) & MODULUS;
    let hi = (p >> 61) as u64;
    add_mod(lo, hi)
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

#[inline]
pub(crate) fn inv_mod(a: u64) -> u64 {
    pow_mod(a, MODULUS - 2)
}

/// Reduces a signed integer into `[0, MODULUS)`.
#[inline]
pub(crate) fn reduce_signed(x: i64) -> u64 {
    let m = MODULUS as i64;
    (((x % m) + m) % m) as u64
}

#[inline]
pub(crate) fn symbol_value(byte: u8) -> u64 {
    byte as u64 + 1
}

/// Seeded randomness shared by every fingerprint that must be comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintContext {
    pub modulus: u64,
    pub base: u64,
    base_inv: u64,
    pub seed: u64,
}

impl FingerprintContext {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = rng.gen_range(2..MODULUS - 1);
        Self {
            modulus: MODULUS,
            base,
            base_inv: inv_mod(base),
            seed,
        }
    }

    /// `base^exp`, with negative exponents through the modular inverse.
    pub fn pow(&self, exp: i64) -> u64 {
        if exp >= 0 {
            pow_mod(self.base, exp as u64)
        } else {
            pow_mod(self.base_inv, exp.unsigned_abs())
        }
    }
}

/// Fingerprint of the contiguous range `S[start, start + len - 1]` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub start: usize,
    pub len: usize,
    pub h0: u64,
    pub h1: u64,
    pub h2: u64,
}

/// Outcome of comparing two fingerprints of equally placed ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    Equal,
    One {
        position: usize,
        byte_a: u8,
        byte_b: u8,
    },
    Many,
}

impl Fingerprint {
    pub fn empty(start: usize) -> Self {
        Self {
            start,
            len: 0,
            h0: 0,
            h1: 0,
            h2: 0,
        }
    }

    pub fn from_bytes(ctx: &FingerprintContext, start: usize, bytes: &[u8]) -> Self {
        let mut fp = Self::empty(start);
        let mut w = ctx.pow(start as i64);
        for (offset, &b) in bytes.iter().enumerate() {
            fp.add_term(start + offset, symbol_value(b), w);
            w = mul_mod(w, ctx.base);
        }
        fp.len = bytes.len();
        fp
    }

    /// One past the last covered position.
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    #[inline]
    fn add_term(&mut self, position: usize, value: u64, weight: u64) {
        let vw = mul_mod(value, weight);
        self.h0 = add_mod(self.h0, vw);
        self.h1 = add_mod(self.h1, mul_mod(position as u64 % MODULUS, vw));
        self.h2 = add_mod(self.h2, mul_mod(value, vw));
    }

    pub fn append(&self, ctx: &FingerprintContext, byte: u8) -> Self {
        let mut out = *self;
        let position = self.end();
        out.add_term(position, symbol_value(byte), ctx.pow(position as i64));
        out.len += 1;
        out
    }

    pub fn concat(&self, right: &Fingerprint) -> Result<Self> {
        if right.start != self.end() {
            return Err(Error::Adjacency(format!(
                "left covers [{}, {}), right starts at {}",
                self.start,
                self.end(),
                right.start
            )));
        }
        Ok(Self {
            start: self.start,
            len: self.len + right.len,
            h0: add_mod(self.h0, right.h0),
            h1: add_mod(self.h1, right.h1),
            h2: add_mod(self.h2, right.h2),
        })
    }

    /// Removes `prefix` (which must share this fingerprint's start) and
    /// returns the fingerprint of the remaining suffix.
    pub fn subtract_prefix(&self, prefix: &Fingerprint) -> Result<Self> {
        if prefix.start != self.start || prefix.len > self.len {
            return Err(Error::Adjacency(format!(
                "prefix [{}, {}) is not a prefix of [{}, {})",
                prefix.start,
                prefix.end(),
                self.start,
                self.end()
            )));
        }
        Ok(Self {
            start: prefix.end(),
            len: self.len - prefix.len,
            h0: sub_mod(self.h0, prefix.h0),
            h1: sub_mod(self.h1, prefix.h1),
            h2: sub_mod(self.h2, prefix.h2),
        })
    }

    /// Re-anchors the fingerprint so that it describes the same content
    /// placed at `new_start`.
    pub fn shifted(&self, ctx: &FingerprintContext, new_start: usize) -> Self {
        let delta = new_start as i64 - self.start as i64;
        if delta == 0 {
            return *self;
        }
        let scale = ctx.pow(delta);
        let d = reduce_signed(delta);
        Self {
            start: new_start,
            len: self.len,
            h0: mul_mod(scale, self.h0),
            h1: mul_mod(scale, add_mod(self.h1, mul_mod(d, self.h0))),
            h2: mul_mod(scale, self.h2),
        }
    }

    /// Content equality of two ranges regardless of where they sit.
    pub fn same_content(&self, ctx: &FingerprintContext, other: &Fingerprint) -> bool {
        self.len == other.len && *self == other.shifted(ctx, self.start)
    }
}

/// Decodes the difference `a - b` of two fingerprints over the same
/// positions, accepting only a single mismatch inside `[lo, hi]`.
pub(crate) fn decode_delta(
    ctx: &FingerprintContext,
    d0: u64,
    d1: u64,
    d2: u64,
    lo: usize,
    hi: usize,
) -> Decoded {
    if d0 == 0 && d1 == 0 && d2 == 0 {
        return Decoded::Equal;
    }
    if d0 == 0 {
        return Decoded::Many;
    }
    let inv = inv_mod(d0);
    let position = mul_mod(d1, inv);
    if position < lo as u64 || position > hi as u64 {
        return Decoded::Many;
    }
    let sum = mul_mod(d2, inv);
    let diff = mul_mod(d0, ctx.pow(-(position as i64)));
    let diff: i64 = if diff <= 255 {
        diff as i64
    } else if diff >= MODULUS - 255 {
        -((MODULUS - diff) as i64)
    } else {
        return Decoded::Many;
    };
    if !(3..=511).contains(&sum) {
        return Decoded::Many;
    }
    let sum = sum as i64;
    if (sum + diff) % 2 != 0 {
        return Decoded::Many;
    }
    let va = (sum + diff) / 2;
    let vb = (sum - diff) / 2;
    if !(1..=256).contains(&va) || !(1..=256).contains(&vb) || va == vb {
        return Decoded::Many;
    }
    Decoded::One {
        position: position as usize,
        byte_a: (va - 1) as u8,
        byte_b: (vb - 1) as u8,
    }
}

/// Compares two fingerprints covering the same positions and reports
/// equality, the single differing position with both bytes, or `Many`.
pub fn decode_one_mismatch(
    ctx: &FingerprintContext,
    a: &Fingerprint,
    b: &Fingerprint,
) -> Result<Decoded> {
    if a.start != b.start || a.len != b.len {
        return Err(Error::Adjacency(format!(
            "cannot compare [{}, {}) with [{}, {})",
            a.start,
            a.end(),
            b.start,
            b.end()
        )));
    }
    if a.len == 0 {
        return Ok(Decoded::Equal);
    }
    Ok(decode_delta(
        ctx,
        sub_mod(a.h0, b.h0),
        sub_mod(a.h1, b.h1),
        sub_mod(a.h2, b.h2),
        a.start,
        a.end() - 1,
    ))
}

/// Contribution of a substitution `byte_b -> byte_a` at `position` to the
/// difference of two fingerprints.
pub(crate) fn substitution_delta(
    ctx: &FingerprintContext,
    position: usize,
    byte_a: u8,
    byte_b: u8,
) -> [u64; 3] {
    let w = ctx.pow(position as i64);
    let va = symbol_value(byte_a);
    let vb = symbol_value(byte_b);
    let d0 = mul_mod(sub_mod(va, vb), w);
    let d1 = mul_mod(position as u64 % MODULUS, d0);
    let d2 = mul_mod(sub_mod(mul_mod(va, va), mul_mod(vb, vb)), w);
    [d0, d1, d2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn ctx() -> FingerprintContext {
        FingerprintContext::new(7)
    }

    fn build(ctx: &FingerprintContext, start: usize, bytes: &[u8]) -> Fingerprint {
        bytes
            .iter()
            .fold(Fingerprint::empty(start), |fp, &b| fp.append(ctx, b))
    }

    fn is_prime_u64(n: u64) -> bool {
        // deterministic Miller-Rabin for 64-bit inputs
        if n < 2 {
            return false;
        }
        let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
        let pow = |mut b: u64, mut e: u64| {
            let mut r = 1u64;
            while e > 0 {
                if e & 1 == 1 {
                    r = mul(r, b);
                }
                b = mul(b, b);
                e >>= 1;
            }
            r
        };
        let mut d = n - 1;
        let mut s = 0;
        while d.is_multiple_of(2) {
            d /= 2;
            s += 1;
        }
        'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            if a % n == 0 {
                continue;
            }
            let mut x = pow(a, d);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 1..s {
                x = mul(x, x);
                if x == n - 1 {
                    continue 'witness;
                }
            }
            return false;
        }
        true
    }

    #[test]
    fn context_is_prime_and_seeded() {
        let a = FingerprintContext::new(42);
        let b = FingerprintContext::new(42);
        assert_eq!(a, b);
        assert!(is_prime_u64(a.modulus));
        assert!(a.base > 1 && a.base < a.modulus);
        assert_ne!(FingerprintContext::new(43).base, a.base);
        assert_eq!(mul_mod(a.base, a.base_inv), 1);
    }

    #[test]
    fn append_matches_direct_build() {
        let c = ctx();
        let ab = build(&c, 1, b"ab");
        assert_eq!(ab.append(&c, b'c'), Fingerprint::from_bytes(&c, 1, b"abc"));
        let single = Fingerprint::empty(1).append(&c, b'z');
        assert_eq!(single, Fingerprint::from_bytes(&c, 1, b"z"));
        assert_eq!(single.len, 1);
    }

    #[test]
    fn append_random_strings() {
        let c = ctx();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let len = rng.gen_range(0..64);
            let start = rng.gen_range(1..1000);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_eq!(build(&c, start, &bytes), Fingerprint::from_bytes(&c, start, &bytes));
        }
    }

    #[test]
    fn concat_and_subtract() {
        let c = ctx();
        let s = b"abcde";
        let left = Fingerprint::from_bytes(&c, 1, &s[..2]);
        let right = Fingerprint::from_bytes(&c, 3, &s[2..]);
        let whole = Fingerprint::from_bytes(&c, 1, s);
        assert_eq!(left.concat(&right).unwrap(), whole);
        assert_eq!(whole.subtract_prefix(&left).unwrap(), right);

        let abc = Fingerprint::from_bytes(&c, 1, b"abc");
        assert_eq!(abc.concat(&Fingerprint::empty(4)).unwrap(), abc);
        assert_eq!(whole.subtract_prefix(&whole).unwrap(), Fingerprint::empty(6));

        assert!(matches!(left.concat(&whole), Err(Error::Adjacency(_))));
        assert!(matches!(left.subtract_prefix(&right), Err(Error::Adjacency(_))));
    }

    #[test]
    fn shift_preserves_content() {
        let c = ctx();
        let a = Fingerprint::from_bytes(&c, 3, b"hello");
        let b = Fingerprint::from_bytes(&c, 40, b"hello");
        assert_eq!(a.shifted(&c, 40), b);
        assert_eq!(b.shifted(&c, 3), a);
        assert!(a.same_content(&c, &b));
        assert!(!a.same_content(&c, &Fingerprint::from_bytes(&c, 40, b"hellp")));
    }

    #[test]
    fn decode_single_mismatch() {
        let c = ctx();
        let a = Fingerprint::from_bytes(&c, 1, b"abca");
        let b = Fingerprint::from_bytes(&c, 1, b"abda");
        assert_eq!(
            decode_one_mismatch(&c, &a, &b).unwrap(),
            Decoded::One {
                position: 3,
                byte_a: b'c',
                byte_b: b'd'
            }
        );
        assert_eq!(decode_one_mismatch(&c, &a, &a).unwrap(), Decoded::Equal);
        let shifted = Fingerprint::from_bytes(&c, 2, b"abca");
        assert!(decode_one_mismatch(&c, &a, &shifted).is_err());
    }

    #[test]
    fn decode_extreme_bytes() {
        let c = ctx();
        let a = Fingerprint::from_bytes(&c, 9, &[0, 255, 7]);
        let b = Fingerprint::from_bytes(&c, 9, &[0, 0, 7]);
        assert_eq!(
            decode_one_mismatch(&c, &a, &b).unwrap(),
            Decoded::One {
                position: 10,
                byte_a: 255,
                byte_b: 0
            }
        );
    }

    #[test]
    fn two_mismatches_decode_as_many() {
        // every binary string pair of length 6 at distance exactly 2
        let c = ctx();
        let mut checked = 0;
        for x in 0u32..64 {
            for y in 0u32..64 {
                if (x ^ y).count_ones() != 2 {
                    continue;
                }
                let to_bytes = |v: u32| (0..6).map(|i| b'0' + ((v >> i) & 1) as u8).collect::<Vec<_>>();
                let a = Fingerprint::from_bytes(&c, 1, &to_bytes(x));
                let b = Fingerprint::from_bytes(&c, 1, &to_bytes(y));
                assert_eq!(decode_one_mismatch(&c, &a, &b).unwrap(), Decoded::Many);
                checked += 1;
            }
        }
        assert_eq!(checked, 64 * 15);
    }

    #[test]
    fn no_collisions_on_random_pairs() {
        let c = FingerprintContext::new(99);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut collisions = 0;
        for _ in 0..100_000 {
            let len = rng.gen_range(1..24);
            let a: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let mut b = a.clone();
            let at = rng.gen_range(0..len);
            b[at] = b[at].wrapping_add(rng.gen_range(1..=255));
            if rng.gen_bool(0.5) {
                let at2 = rng.gen_range(0..len);
                b[at2] = rng.gen();
            }
            if a == b {
                continue;
            }
            if Fingerprint::from_bytes(&c, 1, &a) == Fingerprint::from_bytes(&c, 1, &b) {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }
}
