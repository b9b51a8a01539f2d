//! Test-string generators.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Repeats `block` to length `n`, then corrupts it so that the positions
/// `i` with `S[i] != S[i + |block|]` are exactly `mismatches` (1-based).
///
/// Replacement bytes are drawn from the block's own alphabet.
pub fn gen_planted(block: &[u8], n: usize, mismatches: &[usize], seed: u64) -> Result<Vec<u8>> {
    let p = block.len();
    if p == 0 {
        return Err(Error::Generation("empty block".into()));
    }
    let mut s: Vec<u8> = block.iter().copied().cycle().take(n).collect();
    let wanted: BTreeSet<usize> = mismatches.iter().copied().collect();
    if wanted.is_empty() {
        return Ok(s);
    }
    let alphabet: Vec<u8> = block.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if alphabet.len() < 2 {
        return Err(Error::Generation(
            "a single-symbol block cannot host mismatches".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &i in &wanted {
        if i == 0 || i + p > n {
            return Err(Error::Range {
                value: i,
                lo: 1,
                hi: n.saturating_sub(p),
            });
        }
        let current = s[i - 1];
        let choices: Vec<u8> = alphabet.iter().copied().filter(|&c| c != current).collect();
        let fresh = choices[rng.gen_range(0..choices.len())];
        // rewriting the whole tail of the residue class keeps later pairs equal
        for j in (i + p..=n).step_by(p) {
            s[j - 1] = fresh;
        }
    }
    Ok(s)
}

/// Prefix of `1 0 11 00 111 000 …` over the bytes `'1'` and `'0'`.
pub fn gen_nu_prefix(len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut run = 1;
    while out.len() < len {
        for sym in *b"10" {
            let take = run.min(len - out.len());
            out.extend(std::iter::repeat_n(sym, take));
        }
        run += 1;
    }
    out
}

/// `x ∘ y ∘ x ∘ x`.
pub fn gen_lb_instance(x: &[u8], y: &[u8]) -> Result<Vec<u8>> {
    if x.len() != y.len() {
        return Err(Error::Generation(format!(
            "halves differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok([x, y, x, x].concat())
}

fn flip(bytes: &mut [u8], count: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    if count > bytes.len() {
        return Err(Error::Generation(format!(
            "cannot flip {count} of {} symbols",
            bytes.len()
        )));
    }
    for i in sample(rng, bytes.len(), count) {
        bytes[i] = if bytes[i] == b'1' { b'0' } else { b'1' };
    }
    Ok(())
}

/// Samples `(x, y)` of length `len`: `x` is the `ν` prefix with `k/2`
/// flips, `y` is `x` with `k/2` flips, or `k/2 + 1` when `extra` is set.
pub fn sample_lb_pair(len: usize, k: usize, extra: bool, seed: u64) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = gen_nu_prefix(len);
    flip(&mut x, k / 2, &mut rng)?;
    let mut y = x.clone();
    flip(&mut y, k / 2 + usize::from(extra), &mut rng)?;
    Ok((x, y))
}

/// Uniform string over the first `sigma` lowercase letters.
pub fn gen_random(n: usize, sigma: u8, seed: u64) -> Vec<u8> {
    let sigma = sigma.clamp(1, 26);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect()
}
