//! Streaming detection of approximate periods.
//!
//! A length-`n` stream `S` has *k-period* `p` when `S[1, n-p]` and
//! `S[p+1, n]` differ in at most `k` positions. The engines here report every
//! such `p` together with the mismatch positions while keeping sublinear
//! state: [`two_pass`] covers all periods, [`one_pass`] covers `p ≤ n/2`.

pub mod candidates;
pub mod cli;
pub mod corpus;
mod detector;
pub mod error;
pub mod fingerprint;
pub mod mismatch_sketch;
pub mod one_pass;
pub mod oracle;
pub mod prefix_matcher;
pub mod progression;
pub mod report;
pub mod two_pass;

pub use error::{Error, Result};
pub use fingerprint::{Fingerprint, FingerprintContext};
pub use mismatch_sketch::{Backend, Distance, Mismatch, MismatchSketch, SketchConfig};
pub use report::{EngineOptions, KPeriod, PeriodReport, SpaceStats};
