use kperiod::corpus::gen_planted;
use kperiod::one_pass::run_one_pass;
use kperiod::oracle::brute_force_k_periods;
use kperiod::two_pass::{run_two_pass, run_two_pass_with_stats, VerifyMode};
use kperiod::{Backend, EngineOptions};
use proptest::prelude::*;

fn backend() -> impl Strategy<Value = Backend> {
    prop_oneof![Just(Backend::Exact), Just(Backend::ResidueFamily)]
}

/// Small alphabets keep approximate periods common.
fn text() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        prop::collection::vec(b'a'..=b'b', 0..=512),
        prop::collection::vec(b'a'..=b'c', 0..=128),
        (prop::collection::vec(b'a'..=b'c', 1..=12), 16usize..=512, prop::collection::vec(any::<u16>(), 0..4), any::<u64>())
            .prop_map(|(block, n, marks, seed)| {
                let p = block.len();
                if n <= p {
                    return block;
                }
                let at: Vec<usize> = marks.iter().map(|&m| 1 + m as usize % (n - p)).collect();
                gen_planted(&block, n, &at, seed).unwrap_or_else(|_| block.repeat(n / p))
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn passes_agree_below_half(s in text(), k in 0usize..=3, seed in any::<u64>(), b in backend()) {
        let opts = EngineOptions::new(k, seed, b);
        let two = run_two_pass(&s, opts).unwrap();
        let one = run_one_pass(&s, opts).unwrap();
        let below: Vec<_> = two.periods.iter().filter(|p| p.period <= s.len() / 2).collect();
        prop_assert_eq!(one.periods.len(), below.len());
        for (a, b) in one.periods.iter().zip(below) {
            prop_assert_eq!(a.period, b.period);
            // two-pass skips the comparison when n - p <= k
            if let (Some(x), Some(y)) = (&a.mismatches, &b.mismatches) {
                prop_assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn two_pass_matches_oracle(s in text(), k in 0usize..=3, seed in any::<u64>()) {
        let report = run_two_pass(&s, EngineOptions::new(k, seed, Backend::ResidueFamily)).unwrap();
        let n = s.len();
        let mut want = brute_force_k_periods(&s, k);
        for p in &mut want {
            if n - p.period <= k {
                p.mismatches = None;
            }
        }
        prop_assert_eq!(report.periods, want);
    }

    #[test]
    fn verify_modes_agree(s in text(), k in 0usize..=3, seed in any::<u64>()) {
        let opts = EngineOptions::new(k, seed, Backend::ResidueFamily);
        let (a, _) = run_two_pass_with_stats(&s, opts, VerifyMode::Compressed).unwrap();
        let (b, _) = run_two_pass_with_stats(&s, opts, VerifyMode::PerCandidate).unwrap();
        prop_assert_eq!(a.periods, b.periods);
    }
}
