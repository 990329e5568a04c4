//! Randomized invariant checks over matrices, gaps and contexts.

use proptest::prelude::*;

use onoff_core::markov::{bridge, Source, TransitionMatrix, UContext};
use onoff_core::rational::{rat, Rat};
use onoff_core::scheme::{encoder, optimal_inverse_rate, pi_floor, QuerySymbol};

fn arb_matrix() -> impl Strategy<Value = TransitionMatrix> {
    // strictly positive rows p/d, (d-p)/d
    (2u32..=12, 2u32..=12)
        .prop_flat_map(|(da, db)| (Just(da), 1..da, Just(db), 1..db))
        .prop_map(|(da, pa, db, pb)| {
            TransitionMatrix::validate([
                [rat(pa as i64, da as i64), rat((da - pa) as i64, da as i64)],
                [rat(pb as i64, db as i64), rat((db - pb) as i64, db as i64)],
            ])
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bridge_is_a_distribution(m in arb_matrix(), gap in 0usize..=4, ui in 0usize..4) {
        let u = UContext::ALL[ui];
        let b = bridge(&m, gap, u).unwrap();
        let total: Rat = b.prob(Source::A) + b.prob(Source::B);
        prop_assert_eq!(total, rat(1, 1));
    }

    #[test]
    fn bridge_gap_zero_is_point_mass(m in arb_matrix(), ui in 0usize..4) {
        let u = UContext::ALL[ui];
        let b = bridge(&m, 0, u).unwrap();
        prop_assert_eq!(b.prob(u.last_on).clone(), rat(1, 1));
    }

    #[test]
    fn encoder_rows_are_distributions(m in arb_matrix(), gap in 0usize..=4, xi in 0usize..2, ui in 0usize..4) {
        let x = Source::ALL[xi];
        let u = UContext::ALL[ui];
        if bridge(&m, gap, u).unwrap().prob(x) > &rat(0, 1) {
            let d = encoder(&m, gap, x, u).unwrap();
            let total: Rat = QuerySymbol::ALL.iter().map(|&q| d.prob(q).clone()).sum();
            prop_assert_eq!(total, rat(1, 1));
            // the query never misses the requested source
            prop_assert_eq!(d.prob(QuerySymbol::singleton(x.complement())).clone(), rat(0, 1));
        }
    }

    #[test]
    fn query_marginal_hides_the_context(m in arb_matrix(), gap in 0usize..=4) {
        let pf = pi_floor(&m, gap).unwrap();
        let expect = [
            pf.pi(Source::A).clone(),
            pf.pi(Source::B).clone(),
            rat(1, 1) - pf.pi(Source::A) - pf.pi(Source::B),
        ];
        for u in UContext::ALL {
            let b = bridge(&m, gap, u).unwrap();
            let mut marginal = [rat(0, 1), rat(0, 1), rat(0, 1)];
            for x in Source::ALL {
                let px = b.prob(x).clone();
                if px == rat(0, 1) {
                    continue;
                }
                let d = encoder(&m, gap, x, u).unwrap();
                for (i, &q) in QuerySymbol::ALL.iter().enumerate() {
                    marginal[i] += &px * d.prob(q);
                }
            }
            prop_assert_eq!(&marginal, &expect);
        }
    }

    #[test]
    fn rate_stays_in_band(m in arb_matrix(), gap in 0usize..=5) {
        let r = optimal_inverse_rate(&m, gap).unwrap();
        prop_assert!(r >= rat(1, 1) && r <= rat(2, 1));
    }
}
