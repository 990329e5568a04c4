//! The ON-OFF privacy scheme: pi-floor, optimal download rate, randomized
//! query encoder and per-timestep planning over a privacy pattern.
//!
//! Everything depends on time only through the gap since the last ON flag, so
//! every operation takes a `gap`, never a `t`. The lookahead window is fixed
//! at one future request; larger windows provably cannot improve the rate, so
//! the API does not model them.

use std::fmt;

use num_traits::Zero;

use crate::markov::{bridge, BridgeDistribution, Source, TransitionMatrix, UContext};
use crate::rational::{one, to_f64, zero, Rat};
use crate::{Error, Result};

/// A query: the nonempty subset of sources whose current messages the user
/// downloads. Subset queries only; coded answers are unnecessary here.
///
/// Fixed ordering `A < B < AB` is used for inverse-CDF sampling and all
/// serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuerySymbol {
    A,
    B,
    AB,
}

impl QuerySymbol {
    pub const ALL: [QuerySymbol; 3] = [QuerySymbol::A, QuerySymbol::B, QuerySymbol::AB];

    /// The singleton query for a source.
    pub fn singleton(x: Source) -> QuerySymbol {
        match x {
            Source::A => QuerySymbol::A,
            Source::B => QuerySymbol::B,
        }
    }

    /// Number of sources in the query; the answer length is this times L.
    pub fn len(self) -> usize {
        match self {
            QuerySymbol::A | QuerySymbol::B => 1,
            QuerySymbol::AB => 2,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, x: Source) -> bool {
        match self {
            QuerySymbol::A => x == Source::A,
            QuerySymbol::B => x == Source::B,
            QuerySymbol::AB => true,
        }
    }

    pub fn index(self) -> usize {
        match self {
            QuerySymbol::A => 0,
            QuerySymbol::B => 1,
            QuerySymbol::AB => 2,
        }
    }

    /// Wire bitmask: bit0 = A, bit1 = B.
    pub fn mask(self) -> u8 {
        match self {
            QuerySymbol::A => 0b01,
            QuerySymbol::B => 0b10,
            QuerySymbol::AB => 0b11,
        }
    }

    pub fn from_mask(mask: u8) -> Option<QuerySymbol> {
        match mask {
            0b01 => Some(QuerySymbol::A),
            0b10 => Some(QuerySymbol::B),
            0b11 => Some(QuerySymbol::AB),
            _ => None,
        }
    }
}

impl fmt::Display for QuerySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuerySymbol::A => write!(f, "A"),
            QuerySymbol::B => write!(f, "B"),
            QuerySymbol::AB => write!(f, "AB"),
        }
    }
}

/// ON/OFF flag for one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivacyFlag {
    On,
    Off,
}

/// Sequence of privacy flags F_0..F_T, with F_0 = ON enforced.
///
/// Times past the end of the pattern are treated as OFF; the worst-case
/// assumption that privacy is always ON in the future is baked into the
/// verifier's privacy set, not into the pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivacyPattern {
    flags: Vec<PrivacyFlag>,
}

impl PrivacyPattern {
    pub fn new(flags: Vec<PrivacyFlag>) -> Result<PrivacyPattern> {
        if flags.first() != Some(&PrivacyFlag::On) {
            return Err(Error::Parse("pattern must start with ON".into()));
        }
        Ok(PrivacyPattern { flags })
    }

    /// Parses comma-separated tokens, e.g. `"ON,OFF,OFF"`.
    pub fn parse(s: &str) -> Result<PrivacyPattern> {
        let flags = s
            .split(',')
            .map(|tok| match tok.trim() {
                "ON" | "on" => Ok(PrivacyFlag::On),
                "OFF" | "off" => Ok(PrivacyFlag::Off),
                other => Err(Error::Parse(format!("bad flag {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PrivacyPattern::new(flags)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        false // flags[0] always exists
    }

    /// Flag at time t; OFF beyond the stored pattern.
    pub fn flag(&self, t: usize) -> PrivacyFlag {
        self.flags.get(t).copied().unwrap_or(PrivacyFlag::Off)
    }

    /// Latest time i <= t with F_i = ON.
    pub fn last_on(&self, t: usize) -> usize {
        (0..=t)
            .rev()
            .find(|&i| self.flag(i) == PrivacyFlag::On)
            .expect("F_0 = ON")
    }

    /// Gap g_t = t - F⁻(t).
    pub fn gap(&self, t: usize) -> usize {
        t - self.last_on(t)
    }

    /// ON times i <= t, i.e. the past half of the privacy set.
    pub fn on_times_through(&self, t: usize) -> Vec<usize> {
        (0..=t).filter(|&i| self.flag(i) == PrivacyFlag::On).collect()
    }
}

impl fmt::Display for PrivacyPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let toks: Vec<&str> = self
            .flags
            .iter()
            .map(|fl| match fl {
                PrivacyFlag::On => "ON",
                PrivacyFlag::Off => "OFF",
            })
            .collect();
        write!(f, "{}", toks.join(","))
    }
}

/// Per-column minimum of the bridge table: the largest singleton-query
/// probability privacy permits for each source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiFloor {
    pi: [Rat; 2],
    pub gap: usize,
}

impl PiFloor {
    pub fn pi(&self, x: Source) -> &Rat {
        &self.pi[x.index()]
    }

    /// pi(A) + pi(B).
    pub fn sum(&self) -> Rat {
        &self.pi[0] + &self.pi[1]
    }
}

/// Minimum of the bridge probability of each source over the four contexts.
///
/// Contexts whose (gap+1)-step denominator is zero cannot occur and are
/// skipped; if any context is impossible the floor drops to 0 (privacy
/// against the remaining contexts still forces the full download, matching
/// the deterministic-chain endpoint).
pub fn pi_floor(m: &TransitionMatrix, gap: usize) -> Result<PiFloor> {
    let mut mins: [Option<Rat>; 2] = [None, None];
    let mut any_impossible = false;
    for u in UContext::ALL {
        match bridge(m, gap, u) {
            Ok(d) => {
                for x in Source::ALL {
                    let p = d.prob(x);
                    let slot = &mut mins[x.index()];
                    if slot.as_ref().map_or(true, |cur| p < cur) {
                        *slot = Some(p.clone());
                    }
                }
            }
            Err(Error::DegenerateContext { .. }) => {
                if m.is_strictly_positive() {
                    unreachable!("strictly positive matrix cannot degenerate");
                }
                any_impossible = true;
            }
            Err(e) => return Err(e),
        }
    }
    let pi = if any_impossible {
        [zero(), zero()]
    } else {
        [mins[0].take().unwrap(), mins[1].take().unwrap()]
    };
    Ok(PiFloor { pi, gap })
}

/// Optimal expected number of downloaded messages per step at this gap:
/// 2 - pi(A) - pi(B). Always in [1, 2].
pub fn optimal_inverse_rate(m: &TransitionMatrix, gap: usize) -> Result<Rat> {
    let pf = pi_floor(m, gap)?;
    Ok(Rat::from_integer(2.into()) - pf.sum())
}

/// Distribution over query symbols for one (request, context) pair.
///
/// Mass sits only on the singleton for the requested source and on the full
/// download; the complement singleton always has weight exactly 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderDistribution {
    probs: [Rat; 3],
}

impl EncoderDistribution {
    pub fn from_probs(probs: [Rat; 3]) -> EncoderDistribution {
        debug_assert!({
            let total = &probs[0] + &probs[1] + &probs[2];
            total == one()
        });
        EncoderDistribution { probs }
    }

    pub fn prob(&self, q: QuerySymbol) -> &Rat {
        &self.probs[q.index()]
    }

    /// Point mass.
    pub fn delta(q: QuerySymbol) -> EncoderDistribution {
        let mut probs = [zero(), zero(), zero()];
        probs[q.index()] = one();
        EncoderDistribution { probs }
    }
}

/// The randomized query encoder: download only the requested source with
/// probability pi(x)/p(x|u), otherwise download both.
pub fn encoder(
    m: &TransitionMatrix,
    gap: usize,
    x: Source,
    u: UContext,
) -> Result<EncoderDistribution> {
    let d: BridgeDistribution = bridge(m, gap, u)?;
    let px = d.prob(x);
    if px.is_zero() {
        return Err(Error::ImpossibleContext { gap, x, context: u });
    }
    let pf = pi_floor(m, gap)?;
    let w_single = pf.pi(x) / px;
    let w_both = one() - &w_single;
    let mut probs = [zero(), zero(), zero()];
    probs[QuerySymbol::singleton(x).index()] = w_single;
    probs[QuerySymbol::AB.index()] = w_both;
    Ok(EncoderDistribution { probs })
}

/// Marginal query distribution at this gap: each singleton carries its
/// pi-floor, the full download carries the rest. Independent of the context,
/// which is exactly why the scheme is private.
pub fn query_marginal(m: &TransitionMatrix, gap: usize) -> Result<[Rat; 3]> {
    let pf = pi_floor(m, gap)?;
    let both = one() - pf.sum();
    Ok([pf.pi(Source::A).clone(), pf.pi(Source::B).clone(), both])
}

/// Inverse-CDF draw over the fixed symbol order A < B < AB.
/// `draw` must come from Uniform[0,1).
pub fn sample_query(dist: &EncoderDistribution, draw: f64) -> QuerySymbol {
    let mut cum = 0.0;
    for q in [QuerySymbol::A, QuerySymbol::B] {
        cum += to_f64(dist.prob(q));
        if draw < cum {
            return q;
        }
    }
    QuerySymbol::AB
}

/// Optimal inverse rate at each time of the pattern, driven by the per-t gap.
pub fn plan_rate_profile(m: &TransitionMatrix, pattern: &PrivacyPattern) -> Result<Vec<Rat>> {
    (0..pattern.len())
        .map(|t| optimal_inverse_rate(m, pattern.gap(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn example1() -> TransitionMatrix {
        TransitionMatrix::parse("alpha=1/4").unwrap()
    }

    fn asymmetric() -> TransitionMatrix {
        TransitionMatrix::parse("1/2 1/2 1/4 3/4").unwrap()
    }

    #[test]
    fn pi_floor_example1_gap1() {
        let pf = pi_floor(&example1(), 1).unwrap();
        assert_eq!(*pf.pi(Source::A), rat(1, 10));
        assert_eq!(*pf.pi(Source::B), rat(1, 10));
    }

    #[test]
    fn pi_floor_gap0_is_zero() {
        for m in [example1(), asymmetric()] {
            let pf = pi_floor(&m, 0).unwrap();
            assert_eq!(*pf.pi(Source::A), rat(0, 1));
            assert_eq!(*pf.pi(Source::B), rat(0, 1));
        }
    }

    #[test]
    fn pi_floor_asymmetric_gap1() {
        let pf = pi_floor(&asymmetric(), 1).unwrap();
        assert_eq!(*pf.pi(Source::A), rat(2, 11));
        assert_eq!(*pf.pi(Source::B), rat(1, 3));
    }

    #[test]
    fn rate_endpoints() {
        // independent requests: download exactly the desired message
        let half = TransitionMatrix::parse("alpha=1/2").unwrap();
        assert_eq!(optimal_inverse_rate(&half, 1).unwrap(), rat(1, 1));
        // deterministic chain: must always download both
        let zero_m = TransitionMatrix::parse("alpha=0").unwrap();
        assert_eq!(optimal_inverse_rate(&zero_m, 1).unwrap(), rat(2, 1));
        // privacy ON now
        assert_eq!(optimal_inverse_rate(&example1(), 0).unwrap(), rat(2, 1));
    }

    #[test]
    fn rate_always_between_one_and_two() {
        for m in [
            example1(),
            asymmetric(),
            TransitionMatrix::parse("alpha=1/10").unwrap(),
            TransitionMatrix::parse("9/10 1/10 2/3 1/3").unwrap(),
        ] {
            for gap in 0..=6 {
                let r = optimal_inverse_rate(&m, gap).unwrap();
                assert!(r >= rat(1, 1) && r <= rat(2, 1), "gap {gap}");
            }
        }
    }

    #[test]
    fn encoder_example2_alpha_quarter() {
        // X_0 = X_1 = X_2 = A: singleton with alpha^2/(1-alpha)^2 = 1/9
        let d = encoder(&example1(), 1, Source::A, UContext::new(Source::A, Source::A)).unwrap();
        assert_eq!(*d.prob(QuerySymbol::A), rat(1, 9));
        assert_eq!(*d.prob(QuerySymbol::B), rat(0, 1));
        assert_eq!(*d.prob(QuerySymbol::AB), rat(8, 9));
    }

    #[test]
    fn encoder_worst_case_context_is_deterministic_singleton() {
        // p(A|(B,B)) = pi(A): ratio 1, download only the singleton
        let d = encoder(&example1(), 1, Source::A, UContext::new(Source::B, Source::B)).unwrap();
        assert_eq!(*d.prob(QuerySymbol::A), rat(1, 1));
        assert_eq!(*d.prob(QuerySymbol::AB), rat(0, 1));
    }

    #[test]
    fn encoder_gap0_forces_full_download() {
        let d = encoder(&example1(), 0, Source::A, UContext::new(Source::A, Source::B)).unwrap();
        assert_eq!(*d.prob(QuerySymbol::AB), rat(1, 1));
    }

    #[test]
    fn encoder_impossible_context() {
        let r = encoder(&example1(), 0, Source::B, UContext::new(Source::A, Source::B));
        assert!(matches!(r, Err(Error::ImpossibleContext { .. })));
    }

    #[test]
    fn encoder_validity_sweep() {
        for m in [example1(), asymmetric(), TransitionMatrix::parse("alpha=2/5").unwrap()] {
            for gap in 0..=6 {
                for u in UContext::ALL {
                    for x in Source::ALL {
                        match encoder(&m, gap, x, u) {
                            Ok(d) => {
                                let total: Rat = QuerySymbol::ALL
                                    .iter()
                                    .map(|&q| d.prob(q).clone())
                                    .sum();
                                assert_eq!(total, rat(1, 1));
                                assert_eq!(*d.prob(QuerySymbol::singleton(x.complement())), rat(0, 1));
                                for q in QuerySymbol::ALL {
                                    assert!(crate::rational::is_probability(d.prob(q)));
                                }
                            }
                            Err(Error::ImpossibleContext { .. }) => {
                                assert_eq!(gap, 0); // only gap-0 off-path contexts here
                            }
                            Err(e) => panic!("{e}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn marginal_privacy_identity() {
        // sum_x p(x|u) w(q|x,u) is the same for every context u
        for m in [example1(), asymmetric()] {
            for gap in 1..=4 {
                let mut reference: Option<[Rat; 3]> = None;
                for u in UContext::ALL {
                    let bd = bridge(&m, gap, u).unwrap();
                    let mut row = [rat(0, 1), rat(0, 1), rat(0, 1)];
                    for x in Source::ALL {
                        let d = encoder(&m, gap, x, u).unwrap();
                        for q in QuerySymbol::ALL {
                            row[q.index()] += bd.prob(x) * d.prob(q);
                        }
                    }
                    match &reference {
                        None => reference = Some(row),
                        Some(r) => assert_eq!(*r, row, "gap {gap} u {u}"),
                    }
                }
                // and it equals the query marginal
                let qm = query_marginal(&m, gap).unwrap();
                assert_eq!(reference.unwrap(), qm);
            }
        }
    }

    #[test]
    fn marginal_expected_length_equals_rate() {
        for m in [example1(), asymmetric()] {
            for gap in 0..=5 {
                let qm = query_marginal(&m, gap).unwrap();
                let expected_len: Rat = QuerySymbol::ALL
                    .iter()
                    .map(|&q| &qm[q.index()] * rat(q.len() as i64, 1))
                    .sum();
                assert_eq!(expected_len, optimal_inverse_rate(&m, gap).unwrap());
            }
        }
    }

    #[test]
    fn marginal_examples() {
        let qm = query_marginal(&example1(), 1).unwrap();
        assert_eq!(qm, [rat(1, 10), rat(1, 10), rat(8, 10)]);
        let half = TransitionMatrix::parse("alpha=1/2").unwrap();
        let qm = query_marginal(&half, 1).unwrap();
        assert_eq!(qm, [rat(1, 2), rat(1, 2), rat(0, 1)]);
        let qm = query_marginal(&example1(), 0).unwrap();
        assert_eq!(qm, [rat(0, 1), rat(0, 1), rat(1, 1)]);
    }

    #[test]
    fn sample_query_inverse_cdf() {
        assert_eq!(sample_query(&EncoderDistribution::delta(QuerySymbol::A), 0.99), QuerySymbol::A);
        let d = encoder(&example1(), 1, Source::A, UContext::new(Source::A, Source::A)).unwrap();
        assert_eq!(sample_query(&d, 0.05), QuerySymbol::A); // 0.05 < 1/9
        assert_eq!(sample_query(&d, 0.5), QuerySymbol::AB); // 0.5 >= 1/9
    }

    #[test]
    fn pattern_parse_and_gap() {
        let p = PrivacyPattern::parse("ON,OFF,OFF,ON,OFF").unwrap();
        assert_eq!(p.gap(0), 0);
        assert_eq!(p.gap(2), 2);
        assert_eq!(p.gap(3), 0);
        assert_eq!(p.gap(4), 1);
        // beyond the pattern: OFF
        assert_eq!(p.gap(6), 3);
        assert!(PrivacyPattern::parse("OFF,ON").is_err());
        assert!(PrivacyPattern::parse("ON,maybe").is_err());
    }

    #[test]
    fn rate_profile_examples() {
        let p = PrivacyPattern::parse("ON,OFF").unwrap();
        assert_eq!(
            plan_rate_profile(&example1(), &p).unwrap(),
            vec![rat(2, 1), rat(9, 5)]
        );
        let p = PrivacyPattern::parse("ON,ON,ON").unwrap();
        assert_eq!(
            plan_rate_profile(&example1(), &p).unwrap(),
            vec![rat(2, 1), rat(2, 1), rat(2, 1)]
        );
        let p = PrivacyPattern::parse("ON,OFF,OFF").unwrap();
        assert_eq!(
            plan_rate_profile(&example1(), &p).unwrap(),
            vec![rat(2, 1), rat(9, 5), rat(5, 3)]
        );
    }
}
