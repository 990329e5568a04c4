//! Exact 2-state Markov chain machinery.
//!
//! Everything downstream (rate formula, encoder, converse) is driven by the
//! bridge distribution `p(x | u)`: the conditional law of the current request
//! given the last ON-time request and the one-step lookahead request. It is
//! computed from one-step, gap-step and (gap+1)-step transition probabilities
//! in exact rational arithmetic.

use std::fmt;

use num_traits::{One, Zero};

use crate::rational::{is_probability, one, zero, Rat};
use crate::{Error, Result};

/// One of the two information sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    A,
    B,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::A, Source::B];

    /// The other source.
    pub fn complement(self) -> Source {
        match self {
            Source::A => Source::B,
            Source::B => Source::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Source::A => 0,
            Source::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Source {
        match i {
            0 => Source::A,
            1 => Source::B,
            _ => panic!("source index out of range: {i}"),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::A => write!(f, "A"),
            Source::B => write!(f, "B"),
        }
    }
}

/// Conditioning context of the encoder: the request at the most recent ON
/// time and the request one step ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UContext {
    pub last_on: Source,
    pub next: Source,
}

impl UContext {
    pub const ALL: [UContext; 4] = [
        UContext { last_on: Source::A, next: Source::A },
        UContext { last_on: Source::A, next: Source::B },
        UContext { last_on: Source::B, next: Source::A },
        UContext { last_on: Source::B, next: Source::B },
    ];

    pub fn new(last_on: Source, next: Source) -> Self {
        UContext { last_on, next }
    }
}

impl fmt::Display for UContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.last_on, self.next)
    }
}

/// Row-stochastic 2x2 transition matrix of the request chain, exact rationals.
///
/// Row = current source, column = next source (source 1 = A, source 2 = B).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    entries: [[Rat; 2]; 2],
    strictly_positive: bool,
}

impl TransitionMatrix {
    /// Validates a raw 2x2 grid: each row must sum to exactly 1 and every
    /// entry must lie in [0, 1]. The strict-positivity flag is recorded so
    /// downstream operations that divide by multi-step probabilities can
    /// check it cheaply.
    pub fn validate(raw: [[Rat; 2]; 2]) -> Result<TransitionMatrix> {
        for (i, row) in raw.iter().enumerate() {
            for entry in row {
                if !is_probability(entry) {
                    return Err(Error::NotStochastic(format!(
                        "entry out of [0,1] in row {i}"
                    )));
                }
            }
            let sum = &row[0] + &row[1];
            if !sum.is_one() {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        let strictly_positive = raw.iter().flatten().all(|e| !e.is_zero());
        Ok(TransitionMatrix {
            entries: raw,
            strictly_positive,
        })
    }

    /// The symmetric matrix [[1-a, a], [a, 1-a]].
    pub fn symmetric(alpha: Rat) -> Result<TransitionMatrix> {
        let stay = one() - &alpha;
        TransitionMatrix::validate([[stay.clone(), alpha.clone()], [alpha, stay]])
    }

    /// One-step transition probability p(to | from).
    pub fn prob(&self, from: Source, to: Source) -> &Rat {
        &self.entries[from.index()][to.index()]
    }

    pub fn entries(&self) -> &[[Rat; 2]; 2] {
        &self.entries
    }

    /// True iff every entry is nonzero.
    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    /// Exact k-step transition matrix; k = 0 is the identity.
    pub fn power(&self, k: usize) -> [[Rat; 2]; 2] {
        let mut acc = [[one(), zero()], [zero(), one()]];
        for _ in 0..k {
            acc = mat_mul(&acc, &self.entries);
        }
        acc
    }

    /// Parses either four fractions in row-major order
    /// (`"3/4 1/4 1/4 3/4"`) or the shorthand `"alpha=1/4"` for the
    /// symmetric matrix.
    pub fn parse(s: &str) -> Result<TransitionMatrix> {
        let s = s.trim();
        if let Some(alpha) = s.strip_prefix("alpha=") {
            return TransitionMatrix::symmetric(crate::rational::parse_fraction(alpha)?);
        }
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 fractions or alpha=p/q, got {s:?}"
            )));
        }
        let mut vals = parts
            .iter()
            .map(|p| crate::rational::parse_fraction(p))
            .collect::<Result<Vec<Rat>>>()?;
        let d = vals.pop().unwrap();
        let c = vals.pop().unwrap();
        let b = vals.pop().unwrap();
        let a = vals.pop().unwrap();
        TransitionMatrix::validate([[a, b], [c, d]])
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        write!(
            f,
            "{} {} {} {}",
            crate::rational::format_fraction(&e[0][0]),
            crate::rational::format_fraction(&e[0][1]),
            crate::rational::format_fraction(&e[1][0]),
            crate::rational::format_fraction(&e[1][1]),
        )
    }
}

fn mat_mul(a: &[[Rat; 2]; 2], b: &[[Rat; 2]; 2]) -> [[Rat; 2]; 2] {
    let cell = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
    [[cell(0, 0), cell(0, 1)], [cell(1, 0), cell(1, 1)]]
}

/// Conditional law of the current request given a `UContext`, at a given gap
/// since the last ON time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeDistribution {
    probs: [Rat; 2],
    pub gap: usize,
}

impl BridgeDistribution {
    pub fn prob(&self, x: Source) -> &Rat {
        &self.probs[x.index()]
    }
}

/// Bridge distribution p(x | u) at the given gap:
///
/// ```text
/// p(x | u) = p(next | x) * p(x | last_on) / p(next | last_on)
/// ```
///
/// with the three factors read from M, M^gap and M^(gap+1). At gap 0 the
/// middle factor is an indicator (M^0 = identity) and the result collapses to
/// the point mass on `u.last_on`.
pub fn bridge(m: &TransitionMatrix, gap: usize, u: UContext) -> Result<BridgeDistribution> {
    let m_gap = m.power(gap);
    let m_gap1 = m.power(gap + 1);
    let denom = &m_gap1[u.last_on.index()][u.next.index()];
    if denom.is_zero() {
        return Err(Error::DegenerateContext { gap, context: u });
    }
    let prob = |x: Source| {
        let numer = m.prob(x, u.next) * &m_gap[u.last_on.index()][x.index()];
        numer / denom
    };
    Ok(BridgeDistribution {
        probs: [prob(Source::A), prob(Source::B)],
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn m(a: [(i64, i64); 2], b: [(i64, i64); 2]) -> TransitionMatrix {
        TransitionMatrix::validate([
            [rat(a[0].0, a[0].1), rat(a[1].0, a[1].1)],
            [rat(b[0].0, b[0].1), rat(b[1].0, b[1].1)],
        ])
        .unwrap()
    }

    fn example1() -> TransitionMatrix {
        m([(3, 4), (1, 4)], [(1, 4), (3, 4)])
    }

    fn asymmetric() -> TransitionMatrix {
        m([(1, 2), (1, 2)], [(1, 4), (3, 4)])
    }

    /// Independent oracle: conditional law of X_g given X_0 = a, X_{g+1} = b,
    /// by enumerating every trajectory of the chain.
    fn bridge_by_enumeration(m: &TransitionMatrix, gap: usize, u: UContext) -> [Rat; 2] {
        let len = gap + 2;
        let mut num = [crate::rational::zero(), crate::rational::zero()];
        let mut den = crate::rational::zero();
        for bits in 0..(1usize << len) {
            let traj: Vec<Source> = (0..len)
                .map(|i| Source::from_index((bits >> i) & 1))
                .collect();
            if traj[0] != u.last_on || traj[len - 1] != u.next {
                continue;
            }
            let mut p = crate::rational::one();
            for w in traj.windows(2) {
                p *= m.prob(w[0], w[1]);
            }
            num[traj[gap].index()] += &p;
            den += &p;
        }
        [&num[0] / &den, &num[1] / &den]
    }

    #[test]
    fn validate_accepts_uniform_and_example1() {
        let u = m([(1, 2), (1, 2)], [(1, 2), (1, 2)]);
        assert!(u.is_strictly_positive());
        assert!(example1().is_strictly_positive());
    }

    #[test]
    fn validate_rejects_bad_row_sum() {
        let raw = [
            [rat(1, 2), rat(1, 3)],
            [rat(1, 4), rat(3, 4)],
        ];
        assert!(matches!(
            TransitionMatrix::validate(raw),
            Err(Error::NotStochastic(_))
        ));
    }

    #[test]
    fn validate_rejects_negative_entry() {
        let raw = [
            [rat(3, 2), rat(-1, 2)],
            [rat(1, 2), rat(1, 2)],
        ];
        assert!(matches!(
            TransitionMatrix::validate(raw),
            Err(Error::NotStochastic(_))
        ));
    }

    #[test]
    fn power_zero_is_identity() {
        let p = example1().power(0);
        assert_eq!(p, [[rat(1, 1), rat(0, 1)], [rat(0, 1), rat(1, 1)]]);
    }

    #[test]
    fn power_two_example1() {
        // hand matrix multiplication
        let p = example1().power(2);
        assert_eq!(p, [[rat(5, 8), rat(3, 8)], [rat(3, 8), rat(5, 8)]]);
    }

    #[test]
    fn power_two_asymmetric() {
        let p = asymmetric().power(2);
        assert_eq!(p, [[rat(3, 8), rat(5, 8)], [rat(5, 16), rat(11, 16)]]);
    }

    #[test]
    fn bridge_example1_gap1() {
        let d = bridge(&example1(), 1, UContext::new(Source::A, Source::A)).unwrap();
        assert_eq!(*d.prob(Source::A), rat(9, 10));
        assert_eq!(*d.prob(Source::B), rat(1, 10));
    }

    #[test]
    fn bridge_gap0_is_point_mass_on_last_on() {
        let d = bridge(&example1(), 0, UContext::new(Source::B, Source::A)).unwrap();
        assert_eq!(*d.prob(Source::A), rat(0, 1));
        assert_eq!(*d.prob(Source::B), rat(1, 1));
        for u in UContext::ALL {
            let d = bridge(&asymmetric(), 0, u).unwrap();
            assert_eq!(*d.prob(u.last_on), rat(1, 1));
        }
    }

    #[test]
    fn bridge_asymmetric_gap1() {
        let d = bridge(&asymmetric(), 1, UContext::new(Source::B, Source::B)).unwrap();
        assert_eq!(*d.prob(Source::A), rat(2, 11));
        assert_eq!(*d.prob(Source::B), rat(9, 11));
    }

    #[test]
    fn bridge_degenerate_context() {
        let id = m([(1, 1), (0, 1)], [(0, 1), (1, 1)]);
        let r = bridge(&id, 1, UContext::new(Source::A, Source::B));
        assert!(matches!(r, Err(Error::DegenerateContext { .. })));
    }

    #[test]
    fn bridge_matches_trajectory_enumeration() {
        for mat in [example1(), asymmetric(), m([(1, 10), (9, 10)], [(2, 3), (1, 3)])] {
            for gap in 0..=4 {
                for u in UContext::ALL {
                    let d = bridge(&mat, gap, u).unwrap();
                    let oracle = bridge_by_enumeration(&mat, gap, u);
                    assert_eq!(*d.prob(Source::A), oracle[0], "gap {gap} u {u}");
                    assert_eq!(*d.prob(Source::B), oracle[1], "gap {gap} u {u}");
                    let total = d.prob(Source::A) + d.prob(Source::B);
                    assert_eq!(total, rat(1, 1));
                }
            }
        }
    }

    #[test]
    fn bridge_symmetric_matrix_symmetry() {
        for gap in 0..=4 {
            let aa = bridge(&example1(), gap, UContext::new(Source::A, Source::A)).unwrap();
            let bb = bridge(&example1(), gap, UContext::new(Source::B, Source::B)).unwrap();
            assert_eq!(aa.prob(Source::A), bb.prob(Source::B));
        }
    }

    #[test]
    fn parse_matrix_formats() {
        assert_eq!(TransitionMatrix::parse("3/4 1/4 1/4 3/4").unwrap(), example1());
        assert_eq!(TransitionMatrix::parse("alpha=1/4").unwrap(), example1());
        assert!(TransitionMatrix::parse("1/2 1/2").is_err());
        // alpha > 1/2 is accepted; interpretation is left to the caller
        assert!(TransitionMatrix::parse("alpha=2/3").is_ok());
        assert!(TransitionMatrix::parse("alpha=3/2").is_err());
    }
}
