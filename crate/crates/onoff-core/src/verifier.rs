//! Exhaustive, exact verification over finite horizons.
//!
//! Builds the full joint distribution of requests and queries implied by the
//! chain law and a query encoder, then checks decodability, the privacy
//! factorization and the expected download cost cell by cell in rational
//! arithmetic. Mutual-information numbers are floats for reporting only;
//! pass/fail is always an exact product-form equality.
//!
//! The privacy set at time t contains all ON times up to t plus the entire
//! future. The check truncates the future at t+1: queries through t are a
//! function of requests through t+1 and local randomness, and by Markovity
//! the requests after t+1 are conditionally independent of the queries given
//! X_{t+1}, so the finite check is equivalent to the infinite one.

use std::collections::HashMap;

use num_traits::{Signed, Zero};

use crate::markov::{Source, TransitionMatrix, UContext};
use crate::rational::{to_f64, zero, Rat};
use crate::scheme::{encoder, EncoderDistribution, PrivacyPattern, QuerySymbol};
use crate::{Error, Result};

/// Enumeration guard: 2^(t+2) trajectories times query branches.
pub const MAX_HORIZON: usize = 14;

/// Which query encoder drives a joint table or a simulated session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// The privacy-preserving randomized encoder.
    Scheme,
    /// Negative control: always downloads exactly the requested source,
    /// revealing the request.
    AlwaysSingleton,
}

impl EncoderKind {
    pub fn distribution(
        self,
        m: &TransitionMatrix,
        gap: usize,
        x: Source,
        u: UContext,
    ) -> Result<EncoderDistribution> {
        match self {
            EncoderKind::Scheme => encoder(m, gap, x, u),
            EncoderKind::AlwaysSingleton => Ok(EncoderDistribution::delta(QuerySymbol::singleton(x))),
        }
    }
}

/// Exact joint distribution of (X_0..X_{t+1}, Q_0..Q_t), sparse over
/// positive-mass cells.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub horizon: usize,
    pub pattern: PrivacyPattern,
    /// (request trajectory of length t+2, query trajectory of length t+1) -> probability.
    pub entries: HashMap<(Vec<Source>, Vec<QuerySymbol>), Rat>,
    pub initial: [Rat; 2],
}

/// Result of the exact privacy check at one time.
#[derive(Debug, Clone)]
pub struct PrivacyReport {
    pub t: usize,
    /// True iff every cell satisfies p(x_B, q) = p(x_B) p(q) exactly.
    pub factorizes: bool,
    /// Largest |p(x_B, q) - p(x_B) p(q)| over all cells, exact.
    pub max_abs_gap: Rat,
    /// Plug-in I(X_B; Q) in bits; reporting only, never used for pass/fail.
    pub mi_bits: f64,
}

/// Builds the exact joint law of requests and queries for the given encoder
/// by multiplying chain transition probabilities and encoder weights along
/// every positive-probability trajectory.
pub fn build_joint_with(
    m: &TransitionMatrix,
    pattern: &PrivacyPattern,
    initial: &[Rat; 2],
    t: usize,
    kind: EncoderKind,
) -> Result<JointTable> {
    if t > MAX_HORIZON {
        return Err(Error::HorizonTooLarge(t));
    }
    let len = t + 2;
    let mut entries: HashMap<(Vec<Source>, Vec<QuerySymbol>), Rat> = HashMap::new();
    for bits in 0..(1usize << len) {
        let xs: Vec<Source> = (0..len).map(|i| Source::from_index((bits >> i) & 1)).collect();
        let mut chain_p = initial[xs[0].index()].clone();
        for w in xs.windows(2) {
            chain_p *= m.prob(w[0], w[1]);
        }
        if chain_p.is_zero() {
            continue;
        }
        // per-step encoder distributions for this request trajectory
        let mut dists = Vec::with_capacity(t + 1);
        let mut ok = true;
        for i in 0..=t {
            let gap = pattern.gap(i);
            let u = UContext::new(xs[pattern.last_on(i)], xs[i + 1]);
            match kind.distribution(m, gap, xs[i], u) {
                Ok(d) => dists.push(d),
                Err(e @ Error::DegenerateContext { .. }) => return Err(e),
                // positive-probability trajectories never hit impossible
                // contexts
                Err(e) => {
                    debug_assert!(false, "unexpected encoder error {e} on positive trajectory");
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        // expand over query choices with positive weight
        let mut partial: Vec<(Vec<QuerySymbol>, Rat)> = vec![(Vec::new(), chain_p)];
        for d in &dists {
            let mut next = Vec::with_capacity(partial.len() * 2);
            for (qs, p) in &partial {
                for q in QuerySymbol::ALL {
                    let w = d.prob(q);
                    if w.is_zero() {
                        continue;
                    }
                    let mut qs2 = qs.clone();
                    qs2.push(q);
                    next.push((qs2, p * w));
                }
            }
            partial = next;
        }
        for (qs, p) in partial {
            *entries.entry((xs.clone(), qs)).or_insert_with(zero) += &p;
        }
    }
    Ok(JointTable {
        horizon: t,
        pattern: pattern.clone(),
        entries,
        initial: initial.clone(),
    })
}

/// Joint table for the privacy-preserving scheme encoder.
pub fn build_joint(
    m: &TransitionMatrix,
    pattern: &PrivacyPattern,
    initial: &[Rat; 2],
    t: usize,
) -> Result<JointTable> {
    build_joint_with(m, pattern, initial, t, EncoderKind::Scheme)
}

/// Uniform distribution of X_0.
pub fn uniform_initial() -> [Rat; 2] {
    [crate::rational::rat(1, 2), crate::rational::rat(1, 2)]
}

/// True iff every positive-mass cell has x_i contained in q_i for all i.
pub fn check_decodability(j: &JointTable) -> bool {
    j.entries.iter().all(|((xs, qs), p)| {
        p.is_zero() || qs.iter().enumerate().all(|(i, q)| q.contains(xs[i]))
    })
}

/// Indices of the truncated privacy set: ON times through t, plus t+1.
fn privacy_indices(pattern: &PrivacyPattern, t: usize) -> Vec<usize> {
    let mut idx = pattern.on_times_through(t);
    idx.push(t + 1);
    idx
}

/// Exact privacy check: p(x_B, q) must equal p(x_B) p(q) for every cell of
/// the product support.
pub fn check_privacy(j: &JointTable, t: usize) -> PrivacyReport {
    assert_eq!(j.horizon, t, "joint horizon must match t");
    let idx = privacy_indices(&j.pattern, t);
    let mut joint: HashMap<(Vec<Source>, Vec<QuerySymbol>), Rat> = HashMap::new();
    let mut px: HashMap<Vec<Source>, Rat> = HashMap::new();
    let mut pq: HashMap<Vec<QuerySymbol>, Rat> = HashMap::new();
    for ((xs, qs), p) in &j.entries {
        if p.is_zero() {
            continue;
        }
        let xb: Vec<Source> = idx.iter().map(|&i| xs[i]).collect();
        *joint.entry((xb.clone(), qs.clone())).or_insert_with(zero) += p;
        *px.entry(xb).or_insert_with(zero) += p;
        *pq.entry(qs.clone()).or_insert_with(zero) += p;
    }
    let mut max_abs_gap = zero();
    let mut mi_bits = 0.0f64;
    for (xb, pa) in &px {
        for (qs, pb) in &pq {
            let pj = joint
                .get(&(xb.clone(), qs.clone()))
                .cloned()
                .unwrap_or_else(zero);
            let gap = (&pj - pa * pb).abs();
            if gap > max_abs_gap {
                max_abs_gap = gap;
            }
            if !pj.is_zero() {
                let ratio = &pj / (pa * pb);
                mi_bits += to_f64(&pj) * to_f64(&ratio).log2();
            }
        }
    }
    PrivacyReport {
        t,
        factorizes: max_abs_gap.is_zero(),
        max_abs_gap,
        mi_bits,
    }
}

/// Plug-in mutual information in bits from an exact joint over two keys.
/// Exactly 0.0 when the distribution factorizes, because each ratio is then
/// the exact rational 1.
fn mi_bits_of<K1, K2>(joint: &HashMap<(K1, K2), Rat>) -> f64
where
    K1: Clone + std::hash::Hash + Eq,
    K2: Clone + std::hash::Hash + Eq,
{
    let mut pa: HashMap<K1, Rat> = HashMap::new();
    let mut pb: HashMap<K2, Rat> = HashMap::new();
    for ((a, b), p) in joint {
        *pa.entry(a.clone()).or_insert_with(zero) += p;
        *pb.entry(b.clone()).or_insert_with(zero) += p;
    }
    let mut mi = 0.0;
    for ((a, b), p) in joint {
        if p.is_zero() {
            continue;
        }
        let ratio = p / (&pa[a] * &pb[b]);
        mi += to_f64(p) * to_f64(&ratio).log2();
    }
    mi
}

/// The three residual terms of the privacy induction, computed from the
/// exact joint at horizon t:
///
/// - I1 = I(X_B; Q_0..Q_{t-1})
/// - I2 = I(U_t; Q_0..Q_{t-1})
/// - I3 = I(X_B \ U_t; Q_t | U_t, Q_0..Q_{t-1})
///
/// All three are exactly 0 for tables built from the scheme encoder.
pub fn proposition1_terms_from(j: &JointTable, t: usize) -> (f64, f64, f64) {
    assert!(t >= 1, "induction terms need t >= 1");
    assert_eq!(j.horizon, t);
    let idx_b = privacy_indices(&j.pattern, t);
    let f_minus = j.pattern.last_on(t);
    let idx_u = [f_minus, t + 1];
    let idx_rest: Vec<usize> = idx_b.iter().copied().filter(|i| !idx_u.contains(i)).collect();

    let mut j1: HashMap<(Vec<Source>, Vec<QuerySymbol>), Rat> = HashMap::new();
    let mut j2: HashMap<((Source, Source), Vec<QuerySymbol>), Rat> = HashMap::new();
    // I3 grouped by the conditioning pair (U_t, Q_{[t-1]})
    let mut j3: HashMap<((Source, Source), Vec<QuerySymbol>), HashMap<(Vec<Source>, QuerySymbol), Rat>> =
        HashMap::new();
    for ((xs, qs), p) in &j.entries {
        if p.is_zero() {
            continue;
        }
        let q_past: Vec<QuerySymbol> = qs[..t].to_vec();
        let xb: Vec<Source> = idx_b.iter().map(|&i| xs[i]).collect();
        let u = (xs[f_minus], xs[t + 1]);
        let rest: Vec<Source> = idx_rest.iter().map(|&i| xs[i]).collect();
        *j1.entry((xb, q_past.clone())).or_insert_with(zero) += p;
        *j2.entry((u, q_past.clone())).or_insert_with(zero) += p;
        *j3.entry((u, q_past))
            .or_default()
            .entry((rest, qs[t]))
            .or_insert_with(zero) += p;
    }
    let i1 = mi_bits_of(&j1);
    let i2 = mi_bits_of(&j2);
    // conditional MI: sum over conditioning cells of p(c) * MI within the cell
    let mut i3 = 0.0;
    for cell in j3.values() {
        let pc: Rat = cell.values().cloned().sum();
        let conditional: HashMap<(Vec<Source>, QuerySymbol), Rat> = cell
            .iter()
            .map(|(k, p)| (k.clone(), p / &pc))
            .collect();
        i3 += to_f64(&pc) * mi_bits_of(&conditional);
    }
    (i1, i2, i3)
}

/// Convenience wrapper that builds the scheme joint with a uniform initial
/// distribution first.
pub fn proposition1_terms(
    m: &TransitionMatrix,
    pattern: &PrivacyPattern,
    t: usize,
) -> Result<(f64, f64, f64)> {
    let j = build_joint(m, pattern, &uniform_initial(), t)?;
    Ok(proposition1_terms_from(&j, t))
}

/// Exact E[|Q_t|] from the joint; must equal the closed-form optimal inverse
/// rate at the gap of t.
pub fn expected_cost(j: &JointTable, t: usize) -> Rat {
    assert!(t <= j.horizon);
    let mut cost = zero();
    for ((_, qs), p) in &j.entries {
        cost += p * Rat::from_integer((qs[t].len() as i64).into());
    }
    cost
}

/// Marginal law of the request trajectory recovered from the joint, for the
/// marginal-consistency check.
pub fn request_marginal(j: &JointTable) -> HashMap<Vec<Source>, Rat> {
    let mut out: HashMap<Vec<Source>, Rat> = HashMap::new();
    for ((xs, _), p) in &j.entries {
        *out.entry(xs.clone()).or_insert_with(zero) += p;
    }
    out.retain(|_, p| !p.is_zero());
    out
}

/// One row of a verification sweep, ready for CSV.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub matrix: String,
    pub pattern: String,
    pub t: usize,
    pub gap: usize,
    pub expected_cost: Rat,
    pub theorem_cost: Rat,
    pub decodable: bool,
    pub factorizes: bool,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

impl VerifyRow {
    /// All exact checks hold: decodable, private, and cost meets the theorem
    /// value with equality.
    pub fn passed(&self) -> bool {
        self.decodable
            && self.factorizes
            && self.expected_cost == self.theorem_cost
            && self.i1 == 0.0
            && self.i2 == 0.0
            && self.i3 == 0.0
    }
}

/// Runs every check for one (matrix, pattern, t) cell from a single joint.
pub fn verify_cell(
    m: &TransitionMatrix,
    pattern: &PrivacyPattern,
    initial: &[Rat; 2],
    t: usize,
) -> Result<VerifyRow> {
    let j = build_joint(m, pattern, initial, t)?;
    let gap = pattern.gap(t);
    let report = check_privacy(&j, t);
    let (i1, i2, i3) = if t >= 1 {
        proposition1_terms_from(&j, t)
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(VerifyRow {
        matrix: m.to_string(),
        pattern: pattern.to_string(),
        t,
        gap,
        expected_cost: expected_cost(&j, t),
        theorem_cost: crate::scheme::optimal_inverse_rate(m, gap)?,
        decodable: check_decodability(&j),
        factorizes: report.factorizes,
        i1,
        i2,
        i3,
    })
}
