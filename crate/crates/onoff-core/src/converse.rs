//! The matching lower bound on the download cost.
//!
//! Decodability plus the relaxed privacy constraint p(q|u) = p(q) pin the
//! feasible joints p(u, x, q) down to a two-parameter family (z1, z2) with
//! cost 2 - z1 - z2 over the box 0 <= z1 <= pi(A), 0 <= z2 <= pi(B). The LP
//! is solved in closed form; a grid brute force over the box is kept as an
//! independent oracle.

use num_traits::{Signed, Zero};

use crate::markov::{bridge, Source, TransitionMatrix, UContext};
use crate::rational::{rat, to_f64, zero, Rat};
use crate::scheme::{pi_floor, QuerySymbol};
use crate::{Error, Result};

/// The parameterized feasible joint of the converse argument.
#[derive(Debug, Clone)]
pub struct ConverseInstance {
    /// p(u) for the four contexts, from a uniform last-ON request and the
    /// (gap+1)-step transition law.
    pub context_prior: [Rat; 4],
    /// p(x | u), rows in `UContext::ALL` order.
    pub bridge_table: [[Rat; 2]; 4],
    pub z1: Rat,
    pub z2: Rat,
}

/// 4x2x3 joint grid p(u, x, q), rows/cols in `UContext::ALL`, `Source::ALL`,
/// `QuerySymbol::ALL` order.
pub type JointGrid = [[[Rat; 3]; 2]; 4];

fn context_prior(m: &TransitionMatrix, gap: usize) -> [Rat; 4] {
    // X at the last ON time taken uniform; p(u) = p(last) * p^(gap+1)(next|last)
    let m_gap1 = m.power(gap + 1);
    let mut prior = [zero(), zero(), zero(), zero()];
    for (i, u) in UContext::ALL.iter().enumerate() {
        prior[i] = rat(1, 2) * &m_gap1[u.last_on.index()][u.next.index()];
    }
    prior
}

/// Builds the feasible joint for a given (z1, z2): singleton mass z per
/// context, remainder on the double download.
pub fn feasible_table(m: &TransitionMatrix, gap: usize, z1: &Rat, z2: &Rat) -> Result<JointGrid> {
    let pf = pi_floor(m, gap)?;
    let in_box = |z: &Rat, cap: &Rat| !z.is_negative() && z <= cap;
    if !in_box(z1, pf.pi(Source::A)) || !in_box(z2, pf.pi(Source::B)) {
        return Err(Error::Infeasible);
    }
    let prior = context_prior(m, gap);
    let mut grid: JointGrid =
        std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| zero())));
    for (i, u) in UContext::ALL.iter().enumerate() {
        let bd = bridge(m, gap, *u)?;
        for x in Source::ALL {
            let z = if x == Source::A { z1 } else { z2 };
            let singleton = QuerySymbol::singleton(x);
            let p_xu = bd.prob(x);
            grid[i][x.index()][singleton.index()] = &prior[i] * z;
            grid[i][x.index()][QuerySymbol::AB.index()] = &prior[i] * (p_xu - z);
            // complement singleton stays zero (decodability)
        }
    }
    Ok(grid)
}

/// Closed-form solution of the box LP: both parameters sit at their caps.
/// Returns (z1*, z2*, minimal expected download).
pub fn lp_minimize(m: &TransitionMatrix, gap: usize) -> Result<(Rat, Rat, Rat)> {
    let pf = pi_floor(m, gap)?;
    let optimum = rat(2, 1) - pf.sum();
    Ok((pf.pi(Source::A).clone(), pf.pi(Source::B).clone(), optimum))
}

/// Independent oracle: minimum of 2 - z1 - z2 over a grid_n x grid_n grid of
/// the feasibility box with endpoints pinned to the corners. Equals the LP
/// optimum exactly whenever the far corner is on the grid; never undercuts it.
pub fn brute_force_min(m: &TransitionMatrix, gap: usize, grid_n: usize) -> Result<f64> {
    Ok(to_f64(&brute_force_min_exact(m, gap, grid_n)?))
}

/// Same search, exact result for equality assertions.
pub fn brute_force_min_exact(m: &TransitionMatrix, gap: usize, grid_n: usize) -> Result<Rat> {
    assert!(grid_n >= 2);
    let pf = pi_floor(m, gap)?;
    let steps = |cap: &Rat| -> Vec<Rat> {
        (0..grid_n)
            .map(|i| cap * rat(i as i64, (grid_n - 1) as i64))
            .collect()
    };
    let mut best: Option<Rat> = None;
    for z1 in steps(pf.pi(Source::A)) {
        for z2 in steps(pf.pi(Source::B)) {
            if feasible_table(m, gap, &z1, &z2).is_err() {
                continue;
            }
            let cost = rat(2, 1) - &z1 - &z2;
            if best.as_ref().map_or(true, |b| cost < *b) {
                best = Some(cost);
            }
        }
    }
    Ok(best.expect("z = 0 is always feasible"))
}

/// Structural checks every feasible table must pass: nonnegativity,
/// normalization, decodability zero-pattern and p(q|u) constant in u.
pub fn table_is_valid(grid: &JointGrid, prior: &[Rat; 4]) -> bool {
    let total: Rat = grid.iter().flatten().flatten().cloned().sum();
    if total != rat(1, 1) {
        return false;
    }
    if grid.iter().flatten().flatten().any(|p| p.is_negative()) {
        return false;
    }
    for row in grid {
        for x in Source::ALL {
            if !row[x.index()][QuerySymbol::singleton(x.complement()).index()].is_zero() {
                return false;
            }
        }
    }
    // p(q|u) identical across contexts with positive prior
    let mut reference: Option<[Rat; 3]> = None;
    for (i, p_u) in prior.iter().enumerate() {
        if p_u.is_zero() {
            continue;
        }
        let mut cond = [zero(), zero(), zero()];
        for q in QuerySymbol::ALL {
            cond[q.index()] =
                (&grid[i][0][q.index()] + &grid[i][1][q.index()]) / p_u;
        }
        match &reference {
            None => reference = Some(cond),
            Some(r) => {
                if *r != cond {
                    return false;
                }
            }
        }
    }
    true
}

/// Prior used by [`feasible_table`]; exposed so validity checks can share it.
pub fn prior_for(m: &TransitionMatrix, gap: usize) -> [Rat; 4] {
    context_prior(m, gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{optimal_inverse_rate, query_marginal};

    fn example1() -> TransitionMatrix {
        TransitionMatrix::parse("alpha=1/4").unwrap()
    }

    #[test]
    fn all_mass_on_double_download_at_origin() {
        let grid = feasible_table(&example1(), 1, &zero(), &zero()).unwrap();
        for row in &grid {
            for x in 0..2 {
                assert!(grid_singletons_zero(&row[x]));
            }
        }
        fn grid_singletons_zero(cell: &[Rat; 3]) -> bool {
            cell[0].is_zero() && cell[1].is_zero()
        }
    }

    #[test]
    fn scheme_point_reproduces_query_marginal() {
        let grid = feasible_table(&example1(), 1, &rat(1, 10), &rat(1, 10)).unwrap();
        let mut marg = [zero(), zero(), zero()];
        for row in &grid {
            for cell in row {
                for q in 0..3 {
                    marg[q] += &cell[q];
                }
            }
        }
        assert_eq!(marg, query_marginal(&example1(), 1).unwrap());
        assert_eq!(marg, [rat(1, 10), rat(1, 10), rat(8, 10)]);
    }

    #[test]
    fn infeasible_beyond_pi() {
        let r = feasible_table(&example1(), 1, &rat(1, 5), &zero());
        assert!(matches!(r, Err(Error::Infeasible)));
    }

    #[test]
    fn feasible_tables_are_structurally_valid() {
        for m in [example1(), TransitionMatrix::parse("1/2 1/2 1/4 3/4").unwrap()] {
            for gap in 0..=3 {
                let (z1, z2, _) = lp_minimize(&m, gap).unwrap();
                for (a, b) in [(zero(), zero()), (z1.clone(), z2.clone()), (z1.clone(), zero())] {
                    let grid = feasible_table(&m, gap, &a, &b).unwrap();
                    assert!(table_is_valid(&grid, &prior_for(&m, gap)), "gap {gap}");
                }
            }
        }
    }

    #[test]
    fn lp_examples() {
        assert_eq!(
            lp_minimize(&example1(), 1).unwrap(),
            (rat(1, 10), rat(1, 10), rat(9, 5))
        );
        assert_eq!(lp_minimize(&example1(), 0).unwrap(), (zero(), zero(), rat(2, 1)));
        let asym = TransitionMatrix::parse("1/2 1/2 1/4 3/4").unwrap();
        assert_eq!(
            lp_minimize(&asym, 1).unwrap(),
            (rat(2, 11), rat(1, 3), rat(49, 33))
        );
    }

    #[test]
    fn achievability_meets_converse() {
        for m in [
            example1(),
            TransitionMatrix::parse("alpha=1/10").unwrap(),
            TransitionMatrix::parse("1/2 1/2 1/4 3/4").unwrap(),
        ] {
            for gap in 0..=4 {
                let (_, _, optimum) = lp_minimize(&m, gap).unwrap();
                assert_eq!(optimum, optimal_inverse_rate(&m, gap).unwrap());
            }
        }
    }

    #[test]
    fn brute_force_corner_pinned_equals_optimum() {
        assert_eq!(brute_force_min_exact(&example1(), 1, 101).unwrap(), rat(9, 5));
        assert_eq!(brute_force_min_exact(&example1(), 1, 2).unwrap(), rat(9, 5));
        let half = TransitionMatrix::parse("alpha=1/2").unwrap();
        assert_eq!(brute_force_min_exact(&half, 1, 11).unwrap(), rat(1, 1));
    }

    #[test]
    fn brute_force_never_undercuts() {
        for m in [example1(), TransitionMatrix::parse("1/2 1/2 1/4 3/4").unwrap()] {
            for gap in 0..=3 {
                let (_, _, optimum) = lp_minimize(&m, gap).unwrap();
                for n in [2, 3, 7, 10] {
                    let bf = brute_force_min_exact(&m, gap, n).unwrap();
                    assert!(bf >= optimum);
                }
            }
        }
    }
}
