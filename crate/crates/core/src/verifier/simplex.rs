//! Exact primal simplex over the rationals with box-bounded variables.
//!
//! Solves `maximize c.x subject to A x <= b, l <= x <= u` where every
//! coefficient is a `BigRational`. Variable bounds are handled implicitly
//! (nonbasic variables rest at a bound) rather than as rows, which keeps the
//! tableau at one row per constraint. Bland's rule is used throughout, so
//! the solver is deterministic and cannot cycle.
//!
//! Feasibility uses phase-one artificials: a row whose slack starts negative
//! gets an artificial column `-1` so the artificial starts positive, and
//! phase one maximizes minus their sum. All leaf decisions in the verifier
//! go through this module, so it must be exact; sizes stay small (tens of
//! rows), so dense tableaus are fine.

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat(x: f64) -> Rat {
    Rat::from_f64(x).expect("finite float")
}

/// `maximize objective . x` subject to `rows` (each `coeffs . x <= rhs`) and
/// `lower[j] <= x_j <= upper[j]` (`None` = unbounded above).
#[derive(Debug, Clone)]
pub struct Lp {
    pub objective: Vec<Rat>,
    pub rows: Vec<(Vec<Rat>, Rat)>,
    pub lower: Vec<Rat>,
    pub upper: Vec<Option<Rat>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Optimal { value: Rat, point: Vec<Rat> },
}

struct Tableau {
    /// Rows of the equation system `a . x = rhs` over all variables
    /// (structural, slack, artificial).
    a: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
    lower: Vec<Rat>,
    upper: Vec<Option<Rat>>,
    /// Nonbasic variables rest at lower (false) or upper (true).
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
}

impl Tableau {
    fn num_vars(&self) -> usize {
        self.lower.len()
    }

    fn bound_value(&self, j: usize) -> &Rat {
        if self.at_upper[j] {
            self.upper[j].as_ref().expect("nonbasic at finite upper")
        } else {
            &self.lower[j]
        }
    }

    /// Current values of the basic variables.
    fn basic_values(&self) -> Vec<Rat> {
        (0..self.basis.len())
            .map(|i| {
                let mut v = self.rhs[i].clone();
                for j in 0..self.num_vars() {
                    if !self.is_basic[j] && !self.a[i][j].is_zero() {
                        v -= &self.a[i][j] * self.bound_value(j);
                    }
                }
                v
            })
            .collect()
    }

    fn reduced_costs(&self, objective: &[Rat]) -> Vec<Rat> {
        let mut costs = objective.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if objective[b].is_zero() {
                continue;
            }
            for j in 0..self.num_vars() {
                if !self.is_basic[j] && !self.a[i][j].is_zero() {
                    let delta = &objective[b] * &self.a[i][j];
                    costs[j] -= delta;
                }
            }
        }
        costs
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let scale = self.a[row][col].clone();
        debug_assert!(!scale.is_zero());
        for v in &mut self.a[row] {
            *v /= &scale;
        }
        self.rhs[row] /= &scale;
        for i in 0..self.a.len() {
            if i == row || self.a[i][col].is_zero() {
                continue;
            }
            let factor = self.a[i][col].clone();
            for j in 0..self.num_vars() {
                if !self.a[row][j].is_zero() {
                    let delta = &factor * &self.a[row][j];
                    self.a[i][j] -= delta;
                }
            }
            let delta = &factor * &self.rhs[row];
            self.rhs[i] -= delta;
        }
    }

    /// Runs Bland-rule simplex for the given objective. Returns false if the
    /// problem is unbounded in that objective (cannot happen for the LPs the
    /// verifier builds; callers treat it as an internal error).
    fn optimize(&mut self, objective: &[Rat]) -> bool {
        loop {
            let values = self.basic_values();
            let costs = self.reduced_costs(objective);

            // Entering variable: Bland's rule over improving nonbasics.
            let mut entering = None;
            for j in 0..self.num_vars() {
                if self.is_basic[j] {
                    continue;
                }
                // Pinned variables cannot move.
                if let Some(u) = &self.upper[j] {
                    if *u == self.lower[j] {
                        continue;
                    }
                }
                let improving = if self.at_upper[j] {
                    costs[j].is_negative()
                } else {
                    costs[j].is_positive()
                };
                if improving {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return true; // optimal
            };

            // Entering moves by `delta >= 0` away from its bound; `sigma` is
            // the sign of the change of x_j.
            let sigma: i32 = if self.at_upper[j] { -1 } else { 1 };

            // Limit from the entering variable's own range.
            let mut best: Option<(Rat, Option<usize>)> = self.upper[j]
                .as_ref()
                .map(|u| (u - &self.lower[j], None));

            // Limits from basic variables hitting a bound.
            for (i, &b) in self.basis.iter().enumerate() {
                let g = if sigma > 0 {
                    self.a[i][j].clone()
                } else {
                    -self.a[i][j].clone()
                };
                if g.is_positive() {
                    let room = &values[i] - &self.lower[b];
                    let limit = room / &g;
                    if best.as_ref().map_or(true, |(d, _)| limit < *d) {
                        best = Some((limit, Some(i)));
                    } else if let Some((d, Some(r))) = &best {
                        if limit == *d && self.basis[i] < self.basis[*r] {
                            best = Some((limit, Some(i)));
                        }
                    }
                } else if g.is_negative() {
                    if let Some(u) = &self.upper[b] {
                        let room = u - &values[i];
                        let limit = room / -g;
                        if best.as_ref().map_or(true, |(d, _)| limit < *d) {
                            best = Some((limit, Some(i)));
                        } else if let Some((d, Some(r))) = &best {
                            if limit == *d && self.basis[i] < self.basis[*r] {
                                best = Some((limit, Some(i)));
                            }
                        }
                    }
                }
            }

            match best {
                None => return false, // unbounded
                Some((_, None)) => {
                    // Bound flip: the entering variable crosses to its other
                    // bound without a basis change.
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((delta, Some(row))) => {
                    let leaving = self.basis[row];
                    // The leaving variable lands on the bound it ran into.
                    let g = if sigma > 0 {
                        self.a[row][j].clone()
                    } else {
                        -self.a[row][j].clone()
                    };
                    self.at_upper[leaving] = g.is_negative();
                    self.is_basic[leaving] = false;

                    // Entering becomes basic; record its new value through
                    // the rhs by rewriting the bound it used to rest at.
                    let entering_value = if sigma > 0 {
                        &self.lower[j] + &delta
                    } else {
                        self.upper[j].as_ref().unwrap() - &delta
                    };
                    let _ = entering_value; // value is implied by the tableau
                    self.is_basic[j] = true;
                    self.basis[row] = j;
                    self.pivot(row, j);
                }
            }
        }
    }

    fn solution(&self) -> Vec<Rat> {
        let values = self.basic_values();
        let mut x = vec![Rat::zero(); self.num_vars()];
        for j in 0..self.num_vars() {
            if !self.is_basic[j] {
                x[j] = self.bound_value(j).clone();
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = values[i].clone();
        }
        x
    }
}

/// Solves the LP exactly. Panics only on malformed input (length
/// mismatches); unboundedness is reported as `None` by the caller contract
/// below and cannot occur for verifier-built programs.
pub fn solve(lp: &Lp) -> LpOutcome {
    let n = lp.objective.len();
    let m = lp.rows.len();
    assert_eq!(lp.lower.len(), n);
    assert_eq!(lp.upper.len(), n);

    // Layout: structural vars, then one slack per row, then artificials.
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    for _ in 0..m {
        lower.push(Rat::zero());
        upper.push(None);
    }

    let mut a: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (coeffs, b) in &lp.rows {
        assert_eq!(coeffs.len(), n);
        let mut row = vec![Rat::zero(); n + m];
        row[..n].clone_from_slice(coeffs);
        a.push(row);
        rhs.push(b.clone());
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[n + i] = Rat::one();
    }

    // Start: structural vars at lower bound, slacks basic.
    let mut tab = Tableau {
        a,
        rhs,
        basis: (n..n + m).collect(),
        lower,
        upper,
        at_upper: vec![false; n + m],
        is_basic: {
            let mut v = vec![false; n + m];
            for j in n..n + m {
                v[j] = true;
            }
            v
        },
    };

    // Phase one if any slack starts below zero.
    let start_values = tab.basic_values();
    let violated: Vec<usize> = start_values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_negative())
        .map(|(i, _)| i)
        .collect();
    if !violated.is_empty() {
        let art_base = tab.num_vars();
        for (k, &row) in violated.iter().enumerate() {
            for (i, r) in tab.a.iter_mut().enumerate() {
                r.push(if i == row { -Rat::one() } else { Rat::zero() });
            }
            tab.lower.push(Rat::zero());
            tab.upper.push(None);
            tab.at_upper.push(false);
            tab.is_basic.push(true);
            // Swap the artificial in for the slack of its row.
            let slack = tab.basis[row];
            tab.is_basic[slack] = false;
            tab.at_upper[slack] = false;
            tab.basis[row] = art_base + k;
            // Normalize the row so the artificial column is +1.
            let col = art_base + k;
            let rowvec = &mut tab.a[row];
            for v in rowvec.iter_mut() {
                *v = -v.clone();
            }
            tab.rhs[row] = -tab.rhs[row].clone();
            debug_assert!(rowvec[col].is_one());
        }
        let mut phase1 = vec![Rat::zero(); tab.num_vars()];
        for k in 0..violated.len() {
            phase1[art_base + k] = -Rat::one();
        }
        if !tab.optimize(&phase1) {
            unreachable!("phase-one objective is bounded above by zero");
        }
        let x = tab.solution();
        let infeasibility: Rat = (0..violated.len()).map(|k| x[art_base + k].clone()).sum();
        if !infeasibility.is_zero() {
            return LpOutcome::Infeasible;
        }
        // Pin artificials to zero for phase two.
        for k in 0..violated.len() {
            tab.upper[art_base + k] = Some(Rat::zero());
        }
    }

    let mut objective = vec![Rat::zero(); tab.num_vars()];
    objective[..n].clone_from_slice(&lp.objective);
    if !tab.optimize(&objective) {
        // The verifier only builds LPs whose objective is bounded over the
        // feasible set; reaching this indicates a malformed program.
        panic!("unbounded linear program");
    }
    let x = tab.solution();
    let value = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    LpOutcome::Optimal {
        value,
        point: x[..n].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: i64) -> Rat {
        Rat::from_i64(x).unwrap()
    }

    fn rq(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    #[test]
    fn maximizes_over_a_box() {
        // max x + 2y, x in [0,1], y in [0,2], x + y <= 2.
        let lp = Lp {
            objective: vec![r(1), r(2)],
            rows: vec![(vec![r(1), r(1)], r(2))],
            lower: vec![r(0), r(0)],
            upper: vec![Some(r(1)), Some(r(2))],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r(4));
                assert_eq!(point, vec![r(0), r(2)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // x <= -1 with x in [0, 1].
        let lp = Lp {
            objective: vec![r(0)],
            rows: vec![(vec![r(1)], r(-1))],
            lower: vec![r(0)],
            upper: vec![Some(r(1))],
        };
        assert_eq!(solve(&lp), LpOutcome::Infeasible);
    }

    #[test]
    fn phase_one_finds_interior_feasible_point() {
        // x + y >= 1 (i.e. -x - y <= -1) with x, y in [0, 1]; max x.
        let lp = Lp {
            objective: vec![r(1), r(0)],
            rows: vec![(vec![r(-1), r(-1)], r(-1))],
            lower: vec![r(0), r(0)],
            upper: vec![Some(r(1)), Some(r(1))],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r(1));
                assert_eq!(point[0], r(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_fractions_survive() {
        // max x subject to 3x <= 1: answer exactly 1/3.
        let lp = Lp {
            objective: vec![r(1)],
            rows: vec![(vec![r(3)], r(1))],
            lower: vec![r(0)],
            upper: vec![None],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, rq(1, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_like_rows_work() {
        // x + y <= 1 and -(x + y) <= -1 pin x + y = 1; max 2x + y.
        let lp = Lp {
            objective: vec![r(2), r(1)],
            rows: vec![
                (vec![r(1), r(1)], r(1)),
                (vec![r(-1), r(-1)], r(-1)),
            ],
            lower: vec![r(0), r(0)],
            upper: vec![Some(r(1)), Some(r(1))],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, r(2));
                assert_eq!(point, vec![r(1), r(0)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_slab_feasibility() {
        // Two opposing rows with no slack: x = 1/2 exactly, maximize -x.
        let lp = Lp {
            objective: vec![r(-1)],
            rows: vec![
                (vec![r(2)], r(1)),
                (vec![r(-2)], r(-1)),
            ],
            lower: vec![r(0)],
            upper: vec![Some(r(1))],
        };
        match solve(&lp) {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(point, vec![rq(1, 2)]);
                assert_eq!(value, rq(-1, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    /// Brute-force vertex oracle: for 2-var systems, enumerate intersections
    /// of all constraint/bound pairs and keep feasible ones.
    #[test]
    fn matches_vertex_enumeration_on_random_2d_instances() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let rows: Vec<(Vec<Rat>, Rat)> = (0..3)
                .map(|_| {
                    (
                        vec![r(rng.gen_range(-3..4)), r(rng.gen_range(-3..4))],
                        r(rng.gen_range(-2..5)),
                    )
                })
                .collect();
            let obj = vec![r(rng.gen_range(-3..4)), r(rng.gen_range(-3..4))];
            let lp = Lp {
                objective: obj.clone(),
                rows: rows.clone(),
                lower: vec![r(-2), r(-2)],
                upper: vec![Some(r(2)), Some(r(2))],
            };

            // Collect all candidate lines: 3 rows + 4 bounds.
            let mut lines: Vec<(Rat, Rat, Rat)> = rows
                .iter()
                .map(|(c, b)| (c[0].clone(), c[1].clone(), b.clone()))
                .collect();
            lines.push((r(1), r(0), r(2)));
            lines.push((r(-1), r(0), r(2)));
            lines.push((r(0), r(1), r(2)));
            lines.push((r(0), r(-1), r(2)));

            let feasible = |x: &Rat, y: &Rat| -> bool {
                if *x < r(-2) || *x > r(2) || *y < r(-2) || *y > r(2) {
                    return false;
                }
                rows.iter().all(|(c, b)| &(&c[0] * x) + &c[1] * y <= *b)
            };

            let mut best: Option<Rat> = None;
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a1, b1, c1) = &lines[i];
                    let (a2, b2, c2) = &lines[j];
                    let det = &(a1 * b2) - &(a2 * b1);
                    if det.is_zero() {
                        continue;
                    }
                    let x = &(&(c1 * b2) - &(c2 * b1)) / &det;
                    let y = &(&(a1 * c2) - &(a2 * c1)) / &det;
                    if feasible(&x, &y) {
                        let v = &(&obj[0] * &x) + &obj[1] * &y;
                        if best.as_ref().map_or(true, |b| v > *b) {
                            best = Some(v);
                        }
                    }
                }
            }

            match (solve(&lp), best) {
                (LpOutcome::Optimal { value, point }, Some(expect)) => {
                    assert_eq!(value, expect);
                    assert!(feasible(&point[0], &point[1]));
                }
                (LpOutcome::Infeasible, None) => {}
                (got, expect) => panic!("solver {got:?} vs oracle {expect:?}"),
            }
        }
    }
}
