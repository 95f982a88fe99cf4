//! Exact feasibility at a fully-fixed activation pattern.
//!
//! With every ReLU phase fixed, the network collapses to one affine map, so
//! a leaf is the linear system
//!
//! * input box constraints,
//! * one sign constraint per hidden ReLU neuron (pre-activation >= 0 for
//!   active, <= 0 for inactive), with pre-activations expressed as affine
//!   functions of the inputs under the pattern so far,
//! * the misclassification disjunct `y_j - y_c >= 0`, iterated over `j`.
//!
//! Everything is decided in exact rational arithmetic. When a disjunct is
//! feasible, the returned point maximizes the margin `y_j - y_c`, which
//! keeps the rounded float witness robustly on the satisfying side.

use super::simplex::{rat, solve, Lp, LpOutcome, Rat};
use crate::nn::{Activation, InputBox, Network, OutputProperty};
use num_traits::Zero;

/// Affine map `A x + c` over the rationals, rows stored densely.
struct RatAffine {
    rows: Vec<Vec<Rat>>,
    consts: Vec<Rat>,
}

impl RatAffine {
    fn identity(n: usize) -> Self {
        let mut rows = vec![vec![Rat::zero(); n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = rat(1.0);
        }
        RatAffine {
            rows,
            consts: vec![Rat::zero(); n],
        }
    }
}

/// Sign-oriented linear constraint `coeffs . x + constant (>= | <=) 0`,
/// normalized to `row . x <= rhs` for the solver.
fn to_leq(coeffs: &[Rat], constant: &Rat, geq: bool) -> (Vec<Rat>, Rat) {
    if geq {
        (
            coeffs.iter().map(|v| -v.clone()).collect(),
            constant.clone(),
        )
    } else {
        (coeffs.to_vec(), -constant.clone())
    }
}

/// The constraint system of one leaf, before choosing a disjunct.
struct LeafSystem {
    sign_rows: Vec<(Vec<Rat>, Rat)>,
    /// Output affine map under the pattern.
    out_rows: Vec<Vec<Rat>>,
    out_consts: Vec<Rat>,
    lower: Vec<Rat>,
    upper: Vec<Rat>,
}

fn build_system(net: &Network, input: &InputBox, pattern: &[Vec<bool>]) -> LeafSystem {
    let n = net.input_dim();
    let mut current = RatAffine::identity(n);
    let mut sign_rows = Vec::new();

    for (layer, choices) in net.layers().iter().zip(pattern) {
        let w = layer.weights();
        let mut pre_rows = Vec::with_capacity(layer.out_dim());
        let mut pre_consts = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut row = vec![Rat::zero(); n];
            let mut cst = rat(layer.biases()[r]);
            for (c, weight) in w.row(r).iter().enumerate() {
                if *weight == 0.0 {
                    continue;
                }
                let wr = rat(*weight);
                for (dst, src) in row.iter_mut().zip(&current.rows[c]) {
                    if !src.is_zero() {
                        *dst += &wr * src;
                    }
                }
                cst += &wr * &current.consts[c];
            }
            pre_rows.push(row);
            pre_consts.push(cst);
        }

        match layer.activation() {
            Activation::Identity => {
                debug_assert!(choices.is_empty(), "pattern entry for identity layer");
                current = RatAffine {
                    rows: pre_rows,
                    consts: pre_consts,
                };
            }
            Activation::Relu => {
                debug_assert_eq!(choices.len(), layer.out_dim(), "pattern width");
                let mut post_rows = Vec::with_capacity(layer.out_dim());
                let mut post_consts = Vec::with_capacity(layer.out_dim());
                for (i, active) in choices.iter().enumerate() {
                    // Sign constraint: pre >= 0 when active, pre <= 0 when not.
                    sign_rows.push(to_leq(&pre_rows[i], &pre_consts[i], *active));
                    if *active {
                        post_rows.push(pre_rows[i].clone());
                        post_consts.push(pre_consts[i].clone());
                    } else {
                        post_rows.push(vec![Rat::zero(); n]);
                        post_consts.push(Rat::zero());
                    }
                }
                current = RatAffine {
                    rows: post_rows,
                    consts: post_consts,
                };
            }
        }
    }

    LeafSystem {
        sign_rows,
        out_rows: current.rows,
        out_consts: current.consts,
        lower: input.lower().iter().map(|v| rat(*v)).collect(),
        upper: input.upper().iter().map(|v| rat(*v)).collect(),
    }
}

/// Decides leaf feasibility exactly; on success returns the rational point
/// maximizing the satisfied disjunct's margin.
pub(crate) fn leaf_feasible_exact(
    net: &Network,
    input: &InputBox,
    pattern: &[Vec<bool>],
    property: &OutputProperty,
) -> Option<Vec<Rat>> {
    assert_eq!(pattern.len(), net.layers().len(), "pattern layer count");
    assert_eq!(input.dim(), net.input_dim());
    let n = net.input_dim();
    let system = build_system(net, input, pattern);
    let upper: Vec<Option<Rat>> = system.upper.iter().cloned().map(Some).collect();

    // Fast path: if the pattern region itself is empty, no disjunct helps.
    let base = Lp {
        objective: vec![Rat::zero(); n],
        rows: system.sign_rows.clone(),
        lower: system.lower.clone(),
        upper: upper.clone(),
    };
    if solve(&base) == LpOutcome::Infeasible {
        return None;
    }

    let c = property.true_class();
    for j in 0..property.num_classes() {
        if j == c {
            continue;
        }
        // Margin d(x) = y_j - y_c; require d >= 0 and maximize it.
        let margin_row: Vec<Rat> = system.out_rows[j]
            .iter()
            .zip(&system.out_rows[c])
            .map(|(a, b)| a - b)
            .collect();
        let margin_const = &system.out_consts[j] - &system.out_consts[c];

        let mut rows = system.sign_rows.clone();
        rows.push(to_leq(&margin_row, &margin_const, true));
        let lp = Lp {
            objective: margin_row,
            rows,
            lower: system.lower.clone(),
            upper: upper.clone(),
        };
        if let LpOutcome::Optimal { point, value } = solve(&lp) {
            debug_assert!(
                (&value + &margin_const) >= Rat::zero(),
                "optimal margin must be nonnegative under the margin constraint"
            );
            return Some(point);
        }
    }
    None
}

/// Round a rational point to `f64`, clamped into the box (the conversion may
/// drift by an ulp, and box bounds are exactly representable).
pub(crate) fn round_into_box(point: &[Rat], input: &InputBox) -> Vec<f64> {
    use num_traits::ToPrimitive;
    point
        .iter()
        .zip(input.lower().iter().zip(input.upper()))
        .map(|(v, (lo, up))| v.to_f64().unwrap_or(0.0).clamp(*lo, *up))
        .collect()
}

/// Public leaf decision: feasibility of the fully-fixed pattern plus
/// misclassification disjunction, in exact arithmetic. Returns a feasible
/// point converted to floating point.
pub fn leaf_feasible(
    net: &Network,
    input: &InputBox,
    pattern: &[Vec<bool>],
    property: &OutputProperty,
) -> Option<Vec<f64>> {
    leaf_feasible_exact(net, input, pattern, property)
        .map(|point| round_into_box(&point, input))
}
