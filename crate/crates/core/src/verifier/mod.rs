//! Complete decision procedure for box verification queries on small ReLU
//! networks.
//!
//! `verify` runs depth-first branch and bound over unstable ReLU phases:
//! interval bounds prune regions where the misclassification property is
//! unreachable, branching fixes one unstable neuron per step (widest
//! pre-activation interval first), and fully-fixed leaves are decided in
//! exact rational arithmetic by [`leaf_feasible`]. UNSAT answers are
//! therefore complete, not merely sound, whenever the search finishes within
//! budget; SAT answers always carry a validated witness.
//!
//! [`enumerate_oracle`] is the independent reference: it enumerates every
//! activation pattern outright and shares only the leaf decision procedure.

mod bounds;
mod leaf;
mod oracle;
pub(crate) mod simplex;

pub use bounds::{interval_propagate, LayerBounds, NeuronBounds, Phase, ROUNDING_SLACK};
pub use leaf::leaf_feasible;
pub use oracle::{enumerate_oracle, OracleCapExceeded, ORACLE_RELU_CAP};

use crate::nn::{Activation, Network, NetworkError};
use crate::perturb::VerificationQuery;
use bounds::{propagate_with_assignment, Assignment, NodeAnalysis};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Why a verdict is UNKNOWN: which budget ran out, or a numeric corner where
/// a rationally-feasible witness could not be rounded to a valid float
/// witness (reported instead of a bogus SAT).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnknownReason {
    BranchBudget,
    TimeBudget,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Sat,
    Unsat,
    Unknown(UnknownReason),
}

impl Status {
    pub fn is_unknown(&self) -> bool {
        matches!(self, Status::Unknown(_))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifyStats {
    pub branches: u64,
    pub leaf_checks: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    /// Present iff `status == Sat`; always passes [`validate_witness`].
    pub witness: Option<Vec<f64>>,
    pub stats: VerifyStats,
}

#[derive(Debug, Error)]
#[error("budget values must be positive (got {seconds} s, {branches} branches)")]
pub struct BudgetError {
    pub seconds: f64,
    pub branches: u64,
}

/// Per-query resource budget. The branch cap is the deterministic limit;
/// the wall-clock cap is checked between branch expansions only, so a leaf
/// check always runs to completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    max_seconds: f64,
    max_branches: u64,
}

impl Budget {
    pub fn new(max_seconds: f64, max_branches: u64) -> Result<Self, BudgetError> {
        if max_seconds > 0.0 && max_branches > 0 {
            Ok(Budget {
                max_seconds,
                max_branches,
            })
        } else {
            Err(BudgetError {
                seconds: max_seconds,
                branches: max_branches,
            })
        }
    }

    pub fn max_seconds(&self) -> f64 {
        self.max_seconds
    }

    pub fn max_branches(&self) -> u64 {
        self.max_branches
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_seconds: 30.0,
            max_branches: 1_000_000,
        }
    }
}

/// True iff `witness` lies in the query box (closed intervals, zero
/// tolerance) and the network output at it satisfies the
/// misclassification property.
pub fn validate_witness(query: &VerificationQuery, witness: &[f64]) -> Result<bool, NetworkError> {
    if witness.len() != query.network.input_dim() {
        return Err(NetworkError::InputLength {
            expected: query.network.input_dim(),
            found: witness.len(),
        });
    }
    if !query.input_box.contains(witness) {
        return Ok(false);
    }
    let out = query.network.evaluate(witness)?;
    Ok(query.property.satisfied_by(&out))
}

/// Rounds an exact rational witness to floats and re-validates; on failure
/// nudges every coordinate toward the box center by up to 1e-7 and tries
/// once more. `None` means the caller must not report SAT from this point.
pub(crate) fn round_and_validate(
    query: &VerificationQuery,
    exact: &[simplex::Rat],
) -> Option<Vec<f64>> {
    let mut w = leaf::round_into_box(exact, &query.input_box);
    if matches!(validate_witness(query, &w), Ok(true)) {
        return Some(w);
    }
    let center = query.input_box.center();
    for (v, c) in w.iter_mut().zip(&center) {
        *v += (c - *v).clamp(-1e-7, 1e-7);
    }
    if matches!(validate_witness(query, &w), Ok(true)) {
        return Some(w);
    }
    None
}

/// Full phase pattern for the `mask`-th assignment of the network's ReLU
/// neurons, bit `i` giving the phase of the `i`-th ReLU neuron in network
/// order (1 = active). Non-ReLU layers get empty entries.
pub(crate) fn pattern_from_mask(net: &Network, mask: u64) -> Vec<Vec<bool>> {
    let mut cursor = 0;
    net.layers()
        .iter()
        .map(|layer| match layer.activation() {
            Activation::Identity => Vec::new(),
            Activation::Relu => {
                let v = (0..layer.out_dim())
                    .map(|i| mask >> (cursor + i) & 1 == 1)
                    .collect();
                cursor += layer.out_dim();
                v
            }
        })
        .collect()
}

/// Could the misclassification property hold anywhere in the region this
/// node covers? Uses interval bounds on the output differences
/// `y_j - y_c`; a negative upper bound for every `j` proves UNSAT here.
fn property_possible(net: &Network, analysis: &NodeAnalysis, true_class: usize) -> bool {
    let last = net.layers().last().expect("validated network");
    let w = last.weights();
    let (h_lo, h_up) = (&analysis.penultimate_lower, &analysis.penultimate_upper);
    for j in 0..last.out_dim() {
        if j == true_class {
            continue;
        }
        let mut upper = last.biases()[j] - last.biases()[true_class];
        for i in 0..w.cols() {
            let d = w.get(j, i) - w.get(true_class, i);
            upper += if d >= 0.0 { d * h_up[i] } else { d * h_lo[i] };
        }
        if upper + ROUNDING_SLACK >= 0.0 {
            return true;
        }
    }
    false
}

/// Decides a verification query within the given budget.
///
/// UNSAT means no point in the box satisfies the property; SAT returns a
/// validated witness; UNKNOWN means a budget was exhausted (or, in a
/// measure-zero numeric corner, that a rational witness resisted float
/// rounding).
pub fn verify(query: &VerificationQuery, budget: &Budget) -> Verdict {
    assert_eq!(
        query.network.input_dim(),
        query.input_box.dim(),
        "query box dimension"
    );
    assert_eq!(
        query.network.output_dim(),
        query.property.num_classes(),
        "query property arity"
    );

    let start = Instant::now();
    let mut stats = VerifyStats::default();
    let mut stack = vec![Assignment::unconstrained(&query.network)];
    let mut unroundable_sat = false;

    let finish = |status: Status, witness: Option<Vec<f64>>, mut stats: VerifyStats| {
        stats.wall = start.elapsed();
        Verdict {
            status,
            witness,
            stats,
        }
    };

    while let Some(assignment) = stack.pop() {
        if start.elapsed().as_secs_f64() > budget.max_seconds {
            return finish(Status::Unknown(UnknownReason::TimeBudget), None, stats);
        }
        if stats.branches >= budget.max_branches {
            return finish(Status::Unknown(UnknownReason::BranchBudget), None, stats);
        }
        stats.branches += 1;

        let analysis = propagate_with_assignment(&query.network, &query.input_box, &assignment);
        if analysis.infeasible {
            continue;
        }
        if !property_possible(&query.network, &analysis, query.property.true_class()) {
            continue;
        }
        if analysis.fully_fixed {
            stats.leaf_checks += 1;
            let pattern = analysis.pattern.expect("fully fixed node has a pattern");
            if let Some(exact) = leaf::leaf_feasible_exact(
                &query.network,
                &query.input_box,
                &pattern,
                &query.property,
            ) {
                match round_and_validate(query, &exact) {
                    Some(w) => return finish(Status::Sat, Some(w), stats),
                    None => unroundable_sat = true,
                }
            }
            continue;
        }

        let (neuron, _) = analysis
            .branch_candidate
            .expect("unfixed node has an unstable neuron");
        let mut inactive = assignment.clone();
        inactive.slots[neuron] = Some(false);
        let mut active = assignment;
        active.slots[neuron] = Some(true);
        stack.push(inactive);
        stack.push(active);
    }

    if unroundable_sat {
        finish(Status::Unknown(UnknownReason::Numeric), None, stats)
    } else {
        finish(Status::Unsat, None, stats)
    }
}

#[cfg(test)]
mod tests;
