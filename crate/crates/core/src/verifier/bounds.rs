//! Interval bound propagation with outward rounding slack.
//!
//! Bounds are propagated layer by layer in `f64`; after each affine layer
//! every interval is widened outward by [`ROUNDING_SLACK`] so accumulated
//! floating-point rounding cannot produce unsound bounds at desk scale. A
//! neuron counts as phase-fixed only if its slackened interval clears zero.

use crate::nn::{Activation, InputBox, Network, NetworkError};

/// Outward widening applied to both ends of every pre-activation interval,
/// once per affine layer.
pub const ROUNDING_SLACK: f64 = 1e-9;

/// ReLU phase implied by a neuron's pre-activation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Lower bound >= 0: the neuron is affine (identity) on the whole box.
    ActiveFixed,
    /// Upper bound <= 0: the neuron outputs 0 on the whole box.
    InactiveFixed,
    /// The interval straddles zero.
    Unstable,
}

/// Pre-activation bounds for one layer; `phases` is present for ReLU layers.
#[derive(Debug, Clone)]
pub struct LayerBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub phases: Option<Vec<Phase>>,
}

/// Sound per-neuron pre-activation bounds for every layer of a network over
/// an input box.
#[derive(Debug, Clone)]
pub struct NeuronBounds {
    pub layers: Vec<LayerBounds>,
}

impl NeuronBounds {
    /// Total number of Unstable ReLU neurons.
    pub fn unstable_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.phases.as_ref())
            .flatten()
            .filter(|p| **p == Phase::Unstable)
            .count()
    }
}

fn classify(lower: f64, upper: f64) -> Phase {
    if lower >= 0.0 {
        Phase::ActiveFixed
    } else if upper <= 0.0 {
        Phase::InactiveFixed
    } else {
        Phase::Unstable
    }
}

/// Plain interval propagation over the box, no phase assumptions.
pub fn interval_propagate(net: &Network, input: &InputBox) -> Result<NeuronBounds, NetworkError> {
    if input.dim() != net.input_dim() {
        return Err(NetworkError::InputLength {
            expected: net.input_dim(),
            found: input.dim(),
        });
    }
    let analysis = propagate_with_assignment(net, input, &Assignment::unconstrained(net));
    Ok(NeuronBounds {
        layers: analysis.layers,
    })
}

/// Branch-and-bound phase assignment: one slot per ReLU neuron in network
/// order (`Some(true)` = forced active, `Some(false)` = forced inactive).
#[derive(Debug, Clone)]
pub struct Assignment {
    pub slots: Vec<Option<bool>>,
}

impl Assignment {
    pub fn unconstrained(net: &Network) -> Self {
        Assignment {
            slots: vec![None; net.relu_count()],
        }
    }
}

/// Outcome of constrained propagation at one branch-and-bound node.
#[derive(Debug)]
pub struct NodeAnalysis {
    /// Pre-activation bounds per layer under the assignment.
    pub layers: Vec<LayerBounds>,
    /// An assigned phase contradicts its interval: the branch is empty.
    pub infeasible: bool,
    /// Every ReLU neuron is either assigned or phase-fixed by bounds.
    pub fully_fixed: bool,
    /// Full phase pattern (per layer; empty vectors for non-ReLU layers)
    /// when `fully_fixed`.
    pub pattern: Option<Vec<Vec<bool>>>,
    /// Widest Unstable unassigned neuron: (global ReLU index, width).
    pub branch_candidate: Option<(usize, f64)>,
    /// Post-activation bounds of the values feeding the output layer (the
    /// input box itself for single-layer networks); used by the
    /// misclassification pruning bound.
    pub penultimate_lower: Vec<f64>,
    pub penultimate_upper: Vec<f64>,
}

/// Interval propagation that honors forced ReLU phases.
///
/// Forcing a neuron inactive pins its post-activation to zero; forcing it
/// active intersects the pre-activation interval with `[0, inf)`. In both
/// cases the bounds stay sound for every input in the box that satisfies the
/// forced sign constraints, which is the region the enclosing branch
/// explores.
pub fn propagate_with_assignment(
    net: &Network,
    input: &InputBox,
    assignment: &Assignment,
) -> NodeAnalysis {
    debug_assert_eq!(input.dim(), net.input_dim());
    debug_assert_eq!(assignment.slots.len(), net.relu_count());

    let mut lo = input.lower().to_vec();
    let mut up = input.upper().to_vec();
    let mut layers = Vec::with_capacity(net.layers().len());
    let mut infeasible = false;
    let mut fully_fixed = true;
    let mut pattern: Vec<Vec<bool>> = Vec::with_capacity(net.layers().len());
    let mut branch_candidate: Option<(usize, f64)> = None;
    let mut relu_cursor = 0;
    let mut penultimate_lower = lo.clone();
    let mut penultimate_upper = up.clone();
    let last_index = net.layers().len() - 1;

    for (layer_index, layer) in net.layers().iter().enumerate() {
        if layer_index == last_index {
            penultimate_lower = lo.clone();
            penultimate_upper = up.clone();
        }
        let w = layer.weights();
        let mut pre_lo = Vec::with_capacity(layer.out_dim());
        let mut pre_up = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut acc_lo = layer.biases()[r];
            let mut acc_up = acc_lo;
            for (c, weight) in w.row(r).iter().enumerate() {
                if *weight >= 0.0 {
                    acc_lo += weight * lo[c];
                    acc_up += weight * up[c];
                } else {
                    acc_lo += weight * up[c];
                    acc_up += weight * lo[c];
                }
            }
            pre_lo.push(acc_lo - ROUNDING_SLACK);
            pre_up.push(acc_up + ROUNDING_SLACK);
        }

        match layer.activation() {
            Activation::Identity => {
                layers.push(LayerBounds {
                    lower: pre_lo.clone(),
                    upper: pre_up.clone(),
                    phases: None,
                });
                pattern.push(Vec::new());
                lo = pre_lo;
                up = pre_up;
            }
            Activation::Relu => {
                let mut phases = Vec::with_capacity(layer.out_dim());
                let mut post_lo = Vec::with_capacity(layer.out_dim());
                let mut post_up = Vec::with_capacity(layer.out_dim());
                let mut layer_pattern = Vec::with_capacity(layer.out_dim());
                for i in 0..layer.out_dim() {
                    let (l, u) = (pre_lo[i], pre_up[i]);
                    let phase = classify(l, u);
                    phases.push(phase);
                    let global = relu_cursor + i;
                    match assignment.slots[global] {
                        Some(true) => {
                            // Forced active: pre >= 0.
                            if u < 0.0 {
                                infeasible = true;
                            }
                            post_lo.push(l.max(0.0));
                            post_up.push(u.max(0.0));
                            layer_pattern.push(true);
                        }
                        Some(false) => {
                            // Forced inactive: pre <= 0.
                            if l > 0.0 {
                                infeasible = true;
                            }
                            post_lo.push(0.0);
                            post_up.push(0.0);
                            layer_pattern.push(false);
                        }
                        None => match phase {
                            Phase::ActiveFixed => {
                                post_lo.push(l);
                                post_up.push(u);
                                layer_pattern.push(true);
                            }
                            Phase::InactiveFixed => {
                                post_lo.push(0.0);
                                post_up.push(0.0);
                                layer_pattern.push(false);
                            }
                            Phase::Unstable => {
                                fully_fixed = false;
                                layer_pattern.push(true); // placeholder, unused
                                let width = u - l;
                                let better = match branch_candidate {
                                    None => true,
                                    Some((_, best)) => width > best,
                                };
                                if better {
                                    branch_candidate = Some((global, width));
                                }
                                post_lo.push(l.max(0.0));
                                post_up.push(u.max(0.0));
                            }
                        },
                    }
                }
                relu_cursor += layer.out_dim();
                layers.push(LayerBounds {
                    lower: pre_lo,
                    upper: pre_up,
                    phases: Some(phases),
                });
                pattern.push(layer_pattern);
                lo = post_lo;
                up = post_up;
            }
        }
    }

    NodeAnalysis {
        layers,
        infeasible,
        fully_fixed,
        pattern: if fully_fixed { Some(pattern) } else { None },
        branch_candidate,
        penultimate_lower,
        penultimate_upper,
    }
}
