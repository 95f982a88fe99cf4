//! Sampling-based counterexample search, run before full verification to
//! short-circuit obvious SAT cells.
//!
//! Evaluation order: box corners (capped, lowest-index dimensions varied
//! first), then the box center, then uniform random points. A found witness
//! lets the scheduler record SAT without a verifier call, but callers treat
//! it as an untrusted hint and re-validate it.

use crate::perturb::VerificationQuery;
use crate::verifier::validate_witness;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// At most `2^12` corners are enumerated; higher dimensions fall back to
/// random sampling. ReLU-network extrema tend to sit at box corners.
pub const CORNER_CAP_BITS: usize = 12;

#[derive(Debug, Clone)]
pub struct AttackReport {
    /// Number of points evaluated (until a hit, or all of them).
    pub tried: usize,
    /// A property-satisfying point inside the box, if one was found.
    pub found: Option<Vec<f64>>,
}

/// Evaluates up to `samples` points of the query box; returns the first one
/// satisfying the output property. Deterministic in `seed`.
pub fn sample_attack(query: &VerificationQuery, samples: usize, seed: u64) -> AttackReport {
    assert!(samples >= 1, "need at least one sample");
    let net = &query.network;
    let boxx = &query.input_box;
    let dim = boxx.dim();
    let mut tried = 0;

    let test = |point: Vec<f64>, tried: &mut usize| -> Option<Vec<f64>> {
        *tried += 1;
        let out = net.evaluate(&point).expect("query dimensions validated");
        if query.property.satisfied_by(&out) {
            Some(point)
        } else {
            None
        }
    };

    // Corners: vary the first `min(dim, 12)` dimensions through lo/up in
    // binary-counting order, remaining coordinates at the center.
    let corner_bits = dim.min(CORNER_CAP_BITS);
    let corner_count = 1usize << corner_bits;
    let center = boxx.center();
    let corner_budget = corner_count.min(samples.saturating_sub(1).max(1));
    for mask in 0..corner_budget {
        let point: Vec<f64> = (0..dim)
            .map(|i| {
                if i < corner_bits {
                    if mask >> i & 1 == 1 {
                        boxx.upper()[i]
                    } else {
                        boxx.lower()[i]
                    }
                } else {
                    center[i]
                }
            })
            .collect();
        if let Some(found) = test(point, &mut tried) {
            return AttackReport {
                tried,
                found: Some(found),
            };
        }
        if tried == samples {
            return AttackReport { tried, found: None };
        }
    }

    // Center.
    if let Some(found) = test(center.clone(), &mut tried) {
        return AttackReport {
            tried,
            found: Some(found),
        };
    }

    // Uniform random fill.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while tried < samples {
        let point: Vec<f64> = boxx
            .lower()
            .iter()
            .zip(boxx.upper())
            .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..=*u) })
            .collect();
        if let Some(found) = test(point, &mut tried) {
            return AttackReport {
                tried,
                found: Some(found),
            };
        }
    }
    AttackReport { tried, found: None }
}

/// `sample_attack` plus witness re-validation; the scheduler only trusts
/// attacks that pass [`validate_witness`].
pub fn validated_attack(query: &VerificationQuery, samples: usize, seed: u64) -> AttackReport {
    let mut report = sample_attack(query, samples, seed);
    if let Some(w) = &report.found {
        if !matches!(validate_witness(query, w), Ok(true)) {
            report.found = None;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Image;
    use crate::nn::{Activation, InputBox, Layer, Matrix, Network, OutputProperty};
    use crate::perturb::{self, PerturbationSpec, VerificationQuery};
    use crate::verifier::{verify, Budget, Status};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// y0 = x0, y1 = -x0: class 1 wins exactly when x0 <= 0.
    fn sign_net() -> Network {
        Network::new(
            1,
            vec![Layer::new(
                Matrix::from_rows(&[vec![1.0], vec![-1.0]]),
                vec![0.0, 0.0],
                Activation::Identity,
            )],
            None,
        )
        .unwrap()
    }

    #[test]
    fn center_hit_is_found_within_corner_cap_plus_one() {
        // A bump network: hidden = (ReLU(x), ReLU(-x)), y0 = h0 + h1 = |x|,
        // y1 = 0.5. At the corners x = +-1 the true class 0 wins (1 > 0.5);
        // at the center |0| = 0 < 0.5, so only the center satisfies the
        // misclassification property among the points tried first.
        let l1 = Layer::new(
            Matrix::from_rows(&[vec![1.0], vec![-1.0]]),
            vec![0.0, 0.0],
            Activation::Relu,
        );
        let l2 = Layer::new(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]),
            vec![0.0, 0.5],
            Activation::Identity,
        );
        let net = Network::new(1, vec![l1, l2], None).unwrap();
        let q = VerificationQuery::from_parts(
            net,
            InputBox::new(vec![-1.0], vec![1.0]).unwrap(),
            OutputProperty::misclassification(0, 2).unwrap(),
        );
        let report = sample_attack(&q, 64, 1);
        let found = report.found.expect("center satisfies the property");
        assert_eq!(found, vec![0.0]);
        assert!(report.tried <= (1 << CORNER_CAP_BITS) + 1);
        assert_eq!(report.tried, 3); // two corners, then the center
    }

    #[test]
    fn point_query_on_strict_anchor_finds_nothing() {
        let net = Network::new(
            2,
            vec![Layer::new(
                Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0]]),
                vec![0.0, 1.0],
                Activation::Identity,
            )],
            None,
        )
        .unwrap();
        let anchor = Image::new(2, 1, vec![0.8, 0.9]).unwrap();
        let spec = PerturbationSpec::noise(anchor, 0, 0.0).unwrap();
        let q = perturb::noise_query(&net, &spec).unwrap();
        for samples in [1, 8, 256] {
            let report = sample_attack(&q, samples, 9);
            assert!(report.found.is_none());
            assert!(report.tried <= samples);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let q = VerificationQuery::from_parts(
            sign_net(),
            InputBox::new(vec![-0.5], vec![1.0]).unwrap(),
            OutputProperty::misclassification(0, 2).unwrap(),
        );
        let a = sample_attack(&q, 32, 4242);
        let b = sample_attack(&q, 32, 4242);
        assert_eq!(a.tried, b.tried);
        assert_eq!(a.found, b.found);
    }

    #[test]
    fn found_witnesses_validate_and_imply_verifier_sat() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let budget = Budget::new(600.0, 1_000_000).unwrap();
        let mut found_count = 0;
        for trial in 0..50 {
            let input_dim = rng.gen_range(1..=3);
            let h = rng.gen_range(1..=4);
            let l1 = Layer::new(
                Matrix::new(
                    h,
                    input_dim,
                    (0..h * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                ),
                (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                Activation::Relu,
            );
            let l2 = Layer::new(
                Matrix::new(2, h, (0..2 * h).map(|_| rng.gen_range(-2.0..2.0)).collect()),
                vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                Activation::Identity,
            );
            let net = Network::new(input_dim, vec![l1, l2], None).unwrap();
            let lower: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.1..1.0)).collect();
            let q = VerificationQuery::from_parts(
                net,
                InputBox::new(lower, upper).unwrap(),
                OutputProperty::misclassification(0, 2).unwrap(),
            );
            let report = validated_attack(&q, 128, trial as u64);
            if let Some(w) = report.found {
                found_count += 1;
                assert!(crate::verifier::validate_witness(&q, &w).unwrap());
                assert_eq!(verify(&q, &budget).status, Status::Sat);
            }
        }
        assert!(found_count >= 10, "attack found only {found_count} hits");
    }
}
