use super::*;
use crate::ingest::Image;
use crate::nn::{InputBox, Layer, Matrix, OutputProperty};
use crate::perturb::{self, PerturbationSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn toy_network() -> Network {
    crate::nn::load_network(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/toy-network.json"
    ))
    .unwrap()
}

/// Extends a 1-output network with a constant comparison output `t`:
/// true class 0 turns the misclassification property into "y <= t
/// reachable", true class 1 into "y >= t reachable".
fn with_threshold_output(net: &Network, t: f64) -> Network {
    let mut layers = net.layers().to_vec();
    let last = layers.pop().unwrap();
    assert_eq!(last.out_dim(), 1);
    let w = last.weights();
    let mut rows = vec![w.row(0).to_vec(), vec![0.0; w.cols()]];
    let biases = vec![last.biases()[0], t];
    layers.push(Layer::new(
        Matrix::from_rows(&std::mem::take(&mut rows)),
        biases,
        crate::nn::Activation::Identity,
    ));
    Network::new(net.input_dim(), layers, None).unwrap()
}

fn generous_budget() -> Budget {
    Budget::new(600.0, 10_000_000).unwrap()
}

fn random_query(rng: &mut ChaCha8Rng) -> crate::perturb::VerificationQuery {
    let input_dim = rng.gen_range(1..=4);
    let h1 = rng.gen_range(1..=4);
    let h2 = rng.gen_range(0..=4);
    let k = rng.gen_range(2..=3);
    let mut layers = vec![Layer::new(
        Matrix::new(
            h1,
            input_dim,
            (0..h1 * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        ),
        (0..h1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        crate::nn::Activation::Relu,
    )];
    let mut prev = h1;
    if h2 > 0 {
        layers.push(Layer::new(
            Matrix::new(h2, prev, (0..h2 * prev).map(|_| rng.gen_range(-2.0..2.0)).collect()),
            (0..h2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            crate::nn::Activation::Relu,
        ));
        prev = h2;
    }
    layers.push(Layer::new(
        Matrix::new(k, prev, (0..k * prev).map(|_| rng.gen_range(-2.0..2.0)).collect()),
        (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        crate::nn::Activation::Identity,
    ));
    let net = Network::new(input_dim, layers, None).unwrap();
    let lower: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(-1.5..0.5)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.0..1.5)).collect();
    let input_box = InputBox::new(lower, upper).unwrap();
    let property = OutputProperty::misclassification(rng.gen_range(0..k), k).unwrap();
    crate::perturb::VerificationQuery::from_parts(net, input_box, property)
}

#[test]
fn toy_output_cannot_reach_zero_at_fixed_input() {
    // Point box (2, -1); the toy network outputs exactly 2 there, so
    // "y <= 0 reachable" is UNSAT.
    let net = with_threshold_output(&toy_network(), 0.0);
    let q = crate::perturb::VerificationQuery::from_parts(
        net,
        InputBox::point(&[2.0, -1.0]),
        OutputProperty::misclassification(0, 2).unwrap(),
    );
    let verdict = verify(&q, &generous_budget());
    assert_eq!(verdict.status, Status::Unsat);
}

#[test]
fn epsilon_zero_query_on_strict_anchor_is_unsat() {
    // A small strictly-classifying network: y0 = x0 + x1, y1 = 1 - x0.
    let net = Network::new(
        2,
        vec![Layer::new(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0]]),
            vec![0.0, 1.0],
            crate::nn::Activation::Identity,
        )],
        None,
    )
    .unwrap();
    let anchor = Image::new(2, 1, vec![0.8, 0.9]).unwrap();
    let spec = PerturbationSpec::noise(anchor, 0, 0.0).unwrap();
    let q = perturb::noise_query(&net, &spec).unwrap();
    let verdict = verify(&q, &generous_budget());
    assert_eq!(verdict.status, Status::Unsat);
}

#[test]
fn toy_reaching_three_matches_grid_sampling() {
    // Box [0,3] x [-2,0], property "y >= 3 reachable".
    let net = with_threshold_output(&toy_network(), 3.0);
    let q = crate::perturb::VerificationQuery::from_parts(
        net.clone(),
        InputBox::new(vec![0.0, -2.0], vec![3.0, 0.0]).unwrap(),
        OutputProperty::misclassification(1, 2).unwrap(),
    );

    // Dense 0.01-grid sampling oracle.
    let mut sampled_sat = false;
    let steps = 300;
    'outer: for i in 0..=steps {
        for j in 0..=steps {
            let x = [3.0 * i as f64 / steps as f64, -2.0 + 2.0 * j as f64 / steps as f64];
            if q.property.satisfied_by(&net.evaluate(&x).unwrap()) {
                sampled_sat = true;
                break 'outer;
            }
        }
    }
    assert!(sampled_sat);

    let oracle = enumerate_oracle(&q).unwrap();
    assert_eq!(oracle.status, Status::Sat);
    assert!(validate_witness(&q, oracle.witness.as_ref().unwrap()).unwrap());

    let verdict = verify(&q, &generous_budget());
    assert_eq!(verdict.status, Status::Sat);
    assert!(validate_witness(&q, verdict.witness.as_ref().unwrap()).unwrap());
}

#[test]
fn purely_affine_network_is_a_single_leaf() {
    let net = Network::new(
        1,
        vec![Layer::new(
            Matrix::from_rows(&[vec![1.0], vec![0.0]]),
            vec![0.0, 0.5],
            crate::nn::Activation::Identity,
        )],
        None,
    )
    .unwrap();
    // "x >= 0.5 reachable" over [0, 1].
    let q = crate::perturb::VerificationQuery::from_parts(
        net,
        InputBox::new(vec![0.0], vec![1.0]).unwrap(),
        OutputProperty::misclassification(1, 2).unwrap(),
    );
    let verdict = enumerate_oracle(&q).unwrap();
    assert_eq!(verdict.stats.leaf_checks, 1);
    assert_eq!(verdict.status, Status::Sat);
}

#[test]
fn verify_agrees_with_enumeration_on_random_queries() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_24);
    let budget = generous_budget();
    for _ in 0..60 {
        let q = random_query(&mut rng);
        let fast = verify(&q, &budget);
        let slow = enumerate_oracle(&q).unwrap();
        assert_eq!(
            fast.status, slow.status,
            "disagreement on query with {} relus",
            q.network.relu_count()
        );
        if let Some(w) = &fast.witness {
            assert!(validate_witness(&q, w).unwrap());
        }
        if let Some(w) = &slow.witness {
            assert!(validate_witness(&q, w).unwrap());
        }
    }
}

#[test]
fn unsat_verdicts_survive_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let budget = generous_budget();
    let mut unsat_seen = 0;
    for _ in 0..40 {
        let q = random_query(&mut rng);
        let verdict = verify(&q, &budget);
        if verdict.status != Status::Unsat {
            continue;
        }
        unsat_seen += 1;
        for _ in 0..20_000 {
            let x: Vec<f64> = q
                .input_box
                .lower()
                .iter()
                .zip(q.input_box.upper())
                .map(|(l, u)| rng.gen_range(*l..=*u))
                .collect();
            let y = q.network.evaluate(&x).unwrap();
            assert!(
                !q.property.satisfied_by(&y),
                "sample contradicts UNSAT verdict"
            );
        }
    }
    assert!(unsat_seen >= 5, "suite produced too few UNSAT instances");
}

#[test]
fn sat_witness_remains_valid_in_enclosing_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let budget = generous_budget();
    let mut sat_seen = 0;
    for _ in 0..60 {
        let q = random_query(&mut rng);
        let verdict = verify(&q, &budget);
        if verdict.status != Status::Sat {
            continue;
        }
        sat_seen += 1;
        let grown = InputBox::new(
            q.input_box.lower().iter().map(|l| l - 0.25).collect(),
            q.input_box.upper().iter().map(|u| u + 0.25).collect(),
        )
        .unwrap();
        let bigger = crate::perturb::VerificationQuery::from_parts(
            q.network.clone(),
            grown,
            q.property,
        );
        assert!(validate_witness(&bigger, verdict.witness.as_ref().unwrap()).unwrap());
    }
    assert!(sat_seen >= 5, "suite produced too few SAT instances");
}

#[test]
fn status_is_deterministic_under_branch_caps() {
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    for _ in 0..20 {
        let q = random_query(&mut rng);
        let budget = Budget::new(600.0, 64).unwrap();
        let a = verify(&q, &budget);
        let b = verify(&q, &budget);
        assert_eq!(a.status, b.status);
        assert_eq!(a.stats.branches, b.stats.branches);
        assert_eq!(a.stats.leaf_checks, b.stats.leaf_checks);
    }
}

#[test]
fn branch_budget_exhaustion_reports_unknown() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    // Find a query that genuinely needs branching.
    loop {
        let q = random_query(&mut rng);
        let bounds = interval_propagate(&q.network, &q.input_box).unwrap();
        if bounds.unstable_count() < 4 {
            continue;
        }
        let budget = Budget::new(600.0, 1).unwrap();
        let verdict = verify(&q, &budget);
        if verdict.status == Status::Unknown(UnknownReason::BranchBudget) {
            assert!(verdict.witness.is_none());
            return;
        }
    }
}

#[test]
fn validate_witness_checks_box_and_property() {
    let net = with_threshold_output(&toy_network(), 0.0);
    let q = crate::perturb::VerificationQuery::from_parts(
        net,
        InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
        OutputProperty::misclassification(1, 2).unwrap(),
    );
    // One coordinate 1e-6 outside the box.
    assert!(!validate_witness(&q, &[1.000001, 0.5]).unwrap());
    assert!(validate_witness(&q, &[1.0, 0.5]).is_ok());
    assert!(validate_witness(&q, &[0.5]).is_err());
}

#[test]
fn rounded_leaf_witnesses_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(6060);
    let mut feasible = 0;
    while feasible < 200 {
        let q = random_query(&mut rng);
        let relus = q.network.relu_count();
        let mask = rng.gen_range(0..(1u64 << relus));
        let pattern = pattern_from_mask(&q.network, mask);
        if let Some(exact) =
            leaf::leaf_feasible_exact(&q.network, &q.input_box, &pattern, &q.property)
        {
            feasible += 1;
            let w = round_and_validate(&q, &exact);
            assert!(
                w.is_some(),
                "rounding scheme failed on a random feasible leaf"
            );
        }
    }
}

#[test]
fn budget_validation() {
    assert!(Budget::new(0.0, 10).is_err());
    assert!(Budget::new(1.0, 0).is_err());
    assert!(Budget::new(1.0, 1).is_ok());
}
