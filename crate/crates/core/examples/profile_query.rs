//! Ad-hoc timing harness for single cell queries on the fixture network.

use relucert::ingest::synth_dataset;
use relucert::nn::load_network;
use relucert::sweep::cell_query;
use relucert::verifier::{interval_propagate, verify, Budget};
use std::time::Instant;

fn main() {
    let net = load_network("crates/core/fixtures/synth4.json").unwrap();
    let dataset = synth_dataset(42, 6, 8, 4);
    let budget = Budget::new(120.0, 200_000).unwrap();
    for (i, (image, label)) in dataset.iter().enumerate().take(2) {
        if net.classify(image.pixels()).unwrap() != *label {
            continue;
        }
        for (beta, eps) in [
            (0.0, 0.05),
            (0.0, 0.1),
            (0.1, 0.0),
            (0.3, 0.0),
            (0.1, 0.1),
            (0.5, 0.2),
        ] {
            let q = cell_query(&net, image, *label, beta, eps).unwrap();
            let nb = interval_propagate(&q.network, &q.input_box).unwrap();
            let t0 = Instant::now();
            let v = verify(&q, &budget);
            println!(
                "anchor {i} beta={beta} eps={eps}: {:?} in {:.2}s, {} branches, {} leaves, {} unstable at root",
                v.status,
                t0.elapsed().as_secs_f64(),
                v.stats.branches,
                v.stats.leaf_checks,
                nb.unstable_count()
            );
        }
    }
}
