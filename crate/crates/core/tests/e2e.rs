//! End-to-end checks on the checked-in fixture network: the incremental
//! schedule must agree cell-for-cell with solving every query independently,
//! and SAT cells must carry witnesses valid for their own queries.

use relucert::ingest::{save_dataset_pgm, synth_dataset};
use relucert::nn::load_network;
use relucert::sweep::{
    self, CellStatus, ParamGrid, Provenance, SweepOptions,
};
use relucert::verifier::{validate_witness, Budget};

fn fixture_network() -> relucert::nn::Network {
    load_network(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/synth4.json")).unwrap()
}

#[test]
fn incremental_grid_matches_exhaustive_solving_on_real_queries() {
    let net = fixture_network();
    let dataset = synth_dataset(42, 6, 8, 4);
    let params = ParamGrid::new(
        vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        vec![0.0, 0.05, 0.1, 0.15, 0.2],
    )
    .unwrap();
    let budget = Budget::new(1e6, 200_000).unwrap();

    let mut checked = 0;
    for (index, (image, label)) in dataset.iter().enumerate() {
        if net.classify(image.pixels()).unwrap() != *label {
            continue;
        }
        let opts = SweepOptions {
            falsifier_samples: 1024,
            seed: 1000 + index as u64,
            deadline: None,
        };
        let t0 = std::time::Instant::now();
        let grid = sweep::incremental_grid(&net, image, *label, &params, &budget, opts).unwrap();
        let walk_secs = t0.elapsed().as_secs_f64();
        grid.audit().unwrap();

        // No UNKNOWNs expected at this scale.
        for ((b, e), cell) in grid.cells() {
            assert_ne!(
                cell.status,
                CellStatus::Unknown,
                "anchor {index} cell ({b},{e}) unknown"
            );
        }

        // Re-solve every cell independently and compare.
        let t1 = std::time::Instant::now();
        for ((b, e), cell) in grid.cells() {
            let query = sweep::cell_query(
                &net,
                image,
                *label,
                params.betas()[b],
                params.epsilons()[e],
            )
            .unwrap();
            let independent = if params.betas()[b] == 0.0 && params.epsilons()[e] == 0.0 {
                CellStatus::Unsat
            } else {
                let attack = relucert::falsify::validated_attack(&query, 1024, 77);
                match attack.found {
                    Some(_) => CellStatus::Sat,
                    None => relucert::verifier::verify(&query, &budget).status.into(),
                }
            };
            assert_eq!(
                cell.status, independent,
                "anchor {index} cell ({b},{e}): walk {:?} vs independent {independent:?}",
                cell.status
            );

            // Witness bookkeeping: every SAT cell's stored witness validates
            // against its own query.
            if cell.status == CellStatus::Sat {
                if let Some(w) = &cell.witness {
                    assert!(validate_witness(&query, w).unwrap());
                }
                if cell.provenance != Provenance::Deduced {
                    assert!(cell.witness.is_some(), "probed SAT cell lacks witness");
                }
            }
        }
        let exhaustive_secs = t1.elapsed().as_secs_f64();
        println!(
            "anchor {index}: walk {walk_secs:.2}s / {} verifier calls; exhaustive {exhaustive_secs:.2}s",
            grid.verifier_calls()
        );
        checked += 1;
    }
    assert!(checked >= 4, "too few anchors classified correctly");
}

#[test]
fn contrast_search_on_real_queries() {
    let net = fixture_network();
    let dataset = synth_dataset(43, 4, 8, 4);
    let gammas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let budget = Budget::new(1e6, 200_000).unwrap();

    for (index, (image, label)) in dataset.iter().enumerate() {
        if net.classify(image.pixels()).unwrap() != *label {
            continue;
        }
        let opts = SweepOptions {
            falsifier_samples: 512,
            seed: 2000 + index as u64,
            deadline: None,
        };
        let t0 = std::time::Instant::now();
        let result =
            sweep::contrast_search(&net, image, *label, &gammas, 0.2585, &budget, opts).unwrap();
        result.audit().unwrap();
        println!(
            "anchor {index}: contrast {:.2}s, {} probes, boundary {:?}",
            t0.elapsed().as_secs_f64(),
            result.probes(),
            result.boundary
        );
        assert_eq!(result.cells.len(), 9);
        assert!(result.probes() <= 9);
    }
}

#[test]
fn dataset_round_trip_through_report_pipeline() {
    // Materialize a small dataset as PGM files and drive the whole report
    // pipeline over it.
    let dir = tempfile::tempdir().unwrap();
    let items = synth_dataset(44, 4, 8, 4);
    let manifest = save_dataset_pgm(dir.path().join("data"), &items).unwrap();
    let config = relucert::report::SweepConfig {
        network: concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/synth4.json").into(),
        dataset: manifest,
        epsilons: vec![0.0, 0.1],
        betas: vec![0.0, 0.3],
        gammas: vec![0.3, 0.6, 0.9],
        mu: 0.2585,
        query_budget: relucert::report::QueryBudgetConfig {
            max_seconds: 1e6,
            max_branches: 200_000,
        },
        anchor_max_seconds: None,
        falsifier_samples: 512,
        seed: 5,
        out_dir: dir.path().join("out"),
    };
    let summary = relucert::report::run(
        &config,
        &relucert::report::RunOptions {
            jobs: Some(2),
            resume: false,
        },
    )
    .unwrap();
    assert_eq!(summary.anchors_total, 4);
    assert!(summary.anchors_analyzed >= 3);
    assert!(config.out_dir.join("grid_percent_unsat.csv").exists());
    assert!(config.out_dir.join("timings.csv").exists());
}
