//! Exhaustive enumeration oracle.
//!
//! Enumerates all `2^R` ReLU phase patterns and calls the exact leaf
//! decision on each. Independent of the branch-and-bound search path, so it
//! serves as the reference implementation for completeness testing. Never
//! returns UNKNOWN.

use super::leaf::{leaf_feasible_exact, round_into_box};
use super::{round_and_validate, pattern_from_mask, Status, Verdict, VerifyStats};
use crate::perturb::VerificationQuery;
use std::time::Instant;
use thiserror::Error;

/// Hard cap on enumerable ReLU neurons (`2^20` patterns).
pub const ORACLE_RELU_CAP: usize = 20;

#[derive(Debug, Error)]
#[error("network has {found} ReLU neurons, above the enumeration cap of {cap}")]
pub struct OracleCapExceeded {
    pub found: usize,
    pub cap: usize,
}

/// Decides the query by brute force over activation patterns; SAT iff any
/// leaf is feasible.
pub fn enumerate_oracle(query: &VerificationQuery) -> Result<Verdict, OracleCapExceeded> {
    let relus = query.network.relu_count();
    if relus > ORACLE_RELU_CAP {
        return Err(OracleCapExceeded {
            found: relus,
            cap: ORACLE_RELU_CAP,
        });
    }
    let start = Instant::now();
    let mut stats = VerifyStats::default();
    let mut fallback: Option<Vec<f64>> = None;

    for mask in 0..(1u64 << relus) {
        let pattern = pattern_from_mask(&query.network, mask);
        stats.leaf_checks += 1;
        if let Some(exact) =
            leaf_feasible_exact(&query.network, &query.input_box, &pattern, &query.property)
        {
            match round_and_validate(query, &exact) {
                Some(w) => {
                    stats.wall = start.elapsed();
                    return Ok(Verdict {
                        status: Status::Sat,
                        witness: Some(w),
                        stats,
                    });
                }
                // Keep searching for a pattern whose witness rounds cleanly;
                // the status is already settled as SAT either way.
                None => {
                    if fallback.is_none() {
                        fallback = Some(round_into_box(&exact, &query.input_box));
                    }
                }
            }
        }
    }

    stats.wall = start.elapsed();
    match fallback {
        Some(w) => Ok(Verdict {
            status: Status::Sat,
            witness: Some(w),
            stats,
        }),
        None => Ok(Verdict {
            status: Status::Unsat,
            witness: None,
            stats,
        }),
    }
}
