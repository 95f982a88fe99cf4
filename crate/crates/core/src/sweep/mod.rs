//! Verification-query scheduling over parameter grids.
//!
//! Robustness is monotone in the perturbation parameters: a counterexample
//! at small epsilon/beta/gamma stays one at larger values, and robustness at
//! large values implies it below. Over a (beta, epsilon) grid the SAT/UNSAT
//! boundary is therefore a step graph with at most one transition per row
//! and column, and the incremental walk discovers the step graph instead of
//! solving every cell:
//!
//! start at (lowest beta, highest epsilon); on SAT, fill the rest of the
//! row rightward and step epsilon down; on UNSAT, fill the column downward
//! and step beta up; on UNKNOWN, mark the cell, binary-search the remaining
//! epsilon values in the column, and step beta up. When the walk reaches the
//! last column or the first row, a binary search resolves the remaining
//! line. Without UNKNOWNs this takes at most `|B| + |E| - 1` main-loop
//! verifier calls.
//!
//! Contrast sweeps are one-dimensional and use the same monotone binary
//! search directly.
//!
//! Every cell records whether it was verified, falsified (sampling attack),
//! or deduced; UNKNOWN results are never used as deduction premises.

use crate::falsify::validated_attack;
use crate::ingest::Image;
use crate::nn::Network;
use crate::perturb::{self, EncodeError, PerturbationSpec, VerificationQuery};
use crate::verifier::{verify, Budget, Status};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("parameter values must be strictly increasing and non-empty")]
    BadParameters,
    #[error("gamma values must be strictly increasing within (0, 1]")]
    BadGammas,
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Cell status in a sweep; `Unknown` covers verifier timeouts, budget
/// exhaustion and internal errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Sat,
    Unsat,
    Unknown,
}

impl From<Status> for CellStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Sat => CellStatus::Sat,
            Status::Unsat => CellStatus::Unsat,
            Status::Unknown(_) => CellStatus::Unknown,
        }
    }
}

/// How a cell's status was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Decided by the verifier (or, for the degenerate zero-perturbation
    /// cell, by direct classification).
    Verified,
    /// Implied by another cell through monotonicity.
    Deduced,
    /// Counterexample found by the sampling attack; no verifier call.
    Falsified,
}

/// What actually answered a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeKind {
    Verifier,
    Falsifier,
    /// The (epsilon = 0, beta = 0) cell: resolved by classifying the anchor.
    DirectClassification,
}

/// Which part of the schedule issued a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbePhase {
    /// The Algorithm-1 style main walk.
    Walk,
    /// Terminal binary search along the last column or first row.
    EdgeSearch,
    /// Column binary search triggered by an UNKNOWN cell.
    UnknownSearch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub status: CellStatus,
    pub provenance: Provenance,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub beta_idx: usize,
    pub eps_idx: usize,
    pub status: CellStatus,
    pub kind: ProbeKind,
    pub phase: ProbePhase,
    pub wall: Duration,
}

/// Strictly increasing brightness and noise value arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGrid {
    betas: Vec<f64>,
    epsilons: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

impl ParamGrid {
    pub fn new(betas: Vec<f64>, epsilons: Vec<f64>) -> Result<Self, SweepError> {
        if !strictly_increasing(&betas) || !strictly_increasing(&epsilons) {
            return Err(SweepError::BadParameters);
        }
        Ok(ParamGrid { betas, epsilons })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

/// Completed sweep over a (beta, epsilon) grid, cells indexed
/// `[beta_idx][eps_idx]`, plus the ordered probe log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictGrid {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
    cells: Vec<Cell>,
    pub call_log: Vec<CallRecord>,
}

impl VerdictGrid {
    pub fn num_betas(&self) -> usize {
        self.betas.len()
    }

    pub fn num_epsilons(&self) -> usize {
        self.epsilons.len()
    }

    pub fn cell(&self, beta_idx: usize, eps_idx: usize) -> &Cell {
        &self.cells[beta_idx * self.epsilons.len() + eps_idx]
    }

    fn cell_mut(&mut self, beta_idx: usize, eps_idx: usize) -> &mut Cell {
        &mut self.cells[beta_idx * self.epsilons.len() + eps_idx]
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), &Cell)> {
        let ne = self.epsilons.len();
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| ((i / ne, i % ne), c))
    }

    /// Probes that actually invoked the verifier.
    pub fn verifier_calls(&self) -> usize {
        self.call_log
            .iter()
            .filter(|c| c.kind == ProbeKind::Verifier)
            .count()
    }

    /// Main-walk probes (any kind), the quantity bounded by `|B| + |E| - 1`.
    pub fn walk_calls(&self) -> usize {
        self.call_log
            .iter()
            .filter(|c| c.phase == ProbePhase::Walk)
            .count()
    }

    /// Structural soundness audit: step-graph consistency and the rule that
    /// every deduced cell is justified by a verified or falsified cell of
    /// the same status that dominates it in the right direction. UNKNOWN
    /// cells justify nothing.
    pub fn audit(&self) -> Result<(), String> {
        let (nb, ne) = (self.betas.len(), self.epsilons.len());
        for b in 0..nb {
            for e in 0..ne {
                let cell = self.cell(b, e);
                match cell.status {
                    CellStatus::Sat => {
                        for b2 in b..nb {
                            let other = self.cell(b2, e);
                            if other.status == CellStatus::Unsat {
                                return Err(format!(
                                    "SAT at ({b},{e}) but UNSAT at ({b2},{e})"
                                ));
                            }
                        }
                        for e2 in e..ne {
                            let other = self.cell(b, e2);
                            if other.status == CellStatus::Unsat {
                                return Err(format!(
                                    "SAT at ({b},{e}) but UNSAT at ({b},{e2})"
                                ));
                            }
                        }
                        if cell.provenance == Provenance::Deduced {
                            let justified = self.cells().any(|((b2, e2), c)| {
                                c.status == CellStatus::Sat
                                    && c.provenance != Provenance::Deduced
                                    && b2 <= b
                                    && e2 <= e
                            });
                            if !justified {
                                return Err(format!(
                                    "deduced SAT at ({b},{e}) dominates no verified SAT cell"
                                ));
                            }
                        }
                    }
                    CellStatus::Unsat => {
                        if cell.provenance == Provenance::Deduced {
                            let justified = self.cells().any(|((b2, e2), c)| {
                                c.status == CellStatus::Unsat
                                    && c.provenance == Provenance::Verified
                                    && b2 >= b
                                    && e2 >= e
                            });
                            if !justified {
                                return Err(format!(
                                    "deduced UNSAT at ({b},{e}) is dominated by no verified UNSAT cell"
                                ));
                            }
                        }
                    }
                    CellStatus::Unknown => {
                        if cell.provenance == Provenance::Deduced {
                            return Err(format!("UNKNOWN cell ({b},{e}) marked as deduced"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Aggregate accounting for one grid (or one contrast series).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepStats {
    pub total: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    pub verified: usize,
    pub deduced: usize,
    pub falsified: usize,
    pub sat_verified: usize,
    pub sat_deduced: usize,
    pub sat_falsified: usize,
    pub unsat_verified: usize,
    pub unsat_deduced: usize,
    pub deduced_fraction: f64,
}

impl SweepStats {
    fn add_cell(&mut self, cell: &Cell) {
        self.total += 1;
        match cell.status {
            CellStatus::Sat => self.sat += 1,
            CellStatus::Unsat => self.unsat += 1,
            CellStatus::Unknown => self.unknown += 1,
        }
        match cell.provenance {
            Provenance::Verified => self.verified += 1,
            Provenance::Deduced => self.deduced += 1,
            Provenance::Falsified => self.falsified += 1,
        }
        match (cell.status, cell.provenance) {
            (CellStatus::Sat, Provenance::Verified) => self.sat_verified += 1,
            (CellStatus::Sat, Provenance::Deduced) => self.sat_deduced += 1,
            (CellStatus::Sat, Provenance::Falsified) => self.sat_falsified += 1,
            (CellStatus::Unsat, Provenance::Verified) => self.unsat_verified += 1,
            (CellStatus::Unsat, Provenance::Deduced) => self.unsat_deduced += 1,
            _ => {}
        }
    }

    fn finish(mut self) -> Self {
        if self.total > 0 {
            self.deduced_fraction = self.deduced as f64 / self.total as f64;
        }
        self
    }

    pub fn merge(&mut self, other: &SweepStats) {
        self.total += other.total;
        self.sat += other.sat;
        self.unsat += other.unsat;
        self.unknown += other.unknown;
        self.verified += other.verified;
        self.deduced += other.deduced;
        self.falsified += other.falsified;
        self.sat_verified += other.sat_verified;
        self.sat_deduced += other.sat_deduced;
        self.sat_falsified += other.sat_falsified;
        self.unsat_verified += other.unsat_verified;
        self.unsat_deduced += other.unsat_deduced;
        self.deduced_fraction = if self.total > 0 {
            self.deduced as f64 / self.total as f64
        } else {
            0.0
        };
    }
}

/// Counts and fractions for a completed grid.
pub fn stats(grid: &VerdictGrid) -> SweepStats {
    let mut s = SweepStats::default();
    for (_, cell) in grid.cells() {
        s.add_cell(cell);
    }
    s.finish()
}

/// Counts and fractions for a contrast series.
pub fn contrast_stats(result: &ContrastResult) -> SweepStats {
    let mut s = SweepStats::default();
    for cell in &result.cells {
        s.add_cell(cell);
    }
    s.finish()
}

/// One probe's answer, produced by a [`GridOracle`] or [`LineOracle`].
#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub status: CellStatus,
    pub kind: ProbeKind,
    pub witness: Option<Vec<f64>>,
    pub wall: Duration,
}

/// Decides individual grid cells; real implementations run the falsifier
/// and verifier, mock implementations serve ground truth in tests.
pub trait GridOracle {
    fn decide(&mut self, beta_idx: usize, eps_idx: usize) -> ProbeOutcome;
}

/// Decides individual positions of a one-dimensional monotone sweep.
pub trait LineOracle {
    fn decide(&mut self, idx: usize) -> ProbeOutcome;
}

const UNSET: CellStatus = CellStatus::Unknown; // placeholder before assignment

struct GridBuilder<'a> {
    oracle: &'a mut dyn GridOracle,
    grid: VerdictGrid,
    assigned: Vec<bool>,
}

impl GridBuilder<'_> {
    fn ne(&self) -> usize {
        self.grid.epsilons.len()
    }

    fn nb(&self) -> usize {
        self.grid.betas.len()
    }

    fn is_assigned(&self, b: usize, e: usize) -> bool {
        self.assigned[b * self.ne() + e]
    }

    fn set(&mut self, b: usize, e: usize, cell: Cell) {
        let idx = b * self.ne() + e;
        debug_assert!(!self.assigned[idx], "cell ({b},{e}) assigned twice");
        self.assigned[idx] = true;
        *self.grid.cell_mut(b, e) = cell;
    }

    fn set_if_unset(&mut self, b: usize, e: usize, status: CellStatus) {
        if !self.is_assigned(b, e) {
            self.set(
                b,
                e,
                Cell {
                    status,
                    provenance: Provenance::Deduced,
                    witness: None,
                },
            );
        } else {
            debug_assert_eq!(
                self.grid.cell(b, e).status,
                status,
                "monotonicity violated by fill at ({b},{e})"
            );
        }
    }

    fn probe(&mut self, b: usize, e: usize, phase: ProbePhase) -> CellStatus {
        debug_assert!(!self.is_assigned(b, e), "re-probing cell ({b},{e})");
        let outcome = self.oracle.decide(b, e);
        self.grid.call_log.push(CallRecord {
            beta_idx: b,
            eps_idx: e,
            status: outcome.status,
            kind: outcome.kind,
            phase,
            wall: outcome.wall,
        });
        let provenance = match outcome.kind {
            ProbeKind::Falsifier => Provenance::Falsified,
            ProbeKind::Verifier | ProbeKind::DirectClassification => Provenance::Verified,
        };
        self.set(
            b,
            e,
            Cell {
                status: outcome.status,
                provenance,
                witness: outcome.witness,
            },
        );
        outcome.status
    }

    /// Fill SAT rightward along a row (greater beta), skipping set cells.
    fn fill_sat_row(&mut self, from_b: usize, e: usize) {
        for b in from_b..self.nb() {
            self.set_if_unset(b, e, CellStatus::Sat);
        }
    }

    /// Fill UNSAT downward along a column (smaller epsilon).
    fn fill_unsat_column(&mut self, b: usize, to_e: usize) {
        for e in (0..=to_e).rev() {
            self.set_if_unset(b, e, CellStatus::Unsat);
        }
    }

    /// Monotone boundary search over a line of unresolved cells, `coords`
    /// ordered by increasing parameter (so SAT propagates to higher indices
    /// and UNSAT to lower ones). UNKNOWN probes split the segment and are
    /// never used for deduction.
    fn line_search(&mut self, coords: &[(usize, usize)], phase: ProbePhase) {
        if coords.is_empty() {
            return;
        }
        let mut segments = vec![(0usize, coords.len() - 1)];
        while let Some((mut lo, mut hi)) = segments.pop() {
            while lo <= hi && self.is_assigned(coords[lo].0, coords[lo].1) {
                lo += 1;
            }
            while hi > lo && self.is_assigned(coords[hi].0, coords[hi].1) {
                hi -= 1;
            }
            if lo > hi || self.is_assigned(coords[lo].0, coords[lo].1) {
                continue;
            }
            let mid = lo + (hi - lo + 1) / 2;
            let (b, e) = coords[mid];
            match self.probe(b, e, phase) {
                CellStatus::Sat => {
                    for &(b2, e2) in &coords[mid..=hi] {
                        self.set_if_unset(b2, e2, CellStatus::Sat);
                    }
                    if mid > lo {
                        segments.push((lo, mid - 1));
                    }
                }
                CellStatus::Unsat => {
                    for &(b2, e2) in &coords[lo..=mid] {
                        self.set_if_unset(b2, e2, CellStatus::Unsat);
                    }
                    if mid < hi {
                        segments.push((mid + 1, hi));
                    }
                }
                CellStatus::Unknown => {
                    if mid > lo {
                        segments.push((lo, mid - 1));
                    }
                    if mid < hi {
                        segments.push((mid + 1, hi));
                    }
                }
            }
        }
    }
}

/// Runs the incremental grid walk against an arbitrary cell oracle.
///
/// Every cell of the result is assigned. The main walk issues at most
/// `|B| + |E| - 1` probes; terminal and UNKNOWN-triggered binary searches
/// add logarithmically many more.
pub fn incremental_grid_with(oracle: &mut dyn GridOracle, params: &ParamGrid) -> VerdictGrid {
    let (nb, ne) = (params.betas.len(), params.epsilons.len());
    let placeholder = Cell {
        status: UNSET,
        provenance: Provenance::Verified,
        witness: None,
    };
    let mut builder = GridBuilder {
        oracle,
        grid: VerdictGrid {
            betas: params.betas.clone(),
            epsilons: params.epsilons.clone(),
            cells: vec![placeholder; nb * ne],
            call_log: Vec::new(),
        },
        assigned: vec![false; nb * ne],
    };

    let mut b = 0usize;
    let mut e = ne as isize - 1;
    while b < nb && e >= 0 {
        if b == nb - 1 {
            // Remaining unresolved cells all sit in the last column.
            let coords: Vec<(usize, usize)> = (0..=e as usize).map(|j| (b, j)).collect();
            builder.line_search(&coords, ProbePhase::EdgeSearch);
            break;
        }
        if e == 0 {
            // Remaining unresolved cells all sit in the first row.
            let coords: Vec<(usize, usize)> = (b..nb).map(|i| (i, 0)).collect();
            builder.line_search(&coords, ProbePhase::EdgeSearch);
            break;
        }
        let eu = e as usize;
        match builder.probe(b, eu, ProbePhase::Walk) {
            CellStatus::Sat => {
                builder.fill_sat_row(b, eu);
                e -= 1;
            }
            CellStatus::Unsat => {
                builder.fill_unsat_column(b, eu);
                b += 1;
            }
            CellStatus::Unknown => {
                if eu > 0 {
                    let coords: Vec<(usize, usize)> = (0..eu).map(|j| (b, j)).collect();
                    builder.line_search(&coords, ProbePhase::UnknownSearch);
                }
                b += 1;
            }
        }
    }

    debug_assert!(builder.assigned.iter().all(|a| *a), "unassigned cells left");
    builder.grid
}

/// Naive baseline: solve every cell independently (no deduction). This is
/// the quadratic schedule the incremental walk replaces; kept for
/// cross-checking.
pub fn exhaustive_grid(oracle: &mut dyn GridOracle, params: &ParamGrid) -> VerdictGrid {
    let (nb, ne) = (params.betas.len(), params.epsilons.len());
    let mut cells = Vec::with_capacity(nb * ne);
    let mut call_log = Vec::new();
    for b in 0..nb {
        for e in 0..ne {
            let outcome = oracle.decide(b, e);
            call_log.push(CallRecord {
                beta_idx: b,
                eps_idx: e,
                status: outcome.status,
                kind: outcome.kind,
                phase: ProbePhase::Walk,
                wall: outcome.wall,
            });
            cells.push(Cell {
                status: outcome.status,
                provenance: match outcome.kind {
                    ProbeKind::Falsifier => Provenance::Falsified,
                    _ => Provenance::Verified,
                },
                witness: outcome.witness,
            });
        }
    }
    VerdictGrid {
        betas: params.betas.clone(),
        epsilons: params.epsilons.clone(),
        cells,
        call_log,
    }
}

/// Result of a contrast sweep: per-gamma statuses plus the boundary (index
/// of the largest UNSAT gamma, if any).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastResult {
    pub gammas: Vec<f64>,
    pub cells: Vec<Cell>,
    pub boundary: Option<usize>,
    pub call_log: Vec<CallRecord>,
}

impl ContrastResult {
    pub fn verifier_calls(&self) -> usize {
        self.call_log
            .iter()
            .filter(|c| c.kind == ProbeKind::Verifier)
            .count()
    }

    pub fn probes(&self) -> usize {
        self.call_log.len()
    }

    /// Monotonicity and deduction audit for the one-dimensional sweep.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen_sat = false;
        for (i, cell) in self.cells.iter().enumerate() {
            match cell.status {
                CellStatus::Sat => seen_sat = true,
                CellStatus::Unsat => {
                    if seen_sat {
                        return Err(format!("UNSAT at index {i} above a SAT"));
                    }
                    if cell.provenance == Provenance::Deduced {
                        let justified = self.cells[i..].iter().any(|c| {
                            c.status == CellStatus::Unsat && c.provenance == Provenance::Verified
                        });
                        if !justified {
                            return Err(format!("deduced UNSAT at {i} unjustified"));
                        }
                    }
                }
                CellStatus::Unknown => {
                    if cell.provenance == Provenance::Deduced {
                        return Err(format!("UNKNOWN at {i} marked deduced"));
                    }
                }
            }
            if cell.status == CellStatus::Sat && cell.provenance == Provenance::Deduced {
                let justified = self.cells[..=i].iter().any(|c| {
                    c.status == CellStatus::Sat && c.provenance != Provenance::Deduced
                });
                if !justified {
                    return Err(format!("deduced SAT at {i} unjustified"));
                }
            }
        }
        Ok(())
    }
}

/// Monotone binary search over a gamma array using an arbitrary per-index
/// oracle. Non-probed statuses are inferred from monotonicity; an UNKNOWN
/// probe splits the search into independent sub-searches on both sides.
pub fn contrast_search_with(oracle: &mut dyn LineOracle, gammas: &[f64]) -> ContrastResult {
    struct LineAsGrid<'a> {
        inner: &'a mut dyn LineOracle,
    }
    impl GridOracle for LineAsGrid<'_> {
        fn decide(&mut self, beta_idx: usize, _eps_idx: usize) -> ProbeOutcome {
            self.inner.decide(beta_idx)
        }
    }

    // Reuse the grid machinery with a single-epsilon grid: cells (i, 0) in
    // gamma order, probed through the line-search path only.
    let params = ParamGrid {
        betas: gammas.to_vec(),
        epsilons: vec![0.0],
    };
    let placeholder = Cell {
        status: UNSET,
        provenance: Provenance::Verified,
        witness: None,
    };
    let mut adapter = LineAsGrid { inner: oracle };
    let mut builder = GridBuilder {
        oracle: &mut adapter,
        grid: VerdictGrid {
            betas: params.betas.clone(),
            epsilons: params.epsilons.clone(),
            cells: vec![placeholder; gammas.len()],
            call_log: Vec::new(),
        },
        assigned: vec![false; gammas.len()],
    };
    let coords: Vec<(usize, usize)> = (0..gammas.len()).map(|i| (i, 0)).collect();
    builder.line_search(&coords, ProbePhase::EdgeSearch);

    let cells: Vec<Cell> = (0..gammas.len())
        .map(|i| builder.grid.cell(i, 0).clone())
        .collect();
    let boundary = cells
        .iter()
        .enumerate()
        .rev()
        .find(|(_, c)| c.status == CellStatus::Unsat)
        .map(|(i, _)| i);
    let mut call_log = builder.grid.call_log;
    for record in &mut call_log {
        record.eps_idx = 0;
    }
    ContrastResult {
        gammas: gammas.to_vec(),
        cells,
        boundary,
        call_log,
    }
}

/// Options shared by the real (non-mock) sweep drivers.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub falsifier_samples: usize,
    pub seed: u64,
    /// Wall-clock deadline for the whole anchor; unresolved cells become
    /// UNKNOWN once it passes.
    pub deadline: Option<Instant>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            falsifier_samples: 1024,
            seed: 0,
            deadline: None,
        }
    }
}

fn cell_seed(master: u64, beta_idx: usize, eps_idx: usize) -> u64 {
    master
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(((beta_idx as u64) << 32) | ((eps_idx as u64) + 1))
}

/// The concrete query for one (beta, epsilon) cell. Pure-noise cells skip
/// the brightness encoding so the box keeps the original dimension.
pub fn cell_query(
    net: &Network,
    anchor: &Image,
    label: usize,
    beta: f64,
    epsilon: f64,
) -> Result<VerificationQuery, EncodeError> {
    if beta == 0.0 {
        let spec = PerturbationSpec::noise(anchor.clone(), label, epsilon)?;
        perturb::noise_query(net, &spec)
    } else {
        let spec = PerturbationSpec::noise_brightness(anchor.clone(), label, epsilon, beta)?;
        perturb::brightness_query(net, &spec)
    }
}

/// Cell decider over a real network: degenerate-cell rule, then sampling
/// attack, then the verifier.
struct AnchorOracle<'a> {
    net: &'a Network,
    anchor: &'a Image,
    label: usize,
    betas: &'a [f64],
    epsilons: &'a [f64],
    budget: &'a Budget,
    opts: SweepOptions,
}

impl AnchorOracle<'_> {
    fn query(&self, beta: f64, epsilon: f64) -> Result<VerificationQuery, EncodeError> {
        cell_query(self.net, self.anchor, self.label, beta, epsilon)
    }

    fn decide_cell(&mut self, beta_idx: usize, eps_idx: usize) -> ProbeOutcome {
        if let Some(deadline) = self.opts.deadline {
            if Instant::now() >= deadline {
                return ProbeOutcome {
                    status: CellStatus::Unknown,
                    kind: ProbeKind::Verifier,
                    witness: None,
                    wall: Duration::ZERO,
                };
            }
        }
        let (beta, epsilon) = (self.betas[beta_idx], self.epsilons[eps_idx]);
        let start = Instant::now();

        // Degenerate zero-perturbation cell: the anchor is strictly
        // correctly classified (checked at sweep entry), so the point query
        // is UNSAT by direct classification.
        if beta == 0.0 && epsilon == 0.0 {
            return ProbeOutcome {
                status: CellStatus::Unsat,
                kind: ProbeKind::DirectClassification,
                witness: None,
                wall: start.elapsed(),
            };
        }

        let query = match self.query(beta, epsilon) {
            Ok(q) => q,
            Err(_) => {
                // Anchor checks passed at entry; an error here is internal.
                return ProbeOutcome {
                    status: CellStatus::Unknown,
                    kind: ProbeKind::Verifier,
                    witness: None,
                    wall: start.elapsed(),
                };
            }
        };

        let attack = validated_attack(
            &query,
            self.opts.falsifier_samples,
            cell_seed(self.opts.seed, beta_idx, eps_idx),
        );
        if let Some(w) = attack.found {
            return ProbeOutcome {
                status: CellStatus::Sat,
                kind: ProbeKind::Falsifier,
                witness: Some(w),
                wall: start.elapsed(),
            };
        }

        let verdict = verify(&query, self.budget);
        ProbeOutcome {
            status: verdict.status.into(),
            kind: ProbeKind::Verifier,
            witness: verdict.witness,
            wall: start.elapsed(),
        }
    }
}

impl GridOracle for AnchorOracle<'_> {
    fn decide(&mut self, beta_idx: usize, eps_idx: usize) -> ProbeOutcome {
        self.decide_cell(beta_idx, eps_idx)
    }
}

/// Incremental grid verification of one anchor over noise and brightness
/// parameters. Requires the anchor to be strictly classified as `label`.
pub fn incremental_grid(
    net: &Network,
    anchor: &Image,
    label: usize,
    params: &ParamGrid,
    budget: &Budget,
    opts: SweepOptions,
) -> Result<VerdictGrid, SweepError> {
    // Any anchor/label problem surfaces here through the encoder checks.
    let probe_spec = PerturbationSpec::noise(anchor.clone(), label, 0.0)?;
    perturb::noise_query(net, &probe_spec)?;

    let mut oracle = AnchorOracle {
        net,
        anchor,
        label,
        betas: params.betas(),
        epsilons: params.epsilons(),
        budget,
        opts,
    };
    let mut grid = incremental_grid_with(&mut oracle, params);
    attach_deduced_witnesses(net, anchor, label, &mut grid);
    debug_assert!(grid.audit().is_ok());
    Ok(grid)
}

/// Copies witnesses from verified/falsified SAT cells into the deduced SAT
/// cells they justify, re-validating against the dominated cell's own query
/// first. Deduction itself never needs the witness; this is bookkeeping so
/// downstream reports can show a counterexample per SAT cell.
fn attach_deduced_witnesses(net: &Network, anchor: &Image, label: usize, grid: &mut VerdictGrid) {
    let sources: Vec<(usize, usize, Vec<f64>)> = grid
        .cells()
        .filter(|(_, c)| c.status == CellStatus::Sat && c.provenance != Provenance::Deduced)
        .filter_map(|((b, e), c)| c.witness.clone().map(|w| (b, e, w)))
        .collect();
    if sources.is_empty() {
        return;
    }
    let (nb, ne) = (grid.num_betas(), grid.num_epsilons());
    for b in 0..nb {
        for e in 0..ne {
            let cell = grid.cell(b, e);
            if cell.status != CellStatus::Sat
                || cell.provenance != Provenance::Deduced
                || cell.witness.is_some()
            {
                continue;
            }
            let beta = grid.betas[b];
            let epsilon = grid.epsilons[e];
            let Ok(query) = cell_query(net, anchor, label, beta, epsilon) else {
                continue;
            };
            let expected_dim = query.network.input_dim();
            for (sb, se, w) in &sources {
                if *sb > b || *se > e {
                    continue;
                }
                let mut candidate = w.clone();
                // A noise-cell witness reused in a brightness cell gains the
                // zero brightness coordinate.
                if candidate.len() + 1 == expected_dim {
                    candidate.push(0.0);
                }
                if candidate.len() != expected_dim {
                    continue;
                }
                if matches!(crate::verifier::validate_witness(&query, &candidate), Ok(true)) {
                    grid.cell_mut(b, e).witness = Some(candidate);
                    break;
                }
            }
        }
    }
}

struct ContrastOracle<'a> {
    net: &'a Network,
    anchor: &'a Image,
    label: usize,
    gammas: &'a [f64],
    mu: f64,
    budget: &'a Budget,
    opts: SweepOptions,
}

impl LineOracle for ContrastOracle<'_> {
    fn decide(&mut self, idx: usize) -> ProbeOutcome {
        if let Some(deadline) = self.opts.deadline {
            if Instant::now() >= deadline {
                return ProbeOutcome {
                    status: CellStatus::Unknown,
                    kind: ProbeKind::Verifier,
                    witness: None,
                    wall: Duration::ZERO,
                };
            }
        }
        let start = Instant::now();
        let spec = match PerturbationSpec::contrast(
            self.anchor.clone(),
            self.label,
            self.gammas[idx],
            self.mu,
        ) {
            Ok(s) => s,
            Err(_) => {
                return ProbeOutcome {
                    status: CellStatus::Unknown,
                    kind: ProbeKind::Verifier,
                    witness: None,
                    wall: start.elapsed(),
                }
            }
        };
        let query = match perturb::contrast_query(self.net, &spec) {
            Ok(q) => q,
            Err(_) => {
                return ProbeOutcome {
                    status: CellStatus::Unknown,
                    kind: ProbeKind::Verifier,
                    witness: None,
                    wall: start.elapsed(),
                }
            }
        };
        let attack = validated_attack(
            &query,
            self.opts.falsifier_samples,
            cell_seed(self.opts.seed, usize::MAX / 2, idx),
        );
        if let Some(w) = attack.found {
            return ProbeOutcome {
                status: CellStatus::Sat,
                kind: ProbeKind::Falsifier,
                witness: Some(w),
                wall: start.elapsed(),
            };
        }
        let verdict = verify(&query, self.budget);
        ProbeOutcome {
            status: verdict.status.into(),
            kind: ProbeKind::Verifier,
            witness: verdict.witness,
            wall: start.elapsed(),
        }
    }
}

/// Contrast robustness sweep for one anchor: monotone binary search over the
/// gamma array with mean `mu`.
pub fn contrast_search(
    net: &Network,
    anchor: &Image,
    label: usize,
    gammas: &[f64],
    mu: f64,
    budget: &Budget,
    opts: SweepOptions,
) -> Result<ContrastResult, SweepError> {
    if !strictly_increasing(gammas) || gammas.iter().any(|g| *g <= 0.0 || *g > 1.0) {
        return Err(SweepError::BadGammas);
    }
    // Validate mu and the anchor once up front.
    let probe = PerturbationSpec::contrast(anchor.clone(), label, gammas[0], mu)?;
    perturb::contrast_query(net, &probe)?;

    let mut oracle = ContrastOracle {
        net,
        anchor,
        label,
        gammas,
        mu,
        budget,
        opts,
    };
    let result = contrast_search_with(&mut oracle, gammas);
    debug_assert!(result.audit().is_ok());
    Ok(result)
}
