//! Batch sweep driver: read a sweep configuration, run noise/brightness
//! grids and contrast searches over a dataset, persist per-anchor results,
//! and emit summary tables and heatmap data.
//!
//! Only strictly correctly classified anchors are analyzed; the rest are
//! listed as skipped. Every output file is written atomically (temp file +
//! rename) and runs are resumable from the per-anchor result files.
//! Perturbed pixels are never clipped to `[0, 1]`; output metadata records
//! this.

mod csv_out;

pub use csv_out::{export_csvs, parse_grid_csv};

use crate::ingest::{self, Image};
use crate::nn::{self, Network};
use crate::perturb::strictly_classified;
use crate::sweep::{
    self, contrast_stats, stats, CellStatus, ContrastResult, ParamGrid, SweepOptions, SweepStats,
    VerdictGrid,
};
use crate::verifier::Budget;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ReportError {
    /// CLI exit code: 1 config, 2 i/o, 3 internal verifier error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => 1,
            ReportError::Io(_) => 2,
            ReportError::Internal(_) => 3,
        }
    }
}

fn config_err(msg: impl Into<String>) -> ReportError {
    ReportError::Config(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryBudgetConfig {
    pub max_seconds: f64,
    pub max_branches: u64,
}

impl Default for QueryBudgetConfig {
    fn default() -> Self {
        QueryBudgetConfig {
            max_seconds: 30.0,
            max_branches: 1_000_000,
        }
    }
}

fn default_anchor_seconds() -> Option<f64> {
    Some(60.0)
}

fn default_falsifier_samples() -> usize {
    1024
}

/// Sweep configuration document. Paths are resolved relative to the config
/// file's directory when loaded from disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub network: PathBuf,
    pub dataset: PathBuf,
    pub epsilons: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub mu: f64,
    #[serde(default)]
    pub query_budget: QueryBudgetConfig,
    /// Wall-clock budget per anchor, applied separately to the grid walk
    /// and to the contrast search; `null` disables the limit (use branch
    /// caps for deterministic runs).
    #[serde(default = "default_anchor_seconds")]
    pub anchor_max_seconds: Option<f64>,
    #[serde(default = "default_falsifier_samples")]
    pub falsifier_samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn strictly_increasing(v: &[f64]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut config: SweepConfig =
            serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.network = base.join(&config.network);
        config.dataset = base.join(&config.dataset);
        config.out_dir = base.join(&config.out_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if !strictly_increasing(&self.epsilons) {
            return Err(config_err("epsilons must be strictly increasing and non-empty"));
        }
        if !strictly_increasing(&self.betas) {
            return Err(config_err("betas must be strictly increasing and non-empty"));
        }
        if !strictly_increasing(&self.gammas)
            || self.gammas.iter().any(|g| *g <= 0.0 || *g > 1.0)
        {
            return Err(config_err(
                "gammas must be strictly increasing within (0, 1]",
            ));
        }
        if self.epsilons.iter().any(|e| *e < 0.0) || self.betas.iter().any(|b| *b < 0.0) {
            return Err(config_err("epsilon and beta values must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(config_err("mu must lie in [0, 1]"));
        }
        if self.query_budget.max_seconds <= 0.0 || self.query_budget.max_branches == 0 {
            return Err(config_err("query budget values must be positive"));
        }
        if let Some(s) = self.anchor_max_seconds {
            if s <= 0.0 {
                return Err(config_err("anchor_max_seconds must be positive"));
            }
        }
        if self.falsifier_samples == 0 {
            return Err(config_err("falsifier_samples must be at least 1"));
        }
        Ok(())
    }

    fn budget(&self) -> Result<Budget, ReportError> {
        Budget::new(
            self.query_budget.max_seconds,
            self.query_budget.max_branches,
        )
        .map_err(|e| config_err(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    /// The network classifies the anchor as a different class.
    Misclassified { predicted: usize },
    /// The anchor's top score ties with another class.
    Tied,
}

/// Everything recorded for one anchor of the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorResult {
    pub index: usize,
    pub label: usize,
    pub skipped: Option<SkipReason>,
    pub grid: Option<VerdictGrid>,
    pub contrast: Option<ContrastResult>,
}

/// Per-cell count block in the appendix-style summary tables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CellCounts {
    pub sat_total: usize,
    pub sat_verified: usize,
    pub sat_deduced: usize,
    pub sat_falsified: usize,
    pub unsat_total: usize,
    pub unsat_verified: usize,
    pub unsat_deduced: usize,
    pub unknown: usize,
}

impl CellCounts {
    fn add(&mut self, cell: &sweep::Cell) {
        use sweep::Provenance;
        match cell.status {
            CellStatus::Sat => {
                self.sat_total += 1;
                match cell.provenance {
                    Provenance::Verified => self.sat_verified += 1,
                    Provenance::Deduced => self.sat_deduced += 1,
                    Provenance::Falsified => self.sat_falsified += 1,
                }
            }
            CellStatus::Unsat => {
                self.unsat_total += 1;
                match cell.provenance {
                    Provenance::Verified | Provenance::Falsified => self.unsat_verified += 1,
                    Provenance::Deduced => self.unsat_deduced += 1,
                }
            }
            CellStatus::Unknown => self.unknown += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.sat_total + self.unsat_total + self.unknown
    }
}

/// Mean verifier wall time per cell and status.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TimingCell {
    pub sat_seconds: f64,
    pub sat_count: usize,
    pub unsat_seconds: f64,
    pub unsat_count: usize,
    pub unknown_seconds: f64,
    pub unknown_count: usize,
}

impl TimingCell {
    fn add(&mut self, status: CellStatus, wall: Duration) {
        let secs = wall.as_secs_f64();
        match status {
            CellStatus::Sat => {
                self.sat_seconds += secs;
                self.sat_count += 1;
            }
            CellStatus::Unsat => {
                self.unsat_seconds += secs;
                self.unsat_count += 1;
            }
            CellStatus::Unknown => {
                self.unknown_seconds += secs;
                self.unknown_count += 1;
            }
        }
    }
}

/// Aggregated sweep outcome across all anchors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub mu: f64,
    pub anchors_total: usize,
    pub anchors_analyzed: usize,
    pub anchors_skipped: usize,
    /// Percent of analyzed anchors UNSAT at each (beta, epsilon) cell,
    /// indexed `[beta][epsilon]`.
    pub grid_percent_unsat: Vec<Vec<f64>>,
    /// Percent of analyzed anchors UNSAT at each gamma.
    pub contrast_percent_unsat: Vec<f64>,
    pub grid_counts: Vec<Vec<CellCounts>>,
    pub contrast_counts: Vec<CellCounts>,
    pub grid_totals: SweepStats,
    pub contrast_totals: SweepStats,
    pub grid_timings: Vec<Vec<TimingCell>>,
    pub contrast_timings: Vec<TimingCell>,
    pub grid_verifier_calls: usize,
    pub contrast_verifier_calls: usize,
    /// Perturbed inputs are pure affine images of the anchors; no pixel
    /// clipping is applied anywhere in the pipeline.
    pub pixel_clipping: bool,
}

/// Aggregates loaded anchor results into the summary tables.
pub fn summarize(config: &SweepConfig, results: &[AnchorResult]) -> SweepSummary {
    let nb = config.betas.len();
    let ne = config.epsilons.len();
    let ng = config.gammas.len();

    let mut grid_counts = vec![vec![CellCounts::default(); ne]; nb];
    let mut contrast_counts = vec![CellCounts::default(); ng];
    let mut grid_timings = vec![vec![TimingCell::default(); ne]; nb];
    let mut contrast_timings = vec![TimingCell::default(); ng];
    let mut grid_totals = SweepStats::default();
    let mut contrast_totals = SweepStats::default();
    let mut grid_verifier_calls = 0;
    let mut contrast_verifier_calls = 0;
    let mut analyzed = 0;
    let mut skipped = 0;

    for result in results {
        if result.skipped.is_some() {
            skipped += 1;
            continue;
        }
        analyzed += 1;
        if let Some(grid) = &result.grid {
            grid_totals.merge(&stats(grid));
            grid_verifier_calls += grid.verifier_calls();
            for ((b, e), cell) in grid.cells() {
                grid_counts[b][e].add(cell);
            }
            for call in &grid.call_log {
                if call.kind == sweep::ProbeKind::Verifier {
                    grid_timings[call.beta_idx][call.eps_idx].add(call.status, call.wall);
                }
            }
        }
        if let Some(contrast) = &result.contrast {
            contrast_totals.merge(&contrast_stats(contrast));
            contrast_verifier_calls += contrast.verifier_calls();
            for (g, cell) in contrast.cells.iter().enumerate() {
                contrast_counts[g].add(cell);
            }
            for call in &contrast.call_log {
                if call.kind == sweep::ProbeKind::Verifier {
                    contrast_timings[call.beta_idx].add(call.status, call.wall);
                }
            }
        }
    }

    let percent = |unsat: usize| {
        if analyzed == 0 {
            0.0
        } else {
            100.0 * unsat as f64 / analyzed as f64
        }
    };
    let grid_percent_unsat = grid_counts
        .iter()
        .map(|col| col.iter().map(|c| percent(c.unsat_total)).collect())
        .collect();
    let contrast_percent_unsat = contrast_counts
        .iter()
        .map(|c| percent(c.unsat_total))
        .collect();

    SweepSummary {
        betas: config.betas.clone(),
        epsilons: config.epsilons.clone(),
        gammas: config.gammas.clone(),
        mu: config.mu,
        anchors_total: results.len(),
        anchors_analyzed: analyzed,
        anchors_skipped: skipped,
        grid_percent_unsat,
        contrast_percent_unsat,
        grid_counts,
        contrast_counts,
        grid_totals,
        contrast_totals,
        grid_timings,
        contrast_timings,
        grid_verifier_calls,
        contrast_verifier_calls,
        pixel_clipping: false,
    }
}

/// Writes `content` to `path` atomically (same-directory temp + rename).
pub(crate) fn write_atomic(path: &Path, content: &[u8]) -> Result<(), ReportError> {
    let dir = path.parent().ok_or_else(|| {
        ReportError::Internal(format!("no parent directory for {}", path.display()))
    })?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn anchor_path(out_dir: &Path, index: usize) -> PathBuf {
    out_dir.join("anchors").join(format!("anchor_{index:04}.json"))
}

fn anchor_seed(master: u64, index: usize) -> u64 {
    master ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(index as u64 + 1)
}

fn solve_anchor(
    config: &SweepConfig,
    net: &Network,
    params: &ParamGrid,
    budget: &Budget,
    index: usize,
    image: &Image,
    label: usize,
) -> Result<AnchorResult, ReportError> {
    if label >= net.output_dim() {
        return Err(ReportError::Config(format!(
            "anchor {index} has label {label} but the network has {} outputs",
            net.output_dim()
        )));
    }
    let predicted = net
        .classify(image.pixels())
        .map_err(|e| ReportError::Internal(e.to_string()))?;
    if predicted != label {
        return Ok(AnchorResult {
            index,
            label,
            skipped: Some(SkipReason::Misclassified { predicted }),
            grid: None,
            contrast: None,
        });
    }
    if !strictly_classified(net, image.pixels(), label)
        .map_err(|e| ReportError::Internal(e.to_string()))?
    {
        return Ok(AnchorResult {
            index,
            label,
            skipped: Some(SkipReason::Tied),
            grid: None,
            contrast: None,
        });
    }

    let deadline = |secs: Option<f64>| secs.map(|s| Instant::now() + Duration::from_secs_f64(s));
    let grid_opts = SweepOptions {
        falsifier_samples: config.falsifier_samples,
        seed: anchor_seed(config.seed, index),
        deadline: deadline(config.anchor_max_seconds),
    };
    let grid = sweep::incremental_grid(net, image, label, params, budget, grid_opts)
        .map_err(|e| ReportError::Internal(e.to_string()))?;

    // The contrast analysis gets its own wall-clock budget of the same size.
    let contrast_opts = SweepOptions {
        falsifier_samples: config.falsifier_samples,
        seed: anchor_seed(config.seed, index).wrapping_add(1),
        deadline: deadline(config.anchor_max_seconds),
    };
    let contrast = sweep::contrast_search(
        net,
        image,
        label,
        &config.gammas,
        config.mu,
        budget,
        contrast_opts,
    )
    .map_err(|e| ReportError::Internal(e.to_string()))?;

    Ok(AnchorResult {
        index,
        label,
        skipped: None,
        grid: Some(grid),
        contrast: Some(contrast),
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Anchor-level worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
    /// Reuse existing per-anchor result files instead of recomputing them.
    pub resume: bool,
}

/// Runs the full sweep described by `config`: per-anchor grids and contrast
/// searches, persisted under `out_dir`, plus summary JSON and CSV exports.
pub fn run(config: &SweepConfig, opts: &RunOptions) -> Result<SweepSummary, ReportError> {
    config.validate()?;
    let net = load_network_checked(&config.network)?;
    let dataset =
        ingest::load_manifest(&config.dataset).map_err(|e| config_err(e.to_string()))?;
    let params = ParamGrid::new(config.betas.clone(), config.epsilons.clone())
        .map_err(|e| config_err(e.to_string()))?;
    let budget = config.budget()?;

    std::fs::create_dir_all(config.out_dir.join("anchors"))?;
    write_atomic(
        &config.out_dir.join("config.json"),
        serde_json::to_string_pretty(config)
            .map_err(|e| ReportError::Internal(e.to_string()))?
            .as_bytes(),
    )?;

    let solve_one = |(index, (image, label)): (usize, &(Image, usize))| -> Result<AnchorResult, ReportError> {
        let path = anchor_path(&config.out_dir, index);
        if opts.resume && path.exists() {
            let text = std::fs::read_to_string(&path)?;
            if let Ok(result) = serde_json::from_str::<AnchorResult>(&text) {
                if result.index == index {
                    return Ok(result);
                }
            }
            // Unreadable or stale file: recompute below.
        }
        let result = solve_anchor(config, &net, &params, &budget, index, image, *label)?;
        let doc = serde_json::to_string(&result)
            .map_err(|e| ReportError::Internal(e.to_string()))?;
        write_atomic(&path, doc.as_bytes())?;
        Ok(result)
    };

    let indexed: Vec<(usize, &(Image, usize))> = dataset.iter().enumerate().collect();
    let results: Result<Vec<AnchorResult>, ReportError> = match opts.jobs {
        Some(1) => indexed.into_iter().map(solve_one).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ReportError::Internal(e.to_string()))?;
            pool.install(|| indexed.into_par_iter().map(solve_one).collect())
        }
        None => indexed.into_par_iter().map(solve_one).collect(),
    };
    let mut results = results?;
    results.sort_by_key(|r| r.index);

    let summary = summarize(config, &results);
    write_atomic(
        &config.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| ReportError::Internal(e.to_string()))?
            .as_bytes(),
    )?;
    export_csvs(&config.out_dir, &summary, &results)?;
    Ok(summary)
}

/// Loads the network, mapping content errors to config errors and missing
/// files to i/o errors.
fn load_network_checked(path: &Path) -> Result<Network, ReportError> {
    match nn::load_network(path) {
        Ok(net) => Ok(net),
        Err(nn::NetworkError::Io(e)) => Err(ReportError::Io(e)),
        Err(e) => Err(config_err(format!("network {}: {e}", path.display()))),
    }
}

/// Outcome of a falsifier-only pass: attack hits per grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSummary {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub anchors_total: usize,
    pub anchors_attacked: usize,
    /// Hits per cell, indexed `[beta][epsilon]`.
    pub hits: Vec<Vec<usize>>,
}

/// Falsifier-only sweep: runs the sampling attack on every grid cell of
/// every strictly classified anchor, with no verifier calls. Writes
/// `attack_grid.csv` into the output directory.
pub fn attack_run(config: &SweepConfig, opts: &RunOptions) -> Result<AttackSummary, ReportError> {
    config.validate()?;
    let net = load_network_checked(&config.network)?;
    let dataset =
        ingest::load_manifest(&config.dataset).map_err(|e| config_err(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir)?;

    let nb = config.betas.len();
    let ne = config.epsilons.len();
    let attack_one = |(index, (image, label)): (usize, &(Image, usize))| -> Option<Vec<Vec<bool>>> {
        if net.classify(image.pixels()).ok()? != *label
            || !strictly_classified(&net, image.pixels(), *label).ok()?
        {
            return None;
        }
        let seed = anchor_seed(config.seed, index);
        let mut found = vec![vec![false; ne]; nb];
        for (b, beta) in config.betas.iter().enumerate() {
            for (e, eps) in config.epsilons.iter().enumerate() {
                if *beta == 0.0 && *eps == 0.0 {
                    continue; // strictly classified: the point query is safe
                }
                let Ok(query) = sweep::cell_query(&net, image, *label, *beta, *eps) else {
                    continue;
                };
                let report = crate::falsify::validated_attack(
                    &query,
                    config.falsifier_samples,
                    seed.wrapping_add((b * ne + e) as u64),
                );
                found[b][e] = report.found.is_some();
            }
        }
        Some(found)
    };

    let indexed: Vec<(usize, &(Image, usize))> = dataset.iter().enumerate().collect();
    let per_anchor: Vec<Option<Vec<Vec<bool>>>> = match opts.jobs {
        Some(1) => indexed.into_iter().map(attack_one).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ReportError::Internal(e.to_string()))?;
            pool.install(|| indexed.into_par_iter().map(attack_one).collect())
        }
        None => indexed.into_par_iter().map(attack_one).collect(),
    };

    let mut hits = vec![vec![0usize; ne]; nb];
    let mut attacked = 0;
    for grid in per_anchor.iter().flatten() {
        attacked += 1;
        for (b, row) in grid.iter().enumerate() {
            for (e, hit) in row.iter().enumerate() {
                if *hit {
                    hits[b][e] += 1;
                }
            }
        }
    }

    let mut csv = String::from("eps,beta,hits,anchors_attacked,percent_found\n");
    for (e, eps) in config.epsilons.iter().enumerate() {
        for (b, beta) in config.betas.iter().enumerate() {
            let pct = if attacked == 0 {
                0.0
            } else {
                100.0 * hits[b][e] as f64 / attacked as f64
            };
            csv.push_str(&format!("{eps},{beta},{},{attacked},{pct:.2}\n", hits[b][e]));
        }
    }
    write_atomic(&config.out_dir.join("attack_grid.csv"), csv.as_bytes())?;

    Ok(AttackSummary {
        betas: config.betas.clone(),
        epsilons: config.epsilons.clone(),
        anchors_total: dataset.len(),
        anchors_attacked: attacked,
        hits,
    })
}

/// Reads the config snapshot and per-anchor results back from an output
/// directory (for `summarize` / `export` runs).
pub fn load_results(out_dir: &Path) -> Result<(SweepConfig, Vec<AnchorResult>), ReportError> {
    let config_text = std::fs::read_to_string(out_dir.join("config.json"))?;
    let config: SweepConfig =
        serde_json::from_str(&config_text).map_err(|e| config_err(e.to_string()))?;
    let anchors_dir = out_dir.join("anchors");
    let mut results = Vec::new();
    if anchors_dir.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&anchors_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)?;
            let result: AnchorResult = serde_json::from_str(&text).map_err(|e| {
                ReportError::Config(format!("bad anchor file {}: {e}", path.display()))
            })?;
            results.push(result);
        }
    }
    results.sort_by_key(|r| r.index);
    Ok((config, results))
}
