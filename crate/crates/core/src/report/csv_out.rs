//! CSV layouts for sweep outputs.
//!
//! The grid CSVs put epsilon rows in descending order and beta columns in
//! ascending order (heatmap orientation); parameter values are rendered
//! with Rust's shortest round-trip float formatting, so headers repeat the
//! config values verbatim. Wall-clock data lives only in `timings.csv`,
//! keeping every other CSV byte-identical across reruns.

use super::{AnchorResult, ReportError, SweepSummary};
use crate::sweep::{CellStatus, Provenance, VerdictGrid};
use std::path::Path;

fn fmt_status(status: CellStatus) -> &'static str {
    match status {
        CellStatus::Sat => "SAT",
        CellStatus::Unsat => "UNSAT",
        CellStatus::Unknown => "UNKNOWN",
    }
}

fn fmt_provenance(p: Provenance) -> &'static str {
    match p {
        Provenance::Verified => "Verified",
        Provenance::Deduced => "Deduced",
        Provenance::Falsified => "Falsified",
    }
}

fn parse_status(s: &str) -> Option<CellStatus> {
    match s {
        "SAT" => Some(CellStatus::Sat),
        "UNSAT" => Some(CellStatus::Unsat),
        "UNKNOWN" => Some(CellStatus::Unknown),
        _ => None,
    }
}

fn parse_provenance(s: &str) -> Option<Provenance> {
    match s {
        "Verified" => Some(Provenance::Verified),
        "Deduced" => Some(Provenance::Deduced),
        "Falsified" => Some(Provenance::Falsified),
        _ => None,
    }
}

/// One anchor grid as CSV: `eps\beta` header, epsilon rows descending,
/// `STATUS:Provenance` cells.
pub fn grid_csv_string(grid: &VerdictGrid) -> String {
    let mut out = String::from("eps\\beta");
    for beta in &grid.betas {
        out.push(',');
        out.push_str(&beta.to_string());
    }
    out.push('\n');
    for e in (0..grid.num_epsilons()).rev() {
        out.push_str(&grid.epsilons[e].to_string());
        for b in 0..grid.num_betas() {
            let cell = grid.cell(b, e);
            out.push(',');
            out.push_str(fmt_status(cell.status));
            out.push(':');
            out.push_str(fmt_provenance(cell.provenance));
        }
        out.push('\n');
    }
    out
}

/// Parses a per-anchor grid CSV back into `(eps, beta, status, provenance)`
/// tuples; the exact inverse of [`grid_csv_string`] for round-trip checks.
pub fn parse_grid_csv(
    text: &str,
) -> Result<Vec<(f64, f64, CellStatus, Provenance)>, ReportError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ReportError::Config("empty grid CSV".into()))?;
    let betas: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ReportError::Config(format!("bad beta header field {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let eps: f64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ReportError::Config("bad epsilon row label".into()))?;
        for (beta, field) in betas.iter().zip(fields) {
            let (status, provenance) = field
                .split_once(':')
                .and_then(|(s, p)| Some((parse_status(s)?, parse_provenance(p)?)))
                .ok_or_else(|| ReportError::Config(format!("bad cell {field:?}")))?;
            cells.push((eps, *beta, status, provenance));
        }
    }
    Ok(cells)
}

fn percent_grid_csv(summary: &SweepSummary) -> String {
    let mut out = String::from("eps\\beta");
    for beta in &summary.betas {
        out.push(',');
        out.push_str(&beta.to_string());
    }
    out.push('\n');
    for e in (0..summary.epsilons.len()).rev() {
        out.push_str(&summary.epsilons[e].to_string());
        for b in 0..summary.betas.len() {
            out.push_str(&format!(",{:.2}", summary.grid_percent_unsat[b][e]));
        }
        out.push('\n');
    }
    out
}

fn contrast_percent_csv(summary: &SweepSummary) -> String {
    let mut out = String::from("gamma,percent_unsat\n");
    for (gamma, pct) in summary.gammas.iter().zip(&summary.contrast_percent_unsat) {
        out.push_str(&format!("{gamma},{pct:.2}\n"));
    }
    out
}

fn grid_counts_csv(summary: &SweepSummary) -> String {
    let mut out = String::from(
        "eps,beta,sat_total,sat_verified,sat_deduced,sat_falsified,\
         unsat_total,unsat_verified,unsat_deduced,unknown\n",
    );
    for (e, eps) in summary.epsilons.iter().enumerate() {
        for (b, beta) in summary.betas.iter().enumerate() {
            let c = &summary.grid_counts[b][e];
            out.push_str(&format!(
                "{eps},{beta},{},{},{},{},{},{},{},{}\n",
                c.sat_total,
                c.sat_verified,
                c.sat_deduced,
                c.sat_falsified,
                c.unsat_total,
                c.unsat_verified,
                c.unsat_deduced,
                c.unknown
            ));
        }
    }
    out
}

fn contrast_counts_csv(summary: &SweepSummary) -> String {
    let mut out = String::from(
        "gamma,sat_total,sat_verified,sat_deduced,sat_falsified,\
         unsat_total,unsat_verified,unsat_deduced,unknown\n",
    );
    for (g, gamma) in summary.gammas.iter().enumerate() {
        let c = &summary.contrast_counts[g];
        out.push_str(&format!(
            "{gamma},{},{},{},{},{},{},{},{}\n",
            c.sat_total,
            c.sat_verified,
            c.sat_deduced,
            c.sat_falsified,
            c.unsat_total,
            c.unsat_verified,
            c.unsat_deduced,
            c.unknown
        ));
    }
    out
}

fn timings_csv(summary: &SweepSummary) -> String {
    let mut out = String::from("kind,eps,beta,gamma,status,mean_seconds,count\n");
    let mean = |total: f64, count: usize| if count == 0 { 0.0 } else { total / count as f64 };
    for (e, eps) in summary.epsilons.iter().enumerate() {
        for (b, beta) in summary.betas.iter().enumerate() {
            let t = &summary.grid_timings[b][e];
            for (status, total, count) in [
                ("SAT", t.sat_seconds, t.sat_count),
                ("UNSAT", t.unsat_seconds, t.unsat_count),
                ("UNKNOWN", t.unknown_seconds, t.unknown_count),
            ] {
                if count > 0 {
                    out.push_str(&format!(
                        "grid,{eps},{beta},,{status},{:.6},{count}\n",
                        mean(total, count)
                    ));
                }
            }
        }
    }
    for (g, gamma) in summary.gammas.iter().enumerate() {
        let t = &summary.contrast_timings[g];
        for (status, total, count) in [
            ("SAT", t.sat_seconds, t.sat_count),
            ("UNSAT", t.unsat_seconds, t.unsat_count),
            ("UNKNOWN", t.unknown_seconds, t.unknown_count),
        ] {
            if count > 0 {
                out.push_str(&format!(
                    "contrast,,,{gamma},{status},{:.6},{count}\n",
                    mean(total, count)
                ));
            }
        }
    }
    out
}

/// Writes every CSV artifact for a completed sweep into `out_dir`.
pub fn export_csvs(
    out_dir: &Path,
    summary: &SweepSummary,
    results: &[AnchorResult],
) -> Result<(), ReportError> {
    let grids_dir = out_dir.join("grids");
    std::fs::create_dir_all(&grids_dir)?;
    for result in results {
        if let Some(grid) = &result.grid {
            let path = grids_dir.join(format!("anchor_{:04}.csv", result.index));
            super::write_atomic(&path, grid_csv_string(grid).as_bytes())?;
        }
    }
    super::write_atomic(
        &out_dir.join("grid_percent_unsat.csv"),
        percent_grid_csv(summary).as_bytes(),
    )?;
    super::write_atomic(
        &out_dir.join("contrast_percent_unsat.csv"),
        contrast_percent_csv(summary).as_bytes(),
    )?;
    super::write_atomic(
        &out_dir.join("grid_counts.csv"),
        grid_counts_csv(summary).as_bytes(),
    )?;
    super::write_atomic(
        &out_dir.join("contrast_counts.csv"),
        contrast_counts_csv(summary).as_bytes(),
    )?;
    super::write_atomic(&out_dir.join("timings.csv"), timings_csv(summary).as_bytes())?;
    Ok(())
}
