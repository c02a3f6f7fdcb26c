//! Result export: CSV traces and JSON summaries for one run.
//!
//! All numeric formatting goes through Rust's shortest-roundtrip `Display`
//! for `f64`, so identical runs produce byte-identical files. Infinite dB
//! values print as `inf`/`-inf` (an aggregate of zero interferers has
//! `-inf` dB INR).

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coexsim_core::engine::{ExtraUser, RunOutput, World};
use coexsim_core::lin_to_db;
use coexsim_core::metrics::{empirical_cdf, utilization, violation_rate};
use coexsim_core::orbits::SystemTag;
use serde::Serialize;

use crate::scenario::Scenario;

/// Per-run summary written as `summary.json`. Threshold fields are strings
/// because `inf` is not a JSON number.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub mode: String,
    pub policy_primary: String,
    pub policy_secondary: String,
    pub n_beams: u32,
    pub slot_s: f64,
    pub duration_s: f64,
    pub slots: usize,
    pub horizon_slots: usize,
    pub window_slots: usize,
    pub inr_avg_th_db: String,
    pub inr_max_th_db: String,
    pub primary_sats: usize,
    pub secondary_sats: usize,
    pub clusters: usize,
    pub cells_per_cluster: usize,
    pub extra_users: usize,
    pub windows: usize,
    pub fully_feasible_windows: usize,
    pub clean_windows: usize,
    /// Mean over slots of the fraction of tracked primary users whose
    /// instantaneous INR exceeds each threshold.
    pub violation_rate_avg_th: f64,
    pub violation_rate_max_th: f64,
    pub utilization_primary: f64,
    pub utilization_secondary: f64,
}

#[derive(Debug, Serialize)]
struct DiagRow {
    t_s: f64,
    dual_bound: f64,
    primal_value: f64,
    iterations: usize,
    converged: bool,
    fully_feasible: bool,
    effective_avg_th_lin: f64,
    outage_clusters: Vec<usize>,
    /// Selected secondary satellite per cluster; -1 for outage.
    selected: Vec<i64>,
}

/// Prepares the output directory, refusing to touch an existing one unless
/// `overwrite` is set.
pub fn prepare_out_dir(out_dir: &Path, overwrite: bool) -> Result<()> {
    if out_dir.exists() {
        if !overwrite {
            bail!(
                "output directory {} exists; pass --overwrite to replace it",
                out_dir.display()
            );
        }
        fs::remove_dir_all(out_dir)
            .with_context(|| format!("clearing {}", out_dir.display()))?;
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    Ok(())
}

fn writer(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writes every result file for one run and returns the summary.
pub fn export_run(
    out_dir: &Path,
    scenario: &Scenario,
    world: &World,
    run: &RunOutput,
    extras: &[ExtraUser],
) -> Result<Summary> {
    write_association(&out_dir.join("association.csv"), run)?;
    write_violations(&out_dir.join("violations.csv"), run)?;
    write_violation_rate(&out_dir.join("violation_rate.csv"), scenario, run)?;
    write_per_user_violation(&out_dir.join("per_user_violation.csv"), scenario, run)?;
    write_utilization(&out_dir.join("utilization.csv"), world, run)?;
    write_inr_cdf(&out_dir.join("inr_cdf.csv"), run, extras)?;
    if run.snr_primary.is_some() {
        write_link_trace(&out_dir.join("link_trace.csv"), run)?;
    }
    write_diagnostics(&out_dir.join("solver_diagnostics.json"), run)?;

    let summary = build_summary(scenario, world, run, extras);
    let path = out_dir.join("summary.json");
    let mut w = writer(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary).context("serializing summary")?;
    writeln!(w)?;
    w.flush()?;
    Ok(summary)
}

fn write_association(path: &PathBuf, run: &RunOutput) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "time_s,system,cluster,sat_id")?;
    for slot in 0..run.slots {
        let t = slot as f64 * run.slot_s;
        for assoc in [&run.assoc_primary[slot], &run.assoc_secondary[slot]] {
            for (cluster, serving) in assoc.serving.iter().enumerate() {
                let sat = serving.map_or(-1, |s| s as i64);
                writeln!(w, "{t},{},{cluster},{sat}", assoc.system.label())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_violations(path: &PathBuf, run: &RunOutput) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "handover_t,user_id,avg_inr_db,max_inr_db,avg_violated,abs_violated")?;
    for (wi, report) in run.window_reports.iter().enumerate() {
        let t = run.handover_slots[wi] as f64 * run.slot_s;
        for u in 0..report.avg_inr_lin.len() {
            writeln!(
                w,
                "{t},{u},{},{},{},{}",
                lin_to_db(report.avg_inr_lin[u]),
                lin_to_db(report.max_inr_lin[u]),
                report.avg_violated[u] as u8,
                report.abs_violated[u] as u8,
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Instantaneous INR of every tracked primary user as a ragged slot-major
/// trace, linear. Violation rates count the whole tracked population each
/// slot, not just the users receiving a beam at that instant.
fn tracked_primary_trace(run: &RunOutput) -> Vec<Vec<f64>> {
    run.inr_primary
        .iter()
        .zip(&run.link_primary)
        .map(|(row, mask)| {
            row.iter().zip(mask).filter(|(_, &l)| l).map(|(&v, _)| v).collect()
        })
        .collect()
}

fn write_violation_rate(path: &PathBuf, scenario: &Scenario, run: &RunOutput) -> Result<()> {
    let trace = tracked_primary_trace(run);
    let p = &scenario.file.protection;
    let mut w = writer(path)?;
    writeln!(w, "system,threshold_db,violation_rate")?;
    for th_db in [p.inr_avg_th_db, p.inr_max_th_db] {
        let rate = violation_rate(&trace, coexsim_core::db_to_lin(th_db));
        writeln!(w, "primary,{th_db},{rate}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_per_user_violation(path: &PathBuf, scenario: &Scenario, run: &RunOutput) -> Result<()> {
    let users = run.users.len();
    let max_th_lin = coexsim_core::db_to_lin(scenario.file.protection.inr_max_th_db);
    let frac = coexsim_core::metrics::per_user_violation(&run.inr_primary, users, max_th_lin);
    let mut w = writer(path)?;
    writeln!(w, "system,user_id,cluster,cell,fraction_above_max_th")?;
    for (u, f) in frac.iter().enumerate() {
        let r = run.users[u];
        writeln!(w, "primary,{u},{},{},{f}", r.cluster, r.cell)?;
    }
    w.flush()?;
    Ok(())
}

fn write_utilization(path: &PathBuf, world: &World, run: &RunOutput) -> Result<()> {
    let n = world.grid.num_clusters();
    let mut w = writer(path)?;
    writeln!(w, "system,mean_utilization")?;
    writeln!(w, "primary,{}", utilization(&run.served_primary, n))?;
    writeln!(w, "secondary,{}", utilization(&run.served_secondary, n))?;
    w.flush()?;
    Ok(())
}

/// INR observations in dB, restricted to slots where the user was actually
/// receiving (its cell beamformed), which is when interference is sampled.
fn cdf_samples(inr: &[Vec<f64>], active: &[Vec<bool>], pick: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut out = Vec::new();
    for (row, mask) in inr.iter().zip(active) {
        for (u, (&v, &a)) in row.iter().zip(mask).enumerate() {
            if a && pick(u) {
                out.push(lin_to_db(v));
            }
        }
    }
    out
}

fn write_inr_cdf(path: &PathBuf, run: &RunOutput, extras: &[ExtraUser]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "system,user_kind,inr_db,cdf")?;
    let mut emit = |system: &str, kind: &str, samples: &[f64]| -> Result<()> {
        for (x, f) in empirical_cdf(samples) {
            writeln!(w, "{system},{kind},{x},{f}")?;
        }
        Ok(())
    };
    emit(
        "primary",
        "cell_center",
        &cdf_samples(&run.inr_primary, &run.active_primary, |_| true),
    )?;
    emit(
        "secondary",
        "cell_center",
        &cdf_samples(&run.inr_secondary, &run.active_secondary, |_| true),
    )?;
    for (label, tag) in [("primary", SystemTag::Primary), ("secondary", SystemTag::Secondary)] {
        let samples = cdf_samples(&run.extra_inr, &run.extra_active, |u| {
            extras[u].system == tag
        });
        emit(label, "extra", &samples)?;
    }
    w.flush()?;
    Ok(())
}

fn write_link_trace(path: &PathBuf, run: &RunOutput) -> Result<()> {
    let (Some(snr_p), Some(snr_s)) = (&run.snr_primary, &run.snr_secondary) else {
        bail!("link trace requested but SNR was not recorded");
    };
    let mut w = writer(path)?;
    writeln!(w, "time_s,user_id,system,snr_db,inr_db,sinr_db")?;
    for slot in 0..run.slots {
        let t = slot as f64 * run.slot_s;
        let mut emit = |system: &str,
                        snr: &Vec<Vec<f64>>,
                        inr: &Vec<Vec<f64>>,
                        active: &Vec<Vec<bool>>|
         -> Result<()> {
            for u in 0..inr[slot].len() {
                if !active[slot][u] {
                    continue;
                }
                let snr_lin = snr[slot][u];
                let inr_lin = inr[slot][u];
                let sinr = coexsim_core::linkbudget::link_sinr_lin(snr_lin, inr_lin);
                writeln!(
                    w,
                    "{t},{u},{system},{},{},{}",
                    lin_to_db(snr_lin),
                    lin_to_db(inr_lin),
                    lin_to_db(sinr)
                )?;
            }
            Ok(())
        };
        emit("primary", snr_p, &run.inr_primary, &run.active_primary)?;
        emit("secondary", snr_s, &run.inr_secondary, &run.active_secondary)?;
    }
    w.flush()?;
    Ok(())
}

fn write_diagnostics(path: &PathBuf, run: &RunOutput) -> Result<()> {
    let rows: Vec<DiagRow> = run
        .diagnostics
        .iter()
        .map(|d| DiagRow {
            t_s: d.t_s,
            dual_bound: d.dual_bound,
            primal_value: d.primal_value,
            iterations: d.iterations,
            converged: d.converged,
            fully_feasible: d.fully_feasible,
            effective_avg_th_lin: d.effective_avg_th_lin,
            outage_clusters: d.outage_clusters.clone(),
            selected: d.selected.iter().map(|s| s.map_or(-1, |v| v as i64)).collect(),
        })
        .collect();
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, &rows).context("serializing diagnostics")?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn build_summary(
    scenario: &Scenario,
    world: &World,
    run: &RunOutput,
    extras: &[ExtraUser],
) -> Summary {
    let f = &scenario.file;
    let trace = tracked_primary_trace(run);
    let n = world.grid.num_clusters();
    Summary {
        name: f.name.clone(),
        seed: f.seed,
        mode: f.mode.label().to_string(),
        policy_primary: f.primary.policy.label().to_string(),
        policy_secondary: f.secondary.policy.label().to_string(),
        n_beams: f.beams.count,
        slot_s: f.slot_s,
        duration_s: f.duration_s,
        slots: run.slots,
        horizon_slots: scenario.horizon_slots(),
        window_slots: scenario.window_slots(),
        inr_avg_th_db: f.protection.inr_avg_th_db.to_string(),
        inr_max_th_db: f.protection.inr_max_th_db.to_string(),
        primary_sats: world.primary.len(),
        secondary_sats: world.secondary.len(),
        clusters: n,
        cells_per_cluster: coexsim_core::association::CELLS_PER_CLUSTER,
        extra_users: extras.len(),
        windows: run.window_reports.len(),
        fully_feasible_windows: run.diagnostics.iter().filter(|d| d.fully_feasible).count(),
        clean_windows: run.window_reports.iter().filter(|r| r.clean()).count(),
        violation_rate_avg_th: violation_rate(
            &trace,
            coexsim_core::db_to_lin(f.protection.inr_avg_th_db),
        ),
        violation_rate_max_th: violation_rate(
            &trace,
            coexsim_core::db_to_lin(f.protection.inr_max_th_db),
        ),
        utilization_primary: utilization(&run.served_primary, n),
        utilization_secondary: utilization(&run.served_secondary, n),
    }
}

/// Writes propagated satellite positions, one row per satellite per sample
/// time: `time_s,sat_id,system,x_m,y_m,z_m`.
pub fn write_positions<W: Write>(
    mut w: W,
    world: &World,
    t0_s: f64,
    step_s: f64,
    samples: usize,
) -> Result<()> {
    writeln!(w, "time_s,sat_id,system,x_m,y_m,z_m")?;
    for k in 0..samples {
        let t = t0_s + k as f64 * step_s;
        for c in [&world.primary, &world.secondary] {
            for sat in 0..c.len() {
                let s = c.state_at(sat, t, world.earth_rotation);
                writeln!(
                    w,
                    "{t},{sat},{},{},{},{}",
                    c.tag.label(),
                    s.pos_m.x,
                    s.pos_m.y,
                    s.pos_m.z
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes antenna gain samples: `theta_deg,tx_gain_dbi,rx_gain_dbi`.
pub fn write_pattern<W: Write>(mut w: W, world: &World, step_deg: f64) -> Result<()> {
    if !(step_deg > 0.0) {
        bail!("pattern step must be positive, got {step_deg}");
    }
    writeln!(w, "theta_deg,tx_gain_dbi,rx_gain_dbi")?;
    let mut k = 0u64;
    loop {
        let theta = (k as f64 * step_deg).min(180.0);
        writeln!(w, "{theta},{},{}", world.env.tx.gain_dbi(theta), world.env.rx.gain_dbi(theta))?;
        if theta >= 180.0 {
            break;
        }
        k += 1;
    }
    w.flush()?;
    Ok(())
}
