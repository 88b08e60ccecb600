//! Run reports: the JSON summary written next to `diagnostics.csv`.
//!
//! The schema is versioned and reads reject unknown fields, so stale
//! tooling fails loudly instead of silently misreading.

use crate::field::ScalarField;
use crate::flow::{extract_b, fit_w_bound, FlowConfig, Termination, Trajectory};
use crate::functionals::{
    fit_decay, harnack_check, oscillation_contraction, DecayFit, HarnackReport,
};
use crate::operator::{invariant_c, mixed_volume, ProblemData};
use crate::util::linear_fit;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const REPORT_VERSION: u32 = 1;

/// Per-step maximum-principle slack. The paper's bound says the extrema of
/// `∂u/∂t` sit at `t = 0`; the discrete check allows this much per step.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-8;
/// Discrete `dJ/dt` tolerance per row.
pub const J_MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxPrincipleReport {
    pub sup_slack: f64,
    pub inf_slack: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JMonotonicityReport {
    /// Largest discrete `dJ/dt` over consecutive rows.
    pub max_discrete_dj_dt: f64,
    /// Largest `J` over rows with `t > 0`.
    pub max_j_after_start: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WBoundFit {
    pub c: f64,
    pub a: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HatBoundReport {
    /// Smallest `sup û` over rows (expected ≥ 0).
    pub min_sup_hat: f64,
    /// Fitted constants of `sup û ≤ −C₁·inf û + C₂` (descriptive).
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackMeasurement {
    /// Unit-interval index `m`.
    pub m: u32,
    /// `"xi"` (drop from the earlier sup) or `"eta"` (rise from the
    /// earlier inf).
    pub kind: String,
    #[serde(flatten)]
    pub report: HarnackReport,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub version: u32,
    pub termination: Termination,
    pub t_final: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rejection_rate: f64,
    pub final_osc_f: f64,
    pub invariant_c: f64,
    pub psi_geq_c: bool,
    pub b: Option<f64>,
    pub residual: Option<f64>,
    pub decay_fit: Option<DecayFit>,
    pub oscillation_contraction: Vec<(u32, f64)>,
    pub w_bound_fit: Option<WBoundFit>,
    pub max_principle: MaxPrincipleReport,
    pub j_monotonicity: Option<JMonotonicityReport>,
    pub hat_bound: Option<HatBoundReport>,
    pub harnack: Vec<HarnackMeasurement>,
    /// Optional Lemma-5.2-style measurement `sup(|∂ln φ|²_G − β ∂_t ln φ)`
    /// on the first positive Harnack pair, β = 1.5.
    pub gradient_monitor: Option<f64>,
}

/// Assemble the report from a finished trajectory.
pub fn build_report(
    data: &ProblemData,
    traj: &Trajectory,
    cfg: &FlowConfig,
) -> Result<RunReport> {
    let c = invariant_c(data)?;
    let psi_geq_c = data.psi().inf() >= c - 1e-12;

    let (b, residual) = match extract_b(traj, data, cfg.tol_osc) {
        Ok((b, r)) => (Some(b), Some(r)),
        Err(_) => (None, None),
    };

    let floor = traj.osc_noise_floor();
    let decay = fit_decay(&traj.osc_f_samples(), floor).ok();
    let contraction = oscillation_contraction(&traj.osc_f_samples(), floor).unwrap_or_default();

    let w_fit = fit_w_bound(&traj.w_samples).map(|(c, a)| WBoundFit { c, a });

    let max_principle = MaxPrincipleReport {
        sup_slack: traj.sup_f_slack,
        inf_slack: traj.inf_f_slack,
        passed: traj.sup_f_slack <= MAX_PRINCIPLE_SLACK && traj.inf_f_slack <= MAX_PRINCIPLE_SLACK,
    };

    // J monotonicity is a theorem only under ψ ≥ c (Kähler setting); the
    // report computes it whenever the hypothesis holds.
    let j_monotonicity = if psi_geq_c {
        let mut max_dj = f64::NEG_INFINITY;
        let mut max_j = f64::NEG_INFINITY;
        for w in traj.rows.windows(2) {
            let dt = w[1].t - w[0].t;
            if dt > 0.0 {
                max_dj = max_dj.max((w[1].j_alpha - w[0].j_alpha) / dt);
            }
        }
        for r in traj.rows.iter().filter(|r| r.t > 0.0) {
            max_j = max_j.max(r.j_alpha);
        }
        Some(JMonotonicityReport {
            max_discrete_dj_dt: max_dj,
            max_j_after_start: max_j,
            passed: max_dj <= J_MONOTONE_SLACK && max_j <= 1e-10,
        })
    } else {
        None
    };

    // û-row statistics: û = u − J/∫χ^{n-α}∧ω^α shifts sup/inf by a row
    // constant.
    let hat_bound = {
        let denom = mixed_volume(data)?;
        let sup_hats: Vec<f64> =
            traj.rows.iter().map(|r| r.sup_u - r.j_alpha / denom).collect();
        let neg_inf_hats: Vec<f64> =
            traj.rows.iter().map(|r| -(r.inf_u - r.j_alpha / denom)).collect();
        if sup_hats.len() >= 2 {
            let (intercept, slope, _) = linear_fit(&neg_inf_hats, &sup_hats);
            let c1 = slope.max(0.0);
            let c2 = sup_hats
                .iter()
                .zip(&neg_inf_hats)
                .map(|(&s, &ni)| s - c1 * ni)
                .fold(f64::NEG_INFINITY, f64::max)
                .max(intercept);
            let min_sup = sup_hats.iter().copied().fold(f64::INFINITY, f64::min);
            Some(HatBoundReport { min_sup_hat: min_sup, c1, c2 })
        } else {
            None
        }
    };

    let harnack = harnack_measurements(traj);

    let gradient_monitor = gradient_monitor(data, traj).ok().flatten();

    Ok(RunReport {
        version: REPORT_VERSION,
        termination: traj.termination,
        t_final: traj.final_state.t,
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        rejection_rate: if traj.accepted_steps > 0 {
            traj.rejected_steps as f64 / (traj.accepted_steps + traj.rejected_steps) as f64
        } else {
            0.0
        },
        final_osc_f: traj.rows.last().map_or(f64::NAN, |r| r.osc_f),
        invariant_c: c,
        psi_geq_c,
        b,
        residual,
        decay_fit: decay,
        oscillation_contraction: contraction,
        w_bound_fit: w_fit,
        max_principle,
        j_monotonicity,
        hat_bound,
        harnack,
        gradient_monitor,
    })
}

/// Harnack measurements on `ξ_m = sup φ(m-1) − φ(m-1+t)` and
/// `η_m = φ(m-1+t) − inf φ(m-1)` with `(t₁, t₂) = (1/2, 1)`, following the
/// contraction argument. Pairs whose fields fail positivity (constant
/// velocity) are skipped.
fn harnack_measurements(traj: &Trajectory) -> Vec<HarnackMeasurement> {
    let mut out = Vec::new();
    let sample_near = |t: f64| -> Option<&ScalarField> {
        traj.harnack_samples
            .iter()
            .min_by(|a, b| {
                (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap()
            })
            .filter(|(ts, _)| (ts - t).abs() <= 0.26)
            .map(|(_, f)| f)
    };
    let mut m = 1u32;
    loop {
        let base_t = (m - 1) as f64;
        let (Some(base), Some(half), Some(full)) = (
            sample_near(base_t),
            sample_near(base_t + 0.5),
            sample_near(base_t + 1.0),
        ) else {
            break;
        };
        let sup0 = base.sup();
        let inf0 = base.inf();
        let xi1 = half.map(|v| sup0 - v);
        let xi2 = full.map(|v| sup0 - v);
        if let Ok(rep) = harnack_check(&xi1, &xi2, 0.5, 1.0, (0.0, 0.0, 0.0)) {
            out.push(HarnackMeasurement { m, kind: "xi".into(), report: rep });
        }
        let eta1 = half.map(|v| v - inf0);
        let eta2 = full.map(|v| v - inf0);
        if let Ok(rep) = harnack_check(&eta1, &eta2, 0.5, 1.0, (0.0, 0.0, 0.0)) {
            out.push(HarnackMeasurement { m, kind: "eta".into(), report: rep });
        }
        m += 1;
        if m > 32 {
            break;
        }
    }
    out
}

/// `sup(|∂ln η|²_G − β ∂_t ln η)` on the first positive η pair, with the
/// diffusion form at the final state and β = 1.5.
fn gradient_monitor(data: &ProblemData, traj: &Trajectory) -> Result<Option<f64>> {
    if traj.harnack_samples.len() < 3 {
        return Ok(None);
    }
    let (t0, base) = &traj.harnack_samples[0];
    let (t1, a) = &traj.harnack_samples[1];
    let (t2, b) = &traj.harnack_samples[2];
    let _ = t0;
    let inf0 = base.inf();
    let eta_a = a.map(|v| v - inf0);
    let eta_b = b.map(|v| v - inf0);
    if eta_a.inf() <= 0.0 || eta_b.inf() <= 0.0 {
        return Ok(None);
    }
    let gform = crate::operator::diffusion_form(data, &traj.final_state.u)?;
    let val = crate::functionals::gradient_time_monitor(
        &eta_a,
        &eta_b,
        *t1,
        *t2,
        &gform,
        data.spectral(),
        1.5,
    )?;
    Ok(Some(val))
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let json = serde_json::to_vec_pretty(report)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let bytes = std::fs::read(path)?;
    let report: RunReport = serde_json::from_slice(&bytes)?;
    if report.version != REPORT_VERSION {
        return Err(Error::ReportVersion { got: report.version, expected: REPORT_VERSION });
    }
    Ok(report)
}
