//! Time integration of the flow `∂u/∂t = F(u)` with runtime monitors.
//!
//! Classical RK4 with step rejection: a step whose result (or any internal
//! stage) leaves the admissible cone is rejected, the step halved and
//! retried; admissibility is thereby preserved by construction and the
//! rejection count is itself a diagnostic. The step size comes from the
//! parabolic stability bound `dt = safety·h²/(4n·Λ)` with `Λ` the largest
//! diffusion eigenvalue of the linearization. `u` is never renormalized
//! during stepping — the normalizations `ũ` (mean-zero against `ω^n`) and
//! `û` (J-functional gauge) are views.

use crate::field::{integrate, HermitianField, ScalarField};
use crate::functionals::j_alpha_closed;
use crate::operator::{chi_u_into, mixed_volume, rhs_from_x, ProblemData, RhsStats};
use crate::spectral::HessianScratch;
use crate::util::{argmax, linear_fit};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// One instant of the flow with cached operator data.
pub struct FlowState {
    pub u: ScalarField,
    pub t: f64,
    /// Cached `X = χ_u`.
    pub x: HermitianField,
    /// Cached `F = ∂u/∂t`.
    pub f: ScalarField,
    pub stats: RhsStats,
    pub dt_last: f64,
}

impl FlowState {
    /// Evaluate the operator at `u0` and build the initial state; errors if
    /// the state is inadmissible.
    pub fn initial(data: &ProblemData, u0: ScalarField) -> Result<Self> {
        u0.check_finite()?;
        let mut scratch = data.spectral().scratch();
        let mut x = HermitianField::zeros(data.grid());
        let mut f = ScalarField::zeros(data.grid());
        chi_u_into(data, &u0, &mut scratch, &mut x)?;
        let stats = rhs_from_x(data, &x, &mut f);
        if !stats.admissible() {
            return Err(Error::Inadmissible {
                least: stats.least_rel_eig,
                point: stats.worst_point,
            });
        }
        Ok(Self { u: u0, t: 0.0, x, f, stats, dt_last: 0.0 })
    }

    /// Restart wrapper used by the continuity solver: same fields, clock
    /// reset to zero.
    pub fn restarted_at_zero(mut self) -> Self {
        self.t = 0.0;
        self
    }
}

/// Integrator and stopping parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Safety factor in the stability bound (default 0.2).
    pub dt_safety: f64,
    pub t_max: f64,
    /// Convergence threshold on `osc(∂u/∂t)`.
    pub tol_osc: f64,
    /// Steps between diagnostics rows.
    pub sample_every: usize,
    /// Steps between snapshots (0 = none); requires `out_dir`.
    pub snapshot_every: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    /// First-step override (continuity restarts reuse the previous stage's
    /// converged step).
    #[serde(skip)]
    pub initial_dt: Option<f64>,
    /// Collect `∂u/∂t` field samples at half-integer times for the Harnack
    /// reports.
    pub collect_harnack: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_safety: 0.2,
            t_max: 50.0,
            tol_osc: 1e-8,
            sample_every: 20,
            snapshot_every: 0,
            out_dir: None,
            initial_dt: None,
            collect_harnack: false,
        }
    }
}

/// Consecutive converged samples required to stop.
const CONVERGED_SAMPLES: usize = 3;
/// Maximum step-halving retries before aborting.
const MAX_REJECTS: usize = 20;
/// Latest half-integer time captured for Harnack reports.
const HARNACK_T_MAX: f64 = 6.0;

/// One diagnostics row; the CSV column order is fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub sup_f: f64,
    pub inf_f: f64,
    pub osc_f: f64,
    pub j_alpha: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub osc_u: f64,
    pub w_max: f64,
    pub b_estimate: f64,
    pub dt: f64,
}

pub const CSV_HEADER: &str = "t,sup_F,inf_F,osc_F,J_alpha,sup_u,inf_u,osc_u,w_max,b_estimate,dt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    TMax,
    ConeExit,
    Instability,
}

/// Time series of diagnostics plus the monitors accumulated along the run.
pub struct Trajectory {
    pub rows: Vec<DiagnosticsRow>,
    pub termination: Termination,
    pub snapshots: Vec<(f64, PathBuf)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Worst single-step increase of `sup F` (maximum principle says ≤ 0).
    pub sup_f_slack: f64,
    /// Worst single-step decrease of `inf F`.
    pub inf_f_slack: f64,
    /// Per-row samples `(u(x*) − running inf u, ln w(x*))` at the point
    /// `x*` maximizing `w`; inputs to the `(C, A)` bound fit.
    pub w_samples: Vec<(f64, f64)>,
    /// `∂u/∂t` fields captured at half-integer times.
    pub harnack_samples: Vec<(f64, ScalarField)>,
    pub final_state: FlowState,
}

impl Trajectory {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `(t, osc_F)` pairs for the decay fit.
    pub fn osc_f_samples(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.osc_f)).collect()
    }

    /// Noise floor for oscillation fits:
    /// `1e3 · ε · (1 + |F|_∞ at t = 0)`.
    pub fn osc_noise_floor(&self) -> f64 {
        let f0 = self.rows.first().map_or(0.0, |r| r.sup_f.abs().max(r.inf_f.abs()));
        1e3 * f64::EPSILON * (1.0 + f0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.sup_f,
                r.inf_f,
                r.osc_f,
                r.j_alpha,
                r.sup_u,
                r.inf_u,
                r.osc_u,
                r.w_max,
                r.b_estimate,
                r.dt
            )?;
        }
        Ok(())
    }
}

/// Write a flow state to a snapshot file (`u` and the cached velocity).
pub fn write_state(state: &FlowState, data: &ProblemData, path: &Path) -> Result<()> {
    crate::snapshot::write(
        path,
        data.grid(),
        state.t,
        state.dt_last,
        &[("u", state.u.values()), ("f", state.f.values())],
    )
}

/// Rebuild a flow state from a snapshot: `u`, `t`, `dt_last` come from the
/// file, the cached operator data is re-evaluated (deterministically, so
/// the round trip is exact).
pub fn read_state(data: &ProblemData, path: &Path) -> Result<FlowState> {
    let snap = crate::snapshot::read(path)?;
    let grid = snap.grid()?;
    if !grid.same_as(data.grid()) {
        return Err(Error::GridMismatch);
    }
    let u = ScalarField::from_values(data.grid(), snap.field("u")?.to_vec())?;
    let mut state = FlowState::initial(data, u)?;
    state.t = snap.t;
    state.dt_last = snap.dt_last;
    Ok(state)
}

/// Stability-limited step `dt = safety · h_min² / (4n · Λ_max)`.
pub fn stable_dt(state: &FlowState, data: &ProblemData, safety: f64) -> Result<f64> {
    if !(safety > 0.0) {
        return Err(Error::Degenerate(format!("dt safety factor {safety} must be positive")));
    }
    let h = data.grid().min_spacing();
    let lam = state.stats.diffusion_max.max(f64::MIN_POSITIVE);
    Ok(safety * h * h / (4.0 * data.dim() as f64 * lam))
}

struct StepBufs {
    stage_u: ScalarField,
    k2: ScalarField,
    k3: ScalarField,
    k4: ScalarField,
    next_u: ScalarField,
    next_f: ScalarField,
    next_x: HermitianField,
    scratch: HessianScratch,
}

impl StepBufs {
    fn new(data: &ProblemData) -> Self {
        let g = data.grid();
        Self {
            stage_u: ScalarField::zeros(g),
            k2: ScalarField::zeros(g),
            k3: ScalarField::zeros(g),
            k4: ScalarField::zeros(g),
            next_u: ScalarField::zeros(g),
            next_f: ScalarField::zeros(g),
            next_x: HermitianField::zeros(g),
            scratch: data.spectral().scratch(),
        }
    }
}

enum StepOutcome {
    Accepted(RhsStats),
    RejectedCone(f64),
}

/// `dst = u + c·k`, one fused pass.
fn combine_into(dst: &mut ScalarField, u: &ScalarField, c: f64, k: &ScalarField) {
    dst.values_mut()
        .par_chunks_mut(4096)
        .zip(u.values().par_chunks(4096))
        .zip(k.values().par_chunks(4096))
        .for_each(|((d, uu), kk)| {
            for i in 0..d.len() {
                d[i] = uu[i] + c * kk[i];
            }
        });
}

/// RK4 trial step into the buffers; the state is untouched.
fn try_step(
    data: &ProblemData,
    state: &FlowState,
    dt: f64,
    bufs: &mut StepBufs,
) -> Result<StepOutcome> {
    let eval_stage = |u_stage: &ScalarField,
                      k_out: &mut ScalarField,
                      x_buf: &mut HermitianField,
                      scratch: &mut HessianScratch|
     -> Result<Option<f64>> {
        chi_u_into(data, u_stage, scratch, x_buf)?;
        let stats = rhs_from_x(data, x_buf, k_out);
        if !stats.least_rel_eig.is_finite() {
            return Err(Error::Instability { t: state.t });
        }
        if !stats.admissible() {
            return Ok(Some(stats.least_rel_eig));
        }
        Ok(None)
    };

    let k1 = &state.f;
    combine_into(&mut bufs.stage_u, &state.u, 0.5 * dt, k1);
    if let Some(least) = eval_stage(&bufs.stage_u, &mut bufs.k2, &mut bufs.next_x, &mut bufs.scratch)? {
        return Ok(StepOutcome::RejectedCone(least));
    }
    combine_into(&mut bufs.stage_u, &state.u, 0.5 * dt, &bufs.k2);
    if let Some(least) = eval_stage(&bufs.stage_u, &mut bufs.k3, &mut bufs.next_x, &mut bufs.scratch)? {
        return Ok(StepOutcome::RejectedCone(least));
    }
    combine_into(&mut bufs.stage_u, &state.u, dt, &bufs.k3);
    if let Some(least) = eval_stage(&bufs.stage_u, &mut bufs.k4, &mut bufs.next_x, &mut bufs.scratch)? {
        return Ok(StepOutcome::RejectedCone(least));
    }

    // u' = u + dt/6·(k1 + 2k2 + 2k3 + k4), single fused pass.
    {
        let dt6 = dt / 6.0;
        let (u, k1v) = (state.u.values(), k1.values());
        let (k2v, k3v, k4v) = (bufs.k2.values(), bufs.k3.values(), bufs.k4.values());
        bufs.next_u
            .values_mut()
            .par_chunks_mut(4096)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * 4096;
                for (i, v) in chunk.iter_mut().enumerate() {
                    let p = base + i;
                    *v = u[p] + dt6 * (k1v[p] + 2.0 * (k2v[p] + k3v[p]) + k4v[p]);
                }
            });
    }
    bufs.next_u.check_finite().map_err(|_| Error::Instability { t: state.t })?;
    chi_u_into(data, &bufs.next_u, &mut bufs.scratch, &mut bufs.next_x)?;
    let stats = rhs_from_x(data, &bufs.next_x, &mut bufs.next_f);
    if !stats.least_rel_eig.is_finite() {
        return Err(Error::Instability { t: state.t });
    }
    if !stats.admissible() {
        return Ok(StepOutcome::RejectedCone(stats.least_rel_eig));
    }
    Ok(StepOutcome::Accepted(stats))
}

/// One public RK4 step with rejection/halving; returns the advanced state.
pub fn step(data: &ProblemData, state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Degenerate(format!("dt {dt} must be positive")));
    }
    let mut bufs = StepBufs::new(data);
    let mut dt_try = dt;
    for _ in 0..=MAX_REJECTS {
        match try_step(data, state, dt_try, &mut bufs)? {
            StepOutcome::Accepted(stats) => {
                return Ok(FlowState {
                    u: bufs.next_u,
                    t: state.t + dt_try,
                    x: bufs.next_x,
                    f: bufs.next_f,
                    stats,
                    dt_last: dt_try,
                });
            }
            StepOutcome::RejectedCone(least) => {
                dt_try *= 0.5;
                if dt_try == 0.0 {
                    return Err(Error::ConeExit { retries: MAX_REJECTS, least });
                }
            }
        }
    }
    Err(Error::ConeExit { retries: MAX_REJECTS, least: state.stats.least_rel_eig })
}

/// `w = Δ_ω u + tr_ω χ = tr_ω X` as a field, from the cached `X`.
pub fn w_field(data: &ProblemData, state: &FlowState) -> Result<ScalarField> {
    crate::herm::rel_trace(&state.x, data.metric())
}

/// Maximum of `w` over the grid.
pub fn monitor_w(data: &ProblemData, state: &FlowState) -> Result<f64> {
    Ok(w_field(data, state)?.sup())
}

/// `ũ = u − (∫u ω^n)/(∫ω^n)`.
pub fn normalize_tilde(u: &ScalarField, data: &ProblemData) -> Result<ScalarField> {
    let mean = data.integrate_omega(u)? / data.volume_omega();
    Ok(u.add_scalar(-mean))
}

/// `û = u − J_α(u)/∫χ^{n-α}∧ω^α`.
pub fn normalize_hat(u: &ScalarField, data: &ProblemData) -> Result<ScalarField> {
    let j = j_alpha_closed(u, data)?;
    let denom = mixed_volume(data)?;
    Ok(u.add_scalar(-j / denom))
}

/// `b = (∫ F_final ω^n)/(∫ ω^n)` at the final state, plus the elliptic
/// residual `max|F_final − b|`. Requires a converged trajectory (or one
/// whose final oscillation already meets the tolerance).
pub fn extract_b(traj: &Trajectory, data: &ProblemData, tol_osc: f64) -> Result<(f64, f64)> {
    let final_osc = traj.rows.last().map_or(f64::INFINITY, |r| r.osc_f);
    if !traj.converged() && final_osc > tol_osc {
        return Err(Error::NotConverged { t_max: traj.final_state.t });
    }
    let f = &traj.final_state.f;
    let b = data.integrate_omega(f)? / data.volume_omega();
    let dev = f.map(|v| (v - b).abs()).sup();
    Ok((b, dev))
}

/// Smallest `(C, A)` with `w(x,t) ≤ C·e^{A·(u(x,t) − running inf u)}`
/// over the collected samples: least squares in log space for `A` over the
/// tail, then the minimal `C` making the bound hold on every sample.
pub fn fit_w_bound(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    if samples.len() < 4 {
        return None;
    }
    let tail = &samples[samples.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.1).collect();
    let (_, slope, _) = linear_fit(&xs, &ys);
    let a = slope.max(0.0);
    let ln_c = samples
        .iter()
        .map(|&(d, lw)| lw - a * d)
        .fold(f64::NEG_INFINITY, f64::max);
    Some((ln_c.exp(), a))
}

/// Integrate from `initial` (the zero potential unless a restart is
/// supplied) until `osc F` stays below `tol_osc` for three consecutive
/// samples or `t_max` is reached. Cone exits and instabilities abort the
/// stepping and are recorded as the termination reason.
pub fn run(
    data: &ProblemData,
    cfg: &FlowConfig,
    initial: Option<ScalarField>,
) -> Result<Trajectory> {
    let u0 = initial.unwrap_or_else(|| ScalarField::zeros(data.grid()));
    let mut state = FlowState::initial(data, u0)?;
    let mut bufs = StepBufs::new(data);

    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let mut w_samples = Vec::new();
    let mut snapshots = Vec::new();
    let mut harnack_samples: Vec<(f64, ScalarField)> = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut sup_slack: f64 = 0.0;
    let mut inf_slack: f64 = 0.0;
    let mut consecutive = 0usize;
    let mut running_inf_u = state.u.inf();
    let (mut prev_sup_f, mut prev_inf_f) = (state.f.sup(), state.f.inf());
    let mut next_harnack = 0usize;

    let vol_total = data.volume_omega();
    let push_row = |state: &FlowState,
                        dt: f64,
                        running_inf_u: f64,
                        rows: &mut Vec<DiagnosticsRow>,
                        w_samples: &mut Vec<(f64, f64)>|
     -> Result<()> {
        let (sup_f, inf_f) = (state.f.sup(), state.f.inf());
        let (sup_u, inf_u) = (state.u.sup(), state.u.inf());
        let w = w_field(data, state)?;
        let (wp, w_max) = argmax(w.values());
        let j = j_alpha_closed(&state.u, data)?;
        let b = integrate(&state.f, data.metric().vol_density())? / vol_total;
        rows.push(DiagnosticsRow {
            t: state.t,
            sup_f,
            inf_f,
            osc_f: sup_f - inf_f,
            j_alpha: j,
            sup_u,
            inf_u,
            osc_u: sup_u - inf_u,
            w_max,
            b_estimate: b,
            dt,
        });
        w_samples.push((state.u.values()[wp] - running_inf_u, w_max.max(f64::MIN_POSITIVE).ln()));
        Ok(())
    };

    push_row(&state, 0.0, running_inf_u, &mut rows, &mut w_samples)?;
    if cfg.collect_harnack {
        harnack_samples.push((0.0, state.f.clone()));
        next_harnack = 1;
    }

    let termination;
    let eps_t = 1e-12 * cfg.t_max.max(1.0);
    loop {
        if state.t >= cfg.t_max - eps_t {
            termination = Termination::TMax;
            break;
        }
        let mut dt = stable_dt(&state, data, cfg.dt_safety)?;
        if accepted == 0 {
            if let Some(dt0) = cfg.initial_dt {
                dt = dt.min(dt0);
            }
        }
        let mut hit_end = false;
        if state.t + dt >= cfg.t_max {
            dt = cfg.t_max - state.t;
            hit_end = true;
        }

        let mut outcome = None;
        for _ in 0..=MAX_REJECTS {
            match try_step(data, &state, dt, &mut bufs)? {
                StepOutcome::Accepted(stats) => {
                    outcome = Some(stats);
                    break;
                }
                StepOutcome::RejectedCone(_) => {
                    rejected += 1;
                    dt *= 0.5;
                    hit_end = false;
                }
            }
        }
        let Some(stats) = outcome else {
            termination = Termination::ConeExit;
            break;
        };

        // Swap the advanced fields into the state.
        std::mem::swap(&mut state.u, &mut bufs.next_u);
        std::mem::swap(&mut state.f, &mut bufs.next_f);
        std::mem::swap(&mut state.x, &mut bufs.next_x);
        state.stats = stats;
        state.t = if hit_end { cfg.t_max } else { state.t + dt };
        state.dt_last = dt;
        accepted += 1;

        let (sup_f, inf_f) = (state.f.sup(), state.f.inf());
        sup_slack = sup_slack.max(sup_f - prev_sup_f);
        inf_slack = inf_slack.max(prev_inf_f - inf_f);
        prev_sup_f = sup_f;
        prev_inf_f = inf_f;
        running_inf_u = running_inf_u.min(state.u.inf());

        if cfg.collect_harnack {
            let target = 0.5 * next_harnack as f64;
            if target <= HARNACK_T_MAX && state.t >= target {
                harnack_samples.push((state.t, state.f.clone()));
                next_harnack += 1;
            }
        }

        if cfg.snapshot_every > 0 && accepted % cfg.snapshot_every == 0 {
            if let Some(dir) = &cfg.out_dir {
                let path = dir.join(format!("snap_{:05}.snap", snapshots.len()));
                crate::snapshot::write(
                    &path,
                    data.grid(),
                    state.t,
                    state.dt_last,
                    &[("u", state.u.values()), ("f", state.f.values())],
                )?;
                snapshots.push((state.t, path));
            }
        }

        if accepted % cfg.sample_every == 0 || state.t >= cfg.t_max - eps_t {
            push_row(&state, dt, running_inf_u, &mut rows, &mut w_samples)?;
            let osc = rows.last().unwrap().osc_f;
            if osc < cfg.tol_osc {
                consecutive += 1;
                if consecutive >= CONVERGED_SAMPLES {
                    termination = Termination::Converged;
                    break;
                }
            } else {
                consecutive = 0;
            }
        }
    }

    if rows.last().map(|r| r.t) != Some(state.t) {
        push_row(&state, state.dt_last, running_inf_u, &mut rows, &mut w_samples)?;
    }

    Ok(Trajectory {
        rows,
        termination,
        snapshots,
        accepted_steps: accepted,
        rejected_steps: rejected,
        sup_f_slack: sup_slack,
        inf_f_slack: inf_slack,
        w_samples,
        harnack_samples,
        final_state: state,
    })
}
