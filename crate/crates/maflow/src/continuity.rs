//! Method of continuity for the elliptic equation
//! `χ_u^n = e^b ψ χ_u^{n-α} ∧ ω^α`, driven entirely by the parabolic flow.
//!
//! Stage 0 replaces `ψ` by a dominating density `ψ₀` built from a
//! subsolution `χ' = χ_{u̲}`: with `φ̲ = χ'^n/(χ'^{n-α}∧ω^α)` and a margin
//! `δ` found by bisection on the cone condition, `ψ₀` is a smooth function
//! pinned into `[max{ψ,φ̲}, max{ψ,φ̲}+δ]` and brought to touch `ψ` at one
//! point where `ψ ≥ φ̲` (so that `inf(ln ψ₀ − ln ψ) = 0` whenever that set
//! is nonempty). The flow then solves the `ψ₀` problem from `u̲`, giving
//! `(u₀, b₀ ≤ 0)`.
//!
//! The march advances `s` by `ε = ln κ / sup(ln ψ₀ − ln ψ)` and solves each
//! intermediate problem by restarting the flow from the previous node with
//! target density `κ ψ^s ψ₀^{1-s}` (the κ-inflated density of the openness
//! argument). The recorded `b_s` absorbs `ln κ`, so every node satisfies
//! the plain family `χ^n_{u_s} = ψ^s ψ₀^{1-s} e^{b_s} χ^{n-α}_{u_s} ∧ ω^α`
//! up to the reported residual; the final node is verified against plain
//! `ψ`.

use crate::field::{HermitianField, ScalarField};
use crate::flow::{extract_b, normalize_tilde, run, FlowConfig, Termination};
use crate::herm::{cone_condition, wedge_ratio};
use crate::operator::{chi_u, ProblemData};
use crate::snapshot;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Numerical slack on the sign constraint `b_s ≤ 0`; a node beyond this
/// aborts the march as an invariant breach.
pub const B_SLACK: f64 = 1e-6;

const MAX_STAGES: usize = 1000;
/// Low-pass ladder, strongest smoothing first; weakened until the
/// mollified surrogate fits the `δ` bracket.
const LOWPASS_LADDER: [f64; 8] = [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0];

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub enum KappaPolicy {
    /// `κ = 1 + δ/(2 sup ψ₀)`, the largest simple choice honoring
    /// `κψ₀ ≤ ψ₀ + δ`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityConfig {
    pub kappa: KappaPolicy,
    pub delta_bisection_iters: usize,
    pub flow: FlowConfig,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            kappa: KappaPolicy::Auto,
            delta_bisection_iters: 40,
            flow: FlowConfig::default(),
        }
    }
}

/// One accepted point of the continuity family.
pub struct PathNode {
    pub s: f64,
    pub u: ScalarField,
    pub b: f64,
    /// `max |ln(χ_u^n/(χ_u^{n-α}∧ω^α)) − ln(ψ^s ψ₀^{1-s}) − b_s|`.
    pub residual: f64,
    pub dt_last: f64,
}

/// The realized prefix of the continuity family plus its constants.
pub struct ContinuityPath {
    pub nodes: Vec<PathNode>,
    pub psi0: ScalarField,
    pub delta: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub b0: f64,
    pub completed: bool,
    /// Worst violation of the two-sided bound
    /// `b_s ≥ inf(ln ψ₀ − ln ψ) + b₀` over accepted nodes (0 when it holds).
    pub b_lower_violation: f64,
    /// Worst violation of `ψ^s ψ₀^{1-s} e^{b_s} ≤ ψ₀` over accepted nodes.
    pub target_dominance_violation: f64,
}

impl ContinuityPath {
    pub fn last_s(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.s)
    }
}

/// `φ̲ = χ'^n / (χ'^{n-α} ∧ ω^α)` pointwise.
fn subsolution_ratio(data: &ProblemData, chi_prime: &HermitianField) -> Result<ScalarField> {
    let n = data.dim();
    let alpha = data.alpha();
    let num = wedge_ratio(&[(chi_prime, n)], data.metric())?;
    let den = wedge_ratio(&[(chi_prime, n - alpha), (data.omega(), alpha)], data.metric())?;
    num.zip_map(&den, |a, b| a / b)
}

/// Smooth compactly supported bump of height `height` centered at grid
/// point `center`, width a quarter period per active axis.
fn bump_field(grid: &std::sync::Arc<crate::grid::PeriodicGrid>, center: usize, height: f64) -> ScalarField {
    let c_pos = grid.position_of(center);
    let periods = grid.periods().to_vec();
    let points = grid.points().to_vec();
    ScalarField::from_fn(grid, move |x| {
        let mut v = height;
        for a in 0..x.len() {
            if points[a] == 1 {
                continue;
            }
            let mut d = (x[a] - c_pos[a]).abs();
            if d > periods[a] * 0.5 {
                d = periods[a] - d;
            }
            let r = d / (periods[a] * 0.25);
            if r >= 1.0 {
                return 0.0;
            }
            v *= (1.0 - 1.0 / (1.0 - r * r)).exp();
        }
        v
    })
}

/// Construct `(ψ₀, δ)` from the subsolution data.
///
/// `δ` is half the largest value keeping the cone condition for
/// `max{ψ,φ̲} + 2δ` satisfied (bisection); `ψ₀` is a low-passed surrogate
/// of `max{ψ,φ̲}` lifted into the bracket `[max{ψ,φ̲}, max{ψ,φ̲}+δ]` and
/// pulled down to touch `ψ` at one point of `{ψ ≥ φ̲}` when that set is
/// nonempty.
pub fn build_psi0(
    data: &ProblemData,
    chi_prime: &HermitianField,
    cfg: &ContinuityConfig,
) -> Result<(ScalarField, f64)> {
    let alpha = data.alpha();
    let cone = cone_condition(chi_prime, data.metric(), data.psi(), alpha)?;
    if !cone.satisfied {
        return Err(Error::ConeViolated { margin: cone.margin, point: cone.worst_point });
    }

    let phi_under = subsolution_ratio(data, chi_prime)?;
    let floor = data.psi().zip_map(&phi_under, f64::max)?;

    // Largest 2δ with the cone still satisfied for max{ψ,φ̲} + 2δ.
    let cone_ok = |d: f64| -> Result<bool> {
        let trial = floor.add_scalar(2.0 * d);
        Ok(cone_condition(chi_prime, data.metric(), &trial, alpha)?.satisfied)
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut grew = 0;
    while cone_ok(hi)? {
        lo = hi;
        hi *= 2.0;
        grew += 1;
        if grew > 60 {
            break;
        }
    }
    for _ in 0..cfg.delta_bisection_iters {
        let mid = 0.5 * (lo + hi);
        if cone_ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * lo;
    if !(delta > 0.0) {
        return Err(Error::Continuity(format!(
            "cone margin too small to build psi0 (margin {:.3e})",
            cone.margin
        )));
    }

    // Mollify, weakening the filter until the bracket holds.
    let mut candidate = None;
    for frac in LOWPASS_LADDER {
        let m = data.spectral().lowpass(&floor, frac)?;
        let err = floor.sub(&m)?;
        let undershoot = err.sup(); // max(f − m)
        let overshoot = (-err.inf()).max(0.0); // max(m − f)
        if undershoot.max(0.0) + overshoot <= delta {
            candidate = Some((m, undershoot.max(0.0)));
            break;
        }
    }
    let Some((mollified, shift)) = candidate else {
        return Err(Error::Continuity("bracket empty after mollification".into()));
    };
    let lifted = mollified.add_scalar(shift); // ∈ [f, f+δ]

    // Touch ψ at the argmin of (lifted − f) over {ψ ≥ φ̲}.
    let mut psi0 = lifted.clone();
    let psi_v = data.psi().values();
    let phi_v = phi_under.values();
    let gap: Vec<f64> = lifted
        .values()
        .iter()
        .zip(floor.values())
        .map(|(&g, &f)| g - f)
        .collect();
    let mut touch: Option<(usize, f64)> = None;
    for p in 0..gap.len() {
        if psi_v[p] >= phi_v[p] {
            match touch {
                Some((_, best)) if gap[p] >= best => {}
                _ => touch = Some((p, gap[p])),
            }
        }
    }
    if let Some((center, mu)) = touch {
        if mu > 0.0 {
            let bump = bump_field(data.grid(), center, mu);
            psi0 = lifted.sub(&bump)?;
            // Clamp into the bracket (the bump may dip below max{ψ,φ̲}
            // away from the touch point).
            psi0 = psi0.zip_map(&floor, f64::max)?;
        }
    }

    // Pointwise bracket verification.
    let below = psi0.sub(&floor)?;
    if below.inf() < -1e-12 || below.sup() > delta + 1e-12 {
        return Err(Error::Continuity(format!(
            "psi0 escaped its bracket: [{:.3e}, {:.3e}] vs delta {:.3e}",
            below.inf(),
            below.sup(),
            delta
        )));
    }
    Ok((psi0, delta))
}

/// Solve stage 0: run the flow for `ψ₀` from the subsolution potential,
/// returning the normalized solution and `b₀ ≤ 0`.
pub fn solve_stage0(
    data: &ProblemData,
    psi0: &ScalarField,
    u_lower: &ScalarField,
    chi_prime: &HermitianField,
    cfg: &ContinuityConfig,
) -> Result<(ScalarField, f64, f64, f64)> {
    let alpha = data.alpha();
    let cone = cone_condition(chi_prime, data.metric(), psi0, alpha)?;
    if !cone.satisfied {
        return Err(Error::ConeViolated { margin: cone.margin, point: cone.worst_point });
    }
    // χ'^n/(χ'^{n-α}∧ω^α) ≤ ψ₀ pointwise, guaranteed by ψ₀ ≥ φ̲.
    let ratio = subsolution_ratio(data, chi_prime)?;
    let slack = ratio.sub(psi0)?.sup();
    if slack > 1e-10 {
        return Err(Error::Continuity(format!(
            "stage-0 hypothesis ratio ≤ psi0 fails by {slack:.3e}"
        )));
    }

    let stage_data = data.with_psi(psi0.clone())?;
    let traj = run(&stage_data, &cfg.flow, Some(u_lower.clone()))?;
    if traj.termination != Termination::Converged {
        return Err(Error::NotConverged { t_max: cfg.flow.t_max });
    }
    let (b0, residual) = extract_b(&traj, &stage_data, cfg.flow.tol_osc)?;
    if b0 > B_SLACK {
        return Err(Error::Continuity(format!("stage-0 constant b0 = {b0:.3e} > 0")));
    }
    let u0 = normalize_tilde(&traj.final_state.u, data)?;
    Ok((u0, b0, residual, traj.final_state.dt_last))
}

/// Initialize the continuity path: build `ψ₀`, solve stage 0, fix
/// `(κ, ε)`.
pub fn initialize(
    data: &ProblemData,
    u_lower: &ScalarField,
    cfg: &ContinuityConfig,
) -> Result<ContinuityPath> {
    let chi_prime = chi_u(data, u_lower)?;
    let (psi0, delta) = build_psi0(data, &chi_prime, cfg)?;
    let (u0, b0, residual, dt_last) = solve_stage0(data, &psi0, u_lower, &chi_prime, cfg)?;

    let log_gap = psi0.zip_map(data.psi(), |a, b| a.ln() - b.ln())?;
    let sup_gap = log_gap.sup();
    let kappa = match cfg.kappa {
        KappaPolicy::Auto => 1.0 + delta / (2.0 * psi0.sup()),
        KappaPolicy::Fixed(k) => {
            if !(k > 1.0) {
                return Err(Error::Continuity(format!("kappa {k} must exceed 1")));
            }
            let worst = psi0.map(|p| k * p - (p + delta)).sup();
            if worst > 0.0 {
                return Err(Error::Continuity(format!(
                    "kappa {k} violates kappa·psi0 ≤ psi0 + delta by {worst:.3e}"
                )));
            }
            k
        }
    };
    // ε = −ln κ / inf(ln ψ − ln ψ₀); a vanishing gap means ψ ≡ ψ₀ and the
    // march degenerates to a single stage.
    let epsilon = if sup_gap <= 1e-13 { 1.0 } else { kappa.ln() / sup_gap };

    Ok(ContinuityPath {
        nodes: vec![PathNode { s: 0.0, u: u0, b: b0, residual, dt_last }],
        psi0,
        delta,
        kappa,
        epsilon,
        b0,
        completed: false,
        b_lower_violation: 0.0,
        target_dominance_violation: 0.0,
    })
}

/// Advance the march by one stage; returns true when `s = 1` is done.
pub fn advance(
    data: &ProblemData,
    cfg: &ContinuityConfig,
    path: &mut ContinuityPath,
) -> Result<bool> {
    if path.completed {
        return Ok(true);
    }
    let prev = path.nodes.last().ok_or_else(|| Error::Continuity("empty path".into()))?;
    let s_prev = prev.s;
    let u_prev = prev.u.clone();
    let dt_prev = prev.dt_last;

    // Degenerate family: ψ ≡ ψ₀ up to round-off.
    let log_gap = path.psi0.zip_map(data.psi(), |a, b| a.ln() - b.ln())?;
    if log_gap.sup() <= 1e-13 {
        let node = PathNode {
            s: 1.0,
            u: u_prev,
            b: prev.b,
            residual: prev.residual,
            dt_last: dt_prev,
        };
        path.nodes.push(node);
        path.completed = true;
        return Ok(true);
    }

    let s = (s_prev + path.epsilon).min(1.0);
    // Target density κ ψ^s ψ₀^{1-s}.
    let kappa = path.kappa;
    let target = data
        .psi()
        .zip_map(&path.psi0, |p, p0| kappa * p.powf(s) * p0.powf(1.0 - s))?;
    let stage_data = data.with_psi(target)?;

    let mut flow_cfg = cfg.flow.clone();
    flow_cfg.initial_dt = if dt_prev > 0.0 { Some(dt_prev) } else { None };
    let traj = run(&stage_data, &flow_cfg, Some(u_prev))?;
    if traj.termination != Termination::Converged {
        return Err(Error::NotConverged { t_max: flow_cfg.t_max });
    }
    let (b_tilde, residual) = extract_b(&traj, &stage_data, flow_cfg.tol_osc)?;
    let b = b_tilde + kappa.ln(); // b_s of the plain (κ-free) family
    if b > B_SLACK {
        return Err(Error::Continuity(format!(
            "b_{s:.4} = {b:.3e} breaches the sign bound"
        )));
    }
    // Two-sided lower bound and target dominance, recorded not asserted.
    let inf_gap = log_gap.inf();
    path.b_lower_violation = path.b_lower_violation.max(inf_gap + path.b0 - b);
    let dominance = data
        .psi()
        .zip_map(&path.psi0, |p, p0| p.powf(s) * p0.powf(1.0 - s) * b.exp() - p0)?
        .sup();
    path.target_dominance_violation = path.target_dominance_violation.max(dominance);

    let u_s = normalize_tilde(&traj.final_state.u, data)?;
    path.nodes.push(PathNode { s, u: u_s, b, residual, dt_last: traj.final_state.dt_last });
    if s >= 1.0 {
        path.completed = true;
    }
    Ok(path.completed)
}

/// Run the march to completion (or error out with the realized prefix
/// preserved in `path`).
pub fn march(data: &ProblemData, cfg: &ContinuityConfig, path: &mut ContinuityPath) -> Result<()> {
    for _ in 0..MAX_STAGES {
        if advance(data, cfg, path)? {
            return Ok(());
        }
    }
    Err(Error::Continuity(format!("march did not reach s = 1 in {MAX_STAGES} stages")))
}

/// Convenience driver: initialize + march.
pub fn solve(
    data: &ProblemData,
    u_lower: &ScalarField,
    cfg: &ContinuityConfig,
) -> Result<ContinuityPath> {
    let mut path = initialize(data, u_lower, cfg)?;
    march(data, cfg, &mut path)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Checkpointing: one snapshot per node plus a JSON manifest.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestNode {
    pub s: f64,
    pub b: f64,
    pub residual: f64,
    pub dt_last: f64,
    pub snapshot: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub b0: f64,
    pub completed: bool,
    pub psi0_snapshot: String,
    pub nodes: Vec<ManifestNode>,
}

pub const MANIFEST_VERSION: u32 = 1;

pub fn save_path(path: &ContinuityPath, dir: &Path, grid: &crate::grid::PeriodicGrid) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let psi0_name = "psi0.snap".to_string();
    snapshot::write(&dir.join(&psi0_name), grid, 0.0, 0.0, &[("psi0", path.psi0.values())])?;
    let mut nodes = Vec::new();
    for (i, node) in path.nodes.iter().enumerate() {
        let name = format!("node_{i:03}.snap");
        snapshot::write(&dir.join(&name), grid, node.s, node.dt_last, &[("u", node.u.values())])?;
        nodes.push(ManifestNode {
            s: node.s,
            b: node.b,
            residual: node.residual,
            dt_last: node.dt_last,
            snapshot: name,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        kappa: path.kappa,
        epsilon: path.epsilon,
        delta: path.delta,
        b0: path.b0,
        completed: path.completed,
        psi0_snapshot: psi0_name,
        nodes,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_path(manifest_path: &Path, data: &ProblemData) -> Result<ContinuityPath> {
    let bytes = std::fs::read(manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::ReportVersion { got: manifest.version, expected: MANIFEST_VERSION });
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let psi0_snap = snapshot::read(&dir.join(&manifest.psi0_snapshot))?;
    let psi0 = ScalarField::from_values(data.grid(), psi0_snap.field("psi0")?.to_vec())?;
    let mut nodes = Vec::new();
    for mn in &manifest.nodes {
        let snap = snapshot::read(&dir.join(&mn.snapshot))?;
        let u = ScalarField::from_values(data.grid(), snap.field("u")?.to_vec())?;
        nodes.push(PathNode { s: mn.s, u, b: mn.b, residual: mn.residual, dt_last: mn.dt_last });
    }
    Ok(ContinuityPath {
        nodes,
        psi0,
        delta: manifest.delta,
        kappa: manifest.kappa,
        epsilon: manifest.epsilon,
        b0: manifest.b0,
        completed: manifest.completed,
        b_lower_violation: 0.0,
        target_dominance_violation: 0.0,
    })
}
