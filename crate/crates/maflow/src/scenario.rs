//! Scenario files: the full problem statement in human-writable TOML.
//!
//! Background forms are constant Hermitian matrices plus optional cosine
//! modes with integer wave vectors and Hermitian coefficient matrices
//! (complex entries written as `[re, im]` pairs). The density `ψ` comes in
//! four flavors: constant, floor-plus-raised-cosine modes, manufactured
//! from a target potential `u*` (so the elliptic solution is known), or a
//! scaled wrapper `e^σ·base`.

use crate::continuity::{ContinuityConfig, KappaPolicy};
use crate::field::{HermitianField, ScalarField};
use crate::flow::FlowConfig;
use crate::grid::PeriodicGrid;
use crate::herm::{cone_condition, ConeReport};
use crate::linalg::CMat;
use crate::operator::{invariant_c, operator_value, wedge_ratio_of_chi, ProblemData};
use crate::{Error, Result, HERMITIAN_TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub problem: ProblemSpec,
    pub grid: GridSpec,
    pub omega: MatrixFieldSpec,
    pub chi: MatrixFieldSpec,
    pub psi: PsiSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub continuity: ContinuitySpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub alpha: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub periods: Vec<f64>,
}

/// Complex scalar as `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFieldSpec {
    /// Constant part, `n×n` rows of `[re, im]` entries.
    pub constant: Vec<Vec<ComplexPair>>,
    #[serde(default)]
    pub modes: Vec<MatrixModeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixModeSpec {
    /// Integer wave numbers per real axis.
    pub wave: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
    pub coeff: Vec<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarModeSpec {
    pub wave: Vec<i64>,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarFieldSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<ScalarModeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiSpec {
    /// `ψ ≡ value`.
    Constant { constant: f64 },
    /// `ψ = floor + Σ amp·(1 + cos(2πk·x + phase))`, `amp ≥ 0`.
    ModesWithFloor { floor: f64, modes: Vec<ScalarModeSpec> },
    /// `ψ := χ_{u*}^n/(χ_{u*}^{n-α} ∧ ω^α)` for the given `u*`.
    Manufactured { manufactured: ScalarFieldSpec },
    /// `ψ = e^σ · base`.
    Scaled { scaled: ScaledSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledSpec {
    pub base: Box<PsiSpec>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSpec {
    pub dt_safety: f64,
    pub t_max: f64,
    pub tol_osc: f64,
    pub sample_every: usize,
    pub snapshot_every: usize,
    pub collect_harnack: bool,
}

impl Default for FlowSpec {
    fn default() -> Self {
        let d = FlowConfig::default();
        Self {
            dt_safety: d.dt_safety,
            t_max: d.t_max,
            tol_osc: d.tol_osc,
            sample_every: d.sample_every,
            snapshot_every: d.snapshot_every,
            collect_harnack: d.collect_harnack,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuitySpec {
    /// Fixed κ > 1; omitted means the automatic policy.
    pub kappa: Option<f64>,
    pub delta_bisection_iters: Option<usize>,
    /// Subsolution potential `u̲` (defaults to zero, so `χ' = χ`).
    pub subsolution: Option<ScalarFieldSpec>,
}

/// Scenario lowered into runnable pieces.
pub struct Built {
    pub data: ProblemData,
    pub flow: FlowConfig,
    pub continuity: ContinuityConfig,
    pub u_lower: ScalarField,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.problem.n;
        if self.problem.alpha < 1 || self.problem.alpha > n {
            return Err(Error::Scenario(format!(
                "alpha {} outside 1..={n}",
                self.problem.alpha
            )));
        }
        if self.grid.points.len() != 2 * n || self.grid.periods.len() != 2 * n {
            return Err(Error::Scenario(format!(
                "grid needs {} per-axis entries",
                2 * n
            )));
        }
        if self.grid.periods.iter().any(|&l| l <= 0.0) {
            return Err(Error::Scenario("grid periods must be positive".into()));
        }
        check_matrix_spec(&self.omega, n, &self.grid, "omega")?;
        check_matrix_spec(&self.chi, n, &self.grid, "chi")?;
        check_psi_spec(&self.psi, n, &self.grid)?;
        if let Some(k) = self.continuity.kappa {
            if k <= 1.0 {
                return Err(Error::Scenario(format!("continuity.kappa {k} must exceed 1")));
            }
        }
        if let Some(sub) = &self.continuity.subsolution {
            check_scalar_spec(sub, n, &self.grid, "continuity.subsolution")?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Built> {
        let grid = PeriodicGrid::new(self.problem.n, &self.grid.points, &self.grid.periods)?;
        let omega = build_matrix_field(&grid, &self.omega)?;
        let chi = build_matrix_field(&grid, &self.chi)?;
        let psi = build_psi(&grid, &omega, &chi, self.problem.alpha, &self.psi)?;
        let data = ProblemData::new(omega, chi, psi, self.problem.alpha)?;

        let flow = FlowConfig {
            dt_safety: self.flow.dt_safety,
            t_max: self.flow.t_max,
            tol_osc: self.flow.tol_osc,
            sample_every: self.flow.sample_every.max(1),
            snapshot_every: self.flow.snapshot_every,
            out_dir: None,
            initial_dt: None,
            collect_harnack: self.flow.collect_harnack,
        };
        let mut continuity = ContinuityConfig { flow: flow.clone(), ..Default::default() };
        if let Some(k) = self.continuity.kappa {
            continuity.kappa = KappaPolicy::Fixed(k);
        }
        if let Some(iters) = self.continuity.delta_bisection_iters {
            continuity.delta_bisection_iters = iters;
        }
        let u_lower = match &self.continuity.subsolution {
            Some(spec) => build_scalar_field(&grid, spec),
            None => ScalarField::zeros(&grid),
        };
        Ok(Built { data, flow, continuity, u_lower })
    }
}

fn parse_matrix(n: usize, rows: &[Vec<ComplexPair>], what: &str) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Scenario(format!("{what}: expected {n}×{n} matrix")));
    }
    let mut m = CMat::zero(n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            m.set(i, j, Complex64::new(re, im));
        }
    }
    if m.hermitian_deviation() > HERMITIAN_TOL {
        return Err(Error::Scenario(format!(
            "{what}: matrix deviates from Hermitian by {:.3e}",
            m.hermitian_deviation()
        )));
    }
    Ok(m)
}

fn check_wave(wave: &[i64], n: usize, grid: &GridSpec, what: &str) -> Result<()> {
    if wave.len() != 2 * n {
        return Err(Error::Scenario(format!("{what}: wave vector needs {} entries", 2 * n)));
    }
    for (a, &k) in wave.iter().enumerate() {
        let np = grid.points[a] as i64;
        if 2 * k.abs() > np {
            return Err(Error::Scenario(format!(
                "{what}: wave component {k} unresolvable on {np} points (axis {a})"
            )));
        }
    }
    Ok(())
}

fn check_matrix_spec(spec: &MatrixFieldSpec, n: usize, grid: &GridSpec, what: &str) -> Result<()> {
    parse_matrix(n, &spec.constant, what)?;
    for (i, mode) in spec.modes.iter().enumerate() {
        parse_matrix(n, &mode.coeff, &format!("{what}.modes[{i}]"))?;
        check_wave(&mode.wave, n, grid, &format!("{what}.modes[{i}]"))?;
    }
    Ok(())
}

fn check_scalar_spec(spec: &ScalarFieldSpec, n: usize, grid: &GridSpec, what: &str) -> Result<()> {
    for (i, mode) in spec.modes.iter().enumerate() {
        check_wave(&mode.wave, n, grid, &format!("{what}.modes[{i}]"))?;
    }
    Ok(())
}

fn check_psi_spec(spec: &PsiSpec, n: usize, grid: &GridSpec) -> Result<()> {
    match spec {
        PsiSpec::Constant { constant } => {
            if *constant <= 0.0 {
                return Err(Error::Scenario(format!("psi constant {constant} must be positive")));
            }
        }
        PsiSpec::ModesWithFloor { floor, modes } => {
            if *floor <= 0.0 {
                return Err(Error::Scenario(format!("psi floor {floor} must be positive")));
            }
            for (i, m) in modes.iter().enumerate() {
                if m.amp < 0.0 {
                    return Err(Error::Scenario(format!("psi.modes[{i}].amp must be ≥ 0")));
                }
                check_wave(&m.wave, n, grid, &format!("psi.modes[{i}]"))?;
            }
        }
        PsiSpec::Manufactured { manufactured } => {
            check_scalar_spec(manufactured, n, grid, "psi.manufactured")?;
        }
        PsiSpec::Scaled { scaled } => check_psi_spec(&scaled.base, n, grid)?,
    }
    Ok(())
}

fn mode_phase(wave: &[i64], phase: f64, grid: &PeriodicGrid, x: &[f64]) -> f64 {
    let mut arg = phase;
    for (a, &k) in wave.iter().enumerate() {
        arg += TAU * k as f64 * x[a] / grid.periods()[a];
    }
    arg
}

fn build_matrix_field(grid: &Arc<PeriodicGrid>, spec: &MatrixFieldSpec) -> Result<HermitianField> {
    let n = grid.dim();
    let constant = parse_matrix(n, &spec.constant, "matrix field")?;
    if spec.modes.is_empty() {
        return HermitianField::constant(grid, &constant);
    }
    let modes: Vec<(Vec<i64>, f64, CMat)> = spec
        .modes
        .iter()
        .map(|m| Ok((m.wave.clone(), m.phase, parse_matrix(n, &m.coeff, "mode")?)))
        .collect::<Result<_>>()?;
    let g = grid.clone();
    HermitianField::from_fn(grid, move |x| {
        let mut m = constant;
        for (wave, phase, coeff) in &modes {
            let c = mode_phase(wave, *phase, &g, x).cos();
            m = m.add(&coeff.scale(c));
        }
        m
    })
}

pub fn build_scalar_field(grid: &Arc<PeriodicGrid>, spec: &ScalarFieldSpec) -> ScalarField {
    let modes = spec.modes.clone();
    let constant = spec.constant;
    let g = grid.clone();
    ScalarField::from_fn(grid, move |x| {
        let mut v = constant;
        for m in &modes {
            v += m.amp * mode_phase(&m.wave, m.phase, &g, x).cos();
        }
        v
    })
}

fn build_psi(
    grid: &Arc<PeriodicGrid>,
    omega: &HermitianField,
    chi: &HermitianField,
    alpha: usize,
    spec: &PsiSpec,
) -> Result<ScalarField> {
    match spec {
        PsiSpec::Constant { constant } => Ok(ScalarField::constant(grid, *constant)),
        PsiSpec::ModesWithFloor { floor, modes } => {
            let fl = *floor;
            let ms = modes.clone();
            let g = grid.clone();
            Ok(ScalarField::from_fn(grid, move |x| {
                let mut v = fl;
                for m in &ms {
                    v += m.amp * (1.0 + mode_phase(&m.wave, m.phase, &g, x).cos());
                }
                v
            }))
        }
        PsiSpec::Manufactured { manufactured } => {
            let ustar = build_scalar_field(grid, manufactured);
            // ψ := ratio at u*, via a probe problem with unit density.
            let probe = ProblemData::new(
                omega.clone(),
                chi.clone(),
                ScalarField::constant(grid, 1.0),
                alpha,
            )?;
            let v = operator_value(&probe, &ustar).map_err(|e| match e {
                Error::Inadmissible { least, point } => Error::Scenario(format!(
                    "manufactured u* is inadmissible (least eigenvalue {least:.3e} at point {point})"
                )),
                other => other,
            })?;
            Ok(v.f.map(f64::exp))
        }
        PsiSpec::Scaled { scaled } => {
            let base = build_psi(grid, omega, chi, alpha, &scaled.base)?;
            let factor = scaled.sigma.exp();
            Ok(base.scale(factor))
        }
    }
}

/// Hypothesis report for `cmd check`.
#[derive(Debug)]
pub struct CheckReport {
    pub cone: ConeReport,
    pub invariant_c: f64,
    pub psi_geq_c: bool,
    pub ratio_leq_psi: bool,
    pub admissible_zero: bool,
    pub least_eig_zero: f64,
}

/// Evaluate the standing hypotheses: cone condition for `χ_{u̲}`, the
/// invariant `c`, `ψ ≥ c`, `χ^n/(χ^{n-α}∧ω^α) ≤ ψ`, and admissibility of
/// the zero potential.
pub fn check_hypotheses(data: &ProblemData, u_lower: &ScalarField) -> Result<CheckReport> {
    let chi_prime = crate::operator::chi_u(data, u_lower)?;
    let cone = cone_condition(&chi_prime, data.metric(), data.psi(), data.alpha())?;
    let c = invariant_c(data)?;
    let psi_geq_c = data.psi().inf() >= c - 1e-12;
    let ratio = wedge_ratio_of_chi(data)?;
    let ratio_leq_psi = ratio.sub(data.psi())?.sup() <= 1e-12;
    let (adm, least) = crate::operator::admissible(data, &ScalarField::zeros(data.grid()))?;
    Ok(CheckReport {
        cone,
        invariant_c: c,
        psi_geq_c,
        ratio_leq_psi,
        admissible_zero: adm,
        least_eig_zero: least,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        [problem]
        n = 2
        alpha = 1

        [grid]
        points = [8, 1, 8, 1]
        periods = [1.0, 1.0, 1.0, 1.0]

        [omega]
        constant = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]

        [chi]
        constant = [[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]]

        [psi]
        constant = 1.0
    "#;

    #[test]
    fn parses_and_builds_basic_scenario() {
        let sc = Scenario::from_toml_str(BASIC).unwrap();
        let built = sc.build().unwrap();
        assert_eq!(built.data.dim(), 2);
        assert_eq!(built.data.alpha(), 1);
        assert!((built.data.psi().sup() - 1.0).abs() < 1e-15);
        let report = check_hypotheses(&built.data, &built.u_lower).unwrap();
        assert!(report.cone.satisfied);
        assert!((report.invariant_c - 2.0).abs() < 1e-12);
        assert!(!report.psi_geq_c); // c = 2 > 1 = ψ
        assert!(report.admissible_zero);
    }

    #[test]
    fn rejects_bad_alpha_and_periods() {
        let bad = BASIC.replace("alpha = 1", "alpha = 3");
        assert!(Scenario::from_toml_str(&bad).is_err());
        let bad = BASIC.replace("periods = [1.0, 1.0, 1.0, 1.0]", "periods = [1.0, -1.0, 1.0, 1.0]");
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_non_hermitian_matrix() {
        let bad = BASIC.replace(
            "constant = [[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]]",
            "constant = [[[2.0, 0.0], [0.5, 0.0]], [[0.0, 0.0], [2.0, 0.0]]]",
        );
        assert!(matches!(Scenario::from_toml_str(&bad), Err(Error::Scenario(_))));
    }

    #[test]
    fn rejects_nonpositive_psi_floor() {
        let bad = BASIC.replace(
            "[psi]\n        constant = 1.0",
            "[psi]\n        floor = 0.0\n        modes = []",
        );
        assert!(Scenario::from_toml_str(&bad).is_err());
    }

    #[test]
    fn manufactured_psi_is_exact_ratio() {
        let text = BASIC.replace(
            "[psi]\n        constant = 1.0",
            "[psi.manufactured]\n        modes = [{ wave = [1, 0, 0, 0], amp = 0.01 }]",
        );
        let sc = Scenario::from_toml_str(&text).unwrap();
        let built = sc.build().unwrap();
        // The manufactured u* must be an exact stationary point.
        let ustar = build_scalar_field(
            built.data.grid(),
            &ScalarFieldSpec {
                constant: 0.0,
                modes: vec![ScalarModeSpec { wave: vec![1, 0, 0, 0], amp: 0.01, phase: 0.0 }],
            },
        );
        let v = operator_value(&built.data, &ustar).unwrap();
        assert!(v.f.max_abs() <= 1e-13);
    }

    #[test]
    fn scaled_psi_multiplies() {
        let text = BASIC.replace(
            "[psi]\n        constant = 1.0",
            "[psi.scaled]\n        sigma = 0.5\n        base = { constant = 1.0 }",
        );
        let sc = Scenario::from_toml_str(&text).unwrap();
        let built = sc.build().unwrap();
        assert!((built.data.psi().sup() - 0.5f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn unresolvable_mode_rejected() {
        let text = BASIC.replace(
            "[psi]\n        constant = 1.0",
            "[psi]\n        floor = 1.0\n        modes = [{ wave = [7, 0, 0, 0], amp = 0.1 }]",
        );
        assert!(Scenario::from_toml_str(&text).is_err());
    }
}
