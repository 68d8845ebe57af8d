//! JSON run configuration and its conversion into library types.
//!
//! Matrices are nested arrays of `[re, im]` pairs, row by row. Coefficients
//! are one of
//!
//! ```json
//! {"family": "decay_scalar", "params": {"a": 1.0, "c": 1.0}}
//! {"constant": {"P": [[[1, 0]]]}}
//! {"exponential": {"amplitudes": {"P": [[[1, 0]]]}, "rates": {"P": 1.0}}}
//! {"table": {"grid": [0, 1, 2], "values": [{"P": ...}, {"P": ...}, {"P": ...}]}}
//! ```
//!
//! Blocks left out of `constant`, `exponential` or `table` values are zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use riccati_kit::classify::{PrincipalConfig, SamplingConfig};
use riccati_kit::coefficients::{builtin_scenario, CoefficientKind, ScenarioParams, Source, Table};
use riccati_kit::{ClassifyConfig, CoefficientSpec, IntegratorConfig, MatrixC, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_json(m: &MatrixJson, what: &str) -> Result<MatrixC, CliError> {
    let rows: Vec<Vec<Complex64>> = m
        .iter()
        .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    if rows.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(CliError::Validation(format!("{what}: entries must be finite")));
    }
    MatrixC::from_rows(&rows).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

pub fn matrix_to_json(m: &MatrixC) -> MatrixJson {
    let n = m.dim();
    (0..n).map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Anchor time; also the start of the coefficient domain.
    #[serde(default)]
    pub t1: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<CoefficientsConfig>,
    /// Initial value `Z(t1)`; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<MatrixJson>,
    /// Family offset for `family` and `identities`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<MatrixJson>,
    /// Two system solutions `(Φ, Ψ)(t1)` for `system-diagnostics`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<SystemSolutionConfig>>,
    #[serde(default)]
    pub integrator: IntegratorJson,
    #[serde(default)]
    pub classify: ClassifyJson,
    #[serde(default)]
    pub sampling: SamplingJson,
    #[serde(default)]
    pub principal: PrincipalJson,
    #[serde(default)]
    pub output: OutputJson,
}

fn default_horizon() -> f64 {
    20.0
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<FamilyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<BTreeMap<String, MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponential: Option<ExponentialJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    pub dim: usize,
    pub a: f64,
    pub c: f64,
    pub cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixJson>,
}

impl Default for FamilyParams {
    fn default() -> Self {
        let d = ScenarioParams::<f64>::default();
        Self {
            dim: d.dim,
            a: d.a,
            c: d.c,
            cutoff: d.cutoff,
            q: None,
            r: None,
            s: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialJson {
    pub amplitudes: BTreeMap<String, MatrixJson>,
    #[serde(default)]
    pub rates: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJson {
    pub grid: Vec<f64>,
    pub values: Vec<BTreeMap<String, MatrixJson>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSolutionConfig {
    pub phi: MatrixJson,
    pub psi: MatrixJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorJson {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Unlimited when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    pub min_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    pub blowup_threshold: f64,
    pub blowup_localize_tol: f64,
    pub max_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorJson {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: None,
            min_step: d.min_step,
            initial_step: d.initial_step,
            blowup_threshold: d.blowup_threshold,
            blowup_localize_tol: d.blowup_localize_tol,
            max_steps: d.max_steps,
            fixed_step: d.fixed_step,
        }
    }
}

impl IntegratorJson {
    pub fn build(&self) -> Result<IntegratorConfig, CliError> {
        let cfg = IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            min_step: self.min_step,
            initial_step: self.initial_step,
            blowup_threshold: self.blowup_threshold,
            blowup_localize_tol: self.blowup_localize_tol,
            max_steps: self.max_steps,
            fixed_step: self.fixed_step,
        };
        cfg.validate().map_err(|e| CliError::Validation(format!("integrator: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyJson {
    pub plateau_tol: f64,
    pub plateau_fraction: f64,
    pub growth_factor: f64,
    pub growth_windows: usize,
    pub samples: usize,
    pub alpha_tol: f64,
    pub beta_tol: f64,
    pub cluster_tol: f64,
    pub nu_tail_tol: f64,
    pub nu_max_span: f64,
}

impl Default for ClassifyJson {
    fn default() -> Self {
        let d = ClassifyConfig::default();
        Self {
            plateau_tol: d.plateau_tol,
            plateau_fraction: d.plateau_fraction,
            growth_factor: d.growth_factor,
            growth_windows: d.growth_windows,
            samples: d.samples,
            alpha_tol: d.alpha_tol,
            beta_tol: d.beta_tol,
            cluster_tol: d.cluster_tol,
            nu_tail_tol: d.nu_tail_tol,
            nu_max_span: d.nu_max_span,
        }
    }
}

impl ClassifyJson {
    pub fn build(&self) -> Result<ClassifyConfig, CliError> {
        let positive = [
            ("plateau_tol", self.plateau_tol),
            ("growth_factor", self.growth_factor),
            ("alpha_tol", self.alpha_tol),
            ("beta_tol", self.beta_tol),
            ("cluster_tol", self.cluster_tol),
            ("nu_tail_tol", self.nu_tail_tol),
            ("nu_max_span", self.nu_max_span),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Validation(format!("classify.{name} must be positive")));
            }
        }
        if !(self.plateau_fraction > 0.0 && self.plateau_fraction < 1.0) {
            return Err(CliError::Validation("classify.plateau_fraction must lie in (0, 1)".into()));
        }
        if self.samples < 10 || self.growth_windows == 0 {
            return Err(CliError::Validation(
                "classify.samples must be at least 10 and growth_windows positive".into(),
            ));
        }
        Ok(ClassifyConfig {
            plateau_tol: self.plateau_tol,
            plateau_fraction: self.plateau_fraction,
            growth_factor: self.growth_factor,
            growth_windows: self.growth_windows,
            samples: self.samples,
            alpha_tol: self.alpha_tol,
            beta_tol: self.beta_tol,
            cluster_tol: self.cluster_tol,
            nu_tail_tol: self.nu_tail_tol,
            nu_max_span: self.nu_max_span,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingJson {
    pub draws: usize,
    pub radius: f64,
    pub real_grid: Vec<f64>,
    pub scenario_seeds: bool,
    pub orbit_tol: f64,
    pub min_regular: usize,
}

impl Default for SamplingJson {
    fn default() -> Self {
        let d = SamplingConfig::<f64>::default();
        Self {
            draws: d.draws,
            radius: d.radius,
            real_grid: d.real_grid,
            scenario_seeds: d.scenario_seeds,
            orbit_tol: d.orbit_tol,
            min_regular: d.min_regular,
        }
    }
}

impl SamplingJson {
    pub fn build(&self, seed: u64, horizon: f64) -> Result<SamplingConfig<f64>, CliError> {
        if !(self.radius >= 0.0) || !(self.orbit_tol > 0.0) || self.real_grid.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Validation(
                "sampling: radius must be non-negative, orbit_tol positive, real_grid finite".into(),
            ));
        }
        Ok(SamplingConfig {
            draws: self.draws,
            radius: self.radius,
            seed,
            horizon,
            real_grid: self.real_grid.clone(),
            scenario_seeds: self.scenario_seeds,
            orbit_tol: self.orbit_tol,
            min_regular: self.min_regular,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrincipalJson {
    pub margin: f64,
    pub tail_rel_tol: f64,
    pub residual_tol: f64,
    pub residual_samples: usize,
    pub family_det_floor: f64,
    pub family_tol: f64,
    pub classify_horizon: f64,
}

impl Default for PrincipalJson {
    fn default() -> Self {
        let d = PrincipalConfig::<f64>::default();
        Self {
            margin: d.margin,
            tail_rel_tol: d.tail_rel_tol,
            residual_tol: d.residual_tol,
            residual_samples: d.residual_samples,
            family_det_floor: d.family_det_floor,
            family_tol: d.family_tol,
            classify_horizon: d.classify_horizon,
        }
    }
}

impl PrincipalJson {
    pub fn build(&self, horizon: f64, classify: ClassifyConfig) -> Result<PrincipalConfig<f64>, CliError> {
        if !(self.margin >= 0.0) || !(self.tail_rel_tol > 0.0) || self.residual_samples < 2 {
            return Err(CliError::Validation(
                "principal: margin must be non-negative, tail_rel_tol positive, residual_samples ≥ 2".into(),
            ));
        }
        Ok(PrincipalConfig {
            horizon,
            margin: self.margin,
            tail_rel_tol: self.tail_rel_tol,
            residual_tol: self.residual_tol,
            residual_samples: self.residual_samples,
            family_det_floor: self.family_det_floor,
            family_tol: self.family_tol,
            classify_horizon: self.classify_horizon,
            classify,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputJson {
    /// Uniform output grid size over `[t1, horizon]`.
    pub samples: usize,
}

impl Default for OutputJson {
    fn default() -> Self {
        Self { samples: 201 }
    }
}

const RICCATI_BLOCKS: [&str; 4] = ["P", "Q", "R", "S"];
const SYSTEM_BLOCKS: [&str; 4] = ["A", "B", "C", "D"];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.t1.is_finite() || !self.horizon.is_finite() || self.horizon <= self.t1 {
            return Err(CliError::Validation("horizon must be finite and exceed t1".into()));
        }
        if self.output.samples < 2 {
            return Err(CliError::Validation("output.samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Uniform grid over `[t1, horizon]`.
    pub fn grid(&self) -> Vec<f64> {
        let k = self.output.samples - 1;
        (0..=k)
            .map(|i| if i == k { self.horizon } else { self.t1 + (self.horizon - self.t1) * i as f64 / k as f64 })
            .collect()
    }

    pub fn riccati_spec(&self) -> Result<Arc<CoefficientSpec>, CliError> {
        let c = self
            .coefficients
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs `coefficients`".into()))?;
        Ok(Arc::new(riccati_from(c, self.t1)?))
    }

    /// The `system` entry, or the system view of `coefficients`.
    pub fn system_spec(&self) -> Result<Arc<SystemSpec>, CliError> {
        match (&self.system, &self.coefficients) {
            (Some(c), _) => {
                if c.family.is_some() {
                    return Ok(Arc::new(Arc::new(riccati_from(c, self.t1)?).as_system()));
                }
                let (dim, source) = source_from(c, &SYSTEM_BLOCKS, "system")?;
                SystemSpec::new(dim, self.t1, source).map(Arc::new).map_err(validation("system"))
            }
            (None, Some(_)) => Ok(Arc::new(self.riccati_spec()?.as_system())),
            (None, None) => Err(CliError::Validation("config needs `system` or `coefficients`".into())),
        }
    }

    pub fn z0(&self, dim: usize) -> Result<MatrixC, CliError> {
        sized(self.z0.as_ref(), dim, "z0")
    }

    pub fn lambda(&self, dim: usize) -> Result<MatrixC, CliError> {
        match &self.lambda {
            Some(_) => sized(self.lambda.as_ref(), dim, "lambda"),
            None => Err(CliError::Validation("config needs `lambda`".into())),
        }
    }
}

fn validation(what: &'static str) -> impl Fn(riccati_kit::Error) -> CliError {
    move |e| CliError::Validation(format!("{what}: {e}"))
}

fn sized(m: Option<&MatrixJson>, dim: usize, what: &str) -> Result<MatrixC, CliError> {
    let Some(m) = m else { return Ok(MatrixC::zeros(dim)) };
    let m = matrix_from_json(m, what)?;
    if m.dim() != dim {
        return Err(CliError::Validation(format!("{what}: expected {dim}×{dim}, got {0}×{0}", m.dim())));
    }
    Ok(m)
}

fn riccati_from(c: &CoefficientsConfig, t1: f64) -> Result<CoefficientSpec, CliError> {
    if let Some(name) = &c.family {
        if c.constant.is_some() || c.exponential.is_some() || c.table.is_some() {
            return Err(CliError::Validation("coefficients: give exactly one form".into()));
        }
        let p = c.params.clone().unwrap_or_default();
        let opt = |m: &Option<MatrixJson>, what| m.as_ref().map(|m| matrix_from_json(m, what)).transpose();
        let params = ScenarioParams {
            dim: p.dim,
            t0: t1,
            a: p.a,
            c: p.c,
            cutoff: p.cutoff,
            q: opt(&p.q, "params.q")?,
            r: opt(&p.r, "params.r")?,
            s: opt(&p.s, "params.s")?,
        };
        return builtin_scenario(name, params).map_err(validation("coefficients"));
    }
    if c.params.is_some() {
        return Err(CliError::Validation("coefficients: `params` only goes with `family`".into()));
    }
    let (dim, source) = source_from(c, &RICCATI_BLOCKS, "coefficients")?;
    CoefficientSpec::new(dim, t1, CoefficientKind::Direct(source)).map_err(validation("coefficients"))
}

fn source_from(c: &CoefficientsConfig, names: &[&str; 4], what: &str) -> Result<(usize, Source<f64>), CliError> {
    let forms = [c.constant.is_some(), c.exponential.is_some(), c.table.is_some(), c.family.is_some()];
    if forms.iter().filter(|&&f| f).count() != 1 {
        return Err(CliError::Validation(format!(
            "{what}: give exactly one of `constant`, `exponential`, `table`{}",
            if what == "coefficients" { ", `family`" } else { "" }
        )));
    }
    if c.family.is_some() {
        return Err(CliError::Validation(format!("{what}: `family` is not available here")));
    }
    if let Some(blocks) = &c.constant {
        let dim = infer_dim(blocks, names, what)?;
        return Ok((dim, Source::Constant(quad(blocks, names, dim, what)?)));
    }
    if let Some(e) = &c.exponential {
        let dim = infer_dim(&e.amplitudes, names, what)?;
        check_keys(e.rates.keys(), names, what)?;
        let rate = |k: &str| e.rates.get(k).copied().unwrap_or(0.0);
        let rates = [rate(names[0]), rate(names[1]), rate(names[2]), rate(names[3])];
        if rates.iter().any(|r| !r.is_finite()) {
            return Err(CliError::Validation(format!("{what}: rates must be finite")));
        }
        return Ok((dim, Source::Exponential { amplitudes: quad(&e.amplitudes, names, dim, what)?, rates }));
    }
    let t = c.table.as_ref().unwrap();
    let first = t
        .values
        .first()
        .ok_or_else(|| CliError::Validation(format!("{what}: table needs values")))?;
    let dim = infer_dim(first, names, what)?;
    let values = t
        .values
        .iter()
        .map(|v| quad(v, names, dim, what))
        .collect::<Result<Vec<_>, _>>()?;
    let table = Table::new(t.grid.clone(), values).map_err(|e| CliError::Validation(format!("{what}: {e}")))?;
    Ok((dim, Source::Tabulated(table)))
}

fn check_keys<'a>(keys: impl Iterator<Item = &'a String>, names: &[&str; 4], what: &str) -> Result<(), CliError> {
    for k in keys {
        if !names.contains(&k.as_str()) {
            return Err(CliError::Validation(format!(
                "{what}: unknown block `{k}` (expected {})",
                names.join(", ")
            )));
        }
    }
    Ok(())
}

fn infer_dim(blocks: &BTreeMap<String, MatrixJson>, names: &[&str; 4], what: &str) -> Result<usize, CliError> {
    check_keys(blocks.keys(), names, what)?;
    blocks
        .values()
        .next()
        .map(|m| m.len())
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{what}: at least one nonempty block is needed")))
}

fn quad(
    blocks: &BTreeMap<String, MatrixJson>,
    names: &[&str; 4],
    dim: usize,
    what: &str,
) -> Result<[MatrixC; 4], CliError> {
    check_keys(blocks.keys(), names, what)?;
    let get = |k: &str| {
        let label = format!("{what}.{k}");
        match blocks.get(k) {
            Some(m) => {
                let m = matrix_from_json(m, &label)?;
                if m.dim() != dim {
                    return Err(CliError::Validation(format!("{label}: expected {dim}×{dim}")));
                }
                Ok(m)
            }
            None => Ok(MatrixC::zeros(dim)),
        }
    };
    Ok([get(names[0])?, get(names[1])?, get(names[2])?, get(names[3])?])
}
