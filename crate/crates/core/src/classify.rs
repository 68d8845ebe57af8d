//! Normal/extremal classification of solutions and equations.
//!
//! A regular solution is normal when every nearby initial value also gives
//! a regular solution, and extremal otherwise. Normality is equivalent to
//! boundedness of `μ(t1, ·)` on `[t1, ∞)`. Boundedness on a half-line cannot
//! be read off finite data, so every verdict here is a finite-horizon
//! heuristic that carries its horizon, its evidence and a confidence.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coefficients::{Builtin, CoefficientSpec};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::ode::IntegratorConfig;
use crate::quad;
use crate::riccati::{self, family_mu, family_solution, FundamentalData, RiccatiTrajectory};
use crate::scalar::{cx, Cx, Real};

type M<T> = ComplexMatrix<T>;

/// Thresholds shared by the classification heuristics.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyConfig<T> {
    /// Bounded when the running sup of `‖μ‖` rises by less than this
    /// (relative) over the final window.
    pub plateau_tol: T,
    /// Length of the final window as a fraction of the horizon.
    pub plateau_fraction: T,
    /// Unbounded when `‖μ‖` grows by more than this factor on each of
    /// `growth_windows` consecutive doubling windows ending at the horizon.
    pub growth_factor: T,
    pub growth_windows: usize,
    /// Evenly spaced samples of `‖μ‖` over the horizon.
    pub samples: usize,
    pub alpha_tol: T,
    pub beta_tol: T,
    pub cluster_tol: T,
    pub nu_tail_tol: T,
    /// Longest tail span `nu_tail` will integrate before giving up.
    pub nu_max_span: T,
}

impl<T: Real> Default for ClassifyConfig<T> {
    fn default() -> Self {
        Self {
            plateau_tol: T::lit(1e-3),
            plateau_fraction: T::lit(0.2),
            growth_factor: T::lit(1.1),
            growth_windows: 3,
            samples: 400,
            alpha_tol: T::lit(1e-8),
            beta_tol: T::lit(1e-6),
            cluster_tol: T::lit(1e-4),
            nu_tail_tol: T::lit(1e-8),
            nu_max_span: T::lit(1e4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Boundedness<T> {
    Bounded { sup_norm: T },
    /// Ratios `‖μ(b)‖/‖μ(a)‖` over the doubling windows.
    Unbounded { growth_ratios: Vec<T> },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundednessVerdict<T> {
    pub kind: Boundedness<T>,
    pub horizon: T,
    /// `(t, ‖μ(t)‖)` in increasing `t`.
    pub samples: Vec<(T, T)>,
    /// Relative rise of the running sup over the final window.
    pub plateau_rise: T,
    pub growth_ratios: Vec<T>,
}

impl<T: Real> BoundednessVerdict<T> {
    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, Boundedness::Bounded { .. })
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self.kind, Boundedness::Unbounded { .. })
    }
}

fn sample_times<T: Real>(t1: T, horizon: T, cfg: &ClassifyConfig<T>) -> Vec<T> {
    let k = cfg.samples.max(8) - 1;
    let span = horizon - t1;
    let mut ts: Vec<T> = (0..=k)
        .map(|i| t1 + span * T::from_usize(i).unwrap() / T::from_usize(k).unwrap())
        .collect();
    let mut w = span;
    for _ in 0..=cfg.growth_windows {
        ts.push(t1 + w);
        w = w * T::lit(0.5);
    }
    ts.push(t1 + span * (T::one() - cfg.plateau_fraction));
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    *ts.last_mut().unwrap() = horizon;
    ts
}

/// Applies the plateau and growth tests to `(t, ‖μ(t)‖)` samples that
/// cover `[t1, horizon]`.
pub fn judge_boundedness<T: Real>(
    samples: Vec<(T, T)>,
    t1: T,
    horizon: T,
    cfg: &ClassifyConfig<T>,
) -> BoundednessVerdict<T> {
    let span = horizon - t1;
    let at = |t: T| -> T {
        // nearest sample; window points are always sampled exactly
        let i = samples.partition_point(|&(s, _)| s < t).min(samples.len() - 1);
        samples[i].1
    };
    let mut growth_ratios = Vec::with_capacity(cfg.growth_windows);
    let mut w = span;
    for _ in 0..cfg.growth_windows {
        let hi = at(t1 + w);
        let lo = at(t1 + w * T::lit(0.5));
        growth_ratios.push(if lo > T::zero() { hi / lo } else if hi > T::zero() { T::infinity() } else { T::one() });
        w = w * T::lit(0.5);
    }
    growth_ratios.reverse();

    let cut = t1 + span * (T::one() - cfg.plateau_fraction);
    let sup_all = samples.iter().fold(T::zero(), |m, &(_, v)| m.max(v));
    let sup_head = samples
        .iter()
        .filter(|&&(s, _)| s <= cut)
        .fold(T::zero(), |m, &(_, v)| m.max(v));
    let plateau_rise = if sup_all == T::zero() {
        T::zero()
    } else if sup_head > T::zero() {
        (sup_all - sup_head) / sup_head
    } else {
        T::infinity()
    };

    let kind = if sup_all == T::zero() {
        Boundedness::Bounded { sup_norm: T::zero() }
    } else if !growth_ratios.is_empty() && growth_ratios.iter().all(|&r| r > cfg.growth_factor) {
        Boundedness::Unbounded {
            growth_ratios: growth_ratios.clone(),
        }
    } else if plateau_rise < cfg.plateau_tol {
        Boundedness::Bounded { sup_norm: sup_all }
    } else {
        Boundedness::Inconclusive
    };
    BoundednessVerdict {
        kind,
        horizon,
        samples,
        plateau_rise,
        growth_ratios,
    }
}

fn covering<T: Real>(fd: &FundamentalData<T>, horizon: T) -> Result<std::borrow::Cow<'_, FundamentalData<T>>> {
    if fd.t_end() >= horizon {
        Ok(std::borrow::Cow::Borrowed(fd))
    } else {
        Ok(std::borrow::Cow::Owned(fd.extend(horizon)?))
    }
}

/// Boundedness of `‖μ(t1, t)‖` on `[t1, horizon]`. Extends `fd` if needed;
/// when that fails the verdict is inconclusive.
pub fn mu_boundedness<T: Real>(fd: &FundamentalData<T>, horizon: T, cfg: &ClassifyConfig<T>) -> BoundednessVerdict<T> {
    let t1 = fd.t1();
    let inconclusive = BoundednessVerdict {
        kind: Boundedness::Inconclusive,
        horizon,
        samples: Vec::new(),
        plateau_rise: T::infinity(),
        growth_ratios: Vec::new(),
    };
    if !(horizon > t1) {
        return inconclusive;
    }
    let fd = match covering(fd, horizon) {
        Ok(fd) => fd,
        Err(_) => return inconclusive,
    };
    let samples: Result<Vec<(T, T)>> = sample_times(t1, horizon, cfg)
        .into_iter()
        .map(|t| Ok((t, fd.mu(t)?.op_norm())))
        .collect();
    match samples {
        Ok(s) => judge_boundedness(s, t1, horizon, cfg),
        Err(_) => inconclusive,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolutionClass {
    Normal,
    Extremal,
    NotRegular,
}

impl SolutionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionClass::Normal => "normal",
            SolutionClass::Extremal => "extremal",
            SolutionClass::NotRegular => "not_regular",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionClassification<T> {
    pub class: SolutionClass,
    pub confidence: T,
    /// Set when the boundedness test was inconclusive and the solution is
    /// reported as normal by default.
    pub low_confidence: bool,
    pub boundedness: Option<BoundednessVerdict<T>>,
    /// Escape time for non-regular solutions.
    pub blowup_time: Option<T>,
    /// Solution value at the horizon, for regular solutions.
    pub final_value: Option<M<T>>,
}

fn from_boundedness<T: Real>(b: BoundednessVerdict<T>, final_value: Option<M<T>>) -> SolutionClassification<T> {
    let (class, confidence, low) = match b.kind {
        Boundedness::Bounded { .. } => (SolutionClass::Normal, T::lit(0.95), false),
        Boundedness::Unbounded { .. } => (SolutionClass::Extremal, T::lit(0.95), false),
        Boundedness::Inconclusive => (SolutionClass::Normal, T::lit(0.5), true),
    };
    SolutionClassification {
        class,
        confidence,
        low_confidence: low,
        boundedness: Some(b),
        blowup_time: None,
        final_value,
    }
}

fn not_regular<T: Real>(time: T, wide: bool) -> SolutionClassification<T> {
    SolutionClassification {
        class: SolutionClass::NotRegular,
        confidence: if wide { T::lit(0.7) } else { T::one() },
        low_confidence: wide,
        boundedness: None,
        blowup_time: Some(time),
        final_value: None,
    }
}

/// Classifies the solution through `(t1, z0)` on `[t1, horizon]`.
pub fn classify_solution<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    z0: &M<T>,
    t1: T,
    horizon: T,
    int_cfg: &IntegratorConfig<T>,
    cfg: &ClassifyConfig<T>,
) -> Result<SolutionClassification<T>> {
    let rt = riccati::solve(spec, z0, t1, horizon, int_cfg)?;
    if let crate::ode::Status::BlowUpAt { time, wide, .. } = rt.status() {
        return Ok(not_regular(*time, *wide));
    }
    let fd = match riccati::fundamental_pair(&rt) {
        Ok(fd) => fd,
        Err(Error::BaseNotRegular { t }) => return Ok(not_regular(T::lit(t), true)),
        Err(e) => return Err(e),
    };
    let b = mu_boundedness(&fd, horizon, cfg);
    Ok(from_boundedness(b, Some(rt.z(horizon)?)))
}

/// Classifies the family member `Z_Λ` through `Z(t1) + Λ` using only the
/// base data: `μ_{Z_Λ} = μ (I + Λμ)⁻¹`. This stays accurate along members
/// that repel their neighbours, where direct forward integration drifts.
pub fn classify_family_member<T: Real>(
    fd: &FundamentalData<T>,
    lambda: &M<T>,
    horizon: T,
    cfg: &ClassifyConfig<T>,
) -> Result<SolutionClassification<T>> {
    let t1 = fd.t1();
    let fd = covering(fd, horizon)?;
    let mut samples = Vec::new();
    for t in sample_times(t1, horizon, cfg) {
        match family_mu(&fd, lambda, t) {
            Ok(m) => samples.push((t, m.op_norm())),
            Err(Error::FamilyBlowUp { t }) => return Ok(not_regular(T::lit(t), false)),
            Err(e) => return Err(e),
        }
    }
    let b = judge_boundedness(samples, t1, horizon, cfg);
    Ok(from_boundedness(b, Some(family_solution(&fd, lambda, horizon)?)))
}

/// Condition α (no singularity of `I + Λμ` before the tail window) and
/// condition β (some limit point `K` of μ makes `I + ΛK` singular).
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaCheck<T> {
    pub lambda: M<T>,
    pub alpha_ok: bool,
    pub alpha_min_det: T,
    pub beta_ok: bool,
    /// Candidate limit point closest to making `I + ΛK` singular.
    pub k: M<T>,
    pub beta_det: T,
    pub clusters: usize,
}

impl<T> OmegaCheck<T> {
    pub fn is_member(&self) -> bool {
        self.alpha_ok && self.beta_ok
    }
}

fn cluster_centroids<T: Real>(points: &[M<T>], tol: T) -> Vec<M<T>> {
    let mut clusters: Vec<(M<T>, usize)> = Vec::new();
    for p in points {
        let hit = clusters.iter_mut().find(|(sum, count)| {
            let c = sum.scale(cx(T::one() / T::from_usize(*count).unwrap()));
            (&c - p).max_abs() < tol
        });
        match hit {
            Some((sum, count)) => {
                *sum += p;
                *count += 1;
            }
            None => clusters.push((p.clone(), 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(sum, count)| sum.scale(cx(T::one() / T::from_usize(count).unwrap())))
        .collect()
}

/// Tests whether `Λ` belongs to the set parametrising the extremal
/// solutions of the family of a normal base solution.
///
/// α is checked on the samples before the tail window and β on the tail
/// window, where the limit points of μ are approximated by clustering.
pub fn omega_membership<T: Real>(
    fd: &FundamentalData<T>,
    lambda: &M<T>,
    horizon: T,
    cfg: &ClassifyConfig<T>,
) -> Result<OmegaCheck<T>> {
    if lambda.dim() != fd.dim() {
        return Err(Error::DimensionMismatch {
            expected: fd.dim(),
            got: lambda.dim(),
        });
    }
    if !mu_boundedness(fd, horizon, cfg).is_bounded() {
        return Err(Error::BaseNotNormal);
    }
    let fd = covering(fd, horizon)?;
    let t1 = fd.t1();
    let cut = t1 + (horizon - t1) * (T::one() - cfg.plateau_fraction);
    let id = M::identity(fd.dim());
    let mut alpha_min_det = T::infinity();
    let mut tail = Vec::new();
    for t in sample_times(t1, horizon, cfg) {
        let mu = fd.mu(t)?;
        if t < cut {
            alpha_min_det = alpha_min_det.min((&id + &(lambda * &mu)).det().norm());
        } else {
            tail.push(mu);
        }
    }
    let centroids = cluster_centroids(&tail, cfg.cluster_tol);
    let (k, beta_det) = centroids
        .iter()
        .map(|k| (k.clone(), (&id + &(lambda * k)).det().norm()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("tail window is sampled");
    Ok(OmegaCheck {
        lambda: lambda.clone(),
        alpha_ok: alpha_min_det > cfg.alpha_tol,
        alpha_min_det,
        beta_ok: beta_det < cfg.beta_tol,
        k,
        beta_det,
        clusters: centroids.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum NuKind<T> {
    Convergent {
        value: M<T>,
        tail_bound: T,
    },
    Divergent {
        /// `‖∫‖` over each doubling window.
        window_norms: Vec<T>,
        /// The window budget ran out (or the base escaped) before a
        /// decision: treat as inconclusive.
        horizon_exceeded: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuResult<T> {
    pub kind: NuKind<T>,
    pub t_eval: T,
}

impl<T> NuResult<T> {
    pub fn is_convergent(&self) -> bool {
        matches!(self.kind, NuKind::Convergent { .. })
    }
}

/// `ν(t) = ∫_t^∞ φ⁻¹ P ψ⁻¹`, summed over windows of width 1, 2, 4, ….
///
/// Convergent once a window contributes less than `nu_tail_tol` and the
/// geometric estimate of the remainder is below it too; divergent after
/// three consecutive windows that fail to shrink below 90% of their
/// predecessor.
pub fn nu_tail<T: Real>(fd: &FundamentalData<T>, t: T, cfg: &ClassifyConfig<T>) -> Result<NuResult<T>> {
    if t < fd.t1() {
        return Err(Error::OutOfSpan {
            t: t.to_f64_lossy(),
            start: fd.t1().to_f64_lossy(),
            end: fd.t_end().to_f64_lossy(),
        });
    }
    let mut fd = std::borrow::Cow::Borrowed(fd);
    let mut a = t;
    let mut width = T::one();
    let mut sum = M::zeros(fd.dim());
    let mut norms: Vec<T> = Vec::new();
    let mut stalled = 0;
    let divergent = |norms: Vec<T>, exceeded: bool| NuResult {
        kind: NuKind::Divergent {
            window_norms: norms,
            horizon_exceeded: exceeded,
        },
        t_eval: t,
    };
    loop {
        let b = a + width;
        if b - t > cfg.nu_max_span {
            return Ok(divergent(norms, true));
        }
        if fd.t_end() < b {
            match fd.extend(b) {
                Ok(ext) => fd = std::borrow::Cow::Owned(ext),
                Err(_) => return Ok(divergent(norms, true)),
            }
        }
        let c = &fd.mu(b)? - &fd.mu(a)?;
        sum += &c;
        let cn = c.op_norm();
        let prev = norms.last().copied();
        norms.push(cn);
        if let Some(p) = prev {
            if cn >= p * T::lit(0.9) && cn > T::zero() {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        if stalled >= 3 {
            return Ok(divergent(norms, false));
        }
        if cn < cfg.nu_tail_tol {
            let tail_bound = match prev {
                Some(p) if p > T::zero() && cn < p => {
                    let r = cn / p;
                    cn * r / (T::one() - r)
                }
                Some(_) => cn,
                None => cn,
            };
            if tail_bound <= cfg.nu_tail_tol {
                return Ok(NuResult {
                    kind: NuKind::Convergent { value: sum, tail_bound },
                    t_eval: t,
                });
            }
        }
        a = b;
        width = width * T::lit(2.0);
    }
}

/// `ν(t)` to relative accuracy `rel_tol`, by quadrature of the kernel on
/// doubling windows. Returns the (possibly extended) data alongside.
fn nu_relative<T: Real>(
    fd: FundamentalData<T>,
    t: T,
    rel_tol: T,
    max_span: T,
) -> Result<(FundamentalData<T>, M<T>)> {
    let mut fd = fd;
    let mut a = t;
    let mut width = T::one();
    let mut sum = M::zeros(fd.dim());
    let mut prev: Option<T> = None;
    loop {
        let b = a + width;
        if b - t > max_span {
            return Err(Error::NuDivergent);
        }
        if fd.t_end() < b {
            fd = fd.extend(b)?;
        }
        let n = fd.dim();
        let pts = quad::breakpoints(a, b, &[fd.trajectory().times()]);
        let mut window = M::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = quad::integrate(|s| Ok(fd.kernel(s)?[(i, j)]), &pts, rel_tol, T::zero())?;
                window[(i, j)] = v;
            }
        }
        sum += &window;
        let cn = window.op_norm();
        let shrinking = prev.is_none_or(|p| cn < p);
        if cn == T::zero() || (shrinking && cn <= rel_tol * sum.op_norm()) {
            return Ok((fd, sum));
        }
        prev = Some(cn);
        a = b;
        width = width * T::lit(2.0);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalConfig<T> {
    /// The solution is reported on `[t1, horizon]`.
    pub horizon: T,
    /// Extra span integrated beyond the horizon before tracing backwards,
    /// so the terminal error decays before the reported range.
    pub margin: T,
    pub tail_rel_tol: T,
    pub residual_tol: T,
    pub residual_samples: usize,
    /// Family cross-check only where `|det(I + Λμ)|` exceeds this.
    pub family_det_floor: T,
    pub family_tol: T,
    /// Horizon for the extremality check of the result.
    pub classify_horizon: T,
    pub classify: ClassifyConfig<T>,
}

impl<T: Real> Default for PrincipalConfig<T> {
    fn default() -> Self {
        Self {
            horizon: T::lit(20.0),
            margin: T::lit(10.0),
            tail_rel_tol: T::lit(1e-12).max(T::epsilon() * T::lit(64.0)),
            residual_tol: T::lit(1e-6),
            residual_samples: 200,
            family_det_floor: T::lit(1e-3),
            family_tol: T::lit(1e-6),
            classify_horizon: T::lit(15.0),
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PrincipalSolution<T> {
    /// `Z_*` on `[t1, horizon + margin]`.
    pub trajectory: RiccatiTrajectory<T>,
    /// `Λ = −ν(t1)⁻¹`, the offset of `Z_*` in the family of the base.
    pub lambda: M<T>,
    pub nu_t1: M<T>,
    /// `Z_0(t1) − ν(t1)⁻¹`.
    pub z_star_t1: M<T>,
    /// Largest relative Riccati residual on `[t1, horizon]`.
    pub residual: T,
    pub residual_ok: bool,
    /// Largest relative deviation from the family formula with `Λ`.
    pub family_deviation: T,
    pub family_ok: bool,
    pub classification: SolutionClassification<T>,
}

/// `Z_*(t) = Z_0(t) − [Φ(t) ν(t) Ψ(t)]⁻¹`, the extremal solution built from
/// a base solution whose tail integral converges and is nonsingular.
///
/// `Z_*` repels its neighbours forward in time, so it is traced backwards
/// from its value at `horizon + margin`, where `ν` is obtained by
/// quadrature to full relative accuracy.
pub fn principal_solution<T: Real>(
    rt0: &RiccatiTrajectory<T>,
    fd: &FundamentalData<T>,
    cfg: &PrincipalConfig<T>,
) -> Result<PrincipalSolution<T>> {
    let t1 = fd.t1();
    if rt0.t1() != t1 || rt0.dim() != fd.dim() {
        return Err(Error::InvalidInput("base trajectory and fundamental data differ".into()));
    }
    if !(cfg.horizon > t1) {
        return Err(Error::InvalidInput("horizon must exceed the anchor time".into()));
    }
    let n = fd.dim();
    if !nu_tail(fd, t1, &cfg.classify)?.is_convergent() {
        return Err(Error::NuDivergent);
    }
    let max_span = cfg.classify.nu_max_span;
    let (fd1, nu1) = nu_relative(fd.clone(), t1, cfg.tail_rel_tol, max_span)?;
    let singular = |nu: &M<T>| nu.det().norm() < T::lit(1e-12) * nu.op_norm().powi(n as i32);
    if singular(&nu1) {
        return Err(Error::NuSingular { t: t1.to_f64_lossy() });
    }
    let nu1_inv = nu1.inverse().map_err(|_| Error::NuSingular { t: t1.to_f64_lossy() })?;
    let lambda = -&nu1_inv;
    let z_star_t1 = &fd.z(t1)? + &lambda;

    let t_far = cfg.horizon + cfg.margin;
    let fd_far = if fd1.t_end() < t_far { fd1.extend(t_far)? } else { fd1 };
    let (fd_far, nu_far) = nu_relative(fd_far, t_far, cfg.tail_rel_tol, max_span)?;
    if singular(&nu_far) {
        return Err(Error::NuSingular { t: t_far.to_f64_lossy() });
    }
    let correction = &fd_far.psi_inv(t_far)? * &nu_far.solve(&fd_far.phi_inv(t_far)?)?;
    let z_far = &fd_far.z(t_far)? - &correction;
    let trajectory = riccati::solve_backward(rt0.spec(), &z_far, t1, t_far, rt0.config())?;

    let residual = trajectory.max_residual(t1, cfg.horizon, cfg.residual_samples)?;

    let id = M::identity(n);
    let mut family_deviation = T::zero();
    let k = cfg.residual_samples.max(2) - 1;
    for i in 0..=k {
        let t = t1 + (cfg.horizon - t1) * T::from_usize(i).unwrap() / T::from_usize(k).unwrap();
        let mu = fd_far.mu(t)?;
        let det = (&id + &(&lambda * &mu)).det().norm();
        if det < cfg.family_det_floor {
            continue;
        }
        let fam = family_solution(&fd_far, &lambda, t)?;
        let dev = (&trajectory.z(t)? - &fam).op_norm() / T::one().max(fam.op_norm());
        family_deviation = family_deviation.max(dev);
    }

    let classification = classify_family_member(&fd_far, &lambda, cfg.classify_horizon.max(t1 + T::one()), &cfg.classify)?;
    Ok(PrincipalSolution {
        trajectory,
        lambda,
        nu_t1: nu1,
        z_star_t1,
        residual,
        residual_ok: residual <= cfg.residual_tol,
        family_deviation,
        family_ok: family_deviation <= cfg.family_tol,
        classification,
    })
}

/// Equation-level verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquationVerdict {
    Normal,
    Irreconcilable,
    SubExtremal,
    SuperExtremal,
    Unknown,
}

impl EquationVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquationVerdict::Normal => "normal",
            EquationVerdict::Irreconcilable => "irreconcilable",
            EquationVerdict::SubExtremal => "sub_extremal",
            EquationVerdict::SuperExtremal => "super_extremal",
            EquationVerdict::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingConfig<T> {
    pub draws: usize,
    /// Random entries are uniform in the complex disk of this radius.
    pub radius: T,
    pub seed: u64,
    pub horizon: T,
    /// Real multiples of the identity sampled in addition to random draws.
    pub real_grid: Vec<T>,
    /// Add known special initial values of built-in scenarios.
    pub scenario_seeds: bool,
    pub orbit_tol: T,
    /// Fewer regular samples than this yields `Unknown`.
    pub min_regular: usize,
}

impl<T: Real> Default for SamplingConfig<T> {
    fn default() -> Self {
        Self {
            draws: 200,
            radius: T::one(),
            seed: 0,
            horizon: T::lit(20.0),
            real_grid: (0..=40).map(|i| T::lit(-2.0 + 0.1 * i as f64)).collect(),
            scenario_seeds: true,
            orbit_tol: T::lit(1e-2),
            min_regular: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvidence<T> {
    pub z0: M<T>,
    /// `None` when the sample could not be evaluated numerically.
    pub classification: Option<SolutionClassification<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquationClass<T> {
    pub verdict: EquationVerdict,
    pub confidence: T,
    pub samples: Vec<SampleEvidence<T>>,
    pub regular: usize,
    pub normal: usize,
    pub extremal: usize,
    pub not_regular: usize,
    pub failed: usize,
    /// Indices into `samples`, one group per extremal orbit.
    pub extremal_orbits: Vec<Vec<usize>>,
}

/// Special initial values of the built-in scenarios: the extremal value
/// `−I/J` where `J = ∫_{t1}^∞ p` converges, and `0` otherwise.
pub fn scenario_seeds<T: Real>(spec: &CoefficientSpec<T>, t1: T) -> Vec<M<T>> {
    let n = spec.dim();
    match spec.builtin() {
        Some(Builtin::PureQuadraticConstant) => vec![M::zeros(n)],
        Some(b @ (Builtin::DecayScalar { .. } | Builtin::BoundedSupport { .. })) => {
            match b.total_weight(t1) {
                Some(j) if j != T::zero() => vec![M::scalar(n, cx(-T::one() / j)), M::zeros(n)],
                _ => vec![M::zeros(n)],
            }
        }
        Some(Builtin::LinearOnly { .. }) => vec![M::zeros(n)],
        None => Vec::new(),
    }
}

fn initial_values<T: Real>(spec: &CoefficientSpec<T>, t1: T, sampling: &SamplingConfig<T>) -> Vec<M<T>> {
    let n = spec.dim();
    let mut out: Vec<M<T>> = Vec::new();
    let mut push = |m: M<T>| {
        if !out.contains(&m) {
            out.push(m);
        }
    };
    if sampling.scenario_seeds {
        scenario_seeds(spec, t1).into_iter().for_each(&mut push);
    }
    for &x in &sampling.real_grid {
        push(M::scalar(n, cx(x)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    for _ in 0..sampling.draws {
        push(M::from_fn(n, |_, _| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let r = sampling.radius * T::lit(u.sqrt());
            let th = T::lit(2.0 * std::f64::consts::PI * v);
            Cx::new(r * th.cos(), r * th.sin())
        }));
    }
    out
}

fn group_orbits<T: Real>(
    members: &[usize],
    samples: &[SampleEvidence<T>],
    tol: T,
) -> Vec<Vec<usize>> {
    let end = |i: usize| {
        samples[i]
            .classification
            .as_ref()
            .and_then(|c| c.final_value.clone())
            .expect("extremal samples carry their final value")
    };
    let same = |a: usize, b: usize| {
        let (za, zb) = (end(a), end(b));
        let d_end = (&za - &zb).op_norm();
        let d_start = (&samples[a].z0 - &samples[b].z0).op_norm();
        d_end <= tol * (T::one() + za.op_norm().max(zb.op_norm())) && d_end <= d_start
    };
    // single linkage
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for &i in members {
        let hits: Vec<usize> = orbits
            .iter()
            .enumerate()
            .filter(|(_, o)| o.iter().any(|&j| same(i, j)))
            .map(|(k, _)| k)
            .collect();
        let mut merged = vec![i];
        for &k in hits.iter().rev() {
            merged.extend(orbits.remove(k));
        }
        merged.sort_unstable();
        orbits.push(merged);
    }
    orbits.sort();
    orbits
}

/// Samples initial values, classifies each solution and maps the pattern
/// of verdicts (over the regular solutions found) to an equation class.
pub fn classify_equation<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    t1: T,
    sampling: &SamplingConfig<T>,
    int_cfg: &IntegratorConfig<T>,
    cfg: &ClassifyConfig<T>,
) -> Result<EquationClass<T>> {
    spec.check_span(t1, sampling.horizon)?;
    let inits = initial_values(spec, t1, sampling);
    let samples: Vec<SampleEvidence<T>> = inits
        .into_par_iter()
        .map(|z0| {
            let c = classify_solution(spec, &z0, t1, sampling.horizon, int_cfg, cfg).ok();
            SampleEvidence { z0, classification: c }
        })
        .collect();

    let mut normal = 0;
    let mut not_regular = 0;
    let mut failed = 0;
    let mut extremal_idx = Vec::new();
    let mut confidence_sum = T::zero();
    for (i, s) in samples.iter().enumerate() {
        match &s.classification {
            None => failed += 1,
            Some(c) => match c.class {
                SolutionClass::Normal => {
                    normal += 1;
                    confidence_sum += c.confidence;
                }
                SolutionClass::Extremal => {
                    extremal_idx.push(i);
                    confidence_sum += c.confidence;
                }
                SolutionClass::NotRegular => not_regular += 1,
            },
        }
    }
    let extremal = extremal_idx.len();
    let regular = normal + extremal;
    if regular == 0 {
        return Err(Error::NoRegularSolutionFound);
    }
    let extremal_orbits = group_orbits(&extremal_idx, &samples, sampling.orbit_tol);
    let verdict = if regular < sampling.min_regular {
        EquationVerdict::Unknown
    } else if extremal == 0 {
        EquationVerdict::Normal
    } else if normal == 0 {
        EquationVerdict::Irreconcilable
    } else if extremal_orbits.len() == 1 {
        EquationVerdict::SubExtremal
    } else {
        EquationVerdict::SuperExtremal
    };
    Ok(EquationClass {
        verdict,
        confidence: confidence_sum / T::from_usize(regular).unwrap(),
        samples,
        regular,
        normal,
        extremal,
        not_regular,
        failed,
        extremal_orbits,
    })
}
