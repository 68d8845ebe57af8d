//! The linear system `Φ' = AΦ + BΨ, Ψ' = CΦ + DΨ` and its link to the
//! Riccati equation through `Ψ = ZΦ`.
//!
//! A solution `(Φ, Ψ)` is regular when `det Φ` never vanishes, and
//! principal (non-principal) when `Z = ΨΦ⁻¹` is extremal (normal).

use std::sync::Arc;

use crate::classify::{classify_solution, ClassifyConfig, SolutionClass, SolutionClassification};
use crate::coefficients::{system_to_riccati, SystemSpec};
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, DEFAULT_SINGULAR_TOL};
use crate::ode::{self, matrix_block, stack, IntegratorConfig, Status, Trajectory};
use crate::riccati::{liouville_exponent, riccati_rhs, RiccatiTrajectory};
use crate::scalar::{Cx, Real};

type M<T> = ComplexMatrix<T>;

/// `Z = ΨΦ⁻¹` is formed only while `cond(Φ)` stays below this.
pub const PHI_COND_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Repr {
    /// State blocks `[Φ, Ψ]`.
    Direct,
    /// State blocks `[Z, Φ]`, with `Ψ = ZΦ`.
    Lifted,
}

/// A solution `(Φ, Ψ)` of the linear system with dense output.
#[derive(Clone, Debug)]
pub struct SystemTrajectory<T> {
    sys: Arc<SystemSpec<T>>,
    traj: Trajectory<T>,
    repr: Repr,
    regular: bool,
}

impl<T: Real> SystemTrajectory<T> {
    pub fn system(&self) -> &Arc<SystemSpec<T>> {
        &self.sys
    }

    pub fn trajectory(&self) -> &Trajectory<T> {
        &self.traj
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn t1(&self) -> T {
        self.traj.t1()
    }

    pub fn t_end(&self) -> T {
        self.traj.t_end()
    }

    /// `det Φ` stayed away from zero on the covered span.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    fn block(&self, y: &[Cx<T>], i: usize) -> M<T> {
        matrix_block(y, i, self.dim())
    }

    pub fn phi(&self, t: T) -> Result<M<T>> {
        let y = self.traj.eval(t)?;
        Ok(match self.repr {
            Repr::Direct => self.block(&y, 0),
            Repr::Lifted => self.block(&y, 1),
        })
    }

    pub fn psi(&self, t: T) -> Result<M<T>> {
        let y = self.traj.eval(t)?;
        Ok(match self.repr {
            Repr::Direct => self.block(&y, 1),
            Repr::Lifted => &self.block(&y, 0) * &self.block(&y, 1),
        })
    }

    /// `Z = ΨΦ⁻¹`; fails where `Φ` is too ill-conditioned.
    pub fn z(&self, t: T) -> Result<M<T>> {
        let y = self.traj.eval(t)?;
        match self.repr {
            Repr::Lifted => Ok(self.block(&y, 0)),
            Repr::Direct => {
                let phi = self.block(&y, 0);
                if phi.cond_estimate() > T::lit(PHI_COND_LIMIT) {
                    return Err(Error::SingularMatrix {
                        pivot: phi.lu().min_pivot().to_f64_lossy(),
                        tol: PHI_COND_LIMIT,
                    });
                }
                // ΨΦ⁻¹ = (Φᵀ⁻¹Ψᵀ)ᵀ; solve against the transpose.
                let psi = self.block(&y, 1);
                let x = transpose(&phi).solve(&transpose(&psi))?;
                Ok(transpose(&x))
            }
        }
    }

    pub fn det_phi(&self, t: T) -> Result<Cx<T>> {
        Ok(self.phi(t)?.det())
    }

    fn derivatives(&self, t: T) -> Result<(M<T>, M<T>, M<T>, M<T>)> {
        let y = self.traj.eval(t)?;
        let dy = self.traj.derivative(t)?;
        Ok(match self.repr {
            Repr::Direct => (self.block(&y, 0), self.block(&y, 1), self.block(&dy, 0), self.block(&dy, 1)),
            Repr::Lifted => {
                let (z, phi) = (self.block(&y, 0), self.block(&y, 1));
                let (dz, dphi) = (self.block(&dy, 0), self.block(&dy, 1));
                let psi = &z * &phi;
                let dpsi = &(&dz * &phi) + &(&z * &dphi);
                (phi, psi, dphi, dpsi)
            }
        })
    }

    /// Relative residual of the linear system at `t`, using the dense
    /// derivatives: `(‖Φ' − AΦ − BΨ‖ + ‖Ψ' − CΦ − DΨ‖) / (1 + ‖Φ'‖ + ‖Ψ'‖)`.
    pub fn residual(&self, t: T) -> Result<T> {
        let (phi, psi, dphi, dpsi) = self.derivatives(t)?;
        let c = self.sys.eval(t)?;
        let r1 = &(&dphi - &(&c.a * &phi)) - &(&c.b * &psi);
        let r2 = &(&dpsi - &(&c.c * &phi)) - &(&c.d * &psi);
        Ok((r1.op_norm() + r2.op_norm()) / (T::one() + dphi.op_norm() + dpsi.op_norm()))
    }

    pub fn max_residual(&self, samples: usize) -> Result<T> {
        let (a, b) = (self.t1(), self.t_end());
        let k = samples.max(2) - 1;
        let mut worst = T::zero();
        for i in 0..=k {
            let t = a + (b - a) * T::from_usize(i).unwrap() / T::from_usize(k).unwrap();
            worst = worst.max(self.residual(t)?);
        }
        Ok(worst)
    }
}

fn transpose<T: Real>(m: &M<T>) -> M<T> {
    M::from_fn(m.dim(), |i, j| m[(j, i)])
}

fn check_initial_phi<T: Real>(phi1: &M<T>) -> Result<()> {
    phi1.inverse_with_tol(T::lit(DEFAULT_SINGULAR_TOL))
        .map(|_| ())
        .map_err(|_| Error::SingularInitialPhi)
}

fn phi_regular_at_knots<T: Real>(traj: &Trajectory<T>, block: usize, n: usize) -> bool {
    (0..traj.n_knots()).all(|i| {
        let phi = matrix_block(traj.knot_state(i), block, n);
        phi.det().norm() > T::lit(DEFAULT_SINGULAR_TOL) * phi.op_norm().powi(n as i32)
    })
}

/// Lifts a Riccati solution to the linear system: integrates
/// `Φ' = (B Z + A) Φ` from `Φ(t1) = phi1` together with `Z` and sets
/// `Ψ = ZΦ`.
pub fn lift_solution<T: Real>(rt: &RiccatiTrajectory<T>, phi1: &M<T>) -> Result<SystemTrajectory<T>> {
    let n = rt.dim();
    if phi1.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi1.dim(),
        });
    }
    check_initial_phi(phi1)?;
    if let Status::BlowUpAt { time, .. } = rt.status() {
        return Err(Error::BaseNotRegular { t: time.to_f64_lossy() });
    }
    let spec = Arc::clone(rt.spec());
    let nn = n * n;
    let field = |t: T, y: &[Cx<T>], dy: &mut [Cx<T>]| {
        let c = spec.eval_clamped(t);
        let z = matrix_block(y, 0, n);
        let phi = matrix_block(y, 1, n);
        let dphi = &(&(&c.p * &z) + &c.r) * &phi;
        dy[..nn].copy_from_slice(riccati_rhs(&c, &z).as_slice());
        dy[nn..].copy_from_slice(dphi.as_slice());
    };
    let t1 = rt.t1();
    let y0 = stack(&[&rt.z(t1)?, phi1]);
    let traj = ode::integrate(&field, &y0, t1, rt.t_end(), rt.config())?;
    if let Status::BlowUpAt { time, .. } = traj.status() {
        return Err(Error::BaseNotRegular { t: time.to_f64_lossy() });
    }
    let regular = phi_regular_at_knots(&traj, 1, n);
    Ok(SystemTrajectory {
        sys: Arc::new(spec.as_system()),
        traj,
        repr: Repr::Lifted,
        regular,
    })
}

/// Integrates the linear system directly from `(Φ, Ψ)(t1) = (phi1, psi1)`.
pub fn integrate_system<T: Real>(
    sys: &Arc<SystemSpec<T>>,
    phi1: &M<T>,
    psi1: &M<T>,
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<SystemTrajectory<T>> {
    let n = sys.dim();
    for m in [phi1, psi1] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
        }
    }
    sys.check_span(t1, t_end)?;
    let nn = n * n;
    let field = |t: T, y: &[Cx<T>], dy: &mut [Cx<T>]| {
        let c = sys.eval_clamped(t);
        let phi = matrix_block(y, 0, n);
        let psi = matrix_block(y, 1, n);
        let dphi = &(&c.a * &phi) + &(&c.b * &psi);
        let dpsi = &(&c.c * &phi) + &(&c.d * &psi);
        dy[..nn].copy_from_slice(dphi.as_slice());
        dy[nn..].copy_from_slice(dpsi.as_slice());
    };
    let traj = ode::integrate(&field, &stack(&[phi1, psi1]), t1, t_end, cfg)?;
    let regular = traj.is_regular() && phi_regular_at_knots(&traj, 0, n);
    Ok(SystemTrajectory {
        sys: Arc::clone(sys),
        traj,
        repr: Repr::Direct,
        regular,
    })
}

/// `|det Φ(t)|` from the lifted solution and from
/// `|det Φ(t1)| exp ∫ Re tr[B Z + A]`.
pub fn det_phi_liouville<T: Real>(rt: &RiccatiTrajectory<T>, phi1: &M<T>, t: T) -> Result<(T, T)> {
    let st = lift_solution(rt, phi1)?;
    let direct = st.det_phi(t)?.norm();
    let liouville = phi1.det().norm() * liouville_exponent(rt, rt.t1(), t)?.re.exp();
    Ok((direct, liouville))
}

/// Finite-horizon reading of the asymptotic ratio statements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioVerdict {
    /// Ratio stays within a bounded band (I-type).
    BoundedBothWays,
    /// `|det Φ1|/|det Φ2|` decays: the first solution is subdominant (III-type).
    FirstVanishes,
    /// `|det Φ2|/|det Φ1|` decays (III-type with roles swapped).
    SecondVanishes,
    /// Spread grows without a monotone trend (II/IV-type).
    MutuallyUnbounded,
}

impl RatioVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RatioVerdict::BoundedBothWays => "bounded_both_ways",
            RatioVerdict::FirstVanishes => "first_vanishes",
            RatioVerdict::SecondVanishes => "second_vanishes",
            RatioVerdict::MutuallyUnbounded => "mutually_unbounded",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioDiagnostics<T> {
    pub grid: Vec<T>,
    /// `|det Φ1| / |det Φ2|`.
    pub ratio12: Vec<T>,
    /// `|det Φ2| / |det Φ1|`, computed independently.
    pub ratio21: Vec<T>,
    /// Running envelopes of `ratio12`.
    pub running_sup: Vec<T>,
    pub running_inf: Vec<T>,
    /// Start of the final window (second half of the grid span).
    pub window_start: T,
    /// `ln ratio12` at the end minus at the window start.
    pub log_change: T,
    /// max − min of `ln ratio12` over the final window.
    pub window_log_range: T,
    pub window_sup: T,
    pub window_inf: T,
    pub verdict: RatioVerdict,
}

/// Log-scale band that still counts as bounded over the final window.
pub const RATIO_TREND_TOL: f64 = 0.2;

/// Determinant ratios of two system solutions on `grid`, with running
/// envelopes and a trend verdict over the second half of the grid.
///
/// limsup and liminf cannot be observed on a finite grid; the envelopes are
/// what was seen, and the verdict only describes the trend of the final
/// window.
pub fn ratio_diagnostics<T: Real>(
    st1: &SystemTrajectory<T>,
    st2: &SystemTrajectory<T>,
    grid: &[T],
) -> Result<RatioDiagnostics<T>> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("ratio grid needs two or more increasing times".into()));
    }
    let mut ratio12 = Vec::with_capacity(grid.len());
    let mut ratio21 = Vec::with_capacity(grid.len());
    let mut running_sup = Vec::with_capacity(grid.len());
    let mut running_inf = Vec::with_capacity(grid.len());
    let (mut sup, mut inf) = (T::neg_infinity(), T::infinity());
    for &t in grid {
        let d1 = st1.det_phi(t)?.norm();
        let d2 = st2.det_phi(t)?.norm();
        if d1 == T::zero() || d2 == T::zero() {
            return Err(Error::InvalidInput(format!("det Φ vanishes at t = {t}")));
        }
        let r = d1 / d2;
        ratio12.push(r);
        ratio21.push(d2 / d1);
        sup = sup.max(r);
        inf = inf.min(r);
        running_sup.push(sup);
        running_inf.push(inf);
    }
    let (g0, g1) = (grid[0], *grid.last().unwrap());
    let window_start = g0 + (g1 - g0) * T::lit(0.5);
    let i0 = grid.partition_point(|&t| t < window_start).min(grid.len() - 1);
    let logs: Vec<T> = ratio12[i0..].iter().map(|r| r.ln()).collect();
    let (lmax, lmin) = logs
        .iter()
        .fold((T::neg_infinity(), T::infinity()), |(a, b), &l| (a.max(l), b.min(l)));
    let log_change = *logs.last().unwrap() - logs[0];
    let window_log_range = lmax - lmin;
    let tol = T::lit(RATIO_TREND_TOL);
    let verdict = if window_log_range <= tol {
        RatioVerdict::BoundedBothWays
    } else if log_change.abs() >= T::lit(0.5) * window_log_range {
        if log_change < T::zero() {
            RatioVerdict::FirstVanishes
        } else {
            RatioVerdict::SecondVanishes
        }
    } else {
        RatioVerdict::MutuallyUnbounded
    };
    Ok(RatioDiagnostics {
        grid: grid.to_vec(),
        ratio12,
        ratio21,
        running_sup,
        running_inf,
        window_start: grid[i0],
        log_change,
        window_log_range,
        window_sup: lmax.exp(),
        window_inf: lmin.exp(),
        verdict,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemSolutionClass {
    Principal,
    NonPrincipal,
    NotRegular,
}

impl SystemSolutionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemSolutionClass::Principal => "principal",
            SystemSolutionClass::NonPrincipal => "non_principal",
            SystemSolutionClass::NotRegular => "not_regular",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemClassification<T> {
    pub class: SystemSolutionClass,
    /// `Z(t1) = Ψ(t1)Φ(t1)⁻¹`.
    pub z1: M<T>,
    pub solution: SolutionClassification<T>,
}

/// Classifies the system solution through `(Φ, Ψ)(t1)` via its Riccati
/// ratio `Z = ΨΦ⁻¹`.
pub fn classify_system_solution<T: Real>(
    sys: &Arc<SystemSpec<T>>,
    phi1: &M<T>,
    psi1: &M<T>,
    t1: T,
    horizon: T,
    int_cfg: &IntegratorConfig<T>,
    cfg: &ClassifyConfig<T>,
) -> Result<SystemClassification<T>> {
    check_initial_phi(phi1)?;
    let z1 = transpose(&transpose(phi1).solve(&transpose(psi1))?);
    let spec = Arc::new(system_to_riccati(sys));
    let solution = classify_solution(&spec, &z1, t1, horizon, int_cfg, cfg)?;
    let class = match solution.class {
        SolutionClass::Extremal => SystemSolutionClass::Principal,
        SolutionClass::Normal => SystemSolutionClass::NonPrincipal,
        SolutionClass::NotRegular => SystemSolutionClass::NotRegular,
    };
    Ok(SystemClassification { class, z1, solution })
}

/// Rank test on the stacked `2n × 2n` initial block `[[Φ1, Φ2], [Ψ1, Ψ2]]`.
pub fn linearly_independent<T: Real>(phi1: &M<T>, psi1: &M<T>, phi2: &M<T>, psi2: &M<T>) -> bool {
    let n = phi1.dim();
    let big = M::from_fn(2 * n, |i, j| {
        let src = match (i < n, j < n) {
            (true, true) => phi1,
            (true, false) => phi2,
            (false, true) => psi1,
            (false, false) => psi2,
        };
        src[(i % n, j % n)]
    });
    big.inverse_with_tol(T::lit(DEFAULT_SINGULAR_TOL)).is_ok()
}
