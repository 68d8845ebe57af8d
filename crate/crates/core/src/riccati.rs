//! Solutions of `Z' + Z P Z + Q Z + Z R + S = 0`, the fundamental pair
//! attached to a solution, and the closed-form reconstruction of every other
//! solution from one of them.
//!
//! For a solution `Z` anchored at `t1`, the fundamental pair solves
//! `φ' = (P Z + R) φ`, `ψ' = ψ (Z P + Q)` with `φ(t1) = ψ(t1) = I`, and the
//! kernel integral is `μ(t) = ∫_{t1}^{t} φ⁻¹ P ψ⁻¹`. The solution through
//! `Z(t1) + Λ` is then
//!
//! ```text
//! Z_Λ(t) = Z(t) + ψ⁻¹(t) [I + Λ μ(t)]⁻¹ Λ φ⁻¹(t)
//! ```
//!
//! which stays valid for singular (even zero) `Λ`. Only `φ⁻¹` and `ψ⁻¹` ever
//! enter the formulas, so those are integrated directly:
//! `(φ⁻¹)' = −φ⁻¹ (P Z + R)` and `(ψ⁻¹)' = −(Z P + Q) ψ⁻¹`. No inversion is
//! needed inside the right-hand side.

use std::sync::Arc;

use crate::coefficients::{CoefficientSpec, RiccatiCoefficients};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::ode::{self, matrix_block, stack, IntegratorConfig, Status, Trajectory};
use crate::quad;
use crate::scalar::{Cx, Real};

type M<T> = ComplexMatrix<T>;

/// Relative conditioning beyond which φ or ψ counts as numerically singular.
pub const FUNDAMENTAL_COND_LIMIT: f64 = 1e12;

/// `|det(I + Λμ)|` floor, scaled by `(1 + ‖Λ‖‖μ‖)ⁿ`.
pub const FAMILY_DET_TOL: f64 = 1e-10;

pub(crate) fn riccati_rhs<T: Real>(c: &RiccatiCoefficients<T>, z: &M<T>) -> M<T> {
    let zp = z * &c.p;
    -(&zp * z + &c.q * z + z * &c.r + &c.s)
}

fn riccati_field<T: Real>(spec: &CoefficientSpec<T>) -> impl Fn(T, &[Cx<T>], &mut [Cx<T>]) + '_ {
    let n = spec.dim();
    move |t, y, dy| {
        let c = spec.eval_clamped(t);
        let z = matrix_block(y, 0, n);
        dy.copy_from_slice(riccati_rhs(&c, &z).as_slice());
    }
}

fn quad_tols<T: Real>() -> (T, T) {
    let eps = T::epsilon();
    (T::lit(1e-12).max(eps * T::lit(64.0)), T::lit(1e-14).max(eps * T::lit(8.0)))
}

/// A solution of the Riccati equation with dense output.
#[derive(Clone, Debug)]
pub struct RiccatiTrajectory<T> {
    spec: Arc<CoefficientSpec<T>>,
    traj: Trajectory<T>,
    cfg: IntegratorConfig<T>,
}

impl<T: Real> RiccatiTrajectory<T> {
    pub fn spec(&self) -> &Arc<CoefficientSpec<T>> {
        &self.spec
    }

    pub fn trajectory(&self) -> &Trajectory<T> {
        &self.traj
    }

    pub fn config(&self) -> &IntegratorConfig<T> {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn t1(&self) -> T {
        self.traj.t1()
    }

    /// Last covered time (the requested end when regular).
    pub fn t_end(&self) -> T {
        self.traj.t_end()
    }

    pub fn status(&self) -> &Status<T> {
        self.traj.status()
    }

    pub fn is_regular(&self) -> bool {
        self.traj.is_regular()
    }

    pub fn z(&self, t: T) -> Result<M<T>> {
        M::from_slice(self.dim(), &self.traj.eval(t)?)
    }

    pub fn z_prime(&self, t: T) -> Result<M<T>> {
        M::from_slice(self.dim(), &self.traj.derivative(t)?)
    }

    /// `‖Z' + ZPZ + QZ + ZR + S‖ / (1 + ‖Z'‖)` with `Z'` taken from the
    /// dense output rather than from the field.
    pub fn residual(&self, t: T) -> Result<T> {
        let z = self.z(t)?;
        let dz = self.z_prime(t)?;
        let c = self.spec.eval(t)?;
        let r = &dz - &riccati_rhs(&c, &z);
        Ok(r.op_norm() / (T::one() + dz.op_norm()))
    }

    /// Largest [`residual`](Self::residual) over `samples` evenly spaced
    /// points of `[a, b]`.
    pub fn max_residual(&self, a: T, b: T, samples: usize) -> Result<T> {
        let k = samples.max(2) - 1;
        let mut worst = T::zero();
        for i in 0..=k {
            let t = a + (b - a) * T::from_usize(i).unwrap() / T::from_usize(k).unwrap();
            worst = worst.max(self.residual(t)?);
        }
        Ok(worst)
    }

    /// Continues a regular solution to `t_end`.
    pub fn extend(&self, t_end: T) -> Result<Self> {
        self.spec.check_span(self.t1(), t_end)?;
        let field = riccati_field(&self.spec);
        Ok(Self {
            spec: Arc::clone(&self.spec),
            traj: self.traj.extend(&field, t_end, &self.cfg)?,
            cfg: self.cfg.clone(),
        })
    }
}

/// Integrates the Riccati equation from `Z(t1) = z0` towards `t_end`.
pub fn solve<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    z0: &M<T>,
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<RiccatiTrajectory<T>> {
    if z0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: z0.dim(),
        });
    }
    spec.check_span(t1, t_end)?;
    let field = riccati_field(spec);
    let traj = ode::integrate(&field, z0.as_slice(), t1, t_end, cfg)?;
    Ok(RiccatiTrajectory {
        spec: Arc::clone(spec),
        traj,
        cfg: cfg.clone(),
    })
}

/// Integrates backwards from `Z(t_end) = z_end` down to `t1`.
///
/// Solutions that repel their neighbours forward in time attract them
/// backward, so this is the stable way to trace them.
pub fn solve_backward<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    z_end: &M<T>,
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<RiccatiTrajectory<T>> {
    if z_end.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: z_end.dim(),
        });
    }
    spec.check_span(t1, t_end)?;
    let field = riccati_field(spec);
    let traj = ode::integrate_backward(&field, z_end.as_slice(), t1, t_end, cfg)?;
    Ok(RiccatiTrajectory {
        spec: Arc::clone(spec),
        traj,
        cfg: cfg.clone(),
    })
}

/// The base solution together with `φ⁻¹`, `ψ⁻¹` and `μ`, integrated as one
/// joint state anchored at `t1`.
#[derive(Clone, Debug)]
pub struct FundamentalData<T> {
    spec: Arc<CoefficientSpec<T>>,
    joint: Trajectory<T>,
    cfg: IntegratorConfig<T>,
}

const Z: usize = 0;
const PHI_INV: usize = 1;
const PSI_INV: usize = 2;
const MU: usize = 3;

fn joint_field<T: Real>(spec: &CoefficientSpec<T>) -> impl Fn(T, &[Cx<T>], &mut [Cx<T>]) + '_ {
    let n = spec.dim();
    let nn = n * n;
    move |t, y, dy| {
        let c = spec.eval_clamped(t);
        let z = matrix_block(y, Z, n);
        let phi_inv = matrix_block(y, PHI_INV, n);
        let psi_inv = matrix_block(y, PSI_INV, n);
        let pz = &c.p * &z;
        let zp = &z * &c.p;
        let dz = -(&zp * &z + &c.q * &z + &z * &c.r + &c.s);
        let dphi = -(&phi_inv * &(pz + &c.r));
        let dpsi = -(&(zp + &c.q) * &psi_inv);
        let dmu = &(&phi_inv * &c.p) * &psi_inv;
        for (k, block) in [dz, dphi, dpsi, dmu].iter().enumerate() {
            dy[k * nn..(k + 1) * nn].copy_from_slice(block.as_slice());
        }
    }
}

impl<T: Real> FundamentalData<T> {
    fn check(self) -> Result<Self> {
        if let Status::BlowUpAt { time, .. } = self.joint.status() {
            return Err(Error::BaseNotRegular { t: time.to_f64_lossy() });
        }
        let n = self.dim();
        let limit = T::lit(FUNDAMENTAL_COND_LIMIT);
        for (i, &t) in self.joint.times().iter().enumerate() {
            let state = self.joint.knot_state(i);
            for block in [PHI_INV, PSI_INV] {
                let m = matrix_block(state, block, n);
                let det = m.det();
                if !m.is_finite() || det.norm() == T::zero() || m.cond_estimate() > limit {
                    return Err(Error::NearSingularFundamental {
                        t: t.to_f64_lossy(),
                        det: (T::one() / det.norm()).to_f64_lossy(),
                    });
                }
            }
        }
        Ok(self)
    }

    pub fn spec(&self) -> &Arc<CoefficientSpec<T>> {
        &self.spec
    }

    pub fn config(&self) -> &IntegratorConfig<T> {
        &self.cfg
    }

    pub fn trajectory(&self) -> &Trajectory<T> {
        &self.joint
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn t1(&self) -> T {
        self.joint.t1()
    }

    pub fn t_end(&self) -> T {
        self.joint.t_end()
    }

    fn block(&self, t: T, index: usize) -> Result<M<T>> {
        let n = self.dim();
        let nn = n * n;
        let y = self.joint.eval(t)?;
        M::from_slice(n, &y[index * nn..(index + 1) * nn])
    }

    /// Base solution `Z(t)` as carried in the joint state.
    pub fn z(&self, t: T) -> Result<M<T>> {
        self.block(t, Z)
    }

    pub fn phi_inv(&self, t: T) -> Result<M<T>> {
        self.block(t, PHI_INV)
    }

    pub fn psi_inv(&self, t: T) -> Result<M<T>> {
        self.block(t, PSI_INV)
    }

    pub fn phi(&self, t: T) -> Result<M<T>> {
        self.phi_inv(t)?.inverse()
    }

    pub fn psi(&self, t: T) -> Result<M<T>> {
        self.psi_inv(t)?.inverse()
    }

    /// `μ(t1, t)`.
    pub fn mu(&self, t: T) -> Result<M<T>> {
        self.block(t, MU)
    }

    /// Integrand `φ⁻¹ P ψ⁻¹` of μ.
    pub fn kernel(&self, t: T) -> Result<M<T>> {
        let p = self.spec.eval(t)?.p;
        Ok(&(&self.phi_inv(t)? * &p) * &self.psi_inv(t)?)
    }

    /// Continues the joint integration to `t_end`.
    pub fn extend(&self, t_end: T) -> Result<Self> {
        self.spec.check_span(self.t1(), t_end)?;
        let field = joint_field(&self.spec);
        Self {
            spec: Arc::clone(&self.spec),
            joint: self.joint.extend(&field, t_end, &self.cfg)?,
            cfg: self.cfg.clone(),
        }
        .check()
    }

    /// The family member through `Z(t1) + Λ`, evaluated at `t`.
    pub fn family_solution(&self, lambda: &M<T>, t: T) -> Result<M<T>> {
        family_solution(self, lambda, t)
    }
}

fn fundamental_from<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    z1: &M<T>,
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<FundamentalData<T>> {
    let n = spec.dim();
    let id = M::identity(n);
    let y0 = stack(&[z1, &id, &id, &M::zeros(n)]);
    let field = joint_field(spec);
    let joint = ode::integrate(&field, &y0, t1, t_end, cfg)?;
    FundamentalData {
        spec: Arc::clone(spec),
        joint,
        cfg: cfg.clone(),
    }
    .check()
}

/// Builds `(φ⁻¹, ψ⁻¹, μ)` for a regular solution over its whole span.
pub fn fundamental_pair<T: Real>(rt: &RiccatiTrajectory<T>) -> Result<FundamentalData<T>> {
    fundamental_pair_to(rt, rt.t_end())
}

/// As [`fundamental_pair`], stopping at `t_end` (which may exceed the span
/// of `rt`; the base is re-integrated jointly).
pub fn fundamental_pair_to<T: Real>(rt: &RiccatiTrajectory<T>, t_end: T) -> Result<FundamentalData<T>> {
    if let Status::BlowUpAt { time, .. } = rt.status() {
        return Err(Error::BaseNotRegular { t: time.to_f64_lossy() });
    }
    let t1 = rt.t1();
    rt.spec.check_span(t1, t_end)?;
    fundamental_from(&rt.spec, &rt.z(t1)?, t1, t_end, &rt.cfg)
}

/// Fundamental data for the solution through `(t1, z1)`, without a prior
/// [`solve`]. Fails with [`Error::BaseNotRegular`] on escape.
pub fn fundamental_data<T: Real>(
    spec: &Arc<CoefficientSpec<T>>,
    z1: &M<T>,
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<FundamentalData<T>> {
    if z1.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: z1.dim(),
        });
    }
    spec.check_span(t1, t_end)?;
    fundamental_from(spec, z1, t1, t_end, cfg)
}

fn check_family_det<T: Real>(a: &M<T>, lambda: &M<T>, mu: &M<T>, t: T) -> Result<()> {
    let scale = (T::one() + lambda.op_norm() * mu.op_norm()).powi(a.dim() as i32);
    if !(a.det().norm() >= T::lit(FAMILY_DET_TOL) * scale) {
        return Err(Error::FamilyBlowUp { t: t.to_f64_lossy() });
    }
    Ok(())
}

/// `Z(t) + ψ⁻¹(t) [I + Λ μ(t)]⁻¹ Λ φ⁻¹(t)`.
///
/// Fails with [`Error::FamilyBlowUp`] when `I + Λμ(t)` is numerically
/// singular, i.e. the member has escaped at or before `t`.
pub fn family_solution<T: Real>(fd: &FundamentalData<T>, lambda: &M<T>, t: T) -> Result<M<T>> {
    if lambda.dim() != fd.dim() {
        return Err(Error::DimensionMismatch {
            expected: fd.dim(),
            got: lambda.dim(),
        });
    }
    let mu = fd.mu(t)?;
    let a = &M::identity(mu.dim()) + &(lambda * &mu);
    check_family_det(&a, lambda, &mu, t)?;
    let inner = a.solve(&(lambda * &fd.phi_inv(t)?))?;
    Ok(&fd.z(t)? + &(&fd.psi_inv(t)? * &inner))
}

/// μ of the member `Z_Λ`, anchored at the same `t1`: `μ (I + Λμ)⁻¹`.
///
/// Follows from `φ_{Z_Λ} = φ (I + μΛ)` and `ψ_{Z_Λ} = (I + Λμ) ψ`, and is
/// well conditioned even where `Z_Λ` itself is not.
pub fn family_mu<T: Real>(fd: &FundamentalData<T>, lambda: &M<T>, t: T) -> Result<M<T>> {
    let mu = fd.mu(t)?;
    // det(I + μΛ) = det(I + Λμ), and μ(I + Λμ)⁻¹ = (I + μΛ)⁻¹μ.
    let b = &M::identity(mu.dim()) + &(&mu * lambda);
    check_family_det(&b, lambda, &mu, t)?;
    b.solve(&mu)
}

fn trace_integral<T: Real>(rt_a: &RiccatiTrajectory<T>, rt_b: &RiccatiTrajectory<T>, t1: T, t: T) -> Result<Cx<T>> {
    for rt in [rt_a, rt_b] {
        if rt.t1() > t1 || rt.t_end() < t {
            return Err(Error::OutOfSpan {
                t: t.to_f64_lossy(),
                start: rt.t1().to_f64_lossy(),
                end: rt.t_end().to_f64_lossy(),
            });
        }
    }
    if t <= t1 {
        return Ok(Cx::new(T::zero(), T::zero()));
    }
    let pts = quad::breakpoints(t1, t, &[rt_a.traj.times(), rt_b.traj.times()]);
    let spec = &rt_a.spec;
    let (rel, abs) = quad_tols();
    quad::integrate(
        |s| {
            let p = spec.eval(s)?.p;
            Ok((&p * &(&rt_a.z(s)? - &rt_b.z(s)?)).trace())
        },
        &pts,
        rel,
        abs,
    )
}

fn check_pair<T: Real>(rt_j: &RiccatiTrajectory<T>, rt_k: &RiccatiTrajectory<T>) -> Result<()> {
    if rt_j.dim() != rt_k.dim() {
        return Err(Error::DimensionMismatch {
            expected: rt_j.dim(),
            got: rt_k.dim(),
        });
    }
    if rt_j.t1() != rt_k.t1() {
        return Err(Error::InvalidInput("both solutions must share the anchor time".into()));
    }
    Ok(())
}

/// `|det[I + Λ_{jk} μ_{Z_k}(t1, t)] − exp ∫_{t1}^{t} tr P (Z_j − Z_k)|`
/// with `Λ_{jk} = Z_j(t1) − Z_k(t1)`.
///
/// The kernel integral is the one attached to `Z_k`: with `Z_j = Z_k + Λ`
/// in the family of `Z_k`, Liouville's formula applied to
/// `φ_{Z_j} = φ_{Z_k}(I + μ_{Z_k} Λ)` gives exactly this identity.
pub fn det_identity_residual<T: Real>(rt_j: &RiccatiTrajectory<T>, rt_k: &RiccatiTrajectory<T>, t: T) -> Result<T> {
    check_pair(rt_j, rt_k)?;
    let t1 = rt_k.t1();
    if t == t1 {
        // μ(t1) = 0: both sides are 1
        return Ok(T::zero());
    }
    let lambda = &rt_j.z(t1)? - &rt_k.z(t1)?;
    let fd_k = fundamental_pair_to(rt_k, t)?;
    let lhs = (&M::identity(rt_k.dim()) + &(&lambda * &fd_k.mu(t)?)).det();
    let rhs = trace_integral(rt_j, rt_k, t1, t)?.exp();
    Ok((lhs - rhs).norm())
}

/// `|det{[I + Λ_{jk} μ_{Z_k}][I + Λ_{kj} μ_{Z_j}]} − 1|`.
pub fn reciprocity_residual<T: Real>(rt_j: &RiccatiTrajectory<T>, rt_k: &RiccatiTrajectory<T>, t: T) -> Result<T> {
    check_pair(rt_j, rt_k)?;
    let t1 = rt_k.t1();
    if t == t1 {
        // μ(t1) = 0: both sides are 1
        return Ok(T::zero());
    }
    let lambda = &rt_j.z(t1)? - &rt_k.z(t1)?;
    let id = M::identity(rt_k.dim());
    let fd_j = fundamental_pair_to(rt_j, t)?;
    let fd_k = fundamental_pair_to(rt_k, t)?;
    let a = &id + &(&lambda * &fd_k.mu(t)?);
    let b = &id - &(&lambda * &fd_j.mu(t)?);
    Ok(((&a * &b).det() - Cx::new(T::one(), T::zero())).norm())
}

/// `∫_{t1}^{t} Re tr[P (Z_1 − Z_2)]`, with `t1` the anchor of `rt_1`.
pub fn pair_integral<T: Real>(rt_1: &RiccatiTrajectory<T>, rt_2: &RiccatiTrajectory<T>, t: T) -> Result<T> {
    if rt_1.dim() != rt_2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rt_1.dim(),
            got: rt_2.dim(),
        });
    }
    Ok(trace_integral(rt_1, rt_2, rt_1.t1(), t)?.re)
}

/// `∫_{a}^{b} tr[P Z + R]` along a single solution (Liouville exponent of φ).
pub fn liouville_exponent<T: Real>(rt: &RiccatiTrajectory<T>, a: T, b: T) -> Result<Cx<T>> {
    if rt.t1() > a || rt.t_end() < b {
        return Err(Error::OutOfSpan {
            t: b.to_f64_lossy(),
            start: rt.t1().to_f64_lossy(),
            end: rt.t_end().to_f64_lossy(),
        });
    }
    if b <= a {
        return Ok(Cx::new(T::zero(), T::zero()));
    }
    let pts = quad::breakpoints(a, b, &[rt.traj.times()]);
    let (rel, abs) = quad_tols();
    quad::integrate(
        |s| {
            let c = rt.spec.eval(s)?;
            Ok((&(&c.p * &rt.z(s)?) + &c.r).trace())
        },
        &pts,
        rel,
        abs,
    )
}
