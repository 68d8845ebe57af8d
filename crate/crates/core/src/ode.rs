//! Adaptive Dormand–Prince 5(4) integration of flattened complex states.
//!
//! Matrix ODEs are integrated as row-major vectors; stacked systems (for
//! instance Z together with φ, ψ, μ) are one vector so all blocks share step
//! control. Each accepted step keeps the coefficients of the free
//! fourth-order continuous extension, so the trajectory can be evaluated (and
//! differentiated) anywhere in the covered span.
//!
//! Finite-time escape is detected from the state norm: once `‖Y‖` passes
//! `blowup_threshold`, steps are capped at half the pole-model time-to-escape
//! `τ = ‖Y‖/‖Y'‖`, which bisects the remaining interval on every step. The
//! escape is declared when the bracket `[t, t + 2τ]` is narrower than
//! `blowup_localize_tol`. Fast but finite growth (exponential, say) keeps
//! `τ` bounded away from zero and integration continues.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::{Cx, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub min_step: T,
    /// First trial step; estimated from the field when `None`.
    pub initial_step: Option<T>,
    pub blowup_threshold: T,
    pub blowup_localize_tol: T,
    pub max_steps: usize,
    /// Disables error control and steps with this size (order studies).
    pub fixed_step: Option<T>,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            rel_tol: T::lit(1e-10).max(eps * T::lit(100.0)),
            abs_tol: T::lit(1e-12).max(eps * T::lit(10.0)),
            max_step: T::infinity(),
            min_step: T::lit(1e-12).max(eps * T::lit(10.0)),
            initial_step: None,
            blowup_threshold: T::lit(1e8),
            blowup_localize_tol: T::lit(1e-6),
            max_steps: 2_000_000,
            fixed_step: None,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn with_tolerances(rel_tol: T, abs_tol: T) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn fixed(h: T) -> Self {
        Self {
            fixed_step: Some(h),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("integrator: {what}")));
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return bad("rel_tol and abs_tol must be positive");
        }
        if !(self.min_step > T::zero() && self.min_step < self.max_step) {
            return bad("need 0 < min_step < max_step");
        }
        if !(self.blowup_threshold > T::zero() && self.blowup_localize_tol > T::zero()) {
            return bad("blow-up threshold and localisation tolerance must be positive");
        }
        if let Some(h) = self.fixed_step {
            if !(h > T::zero()) {
                return bad("fixed step must be positive");
            }
        }
        Ok(())
    }
}

/// How a trajectory ended.
#[derive(Clone, Debug, PartialEq)]
pub enum Status<T> {
    /// Integrated up to the requested end time.
    RegularOn(T),
    /// Norm escape. `time` is the pole-model estimate, `bracket` encloses it.
    /// `wide` marks step-size underflow, overflow or step-budget exhaustion:
    /// the solution stopped being computable but the escape was not
    /// localised.
    BlowUpAt {
        time: T,
        bracket: (T, T),
        last_norm: T,
        wide: bool,
    },
}

impl<T: Real> Status<T> {
    pub fn is_regular(&self) -> bool {
        matches!(self, Status::RegularOn(_))
    }

    pub fn blowup_time(&self) -> Option<T> {
        match self {
            Status::BlowUpAt { time, .. } => Some(*time),
            Status::RegularOn(_) => None,
        }
    }
}

// Dormand–Prince 5(4) tableau, FSAL.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// A sampled solution with dense output.
///
/// Knot `i` holds the state at `times[i]`; segment `i` (between knots `i` and
/// `i+1`) holds the four non-trivial coefficients of the continuous extension
/// `y(θ) = y_i + θ c1 + θ(1−θ) c2 + θ²(1−θ) c3 + θ²(1−θ)² c4`.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    dim: usize,
    times: Vec<T>,
    states: Vec<Cx<T>>,
    cont: Vec<Cx<T>>,
    status: Status<T>,
    next_step: T,
    rejected: usize,
}

impl<T: Real> Trajectory<T> {
    fn start(t1: T, y0: &[Cx<T>]) -> Self {
        Self {
            dim: y0.len(),
            times: vec![t1],
            states: y0.to_vec(),
            cont: Vec::new(),
            status: Status::RegularOn(t1),
            next_step: T::zero(),
            rejected: 0,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t1(&self) -> T {
        self.times[0]
    }

    /// Last sampled time.
    pub fn t_end(&self) -> T {
        *self.times.last().expect("trajectory has at least one knot")
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn status(&self) -> &Status<T> {
        &self.status
    }

    pub fn is_regular(&self) -> bool {
        self.status.is_regular()
    }

    pub fn n_knots(&self) -> usize {
        self.times.len()
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn knot_state(&self, i: usize) -> &[Cx<T>] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[Cx<T>] {
        self.knot_state(self.n_knots() - 1)
    }

    fn locate(&self, t: T) -> Result<(usize, T)> {
        let (a, b) = (self.t1(), self.t_end());
        let slack = T::epsilon() * T::lit(64.0) * (a.abs().max(b.abs()).max(T::one()));
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::OutOfSpan {
                t: t.to_f64_lossy(),
                start: a.to_f64_lossy(),
                end: b.to_f64_lossy(),
            });
        }
        let t = t.max(a).min(b);
        let nseg = self.n_knots() - 1;
        if nseg == 0 {
            return Ok((0, T::zero()));
        }
        let idx = self.times.partition_point(|&x| x <= t).saturating_sub(1).min(nseg - 1);
        let h = self.times[idx + 1] - self.times[idx];
        Ok((idx, (t - self.times[idx]) / h))
    }

    /// Dense-output value at `t`. Knot times return the stored sample.
    pub fn eval(&self, t: T) -> Result<Vec<Cx<T>>> {
        let mut out = vec![Cx::zero(); self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: T, out: &mut [Cx<T>]) -> Result<()> {
        let (idx, theta) = self.locate(t)?;
        let y0 = self.knot_state(idx);
        if theta.is_zero() || self.n_knots() == 1 {
            out.copy_from_slice(y0);
            return Ok(());
        }
        if theta == T::one() {
            out.copy_from_slice(self.knot_state(idx + 1));
            return Ok(());
        }
        let d = self.dim;
        let c = &self.cont[4 * d * idx..4 * d * (idx + 1)];
        let s1 = T::one() - theta;
        for i in 0..d {
            let inner = c[2 * d + i] + c[3 * d + i] * s1;
            out[i] = y0[i] + (c[i] + (c[d + i] + inner * theta) * s1) * theta;
        }
        Ok(())
    }

    /// Time derivative of the continuous extension at `t`.
    pub fn derivative(&self, t: T) -> Result<Vec<Cx<T>>> {
        let (idx, theta) = self.locate(t)?;
        let d = self.dim;
        if self.n_knots() == 1 {
            return Ok(vec![Cx::zero(); d]);
        }
        let h = self.times[idx + 1] - self.times[idx];
        let c = &self.cont[4 * d * idx..4 * d * (idx + 1)];
        let one = T::one();
        let two = T::lit(2.0);
        let w1 = one - two * theta;
        let w2 = theta * (two - T::lit(3.0) * theta);
        let w3 = two * theta * (one - theta) * (one - two * theta);
        Ok((0..d)
            .map(|i| (c[i] + c[d + i] * w1 + c[2 * d + i] * w2 + c[3 * d + i] * w3) / h)
            .collect())
    }

    /// Time-reversed copy: knot order flipped and every segment
    /// re-parameterised by `u = 1 − θ`. Used to turn a backward integration
    /// in `s = −t` into a forward trajectory in `t`.
    fn reversed_in_time(&self) -> Self {
        let d = self.dim;
        let m = self.n_knots();
        let times = self.times.iter().rev().map(|&s| -s).collect();
        let mut states = Vec::with_capacity(self.states.len());
        for i in (0..m).rev() {
            states.extend_from_slice(self.knot_state(i));
        }
        let mut cont = Vec::with_capacity(self.cont.len());
        for j in (0..m.saturating_sub(1)).rev() {
            let c = &self.cont[4 * d * j..4 * d * (j + 1)];
            cont.extend(c[..d].iter().map(|&v| -v));
            cont.extend((0..d).map(|i| c[d + i] + c[2 * d + i]));
            cont.extend(c[2 * d..3 * d].iter().map(|&v| -v));
            cont.extend_from_slice(&c[3 * d..]);
        }
        let t_end = -self.times[0];
        Self {
            dim: d,
            times,
            states,
            cont,
            status: Status::RegularOn(t_end),
            next_step: self.next_step,
            rejected: self.rejected,
        }
    }

    /// Continues a regular trajectory up to `t_end` with the same field.
    pub fn extend<F>(&self, field: &F, t_end: T, cfg: &IntegratorConfig<T>) -> Result<Self>
    where
        F: Fn(T, &[Cx<T>], &mut [Cx<T>]),
    {
        cfg.validate()?;
        let mut out = self.clone();
        if !self.is_regular() || t_end <= self.t_end() {
            return Ok(out);
        }
        let h0 = if self.next_step > T::zero() {
            Some(self.next_step)
        } else {
            cfg.initial_step
        };
        advance(field, &mut out, t_end, cfg, h0);
        Ok(out)
    }
}

/// Extracts block `index` (an n×n matrix) from a stacked state vector.
pub fn matrix_block<T: Real>(state: &[Cx<T>], index: usize, n: usize) -> ComplexMatrix<T> {
    let nn = n * n;
    ComplexMatrix::from_slice(n, &state[index * nn..(index + 1) * nn])
        .expect("state vector holds whole blocks")
}

/// Stacks matrices into one state vector.
pub fn stack<T: Real>(blocks: &[&ComplexMatrix<T>]) -> Vec<Cx<T>> {
    blocks.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

/// Integrates `Y' = field(t, Y)` from `(t1, y0)` towards `t_end`.
pub fn integrate<T, F>(
    field: &F,
    y0: &[Cx<T>],
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>>
where
    T: Real,
    F: Fn(T, &[Cx<T>], &mut [Cx<T>]),
{
    cfg.validate()?;
    if !(t_end > t1) {
        return Err(Error::InvalidInput(format!(
            "integration end {} must exceed start {}",
            t_end, t1
        )));
    }
    if y0.is_empty() || y0.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidInput("initial state must be finite and non-empty".into()));
    }
    let mut traj = Trajectory::start(t1, y0);
    advance(field, &mut traj, t_end, cfg, cfg.initial_step);
    Ok(traj)
}

/// Integrates backwards in time from `(t_end, y_end)` down to `t1` and
/// returns the result as a forward trajectory on `[t1, t_end]`.
///
/// Fails with [`Error::BaseNotRegular`] if the backward solution escapes.
pub fn integrate_backward<T, F>(
    field: &F,
    y_end: &[Cx<T>],
    t1: T,
    t_end: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>>
where
    T: Real,
    F: Fn(T, &[Cx<T>], &mut [Cx<T>]),
{
    let reversed = |s: T, y: &[Cx<T>], dy: &mut [Cx<T>]| {
        field(-s, y, dy);
        for v in dy.iter_mut() {
            *v = -*v;
        }
    };
    let traj = integrate(&reversed, y_end, -t_end, -t1, cfg)?;
    if let Status::BlowUpAt { time, .. } = traj.status {
        return Err(Error::BaseNotRegular {
            t: (-time).to_f64_lossy(),
        });
    }
    Ok(traj.reversed_in_time())
}

fn rms_norm<T: Real>(v: &[Cx<T>], scale: &[T]) -> T {
    let s: T = v
        .iter()
        .zip(scale)
        .map(|(z, &sc)| {
            let r = z.norm() / sc;
            r * r
        })
        .sum();
    (s / T::from_usize(v.len()).unwrap()).sqrt()
}

fn max_abs<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
}

fn initial_step<T: Real, F>(field: &F, t: T, y: &[Cx<T>], f0: &[Cx<T>], cfg: &IntegratorConfig<T>) -> T
where
    F: Fn(T, &[Cx<T>], &mut [Cx<T>]),
{
    let sc: Vec<T> = y.iter().map(|z| cfg.abs_tol + cfg.rel_tol * z.norm()).collect();
    let d0 = rms_norm(y, &sc);
    let d1 = rms_norm(f0, &sc);
    let small = T::lit(1e-5);
    let mut h0 = if d0 < small || d1 < small {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(cfg.max_step);
    let y1: Vec<Cx<T>> = y.iter().zip(f0).map(|(&a, &b)| a + b * h0).collect();
    let mut f1 = vec![Cx::zero(); y.len()];
    field(t + h0, &y1, &mut f1);
    let diff: Vec<Cx<T>> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = rms_norm(&diff, &sc) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) || !dmax.is_finite() {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(cfg.max_step).max(cfg.min_step)
}

fn advance<T: Real, F>(
    field: &F,
    traj: &mut Trajectory<T>,
    t_end: T,
    cfg: &IntegratorConfig<T>,
    h_hint: Option<T>,
) where
    F: Fn(T, &[Cx<T>], &mut [Cx<T>]),
{
    let d = traj.dim;
    let mut t = traj.t_end();
    let mut y = traj.last_state().to_vec();
    let mut k: Vec<Vec<Cx<T>>> = vec![vec![Cx::zero(); d]; 7];
    field(t, &y, &mut k[0]);

    let mut h = match (cfg.fixed_step, h_hint) {
        (Some(h), _) => h,
        (None, Some(h)) => h,
        (None, None) => initial_step(field, t, &y, &k[0], cfg),
    };

    let a: Vec<[T; 6]> = A.iter().map(|row| row.map(T::lit)).collect();
    let c: [T; 7] = C.map(T::lit);
    let e: [T; 7] = E.map(T::lit);
    let dd: [T; 7] = D.map(T::lit);
    let overflow_guard = T::max_value().sqrt();
    let safety = T::lit(0.9);
    let end_slack = T::epsilon() * T::lit(16.0) * t_end.abs().max(T::one());

    let mut ytmp = vec![Cx::zero(); d];
    let mut ynew = vec![Cx::zero(); d];
    let mut escape_cap: Option<T> = None;
    let mut steps = 0usize;

    traj.status = loop {
        if t >= t_end {
            break Status::RegularOn(t_end);
        }
        if steps >= cfg.max_steps {
            break Status::BlowUpAt {
                time: t,
                bracket: (t, t_end),
                last_norm: max_abs(&y),
                wide: true,
            };
        }
        let mut hh = h.min(cfg.max_step);
        if let Some(cap) = escape_cap {
            hh = hh.min(cap);
        }
        let last = t + hh >= t_end - end_slack;
        if last {
            hh = t_end - t;
        }

        for s in 1..7 {
            for i in 0..d {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let aij = a[s][j];
                    if !aij.is_zero() {
                        acc += kj[i] * (aij * hh);
                    }
                }
                ytmp[i] = acc;
            }
            let ts = if s >= 5 { t + hh } else { t + c[s] * hh };
            field(ts, &ytmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }

        let mut err_vec = vec![Cx::zero(); d];
        let mut sc = vec![T::zero(); d];
        for i in 0..d {
            let mut acc = Cx::zero();
            for j in 0..7 {
                if !e[j].is_zero() {
                    acc += k[j][i] * (e[j] * hh);
                }
            }
            err_vec[i] = acc;
            sc[i] = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(ynew[i].norm());
        }
        let err = rms_norm(&err_vec, &sc);
        let finite = err.is_finite() && ynew.iter().all(|z| z.re.is_finite() && z.im.is_finite());

        let accept = finite && (cfg.fixed_step.is_some() || err <= T::one());
        if !accept {
            traj.rejected += 1;
            let fac = if finite {
                (safety * err.powf(T::lit(-0.2))).max(T::lit(0.1)).min(T::one())
            } else {
                T::lit(0.25)
            };
            h = hh * fac;
            if cfg.fixed_step.is_some() || h < cfg.min_step {
                break Status::BlowUpAt {
                    time: t + hh,
                    bracket: (t, t + hh),
                    last_norm: max_abs(&y),
                    wide: true,
                };
            }
            continue;
        }

        // Continuous extension coefficients, stored as [c1 | c2 | c3 | c4].
        let base = traj.cont.len();
        traj.cont.resize(base + 4 * d, Cx::zero());
        for i in 0..d {
            let ydiff = ynew[i] - y[i];
            let bspl = k[0][i] * hh - ydiff;
            let mut r5 = Cx::zero();
            for j in 0..7 {
                if !dd[j].is_zero() {
                    r5 += k[j][i] * dd[j];
                }
            }
            traj.cont[base + i] = ydiff;
            traj.cont[base + d + i] = bspl;
            traj.cont[base + 2 * d + i] = ydiff - k[6][i] * hh - bspl;
            traj.cont[base + 3 * d + i] = r5 * hh;
        }

        let t_new = if last { t_end } else { t + hh };
        traj.times.push(t_new);
        traj.states.extend_from_slice(&ynew);
        steps += 1;

        t = t_new;
        std::mem::swap(&mut y, &mut ynew);
        let (first, rest) = k.split_at_mut(1);
        first[0].copy_from_slice(&rest[5]);

        h = match cfg.fixed_step {
            Some(fixed) => fixed,
            None => {
                let fac = if err.is_zero() {
                    T::lit(5.0)
                } else {
                    (safety * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
                };
                hh * fac
            }
        };
        if !last {
            traj.next_step = h;
        }

        let norm = max_abs(&y);
        if norm > overflow_guard {
            break Status::BlowUpAt {
                time: t,
                bracket: (t, t),
                last_norm: norm,
                wide: true,
            };
        }
        if norm > cfg.blowup_threshold {
            let fnorm = max_abs(&k[0]);
            let tau = if fnorm.is_zero() { T::infinity() } else { norm / fnorm };
            if T::lit(2.0) * tau <= cfg.blowup_localize_tol {
                break Status::BlowUpAt {
                    time: t + tau,
                    bracket: (t, t + T::lit(2.0) * tau),
                    last_norm: norm,
                    wide: false,
                };
            }
            escape_cap = Some(tau * T::lit(0.5));
        } else {
            escape_cap = None;
        }
    };
}
