//! Time-dependent coefficients: the Riccati quadruple (P, Q, R, S) of
//! `Z' + Z P Z + Q Z + Z R + S = 0` and the linear-system quadruple
//! (A, B, C, D) of `Φ' = AΦ + BΨ, Ψ' = CΦ + DΨ`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::{cx, Real};

type M<T> = ComplexMatrix<T>;

/// Riccati coefficients at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiCoefficients<T> {
    pub p: M<T>,
    pub q: M<T>,
    pub r: M<T>,
    pub s: M<T>,
}

/// Linear-system coefficients at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemCoefficients<T> {
    pub a: M<T>,
    pub b: M<T>,
    pub c: M<T>,
    pub d: M<T>,
}

/// Piecewise-linear table of four matrix functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Table<T> {
    grid: Vec<T>,
    values: Vec<[M<T>; 4]>,
}

impl<T: Real> Table<T> {
    pub fn new(grid: Vec<T>, values: Vec<[M<T>; 4]>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidInput(
                "table needs at least two knots and one value set per knot".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("table grid must be strictly increasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[[M<T>; 4]] {
        &self.values
    }

    fn end(&self) -> T {
        *self.grid.last().unwrap()
    }

    fn eval(&self, t: T) -> [M<T>; 4] {
        let t = t.max(self.grid[0]).min(self.end());
        let i = self.grid.partition_point(|&x| x <= t).saturating_sub(1);
        if self.grid[i] == t || i + 1 == self.grid.len() {
            return self.values[i].clone();
        }
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        let lo = &self.values[i];
        let hi = &self.values[i + 1];
        std::array::from_fn(|k| &lo[k].scale(cx(T::one() - w)) + &hi[k].scale(cx(w)))
    }
}

/// A quadruple of matrix functions in slot order.
#[derive(Clone, Debug, PartialEq)]
pub enum Source<T> {
    Constant([M<T>; 4]),
    /// Slot `k` is `amplitudes[k]·exp(−rates[k]·(t − t0))`.
    Exponential {
        amplitudes: [M<T>; 4],
        rates: [T; 4],
    },
    Tabulated(Table<T>),
}

impl<T: Real> Source<T> {
    fn dim(&self) -> usize {
        match self {
            Source::Constant(m) | Source::Exponential { amplitudes: m, .. } => m[0].dim(),
            Source::Tabulated(tab) => tab.values[0][0].dim(),
        }
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        let ok = match self {
            Source::Constant(m) | Source::Exponential { amplitudes: m, .. } => {
                m.iter().all(|x| x.dim() == n)
            }
            Source::Tabulated(tab) => tab.values.iter().flatten().all(|x| x.dim() == n),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                got: self.dim(),
            })
        }
    }

    fn domain_end(&self) -> T {
        match self {
            Source::Tabulated(tab) => tab.end(),
            _ => T::infinity(),
        }
    }

    fn eval(&self, t0: T, t: T) -> [M<T>; 4] {
        match self {
            Source::Constant(m) => m.clone(),
            Source::Exponential { amplitudes, rates } => std::array::from_fn(|k| {
                amplitudes[k].scale(cx((-rates[k] * (t - t0)).exp()))
            }),
            Source::Tabulated(tab) => tab.eval(t),
        }
    }
}

/// Named closed-form families. All share `Q = R = S = 0` except
/// `LinearOnly`, which has `P ≡ 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin<T> {
    /// `P = I`.
    PureQuadraticConstant,
    /// `P = c·e^{−a t}·I`.
    DecayScalar { a: T, c: T },
    /// `P = c·(1 − t/T)²·I` for `t < T`, zero afterwards (C¹ cutoff).
    BoundedSupport { cutoff: T, c: T },
    /// `P = 0` with constant `Q, R, S`.
    LinearOnly { q: M<T>, r: M<T>, s: M<T> },
}

impl<T: Real> Builtin<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::PureQuadraticConstant => "pure_quadratic_constant",
            Builtin::DecayScalar { .. } => "decay_scalar",
            Builtin::BoundedSupport { .. } => "bounded_support",
            Builtin::LinearOnly { .. } => "linear_only",
        }
    }

    /// Scalar weight `p(t)` for the families with `P = p(t)·I`.
    pub fn weight(&self, t: T) -> T {
        match self {
            Builtin::PureQuadraticConstant => T::one(),
            Builtin::DecayScalar { a, c } => *c * (-*a * t).exp(),
            Builtin::BoundedSupport { cutoff, c } => {
                if t < *cutoff {
                    let u = T::one() - t / *cutoff;
                    *c * u * u
                } else {
                    T::zero()
                }
            }
            Builtin::LinearOnly { .. } => T::zero(),
        }
    }

    /// `J(t1) = ∫_{t1}^{∞} p(τ) dτ`, or `None` when it diverges.
    pub fn total_weight(&self, t1: T) -> Option<T> {
        match self {
            Builtin::PureQuadraticConstant => None,
            Builtin::DecayScalar { a, c } => {
                if *a > T::zero() {
                    Some(*c / *a * (-*a * t1).exp())
                } else if c.is_zero() {
                    Some(T::zero())
                } else {
                    None
                }
            }
            Builtin::BoundedSupport { cutoff, c } => {
                if t1 >= *cutoff {
                    Some(T::zero())
                } else {
                    let u = T::one() - t1 / *cutoff;
                    Some(*c * *cutoff / T::lit(3.0) * u * u * u)
                }
            }
            Builtin::LinearOnly { .. } => Some(T::zero()),
        }
    }

    fn eval(&self, n: usize, t: T) -> RiccatiCoefficients<T> {
        match self {
            Builtin::LinearOnly { q, r, s } => RiccatiCoefficients {
                p: M::zeros(n),
                q: q.clone(),
                r: r.clone(),
                s: s.clone(),
            },
            _ => RiccatiCoefficients {
                p: M::scalar(n, cx(self.weight(t))),
                q: M::zeros(n),
                r: M::zeros(n),
                s: M::zeros(n),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientKind<T> {
    /// Slots are (P, Q, R, S).
    Direct(Source<T>),
    Builtin(Builtin<T>),
    /// Riccati reduction of a linear system: slots are (A, B, C, D).
    FromSystem(Source<T>),
}

/// The coefficient quadruple of a matrix Riccati equation on `[t0, ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSpec<T> {
    dim: usize,
    t0: T,
    kind: CoefficientKind<T>,
}

impl<T: Real> CoefficientSpec<T> {
    pub fn new(dim: usize, t0: T, kind: CoefficientKind<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        match &kind {
            CoefficientKind::Direct(src) | CoefficientKind::FromSystem(src) => src.check_dims(dim)?,
            CoefficientKind::Builtin(Builtin::LinearOnly { q, r, s }) => {
                for m in [q, r, s] {
                    if m.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: m.dim(),
                        });
                    }
                }
            }
            CoefficientKind::Builtin(_) => {}
        }
        if let CoefficientKind::Direct(Source::Tabulated(tab))
        | CoefficientKind::FromSystem(Source::Tabulated(tab)) = &kind
        {
            if tab.grid[0] > t0 {
                return Err(Error::InvalidInput(
                    "table must start at or before the domain start".into(),
                ));
            }
        }
        Ok(Self { dim, t0, kind })
    }

    pub fn constant(p: M<T>, q: M<T>, r: M<T>, s: M<T>) -> Result<Self> {
        let n = p.dim();
        Self::new(n, T::zero(), CoefficientKind::Direct(Source::Constant([p, q, r, s])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn kind(&self) -> &CoefficientKind<T> {
        &self.kind
    }

    pub fn builtin(&self) -> Option<&Builtin<T>> {
        match &self.kind {
            CoefficientKind::Builtin(b) => Some(b),
            _ => None,
        }
    }

    /// Right end of the evaluation domain (infinite unless tabulated).
    pub fn domain_end(&self) -> T {
        match &self.kind {
            CoefficientKind::Direct(src) | CoefficientKind::FromSystem(src) => src.domain_end(),
            CoefficientKind::Builtin(_) => T::infinity(),
        }
    }

    pub fn check_span(&self, t1: T, t_end: T) -> Result<()> {
        let slack = T::epsilon() * T::lit(16.0) * self.t0.abs().max(T::one());
        for t in [t1, t_end] {
            if t < self.t0 - slack || t > self.domain_end() {
                return Err(Error::OutOfDomain {
                    t: t.to_f64_lossy(),
                    start: self.t0.to_f64_lossy(),
                    end: self.domain_end().to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: T) -> Result<RiccatiCoefficients<T>> {
        self.check_span(t, t)?;
        Ok(self.eval_clamped(t))
    }

    /// Evaluation without the domain check; tables clamp to their ends.
    pub(crate) fn eval_clamped(&self, t: T) -> RiccatiCoefficients<T> {
        match &self.kind {
            CoefficientKind::Direct(src) => {
                let [p, q, r, s] = src.eval(self.t0, t);
                RiccatiCoefficients { p, q, r, s }
            }
            CoefficientKind::Builtin(b) => b.eval(self.dim, t),
            CoefficientKind::FromSystem(src) => {
                let [a, b, c, d] = src.eval(self.t0, t);
                RiccatiCoefficients {
                    p: b,
                    q: -d,
                    r: a,
                    s: -c,
                }
            }
        }
    }

    /// The linear system whose Riccati reduction is this equation:
    /// `A = R, B = P, C = −S, D = −Q`.
    pub fn as_system(self: &Arc<Self>) -> SystemSpec<T> {
        SystemSpec {
            dim: self.dim,
            t0: self.t0,
            kind: SystemKind::FromRiccati(Arc::clone(self)),
        }
    }
}

/// Parameters for [`builtin_scenario`]; unused fields are ignored.
#[derive(Clone, Debug)]
pub struct ScenarioParams<T> {
    pub dim: usize,
    pub t0: T,
    pub a: T,
    pub c: T,
    pub cutoff: T,
    pub q: Option<M<T>>,
    pub r: Option<M<T>>,
    pub s: Option<M<T>>,
}

impl<T: Real> Default for ScenarioParams<T> {
    fn default() -> Self {
        Self {
            dim: 1,
            t0: T::zero(),
            a: T::one(),
            c: T::one(),
            cutoff: T::one(),
            q: None,
            r: None,
            s: None,
        }
    }
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "pure_quadratic_constant",
    "decay_scalar",
    "bounded_support",
    "linear_only",
];

pub fn builtin_scenario<T: Real>(name: &str, params: ScenarioParams<T>) -> Result<CoefficientSpec<T>> {
    let n = params.dim;
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let family = match name {
        "pure_quadratic_constant" => Builtin::PureQuadraticConstant,
        "decay_scalar" => Builtin::DecayScalar {
            a: params.a,
            c: params.c,
        },
        "bounded_support" => {
            if !(params.cutoff > params.t0) {
                return Err(Error::InvalidInput("cutoff must lie after t0".into()));
            }
            Builtin::BoundedSupport {
                cutoff: params.cutoff,
                c: params.c,
            }
        }
        "linear_only" => Builtin::LinearOnly {
            q: params.q.unwrap_or_else(|| M::zeros(n)),
            r: params.r.unwrap_or_else(|| M::zeros(n)),
            s: params.s.unwrap_or_else(|| M::zeros(n)),
        },
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    CoefficientSpec::new(n, params.t0, CoefficientKind::Builtin(family))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemKind<T> {
    /// Slots are (A, B, C, D).
    Direct(Source<T>),
    FromRiccati(Arc<CoefficientSpec<T>>),
}

/// Coefficients of the linear system `Φ' = AΦ + BΨ, Ψ' = CΦ + DΨ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec<T> {
    dim: usize,
    t0: T,
    kind: SystemKind<T>,
}

impl<T: Real> SystemSpec<T> {
    pub fn new(dim: usize, t0: T, source: Source<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        source.check_dims(dim)?;
        Ok(Self {
            dim,
            t0,
            kind: SystemKind::Direct(source),
        })
    }

    pub fn constant(a: M<T>, b: M<T>, c: M<T>, d: M<T>) -> Result<Self> {
        let n = a.dim();
        Self::new(n, T::zero(), Source::Constant([a, b, c, d]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn kind(&self) -> &SystemKind<T> {
        &self.kind
    }

    pub fn eval(&self, t: T) -> Result<SystemCoefficients<T>> {
        match &self.kind {
            SystemKind::Direct(src) => {
                let spec = CoefficientSpec {
                    dim: self.dim,
                    t0: self.t0,
                    kind: CoefficientKind::FromSystem(src.clone()),
                };
                spec.check_span(t, t)?;
                Ok(self.eval_clamped(t))
            }
            SystemKind::FromRiccati(spec) => {
                spec.check_span(t, t)?;
                Ok(self.eval_clamped(t))
            }
        }
    }

    pub(crate) fn eval_clamped(&self, t: T) -> SystemCoefficients<T> {
        match &self.kind {
            SystemKind::Direct(src) => {
                let [a, b, c, d] = src.eval(self.t0, t);
                SystemCoefficients { a, b, c, d }
            }
            SystemKind::FromRiccati(spec) => {
                let RiccatiCoefficients { p, q, r, s } = spec.eval_clamped(t);
                SystemCoefficients {
                    a: r,
                    b: p,
                    c: -s,
                    d: -q,
                }
            }
        }
    }

    pub fn check_span(&self, t1: T, t_end: T) -> Result<()> {
        system_to_riccati(self).check_span(t1, t_end)
    }
}

/// Riccati equation `Z' + Z B Z + Z A − D Z − C = 0` obtained from the
/// substitution `Ψ = ZΦ`, i.e. `P = B, Q = −D, R = A, S = −C`.
pub fn system_to_riccati<T: Real>(sys: &SystemSpec<T>) -> CoefficientSpec<T> {
    match &sys.kind {
        SystemKind::Direct(src) => CoefficientSpec {
            dim: sys.dim,
            t0: sys.t0,
            kind: CoefficientKind::FromSystem(src.clone()),
        },
        SystemKind::FromRiccati(spec) => (**spec).clone(),
    }
}
