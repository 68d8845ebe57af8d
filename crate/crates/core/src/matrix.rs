//! Dense square complex matrices.
//!
//! Storage is row-major. Every matrix symbol in the kit (Z, P, Q, R, S, Λ,
//! φ, ψ, μ, ν, Φ, Ψ) is a [`ComplexMatrix`]; dimensions are small (n ≤ 8), so
//! elimination is plain partial-pivot LU with no blocking.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{cx, Cx, Real};

/// Relative pivot threshold used by [`ComplexMatrix::inverse`] and
/// [`ComplexMatrix::solve`].
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    n: usize,
    data: Vec<Cx<T>>,
}

/// LU factorisation with row pivoting: `P·M = L·U`, packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    packed: ComplexMatrix<T>,
    perm: Vec<usize>,
    sign: T,
    min_pivot: T,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be positive");
        Self {
            n,
            data: vec![Cx::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, Cx::one())
    }

    /// `c·I`.
    pub fn scalar(n: usize, c: Cx<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn diag(entries: &[Cx<T>]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from a row-major slice of length `n²`.
    pub fn from_slice(n: usize, entries: &[Cx<T>]) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(Self {
            n,
            data: entries.to_vec(),
        })
    }

    pub fn from_rows(rows: &[Vec<Cx<T>>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    /// Real-valued matrix from rows of `f64`.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Cx<T>>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| cx(T::lit(x))).collect())
            .collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Cx<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Cx<T>> {
        self.data
    }

    pub fn trace(&self) -> Cx<T> {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn scale(&self, c: Cx<T>) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.is_zero())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// Maximum absolute row sum. Sub-multiplicative; all thresholds in the
    /// kit are expressed in this norm.
    pub fn op_norm(&self) -> T {
        let n = self.n;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().map(|z| z.norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Partial-pivot LU. Never fails: exact zero pivots are kept and show up
    /// as a zero determinant.
    pub fn lu(&self) -> Lu<T> {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, a.data[i * n + k].norm()))
                .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
            min_pivot = min_pivot.min(pmag);
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a.data[k * n + k];
            if pivot.is_zero() {
                continue;
            }
            for i in k + 1..n {
                let factor = a.data[i * n + k] / pivot;
                a.data[i * n + k] = factor;
                for j in k + 1..n {
                    let u = a.data[k * n + j];
                    a.data[i * n + j] -= factor * u;
                }
            }
        }
        Lu {
            packed: a,
            perm,
            sign,
            min_pivot,
        }
    }

    /// Determinant by pivoted elimination; zero for singular input.
    pub fn det(&self) -> Cx<T> {
        self.lu().det()
    }

    pub fn inverse(&self) -> Result<Self> {
        self.inverse_with_tol(T::lit(DEFAULT_SINGULAR_TOL))
    }

    /// Inverse, failing with [`Error::SingularMatrix`] when the smallest pivot
    /// falls below `rel_tol·‖M‖`.
    pub fn inverse_with_tol(&self, rel_tol: T) -> Result<Self> {
        let lu = self.lu();
        lu.check(rel_tol * self.op_norm())?;
        Ok(lu.solve_unchecked(&Self::identity(self.n)))
    }

    /// Solves `M·X = B`.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        assert_eq!(self.n, rhs.n, "solve: dimension mismatch");
        let lu = self.lu();
        lu.check(T::lit(DEFAULT_SINGULAR_TOL) * self.op_norm())?;
        Ok(lu.solve_unchecked(rhs))
    }

    /// `‖M‖·‖M⁻¹‖`, infinite for singular matrices.
    pub fn cond_estimate(&self) -> T {
        match self.inverse() {
            Ok(inv) => self.op_norm() * inv.op_norm(),
            Err(_) => T::infinity(),
        }
    }
}

impl<T: Real> Lu<T> {
    pub fn det(&self) -> Cx<T> {
        let n = self.packed.n;
        (0..n).fold(cx(self.sign), |acc, i| acc * self.packed.data[i * n + i])
    }

    pub fn min_pivot(&self) -> T {
        self.min_pivot
    }

    fn check(&self, tol: T) -> Result<()> {
        if !(self.min_pivot > tol) || !self.min_pivot.is_finite() {
            return Err(Error::SingularMatrix {
                pivot: self.min_pivot.to_f64_lossy(),
                tol: tol.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn solve_unchecked(&self, rhs: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let n = self.packed.n;
        let a = &self.packed.data;
        let mut x = ComplexMatrix::zeros(n);
        for col in 0..n {
            let mut y: Vec<Cx<T>> = (0..n).map(|i| rhs.data[self.perm[i] * n + col]).collect();
            for i in 0..n {
                for k in 0..i {
                    let l = a[i * n + k];
                    y[i] = y[i] - l * y[k];
                }
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= a[i * n + k] * y[k];
                }
                y[i] = s / a[i * n + i];
            }
            for i in 0..n {
                x.data[i * n + col] = y[i];
            }
        }
        x
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.n, rhs.n, "add: dimension mismatch");
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.n, rhs.n, "sub: dimension mismatch");
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.n, rhs.n, "mul: dimension mismatch");
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<T: Real> Neg for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn neg(self) -> ComplexMatrix<T> {
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().map(|z| -z).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl<T: Real> $tr for ComplexMatrix<T> {
            type Output = ComplexMatrix<T>;
            fn $f(self, rhs: Self) -> ComplexMatrix<T> {
                (&self).$f(&rhs)
            }
        }
        impl<T: Real> $tr<&ComplexMatrix<T>> for ComplexMatrix<T> {
            type Output = ComplexMatrix<T>;
            fn $f(self, rhs: &Self) -> ComplexMatrix<T> {
                (&self).$f(rhs)
            }
        }
        impl<T: Real> $tr<ComplexMatrix<T>> for &ComplexMatrix<T> {
            type Output = ComplexMatrix<T>;
            fn $f(self, rhs: ComplexMatrix<T>) -> ComplexMatrix<T> {
                self.$f(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<T: Real> Neg for ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn neg(self) -> ComplexMatrix<T> {
        -&self
    }
}

impl<T: Real> AddAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn add_assign(&mut self, rhs: &Self) {
        assert_eq!(self.n, rhs.n, "add_assign: dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl<T: Real> SubAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn sub_assign(&mut self, rhs: &Self) {
        assert_eq!(self.n, rhs.n, "sub_assign: dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}
