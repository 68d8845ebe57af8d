#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use riccati_kit::coefficients::{CoefficientKind, CoefficientSpec, Source};
use riccati_kit::MatrixC;

pub fn s(x: f64) -> MatrixC {
    MatrixC::scalar(1, Complex64::new(x, 0.0))
}

/// `entries` holds `2·n²` numbers: real parts then imaginary parts.
pub fn mat(n: usize, entries: &[f64]) -> MatrixC {
    let nn = n * n;
    MatrixC::from_fn(n, |i, j| Complex64::new(entries[i * n + j], entries[nn + i * n + j]))
}

pub fn rank_one(n: usize, u: &[f64], v: &[f64]) -> MatrixC {
    MatrixC::from_fn(n, |i, j| Complex64::new(u[i], u[n + i]) * Complex64::new(v[j], v[n + j]))
}

#[derive(Clone, Copy, Debug)]
pub enum LambdaKind {
    Full,
    RankOne,
    Zero,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub spec: Arc<CoefficientSpec<f64>>,
    pub z0: MatrixC,
    pub lambda: MatrixC,
    pub lambda_kind: LambdaKind,
    pub decaying: bool,
}

fn entries(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, 2 * n * n)
}

/// Random constant or exponentially decaying coefficients of moderate size,
/// a random base value and an offset that is full, rank one or zero.
pub fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(entries(n, 0.5), 4),
            prop::collection::vec(0.2f64..1.5, 4),
            any::<bool>(),
            entries(n, 0.5),
            entries(n, 0.6),
            prop::collection::vec(-0.6f64..0.6, 4 * n),
            0u8..3,
        )
            .prop_map(|(n, coeffs, rates, decaying, z0, lam, uv, kind)| {
                let m: Vec<MatrixC> = coeffs.iter().map(|e| mat(n, e)).collect();
                let quad = [m[0].clone(), m[1].clone(), m[2].clone(), m[3].clone()];
                let source = if decaying {
                    Source::Exponential {
                        amplitudes: quad,
                        rates: [rates[0], rates[1], rates[2], rates[3]],
                    }
                } else {
                    Source::Constant(quad)
                };
                let spec = Arc::new(CoefficientSpec::new(n, 0.0, CoefficientKind::Direct(source)).unwrap());
                let (lambda, lambda_kind) = match kind {
                    0 => (mat(n, &lam), LambdaKind::Full),
                    1 if n > 1 => (rank_one(n, &uv[..2 * n], &uv[2 * n..]), LambdaKind::RankOne),
                    1 => (MatrixC::zeros(n), LambdaKind::Zero),
                    _ => (MatrixC::zeros(n), LambdaKind::Zero),
                };
                Instance {
                    n,
                    spec,
                    z0: mat(n, &z0),
                    lambda,
                    lambda_kind,
                    decaying,
                }
            })
    })
}

/// `‖a − b‖ / max(1, ‖b‖)`.
pub fn rel_dev(a: &MatrixC, b: &MatrixC) -> f64 {
    (a - b).op_norm() / b.op_norm().max(1.0)
}
