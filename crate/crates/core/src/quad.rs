//! Adaptive Gauss–Legendre quadrature for complex integrands along
//! trajectories. Trajectory knots are passed as breakpoints so the integrand
//! is smooth on every panel.

use crate::error::Result;
use crate::scalar::{Cx, Real};

const NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

const MAX_DEPTH: u32 = 16;

fn panel<T: Real, F>(f: &mut F, a: T, b: T) -> Result<Cx<T>>
where
    F: FnMut(T) -> Result<Cx<T>>,
{
    let half = (b - a) * T::lit(0.5);
    let mid = a + half;
    let mut acc = Cx::new(T::zero(), T::zero());
    for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
        acc = acc + f(mid + half * T::lit(*x))? * T::lit(*w);
    }
    Ok(acc * half)
}

fn refine<T: Real, F>(f: &mut F, a: T, b: T, whole: Cx<T>, tol: T, depth: u32) -> Result<Cx<T>>
where
    F: FnMut(T) -> Result<Cx<T>>,
{
    let mid = a + (b - a) * T::lit(0.5);
    let left = panel(f, a, mid)?;
    let right = panel(f, mid, b)?;
    let halves = left + right;
    if depth >= MAX_DEPTH || (halves - whole).norm() <= tol {
        return Ok(halves);
    }
    let tol = tol * T::lit(0.5);
    Ok(refine(f, a, mid, left, tol, depth + 1)? + refine(f, mid, b, right, tol, depth + 1)?)
}

/// Integrates `f` from `breakpoints[0]` to the last breakpoint.
///
/// Each panel between consecutive breakpoints is refined until halving
/// changes it by less than `abs_tol + rel_tol·max(|panel|, share)`, where
/// `share` is the panel's length-proportional part of the total magnitude.
/// With `abs_tol = 0` the rule is purely relative.
pub fn integrate<T: Real, F>(mut f: F, breakpoints: &[T], rel_tol: T, abs_tol: T) -> Result<Cx<T>>
where
    F: FnMut(T) -> Result<Cx<T>>,
{
    let mut total = Cx::new(T::zero(), T::zero());
    if breakpoints.len() < 2 {
        return Ok(total);
    }
    let span = *breakpoints.last().unwrap() - breakpoints[0];
    if !(span > T::zero()) {
        return Ok(total);
    }
    let mut panels = Vec::with_capacity(breakpoints.len() - 1);
    let mut magnitude = T::zero();
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let whole = panel(&mut f, a, b)?;
            magnitude += whole.norm();
            panels.push((a, b, whole));
        }
    }
    for (a, b, whole) in panels {
        let share = (b - a) / span;
        let tol = abs_tol * share + rel_tol * whole.norm().max(magnitude * share);
        total = total + refine(&mut f, a, b, whole, tol, 0)?;
    }
    Ok(total)
}

/// Merged, sorted breakpoints from several knot sets, clipped to `[a, b]`.
pub fn breakpoints<T: Real>(a: T, b: T, knot_sets: &[&[T]]) -> Vec<T> {
    let mut pts: Vec<T> = knot_sets
        .iter()
        .flat_map(|k| k.iter().copied())
        .filter(|&t| t > a && t < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite knots"));
    pts.dedup();
    pts
}
