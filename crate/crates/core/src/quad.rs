//! One-dimensional quadrature building blocks: Gauss–Legendre rules and an
//! adaptive bisection driver for integrands with isolated algebraic
//! endpoint singularities (|cos α|^{2s} kinks, mollifier profiles, kernel
//! cell averages all reduce to these).

use crate::{Error, Result, Scalar};

/// Nodes and weights of the m-point Gauss–Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; deterministic
/// and accurate to machine precision for the orders used here (m ≤ 32).
pub fn gauss_legendre<S: Scalar>(m: usize) -> (Vec<S>, Vec<S>) {
    assert!(m >= 1, "Gauss-Legendre order must be at least 1");
    let mut nodes = vec![S::zero(); m];
    let mut weights = vec![S::zero(); m];
    let mf = S::from_count(m);
    for i in 0..m.div_ceil(2) {
        // Chebyshev-based initial guess for the i-th root.
        let k = S::from_count(i) + S::c(0.75);
        let mut x = (S::PI() * k / (mf + S::c(0.5))).cos();
        let mut dp = S::one();
        for _ in 0..100 {
            // Legendre polynomial P_m(x) and derivative by recurrence.
            let mut p0 = S::one();
            let mut p1 = x;
            for j in 2..=m {
                let jf = S::from_count(j);
                let p2 = ((S::c(2.0) * jf - S::one()) * x * p1 - (jf - S::one()) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            // P'_m(x) = m (x P_m - P_{m-1}) / (x^2 - 1).
            dp = mf * (x * p1 - p0) / (x * x - S::one());
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= S::epsilon() * (S::one() + x.abs()) {
                break;
            }
        }
        let w = S::c(2.0) / ((S::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        // Midpoint node of odd rules sits exactly at zero.
        nodes[m / 2] = S::zero();
    }
    (nodes, weights)
}

/// Fixed Gauss–Legendre quadrature of `f` over [a, b].
pub fn integrate_gl<S: Scalar>(f: &mut impl FnMut(S) -> S, a: S, b: S, m: usize) -> S {
    let (nodes, weights) = gauss_legendre::<S>(m);
    let half = (b - a) * S::c(0.5);
    let mid = (b + a) * S::c(0.5);
    let mut acc = S::zero();
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc = acc + *w * f(mid + half * *x);
    }
    acc * half
}

/// Adaptive Gauss–Legendre quadrature over [a, b] to relative tolerance
/// `rel_tol` (relative to the accumulated integral magnitude).
///
/// Each interval is accepted when the 15-point estimate agrees with the
/// sum of the two half-interval estimates; otherwise it is bisected, down
/// to `max_depth` levels. Returns the integral and the achieved relative
/// error estimate, or a quadrature-failure error when an interval at
/// maximal depth still disagrees beyond tolerance.
pub fn integrate_adaptive<S: Scalar>(
    f: &mut impl FnMut(S) -> S,
    a: S,
    b: S,
    rel_tol: S,
    max_depth: usize,
) -> Result<(S, S)> {
    struct Item<S> {
        a: S,
        b: S,
        whole: S,
        depth: usize,
    }
    let mut stack = vec![Item {
        a,
        b,
        whole: integrate_gl(f, a, b, 15),
        depth: 0,
    }];
    let mut total = S::zero();
    let mut err_abs = S::zero();
    // Scale for the relative test; refined as the total accumulates.
    let coarse = stack[0].whole.abs().max(S::min_positive_value());
    while let Some(item) = stack.pop() {
        let mid = (item.a + item.b) * S::c(0.5);
        let left = integrate_gl(f, item.a, mid, 15);
        let right = integrate_gl(f, mid, item.b, 15);
        let refined = left + right;
        let disc = (refined - item.whole).abs();
        let scale = total.abs().max(coarse);
        if disc <= rel_tol * scale * S::c(0.25) || item.depth >= max_depth {
            if item.depth >= max_depth && disc > rel_tol * scale {
                let achieved = (disc / scale).to_f64().unwrap_or(f64::NAN);
                return Err(Error::QuadratureNonConvergence {
                    achieved,
                    required: rel_tol.to_f64().unwrap_or(f64::NAN),
                });
            }
            total = total + refined;
            err_abs = err_abs + disc;
        } else {
            stack.push(Item {
                a: item.a,
                b: mid,
                whole: left,
                depth: item.depth + 1,
            });
            stack.push(Item {
                a: mid,
                b: item.b,
                whole: right,
                depth: item.depth + 1,
            });
        }
    }
    let achieved = err_abs / total.abs().max(coarse);
    Ok((total, achieved))
}

/// Tensor-product Gauss–Legendre average of `f` over the n-cube centered
/// at `center` with side `side` (n = dimension of `center` used). Returns
/// the mean value, i.e. the integral divided by side^n.
pub fn cell_average<S: Scalar>(
    f: &mut impl FnMut(&[S; 3]) -> S,
    center: &[S; 3],
    side: S,
    n: usize,
    order: usize,
) -> S {
    let (nodes, weights) = gauss_legendre::<S>(order);
    let half = side * S::c(0.5);
    let mut acc = S::zero();
    match n {
        2 => {
            for (xi, wi) in nodes.iter().zip(weights.iter()) {
                for (xj, wj) in nodes.iter().zip(weights.iter()) {
                    let p = [center[0] + half * *xi, center[1] + half * *xj, S::zero()];
                    acc = acc + *wi * *wj * f(&p);
                }
            }
            // Weights sum to 2 per axis; normalize to a mean value.
            acc * S::c(0.25)
        }
        3 => {
            for (xi, wi) in nodes.iter().zip(weights.iter()) {
                for (xj, wj) in nodes.iter().zip(weights.iter()) {
                    for (xk, wk) in nodes.iter().zip(weights.iter()) {
                        let p = [
                            center[0] + half * *xi,
                            center[1] + half * *xj,
                            center[2] + half * *xk,
                        ];
                        acc = acc + *wi * *wj * *wk * f(&p);
                    }
                }
            }
            acc * S::c(0.125)
        }
        _ => unreachable!("dimension is validated to 2 or 3 upstream"),
    }
}
