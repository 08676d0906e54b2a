//! Discrete norms and the variational structure of the assembled
//! operator: the Gagliardo inner product of zero-extended fields, the
//! energy functional whose minimizer is the weak solution, localized
//! fractional seminorms, and the norm report attached to solver output.
//!
//! The seminorm route through the quadratic form and the route through
//! the Fourier side (see [`crate::spectral`]) are independent; their
//! agreement is itself a correctness check exercised by the verify
//! suites, so neither is expressed through the other.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::DiscreteField;
use crate::kernel::FractionalOrder;
use crate::op::AssembledOperator;
use crate::spectral;
use crate::{Error, Result, Scalar};

/// Norms of one field in every topology the diagnostics use.
#[derive(Debug, Clone, Serialize)]
pub struct NormReport<S: Scalar> {
    /// Gagliardo seminorm of the zero extension, [u]_{X^{s,0}}.
    pub x_s0_norm: S,
    /// Plain L² norm on the ball.
    pub l2_norm: S,
    /// Potential-weighted L² norm (∫ V u²)^{1/2}.
    pub l2_v_norm: S,
    /// Energy-space norm ([u]² + ∫ V u²)^{1/2}.
    pub y_s0_norm: S,
    /// Spectral Ḣ^s norm of the zero extension.
    pub hdot_s_norm: S,
    /// L^p norms keyed by the exponent's decimal rendering.
    pub lp_norms: BTreeMap<String, S>,
}

/// Discrete L^p norm (hⁿ Σ |u|^p)^{1/p}, p ≥ 1.
pub fn lp_norm<S: Scalar>(u: &DiscreteField<S>, p: S) -> Result<S> {
    if !(p >= S::one()) {
        return Err(Error::Precondition(format!(
            "L^p norm requires p >= 1, got {p}"
        )));
    }
    let hn = u.grid().h().powi(u.grid().n() as i32);
    let sum: S = u.values().iter().map(|&v| v.abs().powf(p)).sum();
    Ok((hn * sum).powf(p.recip()))
}

/// Gagliardo inner product of the zero extensions,
/// ∬ (u(x)−u(y))(v(x)−v(y)) |x−y|^{−n−2s} dx dy, evaluated through the
/// unnormalized-kernel form carried by the assembled operator.
pub fn xs0_inner<S: Scalar>(op: &AssembledOperator<S>, u: &[S], v: &[S]) -> S {
    S::c(2.0) * op.raw_form_inner(u, v)
}

/// Gagliardo seminorm [u]_{X^{s,0}} of the zero extension.
pub fn xs0_norm<S: Scalar>(op: &AssembledOperator<S>, u: &[S]) -> S {
    xs0_inner(op, u, u).max(S::zero()).sqrt()
}

/// Potential-weighted L² norm (hⁿ Σ V_i u_i²)^{1/2}.
pub fn l2_v_norm<S: Scalar>(op: &AssembledOperator<S>, u: &[S]) -> S {
    let hn = op.hn();
    let sum: S = op
        .v_samples()
        .iter()
        .zip(u)
        .map(|(&vi, &ui)| vi * ui * ui)
        .sum();
    (hn * sum).max(S::zero()).sqrt()
}

/// Energy-space norm ([u]² + ‖u‖²_{L²_V})^{1/2}.
pub fn y_s0_norm<S: Scalar>(op: &AssembledOperator<S>, u: &[S]) -> S {
    let g = xs0_inner(op, u, u).max(S::zero());
    let w = l2_v_norm(op, u);
    (g + w * w).sqrt()
}

/// Energy functional E(u) = ⟨Au, u⟩ − 2hⁿ⟨f, u⟩ whose unique minimizer
/// over the active nodes is the weak solution of Au = hⁿf.
pub fn energy<S: Scalar>(op: &AssembledOperator<S>, u: &[S], f: &[S]) -> S {
    let hn = op.hn();
    let lin: S = f.iter().zip(u).map(|(&a, &b)| a * b).sum();
    op.quadratic(u) - S::c(2.0) * hn * lin
}

/// Full norm report for a field, including the spectral norm and the
/// requested L^p scale.
pub fn norm_report<S: Scalar>(
    op: &AssembledOperator<S>,
    u: &DiscreteField<S>,
    lp_exponents: &[S],
) -> Result<NormReport<S>> {
    let vals = u.values();
    let x_s0 = xs0_norm(op, vals);
    let l2v = l2_v_norm(op, vals);
    let hdot = spectral::hdot_norm_sq(u, op.kernel().order())
        .max(S::zero())
        .sqrt();
    let mut lp_norms = BTreeMap::new();
    for &p in lp_exponents {
        lp_norms.insert(format!("{p}"), lp_norm(u, p)?);
    }
    Ok(NormReport {
        x_s0_norm: x_s0,
        l2_norm: u.l2_norm(),
        l2_v_norm: l2v,
        y_s0_norm: (x_s0 * x_s0 + l2v * l2v).sqrt(),
        hdot_s_norm: hdot,
        lp_norms,
    })
}

/// Ratio ‖u‖²_{Ḣ^s} / ((c_{n,s}/2)·[u]²_{X^{s,0}}): the two seminorms are
/// the same object computed through Fourier space and through the
/// Gagliardo double integral, so the ratio must sit near 1. Both-zero
/// fields return exactly 1.
pub fn hdot_identity_ratio<S: Scalar>(
    op: &AssembledOperator<S>,
    u: &DiscreteField<S>,
) -> Result<S> {
    let gagliardo = xs0_inner(op, u.values(), u.values());
    let hdot_sq = spectral::hdot_norm_sq(u, op.kernel().order());
    let denom = op.kernel().normalization() * S::c(0.5) * gagliardo;
    if denom == S::zero() && hdot_sq == S::zero() {
        return Ok(S::one());
    }
    if denom == S::zero() {
        return Err(Error::DegenerateField { floor: 0.0 });
    }
    Ok(hdot_sq / denom)
}

/// Localized fractional seminorm
///
/// ```text
/// [u]_{W^{γ,p}(B_r(x₀))} = ( ∬_{B_r(x₀)²} |u(x)−u(y)|^p |x−y|^{−n−γp} dx dy )^{1/p}
/// ```
///
/// by direct double summation over all lattice positions inside the
/// ball, with the zero extension supplying values outside the active
/// set (and outside the lattice itself). Quadratic cost in the node
/// count of B_r(x₀).
///
/// Preconditions: γ ∈ (0, s), p ≥ 1, p < n/(n−s).
pub fn wgamma_p_seminorm<S: Scalar>(
    u: &DiscreteField<S>,
    order: &FractionalOrder<S>,
    gamma: S,
    p: S,
    center: &[S; 3],
    radius: S,
) -> Result<S> {
    let n = u.grid().n();
    if order.n() != n {
        return Err(Error::Precondition(format!(
            "order dimension {} does not match grid dimension {n}",
            order.n()
        )));
    }
    if !(gamma > S::zero() && gamma < order.s()) {
        return Err(Error::Precondition(format!(
            "seminorm order gamma must lie in (0, s) = (0, {}), got {gamma}",
            order.s()
        )));
    }
    let nf = S::from_count(n);
    let p_max = nf / (nf - order.s());
    if !(p >= S::one() && p < p_max) {
        return Err(Error::Precondition(format!(
            "seminorm exponent p must lie in [1, {p_max}), got {p}"
        )));
    }
    if !(radius > S::zero()) {
        return Err(Error::Precondition(format!(
            "seminorm radius must be positive, got {radius}"
        )));
    }
    let grid = u.grid();
    let h = grid.h();
    let n_side = grid.n_side() as i64;
    let nm1 = S::from_count(grid.n_side()) - S::one();
    // Integer index window covering B_r(center), allowing virtual
    // positions outside the lattice (value zero there).
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for d in 0..n {
        let a = (center[d] - radius) / h + nm1 * S::c(0.5);
        let b = (center[d] + radius) / h + nm1 * S::c(0.5);
        lo[d] = a.floor().to_f64().unwrap() as i64 - 1;
        hi[d] = b.ceil().to_f64().unwrap() as i64 + 1;
    }
    // Collect in-ball positions once: coordinates and field values.
    let mut pts: Vec<([S; 3], S)> = Vec::new();
    let r2 = radius * radius;
    let push_point = |idx: &[i64; 3], pts: &mut Vec<([S; 3], S)>| {
        let mut x = [S::zero(); 3];
        let mut dist2 = S::zero();
        for d in 0..n {
            x[d] = (S::c(2.0) * S::c(idx[d] as f64) - nm1) * h * S::c(0.5);
            let dd = x[d] - center[d];
            dist2 = dist2 + dd * dd;
        }
        if dist2 >= r2 {
            return;
        }
        let value = if (0..n).all(|d| idx[d] >= 0 && idx[d] < n_side) {
            let mut ui = [0usize; 3];
            for d in 0..n {
                ui[d] = idx[d] as usize;
            }
            u.at_flat(grid.flat_index(&ui))
        } else {
            S::zero()
        };
        pts.push((x, value));
    };
    match n {
        2 => {
            for i0 in lo[0]..=hi[0] {
                for i1 in lo[1]..=hi[1] {
                    push_point(&[i0, i1, 0], &mut pts);
                }
            }
        }
        3 => {
            for i0 in lo[0]..=hi[0] {
                for i1 in lo[1]..=hi[1] {
                    for i2 in lo[2]..=hi[2] {
                        push_point(&[i0, i1, i2], &mut pts);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let expo = -(nf + gamma * p);
    let h2n = h.powi(2 * n as i32);
    let mut acc = S::zero();
    for (a, (xa, ua)) in pts.iter().enumerate() {
        for (xb, ub) in pts.iter().skip(a + 1) {
            let du = (*ua - *ub).abs();
            if du == S::zero() {
                continue;
            }
            let mut d2 = S::zero();
            for d in 0..n {
                let dd = xa[d] - xb[d];
                d2 = d2 + dd * dd;
            }
            acc = acc + du.powf(p) * d2.sqrt().powf(expo);
        }
    }
    // Unordered pairs were counted once; the double integral counts both
    // orderings.
    Ok((S::c(2.0) * h2n * acc).powf(p.recip()))
}

/// Ratio ‖u‖_{L^{2n/(n−2s)}} / [u]_{X^{s,0}}, the measured constant of
/// the critical Sobolev embedding. Errors on a degenerate (zero) field.
pub fn embedding_ratio<S: Scalar>(
    op: &AssembledOperator<S>,
    u: &DiscreteField<S>,
) -> Result<S> {
    let denom = xs0_norm(op, u.values());
    if denom == S::zero() {
        return Err(Error::DegenerateField { floor: 0.0 });
    }
    let p_crit = op.kernel().order().critical_exponent();
    Ok(lp_norm(u, p_crit)? / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{Kernel, Potential};
    use crate::op::AssemblyParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn small_op(n_side: usize) -> AssembledOperator<f64> {
        let grid = Grid::build(2, 1.0, n_side).unwrap();
        AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::zero(),
            grid,
            &AssemblyParams::default(),
        )
        .unwrap()
    }

    fn bump(grid: &Arc<Grid<f64>>, cx: f64, cy: f64, w: f64) -> DiscreteField<f64> {
        DiscreteField::from_fn(grid.clone(), |x| {
            let d2 = (x[0] - cx).powi(2) + (x[1] - cy).powi(2);
            (-d2 / (w * w)).exp()
        })
    }

    #[test]
    fn lp_norm_of_unit_field_matches_mass_power() {
        let grid = Grid::<f64>::build(2, 1.0, 5).unwrap();
        let u = DiscreteField::from_fn(grid, |_| 1.0);
        // 9 nodes, h = 0.4: (hⁿ·9)^{1/p} = 1.44^{1/p}.
        for p in [1.0, 2.0, 4.0] {
            assert_relative_eq!(
                lp_norm(&u, p).unwrap(),
                1.44f64.powf(1.0 / p),
                max_relative = 1e-13
            );
        }
        assert!(lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn xs0_inner_is_symmetric_and_bilinear() {
        let op = small_op(9);
        let grid = op.grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = grid.n_active();
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let uv = xs0_inner(&op, &u, &v);
        let vu = xs0_inner(&op, &v, &u);
        assert_relative_eq!(uv, vu, max_relative = 1e-11);
        let (a, b) = (0.7, -1.3);
        let au_bw: Vec<f64> = u.iter().zip(&w).map(|(&x, &y)| a * x + b * y).collect();
        let lhs = xs0_inner(&op, &au_bw, &v);
        let rhs = a * uv + b * xs0_inner(&op, &w, &v);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    /// Disjointly supported nonnegative bumps interact only through the
    /// negative cross terms of the double integral.
    #[test]
    fn xs0_inner_of_disjoint_bumps_is_negative() {
        let grid = Grid::<f64>::build(2, 1.0, 33).unwrap();
        let op = AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::zero(),
            grid.clone(),
            &AssemblyParams::default(),
        )
        .unwrap();
        let mut u = DiscreteField::zeros(grid.clone());
        let mut v = DiscreteField::zeros(grid.clone());
        for a in 0..grid.n_active() {
            let x = grid.active_coords(a);
            if (x[0] + 0.5).abs() < 0.2 && x[1].abs() < 0.2 {
                u.values_mut()[a] = 1.0;
            }
            if (x[0] - 0.5).abs() < 0.2 && x[1].abs() < 0.2 {
                v.values_mut()[a] = 1.0;
            }
        }
        let cross = xs0_inner(&op, u.values(), v.values());
        assert!(cross < 0.0, "disjoint bump inner product {cross} not negative");
    }

    #[test]
    fn energy_is_quadratic_with_positive_curvature() {
        let op = small_op(9);
        let m = op.grid().n_active();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for t in [1e-3, 1e-2, 0.1] {
            let up: Vec<f64> = u.iter().zip(&v).map(|(&a, &b)| a + t * b).collect();
            let um: Vec<f64> = u.iter().zip(&v).map(|(&a, &b)| a - t * b).collect();
            let second =
                energy(&op, &up, &f) + energy(&op, &um, &f) - 2.0 * energy(&op, &u, &f);
            let predicted = 2.0 * t * t * op.quadratic(&v);
            assert_relative_eq!(second, predicted, max_relative = 1e-8);
            assert!(second > 0.0);
        }
    }

    /// Spectral and Gagliardo routes to the same seminorm agree within
    /// discretization error on a smooth bump.
    #[test]
    fn hdot_identity_ratio_near_one_for_smooth_bump() {
        let grid = Grid::<f64>::build(2, 1.0, 33).unwrap();
        let op = AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::zero(),
            grid.clone(),
            &AssemblyParams::default(),
        )
        .unwrap();
        let u = bump(&grid, 0.0, 0.0, 0.25);
        let ratio = hdot_identity_ratio(&op, &u).unwrap();
        assert!(
            (0.9..=1.1).contains(&ratio),
            "seminorm identity ratio {ratio} outside [0.9, 1.1]"
        );
        let zero = DiscreteField::zeros(grid);
        assert_eq!(hdot_identity_ratio(&op, &zero).unwrap(), 1.0);
    }

    #[test]
    fn wgamma_seminorm_zero_on_plateau_and_monotone_in_radius() {
        let grid = Grid::<f64>::build(2, 1.0, 33).unwrap();
        let order = FractionalOrder::new(2, 0.5).unwrap();
        // Plateau: constant 1 on |x| < 0.6.
        let u = DiscreteField::from_fn(grid.clone(), |x| {
            if x[0] * x[0] + x[1] * x[1] < 0.36 {
                1.0
            } else {
                0.0
            }
        });
        let center = [0.0, 0.0, 0.0];
        let inside = wgamma_p_seminorm(&u, &order, 0.25, 1.2, &center, 0.3).unwrap();
        assert_eq!(inside, 0.0, "seminorm on a constant plateau must vanish");
        let small = wgamma_p_seminorm(&u, &order, 0.25, 1.2, &center, 0.7).unwrap();
        let large = wgamma_p_seminorm(&u, &order, 0.25, 1.2, &center, 0.9).unwrap();
        assert!(small > 0.0);
        assert!(
            large >= small,
            "seminorm must grow with the ball: {large} < {small}"
        );
    }

    #[test]
    fn wgamma_seminorm_rejects_out_of_range_parameters() {
        let grid = Grid::<f64>::build(2, 1.0, 9).unwrap();
        let order = FractionalOrder::new(2, 0.5).unwrap();
        let u = DiscreteField::zeros(grid);
        let c = [0.0, 0.0, 0.0];
        assert!(wgamma_p_seminorm(&u, &order, 0.6, 1.2, &c, 0.5).is_err());
        assert!(wgamma_p_seminorm(&u, &order, 0.25, 0.9, &c, 0.5).is_err());
        // p_max = n/(n−s) = 2/1.5.
        assert!(wgamma_p_seminorm(&u, &order, 0.25, 1.34, &c, 0.5).is_err());
        assert!(wgamma_p_seminorm(&u, &order, 0.25, 1.2, &c, -1.0).is_err());
    }

    #[test]
    fn embedding_ratio_is_scale_invariant() {
        let grid = Grid::<f64>::build(2, 1.0, 17).unwrap();
        let op = AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::zero(),
            grid.clone(),
            &AssemblyParams::default(),
        )
        .unwrap();
        let u = bump(&grid, 0.1, -0.2, 0.3);
        let r1 = embedding_ratio(&op, &u).unwrap();
        let mut u3 = u.clone();
        for v in u3.values_mut() {
            *v *= 3.0;
        }
        let r3 = embedding_ratio(&op, &u3).unwrap();
        assert_relative_eq!(r1, r3, max_relative = 1e-12);
        assert!(r1 > 0.0);
        let zero = DiscreteField::zeros(grid);
        assert!(embedding_ratio(&op, &zero).is_err());
    }

    #[test]
    fn norm_report_consistency() {
        let grid = Grid::<f64>::build(2, 1.0, 17).unwrap();
        let op = AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::constant(2.0, 3.0).unwrap(),
            grid.clone(),
            &AssemblyParams::default(),
        )
        .unwrap();
        let u = bump(&grid, 0.0, 0.0, 0.3);
        let report = norm_report(&op, &u, &[1.0, 2.0]).unwrap();
        // With V ≡ 2: ‖u‖_{L²_V} = √2·‖u‖_{L²}.
        assert_relative_eq!(
            report.l2_v_norm,
            2f64.sqrt() * report.l2_norm,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            report.y_s0_norm,
            (report.x_s0_norm.powi(2) + report.l2_v_norm.powi(2)).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            report.lp_norms["2"],
            report.l2_norm,
            max_relative = 1e-12
        );
    }

    proptest! {
        /// Scaling a field by t scales the Gagliardo seminorm by |t|; a
        /// violation means the quadratic form lost homogeneity somewhere.
        #[test]
        fn xs0_norm_is_absolutely_homogeneous(t in -3.0f64..3.0) {
            let op = small_op(9);
            let m = op.grid().n_active();
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tu: Vec<f64> = u.iter().map(|&x| t * x).collect();
            let lhs = xs0_norm(&op, &tu);
            let rhs = t.abs() * xs0_norm(&op, &u);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-12));
        }
    }
}
