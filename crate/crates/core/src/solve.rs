//! Conjugate-gradient solution of the assembled system A u = hⁿ f and
//! the a-posteriori checks tied to it: weak-formulation defects against
//! random test fields, the discrete maximum and comparison principles
//! that the M-matrix structure guarantees, and the Plancherel crosscheck
//! of the quadratic form against the Fourier multiplier route.

use rand::Rng;
use serde::Serialize;

use crate::grid::DiscreteField;
use crate::kernel::KernelFamily;
use crate::op::AssembledOperator;
use crate::spectral;
use crate::variational::{self, NormReport};
use crate::{Error, Result, Scalar};

/// Iteration cap used when the configuration does not set one.
const DEFAULT_MAX_ITERATIONS: usize = 50_000;

/// Fraction of the ball radius inside which the Plancherel crosscheck
/// requires the fields to be supported.
const PLANCHEREL_SUPPORT_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Preconditioner {
    None,
    #[default]
    Diagonal,
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveConfig<S: Scalar> {
    /// Relative residual target ‖b − Au‖₂ ≤ tol·‖b‖₂; must lie in
    /// (0, 1e−2).
    pub cg_tolerance: S,
    /// Iteration cap; `None` uses [`DEFAULT_MAX_ITERATIONS`].
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl<S: Scalar> Default for SolveConfig<S> {
    fn default() -> Self {
        Self {
            cg_tolerance: S::c(1e-10),
            max_iterations: None,
            preconditioner: Preconditioner::Diagonal,
        }
    }
}

impl<S: Scalar> SolveConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tolerance > S::zero() && self.cg_tolerance < S::c(1e-2)) {
            return Err(Error::Config(format!(
                "cg_tolerance must lie in (0, 1e-2), got {}",
                self.cg_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config(
                "max_iterations must be positive when set".into(),
            ));
        }
        Ok(())
    }
}

/// Solution of one weak problem with its diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport<S: Scalar> {
    pub solution: DiscreteField<S>,
    pub iterations: usize,
    /// True residual ‖b − Au‖₂ recomputed after the iteration.
    pub final_residual: S,
    /// E(u) = ⟨Au,u⟩ − 2hⁿ⟨f,u⟩ at the solution.
    pub energy_value: S,
    pub norm_report: NormReport<S>,
    /// ‖u‖_{Y^{s,0}} / ‖f‖_{L²}, the measured stability constant of the
    /// solve; `None` when the right-hand side vanishes.
    pub laxmilgram_ratio: Option<S>,
}

/// Solves A u = hⁿ f by preconditioned conjugate gradients from the zero
/// start and attaches the energy, norm report, and stability ratio.
pub fn weak_solve<S: Scalar>(
    op: &AssembledOperator<S>,
    f: &DiscreteField<S>,
    config: &SolveConfig<S>,
) -> Result<SolveReport<S>> {
    config.validate()?;
    let hn = op.hn();
    let b: Vec<S> = f.values().iter().map(|&v| hn * v).collect();
    let (x, iterations, final_residual) = run_pcg(op, &b, config)?;
    let solution = DiscreteField::from_values(op.grid().clone(), x)?;
    let energy_value = variational::energy(op, solution.values(), f.values());
    let p_crit = op.kernel().order().critical_exponent();
    let norm_report =
        variational::norm_report(op, &solution, &[S::one(), S::c(2.0), p_crit])?;
    let f_l2 = f.l2_norm();
    let laxmilgram_ratio = if f_l2 > S::zero() {
        Some(norm_report.y_s0_norm / f_l2)
    } else {
        None
    };
    Ok(SolveReport {
        solution,
        iterations,
        final_residual,
        energy_value,
        norm_report,
        laxmilgram_ratio,
    })
}

fn run_pcg<S: Scalar>(
    op: &AssembledOperator<S>,
    b: &[S],
    config: &SolveConfig<S>,
) -> Result<(Vec<S>, usize, S)> {
    let m = b.len();
    let b_norm = l2(b);
    if b_norm == S::zero() {
        return Ok((vec![S::zero(); m], 0, S::zero()));
    }
    let target = config.cg_tolerance * b_norm;
    let max_iter = config.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS);
    let precondition = |r: &[S]| -> Vec<S> {
        match config.preconditioner {
            Preconditioner::None => r.to_vec(),
            Preconditioner::Diagonal => r
                .iter()
                .zip(op.diag())
                .map(|(&ri, &di)| ri / di)
                .collect(),
        }
    };
    let mut x = vec![S::zero(); m];
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history: Vec<f64> = Vec::new();
    for iter in 1..=max_iter {
        let ap = op.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > S::zero()) {
            return Err(Error::NotPositiveDefinite {
                iteration: iter,
                curvature: pap.to_f64().unwrap_or(f64::NAN),
            });
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        let res = l2(&r);
        history.push(res.to_f64().unwrap_or(f64::NAN));
        if res <= target {
            // Recompute the true residual; the recurrence can drift.
            let ax = op.matvec(&x);
            let true_res = l2(&b
                .iter()
                .zip(&ax)
                .map(|(&bi, &axi)| bi - axi)
                .collect::<Vec<_>>());
            return Ok((x, iter, true_res));
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    let final_residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        iterations: max_iter,
        final_residual,
        tolerance: (config.cg_tolerance * b_norm).to_f64().unwrap_or(f64::NAN),
        history,
    })
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn l2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Largest weak-formulation defect |⟨Au − b, φ⟩| / (‖φ‖₂‖b‖₂) over
/// random test fields φ. For the returned solution of [`weak_solve`]
/// this is bounded by the solver tolerance.
pub fn verify_weak_formulation<S: Scalar>(
    op: &AssembledOperator<S>,
    u: &DiscreteField<S>,
    f: &DiscreteField<S>,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<S> {
    let hn = op.hn();
    let b: Vec<S> = f.values().iter().map(|&v| hn * v).collect();
    let b_norm = l2(&b);
    if b_norm == S::zero() {
        return Err(Error::Precondition(
            "weak-formulation defect needs a nonzero right-hand side".into(),
        ));
    }
    let residual: Vec<S> = op
        .matvec(u.values())
        .iter()
        .zip(&b)
        .map(|(&au, &bi)| au - bi)
        .collect();
    let m = residual.len();
    let mut worst = S::zero();
    for _ in 0..trials {
        let phi: Vec<S> = (0..m)
            .map(|_| S::c(rng.gen_range(-1.0..1.0)))
            .collect();
        let defect = dot(&residual, &phi).abs() / (l2(&phi) * b_norm);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Worst relative positivity violation of solutions to random
/// nonnegative data: solves A u = hⁿ f for `trials` draws of f ≥ 0 and
/// returns max(0, −min u)/‖u‖_∞ maximized over the draws. The M-matrix
/// structure keeps this at solver-tolerance level.
pub fn check_maximum_principle<S: Scalar>(
    op: &AssembledOperator<S>,
    config: &SolveConfig<S>,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<S> {
    let m = op.grid().n_active();
    let mut worst = S::zero();
    for _ in 0..trials {
        let f = DiscreteField::from_values(
            op.grid().clone(),
            (0..m).map(|_| S::c(rng.gen_range(0.0..1.0))).collect(),
        )?;
        let report = weak_solve(op, &f, config)?;
        let u = report.solution;
        let scale = u.max_value().max(-u.min_value()).max(S::epsilon());
        let violation = (-u.min_value()).max(S::zero()) / scale;
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// Worst relative ordering violation between solutions of ordered data:
/// draws f₁ ≥ 0 and f₂ = f₁ + g with g ≥ 0, solves both, and returns
/// max(0, max(u₁ − u₂))/‖u₂‖_∞ maximized over the draws.
pub fn check_comparison<S: Scalar>(
    op: &AssembledOperator<S>,
    config: &SolveConfig<S>,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<S> {
    let m = op.grid().n_active();
    let mut worst = S::zero();
    for _ in 0..trials {
        let f1: Vec<S> = (0..m).map(|_| S::c(rng.gen_range(0.0..1.0))).collect();
        let f2: Vec<S> = f1
            .iter()
            .map(|&v| v + S::c(rng.gen_range(0.0..1.0)))
            .collect();
        let u1 = weak_solve(
            op,
            &DiscreteField::from_values(op.grid().clone(), f1)?,
            config,
        )?
        .solution;
        let u2 = weak_solve(
            op,
            &DiscreteField::from_values(op.grid().clone(), f2)?,
            config,
        )?
        .solution;
        let scale = u2.max_value().max(S::epsilon());
        let gap = u1
            .values()
            .iter()
            .zip(u2.values())
            .map(|(&a, &b)| a - b)
            .fold(S::neg_infinity(), S::max);
        worst = worst.max(gap.max(S::zero()) / scale);
    }
    Ok(worst)
}

/// Two routes to the same bilinear form of the pure fractional kernel.
#[derive(Debug, Clone, Serialize)]
pub struct PlancherelCheck<S: Scalar> {
    /// ⟨Au, v⟩ through the assembled lattice operator.
    pub direct: S,
    /// (2π)^{−n} Σ |ξ|^{2s} û conj(v̂) Δξⁿ through the Fourier side.
    pub spectral: S,
    /// |direct − spectral| / max(|direct|, |spectral|).
    pub rel_gap: S,
}

/// Crosschecks ⟨Au, v⟩ against the Fourier multiplier route. Requires
/// the pure fractional kernel, zero potential, and both fields supported
/// inside 3R/4 (so the supercube periodization and boundary effects stay
/// below the quadrature error).
pub fn plancherel_crosscheck<S: Scalar>(
    op: &AssembledOperator<S>,
    u: &DiscreteField<S>,
    v: &DiscreteField<S>,
) -> Result<PlancherelCheck<S>> {
    if op.kernel().family() != KernelFamily::PureFractional {
        return Err(Error::Precondition(
            "multiplier crosscheck requires the pure fractional kernel".into(),
        ));
    }
    if !op.potential().is_zero() {
        return Err(Error::Precondition(
            "multiplier crosscheck requires a zero potential".into(),
        ));
    }
    let limit = op.grid().r_ball() * S::c(PLANCHEREL_SUPPORT_FRACTION);
    for (name, field) in [("u", u), ("v", v)] {
        for a in 0..field.grid().n_active() {
            if field.at(a) != S::zero() && field.grid().active_radius(a) > limit {
                return Err(Error::Precondition(format!(
                    "field {name} must be supported inside {PLANCHEREL_SUPPORT_FRACTION}·R for the crosscheck"
                )));
            }
        }
    }
    let direct = dot(&op.matvec(u.values()), v.values());
    let spectral = spectral::multiplier_bilinear(u, v, op.kernel().order());
    let denom = direct.abs().max(spectral.abs()).max(S::epsilon());
    Ok(PlancherelCheck {
        direct,
        spectral,
        rel_gap: (direct - spectral).abs() / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{FractionalOrder, Kernel, Potential};
    use crate::op::{AssemblyParams, BackendChoice};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn getoor_op(n_side: usize) -> AssembledOperator<f64> {
        let grid = Grid::build(2, 1.0, n_side).unwrap();
        AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::zero(),
            grid,
            &AssemblyParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_rhs_returns_zero_solution_without_ratio() {
        let op = getoor_op(9);
        let f = DiscreteField::zeros(op.grid().clone());
        let report = weak_solve(&op, &f, &SolveConfig::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(report.solution.values().iter().all(|&v| v == 0.0));
        assert_eq!(report.laxmilgram_ratio, None);
        assert_eq!(report.energy_value, 0.0);
    }

    /// Constant data on the unit disk at s = 1/2: the solution of the
    /// pure fractional problem is C·(1−|x|²)^s with C = 2/π at the
    /// origin; a coarse lattice already lands within a few percent.
    #[test]
    fn coarse_getoor_solution_hits_center_value() {
        let op = getoor_op(21);
        let f = DiscreteField::from_fn(op.grid().clone(), |_| 1.0);
        let report = weak_solve(&op, &f, &SolveConfig::default()).unwrap();
        let grid = op.grid();
        let center = grid
            .active_index_of_flat(grid.flat_index(&[10, 10, 0]))
            .unwrap();
        let measured = report.solution.at(center);
        let expected = 2.0 / std::f64::consts::PI;
        assert!(
            (measured - expected).abs() / expected < 0.1,
            "center value {measured} vs Getoor {expected}"
        );
        // Minimizer structure: energy at the solution is -⟨b,u⟩.
        let hn = op.hn();
        let bu: f64 = report
            .solution
            .values()
            .iter()
            .map(|&ui| hn * ui)
            .sum();
        assert_relative_eq!(report.energy_value, -bu, max_relative = 1e-8);
        assert!(report.laxmilgram_ratio.unwrap() > 0.0);
    }

    #[test]
    fn solver_tolerance_is_validated() {
        let op = getoor_op(5);
        let f = DiscreteField::from_fn(op.grid().clone(), |_| 1.0);
        for bad_tol in [0.0, -1.0, 0.5] {
            let cfg = SolveConfig {
                cg_tolerance: bad_tol,
                ..SolveConfig::default()
            };
            assert!(weak_solve(&op, &f, &cfg).is_err());
        }
        let cfg = SolveConfig {
            max_iterations: Some(0),
            ..SolveConfig::default()
        };
        assert!(weak_solve(&op, &f, &cfg).is_err());
    }

    #[test]
    fn starved_iteration_budget_reports_history() {
        let op = getoor_op(17);
        let f = DiscreteField::from_fn(op.grid().clone(), |_| 1.0);
        let cfg = SolveConfig {
            cg_tolerance: 1e-12,
            max_iterations: Some(2),
            preconditioner: Preconditioner::None,
        };
        match weak_solve(&op, &f, &cfg) {
            Err(crate::Error::NonConvergence {
                iterations,
                history,
                ..
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
                assert!(history[1] < history[0], "residual should decrease");
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    /// The data and the operator are invariant under the dihedral
    /// symmetries of the lattice; the solution must be too.
    #[test]
    fn solution_inherits_dihedral_symmetry() {
        let op = getoor_op(17);
        let grid = op.grid().clone();
        let f = DiscreteField::from_fn(grid.clone(), |x| 1.0 + x[0] * x[0] + x[1] * x[1]);
        let report = weak_solve(&op, &f, &SolveConfig::default()).unwrap();
        let u = &report.solution;
        let scale = u.max_value();
        let n_side = grid.n_side();
        for a in 0..grid.n_active() {
            let idx = grid.lattice_coords(grid.active()[a] as usize);
            let images = [
                [n_side - 1 - idx[0], idx[1], 0],
                [idx[0], n_side - 1 - idx[1], 0],
                [idx[1], idx[0], 0],
            ];
            for im in images {
                let j = grid.active_index_of_flat(grid.flat_index(&im)).unwrap();
                assert!(
                    (u.at(a) - u.at(j)).abs() <= 1e-10 * scale,
                    "symmetry violation {} vs {} at {idx:?}",
                    u.at(a),
                    u.at(j)
                );
            }
        }
    }

    #[test]
    fn weak_formulation_defect_is_tiny_for_solutions() {
        let op = getoor_op(17);
        let f = DiscreteField::from_fn(op.grid().clone(), |x| (1.0 - x[0]).abs());
        let cfg = SolveConfig {
            cg_tolerance: 1e-12,
            ..SolveConfig::default()
        };
        let report = weak_solve(&op, &f, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let defect =
            verify_weak_formulation(&op, &report.solution, &f, 10, &mut rng).unwrap();
        assert!(defect <= 1e-11, "defect {defect} above solver tolerance");
        // A visibly perturbed field must show a visible defect.
        let mut wrong = report.solution.clone();
        wrong.values_mut()[0] *= 1.5;
        wrong.values_mut().iter_mut().for_each(|v| *v *= 1.1);
        let bad = verify_weak_formulation(&op, &wrong, &f, 10, &mut rng).unwrap();
        assert!(bad > 100.0 * defect, "perturbed defect {bad} too small");
    }

    #[test]
    fn principles_hold_on_a_small_grid() {
        let op = getoor_op(9);
        let cfg = SolveConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let max_violation = check_maximum_principle(&op, &cfg, 5, &mut rng).unwrap();
        assert!(max_violation <= 1e-9, "positivity violation {max_violation}");
        let cmp_violation = check_comparison(&op, &cfg, 5, &mut rng).unwrap();
        assert!(cmp_violation <= 1e-9, "ordering violation {cmp_violation}");
    }

    #[test]
    fn plancherel_crosscheck_preconditions() {
        let grid = Grid::<f64>::build(2, 1.0, 17).unwrap();
        let op_mod = AssembledOperator::assemble(
            Kernel::modulated(FractionalOrder::new(2, 0.5).unwrap(), 1.0, 2.0).unwrap(),
            Potential::zero(),
            grid.clone(),
            &AssemblyParams::default(),
        )
        .unwrap();
        let bump = |c: f64| {
            DiscreteField::from_fn(grid.clone(), move |x| {
                let d2 = (x[0] - c).powi(2) + x[1].powi(2);
                if d2 < 0.09 {
                    (0.09 - d2).powi(2)
                } else {
                    0.0
                }
            })
        };
        let u = bump(0.0);
        assert!(plancherel_crosscheck(&op_mod, &u, &u).is_err());
        let op = getoor_op(17);
        let wide = DiscreteField::from_fn(op.grid().clone(), |_| 1.0);
        assert!(plancherel_crosscheck(&op, &wide, &wide).is_err());
    }

    /// Dense direct solve (Cholesky from an external linear-algebra
    /// crate) against the conjugate-gradient path on a tiny instance.
    #[test]
    fn cg_matches_direct_factorization_on_tiny_grid() {
        let grid = Grid::<f64>::build(2, 1.0, 5).unwrap();
        let op = AssembledOperator::assemble(
            Kernel::pure_fractional(FractionalOrder::new(2, 0.5).unwrap()).unwrap(),
            Potential::constant(1.0, 3.0).unwrap(),
            grid.clone(),
            &AssemblyParams {
                backend: BackendChoice::ForceDense,
                ..AssemblyParams::default()
            },
        )
        .unwrap();
        let m = grid.n_active();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let col = op.matvec(&e);
            for i in 0..m {
                dense[(i, j)] = col[i];
            }
        }
        let f = DiscreteField::from_fn(grid.clone(), |x| 1.0 + x[0]);
        let hn = op.hn();
        let b = nalgebra::DVector::from_iterator(m, f.values().iter().map(|&v| hn * v));
        let direct = nalgebra::linalg::Cholesky::new(dense)
            .expect("assembled matrix must be positive definite")
            .solve(&b);
        let cfg = SolveConfig {
            cg_tolerance: 1e-12,
            ..SolveConfig::default()
        };
        let report = weak_solve(&op, &f, &cfg).unwrap();
        let scale = direct.amax();
        for i in 0..m {
            assert!(
                (report.solution.at(i) - direct[i]).abs() <= 1e-10 * scale,
                "node {i}: cg {} direct {}",
                report.solution.at(i),
                direct[i]
            );
        }
    }

    /// Bitwise determinism: the whole pipeline re-run from scratch gives
    /// the identical bit pattern, a requirement for reproducible reports.
    #[test]
    fn weak_solve_is_bitwise_deterministic() {
        let run = || {
            let op = getoor_op(17);
            let f = DiscreteField::from_fn(op.grid().clone(), |x| x[0].cos() + 2.0);
            weak_solve(&op, &f, &SolveConfig::default()).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.solution.values().iter().zip(b.solution.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    /// Fields on a grid with an off-center support: helper sanity that
    /// the support-radius precondition triggers for translated bumps.
    #[test]
    fn plancherel_support_precondition_uses_radius() {
        let op = getoor_op(33);
        let grid = op.grid().clone();
        let near_edge = DiscreteField::from_fn(grid.clone(), |x| {
            let d2 = (x[0] - 0.8).powi(2) + x[1].powi(2);
            if d2 < 0.01 {
                1.0
            } else {
                0.0
            }
        });
        assert!(plancherel_crosscheck(&op, &near_edge, &near_edge).is_err());
        let centered = DiscreteField::from_fn(grid.clone(), |x| {
            let d2 = x[0].powi(2) + x[1].powi(2);
            if d2 < 0.04 {
                1.0
            } else {
                0.0
            }
        });
        let check = plancherel_crosscheck(&op, &centered, &centered).unwrap();
        assert!(check.rel_gap.is_finite());
    }

    #[test]
    fn types_are_send_for_field_and_op() {
        fn assert_send<T: Send>() {}
        assert_send::<DiscreteField<f64>>();
        assert_send::<Arc<Grid<f64>>>();
    }
}
