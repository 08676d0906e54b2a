//! Construction of the fundamental solution by exhaustion: solve the
//! weak problem on a growing family of balls with mollified point data,
//! track the Cauchy gaps between consecutive stages on the smallest
//! ball, and measure the decay of the final field.
//!
//! All stages share one lattice spacing h and one pair cutoff (four
//! times the largest radius), so the assembled operators agree exactly
//! on common nodes and the zero-extended stage-k solution is a discrete
//! subsolution of stage k+1; the stage fields then increase monotonically
//! up to solver tolerance, mirroring the continuum construction.

use std::sync::Arc;

use serde::Serialize;

use crate::grid::{DiscreteField, Grid};
use crate::kernel::{FractionalOrder, Kernel, Potential, PotentialKind};
use crate::op::{AssembledOperator, AssemblyParams, BackendChoice};
use crate::quad::integrate_adaptive;
use crate::solve::{weak_solve, SolveConfig};
use crate::variational::{self, NormReport};
use crate::{Error, Result, Scalar};

/// Smooth bump f(x) = exp(−1/(1−|x|²))/Z on the unit ball, rescaled to
/// f_l(x) = lⁿ f(l x): unit mass concentrated on B_{1/l}.
#[derive(Debug, Clone)]
pub struct Mollifier<S: Scalar> {
    n: usize,
    scale: S,
    norm_z: S,
}

impl<S: Scalar> Mollifier<S> {
    /// Builds the mollifier of scale l in dimension n; the normalizer Z
    /// is computed by radial quadrature of the defining bump.
    pub fn new(n: usize, scale: S) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::Config(format!("dimension n must be 2 or 3, got {n}")));
        }
        if !(scale > S::zero() && scale.is_finite()) {
            return Err(Error::Config(format!(
                "mollifier scale must be positive and finite, got {scale}"
            )));
        }
        let omega = match n {
            2 => S::c(2.0) * S::PI(),
            _ => S::c(4.0) * S::PI(),
        };
        let mut f = |r: S| {
            let t = S::one() - r * r;
            if t <= S::zero() {
                return S::zero();
            }
            (-t.recip()).exp() * r.powi(n as i32 - 1)
        };
        let (radial, _) = integrate_adaptive(&mut f, S::zero(), S::one(), S::c(1e-12), 40)?;
        Ok(Self {
            n,
            scale,
            norm_z: omega * radial,
        })
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    /// f_l(x); zero outside B_{1/l}.
    pub fn eval(&self, x: &[S; 3]) -> S {
        let l = self.scale;
        let r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * l * l;
        let t = S::one() - r2;
        if t <= S::zero() {
            return S::zero();
        }
        l.powi(self.n as i32) * (-t.recip()).exp() / self.norm_z
    }

    /// Samples onto a grid and renormalizes so the lattice mass hⁿΣf is
    /// exactly 1. Returns the field and the raw (pre-renormalization)
    /// lattice mass, which sits within 1% of 1 whenever the resolution
    /// precondition h ≤ 1/(4l) holds.
    pub fn sample_with_mass(&self, grid: Arc<Grid<S>>) -> Result<(DiscreteField<S>, S)> {
        if grid.n() != self.n {
            return Err(Error::Precondition(format!(
                "mollifier dimension {} does not match grid dimension {}",
                self.n,
                grid.n()
            )));
        }
        if grid.h() * self.scale > S::c(0.25) {
            return Err(Error::Precondition(format!(
                "mollifier of scale {} needs h <= 1/(4l), got h = {}",
                self.scale,
                grid.h()
            )));
        }
        if self.scale.recip() > grid.r_ball() {
            return Err(Error::Precondition(format!(
                "mollifier support radius {} exceeds the ball radius {}",
                self.scale.recip(),
                grid.r_ball()
            )));
        }
        let mut field = DiscreteField::from_fn(grid, |x| self.eval(x));
        let raw_mass = field.mass();
        if !(raw_mass > S::zero()) {
            return Err(Error::DegenerateField {
                floor: raw_mass.to_f64().unwrap_or(0.0),
            });
        }
        let factor = raw_mass.recip();
        for v in field.values_mut() {
            *v = *v * factor;
        }
        Ok((field, raw_mass))
    }

    /// Samples onto a grid with exact unit lattice mass.
    pub fn sample(&self, grid: Arc<Grid<S>>) -> Result<DiscreteField<S>> {
        Ok(self.sample_with_mass(grid)?.0)
    }
}

/// Radii, mollifier scales, and the shared lattice spacing of an
/// exhaustion run.
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionSchedule<S: Scalar> {
    /// Ball radii a₁ < a₂ < …; one solve per radius.
    pub radii: Vec<S>,
    /// Mollifier scale per stage (same length as `radii`).
    pub scales: Vec<S>,
    /// Lattice spacing shared by all stages; every 2a/h must be an even
    /// integer so the stage lattices coincide on common nodes.
    pub h: S,
}

impl<S: Scalar> ExhaustionSchedule<S> {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::Config("exhaustion needs at least one radius".into()));
        }
        if self.scales.len() != self.radii.len() {
            return Err(Error::Config(format!(
                "{} radii but {} mollifier scales",
                self.radii.len(),
                self.scales.len()
            )));
        }
        if !(self.h > S::zero()) {
            return Err(Error::Config(format!(
                "lattice spacing must be positive, got {}",
                self.h
            )));
        }
        let mut prev = S::zero();
        for (&a, &l) in self.radii.iter().zip(&self.scales) {
            if !(a > prev) {
                return Err(Error::Config(format!(
                    "radii must be positive and strictly increasing, got {a} after {prev}"
                )));
            }
            prev = a;
            if !(l > S::zero()) {
                return Err(Error::Config(format!(
                    "mollifier scales must be positive, got {l}"
                )));
            }
            let steps = S::c(2.0) * a / self.h;
            let rounded = steps.round();
            if (steps - rounded).abs() > S::c(1e-9) * steps.max(S::one()) {
                return Err(Error::Config(format!(
                    "2a/h must be an integer for radius {a}, got {steps}"
                )));
            }
            let side = rounded.to_f64().unwrap() as usize;
            if !side.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "2a/h must be even so stage lattices align, got {side} for radius {a}"
                )));
            }
        }
        Ok(())
    }

    /// Lattice side of stage k.
    pub fn n_side(&self, k: usize) -> usize {
        let steps = S::c(2.0) * self.radii[k] / self.h;
        steps.round().to_f64().unwrap() as usize
    }
}

/// Decay-fit window and shell count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFitParams<S: Scalar> {
    pub r_lo: S,
    pub r_hi: S,
    pub n_shells: usize,
}

/// Log-log least-squares fit of shell-averaged field values.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit<S: Scalar> {
    /// Fitted exponent of u ~ C·r^slope.
    pub slope: S,
    /// ln C.
    pub intercept: S,
    pub r_squared: S,
    /// Shell points that survived merging, as (geometric radius,
    /// geometric mean value, node count).
    pub shells: Vec<(S, S, usize)>,
}

/// Minimum nodes per shell before it is merged with the next one.
const MIN_SHELL_NODES: usize = 8;

/// Relative floor under which field values are treated as numerically
/// zero when fitting decay.
const DECAY_VALUE_FLOOR: f64 = 1e-14;

/// Fits ln(shell geometric mean of u) against ln(shell geometric radius)
/// over equal-width radial shells in [r_lo, r_hi]. Nonpositive values
/// are excluded; shells with fewer than [`MIN_SHELL_NODES`] usable nodes
/// merge into the next shell. A field with no values above the floor
/// yields [`Error::DegenerateField`]; a constant field fits slope 0 with
/// r² defined as 1.
pub fn fit_decay<S: Scalar>(
    u: &DiscreteField<S>,
    params: &DecayFitParams<S>,
) -> Result<DecayFit<S>> {
    if !(params.r_lo > S::zero() && params.r_hi > params.r_lo) {
        return Err(Error::Precondition(format!(
            "decay window must satisfy 0 < r_lo < r_hi, got [{}, {}]",
            params.r_lo, params.r_hi
        )));
    }
    if params.n_shells < 2 {
        return Err(Error::Precondition(format!(
            "decay fit needs at least 2 shells, got {}",
            params.n_shells
        )));
    }
    let grid = u.grid();
    let floor = S::c(DECAY_VALUE_FLOOR) * u.max_value().max(S::zero());
    let width = (params.r_hi - params.r_lo) / S::from_count(params.n_shells);
    // Per shell: usable node count and sums of ln r, ln u.
    let mut bins = vec![(0usize, S::zero(), S::zero()); params.n_shells];
    let mut any_above_floor = false;
    for a in 0..grid.n_active() {
        let r = grid.active_radius(a);
        if r < params.r_lo || r >= params.r_hi {
            continue;
        }
        let v = u.at(a);
        if v > floor {
            any_above_floor = true;
        }
        if v <= floor || v <= S::zero() {
            continue;
        }
        let shell = ((r - params.r_lo) / width)
            .floor()
            .to_f64()
            .unwrap() as usize;
        let shell = shell.min(params.n_shells - 1);
        let (c, slr, slu) = bins[shell];
        bins[shell] = (c + 1, slr + r.ln(), slu + v.ln());
    }
    if !any_above_floor {
        return Err(Error::DegenerateField {
            floor: floor.to_f64().unwrap_or(0.0),
        });
    }
    // Merge small shells forward; a small trailing remainder merges into
    // the last accepted shell.
    let mut merged: Vec<(usize, S, S)> = Vec::new();
    let mut acc = (0usize, S::zero(), S::zero());
    for (c, slr, slu) in bins {
        acc = (acc.0 + c, acc.1 + slr, acc.2 + slu);
        if acc.0 >= MIN_SHELL_NODES {
            merged.push(acc);
            acc = (0, S::zero(), S::zero());
        }
    }
    if acc.0 > 0 {
        if let Some(last) = merged.last_mut() {
            last.0 += acc.0;
            last.1 = last.1 + acc.1;
            last.2 = last.2 + acc.2;
        }
    }
    if merged.len() < 2 {
        return Err(Error::Domain(format!(
            "decay window produced {} usable shells, need at least 2",
            merged.len()
        )));
    }
    let pts: Vec<(S, S, usize)> = merged
        .iter()
        .map(|&(c, slr, slu)| {
            let cf = S::from_count(c);
            ((slr / cf).exp(), (slu / cf).exp(), c)
        })
        .collect();
    // Unweighted least squares on (ln r_g, ln u_g).
    let m = S::from_count(pts.len());
    let sx: S = pts.iter().map(|p| p.0.ln()).sum();
    let sy: S = pts.iter().map(|p| p.1.ln()).sum();
    let (mx, my) = (sx / m, sy / m);
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    let mut syy = S::zero();
    for p in &pts {
        let dx = p.0.ln() - mx;
        let dy = p.1.ln() - my;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == S::zero() {
        return Err(Error::Domain(
            "all shells collapsed to one radius; cannot fit a slope".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // A constant field leaves syy at pure rounding level (shell means of
    // identical logs differ by summation order only); r² is 1 by
    // definition there rather than a ratio of noise terms.
    let y_rounding = S::epsilon() * (S::one() + my.abs());
    let r_squared = if syy <= m * y_rounding * y_rounding * S::c(1e8) {
        S::one()
    } else {
        let ss_res = syy - sxy * sxy / sxx;
        S::one() - ss_res / syy
    };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        shells: pts,
    })
}

/// Pointwise decay constant sup u(x)·|x|^{n−2s} over nodes beyond the
/// mollifier near field and the lattice resolution,
/// |x| ≥ max(3/l, 2h√n). Returns 0 when no node qualifies.
pub fn pointwise_decay_constant<S: Scalar>(
    u: &DiscreteField<S>,
    order: &FractionalOrder<S>,
    mollifier_scale: S,
) -> S {
    let grid = u.grid();
    let thr = (S::c(3.0) / mollifier_scale)
        .max(S::c(2.0) * grid.h() * S::from_count(grid.n()).sqrt());
    let expo = order.decay_exponent();
    let mut sup = S::zero();
    for a in 0..grid.n_active() {
        let r = grid.active_radius(a);
        if r < thr {
            continue;
        }
        sup = sup.max(u.at(a) * r.powf(expo));
    }
    sup
}

/// Scalars recorded for one exhaustion stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport<S: Scalar> {
    pub radius: S,
    pub mollifier_scale: S,
    pub n_side: usize,
    pub n_active: usize,
    pub iterations: usize,
    pub final_residual: S,
    /// Minimum of the stage solution; the maximum principle keeps it at
    /// solver-tolerance level above zero.
    pub min_value: S,
    /// |hⁿΣ f_l − 1| before renormalization.
    pub mollifier_mass_defect: S,
    /// sup u·|x|^{n−2s} beyond the near field at this stage.
    pub pointwise_constant: S,
    pub norms: NormReport<S>,
}

/// Output of an exhaustion run.
#[derive(Debug, Clone)]
pub struct FundamentalReport<S: Scalar> {
    pub stages: Vec<StageReport<S>>,
    /// L¹ gaps on the smallest ball between consecutive stage solutions.
    pub cauchy_gaps: Vec<S>,
    pub decay_fit: DecayFit<S>,
    /// Pointwise decay constant of the final stage.
    pub pointwise_bound_constant: S,
    pub final_field: DiscreteField<S>,
    /// All stage solutions, for monotonicity and ordering diagnostics.
    pub stage_fields: Vec<DiscreteField<S>>,
}

/// Exhaustion failure carrying the failing stage and everything that
/// completed before it.
#[derive(Debug, thiserror::Error)]
#[error("exhaustion stage {stage} failed: {error}")]
pub struct ExhaustionFailure<S: Scalar> {
    pub stage: usize,
    #[source]
    pub error: Error,
    pub partial_stages: Vec<StageReport<S>>,
}

/// Runs the exhaustion: one weak solve per radius with the shared
/// spacing and shared pair cutoff 4·a_max, then the Cauchy gaps on the
/// smallest ball and the decay fit of the final field.
pub fn run_exhaustion<S: Scalar>(
    kernel: &Kernel<S>,
    potential: &Potential<S>,
    schedule: &ExhaustionSchedule<S>,
    solver: &SolveConfig<S>,
    fit: &DecayFitParams<S>,
) -> std::result::Result<FundamentalReport<S>, ExhaustionFailure<S>> {
    let fail = |stage: usize, error: Error, partial: &[StageReport<S>]| ExhaustionFailure {
        stage,
        error,
        partial_stages: partial.to_vec(),
    };
    if let Err(e) = schedule.validate() {
        return Err(fail(0, e, &[]));
    }
    if matches!(potential.kind(), PotentialKind::Tabulated { .. }) {
        return Err(fail(
            0,
            Error::Config(
                "tabulated potentials are grid-bound and cannot follow an exhaustion".into(),
            ),
            &[],
        ));
    }
    let n = kernel.order().n();
    let a_max = *schedule.radii.last().expect("validated nonempty");
    let params = AssemblyParams {
        cutoff_factor: S::c(4.0),
        pair_cutoff: Some(S::c(4.0) * a_max),
        backend: BackendChoice::Auto,
    };
    let mut stages: Vec<StageReport<S>> = Vec::new();
    let mut fields: Vec<DiscreteField<S>> = Vec::new();
    for (k, (&a, &l)) in schedule.radii.iter().zip(&schedule.scales).enumerate() {
        let step = |e: Error, st: &[StageReport<S>]| fail(k, e, st);
        let grid = Grid::build(n, a, schedule.n_side(k)).map_err(|e| step(e, &stages))?;
        let mollifier = Mollifier::new(n, l).map_err(|e| step(e, &stages))?;
        let (f, raw_mass) = mollifier
            .sample_with_mass(grid.clone())
            .map_err(|e| step(e, &stages))?;
        let op = AssembledOperator::assemble(kernel.clone(), potential.clone(), grid, &params)
            .map_err(|e| step(e, &stages))?;
        let report = weak_solve(&op, &f, solver).map_err(|e| step(e, &stages))?;
        let u = report.solution;
        stages.push(StageReport {
            radius: a,
            mollifier_scale: l,
            n_side: schedule.n_side(k),
            n_active: u.grid().n_active(),
            iterations: report.iterations,
            final_residual: report.final_residual,
            min_value: u.min_value(),
            mollifier_mass_defect: (raw_mass - S::one()).abs(),
            pointwise_constant: pointwise_decay_constant(&u, kernel.order(), l),
            norms: report.norm_report,
        });
        fields.push(u);
    }
    let base_grid = fields[0].grid().clone();
    let mut cauchy_gaps = Vec::new();
    for w in fields.windows(2) {
        let mut acc = S::zero();
        for a in 0..base_grid.n_active() {
            let va = value_on_shared_node(&w[0], &base_grid, a);
            let vb = value_on_shared_node(&w[1], &base_grid, a);
            acc = acc + (va - vb).abs();
        }
        let hn = base_grid.h().powi(n as i32);
        cauchy_gaps.push(hn * acc);
    }
    let last = fields.last().expect("at least one stage");
    let decay_fit =
        fit_decay(last, fit).map_err(|e| fail(stages.len() - 1, e, &stages))?;
    let pointwise_bound_constant = stages.last().expect("nonempty").pointwise_constant;
    Ok(FundamentalReport {
        stages,
        cauchy_gaps,
        decay_fit,
        pointwise_bound_constant,
        final_field: last.clone(),
        stage_fields: fields,
    })
}

/// Value of a (larger-grid) stage field at the a-th active node of a
/// smaller aligned grid. Both lattices share the spacing and the parity
/// of their side counts, so the node is reconstructed exactly in integer
/// arithmetic.
pub fn value_on_shared_node<S: Scalar>(
    big: &DiscreteField<S>,
    small: &Grid<S>,
    a: usize,
) -> S {
    let bg = big.grid();
    debug_assert_eq!(bg.n(), small.n());
    let small_idx = small.lattice_coords(small.active()[a] as usize);
    let ns = small.n_side() as i64;
    let nb = bg.n_side() as i64;
    let mut big_idx = [0usize; 3];
    for d in 0..small.n() {
        // Doubled offset from the lattice center is parity-stable.
        let m = 2 * small_idx[d] as i64 - (ns - 1);
        let i = (m + nb - 1) / 2;
        debug_assert_eq!(2 * i - (nb - 1), m, "stage lattices misaligned");
        big_idx[d] = i as usize;
    }
    big.at_flat(bg.flat_index(&big_idx))
}

/// Parameters of the localized scaling diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingParams<S: Scalar> {
    /// L^p exponent; must satisfy 1 ≤ p < n/(n−2s).
    pub p: S,
    /// Seminorm order γ ∈ (0, s).
    pub gamma: S,
    /// Ball radii per center.
    pub radii: Vec<S>,
    /// Ball centers.
    pub centers: Vec<[S; 3]>,
    /// Mollifier scale of the field under test (sets the pointwise
    /// near-field threshold).
    pub mollifier_scale: S,
}

/// One (center, radius) row of the scaling diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow<S: Scalar> {
    pub center: [S; 3],
    pub radius: S,
    /// ‖u‖_{L^p(B_r(c))}.
    pub lp: S,
    /// ∫_{B_r(c)} V·|u|.
    pub l1_v: S,
    /// [u]_{W^{γ,p}(B_r(c))}.
    pub wgamma: S,
    /// sup u·|x|^{n−2s} over far nodes inside the ball.
    pub pointwise: S,
}

/// Least-squares envelope y ≈ amplitude · r^exponent for one column.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit<S: Scalar> {
    pub column: String,
    pub exponent: S,
    pub amplitude: S,
    pub r_squared: S,
}

/// Full scaling diagnostics: one row per (center, radius) and one
/// envelope fit per column.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingDiagnostics<S: Scalar> {
    pub rows: Vec<ScalingRow<S>>,
    pub fits: Vec<EnvelopeFit<S>>,
}

/// Measures the localized integrability and regularity of a field on a
/// family of balls: L^p mass, potential-weighted L¹ mass, the W^{γ,p}
/// seminorm, and the far-field pointwise decay constant, followed by
/// log-log envelope fits of each column against the radius.
pub fn scaling_diagnostics<S: Scalar>(
    u: &DiscreteField<S>,
    v_samples: &[S],
    order: &FractionalOrder<S>,
    params: &ScalingParams<S>,
) -> Result<ScalingDiagnostics<S>> {
    let grid = u.grid();
    if v_samples.len() != grid.n_active() {
        return Err(Error::Precondition(format!(
            "potential sample length {} does not match {} active nodes",
            v_samples.len(),
            grid.n_active()
        )));
    }
    let nf = S::from_count(order.n());
    let p_max = nf / (nf - order.two_s());
    if !(params.p >= S::one() && params.p < p_max) {
        return Err(Error::Precondition(format!(
            "integrability exponent p must lie in [1, {p_max}), got {}",
            params.p
        )));
    }
    if params.radii.is_empty() || params.centers.is_empty() {
        return Err(Error::Precondition(
            "scaling diagnostics need at least one center and one radius".into(),
        ));
    }
    let hn = grid.h().powi(grid.n() as i32);
    let far_thr = (S::c(3.0) / params.mollifier_scale)
        .max(S::c(2.0) * grid.h() * S::from_count(grid.n()).sqrt());
    let expo = order.decay_exponent();
    let mut rows = Vec::new();
    for center in &params.centers {
        for &radius in &params.radii {
            let mut lp_acc = S::zero();
            let mut l1v_acc = S::zero();
            let mut pointwise = S::zero();
            for (a, &va) in v_samples.iter().enumerate() {
                let x = grid.active_coords(a);
                let mut d2 = S::zero();
                for d in 0..grid.n() {
                    let dd = x[d] - center[d];
                    d2 = d2 + dd * dd;
                }
                if d2 >= radius * radius {
                    continue;
                }
                let v = u.at(a);
                lp_acc = lp_acc + v.abs().powf(params.p);
                l1v_acc = l1v_acc + va * v.abs();
                let r_origin = grid.active_radius(a);
                if r_origin >= far_thr {
                    pointwise = pointwise.max(v * r_origin.powf(expo));
                }
            }
            let wgamma = variational::wgamma_p_seminorm(
                u, order, params.gamma, params.p, center, radius,
            )?;
            rows.push(ScalingRow {
                center: *center,
                radius,
                lp: (hn * lp_acc).powf(params.p.recip()),
                l1_v: hn * l1v_acc,
                wgamma,
                pointwise,
            });
        }
    }
    let mut fits = Vec::new();
    for (name, pick) in [
        ("lp", 0usize),
        ("l1_v", 1),
        ("wgamma", 2),
        ("pointwise", 3),
    ] {
        let pts: Vec<(S, S)> = rows
            .iter()
            .map(|r| {
                let y = match pick {
                    0 => r.lp,
                    1 => r.l1_v,
                    2 => r.wgamma,
                    _ => r.pointwise,
                };
                (r.radius, y)
            })
            .filter(|&(_, y)| y > S::zero())
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let m = S::from_count(pts.len());
        let mx: S = pts.iter().map(|p| p.0.ln()).sum::<S>() / m;
        let my: S = pts.iter().map(|p| p.1.ln()).sum::<S>() / m;
        let mut sxx = S::zero();
        let mut sxy = S::zero();
        let mut syy = S::zero();
        for &(r, y) in &pts {
            let dx = r.ln() - mx;
            let dy = y.ln() - my;
            sxx = sxx + dx * dx;
            sxy = sxy + dx * dy;
            syy = syy + dy * dy;
        }
        if sxx == S::zero() {
            continue;
        }
        let exponent = sxy / sxx;
        let r_squared = if syy == S::zero() {
            S::one()
        } else {
            S::one() - (syy - sxy * sxy / sxx) / syy
        };
        fits.push(EnvelopeFit {
            column: name.to_string(),
            exponent,
            amplitude: (my - exponent * mx).exp(),
            r_squared,
        });
    }
    Ok(ScalingDiagnostics { rows, fits })
}
