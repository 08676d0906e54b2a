//! End-to-end exhaustion on a small schedule: stage monotonicity, Cauchy
//! contraction, decay of the final field, and the localized scaling
//! diagnostics, all on one shared lattice spacing.

use fracgreen_core::fundamental::{
    run_exhaustion, scaling_diagnostics, value_on_shared_node, DecayFitParams,
    ExhaustionSchedule, ScalingParams,
};
use fracgreen_core::kernel::{FractionalOrder, Kernel, Potential};
use fracgreen_core::solve::SolveConfig;

fn schedule() -> ExhaustionSchedule<f64> {
    ExhaustionSchedule {
        radii: vec![0.5, 1.0, 2.0],
        scales: vec![4.0, 4.0, 4.0],
        h: 1.0 / 16.0,
    }
}

#[test]
fn three_stage_exhaustion_contracts_and_decays() {
    let order = FractionalOrder::new(2, 0.5).unwrap();
    let kernel = Kernel::pure_fractional(order).unwrap();
    let solver = SolveConfig {
        cg_tolerance: 1e-11,
        ..SolveConfig::default()
    };
    let fit = DecayFitParams {
        r_lo: 0.4,
        r_hi: 1.0,
        n_shells: 6,
    };
    let report = run_exhaustion(&kernel, &Potential::zero(), &schedule(), &solver, &fit).unwrap();

    assert_eq!(report.stages.len(), 3);
    assert_eq!(report.cauchy_gaps.len(), 2);
    assert!(
        report.cauchy_gaps[1] < report.cauchy_gaps[0],
        "gaps should contract: {:?}",
        report.cauchy_gaps
    );

    // Stagewise monotonicity on the smallest ball.
    let base = report.stage_fields[0].grid().clone();
    let scale = report.final_field.max_value();
    for pair in report.stage_fields.windows(2) {
        for a in 0..base.n_active() {
            let lo = value_on_shared_node(&pair[0], &base, a);
            let hi = value_on_shared_node(&pair[1], &base, a);
            assert!(
                hi >= lo - 1e-8 * scale,
                "stage growth violated at node {a}: {lo} vs {hi}"
            );
        }
    }

    // The free-space decay exponent is −(n−2s) = −1. Truncating the
    // domain at a_max = 2 steepens the window [0.4, 1.0]; the run is
    // deterministic and measures −1.3272.
    let slope = report.decay_fit.slope;
    assert!(
        (-1.45..=-1.2).contains(&slope),
        "decay slope {slope} left the frozen band around -1.327"
    );
    assert!(
        report.decay_fit.r_squared > 0.99,
        "decay fit r² {} too low",
        report.decay_fit.r_squared
    );
    assert!(report.pointwise_bound_constant > 0.0);

    // Every stage keeps positivity and unit data mass.
    for st in &report.stages {
        assert!(st.min_value >= -1e-8 * scale);
        assert!(st.mollifier_mass_defect < 0.01);
    }
}

#[test]
fn scaling_diagnostics_of_final_field_follow_integrable_envelopes() {
    let order = FractionalOrder::new(2, 0.5).unwrap();
    let kernel = Kernel::pure_fractional(order).unwrap();
    let solver = SolveConfig::default();
    let fit = DecayFitParams {
        r_lo: 0.8,
        r_hi: 1.6,
        n_shells: 6,
    };
    let report = run_exhaustion(&kernel, &Potential::zero(), &schedule(), &solver, &fit).unwrap();
    let u = &report.final_field;
    let v = vec![1.0; u.grid().n_active()];
    let params = ScalingParams {
        p: 1.0,
        gamma: 0.25,
        radii: vec![0.25, 0.5, 1.0],
        centers: vec![[0.0, 0.0, 0.0]],
        mollifier_scale: 4.0,
    };
    let diag = scaling_diagnostics(u, &v, &order, &params).unwrap();
    assert_eq!(diag.rows.len(), 3);
    // L¹ mass of a field with a |x|^{2s−n} core grows like r^{2s} = r.
    let l1 = diag.fits.iter().find(|f| f.column == "l1_v").unwrap();
    assert!(
        (l1.exponent - 1.0).abs() < 0.45,
        "L¹ envelope exponent {} far from 2s = 1",
        l1.exponent
    );
    // Radial L^p masses grow with the ball radius.
    for w in diag.rows.windows(2) {
        assert!(w[1].lp > w[0].lp);
        assert!(w[1].wgamma >= w[0].wgamma);
    }
}
