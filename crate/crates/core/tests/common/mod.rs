#![allow(dead_code)]

use maserphase::phase_diagram::{trace_lines, GridSpec};
use maserphase::potential::{v0, v0_phi};
use maserphase::saddle::{SaddleBranch, SubBranch};
use maserphase::{stationary_distribution, ModelParams};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Outcome = Result<(), TestCaseError>;

pub fn model_params() -> impl Strategy<Value = ModelParams> {
    (1.0f64..300.0, 0.0f64..=1.0, 0.0f64..2.0, -1.0f64..1.0, 0.0f64..20.0)
        .prop_map(|(n, a, nb, d, th)| ModelParams::new(n, a, nb, d, th).unwrap())
}

/// Parameters with at least one saddle branch and a pump on the `k`-th
/// branch image, plus the branch index.
pub fn saddle_params() -> impl Strategy<Value = (ModelParams, usize, f64)> {
    (0.55f64..=1.0, 0.0f64..0.9, 0usize..4, 0.05f64..0.95).prop_map(|(a, dfrac, k, s)| {
        let ab = 2.0 * a - 1.0;
        let d = (dfrac * ab).sqrt();
        let p = ModelParams::new(100.0, a, 0.15, d, 1.0).unwrap();
        (p, k, s)
    })
}

pub fn normalization(p: &ModelParams) -> Outcome {
    let dist = stationary_distribution(p, 1e-12).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let probs = dist.probs();
    let total: f64 = probs.iter().sum();
    prop_assert!((total - 1.0).abs() <= 1e-12, "sum = {total}");
    prop_assert!(probs.iter().all(|&v| v >= 0.0 && v.is_finite()));
    Ok(())
}

pub fn detailed_balance(p: &ModelParams) -> Outcome {
    let dist = stationary_distribution(p, 1e-12).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let lp = dist.log_probs();
    let (n_f, a, nb) = (p.flux, p.excitation, p.thermal_photons);
    let b = p.ground();
    for n in 1..lp.len() {
        let num = nb * n as f64 + n_f * a * p.q(n as f64 / n_f);
        let den = (1.0 + nb) * n as f64 + n_f * b * p.q(n as f64 / n_f);
        if !(num > 0.0) || lp[n - 1] < -600.0 || lp[n] < -600.0 {
            continue;
        }
        let want = (num / den).ln();
        let got = lp[n] - lp[n - 1];
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "n = {n}: {got} vs {want}");
    }
    Ok(())
}

pub fn saddles_ignore_thermal_photons((p, k, s): &(ModelParams, usize, f64)) -> Outcome {
    let branch = SaddleBranch::new(p, *k, SubBranch::Minimum).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (lo, hi) = branch.theta_range();
    let hi = hi.min(lo + 10.0);
    let theta = lo + s * (hi - lo);
    let x_ref = branch.phi_for_theta(theta).map(|phi| branch.x_at(phi)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for nb in [0.0, 0.5, 3.0] {
        let q = p.with_thermal_photons(nb);
        let br = SaddleBranch::new(&q, *k, SubBranch::Minimum).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let x = br.phi_for_theta(theta).map(|phi| br.x_at(phi)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!((x - x_ref).abs() <= 1e-12, "n_b = {nb}: {x} vs {x_ref}");
    }
    Ok(())
}

pub fn potential_forms_agree(p: &ModelParams, x: f64) -> Outcome {
    let tol = 1e-10;
    let vx = v0(x, p, tol).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let phi = p.pump * (x + p.detuning * p.detuning).sqrt();
    let vp = v0_phi(phi, p, tol).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!((vx - vp).abs() <= 2.0 * tol * (1.0 + vx.abs()), "x = {x}: {vx} vs {vp}");
    Ok(())
}

pub fn diagram_is_thread_independent(delta: f64, n_b: f64) -> Outcome {
    let grid = GridSpec::new((0.5, 14.0), (0.3, 1.0), 32, 32);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| trace_lines(delta, n_b, grid))
    };
    let one = run(1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let many = run(4).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(one, many);
    Ok(())
}
