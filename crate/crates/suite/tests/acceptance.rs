#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use maserphase::error::Error;
use maserphase::phase_diagram::{separation_threshold, trace_lines, GridSpec, LineKind, TransitionOrder};
use maserphase::potential::{asymptotic_log_p, critical_phi, theta0_star};
use maserphase::saddle::{branch_crossing, thermal_crossing};
use maserphase::spectrum::{build_generator, correlation_length, spectral_gap_with, thermal_xi_approx, thermal_xi_linearized};
use maserphase::{stationary_distribution, twinkle_extrema, ModelParams};
use nalgebra::{DMatrix, DVector};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CROSS_TOL: f64 = 1e-10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn params(n: f64, a: f64, nb: f64, d: f64, th: f64) -> ModelParams {
    ModelParams::new(n, a, nb, d, th).unwrap()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn critical_ladder() -> Verdict {
    let p = params(100.0, 1.0, 0.15, 0.0, 1.0);
    let want = [6.66, 12.03, 17.41];
    let got: Vec<f64> = (0..3).map(|k| branch_crossing(&p, k, CROSS_TOL).unwrap()).collect();
    let pass = got.iter().zip(want).all(|(&g, w)| within(g, w, 0.02));
    verdict(pass, format!("theta01 = {:.5}, theta12 = {:.5}, theta23 = {:.5}", got[0], got[1], got[2]))
}

fn detuned_ladder() -> Verdict {
    let p = params(100.0, 1.0, 0.15, 0.5, 1.0);
    let t1 = thermal_crossing(&p, 1, CROSS_TOL).unwrap();
    let t2 = thermal_crossing(&p, 2, CROSS_TOL).unwrap();
    let t23 = branch_crossing(&p, 2, CROSS_TOL).unwrap();
    let k0 = branch_crossing(&p, 0, CROSS_TOL);
    let no_cross = matches!(k0, Err(Error::NoCrossing(_)));
    let pass = within(t1, 6.19, 0.02) && within(t2, 11.91, 0.02) && within(t23, 17.43, 0.02) && no_cross;
    verdict(
        pass,
        format!("theta_t1 = {t1:.5}, theta_t2 = {t2:.5}, theta23 = {t23:.5}, k = 0 no crossing: {no_cross}"),
    )
}

fn separation() -> Verdict {
    let d = separation_threshold(1.0, 0.15, 0, 1e-6).unwrap();
    verdict(within(d, 0.408, 0.005), format!("|delta| = {d:.5}"))
}

fn onset_values() -> Verdict {
    let t0 = theta0_star(&params(100.0, 1.0, 0.15, 0.0, 1.0)).unwrap();
    let t05 = theta0_star(&params(100.0, 1.0, 0.15, 0.5, 1.0)).unwrap();
    let phi1 = critical_phi(1);
    let pass = t0 == 1.0 && within(t05, PI / 3.0, 1e-9) && within(phi1, 4.493409, 1e-6);
    verdict(
        pass,
        format!("theta0*(0) = {t0:.17}, theta0*(0.5) - pi/3 = {:.3e}, phi1 = {phi1:.9}", t05 - PI / 3.0),
    )
}

/// Null vector of the dense generator with the normalization replacing one
/// balance equation.
fn dense_null_vector(l: &DMatrix<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut m = l.clone();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    m.lu().solve(&rhs).expect("nonsingular")
}

fn spectral_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7365);
    let mut worst_p = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut largest = 0;
    let mut failures = Vec::new();
    for draw in 0..50 {
        let p = params(
            rng.gen_range(1.0..=200.0),
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.01..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.0..=20.0),
        );
        let res = correlation_length(&p).unwrap();
        let n_max = res.n_max_used;
        largest = largest.max(n_max);
        if n_max > 2000 {
            failures.push(format!("draw {draw}: n_max = {n_max}"));
            continue;
        }
        let gen = build_generator(&p, n_max).unwrap();
        let fine = spectral_gap_with(&gen, 1e-13).unwrap();
        let l = gen.to_dense();
        let null = dense_null_vector(&l);
        let dist = stationary_distribution(&p, 1e-14).unwrap();
        let dp = null
            .iter()
            .enumerate()
            .map(|(n, v)| (v - dist.probs().get(n).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        let mut re: Vec<f64> = l.complex_eigenvalues().iter().map(|c| c.re).collect();
        re.sort_by(|a, b| a.total_cmp(b));
        let dg = (re[1] - fine.gap).abs();
        worst_p = worst_p.max(dp);
        worst_gap = worst_gap.max(dg);
        if !(dp < 1e-10) || !(dg < 1e-8) {
            failures.push(format!("draw {draw}: |dp| = {dp:.2e}, |dgap| = {dg:.2e}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "max |p - p_eq| = {worst_p:.2e}, max |gap - dense| = {worst_gap:.2e}, largest n_max = {largest}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn local_maxima(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    (1..ys.len() - 1)
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1])
        .map(|i| (xs[i], ys[i]))
        .collect()
}

fn correlation_peaks() -> Verdict {
    let base = params(100.0, 1.0, 0.15, 0.5, 1.0);
    let targets = [
        ("theta0*", theta0_star(&base).unwrap()),
        ("theta_t1", thermal_crossing(&base, 1, CROSS_TOL).unwrap()),
        ("theta_t2", thermal_crossing(&base, 2, CROSS_TOL).unwrap()),
        ("theta23", branch_crossing(&base, 2, CROSS_TOL).unwrap()),
    ];
    let thetas: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
    let fluxes = [25.0, 50.0, 75.0, 100.0, 125.0];
    let mut pass = true;
    let mut notes = Vec::new();
    let mut heights = vec![Vec::new(); targets.len()];
    for &n in &fluxes {
        let xi: Vec<f64> = thetas
            .par_iter()
            .map(|&th| correlation_length(&base.with_flux(n).with_pump(th)).unwrap().xi)
            .collect();
        let peaks = local_maxima(&thetas, &xi);
        for (t, &(name, c)) in targets.iter().enumerate() {
            let nearest = peaks.iter().min_by(|a, b| (a.0 - c).abs().total_cmp(&(b.0 - c).abs()));
            match nearest {
                Some(&(pt, h)) if (pt - c).abs() <= 0.1 => heights[t].push(h),
                Some(&(pt, _)) => {
                    pass = false;
                    notes.push(format!("N = {n}: {name} = {c:.3}, nearest peak {pt:.2}"));
                    heights[t].push(f64::NAN);
                }
                None => {
                    pass = false;
                    notes.push(format!("N = {n}: no peaks"));
                    heights[t].push(f64::NAN);
                }
            }
        }
    }
    for (t, h) in heights.iter().enumerate() {
        let rising = h.windows(2).all(|w| w[1] > w[0]);
        if !rising {
            pass = false;
            notes.push(format!("{} heights {:?}", targets[t].0, h.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()));
        }
    }
    verdict(pass, if notes.is_empty() { "all peaks within 0.1, heights rising".into() } else { notes.join("; ") })
}

fn thermal_correlation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7468_6572);
    let mut worst = 0.0f64;
    let mut worst_lin = 0.0f64;
    let mut misses = 0;
    let mut undefined = 0;
    let mut draws = 0;
    while draws < 20 {
        let p = params(
            100.0,
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.0..=10.0),
        );
        if p.theta_eff_sq() * p.inversion() > 0.5 {
            continue;
        }
        draws += 1;
        let xi = correlation_length(&p).unwrap().xi;
        let rel = match thermal_xi_approx(&p) {
            Ok(approx) => (xi / approx - 1.0).abs(),
            Err(_) => {
                undefined += 1;
                f64::INFINITY
            }
        };
        if rel.is_finite() {
            worst = worst.max(rel);
        }
        worst_lin = worst_lin.max((xi / thermal_xi_linearized(&p).unwrap() - 1.0).abs());
        if rel > 0.05 {
            misses += 1;
        }
    }
    verdict(
        misses == 0,
        format!(
            "{misses}/20 draws outside 5% of 1/(1+(a-b)theta_eff^2) ({undefined} with a nonpositive formula value), worst finite {:.1}%; worst vs 1/(1-(a-b)theta_eff^2) {:.1}%",
            100.0 * worst,
            100.0 * worst_lin
        ),
    )
}

fn critical_scaling() -> Verdict {
    let p = params(25.0, 1.0, 0.15, 0.0, 1.0);
    let x25 = correlation_length(&p).unwrap().xi;
    let x100 = correlation_length(&p.with_flux(100.0)).unwrap().xi;
    let r = x100 / x25;
    verdict(within(r, 2.0, 0.5), format!("xi(100) = {x100:.4}, xi(25) = {x25:.4}, ratio = {r:.4}"))
}

/// `a` values where the transition lines cross `θ = θ_cut`, with their order.
fn intercepts(theta_cut: f64) -> Vec<(f64, LineKind, TransitionOrder)> {
    let grid = GridSpec::new((theta_cut - 5.0, theta_cut), (0.45, 1.0), 41, 56);
    let diagram = trace_lines(0.0, 0.15, grid).unwrap();
    let mut out = Vec::new();
    for line in &diagram.lines {
        let pts = &line.points;
        let Some(i) = pts.iter().rposition(|p| p.0 <= theta_cut + 1e-12) else { continue };
        let a = if (pts[i].0 - theta_cut).abs() < 1e-9 || i + 1 == pts.len() {
            if (pts[i].0 - theta_cut).abs() > grid.theta_step() {
                continue;
            }
            pts[i].1
        } else {
            let (t0, a0) = pts[i];
            let (t1, a1) = pts[i + 1];
            a0 + (a1 - a0) * (theta_cut - t0) / (t1 - t0)
        };
        out.push((a, line.kind, line.order_labels[i]));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

fn order_parameter_plateaus() -> Verdict {
    let theta = 25.0;
    let lines = intercepts(theta);
    let first_order: Vec<f64> = lines
        .iter()
        .filter(|l| l.2 == TransitionOrder::First && l.0 > 0.5 && l.0 < 1.0)
        .map(|l| l.0)
        .collect();
    let step = 0.0005;
    let a_grid: Vec<f64> = (0..=1000).map(|i| 0.5 + i as f64 * step).collect();
    let mut pass = true;
    let mut notes = vec![format!(
        "intercepts {:?}",
        lines.iter().map(|l| (l.0 * 1e4).round() / 1e4).collect::<Vec<_>>()
    )];
    let mut slopes_by_n: Vec<Vec<(f64, f64)>> = Vec::new();
    for n in [100.0, 500.0, 1000.0] {
        let means: Vec<f64> = a_grid
            .par_iter()
            .map(|&a| stationary_distribution(&params(n, a, 0.15, 0.0, theta), 1e-12).unwrap().mean_x())
            .collect();
        let monotone = means.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        let mid: Vec<f64> = a_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let slope: Vec<f64> = means.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        let risers = local_maxima(&mid, &slope);
        let matched = risers.iter().all(|r| lines.iter().any(|l| (l.0 - r.0).abs() <= 0.01));
        if !monotone || !matched {
            pass = false;
        }
        notes.push(format!(
            "N = {n}: monotone {monotone}, risers {:?}",
            risers.iter().map(|r| ((r.0 * 1e4).round() / 1e4, (r.1 * 10.0).round() / 10.0)).collect::<Vec<_>>()
        ));
        slopes_by_n.push(risers);
    }
    let largest = slopes_by_n.last().unwrap();
    for &c in &first_order {
        if !largest.iter().any(|r| (r.0 - c).abs() <= 0.01) {
            pass = false;
            notes.push(format!("no riser at N = 1000 near a = {c:.4}"));
        }
    }
    for &c in &first_order {
        let heights: Vec<f64> = slopes_by_n
            .iter()
            .filter_map(|rs| rs.iter().find(|r| (r.0 - c).abs() <= 0.01).map(|r| r.1))
            .collect();
        if heights.windows(2).any(|w| w[1] <= w[0]) {
            pass = false;
            notes.push(format!("riser near {c:.4} does not sharpen: {heights:?}"));
        }
    }
    verdict(pass, notes.join("; "))
}

fn log_sup_distance(n: f64) -> f64 {
    let p = params(n, 1.0, 0.15, 0.0, 2.0);
    let dist = stationary_distribution(&p, 1e-12).unwrap();
    let grid: Vec<f64> = (0..=dist.n_max()).map(|i| i as f64 / n).collect();
    let asym = asymptotic_log_p(&p, 0, &grid, 1e-12).unwrap();
    dist.log_probs().iter().zip(&asym).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn large_n_asymptotics() -> Verdict {
    let d500 = log_sup_distance(500.0);
    let d1000 = log_sup_distance(1000.0);
    let r = d500 / d1000;
    verdict(within(r, 2.0, 0.6), format!("sup|dlog p| N=500: {d500:.3e}, N=1000: {d1000:.3e}, ratio {r:.3}"))
}

fn twinkling() -> Verdict {
    let p = params(200.0, 0.3, 0.15, 1.0, 1.0);
    let closed = twinkle_extrema(&p, 1).unwrap();
    let hi = stationary_distribution(&p.with_pump(PI / 2.0), 1e-12).unwrap().mean();
    let lo = stationary_distribution(&p.with_pump(PI), 1e-12).unwrap().mean();
    let pass = within(hi, closed.mean_max, 0.1 * closed.mean_max) && within(lo, closed.mean_min, 0.1 * closed.mean_min);
    verdict(
        pass,
        format!("<n>(pi/2) = {hi:.5} vs {:.5}, <n>(pi) = {lo:.5} vs {:.5}", closed.mean_max, closed.mean_min),
    )
}

fn property_suites() -> Verdict {
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let mut results = Vec::new();
    results.push(("normalization", runner.run(&common::model_params(), |p| common::normalization(&p)).map_err(|e| e.to_string())));
    results.push(("detailed balance", runner.run(&common::model_params(), |p| common::detailed_balance(&p)).map_err(|e| e.to_string())));
    results.push((
        "saddles vs n_b",
        runner.run(&common::saddle_params(), |c| common::saddles_ignore_thermal_photons(&c)).map_err(|e| e.to_string()),
    ));
    let forms = (0.05f64..=1.0, 0.01f64..1.0, -1.0f64..1.0, 0.1f64..15.0, 0.0f64..1.2);
    results.push((
        "x and phi forms",
        runner
            .run(&forms, |(a, nb, d, th, x)| common::potential_forms_agree(&params(50.0, a, nb, d, th), x))
            .map_err(|e| e.to_string()),
    ));
    let mut small = TestRunner::new(Config { cases: 4, failure_persistence: None, ..Config::default() });
    results.push((
        "thread independence",
        small
            .run(&(0.0f64..0.7, 0.0f64..0.5), |(d, nb)| common::diagram_is_thread_independent(d, nb))
            .map_err(|e| e.to_string()),
    ));
    let failed: Vec<String> = results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() { format!("{} suites green", results.len()) } else { failed.join("; ") },
    )
}

fn main() {
    let criteria: [(u32, Option<Duration>, fn() -> Verdict); 12] = [
        (1, Some(Duration::from_secs(10)), critical_ladder),
        (2, Some(Duration::from_secs(10)), detuned_ladder),
        (3, Some(Duration::from_secs(30)), separation),
        (4, None, onset_values),
        (5, Some(Duration::from_secs(120)), spectral_equivalence),
        (6, Some(Duration::from_secs(300)), correlation_peaks),
        (7, None, thermal_correlation),
        (8, None, critical_scaling),
        (9, None, order_parameter_plateaus),
        (10, None, large_n_asymptotics),
        (11, None, twinkling),
        (12, None, property_suites),
    ];
    let mut failed = Vec::new();
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let mut v = check();
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            if elapsed > b {
                v.pass = false;
                v.detail.push_str(&format!("; over the {} s budget", b.as_secs()));
            }
        }
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag} ({:.2} s) {}", elapsed.as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
