//! Dispatch of a [`RunConfig`] to the library and assembly of the table.

use std::f64::consts::PI;
use std::time::Instant;

use maserphase::distribution::{stationary_distribution_with, DistributionOptions};
use maserphase::phase_diagram::{trace_lines, GridSpec};
use maserphase::potential::{asymptotic_log_p, v0};
use maserphase::saddle::CriticalSet;
use maserphase::spectrum::{build_generator, correlation_length_with, photon_autocorrelation, spectral_gap_with};
use maserphase::{stationary_distribution, twinkle_extrema, ModelParams};
use rayon::prelude::*;

use crate::config::{Command, ParamSpec, RunConfig};
use crate::output::{col, Cell, Column, Metadata, OutputTable};
use crate::CliError;

/// Highest branch index reported by `branches`.
pub const BRANCH_K_MAX: usize = 4;

type PointRows = maserphase::Result<Vec<Vec<Cell>>>;

const PARAM_NAMES: [&str; 5] = ["N", "a", "nb", "delta", "theta"];

fn param_mask(cmd: Command) -> [bool; 5] {
    match cmd {
        Command::Branches => [false, true, true, true, false],
        Command::Twinkle => [true, true, true, true, false],
        _ => [true; 5],
    }
}

fn model(pt: &[f64; 5]) -> maserphase::Result<ModelParams> {
    ModelParams::new(pt[0], pt[1], pt[2], pt[3], pt[4])
}

pub fn run(cfg: &RunConfig) -> Result<OutputTable, CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs {}: {e}", cfg.jobs)))?;
    let (columns, rows) = pool.install(|| match cfg.command {
        Command::Distribution if !cfg.is_sweep() => distribution_table(cfg),
        Command::PhaseDiagram => phase_diagram(cfg),
        _ => per_point(cfg),
    })?;
    Ok(OutputTable {
        columns,
        rows,
        metadata: Metadata {
            program: "maserphase".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

fn dist_options(cfg: &RunConfig) -> DistributionOptions {
    let mut opts = DistributionOptions { tol: cfg.tol, ..Default::default() };
    if let Some(cap) = cfg.n_max {
        opts.hard_cap = cap;
    }
    opts
}

fn distribution_table(cfg: &RunConfig) -> Result<(Vec<Column>, Vec<Vec<Cell>>), CliError> {
    let pt = cfg.points()[0];
    let dist = stationary_distribution_with(&model(&pt)?, &dist_options(cfg))?;
    let rows = dist
        .probs()
        .iter()
        .zip(dist.log_probs())
        .enumerate()
        .map(|(n, (&p, &lp))| vec![Cell::Int(n as i64), Cell::Num(p), if lp.is_finite() { Cell::Num(lp) } else { Cell::Empty }])
        .collect();
    Ok((vec![col("n", "photons"), col("p", "1"), col("log_p", "1")], rows))
}

fn phase_diagram(cfg: &RunConfig) -> Result<(Vec<Column>, Vec<Vec<Cell>>), CliError> {
    let (ParamSpec::Sweep { lo: t0, hi: t1, steps: nt }, ParamSpec::Sweep { lo: a0, hi: a1, steps: na }) =
        (cfg.pump, cfg.excitation)
    else {
        return Err(CliError::Usage("--theta and --a must be sweeps for phase-diagram".into()));
    };
    let delta = cfg.detuning.value(0);
    let n_b = cfg.thermal_photons.value(0);
    let diagram = trace_lines(delta, n_b, GridSpec::new((t0, t1), (a0, a1), nt + 1, na + 1))?;
    let mut rows = Vec::new();
    for line in &diagram.lines {
        for (i, &(theta, a)) in line.points.iter().enumerate() {
            rows.push(vec![
                Cell::Text("line".into()),
                Cell::Text(line.kind.to_string()),
                Cell::Num(theta),
                Cell::Num(a),
                Cell::Text(line.order_labels[i].to_string()),
                Cell::Num(line.jumps[i]),
            ]);
        }
    }
    for &(theta, a) in &diagram.triple_points {
        rows.push(vec![
            Cell::Text("triple_point".into()),
            Cell::Empty,
            Cell::Num(theta),
            Cell::Num(a),
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    let columns = vec![
        col("record", ""),
        col("kind", ""),
        col("theta", "1"),
        col("a", "1"),
        col("order", ""),
        col("x_jump", "1"),
    ];
    Ok((columns, rows))
}

fn value_columns(cmd: Command) -> Vec<Column> {
    match cmd {
        Command::Distribution => vec![
            col("mean", "photons"),
            col("mean_x", "1"),
            col("variance", "photons^2"),
            col("mode", "photons"),
            col("n_max", "photons"),
        ],
        Command::Potential => vec![col("x", "1"), col("v0", "1"), col("log_p", "1")],
        Command::Branches => vec![col("label", ""), col("value", "1")],
        Command::Corrlength => vec![
            col("xi", "1/gamma"),
            col("lambda", "gamma"),
            col("residual", "gamma"),
            col("n_max", "photons"),
            col("split", ""),
        ],
        Command::Autocorr => vec![col("t", "1/gamma"), col("c", "1"), col("xi_fit", "1/gamma"), col("xi", "1/gamma")],
        Command::Twinkle => vec![
            col("mean_max", "photons"),
            col("mean_min", "photons"),
            col("exact_max", "photons"),
            col("exact_min", "photons"),
            col("theta_max", "1"),
            col("theta_min", "1"),
        ],
        Command::PhaseDiagram => unreachable!("phase diagrams are not evaluated point by point"),
    }
}

fn per_point(cfg: &RunConfig) -> Result<(Vec<Column>, Vec<Vec<Cell>>), CliError> {
    let mask = param_mask(cfg.command);
    let values = value_columns(cfg.command);
    let width = values.len();
    let mut columns: Vec<Column> = PARAM_NAMES.iter().zip(mask).filter(|(_, m)| *m).map(|(n, _)| col(n, "1")).collect();
    columns.extend(values);
    columns.push(col("error", ""));
    let points = cfg.points();
    let results: Vec<PointRows> = points.par_iter().map(|pt| evaluate(cfg, pt)).collect();
    let sweep = cfg.is_sweep();
    let mut rows = Vec::new();
    for (pt, res) in points.iter().zip(results) {
        let prefix: Vec<Cell> = pt.iter().zip(mask).filter(|(_, m)| *m).map(|(&v, _)| Cell::Num(v)).collect();
        match res {
            Ok(block) => {
                for r in block {
                    let mut row = prefix.clone();
                    row.extend(r);
                    row.push(Cell::Empty);
                    rows.push(row);
                }
            }
            Err(e) if sweep => {
                let mut row = prefix;
                row.extend(std::iter::repeat_n(Cell::Empty, width));
                row.push(Cell::Text(e.to_string()));
                rows.push(row);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((columns, rows))
}

fn num_or_empty(v: f64) -> Cell {
    if v.is_finite() {
        Cell::Num(v)
    } else {
        Cell::Empty
    }
}

fn evaluate(cfg: &RunConfig, pt: &[f64; 5]) -> PointRows {
    let p = model(pt)?;
    match cfg.command {
        Command::Distribution => {
            let d = stationary_distribution_with(&p, &dist_options(cfg))?;
            Ok(vec![vec![
                Cell::Num(d.mean()),
                num_or_empty(d.mean_x()),
                Cell::Num(d.variance()),
                Cell::Int(d.mode() as i64),
                Cell::Int(d.n_max() as i64),
            ]])
        }
        Command::Potential => {
            let xs = cfg.x.values();
            let log_p = if p.flux > 0.0 && xs.len() > 1 {
                Some(asymptotic_log_p(&p, cfg.terms, &xs, cfg.tol)?)
            } else {
                None
            };
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let lp = log_p.as_ref().map_or(Cell::Empty, |l| num_or_empty(l[i]));
                    Ok(vec![Cell::Num(x), Cell::Num(v0(x, &p, cfg.tol)?), lp])
                })
                .collect()
        }
        Command::Branches => {
            let set = CriticalSet::compute(&p, BRANCH_K_MAX, cfg.tol)?;
            let mut rows = vec![vec![Cell::Text("theta0_star".into()), Cell::Num(set.theta0_star)]];
            for (i, &t) in set.theta_k.iter().enumerate() {
                rows.push(vec![Cell::Text(format!("theta{}", i + 1)), Cell::Num(t)]);
            }
            for (&k, &t) in &set.theta_cross {
                rows.push(vec![Cell::Text(format!("theta{}{}_star", k, k + 1)), Cell::Num(t)]);
            }
            for (&k, &t) in &set.theta_thermal {
                rows.push(vec![Cell::Text(format!("theta_t{k}")), Cell::Num(t)]);
            }
            Ok(rows)
        }
        Command::Corrlength => {
            let r = match cfg.n_max {
                Some(n) => spectral_gap_with(&build_generator(&p, n)?, cfg.tol)?,
                None => correlation_length_with(&p, cfg.tol)?,
            };
            Ok(vec![vec![
                Cell::Num(r.xi),
                Cell::Num(r.gap),
                Cell::Num(r.lambda0_residual),
                Cell::Int(r.n_max_used as i64),
                Cell::Int(r.split as i64),
            ]])
        }
        Command::Autocorr => {
            let r = match cfg.n_max {
                Some(n) => spectral_gap_with(&build_generator(&p, n)?, cfg.tol)?,
                None => correlation_length_with(&p, cfg.tol)?,
            };
            let ts = cfg.t.values();
            let ac = photon_autocorrelation(&p, &ts, r.n_max_used)?;
            Ok(ac
                .times
                .iter()
                .zip(&ac.values)
                .map(|(&t, &c)| vec![Cell::Num(t), Cell::Num(c), num_or_empty(ac.xi_fit), Cell::Num(r.xi)])
                .collect())
        }
        Command::Twinkle => {
            let ext = twinkle_extrema(&p, 1)?;
            let d = p.detuning.abs();
            let (t_max, t_min) = (PI / (2.0 * d), PI / d);
            let hi = stationary_distribution(&p.with_pump(t_max), cfg.tol)?.mean();
            let lo = stationary_distribution(&p.with_pump(t_min), cfg.tol)?.mean();
            Ok(vec![vec![
                Cell::Num(ext.mean_max),
                Cell::Num(ext.mean_min),
                Cell::Num(hi),
                Cell::Num(lo),
                Cell::Num(t_max),
                Cell::Num(t_min),
            ]])
        }
        Command::PhaseDiagram => unreachable!("phase diagrams are not evaluated point by point"),
    }
}
