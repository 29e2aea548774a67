//! Radial SLE experiments: the harmonic-measure exponent, the derivative
//! sandwich, the generator identity and single hull traces.

use std::f64::consts::TAU;

use slelab::angular::{
    arc_length_moments, estimate_f_times, fit_arc_length, generator_residual, h_star, nu,
};
use slelab::loewner::{simulate_radial, RadialOptions, StopRule};
use slelab::stochastic::{merge_all, run_chunked, Accumulator, RandomStream};

use super::{
    block, chunked_accumulate, fit_row, slope_metric, Outcome, FIT_COLUMNS, MIN_FIT_POINTS,
};
use crate::error::{require, CliResult};
use crate::manifest::Metric;
use crate::plot::PlotSpec;
use crate::row;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq)]
pub struct NuConfig {
    pub kappa: f64,
    /// Moments `b` of the surviving arc length.
    pub moments: Vec<f64>,
    pub times: Vec<f64>,
    pub paths: usize,
    pub grid: usize,
    pub dt: f64,
    pub seed: u64,
    /// Per-moment slope tolerances; a metric gets a verdict only when one is given.
    pub tolerances: Vec<f64>,
}

impl NuConfig {
    pub fn new(kappa: f64, moments: Vec<f64>, paths: usize, seed: u64) -> Self {
        NuConfig {
            kappa,
            moments,
            times: (0..7).map(|k| 1.0 + 0.5 * k as f64).collect(),
            paths,
            grid: 256,
            dt: 1e-2,
            seed,
            tolerances: Vec::new(),
        }
    }
}

const NU_CHUNK: usize = 500;

/// Decay rate of `E[L_t^b]`; tables `arc_length` and `fit`.
pub fn nu_estimate(cfg: &NuConfig) -> CliResult<Outcome> {
    require(cfg.paths >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.paths)
    })?;
    require(cfg.times.len() >= MIN_FIT_POINTS, || {
        format!("need at least {MIN_FIT_POINTS} times for a fit")
    })?;
    let blk = block("arc-length paths", 0, cfg.paths, NU_CHUNK);
    let parts = run_chunked(
        cfg.seed,
        blk.stream_base,
        blk.trials,
        blk.chunk,
        |stream, n| {
            arc_length_moments(
                cfg.kappa,
                &cfg.moments,
                &cfg.times,
                n,
                cfg.grid,
                cfg.dt,
                stream,
            )
        },
    );
    let mut per_moment = vec![vec![Accumulator::new(); cfg.times.len()]; cfg.moments.len()];
    let mut empty = vec![0u64; cfg.times.len()];
    for part in parts {
        let (acc, e) = part?;
        for (total, chunk) in per_moment.iter_mut().zip(&acc) {
            *total = merge_all(&[total.clone(), chunk.clone()]);
        }
        for (total, c) in empty.iter_mut().zip(e) {
            *total += c;
        }
    }
    let est = fit_arc_length(
        cfg.kappa,
        &cfg.moments,
        &cfg.times,
        cfg.grid,
        cfg.dt,
        per_moment,
        empty,
    )?;

    let mut data = Table::new(
        "arc_length",
        &["b", "t", "mean", "stderr", "paths", "empty_arc"],
    );
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    let mut metrics = Vec::new();
    let mut plots = Vec::new();
    for (m, &b) in cfg.moments.iter().enumerate() {
        for (k, &t) in cfg.times.iter().enumerate() {
            let a = &est.per_moment[m][k];
            data.push(row![b, t, a.mean(), a.stderr(), a.count, est.empty_arc[k]]);
        }
        let expected = -nu(cfg.kappa, b)?;
        let series = format!("b={b}");
        fits.push(fit_row(&series, &est.fits[m], expected));
        metrics.push(slope_metric(
            &format!("slope_b{b}"),
            &est.fits[m],
            expected,
            cfg.tolerances.get(m).copied(),
        ));
        plots.push(PlotSpec {
            y_err: Some("stderr".into()),
            filter: Some(("b".into(), b.to_string())),
            log_y: true,
            fit: Some(est.fits[m].clone()),
            title: format!("E[L_t^{b}], kappa = {}", cfg.kappa),
            ..PlotSpec::new(
                "arc_length.csv",
                "t",
                "mean",
                format!("arc_length_b{b}.svg"),
            )
        });
    }
    Ok(Outcome {
        tables: vec![data, fits],
        plots,
        metrics,
        layout: vec![blk],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichConfig {
    pub kappa: f64,
    pub b: f64,
    pub xs: Vec<f64>,
    pub times: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Upper end of the accepted ratio `f̂/h*`.
    pub upper: f64,
}

const SANDWICH_CHUNK: usize = 1000;

/// Monte Carlo `f(x, t)` against `h*(x, t)`; table `sandwich`.
///
/// A cell passes when `1 − 3·se ≤ f̂/h* ≤ upper`, with `se` the standard error of the ratio.
pub fn sandwich(cfg: &SandwichConfig) -> CliResult<Outcome> {
    require(cfg.paths >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.paths)
    })?;
    require(!cfg.xs.is_empty() && !cfg.times.is_empty(), || {
        "need at least one x and one t".into()
    })?;
    let mut table = Table::new(
        "sandwich",
        &[
            "x",
            "t",
            "f_hat",
            "stderr",
            "h_star",
            "ratio",
            "ratio_stderr",
            "lower",
            "upper",
            "inside",
        ],
    );
    let mut layout = Vec::new();
    let (mut inside, mut lo, mut hi) = (0usize, f64::INFINITY, f64::NEG_INFINITY);
    for (i, &x) in cfg.xs.iter().enumerate() {
        let blk = block(format!("x = {x}"), i as u64, cfg.paths, SANDWICH_CHUNK);
        let acc = chunked_accumulate(cfg.seed, &blk, |stream, n| {
            estimate_f_times(x, &cfg.times, cfg.kappa, cfg.b, n, cfg.dt, stream)
        })?;
        layout.push(blk);
        for (a, &t) in acc.iter().zip(&cfg.times) {
            let h = h_star(x, t, cfg.kappa, cfg.b)?;
            let (ratio, se) = (a.mean() / h, a.stderr() / h);
            let lower = 1.0 - 3.0 * se;
            let ok = ratio >= lower && ratio <= cfg.upper;
            inside += usize::from(ok);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            table.push(row![
                x,
                t,
                a.mean(),
                a.stderr(),
                h,
                ratio,
                se,
                lower,
                cfg.upper,
                ok
            ]);
        }
    }
    let cells = cfg.xs.len() * cfg.times.len();
    Ok(Outcome {
        tables: vec![table],
        metrics: vec![
            Metric::value("cells_inside", inside as f64).with_verdict(inside == cells),
            Metric::value("min_ratio", lo),
            Metric::value("max_ratio", hi),
        ],
        layout,
        ..Outcome::default()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualConfig {
    pub pairs: Vec<(f64, f64)>,
    pub nx: usize,
    pub nt: usize,
    pub x_margin: f64,
    pub t_range: (f64, f64),
    pub h: f64,
    /// Largest accepted |residual| at step `h`.
    pub tolerance: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            pairs: vec![(6.0, 1.0), (6.0, 2.0), (2.0, 1.0)],
            nx: 20,
            nt: 20,
            x_margin: 0.3,
            t_range: (0.2, 4.0),
            h: 1e-3,
            tolerance: 1e-4,
        }
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// `∂ₜh* − Λh*` on an `nx × nt` grid at steps `h` and `h/2`; table `residual`.
pub fn residual(cfg: &ResidualConfig) -> CliResult<Outcome> {
    require(cfg.nx >= 1 && cfg.nt >= 1, || {
        "grid must be non-empty".into()
    })?;
    let mut table = Table::new(
        "residual",
        &["kappa", "b", "x", "t", "residual_h", "residual_half_h"],
    );
    let (mut worst, mut worst_half) = (0.0f64, 0.0f64);
    for &(kappa, b) in &cfg.pairs {
        for x in grid(cfg.x_margin, TAU - cfg.x_margin, cfg.nx) {
            for t in grid(cfg.t_range.0, cfg.t_range.1, cfg.nt) {
                let r = generator_residual(x, t, kappa, b, cfg.h)?;
                let r2 = generator_residual(x, t, kappa, b, cfg.h / 2.0)?;
                worst = worst.max(r.abs());
                worst_half = worst_half.max(r2.abs());
                table.push(row![kappa, b, x, t, r, r2]);
            }
        }
    }
    let order = (worst / worst_half).log2();
    Ok(Outcome {
        tables: vec![table],
        metrics: vec![
            Metric::value("max_residual", worst).with_verdict(worst < cfg.tolerance),
            Metric::value("max_residual_half_h", worst_half),
            Metric::value("observed_order", order).against(2.0, 0.2),
        ],
        ..Outcome::default()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceConfig {
    pub kappa: f64,
    pub t_max: f64,
    pub dt: f64,
    pub seed: u64,
}

/// One radial hull up to capacity time `t_max`; table `trace` with the Koebe bracket.
pub fn trace(cfg: &TraceConfig) -> CliResult<Outcome> {
    let opts = RadialOptions {
        record_tips: true,
        ..RadialOptions::default()
    };
    let blk = block("hull", 0, 1, 1);
    let mut stream = RandomStream::new(cfg.seed, blk.stream_base);
    let (driving, state) = simulate_radial(
        cfg.kappa,
        0.0,
        StopRule::Time(cfg.t_max),
        cfg.dt,
        &opts,
        &mut stream,
    )?;
    let mut table = Table::new(
        "trace",
        &[
            "step",
            "t",
            "driving",
            "tip_re",
            "tip_im",
            "min_tip_modulus",
            "koebe_lower",
            "schwarz_upper",
        ],
    );
    let mut closest = f64::INFINITY;
    let mut violations = 0usize;
    for (j, tip) in state.tips.iter().enumerate() {
        let t = (j + 1) as f64 * cfg.dt;
        closest = closest.min(tip.norm());
        let (lower, upper) = ((-t).exp() / 4.0, (-t).exp());
        violations += usize::from(closest < lower * (1.0 - 1e-9));
        table.push(row![
            j + 1,
            t,
            driving.values[j + 1],
            tip.re,
            tip.im,
            closest,
            lower,
            upper
        ]);
    }
    Ok(Outcome {
        tables: vec![table],
        metrics: vec![
            Metric::value("steps", state.steps as f64),
            Metric::value("koebe_violations", violations as f64).with_verdict(violations == 0),
        ],
        layout: vec![blk],
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_is_second_order() {
        let out = residual(&ResidualConfig {
            nx: 5,
            nt: 4,
            ..ResidualConfig::default()
        })
        .unwrap();
        assert_eq!(out.tables[0].rows.len(), 60);
        assert_eq!(out.metric("max_residual").unwrap().passed, Some(true));
        assert_eq!(out.metric("observed_order").unwrap().passed, Some(true));
    }

    #[test]
    fn small_nu_run_is_reproducible() {
        let mut cfg = NuConfig::new(6.0, vec![1.0], 40, 3);
        cfg.times = vec![0.5, 1.0, 1.5];
        let a = nu_estimate(&cfg).unwrap();
        let b = nu_estimate(&cfg).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.table("arc_length").unwrap().rows.len(), 3);
        assert!(a.metric("slope_b1").unwrap().value < 0.0);
    }

    #[test]
    fn trace_respects_koebe() {
        let out = trace(&TraceConfig {
            kappa: 6.0,
            t_max: 2.0,
            dt: 1e-2,
            seed: 5,
        })
        .unwrap();
        assert_eq!(out.metric("koebe_violations").unwrap().passed, Some(true));
        assert_eq!(out.tables[0].rows.len(), 200);
    }
}
