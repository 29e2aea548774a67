//! Crossing probabilities of thin quadrilaterals: closed form and SLE₆ simulation.

use slelab::cardy::{
    crossing_monte_carlo, crossing_probability, CrossingMonteCarlo, Quadrilateral,
};
use slelab::loewner::SwallowOptions;
use slelab::stochastic::run_chunked;

use super::{block, Outcome};
use crate::error::{require, CliResult};
use crate::manifest::Metric;
use crate::row;
use crate::table::Table;

/// Closed-form crossing probabilities over a θ × α grid; table `crossing`.
pub fn eval(thetas: &[f64], alphas: &[f64]) -> CliResult<Outcome> {
    let mut t = Table::new(
        "crossing",
        &[
            "theta",
            "alpha",
            "c_prime",
            "c_dprime",
            "G_prime",
            "G_dprime",
            "p_cross",
            "asymptotic",
            "ratio_to_asymptotic",
        ],
    );
    let mut metrics = Vec::new();
    for &theta in thetas {
        for &alpha in alphas {
            let r = crossing_probability(&Quadrilateral::new(theta, alpha)?)?;
            t.push(row![
                r.theta,
                r.alpha,
                r.c_prime,
                r.c_dprime,
                r.g_prime,
                r.g_dprime,
                r.p_cross,
                r.asymptotic,
                r.p_cross / r.asymptotic
            ]);
            metrics.push(Metric::value(
                format!("p_cross(theta={theta},alpha={alpha})"),
                r.p_cross,
            ));
        }
    }
    Ok(Outcome {
        tables: vec![t],
        metrics,
        ..Outcome::default()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CardyMcConfig {
    pub theta: f64,
    pub alpha: f64,
    pub runs: usize,
    pub seed: u64,
    /// Largest accepted |z| of the E′ estimate against G(c′).
    pub z_max: f64,
}

const MC_CHUNK: usize = 250;

/// Chordal SLE₆ estimates of P[E′] and P[E″]; table `monte_carlo`.
pub fn monte_carlo(cfg: &CardyMcConfig) -> CliResult<Outcome> {
    require(cfg.runs >= 2, || {
        format!("runs must be ≥ 2, got {}", cfg.runs)
    })?;
    let q = Quadrilateral::new(cfg.theta, cfg.alpha)?;
    let exact = crossing_probability(&q)?;
    let blk = block("chordal runs", 0, cfg.runs, MC_CHUNK);
    let opts = SwallowOptions::default();
    let parts = run_chunked(
        cfg.seed,
        blk.stream_base,
        blk.trials,
        blk.chunk,
        |stream, n| crossing_monte_carlo(&q, n, &opts, stream),
    );
    let mut total: Option<CrossingMonteCarlo> = None;
    for p in parts {
        let p = p?;
        total = Some(match total {
            Some(t) => t.merge(&p),
            None => p,
        });
    }
    let mc = total.expect("runs ≥ 2 gives at least one chunk");
    let mut t = Table::new(
        "monte_carlo",
        &[
            "event",
            "estimate",
            "stderr",
            "exact",
            "z",
            "runs",
            "mean_steps",
        ],
    );
    let mut metrics = Vec::new();
    for (name, acc, want) in [
        ("E_prime", mc.e_prime, exact.g_prime),
        ("E_dprime", mc.e_dprime, exact.g_dprime),
    ] {
        let z = (acc.mean() - want) / acc.stderr();
        t.push(row![
            name,
            acc.mean(),
            acc.stderr(),
            want,
            z,
            acc.count,
            mc.steps as f64 / cfg.runs as f64
        ]);
        let m = Metric::value(format!("p_{name}"), acc.mean()).with_stderr(acc.stderr());
        metrics.push(Metric {
            target: Some(want),
            ..m
        });
        let zm = Metric::value(format!("z_{name}"), z);
        metrics.push(if name == "E_prime" {
            zm.against(0.0, cfg.z_max)
        } else {
            zm
        });
    }
    Ok(Outcome {
        tables: vec![t],
        metrics,
        layout: vec![blk],
        ..Outcome::default()
    })
}
