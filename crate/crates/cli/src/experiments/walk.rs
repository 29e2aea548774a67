//! Simple random walk non-intersection and fractal dimensions.

use slelab::exponents::{dimensions, xi, PackVector};
use slelab::fit::{fit_exponent, Axis, FitSample};
use slelab::stochastic::Accumulator;
use slelab::walk::{
    fit_counts, nonintersection_radial_probability, nonintersection_time_probability,
    walk_box_counts,
};

use super::{
    block, chunked_accumulate, fit_row, slope_metric, Outcome, FIT_COLUMNS, MIN_FIT_POINTS,
};
use crate::error::{require, CliResult};
use crate::manifest::Metric;
use crate::plot::PlotSpec;
use crate::row;
use crate::table::Table;

fn plane_exponent(packs: (usize, usize)) -> CliResult<f64> {
    Ok(xi(&PackVector::integers(&[packs.0 as i64, packs.1 as i64])?)?.value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkTimeConfig {
    /// Walkers started from each of the two neighboring sites.
    pub packs: (usize, usize),
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

const WALK_CHUNK: usize = 1000;

/// `P[packs disjoint up to step k]` against `k^{−ξ/2}`; tables `nonintersection` and `fit`.
pub fn nonintersection(cfg: &WalkTimeConfig) -> CliResult<Outcome> {
    require(cfg.ks.len() >= MIN_FIT_POINTS, || {
        format!("need at least {MIN_FIT_POINTS} step counts for a fit")
    })?;
    require(cfg.trials >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.trials)
    })?;
    let blk = block("walk pairs", 0, cfg.trials, WALK_CHUNK);
    let (n, m) = cfg.packs;
    let acc = chunked_accumulate(cfg.seed, &blk, |stream, len| {
        nonintersection_time_probability(n, m, &cfg.ks, len, stream)
    })?;
    let mut table = Table::new("nonintersection", &["k", "probability", "stderr", "trials"]);
    let mut samples = Vec::new();
    for (a, &k) in acc.iter().zip(&cfg.ks) {
        table.push(row![k, a.mean(), a.stderr(), a.count]);
        samples.push(FitSample::new(k as f64, a.mean(), a.stderr()));
    }
    let fit = fit_exponent(&samples, Axis::LogLog)?;
    let expected = -plane_exponent(cfg.packs)? / 2.0;
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    fits.push(fit_row(&format!("packs={n},{m}"), &fit, expected));
    Ok(Outcome {
        tables: vec![table, fits],
        plots: vec![PlotSpec {
            y_err: Some("stderr".into()),
            log_x: true,
            log_y: true,
            fit: Some(fit.clone()),
            title: format!("non-intersection of packs ({n}, {m})"),
            ..PlotSpec::new(
                "nonintersection.csv",
                "k",
                "probability",
                "nonintersection.svg",
            )
        }],
        metrics: vec![slope_metric("slope", &fit, expected, cfg.tolerance)],
        layout: vec![blk],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkRadialConfig {
    pub packs: (usize, usize),
    pub radii: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

/// `P[packs disjoint until leaving radius R]` against `R^{−ξ}`; tables `radial` and `fit`.
pub fn radial(cfg: &WalkRadialConfig) -> CliResult<Outcome> {
    require(cfg.radii.len() >= MIN_FIT_POINTS, || {
        format!("need at least {MIN_FIT_POINTS} radii for a fit")
    })?;
    require(cfg.trials >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.trials)
    })?;
    let blk = block("walk pairs", 0, cfg.trials, WALK_CHUNK);
    let (n, m) = cfg.packs;
    let acc = chunked_accumulate(cfg.seed, &blk, |stream, len| {
        nonintersection_radial_probability(n, m, &cfg.radii, len, stream)
    })?;
    let mut table = Table::new("radial", &["radius", "probability", "stderr", "trials"]);
    let mut samples = Vec::new();
    for (a, &r) in acc.iter().zip(&cfg.radii) {
        table.push(row![r, a.mean(), a.stderr(), a.count]);
        samples.push(FitSample::new(r, a.mean(), a.stderr()));
    }
    let fit = fit_exponent(&samples, Axis::LogLog)?;
    let expected = -plane_exponent(cfg.packs)?;
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    fits.push(fit_row(&format!("packs={n},{m}"), &fit, expected));
    Ok(Outcome {
        tables: vec![table, fits],
        plots: vec![PlotSpec {
            y_err: Some("stderr".into()),
            log_x: true,
            log_y: true,
            fit: Some(fit.clone()),
            title: format!("radial non-intersection of packs ({n}, {m})"),
            ..PlotSpec::new("radial.csv", "radius", "probability", "radial.svg")
        }],
        metrics: vec![slope_metric("slope", &fit, expected, cfg.tolerance)],
        layout: vec![blk],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionsConfig {
    pub steps: usize,
    pub walks: usize,
    /// Box sizes in lattice units, powers of two.
    pub scales: Vec<u32>,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

/// Box-counting dimensions of cut points and frontier; tables `box_counts` and `fit`.
///
/// Counts are averaged over walks at each scale before the fit.
pub fn dimensions_experiment(cfg: &DimensionsConfig) -> CliResult<Outcome> {
    require(cfg.walks >= 1, || "need at least one walk".into())?;
    require(cfg.scales.len() >= 2, || "need at least two scales".into())?;
    let blk = block("walks", 0, cfg.walks, 1);
    let ns = cfg.scales.len();
    // Layout: cut counts per scale, frontier counts per scale, then set sizes.
    let acc = chunked_accumulate(cfg.seed, &blk, |stream, len| {
        let mut out = vec![Accumulator::new(); 2 * ns + 2];
        for _ in 0..len {
            let w = walk_box_counts(cfg.steps, &cfg.scales, stream)?;
            for j in 0..ns {
                out[j].push(w.cut_counts[j] as f64);
                out[ns + j].push(w.frontier_counts[j] as f64);
            }
            out[2 * ns].push(w.cut_points as f64);
            out[2 * ns + 1].push(w.frontier as f64);
        }
        Ok(out)
    })?;
    let expected = |name: &str| {
        dimensions()
            .into_iter()
            .find(|d| d.name == name)
            .map(|d| d.dimension.value)
            .unwrap_or(f64::NAN)
    };
    let mut counts = Table::new(
        "box_counts",
        &["set", "scale", "inv_scale", "mean_count", "stderr", "walks"],
    );
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    let mut metrics = Vec::new();
    let mut plots = Vec::new();
    for (set, offset, size) in [("cut", 0, 2 * ns), ("frontier", ns, 2 * ns + 1)] {
        let means: Vec<f64> = (0..ns).map(|j| acc[offset + j].mean()).collect();
        let errs: Vec<f64> = (0..ns).map(|j| acc[offset + j].stderr()).collect();
        for (j, &s) in cfg.scales.iter().enumerate() {
            counts.push(row![
                set,
                s,
                1.0 / s as f64,
                means[j],
                errs[j],
                acc[offset + j].count
            ]);
        }
        let fit = fit_counts(&cfg.scales, &means, &errs)?;
        let want = expected(set);
        fits.push(fit_row(set, &fit, want));
        metrics.push(slope_metric(
            &format!("{set}_dimension"),
            &fit,
            want,
            cfg.tolerance,
        ));
        metrics.push(Metric::value(
            format!("{set}_sites_per_walk"),
            acc[size].mean(),
        ));
        plots.push(PlotSpec {
            y_err: Some("stderr".into()),
            filter: Some(("set".into(), set.into())),
            log_x: true,
            log_y: true,
            fit: Some(fit),
            title: format!("{set} box counts, {} steps", cfg.steps),
            ..PlotSpec::new(
                "box_counts.csv",
                "inv_scale",
                "mean_count",
                format!("{set}_box_counts.svg"),
            )
        });
    }
    Ok(Outcome {
        tables: vec![counts, fits],
        plots,
        metrics,
        layout: vec![blk],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_time_run() {
        let out = nonintersection(&WalkTimeConfig {
            packs: (1, 1),
            ks: vec![16, 32, 64],
            trials: 3000,
            seed: 1,
            tolerance: None,
        })
        .unwrap();
        let p: Vec<f64> = out.tables[0]
            .rows
            .iter()
            .map(|r| r[1].parse().unwrap())
            .collect();
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.metric("slope").unwrap().target, Some(-0.625));
    }

    #[test]
    fn small_dimension_run() {
        let out = dimensions_experiment(&DimensionsConfig {
            steps: 4000,
            walks: 3,
            scales: vec![2, 4, 8, 16],
            seed: 1,
            tolerance: None,
        })
        .unwrap();
        assert_eq!(out.table("box_counts").unwrap().rows.len(), 8);
        let d = out.metric("frontier_dimension").unwrap().value;
        assert!(d > 0.8 && d < 1.8, "{d}");
    }
}
