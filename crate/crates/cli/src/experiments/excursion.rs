//! Brownian excursion masses and π-extremal distances.

use slelab::excursions::{
    estimate_annulus_mass, estimate_pi_extremal_distance, estimate_rectangle_crossing,
    excursion_mass_hitting, rectangle_crossing_mass, Region,
};
use slelab::fit::{fit_exponent, Axis, FitSample};

use super::{
    block, chunked_accumulate, fit_row, slope_metric, Outcome, FIT_COLUMNS, MIN_FIT_POINTS,
};
use crate::error::{require, CliResult};
use crate::manifest::Metric;
use crate::plot::PlotSpec;
use crate::row;
use crate::table::Table;

#[derive(Clone, Debug, PartialEq)]
pub struct RectangleConfig {
    pub lengths: Vec<f64>,
    pub paths: usize,
    /// Starting offset from the left side.
    pub offset: f64,
    pub dt: f64,
    pub seed: u64,
    pub tolerance: Option<f64>,
}

const RECT_CHUNK: usize = 10_000;

/// Crossing mass `μ[E_L]` of `(0, L) × (0, π)`; tables `rectangle` and `fit`.
pub fn rectangle(cfg: &RectangleConfig) -> CliResult<Outcome> {
    require(cfg.lengths.len() >= MIN_FIT_POINTS, || {
        format!("need at least {MIN_FIT_POINTS} lengths for a fit")
    })?;
    require(cfg.paths >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.paths)
    })?;
    let mut table = Table::new("rectangle", &["L", "mass", "stderr", "exact_mass", "paths"]);
    let mut samples = Vec::new();
    let mut exact = Vec::new();
    let mut layout = Vec::new();
    for (i, &l) in cfg.lengths.iter().enumerate() {
        let blk = block(format!("L = {l}"), i as u64, cfg.paths, RECT_CHUNK);
        let acc = chunked_accumulate(cfg.seed, &blk, |stream, n| {
            Ok(vec![estimate_rectangle_crossing(
                l, cfg.offset, n, cfg.dt, stream,
            )?])
        })?;
        layout.push(blk);
        let m = rectangle_crossing_mass(l)?;
        table.push(row![l, acc[0].mean(), acc[0].stderr(), m, acc[0].count]);
        samples.push(FitSample::new(l, acc[0].mean(), acc[0].stderr()));
        exact.push(FitSample::new(l, m, 0.0));
    }
    let fit = fit_exponent(&samples, Axis::SemiLog)?;
    let exact_fit = fit_exponent(&exact, Axis::SemiLog)?;
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    fits.push(fit_row("simulated", &fit, -1.0));
    fits.push(fit_row("exact_mass", &exact_fit, -1.0));
    Ok(Outcome {
        tables: vec![table, fits],
        plots: vec![PlotSpec {
            y_err: Some("stderr".into()),
            log_y: true,
            fit: Some(fit.clone()),
            title: "rectangle crossing mass".into(),
            ..PlotSpec::new("rectangle.csv", "L", "mass", "rectangle.svg")
        }],
        metrics: vec![
            slope_metric("slope", &fit, -1.0, cfg.tolerance),
            Metric::value("exact_mass_slope", exact_fit.slope),
        ],
        layout,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusConfig {
    pub radii: Vec<f64>,
    pub paths: usize,
    pub offset: f64,
    pub dt: f64,
    pub seed: u64,
}

const ANNULUS_CHUNK: usize = 5_000;

/// Mass of disk excursions that hit `C_r`, against `2π/log(1/r)`; table `annulus`.
pub fn annulus(cfg: &AnnulusConfig) -> CliResult<Outcome> {
    require(!cfg.radii.is_empty(), || "need at least one radius".into())?;
    let mut table = Table::new(
        "annulus",
        &["r", "mass", "stderr", "exact_mass", "z", "paths"],
    );
    let mut layout = Vec::new();
    let mut metrics = Vec::new();
    for (i, &r) in cfg.radii.iter().enumerate() {
        let blk = block(format!("r = {r}"), i as u64, cfg.paths, ANNULUS_CHUNK);
        let acc = chunked_accumulate(cfg.seed, &blk, |stream, n| {
            Ok(vec![estimate_annulus_mass(
                r, cfg.offset, n, cfg.dt, stream,
            )?])
        })?;
        layout.push(blk);
        let want = excursion_mass_hitting(r)?;
        let z = (acc[0].mean() - want) / acc[0].stderr();
        table.push(row![
            r,
            acc[0].mean(),
            acc[0].stderr(),
            want,
            z,
            acc[0].count
        ]);
        metrics.push(Metric::value(format!("z(r={r})"), z));
    }
    Ok(Outcome {
        tables: vec![table],
        metrics,
        layout,
        ..Outcome::default()
    })
}

/// π-extremal distance of a region by grid resistance; table `extremal`.
pub fn extremal(
    name: &str,
    region: &Region,
    resolution: usize,
    exact: Option<f64>,
) -> CliResult<Outcome> {
    let e = estimate_pi_extremal_distance(region, resolution)?;
    let mut t = Table::new(
        "extremal",
        &["region", "resolution", "coarse", "fine", "value", "exact"],
    );
    t.push(row![
        name,
        e.resolution,
        e.coarse,
        e.fine,
        e.value,
        exact.map(|v| v.to_string()).unwrap_or_default()
    ]);
    Ok(Outcome {
        tables: vec![t],
        metrics: vec![Metric::value("pi_extremal_distance", e.value)],
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_small_run() {
        let out = rectangle(&RectangleConfig {
            lengths: vec![1.0, 1.5, 2.0],
            paths: 2000,
            offset: 0.05,
            dt: 1e-3,
            seed: 4,
            tolerance: None,
        })
        .unwrap();
        assert_eq!(out.table("rectangle").unwrap().rows.len(), 3);
        let exact = out.metric("exact_mass_slope").unwrap().value;
        assert!(exact < -1.0 && exact > -1.3);
        assert!(rectangle(&RectangleConfig {
            lengths: vec![1.0],
            paths: 10,
            offset: 0.01,
            dt: 1e-3,
            seed: 4,
            tolerance: None,
        })
        .is_err());
    }

    #[test]
    fn extremal_of_rectangle() {
        let out = extremal("rectangle", &Region::Rectangle { l: 2.0 }, 64, Some(2.0)).unwrap();
        assert!((out.metrics[0].value - 2.0).abs() < 0.02);
    }
}
