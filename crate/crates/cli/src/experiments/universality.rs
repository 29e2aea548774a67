//! Avoidance mass of an SLE₆ hull and an independent excursion, two ways.
//!
//! For each radial SLE₆ hull run until it reaches radius r:
//! route (i) reads the surviving boundary arc length `L = exp(−𝔏)` off the
//! angular flow; route (ii) computes the π-extremal distance 𝔏 of the
//! complement by grid resistance and takes the exact crossing mass m(𝔏) of
//! the rectangle it uniformizes to. Both decay like `r^{ξ(1,1)}`.

use num_complex::Complex64;
use slelab::excursions::{estimate_pi_extremal_distance, rectangle_crossing_mass, Region};
use slelab::exponents::{xi, PackVector};
use slelab::fit::{fit_exponent, Axis, FitResult, FitSample};
use slelab::loewner::{simulate_radial, RadialOptions, StopRule};
use slelab::stochastic::Accumulator;

use super::{
    block, chunked_accumulate, fit_row, slope_metric, Outcome, FIT_COLUMNS, MIN_FIT_POINTS,
};
use crate::error::{require, CliResult};
use crate::manifest::Metric;
use crate::plot::PlotSpec;
use crate::row;
use crate::table::Table;

/// Paths per radius below which a run counts as a pilot.
pub const FULL_PATHS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct UniversalityConfig {
    /// Decreasing, inside (0, 1/8).
    pub radii: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    /// Boundary angles tracked for route (i).
    pub grid: usize,
    /// Cells around the circle for route (ii); Richardson uses half of it too.
    pub resolution: usize,
    pub seed: u64,
    /// Tolerance of each slope around −ξ(1,1).
    pub tolerance: Option<f64>,
}

impl UniversalityConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        UniversalityConfig {
            radii: (4..=9).map(|j| 0.5f64.powi(j)).collect(),
            paths,
            dt: 1e-2,
            grid: 256,
            resolution: 64,
            seed,
            tolerance: None,
        }
    }
}

const HULL_CHUNK: usize = 25;

/// Both routes for one hull: surviving arc length and m(𝔏) at every radius.
fn one_hull(
    cfg: &UniversalityConfig,
    stream: &mut slelab::stochastic::RandomStream,
) -> slelab::Result<(Vec<f64>, Vec<f64>)> {
    let r_min = cfg.radii.iter().copied().fold(f64::INFINITY, f64::min);
    let opts = RadialOptions {
        grid: Some(cfg.grid),
        hit_radii: cfg.radii.clone(),
        record_tips: true,
        ..RadialOptions::default()
    };
    let (_, state) = simulate_radial(6.0, 0.0, StopRule::HitRadius(r_min), cfg.dt, &opts, stream)?;
    let mut arc = Vec::with_capacity(cfg.radii.len());
    let mut mass = Vec::with_capacity(cfg.radii.len());
    for &r in &cfg.radii {
        let hit = state
            .hits
            .iter()
            .find(|h| h.r == r)
            .ok_or(slelab::Error::BudgetExhausted {
                steps: state.steps as u64,
                what: "hull reaching every requested radius",
            })?;
        arc.push(hit.arc_length);
        let mut trace = Vec::with_capacity(hit.steps + 1);
        trace.push(Complex64::new(1.0, 0.0));
        trace.extend_from_slice(&state.tips[..hit.steps]);
        let e = estimate_pi_extremal_distance(&Region::HullAnnulus { r, trace }, cfg.resolution)?;
        mass.push(if e.value.is_finite() {
            rectangle_crossing_mass(e.value)?
        } else {
            0.0
        });
    }
    Ok((arc, mass))
}

fn fit_route(radii: &[f64], acc: &[Accumulator]) -> slelab::Result<FitResult> {
    let samples: Vec<FitSample> = radii
        .iter()
        .zip(acc)
        .map(|(&r, a)| FitSample::new(1.0 / r, a.mean(), a.stderr()))
        .collect();
    fit_exponent(&samples, Axis::LogLog)
}

/// Tables `avoidance` and `fit`; slopes are against `1/r`, so both should read −ξ(1,1).
///
/// The routes are consistent when their slopes differ by at most twice the
/// combined standard error `√(σ₁² + σ₂²)`.
pub fn universality(cfg: &UniversalityConfig) -> CliResult<Outcome> {
    require(cfg.radii.len() >= MIN_FIT_POINTS, || {
        format!(
            "need at least {MIN_FIT_POINTS} radii for a fit, got {}",
            cfg.radii.len()
        )
    })?;
    require(cfg.radii.iter().all(|&r| r > 0.0 && r < 0.125), || {
        "radii must lie in (0, 1/8)".into()
    })?;
    require(cfg.radii.windows(2).all(|w| w[1] < w[0]), || {
        "radii must be decreasing".into()
    })?;
    require(cfg.paths >= 2, || {
        format!("paths must be ≥ 2, got {}", cfg.paths)
    })?;
    let nr = cfg.radii.len();
    let blk = block("radial SLE6 hulls", 0, cfg.paths, HULL_CHUNK);
    let acc = chunked_accumulate(cfg.seed, &blk, |stream, len| {
        let mut out = vec![Accumulator::new(); 2 * nr];
        for _ in 0..len {
            let (arc, mass) = one_hull(cfg, stream)?;
            for j in 0..nr {
                out[j].push(arc[j]);
                out[nr + j].push(mass[j]);
            }
        }
        Ok(out)
    })?;
    let (route_i, route_ii) = acc.split_at(nr);
    let fit_i = fit_route(&cfg.radii, route_i)?;
    let fit_ii = fit_route(&cfg.radii, route_ii)?;
    let expected = -xi(&PackVector::integers(&[1, 1])?)?.value;

    let mut table = Table::new(
        "avoidance",
        &["route", "r", "inv_r", "mass", "stderr", "paths"],
    );
    for (name, route) in [("i", route_i), ("ii", route_ii)] {
        for (a, &r) in route.iter().zip(&cfg.radii) {
            table.push(row![name, r, 1.0 / r, a.mean(), a.stderr(), a.count]);
        }
    }
    let mut fits = Table::new("fit", &FIT_COLUMNS);
    fits.push(fit_row("route_i", &fit_i, expected));
    fits.push(fit_row("route_ii", &fit_ii, expected));
    let combined = fit_i.slope_stderr.hypot(fit_ii.slope_stderr);
    let gap = (fit_i.slope - fit_ii.slope).abs();
    let plots = [("i", &fit_i), ("ii", &fit_ii)]
        .into_iter()
        .map(|(name, fit)| PlotSpec {
            y_err: Some("stderr".into()),
            filter: Some(("route".into(), name.into())),
            log_x: true,
            log_y: true,
            fit: Some(fit.clone()),
            title: format!("hull-excursion avoidance, route ({name})"),
            ..PlotSpec::new(
                "avoidance.csv",
                "inv_r",
                "mass",
                format!("avoidance_route_{name}.svg"),
            )
        })
        .collect();
    Ok(Outcome {
        tables: vec![table, fits],
        plots,
        metrics: vec![
            slope_metric("slope_route_i", &fit_i, expected, cfg.tolerance),
            slope_metric("slope_route_ii", &fit_ii, expected, cfg.tolerance),
            Metric::value("route_gap", gap)
                .with_stderr(combined)
                .with_verdict(gap <= 2.0 * combined),
            Metric::value("pilot", f64::from(u8::from(cfg.paths < FULL_PATHS))),
        ],
        layout: vec![blk],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_radii() {
        let mut cfg = UniversalityConfig::new(4, 1);
        cfg.radii = vec![0.1, 0.05];
        assert!(universality(&cfg).is_err());
        cfg.radii = vec![0.05, 0.1, 0.02];
        assert!(universality(&cfg).is_err());
        cfg.radii = vec![0.2, 0.1, 0.05];
        assert!(universality(&cfg).is_err());
    }

    #[test]
    fn pilot_run_has_both_routes() {
        let mut cfg = UniversalityConfig::new(6, 3);
        cfg.radii = vec![0.1, 0.05, 0.025];
        cfg.resolution = 16;
        cfg.grid = 64;
        let out = universality(&cfg).unwrap();
        assert_eq!(out.table("avoidance").unwrap().rows.len(), 6);
        assert_eq!(out.metric("pilot").unwrap().value, 1.0);
        let i = out.metric("slope_route_i").unwrap().value;
        let ii = out.metric("slope_route_ii").unwrap().value;
        assert!(i < 0.0 && ii < 0.0, "{i} {ii}");
    }
}
