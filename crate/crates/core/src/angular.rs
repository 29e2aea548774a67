//! The angular diffusion `dY = √κ dB + cot(Y/2) dt` on `(0, 2π)`, its
//! derivative weight `Φ`, and the harmonic-measure exponents it produces.
//!
//! A boundary point at angle `x` relative to the driving value moves as `Y`
//! under radial SLE_κ, and `Φ = |g_t'(e^{ix})|` satisfies
//! `d log Φ = −dt / (2 sin²(Y/2))`. The weight `Φ^b` is set to zero once `Y`
//! leaves the interval.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fit::{fit_exponent, Axis, FitResult, FitSample};
use crate::loewner::BoundaryAngles;
use crate::stochastic::{bridge_extrema, Accumulator, RandomStream};

/// Paths closer than this to 0 or 2π are absorbed.
pub const EPS_ABS: f64 = 1e-6;

/// Once `b·log Φ` falls below this the weight is frozen; `e^{−40} ≈ 4·10⁻¹⁸`.
pub const NEGLIGIBLE_LOG_WEIGHT: f64 = -40.0;

/// Below this Φ a grid angle no longer contributes to the arc length.
const ARC_PHI_FLOOR: f64 = 1e-30;

fn check_kappa_b(kappa: f64, b: f64) -> Result<()> {
    ensure(kappa >= 0.0 && kappa.is_finite(), "kappa", || {
        format!("must be ≥ 0, got {kappa}")
    })?;
    ensure(b >= 0.0 && b.is_finite(), "b", || {
        format!("must be ≥ 0, got {b}")
    })
}

/// Decay rate `ν(κ, b) = (8b + κ − 4 + √((κ−4)² + 16bκ)) / 16`.
pub fn nu(kappa: f64, b: f64) -> Result<f64> {
    check_kappa_b(kappa, b)?;
    Ok((8.0 * b + kappa - 4.0 + ((kappa - 4.0).powi(2) + 16.0 * b * kappa).sqrt()) / 16.0)
}

/// Boundary exponent `q(κ, b) = (κ − 4 + √((κ−4)² + 16bκ)) / (2κ)`, with `q(0, b) = b`.
pub fn q(kappa: f64, b: f64) -> Result<f64> {
    check_kappa_b(kappa, b)?;
    if kappa == 0.0 {
        return Ok(b);
    }
    let disc = ((kappa - 4.0).powi(2) + 16.0 * b * kappa).sqrt();
    // Rationalized form avoids cancellation when κ < 4 and b is small.
    if kappa < 4.0 {
        return Ok(8.0 * b / (4.0 - kappa + disc));
    }
    Ok((kappa - 4.0 + disc) / (2.0 * kappa))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub nu: f64,
    pub q: f64,
    pub kappa: f64,
    pub b: f64,
}

impl ExponentPair {
    pub fn new(kappa: f64, b: f64) -> Result<Self> {
        Ok(ExponentPair {
            nu: nu(kappa, b)?,
            q: q(kappa, b)?,
            kappa,
            b,
        })
    }

    /// `κq² + (4−κ)q − 4b`; zero when `q` is the boundary exponent.
    pub fn boundary_residual(&self) -> f64 {
        self.kappa * self.q * self.q + (4.0 - self.kappa) * self.q - 4.0 * self.b
    }

    /// `ν − (κq²/8 + q/2)`; zero when `ν` is the decay rate of `h*`.
    pub fn rate_residual(&self) -> f64 {
        self.nu - (self.kappa * self.q * self.q / 8.0 + self.q / 2.0)
    }
}

/// `h*(x, t) = e^{−νt} sin(x/2)^q`, an exact solution of `∂ₜh = Λh`.
pub fn h_star(x: f64, t: f64, kappa: f64, b: f64) -> Result<f64> {
    ensure((0.0..=TAU).contains(&x), "x", || {
        format!("must lie in [0, 2π], got {x}")
    })?;
    ensure(t >= 0.0, "t", || format!("must be ≥ 0, got {t}"))?;
    let p = ExponentPair::new(kappa, b)?;
    Ok(h_star_unchecked(x, t, &p))
}

fn h_star_unchecked(x: f64, t: f64, p: &ExponentPair) -> f64 {
    let s = (x / 2.0).sin().max(0.0);
    (-p.nu * t).exp() * s.powf(p.q)
}

/// Central-difference value of `∂ₜh* − Λh*` with
/// `Λ = (κ/2)∂ₓ² + cot(x/2)∂ₓ − b/(2 sin²(x/2))`.
pub fn generator_residual(x: f64, t: f64, kappa: f64, b: f64, h: f64) -> Result<f64> {
    ensure(h > 0.0 && h.is_finite(), "h", || {
        format!("must be > 0, got {h}")
    })?;
    ensure(x >= 4.0 * h && x <= TAU - 4.0 * h, "x", || {
        format!("must be at least 4h = {} from 0 and 2π, got {x}", 4.0 * h)
    })?;
    ensure(t >= h, "t", || {
        format!("must be ≥ h = {h} for the centered time difference, got {t}")
    })?;
    let p = ExponentPair::new(kappa, b)?;
    let f = |x: f64, t: f64| h_star_unchecked(x, t, &p);
    let mid = f(x, t);
    let dt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
    let dx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
    let dxx = (f(x + h, t) - 2.0 * mid + f(x - h, t)) / (h * h);
    let s2 = (x / 2.0).sin().powi(2);
    let gen = 0.5 * kappa * dxx + dx / (x / 2.0).tan() - b / (2.0 * s2) * mid;
    Ok(dt - gen)
}

/// One trajectory of the angular diffusion with its derivative weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularSample {
    pub x0: f64,
    pub kappa: f64,
    pub b: f64,
    /// `(t, Y_t)` at every multiple of `dt` up to absorption or the horizon.
    pub path: Vec<(f64, f64)>,
    /// `log Φ` at the end of the run; `−∞` after absorption.
    pub log_phi: f64,
    /// Absorption time, `None` if alive at the horizon.
    pub tau: Option<f64>,
    /// Set when the weight fell below `e^{NEGLIGIBLE_LOG_WEIGHT}` and the path was frozen.
    pub negligible: bool,
}

impl AngularSample {
    /// `Φ^b` at the end of the run.
    pub fn weight(&self) -> f64 {
        if self.tau.is_some() {
            0.0
        } else if self.b == 0.0 {
            1.0
        } else {
            (self.b * self.log_phi).exp()
        }
    }
}

/// Euler state of one angular path.
#[derive(Clone, Copy, Debug)]
struct Walker {
    y: f64,
    t: f64,
    log_phi: f64,
    absorbed: Option<f64>,
    frozen: bool,
}

fn inv_sin2_half(y: f64) -> f64 {
    1.0 / (y / 2.0).sin().powi(2)
}

fn boundary_distance(y: f64) -> f64 {
    y.min(TAU - y)
}

impl Walker {
    fn new(x0: f64) -> Self {
        Walker {
            y: x0,
            t: 0.0,
            log_phi: 0.0,
            absorbed: None,
            frozen: false,
        }
    }

    fn alive(&self) -> bool {
        self.absorbed.is_none()
    }

    /// `Φ^b`, zero once absorbed.
    fn weight(&self, b: f64) -> f64 {
        match self.absorbed {
            Some(_) => 0.0,
            None if b == 0.0 => 1.0,
            None => (b * self.log_phi).exp(),
        }
    }

    /// Advances to time `until` with steps `min(dt, d²/100)`.
    fn advance(&mut self, until: f64, kappa: f64, b: f64, dt: f64, stream: &mut RandomStream) {
        let sk = kappa.sqrt();
        while self.alive() && !self.frozen && self.t < until {
            let d = boundary_distance(self.y);
            let h = dt.min(d * d / 100.0).min(until - self.t);
            let y1 = self.y + h / (self.y / 2.0).tan() + sk * h.sqrt() * stream.gaussian();
            self.t += h;
            if !(EPS_ABS..=TAU - EPS_ABS).contains(&y1) {
                self.absorbed = Some(self.t);
                self.log_phi = f64::NEG_INFINITY;
                return;
            }
            self.log_phi -= 0.25 * h * (inv_sin2_half(self.y) + inv_sin2_half(y1));
            self.y = y1;
            if b > 0.0 && b * self.log_phi < NEGLIGIBLE_LOG_WEIGHT {
                self.frozen = true;
            }
        }
        if self.frozen {
            self.t = self.t.max(until);
        }
    }
}

fn check_angular(x0: f64, kappa: f64, b: f64, dt: f64) -> Result<()> {
    check_kappa_b(kappa, b)?;
    ensure(x0 > 0.0 && x0 < TAU, "x0", || {
        format!("must lie in (0, 2π), got {x0}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })
}

/// Euler–Maruyama trajectory from `x0` up to `t_horizon`, with substeps near
/// the boundary and the trapezoid rule for `log Φ`.
pub fn simulate_weighted(
    x0: f64,
    t_horizon: f64,
    kappa: f64,
    b: f64,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<AngularSample> {
    check_angular(x0, kappa, b, dt)?;
    ensure(
        t_horizon >= 0.0 && t_horizon.is_finite(),
        "t_horizon",
        || format!("must be ≥ 0, got {t_horizon}"),
    )?;
    let mut w = Walker::new(x0);
    let mut path = vec![(0.0, x0)];
    let n = (t_horizon / dt).ceil() as usize;
    for j in 1..=n {
        let until = (j as f64 * dt).min(t_horizon);
        w.advance(until, kappa, b, dt, stream);
        if !w.alive() || w.frozen {
            break;
        }
        path.push((w.t, w.y));
    }
    Ok(AngularSample {
        x0,
        kappa,
        b,
        path,
        log_phi: w.log_phi,
        tau: w.absorbed,
        negligible: w.frozen,
    })
}

/// Monte Carlo estimate of `f(x, t) = E[Φ_t^b; t < τ]` at each of `times`
/// (ascending), all read from the same `n` paths.
pub fn estimate_f_times(
    x0: f64,
    times: &[f64],
    kappa: f64,
    b: f64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Vec<Accumulator>> {
    check_angular(x0, kappa, b, dt)?;
    ensure(
        !times.is_empty() && times.windows(2).all(|w| w[0] < w[1]) && times[0] >= 0.0,
        "times",
        || "must be non-empty, ascending and ≥ 0".into(),
    )?;
    let mut acc = vec![Accumulator::new(); times.len()];
    for _ in 0..n {
        let mut w = Walker::new(x0);
        for (k, &t) in times.iter().enumerate() {
            w.advance(t, kappa, b, dt, stream);
            acc[k].push(w.weight(b));
        }
    }
    Ok(acc)
}

/// Monte Carlo estimate of `f(x, t)` from `n` paths.
pub fn estimate_f(
    x0: f64,
    t: f64,
    kappa: f64,
    b: f64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Accumulator> {
    Ok(estimate_f_times(x0, &[t], kappa, b, n, dt, stream)?[0])
}

/// Samples of `h*(Y_s, t − s)·Φ_s^b` at each `s` in `checkpoints` (ascending,
/// within `[0, t]`); a martingale, so every mean equals `h*(x0, t)`.
#[allow(clippy::too_many_arguments)]
pub fn martingale_profile(
    x0: f64,
    t: f64,
    checkpoints: &[f64],
    kappa: f64,
    b: f64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Vec<Accumulator>> {
    check_angular(x0, kappa, b, dt)?;
    ensure(
        checkpoints.windows(2).all(|w| w[0] < w[1])
            && checkpoints.iter().all(|&s| (0.0..=t).contains(&s)),
        "checkpoints",
        || format!("must be ascending within [0, {t}]"),
    )?;
    let p = ExponentPair::new(kappa, b)?;
    let mut acc = vec![Accumulator::new(); checkpoints.len()];
    for _ in 0..n {
        let mut w = Walker::new(x0);
        for (k, &s) in checkpoints.iter().enumerate() {
            w.advance(s, kappa, b, dt, stream);
            let v = if w.alive() {
                h_star_unchecked(w.y, t - s, &p) * w.weight(b)
            } else {
                0.0
            };
            acc[k].push(v);
        }
    }
    Ok(acc)
}

/// Two angular paths driven by the same Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub x0: f64,
    pub y0: f64,
    /// Time at which the first of the two was absorbed, or the horizon.
    pub t_end: f64,
    pub steps: u64,
    /// Largest `|Yʸ − Yˣ| − |y0 − x0|·e^{−t/2}` over all steps; ≤ 0 when contraction holds.
    pub worst_excess: f64,
    pub final_gap: f64,
}

/// Runs a coupled pair with shared increments and shared substeps and
/// records the worst violation of `|Yʸ − Yˣ| ≤ |y0 − x0|·e^{−t/2}`.
pub fn simulate_coupled(
    x0: f64,
    y0: f64,
    t_horizon: f64,
    kappa: f64,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<CoupledRun> {
    check_angular(x0, kappa, 0.0, dt)?;
    check_angular(y0, kappa, 0.0, dt)?;
    let sk = kappa.sqrt();
    let gap0 = (y0 - x0).abs();
    let (mut a, mut c) = (x0, y0);
    let mut t = 0.0;
    let mut steps = 0;
    let mut worst = f64::NEG_INFINITY;
    while t < t_horizon {
        let d = boundary_distance(a).min(boundary_distance(c));
        let h = dt.min(d * d / 100.0).min(t_horizon - t);
        let noise = sk * h.sqrt() * stream.gaussian();
        let a1 = a + h / (a / 2.0).tan() + noise;
        let c1 = c + h / (c / 2.0).tan() + noise;
        t += h;
        steps += 1;
        let out = |y: f64| !(EPS_ABS..=TAU - EPS_ABS).contains(&y);
        if out(a1) || out(c1) {
            break;
        }
        a = a1;
        c = c1;
        worst = worst.max((c - a).abs() - gap0 * (-t / 2.0).exp());
    }
    Ok(CoupledRun {
        x0,
        y0,
        t_end: t,
        steps,
        worst_excess: worst,
        final_gap: (c - a).abs(),
    })
}

/// Arc-length moments `E[L_t^b]` on a time grid with their exponential fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcLengthEstimate {
    pub kappa: f64,
    pub moments: Vec<f64>,
    pub times: Vec<f64>,
    pub grid_x: usize,
    pub dt: f64,
    /// `per_moment[m][k]` accumulates `L_{times[k]}^{moments[m]}`.
    pub per_moment: Vec<Vec<Accumulator>>,
    /// Paths with no surviving grid angle, per time.
    pub empty_arc: Vec<u64>,
    /// Semi-log fit of `E[L_t^b]` against `t` per moment; the slope estimates `−ν(κ, b)`.
    pub fits: Vec<FitResult>,
}

fn check_arc_inputs(
    kappa: f64,
    moments: &[f64],
    times: &[f64],
    grid_x: usize,
    dt: f64,
) -> Result<()> {
    for &b in moments {
        check_kappa_b(kappa, b)?;
    }
    ensure(!moments.is_empty(), "b", || {
        "need at least one moment".into()
    })?;
    ensure(grid_x >= 64, "grid_x", || {
        format!("must be ≥ 64, got {grid_x}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })?;
    ensure(
        !times.is_empty() && times.windows(2).all(|w| w[0] < w[1]) && times[0] > 0.0,
        "times",
        || "must be non-empty, ascending and > 0".into(),
    )
}

/// One radial path's arc lengths `L_t = Σ Φ · 2π/grid_x` at each of `times`.
///
/// All grid angles move under the same driving function, by the exact
/// flow for piecewise-constant driving with Brownian-bridge absorption.
pub fn arc_length_path(
    kappa: f64,
    times: &[f64],
    grid_x: usize,
    dt: f64,
    phi_floor: f64,
    stream: &mut RandomStream,
) -> Vec<f64> {
    let mut angles = BoundaryAngles::uniform_grid(grid_x).with_phi_floor(phi_floor);
    let width = TAU / grid_x as f64;
    let sd = (kappa * dt).sqrt();
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0u64;
    for &t_target in times {
        let target = (t_target / dt - 1e-9).ceil() as u64;
        while steps < target && angles.alive_count() > 0 {
            angles.flow(dt);
            steps += 1;
            let d = sd * stream.gaussian();
            let (lo, hi) = bridge_extrema(stream, d, kappa * dt);
            angles.shift(-d, -hi, -lo, steps as f64 * dt);
        }
        out.push(width * angles.phi_sum());
    }
    out
}

/// Accumulates `L_t^b` over `n` paths for every moment `b` and time in the grid.
pub fn arc_length_moments(
    kappa: f64,
    moments: &[f64],
    times: &[f64],
    n: usize,
    grid_x: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<(Vec<Vec<Accumulator>>, Vec<u64>)> {
    check_arc_inputs(kappa, moments, times, grid_x, dt)?;
    let floor = if moments.iter().all(|&b| b > 0.0) {
        ARC_PHI_FLOOR
    } else {
        0.0
    };
    let mut acc = vec![vec![Accumulator::new(); times.len()]; moments.len()];
    let mut empty = vec![0u64; times.len()];
    for _ in 0..n {
        let ls = arc_length_path(kappa, times, grid_x, dt, floor, stream);
        for (k, &l) in ls.iter().enumerate() {
            if l == 0.0 {
                empty[k] += 1;
            }
            for (m, &b) in moments.iter().enumerate() {
                acc[m][k].push(if b == 0.0 { 1.0 } else { l.powf(b) });
            }
        }
    }
    Ok((acc, empty))
}

/// Fits `log E[L_t^b]` against `t` for each moment.
pub fn fit_arc_length(
    kappa: f64,
    moments: &[f64],
    times: &[f64],
    grid_x: usize,
    dt: f64,
    per_moment: Vec<Vec<Accumulator>>,
    empty_arc: Vec<u64>,
) -> Result<ArcLengthEstimate> {
    let mut fits = Vec::with_capacity(moments.len());
    for acc in &per_moment {
        if acc.iter().any(|a| a.mean().is_nan() || a.mean() <= 0.0) {
            return Err(Error::Degenerate(format!(
                "every path lost all {grid_x} grid angles at some time; refine the grid or shorten the time range"
            )));
        }
        let samples: Vec<FitSample> = times
            .iter()
            .zip(acc)
            .map(|(&t, a)| FitSample::new(t, a.mean(), a.stderr()))
            .collect();
        fits.push(fit_exponent(&samples, Axis::SemiLog)?);
    }
    Ok(ArcLengthEstimate {
        kappa,
        moments: moments.to_vec(),
        times: times.to_vec(),
        grid_x,
        dt,
        per_moment,
        empty_arc,
        fits,
    })
}

/// Estimates `E[L_t^b]` on the time grid from `n` coupled-grid paths and fits its decay rate.
pub fn estimate_arc_length_moment(
    kappa: f64,
    b: f64,
    times: &[f64],
    n: usize,
    grid_x: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<ArcLengthEstimate> {
    let (acc, empty) = arc_length_moments(kappa, &[b], times, n, grid_x, dt, stream)?;
    fit_arc_length(kappa, &[b], times, grid_x, dt, acc, empty)
}

/// The π-extremal distance proxy `𝔏(r) ≈ −log L_{T(r)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalProxy {
    pub r: f64,
    /// `+∞` when no arc survives.
    pub value: f64,
    pub arc_length: f64,
    pub hit_time: f64,
}

impl ExtremalProxy {
    /// The proxy agrees with the true π-extremal distance only up to a bounded additive constant.
    pub const CAVEAT: &'static str =
        "exp(-L) is comparable to the surviving arc length up to bounded multiplicative constants";
}

/// Reads `−log L_{T(r)}` off a radial run that tracked a uniform grid and recorded radius `r`.
pub fn extremal_distance_proxy(
    state: &crate::loewner::RadialHullState,
    r: f64,
) -> Result<ExtremalProxy> {
    ensure(r > 0.0 && r < 1.0, "r", || {
        format!("must lie in (0, 1), got {r}")
    })?;
    let hit = state.hits.iter().find(|h| h.r == r).ok_or_else(|| {
        Error::domain(
            "r",
            format!("radius {r} was not among the recorded hit radii"),
        )
    })?;
    ensure(hit.arc_length.is_finite(), "state", || {
        "run did not track a uniform angle grid".into()
    })?;
    let value = if hit.arc_length > 0.0 {
        -hit.arc_length.ln()
    } else {
        f64::INFINITY
    };
    Ok(ExtremalProxy {
        r,
        value,
        arc_length: hit.arc_length,
        hit_time: hit.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::{simulate_radial, RadialOptions, StopRule};
    use std::f64::consts::PI;

    #[test]
    fn landmark_exponents() {
        assert!((nu(6.0, 1.0).unwrap() - 1.25).abs() < 1e-15);
        assert!((nu(2.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((nu(6.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        for b in [0.0, 0.5, 1.0, 3.0] {
            assert!((nu(0.0, b).unwrap() - b / 2.0).abs() < 1e-15);
            assert!((q(0.0, b).unwrap() - b).abs() < 1e-15);
        }
        assert!((q(6.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((q(6.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(nu(6.0, -1.0).is_err());
        assert!(q(1e-9, 1.0).unwrap() - 1.0 < 1e-6);
    }

    #[test]
    fn pair_resubstitution() {
        for &(k, b) in &[
            (6.0, 1.0),
            (6.0, 2.0),
            (2.0, 1.0),
            (2.0, 3.0),
            (8.0, 0.3),
            (0.5, 4.0),
        ] {
            let p = ExponentPair::new(k, b).unwrap();
            assert!(p.boundary_residual().abs() < 1e-12, "{p:?}");
            assert!(p.rate_residual().abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn h_star_values() {
        assert!((h_star(PI, 0.0, 3.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(h_star(0.0, 1.0, 6.0, 1.0).unwrap(), 0.0);
        assert!(h_star(TAU, 1.0, 6.0, 1.0).unwrap().abs() < 1e-15);
        let want = (-1.25f64).exp() * (PI / 4.0).sin();
        assert!((h_star(PI / 2.0, 1.0, 6.0, 1.0).unwrap() - want).abs() < 1e-15);
        for x in [0.3, 1.0, 4.0] {
            let r = h_star(x, 2.0, 6.0, 1.0).unwrap() / h_star(x, 3.0, 6.0, 1.0).unwrap();
            assert!((r - 1.25f64.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_second_order() {
        let r1 = generator_residual(PI, 1.0, 6.0, 1.0, 1e-3).unwrap();
        assert!(r1.abs() < 1e-4);
        assert!(
            generator_residual(PI / 2.0, 2.0, 2.0, 3.0, 1e-3)
                .unwrap()
                .abs()
                < 1e-4
        );
        let a = generator_residual(2.0, 1.0, 6.0, 2.0, 1e-2).unwrap();
        let b = generator_residual(2.0, 1.0, 6.0, 2.0, 5e-3).unwrap();
        assert!((a / b - 4.0).abs() < 0.2, "ratio {}", a / b);
        assert!(generator_residual(2e-3, 1.0, 6.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn weighted_path_invariants() {
        let mut s = RandomStream::new(5, 0);
        for _ in 0..200 {
            let a = simulate_weighted(1.0, 2.0, 6.0, 1.0, 1e-3, &mut s).unwrap();
            assert!(a.path.iter().all(|&(_, y)| y > 0.0 && y < TAU));
            assert!(a.path.windows(2).all(|w| w[1].0 > w[0].0));
            assert!((0.0..=1.0).contains(&a.weight()));
            if a.tau.is_some() {
                assert_eq!(a.weight(), 0.0);
            }
        }
        let z = simulate_weighted(PI, 1.0, 6.0, 0.0, 1e-3, &mut s).unwrap();
        assert!(z.tau.is_some() || z.weight() == 1.0);
    }

    #[test]
    fn log_phi_non_increasing() {
        let mut s = RandomStream::new(6, 0);
        let mut w = Walker::new(2.0);
        let mut last = 0.0;
        for j in 1..2000 {
            w.advance(j as f64 * 1e-3, 6.0, 1.0, 1e-3, &mut s);
            if !w.alive() {
                break;
            }
            assert!(w.log_phi <= last);
            last = w.log_phi;
        }
    }

    #[test]
    fn coupled_pair_contracts() {
        let mut s = RandomStream::new(9, 0);
        for _ in 0..200 {
            let c = simulate_coupled(1.0, 1.1, 3.0, 6.0, 1e-3, &mut s).unwrap();
            assert!(c.worst_excess <= 1e-12, "{c:?}");
        }
    }

    #[test]
    fn sandwich_at_pi() {
        let mut s = RandomStream::new(1, 0);
        let acc = estimate_f(PI, 1.0, 6.0, 1.0, 20_000, 1e-3, &mut s).unwrap();
        let h = h_star(PI, 1.0, 6.0, 1.0).unwrap();
        let ratio = acc.mean() / h;
        assert!(
            ratio >= 1.0 - 3.0 * acc.stderr() / h && ratio <= 3.0,
            "ratio {ratio}"
        );
        let near = estimate_f(1e-2, 1.0, 6.0, 1.0, 20_000, 1e-3, &mut s).unwrap();
        assert!(near.mean() < acc.mean() / 10.0);
    }

    #[test]
    fn martingale_means_agree() {
        let mut s = RandomStream::new(2, 0);
        let acc =
            martingale_profile(2.0, 2.0, &[0.0, 1.0, 2.0], 6.0, 1.0, 20_000, 1e-3, &mut s).unwrap();
        let h = h_star(2.0, 2.0, 6.0, 1.0).unwrap();
        assert!((acc[0].mean() - h).abs() < 1e-12 * h);
        for a in &acc[1..] {
            assert!(
                (a.mean() - h).abs() < 3.5 * a.stderr(),
                "{} vs {h} ± {}",
                a.mean(),
                a.stderr()
            );
        }
    }

    #[test]
    fn arc_length_bounded_without_weight() {
        let mut s = RandomStream::new(3, 0);
        for _ in 0..20 {
            let ls = arc_length_path(6.0, &[0.5, 1.0, 2.0], 128, 1e-2, 0.0, &mut s);
            assert!(ls.iter().all(|&l| l <= TAU + 1e-9));
            assert!(ls.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
        assert!(
            estimate_arc_length_moment(6.0, 1.0, &[1.0, 2.0, 3.0], 10, 32, 1e-2, &mut s).is_err()
        );
    }

    #[test]
    fn proxy_reads_recorded_radius() {
        let mut s = RandomStream::new(4, 0);
        let opts = RadialOptions {
            grid: Some(128),
            hit_radii: vec![0.9, 0.25],
            ..Default::default()
        };
        let (_, st) =
            simulate_radial(6.0, 0.0, StopRule::HitRadius(0.25), 1e-3, &opts, &mut s).unwrap();
        let near = extremal_distance_proxy(&st, 0.9).unwrap();
        let far = extremal_distance_proxy(&st, 0.25).unwrap();
        assert!(near.arc_length > 4.0 && near.arc_length <= TAU);
        assert!(far.value >= near.value);
        assert!(extremal_distance_proxy(&st, 0.5).is_err());
    }
}
