//! Power-law and exponential-rate regressions with resampling error bars.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// How the abscissa is transformed before fitting `log y` against it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// `log y` against `log x`.
    LogLog,
    /// `log y` against `x`.
    SemiLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub x: f64,
    pub y: f64,
    /// Standard error of `y`; zero or non-finite means unknown.
    pub stderr: f64,
}

impl FitSample {
    pub fn new(x: f64, y: f64, stderr: f64) -> Self {
        FitSample { x, y, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// max(propagated, jackknife); covers both sampling noise and misfit.
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub axis: Axis,
    pub weighted: bool,
    pub n_points: usize,
    /// Slope propagated from the per-point standard errors, when all are known.
    pub propagated_stderr: Option<f64>,
    /// Leave-one-out jackknife; `None` with fewer than three points.
    pub jackknife_stderr: Option<f64>,
    /// Slopes between adjacent points, in abscissa order; drift here is finite-size bias.
    pub pair_slopes: Vec<f64>,
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    slope_var: f64,
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Line {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).min(1.0)
    } else {
        1.0
    };
    Line {
        slope,
        intercept: my - slope * mx,
        r_squared,
        slope_var: 1.0 / sxx,
    }
}

fn fit_inner(samples: &[FitSample], axis: Axis) -> Result<FitResult> {
    for s in samples {
        ensure(s.y > 0.0 && s.y.is_finite(), "estimate", || {
            format!("estimates must be positive, got {}", s.y)
        })?;
        ensure(
            s.x.is_finite() && (axis == Axis::SemiLog || s.x > 0.0),
            "scale",
            || format!("scales must be positive and finite, got {}", s.x),
        )?;
    }
    let mut pts: Vec<FitSample> = samples.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let x: Vec<f64> = pts
        .iter()
        .map(|s| match axis {
            Axis::LogLog => s.x.ln(),
            Axis::SemiLog => s.x,
        })
        .collect();
    ensure(x.windows(2).any(|w| w[1] > w[0]), "scale", || {
        "need at least two distinct scales".into()
    })?;
    let y: Vec<f64> = pts.iter().map(|s| s.y.ln()).collect();
    // Var(log y) ≈ (se/y)².
    let weighted = pts.iter().all(|s| s.stderr.is_finite() && s.stderr > 0.0);
    let w: Vec<f64> = if weighted {
        pts.iter().map(|s| (s.y / s.stderr).powi(2)).collect()
    } else {
        vec![1.0; pts.len()]
    };
    let line = weighted_line(&x, &y, &w);
    let propagated_stderr = weighted.then(|| line.slope_var.sqrt());

    let n = pts.len();
    let jackknife_stderr = (n >= 3).then(|| {
        let loo: Vec<f64> = (0..n)
            .map(|skip| {
                let keep = |v: &[f64]| -> Vec<f64> {
                    v.iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &a)| a)
                        .collect()
                };
                weighted_line(&keep(&x), &keep(&y), &keep(&w)).slope
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / n as f64;
        let ss: f64 = loo.iter().map(|s| (s - mean).powi(2)).sum();
        ((n - 1) as f64 / n as f64 * ss).sqrt()
    });
    let slope_stderr = propagated_stderr
        .unwrap_or(0.0)
        .max(jackknife_stderr.unwrap_or(0.0));
    let pair_slopes = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0]))
        .collect();

    Ok(FitResult {
        slope: line.slope,
        intercept: line.intercept,
        slope_stderr,
        r_squared: line.r_squared,
        axis,
        weighted,
        n_points: n,
        propagated_stderr,
        jackknife_stderr,
        pair_slopes,
    })
}

/// Fits `y ≈ C·x^slope` (or `C·e^{slope·x}` on [`Axis::SemiLog`]) by weighted least squares.
pub fn fit_exponent(samples: &[FitSample], axis: Axis) -> Result<FitResult> {
    ensure(samples.len() >= 3, "samples", || {
        format!("need at least three samples, got {}", samples.len())
    })?;
    fit_inner(samples, axis)
}

/// Like [`fit_exponent`] but accepts two points, for box-counting fits.
pub(crate) fn fit_loose(samples: &[FitSample], axis: Axis) -> Result<FitResult> {
    ensure(samples.len() >= 2, "samples", || {
        format!("need at least two samples, got {}", samples.len())
    })?;
    fit_inner(samples, axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RandomStream;

    #[test]
    fn exact_power_law() {
        let s: Vec<FitSample> = (8..=14)
            .map(|j| {
                let k = 2f64.powi(j);
                FitSample::new(k, 0.7 * k.powf(-0.625), 0.0)
            })
            .collect();
        let f = fit_exponent(&s, Axis::LogLog).unwrap();
        assert!((f.slope + 0.625).abs() < 1e-12);
        assert!((f.intercept - 0.7f64.ln()).abs() < 1e-10);
        assert!(f.slope_stderr < 1e-12);
        assert!(f.pair_slopes.iter().all(|p| (p + 0.625).abs() < 1e-12));
        assert!(!f.weighted);
    }

    #[test]
    fn constant_and_semilog() {
        let s: Vec<FitSample> = (1..5).map(|t| FitSample::new(t as f64, 3.0, 0.1)).collect();
        assert!(fit_exponent(&s, Axis::LogLog).unwrap().slope.abs() < 1e-14);
        let s: Vec<FitSample> = (1..5)
            .map(|t| FitSample::new(t as f64, (-1.25 * t as f64).exp(), 0.0))
            .collect();
        assert!((fit_exponent(&s, Axis::SemiLog).unwrap().slope + 1.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s: Vec<FitSample> = (1..5).map(|t| FitSample::new(t as f64, 1.0, 0.0)).collect();
        assert!(fit_exponent(&s[..2], Axis::LogLog).is_err());
        s[1].y = 0.0;
        assert!(fit_exponent(&s, Axis::LogLog).is_err());
        let same: Vec<FitSample> = (0..3).map(|_| FitSample::new(2.0, 1.0, 0.0)).collect();
        assert!(fit_exponent(&same, Axis::LogLog).is_err());
    }

    #[test]
    fn refit_is_identical() {
        let s: Vec<FitSample> = (1..8)
            .map(|t| FitSample::new(t as f64, 1.0 / t as f64 + 0.01 * (t % 3) as f64, 0.01))
            .collect();
        assert_eq!(
            fit_exponent(&s, Axis::LogLog).unwrap(),
            fit_exponent(&s, Axis::LogLog).unwrap()
        );
    }

    #[test]
    fn stderr_calibration() {
        let mut rng = RandomStream::new(17, 0);
        let reps = 2000;
        let mut covered = 0;
        for _ in 0..reps {
            let s: Vec<FitSample> = (8..=14)
                .map(|j| {
                    let k = 2f64.powi(j);
                    let truth = k.powf(-0.625);
                    let se = 0.03 * truth;
                    FitSample::new(k, truth + se * rng.gaussian(), se)
                })
                .collect();
            let f = fit_exponent(&s, Axis::LogLog).unwrap();
            if (f.slope + 0.625).abs() <= 1.96 * f.slope_stderr {
                covered += 1;
            }
        }
        let rate = covered as f64 / reps as f64;
        assert!((0.92..=0.995).contains(&rate), "coverage {rate}");
    }
}
