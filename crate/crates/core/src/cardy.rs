//! Cardy's crossing formula and crossings of thin quadrilaterals in the disk.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::loewner::{first_swallowed, SwallowOptions, SwallowStop};
use crate::stochastic::{Accumulator, RandomStream};

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const SERIES_TOL: f64 = 1e-16;
const SERIES_BUDGET: usize = 100_000;

/// Γ on the whole real line except the poles, by reflection below 1/2.
fn gamma_any(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_any(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// The gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    ensure(x.is_finite() && x > 0.0, "x", || {
        format!("gamma_fn needs x > 0, got {x}")
    })?;
    Ok(gamma_any(x))
}

/// Gauss series for ₂F₁(a, b; c; x), |x| < 1.
fn hyp2f1_series(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..SERIES_BUDGET {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x;
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::BudgetExhausted {
        steps: SERIES_BUDGET as u64,
        what: "hypergeometric series",
    })
}

struct ThirdConstants {
    /// Γ(4/3)Γ(1/3)/Γ(2/3), the value at x = 1.
    at_one: f64,
    /// Γ(4/3)Γ(−1/3)/(Γ(1/3)Γ(2/3)), coefficient of the (1−x)^{1/3} branch.
    singular: f64,
    /// √π / (2^{1/3} Γ(1/3) Γ(7/6)).
    cardy: f64,
}

fn constants() -> &'static ThirdConstants {
    static C: OnceLock<ThirdConstants> = OnceLock::new();
    C.get_or_init(|| {
        let g13 = gamma_any(1.0 / 3.0);
        let g23 = gamma_any(2.0 / 3.0);
        let g43 = gamma_any(4.0 / 3.0);
        ThirdConstants {
            at_one: g43 * g13 / g23,
            singular: g43 * gamma_any(-1.0 / 3.0) / (g13 * g23),
            cardy: PI.sqrt() / (2f64.powf(1.0 / 3.0) * g13 * gamma_any(7.0 / 6.0)),
        }
    })
}

/// Switchover between the direct series and the expansion around 1.
pub const HYP_SWITCH: f64 = 0.5;

fn hyp2f1_third_series(x: f64) -> Result<f64> {
    hyp2f1_series(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, x)
}

// F(a,b;c;x) = A F(a,b;a+b−c+1;1−x) + B (1−x)^{c−a−b} F(c−a,c−b;c−a−b+1;1−x)
// with F(1/3,2/3;2/3;y) = (1−y)^{−1/3}.
fn hyp2f1_third_reflected(x: f64) -> Result<f64> {
    let k = constants();
    let y = 1.0 - x;
    let regular = k.at_one * x.powf(-1.0 / 3.0);
    if y == 0.0 {
        return Ok(regular);
    }
    let tail = hyp2f1_series(1.0, 2.0 / 3.0, 4.0 / 3.0, y)?;
    Ok(regular + k.singular * y.powf(1.0 / 3.0) * tail)
}

/// ₂F₁(1/3, 2/3; 4/3; x) on [0, 1].
pub fn hyp2f1_third(x: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&x), "x", || {
        format!("must lie in [0, 1], got {x}")
    })?;
    if x <= HYP_SWITCH {
        hyp2f1_third_series(x)
    } else {
        hyp2f1_third_reflected(x)
    }
}

/// The constant √π / (2^{1/3} Γ(1/3) Γ(7/6)).
pub fn cardy_constant() -> f64 {
    constants().cardy
}

/// Cardy's crossing function G(x) = C x^{1/3} ₂F₁(1/3, 2/3; 4/3; x).
pub fn cardy_g(x: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&x), "x", || {
        format!("must lie in [0, 1], got {x}")
    })?;
    Ok(cardy_constant() * x.cbrt() * hyp2f1_third(x)?)
}

/// G′(x) = (C/3) (x(1−x))^{−2/3}.
pub fn cardy_g_prime(x: f64) -> Result<f64> {
    ensure(x > 0.0 && x < 1.0, "x", || {
        format!("must lie in (0, 1), got {x}")
    })?;
    Ok(cardy_constant() / 3.0 * (x * (1.0 - x)).powf(-2.0 / 3.0))
}

/// A thin quadrilateral in the unit disk: two arcs of half-width θ around
/// −1 and +1, with the starting point displaced by αθ along the left arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrilateral {
    theta: f64,
    alpha: f64,
}

impl Quadrilateral {
    pub fn new(theta: f64, alpha: f64) -> Result<Self> {
        ensure(theta > 0.0 && theta < PI / 2.0, "theta", || {
            format!("must lie in (0, π/2), got {theta}")
        })?;
        ensure(alpha > -1.0 && alpha < 1.0, "alpha", || {
            format!("must lie in (−1, 1), got {alpha}")
        })?;
        Ok(Quadrilateral { theta, alpha })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Arguments of w₁, w₁′, w₂, w₃, w₄ in counterclockwise order, in [0, 2π).
    pub fn angles(&self) -> [f64; 5] {
        let t = self.theta;
        [PI - t, PI + self.alpha * t, PI + t, 2.0 * PI - t, t]
    }

    /// The five boundary points w₁, w₁′, w₂, w₃, w₄.
    pub fn points(&self) -> [Complex64; 5] {
        self.angles().map(|a| Complex64::from_polar(1.0, a))
    }
}

fn cross_ratio(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    // (a−b)(c−d) / ((c−b)(a−d)); real for concyclic points.
    ((a - b) * (c - d) / ((c - b) * (a - d))).re
}

/// Cross-ratios (c′, c″) with P[E′] = G(c′), P[E″] = G(c″) and c″ ≤ c′.
///
/// c′ uses the target w₄ and c″ the target w₃.
pub fn cross_ratios(q: &Quadrilateral) -> (f64, f64) {
    let (t, a) = (q.theta, q.alpha);
    let c_prime = ((1.0 + a) * t / 2.0).sin() / (t.sin() * ((1.0 - a) * t / 2.0).cos());
    let c_dprime = ((1.0 + a) * t / 2.0).tan() / t.tan();
    (c_prime, c_dprime)
}

/// Cross-ratios evaluated directly from the five boundary points.
pub fn cross_ratios_from_points(q: &Quadrilateral) -> (f64, f64) {
    let [w1, w1p, w2, w3, w4] = q.points();
    (cross_ratio(w1, w1p, w4, w2), cross_ratio(w1, w1p, w3, w2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingResult {
    pub theta: f64,
    pub alpha: f64,
    pub c_prime: f64,
    pub c_dprime: f64,
    #[serde(rename = "G_prime")]
    pub g_prime: f64,
    #[serde(rename = "G_dprime")]
    pub g_dprime: f64,
    pub p_cross: f64,
    /// (√π/6) Γ(1/3)⁻¹ Γ(7/6)⁻¹ (1−α²)^{1/3} θ².
    pub asymptotic: f64,
}

/// Leading small-θ behavior of the crossing probability.
pub fn crossing_asymptotic(q: &Quadrilateral) -> f64 {
    let k = cardy_constant() * 2f64.powf(1.0 / 3.0) / 6.0;
    k * (1.0 - q.alpha * q.alpha).cbrt() * q.theta * q.theta
}

/// P[E] = G(c′) − G(c″).
pub fn crossing_probability(q: &Quadrilateral) -> Result<CrossingResult> {
    let (c_prime, c_dprime) = cross_ratios(q);
    let g_prime = cardy_g(c_prime)?;
    let g_dprime = cardy_g(c_dprime)?;
    // Near θ → 0 both values agree to many digits; integrate G′ directly.
    let p_cross = if c_prime - c_dprime < 1e-3 {
        integrate_g_prime(c_dprime, c_prime)?
    } else {
        g_prime - g_dprime
    };
    Ok(CrossingResult {
        theta: q.theta,
        alpha: q.alpha,
        c_prime,
        c_dprime,
        g_prime,
        g_dprime,
        p_cross: p_cross.max(0.0),
        asymptotic: crossing_asymptotic(q),
    })
}

// Gauss–Legendre, 5 points; exact to degree 9 on a short, smooth interval.
fn integrate_g_prime(lo: f64, hi: f64) -> Result<f64> {
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    let mut acc = 0.0;
    for (x, w) in NODES {
        acc += w * cardy_g_prime(mid + half * x)?;
    }
    Ok(acc * half)
}

/// Indicator tallies of the two crossing events over chordal SLE₆ runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingMonteCarlo {
    /// Runs in which the first swallowing event does not take w₁ without w₄.
    pub e_prime: Accumulator,
    /// Runs in which the first swallowing event takes w₂ without w₃.
    pub e_dprime: Accumulator,
    pub steps: u64,
}

impl CrossingMonteCarlo {
    pub fn merge(&self, other: &CrossingMonteCarlo) -> CrossingMonteCarlo {
        CrossingMonteCarlo {
            e_prime: self.e_prime.merge(&other.e_prime),
            e_dprime: self.e_dprime.merge(&other.e_dprime),
            steps: self.steps + other.steps,
        }
    }
}

/// Boundary points w₁, w₂, w₃, w₄ carried to the real line by the Möbius map
/// sending w₁′ to 0 and the point at angle 0 to ∞.
pub fn chordal_points(q: &Quadrilateral) -> [f64; 4] {
    let a = q.angles();
    let x = |t: f64| ((t - a[1]) / 2.0).sin() / (t / 2.0).sin();
    [x(a[0]), x(a[2]), x(a[3]), x(a[4])]
}

/// Runs chordal SLE₆ from w₁′ `runs` times and records which boundary arc
/// is hit first, the Monte Carlo counterpart of [`crossing_probability`].
pub fn crossing_monte_carlo(
    q: &Quadrilateral,
    runs: usize,
    opts: &SwallowOptions,
    stream: &mut RandomStream,
) -> Result<CrossingMonteCarlo> {
    let points = chordal_points(q);
    let opts = SwallowOptions {
        stop: SwallowStop::FirstEvent,
        ..*opts
    };
    let mut out = CrossingMonteCarlo {
        e_prime: Accumulator::new(),
        e_dprime: Accumulator::new(),
        steps: 0,
    };
    for _ in 0..runs {
        let report = first_swallowed(6.0, 0.0, &points, &opts, stream)?;
        let first = report.events.first().ok_or(Error::BudgetExhausted {
            steps: report.steps,
            what: "the first swallowing event",
        })?;
        let has = |i: usize| first.points.contains(&i);
        out.e_prime.push(f64::from(u8::from(!(has(0) && !has(3)))));
        out.e_dprime.push(f64::from(u8::from(has(1) && !has(2))));
        out.steps += report.steps;
    }
    Ok(out)
}
