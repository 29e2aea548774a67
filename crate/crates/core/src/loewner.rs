//! Radial and chordal Loewner evolutions with piecewise-constant driving.
//!
//! Each time step composes one exact elementary slit map, so capacity is
//! carried exactly: after `n` radial steps the composed map has
//! `g'(0) = e^{n·dt}`. Tracked boundary points follow the exact flow of the
//! elementary map during a step, and the driving jump between steps is
//! resolved with Brownian-bridge extrema so swallowing is not biased by the
//! step size.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stochastic::{bridge_extrema, RandomStream};

/// Points closer than this to the driving value count as swallowed.
pub const EPS_SWALLOW: f64 = 1e-9;

/// Default step budget for a single evolution.
pub const DEFAULT_MAX_STEPS: u64 = 50_000_000;

/// `K(w) = w / (1 + w)²`, which the radial flow with driving 1 scales by `e^t`.
#[inline]
pub fn koebe(w: Complex64) -> Complex64 {
    let d = Complex64::new(1.0, 0.0) + w;
    w / (d * d)
}

/// Inverse of [`koebe`] on the unit disk.
#[inline]
pub fn koebe_inv(u: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let sq = (one - 4.0 * u).sqrt();
    let base = one - 2.0 * u;
    // The two roots multiply to 1; the larger denominator gives the root inside.
    let (d1, d2) = (base + sq, base - sq);
    let d = if d1.norm_sqr() >= d2.norm_sqr() {
        d1
    } else {
        d2
    };
    2.0 * u / d
}

// On the unit circle both roots have modulus one and are conjugate; the
// elementary maps preserve each half of the circle, so keep the sign of Im.
#[inline]
fn elementary(z: Complex64, delta: Complex64, factor: f64) -> Complex64 {
    let w = z * delta.conj();
    let mut g = koebe_inv(factor * koebe(w));
    if g.norm_sqr() > 1.0 - 1e-12 && g.im * w.im < 0.0 {
        g = g.conj();
    }
    delta * g
}

/// One radial step with driving `delta` (unit complex) for time `dt`.
#[inline]
pub fn radial_step_forward(z: Complex64, delta: Complex64, dt: f64) -> Complex64 {
    elementary(z, delta, dt.exp())
}

/// Inverse of [`radial_step_forward`].
#[inline]
pub fn radial_step_inverse(w: Complex64, delta: Complex64, dt: f64) -> Complex64 {
    elementary(w, delta, (-dt).exp())
}

/// Capacity time at which the deterministic radial slit from 1 reaches radius `r`.
pub fn slit_hit_time(r: f64) -> Result<f64> {
    ensure(r > 0.0 && r < 1.0, "r", || {
        format!("must lie in (0, 1), got {r}")
    })?;
    Ok(((1.0 + r) * (1.0 + r) / (4.0 * r)).ln())
}

/// Driving function sampled once per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    pub kappa: f64,
    pub dt: f64,
    /// `values[0]` is the start point; `values[j]` drives step `j + 1`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl DrivingPath {
    fn new(kappa: f64, dt: f64, start: f64, stream: &RandomStream) -> Self {
        DrivingPath {
            kappa,
            dt,
            values: vec![start],
            seed: stream.seed(),
            stream_id: stream.stream_id(),
        }
    }

    /// Sum of squared increments over the first `steps` steps.
    pub fn quadratic_variation(&self, steps: usize) -> f64 {
        self.values
            .windows(2)
            .take(steps)
            .map(|w| (w[1] - w[0]).powi(2))
            .sum()
    }
}

/// Boundary points of the disk followed through a radial evolution.
///
/// Each alive point stores `(cos(Y/2), sin(Y/2))` of its angle `Y ∈ (0, 2π)`
/// measured from the driving value, and `Φ = |g_t'|` at the point. During a
/// step with fixed driving, `cos(Y/2)` decays by exactly `e^{−dt/2}`.
#[derive(Clone, Debug)]
pub struct BoundaryAngles {
    initial: Vec<f64>,
    swallowed_at: Vec<Option<f64>>,
    final_phi: Vec<f64>,
    alive: Vec<usize>,
    c: Vec<f64>,
    s: Vec<f64>,
    phi: Vec<f64>,
    /// Points whose Φ drops below this are treated as swallowed.
    phi_floor: f64,
}

impl BoundaryAngles {
    /// Tracks points given by their angle `Y` relative to the driving value.
    pub fn new(relative: &[f64]) -> Result<Self> {
        for &y in relative {
            ensure(y > 0.0 && y < TAU, "angle", || {
                format!("relative angles must lie in (0, 2π), got {y}")
            })?;
        }
        let n = relative.len();
        Ok(BoundaryAngles {
            initial: relative.to_vec(),
            swallowed_at: vec![None; n],
            final_phi: vec![0.0; n],
            alive: (0..n).collect(),
            c: relative.iter().map(|y| (y / 2.0).cos()).collect(),
            s: relative.iter().map(|y| (y / 2.0).sin()).collect(),
            phi: vec![1.0; n],
            phi_floor: 0.0,
        })
    }

    /// `n` angles at the midpoints of a uniform grid, relative to the driving value.
    pub fn uniform_grid(n: usize) -> Self {
        let ys: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * TAU / n as f64).collect();
        Self::new(&ys).expect("midpoints lie in (0, 2π)")
    }

    pub fn with_phi_floor(mut self, floor: f64) -> Self {
        self.phi_floor = floor;
        self
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn swallowed_at(&self, i: usize) -> Option<f64> {
        self.swallowed_at[i]
    }

    fn position(&self, i: usize) -> Option<usize> {
        self.alive.iter().position(|&k| k == i)
    }

    /// Current angle `Y` of point `i` relative to the driving value, if alive.
    pub fn relative_angle(&self, i: usize) -> Option<f64> {
        self.position(i).map(|p| 2.0 * self.s[p].atan2(self.c[p]))
    }

    /// `Φ = |g_t'|` at point `i`; zero once swallowed.
    pub fn derivative(&self, i: usize) -> f64 {
        self.position(i).map_or(self.final_phi[i], |p| self.phi[p])
    }

    /// `Σ Φ` over alive points.
    pub fn phi_sum(&self) -> f64 {
        self.phi.iter().sum()
    }

    fn kill(&mut self, p: usize, t: f64) {
        let i = self.alive[p];
        self.swallowed_at[i] = Some(t);
        self.final_phi[i] = 0.0;
        self.alive.swap_remove(p);
        self.c.swap_remove(p);
        self.s.swap_remove(p);
        self.phi.swap_remove(p);
    }

    /// Exact flow for `dt` with the driving value held fixed.
    pub fn flow(&mut self, dt: f64) {
        let decay = (-0.5 * dt).exp();
        for p in 0..self.c.len() {
            let c1 = self.c[p] * decay;
            let s1 = (1.0 - c1 * c1).sqrt();
            self.phi[p] *= self.s[p] * decay / s1;
            self.c[p] = c1;
            self.s[p] = s1;
        }
    }

    /// Moves every angle by `shift` (so `Y ← Y + shift`) along a Brownian
    /// bridge whose running extremes are `lo ≤ min(0, shift)` and
    /// `hi ≥ max(0, shift)`. Points the bridge carries to 0 or 2π are
    /// swallowed at time `t`.
    pub fn shift(&mut self, shift: f64, lo: f64, hi: f64, t: f64) {
        // Y + lo ≤ 0  ⇔  c ≥ cos(−lo/2);  Y + hi ≥ 2π  ⇔  c ≤ −cos(hi/2).
        let low_cut = if -lo >= TAU {
            f64::NEG_INFINITY
        } else {
            (-lo / 2.0).cos()
        };
        let high_cut = if hi >= TAU {
            f64::INFINITY
        } else {
            -(hi / 2.0).cos()
        };
        let (sn, cs) = (shift / 2.0).sin_cos();
        let mut p = 0;
        while p < self.c.len() {
            let (c, s) = (self.c[p], self.s[p]);
            if c >= low_cut || c <= high_cut || self.phi[p] < self.phi_floor {
                self.kill(p, t);
                continue;
            }
            let c1 = c * cs - s * sn;
            let s1 = s * cs + c * sn;
            if s1 <= EPS_SWALLOW {
                self.kill(p, t);
                continue;
            }
            self.c[p] = c1;
            self.s[p] = s1;
            p += 1;
        }
    }
}

/// When a radial evolution stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Run until capacity time `t_max`.
    Time(f64),
    /// Run until the hull reaches the circle of radius `r`.
    HitRadius(f64),
}

#[derive(Clone, Debug)]
pub struct RadialOptions {
    /// Boundary angles `x` whose images are followed; each must differ from θ₀.
    pub tracked: Vec<f64>,
    /// Use a uniform grid of this many angles instead of `tracked`.
    pub grid: Option<usize>,
    pub phi_floor: f64,
    /// Radii at which to record hull-hitting snapshots (decreasing not required).
    pub hit_radii: Vec<f64>,
    /// Keep the tip of every step (needed for hitting radii and trace output).
    pub record_tips: bool,
    pub max_steps: u64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            tracked: Vec::new(),
            grid: None,
            phi_floor: 0.0,
            hit_radii: Vec::new(),
            record_tips: false,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// The state of the hull when it first reaches the circle of radius `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialHit {
    pub r: f64,
    /// Capacity time T(r).
    pub t: f64,
    /// Number of steps taken; tips `0..steps` form the hull trace.
    pub steps: usize,
    /// `Σ Φ · 2π/n` over alive grid angles at T(r); meaningful for grid tracking.
    pub arc_length: f64,
    pub alive: usize,
}

#[derive(Clone, Debug)]
pub struct RadialHullState {
    pub t: f64,
    pub steps: usize,
    pub dt: f64,
    pub angles: BoundaryAngles,
    /// Tip of the hull after each step, `g_{t_j}^{-1}(δ_j)`.
    pub tips: Vec<Complex64>,
    /// Smallest tip modulus seen so far; an upper bound for ρ(t).
    pub min_tip_modulus: f64,
    pub hits: Vec<RadialHit>,
    grid_weight: Option<f64>,
    drivers: Vec<Complex64>,
}

impl RadialHullState {
    /// Bracket for the distance ρ(t) from the origin to the hull.
    pub fn origin_distance_bounds(&self) -> (f64, f64) {
        let e = (-self.t).exp();
        (e / 4.0, e.min(self.min_tip_modulus))
    }

    /// Applies the inverse of the composed map after `steps` steps to `w`.
    pub fn inverse_map(&self, w: Complex64, steps: usize) -> Complex64 {
        let mut z = w;
        for j in (0..steps).rev() {
            z = radial_step_inverse(z, self.drivers[j], self.dt);
        }
        z
    }

    /// Applies the composed forward map after `steps` steps to `z`.
    pub fn forward_map(&self, z: Complex64, steps: usize) -> Complex64 {
        let mut w = z;
        for j in 0..steps {
            w = radial_step_forward(w, self.drivers[j], self.dt);
        }
        w
    }

    /// Arc-length `Σ Φ · 2π/n` over alive grid angles, if tracking a uniform grid.
    pub fn arc_length(&self) -> Option<f64> {
        self.grid_weight.map(|w| w * self.angles.phi_sum())
    }
}

/// Capacity time at which the recorded hull first reached radius `r`.
pub fn hull_hit_time(state: &RadialHullState, r: f64) -> Result<f64> {
    ensure(r > 0.0 && r < 1.0, "r", || {
        format!("must lie in (0, 1), got {r}")
    })?;
    if let Some(h) = state.hits.iter().find(|h| h.r == r) {
        return Ok(h.t);
    }
    ensure(!state.tips.is_empty(), "state", || {
        "hull was run without tip recording".into()
    })?;
    state
        .tips
        .iter()
        .position(|z| z.norm() <= r)
        .map(|j| (j + 1) as f64 * state.dt)
        .ok_or(Error::BudgetExhausted {
            steps: state.steps as u64,
            what: "hull did not reach the requested radius",
        })
}

/// Radial SLE_κ in the unit disk from `e^{iθ₀}` toward 0.
pub fn simulate_radial(
    kappa: f64,
    theta0: f64,
    stop: StopRule,
    dt: f64,
    opts: &RadialOptions,
    stream: &mut RandomStream,
) -> Result<(DrivingPath, RadialHullState)> {
    ensure(kappa >= 0.0 && kappa.is_finite(), "kappa", || {
        format!("must be ≥ 0, got {kappa}")
    })?;
    ensure((0.0..TAU).contains(&theta0), "theta0", || {
        format!("must lie in [0, 2π), got {theta0}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })?;
    for &r in &opts.hit_radii {
        ensure(r > 0.0 && r < 1.0, "r", || {
            format!("hit radii must lie in (0, 1), got {r}")
        })?;
    }
    let (t_max, r_stop) = match stop {
        StopRule::Time(t) => {
            ensure(t >= 0.0 && t.is_finite(), "t_max", || {
                format!("must be ≥ 0, got {t}")
            })?;
            (t, 0.0)
        }
        StopRule::HitRadius(r) => {
            ensure(r > 0.0 && r < 1.0, "r", || {
                format!("must lie in (0, 1), got {r}")
            })?;
            (f64::INFINITY, r)
        }
    };
    let need_tips = opts.record_tips || r_stop > 0.0 || !opts.hit_radii.is_empty();

    let (angles, grid_weight) = match opts.grid {
        Some(n) => (BoundaryAngles::uniform_grid(n), Some(TAU / n as f64)),
        None => {
            let rel: Vec<f64> = opts
                .tracked
                .iter()
                .map(|x| (x - theta0).rem_euclid(TAU))
                .collect();
            (BoundaryAngles::new(&rel)?, None)
        }
    };
    let mut radii: Vec<f64> = opts.hit_radii.clone();
    radii.sort_by(|a, b| b.total_cmp(a));
    let mut next_radius = 0;

    let mut state = RadialHullState {
        t: 0.0,
        steps: 0,
        dt,
        angles: angles.with_phi_floor(opts.phi_floor),
        tips: Vec::new(),
        min_tip_modulus: 1.0,
        hits: Vec::new(),
        grid_weight,
        drivers: Vec::new(),
    };
    let mut path = DrivingPath::new(kappa, dt, theta0, stream);
    let sd = (kappa * dt).sqrt();
    let mut theta = theta0;

    let n_steps_time = if t_max.is_finite() {
        (t_max / dt - 1e-9).ceil().max(0.0) as u64
    } else {
        u64::MAX
    };
    loop {
        if state.steps as u64 >= n_steps_time {
            break;
        }
        if state.steps as u64 >= opts.max_steps {
            return Err(Error::BudgetExhausted {
                steps: opts.max_steps,
                what: "radial evolution",
            });
        }
        let delta = Complex64::from_polar(1.0, theta);
        state.drivers.push(delta);
        state.angles.flow(dt);
        state.steps += 1;
        state.t = state.steps as f64 * dt;

        if need_tips {
            let tip = state.inverse_map(delta, state.steps);
            state.min_tip_modulus = state.min_tip_modulus.min(tip.norm());
            state.tips.push(tip);
            while next_radius < radii.len() && state.min_tip_modulus <= radii[next_radius] {
                state.hits.push(RadialHit {
                    r: radii[next_radius],
                    t: state.t,
                    steps: state.steps,
                    arc_length: state.arc_length().unwrap_or(f64::NAN),
                    alive: state.angles.alive_count(),
                });
                next_radius += 1;
            }
        }

        let d = sd * stream.gaussian();
        let (lo, hi) = bridge_extrema(stream, d, kappa * dt);
        // Y = x − θ, so a driving move of d shifts every Y by −d.
        state.angles.shift(-d, -hi, -lo, state.t);
        theta += d;
        path.values.push(theta);

        if r_stop > 0.0 && state.min_tip_modulus <= r_stop && next_radius >= radii.len() {
            break;
        }
    }
    Ok((path, state))
}

/// A boundary point of the half-plane followed through a chordal evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub x: f64,
    /// Current image `g̃_t(x)` while alive; the last image once swallowed.
    pub image: f64,
    pub swallowed_at: Option<f64>,
    /// Index of the swallow event that took this point.
    pub event: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordalHullState {
    pub t: f64,
    pub driving: f64,
    pub points: Vec<TrackedPoint>,
}

impl ChordalHullState {
    fn new(delta0: f64, points: &[f64]) -> Result<Self> {
        for (i, &x) in points.iter().enumerate() {
            ensure(x.is_finite() && x != delta0, "points", || {
                format!("point {x} coincides with the start")
            })?;
            ensure(points[..i].iter().all(|&y| y != x), "points", || {
                format!("duplicate point {x}")
            })?;
        }
        Ok(ChordalHullState {
            t: 0.0,
            driving: delta0,
            points: points
                .iter()
                .map(|&x| TrackedPoint {
                    x,
                    image: x,
                    swallowed_at: None,
                    event: None,
                })
                .collect(),
        })
    }

    /// Exact flow for `dt` with fixed driving: `(g − W)² += 4 dt`.
    fn flow(&mut self, dt: f64) {
        let w = self.driving;
        for p in self.points.iter_mut().filter(|p| p.swallowed_at.is_none()) {
            let d = p.image - w;
            p.image = w + d.signum() * (d * d + 4.0 * dt).sqrt();
        }
    }

    /// Moves the driving value by `d` along a bridge with extremes `lo`, `hi`;
    /// returns the indices crossed.
    fn jump(&mut self, d: f64, lo: f64, hi: f64) -> Vec<usize> {
        let w = self.driving;
        let crossed = self
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.swallowed_at.is_none()
                    && (p.image <= w + hi && p.image > w || p.image >= w + lo && p.image < w)
            })
            .map(|(i, _)| i)
            .collect();
        self.driving = w + d;
        crossed
    }

    fn swallow(&mut self, idx: &[usize], event: usize) {
        for &i in idx {
            self.points[i].swallowed_at = Some(self.t);
            self.points[i].event = Some(event);
        }
    }
}

/// Chordal SLE_κ in the upper half-plane with a fixed step.
///
/// Tracked points are swallowed when the bridge of the driving function
/// reaches their image during a step.
pub fn simulate_chordal(
    kappa: f64,
    delta0: f64,
    t_max: f64,
    dt: f64,
    tracked: &[f64],
    stream: &mut RandomStream,
) -> Result<(DrivingPath, ChordalHullState)> {
    ensure(kappa >= 0.0 && kappa.is_finite(), "kappa", || {
        format!("must be ≥ 0, got {kappa}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })?;
    ensure(t_max >= 0.0 && t_max.is_finite(), "t_max", || {
        format!("must be ≥ 0, got {t_max}")
    })?;
    let n = (t_max / dt - 1e-9).ceil().max(0.0) as u64;
    ensure(n <= DEFAULT_MAX_STEPS, "t_max", || {
        format!("{n} steps exceed the step budget")
    })?;
    let mut state = ChordalHullState::new(delta0, tracked)?;
    let mut path = DrivingPath::new(kappa, dt, delta0, stream);
    let sd = (kappa * dt).sqrt();
    let mut events = 0;
    for step in 1..=n {
        state.flow(dt);
        state.t = step as f64 * dt;
        let d = sd * stream.gaussian();
        let (lo, hi) = bridge_extrema(stream, d, kappa * dt);
        let crossed = state.jump(d, lo, hi);
        if !crossed.is_empty() {
            state.swallow(&crossed, events);
            events += 1;
        }
        path.values.push(state.driving);
    }
    Ok((path, state))
}

/// When [`first_swallowed`] stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwallowStop {
    FirstEvent,
    AllPoints,
}

/// Step control for [`first_swallowed`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwallowOptions {
    /// Upper bound on the step size; the only bound when κ = 0.
    pub dt_max: f64,
    /// Driving increments are about `step_fraction` times the nearest gap.
    pub step_fraction: f64,
    /// The innermost `k` points on a side are swallowed together once the
    /// `k`-th gap is below `resolve_ratio` times both the next gap beyond it
    /// and the nearest gap on the other side.
    pub resolve_ratio: f64,
    pub t_max: f64,
    pub max_steps: u64,
    pub stop: SwallowStop,
}

impl Default for SwallowOptions {
    fn default() -> Self {
        SwallowOptions {
            dt_max: f64::INFINITY,
            step_fraction: 0.1,
            resolve_ratio: 1e-9,
            t_max: f64::INFINITY,
            max_steps: 10_000_000,
            stop: SwallowStop::FirstEvent,
        }
    }
}

/// One swallowing event: the listed points disappear at the same time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwallowEvent {
    pub t: f64,
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwallowReport {
    pub events: Vec<SwallowEvent>,
    /// Swallow time per point, `None` if alive when the run stopped.
    pub times: Vec<Option<f64>>,
    pub horizon_reached: bool,
    pub steps: u64,
    pub state: ChordalHullState,
}

impl SwallowReport {
    /// Index of the event that swallowed point `i`.
    pub fn event_of(&self, i: usize) -> Option<usize> {
        self.events.iter().position(|e| e.points.contains(&i))
    }
}

/// Runs chordal SLE_κ from `delta0` and reports the order in which the given
/// boundary points are swallowed, with simultaneous swallows grouped.
///
/// The step adapts to the nearest gap so that the approach of the driving
/// value to a point is resolved on every scale. When the hull pinches off a
/// region containing several points, their gaps shrink together with a
/// ratio that stays bounded away from 0; they are then swallowed as one
/// event once the outermost of them is negligible against the gaps beyond.
pub fn first_swallowed(
    kappa: f64,
    delta0: f64,
    points: &[f64],
    opts: &SwallowOptions,
    stream: &mut RandomStream,
) -> Result<SwallowReport> {
    ensure(kappa >= 0.0 && kappa.is_finite(), "kappa", || {
        format!("must be ≥ 0, got {kappa}")
    })?;
    ensure(opts.dt_max > 0.0, "dt_max", || {
        format!("must be > 0, got {}", opts.dt_max)
    })?;
    ensure(
        kappa > 0.0 || opts.dt_max.is_finite() && opts.t_max.is_finite(),
        "t_max",
        || "κ = 0 needs a finite step and horizon".into(),
    )?;
    ensure(!points.is_empty(), "points", || {
        "need at least one point".into()
    })?;
    let mut state = ChordalHullState::new(delta0, points)?;
    let scale = points
        .iter()
        .map(|x| (x - delta0).abs())
        .fold(0.0, f64::max);
    // Alive points in increasing order; the order never changes while alive.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].total_cmp(&points[j]));
    let mut events: Vec<SwallowEvent> = Vec::new();
    let mut steps = 0u64;
    let mut horizon_reached = false;
    let mut gaps_right: Vec<f64> = Vec::with_capacity(points.len());
    let mut gaps_left: Vec<f64> = Vec::with_capacity(points.len());

    loop {
        let done = match opts.stop {
            SwallowStop::FirstEvent => !events.is_empty(),
            SwallowStop::AllPoints => order.is_empty(),
        };
        if done {
            break;
        }
        if state.t >= opts.t_max {
            horizon_reached = true;
            break;
        }
        if steps >= opts.max_steps {
            return Err(Error::BudgetExhausted {
                steps,
                what: "chordal swallowing order",
            });
        }
        let w = state.driving;
        let split = order.partition_point(|&i| state.points[i].image < w);
        let near_left = if split > 0 {
            w - state.points[order[split - 1]].image
        } else {
            f64::INFINITY
        };
        let near_right = order
            .get(split)
            .map_or(f64::INFINITY, |&i| state.points[i].image - w);
        let mut dt = opts.dt_max;
        if kappa > 0.0 {
            dt = dt.min((opts.step_fraction * near_left.min(near_right)).powi(2) / kappa);
        }
        dt = dt.min(opts.t_max - state.t).max(f64::MIN_POSITIVE);

        for &i in &order {
            let p = &mut state.points[i];
            let d = p.image - w;
            p.image = w + d.signum() * (d * d + 4.0 * dt).sqrt();
        }
        state.t += dt;
        steps += 1;
        let d = (kappa * dt).sqrt() * stream.gaussian();
        let (lo, hi) = bridge_extrema(stream, d, kappa * dt);
        let w1 = w + d;
        state.driving = w1;

        // Points the bridge reaches are taken along with everything nearer.
        let crossed_right = order[split..]
            .iter()
            .take_while(|&&i| state.points[i].image <= w + hi)
            .count();
        let crossed_left = order[..split]
            .iter()
            .rev()
            .take_while(|&&i| state.points[i].image >= w + lo)
            .count();
        let mut take_right = crossed_right;
        let mut take_left = crossed_left;
        if take_right == 0 && take_left == 0 {
            gaps_right.clear();
            gaps_right.extend(order[split..].iter().map(|&i| state.points[i].image - w1));
            gaps_left.clear();
            gaps_left.extend(
                order[..split]
                    .iter()
                    .rev()
                    .map(|&i| w1 - state.points[i].image),
            );
            let other_right = gaps_left.first().copied().unwrap_or(f64::INFINITY);
            let other_left = gaps_right.first().copied().unwrap_or(f64::INFINITY);
            let floor = GAP_FLOOR_ULPS * f64::EPSILON * w1.abs().max(scale);
            take_right =
                resolved_cluster(&gaps_right, other_right, scale, opts.resolve_ratio, floor);
            take_left = resolved_cluster(&gaps_left, other_left, scale, opts.resolve_ratio, floor);
        }
        if take_right > 0 {
            let idx: Vec<usize> = order[split..split + take_right].to_vec();
            let e = events.len();
            state.swallow(&idx, e);
            events.push(SwallowEvent {
                t: state.t,
                points: idx,
            });
        }
        if take_left > 0 {
            let idx: Vec<usize> = order[split - take_left..split]
                .iter()
                .rev()
                .copied()
                .collect();
            let e = events.len();
            state.swallow(&idx, e);
            events.push(SwallowEvent {
                t: state.t,
                points: idx,
            });
        }
        if take_right > 0 || take_left > 0 {
            order.retain(|&i| state.points[i].swallowed_at.is_none());
        }
    }
    let times = state.points.iter().map(|p| p.swallowed_at).collect();
    Ok(SwallowReport {
        events,
        times,
        horizon_reached,
        steps,
        state,
    })
}

/// A gap this many ulps of the driving value cannot shrink further in f64.
const GAP_FLOOR_ULPS: f64 = 64.0;
/// At the floor, a cluster ends at the first gap this much smaller than the next.
const FLOOR_SPLIT_RATIO: f64 = 1e-3;

/// Number of innermost points on one side that are ready to be swallowed.
///
/// `gaps` are distances to the driving value, nearest first. Once the nearest
/// gap is below `floor` it is taken as hit, together with the points up to the
/// first gap ratio below [`FLOOR_SPLIT_RATIO`].
fn resolved_cluster(gaps: &[f64], other_gap: f64, scale: f64, ratio: f64, floor: f64) -> usize {
    let at_floor = gaps.first().is_some_and(|&g| g <= floor);
    let ratio = if at_floor {
        ratio.max(FLOOR_SPLIT_RATIO)
    } else {
        ratio
    };
    for k in 1..=gaps.len() {
        let beyond = gaps.get(k).copied().unwrap_or(f64::INFINITY);
        let mut reference = beyond.min(other_gap);
        if !reference.is_finite() {
            reference = scale;
        }
        if gaps[k - 1] < ratio * reference {
            return k;
        }
    }
    usize::from(at_floor)
}

/// Change of coordinates from a radial evolution to a chordal one aimed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateChange {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Argument of `e_t = g_t(1)`.
    pub e_arg: Vec<f64>,
    /// The transform stopped because 1 was (nearly) swallowed.
    pub truncated: bool,
}

/// Transforms a radial driving path into the chordal time `u` and driving `β`.
///
/// With `Y` the angle of `e_t` relative to the driving value, `γ = cot(Y/2)`,
/// `a = |g_t'(1)|`, `∂_t b = −(1+γ²)aγ/2`, `∂_t u = (1+γ²)²a²/4`, and
/// `β = aγ + b`. Within each step all three integrals are evaluated in closed
/// form along the exact flow; the bridge between steps decides whether 1 is
/// swallowed.
pub fn radial_to_chordal(
    radial: &DrivingPath,
    stream: &mut RandomStream,
) -> Result<CoordinateChange> {
    let theta0 = radial.values[0];
    let y0 = (-theta0).rem_euclid(TAU);
    ensure(y0 > 0.0 && y0 < TAU, "theta0", || {
        "start point must differ from 1".into()
    })?;
    let dt = radial.dt;
    let decay = (-dt).exp();
    let (mut c, mut s) = ((y0 / 2.0).cos(), (y0 / 2.0).sin());
    let (mut a, mut b, mut u) = (1.0, 0.0, 0.0);
    let mut e_arg = 0.0;
    let n = radial.values.len();
    let mut out = CoordinateChange {
        t: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
        beta: Vec::with_capacity(n),
        e_arg: Vec::with_capacity(n),
        truncated: false,
    };
    let record =
        |out: &mut CoordinateChange, t: f64, c: f64, s: f64, a: f64, b: f64, u: f64, e: f64| {
            let g = c / s;
            out.t.push(t);
            out.u.push(u);
            out.a.push(a);
            out.b.push(b);
            out.gamma.push(g);
            out.beta.push(a * g + b);
            out.e_arg.push(e);
        };
    record(&mut out, 0.0, c, s, a, b, u, e_arg);
    for j in 1..n {
        let theta = radial.values[j - 1];
        // Flow with fixed driving.
        let v0 = c * c;
        let c1 = c * (-0.5 * dt).exp();
        let v1 = c1 * c1;
        let s1 = (1.0 - v1).sqrt();
        b += 0.5 * a * s * c * (decay - 1.0) / ((1.0 - v1) * (1.0 - v0));
        u += a * a * (1.0 - v0) / 4.0 * (1.0 - decay) * (2.0 - v0 - v1)
            / (2.0 * (1.0 - v0).powi(2) * (1.0 - v1).powi(2));
        a *= s * (-0.5 * dt).exp() / s1;
        c = c1;
        s = s1;
        // Driving jump; Y moves by −d.
        let d = radial.values[j] - radial.values[j - 1];
        let (lo, hi) = bridge_extrema(stream, d, radial.kappa * dt);
        let y = 2.0 * s.atan2(c);
        if y - hi <= 0.0 || y - lo >= TAU {
            out.truncated = true;
            break;
        }
        let y1 = y - d;
        c = (y1 / 2.0).cos();
        s = (y1 / 2.0).sin();
        if s <= EPS_SWALLOW.sqrt() {
            out.truncated = true;
            break;
        }
        e_arg = theta + d + y1;
        record(&mut out, j as f64 * dt, c, s, a, b, u, e_arg);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_floor_resolves_a_stalled_point() {
        // Nearest gap at the f64 floor of |w| ≈ 22, next point 10⁻⁶ beyond: swallowed alone.
        let floor = GAP_FLOOR_ULPS * f64::EPSILON * 22.0;
        assert_eq!(
            resolved_cluster(&[2e-15, 1.1e-6], 37.0, 4.0, 1e-9, floor),
            1
        );
        assert_eq!(resolved_cluster(&[2e-15, 1.1e-6], 37.0, 4.0, 1e-9, 0.0), 0);
        // Points pinched off together stay one event at the floor.
        assert_eq!(
            resolved_cluster(&[2e-15, 5e-15, 1.0], 37.0, 4.0, 1e-9, floor),
            2
        );
    }
    use crate::stochastic::Accumulator;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn koebe_roundtrip() {
        for z in [
            c(0.3, 0.1),
            c(-0.5, 0.4),
            c(0.0, -0.9),
            c(0.95, 0.0),
            c(1e-6, 0.0),
        ] {
            let back = koebe_inv(koebe(z));
            assert!((back - z).norm() < 1e-12, "{z} → {back}");
        }
    }

    #[test]
    fn elementary_map_normalization() {
        let delta = Complex64::from_polar(1.0, 0.7);
        for dt in [1e-4, 1e-2, 0.5] {
            let eps = 1e-10;
            let fwd = radial_step_forward(c(eps, 0.0), delta, dt) / eps;
            assert!((fwd - c(dt.exp(), 0.0)).norm() < 1e-12 * dt.exp().max(1.0) + 1e-9);
            let z = c(0.2, -0.3);
            let w = radial_step_forward(z, delta, dt);
            assert!(w.norm() < 1.0);
            assert!((radial_step_inverse(w, delta, dt) - z).norm() < 1e-12);
        }
    }

    #[test]
    fn slit_tip_matches_capacity() {
        let dt = 1e-3;
        let mut z = c(1.0, 0.0);
        let one = c(1.0, 0.0);
        let mut tip = one;
        for _ in 0..1000 {
            tip = radial_step_inverse(tip, one, dt);
        }
        z = radial_step_inverse(z, one, 1.0);
        assert!((tip - z).norm() < 1e-12);
        let x = tip.re;
        assert!((slit_hit_time(x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slit_hit_time_by_quadrature() {
        // T(r) = ∫_r^1 (1 − g)/(g(1 + g)) dg along the slit.
        let r: f64 = (-3.0f64).exp();
        let n = 200_000;
        let h = (1.0 - r) / n as f64;
        let f = |g: f64| (1.0 - g) / (g * (1.0 + g));
        let mut acc = f(r) + f(1.0);
        for i in 1..n {
            acc += f(r + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = acc * h / 3.0;
        assert!((quad - slit_hit_time(r).unwrap()).abs() < 1e-8);
        assert!(slit_hit_time(0.0).is_err());
    }

    #[test]
    fn kappa_zero_radial_slit() {
        let r = 0.1;
        let opts = RadialOptions {
            record_tips: true,
            ..Default::default()
        };
        let mut s = RandomStream::new(1, 0);
        let (_, state) =
            simulate_radial(0.0, 0.0, StopRule::HitRadius(r), 1e-3, &opts, &mut s).unwrap();
        let t = hull_hit_time(&state, r).unwrap();
        let exact = slit_hit_time(r).unwrap();
        assert!(
            t >= exact - 1e-12 && t < exact + 1e-3 + 1e-12,
            "{t} vs {exact}"
        );
        assert!(state.tips.iter().all(|z| z.im.abs() < 1e-12 && z.re > 0.0));
        let (lo, hi) = state.origin_distance_bounds();
        assert!(lo <= hi);
    }

    #[test]
    fn capacity_is_exact() {
        let mut s = RandomStream::new(2, 0);
        let (_, state) = simulate_radial(
            6.0,
            1.0,
            StopRule::Time(0.5),
            1e-3,
            &RadialOptions::default(),
            &mut s,
        )
        .unwrap();
        assert_eq!(state.steps, 500);
        let eps = 1e-12;
        let ratio = state.inverse_map(c(eps, 0.0), state.steps) / eps;
        assert!((ratio.norm() / (-state.t).exp() - 1.0).abs() < 1e-9);
        let z = c(0.05, 0.02);
        let back = state.inverse_map(state.forward_map(z, state.steps), state.steps);
        assert!((back - z).norm() < 1e-9);
    }

    #[test]
    fn koebe_sandwich_on_sampled_hulls() {
        let opts = RadialOptions {
            record_tips: true,
            ..Default::default()
        };
        for seed in 0..20 {
            let mut s = RandomStream::new(seed, 3);
            let (_, state) =
                simulate_radial(6.0, 0.0, StopRule::HitRadius(0.05), 1e-2, &opts, &mut s).unwrap();
            let t = state.t;
            let rho = state.min_tip_modulus;
            assert!(
                rho >= (-t).exp() / 4.0 * (1.0 - 1e-9) && rho <= (-t).exp() * (1.0 + 1e-9),
                "seed {seed}: ρ = {rho}, t = {t}"
            );
            assert!(t > (1.0f64 / 0.05).ln() - 4f64.ln() && t <= (1.0f64 / 0.05).ln() + 1e-2);
        }
    }

    #[test]
    fn radial_rejects_bad_input() {
        let mut s = RandomStream::new(0, 0);
        let o = RadialOptions::default();
        assert!(simulate_radial(-1.0, 0.0, StopRule::Time(1.0), 1e-3, &o, &mut s).is_err());
        assert!(simulate_radial(6.0, 7.0, StopRule::Time(1.0), 1e-3, &o, &mut s).is_err());
        assert!(simulate_radial(6.0, 0.0, StopRule::HitRadius(1.5), 1e-3, &o, &mut s).is_err());
        let tight = RadialOptions {
            max_steps: 10,
            ..Default::default()
        };
        assert!(matches!(
            simulate_radial(6.0, 0.0, StopRule::HitRadius(0.01), 1e-3, &tight, &mut s),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn boundary_flow_matches_map() {
        // Tracked angles agree with the composed map applied to boundary points.
        let opts = RadialOptions {
            tracked: vec![1.0, 2.5, 4.0],
            ..Default::default()
        };
        let mut s = RandomStream::new(9, 0);
        let (path, state) =
            simulate_radial(2.0, 0.3, StopRule::Time(0.2), 1e-3, &opts, &mut s).unwrap();
        let theta = *path.values.last().unwrap();
        for (i, &x) in opts.tracked.iter().enumerate() {
            let Some(y) = state.angles.relative_angle(i) else {
                continue;
            };
            let w = state.forward_map(Complex64::from_polar(1.0, x), state.steps);
            let expected = (w.arg() - theta).rem_euclid(TAU);
            assert!((expected - y).abs() < 1e-8, "x = {x}: {expected} vs {y}");
        }
    }

    #[test]
    fn driving_increments_have_kappa_variance() {
        let mut acc = Accumulator::new();
        for seed in 0..200 {
            let mut s = RandomStream::new(seed, 5);
            let (path, _) = simulate_radial(
                6.0,
                0.0,
                StopRule::Time(0.1),
                1e-3,
                &RadialOptions::default(),
                &mut s,
            )
            .unwrap();
            assert_eq!(path.values[0], 0.0);
            for w in path.values.windows(2) {
                acc.push((w[1] - w[0]).powi(2));
            }
        }
        assert!((acc.mean() / (6.0 * 1e-3) - 1.0).abs() < 5.0 * acc.stderr() / (6.0 * 1e-3));
    }

    #[test]
    fn chordal_kappa_zero() {
        let mut s = RandomStream::new(0, 0);
        let (_, state) = simulate_chordal(0.0, 0.0, 1.0, 1e-3, &[0.5, 2.0, -1.0], &mut s).unwrap();
        for p in &state.points {
            assert!(p.swallowed_at.is_none());
            assert!((p.image - p.x.signum() * (p.x * p.x + 4.0).sqrt()).abs() < 1e-9);
        }
        let r = first_swallowed(
            0.0,
            0.0,
            &[1.0],
            &SwallowOptions {
                t_max: 1.0,
                dt_max: 1e-3,
                ..Default::default()
            },
            &mut s,
        )
        .unwrap();
        assert!(r.horizon_reached && r.events.is_empty());
    }

    #[test]
    fn chordal_points_keep_order() {
        let xs = [-2.0, -0.5, 0.3, 1.0, 3.0];
        for seed in 0..50 {
            let mut s = RandomStream::new(seed, 1);
            let (_, state) = simulate_chordal(6.0, 0.0, 1.0, 1e-3, &xs, &mut s).unwrap();
            let alive: Vec<f64> = state
                .points
                .iter()
                .filter(|p| p.swallowed_at.is_none())
                .map(|p| p.image)
                .collect();
            assert!(alive.windows(2).all(|w| w[0] < w[1]));
            // Swallowing is monotone in distance on each side.
            let t = |i: usize| state.points[i].swallowed_at.unwrap_or(f64::INFINITY);
            assert!(t(1) <= t(0) && t(2) <= t(3) && t(3) <= t(4));
        }
    }

    #[test]
    fn chordal_quadratic_variation() {
        let mut acc = Accumulator::new();
        for seed in 0..1000 {
            let mut s = RandomStream::new(seed, 2);
            let (path, _) = simulate_chordal(6.0, 0.0, 1.0, 1e-3, &[], &mut s).unwrap();
            acc.push(path.quadratic_variation(1000));
        }
        assert!((acc.mean() / 6.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn symmetric_first_swallow() {
        let n = 4000;
        let mut right = 0;
        for seed in 0..n {
            let mut s = RandomStream::new(seed, 4);
            let r = first_swallowed(6.0, 0.0, &[-1.0, 1.0], &SwallowOptions::default(), &mut s)
                .unwrap();
            assert_eq!(r.events.len(), 1);
            assert_eq!(r.events[0].points.len(), 1);
            if r.events[0].points[0] == 1 {
                right += 1;
            }
        }
        let p = right as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn first_swallowed_rejects_bad_points() {
        let mut s = RandomStream::new(0, 0);
        let o = SwallowOptions::default();
        assert!(first_swallowed(6.0, 0.0, &[0.0, 1.0], &o, &mut s).is_err());
        assert!(first_swallowed(6.0, 0.0, &[1.0, 1.0], &o, &mut s).is_err());
        assert!(first_swallowed(6.0, 0.0, &[], &o, &mut s).is_err());
    }

    #[test]
    fn coordinate_change_basics() {
        for seed in 0..20 {
            let mut s = RandomStream::new(seed, 6);
            let (path, _) = simulate_radial(
                6.0,
                PI / 2.0,
                StopRule::Time(2.0),
                1e-3,
                &RadialOptions::default(),
                &mut s,
            )
            .unwrap();
            let cc = radial_to_chordal(&path, &mut s).unwrap();
            assert_eq!((cc.a[0], cc.b[0], cc.u[0]), (1.0, 0.0, 0.0));
            assert!(cc.u.windows(2).all(|w| w[1] > w[0]));
            assert!(cc.a.iter().all(|&a| a > 0.0 && a <= 1.0));
            assert!(cc.a.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn coordinate_change_tracks_image_of_one() {
        let mut s = RandomStream::new(4, 7);
        let opts = RadialOptions {
            tracked: vec![0.0],
            ..Default::default()
        };
        let (path, state) =
            simulate_radial(6.0, 2.0, StopRule::Time(0.3), 1e-3, &opts, &mut s).unwrap();
        let cc = radial_to_chordal(&path, &mut RandomStream::new(0, 0)).unwrap();
        if !cc.truncated && state.angles.alive_count() == 1 {
            let w = state.forward_map(c(1.0, 0.0), state.steps);
            let last = *cc.e_arg.last().unwrap();
            assert!(
                ((w.arg() - last).rem_euclid(TAU)).min((last - w.arg()).rem_euclid(TAU)) < 1e-8
            );
            assert!((cc.a.last().unwrap() - state.angles.derivative(0)).abs() < 1e-9);
        }
    }
}
