//! Brownian excursions in the disk, annulus and rectangle, their crossing
//! masses, and π-extremal distances of grid regions by effective resistance.
//!
//! Paths take Gaussian steps. A step that leaves the domain is cut at the
//! boundary crossing along the step; a step that stays inside is still killed
//! with the Brownian-bridge probability `exp(−2 d₀ d₁ / dt)` for each nearby
//! boundary piece, treated as a straight line.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stochastic::{Accumulator, RandomStream};

/// `dt = DEFAULT_DT_SCALE · (domain scale)²` unless configured.
pub const DEFAULT_DT_SCALE: f64 = 1e-4;
pub const DEFAULT_OFFSET: f64 = 0.01;

/// Mass under the disk excursion measure of the paths that hit `C_r`: `2π / log(1/r)`.
pub fn excursion_mass_hitting(r: f64) -> Result<f64> {
    ensure(r > 0.0 && r < 1.0, "r", || {
        format!("must lie in (0, 1), got {r}")
    })?;
    Ok(TAU / (1.0 / r).ln())
}

/// Excursion mass of left-to-right crossings of `(0, L) × (0, π)`:
/// `Σ_{n odd} 8 / (nπ sinh(nL))`, which is `(16/π) e^{−L} (1 + O(e^{−2L}))`.
pub fn rectangle_crossing_mass(l: f64) -> Result<f64> {
    ensure(l > 0.0 && l.is_finite(), "L", || {
        format!("must be > 0, got {l}")
    })?;
    let mut sum = 0.0;
    let mut n = 1.0;
    loop {
        // 1/sinh(nL) = 2e^{−nL}/(1 − e^{−2nL}) stays finite for large nL.
        let e = (-n * l).exp();
        let term = 8.0 / (n * PI) * 2.0 * e / (1.0 - e * e);
        sum += term;
        if term < 1e-17 * sum {
            return Ok(sum);
        }
        n += 2.0;
    }
}

/// Probability that a Brownian excursion started at `z` in the rectangle
/// leaves through the right edge `{Re = L}`.
pub fn rectangle_crossing_probability(l: f64, z: Complex64) -> Result<f64> {
    ensure(l > 0.0 && l.is_finite(), "L", || {
        format!("must be > 0, got {l}")
    })?;
    ensure(
        z.re > 0.0 && z.re < l && z.im > 0.0 && z.im < PI,
        "z",
        || format!("must lie inside the rectangle, got {z}"),
    )?;
    let mut sum = 0.0;
    let mut n = 1.0;
    while n < 1e6 {
        let ratio =
            (n * (z.re - l)).exp() * (1.0 - (-2.0 * n * z.re).exp()) / (1.0 - (-2.0 * n * l).exp());
        let term = 4.0 / (n * PI) * ratio * (n * z.im).sin();
        sum += term;
        if ratio < 1e-17 {
            break;
        }
        n += 2.0;
    }
    Ok(sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExcursionDomain {
    Disk,
    Annulus { r: f64 },
    Rectangle { l: f64 },
}

/// A sampled excursion: the path from its start near the boundary to its
/// exit or truncation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionPath {
    pub domain: ExcursionDomain,
    pub start: Complex64,
    pub end: Complex64,
    /// Positions after each step, all strictly inside the domain.
    pub interior: Vec<Complex64>,
    /// Density of the excursion measure relative to the sampling law.
    pub weight: f64,
    /// Annulus: reached `C_r`. Rectangle: left through `{Re = L}`.
    pub hit: bool,
}

/// Bridge survival against a straight boundary at distances `d0`, `d1`.
fn bridge_crosses(d0: f64, d1: f64, var: f64, stream: &mut RandomStream) -> bool {
    stream.uniform() < (-2.0 * d0 * d1 / var).exp()
}

fn gaussian_step(stream: &mut RandomStream, sd: f64) -> Complex64 {
    Complex64::new(sd * stream.gaussian(), sd * stream.gaussian())
}

/// First parameter `u ∈ [0, 1]` where the segment `z + u·d` meets the circle `|w| = rad`.
fn circle_entry(z: Complex64, d: Complex64, rad: f64) -> Option<f64> {
    let a = d.norm_sqr();
    let b = 2.0 * (z.re * d.re + z.im * d.im);
    let c = z.norm_sqr() - rad * rad;
    let disc = b * b - 4.0 * a * c;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let u = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&u).then_some(u)
}

enum AnnulusExit {
    Inner(Complex64),
    Outer(Complex64),
}

/// One step of Brownian motion in `r < |z| < 1`; `r = 0` means the disk.
fn annulus_step(
    z: Complex64,
    r: f64,
    sd: f64,
    stream: &mut RandomStream,
) -> std::result::Result<Complex64, AnnulusExit> {
    let d = gaussian_step(stream, sd);
    let z1 = z + d;
    let var = sd * sd;
    if r > 0.0 {
        if let Some(u) = circle_entry(z, d, r) {
            return Err(AnnulusExit::Inner(z + d * u));
        }
    }
    let m1 = z1.norm();
    if m1 >= 1.0 {
        // The outer circle is crossed once on the way out.
        let u = circle_entry(z1, -d, 1.0).map_or(1.0, |v| 1.0 - v);
        return Err(AnnulusExit::Outer(z + d * u));
    }
    if bridge_crosses(1.0 - z.norm(), 1.0 - m1, var, stream) {
        return Err(AnnulusExit::Outer(z1 / m1));
    }
    if r > 0.0 && bridge_crosses(z.norm() - r, m1 - r, var, stream) {
        return Err(AnnulusExit::Inner(z1 * (r / m1)));
    }
    Ok(z1)
}

fn check_annulus(r: f64, s: f64, dt: f64) -> Result<()> {
    ensure((0.0..1.0).contains(&r), "r", || {
        format!("must lie in [0, 1), got {r}")
    })?;
    ensure(s > 0.0 && r < 1.0 - s, "s", || {
        format!("need 0 < r < 1 − s, got r = {r}, s = {s}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })
}

fn run_annulus(
    r: f64,
    s: f64,
    dt: f64,
    stream: &mut RandomStream,
    mut record: impl FnMut(Complex64),
) -> (Complex64, Complex64, bool) {
    let sd = dt.sqrt();
    let start = Complex64::from_polar(1.0 - s, TAU * stream.uniform());
    let mut z = start;
    loop {
        match annulus_step(z, r, sd, stream) {
            Ok(z1) => {
                z = z1;
                record(z);
            }
            Err(AnnulusExit::Inner(w)) => return (start, w, true),
            Err(AnnulusExit::Outer(w)) => return (start, w, false),
        }
    }
}

/// Samples the excursion measure of the disk restricted to paths hitting
/// `C_r`: a Brownian path from a uniform point of `|z| = 1 − s`, killed on
/// the unit circle and truncated when it reaches `C_r`, with weight
/// `2π / log(1/(1−s))`.
pub fn sample_annulus_excursion(
    r: f64,
    s: f64,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<ExcursionPath> {
    ensure(r > 0.0, "r", || format!("must lie in (0, 1), got {r}"))?;
    check_annulus(r, s, dt)?;
    let mut interior = Vec::new();
    let (start, end, hit) = run_annulus(r, s, dt, stream, |z| interior.push(z));
    Ok(ExcursionPath {
        domain: ExcursionDomain::Annulus { r },
        start,
        end,
        interior,
        weight: TAU / (1.0 / (1.0 - s)).ln(),
        hit,
    })
}

/// Samples the disk excursion measure at offset `s`; the path runs until it leaves the disk.
pub fn sample_disk_excursion(s: f64, dt: f64, stream: &mut RandomStream) -> Result<ExcursionPath> {
    check_annulus(0.0, s, dt)?;
    let mut interior = Vec::new();
    let (start, end, _) = run_annulus(0.0, s, dt, stream, |z| interior.push(z));
    Ok(ExcursionPath {
        domain: ExcursionDomain::Disk,
        start,
        end,
        interior,
        weight: TAU / (1.0 / (1.0 - s)).ln(),
        hit: false,
    })
}

/// Accumulates `weight · 1{hit C_r}` over `n` annulus excursions; the mean
/// estimates `2π / log(1/r)`.
pub fn estimate_annulus_mass(
    r: f64,
    s: f64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Accumulator> {
    ensure(r > 0.0, "r", || format!("must lie in (0, 1), got {r}"))?;
    check_annulus(r, s, dt)?;
    let weight = TAU / (1.0 / (1.0 - s)).ln();
    let mut acc = Accumulator::new();
    for _ in 0..n {
        let (_, _, hit) = run_annulus(r, s, dt, stream, |_| {});
        acc.push(if hit { weight } else { 0.0 });
    }
    Ok(acc)
}

/// Runs Brownian motion from `z` in `(0, L) × (0, π)` and reports whether it
/// leaves through the right edge.
fn rectangle_run(
    l: f64,
    mut z: Complex64,
    sd: f64,
    stream: &mut RandomStream,
    mut record: impl FnMut(Complex64),
) -> (Complex64, bool) {
    let var = sd * sd;
    loop {
        let d = gaussian_step(stream, sd);
        let z1 = z + d;
        // Straight-line exit: smallest crossing parameter over the four edges.
        let mut first: Option<(f64, usize)> = None;
        let mut consider = |u: f64, side: usize| {
            if (0.0..=1.0).contains(&u) && first.is_none_or(|(v, _)| u < v) {
                first = Some((u, side));
            }
        };
        if z1.re <= 0.0 {
            consider(z.re / -d.re, 0);
        }
        if z1.re >= l {
            consider((l - z.re) / d.re, 1);
        }
        if z1.im <= 0.0 {
            consider(z.im / -d.im, 2);
        }
        if z1.im >= PI {
            consider((PI - z.im) / d.im, 3);
        }
        if let Some((u, side)) = first {
            return (z + d * u, side == 1);
        }
        let gaps = [
            (z.re, z1.re),
            (l - z.re, l - z1.re),
            (z.im, z1.im),
            (PI - z.im, PI - z1.im),
        ];
        for (side, &(d0, d1)) in gaps.iter().enumerate() {
            if bridge_crosses(d0, d1, var, stream) {
                let end = match side {
                    0 => Complex64::new(0.0, z1.im),
                    1 => Complex64::new(l, z1.im),
                    2 => Complex64::new(z1.re, 0.0),
                    _ => Complex64::new(z1.re, PI),
                };
                return (end, side == 1);
            }
        }
        z = z1;
        record(z);
    }
}

fn check_rectangle(l: f64, s: f64, dt: f64) -> Result<()> {
    ensure(l >= 1.0 && l.is_finite(), "L", || {
        format!("must be ≥ 1, got {l}")
    })?;
    ensure(s > 0.0 && s <= 0.05, "s", || {
        format!("must lie in (0, 0.05], got {s}")
    })?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })
}

/// Samples the rectangle excursion measure at offset `s`: a Brownian path
/// from a uniform point of `[s, s + iπ]` with weight `π / s`.
pub fn sample_rectangle_excursion(
    l: f64,
    s: f64,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<ExcursionPath> {
    check_rectangle(l, s, dt)?;
    let start = Complex64::new(s, PI * stream.uniform_open());
    let mut interior = Vec::new();
    let (end, hit) = rectangle_run(l, start, dt.sqrt(), stream, |z| interior.push(z));
    Ok(ExcursionPath {
        domain: ExcursionDomain::Rectangle { l },
        start,
        end,
        interior,
        weight: PI / s,
        hit,
    })
}

/// Accumulates `(π/s)·1{crossing}` over `n` rectangle excursions; the mean
/// estimates the crossing mass `μ_{R_L}[E_L]`.
pub fn estimate_rectangle_crossing(
    l: f64,
    s: f64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Accumulator> {
    check_rectangle(l, s, dt)?;
    let sd = dt.sqrt();
    let weight = PI / s;
    let mut acc = Accumulator::new();
    for _ in 0..n {
        let start = Complex64::new(s, PI * stream.uniform_open());
        let (_, hit) = rectangle_run(l, start, sd, stream, |_| {});
        acc.push(if hit { weight } else { 0.0 });
    }
    Ok(acc)
}

/// Fraction of `n` paths from `z` that cross to `{Re = L}`.
pub fn rectangle_crossing_from(
    l: f64,
    z: Complex64,
    n: usize,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<Accumulator> {
    ensure(
        z.re > 0.0 && z.re < l && z.im > 0.0 && z.im < PI,
        "z",
        || format!("must lie inside the rectangle, got {z}"),
    )?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", || {
        format!("must be > 0, got {dt}")
    })?;
    let sd = dt.sqrt();
    let mut acc = Accumulator::new();
    for _ in 0..n {
        let (_, hit) = rectangle_run(l, z, sd, stream, |_| {});
        acc.push(if hit { 1.0 } else { 0.0 });
    }
    Ok(acc)
}

/// Lower bound `e^{−L}(Im(e^z) − 1)` on the crossing probability from `z`,
/// from the harmonic function `Im(e^z)`; informative when `Im(e^z) > 1`.
pub fn crossing_lower_bound(l: f64, z: Complex64) -> Option<f64> {
    let im = z.exp().im;
    (im > 1.0).then(|| (-l).exp() * (im - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Open,
    Blocked,
    /// Open, and joined through its bottom edge to arc A.
    ArcA,
    /// Open, and joined through its top edge to arc B.
    ArcB,
}

impl Cell {
    fn is_open(self) -> bool {
        self != Cell::Blocked
    }

    fn symbol(self) -> char {
        match self {
            Cell::Open => '.',
            Cell::Blocked => '#',
            Cell::ArcA => 'A',
            Cell::ArcB => 'B',
        }
    }
}

/// A region as a grid of rectangular cells of size `hx × hy`, with arc A
/// along the bottom row and arc B along the top row.
///
/// Text form: a header line `GRIDMASK width height periodic hx hy`, then
/// `height` rows of `width` symbols, top row first: `.` open, `#` blocked,
/// `A` open cell on arc A (bottom row only), `B` open cell on arc B (top row only).
/// Optional trailing lines `CUT col row R` or `CUT col row U` remove the link
/// from that cell to its right or upper neighbor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMask {
    pub width: usize,
    pub height: usize,
    /// Columns 0 and `width − 1` are neighbors.
    pub periodic: bool,
    pub hx: f64,
    pub hy: f64,
    /// Row-major, row 0 at the bottom.
    pub cells: Vec<Cell>,
    /// Per-cell bit set of removed links, `CUT_RIGHT | CUT_UP`; empty means none.
    #[serde(default)]
    pub cuts: Vec<u8>,
}

/// The link to the right neighbor (across the seam for the last column of a periodic mask).
pub const CUT_RIGHT: u8 = 1;
/// The link to the upper neighbor.
pub const CUT_UP: u8 = 2;

impl GridMask {
    /// All cells open, bottom row on arc A and top row on arc B.
    pub fn open(width: usize, height: usize, periodic: bool, hx: f64, hy: f64) -> Result<Self> {
        ensure(width >= 1 && height >= 2, "mask", || {
            format!("need width ≥ 1 and height ≥ 2, got {width}×{height}")
        })?;
        ensure(hx > 0.0 && hy > 0.0, "mask", || {
            "cell sizes must be positive".into()
        })?;
        let mut cells = vec![Cell::Open; width * height];
        for i in 0..width {
            cells[i] = Cell::ArcA;
            cells[(height - 1) * width + i] = Cell::ArcB;
        }
        Ok(GridMask {
            width,
            height,
            periodic,
            hx,
            hy,
            cells,
            cuts: Vec::new(),
        })
    }

    pub fn get(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, cell: Cell) {
        self.cells[row * self.width + col] = cell;
    }

    pub fn block(&mut self, col: usize, row: usize) {
        self.set(col, row, Cell::Blocked);
    }

    /// Removes the link from `(col, row)` in direction `CUT_RIGHT` or `CUT_UP`.
    pub fn cut(&mut self, col: usize, row: usize, direction: u8) {
        if self.cuts.is_empty() {
            self.cuts = vec![0; self.width * self.height];
        }
        self.cuts[row * self.width + col] |= direction;
    }

    pub fn is_cut(&self, col: usize, row: usize, direction: u8) -> bool {
        self.cuts
            .get(row * self.width + col)
            .is_some_and(|&c| c & direction != 0)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::domain("mask", m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty mask text".into()))?
            .split_whitespace()
            .collect();
        if header.len() != 6 || header[0] != "GRIDMASK" {
            return Err(bad(
                "header must be `GRIDMASK width height periodic hx hy`".into()
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("bad number `{s}`")))
        };
        let width = header[1]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad width `{}`", header[1])))?;
        let height = header[2]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad height `{}`", header[2])))?;
        let periodic = match header[3] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("periodic flag must be 0 or 1, got `{other}`"))),
        };
        let (hx, hy) = (num(header[4])?, num(header[5])?);
        let mut mask = GridMask::open(width, height, periodic, hx, hy)?;
        let all: Vec<&str> = lines.collect();
        let split = all
            .iter()
            .position(|l| l.trim_start().starts_with("CUT"))
            .unwrap_or(all.len());
        let (rows, cuts) = all.split_at(split);
        if rows.len() != height {
            return Err(bad(format!("expected {height} rows, found {}", rows.len())));
        }
        for (k, line) in rows.iter().enumerate() {
            let row = height - 1 - k;
            let symbols: Vec<char> = line.trim().chars().collect();
            if symbols.len() != width {
                return Err(bad(format!(
                    "row {k} has {} cells, expected {width}",
                    symbols.len()
                )));
            }
            for (col, ch) in symbols.into_iter().enumerate() {
                let cell = match ch {
                    '.' => Cell::Open,
                    '#' => Cell::Blocked,
                    'A' if row == 0 => Cell::ArcA,
                    'B' if row == height - 1 => Cell::ArcB,
                    'A' | 'B' => {
                        return Err(bad(format!(
                            "arc cell `{ch}` outside its boundary row at row {k}"
                        )))
                    }
                    other => return Err(bad(format!("unknown cell symbol `{other}`"))),
                };
                mask.set(col, row, cell);
            }
        }
        for line in cuts {
            let f: Vec<&str> = line.split_whitespace().collect();
            let idx = |s: &str, max: usize| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v < max)
                    .ok_or_else(|| bad(format!("bad cut index in `{line}`")))
            };
            if f.len() != 4 || f[0] != "CUT" {
                return Err(bad(format!(
                    "cut line must be `CUT col row R|U`, got `{line}`"
                )));
            }
            let (col, row) = (idx(f[1], width)?, idx(f[2], height)?);
            let direction = match f[3] {
                "R" => CUT_RIGHT,
                "U" => CUT_UP,
                other => return Err(bad(format!("cut direction must be R or U, got `{other}`"))),
            };
            mask.cut(col, row, direction);
        }
        Ok(mask)
    }
}

impl fmt::Display for GridMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "GRIDMASK {} {} {} {} {}",
            self.width,
            self.height,
            u8::from(self.periodic),
            self.hx,
            self.hy
        )?;
        for row in (0..self.height).rev() {
            let line: String = (0..self.width).map(|c| self.get(c, row).symbol()).collect();
            writeln!(f, "{line}")?;
        }
        for (k, &c) in self.cuts.iter().enumerate() {
            for (bit, tag) in [(CUT_RIGHT, 'R'), (CUT_UP, 'U')] {
                if c & bit != 0 {
                    writeln!(f, "CUT {} {} {tag}", k % self.width, k / self.width)?;
                }
            }
        }
        Ok(())
    }
}

/// Effective resistance between arcs A and B with unit-square conductance.
///
/// Potentials live at cell centers; a link between neighbors has
/// conductance `hy/hx` horizontally and `hx/hy` vertically, and an arc cell
/// is joined to its arc through half a cell. Returns `+∞` when no open path
/// joins the arcs.
pub fn effective_resistance(mask: &GridMask) -> Result<f64> {
    let (w, h) = (mask.width, mask.height);
    ensure(mask.cells.len() == w * h, "mask", || {
        "cell count does not match the dimensions".into()
    })?;
    ensure(
        mask.cuts.is_empty() || mask.cuts.len() == w * h,
        "mask",
        || "cut count does not match the dimensions".into(),
    )?;
    let n_a = mask.cells.iter().filter(|&&c| c == Cell::ArcA).count();
    let n_b = mask.cells.iter().filter(|&&c| c == Cell::ArcB).count();
    ensure(n_a > 0 && n_b > 0, "mask", || {
        "both marked arcs must contain an open cell".into()
    })?;
    ensure(h >= 2, "mask", || {
        "marked arcs touch: need at least two rows".into()
    })?;

    let gx = mask.hy / mask.hx;
    let gy = mask.hx / mask.hy;
    let mut index = vec![usize::MAX; w * h];
    let mut open = Vec::new();
    for (k, slot) in index.iter_mut().enumerate() {
        if mask.cells[k].is_open() {
            *slot = open.len();
            open.push(k);
        }
    }
    let n = open.len();
    // Neighbor lists in CSR form.
    let mut start = Vec::with_capacity(n + 1);
    let mut nbr: Vec<(u32, f64)> = Vec::with_capacity(4 * n);
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for (i, &k) in open.iter().enumerate() {
        start.push(nbr.len());
        let (col, row) = (k % w, k / w);
        let mut link = |j: usize, g: f64, nbr: &mut Vec<(u32, f64)>| {
            if index[j] != usize::MAX {
                nbr.push((index[j] as u32, g));
                diag[i] += g;
            }
        };
        let left = if col > 0 { col - 1 } else { w - 1 };
        if (col > 0 || (mask.periodic && w > 1)) && !mask.is_cut(left, row, CUT_RIGHT) {
            link(row * w + left, gx, &mut nbr);
        }
        if (col + 1 < w || (mask.periodic && w > 1)) && !mask.is_cut(col, row, CUT_RIGHT) {
            link(row * w + (col + 1) % w, gx, &mut nbr);
        }
        if row > 0 && !mask.is_cut(col, row - 1, CUT_UP) {
            link(k - w, gy, &mut nbr);
        }
        if row + 1 < h && !mask.is_cut(col, row, CUT_UP) {
            link(k + w, gy, &mut nbr);
        }
        match mask.cells[k] {
            Cell::ArcA => {
                diag[i] += 2.0 * gy;
                rhs[i] = 2.0 * gy;
            }
            Cell::ArcB => diag[i] += 2.0 * gy,
            _ => {}
        }
    }
    start.push(nbr.len());

    if !arcs_connected(mask, &index, &open, &nbr, &start) {
        return Ok(f64::INFINITY);
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let mut v = diag[i] * x[i];
            for &(j, g) in &nbr[start[i]..start[i + 1]] {
                v -= g * x[j as usize];
            }
            y[i] = v;
        }
    };
    let u = conjugate_gradient(&apply, &diag, &rhs, 1e-11, 20 * n + 1000)?;
    let current: f64 = open
        .iter()
        .enumerate()
        .filter(|&(_, &k)| mask.cells[k] == Cell::ArcA)
        .map(|(i, _)| 2.0 * gy * (1.0 - u[i]))
        .sum();
    Ok(if current > 1e-300 {
        1.0 / current
    } else {
        f64::INFINITY
    })
}

/// Whether some open path joins an arc A cell to an arc B cell.
fn arcs_connected(
    mask: &GridMask,
    index: &[usize],
    open: &[usize],
    nbr: &[(u32, f64)],
    start: &[usize],
) -> bool {
    let mut seen = vec![false; open.len()];
    let mut stack: Vec<usize> = open
        .iter()
        .filter(|&&k| mask.cells[k] == Cell::ArcA)
        .map(|&k| index[k])
        .collect();
    for &i in &stack {
        seen[i] = true;
    }
    while let Some(i) = stack.pop() {
        if mask.cells[open[i]] == Cell::ArcB {
            return true;
        }
        for &(j, _) in &nbr[start[i]..start[i + 1]] {
            if !seen[j as usize] {
                seen[j as usize] = true;
                stack.push(j as usize);
            }
        }
    }
    false
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive semidefinite operator.
fn conjugate_gradient(
    apply: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let inv: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, c)| a * c).sum();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, c)| a * c).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, c)| a * c).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::BudgetExhausted {
        steps: max_iter as u64,
        what: "conjugate-gradient convergence",
    })
}

/// A doubly-marked region that can be rasterized at any resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `(0, L) × (0, π)` between its vertical sides.
    Rectangle { l: f64 },
    /// `r < |z| < 1` between its two circles, in log-polar coordinates.
    Annulus { r: f64 },
    /// The annulus minus the radial segment `[r, 1]`.
    SlitAnnulus { r: f64 },
    /// The annulus minus a hull given by its trace, a polyline from the unit circle.
    HullAnnulus { r: f64, trace: Vec<Complex64> },
    /// A fixed mask; no refinement is possible.
    Mask(GridMask),
}

impl Region {
    fn annulus_grid(r: f64, resolution: usize, periodic: bool) -> Result<GridMask> {
        let height = (1.0 / r).ln();
        let hx = TAU / resolution as f64;
        let rows = ((height / hx).round() as usize).max(2);
        GridMask::open(resolution, rows, periodic, hx, height / rows as f64)
    }

    /// Grid with `resolution` cells across the arcs.
    pub fn rasterize(&self, resolution: usize) -> Result<GridMask> {
        ensure(resolution >= 4, "resolution", || {
            format!("must be ≥ 4, got {resolution}")
        })?;
        match self {
            Region::Rectangle { l } => {
                ensure(*l > 0.0, "L", || format!("must be > 0, got {l}"))?;
                let hx = PI / resolution as f64;
                let rows = ((l / hx).round() as usize).max(2);
                GridMask::open(resolution, rows, false, hx, l / rows as f64)
            }
            Region::Annulus { r } | Region::SlitAnnulus { r } | Region::HullAnnulus { r, .. } => {
                ensure(*r > 0.0 && *r < 1.0, "r", || {
                    format!("must lie in (0, 1), got {r}")
                })?;
                let periodic = matches!(self, Region::Annulus { .. } | Region::HullAnnulus { .. });
                let mut mask = Self::annulus_grid(*r, resolution, periodic)?;
                if let Region::HullAnnulus { trace, .. } = self {
                    cut_trace(&mut mask, *r, trace);
                }
                Ok(mask)
            }
            Region::Mask(m) => Ok(m.clone()),
        }
    }
}

/// Cuts every link of a log-polar annulus grid that the trace crosses.
///
/// Links join cell centers, so a link is cut when a trace segment crosses it;
/// the trace itself has zero thickness. Regions it encloses fall out as
/// components joined to neither arc.
fn cut_trace(mask: &mut GridMask, r: f64, trace: &[Complex64]) {
    let log_r = r.ln();
    let (hx, hy) = (mask.hx, mask.hy);
    let (w, h) = (mask.width as i64, mask.height as i64);
    let to_grid = |z: Complex64| -> (f64, f64) {
        let x = z.arg().rem_euclid(TAU) / hx;
        let y = (z.norm().clamp(r, 1.0).ln() - log_r) / hy;
        (x, y)
    };
    let Some(&first) = trace.first() else { return };
    let (mut px, mut py) = to_grid(first);
    for &z in &trace[1..] {
        let (mut x, y) = to_grid(z);
        // Unwrap across the seam so that the segment takes the short way round.
        let dx = x - px;
        if dx > w as f64 / 2.0 {
            x -= w as f64;
        } else if dx < -(w as f64) / 2.0 {
            x += w as f64;
        }
        // Horizontal links lie on y = row + 1/2; a line counts when min ≤ line < max.
        let (lo, hi) = (py.min(y), py.max(y));
        let mut row = (lo - 0.5).ceil() as i64;
        while (row as f64 + 0.5) < hi {
            let line = row as f64 + 0.5;
            if row >= 0 && row < h {
                let xc = px + (x - px) * (line - py) / (y - py);
                let col = (xc - 0.5).floor() as i64;
                if mask.periodic || (0..w - 1).contains(&col) {
                    mask.cut(col.rem_euclid(w) as usize, row as usize, CUT_RIGHT);
                }
            }
            row += 1;
        }
        // Vertical links lie on x = col + 1/2.
        let (lo, hi) = (px.min(x), px.max(x));
        let mut col = (lo - 0.5).ceil() as i64;
        while (col as f64 + 0.5) < hi {
            let line = col as f64 + 0.5;
            let yc = py + (y - py) * (line - px) / (x - px);
            let row = (yc - 0.5).floor() as i64;
            if (0..h - 1).contains(&row) && (mask.periodic || (0..w).contains(&col)) {
                mask.cut(col.rem_euclid(w) as usize, row as usize, CUT_UP);
            }
            col += 1;
        }
        px = x.rem_euclid(w as f64);
        py = y;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalDistance {
    /// Richardson-extrapolated π-extremal distance.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    pub resolution: usize,
}

/// π times the extremal distance between the marked arcs, from the grid
/// resistance at `resolution / 2` and `resolution` extrapolated as `O(h²)`.
pub fn estimate_pi_extremal_distance(
    region: &Region,
    resolution: usize,
) -> Result<ExtremalDistance> {
    if let Region::Mask(m) = region {
        let v = PI * effective_resistance(m)?;
        return Ok(ExtremalDistance {
            value: v,
            coarse: v,
            fine: v,
            resolution: m.width,
        });
    }
    ensure(
        resolution >= 8 && resolution.is_multiple_of(2),
        "resolution",
        || format!("must be even and ≥ 8, got {resolution}"),
    )?;
    let coarse = PI * effective_resistance(&region.rasterize(resolution / 2)?)?;
    let fine = PI * effective_resistance(&region.rasterize(resolution)?)?;
    let value = if coarse.is_finite() && fine.is_finite() {
        (4.0 * fine - coarse) / 3.0
    } else {
        f64::INFINITY
    };
    Ok(ExtremalDistance {
        value,
        coarse,
        fine,
        resolution,
    })
}
