//! Simple random walks on ℤ²: non-intersection probabilities of walk packs,
//! cut points, frontiers and box-counting dimensions.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fit::{fit_loose, Axis, FitResult, FitSample};
use crate::stochastic::{Accumulator, RandomStream};

pub type Site = (i32, i32);

const MOVES: [Site; 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

fn step(s: Site, stream: &mut RandomStream) -> Site {
    let (dx, dy) = MOVES[stream.below(4) as usize];
    (s.0 + dx, s.1 + dy)
}

/// A walk with, per visited site, its first and last visit times.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePath {
    pub positions: Vec<Site>,
    pub site_index: FxHashMap<Site, (u32, u32)>,
}

impl LatticePath {
    pub fn from_positions(positions: Vec<Site>) -> Result<Self> {
        ensure(!positions.is_empty(), "path", || {
            "needs at least one position".into()
        })?;
        for w in positions.windows(2) {
            let d = (w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs();
            ensure(d == 1, "path", || {
                format!("{:?} → {:?} is not a lattice step", w[0], w[1])
            })?;
        }
        let mut site_index = FxHashMap::default();
        for (t, &s) in positions.iter().enumerate() {
            site_index
                .entry(s)
                .and_modify(|e: &mut (u32, u32)| e.1 = t as u32)
                .or_insert((t as u32, t as u32));
        }
        Ok(LatticePath {
            positions,
            site_index,
        })
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.site_index.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

/// A `k`-step simple random walk from `start`.
pub fn simulate_walk(k: usize, start: Site, stream: &mut RandomStream) -> Result<LatticePath> {
    ensure(k >= 1, "k", || format!("must be ≥ 1, got {k}"))?;
    let mut positions = Vec::with_capacity(k + 1);
    let mut s = start;
    positions.push(s);
    let mut site_index = FxHashMap::default();
    site_index.insert(s, (0, 0));
    for t in 1..=k {
        s = step(s, stream);
        positions.push(s);
        site_index
            .entry(s)
            .and_modify(|e: &mut (u32, u32)| e.1 = t as u32)
            .or_insert((t as u32, t as u32));
    }
    Ok(LatticePath {
        positions,
        site_index,
    })
}

/// Start sites of the two packs: every walk of the first pack starts at
/// `(0, 0)` and every walk of the second at `(1, 0)`.
pub const PACK_STARTS: [Site; 2] = [(0, 0), (1, 0)];

/// Traces of two packs grown together, with the cross-pack intersection test.
struct Packs {
    walkers: [Vec<Site>; 2],
    traces: [FxHashSet<Site>; 2],
}

impl Packs {
    fn new(n: usize, m: usize) -> Self {
        let mut traces = [FxHashSet::default(), FxHashSet::default()];
        traces[0].insert(PACK_STARTS[0]);
        traces[1].insert(PACK_STARTS[1]);
        Packs {
            walkers: [vec![PACK_STARTS[0]; n], vec![PACK_STARTS[1]; m]],
            traces,
        }
    }

    /// Moves walker `i` of pack `p` one step; true if it lands on the other pack's trace.
    fn advance(&mut self, p: usize, i: usize, stream: &mut RandomStream) -> bool {
        let s = step(self.walkers[p][i], stream);
        self.walkers[p][i] = s;
        self.traces[p].insert(s);
        self.traces[1 - p].contains(&s)
    }
}

fn check_packs(n: usize, m: usize) -> Result<()> {
    ensure(n >= 1 && m >= 1, "packs", || {
        format!("pack sizes must be ≥ 1, got ({n}, {m})")
    })
}

/// First step at which the two packs' traces meet, or `None` if they stay
/// disjoint for `k_max` steps. All walks move once per step.
pub fn first_intersection_step(
    n: usize,
    m: usize,
    k_max: usize,
    stream: &mut RandomStream,
) -> Option<usize> {
    let mut packs = Packs::new(n, m);
    for k in 1..=k_max {
        let mut hit = false;
        for p in 0..2 {
            for i in 0..packs.walkers[p].len() {
                hit |= packs.advance(p, i, stream);
            }
        }
        if hit {
            return Some(k);
        }
    }
    None
}

/// For each `k` in `ks`, the indicator over `trials` runs that the packs'
/// traces stay disjoint for `k` steps.
pub fn nonintersection_time_probability(
    n: usize,
    m: usize,
    ks: &[usize],
    trials: usize,
    stream: &mut RandomStream,
) -> Result<Vec<Accumulator>> {
    check_packs(n, m)?;
    ensure(!ks.is_empty() && ks.iter().all(|&k| k >= 1), "k", || {
        "need step counts ≥ 1".into()
    })?;
    let k_max = *ks.iter().max().unwrap_or(&1);
    let mut acc = vec![Accumulator::new(); ks.len()];
    for _ in 0..trials {
        let first = first_intersection_step(n, m, k_max, stream);
        for (a, &k) in acc.iter_mut().zip(ks) {
            a.push(if first.is_none_or(|f| f > k) {
                1.0
            } else {
                0.0
            });
        }
    }
    Ok(acc)
}

fn outside(s: Site, r2: i64) -> bool {
    (s.0 as i64).pow(2) + (s.1 as i64).pow(2) >= r2
}

/// Largest index `j` such that the packs stay disjoint until every walk
/// has left the disk of radius `radii[j]`, plus one; 0 if they meet before
/// the first radius. Radii must be increasing.
pub fn radial_survival_level(
    n: usize,
    m: usize,
    radii: &[f64],
    stream: &mut RandomStream,
) -> usize {
    let mut packs = Packs::new(n, m);
    for (level, &r) in radii.iter().enumerate() {
        let r2 = (r * r).ceil() as i64;
        for p in 0..2 {
            for i in 0..packs.walkers[p].len() {
                while !outside(packs.walkers[p][i], r2) {
                    if packs.advance(p, i, stream) {
                        return level;
                    }
                }
            }
        }
    }
    radii.len()
}

/// For each radius, the indicator over `trials` runs that the packs stay
/// disjoint until every walk exits that radius.
pub fn nonintersection_radial_probability(
    n: usize,
    m: usize,
    radii: &[f64],
    trials: usize,
    stream: &mut RandomStream,
) -> Result<Vec<Accumulator>> {
    check_packs(n, m)?;
    ensure(
        !radii.is_empty() && radii.iter().all(|&r| r >= 4.0),
        "R",
        || "radii must be ≥ 4".into(),
    )?;
    ensure(radii.windows(2).all(|w| w[0] < w[1]), "R", || {
        "radii must be increasing".into()
    })?;
    let mut acc = vec![Accumulator::new(); radii.len()];
    for _ in 0..trials {
        let level = radial_survival_level(n, m, radii, stream);
        for (j, a) in acc.iter_mut().enumerate() {
            a.push(if j < level { 1.0 } else { 0.0 });
        }
    }
    Ok(acc)
}

/// Interior times `k ∈ [1, len)` at which the trace before `k` and the trace
/// after `k` are disjoint: no site has first visit ≤ k < last visit.
pub fn cut_points(path: &LatticePath) -> Result<Vec<usize>> {
    let n = path.len();
    ensure(n >= 2, "path", || {
        format!("needs at least 2 steps, got {n}")
    })?;
    let mut cover = vec![0i32; n + 1];
    for &(first, last) in path.site_index.values() {
        if first < last {
            cover[first as usize] += 1;
            cover[last as usize] -= 1;
        }
    }
    let mut open = 0;
    let mut cuts = Vec::new();
    for (k, c) in cover.iter().enumerate().take(n) {
        open += c;
        if k >= 1 && open == 0 {
            cuts.push(k);
        }
    }
    Ok(cuts)
}

/// Sites of the trace adjacent to the unbounded component of its complement.
///
/// The complement is flooded with 4-connectivity from the border of a grid
/// padded by one cell around the trace's bounding box.
pub fn frontier(path: &LatticePath) -> Vec<Site> {
    let sites = path.site_index.keys();
    let (mut x0, mut y0, mut x1, mut y1) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    for &(x, y) in sites {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let (w, h) = ((x1 - x0 + 3) as usize, (y1 - y0 + 3) as usize);
    let idx = |x: i32, y: i32| (y - y0 + 1) as usize * w + (x - x0 + 1) as usize;
    let mut occupied = vec![false; w * h];
    for &(x, y) in path.site_index.keys() {
        occupied[idx(x, y)] = true;
    }
    let mut outside = vec![false; w * h];
    let mut stack = vec![0usize];
    outside[0] = true;
    while let Some(k) = stack.pop() {
        let (cx, cy) = (k % w, k / w);
        let mut push = |j: usize| {
            if !occupied[j] && !outside[j] {
                outside[j] = true;
                stack.push(j);
            }
        };
        if cx > 0 {
            push(k - 1);
        }
        if cx + 1 < w {
            push(k + 1);
        }
        if cy > 0 {
            push(k - w);
        }
        if cy + 1 < h {
            push(k + w);
        }
    }
    let mut out: Vec<Site> = path
        .site_index
        .keys()
        .copied()
        .filter(|&(x, y)| {
            let k = idx(x, y);
            outside[k - 1] || outside[k + 1] || outside[k - w] || outside[k + w]
        })
        .collect();
    out.sort_unstable();
    out
}

/// Number of boxes of side `scale` that contain at least one site.
pub fn box_count(points: &[Site], scale: u32) -> usize {
    let s = scale as i32;
    let boxes: FxHashSet<Site> = points
        .iter()
        .map(|&(x, y)| (x.div_euclid(s), y.div_euclid(s)))
        .collect();
    boxes.len()
}

/// Box-counting dimension: the slope of `log N(scale)` against `log(1/scale)`.
pub fn fractal_dimension(points: &[Site], scales: &[u32]) -> Result<FitResult> {
    ensure(scales.len() >= 2, "scales", || {
        format!("need at least two scales, got {}", scales.len())
    })?;
    ensure(scales.iter().all(|s| s.is_power_of_two()), "scales", || {
        "scales must be powers of two".into()
    })?;
    ensure(!points.is_empty(), "points", || "empty point set".into())?;
    let counts: Vec<usize> = scales.iter().map(|&s| box_count(points, s)).collect();
    if counts.iter().all(|&c| c == 1) {
        return Err(Error::Degenerate(
            "all points fall in one box at every scale".into(),
        ));
    }
    fit_counts(
        scales,
        &counts.iter().map(|&c| c as f64).collect::<Vec<_>>(),
        &[],
    )
}

/// Fits mean box counts (with optional standard errors) against `1/scale`.
pub fn fit_counts(scales: &[u32], counts: &[f64], stderr: &[f64]) -> Result<FitResult> {
    let samples: Vec<FitSample> = scales
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (&s, &c))| {
            FitSample::new(1.0 / s as f64, c, stderr.get(i).copied().unwrap_or(0.0))
        })
        .collect();
    fit_loose(&samples, Axis::LogLog)
}

/// Box counts of the cut-point sites and frontier sites of one walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkBoxCounts {
    pub steps: usize,
    pub cut_points: usize,
    pub frontier: usize,
    pub cut_counts: Vec<usize>,
    pub frontier_counts: Vec<usize>,
}

/// Simulates one `k`-step walk and box-counts its cut points and frontier at each scale.
pub fn walk_box_counts(
    k: usize,
    scales: &[u32],
    stream: &mut RandomStream,
) -> Result<WalkBoxCounts> {
    let path = simulate_walk(k, (0, 0), stream)?;
    let cut_sites: Vec<Site> = cut_points(&path)?
        .into_iter()
        .map(|t| path.positions[t])
        .collect();
    let front = frontier(&path);
    Ok(WalkBoxCounts {
        steps: k,
        cut_points: cut_sites.len(),
        frontier: front.len(),
        cut_counts: scales.iter().map(|&s| box_count(&cut_sites, s)).collect(),
        frontier_counts: scales.iter().map(|&s| box_count(&front, s)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_cut_points(path: &LatticePath) -> Vec<usize> {
        let p = &path.positions;
        (1..p.len() - 1)
            .filter(|&k| {
                let past: FxHashSet<Site> = p[..=k].iter().copied().collect();
                p[k + 1..].iter().all(|s| !past.contains(s))
            })
            .collect()
    }

    #[test]
    fn one_step_uniform() {
        let mut s = RandomStream::new(1, 0);
        let mut counts = [0u32; 4];
        let n = 100_000;
        for _ in 0..n {
            let p = simulate_walk(1, (0, 0), &mut s).unwrap();
            counts[MOVES.iter().position(|&m| m == p.positions[1]).unwrap()] += 1;
        }
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        assert!(
            counts
                .iter()
                .all(|&c| (c as f64 - n as f64 / 4.0).abs() < 3.0 * sd),
            "{counts:?}"
        );
        assert!(simulate_walk(0, (0, 0), &mut s).is_err());
    }

    #[test]
    fn replay_is_identical() {
        let a = simulate_walk(500, (3, -2), &mut RandomStream::new(8, 1)).unwrap();
        let b = simulate_walk(500, (3, -2), &mut RandomStream::new(8, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.positions[0], (3, -2));
    }

    #[test]
    fn site_index_consistent() {
        let p = simulate_walk(2000, (0, 0), &mut RandomStream::new(2, 0)).unwrap();
        let q = LatticePath::from_positions(p.positions.clone()).unwrap();
        assert_eq!(p.site_index, q.site_index);
        assert!(LatticePath::from_positions(vec![(0, 0), (1, 1)]).is_err());
    }

    #[test]
    fn one_step_nonintersection_exact() {
        // All 16 pairs of first steps.
        let mut disjoint = 0;
        for a in MOVES {
            for b in MOVES {
                let sa = [PACK_STARTS[0], (a.0, a.1)];
                let sb = [PACK_STARTS[1], (1 + b.0, b.1)];
                if sa.iter().all(|x| !sb.contains(x)) {
                    disjoint += 1;
                }
            }
        }
        assert_eq!(disjoint, 9);
        let acc =
            nonintersection_time_probability(1, 1, &[1], 100_000, &mut RandomStream::new(4, 0))
                .unwrap();
        assert!((acc[0].mean() - 9.0 / 16.0).abs() < 3.0 * acc[0].stderr());
    }

    #[test]
    fn straight_and_backtrack_cut_points() {
        let line = LatticePath::from_positions((0..10).map(|x| (x, 0)).collect()).unwrap();
        assert_eq!(cut_points(&line).unwrap(), (1..9).collect::<Vec<_>>());
        let back = LatticePath::from_positions(vec![(0, 0), (1, 0), (0, 0)]).unwrap();
        assert!(cut_points(&back).unwrap().is_empty());
        assert!(cut_points(&LatticePath::from_positions(vec![(0, 0), (1, 0)]).unwrap()).is_err());
    }

    #[test]
    fn solid_square_dimension() {
        let pts: Vec<Site> = (0..256)
            .flat_map(|x| (0..256).map(move |y| (x, y)))
            .collect();
        let f = fractal_dimension(&pts, &[2, 4, 8, 16, 32]).unwrap();
        assert!((f.slope - 2.0).abs() < 0.01);
        assert!(fractal_dimension(&[(0, 0)], &[2, 4]).is_err());
        assert!(fractal_dimension(&pts, &[3, 6]).is_err());
    }

    #[test]
    fn frontier_of_a_ring_excludes_inside() {
        // A closed 4×4 square loop around (1..3, 1..3), plus an interior spur.
        let mut pos = vec![];
        for x in 0..=4 {
            pos.push((x, 0));
        }
        for y in 1..=4 {
            pos.push((4, y));
        }
        for x in (0..4).rev() {
            pos.push((x, 4));
        }
        for y in (0..4).rev() {
            pos.push((0, y));
        }
        pos.push((1, 0));
        pos.push((1, 1));
        pos.push((2, 1));
        let path = LatticePath::from_positions(pos).unwrap();
        let f = frontier(&path);
        assert!(!f.contains(&(1, 1)) && !f.contains(&(2, 1)));
        assert_eq!(f.len(), 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cut_points_match_brute_force(seed in 0u64..1_000_000, len in 2usize..512) {
            let p = simulate_walk(len, (0, 0), &mut RandomStream::new(seed, 0)).unwrap();
            prop_assert_eq!(cut_points(&p).unwrap(), brute_cut_points(&p));
        }
    }
}
