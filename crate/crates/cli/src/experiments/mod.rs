//! Named experiments. Each one is a pure function of its configuration and
//! seed; it returns the tables to write, plots over those tables, and the
//! scalar results recorded in the run manifest.

pub mod cardy;
pub mod excursion;
pub mod exponents;
pub mod sle;
pub mod universality;
pub mod walk;

use slelab::fit::FitResult;
use slelab::stochastic::{merge_all, run_chunked, Accumulator, RandomStream};

use crate::error::CliResult;
use crate::manifest::{Metric, StreamBlock};
use crate::plot::PlotSpec;
use crate::table::Table;

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Inputs and outputs are relative to the run directory.
    pub plots: Vec<PlotSpec>,
    pub metrics: Vec<Metric>,
    pub layout: Vec<StreamBlock>,
}

impl Outcome {
    /// The table named `name`.
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Streams of block `k` start at `k · BLOCK_STRIDE`, so blocks never share a stream.
pub const BLOCK_STRIDE: u64 = 1 << 32;

/// Fewest scales an exponent fit accepts.
pub const MIN_FIT_POINTS: usize = 3;

/// Runs `total` trials of a block in fixed chunks and merges the per-chunk accumulators.
pub(crate) fn chunked_accumulate<F>(
    seed: u64,
    block: &StreamBlock,
    f: F,
) -> CliResult<Vec<Accumulator>>
where
    F: Fn(&mut RandomStream, usize) -> slelab::Result<Vec<Accumulator>> + Sync + Send,
{
    let parts = run_chunked(seed, block.stream_base, block.trials, block.chunk, f);
    let parts: Vec<Vec<Accumulator>> = parts.into_iter().collect::<slelab::Result<_>>()?;
    Ok(merge_all(&parts))
}

pub(crate) fn block(
    label: impl Into<String>,
    index: u64,
    trials: usize,
    chunk: usize,
) -> StreamBlock {
    StreamBlock {
        label: label.into(),
        stream_base: index * BLOCK_STRIDE,
        trials,
        chunk,
    }
}

/// Slope metric, checked against `target ± tolerance` when a tolerance is given.
pub(crate) fn slope_metric(
    name: &str,
    fit: &FitResult,
    target: f64,
    tolerance: Option<f64>,
) -> Metric {
    let m = Metric::value(name, fit.slope).with_stderr(fit.slope_stderr);
    match tolerance {
        Some(tol) => m.against(target, tol),
        None => Metric {
            target: Some(target),
            ..m
        },
    }
}

/// Shared columns of every `fit` table.
pub(crate) const FIT_COLUMNS: [&str; 9] = [
    "series",
    "slope",
    "slope_stderr",
    "expected",
    "deviation",
    "intercept",
    "r_squared",
    "n_points",
    "pair_slopes",
];

pub(crate) fn fit_row(series: &str, fit: &FitResult, expected: f64) -> Vec<String> {
    let pairs: Vec<String> = fit.pair_slopes.iter().map(f64::to_string).collect();
    crate::row![
        series,
        fit.slope,
        fit.slope_stderr,
        expected,
        fit.slope - expected,
        fit.intercept,
        fit.r_squared,
        fit.n_points,
        pairs.join(" ")
    ]
}

/// Powers of two from `lo` to `hi` inclusive.
pub fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = lo.next_power_of_two();
    while k <= hi {
        out.push(k);
        k *= 2;
    }
    out
}
