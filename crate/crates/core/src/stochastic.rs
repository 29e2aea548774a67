//! Reproducible random streams and mergeable statistics.
//!
//! Every Monte Carlo routine in the crate draws from a [`RandomStream`]: a
//! ChaCha8 keystream keyed by `seed` whose 64-bit stream selector is
//! `stream_id`. ChaCha is counter based, so `(seed, stream_id, position)`
//! fully determines every subsequent draw. Parallel experiments split work
//! into fixed chunks and give chunk `k` the stream `(seed, k)`; results are
//! merged in chunk order, which makes them independent of the worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A deterministic source of uniforms and Gaussians.
///
/// Streams are plain values: clone one to replay it, move it to another
/// worker to continue it there. One stream is never shared between threads.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position in the keystream, in 32-bit words.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// A child stream under the same seed, addressed by `(stream_id, index)`.
    pub fn substream(&self, index: u64) -> RandomStream {
        RandomStream::new(self.seed, mix_stream(self.stream_id, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX.wrapping_rem(n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal variate by the Marsaglia polar method.
    ///
    /// Pairs `(u, v)` uniform on the square are rejected outside the unit
    /// disk; `s = u² + v²` then yields two independent normals
    /// `u·√(−2 ln s / s)` and `v·√(−2 ln s / s)`. The second is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    /// `n` independent N(0, dt) draws.
    pub fn gaussian_increments(&mut self, n: usize, dt: f64) -> Result<Vec<f64>> {
        ensure(n >= 1, "n", || "at least one increment is required".into())?;
        ensure(dt > 0.0 && dt.is_finite(), "dt", || {
            format!("must be positive, got {dt}")
        })?;
        let sd = dt.sqrt();
        Ok((0..n).map(|_| sd * self.gaussian()).collect())
    }
}

/// SplitMix64 finalizer applied to a pair, used to address substreams.
fn mix_stream(stream_id: u64, index: u64) -> u64 {
    let mut z = stream_id
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples the minimum and maximum of a Brownian bridge.
///
/// The bridge runs from 0 to `delta` with total variance `var`. Each
/// extremum is drawn from its exact conditional law
/// `m = (Δ − √(Δ² − 2 var ln U)) / 2`; the two are drawn with independent
/// uniforms, which is exact for each marginal.
pub fn bridge_extrema(stream: &mut RandomStream, delta: f64, var: f64) -> (f64, f64) {
    let u1 = stream.uniform_open();
    let u2 = stream.uniform_open();
    let lo = 0.5 * (delta - (delta * delta - 2.0 * var * u1.ln()).sqrt());
    let hi = 0.5 * (delta + (delta * delta - 2.0 * var * u2.ln()).sqrt());
    (lo, hi)
}

/// Running count, sum and sum of squares of a real sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Accumulator::new();
        for x in xs {
            acc.push(x);
        }
        acc
    }

    /// Componentwise sum of the two accumulators.
    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        Accumulator {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance, clamped at zero against rounding.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Splits `total` trials into fixed chunks and runs them in parallel.
///
/// Chunk `k` covers trials `k*chunk..min((k+1)*chunk, total)` and receives
/// `RandomStream::new(seed, stream_base + k)`. Results come back in chunk
/// order, so any fold over them is independent of the rayon pool size.
pub fn run_chunked<T, F>(seed: u64, stream_base: u64, total: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RandomStream, usize) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let len = chunk.min(total - k * chunk);
            let mut stream = RandomStream::new(seed, stream_base + k as u64);
            f(&mut stream, len)
        })
        .collect()
}

/// Merges per-chunk accumulator vectors elementwise, in order.
pub fn merge_all(parts: &[Vec<Accumulator>]) -> Vec<Accumulator> {
    let width = parts.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![Accumulator::new(); width];
    for part in parts {
        for (o, a) in out.iter_mut().zip(part) {
            *o = o.merge(a);
        }
    }
    out
}
