//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the experiment seed, with the
//! ChaCha stream id selecting an independent sub-sequence per consumer. The
//! ChaCha8 keystream and the `rand_distr` normal sampler are both
//! platform-independent, so identical seeds give identical draws everywhere.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Named consumers of randomness. Each gets its own sub-stream so that, for
/// example, enabling dropout never perturbs the weight initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    WeightInit,
    EpsNoise,
    Dropout,
    Shuffle,
    Data,
    Test,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::WeightInit => 1,
            Stream::EpsNoise => 2,
            Stream::Dropout => 3,
            Stream::Shuffle => 4,
            Stream::Data => 5,
            Stream::Test => 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: Stream,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.id());
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// True with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random::<f64>() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
