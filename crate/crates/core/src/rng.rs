//! Small splittable pseudo-random generator.
//!
//! Every random quantity in the experiment harness (matrix entries, support
//! sets, magnitudes, noise) is drawn from its own stream keyed by
//! `(seed, trial, purpose)`. Streams are independent of each other and of the
//! order in which trials run, so trial results are reproducible bit for bit
//! and trials can execute concurrently without sharing generator state.

/// What a derived stream is used for. Each purpose gets a distinct stream so
/// that, for example, enlarging the sensing matrix does not shift the noise
/// draws of the same trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Matrix,
    Support,
    Signs,
    Magnitudes,
    Noise,
    Check,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Matrix => 0x11,
            Purpose::Support => 0x22,
            Purpose::Signs => 0x33,
            Purpose::Magnitudes => 0x44,
            Purpose::Noise => 0x55,
            Purpose::Check => 0x66,
        }
    }
}

/// SplitMix64 finalizer; full-period mixer with good avalanche behavior.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            state: mix(seed),
            spare_normal: None,
        }
    }

    /// Derives the stream for one purpose of one trial.
    pub fn for_trial(seed: u64, trial: u64, purpose: Purpose) -> Self {
        Rng {
            state: Self::stream_key(seed, trial, purpose),
            spare_normal: None,
        }
    }

    /// The key also serves as the `seed_used` record of a trial.
    pub fn stream_key(seed: u64, trial: u64, purpose: Purpose) -> u64 {
        mix(mix(mix(seed) ^ trial.wrapping_mul(0xa076_1d64_78bd_642f)) ^ purpose.tag())
    }

    /// Child generator independent of further draws from `self`.
    pub fn split(&mut self, tag: u64) -> Self {
        Rng {
            state: mix(self.next_u64() ^ mix(tag)),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        mix(self.state)
    }

    /// Uniform on [0, 1): 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1]; safe as a logarithm argument.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound). Lemire multiply-shift; the O(bound/2^64)
    /// bias is irrelevant at the sizes used here.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller; caches the second draw of each pair.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let r = (-2.0 * self.uniform_open().ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * self.uniform();
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `count` distinct indices from [0, n), ascending. Fisher-Yates prefix.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n, "cannot sample {count} of {n} indices");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        let mut picked = pool[..count].to_vec();
        picked.sort_unstable();
        picked
    }
}
