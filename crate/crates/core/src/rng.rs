//! Deterministic random streams.
//!
//! The generator is SplitMix64: a 64-bit counter advanced by the golden-ratio
//! increment, with the output produced by a fixed avalanche mix. The state
//! update is spelled out here (not delegated to an external crate) so that a
//! given `(seed, stream_id)` pair replays the same coordinate sequence on any
//! platform and under any dependency upgrade.
//!
//! State update per draw:
//! ```text
//! state <- state + 0x9E3779B97F4A7C15            (mod 2^64)
//! z <- state
//! z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (mod 2^64)
//! z <- (z ^ (z >> 27)) * 0x94D049BB133111EB      (mod 2^64)
//! output <- z ^ (z >> 31)
//! ```
//! The initial state is `mix(seed) + mix(stream_id ^ 0x9E3779B97F4A7C15)`,
//! where `mix` is the same avalanche function, so streams drawn from one
//! master seed are decorrelated.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string; used to derive per-solver stream ids from names.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A single-owner random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    /// Second variate of the most recent polar-method pair.
    spare_gaussian: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            state: mix64(seed).wrapping_add(mix64(stream_id ^ GOLDEN)),
            spare_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased integer in `[0, n)` (multiply-shift with rejection).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Standard normal variate via the Marsaglia polar method. The second
    /// variate of each accepted pair is cached and returned on the next call.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare_gaussian.take() {
            return g;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare_gaussian = Some(v * scale);
                return u * scale;
            }
        }
    }

    /// `count` distinct indices drawn uniformly from `{0, .., len-1}`,
    /// returned in ascending order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, len: usize, count: usize) -> Vec<usize> {
        assert!(count <= len);
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..count {
            let j = i + self.next_below((len - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut chosen = pool[..count].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

/// Uniform coordinate index in `{0, .., n_hat-1}`, advancing the stream.
pub fn sample_coordinate(rng: &mut RngStream, n_hat: usize) -> usize {
    debug_assert!(n_hat >= 1);
    rng.next_below(n_hat as u64) as usize
}
