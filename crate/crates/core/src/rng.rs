//! Deterministic random streams.
//!
//! Every random draw in this crate flows from a single master seed through
//! SplitMix64. The stream layout is part of the reproducibility contract:
//!
//! * `mix64` is the SplitMix64 finalizer.
//! * Stream `k` of a master seed starts from `stream_seed(master, k)`,
//!   defined as `mix64(master + (k + 1) * GOLDEN_GAMMA)` — i.e. the
//!   `(k+1)`-th raw output of a SplitMix64 sequence seeded with `master`.
//! * Two-sided environments use the stateless `indexed_draw(seed, n)` so a
//!   draw at index `n ∈ Z` depends only on `(seed, n)`, never on query
//!   order.
//!
//! These definitions are frozen: campaign outputs are byte-stable across
//! thread counts and releases because of them.

/// Weyl-sequence increment used by SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;
const INDEX_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Seed of derived stream `stream` under `master`.
#[inline]
pub fn stream_seed(master: u64, stream: u64) -> u64 {
    mix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Stateless draw addressed by a signed index (negative indices allowed).
///
/// `n` is reinterpreted as two's-complement `u64`, spread by the golden
/// gamma, salted, finalized, and folded with the seed under a second
/// finalization round.
#[inline]
pub fn indexed_draw(seed: u64, n: i64) -> u64 {
    mix64(seed ^ mix64((n as u64).wrapping_mul(GOLDEN_GAMMA).wrapping_add(INDEX_SALT)))
}

/// Convert 64 random bits to a double in `[0, 1)` with 53-bit resolution.
#[inline]
pub fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for derived stream `stream` under `master`.
    pub fn for_stream(master: u64, stream: u64) -> Self {
        Self::new(stream_seed(master, stream))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform double in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_from_bits(self.next_u64())
    }

    /// Uniform double in `(0, 1]`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard exponential variate.
    #[inline]
    pub fn next_exp(&mut self) -> f64 {
        -self.next_open01().ln()
    }

    /// Standard normal variate (one-shot Box–Muller; the sine branch is
    /// discarded to keep the draw count per call fixed).
    pub fn next_normal(&mut self) -> f64 {
        let r = (-2.0 * self.next_open01().ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * self.next_f64();
        r * theta.cos()
    }

    /// Gamma(shape, 1) variate via Marsaglia–Tsang squeeze.
    pub fn next_gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            // boost: Gamma(a) = Gamma(a + 1) * U^{1/a}
            let g = self.next_gamma(shape + 1.0);
            return g * self.next_open01().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.next_normal();
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = self.next_open01();
            if u < 1.0 - 0.0331 * x.powi(4) {
                return d * v;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Dirichlet(alpha, ..., alpha) sample of length `m`.
    pub fn next_dirichlet(&mut self, alpha: f64, m: usize) -> Vec<f64> {
        let mut g: Vec<f64> = if (alpha - 1.0).abs() < f64::EPSILON {
            (0..m).map(|_| self.next_exp()).collect()
        } else {
            (0..m).map(|_| self.next_gamma(alpha)).collect()
        };
        let total: f64 = g.iter().sum();
        for v in &mut g {
            *v /= total;
        }
        g
    }
}
