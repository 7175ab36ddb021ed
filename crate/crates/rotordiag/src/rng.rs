//! Seeded random number generation shared by every stochastic component.
//!
//! All randomness in this crate flows through [`SplitMix64`] so that runs are
//! reproducible bit-for-bit in the integer stream on every platform. Derived
//! floating-point values (uniforms, Gaussians) go through `f64` math and are
//! expected to agree across platforms to at least 1e-12 relative.

/// SplitMix64 generator.
///
/// The state advances by the golden-ratio increment and the output is the
/// standard two-round xor-multiply finalizer.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in the half-open interval [0, 1), using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in the open-closed interval (0, 1]; safe as a log argument.
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in [0, bound) by rejection, bias-free.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Standard-normal source: Box-Muller over a [`SplitMix64`] stream.
///
/// Draws two uniforms per transform and caches the second deviate, so the
/// consumed integer stream depends only on the number of samples requested.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_f64_open();
        let u2 = self.rng.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Derive an independent child seed from a base seed and a stream tag.
///
/// Streams with distinct tags are statistically independent; the derivation is
/// pure so the same (seed, tag) pair always names the same stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = SplitMix64::new(base ^ stream.wrapping_mul(GOLDEN_GAMMA));
    rng.next_u64()
}
