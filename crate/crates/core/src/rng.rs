//! Seeded random streams shared by every generator in the crate.
//!
//! The stream is SplitMix64: the state advances by the golden-ratio increment
//! `0x9E3779B97F4A7C15` and each output is the state passed through
//! [`mix64`]. All derived quantities are documented bit-for-bit so the same
//! `(parameters, seed)` reproduces identical matrices in any language:
//!
//! * sign: one output `u`; `-1` if the top bit of `u` is set, else `+1`.
//! * unit interval: `(u >> 11) * 2^-53`, in `[0, 1)`.
//! * bounded integer: `((u as u128 * bound) >> 64)`, in `[0, bound)`.
//! * standard normal: Box-Muller over two consecutive outputs `u1, u2`,
//!   `r = sqrt(-2 ln(1 - unit(u1)))`, `theta = 2 pi unit(u2)`; the cosine
//!   variate is returned first and the sine variate is cached for the next
//!   call.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of labels.
///
/// `h = master`; for each label in order, rotate `h` left by 23 bits (except
/// before the first label), then `h = mix64(h ^ (label + GOLDEN))`.
/// Order matters: `[1, 2]` and `[2, 1]` give different seeds.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut h = master;
    for (i, &label) in labels.iter().enumerate() {
        if i > 0 {
            h = h.rotate_left(23);
        }
        h = mix64(h ^ label.wrapping_add(GOLDEN));
    }
    h
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// Uniform integer in `[0, bound)`; `bound` must be nonzero.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}
