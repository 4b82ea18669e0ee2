//! The unconstrained-power AWGN channel and the per-level modulo channels
//! seen by the multistage decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Magnitude at which channel and decoder LLRs are clipped.
pub const LLR_SATURATION: f64 = 70.0;

/// Generator for trial `counter` under `seed`. Each trial gets its own
/// ChaCha stream, so trials can be drawn in any order or on any worker.
pub fn trial_rng(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// Real AWGN channel with per-dimension noise variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnChannel {
    sigma2: f64,
    sigma: f64,
}

impl AwgnChannel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self {
            sigma2,
            sigma: sigma2.sqrt(),
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `y = x + noise` for trial `counter`.
    pub fn sample(&self, x: &[f64], seed: u64, counter: u64) -> Vec<f64> {
        let mut rng = trial_rng(seed, counter);
        let mut y = x.to_vec();
        self.add_noise(&mut rng, &mut y);
        y
    }

    pub fn add_noise<R: rand::Rng + ?Sized>(&self, rng: &mut R, y: &mut [f64]) {
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += self.sigma * z;
        }
    }
}

/// Free-function form of [`AwgnChannel::sample`].
pub fn awgn_sample(x: &[f64], sigma2: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(AwgnChannel::new(sigma2)?.sample(x, seed, 0))
}

/// `|mod_2(y + 1) - 1|`: folds `y` into `[0, 1]`, keeping its distance to the
/// nearest even and odd integers.
pub fn mod_star(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(invalid(format!("mod* of non-finite value {y}")));
    }
    Ok(fold(y))
}

#[inline]
pub(crate) fn fold(y: f64) -> f64 {
    ((y + 1.0).rem_euclid(2.0) - 1.0).abs()
}

/// Number of integer cosets summed on each side of the folded value.
pub fn replica_radius(sigma2: f64) -> i64 {
    (6.0 * sigma2.sqrt()).ceil() as i64 + 2
}

/// Coset LLR `ln P(y~ | even) - ln P(y~ | odd)` for a folded observation
/// under Gaussian noise of variance `sigma2`, clipped to
/// [`LLR_SATURATION`].
pub fn llr_from_amgn(y: f64, sigma2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(invalid(format!("folded value {y} outside [0, 1]")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(coset_llr(y, sigma2, replica_radius(sigma2)))
}

/// Replica sum truncated at `radius` cosets per side. Terms are relative to
/// the dominant replica (0 for even, 1 for odd), so
/// `LLR = (1 - 2y) / (2 sigma2) + ln(1 + S_even) - ln(1 + S_odd)`.
pub(crate) fn coset_llr(y: f64, sigma2: f64, radius: i64) -> f64 {
    let inv = 0.5 / sigma2;
    let tail = |anchor: f64, parity: i64| -> f64 {
        let base = (y - anchor) * (y - anchor);
        let mut s = 0.0;
        // walk outward in both directions; terms shrink monotonically
        for dir in [-1i64, 1] {
            let mut step = 1;
            while step <= radius {
                let k = anchor as i64 + dir * 2 * step;
                debug_assert_eq!(k.rem_euclid(2), parity);
                let d = y - k as f64;
                let t = (-(d * d - base) * inv).exp();
                s += t;
                if t < 1e-18 {
                    break;
                }
                step += 1;
            }
        }
        s
    };
    let s_even = tail(0.0, 0);
    let s_odd = tail(1.0, 1);
    let l = (1.0 - 2.0 * y) * inv + s_even.ln_1p() - s_odd.ln_1p();
    l.clamp(-LLR_SATURATION, LLR_SATURATION)
}

/// The equivalent channel at Construction D level `i`: noise variance
/// `sigma2_0 / 4^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgnLevel {
    level: usize,
    sigma2: f64,
    radius: i64,
}

impl AmgnLevel {
    pub fn new(sigma2_0: f64, level: usize) -> Result<Self> {
        if !(sigma2_0 > 0.0 && sigma2_0.is_finite()) {
            return Err(invalid(format!(
                "noise variance must be positive, got {sigma2_0}"
            )));
        }
        let sigma2 = sigma2_0 / 4f64.powi(level as i32);
        Ok(Self {
            level,
            sigma2,
            radius: replica_radius(sigma2),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Folds each received value and converts it to a coset LLR.
    pub fn llrs_into(&self, y: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(y) {
            *o = coset_llr(fold(v), self.sigma2, self.radius);
        }
    }
}
