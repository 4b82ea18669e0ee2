//! Density evolution for polar codes over the modulo-Gaussian channel.
//!
//! Densities are probability masses on a uniform LLR grid `[-M, M]` with the
//! mass beyond the ends folded into the end bins. Variable-node combining is
//! a plain convolution (done with an FFT); check-node combining is computed
//! exactly on the grid by thresholding the output CCDF, using the identity
//! `2 atanh(tanh(a/2) tanh(b/2)) = phi(phi(a) + phi(b))` with
//! `phi(x) = -ln tanh(x/2)` for `a, b > 0`.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erfc;

use crate::channel::{coset_llr, replica_radius};
use crate::error::{invalid, Error, Result};
use crate::polar::log2_exact;

/// Largest block length accepted by [`evolve`].
pub const MAX_BLOCK_LENGTH: usize = 1 << 16;

/// VN outputs below this are treated as FFT round-off and dropped.
const FFT_FLOOR: f64 = 1e-15;

/// Uniform LLR grid: bin `i` is centred at `(i - half_bins) * step`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    half_bins: usize,
    step: f64,
}

impl Default for Grid {
    /// `M = 60`, `step = 0.01`, 12001 bins.
    fn default() -> Self {
        Self {
            half_bins: 6000,
            step: 0.01,
        }
    }
}

impl Grid {
    pub fn new(max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(invalid(format!("grid step {step} outside (0, 0.5]")));
        }
        if !(max > step) {
            return Err(invalid(format!("grid range {max} not above step {step}")));
        }
        let half_bins = (max / step).round() as usize;
        if half_bins >= u16::MAX as usize - 1 {
            return Err(invalid(format!("grid with {half_bins} half-bins is too fine")));
        }
        Ok(Self { half_bins, step })
    }

    pub fn half_bins(&self) -> usize {
        self.half_bins
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn max(&self) -> f64 {
        self.half_bins as f64 * self.step
    }

    pub fn bins(&self) -> usize {
        2 * self.half_bins + 1
    }

    pub fn value(&self, i: usize) -> f64 {
        (i as f64 - self.half_bins as f64) * self.step
    }

    /// Nearest bin, clipping to the ends.
    pub fn bin_of(&self, llr: f64) -> usize {
        let i = (llr / self.step).round() + self.half_bins as f64;
        i.clamp(0.0, (self.bins() - 1) as f64) as usize
    }
}

/// Probability mass over an LLR [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LlrDensity {
    grid: Grid,
    mass: Vec<f64>,
}

impl LlrDensity {
    pub fn new(grid: Grid, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.bins() {
            return Err(Error::LengthMismatch {
                expected: grid.bins(),
                actual: mass.len(),
            });
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("density mass must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("density mass sums to {total}")));
        }
        Ok(Self { grid, mass })
    }

    pub fn point_mass(grid: Grid, llr: f64) -> Self {
        let mut mass = vec![0.0; grid.bins()];
        mass[grid.bin_of(llr)] = 1.0;
        Self { grid, mass }
    }

    /// Empirical density of `samples`, each rounded to its nearest bin.
    pub fn from_samples(grid: Grid, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("no samples"));
        }
        let mut mass = vec![0.0; grid.bins()];
        let w = 1.0 / samples.len() as f64;
        for &s in samples {
            mass[grid.bin_of(s)] += w;
        }
        Ok(Self { grid, mass })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * self.grid.value(i))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let d = self.grid.value(i) - mu;
                m * d * d
            })
            .sum()
    }

    /// Hard-decision error probability: mass below zero plus half the mass at zero.
    pub fn error_probability(&self) -> f64 {
        let h = self.grid.half_bins;
        let neg: f64 = self.mass[..h].iter().sum();
        neg + 0.5 * self.mass[h]
    }

    /// Mass strictly below zero.
    pub fn negative_mass(&self) -> f64 {
        self.mass[..self.grid.half_bins].iter().sum()
    }

    /// `P(|L| > t)`.
    pub fn mass_beyond(&self, t: f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.value(*i).abs() > t)
            .map(|(_, m)| m)
            .sum()
    }

    /// Writes `llr_bin_center,mass` rows for nonzero bins.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "llr_bin_center,mass")?;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                writeln!(w, "{},{:e}", self.grid.value(i), m)?;
            }
        }
        Ok(())
    }

    fn renormalize(&mut self) {
        let total: f64 = self.mass.iter().sum();
        if total > 0.0 {
            for m in self.mass.iter_mut() {
                *m /= total;
            }
        }
    }
}

/// Per-position hard-decision error probabilities `p_j` of a polar code,
/// assuming all earlier positions were decided correctly.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionReliabilities {
    p: Vec<f64>,
    convolutions: usize,
}

impl PositionReliabilities {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        log2_exact(p.len())?;
        Ok(Self { p, convolutions: 0 })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Number of density convolutions performed to produce these values.
    pub fn convolutions(&self) -> usize {
        self.convolutions
    }
}

/// `1 - prod_{j in I} (1 - p_j)`.
pub fn de_wer(p: &PositionReliabilities, info_set: &[usize]) -> Result<f64> {
    let n = p.n();
    let mut log_ok = 0.0;
    for &j in info_set {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        log_ok += (-p.p[j].clamp(0.0, 1.0)).ln_1p();
    }
    Ok(-log_ok.exp_m1())
}

/// Tables and FFT plans for one grid.
pub struct DensityEvolver {
    grid: Grid,
    fft_len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// `thresholds[row_start[t] + (a - t)]`: smallest magnitude bin `b` with
    /// `f(a, b) >= (t - 1/2) step`, or `half_bins + 1` if none.
    thresholds: Vec<u16>,
    row_start: Vec<usize>,
}

impl std::fmt::Debug for DensityEvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityEvolver")
            .field("grid", &self.grid)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

/// `-ln tanh(x / 2)`, accurate for small and large `x`.
fn phi(x: f64) -> f64 {
    if x > 1.0 {
        let e = (-x).exp();
        e.ln_1p() - (-e).ln_1p()
    } else {
        -(0.5 * x).tanh().ln()
    }
}

impl DensityEvolver {
    pub fn new(grid: Grid) -> Self {
        let m = grid.half_bins;
        let fft_len = (2 * grid.bins() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_len);
        let ifft = planner.plan_fft_inverse(fft_len);

        let phi_bin: Vec<f64> = (0..=m + 1)
            .map(|b| {
                if b == 0 {
                    f64::INFINITY
                } else {
                    phi(b as f64 * grid.step)
                }
            })
            .collect();
        let mut row_start = vec![0usize; m + 2];
        let mut total = 0;
        for t in 1..=m {
            row_start[t] = total;
            total += m - t + 1;
        }
        row_start[m + 1] = total;
        let mut thresholds = vec![0u16; total];
        for t in 1..=m {
            let target = phi((t as f64 - 0.5) * grid.step);
            let mut b = m + 1;
            for a in t..=m {
                let rhs = target - phi_bin[a];
                while b > 1 && phi_bin[b - 1] <= rhs {
                    b -= 1;
                }
                thresholds[row_start[t] + a - t] = b as u16;
            }
        }
        Self {
            grid,
            fft_len,
            fft,
            ifft,
            thresholds,
            row_start,
        }
    }

    /// Evolver for `grid`, built once per process and shared.
    pub fn shared(grid: Grid) -> Arc<DensityEvolver> {
        static CACHE: OnceLock<Mutex<Vec<Arc<DensityEvolver>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(e) = guard.iter().find(|e| e.grid == grid) {
            return e.clone();
        }
        let e = Arc::new(DensityEvolver::new(grid));
        guard.push(e.clone());
        e
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn check(&self, d: &LlrDensity) -> Result<()> {
        if d.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Density of `L1 + L2`.
    pub fn vn_convolve(&self, d1: &LlrDensity, d2: &LlrDensity) -> Result<LlrDensity> {
        self.check(d1)?;
        self.check(d2)?;
        let mut a = self.spectrum(d1);
        if std::ptr::eq(d1, d2) {
            for v in a.iter_mut() {
                *v = *v * *v;
            }
        } else {
            let b = self.spectrum(d2);
            for (x, y) in a.iter_mut().zip(&b) {
                *x *= *y;
            }
        }
        self.ifft.process(&mut a);
        let scale = 1.0 / self.fft_len as f64;
        let h = self.grid.half_bins;
        let last = self.grid.bins() - 1;
        let mut mass = vec![0.0; self.grid.bins()];
        // full convolution index k has value (k - 2h) * step
        for (k, v) in a.iter().take(2 * self.grid.bins() - 1).enumerate() {
            let x = v.re * scale;
            if x <= FFT_FLOOR {
                continue;
            }
            let bin = (k as isize - h as isize).clamp(0, last as isize) as usize;
            mass[bin] += x;
        }
        let mut out = LlrDensity {
            grid: self.grid,
            mass,
        };
        out.renormalize();
        Ok(out)
    }

    fn spectrum(&self, d: &LlrDensity) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (b, &m) in buf.iter_mut().zip(&d.mass) {
            b.re = m;
        }
        self.fft.process(&mut buf);
        buf
    }

    /// Density of `2 atanh(tanh(L1/2) tanh(L2/2))`, each output rounded to
    /// its nearest bin.
    pub fn cn_convolve(&self, d1: &LlrDensity, d2: &LlrDensity) -> Result<LlrDensity> {
        self.check(d1)?;
        self.check(d2)?;
        let m = self.grid.half_bins;
        let split = |d: &LlrDensity| -> (Vec<f64>, Vec<f64>) {
            let mut pos = vec![0.0; m + 2];
            let mut neg = vec![0.0; m + 2];
            for k in 1..=m {
                pos[k] = d.mass[m + k];
                neg[k] = d.mass[m - k];
            }
            (pos, neg)
        };
        let support = |pos: &[f64], neg: &[f64]| -> Vec<usize> {
            (1..=m).filter(|&k| pos[k] > 0.0 || neg[k] > 0.0).collect()
        };
        let (p1, n1) = split(d1);
        let (p2, n2) = split(d2);
        let s1 = support(&p1, &n1);
        let s2 = support(&p2, &n2);
        // iterate over the sparser side, look up the other's CCDF
        let (pa, na, sa, pb, nb) = if s1.len() <= s2.len() {
            (&p1, &n1, s1, &p2, &n2)
        } else {
            (&p2, &n2, s2, &p1, &n1)
        };
        let mut cp = vec![0.0; m + 2];
        let mut cn = vec![0.0; m + 2];
        for k in (1..=m).rev() {
            cp[k] = cp[k + 1] + pb[k];
            cn[k] = cn[k + 1] + nb[k];
        }

        let mut ccdf_pos = vec![0.0; m + 2];
        let mut ccdf_neg = vec![0.0; m + 2];
        let mut start = 0;
        let top = sa.last().copied().unwrap_or(0);
        for t in 1..=top {
            while start < sa.len() && sa[start] < t {
                start += 1;
            }
            let row = &self.thresholds[self.row_start[t]..self.row_start[t + 1]];
            let (mut sp, mut sn) = (0.0, 0.0);
            for &a in &sa[start..] {
                let b = row[a - t] as usize;
                let (qp, qn) = (cp[b], cn[b]);
                sp += pa[a] * qp + na[a] * qn;
                sn += pa[a] * qn + na[a] * qp;
            }
            ccdf_pos[t] = sp;
            ccdf_neg[t] = sn;
        }
        let mut mass = vec![0.0; self.grid.bins()];
        for k in 1..=m {
            mass[m + k] = (ccdf_pos[k] - ccdf_pos[k + 1]).max(0.0);
            mass[m - k] = (ccdf_neg[k] - ccdf_neg[k + 1]).max(0.0);
        }
        let total_in = d1.total() * d2.total();
        mass[m] = (total_in - ccdf_pos[1] - ccdf_neg[1]).max(0.0);
        let mut out = LlrDensity {
            grid: self.grid,
            mass,
        };
        out.renormalize();
        Ok(out)
    }

    /// Runs the polar transform's density recursion down to every position.
    ///
    /// Position `j` is reached by reading its bits from the most significant
    /// down: a 0 bit takes the check-node branch, a 1 bit the variable-node
    /// branch, matching natural-order encoding.
    pub fn evolve(&self, channel: &LlrDensity, n: usize) -> Result<PositionReliabilities> {
        self.check(channel)?;
        let m = log2_exact(n)?;
        if n > MAX_BLOCK_LENGTH {
            return Err(invalid(format!(
                "block length {n} exceeds the density evolution limit {MAX_BLOCK_LENGTH}"
            )));
        }
        let count = AtomicUsize::new(0);
        let mut p = vec![0.0; n];
        self.descend(channel, m, &mut p, &count)?;
        Ok(PositionReliabilities {
            p,
            convolutions: count.into_inner(),
        })
    }

    fn descend(&self, d: &LlrDensity, depth: usize, out: &mut [f64], count: &AtomicUsize) -> Result<()> {
        if depth == 0 {
            out[0] = d.error_probability();
            return Ok(());
        }
        let (lo, hi) = out.split_at_mut(out.len() / 2);
        let (left, right) = rayon::join(
            || -> Result<()> {
                let c = self.cn_convolve(d, d)?;
                count.fetch_add(1, Ordering::Relaxed);
                self.descend(&c, depth - 1, lo, count)
            },
            || -> Result<()> {
                let v = self.vn_convolve(d, d)?;
                count.fetch_add(1, Ordering::Relaxed);
                self.descend(&v, depth - 1, hi, count)
            },
        );
        left?;
        right
    }
}

/// `P(N in [lo, hi])` for `N ~ N(0, sigma^2)`, accurate in both tails.
fn gauss_interval(lo: f64, hi: f64, sigma: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * sigma;
    if lo >= 0.0 {
        0.5 * (erfc(lo / s) - erfc(hi / s))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi / s) - erfc(-lo / s))
    } else {
        1.0 - 0.5 * erfc(-lo / s) - 0.5 * erfc(hi / s)
    }
}

/// `P(mod*(N) in [s, t])` for `0 <= s <= t <= 1`.
fn folded_interval(s: f64, t: f64, sigma: f64) -> f64 {
    if t <= s {
        return 0.0;
    }
    if sigma > 1.0 {
        // wrapped-normal Fourier series; converges fast for wide noise
        let cdf = |x: f64| -> f64 {
            let mut acc = x;
            let mut q = 1.0;
            loop {
                let damp = (-0.5 * (std::f64::consts::PI * q * sigma).powi(2)).exp();
                if damp < 1e-20 {
                    break;
                }
                acc += 2.0 / std::f64::consts::PI * damp * (std::f64::consts::PI * q * x).sin() / q;
                q += 1.0;
            }
            acc
        };
        return (cdf(t) - cdf(s)).max(0.0);
    }
    let reach = 40.0 * sigma + 2.0;
    let kmax = (reach / 2.0).ceil() as i64;
    let mut acc = 0.0;
    for k in -kmax..=kmax {
        let c = 2.0 * k as f64;
        acc += gauss_interval(c + s, c + t, sigma);
        acc += gauss_interval(c - t, c - s, sigma);
    }
    acc
}

/// Density of the coset LLR of `mod*(N)`, `N ~ N(0, sigma2)`: the channel
/// density seen by a component polar code when zero is sent.
pub fn amgn_llr_density(sigma2: f64, grid: Grid) -> Result<LlrDensity> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    if grid.step > 0.5 {
        return Err(invalid("grid step above 0.5"));
    }
    let sigma = sigma2.sqrt();
    let radius = replica_radius(sigma2);
    let llr = |y: f64| coset_llr(y, sigma2, radius);
    let l_top = llr(0.0);
    let l_bottom = llr(1.0);

    // folded value at which the (decreasing) LLR crosses `level`
    let crossing = |level: f64| -> f64 {
        if level >= l_top {
            return 0.0;
        }
        if level <= l_bottom {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if llr(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let bins = grid.bins();
    // boundary b sits between bins b-1 and b
    let mut cut = vec![0.0; bins + 1];
    cut[0] = 1.0;
    cut[bins] = 0.0;
    for b in 1..bins {
        let level = grid.value(b) - 0.5 * grid.step;
        cut[b] = crossing(level);
    }
    let mut mass: Vec<f64> = (0..bins)
        .map(|i| folded_interval(cut[i + 1], cut[i], sigma))
        .collect();
    let total: f64 = mass.iter().sum();
    for m in mass.iter_mut() {
        *m /= total;
    }
    Ok(LlrDensity { grid, mass })
}

/// Convenience wrapper around the shared evolver for `channel`'s grid.
pub fn evolve(channel: &LlrDensity, n: usize) -> Result<PositionReliabilities> {
    DensityEvolver::shared(channel.grid).evolve(channel, n)
}

pub fn vn_convolve(d1: &LlrDensity, d2: &LlrDensity) -> Result<LlrDensity> {
    if d1.grid != d2.grid {
        return Err(Error::GridMismatch);
    }
    DensityEvolver::shared(d1.grid).vn_convolve(d1, d2)
}

pub fn cn_convolve(d1: &LlrDensity, d2: &LlrDensity) -> Result<LlrDensity> {
    if d1.grid != d2.grid {
        return Err(Error::GridMismatch);
    }
    DensityEvolver::shared(d1.grid).cn_convolve(d1, d2)
}

/// Per-position error probabilities of a length-`n` polar code on the
/// level channel with noise variance `sigma2`.
pub fn amgn_position_errors(sigma2: f64, n: usize, grid: Grid) -> Result<PositionReliabilities> {
    let ch = amgn_llr_density(sigma2, grid)?;
    DensityEvolver::shared(grid).evolve(&ch, n)
}
