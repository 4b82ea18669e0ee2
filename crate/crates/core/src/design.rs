//! The rate function `rho` and the equal error probability design of
//! polar code lattices.
//!
//! `rho(sigma2, target)` is the largest dimension whose predicted word error
//! rate on the mod-2 Gaussian channel stays within `target`. Under SC the
//! prediction comes from density evolution; under list decoding it comes
//! from simulation. A lattice with `a` coded levels and overall target
//! `P_e` gives each of its `a + 1` levels the budget `P_e / (a + 1)`: the
//! uncoded level fixes `sigma_a^2`, and level `i` sees `4^{a-i} sigma_a^2`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::decoder::{DecoderKind, SclConfig};
use crate::density::{amgn_position_errors, de_wer, Grid, PositionReliabilities};
use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeDesign;
use crate::polar::{
    info_set_size, log2_exact, pw_ordering, select_info_set, NestedCodeFamily, PolarCode, ReliabilityOrder,
};
use crate::sim::component_wer;

/// Smallest per-level target the default density grid resolves.
pub const MIN_DE_TARGET: f64 = 1e-12;

/// Noise variance at which the integer lattice `Z^n` (rounding) has word
/// error rate `p`: `1 / (8 erfc^{-1}(1 - (1 - p)^{1/n})^2)`.
pub fn sigma_a_from_target(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("target must lie in (0, 1), got {p}")));
    }
    let q = -((-p).ln_1p() / n as f64).exp_m1();
    let x = erfc_inv(q);
    Ok(1.0 / (8.0 * x * x))
}

/// Word error rate of rounding to `Z^n` under noise variance `sigma2`.
pub fn integer_lattice_wer(n: usize, sigma2: f64) -> f64 {
    let per_dim = erfc(1.0 / (8.0 * sigma2).sqrt());
    -(n as f64 * (-per_dim).ln_1p()).exp_m1()
}

/// `10 log10(1 / sigma2)`.
pub fn inv_sigma2_db(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

pub fn sigma2_from_inv_db(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Monte Carlo budget for the list-decoding route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloBudget {
    pub min_errors: u64,
    pub max_trials: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for MonteCarloBudget {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_trials: 10_000_000,
            seed: 1,
            workers: 0,
        }
    }
}

/// How `rho` predicts a code's word error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RhoMethod {
    /// SC decoding, density evolution on the given grid; DE ordering.
    DensityEvolution(Grid),
    /// SCL decoding, simulation; polarization-weight ordering.
    MonteCarlo(SclConfig, MonteCarloBudget),
}

impl RhoMethod {
    pub fn decoder(&self) -> DecoderKind {
        match self {
            RhoMethod::DensityEvolution(_) => DecoderKind::Sc,
            RhoMethod::MonteCarlo(cfg, _) => DecoderKind::Scl(*cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoQuery {
    pub n: usize,
    pub target: f64,
    pub sigma2: f64,
    pub method: RhoMethod,
    /// Only these positions may carry information (nesting).
    pub allowed: Option<Vec<usize>>,
}

impl RhoQuery {
    pub fn new(n: usize, target: f64, sigma2: f64, method: RhoMethod) -> Self {
        Self {
            n,
            target,
            sigma2,
            method,
            allowed: None,
        }
    }

    pub fn restricted_to(mut self, allowed: &[usize]) -> Self {
        self.allowed = Some(allowed.to_vec());
        self
    }

    fn validate(&self) -> Result<()> {
        log2_exact(self.n)?;
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(invalid(format!("target must lie in (0, 1), got {}", self.target)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid(format!(
                "noise variance must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoResult {
    /// Payload bits.
    pub k: usize,
    pub rate: f64,
    pub predicted_wer: f64,
    /// No positive `k` meets the target.
    pub unreachable: bool,
    pub info_set: Vec<usize>,
    pub ordering: ReliabilityOrder,
}

/// Largest `k` in `0..=max` with `ok(k)`, for `ok` monotone (true then
/// false) and `ok(0)` true.
fn largest_passing(max: usize, mut ok: impl FnMut(usize) -> Result<bool>) -> Result<usize> {
    let (mut lo, mut hi) = (0usize, max);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Density-evolution `rho` from precomputed position reliabilities.
pub fn rho_from_reliabilities(
    p: &PositionReliabilities,
    sigma2: f64,
    target: f64,
    allowed: Option<&[usize]>,
) -> Result<RhoResult> {
    let n = p.n();
    let mut ordering = ReliabilityOrder::from_error_probabilities(p.p(), sigma2)?;
    let max = match allowed {
        Some(a) => {
            ordering = ordering.restricted_to(a);
            a.len()
        }
        None => n,
    };
    let wer = |k: usize| -> Result<f64> { de_wer(p, &select_info_set(&ordering, k)?) };
    let k = largest_passing(max, |k| Ok(wer(k)? <= target))?;
    let info_set = select_info_set(&ordering, k)?;
    Ok(RhoResult {
        k,
        rate: k as f64 / n as f64,
        predicted_wer: wer(k)?,
        unreachable: k == 0,
        info_set,
        ordering,
    })
}

/// Same as [`rho_from_reliabilities`] but scanning every `k`; used to check
/// the binary search.
pub fn rho_linear_scan(p: &PositionReliabilities, sigma2: f64, target: f64) -> Result<usize> {
    let ordering = ReliabilityOrder::from_error_probabilities(p.p(), sigma2)?;
    let mut best = 0;
    for k in 0..=p.n() {
        if de_wer(p, &select_info_set(&ordering, k)?)? <= target {
            best = k;
        }
    }
    Ok(best)
}

pub fn rho(q: &RhoQuery) -> Result<RhoResult> {
    q.validate()?;
    match q.method {
        RhoMethod::DensityEvolution(grid) => {
            let p = amgn_position_errors(q.sigma2, q.n, grid)?;
            rho_from_reliabilities(&p, q.sigma2, q.target, q.allowed.as_deref())
        }
        RhoMethod::MonteCarlo(cfg, budget) => rho_monte_carlo(q, cfg, budget),
    }
}

fn mc_code(ordering: &ReliabilityOrder, k: usize, crc: usize) -> Result<PolarCode> {
    PolarCode::from_ordering(ordering, k, crc)
}

fn mc_wer(code: &PolarCode, cfg: SclConfig, sigma2: f64, budget: MonteCarloBudget) -> Result<f64> {
    let kind = DecoderKind::Scl(SclConfig {
        list_size: cfg.list_size,
        crc_bits: code.crc_bits(),
    });
    let s = component_wer(
        code,
        kind,
        sigma2,
        budget.max_trials,
        budget.min_errors,
        budget.seed,
        budget.workers,
    )?;
    Ok(s.wer())
}

/// Simulation `rho`: binary search on `k`, each candidate judged by its
/// WER at `sigma2` with at least `min_errors` errors (or `max_trials`).
fn rho_monte_carlo(q: &RhoQuery, cfg: SclConfig, budget: MonteCarloBudget) -> Result<RhoResult> {
    let mut ordering = pw_ordering(q.n)?;
    let capacity = match &q.allowed {
        Some(a) => {
            ordering = ordering.restricted_to(a);
            a.len()
        }
        None => q.n,
    };
    let max = capacity.saturating_sub(cfg.crc_bits);
    let mut wer_at = std::collections::HashMap::new();
    let k = largest_passing(max, |k| {
        let w = mc_wer(&mc_code(&ordering, k, cfg.crc_bits)?, cfg, q.sigma2, budget)?;
        wer_at.insert(k, w);
        Ok(w <= q.target)
    })?;
    let code = mc_code(&ordering, k, cfg.crc_bits)?;
    let predicted_wer = match wer_at.get(&k) {
        Some(&w) => w,
        None if k == 0 => 0.0,
        None => mc_wer(&code, cfg, q.sigma2, budget)?,
    };
    Ok(RhoResult {
        k,
        rate: k as f64 / q.n as f64,
        predicted_wer,
        unreachable: k == 0,
        info_set: code.info_set().to_vec(),
        ordering,
    })
}

/// Noise variance at which an SCL code with `k` payload bits reaches
/// `target`: bracket by stepping `step_db` in `1/sigma2`, then interpolate
/// log-WER linearly in dB between the bracketing points.
pub fn scl_threshold_sigma2(
    n: usize,
    k: usize,
    cfg: SclConfig,
    target: f64,
    start_sigma2: f64,
    step_db: f64,
    budget: MonteCarloBudget,
) -> Result<f64> {
    let ordering = pw_ordering(n)?;
    let code = mc_code(&ordering, k, cfg.crc_bits)?;
    let mut db = inv_sigma2_db(start_sigma2);
    let mut w = mc_wer(&code, cfg, sigma2_from_inv_db(db), budget)?;
    let dir = if w > target { 1.0 } else { -1.0 };
    for _ in 0..200 {
        let next_db = db + dir * step_db;
        let nw = mc_wer(&code, cfg, sigma2_from_inv_db(next_db), budget)?;
        if (nw > target) != (w > target) {
            // bracket found; zero counts are floored to one error
            let floor = 1.0 / budget.max_trials as f64;
            let (l1, l2) = (w.max(floor).ln(), nw.max(floor).ln());
            let t = (target.ln() - l1) / (l2 - l1);
            return Ok(sigma2_from_inv_db(db + t * (next_db - db)));
        }
        db = next_db;
        w = nw;
    }
    Err(Error::Infeasible(format!(
        "could not bracket WER {target} for k = {k}"
    )))
}

/// One point of a rho curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint {
    pub sigma2: f64,
    pub k: usize,
    pub rate: f64,
    pub predicted_wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCurve {
    pub n: usize,
    pub target: f64,
    pub method: RhoMethod,
    pub points: Vec<RhoPoint>,
}

impl RhoCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sigma2,inv_sigma2_db,k,rate,predicted_wer")?;
        for p in &self.points {
            writeln!(
                w,
                "{:.10e},{:.6},{},{:.8},{:.6e}",
                p.sigma2,
                inv_sigma2_db(p.sigma2),
                p.k,
                p.rate,
                p.predicted_wer
            )?;
        }
        Ok(())
    }
}

/// `rho` over an ascending grid of noise variances.
pub fn rho_curve(n: usize, target: f64, sigma2_grid: &[f64], method: RhoMethod) -> Result<RhoCurve> {
    if sigma2_grid.is_empty() {
        return Err(invalid("noise grid is empty"));
    }
    if sigma2_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("noise grid must be ascending"));
    }
    let points = sigma2_grid
        .par_iter()
        .map(|&s| {
            let r = rho(&RhoQuery::new(n, target, s, method))?;
            Ok(RhoPoint {
                sigma2: s,
                k: r.k,
                rate: r.rate,
                predicted_wer: r.predicted_wer,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RhoCurve {
        n,
        target,
        method,
        points,
    })
}

/// Equal error probability design of an `a`-level lattice with overall
/// word error target `p_e`. Levels are designed top-down; each lower level
/// picks its most reliable positions among those of the level above.
pub fn design_lattice(n: usize, a: usize, p_e: f64, method: RhoMethod) -> Result<LatticeDesign> {
    log2_exact(n)?;
    if !(p_e > 0.0 && p_e < 1.0) {
        return Err(invalid(format!("target must lie in (0, 1), got {p_e}")));
    }
    let p_trgt = p_e / (a + 1) as f64;
    if matches!(method, RhoMethod::DensityEvolution(_)) && p_trgt < MIN_DE_TARGET {
        return Err(Error::Infeasible(format!(
            "per-level target {p_trgt:e} is below what density evolution resolves"
        )));
    }
    let sigma2_a = sigma_a_from_target(n, p_trgt)?;
    let decoder = method.decoder();
    let crc = decoder.crc_bits();

    let mut k = vec![0usize; a];
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); a];
    let mut orderings: Vec<Option<ReliabilityOrder>> = vec![None; a];
    let mut predicted = vec![None; a];
    let mut allowed: Option<Vec<usize>> = None;
    for i in (0..a).rev() {
        let sigma2 = sigma2_a * 4f64.powi((a - i) as i32);
        let mut q = RhoQuery::new(n, p_trgt, sigma2, method);
        q.allowed = allowed.clone();
        let r = rho(&q)?;
        if r.predicted_wer > p_trgt {
            return Err(Error::Infeasible(format!("level {i} misses its target")));
        }
        k[i] = r.k;
        sets[i] = r.info_set;
        predicted[i] = Some(r.predicted_wer);
        orderings[i] = Some(r.ordering);
        allowed = Some(sets[i].clone());
    }
    for i in 0..a {
        if sets[i].len() != info_set_size(k[i], crc) {
            return Err(Error::Infeasible(format!(
                "level {i} information set has the wrong size"
            )));
        }
    }
    let orderings = orderings
        .into_iter()
        .map(|o| o.expect("every level designed"))
        .collect();
    let family = NestedCodeFamily::new(n, sets, orderings)?;
    LatticeDesign::new(family, k, decoder, sigma2_a, p_e, predicted)
}

/// SC design with prescribed dimensions: each level uses its density
/// evolution ordering at its design noise, restricted to the level above.
pub fn design_with_dimensions(n: usize, p_e: f64, k: &[usize], grid: Grid) -> Result<LatticeDesign> {
    let a = k.len();
    let p_trgt = p_e / (a + 1) as f64;
    let sigma2_a = sigma_a_from_target(n, p_trgt)?;
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); a];
    let mut orderings: Vec<Option<ReliabilityOrder>> = vec![None; a];
    let mut predicted = vec![None; a];
    let mut allowed: Option<Vec<usize>> = None;
    for i in (0..a).rev() {
        let sigma2 = sigma2_a * 4f64.powi((a - i) as i32);
        let p = amgn_position_errors(sigma2, n, grid)?;
        let mut ord = ReliabilityOrder::from_error_probabilities(p.p(), sigma2)?;
        if let Some(al) = &allowed {
            if k[i] > al.len() {
                return Err(Error::NotNested(i, i + 1));
            }
            ord = ord.restricted_to(al);
        }
        sets[i] = select_info_set(&ord, k[i])?;
        predicted[i] = Some(de_wer(&p, &sets[i])?);
        orderings[i] = Some(ord);
        allowed = Some(sets[i].clone());
    }
    let orderings = orderings
        .into_iter()
        .map(|o| o.expect("every level designed"))
        .collect();
    let family = NestedCodeFamily::new(n, sets, orderings)?;
    LatticeDesign::new(family, k.to_vec(), DecoderKind::Sc, sigma2_a, p_e, predicted)
}

/// Design from a single polarization-weight ordering with prescribed
/// payload sizes, for list decoding with a CRC on every nonempty level.
pub fn design_pw(n: usize, p_e: f64, k: &[usize], cfg: SclConfig) -> Result<LatticeDesign> {
    let a = k.len();
    let order = pw_ordering(n)?;
    let sizes: Vec<usize> = k.iter().map(|&ki| info_set_size(ki, cfg.crc_bits)).collect();
    let family = NestedCodeFamily::from_ordering(&order, &sizes)?;
    let sigma2_a = sigma_a_from_target(n, p_e / (a + 1) as f64)?;
    LatticeDesign::new(
        family,
        k.to_vec(),
        DecoderKind::Scl(cfg),
        sigma2_a,
        p_e,
        vec![None; a],
    )
}
