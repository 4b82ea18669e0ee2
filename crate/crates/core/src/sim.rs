//! Monte Carlo word-error-rate estimation.
//!
//! Trial `t` at a sweep point always draws from `trial_rng(seed, t)`, and
//! trials run in fixed-size batches that are merged in batch order. The
//! stop rule is checked after each merged batch, so results do not depend
//! on how many workers ran the batches. Every sweep point reuses the same
//! seed: noise at different VNRs is the same draw rescaled.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{coset_llr, fold, replica_radius, trial_rng};
use crate::decoder::{ComponentDecoder, DecoderKind};
use crate::error::{invalid, Result};
use crate::lattice::{LatticeDesign, LatticePoint, MultistageDecoder};
use crate::polar::PolarCode;

/// Trials per batch unless the plan overrides it.
pub const DEFAULT_BATCH: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepPoint {
    /// Volume-to-noise ratio in dB.
    Vnr(f64),
    /// Level-0 noise variance.
    Sigma2(f64),
}

/// Which lattice point each trial transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransmitMode {
    Zero,
    /// Uniform payload bits at every level and integer-level entries in
    /// `-2..=2`, drawn per trial.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub sweep: Vec<SweepPoint>,
    pub max_trials: u64,
    /// Stop a point once this many word errors are seen (0: never stop early).
    pub target_errors: u64,
    pub seed: u64,
    pub mode: TransmitMode,
    pub batch_size: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl SimPlan {
    pub fn new(sweep: Vec<SweepPoint>, max_trials: u64, target_errors: u64, seed: u64) -> Self {
        Self {
            sweep,
            max_trials,
            target_errors,
            seed,
            mode: TransmitMode::Zero,
            batch_size: DEFAULT_BATCH,
            workers: 0,
        }
    }

    pub fn with_mode(mut self, mode: TransmitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_batch_size(mut self, batch: u64) -> Self {
        self.batch_size = batch;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(invalid("sweep has no points"));
        }
        if self.max_trials == 0 {
            return Err(invalid("max_trials must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        for p in &self.sweep {
            let ok = match *p {
                SweepPoint::Vnr(v) => v.is_finite(),
                SweepPoint::Sigma2(s) => s > 0.0 && s.is_finite(),
            };
            if !ok {
                return Err(invalid(format!("invalid sweep point {p:?}")));
            }
        }
        Ok(())
    }
}

/// Results at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub vnr_db: f64,
    pub sigma2: f64,
    pub trials: u64,
    pub errors: u64,
    /// Word errors by first failing level; entry `a` is the integer level.
    pub level_errors: Vec<u64>,
    /// Errors of each level when all earlier levels are decoded correctly.
    pub genie_errors: Vec<u64>,
    pub seconds: f64,
}

impl PointStats {
    pub fn wer(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn ci95(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.trials, 1.96)
    }

    pub fn genie_wer(&self, level: usize) -> f64 {
        self.genie_errors[level] as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub levels: usize,
    pub points: Vec<PointStats>,
}

impl SimStats {
    /// Writes the results table. Wall time is only filled in when `timing`
    /// is set, so untimed output is reproducible byte for byte.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> Result<()> {
        let mut header = String::from("vnr_db,sigma2,trials,errors,wer,ci_low,ci_high");
        for i in 0..=self.levels {
            header.push_str(&format!(",err_l{i}"));
        }
        header.push_str(",seconds");
        writeln!(w, "{header}")?;
        for p in &self.points {
            let (lo, hi) = p.ci95();
            let mut row = format!(
                "{:.4},{:.10e},{},{},{:.6e},{:.6e},{:.6e}",
                p.vnr_db,
                p.sigma2,
                p.trials,
                p.errors,
                p.wer(),
                lo,
                hi
            );
            for e in &p.level_errors {
                row.push_str(&format!(",{e}"));
            }
            if timing {
                row.push_str(&format!(",{:.3}", p.seconds));
            } else {
                row.push(',');
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Wilson score interval for `errors` out of `trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Counters merged across batches.
#[derive(Debug, Clone, Default)]
struct Tally {
    trials: u64,
    errors: u64,
    level_errors: Vec<u64>,
    genie_errors: Vec<u64>,
}

impl Tally {
    fn new(levels: usize) -> Self {
        Self {
            trials: 0,
            errors: 0,
            level_errors: vec![0; levels + 1],
            genie_errors: vec![0; levels + 1],
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        self.errors += other.errors;
        for (a, b) in self.level_errors.iter_mut().zip(&other.level_errors) {
            *a += b;
        }
        for (a, b) in self.genie_errors.iter_mut().zip(&other.genie_errors) {
            *a += b;
        }
    }
}

/// Runs batches `0, 1, ...` of `batch` trials each, in waves of `wave`
/// batches, until `max_trials` are done or `target_errors` is reached after
/// some batch (checked in batch order).
fn run_batches<F>(
    max_trials: u64,
    target_errors: u64,
    batch: u64,
    wave: usize,
    levels: usize,
    f: F,
) -> Result<Tally>
where
    F: Fn(u64, u64) -> Result<Tally> + Sync,
{
    let batches = max_trials.div_ceil(batch);
    let mut total = Tally::new(levels);
    let mut next = 0u64;
    while next < batches {
        let end = (next + wave as u64).min(batches);
        let results: Vec<Result<Tally>> = (next..end)
            .into_par_iter()
            .map(|b| {
                let start = b * batch;
                f(start, (start + batch).min(max_trials))
            })
            .collect();
        for r in results {
            total.merge(&r?);
            if target_errors > 0 && total.errors >= target_errors {
                return Ok(total);
            }
        }
        next = end;
    }
    Ok(total)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn effective_workers(workers: usize) -> usize {
    if workers == 0 {
        rayon::current_num_threads()
    } else {
        workers
    }
}

/// Draws the transmitted point for a trial; `Zero` needs no randomness.
pub fn transmit_point<R: Rng + ?Sized>(
    design: &LatticeDesign,
    mode: TransmitMode,
    rng: &mut R,
) -> Result<LatticePoint> {
    match mode {
        TransmitMode::Zero => Ok(LatticePoint::origin(design.n())),
        TransmitMode::Random => {
            let payloads: Vec<Vec<u8>> = design
                .codes()
                .iter()
                .map(|c| (0..c.dimension()).map(|_| rng.gen_range(0..=1u8)).collect())
                .collect();
            let z: Vec<i64> = (0..design.n()).map(|_| rng.gen_range(-2..=2)).collect();
            design.encode(&payloads, &z)
        }
    }
}

/// Reproducible point for `seed`: the point trial 0 would send.
pub fn transmit_point_seeded(design: &LatticeDesign, mode: TransmitMode, seed: u64) -> Result<LatticePoint> {
    transmit_point(design, mode, &mut trial_rng(seed, 0))
}

fn resolve(design: &LatticeDesign, p: SweepPoint) -> (f64, f64) {
    match p {
        SweepPoint::Vnr(v) => (v, design.sigma2_for_vnr(v)),
        SweepPoint::Sigma2(s) => (design.vnr_db(s), s),
    }
}

/// Simulates the multistage decoder of `design` at every sweep point.
pub fn run_wer(design: &LatticeDesign, plan: &SimPlan) -> Result<SimStats> {
    plan.validate()?;
    let levels = design.levels();
    let origin = design.decompose(&vec![0; design.n()])?;
    let wave = 2 * effective_workers(plan.workers);
    let mut points = Vec::with_capacity(plan.sweep.len());
    for &sp in &plan.sweep {
        let (vnr_db, sigma2) = resolve(design, sp);
        let sigma = sigma2.sqrt();
        let started = Instant::now();
        let batch_job = |start: u64, end: u64| -> Result<Tally> {
            let mut dec = MultistageDecoder::new(design, sigma2)?;
            let mut tally = Tally::new(levels);
            let mut y = vec![0.0; design.n()];
            for t in start..end {
                let mut rng = trial_rng(plan.seed, t);
                let (x, truth) = match plan.mode {
                    TransmitMode::Zero => (None, None),
                    TransmitMode::Random => {
                        let x = transmit_point(design, plan.mode, &mut rng)?;
                        let truth = design.decompose(&x.x)?;
                        (Some(x), Some(truth))
                    }
                };
                for (i, v) in y.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = x.as_ref().map_or(0.0, |p| p.x[i] as f64) + sigma * z;
                }
                let out = dec.decode_trial(&y, truth.as_ref().unwrap_or(&origin))?;
                tally.trials += 1;
                if let Some(l) = out.first_error {
                    tally.errors += 1;
                    tally.level_errors[l] += 1;
                }
                for (g, &e) in tally.genie_errors.iter_mut().zip(&out.genie_errors) {
                    *g += e as u64;
                }
            }
            Ok(tally)
        };
        let tally = with_pool(plan.workers, || {
            run_batches(
                plan.max_trials,
                plan.target_errors,
                plan.batch_size,
                wave,
                levels,
                batch_job,
            )
        })??;
        points.push(PointStats {
            vnr_db,
            sigma2,
            trials: tally.trials,
            errors: tally.errors,
            level_errors: tally.level_errors,
            genie_errors: tally.genie_errors,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(SimStats { levels, points })
}

/// VNR at which a simulated WER curve crosses a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerCrossing {
    pub vnr_db: f64,
    /// Every point simulated while bracketing, in ascending VNR.
    pub points: Vec<PointStats>,
}

/// Steps the VNR by `step_db` from `start_vnr` until the WER crosses
/// `target`, then interpolates `ln WER` linearly between the two bracketing
/// points. Each point is simulated with `plan`'s budget and seed; its sweep
/// is ignored. A point without errors counts as half an error.
pub fn vnr_at_wer(
    design: &LatticeDesign,
    target: f64,
    start_vnr: f64,
    step_db: f64,
    plan: &SimPlan,
) -> Result<WerCrossing> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid(format!("target must lie in (0, 1), got {target}")));
    }
    if !(step_db > 0.0 && step_db.is_finite()) {
        return Err(invalid(format!("step must be positive, got {step_db}")));
    }
    let eval = |vnr: f64| -> Result<PointStats> {
        let mut p = plan.clone();
        p.sweep = vec![SweepPoint::Vnr(vnr)];
        Ok(run_wer(design, &p)?.points.remove(0))
    };
    let log_wer = |p: &PointStats| {
        let e = if p.errors == 0 { 0.5 } else { p.errors as f64 };
        (e / p.trials as f64).ln()
    };
    let mut points = vec![eval(start_vnr)?];
    let above = points[0].wer() > target;
    let dir = if above { 1.0 } else { -1.0 };
    for i in 1..=60 {
        let p = eval(start_vnr + dir * step_db * i as f64)?;
        let crossed = (p.wer() > target) != above;
        points.push(p);
        if crossed {
            let (a, b) = (&points[points.len() - 2], &points[points.len() - 1]);
            let (la, lb) = (log_wer(a), log_wer(b));
            let t = (target.ln() - la) / (lb - la);
            let vnr_db = a.vnr_db + t * (b.vnr_db - a.vnr_db);
            points.sort_by(|x, y| x.vnr_db.total_cmp(&y.vnr_db));
            return Ok(WerCrossing { vnr_db, points });
        }
    }
    Err(crate::error::Error::Infeasible(format!(
        "WER never crossed {target}"
    )))
}

/// Word error statistics of a single component code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub sigma2: f64,
    pub trials: u64,
    pub errors: u64,
}

impl ComponentStats {
    pub fn wer(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn ci95(&self) -> (f64, f64) {
        wilson_interval(self.errors, self.trials, 1.96)
    }
}

/// Simulates `code` alone on the mod-2 Gaussian channel with variance
/// `sigma2`, sending the all-zero word (the channel is symmetric).
pub fn component_wer(
    code: &PolarCode,
    kind: DecoderKind,
    sigma2: f64,
    max_trials: u64,
    target_errors: u64,
    seed: u64,
    workers: usize,
) -> Result<ComponentStats> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    if max_trials == 0 {
        return Err(invalid("max_trials must be at least 1"));
    }
    let n = code.n();
    let sigma = sigma2.sqrt();
    let radius = replica_radius(sigma2);
    let wave = 2 * effective_workers(workers);
    let job = |start: u64, end: u64| -> Result<Tally> {
        let mut dec = ComponentDecoder::new(code, kind)?;
        let mut llr = vec![0.0; n];
        let mut tally = Tally::new(0);
        for t in start..end {
            let mut rng = trial_rng(seed, t);
            for l in llr.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *l = coset_llr(fold(sigma * z), sigma2, radius);
            }
            let u = dec.decode_in_place(&llr)?;
            tally.trials += 1;
            if u.iter().any(|&b| b != 0) {
                tally.errors += 1;
            }
        }
        Ok(tally)
    };
    let tally = with_pool(workers, || {
        run_batches(max_trials, target_errors, DEFAULT_BATCH, wave, 0, job)
    })??;
    Ok(ComponentStats {
        sigma2,
        trials: tally.trials,
        errors: tally.errors,
    })
}
