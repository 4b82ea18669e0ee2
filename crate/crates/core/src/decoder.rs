//! Successive cancellation (SC) and CRC-aided successive cancellation list
//! (SCL) decoding of natural-order polar codes.
//!
//! Both decoders share the same check-node and bit-node updates, so an SCL
//! decoder with one path and no CRC makes exactly the SC decisions.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::polar::{polar_transform, PolarCode};

/// Upper end of the tabulated correction; beyond it `ln(1 + e^{-t})`
/// is below `5e-18` and treated as zero.
const CORR_MAX: f64 = 40.0;
const CORR_STEPS_PER_UNIT: f64 = 128.0;

/// Values and slopes of `ln(1 + e^{-t})` on a uniform grid.
fn corr_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let steps = (CORR_MAX * CORR_STEPS_PER_UNIT) as usize;
        (0..=steps + 1)
            .map(|i| {
                let t = i as f64 / CORR_STEPS_PER_UNIT;
                ((-t).exp().ln_1p(), -1.0 / (1.0 + t.exp()))
            })
            .collect()
    })
}

/// `ln(1 + e^{-t})` for `t >= 0` by cubic Hermite interpolation; absolute
/// error below `1e-11`.
#[inline]
pub fn softplus_neg(t: f64) -> f64 {
    if t >= CORR_MAX {
        return 0.0;
    }
    let table = corr_table();
    let pos = t * CORR_STEPS_PER_UNIT;
    let i = pos as usize;
    let s = pos - i as f64;
    let h = 1.0 / CORR_STEPS_PER_UNIT;
    let (y0, d0) = table[i];
    let (y1, d1) = table[i + 1];
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Check-node update `2 atanh(tanh(a/2) tanh(b/2))`, evaluated as
/// `min + ln(1 + e^{-(x+y)}) - ln(1 + e^{-|x-y|})` on the magnitudes, which
/// stays finite for saturated inputs.
#[inline]
pub fn check_node(a: f64, b: f64) -> f64 {
    let (x, y) = (a.abs(), b.abs());
    let mut mag = x.min(y) + softplus_neg(x + y) - softplus_neg((x - y).abs());
    if mag < 1e-4 {
        // the correction terms cancel here; the product form keeps the sign
        // and relative precision of tiny outputs
        mag = 2.0 * ((0.5 * x).tanh() * (0.5 * y).tanh()).atanh();
    }
    if (a < 0.0) != (b < 0.0) {
        -mag
    } else {
        mag
    }
}

/// Bit-node update given the partial-sum bit `u` of the left branch.
#[inline]
pub fn bit_node(a: f64, b: f64, u: u8) -> f64 {
    if u == 0 {
        b + a
    } else {
        b - a
    }
}

#[inline]
fn hard(llr: f64) -> u8 {
    (llr < 0.0) as u8
}

/// `ln(1 + exp(-(1 - 2u) llr))`: metric penalty for deciding `u`.
#[inline]
fn penalty(llr: f64, u: u8) -> f64 {
    let x = if u == 0 { llr } else { -llr };
    if x > 0.0 {
        softplus_neg(x)
    } else {
        -x + softplus_neg(-x)
    }
}

/// Decoder output: the estimated input vector and its codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScDecodeResult {
    pub u_hat: Vec<u8>,
    pub x_hat: Vec<u8>,
}

impl ScDecodeResult {
    fn from_u(u_hat: Vec<u8>) -> Self {
        let mut x_hat = u_hat.clone();
        polar_transform(&mut x_hat);
        Self { u_hat, x_hat }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SclConfig {
    pub list_size: usize,
    pub crc_bits: usize,
}

impl SclConfig {
    pub fn new(list_size: usize, crc_bits: usize) -> Result<Self> {
        if list_size == 0 {
            return Err(invalid("list size must be at least 1"));
        }
        crate::crc::Crc::for_width(crc_bits)?;
        Ok(Self { list_size, crc_bits })
    }
}

fn check_len(llr: &[f64], n: usize) -> Result<()> {
    if llr.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: llr.len(),
        });
    }
    Ok(())
}

/// Recursive SC decoder with scratch buffers sized for one code.
///
/// All-frozen subtrees are skipped: their decisions are zero regardless of
/// the LLRs.
#[derive(Debug, Clone)]
pub struct ScDecoder {
    code: PolarCode,
    /// `all_frozen[s][node]` for subtrees of size `2^s`.
    all_frozen: Vec<Vec<bool>>,
    llr: Vec<Vec<f64>>,
    partial: Vec<u8>,
    u: Vec<u8>,
}

impl ScDecoder {
    pub fn new(code: &PolarCode) -> Self {
        let m = code.m();
        let mut all_frozen = vec![code.frozen_mask().to_vec()];
        for s in 1..=m {
            let prev = &all_frozen[s - 1];
            let next: Vec<bool> = prev.chunks(2).map(|c| c[0] && c[1]).collect();
            all_frozen.push(next);
        }
        Self {
            code: code.clone(),
            all_frozen,
            llr: (0..=m).map(|s| vec![0.0; 1 << s]).collect(),
            partial: vec![0; code.n()],
            u: vec![0; code.n()],
        }
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    /// Decodes into the internal buffer and returns `u_hat`.
    pub fn decode_in_place(&mut self, llr: &[f64]) -> Result<&[u8]> {
        check_len(llr, self.code.n())?;
        let m = self.code.m();
        self.llr[m].copy_from_slice(llr);
        self.u.fill(0);
        self.node(m, 0);
        Ok(&self.u)
    }

    pub fn decode(&mut self, llr: &[f64]) -> Result<ScDecodeResult> {
        let u = self.decode_in_place(llr)?.to_vec();
        Ok(ScDecodeResult::from_u(u))
    }

    fn node(&mut self, s: usize, offset: usize) {
        let size = 1usize << s;
        if self.all_frozen[s][offset >> s] {
            self.partial[offset..offset + size].fill(0);
            return;
        }
        if s == 0 {
            let bit = hard(self.llr[0][0]);
            self.u[offset] = bit;
            self.partial[offset] = bit;
            return;
        }
        let half = size / 2;
        {
            let (lower, upper) = self.llr.split_at_mut(s);
            let (parent, child) = (&upper[0], &mut lower[s - 1]);
            for i in 0..half {
                child[i] = check_node(parent[i], parent[i + half]);
            }
        }
        self.node(s - 1, offset);
        {
            let (lower, upper) = self.llr.split_at_mut(s);
            let (parent, child) = (&upper[0], &mut lower[s - 1]);
            let left = &self.partial[offset..offset + half];
            for i in 0..half {
                child[i] = bit_node(parent[i], parent[i + half], left[i]);
            }
        }
        self.node(s - 1, offset + half);
        let (l, r) = self.partial[offset..offset + size].split_at_mut(half);
        for (a, b) in l.iter_mut().zip(r.iter()) {
            *a ^= *b;
        }
    }
}

/// One-shot SC decode.
pub fn sc_decode(llr: &[f64], code: &PolarCode) -> Result<ScDecodeResult> {
    ScDecoder::new(code).decode(llr)
}

/// Spare stage arrays, indexed by stage, recycled between paths.
#[derive(Debug, Clone, Default)]
struct Pool<T> {
    spare: Vec<Vec<Arc<Vec<T>>>>,
}

impl<T: Clone + Default> Pool<T> {
    fn new(m: usize) -> Self {
        Self {
            spare: vec![Vec::new(); m],
        }
    }

    fn take(&mut self, stage: usize) -> Arc<Vec<T>> {
        self.spare[stage]
            .pop()
            .unwrap_or_else(|| Arc::new(vec![T::default(); 1 << stage]))
    }

    /// Keeps `a` for reuse if no other path still refers to it.
    fn give(&mut self, stage: usize, a: Arc<Vec<T>>) {
        if Arc::strong_count(&a) == 1 {
            self.spare[stage].push(a);
        }
    }

    /// Unshared access to a stage array whose contents are about to be
    /// overwritten.
    fn overwrite<'a>(&mut self, stage: usize, a: &'a mut Arc<Vec<T>>) -> &'a mut Vec<T> {
        if Arc::get_mut(a).is_none() {
            *a = self.take(stage);
        }
        Arc::get_mut(a).expect("array just made unique")
    }
}

/// Per-path decoder state for the list decoder. Stage arrays are shared
/// between paths split from a common parent and replaced on first write,
/// so the large, rarely rewritten upper stages are seldom duplicated.
#[derive(Debug, Clone, Default)]
struct PathState {
    /// LLRs for stages `0..m` (stage `m` is the shared channel input).
    llr: Vec<Arc<Vec<f64>>>,
    /// Completed left-child codewords per stage.
    left: Vec<Arc<Vec<u8>>>,
    u: Vec<u8>,
    metric: f64,
}

#[derive(Debug, Clone, Default)]
struct Pools {
    llr: Pool<f64>,
    left: Pool<u8>,
}

impl PathState {
    fn reset(&mut self, m: usize, pools: &mut Pools) {
        self.llr = (0..m).map(|s| pools.llr.take(s)).collect();
        self.left = (0..m).map(|s| pools.left.take(s)).collect();
        self.u.clear();
        self.u.resize(1 << m, 0);
        self.metric = 0.0;
    }

    /// Returns this path's arrays so surviving paths can write in place.
    fn release(&mut self, pools: &mut Pools) {
        for (s, a) in self.llr.drain(..).enumerate() {
            pools.llr.give(s, a);
        }
        for (s, a) in self.left.drain(..).enumerate() {
            pools.left.give(s, a);
        }
    }

    fn copy_from(&mut self, other: &PathState) {
        self.llr.clone_from(&other.llr);
        self.left.clone_from(&other.left);
        self.u.clone_from(&other.u);
        self.metric = other.metric;
    }

    /// Brings the stage-0 LLR up to date for position `j`.
    fn update_llr(&mut self, channel: &[f64], j: usize, m: usize, pools: &mut Pools) {
        if m == 0 {
            return;
        }
        let start = if j == 0 {
            m
        } else {
            let z = j.trailing_zeros() as usize;
            // right child at stage z
            let half = 1usize << z;
            let (lower, upper) = self.llr.split_at_mut(z + 1);
            let parent: &[f64] = if z + 1 == m { channel } else { &upper[0] };
            let left = &self.left[z];
            let child = pools.llr.overwrite(z, &mut lower[z]);
            for i in 0..half {
                child[i] = bit_node(parent[i], parent[i + half], left[i]);
            }
            z
        };
        for s in (0..start).rev() {
            let half = 1usize << s;
            let (lower, upper) = self.llr.split_at_mut(s + 1);
            let parent: &[f64] = if s + 1 == m { channel } else { &upper[0] };
            let child = pools.llr.overwrite(s, &mut lower[s]);
            for i in 0..half {
                child[i] = check_node(parent[i], parent[i + half]);
            }
        }
    }

    fn leaf_llr(&self, channel: &[f64]) -> f64 {
        if self.llr.is_empty() {
            channel[0]
        } else {
            self.llr[0][0]
        }
    }

    /// Records bit `u_j` and folds completed right children into their parents.
    fn commit(&mut self, j: usize, bit: u8, m: usize, scratch: &mut Vec<u8>, pools: &mut Pools) {
        self.u[j] = bit;
        scratch.clear();
        scratch.push(bit);
        let mut s = 0;
        while s < m && (j >> s) & 1 == 1 {
            let half = 1usize << s;
            scratch.resize(2 * half, 0);
            for i in 0..half {
                scratch[half + i] = scratch[i];
                scratch[i] ^= self.left[s][i];
            }
            s += 1;
        }
        if s < m {
            pools
                .left
                .overwrite(s, &mut self.left[s])
                .copy_from_slice(scratch);
        }
    }
}

/// CRC-aided SCL decoder.
#[derive(Debug, Clone)]
pub struct SclDecoder {
    code: PolarCode,
    cfg: SclConfig,
    paths: Vec<PathState>,
    pools: Pools,
    active: Vec<usize>,
    next_active: Vec<usize>,
    free: Vec<usize>,
    candidates: Vec<Candidate>,
    survivors: Vec<u8>,
    scratch: Vec<u8>,
    out: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    path: usize,
    bit: u8,
    metric: f64,
    /// Agrees with the path's hard decision; breaks metric ties.
    follows_sign: bool,
}

impl Candidate {
    /// Strict total order: metric, then sign agreement, then slot and bit,
    /// so the surviving set never depends on the selection algorithm.
    fn order(&self, other: &Self) -> std::cmp::Ordering {
        self.metric
            .total_cmp(&other.metric)
            .then(other.follows_sign.cmp(&self.follows_sign))
            .then(self.path.cmp(&other.path))
            .then(self.bit.cmp(&other.bit))
    }
}

impl SclDecoder {
    pub fn new(code: &PolarCode, cfg: SclConfig) -> Result<Self> {
        if cfg.list_size == 0 {
            return Err(invalid("list size must be at least 1"));
        }
        if cfg.crc_bits != code.crc_bits() {
            return Err(invalid(format!(
                "decoder CRC width {} differs from the code's {}",
                cfg.crc_bits,
                code.crc_bits()
            )));
        }
        let list = cfg.list_size;
        Ok(Self {
            code: code.clone(),
            cfg,
            paths: vec![PathState::default(); list],
            pools: Pools {
                llr: Pool::new(code.m()),
                left: Pool::new(code.m()),
            },
            active: Vec::with_capacity(list),
            next_active: Vec::with_capacity(list),
            free: Vec::with_capacity(list),
            candidates: Vec::with_capacity(2 * list),
            survivors: vec![0; list],
            scratch: Vec::with_capacity(code.n()),
            out: vec![0; code.n()],
        })
    }

    pub fn code(&self) -> &PolarCode {
        &self.code
    }

    pub fn config(&self) -> SclConfig {
        self.cfg
    }

    pub fn decode(&mut self, llr: &[f64]) -> Result<ScDecodeResult> {
        let u = self.decode_in_place(llr)?.to_vec();
        Ok(ScDecodeResult::from_u(u))
    }

    pub fn decode_in_place(&mut self, channel: &[f64]) -> Result<&[u8]> {
        let n = self.code.n();
        check_len(channel, n)?;
        let m = self.code.m();
        let list = self.cfg.list_size;
        for p in self.paths.iter_mut() {
            p.release(&mut self.pools);
        }
        self.paths[0].reset(m, &mut self.pools);
        self.active.clear();
        self.active.push(0);
        self.free.clear();
        self.free.extend((1..list).rev());

        for j in 0..n {
            for &p in &self.active {
                self.paths[p].update_llr(channel, j, m, &mut self.pools);
            }
            if self.code.is_frozen(j) {
                for &p in &self.active {
                    let path = &mut self.paths[p];
                    path.metric += penalty(path.leaf_llr(channel), 0);
                    path.commit(j, 0, m, &mut self.scratch, &mut self.pools);
                }
                continue;
            }

            self.candidates.clear();
            for &p in &self.active {
                let l = self.paths[p].leaf_llr(channel);
                let base = self.paths[p].metric;
                let h = hard(l);
                for bit in [0u8, 1] {
                    self.candidates.push(Candidate {
                        path: p,
                        bit,
                        metric: base + penalty(l, bit),
                        follows_sign: bit == h,
                    });
                }
            }
            if self.candidates.len() > list {
                self.candidates.select_nth_unstable_by(list - 1, Candidate::order);
                debug_assert!(
                    self.candidates[list..]
                        .iter()
                        .all(|d| self.candidates[..list].iter().all(|c| c.metric <= d.metric)),
                    "kept path metric exceeds a discarded one"
                );
                self.candidates.truncate(list);
                // fixed processing order keeps slot assignment reproducible
                self.candidates.sort_unstable_by(Candidate::order);
            }

            // release dead paths, then split paths with two survivors
            // before either extension is committed
            self.survivors.fill(0);
            for c in &self.candidates {
                self.survivors[c.path] += 1;
            }
            for &p in &self.active {
                if self.survivors[p] == 0 {
                    self.paths[p].release(&mut self.pools);
                    self.free.push(p);
                }
            }
            self.next_active.clear();
            for c in self.candidates.iter_mut() {
                let target = if self.survivors[c.path] == 2 {
                    self.survivors[c.path] = 1;
                    let slot = self.free.pop().expect("list slot available");
                    let (src, dst) = pair_mut(&mut self.paths, c.path, slot);
                    dst.copy_from(src);
                    slot
                } else {
                    c.path
                };
                c.path = target;
                self.next_active.push(target);
            }
            for c in &self.candidates {
                let path = &mut self.paths[c.path];
                path.metric = c.metric;
                path.commit(j, c.bit, m, &mut self.scratch, &mut self.pools);
            }
            std::mem::swap(&mut self.active, &mut self.next_active);
        }

        self.active.sort_by(|&a, &b| {
            self.paths[a]
                .metric
                .total_cmp(&self.paths[b].metric)
                .then(a.cmp(&b))
        });
        let chosen = self
            .active
            .iter()
            .copied()
            .find(|&p| self.code.crc_ok(&self.paths[p].u))
            .unwrap_or(self.active[0]);
        self.out.copy_from_slice(&self.paths[chosen].u);
        Ok(&self.out)
    }
}

fn pair_mut<T>(v: &mut [T], src: usize, dst: usize) -> (&T, &mut T) {
    assert_ne!(src, dst);
    if src < dst {
        let (a, b) = v.split_at_mut(dst);
        (&a[src], &mut b[0])
    } else {
        let (a, b) = v.split_at_mut(src);
        (&b[0], &mut a[dst])
    }
}

/// One-shot SCL decode.
pub fn scl_decode(llr: &[f64], code: &PolarCode, cfg: SclConfig) -> Result<ScDecodeResult> {
    SclDecoder::new(code, cfg)?.decode(llr)
}

/// Which component decoder a lattice level uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecoderKind {
    Sc,
    Scl(SclConfig),
}

impl DecoderKind {
    pub fn crc_bits(&self) -> usize {
        match self {
            DecoderKind::Sc => 0,
            DecoderKind::Scl(cfg) => cfg.crc_bits,
        }
    }

    pub fn list_size(&self) -> usize {
        match self {
            DecoderKind::Sc => 1,
            DecoderKind::Scl(cfg) => cfg.list_size,
        }
    }
}

/// A decoder instance bound to one code.
#[derive(Debug, Clone)]
pub enum ComponentDecoder {
    Sc(ScDecoder),
    Scl(SclDecoder),
}

impl ComponentDecoder {
    pub fn new(code: &PolarCode, kind: DecoderKind) -> Result<Self> {
        Ok(match kind {
            DecoderKind::Sc => ComponentDecoder::Sc(ScDecoder::new(code)),
            DecoderKind::Scl(cfg) => ComponentDecoder::Scl(SclDecoder::new(code, cfg)?),
        })
    }

    pub fn code(&self) -> &PolarCode {
        match self {
            ComponentDecoder::Sc(d) => d.code(),
            ComponentDecoder::Scl(d) => d.code(),
        }
    }

    pub fn decode_in_place(&mut self, llr: &[f64]) -> Result<&[u8]> {
        match self {
            ComponentDecoder::Sc(d) => d.decode_in_place(llr),
            ComponentDecoder::Scl(d) => d.decode_in_place(llr),
        }
    }
}
