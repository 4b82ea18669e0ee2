//! Construction D lattices over nested polar codes.
//!
//! A point is `x = sum_i 2^i G~ u_i + 2^a G~ z` with real arithmetic, where
//! `u_i` is supported on the information set of level `i` and `z` is any
//! integer vector. Because `G~` is unimodular over the integers, a point is
//! equally described by its level decomposition, which is what the
//! multistage decoder recovers one level at a time.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::AmgnLevel;
pub use crate::decoder::DecoderKind;
use crate::decoder::{ComponentDecoder, SclConfig};
use crate::error::{invalid, Error, Result};
use crate::polar::{
    info_set_size, log2_exact, polar_transform, polar_transform_integer, NestedCodeFamily, PolarCode,
    ReliabilityOrder,
};

/// Version written into design documents.
pub const DESIGN_FORMAT_VERSION: u32 = 1;

/// An integer lattice point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub x: Vec<i64>,
}

impl LatticePoint {
    pub fn origin(n: usize) -> Self {
        Self { x: vec![0; n] }
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.x.iter().map(|&v| v as f64).collect()
    }
}

/// A lattice design: nested component codes, payload sizes, decoder choice
/// and the noise level it was designed for.
///
/// `k[i]` counts payload bits; with a CRC, level `i` occupies
/// `k[i] + crc_bits` positions (or none when `k[i] = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignDocument", into = "DesignDocument")]
pub struct LatticeDesign {
    family: NestedCodeFamily,
    k: Vec<usize>,
    decoder: DecoderKind,
    sigma2_a: f64,
    target_wer: f64,
    predicted_wer: Vec<Option<f64>>,
    codes: Vec<PolarCode>,
}

/// On-disk form of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DesignDocument {
    format_version: u32,
    n: usize,
    a: usize,
    /// Payload bits per level, including the uncoded top level (`= n`).
    k: Vec<usize>,
    info_sets: Vec<Vec<usize>>,
    orderings: Vec<ReliabilityOrder>,
    decoder: String,
    crc_bits: usize,
    list_size: usize,
    sigma2_a: f64,
    target_wer: f64,
    predicted_wer: Vec<Option<f64>>,
}

impl From<LatticeDesign> for DesignDocument {
    fn from(d: LatticeDesign) -> Self {
        let mut k = d.k.clone();
        k.push(d.n());
        DesignDocument {
            format_version: DESIGN_FORMAT_VERSION,
            n: d.n(),
            a: d.levels(),
            k,
            info_sets: d.family.info_sets().to_vec(),
            orderings: d.family.orderings().to_vec(),
            decoder: match d.decoder {
                DecoderKind::Sc => "sc".into(),
                DecoderKind::Scl(_) => "scl".into(),
            },
            crc_bits: d.decoder.crc_bits(),
            list_size: d.decoder.list_size(),
            sigma2_a: d.sigma2_a,
            target_wer: d.target_wer,
            predicted_wer: d.predicted_wer,
        }
    }
}

impl TryFrom<DesignDocument> for LatticeDesign {
    type Error = Error;

    fn try_from(doc: DesignDocument) -> Result<Self> {
        if doc.format_version != DESIGN_FORMAT_VERSION {
            return Err(invalid(format!(
                "unsupported design format version {}",
                doc.format_version
            )));
        }
        if doc.k.len() != doc.a + 1 || doc.k[doc.a] != doc.n {
            return Err(invalid("k must list every coded level followed by n"));
        }
        let decoder = match doc.decoder.as_str() {
            "sc" if doc.crc_bits == 0 && doc.list_size == 1 => DecoderKind::Sc,
            "sc" => return Err(invalid("SC designs carry no CRC and list size 1")),
            "scl" => DecoderKind::Scl(SclConfig::new(doc.list_size, doc.crc_bits)?),
            other => return Err(invalid(format!("unknown decoder '{other}'"))),
        };
        let family = NestedCodeFamily::new(doc.n, doc.info_sets, doc.orderings)?;
        let mut k = doc.k;
        k.pop();
        LatticeDesign::new(
            family,
            k,
            decoder,
            doc.sigma2_a,
            doc.target_wer,
            doc.predicted_wer,
        )
    }
}

impl LatticeDesign {
    pub fn new(
        family: NestedCodeFamily,
        k: Vec<usize>,
        decoder: DecoderKind,
        sigma2_a: f64,
        target_wer: f64,
        predicted_wer: Vec<Option<f64>>,
    ) -> Result<Self> {
        let a = family.levels();
        if k.len() != a {
            return Err(Error::LengthMismatch {
                expected: a,
                actual: k.len(),
            });
        }
        if predicted_wer.len() != a {
            return Err(Error::LengthMismatch {
                expected: a,
                actual: predicted_wer.len(),
            });
        }
        if !(sigma2_a > 0.0 && sigma2_a.is_finite()) {
            return Err(invalid(format!("sigma2_a must be positive, got {sigma2_a}")));
        }
        if !(target_wer > 0.0 && target_wer < 1.0) {
            return Err(invalid(format!(
                "target WER must lie in (0, 1), got {target_wer}"
            )));
        }
        if k.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("level rates must be nondecreasing"));
        }
        let crc = decoder.crc_bits();
        let mut codes = Vec::with_capacity(a);
        for (i, &ki) in k.iter().enumerate() {
            let set = family.info_set(i);
            let want = info_set_size(ki, crc);
            if set.len() != want {
                return Err(invalid(format!(
                    "level {i}: {ki} payload bits with {crc} CRC bits need {want} positions, \
                     information set has {}",
                    set.len()
                )));
            }
            codes.push(PolarCode::new(
                family.n(),
                set.to_vec(),
                if ki == 0 { 0 } else { crc },
            )?);
        }
        Ok(Self {
            family,
            k,
            decoder,
            sigma2_a,
            target_wer,
            predicted_wer,
            codes,
        })
    }

    /// Design with explicit information sets; payload sizes follow from the
    /// set sizes and the decoder's CRC. Target and noise fields are
    /// placeholders.
    pub fn from_sets(n: usize, info_sets: Vec<Vec<usize>>, decoder: DecoderKind) -> Result<Self> {
        let crc = decoder.crc_bits();
        let k = info_sets
            .iter()
            .map(|s| {
                if s.is_empty() {
                    0
                } else {
                    s.len().saturating_sub(crc)
                }
            })
            .collect();
        let a = info_sets.len();
        let family = NestedCodeFamily::from_sets(n, info_sets)?;
        Self::new(family, k, decoder, 1.0, 0.5, vec![None; a])
    }

    /// The uncoded lattice `Z^n`.
    pub fn integer_lattice(n: usize) -> Result<Self> {
        Self::from_sets(n, vec![], DecoderKind::Sc)
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    /// Number of coded levels `a`.
    pub fn levels(&self) -> usize {
        self.family.levels()
    }

    pub fn family(&self) -> &NestedCodeFamily {
        &self.family
    }

    /// Payload bits per coded level.
    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn rates(&self) -> Vec<f64> {
        self.k.iter().map(|&k| k as f64 / self.n() as f64).collect()
    }

    pub fn decoder(&self) -> DecoderKind {
        self.decoder
    }

    pub fn code(&self, level: usize) -> &PolarCode {
        &self.codes[level]
    }

    pub fn codes(&self) -> &[PolarCode] {
        &self.codes
    }

    pub fn sigma2_a(&self) -> f64 {
        self.sigma2_a
    }

    /// Level-0 noise variance the design targets, `4^a sigma2_a`.
    pub fn design_sigma2(&self) -> f64 {
        self.sigma2_a * 4f64.powi(self.levels() as i32)
    }

    pub fn target_wer(&self) -> f64 {
        self.target_wer
    }

    /// Per-level predicted word error rate, where one was computed.
    pub fn predicted_wer(&self) -> &[Option<f64>] {
        &self.predicted_wer
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `log2 V = a n - sum_i k_i`.
    pub fn log2_volume(&self) -> f64 {
        (self.levels() * self.n()) as f64 - self.k.iter().sum::<usize>() as f64
    }

    pub fn volume(&self) -> f64 {
        self.log2_volume().exp2()
    }

    /// Volume-to-noise ratio in dB at level-0 noise variance `sigma2`.
    pub fn vnr_db(&self, sigma2: f64) -> f64 {
        let v_2n = (2.0 * self.log2_volume() / self.n() as f64).exp2();
        10.0 * (v_2n / (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma2)).log10()
    }

    /// Inverse of [`LatticeDesign::vnr_db`].
    pub fn sigma2_for_vnr(&self, vnr_db: f64) -> f64 {
        let v_2n = (2.0 * self.log2_volume() / self.n() as f64).exp2();
        v_2n / (2.0 * std::f64::consts::PI * std::f64::consts::E * 10f64.powf(vnr_db / 10.0))
    }

    /// Level at which basis column `j` enters: the lowest `i` with
    /// `j` in `I_i`, or `a` for columns only the integer level reaches.
    pub fn column_level(&self, j: usize) -> usize {
        (0..self.levels())
            .find(|&i| self.codes[i].info_set().binary_search(&j).is_ok())
            .unwrap_or(self.levels())
    }

    /// Lattice basis `G = G~ D^{-1}`: column `j` of `G~` scaled by
    /// `2^{column_level(j)}`.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0u8; n];
            e[j] = 1;
            polar_transform(&mut e);
            let scale = (1u64 << self.column_level(j)) as f64;
            for (r, &b) in e.iter().enumerate() {
                g[(r, j)] = b as f64 * scale;
            }
        }
        g
    }

    /// `x = sum_i 2^i G~ place(u_i) + 2^a G~ z`, where `place` attaches the
    /// level's CRC and spreads the payload over its information set.
    pub fn encode(&self, payloads: &[Vec<u8>], z: &[i64]) -> Result<LatticePoint> {
        let n = self.n();
        let a = self.levels();
        if payloads.len() != a {
            return Err(Error::LengthMismatch {
                expected: a,
                actual: payloads.len(),
            });
        }
        if z.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: z.len(),
            });
        }
        let mut x = vec![0i64; n];
        let mut tmp = vec![0i64; n];
        for (i, (code, payload)) in self.codes.iter().zip(payloads).enumerate() {
            let u = code.place(payload)?;
            for (t, &b) in tmp.iter_mut().zip(&u) {
                *t = b as i64;
            }
            polar_transform_integer(&mut tmp);
            for (xv, &t) in x.iter_mut().zip(&tmp) {
                *xv += t << i;
            }
        }
        tmp.copy_from_slice(z);
        polar_transform_integer(&mut tmp);
        for (xv, &t) in x.iter_mut().zip(&tmp) {
            *xv += t << a;
        }
        Ok(LatticePoint { x })
    }

    /// Splits a point into per-level input vectors `u_i` and the top-level
    /// integer residual `r_a` (so `x = sum 2^i G~ u_i + 2^a r_a`). Fails
    /// with [`Error::NonzeroFrozen`] if `x` is not in the lattice.
    pub fn decompose(&self, x: &[i64]) -> Result<(Vec<Vec<u8>>, Vec<i64>)> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let mut r = x.to_vec();
        let mut levels = Vec::with_capacity(self.levels());
        let mut xi = vec![0i64; n];
        for code in &self.codes {
            let mut u: Vec<u8> = r.iter().map(|v| v.rem_euclid(2) as u8).collect();
            // F is an involution over GF(2)
            polar_transform(&mut u);
            if let Some(j) = (0..n).find(|&j| code.is_frozen(j) && u[j] != 0) {
                return Err(Error::NonzeroFrozen(j));
            }
            for (t, &b) in xi.iter_mut().zip(&u) {
                *t = b as i64;
            }
            polar_transform_integer(&mut xi);
            for (rv, &t) in r.iter_mut().zip(&xi) {
                *rv = (*rv - t) / 2;
            }
            levels.push(u);
        }
        Ok((levels, r))
    }

    /// Membership test. CRC constraints are not checked.
    pub fn contains(&self, x: &[i64]) -> bool {
        self.decompose(x).is_ok()
    }
}

/// Free-function form of [`LatticeDesign::encode`].
pub fn lattice_encode(payloads: &[Vec<u8>], z: &[i64], design: &LatticeDesign) -> Result<LatticePoint> {
    design.encode(payloads, z)
}

/// Free-function form of [`LatticeDesign::generator_matrix`].
pub fn generator_matrix(design: &LatticeDesign) -> DMatrix<f64> {
    design.generator_matrix()
}

pub fn volume(design: &LatticeDesign) -> f64 {
    design.volume()
}

pub fn vnr_db(design: &LatticeDesign, sigma2: f64) -> f64 {
    design.vnr_db(sigma2)
}

/// Outcome of one decoded trial against a known transmitted point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub word_error: bool,
    /// First level (0..=a) whose estimate was wrong.
    pub first_error: Option<usize>,
    /// Per-level errors when every earlier level is given the true value.
    pub genie_errors: Vec<bool>,
}

/// Multistage decoder: levels `0..a` with component polar decoders, then
/// componentwise rounding for the integer level.
#[derive(Debug, Clone)]
pub struct MultistageDecoder {
    n: usize,
    decoders: Vec<ComponentDecoder>,
    channels: Vec<AmgnLevel>,
    residual: Vec<f64>,
    llr: Vec<f64>,
    xi: Vec<i64>,
    u_hat: Vec<Vec<u8>>,
}

impl MultistageDecoder {
    pub fn new(design: &LatticeDesign, sigma2: f64) -> Result<Self> {
        let n = design.n();
        let decoders = design
            .codes()
            .iter()
            .map(|c| ComponentDecoder::new(c, component_kind(design.decoder(), c)))
            .collect::<Result<Vec<_>>>()?;
        let channels = (0..design.levels())
            .map(|i| AmgnLevel::new(sigma2, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            decoders,
            channels,
            residual: vec![0.0; n],
            llr: vec![0.0; n],
            xi: vec![0; n],
            u_hat: vec![vec![0; n]; design.levels()],
        })
    }

    pub fn set_sigma2(&mut self, sigma2: f64) -> Result<()> {
        for (i, ch) in self.channels.iter_mut().enumerate() {
            *ch = AmgnLevel::new(sigma2, i)?;
        }
        Ok(())
    }

    /// Decodes level `i` from the current residual and subtracts the
    /// re-encoded estimate, halving the residual.
    fn step(&mut self, i: usize) -> Result<()> {
        self.channels[i].llrs_into(&self.residual, &mut self.llr);
        let u = self.decoders[i].decode_in_place(&self.llr)?;
        self.u_hat[i].copy_from_slice(u);
        self.peel(i, None);
        Ok(())
    }

    /// `r <- (r - G~ u) / 2` with `u` the estimate of level `i`, or the
    /// given vector.
    fn peel(&mut self, i: usize, u: Option<&[u8]>) {
        let u = u.unwrap_or(&self.u_hat[i]);
        for (t, &b) in self.xi.iter_mut().zip(u) {
            *t = b as i64;
        }
        polar_transform_integer(&mut self.xi);
        for (r, &t) in self.residual.iter_mut().zip(&self.xi) {
            *r = (*r - t as f64) * 0.5;
        }
    }

    pub fn decode(&mut self, y: &[f64]) -> Result<LatticePoint> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        self.residual.copy_from_slice(y);
        let a = self.decoders.len();
        let mut x = vec![0i64; self.n];
        for i in 0..a {
            self.step(i)?;
            for (xv, &t) in x.iter_mut().zip(&self.xi) {
                *xv += t << i;
            }
        }
        for (xv, &r) in x.iter_mut().zip(&self.residual) {
            *xv += (r.round_ties_even() as i64) << a;
        }
        Ok(LatticePoint { x })
    }

    /// Decodes `y` and attributes errors against the transmitted point,
    /// given as its decomposition (see [`LatticeDesign::decompose`]).
    /// Genie errors for levels past the first failure are found by
    /// re-decoding with the true earlier levels removed.
    pub fn decode_trial(&mut self, y: &[f64], truth: &(Vec<Vec<u8>>, Vec<i64>)) -> Result<TrialOutcome> {
        let (levels, top) = truth;
        let a = self.decoders.len();
        self.residual.copy_from_slice(y);
        let mut genie_errors = vec![false; a + 1];
        let mut first_error = None;
        for i in 0..a {
            self.channels[i].llrs_into(&self.residual, &mut self.llr);
            let u = self.decoders[i].decode_in_place(&self.llr)?;
            let wrong = u != levels[i].as_slice();
            if wrong {
                genie_errors[i] = true;
                first_error.get_or_insert(i);
            }
            // follow the true chain: identical to the decoder's own path
            // until its first error
            self.peel(i, Some(&levels[i]));
        }
        let top_wrong = self
            .residual
            .iter()
            .zip(top)
            .any(|(&r, &t)| r.round_ties_even() as i64 != t);
        if top_wrong {
            genie_errors[a] = true;
            first_error.get_or_insert(a);
        }
        Ok(TrialOutcome {
            word_error: first_error.is_some(),
            first_error,
            genie_errors,
        })
    }
}

/// Levels without payload are all-frozen and carry no CRC.
fn component_kind(kind: DecoderKind, code: &PolarCode) -> DecoderKind {
    match kind {
        DecoderKind::Scl(cfg) if code.crc_bits() != cfg.crc_bits => DecoderKind::Scl(SclConfig {
            list_size: cfg.list_size,
            crc_bits: code.crc_bits(),
        }),
        k => k,
    }
}

/// Nearest lattice point by exhaustive search over the integer box within
/// `radius` of the componentwise rounding of `y`. Exponential in `n`; for
/// small test lattices only.
pub fn nearest_point_brute_force(design: &LatticeDesign, y: &[f64], radius: i64) -> Result<LatticePoint> {
    let n = design.n();
    log2_exact(n)?;
    if n > 8 {
        return Err(invalid("brute-force search is limited to n <= 8"));
    }
    let center: Vec<i64> = y.iter().map(|v| v.round() as i64).collect();
    let width = (2 * radius + 1) as usize;
    let total = width.pow(n as u32);
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut cand = vec![0i64; n];
    for idx in 0..total {
        let mut rest = idx;
        for (c, &m) in cand.iter_mut().zip(&center) {
            *c = m + (rest % width) as i64 - radius;
            rest /= width;
        }
        if !design.contains(&cand) {
            continue;
        }
        let d: f64 = cand.iter().zip(y).map(|(&c, &v)| (c as f64 - v).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, cand.clone()));
        }
    }
    best.map(|(_, x)| LatticePoint { x })
        .ok_or_else(|| invalid("no lattice point inside the search box"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> LatticeDesign {
        LatticeDesign::from_sets(4, vec![vec![2, 3], vec![1, 2, 3]], DecoderKind::Sc).unwrap()
    }

    #[test]
    fn example1_points() {
        let d = example1();
        let origin = d.encode(&[vec![0, 0], vec![0, 0, 0]], &[0; 4]).unwrap();
        assert_eq!(origin.x, vec![0; 4]);
        let p = d.encode(&[vec![1, 0], vec![0, 0, 0]], &[0; 4]).unwrap();
        assert_eq!(p.x, vec![1, 0, 1, 0]);
        let q = d.encode(&[vec![1, 1], vec![1, 0, 0]], &[0, 0, 0, -1]).unwrap();
        assert_eq!(q.x, vec![0, -1, -2, -3]);
    }

    #[test]
    fn example1_generator() {
        let d = example1();
        let g = d.generator_matrix();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            4.0, 2.0, 1.0, 1.0,
            0.0, 2.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 1.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(g, expected);
        assert!((g.determinant().abs() - 8.0).abs() < 1e-12);
        assert_eq!(d.volume(), 8.0);
    }

    #[test]
    fn integer_lattice_is_identity() {
        let d = LatticeDesign::integer_lattice(8).unwrap();
        let g = d.generator_matrix();
        // unscaled G~: unimodular, so it spans Z^n
        assert!((g.determinant().abs() - 1.0).abs() < 1e-12);
        assert_eq!(
            g.column(1).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(d.volume(), 1.0);
        assert!(d.contains(&[3, -1, 0, 0, 7, 2, 1, 1]));
    }

    #[test]
    fn decompose_rejects_non_members() {
        let d = example1();
        assert!(!d.contains(&[1, 0, 0, 0]));
        assert!(d.contains(&[1, 0, 1, 0]));
        assert!(d.decompose(&[0; 3]).is_err());
    }

    #[test]
    fn vnr_reference_points() {
        let d = example1();
        let s2 = d.sigma2_for_vnr(0.0);
        assert!(d.vnr_db(s2).abs() < 1e-12);
        let v = d.volume();
        let poltyrev = (v.powf(2.0 / 4.0)) / (2.0 * std::f64::consts::PI * std::f64::consts::E);
        assert!((s2 - poltyrev).abs() < 1e-15);
        assert!(d.vnr_db(0.1) > d.vnr_db(0.2));
    }

    #[test]
    fn json_round_trip() {
        let d = example1();
        let s = d.to_json().unwrap();
        let back = LatticeDesign::from_json(&s).unwrap();
        assert_eq!(back, d);
        assert!(s.contains("\"format_version\": 1"));
        let bad = s.replace("\"sc\"", "\"osd\"");
        assert!(LatticeDesign::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_inconsistent_sizes() {
        let family = NestedCodeFamily::from_sets(4, vec![vec![3], vec![2, 3]]).unwrap();
        assert!(LatticeDesign::new(
            family.clone(),
            vec![1, 2],
            DecoderKind::Sc,
            1.0,
            0.1,
            vec![None; 2]
        )
        .is_ok());
        assert!(LatticeDesign::new(
            family.clone(),
            vec![1, 3],
            DecoderKind::Sc,
            1.0,
            0.1,
            vec![None; 2]
        )
        .is_err());
        assert!(LatticeDesign::new(family, vec![1, 2], DecoderKind::Sc, 1.0, 1.5, vec![None; 2]).is_err());
    }

    #[test]
    fn zero_noise_decode() {
        let d = example1();
        let p = d.encode(&[vec![1, 1], vec![1, 0, 1]], &[2, -1, 0, 5]).unwrap();
        let mut dec = MultistageDecoder::new(&d, 0.01).unwrap();
        assert_eq!(dec.decode(&p.as_f64()).unwrap(), p);
        let truth = d.decompose(&p.x).unwrap();
        let out = dec.decode_trial(&p.as_f64(), &truth).unwrap();
        assert!(!out.word_error);
    }

    #[test]
    fn level_zero_failure_is_attributed_to_level_zero() {
        let d = example1();
        let mut dec = MultistageDecoder::new(&d, 0.01).unwrap();
        // push every coordinate across the odd boundary
        let y = vec![1.0, 1.0, 1.0, 1.0];
        let truth = d.decompose(&[0; 4]).unwrap();
        let out = dec.decode_trial(&y, &truth).unwrap();
        assert_eq!(out.first_error, Some(0));
        assert!(out.word_error);
        let x = dec.decode(&y).unwrap();
        assert_ne!(x.x, vec![0; 4]);
        assert!(d.contains(&x.x));
    }
}
