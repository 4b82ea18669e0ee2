//! Binary polar codes in natural (non bit-reversed) order.
//!
//! A codeword is `x = u * F^{(x)m}` with kernel `F = [[1, 0], [1, 1]]`. Column `j`
//! of the Construction D basis `G~ = (F^{(x)m})^t` is therefore the codeword
//! produced by the unit vector `e_j`, and information sets index those columns.

use serde::{Deserialize, Serialize};

use crate::crc;
use crate::error::{invalid, Error, Result};

/// Polarization-weight base, `2^{1/4}`.
pub const PW_BETA: f64 = 1.189_207_115_002_721;

pub(crate) fn log2_exact(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// In-place transform over GF(2).
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in bits.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// The same butterfly over the integers: computes `G~ * u` with real
/// (not modulo-2) arithmetic, as Construction D requires.
pub fn polar_transform_integer(values: &mut [i64]) {
    let n = values.len();
    let mut half = 1;
    while half < n {
        for block in values.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a += *b;
            }
        }
        half *= 2;
    }
}

/// Encodes a full-length input vector `u` whose frozen positions are zero.
pub fn polar_encode(u: &[u8], code: &PolarCode) -> Result<Vec<u8>> {
    code.encode(u)
}

/// A binary polar code.
///
/// `info_set` is kept sorted ascending, which is also decoding order. When a
/// CRC is used its bits sit on the last `crc_bits` positions of the
/// information set in that order; the payload fills the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    n: usize,
    m: usize,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
    crc_bits: usize,
}

impl PolarCode {
    pub fn new(n: usize, mut info_set: Vec<usize>, crc_bits: usize) -> Result<Self> {
        let m = log2_exact(n)?;
        crc::Crc::for_width(crc_bits)?;
        info_set.sort_unstable();
        let mut frozen = vec![true; n];
        for &j in &info_set {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if !frozen[j] {
                return Err(invalid(format!("duplicate information index {j}")));
            }
            frozen[j] = false;
        }
        if crc_bits > info_set.len() {
            return Err(invalid(format!(
                "{crc_bits} CRC bits do not fit an information set of size {}",
                info_set.len()
            )));
        }
        Ok(Self {
            n,
            m,
            info_set,
            frozen,
            crc_bits,
        })
    }

    /// Code carrying `payload_bits` bits plus a CRC on the most reliable
    /// positions of `order`. A zero payload gives the all-frozen code.
    pub fn from_ordering(order: &ReliabilityOrder, payload_bits: usize, crc_bits: usize) -> Result<Self> {
        let size = info_set_size(payload_bits, crc_bits);
        let set = select_info_set(order, size)?;
        let crc_bits = if payload_bits == 0 { 0 } else { crc_bits };
        Self::new(order.n(), set, crc_bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn is_frozen(&self, j: usize) -> bool {
        self.frozen[j]
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    pub fn crc_bits(&self) -> usize {
        self.crc_bits
    }

    /// Number of free payload bits; the dimension of the (CRC-aided) code.
    pub fn dimension(&self) -> usize {
        self.info_set.len() - self.crc_bits
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n as f64
    }

    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: u.len(),
            });
        }
        if let Some(j) = (0..self.n).find(|&j| self.frozen[j] && u[j] != 0) {
            return Err(Error::NonzeroFrozen(j));
        }
        let mut x = u.to_vec();
        polar_transform(&mut x);
        Ok(x)
    }

    /// Builds the length-n input vector from a payload, attaching the CRC.
    pub fn place(&self, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.len() != self.dimension() {
            return Err(Error::LengthMismatch {
                expected: self.dimension(),
                actual: payload.len(),
            });
        }
        let word = crc::crc_attach(payload, self.crc_bits)?;
        let mut u = vec![0u8; self.n];
        for (&j, &b) in self.info_set.iter().zip(&word) {
            u[j] = b & 1;
        }
        Ok(u)
    }

    /// Information bits of `u` in decoding order (payload then CRC).
    pub fn extract(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&j| u[j]).collect()
    }

    /// Whether the information bits of `u` satisfy the CRC.
    pub fn crc_ok(&self, u: &[u8]) -> bool {
        if self.crc_bits == 0 {
            return true;
        }
        crc::crc_check(&self.extract(u), self.crc_bits).unwrap_or(false)
    }
}

/// Information-set size needed for a payload and CRC.
pub fn info_set_size(payload_bits: usize, crc_bits: usize) -> usize {
    if payload_bits == 0 {
        0
    } else {
        payload_bits + crc_bits
    }
}

/// How a reliability ordering was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OrderingSource {
    /// Error probabilities from density evolution at this noise variance.
    DensityEvolution {
        sigma2: f64,
    },
    PolarizationWeight,
    /// Supplied directly by the caller.
    Explicit,
}

/// Permutation of `0..n` from least to most reliable position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityOrder {
    order: Vec<usize>,
    source: OrderingSource,
}

impl ReliabilityOrder {
    pub fn new(order: Vec<usize>, source: OrderingSource) -> Result<Self> {
        log2_exact(order.len())?;
        let n = order.len();
        let mut seen = vec![false; n];
        for &j in &order {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(invalid(format!("index {j} repeated in ordering")));
            }
        }
        Ok(Self { order, source })
    }

    /// Sorts by decreasing score (least reliable first), ties by ascending index.
    fn from_unreliability(unreliability: &[f64], source: OrderingSource) -> Self {
        let mut order: Vec<usize> = (0..unreliability.len()).collect();
        order.sort_by(|&a, &b| unreliability[b].total_cmp(&unreliability[a]).then(a.cmp(&b)));
        Self { order, source }
    }

    /// Ordering by per-position error probability (larger is less reliable).
    pub fn from_error_probabilities(p: &[f64], sigma2: f64) -> Result<Self> {
        log2_exact(p.len())?;
        Ok(Self::from_unreliability(
            p,
            OrderingSource::DensityEvolution { sigma2 },
        ))
    }

    /// Ordering whose most reliable positions are exactly `set`; used for
    /// externally specified information sets.
    pub fn explicit_for_set(n: usize, set: &[usize]) -> Result<Self> {
        log2_exact(n)?;
        let mut member = vec![false; n];
        for &j in set {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            member[j] = true;
        }
        let mut order: Vec<usize> = (0..n).filter(|&j| !member[j]).collect();
        let mut tail: Vec<usize> = set.to_vec();
        tail.sort_unstable();
        tail.dedup();
        order.extend(tail);
        Self::new(order, OrderingSource::Explicit)
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn source(&self) -> &OrderingSource {
        &self.source
    }

    /// The same ordering with every index outside `allowed` moved to the
    /// unreliable end, keeping relative order otherwise.
    pub fn restricted_to(&self, allowed: &[usize]) -> Self {
        let mut member = vec![false; self.n()];
        for &j in allowed {
            if j < member.len() {
                member[j] = true;
            }
        }
        let (inside, outside): (Vec<usize>, Vec<usize>) = self.order.iter().partition(|&&j| member[j]);
        let mut order = outside;
        order.extend(inside);
        Self {
            order,
            source: self.source.clone(),
        }
    }
}

/// Polarization weight of index `j`: sum of `beta^i` over its set bits.
pub fn pw_weight(j: usize) -> f64 {
    let mut w = 0.0;
    let mut bit = 0;
    let mut v = j;
    while v != 0 {
        if v & 1 == 1 {
            w += PW_BETA.powi(bit);
        }
        v >>= 1;
        bit += 1;
    }
    w
}

/// Channel-independent ordering by polarization weight.
pub fn pw_ordering(n: usize) -> Result<ReliabilityOrder> {
    log2_exact(n)?;
    let weights: Vec<f64> = (0..n).map(pw_weight).collect();
    // low weight = unreliable; reuse the "larger score first" sorter on -w
    let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
    Ok(ReliabilityOrder::from_unreliability(
        &neg,
        OrderingSource::PolarizationWeight,
    ))
}

/// The `k` most reliable positions, sorted ascending.
pub fn select_info_set(order: &ReliabilityOrder, k: usize) -> Result<Vec<usize>> {
    let n = order.n();
    if k > n {
        return Err(Error::KOutOfRange { k, max: n });
    }
    let mut set = order.order[n - k..].to_vec();
    set.sort_unstable();
    Ok(set)
}

/// Dense binary matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<u8>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, &v) in col.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v & 1;
    }

    pub fn column(&self, c: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Nested information sets `I_0 ⊆ I_1 ⊆ ... ⊆ I_{a-1}`: the code chain of a
/// Construction D lattice. The top level `C_a = F_2^n` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCodeFamily {
    n: usize,
    info_sets: Vec<Vec<usize>>,
    orderings: Vec<ReliabilityOrder>,
}

impl NestedCodeFamily {
    pub fn new(n: usize, info_sets: Vec<Vec<usize>>, orderings: Vec<ReliabilityOrder>) -> Result<Self> {
        log2_exact(n)?;
        if orderings.len() != info_sets.len() {
            return Err(Error::LengthMismatch {
                expected: info_sets.len(),
                actual: orderings.len(),
            });
        }
        if let Some(o) = orderings.iter().find(|o| o.n() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: o.n(),
            });
        }
        let mut sets = info_sets;
        let mut members: Vec<Vec<bool>> = Vec::with_capacity(sets.len());
        for set in sets.iter_mut() {
            set.sort_unstable();
            let mut mark = vec![false; n];
            for &j in set.iter() {
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, n });
                }
                if std::mem::replace(&mut mark[j], true) {
                    return Err(invalid(format!("index {j} repeated in information set")));
                }
            }
            members.push(mark);
        }
        for i in 1..sets.len() {
            if sets[i - 1].iter().any(|&j| !members[i][j]) {
                return Err(Error::NotNested(i - 1, i));
            }
        }
        Ok(Self {
            n,
            info_sets: sets,
            orderings,
        })
    }

    /// Family built from explicit sets, with orderings that reproduce them.
    pub fn from_sets(n: usize, info_sets: Vec<Vec<usize>>) -> Result<Self> {
        let orderings = info_sets
            .iter()
            .map(|s| ReliabilityOrder::explicit_for_set(n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, info_sets, orderings)
    }

    /// Family from a single ordering: level `i` gets the `sizes[i]` most reliable positions.
    pub fn from_ordering(order: &ReliabilityOrder, sizes: &[usize]) -> Result<Self> {
        let sets = sizes
            .iter()
            .map(|&k| select_info_set(order, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order.n(), sets, vec![order.clone(); sizes.len()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of coded levels `a`.
    pub fn levels(&self) -> usize {
        self.info_sets.len()
    }

    pub fn info_sets(&self) -> &[Vec<usize>] {
        &self.info_sets
    }

    pub fn info_set(&self, level: usize) -> &[usize] {
        &self.info_sets[level]
    }

    pub fn orderings(&self) -> &[ReliabilityOrder] {
        &self.orderings
    }

    /// Whether `C_i * C_i ⊆ C_{i+1}` (componentwise products) holds for every
    /// level. For transform rows, `row(j) * row(l) = row(j & l)`, so this is
    /// a closure check on index ANDs. When it holds, summing binary
    /// codewords as 0/1 integer vectors gives an additive group. The
    /// integer-transform encoding in `LatticeDesign` is a lattice either way.
    pub fn closed_under_products(&self) -> bool {
        let a = self.levels();
        (0..a).all(|i| {
            if i + 1 == a {
                return true;
            }
            let mut next = vec![false; self.n];
            for &j in &self.info_sets[i + 1] {
                next[j] = true;
            }
            let set = &self.info_sets[i];
            set.iter().all(|&j| set.iter().all(|&l| next[j & l]))
        })
    }

    /// Generator matrices `G~_0 ... G~_{a-1}` and the full basis `G~`.
    pub fn nested_generators(&self) -> (Vec<BitMatrix>, BitMatrix) {
        let n = self.n;
        let columns: Vec<Vec<u8>> = (0..n)
            .map(|j| {
                let mut e = vec![0u8; n];
                e[j] = 1;
                polar_transform(&mut e);
                e
            })
            .collect();
        let full = BitMatrix::from_columns(n, &columns);
        let levels = self
            .info_sets
            .iter()
            .map(|set| {
                let cols: Vec<Vec<u8>> = set.iter().map(|&j| columns[j].clone()).collect();
                BitMatrix::from_columns(n, &cols)
            })
            .collect();
        (levels, full)
    }
}

/// Generator matrices of a family; see [`NestedCodeFamily::nested_generators`].
pub fn nested_generators(family: &NestedCodeFamily) -> (Vec<BitMatrix>, BitMatrix) {
    family.nested_generators()
}
