//! Bitwise CRCs used to select a path at the end of list decoding.
//!
//! Registers start at zero and no output XOR is applied, so every CRC here is
//! a linear map of the payload and a CRC-aided polar code stays a linear code.

use crate::error::{Error, Result};

/// A CRC generator polynomial of a given width.
///
/// `poly` holds the coefficients below the leading term, MSB first
/// (`x^6 + x + 1` is `0b000011`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc {
    width: usize,
    poly: u32,
}

impl Crc {
    pub const CRC6: Crc = Crc { width: 6, poly: 0x03 };
    pub const CRC10: Crc = Crc {
        width: 10,
        poly: 0x233,
    };
    /// CCITT x^16 + x^12 + x^5 + 1.
    pub const CRC16: Crc = Crc {
        width: 16,
        poly: 0x1021,
    };

    /// Looks up the polynomial for a width. Width 0 yields `None`.
    pub fn for_width(width: usize) -> Result<Option<Crc>> {
        match width {
            0 => Ok(None),
            6 => Ok(Some(Self::CRC6)),
            10 => Ok(Some(Self::CRC10)),
            16 => Ok(Some(Self::CRC16)),
            w => Err(Error::UnsupportedCrc(w)),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Remainder of `bits(x) * x^width` modulo the generator, as `width` bits MSB first.
    pub fn remainder(&self, bits: &[u8]) -> Vec<u8> {
        let top = 1u32 << (self.width - 1);
        let mask = (1u32 << self.width) - 1;
        let mut reg = 0u32;
        for &b in bits {
            let feedback = ((reg & top) != 0) ^ (b & 1 == 1);
            reg = (reg << 1) & mask;
            if feedback {
                reg ^= self.poly;
            }
        }
        (0..self.width).rev().map(|i| ((reg >> i) & 1) as u8).collect()
    }
}

/// Appends `crc_bits` CRC bits to `payload`.
pub fn crc_attach(payload: &[u8], crc_bits: usize) -> Result<Vec<u8>> {
    let mut out = payload.to_vec();
    if let Some(crc) = Crc::for_width(crc_bits)? {
        out.extend(crc.remainder(payload));
    }
    Ok(out)
}

/// Checks a word produced by [`crc_attach`]. Width 0 always passes.
pub fn crc_check(bits: &[u8], crc_bits: usize) -> Result<bool> {
    let Some(crc) = Crc::for_width(crc_bits)? else {
        return Ok(true);
    };
    if bits.len() < crc_bits {
        return Err(Error::LengthMismatch {
            expected: crc_bits,
            actual: bits.len(),
        });
    }
    let (payload, tail) = bits.split_at(bits.len() - crc_bits);
    Ok(crc.remainder(payload) == tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_width_is_identity() {
        let p = vec![1, 0, 1, 1];
        assert_eq!(crc_attach(&p, 0).unwrap(), p);
        assert!(crc_check(&[0, 1, 1], 0).unwrap());
    }

    #[test]
    fn unsupported_width() {
        assert!(matches!(crc_attach(&[1], 7), Err(Error::UnsupportedCrc(7))));
    }

    #[test]
    fn crc6_matches_polynomial_division() {
        // payload "1" -> x^6 mod (x^6 + x + 1) = x + 1
        assert_eq!(Crc::CRC6.remainder(&[1]), vec![0, 0, 0, 0, 1, 1]);
        // payload "10" -> x^7 mod g = x^2 + x
        assert_eq!(Crc::CRC6.remainder(&[1, 0]), vec![0, 0, 0, 1, 1, 0]);
    }

    #[test]
    fn single_bit_flips_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in [6usize, 10, 16] {
            for _ in 0..10_000 {
                let len = rng.gen_range(0..40);
                let payload: Vec<u8> = (0..len).map(|_| rng.gen_range(0..2)).collect();
                let word = crc_attach(&payload, w).unwrap();
                assert!(crc_check(&word, w).unwrap());
                let mut bad = word.clone();
                let pos = rng.gen_range(0..bad.len());
                bad[pos] ^= 1;
                assert!(!crc_check(&bad, w).unwrap(), "width {w} missed flip at {pos}");
            }
        }
    }

    #[test]
    fn exhaustive_single_flip_short_payloads() {
        for w in [6usize, 10] {
            for len in 0..=8usize {
                for v in 0u32..(1 << len) {
                    let payload: Vec<u8> = (0..len).map(|i| ((v >> i) & 1) as u8).collect();
                    let word = crc_attach(&payload, w).unwrap();
                    for pos in 0..word.len() {
                        let mut bad = word.clone();
                        bad[pos] ^= 1;
                        assert!(!crc_check(&bad, w).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn linear_in_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2)).collect();
            let b: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ra = Crc::CRC10.remainder(&a);
            let rb = Crc::CRC10.remainder(&b);
            let rab: Vec<u8> = ra.iter().zip(&rb).map(|(x, y)| x ^ y).collect();
            assert_eq!(Crc::CRC10.remainder(&ab), rab);
        }
    }
}
