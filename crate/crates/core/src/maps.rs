//! Chaotic maps on `[0, 1]` and their symbolic dynamics.
//!
//! Three maps are supported: the Bernoulli shift, the tent map and the
//! logistic map. Each one comes with its invariant CDF `F`, a mapper from
//! (semi-infinite) bit sequences to samples and the nested family of
//! quantizers whose cells are the cylinder sets of the symbolic dynamics.
//!
//! Samples along a trajectory are never obtained by iterating the
//! floating-point map: the map acts as a left shift on the itinerary, so
//! `f^j(M(u)) = M(T^j u)` is evaluated directly from the shifted bits using
//! `eval_width` of them.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of bits used when evaluating the mapper on a long sequence.
pub const DEFAULT_EVAL_WIDTH: usize = 20;

/// Largest prefix length representable as an integer bit pattern.
pub const MAX_PATTERN_BITS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Bsm,
    Tent,
    Logistic,
}

impl MapKind {
    pub const ALL: [MapKind; 3] = [MapKind::Bsm, MapKind::Tent, MapKind::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::Bsm => "bsm",
            MapKind::Tent => "tent",
            MapKind::Logistic => "logistic",
        }
    }

    /// Whether the symbolic itinerary orders cells by binary-reflected Gray code.
    fn gray_ordered(self) -> bool {
        !matches!(self, MapKind::Bsm)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsm" | "bernoulli" => Ok(MapKind::Bsm),
            "tent" | "tm" => Ok(MapKind::Tent),
            "logistic" | "lm" => Ok(MapKind::Logistic),
            other => Err(Error::InvalidParameter(format!("unknown map '{other}'"))),
        }
    }
}

/// An ordered sequence of bits, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitPrefix(Vec<u8>);

impl BitPrefix {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(b));
        }
        Ok(BitPrefix(bits))
    }

    /// Builds a prefix of length `q` from an integer whose most significant
    /// of the `q` low bits is the oldest bit.
    pub fn from_pattern(pattern: u64, q: usize) -> Self {
        debug_assert!(q <= MAX_PATTERN_BITS);
        BitPrefix((0..q).map(|k| ((pattern >> (q - 1 - k)) & 1) as u8).collect())
    }

    /// Inverse of [`BitPrefix::from_pattern`].
    pub fn pattern(&self) -> Result<u64> {
        if self.0.len() > MAX_PATTERN_BITS {
            return Err(Error::PrefixTooLong(self.0.len()));
        }
        Ok(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, bit: u8) -> Result<()> {
        if bit > 1 {
            return Err(Error::InvalidBit(bit));
        }
        self.0.push(bit);
        Ok(())
    }

    /// Concatenation `[self | suffix]`.
    pub fn extended(&self, suffix: &[u8]) -> Result<Self> {
        let mut bits = self.0.clone();
        bits.extend_from_slice(suffix);
        BitPrefix::new(bits)
    }

    pub fn complement(&self) -> Self {
        BitPrefix(self.0.iter().map(|&b| 1 - b).collect())
    }
}

impl From<BitPrefix> for Vec<u8> {
    fn from(p: BitPrefix) -> Self {
        p.0
    }
}

/// Binary-reflected Gray decoding of a `q`-bit pattern (MSB first).
#[inline]
pub fn gray_decode(mut v: u64) -> u64 {
    let mut shift = v >> 1;
    while shift != 0 {
        v ^= shift;
        shift >>= 1;
    }
    v
}

#[inline]
pub fn gray_encode(v: u64) -> u64 {
    v ^ (v >> 1)
}

/// A chaotic map with its finite-precision evaluation width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapModel {
    pub kind: MapKind,
    pub eval_width: usize,
}

impl MapModel {
    pub fn new(kind: MapKind) -> Self {
        MapModel { kind, eval_width: DEFAULT_EVAL_WIDTH }
    }

    pub fn with_eval_width(kind: MapKind, eval_width: usize) -> Result<Self> {
        if eval_width == 0 || eval_width > MAX_PATTERN_BITS {
            return Err(Error::InvalidParameter(format!("eval width must be in 1..={MAX_PATTERN_BITS}, got {eval_width}")));
        }
        Ok(MapModel { kind, eval_width })
    }

    /// `F⁻¹(x)`; identity for the uniform-density maps, `cos²(π(1−x)/2)` for
    /// the logistic map (written as `sin²(πx/2)` for accuracy near 0).
    pub fn invariant_cdf_inv(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.cdf_inv_unchecked(x))
    }

    /// `F(z)`, the functional inverse of [`MapModel::invariant_cdf_inv`].
    pub fn forward_cdf(&self, z: f64) -> Result<f64> {
        check_unit(z)?;
        Ok(self.cdf_unchecked(z))
    }

    #[inline]
    pub(crate) fn cdf_inv_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Bsm | MapKind::Tent => x,
            MapKind::Logistic => {
                let s = (FRAC_PI_2 * x).sin();
                s * s
            }
        }
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, z: f64) -> f64 {
        match self.kind {
            MapKind::Bsm | MapKind::Tent => z,
            MapKind::Logistic => z.sqrt().asin() / FRAC_PI_2,
        }
    }

    /// Infimum over `(0, 1)` of the derivative of `F⁻¹`.
    pub fn cdf_inv_min_slope(&self) -> f64 {
        match self.kind {
            MapKind::Bsm | MapKind::Tent => 1.0,
            // (π/2) sin(πx) vanishes at both ends
            MapKind::Logistic => 0.0,
        }
    }

    /// One exact floating-point application of the map.
    pub fn apply(&self, z: f64) -> f64 {
        match self.kind {
            MapKind::Bsm => {
                if z < 0.5 {
                    2.0 * z
                } else {
                    2.0 * z - 1.0
                }
            }
            MapKind::Tent => 1.0 - (2.0 * z - 1.0).abs(),
            MapKind::Logistic => 4.0 * z * (1.0 - z),
        }
    }

    /// `M_f` of the prefix zero-padded to infinity.
    ///
    /// Any continuation of the prefix maps within `2^-q` of this value.
    pub fn map_bits_to_sample(&self, prefix: &BitPrefix) -> f64 {
        self.sample_of_bits(prefix.bits())
    }

    pub(crate) fn sample_of_bits(&self, bits: &[u8]) -> f64 {
        let uniform = match self.kind {
            MapKind::Bsm => bits.iter().rev().fold(0.0, |acc, &b| (acc + f64::from(b)) * 0.5),
            MapKind::Tent | MapKind::Logistic => {
                // Gray-decoded digits; zero padding repeats the last digit forever.
                let mut digits = Vec::with_capacity(bits.len());
                let mut a = 0u8;
                for &b in bits {
                    a ^= b;
                    digits.push(a);
                }
                let tail = f64::from(digits.last().copied().unwrap_or(0));
                digits.iter().rev().fold(tail, |acc, &d| (acc + f64::from(d)) * 0.5)
            }
        };
        self.cdf_inv_unchecked(uniform)
    }

    /// Index `ι ∈ 1..=2^q` of the level-`q` cell containing every
    /// continuation of the prefix.
    pub fn cell_index(&self, prefix: &BitPrefix) -> Result<u64> {
        if prefix.is_empty() {
            return Err(Error::EmptyPrefix);
        }
        Ok(self.cell_index_of_pattern(prefix.pattern()?))
    }

    #[inline]
    pub(crate) fn cell_index_of_pattern(&self, pattern: u64) -> u64 {
        if self.kind.gray_ordered() {
            1 + gray_decode(pattern)
        } else {
            1 + pattern
        }
    }

    #[inline]
    pub(crate) fn pattern_of_cell_index(&self, index: u64) -> u64 {
        if self.kind.gray_ordered() {
            gray_encode(index - 1)
        } else {
            index - 1
        }
    }

    /// Mid-cell representative `F⁻¹((2ι−1)/2^{q+1})`.
    pub fn quantized_level(&self, index: u64, q: usize) -> Result<f64> {
        check_index(index, q)?;
        Ok(self.level_unchecked(index, q))
    }

    #[inline]
    pub(crate) fn level_unchecked(&self, index: u64, q: usize) -> f64 {
        let mid = (2 * index - 1) as f64 / (1u64 << (q + 1)) as f64;
        self.cdf_inv_unchecked(mid)
    }

    pub fn demap_index_to_bits(&self, index: u64, q: usize) -> Result<BitPrefix> {
        check_index(index, q)?;
        Ok(BitPrefix::from_pattern(self.pattern_of_cell_index(index), q))
    }

    /// `f^j(M_f(u))` evaluated from `eval_width` bits of the `j`-shifted sequence.
    pub fn trajectory_sample(&self, u: &BitPrefix, j: usize) -> Result<f64> {
        let need = self.eval_width;
        if j + need > u.len() {
            return Err(Error::InsufficientBits { start: j, need, have: u.len() });
        }
        Ok(self.sample_of_bits(&u.bits()[j..j + need]))
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfUnitInterval(x))
    }
}

fn check_index(index: u64, q: usize) -> Result<()> {
    if q == 0 || q > MAX_PATTERN_BITS {
        return Err(Error::InvalidParameter(format!("quantizer depth {q} out of range")));
    }
    let max = 1u64 << q;
    if index == 0 || index > max {
        return Err(Error::CellIndexOutOfRange { index, max });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prefix(bits: &[u8]) -> BitPrefix {
        BitPrefix::new(bits.to_vec()).unwrap()
    }

    fn model(kind: MapKind) -> MapModel {
        MapModel::new(kind)
    }

    #[test]
    fn cdf_inv_examples() {
        let lm = model(MapKind::Logistic);
        assert_eq!(lm.invariant_cdf_inv(0.0).unwrap(), 0.0);
        assert!((lm.invariant_cdf_inv(0.5).unwrap() - 0.5).abs() < 1e-15);
        let expected = (3.0 * std::f64::consts::PI / 8.0).cos().powi(2);
        assert!((lm.invariant_cdf_inv(0.25).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.146447).abs() < 1e-6);
        assert!(lm.invariant_cdf_inv(1.5).is_err());
        assert!(lm.invariant_cdf_inv(-0.1).is_err());
    }

    #[test]
    fn forward_cdf_examples() {
        let lm = model(MapKind::Logistic);
        let z = (3.0 * std::f64::consts::PI / 8.0).cos().powi(2);
        assert!((lm.forward_cdf(z).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(model(MapKind::Bsm).forward_cdf(0.3).unwrap(), 0.3);
        assert!((lm.forward_cdf(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(lm.forward_cdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_round_trip_on_grid() {
        for kind in MapKind::ALL {
            let m = model(kind);
            let mut prev = 0.0;
            for k in 0..=10_000 {
                let x = k as f64 / 10_000.0;
                let z = m.invariant_cdf_inv(x).unwrap();
                assert!(z >= prev);
                prev = z;
                assert!((m.forward_cdf(z).unwrap() - x).abs() < 1e-12, "{kind} at {x}");
            }
            assert_eq!(m.invariant_cdf_inv(0.0).unwrap(), 0.0);
            assert!((m.invariant_cdf_inv(1.0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mapper_examples() {
        assert_eq!(model(MapKind::Bsm).map_bits_to_sample(&prefix(&[0, 1, 1])), 0.375);
        assert_eq!(model(MapKind::Tent).map_bits_to_sample(&prefix(&[0, 0, 0, 0])), 0.0);
        assert_eq!(model(MapKind::Tent).map_bits_to_sample(&prefix(&[1, 0, 0, 0])), 1.0);
        assert_eq!(model(MapKind::Logistic).map_bits_to_sample(&prefix(&[0, 0, 0])), 0.0);
    }

    /// Partial sums of the alternating-product series for the tent mapper.
    fn tent_series(bits: &[u8], terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut prod = 1.0;
        for l in 0..terms {
            let b = bits.get(l).copied().unwrap_or(0);
            prod *= 2.0 * f64::from(b) - 1.0;
            sum += (-0.5f64).powi(l as i32) * prod;
        }
        0.5 + 0.25 * sum
    }

    #[test]
    fn tent_mapper_matches_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tent = model(MapKind::Tent);
        for _ in 0..1000 {
            let q = rng.random_range(1..=20);
            let bits: Vec<u8> = (0..q).map(|_| rng.random_range(0..2)).collect();
            let series = tent_series(&bits, 60);
            assert!((tent.map_bits_to_sample(&prefix(&bits)) - series).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_index_examples() {
        assert_eq!(model(MapKind::Bsm).cell_index(&prefix(&[1, 0])).unwrap(), 3);
        assert_eq!(model(MapKind::Tent).cell_index(&prefix(&[1, 1])).unwrap(), 3);
        for kind in MapKind::ALL {
            assert_eq!(model(kind).cell_index(&prefix(&[0, 0, 0])).unwrap(), 1);
        }
        assert_eq!(model(MapKind::Bsm).cell_index(&prefix(&[])), Err(Error::EmptyPrefix));
    }

    #[test]
    fn quantized_level_examples() {
        let bsm = model(MapKind::Bsm);
        assert_eq!(bsm.quantized_level(1, 1).unwrap(), 0.25);
        assert_eq!(bsm.quantized_level(2, 1).unwrap(), 0.75);
        let expected = (3.0 * std::f64::consts::PI / 8.0).cos().powi(2);
        let lm = model(MapKind::Logistic).quantized_level(1, 1).unwrap();
        assert!((lm - expected).abs() < 1e-15);
        assert!(bsm.quantized_level(0, 1).is_err());
        assert!(bsm.quantized_level(3, 1).is_err());
    }

    #[test]
    fn demap_examples() {
        assert_eq!(model(MapKind::Bsm).demap_index_to_bits(3, 2).unwrap(), prefix(&[1, 0]));
        assert_eq!(model(MapKind::Tent).demap_index_to_bits(3, 2).unwrap(), prefix(&[1, 1]));
        for kind in MapKind::ALL {
            assert_eq!(model(kind).demap_index_to_bits(1, 3).unwrap(), prefix(&[0, 0, 0]));
        }
        assert!(model(MapKind::Tent).demap_index_to_bits(5, 2).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let alternating = prefix(&(0..100).map(|k| (k % 2) as u8).collect::<Vec<_>>());
        let bsm = model(MapKind::Bsm);
        let tol = 2f64.powi(-20);
        assert!((bsm.trajectory_sample(&alternating, 0).unwrap() - 1.0 / 3.0).abs() <= tol);
        assert!((bsm.trajectory_sample(&alternating, 1).unwrap() - 2.0 / 3.0).abs() <= tol);
        let zeros = prefix(&[0; 64]);
        for kind in MapKind::ALL {
            for j in [0, 10, 44] {
                assert_eq!(model(kind).trajectory_sample(&zeros, j).unwrap(), 0.0);
            }
            assert!(matches!(model(kind).trajectory_sample(&zeros, 45), Err(Error::InsufficientBits { .. })));
        }
    }

    #[test]
    fn round_trip_exhaustive_to_depth_12() {
        for kind in MapKind::ALL {
            let m = model(kind);
            for q in 1..=12usize {
                for pattern in 0..(1u64 << q) {
                    let b = BitPrefix::from_pattern(pattern, q);
                    let idx = m.cell_index(&b).unwrap();
                    assert!((1..=1u64 << q).contains(&idx));
                    assert_eq!(m.demap_index_to_bits(idx, q).unwrap(), b);
                }
            }
        }
    }

    #[test]
    fn cylinder_membership_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in MapKind::ALL {
            let m = model(kind);
            let w = m.eval_width;
            for _ in 0..10_000 {
                let q = rng.random_range(1..=12usize);
                let bits: Vec<u8> = (0..q).map(|_| rng.random_range(0..2)).collect();
                let suffix: Vec<u8> = (0..w).map(|_| rng.random_range(0..2)).collect();
                let b = prefix(&bits);
                let idx = m.cell_index(&b).unwrap();
                let z = m.map_bits_to_sample(&b.extended(&suffix).unwrap());
                let u = m.forward_cdf(z).unwrap();
                let cell = 2f64.powi(-(q as i32));
                let lo = (idx - 1) as f64 * cell;
                let hi = idx as f64 * cell + 2f64.powi(-(w as i32));
                assert!(u >= lo - 1e-12 && u < hi, "{kind}: {bits:?}+{suffix:?} -> {u}, cell {idx}");
            }
        }
    }

    #[test]
    fn refinement_nesting() {
        for kind in MapKind::ALL {
            let m = model(kind);
            for q in 1..=10usize {
                for pattern in 0..(1u64 << q) {
                    let parent = m.cell_index(&BitPrefix::from_pattern(pattern, q)).unwrap();
                    for x in 0..2u64 {
                        let child = m.cell_index(&BitPrefix::from_pattern((pattern << 1) | x, q + 1)).unwrap();
                        // child cell [(c-1)/2^{q+1}, c/2^{q+1}) inside [(p-1)/2^q, p/2^q)
                        assert!(child > 2 * (parent - 1) && child <= 2 * parent);
                    }
                }
            }
        }
    }

    #[test]
    fn shift_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in MapKind::ALL {
            let m = model(kind);
            let tol = 2f64.powi(1 - m.eval_width as i32) + 1e-12;
            for _ in 0..200 {
                let u = prefix(&(0..200).map(|_| rng.random_range(0..2)).collect::<Vec<_>>());
                for j in 0..(200 - m.eval_width - 1) {
                    let now = m.trajectory_sample(&u, j).unwrap();
                    let next = m.trajectory_sample(&u, j + 1).unwrap();
                    // logistic compared in the conjugate (uniform) coordinate
                    let gap = (m.forward_cdf(m.apply(now)).unwrap() - m.forward_cdf(next).unwrap()).abs();
                    assert!(gap <= tol, "{kind} j={j} gap={gap:e} tol={tol:e}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_depths(q in 1usize..=20, raw in any::<u64>(), kind_ix in 0usize..3) {
            let m = model(MapKind::ALL[kind_ix]);
            let b = BitPrefix::from_pattern(raw & ((1 << q) - 1), q);
            let idx = m.cell_index(&b).unwrap();
            prop_assert_eq!(m.demap_index_to_bits(idx, q).unwrap(), b);
        }
    }
}
