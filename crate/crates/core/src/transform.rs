//! Orthonormal 2D DCT-II operator for arbitrary block shapes, rounding and
//! quantization tables.
//!
//! Blocks are flattened row-major for both pixel and frequency indices: the
//! pixel `(i, j)` lives at `i * cols + j` and the frequency `(u, v)` at
//! `u * cols + v`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Dimensions `(rows, cols)` of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    rows: usize,
    cols: usize,
}

impl BlockShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Flattened length `rows * cols`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for BlockShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Row `u` of the orthonormal 1D DCT-II of length `n`, evaluated at sample `i`.
fn dct_1d(n: usize, u: usize, i: usize) -> f64 {
    let nf = n as f64;
    let alpha = if u == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
    alpha * (PI * (2 * i + 1) as f64 * u as f64 / (2.0 * nf)).cos()
}

/// The `n x n` matrix of the 1D orthonormal DCT-II, row-major.
pub(crate) fn dct_1d_matrix(n: usize) -> Vec<f64> {
    (0..n * n).map(|k| dct_1d(n, k / n, k % n)).collect()
}

/// The `nm x nm` matrix of the 2D orthonormal DCT-II.
///
/// Row index is the flattened frequency, column index the flattened pixel.
/// The inverse transform is the transpose. Cloning is cheap (shared storage).
#[derive(Debug, Clone, PartialEq)]
pub struct DctMatrix {
    shape: BlockShape,
    entries: Arc<[f64]>,
}

impl DctMatrix {
    pub fn new(shape: BlockShape) -> Self {
        let (n, m) = (shape.rows(), shape.cols());
        let len = shape.len();
        let mut entries = vec![0.0; len * len];
        for u in 0..n {
            for v in 0..m {
                let row = u * m + v;
                for i in 0..n {
                    let cu = dct_1d(n, u, i);
                    for j in 0..m {
                        entries[row * len + i * m + j] = cu * dct_1d(m, v, j);
                    }
                }
            }
        }
        Self {
            shape,
            entries: entries.into(),
        }
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn get(&self, freq: usize, pixel: usize) -> f64 {
        self.entries[freq * self.dim() + pixel]
    }

    /// Row `freq` of the matrix (the basis function of that frequency).
    #[inline]
    pub fn row(&self, freq: usize) -> &[f64] {
        let n = self.dim();
        &self.entries[freq * n..(freq + 1) * n]
    }

    /// `M * v`.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim());
        (0..self.dim())
            .map(|k| self.row(k).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M^T * v`.
    pub fn inverse(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim());
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += a * vk;
            }
        }
        out
    }

    /// Column `pixel` 1-norm weighted by the quantization step of each row:
    /// `sum_k |M[k][pixel]| * q[k]`.
    pub fn weighted_column_norm(&self, pixel: usize, quant: &QuantTable) -> f64 {
        (0..self.dim())
            .map(|k| self.get(k, pixel).abs() * quant.get(k) as f64)
            .sum()
    }
}

/// Builds the DCT operator for `shape`.
pub fn dct_matrix(shape: BlockShape) -> DctMatrix {
    DctMatrix::new(shape)
}

/// Per-frequency quantization steps, flattened like the coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantTable {
    values: Vec<i32>,
}

impl QuantTable {
    pub fn new(values: Vec<i32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("quantization table"));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v < 1) {
            return Err(Error::InvalidQuant { index, value });
        }
        Ok(Self { values })
    }

    /// Table of the given shape, checking the length.
    pub fn for_shape(shape: BlockShape, values: Vec<i32>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        Self::new(values)
    }

    /// The all-ones table used at quality factor 100.
    pub fn qf100(shape: BlockShape) -> Self {
        Self {
            values: vec![1; shape.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> i32 {
        self.values[index]
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn is_unit(&self) -> bool {
        self.values.iter().all(|&q| q == 1)
    }
}

pub fn quant_table_qf100(shape: BlockShape) -> QuantTable {
    QuantTable::qf100(shape)
}

/// Rounds to the nearest integer, moving exact halves away from zero.
pub fn round_half_away(v: f64) -> Result<i64> {
    if !v.is_finite() {
        return Err(Error::NonFinite(v));
    }
    // f64::round already breaks ties away from zero.
    Ok(v.round() as i64)
}

/// Distance from a half-integer below which a scaled coefficient is treated
/// as an exact tie. Double-precision DCT sums carry ~1e-13 of noise, while
/// shapes with rational basis rows (2x2, 4x4, 8x8, ...) produce exact ties
/// routinely.
pub const HALF_TIE_TOLERANCE: f64 = 1e-9;

/// Quantizer rounding used by the codec: like [`round_half_away`] but
/// values within [`HALF_TIE_TOLERANCE`] of a half-integer are treated as that
/// half-integer.
#[inline]
pub(crate) fn quantize(v: f64) -> i64 {
    let floor = v.floor();
    let frac = v - floor;
    if (frac - 0.5).abs() < HALF_TIE_TOLERANCE {
        if floor + 0.5 >= 0.0 {
            floor as i64 + 1
        } else {
            floor as i64
        }
    } else {
        v.round() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_gram_error(m: &DctMatrix) -> f64 {
        let n = m.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = m.row(a).iter().zip(m.row(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn two_point_dct() {
        let m = dct_matrix(BlockShape::new(1, 2).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.get(0, 0) - h).abs() < 1e-15);
        assert!((m.get(0, 1) - h).abs() < 1e-15);
        assert!((m.get(1, 0) - h).abs() < 1e-15);
        assert!((m.get(1, 1) + h).abs() < 1e-15);
    }

    #[test]
    fn dc_entry_8x8() {
        let m = dct_matrix(BlockShape::new(8, 8).unwrap());
        for p in 0..64 {
            assert!((m.get(0, p) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_up_to_8x8() {
        for n in 1..=8 {
            for m in 1..=8 {
                let mat = dct_matrix(BlockShape::new(n, m).unwrap());
                let err = max_gram_error(&mat);
                assert!(err < 1e-12, "{n}x{m}: {err}");
            }
        }
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_away(0.5).unwrap(), 1);
        assert_eq!(round_half_away(-0.5).unwrap(), -1);
        assert_eq!(round_half_away(0.0).unwrap(), 0);
        assert_eq!(round_half_away(2.4999).unwrap(), 2);
        assert!(round_half_away(f64::NAN).is_err());
        assert!(round_half_away(f64::INFINITY).is_err());
    }

    #[test]
    fn quantize_snaps_ties() {
        assert_eq!(quantize(0.5), 1);
        assert_eq!(quantize(0.5 - 1e-12), 1);
        assert_eq!(quantize(-0.5 + 1e-12), -1);
        assert_eq!(quantize(2.5 - 1e-13), 3);
        assert_eq!(quantize(-2.5 + 1e-13), -3);
        assert_eq!(quantize(0.4999), 0);
        assert_eq!(quantize(-1.2), -1);
    }

    #[test]
    fn qf100_tables() {
        let t = quant_table_qf100(BlockShape::new(8, 8).unwrap());
        assert_eq!(t.values(), &[1; 64][..]);
        assert_eq!(quant_table_qf100(BlockShape::new(1, 2).unwrap()).values(), &[1, 1]);
        assert_eq!(quant_table_qf100(BlockShape::new(6, 6).unwrap()).len(), 36);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BlockShape::new(0, 3).is_err());
        assert!(QuantTable::new(vec![1, 0]).is_err());
        let s = BlockShape::new(2, 2).unwrap();
        assert!(QuantTable::for_shape(s, vec![1, 1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn energy_preserved(v in proptest::collection::vec(-300.0f64..300.0, 36)) {
            let m = dct_matrix(BlockShape::new(6, 6).unwrap());
            let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let fwd = m.forward(&v);
            let n0 = norm(&v);
            prop_assert!((norm(&fwd) - n0).abs() <= 1e-9 * n0.max(1.0));
            let back = m.inverse(&fwd);
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn rounding_is_odd(v in -1e6f64..1e6) {
            prop_assert_eq!(round_half_away(-v).unwrap(), -round_half_away(v).unwrap());
        }
    }
}
