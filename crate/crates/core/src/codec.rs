//! Lossy block pipeline: compression to quantized DCT coefficients,
//! decompression, and the spatial / DCT rounding errors.
//!
//! Pixels are level-shifted by 128 before the forward transform and the
//! shift is restored after the inverse transform.

use crate::error::{Error, Result};
use crate::transform::{quantize, round_half_away, BlockShape, DctMatrix, QuantTable, HALF_TIE_TOLERANCE};

pub const LEVEL_SHIFT: f64 = 128.0;

/// Integer luma samples of one block, flattened row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelBlock {
    shape: BlockShape,
    values: Vec<u8>,
}

impl PixelBlock {
    pub fn new(shape: BlockShape, values: Vec<u8>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    /// Builds a block from wider integers, rejecting anything outside `[0, 255]`.
    pub fn from_i32(shape: BlockShape, values: &[i32]) -> Result<Self> {
        let bytes = values
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                u8::try_from(v).map_err(|_| Error::PixelOutOfRange { index, value: v })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(shape, bytes)
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }
}

/// Quantized DCT coefficients of one block together with their table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DctBlock {
    shape: BlockShape,
    coeffs: Vec<i32>,
    quant: QuantTable,
}

impl DctBlock {
    pub fn new(shape: BlockShape, coeffs: Vec<i32>, quant: QuantTable) -> Result<Self> {
        if coeffs.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: coeffs.len(),
            });
        }
        if quant.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                actual: quant.len(),
            });
        }
        Ok(Self {
            shape,
            coeffs,
            quant,
        })
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [i32] {
        &mut self.coeffs
    }

    pub fn quant(&self) -> &QuantTable {
        &self.quant
    }
}

/// Decompressed block before clamping, with its spatial rounding error.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompResult {
    /// Floating decompressed samples, level shift restored.
    pub y: Vec<f64>,
    /// `round_half_away(y)`, not clamped.
    pub rounded: Vec<i32>,
    /// Spatial rounding error `rounded - y`.
    pub e: Vec<f64>,
    /// Whether any rounded sample falls outside `[0, 255]`.
    pub clipped: bool,
}

impl DecompResult {
    /// Rounded samples clamped to the pixel range.
    pub fn clamped(&self) -> Vec<u8> {
        self.rounded.iter().map(|&v| v.clamp(0, 255) as u8).collect()
    }
}

/// DCT-domain rounding error `u = c - d / q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DctError {
    pub u: Vec<f64>,
}

fn check_dct(shape: BlockShape, dct: &DctMatrix) -> Result<()> {
    if dct.shape() != shape {
        return Err(Error::ShapeMismatch(format!(
            "block is {shape}, transform is {}",
            dct.shape()
        )));
    }
    Ok(())
}

/// Scaled DCT coefficients `d / q` of a pixel block.
pub(crate) fn scaled_coefficients(
    pixels: &[f64],
    quant: &QuantTable,
    dct: &DctMatrix,
) -> Vec<f64> {
    dct.forward(pixels)
        .into_iter()
        .enumerate()
        .map(|(k, d)| d / quant.get(k) as f64)
        .collect()
}

/// Quantization error, with snapped ties reported as exactly +-0.5.
fn tie_error(u: f64) -> f64 {
    if (u.abs() - 0.5).abs() < HALF_TIE_TOLERANCE {
        0.5f64.copysign(u)
    } else {
        u
    }
}

pub fn compress(
    x: &PixelBlock,
    quant: &QuantTable,
    dct: &DctMatrix,
) -> Result<(DctBlock, DctError)> {
    check_dct(x.shape, dct)?;
    if quant.len() != x.shape.len() {
        return Err(Error::LengthMismatch {
            expected: x.shape.len(),
            actual: quant.len(),
        });
    }
    let shifted: Vec<f64> = x.values.iter().map(|&p| p as f64 - LEVEL_SHIFT).collect();
    let scaled = scaled_coefficients(&shifted, quant, dct);
    let coeffs: Vec<i32> = scaled.iter().map(|&v| quantize(v) as i32).collect();
    let u = coeffs
        .iter()
        .zip(&scaled)
        .map(|(&c, &v)| tie_error(c as f64 - v))
        .collect();
    Ok((
        DctBlock {
            shape: x.shape,
            coeffs,
            quant: quant.clone(),
        },
        DctError { u },
    ))
}

pub fn decompress(c: &DctBlock, dct: &DctMatrix) -> Result<DecompResult> {
    check_dct(c.shape, dct)?;
    let dequant: Vec<f64> = c
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, &v)| v as f64 * c.quant.get(k) as f64)
        .collect();
    let y: Vec<f64> = dct
        .inverse(&dequant)
        .into_iter()
        .map(|v| v + LEVEL_SHIFT)
        .collect();
    let rounded = y
        .iter()
        .map(|&v| round_half_away(v).map(|r| r as i32))
        .collect::<Result<Vec<_>>>()?;
    let e = rounded.iter().zip(&y).map(|(&r, &v)| r as f64 - v).collect();
    let clipped = rounded.iter().any(|&r| !(0..=255).contains(&r));
    Ok(DecompResult {
        y,
        rounded,
        e,
        clipped,
    })
}

/// Recompresses the clamped decompression of `compress(x)` and reports
/// whether the coefficients are unchanged.
pub fn roundtrip_check(x: &PixelBlock, quant: &QuantTable, dct: &DctMatrix) -> Result<bool> {
    let (c, _) = compress(x, quant, dct)?;
    let spatial = decompress(&c, dct)?;
    let again = PixelBlock::new(x.shape, spatial.clamped())?;
    let (c2, _) = compress(&again, quant, dct)?;
    Ok(c2.coeffs == c.coeffs)
}

/// A DCT matrix and quantization table bundled for repeated use.
#[derive(Debug, Clone)]
pub struct BlockCodec {
    dct: DctMatrix,
    quant: QuantTable,
}

impl BlockCodec {
    pub fn new(dct: DctMatrix, quant: QuantTable) -> Result<Self> {
        if quant.len() != dct.dim() {
            return Err(Error::LengthMismatch {
                expected: dct.dim(),
                actual: quant.len(),
            });
        }
        Ok(Self { dct, quant })
    }

    pub fn qf100(shape: BlockShape) -> Self {
        Self {
            dct: DctMatrix::new(shape),
            quant: QuantTable::qf100(shape),
        }
    }

    pub fn shape(&self) -> BlockShape {
        self.dct.shape()
    }

    pub fn dct(&self) -> &DctMatrix {
        &self.dct
    }

    pub fn quant(&self) -> &QuantTable {
        &self.quant
    }

    pub fn compress(&self, x: &PixelBlock) -> Result<(DctBlock, DctError)> {
        compress(x, &self.quant, &self.dct)
    }

    pub fn decompress(&self, c: &DctBlock) -> Result<DecompResult> {
        decompress(c, &self.dct)
    }
}
