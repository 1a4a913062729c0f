//! Grayscale images and their block decomposition.

use crate::codec::{BlockCodec, DctBlock, PixelBlock};
use crate::error::{Error, Result};
use crate::transform::BlockShape;

/// An 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Number of whole blocks vertically and horizontally.
    pub fn block_grid(&self, shape: BlockShape) -> (usize, usize) {
        (self.height / shape.rows(), self.width / shape.cols())
    }

    /// The image cropped to a multiple of `shape`, cut into blocks in
    /// row-major block order.
    pub fn blocks(&self, shape: BlockShape) -> Vec<PixelBlock> {
        let (down, across) = self.block_grid(shape);
        let mut out = Vec::with_capacity(down * across);
        for by in 0..down {
            for bx in 0..across {
                let values = (0..shape.rows())
                    .flat_map(|i| {
                        let start = (by * shape.rows() + i) * self.width + bx * shape.cols();
                        self.pixels[start..start + shape.cols()].iter().copied()
                    })
                    .collect();
                out.push(PixelBlock::new(shape, values).expect("block length matches shape"));
            }
        }
        out
    }

    /// Compresses every block of the cropped image.
    pub fn compress(&self, codec: &BlockCodec) -> Result<Vec<DctBlock>> {
        self.blocks(codec.shape())
            .iter()
            .map(|b| codec.compress(b).map(|(c, _)| c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crops_to_whole_blocks() {
        let img = GrayImage::new(256, 256, vec![7; 256 * 256]).unwrap();
        let shape = BlockShape::new(6, 6).unwrap();
        assert_eq!(img.block_grid(shape), (42, 42));
        assert_eq!(img.blocks(shape).len(), 1764);
    }

    #[test]
    fn row_major_block_order() {
        let pixels: Vec<u8> = (0..16).collect();
        let img = GrayImage::new(4, 4, pixels).unwrap();
        let blocks = img.blocks(BlockShape::new(2, 2).unwrap());
        let firsts: Vec<u8> = blocks.iter().map(|b| b.values()[0]).collect();
        assert_eq!(firsts, vec![0, 2, 8, 10]);
        assert_eq!(blocks[1].values(), &[2, 3, 6, 7]);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(GrayImage::new(3, 3, vec![0; 8]).is_err());
    }

    #[test]
    fn small_image_has_no_blocks() {
        let img = GrayImage::new(5, 5, vec![0; 25]).unwrap();
        assert!(img.blocks(BlockShape::new(8, 8).unwrap()).is_empty());
    }
}
