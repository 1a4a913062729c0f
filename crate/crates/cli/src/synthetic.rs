//! Reproducible pseudo-natural grayscale images.
//!
//! An image is `base + contrast * n(x, y) + g . (x, y)` rounded and clamped
//! to `[0, 255]`, where `n` is uniform white noise blurred by a Gaussian of
//! standard deviation `smoothness` pixels and rescaled to unit variance, and
//! `g` is a random gradient whose total swing across the image is at most 60
//! grey levels. The base is drawn uniformly from `[70, 185]` and the
//! contrast log-uniformly from `[1, 40]`, so that images range from nearly
//! flat to strongly textured. With `smoothness` 0 the image is plain uniform noise over
//! `[0, 255]`.

use jpeg_compat::image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable blur with mirrored borders.
fn blur(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
        }
        i as usize
    };
    let mut rows = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            rows[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, w)| w * values[y * width + mirror(x as isize + t as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, w)| w * rows[mirror(y as isize + t as isize - radius, height) * width + x])
                .sum();
        }
    }
    out
}

/// Generates one image. Identical arguments give identical pixels.
pub fn gen_synthetic(seed: u64, width: usize, height: usize, smoothness: f64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = width * height;
    if smoothness <= 0.0 {
        let pixels = (0..len).map(|_| rng.gen::<u8>()).collect();
        return GrayImage::new(width, height, pixels).expect("length matches");
    }
    let noise: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut field = blur(&noise, width, height, smoothness);
    let mean = field.iter().sum::<f64>() / len.max(1) as f64;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len.max(1) as f64;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    field.iter_mut().for_each(|v| *v = (*v - mean) * scale);

    let base = rng.gen_range(70.0..185.0);
    let contrast = rng.gen_range(0.0f64..40f64.ln()).exp();
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let swing = rng.gen_range(0.0..60.0) / width.max(height).max(1) as f64;
    let (gx, gy) = (swing * angle.cos(), swing * angle.sin());
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let pixels = (0..len)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            let v = base + contrast * field[i] + gx * (x - cx) + gy * (y - cy);
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, pixels).expect("length matches")
}
