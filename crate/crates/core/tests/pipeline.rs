use jpeg_compat::codec::{compress, decompress, roundtrip_check};
use jpeg_compat::detect::{classify_block, classify_image, BlockStatus};
use jpeg_compat::feasibility::{solve_feasibility, DEFAULT_EPS};
use jpeg_compat::image::GrayImage;
use jpeg_compat::transform::dct_matrix;
use jpeg_compat::{BlockCodec, BlockShape, Budget, ConstraintSystem, PixelBlock, QuantTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient plus a sinusoid plus mild noise, clamped to 8 bits.
fn smooth_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> GrayImage {
    let (gx, gy): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (fx, fy, amp): (f64, f64, f64) = (rng.gen_range(0.02..0.3), rng.gen_range(0.02..0.3), rng.gen_range(0.0..60.0));
    let base = rng.gen_range(40.0..215.0);
    let pixels = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x as f64, y as f64)))
        .map(|(x, y)| {
            let v = base + gx * (x - 32.0) + gy * (y - 32.0) + amp * (fx * x).sin() * (fy * y).cos();
            (v + rng.gen_range(-2.0..2.0)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}

#[test]
fn rounding_errors_stay_within_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shapes = [(8, 8), (6, 6), (4, 4), (2, 3), (1, 5)].map(|(r, c)| BlockShape::new(r, c).unwrap());
    let mut blocks = 0;
    for (i, shape) in shapes.iter().cycle().enumerate() {
        if blocks >= 100_000 {
            break;
        }
        let dct = dct_matrix(*shape);
        let quant = QuantTable::qf100(*shape);
        for _ in 0..1000 {
            let px: Vec<u8> = if i % 2 == 0 {
                (0..shape.len()).map(|_| rng.gen()).collect()
            } else {
                let base: i32 = rng.gen_range(0..256);
                (0..shape.len()).map(|_| (base + rng.gen_range(-8..=8)).clamp(0, 255) as u8).collect()
            };
            let x = PixelBlock::new(*shape, px).unwrap();
            let (c, u) = compress(&x, &quant, &dct).unwrap();
            let d = decompress(&c, &dct).unwrap();
            assert!(u.u.iter().all(|v| v.abs() <= 0.5), "{shape}: u = {:?}", u.u);
            assert!(d.e.iter().all(|v| v.abs() <= 0.5), "{shape}: e = {:?}", d.e);
            blocks += 1;
        }
    }
}

/// Recompressing a decompressed block is not idempotent: the rounding error
/// e maps to M e in the DCT domain, which can exceed half a step.
#[test]
fn recompression_can_move_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shape = BlockShape::new(4, 4).unwrap();
    let codec = BlockCodec::qf100(shape);
    let (mut moved, mut ignored) = (0, 0);
    for _ in 0..1000 {
        let x = PixelBlock::new(shape, (0..16).map(|_| rng.gen()).collect()).unwrap();
        if roundtrip_check(&x, codec.quant(), codec.dct()).unwrap() {
            continue;
        }
        moved += 1;
        let (c, _) = codec.compress(&x).unwrap();
        let d = codec.decompress(&c).unwrap();
        if d.clipped {
            continue;
        }
        let report = classify_block(0, &c, codec.dct(), Budget::unlimited()).unwrap();
        assert_ne!(report.status, BlockStatus::Incompatible);
        ignored += (report.status == BlockStatus::Ignored) as usize;
        let system = ConstraintSystem::from_block(&c, codec.dct(), DEFAULT_EPS).unwrap();
        assert!(solve_feasibility(&system, Budget::unlimited()).unwrap().is_feasible());
    }
    assert_eq!((moved, ignored), (547, 1));
}

#[test]
fn smooth_image_recompression_at_six_by_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = BlockShape::new(6, 6).unwrap();
    let (dct, quant) = (dct_matrix(shape), QuantTable::qf100(shape));
    let image = smooth_image(&mut rng, 252, 252);
    let blocks = image.blocks(shape);
    assert_eq!(blocks.len(), 1764);
    let stable = blocks
        .iter()
        .filter(|x| roundtrip_check(x, &quant, &dct).unwrap())
        .count();
    assert_eq!(stable, 307);
}

#[test]
fn cover_blocks_are_never_incompatible() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let shape = BlockShape::new(6, 6).unwrap();
    let codec = BlockCodec::qf100(shape);
    for _ in 0..3 {
        let image = smooth_image(&mut rng, 48, 48);
        let blocks = image.compress(&codec).unwrap();
        let reports = classify_image(&blocks, codec.dct(), Budget::nodes(1_000_000)).unwrap();
        assert!(reports.iter().all(|r| r.status != BlockStatus::Incompatible));
        assert!(reports.iter().filter(|r| r.status == BlockStatus::Feasible).count() > blocks.len() / 2);
    }
}
