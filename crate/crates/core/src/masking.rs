//! Task masks and the corruption model `x = I ⊙ m`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::types::{ImageTensor, Mask, MaskKind};

/// Zeroes whole border columns: `round(width*fraction)` in total, split
/// evenly with any odd column going to the right.
pub fn make_outpaint_mask(height: usize, width: usize, fraction: f64) -> Result<Mask> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Mask(format!("fraction out of range: {fraction}")));
    }
    let total = (width as f64 * fraction).round() as usize;
    let left = total / 2;
    let right = total - left;
    if left == 0 || total >= width {
        return Err(Error::Mask(format!(
            "degenerate outpaint mask: fraction {fraction} of width {width} removes {total} columns"
        )));
    }
    let mut bits = vec![1u8; height * width];
    for row in bits.chunks_mut(width) {
        row[..left].fill(0);
        row[width - right..].fill(0);
    }
    Mask::from_bits(height, width, bits, MaskKind::Outpaint)
}

/// Exactly `round(H*W*r/100)` missing pixels at positions drawn without
/// replacement from a generator seeded by `seed`.
pub fn make_random_mask(height: usize, width: usize, r: f64, seed: u64) -> Result<Mask> {
    if !(r > 0.0 && r < 100.0) {
        return Err(Error::Mask(format!("fraction out of range: {r}%")));
    }
    let n = height * width;
    let zeros = ((n as f64) * r / 100.0).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![1u8; n];
    for p in rand::seq::index::sample(&mut rng, n, zeros) {
        bits[p] = 0;
    }
    Mask::from_bits(height, width, bits, MaskKind::Random)
}

/// Reads a raster mask: intensities below 0.5 are missing.
pub fn load_mask(path: &Path, expected: (usize, usize)) -> Result<Mask> {
    let (h, w, values) = io::load_gray(path)?;
    if (h, w) != expected {
        return Err(Error::dims(
            format!("{}x{} mask", expected.0, expected.1),
            format!("{h}x{w} in {}", path.display()),
        ));
    }
    let bits = values.iter().map(|v| u8::from(*v >= 0.5)).collect();
    let mask = Mask::from_bits(h, w, bits, MaskKind::File)?;
    if mask.zero_count() == mask.bits().len() {
        log::warn!("mask {} has no known pixels", path.display());
    }
    Ok(mask)
}

/// File mask combined with random removal by elementwise AND; the resulting
/// zero fraction is whatever the overlap produces.
pub fn make_wordcloud_mask(file_mask: &Mask, r: f64, seed: u64) -> Result<Mask> {
    let random = make_random_mask(file_mask.height(), file_mask.width(), r, seed)?;
    Ok(file_mask.and(&random)?.with_kind(MaskKind::WordcloudFile))
}

fn check_dims(image: &ImageTensor, mask: &Mask) -> Result<()> {
    if image.dims() != mask.dims() {
        return Err(Error::dims(
            format!("{}x{}", image.height(), image.width()),
            format!("{}x{} mask", mask.height(), mask.width()),
        ));
    }
    Ok(())
}

pub fn corrupt(image: &ImageTensor, mask: &Mask) -> Result<ImageTensor> {
    check_dims(image, mask)?;
    let plane = mask.bits().len();
    let data = image
        .as_planar()
        .iter()
        .enumerate()
        .map(|(i, v)| if mask.bits()[i % plane] == 1 { *v } else { 0.0 })
        .collect();
    ImageTensor::from_planar(image.height(), image.width(), data)
}

/// `source ⊙ m + restored ⊙ (1 - m)`.
pub fn composite(restored: &ImageTensor, source: &ImageTensor, mask: &Mask) -> Result<ImageTensor> {
    check_dims(source, mask)?;
    check_dims(restored, mask)?;
    let plane = mask.bits().len();
    let data = source
        .as_planar()
        .iter()
        .zip(restored.as_planar())
        .enumerate()
        .map(|(i, (s, r))| if mask.bits()[i % plane] == 1 { *s } else { *r })
        .collect();
    ImageTensor::from_planar(source.height(), source.width(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noise(h: usize, w: usize, seed: u64) -> ImageTensor {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_planar(h, w, (0..3 * h * w).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn outpaint_wide() {
        let m = make_outpaint_mask(64, 200, 0.2).unwrap();
        for x in 0..200 {
            let expect = (20..180).contains(&x);
            assert!((0..64).all(|y| m.is_known(y, x) == expect), "column {x}");
        }
        assert_eq!(m.zero_count(), 40 * 64);
    }

    #[test]
    fn outpaint_small_and_degenerate() {
        let m = make_outpaint_mask(8, 10, 0.2).unwrap();
        assert_eq!(m.zero_fraction(), 0.2);
        assert!(!m.is_known(3, 0) && !m.is_known(3, 9) && m.is_known(3, 1));
        let err = make_outpaint_mask(64, 64, 0.01).unwrap_err().to_string();
        assert!(err.contains("degenerate outpaint mask"), "{err}");
    }

    #[test]
    fn random_counts_and_seeds() {
        let a = make_random_mask(100, 100, 50.0, 7).unwrap();
        assert_eq!(a.zero_count(), 5000);
        assert_eq!(a, make_random_mask(100, 100, 50.0, 7).unwrap());
        assert_eq!(make_random_mask(10, 10, 90.0, 3).unwrap().zero_count(), 90);
        assert_ne!(
            make_random_mask(32, 32, 50.0, 1).unwrap(),
            make_random_mask(32, 32, 50.0, 2).unwrap()
        );
        assert!(make_random_mask(4, 4, 100.0, 0).is_err());
    }

    #[test]
    fn file_masks() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        io::save_gray(16, 16, &vec![1.0; 256], &white).unwrap();
        assert_eq!(load_mask(&white, (16, 16)).unwrap().zero_count(), 0);
        assert!(load_mask(&white, (16, 17)).is_err());

        let black = dir.path().join("black.png");
        io::save_gray(16, 16, &vec![0.0; 256], &black).unwrap();
        assert_eq!(load_mask(&black, (16, 16)).unwrap().zero_count(), 256);

        // Disc of radius 10 centred in a 64x64 raster.
        let inside = |y: usize, x: usize| {
            let (dy, dx) = (y as f64 - 32.0, x as f64 - 32.0);
            dy * dy + dx * dx <= 100.0
        };
        let values: Vec<f32> = (0..64 * 64)
            .map(|p| if inside(p / 64, p % 64) { 0.0 } else { 1.0 })
            .collect();
        let disc = dir.path().join("disc.png");
        io::save_gray(64, 64, &values, &disc).unwrap();
        let mut expected = 0;
        for y in 0..64 {
            for x in 0..64 {
                expected += usize::from(inside(y, x));
            }
        }
        assert_eq!(load_mask(&disc, (64, 64)).unwrap().zero_count(), expected);
    }

    #[test]
    fn corrupt_cases() {
        let img = noise(6, 10, 0);
        assert_eq!(corrupt(&img, &Mask::ones(6, 10)).unwrap(), img);
        assert!(corrupt(&img, &Mask::zeros(6, 10)).unwrap().as_planar().iter().all(|v| *v == 0.0));
        let half = ImageTensor::constant(6, 10, 0.5).unwrap();
        let m = make_outpaint_mask(6, 10, 0.2).unwrap();
        let out = corrupt(&half, &m).unwrap();
        for c in 0..3 {
            for y in 0..6 {
                for x in 0..10 {
                    let expect = if x == 0 || x == 9 { 0.0 } else { 0.5 };
                    assert_eq!(out.get(c, y, x), expect);
                }
            }
        }
        assert!(corrupt(&img, &Mask::ones(6, 9)).is_err());
    }

    #[test]
    fn composite_cases() {
        let src = noise(4, 4, 1);
        let res = noise(4, 4, 2);
        assert_eq!(composite(&res, &src, &Mask::ones(4, 4)).unwrap(), src);
        assert_eq!(composite(&res, &src, &Mask::zeros(4, 4)).unwrap(), res);
        let bits: Vec<u8> = (0..16).map(|p| ((p / 4 + p % 4) % 2) as u8).collect();
        let checker = Mask::from_bits(4, 4, bits.clone(), MaskKind::File).unwrap();
        let one = ImageTensor::constant(4, 4, 1.0).unwrap();
        let zero = ImageTensor::constant(4, 4, 0.0).unwrap();
        let out = composite(&zero, &one, &checker).unwrap();
        for (i, v) in out.as_planar().iter().enumerate() {
            assert_eq!(*v, bits[i % 16] as f32);
        }
    }

    #[test]
    fn wordcloud_is_intersection() {
        let file = make_outpaint_mask(20, 20, 0.5).unwrap();
        let m = make_wordcloud_mask(&file, 50.0, 4).unwrap();
        let random = make_random_mask(20, 20, 50.0, 4).unwrap();
        for i in 0..400 {
            assert_eq!(m.bits()[i], file.bits()[i] & random.bits()[i]);
        }
        assert_eq!(m.kind(), MaskKind::WordcloudFile);
    }

    proptest! {
        #[test]
        fn random_zero_count_exact(h in 1usize..40, w in 1usize..40, r in 0.5f64..99.5, seed in any::<u64>()) {
            let m = make_random_mask(h, w, r, seed).unwrap();
            prop_assert_eq!(m.zero_count(), ((h * w) as f64 * r / 100.0).round() as usize);
            prop_assert_eq!(m, make_random_mask(h, w, r, seed).unwrap());
        }

        #[test]
        fn corrupt_idempotent_and_composite_keeps_known(seed in any::<u64>(), r in 1.0f64..99.0) {
            let img = noise(8, 8, seed);
            let gen = noise(8, 8, seed ^ 0x55);
            let m = make_random_mask(8, 8, r, seed).unwrap();
            let x = corrupt(&img, &m).unwrap();
            prop_assert_eq!(&corrupt(&x, &m).unwrap(), &x);
            prop_assert_eq!(corrupt(&composite(&gen, &x, &m).unwrap(), &m).unwrap(), x);
        }
    }
}
