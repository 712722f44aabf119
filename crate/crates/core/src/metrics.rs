//! Image quality metrics: PSNR, SSIM and SSIM restricted to restored pixels.
//!
//! SSIM uses an 11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03
//! and a dynamic range of 1. The map is computed in valid mode (no padding),
//! so entry `(y, x)` is centred on pixel `(y + 5, x + 5)`. Channel maps are
//! averaged.

use crate::error::{Error, Result};
use crate::types::{ImageTensor, Mask};

pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const HALF: usize = SSIM_WINDOW / 2;

fn same_dims(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dims(
            format!("{}x{}", a.height(), a.width()),
            format!("{}x{}", b.height(), b.width()),
        ));
    }
    Ok(())
}

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    same_dims(a, b)?;
    let n = a.as_planar().len() as f64;
    Ok(a.as_planar()
        .iter()
        .zip(b.as_planar())
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB for unit dynamic range, capped at
/// [`PSNR_CAP`].
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - HALF as f64;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Valid-mode separable filtering of an `h x w` plane.
fn filter(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|t| k[t] * plane[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|t| k[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    out
}

/// Channel-averaged SSIM map of size `(H-10) x (W-10)`.
pub fn ssim_map(a: &ImageTensor, b: &ImageTensor) -> Result<(usize, usize, Vec<f64>)> {
    same_dims(a, b)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Metric(format!(
            "{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let k = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut map = vec![0.0; oh * ow];
    let plane = h * w;
    for c in 0..3 {
        let pa: Vec<f64> = a.as_planar()[c * plane..(c + 1) * plane].iter().map(|v| *v as f64).collect();
        let pb: Vec<f64> = b.as_planar()[c * plane..(c + 1) * plane].iter().map(|v| *v as f64).collect();
        let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let mu_a = filter(&pa, h, w, &k);
        let mu_b = filter(&pb, h, w, &k);
        let e_aa = filter(&prod(&pa, &pa), h, w, &k);
        let e_bb = filter(&prod(&pb, &pb), h, w, &k);
        let e_ab = filter(&prod(&pa, &pb), h, w, &k);
        for i in 0..oh * ow {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            map[i] += num / den;
        }
    }
    map.iter_mut().for_each(|v| *v /= 3.0);
    Ok((oh, ow, map))
}

pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    let (_, _, map) = ssim_map(a, b)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// SSIM map averaged over entries centred on missing pixels. Windows near the
/// hole border also see known pixels.
pub fn masked_ssim(a: &ImageTensor, b: &ImageTensor, mask: &Mask) -> Result<f64> {
    if mask.dims() != a.dims() {
        return Err(Error::dims(
            format!("{}x{}", a.height(), a.width()),
            format!("{}x{} mask", mask.height(), mask.width()),
        ));
    }
    let (oh, ow, map) = ssim_map(a, b)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for y in 0..oh {
        for x in 0..ow {
            if !mask.is_known(y + HALF, x + HALF) {
                total += map[y * ow + x];
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Metric("empty evaluation region".into()));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MaskKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_planar(h, w, (0..3 * h * w).map(|_| rng.gen()).collect()).unwrap()
    }

    fn offset(img: &ImageTensor, amp: f32, seed: u64) -> ImageTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = img
            .as_planar()
            .iter()
            .map(|v| v + amp * rng.gen_range(-1.0f32..1.0))
            .collect();
        ImageTensor::from_planar_clamped(img.height(), img.width(), data).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = noise(16, 16, 0);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let zero = ImageTensor::constant(4, 4, 0.0).unwrap();
        let p1 = ImageTensor::constant(4, 4, 0.1).unwrap();
        assert!((psnr(&zero, &p1).unwrap() - 20.0).abs() < 1e-5);
        let mut d = vec![0.0f32; 3 * 100];
        // 30 of 300 entries at 0.1 give MSE 0.001.
        for v in d.iter_mut().take(30) {
            *v = 0.1;
        }
        let b = ImageTensor::from_planar(10, 10, d).unwrap();
        let z = ImageTensor::constant(10, 10, 0.0).unwrap();
        assert!((psnr(&z, &b).unwrap() - 30.0).abs() < 1e-5);
        assert!(psnr(&z, &noise(10, 11, 0)).is_err());
    }

    #[test]
    fn ssim_cases() {
        let a = noise(32, 32, 1);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let zero = ImageTensor::constant(16, 16, 0.0).unwrap();
        let one = ImageTensor::constant(16, 16, 1.0).unwrap();
        let c1 = SSIM_K1 * SSIM_K1;
        let closed = c1 / (1.0 + c1);
        let got = ssim(&zero, &one).unwrap();
        assert!(got < 0.01);
        assert!((got - closed).abs() < 1e-9, "{got} vs {closed}");
        let near = offset(&ImageTensor::constant(32, 32, 0.5).unwrap(), 1e-4, 3);
        assert!(ssim(&ImageTensor::constant(32, 32, 0.5).unwrap(), &near).unwrap() > 0.999);
        assert!(ssim(&noise(10, 20, 0), &noise(10, 20, 1)).is_err());
    }

    #[test]
    fn masked_ssim_cases() {
        let a = noise(32, 32, 4);
        let holes = crate::masking::make_random_mask(32, 32, 30.0, 1).unwrap();
        assert_eq!(masked_ssim(&a, &a, &holes).unwrap(), 1.0);
        let err = masked_ssim(&a, &a, &Mask::ones(32, 32)).unwrap_err().to_string();
        assert!(err.contains("empty evaluation region"));

        // A 20x20 hole; the images differ only farther than the window
        // radius from it.
        let bits: Vec<u8> = (0..64 * 64)
            .map(|p| {
                let (y, x) = (p / 64, p % 64);
                u8::from(!((22..42).contains(&y) && (22..42).contains(&x)))
            })
            .collect();
        let m = Mask::from_bits(64, 64, bits, MaskKind::File).unwrap();
        let base = noise(64, 64, 5);
        let far = noise(64, 64, 6);
        let mut data = base.as_planar().to_vec();
        for c in 0..3 {
            for y in 0..64 {
                for x in 0..64 {
                    let near = (17..47).contains(&y) && (17..47).contains(&x);
                    if !near {
                        data[c * 4096 + y * 64 + x] = far.get(c, y, x);
                    }
                }
            }
        }
        let b = ImageTensor::from_planar(64, 64, data).unwrap();
        assert!(ssim(&base, &b).unwrap() < 0.9);
        assert!((masked_ssim(&base, &b, &m).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn larger_noise_lowers_psnr() {
        let a = noise(32, 32, 7);
        let small = offset(&a, 1e-3, 9);
        let large = offset(&a, 1e-2, 9);
        assert!(psnr(&a, &large).unwrap() <= psnr(&a, &small).unwrap());
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = noise(12, 13, s1);
            let b = noise(12, 13, s2);
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        }
    }
}
