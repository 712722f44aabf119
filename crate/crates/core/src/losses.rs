//! Loss terms: contextual similarity and the context vector loss, the
//! least-squares adversarial terms over discriminator maps, the masked pixel
//! reconstruction loss, and their weighted composition.
//!
//! Everything here is evaluated in `f64` with hand-derived gradients. The
//! trainer converts network activations in and gradients back out.

use crate::backbone::ContextVectorField;
use crate::error::{Error, Result};
use crate::networks::DiscriminatorMap;
use crate::tensor::Tensor;
use crate::types::{ImageTensor, LossBreakdown, LossWeights, Mask};

/// Norm below which a centered feature vector counts as degenerate.
const ZERO_NORM: f64 = 1e-10;
/// Cosine distance assigned to any pair involving a degenerate vector.
const MAX_COSINE_DISTANCE: f64 = 2.0;

/// A set of `count` feature vectors of length `dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    count: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn new(count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::Loss("feature set must be non-empty".into()));
        }
        if data.len() != count * dim {
            return Err(Error::dims(format!("{count}x{dim} features"), data.len()));
        }
        Ok(Self { count, dim, data })
    }

    /// One vector per spatial position of a `[C,H,W]` map.
    pub fn from_map(map: &Tensor) -> Self {
        Self::from_map_where(map, None).expect("maps are non-empty")
    }

    /// Like [`from_map`](Self::from_map), keeping only positions whose `keep`
    /// flag is set.
    pub fn from_map_where(map: &Tensor, keep: Option<&[bool]>) -> Result<Self> {
        let (c, h, w) = map.chw();
        let hw = h * w;
        if let Some(k) = keep {
            if k.len() != hw {
                return Err(Error::dims(format!("{hw} keep flags"), k.len()));
            }
        }
        let positions: Vec<usize> = (0..hw).filter(|p| keep.is_none_or(|k| k[*p])).collect();
        let mut data = Vec::with_capacity(positions.len() * c);
        let md = map.data();
        for &p in &positions {
            data.extend((0..c).map(|ch| md[ch * hw + p] as f64));
        }
        Self::new(positions.len(), c, data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Scatters a per-vector gradient (as from [`FeatureSet::from_map`]) back to
/// a `[C,H,W]` tensor.
pub fn grad_to_map(grad: &[f64], shape: &[usize]) -> Tensor {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let hw = h * w;
    let mut out = vec![0.0f32; c * hw];
    for p in 0..hw {
        for ch in 0..c {
            out[ch * hw + p] = grad[p * c + ch] as f32;
        }
    }
    Tensor::new(shape.to_vec(), out)
}

/// Kernel parameters of the contextual similarity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CxParams {
    pub bandwidth: f64,
    pub epsilon: f64,
}

impl Default for CxParams {
    fn default() -> Self {
        Self {
            bandwidth: 0.5,
            epsilon: 1e-5,
        }
    }
}

impl CxParams {
    fn check(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Loss(format!("bandwidth {} must be > 0", self.bandwidth)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Loss(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }
}

/// Unit vectors after subtracting `mean`; degenerate rows are left zero and
/// flagged.
fn center_normalize(set: &FeatureSet, mean: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let d = set.dim;
    let mut unit = vec![0.0; set.count * d];
    let mut norms = vec![0.0; set.count];
    let mut ok = vec![false; set.count];
    for i in 0..set.count {
        let v = set.vector(i);
        let row = &mut unit[i * d..(i + 1) * d];
        for k in 0..d {
            row[k] = v[k] - mean[k];
        }
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        norms[i] = n;
        if n > ZERO_NORM {
            ok[i] = true;
            row.iter_mut().for_each(|x| *x /= n);
        } else {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    (unit, norms, ok)
}

struct CxEval {
    value: f64,
    grad_target: Option<Vec<f64>>,
}

/// Shared forward (and optionally backward for `-log CX`) pass.
fn cx_eval(source: &FeatureSet, target: &FeatureSet, p: CxParams, want_grad: bool) -> Result<CxEval> {
    p.check()?;
    if source.dim != target.dim {
        return Err(Error::Loss(format!(
            "feature dims differ: source {} vs target {}",
            source.dim, target.dim
        )));
    }
    let (n, m, dim) = (source.count, target.count, source.dim);
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (acc, v) in mean.iter_mut().zip(source.vector(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let (xs, _, x_ok) = center_normalize(source, &mean);
    let (ys, y_norm, y_ok) = center_normalize(target, &mean);

    // cos[i*m + j] = <x_i, y_j>
    let mut cos = vec![0.0; n * m];
    // SAFETY: xs is n x dim, ys is m x dim (read transposed), cos is n x m.
    unsafe {
        matrixmultiply::dgemm(
            n, dim, m, 1.0,
            xs.as_ptr(), dim as isize, 1,
            ys.as_ptr(), 1, dim as isize,
            0.0,
            cos.as_mut_ptr(), m as isize, 1,
        );
    }
    // Cosine distances; `live` marks entries that depend on the inputs.
    let mut dist = vec![0.0; n * m];
    let mut live = vec![false; n * m];
    for i in 0..n {
        for j in 0..m {
            let k = i * m + j;
            if x_ok[i] && y_ok[j] {
                let d = 1.0 - cos[k];
                if d > 0.0 {
                    dist[k] = d;
                    live[k] = true;
                }
            } else {
                dist[k] = MAX_COSINE_DISTANCE;
            }
        }
    }

    // Row-wise: normalized distance, softmax over targets.
    let mut cx = vec![0.0; n * m];
    let mut row_min = vec![0.0; n];
    let mut row_argmin = vec![0usize; n];
    for i in 0..n {
        let row = &dist[i * m..(i + 1) * m];
        let (jmin, dmin) = row
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, d)| if *d < acc.1 { (j, *d) } else { acc });
        row_min[i] = dmin;
        row_argmin[i] = jmin;
        let denom = dmin + p.epsilon;
        let logits: Vec<f64> = row.iter().map(|d| (1.0 - d / denom) / p.bandwidth).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut cx[i * m..(i + 1) * m];
        let mut z = 0.0;
        for (o, l) in out.iter_mut().zip(&logits) {
            *o = (l - top).exp();
            z += *o;
        }
        out.iter_mut().for_each(|o| *o /= z);
    }

    // For each target, the best-matching source.
    let mut best = vec![0usize; m];
    let mut total = 0.0;
    for (j, b) in best.iter_mut().enumerate() {
        let mut bi = 0;
        for i in 1..n {
            if cx[i * m + j] > cx[bi * m + j] {
                bi = i;
            }
        }
        *b = bi;
        total += cx[bi * m + j];
    }
    let value = total / m as f64;
    if !want_grad {
        return Ok(CxEval {
            value,
            grad_target: None,
        });
    }

    // d(-log CX)/d CX_ij is nonzero only at each target's best match.
    let g_match = -1.0 / (value * m as f64);
    let mut g_cos = vec![0.0; n * m];
    let mut g_row = vec![0.0; m];
    for i in 0..n {
        g_row.iter_mut().for_each(|g| *g = 0.0);
        let mut any = false;
        for (j, b) in best.iter().enumerate() {
            if *b == i {
                g_row[j] = g_match;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let row_cx = &cx[i * m..(i + 1) * m];
        let dot: f64 = g_row.iter().zip(row_cx).map(|(g, c)| g * c).sum();
        let denom = row_min[i] + p.epsilon;
        let mut g_min = 0.0;
        let mut g_dist = vec![0.0; m];
        for j in 0..m {
            let g_logit = row_cx[j] * (g_row[j] - dot);
            let g_norm_dist = -g_logit / p.bandwidth;
            g_dist[j] += g_norm_dist / denom;
            g_min -= g_norm_dist * dist[i * m + j] / (denom * denom);
        }
        g_dist[row_argmin[i]] += g_min;
        for j in 0..m {
            if live[i * m + j] {
                g_cos[i * m + j] = -g_dist[j];
            }
        }
    }
    // g_unit_y[j] = sum_i g_cos[i,j] * x_i
    let mut g_unit = vec![0.0; m * dim];
    // SAFETY: g_cos read transposed (m x n), xs is n x dim, g_unit is m x dim.
    unsafe {
        matrixmultiply::dgemm(
            m, n, dim, 1.0,
            g_cos.as_ptr(), 1, m as isize,
            xs.as_ptr(), dim as isize, 1,
            0.0,
            g_unit.as_mut_ptr(), dim as isize, 1,
        );
    }
    let mut grad = vec![0.0; m * dim];
    for j in 0..m {
        if !y_ok[j] {
            continue;
        }
        let y = &ys[j * dim..(j + 1) * dim];
        let g = &g_unit[j * dim..(j + 1) * dim];
        let proj: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..dim {
            grad[j * dim + k] = (g[k] - y[k] * proj) / y_norm[j];
        }
    }
    Ok(CxEval {
        value,
        grad_target: Some(grad),
    })
}

/// Contextual similarity of `target` to `source`: for every target vector,
/// the affinity-normalized weight of its best-matching source vector,
/// averaged over targets. Asymmetric; lies in `(0, 1]`.
///
/// Both sets are centered on the source mean before cosine distances are
/// taken. A vector that is zero after centering is treated as maximally
/// distant from everything.
pub fn cx_similarity(source: &FeatureSet, target: &FeatureSet, params: CxParams) -> Result<f64> {
    Ok(cx_eval(source, target, params, false)?.value)
}

/// `-log CX(source, target)` and its gradient with respect to `target`.
pub fn cvl_with_grad(source: &FeatureSet, target: &FeatureSet, params: CxParams) -> Result<(f64, Vec<f64>)> {
    let e = cx_eval(source, target, params, true)?;
    Ok((-e.value.ln(), e.grad_target.expect("requested")))
}

/// Context vector loss summed over `layers`.
pub fn cvl_loss(phi_x: &ContextVectorField, phi_y: &ContextVectorField, layers: &[String], params: CxParams) -> Result<f64> {
    let mut total = 0.0;
    for id in layers {
        let sx = FeatureSet::from_map(phi_x.layer(id)?);
        let sy = FeatureSet::from_map(phi_y.layer(id)?);
        total += -cx_similarity(&sx, &sy, params)?.ln();
    }
    Ok(total)
}

fn check_scales(real: &DiscriminatorMap, fake: &DiscriminatorMap) -> Result<()> {
    if real.maps.len() != fake.maps.len() || real.weights != fake.weights {
        return Err(Error::Loss(format!(
            "scale mismatch: {} real maps vs {} fake maps",
            real.maps.len(),
            fake.maps.len()
        )));
    }
    if real.maps.len() != real.weights.len() {
        return Err(Error::Loss("one weight per scale required".into()));
    }
    Ok(())
}

fn mean_sq_offset(scores: &[f64], target: f64) -> f64 {
    scores.iter().map(|s| (s - target).powi(2)).sum::<f64>() / scores.len() as f64
}

/// Least-squares discriminator objective:
/// `sum_s w_s [mean((real_s - 1)^2) + mean(fake_s^2)]`.
pub fn cal_discriminator_loss(real: &DiscriminatorMap, fake: &DiscriminatorMap) -> Result<f64> {
    check_scales(real, fake)?;
    Ok(real
        .maps
        .iter()
        .zip(&fake.maps)
        .zip(&real.weights)
        .map(|((r, f), w)| w * (mean_sq_offset(&r.scores, 1.0) + mean_sq_offset(&f.scores, 0.0)))
        .sum())
}

/// Per-scale gradients of [`cal_discriminator_loss`] for real and fake maps.
pub fn cal_discriminator_grads(real: &DiscriminatorMap, fake: &DiscriminatorMap) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let loss = cal_discriminator_loss(real, fake)?;
    let grad = |maps: &DiscriminatorMap, target: f64| -> Vec<Vec<f64>> {
        maps.maps
            .iter()
            .zip(&maps.weights)
            .map(|(m, w)| {
                let k = 2.0 * w / m.scores.len() as f64;
                m.scores.iter().map(|s| k * (s - target)).collect()
            })
            .collect()
    };
    Ok((loss, grad(real, 1.0), grad(fake, 0.0)))
}

/// Least-squares generator objective: `sum_s w_s mean((fake_s - 1)^2)`.
pub fn cal_generator_loss(fake: &DiscriminatorMap) -> f64 {
    fake.maps
        .iter()
        .zip(&fake.weights)
        .map(|(m, w)| w * mean_sq_offset(&m.scores, 1.0))
        .sum()
}

pub fn cal_generator_grads(fake: &DiscriminatorMap) -> (f64, Vec<Vec<f64>>) {
    let grads = fake
        .maps
        .iter()
        .zip(&fake.weights)
        .map(|(m, w)| {
            let k = 2.0 * w / m.scores.len() as f64;
            m.scores.iter().map(|s| k * (s - 1.0)).collect()
        })
        .collect();
    (cal_generator_loss(fake), grads)
}

/// Mean squared error between `prediction ⊙ m` and `reference` over all
/// `3·H·W` entries, with its gradient with respect to `prediction`. Both
/// slices are planar `[3,H,W]`; `mask = None` means every pixel is known.
pub fn masked_mse_with_grad(prediction: &[f32], reference: &[f32], mask: Option<&Mask>) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != reference.len() {
        return Err(Error::dims(format!("{} values", reference.len()), prediction.len()));
    }
    let plane = prediction.len() / 3;
    if let Some(m) = mask {
        if m.bits().len() != plane {
            return Err(Error::dims(format!("{plane}-pixel mask"), m.bits().len()));
        }
    }
    let n = prediction.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; prediction.len()];
    for (i, (p, r)) in prediction.iter().zip(reference).enumerate() {
        let known = mask.is_none_or(|m| m.bits()[i % plane] == 1);
        let masked = if known { *p as f64 } else { 0.0 };
        let diff = masked - *r as f64;
        loss += diff * diff;
        if known {
            grad[i] = 2.0 * diff / n;
        }
    }
    Ok((loss / n, grad))
}

/// Reconstruction loss between the generator output and the corrupted input
/// on known pixels.
pub fn rl_loss(generated: &ImageTensor, corrupted: &ImageTensor, mask: &Mask) -> Result<f64> {
    if generated.dims() != corrupted.dims() || generated.dims() != mask.dims() {
        return Err(Error::dims(
            format!("{}x{}", corrupted.height(), corrupted.width()),
            format!(
                "image {}x{}, mask {}x{}",
                generated.height(),
                generated.width(),
                mask.height(),
                mask.width()
            ),
        ));
    }
    Ok(masked_mse_with_grad(generated.as_planar(), corrupted.as_planar(), Some(mask))?.0)
}

/// Component values feeding [`total_loss`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub cal_g: f64,
    pub cal_d: f64,
    pub cvl: f64,
    pub rl: f64,
    pub cyc: f64,
}

/// Composes the weighted objective. `cal_d` is carried for reporting only.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> Result<LossBreakdown> {
    for (name, v) in [
        ("cal_g", c.cal_g),
        ("cal_d", c.cal_d),
        ("cvl", c.cvl),
        ("rl", c.rl),
        ("cyc", c.cyc),
    ] {
        if !v.is_finite() {
            return Err(Error::Loss(format!("component {name} is not finite ({v})")));
        }
    }
    let cfl = w.lambda_cal * c.cal_g + w.lambda_cvl * c.cvl;
    let tl = w.lambda_g * cfl + w.lambda_r * c.rl + w.lambda_cyc * c.cyc;
    Ok(LossBreakdown {
        tl,
        cfl,
        cal_g: c.cal_g,
        cal_d: c.cal_d,
        cvl: c.cvl,
        rl: c.rl,
        cyc: c.cyc,
    })
}

/// Which slot the pixel term of a generator objective fills.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelRole {
    /// Masked reconstruction against the corrupted input.
    Reconstruction,
    /// Cycle consistency against the source image.
    Cycle,
}

/// Everything the generator update differentiates.
pub struct GeneratorObjective<'a> {
    pub weights: &'a LossWeights,
    pub cx: CxParams,
    /// Per-layer pools from the source image.
    pub source_features: &'a [FeatureSet],
    /// Per-layer sets from the generated image, aligned with the sources.
    pub target_features: &'a [FeatureSet],
    /// Discriminator scores of the generated image's context field.
    pub fake_scores: Option<&'a DiscriminatorMap>,
    pub prediction: &'a [f32],
    pub reference: &'a [f32],
    pub mask: Option<&'a Mask>,
    pub pixel_role: PixelRole,
}

/// Gradients of the total loss with respect to each objective input.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveGradients {
    pub target_features: Vec<Vec<f64>>,
    pub fake_scores: Vec<Vec<f64>>,
    pub prediction: Vec<f64>,
}

impl GeneratorObjective<'_> {
    pub fn evaluate(&self, cal_d: f64) -> Result<(LossBreakdown, ObjectiveGradients)> {
        if self.source_features.len() != self.target_features.len() {
            return Err(Error::Loss("source and target layer counts differ".into()));
        }
        let w = self.weights;
        let mut cvl = 0.0;
        let mut g_feat = Vec::with_capacity(self.target_features.len());
        for (s, t) in self.source_features.iter().zip(self.target_features) {
            let (v, g) = cvl_with_grad(s, t, self.cx)?;
            cvl += v;
            let k = w.contextual_weight();
            g_feat.push(g.into_iter().map(|x| x * k).collect());
        }
        let (cal_g, g_scores) = match self.fake_scores {
            Some(f) => {
                let (v, g) = cal_generator_grads(f);
                let k = w.adversarial_weight();
                (v, g.into_iter().map(|m| m.into_iter().map(|x| x * k).collect()).collect())
            }
            None => (0.0, Vec::new()),
        };
        let (pix, g_pix) = masked_mse_with_grad(self.prediction, self.reference, self.mask)?;
        let (rl, cyc, k_pix) = match self.pixel_role {
            PixelRole::Reconstruction => (pix, 0.0, w.lambda_r),
            PixelRole::Cycle => (0.0, pix, w.lambda_cyc),
        };
        let breakdown = total_loss(
            &LossComponents {
                cal_g,
                cal_d,
                cvl,
                rl,
                cyc,
            },
            w,
        )?;
        Ok((
            breakdown,
            ObjectiveGradients {
                target_features: g_feat,
                fake_scores: g_scores,
                prediction: g_pix.into_iter().map(|x| x * k_pix).collect(),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::ScoreMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureSet {
        FeatureSet::new(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn single_vectors_give_unit_similarity() {
        let a = FeatureSet::new(1, 3, vec![0.3, -1.0, 2.0]).unwrap();
        let b = FeatureSet::new(1, 3, vec![5.0, 0.1, -0.2]).unwrap();
        assert_eq!(cx_similarity(&a, &b, CxParams::default()).unwrap(), 1.0);
        let (cvl, _) = cvl_with_grad(&a, &b, CxParams::default()).unwrap();
        assert_eq!(cvl, 0.0);
    }

    #[test]
    fn identical_sets_are_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_set(&mut rng, 8, 16);
        let cx = cx_similarity(&a, &a, CxParams::default()).unwrap();
        assert!(cx >= 0.99, "{cx}");
        assert!(-cx.ln() <= -(0.99f64).ln());
    }

    #[test]
    fn orthogonal_pair_hand_table() {
        // Centered on their mean the two vectors are antipodal, so
        // d = [[0, 2], [2, 0]] and each row's softmax is
        // [1, exp(-2/eps/h)] / (1 + exp(-2/eps/h)).
        let p = CxParams {
            bandwidth: 0.5,
            epsilon: 0.5,
        };
        let s = FeatureSet::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let w_same = ((1.0 - 0.0 / (0.0 + p.epsilon)) / p.bandwidth).exp();
        let w_other = ((1.0 - 2.0 / (0.0 + p.epsilon)) / p.bandwidth).exp();
        let expected = w_same / (w_same + w_other);
        let got = cx_similarity(&s, &s, p).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn similarity_is_asymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_set(&mut rng, 10, 6);
        let b = random_set(&mut rng, 7, 6);
        let p = CxParams::default();
        assert_ne!(cx_similarity(&a, &b, p).unwrap(), cx_similarity(&b, &a, p).unwrap());
    }

    #[test]
    fn degenerate_vectors_are_deterministic() {
        // One source vector sits on the source mean.
        let s = FeatureSet::new(3, 2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
        let t = FeatureSet::new(2, 2, vec![0.0, 0.0, 2.0, 1.0]).unwrap();
        let p = CxParams::default();
        let a = cx_similarity(&s, &t, p).unwrap();
        let b = cx_similarity(&s, &t, p).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a <= 1.0);
        let (_, g) = cvl_with_grad(&s, &t, p).unwrap();
        assert!(g[..2].iter().all(|v| *v == 0.0), "degenerate target has no gradient");
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let a = FeatureSet::new(2, 3, vec![0.0; 6]).unwrap();
        let b = FeatureSet::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(cx_similarity(&a, &b, CxParams::default()).is_err());
        assert!(FeatureSet::new(0, 2, vec![]).is_err());
    }

    fn map(v: f64, n: usize) -> ScoreMap {
        ScoreMap::constant(1, n, v)
    }

    #[test]
    fn lsgan_closed_forms() {
        let ones = DiscriminatorMap::uniform(vec![map(1.0, 4)]);
        let zeros = DiscriminatorMap::uniform(vec![map(0.0, 4)]);
        let halves = DiscriminatorMap::uniform(vec![map(0.5, 4)]);
        assert_eq!(cal_discriminator_loss(&ones, &zeros).unwrap(), 0.0);
        assert_eq!(cal_discriminator_loss(&halves, &halves).unwrap(), 0.5);
        assert_eq!(cal_generator_loss(&ones), 0.0);
        assert_eq!(cal_generator_loss(&zeros), 1.0);
        assert_eq!(cal_generator_loss(&halves), 0.25);
        let real = DiscriminatorMap::uniform(vec![map(1.0, 4), map(0.0, 2)]);
        let fake = DiscriminatorMap::uniform(vec![map(0.0, 4), map(1.0, 2)]);
        assert_eq!(cal_discriminator_loss(&real, &fake).unwrap(), 1.0);
        let single = DiscriminatorMap::uniform(vec![map(0.0, 4)]);
        assert!(cal_discriminator_loss(&real, &single).is_err());
    }

    #[test]
    fn rl_closed_forms() {
        let ones = ImageTensor::constant(4, 4, 1.0).unwrap();
        let zeros = ImageTensor::constant(4, 4, 0.0).unwrap();
        let full = Mask::ones(4, 4);
        assert_eq!(rl_loss(&ones, &ones, &full).unwrap(), 0.0);
        assert_eq!(rl_loss(&ones, &zeros, &full).unwrap(), 1.0);
        let quarter: Vec<u8> = (0..16).map(|i| u8::from(i < 4)).collect();
        let quarter = Mask::from_bits(4, 4, quarter, crate::types::MaskKind::File).unwrap();
        assert_eq!(rl_loss(&ones, &zeros, &quarter).unwrap(), 0.25);
        assert!(rl_loss(&ones, &ImageTensor::constant(4, 5, 0.0).unwrap(), &full).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights {
            lambda_g: 0.0,
            lambda_r: 1.0,
            lambda_cal: 0.0,
            lambda_cvl: 0.0,
            lambda_cyc: 1.0,
        };
        let b = total_loss(&LossComponents { rl: 0.3, ..Default::default() }, &w).unwrap();
        assert_eq!(b.tl, 0.3);

        let w = LossWeights {
            lambda_g: 1.0,
            lambda_r: 1.0,
            lambda_cal: 1.0,
            lambda_cvl: 0.1,
            lambda_cyc: 1.0,
        };
        let c = LossComponents {
            cal_g: 0.2,
            cal_d: 0.7,
            cvl: 0.5,
            rl: 0.1,
            cyc: 0.0,
        };
        let b = total_loss(&c, &w).unwrap();
        assert!((b.cfl - 0.25).abs() < 1e-12);
        assert!((b.tl - 0.35).abs() < 1e-12);
        assert_eq!(b.cal_d, 0.7);

        let bad = LossComponents {
            cvl: f64::NAN,
            ..c
        };
        let err = total_loss(&bad, &w).unwrap_err().to_string();
        assert!(err.contains("cvl"), "{err}");
    }

    #[test]
    fn cvl_only_ablation_ignores_scores() {
        let w = LossWeights {
            lambda_cal: 0.0,
            ..LossWeights::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = total_loss(&LossComponents { cal_g: rng.gen(), cvl: 0.4, rl: 0.2, ..Default::default() }, &w).unwrap();
        let b = total_loss(&LossComponents { cal_g: rng.gen(), cvl: 0.4, rl: 0.2, ..Default::default() }, &w).unwrap();
        assert_eq!(a.tl, b.tl);
    }
}
