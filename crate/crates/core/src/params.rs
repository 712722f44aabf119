//! Named parameter collections and the adaptive-moment optimizer.

use serde::{Deserialize, Serialize};

use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Ordered, named tensors belonging to one network.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its index.
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Places every tensor on the tape and returns the node ids in order.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>, trainable: bool) -> Vec<NodeId> {
        self.tensors.iter().map(|t| tape.param(t, trainable)).collect()
    }

    /// FNV-1a over names, shapes and value bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in self.iter() {
            feed(name.as_bytes());
            for d in t.shape() {
                feed(&(*d as u64).to_le_bytes());
            }
            for v in t.data() {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }
}

/// Hyper-parameters of the adaptive-moment update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, betas: [f64; 2]) -> Self {
        Self {
            lr,
            beta1: betas[0],
            beta2: betas[1],
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: ParamSet,
    pub v: ParamSet,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// Applies one bias-corrected update. A missing gradient counts as zero.
    pub fn update(&mut self, cfg: &AdamConfig, params: &mut ParamSet, grads: &[Option<Tensor>]) {
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let step_size = (cfg.lr / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let (b1, b2, eps) = (cfg.beta1 as f32, cfg.beta2 as f32, cfg.eps as f32);
        for (i, g) in grads.iter().enumerate() {
            let m = self.m.get_mut(i).data_mut();
            let v = self.v.get_mut(i).data_mut();
            let p = params.get_mut(i).data_mut();
            match g {
                Some(g) => {
                    assert_eq!(g.len(), p.len());
                    for j in 0..p.len() {
                        let gj = g.data()[j];
                        m[j] = b1 * m[j] + (1.0 - b1) * gj;
                        v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                        p[j] -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
                    }
                }
                None => {
                    for j in 0..p.len() {
                        m[j] *= b1;
                        v[j] *= b2;
                        p[j] -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = ParamSet::new();
        p.push("x", Tensor::new(vec![2], vec![3.0, -2.0]));
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::new(0.05, [0.9, 0.999]);
        for _ in 0..2000 {
            let g: Vec<f32> = p.get(0).data().iter().map(|x| 2.0 * x).collect();
            st.update(&cfg, &mut p, &[Some(Tensor::new(vec![2], g))]);
        }
        assert!(p.get(0).data().iter().all(|x| x.abs() < 1e-2), "{:?}", p.get(0).data());
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = ParamSet::new();
        p.push("x", Tensor::new(vec![3], vec![1.0, 2.0, 3.0]));
        let before = p.checksum();
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::new(1e-3, [0.5, 0.999]);
        st.update(&cfg, &mut p, &[Some(Tensor::zeros(&[3]))]);
        st.update(&cfg, &mut p, &[None]);
        assert_eq!(p.checksum(), before);
    }

    #[test]
    fn checksum_sees_single_bit() {
        let mut p = ParamSet::new();
        p.push("x", Tensor::new(vec![2], vec![1.0, 2.0]));
        let a = p.checksum();
        p.get_mut(0).data_mut()[1] = f32::from_bits(2.0f32.to_bits() ^ 1);
        assert_ne!(a, p.checksum());
    }
}
