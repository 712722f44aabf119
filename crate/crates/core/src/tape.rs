//! Reverse-mode differentiation over a linear tape of tensor operations.
//!
//! Nodes are appended in evaluation order, so reverse index order is a valid
//! topological order for the backward sweep. Leaves marked as not requiring
//! gradients (frozen backbone weights, inputs) never receive one, and
//! operations skip the gradient kernels for such operands entirely.

use std::borrow::Cow;

use crate::tensor::{self, Tensor};

pub type NodeId = usize;

const NORM_EPS: f32 = 1e-5;

enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        pad: usize,
    },
    LeakyRelu {
        input: NodeId,
        slope: f32,
    },
    MaxPool2 {
        input: NodeId,
        argmax: Vec<u32>,
    },
    AvgPool2 {
        input: NodeId,
    },
    Resize {
        input: NodeId,
    },
    InstanceNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        normalized: Vec<f32>,
        inv_std: Vec<f32>,
    },
    Sigmoid {
        input: NodeId,
    },
    ChannelAffine {
        input: NodeId,
        scale: Vec<f32>,
    },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id).and_then(Option::take)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    /// Adds an owned leaf.
    pub fn input(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Adds a borrowed leaf (parameters are not copied onto the tape).
    pub fn param(&mut self, value: &'a Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn conv2d(&mut self, input: NodeId, weight: NodeId, bias: Option<NodeId>, stride: usize, pad: usize) -> NodeId {
        let y = tensor::conv2d(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
            pad,
        );
        let rg = self.needs(input) || self.needs(weight) || bias.is_some_and(|b| self.needs(b));
        self.push(
            y,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            },
            rg,
        )
    }

    pub fn leaky_relu(&mut self, input: NodeId, slope: f32) -> NodeId {
        let mut y = self.value(input).clone();
        for v in y.data_mut() {
            if *v < 0.0 {
                *v *= slope;
            }
        }
        let rg = self.needs(input);
        self.push(y, Op::LeakyRelu { input, slope }, rg)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.leaky_relu(input, 0.0)
    }

    pub fn max_pool2(&mut self, input: NodeId) -> NodeId {
        let (y, argmax) = tensor::max_pool2(self.value(input));
        let rg = self.needs(input);
        self.push(y, Op::MaxPool2 { input, argmax }, rg)
    }

    pub fn avg_pool2(&mut self, input: NodeId) -> NodeId {
        let y = tensor::avg_pool2(self.value(input));
        let rg = self.needs(input);
        self.push(y, Op::AvgPool2 { input }, rg)
    }

    /// Nearest-neighbour resize to `(h, w)`; identity when already that size.
    pub fn resize(&mut self, input: NodeId, h: usize, w: usize) -> NodeId {
        let (_, ih, iw) = self.value(input).chw();
        if (ih, iw) == (h, w) {
            return input;
        }
        let y = tensor::resize_nearest(self.value(input), h, w);
        let rg = self.needs(input);
        self.push(y, Op::Resize { input }, rg)
    }

    /// Per-channel spatial standardization followed by a learned affine map.
    pub fn instance_norm(&mut self, input: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let x = self.value(input);
        let (c, h, w) = x.chw();
        let hw = h * w;
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        assert_eq!(g.len(), c);
        assert_eq!(b.len(), c);
        let mut normalized = vec![0.0f32; c * hw];
        let mut inv_std = vec![0.0f32; c];
        let mut y = vec![0.0f32; c * hw];
        for ch in 0..c {
            let plane = &x.data()[ch * hw..(ch + 1) * hw];
            let mean = plane.iter().map(|v| *v as f64).sum::<f64>() / hw as f64;
            let var = plane.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / hw as f64;
            let istd = 1.0 / (var + NORM_EPS as f64).sqrt();
            inv_std[ch] = istd as f32;
            for i in 0..hw {
                let n = ((plane[i] as f64 - mean) * istd) as f32;
                normalized[ch * hw + i] = n;
                y[ch * hw + i] = g[ch] * n + b[ch];
            }
        }
        let rg = self.needs(input) || self.needs(gamma) || self.needs(beta);
        self.push(
            Tensor::new(vec![c, h, w], y),
            Op::InstanceNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            rg,
        )
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let mut y = self.value(input).clone();
        for v in y.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        let rg = self.needs(input);
        self.push(y, Op::Sigmoid { input }, rg)
    }

    /// `y[c] = x[c] * scale[c] + shift[c]` with constant coefficients.
    pub fn channel_affine(&mut self, input: NodeId, scale: &[f32], shift: &[f32]) -> NodeId {
        let mut y = self.value(input).clone();
        let (c, h, w) = y.chw();
        assert_eq!(scale.len(), c);
        assert_eq!(shift.len(), c);
        for (ch, plane) in y.data_mut().chunks_exact_mut(h * w).enumerate() {
            for v in plane {
                *v = *v * scale[ch] + shift[ch];
            }
        }
        let rg = self.needs(input);
        self.push(
            y,
            Op::ChannelAffine {
                input,
                scale: scale.to_vec(),
            },
            rg,
        )
    }

    /// Back-propagates the given output gradients through the tape.
    pub fn backward(&self, seeds: Vec<(NodeId, Tensor)>) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, g) in seeds {
            assert_eq!(g.shape(), self.value(id).shape(), "seed gradient shape for node {id}");
            accumulate(&mut grads, id, g);
        }
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[id].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    pad,
                } => {
                    let x = self.value(*input);
                    let w = self.value(*weight);
                    if self.needs(*input) {
                        let dx = tensor::conv2d_grad_input(&dy, w, x.shape(), *stride, *pad);
                        accumulate(&mut grads, *input, dx);
                    }
                    let bias_needs = bias.is_some_and(|b| self.needs(b));
                    if self.needs(*weight) || bias_needs {
                        let (dw, db) = tensor::conv2d_grad_weight(&dy, x, w.shape(), *stride, *pad);
                        if self.needs(*weight) {
                            accumulate(&mut grads, *weight, dw);
                        }
                        if let (Some(b), true) = (bias, bias_needs) {
                            accumulate(&mut grads, *b, db);
                        }
                    }
                }
                Op::LeakyRelu { input, slope } => {
                    let y = &node.value;
                    let mut dx = dy;
                    for (d, v) in dx.data_mut().iter_mut().zip(y.data()) {
                        if *v < 0.0 || (*v == 0.0 && *slope == 0.0) {
                            *d *= slope;
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::MaxPool2 { input, argmax } => {
                    let mut dx = Tensor::zeros(self.value(*input).shape());
                    let d = dx.data_mut();
                    for (g, i) in dy.data().iter().zip(argmax) {
                        d[*i as usize] += g;
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::AvgPool2 { input } => {
                    let dx = tensor::avg_pool2_grad(&dy, self.value(*input).shape());
                    accumulate(&mut grads, *input, dx);
                }
                Op::Resize { input } => {
                    let dx = tensor::resize_nearest_grad(&dy, self.value(*input).shape());
                    accumulate(&mut grads, *input, dx);
                }
                Op::InstanceNorm {
                    input,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                } => {
                    let (c, h, w) = dy.chw();
                    let hw = h * w;
                    let g = self.value(*gamma).data();
                    let mut dgamma = vec![0.0f32; c];
                    let mut dbeta = vec![0.0f32; c];
                    let mut dx = vec![0.0f32; c * hw];
                    for ch in 0..c {
                        let dyc = &dy.data()[ch * hw..(ch + 1) * hw];
                        let nc = &normalized[ch * hw..(ch + 1) * hw];
                        let mut sum_dy = 0.0f64;
                        let mut sum_dyn = 0.0f64;
                        for (d, n) in dyc.iter().zip(nc) {
                            sum_dy += *d as f64;
                            sum_dyn += (*d * *n) as f64;
                        }
                        dgamma[ch] = sum_dyn as f32;
                        dbeta[ch] = sum_dy as f32;
                        let mean_dy = sum_dy / hw as f64;
                        let mean_dyn = sum_dyn / hw as f64;
                        let k = g[ch] as f64 * inv_std[ch] as f64;
                        for i in 0..hw {
                            dx[ch * hw + i] =
                                (k * (dyc[i] as f64 - mean_dy - nc[i] as f64 * mean_dyn)) as f32;
                        }
                    }
                    if self.needs(*input) {
                        accumulate(&mut grads, *input, Tensor::new(vec![c, h, w], dx));
                    }
                    if self.needs(*gamma) {
                        accumulate(&mut grads, *gamma, Tensor::new(vec![c], dgamma));
                    }
                    if self.needs(*beta) {
                        accumulate(&mut grads, *beta, Tensor::new(vec![c], dbeta));
                    }
                }
                Op::Sigmoid { input } => {
                    let mut dx = dy;
                    for (d, s) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *d *= s * (1.0 - s);
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::ChannelAffine { input, scale } => {
                    let mut dx = dy;
                    let (_, h, w) = dx.chw();
                    for (ch, plane) in dx.data_mut().chunks_exact_mut(h * w).enumerate() {
                        for v in plane {
                            *v *= scale[ch];
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(shape: &[usize], seed: u32, scale: f32) -> Tensor {
        let n: usize = shape.iter().product();
        let mut s = seed.wrapping_mul(2654435761).wrapping_add(12345);
        let data = (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 17;
                s ^= s << 5;
                ((s % 10_000) as f32 / 10_000.0 - 0.5) * scale
            })
            .collect();
        Tensor::new(shape.to_vec(), data)
    }

    /// Scalar objective `<f(x), probe>` built by `build`, checked against
    /// central differences on every input entry.
    fn check<F>(x0: &Tensor, build: F, tol: f64)
    where
        F: Fn(&mut Tape<'_>, NodeId) -> NodeId,
    {
        let eval = |x: &Tensor| -> (f64, Option<Tensor>) {
            let mut tape = Tape::new();
            let xi = tape.input(x.clone(), true);
            let out = build(&mut tape, xi);
            let probe = pseudo(tape.value(out).shape(), 99, 2.0);
            let val: f64 = tape
                .value(out)
                .data()
                .iter()
                .zip(probe.data())
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum();
            let mut g = tape.backward(vec![(out, probe)]);
            (val, g.take(xi))
        };
        let (_, grad) = eval(x0);
        let grad = grad.expect("input gradient");
        let eps = 1e-2f32;
        for i in (0..x0.len()).step_by((x0.len() / 23).max(1)) {
            let mut xp = x0.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x0.clone();
            xm.data_mut()[i] -= eps;
            let fd = (eval(&xp).0 - eval(&xm).0) / (2.0 * eps as f64);
            let an = grad.data()[i] as f64;
            assert!(
                (fd - an).abs() <= tol * (1.0 + fd.abs().max(an.abs())),
                "entry {i}: analytic {an} vs numeric {fd}"
            );
        }
    }

    #[test]
    fn conv_chain_gradient() {
        let w = pseudo(&[4, 3, 3, 3], 1, 0.5);
        let b = pseudo(&[4], 2, 0.5);
        let x0 = pseudo(&[3, 6, 6], 3, 1.0);
        check(
            &x0,
            |t, x| {
                let wi = t.input(w.clone(), false);
                let bi = t.input(b.clone(), false);
                let y = t.conv2d(x, wi, Some(bi), 2, 1);
                t.sigmoid(y)
            },
            2e-2,
        );
    }

    #[test]
    fn instance_norm_gradient() {
        let g = pseudo(&[3], 4, 2.0);
        let b = pseudo(&[3], 5, 1.0);
        let x0 = pseudo(&[3, 4, 5], 6, 3.0);
        check(
            &x0,
            |t, x| {
                let gi = t.input(g.clone(), false);
                let bi = t.input(b.clone(), false);
                t.instance_norm(x, gi, bi)
            },
            2e-2,
        );
    }

    #[test]
    fn pooling_and_resize_gradient() {
        let x0 = pseudo(&[2, 6, 6], 7, 1.0);
        check(
            &x0,
            |t, x| {
                let a = t.avg_pool2(x);
                let r = t.resize(a, 5, 7);
                t.leaky_relu(r, 0.2)
            },
            2e-2,
        );
        check(
            &x0,
            |t, x| {
                let s = t.channel_affine(x, &[2.0, -1.0], &[0.5, 0.1]);
                t.max_pool2(s)
            },
            2e-2,
        );
    }

    #[test]
    fn frozen_leaves_get_no_gradient() {
        let w = pseudo(&[2, 1, 3, 3], 8, 1.0);
        let mut tape = Tape::new();
        let x = tape.input(pseudo(&[1, 5, 5], 9, 1.0), true);
        let wi = tape.param(&w, false);
        let y = tape.conv2d(x, wi, None, 1, 1);
        let seed = Tensor::full(tape.value(y).shape(), 1.0);
        let g = tape.backward(vec![(y, seed)]);
        assert!(g.get(wi).is_none());
        assert!(g.get(x).is_some());
    }

    #[test]
    fn parameter_gradients() {
        // d/dw of <conv(x,w), probe> against central differences.
        let x = pseudo(&[2, 5, 5], 10, 1.0);
        let w0 = pseudo(&[3, 2, 3, 3], 11, 0.5);
        let probe = pseudo(&[3, 5, 5], 12, 1.0);
        let eval = |w: &Tensor| -> f64 {
            let y = tensor::conv2d(&x, w, None, 1, 1);
            y.data().iter().zip(probe.data()).map(|(a, b)| (*a * *b) as f64).sum()
        };
        let mut tape = Tape::new();
        let xi = tape.input(x.clone(), false);
        let wi = tape.param(&w0, true);
        let y = tape.conv2d(xi, wi, None, 1, 1);
        let g = tape.backward(vec![(y, probe.clone())]);
        let gw = g.get(wi).unwrap();
        for i in [0usize, 7, 20, 53] {
            let mut p = w0.clone();
            p.data_mut()[i] += 1e-2;
            let mut m = w0.clone();
            m.data_mut()[i] -= 1e-2;
            let fd = (eval(&p) - eval(&m)) / 2e-2;
            assert!((fd - gw.data()[i] as f64).abs() < 1e-2 * (1.0 + fd.abs()));
        }
    }
}
