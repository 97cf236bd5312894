use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::kernels::{self, broadcast_shapes, gemm, BroadcastMap};
use crate::tensor::{RngState, Tensor};

pub type NodeId = usize;

/// Handle to a value produced on a [`Graph`].
///
/// `id` is `None` for constants and for every value computed on a graph with
/// gradients disabled; such values never receive gradients.
#[derive(Clone, Debug)]
pub struct Var {
    value: Rc<Tensor>,
    id: Option<NodeId>,
}

impl Var {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn id(&self) -> Option<NodeId> {
        self.id
    }

    pub fn requires_grad(&self) -> bool {
        self.id.is_some()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Rc<Tensor>,
        b: Rc<Tensor>,
        plan: MatmulPlan,
    },
    Add {
        a_map: BroadcastMap,
        b_map: BroadcastMap,
        a_len: usize,
        b_len: usize,
    },
    Sub {
        a_map: BroadcastMap,
        b_map: BroadcastMap,
        a_len: usize,
        b_len: usize,
    },
    Mul {
        a: Rc<Tensor>,
        b: Rc<Tensor>,
        a_map: BroadcastMap,
        b_map: BroadcastMap,
    },
    Scale(f64),
    Relu {
        out: Rc<Tensor>,
    },
    Softplus {
        x: Rc<Tensor>,
    },
    Dropout {
        mask: Vec<f64>,
    },
    Softmax {
        y: Rc<Tensor>,
    },
    LayerNorm {
        xhat: Vec<f64>,
        rstd: Vec<f64>,
        gamma: Rc<Tensor>,
    },
    Reshape,
    Permute {
        axes: Vec<usize>,
        in_shape: Vec<usize>,
    },
    Sum,
    Mean,
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    inputs: Vec<Option<NodeId>>,
    op: Op,
}

#[derive(Debug)]
struct MatmulPlan {
    m: usize,
    k: usize,
    n: usize,
    batches: usize,
    /// `b` has no batch dims, so all of `a` is one `(batches·m) × k` GEMM.
    flat: bool,
    a_map: BroadcastMap,
    b_map: BroadcastMap,
}

/// Operation record for one forward pass.
///
/// Nodes are appended in construction order, which is a valid topological
/// order; [`Graph::backward`] visits them once each in reverse.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A graph that records nothing; every result is a constant.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.leaf_shared(Rc::new(value), requires_grad)
    }

    /// Like [`Graph::leaf`] but without copying a tensor the caller keeps.
    pub fn leaf_shared(&mut self, value: Rc<Tensor>, requires_grad: bool) -> Var {
        if requires_grad && self.grad_enabled {
            let id = self.push(value.shape().to_vec(), Vec::new(), Op::Leaf);
            Var { value, id: Some(id) }
        } else {
            Var { value, id: None }
        }
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, shape: Vec<usize>, inputs: Vec<Option<NodeId>>, op: Op) -> NodeId {
        self.nodes.push(Node { shape, inputs, op });
        self.nodes.len() - 1
    }

    fn record(&mut self, value: Tensor, inputs: &[&Var], op: impl FnOnce() -> Op) -> Var {
        self.record_shared(Rc::new(value), inputs, op)
    }

    fn record_shared(&mut self, value: Rc<Tensor>, inputs: &[&Var], op: impl FnOnce() -> Op) -> Var {
        let tracked = self.grad_enabled && inputs.iter().any(|v| v.id.is_some());
        let id = if tracked {
            let ids = inputs.iter().map(|v| v.id).collect();
            Some(self.push(value.shape().to_vec(), ids, op()))
        } else {
            None
        };
        Var { value, id }
    }

    /// Batched matrix product `[.., m, k] × [.., k, n] → [.., m, n]`; leading
    /// batch extents broadcast.
    pub fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let (sa, sb) = (a.shape(), b.shape());
        let mismatch = || {
            Error::Dimension(format!("matmul shapes {sa:?} and {sb:?} are incompatible"))
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != k2 {
            return Err(mismatch());
        }
        let (ba, bb) = (&sa[..sa.len() - 2], &sb[..sb.len() - 2]);
        let batch_shape = broadcast_shapes(ba, bb).ok_or_else(mismatch)?;
        let batches: usize = batch_shape.iter().product();
        let flat = bb.iter().all(|&d| d == 1) && ba == batch_shape.as_slice();
        let plan = MatmulPlan {
            m,
            k,
            n,
            batches,
            flat,
            a_map: BroadcastMap::new(ba, &batch_shape),
            b_map: BroadcastMap::new(bb, &batch_shape),
        };

        let mut out = vec![0.0; batches * m * n];
        let (ad, bd) = (a.data(), b.data());
        if plan.flat {
            gemm(batches * m, k, n, ad, false, bd, false, &mut out, 0.0);
        } else {
            for i in 0..batches {
                let ai = plan.a_map.index(i) * m * k;
                let bi = plan.b_map.index(i) * k * n;
                gemm(
                    m,
                    k,
                    n,
                    &ad[ai..ai + m * k],
                    false,
                    &bd[bi..bi + k * n],
                    false,
                    &mut out[i * m * n..(i + 1) * m * n],
                    0.0,
                );
            }
        }
        let mut shape = batch_shape;
        shape.extend([m, n]);
        let value = Tensor::from_parts(shape, out);
        Ok(self.record(value, &[a, b], || Op::MatMul {
            a: a.value.clone(),
            b: b.value.clone(),
            plan,
        }))
    }

    fn binary_maps(&self, a: &Var, b: &Var, what: &str) -> Result<(Vec<usize>, BroadcastMap, BroadcastMap)> {
        let shape = broadcast_shapes(a.shape(), b.shape()).ok_or_else(|| {
            Error::Dimension(format!(
                "{what}: shapes {:?} and {:?} do not broadcast",
                a.shape(),
                b.shape()
            ))
        })?;
        let a_map = BroadcastMap::new(a.shape(), &shape);
        let b_map = BroadcastMap::new(b.shape(), &shape);
        Ok((shape, a_map, b_map))
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let (shape, a_map, b_map) = self.binary_maps(a, b, "add")?;
        let numel: usize = shape.iter().product();
        let (ad, bd) = (a.data(), b.data());
        let data = (0..numel)
            .map(|i| ad[a_map.index(i)] + bd[b_map.index(i)])
            .collect();
        let (a_len, b_len) = (ad.len(), bd.len());
        Ok(self.record(Tensor::from_parts(shape, data), &[a, b], || Op::Add {
            a_map,
            b_map,
            a_len,
            b_len,
        }))
    }

    /// Elementwise difference with broadcasting.
    pub fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let (shape, a_map, b_map) = self.binary_maps(a, b, "sub")?;
        let numel: usize = shape.iter().product();
        let (ad, bd) = (a.data(), b.data());
        let data = (0..numel)
            .map(|i| ad[a_map.index(i)] - bd[b_map.index(i)])
            .collect();
        let (a_len, b_len) = (ad.len(), bd.len());
        Ok(self.record(Tensor::from_parts(shape, data), &[a, b], || Op::Sub {
            a_map,
            b_map,
            a_len,
            b_len,
        }))
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let (shape, a_map, b_map) = self.binary_maps(a, b, "mul")?;
        let numel: usize = shape.iter().product();
        let (ad, bd) = (a.data(), b.data());
        let data = (0..numel)
            .map(|i| ad[a_map.index(i)] * bd[b_map.index(i)])
            .collect();
        Ok(self.record(Tensor::from_parts(shape, data), &[a, b], || Op::Mul {
            a: a.value.clone(),
            b: b.value.clone(),
            a_map,
            b_map,
        }))
    }

    pub fn scale(&mut self, a: &Var, c: f64) -> Var {
        let data = a.data().iter().map(|v| v * c).collect();
        let value = Tensor::from_parts(a.shape().to_vec(), data);
        self.record(value, &[a], || Op::Scale(c))
    }

    pub fn relu(&mut self, a: &Var) -> Var {
        let data = a.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Rc::new(Tensor::from_parts(a.shape().to_vec(), data));
        let out = value.clone();
        let var = self.record((*value).clone(), &[a], || Op::Relu { out });
        var
    }

    /// `ln(1 + eˣ)`, evaluated without overflow for large `x`.
    pub fn softplus(&mut self, a: &Var) -> Var {
        let data = a.data().iter().map(|&x| softplus(x)).collect();
        let value = Tensor::from_parts(a.shape().to_vec(), data);
        self.record(value, &[a], || Op::Softplus { x: a.value.clone() })
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; otherwise the
    /// input is returned unchanged.
    pub fn dropout(&mut self, a: &Var, p: f64, rng: &mut RngState, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(a.clone());
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..a.value.len())
            .map(|_| if rng.uniform(0.0, 1.0) < p { 0.0 } else { keep })
            .collect();
        let data = a.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::from_parts(a.shape().to_vec(), data);
        Ok(self.record(value, &[a], || Op::Dropout { mask }))
    }

    /// Softmax over the last axis with max subtraction.
    pub fn softmax_lastdim(&mut self, a: &Var) -> Result<Var> {
        let d = *a
            .shape()
            .last()
            .ok_or_else(|| Error::Dimension("softmax of a scalar".into()))?;
        let mut data = a.data().to_vec();
        for row in data.chunks_exact_mut(d) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            let inv = 1.0 / sum;
            row.iter_mut().for_each(|v| *v *= inv);
        }
        let value = Rc::new(Tensor::from_parts(a.shape().to_vec(), data));
        let y = value.clone();
        Ok(self.record_shared(value, &[a], || Op::Softmax { y }))
    }

    /// Layer normalization over the last axis followed by `gamma·x̂ + beta`.
    pub fn layer_norm(&mut self, x: &Var, gamma: &Var, beta: &Var, eps: f64) -> Result<Var> {
        let d = *x
            .shape()
            .last()
            .ok_or_else(|| Error::Dimension("layer_norm of a scalar".into()))?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(Error::Dimension(format!(
                "layer_norm over width {d} got gamma {:?}, beta {:?}",
                gamma.shape(),
                beta.shape()
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("layer_norm eps must be positive, got {eps}")));
        }
        let rows = x.value.len() / d;
        let (g, b) = (gamma.data(), beta.data());
        let mut xhat = Vec::with_capacity(x.value.len());
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(x.value.len());
        for row in x.data().chunks_exact(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd.push(r);
            for (j, v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let value = Tensor::from_parts(x.shape().to_vec(), out);
        let gamma_v = gamma.value.clone();
        Ok(self.record(value, &[x, gamma, beta], || Op::LayerNorm {
            xhat,
            rstd,
            gamma: gamma_v,
        }))
    }

    pub fn reshape(&mut self, a: &Var, shape: &[usize]) -> Result<Var> {
        let value = (*a.value).clone().reshape(shape).map_err(|_| {
            Error::Dimension(format!("cannot reshape {:?} into {shape:?}", a.shape()))
        })?;
        Ok(self.record(value, &[a], || Op::Reshape))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, a: &Var, axes: &[usize]) -> Result<Var> {
        let nd = a.shape().len();
        let mut seen = vec![false; nd];
        let valid = axes.len() == nd
            && axes.iter().all(|&ax| ax < nd && !std::mem::replace(&mut seen[ax], true));
        if !valid {
            return Err(Error::Dimension(format!(
                "axes {axes:?} are not a permutation for shape {:?}",
                a.shape()
            )));
        }
        let data = kernels::permute(a.data(), a.shape(), axes);
        let shape = kernels::permuted_shape(a.shape(), axes);
        let in_shape = a.shape().to_vec();
        Ok(self.record(Tensor::from_parts(shape, data), &[a], || Op::Permute {
            axes: axes.to_vec(),
            in_shape,
        }))
    }

    pub fn sum(&mut self, a: &Var) -> Var {
        let s = a.data().iter().sum();
        self.record(Tensor::scalar(s), &[a], || Op::Sum)
    }

    pub fn mean(&mut self, a: &Var) -> Var {
        let s = a.data().iter().sum::<f64>() / a.value.len() as f64;
        self.record(Tensor::scalar(s), &[a], || Op::Mean)
    }

    /// Gradients of the scalar `loss` with respect to every tracked leaf.
    pub fn backward(&self, loss: &Var) -> Result<Gradients> {
        if loss.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let Some(root) = loss.id else {
            return Ok(Gradients { grads });
        };
        grads[root] = Some(vec![1.0]);
        for id in (0..=root).rev() {
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            let input_grads = self.backward_op(node, &g);
            for (input, ig) in node.inputs.iter().zip(input_grads) {
                let (Some(i), Some(ig)) = (input, ig) else {
                    continue;
                };
                match &mut grads[*i] {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(ig),
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn backward_op(&self, node: &Node, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let want = |i: usize| node.inputs[i].is_some();
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul { a, b, plan } => {
                let MatmulPlan { m, k, n, batches, .. } = *plan;
                let mut da = want(0).then(|| vec![0.0; a.len()]);
                let mut db = want(1).then(|| vec![0.0; b.len()]);
                if plan.flat {
                    if let Some(da) = &mut da {
                        gemm(batches * m, n, k, g, false, b.data(), true, da, 0.0);
                    }
                    if let Some(db) = &mut db {
                        gemm(k, batches * m, n, a.data(), true, g, false, db, 0.0);
                    }
                } else {
                    for i in 0..batches {
                        let ai = plan.a_map.index(i) * m * k;
                        let bi = plan.b_map.index(i) * k * n;
                        let gi = &g[i * m * n..(i + 1) * m * n];
                        if let Some(da) = &mut da {
                            let bs = &b.data()[bi..bi + k * n];
                            gemm(m, n, k, gi, false, bs, true, &mut da[ai..ai + m * k], 1.0);
                        }
                        if let Some(db) = &mut db {
                            let as_ = &a.data()[ai..ai + m * k];
                            gemm(k, m, n, as_, true, gi, false, &mut db[bi..bi + k * n], 1.0);
                        }
                    }
                }
                vec![da, db]
            }
            Op::Add { a_map, b_map, a_len, b_len } => vec![
                want(0).then(|| a_map.reduce(g, *a_len)),
                want(1).then(|| b_map.reduce(g, *b_len)),
            ],
            Op::Sub { a_map, b_map, a_len, b_len } => vec![
                want(0).then(|| a_map.reduce(g, *a_len)),
                want(1).then(|| {
                    let mut r = b_map.reduce(g, *b_len);
                    r.iter_mut().for_each(|v| *v = -*v);
                    r
                }),
            ],
            Op::Mul { a, b, a_map, b_map } => {
                let da = want(0).then(|| {
                    let prod: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * b.data()[b_map.index(i)])
                        .collect();
                    a_map.reduce(&prod, a.len())
                });
                let db = want(1).then(|| {
                    let prod: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * a.data()[a_map.index(i)])
                        .collect();
                    b_map.reduce(&prod, b.len())
                });
                vec![da, db]
            }
            Op::Scale(c) => vec![Some(g.iter().map(|v| v * c).collect())],
            Op::Relu { out } => vec![Some(
                g.iter()
                    .zip(out.data())
                    .map(|(gi, &y)| if y > 0.0 { *gi } else { 0.0 })
                    .collect(),
            )],
            Op::Softplus { x } => vec![Some(
                g.iter()
                    .zip(x.data())
                    .map(|(gi, &xi)| gi * sigmoid(xi))
                    .collect(),
            )],
            Op::Dropout { mask } => vec![Some(g.iter().zip(mask).map(|(a, b)| a * b).collect())],
            Op::Softmax { y } => {
                let d = *node.shape.last().expect("softmax has an axis");
                let mut dx = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks_exact(d).zip(y.data().chunks_exact(d)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    dx.extend(gr.iter().zip(yr).map(|(gi, yi)| yi * (gi - dot)));
                }
                vec![Some(dx)]
            }
            Op::LayerNorm { xhat, rstd, gamma } => {
                let d = gamma.len();
                let gm = gamma.data();
                let mut dx = want(0).then(|| Vec::with_capacity(g.len()));
                let mut dgamma = want(1).then(|| vec![0.0; d]);
                let mut dbeta = want(2).then(|| vec![0.0; d]);
                for (r, (gr, hr)) in g.chunks_exact(d).zip(xhat.chunks_exact(d)).enumerate() {
                    if let Some(dg) = &mut dgamma {
                        for j in 0..d {
                            dg[j] += gr[j] * hr[j];
                        }
                    }
                    if let Some(db) = &mut dbeta {
                        for j in 0..d {
                            db[j] += gr[j];
                        }
                    }
                    if let Some(dx) = &mut dx {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..d {
                            let dh = gr[j] * gm[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[j];
                        }
                        mean_dh /= d as f64;
                        mean_dh_h /= d as f64;
                        for j in 0..d {
                            let dh = gr[j] * gm[j];
                            dx.push(rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h));
                        }
                    }
                }
                vec![dx, dgamma, dbeta]
            }
            Op::Reshape => vec![Some(g.to_vec())],
            Op::Permute { axes, in_shape } => {
                let out_shape = kernels::permuted_shape(in_shape, axes);
                let inv = kernels::inverse_axes(axes);
                vec![Some(kernels::permute(g, &out_shape, &inv))]
            }
            Op::Sum => {
                let n = self.input_len(node, 0);
                vec![Some(vec![g[0]; n])]
            }
            Op::Mean => {
                let n = self.input_len(node, 0);
                vec![Some(vec![g[0] / n as f64; n])]
            }
        }
    }

    fn input_len(&self, node: &Node, i: usize) -> usize {
        let id = node.inputs[i].expect("tracked input");
        self.nodes[id].shape.iter().product()
    }
}

/// Leaf gradients from one [`Graph::backward`] call.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros when `var` did not influence
    /// the loss or is not tracked.
    pub fn get(&self, var: &Var) -> Tensor {
        match var.id.and_then(|id| self.grads.get(id)).and_then(|g| g.as_ref()) {
            Some(g) => Tensor::from_parts(var.shape().to_vec(), g.clone()),
            None => Tensor::zeros(var.shape()),
        }
    }

    /// Moves the gradient out without copying.
    pub fn take(&mut self, var: &Var) -> Tensor {
        match var.id.and_then(|id| self.grads.get_mut(id)).and_then(|g| g.take()) {
            Some(g) => Tensor::from_parts(var.shape().to_vec(), g),
            None => Tensor::zeros(var.shape()),
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
