use crate::error::Result;
use crate::model::params::ParamStore;
use crate::model::stt::{Bound, Mode};
use crate::tensor::{Graph, RngState, Tensor, Var};

pub(crate) const LN_EPS: f64 = 1e-5;

/// `x·W + b` over the last axis.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: Option<usize>,
}

impl Linear {
    pub fn new(p: &mut ParamStore, name: &str, d_in: usize, d_out: usize, bias: bool, rng: &mut RngState) -> Self {
        let w = p.normal(format!("{name}.w"), &[d_in, d_out], rng);
        let b = bias.then(|| p.push(format!("{name}.b"), Tensor::zeros(&[d_out])));
        Self { w, b }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: &Var) -> Result<Var> {
        let y = g.matmul(x, &p[self.w])?;
        match self.b {
            Some(b) => g.add(&y, &p[b]),
            None => Ok(y),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Norm {
    pub gamma: usize,
    pub beta: usize,
}

impl Norm {
    pub fn new(p: &mut ParamStore, name: &str, d: usize) -> Self {
        Self {
            gamma: p.push(format!("{name}.gamma"), Tensor::ones(&[d])),
            beta: p.push(format!("{name}.beta"), Tensor::zeros(&[d])),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: &Var) -> Result<Var> {
        g.layer_norm(x, &p[self.gamma], &p[self.beta], LN_EPS)
    }
}

/// Multi-head scaled dot-product attention. The per-head query, key and
/// value projections are stored side by side as one `d × d` matrix each.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new(p: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut RngState) -> Self {
        Self {
            q: Linear::new(p, &format!("{name}.q"), d, d, false, rng),
            k: Linear::new(p, &format!("{name}.k"), d, d, false, rng),
            v: Linear::new(p, &format!("{name}.v"), d, d, false, rng),
            o: Linear::new(p, &format!("{name}.o"), d, d, false, rng),
            heads,
        }
    }

    /// `queries: [B, n, d]`, `context: [B, n', d]` → output `[B, n, d]` and
    /// attention probabilities `[B, H, n, n']`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, queries: &Var, context: &Var) -> Result<(Var, Var)> {
        let (b, n, d) = (queries.shape()[0], queries.shape()[1], queries.shape()[2]);
        let nk = context.shape()[1];
        let (h, dh) = (self.heads, d / self.heads);

        let q = self.q.forward(g, p, queries)?;
        let q = g.reshape(&q, &[b, n, h, dh])?;
        let q = g.permute(&q, &[0, 2, 1, 3])?;
        let k = self.k.forward(g, p, context)?;
        let k = g.reshape(&k, &[b, nk, h, dh])?;
        let k = g.permute(&k, &[0, 2, 3, 1])?;
        let v = self.v.forward(g, p, context)?;
        let v = g.reshape(&v, &[b, nk, h, dh])?;
        let v = g.permute(&v, &[0, 2, 1, 3])?;

        let scores = g.matmul(&q, &k)?;
        let scores = g.scale(&scores, 1.0 / (dh as f64).sqrt());
        let probs = g.softmax_lastdim(&scores)?;
        let out = g.matmul(&probs, &v)?;
        let out = g.permute(&out, &[0, 2, 1, 3])?;
        let out = g.reshape(&out, &[b, n, d])?;
        Ok((self.o.forward(g, p, &out)?, probs))
    }
}

/// Pre-norm encoder layer with a `d → d → d` ReLU feed-forward block.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EncoderLayer {
    pub ln1: Norm,
    pub attn: Attention,
    pub ln2: Norm,
    pub ffn1: Linear,
    pub ffn2: Linear,
}

impl EncoderLayer {
    pub fn new(p: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut RngState) -> Self {
        Self {
            ln1: Norm::new(p, &format!("{name}.ln1"), d),
            attn: Attention::new(p, &format!("{name}.attn"), d, heads, rng),
            ln2: Norm::new(p, &format!("{name}.ln2"), d),
            ffn1: Linear::new(p, &format!("{name}.ffn1"), d, d, true, rng),
            ffn2: Linear::new(p, &format!("{name}.ffn2"), d, d, true, rng),
        }
    }

    /// `x: [B, n, d]`, attention over `n`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: &Var, mode: &mut Mode) -> Result<Var> {
        let u = self.ln1.forward(g, p, x)?;
        let (v, _) = self.attn.forward(g, p, &u, &u)?;
        let v = mode.dropout(g, &v)?;
        let x = g.add(x, &v)?;
        let r = self.ln2.forward(g, p, &x)?;
        let f = self.ffn1.forward(g, p, &r)?;
        let f = g.relu(&f);
        let f = self.ffn2.forward(g, p, &f)?;
        let f = mode.dropout(g, &f)?;
        g.add(&x, &f)
    }
}

/// Input projection, optional learned positional table, encoder layers.
#[derive(Clone, Debug)]
pub(crate) struct Stack {
    pub embed: Linear,
    pub pos: usize,
    pub layers: Vec<EncoderLayer>,
}

impl Stack {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: &mut ParamStore,
        name: &str,
        d_in: usize,
        d: usize,
        positions: usize,
        heads: usize,
        layers: usize,
        rng: &mut RngState,
    ) -> Self {
        let embed = Linear::new(p, &format!("{name}.embed"), d_in, d, true, rng);
        let pos = p.normal(format!("{name}.pos"), &[positions, d], rng);
        let layers = (0..layers)
            .map(|l| EncoderLayer::new(p, &format!("{name}.layer{l}"), d, heads, rng))
            .collect();
        Self { embed, pos, layers }
    }

    /// `x: [B, n, d_in]` → `[B, n, d]`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: &Var, mode: &mut Mode) -> Result<Var> {
        let h = self.embed.forward(g, p, x)?;
        let mut h = g.add(&h, &p[self.pos])?;
        for layer in &self.layers {
            h = layer.forward(g, p, &h, mode)?;
        }
        Ok(h)
    }
}
