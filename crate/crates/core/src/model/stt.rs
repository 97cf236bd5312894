use std::ops::Index;

use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, Variant};
use crate::model::layers::{Attention, Linear, Norm, Stack};
use crate::model::params::ParamStore;
use crate::tensor::{Graph, RngState, Tensor, Var};

/// Parameters placed on one graph, indexed like the model's [`ParamStore`].
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Uses caller-provided vars, which must follow the store's order and
    /// shapes.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl Index<usize> for Bound {
    type Output = Var;

    fn index(&self, i: usize) -> &Var {
        &self.vars[i]
    }
}

/// Dropout behaviour for one forward pass.
pub struct Mode {
    training: bool,
    p: f64,
    rng: RngState,
}

impl Mode {
    /// Dropout disabled.
    pub fn eval() -> Self {
        Self {
            training: false,
            p: 0.0,
            rng: RngState::new(0),
        }
    }

    /// Residual dropout with probability `p`, masks drawn from `rng`.
    pub fn train(p: f64, rng: RngState) -> Self {
        Self {
            training: true,
            p,
            rng,
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub(crate) fn dropout(&mut self, g: &mut Graph, x: &Var) -> Result<Var> {
        g.dropout(x, self.p, &mut self.rng, self.training)
    }
}

#[derive(Clone, Debug)]
struct Fusion {
    kv: Linear,
    kv_norm: Norm,
    attn: Attention,
    out_norm: Norm,
}

#[derive(Clone, Debug)]
pub struct SttModel {
    cfg: ModelConfig,
    variant: Variant,
    params: ParamStore,
    spatial: Option<Stack>,
    /// Temporal-only variant: per-marker `D → d_s` input projection.
    raw_embed: Option<Linear>,
    temporal: Option<Stack>,
    fusion: Option<Fusion>,
    /// Spatial-only variant: per-marker `d_s → d_t` projection before the head.
    adapter: Option<Linear>,
    fc1: Linear,
    fc2: Linear,
}

impl SttModel {
    /// Builds and initialises a model. Weight matrices and positional tables
    /// are drawn from `N(0, 0.02²)`, biases start at zero, layer norms at
    /// identity.
    pub fn new(cfg: &ModelConfig, variant: Variant, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngState::new(seed);
        let mut p = ParamStore::default();
        let c = cfg;
        let use_s = variant != Variant::T;
        let use_t = variant != Variant::S;

        let spatial = use_s.then(|| {
            Stack::new(&mut p, "spatial", c.dims, c.d_s, c.markers, c.heads_s, c.layers_s, &mut rng)
        });
        let raw_embed =
            (!use_s).then(|| Linear::new(&mut p, "temporal.input", c.dims, c.d_s, true, &mut rng));
        let temporal = use_t.then(|| {
            Stack::new(&mut p, "temporal", c.d_s, c.d_t, c.window, c.heads_t, c.layers_t, &mut rng)
        });
        let fusion = (variant == Variant::St).then(|| Fusion {
            kv: Linear::new(&mut p, "fusion.kv", c.d_s, c.d_t, true, &mut rng),
            kv_norm: Norm::new(&mut p, "fusion.kv_norm", c.d_t),
            attn: Attention::new(&mut p, "fusion.attn", c.d_t, c.heads_c, &mut rng),
            out_norm: Norm::new(&mut p, "fusion.out_norm", c.d_t),
        });
        let adapter =
            (variant == Variant::S).then(|| Linear::new(&mut p, "adapter", c.d_s, c.d_t, true, &mut rng));
        let fc1 = Linear::new(&mut p, "head.fc1", c.markers * c.d_t, c.d_f, true, &mut rng);
        let fc2 = Linear::new(&mut p, "head.fc2", c.d_f, c.d_out, true, &mut rng);

        Ok(Self {
            cfg: cfg.clone(),
            variant,
            params: p,
            spatial,
            raw_embed,
            temporal,
            fusion,
            adapter,
            fc1,
            fc2,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Places every parameter on `g` as a leaf.
    pub fn bind(&self, g: &mut Graph, requires_grad: bool) -> Bound {
        let vars = (0..self.params.len())
            .map(|i| g.leaf_shared(self.params.shared(i), requires_grad))
            .collect();
        Bound { vars }
    }

    /// Wraps a flat `W·M·D` window as a constant `[W, M, D]` input.
    pub fn input(&self, g: &mut Graph, window: &[f64]) -> Result<Var> {
        let c = &self.cfg;
        let shape = [c.window, c.markers, c.dims];
        if window.len() != shape.iter().product::<usize>() {
            return Err(Error::Config(format!(
                "window has {} values, model expects W x M x D = {} x {} x {}",
                window.len(),
                c.window,
                c.markers,
                c.dims
            )));
        }
        Ok(g.constant(Tensor::new(shape.to_vec(), window.to_vec())?))
    }

    fn expect_shape(&self, x: &Var, shape: &[usize], what: &str) -> Result<()> {
        if x.shape() != shape {
            return Err(Error::Config(format!(
                "{what} expects shape {shape:?}, got {:?}",
                x.shape()
            )));
        }
        Ok(())
    }

    fn missing(&self, what: &str) -> Error {
        Error::Config(format!("variant {} has no {what}", self.variant))
    }

    /// `[W, M, D]` → `[W, M, d_s]`: embedding plus marker table, then
    /// attention across markers within each frame.
    pub fn spatial_block(&self, g: &mut Graph, p: &Bound, x: &Var, mode: &mut Mode) -> Result<Var> {
        let c = &self.cfg;
        self.expect_shape(x, &[c.window, c.markers, c.dims], "spatial block")?;
        let stack = self.spatial.as_ref().ok_or_else(|| self.missing("spatial stack"))?;
        stack.forward(g, p, x, mode)
    }

    /// `[W, M, d_s]` → `[M, W, d_t]`: embedding plus frame table, then
    /// attention across frames for each marker.
    pub fn temporal_block(&self, g: &mut Graph, p: &Bound, a: &Var, mode: &mut Mode) -> Result<Var> {
        let c = &self.cfg;
        self.expect_shape(a, &[c.window, c.markers, c.d_s], "temporal block")?;
        let stack = self.temporal.as_ref().ok_or_else(|| self.missing("temporal stack"))?;
        let per_marker = g.permute(a, &[1, 0, 2])?;
        stack.forward(g, p, &per_marker, mode)
    }

    /// Temporal features query the normalised spatial features, marker-wise
    /// at each frame. Returns `Ĉ: [W, M, d_t]` and the attention
    /// probabilities `[W, H_c, M, M]`.
    pub fn fuse_cross_attention(
        &self,
        g: &mut Graph,
        p: &Bound,
        a: &Var,
        b: &Var,
        mode: &mut Mode,
    ) -> Result<(Var, Var)> {
        let c = &self.cfg;
        self.expect_shape(a, &[c.window, c.markers, c.d_s], "fusion (spatial input)")?;
        self.expect_shape(b, &[c.markers, c.window, c.d_t], "fusion (temporal input)")?;
        let f = self.fusion.as_ref().ok_or_else(|| self.missing("fusion stage"))?;
        let kv = f.kv.forward(g, p, a)?;
        let kv = f.kv_norm.forward(g, p, &kv)?;
        let q = g.permute(b, &[1, 0, 2])?;
        let (att, probs) = f.attn.forward(g, p, &q, &kv)?;
        let att = mode.dropout(g, &att)?;
        let sum = g.add(&q, &att)?;
        Ok((f.out_norm.forward(g, p, &sum)?, probs))
    }

    /// `[W, M, d_t]` → `[W]`: flatten markers and features per frame, one
    /// hidden ReLU layer, one output per frame, softplus.
    pub fn head(&self, g: &mut Graph, p: &Bound, c_hat: &Var) -> Result<Var> {
        let c = &self.cfg;
        self.expect_shape(c_hat, &[c.window, c.markers, c.d_t], "head")?;
        let flat = g.reshape(c_hat, &[c.window, c.markers * c.d_t])?;
        let h = self.fc1.forward(g, p, &flat)?;
        let h = g.relu(&h);
        let y = self.fc2.forward(g, p, &h)?;
        let y = g.reshape(&y, &[c.window])?;
        Ok(g.softplus(&y))
    }

    /// One window `[W, M, D]` to `W` nonnegative bins.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: &Var, mode: &mut Mode) -> Result<Var> {
        let c = &self.cfg;
        self.expect_shape(x, &[c.window, c.markers, c.dims], "model")?;
        let features = match self.variant {
            Variant::St => {
                let a = self.spatial_block(g, p, x, mode)?;
                let b = self.temporal_block(g, p, &a, mode)?;
                self.fuse_cross_attention(g, p, &a, &b, mode)?.0
            }
            Variant::S => {
                let a = self.spatial_block(g, p, x, mode)?;
                self.adapter.expect("S variant has an adapter").forward(g, p, &a)?
            }
            Variant::T => {
                let a = self.raw_embed.expect("T variant has an input projection").forward(g, p, x)?;
                let b = self.temporal_block(g, p, &a, mode)?;
                g.permute(&b, &[1, 0, 2])?
            }
        };
        self.head(g, p, &features)
    }

    /// Eval-mode prediction for one flat `W·M·D` window.
    pub fn predict(&self, window: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::no_grad();
        let p = self.bind(&mut g, false);
        let x = self.input(&mut g, window)?;
        let y = self.forward(&mut g, &p, &x, &mut Mode::eval())?;
        Ok(y.data().to_vec())
    }
}
