mod common;

use common::{analytic_grads, max_rel_err, numeric_grads, project, rand_tensor};
use mocap_doppler::model::{
    load_checkpoint, save_checkpoint, Bound, ModelConfig, Mode, SttModel, Variant,
};
use mocap_doppler::tensor::{Graph, RngState, Tensor, Var};
use mocap_doppler::Error;
use proptest::prelude::*;
use tempfile::tempdir;

fn tiny() -> ModelConfig {
    ModelConfig {
        markers: 3,
        dims: 3,
        window: 8,
        d_s: 8,
        d_t: 8,
        d_f: 8,
        heads_s: 2,
        heads_t: 2,
        heads_c: 2,
        layers_s: 1,
        layers_t: 1,
        dropout: 0.3,
        d_out: 1,
    }
}

fn small() -> ModelConfig {
    ModelConfig {
        markers: 4,
        dims: 3,
        window: 6,
        d_s: 8,
        d_t: 12,
        d_f: 10,
        heads_s: 2,
        heads_t: 3,
        heads_c: 4,
        layers_s: 2,
        layers_t: 2,
        dropout: 0.1,
        d_out: 1,
    }
}

fn window(cfg: &ModelConfig, seed: u64) -> Tensor {
    rand_tensor(&[cfg.window, cfg.markers, cfg.dims], seed)
}

/// Replaces every parameter with unit-scale random values so gradient
/// checks exercise all paths with non-negligible magnitudes.
fn randomize(model: &mut SttModel, seed: u64) {
    let mut rng = RngState::new(seed);
    for i in 0..model.params().len() {
        let shape = model.params().get(i).shape().to_vec();
        *model.params_mut().get_mut(i) = Tensor::uniform(&shape, -0.6, 0.6, &mut rng);
    }
}

fn eval_blocks(model: &SttModel, x: &Tensor) -> (Tensor, Tensor, Tensor, Tensor, Tensor) {
    let mut g = Graph::no_grad();
    let p = model.bind(&mut g, false);
    let x = g.constant(x.clone());
    let mode = &mut Mode::eval();
    let a = model.spatial_block(&mut g, &p, &x, mode).unwrap();
    let b = model.temporal_block(&mut g, &p, &a, mode).unwrap();
    let (c, probs) = model.fuse_cross_attention(&mut g, &p, &a, &b, mode).unwrap();
    let y = model.head(&mut g, &p, &c).unwrap();
    (
        a.value().clone(),
        b.value().clone(),
        c.value().clone(),
        probs.value().clone(),
        y.value().clone(),
    )
}

#[test]
fn block_shapes() {
    for cfg in [tiny(), small()] {
        let model = SttModel::new(&cfg, Variant::St, 1).unwrap();
        let (a, b, c, probs, y) = eval_blocks(&model, &window(&cfg, 2));
        let (w, m) = (cfg.window, cfg.markers);
        assert_eq!(a.shape(), [w, m, cfg.d_s]);
        assert_eq!(b.shape(), [m, w, cfg.d_t]);
        assert_eq!(c.shape(), [w, m, cfg.d_t]);
        assert_eq!(probs.shape(), [w, cfg.heads_c, m, m]);
        assert_eq!(y.shape(), [w]);
    }
}

fn zero_residual_branches(model: &mut SttModel, stack: &str, layers: usize) {
    for l in 0..layers {
        for name in ["attn.o.w", "ffn2.w", "ffn2.b"] {
            let full = format!("{stack}.layer{l}.{name}");
            let shape = model.params().by_name(&full).unwrap().shape().to_vec();
            model.params_mut().set(&full, Tensor::zeros(&shape)).unwrap();
        }
    }
}

/// `x·W + b + E` computed with plain loops.
fn embed_oracle(x: &[f64], rows: usize, positions: usize, d_in: usize, w: &Tensor, b: &Tensor, e: &Tensor) -> Vec<f64> {
    let d = b.len();
    let mut out = vec![0.0; rows * positions * d];
    for r in 0..rows {
        for n in 0..positions {
            for j in 0..d {
                let mut acc = b.data()[j] + e.data()[n * d + j];
                for i in 0..d_in {
                    acc += x[(r * positions + n) * d_in + i] * w.data()[i * d + j];
                }
                out[(r * positions + n) * d + j] = acc;
            }
        }
    }
    out
}

#[test]
fn spatial_zeroed_residuals_leave_embedding() {
    let cfg = small();
    let mut model = SttModel::new(&cfg, Variant::St, 3).unwrap();
    randomize(&mut model, 4);
    zero_residual_branches(&mut model, "spatial", cfg.layers_s);
    let x = window(&cfg, 5);
    let (a, ..) = eval_blocks(&model, &x);
    let p = model.params();
    let expect = embed_oracle(
        x.data(),
        cfg.window,
        cfg.markers,
        cfg.dims,
        p.by_name("spatial.embed.w").unwrap(),
        p.by_name("spatial.embed.b").unwrap(),
        p.by_name("spatial.pos").unwrap(),
    );
    let diff = a.data().iter().zip(&expect).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn temporal_zeroed_residuals_leave_embedding() {
    let cfg = small();
    let mut model = SttModel::new(&cfg, Variant::St, 3).unwrap();
    randomize(&mut model, 6);
    zero_residual_branches(&mut model, "temporal", cfg.layers_t);
    let (a, b, ..) = eval_blocks(&model, &window(&cfg, 7));
    // Marker-major copy of A.
    let (w, m, ds) = (cfg.window, cfg.markers, cfg.d_s);
    let mut per_marker = vec![0.0; w * m * ds];
    for f in 0..w {
        for k in 0..m {
            for j in 0..ds {
                per_marker[(k * w + f) * ds + j] = a.data()[(f * m + k) * ds + j];
            }
        }
    }
    let p = model.params();
    let expect = embed_oracle(
        &per_marker,
        m,
        w,
        ds,
        p.by_name("temporal.embed.w").unwrap(),
        p.by_name("temporal.embed.b").unwrap(),
        p.by_name("temporal.pos").unwrap(),
    );
    let diff = b.data().iter().zip(&expect).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

fn permute_rows(t: &Tensor, perm: &[usize], row_len: usize) -> Tensor {
    let mut data = Vec::with_capacity(t.len());
    for &r in perm {
        data.extend_from_slice(&t.data()[r * row_len..(r + 1) * row_len]);
    }
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

fn perm_from_seed(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    RngState::new(seed).shuffle(&mut p);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spatial_block_is_marker_equivariant(seed in 0u64..1000) {
        let cfg = small();
        let mut model = SttModel::new(&cfg, Variant::St, seed).unwrap();
        randomize(&mut model, seed + 1);
        let x = window(&cfg, seed + 2);
        let perm = perm_from_seed(cfg.markers, seed + 3);
        let (a, ..) = eval_blocks(&model, &x);

        let mut px = Vec::new();
        for f in 0..cfg.window {
            let frame = Tensor::new(vec![cfg.markers, cfg.dims], x.data()[f * cfg.markers * cfg.dims..(f + 1) * cfg.markers * cfg.dims].to_vec()).unwrap();
            px.extend_from_slice(permute_rows(&frame, &perm, cfg.dims).data());
        }
        let px = Tensor::new(x.shape().to_vec(), px).unwrap();
        let pos = model.params().by_name("spatial.pos").unwrap().clone();
        model.params_mut().set("spatial.pos", permute_rows(&pos, &perm, cfg.d_s)).unwrap();
        let (pa, ..) = eval_blocks(&model, &px);

        for f in 0..cfg.window {
            for (i, &src) in perm.iter().enumerate() {
                for j in 0..cfg.d_s {
                    let u = pa.data()[(f * cfg.markers + i) * cfg.d_s + j];
                    let v = a.data()[(f * cfg.markers + src) * cfg.d_s + j];
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn temporal_block_is_frame_equivariant(seed in 0u64..1000) {
        let cfg = small();
        let mut model = SttModel::new(&cfg, Variant::St, seed).unwrap();
        randomize(&mut model, seed + 1);
        let (w, m, ds, dt) = (cfg.window, cfg.markers, cfg.d_s, cfg.d_t);
        let a = rand_tensor(&[w, m, ds], seed + 2);
        let perm = perm_from_seed(w, seed + 3);
        let run = |model: &SttModel, a: &Tensor| {
            let mut g = Graph::no_grad();
            let p = model.bind(&mut g, false);
            let a = g.constant(a.clone());
            model.temporal_block(&mut g, &p, &a, &mut Mode::eval()).unwrap().value().clone()
        };
        let b = run(&model, &a);
        let pa = permute_rows(&a, &perm, m * ds);
        let pos = model.params().by_name("temporal.pos").unwrap().clone();
        model.params_mut().set("temporal.pos", permute_rows(&pos, &perm, dt)).unwrap();
        let pb = run(&model, &pa);
        for k in 0..m {
            for (i, &src) in perm.iter().enumerate() {
                for j in 0..dt {
                    let u = pb.data()[(k * w + i) * dt + j];
                    let v = b.data()[(k * w + src) * dt + j];
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cross_attention_rows_sum_to_one(seed in 0u64..1000) {
        let cfg = small();
        let mut model = SttModel::new(&cfg, Variant::St, seed).unwrap();
        randomize(&mut model, seed);
        let (.., probs, y) = eval_blocks(&model, &window(&cfg, seed + 9));
        for row in probs.data().chunks(cfg.markers) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        prop_assert!(y.data().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn single_marker_attention_is_exactly_one() {
    let cfg = ModelConfig { markers: 1, ..small() };
    let mut model = SttModel::new(&cfg, Variant::St, 0).unwrap();
    randomize(&mut model, 1);
    let (.., probs, _) = eval_blocks(&model, &window(&cfg, 2));
    assert!(probs.data().iter().all(|&v| v == 1.0));
}

#[test]
fn zero_head_gives_ln2() {
    let cfg = small();
    let mut model = SttModel::new(&cfg, Variant::St, 0).unwrap();
    for name in ["head.fc1.w", "head.fc1.b", "head.fc2.w", "head.fc2.b"] {
        let shape = model.params().by_name(name).unwrap().shape().to_vec();
        model.params_mut().set(name, Tensor::zeros(&shape)).unwrap();
    }
    let y = model.predict(window(&cfg, 1).data()).unwrap();
    assert_eq!(y.len(), cfg.window);
    assert!(y.iter().all(|v| (v - std::f64::consts::LN_2).abs() < 1e-15));
}

#[test]
fn table1_output_length() {
    let cfg = ModelConfig::default();
    assert_eq!((cfg.d_s, cfg.d_t, cfg.d_f, cfg.heads_s, cfg.heads_t, cfg.layers_s, cfg.layers_t), (64, 128, 256, 2, 4, 2, 4));
    assert_eq!(cfg.dropout, 0.3);
    let model = SttModel::new(&cfg, Variant::St, 0).unwrap();
    let x = window(&cfg, 0);
    let y = model.predict(x.data()).unwrap();
    assert_eq!(y.len(), 256);
    assert_eq!(y, model.predict(x.data()).unwrap());
}

#[test]
fn train_mode_is_seed_deterministic() {
    let cfg = small();
    let model = SttModel::new(&cfg, Variant::St, 0).unwrap();
    let x = window(&cfg, 1);
    let run = |seed: u64| {
        let mut g = Graph::no_grad();
        let p = model.bind(&mut g, false);
        let x = g.constant(x.clone());
        let mut mode = Mode::train(0.3, RngState::new(seed));
        model.forward(&mut g, &p, &x, &mut mode).unwrap().data().to_vec()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
    assert_ne!(run(1), model.predict(x.data()).unwrap());
}

#[test]
fn config_validation() {
    let bad = [
        ModelConfig { d_s: 7, ..tiny() },
        ModelConfig { heads_c: 3, ..tiny() },
        ModelConfig { d_out: 2, ..tiny() },
        ModelConfig { dropout: 1.0, ..tiny() },
        ModelConfig { layers_t: 0, ..tiny() },
    ];
    for cfg in bad {
        assert!(matches!(SttModel::new(&cfg, Variant::St, 0), Err(Error::Config(_))), "{cfg:?}");
    }
    assert!(matches!("x".parse::<Variant>(), Err(Error::Config(_))));
    assert_eq!("S+T".parse::<Variant>().unwrap(), Variant::St);
    assert_eq!(Variant::St.to_string(), "S+T");
}

#[test]
fn geometry_mismatch_is_config_error() {
    let cfg = tiny();
    let model = SttModel::new(&cfg, Variant::St, 0).unwrap();
    assert!(matches!(model.predict(&[0.0; 10]), Err(Error::Config(_))));
    let mut g = Graph::no_grad();
    let p = model.bind(&mut g, false);
    let x = g.constant(Tensor::zeros(&[8, 4, 3]));
    assert!(matches!(model.spatial_block(&mut g, &p, &x, &mut Mode::eval()), Err(Error::Config(_))));
}

#[test]
fn variant_structure() {
    let cfg = small();
    let st = SttModel::new(&cfg, Variant::St, 0).unwrap();
    let s = SttModel::new(&cfg, Variant::S, 0).unwrap();
    let t = SttModel::new(&cfg, Variant::T, 0).unwrap();
    let has = |m: &SttModel, prefix: &str| m.params().names().iter().any(|n| n.starts_with(prefix));
    assert!(!has(&s, "temporal.") && !has(&s, "fusion.") && has(&s, "adapter"));
    assert!(s.params().by_name("temporal.pos").is_none());
    assert!(!has(&t, "spatial.") && !has(&t, "fusion.") && t.params().by_name("spatial.pos").is_none());
    assert!(t.params().by_name("temporal.input.w").unwrap().shape() == [cfg.dims, cfg.d_s]);
    assert!(has(&st, "spatial.") && has(&st, "temporal.") && has(&st, "fusion.") && !has(&st, "adapter"));
    assert!(!has(&st, "temporal.input"));
    for m in [&s, &t] {
        let y = m.predict(window(&cfg, 3).data()).unwrap();
        assert_eq!(y.len(), cfg.window);
        assert!(y.iter().all(|v| *v >= 0.0));
    }
    let (sv, tv) = (s.params().names(), t.params().names());
    assert_eq!(sv.iter().filter(|n| n.starts_with("spatial.")).count(), st.params().names().iter().filter(|n| n.starts_with("spatial.")).count());
    assert_eq!(tv.iter().filter(|n| n.starts_with("temporal.layer")).count(), st.params().names().iter().filter(|n| n.starts_with("temporal.layer")).count());
}

#[test]
fn parameter_count_is_a_function_of_config() {
    let cfg = small();
    let a = SttModel::new(&cfg, Variant::St, 1).unwrap();
    let b = SttModel::new(&cfg, Variant::St, 2).unwrap();
    assert_eq!(a.params().names(), b.params().names());
    assert_eq!(a.params().numel(), b.params().numel());
    let (d_s, d_t, m, w, d, d_f) = (cfg.d_s, cfg.d_t, cfg.markers, cfg.window, cfg.dims, cfg.d_f);
    let layer = |d: usize| 4 * d + 4 * d * d + 2 * (d * d + d);
    let expect = (d * d_s + d_s + m * d_s + cfg.layers_s * layer(d_s))
        + (d_s * d_t + d_t + w * d_t + cfg.layers_t * layer(d_t))
        + (d_s * d_t + d_t + 2 * d_t + 4 * d_t * d_t + 2 * d_t)
        + (m * d_t * d_f + d_f + d_f + 1);
    assert_eq!(a.params().numel(), expect);
}

#[test]
fn spatial_and_temporal_parameters_are_disjoint() {
    let model = SttModel::new(&small(), Variant::St, 0).unwrap();
    let names = model.params().names();
    let spatial: Vec<usize> = (0..names.len()).filter(|&i| names[i].starts_with("spatial.")).collect();
    let temporal: Vec<usize> = (0..names.len()).filter(|&i| names[i].starts_with("temporal.")).collect();
    assert!(spatial.iter().max() < temporal.iter().min());
    let mut sorted = names.to_vec();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), names.len());
    // Writing to one stack leaves the other untouched.
    let mut m2 = model.clone();
    *m2.params_mut().get_mut(spatial[0]) = Tensor::full(model.params().get(spatial[0]).shape(), 9.0);
    for &i in &temporal {
        assert_eq!(m2.params().get(i), model.params().get(i));
    }
}

fn model_loss<'a>(model: &'a SttModel, x: &Tensor, target: &Tensor, dropout_seed: Option<u64>) -> impl Fn(&mut Graph, &[Var]) -> Var + 'a {
    let (x, target) = (x.clone(), target.clone());
    move |g: &mut Graph, vars: &[Var]| {
        let p = Bound::from_vars(vars.to_vec());
        let xv = g.constant(x.clone());
        let mut mode = match dropout_seed {
            Some(s) => Mode::train(model.config().dropout, RngState::new(s)),
            None => Mode::eval(),
        };
        let y = model.forward(g, &p, &xv, &mut mode).unwrap();
        let t = g.constant(target.clone());
        let d = g.sub(&y, &t).unwrap();
        let sq = g.mul(&d, &d).unwrap();
        g.mean(&sq)
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let cfg = tiny();
    for variant in Variant::ALL {
        let mut model = SttModel::new(&cfg, variant, 11).unwrap();
        randomize(&mut model, 12);
        let x = window(&cfg, 13);
        let target = Tensor::uniform(&[cfg.window], 0.0, 2.0, &mut RngState::new(14));
        let params: Vec<Tensor> = model.params().iter().map(|(_, t)| t.clone()).collect();
        for dropout in [None, Some(5)] {
            let f = model_loss(&model, &x, &target, dropout);
            let a = analytic_grads(&params, &f);
            let n = numeric_grads(&params, 1e-5, &f);
            let err = max_rel_err(&a, &n, 1e-4);
            assert!(err < 1e-4, "{variant} dropout {dropout:?}: rel err {err}");
        }
    }
}

#[test]
fn block_gradients_match_finite_differences() {
    let cfg = tiny();
    let mut model = SttModel::new(&cfg, Variant::St, 21).unwrap();
    randomize(&mut model, 22);
    let params: Vec<Tensor> = model.params().iter().map(|(_, t)| t.clone()).collect();
    let mut inputs = params.clone();
    inputs.push(rand_tensor(&[cfg.window, cfg.markers, cfg.d_s], 23));
    inputs.push(rand_tensor(&[cfg.markers, cfg.window, cfg.d_t], 24));
    let n_params = params.len();
    let f = |g: &mut Graph, v: &[Var]| {
        let p = Bound::from_vars(v[..n_params].to_vec());
        let (c, probs) = model.fuse_cross_attention(g, &p, &v[n_params], &v[n_params + 1], &mut Mode::eval()).unwrap();
        let l1 = project(g, &c, 1);
        let l2 = project(g, &probs, 2);
        g.add(&l1, &l2).unwrap()
    };
    let a = analytic_grads(&inputs, f);
    let n = numeric_grads(&inputs, 1e-5, f);
    assert!(max_rel_err(&a, &n, 1e-4) < 1e-5);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempdir().unwrap();
    for variant in Variant::ALL {
        let cfg = small();
        let model = SttModel::new(&cfg, variant, 8).unwrap();
        let path = dir.path().join(format!("{}.ckpt", variant.key()));
        let pre = mocap_doppler::dsp::PreprocessConfig { window: 6, hop: 2, ..Default::default() };
        save_checkpoint(&model, Some(&pre), &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.preprocess.as_ref(), Some(&pre));
        assert_eq!(loaded.model.variant(), variant);
        assert_eq!(loaded.model.config(), &cfg);
        for ((na, a), (nb, b)) in model.params().iter().zip(loaded.model.params().iter()) {
            assert_eq!(na, nb);
            assert!(a.max_abs_diff(b) < 1e-7);
        }
        let x = window(&cfg, 9);
        let ya = model.predict(x.data()).unwrap();
        let yb = loaded.model.predict(x.data()).unwrap();
        let diff = ya.iter().zip(&yb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-5, "{diff}");
        // Saving the loaded model reproduces the file exactly.
        let again = dir.path().join("again.ckpt");
        save_checkpoint(&loaded.model, Some(&pre), &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn checkpoint_rejects_corruption() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&SttModel::new(&tiny(), Variant::St, 0).unwrap(), None, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    std::fs::write(&path, &extra).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
    // A header claiming a different width no longer matches the blobs.
    let text = String::from_utf8_lossy(&bytes).replace("\"d_f\":8", "\"d_f\":9");
    let mut patched = bytes.clone();
    let pos = text.find("\"d_f\":9").unwrap();
    patched[pos + 6] = b'9';
    std::fs::write(&path, &patched).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
}
