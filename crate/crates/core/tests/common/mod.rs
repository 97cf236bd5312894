#![allow(dead_code)]

use mocap_doppler::tensor::{Graph, RngState, Tensor, Var};

/// Central-difference gradient of `f` with respect to every element of
/// every input. `f` is evaluated on a fresh graph each time, independently of
/// the reverse-mode path being checked.
pub fn numeric_grads<F>(inputs: &[Tensor], h: f64, f: F) -> Vec<Tensor>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |xs: &[Tensor]| {
        let mut g = Graph::no_grad();
        let vars: Vec<Var> = xs.iter().map(|t| g.constant(t.clone())).collect();
        f(&mut g, &vars).value().item()
    };
    let mut out = Vec::new();
    let mut xs = inputs.to_vec();
    for i in 0..inputs.len() {
        let mut grad = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let orig = xs[i].data()[j];
            xs[i].data_mut()[j] = orig + h;
            let fp = eval(&xs);
            xs[i].data_mut()[j] = orig - h;
            let fm = eval(&xs);
            xs[i].data_mut()[j] = orig;
            grad.data_mut()[j] = (fp - fm) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// Reverse-mode gradients of `f` for the same inputs.
pub fn analytic_grads<F>(inputs: &[Tensor], f: F) -> Vec<Tensor>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let loss = f(&mut g, &vars);
    let grads = g.backward(&loss).unwrap();
    vars.iter().map(|v| grads.get(v)).collect()
}

/// Largest elementwise relative error, `|a - n| / max(|a|, |n|, floor)`.
/// The floor keeps gradients that are zero up to rounding from dominating.
pub fn max_rel_err(analytic: &[Tensor], numeric: &[Tensor], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()).map(|(x, y)| (*x, *y)))
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Reduces a tensor to a scalar through a fixed random linear functional so
/// every output element contributes a distinct weight to the gradient.
pub fn project(g: &mut Graph, x: &Var, seed: u64) -> Var {
    let mut rng = RngState::new(seed);
    let w = Tensor::uniform(x.shape(), -1.0, 1.0, &mut rng);
    let w = g.constant(w);
    let p = g.mul(x, &w).unwrap();
    g.sum(&p)
}

pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = RngState::new(seed);
    Tensor::uniform(shape, -1.0, 1.0, &mut rng)
}
