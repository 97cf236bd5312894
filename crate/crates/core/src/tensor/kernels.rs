//! Raw kernels shared by the graph ops: GEMM, broadcasting index maps and
//! axis permutation.

/// `c = a·b + beta·c` for row-major operands, where `a` is `m×k` (stored
/// `k×m` when `a_trans`) and `b` is `k×n` (stored `n×k` when `b_trans`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every strided access stays inside
    // the three slices, and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Numpy-style broadcast of two shapes (right aligned).
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let nd = a.len().max(b.len());
    let mut out = vec![0; nd];
    for i in 0..nd {
        let da = if i < nd - a.len() { 1 } else { a[i - (nd - a.len())] };
        let db = if i < nd - b.len() { 1 } else { b[i - (nd - b.len())] };
        out[i] = match (da, db) {
            _ if da == db => da,
            (1, _) => db,
            (_, 1) => da,
            _ => return None,
        };
    }
    Some(out)
}

/// Maps flat indices of a broadcast output back to flat indices of one input.
#[derive(Clone, Debug)]
pub(crate) enum BroadcastMap {
    Identity,
    /// Input shape is a suffix of the output shape: index modulo its length.
    Cyclic(usize),
    General(Vec<usize>),
}

impl BroadcastMap {
    pub fn new(in_shape: &[usize], out_shape: &[usize]) -> Self {
        let trimmed: &[usize] = {
            let lead = in_shape.iter().take_while(|&&d| d == 1).count();
            &in_shape[lead..]
        };
        if in_shape == out_shape {
            return BroadcastMap::Identity;
        }
        if out_shape.ends_with(trimmed) {
            return BroadcastMap::Cyclic(trimmed.iter().product());
        }
        let nd = out_shape.len();
        let pad = nd - in_shape.len();
        let mut strides = vec![0usize; nd];
        let mut s = 1;
        for i in (0..in_shape.len()).rev() {
            strides[pad + i] = if in_shape[i] == 1 { 0 } else { s };
            s *= in_shape[i];
        }
        let numel: usize = out_shape.iter().product();
        let mut offsets = Vec::with_capacity(numel);
        let mut idx = vec![0usize; nd];
        let mut off = 0usize;
        for _ in 0..numel {
            offsets.push(off);
            for d in (0..nd).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < out_shape[d] {
                    break;
                }
                off -= strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        BroadcastMap::General(offsets)
    }

    #[inline]
    pub fn index(&self, i: usize) -> usize {
        match self {
            BroadcastMap::Identity => i,
            BroadcastMap::Cyclic(n) => i % n,
            BroadcastMap::General(o) => o[i],
        }
    }

    /// Sums an output-shaped gradient back onto the input shape.
    pub fn reduce(&self, grad: &[f64], in_len: usize) -> Vec<f64> {
        match self {
            BroadcastMap::Identity => grad.to_vec(),
            BroadcastMap::Cyclic(n) => {
                let mut out = vec![0.0; *n];
                for chunk in grad.chunks_exact(*n) {
                    for (o, g) in out.iter_mut().zip(chunk) {
                        *o += g;
                    }
                }
                out
            }
            BroadcastMap::General(o) => {
                let mut out = vec![0.0; in_len];
                for (&j, g) in o.iter().zip(grad) {
                    out[j] += g;
                }
                out
            }
        }
    }
}

/// Output shape of permuting `shape` by `axes`.
pub(crate) fn permuted_shape(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    axes.iter().map(|&a| shape[a]).collect()
}

/// Copies `data` (row-major, `shape`) into the layout given by `axes`, so
/// output axis `i` is input axis `axes[i]`.
pub(crate) fn permute(data: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let nd = shape.len();
    let mut in_strides = vec![1usize; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let out_shape = permuted_shape(shape, axes);
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let mut out = Vec::with_capacity(data.len());
    if nd == 0 {
        out.extend_from_slice(data);
        return out;
    }
    let last = nd - 1;
    let inner = out_shape[last];
    let inner_stride = strides[last];
    let outer: usize = out_shape[..last].iter().product();
    let mut idx = vec![0usize; last];
    let mut base = 0usize;
    for _ in 0..outer {
        let mut off = base;
        for _ in 0..inner {
            out.push(data[off]);
            off += inner_stride;
        }
        for d in (0..last).rev() {
            idx[d] += 1;
            base += strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            base -= strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    out
}

pub(crate) fn inverse_axes(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}
