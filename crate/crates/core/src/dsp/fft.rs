use std::f64::consts::PI;

use num_complex::Complex64;

/// Forward DFT, `X[k] = Σₙ x[n]·e^{-j2πkn/N}`. Uses the radix-2 FFT when
/// `N` is a power of two and the direct sum otherwise.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    if x.len().is_power_of_two() {
        let mut buf = x.to_vec();
        fft_radix2(&mut buf);
        buf
    } else {
        naive_dft(x)
    }
}

/// O(N²) forward DFT.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    // Reduce k·i mod n first so the angle stays small.
                    let ang = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect()
}

/// In-place iterative Cooley-Tukey FFT. `x.len()` must be a power of two.
pub fn fft_radix2(x: &mut [Complex64]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length, got {n}");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            x.swap(i, j);
        }
    }
    // Twiddles for the largest stage; smaller stages stride through them.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * step];
                let a = x[start + k];
                let b = x[start + k + half] * w;
                x[start + k] = a + b;
                x[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}
