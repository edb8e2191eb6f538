//! Dense brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_echo::hilbert::{DensityMatrix, PureState};

pub type Mat = Vec<C>;

pub fn zeros(n: usize) -> Mat {
    vec![C::new(0.0, 0.0); n * n]
}

pub fn matmul(a: &Mat, b: &Mat, n: usize) -> Mat {
    let mut c = zeros(n);
    for i in 0..n {
        for l in 0..n {
            let x = a[i * n + l];
            if x == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += x * b[l * n + j];
            }
        }
    }
    c
}

pub fn dagger(a: &Mat, n: usize) -> Mat {
    let mut d = zeros(n);
    for i in 0..n {
        for j in 0..n {
            d[j * n + i] = a[i * n + j].conj();
        }
    }
    d
}

pub fn max_abs(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `T_{q,p} = e^{-i pi q p / N} V^p U^q` with `U|j> = |j+1>`, `V|j> = w^j |j>`.
pub fn translation(n: usize, q: i64, p: i64) -> Mat {
    let ni = n as i64;
    let mut t = zeros(n);
    let global = C::from_polar(1.0, -PI * (q * p) as f64 / n as f64);
    for j in 0..ni {
        let target = (j + q).rem_euclid(ni);
        let phase = C::from_polar(1.0, 2.0 * PI * (p * target) as f64 / n as f64);
        t[(target * ni + j) as usize] = global * phase;
    }
    t
}

/// `sum_{q,p} c(q,p) T rho T^dag` with dense matrix products; `c` is row-major
/// over `(q, p)` in `0..N`.
pub fn kraus_dense(rho: &Mat, c: &[f64], n: usize) -> Mat {
    let mut out = zeros(n);
    for q in 0..n {
        for p in 0..n {
            let w = c[q * n + p];
            if w == 0.0 {
                continue;
            }
            let t = translation(n, q as i64, p as i64);
            let term = matmul(&matmul(&t, rho, n), &dagger(&t, n), n);
            out.iter_mut().zip(&term).for_each(|(o, x)| *o += w * x);
        }
    }
    out
}

pub fn dft_matrix(n: usize) -> Mat {
    let mut f = zeros(n);
    for k in 0..n {
        for j in 0..n {
            f[k * n + j] = C::from_polar(1.0 / (n as f64).sqrt(), -2.0 * PI * (k * j) as f64 / n as f64);
        }
    }
    f
}

/// Dense quantized perturbed cat map: kick `exp(-i V(q)/hbar)` with
/// `V(q) = -a q^2/2 - k sin 2 pi q + (k/2) sin 4 pi q`, then free motion
/// `exp(-i K(p)/hbar)` with `K(p) = b p^2/2`, so that `p' = p - V'(q)` and
/// `q' = q + K'(p')`.
pub fn cat_unitary(n: usize, a: i64, b: i64, k: f64) -> Mat {
    let nf = n as f64;
    let mut kick = zeros(n);
    let mut kin = zeros(n);
    for j in 0..n {
        let q = j as f64 / nf;
        let v = -(a as f64) * q * q / 2.0 - k * (2.0 * PI * q).sin() + k / 2.0 * (4.0 * PI * q).sin();
        kick[j * n + j] = C::from_polar(1.0, -2.0 * PI * nf * v);
        let kinetic = b as f64 * q * q / 2.0;
        kin[j * n + j] = C::from_polar(1.0, -2.0 * PI * nf * kinetic);
    }
    let f = dft_matrix(n);
    matmul(&matmul(&dagger(&f, n), &kin, n), &matmul(&f, &kick, n), n)
}

pub fn random_density(n: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Mat = (0..n * n)
        .map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut m = matmul(&a, &dagger(&a, n), n);
    let tr: f64 = (0..n).map(|i| m[i * n + i].re).sum();
    m.iter_mut().for_each(|x| *x /= tr);
    DensityMatrix::from_entries(n, m, 1e-10).unwrap()
}

pub fn random_state(n: usize, seed: u64) -> PureState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..n)
        .map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    PureState::from_amplitudes(v).unwrap()
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}
