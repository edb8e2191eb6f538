//! Small-dimension oracle checks run by `torus-echo selftest`: every fast
//! path against a dense brute-force evaluation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decoherence::{
    apply_decoherence, chord_multiplier, depolarizing_kernel, gaussian_kernel, lorentz_kernel, DecoherenceKernel,
};
use crate::dynamics::{lyapunov_closed_form, lyapunov_numeric, Direction, MapParams, Propagator};
use crate::hilbert::{rho_to_chord, translate, DensityMatrix, PureState, Space, C64};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured deviation and its bound.
    pub detail: String,
}

impl Check {
    fn bound(name: impl Into<String>, deviation: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            passed: deviation <= tol,
            detail: format!("{deviation:.3e} <= {tol:.0e}"),
        }
    }
}

fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    // A A^dag / tr
    let a: Vec<C64> = (0..n * n)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..n).map(|l| a[i * n + l] * a[j * n + l].conj()).sum();
        }
    }
    let tr: f64 = (0..n).map(|i| m[i * n + i].re).sum();
    m.iter_mut().for_each(|x| *x /= tr);
    DensityMatrix::from_entries(n, m, 1e-10).expect("A A^dag is a density matrix")
}

/// `sum_{q,p} c(q,p) T rho T^dag` by explicit index shifts:
/// `(T_{q,p} rho T_{q,p}^dag)_{ml} = w^{p(m-l)} rho_{m-q, l-q}`.
pub fn kraus_sum(rho: &DensityMatrix, kernel: &DecoherenceKernel) -> DensityMatrix {
    let n = rho.dim();
    let ni = n as i64;
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for q in 0..ni {
        for p in 0..ni {
            let c = kernel.weight(q, p);
            if c == 0.0 {
                continue;
            }
            for m in 0..ni {
                for l in 0..ni {
                    let phase = C64::from_polar(1.0, 2.0 * PI * (p * (m - l)).rem_euclid(ni) as f64 / n as f64);
                    let src = rho.get((m - q).rem_euclid(ni) as usize, (l - q).rem_euclid(ni) as usize);
                    out[(m * ni + l) as usize] += c * phase * src;
                }
            }
        }
    }
    DensityMatrix::from_raw(n, out)
}

/// Dense one-period unitary `F^dag diag(kinetic) F diag(kick)`.
pub fn dense_unitary(n: usize, params: &MapParams) -> Vec<C64> {
    let nf = n as f64;
    let f = |k: usize, l: usize| C64::from_polar(1.0 / nf.sqrt(), -2.0 * PI * (k * l) as f64 / nf);
    let kick: Vec<C64> = (0..n)
        .map(|j| {
            let q = j as f64 / nf;
            let v = -0.5 * params.a as f64 * q * q - params.k * (2.0 * PI * q).sin() + 0.5 * params.k * (4.0 * PI * q).sin();
            C64::from_polar(1.0, -2.0 * PI * nf * v)
        })
        .collect();
    let kinetic: Vec<C64> = (0..n)
        .map(|m| {
            let p = m as f64 / nf;
            C64::from_polar(1.0, 2.0 * PI * nf * (-0.5 * params.b as f64 * p * p))
        })
        .collect();
    let mut u = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for l in 0..n {
            u[j * n + l] = (0..n).map(|m| f(m, j).conj() * kinetic[m] * f(m, l)).sum::<C64>() * kick[l];
        }
    }
    u
}

fn max_abs(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn kernels(space: &Space) -> Vec<(&'static str, DecoherenceKernel)> {
    vec![
        ("gdm", gaussian_kernel(space, 0.5).unwrap()),
        ("dc", depolarizing_kernel(space, 0.3).unwrap()),
        ("ldm", lorentz_kernel(space, 0.2, 20).unwrap()),
    ]
}

fn chord_vs_kraus(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut checks = Vec::new();
    for n in [4, 8] {
        let space = Space::new(n).unwrap();
        let rho = random_density(n, rng);
        for (name, kernel) in kernels(&space) {
            let fast = apply_decoherence(&rho, &chord_multiplier(&kernel).unwrap()).unwrap();
            let slow = kraus_sum(&rho, &kernel);
            checks.push(Check::bound(format!("chord channel = Kraus sum ({name}, N={n})"), fast.max_abs_diff(&slow), 1e-10));
        }
    }
    checks
}

fn propagator_vs_dense() -> Vec<Check> {
    let n = 8;
    let space = Space::new(n).unwrap();
    let params = MapParams::new(2, 2, 0.01).unwrap();
    let prop = Propagator::new(space, params).unwrap();
    let u = dense_unitary(n, &params);
    let mut dev = 0.0f64;
    let mut unitarity = 0.0f64;
    for l in 0..n {
        let col = prop.apply(&PureState::basis(&space, l), Direction::Forward).unwrap();
        let dense: Vec<C64> = (0..n).map(|j| u[j * n + l]).collect();
        dev = dev.max(max_abs(col.amplitudes(), &dense));
        let back = prop.apply(&col, Direction::Adjoint).unwrap();
        unitarity = unitarity.max(max_abs(back.amplitudes(), PureState::basis(&space, l).amplitudes()));
    }
    vec![
        Check::bound("propagator = dense unitary (N=8)", dev, 1e-10),
        Check::bound("adjoint inverts propagator (N=8)", unitarity, 1e-12),
    ]
}

fn lyapunov() -> Vec<Check> {
    let mut checks = vec![
        Check::bound("lyapunov a=b=2", (lyapunov_closed_form(2, 2).unwrap() - 1.76275).abs(), 1e-5),
        Check::bound("lyapunov a=b=4", (lyapunov_closed_form(4, 4).unwrap() - 2.88727).abs(), 1e-5),
    ];
    let params = MapParams::new(2, 2, 0.0002).unwrap();
    let numeric = lyapunov_numeric(&params, 20_000, 1).unwrap();
    checks.push(Check::bound("numeric lyapunov a=b=2, k=2e-4", (numeric - 1.76275).abs(), 1e-2));
    checks
}

fn channel_invariants(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let n = 8;
    let space = Space::new(n).unwrap();
    let mixed = DensityMatrix::maximally_mixed(&space);
    let rho = random_density(n, rng);
    let mut checks = Vec::new();
    for (name, kernel) in kernels(&space) {
        let mult = chord_multiplier(&kernel).unwrap();
        let out = apply_decoherence(&rho, &mult).unwrap();
        checks.push(Check::bound(format!("trace preserved ({name})"), (out.trace() - 1.0).norm(), 1e-12));
        checks.push(Check::bound(
            format!("unital ({name})"),
            apply_decoherence(&mixed, &mult).unwrap().max_abs_diff(&mixed),
            1e-12,
        ));
        checks.push(Check::bound(
            format!("purity non-increasing ({name})"),
            (out.purity() - rho.purity()).max(0.0),
            1e-12,
        ));
    }
    let chord = rho_to_chord(&rho);
    checks.push(Check::bound("chord Parseval purity (N=8)", (chord.purity() - rho.purity()).abs(), 1e-12));
    checks
}

fn commutation_phase() -> Check {
    // T_{1,0} T_{0,1} T_{1,0}^dag = w^{-1} T_{0,1} at N=4, on every basis vector
    let n = 4i64;
    let space = Space::new(n as usize).unwrap();
    let w_inv = C64::from_polar(1.0, -2.0 * PI / n as f64);
    let mut dev = 0.0f64;
    for j in 0..n as usize {
        let e = PureState::basis(&space, j);
        let lhs = translate(&translate(&translate(&e, -1, 0), 0, 1), 1, 0);
        let rhs: Vec<C64> = translate(&e, 0, 1).amplitudes().iter().map(|a| a * w_inv).collect();
        dev = dev.max(max_abs(lhs.amplitudes(), &rhs));
    }
    Check::bound("translation commutation phase (N=4)", dev, 1e-12)
}

/// Runs every suite and returns one row per check.
pub fn run_all() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut checks = chord_vs_kraus(&mut rng);
    checks.extend(propagator_vs_dense());
    checks.extend(lyapunov());
    checks.extend(channel_invariants(&mut rng));
    checks.push(commutation_phase());
    checks
}
