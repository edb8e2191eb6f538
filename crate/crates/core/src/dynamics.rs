//! Perturbed cat map: the classical map, its Lyapunov exponent, and the
//! split-operator quantization `U = exp(i T(p)/hbar) exp(-i V(q)/hbar)`.
//!
//! The generating functions are
//! `V(q) = -a q^2/2 - k sin(2 pi q) + (k/2) sin(4 pi q)` and
//! `T(p) = -b p^2/2`, which give back
//! `p' = p + a q + 2 pi k (cos 2 pi q - cos 4 pi q)`, `q' = q + b p'` (mod 1)
//! through `p' = p - V'(q)` and `q' = q - T'(p')`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Dft, PureState, Space, C64};

/// Map parameters: integer shears `a`, `b` and the nonlinear amplitude `k`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MapParams {
    pub a: i64,
    pub b: i64,
    pub k: f64,
}

impl MapParams {
    pub fn new(a: i64, b: i64, k: f64) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(Error::Domain(format!("shear amplitude k must be finite and >= 0, got {k}")));
        }
        Ok(MapParams { a, b, k })
    }

    /// Same shears, different `k`.
    pub fn with_k(&self, k: f64) -> Self {
        MapParams { k, ..*self }
    }

    /// Even positive shears keep the quadratic phases single valued on the
    /// grid; odd values are refused.
    pub fn check_quantizable(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if v <= 0 || v % 2 != 0 {
                return Err(Error::UnsupportedParameters(format!(
                    "{name} = {v}; quantization requires an even positive integer"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
fn shear_force(q: f64, k: f64) -> f64 {
    2.0 * PI * k * ((2.0 * PI * q).cos() - (4.0 * PI * q).cos())
}

/// One iteration of the classical map on the unit torus.
pub fn classical_step(point: (f64, f64), params: &MapParams) -> (f64, f64) {
    let (q, p) = point;
    let p_new = (p + params.a as f64 * q + shear_force(q, params.k)).rem_euclid(1.0);
    let q_new = (q + params.b as f64 * p_new).rem_euclid(1.0);
    (q_new, p_new)
}

/// Jacobian `d(q', p')/d(q, p)` at `(q, p)`, rows `(q', p')`.
pub fn classical_jacobian(point: (f64, f64), params: &MapParams) -> [[f64; 2]; 2] {
    let q = point.0;
    let k = params.k;
    let dpdq = params.a as f64 - 4.0 * PI * PI * k * (2.0 * PI * q).sin()
        + 8.0 * PI * PI * k * (4.0 * PI * q).sin();
    let b = params.b as f64;
    [[1.0 + b * dpdq, b], [dpdq, 1.0]]
}

/// `ln` of the expanding eigenvalue of the unperturbed cat matrix.
pub fn lyapunov_closed_form(a: i64, b: i64) -> Result<f64> {
    let ab = match a.checked_mul(b) {
        Some(p) if p > 0 => p as f64,
        _ => return Err(Error::Domain(format!("Lyapunov exponent needs a*b > 0, got a={a}, b={b}"))),
    };
    Ok(((2.0 + ab + (ab * (4.0 + ab)).sqrt()) / 2.0).ln())
}

/// Benettin estimate of the largest Lyapunov exponent along a trajectory
/// started at a seeded random point.
pub fn lyapunov_numeric(params: &MapParams, n_iter: usize, seed: u64) -> Result<f64> {
    if n_iter < 10_000 {
        return Err(Error::Domain(format!("n_iter must be at least 10^4, got {n_iter}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = (rng.random::<f64>(), rng.random::<f64>());
    let mut v = [1.0f64, 0.0];
    let mut acc = 0.0;
    for _ in 0..n_iter {
        let j = classical_jacobian(x, params);
        let w = [j[0][0] * v[0] + j[0][1] * v[1], j[1][0] * v[0] + j[1][1] * v[1]];
        let len = w[0].hypot(w[1]);
        acc += len.ln();
        v = [w[0] / len, w[1] / len];
        x = classical_step(x, params);
    }
    Ok(acc / n_iter as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

/// One period of the quantized map as two diagonal phase arrays.
#[derive(Clone, Debug)]
pub struct Propagator {
    space: Space,
    params: MapParams,
    kick: Vec<C64>,
    kinetic: Vec<C64>,
    dft: Dft,
}

/// `pi (m mod 2N) / N` for an integer `m = s j^2`, exact in integers.
#[inline]
fn quadratic_phase(s: i64, j: usize, n: usize) -> f64 {
    let m = (s as i128 * (j as i128) * (j as i128)).rem_euclid(2 * n as i128);
    PI * m as f64 / n as f64
}

impl Propagator {
    pub fn new(space: Space, params: MapParams) -> Result<Self> {
        params.check_quantizable()?;
        let n = space.dim();
        let nf = n as f64;
        // -2 pi N V(j/N) = pi a j^2/N + 2 pi N k sin(2 pi q) - pi N k sin(4 pi q)
        let kick = (0..n)
            .map(|j| {
                let q = j as f64 / nf;
                let pert = 2.0 * PI * nf * params.k * ((2.0 * PI * q).sin() - 0.5 * (4.0 * PI * q).sin());
                C64::from_polar(1.0, quadratic_phase(params.a, j, n) + pert)
            })
            .collect();
        // 2 pi N T(k/N) = -pi b k^2 / N
        let kinetic = (0..n)
            .map(|j| C64::from_polar(1.0, -quadratic_phase(params.b, j, n)))
            .collect();
        Ok(Propagator {
            space,
            params,
            kick,
            kinetic,
            dft: Dft::new(n),
        })
    }

    #[inline]
    pub fn space(&self) -> &Space {
        &self.space
    }

    #[inline]
    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn kick_phases(&self) -> &[C64] {
        &self.kick
    }

    pub fn kinetic_phases(&self) -> &[C64] {
        &self.kinetic
    }

    pub fn make_scratch(&self) -> Vec<C64> {
        self.dft.make_scratch()
    }

    /// Applies the map (or its adjoint) to position amplitudes in place.
    pub fn apply_in_place(&self, buf: &mut [C64], scratch: &mut [C64], direction: Direction) {
        debug_assert_eq!(buf.len(), self.space.dim());
        match direction {
            Direction::Forward => {
                buf.iter_mut().zip(&self.kick).for_each(|(a, k)| *a *= k);
                self.dft.to_momentum(buf, scratch);
                buf.iter_mut().zip(&self.kinetic).for_each(|(a, k)| *a *= k);
                self.dft.to_position(buf, scratch);
            }
            Direction::Adjoint => {
                self.dft.to_momentum(buf, scratch);
                buf.iter_mut().zip(&self.kinetic).for_each(|(a, k)| *a *= k.conj());
                self.dft.to_position(buf, scratch);
                buf.iter_mut().zip(&self.kick).for_each(|(a, k)| *a *= k.conj());
            }
        }
    }

    pub fn apply(&self, state: &PureState, direction: Direction) -> Result<PureState> {
        self.space.check(state.dim())?;
        let mut out = state.clone();
        let mut scratch = self.make_scratch();
        self.apply_in_place(out.amplitudes_mut(), &mut scratch, direction);
        Ok(out)
    }

    /// `U rho U^dag`, one propagator application per row and per column.
    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.space.dim();
        self.space.check(rho.dim())?;
        let mut out = rho.clone();
        // rows <- conj(U) rows gives rho U^dag
        out.entries_mut()
            .par_chunks_mut(n)
            .for_each_init(
                || self.make_scratch(),
                |scratch, row| {
                    row.iter_mut().for_each(|a| *a = a.conj());
                    self.apply_in_place(row, scratch, Direction::Forward);
                    row.iter_mut().for_each(|a| *a = a.conj());
                },
            );
        out.transpose_in_place();
        // rows of (rho U^dag)^T <- U rows gives (U rho U^dag)^T
        out.entries_mut()
            .par_chunks_mut(n)
            .for_each_init(
                || self.make_scratch(),
                |scratch, row| self.apply_in_place(row, scratch, Direction::Forward),
            );
        out.transpose_in_place();
        Ok(out)
    }
}

pub fn build_propagator(space: Space, params: MapParams) -> Result<Propagator> {
    Propagator::new(space, params)
}

pub fn apply_propagator(state: &PureState, prop: &Propagator, direction: Direction) -> Result<PureState> {
    prop.apply(state, direction)
}

pub fn apply_to_density(rho: &DensityMatrix, prop: &Propagator) -> Result<DensityMatrix> {
    prop.conjugate(rho)
}
