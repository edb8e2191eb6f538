//! Finite Hilbert space of the quantized torus.
//!
//! Positions are the grid `q_j = j/N`, momenta `p_k = k/N`, and the two bases
//! are related by the unitary DFT
//! `phi_k = N^{-1/2} sum_j exp(-2 pi i j k / N) psi_j`.
//!
//! Phase-space translations follow the symmetric ordering
//! `T(q, p) = exp(-i pi q p / N) V^p U^q`, where `U|j> = |j+1>` and
//! `V|j> = exp(2 pi i j / N)|j>`. With this convention
//! `T(q,p) T(Q,P) T(q,p)^dag = exp(2 pi i (p Q - q P) / N) T(Q,P)`, which
//! makes every translation-covariant channel diagonal on chord functions
//! `chi(Q,P) = tr(T(Q,P)^dag rho)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest supported dimension; a dense density matrix beyond this is never
/// representable and a pure state would already take gigabytes.
pub const MAX_DIM: usize = 1 << 28;

/// Hilbert-space dimension together with the effective Planck constant
/// `hbar = 1/(2 pi N)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Space {
    dim: usize,
    hbar: f64,
}

impl Space {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Space {
            dim,
            hbar: 1.0 / (2.0 * PI * dim as f64),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub(crate) fn check(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }
}

/// Shorthand for [`Space::new`].
pub fn make_space(dim: usize) -> Result<Space> {
    Space::new(dim)
}

/// Normalized state vector in the position basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Normalizes `amps`. Fails on an empty or zero vector.
    pub fn from_amplitudes(mut amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let norm = norm(&amps);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain(format!("cannot normalize vector of norm {norm}")));
        }
        let inv = 1.0 / norm;
        amps.iter_mut().for_each(|a| *a *= inv);
        Ok(PureState { amps })
    }

    /// Position eigenstate `|j>`.
    pub fn basis(space: &Space, j: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
        amps[j % space.dim()] = C64::new(1.0, 0.0);
        PureState { amps }
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        PureState { amps }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Variance of the position distribution about its (linear) mean.
    pub fn position_variance(&self) -> f64 {
        let n = self.dim() as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (j, a) in self.amps.iter().enumerate() {
            let x = j as f64 / n;
            let w = a.norm_sqr();
            m1 += w * x;
            m2 += w * x * x;
        }
        m2 - m1 * m1
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Periodized Gaussian of equal position and momentum widths centered at
/// `(q0, p0)`.
pub fn coherent_state(space: &Space, q0: f64, p0: f64) -> Result<PureState> {
    if !(0.0..1.0).contains(&q0) || !(0.0..1.0).contains(&p0) {
        return Err(Error::Domain(format!(
            "coherent-state center ({q0}, {p0}) outside [0,1)^2"
        )));
    }
    let n = space.dim();
    let nf = n as f64;
    let amps = (0..n)
        .map(|j| {
            let x0 = j as f64 / nf - q0;
            let mut acc = C64::new(0.0, 0.0);
            for m in -3..=3 {
                let x = x0 - m as f64;
                let re = -PI * nf * x * x;
                if re < -740.0 {
                    continue;
                }
                acc += C64::from_polar(re.exp(), 2.0 * PI * nf * p0 * x);
            }
            acc
        })
        .collect();
    PureState::from_amplitudes(amps)
}

/// Cached FFT plans for one dimension, normalized to be unitary.
#[derive(Clone)]
pub struct Dft {
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("dim", &self.dim).finish()
    }
}

impl Dft {
    pub fn new(dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            dim,
            forward: planner.plan_fft_forward(dim),
            inverse: planner.plan_fft_inverse(dim),
            scale: 1.0 / (dim as f64).sqrt(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    pub fn make_scratch(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.scratch_len()]
    }

    /// Unnormalized `sum_j exp(-2 pi i j k / N) x_j`, in place.
    pub(crate) fn raw_forward(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Unnormalized `sum_k exp(+2 pi i j k / N) x_k`, in place.
    pub(crate) fn raw_inverse(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Position amplitudes to momentum amplitudes, in place.
    pub fn to_momentum(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.forward.process_with_scratch(buf, scratch);
        buf.iter_mut().for_each(|a| *a *= self.scale);
    }

    /// Momentum amplitudes to position amplitudes, in place.
    pub fn to_position(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.inverse.process_with_scratch(buf, scratch);
        buf.iter_mut().for_each(|a| *a *= self.scale);
    }
}

/// Momentum-basis amplitudes of `state`, returned as a normalized vector.
pub fn dft_position_to_momentum(state: &PureState) -> PureState {
    let dft = Dft::new(state.dim());
    let mut amps = state.amplitudes().to_vec();
    let mut scratch = dft.make_scratch();
    dft.to_momentum(&mut amps, &mut scratch);
    PureState::from_raw(amps)
}

pub fn dft_momentum_to_position(state: &PureState) -> PureState {
    let dft = Dft::new(state.dim());
    let mut amps = state.amplitudes().to_vec();
    let mut scratch = dft.make_scratch();
    dft.to_position(&mut amps, &mut scratch);
    PureState::from_raw(amps)
}

#[inline]
fn reduce(x: i64, n: usize) -> usize {
    x.rem_euclid(n as i64) as usize
}

/// `exp(i pi m / N)` for `m` in `0..2N`.
pub(crate) fn half_phase_table(n: usize) -> Vec<C64> {
    (0..2 * n)
        .map(|m| C64::from_polar(1.0, PI * m as f64 / n as f64))
        .collect()
}

/// Applies `T(q, p)`; the shifts are reduced mod N before the ordering phase
/// is evaluated.
pub fn translate(state: &PureState, q: i64, p: i64) -> PureState {
    let n = state.dim();
    let (q, p) = (reduce(q, n), reduce(p, n));
    let nf = n as f64;
    // exp(-i pi q p / N) exp(2 pi i p m / N) on output index m
    let global = -PI * ((q * p) % (2 * n)) as f64 / nf;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (j, a) in state.amplitudes().iter().enumerate() {
        let m = (j + q) % n;
        let kick = 2.0 * PI * ((p * m) % n) as f64 / nf;
        out[m] = a * C64::from_polar(1.0, kick + global);
    }
    PureState::from_raw(out)
}

/// Dense `N x N` Hermitian, unit-trace density matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    /// `|psi><psi|`.
    pub fn from_pure(psi: &PureState) -> Self {
        let n = psi.dim();
        let a = psi.amplitudes();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(a[i] * a[j].conj());
            }
        }
        DensityMatrix { dim: n, data }
    }

    /// `I/N`.
    pub fn maximally_mixed(space: &Space) -> Self {
        let n = space.dim();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = C64::new(1.0 / n as f64, 0.0);
        }
        DensityMatrix { dim: n, data }
    }

    /// Wraps row-major entries after checking shape, Hermiticity and trace
    /// within `tol`.
    pub fn from_entries(dim: usize, data: Vec<C64>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let rho = DensityMatrix { dim, data };
        let herm = rho.hermiticity_defect();
        if herm > tol {
            return Err(Error::Domain(format!("matrix not Hermitian (defect {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr - 1.0).norm() > tol {
            return Err(Error::Domain(format!("trace {tr} differs from 1")));
        }
        Ok(rho)
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        DensityMatrix { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `max |rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// In-place transpose.
    pub(crate) fn transpose_in_place(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                self.data.swap(i * n + j, j * n + i);
            }
        }
    }
}

/// `tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Chord function `chi(Q, P) = tr(T(Q,P)^dag rho)`, stored row-major in `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChordMatrix {
    dim: usize,
    chi: Vec<C64>,
}

impl ChordMatrix {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, q: usize, p: usize) -> C64 {
        self.chi[q * self.dim + p]
    }

    #[inline]
    pub fn values(&self) -> &[C64] {
        &self.chi
    }

    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.chi
    }

    /// `(1/N) sum |chi|^2`, equal to the purity of the represented operator.
    pub fn purity(&self) -> f64 {
        self.chi.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.dim as f64
    }
}

/// Fast chord transform in `O(N^2 log N)`: the `Q`-th off-diagonal of `rho`
/// is Fourier transformed along its length.
#[derive(Clone, Debug)]
pub struct ChordTransform {
    dft: Dft,
    phases: Vec<C64>,
}

impl ChordTransform {
    pub fn new(dim: usize) -> Self {
        ChordTransform {
            dft: Dft::new(dim),
            phases: half_phase_table(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dft.dim()
    }

    #[inline]
    fn ordering_phase(&self, q: usize, p: usize) -> C64 {
        let n = self.dim();
        self.phases[(q * p) % (2 * n)]
    }

    pub fn forward(&self, rho: &DensityMatrix) -> Result<ChordMatrix> {
        let n = self.dim();
        if rho.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rho.dim(),
            });
        }
        let data = rho.entries();
        let mut chi = vec![C64::new(0.0, 0.0); n * n];
        chi.par_chunks_mut(n)
            .enumerate()
            .for_each_init(
                || self.dft.make_scratch(),
                |scratch, (q, row)| {
                    for (m, slot) in row.iter_mut().enumerate() {
                        *slot = data[m * n + (m + n - q) % n];
                    }
                    self.dft.raw_forward(row, scratch);
                    for (p, slot) in row.iter_mut().enumerate() {
                        *slot *= self.ordering_phase(q, p);
                    }
                },
            );
        Ok(ChordMatrix { dim: n, chi })
    }

    /// `rho = (1/N) sum chi(Q,P) T(Q,P)`.
    pub fn inverse(&self, chord: &ChordMatrix) -> Result<DensityMatrix> {
        let n = self.dim();
        if chord.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: chord.dim(),
            });
        }
        let mut diagonals = chord.chi.clone();
        let inv_n = 1.0 / n as f64;
        diagonals
            .par_chunks_mut(n)
            .enumerate()
            .for_each_init(
                || self.dft.make_scratch(),
                |scratch, (q, row)| {
                    for (p, slot) in row.iter_mut().enumerate() {
                        *slot *= self.ordering_phase(q, p).conj();
                    }
                    self.dft.raw_inverse(row, scratch);
                    row.iter_mut().for_each(|a| *a *= inv_n);
                },
            );
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for q in 0..n {
            let row = &diagonals[q * n..(q + 1) * n];
            for (m, a) in row.iter().enumerate() {
                data[m * n + (m + n - q) % n] = *a;
            }
        }
        Ok(DensityMatrix::from_raw(n, data))
    }
}

pub fn rho_to_chord(rho: &DensityMatrix) -> ChordMatrix {
    ChordTransform::new(rho.dim())
        .forward(rho)
        .expect("transform built for this dimension")
}

pub fn chord_to_rho(chord: &ChordMatrix) -> DensityMatrix {
    ChordTransform::new(chord.dim())
        .inverse(chord)
        .expect("transform built for this dimension")
}
