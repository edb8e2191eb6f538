//! Translation-covariant decoherence channels
//! `D(rho) = sum_{q,p} c(q,p) T(q,p) rho T(q,p)^dag` and purity evolution
//! under `rho -> D(U rho U^dag)`.
//!
//! Because conjugation by `T(q,p)` multiplies `T(Q,P)` by a phase, `D` is
//! diagonal on chord functions: `chi'(Q,P) = c_hat(Q,P) chi(Q,P)` with
//! `c_hat(Q,P) = sum c(q,p) exp(2 pi i (p Q - q P)/N)`. Each application is
//! therefore two chord transforms (`O(N^2 log N)`) instead of an `O(N^4)`
//! Kraus sum.
//!
//! Kernels are indexed by translations reduced mod N; periodized kernels sum
//! images around the centered representative in `(-N/2, N/2]`, which keeps
//! them exactly symmetric under `(q,p) -> (-q,-p)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dynamics::{MapParams, Propagator};
use crate::error::{Error, Result};
use crate::hilbert::{ChordTransform, DensityMatrix, Dft, PureState, Space, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Identity,
    Gdm,
    Dc,
    Ldm,
    Mixture,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Identity => "identity",
            ModelTag::Gdm => "gdm",
            ModelTag::Dc => "dc",
            ModelTag::Ldm => "ldm",
            ModelTag::Mixture => "mixture",
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default image cutoff for the Lorentzian periodization.
pub const LDM_DEFAULT_CUTOFF: usize = 100;

/// Translation probabilities `c(q,p)`, row-major in `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceKernel {
    space: Space,
    weights: Vec<f64>,
    epsilon: f64,
    model: ModelTag,
}

impl DecoherenceKernel {
    /// Checks nonnegativity, unit sum and point symmetry within `tol`.
    pub fn from_weights(space: Space, weights: Vec<f64>, epsilon: f64, model: ModelTag, tol: f64) -> Result<Self> {
        let n = space.dim();
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Inconsistent(format!("negative or non-finite weight {w}")));
        }
        let sum = compensated_sum(&weights);
        if (sum - 1.0).abs() > tol {
            return Err(Error::Inconsistent(format!("weights sum to {sum}")));
        }
        let kernel = DecoherenceKernel {
            space,
            weights,
            epsilon,
            model,
        };
        let asym = kernel.asymmetry();
        if asym > tol {
            return Err(Error::Inconsistent(format!("kernel not point symmetric (defect {asym:.3e})")));
        }
        Ok(kernel)
    }

    /// Delta at the origin: no decoherence.
    pub fn identity(space: Space) -> Self {
        let n = space.dim();
        let mut weights = vec![0.0; n * n];
        weights[0] = 1.0;
        DecoherenceKernel {
            space,
            weights,
            epsilon: 0.0,
            model: ModelTag::Identity,
        }
    }

    #[inline]
    pub fn space(&self) -> &Space {
        &self.space
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn model(&self) -> ModelTag {
        self.model
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `c(q, p)` with both shifts reduced mod N.
    pub fn weight(&self, q: i64, p: i64) -> f64 {
        let n = self.space.dim() as i64;
        self.weights[(q.rem_euclid(n) * n + p.rem_euclid(n)) as usize]
    }

    /// `max |c(q,p) - c(-q,-p)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.space.dim();
        let mut worst: f64 = 0.0;
        for q in 0..n {
            for p in 0..n {
                let a = self.weights[q * n + p];
                let b = self.weights[((n - q) % n) * n + (n - p) % n];
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Total weight, summed with Neumaier compensation.
    pub fn weight_sum(&self) -> f64 {
        compensated_sum(&self.weights)
    }

    fn normalized(space: Space, mut weights: Vec<f64>, epsilon: f64, model: ModelTag) -> Self {
        let sum = compensated_sum(&weights);
        weights.iter_mut().for_each(|w| *w /= sum);
        DecoherenceKernel {
            space,
            weights,
            epsilon,
            model,
        }
    }
}

fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Fills an `N x N` table from values on the fundamental octant
/// `0 <= dq <= dp <= N/2`, using `f(dq, dp) = f(dp, dq)` and sign symmetry.
fn fill_from_octant(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let half = n / 2;
    let mut out = vec![0.0; n * n];
    for dq in 0..=half {
        for dp in dq..=half {
            let v = f(dq, dp);
            for (a, b) in [(dq, dp), (dp, dq)] {
                for q in [a, (n - a) % n] {
                    for p in [b, (n - b) % n] {
                        out[q * n + p] = v;
                    }
                }
            }
        }
    }
    out
}

/// Gaussian diffusion with width `N epsilon / (2 pi)` in grid cells, summed
/// over torus images until the tail is below `1e-14` of the peak.
pub fn gaussian_kernel(space: &Space, epsilon: f64) -> Result<DecoherenceKernel> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("GDM epsilon must be > 0, got {epsilon}")));
    }
    let n = space.dim();
    let nf = n as f64;
    let width = nf * epsilon / (2.0 * PI);
    // exp(-r^2 / 2 w^2) < 1e-14 beyond r = w sqrt(2 ln 1e14)
    let reach = width * (2.0 * 14.0 * std::f64::consts::LN_10).sqrt();
    let images = (reach / nf).ceil() as i64 + 1;
    let profile: Vec<f64> = (0..=n / 2)
        .map(|d| {
            (-images..=images)
                .map(|j| {
                    let x = d as f64 - nf * j as f64;
                    (-x * x / (2.0 * width * width)).exp()
                })
                .sum()
        })
        .collect();
    let weights = fill_from_octant(n, |dq, dp| profile[dq] * profile[dp]);
    Ok(DecoherenceKernel::normalized(*space, weights, epsilon, ModelTag::Gdm))
}

/// Depolarizing channel: stay with probability `1 - epsilon`, otherwise one
/// of the `N^2 - 1` nontrivial translations uniformly.
pub fn depolarizing_kernel(space: &Space, epsilon: f64) -> Result<DecoherenceKernel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("DC epsilon must lie in [0,1], got {epsilon}")));
    }
    let n = space.dim();
    if n == 1 {
        return Ok(DecoherenceKernel {
            epsilon,
            model: ModelTag::Dc,
            ..DecoherenceKernel::identity(*space)
        });
    }
    let off = epsilon / ((n * n - 1) as f64);
    let mut weights = vec![off; n * n];
    weights[0] = 1.0 - epsilon;
    Ok(DecoherenceKernel {
        space: *space,
        weights,
        epsilon,
        model: ModelTag::Dc,
    })
}

/// Lorentzian `w / (w^2 + r^2)` with `w = N epsilon / (2 pi)`, summed over the
/// `(2x+1)^2` torus images `|j|, |k| <= image_cutoff`.
pub fn lorentz_kernel(space: &Space, epsilon: f64, image_cutoff: usize) -> Result<DecoherenceKernel> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("LDM epsilon must be > 0, got {epsilon}")));
    }
    if image_cutoff < 10 {
        return Err(Error::Domain(format!("LDM image cutoff must be >= 10, got {image_cutoff}")));
    }
    let n = space.dim();
    let nf = n as f64;
    let w = nf * epsilon / (2.0 * PI);
    let x = image_cutoff as i64;
    let sq = |d: usize| -> Vec<f64> {
        (-x..=x)
            .map(|j| {
                let t = d as f64 - nf * j as f64;
                t * t
            })
            .collect()
    };
    let rows: Vec<Vec<f64>> = (0..=n / 2).map(sq).collect();
    let w2 = w * w;
    let weights = fill_from_octant(n, |dq, dp| {
        let bp = &rows[dp];
        let mut acc = 0.0;
        for aq in &rows[dq] {
            let a = w2 + aq;
            acc += bp.iter().map(|b| 1.0 / (a + b)).sum::<f64>();
        }
        w * acc
    });
    Ok(DecoherenceKernel::normalized(*space, weights, epsilon, ModelTag::Ldm))
}

/// `weight * first + (1 - weight) * second`.
pub fn mixture_kernel(first: &DecoherenceKernel, second: &DecoherenceKernel, weight: f64) -> Result<DecoherenceKernel> {
    if first.space != second.space {
        return Err(Error::DimensionMismatch {
            expected: first.space.dim(),
            got: second.space.dim(),
        });
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::Domain(format!("mixture weight must lie in [0,1], got {weight}")));
    }
    let weights = match weight {
        w if w == 1.0 => first.weights.clone(),
        w if w == 0.0 => second.weights.clone(),
        w => first
            .weights
            .iter()
            .zip(&second.weights)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect(),
    };
    Ok(DecoherenceKernel {
        space: first.space,
        weights,
        epsilon: first.epsilon,
        model: ModelTag::Mixture,
    })
}

/// Real chord-space multiplier `c_hat(Q, P)`, row-major in `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChordMultiplier {
    dim: usize,
    values: Vec<f64>,
}

impl ChordMultiplier {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, q: usize, p: usize) -> f64 {
        self.values[q * self.dim + p]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Two-dimensional DFT of the kernel; fails if the kernel's asymmetry leaves
/// an imaginary residue above `1e-8`.
pub fn chord_multiplier(kernel: &DecoherenceKernel) -> Result<ChordMultiplier> {
    let n = kernel.space.dim();
    let dft = Dft::new(n);
    let mut scratch = dft.make_scratch();
    let mut buf: Vec<C64> = kernel.weights.iter().map(|&w| C64::new(w, 0.0)).collect();
    // sum_p c(q,p) exp(+2 pi i p Q / N) along each row q
    for row in buf.chunks_mut(n) {
        dft.raw_inverse(row, &mut scratch);
    }
    let mut t = vec![C64::new(0.0, 0.0); n * n];
    for q in 0..n {
        for big_q in 0..n {
            t[big_q * n + q] = buf[q * n + big_q];
        }
    }
    // sum_q (...) exp(-2 pi i q P / N) along each row Q
    for row in t.chunks_mut(n) {
        dft.raw_forward(row, &mut scratch);
    }
    let residue = t.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > 1e-8 {
        return Err(Error::Inconsistent(format!(
            "chord multiplier has imaginary residue {residue:.3e}; kernel is not symmetric"
        )));
    }
    Ok(ChordMultiplier {
        dim: n,
        values: t.into_iter().map(|z| z.re).collect(),
    })
}

/// Chord transform plus multiplier, reusable across steps.
#[derive(Clone, Debug)]
pub struct Channel {
    transform: ChordTransform,
    multiplier: ChordMultiplier,
}

impl Channel {
    pub fn new(multiplier: ChordMultiplier) -> Self {
        Channel {
            transform: ChordTransform::new(multiplier.dim()),
            multiplier,
        }
    }

    pub fn from_kernel(kernel: &DecoherenceKernel) -> Result<Self> {
        Ok(Channel::new(chord_multiplier(kernel)?))
    }

    pub fn multiplier(&self) -> &ChordMultiplier {
        &self.multiplier
    }

    /// Applies the channel; also returns the purity of the result, read off
    /// the chord function.
    pub fn apply_with_purity(&self, rho: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
        let mut chi = self.transform.forward(rho)?;
        chi.values_mut()
            .iter_mut()
            .zip(&self.multiplier.values)
            .for_each(|(c, m)| *c *= m);
        let purity = chi.purity();
        Ok((self.transform.inverse(&chi)?, purity))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(self.apply_with_purity(rho)?.0)
    }
}

pub fn apply_decoherence(rho: &DensityMatrix, mult: &ChordMultiplier) -> Result<DensityMatrix> {
    if rho.dim() != mult.dim() {
        return Err(Error::DimensionMismatch {
            expected: mult.dim(),
            got: rho.dim(),
        });
    }
    Channel::new(mult.clone()).apply(rho)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PurityMeta {
    pub dim: usize,
    pub params: MapParams,
    pub epsilon: f64,
    pub model: ModelTag,
}

/// `P(t) = tr(rho_t^2)` for `t = 0..=t_max` (or fewer when stopped early).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PurityCurve {
    pub values: Vec<f64>,
    pub meta: PurityMeta,
}

/// Iterates `rho -> D(U rho U^dag)` from `rho0`. With `stop_below` set, the
/// run ends `extra` steps after the purity first drops below the threshold.
pub fn evolve_purity(
    rho0: &DensityMatrix,
    prop: &Propagator,
    channel: &Channel,
    t_max: usize,
    stop_below: Option<(f64, usize)>,
) -> Result<Vec<f64>> {
    if t_max < 1 {
        return Err(Error::Domain("t_max must be at least 1".into()));
    }
    prop.space().check(rho0.dim())?;
    let mut rho = rho0.clone();
    let mut values = Vec::with_capacity(t_max + 1);
    values.push(rho.purity());
    let mut remaining: Option<usize> = None;
    for _ in 0..t_max {
        let (next, purity) = channel.apply_with_purity(&prop.conjugate(&rho)?)?;
        rho = next;
        values.push(purity);
        match (&mut remaining, stop_below) {
            (Some(0), _) => break,
            (Some(r), _) => *r -= 1,
            (None, Some((threshold, extra))) if purity < threshold => {
                if extra == 0 {
                    break;
                }
                remaining = Some(extra - 1);
            }
            _ => {}
        }
    }
    Ok(values)
}

pub fn purity_curve(
    psi0: &PureState,
    prop: &Propagator,
    kernel: &DecoherenceKernel,
    t_max: usize,
) -> Result<PurityCurve> {
    if kernel.space() != prop.space() {
        return Err(Error::DimensionMismatch {
            expected: prop.space().dim(),
            got: kernel.space().dim(),
        });
    }
    let channel = Channel::from_kernel(kernel)?;
    let values = evolve_purity(&DensityMatrix::from_pure(psi0), prop, &channel, t_max, None)?;
    Ok(PurityCurve {
        values,
        meta: PurityMeta {
            dim: prop.space().dim(),
            params: *prop.params(),
            epsilon: kernel.epsilon(),
            model: kernel.model(),
        },
    })
}
