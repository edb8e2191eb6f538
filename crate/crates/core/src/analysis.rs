//! Decay-rate extraction, analytic small-coupling predictions and parameter
//! sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::decoherence::{
    depolarizing_kernel, evolve_purity, gaussian_kernel, lorentz_kernel, mixture_kernel, Channel,
    DecoherenceKernel, ModelTag, PurityCurve,
};
use crate::dynamics::{MapParams, Propagator};
use crate::echo::{averaged_le, ensemble_center, EchoCurve, PerturbationSpec};
use crate::error::{Error, Result};
use crate::hilbert::{coherent_state, DensityMatrix, Space};

/// Minimum window length accepted by [`fit_decay_rate_with`].
pub const MIN_FIT_POINTS: usize = 4;

/// Smallest total log drop across the window that counts as decay.
pub const MIN_RESOLVED_DECAY: f64 = 1e-10;

/// A sampled decay curve at unit time steps starting from `t = 0`.
pub trait Curve {
    fn values(&self) -> &[f64];
}

impl Curve for [f64] {
    fn values(&self) -> &[f64] {
        self
    }
}

impl Curve for Vec<f64> {
    fn values(&self) -> &[f64] {
        self
    }
}

impl Curve for EchoCurve {
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Curve for PurityCurve {
    fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitOptions {
    /// First time step of the window.
    pub transient_skip: usize,
    /// Samples at or below `floor_factor * floor_hint` end the window.
    pub floor_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            transient_skip: 2,
            floor_factor: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Decay rate per map step.
    pub gamma: f64,
    pub stderr: f64,
    /// Inclusive window `(t1, t2)`.
    pub window: (usize, usize),
    pub n_points: usize,
    /// Mean of the samples after the window, or the hint when none remain.
    pub floor_estimate: f64,
}

/// Least-squares slope of `-ln(value)` against `t` over
/// `[transient_skip, t2]`, where `t2` closes the first run of samples above
/// `floor_factor * floor_hint`.
pub fn fit_decay_rate_with(curve: &(impl Curve + ?Sized), floor_hint: f64, options: &FitOptions) -> Result<RateFit> {
    let values = curve.values();
    let t1 = options.transient_skip;
    let threshold = options.floor_factor * floor_hint;
    let run = values
        .iter()
        .skip(t1)
        .take_while(|v| **v > threshold && **v > 0.0)
        .count();
    if run < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            got: run,
            need: MIN_FIT_POINTS,
        });
    }
    let t2 = t1 + run - 1;
    let (gamma, stderr) = least_squares_slope((t1..=t2).map(|t| (t as f64, -values[t].ln())));
    // a decay that stays at rounding level over the whole window is no decay
    if !(gamma * (t2 - t1) as f64 > MIN_RESOLVED_DECAY) {
        return Err(Error::NoDecay(gamma));
    }
    let tail = &values[t2 + 1..];
    let floor_estimate = if tail.is_empty() {
        floor_hint
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    Ok(RateFit {
        gamma,
        stderr,
        window: (t1, t2),
        n_points: run,
        floor_estimate,
    })
}

/// [`fit_decay_rate_with`] using the default floor factor.
pub fn fit_decay_rate(curve: &(impl Curve + ?Sized), floor_hint: f64, transient_skip: usize) -> Result<RateFit> {
    fit_decay_rate_with(
        curve,
        floor_hint,
        &FitOptions {
            transient_skip,
            ..FitOptions::default()
        },
    )
}

/// Ordinary least-squares slope and its standard error.
pub fn least_squares_slope(points: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = points.into_iter().collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if pts.len() > 2 {
        let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, stderr)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    least_squares_slope(points.iter().map(|(x, y)| (x.ln(), y.ln()))).0
}

/// Small-coupling GDM purity rate from nearest-neighbour translations:
/// `4 (E + 4E^2) / (1 + 4E)^2` with `E = exp(-2 pi^2 / (epsilon N)^2)`.
pub fn gdm_rate_prediction(epsilon: f64, dim: usize) -> f64 {
    let en = epsilon * dim as f64;
    let e = (-2.0 * std::f64::consts::PI.powi(2) / (en * en)).exp();
    4.0 * (e + 4.0 * e * e) / (1.0 + 4.0 * e).powi(2)
}

/// Small-coupling depolarizing purity rate `2 epsilon`.
pub fn dc_rate_prediction(epsilon: f64) -> f64 {
    2.0 * epsilon
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub control: f64,
    pub fit: Result<RateFit>,
    pub prediction: Option<f64>,
}

impl SweepRow {
    pub fn gamma(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.gamma)
    }
}

fn check_controls(controls: &[f64], what: &str) -> Result<()> {
    if controls.is_empty() {
        return Err(Error::Domain(format!("{what} list is empty")));
    }
    if let Some(c) = controls.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!("{what} values must be > 0, got {c}")));
    }
    Ok(())
}

/// Echo decay rate against `Sigma/hbar`. Rows follow input order; a failed
/// fit is recorded in its row.
pub fn sweep_echo(
    space: &Space,
    params: &MapParams,
    sigma_over_hbar: &[f64],
    t_max: usize,
    n_states: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<Vec<SweepRow>> {
    check_controls(sigma_over_hbar, "sigma_over_hbar")?;
    params.check_quantizable()?;
    let floor = 1.0 / space.dim() as f64;
    sigma_over_hbar
        .iter()
        .map(|&s| {
            let pert = PerturbationSpec::from_sigma_over_hbar(space, params.k, s);
            let curve = averaged_le(space, params, &pert, t_max, n_states, seed)?;
            Ok(SweepRow {
                control: s,
                fit: fit_decay_rate_with(&curve, floor, options),
                prediction: None,
            })
        })
        .collect()
}

/// Decoherence model family for purity sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PurityModel {
    Gaussian,
    Depolarizing,
    Lorentz { cutoff: usize },
    /// `weight * GDM + (1 - weight) * LDM` at the same epsilon.
    Mixture { weight: f64, cutoff: usize },
}

impl PurityModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            PurityModel::Gaussian => ModelTag::Gdm,
            PurityModel::Depolarizing => ModelTag::Dc,
            PurityModel::Lorentz { .. } => ModelTag::Ldm,
            PurityModel::Mixture { .. } => ModelTag::Mixture,
        }
    }

    pub fn kernel(&self, space: &Space, epsilon: f64) -> Result<DecoherenceKernel> {
        match *self {
            PurityModel::Gaussian => gaussian_kernel(space, epsilon),
            PurityModel::Depolarizing => depolarizing_kernel(space, epsilon),
            PurityModel::Lorentz { cutoff } => lorentz_kernel(space, epsilon, cutoff),
            PurityModel::Mixture { weight, cutoff } => mixture_kernel(
                &gaussian_kernel(space, epsilon)?,
                &lorentz_kernel(space, epsilon, cutoff)?,
                weight,
            ),
        }
    }

    pub fn prediction(&self, epsilon: f64, dim: usize) -> Option<f64> {
        match self {
            PurityModel::Gaussian => Some(gdm_rate_prediction(epsilon, dim)),
            PurityModel::Depolarizing => Some(dc_rate_prediction(epsilon)),
            _ => None,
        }
    }
}

/// Initial state shared by every row of a purity sweep.
pub fn purity_initial_state(space: &Space, seed: u64) -> Result<DensityMatrix> {
    let (q0, p0) = ensemble_center(seed, 0);
    Ok(DensityMatrix::from_pure(&coherent_state(space, q0, p0)?))
}

/// Purity curve for one sweep row; stops a few steps after the fit window
/// has closed.
pub fn purity_row_curve(
    space: &Space,
    prop: &Propagator,
    model: &PurityModel,
    epsilon: f64,
    rho0: &DensityMatrix,
    t_max: usize,
    options: &FitOptions,
) -> Result<Vec<f64>> {
    let channel = Channel::from_kernel(&model.kernel(space, epsilon)?)?;
    let threshold = options.floor_factor / space.dim() as f64;
    evolve_purity(rho0, prop, &channel, t_max, Some((threshold, 4)))
}

/// Purity decay rate against epsilon, all rows from one seeded coherent
/// state.
pub fn sweep_purity(
    space: &Space,
    params: &MapParams,
    model: &PurityModel,
    epsilon: &[f64],
    t_max: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<Vec<SweepRow>> {
    check_controls(epsilon, "epsilon")?;
    let prop = Propagator::new(*space, *params)?;
    let rho0 = purity_initial_state(space, seed)?;
    let floor = 1.0 / space.dim() as f64;
    epsilon
        .par_iter()
        .map(|&eps| {
            let fit = purity_row_curve(space, &prop, model, eps, &rho0, t_max, options)
                .and_then(|v| fit_decay_rate_with(&v, floor, options));
            Ok(SweepRow {
                control: eps,
                fit,
                prediction: model.prediction(eps, space.dim()),
            })
        })
        .collect()
}
