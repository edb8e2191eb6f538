//! Loschmidt echo `M(t) = |<psi| U_{k'}^{dag t} U_k^t |psi>|^2` and its
//! average over an ensemble of coherent states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{lyapunov_closed_form, Direction, MapParams, Propagator};
use crate::error::{Error, Result};
use crate::hilbert::{coherent_state, inner, PureState, Space};

/// Unperturbed and perturbed shear amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub k: f64,
    pub k_prime: f64,
    pub sigma: f64,
    pub sigma_over_hbar: f64,
}

impl PerturbationSpec {
    pub fn new(space: &Space, k: f64, k_prime: f64) -> Self {
        let sigma = k_prime - k;
        PerturbationSpec {
            k,
            k_prime,
            sigma,
            sigma_over_hbar: sigma / space.hbar(),
        }
    }

    /// `k' = k + (Sigma/hbar) / (2 pi N)`.
    pub fn from_sigma_over_hbar(space: &Space, k: f64, sigma_over_hbar: f64) -> Self {
        let sigma = sigma_over_hbar * space.hbar();
        PerturbationSpec {
            k,
            k_prime: k + sigma,
            sigma,
            sigma_over_hbar,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EchoMeta {
    pub dim: usize,
    pub params: MapParams,
    pub k: f64,
    pub k_prime: f64,
    pub n_states: usize,
    pub seed: Option<u64>,
}

/// `M(t)` for `t = 0..=t_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EchoCurve {
    pub values: Vec<f64>,
    pub meta: EchoMeta,
}

impl EchoCurve {
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn times(&self) -> impl Iterator<Item = usize> {
        0..self.values.len()
    }
}

/// Steps until an echo starting at one reaches the `1/N` floor at the
/// Lyapunov rate, with two steps of margin.
pub fn default_t_max(space: &Space, params: &MapParams) -> Result<usize> {
    let lambda = lyapunov_closed_form(params.a, params.b)?;
    Ok((((space.dim() as f64).ln() + 2.0) / lambda).ceil() as usize)
}

fn echo_values(psi0: &PureState, u: &Propagator, u_pert: &Propagator, t_max: usize) -> Vec<f64> {
    let mut scratch = u.make_scratch();
    let mut phi = psi0.amplitudes().to_vec();
    let mut phi_pert = phi.clone();
    let mut values = Vec::with_capacity(t_max + 1);
    values.push(inner(&phi_pert, &phi).norm_sqr());
    for _ in 0..t_max {
        u.apply_in_place(&mut phi, &mut scratch, Direction::Forward);
        u_pert.apply_in_place(&mut phi_pert, &mut scratch, Direction::Forward);
        values.push(inner(&phi_pert, &phi).norm_sqr());
    }
    values
}

fn propagator_pair(space: &Space, params: &MapParams, pert: &PerturbationSpec) -> Result<(Propagator, Propagator)> {
    let u = Propagator::new(*space, params.with_k(pert.k))?;
    let u_pert = Propagator::new(*space, params.with_k(pert.k_prime))?;
    Ok((u, u_pert))
}

pub fn le_curve(
    psi0: &PureState,
    space: &Space,
    params: &MapParams,
    pert: &PerturbationSpec,
    t_max: usize,
) -> Result<EchoCurve> {
    if t_max < 1 {
        return Err(Error::Domain("t_max must be at least 1".into()));
    }
    space.check(psi0.dim())?;
    let (u, u_pert) = propagator_pair(space, params, pert)?;
    Ok(EchoCurve {
        values: echo_values(psi0, &u, &u_pert, t_max),
        meta: EchoMeta {
            dim: space.dim(),
            params: params.with_k(pert.k),
            k: pert.k,
            k_prime: pert.k_prime,
            n_states: 1,
            seed: None,
        },
    })
}

/// Center of the `index`-th ensemble member: an independent ChaCha stream per
/// index, so the draw does not depend on evaluation order.
pub fn ensemble_center(seed: u64, index: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (rng.random::<f64>(), rng.random::<f64>())
}

/// Mean of `M(t)` over `n_states` coherent states with uniformly drawn
/// centers. Members run in parallel; the reduction is in index order.
pub fn averaged_le(
    space: &Space,
    params: &MapParams,
    pert: &PerturbationSpec,
    t_max: usize,
    n_states: usize,
    seed: u64,
) -> Result<EchoCurve> {
    if t_max < 1 {
        return Err(Error::Domain("t_max must be at least 1".into()));
    }
    if n_states == 0 {
        return Err(Error::Domain("n_states must be at least 1".into()));
    }
    let (u, u_pert) = propagator_pair(space, params, pert)?;
    let curves = (0..n_states as u64)
        .into_par_iter()
        .map(|i| {
            let (q0, p0) = ensemble_center(seed, i);
            let psi0 = coherent_state(space, q0, p0)?;
            Ok(echo_values(&psi0, &u, &u_pert, t_max))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; t_max + 1];
    for curve in &curves {
        for (acc, v) in values.iter_mut().zip(curve) {
            *acc += v;
        }
    }
    let inv = 1.0 / n_states as f64;
    values.iter_mut().for_each(|v| *v *= inv);
    Ok(EchoCurve {
        values,
        meta: EchoMeta {
            dim: space.dim(),
            params: params.with_k(pert.k),
            k: pert.k,
            k_prime: pert.k_prime,
            n_states,
            seed: Some(seed),
        },
    })
}
