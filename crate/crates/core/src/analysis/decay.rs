//! Exponential relaxation of u0 and u1 towards their limits phi(x*) and phi1.

use serde::Serialize;

use super::fit::{decay_rate, LineFit};
use crate::error::{Error, Result};
use crate::expansion::{phi1_limit, u0_eval, u1_eval, Method};
use crate::model::{local_constants, StochasticGradientFamily, TestFunction};

pub const DECAY_GRID_POINTS: usize = 41;
/// Fraction of gamma the fitted u1 rate has to reach.
pub const RATE_FRACTION: f64 = 0.9;
const NORM_GRID_POINTS: usize = 2001;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub radius: f64,
    pub gamma: f64,
    /// sup |phi| + sup |phi'| on the ball.
    pub phi_c1_norm: f64,
    pub phi_star: f64,
    pub phi1: f64,
    pub times: Vec<f64>,
    /// sup over the grid of |u0(x, t) - phi(x*)|.
    pub u0_residual: Vec<f64>,
    /// R ||phi||_{C1} e^{-gamma t}.
    pub u0_bound: Vec<f64>,
    /// sup over the grid of |u1(x, t) - phi1|.
    pub u1_residual: Vec<f64>,
    /// C e^{-0.9 gamma t} with C matched at the first time.
    pub u1_envelope: Vec<f64>,
    /// Decay-rate fit of the u1 residual over t >= 2 (slope is the rate).
    pub u1_fit: Option<LineFit>,
    pub u1_fitted_rate: f64,
}

impl DecayReport {
    pub fn u0_within_bound(&self) -> bool {
        self.u0_residual.iter().zip(&self.u0_bound).all(|(r, b)| r <= b)
    }

    pub fn u1_within_envelope(&self) -> bool {
        self.u1_residual.iter().zip(&self.u1_envelope).all(|(r, b)| *r <= b * (1.0 + 1e-9))
    }

    pub fn u1_rate_ok(&self) -> bool {
        self.u1_fitted_rate >= RATE_FRACTION * self.gamma
    }
}

fn ball_grid(center: f64, radius: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center + radius * (2.0 * k as f64 / (n - 1) as f64 - 1.0)).collect()
}

/// Sup-norm residuals of u0 and u1 over a 41-point grid of B(x*, R) at each
/// of `times`, with gamma the local convexity constant on that ball.
pub fn expansion_decay(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    radius: f64,
    times: &[f64],
    method: Method,
) -> Result<DecayReport> {
    if family.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: family.dim(),
        });
    }
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("decay times must be positive".into()));
    }
    let center = family.minimizer()[0];
    let gamma = local_constants(family, radius).gamma;
    let phi_c1_norm = {
        let g = ball_grid(center, radius, NORM_GRID_POINTS);
        let sup = |h: &dyn Fn(f64) -> f64| g.iter().map(|&x| h(x).abs()).fold(0.0, f64::max);
        sup(&|x| phi.eval1(x)) + sup(&|x| phi.d1(x))
    };
    let phi_star = phi.eval1(center);
    let phi1 = phi1_limit(phi, family, None)?.value;
    let grid = ball_grid(center, radius, DECAY_GRID_POINTS);

    let mut u0_residual = Vec::with_capacity(times.len());
    let mut u1_residual = Vec::with_capacity(times.len());
    for &t in times {
        let (mut r0, mut r1) = (0.0f64, 0.0f64);
        for &x in &grid {
            r0 = r0.max((u0_eval(&[x], t, phi, family, method)? - phi_star).abs());
            r1 = r1.max((u1_eval(&[x], t, phi, family, method)? - phi1).abs());
        }
        u0_residual.push(r0);
        u1_residual.push(r1);
    }
    let u0_bound = times.iter().map(|t| radius * phi_c1_norm * (-gamma * t).exp()).collect();
    let rate = RATE_FRACTION * gamma;
    let c = u1_residual[0] * (rate * times[0]).exp();
    let u1_envelope = times.iter().map(|t| c * (-rate * t).exp()).collect();
    let (ts, rs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&u1_residual)
        .filter(|(t, r)| **t >= 2.0 && **r > 0.0)
        .map(|(t, r)| (*t, *r))
        .unzip();
    let u1_fit = decay_rate(&ts, &rs).ok();
    Ok(DecayReport {
        radius,
        gamma,
        phi_c1_norm,
        phi_star,
        phi1,
        times: times.to_vec(),
        u0_residual,
        u0_bound,
        u1_residual,
        u1_envelope,
        u1_fitted_rate: u1_fit.map_or(f64::NAN, |f| f.slope),
        u1_fit,
    })
}
