//! Local strong-convexity constants and the step-size cap that keeps the
//! chain inside a ball around the minimizer.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::family::{NoiseToken, StochasticGradientFamily};
use crate::error::{Error, Result};
use crate::rng::TrajectoryRng;

/// Grid points per dimension for one-dimensional Hessian sampling.
pub const GRID_POINTS_1D: usize = 201;
/// Quasi-random points used when d > 1.
pub const GRID_POINTS_ND: usize = 10_000;
/// Draws used to estimate `b` for infinite noise supports.
pub const NOISE_BOUND_DRAWS: usize = 10_000;
/// Noise draws used for Hessian extremes when the support is infinite.
const HESSIAN_NOISE_DRAWS: usize = 64;
const SAMPLING_SEED: u64 = 0x5eed_ce47;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityCertificate {
    pub gamma: f64,
    pub b: f64,
    /// sup over noise and ball of the Hessian spectral norm.
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub eta0: f64,
    /// `b` is an empirical supremum rather than an exact one.
    pub b_estimated: bool,
}

impl ConvexityCertificate {
    /// Contraction factor of the coupled squared distance per step.
    pub fn coupling_rate(&self, eta: f64) -> f64 {
        coupling_rate(self.gamma, self.lipschitz, eta)
    }

    pub fn admits(&self, eta: f64) -> bool {
        eta <= self.eta0
    }
}

/// Sampled constants on B(x*, R), without the confinement requirement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalConstants {
    pub gamma: f64,
    pub b: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub b_estimated: bool,
}

impl LocalConstants {
    pub fn coupling_rate(&self, eta: f64) -> f64 {
        coupling_rate(self.gamma, self.lipschitz, eta)
    }
}

/// 1 - 2 gamma eta + eta^2 L^2.
pub fn coupling_rate(gamma: f64, lipschitz: f64, eta: f64) -> f64 {
    1.0 - 2.0 * gamma * eta + eta * eta * lipschitz * lipschitz
}

pub fn r0_formula(gamma: f64, b: f64) -> f64 {
    16.0 * b / (3.0 * gamma)
}

/// min{1/(2 gamma), 3R/(8b), (3 gamma R^2/8 - 2bR)/(2 gamma b R + b^2)};
/// both noise branches are +inf when b = 0.
pub fn eta0_formula(gamma: f64, b: f64, radius: f64) -> f64 {
    let first = 1.0 / (2.0 * gamma);
    if b == 0.0 {
        return first;
    }
    let second = 3.0 * radius / (8.0 * b);
    let third = (3.0 * gamma * radius * radius / 8.0 - 2.0 * b * radius) / (2.0 * gamma * b * radius + b * b);
    first.min(second).min(third)
}

fn noise_tokens(family: &StochasticGradientFamily, draws: usize) -> (Vec<NoiseToken>, bool) {
    match family.support() {
        Some(s) => (s.iter().map(|(_, t)| t.clone()).collect(), false),
        None => {
            let mut rng = TrajectoryRng::new(SAMPLING_SEED, 0);
            let mut tok = NoiseToken::Zero;
            let tokens = (0..draws)
                .map(|_| {
                    family.sample_xi(&mut rng, &mut tok);
                    tok.clone()
                })
                .collect();
            (tokens, true)
        }
    }
}

/// Points of B(center, R): an equispaced grid in 1D, Halton points in the
/// ball otherwise.
pub fn ball_sample_points(center: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    if d == 1 {
        let n = GRID_POINTS_1D;
        return (0..n)
            .map(|i| vec![center[0] - radius + 2.0 * radius * i as f64 / (n - 1) as f64])
            .collect();
    }
    let primes = first_primes(d);
    let mut pts = Vec::with_capacity(GRID_POINTS_ND);
    let mut k = 1u64;
    while pts.len() < GRID_POINTS_ND {
        let u: Vec<f64> = primes.iter().map(|&p| 2.0 * radical_inverse(k, p) - 1.0).collect();
        k += 1;
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            pts.push(u.iter().zip(center).map(|(v, c)| c + radius * v).collect());
        }
    }
    pts
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if (2..c).take_while(|p| p * p <= c).all(|p| !c.is_multiple_of(p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// gamma (min Hessian eigenvalue), L (max spectral norm) and b on B(x*, R).
pub fn local_constants(family: &StochasticGradientFamily, radius: f64) -> LocalConstants {
    let d = family.dim();
    let center = family.minimizer().to_vec();

    let (b_tokens, b_estimated) = noise_tokens(family, NOISE_BOUND_DRAWS);
    let mut g = vec![0.0; d];
    let b = b_tokens
        .iter()
        .map(|xi| {
            family.stochastic_grad_into(&center, xi, &mut g);
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);

    let h_tokens = if b_estimated {
        b_tokens.into_iter().take(HESSIAN_NOISE_DRAWS).collect()
    } else {
        b_tokens
    };
    let mut h = vec![0.0; d * d];
    let mut gamma = f64::INFINITY;
    let mut lipschitz: f64 = 0.0;
    for x in ball_sample_points(&center, radius) {
        for xi in &h_tokens {
            family.stochastic_hess_into(&x, xi, &mut h);
            if d == 1 {
                gamma = gamma.min(h[0]);
                lipschitz = lipschitz.max(h[0].abs());
            } else {
                let m = DMatrix::from_row_slice(d, d, &h);
                let m = 0.5 * (&m + m.transpose());
                let eig = SymmetricEigen::new(m).eigenvalues;
                gamma = gamma.min(eig.min());
                lipschitz = lipschitz.max(eig.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
            }
        }
    }
    LocalConstants {
        gamma,
        b,
        lipschitz,
        radius,
        b_estimated,
    }
}

/// Certificate on B(x*, R) with R <= R1. The family is evaluated in
/// coordinates centred at its minimizer.
pub fn certify(family: &StochasticGradientFamily, radius: f64, r1: f64) -> Result<ConvexityCertificate> {
    if !(radius > 0.0) || radius > r1 {
        return Err(Error::InvalidParameter(format!(
            "working radius R = {radius} must lie in (0, R1 = {r1}]"
        )));
    }
    let c = local_constants(family, radius);
    if !(c.gamma > 0.0) {
        return Err(Error::NotStronglyConvex {
            min_eigenvalue: c.gamma,
        });
    }
    let r0 = r0_formula(c.gamma, c.b);
    if radius <= r0 {
        return Err(Error::RadiusTooSmall { radius, r0 });
    }
    Ok(ConvexityCertificate {
        gamma: c.gamma,
        b: c.b,
        lipschitz: c.lipschitz,
        r1,
        radius,
        r0,
        eta0: eta0_formula(c.gamma, c.b, radius),
        b_estimated: c.b_estimated,
    })
}

/// Certificate at the family's registered radii.
pub fn certify_default(family: &StochasticGradientFamily) -> Result<ConvexityCertificate> {
    certify(family, family.working_radius(), family.convexity_radius())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples::{make_example1, make_example2};
    use proptest::prelude::*;

    #[test]
    fn example1_radius_three() {
        let fam = make_example1().recentered();
        let c = certify(&fam, 3.0, f64::INFINITY).unwrap();
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.b, 0.5);
        assert!((c.r0 - 8.0 / 3.0).abs() < 1e-15);
        assert!((c.eta0 - 3.0 / 26.0).abs() < 1e-15);
        assert!(!c.b_estimated);
    }

    #[test]
    fn certify_translates_internally() {
        let a = certify(&make_example1(), 3.0, f64::INFINITY).unwrap();
        let b = certify(&make_example1().recentered(), 3.0, f64::INFINITY).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_radius_rejected() {
        let fam = make_example1().recentered();
        match certify(&fam, 2.0, f64::INFINITY) {
            Err(Error::RadiusTooSmall { r0, .. }) => assert!((r0 - 8.0 / 3.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn radius_beyond_convexity_radius_rejected() {
        assert!(matches!(
            certify(&make_example1(), 3.0, 2.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn noiseless_degenerates() {
        let fam = StochasticGradientFamily::noiseless("gd", make_example1().objective().clone());
        let c = certify(&fam, 1.0, f64::INFINITY).unwrap();
        assert_eq!(c.b, 0.0);
        assert_eq!(c.r0, 0.0);
        assert_eq!(c.eta0, 0.5);
    }

    #[test]
    fn example2_is_not_certifiable() {
        // gamma(R) = 1 - 0.6R and R0 = 8/(3 gamma(R)) never drop below R
        for r in [0.5, 1.0, 1.5] {
            assert!(matches!(
                certify(&make_example2(), r, 5.0 / 3.0),
                Err(Error::RadiusTooSmall { .. })
            ));
        }
        // beyond x = -5/3 the Hessian goes negative
        assert!(matches!(
            certify(&make_example2(), 2.0, 10.0),
            Err(Error::NotStronglyConvex { .. })
        ));
        let c = local_constants(&make_example2(), 1.0);
        assert!((c.gamma - 0.4).abs() < 1e-12);
        assert!((c.lipschitz - 1.6).abs() < 1e-12);
        assert_eq!(c.b, 0.5);
    }

    #[test]
    fn halton_points_fill_the_ball() {
        let pts = ball_sample_points(&[1.0, -1.0], 2.0);
        assert_eq!(pts.len(), GRID_POINTS_ND);
        assert!(pts
            .iter()
            .all(|p| ((p[0] - 1.0).powi(2) + (p[1] + 1.0).powi(2)).sqrt() <= 2.0 + 1e-12));
    }

    proptest! {
        #[test]
        fn eta0_never_increases_with_b(gamma in 0.1f64..5.0, b in 0.01f64..2.0, db in 0.0f64..1.0, slack in 1.01f64..4.0) {
            // R above R0 for the larger noise bound
            let radius = slack * r0_formula(gamma, b + db);
            prop_assert!(eta0_formula(gamma, b + db, radius) <= eta0_formula(gamma, b, radius));
        }
    }
}
