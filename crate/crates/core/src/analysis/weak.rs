//! Weak-error curves |E phi(X_n) - u^1(x, n eta)| and their uniformity in n.

use serde::Serialize;

use super::fit::{log2_slope, LineFit};
use super::stats::median;
use crate::error::{Error, Result};
use crate::expansion::{truncated_series, Method};
use crate::model::{StochasticGradientFamily, TestFunction};
use crate::sgd::{mc_estimate_at, ChainConfig, EstimateWithError, VarianceReduction};

/// Errors below this many standard errors are indistinguishable from noise.
pub const NOISE_FLOOR_SIGMAS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakErrorSettings {
    pub x: Vec<f64>,
    /// Fixed horizon T = n * eta.
    pub horizon: f64,
    /// Strictly decreasing step sizes.
    pub eta_grid: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub variance_reduction: VarianceReduction,
    pub method: Method,
    /// Step-size cap of an attached certificate; larger steps are flagged.
    pub eta0: Option<f64>,
    /// Radius of the guard ball around the minimizer.
    pub guard_radius: Option<f64>,
}

impl WeakErrorSettings {
    pub fn new(x: Vec<f64>, horizon: f64, eta_grid: Vec<f64>, n_samples: u64, seed: u64) -> Self {
        Self {
            x,
            horizon,
            eta_grid,
            n_samples,
            seed,
            variance_reduction: VarianceReduction::Antithetic,
            method: Method::Numeric,
            eta0: None,
            guard_radius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakErrorPoint {
    pub eta: f64,
    pub n_steps: usize,
    pub mc: EstimateWithError,
    pub u0: f64,
    pub u1: f64,
    pub u_trunc: f64,
    pub error: f64,
    pub noise_floor: bool,
    pub outside_certificate: bool,
    pub escaped_trajectories: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakErrorCurve {
    pub eta_grid: Vec<f64>,
    pub errors: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub points: Vec<WeakErrorPoint>,
    /// Fit over every point above the noise floor.
    pub fit: Option<LineFit>,
    /// Fit restricted further to steps inside the certificate.
    pub fit_certified: Option<LineFit>,
    pub warnings: Vec<String>,
}

impl WeakErrorCurve {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// n with n * eta = horizon, rejecting grids where T / eta is not integral.
pub fn steps_for_horizon(horizon: f64, eta: f64) -> Result<usize> {
    let r = horizon / eta;
    let n = r.round();
    if (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a multiple of eta = {eta}")));
    }
    Ok(n as usize)
}

/// Fits points that clear the noise floor and reports every exclusion.
pub fn fit_weak_error_points(points: &[WeakErrorPoint]) -> (Option<LineFit>, Option<LineFit>, Vec<String>) {
    let mut warnings = Vec::new();
    for p in points {
        if p.noise_floor {
            warnings.push(format!(
                "noise floor: eta = {} has error {:.3e} below {} standard errors ({:.3e}); excluded from fit",
                p.eta, p.error, NOISE_FLOOR_SIGMAS, p.mc.std_error
            ));
        }
        if p.outside_certificate {
            warnings.push(format!("outside certificate: eta = {} exceeds eta0", p.eta));
        }
        if p.escaped_trajectories > 0 {
            warnings.push(format!(
                "escaped ball: {} trajectories left the guard ball at eta = {}",
                p.escaped_trajectories, p.eta
            ));
        }
    }
    let fit_of = |keep: &dyn Fn(&WeakErrorPoint) -> bool| {
        let (e, r): (Vec<f64>, Vec<f64>) = points.iter().filter(|p| keep(p)).map(|p| (p.eta, p.error)).unzip();
        log2_slope(&e, &r).ok()
    };
    let all = fit_of(&|p| !p.noise_floor);
    let certified = if points.iter().any(|p| p.outside_certificate) {
        fit_of(&|p| !p.noise_floor && !p.outside_certificate)
    } else {
        all
    };
    if all.is_none() {
        warnings.push("fewer than two points above the noise floor; no slope fitted".into());
    }
    (all, certified, warnings)
}

fn make_point(
    eta: f64,
    n_steps: usize,
    mc: EstimateWithError,
    series: &crate::expansion::ExpansionEvaluation,
    eta0: Option<f64>,
    escaped: u64,
) -> WeakErrorPoint {
    let error = (mc.value - series.u_trunc).abs();
    WeakErrorPoint {
        eta,
        n_steps,
        mc,
        u0: series.u0,
        u1: series.u1,
        u_trunc: series.u_trunc,
        error,
        noise_floor: error < NOISE_FLOOR_SIGMAS * mc.std_error,
        outside_certificate: eta0.is_some_and(|c| eta > c),
        escaped_trajectories: escaped,
    }
}

/// For each eta: |mc_estimate(x, T/eta) - u^1(x, T)|, with trajectory i
/// driven by the same noise stream at every eta.
pub fn weak_error_experiment(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    settings: &WeakErrorSettings,
) -> Result<WeakErrorCurve> {
    let grid = &settings.eta_grid;
    if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eta grid must be positive and strictly decreasing".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &eta in grid {
        let n = steps_for_horizon(settings.horizon, eta)?;
        let mut cfg = ChainConfig::new(eta, n, settings.x.clone(), settings.seed)
            .with_variance_reduction(settings.variance_reduction);
        if let Some(r) = settings.guard_radius {
            cfg = cfg.with_guard(family.minimizer().to_vec(), r);
        }
        let out = mc_estimate_at(&cfg, family, phi, &[n], settings.n_samples)?;
        let series = truncated_series(&settings.x, settings.horizon, eta, phi, family, settings.method)?;
        points.push(make_point(eta, n, out.estimates[0], &series, settings.eta0, out.escaped_trajectories));
    }
    let (fit, fit_certified, warnings) = fit_weak_error_points(&points);
    Ok(WeakErrorCurve {
        eta_grid: grid.clone(),
        errors: points.iter().map(|p| p.error).collect(),
        std_errors: points.iter().map(|p| p.mc.std_error).collect(),
        points,
        fit,
        fit_certified,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub eta: f64,
    pub points: Vec<WeakErrorPoint>,
    pub max_error: f64,
    /// Median over points above the noise floor (all points if none clear it).
    pub median_error: f64,
    pub last_error: f64,
    /// Error at the largest n is at most twice the median.
    pub no_growth: bool,
    pub warnings: Vec<String>,
}

impl UniformityReport {
    pub fn error_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n_steps == n).map(|p| p.error)
    }
}

/// |E phi(X_n) - u^1(x, n eta)| at every n in `n_list` from one set of
/// trajectories.
#[allow(clippy::too_many_arguments)]
pub fn uniformity_check(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    x: &[f64],
    eta: f64,
    n_list: &[usize],
    n_samples: u64,
    seed: u64,
    variance_reduction: VarianceReduction,
    method: Method,
) -> Result<UniformityReport> {
    let cfg = ChainConfig::new(eta, 0, x.to_vec(), seed).with_variance_reduction(variance_reduction);
    let out = mc_estimate_at(&cfg, family, phi, n_list, n_samples)?;
    let mut points = Vec::with_capacity(n_list.len());
    for (&n, est) in n_list.iter().zip(&out.estimates) {
        let series = truncated_series(x, n as f64 * eta, eta, phi, family, method)?;
        points.push(make_point(eta, n, *est, &series, None, 0));
    }
    let errors: Vec<f64> = points.iter().map(|p| p.error).collect();
    let above: Vec<f64> = points.iter().filter(|p| !p.noise_floor).map(|p| p.error).collect();
    let median_error = if above.is_empty() { median(&errors) } else { median(&above) };
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let last_error = *errors.last().expect("nonempty n list");
    let warnings = points
        .iter()
        .filter(|p| p.noise_floor)
        .map(|p| format!("noise floor at n = {}: error {:.3e}, std error {:.3e}", p.n_steps, p.error, p.mc.std_error))
        .collect();
    Ok(UniformityReport {
        eta,
        points,
        max_error,
        median_error,
        last_error,
        no_growth: last_error <= 2.0 * median_error || max_error == 0.0,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, observable_by_id};

    fn synthetic(eta: f64, error: f64) -> WeakErrorPoint {
        let mc = EstimateWithError {
            value: error,
            std_error: 0.0,
            n_samples: 2,
        };
        let series = crate::expansion::ExpansionEvaluation {
            x: vec![0.0],
            t: 1.0,
            eta,
            u0: 0.0,
            u1: 0.0,
            u_trunc: 0.0,
            method: Method::Numeric,
        };
        make_point(eta, 1, mc, &series, Some(0.3), 0)
    }

    #[test]
    fn synthetic_square_law_has_slope_two() {
        let pts: Vec<_> = [0.5, 0.25, 0.125, 0.0625].iter().map(|&e| synthetic(e, 0.3 * e * e)).collect();
        let (all, cert, warnings) = fit_weak_error_points(&pts);
        assert!((all.unwrap().slope - 2.0).abs() < 1e-12);
        assert!((cert.unwrap().slope - 2.0).abs() < 1e-12);
        assert_eq!(cert.unwrap().n_points, 3);
        assert!(warnings.iter().any(|w| w.contains("outside certificate")));
    }

    #[test]
    fn horizon_must_be_a_multiple() {
        assert_eq!(steps_for_horizon(5.0, 0.0625).unwrap(), 80);
        assert!(steps_for_horizon(5.0, 0.3).is_err());
    }

    #[test]
    fn frozen_chain_has_no_error() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let r = uniformity_check(&fam, &sin, &[1.0], 0.0, &[1, 5, 20], 100, 1, VarianceReduction::Plain, Method::ClosedForm)
            .unwrap();
        assert!(r.points.iter().all(|p| p.error == 0.0));
        assert!(r.no_growth);
    }

    #[test]
    fn grid_must_decrease() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let s = WeakErrorSettings::new(vec![1.0], 1.0, vec![0.25, 0.5], 100, 1);
        assert!(weak_error_experiment(&fam, &sin, &s).is_err());
    }

    #[test]
    fn crn_curve_is_reproducible() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let s = WeakErrorSettings::new(vec![1.0], 1.0, vec![0.5, 0.25], 2000, 9);
        let a = weak_error_experiment(&fam, &sin, &s).unwrap();
        let b = weak_error_experiment(&fam, &sin, &s).unwrap();
        assert_eq!(a, b);
    }
}
