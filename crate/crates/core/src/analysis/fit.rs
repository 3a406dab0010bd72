use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least-squares line y = intercept + slope * x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope from the t distribution on n - 2 degrees
    /// of freedom; infinite when only two points are fitted.
    pub slope_ci: (f64, f64),
    pub n_points: usize,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DimensionMismatch { expected: n, got: ys.len() });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("a line fit needs two points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("fit data must be finite".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_ci = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let se = (rss / (n - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
            .expect("valid degrees of freedom")
            .inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_ci,
        n_points: n,
    })
}

/// Slope of log2(error) against log2(eta).
pub fn log2_slope(etas: &[f64], errors: &[f64]) -> Result<LineFit> {
    if etas.iter().chain(errors).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = etas.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.log2()).collect();
    least_squares(&lx, &ly)
}

/// Exponential rate r in y ~ C e^{-r t}: minus the slope of ln y against t.
pub fn decay_rate(ts: &[f64], values: &[f64]) -> Result<LineFit> {
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("decay fit needs positive values".into()));
    }
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mut fit = least_squares(ts, &ly)?;
    fit.slope = -fit.slope;
    fit.slope_ci = (-fit.slope_ci.1, -fit.slope_ci.0);
    Ok(fit)
}
