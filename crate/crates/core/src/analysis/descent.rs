//! Time for SGD to reach an O(eta) neighbourhood of the minimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{observable_by_id, StochasticGradientFamily};
use crate::sgd::{mc_estimate_at, ChainConfig, EstimateWithError, VarianceReduction};

/// ceil(ln(1/eta) / eta), at least 1.
pub fn descent_steps(eta: f64) -> usize {
    crate::sgd::recommended_burn_in(eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentRow {
    pub eta: f64,
    pub n_star: usize,
    /// E f(X_{n*}) - f(x*).
    pub gap: EstimateWithError,
    /// gap / eta.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentTable {
    pub x0: Vec<f64>,
    pub initial_gap: f64,
    pub rows: Vec<DescentRow>,
    /// max ratio / min ratio over the grid.
    pub ratio_spread: f64,
}

/// E f(X_n) - f(x*) at each n in `n_list` (strictly increasing).
pub fn f_gap_curve(
    family: &StochasticGradientFamily,
    eta: f64,
    x0: &[f64],
    n_list: &[usize],
    n_samples: u64,
    seed: u64,
    variance_reduction: VarianceReduction,
) -> Result<Vec<EstimateWithError>> {
    let f = observable_by_id("f-itself", family)?;
    let f_star = family.objective().value(family.minimizer());
    let cfg = ChainConfig::new(eta, 0, x0.to_vec(), seed).with_variance_reduction(variance_reduction);
    let out = mc_estimate_at(&cfg, family, &f, n_list, n_samples)?;
    Ok(out
        .estimates
        .into_iter()
        .map(|e| EstimateWithError {
            value: e.value - f_star,
            ..e
        })
        .collect())
}

/// For each eta: n* = ceil(ln(1/eta)/eta) and the expected objective gap there.
pub fn descent_time_experiment(
    family: &StochasticGradientFamily,
    eta_grid: &[f64],
    x0: &[f64],
    n_samples: u64,
    seed: u64,
    variance_reduction: VarianceReduction,
) -> Result<DescentTable> {
    if eta_grid.is_empty() || eta_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidParameter("descent-time step sizes must lie in (0, 1)".into()));
    }
    let mut rows = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let n_star = descent_steps(eta);
        let gap = f_gap_curve(family, eta, x0, &[n_star], n_samples, seed, variance_reduction)?[0];
        rows.push(DescentRow {
            eta,
            n_star,
            gap,
            ratio: gap.value / eta,
        });
    }
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    Ok(DescentTable {
        x0: x0.to_vec(),
        initial_gap: family.objective().value(x0) - family.objective().value(family.minimizer()),
        rows,
        ratio_spread: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_example1;

    #[test]
    fn noiseless_descent_is_geometric() {
        let e1 = make_example1();
        let gd = StochasticGradientFamily::noiseless("gd", e1.objective().clone());
        let t = descent_time_experiment(&gd, &[0.25, 0.125, 0.0625], &[2.0], 4, 1, VarianceReduction::Plain).unwrap();
        for r in &t.rows {
            let exact = (1.0 - r.eta).powi(2 * r.n_star as i32) * t.initial_gap;
            assert!((r.gap.value - exact).abs() < 1e-14);
            assert!(r.gap.value <= r.eta * r.eta * t.initial_gap);
        }
    }

    #[test]
    fn example1_gap_scales_with_eta() {
        let t = descent_time_experiment(&make_example1(), &[0.25, 0.125, 0.0625], &[1.0], 20_000, 3, VarianceReduction::Plain)
            .unwrap();
        assert!(t.ratio_spread < 3.0, "{:?}", t.rows);
        // stationary gap of the affine chain: eta / (8 (2 - eta))
        for r in &t.rows {
            let stationary = r.eta / (8.0 * (2.0 - r.eta));
            assert!((r.gap.value - stationary).abs() < 4.0 * r.gap.std_error + r.eta * r.eta * t.initial_gap);
        }
    }

    #[test]
    fn gap_plateaus() {
        let eta = 0.125;
        let n_star = descent_steps(eta);
        let g = f_gap_curve(&make_example1(), eta, &[1.0], &[n_star, 4 * n_star, 16 * n_star], 20_000, 9, VarianceReduction::Plain)
            .unwrap();
        for e in &g[1..] {
            assert!((e.value - g[0].value).abs() < 4.0 * (e.std_error + g[0].std_error) + 1e-3);
        }
    }

    #[test]
    fn descent_steps_formula() {
        assert_eq!(descent_steps(0.5), 2);
        assert_eq!(descent_steps(0.125), 17);
    }
}
