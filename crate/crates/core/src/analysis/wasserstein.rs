//! Empirical Wasserstein-2 distances in one dimension and the contraction
//! of two chains started at different points.

use rayon::prelude::*;
use serde::Serialize;

use super::fit::{least_squares, LineFit};
use crate::error::{Error, Result};
use crate::model::{local_constants, LocalConstants, StochasticGradientFamily};
use crate::sgd::{dist, ChainConfig, Walker};

/// `k` order statistics of `sorted` at the midpoints of k equal-mass cells.
fn systematic_resample(sorted: &[f64], k: usize) -> Vec<f64> {
    let m = sorted.len();
    (0..k)
        .map(|j| sorted[(((j as f64 + 0.5) * m as f64 / k as f64) as usize).min(m - 1)])
        .collect()
}

/// W2 between the empirical measures of `a` and `b` via the sorted coupling.
/// The larger set is first reduced to the size of the smaller one by
/// deterministic systematic resampling. Empty input gives NaN.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (mut sa, mut sb) = (sort(a), sort(b));
    let k = sa.len().min(sb.len());
    if sa.len() > k {
        sa = systematic_resample(&sa, k);
    }
    if sb.len() > k {
        sb = systematic_resample(&sb, k);
    }
    let ms: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / k as f64;
    ms.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W2DecayCurve {
    pub n_grid: Vec<usize>,
    pub w2_values: Vec<f64>,
    /// (1 - 2 gamma eta + eta^2 L^2)^{1/2} from the constants on the working ball.
    pub rho_ref: f64,
    /// rho_ref^n |x0_a - x0_b|.
    pub reference: Vec<f64>,
    /// Least-squares slope of ln W2 against n over the positive values.
    pub fitted_log_rate: Option<LineFit>,
    pub constants: LocalConstants,
    pub initial_distance: f64,
}

impl W2DecayCurve {
    pub fn reference_log_rate(&self) -> f64 {
        self.rho_ref.ln()
    }
}

/// Time-n laws of the chains from `x0_a` and `x0_b`, sampled with the
/// same noise stream for trajectory i of both chains.
pub fn w2_decay_experiment(
    family: &StochasticGradientFamily,
    eta: f64,
    x0_a: f64,
    x0_b: f64,
    n_grid: &[usize],
    n_samples: u64,
    seed: u64,
) -> Result<W2DecayCurve> {
    if family.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: family.dim(),
        });
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n grid must be nonempty and strictly increasing".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let radius = family.working_radius();
    for x in [x0_a, x0_b] {
        let distance = dist(&[x], family.minimizer());
        if distance > radius {
            return Err(Error::SupportOutsideBall { distance, radius });
        }
    }
    let cfg = ChainConfig::new(eta, 0, vec![x0_a], seed);
    let width = n_grid.len();
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.trajectory_rng(i);
            let mut walker = Walker::new(family, eta);
            let (mut a, mut b) = ([x0_a], [x0_b]);
            let mut out = vec![0.0; 2 * width];
            let mut n = 0;
            for (k, &target) in n_grid.iter().enumerate() {
                while n < target {
                    walker.draw(&mut rng);
                    walker.apply_current(&mut a);
                    walker.apply_current(&mut b);
                    n += 1;
                }
                out[k] = a[0];
                out[width + k] = b[0];
            }
            out
        })
        .collect();
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let w2_values: Vec<f64> = (0..width).map(|k| w2_empirical_1d(&column(k), &column(width + k))).collect();

    let constants = local_constants(family, radius);
    let rho_ref = constants.coupling_rate(eta).max(0.0).sqrt();
    let initial_distance = (x0_a - x0_b).abs();
    let reference = n_grid.iter().map(|&n| rho_ref.powi(n as i32) * initial_distance).collect();
    let (ns, logs): (Vec<f64>, Vec<f64>) = n_grid
        .iter()
        .zip(&w2_values)
        .filter(|(_, w)| **w > 0.0 && w.is_finite())
        .map(|(&n, w)| (n as f64, w.ln()))
        .unzip();
    Ok(W2DecayCurve {
        n_grid: n_grid.to_vec(),
        w2_values,
        rho_ref,
        reference,
        fitted_log_rate: least_squares(&ns, &logs).ok(),
        constants,
        initial_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, make_example2};
    use crate::rng::TrajectoryRng;

    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn permute(v: &mut Vec<usize>, k: usize, a: &[f64], b: &[f64], best: &mut f64) {
            if k == v.len() {
                let c: f64 = v.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).powi(2)).sum();
                *best = best.min(c);
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                permute(v, k + 1, a, b, best);
                v.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        permute(&mut (0..a.len()).collect(), 0, a, b, &mut best);
        (best / a.len() as f64).sqrt()
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(w2_empirical_1d(&[0.3, -1.0], &[-1.0, 0.3]), 0.0);
        assert_eq!(w2_empirical_1d(&[0.0], &[1.0]), 1.0);
        assert_eq!(w2_empirical_1d(&[0.0, 2.0], &[1.0, 3.0]), 1.0);
        assert_eq!(brute_force(&[0.0, 2.0], &[1.0, 3.0]), 1.0);
    }

    #[test]
    fn equals_exhaustive_assignment() {
        let mut rng = TrajectoryRng::new(77, 0);
        for instance in 0..50 {
            let k = 1 + instance % 6;
            let a: Vec<f64> = (0..k).map(|_| rng.gaussian()).collect();
            let b: Vec<f64> = (0..k).map(|_| 2.0 * rng.uniform() - 0.5).collect();
            assert!((w2_empirical_1d(&a, &b) - brute_force(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_sizes_are_resampled() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = (0..10).map(|i| i as f64 / 10.0 + 0.05).collect();
        assert!(w2_empirical_1d(&a, &b) < 1e-3);
    }

    #[test]
    fn identical_starts_have_zero_distance() {
        let c = w2_decay_experiment(&make_example2(), 0.1, 0.4, 0.4, &[1, 5, 10], 500, 3).unwrap();
        assert!(c.w2_values.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn example1_laws_are_translates() {
        let eta = 0.25;
        let c = w2_decay_experiment(&make_example1(), eta, 2.0, -1.0, &[0, 1, 4, 10], 2000, 5).unwrap();
        for (n, w) in c.n_grid.iter().zip(&c.w2_values) {
            let exact = (1.0 - eta).powi(*n as i32) * 3.0;
            assert!((w - exact).abs() < 1e-12, "n = {n}: {w} vs {exact}");
        }
        let fit = c.fitted_log_rate.unwrap();
        assert!((fit.slope - (1.0 - eta).ln()).abs() < 1e-12);
    }

    #[test]
    fn example2_decays_at_least_at_the_reference_rate() {
        let c = w2_decay_experiment(&make_example2(), 0.125, 0.9, -0.9, &[0, 2, 4, 8, 12, 16, 20], 20_000, 11).unwrap();
        for (w, r) in c.w2_values.iter().zip(&c.reference) {
            assert!(*w <= r * 1.02);
        }
        assert!(c.fitted_log_rate.unwrap().slope <= c.reference_log_rate() + 0.01);
    }

    #[test]
    fn starts_outside_the_ball_are_rejected() {
        assert!(w2_decay_experiment(&make_example2(), 0.1, 3.0, 0.0, &[1], 10, 1).is_err());
    }
}
