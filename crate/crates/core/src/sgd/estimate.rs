use rayon::prelude::*;
use serde::Serialize;

use super::{ChainConfig, VarianceReduction, Walker};
use crate::error::{Error, Result};
use crate::model::{StochasticGradientFamily, TestFunction};

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Sample standard deviation over sqrt(n_samples).
    pub std_error: f64,
    /// Independent units averaged. Under antithetic sampling one unit is a
    /// pair of trajectories.
    pub n_samples: u64,
}

/// Running mean and centred sum of squares.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub(crate) fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
    }

    pub(crate) fn finish(&self) -> EstimateWithError {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        EstimateWithError {
            value: self.mean,
            std_error: (var.max(0.0) / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
        }
    }
}

const BLOCK: usize = 1024;

/// Evaluates `eval(unit, out)` for every unit and reduces each of the
/// `width` output slots. Blocks of consecutive units are summarised in
/// parallel and merged in index order, so the result does not depend on
/// the number of worker threads. `eval` returns a per-unit counter that is
/// summed alongside.
pub(crate) fn reduce_units<F>(n_units: u64, width: usize, eval: F) -> (Vec<Welford>, u64)
where
    F: Fn(u64, &mut [f64]) -> u64 + Sync,
{
    let n_blocks = n_units.div_ceil(BLOCK as u64);
    let blocks: Vec<(Vec<Welford>, u64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Welford::default(); width];
            let mut buf = vec![0.0; width];
            let mut count = 0;
            let end = ((b + 1) * BLOCK as u64).min(n_units);
            for u in b * BLOCK as u64..end {
                count += eval(u, &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    a.push(*v);
                }
            }
            (acc, count)
        })
        .collect();
    let mut total = vec![Welford::default(); width];
    let mut count = 0;
    for (acc, c) in &blocks {
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(a);
        }
        count += c;
    }
    (total, count)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McOutcome {
    pub checkpoints: Vec<usize>,
    pub estimates: Vec<EstimateWithError>,
    /// Trajectories that left the guard ball at least once.
    pub escaped_trajectories: u64,
    /// Trajectories whose final observable value was not finite.
    pub non_finite: u64,
}

pub(crate) fn units_for(cfg: &ChainConfig, n_samples: u64) -> Result<u64> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!("n_samples = {n_samples} must be at least 2")));
    }
    match cfg.variance_reduction {
        VarianceReduction::Plain => Ok(n_samples),
        VarianceReduction::Antithetic => {
            if !n_samples.is_multiple_of(2) || n_samples < 4 {
                return Err(Error::InvalidParameter(format!(
                    "antithetic sampling needs an even n_samples >= 4, got {n_samples}"
                )));
            }
            Ok(n_samples / 2)
        }
    }
}

/// E[phi(X_n)] for each n in `checkpoints` (ascending) from a single set of
/// trajectories. `cfg.n_steps` is ignored.
pub fn mc_estimate_at(
    cfg: &ChainConfig,
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    checkpoints: &[usize],
    n_samples: u64,
) -> Result<McOutcome> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be nonempty and strictly increasing".into()));
    }
    if cfg.x0.dim() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: cfg.x0.dim(),
        });
    }
    let units = units_for(cfg, n_samples)?;
    let per_unit = match cfg.variance_reduction {
        VarianceReduction::Plain => 1,
        VarianceReduction::Antithetic => 2,
    };
    let k = checkpoints.len();
    // slot k of the output holds the non-finite flag
    let (acc, escaped) = reduce_units(units, k + 1, |u, out| {
        out.fill(0.0);
        let mut escaped = 0;
        let mut walker = Walker::new(family, cfg.eta);
        for j in 0..per_unit {
            let mut rng = cfg.trajectory_rng(u * per_unit + j);
            let mut x = cfg.x0.draw(&mut rng);
            let mut left = false;
            let mut step = 0;
            for (slot, &target) in checkpoints.iter().enumerate() {
                while step < target {
                    walker.advance(&mut x, &mut rng);
                    if let Some(g) = &cfg.guard {
                        left |= !g.contains(&x);
                    }
                    step += 1;
                }
                let v = phi.value(&x);
                if !v.is_finite() {
                    out[k] = 1.0;
                }
                out[slot] += v / per_unit as f64;
            }
            escaped += left as u64;
        }
        escaped
    });
    let non_finite = (acc[k].finish().value * units as f64).round() as u64;
    Ok(McOutcome {
        checkpoints: checkpoints.to_vec(),
        estimates: acc[..k].iter().map(Welford::finish).collect(),
        escaped_trajectories: escaped,
        non_finite,
    })
}

/// E[phi(X_{n_steps})] over `n_samples` trajectories.
pub fn mc_estimate(
    cfg: &ChainConfig,
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    n_samples: u64,
) -> Result<EstimateWithError> {
    Ok(mc_estimate_at(cfg, family, phi, &[cfg.n_steps], n_samples)?.estimates[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, make_example2, observable_by_id};
    use crate::sgd::enumerate::exact_expectation;

    #[test]
    fn welford_merge_matches_single_pass() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut all = Welford::default();
        data.iter().for_each(|v| all.push(*v));
        let mut a = Welford::default();
        let mut b = Welford::default();
        data[..313].iter().for_each(|v| a.push(*v));
        data[313..].iter().for_each(|v| b.push(*v));
        a.merge(&b);
        let (x, y) = (all.finish(), a.finish());
        assert_eq!(x.n_samples, y.n_samples);
        assert!((x.value - y.value).abs() < 1e-12);
        assert!((x.std_error - y.std_error).abs() < 1e-12);
    }

    #[test]
    fn constant_observable_has_no_error() {
        let cfg = ChainConfig::new(0.2, 10, vec![1.0], 1);
        let e = mc_estimate(&cfg, &make_example1(), &TestFunction::constant(1, 2.5), 1000).unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn frozen_chain() {
        let cfg = ChainConfig::new(0.0, 25, vec![1.0], 1);
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let e = mc_estimate(&cfg, &fam, &sin, 100).unwrap();
        assert_eq!(e.value, 1f64.sin());
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn rejects_a_single_sample() {
        let cfg = ChainConfig::new(0.1, 1, vec![1.0], 1);
        let fam = make_example1();
        assert!(mc_estimate(&cfg, &fam, &TestFunction::constant(1, 1.0), 1).is_err());
    }

    #[test]
    fn checkpoints_agree_with_separate_runs() {
        let fam = make_example2();
        let sin = observable_by_id("sin", &fam).unwrap();
        let cfg = ChainConfig::new(0.125, 0, vec![1.0], 5);
        let joint = mc_estimate_at(&cfg, &fam, &sin, &[3, 17], 4000).unwrap();
        for (i, n) in [3usize, 17].iter().enumerate() {
            let single = mc_estimate(&ChainConfig { n_steps: *n, ..cfg.clone() }, &fam, &sin, 4000).unwrap();
            assert_eq!(single, joint.estimates[i]);
        }
    }

    #[test]
    fn agrees_with_enumeration_at_small_n() {
        let fam = make_example2();
        let sin = observable_by_id("sin", &fam).unwrap();
        let cfg = ChainConfig::new(0.25, 10, vec![1.0], 77);
        let exact = exact_expectation(&fam, &sin, &[1.0], 0.25, 10).unwrap();
        let est = mc_estimate(&cfg, &fam, &sin, 200_000).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
        let anti = cfg.with_variance_reduction(VarianceReduction::Antithetic);
        let est = mc_estimate(&anti, &fam, &sin, 200_000).unwrap();
        assert_eq!(est.n_samples, 100_000);
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn independent_of_thread_count() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let cfg = ChainConfig::new(0.25, 20, vec![1.0], 3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_estimate(&cfg, &fam, &sin, 50_000).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }
}
