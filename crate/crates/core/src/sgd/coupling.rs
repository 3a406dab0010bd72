use super::estimate::units_for;
use super::{reduce_units, ChainConfig, VarianceReduction, Walker};
use crate::error::{Error, Result};
use crate::model::StochasticGradientFamily;
use crate::sgd::EstimateWithError;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// E|Y_n - Z_n|^2 for n = 0..=cfg.n_steps, where Y and Z start at `y0` and
/// `z0` and consume the same noise token at every step. `cfg.x0` is unused.
pub fn coupled_pair(
    cfg: &ChainConfig,
    family: &StochasticGradientFamily,
    y0: &[f64],
    z0: &[f64],
    n_samples: u64,
) -> Result<Vec<EstimateWithError>> {
    let d = family.dim();
    for p in [y0, z0] {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    let units = units_for(cfg, n_samples)?;
    let per_unit = match cfg.variance_reduction {
        VarianceReduction::Plain => 1,
        VarianceReduction::Antithetic => 2,
    };
    let width = cfg.n_steps + 1;
    let (acc, _) = reduce_units(units, width, |u, out| {
        out.fill(0.0);
        let mut walker = Walker::new(family, cfg.eta);
        for j in 0..per_unit {
            let mut rng = cfg.trajectory_rng(u * per_unit + j);
            let (mut y, mut z) = (y0.to_vec(), z0.to_vec());
            out[0] += sq_dist(&y, &z) / per_unit as f64;
            for slot in out.iter_mut().skip(1) {
                walker.draw(&mut rng);
                walker.apply_current(&mut y);
                walker.apply_current(&mut z);
                *slot += sq_dist(&y, &z) / per_unit as f64;
            }
        }
        0
    });
    Ok(acc.iter().map(|w| w.finish()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{local_constants, make_example1, make_example2};

    #[test]
    fn identical_starts_stay_together() {
        let cfg = ChainConfig::new(0.2, 30, vec![0.0], 4);
        let d = coupled_pair(&cfg, &make_example2(), &[0.3], &[0.3], 100).unwrap();
        assert!(d.iter().all(|e| e.value == 0.0 && e.std_error == 0.0));
    }

    #[test]
    fn affine_chain_contracts_deterministically() {
        let eta = 0.1;
        let cfg = ChainConfig::new(eta, 25, vec![0.0], 4);
        let d = coupled_pair(&cfg, &make_example1(), &[2.0], &[-0.5], 50).unwrap();
        for (n, e) in d.iter().enumerate() {
            let exact = (1.0 - eta).powi(2 * n as i32) * 6.25;
            assert!((e.value - exact).abs() <= 1e-12 * 6.25, "n = {n}");
            assert!(e.std_error < 1e-12);
        }
    }

    #[test]
    fn example2_respects_the_contraction_bound() {
        let fam = make_example2();
        let c = local_constants(&fam, 1.0);
        let eta = 0.125;
        let cfg = ChainConfig::new(eta, 40, vec![0.0], 8);
        let d = coupled_pair(&cfg, &fam, &[0.6], &[-0.4], 20_000).unwrap();
        let rho2 = c.coupling_rate(eta);
        for (n, e) in d.iter().enumerate() {
            assert!(e.value <= rho2.powi(n as i32) + 4.0 * e.std_error, "n = {n}");
        }
    }
}
