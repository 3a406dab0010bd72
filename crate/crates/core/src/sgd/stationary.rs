use rayon::prelude::*;
use serde::Serialize;

use super::{run_trajectory, ChainConfig};
use crate::error::{Error, Result};
use crate::model::StochasticGradientFamily;

/// Draws of X_{burn_in} from independent chains, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSet {
    pub dim: usize,
    pub values: Vec<f64>,
    pub burn_in: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Component `k` of every sample.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn mean(&self, k: usize) -> f64 {
        let c = self.component(k);
        c.iter().sum::<f64>() / c.len() as f64
    }
}

/// Samples started at the family's default point.
pub fn stationary_sample(
    family: &StochasticGradientFamily,
    eta: f64,
    burn_in: usize,
    n_samples: usize,
    seed: u64,
) -> Result<SampleSet> {
    stationary_sample_from(family, eta, burn_in, n_samples, seed, family.default_start())
}

pub fn stationary_sample_from(
    family: &StochasticGradientFamily,
    eta: f64,
    burn_in: usize,
    n_samples: usize,
    seed: u64,
    x0: &[f64],
) -> Result<SampleSet> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    if x0.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: x0.len(),
        });
    }
    let cfg = ChainConfig::new(eta, burn_in, x0.to_vec(), seed);
    let finals: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&cfg, family, i).final_point)
        .collect();
    Ok(SampleSet {
        dim: family.dim(),
        values: finals.into_iter().flatten().collect(),
        burn_in,
    })
}

/// Smallest burn-in reaching an O(eta) neighbourhood: ceil(log(1/eta)/eta).
pub fn recommended_burn_in(eta: f64) -> usize {
    ((1.0 / eta).ln() / eta).ceil().max(1.0) as usize
}
