//! Exhaustive evaluation over every noise sequence of a finite support.
//! Cost is |support|^n, so these are oracles for small n only.

use crate::error::{Error, Result};
use crate::model::{NoiseToken, StochasticGradientFamily, TestFunction};

fn support(family: &StochasticGradientFamily) -> Result<&[(f64, NoiseToken)]> {
    family
        .support()
        .ok_or_else(|| Error::InvalidParameter(format!("family {} has no finite noise support", family.id())))
}

struct Tree<'a, F> {
    family: &'a StochasticGradientFamily,
    support: &'a [(f64, NoiseToken)],
    eta: f64,
    n: usize,
    visit: F,
}

impl<F: FnMut(usize, f64, &[Vec<f64>])> Tree<'_, F> {
    /// `levels[0]` holds the chain states at `depth`; deeper slots are scratch.
    fn descend(&mut self, depth: usize, prob: f64, levels: &mut [Vec<Vec<f64>>]) {
        (self.visit)(depth, prob, &levels[0]);
        if depth == self.n {
            return;
        }
        let (cur, rest) = levels.split_at_mut(1);
        for (p, xi) in self.support {
            for (x, next) in cur[0].iter().zip(rest[0].iter_mut()) {
                self.family.stochastic_grad_into(x, xi, next);
                for (o, xv) in next.iter_mut().zip(x) {
                    *o = xv - self.eta * *o;
                }
            }
            self.descend(depth + 1, prob * p, rest);
        }
    }
}

/// Calls `visit(depth, probability, states)` at every node of the noise
/// tree up to depth `n`. All chains in `starts` share each noise sequence.
pub fn walk_tree<F>(family: &StochasticGradientFamily, starts: &[&[f64]], eta: f64, n: usize, visit: F) -> Result<()>
where
    F: FnMut(usize, f64, &[Vec<f64>]),
{
    let sup = support(family)?;
    let d = family.dim();
    for s in starts {
        if s.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.len() });
        }
    }
    let mut levels: Vec<Vec<Vec<f64>>> = (0..=n).map(|_| vec![vec![0.0; d]; starts.len()]).collect();
    for (slot, s) in levels[0].iter_mut().zip(starts) {
        slot.copy_from_slice(s);
    }
    let mut tree = Tree {
        family,
        support: sup,
        eta,
        n,
        visit,
    };
    tree.descend(0, 1.0, &mut levels);
    Ok(())
}

/// E[phi(X_n)] computed exactly.
pub fn exact_expectation(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    x0: &[f64],
    eta: f64,
    n: usize,
) -> Result<f64> {
    Ok(exact_expectations(family, phi, x0, eta, n)?[n])
}

/// E[phi(X_k)] for k = 0..=n.
pub fn exact_expectations(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    x0: &[f64],
    eta: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n + 1];
    walk_tree(family, &[x0], eta, n, |k, p, s| out[k] += p * phi.value(&s[0]))?;
    Ok(out)
}

/// E|Y_k - Z_k|^2 for k = 0..=n under the shared-noise coupling.
pub fn exact_coupled_sq_distances(
    family: &StochasticGradientFamily,
    y0: &[f64],
    z0: &[f64],
    eta: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n + 1];
    walk_tree(family, &[y0, z0], eta, n, |k, p, s| {
        out[k] += p * s[0].iter().zip(&s[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    })?;
    Ok(out)
}

/// Largest |X_k - center| over every noise sequence and every k <= n.
pub fn max_excursion(
    family: &StochasticGradientFamily,
    x0: &[f64],
    eta: f64,
    n: usize,
    center: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    walk_tree(family, &[x0], eta, n, |_, _, s| {
        worst = worst.max(crate::sgd::dist(&s[0], center));
    })?;
    Ok(worst)
}

/// Largest |phi| over every point reachable within n steps.
pub fn max_reachable_abs(
    family: &StochasticGradientFamily,
    phi: &TestFunction,
    x0: &[f64],
    eta: f64,
    n: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    walk_tree(family, &[x0], eta, n, |_, _, s| worst = worst.max(phi.value(&s[0]).abs()))?;
    Ok(worst)
}
