//! Registered problems and observables.

use std::sync::Arc;

use super::family::{NoiseKind, NoiseToken, StochasticGradientFamily};
use super::objective::{ObjectiveBundle, TestFunction};
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;
use crate::rng::TrajectoryRng;

pub const FAMILY_IDS: [&str; 3] = ["example1", "example2", "ou"];
pub const OBSERVABLE_IDS: [&str; 5] = ["sin", "cos", "identity", "square", "f-itself"];

/// f(x) = x^2/2 - x/2 with Rademacher noise xi x / 2.
pub fn make_example1() -> StochasticGradientFamily {
    let obj = ObjectiveBundle::scalar(
        |x| 0.5 * x * x - 0.5 * x,
        |x| x - 0.5,
        |_| 1.0,
        |_| 0.0,
        0.5,
    );
    StochasticGradientFamily::additive_rademacher("example1", obj, 0.5)
        .with_characteristic(Arc::new(|x, t| 0.5 + (x - 0.5) * (-t).exp()))
        .with_start(vec![1.0])
        .with_radii(3.0, f64::INFINITY)
}

/// f(x) = x^2/2 + 0.1 x^3 with Rademacher noise xi x / 2; local minimum at 0.
pub fn make_example2() -> StochasticGradientFamily {
    let obj = ObjectiveBundle::scalar(
        |x| 0.5 * x * x + 0.1 * x * x * x,
        |x| x + 0.3 * x * x,
        |x| 1.0 + 0.6 * x,
        |_| 0.6,
        0.0,
    );
    // y' = -y - 0.3 y^2 is a Bernoulli equation: 1/y grows like (1/x + 0.3) e^t - 0.3
    StochasticGradientFamily::additive_rademacher("example2", obj, 0.5)
        .with_characteristic(Arc::new(|x, t| {
            let e = (-t).exp();
            x * e / (1.0 + 0.3 * x * (1.0 - e))
        }))
        .with_start(vec![1.0])
        // f''(x; xi) = 1 + 0.6x > 0 exactly for x > -5/3
        .with_radii(1.0, 5.0 / 3.0)
}

/// f(x) = x^2/2 with standard Gaussian gradient noise, Sigma = 1.
pub fn make_ou_family() -> StochasticGradientFamily {
    let obj = ObjectiveBundle::scalar(|x| 0.5 * x * x, |x| x, |_| 1.0, |_| 0.0, 0.0);
    StochasticGradientFamily::new(
        "ou",
        obj,
        NoiseKind::Custom,
        Arc::new(|rng: &mut TrajectoryRng, tok: &mut NoiseToken| match tok {
            NoiseToken::Vector(v) if v.len() == 1 => v[0] = rng.gaussian(),
            _ => *tok = NoiseToken::Vector(vec![rng.gaussian()]),
        }),
        Arc::new(|x: &[f64], xi: &NoiseToken, out: &mut [f64]| {
            out[0] = x[0];
            if let NoiseToken::Vector(v) = xi {
                out[0] += v[0];
            }
        }),
        Arc::new(|_: &[f64], _: &NoiseToken, out: &mut [f64]| out[0] = 1.0),
        Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0),
    )
    .with_characteristic(Arc::new(|x, t| x * (-t).exp()))
    .with_start(vec![1.0])
    .with_radii(25.0, f64::INFINITY)
}

/// Gaussian benchmark whose expectations are known in closed form:
/// mean x e^{-(1+2 eta) t}, variance eta/(2(1+2 eta)) (1 - e^{-2(1+2 eta) t}).
#[derive(Clone, Debug)]
pub struct OuReference {
    pub eta: f64,
    pub family: StochasticGradientFamily,
    quadrature: GaussHermite,
}

pub const OU_HERMITE_NODES: usize = 64;

pub fn make_ou_reference(eta: f64) -> Result<OuReference> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    Ok(OuReference {
        eta,
        family: make_ou_family(),
        quadrature: GaussHermite::new(OU_HERMITE_NODES),
    })
}

impl OuReference {
    /// Mean-reversion rate 1 + 2 eta.
    pub fn rate(&self) -> f64 {
        1.0 + 2.0 * self.eta
    }

    pub fn mean(&self, x: f64, t: f64) -> f64 {
        x * (-self.rate() * t).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        let a = self.rate();
        self.eta / (2.0 * a) * (1.0 - (-2.0 * a * t).exp())
    }

    /// u(x, t) = E[phi(N(mean, variance))].
    pub fn expectation(&self, phi: &TestFunction, x: f64, t: f64) -> f64 {
        self.quadrature
            .gaussian_expectation(self.mean(x, t), self.variance(t), |w| phi.eval1(w))
    }
}

/// Per-sample quadratic losses l_i(theta) = a_i |theta - z_i|^2 / 2, sampled
/// in mini-batches of size `batch` without replacement.
pub fn make_minibatch_quadratic(points: Vec<Vec<f64>>, curvatures: Vec<f64>, batch: usize) -> Result<StochasticGradientFamily> {
    let n = points.len();
    if n == 0 || curvatures.len() != n {
        return Err(Error::InvalidParameter("need one curvature per data point".into()));
    }
    if batch == 0 || batch > n {
        return Err(Error::InvalidParameter(format!("batch size {batch} outside 1..={n}")));
    }
    if curvatures.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter("curvatures must be positive".into()));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidParameter("data points of unequal dimension".into()));
    }
    let pts: Arc<[Vec<f64>]> = points.into();
    let a: Arc<[f64]> = curvatures.into();
    let a_bar = a.iter().sum::<f64>() / n as f64;
    let weighted: Vec<f64> = (0..d)
        .map(|k| (0..n).map(|i| a[i] * pts[i][k]).sum::<f64>() / n as f64)
        .collect();
    let minimizer: Vec<f64> = weighted.iter().map(|w| w / a_bar).collect();

    let (p1, a1) = (pts.clone(), a.clone());
    let value = Arc::new(move |x: &[f64]| {
        (0..n)
            .map(|i| 0.5 * a1[i] * x.iter().zip(&p1[i]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
            .sum::<f64>()
            / n as f64
    });
    let w1 = weighted.clone();
    let grad = Arc::new(move |x: &[f64], out: &mut [f64]| {
        for k in 0..x.len() {
            out[k] = a_bar * x[k] - w1[k];
        }
    });
    let hess = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let d = x.len();
        out[..d * d].fill(0.0);
        for k in 0..d {
            out[k * d + k] = a_bar;
        }
    });
    let objective = ObjectiveBundle::new(d, value, grad, hess, minimizer.clone())
        .with_third(Arc::new(|x: &[f64], out: &mut [f64]| out[..x.len().pow(3)].fill(0.0)));

    let (p2, a2) = (pts.clone(), a.clone());
    let sgrad = Arc::new(move |x: &[f64], xi: &NoiseToken, out: &mut [f64]| {
        out.fill(0.0);
        if let NoiseToken::Subset(idx) = xi {
            for &j in idx {
                for k in 0..x.len() {
                    out[k] += a2[j] * (x[k] - p2[j][k]);
                }
            }
            let inv = 1.0 / idx.len() as f64;
            out.iter_mut().for_each(|v| *v *= inv);
        }
    });
    let a3 = a.clone();
    let shess = Arc::new(move |x: &[f64], xi: &NoiseToken, out: &mut [f64]| {
        let d = x.len();
        out[..d * d].fill(0.0);
        if let NoiseToken::Subset(idx) = xi {
            let c = idx.iter().map(|&j| a3[j]).sum::<f64>() / idx.len() as f64;
            for k in 0..d {
                out[k * d + k] = c;
            }
        }
    });
    let (p4, a4) = (pts.clone(), a.clone());
    // finite-population covariance of a without-replacement sample mean
    let fpc = if n > 1 {
        (n - batch) as f64 / (batch as f64 * (n - 1) as f64)
    } else {
        0.0
    };
    let sigma = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let d = x.len();
        let g: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..d).map(|k| a4[i] * (x[k] - p4[i][k])).collect())
            .collect();
        let mean: Vec<f64> = (0..d).map(|k| g.iter().map(|gi| gi[k]).sum::<f64>() / n as f64).collect();
        for r in 0..d {
            for c in 0..d {
                let s: f64 = g.iter().map(|gi| (gi[r] - mean[r]) * (gi[c] - mean[c])).sum::<f64>() / n as f64;
                out[r * d + c] = fpc * s;
            }
        }
    });
    let sampler = Arc::new(move |rng: &mut TrajectoryRng, tok: &mut NoiseToken| {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..batch {
            let j = k + rng.index_below(n - k);
            perm.swap(k, j);
        }
        perm.truncate(batch);
        *tok = NoiseToken::Subset(perm);
    });
    let mut fam = StochasticGradientFamily::new("minibatch", objective, NoiseKind::Minibatch, sampler, sgrad, shess, sigma);
    if let Some(subsets) = enumerate_subsets(n, batch, 20_000) {
        let p = 1.0 / subsets.len() as f64;
        fam = fam.with_support(subsets.into_iter().map(|s| (p, NoiseToken::Subset(s))).collect());
    }
    if d == 1 {
        let m = minimizer[0];
        fam = fam.with_characteristic(Arc::new(move |x, t| m + (x - m) * (-a_bar * t).exp()));
    }
    Ok(fam)
}

fn enumerate_subsets(n: usize, k: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) -> bool {
        if cur.len() == k {
            out.push(cur.clone());
            return out.len() <= limit;
        }
        for i in start..n {
            cur.push(i);
            if !rec(i + 1, n, k, cur, out, limit) {
                return false;
            }
            cur.pop();
        }
        true
    }
    rec(0, n, k, &mut cur, &mut out, limit).then_some(out)
}

pub fn family_by_id(id: &str) -> Result<StochasticGradientFamily> {
    match id {
        "example1" => Ok(make_example1()),
        "example2" => Ok(make_example2()),
        "ou" => Ok(make_ou_family()),
        other => Err(Error::UnknownId(other.to_string())),
    }
}

fn coordinate_observable<F, D1, D2, D3>(id: &str, dim: usize, f: F, d1: D1, d2: D2, d3: D3) -> TestFunction
where
    F: Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    D1: Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    D2: Fn(f64) -> f64 + Send + Sync + Copy + 'static,
    D3: Fn(f64) -> f64 + Send + Sync + Copy + 'static,
{
    if dim == 1 {
        return TestFunction::scalar(id, f, d1, d2, d3);
    }
    // separable: phi(x) = sum_k g(x_k)
    TestFunction::new(
        id,
        dim,
        Arc::new(move |x: &[f64]| x.iter().map(|&v| f(v)).sum()),
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, &v) in out.iter_mut().zip(x) {
                *o = d1(v);
            }
        }),
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            let d = x.len();
            out[..d * d].fill(0.0);
            for k in 0..d {
                out[k * d + k] = d2(x[k]);
            }
        }),
    )
    .with_third(Arc::new(move |x: &[f64], out: &mut [f64]| {
        let d = x.len();
        out[..d * d * d].fill(0.0);
        for k in 0..d {
            out[(k * d + k) * d + k] = d3(x[k]);
        }
    }))
}

/// Named observables; `f-itself` is the family's objective.
pub fn observable_by_id(id: &str, family: &StochasticGradientFamily) -> Result<TestFunction> {
    let d = family.dim();
    Ok(match id {
        "sin" => coordinate_observable("sin", d, f64::sin, f64::cos, |x| -x.sin(), |x| -x.cos()),
        "cos" => coordinate_observable("cos", d, f64::cos, |x| -x.sin(), |x| -x.cos(), f64::sin),
        "identity" => coordinate_observable("identity", d, |x| x, |_| 1.0, |_| 0.0, |_| 0.0),
        "square" => coordinate_observable("square", d, |x| x * x, |x| 2.0 * x, |_| 2.0, |_| 0.0),
        "f-itself" => {
            let obj = family.objective().clone();
            let (o1, o2, o3) = (obj.clone(), obj.clone(), obj.clone());
            let mut tf = TestFunction::new(
                "f-itself",
                d,
                Arc::new(move |x: &[f64]| o1.value(x)),
                Arc::new(move |x: &[f64], out: &mut [f64]| o2.grad_into(x, out)),
                Arc::new(move |x: &[f64], out: &mut [f64]| o3.hess_into(x, out)),
            );
            if obj.has_third() {
                tf = tf.with_third(Arc::new(move |x: &[f64], out: &mut [f64]| {
                    obj.third_into(x, out);
                }));
            }
            tf
        }
        other => return Err(Error::UnknownId(other.to_string())),
    })
}
