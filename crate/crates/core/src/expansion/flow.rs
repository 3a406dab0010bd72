//! Gradient-flow characteristics y' = -grad f(y) with first and second
//! variations, integrated by fixed-step RK4.

use crate::error::{Error, Result};
use crate::model::StochasticGradientFamily;

/// Upper bound on the RK4 step.
pub const MAX_ODE_STEP: f64 = 1e-3;

/// min(1e-3, t / 100).
pub fn default_ode_step(t: f64) -> f64 {
    if t > 0.0 {
        MAX_ODE_STEP.min(t / 100.0)
    } else {
        MAX_ODE_STEP
    }
}

/// First and second derivatives of a map between two points of a
/// characteristic. `jac` is row-major d x d; `second` holds
/// d^2 y_k / dx_i dx_j at k*d*d + i*d + j and is empty when second
/// variations were not requested.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    pub jac: Vec<f64>,
    pub second: Vec<f64>,
}

impl FlowMap {
    pub fn identity(d: usize, second: bool) -> Self {
        let mut jac = vec![0.0; d * d];
        for i in 0..d {
            jac[i * d + i] = 1.0;
        }
        Self {
            jac,
            second: if second { vec![0.0; d * d * d] } else { Vec::new() },
        }
    }

    /// Derivatives of `self` after `inner`, by the chain rule.
    pub fn after(&self, inner: &FlowMap) -> FlowMap {
        let d = (self.jac.len() as f64).sqrt().round() as usize;
        let (o1, i1) = (&self.jac, &inner.jac);
        let mut jac = vec![0.0; d * d];
        for k in 0..d {
            for i in 0..d {
                jac[k * d + i] = (0..d).map(|l| o1[k * d + l] * i1[l * d + i]).sum();
            }
        }
        let second = if self.second.is_empty() || inner.second.is_empty() {
            Vec::new()
        } else {
            let (o2, i2) = (&self.second, &inner.second);
            let mut out = vec![0.0; d * d * d];
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = 0.0;
                        for l in 0..d {
                            acc += o1[k * d + l] * i2[l * d * d + i * d + j];
                            for m in 0..d {
                                acc += o2[k * d * d + l * d + m] * i1[l * d + i] * i1[m * d + j];
                            }
                        }
                        out[k * d * d + i * d + j] = acc;
                    }
                }
            }
            out
        };
        FlowMap { jac, second }
    }
}

/// State of the flow at time `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowNode {
    pub s: f64,
    pub y: Vec<f64>,
    /// Derivatives of x -> y(s).
    pub jac: Vec<f64>,
    pub second: Vec<f64>,
    /// Derivatives of y(previous node) -> y(s); the identity at the first node.
    pub step: FlowMap,
}

impl FlowNode {
    pub fn cumulative(&self) -> FlowMap {
        FlowMap {
            jac: self.jac.clone(),
            second: self.second.clone(),
        }
    }
}

/// Dense record of one characteristic at a sorted list of times.
#[derive(Clone, Debug)]
pub struct CharacteristicFlow {
    dim: usize,
    h_ode: f64,
    nodes: Vec<FlowNode>,
}

struct Rhs<'a> {
    family: &'a StochasticGradientFamily,
    d: usize,
    second: bool,
    g: Vec<f64>,
    h: Vec<f64>,
    t3: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, z: &[f64], out: &mut [f64]) {
        let d = self.d;
        let obj = self.family.objective();
        let y = &z[..d];
        obj.grad_into(y, &mut self.g);
        obj.hess_into(y, &mut self.h);
        for (o, g) in out[..d].iter_mut().zip(&self.g) {
            *o = -g;
        }
        let jac = &z[d..d + d * d];
        for k in 0..d {
            for i in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += self.h[k * d + l] * jac[l * d + i];
                }
                out[d + k * d + i] = -acc;
            }
        }
        if !self.second {
            return;
        }
        obj.third_into(y, &mut self.t3);
        let sec = &z[d + d * d..];
        let base = d + d * d;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        for m in 0..d {
                            acc += self.t3[k * d * d + l * d + m] * jac[l * d + i] * jac[m * d + j];
                        }
                        acc += self.h[k * d + l] * sec[l * d * d + i * d + j];
                    }
                    out[base + k * d * d + i * d + j] = -acc;
                }
            }
        }
    }
}

fn rk4_step(rhs: &mut Rhs, z: &mut [f64], h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64]) {
    let n = z.len();
    rhs.eval(z, &mut k[0]);
    for i in 0..n {
        tmp[i] = z[i] + 0.5 * h * k[0][i];
    }
    rhs.eval(tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = z[i] + 0.5 * h * k[1][i];
    }
    rhs.eval(tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = z[i] + h * k[2][i];
    }
    rhs.eval(tmp, &mut k[3]);
    for i in 0..n {
        z[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

impl CharacteristicFlow {
    /// Integrates from y(0) = x and records the state at each of `times`
    /// (nondecreasing, nonnegative). Every recorded time is hit exactly: the
    /// gap between consecutive times is split into equal substeps no longer
    /// than `h_max`. Second variations need the objective's third derivative.
    pub fn integrate(
        family: &StochasticGradientFamily,
        x: &[f64],
        times: &[f64],
        h_max: f64,
        second: bool,
    ) -> Result<Self> {
        let d = family.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if second && !family.objective().has_third() {
            return Err(Error::InvalidParameter(format!(
                "family {} has no third derivative; second variations unavailable",
                family.id()
            )));
        }
        if !(h_max > 0.0) {
            return Err(Error::InvalidParameter(format!("ODE step {h_max} must be positive")));
        }
        if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("flow times must be nonnegative and sorted".into()));
        }
        let len = d + d * d + if second { d * d * d } else { 0 };
        let mut z = vec![0.0; len];
        z[..d].copy_from_slice(x);
        for i in 0..d {
            z[d + i * d + i] = 1.0;
        }
        let mut rhs = Rhs {
            family,
            d,
            second,
            g: vec![0.0; d],
            h: vec![0.0; d * d],
            t3: vec![0.0; d * d * d],
        };
        let mut k = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut tmp = vec![0.0; len];
        let mut nodes = Vec::with_capacity(times.len());
        let mut cumulative = FlowMap::identity(d, second);
        let mut now = 0.0;
        for &target in times {
            let gap = target - now;
            if gap > 0.0 {
                let m = (gap / h_max - 1e-9).ceil().max(1.0) as usize;
                let h = gap / m as f64;
                for _ in 0..m {
                    rk4_step(&mut rhs, &mut z, h, &mut k, &mut tmp);
                }
            }
            now = target;
            let step = FlowMap {
                jac: z[d..d + d * d].to_vec(),
                second: if second { z[d + d * d..].to_vec() } else { Vec::new() },
            };
            cumulative = step.after(&cumulative);
            nodes.push(FlowNode {
                s: target,
                y: z[..d].to_vec(),
                jac: cumulative.jac.clone(),
                second: cumulative.second.clone(),
                step,
            });
            // variations restart at every node so that each segment is
            // integrated from the identity
            z[d..].fill(0.0);
            for i in 0..d {
                z[d + i * d + i] = 1.0;
            }
        }
        Ok(Self {
            dim: d,
            h_ode: h_max,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_ode(&self) -> f64 {
        self.h_ode
    }

    pub fn nodes(&self) -> &[FlowNode] {
        &self.nodes
    }

    pub fn last(&self) -> &FlowNode {
        self.nodes.last().expect("flow has at least one node")
    }

    /// For every node, the derivatives of y(s_k) -> y(s_last), composed
    /// backwards from the per-segment variations.
    pub fn maps_to_end(&self) -> Vec<FlowMap> {
        let second = !self.last().second.is_empty();
        let mut out = vec![FlowMap::identity(self.dim, second); self.nodes.len()];
        for k in (0..self.nodes.len().saturating_sub(1)).rev() {
            out[k] = out[k + 1].after(&self.nodes[k + 1].step);
        }
        out
    }
}

/// The characteristic through `x` on [0, t], recorded at the default Duhamel
/// quadrature abscissae and at t. Second variations are included whenever
/// the objective provides a third derivative.
pub fn characteristic_flow(x: &[f64], t: f64, family: &StochasticGradientFamily) -> Result<CharacteristicFlow> {
    let mut times: Vec<f64> = vec![0.0];
    if t > 0.0 {
        times.extend(crate::quadrature::CompositeRule::default().abscissae(0.0, t).into_iter().map(|(s, _)| s));
        times.push(t);
    }
    CharacteristicFlow::integrate(family, x, &times, default_ode_step(t), family.objective().has_third())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{local_constants, make_example1, make_example2, make_minibatch_quadratic};

    #[test]
    fn example1_matches_the_linear_solution() {
        let fam = make_example1();
        let flow = characteristic_flow(&[1.0], 2f64.ln(), &fam).unwrap();
        assert!((flow.last().y[0] - 0.75).abs() < 1e-13);
        for n in flow.nodes() {
            assert!((n.y[0] - (0.5 + 0.5 * (-n.s).exp())).abs() < 1e-13);
            assert!((n.jac[0] - (-n.s).exp()).abs() < 1e-13);
            assert!(n.second[0].abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_stays_put() {
        let flow = characteristic_flow(&[0.0], 3.0, &make_example2()).unwrap();
        assert!(flow.nodes().iter().all(|n| n.y[0] == 0.0));
    }

    #[test]
    fn step_halving_agrees() {
        let fam = make_example2();
        let a = CharacteristicFlow::integrate(&fam, &[1.0], &[1.0], 1e-3, true).unwrap();
        let b = CharacteristicFlow::integrate(&fam, &[1.0], &[1.0], 5e-4, true).unwrap();
        assert!((a.last().y[0] - b.last().y[0]).abs() < 1e-8);
        let exact = (-1f64).exp() / (1.0 + 0.3 * (1.0 - (-1f64).exp()));
        assert!((a.last().y[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn decay_envelope_on_example2() {
        let fam = make_example2();
        let gamma = local_constants(&fam, 1.0).gamma;
        for x in [-1.0, -0.5, 0.3, 1.0] {
            let flow = characteristic_flow(&[x], 5.0, &fam).unwrap();
            for n in flow.nodes() {
                assert!(n.y[0].abs() <= x.abs() * (-gamma * n.s).exp() * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let fam = make_example2();
        let t = 1.3;
        let y = |x: f64| CharacteristicFlow::integrate(&fam, &[x], &[t], 1e-3, true).unwrap().last().clone();
        for x in [-0.7, 0.2, 0.9] {
            let h = 1e-4;
            let (p, m, c) = (y(x + h), y(x - h), y(x));
            assert!(((p.y[0] - m.y[0]) / (2.0 * h) - c.jac[0]).abs() < 1e-7);
            assert!(((p.jac[0] - m.jac[0]) / (2.0 * h) - c.second[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn multidimensional_quadratic_jacobian() {
        let fam = make_minibatch_quadratic(vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 3.0], 1).unwrap();
        let flow = CharacteristicFlow::integrate(&fam, &[0.0, 0.0], &[0.5], 1e-3, fam.objective().has_third()).unwrap();
        let h = fam.objective().hess(&[0.0, 0.0]);
        let expected = (-h * 0.5).exp();
        let j = &flow.last().jac;
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i * 2 + k] - expected[(i, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maps_to_end_compose_to_the_whole_flow() {
        let fam = make_example2();
        let flow = CharacteristicFlow::integrate(&fam, &[0.7], &[0.0, 0.4, 1.1, 2.0], 1e-3, true).unwrap();
        let maps = flow.maps_to_end();
        assert!((maps[0].jac[0] - flow.last().jac[0]).abs() < 1e-14);
        assert!((maps[0].second[0] - flow.last().second[0]).abs() < 1e-14);
        for (node, map) in flow.nodes().iter().zip(&maps) {
            let direct = CharacteristicFlow::integrate(&fam, &node.y, &[2.0 - node.s], 1e-3, true).unwrap();
            assert!((direct.last().jac[0] - map.jac[0]).abs() < 1e-10);
            assert!((direct.last().second[0] - map.second[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unsorted_times() {
        assert!(CharacteristicFlow::integrate(&make_example1(), &[0.0], &[1.0, 0.5], 1e-3, false).is_err());
    }
}
