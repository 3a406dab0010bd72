//! The truncated weak expansion u0 + eta * u1 of E_x[phi(X_n)].
//!
//! `u0` transports phi along the gradient flow, and `u1` is the Duhamel
//! integral of `L2 u0` along the same characteristic. Both have a numeric
//! path valid in any dimension and a closed form for one-dimensional
//! families that register the characteristic intercept.

pub mod closed;
pub mod flow;
pub mod operators;

use rayon::prelude::*;
use serde::Serialize;

pub use closed::{phi1_closed, u0_closed, u1_closed};
pub use flow::{characteristic_flow, default_ode_step, CharacteristicFlow, FlowMap, FlowNode, MAX_ODE_STEP};
pub use operators::{apply_l2, u0_derivatives_along};

use crate::error::{Error, Result};
use crate::model::{StochasticGradientFamily, TestFunction};
use crate::quadrature::CompositeRule;
use crate::sgd::InitialState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Numeric,
}

impl Method {
    /// Closed form when the family registers x0(x, t), numeric otherwise.
    pub fn preferred(family: &StochasticGradientFamily) -> Self {
        if family.dim() == 1 && family.characteristic().is_some() {
            Method::ClosedForm
        } else {
            Method::Numeric
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Numeric => "numeric",
        }
    }
}

/// Discretisation of the numeric path.
#[derive(Clone, Debug)]
pub struct ExpansionSettings {
    pub quadrature: CompositeRule,
    /// Upper bound on the RK4 step; the step used is min(h_max, t/100).
    pub h_max: f64,
}

impl Default for ExpansionSettings {
    fn default() -> Self {
        Self {
            quadrature: CompositeRule::default(),
            h_max: MAX_ODE_STEP,
        }
    }
}

impl ExpansionSettings {
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.quadrature = CompositeRule::new(self.quadrature.rule.len(), panels);
        self
    }

    fn ode_step(&self, t: f64) -> f64 {
        self.h_max.min(default_ode_step(t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionEvaluation {
    pub x: Vec<f64>,
    pub t: f64,
    pub eta: f64,
    pub u0: f64,
    pub u1: f64,
    /// u0 + eta * u1.
    pub u_trunc: f64,
    pub method: Method,
}

fn check_dim(x: &[f64], family: &StochasticGradientFamily) -> Result<()> {
    if x.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time t = {t} must be finite and nonnegative")));
    }
    Ok(())
}

pub fn u0_eval(x: &[f64], t: f64, phi: &TestFunction, family: &StochasticGradientFamily, method: Method) -> Result<f64> {
    check_dim(x, family)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(phi.value(x));
    }
    match method {
        Method::ClosedForm => {
            if family.dim() != 1 {
                return Err(Error::NoClosedForm {
                    family: family.id().to_string(),
                });
            }
            u0_closed(x[0], t, phi, family)
        }
        Method::Numeric => {
            let flow = CharacteristicFlow::integrate(family, x, &[t], default_ode_step(t), false)?;
            Ok(phi.value(&flow.last().y))
        }
    }
}

/// u0 together with its spatial gradient and Hessian (row-major), from the
/// first and second variations of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct U0Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

pub fn u0_derivatives(x: &[f64], t: f64, phi: &TestFunction, family: &StochasticGradientFamily) -> Result<U0Jet> {
    check_dim(x, family)?;
    check_time(t)?;
    let flow = CharacteristicFlow::integrate(family, x, &[0.0, t], default_ode_step(t), true)?;
    let end = flow.last();
    let (grad, hess) = u0_derivatives_along(&end.cumulative(), &end.y, phi);
    Ok(U0Jet {
        value: phi.value(&end.y),
        grad,
        hess,
    })
}

/// Duhamel quadrature of s -> L2 u0(y(s), t - s) over [0, t].
pub fn u1_numeric(
    x: &[f64],
    t: f64,
    phi: &TestFunction,
    family: &StochasticGradientFamily,
    settings: &ExpansionSettings,
) -> Result<f64> {
    check_dim(x, family)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let abscissae = settings.quadrature.abscissae(0.0, t);
    let mut times: Vec<f64> = abscissae.iter().map(|(s, _)| *s).collect();
    times.push(t);
    let flow = CharacteristicFlow::integrate(family, x, &times, settings.ode_step(t), true)?;
    let end = &flow.last().y;
    let maps = flow.maps_to_end();
    let mut total = 0.0;
    for ((node, map), (_, w)) in flow.nodes().iter().zip(&maps).zip(&abscissae) {
        let (du, d2u) = u0_derivatives_along(map, end, phi);
        total += w * apply_l2(&du, &d2u, &node.y, family);
    }
    Ok(total)
}

pub fn u1_eval(x: &[f64], t: f64, phi: &TestFunction, family: &StochasticGradientFamily, method: Method) -> Result<f64> {
    check_dim(x, family)?;
    check_time(t)?;
    match method {
        Method::ClosedForm => {
            if family.dim() != 1 {
                return Err(Error::NoClosedForm {
                    family: family.id().to_string(),
                });
            }
            u1_closed(x[0], t, phi, family)
        }
        Method::Numeric => u1_numeric(x, t, phi, family, &ExpansionSettings::default()),
    }
}

/// u0 + eta * u1 at (x, t).
pub fn truncated_series(
    x: &[f64],
    t: f64,
    eta: f64,
    phi: &TestFunction,
    family: &StochasticGradientFamily,
    method: Method,
) -> Result<ExpansionEvaluation> {
    let u0 = u0_eval(x, t, phi, family, method)?;
    let u1 = u1_eval(x, t, phi, family, method)?;
    Ok(ExpansionEvaluation {
        x: x.to_vec(),
        t,
        eta,
        u0,
        u1,
        u_trunc: u0 + eta * u1,
        method,
    })
}

/// Truncated series at every (x, t) pair, evaluated in parallel.
pub fn expansion_grid(
    points: &[(Vec<f64>, f64)],
    eta: f64,
    phi: &TestFunction,
    family: &StochasticGradientFamily,
    method: Method,
) -> Result<Vec<ExpansionEvaluation>> {
    expansion_grid_each(points, eta, phi, family, method).into_iter().collect()
}

/// As [`expansion_grid`], keeping the outcome of each point separately.
pub fn expansion_grid_each(
    points: &[(Vec<f64>, f64)],
    eta: f64,
    phi: &TestFunction,
    family: &StochasticGradientFamily,
    method: Method,
) -> Vec<Result<ExpansionEvaluation>> {
    points
        .par_iter()
        .map(|(x, t)| truncated_series(x, *t, eta, phi, family, method))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Phi1Estimate {
    pub value: f64,
    /// |L2 u0(x*, T)| / gamma: the tail beyond T under an e^{-gamma s}
    /// envelope.
    pub tail_bound: f64,
    pub t_max: f64,
    pub gamma: f64,
}

/// Smallest Hessian eigenvalue of f at the minimizer.
pub fn curvature_at_minimizer(family: &StochasticGradientFamily) -> f64 {
    let h = family.objective().hess(family.minimizer());
    if family.dim() == 1 {
        h[(0, 0)]
    } else {
        let h = 0.5 * (&h + h.transpose());
        nalgebra::SymmetricEigen::new(h).eigenvalues.min()
    }
}

/// Integral of L2 u0(x*, s) over [0, t_max], default t_max = 20 / gamma with
/// gamma the curvature at the minimizer.
pub fn phi1_limit(phi: &TestFunction, family: &StochasticGradientFamily, t_max: Option<f64>) -> Result<Phi1Estimate> {
    let gamma = curvature_at_minimizer(family);
    if !(gamma > 0.0) {
        return Err(Error::NotStronglyConvex { min_eigenvalue: gamma });
    }
    let t_max = t_max.unwrap_or(20.0 / gamma);
    check_time(t_max)?;
    let rule = CompositeRule::default();
    let abscissae = rule.abscissae(0.0, t_max);
    let mut times = vec![0.0];
    times.extend(abscissae.iter().map(|(s, _)| *s));
    times.push(t_max);
    let x = family.minimizer();
    let flow = CharacteristicFlow::integrate(family, x, &times, default_ode_step(t_max), true)?;
    let integrand = |node: &FlowNode| {
        let (du, d2u) = u0_derivatives_along(&node.cumulative(), &node.y, phi);
        apply_l2(&du, &d2u, x, family)
    };
    let nodes = &flow.nodes()[1..];
    let value = nodes.iter().zip(&abscissae).map(|(n, (_, w))| w * integrand(n)).sum();
    Ok(Phi1Estimate {
        value,
        tail_bound: integrand(flow.last()).abs() / gamma,
        t_max,
        gamma,
    })
}

/// Integral of the truncated series against an initial measure.
pub fn pair_with_initial_measure(
    mu0: &InitialState,
    t: f64,
    eta: f64,
    phi: &TestFunction,
    family: &StochasticGradientFamily,
    method: Method,
) -> Result<f64> {
    let radius = family.working_radius();
    let (points, weights): (Vec<&[f64]>, Vec<f64>) = match mu0 {
        InitialState::Point(p) => (vec![p.as_slice()], vec![1.0]),
        InitialState::Measure { points, weights } => (points.iter().map(|p| p.as_slice()).collect(), weights.clone()),
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidParameter("initial measure weights must be nonnegative with positive sum".into()));
    }
    for p in &points {
        check_dim(p, family)?;
        let distance = crate::sgd::dist(p, family.minimizer());
        if distance > radius {
            return Err(Error::SupportOutsideBall { distance, radius });
        }
    }
    let mut acc = 0.0;
    for (p, w) in points.iter().zip(&weights) {
        acc += w * truncated_series(p, t, eta, phi, family, method)?.u_trunc;
    }
    Ok(acc / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, make_example2, make_minibatch_quadratic, observable_by_id};
    use rand::{Rng, SeedableRng};

    #[test]
    fn initial_conditions() {
        for fam in [make_example1(), make_example2()] {
            let sin = observable_by_id("sin", &fam).unwrap();
            for m in [Method::ClosedForm, Method::Numeric] {
                let e = truncated_series(&[0.7], 0.0, 0.3, &sin, &fam, m).unwrap();
                assert_eq!(e.u0, 0.7f64.sin());
                assert_eq!(e.u1, 0.0);
                assert_eq!(e.u_trunc, e.u0);
            }
        }
    }

    #[test]
    fn example1_u0_at_log_two() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let c = u0_eval(&[1.0], 2f64.ln(), &sin, &fam, Method::ClosedForm).unwrap();
        let n = u0_eval(&[1.0], 2f64.ln(), &sin, &fam, Method::Numeric).unwrap();
        assert!((c - 0.75f64.sin()).abs() < 1e-15);
        assert!((n - 0.75f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn closed_and_numeric_u1_agree() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let c = u1_eval(&[1.0], 2.0, &sin, &fam, Method::ClosedForm).unwrap();
        let n = u1_eval(&[1.0], 2.0, &sin, &fam, Method::Numeric).unwrap();
        assert!((c - n).abs() < 1e-9, "{c} vs {n}");
        let fam = make_example2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let t: f64 = rng.random_range(0.0..5.0);
            let c = u1_eval(&[x], t, &sin, &fam, Method::ClosedForm).unwrap();
            let n = u1_eval(&[x], t, &sin, &fam, Method::Numeric).unwrap();
            assert!((c - n).abs() < 1e-7, "({x},{t}): {c} vs {n}");
        }
    }

    #[test]
    fn minimizer_closed_value() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        for t in [0.5, 3.0] {
            let n = u1_eval(&[0.5], t, &sin, &fam, Method::Numeric).unwrap();
            let expect = -0.5f64.sin() / 16.0 * (1.0 - (-2.0 * t).exp());
            assert!((n - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn panel_doubling_is_converged() {
        let fam = make_example2();
        let sin = observable_by_id("sin", &fam).unwrap();
        for (x, t) in [(0.8, 2.0), (-0.6, 5.0)] {
            let a = u1_numeric(&[x], t, &sin, &fam, &ExpansionSettings::default()).unwrap();
            let b = u1_numeric(&[x], t, &sin, &fam, &ExpansionSettings::default().with_panels(128)).unwrap();
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn sensitivity_derivatives_match_finite_differences() {
        let fam = make_example2();
        let sin = observable_by_id("sin", &fam).unwrap();
        for (x, t) in [(0.3, 1.0), (-0.8, 2.5), (0.9, 0.2)] {
            let jet = u0_derivatives(&[x], t, &sin, &fam).unwrap();
            let u = |z: f64| u0_eval(&[z], t, &sin, &fam, Method::Numeric).unwrap();
            let h = 1e-4;
            let d1 = (u(x + h) - u(x - h)) / (2.0 * h);
            let d2 = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h);
            assert!((jet.grad[0] - d1).abs() < 1e-6);
            assert!((jet.hess[0] - d2).abs() < 1e-6);
        }
    }

    #[test]
    fn phi1_for_example1() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let p = phi1_limit(&sin, &fam, None).unwrap();
        assert!((p.value + 0.5f64.sin() / 16.0).abs() < 1e-10);
        assert!(p.tail_bound < 1e-10);
        let id = observable_by_id("identity", &fam).unwrap();
        assert!(phi1_limit(&id, &fam, None).unwrap().value.abs() < 1e-15);
        let e2 = make_example2();
        let sin2 = observable_by_id("sin", &e2).unwrap();
        let num = phi1_limit(&sin2, &e2, None).unwrap().value;
        assert!((num - phi1_closed(&sin2, &e2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn pairing() {
        let fam = make_example1();
        let sin = observable_by_id("sin", &fam).unwrap();
        let point = pair_with_initial_measure(&InitialState::Point(vec![1.0]), 5.0, 0.125, &sin, &fam, Method::ClosedForm).unwrap();
        let direct = truncated_series(&[1.0], 5.0, 0.125, &sin, &fam, Method::ClosedForm).unwrap();
        assert_eq!(point, direct.u_trunc);
        let one = TestFunction::constant(1, 1.0);
        let m = InitialState::uniform(vec![vec![0.25], vec![0.75]]);
        assert!((pair_with_initial_measure(&m, 5.0, 0.125, &one, &fam, Method::Numeric).unwrap() - 1.0).abs() < 1e-15);
        let far = InitialState::Point(vec![10.0]);
        assert!(matches!(
            pair_with_initial_measure(&far, 1.0, 0.1, &sin, &fam, Method::ClosedForm),
            Err(Error::SupportOutsideBall { .. })
        ));
    }

    #[test]
    fn numeric_path_in_two_dimensions() {
        let fam = make_minibatch_quadratic(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]], vec![1.0, 2.0, 1.5], 2).unwrap();
        let phi = observable_by_id("sin", &fam).unwrap();
        let x = [0.4, 0.9];
        let t = 1.0;
        let jet = u0_derivatives(&x, t, &phi, &fam).unwrap();
        let u = |z: [f64; 2]| u0_eval(&z, t, &phi, &fam, Method::Numeric).unwrap();
        let h = 1e-4;
        let d0 = (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h);
        assert!((jet.grad[0] - d0).abs() < 1e-6);
        let mixed = (u([x[0] + h, x[1] + h]) - u([x[0] + h, x[1] - h]) - u([x[0] - h, x[1] + h]) + u([x[0] - h, x[1] - h]))
            / (4.0 * h * h);
        assert!((jet.hess[1] - mixed).abs() < 1e-5);
        let a = u1_numeric(&x, t, &phi, &fam, &ExpansionSettings::default()).unwrap();
        let b = u1_numeric(&x, t, &phi, &fam, &ExpansionSettings::default().with_panels(128)).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
}
