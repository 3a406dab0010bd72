//! One-dimensional closed forms built from the analytic characteristic
//! intercept x0(x, t).

use crate::error::{Error, Result};
use crate::model::{ObjectiveBundle, StochasticGradientFamily, TestFunction};
use crate::quadrature::{adaptive_gauss_kronrod, GaussLegendre};

const I3_REL_TOL: f64 = 1e-13;
const I3_MAX_INTERVALS: usize = 4000;
/// sqrt of the smallest normal double: below this 1/f'^2 would overflow.
const CONVERGED_SLOPE: f64 = 1.4916681462400413e-154;
const NEAR_MINIMIZER: f64 = 1e-2;
const SLOPE_NODES: usize = 8;

fn require_1d(family: &StochasticGradientFamily) -> Result<&crate::model::CharacteristicMap> {
    match family.characteristic() {
        Some(c) if family.dim() == 1 => Ok(c),
        _ => Err(Error::NoClosedForm {
            family: family.id().to_string(),
        }),
    }
}

fn third(family: &StochasticGradientFamily, x: f64) -> Result<f64> {
    family.objective().d3(x).ok_or_else(|| Error::NoClosedForm {
        family: family.id().to_string(),
    })
}

/// (1 - e^{-a t}) / a, continuous at a = 0.
fn relax(a: f64, t: f64) -> f64 {
    if a == 0.0 {
        t
    } else {
        -(-a * t).exp_m1() / a
    }
}

pub fn u0_closed(x: f64, t: f64, phi: &TestFunction, family: &StochasticGradientFamily) -> Result<f64> {
    let x0 = require_1d(family)?;
    Ok(phi.eval1(x0(x, t)))
}

/// u1 on a characteristic frozen at a critical point x with c = f''(x).
fn u1_frozen(x: f64, t: f64, phi: &TestFunction, family: &StochasticGradientFamily) -> Result<f64> {
    let obj = family.objective();
    let c = obj.d2(x);
    if c == 0.0 {
        return Err(Error::SingularCharacteristic { x0: x, x });
    }
    let half_sigma = 0.5 * family.sigma(&[x])[(0, 0)];
    let f3 = third(family, x)?;
    let (p1, p2) = (phi.d1(x), phi.d2(x));
    Ok(half_sigma * (p2 * relax(2.0 * c, t) - p1 * f3 / c * (relax(c, t) - relax(2.0 * c, t))))
}

/// f'(x* + w) in coordinates centred at the minimizer. Close to x* it is
/// rebuilt as w times the mean of f'' over [x*, x* + w], which keeps full
/// relative precision where x* + w itself has lost the low digits of w.
struct Slope<'a> {
    obj: &'a ObjectiveBundle,
    center: f64,
    rule: GaussLegendre,
}

impl<'a> Slope<'a> {
    fn new(obj: &'a ObjectiveBundle, center: f64) -> Self {
        Self {
            obj,
            center,
            rule: GaussLegendre::new(SLOPE_NODES),
        }
    }

    /// Mean of g over [x* + a, x* + b].
    fn mean(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        self.rule
            .nodes()
            .iter()
            .zip(self.rule.weights())
            .map(|(z, q)| 0.5 * q * g(self.center + a + 0.5 * (b - a) * (1.0 + z)))
            .sum()
    }

    fn at(&self, w: f64) -> f64 {
        if w.abs() >= NEAR_MINIMIZER {
            return self.obj.d1(self.center + w);
        }
        w * self.mean(0.0, w, |x| self.obj.d2(x))
    }

    /// f''(x* + a) - f''(x* + b), from the third derivative when both ends
    /// are close to x*.
    fn curvature_drop(&self, a: f64, b: f64) -> f64 {
        if a.abs() >= NEAR_MINIMIZER || b.abs() >= NEAR_MINIMIZER || !self.obj.has_third() {
            return self.obj.d2(self.center + a) - self.obj.d2(self.center + b);
        }
        (a - b) * self.mean(b, a, |x| self.obj.d3(x).unwrap_or(f64::NAN))
    }
}

/// The four-term expression
///
/// ```text
/// u1 = -1/2 f'(x0) phi'(x0) log(f'(x)/f'(x0))
///      + s f'(x0) f''(x0) phi'(x0) I3
///      - s/2 f'(x0) phi'(x0) [1/f'(x0)^2 - 1/f'(x)^2]
///      + s f'(x0)^2 phi''(x0) I3
/// ```
///
/// with s = Sigma/2, I3 the integral of 1/f'^3 from x0 to x and Sigma taken
/// constant along the characteristic. The bracket equals the integral of
/// f''/f'^3, so the second and third terms are integrated together as
/// f'(x0) (f''(x0) - f'') / f'^3 and the fourth as f'(x0)^2 / f'^3. Both
/// integrands stay bounded as x0 approaches a critical point, where the
/// separate terms would cancel to no significant digits.
///
/// At a critical point the characteristic is constant and the integral is
/// done in closed form. Once f'(x0) is below `CONVERGED_SLOPE` the
/// characteristic has settled at a critical point to within far less than
/// one ulp of any O(1) quantity, and the t -> infinity value there is used.
pub fn u1_closed(x: f64, t: f64, phi: &TestFunction, family: &StochasticGradientFamily) -> Result<f64> {
    let x0_map = require_1d(family)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let obj = family.objective();
    let fx = obj.d1(x);
    if fx == 0.0 {
        return u1_frozen(x, t, phi, family);
    }
    let x0 = x0_map(x, t);
    if !x0.is_finite() {
        return Err(Error::SingularCharacteristic { x0, x });
    }
    let center = family.minimizer()[0];
    let slope = Slope::new(obj, center);
    let (w0, wx) = (x0 - center, x - center);
    let f0 = slope.at(w0);
    if f0.abs() < CONVERGED_SLOPE {
        return u1_frozen(x0, f64::INFINITY, phi, family);
    }
    if f0.signum() != fx.signum() {
        return Err(Error::SingularCharacteristic { x0, x });
    }
    let s = 0.5 * family.sigma(&[x])[(0, 0)];
    let mut crossed = false;
    let mut integrate = |h: &dyn Fn(f64, f64) -> f64| {
        adaptive_gauss_kronrod(
            |w| {
                let g = slope.at(w);
                crossed |= g.signum() != fx.signum();
                h(center + w, g)
            },
            w0,
            wx,
            0.0,
            I3_REL_TOL,
            I3_MAX_INTERVALS,
        )
        .value
    };
    let curvature = integrate(&|xi, g| {
        let r = f0 / g;
        r * slope.curvature_drop(w0, xi - center) / (g * g)
    });
    let f0_sq_i3 = integrate(&|_, g| {
        let r = f0 / g;
        r * r / g
    });
    if crossed {
        return Err(Error::SingularCharacteristic { x0, x });
    }
    let (p1, p2) = (phi.d1(x0), phi.d2(x0));
    Ok(-0.5 * f0 * p1 * (fx / f0).ln() + s * p1 * curvature + s * p2 * f0_sq_i3)
}

/// lim u1 as t -> infinity at the minimizer:
/// (Sigma/2) [phi''/(2c) - phi' f'''/(2c^2)] with c = f''(x*).
pub fn phi1_closed(phi: &TestFunction, family: &StochasticGradientFamily) -> Result<f64> {
    if family.dim() != 1 {
        return Err(Error::NoClosedForm {
            family: family.id().to_string(),
        });
    }
    let m = family.minimizer()[0];
    let c = family.objective().d2(m);
    let f3 = third(family, m)?;
    let half_sigma = 0.5 * family.sigma(&[m])[(0, 0)];
    Ok(half_sigma * (phi.d2(m) / (2.0 * c) - phi.d1(m) * f3 / (2.0 * c * c)))
}
