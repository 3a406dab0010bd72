use super::flow::FlowMap;
use crate::model::{StochasticGradientFamily, TestFunction};

/// L2 u = -(1/4) grad|grad f|^2 . grad u + (1/2) Tr(Sigma hess u), with
/// grad|grad f|^2 = 2 hess f grad f. `d2u` is row-major.
pub fn apply_l2(du: &[f64], d2u: &[f64], x: &[f64], family: &StochasticGradientFamily) -> f64 {
    let d = family.dim();
    let obj = family.objective();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut sigma = vec![0.0; d * d];
    obj.grad_into(x, &mut g);
    obj.hess_into(x, &mut h);
    family.sigma_into(x, &mut sigma);
    let mut drift = 0.0;
    for i in 0..d {
        let hg: f64 = (0..d).map(|j| h[i * d + j] * g[j]).sum();
        drift += hg * du[i];
    }
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            trace += sigma[i * d + j] * d2u[j * d + i];
        }
    }
    -0.5 * drift + 0.5 * trace
}

/// Gradient and Hessian of phi after a flow map with derivatives `map`,
/// where `end` is the image point:
/// grad = A'^T grad phi and hess = A'^T hess phi A' + sum_k d_k phi A''_k.
pub fn u0_derivatives_along(map: &FlowMap, end: &[f64], phi: &TestFunction) -> (Vec<f64>, Vec<f64>) {
    let d = end.len();
    let mut p = vec![0.0; d];
    let mut pp = vec![0.0; d * d];
    phi.grad_into(end, &mut p);
    phi.hess_into(end, &mut pp);
    let a = &map.jac;
    let grad: Vec<f64> = (0..d).map(|i| (0..d).map(|k| a[k * d + i] * p[k]).sum()).collect();
    let mut hess = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                for l in 0..d {
                    acc += a[k * d + i] * pp[k * d + l] * a[l * d + j];
                }
                if !map.second.is_empty() {
                    acc += p[k] * map.second[k * d * d + i * d + j];
                }
            }
            hess[i * d + j] = acc;
        }
    }
    (grad, hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, make_ou_family};

    #[test]
    fn annihilates_constants() {
        assert_eq!(apply_l2(&[0.0], &[0.0], &[0.7], &make_example1()), 0.0);
    }

    #[test]
    fn ou_form() {
        let fam = make_ou_family();
        for x in [-1.5, 0.0, 2.0] {
            let v = apply_l2(&[0.3], &[-1.1], &[x], &fam);
            assert!((v - (-0.5 * x * 0.3 + 0.5 * -1.1)).abs() < 1e-15);
        }
    }

    #[test]
    fn example1_at_the_minimizer() {
        // u0(x, t) = sin(1/2 + (x - 1/2) e^-t): at x = 1/2 the drift term vanishes
        let fam = make_example1();
        let t: f64 = 0.8;
        let e = (-t).exp();
        let du = e * 0.5f64.cos();
        let d2u = -e * e * 0.5f64.sin();
        let v = apply_l2(&[du], &[d2u], &[0.5], &fam);
        assert!((v - 0.125 * -0.5f64.sin() * (-2.0 * t).exp()).abs() < 1e-15);
    }
}
