//! Gauss–Legendre, Gauss–Hermite and adaptive Gauss–Kronrod rules.

use std::f64::consts::PI;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of P_n, found by Newton iteration from the
    /// Chebyshev-like initial guesses cos(pi (i + 3/4) / (n + 1/2)).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mid + half * z))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Composite rule: `panels` equal sub-intervals of [a, b], each with `rule`.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub rule: GaussLegendre,
    pub panels: usize,
}

impl CompositeRule {
    pub fn new(points_per_panel: usize, panels: usize) -> Self {
        assert!(panels >= 1);
        Self {
            rule: GaussLegendre::new(points_per_panel),
            panels,
        }
    }

    /// Absolute abscissae and weights on [a, b], sorted by abscissa.
    pub fn abscissae(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let width = (b - a) / self.panels as f64;
        let half = 0.5 * width;
        let mut out = Vec::with_capacity(self.panels * self.rule.len());
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (&z, &w) in self.rule.nodes().iter().zip(self.rule.weights()) {
                out.push((mid + half * z, w * half));
            }
        }
        out
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.abscissae(a, b).into_iter().map(|(s, w)| w * f(s)).sum()
    }
}

impl Default for CompositeRule {
    fn default() -> Self {
        Self::new(5, 64)
    }
}

/// Gauss–Hermite rule for the weight exp(-x^2) on the real line.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let (p1, d) = hermite_normalized(n, z, pim4);
                pp = d;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 3e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = hermite_normalized(n, z, pim4);
            if d != 0.0 {
                pp = d;
            }
            nodes[i] = z;
            weights[i] = 2.0 / (pp * pp);
        }
        // nodes[0..m] are positive and decreasing; mirror to an ascending layout
        let mut xs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for i in 0..m {
            xs.push(-nodes[i]);
            ws.push(weights[i]);
        }
        let start = if n % 2 == 1 { m - 1 } else { m };
        for i in (0..start).rev() {
            xs.push(nodes[i]);
            ws.push(weights[i]);
        }
        if n % 2 == 1 {
            xs[m - 1] = 0.0;
        }
        Self {
            nodes: xs,
            weights: ws,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[g(m + sqrt(var) Z)] with Z standard normal.
    pub fn gaussian_expectation<F: FnMut(f64) -> f64>(&self, mean: f64, var: f64, mut g: F) -> f64 {
        if var <= 0.0 {
            return g(mean);
        }
        let scale = (2.0 * var).sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(mean + scale * x))
            .sum::<f64>()
            / PI.sqrt()
    }
}

// Orthonormal Hermite recurrence; returns (p_n(z), p_n'(z)).
fn hermite_normalized(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of f over [a, b].
/// Bisects the interval with the largest error until the summed error is
/// below `max(abs_tol, rel_tol * |value|)` or `max_intervals` is reached.
pub fn adaptive_gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadratureResult {
    if a == b {
        return QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            intervals: 0,
        };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || parts.len() >= max_intervals {
            return QuadratureResult {
                value,
                error_estimate: error,
                intervals: parts.len(),
            };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(5);
        // exact up to degree 9
        let v = rule.integrate(0.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = 2f64.powi(10) / 10.0 - 3.0 * 2f64.powi(5) / 5.0 + 2.0;
        assert_relative_eq!(v, exact, max_relative = 1e-14);
        let s: f64 = rule.weights().iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn five_point_legendre_matches_tabulated_nodes() {
        let rule = GaussLegendre::new(5);
        assert_relative_eq!(rule.nodes()[4], 0.906_179_845_938_664, epsilon = 1e-14);
        assert_relative_eq!(rule.nodes()[3], 0.538_469_310_105_683, epsilon = 1e-14);
        assert_relative_eq!(rule.weights()[2], 128.0 / 225.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_rule_integrates_exponential() {
        let rule = CompositeRule::default();
        let v = rule.integrate(0.0, 5.0, |s| (-2.0 * s).exp());
        assert_relative_eq!(v, 0.5 * (1.0 - (-10f64).exp()), max_relative = 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(64);
        let sum: f64 = gh.weights().iter().sum();
        assert_relative_eq!(sum, PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gh.gaussian_expectation(0.0, 1.0, |z| z * z), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gh.gaussian_expectation(0.0, 1.0, |z| z.powi(4)), 3.0, max_relative = 1e-12);
        // E cos(Z) = exp(-1/2)
        assert_relative_eq!(
            gh.gaussian_expectation(0.0, 1.0, f64::cos),
            (-0.5f64).exp(),
            max_relative = 1e-13
        );
        assert!(gh.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gauss_kronrod_handles_steep_integrands() {
        // int_{0.001}^{1} x^-3 dx = (1e6 - 1)/2
        let r = adaptive_gauss_kronrod(|x| x.powi(-3), 1e-3, 1.0, 0.0, 1e-13, 10_000);
        assert_relative_eq!(r.value, (1e6 - 1.0) / 2.0, max_relative = 1e-12);
        let r = adaptive_gauss_kronrod(f64::sin, 0.0, PI, 1e-14, 1e-14, 1000);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-14);
        // orientation
        let r = adaptive_gauss_kronrod(|x| x, 1.0, 0.0, 1e-14, 1e-14, 100);
        assert_relative_eq!(r.value, -0.5, max_relative = 1e-14);
    }
}
