//! The SGD Markov chain X_{n+1} = X_n - eta * grad f(X_n; xi_n).

mod coupling;
pub mod enumerate;
mod estimate;
mod stationary;

use rayon::prelude::*;

pub use coupling::coupled_pair;
pub use estimate::{mc_estimate, mc_estimate_at, EstimateWithError, McOutcome};
pub(crate) use estimate::reduce_units;
pub use stationary::{recommended_burn_in, stationary_sample, stationary_sample_from, SampleSet};

use crate::model::{NoiseToken, StochasticGradientFamily};
use crate::rng::TrajectoryRng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceReduction {
    #[default]
    Plain,
    /// Trajectories come in pairs driven by complementary noise streams; the
    /// pair mean is one independent sample.
    Antithetic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Point(Vec<f64>),
    /// Finite initial measure; each trajectory draws its start from it.
    Measure { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Point(p) => p.len(),
            InitialState::Measure { points, .. } => points[0].len(),
        }
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        InitialState::Measure { points, weights }
    }

    fn draw(&self, rng: &mut TrajectoryRng) -> Vec<f64> {
        match self {
            InitialState::Point(p) => p.clone(),
            InitialState::Measure { points, weights } => {
                let total: f64 = weights.iter().sum();
                let u = rng.uniform() * total;
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                points.last().expect("nonempty measure").clone()
            }
        }
    }

    pub fn support(&self) -> Vec<&[f64]> {
        match self {
            InitialState::Point(p) => vec![p.as_slice()],
            InitialState::Measure { points, .. } => points.iter().map(|p| p.as_slice()).collect(),
        }
    }
}

/// Ball the chain is expected to stay in; leaving it is counted, not fatal.
#[derive(Clone, Debug, PartialEq)]
pub struct BallGuard {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallGuard {
    pub fn contains(&self, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.radius
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub eta: f64,
    pub n_steps: usize,
    pub x0: InitialState,
    pub seed: u64,
    pub variance_reduction: VarianceReduction,
    pub guard: Option<BallGuard>,
}

impl ChainConfig {
    pub fn new(eta: f64, n_steps: usize, x0: Vec<f64>, seed: u64) -> Self {
        Self {
            eta,
            n_steps,
            x0: InitialState::Point(x0),
            seed,
            variance_reduction: VarianceReduction::Plain,
            guard: None,
        }
    }

    pub fn with_initial(mut self, x0: InitialState) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_variance_reduction(mut self, vr: VarianceReduction) -> Self {
        self.variance_reduction = vr;
        self
    }

    pub fn with_guard(mut self, center: Vec<f64>, radius: f64) -> Self {
        self.guard = Some(BallGuard { center, radius });
        self
    }

    /// Noise stream of trajectory `index`. Under antithetic sampling
    /// trajectories 2k and 2k+1 share stream k with opposite polarity.
    pub fn trajectory_rng(&self, index: u64) -> TrajectoryRng {
        match self.variance_reduction {
            VarianceReduction::Plain => TrajectoryRng::new(self.seed, index),
            VarianceReduction::Antithetic => TrajectoryRng::with_polarity(self.seed, index / 2, index % 2 == 1),
        }
    }
}

/// x - eta * grad f(x; xi).
pub fn step(x: &[f64], eta: f64, xi: &NoiseToken, family: &StochasticGradientFamily) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    family.stochastic_grad_into(x, xi, &mut g);
    x.iter().zip(&g).map(|(a, b)| a - eta * b).collect()
}

/// Reusable buffers for advancing one chain.
pub(crate) struct Walker<'a> {
    family: &'a StochasticGradientFamily,
    eta: f64,
    token: NoiseToken,
    grad: Vec<f64>,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(family: &'a StochasticGradientFamily, eta: f64) -> Self {
        Self {
            family,
            eta,
            token: NoiseToken::Zero,
            grad: vec![0.0; family.dim()],
        }
    }

    pub(crate) fn draw(&mut self, rng: &mut TrajectoryRng) -> &NoiseToken {
        self.family.sample_xi(rng, &mut self.token);
        &self.token
    }

    pub(crate) fn apply_current(&mut self, x: &mut [f64]) {
        self.family.stochastic_grad_into(x, &self.token, &mut self.grad);
        for (xi, g) in x.iter_mut().zip(&self.grad) {
            *xi -= self.eta * g;
        }
    }

    pub(crate) fn advance(&mut self, x: &mut [f64], rng: &mut TrajectoryRng) {
        self.draw(rng);
        self.apply_current(x);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOutcome {
    pub index: u64,
    pub final_point: Vec<f64>,
    /// Steps at which the iterate was outside the guard ball.
    pub escaped_steps: usize,
    pub path: Option<Vec<Vec<f64>>>,
}

impl TrajectoryOutcome {
    pub fn escaped(&self) -> bool {
        self.escaped_steps > 0
    }
}

fn simulate(cfg: &ChainConfig, family: &StochasticGradientFamily, index: u64, record: bool) -> TrajectoryOutcome {
    let mut rng = cfg.trajectory_rng(index);
    let mut x = cfg.x0.draw(&mut rng);
    let mut walker = Walker::new(family, cfg.eta);
    let mut path = record.then(|| {
        let mut p = Vec::with_capacity(cfg.n_steps + 1);
        p.push(x.clone());
        p
    });
    let mut escaped = 0;
    for _ in 0..cfg.n_steps {
        walker.advance(&mut x, &mut rng);
        if let Some(g) = &cfg.guard {
            if !g.contains(&x) {
                escaped += 1;
            }
        }
        if let Some(p) = path.as_mut() {
            p.push(x.clone());
        }
    }
    TrajectoryOutcome {
        index,
        final_point: x,
        escaped_steps: escaped,
        path,
    }
}

/// `cfg.n_steps` steps of trajectory `index`.
pub fn run_trajectory(cfg: &ChainConfig, family: &StochasticGradientFamily, index: u64) -> TrajectoryOutcome {
    simulate(cfg, family, index, false)
}

/// As [`run_trajectory`], keeping X_0..X_n.
pub fn run_path(cfg: &ChainConfig, family: &StochasticGradientFamily, index: u64) -> TrajectoryOutcome {
    simulate(cfg, family, index, true)
}

/// Trajectories `0..count` in parallel, returned in index order.
pub fn run_paths(cfg: &ChainConfig, family: &StochasticGradientFamily, count: u64, record: bool) -> Vec<TrajectoryOutcome> {
    (0..count)
        .into_par_iter()
        .map(|i| simulate(cfg, family, i, record))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_example1, make_example2};

    #[test]
    fn single_steps() {
        let e1 = make_example1();
        let x = step(&[1.0], 0.1, &NoiseToken::Sign(1.0), &e1);
        assert!((x[0] - 0.9).abs() < 1e-15);
        assert_eq!(step(&[1.7], 0.0, &NoiseToken::Sign(-1.0), &e1), vec![1.7]);
        let e2 = make_example2();
        let x = step(&[0.0], 0.1, &NoiseToken::Sign(-1.0), &e2);
        assert!((x[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn empty_trajectory_returns_start() {
        let cfg = ChainConfig::new(0.3, 0, vec![0.25], 1);
        let out = run_path(&cfg, &make_example1(), 5);
        assert_eq!(out.final_point, vec![0.25]);
        assert_eq!(out.path.unwrap(), vec![vec![0.25]]);
    }

    #[test]
    fn matches_straight_line_recursion() {
        // independent reimplementation: X <- (1 - eta) X + eta (1 - xi) / 2
        let cfg = ChainConfig::new(0.25, 4, vec![1.0], 7);
        let out = run_trajectory(&cfg, &make_example1(), 0);
        let mut rng = TrajectoryRng::new(7, 0);
        let mut bits = rng.next_word();
        let mut x = 1.0f64;
        for _ in 0..4 {
            let xi = if bits & 1 == 1 { 1.0 } else { -1.0 };
            bits >>= 1;
            x = (1.0 - 0.25) * x + 0.25 * (1.0 - xi) / 2.0;
        }
        assert_eq!(out.final_point[0], x);
    }

    #[test]
    fn guard_counts_escapes() {
        let cfg = ChainConfig::new(0.1, 50, vec![1.0], 3).with_guard(vec![0.5], 0.2);
        let out = run_trajectory(&cfg, &make_example1(), 0);
        assert!(out.escaped());
        let cfg = ChainConfig::new(3.0 / 26.0, 200, vec![3.4], 3).with_guard(vec![0.5], 3.0);
        assert!(!run_trajectory(&cfg, &make_example1(), 0).escaped());
    }

    #[test]
    fn antithetic_partners_mirror_each_other() {
        let cfg = ChainConfig::new(0.2, 30, vec![1.0], 9).with_variance_reduction(VarianceReduction::Antithetic);
        let fam = make_example1();
        let a = run_trajectory(&cfg, &fam, 4).final_point[0];
        let b = run_trajectory(&cfg, &fam, 5).final_point[0];
        // the Example 1 chain is affine in the signs, so the pair straddles
        // the deterministic mean 1/2 + (1 - eta)^n / 2
        let mean = 0.5 + 0.5 * 0.8f64.powi(30);
        assert!(((a + b) / 2.0 - mean).abs() < 1e-14);
    }

    #[test]
    fn parallel_paths_equal_serial_runs() {
        let cfg = ChainConfig::new(0.125, 40, vec![1.0], 11);
        let fam = make_example2();
        let par = run_paths(&cfg, &fam, 64, false);
        for (i, o) in par.iter().enumerate() {
            assert_eq!(o.final_point, run_trajectory(&cfg, &fam, i as u64).final_point);
        }
    }

    #[test]
    fn measure_start_uses_listed_points() {
        let cfg = ChainConfig::new(0.1, 0, vec![0.0], 2).with_initial(InitialState::uniform(vec![vec![0.25], vec![0.75]]));
        let outs = run_paths(&cfg, &make_example1(), 400, false);
        let low = outs.iter().filter(|o| o.final_point[0] == 0.25).count();
        assert!(outs.iter().all(|o| o.final_point[0] == 0.25 || o.final_point[0] == 0.75));
        assert!((low as f64 - 200.0).abs() < 50.0);
    }
}
