use std::sync::Arc;

use nalgebra::DMatrix;

use super::objective::{ArrayField, ObjectiveBundle};
use crate::rng::TrajectoryRng;

/// One realisation of the gradient noise.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseToken {
    /// Rademacher sign.
    Sign(f64),
    /// Mini-batch indices, drawn without replacement.
    Subset(Vec<usize>),
    /// Free-form noise vector.
    Vector(Vec<f64>),
    /// Deterministic gradient.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Rademacher,
    Minibatch,
    Custom,
}

pub type NoiseSampler = Arc<dyn Fn(&mut TrajectoryRng, &mut NoiseToken) + Send + Sync>;
pub type NoisyArrayField = Arc<dyn Fn(&[f64], &NoiseToken, &mut [f64]) + Send + Sync>;
/// Analytic characteristic intercept x0(x, t) of a one-dimensional family.
pub type CharacteristicMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// An objective together with its unbiased stochastic gradients.
#[derive(Clone)]
pub struct StochasticGradientFamily {
    id: String,
    objective: ObjectiveBundle,
    kind: NoiseKind,
    sampler: NoiseSampler,
    stochastic_grad: NoisyArrayField,
    stochastic_hess: NoisyArrayField,
    sigma: ArrayField,
    support: Option<Arc<[(f64, NoiseToken)]>>,
    characteristic: Option<CharacteristicMap>,
    start: Vec<f64>,
    working_radius: f64,
    convexity_radius: f64,
}

impl std::fmt::Debug for StochasticGradientFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticGradientFamily")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("objective", &self.objective)
            .field("finite_support", &self.support.as_ref().map(|s| s.len()))
            .finish()
    }
}

impl StochasticGradientFamily {
    pub fn new(
        id: impl Into<String>,
        objective: ObjectiveBundle,
        kind: NoiseKind,
        sampler: NoiseSampler,
        stochastic_grad: NoisyArrayField,
        stochastic_hess: NoisyArrayField,
        sigma: ArrayField,
    ) -> Self {
        let start = objective.minimizer().to_vec();
        Self {
            id: id.into(),
            objective,
            kind,
            sampler,
            stochastic_grad,
            stochastic_hess,
            sigma,
            support: None,
            characteristic: None,
            start,
            working_radius: 1.0,
            convexity_radius: f64::INFINITY,
        }
    }

    /// Registers a finite noise distribution; probabilities must sum to one.
    pub fn with_support(mut self, support: Vec<(f64, NoiseToken)>) -> Self {
        let total: f64 = support.iter().map(|(p, _)| p).sum();
        assert!((total - 1.0).abs() < 1e-12, "support probabilities sum to {total}");
        self.support = Some(support.into());
        self
    }

    pub fn with_characteristic(mut self, map: CharacteristicMap) -> Self {
        assert_eq!(self.objective.dim(), 1, "closed-form characteristics are one-dimensional");
        self.characteristic = Some(map);
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        assert_eq!(start.len(), self.dim());
        self.start = start;
        self
    }

    /// Working radius R and convexity radius R1 used by default.
    pub fn with_radii(mut self, working: f64, convexity: f64) -> Self {
        self.working_radius = working;
        self.convexity_radius = convexity;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &ObjectiveBundle {
        &self.objective
    }

    pub fn minimizer(&self) -> &[f64] {
        self.objective.minimizer()
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn default_start(&self) -> &[f64] {
        &self.start
    }

    pub fn working_radius(&self) -> f64 {
        self.working_radius
    }

    pub fn convexity_radius(&self) -> f64 {
        self.convexity_radius
    }

    pub fn support(&self) -> Option<&[(f64, NoiseToken)]> {
        self.support.as_deref()
    }

    pub fn characteristic(&self) -> Option<&CharacteristicMap> {
        self.characteristic.as_ref()
    }

    pub fn sample_xi(&self, rng: &mut TrajectoryRng, token: &mut NoiseToken) {
        (self.sampler)(rng, token)
    }

    pub fn stochastic_grad_into(&self, x: &[f64], xi: &NoiseToken, out: &mut [f64]) {
        (self.stochastic_grad)(x, xi, out)
    }

    pub fn stochastic_grad(&self, x: &[f64], xi: &NoiseToken) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.stochastic_grad_into(x, xi, &mut g);
        g
    }

    pub fn stochastic_hess_into(&self, x: &[f64], xi: &NoiseToken, out: &mut [f64]) {
        (self.stochastic_hess)(x, xi, out)
    }

    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        (self.sigma)(x, out)
    }

    pub fn sigma(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut s = vec![0.0; d * d];
        self.sigma_into(x, &mut s);
        DMatrix::from_row_slice(d, d, &s)
    }

    /// The same family in coordinates centred at the minimizer.
    pub fn recentered(&self) -> Self {
        let shift = self.minimizer().to_vec();
        let s: Arc<[f64]> = shift.clone().into();
        let back = |z: &[f64], s: &[f64]| -> Vec<f64> { z.iter().zip(s).map(|(a, b)| a + b).collect() };
        let (g, h, sig) = (
            self.stochastic_grad.clone(),
            self.stochastic_hess.clone(),
            self.sigma.clone(),
        );
        let (s1, s2, s3) = (s.clone(), s.clone(), s.clone());
        let characteristic = self.characteristic.clone().map(|c| {
            let m = shift[0];
            Arc::new(move |z: f64, t: f64| c(z + m, t) - m) as CharacteristicMap
        });
        Self {
            id: format!("{}(recentered)", self.id),
            objective: self.objective.translated(&shift),
            kind: self.kind,
            sampler: self.sampler.clone(),
            stochastic_grad: Arc::new(move |z, xi, o| g(&back(z, &s1), xi, o)),
            stochastic_hess: Arc::new(move |z, xi, o| h(&back(z, &s2), xi, o)),
            sigma: Arc::new(move |z, o| sig(&back(z, &s3), o)),
            support: self.support.clone(),
            characteristic,
            start: self.start.iter().zip(&shift).map(|(a, b)| a - b).collect(),
            working_radius: self.working_radius,
            convexity_radius: self.convexity_radius,
        }
    }

    /// One-dimensional additive Rademacher noise: f(x; xi) = f(x) + amplitude * xi * x.
    pub fn additive_rademacher(id: impl Into<String>, objective: ObjectiveBundle, amplitude: f64) -> Self {
        assert_eq!(objective.dim(), 1);
        let g_obj = objective.clone();
        let h_obj = objective.clone();
        let var = amplitude * amplitude;
        Self::new(
            id,
            objective,
            NoiseKind::Rademacher,
            Arc::new(|rng: &mut TrajectoryRng, tok: &mut NoiseToken| *tok = NoiseToken::Sign(rng.sign())),
            Arc::new(move |x: &[f64], xi: &NoiseToken, out: &mut [f64]| {
                g_obj.grad_into(x, out);
                if let NoiseToken::Sign(s) = xi {
                    out[0] += amplitude * s;
                }
            }),
            Arc::new(move |x: &[f64], _: &NoiseToken, out: &mut [f64]| h_obj.hess_into(x, out)),
            Arc::new(move |_: &[f64], out: &mut [f64]| out[0] = var),
        )
        .with_support(vec![(0.5, NoiseToken::Sign(-1.0)), (0.5, NoiseToken::Sign(1.0))])
    }

    /// Exact gradients: the chain is plain gradient descent.
    pub fn noiseless(id: impl Into<String>, objective: ObjectiveBundle) -> Self {
        let d = objective.dim();
        let g_obj = objective.clone();
        let h_obj = objective.clone();
        let mut fam = Self::new(
            id,
            objective,
            NoiseKind::Custom,
            Arc::new(|_: &mut TrajectoryRng, tok: &mut NoiseToken| *tok = NoiseToken::Zero),
            Arc::new(move |x: &[f64], _: &NoiseToken, out: &mut [f64]| g_obj.grad_into(x, out)),
            Arc::new(move |x: &[f64], _: &NoiseToken, out: &mut [f64]| h_obj.hess_into(x, out)),
            Arc::new(move |_: &[f64], out: &mut [f64]| out[..d * d].fill(0.0)),
        )
        .with_support(vec![(1.0, NoiseToken::Zero)]);
        fam.start = fam.minimizer().to_vec();
        fam
    }
}
