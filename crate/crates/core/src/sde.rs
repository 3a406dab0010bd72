//! Weak Euler–Maruyama integration of diffusion approximations to SGD.
//!
//! The modified equation of a family with covariance `Sigma` is
//!
//! ```text
//! dX = -(grad f + (eta/2) hess f grad f)(X) dt + sqrt(eta Sigma(X)) dW
//! ```
//!
//! and a linear Ornstein–Uhlenbeck model is provided for comparisons with
//! closed-form Gaussian laws.

use std::sync::Mutex;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{OuReference, StochasticGradientFamily, TestFunction};
use crate::rng::TrajectoryRng;
use crate::sgd::{reduce_units, EstimateWithError};

/// Drift and diffusion of an Itô SDE.
pub trait SdeModel: Sync {
    fn dim(&self) -> usize;
    fn drift_into(&self, x: &[f64], out: &mut [f64]);
    /// Symmetric square root of the diffusion matrix at `x`, row-major.
    /// Returns the number of eigenvalues clamped to zero.
    fn diffusion_sqrt_into(&self, x: &[f64], out: &mut [f64]) -> Result<usize>;
}

/// Relative threshold below which negative eigenvalues are rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Symmetric PSD square root of a row-major `d x d` matrix by eigen
/// decomposition. Eigenvalues in `[-tol, 0)` are clamped and counted;
/// anything more negative (or non-finite) is an error.
pub fn sqrt_psd(m: &[f64], d: usize, out: &mut [f64]) -> Result<usize> {
    if d == 1 {
        let v = m[0];
        let tol = PSD_TOLERANCE * v.abs().max(1.0);
        if !v.is_finite() || v < -tol {
            return Err(Error::CovarianceNotPsd { eigenvalue: v });
        }
        out[0] = v.max(0.0).sqrt();
        return Ok((v < 0.0) as usize);
    }
    let a = DMatrix::from_row_slice(d, d, m);
    let a = 0.5 * (&a + a.transpose());
    let eig = SymmetricEigen::new(a);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut clamped = 0;
    let mut roots = eig.eigenvalues.clone();
    for r in roots.iter_mut() {
        if !r.is_finite() || *r < -PSD_TOLERANCE * scale {
            return Err(Error::CovarianceNotPsd { eigenvalue: *r });
        }
        if *r < 0.0 {
            clamped += 1;
            *r = 0.0;
        }
        *r = r.sqrt();
    }
    let s = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = s[(i, j)];
        }
    }
    Ok(clamped)
}

/// The modified SDE of a stochastic-gradient family at step size `eta`.
pub struct ModifiedSde<'a> {
    family: &'a StochasticGradientFamily,
    eta: f64,
}

impl<'a> ModifiedSde<'a> {
    pub fn new(family: &'a StochasticGradientFamily, eta: f64) -> Self {
        Self { family, eta }
    }
}

impl SdeModel for ModifiedSde<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let obj = self.family.objective();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        obj.grad_into(x, &mut g);
        obj.hess_into(x, &mut h);
        for i in 0..d {
            let hg: f64 = (0..d).map(|j| h[i * d + j] * g[j]).sum();
            out[i] = -g[i] - 0.5 * self.eta * hg;
        }
    }

    fn diffusion_sqrt_into(&self, x: &[f64], out: &mut [f64]) -> Result<usize> {
        let d = self.dim();
        let mut s = vec![0.0; d * d];
        self.family.sigma_into(x, &mut s);
        let clamped = sqrt_psd(&s, d, out)?;
        let a = self.eta.sqrt();
        out.iter_mut().for_each(|v| *v *= a);
        Ok(clamped)
    }
}

/// dX = -rate X dt + sqrt(noise) dW in one dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOuSde {
    pub rate: f64,
    pub noise: f64,
}

impl LinearOuSde {
    /// The process whose Gaussian law the reference evaluates: rate 1 + 2 eta
    /// and diffusion eta.
    pub fn for_reference(reference: &OuReference) -> Self {
        Self {
            rate: reference.rate(),
            noise: reference.eta,
        }
    }
}

impl SdeModel for LinearOuSde {
    fn dim(&self) -> usize {
        1
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.rate * x[0];
    }

    fn diffusion_sqrt_into(&self, _: &[f64], out: &mut [f64]) -> Result<usize> {
        sqrt_psd(&[self.noise], 1, out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdeConfig {
    pub eta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub seed: u64,
}

impl SdeConfig {
    /// Config with the default time step eta / 10.
    pub fn new(eta: f64, t_end: f64, x0: Vec<f64>, seed: u64) -> Self {
        Self {
            eta,
            dt: eta / 10.0,
            t_end,
            x0,
            seed,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Requires dt > 0, and dt <= eta whenever eta > 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.eta > 0.0 && self.dt > self.eta * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds eta = {}",
                self.dt, self.eta
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        Ok(())
    }

    /// Number of steps; the effective step is t_end / n_steps.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn effective_dt(&self) -> f64 {
        match self.n_steps() {
            0 => 0.0,
            n => self.t_end / n as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmOutcome {
    pub final_point: Vec<f64>,
    pub clamp_events: usize,
    /// (t, X_t) at every step when recorded.
    pub path: Option<Vec<(f64, Vec<f64>)>>,
}

struct Stepper<'m, M: SdeModel + ?Sized> {
    model: &'m M,
    drift: Vec<f64>,
    root: Vec<f64>,
    z: Vec<f64>,
}

impl<'m, M: SdeModel + ?Sized> Stepper<'m, M> {
    fn new(model: &'m M) -> Self {
        let d = model.dim();
        Self {
            model,
            drift: vec![0.0; d],
            root: vec![0.0; d * d],
            z: vec![0.0; d],
        }
    }

    /// One step using the Gaussian increment already stored in `self.z`,
    /// which must be scaled to sqrt(dt) units.
    fn apply(&mut self, x: &mut [f64], dt: f64) -> Result<usize> {
        let d = x.len();
        self.model.drift_into(x, &mut self.drift);
        let clamped = self.model.diffusion_sqrt_into(x, &mut self.root)?;
        for (i, xi) in x.iter_mut().enumerate() {
            let noise: f64 = (0..d).map(|j| self.root[i * d + j] * self.z[j]).sum();
            *xi += dt * self.drift[i] + noise;
        }
        Ok(clamped)
    }
}

fn integrate<M: SdeModel + ?Sized>(cfg: &SdeConfig, model: &M, index: u64, record: bool) -> Result<EmOutcome> {
    cfg.validate()?;
    let d = model.dim();
    if cfg.x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: cfg.x0.len() });
    }
    let n = cfg.n_steps();
    let dt = cfg.effective_dt();
    let sq = dt.sqrt();
    let mut rng = TrajectoryRng::new(cfg.seed, index);
    let mut st = Stepper::new(model);
    let mut x = cfg.x0.clone();
    let mut path = record.then(|| vec![(0.0, x.clone())]);
    let mut clamps = 0;
    for k in 0..n {
        for z in st.z.iter_mut() {
            *z = sq * rng.gaussian();
        }
        clamps += st.apply(&mut x, dt)?;
        if let Some(p) = path.as_mut() {
            p.push(((k + 1) as f64 * dt, x.clone()));
        }
    }
    Ok(EmOutcome {
        final_point: x,
        clamp_events: clamps,
        path,
    })
}

/// X_{t_end} of path `index`.
pub fn em_run<M: SdeModel + ?Sized>(cfg: &SdeConfig, model: &M, index: u64) -> Result<EmOutcome> {
    integrate(cfg, model, index, false)
}

/// As [`em_run`], keeping every step.
pub fn em_path<M: SdeModel + ?Sized>(cfg: &SdeConfig, model: &M, index: u64) -> Result<EmOutcome> {
    integrate(cfg, model, index, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdeEstimate {
    /// One estimate per observable.
    pub estimates: Vec<EstimateWithError>,
    pub clamp_events: u64,
}

/// Monte Carlo means of several observables at t_end over `n_paths` paths.
pub fn em_estimate<M: SdeModel + ?Sized>(
    cfg: &SdeConfig,
    model: &M,
    observables: &[&TestFunction],
    n_paths: u64,
) -> Result<SdeEstimate> {
    cfg.validate()?;
    if n_paths < 2 {
        return Err(Error::InvalidParameter("n_paths must be at least 2".into()));
    }
    let failure = Mutex::new(None);
    let (acc, clamps) = reduce_units(n_paths, observables.len(), |i, out| match em_run(cfg, model, i) {
        Ok(o) => {
            for (slot, phi) in out.iter_mut().zip(observables) {
                *slot = phi.value(&o.final_point);
            }
            o.clamp_events as u64
        }
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            out.fill(f64::NAN);
            0
        }
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(SdeEstimate {
        estimates: acc.iter().map(|w| w.finish()).collect(),
        clamp_events: clamps,
    })
}

/// Estimates of E phi(X_t) at steps dt, dt/2, ..., dt/2^levels driven by the
/// same Brownian path, together with the estimated differences between
/// consecutive levels (coarse minus fine).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub dts: Vec<f64>,
    pub estimates: Vec<EstimateWithError>,
    pub differences: Vec<EstimateWithError>,
}

pub fn em_refinement<M: SdeModel + ?Sized>(
    cfg: &SdeConfig,
    model: &M,
    phi: &TestFunction,
    levels: u32,
    n_paths: u64,
) -> Result<RefinementStudy> {
    cfg.validate()?;
    let d = model.dim();
    let n0 = cfg.n_steps();
    if n0 == 0 || n_paths < 2 {
        return Err(Error::InvalidParameter("refinement needs at least one step and two paths".into()));
    }
    let fine = 1usize << levels;
    let dt_fine = cfg.effective_dt() / fine as f64;
    let failure = Mutex::new(None);
    let nl = levels as usize + 1;
    let (acc, _) = reduce_units(n_paths, 2 * nl - 1, |i, out| {
        let mut rng = TrajectoryRng::new(cfg.seed, i);
        let mut states: Vec<Vec<f64>> = vec![cfg.x0.clone(); nl];
        let mut steppers: Vec<Stepper<M>> = (0..nl).map(|_| Stepper::new(model)).collect();
        let mut sums: Vec<Vec<f64>> = vec![vec![0.0; d]; nl];
        let mut bad = None;
        for k in 0..n0 * fine {
            let w: Vec<f64> = (0..d).map(|_| dt_fine.sqrt() * rng.gaussian()).collect();
            for l in 0..nl {
                // level l uses steps of 2^(levels - l) fine increments
                let group = 1usize << (levels as usize - l);
                sums[l].iter_mut().zip(&w).for_each(|(s, v)| *s += v);
                if (k + 1) % group == 0 {
                    steppers[l].z.copy_from_slice(&sums[l]);
                    sums[l].fill(0.0);
                    if let Err(e) = steppers[l].apply(&mut states[l], dt_fine * group as f64) {
                        bad.get_or_insert(e);
                    }
                }
            }
        }
        if let Some(e) = bad {
            failure.lock().expect("poisoned").get_or_insert(e);
        }
        let vals: Vec<f64> = states.iter().map(|s| phi.value(s)).collect();
        out[..nl].copy_from_slice(&vals);
        for l in 0..nl - 1 {
            out[nl + l] = vals[l] - vals[l + 1];
        }
        0
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(RefinementStudy {
        dts: (0..nl).map(|l| dt_fine * (1usize << (levels as usize - l)) as f64).collect(),
        estimates: acc[..nl].iter().map(|w| w.finish()).collect(),
        differences: acc[nl..].iter().map(|w| w.finish()).collect(),
    })
}

/// Closed-form E phi(X_t) for the linear OU reference.
pub fn ou_exact(phi: &TestFunction, x: f64, t: f64, eta: f64) -> Result<f64> {
    Ok(crate::model::make_ou_reference(eta)?.expectation(phi, x, t))
}
