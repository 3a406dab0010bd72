use std::sync::Arc;

use nalgebra::DMatrix;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes a vector (length d), a row-major matrix (d*d) or a row-major
/// third-order tensor (d*d*d) into the output slice.
pub type ArrayField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Deterministic objective with analytic derivatives.
#[derive(Clone)]
pub struct ObjectiveBundle {
    dim: usize,
    value: ScalarField,
    grad: ArrayField,
    hess: ArrayField,
    third: Option<ArrayField>,
    minimizer: Vec<f64>,
}

impl std::fmt::Debug for ObjectiveBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveBundle")
            .field("dim", &self.dim)
            .field("minimizer", &self.minimizer)
            .field("has_third", &self.third.is_some())
            .finish()
    }
}

impl ObjectiveBundle {
    pub fn new(
        dim: usize,
        value: ScalarField,
        grad: ArrayField,
        hess: ArrayField,
        minimizer: Vec<f64>,
    ) -> Self {
        assert!(dim >= 1, "objective dimension must be positive");
        assert_eq!(minimizer.len(), dim, "minimizer has wrong dimension");
        Self {
            dim,
            value,
            grad,
            hess,
            third: None,
            minimizer,
        }
    }

    pub fn with_third(mut self, third: ArrayField) -> Self {
        self.third = Some(third);
        self
    }

    /// One-dimensional objective from scalar derivative closures.
    pub fn scalar<F, D1, D2, D3>(f: F, d1: D1, d2: D2, d3: D3, minimizer: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        D3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            1,
            Arc::new(move |x: &[f64]| f(x[0])),
            Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d1(x[0])),
            Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d2(x[0])),
            vec![minimizer],
        )
        .with_third(Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d3(x[0])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.grad_into(x, &mut g);
        g
    }

    pub fn hess_into(&self, x: &[f64], out: &mut [f64]) {
        (self.hess)(x, out)
    }

    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = vec![0.0; self.dim * self.dim];
        self.hess_into(x, &mut h);
        DMatrix::from_row_slice(self.dim, self.dim, &h)
    }

    pub fn has_third(&self) -> bool {
        self.third.is_some()
    }

    /// Returns false (leaving `out` untouched) when no third derivative was
    /// registered.
    pub fn third_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.third {
            Some(t) => {
                t(x, out);
                true
            }
            None => false,
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        let mut g = [0.0];
        self.grad_into(&[x], &mut g);
        g[0]
    }

    pub fn d2(&self, x: f64) -> f64 {
        let mut h = [0.0];
        self.hess_into(&[x], &mut h);
        h[0]
    }

    pub fn d3(&self, x: f64) -> Option<f64> {
        let mut t = [0.0];
        self.third_into(&[x], &mut t).then_some(t[0])
    }

    /// The same objective in coordinates `z = x - shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim);
        let s: Arc<[f64]> = shift.into();
        let back = move |z: &[f64], s: &[f64]| -> Vec<f64> { z.iter().zip(s).map(|(a, b)| a + b).collect() };
        let value = self.value.clone();
        let grad = self.grad.clone();
        let hess = self.hess.clone();
        let (s1, s2, s3, s4) = (s.clone(), s.clone(), s.clone(), s.clone());
        let mut out = Self::new(
            self.dim,
            Arc::new(move |z: &[f64]| value(&back(z, &s1))),
            Arc::new(move |z: &[f64], o: &mut [f64]| grad(&back(z, &s2), o)),
            Arc::new(move |z: &[f64], o: &mut [f64]| hess(&back(z, &s3), o)),
            self.minimizer.iter().zip(shift).map(|(m, s)| m - s).collect(),
        );
        if let Some(third) = self.third.clone() {
            out = out.with_third(Arc::new(move |z: &[f64], o: &mut [f64]| third(&back(z, &s4), o)));
        }
        out
    }
}

/// Observable with analytic derivatives.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    dim: usize,
    value: ScalarField,
    grad: ArrayField,
    hess: ArrayField,
    third: Option<ArrayField>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish()
    }
}

impl TestFunction {
    pub fn new(id: impl Into<String>, dim: usize, value: ScalarField, grad: ArrayField, hess: ArrayField) -> Self {
        Self {
            id: id.into(),
            dim,
            value,
            grad,
            hess,
            third: None,
        }
    }

    pub fn with_third(mut self, third: ArrayField) -> Self {
        self.third = Some(third);
        self
    }

    pub fn scalar<F, D1, D2, D3>(id: impl Into<String>, f: F, d1: D1, d2: D2, d3: D3) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        D3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            id,
            1,
            Arc::new(move |x: &[f64]| f(x[0])),
            Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d1(x[0])),
            Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d2(x[0])),
        )
        .with_third(Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = d3(x[0])))
    }

    /// Constant observable.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            format!("const({c})"),
            dim,
            Arc::new(move |_: &[f64]| c),
            Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
            Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)),
        )
        .with_third(Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0)))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    pub fn hess_into(&self, x: &[f64], out: &mut [f64]) {
        (self.hess)(x, out)
    }

    pub fn third_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        match &self.third {
            Some(t) => {
                t(x, out);
                true
            }
            None => false,
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.value(&[x])
    }

    pub fn d1(&self, x: f64) -> f64 {
        let mut g = [0.0];
        self.grad_into(&[x], &mut g);
        g[0]
    }

    pub fn d2(&self, x: f64) -> f64 {
        let mut h = [0.0];
        self.hess_into(&[x], &mut h);
        h[0]
    }

    pub fn d3(&self, x: f64) -> Option<f64> {
        let mut t = [0.0];
        self.third_into(&[x], &mut t).then_some(t[0])
    }

    /// phi(z + shift), for use with a recentered family.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let s: Arc<[f64]> = shift.into();
        let back = |z: &[f64], s: &[f64]| -> Vec<f64> { z.iter().zip(s).map(|(a, b)| a + b).collect() };
        let (v, g, h) = (self.value.clone(), self.grad.clone(), self.hess.clone());
        let (s1, s2, s3, s4) = (s.clone(), s.clone(), s.clone(), s.clone());
        let mut out = Self::new(
            self.id.clone(),
            self.dim,
            Arc::new(move |z: &[f64]| v(&back(z, &s1))),
            Arc::new(move |z: &[f64], o: &mut [f64]| g(&back(z, &s2), o)),
            Arc::new(move |z: &[f64], o: &mut [f64]| h(&back(z, &s3), o)),
        );
        if let Some(t) = self.third.clone() {
            out = out.with_third(Arc::new(move |z: &[f64], o: &mut [f64]| t(&back(z, &s4), o)));
        }
        out
    }
}
