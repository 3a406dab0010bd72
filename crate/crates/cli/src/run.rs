//! Dispatch of a parsed configuration to the experiment drivers.

use serde::Serialize;
use serde_json::{json, Value};
use sgdlab_core::analysis::{
    descent_time_experiment, ks_distance_uniform, uniformity_check, w2_decay_experiment, weak_error_experiment,
    WeakErrorSettings,
};
use sgdlab_core::expansion::{expansion_grid_each, ExpansionEvaluation, Method};
use sgdlab_core::export::{expansion_table, Cell, Table};
use sgdlab_core::model::{
    certify, family_by_id, make_ou_reference, observable_by_id, ConvexityCertificate, StochasticGradientFamily,
    TestFunction,
};
use sgdlab_core::sde::{em_estimate, LinearOuSde, SdeConfig};
use sgdlab_core::sgd::{recommended_burn_in, stationary_sample_from};
use sgdlab_core::Error;

use crate::config::{ExperimentConfig, MethodChoice, Params};
use crate::plot::{Plot, Series};

#[derive(Debug)]
pub enum RunError {
    /// The configuration cannot be run as written.
    Config(String),
    Runtime(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::UnknownId(_)
            | Error::SupportOutsideBall { .. }
            | Error::DimensionMismatch { .. }
            | Error::NoClosedForm { .. } => RunError::Config(e.to_string()),
            _ => RunError::Runtime(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct RunOutput {
    pub table: Table,
    /// Plot without its embedded data; `None` for experiments that are not curves.
    pub plot: Option<Plot>,
    pub summary: Value,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
}

fn config_error<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Config(msg.into()))
}

fn resolve_method(choice: MethodChoice, family: &StochasticGradientFamily) -> Method {
    match choice {
        MethodChoice::Auto => Method::preferred(family),
        MethodChoice::ClosedForm => Method::ClosedForm,
        MethodChoice::Numeric => Method::Numeric,
    }
}

/// Certificate on B(x*, radius); families the certificate does not cover
/// run uncertified with a warning.
fn certificate(
    family: &StochasticGradientFamily,
    radius: Option<f64>,
    warnings: &mut Vec<String>,
) -> (f64, Option<ConvexityCertificate>) {
    let r = radius.unwrap_or(family.working_radius());
    match certify(family, r, family.convexity_radius()) {
        Ok(c) => (r, Some(c)),
        Err(e) => {
            warnings.push(format!("uncertified: {} on R = {r}: {e}", family.id()));
            (r, None)
        }
    }
}

fn check_in_ball(family: &StochasticGradientFamily, x: &[f64], radius: f64) -> Result<(), RunError> {
    if x.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: x.len(),
        }
        .into());
    }
    let distance = x
        .iter()
        .zip(family.minimizer())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if distance > radius {
        return Err(Error::SupportOutsideBall { distance, radius }.into());
    }
    Ok(())
}

/// Long enough for a contraction of e^{-20} at rate eta per step.
fn default_burn_in(eta: f64) -> usize {
    recommended_burn_in(eta).max((20.0 / eta).ceil() as usize)
}

fn range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn push(table: &mut Table, row: Vec<Cell>) {
    table.push(row).expect("row width matches the header");
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let family = family_by_id(&cfg.family)?;
    let phi = observable_by_id(&cfg.phi, &family)?;
    let mut warnings = Vec::new();
    let mut assertions = Vec::new();
    let (table, plot, summary) = match &cfg.params {
        Params::WeakError(p) => {
            let (radius, cert) = certificate(&family, p.radius, &mut warnings);
            check_in_ball(&family, &p.x, radius)?;
            let mut s = WeakErrorSettings::new(p.x.clone(), p.horizon, p.eta_grid.clone(), p.n_samples, cfg.seed);
            s.variance_reduction = p.variance_reduction;
            s.method = resolve_method(p.method, &family);
            s.eta0 = cert.map(|c| c.eta0);
            s.guard_radius = p.guard.then_some(radius);
            let curve = weak_error_experiment(&family, &phi, &s)?;
            warnings.extend(curve.warnings.iter().cloned());
            let mut t = Table::new([
                "eta",
                "n_steps",
                "mc_value",
                "std_error",
                "n_samples",
                "u0",
                "u1",
                "u_trunc",
                "error",
                "noise_floor",
                "outside_certificate",
                "escaped_trajectories",
            ]);
            for q in &curve.points {
                push(
                    &mut t,
                    vec![
                        q.eta.into(),
                        q.n_steps.into(),
                        q.mc.value.into(),
                        q.mc.std_error.into(),
                        q.mc.n_samples.into(),
                        q.u0.into(),
                        q.u1.into(),
                        q.u_trunc.into(),
                        q.error.into(),
                        q.noise_floor.into(),
                        q.outside_certificate.into(),
                        q.escaped_trajectories.into(),
                    ],
                );
            }
            let slope = curve.fit.map(|f| f.slope);
            if p.slope_min.is_some() || p.slope_max.is_some() {
                let (lo, hi) = (p.slope_min.unwrap_or(f64::NEG_INFINITY), p.slope_max.unwrap_or(f64::INFINITY));
                assertions.push(Assertion {
                    name: "slope".into(),
                    passed: slope.is_some_and(|s| s >= lo && s <= hi),
                    detail: format!("fitted slope {slope:?} within [{lo}, {hi}]"),
                });
            }
            let fit_points = |f: &sgdlab_core::analysis::LineFit| {
                let (a, b) = (p.eta_grid[p.eta_grid.len() - 1], p.eta_grid[0]);
                [a, b].iter().map(|e| (*e, 2f64.powf(f.intercept) * e.powf(f.slope))).collect::<Vec<_>>()
            };
            let (kept, floor): (Vec<_>, Vec<_>) = curve.points.iter().partition(|q| !q.noise_floor);
            let mut series = vec![Series::markers("|mc - u^1|", kept.iter().map(|q| (q.eta, q.error)).collect())];
            if !floor.is_empty() {
                series.push(Series::markers("below noise floor", floor.iter().map(|q| (q.eta, q.error)).collect()));
            }
            let mut notes = Vec::new();
            if let Some(f) = &curve.fit {
                series.push(Series::dashed("least-squares fit", fit_points(f)));
                notes.push(format!("slope {:.3} (95% CI [{:.3}, {:.3}])", f.slope, f.slope_ci.0, f.slope_ci.1));
            }
            let plot = Plot {
                title: format!("weak error, {} with phi = {}, T = {}", family.id(), cfg.phi, p.horizon),
                x_label: "eta".into(),
                y_label: "error".into(),
                x_log: true,
                y_log: true,
                series,
                notes,
                ..Default::default()
            };
            let summary = json!({
                "slope": slope,
                "slope_ci": curve.fit.map(|f| [f.slope_ci.0, f.slope_ci.1]),
                "fit_points": curve.fit.map(|f| f.n_points),
                "slope_within_certificate": curve.fit_certified.map(|f| f.slope),
                "eta0": cert.map(|c| c.eta0),
                "certificate_radius": radius,
            });
            (t, Some(plot), summary)
        }
        Params::Uniformity(p) => {
            let (radius, cert) = certificate(&family, p.radius, &mut warnings);
            check_in_ball(&family, &p.x, radius)?;
            if let Some(c) = cert {
                if p.eta > c.eta0 {
                    warnings.push(format!("outside certificate: eta = {} exceeds eta0 = {}", p.eta, c.eta0));
                }
            }
            let r = uniformity_check(
                &family,
                &phi,
                &p.x,
                p.eta,
                &p.n_list,
                p.n_samples,
                cfg.seed,
                p.variance_reduction,
                resolve_method(p.method, &family),
            )?;
            warnings.extend(r.warnings.iter().cloned());
            let mut t = Table::new(["n", "t", "mc_value", "std_error", "u_trunc", "error", "noise_floor"]);
            for q in &r.points {
                push(
                    &mut t,
                    vec![
                        q.n_steps.into(),
                        (q.n_steps as f64 * p.eta).into(),
                        q.mc.value.into(),
                        q.mc.std_error.into(),
                        q.u_trunc.into(),
                        q.error.into(),
                        q.noise_floor.into(),
                    ],
                );
            }
            if p.assert_no_growth {
                assertions.push(Assertion {
                    name: "no_growth".into(),
                    passed: r.no_growth,
                    detail: format!("error at the largest n {:.3e} <= 2 x median {:.3e}", r.last_error, r.median_error),
                });
            }
            let plot = Plot {
                title: format!("error against n, {} with eta = {}", family.id(), p.eta),
                x_label: "n".into(),
                y_label: "error".into(),
                x_log: true,
                y_log: true,
                series: vec![Series::markers(
                    "|mc - u^1(x, n eta)|",
                    r.points.iter().map(|q| (q.n_steps as f64, q.error)).collect(),
                )],
                ..Default::default()
            };
            let summary = json!({
                "max_error": r.max_error,
                "median_error": r.median_error,
                "last_error": r.last_error,
                "no_growth": r.no_growth,
            });
            (t, Some(plot), summary)
        }
        Params::Stationary(p) => {
            if family.dim() != 1 {
                return config_error("stationary histograms need a one-dimensional family");
            }
            if p.ks_max.is_some() && p.ks_support.is_none() {
                return config_error("missing field: stationary.ks_support (needed by ks_max)");
            }
            if p.bins == 0 {
                return config_error("invalid value for stationary.bins: must be positive");
            }
            let burn_in = p.burn_in.unwrap_or_else(|| default_burn_in(p.eta));
            let x0 = p.x0.clone().unwrap_or_else(|| family.default_start().to_vec());
            let s = stationary_sample_from(&family, p.eta, burn_in, p.n_samples as usize, cfg.seed, &x0)?;
            let values = s.component(0);
            let (lo, hi) = p.ks_support.unwrap_or_else(|| {
                values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
            });
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            let width = (hi - lo) / p.bins as f64;
            let mut counts = vec![0u64; p.bins];
            for v in &values {
                let k = ((v - lo) / width).floor();
                if k >= 0.0 && (k as usize) < p.bins {
                    counts[k as usize] += 1;
                } else if *v == hi {
                    counts[p.bins - 1] += 1;
                }
            }
            let n = values.len() as f64;
            let mut t = Table::new(["bin_lo", "bin_hi", "count", "density"]);
            let mut bars = Vec::with_capacity(p.bins);
            for (k, c) in counts.iter().enumerate() {
                let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
                let density = *c as f64 / (n * width);
                push(&mut t, vec![a.into(), b.into(), (*c).into(), density.into()]);
                bars.push((a, b, density));
            }
            let ks = p.ks_support.map(|(a, b)| ks_distance_uniform(&values, a, b));
            if let (Some(max), Some(d)) = (p.ks_max, ks) {
                assertions.push(Assertion {
                    name: "ks_uniform".into(),
                    passed: d <= max,
                    detail: format!("KS distance to the uniform law {d:.5} <= {max}"),
                });
            }
            let mut notes = vec![format!("mean {:.5}", s.mean(0))];
            if let Some(d) = ks {
                notes.push(format!("KS distance {d:.5}"));
            }
            let plot = Plot {
                title: format!("samples after {burn_in} steps, {} with eta = {}", family.id(), p.eta),
                x_label: "x".into(),
                y_label: "density".into(),
                bars,
                notes,
                ..Default::default()
            };
            let summary = json!({ "mean": s.mean(0), "burn_in": burn_in, "ks_distance": ks });
            (t, Some(plot), summary)
        }
        Params::W2Decay(p) => {
            let c = w2_decay_experiment(&family, p.eta, p.x0_a, p.x0_b, &p.n_grid, p.n_samples, cfg.seed)?;
            let mut t = Table::new(["n", "w2", "reference"]);
            for ((n, w), r) in c.n_grid.iter().zip(&c.w2_values).zip(&c.reference) {
                push(&mut t, vec![(*n).into(), (*w).into(), (*r).into()]);
            }
            let fitted = c.fitted_log_rate.map(|f| f.slope);
            if p.assert_reference {
                assertions.push(Assertion {
                    name: "reference_rate".into(),
                    passed: fitted.is_some_and(|s| s <= c.reference_log_rate() + p.rate_slack),
                    detail: format!(
                        "fitted log-rate {fitted:?} <= ln rho_ref {:.5} + {}",
                        c.reference_log_rate(),
                        p.rate_slack
                    ),
                });
            }
            let ns: Vec<f64> = c.n_grid.iter().map(|n| *n as f64).collect();
            let mut notes = vec![format!("rho_ref {:.5}", c.rho_ref)];
            if let Some(s) = fitted {
                notes.push(format!("fitted rate per step {:.5}", s.exp()));
            }
            let plot = Plot {
                title: format!("W2 between chains from {} and {}, eta = {}", p.x0_a, p.x0_b, p.eta),
                x_label: "n".into(),
                y_label: "W2".into(),
                y_log: true,
                series: vec![
                    Series::markers("empirical W2", ns.iter().copied().zip(c.w2_values.iter().copied()).collect()),
                    Series::dashed("rho_ref^n |x0_a - x0_b|", ns.iter().copied().zip(c.reference.iter().copied()).collect()),
                ],
                notes,
                ..Default::default()
            };
            let summary = json!({
                "rho_ref": c.rho_ref,
                "fitted_log_rate": fitted,
                "reference_log_rate": c.reference_log_rate(),
                "constants": c.constants,
            });
            (t, Some(plot), summary)
        }
        Params::DescentTime(p) => {
            let x0 = p.x0.clone().unwrap_or_else(|| family.default_start().to_vec());
            let d = descent_time_experiment(&family, &p.eta_grid, &x0, p.n_samples, cfg.seed, p.variance_reduction)?;
            let mut t = Table::new(["eta", "n_star", "gap", "std_error", "ratio"]);
            for r in &d.rows {
                push(
                    &mut t,
                    vec![r.eta.into(), r.n_star.into(), r.gap.value.into(), r.gap.std_error.into(), r.ratio.into()],
                );
            }
            if let Some(max) = p.max_ratio_spread {
                assertions.push(Assertion {
                    name: "ratio_spread".into(),
                    passed: d.ratio_spread <= max,
                    detail: format!("max / min of gap / eta {:.3} <= {max}", d.ratio_spread),
                });
            }
            let plot = Plot {
                title: format!("objective gap at n* = ceil(ln(1/eta)/eta), {}", family.id()),
                x_label: "eta".into(),
                y_label: "E f(X_n*) - f(x*)".into(),
                x_log: true,
                y_log: true,
                series: vec![Series::markers("gap", d.rows.iter().map(|r| (r.eta, r.gap.value)).collect())],
                notes: vec![format!("ratio spread {:.3}", d.ratio_spread)],
                ..Default::default()
            };
            let summary = json!({ "ratio_spread": d.ratio_spread, "initial_gap": d.initial_gap });
            (t, Some(plot), summary)
        }
        Params::ExpansionGrid(p) => {
            if family.dim() != 1 {
                return config_error("expansion grids need a one-dimensional family");
            }
            let method = resolve_method(p.method, &family);
            let points: Vec<(Vec<f64>, f64)> = range(p.x_range.0, p.x_range.1, p.x_points)
                .into_iter()
                .flat_map(|x| range(p.t_range.0, p.t_range.1, p.t_points).into_iter().map(move |t| (vec![x], t)))
                .collect();
            let results = expansion_grid_each(&points, p.eta, &phi, &family, method);
            let mut singular = 0usize;
            let mut evals = Vec::with_capacity(points.len());
            for ((x, t), r) in points.iter().zip(results) {
                match r {
                    Ok(e) => evals.push(e),
                    Err(Error::SingularCharacteristic { .. }) => {
                        singular += 1;
                        evals.push(ExpansionEvaluation {
                            x: x.clone(),
                            t: *t,
                            eta: p.eta,
                            u0: f64::NAN,
                            u1: f64::NAN,
                            u_trunc: f64::NAN,
                            method,
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if singular > 0 {
                warnings.push(format!("singular characteristic at {singular} grid points; written as nan"));
            }
            let summary = json!({ "points": evals.len(), "singular_points": singular, "method": method.as_str() });
            (expansion_table(&evals), None, summary)
        }
        Params::OuCheck(p) => {
            if cfg.family != "ou" {
                return config_error(format!("invalid value for family: ou-check runs on `ou`, not `{}`", cfg.family));
            }
            let reference = make_ou_reference(p.eta)?;
            let model = LinearOuSde::for_reference(&reference);
            let mut sde = SdeConfig::new(p.eta, p.t_end, vec![p.x0], cfg.seed);
            if let Some(dt) = p.dt {
                sde = sde.with_dt(dt);
            }
            let id = observable_by_id("identity", &family)?;
            let sq = observable_by_id("square", &family)?;
            let mut observables: Vec<&TestFunction> = vec![&id, &sq];
            if cfg.phi != "identity" && cfg.phi != "square" {
                observables.push(&phi);
            }
            let est = em_estimate(&sde, &model, &observables, p.n_paths)?;
            let mut t = Table::new(["observable", "estimate", "std_error", "exact", "z"]);
            let mut worst = 0.0f64;
            for (obs, e) in observables.iter().zip(&est.estimates) {
                let exact = reference.expectation(obs, p.x0, p.t_end);
                let z = (e.value - exact) / e.std_error;
                worst = worst.max(z.abs());
                push(&mut t, vec![obs.id().into(), e.value.into(), e.std_error.into(), exact.into(), z.into()]);
            }
            if let Some(max) = p.max_sigmas {
                assertions.push(Assertion {
                    name: "ou_moments".into(),
                    passed: worst <= max,
                    detail: format!("largest |estimate - exact| / std_error {worst:.3} <= {max}"),
                });
            }
            if est.clamp_events > 0 {
                warnings.push(format!("{} diffusion square roots were clamped", est.clamp_events));
            }
            (t, None, json!({ "max_abs_z": worst, "rate": reference.rate() }))
        }
    };
    Ok(RunOutput {
        table,
        plot,
        summary,
        assertions,
        warnings,
    })
}
