//! Experiment configuration files.
//!
//! A configuration is flat key-value text. Keys shared by every experiment
//! sit at the top; the parameters of the selected experiment sit in a
//! section named after it:
//!
//! ```text
//! experiment = weak-error
//! family = example1
//! phi = sin
//! seed = 7
//! output = weak.csv
//!
//! [weak-error]
//! x = 1
//! horizon = 5
//! eta_grid = 1/2, 1/4, 1/8, 1/16
//! n_samples = 500000
//! ```
//!
//! Lists are comma separated and reals may be written as fractions `p/q`.
//! Unknown keys and sections are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;
use sgdlab_core::sgd::VarianceReduction;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    WeakError,
    Uniformity,
    Stationary,
    W2Decay,
    DescentTime,
    ExpansionGrid,
    OuCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::WeakError,
        ExperimentKind::Uniformity,
        ExperimentKind::Stationary,
        ExperimentKind::W2Decay,
        ExperimentKind::DescentTime,
        ExperimentKind::ExpansionGrid,
        ExperimentKind::OuCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::WeakError => "weak-error",
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::W2Decay => "w2-decay",
            ExperimentKind::DescentTime => "descent-time",
            ExperimentKind::ExpansionGrid => "expansion-grid",
            ExperimentKind::OuCheck => "ou-check",
        }
    }

    fn parse(s: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).map_or_else(
            || {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
                err(format!("unknown experiment: {s} (expected one of {})", names.join(", ")))
            },
            Ok,
        )
    }
}

/// Closed form when the family has one, or a fixed choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Auto,
    ClosedForm,
    Numeric,
}

impl MethodChoice {
    fn as_str(self) -> &'static str {
        match self {
            MethodChoice::Auto => "auto",
            MethodChoice::ClosedForm => "closed_form",
            MethodChoice::Numeric => "numeric",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakErrorParams {
    pub x: Vec<f64>,
    pub horizon: f64,
    pub eta_grid: Vec<f64>,
    pub n_samples: u64,
    pub variance_reduction: VarianceReduction,
    pub method: MethodChoice,
    /// Radius of the certificate that decides which steps are admitted.
    pub radius: Option<f64>,
    /// Count trajectories leaving the certificate ball.
    pub guard: bool,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityParams {
    pub x: Vec<f64>,
    pub eta: f64,
    pub n_list: Vec<usize>,
    pub n_samples: u64,
    pub variance_reduction: VarianceReduction,
    pub method: MethodChoice,
    pub radius: Option<f64>,
    pub assert_no_growth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryParams {
    pub eta: f64,
    pub burn_in: Option<usize>,
    pub n_samples: u64,
    pub x0: Option<Vec<f64>>,
    pub bins: usize,
    /// Interval of a uniform reference law for the KS distance.
    pub ks_support: Option<(f64, f64)>,
    pub ks_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W2DecayParams {
    pub eta: f64,
    pub x0_a: f64,
    pub x0_b: f64,
    pub n_grid: Vec<usize>,
    pub n_samples: u64,
    /// Fail unless the fitted log-rate is at most ln(rho_ref) + rate_slack.
    pub assert_reference: bool,
    pub rate_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentTimeParams {
    pub eta_grid: Vec<f64>,
    pub x0: Option<Vec<f64>>,
    pub n_samples: u64,
    pub variance_reduction: VarianceReduction,
    pub max_ratio_spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionGridParams {
    pub eta: f64,
    pub x_range: (f64, f64),
    pub x_points: usize,
    pub t_range: (f64, f64),
    pub t_points: usize,
    pub method: MethodChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuCheckParams {
    pub eta: f64,
    pub x0: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub n_paths: u64,
    pub max_sigmas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    WeakError(WeakErrorParams),
    Uniformity(UniformityParams),
    Stationary(StationaryParams),
    W2Decay(W2DecayParams),
    DescentTime(DescentTimeParams),
    ExpansionGrid(ExpansionGridParams),
    OuCheck(OuCheckParams),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: String,
    pub phi: String,
    pub seed: u64,
    pub output: String,
    pub params: Params,
}

/// Keys of one section, consumed as they are read.
struct Fields {
    section: String,
    values: BTreeMap<String, String>,
}

fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("not a number: {s}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("not a number: {s}"))?;
            p / q
        }
        None => s.parse().map_err(|_| format!("not a number: {s}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("not a finite number: {s}"))
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty()).collect()
}

impl Fields {
    fn name(&self, key: &str) -> String {
        if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.section)
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<String, ConfigError> {
        self.raw(key).map_or_else(|| err(format!("missing field: {}", self.name(key))), Ok)
    }

    fn with<T>(&self, key: &str, raw: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        f(raw).map_err(|e| ConfigError(format!("invalid value for {}: {e}", self.name(key))))
    }

    fn real(&mut self, key: &str) -> Result<f64, ConfigError> {
        let raw = self.required(key)?;
        self.with(key, &raw, parse_real)
    }

    fn opt_real(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            Some(raw) => self.with(key, &raw, parse_real).map(Some),
            None => Ok(None),
        }
    }

    fn reals(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.required(key)?;
        self.with(key, &raw, |s| {
            let v = split_list(s).into_iter().map(parse_real).collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("empty list".into());
            }
            Ok(v)
        })
    }

    fn opt_reals(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        if self.values.contains_key(key) {
            self.reals(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn pair(&mut self, key: &str) -> Result<(f64, f64), ConfigError> {
        let v = self.reals(key)?;
        match v.as_slice() {
            [a, b] if a < b => Ok((*a, *b)),
            _ => err(format!("invalid value for {}: expected two increasing numbers", self.name(key))),
        }
    }

    fn opt_pair(&mut self, key: &str) -> Result<Option<(f64, f64)>, ConfigError> {
        if self.values.contains_key(key) {
            self.pair(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn count(&mut self, key: &str) -> Result<u64, ConfigError> {
        let raw = self.required(key)?;
        self.with(key, &raw, parse_count)
    }

    fn opt_count(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            Some(raw) => self.with(key, &raw, parse_count).map(Some),
            None => Ok(None),
        }
    }

    fn counts(&mut self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let raw = self.required(key)?;
        self.with(key, &raw, |s| {
            let v = split_list(s)
                .into_iter()
                .map(|c| parse_count(c).map(|n| n as usize))
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("empty list".into());
            }
            Ok(v)
        })
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(raw) => self.with(key, &raw, |s| match s.trim() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(format!("expected true or false, got {other}")),
            }),
        }
    }

    fn variance_reduction(&mut self, default: VarianceReduction) -> Result<VarianceReduction, ConfigError> {
        match self.raw("variance_reduction") {
            None => Ok(default),
            Some(raw) => self.with("variance_reduction", &raw, |s| match s.trim() {
                "plain" => Ok(VarianceReduction::Plain),
                "antithetic" => Ok(VarianceReduction::Antithetic),
                other => Err(format!("expected plain or antithetic, got {other}")),
            }),
        }
    }

    fn method(&mut self) -> Result<MethodChoice, ConfigError> {
        match self.raw("method") {
            None => Ok(MethodChoice::Auto),
            Some(raw) => self.with("method", &raw, |s| match s.trim() {
                "auto" => Ok(MethodChoice::Auto),
                "closed_form" => Ok(MethodChoice::ClosedForm),
                "numeric" => Ok(MethodChoice::Numeric),
                other => Err(format!("expected auto, closed_form or numeric, got {other}")),
            }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.values.keys().next() {
            Some(k) => err(format!("unknown key: {}", self.name(k))),
            None => Ok(()),
        }
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.replace('_', "").parse::<u64>() {
        return Ok(n);
    }
    // 1e6 style counts
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) => Ok(v as u64),
        _ => Err(format!("not a nonnegative integer: {s}")),
    }
}

fn vr_name(v: VarianceReduction) -> &'static str {
    match v {
        VarianceReduction::Plain => "plain",
        VarianceReduction::Antithetic => "antithetic",
    }
}

impl Params {
    fn parse(kind: ExperimentKind, f: &mut Fields) -> Result<Self, ConfigError> {
        Ok(match kind {
            ExperimentKind::WeakError => Params::WeakError(WeakErrorParams {
                x: f.reals("x")?,
                horizon: f.real("horizon")?,
                eta_grid: f.reals("eta_grid")?,
                n_samples: f.count("n_samples")?,
                variance_reduction: f.variance_reduction(VarianceReduction::Antithetic)?,
                method: f.method()?,
                radius: f.opt_real("radius")?,
                guard: f.flag("guard", false)?,
                slope_min: f.opt_real("slope_min")?,
                slope_max: f.opt_real("slope_max")?,
            }),
            ExperimentKind::Uniformity => Params::Uniformity(UniformityParams {
                x: f.reals("x")?,
                eta: f.real("eta")?,
                n_list: f.counts("n_list")?,
                n_samples: f.count("n_samples")?,
                variance_reduction: f.variance_reduction(VarianceReduction::Antithetic)?,
                method: f.method()?,
                radius: f.opt_real("radius")?,
                assert_no_growth: f.flag("assert_no_growth", false)?,
            }),
            ExperimentKind::Stationary => Params::Stationary(StationaryParams {
                eta: f.real("eta")?,
                burn_in: f.opt_count("burn_in")?.map(|n| n as usize),
                n_samples: f.count("n_samples")?,
                x0: f.opt_reals("x0")?,
                bins: f.opt_count("bins")?.unwrap_or(40) as usize,
                ks_support: f.opt_pair("ks_support")?,
                ks_max: f.opt_real("ks_max")?,
            }),
            ExperimentKind::W2Decay => Params::W2Decay(W2DecayParams {
                eta: f.real("eta")?,
                x0_a: f.real("x0_a")?,
                x0_b: f.real("x0_b")?,
                n_grid: f.counts("n_grid")?,
                n_samples: f.count("n_samples")?,
                assert_reference: f.flag("assert_reference", false)?,
                rate_slack: f.opt_real("rate_slack")?.unwrap_or(0.01),
            }),
            ExperimentKind::DescentTime => Params::DescentTime(DescentTimeParams {
                eta_grid: f.reals("eta_grid")?,
                x0: f.opt_reals("x0")?,
                n_samples: f.count("n_samples")?,
                variance_reduction: f.variance_reduction(VarianceReduction::Plain)?,
                max_ratio_spread: f.opt_real("max_ratio_spread")?,
            }),
            ExperimentKind::ExpansionGrid => Params::ExpansionGrid(ExpansionGridParams {
                eta: f.real("eta")?,
                x_range: f.pair("x_range")?,
                x_points: f.count("x_points")? as usize,
                t_range: f.pair_allow_equal("t_range")?,
                t_points: f.count("t_points")? as usize,
                method: f.method()?,
            }),
            ExperimentKind::OuCheck => Params::OuCheck(OuCheckParams {
                eta: f.real("eta")?,
                x0: f.real("x0")?,
                t_end: f.real("t_end")?,
                dt: f.opt_real("dt")?,
                n_paths: f.count("n_paths")?,
                max_sigmas: f.opt_real("max_sigmas")?,
            }),
        })
    }

    fn dump(&self) -> Vec<(&'static str, String)> {
        let r = |v: f64| format!("{v}");
        let rs = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let ns = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let pair = |p: (f64, f64)| format!("{}, {}", p.0, p.1);
        let mut out: Vec<(&'static str, String)> = Vec::new();
        let opt = |out: &mut Vec<(&'static str, String)>, k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        match self {
            Params::WeakError(p) => {
                out.push(("x", rs(&p.x)));
                out.push(("horizon", r(p.horizon)));
                out.push(("eta_grid", rs(&p.eta_grid)));
                out.push(("n_samples", p.n_samples.to_string()));
                out.push(("variance_reduction", vr_name(p.variance_reduction).into()));
                out.push(("method", p.method.as_str().into()));
                opt(&mut out, "radius", p.radius.map(r));
                out.push(("guard", p.guard.to_string()));
                opt(&mut out, "slope_min", p.slope_min.map(r));
                opt(&mut out, "slope_max", p.slope_max.map(r));
            }
            Params::Uniformity(p) => {
                out.push(("x", rs(&p.x)));
                out.push(("eta", r(p.eta)));
                out.push(("n_list", ns(&p.n_list)));
                out.push(("n_samples", p.n_samples.to_string()));
                out.push(("variance_reduction", vr_name(p.variance_reduction).into()));
                out.push(("method", p.method.as_str().into()));
                opt(&mut out, "radius", p.radius.map(r));
                out.push(("assert_no_growth", p.assert_no_growth.to_string()));
            }
            Params::Stationary(p) => {
                out.push(("eta", r(p.eta)));
                opt(&mut out, "burn_in", p.burn_in.map(|n| n.to_string()));
                out.push(("n_samples", p.n_samples.to_string()));
                opt(&mut out, "x0", p.x0.as_deref().map(rs));
                out.push(("bins", p.bins.to_string()));
                opt(&mut out, "ks_support", p.ks_support.map(pair));
                opt(&mut out, "ks_max", p.ks_max.map(r));
            }
            Params::W2Decay(p) => {
                out.push(("eta", r(p.eta)));
                out.push(("x0_a", r(p.x0_a)));
                out.push(("x0_b", r(p.x0_b)));
                out.push(("n_grid", ns(&p.n_grid)));
                out.push(("n_samples", p.n_samples.to_string()));
                out.push(("assert_reference", p.assert_reference.to_string()));
                out.push(("rate_slack", r(p.rate_slack)));
            }
            Params::DescentTime(p) => {
                out.push(("eta_grid", rs(&p.eta_grid)));
                opt(&mut out, "x0", p.x0.as_deref().map(rs));
                out.push(("n_samples", p.n_samples.to_string()));
                out.push(("variance_reduction", vr_name(p.variance_reduction).into()));
                opt(&mut out, "max_ratio_spread", p.max_ratio_spread.map(r));
            }
            Params::ExpansionGrid(p) => {
                out.push(("eta", r(p.eta)));
                out.push(("x_range", pair(p.x_range)));
                out.push(("x_points", p.x_points.to_string()));
                out.push(("t_range", pair(p.t_range)));
                out.push(("t_points", p.t_points.to_string()));
                out.push(("method", p.method.as_str().into()));
            }
            Params::OuCheck(p) => {
                out.push(("eta", r(p.eta)));
                out.push(("x0", r(p.x0)));
                out.push(("t_end", r(p.t_end)));
                opt(&mut out, "dt", p.dt.map(r));
                out.push(("n_paths", p.n_paths.to_string()));
                opt(&mut out, "max_sigmas", p.max_sigmas.map(r));
            }
        }
        out
    }
}

impl Fields {
    fn pair_allow_equal(&mut self, key: &str) -> Result<(f64, f64), ConfigError> {
        let v = self.reals(key)?;
        match v.as_slice() {
            [a, b] if a <= b => Ok((*a, *b)),
            _ => err(format!("invalid value for {}: expected two nondecreasing numbers", self.name(key))),
        }
    }
}

type Section = (String, BTreeMap<String, String>);

fn sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let doc = ini::Ini::load_from_str(text).map_err(|e| ConfigError(format!("syntax error: {e}")))?;
    let mut out: Vec<Section> = Vec::new();
    for (name, props) in doc.iter() {
        let name = name.unwrap_or("").to_string();
        if !name.is_empty() && out.iter().any(|(n, _)| *n == name) {
            return err(format!("duplicate section: [{name}]"));
        }
        let mut map = BTreeMap::new();
        for (k, v) in props.iter() {
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                let full = if name.is_empty() { k.to_string() } else { format!("{name}.{k}") };
                return err(format!("duplicate key: {full}"));
            }
        }
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, existing)) => existing.extend(map),
            None => out.push((name, map)),
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut secs = sections(text)?;
        let general = secs
            .iter()
            .position(|(n, _)| n.is_empty())
            .map(|i| secs.remove(i).1)
            .unwrap_or_default();
        let mut top = Fields {
            section: String::new(),
            values: general,
        };
        let experiment = ExperimentKind::parse(&top.required("experiment")?)?;
        let family = top.required("family")?;
        let default_phi = if experiment == ExperimentKind::DescentTime { "f-itself" } else { "sin" };
        let phi = top.raw("phi").unwrap_or_else(|| default_phi.to_string());
        if experiment == ExperimentKind::DescentTime && phi != "f-itself" {
            return err("invalid value for phi: descent-time always measures f itself");
        }
        let seed = match top.raw("seed") {
            Some(raw) => top.with("seed", &raw, parse_count)?,
            None => 0,
        };
        let output = top.required("output")?;
        top.finish()?;

        let name = experiment.as_str();
        if let Some((other, _)) = secs.iter().find(|(n, _)| n != name) {
            return err(format!("unknown section: [{other}]"));
        }
        let values = secs.pop().map(|(_, v)| v).unwrap_or_default();
        let mut fields = Fields {
            section: name.to_string(),
            values,
        };
        let params = Params::parse(experiment, &mut fields)?;
        fields.finish()?;
        Ok(Self {
            experiment,
            family,
            phi,
            seed,
            output,
            params,
        })
    }

    /// Canonical text form; parses back to an identical configuration.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.as_str());
        let _ = writeln!(s, "family = {}", self.family);
        let _ = writeln!(s, "phi = {}", self.phi);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output = {}", self.output);
        let _ = writeln!(s, "\n[{}]", self.experiment.as_str());
        for (k, v) in self.params.dump() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEAK: &str = "experiment = weak-error\nfamily = example1\nseed = 3\noutput = w.csv\n\n[weak-error]\nx = 1\nhorizon = 5\neta_grid = 1/2, 1/4, 1/8\nn_samples = 1e5\n";

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::parse(WEAK).unwrap();
        assert_eq!(c.phi, "sin");
        let Params::WeakError(p) = &c.params else { panic!() };
        assert_eq!(p.eta_grid, vec![0.5, 0.25, 0.125]);
        assert_eq!(p.n_samples, 100_000);
        assert_eq!(p.variance_reduction, VarianceReduction::Antithetic);
    }

    #[test]
    fn empty_config_misses_experiment() {
        assert_eq!(ExperimentConfig::parse("").unwrap_err().0, "missing field: experiment");
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let e = ExperimentConfig::parse(&format!("{WEAK}colour = red\n")).unwrap_err();
        assert_eq!(e.0, "unknown key: weak-error.colour");
        let e = ExperimentConfig::parse(&format!("{WEAK}[stationary]\neta = 1\n")).unwrap_err();
        assert_eq!(e.0, "unknown section: [stationary]");
        let e = ExperimentConfig::parse(&WEAK.replace("seed = 3", "seed = 3\nthreads = 2")).unwrap_err();
        assert_eq!(e.0, "unknown key: threads");
    }

    #[test]
    fn bad_values_name_the_key() {
        let e = ExperimentConfig::parse(&WEAK.replace("horizon = 5", "horizon = five")).unwrap_err();
        assert!(e.0.starts_with("invalid value for weak-error.horizon"), "{e}");
        let e = ExperimentConfig::parse(&WEAK.replace("n_samples = 1e5", "n_samples = 2.5")).unwrap_err();
        assert!(e.0.contains("n_samples"));
    }

    #[test]
    fn dump_round_trips() {
        let c = ExperimentConfig::parse(WEAK).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.dump()).unwrap(), c);
        let grid = "experiment = expansion-grid\nfamily = example1\noutput = g.csv\n[expansion-grid]\neta = 0.01\nx_range = -4, 4\nx_points = 81\nt_range = 0, 2\nt_points = 21\n";
        let c = ExperimentConfig::parse(grid).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.dump()).unwrap(), c);
    }

    #[test]
    fn descent_time_forces_the_objective() {
        let text = "experiment = descent-time\nfamily = example1\nphi = sin\noutput = d.csv\n[descent-time]\neta_grid = 0.25\nn_samples = 10\n";
        assert!(ExperimentConfig::parse(text).is_err());
        let c = ExperimentConfig::parse(&text.replace("phi = sin\n", "")).unwrap();
        assert_eq!(c.phi, "f-itself");
    }

    #[test]
    fn fractions_and_counts() {
        assert_eq!(parse_real("3/26").unwrap(), 3.0 / 26.0);
        assert!(parse_real("1/0").is_err());
        assert_eq!(parse_count("1_000_000").unwrap(), 1_000_000);
        assert!(parse_count("-1").is_err());
    }
}
