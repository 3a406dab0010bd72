use serde::Serialize;
use sgdlab_core::model::{
    certify_default, family_by_id, local_constants, ConvexityCertificate, LocalConstants, FAMILY_IDS, OBSERVABLE_IDS,
};

#[derive(Debug, Serialize)]
pub struct FamilyEntry {
    pub id: String,
    pub dim: usize,
    pub minimizer: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "R1")]
    pub convexity_radius: Option<f64>,
    pub certificate: Option<ConvexityCertificate>,
    /// Why the registered radius cannot be certified, with the constants sampled there.
    pub uncertified: Option<String>,
    pub local_constants: Option<LocalConstants>,
    pub closed_form: bool,
}

#[derive(Debug, Serialize)]
pub struct Registry {
    pub families: Vec<FamilyEntry>,
    pub observables: Vec<&'static str>,
}

pub fn registry() -> Registry {
    let families = FAMILY_IDS
        .iter()
        .map(|id| {
            let fam = family_by_id(id).expect("registered family");
            let (certificate, uncertified, local) = match certify_default(&fam) {
                Ok(c) => (Some(c), None, None),
                Err(e) => (None, Some(e.to_string()), Some(local_constants(&fam, fam.working_radius()))),
            };
            FamilyEntry {
                id: fam.id().to_string(),
                dim: fam.dim(),
                minimizer: fam.minimizer().to_vec(),
                radius: fam.working_radius(),
                convexity_radius: fam.convexity_radius().is_finite().then_some(fam.convexity_radius()),
                certificate,
                uncertified,
                local_constants: local,
                closed_form: fam.characteristic().is_some(),
            }
        })
        .collect();
    Registry {
        families,
        observables: OBSERVABLE_IDS.to_vec(),
    }
}

/// p/q with q <= 1000 when `v` is such a fraction to within 1e-12.
pub fn as_fraction(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    (1..=1000u32).find_map(|q| {
        let p = (v * q as f64).round();
        ((p / q as f64 - v).abs() <= 1e-12 * v.abs().max(1.0)).then(|| {
            if q == 1 {
                format!("{p}")
            } else {
                format!("{p}/{q}")
            }
        })
    })
}

fn num(v: f64) -> String {
    let base = format!("{v:.6}");
    match as_fraction(v) {
        Some(f) if f.contains('/') => format!("{base} ({f})"),
        _ => base,
    }
}

pub fn render_text(reg: &Registry) -> String {
    let mut out = String::new();
    out.push_str("families:\n");
    for f in &reg.families {
        out.push_str(&format!(
            "  {}  (dim {}, minimizer {:?}, closed form {})\n",
            f.id,
            f.dim,
            f.minimizer,
            if f.closed_form { "yes" } else { "no" }
        ));
        match (&f.certificate, &f.uncertified, &f.local_constants) {
            (Some(c), _, _) => out.push_str(&format!(
                "    certificate on R = {}: gamma = {}, b = {}{}, L = {}, R0 = {}, eta0 = {}\n",
                c.radius,
                num(c.gamma),
                num(c.b),
                if c.b_estimated { " (sampled)" } else { "" },
                num(c.lipschitz),
                num(c.r0),
                num(c.eta0)
            )),
            (None, Some(why), Some(l)) => out.push_str(&format!(
                "    not certified on R = {}: {why}\n    local constants: gamma = {}, b = {}, L = {}\n",
                f.radius,
                num(l.gamma),
                num(l.b),
                num(l.lipschitz)
            )),
            _ => {}
        }
    }
    out.push_str(&format!("observables: {}\n", reg.observables.join(", ")));
    out
}
