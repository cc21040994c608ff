//! Scenario documents: what to immerse, how to probe it and which checks to
//! run.
//!
//! Scenarios are JSON (schema 1). Expression-valued fields are strings in
//! the expression grammar; plain numbers are accepted wherever an expression
//! is. Names in `distributions` and `warp` may be frame field names or
//! parameter names (frame field `k` is paired with parameter `k`).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ambient::AmbientStructure;
use crate::expr::Expr;
use crate::par::probe_rng;
use crate::slant::Distributions;
use crate::submanifold::{FrameField, Immersion, Submanifold};
use crate::warped::{WarpData, WarpSource, WarpedSpec};

pub const SCENARIO_SCHEMA: u32 = 1;

/// A scenario that cannot be run as written.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {field}: {reason}")]
pub struct ConfigError {
    pub path: String,
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(path: &str, field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { path: path.to_string(), field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientSpec {
    Canonical {
        n: usize,
    },
    Explicit {
        coords: Vec<String>,
        phi: Vec<Vec<Expr>>,
        xi: Vec<Expr>,
        eta: Vec<Expr>,
        g: Vec<Vec<Expr>>,
        #[serde(default)]
        constants: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    pub params: Vec<String>,
    pub components: Vec<Expr>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub names: Vec<String>,
    /// Row `j` holds the coefficients of field `j` along `∂/∂u_k`.
    pub coeffs: Vec<Vec<Expr>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(default)]
    pub d_perp: Vec<String>,
    #[serde(default)]
    pub d_lambda: Vec<String>,
    #[serde(default)]
    pub xi: Option<String>,
    /// Declared slant coefficient; the measured one is used when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    /// Full parameter point; only its base coordinates matter.
    pub point: Vec<f64>,
    /// Value of `f` there.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpSpec {
    Declared { base: Vec<String>, fiber: Vec<String>, f: Expr },
    Detect { base: Vec<String>, fiber: Vec<String>, reference: Option<Reference> },
}

impl WarpSpec {
    pub fn base(&self) -> &[String] {
        match self {
            WarpSpec::Declared { base, .. } | WarpSpec::Detect { base, .. } => base,
        }
    }

    pub fn fiber(&self) -> &[String] {
        match self {
            WarpSpec::Declared { fiber, .. } | WarpSpec::Detect { fiber, .. } => fiber,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    Explicit { points: Vec<Vec<f64>> },
    Random { seed: u64, count: usize, bounds: BTreeMap<String, [f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedMetricSpec {
    pub spec: WarpedSpec,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// FAIL rows count as failures.
    #[default]
    Verify,
    /// Reproduces a published example: FAIL rows become FLAGGED.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSel {
    Id(String),
    Full {
        id: String,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        mode: Option<Mode>,
    },
}

impl CheckSel {
    pub fn id(&self) -> &str {
        match self {
            CheckSel::Id(id) | CheckSel::Full { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub default: f64,
    /// Ambient and submanifold structure identities; the ambient's own
    /// default (1e-12 constant, 1e-8 otherwise) when absent.
    #[serde(default)]
    pub axiom: Option<f64>,
    #[serde(default = "default_tol")]
    pub theorem: f64,
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { default: default_tol(), axiom: None, theorem: default_tol() }
    }
}

/// A literature value to compare against a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimSpec {
    /// Slant coefficient of `D_λ`.
    Lambda { source: String, claimed: f64 },
    /// `ρ(field)` at the first admissible point.
    Ratio { source: String, field: String, claimed: f64 },
    /// Warping function, compared scale-free: `f(u)/f(reference)` at the
    /// first admissible point.
    Warp { source: String, claimed: Expr },
    /// Gram entry `g(Z_i, Z_j)` at the first admissible point.
    Gram { source: String, i: String, j: String, claimed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Seed for probe streams.
    #[serde(default)]
    pub seed: u64,
    pub ambient: AmbientSpec,
    pub immersion: ImmersionSpec,
    #[serde(default)]
    pub frame: Option<FrameSpec>,
    #[serde(default)]
    pub distributions: Option<DistributionSpec>,
    #[serde(default)]
    pub warp: Option<WarpSpec>,
    #[serde(default)]
    pub warped_metric: Option<WarpedMetricSpec>,
    pub sampling: Sampling,
    #[serde(default)]
    pub checks: Option<Vec<CheckSel>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub reference_claims: Vec<ClaimSpec>,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    /// Replaces every tolerance class and per-check tolerance.
    pub tol: Option<f64>,
}

pub const BUILTINS: &[(&str, &str)] = &[
    ("example-4.1", include_str!("../scenarios/example-4.1.json")),
    ("example-4.2", include_str!("../scenarios/example-4.2.json")),
    ("synthetic-slant", include_str!("../scenarios/synthetic-slant.json")),
    ("synthetic-warped", include_str!("../scenarios/synthetic-warped.json")),
    ("product-tg", include_str!("../scenarios/product-tg.json")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

impl Scenario {
    /// Parses a scenario; `path` is only used in error messages.
    pub fn from_json(text: &str, path: &str) -> Result<Scenario, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(path, if field == "." { "(document)".to_string() } else { field }, e.into_inner().to_string())
        })?;
        if s.schema != SCENARIO_SCHEMA {
            return Err(ConfigError::new(path, "schema", format!("unsupported schema {}, expected {SCENARIO_SCHEMA}", s.schema)));
        }
        Ok(s)
    }

    /// Loads `builtin:NAME` or a file path.
    pub fn load(source: &str) -> Result<Scenario, ConfigError> {
        if let Some(name) = source.strip_prefix("builtin:") {
            let text = builtin(name).ok_or_else(|| {
                let known: Vec<&str> = BUILTINS.iter().map(|(n, _)| *n).collect();
                ConfigError::new(source, "(source)", format!("unknown builtin; available: {}", known.join(", ")))
            })?;
            return Scenario::from_json(text, source);
        }
        let text = std::fs::read_to_string(source).map_err(|e| ConfigError::new(source, "(file)", e.to_string()))?;
        Scenario::from_json(&text, source)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
            if let Sampling::Random { seed: s, .. } = &mut self.sampling {
                *s = seed;
            }
        }
        if let Some(n) = o.points {
            match &mut self.sampling {
                Sampling::Random { count, .. } => *count = n,
                Sampling::Explicit { points } => points.truncate(n.max(1)),
            }
            if let Some(w) = &mut self.warped_metric {
                match &mut w.sampling {
                    Sampling::Random { count, .. } => *count = n,
                    Sampling::Explicit { points } => points.truncate(n.max(1)),
                }
            }
        }
        if let Some(t) = o.tol {
            self.tolerances = Tolerances { default: t, axiom: Some(t), theorem: t };
            if let Some(checks) = &mut self.checks {
                for c in checks.iter_mut() {
                    if let CheckSel::Full { tol, .. } = c {
                        *tol = Some(t);
                    }
                }
            }
        }
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let canon = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

/// Draws or copies sample points for `names`.
pub fn sample(sampling: &Sampling, names: &[String], path: &str, field: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    match sampling {
        Sampling::Explicit { points } => {
            if points.is_empty() {
                return Err(ConfigError::new(path, format!("{field}.explicit.points"), "no points"));
            }
            for (i, p) in points.iter().enumerate() {
                if p.len() != names.len() {
                    return Err(ConfigError::new(
                        path,
                        format!("{field}.explicit.points[{i}]"),
                        format!("expected {} coordinates ({}), got {}", names.len(), names.join(", "), p.len()),
                    ));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(ConfigError::new(path, format!("{field}.explicit.points[{i}]"), "non-finite coordinate"));
                }
            }
            Ok(points.clone())
        }
        Sampling::Random { seed, count, bounds } => {
            if *count == 0 {
                return Err(ConfigError::new(path, format!("{field}.random.count"), "must be positive"));
            }
            if let Some(extra) = bounds.keys().find(|k| !names.contains(k)) {
                return Err(ConfigError::new(path, format!("{field}.random.bounds.{extra}"), "not a coordinate"));
            }
            let mut ranges = Vec::new();
            for n in names {
                let [lo, hi] = *bounds.get(n).ok_or_else(|| ConfigError::new(path, format!("{field}.random.bounds"), format!("missing bounds for `{n}`")))?;
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(ConfigError::new(path, format!("{field}.random.bounds.{n}"), format!("invalid interval [{lo}, {hi}]")));
                }
                ranges.push((lo, hi));
            }
            let mut rng = probe_rng(*seed, "sampling", 0);
            Ok((0..*count).map(|_| ranges.iter().map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect()).collect())
        }
    }
}

/// How one check is run.
#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub id: String,
    pub tol: f64,
    pub mode: Mode,
}

/// A validated scenario with everything built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub path: String,
    pub digest: String,
    pub sub: Submanifold,
    pub roles: Option<Distributions>,
    pub warp: Option<WarpData>,
    pub warped_metric: Option<(WarpedSpec, Vec<Vec<f64>>)>,
    pub points: Vec<Vec<f64>>,
    pub checks: Vec<Selected>,
}

/// Frame index of `name`: a frame field name, else a parameter name.
fn resolve(sub: &Submanifold, name: &str) -> Option<usize> {
    sub.frame.index_of(name).or_else(|| sub.imm.params().iter().position(|p| p == name))
}

fn resolve_all(sub: &Submanifold, names: &[String], path: &str, field: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    for (i, n) in names.iter().enumerate() {
        let k = resolve(sub, n).ok_or_else(|| ConfigError::new(path, format!("{field}[{i}]"), format!("`{n}` is neither a frame field nor a parameter")))?;
        if out.contains(&k) {
            return Err(ConfigError::new(path, format!("{field}[{i}]"), format!("`{n}` listed twice")));
        }
        out.push(k);
    }
    Ok(out)
}

impl Prepared {
    /// Validates names, builds the geometry, samples points and resolves the
    /// check list. `catalog` maps a check id to its tolerance class
    /// (`"axiom"`, `"theorem"` or `"default"`) and `defaults` lists the ids
    /// run when the scenario does not say.
    pub fn new(
        scenario: Scenario,
        path: &str,
        catalog: impl Fn(&str) -> Option<&'static str>,
        defaults: &[&str],
    ) -> Result<Prepared, ConfigError> {
        let s = &scenario;
        let err = |field: &str, e: crate::Error| ConfigError::new(path, field, e.to_string());
        let ambient = match &s.ambient {
            AmbientSpec::Canonical { n } => AmbientStructure::canonical_paracosymplectic(*n).map_err(|e| err("ambient.canonical.n", e))?,
            AmbientSpec::Explicit { coords, phi, xi, eta, g, constants } => {
                AmbientStructure::new(coords.clone(), phi.clone(), xi.clone(), eta.clone(), g.clone(), constants.clone()).map_err(|e| err("ambient.explicit", e))?
            }
        };
        let axiom_default = ambient.default_axiom_tol();
        let im = &s.immersion;
        for (i, c) in im.components.iter().enumerate() {
            if let Some(v) = c.free_vars().into_iter().find(|v| !im.params.contains(v) && !im.constants.contains_key(v)) {
                return Err(ConfigError::new(path, format!("immersion.components[{i}]"), format!("unbound name `{v}`")));
            }
        }
        let imm = Immersion::new(ambient, im.params.clone(), im.components.clone(), im.constants.clone()).map_err(|e| err("immersion", e))?;
        let frame = match &s.frame {
            None => FrameField::identity(imm.params()),
            Some(f) => FrameField::new(f.names.clone(), im.params.clone(), f.coeffs.clone(), im.constants.clone()).map_err(|e| err("frame", e))?,
        };
        let sub = Submanifold::new(imm, frame).map_err(|e| err("frame", e))?;
        let points = sample(&s.sampling, &im.params, path, "sampling")?;

        let roles = match &s.distributions {
            None => None,
            Some(d) => {
                let d_perp = resolve_all(&sub, &d.d_perp, path, "distributions.d_perp")?;
                let d_lambda = resolve_all(&sub, &d.d_lambda, path, "distributions.d_lambda")?;
                if let Some(k) = d_perp.iter().find(|k| d_lambda.contains(k)) {
                    return Err(ConfigError::new(path, "distributions", format!("`{}` is in both d_perp and d_lambda", sub.frame.names()[*k])));
                }
                let xi = match &d.xi {
                    None => None,
                    Some(n) => Some(resolve(&sub, n).ok_or_else(|| ConfigError::new(path, "distributions.xi", format!("`{n}` is neither a frame field nor a parameter")))?),
                };
                Some(Distributions { d_perp, d_lambda, xi, lambda: d.lambda })
            }
        };

        let warp = match &s.warp {
            None => None,
            Some(w) => {
                let key = match w {
                    WarpSpec::Declared { .. } => "warp.declared",
                    WarpSpec::Detect { .. } => "warp.detect",
                };
                let base = resolve_all(&sub, w.base(), path, &format!("{key}.base"))?;
                let fiber = resolve_all(&sub, w.fiber(), path, &format!("{key}.fiber"))?;
                let mut all: Vec<usize> = base.iter().chain(&fiber).copied().collect();
                all.sort_unstable();
                if all != (0..sub.dim()).collect::<Vec<_>>() {
                    return Err(ConfigError::new(path, key, "base and fiber must partition the frame"));
                }
                let source = match w {
                    WarpSpec::Declared { f, .. } => {
                        if let Some(v) = f.free_vars().into_iter().find(|v| !im.params.contains(v) && !im.constants.contains_key(v)) {
                            return Err(ConfigError::new(path, "warp.declared.f", format!("unbound name `{v}`")));
                        }
                        WarpSource::Declared { f: f.clone(), constants: im.constants.clone() }
                    }
                    WarpSpec::Detect { reference, .. } => {
                        let (point, f_ref) = match reference {
                            Some(r) => (r.point.clone(), r.f),
                            None => (points[0].clone(), 1.0),
                        };
                        if point.len() != sub.dim() {
                            return Err(ConfigError::new(path, "warp.detect.reference.point", format!("expected {} coordinates", sub.dim())));
                        }
                        if !(f_ref > 0.0) {
                            return Err(ConfigError::new(path, "warp.detect.reference.f", "must be positive"));
                        }
                        WarpSource::Detected { reference: point, f_ref }
                    }
                };
                Some(WarpData { base, fiber, source })
            }
        };

        let warped_metric = match &s.warped_metric {
            None => None,
            Some(w) => {
                w.spec.validate().map_err(|e| err("warped_metric.spec", e))?;
                let pts = sample(&w.sampling, &w.spec.coords(), path, "warped_metric.sampling")?;
                Some((w.spec.clone(), pts))
            }
        };

        let sels: Vec<CheckSel> = match &s.checks {
            Some(c) => c.clone(),
            None => defaults.iter().map(|id| CheckSel::Id(id.to_string())).collect(),
        };
        let mut checks = Vec::new();
        for (i, sel) in sels.iter().enumerate() {
            let id = sel.id();
            let class = catalog(id).ok_or_else(|| ConfigError::new(path, format!("checks[{i}]"), format!("unknown check id `{id}`")))?;
            if checks.iter().any(|c: &Selected| c.id == id) {
                return Err(ConfigError::new(path, format!("checks[{i}]"), format!("`{id}` listed twice")));
            }
            let class_tol = match class {
                "axiom" => s.tolerances.axiom.unwrap_or(axiom_default),
                "theorem" => s.tolerances.theorem,
                _ => s.tolerances.default,
            };
            let (tol, mode) = match sel {
                CheckSel::Id(_) => (class_tol, Mode::Verify),
                CheckSel::Full { tol, mode, .. } => (tol.unwrap_or(class_tol), mode.unwrap_or_default()),
            };
            if !(tol >= 0.0) {
                return Err(ConfigError::new(path, format!("checks[{i}].tol"), "must be non-negative"));
            }
            checks.push(Selected { id: id.to_string(), tol, mode });
        }
        for (i, c) in s.reference_claims.iter().enumerate() {
            let field = format!("reference_claims[{i}]");
            match c {
                ClaimSpec::Ratio { field: f, .. } if resolve(&sub, f).is_none() => {
                    return Err(ConfigError::new(path, field, format!("unknown frame field `{f}`")));
                }
                ClaimSpec::Gram { i: a, j: b, .. } if resolve(&sub, a).is_none() || resolve(&sub, b).is_none() => {
                    return Err(ConfigError::new(path, field, "unknown frame field"));
                }
                ClaimSpec::Warp { claimed, .. } => {
                    if let Some(v) = claimed.free_vars().into_iter().find(|v| !im.params.contains(v) && !im.constants.contains_key(v)) {
                        return Err(ConfigError::new(path, format!("{field}.claimed"), format!("unbound name `{v}`")));
                    }
                }
                _ => {}
            }
        }
        let digest = scenario.digest();
        Ok(Prepared { scenario, path: path.to_string(), digest, sub, roles, warp, warped_metric, points, checks })
    }

    pub fn frame_index(&self, name: &str) -> Option<usize> {
        resolve(&self.sub, name)
    }
}
