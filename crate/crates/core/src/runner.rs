//! Check catalog and the scenario pipeline that turns a [`Prepared`]
//! scenario into a [`CheckReport`].

use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::ambient::{self, AXIOM_IDS};
use crate::error::Error;
use crate::par::Execution;
use crate::report::{sort_rows, At, CheckReport, CheckRow, ReferenceClaim, Status, Summary, REPORT_SCHEMA};
use crate::scenario::{ClaimSpec, ConfigError, Mode, Prepared, Scenario, Selected};
use crate::slant::{self, Classification, SlantReport};
use crate::submanifold::{unit, STRUCTURE_IDS};
use crate::theorems::{self, Context, THEOREM_IDS};
use crate::warped::{self, WarpData, WarpDetection, WarpSource};

/// Tolerance class of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Axiom,
    Theorem,
    Default,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Axiom => "axiom",
            Class::Theorem => "theorem",
            Class::Default => "default",
        }
    }
}

/// Scenario sections a check reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Nothing,
    /// `distributions` with a non-empty `d_lambda`.
    Roles,
    /// `distributions` and `warp`.
    Warp,
    /// `distributions.xi` and `warp`.
    XiWarp,
    WarpedMetric,
    Claims,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckInfo {
    pub id: &'static str,
    pub class: Class,
    pub needs: Needs,
    /// Formula the check evaluates.
    pub anchor: &'static str,
    pub statement: &'static str,
}

const fn info(id: &'static str, class: Class, needs: Needs, anchor: &'static str, statement: &'static str) -> CheckInfo {
    CheckInfo { id, class, needs, anchor, statement }
}

use Class::{Axiom, Default as Dflt, Theorem};
use Needs::{Claims, Nothing, Roles, Warp, WarpedMetric, XiWarp};

pub const CATALOG: &[CheckInfo] = &[
    info("ax-phi2", Axiom, Nothing, r"\varphi^{2}=Id-\eta\otimes\xi", "φ squares to the identity off ξ"),
    info("ax-eta-xi", Axiom, Nothing, r"\eta(\xi)=1", "η is normalized on ξ"),
    info("ax-phi-xi", Axiom, Nothing, r"\varphi\xi=0", "φ kills ξ"),
    info("ax-eta-phi", Axiom, Nothing, r"\eta\circ\varphi=0", "η vanishes on the image of φ"),
    info("ax-rank-phi", Axiom, Nothing, r"\operatorname{rank}\varphi=2n", "φ has rank 2n"),
    info("ax-signature", Axiom, Nothing, r"\operatorname{sign}(g)=(n+1,n)", "metric signature (n+1, n)"),
    info("ax-metric", Axiom, Nothing, r"g(\varphi X,\varphi Y)=-g(X,Y)+\eta(X)\eta(Y)", "compatible metric"),
    info("ax-eta-dual", Axiom, Nothing, r"g(X,\xi)=\eta(X)", "η is metric-dual to ξ"),
    info("ax-phi-antisym", Axiom, Nothing, r"g(\varphi X,Y)=-g(X,\varphi Y)", "φ is g-antisymmetric"),
    info("ax-fundamental-form", Axiom, Nothing, r"\Phi(X,Y)=g(X,\varphi Y)=-\Phi(Y,X)", "fundamental 2-form is skew"),
    info("def-paracosymplectic", Axiom, Nothing, r"\widetilde\nabla\varphi=0,\ \widetilde\nabla\eta=0", "φ and η are parallel"),
    info(
        "def-nearly-paracosymplectic",
        Axiom,
        Nothing,
        r"(\widetilde\nabla_{X}\varphi)Y+(\widetilde\nabla_{Y}\varphi)X=0",
        "φ is Killing-type",
    ),
    info(
        "def-nearly-para-sasakian",
        Axiom,
        Nothing,
        r"(\widetilde\nabla_{X}\varphi)Y+(\widetilde\nabla_{Y}\varphi)X=2g(X,Y)\xi+\eta(X)Y+\eta(Y)X",
        "nearly para-Sasakian identity (off by default)",
    ),
    info("prop-2.2", Axiom, Nothing, r"g(\widetilde\nabla_{X}\xi,Y)+g(\widetilde\nabla_{Y}\xi,X)=0", "ξ is Killing on a nearly paracosymplectic manifold"),
    info("sub-h-symmetric", Axiom, Nothing, r"h(X,Y)=h(Y,X)", "second fundamental form is symmetric"),
    info("sub-shape-selfadjoint", Axiom, Nothing, r"g(A_{\zeta}X,Y)=g(h(X,Y),\zeta)=g(X,A_{\zeta}Y)", "shape operator is self-adjoint"),
    info("sub-weingarten", Axiom, Nothing, r"\widetilde\nabla_{X}\zeta=-A_{\zeta}X+\nabla^{\perp}_{X}\zeta", "Weingarten formula"),
    info("sub-t-antisym", Axiom, Nothing, r"g(tX,Y)=-g(X,tY)", "t is g-antisymmetric"),
    info("sub-TN-antisym", Axiom, Nothing, r"\mathcal{T}_{X}Y+\mathcal{T}_{Y}X=0,\ \mathcal{N}_{X}Y+\mathcal{N}_{Y}X=0", "T and N are skew when the ambient is nearly paracosymplectic"),
    info("sub-T-duality", Axiom, Nothing, r"g(\mathcal{T}_{X}Y,W)=-g(Y,\mathcal{T}_{X}W)", "T_X is g-antisymmetric"),
    info("sub-tangent-normal", Axiom, Nothing, r"g(F_{*}Z_{i},\nu_{k})=0", "normal frame is g-orthogonal to the tangent space"),
    info("def-slant", Dflt, Roles, r"t^{2}X=\lambda(X-\eta(X)\xi)", "D_λ is slant with a constant coefficient"),
    info(
        "def-pr-anti-slant",
        Dflt,
        Roles,
        r"TM=\mathfrak{D}^{\bot}\oplus\mathfrak{D}_{\lambda}\oplus\langle\xi\rangle",
        "orthogonal non-degenerate splitting with D⊥ anti-invariant and D_λ proper slant",
    ),
    info("def-mixed-tg", Dflt, Roles, r"h(X,Z)=0,\ X\in\mathfrak{D}_{\lambda},\ Z\in\mathfrak{D}^{\bot}\oplus\langle\xi\rangle", "mixed totally geodesic"),
    info("prop-3.1", Theorem, Roles, r"g(tX,tY)=\lambda g(\varphi X,\varphi Y),\ g(nX,nY)=(1-\lambda)g(\varphi X,\varphi Y)", "metric relations on a slant distribution"),
    info("prop-3.2", Theorem, Roles, r"t'nX=(1-\lambda)(X-\eta(X)\xi),\ n'nX=-ntX", "normal-part relations on a slant distribution"),
    info(
        "thm-3.1",
        Theorem,
        Roles,
        r"2\lambda g(\nabla_{X}Y,Z)=g(A_{ntY}X+A_{ntX}Y,Z)-g(A_{\varphi Z}tY,X)-g(A_{\varphi Z}tX,Y)",
        "D_λ-leaves and the second fundamental form",
    ),
    info("thm-3.2", Theorem, Roles, r"2g(A_{ntX}Z,W)=g(A_{\varphi W}Z+A_{\varphi Z}W,tX)", "D⊥⊕ξ-leaves and the second fundamental form"),
    info("lem-5.1a", Theorem, Warp, r"2g(A_{ntX}X,Z)=g(A_{\varphi Z}X,tX)+g(A_{nX}Z,tX)-(Z\ln f)\lambda g(X,X)", "first warped-product lemma identity"),
    info("lem-5.1b", Theorem, Warp, r"g(A_{nX}Z,tX)=2g(A_{\varphi Z}X,tX)-g(A_{ntX}X,Z)", "second warped-product lemma identity"),
    info("lem-5.1-sum", Theorem, Warp, r"3g(A_{ntX}X,Z)=3g(A_{\varphi Z}X,tX)-(Z\ln f)\lambda g(X,X)", "sum of the two lemma identities (algebraic, never gated)"),
    info("lem-5.2", Theorem, Warp, r"g(\mathcal{T}_{X}tX,Z)=g(A_{ntX}X,Z)-g(A_{nX}Z,tX)", "T in terms of shape operators"),
    info("thm-5.1", Theorem, Warp, r"g(\mathcal{T}_{X}tX,Z)=\frac{2}{3}(Z\ln f)\lambda g(X,X)", "T on the fiber against the warping function"),
    info("thm-5.2", Theorem, Warp, r"g(A_{\varphi Z}X,tX)=\frac{1}{3}(Z\ln f)\lambda g(X,X)", "mixed totally geodesic case"),
    info("thm-5.3", Theorem, Warp, r"A_{ntX}Z-A_{\varphi Z}tX=-\frac{\lambda}{3}(Z\mu)X", "shape operator relation"),
    info("thm-5.3-hlambda", Theorem, Warp, r"h^{\lambda}(X,Y)=-\frac{1}{3}g(X,Y)\nabla\mu", "second fundamental form of the fiber"),
    info("frob-integrable", Theorem, Roles, r"[X,Y]\in\mathfrak{D}", "D_λ and D⊥⊕ξ are involutive"),
    info("foliation-tg", Theorem, Roles, r"\nabla_{X}Y\in\mathfrak{D}", "leaves are totally geodesic (when integrable)"),
    info("warp-detect", Dflt, Warp, r"g=g_{F}+f^{2}g_{N_{\lambda}}", "induced metric has the warped form"),
    info("prop-4.1", Dflt, WarpedMetric, r"\nabla_{X}Z=\nabla_{Z}X=(X\ln f)Z", "Levi-Civita connection of a warped product"),
    info("prop-4.2", Dflt, XiWarp, r"\xi\in\Gamma(TN_{\lambda})\Rightarrow Z\ln f=0", "ξ tangent to the fiber forces a trivial warp"),
    info("ref-claim", Dflt, Claims, r"\lambda,\ f,\ g(Z_{i},Z_{j})", "measured values against published ones"),
];

pub fn info_of(id: &str) -> Option<&'static CheckInfo> {
    CATALOG.iter().find(|c| c.id == id)
}

/// Aligned table of the catalog.
pub fn list_checks() -> String {
    let mut out = String::new();
    let w = CATALOG.iter().map(|c| c.id.len()).max().unwrap_or(0);
    for c in CATALOG {
        let _ = writeln!(out, "{:<w$}  {:<8}  {}  [{}]", c.id, c.class.as_str(), c.statement, c.anchor);
    }
    out
}

/// Ids run when a scenario has no `checks` list: everything its sections
/// support, except the nearly para-Sasakian identity.
pub fn default_checks(s: &Scenario) -> Vec<&'static str> {
    let roles = s.distributions.as_ref().is_some_and(|d| !d.d_lambda.is_empty());
    let xi = s.distributions.as_ref().is_some_and(|d| d.xi.is_some());
    let warp = s.warp.is_some();
    CATALOG
        .iter()
        .filter(|c| c.id != "def-nearly-para-sasakian")
        .filter(|c| match c.needs {
            Nothing => true,
            Roles => roles,
            Warp => roles && warp,
            XiWarp => xi && warp,
            WarpedMetric => s.warped_metric.is_some(),
            Claims => !s.reference_claims.is_empty(),
        })
        .map(|c| c.id)
        .collect()
}

/// Parses overrides-applied scenario text into a runnable form, checking
/// that every selected check has the sections it reads.
pub fn prepare(scenario: Scenario, path: &str) -> Result<Prepared, ConfigError> {
    let defaults = default_checks(&scenario);
    let p = Prepared::new(scenario, path, |id| info_of(id).map(|c| c.class.as_str()), &defaults)?;
    for (i, c) in p.checks.iter().enumerate() {
        let info = info_of(&c.id).expect("resolved against the catalog");
        let field = format!("checks[{i}]");
        let missing = |what: &str| Err(ConfigError::new(path, field.clone(), format!("`{}` needs {what}", c.id)));
        let has_roles = p.roles.as_ref().is_some_and(|r| !r.d_lambda.is_empty());
        match info.needs {
            Nothing => {}
            Roles if !has_roles => return missing("distributions with a non-empty d_lambda"),
            Warp if !has_roles => return missing("distributions with a non-empty d_lambda"),
            Warp if p.warp.is_none() => {
                return Err(ConfigError::new(path, field, Error::MissingWarpData { check: c.id.clone() }.to_string()));
            }
            XiWarp if p.roles.as_ref().and_then(|r| r.xi).is_none() => return missing("distributions.xi"),
            XiWarp if p.warp.is_none() => {
                return Err(ConfigError::new(path, field, Error::MissingWarpData { check: c.id.clone() }.to_string()));
            }
            WarpedMetric if p.warped_metric.is_none() => return missing("a warped_metric section"),
            _ => {}
        }
    }
    Ok(p)
}

/// Failure to run a prepared scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Geometry(#[from] Error),
}

/// Loads, applies overrides and prepares in one go.
pub fn load(source: &str, overrides: &crate::scenario::Overrides) -> Result<Prepared, ConfigError> {
    let mut s = Scenario::load(source)?;
    s.apply(overrides);
    prepare(s, source)
}

/// Scenario-wide facts shared by the checks.
struct Facts {
    slant: Option<Result<SlantReport, Error>>,
    detection: Option<Result<WarpDetection, Error>>,
    /// Warp data with a resolved reference for declared warps.
    warp: Option<WarpData>,
    lambda: f64,
    pr_anti_slant: bool,
    warped: bool,
    xi_in_base: bool,
}

fn facts(prep: &Prepared, exec: Execution) -> Facts {
    let tol = prep.scenario.tolerances.default;
    let seed = prep.scenario.seed;
    let slant = prep
        .roles
        .as_ref()
        .filter(|r| !r.d_lambda.is_empty())
        .map(|r| slant::slant_coefficient(&prep.sub, &r.d_lambda, &prep.points, tol, seed, exec));
    let lambda = match (&prep.roles, &slant) {
        (Some(r), _) if r.lambda.is_some() => r.lambda.unwrap_or(f64::NAN),
        (_, Some(Ok(s))) => s.lambda_hat,
        _ => f64::NAN,
    };
    let pr_anti_slant = match (&prep.roles, &slant) {
        (Some(r), Some(Ok(s))) => {
            let rows = slant::validate_pr_anti_slant(&prep.sub, r, s, &prep.points, tol, exec);
            rows.iter().all(|row| row.status == Status::Pass)
        }
        _ => false,
    };
    let warp = prep.warp.clone();
    let detection = warp.as_ref().map(|w| {
        let (reference, f_ref) = match &w.source {
            WarpSource::Detected { reference, f_ref } => (reference.clone(), *f_ref),
            WarpSource::Declared { .. } => {
                let r = prep.points[0].clone();
                let f = prep.sub.point_data(&r).and_then(|p| w.warp_at(&prep.sub, &p)).map(|x| x.0)?;
                (r, f)
            }
        };
        warped::detect_warped_structure(&prep.sub, &w.base, &w.fiber, &prep.points, &reference, f_ref, exec)
    });
    let warped = match (&warp, &detection) {
        (Some(w), Some(Ok(d))) => d.rejected.is_empty() && warped::warp_rows(&prep.sub, w, d, &prep.points, tol).iter().all(|r| r.status == Status::Pass),
        _ => false,
    };
    let xi_in_base = match (&prep.roles, &warp) {
        (Some(r), Some(w)) => r.xi.is_some_and(|x| w.base.contains(&x)),
        _ => false,
    };
    Facts { slant, detection, warp, lambda, pr_anti_slant, warped, xi_in_base }
}

fn failed(id: &str, e: &Error) -> Vec<CheckRow> {
    vec![CheckRow::error(id, &At::global(), &e.to_string())]
}

fn first_point(prep: &Prepared) -> Option<(usize, crate::submanifold::PointData)> {
    prep.points.iter().enumerate().find_map(|(i, u)| prep.sub.point_data(u).ok().map(|p| (i, p)))
}

fn eval_claim(prep: &Prepared, f: &crate::expr::Expr, u: &[f64]) -> f64 {
    let names = prep.sub.imm.params();
    let consts = &prep.scenario.immersion.constants;
    let env: Vec<(&str, f64)> = names.iter().map(|n| n.as_str()).zip(u.iter().copied()).chain(consts.iter().map(|(k, v)| (k.as_str(), *v))).collect();
    f.eval_f64(&env).unwrap_or(f64::NAN)
}

/// Measures every reference claim. Claims never FAIL: divergence is
/// FLAGGED.
fn claims(prep: &Prepared, facts: &Facts, tol: f64) -> Vec<ReferenceClaim> {
    let first = first_point(prep);
    prep.scenario
        .reference_claims
        .iter()
        .map(|c| {
            let (source, claimed, measured, ok, note) = match c {
                ClaimSpec::Lambda { source, claimed } => match &facts.slant {
                    Some(Ok(s)) => {
                        let ok = s.classification != Classification::NotSlant && (s.lambda_hat - claimed).abs() <= tol;
                        let note = format!("D_λ classified {:?}, slant residual {:.3e}", s.classification, s.residual);
                        (source, *claimed, s.lambda_hat, ok, note)
                    }
                    _ => (source, *claimed, f64::NAN, false, "no slant measurement".to_string()),
                },
                ClaimSpec::Ratio { source, field, claimed } => {
                    let k = prep.frame_index(field).expect("validated");
                    let r = first.as_ref().and_then(|(_, p)| slant::ratio(p, &unit(p.m(), k))).unwrap_or(f64::NAN);
                    (source, *claimed, r, (r - claimed).abs() <= tol, format!("ρ({field}) at the first admissible point"))
                }
                ClaimSpec::Gram { source, i, j, claimed } => {
                    let (a, b) = (prep.frame_index(i).expect("validated"), prep.frame_index(j).expect("validated"));
                    let g = first.as_ref().map(|(_, p)| p.gram.matrix()[(a, b)]).unwrap_or(f64::NAN);
                    (source, *claimed, g, (g - claimed).abs() <= tol, format!("g({i}, {j}) at the first admissible point"))
                }
                ClaimSpec::Warp { source, claimed } => match &facts.detection {
                    Some(Ok(d)) => {
                        let c_ref = eval_claim(prep, claimed, &d.reference);
                        let mut worst = (f64::NAN, f64::NAN, -1.0);
                        for w in &d.points {
                            let u = &prep.points[w.point_index];
                            let c = eval_claim(prep, claimed, u) / c_ref;
                            let m = w.f / d.f_ref;
                            let r = (c - m).abs();
                            if !(r <= worst.2) {
                                worst = (c, m, r);
                            }
                        }
                        let ok = worst.2 <= tol && facts.warped;
                        let note = format!(
                            "f(u)/f(reference), worst point; mixed residual {:.3e}, fiber consistency {:.3e}",
                            d.mixed_residual, d.f_consistency_residual
                        );
                        (source, worst.0, worst.1, ok, note)
                    }
                    Some(Err(e)) => (source, f64::NAN, f64::NAN, false, e.to_string()),
                    None => (source, f64::NAN, f64::NAN, false, "no warp section".to_string()),
                },
            };
            ReferenceClaim { source: source.clone(), claimed, measured, status: if ok { Status::Pass } else { Status::Flagged }, note }
        })
        .collect()
}

fn claim_rows(claims: &[ReferenceClaim], tol: f64) -> Vec<CheckRow> {
    claims
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let r = (c.measured - c.claimed).abs();
            CheckRow::with_residual("ref-claim", &At::global(), k, c.source.clone(), c.measured, c.claimed, r, tol).status(c.status)
        })
        .collect()
}

fn rows_for(prep: &Prepared, facts: &Facts, sel: &Selected, claims: &[ReferenceClaim], amb_points: &[Vec<f64>], exec: Execution) -> Result<Vec<CheckRow>, RunError> {
    let id = sel.id.as_str();
    let tol = sel.tol;
    let seed = prep.scenario.seed;
    let sub = &prep.sub;
    let amb = sub.imm.ambient();
    let pts = &prep.points;
    let only = |rows: Vec<CheckRow>| rows.into_iter().filter(|r| r.check_id == id).collect::<Vec<_>>();
    let roles = || prep.roles.as_ref().expect("checked in prepare");
    let slant = || facts.slant.as_ref().expect("checked in prepare");
    let rows = match id {
        _ if AXIOM_IDS.contains(&id) => only(ambient::check_axioms(amb, amb_points, tol, seed, exec)),
        "def-paracosymplectic" => ambient::check_paracosymplectic(amb, amb_points, tol, seed, exec),
        "def-nearly-paracosymplectic" => ambient::check_nearly_paracosymplectic(amb, amb_points, tol, seed, exec),
        "def-nearly-para-sasakian" => ambient::check_nearly_para_sasakian(amb, amb_points, tol, seed, exec),
        "prop-2.2" => ambient::check_killing_xi(amb, amb_points, tol, seed, exec),
        _ if STRUCTURE_IDS.contains(&id) => crate::submanifold::check_structure(sub, pts, &[id], tol, seed, exec),
        "def-slant" => match slant() {
            Ok(s) => slant::slant_rows(id, s, pts, tol),
            Err(e) => failed(id, e),
        },
        "def-pr-anti-slant" => match slant() {
            Ok(s) => slant::validate_pr_anti_slant(sub, roles(), s, pts, tol, exec),
            Err(e) => failed(id, e),
        },
        "def-mixed-tg" => slant::check_mixed_tg(sub, roles(), pts, tol, exec),
        "prop-3.1" | "prop-3.2" => {
            let applicable = matches!(slant(), Ok(s) if s.classification.is_slant());
            let d = &roles().d_lambda;
            if id == "prop-3.1" {
                slant::check_prop31(sub, d, pts, facts.lambda, applicable, tol, seed, exec)
            } else {
                slant::check_prop32(sub, d, pts, facts.lambda, applicable, tol, seed, exec)
            }
        }
        "warp-detect" => match facts.detection.as_ref().expect("checked in prepare") {
            Ok(d) => warped::warp_rows(sub, facts.warp.as_ref().expect("checked in prepare"), d, pts, tol),
            Err(e) => failed(id, e),
        },
        "prop-4.1" => {
            let (spec, wpts) = prep.warped_metric.as_ref().expect("checked in prepare");
            warped::check_prop41(spec, wpts, tol, exec)
        }
        "prop-4.2" => {
            let w = facts.warp.as_ref().expect("checked in prepare");
            let xi = roles().xi.expect("checked in prepare");
            warped::check_nonexistence(sub, xi, &w.base, &w.fiber, Some(w), pts, tol, exec)
        }
        "ref-claim" => claim_rows(claims, tol),
        _ if THEOREM_IDS.contains(&id) => {
            let ctx = Context {
                sub,
                roles: roles(),
                lambda: facts.lambda,
                warp: facts.warp.as_ref(),
                pr_anti_slant: facts.pr_anti_slant,
                warped: facts.warped,
                tol,
                hypothesis_tol: prep.scenario.tolerances.default,
                seed,
                exec,
            };
            theorems::run_check(&ctx, id, pts)?
        }
        _ => unreachable!("ids are resolved against the catalog"),
    };
    Ok(match sel.mode {
        Mode::Verify => rows,
        Mode::Reference => rows.into_iter().map(|r| if r.status == Status::Fail { r.status(Status::Flagged) } else { r }).collect(),
    })
}

fn metadata(prep: &Prepared, facts: &Facts) -> serde_json::Value {
    let slant = match &facts.slant {
        Some(Ok(s)) => json!({
            "distribution": s.dist,
            "lambda_hat": s.lambda_hat,
            "residual": s.residual,
            "classification": s.classification,
            "lambda_variance": s.lambda_variance,
            "t_squared": s.t_squared,
            "t_squared_eigenvalues": s.points.first().map(|p| p.eigenvalues.clone()),
            "ratios": s.points.first().map(|p| p.ratios.clone()),
            "rejected": s.rejected,
        }),
        Some(Err(e)) => json!({ "error": e.to_string() }),
        None => serde_json::Value::Null,
    };
    let warp = match &facts.detection {
        Some(Ok(d)) => json!({
            "base": d.base.iter().map(|&i| &prep.sub.frame.names()[i]).collect::<Vec<_>>(),
            "fiber": d.fiber.iter().map(|&i| &prep.sub.frame.names()[i]).collect::<Vec<_>>(),
            "reference": d.reference,
            "f_ref": d.f_ref,
            "mixed_residual": d.mixed_residual,
            "f_consistency_residual": d.f_consistency_residual,
            "f_values": d.f_values(),
            "rejected": d.rejected,
        }),
        Some(Err(e)) => json!({ "error": e.to_string() }),
        None => serde_json::Value::Null,
    };
    let gram = first_point(prep).map(|(i, p)| {
        let g = p.gram.matrix();
        json!({ "point_index": i, "matrix": g.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>() })
    });
    json!({
        "frame": prep.sub.frame.names(),
        "n_points": prep.points.len(),
        "lambda_used": facts.lambda,
        "hypotheses": {
            "pr_anti_slant": facts.pr_anti_slant,
            "warped": facts.warped,
            "xi_in_base": facts.xi_in_base,
        },
        "slant": slant,
        "warp": warp,
        "gram": gram,
    })
}

/// Runs every selected check and assembles the sorted report.
pub fn run(prep: &Prepared, exec: Execution) -> Result<CheckReport, RunError> {
    let facts = facts(prep, exec);
    let amb_points: Vec<Vec<f64>> = exec.map(&prep.points, |_, u| {
        prep.sub.point_data(u).map(|p| p.x.iter().copied().collect()).unwrap_or_else(|_| vec![f64::NAN; prep.sub.ambient_dim()])
    });
    let claims = claims(prep, &facts, prep.scenario.tolerances.default);
    let mut rows = Vec::new();
    for sel in &prep.checks {
        rows.extend(rows_for(prep, &facts, sel, &claims, &amb_points, exec)?);
    }
    sort_rows(&mut rows);
    let summary = Summary::of(&rows);
    Ok(CheckReport {
        schema: REPORT_SCHEMA,
        scenario: prep.scenario.name.clone(),
        digest: prep.digest.clone(),
        seed: prep.scenario.seed,
        params: prep.sub.imm.params().to_vec(),
        rows,
        summary,
        reference_claims: claims,
        metadata: metadata(prep, &facts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Overrides, BUILTINS};

    #[test]
    fn catalog_is_complete_and_unique() {
        let mut ids: Vec<&str> = CATALOG.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), CATALOG.len());
        assert!(ids.len() >= 18);
        for id in AXIOM_IDS.iter().chain(STRUCTURE_IDS).chain(THEOREM_IDS) {
            assert!(info_of(id).is_some(), "{id}");
        }
        let t = list_checks();
        assert!(t.lines().any(|l| l.starts_with("thm-5.3 ") && l.contains(r"A_{ntX}Z-A_{\varphi Z}tX")));
        assert!(t.lines().any(|l| l.starts_with("prop-2.2 ") && l.contains(r"\widetilde\nabla_{X}\xi")));
    }

    #[test]
    fn every_builtin_prepares() {
        for (name, _) in BUILTINS {
            load(&format!("builtin:{name}"), &Overrides::default()).unwrap();
        }
    }

    #[test]
    fn product_scenario_defaults_and_passes() {
        let p = load("builtin:product-tg", &Overrides { points: Some(4), ..Default::default() }).unwrap();
        assert!(p.checks.iter().any(|c| c.id == "thm-5.3"));
        assert!(!p.checks.iter().any(|c| c.id == "def-nearly-para-sasakian"));
        let r = run(&p, Execution::Sequential).unwrap();
        let bad: Vec<_> = r.rows.iter().filter(|r| r.status != Status::Pass).collect();
        assert!(bad.is_empty(), "{bad:#?}");
    }

    #[test]
    fn missing_warp_is_a_config_error() {
        let mut s = Scenario::load("builtin:product-tg").unwrap();
        s.warp = None;
        s.checks = Some(vec![crate::scenario::CheckSel::Id("thm-5.1".into())]);
        let e = prepare(s, "mem").unwrap_err();
        assert!(e.reason.contains("warping data"), "{e}");
    }
}
