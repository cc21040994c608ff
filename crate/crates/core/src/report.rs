//! Check rows and the versioned JSON report.
//!
//! Non-finite numbers serialize as `null`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::par::Execution;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-APPLICABLE")]
    NotApplicable,
    #[serde(rename = "FLAGGED")]
    Flagged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "NOT-APPLICABLE",
            Status::Flagged => "FLAGGED",
        }
    }

    /// PASS iff `residual <= tol`; NaN fails.
    pub fn from_residual(residual: f64, tol: f64) -> Status {
        if residual <= tol {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check_id: String,
    /// `None` for rows that aggregate over points.
    pub point_index: Option<usize>,
    pub point: Vec<f64>,
    pub probe_index: usize,
    pub probe: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tol: f64,
    pub status: Status,
}

impl CheckRow {
    /// Scalar identity `lhs = rhs`.
    pub fn scalar(id: &str, at: &At, probe_index: usize, probe: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let residual = (lhs - rhs).abs();
        CheckRow::with_residual(id, at, probe_index, probe, lhs, rhs, residual, tol)
    }

    /// Vector identity: `lhs`/`rhs` are the Euclidean norms of the two sides
    /// and `residual` is the norm of their difference.
    pub fn vector(id: &str, at: &At, probe_index: usize, probe: impl Into<String>, lhs: &[f64], rhs: &[f64], tol: f64) -> Self {
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
        CheckRow::with_residual(id, at, probe_index, probe, n(lhs), n(rhs), n(&diff), tol)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_residual(
        id: &str,
        at: &At,
        probe_index: usize,
        probe: impl Into<String>,
        lhs: f64,
        rhs: f64,
        residual: f64,
        tol: f64,
    ) -> Self {
        CheckRow {
            check_id: id.to_string(),
            point_index: at.index,
            point: at.point.clone(),
            probe_index,
            probe: probe.into(),
            lhs,
            rhs,
            residual,
            tol,
            status: Status::from_residual(residual, tol),
        }
    }

    /// Row whose status is decided by the caller rather than the residual.
    pub fn status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    /// Downgrades failures to NOT-APPLICABLE, keeping the measured values.
    pub fn gate(mut self, applicable: bool) -> Self {
        if !applicable {
            self.status = Status::NotApplicable;
        }
        self
    }

    /// FAIL row recording an error that prevented measurement.
    pub fn error(id: &str, at: &At, message: &str) -> Self {
        CheckRow::with_residual(id, at, 0, format!("error: {message}"), f64::NAN, f64::NAN, f64::NAN, 0.0)
    }

    fn sort_key(&self) -> (&str, Option<usize>, usize) {
        (&self.check_id, self.point_index, self.probe_index)
    }
}

/// Where a row was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct At {
    pub index: Option<usize>,
    pub point: Vec<f64>,
}

impl At {
    pub fn point(index: usize, point: &[f64]) -> Self {
        At { index: Some(index), point: point.to_vec() }
    }

    pub fn global() -> Self {
        At { index: None, point: Vec::new() }
    }
}

/// Sorts rows by `(check_id, point index, probe index)` with aggregate rows
/// first; the sort is stable so equal keys keep emission order.
pub fn sort_rows(rows: &mut [CheckRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Runs `f` once per point and concatenates the rows in point order. A point
/// whose evaluation fails yields one error row for each id in `ids`.
pub fn collect_rows<F>(points: &[Vec<f64>], exec: Execution, ids: &[&str], f: F) -> Vec<CheckRow>
where
    F: Fn(usize, &Vec<f64>) -> Result<Vec<CheckRow>> + Sync + Send,
{
    exec.map(points, |i, p| match f(i, p) {
        Ok(rows) => rows,
        Err(e) => {
            let at = At::point(i, p);
            ids.iter().map(|id| CheckRow::error(id, &at, &e.to_string())).collect()
        }
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_na: usize,
    pub n_flagged: usize,
    /// Largest finite residual among PASS and FAIL rows.
    pub max_residual: f64,
}

impl Summary {
    pub fn of(rows: &[CheckRow]) -> Summary {
        let mut s = Summary::default();
        for r in rows {
            match r.status {
                Status::Pass => s.n_pass += 1,
                Status::Fail => s.n_fail += 1,
                Status::NotApplicable => s.n_na += 1,
                Status::Flagged => s.n_flagged += 1,
            }
            if matches!(r.status, Status::Pass | Status::Fail) && r.residual.is_finite() {
                s.max_residual = s.max_residual.max(r.residual);
            }
        }
        s
    }
}

/// A statement from the source literature compared against a measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceClaim {
    /// The claimed statement as a formula.
    pub source: String,
    pub claimed: f64,
    pub measured: f64,
    pub status: Status,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub schema: u32,
    pub scenario: String,
    pub digest: String,
    pub seed: u64,
    pub params: Vec<String>,
    pub rows: Vec<CheckRow>,
    pub summary: Summary,
    pub reference_claims: Vec<ReferenceClaim>,
    pub metadata: serde_json::Value,
}

impl CheckReport {
    pub fn has_failures(&self) -> bool {
        self.summary.n_fail > 0
    }

    pub fn exit_code(&self) -> i32 {
        if self.has_failures() {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Rows for one check, in report order.
    pub fn rows_for<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a CheckRow> + 'a {
        self.rows.iter().filter(move |r| r.check_id == id)
    }

    /// Worst status of a check: FAIL > FLAGGED > PASS > NOT-APPLICABLE.
    pub fn status_of(&self, id: &str) -> Option<Status> {
        let rank = |s: Status| match s {
            Status::NotApplicable => 0,
            Status::Pass => 1,
            Status::Flagged => 2,
            Status::Fail => 3,
        };
        self.rows_for(id).map(|r| r.status).max_by(|a, b| rank(*a).cmp(&rank(*b)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}  seed {}  digest {}", self.scenario, self.seed, &self.digest[..12.min(self.digest.len())]);
        let _ = writeln!(out, "params: {}", self.params.join(", "));
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.check_id.as_str()).collect();
        ids.dedup();
        for id in ids {
            let rows: Vec<&CheckRow> = self.rows_for(id).collect();
            let worst = self.status_of(id).map(Status::as_str).unwrap_or("-");
            let counted = rows.iter().filter(|r| r.status != Status::NotApplicable);
            let max = counted.map(|r| r.residual).filter(|x| x.is_finite()).fold(0.0f64, f64::max);
            let _ = writeln!(out, "{worst:<15} {id:<28} rows {:>5}  max residual {max:.3e}", rows.len());
            for r in rows.iter().filter(|r| matches!(r.status, Status::Fail | Status::Flagged)).take(3) {
                let _ = writeln!(
                    out,
                    "    {} point {:?} probe {}: lhs {:.6e} rhs {:.6e} residual {:.3e} (tol {:.1e})",
                    r.status.as_str(),
                    r.point_index,
                    r.probe,
                    r.lhs,
                    r.rhs,
                    r.residual,
                    r.tol
                );
            }
        }
        for c in &self.reference_claims {
            let _ = writeln!(out, "claim {:<8} {}  claimed {} measured {:.9}  ({})", c.status.as_str(), c.source, c.claimed, c.measured, c.note);
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "summary: {} pass, {} fail, {} not applicable, {} flagged, max residual {:.3e}",
            s.n_pass, s.n_fail, s.n_na, s.n_flagged, s.max_residual
        );
        out
    }
}
