//! Result serialization: long-format CSV, the aligned summary table, the
//! reward log and the ordering checks printed under the table.
//!
//! Curve CSV columns: `objective,epoch,metric,value`.
//! Reward log columns: `epoch,step,scene_id,provenance,r_i2t,r_t2i,r_bicont,p_d,combined,text_baseline,image_baseline`.

use std::fmt::Write as _;

use super::eval::METRIC_NAMES;
use super::{AblationSuite, ExperimentResult, Objective};
use crate::error::{LabError, Result};
use crate::synthworld::Provenance;

pub const CURVE_HEADER: &str = "objective,epoch,metric,value";
pub const REWARD_LOG_HEADER: &str =
    "epoch,step,scene_id,provenance,r_i2t,r_t2i,r_bicont,p_d,combined,text_baseline,image_baseline";

pub fn curve_csv(results: &[&ExperimentResult]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in results {
        for (epoch, m) in &r.curve {
            for (name, v) in METRIC_NAMES.iter().zip(m.0) {
                let _ = writeln!(out, "{},{epoch},{name},{v}", r.objective);
            }
        }
    }
    out
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::GroundTruth => "gt",
        Provenance::Greedy => "greedy",
        Provenance::Beam => "beam",
    }
}

pub fn reward_log_csv(result: &ExperimentResult) -> String {
    let mut out = format!("{REWARD_LOG_HEADER}\n");
    for rec in &result.reward_log {
        let r = &rec.reward;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rec.epoch,
            rec.step,
            rec.scene_id,
            provenance_name(rec.provenance),
            r.r_i2t,
            r.r_t2i,
            r.r_bicont,
            r.p_d,
            r.combined,
            r.effective_text_baseline,
            r.effective_image_baseline
        );
    }
    out
}

/// Final-epoch metrics, one row per objective; failed rows say so.
pub fn summary_csv(suite: &AblationSuite) -> String {
    let mut out = format!("objective,status,{}\n", METRIC_NAMES.join(","));
    for row in &suite.rows {
        match &row.outcome {
            Ok(r) => {
                let vals: Vec<String> = r.final_metrics().0.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{},ok,{}", row.objective, vals.join(","));
            }
            Err(_) => {
                let _ = writeln!(out, "{},failed{}", row.objective, ",".repeat(METRIC_NAMES.len()));
            }
        }
    }
    out
}

/// Aligned plain-text table with two decimals.
pub fn summary_table(suite: &AblationSuite) -> String {
    let mut out = format!("{:<10}", "objective");
    for name in METRIC_NAMES {
        let _ = write!(out, " {name:>11}");
    }
    out.push('\n');
    for row in &suite.rows {
        let _ = write!(out, "{:<10}", row.objective.name());
        match &row.outcome {
            Ok(r) => {
                for v in r.final_metrics().0 {
                    let _ = write!(out, " {v:>11.2}");
                }
            }
            Err(e) => {
                let _ = write!(out, " FAILED: {e}");
            }
        }
        out.push('\n');
    }
    out
}

/// One comparison `lhs(metric) >= rhs(metric) + margin` (or `<=` when
/// `at_most`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ordering {
    pub metric: &'static str,
    pub lhs: Objective,
    pub rhs: Objective,
    pub margin: f64,
    pub at_most: bool,
}

impl Ordering {
    pub fn label(&self) -> String {
        let op = if self.at_most { "<=" } else { ">=" };
        let sign = if self.margin < 0.0 { '-' } else { '+' };
        format!("{}: {} {op} {} {sign} {}", self.metric, self.lhs, self.rhs, self.margin.abs())
    }

    /// `Some((lhs, rhs, passed))`, or `None` when either row is missing.
    pub fn evaluate(&self, suite: &AblationSuite) -> Option<(f64, f64, bool)> {
        let l = suite.row(self.lhs)?.final_metrics().get(self.metric)?;
        let r = suite.row(self.rhs)?.final_metrics().get(self.metric)?;
        let bound = r + self.margin;
        let pass = if self.at_most { l <= bound } else { l >= bound };
        Some((l, r, pass))
    }
}

/// The qualitative orderings expected between objectives.
pub const EXPECTED_ORDERINGS: [Ordering; 7] = [
    Ordering { metric: "t2i_r1", lhs: Objective::Wtf, rhs: Objective::Tf, margin: 3.0, at_most: false },
    Ordering { metric: "t2i_r1", lhs: Objective::Rl, rhs: Objective::Wtf, margin: 5.0, at_most: false },
    Ordering { metric: "t2i_r1", lhs: Objective::WtfRl, rhs: Objective::Wtf, margin: 5.0, at_most: false },
    Ordering { metric: "t2i_r1", lhs: Objective::RlUnidirectional, rhs: Objective::Rl, margin: -2.0, at_most: true },
    Ordering { metric: "cider", lhs: Objective::Wtf, rhs: Objective::Tf, margin: -2.0, at_most: false },
    Ordering { metric: "cider", lhs: Objective::WtfRl, rhs: Objective::Rl, margin: 0.0, at_most: false },
    Ordering { metric: "self_bleu", lhs: Objective::WtfRl, rhs: Objective::Tf, margin: 0.0, at_most: true },
];

pub fn orderings_footer(suite: &AblationSuite) -> String {
    let mut out = String::from("ordering checks:\n");
    for o in EXPECTED_ORDERINGS {
        let line = match o.evaluate(suite) {
            Some((l, r, pass)) => format!(
                "  [{}] {}  ({:.2} vs {:.2})",
                if pass { "pass" } else { "FAIL" },
                o.label(),
                l,
                r
            ),
            None => format!("  [skip] {}  (row missing)", o.label()),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parses a curve CSV back into `(objective, epoch, metric, value)` rows.
pub fn parse_curve_csv(text: &str) -> Result<Vec<(String, usize, String, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(LabError::parse("curve csv:1", "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let loc = format!("curve csv:{}", i + 2);
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(LabError::parse(&loc, "expected 4 fields"));
            }
            let epoch = f[1].parse().map_err(|_| LabError::parse(&loc, "bad epoch"))?;
            let value = f[3].parse().map_err(|_| LabError::parse(&loc, "bad value"))?;
            Ok((f[0].to_string(), epoch, f[2].to_string(), value))
        })
        .collect()
}
