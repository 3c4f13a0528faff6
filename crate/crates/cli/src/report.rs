//! CSV emission. RFC-4180 style: comma separated, `\n` line endings, header
//! row, `.` decimal separator. Values never contain commas or quotes, so no
//! escaping is required; floats print in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use surreptix_core::attack::AttackResult;
use surreptix_core::detect::DetectionReport;

pub fn verdict_str(flagged: bool) -> &'static str {
    if flagged {
        "flagged"
    } else {
        "clean"
    }
}

/// `detector,score,threshold,verdict,sample_id` rows.
pub fn detection_csv(rows: &[(String, DetectionReport)]) -> String {
    let mut out = String::from("detector,score,threshold,verdict,sample_id\n");
    for (sample_id, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.detector.as_str(),
            r.score,
            r.threshold,
            verdict_str(r.is_flagged()),
            sample_id
        );
    }
    out
}

/// Single-attack report emitted by the `attack` subcommand.
pub fn attack_csv(attack: &str, epsilon: f64, lambda: f64, result: &AttackResult) -> String {
    let mut out = String::from(
        "attack,epsilon,lambda,iterations,success,clean_pred,adv_pred,distortion_stage3,distortion_stage1\n",
    );
    let d3 = result.distortion_stage3.map(|v| v.to_string()).unwrap_or_default();
    let _ = writeln!(
        out,
        "{attack},{epsilon},{lambda},{},{},{},{},{d3},{}",
        result.iterations_run,
        result.success,
        result.clean_label,
        result.adv_label,
        result.distortion_stage1
    );
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
