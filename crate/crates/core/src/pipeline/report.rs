use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::evaluate::{Protocol, Report};
use super::PipelineError;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "  -  ".to_string(), |a| format!("{a:.3}"))
}

fn describe(report: &Report) -> String {
    let mut s = String::new();
    match report {
        Report::Closed(r) => {
            let _ = writeln!(
                s,
                "closed-set {}-way {}-shot: accuracy {:.4} over {} queries ({} episodes)",
                r.n_way, r.k_shot, r.accuracy, r.queries, r.episodes
            );
            for (n, a) in &r.top_n {
                let _ = writeln!(s, "  top-{n}: {a:.4}");
            }
            for c in &r.classes {
                let _ = writeln!(
                    s,
                    "  {:<12} P {:.3}  R {:.3}  F1 {:.3}  ({} queries)",
                    c.class, c.precision, c.recall, c.f1, c.support
                );
            }
        }
        Report::Open(r) => {
            let _ = writeln!(
                s,
                "open-set {}-way {}-shot: AUC {:.4} ({} known, {} unknown queries)",
                r.n_way, r.k_shot, r.auc, r.known, r.unknown
            );
        }
        Report::Ksweep(r) => {
            let _ = writeln!(s, "K sweep, {}-way:", r.n_way);
            for row in &r.rows {
                let _ = writeln!(s, "  K={:<3} accuracy {:.4}", row.k_shot, row.accuracy);
            }
        }
        Report::Positions(r) => {
            let _ = writeln!(
                s,
                "position map, {}-way {}-shot, accuracy {:.4}:",
                r.n_way, r.k_shot, r.accuracy
            );
            for row in &r.map.cells {
                let line: Vec<String> = row.iter().map(|&c| cell(c)).collect();
                let _ = writeln!(s, "  {}", line.join(" "));
            }
            let _ = writeln!(
                s,
                "  centre {} corners {} edges {} inner {}",
                cell(r.map.center),
                cell(r.map.corners),
                cell(r.map.edges),
                cell(r.map.inner)
            );
        }
        Report::Regress(r) => {
            let _ = writeln!(
                s,
                "{:?} regression: RMSE {:.4}, target std {:.4}, ratio {:.3} ({} samples)",
                r.target, r.rmse, r.target_std, r.rmse_ratio, r.samples
            );
            for (n, a) in &r.volume_bins {
                let _ = writeln!(s, "  {n} volume bins: accuracy {a:.4}");
            }
        }
    }
    s
}

/// Human-readable digest of every `<protocol>.json` found in `dir`.
pub fn summarize_reports(dir: &Path) -> Result<String, PipelineError> {
    let mut out = String::new();
    for protocol in Protocol::ALL {
        let path = dir.join(format!("{protocol}.json"));
        if !path.exists() {
            continue;
        }
        let report: Report = serde_json::from_str(&fs::read_to_string(&path)?)?;
        out.push_str(&describe(&report));
    }
    if out.is_empty() {
        return Err(PipelineError::MissingPool(format!(
            "no reports in {}",
            dir.display()
        )));
    }
    Ok(out)
}
