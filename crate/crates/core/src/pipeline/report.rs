use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use super::{rounded, PipelineError, Run, StudyMode};
use crate::atlas::{Hemisphere, ROI_TABLE};
use crate::stats::{format_value, RoiReport};

pub const REPORT_CSV_HEADER: &str = "roi,hemisphere,comparison,n_subjects,mean_pct,se_pct,mean_r2,se_r2";

/// Across-subject summary of one ROI, hemisphere and comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub roi: String,
    pub hemisphere: Hemisphere,
    pub comparison: String,
    pub n_subjects: usize,
    pub mean_pct: f64,
    pub se_pct: f64,
    pub mean_r2: f64,
    pub se_r2: f64,
}

impl ReportRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.roi,
            self.hemisphere,
            self.comparison,
            self.n_subjects,
            format_value(self.mean_pct),
            format_value(self.se_pct),
            format_value(self.mean_r2),
            format_value(self.se_r2)
        )
    }
}

/// Rows ordered by hemisphere, ROI table order, then comparison order.
fn report_rows(names: &[String], reports: &[RoiReport]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for h in Hemisphere::BOTH {
        for (roi, _) in ROI_TABLE {
            for (name, rep) in names.iter().zip(reports) {
                if let Some(s) = rep.summary_for(roi, h) {
                    rows.push(ReportRow {
                        roi: roi.to_string(),
                        hemisphere: h,
                        comparison: name.clone(),
                        n_subjects: s.n_subjects,
                        mean_pct: s.mean_pct,
                        se_pct: s.se_pct,
                        mean_r2: s.mean_r2,
                        se_r2: s.se_r2,
                    });
                }
            }
        }
    }
    rows
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart of `% significant` per ROI for one hemisphere, with
/// standard-error whiskers. Each bar's `<title>` repeats the CSV values.
pub fn render_svg(title: &str, hemisphere: Hemisphere, rows: &[ReportRow], comparisons: &[String], hash: &str) -> String {
    let rows: Vec<&ReportRow> = rows.iter().filter(|r| r.hemisphere == hemisphere).collect();
    let mut rois: Vec<&str> = Vec::new();
    for r in &rows {
        if !rois.contains(&r.roi.as_str()) {
            rois.push(&r.roi);
        }
    }
    let n_cmp = comparisons.len().max(1);
    let bar_w = 14.0;
    let group_w = bar_w * n_cmp as f64 + 20.0;
    let (left, top, plot_h) = (60.0, 40.0, 240.0);
    let legend_h = 16.0 * comparisons.len() as f64;
    let width = left + group_w * rois.len().max(1) as f64 + 20.0;
    let height = top + plot_h + 60.0 + legend_h;
    let y_max = rows.iter().map(|r| r.mean_pct + r.se_pct).fold(0.0, f64::max);
    let y_max = ((y_max / 10.0).ceil() * 10.0).clamp(10.0, 100.0);
    let y = |v: f64| top + plot_h * (1.0 - v.min(y_max) / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<desc>config_hash {hash}</desc>");
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{} ({hemisphere})</text>"#, xml_escape(title));
    for t in 0..=5 {
        let v = y_max * t as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.0}</text>"##,
            width - 20.0,
            y(v),
            y(v),
            left - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">% significant voxels</text>"#,
        top + plot_h / 2.0
    );
    for (gi, roi) in rois.iter().enumerate() {
        let gx = left + 10.0 + group_w * gi as f64;
        for (ci, name) in comparisons.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.roi == *roi && &r.comparison == name) else { continue };
            let x = gx + bar_w * ci as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{} {} {}: mean_pct={} se_pct={} mean_r2={} se_r2={} n_subjects={}</title></rect>"#,
                y(r.mean_pct),
                bar_w - 2.0,
                y(0.0) - y(r.mean_pct),
                PALETTE[ci % PALETTE.len()],
                r.roi,
                r.hemisphere,
                xml_escape(&r.comparison),
                format_value(r.mean_pct),
                format_value(r.se_pct),
                format_value(r.mean_r2),
                format_value(r.se_r2),
                r.n_subjects
            );
            let cx = x + (bar_w - 2.0) / 2.0;
            let _ = writeln!(
                s,
                r##"<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="#222"/>"##,
                y(r.mean_pct + r.se_pct),
                y((r.mean_pct - r.se_pct).max(0.0))
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{roi}</text>"#,
            gx + bar_w * n_cmp as f64 / 2.0,
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(s, r##"<line x1="{left}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="#222"/>"##, width - 20.0, y(0.0), y(0.0));
    for (ci, name) in comparisons.iter().enumerate() {
        let ly = top + plot_h + 34.0 + 16.0 * ci as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            ly - 9.0,
            PALETTE[ci % PALETTE.len()],
            left + 14.0,
            ly,
            xml_escape(name)
        );
    }
    let n = rows.iter().map(|r| r.n_subjects).max().unwrap_or(0);
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{:.2}" font-style="italic">Bars: mean % significant voxels across {n} subject(s); whiskers: standard error.</text>"#,
        height - 6.0
    );
    s.push_str("</svg>\n");
    s
}

/// Write CSV, JSON and per-hemisphere SVG summaries for each study found
/// under `compare/` (or only `modes`, when given).
pub fn cmd_report(run: &Run, modes: &[StudyMode]) -> Result<Vec<(StudyMode, Vec<ReportRow>)>, PipelineError> {
    let requested = !modes.is_empty();
    let modes: Vec<StudyMode> = if requested { modes.to_vec() } else { StudyMode::ALL.to_vec() };
    let mut out = Vec::new();
    for mode in modes {
        let rel = format!("compare/{mode}/study.json");
        if !run.out.exists(&rel) {
            if requested {
                return Err(PipelineError::config(format!("no {mode} study found; run `compare {mode}` first")));
            }
            continue;
        }
        let study = run.out.read_json(&rel)?;
        let bad = |msg: &str| PipelineError::input(&run.out.path(&rel), std::io::Error::other(msg.to_string()));
        let entries = study["comparisons"].as_array().ok_or_else(|| bad("missing comparisons"))?;
        let mut names = Vec::new();
        let mut reports = Vec::new();
        for e in entries {
            names.push(e["name"].as_str().ok_or_else(|| bad("comparison without name"))?.to_string());
            reports.push(serde_json::from_value::<RoiReport>(e["report"].clone()).map_err(|e| PipelineError::input(&run.out.path(&rel), e))?);
        }
        let rows = report_rows(&names, &reports);
        let mut csv = String::from(REPORT_CSV_HEADER);
        csv.push('\n');
        for r in &rows {
            csv.push_str(&r.csv());
            csv.push('\n');
        }
        run.out.write_bytes(&format!("report/{mode}.csv"), csv.as_bytes())?;
        let json_rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                json!({"roi": r.roi, "hemisphere": r.hemisphere.as_str(), "comparison": r.comparison,
                       "n_subjects": r.n_subjects, "mean_pct": rounded(r.mean_pct), "se_pct": rounded(r.se_pct),
                       "mean_r2": rounded(r.mean_r2), "se_r2": rounded(r.se_r2)})
            })
            .collect();
        run.out.write_json(
            &format!("report/{mode}.json"),
            json!({"mode": mode.as_str(), "fdr_scope": study["fdr_scope"], "q": study["q"], "comparisons": names, "rows": json_rows}),
        )?;
        for h in Hemisphere::BOTH {
            let svg = render_svg(&format!("{mode} study"), h, &rows, &names, run.out.hash());
            run.out.write_bytes(&format!("report/{mode}_{h}.svg"), svg.as_bytes())?;
        }
        out.push((mode, rows));
    }
    if out.is_empty() {
        log::warn!("no study results under {}", run.out.path("compare").display());
    }
    Ok(out)
}
