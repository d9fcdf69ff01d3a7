//! Aggregate voxel outcomes by ROI and render a bar chart.

use parsebrain::atlas::{load_parcel_labels, roi_members, Hemisphere, ROI_TABLE};
use parsebrain::pipeline::{render_svg, ReportRow};
use parsebrain::stats::{roi_aggregate, SubjectResult};
use parsebrain::synth::synth_parcels;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (roi, parcels) in ROI_TABLE {
        println!("{roi:<5} {}", parcels.join(" "));
    }
    let mut tsv = String::from("voxel\themisphere\tparcel\n");
    for (v, (h, p)) in synth_parcels(400).iter().enumerate() {
        tsv.push_str(&format!("{v}\t{h}\t{p}\n"));
    }
    let labels = load_parcel_labels(&tsv)?;
    let ag = roi_members("AG", Hemisphere::Left, &labels)?;
    println!("AG-L has {} voxels", ag.len());

    let subjects = ["sub-01", "sub-02"];
    let rejects: Vec<Vec<bool>> = (0..2).map(|s| (0..400).map(|v| ag.contains(&v) && (v + s) % 3 != 0).collect()).collect();
    let r2: Vec<Vec<f64>> = rejects.iter().map(|r| r.iter().map(|&x| if x { 0.2 } else { 0.01 }).collect()).collect();
    let results: Vec<SubjectResult> = (0..2)
        .map(|s| SubjectResult { subject: subjects[s], labels: &labels, reject: &rejects[s], r2: &r2[s] })
        .collect();
    let report = roi_aggregate(&results)?;
    for s in &report.summary {
        println!("{}-{}: {:.1}% +- {:.1}", s.roi, s.hemisphere, s.mean_pct, s.se_pct);
    }
    print!("{}", report.to_csv());

    let rows: Vec<ReportRow> = report
        .summary
        .iter()
        .map(|s| ReportRow {
            roi: s.roi.clone(),
            hemisphere: s.hemisphere,
            comparison: "demo".into(),
            n_subjects: s.n_subjects,
            mean_pct: s.mean_pct,
            se_pct: s.se_pct,
            mean_r2: s.mean_r2,
            se_r2: s.se_r2,
        })
        .collect();
    let path = std::env::temp_dir().join("parsebrain-roi-demo.svg");
    std::fs::write(&path, render_svg("demo", Hemisphere::Left, &rows, &["demo".to_string()], "none"))?;
    println!("chart written to {}", path.display());
    Ok(())
}
