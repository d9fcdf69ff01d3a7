use serde::{Deserialize, Serialize};

use super::{format_value, StatsError};
use crate::atlas::{Hemisphere, ParcelLabels, ROI_TABLE};

/// One subject's voxelwise outcome.
#[derive(Debug, Clone, Copy)]
pub struct SubjectResult<'a> {
    pub subject: &'a str,
    pub labels: &'a ParcelLabels,
    pub reject: &'a [bool],
    pub r2: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRow {
    pub roi: String,
    pub hemisphere: Hemisphere,
    pub subject: String,
    pub n_voxels: usize,
    pub pct_significant: f64,
    pub mean_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiSummary {
    pub roi: String,
    pub hemisphere: Hemisphere,
    pub n_subjects: usize,
    pub mean_pct: f64,
    pub se_pct: f64,
    pub mean_r2: f64,
    pub se_r2: f64,
}

/// Per-subject and across-subject ROI statistics. ROIs without labeled
/// voxels are absent rather than reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiReport {
    pub rows: Vec<RoiRow>,
    pub summary: Vec<RoiSummary>,
}

pub const ROI_CSV_HEADER: &str = "roi,hemisphere,subject,pct_significant,mean_r2";

impl RoiReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(ROI_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.roi,
                r.hemisphere,
                r.subject,
                format_value(r.pct_significant),
                format_value(r.mean_r2)
            ));
        }
        out
    }

    pub fn summary_for(&self, roi: &str, hemisphere: Hemisphere) -> Option<&RoiSummary> {
        self.summary.iter().find(|s| s.roi == roi && s.hemisphere == hemisphere)
    }
}

/// Mean and standard error `σ/√N` with the population σ.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt() / n.sqrt())
}

/// Percentage of significant voxels and mean R² per ROI, hemisphere and
/// subject, then averaged across subjects.
pub fn roi_aggregate(subjects: &[SubjectResult<'_>]) -> Result<RoiReport, StatsError> {
    let mut rows = Vec::new();
    for s in subjects {
        if s.reject.len() != s.r2.len() {
            return Err(StatsError::ShapeMismatch { expected: (s.r2.len(), 1), found: (s.reject.len(), 1) });
        }
        if s.labels.len() < s.reject.len() {
            return Err(StatsError::UnknownParcel { subject: s.subject.to_string(), voxel: s.labels.len() });
        }
        let assignment = s.labels.roi_assignment();
        for h in Hemisphere::BOTH {
            for (roi, _) in ROI_TABLE {
                let members: Vec<usize> =
                    (0..s.reject.len()).filter(|&v| assignment[v] == Some((roi, h))).collect();
                if members.is_empty() {
                    continue;
                }
                let sig = members.iter().filter(|&&v| s.reject[v]).count();
                let mean_r2 = members.iter().map(|&v| s.r2[v]).sum::<f64>() / members.len() as f64;
                rows.push(RoiRow {
                    roi: roi.to_string(),
                    hemisphere: h,
                    subject: s.subject.to_string(),
                    n_voxels: members.len(),
                    pct_significant: 100.0 * sig as f64 / members.len() as f64,
                    mean_r2,
                });
            }
        }
    }
    let mut summary = Vec::new();
    for h in Hemisphere::BOTH {
        for (roi, _) in ROI_TABLE {
            let sel: Vec<&RoiRow> = rows.iter().filter(|r| r.roi == roi && r.hemisphere == h).collect();
            if sel.is_empty() {
                continue;
            }
            let (mean_pct, se_pct) = mean_se(&sel.iter().map(|r| r.pct_significant).collect::<Vec<_>>());
            let (mean_r2, se_r2) = mean_se(&sel.iter().map(|r| r.mean_r2).collect::<Vec<_>>());
            summary.push(RoiSummary {
                roi: roi.to_string(),
                hemisphere: h,
                n_subjects: sel.len(),
                mean_pct,
                se_pct,
                mean_r2,
                se_r2,
            });
        }
    }
    Ok(RoiReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::load_parcel_labels;

    #[test]
    fn two_subjects() {
        let labels = load_parcel_labels("0\tL\tPFm\n1\tL\tPGs\n2\tL\tV1\n").unwrap();
        let r2 = [0.1, 0.3, 0.9];
        let all = [true, true, false];
        let none = [false, false, true];
        let rep = roi_aggregate(&[
            SubjectResult { subject: "s1", labels: &labels, reject: &all, r2: &r2 },
            SubjectResult { subject: "s2", labels: &labels, reject: &none, r2: &r2 },
        ])
        .unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.rows[0].pct_significant, 100.0);
        assert!((rep.rows[0].mean_r2 - 0.2).abs() < 1e-12);
        let s = rep.summary_for("AG", Hemisphere::Left).unwrap();
        assert_eq!(s.mean_pct, 50.0);
        assert!((s.se_pct - 50.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(rep.summary_for("ATL", Hemisphere::Left).is_none());
        assert!(rep.to_csv().starts_with(ROI_CSV_HEADER));
    }

    #[test]
    fn all_significant_has_zero_se() {
        let labels = load_parcel_labels("0\tR\t55b\n1\tR\t55b\n").unwrap();
        let rej = [true, true];
        let r2 = [0.5, 0.5];
        let subs: Vec<SubjectResult> = ["a", "b", "c"]
            .iter()
            .map(|s| SubjectResult { subject: s, labels: &labels, reject: &rej, r2: &r2 })
            .collect();
        let s = roi_aggregate(&subs).unwrap().summary_for("MFG", Hemisphere::Right).unwrap().clone();
        assert_eq!((s.mean_pct, s.se_pct), (100.0, 0.0));
    }

    #[test]
    fn missing_labels() {
        let labels = load_parcel_labels("0\tR\t55b\n").unwrap();
        let err = roi_aggregate(&[SubjectResult { subject: "a", labels: &labels, reject: &[true, true], r2: &[0.0, 0.0] }]);
        assert_eq!(err.unwrap_err(), StatsError::UnknownParcel { subject: "a".into(), voxel: 1 });
    }
}
