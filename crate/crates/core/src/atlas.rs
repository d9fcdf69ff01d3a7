//! Language ROI registry over the multi-modal cortical parcellation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AtlasError {
    #[error("voxel {0} is labeled more than once")]
    DuplicateVoxel(usize),
    #[error("voxel indices skip {0}")]
    IndexGap(usize),
    #[error("unknown ROI {0:?}")]
    UnknownRoi(String),
    #[error("unknown hemisphere {0:?}")]
    UnknownHemisphere(String),
    #[error("parcel file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hemisphere {
    Left,
    Right,
}

impl Hemisphere {
    pub const BOTH: [Hemisphere; 2] = [Hemisphere::Left, Hemisphere::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::Left => "L",
            Hemisphere::Right => "R",
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Hemisphere {
    type Err = AtlasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l" | "left" | "lh" => Ok(Hemisphere::Left),
            "r" | "right" | "rh" => Ok(Hemisphere::Right),
            _ => Err(AtlasError::UnknownHemisphere(s.to_string())),
        }
    }
}

/// The eight language ROIs and their parcels (identical in both hemispheres).
pub const ROI_TABLE: [(&str, &[&str]); 8] = [
    ("AG", &["PFm", "PGs", "PGi", "TPOJ2", "TPOJ3"]),
    ("ATL", &["STSda", "STSva", "STGa", "TE1a", "TE2a", "TGv", "TGd"]),
    ("PTL", &["A5", "STSdp", "STSvp", "PSL", "STV", "TPOJ1"]),
    ("IFG", &["44", "45", "IFJa", "IFSp"]),
    ("MFG", &["55b"]),
    ("IFGOrb", &["a47r", "p47r", "a9-46v"]),
    ("PCC", &["31pv", "31pd", "PCV", "7m", "23", "RSC"]),
    ("dmPFC", &["9m", "10d", "d32"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoiSpec {
    pub roi: &'static str,
    pub hemisphere: Hemisphere,
    pub parcels: Vec<&'static str>,
}

/// Every (ROI, hemisphere) pair, left hemisphere first.
pub fn roi_specs() -> Vec<RoiSpec> {
    Hemisphere::BOTH
        .iter()
        .flat_map(|&h| {
            ROI_TABLE.iter().map(move |(roi, parcels)| RoiSpec { roi, hemisphere: h, parcels: parcels.to_vec() })
        })
        .collect()
}

pub fn roi_names() -> impl Iterator<Item = &'static str> {
    ROI_TABLE.iter().map(|r| r.0)
}

/// The ROI table as pretty-printed JSON.
pub fn roi_table_json() -> String {
    serde_json::to_string_pretty(&roi_specs()).expect("static table serializes")
}

/// Lower-case, drop `L_`/`R_` prefixes and `_ROI` suffixes, map punctuation to `_`.
pub fn normalize_parcel(name: &str) -> String {
    let mut s = name.trim().to_ascii_lowercase();
    for p in ["l_", "r_"] {
        if let Some(rest) = s.strip_prefix(p) {
            s = rest.to_string();
            break;
        }
    }
    if let Some(rest) = s.strip_suffix("_roi") {
        s = rest.to_string();
    }
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// ROI containing a parcel, if any.
pub fn roi_of_parcel(parcel: &str) -> Option<&'static str> {
    let key = normalize_parcel(parcel);
    ROI_TABLE.iter().find(|(_, ps)| ps.iter().any(|p| normalize_parcel(p) == key)).map(|r| r.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelLabel {
    pub hemisphere: Hemisphere,
    pub parcel: String,
}

/// Per-voxel parcel labels for one subject's voxel order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParcelLabels {
    labels: Vec<VoxelLabel>,
}

impl ParcelLabels {
    pub fn new(labels: Vec<VoxelLabel>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, voxel: usize) -> Option<&VoxelLabel> {
        self.labels.get(voxel)
    }

    pub fn labels(&self) -> &[VoxelLabel] {
        &self.labels
    }

    /// `(roi, hemisphere)` of each voxel; `None` outside the eight ROIs.
    pub fn roi_assignment(&self) -> Vec<Option<(&'static str, Hemisphere)>> {
        self.labels.iter().map(|l| roi_of_parcel(&l.parcel).map(|r| (r, l.hemisphere))).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("voxel_index\themisphere\tparcel\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("{i}\t{}\t{}\n", l.hemisphere, l.parcel));
        }
        out
    }
}

/// Parse `voxel_index<TAB>hemisphere<TAB>parcel` rows (header optional).
/// Parcels outside the eight ROIs are kept and reported in one warning.
pub fn load_parcel_labels(tsv: &str) -> Result<ParcelLabels, AtlasError> {
    let mut by_index: BTreeMap<usize, VoxelLabel> = BTreeMap::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for (i, line) in tsv.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(AtlasError::Malformed { line: line_no, reason: format!("expected 3 columns, got {}", cols.len()) });
        }
        let idx: usize = match cols[0].trim().parse() {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(AtlasError::Malformed { line: line_no, reason: format!("bad voxel index {:?}", cols[0]) }),
        };
        let hemisphere: Hemisphere = cols[1].parse()?;
        let parcel = cols[2].trim().to_string();
        if roi_of_parcel(&parcel).is_none() {
            unknown.insert(parcel.clone());
        }
        if by_index.insert(idx, VoxelLabel { hemisphere, parcel }).is_some() {
            return Err(AtlasError::DuplicateVoxel(idx));
        }
    }
    for (expect, &idx) in by_index.keys().enumerate() {
        if idx != expect {
            return Err(AtlasError::IndexGap(expect));
        }
    }
    if !unknown.is_empty() {
        let sample: Vec<&str> = unknown.iter().take(5).map(String::as_str).collect();
        log::warn!("{} parcel name(s) outside the language ROIs, e.g. {}", unknown.len(), sample.join(", "));
    }
    Ok(ParcelLabels { labels: by_index.into_values().collect() })
}

/// Voxels whose parcel belongs to `roi` in `hemisphere`.
pub fn roi_members(roi: &str, hemisphere: Hemisphere, labels: &ParcelLabels) -> Result<Vec<usize>, AtlasError> {
    let (name, _) = ROI_TABLE
        .iter()
        .find(|(r, _)| r.eq_ignore_ascii_case(roi))
        .ok_or_else(|| AtlasError::UnknownRoi(roi.to_string()))?;
    Ok(labels
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.hemisphere == hemisphere && roi_of_parcel(&l.parcel) == Some(name))
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_size() {
        let n: usize = ROI_TABLE.iter().map(|r| r.1.len()).sum();
        assert_eq!(n, 35);
        let all: BTreeSet<String> = ROI_TABLE.iter().flat_map(|r| r.1.iter().map(|p| normalize_parcel(p))).collect();
        assert_eq!(all.len(), 35);
        assert_eq!(roi_specs().len(), 16);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_parcel("L_a9-46v_ROI"), "a9_46v");
        assert_eq!(roi_of_parcel("a9_46v"), Some("IFGOrb"));
        assert_eq!(roi_of_parcel("R_55b_ROI"), Some("MFG"));
        assert_eq!(roi_of_parcel("V1"), None);
    }

    #[test]
    fn loading() {
        let l = load_parcel_labels("voxel_index\themisphere\tparcel\n0\tL\tPFm\n1\tL\tV1\n2\tR\tZZZ\n3\tR\t55b\n").unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(roi_members("AG", Hemisphere::Left, &l).unwrap(), vec![0]);
        assert_eq!(roi_members("MFG", Hemisphere::Right, &l).unwrap(), vec![3]);
        assert!(roi_members("MFG", Hemisphere::Left, &l).unwrap().is_empty());
        assert_eq!(roi_members("V1", Hemisphere::Left, &l).unwrap_err(), AtlasError::UnknownRoi("V1".into()));
        assert_eq!(load_parcel_labels("0\tL\tPFm\n2\tL\tPFm\n0\tL\tV1\n").unwrap_err(), AtlasError::DuplicateVoxel(0));
        assert_eq!(load_parcel_labels("0\tL\tPFm\n2\tL\tPFm\n").unwrap_err(), AtlasError::IndexGap(1));
        assert_eq!(load_parcel_labels(&l.to_tsv()).unwrap(), l);
    }

    #[test]
    fn json_export() {
        let v: serde_json::Value = serde_json::from_str(&roi_table_json()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 16);
        assert_eq!(v[4]["parcels"][0], "55b");
    }
}
