//! Word timing TSV: `word<TAB>onset_sec<TAB>offset_sec<TAB>sentence_id<TAB>token_id`,
//! one row per corpus token in corpus order, ids 0-based. A header row is
//! optional.

use log::warn;

use super::{StimulusCorpus, TreebankError};

/// Jitter below this many seconds is normalized instead of rejected.
pub const TIMING_TOLERANCE_SEC: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub word: String,
    pub onset_sec: f64,
    pub offset_sec: f64,
    pub sentence_id: usize,
    pub token_id: usize,
}

pub fn parse_timing_tsv(text: &str) -> Result<Vec<TimingRow>, TreebankError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(TreebankError::Malformed { line: i + 1, reason: "expected 5 tab-separated columns".into() });
        }
        if rows.is_empty() && cols[1].trim().parse::<f64>().is_err() {
            continue; // header
        }
        let num = |c: &str, what: &str| -> Result<f64, TreebankError> {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TreebankError::Malformed { line: i + 1, reason: format!("bad {what} {c:?}") })
        };
        let int = |c: &str, what: &str| -> Result<usize, TreebankError> {
            c.trim()
                .parse::<usize>()
                .map_err(|_| TreebankError::Malformed { line: i + 1, reason: format!("bad {what} {c:?}") })
        };
        rows.push(TimingRow {
            word: cols[0].to_string(),
            onset_sec: num(cols[1], "onset")?,
            offset_sec: num(cols[2], "offset")?,
            sentence_id: int(cols[3], "sentence id")?,
            token_id: int(cols[4], "token id")?,
        });
    }
    Ok(rows)
}

/// Attach word timing to a corpus.
///
/// `run_duration_sec` bounds every offset; when `None`, the largest offset is
/// used. Words are compared case-insensitively against tree leaves.
pub fn load_timing(
    corpus: &StimulusCorpus,
    tsv: &str,
    run_duration_sec: Option<f64>,
) -> Result<StimulusCorpus, TreebankError> {
    let rows = parse_timing_tsv(tsv)?;
    let n = corpus.n_tokens();
    if rows.len() != n {
        return Err(TreebankError::CountMismatch { rows: rows.len(), tokens: n });
    }
    let mut times = Vec::with_capacity(n);
    let mut k = 0;
    for s in corpus.sentences() {
        let mut prev_onset = f64::NEG_INFINITY;
        for tok in &s.tokens {
            let row = &rows[k];
            if row.sentence_id != s.id || row.token_id != tok.index {
                return Err(TreebankError::IdMismatch {
                    row: k,
                    sentence: row.sentence_id,
                    token: row.token_id,
                    expected_sentence: s.id,
                    expected_token: tok.index,
                });
            }
            if row.word.to_lowercase() != tok.surface.to_lowercase() {
                return Err(TreebankError::SurfaceMismatch {
                    row: k,
                    timing: row.word.clone(),
                    tree: tok.surface.clone(),
                });
            }
            let mut onset = row.onset_sec;
            let mut offset = row.offset_sec;
            if onset < 0.0 {
                if onset >= -TIMING_TOLERANCE_SEC {
                    onset = 0.0;
                } else {
                    return Err(TreebankError::NonMonotonicTiming { row: k, reason: format!("negative onset {onset}") });
                }
            }
            if onset < prev_onset {
                if prev_onset - onset <= TIMING_TOLERANCE_SEC {
                    onset = prev_onset;
                } else {
                    return Err(TreebankError::NonMonotonicTiming {
                        row: k,
                        reason: format!("onset {onset} precedes previous onset {prev_onset}"),
                    });
                }
            }
            if offset < onset {
                if onset - offset <= TIMING_TOLERANCE_SEC {
                    offset = onset;
                } else {
                    return Err(TreebankError::NonMonotonicTiming {
                        row: k,
                        reason: format!("offset {offset} precedes onset {onset}"),
                    });
                }
            }
            if (onset, offset) != (row.onset_sec, row.offset_sec) {
                warn!("timing row {k}: normalized jitter ({}, {}) -> ({onset}, {offset})", row.onset_sec, row.offset_sec);
            }
            prev_onset = onset;
            times.push((onset, offset));
            k += 1;
        }
    }
    let max_offset = times.iter().map(|t| t.1).fold(0.0, f64::max);
    let duration = run_duration_sec.unwrap_or(max_offset);
    for (row, &(_, off)) in times.iter().enumerate() {
        if off > duration + TIMING_TOLERANCE_SEC {
            return Err(TreebankError::BeyondRun { row, offset: off, duration });
        }
    }
    let mut out = corpus.clone();
    out.set_timing(&times, duration);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::ConstituencyTree;

    fn corpus() -> StimulusCorpus {
        StimulusCorpus::from_trees(vec![ConstituencyTree::parse_bracketed("(S (NP (PRP I)) (VP (VBD began)))").unwrap()])
    }

    #[test]
    fn attaches_timing() {
        let c = load_timing(&corpus(), "word\tonset_sec\toffset_sec\tsentence_id\ttoken_id\nI\t0.5\t0.7\t0\t0\nbegan\t0.8\t1.2\t0\t1\n", None)
            .unwrap();
        assert!(c.is_timed());
        assert_eq!(c.onsets(), vec![0.5, 0.8]);
        assert_eq!(c.run_duration_sec(), 1.2);
    }

    #[test]
    fn count_mismatch() {
        let err = load_timing(&corpus(), "I\t0\t1\t0\t0\nbegan\t1\t2\t0\t1\nx\t2\t3\t0\t2\n", None).unwrap_err();
        assert_eq!(err, TreebankError::CountMismatch { rows: 3, tokens: 2 });
    }

    #[test]
    fn surface_mismatch_names_both() {
        let err = load_timing(&corpus(), "I\t0\t1\t0\t0\nran\t1\t2\t0\t1\n", None).unwrap_err();
        assert_eq!(err, TreebankError::SurfaceMismatch { row: 1, timing: "ran".into(), tree: "began".into() });
        assert!(err.to_string().contains("ran") && err.to_string().contains("began"));
    }

    #[test]
    fn jitter_within_a_millisecond_is_normalized() {
        let c = load_timing(&corpus(), "I\t1.0\t1.2\t0\t0\nbegan\t0.9995\t1.5\t0\t1\n", None).unwrap();
        assert_eq!(c.onsets(), vec![1.0, 1.0]);
    }

    #[test]
    fn larger_regressions_are_errors() {
        let err = load_timing(&corpus(), "I\t1.0\t1.2\t0\t0\nbegan\t0.9\t1.5\t0\t1\n", None).unwrap_err();
        assert!(matches!(err, TreebankError::NonMonotonicTiming { row: 1, .. }));
    }

    #[test]
    fn offsets_bounded_by_run() {
        let err = load_timing(&corpus(), "I\t0\t1\t0\t0\nbegan\t1\t2\t0\t1\n", Some(1.5)).unwrap_err();
        assert!(matches!(err, TreebankError::BeyondRun { row: 1, .. }));
    }
}
