use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const THEOREM1: &str = "theorem1";
/// Same identity as [`THEOREM1`] for single-step windows.
pub const THEOREM1_EXTENSION: &str = "theorem1_extension";
pub const THEOREM3: &str = "theorem3";
pub const LEMMA_ARGMAX: &str = "lemma_argmax";
pub const LEMMA_POLICY_GRADIENT: &str = "lemma_policy_gradient";
pub const QHAT_OFFSET: &str = "qhat_offset";
/// [`QHAT_OFFSET`] run on the exact partial-sum scorer.
pub const QHAT_OFFSET_PERFECT: &str = "qhat_offset_perfect";

/// One numerical check: two sides of an identity and their gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub tag: String,
    pub instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TheoremReport {
    /// Gap is `|lhs - rhs|`.
    pub fn new(tag: &str, instance: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::with_gap(tag, instance, lhs, rhs, (lhs - rhs).abs(), tol)
    }

    /// Explicit gap, for checks where the sides are summaries of vectors.
    /// A NaN gap never passes.
    pub fn with_gap(tag: &str, instance: impl Into<String>, lhs: f64, rhs: f64, gap: f64, tol: f64) -> Self {
        Self {
            tag: tag.to_string(),
            instance: instance.into(),
            seed: None,
            lhs,
            rhs,
            gap,
            tol,
            pass: gap <= tol,
            note: None,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Per-tag aggregate of a list of reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagSummary {
    pub tag: String,
    pub checks: usize,
    pub passed: usize,
    pub max_gap: f64,
}

impl TagSummary {
    pub fn all_pass(&self) -> bool {
        self.checks > 0 && self.passed == self.checks
    }
}

/// Summaries in order of first appearance.
pub fn summarize(reports: &[TheoremReport]) -> Vec<TagSummary> {
    let mut out: Vec<TagSummary> = Vec::new();
    for r in reports {
        let idx = match out.iter().position(|s| s.tag == r.tag) {
            Some(i) => i,
            None => {
                out.push(TagSummary {
                    tag: r.tag.clone(),
                    checks: 0,
                    passed: 0,
                    max_gap: 0.0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.checks += 1;
        s.passed += r.pass as usize;
        if r.gap.is_nan() || r.gap > s.max_gap {
            s.max_gap = r.gap;
        }
    }
    out
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, reports: &[TheoremReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_gap_within_tol() {
        assert!(TheoremReport::new(THEOREM1, "x", 1.0, 1.0 + 1e-9, 1e-8).pass);
        assert!(!TheoremReport::new(THEOREM1, "x", 1.0, 1.1, 1e-8).pass);
        assert!(!TheoremReport::with_gap(THEOREM1, "x", 0.0, 0.0, f64::NAN, 1.0).pass);
    }

    #[test]
    fn summary_counts_and_roundtrip() {
        let rs = vec![
            TheoremReport::new(THEOREM1, "a", 0.0, 0.5, 1e-8).seeded(3),
            TheoremReport::new(THEOREM3, "b", 0.0, 0.0, 1e-8),
            TheoremReport::new(THEOREM1, "c", 0.0, 0.0, 1e-8).noted("n"),
        ];
        let sums = summarize(&rs);
        assert_eq!(sums.len(), 2);
        assert_eq!((sums[0].checks, sums[0].passed, sums[0].max_gap), (2, 1, 0.5));
        assert!(sums[1].all_pass());
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &rs).unwrap();
        let back: Vec<TheoremReport> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, rs);
    }
}
