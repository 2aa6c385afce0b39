//! One-to-one minutiae matching, precision/recall curves and error means.

use crate::error::{Error, Result};
use crate::extraction::Minutia;

/// A prediction matches a ground-truth minutia when it is closer than
/// `dist_thr` pixels and its direction differs by less than `angle_thr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchCriteria {
    pub dist_thr: f64,
    pub angle_thr: f64,
}

impl Default for MatchCriteria {
    fn default() -> Self {
        Self {
            dist_thr: 15.0,
            angle_thr: 30.0,
        }
    }
}

impl MatchCriteria {
    pub fn new(dist_thr: f64, angle_thr: f64) -> Result<Self> {
        if !(dist_thr > 0.0 && angle_thr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "match thresholds {dist_thr} px, {angle_thr} deg"
            )));
        }
        Ok(Self { dist_thr, angle_thr })
    }

    pub fn accepts(&self, p: &Minutia, g: &Minutia) -> bool {
        p.distance(g) < self.dist_thr && p.angle_difference(g) < self.angle_thr
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// `(pred index, gt index)` in the order chosen.
    pub pairs: Vec<(usize, usize)>,
    pub precision: f64,
    pub recall: f64,
    pub mean_loc_err: f64,
    pub mean_angle_err: f64,
    pub n_pred: usize,
    pub n_gt: usize,
}

/// Candidate pairs sorted by distance, then pred index, then gt index.
pub fn candidate_pairs(pred: &[Minutia], gt: &[Minutia], c: &MatchCriteria) -> Vec<(f64, usize, usize)> {
    let mut cand = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            if c.accepts(p, g) {
                cand.push((p.distance(g), i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cand
}

/// Greedy one-to-one matching by ascending distance.
pub fn match_minutiae(pred: &[Minutia], gt: &[Minutia], c: &MatchCriteria) -> MatchResult {
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidate_pairs(pred, gt, c) {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
    let mut result = MatchResult {
        precision: ratio(pairs.len(), pred.len()),
        recall: ratio(pairs.len(), gt.len()),
        pairs,
        mean_loc_err: 0.0,
        mean_angle_err: 0.0,
        n_pred: pred.len(),
        n_gt: gt.len(),
    };
    let (l, a) = error_stats(&result, pred, gt);
    result.mean_loc_err = l;
    result.mean_angle_err = a;
    result
}

/// Mean distance and mean direction difference over matched pairs; `(0, 0)`
/// without pairs.
pub fn error_stats(result: &MatchResult, pred: &[Minutia], gt: &[Minutia]) -> (f64, f64) {
    if result.pairs.is_empty() {
        return (0.0, 0.0);
    }
    let n = result.pairs.len() as f64;
    let (mut l, mut a) = (0.0, 0.0);
    for &(i, j) in &result.pairs {
        l += pred[i].distance(&gt[j]);
        a += pred[i].angle_difference(&gt[j]);
    }
    (l / n, a / n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of the predictions scoring at least each threshold.
pub fn pr_curve(pred: &[Minutia], gt: &[Minutia], c: &MatchCriteria, thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter("thresholds must ascend".into()));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<Minutia> = pred.iter().filter(|m| m.score >= t).copied().collect();
            let r = match_minutiae(&kept, gt, c);
            PrPoint {
                threshold: t,
                precision: r.precision,
                recall: r.recall,
            }
        })
        .collect())
}

/// `threshold,precision,recall` rows with a header.
pub fn format_pr_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in points {
        s.push_str(&format!("{:.4},{:.4},{:.4}\n", p.threshold, p.precision, p.recall));
    }
    s
}
