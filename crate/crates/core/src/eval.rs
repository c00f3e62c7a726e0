//! Classification metrics and the misclassification / OOD detection harness.

use serde::{Deserialize, Serialize};

use crate::edl::argmax;
use crate::error::{Error, Result};
use crate::graph::{Graph, SplitSpec};
use crate::linalg::Matrix;

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic, ties counted
/// half. Higher scores are taken to indicate the positive class.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both positive and negative samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block i..=j shares the mean rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Average precision: `Σ_k (R_k − R_{k−1}) P_k` over the distinct score
/// thresholds in decreasing order, where a node is predicted positive when
/// its score is at least the threshold.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("AUPR needs at least one positive sample".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

fn check_probs(probs: &Matrix, labels: &[usize]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::Shape(format!("{} probability rows for {} labels", probs.rows(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("no samples".into()));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.cols()) {
        return Err(Error::Shape(format!("label {y} for {} classes", probs.cols())));
    }
    Ok(())
}

pub fn accuracy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_probs(probs, labels)?;
    let hits = probs.iter_rows().zip(labels).filter(|(p, &y)| argmax(p) == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Expected calibration error over `n_bins` equal-width confidence bins.
/// Bin `k` holds confidences in `(k/n, (k+1)/n]`; zero goes to the first bin.
pub fn ece(probs: &Matrix, labels: &[usize], n_bins: usize) -> Result<f64> {
    check_probs(probs, labels)?;
    if n_bins == 0 {
        return Err(Error::Config("ECE needs at least one bin".into()));
    }
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    let mut hit_sum = vec![0.0; n_bins];
    for (p, &y) in probs.iter_rows().zip(labels) {
        let k = argmax(p);
        let conf = p[k];
        let mut bin = ((conf * n_bins as f64).ceil() as usize).saturating_sub(1).min(n_bins - 1);
        // conf·n can round up past an exact edge (0.7·10 = 7.000000000000001)
        if bin > 0 && conf <= bin as f64 / n_bins as f64 {
            bin -= 1;
        }
        count[bin] += 1;
        conf_sum[bin] += conf;
        if k == y {
            hit_sum[bin] += 1.0;
        }
    }
    let n = labels.len() as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| (hit_sum[b] - conf_sum[b]).abs() / n)
        .sum())
}

/// Mean over samples of `Σ_c (p_c − y_c)²`.
pub fn brier(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_probs(probs, labels)?;
    let total: f64 = probs
        .iter_rows()
        .zip(labels)
        .map(|(p, &y)| p.iter().enumerate().map(|(c, &v)| (v - if c == y { 1.0 } else { 0.0 }).powi(2)).sum::<f64>())
        .sum();
    Ok(total / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Positives are misclassified ID test nodes.
    Mis,
    /// Positives are test nodes from left-out classes.
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub auroc: f64,
    pub aupr: f64,
    pub n: usize,
    pub n_pos: usize,
}

/// Scores and binary targets of one detection task, before the metrics.
pub fn detection_task(
    probs: &Matrix,
    scores: &[f64],
    graph: &Graph,
    split: &SplitSpec,
    mode: DetectionMode,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if scores.len() != graph.num_nodes() || probs.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} scores and {} probability rows for {} nodes",
            scores.len(),
            probs.rows(),
            graph.num_nodes()
        )));
    }
    let classes = split.class_map(graph.num_classes());
    let mut s = Vec::new();
    let mut y = Vec::new();
    for &i in &split.test_idx {
        let label = graph.label(i).ok_or_else(|| Error::Config(format!("test node {i} is unlabeled")))?;
        match (mode, classes.to_id(label)) {
            (DetectionMode::Mis, Some(id)) => {
                s.push(scores[i]);
                y.push(argmax(probs.row(i)) != id);
            }
            (DetectionMode::Mis, None) => {}
            (DetectionMode::Ood, id) => {
                s.push(scores[i]);
                y.push(id.is_none());
            }
        }
    }
    if s.is_empty() {
        return Err(Error::EmptySplit("no test nodes for this detection task".into()));
    }
    if mode == DetectionMode::Ood && !y.iter().any(|&v| v) {
        return Err(Error::UndefinedMetric("OOD detection without OOD nodes in the test set".into()));
    }
    Ok((s, y))
}

/// AUROC/AUPR of `scores` (higher = more uncertain) on the chosen task.
pub fn detection_report(
    probs: &Matrix,
    scores: &[f64],
    graph: &Graph,
    split: &SplitSpec,
    mode: DetectionMode,
) -> Result<Detection> {
    let (s, y) = detection_task(probs, scores, graph, split, mode)?;
    let n_pos = y.iter().filter(|&&v| v).count();
    Ok(Detection { auroc: auroc(&s, &y)?, aupr: aupr(&s, &y)?, n: s.len(), n_pos })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub brier: f64,
    pub ece: f64,
    /// `None` when every ID test node is classified correctly.
    pub mis_auroc: Option<f64>,
    pub mis_aupr: Option<f64>,
    /// `None` when the split has no left-out classes.
    pub ood_auroc: Option<f64>,
    pub ood_aupr: Option<f64>,
    pub n_test: usize,
    pub n_ood: usize,
}

/// Fixed column order of `results.csv` rows.
pub const RESULTS_COLUMNS: [&str; 14] = [
    "run_id",
    "seed",
    "method",
    "propagation",
    "mode",
    "acc",
    "brier",
    "ece",
    "mis_auroc",
    "mis_aupr",
    "ood_auroc",
    "ood_aupr",
    "n_test",
    "n_ood",
];

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub fn results_header() -> String {
    format!("# results schema v{RESULTS_SCHEMA_VERSION}\n{}\n", RESULTS_COLUMNS.join(","))
}

/// Which scores a method contributes to the detection tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodScores {
    /// Probabilities used for ACC/BS/ECE and for deciding misclassification.
    pub probs: Matrix,
    /// Score for misclassification detection.
    pub mis: Vec<f64>,
    /// Score for OOD detection.
    pub ood: Vec<f64>,
}

/// Calibration metrics over the ID test nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdMetrics {
    pub acc: f64,
    pub brier: f64,
    pub ece: f64,
    pub n_id_test: usize,
}

impl IdMetrics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub fn id_metrics(probs: &Matrix, graph: &Graph, split: &SplitSpec, ece_bins: usize) -> Result<IdMetrics> {
    let classes = split.class_map(graph.num_classes());
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for &i in &split.test_idx {
        if let Some(id) = graph.label(i).and_then(|c| classes.to_id(c)) {
            rows.push(i);
            labels.push(id);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptySplit("no in-distribution test nodes".into()));
    }
    if probs.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!("{} probability rows for {} nodes", probs.rows(), graph.num_nodes())));
    }
    let p = probs.select_rows(&rows);
    Ok(IdMetrics {
        acc: accuracy(&p, &labels)?,
        brier: brier(&p, &labels)?,
        ece: ece(&p, &labels, ece_bins)?,
        n_id_test: rows.len(),
    })
}

/// Full report: calibration metrics on ID test nodes, misclassification
/// detection, and OOD detection when the split has left-out classes.
pub fn metrics_report(scores: &MethodScores, graph: &Graph, split: &SplitSpec, ece_bins: usize) -> Result<MetricsReport> {
    let id = id_metrics(&scores.probs, graph, split, ece_bins)?;
    let mis = match detection_report(&scores.probs, &scores.mis, graph, split, DetectionMode::Mis) {
        Ok(d) => Some(d),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let ood = if split.ood_classes.is_empty() {
        None
    } else {
        Some(detection_report(&scores.probs, &scores.ood, graph, split, DetectionMode::Ood)?)
    };
    Ok(MetricsReport {
        acc: id.acc,
        brier: id.brier,
        ece: id.ece,
        mis_auroc: mis.map(|d| d.auroc),
        mis_aupr: mis.map(|d| d.aupr),
        ood_auroc: ood.map(|d| d.auroc),
        ood_aupr: ood.map(|d| d.aupr),
        n_test: split.test_idx.len(),
        n_ood: ood.map_or(0, |d| d.n_pos),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One `results.csv` line in [`RESULTS_COLUMNS`] order.
    pub fn csv_row(&self, run_id: &str, seed: u64, method: &str, propagation: &str, mode: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
        format!(
            "{run_id},{seed},{method},{propagation},{mode},{:?},{:?},{:?},{},{},{},{},{},{}\n",
            self.acc,
            self.brier,
            self.ece,
            opt(self.mis_auroc),
            opt(self.mis_aupr),
            opt(self.ood_auroc),
            opt(self.ood_aupr),
            self.n_test,
            self.n_ood
        )
    }
}
