//! End-to-end runs: dataset, split, backbone, probes, baselines, metrics.

use std::time::Instant;

use serde::Serialize;

use crate::config::{derive_seed, DatasetConfig, RunConfig};
use crate::edl::{train_egnn, DirichletOpinion, EgnnHead};
use crate::epn::{probe_features, probe_uncertainties, train_probe, LossWeights, ProbeConfig, ProbeOutput, ProbeParams};
use crate::error::{Error, Result};
use crate::eval::{metrics_report, MethodScores, MetricsReport};
use crate::gnn::{baseline_scores, train_backbone, GcnModel};
use crate::graph::{generate_csbm, load_graph, make_loc_split, CsbmConfig, Graph, SplitSpec};
use crate::propagation::{propagate, PropConfig, PropMode};

/// Methods in `results.csv` order.
pub const METHODS: [&str; 7] = ["epn", "epn_reg", "egnn", "entropy", "max_score", "energy", "gnnsafe"];

/// Methods whose output is a Dirichlet opinion and can be propagated.
pub const OPINION_METHODS: [&str; 3] = ["epn", "epn_reg", "egnn"];

pub fn load_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Graph> {
    match cfg {
        DatasetConfig::Directory { path } => Ok(load_graph(path)?.0),
        DatasetConfig::Synthetic(s) => {
            let csbm =
                CsbmConfig::benchmark(s.dim, s.mu_norm, s.id_classes, s.include_ood, s.n_per_class, s.p_in, s.p_out)?;
            generate_csbm(&csbm, derive_seed(seed, "graph"))
        }
    }
}

/// Graph and split for one seed of a run.
pub fn prepare(cfg: &RunConfig, seed: u64) -> Result<(Graph, SplitSpec)> {
    let graph = load_dataset(&cfg.dataset, seed)?;
    let split = make_loc_split(&graph, &cfg.split, derive_seed(seed, "split"))?;
    Ok((graph, split))
}

/// Predictive probabilities `p̄` with aleatoric (misclassification) and
/// epistemic (OOD) scores of an opinion.
pub fn opinion_scores(opinion: &DirichletOpinion, offset: f64) -> MethodScores {
    let u = opinion.uncertainties_with_offset(offset);
    MethodScores { probs: opinion.expected_probs(), mis: u.aleatoric, ood: u.epistemic }
}

/// Scores straight from the probe output, before any propagation.
pub fn probe_scores(out: &ProbeOutput) -> MethodScores {
    let u = probe_uncertainties(out);
    MethodScores { probs: out.probs.clone(), mis: u.aleatoric, ood: u.epistemic }
}

pub fn probe_output(probe: &ProbeParams, backbone: &GcnModel, graph: &Graph, cfg: &ProbeConfig) -> Result<ProbeOutput> {
    let (z, probs) = probe_features(backbone, graph, cfg.feature_layer)?;
    let mut out = probe.forward(&z, &probs)?.0;
    out.stability_offset = cfg.stability_offset;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub propagation: PropMode,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRun {
    pub seed: u64,
    /// ID test accuracy of the backbone itself.
    pub backbone_acc: f64,
    pub rows: Vec<ResultRow>,
    pub backbone_secs: f64,
    /// Wall-clock of the regularized probe fit.
    pub probe_secs: f64,
    /// Whether every backbone parameter kept its exact bit pattern across
    /// both probe fits.
    pub backbone_unchanged: bool,
}

impl BenchmarkRun {
    pub fn get(&self, method: &str, propagation: PropMode) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.method == method && r.propagation == propagation).map(|r| &r.report)
    }

    pub fn csv_rows(&self, run_id: &str) -> String {
        self.rows.iter().map(|r| r.report.csv_row(run_id, self.seed, &r.method, r.propagation.name(), "loc")).collect()
    }
}

fn param_bits(model: &GcnModel) -> Vec<u64> {
    model.params().iter().flat_map(|p| p.value.as_slice().iter().map(|v| v.to_bits())).collect()
}

/// Probe settings of a method: `epn` drops both regularizers, `epn_reg`
/// keeps the configured weights.
pub fn probe_config(method: &str, base: &ProbeConfig) -> Result<ProbeConfig> {
    match method {
        "epn" => Ok(ProbeConfig { weights: LossWeights::NONE, ..base.clone() }),
        "epn_reg" => Ok(base.clone()),
        other => Err(Error::Config(format!("{other:?} is not a probe method (expected epn or epn_reg)"))),
    }
}

/// Trained models a set of methods is scored from.
#[derive(Debug, Clone, Copy)]
pub struct Artifacts<'a> {
    pub backbone: &'a GcnModel,
    pub epn: Option<&'a ProbeParams>,
    pub epn_reg: Option<&'a ProbeParams>,
    pub egnn: Option<&'a EgnnHead>,
}

/// One report per (method, propagation mode). Opinion methods run under
/// every mode in `modes`; logit baselines only without propagation.
pub fn evaluate_methods(
    methods: &[&str],
    modes: &[PropMode],
    art: &Artifacts<'_>,
    graph: &Graph,
    split: &SplitSpec,
    cfg: &RunConfig,
) -> Result<Vec<ResultRow>> {
    let bins = cfg.eval.ece_bins;
    let fwd = art.backbone.predict(graph.features())?;
    let base = baseline_scores(&fwd.logits, &fwd.probs, graph, &cfg.baselines)?;
    let missing = |m: &str| Error::Config(format!("method {m} selected but its model was not provided"));
    let mut rows = Vec::new();
    for &method in methods {
        let opinion = match method {
            "epn" | "epn_reg" => {
                let probe = if method == "epn" { art.epn } else { art.epn_reg }.ok_or_else(|| missing(method))?;
                let out = probe_output(probe, art.backbone, graph, &probe_config(method, &cfg.probe)?)?;
                Some((DirichletOpinion::new(out.alpha)?, cfg.probe.stability_offset))
            }
            "egnn" => Some((art.egnn.ok_or_else(|| missing(method))?.opinion(graph.features())?, 0.0)),
            _ => None,
        };
        if let Some((opinion, offset)) = opinion {
            for &mode in modes {
                let propagated = propagate(&opinion, graph, &PropConfig { mode, ..cfg.propagation })?;
                let report = metrics_report(&opinion_scores(&propagated, offset), graph, split, bins)?;
                rows.push(ResultRow { method: method.to_string(), propagation: mode, report });
            }
            continue;
        }
        let s = match method {
            "entropy" => &base.entropy,
            "max_score" => &base.max_score,
            "energy" => &base.energy,
            "gnnsafe" => &base.propagated_energy,
            other => return Err(Error::Config(format!("unknown method {other:?}; known: {}", METHODS.join(", ")))),
        };
        let scores = MethodScores { probs: fwd.probs.clone(), mis: s.clone(), ood: s.clone() };
        let report = metrics_report(&scores, graph, split, bins)?;
        rows.push(ResultRow { method: method.to_string(), propagation: PropMode::None, report });
    }
    Ok(rows)
}

/// Trains the backbone, EPN without and with regularizers, and an EGNN on
/// one seed, then scores every method under every propagation mode.
pub fn run_benchmark(cfg: &RunConfig, seed: u64) -> Result<BenchmarkRun> {
    let (graph, split) = prepare(cfg, seed)?;

    let t = Instant::now();
    let (backbone, _) = train_backbone(&graph, &split, &cfg.backbone, derive_seed(seed, "backbone"))?;
    let backbone_secs = t.elapsed().as_secs_f64();
    let before = param_bits(&backbone);

    let (plain, _) = train_probe(&graph, &split, &backbone, &probe_config("epn", &cfg.probe)?, derive_seed(seed, "probe"))?;
    let t = Instant::now();
    let (reg, _) = train_probe(&graph, &split, &backbone, &cfg.probe, derive_seed(seed, "probe"))?;
    let probe_secs = t.elapsed().as_secs_f64();
    let backbone_unchanged = param_bits(&backbone) == before;

    let (egnn, _) = train_egnn(&graph, &split, &cfg.egnn, derive_seed(seed, "egnn"))?;
    let art = Artifacts { backbone: &backbone, epn: Some(&plain), epn_reg: Some(&reg), egnn: Some(&egnn) };
    let rows = evaluate_methods(&METHODS, &PropMode::ALL, &art, &graph, &split, cfg)?;
    let backbone_acc = rows.iter().find(|r| r.method == "entropy").map_or(f64::NAN, |r| r.report.acc);

    Ok(BenchmarkRun { seed, backbone_acc, rows, backbone_secs, probe_secs, backbone_unchanged })
}
