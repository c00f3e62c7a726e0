use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use epn::config::{derive_seed, Manifest, RunConfig};
use epn::diff::{checkpoint_to_json, load_checkpoint};
use epn::edl::{train_egnn, EgnnHead};
use epn::epn::{train_probe, ProbeParams};
use epn::eval::{id_metrics, metrics_report, results_header};
use epn::gnn::{train_backbone, GcnModel};
use epn::graph::{save_graph, Graph, SplitSpec};
use epn::pipeline::{evaluate_methods, prepare, probe_config, probe_output, probe_scores, run_benchmark, Artifacts, METHODS};
use epn::propagation::PropMode;
use epn::theory::{run_all, TheorySettings};

#[derive(Parser)]
#[command(name = "epn", version, about = "Evidential probe networks on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set probe.weights.lambda1=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Single seed; defaults to the config's seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed range such as `0..5` (end exclusive) or `0..=4`, run in order.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the GCN backbone and write its checkpoint and ID metrics.
    TrainBackbone(RunArgs),
    /// Fit an evidential probe on a trained backbone.
    TrainProbe {
        #[command(flatten)]
        run: RunArgs,
        /// Backbone checkpoint; defaults to `backbone.json` in the seed's run directory.
        #[arg(long)]
        backbone: Option<PathBuf>,
        /// `epn` (no regularizers) or `epn_reg` (configured weights).
        #[arg(long, default_value = "epn_reg")]
        variant: String,
    },
    /// Train the evidential GCN baseline.
    TrainEgnn(RunArgs),
    /// Score trained models and write results.csv.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated methods, or `all`.
        #[arg(long, default_value = "all")]
        methods: String,
        /// Comma-separated propagation modes (none, vacuity, evidence, both), or `all`.
        #[arg(long, default_value = "none")]
        propagation: String,
    },
    /// Train everything per seed and score every method and propagation mode.
    Bench(RunArgs),
    /// Run the closed-form and Monte Carlo theory checks.
    VerifyTheory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "theory_report.json")]
        out: PathBuf,
        #[arg(long)]
        mu_norm: Option<f64>,
        /// Replace ψ and ψ' by their leading asymptotic terms (negative control).
        #[arg(long, hide = true)]
        corrupt_digamma: bool,
    },
    /// Write the configured dataset and split to a directory.
    GenSynthetic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let (a, b, inclusive) = if let Some((a, b)) = spec.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = spec.split_once("..") {
        (a, b, false)
    } else {
        bail!("seed range {spec:?} must look like 0..5 or 0..=4");
    };
    let a: u64 = a.trim().parse().with_context(|| format!("bad range start in {spec:?}"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("bad range end in {spec:?}"))?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        bail!("seed range {spec:?} is empty");
    }
    Ok(seeds)
}

impl RunArgs {
    fn load(&self) -> Result<(RunConfig, Vec<u64>)> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cfg = base.with_overrides(&self.overrides)?;
        let seeds = match (&self.seeds, self.seed) {
            (Some(s), _) => parse_seeds(s)?,
            (None, Some(s)) => vec![s],
            (None, None) => vec![cfg.seed],
        };
        Ok((cfg, seeds))
    }
}

fn seed_dir(cfg: &RunConfig, seed: u64) -> Result<PathBuf> {
    let dir = cfg.output_dir.join(format!("seed_{seed}"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Writes files into `dir` and records each one in a per-command manifest.
struct Outputs {
    dir: PathBuf,
    manifest: Manifest,
}

impl Outputs {
    fn new(dir: PathBuf, command: &str, cfg: &RunConfig, seed: u64) -> Self {
        Self { dir, manifest: Manifest::new(command, cfg, seed) }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record(name, contents.as_bytes());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let name = format!("manifest_{}.json", self.manifest.command);
        let path = self.dir.join(name);
        fs::write(&path, self.manifest.to_json()?).with_context(|| format!("writing {}", path.display()))
    }
}

fn load_backbone(graph: &Graph, split: &SplitSpec, path: &Path, dropout: f64) -> Result<GcnModel> {
    let ckpt = load_checkpoint(path)?;
    let model = GcnModel::from_checkpoint(graph, ckpt, dropout).with_context(|| format!("loading {}", path.display()))?;
    let expected = split.class_map(graph.num_classes()).num_id_classes();
    if model.num_classes() != expected {
        bail!("{}: backbone has {} outputs but the split has {expected} ID classes", path.display(), model.num_classes());
    }
    Ok(model)
}

fn load_probe(path: &Path, backbone: &GcnModel, cfg: &RunConfig) -> Result<ProbeParams> {
    let input_dim = match cfg.probe.feature_layer {
        epn::epn::FeatureLayer::Last => backbone.num_classes(),
        epn::epn::FeatureLayer::SecondToLast => backbone.hidden_width(),
    };
    let mut probe = ProbeParams::from_checkpoint(load_checkpoint(path)?, input_dim, backbone.num_classes())
        .with_context(|| format!("loading {}", path.display()))?;
    probe.output_activation = cfg.probe.output_activation;
    Ok(probe)
}

fn train_backbone_cmd(args: &RunArgs) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    for seed in seeds {
        let (graph, split) = prepare(&cfg, seed)?;
        let (model, history) = train_backbone(&graph, &split, &cfg.backbone, derive_seed(seed, "backbone"))?;
        let report = id_metrics(&model.predict(graph.features())?.probs, &graph, &split, cfg.eval.ece_bins)?;
        let mut out = Outputs::new(seed_dir(&cfg, seed)?, "train-backbone", &cfg, seed);
        out.write("backbone.json", &checkpoint_to_json(model.params())?)?;
        out.write("split.json", &split.to_json()?)?;
        out.write("metrics.json", &report.to_json()?)?;
        eprintln!("seed {seed}: backbone acc {:.4}, best epoch {}", report.acc, history.best_epoch);
        out.finish()?;
    }
    Ok(())
}

fn train_probe_cmd(args: &RunArgs, backbone_path: Option<&Path>, variant: &str) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    let variant = variant.replace('-', "_");
    let pcfg = probe_config(&variant, &cfg.probe)?;
    for seed in seeds {
        let dir = seed_dir(&cfg, seed)?;
        let (graph, split) = prepare(&cfg, seed)?;
        let path = backbone_path.map_or_else(|| dir.join("backbone.json"), Path::to_path_buf);
        let backbone = load_backbone(&graph, &split, &path, cfg.backbone.dropout)?;
        let (probe, history) = train_probe(&graph, &split, &backbone, &pcfg, derive_seed(seed, "probe"))?;
        let output = probe_output(&probe, &backbone, &graph, &pcfg)?;
        let report = metrics_report(&probe_scores(&output), &graph, &split, cfg.eval.ece_bins)?;
        let mut out = Outputs::new(dir, &format!("train-probe-{variant}"), &cfg, seed);
        out.write(&format!("probe_{variant}.json"), &checkpoint_to_json(probe.params())?)?;
        out.write(&format!("uncertainties_{variant}.csv"), &output.to_csv())?;
        out.write(&format!("metrics_{variant}.json"), &report.to_json()?)?;
        eprintln!(
            "seed {seed}: {variant} ood-auroc {}, best epoch {}",
            report.ood_auroc.map_or_else(|| "n/a".into(), |v| format!("{v:.4}")),
            history.best_epoch
        );
        out.finish()?;
    }
    Ok(())
}

fn train_egnn_cmd(args: &RunArgs) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    for seed in seeds {
        let (graph, split) = prepare(&cfg, seed)?;
        let (head, history) = train_egnn(&graph, &split, &cfg.egnn, derive_seed(seed, "egnn"))?;
        let opinion = head.opinion(graph.features())?;
        let scores = epn::pipeline::opinion_scores(&opinion, 0.0);
        let report = metrics_report(&scores, &graph, &split, cfg.eval.ece_bins)?;
        let mut out = Outputs::new(seed_dir(&cfg, seed)?, "train-egnn", &cfg, seed);
        out.write("egnn.json", &checkpoint_to_json(head.gcn.params())?)?;
        out.write("uncertainties_egnn.csv", &opinion.to_csv(&opinion.uncertainties()))?;
        out.write("metrics_egnn.json", &report.to_json()?)?;
        eprintln!("seed {seed}: egnn acc {:.4}, best epoch {}", report.acc, history.best_epoch);
        out.finish()?;
    }
    Ok(())
}

fn parse_list<'a>(spec: &'a str, all: &[&'a str]) -> Vec<&'a str> {
    if spec == "all" {
        all.to_vec()
    } else {
        spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }
}

fn parse_modes(spec: &str) -> Result<Vec<PropMode>> {
    let names: Vec<&str> = PropMode::ALL.iter().map(|m| m.name()).collect();
    parse_list(spec, &names)
        .into_iter()
        .map(|n| {
            PropMode::ALL.iter().copied().find(|m| m.name() == n).with_context(|| {
                format!("unknown propagation mode {n:?}; expected one of {}", names.join(", "))
            })
        })
        .collect()
}

fn evaluate_cmd(args: &RunArgs, methods: &str, propagation: &str) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    let methods: Vec<String> = parse_list(methods, &METHODS).into_iter().map(|m| m.replace('-', "_")).collect();
    let methods: Vec<&str> = methods.iter().map(String::as_str).collect();
    let modes = parse_modes(propagation)?;
    let run_id = cfg.hash()[..12].to_string();
    let mut csv = results_header();
    for &seed in &seeds {
        let dir = seed_dir(&cfg, seed)?;
        let (graph, split) = prepare(&cfg, seed)?;
        let backbone = load_backbone(&graph, &split, &dir.join("backbone.json"), cfg.backbone.dropout)?;
        let wants = |m: &str| methods.contains(&m);
        let epn = wants("epn").then(|| load_probe(&dir.join("probe_epn.json"), &backbone, &cfg)).transpose()?;
        let epn_reg =
            wants("epn_reg").then(|| load_probe(&dir.join("probe_epn_reg.json"), &backbone, &cfg)).transpose()?;
        let egnn = if wants("egnn") {
            let path = dir.join("egnn.json");
            let gcn = GcnModel::from_checkpoint(&graph, load_checkpoint(&path)?, cfg.egnn.gcn.dropout)
                .with_context(|| format!("loading {}", path.display()))?;
            Some(EgnnHead { gcn, activation: cfg.egnn.activation })
        } else {
            None
        };
        let art = Artifacts { backbone: &backbone, epn: epn.as_ref(), epn_reg: epn_reg.as_ref(), egnn: egnn.as_ref() };
        let rows = evaluate_methods(&methods, &modes, &art, &graph, &split, &cfg)?;
        for r in rows {
            csv.push_str(&r.report.csv_row(&run_id, seed, &r.method, r.propagation.name(), "loc"));
        }
    }
    write_results(&cfg, "evaluate", &seeds, &csv)
}

fn write_results(cfg: &RunConfig, command: &str, seeds: &[u64], csv: &str) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let mut out = Outputs::new(cfg.output_dir.clone(), command, cfg, seeds[0]);
    out.write("results.csv", csv)?;
    out.finish()?;
    print!("{csv}");
    Ok(())
}

fn bench_cmd(args: &RunArgs) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    let run_id = cfg.hash()[..12].to_string();
    let mut csv = results_header();
    for &seed in &seeds {
        let t = Instant::now();
        let run = run_benchmark(&cfg, seed)?;
        csv.push_str(&run.csv_rows(&run_id));
        eprintln!(
            "seed {seed}: backbone acc {:.4}, backbone {:.2}s, probe {:.2}s, total {:.1}s",
            run.backbone_acc,
            run.backbone_secs,
            run.probe_secs,
            t.elapsed().as_secs_f64()
        );
    }
    write_results(&cfg, "bench", &seeds, &csv)
}

fn verify_theory_cmd(seed: u64, out: &Path, mu_norm: Option<f64>, corrupt: bool) -> Result<bool> {
    let mut settings = TheorySettings { seed, ..TheorySettings::default() };
    if let Some(m) = mu_norm {
        settings.mu_norm = m;
    }
    let report = run_all(settings, corrupt)?;
    fs::write(out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    for c in &report.checks {
        println!("{} {} value={:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    Ok(report.all_passed)
}

fn gen_synthetic_cmd(args: &RunArgs, out: &Path) -> Result<()> {
    let (cfg, seeds) = args.load()?;
    for &seed in &seeds {
        let dir = if seeds.len() == 1 { out.to_path_buf() } else { out.join(format!("seed_{seed}")) };
        let (graph, split) = prepare(&cfg, seed)?;
        save_graph(&graph, &dir)?;
        fs::write(dir.join("split.json"), split.to_json()?).with_context(|| format!("writing {}", dir.display()))?;
        eprintln!("seed {seed}: {} nodes, {} edges -> {}", graph.num_nodes(), graph.num_edges(), dir.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::TrainBackbone(a) => train_backbone_cmd(&a)?,
        Command::TrainProbe { run, backbone, variant } => train_probe_cmd(&run, backbone.as_deref(), &variant)?,
        Command::TrainEgnn(a) => train_egnn_cmd(&a)?,
        Command::Evaluate { run, methods, propagation } => evaluate_cmd(&run, &methods, &propagation)?,
        Command::Bench(a) => bench_cmd(&a)?,
        Command::VerifyTheory { seed, out, mu_norm, corrupt_digamma } => {
            return verify_theory_cmd(seed, &out, mu_norm, corrupt_digamma);
        }
        Command::GenSynthetic { run, out } => gen_synthetic_cmd(&run, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
