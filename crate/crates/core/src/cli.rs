//! Command-line front end. The `tam` binary only parses arguments and calls
//! [`run`]; everything else lives here so it can be driven from tests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{expand_ranked_trial, TripletDataset};
use crate::experiments::{check_image_fold, kfold_images, kfold_triplets, run_sweep, SweepSpec};
use crate::io::{self, ReportRow, Split};
use crate::model::{FactoredTriplets, Family, WeightModel};
use crate::pca::{fit_pca, PcaProjection};
use crate::synth::{self, SynthSpec, Temperature};
use crate::train::{epoch_accuracy, mean_log_likelihood, train, StopRule, TrainingConfig};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "tam",
    version,
    about = "Fit bilinear similarity models to triplet judgments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Expand 2-of-8 trials into triplet constraints.
    Expand(ExpandArgs),
    /// Fit a PCA projection on a reference corpus.
    FitPca(FitPcaArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Score a trained model on a set of triplets.
    Eval(EvalArgs),
    /// Cross-validated sweep over families and k.
    Cv(CvArgs),
    /// Generate synthetic embeddings and judgments from a known model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Preset {
    /// lr 1e-5, momentum 0.9 (1e-9 for unconstrained in `cv`)
    #[value(name = "paper-default")]
    #[serde(rename = "paper-default")]
    Standard,
    /// lr 1e-9, momentum 0.9
    #[value(name = "paper-unconstrained")]
    #[serde(rename = "paper-unconstrained")]
    RawUnconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRuleArg {
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    Triplets,
    Images,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    /// trials8.csv
    pub trials: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitPcaArgs {
    /// corpus embeddings.csv
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Subtract the corpus mean before projecting.
    #[arg(long)]
    pub centered: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizerArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// L2 coefficient for diagonal_signed_l2 (required for that family).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "max")]
    pub stop_rule: StopRuleArg,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long)]
    pub pca: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-epoch history CSV (default: `<output>.history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub triplets: PathBuf,
    /// Projection to use when the model file has none embedded.
    #[arg(long)]
    pub pca: Option<PathBuf>,
    /// Also write a one-row report.csv here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long, default_value = "validation", value_parser = parse_split)]
    pub split: Split,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    /// Corpus the projection is fit on.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embeddings of the judged images.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long, value_enum, default_value = "triplets")]
    pub mode: CvMode,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, required = true)]
    pub families: Vec<Family>,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    /// Learning rate for the unconstrained family only.
    #[arg(long)]
    pub lr_unconstrained: Option<f64>,
    #[arg(long)]
    pub centered: bool,
    #[arg(long, default_value_t = 0.8)]
    pub target_train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Judged images.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value = "unconstrained", value_parser = parse_family)]
    pub family: Family,
    #[arg(long, default_value_t = 0.0)]
    pub asymmetry: f64,
    /// Fixed logit temperature (default 1 unless --target-bayes is given).
    #[arg(long, conflicts_with = "target_bayes")]
    pub temperature: Option<f64>,
    /// Choose the temperature that yields this Bayes accuracy.
    #[arg(long)]
    pub target_bayes: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub triplets: usize,
    /// Rows in the projection corpus (default max(256, 8d)).
    #[arg(long)]
    pub corpus_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub flags: &'a Command,
    pub seed: Option<u64>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

/// Files written by one command; removed again unless [`Outputs::commit`] is called.
struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            paths: Vec::new(),
            committed: false,
        }
    }

    fn add(&mut self, p: impl Into<PathBuf>) -> PathBuf {
        let p = p.into();
        self.paths.push(p.clone());
        p
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn digest(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(
    command: &Command,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &mut Outputs,
    path: PathBuf,
) -> anyhow::Result<()> {
    let manifest = RunManifest {
        tool: "tam",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: command.name(),
        flags: command,
        seed,
        inputs: inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), digest(p)?)))
            .collect::<anyhow::Result<_>>()?,
        outputs: outputs
            .paths
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    let path = outputs.add(path);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Expand(_) => "expand",
            Command::FitPca(_) => "fit-pca",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Cv(_) => "cv",
            Command::Synth(_) => "synth",
        }
    }
}

impl OptimizerArgs {
    fn stop_rule(&self) -> StopRule {
        match self.stop_rule {
            StopRuleArg::Max => StopRule::WindowMax,
            StopRuleArg::Mean => StopRule::WindowMean,
        }
    }

    /// Resolves flags and preset into a config for `family`.
    fn config(
        &self,
        family: Family,
        lr_override: Option<f64>,
        seed: u64,
    ) -> anyhow::Result<TrainingConfig> {
        let preset_lr = match self.preset {
            Some(Preset::Standard) => Some(1e-5),
            Some(Preset::RawUnconstrained) => Some(1e-9),
            None => None,
        };
        let learning_rate = match (lr_override, self.lr, preset_lr, family) {
            (Some(lr), _, _, _) | (None, Some(lr), _, _) | (None, None, Some(lr), _) => lr,
            (None, None, None, Family::Identity) => 0.0,
            (None, None, None, _) => bail!("--lr or --preset is required for family {family}"),
        };
        let lambda = match (self.lambda, family) {
            (Some(l), _) => l,
            (None, Family::DiagonalSignedL2) => {
                bail!("--lambda is required for family diagonal_signed_l2")
            }
            (None, _) => 0.0,
        };
        let config = TrainingConfig {
            learning_rate,
            momentum: self.momentum.unwrap_or(0.9),
            batch_size: self.batch,
            max_epochs: self.max_epochs,
            patience_window: self.patience,
            seed,
            lambda,
            stop_rule: self.stop_rule(),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Executes a parsed command. Results meant for machines go to `stdout`;
/// progress goes to standard error.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let command = &cli.command;
    match command {
        Command::Expand(a) => cmd_expand(command, a),
        Command::FitPca(a) => cmd_fit_pca(command, a),
        Command::Train(a) => cmd_train(command, a),
        Command::Eval(a) => cmd_eval(command, a, stdout),
        Command::Cv(a) => cmd_cv(command, a),
        Command::Synth(a) => cmd_synth(command, a, stdout),
    }
}

fn cmd_expand(command: &Command, a: &ExpandArgs) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    let trials = io::load_ranked_trials(&a.trials)?;
    let dataset = TripletDataset::new(trials.iter().flat_map(expand_ranked_trial).collect());
    let out = outputs.add(&a.output);
    io::write_triplets(&dataset, &out)?;
    eprintln!(
        "expanded {} trials into {} triplets",
        trials.len(),
        dataset.len()
    );
    write_manifest(
        command,
        None,
        &[&a.trials],
        &mut outputs,
        io::sibling(&a.output, ".manifest.json"),
    )?;
    outputs.commit();
    Ok(())
}

fn cmd_fit_pca(command: &Command, a: &FitPcaArgs) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    let corpus = io::load_embeddings(&a.corpus)?;
    let mut pca = fit_pca(&corpus, a.k)?;
    pca.centered_projection = a.centered;
    let out = outputs.add(&a.output);
    io::save_pca(&pca, &out)?;
    eprintln!(
        "fit {} components on {} x {} corpus",
        pca.k(),
        corpus.len(),
        corpus.dim()
    );
    write_manifest(
        command,
        None,
        &[&a.corpus],
        &mut outputs,
        io::sibling(&a.output, ".manifest.json"),
    )?;
    outputs.commit();
    Ok(())
}

fn load_rows(
    pca: &PcaProjection,
    embeddings: &Path,
    triplets: &Path,
) -> anyhow::Result<FactoredTriplets> {
    let table = io::load_embeddings(embeddings)?;
    let dataset = io::load_triplets(triplets)?;
    let issues = dataset.validate(&table);
    if let Some(first) = issues.first() {
        bail!(
            "{}: {} problem(s), first: {first}",
            triplets.display(),
            issues.len()
        );
    }
    let projected = pca.project_table(&table)?;
    Ok(FactoredTriplets::from_indexed(
        &projected,
        &dataset.resolve(&table)?,
    ))
}

fn cmd_train(command: &Command, a: &TrainArgs) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    let pca = io::load_pca(&a.pca)?;
    let rows = load_rows(&pca, &a.embeddings, &a.triplets)?;
    let config = a.opt.config(a.family, None, a.seed)?;
    let init = WeightModel::init(a.family, pca.k(), config.lambda);
    let (model, history) = train(init, &rows, &config).context("training failed")?;

    let mut meta = BTreeMap::new();
    meta.insert("seed".to_string(), config.seed.to_string());
    meta.insert(
        "learning_rate".to_string(),
        format!("{:e}", config.learning_rate),
    );
    meta.insert("momentum".to_string(), format!("{:e}", config.momentum));
    meta.insert("batch_size".to_string(), config.batch_size.to_string());
    meta.insert("max_epochs".to_string(), config.max_epochs.to_string());
    meta.insert(
        "patience_window".to_string(),
        config.patience_window.to_string(),
    );
    meta.insert("epochs_run".to_string(), history.epochs_run().to_string());
    meta.insert(
        "stop_reason".to_string(),
        history.stop_reason.tag().to_string(),
    );

    let model_path = outputs.add(&a.output);
    io::save_model(&model, Some(&pca), &meta, &model_path)?;
    let history_path = outputs.add(
        a.history
            .clone()
            .unwrap_or_else(|| io::sibling(&a.output, ".history.csv")),
    );
    let file = fs::File::create(&history_path)
        .with_context(|| format!("writing {}", history_path.display()))?;
    history.write_csv(std::io::BufWriter::new(file))?;
    eprintln!(
        "{}: {} epochs ({}), final training accuracy {}",
        a.family,
        history.epochs_run(),
        history.stop_reason.tag(),
        history.epochs.last().map_or_else(
            || epoch_accuracy(&model, &rows).unwrap_or(0.0),
            |r| r.train_accuracy
        )
    );
    write_manifest(
        command,
        Some(a.seed),
        &[&a.embeddings, &a.triplets, &a.pca],
        &mut outputs,
        io::sibling(&a.output, ".manifest.json"),
    )?;
    outputs.commit();
    Ok(())
}

fn cmd_eval(command: &Command, a: &EvalArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    let file = io::load_model(&a.model)?;
    let k = file.model.k();
    let pca = match (&a.pca, file.pca) {
        (Some(p), _) => io::load_pca(p)?,
        (None, Some(p)) => p,
        (None, None) => PcaProjection::identity(k),
    };
    let rows = load_rows(&pca, &a.embeddings, &a.triplets)?;
    let accuracy = epoch_accuracy(&file.model, &rows)?;
    let mean_ll = mean_log_likelihood(&file.model, &rows)?;
    writeln!(stdout, "accuracy,mean_ll,triplets")?;
    writeln!(stdout, "{accuracy},{mean_ll},{}", rows.len())?;

    let mut inputs: Vec<&Path> = vec![&a.model, &a.embeddings, &a.triplets];
    if let Some(p) = &a.pca {
        inputs.push(p);
    }
    if let Some(report) = &a.report {
        let row = ReportRow {
            fold: a.fold,
            family: file.model.family(),
            k,
            split: a.split,
            accuracy,
            mean_ll,
            epochs: file
                .metadata
                .get("epochs_run")
                .and_then(|s| s.parse().ok())
                .unwrap_or(0),
        };
        let path = outputs.add(report);
        io::write_report(&[row], &path)?;
        write_manifest(
            command,
            None,
            &inputs,
            &mut outputs,
            io::sibling(report, ".manifest.json"),
        )?;
    }
    outputs.commit();
    Ok(())
}

fn cmd_cv(command: &Command, a: &CvArgs) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let corpus = io::load_embeddings(&a.corpus)?;
    let table = io::load_embeddings(&a.embeddings)?;
    let dataset = io::load_triplets(&a.triplets)?;
    let issues = dataset.validate(&table);
    if let Some(first) = issues.first() {
        bail!(
            "{}: {} problem(s), first: {first}",
            a.triplets.display(),
            issues.len()
        );
    }

    let folds = match a.mode {
        CvMode::Triplets => kfold_triplets(dataset.len(), a.folds, a.seed)?,
        CvMode::Images => {
            let resolved = dataset.resolve(&table)?;
            let folds = kfold_images(&resolved, &table, a.folds, a.target_train_fraction, a.seed)?;
            for f in &folds {
                check_image_fold(f, &resolved, &table)?;
            }
            folds
        }
    };

    let mut configs = BTreeMap::new();
    for &family in &a.families {
        let lr = if family == Family::Unconstrained {
            a.lr_unconstrained.or(match (a.opt.preset, a.opt.lr) {
                (Some(Preset::Standard), None) => Some(1e-9),
                _ => None,
            })
        } else {
            None
        };
        configs.insert(family, a.opt.config(family, lr, a.seed)?);
    }
    let default_config = configs.values().next().cloned().unwrap_or_default();
    let sweep = SweepSpec {
        ks: a.ks.clone(),
        families: a.families.clone(),
        configs,
        default_config,
        centered_projection: a.centered,
        seed: a.seed,
    };
    eprintln!(
        "running {} folds x {} families x {} k values on {} thread(s)",
        folds.len(),
        sweep.families.len(),
        sweep.ks.len(),
        a.jobs
    );
    let report = run_sweep(&dataset, &corpus, &table, &sweep, &folds, a.jobs)?;

    let report_path = outputs.add(a.out_dir.join("report.csv"));
    io::write_report(&report.rows, &report_path)?;
    let summary_path = outputs.add(a.out_dir.join("report_summary.csv"));
    io::write_summary(&report.summary, &summary_path)?;
    write_manifest(
        command,
        Some(a.seed),
        &[&a.corpus, &a.embeddings, &a.triplets],
        &mut outputs,
        a.out_dir.join("report.manifest.json"),
    )?;
    outputs.commit();
    Ok(())
}

fn cmd_synth(command: &Command, a: &SynthArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let mut outputs = Outputs::new();
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut spec = SynthSpec::new(a.n, a.d, a.k, a.triplets, a.seed);
    spec.family = a.family;
    spec.asymmetry = a.asymmetry;
    spec.temperature = match (a.temperature, a.target_bayes) {
        (Some(t), _) => Temperature::Fixed(t),
        (None, Some(b)) => Temperature::TargetBayes(b),
        (None, None) => Temperature::Fixed(1.0),
    };
    if let Some(c) = a.corpus_size {
        spec.corpus_size = c;
    }
    let data = synth::generate(&spec)?;

    let emb = outputs.add(a.out_dir.join("embeddings.csv"));
    io::write_embeddings(&data.embeddings, &emb)?;
    let corpus = outputs.add(a.out_dir.join("corpus.csv"));
    io::write_embeddings(&data.corpus, &corpus)?;
    let trip = outputs.add(a.out_dir.join("triplets.csv"));
    io::write_triplets(&data.dataset, &trip)?;

    let mut meta = BTreeMap::new();
    meta.insert("seed".to_string(), a.seed.to_string());
    meta.insert("asymmetry".to_string(), format!("{:e}", a.asymmetry));
    meta.insert(
        "temperature".to_string(),
        format!("{:e}", data.truth.temperature),
    );
    meta.insert(
        "bayes_accuracy".to_string(),
        format!("{:e}", data.bayes_accuracy),
    );
    let truth = outputs.add(a.out_dir.join("truth.tam"));
    io::save_model(&data.truth.model, Some(&data.truth.pca), &meta, &truth)?;

    writeln!(stdout, "bayes_accuracy,temperature,truth")?;
    let kind = if a.asymmetry == 0.0 {
        "symmetric"
    } else {
        "asymmetric"
    };
    writeln!(
        stdout,
        "{},{},{kind}",
        data.bayes_accuracy, data.truth.temperature
    )?;
    write_manifest(
        command,
        Some(a.seed),
        &[],
        &mut outputs,
        a.out_dir.join("synth.manifest.json"),
    )?;
    outputs.commit();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt() -> OptimizerArgs {
        OptimizerArgs {
            preset: None,
            lr: None,
            momentum: None,
            batch: 256,
            max_epochs: 1000,
            patience: 10,
            lambda: None,
            stop_rule: StopRuleArg::Max,
        }
    }

    #[test]
    fn presets_resolve_to_published_rates() {
        let mut o = opt();
        o.preset = Some(Preset::Standard);
        let c = o.config(Family::Symmetric, None, 1).unwrap();
        assert_eq!((c.learning_rate, c.momentum), (1e-5, 0.9));
        o.preset = Some(Preset::RawUnconstrained);
        assert_eq!(
            o.config(Family::Unconstrained, None, 1)
                .unwrap()
                .learning_rate,
            1e-9
        );
    }

    #[test]
    fn missing_rate_and_lambda_are_errors() {
        let o = opt();
        assert!(o.config(Family::Symmetric, None, 0).is_err());
        assert!(o.config(Family::Identity, None, 0).is_ok());
        let mut o = opt();
        o.lr = Some(0.1);
        assert!(o.config(Family::DiagonalSignedL2, None, 0).is_err());
        o.lambda = Some(0.01);
        assert_eq!(
            o.config(Family::DiagonalSignedL2, None, 0).unwrap().lambda,
            0.01
        );
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "tam",
            "cv",
            "--corpus",
            "c.csv",
            "--embeddings",
            "e.csv",
            "--triplets",
            "t.csv",
            "--ks",
            "2,4",
            "--families",
            "identity,unconstrained",
            "--lr",
            "0.001",
            "--out-dir",
            "out",
            "--jobs",
            "4",
        ])
        .unwrap();
        match cli.command {
            Command::Cv(a) => {
                assert_eq!(a.ks, vec![2, 4]);
                assert_eq!(a.families, vec![Family::Identity, Family::Unconstrained]);
                assert_eq!(a.jobs, 4);
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(Cli::try_parse_from(["tam", "train", "--family", "full"]).is_err());
    }
}
