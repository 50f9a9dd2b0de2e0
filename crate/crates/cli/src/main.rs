use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use zshar::data::skeleton::{format_skeleton_csv, BONES};
use zshar::data::{kfold_split, load_manifest, synth_generate, Dataset, FoldsFile, SkeletonSequence, SynthConfig};
use zshar::model::{evaluate, explain, load_checkpoint, save_checkpoint, seen_references, train, TrainConfig};
use zshar::{Error, Result};

#[derive(Parser)]
#[command(name = "zshar", version, about = "Zero-shot activity recognition with skeleton explanations")]
struct Cli {
    /// JSON object whose fields override the corresponding flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Partition classes into seen/unseen folds.
    Split(SplitArgs),
    /// Train on the seen classes of one fold.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the unseen classes of its fold.
    Eval(EvalArgs),
    /// Predict one sample and render its skeleton explanation.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    super_classes: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    videos_per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Number of folds (defaults to the manifest value).
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 3)]
    unseen_per_fold: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    folds: PathBuf,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    stacks: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    decoder_hidden: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    folds: PathBuf,
    #[arg(long, default_value_t = 0)]
    fold: usize,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    sample: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Split(a) => cmd_split(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Explain(a) => cmd_explain(cli, a),
    }
}

/// Overlays the `--config` object onto `base`; unknown keys are rejected.
fn with_overrides<T: Serialize + DeserializeOwned>(base: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else { return Ok(base) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let overrides: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(overrides) = overrides else {
        return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
    };
    let Value::Object(mut merged) = serde_json::to_value(base).expect("serialisable") else {
        unreachable!("configs serialise to objects")
    };
    for (k, v) in overrides {
        if !merged.contains_key(&k) {
            return Err(Error::Config(format!("{}: unknown field `{k}`", path.display())));
        }
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::File {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let config = SynthConfig {
        classes: a.classes.unwrap_or(d.classes),
        super_classes: a.super_classes.unwrap_or(d.super_classes),
        samples_per_class: a.samples_per_class.unwrap_or(d.samples_per_class),
        videos_per_class: a.videos_per_class.unwrap_or(d.videos_per_class),
        frames: a.frames.unwrap_or(d.frames),
        seed: cli.seed.unwrap_or(d.seed),
        ..d
    };
    let config = with_overrides(config, cli.config.as_deref())?;
    config.validate()?;
    create_dir(&cli.out)?;
    let manifest = synth_generate(&config, &cli.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_split(cli: &Cli, a: &SplitArgs) -> Result<()> {
    #[derive(Serialize, serde::Deserialize)]
    struct SplitConfig {
        folds: Option<usize>,
        unseen_per_fold: usize,
        seed: u64,
    }
    let config = with_overrides(
        SplitConfig {
            folds: a.folds,
            unseen_per_fold: a.unseen_per_fold,
            seed: cli.seed.unwrap_or(1),
        },
        cli.config.as_deref(),
    )?;
    let manifest = load_manifest(&a.manifest)?;
    let map = zshar::data::split::read_superclass_map(&manifest.resolve(&manifest.superclass_path))?;
    let classes: Vec<String> = map.classes().map(String::from).collect();
    let folds = kfold_split(
        &classes,
        &map,
        config.folds.unwrap_or(manifest.folds),
        config.unseen_per_fold,
        config.seed,
    )?;
    let file = FoldsFile {
        seed: config.seed,
        unseen_per_fold: config.unseen_per_fold,
        folds,
    };
    create_dir(&cli.out)?;
    let path = cli.out.join("folds.json");
    write(&path, &file.to_json())?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        lambda: a.lambda.unwrap_or(d.lambda),
        alpha: a.alpha.unwrap_or(d.alpha),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        hidden: a.hidden.unwrap_or(d.hidden),
        stacks: a.stacks.unwrap_or(d.stacks),
        dropout: a.dropout.unwrap_or(d.dropout),
        frames: a.frames.unwrap_or(d.frames),
        decoder_hidden: a.decoder_hidden.unwrap_or(d.decoder_hidden),
        seed: cli.seed.unwrap_or(d.seed),
        ..d
    };
    let config = with_overrides(config, cli.config.as_deref())?;
    config.validate()?;
    let dataset = Dataset::open(&a.manifest)?;
    let folds = FoldsFile::read(&a.folds)?;
    let fold = folds.fold(a.fold)?;

    create_dir(&cli.out)?;
    let mut log = String::new();
    let outcome = train(&dataset, fold, &config, |e| {
        let line = serde_json::to_string(e).expect("serialisable");
        eprintln!("{line}");
        log.push_str(&line);
        log.push('\n');
    })?;
    write(&cli.out.join("train_log.jsonl"), &log)?;
    let checkpoint = cli.out.join("checkpoint.json");
    save_checkpoint(&outcome.model, &checkpoint)?;
    println!("{} (best epoch {})", checkpoint.display(), outcome.best_epoch);
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let dataset = Dataset::open(&a.manifest)?;
    let folds = FoldsFile::read(&a.folds)?;
    let report = evaluate(&model, &dataset, folds.fold(a.fold)?)?;
    create_dir(&cli.out)?;
    write(&cli.out.join("report.json"), &report.to_json())?;
    let text = report.to_text();
    write(&cli.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_explain(cli: &Cli, a: &ExplainArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let dataset = Dataset::open(&a.manifest)?;
    let window = dataset
        .window(&a.sample)
        .ok_or_else(|| Error::Data(format!("unknown sample id `{}`", a.sample)))?;
    let unseen = dataset.semantics.subset(model.unseen_classes.iter().map(String::as_str))?;
    let seen: BTreeSet<String> = model.seen_classes.iter().cloned().collect();
    let (refs, cost) = seen_references(&dataset, &seen)?;
    let e = explain(window, &model, &unseen, &refs, &cost)?;

    create_dir(&cli.out)?;
    let stem = file_stem(&e.sample_id);
    write(&cli.out.join(format!("{stem}.csv")), &format_skeleton_csv(&e.generated))?;
    let frames_dir = cli.out.join(format!("{stem}_frames"));
    create_dir(&frames_dir)?;
    for t in 0..e.generated.frames() {
        write(&frames_dir.join(format!("frame_{t:04}.svg")), &render_svg(&e.generated, t))?;
    }

    let mut json = serde_json::to_value(&e).expect("serialisable");
    json["seed"] = model.config.seed.into();
    json["label"] = window.label.clone().into();
    json["frames"] = e.generated.frames().into();
    let text = serde_json::to_string_pretty(&json).expect("serialisable") + "\n";
    write(&cli.out.join(format!("{stem}.json")), &text)?;
    print!("{text}");
    Ok(())
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

const CANVAS: f64 = 240.0;
const SCALE: f64 = 80.0;

/// One frame as a stick figure; y points up in skeleton space.
fn render_svg(seq: &SkeletonSequence, t: usize) -> String {
    let at = |j: usize| {
        let p = seq.point(t, j);
        let y = p.get(1).copied().unwrap_or(0.0);
        (CANVAS / 2.0 + SCALE * p[0], CANVAS / 2.0 - SCALE * y)
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let _ = writeln!(s, "<g stroke=\"black\" stroke-width=\"3\" stroke-linecap=\"round\">");
    for &(i, j) in BONES.iter().filter(|(i, j)| *i < seq.joints() && *j < seq.joints()) {
        let ((x1, y1), (x2, y2)) = (at(i), at(j));
        let _ = writeln!(s, "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>");
    }
    let _ = writeln!(s, "</g>\n<g fill=\"red\">");
    for j in 0..seq.joints() {
        let (x, y) = at(j);
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\"/>");
    }
    let _ = writeln!(s, "</g>\n<text x=\"4\" y=\"14\" font-size=\"12\">{} t={t}</text>\n</svg>", seq.class);
    s
}
