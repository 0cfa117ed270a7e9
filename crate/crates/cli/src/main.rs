//! `skeltex` — skeleton sequences to texture images, end to end.
//!
//! Subcommands cover each pipeline stage (parse, preprocess, extract,
//! encode), the batch runner with its manifest (run), the desk-scale
//! classifier (train-baseline / score-baseline), multiplicative score
//! fusion (fuse) and the built-in verification suite (selftest).
//!
//! Every input argument is either a skeleton file path or a synthetic
//! sequence spec `synth:<class>:<frames>` seeded via `--seed`. Logs go to
//! stderr; artifacts go to files or stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use skeltex_core::baseline;
use skeltex_core::config::{ImageSize, PipelineConfig};
use skeltex_core::encode::{generate_image_set, ImageSpec};
use skeltex_core::features::{
    build_selection_plan_for, extract_features, write_feature_csv, Family, Strategy, Subject,
};
use skeltex_core::fusion;
use skeltex_core::pipeline::{run_pipeline, InputSpec};
use skeltex_core::preprocess::{
    preprocess, read_normalized, write_normalized, NormalizedSequence, NORMALIZED_MAGIC,
};
use skeltex_core::selftest::run_selftest;
use skeltex_core::skeleton::{parse_skeleton_reader, synthesize_sequence};

#[derive(Parser)]
#[command(name = "skeltex", version, about = "Skeleton action sequences to texture color images")]
struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    print_default_config: bool,

    /// Pipeline configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed for synthetic `synth:<class>:<frames>` inputs and the
    /// randomized self-test oracles.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a skeleton file and print a summary.
    Parse {
        /// Skeleton file or synth:<class>:<frames>.
        input: String,
    },
    /// Normalize a sequence and write the internal normalized format.
    Preprocess {
        input: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract one feature matrix as CSV.
    Extract {
        input: String,
        /// Feature family: JJd, JJv, JJo, JLd or LLa.
        #[arg(long)]
        family: Family,
        /// Selection strategy: JS1, JS2, JS3, LS1, LS2 or FULL.
        #[arg(long)]
        strategy: Strategy,
        /// Subject for per-subject line strategies: main or auxiliary.
        #[arg(long, default_value = "main")]
        subject: String,
        /// Output CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode sequences into texture images.
    Encode {
        /// Skeleton files, normalized files, or synth:<class>:<frames>.
        inputs: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Square image size override.
        #[arg(long)]
        size: Option<usize>,
        /// Comma-separated subset of the 13 image labels.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<ImageSpec>,
    },
    /// Train a nearest-centroid model from an image index CSV
    /// (header: sample_id,class_id,path).
    TrainBaseline {
        /// Index CSV of training images.
        #[arg(long)]
        index: PathBuf,
        /// Image label the model is trained for (names the score rows).
        #[arg(long)]
        label: ImageSpec,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
    },
    /// Score an image index CSV against a trained model, emitting a
    /// fusion-compatible score CSV.
    ScoreBaseline {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Output score CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse score CSVs by element-wise multiplication and predict.
    Fuse {
        /// One or more score CSV files.
        scores: Vec<PathBuf>,
        /// Restrict fusion to these models (default: the configured set).
        #[arg(long, value_delimiter = ',')]
        models: Vec<ImageSpec>,
        /// Ground-truth CSV (header: sample_id,class_id) for accuracy.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output predictions CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline over many inputs with a run manifest.
    Run {
        /// Skeleton files or synth:<class>:<frames> specs.
        inputs: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Maximum sequences processed concurrently.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Square image size override.
        #[arg(long)]
        size: Option<usize>,
        /// Comma-separated subset of the 13 image labels.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<ImageSpec>,
    },
    /// Run the built-in verification suite and print pass/fail lines.
    Selftest {
        /// Directory with the golden fixture images.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        Some(path) => {
            PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))
        }
        None => Ok(PipelineConfig::default()),
    }
}

/// Resolves an input argument to a normalized two-subject sequence.
/// Accepts synth specs, normalized-format files and raw skeleton files.
fn load_normalized(arg: &str, seed: u64, config: &PipelineConfig) -> Result<NormalizedSequence> {
    if arg.starts_with("synth:") {
        let spec = InputSpec::parse(arg, seed).map_err(anyhow::Error::msg)?;
        let InputSpec::Synthetic { class, frames, seed } = spec else { unreachable!() };
        let seq = synthesize_sequence(class, seed, frames, &config.synthesis)?;
        return Ok(preprocess(&seq)?);
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    if text.starts_with(NORMALIZED_MAGIC) {
        return read_normalized(&text).map_err(anyhow::Error::msg);
    }
    let source_id = PathBuf::from(arg)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    let seq = parse_skeleton_reader(&text, &source_id)?;
    Ok(preprocess(&seq)?)
}

fn write_text_out(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            skeltex_core::encode::write_bytes_atomic(path, text.as_bytes())?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_parse(cli: &Cli, input: &str, config: &PipelineConfig) -> Result<()> {
    let seq = match InputSpec::parse(input, cli.seed).map_err(anyhow::Error::msg)? {
        InputSpec::File(path) => skeltex_core::skeleton::parse_skeleton_file(&path)?,
        InputSpec::Synthetic { class, frames, seed } => {
            synthesize_sequence(class, seed, frames, &config.synthesis)?
        }
    };
    println!("source: {}", seq.source_id);
    println!("frames: {}", seq.frame_count());
    println!("body ids: {}", seq.body_ids().join(", "));
    println!("bodies-per-frame histogram:");
    for (count, frames) in seq.body_histogram().iter().enumerate() {
        if *frames > 0 {
            println!("  {count} bodies: {frames} frames");
        }
    }
    Ok(())
}

fn cmd_preprocess(
    cli: &Cli,
    input: &str,
    out: Option<&PathBuf>,
    config: &PipelineConfig,
) -> Result<()> {
    let normalized = load_normalized(input, cli.seed, config)?;
    eprintln!(
        "{}: {} frames, shadow={}, shadow_frames={}",
        normalized.source_id,
        normalized.frame_count(),
        normalized.shadow,
        normalized.shadow_frames
    );
    write_text_out(out, &write_normalized(&normalized))
}

#[allow(clippy::too_many_arguments)]
fn cmd_extract(
    cli: &Cli,
    input: &str,
    family: Family,
    strategy: Strategy,
    subject: &str,
    out: Option<&PathBuf>,
    config: &PipelineConfig,
) -> Result<()> {
    let subject = match subject.to_ascii_lowercase().as_str() {
        "main" => Subject::Main,
        "auxiliary" | "aux" => Subject::Auxiliary,
        other => bail!("unknown subject {other:?}, expected main or auxiliary"),
    };
    let normalized = load_normalized(input, cli.seed, config)?;
    let plan = build_selection_plan_for(family, strategy, subject, &config.selection)?;
    eprintln!("{family}-{strategy}: {} rows ({} scalar dimensions)", plan.len(), plan.dimension());
    let matrix = extract_features(&normalized, &plan);
    let mut buf = Vec::new();
    write_feature_csv(&matrix, &mut buf)?;
    write_text_out(out, &String::from_utf8(buf).expect("csv is utf-8"))
}

fn cmd_encode(
    cli: &Cli,
    inputs: &[String],
    out: &PathBuf,
    size: Option<usize>,
    labels: &[ImageSpec],
    config: &PipelineConfig,
) -> Result<()> {
    let mut config = config.clone();
    if let Some(side) = size {
        config.image = ImageSize { height: side, width: side };
        config.validate().map_err(|e| anyhow::Error::msg(e.to_string()))?;
    }
    let labels = if labels.is_empty() { config.labels.clone() } else { labels.to_vec() };
    std::fs::create_dir_all(out)?;
    for input in inputs {
        let normalized = load_normalized(input, cli.seed, &config)?;
        let images = generate_image_set(
            &normalized,
            &config.selection,
            config.image.height,
            config.image.width,
            &labels,
        )?;
        for (spec, image) in images {
            let path = out.join(spec.filename(&normalized.source_id));
            image.write_png_atomic(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

/// Index CSV rows: sample id, class id and image path.
struct IndexEntry {
    sample_id: String,
    class_id: usize,
    path: PathBuf,
}

fn read_index_csv(path: &PathBuf) -> Result<Vec<IndexEntry>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "sample_id,class_id,path" {
                bail!(
                    "{}: expected header sample_id,class_id,path, got {line:?}",
                    path.display()
                );
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, ',').collect();
        if fields.len() != 3 {
            bail!("{} line {}: expected 3 fields", path.display(), idx + 1);
        }
        entries.push(IndexEntry {
            sample_id: fields[0].trim().to_string(),
            class_id: fields[1].trim().parse().with_context(|| format!("line {}", idx + 1))?,
            path: PathBuf::from(fields[2].trim()),
        });
    }
    Ok(entries)
}

fn featurize_file(path: &PathBuf) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let image = skeltex_core::encode::TextureImage::from_png_bytes(&bytes)?;
    Ok(baseline::featurize(&image))
}

fn cmd_train_baseline(index: &PathBuf, label: ImageSpec, model_path: &PathBuf) -> Result<()> {
    let entries = read_index_csv(index)?;
    let mut samples = Vec::with_capacity(entries.len());
    for entry in &entries {
        samples.push((featurize_file(&entry.path)?, entry.class_id));
    }
    let model = baseline::train(&samples, label.label())?;
    let mut buf = Vec::new();
    baseline::write_model(&model, &mut buf)?;
    skeltex_core::encode::write_bytes_atomic(model_path, &buf)?;
    eprintln!("trained {} on {} samples, {} classes", label, samples.len(), model.class_count());
    Ok(())
}

fn cmd_score_baseline(model_path: &PathBuf, index: &PathBuf, out: Option<&PathBuf>) -> Result<()> {
    let file = std::fs::File::open(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let model = baseline::read_model(std::io::BufReader::new(file))?;
    let entries = read_index_csv(index)?;
    let mut records = Vec::with_capacity(entries.len());
    for entry in &entries {
        let scores = baseline::score(&model, &featurize_file(&entry.path)?)?;
        records.push(fusion::ScoreRecord {
            model_label: model.image_label.clone(),
            sample_id: entry.sample_id.clone(),
            scores: scores.scores,
        });
    }
    let mut buf = Vec::new();
    fusion::write_score_csv(&records, &mut buf)?;
    write_text_out(out, &String::from_utf8(buf).expect("csv is utf-8"))
}

fn cmd_fuse(
    scores: &[PathBuf],
    models: &[ImageSpec],
    truth: Option<&PathBuf>,
    out: Option<&PathBuf>,
    config: &PipelineConfig,
) -> Result<()> {
    if scores.is_empty() {
        bail!("no score files given");
    }
    let mut records = Vec::new();
    for path in scores {
        let file =
            std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
        records.extend(fusion::read_score_csv(std::io::BufReader::new(file))?);
    }
    // Fusion set: --models override, else the configured set restricted to
    // models that actually appear in the score files.
    let fusion_set: Vec<String> = if models.is_empty() {
        let present: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.model_label.as_str()).collect();
        config
            .fusion_models
            .iter()
            .map(|s| s.label().to_string())
            .filter(|l| present.contains(l.as_str()))
            .collect()
    } else {
        models.iter().map(|s| s.label().to_string()).collect()
    };
    if fusion_set.is_empty() {
        bail!("none of the configured fusion models appear in the score files");
    }
    eprintln!("fusing models: {}", fusion_set.join(", "));

    let fused = fusion::fuse_records(&records, &fusion_set)?;
    let mut text = String::from("sample_id,predicted_class\n");
    let mut predictions: BTreeMap<String, usize> = BTreeMap::new();
    for (sample, scores) in &fused {
        let class = fusion::predict(scores)?;
        predictions.insert(sample.clone(), class);
        text.push_str(&format!("{sample},{class}\n"));
    }
    write_text_out(out, &text)?;

    if let Some(truth_path) = truth {
        let truth_text = std::fs::read_to_string(truth_path)
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let mut correct = 0usize;
        let mut total = 0usize;
        for (idx, line) in truth_text.lines().enumerate() {
            if idx == 0 && line.trim() == "sample_id,class_id" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (sample, class) = line
                .split_once(',')
                .with_context(|| format!("{} line {}", truth_path.display(), idx + 1))?;
            let class: usize = class.trim().parse()?;
            if let Some(predicted) = predictions.get(sample.trim()) {
                total += 1;
                if *predicted == class {
                    correct += 1;
                }
            }
        }
        if total == 0 {
            bail!("ground truth file shares no sample ids with the score files");
        }
        println!("accuracy: {:.4} ({correct}/{total})", correct as f64 / total as f64);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cli: &Cli,
    inputs: &[String],
    out: &PathBuf,
    jobs: usize,
    size: Option<usize>,
    labels: &[ImageSpec],
    config: &PipelineConfig,
) -> Result<()> {
    let mut config = config.clone();
    if let Some(side) = size {
        config.image = ImageSize { height: side, width: side };
    }
    if !labels.is_empty() {
        config.labels = labels.to_vec();
    }
    config.validate().map_err(|e| anyhow::Error::msg(e.to_string()))?;

    let specs: Vec<InputSpec> = inputs
        .iter()
        .map(|arg| InputSpec::parse(arg, cli.seed).map_err(anyhow::Error::msg))
        .collect::<Result<_>>()?;
    let manifest = run_pipeline(&config, &specs, out, jobs)?;
    eprintln!(
        "{} artifacts, {} failures, manifest {}",
        manifest.outputs.len(),
        manifest.failures.len(),
        out.join("manifest.json").display()
    );
    for failure in &manifest.failures {
        eprintln!("FAILED {}: {}", failure.input, failure.error);
    }
    if !manifest.failures.is_empty() {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_selftest(cli: &Cli, golden_dir: Option<&PathBuf>, config: &PipelineConfig) -> Result<()> {
    let report = run_selftest(config, golden_dir.map(PathBuf::as_path), cli.seed);
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", check.name, check.detail);
    }
    if !report.all_passed() {
        std::process::exit(1);
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.print_default_config {
        print!("{}", PipelineConfig::default().to_toml_string());
        return Ok(());
    }
    let config = load_config(&cli)?;

    match &cli.command {
        None => bail!("no subcommand given; see --help"),
        Some(Command::Parse { input }) => cmd_parse(&cli, input, &config),
        Some(Command::Preprocess { input, out }) => {
            cmd_preprocess(&cli, input, out.as_ref(), &config)
        }
        Some(Command::Extract { input, family, strategy, subject, out }) => {
            cmd_extract(&cli, input, *family, *strategy, subject, out.as_ref(), &config)
        }
        Some(Command::Encode { inputs, out, size, labels }) => {
            cmd_encode(&cli, inputs, out, *size, labels, &config)
        }
        Some(Command::TrainBaseline { index, label, model }) => {
            cmd_train_baseline(index, *label, model)
        }
        Some(Command::ScoreBaseline { model, index, out }) => {
            cmd_score_baseline(model, index, out.as_ref())
        }
        Some(Command::Fuse { scores, models, truth, out }) => {
            cmd_fuse(scores, models, truth.as_ref(), out.as_ref(), &config)
        }
        Some(Command::Run { inputs, out, jobs, size, labels }) => {
            cmd_run(&cli, inputs, out, *jobs, *size, labels, &config)
        }
        Some(Command::Selftest { golden_dir }) => cmd_selftest(&cli, golden_dir.as_ref(), &config),
    }
}
