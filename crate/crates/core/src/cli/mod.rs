//! Command-line interface: dataset generation, training, auditing,
//! reporting, and self-verification, all driven by one configuration file.

pub mod verify;

use crate::analysis::{bias_table, class_luminance_map, front_report, FrontReport};
use crate::config::{DatasetConfig, RunConfig};
use crate::data::{
    augment_with_erased_class, generate_blobs, load_dataset, load_idx, make_split, save_dataset,
    AnnotatedDataset, SplitPlan,
};
use crate::error::{Error, Result};
use crate::ganstack::format::{
    load_bundle, load_target, read_container, save_bundle, save_target, Container,
};
use crate::ganstack::{train, train_target, EpochLosses, ModelBundle};
use crate::moea::evolve_with;
use crate::objectives::{evaluate_triple, AnchorContext};
use crate::rng::{derive_seed, rng_from_seed};
use clap::{Args, Parser, Subcommand};
use rand::Rng as _;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "paretofact",
    about = "Multi-criteria counterfactual audits of black-box classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path overrides, e.g. --set nsga.seed=7
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or ingest) the annotated dataset.
    GenData(CommonArgs),
    /// Train the generative stack and the audited target model.
    Train(CommonArgs),
    /// Search for counterfactuals around an anchor and write the front report.
    Audit {
        #[command(flatten)]
        common: CommonArgs,
        /// Explicit anchor position within the holdout split.
        #[arg(long)]
        anchor: Option<usize>,
    },
    /// Derive bias, luminance and similarity analyses from a front report.
    Report(CommonArgs),
    /// Run the built-in invariant checks.
    Verify(CommonArgs),
}

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::GenData(c) => with_config(c, cmd_gen_data),
        Command::Train(c) => with_config(c, cmd_train),
        Command::Audit { common, anchor } => {
            with_config(common, |config, out| cmd_audit(config, out, *anchor))
        }
        Command::Report(c) => with_config(c, cmd_report),
        Command::Verify(_) => cmd_verify(),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn with_config<F>(common: &CommonArgs, f: F) -> Result<()>
where
    F: FnOnce(&RunConfig, &Path) -> Result<()>,
{
    let mut config = RunConfig::load(common.config.as_deref(), &common.set)?;
    if let Some(out) = &common.out {
        config.output_dir = out.display().to_string();
    }
    if config.output_dir.is_empty() {
        return Err(Error::Config(
            "output directory missing: set output_dir or pass --out".into(),
        ));
    }
    let out = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    f(&config, &out)
}

fn build_dataset(config: &DatasetConfig) -> Result<AnnotatedDataset> {
    match config {
        DatasetConfig::Blobs {
            seed,
            n,
            bias,
            erased_class_seed,
        } => {
            let base = generate_blobs(*seed, *n, *bias)?;
            match erased_class_seed {
                Some(s) => augment_with_erased_class(&base, *s),
                None => Ok(base),
            }
        }
        DatasetConfig::Idx { images, labels } => {
            load_idx(Path::new(images), Path::new(labels))
        }
    }
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found at {}; run `paretofact {hint}` first",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
            path.display()
        )));
    }
    Ok(())
}

pub fn cmd_gen_data(config: &RunConfig, out: &Path) -> Result<()> {
    let dataset = build_dataset(&config.dataset)?;
    save_dataset(&out.join("dataset.cgmf"), &dataset)?;
    let manifest = crate::data::store::DatasetManifest::of(&dataset);
    write_json(&out.join("manifest.json"), &manifest)?;

    println!("dataset: {} instances -> {}", dataset.len(), out.display());
    for (label, count) in dataset.class_labels.iter().zip(dataset.per_class_counts()) {
        println!("  class {label}: {count}");
    }
    match &dataset.provenance.bias {
        Some(b) => println!(
            "  planted bias: attribute '{}' on class '{}' at strength {}",
            dataset.attr_names[b.attribute], dataset.class_labels[b.class], b.strength
        ),
        None => println!("  planted bias: none"),
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    loss_history: &'a [EpochLosses],
    target_accuracy: f64,
    train_seed: u64,
    target_seed: u64,
    split_seed: u64,
}

pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<()> {
    let dataset_path = out.join("dataset.cgmf");
    require(&dataset_path, "gen-data")?;
    let dataset = load_dataset(&dataset_path)?;

    let plan = make_split(dataset.len(), config.split.fractions, config.split.seed)?;
    plan.validate(Some(dataset.len()))?;

    let mut model_spec = config.model.clone();
    model_spec.image_shape = dataset.image_shape.clone();
    model_spec.attr_count = dataset.attr_count();
    let mut bundle = ModelBundle::init(model_spec, derive_seed(config.train.seed, 0xB))?;
    let history = train(&mut bundle, &dataset, &plan.gan_train, &config.train)?;

    let (target, accuracy) = train_target(&dataset, &plan, &config.target)?;

    save_bundle(&out.join("bundle.cgmf"), &bundle)?;
    save_target(&out.join("target.cgmf"), &target)?;
    write_json(&out.join("split.json"), &plan)?;
    write_json(
        &out.join("metrics.json"),
        &TrainMetrics {
            loss_history: &history,
            target_accuracy: accuracy,
            train_seed: config.train.seed,
            target_seed: config.target.seed,
            split_seed: config.split.seed,
        },
    )?;

    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "gan: reconstruction {:.4} -> {:.4} over {} epochs",
            first.reconstruction,
            last.reconstruction,
            history.len()
        );
    }
    println!("target model holdout accuracy: {accuracy:.4}");
    Ok(())
}

#[derive(Serialize)]
struct AuditManifest {
    anchor_dataset_index: usize,
    anchor_holdout_position: usize,
    anchor_seed: u64,
    explicit_anchor: bool,
    target_class: Option<usize>,
    intensity: crate::objectives::IntensityMode,
    nsga_seed: u64,
}

pub fn cmd_audit(config: &RunConfig, out: &Path, anchor: Option<usize>) -> Result<()> {
    for (file, hint) in [("dataset.cgmf", "gen-data"), ("bundle.cgmf", "train"), ("target.cgmf", "train"), ("split.json", "train")] {
        require(&out.join(file), hint)?;
    }
    let dataset = load_dataset(&out.join("dataset.cgmf"))?;
    let bundle = load_bundle(&out.join("bundle.cgmf"))?;
    let target = load_target(&out.join("target.cgmf"))?;
    let plan: SplitPlan = read_json(&out.join("split.json"))?;
    plan.validate(Some(dataset.len()))?;

    let holdout = &plan.target_holdout;
    let position = match anchor {
        Some(p) => {
            if p >= holdout.len() {
                return Err(Error::contract(format!(
                    "anchor index {p} out of range: holdout has {} instances",
                    holdout.len()
                )));
            }
            p
        }
        None => rng_from_seed(config.audit.anchor_seed).gen_range(0..holdout.len()),
    };
    let anchor_index = holdout[position];
    let inst = &dataset.instances[anchor_index];
    let ctx = AnchorContext::new(
        &bundle,
        &target,
        &inst.image,
        inst.attributes.clone(),
        config.audit.target_class,
    )?;

    let mode = config.audit.intensity;
    let (front, _trace) = evolve_with(
        dataset.attr_count(),
        |delta| evaluate_triple(&ctx, &bundle, &target, delta, mode),
        &config.nsga,
    )?;

    let report = front_report(
        &front,
        &ctx,
        &bundle,
        &target,
        &dataset,
        &plan.target_train,
        mode,
    )?;
    report.write_files(out)?;
    write_json(
        &out.join("audit_manifest.json"),
        &AuditManifest {
            anchor_dataset_index: anchor_index,
            anchor_holdout_position: position,
            anchor_seed: config.audit.anchor_seed,
            explicit_anchor: anchor.is_some(),
            target_class: config.audit.target_class,
            intensity: mode,
            nsga_seed: config.nsga.seed,
        },
    )?;

    let flips = report
        .members
        .iter()
        .filter(|m| m.predicted_class != report.anchor_class)
        .count();
    let plausible = report.members.iter().filter(|m| m.plausible).count();
    println!(
        "front: {} members ({} plausible, {} class flips) -> {}",
        report.members.len(),
        plausible,
        flips,
        out.display()
    );
    Ok(())
}

pub fn cmd_report(config: &RunConfig, out: &Path) -> Result<()> {
    for (file, hint) in [("dataset.cgmf", "gen-data"), ("report.json", "audit"), ("images.cgmf", "audit")] {
        require(&out.join(file), hint)?;
    }
    let dataset = load_dataset(&out.join("dataset.cgmf"))?;
    let text = std::fs::read_to_string(out.join("report.json"))
        .map_err(|e| Error::io(out.join("report.json").display().to_string(), e))?;
    let mut report: FrontReport = serde_json::from_str(&text)
        .map_err(|e| Error::format(0, format!("report.json is malformed: {e}")))?;
    let images = read_container(&out.join("images.cgmf"))?;
    report.anchor_image = images.tensor("anchor")?.clone();
    report.closest_adversarial.image = images.tensor("closest_adversarial")?.clone();
    for (i, member) in report.members.iter_mut().enumerate() {
        member.image = images.tensor(&format!("member_{i:03}"))?.clone();
    }

    // Per-class luminance maps.
    let mut tensors = Vec::new();
    for (c, label) in dataset.class_labels.iter().enumerate() {
        let map = class_luminance_map(&dataset, c)?;
        tensors.push((format!("class_{label}"), map));
    }
    let container = Container {
        kind: "luminance_maps".into(),
        meta: serde_json::json!({ "classes": dataset.class_labels }),
        tensors,
    };
    crate::ganstack::format::write_container(&out.join("luminance_maps.cgmf"), &container)?;

    // Attribute co-occurrence bias counts.
    let table = bias_table(&dataset, &config.report.bias_combinations)?;
    std::fs::write(out.join("bias_table.csv"), table.to_csv())
        .map_err(|e| Error::io(out.join("bias_table.csv").display().to_string(), e))?;

    // Pairwise similarity over {anchor} + front members.
    let (ssim_matrix, heatmaps) = report.similarity_matrices()?;
    let mut csv = String::from("image");
    let names: Vec<String> = std::iter::once("anchor".to_string())
        .chain((0..report.members.len()).map(|i| format!("member_{i:03}")))
        .collect();
    for n in &names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    for (i, row) in ssim_matrix.iter().enumerate() {
        csv.push_str(&names[i]);
        for v in row {
            csv.push_str(&format!(",{v:.9}"));
        }
        csv.push('\n');
    }
    std::fs::write(out.join("ssim_matrix.csv"), csv)
        .map_err(|e| Error::io(out.join("ssim_matrix.csv").display().to_string(), e))?;

    let heat_tensors: Vec<(String, crate::numcore::Tensor)> = heatmaps
        .into_iter()
        .map(|(i, j, t)| (format!("diff_{}_{}", names[i], names[j]), t))
        .collect();
    let heat = Container {
        kind: "diff_heatmaps".into(),
        meta: serde_json::json!({ "images": names }),
        tensors: heat_tensors,
    };
    crate::ganstack::format::write_container(&out.join("diff_heatmaps.cgmf"), &heat)?;

    println!(
        "report: {} bias rows, {}x{} similarity matrix -> {}",
        table.combinations.len(),
        ssim_matrix.len(),
        ssim_matrix.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_verify() -> Result<()> {
    let summary = verify::run_checks(&verify::default_checks());
    for (name, result) in &summary.results {
        match result {
            Ok(()) => println!("ok   {name}"),
            Err(e) => println!("FAIL {name}: {e}"),
        }
    }
    if summary.all_passed() {
        println!("verify: all {} checks passed", summary.results.len());
        Ok(())
    } else {
        Err(Error::contract(format!(
            "verification failed: {}",
            summary.failures().join("; ")
        )))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::contract(format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(0, format!("{}: {e}", path.display())))
}
