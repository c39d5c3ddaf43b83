//! Implementations of the five subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;

use pupilkit::detector::{
    argmax_response, coarse_response_map, extract_patch, refine_subpixel, DetectSettings,
    ResponseMap,
};
use pupilkit::eval::{
    cross_validate, evaluate_frames, CvMethod, DetectorSpec, EvalRow,
};
use pupilkit::image::GrayImage;
use pupilkit::io::{load_frames, load_image, load_manifest, write_synthetic_dataset, LabeledFrame, SyntheticParams};
use pupilkit::nn::{
    build_config, grad_check_with, init_model, negative_control_backward, net_backward,
    net_forward, ConfigName, NetworkModel, Tensor3,
};
use pupilkit::trainer::{train_rounds, RoundSchedule, TrainingConfig};

use crate::file_config::FileConfig;

fn init_threads(single_thread: bool, threads: Option<usize>) -> Result<()> {
    let n = if single_thread { Some(1) } else { threads };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn load_datasets(manifests: &[PathBuf]) -> Result<Vec<Vec<LabeledFrame>>> {
    if manifests.is_empty() {
        bail!("at least one --data manifest is required");
    }
    manifests
        .iter()
        .map(|path| {
            let manifest =
                load_manifest(path).with_context(|| format!("loading {}", path.display()))?;
            let frames = load_frames(&manifest)
                .with_context(|| format!("loading frames of {}", path.display()))?;
            Ok(frames)
        })
        .collect()
}

// ---------------------------------------------------------------- train ---

#[derive(Args)]
pub struct TrainArgs {
    /// Network configuration: ck8p8, ck8p16, ck16p32, fine or sk8p8.
    #[arg(long)]
    config: Option<String>,
    /// Label manifest CSV; repeat for multiple datasets.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Output model file (PNETv1).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV (default: `<out>.log.csv`).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Epochs per round.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Sample-set size for round 1.
    #[arg(long)]
    set_size_round1: Option<usize>,
    /// Sample-set size for the later rounds.
    #[arg(long)]
    set_size: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    frames_per_dataset: Option<usize>,
    #[arg(long)]
    max_validation_samples: Option<usize>,
    #[arg(long)]
    fine_tune_epochs: Option<usize>,
    #[arg(long)]
    fine_tune_lr: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    single_thread: bool,
    /// TOML file whose keys mirror these flags; flags win.
    #[arg(long)]
    config_file: Option<PathBuf>,
}

pub fn build_training_config(
    target: ConfigName,
    seed: u64,
    rounds: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    set_size_round1: Option<usize>,
    set_size: Option<usize>,
) -> TrainingConfig {
    let r1 = set_size_round1.unwrap_or(20_000);
    let later = set_size.unwrap_or(40_000);
    let mut config = TrainingConfig::with_set_sizes(target, seed, r1, later);
    if let Some(n) = rounds {
        config.rounds = (1..=n)
            .map(|r| RoundSchedule {
                round_index: r,
                start_lr: 10f64.powi(-(r as i32)),
                epochs: 50,
                lr_drop_every: 10,
                lr_drop_factor: 0.1,
                lr_floor: 1e-6,
                batch_size: 100,
                set_size_target: if r == 1 { r1 } else { later },
            })
            .collect();
    }
    for round in config.rounds.iter_mut() {
        if let Some(e) = epochs {
            round.epochs = e;
        }
        if let Some(b) = batch_size {
            round.batch_size = b;
        }
    }
    config
}

pub fn train(mut args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config_file.as_deref())?;
    file.fill_string(&mut args.config, "config")?;
    file.fill_paths(&mut args.data, "data")?;
    file.fill_path(&mut args.out, "out")?;
    file.fill_path(&mut args.log, "log")?;
    file.fill_u64(&mut args.seed, "seed")?;
    file.fill_usize(&mut args.rounds, "rounds")?;
    file.fill_usize(&mut args.epochs, "epochs")?;
    file.fill_usize(&mut args.batch_size, "batch-size")?;
    file.fill_usize(&mut args.set_size_round1, "set-size-round1")?;
    file.fill_usize(&mut args.set_size, "set-size")?;
    file.fill_f64(&mut args.validation_fraction, "validation-fraction")?;
    file.fill_usize(&mut args.frames_per_dataset, "frames-per-dataset")?;
    file.fill_usize(&mut args.max_validation_samples, "max-validation-samples")?;
    file.fill_usize(&mut args.fine_tune_epochs, "fine-tune-epochs")?;
    file.fill_f64(&mut args.fine_tune_lr, "fine-tune-lr")?;
    file.fill_usize(&mut args.threads, "threads")?;

    init_threads(args.single_thread, args.threads)?;
    let target: ConfigName = args
        .config
        .as_deref()
        .context("--config is required")?
        .parse()?;
    let out = args.out.clone().context("--out is required")?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| out.with_extension("log.csv"));

    let datasets = load_datasets(&args.data)?;
    let mut config = build_training_config(
        target,
        args.seed.unwrap_or(0),
        args.rounds,
        args.epochs,
        args.batch_size,
        args.set_size_round1,
        args.set_size,
    );
    if let Some(f) = args.validation_fraction {
        config.validation_fraction = f;
    }
    if let Some(n) = args.frames_per_dataset {
        config.frames_per_dataset = n;
    }
    if let Some(n) = args.max_validation_samples {
        config.max_validation_samples = n;
    }
    if let Some(n) = args.fine_tune_epochs {
        config.fine_tune_epochs = n;
    }
    if let Some(lr) = args.fine_tune_lr {
        config.fine_tune_lr = lr;
    }

    let started = Instant::now();
    let slices: Vec<&[LabeledFrame]> = datasets.iter().map(|d| d.as_slice()).collect();
    let (model, log) = train_rounds(build_config(target), &slices, &config)?;
    model.save(&out)?;
    log.save(&log_path)?;
    let best = log
        .rows
        .iter()
        .map(|r| r.validation_score)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "trained {target} on {} dataset(s) in {:.1?}; best validation score {best:.6}",
        datasets.len(),
        started.elapsed()
    );
    println!("model: {}", out.display());
    println!("log:   {}", log_path.display());
    Ok(())
}

// --------------------------------------------------------------- detect ---

#[derive(Args)]
pub struct DetectArgs {
    /// `direct` (default) or `two-stage`.
    #[arg(long)]
    method: Option<String>,
    /// Model file for the direct method.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Coarse-stage model for the two-stage method.
    #[arg(long)]
    coarse_model: Option<PathBuf>,
    /// Fine-stage model for the two-stage method.
    #[arg(long)]
    fine_model: Option<PathBuf>,
    /// Label manifest; detection ignores the labels.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Image files to process instead of a manifest.
    #[arg(long, num_args = 1..)]
    images: Vec<PathBuf>,
    /// Output CSV of predictions.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fine-stage search radius in pixels.
    #[arg(long)]
    radius: Option<usize>,
    /// Fine-stage search stride.
    #[arg(long)]
    stride: Option<usize>,
    /// Coarse scan stride (1 or 2).
    #[arg(long)]
    coarse_stride: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run on one core (benchmark mode).
    #[arg(long)]
    single_thread: bool,
    /// Write zeros to the latency column for byte-reproducible output.
    #[arg(long)]
    no_timing: bool,
    /// Log evaluation counts.
    #[arg(long)]
    verbose: bool,
    #[arg(long)]
    config_file: Option<PathBuf>,
}

fn load_model(path: &Path) -> Result<NetworkModel> {
    NetworkModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn build_detector(
    method: &str,
    model: Option<&Path>,
    coarse_model: Option<&Path>,
    fine_model: Option<&Path>,
    settings: DetectSettings,
) -> Result<DetectorSpec> {
    match method {
        "direct" => {
            let model = load_model(model.context("--model is required for --method direct")?)?;
            if model.config != ConfigName::Sk8P8 {
                bail!(
                    "direct method needs an SK8P8 model, {} is {}",
                    "given model",
                    model.config
                );
            }
            Ok(DetectorSpec::Direct { model })
        }
        "two-stage" => {
            let coarse = load_model(
                coarse_model.context("--coarse-model is required for --method two-stage")?,
            )?;
            let fine =
                load_model(fine_model.context("--fine-model is required for --method two-stage")?)?;
            if !coarse.config.is_coarse() {
                bail!("--coarse-model must be CK8P8/CK8P16/CK16P32, got {}", coarse.config);
            }
            if fine.config != ConfigName::Fine {
                bail!("--fine-model must be FINE, got {}", fine.config);
            }
            Ok(DetectorSpec::TwoStage {
                coarse,
                fine,
                settings,
            })
        }
        other => bail!("unknown method `{other}` (use `direct` or `two-stage`)"),
    }
}

pub fn detect(mut args: DetectArgs) -> Result<()> {
    let file = FileConfig::load(args.config_file.as_deref())?;
    file.fill_string(&mut args.method, "method")?;
    file.fill_path(&mut args.model, "model")?;
    file.fill_path(&mut args.coarse_model, "coarse-model")?;
    file.fill_path(&mut args.fine_model, "fine-model")?;
    file.fill_path(&mut args.data, "data")?;
    file.fill_paths(&mut args.images, "images")?;
    file.fill_path(&mut args.out, "out")?;
    file.fill_usize(&mut args.radius, "radius")?;
    file.fill_usize(&mut args.stride, "stride")?;
    file.fill_usize(&mut args.coarse_stride, "coarse-stride")?;
    file.fill_usize(&mut args.threads, "threads")?;

    init_threads(args.single_thread, args.threads)?;
    let settings = DetectSettings {
        fine_radius: args.radius.unwrap_or(10),
        fine_stride: args.stride.unwrap_or(1),
        coarse_stride: args.coarse_stride.unwrap_or(1),
        ..DetectSettings::default()
    };
    let method = args.method.as_deref().unwrap_or("direct");
    let detector = build_detector(
        method,
        args.model.as_deref(),
        args.coarse_model.as_deref(),
        args.fine_model.as_deref(),
        settings,
    )?;
    let out = args.out.clone().context("--out is required")?;

    // Inputs: a manifest or an explicit image list.
    let inputs: Vec<(String, GrayImage)> = if let Some(manifest_path) = &args.data {
        let manifest = load_manifest(manifest_path)?;
        let frames = load_frames(&manifest)?;
        manifest
            .frames
            .iter()
            .zip(frames)
            .map(|(entry, frame)| (entry.image.display().to_string(), frame.image))
            .collect()
    } else if !args.images.is_empty() {
        args.images
            .iter()
            .map(|p| Ok((p.display().to_string(), load_image(p)?)))
            .collect::<Result<_>>()?
    } else {
        bail!("provide --data <manifest> or --images <files>");
    };

    if args.verbose {
        match &detector {
            DetectorSpec::Direct { .. } => {
                eprintln!("direct: stride-2 scan + 9x9 per-pixel re-rating + 7x7 subpixel window");
            }
            DetectorSpec::TwoStage { settings, .. } => {
                let per_axis = 2 * settings.fine_radius / settings.fine_stride + 1;
                eprintln!(
                    "two-stage: fine search {}x{} = {} evaluations per frame",
                    per_axis,
                    per_axis,
                    per_axis * per_axis
                );
            }
        }
    }

    let mut csv = String::from("image,x,y,confidence,latency_s\n");
    for (name, image) in &inputs {
        let started = Instant::now();
        let result = detector.detect(image)?;
        let latency = if args.no_timing {
            0.0
        } else {
            started.elapsed().as_secs_f64()
        };
        writeln!(
            csv,
            "{},{:.4},{:.4},{:.6},{:.6}",
            name, result.refined_center.0, result.refined_center.1, result.confidence, latency
        )?;
    }
    std::fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} prediction(s) to {}", inputs.len(), out.display());
    Ok(())
}

// ----------------------------------------------------------------- eval ---

#[derive(Args)]
pub struct EvalArgs {
    /// Label manifest CSV; repeat for multiple datasets.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Evaluate a fixed model file (direct method unless models for
    /// two-stage are given).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    coarse_model: Option<PathBuf>,
    #[arg(long)]
    fine_model: Option<PathBuf>,
    /// `direct` or `two-stage`; inferred from the model flags when absent.
    #[arg(long)]
    method: Option<String>,
    /// Leave-one-dataset-out cross-validation with freshly trained models.
    #[arg(long)]
    cross_validate: bool,
    /// Network configuration to train when cross-validating.
    #[arg(long)]
    config: Option<String>,
    /// Summary CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Curve CSV path (default: `<out stem>_curve.csv`).
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    set_size_round1: Option<usize>,
    #[arg(long)]
    set_size: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Measure latency on one core.
    #[arg(long)]
    single_thread: bool,
    /// Write zeros to the latency column for byte-reproducible reports.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    config_file: Option<PathBuf>,
}

pub fn eval(mut args: EvalArgs) -> Result<()> {
    let file = FileConfig::load(args.config_file.as_deref())?;
    file.fill_paths(&mut args.data, "data")?;
    file.fill_path(&mut args.model, "model")?;
    file.fill_path(&mut args.coarse_model, "coarse-model")?;
    file.fill_path(&mut args.fine_model, "fine-model")?;
    file.fill_string(&mut args.method, "method")?;
    file.fill_string(&mut args.config, "config")?;
    file.fill_path(&mut args.out, "out")?;
    file.fill_path(&mut args.curve_out, "curve-out")?;
    file.fill_u64(&mut args.seed, "seed")?;
    file.fill_usize(&mut args.rounds, "rounds")?;
    file.fill_usize(&mut args.epochs, "epochs")?;
    file.fill_usize(&mut args.batch_size, "batch-size")?;
    file.fill_usize(&mut args.set_size_round1, "set-size-round1")?;
    file.fill_usize(&mut args.set_size, "set-size")?;
    file.fill_usize(&mut args.radius, "radius")?;
    file.fill_usize(&mut args.stride, "stride")?;
    file.fill_usize(&mut args.threads, "threads")?;

    init_threads(args.single_thread, args.threads)?;
    let out = args.out.clone().context("--out is required")?;
    let curve_out = args.curve_out.clone().unwrap_or_else(|| {
        let stem = out.file_stem().unwrap_or_default().to_string_lossy();
        out.with_file_name(format!("{stem}_curve.csv"))
    });
    let datasets = load_datasets(&args.data)?;
    let measure = !args.no_timing;

    let rows: Vec<EvalRow> = if args.cross_validate {
        let target: ConfigName = args
            .config
            .as_deref()
            .context("--config is required with --cross-validate")?
            .parse()?;
        let seed = args.seed.unwrap_or(0);
        let training = |t: ConfigName| {
            build_training_config(
                t,
                seed,
                args.rounds,
                args.epochs,
                args.batch_size,
                args.set_size_round1,
                args.set_size,
            )
        };
        let method = match target {
            ConfigName::Sk8P8 => CvMethod::Direct {
                training: training(ConfigName::Sk8P8),
            },
            ConfigName::Fine => bail!("cross-validate a coarse config or sk8p8, not fine alone"),
            coarse => CvMethod::TwoStage {
                coarse_training: training(coarse),
                fine_training: training(ConfigName::Fine),
                settings: DetectSettings {
                    fine_radius: args.radius.unwrap_or(10),
                    fine_stride: args.stride.unwrap_or(1),
                    ..DetectSettings::default()
                },
            },
        };
        cross_validate(&datasets, &method, measure)?
            .into_iter()
            .map(|fold| fold.row)
            .collect()
    } else {
        let settings = DetectSettings {
            fine_radius: args.radius.unwrap_or(10),
            fine_stride: args.stride.unwrap_or(1),
            ..DetectSettings::default()
        };
        let method = args.method.clone().unwrap_or_else(|| {
            if args.coarse_model.is_some() {
                "two-stage".into()
            } else {
                "direct".into()
            }
        });
        let detector = build_detector(
            &method,
            args.model.as_deref(),
            args.coarse_model.as_deref(),
            args.fine_model.as_deref(),
            settings,
        )?;
        datasets
            .iter()
            .map(|frames| {
                let records = evaluate_frames(frames, &detector, measure)?;
                let id = frames[0].dataset_id.clone();
                Ok(EvalRow::from_records(&id, &detector.name(), &records)?)
            })
            .collect::<Result<_>>()?
    };

    pupilkit::eval::emit_report(&rows, &out, &curve_out)?;
    for row in &rows {
        println!(
            "{} / {}: rate@5px {:.3} over {} frames (mean latency {:.2} ms)",
            row.dataset_id,
            row.method,
            row.curve.rate_at(5),
            row.frames,
            row.mean_latency_s * 1000.0
        );
    }
    println!("summary: {}", out.display());
    println!("curves:  {}", curve_out.display());
    Ok(())
}

// ---------------------------------------------------------------- synth ---

#[derive(Args)]
pub struct SynthArgs {
    /// How many frames to generate.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for PGM files and `manifest.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Maximum number of reflection blobs per frame.
    #[arg(long)]
    max_reflections: Option<usize>,
    #[arg(long)]
    config_file: Option<PathBuf>,
}

pub fn synth(mut args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config_file.as_deref())?;
    file.fill_usize(&mut args.count, "count")?;
    file.fill_u64(&mut args.seed, "seed")?;
    file.fill_path(&mut args.out, "out")?;
    file.fill_usize(&mut args.width, "width")?;
    file.fill_usize(&mut args.height, "height")?;
    file.fill_f64(&mut args.noise_sigma, "noise-sigma")?;
    file.fill_f64(&mut args.blur_sigma, "blur-sigma")?;
    file.fill_usize(&mut args.max_reflections, "max-reflections")?;

    let count = args.count.context("--count is required")?;
    let out = args.out.clone().context("--out is required")?;
    let defaults = SyntheticParams::default();
    let params = SyntheticParams {
        width: args.width.unwrap_or(defaults.width),
        height: args.height.unwrap_or(defaults.height),
        noise_sigma: args.noise_sigma.unwrap_or(defaults.noise_sigma),
        blur_sigma: args.blur_sigma.unwrap_or(defaults.blur_sigma),
        reflection_count: (
            defaults.reflection_count.0,
            args.max_reflections.unwrap_or(defaults.reflection_count.1),
        ),
        seed: args.seed.unwrap_or(0),
        ..defaults
    };
    let manifest = write_synthetic_dataset(&params, count, &out)?;
    println!("wrote {count} frame(s) under {}", out.display());
    println!("manifest: {}", manifest.display());
    Ok(())
}

// --------------------------------------------------------------- verify ---

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Random (model, patch, target) triples per configuration.
    #[arg(long, default_value_t = 20)]
    triples: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    single_thread: bool,
    /// Test fixture: swap in a deliberately broken pooling backward and
    /// watch the gradient checks fail.
    #[arg(long, hide = true)]
    inject_pool_bug: bool,
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

fn random_patch(size: usize, rng: &mut impl rand_like::RngLike) -> Tensor3 {
    let mut t = Tensor3::zeros(size, size, 1);
    for v in t.values_mut() {
        *v = rng.next_f32();
    }
    t
}

/// Minimal deterministic generator so the CLI does not need its own RNG
/// dependency; SplitMix64 under the hood.
mod rand_like {
    pub trait RngLike {
        fn next_u64(&mut self) -> u64;
        fn next_f32(&mut self) -> f32 {
            (self.next_u64() >> 40) as f32 / (1u64 << 24) as f32
        }
        fn next_range(&mut self, lo: usize, hi: usize) -> usize {
            lo + (self.next_u64() % (hi - lo) as u64) as usize
        }
    }

    pub struct SplitMix(pub u64);

    impl RngLike for SplitMix {
        fn next_u64(&mut self) -> u64 {
            self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        }
    }
}

pub fn verify(args: VerifyArgs) -> Result<()> {
    use rand_like::{RngLike, SplitMix};
    init_threads(args.single_thread, args.threads)?;
    let seed = args.seed.unwrap_or(0);
    let mut checks: Vec<Check> = Vec::new();

    // 1. Architecture shape chains.
    let expected_chains = [
        (ConfigName::Ck8P8, [24usize, 20, 5, 1]),
        (ConfigName::Ck8P16, [24, 20, 5, 1]),
        (ConfigName::Ck16P32, [24, 20, 5, 1]),
        (ConfigName::Fine, [89, 70, 14, 1]),
        (ConfigName::Sk8P8, [25, 20, 5, 1]),
    ];
    for (config, want) in expected_chains {
        let chain = build_config(config).shape_chain()?;
        let got = [chain[0].0, chain[1].0, chain[2].0, chain[3].0];
        checks.push(Check {
            name: format!("shape chain {config}"),
            passed: got == want,
            detail: format!("{} -> {} -> {} -> {}", got[0], got[1], got[2], got[3]),
        });
    }

    // 2. Gradient checks per configuration.
    let gradient_fn = if args.inject_pool_bug {
        negative_control_backward
    } else {
        net_backward
    };
    for config in ConfigName::ALL {
        let mut worst = 0.0f64;
        for i in 0..args.triples {
            let mut rng = SplitMix(seed ^ ((i as u64) << 8) ^ config.input_size() as u64);
            let model = init_model(build_config(config), rng.next_u64());
            let patch = random_patch(config.input_size(), &mut rng);
            let target = (i % 2) as f32;
            let err = grad_check_with(&model, &patch, target, gradient_fn)?;
            worst = worst.max(err);
        }
        checks.push(Check {
            name: format!("gradient check {config}"),
            passed: worst < 1e-3,
            detail: format!("max relative error {worst:.3e} over {} triples", args.triples),
        });
    }

    // 3. The checker must catch a broken backward pass.
    {
        let mut rng = SplitMix(seed ^ 0xBAD);
        let model = init_model(build_config(ConfigName::Ck8P8), rng.next_u64());
        let patch = random_patch(24, &mut rng);
        let err = grad_check_with(&model, &patch, 1.0, negative_control_backward)?;
        checks.push(Check {
            name: "negative control (broken pooling backward detected)".into(),
            passed: err > 0.5,
            detail: format!("corrupted-gradient error {err:.3e}"),
        });
    }

    // 4. Scan / naive-loop oracle equivalence, bit exact.
    for config in [ConfigName::Ck8P8, ConfigName::Sk8P8] {
        let mut rng = SplitMix(seed ^ 0x5CA9 ^ config.input_size() as u64);
        let mut equal = true;
        let mut cases = 0;
        for stride in [1usize, 2] {
            for _ in 0..5 {
                let model = init_model(build_config(config), rng.next_u64());
                let size = config.input_size();
                let w = rng.next_range(size, size + 40);
                let h = rng.next_range(size, size + 30);
                let mut img = vec![0u8; w * h];
                for p in img.iter_mut() {
                    *p = rng.next_u64() as u8;
                }
                let img = GrayImage::new(w, h, img)?;
                let map = coarse_response_map(&img, &model, stride)?;
                let half = (size as i64 - 1) / 2;
                let mut naive = Vec::new();
                for y0 in (0..=h - size).step_by(stride) {
                    for x0 in (0..=w - size).step_by(stride) {
                        let patch =
                            extract_patch(&img, (x0 as i64 + half, y0 as i64 + half), size);
                        naive.push(net_forward(&model, &patch)?);
                    }
                }
                equal &= map.ratings() == naive.as_slice();
                cases += 1;
            }
        }
        checks.push(Check {
            name: format!("scan oracle equivalence {config}"),
            passed: equal,
            detail: format!("{cases} random images, strides 1 and 2, exact"),
        });
    }

    // 5. Subpixel refinement laws.
    {
        let mut ok = true;
        let mut detail = String::new();
        let uniform = ResponseMap::from_parts(
            pupilkit::detector::CoordSpace::Downscaled,
            (0.0, 0.0),
            1,
            9,
            9,
            vec![0.4; 81],
        )?;
        let s = refine_subpixel(&uniform, (4, 4), 7, 7)?;
        ok &= s.dx.abs() < 1e-9 && s.dy.abs() < 1e-9;

        let mut two = vec![0.0f32; 49];
        two[3 * 7 + 3] = 1.0;
        two[6 * 7 + 6] = 1.0;
        let two = ResponseMap::from_parts(
            pupilkit::detector::CoordSpace::Downscaled,
            (0.0, 0.0),
            1,
            7,
            7,
            two,
        )?;
        let s = refine_subpixel(&two, (3, 3), 7, 7)?;
        ok &= (s.dx - 1.5).abs() < 1e-6 && (s.dy - 1.5).abs() < 1e-6;

        let mut rng = SplitMix(seed ^ 0x5F17);
        for _ in 0..200 {
            let grid: Vec<f32> = (0..49).map(|_| rng.next_f32()).collect();
            let mut mirrored = vec![0.0f32; 49];
            for y in 0..7 {
                for x in 0..7 {
                    mirrored[y * 7 + (6 - x)] = grid[y * 7 + x];
                }
            }
            let scaled: Vec<f32> = grid.iter().map(|v| v * 17.0).collect();
            let base = ResponseMap::from_parts(
                pupilkit::detector::CoordSpace::Downscaled,
                (0.0, 0.0),
                1,
                7,
                7,
                grid,
            )?;
            let mir = ResponseMap::from_parts(
                pupilkit::detector::CoordSpace::Downscaled,
                (0.0, 0.0),
                1,
                7,
                7,
                mirrored,
            )?;
            let scl = ResponseMap::from_parts(
                pupilkit::detector::CoordSpace::Downscaled,
                (0.0, 0.0),
                1,
                7,
                7,
                scaled,
            )?;
            let a = refine_subpixel(&base, (3, 3), 7, 7)?;
            let b = refine_subpixel(&mir, (3, 3), 7, 7)?;
            let c = refine_subpixel(&scl, (3, 3), 7, 7)?;
            ok &= (a.dx + b.dx).abs() < 1e-6 && (a.dy - b.dy).abs() < 1e-6;
            ok &= (a.dx - c.dx).abs() < 1e-6 && (a.dy - c.dy).abs() < 1e-6;
            ok &= a.dx.abs() <= 3.0 && a.dy.abs() <= 3.0;
        }
        let _ = write!(detail, "uniform, two-point, 200 mirror/scale windows");
        checks.push(Check {
            name: "subpixel refinement laws".into(),
            passed: ok,
            detail,
        });
    }

    // 6. Argmax tie-breaking.
    {
        let mut ratings = vec![0.1f32; 64];
        ratings[3 * 8 + 5] = 0.9;
        ratings[7 * 8 + 2] = 0.9;
        let map = ResponseMap::from_parts(
            pupilkit::detector::CoordSpace::Downscaled,
            (0.0, 0.0),
            1,
            8,
            8,
            ratings,
        )?;
        let am = argmax_response(&map);
        checks.push(Check {
            name: "argmax tie-breaking".into(),
            passed: am.grid == (5, 3),
            detail: format!("tie resolved to {:?}", am.grid),
        });
    }

    let mut failures = Vec::new();
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            failures.push(c.name.clone());
        }
    }
    if !failures.is_empty() {
        bail!("{} check(s) failed: {}", failures.len(), failures.join(", "));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
