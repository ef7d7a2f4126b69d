//! `textloc` subcommands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use textloc_core::dataset::{corpus_spec, synth_document};
use textloc_core::nn::Generator;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{build_training_pairs, cache_dir, load_dataset, split_of, write_dataset, Split};
use crate::error::{AppError, AppResult};
use crate::features::feature_net;
use crate::fewshot::{fewshot_experiment, pair_config, FewshotOptions};
use crate::io;
use crate::manifest::write_run_records;
use crate::pipeline::{self, detect_all, ground_truth, localize, predict_map, read_box_dir, report_json, report_line, score};
use crate::plot;
use crate::trainer::{train_loop, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "textloc", version, about = "Document text localization with map-predicting adversarial networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON); omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: paths.out, else `textloc-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic document corpus.
    Synth {
        #[arg(long, default_value_t = 20)]
        docs: usize,
        /// How many of the documents go to the test split.
        #[arg(long, default_value_t = 0)]
        test: usize,
    },
    /// Render training pairs (preprocessed image + target map).
    Maps {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the generator/discriminator pair.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides training.total_steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Predict text maps for every image of a dataset or directory.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Turn maps (or, with --checkpoint, images) into box files.
    Localize {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score detections against ground truth.
    Eval {
        /// Directory of detection box files.
        #[arg(long, conflicts_with = "from_images", requires = "gt")]
        det: Option<PathBuf>,
        /// Ground-truth box files (or a dataset directory).
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Run the model over --data and score it in one pass.
        #[arg(long, requires = "checkpoint")]
        from_images: bool,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train one model per training-set size and score each.
    Fewshot {
        /// Training pool (its train split).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Evaluation set (default: paths.eval_data, else the pool's test split).
        #[arg(long)]
        eval_data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = (1..=11).collect::<Vec<usize>>())]
        n_values: Vec<usize>,
        #[arg(long)]
        steps: Option<u64>,
        /// Sample each subset independently instead of nesting them.
        #[arg(long)]
        independent: bool,
    },
    /// Draw loss and few-shot curves as PNG.
    Plot {
        #[arg(long)]
        losses: Option<PathBuf>,
        #[arg(long)]
        fewshot: Option<PathBuf>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run(argv: impl IntoIterator<Item = OsString>) -> i32 {
    let argv: Vec<OsString> = argv.into_iter().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(common: &Common) -> AppResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            AppError::Data(m) => AppError::Usage(format!("--config {m}")),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(AppError::usage)?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from("textloc-out"))
}

fn data_dir(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> AppResult<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| AppError::usage(format!("--{name} is required (or set paths.{} in the config)", name.replace('-', "_"))))
}

/// Config of a stored model: network and preprocessing come from the
/// checkpoint; post-processing and matching from `--config` when given.
fn model_config(ck_cfg: &RunConfig, cli_cfg: &RunConfig, explicit: bool) -> RunConfig {
    let mut cfg = ck_cfg.clone();
    if explicit {
        cfg.postprocess = cli_cfg.postprocess.clone();
        cfg.eval = cli_cfg.eval.clone();
    }
    cfg.seed = cli_cfg.seed;
    cfg.paths = cli_cfg.paths.clone();
    cfg
}

fn load_model(path: &Path, cli_cfg: &RunConfig, explicit: bool) -> AppResult<(Generator<f32>, RunConfig)> {
    let (state, manifest) = checkpoint::load(path)?;
    Ok((state.generator, model_config(&manifest.config, cli_cfg, explicit)))
}

fn execute(cli: Cli) -> AppResult<()> {
    let cfg = resolve_config(&cli.common)?;
    let explicit = cli.common.config.is_some();
    let out = out_dir(&cli.common, &cfg);
    std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
    let command = match &cli.command {
        Command::Synth { .. } => "synth",
        Command::Maps { .. } => "maps",
        Command::Train { .. } => "train",
        Command::Infer { .. } => "infer",
        Command::Localize { .. } => "localize",
        Command::Eval { .. } => "eval",
        Command::Fewshot { .. } => "fewshot",
        Command::Plot { .. } => "plot",
    };
    log::info!("{command}: seed {}, output {}", cfg.seed, out.display());
    write_run_records(&out, command, &cfg)?;

    match cli.command {
        Command::Synth { docs, test } => {
            if test > docs {
                return Err(AppError::usage(format!("--test {test} exceeds --docs {docs}")));
            }
            let mut corpus = Vec::with_capacity(docs);
            let mut splits = BTreeMap::new();
            for i in 0..docs {
                let d = synth_document(&corpus_spec(cfg.seed, i as u64)).map_err(|e| AppError::core("synth", e))?;
                let stem = format!("synth_{i:04}");
                if i >= docs - test {
                    splits.insert(stem.clone(), Split::Test);
                }
                corpus.push((stem, d.image, d.boxes));
            }
            write_dataset(&out, &corpus, &splits)?;
            println!("wrote {docs} documents to {}", out.display());
        }
        Command::Maps { data } => {
            let data = data_dir(&data, &cfg.paths.data, "data")?;
            let samples = load_dataset(&data)?;
            let cache = cache_dir(&cfg.paths.cache.clone().unwrap_or_else(|| out.join("cache")));
            let built = build_training_pairs(&samples, &pair_config(&cfg), Some(&cache))?;
            for p in &built.pairs {
                io::write_png(&out.join("images").join(format!("{}.png", p.stem)), &p.image)?;
                io::write_map_png(&out.join("maps").join(format!("{}.png", p.stem)), &p.map)?;
            }
            println!(
                "rendered {} pairs ({} cached, {} skipped)",
                built.pairs.len(),
                built.cache_hits,
                built.skipped.len()
            );
        }
        Command::Train { data, steps, resume } => {
            let data = data_dir(&data, &cfg.paths.data, "data")?;
            let samples = split_of(&load_dataset(&data)?, Split::Train);
            let cache = cache_dir(&cfg.paths.cache.clone().unwrap_or_else(|| out.join("cache")));
            let pairs = build_training_pairs(&samples, &pair_config(&cfg), Some(&cache))?.pairs;
            let mut phi = feature_net(&cfg.network.feature)?;
            let flag = Arc::new(AtomicBool::new(false));
            let handler_flag = flag.clone();
            if let Err(e) = ctrlc::set_handler(move || handler_flag.store(true, Ordering::SeqCst)) {
                log::warn!("Ctrl-C handler unavailable: {e}");
            }
            let opts = TrainOptions {
                steps,
                resume,
                interrupt: Some(flag),
            };
            let outcome = train_loop(&cfg, &pairs, &mut phi, &out, &opts)?;
            println!("trained to step {}; checkpoint {}", outcome.state.step, outcome.checkpoint.display());
        }
        Command::Infer { checkpoint, data } => {
            let data = data_dir(&data, &cfg.paths.data, "data")?;
            let (mut g, mcfg) = load_model(&checkpoint, &cfg, explicit)?;
            let samples = load_dataset(&data)?;
            for s in &samples {
                let image = io::read_image(&s.image_path)?;
                let map = predict_map(&mut g, &mcfg, &image, &s.stem)?;
                io::write_map_png(&out.join("maps").join(format!("{}.png", s.stem)), &map)?;
            }
            println!("wrote {} maps to {}", samples.len(), out.join("maps").display());
        }
        Command::Localize { data, checkpoint } => {
            let data = data_dir(&data, &cfg.paths.data, "data")?;
            let boxes = match checkpoint {
                Some(ck) => {
                    let (mut g, mcfg) = load_model(&ck, &cfg, explicit)?;
                    detect_all(&mut g, &mcfg, &load_dataset(&data)?)?
                }
                None => {
                    let dir = if data.join("maps").is_dir() { data.join("maps") } else { data };
                    let mut boxes = BTreeMap::new();
                    for p in io::list_files(&dir, |p| p.extension().is_some_and(|e| e == "png"))? {
                        let stem = io::stem(&p);
                        let map = io::read_map_png(&p, 1.0)?;
                        boxes.insert(stem.clone(), localize(&map, &cfg, &stem)?);
                    }
                    boxes
                }
            };
            for (stem, b) in &boxes {
                io::write_boxes(&out.join("boxes").join(format!("{stem}.txt")), b)?;
            }
            println!("wrote {} box files to {}", boxes.len(), out.join("boxes").display());
        }
        Command::Eval {
            det,
            gt,
            from_images,
            data,
            checkpoint,
        } => {
            let report = if from_images {
                let data = data_dir(&data, &cfg.paths.data, "data")?;
                let ck = checkpoint.ok_or_else(|| AppError::usage("--from-images needs --checkpoint"))?;
                let (mut g, mcfg) = load_model(&ck, &cfg, explicit)?;
                let samples = load_dataset(&data)?;
                score(&detect_all(&mut g, &mcfg, &samples)?, &ground_truth(&samples)?, &mcfg)?
            } else {
                let det = det.ok_or_else(|| AppError::usage("eval needs --det and --gt, or --from-images"))?;
                let gt = gt.ok_or_else(|| AppError::usage("eval needs --gt"))?;
                let gt_dir = if gt.join("annotations").is_dir() { gt.join("annotations") } else { gt };
                let det_dir = if det.join("boxes").is_dir() { det.join("boxes") } else { det };
                score(&read_box_dir(&det_dir)?, &read_box_dir(&gt_dir)?, &cfg)?
            };
            io::write_json(&out.join("report.json"), &report_json(&report))?;
            println!("{}", report_line(&report));
        }
        Command::Fewshot {
            data,
            eval_data,
            n_values,
            steps,
            independent,
        } => {
            let data = data_dir(&data, &cfg.paths.data, "data")?;
            let all = load_dataset(&data)?;
            let pool = split_of(&all, Split::Train);
            let eval_set = match eval_data.or_else(|| cfg.paths.eval_data.clone()) {
                Some(dir) => load_dataset(&dir)?,
                None => split_of(&all, Split::Test),
            };
            if eval_set.is_empty() {
                return Err(AppError::usage("fewshot needs an evaluation set: --eval-data, paths.eval_data or a test split"));
            }
            let opts = FewshotOptions {
                independent,
                steps,
                cache: Some(cache_dir(&cfg.paths.cache.clone().unwrap_or_else(|| out.join("cache")))),
            };
            let rows = fewshot_experiment(&cfg, &pool, &n_values, &eval_set, &out, &opts)?;
            for r in rows {
                println!("n={} {}", r.n, pipeline::report_line(&r.eval));
            }
        }
        Command::Plot { losses, fewshot } => {
            if losses.is_none() && fewshot.is_none() {
                return Err(AppError::usage("plot needs --losses and/or --fewshot"));
            }
            if let Some(csv) = losses {
                plot::plot_losses(&csv, &out.join("losses.png"))?;
            }
            if let Some(csv) = fewshot {
                plot::plot_fewshot(&csv, &out.join("fewshot.png"))?;
            }
            println!("charts written to {}", out.display());
        }
    }
    Ok(())
}
