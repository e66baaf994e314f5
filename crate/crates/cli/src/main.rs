//! `lrsim`: synthesize degradation data, train the model, degrade images,
//! evaluate and sweep kernel factors.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use lrsim_cli::checkpoint;
use lrsim_cli::config::load_run_config;
use lrsim_cli::error::{CliError, Result};
use lrsim_cli::{imageio, kernel_dump, report};
use lrsim_core::gauss::covariance;
use lrsim_core::image::{extract_pairs, PatchSpec};
use lrsim_core::net::DegradationModel;
use lrsim_core::sweep::{adjust_factors, factor_sweep};
use lrsim_core::synth::{synth_pairs, SyntheticSpec};
use lrsim_core::train::{bicubic_l1, evaluate_l1, train, CheckpointKind};
use lrsim_core::ImagePair;

#[derive(Parser)]
#[command(name = "lrsim", version, about = "Learned HR-to-LR image degradation modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic HR/LR pairs under a known Gaussian truth kernel.
    Synth {
        /// Output directory for <name>_HR.pgm / <name>_LR.pgm pairs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        /// HR image side length in pixels.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Covariance scale of the truth kernel.
        #[arg(long)]
        truth_factor: f64,
        /// Orientation of the truth kernel in degrees.
        #[arg(long, default_value_t = 0.0)]
        truth_angle: f64,
        /// Minor-axis variance ratio of the truth kernel.
        #[arg(long, default_value_t = 0.3)]
        truth_aspect: f64,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Additive Gaussian noise on the LR images.
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
    },
    /// Train a degradation model on a directory of HR/LR pairs.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Key-value run config file.
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path; `<out>.best` is written alongside.
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV (step, epoch, loss, wall_time_s).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Overrides the config file's shuffle/augmentation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one image through a trained model.
    Degrade {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Adjusted kernel factors: one value rescales ratio-preserving,
        /// a full list replaces the bank factors.
        #[arg(long, num_args = 1..)]
        factor: Vec<f64>,
    },
    /// Evaluate mean L1 of a model against ground-truth pairs.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Loss grid over models and adjusted kernel factors.
    Sweep {
        #[arg(long, num_args = 1.., required = true)]
        models: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        factors: Vec<f64>,
        #[arg(long)]
        data: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Heatmap PGM path (default: CSV path with .pgm extension).
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Dump a checkpoint's kernel bank and mixture weights.
    KernelDump {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            out,
            count,
            size,
            truth_factor,
            truth_angle,
            truth_aspect,
            scale,
            seed,
            noise_sigma,
        } => {
            if count == 0 {
                return Err(CliError::usage("--count must be at least 1"));
            }
            if scale < 2 {
                return Err(CliError::usage("--scale must be at least 2"));
            }
            if size == 0 || size % scale != 0 {
                return Err(CliError::usage(format!(
                    "--size {size} must be a positive multiple of --scale {scale}"
                )));
            }
            if noise_sigma < 0.0 {
                return Err(CliError::usage("--noise-sigma must be nonnegative"));
            }
            let cov = covariance(truth_factor, truth_angle.to_radians(), truth_aspect)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let mut spec = SyntheticSpec::procedural(cov, scale);
            spec.hr_size = size;
            spec.noise_sigma = noise_sigma;
            let pairs = synth_pairs(&spec, count, seed)
                .map_err(|e| CliError::shape(e.to_string()))?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let width = (count.max(2) - 1).to_string().len();
            for (i, pair) in pairs.iter().enumerate() {
                imageio::save_pair(&out, &format!("pair_{i:0width$}"), pair)?;
            }
            println!(
                "truth covariance [[{}, {}], [{}, {}]]",
                cov.xx, cov.xy, cov.xy, cov.yy
            );
            println!(
                "RESULT command=synth count={count} scale={scale} size={size} seed={seed} \
                 cov_xx={} cov_xy={} cov_yy={} dir={}",
                cov.xx,
                cov.xy,
                cov.yy,
                out.display()
            );
            Ok(())
        }

        Command::Train { data, config, out, log, seed } => {
            let mut run_cfg = load_run_config(&config)?;
            if let Some(seed) = seed {
                run_cfg.train.seed = seed;
            }
            let named = imageio::load_pair_dir(&data)?;
            let mut pairs: Vec<ImagePair> = named.into_iter().map(|(_, p)| p).collect();
            if run_cfg.patch_size > 0 {
                let spec = PatchSpec {
                    hr_size: run_cfg.patch_size,
                    scale: run_cfg.net.scale,
                    flip_horizontal: false,
                    flip_vertical: false,
                };
                let mut patches = Vec::new();
                for (i, pair) in pairs.iter().enumerate() {
                    let cut = extract_pairs(
                        &pair.hr,
                        &pair.lr,
                        &spec,
                        run_cfg.train.patches_per_image,
                        run_cfg.train.seed.wrapping_add(i as u64),
                    )
                    .map_err(|e| CliError::shape(e.to_string()))?;
                    patches.extend(cut);
                }
                pairs = patches;
            }
            let mut model = DegradationModel::new(run_cfg.net.clone(), run_cfg.model_seed)
                .map_err(|e| CliError::usage(e.to_string()))?;

            let t0 = Instant::now();
            let best_path = {
                let mut p = out.clone().into_os_string();
                p.push(".best");
                PathBuf::from(p)
            };
            let mut cb_err: Option<CliError> = None;
            let train_log = train(&mut model, &pairs, &run_cfg.train, |m, _, kind| {
                if cb_err.is_some() {
                    return;
                }
                let target = match kind {
                    CheckpointKind::Periodic | CheckpointKind::Last => &out,
                    CheckpointKind::Best => &best_path,
                    CheckpointKind::Epoch => return,
                };
                if let Err(e) = checkpoint::save_model(m, target) {
                    cb_err = Some(e);
                }
            })
            .map_err(|e| CliError::shape(e.to_string()))?;
            if let Some(e) = cb_err {
                return Err(e);
            }
            let wall = t0.elapsed().as_secs_f64();

            if let Some(log_path) = log {
                let mut csv = String::from("step,epoch,loss,wall_time_s\n");
                let per_step = wall / train_log.records.len().max(1) as f64;
                for r in &train_log.records {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        r.step,
                        r.epoch,
                        r.loss,
                        per_step * r.step as f64
                    ));
                }
                std::fs::write(&log_path, csv).map_err(|e| CliError::io(&log_path, e))?;
            }
            println!(
                "RESULT command=train steps={} epochs={} final_loss={} best_epoch_loss={} checkpoint={}",
                train_log.records.len(),
                run_cfg.train.epochs,
                train_log.final_loss().unwrap_or(f64::NAN),
                train_log.best_epoch_loss().unwrap_or(f64::NAN),
                out.display()
            );
            Ok(())
        }

        Command::Degrade { model, input, out, factor } => {
            let net = checkpoint::load_model(&model)?;
            let net = apply_factors(&net, &factor)?;
            let img = imageio::load_image(&input)?;
            let lr = net
                .forward_image(&img)
                .map_err(|e| CliError::shape(e.to_string()))?;
            imageio::save_image(&lr, &out)?;
            println!(
                "RESULT command=degrade in={} out={} height={} width={} scale={}",
                input.display(),
                out.display(),
                lr.height(),
                lr.width(),
                net.config().scale
            );
            Ok(())
        }

        Command::Eval { model, data } => {
            let net = checkpoint::load_model(&model)?;
            let pairs: Vec<ImagePair> = imageio::load_pair_dir(&data)?
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            let l1 = evaluate_l1(&net, &pairs).map_err(|e| CliError::shape(e.to_string()))?;
            let bicubic = bicubic_l1(&pairs).map_err(|e| CliError::shape(e.to_string()))?;
            println!(
                "RESULT command=eval pairs={} l1={} bicubic_l1={}",
                pairs.len(),
                l1,
                bicubic
            );
            Ok(())
        }

        Command::Sweep { models, factors, data, out, heatmap } => {
            if factors.iter().any(|&f| f <= 0.0) {
                return Err(CliError::usage("--factors must all be positive"));
            }
            let nets: Vec<DegradationModel> = models
                .iter()
                .map(|p| checkpoint::load_model(p))
                .collect::<Result<_>>()?;
            let pairs: Vec<ImagePair> = imageio::load_pair_dir(&data)?
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            let sweep = factor_sweep(&nets, &factors, &pairs).map_err(|e| match e {
                lrsim_core::sweep::SweepError::TopologyMismatch => CliError::shape(e.to_string()),
                lrsim_core::sweep::SweepError::NoModels
                | lrsim_core::sweep::SweepError::NoFactors => CliError::usage(e.to_string()),
                other => CliError::shape(other.to_string()),
            })?;
            report::write_sweep_csv(&sweep, &out)?;
            let heatmap_path = heatmap.unwrap_or_else(|| out.with_extension("pgm"));
            report::write_heatmap(&sweep, &heatmap_path)?;
            let (r, c) = sweep.argmin();
            println!(
                "RESULT command=sweep models={} factors={} pairs={} best_model_factor={} \
                 best_adjusted_factor={} best_l1={} bicubic_l1={} csv={}",
                sweep.model_factors.len(),
                sweep.adjusted_factors.len(),
                pairs.len(),
                sweep.model_factors[r],
                sweep.adjusted_factors[c],
                sweep.losses[r][c],
                sweep.baseline_bicubic,
                out.display()
            );
            Ok(())
        }

        Command::KernelDump { model, out } => {
            let net = checkpoint::load_model(&model)?;
            kernel_dump::dump(&net, &out)?;
            println!(
                "RESULT command=kernel-dump kernels={} channels={} dir={}",
                net.bank().len(),
                net.config().channels,
                out.display()
            );
            Ok(())
        }
    }
}

/// `--factor` semantics: one value adjusts ratio-preserving, a full list
/// replaces the factors outright.
fn apply_factors(model: &DegradationModel, factors: &[f64]) -> Result<DegradationModel> {
    if factors.is_empty() {
        return model
            .rescaled(&model.config().bank.factors.clone())
            .map_err(|e| CliError::shape(e.to_string()));
    }
    if factors.iter().any(|&f| f <= 0.0) {
        return Err(CliError::usage("--factor values must be positive"));
    }
    let current = model.config().bank.factors.clone();
    let target = if factors.len() == 1 {
        adjust_factors(&current, factors[0])
    } else if factors.len() == current.len() {
        factors.to_vec()
    } else {
        return Err(CliError::usage(format!(
            "--factor wants 1 value or {} values (bank has {} factor groups), got {}",
            current.len(),
            current.len(),
            factors.len()
        )));
    };
    model
        .rescaled(&target)
        .map_err(|e| CliError::shape(e.to_string()))
}
