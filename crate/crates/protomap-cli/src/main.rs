//! Command-line driver: rates, thresholds, mapping optimization, clipping
//! sweeps and finite-length simulations from a declarative config.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use protomap::bitmap::{
    optimize_successive, BitMapping, PatternSearchOptions, SuccessiveOptions,
};
use protomap::dde;
use protomap::mcsim;
use protomap::pexit;
use protomap::quantize::QuantizerSpec;
use protomap::signaling::{
    bmd_limit_snr_db, bmd_rate, capacity_awgn, reliability_ordering, uncertainty_llr,
};
use protomap::util::db_to_linear;

#[derive(Parser)]
#[command(name = "protomap", version, about = "Protograph LDPC bit-mapping and quantized-decoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity, bit-metric rate and uncertainty over an SNR grid.
    Rates(CommonArgs),
    /// P-EXIT and density-evolution thresholds for the configured mapping.
    Threshold(CommonArgs),
    /// Successive bit-mapping optimization.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Level ordering: "reliability" (most reliable first) or "index".
        #[arg(long)]
        order: Option<String>,
        /// Threshold objective: "pexit" (default) or "dde".
        #[arg(long)]
        objective: Option<String>,
    },
    /// Density-evolution threshold versus clipping value.
    SweepClipping {
        #[command(flatten)]
        common: CommonArgs,
        /// Also measure the finite-length required SNR per clip value.
        #[arg(long)]
        simulate: bool,
    },
    /// Finite-length Monte-Carlo simulation over an SNR list.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Continue from the checkpoint file when present.
        #[arg(long)]
        resume: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rates(c) => run("rates", c.clone(), |cfg| cmd_rates(cfg)),
        Command::Threshold(c) => run("threshold", c.clone(), |cfg| cmd_threshold(cfg)),
        Command::Optimize {
            common,
            order,
            objective,
        } => run("optimize", common, |cfg| cmd_optimize(cfg, order, objective)),
        Command::SweepClipping { common, simulate } => {
            run("sweep-clipping", common, |cfg| cmd_sweep_clipping(cfg, simulate))
        }
        Command::Simulate { common, resume } => {
            run("simulate", common, |cfg| cmd_simulate(cfg, resume))
        }
    };
    if let Err(e) = result {
        let category = e
            .chain()
            .find_map(|cause| {
                if cause.downcast_ref::<protomap::protosys::Error>().is_some() {
                    Some("code")
                } else if cause.downcast_ref::<protomap::signaling::Error>().is_some() {
                    Some("signaling")
                } else if cause.downcast_ref::<protomap::bitmap::Error>().is_some() {
                    Some("mapping")
                } else if cause.downcast_ref::<protomap::quantize::Error>().is_some() {
                    Some("quantizer")
                } else if cause.downcast_ref::<protomap::dde::Error>().is_some()
                    || cause.downcast_ref::<protomap::pexit::Error>().is_some()
                {
                    Some("analysis")
                } else if cause.downcast_ref::<protomap::mcsim::Error>().is_some() {
                    Some("simulation")
                } else if cause.downcast_ref::<std::io::Error>().is_some() {
                    Some("io")
                } else {
                    None
                }
            })
            .unwrap_or("config");
        eprintln!("error[{category}]: {e:#}");
        std::process::exit(1);
    }
}

fn run<F>(command: &str, common: CommonArgs, body: F) -> Result<()>
where
    F: FnOnce(&ExperimentConfig) -> Result<()>,
{
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = common.out {
        cfg.output.dir = out;
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    let digest = cfg.write_digest(command)?;
    eprintln!("{command}: config digest {digest}");
    body(&cfg)
}

fn snr_grid(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let (lo, hi, step) = (
        cfg.task.snr_db_min.context("task.snr_db_min missing")?,
        cfg.task.snr_db_max.context("task.snr_db_max missing")?,
        cfg.task.snr_db_step.unwrap_or(0.5),
    );
    if step <= 0.0 || hi < lo {
        bail!("invalid SNR grid: [{lo}, {hi}] step {step}");
    }
    let n = ((hi - lo) / step).round() as usize + 1;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

fn cmd_rates(cfg: &ExperimentConfig) -> Result<()> {
    let base = cfg.load_base()?;
    let signaling = cfg.build_signaling(&base)?;
    let samples = cfg.task.uncertainty_samples.unwrap_or(200_000);
    let grid = snr_grid(cfg)?;
    let mut csv = String::from("snr_db,capacity,bmd_rate,uncertainty\n");
    for &snr_db in &grid {
        let snr = db_to_linear(snr_db);
        let cap = capacity_awgn(snr)?;
        let rate = bmd_rate(&signaling, snr);
        let (unc, _) = uncertainty_llr(&signaling, snr, None, samples, cfg.seed);
        let _ = writeln!(csv, "{snr_db},{cap},{rate},{unc}");
    }
    let path = cfg.output.dir.join("rates.csv");
    std::fs::write(&path, csv)?;
    let se = cfg.target_se(&base)?;
    let limit = bmd_limit_snr_db(&signaling, se, (0.0, 40.0));
    println!("bmd limit at eta={se:.4}: {limit:.4} dB");
    println!("wrote {}", path.display());
    Ok(())
}

fn threshold_windows(cfg: &ExperimentConfig, base: &protomap::protosys::BaseMatrix) -> Result<((f64, f64), f64)> {
    let window = match cfg.task.window_db {
        Some(w) => w,
        None => {
            let signaling = cfg.build_signaling(base)?;
            let se = cfg.target_se(base)?;
            let limit = bmd_limit_snr_db(&signaling, se, (0.0, 40.0));
            (limit - 0.2, limit + 4.0)
        }
    };
    Ok((window, cfg.task.tol_db.unwrap_or(0.01)))
}

fn cmd_threshold(cfg: &ExperimentConfig) -> Result<()> {
    let base = cfg.load_base()?;
    let signaling = cfg.build_signaling(&base)?;
    let mapping = cfg.build_mapping(&base)?;
    let spec = cfg.quantizer()?;
    let (window, tol) = threshold_windows(cfg, &base)?;
    let pexit_db = pexit::pexit_threshold(
        &base,
        &mapping,
        &signaling,
        &pexit::PexitOptions {
            window_db: window,
            tol_db: tol,
            ..Default::default()
        },
    )?;
    let dde_result = dde::threshold(
        &base,
        &mapping,
        &signaling,
        &spec,
        &dde::ThresholdOptions {
            window_db: window,
            tol_db: tol,
            params: dde::DdeParams {
                max_iters: cfg.decoder.iterations,
                ..Default::default()
            },
        },
    )?;
    let dde_db = dde_result.threshold_db;
    let gap = dde_db - pexit_db;
    println!("pexit {pexit_db:.4} dB  dde {dde_db:.4} dB  gap {gap:+.4} dB");
    let path = cfg.output.dir.join("threshold.csv");
    std::fs::write(
        &path,
        format!("pexit_db,dde_db,gap_db\n{pexit_db},{dde_db},{gap}\n"),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_optimize(
    cfg: &ExperimentConfig,
    order_flag: Option<String>,
    objective_flag: Option<String>,
) -> Result<()> {
    let base = cfg.load_base()?;
    let signaling = cfg.build_signaling(&base)?;
    let m = signaling.bits_per_symbol();
    let mode = cfg.mapping_mode();
    let parity: BTreeSet<usize> = match mode {
        protomap::bitmap::MappingMode::Pas => {
            base.transmitted_parity_types().into_iter().collect()
        }
        protomap::bitmap::MappingMode::Uniform => BTreeSet::new(),
    };
    let ids = base.transmitted_columns();
    let reference = cfg.build_mapping(&base)?;
    let (window, tol) = threshold_windows(cfg, &base)?;

    let pexit_opts = pexit::PexitOptions {
        window_db: window,
        tol_db: tol,
        ..Default::default()
    };
    let ref_threshold = pexit::pexit_threshold(&base, &reference, &signaling, &pexit_opts)?;
    eprintln!("optimize: reference threshold {ref_threshold:.3} dB");

    let order_kind = order_flag
        .or_else(|| cfg.task.order.clone())
        .unwrap_or_else(|| "reliability".into());
    let ordering: Vec<usize> = match order_kind.as_str() {
        "reliability" => reliability_ordering(&signaling, db_to_linear(ref_threshold)),
        "index" => (1..=m).collect(),
        other => bail!("unknown ordering {other:?}"),
    };
    eprintln!("optimize: level order {ordering:?}");

    let objective_kind = objective_flag
        .or_else(|| cfg.task.objective.clone())
        .unwrap_or_else(|| "pexit".into());
    let obj_window = (ref_threshold - 2.0, ref_threshold + 0.5);
    let spec = cfg.quantizer()?;
    let objective = |mapping: &BitMapping| -> f64 {
        match objective_kind.as_str() {
            "dde" => dde::threshold(
                &base,
                mapping,
                &signaling,
                &spec,
                &dde::ThresholdOptions {
                    window_db: obj_window,
                    tol_db: 0.005,
                    params: Default::default(),
                },
            )
            .map(|r| r.threshold_db)
            .unwrap_or(f64::INFINITY),
            _ => pexit::pexit_threshold(
                &base,
                mapping,
                &signaling,
                &pexit::PexitOptions {
                    window_db: obj_window,
                    tol_db: 0.001,
                    ..Default::default()
                },
            )
            .unwrap_or(f64::INFINITY),
        }
    };
    if objective_kind != "pexit" && objective_kind != "dde" {
        bail!("unknown objective {objective_kind:?}");
    }

    let opts = SuccessiveOptions {
        search: PatternSearchOptions {
            initial_step: 0.25,
            step_tolerance: 0.01,
            parallel: true,
            max_iterations: 200,
        },
    };
    let (optimized, trace) =
        optimize_successive(m, mode, &parity, &ids, &ordering, objective, &opts)?;
    let final_threshold =
        pexit::pexit_threshold(&base, &optimized, &signaling, &pexit_opts)?;

    let mapping_path = cfg.output.dir.join("mapping_optimized.csv");
    optimized.save(&mapping_path)?;
    let mut log = String::new();
    let _ = writeln!(log, "ordering: {ordering:?}");
    let _ = writeln!(log, "objective: {objective_kind}");
    let _ = writeln!(log, "reference_threshold_db: {ref_threshold}");
    for r in &trace.records {
        let _ = writeln!(
            log,
            "level {}: {} -> {} dB ({} polls)",
            r.level, r.initial_objective, r.final_objective, r.polls
        );
    }
    let _ = writeln!(log, "final_threshold_db: {final_threshold}");
    let log_path = cfg.output.dir.join("optimize_trace.log");
    std::fs::write(&log_path, log)?;
    println!(
        "optimized threshold {final_threshold:.4} dB (reference {ref_threshold:.4} dB, gain {:.4} dB)",
        ref_threshold - final_threshold
    );
    println!("wrote {}", mapping_path.display());
    println!("wrote {}", log_path.display());
    Ok(())
}

fn cmd_sweep_clipping(cfg: &ExperimentConfig, simulate: bool) -> Result<()> {
    let base = cfg.load_base()?;
    let signaling = cfg.build_signaling(&base)?;
    let mapping = cfg.build_mapping(&base)?;
    let grid = cfg
        .task
        .clip_grid
        .clone()
        .context("task.clip_grid missing")?;
    let (window, tol) = threshold_windows(cfg, &base)?;
    let opts = dde::ThresholdOptions {
        window_db: (window.0, window.1 + 4.0),
        tol_db: tol,
        params: dde::DdeParams {
            max_iters: cfg.decoder.iterations,
            ..Default::default()
        },
    };
    let (points, argmin) =
        dde::clipping_sweep(&base, &mapping, &signaling, cfg.decoder.bits, &grid, &opts)?;
    let mut sim_points = Vec::new();
    if simulate {
        let target_fer = cfg.task.target_fer.unwrap_or(1e-3);
        let max_frames = cfg.task.max_frames.unwrap_or(2_000_000);
        for (k, &(clip, th)) in points.iter().enumerate() {
            let spec = QuantizerSpec::new(cfg.decoder.bits, clip)?;
            let chain = mcsim::Chain::new(
                base.clone(),
                cfg.code.lift_seed,
                mapping.clone(),
                signaling.clone(),
                mcsim::DecoderConfig::quantized(spec, cfg.decoder.iterations),
            )?;
            let r = mcsim::required_snr(
                &chain,
                target_fer,
                (th - 0.1, th + 1.5),
                0.05,
                cfg.seed ^ ((k as u64) << 32),
                max_frames,
            )?;
            eprintln!("sweep: B={clip} required snr {:.3} dB", r.snr_db);
            sim_points.push(r.snr_db);
        }
    }
    let mut csv = String::from(if simulate {
        "B,dde_threshold,required_snr\n"
    } else {
        "B,dde_threshold\n"
    });
    for (k, &(clip, th)) in points.iter().enumerate() {
        if simulate {
            let _ = writeln!(csv, "{clip},{th},{}", sim_points[k]);
        } else {
            let _ = writeln!(csv, "{clip},{th}");
        }
    }
    let path = cfg.output.dir.join("sweep_clipping.csv");
    std::fs::write(&path, csv)?;
    println!("argmin clip {argmin} (bits {})", cfg.decoder.bits);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, resume: bool) -> Result<()> {
    let base = cfg.load_base()?;
    let signaling = cfg.build_signaling(&base)?;
    let mapping = cfg.build_mapping(&base)?;
    let chain = mcsim::Chain::new(
        base,
        cfg.code.lift_seed,
        mapping,
        signaling,
        cfg.decoder_config()?,
    )?;
    let snr_list = cfg
        .task
        .snr_db_list
        .clone()
        .context("task.snr_db_list missing")?;
    let stop = mcsim::StopRule {
        min_frame_errors: cfg.task.min_frame_errors.unwrap_or(100),
        max_frames: cfg.task.max_frames.unwrap_or(10_000_000),
    };
    let (_, digest) = cfg.digest("simulate")?;
    let ckpt_path = cfg.output.dir.join("simulate.checkpoint");
    let progress = if resume && ckpt_path.exists() {
        Some(read_checkpoint(&ckpt_path, &digest, snr_list.len())?)
    } else {
        None
    };
    let mut ckpt_state: Vec<mcsim::SnrProgress> =
        progress.clone().unwrap_or_else(|| vec![Default::default(); snr_list.len()]);
    let digest_for_ckpt = digest.clone();
    let ckpt_path_cb = ckpt_path.clone();
    let mut write_ckpt = move |pi: usize, p: &mcsim::SnrProgress| {
        ckpt_state[pi] = *p;
        let mut text = format!("digest {digest_for_ckpt}\n");
        for (i, s) in ckpt_state.iter().enumerate() {
            let _ = writeln!(
                text,
                "{i} {} {} {} {}",
                s.next_frame, s.frames, s.bit_errors, s.frame_errors
            );
        }
        let _ = std::fs::write(&ckpt_path_cb, text);
    };
    let result = mcsim::run_chain(
        &chain,
        &snr_list,
        stop,
        cfg.seed,
        &digest,
        progress,
        Some(&mut write_ckpt),
    );
    let path = cfg.output.dir.join("results.csv");
    std::fs::write(&path, result.to_csv())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_checkpoint(
    path: &PathBuf,
    digest: &str,
    points: usize,
) -> Result<Vec<mcsim::SnrProgress>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().context("empty checkpoint")?;
    if head != format!("digest {digest}") {
        bail!("checkpoint belongs to a different configuration");
    }
    let mut out = vec![mcsim::SnrProgress::default(); points];
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            bail!("bad checkpoint line {line:?}");
        }
        let i: usize = f[0].parse()?;
        if i >= points {
            bail!("checkpoint index {i} out of range");
        }
        out[i] = mcsim::SnrProgress {
            next_frame: f[1].parse()?,
            frames: f[2].parse()?,
            bit_errors: f[3].parse()?,
            frame_errors: f[4].parse()?,
        };
    }
    Ok(out)
}
