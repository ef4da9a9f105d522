use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use tabrl_cli::ablation::{run_ablation, DEFAULT_EPSILONS};
use tabrl_cli::config::RunConfig;
use tabrl_cli::evaluator::{eval_grid, ConditionReport, EvalActor, UnseenKind};
use tabrl_cli::planner::run_compose_suite;
use tabrl_cli::render::render_affordance;
use tabrl_cli::trainer::train_all_seeds;
use tabrl_cli::verify::{run_battery, report, BATTERIES};
use tabrl_core::agent::read_checkpoint;
use tabrl_core::surrogate::{DetectorConfig, ProgramSet};
use tabrl_core::{ColorId, EpisodeConfig, Glyph, ObjectKind, OverlapMode, TaskSpec};

#[derive(Parser)]
#[command(
    name = "tabrl",
    version,
    about = "Tabletop pick-and-place RL: training, evaluation, and verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every seed in the config; writes per-seed metrics CSVs, an
    /// aggregate CSV, and one checkpoint per seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Added to every configured seed (extra replicas without editing
        /// the config).
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Evaluate a checkpoint over overlap and object-set conditions.
    Eval {
        /// Trained checkpoint; omit it with --oracle to run the scripted
        /// hierarchy instead.
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Comma-separated overlap conditions: "no", "ao".
        #[arg(long, default_value = "no,ao")]
        conditions: String,
        /// Held-out dimensions to add: "colors", "letters", or
        /// "colors,letters". Seen conditions are always included.
        #[arg(long)]
        unseen: Option<String>,
        /// Run config supplying the task and episode template; defaults to
        /// the standard short-horizon task.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Detector noise during evaluation.
        #[arg(long, default_value_t = 6.0)]
        detector_sigma: f64,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        /// Suite seed; fixed by default so runs are comparable.
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        /// Bypass the checkpoint and evaluate the scripted hierarchy.
        #[arg(long)]
        oracle: bool,
        /// Write the report as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the surrogate share: train all seeds per epsilon and summarize.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated epsilon grid; defaults to the standard sweep.
        #[arg(long)]
        epsilons: Option<String>,
    },
    /// Decompose the long-horizon task into per-letter commands and run a
    /// short-horizon policy on each.
    LhCompose {
        #[arg(long, required_unless_present_any = ["oracle", "uniform_residual"])]
        checkpoint: Option<PathBuf>,
        /// Use the scripted hierarchy per command.
        #[arg(long)]
        oracle: bool,
        /// Scripted target choice but uniform within-crop offsets.
        #[arg(long)]
        uniform_residual: bool,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Environment steps granted per decomposed command.
        #[arg(long, default_value_t = 10)]
        per_command_steps: u32,
        #[arg(long, default_value_t = 0.0)]
        detector_sigma: f64,
        /// Swap held-out glyphs into the letter set.
        #[arg(long)]
        unseen_letters: bool,
        #[arg(long, default_value_t = 2000)]
        seed: u64,
    },
    /// Run a self-verification battery; exits nonzero on any failure.
    Verify {
        /// One of: gradcheck, samplers, freq, env-props, attention, all.
        battery: String,
    },
    /// Interpret an affordance program on a clean synthetic crop and write
    /// the probability map as a PGM.
    RenderAffordance {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, default_value = "O")]
        glyph: String,
        #[arg(long, default_value = "red")]
        color: String,
        /// Render on a bowl crop instead of a letter crop.
        #[arg(long)]
        bowl: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Train {
            config,
            seed_offset,
        } => cmd_train(&config, seed_offset),
        Cmd::Eval {
            checkpoint,
            conditions,
            unseen,
            config,
            detector_sigma,
            episodes,
            seed,
            oracle,
            out,
        } => cmd_eval(
            checkpoint.as_deref(),
            &conditions,
            unseen.as_deref(),
            config.as_deref(),
            detector_sigma,
            episodes,
            seed,
            oracle,
            out.as_deref(),
        ),
        Cmd::Ablate { config, epsilons } => cmd_ablate(&config, epsilons.as_deref()),
        Cmd::LhCompose {
            checkpoint,
            oracle,
            uniform_residual,
            episodes,
            per_command_steps,
            detector_sigma,
            unseen_letters,
            seed,
        } => cmd_lh_compose(
            checkpoint.as_deref(),
            oracle,
            uniform_residual,
            episodes,
            per_command_steps,
            detector_sigma,
            unseen_letters,
            seed,
        ),
        Cmd::Verify { battery } => cmd_verify(&battery),
        Cmd::RenderAffordance {
            program,
            glyph,
            color,
            bowl,
            out,
        } => cmd_render(&program, &glyph, &color, bowl, &out),
    }
}

fn cmd_train(config: &std::path::Path, seed_offset: u64) -> anyhow::Result<()> {
    let mut cfg = RunConfig::from_path(config)?;
    if seed_offset != 0 {
        cfg.seeds = cfg.seeds.iter().map(|s| s + seed_offset).collect();
    }
    let results = train_all_seeds(&cfg)?;
    for r in &results {
        match &r.aborted {
            Some(reason) => println!("seed {}: ABORTED ({reason})", r.seed),
            None => println!(
                "seed {}: final success {:.3}, final return {:.3}",
                r.seed,
                r.final_success(),
                r.final_return()
            ),
        }
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn parse_conditions(s: &str) -> anyhow::Result<Vec<OverlapMode>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        out.push(match tok {
            "no" => OverlapMode::NonOverlap,
            "ao" => OverlapMode::ArbitraryOverlap,
            other => bail!("unknown condition {other:?} (expected no/ao)"),
        });
    }
    if out.is_empty() {
        bail!("no conditions given");
    }
    Ok(out)
}

fn parse_unseen(s: Option<&str>) -> anyhow::Result<Vec<Option<UnseenKind>>> {
    let mut kinds = vec![None];
    if let Some(s) = s {
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            kinds.push(match tok {
                "colors" => Some(UnseenKind::Colors),
                "letters" => Some(UnseenKind::Letters),
                other => bail!("unknown unseen kind {other:?} (expected colors/letters)"),
            });
        }
    }
    Ok(kinds)
}

fn eval_base(config: Option<&std::path::Path>) -> anyhow::Result<(TaskSpec, EpisodeConfig)> {
    match config {
        Some(p) => {
            let cfg = RunConfig::from_path(p)?;
            Ok((cfg.task, cfg.episode))
        }
        None => Ok((
            TaskSpec::Sh {
                pick_letter: Glyph::V,
                place_color: ColorId::Red,
                max_steps: 10,
            },
            EpisodeConfig::default(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    checkpoint: Option<&std::path::Path>,
    conditions: &str,
    unseen: Option<&str>,
    config: Option<&std::path::Path>,
    detector_sigma: f64,
    episodes: usize,
    seed: u64,
    oracle: bool,
    out: Option<&std::path::Path>,
) -> anyhow::Result<()> {
    let overlaps = parse_conditions(conditions)?;
    let unseen_kinds = parse_unseen(unseen)?;
    let (task, episode) = eval_base(config)?;
    let detector = DetectorConfig {
        sigma: detector_sigma,
        ..DetectorConfig::default()
    };

    let programs = ProgramSet::reference();
    let loaded = match (oracle, checkpoint) {
        (true, _) => None,
        (false, Some(p)) => Some(read_checkpoint(p).with_context(|| format!("loading {p:?}"))?),
        (false, None) => bail!("--checkpoint or --oracle is required"),
    };
    let actor = match &loaded {
        None => EvalActor::Scripted(&programs),
        Some((agent, _)) => EvalActor::Trained(agent),
    };

    let reports = eval_grid(
        &actor,
        &task,
        &episode,
        &overlaps,
        &unseen_kinds,
        episodes,
        detector,
        seed,
    )?;
    print_reports(&reports);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&reports)?)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn print_reports(reports: &[ConditionReport]) {
    println!(
        "{:<8} {:<16} {:>9} {:>11} {:>9} {:>12}",
        "overlap", "objects", "success", "low_level", "other", "mean_return"
    );
    for r in reports {
        println!(
            "{:<8} {:<16} {:>9.3} {:>11.3} {:>9.3} {:>12.3}",
            r.overlap,
            r.objects,
            r.stats.success_rate,
            r.stats.low_level_error_rate,
            r.stats.other_failure_rate,
            r.stats.mean_return
        );
    }
}

fn cmd_ablate(config: &std::path::Path, epsilons: Option<&str>) -> anyhow::Result<()> {
    let cfg = RunConfig::from_path(config)?;
    let grid: Vec<f64> = match epsilons {
        None => DEFAULT_EPSILONS.to_vec(),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("bad epsilon {t:?}")))
            .collect::<Result<_, _>>()?,
    };
    let (_, summary) = run_ablation(&cfg, &grid)?;
    println!(
        "{:>8} {:>8} {:>14} {:>13} {:>13}",
        "epsilon", "n_seeds", "mean_success", "std_success", "mean_return"
    );
    for row in &summary {
        println!(
            "{:>8.2} {:>8} {:>14.3} {:>13.3} {:>13.3}",
            row.epsilon,
            row.n_seeds,
            row.mean_final_success,
            row.std_final_success,
            row.mean_final_return
        );
    }
    println!(
        "summary written to {}",
        cfg.output_dir.join("ablation_summary.csv").display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_lh_compose(
    checkpoint: Option<&std::path::Path>,
    oracle: bool,
    uniform_residual: bool,
    episodes: usize,
    per_command_steps: u32,
    detector_sigma: f64,
    unseen_letters: bool,
    seed: u64,
) -> anyhow::Result<()> {
    if oracle && uniform_residual {
        bail!("--oracle and --uniform-residual are mutually exclusive");
    }
    let mut episode = EpisodeConfig::default();
    if unseen_letters {
        episode.letter_set = vec![Glyph::C, Glyph::M, Glyph::V];
    }
    let detector = DetectorConfig {
        sigma: detector_sigma,
        ..DetectorConfig::default()
    };

    let programs = ProgramSet::reference();
    let loaded = match (oracle || uniform_residual, checkpoint) {
        (true, _) => None,
        (false, Some(p)) => Some(read_checkpoint(p).with_context(|| format!("loading {p:?}"))?),
        (false, None) => bail!("--checkpoint, --oracle, or --uniform-residual is required"),
    };
    let actor = if oracle {
        EvalActor::Scripted(&programs)
    } else if uniform_residual {
        EvalActor::ScriptedUniformResidual
    } else {
        EvalActor::Trained(&loaded.as_ref().unwrap().0)
    };

    let stats = run_compose_suite(
        &actor,
        &episode,
        episodes,
        per_command_steps,
        &detector,
        seed,
    )?;
    println!(
        "decomposed success rate: {:.3} over {} episodes",
        stats.success_rate, stats.episodes
    );
    if let Some(first) = stats.outcomes.first() {
        println!("example command sequence:");
        for c in &first.commands {
            println!("  {c}");
        }
    }
    Ok(())
}

fn cmd_verify(battery: &str) -> anyhow::Result<()> {
    let Some(results) = run_battery(battery) else {
        eprintln!(
            "unknown battery {battery:?}; expected one of {} or all",
            BATTERIES.join(", ")
        );
        std::process::exit(2);
    };
    let ok = report(&results, |line| println!("{line}"));
    if !ok {
        std::process::exit(1);
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

fn cmd_render(
    program: &std::path::Path,
    glyph: &str,
    color: &str,
    bowl: bool,
    out: &std::path::Path,
) -> anyhow::Result<()> {
    let glyph_char = glyph
        .chars()
        .next()
        .and_then(Glyph::from_char)
        .with_context(|| format!("unknown glyph {glyph:?} (expected one of V O T C M)"))?;
    let color_id = ColorId::from_name(color)
        .with_context(|| format!("unknown color {color:?}"))?;
    let kind = if bowl {
        ObjectKind::Bowl
    } else {
        ObjectKind::Letter
    };
    let map = render_affordance(program, kind, glyph_char, color_id, out)?;
    println!(
        "wrote {} ({}x{}, peak cell {:.4})",
        out.display(),
        map.side(),
        map.side(),
        (0..map.side())
            .flat_map(|r| (0..map.side()).map(move |c| (r, c)))
            .map(|(r, c)| map.at(r, c))
            .fold(0.0f64, f64::max)
    );
    Ok(())
}
