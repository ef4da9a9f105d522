//! Training loop. Seeds run independently: every random stream, episode
//! seed, and evaluation suite derives from the run seed alone, so deleting
//! one seed's outputs and re-running reproduces them byte for byte while
//! other seeds stay untouched.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tabrl_core::agent::{
    build_observation, write_checkpoint, ActionCodec, CompactObs, ReplayBuffer, ReplayTransition,
    SacAgent,
};
use tabrl_core::explore::{select_action, ActionSource};
use tabrl_core::rng::{derive_seed, stream};
use tabrl_core::sim::{check_success, Env};
use tabrl_core::surrogate::{
    compose, detect_objects, high_level_policy, low_level_policy, CommandVector, DetectorConfig,
    ProgramSet,
};
use tabrl_core::TaskSpec;

use crate::config::RunConfig;
use crate::evaluator::{run_eval, EvalActor, EvalProtocol};
use crate::metrics::{aggregate_file, seed_file, write_csv, MetricsRow};

/// Everything one seed produced.
#[derive(Debug)]
pub struct SeedRunResult {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub checkpoint_path: PathBuf,
    /// Present when the run stopped early on a non-finite loss; the last
    /// metrics row is then a diagnostic row with NaN evaluation columns.
    pub aborted: Option<String>,
}

impl SeedRunResult {
    /// Success rate at the last completed evaluation boundary.
    pub fn final_success(&self) -> f64 {
        self.rows
            .last()
            .map(|r| r.eval_success_rate)
            .unwrap_or(f64::NAN)
    }

    pub fn final_return(&self) -> f64 {
        self.rows
            .last()
            .map(|r| r.mean_eval_return)
            .unwrap_or(f64::NAN)
    }
}

fn command_for(task: &TaskSpec) -> CommandVector {
    match *task {
        TaskSpec::Sh {
            pick_letter,
            place_color,
            ..
        } => CommandVector::sh(pick_letter, place_color),
        TaskSpec::Lh { .. } => CommandVector::lh(),
    }
}

fn uniform_action(rng: &mut ChaCha8Rng) -> [f64; 4] {
    std::array::from_fn(|_| rng.gen_range(-1.0..=1.0))
}

/// Train one seed to completion and write its metrics CSV and final
/// checkpoint under the config's output directory.
pub fn train_one_seed(cfg: &RunConfig, seed: u64) -> anyhow::Result<SeedRunResult> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {:?}", cfg.output_dir))?;

    let mut agent = SacAgent::new(cfg.sac, seed);
    let mut buffer = ReplayBuffer::new(cfg.sac.buffer_capacity);
    let programs = ProgramSet::reference();
    let command = command_for(&cfg.task);
    let detector = DetectorConfig::default();

    let mut explore_rng = stream(seed, "train-explore", 0);
    let mut act_rng = stream(seed, "train-act", 0);
    let mut detect_rng = stream(seed, "train-detect", 0);
    let mut update_rng = stream(seed, "train-update", 0);
    let mut surrogate_rng = stream(seed, "train-surrogate", 0);

    // The evaluation suite is fixed for the whole run: same scenes, same
    // detector noise at every boundary, so curves measure policy change.
    let eval_proto = EvalProtocol::for_task(
        &cfg.task,
        &cfg.episode,
        cfg.eval_episodes,
        detector,
        derive_seed(seed, "eval-suite", 0),
    );

    let metrics_path = seed_file(&cfg.output_dir, seed);
    let checkpoint_path = cfg.output_dir.join(format!("checkpoint_seed_{seed}.json"));
    let started = Instant::now();
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut llm_in_window = 0u64;
    let mut window_steps = 0u64;
    let mut global_step = 0u64;
    let mut episode_index = 0u64;
    let mut aborted: Option<String> = None;

    'run: while global_step < cfg.total_steps {
        let ep = tabrl_core::EpisodeConfig {
            seed: derive_seed(seed, "train-scene", episode_index),
            ..cfg.episode.clone()
        };
        episode_index += 1;
        let (mut env, _) = Env::reset(cfg.task, ep)?;
        let mut det = detect_objects(&env.scene, &detector, &mut detect_rng);
        let mut obs = build_observation(&det, &command);
        let codec = ActionCodec::new(det.len());

        while !env.done && global_step < cfg.total_steps {
            let (u, source) = select_action(
                &cfg.explore,
                global_step,
                &mut explore_rng,
                || {
                    let g = (
                        env.scene.gripper_pos.0 as f64,
                        env.scene.gripper_pos.1 as f64,
                    );
                    let choice = high_level_policy(&det, g, &command).ok()?;
                    let structured =
                        low_level_policy(&det, choice, &programs, &mut surrogate_rng).ok()?;
                    Some(codec.encode_action(&structured))
                },
                || {
                    if (global_step as usize) < cfg.sac.warm_start_steps {
                        uniform_action(&mut act_rng)
                    } else {
                        agent.act(&obs, false, &mut act_rng)
                    }
                },
            );
            if source == ActionSource::Llm {
                llm_in_window += 1;
            }
            window_steps += 1;

            let executed = compose(&codec.decode(&u), &det);
            let out = env.step(executed);
            let next_det = detect_objects(&env.scene, &detector, &mut detect_rng);
            let next_obs = build_observation(&next_det, &command);
            let terminal = out.done && check_success(&env.scene, &env.task);
            buffer.push(ReplayTransition {
                obs: CompactObs::from_obs(&obs),
                action: u,
                reward: out.reward.total,
                next_obs: CompactObs::from_obs(&next_obs),
                terminal,
                source,
            });
            det = next_det;
            obs = next_obs;
            global_step += 1;

            if global_step as usize > cfg.sac.warm_start_steps
                && buffer.len() >= cfg.sac.batch_size
                && global_step % cfg.sac.update_every as u64 == 0
            {
                let batch = buffer.sample(cfg.sac.batch_size, &mut update_rng);
                let stats = agent.update(&batch, &mut update_rng);
                if !stats.critic_loss.is_finite() || !stats.actor_loss.is_finite() {
                    let reason = format!(
                        "non-finite loss at step {global_step}: critic {} actor {}",
                        stats.critic_loss, stats.actor_loss
                    );
                    rows.push(diagnostic_row(cfg, seed, global_step, &reason, {
                        if cfg.record_wall_clock {
                            started.elapsed().as_secs_f64()
                        } else {
                            0.0
                        }
                    }));
                    write_csv(&metrics_path, &rows)?;
                    aborted = Some(reason);
                    break 'run;
                }
            }

            if global_step % cfg.eval_every == 0 {
                let stats = run_eval(&EvalActor::Trained(&agent), &eval_proto)?;
                rows.push(MetricsRow {
                    step: global_step,
                    seed,
                    epsilon: cfg.explore.effective_epsilon(global_step),
                    mean_eval_return: stats.mean_return,
                    eval_success_rate: stats.success_rate,
                    low_level_error_rate: stats.low_level_error_rate,
                    llm_action_fraction: if window_steps == 0 {
                        0.0
                    } else {
                        llm_in_window as f64 / window_steps as f64
                    },
                    wall_clock_s: if cfg.record_wall_clock {
                        started.elapsed().as_secs_f64()
                    } else {
                        0.0
                    },
                });
                write_csv(&metrics_path, &rows)?;
                llm_in_window = 0;
                window_steps = 0;
            }
        }
    }

    write_checkpoint(&checkpoint_path, &agent, global_step)
        .with_context(|| format!("writing {checkpoint_path:?}"))?;

    Ok(SeedRunResult {
        seed,
        rows,
        checkpoint_path,
        aborted,
    })
}

fn diagnostic_row(
    cfg: &RunConfig,
    seed: u64,
    step: u64,
    reason: &str,
    wall_clock_s: f64,
) -> MetricsRow {
    log::error!("seed {seed} aborted: {reason}");
    MetricsRow {
        step,
        seed,
        epsilon: cfg.explore.effective_epsilon(step),
        mean_eval_return: f64::NAN,
        eval_success_rate: f64::NAN,
        low_level_error_rate: f64::NAN,
        llm_action_fraction: f64::NAN,
        wall_clock_s,
    }
}

/// Train every configured seed sequentially and write the aggregate CSV.
pub fn train_all_seeds(cfg: &RunConfig) -> anyhow::Result<Vec<SeedRunResult>> {
    let mut results = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        log::info!("training seed {seed}");
        results.push(train_one_seed(cfg, seed)?);
    }
    let all_rows: Vec<MetricsRow> = results
        .iter()
        .flat_map(|r| r.rows.iter().cloned())
        .collect();
    write_csv(&aggregate_file(&cfg.output_dir), &all_rows)?;
    Ok(results)
}
