//! Surrogate-share sweep: train the configured seeds at each epsilon and
//! summarize final evaluation success per setting.

use std::path::Path;

use tabrl_core::explore::EpsilonSchedule;

use crate::config::RunConfig;
use crate::trainer::{train_all_seeds, SeedRunResult};

/// Default sweep grid.
pub const DEFAULT_EPSILONS: [f64; 7] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];

/// Summary of one epsilon setting over its seeds.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub epsilon: f64,
    pub n_seeds: usize,
    pub mean_final_success: f64,
    pub std_final_success: f64,
    pub mean_final_return: f64,
    pub per_seed_success: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Directory for one epsilon setting inside the sweep output.
pub fn epsilon_dir(base: &Path, epsilon: f64) -> std::path::PathBuf {
    base.join(format!("eps_{epsilon}"))
}

fn summarize(epsilon: f64, results: &[SeedRunResult]) -> AblationRow {
    let success: Vec<f64> = results.iter().map(|r| r.final_success()).collect();
    let returns: Vec<f64> = results.iter().map(|r| r.final_return()).collect();
    let (mean_s, std_s) = mean_std(&success);
    let (mean_r, _) = mean_std(&returns);
    AblationRow {
        epsilon,
        n_seeds: results.len(),
        mean_final_success: mean_s,
        std_final_success: std_s,
        mean_final_return: mean_r,
        per_seed_success: success,
    }
}

/// Run the sweep. Each epsilon trains all configured seeds into its own
/// subdirectory; the summary CSV has one row per epsilon.
pub fn run_ablation(
    base: &RunConfig,
    epsilons: &[f64],
) -> anyhow::Result<(Vec<Vec<SeedRunResult>>, Vec<AblationRow>)> {
    assert!(!epsilons.is_empty(), "empty epsilon grid");
    let mut all_results = Vec::with_capacity(epsilons.len());
    let mut summary = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut cfg = base.clone();
        cfg.explore.epsilon = eps;
        cfg.explore.schedule = EpsilonSchedule::Constant;
        cfg.output_dir = epsilon_dir(&base.output_dir, eps);
        cfg.validate()
            .map_err(|e| anyhow::anyhow!("epsilon {eps}: {e}"))?;
        log::info!("ablation: epsilon {eps}");
        let results = train_all_seeds(&cfg)?;
        summary.push(summarize(eps, &results));
        all_results.push(results);
    }
    write_summary(&base.output_dir.join("ablation_summary.csv"), &summary)?;
    Ok((all_results, summary))
}

/// One row per epsilon; per-seed outcomes are kept in the per-run metrics.
pub fn write_summary(path: &Path, rows: &[AblationRow]) -> std::io::Result<()> {
    let mut text = String::from(
        "epsilon,n_seeds,mean_final_success,std_final_success,mean_final_return\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{:.6},{},{:.6},{:.6},{:.6}\n",
            r.epsilon, r.n_seeds, r.mean_final_success, r.std_final_success, r.mean_final_return
        ));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}
