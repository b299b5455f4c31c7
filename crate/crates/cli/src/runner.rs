//! Command implementations. Every command is self-contained: it builds (or
//! loads) its data and model from the config, computes, and writes artifacts
//! atomically into the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use influence_core::attack::{
    evaluate_attack, multi_target_attack, scaling_attack, single_target_attack,
};
use influence_core::data::{
    load_dataset, load_model, save_dataset, save_model, split_halves_stratified,
    synth_biased_groups, synth_blobs, write_atomic,
};
use influence_core::fairness::fairness_attack_eval;
use influence_core::glm::{self, accuracy, train_erm, Dataset, GlmModel};
use influence_core::influence::{influence_set, rank};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DataSource, ExperimentConfig};
use crate::report::{
    AttackRow, AttackSummary, FairnessReportRow, InfluenceReportBody, MultiRow, Report,
    ReportBody, ScaleRow, Timings, TrainReportBody,
};
use crate::CliError;

pub struct Environment {
    pub train: Dataset,
    pub test: Dataset,
    pub pristine: Dataset,
    pub model: GlmModel,
    pub trained: Option<glm::TrainReport>,
}

fn build_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset), CliError> {
    let d = &cfg.data;
    match d.source {
        DataSource::Blobs => {
            let all = synth_blobs(d.n, d.d, d.num_classes, d.separation, d.generator_seed)?;
            let (train, rest) = split_halves_stratified(&all, d.split_seed)?;
            let (test, pristine) = split_halves_stratified(&rest, d.split_seed + 1)?;
            Ok((train, test, pristine))
        }
        DataSource::BiasedGroups => {
            let all = synth_biased_groups(d.n, d.d, d.base_rate_gap, d.generator_seed)?;
            let (train, rest) = split_halves_stratified(&all, d.split_seed)?;
            let (test, pristine) = split_halves_stratified(&rest, d.split_seed + 1)?;
            Ok((train, test, pristine))
        }
        DataSource::Csv => {
            let train = load_dataset(d.train_path.as_ref().expect("validated"))?;
            let shared = load_dataset(d.test_path.as_ref().expect("validated"))?;
            match &d.pristine_path {
                Some(p) => Ok((train, shared, load_dataset(p)?)),
                None => {
                    let (test, pristine) = split_halves_stratified(&shared, d.split_seed)?;
                    Ok((train, test, pristine))
                }
            }
        }
    }
}

pub fn build_environment(cfg: &ExperimentConfig) -> Result<Environment, CliError> {
    let (train, test, pristine) = build_data(cfg)?;
    let (model, trained) = match &cfg.data.model_path {
        Some(path) => (load_model(path)?, None),
        None => {
            let spec = cfg.loss_spec()?;
            let report = train_erm(&train, &spec, &cfg.train_config())?;
            if !report.converged {
                return Err(CliError::Numerical(format!(
                    "training did not converge: gradient norm {:.3e} after {} iterations",
                    report.final_grad_norm, report.iterations
                )));
            }
            (report.model.clone(), Some(report))
        }
    };
    Ok(Environment {
        train,
        test,
        pristine,
        model,
        trained,
    })
}

fn ensure_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create output dir {}: {e}", out.display())))
}

fn pick_targets(
    cfg: &ExperimentConfig,
    env: &Environment,
    count: usize,
) -> Result<Vec<usize>, CliError> {
    let n = env.train.len();
    if count > n {
        return Err(CliError::Config(format!(
            "num_targets {count} exceeds training set size {n}"
        )));
    }
    let excluded = if cfg.attack.exclude_top_k_targets {
        let scores = influence_set(&env.model, &env.train, &env.test, &cfg.ihvp())?;
        let ranking = rank(&scores)?;
        Some(ranking)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.attack.target_seed);
    let mut targets = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while targets.len() < count {
        attempts += 1;
        if attempts > 1000 * count {
            return Err(CliError::Config(
                "cannot find enough targets outside the top-k".into(),
            ));
        }
        let t = rng.random_range(0..n);
        if targets.contains(&t) {
            continue;
        }
        if let Some(ranking) = &excluded {
            if ranking.rank_of[t] <= cfg.attack.k {
                continue;
            }
        }
        targets.push(t);
    }
    Ok(targets)
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let env = build_environment(cfg)?;
    save_model(&env.model, &out.join("model.json"))?;
    save_dataset(&env.train, &out.join("train.csv"))?;
    save_dataset(&env.test, &out.join("test.csv"))?;
    save_dataset(&env.pristine, &out.join("pristine.csv"))?;
    let body = TrainReportBody {
        converged: env.trained.as_ref().is_none_or(|t| t.converged),
        iterations: env.trained.as_ref().map_or(0, |t| t.iterations),
        final_grad_norm: env.trained.as_ref().map_or(0.0, |t| t.final_grad_norm),
        train_accuracy: accuracy(&env.model, &env.train)?,
        test_accuracy: accuracy(&env.model, &env.test)?,
        pristine_accuracy: accuracy(&env.model, &env.pristine)?,
        num_params: env.model.num_params(),
    };
    let report = Report {
        seed: cfg.seed,
        body: ReportBody::Train(body),
    };
    let path = out.join("report.json");
    report.save(&path)?;
    Timings {
        command: "train".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: vec![],
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

pub fn cmd_influence(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let env = build_environment(cfg)?;
    let scores = influence_set(&env.model, &env.train, &env.test, &cfg.ihvp())?;
    let ranking = rank(&scores)?;
    let report = Report {
        seed: cfg.seed,
        body: ReportBody::Influence(InfluenceReportBody {
            scores: scores.scores.clone(),
            order: ranking.order,
        }),
    };
    let path = out.join("scores.json");
    report.save(&path)?;
    Timings {
        command: "influence".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: vec![],
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

pub fn cmd_attack_target(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let env = build_environment(cfg)?;
    let targets = pick_targets(cfg, &env, cfg.attack.num_targets)?;

    // sweep cells: (C, target), run in a worker pool, assembled in cell order
    let cells: Vec<(usize, usize)> = (0..cfg.attack.c_grid.len())
        .flat_map(|ci| (0..targets.len()).map(move |ti| (ci, ti)))
        .collect();
    let outcomes: Vec<Result<(AttackRow, f64), CliError>> = cells
        .par_iter()
        .map(|&(ci, ti)| {
            let cell_start = Instant::now();
            let c = cfg.attack.c_grid[ci];
            let target = targets[ti];
            let attack_cfg = cfg.attack_config(c);
            let result =
                single_target_attack(&env.train, &env.test, &env.model, target, &attack_cfg)?;
            let eval = evaluate_attack(
                &result.theta_prime,
                &env.model,
                &env.train,
                &env.test,
                &env.pristine,
                &[target],
                cfg.attack.k,
                cfg.attack.acc_budget,
                &cfg.ihvp(),
            )?;
            let row = AttackRow {
                seed: cfg.seed,
                c,
                k: cfg.attack.k,
                target,
                initial_rank: result.initial_rank,
                final_rank: result.final_rank,
                success: result.success,
                success_budget: result.success
                    && eval.delta_acc_pristine <= cfg.attack.acc_budget,
                delta_acc_test: result.delta_acc,
                delta_acc_pristine: eval.delta_acc_pristine,
                transfer_rank: eval.transfer_ranks[0],
                influence_grad_norm: eval.influence_grad_norms[0],
                chosen_init: result.chosen_init,
                chosen_lr: result.chosen_lr,
            };
            Ok((row, cell_start.elapsed().as_secs_f64()))
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    let mut cell_times = Vec::with_capacity(cells.len());
    for outcome in outcomes {
        let (row, secs) = outcome?;
        cell_times.push((format!("c={},target={}", row.c, row.target), secs));
        rows.push(row);
    }

    let summary: Vec<AttackSummary> = cfg
        .attack
        .c_grid
        .iter()
        .map(|&c| {
            let group: Vec<&AttackRow> = rows.iter().filter(|r| r.c == c).collect();
            let n = group.len().max(1) as f64;
            AttackSummary {
                c,
                k: cfg.attack.k,
                success_rate: group.iter().filter(|r| r.success).count() as f64 / n,
                success_rate_budget: group.iter().filter(|r| r.success_budget).count() as f64 / n,
                transfer_success_rate: group
                    .iter()
                    .filter(|r| r.transfer_rank <= cfg.attack.k)
                    .count() as f64
                    / n,
                mean_delta_acc_pristine: group.iter().map(|r| r.delta_acc_pristine).sum::<f64>()
                    / n,
            }
        })
        .collect();

    let report = Report {
        seed: cfg.seed,
        body: ReportBody::AttackTarget {
            acc_budget: cfg.attack.acc_budget,
            rows,
            summary,
        },
    };
    let path = out.join("report.json");
    report.save(&path)?;
    Timings {
        command: "attack-target".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: cell_times,
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

pub fn cmd_attack_multi(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let env = build_environment(cfg)?;
    let max_size = *cfg.attack.target_sizes.iter().max().unwrap_or(&0);
    let pool = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.attack.target_seed);
        let mut pool = Vec::with_capacity(max_size);
        while pool.len() < max_size.min(env.train.len()) {
            let t = rng.random_range(0..env.train.len());
            if !pool.contains(&t) {
                pool.push(t);
            }
        }
        pool
    };

    let cells: Vec<(usize, usize)> = (0..cfg.attack.c_grid.len())
        .flat_map(|ci| (0..cfg.attack.target_sizes.len()).map(move |si| (ci, si)))
        .collect();
    let outcomes: Vec<Result<(MultiRow, f64), CliError>> = cells
        .par_iter()
        .map(|&(ci, si)| {
            let cell_start = Instant::now();
            let c = cfg.attack.c_grid[ci];
            let size = cfg.attack.target_sizes[si].min(pool.len());
            let targets: Vec<usize> = pool[..size].to_vec();
            let attack_cfg = cfg.attack_config(c);
            let result =
                multi_target_attack(&env.train, &env.test, &env.model, &targets, &attack_cfg)?;
            let eval = evaluate_attack(
                &result.theta_prime,
                &env.model,
                &env.train,
                &env.test,
                &env.pristine,
                &targets,
                cfg.attack.k,
                cfg.attack.acc_budget,
                &cfg.ihvp(),
            )?;
            let hits = result.per_target.iter().filter(|t| t.success).count();
            let row = MultiRow {
                seed: cfg.seed,
                c,
                k: cfg.attack.k,
                size,
                hits,
                success_rate: result.success_rate,
                success_rate_budget: eval.success_rate_within_budget,
                delta_acc_pristine: eval.delta_acc_pristine,
            };
            Ok((row, cell_start.elapsed().as_secs_f64()))
        })
        .collect();

    let mut rows = Vec::new();
    let mut cell_times = Vec::new();
    for outcome in outcomes {
        let (row, secs) = outcome?;
        cell_times.push((format!("c={},size={}", row.c, row.size), secs));
        rows.push(row);
    }

    let report = Report {
        seed: cfg.seed,
        body: ReportBody::AttackMulti {
            acc_budget: cfg.attack.acc_budget,
            rows,
        },
    };
    let path = out.join("report.json");
    report.save(&path)?;
    Timings {
        command: "attack-multi".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: cell_times,
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

pub fn cmd_attack_scale(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let env = build_environment(cfg)?;
    let base_preds = glm::predictions(&env.model, &env.test)?;
    let base_scores = influence_set(&env.model, &env.train, &env.test, &cfg.ihvp())?;
    let base_ranking = rank(&base_scores)?;

    let mut rows = Vec::new();
    for &lambda in &cfg.attack.scale_lambdas {
        let scaled = scaling_attack(&env.model, lambda)?;
        let preds = glm::predictions(&scaled, &env.test)?;
        let scores = influence_set(&scaled, &env.train, &env.test, &cfg.ihvp())?;
        let ranking = rank(&scores)?;
        let mut total_shift = 0usize;
        let mut max_shift = 0usize;
        for i in 0..env.train.len() {
            let shift = ranking.rank_of[i].abs_diff(base_ranking.rank_of[i]);
            total_shift += shift;
            max_shift = max_shift.max(shift);
        }
        rows.push(ScaleRow {
            lambda,
            accuracy: accuracy(&scaled, &env.test)?,
            predictions_identical: preds == base_preds,
            mean_abs_rank_shift: total_shift as f64 / env.train.len().max(1) as f64,
            max_abs_rank_shift: max_shift,
        });
    }

    let report = Report {
        seed: cfg.seed,
        body: ReportBody::AttackScale { rows },
    };
    let path = out.join("report.json");
    report.save(&path)?;
    Timings {
        command: "attack-scale".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: vec![],
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

pub fn cmd_fairness(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    ensure_out(out)?;
    let (train, val, pristine) = build_data(cfg)?;
    for (name, data) in [("train", &train), ("validation", &val), ("pristine", &pristine)] {
        if data.groups().is_none() {
            return Err(CliError::Data(format!(
                "fairness requires a group attribute; the {name} set has none"
            )));
        }
    }
    let fairness_cfg = cfg.fairness_config();
    // the fairness base model carries the section's own regularization
    let mut train_cfg = cfg.train_config();
    train_cfg.has_bias = cfg.model.has_bias;
    let eval = fairness_attack_eval(
        &train,
        &val,
        &pristine,
        &cfg.fairness.lambda_grid,
        &fairness_cfg,
        &train_cfg,
    )?;
    let rows: Vec<FairnessReportRow> = eval
        .rows
        .iter()
        .map(|r| FairnessReportRow {
            lambda: r.lambda,
            dp_gap: r.downstream.as_ref().map(|d| d.dp_gap),
            accuracy: r.downstream.as_ref().map(|d| d.accuracy),
            lp_objective: r.lp_objective,
            base_soft_dp: if r.base_soft_dp.is_finite() {
                Some(r.base_soft_dp)
            } else {
                None
            },
            success: r.success,
            error: r.error.clone(),
        })
        .collect();
    let report = Report {
        seed: cfg.seed,
        body: ReportBody::Fairness {
            baseline_dp_gap: eval.baseline_dp_gap,
            baseline_accuracy: eval.baseline_accuracy,
            acc_budget: cfg.fairness.acc_budget,
            rows,
        },
    };
    let path = out.join("report.json");
    report.save(&path)?;
    Timings {
        command: "fairness".into(),
        total_seconds: started.elapsed().as_secs_f64(),
        cells: vec![],
    }
    .save(&out.join("timings.json"))?;
    Ok(path)
}

/// Aggregates reports into plot-ready CSVs: `(c, success_rate, delta_acc)`
/// curves from attack sweeps and `(lambda, dp_gap, accuracy)` curves from
/// fairness sweeps. Reports are self-consistency-checked on load.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    ensure_out(out)?;
    let mut attack_lines = vec!["c,success_rate,delta_acc".to_string()];
    let mut fairness_lines = vec!["lambda,dp_gap,accuracy".to_string()];
    for path in inputs {
        let report = Report::load(path)?;
        match &report.body {
            ReportBody::AttackTarget { summary, .. } => {
                for s in summary {
                    attack_lines.push(format!(
                        "{},{},{}",
                        s.c, s.success_rate, s.mean_delta_acc_pristine
                    ));
                }
            }
            ReportBody::AttackMulti { rows, .. } => {
                for r in rows {
                    attack_lines.push(format!(
                        "{},{},{}",
                        r.c, r.success_rate, r.delta_acc_pristine
                    ));
                }
            }
            ReportBody::Fairness { rows, .. } => {
                for r in rows {
                    if let (Some(gap), Some(acc)) = (r.dp_gap, r.accuracy) {
                        fairness_lines.push(format!("{},{},{}", r.lambda, gap, acc));
                    }
                }
            }
            _ => {}
        }
    }
    if attack_lines.len() > 1 {
        write_atomic(
            &out.join("attack_curve.csv"),
            (attack_lines.join("\n") + "\n").as_bytes(),
        )?;
    }
    if fairness_lines.len() > 1 {
        write_atomic(
            &out.join("fairness_curve.csv"),
            (fairness_lines.join("\n") + "\n").as_bytes(),
        )?;
    }
    Ok(())
}
