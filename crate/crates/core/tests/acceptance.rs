//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values. Trend criteria pin their exact measured counts as
//! regression locks; everything is deterministic under the seeds fixed here.

use influence_core::attack::{
    multi_target_attack, single_target_attack, AttackConfig,
};
use influence_core::check::{dense_hessian, dense_solve, fd_grad, max_rel_err};
use influence_core::data::{impossibility_dataset, split_halves_stratified, synth_biased_groups, synth_blobs};
use influence_core::fairness::{fairness_attack_eval, solve_reweigh_advanced, solve_reweigh_basic, FairnessConfig};
use influence_core::glm::{
    self, accuracy, predictions, train_erm, Dataset, GlmModel, LossSpec, TrainConfig,
};
use influence_core::influence::{self, influence_set, rank_of, IhvpConfig};
use influence_core::objectives::{self, ObjectiveVariant};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    num_classes: usize,
    has_bias: bool,
    weighted: bool,
) -> (GlmModel, Dataset) {
    let feats = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
    let labels = (0..n).map(|_| rng.random_range(0..num_classes)).collect();
    let mut data = Dataset::with_num_classes(feats, labels, num_classes).unwrap();
    if weighted {
        let w = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
        data = data.with_sample_weights(w).unwrap();
    }
    let p = GlmModel::param_len(num_classes, d, has_bias).unwrap();
    let theta = Array1::from_shape_fn(p, |_| rng.random::<f64>() - 0.5);
    let model = GlmModel::from_theta(theta, num_classes, d, has_bias).unwrap();
    (model, data)
}

/// The shared blobs harness of the attack criteria: 300 train / 150 test /
/// 150 pristine samples with common class centers, plus the trained model.
fn blobs_harness() -> (Dataset, Dataset, Dataset, GlmModel) {
    let blobs = synth_blobs(600, 8, 2, 2.0, 0).unwrap();
    let (train, rest) = split_halves_stratified(&blobs, 1).unwrap();
    let (test, pristine) = split_halves_stratified(&rest, 2).unwrap();
    let report = train_erm(
        &train,
        &LossSpec::damped(0.01).unwrap(),
        &TrainConfig {
            grad_tol: 1e-7,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(report.converged);
    (train, test, pristine, report.model)
}

fn pick_targets(
    rng: &mut ChaCha8Rng,
    n: usize,
    count: usize,
    exclude_top_k: Option<(&influence_core::influence::Ranking, usize)>,
) -> Vec<usize> {
    let mut targets = Vec::with_capacity(count);
    while targets.len() < count {
        let t = rng.random_range(0..n);
        if targets.contains(&t) {
            continue;
        }
        if let Some((ranking, k)) = exclude_top_k {
            if ranking.rank_of[t] <= k {
                continue;
            }
        }
        targets.push(t);
    }
    targets
}

#[test]
fn c01_derivative_correctness() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_grad = 0.0f64;
    let mut worst_hvp = 0.0f64;
    let mut worst_third = 0.0f64;

    for trial in 0..20 {
        let c = [2, 3, 4][trial % 3];
        let n = 20 + (trial * 9) % 181; // up to 200
        let d = 2 + (trial * 7) % 19; // up to 20
        let has_bias = trial % 2 == 0;
        let weighted = trial % 5 == 0;
        let (model, data) = random_instance(&mut rng, n, d, c, has_bias, weighted);
        let spec = LossSpec::new(if trial % 4 == 0 { 0.05 } else { 0.0 }, trial % 4 == 0).unwrap();

        // gradient vs central finite differences
        let g = glm::grad(&model, &data, &spec).unwrap();
        let g_fd = fd_grad(
            &|theta| {
                let m = model.with_theta(theta.clone()).unwrap();
                glm::loss(&m, &data, &spec).unwrap()
            },
            model.theta(),
            1e-5,
        );
        worst_grad = worst_grad.max(max_rel_err(&g, &g_fd));

        // hvp vs dense Hessian built from per-sample outer products
        let p = model.num_params();
        let v = Array1::from_shape_fn(p, |_| rng.random::<f64>() - 0.5);
        let dense = dense_hessian(&model, &data, spec.l2_damp);
        let fast = glm::hvp(&model, &data, &v, &spec).unwrap();
        worst_hvp = worst_hvp.max(max_rel_err(&fast, &dense.dot(&v)));

        // third contraction vs finite difference of the hvp
        let u1 = Array1::from_shape_fn(p, |_| rng.random::<f64>() - 0.5);
        let u2 = Array1::from_shape_fn(p, |_| rng.random::<f64>() - 0.5);
        let third = glm::third_contract_grad(&model, &data, &u1, &u2, &spec).unwrap();
        let nospec = LossSpec::damped(0.0).unwrap();
        let eps = 1e-5;
        let hp = glm::hvp(
            &model.with_theta(model.theta() + &(eps * &u2)).unwrap(),
            &data,
            &u1,
            &nospec,
        )
        .unwrap();
        let hm = glm::hvp(
            &model.with_theta(model.theta() - &(eps * &u2)).unwrap(),
            &data,
            &u1,
            &nospec,
        )
        .unwrap();
        let fd = (&hp - &hm) / (2.0 * eps);
        worst_third = worst_third.max(max_rel_err(&third, &fd));
    }

    assert!(worst_grad <= 1e-6, "grad vs FD: {worst_grad:.3e}");
    assert!(worst_hvp <= 1e-10, "hvp vs dense: {worst_hvp:.3e}");
    assert!(worst_third <= 1e-4, "third vs FD-of-HVP: {worst_third:.3e}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "suite took {elapsed:?}");
    println!(
        "[acceptance] criterion 1 (derivative correctness): PASS \
         (grad {worst_grad:.2e} <= 1e-6, hvp {worst_hvp:.2e} <= 1e-10, third {worst_third:.2e} <= 1e-4, {elapsed:?})"
    );
}

#[test]
fn c02_ihvp_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst_sol = 0.0f64;
    let mut worst_res = 0.0f64;
    for trial in 0..20 {
        let n = 30 + (trial * 11) % 171;
        let d = 2 + (trial * 5) % 17;
        let (model, data) = random_instance(&mut rng, n, d, 2, true, false);
        let cfg = IhvpConfig {
            damp: 0.05,
            cg_tol: 1e-8,
            cg_max_iter: None,
        };
        let p = model.num_params();
        let v = Array1::from_shape_fn(p, |_| rng.random::<f64>() - 0.5);
        let x = influence::ihvp(&model, &data, &v, &cfg).unwrap();

        let dense = dense_hessian(&model, &data, cfg.damp);
        let x_star = dense_solve(&dense, &v);
        let diff = &x - &x_star;
        worst_sol = worst_sol
            .max(diff.dot(&diff).sqrt() / x_star.dot(&x_star).sqrt().max(1e-12));

        // residual contract, via the matrix-free product
        let spec = LossSpec::damped(cfg.damp).unwrap();
        let r = &v - &glm::hvp(&model, &data, &x, &spec).unwrap();
        worst_res = worst_res.max(r.dot(&r).sqrt() / v.dot(&v).sqrt());
    }
    assert!(worst_sol <= 1e-6, "cg vs dense solve: {worst_sol:.3e}");
    assert!(worst_res <= 1e-8, "residual contract: {worst_res:.3e}");
    println!(
        "[acceptance] criterion 2 (ihvp solver): PASS \
         (solution {worst_sol:.2e} <= 1e-6, residual {worst_res:.2e} <= 1e-8)"
    );
}

#[test]
fn c03_backward_friendly_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let cfg = IhvpConfig {
        damp: 0.1,
        cg_tol: 1e-12,
        cg_max_iter: None,
    };
    let mut worst_value = 0.0f64;
    let mut worst_grad = 0.0f64;
    for trial in 0..10 {
        let n = 20 + 3 * trial;
        let d = 3 + trial % 4;
        let (model, train) = random_instance(&mut rng, n, d, 2, true, false);
        let (_, test) = random_instance(&mut rng, 8, d, 2, true, false);
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();

        let (value, aux) =
            objectives::build_backward_friendly(&model, &train, &test, &u, &cfg).unwrap();
        let scores = influence_set(&model, &train, &test, &cfg).unwrap();
        let forward: f64 = u.iter().zip(&scores.scores).map(|(a, b)| a * b).sum();
        worst_value = worst_value.max((value - forward).abs() / forward.abs().max(1e-9));

        let grad =
            objectives::grad_backward_friendly(&model, &train, &test, &u, &aux).unwrap();
        let g_fd = fd_grad(
            &|theta| {
                let m = model.with_theta(theta.clone()).unwrap();
                let s = influence_set(&m, &train, &test, &cfg).unwrap();
                u.iter().zip(&s.scores).map(|(a, b)| a * b).sum()
            },
            model.theta(),
            1e-4,
        );
        let diff = &grad - &g_fd;
        worst_grad = worst_grad
            .max(diff.dot(&diff).sqrt() / g_fd.dot(&g_fd).sqrt().max(1e-12));
    }
    assert!(worst_value <= 1e-6, "value consistency: {worst_value:.3e}");
    assert!(worst_grad <= 1e-3, "gradient vs forward FD: {worst_grad:.3e}");
    println!(
        "[acceptance] criterion 3 (backward-friendly consistency): PASS \
         (value {worst_value:.2e} <= 1e-6, grad {worst_grad:.2e} <= 1e-3)"
    );
}

#[test]
fn c04_impossibility_suite() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for kdup in [1usize, 3] {
        let setup = impossibility_dataset(6, kdup, 0, false).unwrap();
        for damp in [0.0, 1e-4] {
            let cfg = IhvpConfig {
                damp,
                cg_tol: 1e-10,
                cg_max_iter: None,
            };
            for _ in 0..100 {
                let theta = Array1::from_shape_fn(6, |_| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let model = GlmModel::from_theta(theta, 2, 6, false).unwrap();
                let scores = influence_set(&model, &setup.train, &setup.test, &cfg).unwrap();
                let target_score = scores.scores[setup.target_idx];
                assert!(target_score < 0.0, "target influence must be negative");
                for &b in &setup.bar_indices {
                    assert!(
                        scores.scores[b] > 0.0,
                        "bar-copy influence must be positive"
                    );
                }
                let r = rank_of(&scores, setup.target_idx).unwrap();
                assert!(r > kdup, "rank {r} below the impossibility bound");
            }
        }

        // the attack can never report success on this construction
        let report = train_erm(
            &setup.train,
            &LossSpec::regularized(0.01).unwrap(),
            &TrainConfig {
                has_bias: false,
                grad_tol: 1e-7,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        for seed in 0..10u64 {
            for c in [0.5, 5.0, 50.0] {
                let cfg = AttackConfig {
                    c,
                    k: kdup,
                    seed,
                    ihvp: IhvpConfig::with_damp(1e-4),
                    ..AttackConfig::default()
                };
                let result = single_target_attack(
                    &setup.train,
                    &setup.test,
                    &report.model,
                    setup.target_idx,
                    &cfg,
                )
                .unwrap();
                assert!(
                    !result.success,
                    "impossible target reported success at C={c}, seed={seed}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "suite took {elapsed:?}");
    println!(
        "[acceptance] criterion 4 (impossibility suite): PASS \
         (signs, rank bound, 60 attacks all unsuccessful, {elapsed:?})"
    );
}

#[test]
fn c05_scaling_exactness() {
    let mut suite: Vec<(String, Dataset, GlmModel)> = Vec::new();
    let (train, test, pristine, model) = blobs_harness();
    suite.push(("blobs-train".into(), train, model.clone()));
    suite.push(("blobs-test".into(), test, model.clone()));
    suite.push(("blobs-pristine".into(), pristine, model));

    let multi = synth_blobs(150, 5, 4, 2.5, 3).unwrap();
    let multi_model = train_erm(
        &multi,
        &LossSpec::damped(0.01).unwrap(),
        &TrainConfig {
            grad_tol: 1e-6,
            ..TrainConfig::default()
        },
    )
    .unwrap()
    .model;
    suite.push(("blobs-multiclass".into(), multi, multi_model));

    let biased = synth_biased_groups(200, 4, 0.2, 5).unwrap();
    let biased_model = train_erm(
        &biased,
        &LossSpec::regularized(1.0).unwrap(),
        &TrainConfig::default(),
    )
    .unwrap()
    .model;
    suite.push(("biased-groups".into(), biased, biased_model));

    let setup = impossibility_dataset(6, 3, 0, false).unwrap();
    let imp_model = GlmModel::from_theta(
        Array1::from_shape_fn(6, |j| (j as f64 - 2.5) * 0.3),
        2,
        6,
        false,
    )
    .unwrap();
    suite.push(("impossibility".into(), setup.train, imp_model));

    for (name, data, model) in &suite {
        let base_preds = predictions(model, data).unwrap();
        let base_acc = accuracy(model, data).unwrap();
        for lambda in [0.25, 1.0, 64.0] {
            let scaled = influence_core::attack::scaling_attack(model, lambda).unwrap();
            assert_eq!(
                predictions(&scaled, data).unwrap(),
                base_preds,
                "{name}: predictions changed at lambda={lambda}"
            );
            assert_eq!(
                accuracy(&scaled, data).unwrap(),
                base_acc,
                "{name}: accuracy changed at lambda={lambda}"
            );
        }
    }
    println!(
        "[acceptance] criterion 5 (scaling exactness): PASS \
         ({} datasets x 3 lambdas, zero tolerance)",
        suite.len()
    );
}

#[test]
fn c06_desk_scale_attack_trends() {
    let start = std::time::Instant::now();
    let (train, test, _pristine, model) = blobs_harness();
    let ihvp = IhvpConfig::default();
    let scores0 = influence_set(&model, &train, &test, &ihvp).unwrap();
    let ranking0 = influence::rank(&scores0).unwrap();
    let k = 10;

    // (a) final rank improves for >= 90% of 20 non-top-k targets at C = 0.5,
    // and (b) success rate is non-decreasing from C = 0.05 to C = 0.5
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let targets = pick_targets(&mut rng, train.len(), 20, Some((&ranking0, k)));
    let mut improved = [0usize; 2];
    let mut successes = [0usize; 2];
    for (ci, c) in [0.05, 0.5].into_iter().enumerate() {
        let cfg = AttackConfig {
            c,
            k,
            seed: 7,
            ..AttackConfig::default()
        };
        for &t in &targets {
            let r = single_target_attack(&train, &test, &model, t, &cfg).unwrap();
            if r.final_rank < r.initial_rank {
                improved[ci] += 1;
            }
            if r.success {
                successes[ci] += 1;
            }
        }
    }
    let improve_rate = improved[1] as f64 / 20.0;
    assert!(
        improve_rate >= 0.9,
        "(a) rank improved for only {improve_rate} of targets"
    );
    assert!(
        successes[1] >= successes[0],
        "(b) success rate decreased: C=0.05 -> {}, C=0.5 -> {}",
        successes[0],
        successes[1]
    );
    // regression locks from the one-time calibration run
    assert_eq!(improved, [20, 20], "(a) pinned improvement counts moved");
    assert_eq!(successes, [1, 4], "(b) pinned success counts moved");

    // (c) multi-target: success rate at size 50 >= size 10 at k = 10
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let t50 = pick_targets(&mut rng, train.len(), 50, None);
    let t10: Vec<usize> = t50[..10].to_vec();
    let cfg = AttackConfig {
        c: 0.1,
        k,
        seed: 7,
        ..AttackConfig::default()
    };
    let r10 = multi_target_attack(&train, &test, &model, &t10, &cfg).unwrap();
    let r50 = multi_target_attack(&train, &test, &model, &t50, &cfg).unwrap();
    assert!(
        r50.success_rate >= r10.success_rate,
        "(c) size-50 rate {} < size-10 rate {}",
        r50.success_rate,
        r10.success_rate
    );
    // regression locks
    assert_eq!((r10.success_rate * 10.0).round() as usize, 0, "(c) pinned size-10 hits moved");
    assert_eq!((r50.success_rate * 50.0).round() as usize, 3, "(c) pinned size-50 hits moved");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "suite took {elapsed:?}");
    println!(
        "[acceptance] criterion 6 (desk-scale attack trends): PASS \
         (improved {}/20, success {}->{} over C, multi {:.2}>={:.2}, {elapsed:?})",
        improved[1], successes[0], successes[1], r50.success_rate, r10.success_rate
    );
}

#[test]
fn c07_ablation_ordering() {
    let (train, test, _pristine, model) = blobs_harness();
    let ihvp = IhvpConfig::default();
    let scores0 = influence_set(&model, &train, &test, &ihvp).unwrap();
    let ranking0 = influence::rank(&scores0).unwrap();
    let k = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let targets = pick_targets(&mut rng, train.len(), 20, Some((&ranking0, k)));

    let run = |variant: ObjectiveVariant, num_inits: usize| -> usize {
        let cfg = AttackConfig {
            c: 0.5,
            k,
            seed: 7,
            variant,
            num_inits,
            ..AttackConfig::default()
        };
        targets
            .iter()
            .filter(|&&t| {
                single_target_attack(&train, &test, &model, t, &cfg)
                    .unwrap()
                    .success
            })
            .count()
    };
    let max_target_alone = run(ObjectiveVariant::MaxTarget, 1);
    let ours = run(ObjectiveVariant::MaxTargetMinHigher, 5);
    assert!(
        ours >= max_target_alone,
        "final objective {ours}/20 below the max-target baseline {max_target_alone}/20"
    );
    // regression locks from the calibration run
    assert_eq!(max_target_alone, 4, "pinned baseline success count moved");
    assert_eq!(ours, 6, "pinned final-attack success count moved");
    println!(
        "[acceptance] criterion 7 (ablation ordering): PASS \
         (max-target alone {max_target_alone}/20 <= ours {ours}/20)"
    );
}

#[test]
fn transfer_success_improves_with_k() {
    // supplementary trend: when an unknown test set recomputes the scores,
    // a larger k keeps more manipulated targets inside the top ranks
    let (train, test, pristine, model) = blobs_harness();
    let ihvp = IhvpConfig::default();
    let scores0 = influence_set(&model, &train, &test, &ihvp).unwrap();
    let ranking0 = influence::rank(&scores0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let targets = pick_targets(&mut rng, train.len(), 8, Some((&ranking0, 50)));

    let mut transfer_rates = Vec::new();
    for k in [1usize, 50] {
        let cfg = AttackConfig {
            c: 0.5,
            k,
            seed: 7,
            ..AttackConfig::default()
        };
        let mut hits = 0usize;
        for &t in &targets {
            let result = single_target_attack(&train, &test, &model, t, &cfg).unwrap();
            let eval = influence_core::attack::evaluate_attack(
                &result.theta_prime,
                &model,
                &train,
                &test,
                &pristine,
                &[t],
                k,
                0.03,
                &ihvp,
            )
            .unwrap();
            if eval.transfer_ranks[0] <= k {
                hits += 1;
            }
        }
        transfer_rates.push(hits as f64 / targets.len() as f64);
    }
    assert!(
        transfer_rates[1] >= transfer_rates[0],
        "transfer rate at k=50 ({}) below k=1 ({})",
        transfer_rates[1],
        transfer_rates[0]
    );
    println!(
        "[acceptance] supplementary (transfer vs k): PASS (k=1 rate {}, k=50 rate {})",
        transfer_rates[0], transfer_rates[1]
    );
}

#[test]
fn c08_fairness_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let mut checked = 0usize;
    let mut worst_residual = 0.0f64;
    let mut worst_gap = 0.0f64;
    while checked < 20 {
        let fair: Vec<f64> = (0..4)
            .map(|_| (rng.random_range(-8i32..=8) as f64) / 4.0)
            .collect();
        let util: Vec<f64> = (0..4)
            .map(|_| (rng.random_range(-8i32..=8) as f64) / 4.0)
            .collect();
        let w_bar: Vec<f64> = (0..4)
            .map(|_| f64::from(rng.random_range(0..=100u32)) / 100.0)
            .collect();
        let util_at: f64 = w_bar.iter().zip(&util).map(|(a, b)| a * b).sum();
        if util_at > 0.0 {
            continue;
        }
        let f_fair: f64 = -w_bar.iter().zip(&fair).map(|(a, b)| a * b).sum::<f64>();
        let basic = match solve_reweigh_basic(&fair, &util, f_fair, 1e-8) {
            Ok(s) => s,
            Err(_) => continue,
        };
        checked += 1;

        worst_residual = basic
            .residuals
            .iter()
            .fold(worst_residual, |acc, r| acc.max(r.abs()));
        worst_gap = worst_gap.max(basic.duality_gap / (1.0 + basic.objective.abs()));

        // 0.01-grid brute force over exactly feasible points bounds the LP
        // objective from above
        let mut grid_best = f64::INFINITY;
        let mut w = [0.0f64; 4];
        let f0: f64 = 0.0;
        let _ = f0;
        for a in 0..=100u32 {
            w[0] = f64::from(a) / 100.0;
            let s0 = w[0] * fair[0];
            let u0 = w[0] * util[0];
            for b in 0..=100u32 {
                w[1] = f64::from(b) / 100.0;
                let s1 = s0 + w[1] * fair[1];
                let u1 = u0 + w[1] * util[1];
                for c in 0..=100u32 {
                    w[2] = f64::from(c) / 100.0;
                    let s2 = s1 + w[2] * fair[2];
                    let u2 = u1 + w[2] * util[2];
                    for d in 0..=100u32 {
                        w[3] = f64::from(d) / 100.0;
                        let s3 = s2 + w[3] * fair[3];
                        if (s3 + f_fair).abs() > 1e-9 {
                            continue;
                        }
                        if u2 + w[3] * util[3] > 1e-12 {
                            continue;
                        }
                        let obj = w[0] + w[1] + w[2] + w[3];
                        if obj < grid_best {
                            grid_best = obj;
                        }
                    }
                }
            }
        }
        assert!(grid_best.is_finite(), "constructed grid point must exist");
        assert!(
            basic.objective <= grid_best + 1e-3,
            "LP {} worse than grid {}",
            basic.objective,
            grid_best
        );

        // advanced problem shares the machinery; check duality there too
        if let Ok(adv) = solve_reweigh_advanced(&fair, &util, f_fair.abs(), 0.5, 0.3, 1e-8) {
            worst_gap = worst_gap.max(adv.duality_gap / (1.0 + adv.objective.abs()));
            worst_residual = adv
                .residuals
                .iter()
                .fold(worst_residual, |acc, r| acc.max(r.max(0.0)));
        }
    }
    assert!(worst_residual <= 1e-6, "feasibility residual {worst_residual:.3e}");
    assert!(worst_gap <= 1e-6, "duality gap {worst_gap:.3e}");
    println!(
        "[acceptance] criterion 8 (fairness LP): PASS \
         (20 instances, residual {worst_residual:.2e} <= 1e-6, dual gap {worst_gap:.2e} <= 1e-6, grid bound holds)"
    );
}

#[test]
fn c09_fairness_attack_trend() {
    let start = std::time::Instant::now();
    let train = synth_biased_groups(600, 4, 0.2, 0).unwrap();
    let val = synth_biased_groups(300, 4, 0.2, 1).unwrap();
    let pristine = synth_biased_groups(300, 4, 0.2, 2).unwrap();
    let grid: Vec<f64> = (-2..=6).map(|e| 2f64.powi(e)).collect();
    let cfg = FairnessConfig {
        l2_reg: 1.0,
        beta: 0.5,
        gamma: 0.1,
        ..FairnessConfig::default()
    };
    let report = fairness_attack_eval(
        &train,
        &val,
        &pristine,
        &grid,
        &cfg,
        &TrainConfig {
            grad_tol: 1e-7,
            ..TrainConfig::default()
        },
    )
    .unwrap();

    let baseline = report.baseline_dp_gap.expect("lambda = 1 row must solve");
    let success_rows: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.success)
        .map(|r| r.lambda)
        .collect();
    assert!(
        !success_rows.is_empty(),
        "no scaling coefficient raised the downstream DP gap within budget"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "suite took {elapsed:?}");
    println!(
        "[acceptance] criterion 9 (fairness attack trend): PASS \
         (baseline gap {baseline:.4}, success at lambda {success_rows:?}, {elapsed:?})"
    );
}
