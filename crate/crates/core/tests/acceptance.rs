//! End-to-end acceptance checks. Each test prints one `criterion N` verdict
//! line; run with `--nocapture` to see them.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpl_core::episode::{
    collect_batch, episode_rng, run_episode, run_many, sample_scenario, Mode, Scenario, SimConfig, Simulator,
};
use rpl_core::geom::{arc_displacement, step_pose, straight_displacement, Pose2D, Vec2, VelocityCommand};
use rpl_core::policy::{
    kl_diag_gauss, log_prob, sample_action, Action, PolicyParams, PolicyShape, SigmaSchedule,
};
use rpl_core::report::RateReport;
use rpl_core::rvo::{preferred_velocity, rvo_rollout, rvo_step, AgentDisk, RvoConfig};
use rpl_core::train::{train_iteration, train_loop, IterationMetrics, TrainConfig};
use rpl_core::trpo::{
    compute_gae, conjugate_gradient, discounted_returns, fit_value, gae, state_inputs, trpo_update, PolicyBatch,
    TrpoConfig,
};
use rpl_core::world::{
    check_termination, observe_peds, EnvironmentSpec, FieldOfView, ObstacleFeatures, PolarPair, RewardModel,
    TerminationCause, TerminationThresholds, WorldState,
};

fn verdict(n: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {n} ({name}): {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn c1_kinematics_continuity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let pose = Pose2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-PI..PI));
        let v_t = rng.random_range(0.0..0.7);
        let dt = 0.1;
        let straight = straight_displacement(pose.heading, VelocityCommand::new(v_t, 0.0), dt);
        let base = step_pose(pose, VelocityCommand::new(v_t, 0.0), dt);
        for v_r in [1e-9, -1e-9] {
            let arc = arc_displacement(pose.heading, VelocityCommand::new(v_t, v_r), dt);
            worst = worst.max((arc - straight).norm());
            let p = step_pose(pose, VelocityCommand::new(v_t, v_r), dt);
            worst = worst.max(p.position().distance(base.position()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-6 && secs < 5.0;
    verdict(1, "kinematics continuity", ok, &format!("max gap {worst:.3e} m, {secs:.2}s"));
    assert!(ok);
}

/// Random episodes `(inputs, sampled actions, advantages)` for `policy`.
fn random_parts(
    rng: &mut ChaCha8Rng,
    policy: &PolicyParams,
    episodes: usize,
    max_len: usize,
    sigma: f64,
) -> Vec<(Vec<f64>, Vec<Action>, Vec<f64>)> {
    let d = policy.shape().input;
    (0..episodes)
        .map(|_| {
            let t = rng.random_range(1..=max_len);
            let inputs: Vec<f64> = (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mu = policy.forward_sequence(&inputs).mu;
            let actions = mu.iter().map(|m| sample_action(*m, sigma, rng)).collect();
            let adv = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            (inputs, actions, adv)
        })
        .collect()
}

fn random_policy(rng: &mut ChaCha8Rng) -> PolicyParams {
    let input = rng.random_range(2..=8);
    let layers = rng.random_range(1..=2);
    let features = (0..layers).map(|_| rng.random_range(2..=16)).collect();
    let lstm = rng.random_range(2..=16);
    let mut p = PolicyParams::init(PolicyShape::new(input, features, lstm), 0.5, rng);
    for x in p.flat_mut() {
        *x += rng.random_range(-0.1..0.1);
    }
    p
}

#[test]
fn c2_gradient_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_policy(&mut rng);
        let sigma = rng.random_range(0.1..0.6);
        let parts = random_parts(&mut rng, &p, 3, 8, sigma);
        let b = PolicyBatch::from_parts(&p, sigma, parts, 1).unwrap();
        // evaluate away from θ_old so the ratios are not all one
        let q = p.with_flat(p.flat().iter().map(|t| t + rng.random_range(-0.05..0.05)).collect());
        let objectives: [(&dyn Fn(&PolicyParams) -> f64, Vec<f64>); 2] = [
            (&|t| b.log_prob_sum(t), b.log_prob_sum_grad(&q)),
            (&|t| b.surrogate(t), b.surrogate_grad(&q)),
        ];
        for (f, g) in &objectives {
            let h = 1e-5;
            let fd: Vec<f64> = (0..q.num_params())
                .map(|k| {
                    let mut a = q.clone();
                    a.flat_mut()[k] += h;
                    let mut c = q.clone();
                    c.flat_mut()[k] -= h;
                    (f(&a) - f(&c)) / (2.0 * h)
                })
                .collect();
            let scale = dot(&fd, &fd).sqrt().max(1e-8);
            for (a, c) in fd.iter().zip(g) {
                worst = worst.max((a - c).abs() / scale);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst < 1e-4 && secs < 60.0;
    verdict(2, "gradient correctness", ok, &format!("max relative error {worst:.3e}, {secs:.2}s"));
    assert!(ok);
}

/// Advantage at every step as the literal truncated double sum of
/// discounted TD residuals.
fn literal_gae(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    (0..r.len())
        .map(|i| {
            (i..r.len())
                .map(|k| {
                    let delta = r[k] + gamma * v[k + 1] - v[k];
                    (gamma * lambda).powi((k - i) as i32) * delta
                })
                .sum()
        })
        .collect()
}

#[test]
fn c3_gae_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut exact = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let mut v: Vec<f64> = (0..=n).map(|_| rng.random_range(-100.0..100.0)).collect();
        if rng.random_bool(0.5) {
            v[n] = 0.0;
        }
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.0..=1.0);
        for (a, b) in gae(&r, &v, gamma, lambda).iter().zip(literal_gae(&r, &v, gamma, lambda)) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        let returns = discounted_returns(&r, gamma);
        let mut acc = 0.0;
        let mut literal = vec![0.0; n];
        for i in (0..n).rev() {
            acc = r[i] + gamma * acc;
            literal[i] = acc;
        }
        exact &= gae(&r, &vec![0.0; n + 1], gamma, 1.0) == returns && returns == literal;
    }
    let ok = worst < 1e-10 && exact;
    verdict(3, "GAE oracle", ok, &format!("max deviation {worst:.3e}, λ=1 exact: {exact}"));
    assert!(ok);
}

fn small_training(seed: u64, batch_steps: usize) -> TrainConfig {
    TrainConfig {
        sim: SimConfig {
            scn_probability: 0.0,
            max_steps: 200,
            ..SimConfig::default()
        },
        sigma: SigmaSchedule {
            start: 0.5,
            end: 0.05,
            decay_iters: 25,
        },
        batch_steps,
        policy_features: vec![32, 16],
        policy_lstm: 16,
        value_hidden: vec![64, 16],
        seed,
        ..TrainConfig::default()
    }
}

/// Mean KL and surrogate of `new` against `old` over a batch, evaluated
/// directly from forward passes.
fn direct_kl_and_surrogate(
    old: &PolicyParams,
    new: &PolicyParams,
    parts: &[(Vec<f64>, Vec<Action>, Vec<f64>)],
    sigma: f64,
) -> (f64, f64) {
    let (mut kl, mut surr, mut n) = (0.0, 0.0, 0usize);
    for (inputs, actions, adv) in parts {
        let a = old.forward_sequence(inputs).mu;
        let b = new.forward_sequence(inputs).mu;
        for t in 0..actions.len() {
            kl += kl_diag_gauss(a[t], sigma, b[t], sigma);
            surr += (log_prob(b[t], sigma, actions[t]) - log_prob(a[t], sigma, actions[t])).exp() * adv[t];
            n += 1;
        }
    }
    (kl / n as f64, surr / n as f64)
}

#[test]
fn c4_trust_region() {
    let envs = common::goal_only_scenes(8, 4);
    let cfg = small_training(4, 1000);
    let scaling = cfg.sim.input_scaling();
    let mut state = cfg.initial_checkpoint();
    let (mut accepted, mut rejected, mut violations) = (0, 0, Vec::new());
    let mut worst_margin = f64::NEG_INFINITY;
    for it in 0..50u64 {
        let sigma = state.sigma.sigma(it);
        let eps = cfg.trpo.kl_radius(sigma);
        let batch = collect_batch(&envs, &state.policy, sigma, &cfg.sim, cfg.batch_steps, cfg.batch_seed(it), 1).unwrap();
        let mut adv = compute_gae(&batch, &state.value, &scaling, &cfg.trpo, 1);
        let returns = adv.flat_returns();
        adv.normalize();
        let pb = PolicyBatch::new(&state.policy, &batch, &scaling, sigma, &adv, 1).unwrap();
        let (new, stats) = trpo_update(&pb, &cfg.trpo).unwrap();
        let inputs = state_inputs(&batch, &scaling).concat();
        let (value, _) = fit_value(&state.value, &inputs, &returns, &cfg.trpo, 1);

        let parts: Vec<_> = batch
            .episodes
            .iter()
            .zip(&adv.advantages)
            .map(|(ep, a)| {
                let x: Vec<f64> = ep.transitions.iter().flat_map(|t| scaling.apply(&t.observation)).collect();
                (x, ep.transitions.iter().map(|t| t.action).collect::<Vec<_>>(), a.clone())
            })
            .collect();
        if stats.accepted {
            accepted += 1;
            let (kl, surr_new) = direct_kl_and_surrogate(&state.policy, &new, &parts, sigma);
            let (_, surr_old) = direct_kl_and_surrogate(&state.policy, &state.policy, &parts, sigma);
            worst_margin = worst_margin.max(kl - eps);
            if kl > eps + 1e-6 || surr_new <= surr_old {
                violations.push(format!("iter {it}: kl {kl:.3e} vs ε {eps:.3e}, Δsurrogate {:.3e}", surr_new - surr_old));
            }
        } else {
            rejected += 1;
            let same = new.flat().iter().zip(state.policy.flat()).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                violations.push(format!("iter {it}: rejected step changed θ"));
            }
        }

        // the manual replica must agree with the library iteration
        let mut lib = state.clone();
        train_iteration(&envs, &mut lib, &cfg).unwrap();
        if lib.policy != new || lib.value != value {
            violations.push(format!("iter {it}: replica diverged from train_iteration"));
        }
        state = lib;
    }

    // a batch without advantage signal must be rejected and leave θ untouched
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let parts: Vec<_> = random_parts(&mut rng, &state.policy, 3, 5, 0.3)
        .into_iter()
        .map(|(x, a, adv)| (x, a, vec![0.0; adv.len()]))
        .collect();
    let pb = PolicyBatch::from_parts(&state.policy, 0.3, parts, 1).unwrap();
    let (same, st) = trpo_update(&pb, &TrpoConfig::default()).unwrap();
    let bit_identical = same.flat().iter().zip(state.policy.flat()).all(|(a, b)| a.to_bits() == b.to_bits());
    if st.accepted || !bit_identical {
        violations.push("degenerate batch was not rejected bit-identically".into());
    }

    let ok = violations.is_empty() && accepted > 0;
    verdict(
        4,
        "trust region",
        ok,
        &format!("{accepted} accepted, {rejected} rejected, max KL − ε {worst_margin:.3e}; {violations:?}"),
    );
    assert!(ok);
}

#[test]
fn c5_cg_and_fvp() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_res: f64 = 0.0;
    let mut within_n = true;
    for n in [1, 2, 5, 10, 25, 50, 100, 150, 200] {
        let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A = MᵀM/n + I is symmetric positive definite with modest condition number
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                a[i * n + j] = s / n as f64 + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let apply = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(&a[i * n..(i + 1) * n], v)).collect() };
        let (x, outcome) = conjugate_gradient(apply, &b, n, 1e-12).unwrap();
        let ax = apply(&x);
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let rel = (dot(&r, &r) / dot(&b, &b)).sqrt();
        worst_res = worst_res.max(rel);
        within_n &= outcome.iterations <= n;
    }

    let mut worst_fvp: f64 = 0.0;
    for _ in 0..10 {
        let p = random_policy(&mut rng);
        let sigma = rng.random_range(0.1..0.6);
        let parts = random_parts(&mut rng, &p, 3, 8, sigma);
        let b = PolicyBatch::from_parts(&p, sigma, parts, 1).unwrap();
        let v: Vec<f64> = (0..p.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fv = b.fvp(&v, 0.0);
        let h = 1e-5;
        let at = |s: f64| p.with_flat(p.flat().iter().zip(&v).map(|(t, d)| t + s * d).collect());
        let (gp, gm) = (b.mean_kl_grad(&at(h)), b.mean_kl_grad(&at(-h)));
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(x, y)| (x - y) / (2.0 * h)).collect();
        let err: Vec<f64> = fd.iter().zip(&fv).map(|(x, y)| x - y).collect();
        worst_fvp = worst_fvp.max((dot(&err, &err) / dot(&fd, &fd)).sqrt());
    }
    let ok = worst_res < 1e-8 && within_n && worst_fvp < 1e-3;
    verdict(
        5,
        "CG and FVP",
        ok,
        &format!("max relative residual {worst_res:.3e} (≤ n iterations: {within_n}), FVP relative error {worst_fvp:.3e}"),
    );
    assert!(ok);
}

fn state_with(goal: f64, ped: f64, com: f64, obs: f64) -> WorldState {
    let mut obstacles = ObstacleFeatures::empty(4.0);
    obstacles.front = obs;
    WorldState {
        goal: PolarPair::new(goal, 0.0),
        action: VelocityCommand::default(),
        peds: vec![PolarPair::new(ped, 0.3), PolarPair::new(4.0, PI), PolarPair::new(4.0, PI)],
        companion: PolarPair::new(com, 1.0),
        obstacles,
    }
}

#[test]
fn c6_world_exactness() {
    let mut failures = Vec::new();

    // noiseless, all-seeing sensor: observation equals the true state
    let mut sim_cfg = SimConfig {
        scn_probability: 1.0,
        ..SimConfig::default()
    };
    let wide = FieldOfView {
        min_angle: -PI,
        max_angle: PI,
        range: 4.0,
    };
    sim_cfg.sensor = sim_cfg.sensor.noiseless();
    // dummies sit at the far map corner, so the pedestrian range must cover the map
    sim_cfg.sensor.ped_fov = FieldOfView { range: 1e3, ..wide };
    sim_cfg.sensor.obs_fov = wide;
    let envs = common::corridor_scenes(3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compared = 0;
    for env_index in 0..envs.len() {
        for mode in [Mode::Scn, Mode::NonScn] {
            let scenario = Scenario::for_trajectory(&envs, env_index, 1, mode, sim_cfg.companion_min_gap).unwrap();
            let mut sim = Simulator::new(&envs, &scenario, &sim_cfg);
            let mut snap = sim.snapshot();
            for _ in 0..60 {
                let obs = sim.observe(&snap, &mut rng);
                let in_view = snap.state.peds.iter().all(|p| sim_cfg.sensor.ped_fov.contains(*p));
                if in_view {
                    compared += 1;
                    if obs != snap.state {
                        failures.push(format!("observation differs from state in env {env_index}"));
                    }
                }
                let cmd = VelocityCommand::new(rng.random_range(0.0..0.7), rng.random_range(-0.5..0.5));
                let (s, cause) = sim.advance(cmd);
                snap = s;
                if cause.is_terminal() {
                    break;
                }
            }
        }
    }
    if compared == 0 {
        failures.push("no fully visible states were compared".into());
    }

    // masked pedestrians read exactly (d⁺, π)
    let sensor = SimConfig::default().sensor;
    let truth = [PolarPair::new(1.0, 0.0), PolarPair::new(1.0, 2.5), PolarPair::new(5.0, 0.1), PolarPair::new(2.0, -3.0)];
    let seen = observe_peds(&truth, &sensor, &mut rng);
    for (t, s) in truth.iter().zip(&seen) {
        if !sensor.ped_fov.contains(*t) && *s != PolarPair::new(sensor.ped_fov.range, PI) {
            failures.push(format!("masked pedestrian {t:?} read as {s:?}"));
        }
    }
    if seen[0].phi != 0.0 {
        failures.push("visible pedestrian bearing changed".into());
    }

    // thresholds fire exactly at their values and not just above
    let th = TerminationThresholds::default();
    let above = |x: f64| f64::from_bits(x.to_bits() + 1);
    let cases = [
        (state_with(0.8, 4.0, 1.0, 4.0), TerminationCause::GoalReached),
        (state_with(above(0.8), 4.0, 1.0, 4.0), TerminationCause::None),
        (state_with(3.0, 0.4, 1.0, 4.0), TerminationCause::HitPedestrian),
        (state_with(3.0, above(0.4), 1.0, 4.0), TerminationCause::None),
        (state_with(3.0, 4.0, 0.4, 4.0), TerminationCause::HitCompanion),
        (state_with(3.0, 4.0, above(0.4), 4.0), TerminationCause::None),
        (state_with(3.0, 4.0, 1.0, 0.2), TerminationCause::HitObstacle),
        (state_with(3.0, 4.0, 1.0, above(0.2)), TerminationCause::None),
        (state_with(3.0, 4.0, 2.0, 4.0), TerminationCause::Stray),
        (state_with(3.0, 4.0, 2.0f64.next_down(), 4.0), TerminationCause::None),
    ];
    for (s, want) in &cases {
        let got = check_termination(s, &th, true);
        if got != *want {
            failures.push(format!("{s:?} gave {got:?}, expected {want:?}"));
        }
    }

    let rw = RewardModel::default();
    let rewards_ok = rw.reward(TerminationCause::GoalReached, 0.7) == 10_000.0
        && [
            TerminationCause::HitPedestrian,
            TerminationCause::HitCompanion,
            TerminationCause::HitObstacle,
            TerminationCause::Stray,
        ]
        .iter()
        .all(|c| rw.reward(*c, 0.3) == -10_000.0)
        && rw.reward(TerminationCause::None, -0.25) == -2.5
        && rw.reward(TerminationCause::None, 0.0) == 0.0;
    if !rewards_ok {
        failures.push("reward values differ".into());
    }

    let ok = failures.is_empty();
    verdict(6, "world exactness", ok, &format!("{compared} states compared; {failures:?}"));
    assert!(ok);
}

fn success_rate(envs: &[EnvironmentSpec], cfg: &TrainConfig, policy: &PolicyParams, trials: usize, seed: u64) -> RateReport {
    let sigma = cfg.sigma.eval_sigma();
    let episodes = run_many(trials, 1, |j| {
        let mut rng = episode_rng(seed, j);
        let s = sample_scenario(envs, &cfg.sim, Some(Mode::NonScn), &mut rng)?;
        run_episode(envs, &s, policy, sigma, &cfg.sim, &mut rng)
    })
    .unwrap();
    RateReport::from_episodes(Mode::NonScn, &episodes)
}

#[test]
fn c7_learnability() {
    let start = Instant::now();
    let envs = common::goal_only_scenes(8, 7);
    let mut passing = 0;
    let mut rates = Vec::new();
    for seed in 0..5 {
        let cfg = small_training(seed, 2000);
        let mut state = cfg.initial_checkpoint();
        train_loop(&envs, &mut state, &cfg, 50, |_, _| Ok(())).unwrap();
        let rg = success_rate(&envs, &cfg, &state.policy, 100, 1000 + seed).rate("RG").unwrap();
        rates.push(rg);
        passing += (rg >= 80.0) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = passing >= 4 && secs < 600.0;
    verdict(7, "learnability", ok, &format!("RG per seed {rates:?}, {passing}/5 seeds ≥ 80%, {secs:.1}s"));
    assert!(ok);
}

fn corridor_training() -> TrainConfig {
    TrainConfig {
        sim: SimConfig {
            scn_probability: 1.0,
            max_steps: 400,
            ..SimConfig::default()
        },
        sigma: SigmaSchedule {
            start: 0.5,
            end: 0.05,
            decay_iters: 100,
        },
        batch_steps: 2000,
        policy_features: vec![32, 16],
        policy_lstm: 16,
        value_hidden: vec![64, 16],
        seed: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn c8_corridor_comparison() {
    let envs = common::corridor_scenes(6, 3);
    let cfg = corridor_training();
    let mut state = cfg.initial_checkpoint();
    train_loop(&envs, &mut state, &cfg, 200, |_, _| Ok(())).unwrap();
    let sigma = state.sigma.eval_sigma();
    let policy = run_many(300, 1, |j| {
        let mut rng = episode_rng(80, j);
        let s = sample_scenario(&envs, &cfg.sim, Some(Mode::Scn), &mut rng)?;
        run_episode(&envs, &s, &state.policy, sigma, &cfg.sim, &mut rng)
    })
    .unwrap();
    let rvo = run_many(300, 1, |j| {
        let mut rng = episode_rng(80, j);
        let s = sample_scenario(&envs, &cfg.sim, Some(Mode::Scn), &mut rng)?;
        rvo_rollout(&envs, &s, &cfg.sim, &RvoConfig::default(), &mut rng)
    })
    .unwrap();
    let rp = RateReport::from_episodes(Mode::Scn, &policy);
    let rr = RateReport::from_episodes(Mode::Scn, &rvo);
    println!("{}\n{}\n{}", rp.header(), rp.row("policy"), rr.row("rvo"));
    let sums_ok = [&rp, &rr].iter().all(|r| {
        let s: f64 = r.row("x").split(',').skip(3).map(|v| v.parse::<f64>().unwrap()).sum();
        (s - 100.0).abs() <= 0.1
    });
    let (lc_policy, lc_rvo) = (rp.rate("LC").unwrap(), rr.rate("LC").unwrap());
    let ok = sums_ok && rp.trials == 300 && rr.trials == 300 && lc_rvo > lc_policy;
    verdict(8, "corridor comparison", ok, &format!("LC policy {lc_policy:.2}% vs RVO {lc_rvo:.2}%"));
    assert!(ok);
}

fn metrics_log(envs: &[EnvironmentSpec], cfg: &TrainConfig, iterations: u64) -> Vec<u8> {
    let mut state = cfg.initial_checkpoint();
    let mut out = format!("{}\n", IterationMetrics::HEADER);
    train_loop(envs, &mut state, cfg, iterations, |_, r| {
        out.push_str(&r.metrics.csv_line());
        out.push('\n');
        Ok(())
    })
    .unwrap();
    out.into_bytes()
}

#[test]
fn c9_determinism() {
    let envs = common::corridor_scenes(2, 9);
    let cfg = TrainConfig {
        sim: SimConfig {
            max_steps: 150,
            ..SimConfig::default()
        },
        batch_steps: 600,
        policy_features: vec![16],
        policy_lstm: 8,
        value_hidden: vec![16],
        seed: 9,
        workers: 1,
        ..TrainConfig::default()
    };
    let a = metrics_log(&envs, &cfg, 5);
    let b = metrics_log(&envs, &cfg, 5);
    let ok = a == b && a.iter().filter(|&&c| c == b'\n').count() == 6;
    verdict(9, "determinism", ok, &format!("{} bytes, identical: {}", a.len(), a == b));
    assert!(ok);
}

#[test]
fn c10_rvo_sanity() {
    let cfg = RvoConfig::default();
    let (dt, max_speed, tol) = (0.1, 0.7, 0.05);
    let disk = |x: f64, gx: f64| AgentDisk {
        position: Vec2::new(x, 0.0),
        velocity: Vec2::ZERO,
        radius: cfg.robot_radius,
        pref_speed: 0.6,
        goal: Vec2::new(gx, 0.0),
    };
    let (mut a, mut b) = (disk(-4.0, 4.0), disk(4.0, -4.0));
    let mut min_sep = f64::INFINITY;
    for _ in 0..600 {
        let va = rvo_step(&a, &[b], &[], max_speed, dt, &cfg);
        let vb = rvo_step(&b, &[a], &[], max_speed, dt, &cfg);
        a.velocity = va;
        b.velocity = vb;
        a.position = a.position + va * dt;
        b.position = b.position + vb * dt;
        min_sep = min_sep.min(a.position.distance(b.position));
    }
    let radius_sum = a.radius + b.radius;
    let (ea, eb) = (a.position.distance(a.goal), b.position.distance(b.goal));
    let swap_ok = min_sep > radius_sum && ea < tol && eb < tol;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut single_ok = true;
    for _ in 0..1000 {
        let me = AgentDisk {
            position: Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
            velocity: Vec2::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)),
            radius: cfg.robot_radius,
            pref_speed: rng.random_range(0.1..0.7),
            goal: Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
        };
        single_ok &= rvo_step(&me, &[], &[], max_speed, dt, &cfg) == preferred_velocity(&me, dt);
    }
    let ok = swap_ok && single_ok;
    verdict(
        10,
        "RVO sanity",
        ok,
        &format!("min separation {min_sep:.3} > {radius_sum}, goal errors {ea:.3e}/{eb:.3e}, single agent exact: {single_ok}"),
    );
    assert!(ok);
}
