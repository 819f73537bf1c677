//! Acceptance gate. Runs every criterion, prints one line each and exits
//! non-zero if any criterion fails. Tolerances and runtime limits are pinned
//! below.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specalloc::allocation::{is_feasible, RawAction};
use specalloc::backends::BackendRegistry;
use specalloc::grpo::{
    evaluate_policy, group_advantages, grpo_gradient, grpo_objective, sample_group, sft_gradient,
    sft_log_likelihood, train, CandidateGroup, ToyPolicy, TrainConfig,
};
use specalloc::harness::{fuzz_case, presets, run_benchmark, BenchConfig, MethodSpec, SeedSpec, Status};
use specalloc::netenv::{
    ChannelId, ChannelSpec, EnvConfig, Environment, LinkParams, NetworkState, UserId, UserNode,
};
use specalloc::repair::repair;
use specalloc::reward::{psi_penalty, reward_depth, reward_struct, Psi, RewardWeights};
use specalloc::serializer::{parse_action, render_action, serialize};
use specalloc::solvers::{solve_exhaustive, solve_grouped_hungarian, solve_hungarian, SolverRegistry};

const C1_INSTANCES: usize = 500;
const C1_MAX_SIDE: usize = 7;
const C1_LIMIT: Duration = Duration::from_secs(10);

const C2_CASES: u64 = 10_000;
const C2_LIMIT: Duration = Duration::from_secs(30);

const C3_SEEDS: u64 = 100;
const C3_SLOTS: u64 = 20;
const C3_SIGMAS: f64 = 3.0;
const C3_LIMIT: Duration = Duration::from_secs(300);

const C4_ADV_TOL: f64 = 1e-12;
const C4_GRAD_REL_TOL: f64 = 1e-4;
const C4_FD_STEP: f64 = 1e-5;
const C4_INSTANCES: usize = 50;
const C4_LIMIT: Duration = Duration::from_secs(60);

const C5_RUNS: u64 = 10;
const C5_STEPS: usize = 300;
const C5_WINDOW: usize = 30;
const C5_MIN_IMPROVED: usize = 9;
const C5_MIN_G_ORDERED: usize = 7;
const C5_EVAL_SEED: u64 = 999_999;
const C5_EVAL_SLOTS: u64 = 100;
const C5_EVAL_SAMPLES: usize = 16;
const C5_LIMIT: Duration = Duration::from_secs(900);

const C7_VALID: f64 = 0.78;
const C7_TOL: f64 = 0.03;
const C7_SLOTS: u64 = 250;
const C7_GROUP: usize = 8;
const C7_LIMIT: Duration = Duration::from_secs(60);

const C8_BUDGET: Duration = Duration::from_secs(2);
const C8_GROUP_SIZE: usize = 50;
const C8_LIMIT: Duration = Duration::from_secs(60);

const C9_BUDGETS: [usize; 3] = [1024, 2048, 4096];
const C9_LIMIT: Duration = Duration::from_secs(10);

const C10_LIMIT: Duration = Duration::from_secs(60);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn calibrated(u: usize, c: usize, k: usize) -> EnvConfig {
    EnvConfig::shape(u, c, k).with_link(LinkParams::calibrated())
}

fn hungarian_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for i in 0..C1_INSTANCES {
        let u = rng.gen_range(1..=C1_MAX_SIDE);
        let c = rng.gen_range(1..=C1_MAX_SIDE);
        let k = rng.gen_range(1..=u);
        let mut cfg = calibrated(u, c, k);
        cfg.occupied_fraction = rng.gen_range(0.0..0.5);
        let s = Environment::new(cfg, i as u64).unwrap().state(rng.gen_range(0..10)).unwrap();
        let h = solve_hungarian(&s).objective;
        let e = solve_exhaustive(&s, C1_MAX_SIDE).unwrap().objective;
        if h != e {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{C1_INSTANCES} instances up to {C1_MAX_SIDE}x{C1_MAX_SIDE}, {mismatches} objective mismatches"),
    )
}

/// Highest-rate valid claimant of every channel claimed by several valid
/// pairs, ties to the lowest user id.
fn reference_winners(raw: &RawAction, s: &NetworkState) -> BTreeMap<ChannelId, UserId> {
    let mut claims: BTreeMap<ChannelId, Vec<(f64, UserId)>> = BTreeMap::new();
    for (&u, &c) in raw {
        if s.active_ids().contains(&u) && s.channels().iter().any(|ch| ch.id == c && !ch.occupied) {
            claims.entry(c).or_default().push((s.pair_rate(u, c).unwrap(), u));
        }
    }
    claims
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(c, mut v)| {
            v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            (c, v[0].1)
        })
        .collect()
}

fn repair_soundness() -> Verdict {
    let (mut bad_feasible, mut bad_idem, mut bad_wta, mut contended) = (0, 0, 0, 0);
    for i in 0..C2_CASES {
        let (s, raw, _) = fuzz_case(2, i);
        let out = repair(&raw, &s).allocation;
        bad_feasible += usize::from(!is_feasible(&out, &s).is_feasible());
        bad_idem += usize::from(repair(&out.assignment, &s).allocation != out);
        let winners = reference_winners(&raw, &s);
        contended += winners.len();
        bad_wta += usize::from(winners.iter().any(|(c, u)| out.assignment.get(u) != Some(c)));
    }
    verdict(
        bad_feasible + bad_idem + bad_wta == 0,
        format!(
            "{C2_CASES} fuzzed maps, {contended} contended channels; infeasible {bad_feasible}, \
             not idempotent {bad_idem}, winner mismatches {bad_wta}"
        ),
    )
}

/// Mean and standard error of paired differences `a - b`.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ordering_reproduction() -> Verdict {
    let mut cfg = BenchConfig {
        scenarios: presets::table_presets(),
        seeds: SeedSpec::Range {
            count: C3_SEEDS,
            base: 0,
        },
        methods: ["random", "de", "hungarian", "exhaustive"]
            .iter()
            .map(|m| MethodSpec::solver(m))
            .collect(),
        ..BenchConfig::default()
    };
    for s in &mut cfg.scenarios {
        s.slots = C3_SLOTS;
    }
    let report = run_benchmark(&cfg, &SolverRegistry::default(), &BackendRegistry::default()).unwrap();
    let series = |scenario: &str, method: &str| -> Option<Vec<f64>> {
        let rs: Vec<_> = report
            .records
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method)
            .collect();
        rs.iter()
            .all(|r| r.status == Status::Ok)
            .then(|| rs.iter().map(|r| r.episode_throughput).collect())
    };
    let mut failures = Vec::new();
    let mut exhaustive_na = Vec::new();
    for s in &cfg.scenarios {
        let id = s.id.as_str();
        let random = series(id, "random").unwrap();
        let hung = series(id, "hungarian").unwrap();
        let de = series(id, "de").unwrap();
        let (d, se) = paired(&hung, &random);
        if d <= C3_SIGMAS * se {
            failures.push(format!("{id}: hungarian-random {d:.3e} <= {C3_SIGMAS} SE"));
        }
        let (d, se) = paired(&de, &random);
        if d <= C3_SIGMAS * se {
            failures.push(format!("{id}: de-random {d:.3e} <= {C3_SIGMAS} SE"));
        }
        match series(id, "exhaustive") {
            Some(exh) => {
                let (d, se) = paired(&hung, &exh);
                if d > C3_SIGMAS * se {
                    failures.push(format!("{id}: hungarian exceeds exhaustive by {d:.3e}"));
                }
            }
            None => exhaustive_na.push(id.to_string()),
        }
    }
    verdict(
        failures.is_empty() && report.audit.passed(),
        format!(
            "{} presets x {C3_SEEDS} seeds x {C3_SLOTS} slots; exhaustive N/A on [{}]; {}",
            cfg.scenarios.len(),
            exhaustive_na.join(", "),
            if failures.is_empty() { "all orderings hold".to_string() } else { failures.join("; ") }
        ),
    )
}

fn small_state(rng: &mut ChaCha8Rng, users: u32, channels: u32) -> NetworkState {
    let u = (0..users)
        .map(|i| UserNode::new(i, rng.gen_range(5.0..480.0), rng.gen_range(-20.0..20.0)))
        .collect();
    let c = (0..channels)
        .map(|i| ChannelSpec::new(i, rng.gen_range(5e6..20e6), false))
        .collect();
    NetworkState::new(0, u, c, (0..users).map(UserId).collect(), LinkParams::calibrated(), 0).unwrap()
}

fn random_policy(rng: &mut ChaCha8Rng) -> ToyPolicy {
    let mut p = ToyPolicy::uniform(8, 3, rng.gen_range(0.5..2.0));
    for t in &mut p.theta {
        *t = rng.gen_range(-1.5..1.5);
    }
    p
}

fn max_rel_error(analytic: &[f64], f: impl Fn(usize, f64) -> f64) -> f64 {
    analytic
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let n = (f(i, C4_FD_STEP) - f(i, -C4_FD_STEP)) / (2.0 * C4_FD_STEP);
            (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
        })
        .fold(0.0, f64::max)
}

fn shifted(p: &ToyPolicy, i: usize, d: f64) -> ToyPolicy {
    let mut q = p.clone();
    q.theta[i] += d;
    q
}

fn near_clip(g: &CandidateGroup, p: &ToyPolicy, r: &ToyPolicy, eps: f64) -> bool {
    g.candidates.iter().any(|c| {
        let ratio = (p.sequence_log_prob(&c.decisions) - r.sequence_log_prob(&c.decisions)).exp();
        (ratio - 1.0 - eps).abs() < 1e-3 || (ratio - 1.0 + eps).abs() < 1e-3
    })
}

fn grpo_mechanics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mean: f64 = 0.0;
    for _ in 0..1000 {
        let g = rng.gen_range(2..=16);
        let rewards: Vec<f64> = (0..g).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let adv = group_advantages(&rewards, 1e-8);
        worst_mean = worst_mean.max((adv.iter().sum::<f64>() / g as f64).abs());
    }

    let (mut worst_surrogate, mut worst_sft): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    while checked < C4_INSTANCES {
        let s = small_state(&mut rng, 2, 3);
        let policy = random_policy(&mut rng);
        let mut reference = policy.clone();
        for t in &mut reference.theta {
            *t += rng.gen_range(-0.3..0.3);
        }
        let mut group = sample_group(&policy, &s, 6, rng.gen()).unwrap();
        for c in &mut group.candidates {
            c.advantage = rng.gen_range(-2.0..2.0);
        }
        let beta = rng.gen_range(0.0..1.0);
        if near_clip(&group, &policy, &reference, 0.2) {
            continue;
        }
        let analytic = grpo_gradient(&group, &policy, &reference, 0.2, beta);
        worst_surrogate = worst_surrogate.max(max_rel_error(&analytic, |i, d| {
            grpo_objective(&group, &shifted(&policy, i, d), &reference, 0.2, beta).objective
        }));

        let pairs = vec![(s.clone(), group.candidates[0].raw_map.clone())];
        let analytic = sft_gradient(&policy, &pairs).unwrap();
        worst_sft = worst_sft.max(max_rel_error(&analytic, |i, d| {
            sft_log_likelihood(&shifted(&policy, i, d), &pairs).unwrap()
        }));
        checked += 1;
    }
    verdict(
        worst_mean <= C4_ADV_TOL && worst_surrogate <= C4_GRAD_REL_TOL && worst_sft <= C4_GRAD_REL_TOL,
        format!(
            "max |mean advantage| {worst_mean:.1e}; max rel. gradient error surrogate {worst_surrogate:.1e}, \
             SFT {worst_sft:.1e} over {C4_INSTANCES} 2x3 instances"
        ),
    )
}

fn learning_curve() -> Verdict {
    let env = calibrated(10, 15, 3);
    let weights = RewardWeights::default();
    let initial = ToyPolicy::uniform(8, 15, 1.0);
    let (mut improved, mut ordered) = (0, 0);
    let mut rows = Vec::new();
    for seed in 0..C5_RUNS {
        let run = |g: usize| {
            let cfg = TrainConfig {
                steps: C5_STEPS,
                group_size: g,
                seed,
                ..TrainConfig::default()
            };
            train(&initial, &env, &weights, &cfg).unwrap()
        };
        let g8 = run(8);
        let g4 = run(4);
        let (head, tail) = (g8.head_mean(C5_WINDOW), g8.tail_mean(C5_WINDOW));
        improved += usize::from(tail > head);
        let eval = |p| evaluate_policy(p, &env, &weights, C5_EVAL_SEED, C5_EVAL_SLOTS, C5_EVAL_SAMPLES).unwrap();
        let (e8, e4) = (eval(&g8.policy), eval(&g4.policy));
        ordered += usize::from(e4 <= e8);
        rows.push(format!("{head:.3}->{tail:.3}"));
    }
    verdict(
        improved >= C5_MIN_IMPROVED && ordered >= C5_MIN_G_ORDERED,
        format!(
            "tail > head in {improved}/{C5_RUNS} (need {C5_MIN_IMPROVED}); held-out G4 <= G8 in {ordered}/{C5_RUNS} \
             (need {C5_MIN_G_ORDERED}); G8 head->tail [{}]",
            rows.join(" ")
        ),
    )
}

fn reward_constants() -> Verdict {
    let w = RewardWeights::default();
    let users = vec![UserNode::new(0, 40.0, 0.0), UserNode::new(1, 80.0, 0.0)];
    let channels = vec![
        ChannelSpec::new(0, 10e6, false),
        ChannelSpec::new(1, 10e6, false),
        ChannelSpec::new(2, 10e6, true),
    ];
    let s = NetworkState::new(0, users, channels, vec![UserId(0), UserId(1)], LinkParams::calibrated(), 0).unwrap();
    let map = |pairs: &[(u32, u32)]| -> RawAction { pairs.iter().map(|&(u, c)| (UserId(u), ChannelId(c))).collect() };
    let thr = w.interference_threshold;

    let checks = [
        ("depth(0) = -5", reward_depth(0, &w) == -5.0),
        ("depth(512) = 0", reward_depth(512, &w) == 0.0),
        ("depth(4096) = 0", reward_depth(4096, &w) == 0.0),
        ("psi duplicate = 0", {
            let p = psi_penalty(&map(&[(0, 1), (1, 1)]), &s, thr);
            p == Psi::Duplicate && p.factor() == 0.0
        }),
        ("psi interference = 0.3", {
            let p = psi_penalty(&map(&[(0, 2), (1, 1)]), &s, thr);
            p == Psi::Interference && p.factor() == 0.3
        }),
        ("psi clean = 1", {
            let p = psi_penalty(&map(&[(0, 0), (1, 1)]), &s, thr);
            p == Psi::Clean && p.factor() == 1.0
        }),
        ("struct valid = 1.2", {
            let text = format!("```python\n{}\n```", render_action(&map(&[(0, 0), (1, 1)])));
            reward_struct(&parse_action(&text), &s, &w) == 1.2
        }),
        ("struct unparsable = 0", reward_struct(&parse_action("no mapping here"), &s, &w) == 0.0),
    ];
    let failed: Vec<_> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} exact checks", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn valid_rate_accounting() -> Verdict {
    let cfg = BenchConfig::from_json(
        &serde_json::json!({
            "scenarios": [{"id": "busy", "num_users": 30, "num_channels": 24, "k_active": 8,
                           "slots": C7_SLOTS, "occupied_fraction": 0.25}],
            "seeds": [0],
            "generation": {"group_size": C7_GROUP},
            "methods": [{"backend": "mock", "params": {
                "valid": C7_VALID, "duplicate_channel": 0.08, "occupied_channel": 0.07, "prose": 0.07}}]
        })
        .to_string(),
    )
    .unwrap();
    let report = run_benchmark(&cfg, &SolverRegistry::default(), &BackendRegistry::default()).unwrap();
    let r = &report.records[0];
    verdict(
        (r.valid_rate - C7_VALID).abs() <= C7_TOL && r.infeasible_deployments == 0 && r.candidates == 2000,
        format!(
            "valid_rate {:.4} over {} candidates (target {C7_VALID} +/- {C7_TOL}); infeasible deployments {}",
            r.valid_rate, r.candidates, r.infeasible_deployments
        ),
    )
}

fn time_equated() -> Verdict {
    let (u, c, k) = presets::SCALE_SHAPES[0].1;
    let s = Environment::new(calibrated(u, c, k), 8).unwrap().state(0).unwrap();
    let single = solve_grouped_hungarian(&s, C8_BUDGET, C8_GROUP_SIZE, 3, Some(1));
    // One full partition pass bounds any single block solve from above.
    let block = single.elapsed;
    let timed = solve_grouped_hungarian(&s, C8_BUDGET, C8_GROUP_SIZE, 3, None);
    verdict(
        timed.elapsed <= C8_BUDGET + block
            && timed.objective >= single.objective
            && is_feasible(&timed.allocation, &s).is_feasible(),
        format!(
            "elapsed {:.3} s <= {:.3} s + {:.4} s, {} passes, objective {:.6e} >= single pass {:.6e}",
            timed.elapsed.as_secs_f64(),
            C8_BUDGET.as_secs_f64(),
            block.as_secs_f64(),
            timed.iterations,
            timed.objective,
            single.objective
        ),
    )
}

fn serializer_budget() -> Verdict {
    let (u, c, k) = presets::SCALE_SHAPES[1].1;
    let s = Environment::new(calibrated(u, c, k), 9).unwrap().state(0).unwrap();
    let bundles: Vec<_> = C9_BUDGETS.iter().map(|&b| serialize(&s, b).unwrap()).collect();
    let within = bundles.iter().all(|b| b.token_estimate <= b.budget);
    let monotone = bundles.windows(2).all(|w| w[0].detail <= w[1].detail);
    verdict(
        within && monotone,
        bundles
            .iter()
            .map(|b| format!("{}: {} tokens, {}", b.budget, b.token_estimate, b.detail))
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn determinism() -> Verdict {
    let cfg = BenchConfig::from_json(
        &serde_json::json!({
            "presets": ["u5_c5_k1", "u10_c15_k3"],
            "scenarios": [{"id": "busy", "num_users": 20, "num_channels": 16, "k_active": 6,
                           "slots": 10, "occupied_fraction": 0.25}],
            "seeds": [0, 1, 2],
            "methods": [{"solver": "random"}, {"solver": "de"}, {"solver": "hungarian"},
                        {"solver": "grouped_hungarian", "params": {"group_size": 3, "max_passes": 1}},
                        {"backend": "toy"}, {"backend": "mock", "params": {"valid": 0.5, "prose": 0.5}}]
        })
        .to_string(),
    )
    .unwrap();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        run_benchmark(&cfg, &SolverRegistry::default(), &BackendRegistry::default())
            .unwrap()
            .write_to(dir.path())
            .unwrap();
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        (read("records.csv"), read("summary.csv"))
    };
    let (first, second) = (run(), run());
    verdict(
        first == second,
        format!("records.csv {} bytes, summary.csv {} bytes, identical: {}", first.0.len(), first.1.len(), first == second),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: u32, name: &str, limit: Duration, f: fn() -> Verdict| {
        let started = Instant::now();
        let v = f();
        let elapsed = started.elapsed();
        let in_time = elapsed <= limit;
        let passed = v.passed && in_time;
        all &= passed;
        println!(
            "criterion {n:>2} {name:<24} {} ({}; {:.2} s of {:.0} s)",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs_f64().ceil()
        );
    };
    report(1, "hungarian_optimality", C1_LIMIT, hungarian_optimality);
    report(2, "repair_soundness", C2_LIMIT, repair_soundness);
    report(3, "ordering_reproduction", C3_LIMIT, ordering_reproduction);
    report(4, "grpo_mechanics", C4_LIMIT, grpo_mechanics);
    report(5, "learning_curve", C5_LIMIT, learning_curve);
    report(6, "reward_constants", Duration::from_secs(1), reward_constants);
    report(7, "valid_rate_accounting", C7_LIMIT, valid_rate_accounting);
    report(8, "time_equated", C8_LIMIT, time_equated);
    report(9, "serializer_budget", C9_LIMIT, serializer_budget);
    report(10, "determinism", C10_LIMIT, determinism);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
