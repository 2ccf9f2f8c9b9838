//! Acceptance run: one PASS/FAIL line per criterion, each with its tolerance
//! and wall-clock budget. Criteria exercised through the `dmdp` binary use
//! its CSV output; the rest call the library directly.
//!
//! Exits non-zero only when a criterion fails that is not listed in
//! `KNOWN_DEVIATIONS` (those are documented in the README).

use std::process::Command;
use std::time::{Duration, Instant};

use delayed_mdp::delay::{augment_constant, augment_mtd, DelaySpec};
use delayed_mdp::fixtures::{belief_counterexample, maze_3x3, random_mdp, MazeConfig};
use delayed_mdp::learners::{dida_exact, dida_sampled, ucrl2_run, DidaConfig, Ucrl2Config};
use delayed_mdp::mdp::graph::policy_recurrent_classes;
use delayed_mdp::mdp::{gain_from_initial, optimal_gain, value_iteration};
use delayed_mdp::polis::{
    bias_bound_check, surrogate_gradient, surrogate_objective, EstimatorConfig, GradientForm,
    HyperPolicy, LifelongEnv, LifelongTrace, LinearDriftBandit, TraceEntry, VasicekTradingEnv,
};
use delayed_mdp::util::{l1, trial_rng};
use delayed_mdp::{FiniteMdp, StationaryPolicy};
use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Criteria expected to fail with the shipped defaults.
const KNOWN_DEVIATIONS: &[&str] = &["10b", "11b", "S1"];

struct Outcome {
    id: &'static str,
    pass: bool,
    informational: bool,
}

struct Runner {
    outcomes: Vec<Outcome>,
}

impl Runner {
    /// Runs `f`, which returns (pass, detail); a run over `budget` fails.
    fn check(
        &mut self,
        id: &'static str,
        what: &str,
        budget: Duration,
        f: impl FnOnce() -> (bool, String),
    ) {
        let start = Instant::now();
        let (ok, detail) = f();
        let took = start.elapsed();
        let pass = ok && took <= budget;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let known = if !pass && KNOWN_DEVIATIONS.contains(&id) {
            " (known deviation)"
        } else {
            ""
        };
        println!(
            "[{verdict}] {id:>3} {what}: {detail} [{:.2}s / {}s]{known}",
            took.as_secs_f64(),
            budget.as_secs()
        );
        self.outcomes.push(Outcome {
            id,
            pass,
            informational: false,
        });
    }

    fn info(&mut self, id: &'static str, what: &str, f: impl FnOnce() -> String) {
        let start = Instant::now();
        let detail = f();
        println!(
            "[INFO] {id:>3} {what}: {detail} [{:.2}s]",
            start.elapsed().as_secs_f64()
        );
        self.outcomes.push(Outcome {
            id,
            pass: true,
            informational: true,
        });
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn dmdp(args: &[&str]) -> (String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_dmdp"))
        .args(args)
        .env_remove("DMDP_OUT_DIR")
        .output()
        .expect("dmdp binary runs");
    (
        String::from_utf8(o.stdout).unwrap(),
        String::from_utf8(o.stderr).unwrap(),
    )
}

/// `quantity -> (value, expected)` from a counter-example CSV.
fn comparisons(csv: &str) -> Vec<(String, f64, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

fn counterexample(args: &[&str], tol: f64) -> (bool, String) {
    let (out, err) = dmdp(args);
    let rows = comparisons(&out);
    if rows.is_empty() {
        return (false, format!("no output: {err}"));
    }
    let ok = rows.iter().all(|(_, v, e)| (v - e).abs() <= tol);
    let detail = rows
        .iter()
        .map(|(q, v, e)| format!("{q} {v} (ref {e})"))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, format!("{detail}; tol {tol:e}"))
}

struct SuiteRows {
    rows: Vec<[f64; 4]>,
    violated: usize,
}

impl SuiteRows {
    fn max_lhs(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
    fn min_slack(&self) -> f64 {
        self.rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min)
    }
}

fn verify(suite: &str, extra: &[&str]) -> SuiteRows {
    let mut args = vec!["verify", suite];
    args.extend_from_slice(extra);
    let (out, err) = dmdp(&args);
    let mut rows = Vec::new();
    let mut violated = 0;
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        rows.push([
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
            f[4].parse().unwrap(),
            f[1].parse().unwrap(),
        ]);
        violated += usize::from(f[5] == "1");
    }
    assert!(!rows.is_empty(), "verify {suite} produced no rows: {err}");
    SuiteRows { rows, violated }
}

fn zero_violations(suite: &str, extra: &[&str], expected_rows: usize) -> (bool, String) {
    let r = verify(suite, extra);
    (
        r.violated == 0 && r.rows.len() == expected_rows,
        format!(
            "{} trials, {} violations, min slack {:.3e}",
            r.rows.len(),
            r.violated,
            r.min_slack()
        ),
    )
}

/// Per-seed cumulative reward and amplitude from `polis` stderr summaries.
fn polis_summaries(args: &[&str]) -> Vec<(f64, f64, f64)> {
    let (_, err) = dmdp(args);
    err.lines()
        .filter_map(|l| {
            let rest = l.split_once("cumulative reward ")?.1;
            let (reward, amp) = rest.split_once(", amplitude ")?;
            let (a0, a1) = amp.split_once(" -> ")?;
            Some((reward.parse().ok()?, a0.parse().ok()?, a1.parse().ok()?))
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn weakly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn negated(mdp: &FiniteMdp) -> FiniteMdp {
    let r: Vec<f64> = mdp.rewards().iter().map(|x| -x).collect();
    FiniteMdp::new_signed(
        mdp.n_states(),
        mdp.n_actions(),
        mdp.transitions().to_vec(),
        r,
        mdp.initial_dist().to_vec(),
        mdp.discount(),
    )
    .unwrap()
}

/// Random surrogate instance: window, hyper-policy and a trace of length `alpha + 3`.
fn gradient_instance(seed: u64) -> (LifelongTrace, HyperPolicy, EstimatorConfig) {
    let mut rng = trial_rng(931, seed);
    let dim = rng.random_range(1..3);
    let freqs: Vec<f64> = (0..rng.random_range(1..3))
        .map(|_| rng.random_range(0.05..0.5))
        .collect();
    let sigma: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
    let hp = HyperPolicy::new(dim, freqs, sigma).unwrap();
    let rho: Vec<f64> = (0..hp.rho.len())
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let hp = hp.with_rho(rho).unwrap();
    let alpha = rng.random_range(2..8);
    let cfg = EstimatorConfig {
        alpha,
        beta: rng.random_range(1..5),
        gamma: rng.random_range(0.5..1.0),
        omega: rng.random_range(0.5..1.0),
        lambda_reg: rng.random_range(0.0..2.0),
        delay: rng.random_range(0..alpha),
        ..Default::default()
    };
    let mut tr = LifelongTrace::new();
    for t in 0..cfg.alpha + 3 {
        let (theta, eps) = hp.sample(t as f64, &mut rng);
        tr.push(TraceEntry {
            t,
            theta,
            eps,
            reward: rng.random_range(-1.0..1.0),
        })
        .unwrap();
    }
    (tr, hp, cfg)
}

/// Relative error of the pathwise gradient against central differences.
fn gradient_fd_error(seed: u64) -> f64 {
    let (tr, hp, cfg) = gradient_instance(seed);
    let g = surrogate_gradient(&tr, &hp, &cfg, GradientForm::Pathwise).unwrap();
    let h = 1e-6;
    let fd: Vec<f64> = (0..hp.rho.len())
        .map(|k| {
            let (mut up, mut dn) = (hp.clone(), hp.clone());
            up.rho[k] += h;
            dn.rho[k] -= h;
            (surrogate_objective(&tr, &up, &cfg).unwrap()
                - surrogate_objective(&tr, &dn, &cfg).unwrap())
                / (2.0 * h)
        })
        .collect();
    let err = fd
        .iter()
        .zip(&g)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
    err / norm.max(1e-8)
}

fn dida_gap(seed: u64, samples: usize) -> f64 {
    let mdp = random_mdp(3, 2, 0.0, &mut trial_rng(905, 0)).unwrap();
    let expert = StationaryPolicy::random(3, 2, &mut trial_rng(905, 1));
    let exact = dida_exact(&mdp, 1, &expert).unwrap();
    let cfg = DidaConfig {
        iterations: 1,
        samples_per_iter: samples,
        ..Default::default()
    };
    let fit = dida_sampled(&mdp, 1, &expert, &cfg, &mut trial_rng(906, seed))
        .unwrap()
        .policy;
    (0..exact.n_states())
        .map(|x| l1(fit.probs(x), exact.probs(x)))
        .sum::<f64>()
        / exact.n_states() as f64
}

fn main() {
    let mut run = Runner {
        outcomes: Vec::new(),
    };

    run.check(
        "1",
        "belief counter-example (augmented 13.75, belief class 12.5)",
        secs(1),
        || counterexample(&["counterexample", "belief"], 1e-9),
    );
    run.check(
        "2",
        "MTD counter-example at epsilon 0.1 (0.55 vs 0.5)",
        secs(1),
        || counterexample(&["counterexample", "mtd", "--epsilon", "0.1"], 1e-9),
    );
    run.check(
        "3",
        "delayed performance-difference identity, 100 instances, max residual <= 1e-8",
        secs(30),
        || {
            let r = verify("pdl", &["--trials", "100"]);
            (
                r.violated == 0 && r.rows.len() == 100 && r.max_lhs() <= 1e-8,
                format!("max residual {:.3e}", r.max_lhs()),
            )
        },
    );
    run.check(
        "4a",
        "optimal return non-increasing in delay, 100 per pair (0,1),(1,2)",
        secs(150),
        || zero_violations("monotonicity", &["--trials", "200"], 200),
    );
    run.check(
        "4b",
        "return range nested in delay, 100 per pair (0,1),(1,2)",
        secs(150),
        || zero_violations("variance-range", &["--trials", "200"], 200),
    );
    run.check(
        "5",
        "time-Lipschitz bound, 100 fixtures x d in {1,2,3}, slack >= -1e-9",
        secs(300),
        || zero_violations("tlc", &["--trials", "100"], 100),
    );
    run.check(
        "6",
        "stochastic-delay bound, 50 fixtures, slack >= -1e-9",
        secs(300),
        || zero_violations("stochastic-delay", &["--trials", "50"], 50),
    );
    run.check(
        "7",
        "past-state MTD gains equal base gains within 1e-9, 50 instances",
        secs(120),
        || zero_violations("psm", &["--trials", "50"], 50),
    );

    let budget8 = Instant::now();
    run.check(
        "8a",
        "ISM: repeating the newest action gives >= |A| recurrent classes",
        secs(40),
        || {
            for seed in 0..20 {
                let mut rng = trial_rng(908, seed);
                let na = rng.random_range(2..=3);
                let mdp = random_mdp(3, na, 0.0, &mut rng).unwrap();
                let mut lambda = delayed_mdp::util::dirichlet_ones(3, &mut rng);
                lambda[0] = 0.0;
                let s: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= s);
                let aug = augment_mtd(&mdp, &DelaySpec::MtdIsm { lambda }).unwrap();
                let newest: Vec<usize> = (0..aug.n_states())
                    .map(|i| *aug.state(i).action_buffer.last().unwrap())
                    .collect();
                let classes = policy_recurrent_classes(
                    &aug.mdp,
                    &StationaryPolicy::deterministic(&newest, na),
                );
                if classes.len() < na {
                    return (
                        false,
                        format!("seed {seed}: {} classes for {na} actions", classes.len()),
                    );
                }
            }
            (
                true,
                "20 instances, every one multichain with >= |A| classes".into(),
            )
        },
    );
    run.check(
        "8b",
        "ISM augmentation of communicating bases is communicating, 50 instances",
        secs(40),
        || zero_violations("communicating", &["--trials", "50"], 50),
    );
    run.check(
        "8c",
        "maze ISM diameter >= d_max - 3 + log_4 9, d_max 1..3",
        secs(40),
        || {
            let r = verify("diameter", &["--trials", "3"]);
            let detail = r
                .rows
                .iter()
                .map(|x| format!("{:.3} >= {:.3}", x[1], x[0]))
                .collect::<Vec<_>>()
                .join(", ");
            (r.violated == 0 && r.rows.len() == 3, detail)
        },
    );
    println!(
        "      criterion 8 total {:.2}s / 120s",
        budget8.elapsed().as_secs_f64()
    );

    let budget9 = Instant::now();
    run.check(
        "9a",
        "stationary bias within 3 standard errors, 1e4 reps",
        secs(100),
        || {
            let env = LinearDriftBandit::new(0.2, 0.0, 1.0, 0.5, 0);
            let hp = HyperPolicy::new(1, vec![0.1], vec![1.0])
                .unwrap()
                .with_rho(vec![0.3, 0.0, 0.0])
                .unwrap();
            let cfg = EstimatorConfig {
                alpha: 20,
                beta: 5,
                gamma: 0.9,
                omega: 1.0,
                ..Default::default()
            };
            let r = bias_bound_check(&env, &hp, &cfg, 100, 10_000, &mut trial_rng(909, 0)).unwrap();
            let se = r.constants["std_error"];
            (
                r.lhs <= 3.0 * se,
                format!("|bias| {:.4e} vs 3 se {:.4e}", r.lhs, 3.0 * se),
            )
        },
    );
    run.check(
        "9b",
        "drifting-bandit bias under its bound (omega 0.9 and 1), 1e4 reps",
        secs(100),
        || {
            let r = verify("bias", &["--trials", "2", "--reps", "10000"]);
            let detail = r
                .rows
                .iter()
                .map(|x| format!("{:.4} <= {:.4}", x[0], x[1]))
                .collect::<Vec<_>>()
                .join(", ");
            (r.violated == 0 && r.rows.len() == 2, detail)
        },
    );
    run.check(
        "9c",
        "estimator variance under its bound, stationary and drifting, 1e4 reps",
        secs(150),
        || {
            let r = verify("variance", &["--trials", "2", "--reps", "10000"]);
            let detail = r
                .rows
                .iter()
                .map(|x| format!("{:.4} <= {:.4}", x[0], x[1]))
                .collect::<Vec<_>>()
                .join(", ");
            (r.violated == 0 && r.rows.len() == 2, detail)
        },
    );
    run.check(
        "9d",
        "lower-bound coverage >= 1 - delta (binomial 95%), delta 0.1/0.2/0.5",
        secs(150),
        || {
            let mut ok = true;
            let mut parts = Vec::new();
            for delta in ["0.1", "0.2", "0.5"] {
                let r = verify(
                    "coverage",
                    &["--trials", "2", "--delta", delta, "--reps", "2000"],
                );
                ok &= r.violated == 0 && r.rows.len() == 2;
                let rates: Vec<String> = r.rows.iter().map(|x| format!("{:.3}", x[1])).collect();
                parts.push(format!("delta {delta}: {}", rates.join("/")));
            }
            (ok, parts.join(", "))
        },
    );
    run.check(
        "9e",
        "surrogate gradient vs finite differences, 100 instances, rel. error <= 1e-5",
        secs(60),
        || {
            let worst = (0..100).map(gradient_fd_error).fold(0.0, f64::max);
            (worst <= 1e-5, format!("worst relative error {worst:.3e}"))
        },
    );
    run.check(
        "9f",
        "discrete-mixture Renyi bound, 100 instances",
        secs(60),
        || zero_violations("renyi", &["--trials", "100"], 100),
    );
    println!(
        "      criterion 9 total {:.2}s / 600s",
        budget9.elapsed().as_secs_f64()
    );

    let budget10 = Instant::now();
    let maze = maze_3x3(&MazeConfig::default()).unwrap();
    let ucrl2 = Ucrl2Config {
        horizon: 100_000,
        ..Default::default()
    };
    let mut fast_trace = None;
    run.check(
        "10a",
        "UCRL2 maze regret lambda (1,0) < (0,1) at T = 1e5, 10 seeds, sign test p < 0.05",
        secs(300),
        || {
            let finals = |lambda: Vec<f64>| -> Vec<f64> {
                let aug = augment_mtd(&maze, &DelaySpec::MtdIsm { lambda }).unwrap();
                (0..10)
                    .map(|k| {
                        ucrl2_run(&aug.mdp, &ucrl2, &mut trial_rng(0, k))
                            .unwrap()
                            .final_regret()
                    })
                    .collect()
            };
            let (fast, slow) = (finals(vec![1.0, 0.0]), finals(vec![0.0, 1.0]));
            let wins = fast.iter().zip(&slow).filter(|(a, b)| a < b).count() as u64;
            let p = Binomial::new(0.5, 10).unwrap().sf(wins.saturating_sub(1));
            fast_trace = Some(mean(&fast));
            (
                p < 0.05,
                format!(
                    "{wins}/10 seeds ordered, p = {p:.2e}, means {:.0} vs {:.0}",
                    mean(&fast),
                    mean(&slow)
                ),
            )
        },
    );

    let deltas = [0usize, 1, 5, 10];
    run.check(
        "10b",
        "POLIS Vasicek mean return weakly decreasing in delay 0/1/5/10, 3 seeds",
        secs(600),
        || {
            let means: Vec<f64> = deltas
                .iter()
                .map(|d| {
                    let s = polis_summaries(&[
                        "polis",
                        "vasicek",
                        "--delay",
                        &d.to_string(),
                        "--seeds",
                        "3",
                    ]);
                    mean(&s.iter().map(|x| x.0).collect::<Vec<_>>())
                })
                .collect();
            (weakly_decreasing(&means), format!("means {:.1?}", means))
        },
    );
    run.info("10b", "Vasicek mean return over 12 seeds", || {
        let means: Vec<f64> = deltas
            .iter()
            .map(|d| {
                let s = polis_summaries(&[
                    "polis",
                    "vasicek",
                    "--delay",
                    &d.to_string(),
                    "--seeds",
                    "12",
                ]);
                mean(&s.iter().map(|x| x.0).collect::<Vec<_>>())
            })
            .collect();
        format!(
            "means {:.1?}, weakly decreasing: {}",
            means,
            weakly_decreasing(&means)
        )
    });
    run.info(
        "10b",
        "Vasicek undelayed POLIS vs best constant policy (grid, 3 seeds)",
        || {
            let polis: Vec<f64> = polis_summaries(&["polis", "vasicek", "--seeds", "3"])
                .iter()
                .map(|x| x.0)
                .collect();
            let best = (0..3u64)
                .map(|k| {
                    let mut env = VasicekTradingEnv::new(0, k);
                    for t in 0..2000 {
                        env.step(t, &[0.0, 0.0]).unwrap();
                    }
                    let mut best = f64::NEG_INFINITY;
                    for i in -20..=20 {
                        for j in -4..=4 {
                            let th = vec![0.5 * i as f64, 0.25 * j as f64];
                            let total: f64 =
                                env.replay(0, 1999, &|_| th.clone()).unwrap().iter().sum();
                            best = best.max(total);
                        }
                    }
                    best
                })
                .collect::<Vec<_>>();
            format!(
                "POLIS mean {:.1}, best constant mean {:.1}",
                mean(&polis),
                mean(&best)
            )
        },
    );
    run.check(
        "10c",
        "sine bandit amplitude collapses under lambda_reg 100 (<= 5% of start)",
        secs(300),
        || {
            let strong = polis_summaries(&[
                "polis",
                "sine-bandit",
                "--lambda-reg",
                "100",
                "--seeds",
                "3",
            ]);
            let free =
                polis_summaries(&["polis", "sine-bandit", "--lambda-reg", "0", "--seeds", "3"]);
            let collapsed = !strong.is_empty() && strong.iter().all(|(_, a0, a1)| *a1 <= 0.05 * a0);
            let end = |s: &[(f64, f64, f64)]| mean(&s.iter().map(|x| x.2).collect::<Vec<_>>());
            (
                collapsed,
                format!(
                    "final amplitude {:.4} (lambda_reg 100) vs {:.4} (lambda_reg 0)",
                    end(&strong),
                    end(&free)
                ),
            )
        },
    );
    println!(
        "      criterion 10 total {:.2}s / 1200s",
        budget10.elapsed().as_secs_f64()
    );

    let budget11 = Instant::now();
    run.check(
        "11a",
        "sampled DIDA L1 gap shrinks over 1e3/1e4/1e5 samples on >= 8/10 seeds",
        secs(200),
        || {
            let monotone = (0..10)
                .filter(|&seed| {
                    let g: Vec<f64> = [1_000, 10_000, 100_000]
                        .iter()
                        .map(|&n| dida_gap(seed, n))
                        .collect();
                    g[0] > g[1] && g[1] > g[2]
                })
                .count();
            (monotone >= 8, format!("{monotone}/10 seeds monotone"))
        },
    );
    run.check(
        "11b",
        "DIDA return on the belief fixture reaches 12.5 +- 0.05",
        secs(100),
        || {
            let fx = belief_counterexample();
            let aug = augment_constant(&fx.mdp, fx.delay).unwrap();
            // terminals are absorbing, so take the expert from discounted value iteration
            let (_, expert) = value_iteration(&fx.mdp, 1e-12).unwrap();
            let exact =
                gain_from_initial(&aug.mdp, &dida_exact(&fx.mdp, fx.delay, &expert).unwrap())
                    .unwrap();
            let cfg = DidaConfig {
                iterations: 10,
                samples_per_iter: 20_000,
                ..Default::default()
            };
            let sampled = dida_sampled(&fx.mdp, fx.delay, &expert, &cfg, &mut trial_rng(911, 0))
                .unwrap()
                .policy;
            let sampled = gain_from_initial(&aug.mdp, &sampled).unwrap();
            let ok = (exact - 12.5).abs() <= 0.05 && (sampled - 12.5).abs() <= 0.05;
            (
                ok,
                format!("exact-target return {exact:.4}, sampled return {sampled:.4}"),
            )
        },
    );
    run.info(
        "11b",
        "greedy readout of the exact DIDA target on the belief fixture",
        || {
            let fx = belief_counterexample();
            let aug = augment_constant(&fx.mdp, fx.delay).unwrap();
            let (_, expert) = value_iteration(&fx.mdp, 1e-12).unwrap();
            let target = dida_exact(&fx.mdp, fx.delay, &expert).unwrap();
            let modes: Vec<usize> = (0..target.n_states()).map(|x| target.mode(x)).collect();
            let greedy = StationaryPolicy::deterministic(&modes, target.n_actions());
            format!(
                "return {:.4}",
                gain_from_initial(&aug.mdp, &greedy).unwrap()
            )
        },
    );
    println!(
        "      criterion 11 total {:.2}s / 300s",
        budget11.elapsed().as_secs_f64()
    );

    run.check(
        "S1",
        "UCRL2 maze regret(1e5)/1e5 below 0.1 (rho* - rho_worst)",
        secs(60),
        || {
            let (rho_star, _) = optimal_gain(&maze, 1e-12).unwrap();
            let rho_worst = -optimal_gain(&negated(&maze), 1e-12).unwrap().0;
            let target = 0.1 * (rho_star - rho_worst);
            let per_step = fast_trace.unwrap_or(f64::NAN) / 1e5;
            (
                per_step < target,
                format!("regret/T {per_step:.4} vs {target:.4} (lambda (1,0), 10-seed mean)"),
            )
        },
    );

    let failed: Vec<&str> = run
        .outcomes
        .iter()
        .filter(|o| !o.informational && !o.pass)
        .map(|o| o.id)
        .collect();
    let passed = run
        .outcomes
        .iter()
        .filter(|o| !o.informational && o.pass)
        .count();
    println!(
        "acceptance: {passed} passed, {} failed {:?}",
        failed.len(),
        failed
    );
    let unexpected: Vec<&&str> = failed
        .iter()
        .filter(|id| !KNOWN_DEVIATIONS.contains(id))
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
