//! Metrics checked against per-definition recomputation and an independent
//! numerical oracle for the t distribution.

use netdilemma::agents::AgentSpec;
use netdilemma::game::{Action, GameParams};
use netdilemma::metrics::{
    assortment, assortment_series, class_samples, cooperation_series, relative_payoffs, student_t_two_sided,
    welch_t_test, Degenerate, MetricsError,
};
use netdilemma::runner::{run_experiment, ExperimentConfig, ExperimentResult, FailurePolicy, RunContext};
use netdilemma::topology::{circulant, TopologyMode, TopologySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ring_neighbors(n: usize, k: usize, i: usize) -> Vec<usize> {
    (1..=k / 2).flat_map(|d| [(i + d) % n, (i + n - d) % n]).collect()
}

fn bit(bits: u32, i: usize) -> bool {
    bits >> i & 1 == 1
}

/// Mean over cooperators of their cooperating-neighbor fraction minus the
/// same mean over defectors.
fn assortment_oracle(n: usize, k: usize, bits: u32) -> Option<f64> {
    let frac = |i: usize| {
        let nb = ring_neighbors(n, k, i);
        nb.iter().filter(|&&j| bit(bits, j)).count() as f64 / nb.len() as f64
    };
    let c: Vec<f64> = (0..n).filter(|&i| bit(bits, i)).map(frac).collect();
    let d: Vec<f64> = (0..n).filter(|&i| !bit(bits, i)).map(frac).collect();
    if c.is_empty() || d.is_empty() {
        return None;
    }
    Some(c.iter().sum::<f64>() / c.len() as f64 - d.iter().sum::<f64>() / d.len() as f64)
}

/// One repetition whose round `r` plays profile `r - 1` (as bits).
fn every_profile(n: usize, k: usize, bc: u32) -> ExperimentResult {
    let rounds = 1u32 << n;
    let agents = (0..n)
        .map(|i| {
            AgentSpec::replay(
                (0..rounds)
                    .map(|b| if bit(b, i) { Action::Cooperate } else { Action::Defect })
                    .collect(),
            )
        })
        .collect();
    let config = ExperimentConfig {
        topology: TopologySpec {
            n,
            k,
            mode: TopologyMode::FixedRing,
        },
        params: GameParams::new(bc).unwrap(),
        rounds,
        repetitions: 1,
        agents,
        master_seed: 0,
        failure_policy: FailurePolicy::FailRun,
        human_timeout_secs: 1.0,
        shuffle_labels: true,
        stimulus: None,
    };
    run_experiment(&config, &RunContext::default()).unwrap()
}

#[test]
fn assortment_matches_brute_force() {
    for n in [4usize, 6, 8] {
        for k in [2usize, 4, 6].into_iter().filter(|&k| k < n) {
            let graph = circulant(n, k).unwrap();
            for bits in 0..1u32 << n {
                let actions: Vec<Action> = (0..n)
                    .map(|i| if bit(bits, i) { Action::Cooperate } else { Action::Defect })
                    .collect();
                let got = assortment(&actions, &graph);
                let want = assortment_oracle(n, k, bits);
                match (got, want) {
                    (None, None) => {}
                    (Some(g), Some(w)) => {
                        assert!((g - w).abs() < 1e-12, "n={n} k={k} bits={bits:b}: {g} vs {w}");
                        assert!((-1.0..=1.0).contains(&g));
                    }
                    other => panic!("n={n} k={k} bits={bits:b}: {other:?}"),
                }
                // Rotating the profile around the ring is a graph automorphism.
                let rotated: Vec<Action> = (0..n).map(|i| actions[(i + 1) % n]).collect();
                assert_eq!(assortment(&rotated, &graph), got);
            }
        }
    }
}

#[test]
fn fixture_values() {
    use Action::{Cooperate as C, Defect as D};
    let ring8 = circulant(8, 2).unwrap();
    assert_eq!(assortment(&[C, D, C, D, C, D, C, D], &ring8), Some(-1.0));
    assert_eq!(assortment(&[C; 8], &ring8), None);
    assert_eq!(assortment(&[C, C, D, D], &circulant(4, 2).unwrap()), Some(0.0));
}

#[test]
fn series_and_shares_match_brute_force() {
    for (n, k) in [(4usize, 2usize), (6, 4), (8, 2), (8, 6)] {
        let bc = 4;
        let result = every_profile(n, k, bc);
        let rounds = 1u32 << n;

        let coop = cooperation_series(&result).unwrap();
        let assort = assortment_series(&result).unwrap();
        let payoffs = relative_payoffs(&result).unwrap();
        let mut total_c = 0;
        for bits in 0..rounds {
            let round = bits + 1;
            let c = (0..n).filter(|&i| bit(bits, i)).count();
            total_c += c;
            let point = coop.at(round).unwrap();
            assert_eq!(point.mean, c as f64 / n as f64);
            assert_eq!(point.se, None);
            match (assort.at(round).map(|p| p.mean), assortment_oracle(n, k, bits)) {
                (None, None) => {}
                (Some(g), Some(w)) => assert!((g - w).abs() < 1e-12),
                other => panic!("n={n} k={k} bits={bits:b}: {other:?}"),
            }

            // Relative payoffs straight from the payoff definition.
            let net: Vec<f64> = (0..n)
                .map(|i| {
                    let nb = ring_neighbors(n, k, i);
                    let gained = nb.iter().filter(|&&j| bit(bits, j)).count() as f64 * 10.0 * bc as f64;
                    let paid = if bit(bits, i) { 10.0 * nb.len() as f64 } else { 0.0 };
                    gained - paid
                })
                .collect();
            let mean = net.iter().sum::<f64>() / n as f64;
            let class = |coop: bool| {
                let v: Vec<f64> = (0..n).filter(|&i| bit(bits, i) == coop).map(|i| net[i] - mean).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let got_c = payoffs.cooperators.at(round).map(|p| p.mean);
            let got_d = payoffs.defectors.at(round).map(|p| p.mean);
            for (got, want) in [(got_c, class(true)), (got_d, class(false))] {
                match (got, want) {
                    (None, None) => {}
                    (Some(g), Some(w)) => assert!((g - w).abs() < 1e-9, "n={n} k={k} bits={bits:b}"),
                    other => panic!("n={n} k={k} bits={bits:b}: {other:?}"),
                }
            }
        }
        assert_eq!(payoffs.player_rounds.cooperate, total_c);
        assert_eq!(payoffs.player_rounds.defect, n * rounds as usize - total_c);
        // Every player cooperates in exactly half the rounds: ties count as C.
        assert_eq!(payoffs.players.cooperate, n);
    }
}

#[test]
fn relative_payoffs_sum_to_zero_each_round() {
    let result = every_profile(6, 2, 6);
    let rep = &result.repetitions[0];
    for record in &rep.records {
        let rel = netdilemma::metrics::relative_round(record);
        let sum: f64 = rel.iter().sum();
        assert!(sum.abs() < 1e-9, "round {}: {sum}", record.round);
    }
}

#[test]
fn class_shares_count_player_rounds() {
    // Ten players, six cooperating every round.
    let n = 10;
    let agents = (0..n)
        .map(|i| if i < 6 { AgentSpec::all_c() } else { AgentSpec::all_d() })
        .collect();
    let config = ExperimentConfig {
        topology: TopologySpec {
            n,
            k: 4,
            mode: TopologyMode::WellMixed,
        },
        params: GameParams::new(2).unwrap(),
        rounds: 7,
        repetitions: 3,
        agents,
        master_seed: 4,
        failure_policy: FailurePolicy::FailRun,
        human_timeout_secs: 1.0,
        shuffle_labels: true,
        stimulus: None,
    };
    let result = run_experiment(&config, &RunContext::default()).unwrap();
    let p = relative_payoffs(&result).unwrap();
    assert_eq!(p.player_rounds.cooperate, 6 * 7 * 3);
    assert_eq!(p.player_rounds.defect, 4 * 7 * 3);
    assert_eq!(p.player_rounds.defect_share(), 0.4);
    assert_eq!(p.players.defect_share(), 0.4);
    let (c, d) = class_samples(&result).unwrap();
    assert_eq!((c.len(), d.len()), (126, 84));
}

// ---------------------------------------------------------------------------
// Student t oracle. With x = sqrt(df) tan(theta) the t density becomes
// proportional to cos(theta)^(df - 1) on [0, pi/2), so the two-sided tail is
// a ratio of two finite integrals and needs no gamma function.

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, left, tol / 2.0, depth - 1) + adaptive(f, m, b, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    adaptive(f, a, b, simpson(f, a, b), 1e-15, 50)
}

fn oracle_two_sided(t: f64, df: f64) -> f64 {
    let f = |theta: f64| theta.cos().powf(df - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta_t = (t.abs() / df.sqrt()).atan();
    integrate(&f, theta_t, half_pi) / integrate(&f, 0.0, half_pi)
}

fn oracle_welch(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |s: &[f64]| {
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v / n, n)
    };
    let (ma, sa, na) = stats(a);
    let (mb, sb, nb) = stats(b);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, df, oracle_two_sided(t, df))
}

/// Two samples, then t, df and the two-sided p.
type Case = (&'static [f64], &'static [f64], f64, f64, f64);

/// Reference values computed offline at high precision.
const FROZEN: &[Case] = &[
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], -1.0, 8.0, 0.34659350708733416),
    (
        &[0.1, 0.4, 0.35, 0.8],
        &[1.2, 1.5, 0.9, 1.1, 1.6, 1.3, 2.0],
        -4.800578363621381,
        7.711351115743347,
        0.0015011787148303834,
    ),
    (
        &[10.0, 12.0, 11.0, 13.0, 40.0],
        &[1.0, 2.0, 1.0, 2.0],
        2.7403643610881914,
        4.020353637708883,
        0.05159846725741882,
    ),
    (
        &[1.0, 2.0, 3.0, 4.0, 5.0, 9.0],
        &[2.0, 3.0, 4.0, 5.0, 6.0],
        0.0,
        8.039867109634551,
        1.0,
    ),
];

#[test]
fn welch_matches_frozen_reference_values() {
    for &(a, b, t, df, p) in FROZEN {
        let r = welch_t_test(a, b).unwrap();
        assert!((r.t - t).abs() < 1e-12, "t {} vs {t}", r.t);
        assert!((r.df - df).abs() < 1e-9, "df {} vs {df}", r.df);
        assert!((r.p - p).abs() < 1e-9, "p {} vs {p}", r.p);
        // The quadrature oracle agrees with the frozen values too.
        assert!((oracle_welch(a, b).2 - p).abs() < 1e-9);
    }
}

#[test]
fn welch_matches_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let na = rng.random_range(2..40);
        let nb = rng.random_range(2..40);
        let shift: f64 = rng.random_range(-2.0..2.0);
        let spread: f64 = rng.random_range(0.1..5.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..nb).map(|_| shift + spread * rng.random::<f64>()).collect();
        let r = welch_t_test(&a, &b).unwrap();
        let (t, df, p) = oracle_welch(&a, &b);
        assert!((r.t - t).abs() <= 1e-9 * t.abs().max(1.0));
        assert!((r.df - df).abs() <= 1e-9 * df);
        assert!((r.p - p).abs() <= 1e-9, "t={t} df={df}: {} vs {p}", r.p);
    }
}

#[test]
fn student_t_grid_matches_oracle() {
    for df in [1.0, 1.5, 2.0, 3.7, 8.0, 25.0, 120.0, 1000.0] {
        for t in [0.01, 0.5, 1.0, 2.0, 3.5, 6.0, 15.0] {
            let got = student_t_two_sided(t, df);
            let want = oracle_two_sided(t, df);
            assert!((got - want).abs() <= 1e-9, "t={t} df={df}: {got} vs {want}");
        }
    }
}

#[test]
fn p_decreases_with_abs_t() {
    for df in [2.0, 9.5, 60.0] {
        let mut last = 1.0;
        for i in 1..200 {
            let p = student_t_two_sided(i as f64 * 0.05, df);
            assert!(p < last, "df={df} t={}", i as f64 * 0.05);
            last = p;
        }
    }
}

#[test]
fn welch_symmetry_and_scaling() {
    let a = [0.1, 0.4, 0.35, 0.8];
    let b = [1.2, 1.5, 0.9, 1.1, 1.6, 1.3, 2.0];
    let ab = welch_t_test(&a, &b).unwrap();
    let ba = welch_t_test(&b, &a).unwrap();
    assert_eq!(ab.t, -ba.t);
    assert_eq!((ab.df, ab.p), (ba.df, ba.p));
    // Powers of two scale every intermediate exactly.
    for c in [0.25, 2.0, 8.0, 1024.0] {
        let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
        let r = welch_t_test(&sa, &sb).unwrap();
        assert_eq!((r.t, r.df, r.p), (ab.t, ab.df, ab.p), "c={c}");
    }
    for c in [3.0, 0.1, 7.5e4] {
        let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
        let r = welch_t_test(&sa, &sb).unwrap();
        assert!((r.t - ab.t).abs() <= 1e-12 * ab.t.abs());
        assert!((r.p - ab.p).abs() <= 1e-12);
    }
}

#[test]
fn welch_input_errors_and_degenerate_flags() {
    assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(MetricsError::SampleTooSmall(1)));
    let r = welch_t_test(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
    assert_eq!((r.p, r.degenerate), (1.0, Some(Degenerate::EqualConstants)));
    let r = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
    assert_eq!((r.p, r.degenerate), (0.0, Some(Degenerate::DistinctConstants)));
    let same = [3.0, 1.0, 4.0, 1.0, 5.0];
    let r = welch_t_test(&same, &same).unwrap();
    assert_eq!((r.t, r.p, r.degenerate), (0.0, 1.0, None));
}
