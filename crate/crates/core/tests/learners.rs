use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sset_core::learners::*;
use sset_core::replay::{BufferConfig, ReplayBuffer, Transition};
use sset_core::theory::{value_iteration, TabularMdp};

/// Fills a uniform buffer from a generative model: every step draws the
/// state-action pair uniformly.
fn generative_buffer(mdp: &TabularMdp, n: usize, rng: &mut ChaCha8Rng) -> ReplayBuffer<usize> {
    let mut buf = ReplayBuffer::new(Vec::new(), BufferConfig::uniform(n)).unwrap();
    for i in 0..n {
        let s = rng.gen_range(0..mdp.n_states());
        let a = rng.gen_range(0..mdp.n_actions());
        let (s2, r) = mdp.sample_step(s, a, rng);
        buf.insert(Transition::new(s, a, r, s2, mdp.is_terminal(s2)));
        if i % 50 == 49 {
            buf.end_episode();
        }
    }
    buf
}

#[test]
fn tabular_converges_on_random_mdp_suite() {
    let (ns, na) = (5, 2);
    let pairs = (ns * na) as f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(ns, na, 3, 0.7, 50, &mut rng);
        let mut buf = generative_buffer(&mdp, 200_000, &mut rng);
        let config = TargetQConfig {
            outer: 30,
            inner: 30_000,
            schedule: StepSizeSchedule::new(pairs, pairs).unwrap(),
            gamma: mdp.gamma,
            batch: 1,
        };
        let q = target_q_learning(&mut buf, ns, na, &config, &mut rng).unwrap();
        let err = q.sup_distance(&value_iteration(&mdp, 1e-12).q);
        assert!(err < 0.05, "seed {seed}: sup error {err}");
    }
}

#[test]
fn three_state_chain_matches_value_iteration() {
    let mut mdp = TabularMdp::new(3, 2, 0.9, 30);
    // Action 1 advances, action 0 stays; reward 1 for staying at the last state.
    for s in 0..3 {
        mdp.add_outcome(s, 0, s, 1.0, if s == 2 { 1.0 } else { 0.0 });
        mdp.add_outcome(s, 1, (s + 1).min(2), 1.0, 0.0);
    }
    mdp.initial[0] = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut buf = generative_buffer(&mdp, 6_000, &mut rng);
    let config = TargetQConfig {
        outer: 200,
        inner: 600,
        schedule: StepSizeSchedule::new(6.0, 6.0).unwrap(),
        gamma: 0.9,
        batch: 1,
    };
    let q = target_q_learning(&mut buf, 3, 2, &config, &mut rng).unwrap();
    let err = q.sup_distance(&value_iteration(&mdp, 1e-12).q);
    assert!(err < 1e-2, "sup error {err}");
}

#[test]
fn single_state_reaches_geometric_sum() {
    let mut mdp = TabularMdp::new(1, 1, 0.5, 10);
    mdp.add_outcome(0, 0, 0, 1.0, 1.0);
    mdp.initial[0] = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut buf = generative_buffer(&mdp, 100, &mut rng);
    let config = TargetQConfig {
        outer: 50,
        inner: 500,
        schedule: StepSizeSchedule::new(1.0, 1.0).unwrap(),
        gamma: 0.5,
        batch: 1,
    };
    let q = target_q_learning(&mut buf, 1, 1, &config, &mut rng).unwrap();
    assert!((q.get(0, 0) - 2.0).abs() < 0.01, "{}", q.get(0, 0));

    let zero = TargetQConfig { outer: 0, ..config };
    assert_eq!(target_q_learning(&mut buf, 1, 1, &zero, &mut rng).unwrap().sum(), 0.0);
    let mut empty = ReplayBuffer::new(Vec::new(), BufferConfig::uniform(4)).unwrap();
    assert!(matches!(
        target_q_learning(&mut empty, 1, 1, &config, &mut rng),
        Err(LearnerError::EmptyBuffer)
    ));
}

#[test]
fn epsilon_greedy_frequencies() {
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let values = [0.2, 0.9, 0.1];
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[epsilon_greedy(&values, 1.0, &mut rng)] += 1;
    }
    let sigma = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 / 3.0).abs() < 3.0 * sigma, "{counts:?}");
    }

    let p = 1.0 - 0.3 + 0.3 / 3.0;
    let greedy = (0..draws)
        .filter(|_| epsilon_greedy(&values, 0.3, &mut rng) == 1)
        .count();
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    assert!((greedy as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{greedy}");
}

/// Central differences of the fixed-target loss, one parameter at a time.
fn numeric_gradient(net: &mut MlpValueNet, batch: &[DdqnSample<'_>], targets: &[f64], h: f64) -> Vec<f64> {
    let n = net.online.params().len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let base = net.online.params()[i];
        net.online.params_mut()[i] = base + h;
        let up = net.loss_with_targets(batch, targets);
        net.online.params_mut()[i] = base - h;
        let down = net.loss_with_targets(batch, targets);
        net.online.params_mut()[i] = base;
        out[i] = (up - down) / (2.0 * h);
    }
    out
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let input = rng.gen_range(2..6);
        let actions = rng.gen_range(2..4);
        let sizes = if trial % 2 == 0 {
            vec![input, 4, actions]
        } else {
            vec![input, 4, 3, actions]
        };
        let mut net = MlpValueNet::new(&sizes, &mut rng);
        // Redraw inputs that sit next to a ReLU kink, where differences are undefined.
        let states: Vec<Vec<f64>> = (0..8)
            .map(|_| loop {
                let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let margin = net
                    .online
                    .pre_activations(&x)
                    .iter()
                    .flatten()
                    .fold(f64::INFINITY, |m, z| m.min(z.abs()));
                if margin > 1e-3 {
                    break x;
                }
            })
            .collect();
        let batch: Vec<DdqnSample> = (0..4)
            .map(|i| DdqnSample {
                state: &states[2 * i],
                action: rng.gen_range(0..actions),
                reward: rng.gen_range(-1.0..1.0),
                next_state: &states[2 * i + 1],
                done: rng.gen_bool(0.3),
                weight: rng.gen_range(0.1..2.0),
            })
            .collect();
        let targets = net.td_targets(&batch, 0.9);
        let mut analytic = vec![0.0; net.online.params().len()];
        net.loss_and_gradient(&batch, &targets, &mut analytic);
        let numeric = numeric_gradient(&mut net, &batch, &targets, 1e-5);
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let tol = 1e-4 * a.abs().max(n.abs()) + 1e-8;
            assert!((a - n).abs() <= tol, "trial {trial} param {i}: analytic {a} numeric {n}");
        }
    }
}
