use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sset_core::replay::{
    largest_remainder, renormalize, AllocationMode, BufferConfig, EpisodeView, EventSpec,
    ReplayBuffer, SumTree, TableConfig, Transition,
};

/// Brute-force model: per table, the (episode, step) ids routed to it,
/// truncated to the last kappa entries.
fn model_tables(
    episodes: &[Vec<usize>],
    fires: &dyn Fn(usize, usize) -> bool,
    taus: &[usize],
    kappas: &[usize],
) -> Vec<Vec<(u64, u64)>> {
    let mut tables: Vec<Vec<(u64, u64)>> = vec![Vec::new(); taus.len() + 1];
    for (ep, states) in episodes.iter().enumerate() {
        let mut prev: Vec<Option<usize>> = vec![None; taus.len()];
        for (t, &s) in states.iter().enumerate() {
            tables[0].push((ep as u64, t as u64));
            for (i, &tau) in taus.iter().enumerate() {
                if fires(i, s) {
                    let lo = [t + 1 - tau.min(t + 1), prev[i].map_or(0, |p| p + 1)]
                        .into_iter()
                        .max()
                        .unwrap();
                    for k in lo..=t {
                        tables[i + 1].push((ep as u64, k as u64));
                    }
                    prev[i] = Some(t);
                }
            }
        }
    }
    tables
        .into_iter()
        .zip(kappas)
        .map(|(v, &k)| v[v.len().saturating_sub(k)..].to_vec())
        .collect()
}

fn fires(i: usize, s: usize) -> bool {
    s % (3 + 2 * i) == 0
}

fn build(taus: &[usize], kappas: &[usize]) -> ReplayBuffer<usize> {
    let specs = taus
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            EventSpec::new(
                format!("mod{}", 3 + 2 * i),
                tau,
                move |t: &Transition<usize>, _: EpisodeView<'_, usize>| fires(i, t.state),
            )
        })
        .collect();
    let n = taus.len() + 1;
    let tables = kappas
        .iter()
        .map(|&k| TableConfig::new(1.0 / n as f64, k, 0))
        .collect();
    ReplayBuffer::new(specs, BufferConfig::new(tables)).unwrap()
}

fn ids(buffer: &ReplayBuffer<usize>, table: usize) -> Vec<(u64, u64)> {
    buffer
        .table_transitions(table)
        .iter()
        .map(|t| (t.episode_id, t.step_index))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tables_match_list_model(
        episodes in prop::collection::vec(prop::collection::vec(0usize..40, 1..30), 1..8),
        taus in prop::collection::vec(1usize..12, 0..3),
        kappa_seed in prop::collection::vec(1usize..60, 4),
    ) {
        let kappas: Vec<usize> = kappa_seed[..taus.len() + 1].to_vec();
        let mut buffer = build(&taus, &kappas);
        for states in &episodes {
            for &s in states {
                buffer.insert(Transition::new(s, 0, 0.0, s, false));
            }
            buffer.end_episode();
        }
        let model = model_tables(&episodes, &fires, &taus, &kappas);
        for (i, expected) in model.iter().enumerate() {
            prop_assert_eq!(&ids(&buffer, i), expected);
        }
        for (stats, expected) in buffer.table_stats().iter().zip(&model) {
            prop_assert!(stats.size <= stats.capacity);
            prop_assert_eq!(stats.size, expected.len());
        }
    }

    #[test]
    fn history_capture_matches_rescan(
        states in prop::collection::vec(0usize..20, 1..60),
        tau in 1usize..15,
    ) {
        // Unbounded capacity: the event table holds exactly the union of windows.
        let mut buffer = build(&[tau], &[1000, 1000]);
        for &s in &states {
            buffer.insert(Transition::new(s, 0, 0.0, s, false));
        }
        let mut expected = std::collections::BTreeSet::new();
        let mut prev: Option<usize> = None;
        for (t, &s) in states.iter().enumerate() {
            if fires(0, s) {
                let lo = (t + 1).saturating_sub(tau).max(prev.map_or(0, |p| p + 1));
                expected.extend(lo..=t);
                prev = Some(t);
            }
        }
        let got: Vec<usize> = ids(&buffer, 1).iter().map(|&(_, k)| k as usize).collect();
        let unique: std::collections::BTreeSet<usize> = got.iter().copied().collect();
        prop_assert_eq!(unique.len(), got.len(), "no step sent twice");
        prop_assert_eq!(unique, expected);
    }

    #[test]
    fn allocation_sums_to_batch(
        etas in prop::collection::vec(0.0f64..1.0, 1..7),
        eligible in prop::collection::vec(any::<bool>(), 7),
        batch in 1usize..300,
    ) {
        let mut eligible = eligible[..etas.len()].to_vec();
        eligible[0] = true;
        let mut etas = etas;
        etas[0] += 0.01;
        let w = renormalize(&etas, &eligible).unwrap();
        let counts = largest_remainder(&w, batch);
        prop_assert_eq!(counts.iter().sum::<usize>(), batch);
        for (i, &c) in counts.iter().enumerate() {
            if w[i] == 0.0 {
                prop_assert_eq!(c, 0);
            }
            let quota = w[i] * batch as f64;
            prop_assert!((c as f64 - quota).abs() <= 1.0 + w.iter().filter(|x| **x > 0.0).count() as f64);
        }
    }
}

#[test]
fn multinomial_fractions_converge() {
    let specs = vec![EventSpec::new(
        "even",
        3,
        |t: &Transition<usize>, _: EpisodeView<'_, usize>| t.state % 2 == 0,
    )];
    let cfg = BufferConfig::new(vec![TableConfig::new(0.7, 500, 1), TableConfig::new(0.3, 500, 1)])
        .with_allocation(AllocationMode::Multinomial);
    let mut buffer = ReplayBuffer::new(specs, cfg).unwrap();
    for s in 0..200 {
        buffer.insert(Transition::new(s, 0, 0.0, s, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batches = 2000;
    let batch = 32;
    let mut event_items = 0usize;
    for _ in 0..batches {
        let b = buffer.sample_batch(batch, &mut rng).unwrap();
        assert_eq!(b.counts.iter().sum::<usize>(), batch);
        event_items += b.counts[1];
    }
    let n = (batches * batch) as f64;
    let p = 0.3;
    let sigma = (p * (1.0 - p) / n).sqrt();
    assert!((event_items as f64 / n - p).abs() < 3.0 * sigma);
}

fn linear_scan(leaves: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in leaves.iter().enumerate() {
        if u < acc + p {
            return i;
        }
        acc += p;
    }
    leaves.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[test]
fn sum_tree_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for capacity in [1usize, 2, 3, 7, 16, 33, 64] {
        let mut tree = SumTree::new(capacity);
        let mut leaves = vec![0.0; tree.capacity()];
        for _ in 0..2_000 {
            let leaf = rng.gen_range(0..capacity);
            let p = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..10.0) };
            tree.set(leaf, p).unwrap();
            leaves[leaf] = p;
            if tree.total() > 0.0 {
                let u = rng.gen::<f64>() * tree.total();
                let cum: f64 = leaves.iter().sum();
                assert!((tree.total() - cum).abs() <= 1e-9 * cum.max(1.0));
                assert_eq!(tree.find_prefix(u), linear_scan(&leaves, u));
            }
        }
    }
}

fn per_ratio(exponent: f64, errors: [f64; 2], draws: usize, seed: u64) -> f64 {
    let cfg = BufferConfig::uniform(2).with_priorities(exponent);
    let mut buffer: ReplayBuffer<usize> = ReplayBuffer::new(vec![], cfg).unwrap();
    buffer.insert(Transition::new(0, 0, 0.0, 0, false));
    buffer.insert(Transition::new(1, 0, 0.0, 1, false));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves: Vec<_> = {
        let b = buffer.sample_batch(64, &mut rng).unwrap();
        let mut l: Vec<_> = b.items.iter().map(|i| i.leaf).collect();
        l.sort_by_key(|l| l.slot);
        l.dedup();
        l
    };
    assert_eq!(leaves.len(), 2);
    buffer.update_priority(leaves[0], errors[0]).unwrap();
    buffer.update_priority(leaves[1], errors[1]).unwrap();
    let mut hits = [0usize; 2];
    let batch = 1000;
    for _ in 0..draws / batch {
        for item in buffer.sample_batch(batch, &mut rng).unwrap().items {
            hits[item.transition().state] += 1;
        }
    }
    hits[1] as f64 / hits[0] as f64
}

#[test]
fn per_sampling_ratio_linear_priorities() {
    // Exact ratio from the sum-tree distribution: (3 + eps) / (1 + eps).
    let ratio = per_ratio(1.0, [1.0, 3.0], 1_000_000, 1);
    assert!((ratio / 3.0 - 1.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn per_sampling_ratio_table_one_exponent() {
    let expected = ((2.0 + 1e-6) / (1.0 + 1e-6f64)).powf(0.65);
    assert!((expected - 1.569).abs() < 1e-3);
    let ratio = per_ratio(0.65, [1.0, 2.0], 1_000_000, 2);
    assert!((ratio / expected - 1.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn single_prioritized_leaf_always_drawn() {
    let cfg = BufferConfig::uniform(8).with_priorities(1.0);
    let mut buffer: ReplayBuffer<usize> = ReplayBuffer::new(vec![], cfg).unwrap();
    for s in 0..8 {
        buffer.insert(Transition::new(s, 0, 0.0, s, false));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut leaves: Vec<_> = Vec::new();
    while leaves.len() < 8 {
        for item in buffer.sample_batch(32, &mut rng).unwrap().items {
            if !leaves.iter().any(|l: &sset_core::replay::LeafId| l.slot == item.leaf.slot) {
                leaves.push(item.leaf);
            }
        }
    }
    // Priority floor keeps zero-error leaves at eps; leaf 5 dominates.
    for leaf in &leaves {
        let err = if leaf.slot == 5 { 5.0 } else { 0.0 };
        buffer.update_priority(*leaf, err).unwrap();
    }
    let hits5 = (0..100)
        .flat_map(|_| buffer.sample_batch(100, &mut rng).unwrap().items)
        .filter(|i| i.transition().state == 5)
        .count();
    assert!(hits5 >= 9_999);
}
