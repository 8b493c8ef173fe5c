//! Monte Carlo checks of the oversampling bound and of the bias correction,
//! run against a replay buffer filled by behavior-policy episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dp::value_iteration;
use super::events::behavior_mu;
use super::mdp::{Policy, TabularMdp};
use super::rates::tau_bound;
use super::TheoryError;
use crate::replay::{
    AllocationMode, BiasMode, BufferConfig, EpisodeView, EventSpec, ReplayBuffer, TableConfig,
    Transition,
};

/// Fewest draws accepted per estimate.
pub const MIN_DRAWS: usize = 10_000;

/// Runs `episodes` behavior episodes into `buffer`.
pub fn fill_buffer<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    behavior: &Policy,
    buffer: &mut ReplayBuffer<usize>,
    episodes: usize,
    rng: &mut R,
) {
    for _ in 0..episodes {
        let mut s = mdp.sample_initial(rng);
        for _ in 0..mdp.horizon {
            let a = behavior.sample(s, rng);
            let (next, r) = mdp.sample_step(s, a, rng);
            let done = mdp.is_terminal(next);
            buffer.insert(Transition::new(s, a, r, next, done));
            s = next;
            if done {
                break;
            }
        }
        buffer.end_episode();
    }
}

/// Event specs that fire when the next state lies in a fixed set.
pub fn state_events(sets: &[Vec<usize>], taus: &[usize]) -> Vec<EventSpec<usize>> {
    sets.iter()
        .zip(taus)
        .enumerate()
        .map(|(i, (set, &tau))| {
            let set = set.clone();
            EventSpec::new(
                format!("states-{i}"),
                tau,
                move |t: &Transition<usize>, _: EpisodeView<'_, usize>| set.contains(&t.next_state),
            )
        })
        .collect()
}

fn stratified_buffer(
    specs: Vec<EventSpec<usize>>,
    eta: f64,
    capacity: usize,
    bias_mode: BiasMode,
) -> Result<ReplayBuffer<usize>, TheoryError> {
    let n = specs.len();
    let mut tables = vec![TableConfig::new(1.0 - eta, capacity, 1)];
    tables.extend((0..n).map(|_| TableConfig::new(eta / n as f64, capacity, 1)));
    let config = BufferConfig::new(tables)
        .with_allocation(AllocationMode::Multinomial)
        .with_bias_mode(bias_mode);
    Ok(ReplayBuffer::new(specs, config)?)
}

fn state_histogram<'a>(items: impl Iterator<Item = &'a Transition<usize>>, n: usize) -> Vec<u64> {
    let mut h = vec![0u64; n];
    for t in items {
        h[t.state] += 1;
    }
    h
}

fn binomial_sigma(p: f64, draws: usize) -> f64 {
    (p * (1.0 - p) / draws as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct OversamplingSetup {
    /// One entry per event table: the states whose entry fires the event.
    pub event_states: Vec<Vec<usize>>,
    pub taus: Vec<usize>,
    pub eta: f64,
    pub m: u32,
    pub episodes: usize,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCheck {
    pub state: usize,
    /// Monte Carlo `P(s ~ combined)`.
    pub lhs: f64,
    /// `(1 - eta)^-m` times Monte Carlo `P(s ~ default)`.
    pub rhs: f64,
    pub sigma: f64,
    /// Exact mixture probability computed from table contents.
    pub exact_lhs: f64,
    /// Exact default-table probability times the factor.
    pub exact_rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// A history length exceeds the bound, so the inequality is not asserted.
    PreconditionViolated,
}

#[derive(Debug, Clone)]
pub struct OversamplingReport {
    pub mu: f64,
    pub factor: f64,
    pub bounds: Vec<f64>,
    pub states: Vec<StateCheck>,
    pub verdict: Verdict,
}

/// Checks `P(s ~ combined) >= (1 - eta)^-m P(s ~ default)` for every state
/// stored in an event table, each side estimated from `draws` samples.
///
/// `mu` is the largest behavior density of any event state.
pub fn verify_oversampling(
    mdp: &TabularMdp,
    behavior: &Policy,
    setup: &OversamplingSetup,
) -> Result<OversamplingReport, TheoryError> {
    if setup.draws < MIN_DRAWS {
        return Err(TheoryError::InsufficientDraws {
            got: setup.draws,
            min: MIN_DRAWS,
        });
    }
    if !(0.0..1.0).contains(&setup.eta) || setup.event_states.len() != setup.taus.len() || setup.taus.is_empty() {
        return Err(TheoryError::Domain("need eta in [0, 1) and one tau per event set".into()));
    }
    mdp.validate()?;
    let n_events = setup.taus.len();
    let all_events: Vec<usize> = setup.event_states.iter().flatten().copied().collect();
    let mu = behavior_mu(mdp, behavior, &all_events);
    let m = setup.m as f64;
    let bounds: Vec<f64> = (0..n_events).map(|_| tau_bound(m, setup.eta, n_events, mu)).collect();
    let precondition = setup.taus.iter().zip(&bounds).all(|(&t, &b)| (t as f64) <= b);

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let capacity = setup.episodes * mdp.horizon.max(1);
    let mut buffer = stratified_buffer(
        state_events(&setup.event_states, &setup.taus),
        setup.eta,
        capacity,
        BiasMode::None,
    )?;
    fill_buffer(mdp, behavior, &mut buffer, setup.episodes, &mut rng);

    let ns = mdp.n_states();
    let tables: Vec<Vec<u64>> = (0..=n_events)
        .map(|i| state_histogram(buffer.table_transitions(i).into_iter(), ns))
        .collect();
    let sizes: Vec<f64> = tables.iter().map(|h| h.iter().sum::<u64>() as f64).collect();
    let etas: Vec<f64> = std::iter::once(1.0 - setup.eta)
        .chain((0..n_events).map(|_| setup.eta / n_events as f64))
        .collect();
    let eligible: Vec<bool> = sizes.iter().map(|&n| n > 0.0).collect();
    let weights = crate::replay::renormalize(&etas, &eligible).unwrap_or_else(|| vec![1.0]);

    // Combined-buffer draws through the buffer's own sampler.
    let mut lhs_hits = vec![0u64; ns];
    let mut remaining = setup.draws;
    while remaining > 0 {
        let batch = remaining.min(4096);
        for item in buffer.sample_batch(batch, &mut rng)?.items {
            lhs_hits[item.transition().state] += 1;
        }
        remaining -= batch;
    }
    // Default-table draws, uniform over its contents.
    let default: Vec<usize> = buffer.table_transitions(0).iter().map(|t| t.state).collect();
    let mut rhs_hits = vec![0u64; ns];
    for _ in 0..setup.draws {
        rhs_hits[default[rng.gen_range(0..default.len())]] += 1;
    }

    let factor = (1.0 - setup.eta).powf(-m);
    let draws = setup.draws as f64;
    let mut states = Vec::new();
    for s in 0..ns {
        if !tables[1..].iter().any(|h| h[s] > 0) {
            continue;
        }
        let p_lhs = lhs_hits[s] as f64 / draws;
        let p_rhs = rhs_hits[s] as f64 / draws;
        let sigma = binomial_sigma(p_lhs, setup.draws).hypot(factor * binomial_sigma(p_rhs, setup.draws));
        let exact_lhs: f64 = tables
            .iter()
            .zip(&sizes)
            .zip(&weights)
            .filter(|((_, &size), _)| size > 0.0)
            .map(|((h, &size), &w)| w * h[s] as f64 / size)
            .sum();
        let exact_rhs = factor * tables[0][s] as f64 / sizes[0];
        let lhs = p_lhs;
        let rhs = factor * p_rhs;
        states.push(StateCheck {
            state: s,
            lhs,
            rhs,
            sigma,
            exact_lhs,
            exact_rhs,
            pass: lhs >= rhs - 3.0 * sigma,
        });
    }
    let verdict = if !precondition {
        Verdict::PreconditionViolated
    } else if states.iter().all(|c| c.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(OversamplingReport {
        mu,
        factor,
        bounds,
        states,
        verdict,
    })
}

/// One member of the randomized corridor suite: a five-cell corridor with a
/// left-drifting behavior policy, the goal as the only event, one table with
/// a single step of history, `eta = 0.3` and `m` taken as the floor of the
/// exact exponent.
pub fn corridor_case(seed: u64, episodes: usize, draws: usize) -> Result<(TabularMdp, Policy, OversamplingSetup), TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let right: f64 = rng.gen_range(0.2..0.45);
    let horizon = rng.gen_range(12..30);
    let mdp = TabularMdp::corridor(5, 0.9, horizon);
    let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0 - right, right]).collect();
    let behavior = Policy::from_rows(&rows)?;
    let eta = 0.3;
    let tau = 1;
    let mu = behavior_mu(&mdp, &behavior, &[4]);
    let m = super::rates::m_exact(eta, 1, tau as f64, mu)?.floor().max(0.0) as u32;
    let setup = OversamplingSetup {
        event_states: vec![vec![4]],
        taus: vec![tau],
        eta,
        m,
        episodes,
        draws,
        seed,
    };
    Ok((mdp, behavior, setup))
}

#[derive(Debug, Clone)]
pub struct BiasSetup {
    pub event_states: Vec<usize>,
    pub tau: usize,
    pub eta: f64,
    pub episodes: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BiasReport {
    /// Mean of `w * y` over stratified draws.
    pub weighted_mean: f64,
    /// Mean of `y` over stratified draws with no weights.
    pub unweighted_mean: f64,
    /// Mean of `y` over uniform default-table draws.
    pub default_mean: f64,
    /// Mean importance weight over stratified draws.
    pub mean_weight: f64,
}

impl BiasReport {
    pub fn gap(&self) -> f64 {
        (self.weighted_mean - self.default_mean).abs()
    }
}

/// Compares the importance-weighted mean Bellman target over stratified
/// draws with the plain mean over default-table draws. Targets bootstrap
/// from the optimal values.
pub fn verify_bias_correction(
    mdp: &TabularMdp,
    behavior: &Policy,
    setup: &BiasSetup,
) -> Result<BiasReport, TheoryError> {
    if setup.samples < MIN_DRAWS {
        return Err(TheoryError::InsufficientDraws {
            got: setup.samples,
            min: MIN_DRAWS,
        });
    }
    if !(setup.eta > 0.0 && setup.eta < 1.0) {
        return Err(TheoryError::Domain(format!("eta must lie in (0, 1), got {}", setup.eta)));
    }
    mdp.validate()?;
    let na = mdp.n_actions();
    let sol = value_iteration(mdp, 1e-12);
    let v: Vec<f64> = sol
        .q
        .chunks(na)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let target = |t: &Transition<usize>| {
        t.reward + if t.done { 0.0 } else { mdp.gamma * v[t.next_state] }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let capacity = setup.episodes * mdp.horizon.max(1);
    let mut buffer = stratified_buffer(
        state_events(std::slice::from_ref(&setup.event_states), &[setup.tau]),
        setup.eta,
        capacity,
        BiasMode::DiscreteCount,
    )?;
    fill_buffer(mdp, behavior, &mut buffer, setup.episodes, &mut rng);

    let (mut wy, mut y, mut w) = (0.0, 0.0, 0.0);
    let mut remaining = setup.samples;
    while remaining > 0 {
        let batch = remaining.min(4096);
        for item in buffer.sample_batch(batch, &mut rng)?.items {
            let t = target(item.transition());
            wy += item.weight * t;
            y += t;
            w += item.weight;
        }
        remaining -= batch;
    }
    let default: Vec<&Transition<usize>> = buffer.table_transitions(0);
    let mut dy = 0.0;
    for _ in 0..setup.samples {
        dy += target(default[rng.gen_range(0..default.len())]);
    }
    let n = setup.samples as f64;
    Ok(BiasReport {
        weighted_mean: wy / n,
        unweighted_mean: y / n,
        default_mean: dy / n,
        mean_weight: w / n,
    })
}
