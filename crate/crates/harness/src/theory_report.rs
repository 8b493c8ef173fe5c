//! Text report of the numerical theory checks.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sset_core::theory::{
    corridor_case, lambert_w0, m_asym, m_exact, sample_complexity, tau_bound, verify_bias_correction,
    verify_oversampling, BiasSetup, Policy, TabularMdp, Verdict,
};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Lemma1,
    Lemma2,
    Lambert,
    Complexity,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        Ok(match name {
            "all" => Suite::All,
            "lemma1" => Suite::Lemma1,
            "lemma2" => Suite::Lemma2,
            "lambert" => Suite::Lambert,
            "complexity" => Suite::Complexity,
            _ => return Err(HarnessError::Config(format!("unknown suite {name:?}"))),
        })
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, suite: &'static str, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { suite, name: name.into(), pass, detail: detail.into() });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} [{}] {}: {}", c.suite, c.name, c.detail)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Sizes of the Monte Carlo checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub corridor_seeds: u64,
    pub corridor_episodes: usize,
    pub draws: usize,
    pub bias_episodes: usize,
    pub bias_samples: usize,
    pub random_cases: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            corridor_seeds: 10,
            corridor_episodes: 10_000,
            draws: 1_000_000,
            bias_episodes: 20_000,
            bias_samples: 100_000,
            random_cases: 100,
        }
    }
}

pub fn verify_theory(suite: Suite, budget: &Budget) -> Result<Report, HarnessError> {
    let err = |e: sset_core::theory::TheoryError| HarnessError::Run(e.to_string());
    let mut report = Report::default();

    if suite.includes(Suite::Lemma1) {
        for seed in 0..budget.corridor_seeds {
            let (mdp, behavior, setup) = corridor_case(seed, budget.corridor_episodes, budget.draws).map_err(err)?;
            let r = verify_oversampling(&mdp, &behavior, &setup).map_err(err)?;
            let worst = r
                .states
                .iter()
                .map(|s| (s.lhs - s.rhs) / s.sigma.max(f64::MIN_POSITIVE))
                .fold(f64::INFINITY, f64::min);
            report.push(
                "lemma1",
                format!("corridor seed {seed}"),
                r.verdict == Verdict::Pass,
                format!(
                    "m={} mu={:.3e} factor={:.4} states={} worst margin {:.2} sigma, {} draws",
                    setup.m,
                    r.mu,
                    r.factor,
                    r.states.len(),
                    worst,
                    setup.draws
                ),
            );
        }
    }

    if suite.includes(Suite::Lemma2) {
        let mdp = TabularMdp::two_outcome(0.9);
        let setup = BiasSetup {
            event_states: vec![1],
            tau: 1,
            eta: 0.1,
            episodes: budget.bias_episodes,
            samples: budget.bias_samples,
            seed: 6,
        };
        let r = verify_bias_correction(&mdp, &Policy::uniform(3, 1), &setup).map_err(err)?;
        report.push(
            "lemma2",
            "two equiprobable terminals, eta 0.1",
            r.gap() < 1e-2,
            format!(
                "weighted {:.5} vs default {:.5} (gap {:.2e}); unweighted {:.5}; mean weight {:.4}",
                r.weighted_mean,
                r.default_mean,
                r.gap(),
                r.unweighted_mean,
                r.mean_weight
            ),
        );
    }

    if suite.includes(Suite::Lambert) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for _ in 0..budget.random_cases {
            let eta = rng.gen_range(0.01..0.99);
            let n = rng.gen_range(1..10usize);
            let tau = rng.gen_range(1..500) as f64;
            let mu = 10f64.powf(rng.gen_range(-8.0..-0.5));
            let m = m_exact(eta, n, tau, mu).map_err(err)?;
            worst = worst.max((tau_bound(m, eta, n, mu) / tau - 1.0).abs());
        }
        report.push(
            "lambert",
            "exponent round trip",
            worst < 1e-9,
            format!("{} cases, max relative error {worst:.2e}", budget.random_cases),
        );

        let eta = 1.0 - (-1.0f64).exp();
        let ratio = m_exact(eta, 1, 10.0, 1e-8).map_err(err)? / m_asym(10.0, 1e-8).map_err(err)?;
        report.push(
            "lambert",
            "asymptote at mu 1e-8",
            (0.9..=1.1).contains(&ratio),
            format!("m_exact / m_asym = {ratio:.4} (tau 10, n 1, ln(1/(1-eta)) = 1)"),
        );

        let mut smallest = f64::INFINITY;
        for mu in [1e-2, 1e-3, 1e-4, 1e-6] {
            smallest = smallest.min(m_exact(0.5, 1, 1.0, mu).map_err(err)?);
        }
        report.push(
            "lambert",
            "oversampling exponent above 1",
            smallest > 1.0,
            format!("min m over mu <= 0.01 at eta 0.5, n 1, tau 1: {smallest:.4}"),
        );

        let w = lambert_w0(1.0).map_err(err)?;
        report.push("lambert", "omega constant", (w - 0.567_143_290_409_783_8).abs() < 1e-14, format!("W(1) = {w:.16}"));
    }

    if suite.includes(Suite::Complexity) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..budget.random_cases {
            let gamma: f64 = rng.gen_range(0.01..0.999);
            let eps: f64 = 10f64.powf(rng.gen_range(-3.0..0.0));
            let l: f64 = rng.gen_range(0.01..1.0);
            let c: f64 = rng.gen_range(0.001..=l);
            let h = 1.0 - gamma;
            let expected = 832.0 * gamma * gamma * (4.0 / (h * eps)).ln() * l / (h.powi(5) * eps * eps * c.powi(3));
            let got = sample_complexity(gamma, eps, c, l).map_err(err)?;
            worst = worst.max((got / expected - 1.0).abs());
        }
        report.push(
            "complexity",
            "formula",
            worst < 1e-9,
            format!("{} cases, max relative error {worst:.2e}", budget.random_cases),
        );
        report.notes.push("sample complexity uses the natural logarithm".into());
    }
    Ok(report)
}
