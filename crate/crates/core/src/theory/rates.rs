//! Closed-form rates: the Lambert-W oversampling exponent, the history-length
//! bound and the uniform-replay sample complexity.

use super::TheoryError;

/// Principal branch `W0(x)` for `x >= 0`, by Halley iteration.
pub fn lambert_w0(x: f64) -> Result<f64, TheoryError> {
    if !x.is_finite() || x < 0.0 {
        return Err(TheoryError::Domain(format!("lambert_w0 needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < 3.0 {
        x.ln_1p()
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}

fn check_open_unit(name: &str, v: f64) -> Result<(), TheoryError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(TheoryError::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Real `m` at which the history bound holds with equality:
/// `tau = (1 - eta)^m / ((m + 1) n mu)`.
pub fn m_exact(eta: f64, n: usize, tau: f64, mu: f64) -> Result<f64, TheoryError> {
    check_open_unit("eta", eta)?;
    check_open_unit("mu", mu)?;
    if n == 0 || tau.is_nan() || tau < 1.0 {
        return Err(TheoryError::Domain(format!("need n >= 1 and tau >= 1, got n={n}, tau={tau}")));
    }
    let ln_a = -(1.0 - eta).ln();
    let a = 1.0 / (1.0 - eta);
    let w = lambert_w0(a * ln_a / (n as f64 * tau * mu))?;
    Ok(w / ln_a - 1.0)
}

/// Small-`mu` asymptote `-ln(tau mu) - ln(-ln(tau mu))`. Needs `tau mu < 1`.
pub fn m_asym(tau: f64, mu: f64) -> Result<f64, TheoryError> {
    let x = tau * mu;
    if !(x > 0.0 && x < 1.0) {
        return Err(TheoryError::Domain(format!("asymptote needs 0 < tau*mu < 1, got {x}")));
    }
    let l = -x.ln();
    Ok(l - l.ln())
}

/// Largest history length for which the oversampling factor `(1 - eta)^-m` holds.
pub fn tau_bound(m: f64, eta: f64, n: usize, mu: f64) -> f64 {
    (1.0 - eta).powf(m) / ((m + 1.0) * n as f64 * mu)
}

/// Samples needed by target Q-learning with replay to reach accuracy `epsilon`,
/// given minimum and maximum per-pair sampling probabilities `c` and `l`.
/// Uses the natural logarithm.
pub fn sample_complexity(gamma: f64, epsilon: f64, c: f64, l: f64) -> Result<f64, TheoryError> {
    check_open_unit("gamma", gamma)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(TheoryError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(c > 0.0 && c <= l && l <= 1.0) {
        return Err(TheoryError::Domain(format!("need 0 < c <= l <= 1, got c={c}, l={l}")));
    }
    let h = 1.0 - gamma;
    let lead = 832.0 * gamma * gamma / (h.powi(5) * epsilon * epsilon);
    Ok(lead * (4.0 / (h * epsilon)).ln() * l / c.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn w0_reference_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        let omega = lambert_w0(1.0).unwrap();
        assert!((omega - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!((omega * omega.exp() - 1.0).abs() < 1e-12);
        assert!(lambert_w0(-0.1).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn w0_residual_over_decades() {
        for k in -12..=12 {
            let x = 10f64.powi(k);
            let w = lambert_w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x.max(1.0), "x={x}");
        }
    }

    #[test]
    fn tau_bound_examples() {
        assert!((tau_bound(0.0, 0.3, 2, 0.05) - 10.0).abs() < 1e-12);
        assert!((tau_bound(1.0, 0.5, 2, 0.01) - 12.5).abs() < 1e-12);
        for m in 0..10 {
            assert!(tau_bound(m as f64 + 1.0, 0.2, 1, 0.01) < tau_bound(m as f64, 0.2, 1, 0.01));
        }
    }

    #[test]
    fn exponent_exceeds_one_for_small_mu() {
        for mu in [0.01, 1e-3, 1e-6] {
            assert!(m_exact(0.5, 1, 1.0, mu).unwrap() > 1.0);
        }
    }

    #[test]
    fn complexity_reference_value() {
        let n = sample_complexity(0.5, 0.1, 1.0, 1.0).unwrap();
        assert!((n / 2.916e6 - 1.0).abs() < 1e-3);
        assert!(sample_complexity(1.0, 0.1, 1.0, 1.0).is_err());
        assert!(sample_complexity(0.5, 0.1, 0.5, 0.2).is_err());
    }
}
