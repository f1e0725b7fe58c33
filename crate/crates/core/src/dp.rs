//! Laplace noise, Report Noisy Min, the peeling mechanism and privacy
//! budget accounting.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::open_unit;

/// Maps a uniform `u ∈ (0, 1)` to a Laplace(0, `scale`) variate through the
/// inverse CDF.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let c = u - 0.5;
    -c.signum() * scale * (1.0 - 2.0 * c.abs()).ln()
}

/// One draw from the Laplace law with density `exp(-|x|/scale) / (2 scale)`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("Laplace scale must be positive, got {scale}")));
    }
    Ok(laplace_from_uniform(open_unit(rng), scale))
}

/// Noise applied by the selection mechanisms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Laplace noise with the given scale.
    Laplace { scale: f64 },
    /// **NOT PRIVATE.** No noise at all: selection is an exact argmin.
    /// Exists only to test the deterministic skeleton of the mechanisms.
    Disabled,
}

impl Noise {
    /// Noise for Report Noisy Min over values of the given sensitivity,
    /// `Lap(2Δ/ε)`.
    pub fn for_private_min(sensitivity: f64, epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        if sensitivity.is_nan() || sensitivity < 0.0 {
            return Err(Error::param(format!("sensitivity must be nonnegative, got {sensitivity}")));
        }
        if sensitivity == 0.0 {
            // Constant functions leak nothing; zero noise is exact and private.
            return Ok(Noise::Disabled);
        }
        Ok(Noise::Laplace { scale: 2.0 * sensitivity / epsilon })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Laplace { scale } => laplace_from_uniform(open_unit(rng), scale),
            Noise::Disabled => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Noise::Laplace { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::param(format!("Laplace scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }
}

/// Output of one Report Noisy Min call: the selected index and its value
/// re-noised with a fresh draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyCandidate {
    pub index: usize,
    pub noisy_value: f64,
}

/// Report Noisy Min over the entries of `values` not flagged in `removed`.
///
/// Every live entry gets independent noise; the argmin (smallest index on
/// ties) is returned together with its true value plus one fresh draw.
pub fn report_noisy_min<R: Rng + ?Sized>(
    values: &[f64],
    removed: &[bool],
    noise: Noise,
    rng: &mut R,
) -> Result<NoisyCandidate> {
    noise.validate()?;
    if values.len() != removed.len() {
        return Err(Error::param("exclusion mask length differs from values"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &gone)) in values.iter().zip(removed).enumerate() {
        if gone {
            continue;
        }
        let noisy = v + noise.draw(rng);
        if best.is_none_or(|(_, b)| noisy < b) {
            best = Some((j, noisy));
        }
    }
    let (index, _) = best.ok_or(Error::EmptyCandidates(values.len()))?;
    Ok(NoisyCandidate { index, noisy_value: values[index] + noise.draw(rng) })
}

/// Private Min with noise `Lap(2·sensitivity/ε)`; `epsilon = None` switches
/// noise off (**not private**, testing only).
pub fn private_min<R: Rng + ?Sized>(
    values: &[f64],
    removed: &[bool],
    sensitivity: f64,
    epsilon: Option<f64>,
    rng: &mut R,
) -> Result<NoisyCandidate> {
    let noise = match epsilon {
        Some(eps) => Noise::for_private_min(sensitivity, eps)?,
        None => Noise::Disabled,
    };
    report_noisy_min(values, removed, noise, rng)
}

/// The peeling mechanism: `m_prime` successive Report Noisy Min calls with
/// the given noise, removing each winner from later rounds.
///
/// Returned candidates are in selection order with distinct indices.
pub fn peel<R: Rng + ?Sized>(
    values: &[f64],
    m_prime: usize,
    noise: Noise,
    rng: &mut R,
) -> Result<Vec<NoisyCandidate>> {
    if m_prime > values.len() {
        return Err(Error::param(format!(
            "cannot peel {m_prime} candidates from {} values",
            values.len()
        )));
    }
    let mut removed = vec![false; values.len()];
    let mut out = Vec::with_capacity(m_prime);
    for _ in 0..m_prime {
        let c = report_noisy_min(values, &removed, noise, rng)?;
        removed[c.index] = true;
        out.push(c);
    }
    Ok(out)
}

/// Whether a calibrated budget lies inside the parameter box where the
/// `(ε, δ)` guarantee of the calibration formula is established
/// (`ε ≤ 0.5`, `δ ≤ 0.1`, `m' ≥ 10`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Guaranteed,
    /// The scale is still computed by the same formula, but no privacy claim
    /// is made for it.
    OutsideGuarantee,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub m_prime: usize,
    pub eta: f64,
    /// Laplace scale used by every peel round.
    pub lambda: f64,
    pub regime: Regime,
}

/// Noise scale `λ = η √(10 m' ln(1/δ)) / ε` making the whole peel
/// `(ε, δ)`-differentially private.
pub fn calibrate(epsilon: f64, delta: f64, m_prime: usize, eta: f64) -> Result<PrivacyBudget> {
    if delta == 0.0 {
        return Err(Error::Calibration("delta = 0 is unsupported: the calibration needs delta > 0".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Calibration(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Calibration(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Calibration(format!("eta must be positive and finite, got {eta}")));
    }
    if m_prime == 0 {
        return Err(Error::Calibration("m' must be at least 1".into()));
    }
    let lambda = eta * (10.0 * m_prime as f64 * (1.0 / delta).ln()).sqrt() / epsilon;
    let regime = if epsilon <= 0.5 && delta <= 0.1 && m_prime >= 10 {
        Regime::Guaranteed
    } else {
        Regime::OutsideGuarantee
    };
    Ok(PrivacyBudget { epsilon, delta, m_prime, eta, lambda, regime })
}

impl PrivacyBudget {
    /// Minimum scale the calibration formula demands for these parameters.
    pub fn required_lambda(&self) -> f64 {
        self.eta * (10.0 * self.m_prime as f64 * (1.0 / self.delta).ln()).sqrt() / self.epsilon
    }

    /// Checks `λ ≥ η √(10 m' ln(1/δ)) / ε` (up to rounding).
    pub fn is_valid(&self) -> bool {
        self.delta > 0.0
            && self.delta < 1.0
            && self.lambda.is_finite()
            && self.lambda >= self.required_lambda() * (1.0 - 1e-12)
    }

    /// Returns a copy using a larger noise scale. Smaller scales are rejected.
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        if lambda < self.required_lambda() * (1.0 - 1e-12) {
            return Err(Error::Calibration(format!(
                "lambda {lambda} is below the calibrated minimum {}",
                self.required_lambda()
            )));
        }
        Ok(PrivacyBudget { lambda, ..self })
    }

    pub fn noise(&self) -> Noise {
        Noise::Laplace { scale: self.lambda }
    }
}

/// Advanced composition of `l` mechanisms, each `(ε, δ)`-DP:
/// `(ε √(2 l ln(1/δ')) + l ε (e^ε − 1), l δ + δ')`.
pub fn advanced_composition(epsilon_each: f64, delta_each: f64, l: usize, delta_prime: f64) -> Result<(f64, f64)> {
    if delta_prime.is_nan() || delta_prime <= 0.0 {
        return Err(Error::param(format!("delta' must be positive, got {delta_prime}")));
    }
    if !(epsilon_each >= 0.0 && delta_each >= 0.0) {
        return Err(Error::param("per-mechanism epsilon and delta must be nonnegative"));
    }
    if l == 0 {
        return Err(Error::param("l must be at least 1"));
    }
    let l = l as f64;
    let eps = epsilon_each * (2.0 * l * (1.0 / delta_prime).ln()).sqrt() + l * epsilon_each * epsilon_each.exp_m1();
    Ok((eps, l * delta_each + delta_prime))
}

/// Basic composition: epsilons and deltas add.
pub fn basic_composition(epsilon_each: f64, delta_each: f64, l: usize) -> (f64, f64) {
    (l as f64 * epsilon_each, l as f64 * delta_each)
}

/// Concentration of `n` i.i.d. `Lap(λ)` draws at level `α`: with
/// probability ≥ 1 − α all exceed the first value, and with probability
/// ≥ 1 − α all have magnitude below the second.
pub fn laplace_concentration_bound(n: usize, lambda: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = n as f64;
    Ok((-lambda * (n / (2.0 * alpha)).ln(), lambda * (n / alpha).ln()))
}
