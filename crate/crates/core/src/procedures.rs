//! BHq step-up and step-down, the compliance check, and PrivateBHq.

use rand::Rng;

use crate::dp::{peel, Noise, NoisyCandidate, PrivacyBudget};
use crate::error::{Error, Result};
use crate::pvalue::{log_truncate, Dataset, SensitivityProfile, TestFamily};

/// Hypotheses rejected by a procedure (0-based, ascending), plus the number
/// of rejected true nulls when truth labels are known.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RejectionSet {
    rejected: Vec<usize>,
    false_rejections: Option<usize>,
}

impl RejectionSet {
    pub fn new(mut rejected: Vec<usize>) -> Self {
        rejected.sort_unstable();
        rejected.dedup();
        RejectionSet { rejected, false_rejections: None }
    }

    pub fn empty() -> Self {
        RejectionSet::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.rejected
    }

    /// `R`, the number of rejections.
    pub fn count(&self) -> usize {
        self.rejected.len()
    }

    /// `V`, the number of rejected true nulls, if labels were attached.
    pub fn false_rejections(&self) -> Option<usize> {
        self.false_rejections
    }

    pub fn contains(&self, index: usize) -> bool {
        self.rejected.binary_search(&index).is_ok()
    }

    /// Attaches truth labels (`true` = true null) and computes `V`.
    pub fn with_truth(mut self, is_null: &[bool]) -> Result<Self> {
        if let Some(&bad) = self.rejected.iter().find(|&&i| i >= is_null.len()) {
            return Err(Error::param(format!("rejected index {bad} has no truth label")));
        }
        self.false_rejections = Some(self.rejected.iter().filter(|&&i| is_null[i]).count());
        Ok(self)
    }
}

fn validate_pvalues(p: &[f64]) -> Result<()> {
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param(format!("p-value {i} is {v}, outside [0, 1]")));
    }
    Ok(())
}

fn validate_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(format!("level q must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// The BHq critical values `q j / m` for `j = 1..=m`.
pub fn bhq_critical_values(q: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|j| q * j as f64 / m as f64).collect()
}

/// Indices sorted by p-value, ties broken by the lower index.
fn rank_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    order
}

/// BHq step-up: rejects the `j*` smallest p-values where
/// `j* = max{j : p_(j) ≤ q j / m}`.
pub fn bhq_step_up(p: &[f64], q: f64) -> Result<RejectionSet> {
    validate_level(q)?;
    validate_pvalues(p)?;
    let order = rank_order(p);
    let crit = bhq_critical_values(q, p.len());
    let j_star = (0..p.len()).rev().find(|&r| p[order[r]] <= crit[r]).map_or(0, |r| r + 1);
    Ok(RejectionSet::new(order[..j_star].to_vec()))
}

/// BHq step-down: walks up from the smallest p-value and stops at the first
/// `p_(j) > q j / m`.
pub fn bhq_step_down(p: &[f64], q: f64) -> Result<RejectionSet> {
    validate_level(q)?;
    validate_pvalues(p)?;
    let order = rank_order(p);
    let crit = bhq_critical_values(q, p.len());
    let j_star = (0..p.len()).find(|&r| p[order[r]] > crit[r]).unwrap_or(p.len());
    Ok(RejectionSet::new(order[..j_star].to_vec()))
}

/// Compliance with cutoffs `q_1 ≤ … ≤ q_m`: every rejected p-value is at
/// most `q_R`. An empty rejection set is compliant.
pub fn is_compliant(rejections: &RejectionSet, p: &[f64], cutoffs: &[f64]) -> bool {
    let r = rejections.count();
    if r == 0 {
        return true;
    }
    if r > cutoffs.len() || rejections.indices().iter().any(|&i| i >= p.len()) {
        return false;
    }
    let q_r = cutoffs[r - 1];
    rejections.indices().iter().all(|&i| p[i] <= q_r)
}

/// Strictly increasing, finite log-scale cutoffs `γ_1 < … < γ_{m'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSchedule {
    gammas: Vec<f64>,
}

impl CutoffSchedule {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.iter().any(|g| !g.is_finite()) {
            return Err(Error::param("cutoffs must be finite"));
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("cutoffs must be strictly increasing"));
        }
        Ok(CutoffSchedule { gammas })
    }

    /// `ln(q j / m)` for `j = 1..=len`: the log BHq line, i.e. the cutoffs
    /// with no privacy penalty.
    pub fn log_bhq(q: f64, m: usize, len: usize) -> Result<Self> {
        CutoffSchedule::new((1..=len).map(|j| (q * j as f64 / m as f64).ln()).collect())
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }
}

/// Cutoffs `γ_j = ln(q j / m) − λ ln(6 m' / q)` for `j = 1..=m'`, which make
/// PrivateBHq compliant with `{q j / m}` with probability at least
/// `1 − 0.1 q`. With the calibrated scale, `λ = η √(10 m' ln(1/δ)) / ε`.
///
/// `q` may exceed 1 so that the inflated level of [`inflated_level`] can be
/// used directly.
pub fn gamma_cutoffs(q: f64, m: usize, budget: &PrivacyBudget) -> Result<CutoffSchedule> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::param(format!("level q must be positive, got {q}")));
    }
    if budget.m_prime > m {
        return Err(Error::param(format!("m' = {} exceeds m = {m}", budget.m_prime)));
    }
    let penalty = budget.lambda * (6.0 * budget.m_prime as f64 / q).ln();
    CutoffSchedule::new(
        (1..=budget.m_prime)
            .map(|j| (q * j as f64 / m as f64).ln() - penalty)
            .collect(),
    )
}

/// Level `q' = q exp(24 η √(m' ln(1/δ)) ln m / ε)` at which PrivateBHq
/// dominates step-down BHq at level `q` in power.
///
/// The dominance argument assumes `ν ≤ q/m` and `q ≥ 6 m^{-1.5}`; at small
/// `n` the inflation factor is enormous and `q'` easily exceeds 1.
pub fn inflated_level(q: f64, m: usize, budget: &PrivacyBudget) -> f64 {
    let exponent = 24.0 * budget.eta * (budget.m_prime as f64 * (1.0 / budget.delta).ln()).sqrt() * (m as f64).ln()
        / budget.epsilon;
    q * exponent.exp()
}

/// Step-up on log cutoffs: `T = max{γ_j : π̃_(j) ≤ γ_j}` (`−∞` when no
/// rank qualifies). Returns `T` and a mask of values `≤ T`.
pub fn threshold_on_cutoffs(noisy: &[f64], cutoffs: &CutoffSchedule) -> (f64, Vec<bool>) {
    let mut sorted = noisy.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted
        .iter()
        .zip(cutoffs.gammas())
        .filter(|(v, g)| v <= g)
        .map(|(_, &g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    let mask = noisy.iter().map(|&v| v <= threshold).collect();
    (threshold, mask)
}

/// Whether the peel adds its calibrated Laplace noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Private,
    /// **NOT PRIVATE.** Exact selection, for testing.
    DisabledForTesting,
}

#[derive(Debug, Clone)]
pub struct PrivateBhqOutcome {
    pub rejections: RejectionSet,
    /// Peeled candidates in selection order.
    pub candidates: Vec<NoisyCandidate>,
    /// Rejection threshold on the log scale; `−∞` when nothing is rejected.
    pub threshold: f64,
}

/// PrivateBHq on precomputed truncated log p-values.
pub fn private_bhq_on_logs<R: Rng + ?Sized>(
    log_p: &[f64],
    m_prime: usize,
    noise: Noise,
    cutoffs: &CutoffSchedule,
    rng: &mut R,
) -> Result<PrivateBhqOutcome> {
    if m_prime > log_p.len() {
        return Err(Error::param(format!("m' = {m_prime} exceeds m = {}", log_p.len())));
    }
    if cutoffs.len() != m_prime {
        return Err(Error::param(format!("{} cutoffs for m' = {m_prime}", cutoffs.len())));
    }
    let candidates = peel(log_p, m_prime, noise, rng)?;
    let noisy: Vec<f64> = candidates.iter().map(|c| c.noisy_value).collect();
    let (threshold, mask) = threshold_on_cutoffs(&noisy, cutoffs);
    let rejected = candidates
        .iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(c, _)| c.index)
        .collect();
    Ok(PrivateBhqOutcome { rejections: RejectionSet::new(rejected), candidates, threshold })
}

/// The full private procedure: truncated log p-values, `m'` rounds of
/// peeling at scale `λ`, then step-up against the `γ` cutoffs at level `q`.
#[allow(clippy::too_many_arguments)]
pub fn private_bhq<R: Rng + ?Sized>(
    dataset: &Dataset,
    family: TestFamily,
    profile: &SensitivityProfile,
    q: f64,
    budget: &PrivacyBudget,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<PrivateBhqOutcome> {
    let m = dataset.cols();
    if budget.m_prime > m {
        return Err(Error::param(format!("m' = {} exceeds m = {m}", budget.m_prime)));
    }
    if !budget.is_valid() {
        return Err(Error::Calibration("budget fails its calibration invariant".into()));
    }
    if profile.eta > budget.eta * (1.0 + 1e-12) {
        return Err(Error::Calibration(format!(
            "budget calibrated for eta = {} but the p-values need eta = {}",
            budget.eta, profile.eta
        )));
    }
    let log_p: Vec<f64> = family
        .pvalues(dataset)?
        .into_iter()
        .map(|p| log_truncate(p, profile.nu))
        .collect();
    let cutoffs = gamma_cutoffs(q, m, budget)?;
    let noise = match mode {
        NoiseMode::Private => budget.noise(),
        NoiseMode::DisabledForTesting => Noise::Disabled,
    };
    private_bhq_on_logs(&log_p, budget.m_prime, noise, &cutoffs, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::calibrate;
    use crate::rng::StreamSeed;
    use approx::assert_relative_eq;

    #[test]
    fn step_up_examples() {
        let r = bhq_step_up(&[0.01, 0.02, 0.5], 0.1).unwrap();
        assert_eq!(r.indices(), &[0, 1]);
        assert_eq!(bhq_step_up(&[1.0; 5], 0.3).unwrap().count(), 0);
        assert_eq!(bhq_step_up(&[0.0; 4], 0.05).unwrap().count(), 4);
        assert_eq!(bhq_step_up(&[], 0.1).unwrap().count(), 0);
        assert!(bhq_step_up(&[0.2, 1.2], 0.1).is_err());
        assert!(bhq_step_up(&[0.2], 1.0).is_err());
    }

    #[test]
    fn step_down_examples() {
        assert_eq!(bhq_step_down(&[0.01, 0.02, 0.5], 0.1).unwrap().indices(), &[0, 1]);
        let p = [0.05, 0.055, 0.06];
        assert_eq!(bhq_step_down(&p, 0.1).unwrap().count(), 0);
        assert_eq!(bhq_step_up(&p, 0.1).unwrap().count(), 3);
        assert_eq!(bhq_step_down(&[], 0.1).unwrap().count(), 0);
    }

    #[test]
    fn step_up_ties_reject_lowest_indices() {
        // crit = 0.01, 0.02, 0.03, 0.04: j* = 3 takes all three ties.
        let r = bhq_step_up(&[0.9, 0.02, 0.02, 0.02], 0.04).unwrap();
        assert_eq!(r.indices(), &[1, 2, 3]);
        let r = bhq_step_up(&[0.02, 0.035, 0.02, 0.9], 0.04).unwrap();
        assert_eq!(r.indices(), &[0, 2]);
        assert_eq!(bhq_step_up(&[0.03, 0.03, 0.03], 0.029).unwrap().count(), 0);
    }

    #[test]
    fn compliance_examples() {
        let cut = bhq_critical_values(0.1, 10);
        assert!(is_compliant(&RejectionSet::empty(), &[0.5; 10], &cut));
        let mut p = vec![0.9; 10];
        p[0] = 0.01;
        p[1] = 0.03;
        let r = RejectionSet::new(vec![0, 1]);
        assert!(!is_compliant(&r, &p, &cut));
        p[1] = 0.02;
        assert!(is_compliant(&r, &p, &cut));
    }

    #[test]
    fn truth_labels() {
        let r = RejectionSet::new(vec![2, 0]).with_truth(&[true, false, true]).unwrap();
        assert_eq!(r.indices(), &[0, 2]);
        assert_eq!(r.false_rejections(), Some(2));
        assert!(RejectionSet::new(vec![5]).with_truth(&[true]).is_err());
    }

    #[test]
    fn gamma_examples() {
        let b = calibrate(0.5, 0.1, 10, 0.01).unwrap();
        let g = gamma_cutoffs(0.1, 100, &b).unwrap();
        assert_eq!(g.len(), 10);
        assert_relative_eq!(g.gammas()[0], 0.001f64.ln() - b.lambda * 600f64.ln(), max_relative = 1e-14);
        assert!((g.gammas()[0] + 8.8492).abs() < 1e-4);
        for j in 1..10 {
            let step = g.gammas()[j] - g.gammas()[j - 1];
            assert_relative_eq!(step, ((j + 1) as f64 / j as f64).ln(), max_relative = 1e-10);
        }
        let tiny = calibrate(0.5, 0.1, 10, 1e-12).unwrap();
        let g0 = gamma_cutoffs(0.1, 100, &tiny).unwrap();
        let line = CutoffSchedule::log_bhq(0.1, 100, 10).unwrap();
        for (a, b) in g0.gammas().iter().zip(line.gammas()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_rule_examples() {
        let cut = CutoffSchedule::new(vec![-8.8, -8.0]).unwrap();
        let (t, mask) = threshold_on_cutoffs(&[-9.0, -5.0], &cut);
        assert_eq!(t, -8.8);
        assert_eq!(mask, vec![true, false]);
        let (t, mask) = threshold_on_cutoffs(&[-1.0, -2.0], &cut);
        assert_eq!(t, f64::NEG_INFINITY);
        assert_eq!(mask, vec![false, false]);
        // Non-monotone ranks: the candidate peeled second is rejected too.
        let (t, mask) = threshold_on_cutoffs(&[-7.0, -9.5], &CutoffSchedule::new(vec![-9.0, -6.5]).unwrap());
        assert_eq!(t, -6.5);
        assert_eq!(mask, vec![true, true]);
    }

    #[test]
    fn cutoff_schedule_validation() {
        assert!(CutoffSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(CutoffSchedule::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn inflated_level_grows_with_eta() {
        let b = calibrate(0.5, 0.1, 10, 0.01).unwrap();
        let q1 = inflated_level(0.1, 100, &b);
        let expected = 0.1 * (24.0 * 0.01 * (10.0 * 10f64.ln()).sqrt() * 100f64.ln() / 0.5).exp();
        assert_relative_eq!(q1, expected, max_relative = 1e-12);
        assert!(q1 > 0.1);
    }

    #[test]
    fn private_bhq_checks_inputs() {
        let d = Dataset::new(2, 3, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0], crate::pvalue::Domain::Binary).unwrap();
        let prof = TestFamily::Binomial.sensitivity(&d, 0.01).unwrap();
        let mut rng = StreamSeed::new(1).rng();
        let b = calibrate(0.5, 0.1, 4, prof.eta).unwrap();
        assert!(private_bhq(&d, TestFamily::Binomial, &prof, 0.1, &b, NoiseMode::Private, &mut rng).is_err());
        let weak = calibrate(0.5, 0.1, 2, prof.eta * 0.5).unwrap();
        assert!(matches!(
            private_bhq(&d, TestFamily::Binomial, &prof, 0.1, &weak, NoiseMode::Private, &mut rng),
            Err(Error::Calibration(_))
        ));
        let ok = calibrate(0.5, 0.1, 2, prof.eta).unwrap();
        let out = private_bhq(&d, TestFamily::Binomial, &prof, 0.1, &ok, NoiseMode::Private, &mut rng).unwrap();
        assert_eq!(out.candidates.len(), 2);
        assert!(out.rejections.count() <= 2);
    }
}
