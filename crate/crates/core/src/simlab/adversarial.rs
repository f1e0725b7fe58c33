use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fdr::FdpRecord;
use crate::procedures::{bhq_critical_values, is_compliant, RejectionSet};
use crate::rng::{open_unit, StreamSeed};
use crate::stats::MeanSe;

/// What to do when the maximiser `j*` needs more zero p-values than there
/// are false nulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfeasiblePolicy {
    /// Drop the replicate and count it.
    #[default]
    Exclude,
    /// Fall back to the best `j` whose rejection set can be completed; reject
    /// nothing if there is none. Every replicate is kept.
    BestFeasible,
}

impl std::str::FromStr for InfeasiblePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(InfeasiblePolicy::Exclude),
            "best-feasible" => Ok(InfeasiblePolicy::BestFeasible),
            other => Err(Error::param(format!("unknown infeasibility policy `{other}`"))),
        }
    }
}

/// One replicate of the adversarial compliant procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialDraw {
    pub record: FdpRecord,
    /// The `j` actually used: `argmax j / U_(j)` over `k ≤ j ≤ m0`, or the
    /// best feasible `j` after a fallback (0 if nothing was rejected).
    pub j_star: usize,
    /// `U_(j*)`, NaN when nothing was rejected.
    pub u_j_star: f64,
    /// Whether the unconstrained maximiser was infeasible.
    pub fallback: bool,
}

/// Smallest `R` with `q R / m ≥ u`, guarded against rounding in the ceiling.
fn rejections_needed(m: usize, q: f64, u: f64) -> usize {
    let mut r = ((m as f64) * u / q).ceil().max(1.0) as usize;
    while q * r as f64 / (m as f64) < u {
        r += 1;
    }
    while r > 1 && q * (r - 1) as f64 / (m as f64) >= u {
        r -= 1;
    }
    r
}

/// Draws `m0` uniform true-null p-values and sets the `m − m0` false-null
/// p-values to zero, then rejects the `j*` smallest null p-values together
/// with just enough zeros to make the rejection set compliant with the BHq
/// cutoffs at level `q`.
///
/// Returns `Ok(None)` when the construction needs more zeros than there are
/// false nulls.
pub fn adversarial_compliant<R: Rng + ?Sized>(
    m: usize,
    m0: usize,
    k: usize,
    q: f64,
    rng: &mut R,
) -> Result<Option<AdversarialDraw>> {
    adversarial_compliant_with(m, m0, k, q, InfeasiblePolicy::Exclude, rng)
}

/// [`adversarial_compliant`] with an explicit infeasibility policy.
pub fn adversarial_compliant_with<R: Rng + ?Sized>(
    m: usize,
    m0: usize,
    k: usize,
    q: f64,
    policy: InfeasiblePolicy,
    rng: &mut R,
) -> Result<Option<AdversarialDraw>> {
    if m0 >= m {
        return Err(Error::param(format!("need m0 < m, got m0 = {m0}, m = {m}")));
    }
    if k < 2 || k > m0 {
        return Err(Error::param(format!("need 2 ≤ k ≤ m0, got k = {k}, m0 = {m0}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(format!("level q must lie in (0, 1), got {q}")));
    }

    let mut nulls: Vec<f64> = (0..m0).map(|_| open_unit(rng)).collect();
    let mut order: Vec<usize> = (0..m0).collect();
    order.sort_by(|&a, &b| nulls[a].total_cmp(&nulls[b]));
    let sorted = |j: usize| nulls[order[j - 1]];
    let feasible = |j: usize| rejections_needed(m, q, sorted(j)).saturating_sub(j) <= m - m0;

    // argmax of j / U_(j), first maximiser on ties
    let best_of = |candidates: &mut dyn Iterator<Item = usize>| {
        candidates.fold(None, |best: Option<usize>, j| match best {
            Some(b) if j as f64 * sorted(b) <= b as f64 * sorted(j) => Some(b),
            _ => Some(j),
        })
    };
    let unconstrained = best_of(&mut (k..=m0)).expect("k ≤ m0");
    let fallback = !feasible(unconstrained);
    let chosen = match (fallback, policy) {
        (false, _) => Some(unconstrained),
        (true, InfeasiblePolicy::Exclude) => return Ok(None),
        (true, InfeasiblePolicy::BestFeasible) => best_of(&mut (k..=m0).filter(|&j| feasible(j))),
    };
    let Some(j_star) = chosen else {
        return Ok(Some(AdversarialDraw {
            record: FdpRecord::new(0, 0)?,
            j_star: 0,
            u_j_star: f64::NAN,
            fallback,
        }));
    };
    let u_j_star = sorted(j_star);
    let zeros = rejections_needed(m, q, u_j_star).saturating_sub(j_star);

    // Layout: true nulls at 0..m0, false nulls (p = 0) at m0..m.
    let mut rejected: Vec<usize> = order[..j_star].to_vec();
    rejected.extend(m0..m0 + zeros);
    let rejections = RejectionSet::new(rejected);

    nulls.resize(m, 0.0);
    let cutoffs = bhq_critical_values(q, m);
    assert!(
        is_compliant(&rejections, &nulls, &cutoffs),
        "adversarial rejection set is not compliant (j* = {j_star}, R = {})",
        rejections.count()
    );

    let record = FdpRecord::new(j_star, rejections.count())?;
    Ok(Some(AdversarialDraw { record, j_star, u_j_star, fallback }))
}

/// Mean of `FDP_k / (π0 q)` over the kept replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialSummary {
    pub ratio: MeanSe,
    pub fdp: MeanSe,
    /// Replicates entering the means.
    pub kept: usize,
    /// Replicates whose unconstrained maximiser was infeasible (dropped
    /// under [`InfeasiblePolicy::Exclude`], re-chosen otherwise).
    pub infeasible: usize,
}

/// Runs `reps` replicates, replicate `i` drawing from `seed.child(i)`.
pub fn run_adversarial(
    m: usize,
    m0: usize,
    k: usize,
    q: f64,
    reps: usize,
    policy: InfeasiblePolicy,
    seed: StreamSeed,
) -> Result<AdversarialSummary> {
    if reps == 0 {
        return Err(Error::param("need at least one replicate"));
    }
    let draws: Vec<Option<AdversarialDraw>> = (0..reps)
        .into_par_iter()
        .map(|i| adversarial_compliant_with(m, m0, k, q, policy, &mut seed.child(i as u64).rng()))
        .collect::<Result<_>>()?;
    let pi0 = m0 as f64 / m as f64;
    let fdps: Vec<f64> = draws.iter().flatten().map(|d| d.record.fdp_k(k)).collect();
    if fdps.is_empty() {
        return Err(Error::Numeric(format!("all {reps} adversarial replicates were infeasible")));
    }
    let infeasible = draws.iter().filter(|d| d.is_none_or(|d| d.fallback)).count();
    let ratios: Vec<f64> = fdps.iter().map(|f| f / (pi0 * q)).collect();
    Ok(AdversarialSummary {
        ratio: MeanSe::from_samples(&ratios),
        fdp: MeanSe::from_samples(&fdps),
        kept: fdps.len(),
        infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_compliant_and_match_the_approximation() {
        let seed = StreamSeed::new(31);
        let mut feasible = 0;
        for i in 0..200 {
            let mut rng = seed.child(i).rng();
            let Some(d) = adversarial_compliant(50_000, 500, 2, 0.01, &mut rng).unwrap() else {
                continue;
            };
            feasible += 1;
            assert_eq!(d.record.v, d.j_star);
            assert!(d.j_star >= 2);
            let approx = 0.01 * d.j_star as f64 / (50_000.0 * d.u_j_star);
            let fdp = d.record.fdp();
            if d.record.r > d.j_star {
                // R = ⌈m U/q⌉, so V/R sits just below q j*/(m U)
                assert!(fdp <= approx * (1.0 + 1e-12));
                assert!(fdp >= approx * d.record.r as f64 / (d.record.r as f64 + 1.0) - 1e-12);
            }
        }
        assert!(feasible > 100, "only {feasible} feasible draws");
    }

    #[test]
    fn infeasible_when_false_nulls_are_scarce() {
        // a single false null cannot cover ⌈m U/q⌉ − j* for tiny q
        let seed = StreamSeed::new(2);
        let mut infeasible = 0;
        for i in 0..50 {
            let mut rng = seed.child(i).rng();
            if adversarial_compliant(41, 40, 2, 0.001, &mut rng).unwrap().is_none() {
                infeasible += 1;
            }
        }
        assert!(infeasible > 0);
    }

    #[test]
    fn best_feasible_keeps_every_replicate() {
        let seed = StreamSeed::new(2);
        let mut fallbacks = 0;
        for i in 0..200 {
            let mut rng = seed.child(i).rng();
            let d = adversarial_compliant_with(2000, 100, 2, 0.01, InfeasiblePolicy::BestFeasible, &mut rng)
                .unwrap()
                .expect("never dropped");
            if d.fallback {
                fallbacks += 1;
            }
            let mut again = seed.child(i).rng();
            let plain = adversarial_compliant(2000, 100, 2, 0.01, &mut again).unwrap();
            match plain {
                None => assert!(d.fallback),
                Some(p) => assert_eq!(p, d),
            }
        }
        assert!(fallbacks > 0 && fallbacks < 200);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = StreamSeed::new(0).rng();
        assert!(adversarial_compliant(10, 10, 2, 0.1, &mut rng).is_err());
        assert!(adversarial_compliant(10, 5, 1, 0.1, &mut rng).is_err());
        assert!(adversarial_compliant(10, 5, 2, 1.5, &mut rng).is_err());
    }
}
