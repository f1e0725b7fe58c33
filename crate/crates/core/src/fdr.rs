//! False discovery proportions, Monte Carlo estimates of the constants
//! `C_k` and `C_k^{(n)}`, and the closed-form FDR bounds built on them.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::procedures::RejectionSet;
use crate::rng::StreamSeed;
use crate::stats::MeanSe;

/// Counts from one run of a procedure with known truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FdpRecord {
    /// Rejected true nulls.
    pub v: usize,
    /// Total rejections.
    pub r: usize,
}

impl FdpRecord {
    pub fn new(v: usize, r: usize) -> Result<Self> {
        if v > r {
            return Err(Error::param(format!("V = {v} exceeds R = {r}")));
        }
        Ok(FdpRecord { v, r })
    }

    /// `V / max{R, 1}`.
    pub fn fdp(&self) -> f64 {
        if self.r == 0 {
            0.0
        } else {
            self.v as f64 / self.r as f64
        }
    }

    /// `(V/R) · 1{V ≥ k}`.
    pub fn fdp_k(&self, k: usize) -> f64 {
        if self.v >= k { self.fdp() } else { 0.0 }
    }

    /// `(V/R) · 1{R ≥ k}`.
    pub fn fdp_upper_k(&self, k: usize) -> f64 {
        if self.r >= k { self.fdp() } else { 0.0 }
    }
}

/// `(FDP_k, FDP^k)` of a labelled rejection set.
pub fn fdp(rejections: &RejectionSet, k: usize) -> Result<(f64, f64)> {
    let v = rejections.false_rejections().ok_or(Error::MissingLabels)?;
    let rec = FdpRecord::new(v, rejections.count())?;
    Ok((rec.fdp_k(k), rec.fdp_upper_k(k)))
}

/// Monte Carlo estimate of `C_k` (or of `C_k^{(n)}`, with `j_max = n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkEstimate {
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
    pub j_max: usize,
}

impl CkEstimate {
    fn from_samples(k: usize, j_max: usize, samples: &[f64]) -> Self {
        let s = MeanSe::from_samples(samples);
        CkEstimate { k, mean: s.mean, std_error: s.std_error, reps: samples.len(), j_max }
    }

    /// 99% normal-approximation confidence interval.
    pub fn ci99(&self) -> (f64, f64) {
        let z = 2.575_829_303_548_901;
        (self.mean - z * self.std_error, self.mean + z * self.std_error)
    }
}

pub const DEFAULT_CK_REPS: usize = 10_000;
pub const DEFAULT_CK_JMAX: usize = 100_000;

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::param(format!("k must be at least 2 (C_1 is infinite), got {k}")));
    }
    Ok(())
}

/// For one exponential path `T_j = ξ_1 + … + ξ_j`, returns
/// `max_{k ≤ j ≤ j_max} j / T_j` for every `k` in `ks` (sorted ascending,
/// deduplicated). Only ratios for `j < max(ks)` are stored.
fn path_maxima<R: rand::Rng + ?Sized>(ks: &[usize], j_max: usize, rng: &mut R) -> Vec<f64> {
    let k_lo = ks[0];
    let k_hi = *ks.last().unwrap();
    let mut head = Vec::with_capacity(k_hi - k_lo);
    let mut total = 0.0f64;
    let mut tail = 0.0f64;
    for j in 1..=j_max {
        let xi: f64 = Exp1.sample(rng);
        total += xi;
        let jf = j as f64;
        if j >= k_hi {
            // Compare without dividing: j / T > tail  <=>  j > tail * T.
            if jf > tail * total {
                tail = jf / total;
            }
        } else if j >= k_lo {
            head.push(jf / total);
        }
    }
    let mut out = vec![0.0; ks.len()];
    let mut running = tail;
    let mut idx = ks.len();
    while idx > 0 && ks[idx - 1] == k_hi {
        idx -= 1;
        out[idx] = tail;
    }
    for j in (k_lo..k_hi).rev() {
        running = running.max(head[j - k_lo]);
        while idx > 0 && ks[idx - 1] == j {
            idx -= 1;
            out[idx] = running;
        }
    }
    debug_assert_eq!(idx, 0);
    out
}

/// Estimates `C_k` for several `k` at once from shared exponential paths
/// (`max_{k ≤ j ≤ j_max} j / T_j`, averaged over `reps` replicates).
///
/// Replicate `i` uses the stream `seed.child(i)`, so results do not depend
/// on the thread count.
pub fn estimate_ck_many(ks: &[usize], reps: usize, j_max: usize, seed: StreamSeed) -> Result<Vec<CkEstimate>> {
    if ks.is_empty() {
        return Err(Error::param("no k values requested"));
    }
    for &k in ks {
        check_k(k)?;
        if j_max < k {
            return Err(Error::param(format!("j_max = {j_max} is below k = {k}")));
        }
    }
    if reps < 2 {
        return Err(Error::param("need at least 2 replicates"));
    }
    let mut sorted = ks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| path_maxima(&sorted, j_max, &mut seed.child(i as u64).rng()))
        .collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let col = sorted.binary_search(&k).unwrap();
            let samples: Vec<f64> = per_rep.iter().map(|r| r[col]).collect();
            CkEstimate::from_samples(k, j_max, &samples)
        })
        .collect())
}

/// Estimates `C_k = E[max_{j ≥ k} j / T_j]` with the path truncated at
/// `j_max`.
pub fn estimate_ck(k: usize, reps: usize, j_max: usize, seed: StreamSeed) -> Result<CkEstimate> {
    Ok(estimate_ck_many(&[k], reps, j_max, seed)?[0])
}

/// Estimates `C_k^{(n)} = E[max_{k ≤ j ≤ n} j / (n U_(j))]` for `n` uniform
/// order statistics, drawn as `U_(j) = T_j / T_{n+1}` from exponential
/// spacings.
pub fn estimate_ck_finite(k: usize, n: usize, reps: usize, seed: StreamSeed) -> Result<CkEstimate> {
    check_k(k)?;
    if n < k {
        return Err(Error::param(format!("n = {n} is below k = {k}")));
    }
    if reps < 2 {
        return Err(Error::param("need at least 2 replicates"));
    }
    let samples: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(i as u64).rng();
            let mut total = 0.0f64;
            let mut best = 0.0f64;
            for j in 1..=n {
                total += Distribution::<f64>::sample(&Exp1, &mut rng);
                if j >= k {
                    best = best.max(j as f64 / total);
                }
            }
            let last: f64 = Exp1.sample(&mut rng);
            best * (total + last) / n as f64
        })
        .collect();
    Ok(CkEstimate::from_samples(k, n, &samples))
}

/// `C_k` for `k = 2..=30`, estimated by [`estimate_ck_many`] with
/// `reps = 100_000`, `j_max = 100_000` and master seed `0x0c0ffee`.
/// Standard errors are about 0.015 at `k = 2` and below 0.0021 from `k = 5` on.
const REFERENCE_CK: [f64; 29] = include!("reference_ck.in");

/// Reference estimate of `C_k` for `2 ≤ k ≤ 30`.
pub fn reference_ck(k: usize) -> Result<f64> {
    check_k(k)?;
    REFERENCE_CK
        .get(k - 2)
        .copied()
        .ok_or_else(|| Error::param(format!("no cached C_k for k = {k}; use estimate_ck")))
}

/// `FDR_k ≤ C_k π_0 q` for any procedure compliant with the BHq line, under
/// independence within the nulls.
pub fn bound_fdr_k(k: usize, pi0: f64, q: f64) -> Result<f64> {
    Ok(reference_ck(k)? * pi0 * q)
}

/// `FDR^k ≤ (1 + 2/√(qk)) q`, valid for every `k ≥ 1`.
pub fn bound_fdr_upper_k(k: usize, q: f64) -> f64 {
    (1.0 + 2.0 / (q * k as f64).sqrt()) * q
}

/// Sharper form `π_0 q + 2 √(π_0 q / k)` of [`bound_fdr_upper_k`].
pub fn bound_fdr_upper_k_pi0(k: usize, pi0: f64, q: f64) -> f64 {
    pi0 * q + 2.0 * (pi0 * q / k as f64).sqrt()
}
