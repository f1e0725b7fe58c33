use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Test statistics with truth labels (`true` = true null).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledStatistics {
    pub statistics: Vec<f64>,
    pub is_null: Vec<bool>,
}

impl LabelledStatistics {
    pub fn len(&self) -> usize {
        self.statistics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statistics.is_empty()
    }

    pub fn null_count(&self) -> usize {
        self.is_null.iter().filter(|&&b| b).count()
    }
}

/// The equicorrelated-across-blocks normal design: `m1` false nulls at the
/// front, `m0 = m − m1` true nulls after them, unit variances, and
/// covariance `−1/√(m0 m1)` between every null/non-null pair.
///
/// `Σ = I − P₊ + P₋` where `P±` project onto `w± = (u/√m0 ± v/√m1)/√2`, with
/// `u`, `v` the null and non-null indicator vectors. Its square root
/// `I − P₊ + (√2 − 1)P₋` is applied in O(m) without forming any matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalExample {
    m: usize,
    m1: usize,
}

impl NormalExample {
    pub fn new(m: usize, m1: usize) -> Result<Self> {
        if m1 == 0 || m1 >= m {
            return Err(Error::DegenerateCovariance(format!(
                "need 1 ≤ m1 < m, got m = {m}, m1 = {m1}"
            )));
        }
        Ok(NormalExample { m, m1 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m0(&self) -> usize {
        self.m - self.m1
    }

    pub fn is_null(&self, i: usize) -> bool {
        i >= self.m1
    }

    /// Entries of `w₊` and `w₋` on (non-null, null) coordinates.
    fn directions(&self) -> ([f64; 2], [f64; 2]) {
        let a = 1.0 / (self.m0() as f64).sqrt();
        let b = 1.0 / (self.m1 as f64).sqrt();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ([s * b, s * a], [-s * b, s * a])
    }

    /// Population covariance `Σ_ij`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else if self.is_null(i) != self.is_null(j) {
            -1.0 / ((self.m0() * self.m1) as f64).sqrt()
        } else {
            0.0
        }
    }

    pub fn covariance_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| (0..self.m).map(|j| self.covariance(i, j)).collect()).collect()
    }

    /// Dense `Σ^{1/2}`, for checking against [`NormalExample::covariance_matrix`].
    pub fn sqrt_matrix(&self) -> Vec<Vec<f64>> {
        let (wp, wm) = self.directions();
        let c = std::f64::consts::SQRT_2 - 1.0;
        let side = |i: usize| usize::from(self.is_null(i));
        (0..self.m)
            .map(|i| {
                (0..self.m)
                    .map(|j| {
                        let (si, sj) = (side(i), side(j));
                        let id = if i == j { 1.0 } else { 0.0 };
                        id - wp[si] * wp[sj] + c * wm[si] * wm[sj]
                    })
                    .collect()
            })
            .collect()
    }

    /// Overwrites `z` with `Σ^{1/2} z`.
    pub fn apply_sqrt(&self, z: &mut [f64]) {
        debug_assert_eq!(z.len(), self.m);
        let (wp, wm) = self.directions();
        let (sum_alt, sum_null) = {
            let alt: f64 = z[..self.m1].iter().sum();
            let null: f64 = z[self.m1..].iter().sum();
            (alt, null)
        };
        let dot_p = wp[0] * sum_alt + wp[1] * sum_null;
        let dot_m = wm[0] * sum_alt + wm[1] * sum_null;
        let c = std::f64::consts::SQRT_2 - 1.0;
        let shift_alt = -dot_p * wp[0] + c * dot_m * wm[0];
        let shift_null = -dot_p * wp[1] + c * dot_m * wm[1];
        for x in &mut z[..self.m1] {
            *x += shift_alt;
        }
        for x in &mut z[self.m1..] {
            *x += shift_null;
        }
    }

    /// One draw of `X ~ N(μ, Σ)` with mean `mu` on the non-nulls.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.m).map(|_| rng.sample(StandardNormal)).collect();
        self.apply_sqrt(&mut z);
        for x in &mut z[..self.m1] {
            *x += mu;
        }
        z
    }

    pub fn labels(&self) -> Vec<bool> {
        (0..self.m).map(|i| self.is_null(i)).collect()
    }
}

pub fn gen_normal_example<R: Rng + ?Sized>(
    m: usize,
    m1: usize,
    mu: f64,
    rng: &mut R,
) -> Result<LabelledStatistics> {
    let design = NormalExample::new(m, m1)?;
    Ok(LabelledStatistics { statistics: design.sample(mu, rng), is_null: design.labels() })
}

/// One-sample t statistics. Coordinates with zero sample variance carry a
/// NaN statistic and are counted in `degenerate`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentSample {
    pub t: Vec<f64>,
    pub is_null: Vec<bool>,
    pub degenerate: usize,
}

impl StudentSample {
    pub fn df(n: usize) -> f64 {
        (n - 1) as f64
    }
}

/// `n` independent draws from the normal design, reduced to per-coordinate
/// statistics `√n X̄ / s`.
pub fn gen_student_example<R: Rng + ?Sized>(
    m: usize,
    m1: usize,
    mu: f64,
    n: usize,
    rng: &mut R,
) -> Result<StudentSample> {
    if n < 2 {
        return Err(Error::param(format!("need n ≥ 2 observations, got {n}")));
    }
    let design = NormalExample::new(m, m1)?;
    let mut mean = vec![0.0; m];
    let mut m2 = vec![0.0; m];
    for l in 0..n {
        let x = design.sample(mu, rng);
        let count = (l + 1) as f64;
        for ((xi, mi), si) in x.iter().zip(mean.iter_mut()).zip(m2.iter_mut()) {
            let d = xi - *mi;
            *mi += d / count;
            *si += d * (xi - *mi);
        }
    }
    let (t, degenerate) = t_from_moments(&mean, &m2, n);
    Ok(StudentSample { t, is_null: design.labels(), degenerate })
}

fn t_from_moments(mean: &[f64], m2: &[f64], n: usize) -> (Vec<f64>, usize) {
    let mut degenerate = 0;
    let t = mean
        .iter()
        .zip(m2)
        .map(|(&xbar, &ss)| {
            let var = ss / (n - 1) as f64;
            if var > 0.0 {
                (n as f64).sqrt() * xbar / var.sqrt()
            } else {
                degenerate += 1;
                f64::NAN
            }
        })
        .collect();
    (t, degenerate)
}

/// Independent 2×2 blocks: `X = Z` (true null) and
/// `X̃ = μ̃ + ρZ + √(1−ρ²)Z′` (false null). Pair `i` occupies indices
/// `2i` and `2i + 1`.
pub fn gen_block_example<R: Rng + ?Sized>(
    m_pairs: usize,
    mu_tilde: f64,
    rho: f64,
    rng: &mut R,
) -> Result<LabelledStatistics> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::param(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if m_pairs == 0 {
        return Err(Error::param("need at least one block"));
    }
    let tail = (1.0 - rho * rho).sqrt();
    let mut statistics = Vec::with_capacity(2 * m_pairs);
    let mut is_null = Vec::with_capacity(2 * m_pairs);
    for _ in 0..m_pairs {
        let z: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        statistics.push(z);
        statistics.push(mu_tilde + rho * z + tail * z2);
        is_null.push(true);
        is_null.push(false);
    }
    Ok(LabelledStatistics { statistics, is_null })
}
