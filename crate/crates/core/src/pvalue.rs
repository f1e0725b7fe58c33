//! P-value functions on datasets, their multiplicative sensitivity, and the
//! truncated-log transform consumed by the private mechanisms.
//!
//! Two test families are supported:
//!
//! * [`TestFamily::Binomial`]: binary observations, one-sided sign test of
//!   `α ≤ 1/2` on the column sum. The tail is summed exactly in log space.
//! * [`TestFamily::TruncExp`]: observations in `[0, A]`, testing a unit-rate
//!   exponential truncated at `A` against a faster rate. The tail of the
//!   column sum is approximated by a Lugannani–Rice saddlepoint formula.

use std::io::Read;

use crate::error::{Error, Result};
use crate::special::{ln_choose, log_sum_exp, normal_pdf, normal_sf};

/// Observation domain of a [`Dataset`]. `A` is treated as public metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Binary,
    BoundedReal { upper: f64 },
}

impl Domain {
    fn name(&self) -> &'static str {
        match self {
            Domain::Binary => "binary",
            Domain::BoundedReal { .. } => "bounded-real",
        }
    }
}

/// `n` individuals (rows) by `m` hypotheses (columns). Adjacency is
/// row-wise: two datasets are adjacent iff exactly one row differs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    domain: Domain,
}

impl Dataset {
    /// Builds a dataset from row-major values, validating every entry
    /// against the domain.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, domain: Domain) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("dataset needs at least one row and one column"));
        }
        if values.len() != rows * cols {
            return Err(Error::param(format!(
                "expected {} values for a {rows}x{cols} dataset, got {}",
                rows * cols,
                values.len()
            )));
        }
        match domain {
            Domain::Binary => {
                if let Some(pos) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::param(format!(
                        "binary dataset entry ({}, {}) is {}",
                        pos / cols,
                        pos % cols,
                        values[pos]
                    )));
                }
            }
            Domain::BoundedReal { upper } => {
                if !(upper > 0.0 && upper.is_finite()) {
                    return Err(Error::param(format!("bound A must be positive, got {upper}")));
                }
                if let Some(pos) = values.iter().position(|&v| !(0.0..=upper).contains(&v)) {
                    return Err(Error::param(format!(
                        "entry ({}, {}) = {} outside [0, {upper}]",
                        pos / cols,
                        pos % cols,
                        values[pos]
                    )));
                }
            }
        }
        Ok(Dataset { rows, cols, values, domain })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn column_sum(&self, col: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, col)).sum()
    }

    /// Returns a copy with row `i` replaced.
    pub fn with_row(&self, i: usize, row: &[f64]) -> Result<Self> {
        if row.len() != self.cols || i >= self.rows {
            return Err(Error::param("replacement row has the wrong shape"));
        }
        let mut values = self.values.clone();
        values[i * self.cols..(i + 1) * self.cols].copy_from_slice(row);
        Dataset::new(self.rows, self.cols, values, self.domain)
    }

    /// True iff the shapes match and exactly one row differs, comparing
    /// entries by bit pattern.
    pub fn is_adjacent(&self, other: &Dataset) -> bool {
        if self.rows != other.rows || self.cols != other.cols || self.domain != other.domain {
            return false;
        }
        let differing = (0..self.rows)
            .filter(|&i| {
                self.row(i)
                    .iter()
                    .zip(other.row(i))
                    .any(|(a, b)| a.to_bits() != b.to_bits())
            })
            .count();
        differing == 1
    }

    /// Parses the dataset CSV format: a first line `n,m,domain[,A]` with
    /// `domain` one of `binary` / `bounded`, followed by `n` rows of `m`
    /// comma-separated values.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let head = records
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let field = |i: usize, what: &str| -> Result<&str> {
            head.get(i)
                .ok_or_else(|| Error::Format(format!("header is missing `{what}`")))
        };
        let rows: usize = field(0, "n")?
            .parse()
            .map_err(|_| Error::Format(format!("bad n `{}`", &head[0])))?;
        let cols: usize = field(1, "m")?
            .parse()
            .map_err(|_| Error::Format(format!("bad m `{}`", &head[1])))?;
        let domain = match field(2, "domain")? {
            "binary" => Domain::Binary,
            "bounded" | "bounded-real" => {
                let a: f64 = field(3, "A")?
                    .parse()
                    .map_err(|_| Error::Format(format!("bad A `{}`", &head[3])))?;
                Domain::BoundedReal { upper: a }
            }
            other => return Err(Error::Format(format!("unknown domain `{other}`"))),
        };
        let mut values = Vec::with_capacity(rows * cols);
        let mut seen = 0usize;
        for rec in records {
            let rec = rec?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != cols {
                return Err(Error::Format(format!(
                    "row {} has {} fields, expected {cols}",
                    seen + 1,
                    rec.len()
                )));
            }
            for f in rec.iter() {
                let v = match domain {
                    Domain::Binary => match f {
                        "0" => 0.0,
                        "1" => 1.0,
                        _ => return Err(Error::Format(format!("binary entry `{f}` is not 0/1"))),
                    },
                    Domain::BoundedReal { .. } => f
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("entry `{f}` is not a number")))?,
                };
                values.push(v);
            }
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Format(format!("header says {rows} rows, found {seen}")));
        }
        Dataset::new(rows, cols, values, domain)
    }

    pub fn to_csv(&self) -> String {
        let mut out = match self.domain {
            Domain::Binary => format!("{},{},binary\n", self.rows, self.cols),
            Domain::BoundedReal { upper } => format!("{},{},bounded,{upper}\n", self.rows, self.cols),
        };
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Whether a sensitivity profile was derived exhaustively or read off a
/// finite grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityKind {
    Exact,
    Numeric,
}

/// `(η, ν)` multiplicative sensitivity: on adjacent datasets either both
/// p-values are `≤ ν`, or they agree within a factor `e^η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityProfile {
    pub eta: f64,
    pub nu: f64,
    pub kind: SensitivityKind,
}

impl SensitivityProfile {
    /// Checks the defining disjunction for one adjacent pair of p-values.
    pub fn admits(&self, p: f64, p_adjacent: f64) -> bool {
        if p <= self.nu && p_adjacent <= self.nu {
            return true;
        }
        let slack = 1e-12 * self.eta.max(1.0);
        (p.ln() - p_adjacent.ln()).abs() <= self.eta + slack
    }
}

/// A truncated log p-value with the hypothesis it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPValue {
    pub value: f64,
    pub hypothesis: usize,
}

/// `log max{ν, p}`.
pub fn log_truncate(p: f64, nu: f64) -> f64 {
    p.max(nu).ln()
}

/// Default truncation floor `m^(-1-c)`.
pub fn default_nu(m: usize, c: f64) -> f64 {
    (m as f64).powf(-1.0 - c)
}

/// `ln P(Bin(n, 1/2) ≥ t)`.
pub fn ln_binomial_tail(n: u64, t: u64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    if t > n {
        return f64::NEG_INFINITY;
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    (log_sum_exp((t..=n).map(|i| ln_choose(n, i))) - ln_half_n).min(0.0)
}

/// `P(Bin(n, 1/2) ≥ t)`, exact up to rounding.
pub fn binomial_tail(n: u64, t: u64) -> f64 {
    ln_binomial_tail(n, t).exp()
}

/// `ln P(Bin(n, 1/2) ≥ t)` for every `t = 0..=n`, by a backward running
/// log-sum-exp.
pub fn ln_binomial_tails(n: u64) -> Vec<f64> {
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let mut out = vec![0.0; n as usize + 1];
    let mut acc = f64::NEG_INFINITY;
    for t in (0..=n).rev() {
        let term = ln_choose(n, t) - ln_half_n;
        acc = if acc == f64::NEG_INFINITY {
            term
        } else {
            let hi = acc.max(term);
            hi + ((acc - hi).exp() + (term - hi).exp()).ln()
        };
        out[t as usize] = acc.min(0.0);
    }
    out[0] = 0.0;
    out
}

fn column_count(dataset: &Dataset, hypothesis: usize) -> Result<u64> {
    if dataset.domain() != Domain::Binary {
        return Err(Error::DomainMismatch {
            expected: "binary",
            found: dataset.domain().name(),
        });
    }
    if hypothesis >= dataset.cols() {
        return Err(Error::param(format!("hypothesis {hypothesis} out of range")));
    }
    Ok(dataset.column_sum(hypothesis).round() as u64)
}

/// Upper binomial tail p-value of one hypothesis column.
pub fn binomial_pvalue(dataset: &Dataset, hypothesis: usize) -> Result<f64> {
    let t = column_count(dataset, hypothesis)?;
    Ok(binomial_tail(dataset.rows() as u64, t))
}

/// Exhaustive sensitivity of the binomial p-value family at sample size `n`.
///
/// Adjacent datasets shift the statistic by at most one, and the tail is
/// monotone, so it suffices to scan consecutive pairs `(t, t+1)` with
/// `t ∈ 0..n` and keep the log-ratios of pairs not both at or below `ν`.
/// With `ν = 0` this yields `ln(n + 1)`, the ratio of the last two tails.
pub fn sensitivity_scan_binomial(n: u64, nu: f64) -> Result<SensitivityProfile> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::param(format!("nu must lie in [0, 1), got {nu}")));
    }
    let tails = ln_binomial_tails(n);
    let ln_nu = nu.ln();
    let eta = tails
        .windows(2)
        .filter(|w| w[0] > ln_nu)
        .map(|w| w[0] - w[1])
        .fold(0.0, f64::max);
    Ok(SensitivityProfile { eta, nu, kind: SensitivityKind::Exact })
}

// ---------------------------------------------------------------------------
// Truncated exponential family.
//
// One observation has density e^{-x} / (1 - e^{-A}) on [0, A]. Tilting by θ
// gives density ∝ e^{(θ-1)x}, so all cumulants are functions of the scaled
// natural parameter x = (θ - 1)A through
//
//   ln φ(x),  φ(x) = (e^x - 1)/x      cumulant generating function
//   h(x) = 1/(1 - e^{-x}) - 1/x       mean / A
//   v(x) = 1/x² - 1/(4 sinh²(x/2))    variance / A²
//   w(x) = v'(x)                      third cumulant / A³
// ---------------------------------------------------------------------------

fn ln_phi(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x / 2.0 + x * x / 24.0
    } else if x > 0.0 {
        x + (-(-x).exp_m1()).ln() - x.ln()
    } else {
        (-x.exp_m1()).ln() - (-x).ln()
    }
}

fn mean_scaled(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        0.5 + x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30240.0
    } else {
        1.0 / (-(-x).exp_m1()) - 1.0 / x
    }
}

fn var_scaled(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        1.0 / 12.0 - x2 / 240.0 + x2 * x2 / 6048.0
    } else if x.abs() > 700.0 {
        1.0 / (x * x)
    } else {
        let s = (0.5 * x).sinh();
        1.0 / (x * x) - 1.0 / (4.0 * s * s)
    }
}

fn third_scaled(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        -x / 120.0 + x * x2 / 1512.0 - x * x2 * x2 / 28800.0
    } else if x.abs() > 700.0 {
        -2.0 / (x * x * x)
    } else {
        let s = (0.5 * x).sinh();
        -2.0 / (x * x * x) + (0.5 * x).cosh() / (4.0 * s * s * s)
    }
}

/// Cumulants of one truncated-exponential observation under tilt `θ`.
#[derive(Debug, Clone, Copy)]
pub struct TruncExpCumulants {
    pub upper: f64,
}

impl TruncExpCumulants {
    pub fn new(upper: f64) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::param(format!("bound A must be positive, got {upper}")));
        }
        Ok(TruncExpCumulants { upper })
    }

    fn scaled(&self, theta: f64) -> f64 {
        (theta - 1.0) * self.upper
    }

    /// `κ(θ) = ln E e^{θζ}`.
    pub fn cgf(&self, theta: f64) -> f64 {
        ln_phi(self.scaled(theta)) - ln_phi(-self.upper)
    }

    pub fn mean(&self, theta: f64) -> f64 {
        self.upper * mean_scaled(self.scaled(theta))
    }

    pub fn variance(&self, theta: f64) -> f64 {
        self.upper * self.upper * var_scaled(self.scaled(theta))
    }

    pub fn third(&self, theta: f64) -> f64 {
        self.upper.powi(3) * third_scaled(self.scaled(theta))
    }

    /// Solves `κ'(θ) = a` for `a ∈ (0, A)` with a bracketed Newton
    /// iteration that falls back to bisection.
    pub fn saddlepoint(&self, a: f64) -> Result<f64> {
        let a_max = self.upper;
        if !(a > 0.0 && a < a_max) {
            return Err(Error::param(format!("saddlepoint target {a} outside (0, {a_max})")));
        }
        let r = a / a_max;
        // Solve h(x) = r in the scaled coordinate; h(x) ≈ -1/x and 1 - 1/x
        // in the tails gives a bracket.
        let mut lo = -2.0 / r - 1.0;
        let mut hi = 2.0 / (1.0 - r) + 1.0;
        while mean_scaled(lo) > r {
            lo *= 2.0;
        }
        while mean_scaled(hi) < r {
            hi *= 2.0;
        }
        let mut x = if r < 0.5 { -1.0 / r + 2.0 } else { 1.0 / (1.0 - r) - 2.0 }.clamp(lo, hi);
        for _ in 0..200 {
            let f = mean_scaled(x) - r;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = var_scaled(x);
            let mut next = x - f / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - x).abs() <= 1e-15 * x.abs().max(1.0) || (hi - lo) <= 1e-15 * x.abs().max(1.0);
            x = next;
            if done {
                return Ok(x / self.upper + 1.0);
            }
        }
        let resid = mean_scaled(x) - r;
        if resid.abs() < 1e-12 {
            Ok(x / self.upper + 1.0)
        } else {
            Err(Error::Numeric(format!(
                "saddlepoint solve for a = {a}, A = {a_max} did not converge: x = {x}, residual {resid:e}, bracket [{lo}, {hi}]"
            )))
        }
    }
}

/// Below this |θ| the Lugannani–Rice formula is replaced by its limit, a
/// skewness-corrected normal approximation.
const THETA_FLOOR: f64 = 1e-8;

/// `P(ζ_1 + … + ζ_n ≥ t)` for i.i.d. unit-rate exponentials truncated at
/// `upper`, via the Lugannani–Rice saddlepoint approximation.
///
/// The upper corner `t = nA` carries no mass; there and wherever the
/// approximation underflows the smallest positive normal float is returned
/// so that log transforms stay finite.
pub fn truncexp_tail(n: u64, upper: f64, t: f64) -> Result<f64> {
    let cum = TruncExpCumulants::new(upper)?;
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    let total = n as f64 * upper;
    if !(0.0..=total).contains(&t) {
        return Err(Error::param(format!("statistic {t} outside [0, {total}]")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if t >= total {
        return Ok(f64::MIN_POSITIVE);
    }
    let nf = n as f64;
    let a = t / nf;
    let theta = cum.saddlepoint(a)?;
    let p = if theta.abs() < THETA_FLOOR {
        let k2 = cum.variance(0.0);
        let skew = cum.third(0.0) / k2.powf(1.5);
        let z = (t - nf * cum.mean(0.0)) / (nf * k2).sqrt();
        normal_sf(z) + normal_pdf(z) * skew / (6.0 * nf.sqrt()) * (z * z - 1.0)
    } else {
        let exponent = (nf * (a * theta - cum.cgf(theta))).max(0.0);
        let w = theta.signum() * (2.0 * exponent).sqrt();
        let u = theta * (nf * cum.variance(theta)).sqrt();
        normal_sf(w) + normal_pdf(w) * (1.0 / u - 1.0 / w)
    };
    if !p.is_finite() {
        return Err(Error::Numeric(format!("saddlepoint tail is {p} at n = {n}, A = {upper}, t = {t}")));
    }
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Truncated-exponential p-value of one hypothesis column.
pub fn truncexp_pvalue(dataset: &Dataset, hypothesis: usize) -> Result<f64> {
    let Domain::BoundedReal { upper } = dataset.domain() else {
        return Err(Error::DomainMismatch {
            expected: "bounded-real",
            found: dataset.domain().name(),
        });
    };
    if hypothesis >= dataset.cols() {
        return Err(Error::param(format!("hypothesis {hypothesis} out of range")));
    }
    let n = dataset.rows() as u64;
    let t = dataset.column_sum(hypothesis).min(n as f64 * upper);
    truncexp_tail(n, upper, t)
}

/// Grid steps per unit of `A` in [`sensitivity_scan_truncexp`].
pub const TRUNCEXP_GRID_STEPS: usize = 1000;

/// Numeric sensitivity of the truncated-exponential family: scans
/// `t` on a grid of step `A/1000` and takes the largest `ln p(t)/p(t + A)`
/// over pairs whose larger p-value exceeds `ν`. Not a proof; the profile
/// is tagged [`SensitivityKind::Numeric`].
pub fn sensitivity_scan_truncexp(n: u64, upper: f64, nu: f64) -> Result<SensitivityProfile> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::param(format!("nu must lie in [0, 1), got {nu}")));
    }
    let steps = TRUNCEXP_GRID_STEPS * n as usize;
    let h = upper / TRUNCEXP_GRID_STEPS as f64;
    let ln_p = (0..=steps)
        .map(|i| {
            let t = if i == steps { n as f64 * upper } else { i as f64 * h };
            truncexp_tail(n, upper, t).map(f64::ln)
        })
        .collect::<Result<Vec<_>>>()?;
    let ln_nu = nu.ln();
    let eta = (0..=steps - TRUNCEXP_GRID_STEPS)
        .filter(|&i| ln_p[i] > ln_nu)
        .map(|i| ln_p[i] - ln_p[i + TRUNCEXP_GRID_STEPS])
        .fold(0.0, f64::max);
    Ok(SensitivityProfile { eta, nu, kind: SensitivityKind::Numeric })
}

/// The two worked p-value families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFamily {
    Binomial,
    TruncExp,
}

impl TestFamily {
    pub fn pvalue(&self, dataset: &Dataset, hypothesis: usize) -> Result<f64> {
        match self {
            TestFamily::Binomial => binomial_pvalue(dataset, hypothesis),
            TestFamily::TruncExp => truncexp_pvalue(dataset, hypothesis),
        }
    }

    pub fn pvalues(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        (0..dataset.cols()).map(|j| self.pvalue(dataset, j)).collect()
    }

    /// Sensitivity profile of the family at the dataset's size.
    pub fn sensitivity(&self, dataset: &Dataset, nu: f64) -> Result<SensitivityProfile> {
        let n = dataset.rows() as u64;
        match (self, dataset.domain()) {
            (TestFamily::Binomial, Domain::Binary) => sensitivity_scan_binomial(n, nu),
            (TestFamily::TruncExp, Domain::BoundedReal { upper }) => sensitivity_scan_truncexp(n, upper, nu),
            (TestFamily::Binomial, d) => Err(Error::DomainMismatch { expected: "binary", found: d.name() }),
            (TestFamily::TruncExp, d) => Err(Error::DomainMismatch { expected: "bounded-real", found: d.name() }),
        }
    }

    /// Truncated log p-values `log max{ν, p_j}` for every hypothesis.
    pub fn log_pvalues(&self, dataset: &Dataset, nu: f64) -> Result<Vec<LogPValue>> {
        Ok(self
            .pvalues(dataset)?
            .into_iter()
            .enumerate()
            .map(|(hypothesis, p)| LogPValue { value: log_truncate(p, nu), hypothesis })
            .collect())
    }
}

impl std::str::FromStr for TestFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(TestFamily::Binomial),
            "truncexp" => Ok(TestFamily::TruncExp),
            other => Err(Error::param(format!("unknown test family `{other}`"))),
        }
    }
}
