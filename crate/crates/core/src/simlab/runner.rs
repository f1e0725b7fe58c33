use std::io::Write;

use rayon::prelude::*;

use super::adversarial::{run_adversarial, InfeasiblePolicy};
use super::generators::{gen_block_example, gen_normal_example, gen_student_example, StudentSample};
use super::tests_pvalues::{t_pvalues, z_pvalues, Alternative};
use crate::error::{Error, Result};
use crate::fdr::{bound_fdr_k, bound_fdr_upper_k, FdpRecord};
use crate::procedures::bhq_step_up;
use crate::pvalue::default_nu;
use crate::rng::StreamSeed;
use crate::stats::{format_sig12, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    /// Normal design; the grid holds `m1` values.
    Normal,
    /// t statistics from `n` draws of the normal design; the grid holds `m1`.
    Student,
    /// `m` independent 2×2 blocks; the grid holds correlations `ρ`.
    Block,
    /// The adversarial compliant procedure; the grid holds `m0` values.
    Adversarial,
}

impl ExampleKind {
    pub fn name(self) -> &'static str {
        match self {
            ExampleKind::Normal => "normal",
            ExampleKind::Student => "student",
            ExampleKind::Block => "block",
            ExampleKind::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(ExampleKind::Normal),
            "student" => Ok(ExampleKind::Student),
            "block" => Ok(ExampleKind::Block),
            "adversarial" => Ok(ExampleKind::Adversarial),
            other => Err(Error::param(format!("unknown example `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: ExampleKind,
    /// Number of hypotheses (number of blocks for [`ExampleKind::Block`]).
    pub m: usize,
    pub grid: Vec<f64>,
    pub q: f64,
    pub reps: usize,
    pub alternative: Alternative,
    /// Non-null mean: `μ` for normal and student, `μ̃` for block.
    pub mu: f64,
    /// Observations per coordinate for the student example.
    pub n: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    /// Adversarial example only.
    pub infeasible: InfeasiblePolicy,
}

impl ExperimentConfig {
    /// Defaults: `q = 0.1`, 100 replicates, one-sided, `k ∈ {1, 2, 5}`,
    /// `μ = 2` (`μ̃ = 1.5` for blocks), `n = 10`.
    pub fn new(example: ExampleKind, m: usize, grid: Vec<f64>) -> Self {
        ExperimentConfig {
            example,
            m,
            grid,
            q: 0.1,
            reps: 100,
            alternative: Alternative::OneSided,
            mu: if example == ExampleKind::Block { 1.5 } else { 2.0 },
            n: 10,
            ks: vec![1, 2, 5],
            seed: 0,
            infeasible: InfeasiblePolicy::Exclude,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::param(format!("level q must lie in (0, 1), got {}", self.q)));
        }
        if self.reps == 0 {
            return Err(Error::param("need at least one replicate"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::param("k list must be non-empty with every k ≥ 1"));
        }
        if self.grid.is_empty() {
            return Err(Error::param("parameter grid is empty"));
        }
        if self.example != ExampleKind::Block {
            for &g in &self.grid {
                if g < 0.0 || g.fract() != 0.0 || g > self.m as f64 {
                    return Err(Error::param(format!(
                        "grid value {g} is not a count between 0 and m = {}",
                        self.m
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One (grid point, k) line of output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub example: ExampleKind,
    pub m: usize,
    /// `m1`, `ρ` or `m0`, depending on the example.
    pub point: f64,
    pub alternative: Alternative,
    pub k: usize,
    pub pi0: f64,
    pub fdr_hat: f64,
    pub stderr: f64,
    /// `C_k π0 q` for `k ≥ 2`; for `k = 1`, the `FDR^1` bound `(1 + 2/√q) q`.
    pub bound: f64,
    /// Replicates that produced a record.
    pub replicates: usize,
    /// Adversarial replicates whose maximiser was infeasible, or student
    /// coordinates with zero sample variance.
    pub diagnostics: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    /// Rows for one grid point, ordered as the config's k list.
    pub fn point_rows(&self, point: f64) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.point == point).collect()
    }

    pub fn row(&self, point: f64, k: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.point == point && r.k == k)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["example", "m", "m1_or_rho", "alternative", "k", "fdr_hat", "stderr", "bound"])?;
        for r in &self.rows {
            w.write_record([
                r.example.name().to_string(),
                r.m.to_string(),
                r.point.to_string(),
                r.alternative.to_string(),
                r.k.to_string(),
                format_sig12(r.fdr_hat),
                format_sig12(r.stderr),
                format_sig12(r.bound),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and standard error of `FDP_k` over replicates, one per `k`.
pub fn fdr_estimates(records: &[FdpRecord], ks: &[usize]) -> Vec<MeanSe> {
    ks.iter()
        .map(|&k| {
            let xs: Vec<f64> = records.iter().map(|r| r.fdp_k(k)).collect();
            MeanSe::from_samples(&xs)
        })
        .collect()
}

fn bound_for(k: usize, pi0: f64, q: f64) -> Result<f64> {
    if k == 1 {
        Ok(bound_fdr_upper_k(1, q))
    } else {
        bound_fdr_k(k, pi0, q)
    }
}

fn bhq_record(p: &[f64], is_null: &[bool], q: f64) -> Result<FdpRecord> {
    let rej = bhq_step_up(p, q)?.with_truth(is_null)?;
    FdpRecord::new(rej.false_rejections().unwrap_or(0), rej.count())
}

/// One replicate: data, p-values, BHq step-up, `(V, R)`, plus a diagnostic count.
fn replicate(config: &ExperimentConfig, point: f64, seed: StreamSeed) -> Result<(FdpRecord, usize)> {
    let mut rng = seed.rng();
    match config.example {
        ExampleKind::Normal => {
            let s = gen_normal_example(config.m, point as usize, config.mu, &mut rng)?;
            let p = z_pvalues(&s.statistics, config.alternative);
            Ok((bhq_record(&p, &s.is_null, config.q)?, 0))
        }
        ExampleKind::Student => {
            let StudentSample { t, is_null, degenerate } =
                gen_student_example(config.m, point as usize, config.mu, config.n, &mut rng)?;
            let floor = default_nu(config.m, 0.5);
            let p = t_pvalues(&t, StudentSample::df(config.n), config.alternative, floor);
            Ok((bhq_record(&p, &is_null, config.q)?, degenerate))
        }
        ExampleKind::Block => {
            let s = gen_block_example(config.m, config.mu, point, &mut rng)?;
            let p = z_pvalues(&s.statistics, config.alternative);
            Ok((bhq_record(&p, &s.is_null, config.q)?, 0))
        }
        ExampleKind::Adversarial => unreachable!("adversarial points are run separately"),
    }
}

/// Runs every grid point in configuration order. Replicate `r` of point `g`
/// draws from `StreamSeed::new(seed).child2(g, r)`, so output is independent
/// of the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let master = StreamSeed::new(config.seed);
    let mut rows = Vec::with_capacity(config.grid.len() * config.ks.len());

    for (g, &point) in config.grid.iter().enumerate() {
        let row = |k: usize, pi0: f64, est: MeanSe, diagnostics: usize| -> Result<ResultRow> {
            Ok(ResultRow {
                example: config.example,
                m: config.m,
                point,
                alternative: config.alternative,
                k,
                pi0,
                fdr_hat: est.mean,
                stderr: est.std_error,
                bound: bound_for(k, pi0, config.q)?,
                replicates: est.n,
                diagnostics,
            })
        };

        if config.example == ExampleKind::Adversarial {
            let m0 = point as usize;
            let pi0 = m0 as f64 / config.m as f64;
            for (ki, &k) in config.ks.iter().enumerate() {
                let seed = master.child2(g as u64, ki as u64);
                let s = run_adversarial(config.m, m0, k, config.q, config.reps, config.infeasible, seed)?;
                rows.push(row(k, pi0, s.fdp, s.infeasible)?);
            }
            continue;
        }

        let pi0 = match config.example {
            ExampleKind::Block => 0.5,
            _ => (config.m as f64 - point) / config.m as f64,
        };
        let outcomes: Vec<(FdpRecord, usize)> = (0..config.reps)
            .into_par_iter()
            .map(|r| replicate(config, point, master.child2(g as u64, r as u64)))
            .collect::<Result<_>>()?;
        let records: Vec<FdpRecord> = outcomes.iter().map(|o| o.0).collect();
        let diagnostics = outcomes.iter().map(|o| o.1).sum();
        for (est, &k) in fdr_estimates(&records, &config.ks).into_iter().zip(&config.ks) {
            rows.push(row(k, pi0, est, diagnostics)?);
        }
    }
    Ok(ExperimentResult { rows })
}
