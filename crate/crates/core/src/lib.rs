//! Differentially private false discovery rate control.
//!
//! The crate is organised bottom-up:
//!
//! * [`pvalue`]: datasets, exact and saddlepoint p-values, and multiplicative
//!   sensitivity profiles for the binomial and truncated-exponential tests.
//! * [`dp`]: Laplace noise, Report Noisy Min, peeling, and privacy budgets.
//! * [`procedures`]: BHq step-up and step-down, compliance, and PrivateBHq.
//! * [`fdr`]: false discovery proportions, the constants `C_k`, and the
//!   bounds built on them.
//! * [`simlab`]: data generators with dependence between true and false
//!   nulls and the Monte Carlo experiment runner.
//!
//! Hypothesis indices are 0-based throughout the library.

pub mod dp;
pub mod error;
pub mod fdr;
pub mod procedures;
pub mod pvalue;
pub mod rng;
pub mod simlab;
pub mod special;
pub mod stats;

pub use dp::{calibrate, peel, private_min, report_noisy_min, Noise, NoisyCandidate, PrivacyBudget, Regime};
pub use error::{Error, Result};
pub use fdr::{estimate_ck, estimate_ck_finite, estimate_ck_many, fdp, reference_ck, CkEstimate, FdpRecord};
pub use procedures::{
    bhq_step_down, bhq_step_up, gamma_cutoffs, inflated_level, is_compliant, private_bhq, CutoffSchedule,
    NoiseMode, PrivateBhqOutcome, RejectionSet,
};
pub use pvalue::{Dataset, Domain, LogPValue, SensitivityKind, SensitivityProfile, TestFamily};
pub use rng::{StreamRng, StreamSeed};
pub use stats::MeanSe;
