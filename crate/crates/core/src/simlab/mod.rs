//! Simulation lab: data generators with negative dependence between true
//! and false nulls, analytic p-values, the adversarial compliant procedure,
//! and the experiment runner behind the FDR_k figures.

mod adversarial;
mod generators;
mod runner;
mod tests_pvalues;

pub use adversarial::{
    adversarial_compliant, adversarial_compliant_with, run_adversarial, AdversarialDraw, AdversarialSummary,
    InfeasiblePolicy,
};
pub use generators::{
    gen_block_example, gen_normal_example, gen_student_example, LabelledStatistics, NormalExample,
    StudentSample,
};
pub use runner::{fdr_estimates, run_experiment, ExampleKind, ExperimentConfig, ExperimentResult, ResultRow};
pub use tests_pvalues::{t_pvalues, z_pvalues, Alternative};
