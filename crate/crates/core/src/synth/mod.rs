//! Synthetic cohorts with a planted risk signal, and brute-force oracles.

mod generate;
pub mod oracle;

pub use generate::{generate_cohort, patient_id, render_slide, write_synthetic, SynthCohort, SynthSpec};
