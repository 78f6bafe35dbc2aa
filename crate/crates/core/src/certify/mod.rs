//! End-to-end certification: config in, certificate out.

mod config;
mod pipeline;
mod report;

pub use config::{parse_config, parse_config_with, Caps, CertificationConfig, ParseOptions, RepresentativeSpec};
pub use pipeline::{certify, config_digest, decide, disjoint_at, POWER_CAP, SAMPLE_IMAGE_BUDGET};
pub use report::{
    emit_report, parse_certificate, BsWitness, Certificate, DisjointnessEvidence, EndoRecord, Evidence,
    ExpansionCheck, IndependenceRecord, LaminationEvidence, LeafRecord, PairWitness, ReportFormat, Verdict,
};
