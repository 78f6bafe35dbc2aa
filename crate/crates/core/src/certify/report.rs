//! The certificate and its JSON and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annuli::{FlaringAudit, HyperbolicityAudit};
use crate::disjointness::{DisjointnessVerdict, PairCheck};
use crate::error::{Error, Result};
use crate::expansion::ExpansionVerdict;
use crate::graphmap::{Length, TrainTrackVerdict};
use crate::lamination::IndependenceVerdict;
use crate::pullback::StabilizationVerdict;

use super::config::CertificationConfig;

/// A loop `γ` with `[φ_j^k(γ)] = [γ^d]`: the mapping torus contains
/// `BS(1, d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsWitness {
    /// 1-based endomorphism index.
    pub endomorphism: usize,
    pub gamma: String,
    pub k: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairWitness {
    /// 1-based indices.
    pub pair: (usize, usize),
    /// Nontrivial element of `φ_i^n(F) ∩ g φ_j^n(F) g⁻¹` at the cap.
    pub element: String,
    pub power: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    #[serde(rename = "certified_hyperbolic")]
    CertifiedHyperbolic {
        #[serde(rename = "N")]
        n: u64,
    },
    #[serde(rename = "obstruction_BS")]
    ObstructionBs { witness: BsWitness },
    #[serde(rename = "not_disjoint")]
    NotDisjoint { witness: PairWitness },
    #[serde(rename = "inconclusive")]
    Inconclusive { reasons: Vec<String> },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::CertifiedHyperbolic { .. } => "certified_hyperbolic",
            Verdict::ObstructionBs { .. } => "obstruction_BS",
            Verdict::NotDisjoint { .. } => "not_disjoint",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }

    /// Process exit code: 0 certified, 2 obstruction, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::CertifiedHyperbolic { .. } => 0,
            Verdict::ObstructionBs { .. } => 2,
            Verdict::NotDisjoint { .. } | Verdict::Inconclusive { .. } => 3,
        }
    }
}

/// Sampled check of an expansion certificate at the chosen power.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub n: u64,
    pub loops: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndoRecord {
    pub images: Vec<String>,
    /// `rose` or `explicit`.
    pub representative: String,
    /// Sampled commutation of the representative with the endomorphism.
    pub coherent: bool,
    pub immersion: bool,
    pub train_track: TrainTrackVerdict,
    pub irreducible: bool,
    pub pf_eigenvalue: Option<f64>,
    /// Bilipschitz constant `K` of the change of marking.
    pub bilipschitz: Length,
    pub expansion_target: Length,
    pub pullback: Option<StabilizationVerdict>,
    pub expansion: Option<ExpansionVerdict>,
    pub expansion_check: Option<ExpansionCheck>,
    /// Sub-checks that could not run, with the error.
    pub errors: Vec<String>,
}

impl EndoRecord {
    pub fn pullback_power(&self) -> Option<usize> {
        match self.pullback {
            Some(StabilizationVerdict::StabilizedAt { n }) => Some(n),
            _ => None,
        }
    }

    pub fn expansion_power(&self) -> Option<usize> {
        self.expansion.as_ref().and_then(ExpansionVerdict::power)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointnessEvidence {
    pub search: DisjointnessVerdict,
    pub table: Vec<PairCheck>,
    /// Recheck at the chosen power: `None` if it was not run.
    pub at_power: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub endomorphism: usize,
    /// Combinatorial length of `f^k(e_1)`, `k = 0..`.
    pub leaf_lengths: Vec<usize>,
    /// Quasi-periodicity constant for length-2 subpaths.
    pub quasi_period: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependenceRecord {
    pub pair: (usize, usize),
    pub verdict: IndependenceVerdict,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LaminationEvidence {
    pub leaves: Vec<LeafRecord>,
    pub independence: Vec<IndependenceRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub endomorphisms: Vec<EndoRecord>,
    pub disjointness: Option<DisjointnessEvidence>,
    /// Common power; `None` if some power was not certified or the lcm
    /// overran its cap.
    #[serde(rename = "N")]
    pub power: Option<u64>,
    pub hyperbolicity_audit: Option<HyperbolicityAudit>,
    pub flaring_audit: Option<FlaringAudit>,
    pub lamination: Option<LaminationEvidence>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub config: CertificationConfig,
    pub config_digest: String,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn emit_report(c: &Certificate, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(c).expect("certificate serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => text_report(c).into_bytes(),
    }
}

pub fn parse_certificate(bytes: &[u8]) -> Result<Certificate> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn text_report(c: &Certificate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", c.verdict.name());
    match &c.verdict {
        Verdict::CertifiedHyperbolic { n } => {
            let _ = writeln!(s, "N = {n}");
        }
        Verdict::ObstructionBs { witness: w } => {
            let _ = writeln!(
                s,
                "endomorphism {}: [phi^{}({})] = [{}^{}]",
                w.endomorphism, w.k, w.gamma, w.gamma, w.d
            );
        }
        Verdict::NotDisjoint { witness: w } => {
            let _ = writeln!(
                s,
                "endomorphisms {} and {} share {} up to conjugacy at every power up to {}",
                w.pair.0, w.pair.1, w.element, w.power
            );
        }
        Verdict::Inconclusive { reasons } => {
            for r in reasons {
                let _ = writeln!(s, "  - {r}");
            }
        }
    }
    for (i, e) in c.evidence.endomorphisms.iter().enumerate() {
        let _ = writeln!(s, "endomorphism {}: {}", i + 1, e.images.join(", "));
        let lambda = e.pf_eigenvalue.map_or("-".into(), |l| format!("{l:.6}"));
        let _ = writeln!(
            s,
            "  {} representative, immersion {}, train track {}, irreducible {}, lambda {}",
            e.representative,
            e.immersion,
            matches!(e.train_track, TrainTrackVerdict::TrainTrack),
            e.irreducible,
            lambda
        );
        let show = |p: Option<usize>| p.map_or("-".to_string(), |n| n.to_string());
        let _ = writeln!(
            s,
            "  pullback power {}, expansion power {} (target {})",
            show(e.pullback_power()),
            show(e.expansion_power()),
            e.expansion_target
        );
        for err in &e.errors {
            let _ = writeln!(s, "  error: {err}");
        }
    }
    if let Some(d) = &c.evidence.disjointness {
        let _ = writeln!(s, "disjointness: {}", serde_json::to_string(&d.search).unwrap_or_default());
    }
    if let Some(n) = c.evidence.power {
        let _ = writeln!(s, "common power N = {n}");
    }
    if let Some(a) = &c.evidence.hyperbolicity_audit {
        let _ = writeln!(
            s,
            "(3,1) audit: {} annuli over {} words, {} violations",
            a.annuli,
            a.words.len(),
            a.violations.len()
        );
    }
    if let Some(a) = &c.evidence.flaring_audit {
        let _ = writeln!(
            s,
            "flaring audit (rho <= {}): {} annuli, {} flaring, {} thin girth, {} violations",
            a.rho_max,
            a.annuli,
            a.flaring,
            a.thin_girth,
            a.violations.len()
        );
    }
    for note in &c.evidence.notes {
        let _ = writeln!(s, "note: {note}");
    }
    let _ = writeln!(s, "config digest: {}", c.config_digest);
    let _ = writeln!(s, "version: {}", c.version);
    s
}
