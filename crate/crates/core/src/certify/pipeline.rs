//! The certification pipeline and the verdict rule.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::annuli::{audit_31_hyperbolicity, flaring_audit_all, RingMode};
use crate::disjointness::{
    all_conjugates_trivial_intersection, essential_disjointness_search, DisjointnessVerdict, ImageSubgroup,
    DEFAULT_IMAGE_BUDGET,
};
use crate::error::{Error, Result};
use crate::expansion::{expansion_power_with_target, expansion_violations, ExpansionScope, ExpansionVerdict};
use crate::graph::EdgePath;
use crate::graphmap::{random_immersed_loop, GraphMap, Length, TrainTrackVerdict};
use crate::lamination::{independence_probe, leaf_segment, quasi_periodicity_probe};
use crate::pullback::{stabilization_power, StabilizationVerdict};
use crate::words::{conjugate_in_free_group, Endomorphism, Letter, Word};

use super::config::CertificationConfig;
use super::report::{
    BsWitness, Certificate, DisjointnessEvidence, EndoRecord, Evidence, ExpansionCheck, IndependenceRecord,
    LaminationEvidence, LeafRecord, PairWitness, Verdict,
};

/// Largest common power considered.
pub const POWER_CAP: u64 = 1 << 20;
/// Largest edge image of a power that the sampled checks will compute.
pub const SAMPLE_IMAGE_BUDGET: u64 = 1 << 16;

const COHERENCE_SAMPLES: usize = 24;
const LEAF_DEPTH: usize = 8;

/// Runs the full pipeline. Fails only on an invalid config; every
/// sub-check failure or cap overrun ends up in the certificate.
pub fn certify(config: &CertificationConfig) -> Result<Certificate> {
    config.validate(1)?;
    let maps: Vec<GraphMap> = (0..config.endos.len())
        .map(|i| representative(config, i))
        .collect::<Result<_>>()?;
    let mut evidence = Evidence {
        endomorphisms: (0..config.endos.len())
            .into_par_iter()
            .map(|i| endo_record(config, i, &maps[i]))
            .collect(),
        notes: vec!["expansion is certified as a non-strict bound: l(f^N(a)) >= target * l(a)".into()],
        ..Evidence::default()
    };
    let r = config.endos.len();
    if r >= 2 {
        evidence.disjointness = Some(match essential_disjointness_search(&config.endos, config.caps.disjointness) {
            Ok((search, table)) => DisjointnessEvidence {
                search,
                table,
                at_power: None,
            },
            Err(e) => {
                evidence.notes.push(format!("disjointness search failed: {e}"));
                DisjointnessEvidence {
                    search: DisjointnessVerdict::CapExceeded { reached: 0 },
                    table: Vec::new(),
                    at_power: None,
                }
            }
        });
    }
    match common_power(&evidence) {
        Ok(n) => evidence.power = Some(n),
        Err(msg) => evidence.notes.push(msg),
    }
    if let Some(n) = evidence.power {
        run_at_power(config, &maps, n, &mut evidence);
    }
    if config.diagnostics {
        evidence.lamination = Some(lamination_evidence(config, &maps, &evidence));
    }
    let verdict = decide(&evidence);
    Ok(Certificate {
        verdict,
        evidence,
        config_digest: config_digest(config),
        config: config.clone(),
        version: format!("endocert {}", env!("CARGO_PKG_VERSION")),
    })
}

/// SHA-256 of the canonical JSON form of the config.
pub fn config_digest(config: &CertificationConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn representative(config: &CertificationConfig, i: usize) -> Result<GraphMap> {
    match config.representative(i) {
        Some(spec) => spec
            .build(config.rank)
            .map_err(|e| Error::Config(format!("marking_maps[{i}]: {e}"))),
        None => Ok(GraphMap::from_endomorphism(&config.endos[i])),
    }
}

fn rng_for(config: &CertificationConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    rng
}

fn random_word<R: Rng>(rank: usize, max_len: usize, rng: &mut R) -> Word {
    loop {
        let len = rng.random_range(1..=max_len);
        let raw: Vec<Letter> = (0..len)
            .map(|_| {
                let g = rng.random_range(1..=rank as Letter);
                if rng.random_bool(0.5) {
                    g
                } else {
                    -g
                }
            })
            .collect();
        let w = Word::reduce(&raw, rank).expect("letters in range").cyclic_reduce().0;
        if !w.is_empty() {
            return w;
        }
    }
}

/// Checks `[f(α)] = [φ(α)]` on generators, their pairwise products, and a
/// few random words.
fn coherent(f: &GraphMap, endo: &Endomorphism, rng: &mut ChaCha8Rng) -> Result<bool> {
    let n = endo.rank();
    let mut words = Vec::new();
    for i in 1..=n as Letter {
        words.push(Word::generator(i, n)?);
        for j in 1..=n as Letter {
            if i != j {
                words.push(Word::reduce(&[i, j], n)?);
                words.push(Word::reduce(&[i, -j], n)?);
            }
        }
    }
    for _ in 0..COHERENCE_SAMPLES {
        words.push(random_word(n, 8, rng));
    }
    let marked = f.domain();
    for w in &words {
        let l = marked.free_loop_of_word(w)?;
        let img = marked.read(&f.map_loop(&l, false)?);
        if !conjugate_in_free_group(&img, &endo.apply(w)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `K = max(σ(h), σ(h'), 1)` for the change of marking `h: R_n → Γ` along
/// the marking loops and its inverse `h'` reading the marking words.
fn marking_constant(f: &GraphMap) -> Length {
    let m = f.domain();
    let forward = m
        .generator_loops()
        .iter()
        .map(|p| m.path_length(p))
        .max()
        .unwrap_or_else(|| Length::from_integer(0));
    let backward = m
        .marking()
        .edge_words
        .iter()
        .zip(m.lengths())
        .map(|(w, l)| Length::from_integer(w.len() as u64) / *l)
        .max()
        .unwrap_or_else(|| Length::from_integer(0));
    forward.max(backward).max(Length::from_integer(1))
}

fn endo_record(config: &CertificationConfig, i: usize, f: &GraphMap) -> EndoRecord {
    let endo = &config.endos[i];
    let mut errors = Vec::new();
    let mut rng = rng_for(config, 1 + i as u64);
    let coherent = coherent(f, endo, &mut rng).unwrap_or_else(|e| {
        errors.push(format!("coherence: {e}"));
        false
    });
    let edges = f.graph().edge_count();
    let a = f.transition_matrix();
    let irreducible = a.is_irreducible();
    let pf_eigenvalue = if irreducible {
        a.pf_eigenvalue(1e-12)
            .map_err(|e| errors.push(format!("eigenvalue: {e}")))
            .ok()
    } else {
        None
    };
    let explicit = config.representative(i).is_some();
    let k = if explicit {
        marking_constant(f)
    } else {
        Length::from_integer(1)
    };
    let target = Length::from_integer(3) * k * k;
    let pullback = stabilization_power(f, config.caps.pullback)
        .map_err(|e| errors.push(format!("pullback: {e}")))
        .ok();
    let expansion = expansion_power_with_target(f, config.caps.expansion, target)
        .map_err(|e| errors.push(format!("expansion: {e}")))
        .ok();
    EndoRecord {
        images: endo.to_letter_strings(),
        representative: if explicit { "explicit" } else { "rose" }.into(),
        coherent,
        immersion: f.is_immersion(),
        train_track: f.verify_train_track(4 * edges * edges + 8),
        irreducible,
        pf_eigenvalue,
        bilipschitz: k,
        expansion_target: target,
        pullback,
        expansion,
        expansion_check: None,
        errors,
    }
}

/// lcm of the certified powers, or the reason there is none.
fn common_power(ev: &Evidence) -> std::result::Result<u64, String> {
    let mut powers = Vec::new();
    for (i, e) in ev.endomorphisms.iter().enumerate() {
        powers.push(
            e.pullback_power()
                .ok_or_else(|| format!("no pullback power for endomorphism {}", i + 1))?,
        );
        powers.push(
            e.expansion_power()
                .ok_or_else(|| format!("no expansion power for endomorphism {}", i + 1))?,
        );
    }
    if let Some(d) = &ev.disjointness {
        match d.search {
            DisjointnessVerdict::DisjointAt { n } => powers.push(n),
            _ => return Err("no disjointness power".into()),
        }
    }
    let mut n: u64 = 1;
    for p in powers {
        n = n.lcm(&(p as u64));
        if n > POWER_CAP {
            return Err(format!("common power exceeds {POWER_CAP}"));
        }
    }
    Ok(n)
}

/// Upper bound on the longest edge image of `f^n`, saturating at `cap + 1`.
fn image_bound(f: &GraphMap, n: u64, cap: u64) -> u64 {
    let mut lens = vec![1u64; f.graph().edge_count()];
    for _ in 0..n {
        lens = f
            .edge_images()
            .iter()
            .map(|p| {
                p.edges
                    .iter()
                    .fold(0u64, |acc, d| acc.saturating_add(lens[d.edge()]))
                    .min(cap + 1)
            })
            .collect();
        if lens.iter().all(|&l| l > cap) {
            break;
        }
    }
    lens.into_iter().max().unwrap_or(0)
}

fn sample_loops(f: &GraphMap, count: usize, max_len: usize, rng: &mut ChaCha8Rng) -> Vec<EdgePath> {
    (0..count).map(|_| random_immersed_loop(f.graph(), max_len, rng)).collect()
}

fn run_at_power(config: &CertificationConfig, maps: &[GraphMap], n: u64, ev: &mut Evidence) {
    let caps = &config.caps;
    // Expansion, sampled at exactly N on each representative.
    let checks: Vec<std::result::Result<Option<ExpansionCheck>, String>> = maps
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let rec = &ev.endomorphisms[i];
            if !rec.immersion {
                return Ok(None);
            }
            if image_bound(f, n, SAMPLE_IMAGE_BUDGET) > SAMPLE_IMAGE_BUDGET {
                return Err(format!("endomorphism {}: images of power {n} exceed the sample budget", i + 1));
            }
            let mut rng = rng_for(config, 1000 + i as u64);
            let loops = sample_loops(f, caps.expansion_loops, caps.expansion_loop_length, &mut rng);
            let bad = expansion_violations(f, n as usize, rec.expansion_target, &loops).map_err(|e| e.to_string())?;
            Ok(Some(ExpansionCheck {
                n,
                loops: loops.len(),
                violations: bad.len(),
            }))
        })
        .collect();
    for (i, c) in checks.into_iter().enumerate() {
        match c {
            Ok(c) => ev.endomorphisms[i].expansion_check = c,
            Err(msg) => ev.endomorphisms[i].errors.push(msg),
        }
    }

    // Disjointness, rechecked at N unless N is where it was found.
    if let Some(d) = ev.disjointness.as_mut() {
        d.at_power = match d.search {
            DisjointnessVerdict::DisjointAt { n: found } if found as u64 == n => Some(true),
            _ => match disjoint_at(&config.endos, n) {
                Ok(b) => Some(b),
                Err(e) => {
                    ev.notes.push(format!("disjointness at N = {n}: {e}"));
                    None
                }
            },
        };
    }

    // Audits over the rose with the maps φ_j^N.
    let roses: Vec<GraphMap> = config.endos.iter().map(GraphMap::from_endomorphism).collect();
    if roses
        .iter()
        .any(|f| image_bound(f, n, SAMPLE_IMAGE_BUDGET) > SAMPLE_IMAGE_BUDGET)
    {
        ev.notes.push(format!("audits skipped: images of power {n} exceed the sample budget"));
        return;
    }
    let powered: Vec<GraphMap> = config
        .endos
        .iter()
        .map(|e| GraphMap::from_endomorphism(&e.power(n as usize).expect("within budget")))
        .collect();
    let mut rng = rng_for(config, 2000);
    let loops = sample_loops(&powered[0], caps.audit_loops, caps.audit_loop_length, &mut rng);
    match audit_31_hyperbolicity(&powered, &loops, RingMode::Free) {
        Ok(a) => ev.hyperbolicity_audit = Some(a),
        Err(e) => ev.notes.push(format!("(3,1) audit failed: {e}")),
    }
    match flaring_audit_all(&powered, &loops, caps.rho_max, RingMode::Free) {
        Ok(a) => ev.flaring_audit = Some(a),
        Err(e) => ev.notes.push(format!("flaring audit failed: {e}")),
    }
}

/// Whether every pair of `φ_i^n(F_n)`, `φ_j^n(F_n)` intersects all
/// conjugates of the other trivially.
pub fn disjoint_at(endos: &[Endomorphism], n: u64) -> Result<bool> {
    if endos
        .iter()
        .any(|e| image_bound(&GraphMap::from_endomorphism(e), n, DEFAULT_IMAGE_BUDGET as u64) > DEFAULT_IMAGE_BUDGET as u64)
    {
        return Err(Error::InvalidArgument(format!("images of power {n} exceed the budget")));
    }
    let images: Vec<ImageSubgroup> = endos
        .par_iter()
        .map(|e| ImageSubgroup::new(e, n as usize))
        .collect::<Result<_>>()?;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            if !all_conjugates_trivial_intersection(&images[i], &images[j])? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn lamination_evidence(config: &CertificationConfig, maps: &[GraphMap], ev: &Evidence) -> LaminationEvidence {
    let eligible: Vec<usize> = ev
        .endomorphisms
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.train_track == TrainTrackVerdict::TrainTrack && e.irreducible && e.pf_eigenvalue.is_some_and(|l| l > 1.0)
        })
        .map(|(i, _)| i)
        .collect();
    let mut out = LaminationEvidence::default();
    for &i in &eligible {
        let f = &maps[i];
        let mut leaf_lengths = Vec::new();
        let mut last = None;
        for k in 0..=LEAF_DEPTH {
            match leaf_segment(f, 0, k) {
                Ok(seg) => {
                    leaf_lengths.push(seg.path.len());
                    last = Some(seg);
                }
                Err(_) => break,
            }
        }
        out.leaves.push(LeafRecord {
            endomorphism: i + 1,
            leaf_lengths,
            quasi_period: last.and_then(|seg| quasi_periodicity_probe(&seg, 2, 1024)),
        });
    }
    for (a, &i) in eligible.iter().enumerate() {
        for &j in &eligible[a + 1..] {
            if config.representative(i).is_some() || config.representative(j).is_some() {
                continue;
            }
            if let Ok(verdict) = independence_probe(&maps[i], &maps[j], 4, 6) {
                out.independence.push(IndependenceRecord {
                    pair: (i + 1, j + 1),
                    verdict,
                });
            }
        }
    }
    out
}

/// The verdict rule. Precedence: a `BS(1, d)` witness, then a pair that is
/// not disjoint at the cap, then any missing or failed check (inconclusive);
/// certification only when nothing is missing.
pub fn decide(ev: &Evidence) -> Verdict {
    for (i, e) in ev.endomorphisms.iter().enumerate() {
        if let Some(StabilizationVerdict::InvariantLoop { witness, .. }) = &e.pullback {
            return Verdict::ObstructionBs {
                witness: BsWitness {
                    endomorphism: i + 1,
                    gamma: witness.gamma.to_letter_string(),
                    k: witness.k,
                    d: witness.d,
                },
            };
        }
    }
    for (i, e) in ev.endomorphisms.iter().enumerate() {
        if let Some(ExpansionVerdict::PeriodicLoopObstruction { word, period, .. }) = &e.expansion {
            return Verdict::ObstructionBs {
                witness: BsWitness {
                    endomorphism: i + 1,
                    gamma: word.to_letter_string(),
                    k: *period,
                    d: 1,
                },
            };
        }
    }
    if let Some(d) = &ev.disjointness {
        if let DisjointnessVerdict::NotDisjointAtCap { pair, witness } = &d.search {
            return Verdict::NotDisjoint {
                witness: PairWitness {
                    pair: (pair.0 + 1, pair.1 + 1),
                    element: witness.word.to_letter_string(),
                    power: d.table.iter().map(|c| c.n).max().unwrap_or(0),
                },
            };
        }
    }
    let mut reasons = Vec::new();
    let n = ev.power;
    for (i, e) in ev.endomorphisms.iter().enumerate() {
        let mut fail = |what: &str| reasons.push(format!("endomorphism {}: {what}", i + 1));
        if !e.coherent {
            fail("representative does not induce the endomorphism");
        }
        if !e.immersion {
            fail("not an immersion");
        }
        if e.train_track != TrainTrackVerdict::TrainTrack {
            fail("not a train track map");
        }
        if !e.irreducible {
            fail("transition matrix is reducible");
        }
        if !e.pf_eigenvalue.is_some_and(|l| l > 1.0) {
            fail("not expanding");
        }
        match (e.pullback_power(), n) {
            (None, _) => fail("pullbacks did not stabilize within the cap"),
            (Some(p), Some(n)) if p as u64 > n => fail("pullback power exceeds N"),
            _ => {}
        }
        match (&e.expansion, n) {
            (Some(ExpansionVerdict::Power { n: p, scope, .. }), Some(n)) => {
                if n % *p as u64 != 0 {
                    fail("expansion power does not divide N");
                }
                if *scope != ExpansionScope::ImmersedLoops {
                    fail("expansion certified for legal loops only");
                }
            }
            (Some(ExpansionVerdict::Power { .. }), None) => {}
            _ => fail("no expansion power within the cap"),
        }
        if n.is_some() {
            match &e.expansion_check {
                Some(c) if Some(c.n) == n && c.violations == 0 => {}
                Some(_) => fail("sampled expansion check failed at N"),
                None => fail("sampled expansion check not run at N"),
            }
        }
        for err in &e.errors {
            fail(err);
        }
    }
    if ev.endomorphisms.is_empty() {
        reasons.push("no endomorphisms".into());
    }
    if ev.endomorphisms.len() >= 2 && ev.disjointness.is_none() {
        reasons.push("essential disjointness not checked".into());
    }
    if let Some(d) = &ev.disjointness {
        match d.search {
            DisjointnessVerdict::DisjointAt { .. } => {}
            _ => reasons.push("essential disjointness not established within the cap".into()),
        }
        if n.is_some() && d.at_power != Some(true) {
            reasons.push("essential disjointness not confirmed at N".into());
        }
    }
    match n {
        None => reasons.push("no common power".into()),
        Some(_) => {
            match &ev.hyperbolicity_audit {
                Some(a) if a.violations.is_empty() && a.annuli > 0 => {}
                Some(a) if a.annuli == 0 => reasons.push("(3,1) audit ran on no annuli".into()),
                Some(a) => reasons.push(format!("(3,1) audit: {} violations", a.violations.len())),
                None => reasons.push("(3,1) audit not run".into()),
            }
            match &ev.flaring_audit {
                Some(a) if a.violations.is_empty() && a.annuli > 0 => {}
                Some(a) if a.annuli == 0 => reasons.push("flaring audit ran on no annuli".into()),
                Some(a) => reasons.push(format!("flaring audit: {} violations", a.violations.len())),
                None => reasons.push("flaring audit not run".into()),
            }
        }
    }
    match (reasons.is_empty(), n) {
        (true, Some(n)) => Verdict::CertifiedHyperbolic { n },
        _ => Verdict::Inconclusive { reasons },
    }
}
