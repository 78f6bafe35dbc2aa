//! Annulus words, annuli built from loops and words, ring lengths, and the
//! hyperbolicity and flaring audits.
//!
//! A word `w = w_0 w_1 ⋯ w_{k-1}` over `D_1^{±1}, …, D_r^{±1}` is read left to
//! right: letter `w_t` relates ring `t` to ring `t + 1`. A positive letter
//! `D_j` means ring `t + 1` is `f_j` of ring `t`; a negative letter `D_j⁻¹`
//! means ring `t` is `f_j` of ring `t + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::disjointness::ImageSubgroup;
use crate::error::{Error, Result};
use crate::graph::EdgePath;
use crate::graphmap::{GraphMap, Length, MarkedGraph};
use crate::words::{conjugate_in_free_group, Endomorphism, Word};

/// A word in the stable letters, `±j` standing for `D_j^{±1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnulusWord {
    letters: Vec<i32>,
}

/// Flags of [`AnnulusWord::classify`]; both can hold at once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordClass {
    pub positive: bool,
    pub unidirectional: bool,
}

impl AnnulusWord {
    pub fn new(letters: Vec<i32>) -> Result<AnnulusWord> {
        if letters.contains(&0) {
            return Err(Error::InvalidArgument("stable letters are numbered from 1".into()));
        }
        Ok(AnnulusWord { letters })
    }

    /// Parses `"D1 D2^-1 D1^2"`-style text. Exponents expand to repeated letters.
    pub fn parse(text: &str) -> Result<AnnulusWord> {
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            let bad = || Error::WordSyntax(tok.to_string());
            let rest = tok.strip_prefix('D').ok_or_else(bad)?;
            let (idx, exp) = match rest.split_once('^') {
                Some((i, e)) => (i, e.parse::<i32>().map_err(|_| bad())?),
                None => (rest, 1),
            };
            let idx: i32 = idx.parse().map_err(|_| bad())?;
            if idx <= 0 || exp == 0 {
                return Err(bad());
            }
            let l = if exp > 0 { idx } else { -idx };
            letters.extend(std::iter::repeat_n(l, exp.unsigned_abs() as usize));
        }
        AnnulusWord::new(letters)
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// The word read along the reversed annulus.
    pub fn inverse(&self) -> AnnulusWord {
        AnnulusWord {
            letters: self.letters.iter().rev().map(|&l| -l).collect(),
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != -w[1])
    }

    /// Reduced, with no positive letter directly followed by a negative one:
    /// a block of negative letters, then a block of positive letters.
    pub fn is_admissible(&self) -> bool {
        self.is_reduced() && self.letters.windows(2).all(|w| !(w[0] > 0 && w[1] < 0))
    }

    /// The stricter reading: admissible, and the negative block is a power
    /// of a single generator.
    pub fn is_admissible_strict(&self) -> bool {
        let neg: Vec<i32> = self.letters.iter().copied().take_while(|&l| l < 0).collect();
        self.is_admissible() && neg.windows(2).all(|w| w[0] == w[1])
    }

    /// Length of the leading negative block.
    pub fn negative_block(&self) -> usize {
        self.letters.iter().take_while(|&&l| l < 0).count()
    }

    pub fn classify(&self) -> Result<WordClass> {
        if !self.is_admissible() {
            return Err(Error::NotAdmissible(self.to_string()));
        }
        let positive = self.letters.iter().all(|&l| l > 0);
        let unidirectional = self.letters.windows(2).all(|w| w[0] == w[1]);
        Ok(WordClass {
            positive,
            unidirectional,
        })
    }

    /// Every admissible word of length `k` over `r` stable letters.
    pub fn admissible_words(r: usize, k: usize) -> Vec<AnnulusWord> {
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for w in &out {
                for j in 1..=r as i32 {
                    for l in [-j, j] {
                        let mut v: Vec<i32> = w.clone();
                        v.push(l);
                        next.push(v);
                    }
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|letters| AnnulusWord { letters })
            .filter(AnnulusWord::is_admissible)
            .collect()
    }
}

impl fmt::Display for AnnulusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|&l| if l > 0 { format!("D{l}") } else { format!("D{}^-1", -l) })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

pub fn is_admissible(w: &AnnulusWord) -> bool {
    w.is_admissible()
}

pub fn classify_word(w: &AnnulusWord) -> Result<WordClass> {
    w.classify()
}

/// How ring lengths are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingMode {
    /// Cyclically tight loops, cyclic length.
    #[default]
    Free,
    /// Loops at the base vertex, tightened rel basepoint.
    Based,
}

/// Rings of an annulus over a common marked graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annulus {
    pub rings: Vec<EdgePath>,
    pub lengths: Vec<Length>,
    pub word: AnnulusWord,
    /// Bound `ρ` with `ℓ(τ) + 1 ≤ ρ` for the trace segments.
    pub thinness: usize,
    pub mode: RingMode,
}

impl Annulus {
    /// Index of the middle ring `Δ_0`.
    pub fn middle(&self) -> usize {
        self.word.len() / 2
    }

    pub fn girth(&self) -> Length {
        self.lengths[self.middle()]
    }

    /// Checks that consecutive rings are related by the maps as the word
    /// prescribes, up to conjugacy.
    pub fn verify(&self, maps: &[GraphMap]) -> Result<bool> {
        if self.rings.len() != self.word.len() + 1 {
            return Err(Error::RingCount {
                expected: self.word.len() + 1,
                found: self.rings.len(),
            });
        }
        let marked = maps[0].domain();
        let endos: Vec<Endomorphism> = maps.iter().map(GraphMap::induced_endomorphism).collect::<Result<_>>()?;
        for (t, &l) in self.word.letters().iter().enumerate() {
            let (src, dst) = if l > 0 { (t, t + 1) } else { (t + 1, t) };
            let phi = &endos[l.unsigned_abs() as usize - 1];
            let img = phi.apply(&marked.read(&self.rings[src]))?;
            if !conjugate_in_free_group(&img, &marked.read(&self.rings[dst])) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn check_maps(maps: &[GraphMap], w: &AnnulusWord) -> Result<()> {
    let Some(first) = maps.first() else {
        return Err(Error::InvalidArgument("no maps given".into()));
    };
    if maps.iter().any(|f| !f.is_self_map() || f.graph() != first.graph()) {
        return Err(Error::DifferentGraphs);
    }
    if let Some(&l) = w.letters().iter().find(|l| l.unsigned_abs() as usize > maps.len()) {
        return Err(Error::InvalidArgument(format!("letter D{} has no map", l.abs())));
    }
    Ok(())
}

/// Image of a ring under `f`, as a ring of the same mode.
fn map_ring(f: &GraphMap, ring: &EdgePath, mode: RingMode) -> Result<EdgePath> {
    match mode {
        RingMode::Free => f.map_loop(ring, false),
        RingMode::Based => {
            let g = f.graph();
            let base = f.domain().base();
            let tree = g.spanning_tree(base);
            let to = g.tree_path(&tree, base, f.vertex_map()[ring.start]);
            let img = f.map_loop(ring, true)?;
            Ok(to.then(&img).then(&to.reversed(g)).tightened())
        }
    }
}

fn ring_of_word(marked: &MarkedGraph, w: &Word, mode: RingMode) -> Result<EdgePath> {
    match mode {
        RingMode::Free => marked.free_loop_of_word(w),
        RingMode::Based => marked.loop_of_word(w),
    }
}

/// `Δ(α, w)` with `α` as the first ring, free mode.
pub fn build_annulus(alpha: &EdgePath, w: &AnnulusWord, maps: &[GraphMap]) -> Result<Annulus> {
    build_annulus_at(alpha, 0, w, maps, RingMode::Free)
}

/// Builds the annulus whose ring `anchor` is `alpha`, propagating both ways.
/// Moving against a letter's map needs a preimage; a block `D_j^{∓s}`
/// crossed that way is handled with one preimage under `f_j^s`.
pub fn build_annulus_at(
    alpha: &EdgePath,
    anchor: usize,
    w: &AnnulusWord,
    maps: &[GraphMap],
    mode: RingMode,
) -> Result<Annulus> {
    check_maps(maps, w)?;
    if !w.is_reduced() {
        return Err(Error::NotAdmissible(w.to_string()));
    }
    if anchor > w.len() {
        return Err(Error::InvalidArgument("anchor ring out of range".into()));
    }
    let marked = maps[0].domain();
    let g = marked.graph();
    let alpha = match mode {
        RingMode::Free => alpha.cyclically_tightened(g),
        RingMode::Based => alpha.tightened(),
    };
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("annulus rings must be nontrivial loops".into()));
    }
    let k = w.len();
    let letters = w.letters();
    let mut rings: Vec<Option<EdgePath>> = vec![None; k + 1];
    rings[anchor] = Some(alpha);

    // Rightwards: letter t takes ring t to ring t + 1.
    let mut t = anchor;
    while t < k {
        let l = letters[t];
        let j = l.unsigned_abs() as usize - 1;
        let cur = rings[t].clone().expect("filled");
        if l > 0 {
            rings[t + 1] = Some(map_ring(&maps[j], &cur, mode)?);
            t += 1;
        } else {
            let s = letters[t..].iter().take_while(|&&x| x == l).count();
            let chain = preimage_chain(&maps[j], j + 1, &cur, s, mode)?;
            for (i, r) in chain.into_iter().enumerate() {
                rings[t + 1 + i] = Some(r);
            }
            t += s;
        }
    }
    // Leftwards: letter t - 1 relates ring t - 1 to ring t.
    let mut t = anchor;
    while t > 0 {
        let l = letters[t - 1];
        let j = l.unsigned_abs() as usize - 1;
        let cur = rings[t].clone().expect("filled");
        if l < 0 {
            rings[t - 1] = Some(map_ring(&maps[j], &cur, mode)?);
            t -= 1;
        } else {
            let s = letters[..t].iter().rev().take_while(|&&x| x == l).count();
            let chain = preimage_chain(&maps[j], j + 1, &cur, s, mode)?;
            for (i, r) in chain.into_iter().enumerate() {
                rings[t - 1 - i] = Some(r);
            }
            t -= s;
        }
    }
    let rings: Vec<EdgePath> = rings.into_iter().map(|r| r.expect("all rings filled")).collect();
    let lengths = rings.iter().map(|r| marked.path_length(r)).collect();
    Ok(Annulus {
        rings,
        lengths,
        word: w.clone(),
        thinness: 1,
        mode,
    })
}

/// `[f^{s-1}(β), …, f(β), β]` for `β` with `f^s(β) ≃ α`.
fn preimage_chain(f: &GraphMap, index: usize, alpha: &EdgePath, s: usize, mode: RingMode) -> Result<Vec<EdgePath>> {
    let marked = f.domain();
    let endo = f.induced_endomorphism()?;
    let img = ImageSubgroup::new(&endo, s)?;
    let target = marked.read(alpha);
    let beta = match mode {
        RingMode::Free => img.conjugate_preimage(&target),
        RingMode::Based => img.preimage(&target).or_else(|| img.conjugate_preimage(&target)),
    }
    .ok_or(Error::MissingPreimage { map: index, power: s })?;
    let beta = ring_of_word(marked, &beta, mode)?;
    if beta.is_empty() {
        return Err(Error::MissingPreimage { map: index, power: s });
    }
    let mut chain = vec![beta];
    for _ in 1..s {
        let next = map_ring(f, chain.last().expect("nonempty"), mode)?;
        chain.push(next);
    }
    chain.reverse();
    Ok(chain)
}

/// `λ ℓ_0 ≤ max(ℓ_{-n}, ℓ_n)` for ring lengths `ℓ_{-n}, …, ℓ_n`.
pub fn check_lambda_hyperbolic(lengths: &[Length], lambda: Length, n: usize) -> Result<bool> {
    if lengths.len() != 2 * n + 1 {
        return Err(Error::RingCount {
            expected: 2 * n + 1,
            found: lengths.len(),
        });
    }
    let end = lengths[0].max(lengths[2 * n]);
    Ok(lambda * lengths[n] <= end)
}

/// A failed `(λ, 1)` check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub word: AnnulusWord,
    pub loop_word: Word,
    pub lengths: Vec<Length>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbolicityAudit {
    /// Words audited, one per orientation class.
    pub words: Vec<AnnulusWord>,
    pub annuli: usize,
    pub violations: Vec<AuditViolation>,
}

/// Length-2 admissible words, one per orientation class, never the
/// all-negative representative.
pub fn audit_words(r: usize) -> Vec<AnnulusWord> {
    let mut out: Vec<AnnulusWord> = Vec::new();
    for w in AnnulusWord::admissible_words(r, 2) {
        let inv = w.inverse();
        let rep = if w.letters().iter().all(|&l| l < 0) && inv.is_admissible() {
            inv
        } else {
            w
        };
        if !out.contains(&rep) {
            out.push(rep);
        }
    }
    out.sort();
    out
}

/// Checks `3ℓ_0 ≤ max(ℓ_{-1}, ℓ_1)` on the annuli built from every audit
/// word and every loop, each loop placed at the ring between the negative
/// and positive blocks so that only forward images are needed.
pub fn audit_31_hyperbolicity(maps: &[GraphMap], loops: &[EdgePath], mode: RingMode) -> Result<HyperbolicityAudit> {
    use rayon::prelude::*;
    let words = audit_words(maps.len());
    let marked = maps.first().ok_or_else(|| Error::InvalidArgument("no maps given".into()))?.domain();
    let jobs: Vec<(&AnnulusWord, &EdgePath)> = words.iter().flat_map(|w| loops.iter().map(move |l| (w, l))).collect();
    let results: Vec<Option<AuditViolation>> = jobs
        .par_iter()
        .map(|&(w, l)| {
            let a = build_annulus_at(l, w.negative_block(), w, maps, mode)?;
            let ok = check_lambda_hyperbolic(&a.lengths, Length::from_integer(3), 1)?;
            Ok((!ok).then(|| AuditViolation {
                word: w.clone(),
                loop_word: marked.read(l),
                lengths: a.lengths.clone(),
            }))
        })
        .collect::<Result<_>>()?;
    Ok(HyperbolicityAudit {
        annuli: jobs.len(),
        violations: results.into_iter().flatten().collect(),
        words,
    })
}

/// Outcome of the flaring check on one annulus of length one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FlaringVerdict {
    FlaresWith { lambda: u32 },
    ThinGirth,
    Violation { girth: Length, end: Length },
}

/// The arithmetic behind [`flaring_audit`]: `girth > 2ρ` must give `end ≥ 2 girth`.
pub fn flaring_check(girth: Length, end: Length, rho: usize) -> FlaringVerdict {
    if girth <= Length::from_integer(2 * rho as u64) {
        FlaringVerdict::ThinGirth
    } else if end >= Length::from_integer(2) * girth {
        FlaringVerdict::FlaresWith { lambda: 2 }
    } else {
        FlaringVerdict::Violation { girth, end }
    }
}

/// Flaring at the end selected by the word's last letter: the last ring for
/// a positive last letter, the first ring otherwise (the reversed annulus
/// ends positively).
pub fn flaring_audit(a: &Annulus, rho: usize) -> Result<FlaringVerdict> {
    if !a.word.is_admissible() {
        return Err(Error::NotAdmissible(a.word.to_string()));
    }
    if a.word.len() != 2 || a.lengths.len() != 3 {
        return Err(Error::RingCount {
            expected: 3,
            found: a.lengths.len(),
        });
    }
    if a.thinness > rho {
        return Err(Error::InvalidArgument(format!(
            "annulus is {}-thin, not {rho}-thin",
            a.thinness
        )));
    }
    let end = if a.word.letters()[1] > 0 { a.lengths[2] } else { a.lengths[0] };
    Ok(flaring_check(a.girth(), end, rho))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaringAudit {
    pub rho_max: usize,
    pub annuli: usize,
    pub flaring: usize,
    pub thin_girth: usize,
    pub violations: Vec<AuditViolation>,
}

/// Runs [`flaring_audit`] for `ρ = 1..=rho_max` on the annuli of
/// [`audit_31_hyperbolicity`].
pub fn flaring_audit_all(maps: &[GraphMap], loops: &[EdgePath], rho_max: usize, mode: RingMode) -> Result<FlaringAudit> {
    let words = audit_words(maps.len());
    let marked = maps.first().ok_or_else(|| Error::InvalidArgument("no maps given".into()))?.domain();
    let mut audit = FlaringAudit {
        rho_max,
        ..FlaringAudit::default()
    };
    for w in &words {
        for l in loops {
            let a = build_annulus_at(l, w.negative_block(), w, maps, mode)?;
            for rho in 1..=rho_max {
                audit.annuli += 1;
                match flaring_audit(&a, rho)? {
                    FlaringVerdict::FlaresWith { .. } => audit.flaring += 1,
                    FlaringVerdict::ThinGirth => audit.thin_girth += 1,
                    FlaringVerdict::Violation { .. } => audit.violations.push(AuditViolation {
                        word: w.clone(),
                        loop_word: marked.read(l),
                        lengths: a.lengths.clone(),
                    }),
                }
            }
        }
    }
    Ok(audit)
}
