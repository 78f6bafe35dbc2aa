//! Image subgroups of endomorphism powers, trivial intersection with all
//! conjugates, and preimages of conjugacy classes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pullback::{fiber_product, product_core, GraphOver};
use crate::stallings::{AnnotatedGraph, LabeledEdge, LabeledGraph};
use crate::words::{conjugate_in_free_group, Endomorphism, Letter, Word};

/// Default bound on the total length of the words `φ^N(a_i)`.
pub const DEFAULT_IMAGE_BUDGET: usize = 1 << 22;

/// `φ^N(F_n)` as a folded based graph whose edges remember preimages.
#[derive(Clone, Debug)]
pub struct ImageSubgroup {
    endo: Endomorphism,
    power: usize,
    annotated: AnnotatedGraph,
    graph: LabeledGraph,
    /// Label word of a tree path from the basepoint to each vertex.
    access: Vec<Word>,
}

impl ImageSubgroup {
    pub fn new(endo: &Endomorphism, power: usize) -> Result<ImageSubgroup> {
        if power == 0 {
            return Err(Error::InvalidArgument("power must be at least 1".into()));
        }
        let total = image_length(endo, power);
        if total > DEFAULT_IMAGE_BUDGET {
            return Err(Error::InvalidArgument(format!(
                "images of power {power} have total length {total}"
            )));
        }
        let p = endo.power(power)?;
        let n = endo.rank();
        let annotated = AnnotatedGraph::wedge(p.images(), n).fold();
        let graph = annotated.to_labeled();
        let access = access_words(&graph);
        Ok(ImageSubgroup {
            endo: endo.clone(),
            power,
            annotated,
            graph,
            access,
        })
    }

    pub fn endomorphism(&self) -> &Endomorphism {
        &self.endo
    }

    pub fn power(&self) -> usize {
        self.power
    }

    /// The folded based graph recognizing `φ^N(F_n)`.
    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn rank(&self) -> usize {
        self.endo.rank()
    }

    /// False when folding met a nontrivial kernel element. The image is
    /// still computed correctly, but preimages are then not unique.
    pub fn is_injective(&self) -> bool {
        self.annotated.kernel().is_empty()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.graph.membership(w)
    }

    /// `u` with `φ^N(u) = w`, when `w` lies in the image.
    pub fn preimage(&self, w: &Word) -> Option<Word> {
        self.annotated.preimage(w)
    }

    /// `β` with `φ^N(β)` conjugate to `α`, cyclically reduced and in
    /// canonical rotation; `None` when no conjugate of `α` is in the image.
    pub fn conjugate_preimage(&self, alpha: &Word) -> Option<Word> {
        let (core, _) = alpha.cyclic_reduce();
        if core.is_empty() {
            return Some(Word::empty(self.rank()));
        }
        // A cyclically reduced word with a conjugate in a folded graph's
        // subgroup is read as a closed loop at some vertex of it.
        let adj = self.graph.adjacency();
        let closes_at = |v: usize| {
            let mut cur = v;
            for &l in core.letters() {
                match adj[cur].iter().find(|h| h.label == l) {
                    Some(h) => cur = h.target,
                    None => return false,
                }
            }
            cur == v
        };
        for (v, u) in self.access.iter().enumerate() {
            if !closes_at(v) {
                continue;
            }
            let based = &(u * &core) * &u.inverse();
            let beta = self.annotated.preimage(&based)?;
            return Some(beta.cyclic_reduce().0.canonical_cyclic());
        }
        None
    }

    /// Basepoint-free core over the rose.
    pub fn core_over_rose(&self) -> GraphOver {
        GraphOver::over_rose(self.graph.core(false))
    }
}

fn image_length(endo: &Endomorphism, power: usize) -> usize {
    // Letter counts per generator, saturating.
    let n = endo.rank();
    let mut counts: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut c = vec![0usize; n];
            c[i] = 1;
            c
        })
        .collect();
    for _ in 0..power {
        counts = counts
            .iter()
            .map(|c| {
                let mut out = vec![0usize; n];
                for (j, &cj) in c.iter().enumerate() {
                    for &l in endo.images()[j].letters() {
                        let k = l.unsigned_abs() as usize - 1;
                        out[k] = out[k].saturating_add(cj);
                    }
                }
                out
            })
            .collect();
    }
    counts
        .iter()
        .flatten()
        .fold(0usize, |a, &b| a.saturating_add(b))
}

fn access_words(g: &LabeledGraph) -> Vec<Word> {
    let n = g.vertex_count();
    let base = g.basepoint().unwrap_or(0);
    let adj = g.adjacency();
    let mut parent: Vec<Option<(usize, Letter)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    if n > 0 {
        seen[base] = true;
        let mut queue = VecDeque::from([base]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for h in &adj[v] {
                if !seen[h.target] {
                    seen[h.target] = true;
                    parent[h.target] = Some((v, h.label));
                    queue.push_back(h.target);
                }
            }
        }
    }
    let mut words = vec![Word::empty(g.alphabet()); n];
    for v in order {
        if let Some((p, l)) = parent[v] {
            words[v] = &words[p] * &Word::generator(l, g.alphabet()).expect("label in range");
        }
    }
    words
}

pub fn image_subgroup(e: &Endomorphism, power: usize) -> Result<ImageSubgroup> {
    ImageSubgroup::new(e, power)
}

/// `H ∩ gKg⁻¹ = {1}` for every `g`: the basepoint-free product of the two
/// cores has empty core.
pub fn all_conjugates_trivial_intersection(h: &ImageSubgroup, k: &ImageSubgroup) -> Result<bool> {
    graphs_trivially_intersect(h.graph(), k.graph())
}

/// Same test on arbitrary folded subgroup graphs.
pub fn graphs_trivially_intersect(h: &LabeledGraph, k: &LabeledGraph) -> Result<bool> {
    if h.alphabet() != k.alphabet() {
        return Err(Error::RankMismatch {
            expected: h.alphabet(),
            found: k.alphabet(),
        });
    }
    let x = GraphOver::over_rose(h.core(false));
    let y = GraphOver::over_rose(k.core(false));
    Ok(product_core(&x, &y)?.components.is_empty())
}

/// A nontrivial element with conjugates in both subgroups, and the rank of
/// the product component it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionWitness {
    pub word: Word,
    pub rank: usize,
}

/// Some nontrivial `w` conjugate into both `H` and `K`, if any.
pub fn intersection_witness(h: &LabeledGraph, k: &LabeledGraph) -> Result<Option<IntersectionWitness>> {
    let x = GraphOver::over_rose(h.core(false));
    let y = GraphOver::over_rose(k.core(false));
    let prod = fiber_product(&x, &y)?;
    let core = prod.graph.core(false);
    if core.edge_count() == 0 {
        return Ok(None);
    }
    let (comp, _) = core.components();
    let start = core.edges()[0].src;
    let c = comp[start];
    let members: Vec<LabeledEdge> = core.edges().iter().copied().filter(|e| comp[e.src] == c).collect();
    let verts = comp.iter().filter(|&&k| k == c).count();
    let rank = members.len() + 1 - verts;
    let based = core.clone().with_basepoint(Some(start));
    let access = access_words(&based);
    // A non-tree edge closes a loop; tree edges read as empty loops.
    for e in &members {
        let gen = Word::generator(e.label, core.alphabet()).expect("label in range");
        let w = &(&access[e.src] * &gen) * &access[e.dst].inverse();
        let (cw, _) = w.cyclic_reduce();
        if !cw.is_empty() {
            return Ok(Some(IntersectionWitness {
                word: cw.canonical_cyclic(),
                rank,
            }));
        }
    }
    unreachable!("a core component has a loop")
}

/// Rank of `H ∩ gKg⁻¹`, read off the product component containing the pair
/// of basepoints after re-basing `K`'s graph at the end of a hair reading
/// `g`.
pub fn conjugate_intersection_rank(h: &LabeledGraph, k: &LabeledGraph, g: &Word) -> Result<usize> {
    let kb = k.basepoint().ok_or_else(|| Error::InvalidGraph("graph has no basepoint".into()))?;
    let conj = if g.is_empty() {
        k.clone()
    } else {
        let mut hk = k.clone().with_basepoint(None);
        let start = hk.add_vertex();
        hk.add_path(start, kb, g.letters());
        hk.with_basepoint(Some(start)).fold()
    };
    let hb = h.basepoint().ok_or_else(|| Error::InvalidGraph("graph has no basepoint".into()))?;
    let cb = conj.basepoint().expect("basepoint kept by folding");
    let x = GraphOver::over_rose(h.clone());
    let y = GraphOver::over_rose(conj);
    let prod = fiber_product(&x, &y)?;
    let v = prod.vertex(hb, cb).expect("both basepoints lie over the rose vertex");
    Ok(prod.component_rank(v))
}

/// Outcome of the disjointness search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DisjointnessVerdict {
    DisjointAt {
        n: usize,
    },
    NotDisjointAtCap {
        /// Indices `(i, j)` of the failing pair at the cap.
        pair: (usize, usize),
        witness: IntersectionWitness,
    },
    CapExceeded {
        /// Last power examined before the size budget was hit.
        reached: usize,
    },
}

/// Outcome of one power of the search, for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCheck {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub disjoint: bool,
}

/// Smallest `N ≤ cap` at which every pair of images `φ_i^N(F_n)`,
/// `φ_j^N(F_n)` (`i ≠ j`) intersects all conjugates of the other trivially.
/// Every `N` is tested on its own.
pub fn essential_disjointness_power(endos: &[Endomorphism], cap: usize) -> Result<DisjointnessVerdict> {
    essential_disjointness_search(endos, cap).map(|(v, _)| v)
}

/// As [`essential_disjointness_power`], also returning the table of pair checks.
pub fn essential_disjointness_search(
    endos: &[Endomorphism],
    cap: usize,
) -> Result<(DisjointnessVerdict, Vec<PairCheck>)> {
    use rayon::prelude::*;
    if endos.len() < 2 {
        return Err(Error::InvalidArgument(
            "disjointness needs at least two endomorphisms".into(),
        ));
    }
    let rank = endos[0].rank();
    if let Some(e) = endos.iter().find(|e| e.rank() != rank) {
        return Err(Error::RankMismatch {
            expected: rank,
            found: e.rank(),
        });
    }
    let mut table = Vec::new();
    let mut last_failure = None;
    for n in 1..=cap {
        if endos.iter().any(|e| image_length(e, n) > DEFAULT_IMAGE_BUDGET) {
            return Ok((DisjointnessVerdict::CapExceeded { reached: n - 1 }, table));
        }
        let images: Vec<ImageSubgroup> = endos
            .par_iter()
            .map(|e| ImageSubgroup::new(e, n))
            .collect::<Result<_>>()?;
        let pairs: Vec<(usize, usize)> = (0..endos.len())
            .flat_map(|i| (i + 1..endos.len()).map(move |j| (i, j)))
            .collect();
        let results: Vec<bool> = pairs
            .par_iter()
            .map(|&(i, j)| all_conjugates_trivial_intersection(&images[i], &images[j]))
            .collect::<Result<_>>()?;
        let mut all = true;
        for (&(i, j), &disjoint) in pairs.iter().zip(&results) {
            table.push(PairCheck { n, i, j, disjoint });
            if !disjoint && all {
                all = false;
                last_failure = Some((i, j, n));
            }
        }
        if all {
            return Ok((DisjointnessVerdict::DisjointAt { n }, table));
        }
    }
    let Some((i, j, n)) = last_failure else {
        return Ok((DisjointnessVerdict::CapExceeded { reached: 0 }, table));
    };
    let hi = ImageSubgroup::new(&endos[i], n)?;
    let hj = ImageSubgroup::new(&endos[j], n)?;
    let witness = intersection_witness(hi.graph(), hj.graph())?.expect("pair failed the check");
    Ok((DisjointnessVerdict::NotDisjointAtCap { pair: (i, j), witness }, table))
}

/// `β` with `φ^s(β)` conjugate to `α`, or `None`.
pub fn preimage_in_image(e: &Endomorphism, s: usize, alpha: &Word) -> Result<Option<Word>> {
    let img = ImageSubgroup::new(e, s)?;
    let beta = img.conjugate_preimage(alpha);
    if let Some(b) = &beta {
        debug_assert!(!img.is_injective() || conjugate_in_free_group(&e.power(s)?.apply(b)?, alpha));
    }
    Ok(beta)
}
