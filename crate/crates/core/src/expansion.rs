//! Uniform expansion of a train-track map by a fixed factor: invariant
//! forests, their collapse, and the expansion power.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgePath, Graph};
use crate::graphmap::{GraphMap, Length, MarkedGraph, Marking, TrainTrackVerdict};
use crate::words::Word;

/// An `f`-invariant set of edges spanning a forest, sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantForest {
    pub edges: Vec<usize>,
}

impl InvariantForest {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks both defining properties against `f`.
    pub fn verify(&self, f: &GraphMap) -> Result<()> {
        let g = f.graph();
        let mut inside = vec![false; g.edge_count()];
        for &e in &self.edges {
            if e >= g.edge_count() {
                return Err(Error::NotInvariantForest(format!("edge {e} out of range")));
            }
            inside[e] = true;
        }
        if !spans_forest(g, &self.edges) {
            return Err(Error::NotInvariantForest("edges contain a cycle".into()));
        }
        for &e in &self.edges {
            if f.edge_images()[e].edges.iter().any(|d| !inside[d.edge()]) {
                return Err(Error::NotInvariantForest(format!("image of edge {e} leaves the set")));
            }
        }
        Ok(())
    }
}

fn spans_forest(g: &Graph, edges: &[usize]) -> bool {
    let mut parent: Vec<usize> = (0..g.vertex_count()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &e in edges {
        let (a, b) = g.ends()[e];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// The union of all `f`-invariant forests. An invariant forest containing
/// `e` contains every edge crossed by some `f^k(e)`; the edges whose such
/// closure is a forest are exactly the candidates, and their union is
/// invariant. Fails if that union is not itself a forest.
pub fn maximal_invariant_forest(f: &GraphMap) -> Result<InvariantForest> {
    if !f.is_self_map() {
        return Err(Error::DifferentGraphs);
    }
    let g = f.graph();
    let m = g.edge_count();
    let closure = |e: usize| {
        let mut seen = vec![false; m];
        seen[e] = true;
        let mut stack = vec![e];
        while let Some(x) = stack.pop() {
            for d in &f.edge_images()[x].edges {
                if !seen[d.edge()] {
                    seen[d.edge()] = true;
                    stack.push(d.edge());
                }
            }
        }
        seen
    };
    let mut union = vec![false; m];
    for e in 0..m {
        let c = closure(e);
        let edges: Vec<usize> = (0..m).filter(|&x| c[x]).collect();
        if spans_forest(g, &edges) {
            for x in edges {
                union[x] = true;
            }
        }
    }
    let forest = InvariantForest {
        edges: (0..m).filter(|&x| union[x]).collect(),
    };
    forest.verify(f)?;
    Ok(forest)
}

/// Quotient of `f` by an invariant forest, with the projection of loops.
#[derive(Clone, Debug)]
pub struct Collapse {
    pub map: GraphMap,
    /// New id of each old vertex.
    pub vertex_class: Vec<usize>,
    /// New id of each surviving old edge, `None` for forest edges.
    pub edge_class: Vec<Option<usize>>,
}

impl Collapse {
    /// Image of a closed path in the quotient.
    pub fn project(&self, p: &EdgePath) -> EdgePath {
        let edges: Vec<DirEdge> = p
            .edges
            .iter()
            .filter_map(|d| self.edge_class[d.edge()].map(|e| DirEdge::new(e, d.is_forward())))
            .collect();
        let g = self.map.graph();
        let start = edges.first().map_or(self.vertex_class[p.start], |&d| g.src(d));
        EdgePath { start, edges }.cyclically_tightened(g)
    }
}

/// Collapses each component of `forest` to a point.
pub fn collapse_forest(f: &GraphMap, forest: &InvariantForest) -> Result<Collapse> {
    forest.verify(f)?;
    let g = f.graph();
    let m = g.edge_count();
    if forest.edges.len() == m {
        return Err(Error::DegenerateCollapse);
    }
    if forest.is_empty() {
        return Ok(Collapse {
            map: f.clone(),
            vertex_class: (0..g.vertex_count()).collect(),
            edge_class: (0..m).map(Some).collect(),
        });
    }
    let mut in_forest = vec![false; m];
    for &e in &forest.edges {
        in_forest[e] = true;
    }
    // Tree words: from the root of each component (the base for its own
    // component) to every vertex, following forest edges.
    let marked = f.domain();
    let base = marked.base();
    let nv = g.vertex_count();
    let mut class = vec![usize::MAX; nv];
    let mut tree_word: Vec<Word> = vec![Word::empty(marked.rank()); nv];
    let mut count = 0;
    let order = std::iter::once(base).chain((0..nv).filter(|&v| v != base));
    for root in order {
        if class[root] != usize::MAX {
            continue;
        }
        class[root] = count;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &d in g.directions(v) {
                if !in_forest[d.edge()] {
                    continue;
                }
                let t = g.dst(d);
                if class[t] == usize::MAX {
                    class[t] = count;
                    let w = &marked.marking().edge_words[d.edge()];
                    let step = if d.is_forward() { w.clone() } else { w.inverse() };
                    tree_word[t] = &tree_word[v] * &step;
                    stack.push(t);
                }
            }
        }
        count += 1;
    }
    let mut edge_class = vec![None; m];
    let mut ends = Vec::new();
    let mut words = Vec::new();
    let mut lengths = Vec::new();
    for e in 0..m {
        if in_forest[e] {
            continue;
        }
        edge_class[e] = Some(ends.len());
        let (a, b) = g.ends()[e];
        ends.push((class[a], class[b]));
        let w = &(&tree_word[a] * &marked.marking().edge_words[e]) * &tree_word[b].inverse();
        words.push(w);
        lengths.push(marked.lengths()[e]);
    }
    let graph = Graph::new(count, ends)?;
    let quotient = MarkedGraph::new(
        graph,
        Some(lengths),
        Marking {
            base: class[base],
            edge_words: words,
        },
    )?;
    let vertex_map = (0..count)
        .map(|c| {
            let v = (0..nv).find(|&v| class[v] == c).expect("class is nonempty");
            class[f.vertex_map()[v]]
        })
        .collect();
    let mut images = Vec::with_capacity(quotient.graph().edge_count());
    for e in 0..m {
        if in_forest[e] {
            continue;
        }
        let img: Vec<DirEdge> = f.edge_images()[e]
            .edges
            .iter()
            .filter_map(|d| edge_class[d.edge()].map(|x| DirEdge::new(x, d.is_forward())))
            .collect();
        let start = quotient.graph().src(img.first().copied().ok_or(Error::DegenerateCollapse)?);
        images.push(EdgePath { start, edges: img }.tightened().edges);
    }
    let map = GraphMap::new(quotient.clone(), quotient, vertex_map, images)?;
    if f.is_immersion() && !map.is_immersion() {
        return Err(Error::NotImmersion {
            vertex: map.immersion_defect().unwrap_or(0),
        });
    }
    Ok(Collapse {
        map,
        vertex_class: class,
        edge_class,
    })
}

/// Which loops a certificate speaks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionScope {
    /// `f` is an immersion: every immersed loop.
    ImmersedLoops,
    /// `f` is a train track with illegal turns: legal loops only.
    LegalLoops,
}

/// Forest step of an expansion certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestStep {
    pub forest: InvariantForest,
    /// Power certified for the collapsed map.
    pub inner: usize,
    /// Multiplier: `target^(k-1) ≥ 1 + forest length / shortest other edge`.
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ExpansionVerdict {
    Power {
        n: usize,
        /// First power at which each edge reaches the target (no-forest case).
        per_edge: Vec<usize>,
        forest: Option<ForestStep>,
        scope: ExpansionScope,
    },
    PeriodicLoopObstruction {
        /// A loop with `f^period(γ) = γ`.
        witness: EdgePath,
        word: Word,
        period: usize,
    },
    CapExceeded {
        /// Edges that had not reached the target by the cap.
        slow_edges: Vec<usize>,
    },
}

impl ExpansionVerdict {
    pub fn power(&self) -> Option<usize> {
        match self {
            ExpansionVerdict::Power { n, .. } => Some(*n),
            _ => None,
        }
    }
}

/// Default search cap for [`expansion_power`].
pub const DEFAULT_CAP: usize = 64;

/// Smallest `N ≤ cap` such that `ℓ(f^N(α)) ≥ 3ℓ(α)` for every loop in scope.
pub fn expansion_power(f: &GraphMap, cap: usize) -> Result<ExpansionVerdict> {
    expansion_power_with_target(f, cap, Length::from_integer(3))
}

/// As [`expansion_power`] with expansion factor `target`.
pub fn expansion_power_with_target(f: &GraphMap, cap: usize, target: Length) -> Result<ExpansionVerdict> {
    if target <= Length::from_integer(1) {
        return Err(Error::InvalidArgument("target factor must exceed 1".into()));
    }
    if !f.is_self_map() {
        return Err(Error::DifferentGraphs);
    }
    match f.verify_train_track(4 * f.graph().edge_count().pow(2) + 8) {
        TrainTrackVerdict::TrainTrack => {}
        TrainTrackVerdict::IllegalTurnFound { turn, .. } => {
            return Err(Error::IllegalTurns {
                vertex: f.graph().src(turn.first),
            })
        }
        TrainTrackVerdict::Inconclusive { .. } => unreachable!("depth covers every turn orbit"),
    }
    let scope = if f.is_immersion() {
        ExpansionScope::ImmersedLoops
    } else {
        ExpansionScope::LegalLoops
    };
    let forest = maximal_invariant_forest(f)?;
    if forest.is_empty() {
        return per_edge_power(f, cap, target, scope);
    }
    let collapse = collapse_forest(f, &forest)?;
    let inner = match expansion_power_with_target(&collapse.map, cap, target)? {
        ExpansionVerdict::Power { n, .. } => n,
        ExpansionVerdict::PeriodicLoopObstruction { word, period, .. } => {
            // The collapse is a homotopy equivalence: report a loop of Γ
            // reading the same word.
            let lifted = f.domain().free_loop_of_word(&word)?;
            return Ok(ExpansionVerdict::PeriodicLoopObstruction {
                witness: lifted,
                word,
                period,
            });
        }
        other => return Ok(other),
    };
    let lengths = f.domain().lengths();
    let forest_len: Length = forest.edges.iter().map(|&e| lengths[e]).sum();
    let min_other = (0..lengths.len())
        .filter(|e| forest.edges.binary_search(e).is_err())
        .map(|e| lengths[e])
        .min()
        .expect("collapse is not degenerate");
    let need = Length::from_integer(1) + forest_len / min_other;
    let mut k = 1;
    let mut acc = Length::from_integer(1);
    while acc < need {
        acc *= target;
        k += 1;
    }
    let n = k * inner;
    if n > cap {
        return Ok(ExpansionVerdict::CapExceeded {
            slow_edges: forest.edges.clone(),
        });
    }
    Ok(ExpansionVerdict::Power {
        n,
        per_edge: Vec::new(),
        forest: Some(ForestStep { forest, inner, k }),
        scope,
    })
}

/// Lengths scaled by a common denominator, as integers.
fn integer_lengths(lengths: &[Length]) -> (Vec<u128>, u128) {
    let d = lengths.iter().fold(1u64, |acc, l| acc.lcm(l.denom()));
    let ints = lengths
        .iter()
        .map(|l| (*l.numer() as u128) * (d / l.denom()) as u128)
        .collect();
    (ints, d as u128)
}

fn per_edge_power(f: &GraphMap, cap: usize, target: Length, scope: ExpansionScope) -> Result<ExpansionVerdict> {
    let g = f.graph();
    let m = g.edge_count();
    let (len, _) = integer_lengths(f.domain().lengths());
    let (p, q) = (*target.numer() as u128, *target.denom() as u128);
    let a = f.transition_matrix();
    // counts[e][x]: traversals of x by f^n(e).
    let mut counts: Vec<Vec<u128>> = (0..m)
        .map(|e| {
            let mut c = vec![0u128; m];
            c[e] = 1;
            c
        })
        .collect();
    let mut per_edge = vec![0usize; m];
    let reached = |c: &[u128], e: usize| {
        let l: u128 = c.iter().zip(&len).fold(0u128, |s, (&c, &l)| s.saturating_add(c.saturating_mul(l)));
        l.saturating_mul(q) >= p.saturating_mul(len[e])
    };
    for n in 1..=cap {
        counts = counts
            .iter()
            .map(|c| {
                let mut out = vec![0u128; m];
                for (x, &cx) in c.iter().enumerate() {
                    if cx == 0 {
                        continue;
                    }
                    for (y, slot) in out.iter_mut().enumerate() {
                        let a_yx = a.get(y, x) as u128;
                        *slot = slot.saturating_add(a_yx.saturating_mul(cx));
                    }
                }
                out
            })
            .collect();
        let mut all = true;
        for e in 0..m {
            let ok = reached(&counts[e], e);
            if ok && per_edge[e] == 0 {
                per_edge[e] = n;
            }
            all &= ok;
        }
        if all {
            return Ok(ExpansionVerdict::Power {
                n,
                per_edge,
                forest: None,
                scope,
            });
        }
    }
    let slow_edges: Vec<usize> = (0..m).filter(|&e| !reached(&counts[e], e)).collect();
    if let Some((witness, period)) = periodic_loop(f) {
        let word = f.domain().read(&witness);
        return Ok(ExpansionVerdict::PeriodicLoopObstruction { witness, word, period });
    }
    Ok(ExpansionVerdict::CapExceeded { slow_edges })
}

/// A loop made of edges that `f` permutes, with the period after which it
/// returns to itself.
fn periodic_loop(f: &GraphMap) -> Option<(EdgePath, usize)> {
    let g = f.graph();
    let m = g.edge_count();
    // Directed-edge successor on edges with one-edge images.
    let sigma = |d: DirEdge| -> Option<DirEdge> {
        let img = f.image(d);
        (img.len() == 1).then(|| img.edges[0])
    };
    let mut periodic = vec![false; m];
    let mut period_of = vec![0usize; m];
    for e in 0..m {
        let start = DirEdge::forward(e);
        let mut cur = start;
        for k in 1..=2 * m {
            match sigma(cur) {
                Some(next) => cur = next,
                None => break,
            }
            if cur == start {
                periodic[e] = true;
                period_of[e] = k;
                break;
            }
        }
    }
    let edges: Vec<usize> = (0..m).filter(|&e| periodic[e]).collect();
    if spans_forest(g, &edges) {
        return None;
    }
    // A cycle among periodic edges: grow a forest until an edge closes one.
    let mut parent: Vec<Option<DirEdge>> = vec![None; g.vertex_count()];
    let mut root: Vec<usize> = (0..g.vertex_count()).collect();
    let mut adj: Vec<Vec<DirEdge>> = vec![Vec::new(); g.vertex_count()];
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut closing = None;
    for &e in &edges {
        let (a, b) = g.ends()[e];
        let (ra, rb) = (find(&mut root, a), find(&mut root, b));
        if ra == rb {
            closing = Some(e);
            break;
        }
        root[ra] = rb;
        adj[a].push(DirEdge::forward(e));
        adj[b].push(DirEdge::new(e, false));
    }
    let e = closing?;
    let (a, b) = g.ends()[e];
    // Tree path from b to a.
    let mut seen = vec![false; g.vertex_count()];
    seen[b] = true;
    let mut stack = vec![b];
    while let Some(v) = stack.pop() {
        for &d in &adj[v] {
            let t = g.dst(d);
            if !seen[t] {
                seen[t] = true;
                parent[t] = Some(d);
                stack.push(t);
            }
        }
    }
    let mut back = Vec::new();
    let mut v = a;
    while v != b {
        let d = parent[v]?;
        back.push(d);
        v = g.src(d);
    }
    back.reverse();
    let mut loop_edges = vec![DirEdge::forward(e)];
    loop_edges.extend(back);
    let gamma = EdgePath { start: a, edges: loop_edges };
    let period = gamma
        .edges
        .iter()
        .fold(1usize, |acc, d| acc.lcm(&period_of[d.edge()]));
    let mut img = gamma.clone();
    for _ in 0..period {
        img = f.apply_raw(&img);
    }
    (img.canonical_cyclic(g).edges == gamma.canonical_cyclic(g).edges).then_some((gamma, period))
}

/// Loops among `loops` with `ℓ(f^n(α)) < target · ℓ(α)`, computed by
/// mapping and tightening `n` times.
pub fn expansion_violations(f: &GraphMap, n: usize, target: Length, loops: &[EdgePath]) -> Result<Vec<EdgePath>> {
    let marked = f.domain();
    let mut out = Vec::new();
    for l in loops {
        let mut img = l.clone();
        for _ in 0..n {
            img = f.map_loop(&img, false)?;
        }
        if marked.path_length(&img) < target * marked.path_length(l) {
            out.push(l.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::Endomorphism;

    fn map(images: &[&str]) -> GraphMap {
        GraphMap::from_endomorphism(&Endomorphism::parse(images).unwrap())
    }

    fn theta_map() -> GraphMap {
        let g = Graph::new(2, vec![(0, 1), (0, 1), (0, 1)]).unwrap();
        let words = ["", "a", "b"].iter().map(|s| Word::parse(s, 2).unwrap()).collect();
        let m = MarkedGraph::new(g, None, Marking { base: 0, edge_words: words }).unwrap();
        let f = |e: usize, fwd: bool| DirEdge::new(e, fwd);
        GraphMap::new(
            m.clone(),
            m,
            vec![0, 1],
            vec![
                vec![f(0, true)],
                vec![f(1, true), f(0, false), f(1, true)],
                vec![f(2, true), f(1, false), f(2, true)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn forests() {
        assert!(maximal_invariant_forest(&map(&["ab", "ba"])).unwrap().is_empty());
        let f = theta_map();
        assert!(f.is_immersion());
        let forest = maximal_invariant_forest(&f).unwrap();
        assert_eq!(forest.edges, vec![0]);
        let c = collapse_forest(&f, &forest).unwrap();
        assert_eq!(c.map.graph().vertex_count(), 1);
        assert_eq!(c.map.graph().edge_count(), 2);
        assert!(c.map.is_immersion());
        assert_eq!(
            c.map.induced_endomorphism().unwrap(),
            Endomorphism::parse(&["aa", "bAb"]).unwrap()
        );
        let same = collapse_forest(&f, &InvariantForest::default()).unwrap();
        assert_eq!(same.map, f);
    }

    #[test]
    fn degenerate_and_non_invariant() {
        let f = theta_map();
        let bad = InvariantForest { edges: vec![1] };
        assert!(matches!(collapse_forest(&f, &bad), Err(Error::NotInvariantForest(_))));
        let cyc = InvariantForest { edges: vec![0, 1] };
        assert!(matches!(cyc.verify(&f), Err(Error::NotInvariantForest(_))));
    }

    #[test]
    fn expansion_examples() {
        let fib = map(&["ab", "a"]);
        match expansion_power(&fib, 64).unwrap() {
            ExpansionVerdict::Power { n, per_edge, scope, .. } => {
                assert_eq!(n, 3);
                assert_eq!(per_edge, vec![2, 3]);
                assert_eq!(scope, ExpansionScope::LegalLoops);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(expansion_power(&map(&["aa"]), 64).unwrap().power(), Some(2));
        match expansion_power(&map(&["b", "a"]), 16).unwrap() {
            ExpansionVerdict::PeriodicLoopObstruction { period, .. } => assert_eq!(period, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            expansion_power(&map(&["ab", "Ba"]), 16),
            Err(Error::IllegalTurns { .. })
        ));
    }

    #[test]
    fn forest_case() {
        let f = theta_map();
        let v = expansion_power(&f, 64).unwrap();
        let ExpansionVerdict::Power { n, forest: Some(step), .. } = &v else {
            panic!("unexpected {v:?}");
        };
        assert_eq!(step.forest.edges, vec![0]);
        assert_eq!(*n, step.k * step.inner);
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let loops: Vec<EdgePath> = (0..300)
            .map(|_| crate::graphmap::random_immersed_loop(f.graph(), 12, &mut rng))
            .collect();
        assert!(expansion_violations(&f, *n, Length::from_integer(3), &loops).unwrap().is_empty());
    }
}
