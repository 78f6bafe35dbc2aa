//! Marked metric graphs and graph maps representing endomorphisms.

mod matrix;
mod turns;

pub use matrix::{is_irreducible_matrix, pf_eigenvalue, TransitionMatrix};
pub use turns::{is_immersion, verify_train_track, TrainTrackVerdict, Turn};

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgePath, Graph};
use crate::stallings::AnnotatedGraph;
use crate::words::{push_reduced, Endomorphism, Letter, Word};

pub type Length = Ratio<u64>;

/// Identification of `π_1(Γ, base)` with `F_n`: crossing edge `e` forwards
/// reads `edge_words[e]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marking {
    pub base: usize,
    pub edge_words: Vec<Word>,
}

/// A core graph with positive edge lengths and a marking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedGraph {
    graph: Graph,
    lengths: Vec<Length>,
    marking: Marking,
    rank: usize,
    /// Loop at `base` for each generator; inverse of the marking.
    generator_loops: Vec<EdgePath>,
}

impl MarkedGraph {
    /// The rose `R_n` with unit lengths and edge `i` reading `a_{i+1}`.
    pub fn rose(n: usize) -> MarkedGraph {
        let graph = Graph::rose(n);
        let edge_words = (0..n)
            .map(|i| Word::generator(i as Letter + 1, n).expect("in range"))
            .collect();
        let generator_loops = (0..n)
            .map(|i| EdgePath {
                start: 0,
                edges: vec![DirEdge::forward(i)],
            })
            .collect();
        MarkedGraph {
            graph,
            lengths: vec![Length::from_integer(1); n],
            marking: Marking {
                base: 0,
                edge_words,
            },
            rank: n,
            generator_loops,
        }
    }

    /// Validates the graph (connected, no vertex of valence below two),
    /// the lengths (positive) and the marking (an isomorphism onto `F_n`,
    /// checked by folding).
    pub fn new(graph: Graph, lengths: Option<Vec<Length>>, marking: Marking) -> Result<MarkedGraph> {
        let lengths = lengths.unwrap_or_else(|| vec![Length::from_integer(1); graph.edge_count()]);
        if lengths.len() != graph.edge_count() {
            return Err(Error::InvalidGraph("one length per edge required".into()));
        }
        if lengths.iter().any(|l| *l.numer() == 0) {
            return Err(Error::InvalidGraph("edge lengths must be positive".into()));
        }
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        if let Some(v) = (0..graph.vertex_count()).find(|&v| graph.valence(v) < 2) {
            return Err(Error::InvalidGraph(format!("vertex {v} has valence below two")));
        }
        if marking.base >= graph.vertex_count() {
            return Err(Error::InvalidMarking("base vertex out of range".into()));
        }
        if marking.edge_words.len() != graph.edge_count() {
            return Err(Error::InvalidMarking("one word per edge required".into()));
        }
        let rank = marking
            .edge_words
            .first()
            .map(Word::rank)
            .ok_or_else(|| Error::InvalidMarking("graph has no edges".into()))?;
        if marking.edge_words.iter().any(|w| w.rank() != rank) {
            return Err(Error::InvalidMarking("edge words of different ranks".into()));
        }
        if graph.betti() != rank {
            return Err(Error::InvalidMarking(format!(
                "graph has rank {} but marking targets rank {rank}",
                graph.betti()
            )));
        }
        let generator_loops = invert_marking(&graph, &marking, rank)?;
        Ok(MarkedGraph {
            graph,
            lengths,
            marking,
            rank,
            generator_loops,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lengths(&self) -> &[Length] {
        &self.lengths
    }

    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn base(&self) -> usize {
        self.marking.base
    }

    pub fn has_unit_lengths(&self) -> bool {
        self.lengths.iter().all(|l| *l == Length::from_integer(1))
    }

    /// Vertices of valence two; tolerated, but train tracks are usually
    /// defined without them.
    pub fn valence_two_vertices(&self) -> Vec<usize> {
        (0..self.graph.vertex_count())
            .filter(|&v| self.graph.valence(v) == 2)
            .collect()
    }

    pub fn path_length(&self, p: &EdgePath) -> Length {
        p.edges
            .iter()
            .fold(Length::from_integer(0), |acc, d| acc + self.lengths[d.edge()])
    }

    /// Word in `F_n` read along `p` through the marking.
    pub fn read(&self, p: &EdgePath) -> Word {
        let mut buf = Vec::new();
        for &d in &p.edges {
            let w = &self.marking.edge_words[d.edge()];
            if d.is_forward() {
                for &l in w.letters() {
                    push_reduced(&mut buf, l);
                }
            } else {
                for &l in w.letters().iter().rev() {
                    push_reduced(&mut buf, -l);
                }
            }
        }
        Word::from_reduced_unchecked(buf, self.rank)
    }

    /// Tight loop at the base representing `w`.
    pub fn loop_of_word(&self, w: &Word) -> Result<EdgePath> {
        if w.rank() != self.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: w.rank(),
            });
        }
        let mut edges = Vec::new();
        for &l in w.letters() {
            let p = &self.generator_loops[l.unsigned_abs() as usize - 1];
            if l > 0 {
                edges.extend_from_slice(&p.edges);
            } else {
                edges.extend(p.edges.iter().rev().map(|d| d.rev()));
            }
        }
        Ok(EdgePath {
            start: self.base(),
            edges,
        }
        .tightened())
    }

    /// Cyclically tight loop in the free homotopy class of `w`.
    pub fn free_loop_of_word(&self, w: &Word) -> Result<EdgePath> {
        Ok(self.loop_of_word(w)?.cyclically_tightened(&self.graph))
    }

    pub fn generator_loops(&self) -> &[EdgePath] {
        &self.generator_loops
    }
}

/// Folds the marking into the rose; the annotations on the folded rose's
/// edges express each generator in terms of the non-tree edges of `graph`.
fn invert_marking(graph: &Graph, marking: &Marking, rank: usize) -> Result<Vec<EdgePath>> {
    // Spanning tree preferring edges that read the empty word, so that the
    // annotated graph can identify their endpoints outright.
    let n = graph.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..graph.edge_count()).collect();
    order.sort_by_key(|&e| !marking.edge_words[e].is_empty());
    let mut in_tree = vec![false; graph.edge_count()];
    for &e in &order {
        let (s, t) = graph.ends()[e];
        let (a, b) = (find(&mut parent, s), find(&mut parent, t));
        if a != b {
            parent[a] = b;
            in_tree[e] = true;
        }
    }
    let non_tree: Vec<usize> = (0..graph.edge_count()).filter(|&e| !in_tree[e]).collect();
    if non_tree.len() != rank {
        return Err(Error::InvalidMarking("graph rank differs from marking rank".into()));
    }
    if non_tree.iter().any(|&e| marking.edge_words[e].is_empty()) {
        return Err(Error::InvalidMarking("an essential loop reads the empty word".into()));
    }

    // Collapse empty-word tree edges.
    let mut class: Vec<usize> = (0..n).collect();
    for e in 0..graph.edge_count() {
        if in_tree[e] && marking.edge_words[e].is_empty() {
            let (s, t) = graph.ends()[e];
            let (a, b) = (find(&mut class, s), find(&mut class, t));
            class[a] = b;
        }
    }
    let reps: Vec<usize> = (0..n).map(|v| find(&mut class, v)).collect();
    let base_rep = reps[marking.base];
    let mut vertex_id = vec![usize::MAX; n];
    let mut ag = AnnotatedGraph::point(rank, rank);
    vertex_id[base_rep] = 0;
    for &r in &reps {
        if vertex_id[r] == usize::MAX {
            vertex_id[r] = ag.add_vertex();
        }
    }
    for e in 0..graph.edge_count() {
        let w = &marking.edge_words[e];
        if w.is_empty() {
            continue;
        }
        let (s, t) = graph.ends()[e];
        let ann = match non_tree.iter().position(|&x| x == e) {
            Some(j) => Word::generator(j as Letter + 1, rank).expect("in range"),
            None => Word::empty(rank),
        };
        ag.add_path(vertex_id[reps[s]], vertex_id[reps[t]], w.letters(), &ann);
    }
    let folded = ag.fold();
    if !folded.kernel().is_empty() {
        return Err(Error::InvalidMarking("marking is not injective".into()));
    }
    if folded.vertex_count() != 1 || folded.edges().len() != rank {
        return Err(Error::InvalidMarking("marking is not surjective".into()));
    }

    // Loops of the non-tree edges, based at `base`.
    let tree_graph = Graph::new(
        n,
        (0..graph.edge_count())
            .filter(|&e| in_tree[e])
            .map(|e| graph.ends()[e])
            .collect(),
    )?;
    let tree_edges: Vec<usize> = (0..graph.edge_count()).filter(|&e| in_tree[e]).collect();
    let tparent = tree_graph.spanning_tree(marking.base);
    let to_graph = |p: EdgePath| EdgePath {
        start: p.start,
        edges: p
            .edges
            .iter()
            .map(|d| DirEdge::new(tree_edges[d.edge()], d.is_forward()))
            .collect(),
    };
    let fundamental: Vec<EdgePath> = non_tree
        .iter()
        .map(|&e| {
            let (s, t) = graph.ends()[e];
            let to_s = to_graph(tree_graph.tree_path(&tparent, marking.base, s));
            let to_t = to_graph(tree_graph.tree_path(&tparent, marking.base, t));
            let mut edges = to_s.edges;
            edges.push(DirEdge::forward(e));
            edges.extend(to_t.edges.iter().rev().map(|d| d.rev()));
            EdgePath {
                start: marking.base,
                edges,
            }
        })
        .collect();

    let mut loops = vec![EdgePath::trivial(marking.base); rank];
    for e in folded.edges() {
        let mut edges = Vec::new();
        for &x in e.annotation.letters() {
            let p = &fundamental[x.unsigned_abs() as usize - 1];
            if x > 0 {
                edges.extend_from_slice(&p.edges);
            } else {
                edges.extend(p.edges.iter().rev().map(|d| d.rev()));
            }
        }
        loops[e.label as usize - 1] = EdgePath {
            start: marking.base,
            edges,
        }
        .tightened();
    }
    Ok(loops)
}

/// A map between marked graphs sending vertices to vertices and each edge
/// to a nonempty tight edge-path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMap {
    domain: MarkedGraph,
    codomain: MarkedGraph,
    vertex_map: Vec<usize>,
    edge_images: Vec<EdgePath>,
}

impl GraphMap {
    pub fn new(
        domain: MarkedGraph,
        codomain: MarkedGraph,
        vertex_map: Vec<usize>,
        edge_images: Vec<Vec<DirEdge>>,
    ) -> Result<GraphMap> {
        let dg = domain.graph();
        let cg = codomain.graph();
        if vertex_map.len() != dg.vertex_count() {
            return Err(Error::InvalidMap("one image per vertex required".into()));
        }
        if vertex_map.iter().any(|&v| v >= cg.vertex_count()) {
            return Err(Error::InvalidMap("vertex image out of range".into()));
        }
        if edge_images.len() != dg.edge_count() {
            return Err(Error::InvalidMap("one image per edge required".into()));
        }
        let mut images = Vec::with_capacity(edge_images.len());
        for (e, edges) in edge_images.into_iter().enumerate() {
            let (s, t) = dg.ends()[e];
            if edges.is_empty() {
                return Err(Error::InvalidMap(format!("edge {e} has an empty image")));
            }
            if edges.iter().any(|d| d.edge() >= cg.edge_count()) {
                return Err(Error::InvalidMap(format!("image of edge {e} leaves the codomain")));
            }
            let p = EdgePath::new(cg, vertex_map[s], edges)
                .map_err(|_| Error::InvalidMap(format!("image of edge {e} is not a path")))?;
            if p.end(cg) != vertex_map[t] {
                return Err(Error::InvalidMap(format!(
                    "image of edge {e} does not end at the image of its target"
                )));
            }
            if !p.is_tight() {
                return Err(Error::InvalidMap(format!("image of edge {e} is not tight")));
            }
            images.push(p);
        }
        Ok(GraphMap {
            domain,
            codomain,
            vertex_map,
            edge_images: images,
        })
    }

    /// The map of the rose `R_n` sending edge `i` along the image word of
    /// `a_{i+1}`.
    pub fn from_endomorphism(e: &Endomorphism) -> GraphMap {
        let n = e.rank();
        let rose = MarkedGraph::rose(n);
        let edge_images = e
            .images()
            .iter()
            .map(|w| EdgePath {
                start: 0,
                edges: w
                    .letters()
                    .iter()
                    .map(|&l| DirEdge::new(l.unsigned_abs() as usize - 1, l > 0))
                    .collect(),
            })
            .collect();
        GraphMap {
            domain: rose.clone(),
            codomain: rose,
            vertex_map: vec![0],
            edge_images,
        }
    }

    pub fn identity(g: &MarkedGraph) -> GraphMap {
        GraphMap {
            domain: g.clone(),
            codomain: g.clone(),
            vertex_map: (0..g.graph().vertex_count()).collect(),
            edge_images: (0..g.graph().edge_count())
                .map(|e| EdgePath {
                    start: g.graph().ends()[e].0,
                    edges: vec![DirEdge::forward(e)],
                })
                .collect(),
        }
    }

    pub fn domain(&self) -> &MarkedGraph {
        &self.domain
    }

    pub fn codomain(&self) -> &MarkedGraph {
        &self.codomain
    }

    pub fn graph(&self) -> &Graph {
        self.domain.graph()
    }

    pub fn vertex_map(&self) -> &[usize] {
        &self.vertex_map
    }

    pub fn edge_images(&self) -> &[EdgePath] {
        &self.edge_images
    }

    pub fn is_self_map(&self) -> bool {
        self.domain.graph() == self.codomain.graph()
    }

    /// Image of an oriented edge as a path.
    pub fn image(&self, d: DirEdge) -> EdgePath {
        let p = &self.edge_images[d.edge()];
        if d.is_forward() {
            p.clone()
        } else {
            p.reversed(self.codomain.graph())
        }
    }

    /// Untightened image of a path.
    pub fn apply_raw(&self, p: &EdgePath) -> EdgePath {
        let mut edges = Vec::new();
        for &d in &p.edges {
            let img = &self.edge_images[d.edge()];
            if d.is_forward() {
                edges.extend_from_slice(&img.edges);
            } else {
                edges.extend(img.edges.iter().rev().map(|x| x.rev()));
            }
        }
        EdgePath {
            start: self.vertex_map[p.start],
            edges,
        }
    }

    /// Tightened image of a path, rel endpoints.
    pub fn apply(&self, p: &EdgePath) -> EdgePath {
        self.apply_raw(p).tightened()
    }

    /// Image of a closed immersed loop. Free loops (`based == false`) must be
    /// cyclically tight and are tightened cyclically; based loops need only
    /// be tight and are tightened rel basepoint.
    pub fn map_loop(&self, l: &EdgePath, based: bool) -> Result<EdgePath> {
        let g = self.domain.graph();
        if EdgePath::new(g, l.start, l.edges.clone()).is_err() {
            return Err(Error::NotComposable {
                position: l.edges.len(),
            });
        }
        if !l.is_closed(g) {
            return Err(Error::OpenPath);
        }
        if let Some(i) = l.edges.windows(2).position(|w| w[1] == w[0].rev()) {
            return Err(Error::NotImmersed { position: i });
        }
        if !based {
            if let Some(i) = l.cyclic_backtrack() {
                return Err(Error::NotImmersed { position: i });
            }
        }
        let img = self.apply(l);
        Ok(if based {
            img
        } else {
            img.cyclically_tightened(self.codomain.graph())
        })
    }

    /// `self ∘ other`, tightening each edge image.
    pub fn compose(&self, other: &GraphMap) -> Result<GraphMap> {
        if other.codomain.graph() != self.domain.graph() {
            return Err(Error::DifferentGraphs);
        }
        let mut edge_images = Vec::with_capacity(other.edge_images.len());
        for (e, p) in other.edge_images.iter().enumerate() {
            let img = self.apply(p);
            if img.is_empty() {
                return Err(Error::InvalidMap(format!(
                    "composite collapses edge {e} to a point"
                )));
            }
            edge_images.push(img);
        }
        Ok(GraphMap {
            domain: other.domain.clone(),
            codomain: self.codomain.clone(),
            vertex_map: other.vertex_map.iter().map(|&v| self.vertex_map[v]).collect(),
            edge_images,
        })
    }

    /// `f^k` for a self-map; `k = 0` is the identity.
    pub fn power(&self, k: usize) -> Result<GraphMap> {
        if !self.is_self_map() {
            return Err(Error::DifferentGraphs);
        }
        let mut result = GraphMap::identity(&self.domain);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = base.compose(&result)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.compose(&base)?;
            }
        }
        Ok(result)
    }

    /// An endomorphism of `F_n` in the outer class induced through the
    /// markings: each generator loop is mapped, conjugated back to the base
    /// along a tree path, and read in the codomain marking.
    pub fn induced_endomorphism(&self) -> Result<Endomorphism> {
        let cg = self.codomain.graph();
        let base = self.codomain.base();
        let tree = cg.spanning_tree(base);
        let to_image = cg.tree_path(&tree, base, self.vertex_map[self.domain.base()]);
        let back = to_image.reversed(cg);
        let images = self
            .domain
            .generator_loops()
            .iter()
            .map(|l| {
                let p = to_image.then(&self.apply(l)).then(&back).tightened();
                self.codomain.read(&p)
            })
            .collect();
        Endomorphism::new(images)
    }

    /// Combinatorial length of every edge image.
    pub fn image_lengths(&self) -> Vec<usize> {
        self.edge_images.iter().map(EdgePath::len).collect()
    }

    /// Entry `(i, j)` counts the traversals of edge `i` by the image of edge `j`.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let n = self.codomain.graph().edge_count();
        let mut m = if n == self.domain.graph().edge_count() {
            TransitionMatrix::zeros(n)
        } else {
            panic!("transition matrix needs a self-map");
        };
        for (j, p) in self.edge_images.iter().enumerate() {
            for d in &p.edges {
                m.add_to(d.edge(), j, 1);
            }
        }
        m
    }

    /// Stretch factor `σ = max_e len(f(e)) / len(e)`.
    pub fn stretch(&self) -> Length {
        self.edge_images
            .iter()
            .enumerate()
            .map(|(e, p)| self.codomain.path_length(p) / self.domain.lengths()[e])
            .max()
            .unwrap_or_else(|| Length::from_integer(0))
    }

    /// Whether `inverse ∘ self` fixes the free homotopy class of every loop in
    /// `loops`.
    pub fn inverts_on(&self, inverse: &GraphMap, loops: &[EdgePath]) -> bool {
        let dg = self.domain.graph();
        loops.iter().all(|l| {
            let back = inverse.apply(&self.apply(l)).cyclically_tightened(dg);
            let orig = l.cyclically_tightened(dg);
            back.canonical_cyclic(dg).edges == orig.canonical_cyclic(dg).edges
        })
    }
}

/// `K = max(σ(h), σ(h'))` for a change of marking `h` and its homotopy
/// inverse `h'`.
pub fn bilipschitz_constant(h: &GraphMap, h_inverse: &GraphMap) -> Result<Length> {
    if h.codomain.graph() != h_inverse.domain.graph() || h_inverse.codomain.graph() != h.domain.graph() {
        return Err(Error::DifferentGraphs);
    }
    Ok(h.stretch().max(h_inverse.stretch()).max(Length::from_integer(1)))
}

/// The change of marking from the rose `R_n` to `g`: generator `a_i` goes to
/// its marking loop. Together with [`marking_map`] it gives a pair of
/// homotopy inverses.
pub fn rose_to_marked(g: &MarkedGraph) -> Result<GraphMap> {
    let rose = MarkedGraph::rose(g.rank());
    let images = g.generator_loops().iter().map(|p| p.edges.clone()).collect();
    GraphMap::new(rose, g.clone(), vec![g.base()], images)
}

/// The marking itself as a graph map `g → R_n`. Edges reading the empty word
/// are not allowed here since graph maps send edges to nonempty paths.
pub fn marking_map(g: &MarkedGraph) -> Result<GraphMap> {
    let rose = MarkedGraph::rose(g.rank());
    let images = g
        .marking()
        .edge_words
        .iter()
        .map(|w| {
            w.letters()
                .iter()
                .map(|&l| DirEdge::new(l.unsigned_abs() as usize - 1, l > 0))
                .collect()
        })
        .collect();
    GraphMap::new(g.clone(), rose, vec![0; g.graph().vertex_count()], images)
}

/// Random cyclically tight loop of combinatorial length in `1..=max_len`:
/// a non-backtracking random walk closed up along a spanning tree, then
/// cyclically tightened. Retries until the length fits.
///
/// # Panics
///
/// If no attempt fits after many retries, which happens when `max_len` is
/// below the girth of `g`.
pub fn random_immersed_loop<R: Rng + ?Sized>(g: &Graph, max_len: usize, rng: &mut R) -> EdgePath {
    assert!(max_len >= 1 && g.edge_count() > 0);
    for _ in 0..100_000 {
        let start = rng.random_range(0..g.vertex_count());
        let tree = g.spanning_tree(start);
        let walk_len = rng.random_range(1..=max_len);
        let mut edges: Vec<DirEdge> = Vec::with_capacity(walk_len);
        let mut cur = start;
        for _ in 0..walk_len {
            let choices: Vec<DirEdge> = g
                .directions(cur)
                .iter()
                .copied()
                .filter(|&d| edges.last().is_none_or(|&prev| d != prev.rev()))
                .collect();
            if choices.is_empty() {
                break;
            }
            let d = choices[rng.random_range(0..choices.len())];
            edges.push(d);
            cur = g.dst(d);
        }
        let back = g.tree_path(&tree, start, cur).reversed(g);
        let p = EdgePath { start, edges }.then(&back);
        let c = p.cyclically_tightened(g);
        if !c.is_empty() && c.len() <= max_len {
            return c;
        }
    }
    panic!("no immersed loop of length at most {max_len}");
}

pub fn map_loop(f: &GraphMap, l: &EdgePath) -> Result<EdgePath> {
    f.map_loop(l, false)
}

pub fn transition_matrix(f: &GraphMap) -> TransitionMatrix {
    f.transition_matrix()
}
