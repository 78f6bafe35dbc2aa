//! Fiber products of immersions and the pullback filtration of a
//! self-immersion.
//!
//! For `f: Γ → Γ` the stage `Γ_i = Γ ×_{f^i} Γ` is the fiber product of the
//! subdivision `S_i` of `Γ` (each edge `e` cut into the `|f^i(e)|` pieces of
//! its image) with itself over `Γ`. Its components that matter are the core
//! ones; they are found without materializing the product. Pairs `(x, y)`
//! where either coordinate is an original vertex of `Γ` are the only
//! possible branch points, and between two such pairs both coordinates run
//! along edge interiors, so a product edge-path between them is a pair of
//! equal substrings of edge images. Substring equality is tested with
//! polynomial hashes modulo `2^61 - 1`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgePath, Graph};
use crate::graphmap::GraphMap;
use crate::stallings::{LabeledEdge, LabeledGraph};
use crate::words::{conjugate_in_free_group, letter_key, Endomorphism, Word};

/// A graph `X` with a map to a target graph `Γ` sending each edge onto a
/// single edge. Edge labels of the [`LabeledGraph`] are `ε + 1` for target
/// edge `ε`; an edge is stored in the orientation that maps forwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphOver {
    target: Graph,
    graph: LabeledGraph,
    vertex_map: Vec<usize>,
    forced: Vec<bool>,
}

impl GraphOver {
    pub fn new(target: Graph, graph: LabeledGraph, vertex_map: Vec<usize>) -> Result<GraphOver> {
        if graph.alphabet() != target.edge_count() {
            return Err(Error::InvalidGraph(
                "labels must range over the target's edges".into(),
            ));
        }
        if vertex_map.len() != graph.vertex_count() {
            return Err(Error::InvalidGraph("one image per vertex required".into()));
        }
        for e in graph.edges() {
            let d = DirEdge::forward(e.label as usize - 1);
            if vertex_map[e.src] != target.src(d) || vertex_map[e.dst] != target.dst(d) {
                return Err(Error::InvalidGraph(
                    "vertex map disagrees with edge labels".into(),
                ));
            }
        }
        let forced = vec![false; graph.vertex_count()];
        Ok(GraphOver {
            target,
            graph,
            vertex_map,
            forced,
        })
    }

    /// A graph labeled by generators, viewed over the rose.
    pub fn over_rose(graph: LabeledGraph) -> GraphOver {
        let n = graph.alphabet();
        let vertex_map = vec![0; graph.vertex_count()];
        let forced = vec![false; graph.vertex_count()];
        GraphOver {
            target: Graph::rose(n),
            graph,
            vertex_map,
            forced,
        }
    }

    /// The domain of `f` subdivided so that every piece maps onto one edge.
    /// Original vertices come first (same ids) and are marked as forced
    /// branch points.
    pub fn subdivision(f: &GraphMap) -> GraphOver {
        let dg = f.graph();
        let cg = f.codomain().graph();
        let mut g = LabeledGraph::new(cg.edge_count(), dg.vertex_count(), Vec::new(), None)
            .expect("empty graph is valid");
        let mut vertex_map = f.vertex_map().to_vec();
        let mut edges = Vec::new();
        for (e, img) in f.edge_images().iter().enumerate() {
            let (s, t) = dg.ends()[e];
            let mut cur = s;
            for (k, &d) in img.edges.iter().enumerate() {
                let next = if k + 1 == img.edges.len() {
                    t
                } else {
                    vertex_map.push(cg.dst(d));
                    g.add_vertex()
                };
                let label = d.edge() as i32 + 1;
                edges.push(if d.is_forward() {
                    LabeledEdge { src: cur, dst: next, label }
                } else {
                    LabeledEdge { src: next, dst: cur, label }
                });
                cur = next;
            }
        }
        let n = g.vertex_count();
        let graph = LabeledGraph::new(cg.edge_count(), n, edges, None).expect("valid subdivision");
        let mut forced = vec![false; n];
        forced[..dg.vertex_count()].fill(true);
        GraphOver {
            target: cg.clone(),
            graph,
            vertex_map,
            forced,
        }
    }

    pub fn target(&self) -> &Graph {
        &self.target
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn vertex_map(&self) -> &[usize] {
        &self.vertex_map
    }

    pub fn force(&mut self, v: usize) {
        self.forced[v] = true;
    }

    /// Splits every edge of the target and of `X` at its midpoint. The
    /// fiber product changes only by the same subdivision.
    pub fn barycentric(&self) -> GraphOver {
        let t = &self.target;
        let tv = t.vertex_count();
        let mut ends = Vec::with_capacity(2 * t.edge_count());
        for (e, &(a, b)) in t.ends().iter().enumerate() {
            ends.push((a, tv + e));
            ends.push((tv + e, b));
        }
        let target = Graph::new(tv + t.edge_count(), ends).expect("subdivision of a valid graph");
        let n = self.graph.vertex_count();
        let mut vertex_map = self.vertex_map.clone();
        let mut edges = Vec::with_capacity(2 * self.graph.edge_count());
        for (i, e) in self.graph.edges().iter().enumerate() {
            let eps = e.label - 1;
            vertex_map.push(tv + eps as usize);
            edges.push(LabeledEdge { src: e.src, dst: n + i, label: 2 * eps + 1 });
            edges.push(LabeledEdge { src: n + i, dst: e.dst, label: 2 * eps + 2 });
        }
        let graph = LabeledGraph::new(2 * t.edge_count(), vertex_map.len(), edges, None)
            .expect("subdivision of a valid graph");
        let mut forced = self.forced.clone();
        forced.resize(vertex_map.len(), false);
        GraphOver { target, graph, vertex_map, forced }
    }

    /// First vertex with two outgoing half-edges over the same direction.
    pub fn immersion_defect(&self) -> Option<usize> {
        self.graph
            .adjacency()
            .iter()
            .position(|a| a.windows(2).any(|w| w[0].label == w[1].label))
    }
}

/// The full fiber product `X ×_Γ Y`.
#[derive(Clone, Debug)]
pub struct FiberProduct {
    /// Product graph, labeled like the factors.
    pub graph: LabeledGraph,
    /// Vertex `(x, y)` for each product vertex.
    pub pairs: Vec<(usize, usize)>,
    /// Edge pair for each product edge.
    pub edge_pairs: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl FiberProduct {
    pub fn vertex(&self, x: usize, y: usize) -> Option<usize> {
        self.index.get(&(x, y)).copied()
    }

    /// First Betti number of the component containing vertex `v`.
    pub fn component_rank(&self, v: usize) -> usize {
        let (comp, _) = self.graph.components();
        let c = comp[v];
        let verts = comp.iter().filter(|&&k| k == c).count();
        let edges = self
            .graph
            .edges()
            .iter()
            .filter(|e| comp[e.src] == c)
            .count();
        edges + 1 - verts
    }

    /// Ranks of the components of the core (no basepoint kept).
    pub fn core_component_ranks(&self) -> Vec<usize> {
        let core = self.graph.core(false);
        let (comp, count) = core.components();
        let mut verts = vec![0usize; count];
        let mut edges = vec![0usize; count];
        for &c in &comp {
            verts[c] += 1;
        }
        for e in core.edges() {
            edges[comp[e.src]] += 1;
        }
        let mut ranks: Vec<usize> = (0..count).map(|c| edges[c] + 1 - verts[c]).collect();
        ranks.sort_unstable();
        ranks
    }
}

/// Materializes `X ×_Γ Y`: vertices are pairs over a common target vertex,
/// edges are pairs of edges over a common target edge.
pub fn fiber_product(x: &GraphOver, y: &GraphOver) -> Result<FiberProduct> {
    if x.target != y.target {
        return Err(Error::DifferentGraphs);
    }
    if let Some(v) = x.immersion_defect() {
        return Err(Error::NotImmersion { vertex: v });
    }
    if let Some(v) = y.immersion_defect() {
        return Err(Error::NotImmersion { vertex: v });
    }
    let mut by_image: Vec<Vec<usize>> = vec![Vec::new(); x.target.vertex_count()];
    for (v, &img) in y.vertex_map.iter().enumerate() {
        by_image[img].push(v);
    }
    let mut pairs = Vec::new();
    let mut index = HashMap::new();
    for (a, &img) in x.vertex_map.iter().enumerate() {
        for &b in &by_image[img] {
            index.insert((a, b), pairs.len());
            pairs.push((a, b));
        }
    }
    let mut y_by_label: HashMap<i32, Vec<usize>> = HashMap::new();
    for (i, e) in y.graph.edges().iter().enumerate() {
        y_by_label.entry(e.label).or_default().push(i);
    }
    let mut edges = Vec::new();
    let mut edge_pairs = Vec::new();
    for (i, ex) in x.graph.edges().iter().enumerate() {
        for &j in y_by_label.get(&ex.label).map(Vec::as_slice).unwrap_or(&[]) {
            let ey = y.graph.edges()[j];
            edges.push(LabeledEdge {
                src: index[&(ex.src, ey.src)],
                dst: index[&(ex.dst, ey.dst)],
                label: ex.label,
            });
            edge_pairs.push((i, j));
        }
    }
    let graph = LabeledGraph::new(x.graph.alphabet(), pairs.len(), edges, None)?;
    Ok(FiberProduct {
        graph,
        pairs,
        edge_pairs,
        index,
    })
}

/// Traversal of an edge of a factor: `(edge id, forwards?)`.
pub type HalfRef = (u32, bool);

/// A product edge-path between two branch pairs whose interior avoids
/// branch pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreWalk {
    pub from: usize,
    pub to: usize,
    pub len: usize,
    pub x_first: HalfRef,
    pub y_first: HalfRef,
    pub x_last: HalfRef,
    pub y_last: HalfRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreComponent {
    pub nodes: Vec<usize>,
    pub walks: Vec<usize>,
    pub rank: usize,
}

impl CoreComponent {
    /// A circle: rank one and every node meets exactly two walk ends.
    pub fn is_single_loop(&self) -> bool {
        self.rank == 1 && self.nodes.len() == self.walks.len()
    }
}

/// The core of a fiber product in compressed form: branch pairs and the
/// walks joining them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProductCore {
    pub nodes: Vec<(usize, usize)>,
    pub walks: Vec<CoreWalk>,
    pub components: Vec<CoreComponent>,
}

impl ProductCore {
    pub fn total_rank(&self) -> usize {
        self.components.iter().map(|c| c.rank).sum()
    }

    /// Ranks of all components, sorted.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.components.iter().map(|c| c.rank).collect();
        r.sort_unstable();
        r
    }

    /// A cyclically reduced closed sequence of oriented walks in the
    /// component: `(walk, forwards?)`.
    pub fn cycle(&self, comp: &CoreComponent) -> Vec<(usize, bool)> {
        // Spanning tree over the component's walks, then close up along the
        // first non-tree walk.
        let local: HashMap<usize, usize> =
            comp.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut adj: Vec<Vec<(usize, bool, usize)>> = vec![Vec::new(); comp.nodes.len()];
        for &w in &comp.walks {
            let walk = &self.walks[w];
            let (a, b) = (local[&walk.from], local[&walk.to]);
            adj[a].push((w, true, b));
            adj[b].push((w, false, a));
        }
        let mut parent: Vec<Option<(usize, bool, usize)>> = vec![None; comp.nodes.len()];
        let mut seen = vec![false; comp.nodes.len()];
        let mut in_tree = vec![false; self.walks.len()];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &(w, fwd, t) in &adj[v] {
                if !seen[t] {
                    seen[t] = true;
                    in_tree[w] = true;
                    parent[t] = Some((w, fwd, v));
                    queue.push_back(t);
                }
            }
        }
        let &closing = comp
            .walks
            .iter()
            .find(|&&w| !in_tree[w])
            .expect("a core component has a non-tree walk");
        let path_to = |mut v: usize| {
            let mut p = Vec::new();
            while let Some((w, fwd, u)) = parent[v] {
                p.push((w, fwd));
                v = u;
            }
            p.reverse();
            p
        };
        let cw = &self.walks[closing];
        let mut seq = path_to(local[&cw.from]);
        seq.push((closing, true));
        seq.extend(path_to(local[&cw.to]).into_iter().rev().map(|(w, f)| (w, !f)));
        // Cancel backtracks, cyclically.
        let mut out: Vec<(usize, bool)> = Vec::with_capacity(seq.len());
        for s in seq {
            if out.last() == Some(&(s.0, !s.1)) {
                out.pop();
            } else {
                out.push(s);
            }
        }
        let (mut i, mut j) = (0, out.len());
        while j >= i + 2 && out[i] == (out[j - 1].0, !out[j - 1].1) {
            i += 1;
            j -= 1;
        }
        out[i..j].to_vec()
    }
}

/// Deduplicates walks found from both ends, prunes to the core and splits
/// into components.
fn assemble(nodes: Vec<(usize, usize)>, walks: Vec<CoreWalk>) -> ProductCore {
    let n = nodes.len();
    let mut degree = vec![0usize; n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, w) in walks.iter().enumerate() {
        degree[w.from] += 1;
        degree[w.to] += 1;
        incident[w.from].push(i);
        if w.to != w.from {
            incident[w.to].push(i);
        }
    }
    let mut alive_w = vec![true; walks.len()];
    let mut alive_n = vec![true; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if !alive_n[v] || degree[v] > 1 {
            continue;
        }
        alive_n[v] = false;
        for &i in &incident[v] {
            if alive_w[i] {
                alive_w[i] = false;
                let w = &walks[i];
                let other = if w.from == v { w.to } else { w.from };
                degree[other] -= 1;
                if degree[other] <= 1 {
                    stack.push(other);
                }
            }
        }
    }
    let mut new_id = vec![usize::MAX; n];
    let mut kept_nodes = Vec::new();
    for v in 0..n {
        if alive_n[v] {
            new_id[v] = kept_nodes.len();
            kept_nodes.push(nodes[v]);
        }
    }
    let kept_walks: Vec<CoreWalk> = walks
        .into_iter()
        .zip(&alive_w)
        .filter(|(_, &a)| a)
        .map(|(w, _)| CoreWalk {
            from: new_id[w.from],
            to: new_id[w.to],
            ..w
        })
        .collect();

    let m = kept_nodes.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for w in &kept_walks {
        let (a, b) = (find(&mut parent, w.from), find(&mut parent, w.to));
        if a != b {
            parent[a] = b;
        }
    }
    let mut comp_of = HashMap::new();
    let mut components: Vec<CoreComponent> = Vec::new();
    for v in 0..m {
        let r = find(&mut parent, v);
        let c = *comp_of.entry(r).or_insert_with(|| {
            components.push(CoreComponent {
                nodes: Vec::new(),
                walks: Vec::new(),
                rank: 0,
            });
            components.len() - 1
        });
        components[c].nodes.push(v);
    }
    for (i, w) in kept_walks.iter().enumerate() {
        let r = find(&mut parent, w.from);
        components[comp_of[&r]].walks.push(i);
    }
    for c in &mut components {
        c.rank = c.walks.len() + 1 - c.nodes.len();
    }
    ProductCore {
        nodes: kept_nodes,
        walks: kept_walks,
        components,
    }
}

/// Core of `X ×_Γ Y` for immersions, without materializing the product.
/// Branch vertices of a factor are those of valence other than two, forced
/// vertices, and one vertex on every component that is a bare cycle.
pub fn product_core(x: &GraphOver, y: &GraphOver) -> Result<ProductCore> {
    if x.target != y.target {
        return Err(Error::DifferentGraphs);
    }
    if let Some(v) = x.immersion_defect() {
        return Err(Error::NotImmersion { vertex: v });
    }
    if let Some(v) = y.immersion_defect() {
        return Err(Error::NotImmersion { vertex: v });
    }
    let bx = branch_vertices(x);
    let by = branch_vertices(y);
    let ax = x.graph.adjacency();
    let ay = y.graph.adjacency();

    let mut y_by_image: Vec<Vec<usize>> = vec![Vec::new(); x.target.vertex_count()];
    for (v, &img) in y.vertex_map.iter().enumerate() {
        y_by_image[img].push(v);
    }
    let mut x_by_image: Vec<Vec<usize>> = vec![Vec::new(); x.target.vertex_count()];
    for (v, &img) in x.vertex_map.iter().enumerate() {
        x_by_image[img].push(v);
    }
    let mut starts: Vec<(usize, usize)> = Vec::new();
    for a in (0..bx.len()).filter(|&a| bx[a]) {
        for &b in &y_by_image[x.vertex_map[a]] {
            starts.push((a, b));
        }
    }
    for b in (0..by.len()).filter(|&b| by[b]) {
        for &a in &x_by_image[y.vertex_map[b]] {
            if !bx[a] {
                starts.push((a, b));
            }
        }
    }

    // The other half-edge at a valence-two vertex, given the arriving one.
    fn continue_at(
        adj: &[Vec<crate::stallings::HalfEdge>],
        v: usize,
        arrived_by: usize,
        arrived_forward: bool,
    ) -> crate::stallings::HalfEdge {
        let back_label_sign = !arrived_forward;
        let a = &adj[v];
        debug_assert_eq!(a.len(), 2);
        // The half-edge leaving v back along the arriving edge.
        let back = a
            .iter()
            .position(|h| h.edge == arrived_by && (h.label > 0) == back_label_sign)
            .expect("arriving edge is incident");
        a[1 - back]
    }

    let mut node_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut walks = Vec::new();
    let mut id_of = |p: (usize, usize), nodes: &mut Vec<(usize, usize)>| {
        *node_id.entry(p).or_insert_with(|| {
            nodes.push(p);
            nodes.len() - 1
        })
    };
    for &(a, b) in &starts {
        for hx in &ax[a] {
            for hy in ay[b].iter().filter(|h| h.label == hx.label) {
                let x_first = (hx.edge as u32, hx.label > 0);
                let y_first = (hy.edge as u32, hy.label > 0);
                let (mut cx, mut cy) = (hx.target, hy.target);
                let (mut lx, mut ly) = (x_first, y_first);
                let mut len = 1;
                let ok = loop {
                    if bx[cx] || by[cy] {
                        break true;
                    }
                    let nx = continue_at(&ax, cx, lx.0 as usize, lx.1);
                    let ny = continue_at(&ay, cy, ly.0 as usize, ly.1);
                    if nx.label != ny.label {
                        break false;
                    }
                    lx = (nx.edge as u32, nx.label > 0);
                    ly = (ny.edge as u32, ny.label > 0);
                    cx = nx.target;
                    cy = ny.target;
                    len += 1;
                };
                if !ok {
                    continue;
                }
                let fwd_key = ((a, b), x_first, y_first);
                let rev_key = ((cx, cy), (lx.0, !lx.1), (ly.0, !ly.1));
                if fwd_key > rev_key {
                    continue;
                }
                let from = id_of((a, b), &mut nodes);
                let to = id_of((cx, cy), &mut nodes);
                walks.push(CoreWalk {
                    from,
                    to,
                    len,
                    x_first,
                    y_first,
                    x_last: lx,
                    y_last: ly,
                });
            }
        }
    }
    Ok(assemble(nodes, walks))
}

fn branch_vertices(g: &GraphOver) -> Vec<bool> {
    let val = g.graph.valences();
    let mut branch: Vec<bool> = (0..val.len()).map(|v| val[v] != 2 || g.forced[v]).collect();
    // Bare cycles: components without any branch vertex.
    let (comp, count) = g.graph.components();
    let mut has_branch = vec![false; count];
    for v in 0..val.len() {
        if branch[v] {
            has_branch[comp[v]] = true;
        }
    }
    for v in 0..val.len() {
        if !has_branch[comp[v]] {
            branch[v] = true;
            has_branch[comp[v]] = true;
        }
    }
    branch
}

const HASH_MOD: u64 = (1 << 61) - 1;
const HASH_BASE: u64 = 0x1d5a_3c7e_9b12_4f63 % HASH_MOD;

#[inline]
fn mulmod(a: u64, b: u64) -> u64 {
    let p = (a as u128) * (b as u128);
    let lo = (p as u64) & HASH_MOD;
    let hi = (p >> 61) as u64;
    let s = lo + hi;
    if s >= HASH_MOD {
        s - HASH_MOD
    } else {
        s
    }
}

struct Hashed {
    prefix: Vec<u64>,
}

impl Hashed {
    fn new(symbols: impl Iterator<Item = u64>) -> Hashed {
        let mut prefix = vec![0];
        let mut h = 0;
        for s in symbols {
            h = mulmod(h, HASH_BASE) + s + 1;
            if h >= HASH_MOD {
                h -= HASH_MOD;
            }
            prefix.push(h);
        }
        Hashed { prefix }
    }

    fn range(&self, l: usize, r: usize, powers: &[u64]) -> u64 {
        let sub = mulmod(self.prefix[l], powers[r - l]);
        let h = self.prefix[r];
        if h >= sub {
            h - sub
        } else {
            h + HASH_MOD - sub
        }
    }
}

/// A point of the domain `Γ` that is a vertex of some subdivision `S_j`.
/// Interior points carry their least level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Point {
    Vertex(usize),
    Interior { edge: usize, level: usize, index: usize },
}

/// Shape of a component of `Γ̂_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentShape {
    SingleLoop,
    HigherRank,
}

/// A core component of `Γ_i` with its classification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelComponent {
    pub rank: usize,
    pub shape: ComponentShape,
    /// Contained in the diagonal `Γ_0`.
    pub diagonal: bool,
    /// Contained in `Γ_{i-1}`.
    pub earlier: bool,
    /// Level-independent description used to match components across levels.
    pub code: Vec<(Point, Point, DirEdge, DirEdge)>,
}

/// One stage `Γ_i` of the filtration.
#[derive(Clone, Debug)]
pub struct Level {
    pub index: usize,
    pub core: ProductCore,
    pub components: Vec<LevelComponent>,
    /// Number of connected components of the whole (uncored) `Γ_i`.
    pub raw_components: usize,
}

impl Level {
    /// Core components of `Γ̂_i = Γ_i ∖ Γ_{i-1}`.
    pub fn hat(&self) -> impl Iterator<Item = (usize, &LevelComponent)> {
        self.components.iter().enumerate().filter(|(_, c)| !c.earlier)
    }

    /// Core components off the diagonal, i.e. the core of `Γ̂_1(f^i)`.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, &LevelComponent)> {
        self.components.iter().enumerate().filter(|(_, c)| !c.diagonal)
    }
}

/// Summary of `Γ̂_i` as returned by [`Filtration::hat_components`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HatSummary {
    pub level: usize,
    pub components: Vec<HatComponent>,
    /// Components of the uncored `Γ̂_i` (trees included).
    pub raw_count: usize,
    /// Raw components with trivial fundamental group.
    pub tree_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HatComponent {
    pub rank: usize,
    pub shape: ComponentShape,
}

/// Results of the structural checks run on a filtration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawReport {
    /// For each `i ≥ 1`: the core components of `Γ_{i-1}` reappear, one for
    /// one, as the components of `Γ_i` flagged as earlier.
    pub nested: Vec<bool>,
    /// Once some `Γ̂_i` is empty every later one is empty.
    pub emptiness_persists: bool,
    /// Once some nonempty `Γ̂_i` consists of loops every later one does.
    pub loops_persist: bool,
}

impl LawReport {
    pub fn holds(&self) -> bool {
        self.nested.iter().all(|&b| b) && self.emptiness_persists && self.loops_persist
    }
}

/// The pullback filtration `Γ_0 ⊆ Γ_1 ⊆ …` of a self-immersion.
#[derive(Clone, Debug)]
pub struct Filtration {
    f: GraphMap,
    /// `images[i][e]` is `f^i(e)` as dense direction indices.
    images: Vec<Vec<Vec<u32>>>,
    /// `prefix[i][e][j]`: total length of `f` applied to the first `j`
    /// edges of `f^{i-1}(e)`; these are positions in `f^i(e)`. Index 0 unused.
    prefix: Vec<Vec<Vec<u32>>>,
    levels: Vec<Level>,
    budget: usize,
}

impl Filtration {
    /// Default bound on the total length of all `f^i(e)`.
    pub const DEFAULT_BUDGET: usize = 1 << 21;

    pub fn new(f: &GraphMap) -> Result<Filtration> {
        Filtration::with_budget(f, Filtration::DEFAULT_BUDGET)
    }

    pub fn with_budget(f: &GraphMap, budget: usize) -> Result<Filtration> {
        if !f.is_self_map() {
            return Err(Error::DifferentGraphs);
        }
        if let Some(v) = f.immersion_defect() {
            return Err(Error::NotImmersion { vertex: v });
        }
        let g = f.graph();
        let level0: Vec<Vec<u32>> = (0..g.edge_count())
            .map(|e| vec![DirEdge::forward(e).index() as u32])
            .collect();
        Ok(Filtration {
            f: f.clone(),
            images: vec![level0],
            prefix: vec![Vec::new()],
            levels: Vec::new(),
            budget,
        })
    }

    pub fn map(&self) -> &GraphMap {
        &self.f
    }

    /// Number of stages computed beyond `Γ_0`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> Result<&Level> {
        if i == 0 || i > self.levels.len() {
            return Err(Error::DepthExceeded {
                requested: i,
                computed: self.levels.len(),
            });
        }
        Ok(&self.levels[i - 1])
    }

    /// Computes stages up to `depth`. Returns `false` without computing
    /// further when the next stage would exceed the size budget.
    pub fn extend_to(&mut self, depth: usize) -> bool {
        while self.levels.len() < depth {
            let i = self.levels.len() + 1;
            let prev = &self.images[i - 1];
            let lens: Vec<usize> = self.f.image_lengths();
            let next_total: usize = prev
                .iter()
                .map(|p| p.iter().map(|&d| lens[d as usize >> 1]).sum::<usize>())
                .sum();
            if next_total > self.budget {
                return false;
            }
            let mut next = Vec::with_capacity(prev.len());
            let mut pre = Vec::with_capacity(prev.len());
            for p in prev {
                let mut img = Vec::new();
                let mut sums = Vec::with_capacity(p.len() + 1);
                sums.push(0u32);
                for &d in p {
                    let path = self.f.image(DirEdge::from_index(d as usize));
                    img.extend(path.edges.iter().map(|x| x.index() as u32));
                    sums.push(img.len() as u32);
                }
                debug_assert!(img.windows(2).all(|w| w[1] != w[0] ^ 1));
                next.push(img);
                pre.push(sums);
            }
            self.images.push(next);
            self.prefix.push(pre);
            let level = self.compute_level(i);
            self.levels.push(level);
        }
        true
    }

    /// The point at position `k` of `f^i(e)`, pushed down to the least level.
    fn canonical_point(&self, e: usize, i: usize, k: usize) -> Point {
        let g = self.f.graph();
        let len = self.images[i][e].len();
        if k == 0 {
            return Point::Vertex(g.ends()[e].0);
        }
        if k == len {
            return Point::Vertex(g.ends()[e].1);
        }
        let (mut level, mut index) = (i, k);
        while level > 1 {
            match self.prefix[level][e].binary_search(&(index as u32)) {
                Ok(j) => {
                    index = j;
                    level -= 1;
                }
                Err(_) => break,
            }
        }
        Point::Interior {
            edge: e,
            level,
            index,
        }
    }

    /// `f^{i-1}` of the point at position `k` of `f^i(e)`, as a vertex or as
    /// a position in `f(e')` for a forward edge `e'`.
    fn push_forward(&self, e: usize, i: usize, k: usize) -> (usize, usize, usize) {
        // Encoded as (kind, a, b): (0, v, 0) vertex, (1, edge, offset).
        let g = self.f.graph();
        let sums = &self.prefix[i][e];
        let q = &self.images[i - 1][e];
        let j = match sums.binary_search(&(k as u32)) {
            Ok(j) => {
                // Boundary between pieces: a vertex.
                let v = if j == 0 {
                    g.src(DirEdge::from_index(q[0] as usize))
                } else {
                    g.dst(DirEdge::from_index(q[j - 1] as usize))
                };
                return (0, v, 0);
            }
            Err(j) => j - 1,
        };
        let d = DirEdge::from_index(q[j] as usize);
        let off = k - sums[j] as usize;
        let piece = self.f.edge_images()[d.edge()].len();
        if d.is_forward() {
            (1, d.edge(), off)
        } else {
            (1, d.edge(), piece - off)
        }
    }

    fn compute_level(&self, i: usize) -> Level {
        let g = self.f.graph();
        let imgs = &self.images[i];
        let n_edges = g.edge_count();
        let n_vertices = g.vertex_count();
        let total: usize = imgs.iter().map(Vec::len).sum();

        // Dense ids for S_i vertices: originals, then interiors edge by edge.
        let mut offset = Vec::with_capacity(n_edges + 1);
        let mut acc = n_vertices;
        for img in imgs {
            offset.push(acc);
            acc += img.len() - 1;
        }
        offset.push(acc);
        let vertex_of = |e: usize, k: usize| -> usize {
            if k == 0 {
                g.ends()[e].0
            } else if k == imgs[e].len() {
                g.ends()[e].1
            } else {
                offset[e] + k - 1
            }
        };
        let fi_vertex: Vec<usize> = {
            let mut v: Vec<usize> = (0..n_vertices).collect();
            for _ in 0..i {
                v = v.iter().map(|&x| self.f.vertex_map()[x]).collect();
            }
            v
        };
        let image_of = |x: usize| -> usize {
            if x < n_vertices {
                fi_vertex[x]
            } else {
                let e = offset.partition_point(|&o| o <= x) - 1;
                let k = x - offset[e] + 1;
                g.src(DirEdge::from_index(imgs[e][k] as usize))
            }
        };
        // Position of an S_i vertex: (edge, index) for interiors.
        let locate = |x: usize| -> (usize, usize) {
            let e = offset.partition_point(|&o| o <= x) - 1;
            (e, x - offset[e] + 1)
        };

        let mut powers = vec![1u64; total + 2];
        for j in 1..powers.len() {
            powers[j] = mulmod(powers[j - 1], HASH_BASE);
        }
        let fwd: Vec<Hashed> = imgs
            .iter()
            .map(|s| Hashed::new(s.iter().map(|&d| d as u64)))
            .collect();
        let bwd: Vec<Hashed> = imgs
            .iter()
            .map(|s| Hashed::new(s.iter().rev().map(|&d| (d ^ 1) as u64)))
            .collect();

        // A run: (edge, position, forwards?). Label of its first step.
        let first_label = |e: usize, p: usize, forward: bool| -> u32 {
            if forward {
                imgs[e][p]
            } else {
                imgs[e][p - 1] ^ 1
            }
        };
        let run_hash = |e: usize, p: usize, forward: bool, m: usize| -> u64 {
            let l = imgs[e].len();
            if forward {
                fwd[e].range(p, p + m, &powers)
            } else {
                bwd[e].range(l - p, l - p + m, &powers)
            }
        };
        let runs_at = |x: usize| -> Vec<(usize, usize, bool)> {
            if x < n_vertices {
                g.directions(x)
                    .iter()
                    .map(|d| {
                        if d.is_forward() {
                            (d.edge(), 0, true)
                        } else {
                            (d.edge(), imgs[d.edge()].len(), false)
                        }
                    })
                    .collect()
            } else {
                let (e, k) = locate(x);
                vec![(e, k, true), (e, k, false)]
            }
        };

        let mut by_image: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
        for x in 0..acc {
            by_image[image_of(x)].push(x);
        }
        let mut starts = Vec::new();
        for v in 0..n_vertices {
            for &y in &by_image[fi_vertex[v]] {
                starts.push((v, y));
                if y >= n_vertices {
                    starts.push((y, v));
                }
            }
        }

        let mut node_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nodes = Vec::new();
        let mut walks = Vec::new();
        for &(a, b) in &starts {
            let ra = runs_at(a);
            let rb = runs_at(b);
            for &(ex, px, fx) in &ra {
                for &(ey, py, fy) in &rb {
                    if first_label(ex, px, fx) != first_label(ey, py, fy) {
                        continue;
                    }
                    let avail = |e: usize, p: usize, f: bool| if f { imgs[e].len() - p } else { p };
                    let m = avail(ex, px, fx).min(avail(ey, py, fy));
                    if run_hash(ex, px, fx, m) != run_hash(ey, py, fy, m) {
                        continue;
                    }
                    let step = |e: usize, p: usize, f: bool| -> (usize, HalfRef, HalfRef) {
                        let q = if f { p + m } else { p - m };
                        let first = if f { (offset_edge(e, p, &offset), true) } else { (offset_edge(e, p - 1, &offset), false) };
                        let last = if f { (offset_edge(e, q - 1, &offset), true) } else { (offset_edge(e, q, &offset), false) };
                        (vertex_of(e, q), first, last)
                    };
                    let (cx, x_first, x_last) = step(ex, px, fx);
                    let (cy, y_first, y_last) = step(ey, py, fy);
                    let fwd_key = ((a, b), x_first, y_first);
                    let rev_key = ((cx, cy), (x_last.0, !x_last.1), (y_last.0, !y_last.1));
                    if fwd_key > rev_key {
                        continue;
                    }
                    let mut id = |p: (usize, usize)| {
                        *node_id.entry(p).or_insert_with(|| {
                            nodes.push(p);
                            nodes.len() - 1
                        })
                    };
                    let from = id((a, b));
                    let to = id((cx, cy));
                    walks.push(CoreWalk {
                        from,
                        to,
                        len: m,
                        x_first,
                        y_first,
                        x_last,
                        y_last,
                    });
                }
            }
        }
        let core = assemble(nodes, walks);

        // Classification.
        let point_of = |x: usize| -> Point {
            if x < n_vertices {
                Point::Vertex(x)
            } else {
                let (e, k) = locate(x);
                self.canonical_point(e, i, k)
            }
        };
        let lower = |x: usize| -> (usize, usize, usize) {
            if x < n_vertices {
                let mut v = x;
                for _ in 1..i {
                    v = self.f.vertex_map()[v];
                }
                (0, v, 0)
            } else {
                let (e, k) = locate(x);
                self.push_forward(e, i, k)
            }
        };
        let direction_of = |h: HalfRef| -> DirEdge {
            let x = h.0 as usize;
            let e = offset_edge_inverse(x, imgs);
            DirEdge::new(e, h.1)
        };
        let mut components = Vec::with_capacity(core.components.len());
        for c in &core.components {
            let (x, y) = core.nodes[c.nodes[0]];
            let diagonal = x == y;
            let earlier = diagonal || lower(x) == lower(y);
            let mut code = Vec::with_capacity(2 * c.walks.len());
            for &w in &c.walks {
                let walk = &core.walks[w];
                let (a, b) = core.nodes[walk.from];
                code.push((point_of(a), point_of(b), direction_of(walk.x_first), direction_of(walk.y_first)));
                let (a, b) = core.nodes[walk.to];
                code.push((
                    point_of(a),
                    point_of(b),
                    direction_of(walk.x_last).rev(),
                    direction_of(walk.y_last).rev(),
                ));
            }
            code.sort();
            components.push(LevelComponent {
                rank: c.rank,
                shape: if c.is_single_loop() {
                    ComponentShape::SingleLoop
                } else {
                    ComponentShape::HigherRank
                },
                diagonal,
                earlier,
                code,
            });
        }

        // Raw component count: C = rank - E + V over the whole product.
        let mut per_vertex = vec![0u64; n_vertices];
        for x in 0..acc {
            per_vertex[image_of(x)] += 1;
        }
        let mut per_edge = vec![0u64; n_edges];
        for img in imgs {
            for &d in img {
                per_edge[d as usize >> 1] += 1;
            }
        }
        let v_raw: u64 = per_vertex.iter().map(|c| c * c).sum();
        let e_raw: u64 = per_edge.iter().map(|c| c * c).sum();
        let raw_components = (core.total_rank() as u64 + v_raw - e_raw) as usize;

        Level {
            index: i,
            core,
            components,
            raw_components,
        }
    }

    /// Summary of `Γ̂_i` with tree components counted but not listed.
    pub fn hat_components(&self, i: usize) -> Result<HatSummary> {
        let level = self.level(i)?;
        let prev_raw = if i == 1 { 1 } else { self.level(i - 1)?.raw_components };
        let raw_count = level.raw_components - prev_raw;
        let components: Vec<HatComponent> = level
            .hat()
            .map(|(_, c)| HatComponent {
                rank: c.rank,
                shape: c.shape,
            })
            .collect();
        Ok(HatSummary {
            level: i,
            tree_count: raw_count - components.len(),
            raw_count,
            components,
        })
    }

    /// Checks the inclusion and persistence laws on every computed stage.
    pub fn check_laws(&self) -> LawReport {
        let mut nested = Vec::new();
        for (idx, level) in self.levels.iter().enumerate() {
            let mut now: Vec<&Vec<_>> = level
                .components
                .iter()
                .filter(|c| c.earlier)
                .map(|c| &c.code)
                .collect();
            now.sort();
            let mut before: Vec<&Vec<_>> = if idx == 0 {
                Vec::new()
            } else {
                self.levels[idx - 1].components.iter().map(|c| &c.code).collect()
            };
            before.sort();
            // Γ_0 is the diagonal: at the first stage compare with the
            // diagonal components instead.
            let ok = if idx == 0 {
                let diag = level.components.iter().filter(|c| c.diagonal).count();
                now.len() == diag && diag <= 1
            } else {
                now == before
            };
            nested.push(ok);
        }
        let hats: Vec<Vec<&LevelComponent>> = self
            .levels
            .iter()
            .map(|l| l.hat().map(|(_, c)| c).collect())
            .collect();
        let first_empty = hats.iter().position(Vec::is_empty);
        let emptiness_persists = first_empty.is_none_or(|k| hats[k..].iter().all(Vec::is_empty));
        let loops = |h: &Vec<&LevelComponent>| h.iter().all(|c| c.shape == ComponentShape::SingleLoop);
        let first_loops = hats.iter().position(|h| !h.is_empty() && loops(h));
        let loops_persist = first_loops.is_none_or(|k| hats[k..].iter().all(loops));
        LawReport {
            nested,
            emptiness_persists,
            loops_persist,
        }
    }

    /// Closed edge-paths in `Γ` traced by the two projections of a
    /// cyclically reduced cycle through a core component at stage `i`.
    pub fn project_component(&self, i: usize, component: usize) -> Result<(EdgePath, EdgePath)> {
        let level = self.level(i)?;
        let core = &level.core;
        let cycle = core.cycle(&core.components[component]);
        let imgs = &self.images[i];
        // Segments (edge, from, to) in positions of f^i(e).
        let mut sx = Vec::new();
        let mut sy = Vec::new();
        for &(w, forward) in &cycle {
            let walk = &core.walks[w];
            let seg = |first: HalfRef, last: HalfRef| -> (usize, usize, usize) {
                let (e, p) = offset_position(first.0 as usize, imgs);
                let (_, q) = offset_position(last.0 as usize, imgs);
                let from = if first.1 { p } else { p + 1 };
                let to = if last.1 { q + 1 } else { q };
                (e, from, to)
            };
            let (ax, ay) = (seg(walk.x_first, walk.x_last), seg(walk.y_first, walk.y_last));
            if forward {
                sx.push(ax);
                sy.push(ay);
            } else {
                sx.push((ax.0, ax.2, ax.1));
                sy.push((ay.0, ay.2, ay.1));
            }
        }
        let g = self.f.graph();
        Ok((
            segments_to_loop(g, &sx, imgs),
            segments_to_loop(g, &sy, imgs),
        ))
    }

    /// Searches the stage-`i` component for a loop `γ` with
    /// `[f^k(γ)] = [γ^d]`, using the induced endomorphism on words.
    pub fn invariant_loop(
        &self,
        i: usize,
        component: usize,
        endo: &Endomorphism,
        max_k: usize,
    ) -> Result<Option<InvariantLoop>> {
        let (px, py) = self.project_component(i, component)?;
        let marked = self.f.domain();
        for p in [px, py] {
            if p.is_empty() {
                continue;
            }
            let w = marked.read(&p);
            if let Some(found) = invariant_loop_of_word(&w, endo, max_k) {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }
}

fn offset_edge(e: usize, k: usize, offset: &[usize]) -> u32 {
    // S_i edge ids: edge e's pieces are consecutive, starting at the total
    // length of the earlier images. `offset` holds interior vertex offsets,
    // which differ from edge offsets by the vertex count and the edge index.
    let n_vertices = offset[0];
    (offset[e] - n_vertices + e + k) as u32
}

fn offset_edge_inverse(id: usize, imgs: &[Vec<u32>]) -> usize {
    offset_position(id, imgs).0
}

fn offset_position(id: usize, imgs: &[Vec<u32>]) -> (usize, usize) {
    let mut rest = id;
    for (e, img) in imgs.iter().enumerate() {
        if rest < img.len() {
            return (e, rest);
        }
        rest -= img.len();
    }
    panic!("edge id out of range")
}

/// Turns a cyclic sequence of within-edge segments into a tight closed
/// edge-path: consecutive segments in the same edge are merged, then each
/// maximal segment running end to end becomes a traversal.
fn segments_to_loop(g: &Graph, segs: &[(usize, usize, usize)], imgs: &[Vec<u32>]) -> EdgePath {
    let at_end = |e: usize, p: usize| p == 0 || p == imgs[e].len();
    // Rotate to start right after a segment ending at an original vertex.
    let Some(start) = segs.iter().position(|&(e, _, to)| at_end(e, to)) else {
        return EdgePath::trivial(0);
    };
    let n = segs.len();
    let order: Vec<(usize, usize, usize)> = (1..=n).map(|k| segs[(start + k) % n]).collect();
    let mut merged: Vec<(usize, usize, usize)> = Vec::new();
    for s in order {
        match merged.last_mut() {
            Some(last) if last.0 == s.0 && last.2 == s.1 && !at_end(s.0, s.1) => last.2 = s.2,
            _ => merged.push(s),
        }
    }
    let mut edges = Vec::new();
    for (e, from, to) in merged {
        let l = imgs[e].len();
        if from == 0 && to == l {
            edges.push(DirEdge::forward(e));
        } else if from == l && to == 0 {
            edges.push(DirEdge::new(e, false));
        }
    }
    let start_vertex = edges.first().map_or(0, |&d| g.src(d));
    EdgePath {
        start: start_vertex,
        edges,
    }
    .cyclically_tightened(g)
}

/// A witness `[f^k(γ)] = [γ^d]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantLoop {
    pub gamma: Word,
    pub k: usize,
    pub d: usize,
}

/// Tests `[φ^k(γ)] = [γ^d]` for the primitive root `γ` of `w`, `k ≤ max_k`.
pub fn invariant_loop_of_word(w: &Word, endo: &Endomorphism, max_k: usize) -> Option<InvariantLoop> {
    const MAX_LEN: usize = 1 << 20;
    let (core, _) = w.cyclic_reduce();
    if core.is_empty() {
        return None;
    }
    let (root, _) = core.primitive_root();
    // The class of γ and of γ⁻¹ are both invariant; report the smaller.
    let key = |w: &Word| w.letters().iter().map(|&l| letter_key(l)).collect::<Vec<_>>();
    let (fwd, bwd) = (root.canonical_cyclic(), root.inverse().canonical_cyclic());
    let root = if key(&bwd) < key(&fwd) { bwd } else { fwd };
    let mut img = root.clone();
    for k in 1..=max_k {
        img = endo.apply(&img).ok()?.cyclic_reduce().0;
        if img.is_empty() || img.len() > MAX_LEN {
            return None;
        }
        if img.len() % root.len() == 0 {
            let d = img.len() / root.len();
            if conjugate_in_free_group(&img, &root.pow(d as i64)) {
                return Some(InvariantLoop { gamma: root, k, d });
            }
        }
    }
    None
}

/// Outcome of the stabilization search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StabilizationVerdict {
    StabilizedAt {
        n: usize,
    },
    InvariantLoop {
        witness: InvariantLoop,
        /// Stage at which the component carrying the loop appeared.
        level: usize,
    },
    CapExceeded {
        /// Deepest stage computed.
        depth: usize,
        /// Rank of every off-diagonal core component at that stage.
        surviving_ranks: Vec<usize>,
        /// Whether the size budget, rather than the cap, stopped the search.
        budget_hit: bool,
    },
}

/// Smallest `N ≤ cap` with `Γ̂_1(f^N)` (core) empty, where
/// `Γ_1(f^N) = Γ_N(f)`; failing that, an invariant loop read off a new
/// component; failing that, the surviving components.
pub fn stabilization_power(f: &GraphMap, cap: usize) -> Result<StabilizationVerdict> {
    let mut filt = Filtration::new(f)?;
    let endo = f.induced_endomorphism()?;
    stabilization_search(&mut filt, &endo, cap)
}

pub fn stabilization_search(
    filt: &mut Filtration,
    endo: &Endomorphism,
    cap: usize,
) -> Result<StabilizationVerdict> {
    const LOOP_ITERATES: usize = 12;
    for n in 1..=cap {
        if !filt.extend_to(n) {
            let depth = filt.depth();
            let surviving_ranks = match depth {
                0 => Vec::new(),
                d => filt.level(d)?.off_diagonal().map(|(_, c)| c.rank).collect(),
            };
            return Ok(StabilizationVerdict::CapExceeded {
                depth,
                surviving_ranks,
                budget_hit: true,
            });
        }
        let level = filt.level(n)?;
        if level.off_diagonal().next().is_none() {
            return Ok(StabilizationVerdict::StabilizedAt { n });
        }
        let fresh: Vec<usize> = level.hat().map(|(k, _)| k).collect();
        for k in fresh {
            if let Some(witness) = filt.invariant_loop(n, k, endo, LOOP_ITERATES)? {
                return Ok(StabilizationVerdict::InvariantLoop { witness, level: n });
            }
        }
    }
    let depth = filt.depth();
    let surviving_ranks = if depth == 0 {
        Vec::new()
    } else {
        filt.level(depth)?.off_diagonal().map(|(_, c)| c.rank).collect()
    };
    Ok(StabilizationVerdict::CapExceeded {
        depth,
        surviving_ranks,
        budget_hit: false,
    })
}

/// The filtration computed to `i_max`, with its structural checks.
pub fn gamma_filtration(f: &GraphMap, i_max: usize) -> Result<(Filtration, LawReport)> {
    let mut filt = Filtration::new(f)?;
    if !filt.extend_to(i_max) {
        return Err(Error::DepthExceeded {
            requested: i_max,
            computed: filt.depth(),
        });
    }
    let laws = filt.check_laws();
    Ok((filt, laws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stallings::subgroup_graph;

    fn map(images: &[&str]) -> GraphMap {
        GraphMap::from_endomorphism(&Endomorphism::parse(images).unwrap())
    }

    fn sub(gens: &[&str]) -> GraphOver {
        let words: Vec<Word> = gens.iter().map(|g| Word::parse(g, 2).unwrap()).collect();
        GraphOver::over_rose(subgroup_graph(&words, 2).unwrap())
    }

    #[test]
    fn identity_product_is_diagonal() {
        let r = GraphOver::over_rose(LabeledGraph::rose(2));
        let p = fiber_product(&r, &r).unwrap();
        assert_eq!(p.graph.vertex_count(), 1);
        assert_eq!(p.core_component_ranks(), vec![2]);
        assert_eq!(product_core(&r, &r).unwrap().ranks(), vec![2]);
    }

    #[test]
    fn cyclic_subgroups() {
        let p = product_core(&sub(&["a"]), &sub(&["b"])).unwrap();
        assert!(p.components.is_empty());
        let x = GraphOver::over_rose(subgroup_graph(&[Word::parse("aa", 2).unwrap()], 2).unwrap());
        let y = GraphOver::over_rose(subgroup_graph(&[Word::parse("aaa", 2).unwrap()], 2).unwrap());
        let full = fiber_product(&x, &y).unwrap();
        assert_eq!(full.core_component_ranks(), vec![1]);
        let core = product_core(&x, &y).unwrap();
        assert_eq!(core.ranks(), vec![1]);
        let c = &core.components[0];
        let total: usize = c.walks.iter().map(|&w| core.walks[w].len).sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn sparse_core_matches_full_product() {
        let cases: [&[&str]; 4] = [&["ab", "ba"], &["aba", "bb"], &["abA"], &["aab", "bAb"]];
        for h in cases {
            for k in cases {
                let (x, y) = (sub(h), sub(k));
                let full = fiber_product(&x, &y).unwrap().core_component_ranks();
                assert_eq!(product_core(&x, &y).unwrap().ranks(), full, "{h:?} {k:?}");
            }
        }
    }

    #[test]
    fn identity_filtration() {
        let (filt, laws) = gamma_filtration(&map(&["a", "b"]), 3).unwrap();
        assert!(laws.holds());
        for i in 1..=3 {
            let hat = filt.hat_components(i).unwrap();
            assert!(hat.components.is_empty());
            assert_eq!(hat.raw_count, 0);
        }
        assert_eq!(
            stabilization_power(&map(&["a", "b"]), 4).unwrap(),
            StabilizationVerdict::StabilizedAt { n: 1 }
        );
    }

    #[test]
    fn doubling_on_circle() {
        let f = GraphMap::from_endomorphism(&Endomorphism::parse(&["aa"]).unwrap());
        let (filt, laws) = gamma_filtration(&f, 4).unwrap();
        assert!(laws.holds());
        let hat = filt.hat_components(1).unwrap();
        assert_eq!(hat.components.len(), 1);
        assert_eq!(hat.components[0].shape, ComponentShape::SingleLoop);
        match stabilization_power(&f, 16).unwrap() {
            StabilizationVerdict::InvariantLoop { witness, level } => {
                assert_eq!(witness.gamma, Word::parse("a", 1).unwrap());
                assert_eq!((witness.k, witness.d, level), (1, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn thue_morse_has_off_diagonal_component() {
        let (filt, laws) = gamma_filtration(&map(&["ab", "ba"]), 4).unwrap();
        assert!(laws.holds());
        assert!(!filt.hat_components(1).unwrap().components.is_empty());
    }

    #[test]
    fn depth_exceeded() {
        let (filt, _) = gamma_filtration(&map(&["a", "b"]), 1).unwrap();
        assert_eq!(
            filt.hat_components(2),
            Err(Error::DepthExceeded { requested: 2, computed: 1 })
        );
    }

    #[test]
    fn non_immersion_rejected() {
        assert!(matches!(
            Filtration::new(&map(&["ab", "a"])),
            Err(Error::NotImmersion { .. })
        ));
    }

    fn small_immersions() -> Vec<GraphMap> {
        let words = ["a", "b", "ab", "ba", "aB", "Ab", "abb", "aab", "abA", "bab", "aBa", "bba"];
        let mut out = Vec::new();
        for x in words {
            for y in words {
                let f = map(&[x, y]);
                if f.is_immersion() {
                    out.push(f);
                }
            }
        }
        assert!(out.len() >= 8, "only {} immersions", out.len());
        out
    }

    #[test]
    fn filtration_matches_materialized_products() {
        for f in small_immersions() {
            let (filt, laws) = gamma_filtration(&f, 3).unwrap();
            assert!(laws.holds(), "{:?}", f.induced_endomorphism());
            for i in 1..=3 {
                let fi = f.power(i).unwrap();
                let s = GraphOver::subdivision(&fi);
                let full = fiber_product(&s, &s).unwrap();
                let level = filt.level(i).unwrap();
                assert_eq!(level.core.ranks(), full.core_component_ranks());
                assert_eq!(level.raw_components, full.graph.components().1);
                assert_eq!(product_core(&s, &s).unwrap().ranks(), level.core.ranks());
            }
        }
    }

    #[test]
    fn subdivision_is_idempotent_up_to_amalgamation() {
        for f in small_immersions().into_iter().take(12) {
            let s = GraphOver::subdivision(&f.power(2).unwrap());
            let once = product_core(&s, &s).unwrap();
            let twice = product_core(&s.barycentric(), &s.barycentric()).unwrap();
            assert_eq!(once.ranks(), twice.ranks());
            assert_eq!(once.nodes.len(), twice.nodes.len());
            let mut a: Vec<usize> = once.walks.iter().map(|w| 2 * w.len).collect();
            let mut b: Vec<usize> = twice.walks.iter().map(|w| w.len).collect();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }
}
