//! Directions, turns, and the train-track test.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::GraphMap;
use crate::graph::DirEdge;

/// An unordered pair of distinct directions at a common vertex, stored with
/// `first < second`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Turn {
    pub first: DirEdge,
    pub second: DirEdge,
}

impl Turn {
    pub fn new(a: DirEdge, b: DirEdge) -> Turn {
        if a <= b {
            Turn { first: a, second: b }
        } else {
            Turn { first: b, second: a }
        }
    }

    pub fn is_degenerate(self) -> bool {
        self.first == self.second
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TrainTrackVerdict {
    TrainTrack,
    IllegalTurnFound {
        /// Edge whose image crosses the turn.
        edge: usize,
        turn: Turn,
        /// Number of `Df` iterations after which the turn degenerates.
        depth: usize,
    },
    Inconclusive {
        depth_cap: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Visiting,
    Legal,
    Illegal(usize),
}

impl GraphMap {
    /// `Df(d)`: the first edge of `f(d)`.
    pub fn direction_map(&self, d: DirEdge) -> DirEdge {
        let p = &self.edge_images[d.edge()];
        if d.is_forward() {
            p.edges[0]
        } else {
            p.edges[p.edges.len() - 1].rev()
        }
    }

    pub fn turn_image(&self, t: Turn) -> Turn {
        Turn::new(self.direction_map(t.first), self.direction_map(t.second))
    }

    /// Turns `{x̄, y}` for consecutive edges `x y` inside edge images, tagged
    /// with the edge whose image crosses them.
    pub fn turns_crossed(&self) -> Vec<(usize, Turn)> {
        let mut out = Vec::new();
        for (e, p) in self.edge_images.iter().enumerate() {
            for w in p.edges.windows(2) {
                out.push((e, Turn::new(w[0].rev(), w[1])));
            }
        }
        out
    }

    /// All non-degenerate turns of the domain.
    pub fn all_turns(&self) -> Vec<Turn> {
        let g = self.domain.graph();
        let mut out = Vec::new();
        for v in 0..g.vertex_count() {
            let dirs = g.directions(v);
            for i in 0..dirs.len() {
                for j in i + 1..dirs.len() {
                    out.push(Turn::new(dirs[i], dirs[j]));
                }
            }
        }
        out
    }

    /// Illegal turns with the number of iterations needed to degenerate.
    /// Exact: orbits in the finite turn set are followed until they
    /// degenerate, hit a classified turn, or close up.
    pub fn illegal_turns(&self) -> Vec<(Turn, usize)> {
        let mut memo = HashMap::new();
        self.all_turns()
            .into_iter()
            .filter_map(|t| match self.classify(t, &mut memo, usize::MAX) {
                Some(Status::Illegal(d)) => Some((t, d)),
                _ => None,
            })
            .collect()
    }

    pub fn is_legal(&self, t: Turn) -> bool {
        let mut memo = HashMap::new();
        matches!(self.classify(t, &mut memo, usize::MAX), Some(Status::Legal))
    }

    /// `None` when the orbit is longer than `cap` before resolving.
    fn classify(&self, t: Turn, memo: &mut HashMap<Turn, Status>, cap: usize) -> Option<Status> {
        let mut path = Vec::new();
        let mut cur = t;
        let resolved = loop {
            if cur.is_degenerate() {
                break Status::Illegal(0);
            }
            match memo.get(&cur) {
                Some(Status::Visiting) => break Status::Legal,
                Some(&s) => break s,
                None => {}
            }
            if path.len() >= cap {
                for p in &path {
                    memo.remove(p);
                }
                return None;
            }
            memo.insert(cur, Status::Visiting);
            path.push(cur);
            cur = self.turn_image(cur);
        };
        let mut status = resolved;
        for p in path.iter().rev() {
            status = match status {
                Status::Illegal(d) => Status::Illegal(d + 1),
                s => s,
            };
            memo.insert(*p, status);
        }
        memo.get(&t).copied().or(Some(resolved))
    }

    /// Train track iff every turn crossed by an edge image is legal.
    pub fn verify_train_track(&self, depth_cap: usize) -> TrainTrackVerdict {
        let mut memo = HashMap::new();
        for (edge, turn) in self.turns_crossed() {
            match self.classify(turn, &mut memo, depth_cap) {
                None => return TrainTrackVerdict::Inconclusive { depth_cap },
                Some(Status::Illegal(depth)) => {
                    return TrainTrackVerdict::IllegalTurnFound { edge, turn, depth }
                }
                Some(_) => {}
            }
        }
        TrainTrackVerdict::TrainTrack
    }

    /// First vertex at which `Df` fails to be injective.
    pub fn immersion_defect(&self) -> Option<usize> {
        let g = self.domain.graph();
        (0..g.vertex_count()).find(|&v| {
            let mut imgs: Vec<DirEdge> = g.directions(v).iter().map(|&d| self.direction_map(d)).collect();
            imgs.sort();
            imgs.windows(2).any(|w| w[0] == w[1])
        })
    }

    /// `Df` injective at every vertex (edge images are tight by construction).
    pub fn is_immersion(&self) -> bool {
        self.immersion_defect().is_none()
    }
}

pub fn verify_train_track(f: &GraphMap, depth_cap: usize) -> TrainTrackVerdict {
    f.verify_train_track(depth_cap)
}

pub fn is_immersion(f: &GraphMap) -> bool {
    f.is_immersion()
}
