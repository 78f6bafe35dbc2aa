//! Brute-force oracles shared by the integration and acceptance tests. None
//! of them call into the code they check, except where noted.
#![allow(dead_code)]

use std::collections::HashSet;

use endocert::words::{Endomorphism, Word};
use rand::Rng;

/// Every reduced word of length at most `max_len`, shortest first.
pub fn all_words(rank: usize, max_len: usize) -> Vec<Vec<i32>> {
    let letters: Vec<i32> = (1..=rank as i32).flat_map(|g| [g, -g]).collect();
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for &l in &letters {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v: Vec<i32> = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn random_raw<R: Rng>(rng: &mut R, rank: usize, max_len: usize) -> Vec<i32> {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            let g = rng.random_range(1..=rank as i32);
            if rng.random_bool(0.5) {
                g
            } else {
                -g
            }
        })
        .collect()
}

pub fn random_reduced<R: Rng>(rng: &mut R, rank: usize, min_len: usize, max_len: usize) -> Vec<i32> {
    loop {
        let w = naive_reduce(&random_raw(rng, rank, max_len));
        if w.len() >= min_len {
            return w;
        }
    }
}

/// Free reduction by repeatedly deleting the leftmost cancelling pair.
pub fn naive_reduce(raw: &[i32]) -> Vec<i32> {
    let mut w = raw.to_vec();
    'outer: loop {
        for i in 0..w.len().saturating_sub(1) {
            if w[i] == -w[i + 1] {
                w.drain(i..i + 2);
                continue 'outer;
            }
        }
        return w;
    }
}

pub fn naive_cyclic_core(w: &[i32]) -> Vec<i32> {
    let mut w = naive_reduce(w);
    while w.len() >= 2 && w[0] == -w[w.len() - 1] {
        w = w[1..w.len() - 1].to_vec();
    }
    w
}

/// Conjugacy by comparing all rotations of the cyclic cores.
pub fn rotation_conjugate(u: &[i32], v: &[i32]) -> bool {
    let (u, v) = (naive_cyclic_core(u), naive_cyclic_core(v));
    if u.len() != v.len() {
        return false;
    }
    if u.is_empty() {
        return true;
    }
    (0..u.len()).any(|r| (0..u.len()).all(|i| u[(i + r) % u.len()] == v[i]))
}

pub fn inverse(w: &[i32]) -> Vec<i32> {
    w.iter().rev().map(|&l| -l).collect()
}

pub fn concat(parts: &[&[i32]]) -> Vec<i32> {
    naive_reduce(&parts.concat())
}

/// Reduced products of at most `factors` generators or inverses, kept when
/// no longer than `max_len`.
pub fn product_closure(gens: &[Vec<i32>], factors: usize, max_len: usize) -> HashSet<Vec<i32>> {
    let symbols: Vec<Vec<i32>> = gens.iter().flat_map(|g| [g.clone(), inverse(g)]).collect();
    let mut seen: HashSet<Vec<i32>> = HashSet::new();
    let mut frontier = vec![Vec::new()];
    seen.insert(Vec::new());
    let mut all = HashSet::new();
    all.insert(Vec::new());
    for _ in 0..factors {
        let mut next = Vec::new();
        for w in &frontier {
            for s in &symbols {
                let p = concat(&[w, s]);
                if seen.insert(p.clone()) {
                    next.push(p);
                }
            }
        }
        for w in &next {
            if w.len() <= max_len {
                all.insert(w.clone());
            }
        }
        frontier = next;
    }
    all
}

/// Applies an endomorphism given by images, letter by letter.
pub fn naive_apply(images: &[Vec<i32>], w: &[i32]) -> Vec<i32> {
    let mut out = Vec::new();
    for &l in w {
        let img = &images[l.unsigned_abs() as usize - 1];
        if l > 0 {
            out.extend_from_slice(img);
        } else {
            out.extend(inverse(img));
        }
    }
    naive_reduce(&out)
}

pub fn word(w: &[i32], rank: usize) -> Word {
    Word::reduce(w, rank).unwrap()
}

pub fn endo(images: &[&str]) -> Endomorphism {
    Endomorphism::parse(images).unwrap()
}

pub fn letters(e: &Endomorphism) -> Vec<Vec<i32>> {
    e.images().iter().map(|w| w.letters().to_vec()).collect()
}

/// Real roots of a polynomial (coefficients lowest degree first), found by
/// isolating them between the roots of the derivative and bisecting.
pub fn real_roots(p: &[f64]) -> Vec<f64> {
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-p[0] / p[1]];
    }
    let lead = p[deg];
    let bound = 1.0 + p[..deg].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
    let dp: Vec<f64> = (1..=deg).map(|i| i as f64 * p[i]).collect();
    let mut cuts = vec![-bound];
    cuts.extend(real_roots(&dp).into_iter().filter(|x| x.abs() < bound));
    cuts.push(bound);
    cuts.sort_by(f64::total_cmp);
    let eval = |x: f64| p.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(lo), eval(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if eval(*cuts.last().unwrap()) == 0.0 {
        roots.push(*cuts.last().unwrap());
    }
    roots
}

/// Characteristic polynomial `det(λI - A)` for `n ≤ 3`, lowest degree first.
pub fn char_poly(a: &[Vec<u64>]) -> Vec<f64> {
    let f = |i: usize, j: usize| a[i][j] as f64;
    match a.len() {
        1 => vec![-f(0, 0), 1.0],
        2 => vec![f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0), -(f(0, 0) + f(1, 1)), 1.0],
        3 => {
            let tr = f(0, 0) + f(1, 1) + f(2, 2);
            let m2 = f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0) + f(0, 0) * f(2, 2) - f(0, 2) * f(2, 0) + f(1, 1) * f(2, 2)
                - f(1, 2) * f(2, 1);
            let det = f(0, 0) * (f(1, 1) * f(2, 2) - f(1, 2) * f(2, 1)) - f(0, 1) * (f(1, 0) * f(2, 2) - f(1, 2) * f(2, 0))
                + f(0, 2) * (f(1, 0) * f(2, 1) - f(1, 1) * f(2, 0));
            vec![-det, m2, -tr, 1.0]
        }
        _ => unimplemented!("sizes up to 3"),
    }
}

/// Largest real root of the characteristic polynomial.
pub fn pf_by_bisection(a: &[Vec<u64>]) -> f64 {
    real_roots(&char_poly(a)).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Rose immersions used as fixtures throughout. All are train track maps;
/// `a ↦ aa, b ↦ bb` is the only reducible one.
pub const IMMERSIONS: &[&[&str]] = &[
    &["ab", "ba"],
    &["aa", "bb"],
    &["ab", "baBa"],
    &["abb", "ba"],
    &["bbA", "AAb"],
    &["Ab", "aaB"],
    &["aab", "AB"],
    &["aa"],
    &["abc", "bca", "cab"],
];

/// A certifiable pair and a pair with a `BS(1, 2)` obstruction.
pub const CERTIFIED_PAIR: &[&[&str]] = &[&["ab", "baBa"], &["abb", "ba"]];
pub const OBSTRUCTED_PAIR: &[&[&str]] = &[&["ab", "ba"], &["aa", "bb"]];

/// Rank of the subgroup generated by the words of length at most `max_len`
/// lying in both `H` and `K`, found by reading every reduced word in the two
/// folded graphs at once and keeping those that return to both basepoints.
/// Exact once `max_len` reaches the length of a free basis of `H ∩ K`.
pub fn intersection_rank_by_enumeration(
    h: &endocert::stallings::LabeledGraph,
    k: &endocert::stallings::LabeledGraph,
    max_len: usize,
) -> usize {
    let (ah, ak) = (h.adjacency(), k.adjacency());
    let (bh, bk) = (h.basepoint().unwrap(), k.basepoint().unwrap());
    let mut found: Vec<Word> = Vec::new();
    let mut stack: Vec<(usize, usize, Vec<i32>)> = vec![(bh, bk, Vec::new())];
    while let Some((x, y, w)) = stack.pop() {
        if !w.is_empty() && x == bh && y == bk {
            found.push(word(&w, h.alphabet()));
        }
        if w.len() == max_len {
            continue;
        }
        for e in &ah[x] {
            if w.last() == Some(&-e.label) {
                continue;
            }
            if let Some(f) = ak[y].iter().find(|f| f.label == e.label) {
                let mut v = w.clone();
                v.push(e.label);
                stack.push((e.target, f.target, v));
            }
        }
    }
    if found.is_empty() {
        return 0;
    }
    endocert::stallings::subgroup_graph(&found, h.alphabet()).unwrap().rank()
}

/// The folded graph of `gKg⁻¹` from generators of `K`.
pub fn conjugated_subgroup(k_gens: &[Vec<i32>], g: &[i32]) -> endocert::stallings::LabeledGraph {
    let conj: Vec<Word> = k_gens.iter().map(|x| word(&concat(&[g, x, &inverse(g)]), 2)).collect();
    endocert::stallings::subgroup_graph(&conj, 2).unwrap()
}

/// Brute-force rank of `H ∩ gKg⁻¹`. Each conjugate `c⁻¹(H ∩ gKg⁻¹)c` has the
/// same rank and the enumeration bounds it from below, so the largest bound
/// over `|c| ≤ c_len` is kept, deepening the enumeration from `min_len` in
/// steps of two up to `max_len`. The search stops once it reaches
/// `claimed`, and never reports more than the true rank.
pub fn intersection_rank_brute(
    h_gens: &[Vec<i32>],
    k_gens: &[Vec<i32>],
    g: &[i32],
    claimed: usize,
    min_len: usize,
    max_len: usize,
    c_len: usize,
) -> usize {
    let mut best = 0;
    let conj: Vec<_> = all_words(2, c_len)
        .into_iter()
        .map(|c| {
            let ci = inverse(&c);
            (conjugated_subgroup(h_gens, &ci), conjugated_subgroup(k_gens, &concat(&[&ci, g])))
        })
        .collect();
    for len in (min_len..=max_len).step_by(2) {
        for (h, k) in &conj {
            best = best.max(intersection_rank_by_enumeration(h, k, len));
            if best >= claimed {
                return best;
            }
        }
    }
    best
}

/// Membership by saturating the unfolded wedge of generator petals: first
/// every pair of vertices joined by a path reading a freely trivial word,
/// then `w` read letter by letter with such detours allowed between letters.
pub fn wedge_membership(gens: &[Vec<i32>], w: &[i32]) -> bool {
    let mut trans: Vec<(usize, i32, usize)> = Vec::new();
    let mut n = 1;
    for g in gens {
        let mut prev = 0;
        for (i, &l) in g.iter().enumerate() {
            let next = if i + 1 == g.len() {
                0
            } else {
                n += 1;
                n - 1
            };
            trans.push((prev, l, next));
            trans.push((next, -l, prev));
            prev = next;
        }
    }
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    loop {
        let mut changed = false;
        for &(p, x, p1) in &trans {
            for &(q1, y, q) in &trans {
                if y == -x && r[p1][q1] && !r[p][q] {
                    r[p][q] = true;
                    changed = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] && !r[i][j] {
                        r[i][j] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let close = |s: &[bool]| -> Vec<bool> { (0..n).map(|q| (0..n).any(|p| s[p] && r[p][q])).collect() };
    let mut cur = vec![false; n];
    cur[0] = true;
    cur = close(&cur);
    for &l in w {
        let mut next = vec![false; n];
        for &(p, x, q) in &trans {
            if x == l && cur[p] {
                next[q] = true;
            }
        }
        cur = close(&next);
    }
    cur[0]
}
