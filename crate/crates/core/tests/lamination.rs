mod common;

use std::collections::HashSet;

use common::*;
use endocert::graph::EdgePath;
use endocert::graphmap::GraphMap;
use endocert::lamination::{
    independence_probe, leaf_segment, quasi_periodicity_probe, weak_convergence_fraction, IndependenceVerdict,
    LeafCatalog,
};
use num_rational::Ratio;

fn rose_map(images: &[&str]) -> GraphMap {
    GraphMap::from_endomorphism(&endo(images))
}

fn read(f: &GraphMap, p: &EdgePath) -> Vec<i32> {
    f.domain().read(p).letters().to_vec()
}

/// Subwords of length `len` of `φ^j(x)`, `j ≤ depth`, `x` a generator, and
/// their inverses.
fn word_catalog(images: &[Vec<i32>], depth: usize, len: usize) -> HashSet<Vec<i32>> {
    let mut out = HashSet::new();
    for g in 1..=images.len() as i32 {
        let mut w = vec![g];
        for j in 0..=depth {
            if j > 0 {
                w = naive_apply(images, &w);
            }
            for s in w.windows(len) {
                out.insert(s.to_vec());
                out.insert(inverse(s));
            }
        }
    }
    out
}

/// Positions of a cyclic word whose `2r` letters centred there are in the
/// catalog.
fn sliding_fraction(w: &[i32], cat: &HashSet<Vec<i32>>, r: usize) -> Ratio<u64> {
    let n = w.len();
    let good = (0..n)
        .filter(|&p| {
            let win: Vec<i32> = (0..2 * r).map(|i| w[(p + n * (r + 1) + i - r) % n]).collect();
            cat.contains(&win)
        })
        .count();
    Ratio::new(good as u64, n as u64)
}

#[test]
fn fibonacci_leaf_segments() {
    let fib = rose_map(&["ab", "a"]);
    assert_eq!(read(&fib, &leaf_segment(&fib, 0, 2).unwrap().path), vec![1, 2, 1]);
    assert_eq!(read(&fib, &leaf_segment(&fib, 1, 3).unwrap().path), vec![1, 2, 1]);
    assert_eq!(read(&fib, &leaf_segment(&fib, 1, 0).unwrap().path), vec![2]);
    let a = letters(&endo(&["ab", "a"]));
    for k in 0..10 {
        let mut w = vec![1];
        for _ in 0..k {
            w = naive_apply(&a, &w);
        }
        let seg = leaf_segment(&fib, 0, k).unwrap();
        assert_eq!(read(&fib, &seg.path), w);
        assert_eq!(seg.iterations, k);
    }
}

#[test]
fn leaf_growth_approaches_the_pf_eigenvalue() {
    for images in [&["ab", "a"][..], &["ab", "baBa"], &["abb", "ba"], &["abc", "bca", "cab"]] {
        let f = rose_map(images);
        let lambda = f.transition_matrix().pf_eigenvalue(1e-12).unwrap();
        for k in 8..11 {
            let a = leaf_segment(&f, 0, k).unwrap().path.len() as f64;
            let b = leaf_segment(&f, 0, k + 1).unwrap().path.len() as f64;
            assert!((b / a - lambda).abs() <= 0.1 * lambda, "{images:?} {k}");
        }
    }
}

#[test]
fn weak_convergence_matches_sliding_count() {
    let fib = rose_map(&["ab", "a"]);
    let images = letters(&endo(&["ab", "a"]));
    for r in 1..=3 {
        let cat = LeafCatalog::new(&fib, 6, 2 * r).unwrap();
        let oracle = word_catalog(&images, 6, 2 * r);
        for w in ["b", "a", "ab", "aab", "abaab", "abaababa", "aabb", "aBab"] {
            let word = endocert::words::Word::parse(w, 2).unwrap();
            let l = fib.domain().free_loop_of_word(&word).unwrap();
            let got = weak_convergence_fraction(&l, &cat, r).unwrap();
            assert_eq!(got, sliding_fraction(&read(&fib, &l), &oracle, r), "{w} r={r}");
        }
    }
    // The b-loop reads bb, which never occurs in a leaf.
    let b = fib.domain().free_loop_of_word(&endocert::words::Word::parse("b", 2).unwrap()).unwrap();
    assert_eq!(weak_convergence_fraction(&b, &LeafCatalog::new(&fib, 6, 2).unwrap(), 1).unwrap(), Ratio::from_integer(0));
    assert!(weak_convergence_fraction(&b, &LeafCatalog::new(&fib, 6, 3).unwrap(), 2).is_err());
}

#[test]
fn iterated_loops_converge_at_the_proven_rate() {
    let fib = rose_map(&["ab", "a"]);
    let images = letters(&endo(&["ab", "a"]));
    for start in [vec![1], vec![2], vec![1, 2], vec![1, 1, 2], vec![1, 2, 2]] {
        for big_l in 1..=4usize {
            let cat = LeafCatalog::new(&fib, 8, 2 * big_l).unwrap();
            let mut w = start.clone();
            for k in 0..=8usize {
                if k > 0 {
                    w = naive_apply(&images, &w);
                }
                let delta = (0..2).map(|e| leaf_segment(&fib, e, k).unwrap().path.len()).min().unwrap() as i64;
                let l = fib.domain().free_loop_of_word(&word(&w, 2)).unwrap();
                let got = weak_convergence_fraction(&l, &cat, big_l).unwrap();
                let bound = Ratio::new(delta - 2 * big_l as i64, delta);
                let got = Ratio::new(*got.numer() as i64, *got.denom() as i64);
                assert!(got >= bound, "{start:?} k={k} L={big_l}: {got} < {bound}");
            }
        }
    }
}

#[test]
fn quasi_periodicity_examples() {
    let f = rose_map(&["aa"]);
    let leaf = leaf_segment(&f, 0, 5).unwrap();
    assert_eq!(quasi_periodicity_probe(&leaf, 1, 8), Some(1));
    assert_eq!(quasi_periodicity_probe(&leaf, 40, 64), None);

    let fib = rose_map(&["ab", "a"]);
    let leaf = leaf_segment(&fib, 0, 14).unwrap();
    let w = read(&fib, &leaf.path);
    let got = quasi_periodicity_probe(&leaf, 2, 64).unwrap();
    // Oracle: every window of the returned size contains every length-2
    // subword, and one window a letter shorter does not.
    let subs: HashSet<&[i32]> = w.windows(2).collect();
    let covers = |m: usize| w.windows(m).all(|win| subs.iter().all(|s| win.windows(2).any(|x| x == *s)));
    assert!(covers(got));
    assert!(!covers(got - 1));
    // The Fibonacci word contains ababa, which misses aa.
    assert_eq!(got, 6);
}

#[test]
fn independence_examples() {
    let fib = rose_map(&["ab", "a"]);
    let fib2 = GraphMap::from_endomorphism(&endo(&["ab", "a"]).power(2).unwrap());
    for len in 1..=5 {
        assert!(matches!(independence_probe(&fib, &fib, len, 6).unwrap(), IndependenceVerdict::IndistinguishableAtScale { .. }));
        assert!(matches!(independence_probe(&fib, &fib2, len, 6).unwrap(), IndependenceVerdict::IndistinguishableAtScale { .. }));
    }
    let g = rose_map(&["ba", "a"]);
    let (fa, ga) = (letters(&endo(&["ab", "a"])), letters(&endo(&["ba", "a"])));
    for len in 1..=5 {
        let same = word_catalog(&fa, 6, len) == word_catalog(&ga, 6, len);
        let v = independence_probe(&fib, &g, len, 6).unwrap();
        assert_eq!(matches!(v, IndependenceVerdict::IndistinguishableAtScale { .. }), same, "{len}");
    }
}

#[test]
fn independence_is_symmetric_and_monotone() {
    let maps: Vec<GraphMap> = IMMERSIONS.iter().filter(|i| i.len() == 2 && i[0] != "aa").map(|i| rose_map(i)).collect();
    for f in &maps {
        for g in &maps {
            let mut distinct_before = false;
            for len in 1..=5 {
                let fg = independence_probe(f, g, len, 5).unwrap();
                let gf = independence_probe(g, f, len, 5).unwrap();
                let d = matches!(fg, IndependenceVerdict::DistinctAtScale { .. });
                assert_eq!(d, matches!(gf, IndependenceVerdict::DistinctAtScale { .. }));
                assert!(!distinct_before || d);
                distinct_before = d;
            }
        }
    }
}
