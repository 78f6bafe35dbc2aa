//! Acceptance run: one PASS or FAIL line per criterion, then a nonzero exit
//! status if anything failed.

mod common;

use std::time::{Duration, Instant};

use common::*;
use endocert::annuli::{
    audit_31_hyperbolicity, audit_words, build_annulus_at, flaring_audit_all, AnnulusWord, RingMode,
};
use endocert::certify::{certify, emit_report, CertificationConfig, ReportFormat, Verdict};
use endocert::disjointness::conjugate_intersection_rank;
use endocert::expansion::{expansion_power, ExpansionScope, ExpansionVerdict};
use endocert::graph::EdgePath;
use endocert::graphmap::{random_immersed_loop, GraphMap, TransitionMatrix};
use endocert::lamination::{leaf_segment, weak_convergence_fraction, LeafCatalog};
use endocert::pullback::gamma_filtration;
use endocert::stallings::{subgroup_graph, LabeledGraph};
use endocert::words::{conjugate_in_free_group, Word};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(t: Instant, limit: Duration, detail: String) -> Outcome {
    let el = t.elapsed();
    check(el < limit, format!("{detail}; {:.2}s of {}s", el.as_secs_f64(), limit.as_secs()))
}

fn rose_map(images: &[&str]) -> GraphMap {
    GraphMap::from_endomorphism(&endo(images))
}

fn powered(pair: &[&[&str]], n: usize) -> Vec<GraphMap> {
    pair.iter().map(|i| GraphMap::from_endomorphism(&endo(i).power(n).unwrap())).collect()
}

fn word_kernel() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..10_000 {
        let rank = rng.random_range(1..=4usize);
        let raw = random_raw(&mut rng, rank, 64);
        let w = Word::reduce(&raw, rank).unwrap();
        bad += usize::from(w.letters() != &naive_reduce(&raw)[..]);
        bad += usize::from(Word::reduce(w.letters(), rank).unwrap() != w);
        let cut = rng.random_range(0..=raw.len());
        let parts = Word::reduce(&raw[..cut], rank).unwrap().concat(&Word::reduce(&raw[cut..], rank).unwrap());
        bad += usize::from(parts != w);
        let (core, c) = w.cyclic_reduce();
        bad += usize::from(c.concat(&core).concat(&c.inverse()) != w || !core.is_cyclically_reduced());
        // Half related by conjugation, half unrelated.
        let other: Vec<i32> = if rng.random_bool(0.5) {
            let g = random_raw(&mut rng, rank, 6);
            concat(&[&g, w.letters(), &inverse(&g)])
        } else {
            random_raw(&mut rng, rank, 64)
        };
        let v = Word::reduce(&other, rank).unwrap();
        let brute = rotation_conjugate(w.letters(), v.letters());
        bad += usize::from(conjugate_in_free_group(&w, &v) != brute);
        bad += usize::from((w.canonical_cyclic() == v.canonical_cyclic()) != brute);
    }
    if bad > 0 {
        return Err(format!("{bad} disagreements"));
    }
    within(t, Duration::from_secs(10), "10000 sequences, 0 disagreements".into())
}

fn stallings_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let words = all_words(2, 8);
    let (mut bad, mut members, mut products_found) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let gens: Vec<Vec<i32>> = (0..n).map(|_| random_reduced(&mut rng, 2, 1, 5)).collect();
        let ws: Vec<Word> = gens.iter().map(|g| word(g, 2)).collect();
        let g = subgroup_graph(&ws, 2).unwrap();
        let products = product_closure(&gens, 6, 8);
        for w in &words {
            let folded = g.membership(&word(w, 2));
            let product = products.contains(w);
            members += usize::from(folded);
            products_found += usize::from(product);
            // Short products are members; the wedge oracle is complete.
            bad += usize::from((product && !folded) || folded != wedge_membership(&gens, w));
        }
    }
    if bad > 0 {
        return Err(format!("{bad} disagreements"));
    }
    within(
        t,
        Duration::from_secs(60),
        format!(
            "200 subgroups x {} words: {members} members, {products_found} of them <= 6-factor products, exact",
            words.len()
        ),
    )
}

fn fiber_product_ranks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let conjugators = all_words(2, 4);
    let mk = |rng: &mut ChaCha8Rng| -> (Vec<Vec<i32>>, LabeledGraph) {
        let n = rng.random_range(1..=3);
        let gens: Vec<Vec<i32>> = (0..n).map(|_| random_reduced(rng, 2, 1, 5)).collect();
        let ws: Vec<Word> = gens.iter().map(|g| word(g, 2)).collect();
        (gens.clone(), subgroup_graph(&ws, 2).unwrap())
    };
    let (mut bad, mut nonzero) = (Vec::new(), 0);
    for _ in 0..50 {
        let (hg, h) = mk(&mut rng);
        let (kg, k) = mk(&mut rng);
        for g in &conjugators {
            let got = conjugate_intersection_rank(&h, &k, &word(g, 2)).unwrap();
            let brute = intersection_rank_brute(&hg, &kg, g, got, 10, 16, 4);
            nonzero += usize::from(got > 0);
            if got != brute {
                bad.push(format!("{hg:?} {kg:?} g={g:?}: {got} vs {brute}"));
            }
        }
    }
    check(
        bad.is_empty(),
        format!("50 pairs x {} conjugators, {nonzero} nontrivial, {} mismatches {}", conjugators.len(), bad.len(),
            bad.first().cloned().unwrap_or_default()),
    )
}

fn filtration_laws() -> Outcome {
    let mut bad = Vec::new();
    for images in IMMERSIONS {
        match gamma_filtration(&rose_map(images), 8) {
            Ok((_, laws)) if laws.holds() => {}
            Ok((_, laws)) => bad.push(format!("{images:?}: {laws:?}")),
            Err(e) => bad.push(format!("{images:?}: {e}")),
        }
    }
    check(bad.is_empty(), format!("{} fixtures to depth 8 {}", IMMERSIONS.len(), bad.join("; ")))
}

fn bs_obstruction() -> Outcome {
    let t = Instant::now();
    let c = certify(&CertificationConfig::from_letters(&[&["aa"]]).unwrap()).map_err(|e| e.to_string())?;
    match &c.verdict {
        Verdict::ObstructionBs { witness } if witness.gamma == "a" && witness.d == 2 => within(
            t,
            Duration::from_secs(1),
            format!("obstruction_BS(a, {}) with k = {}", witness.d, witness.k),
        ),
        v => Err(format!("{v:?}")),
    }
}

fn expansion_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = Vec::new();
    let mut powers = Vec::new();
    for images in IMMERSIONS {
        let f = rose_map(images);
        let e = endo(images);
        let Some(n) = expansion_power(&f, 64).map_err(|e| e.to_string())?.power() else {
            bad.push(format!("{images:?}: no power"));
            continue;
        };
        powers.push(n);
        let imgs = letters(&e);
        for _ in 0..1000 {
            let l = random_immersed_loop(f.graph(), 30, &mut rng);
            let mut w = f.domain().read(&l).letters().to_vec();
            for _ in 0..n {
                w = naive_apply(&imgs, &w);
            }
            if naive_cyclic_core(&w).len() < 3 * l.len() {
                bad.push(format!("{images:?} N={n}: {}", f.domain().read(&l)));
            }
        }
    }
    // Oracle for a ↦ ab, b ↦ a: legal loops are the positive words, and
    // positive words never cancel.
    let fib = letters(&endo(&["ab", "a"]));
    let positive: Vec<Vec<i32>> = all_words(2, 8).into_iter().filter(|w| !w.is_empty() && w.iter().all(|&l| l > 0)).collect();
    let oracle = (1..)
        .find(|&n| {
            positive.iter().all(|w| {
                let mut v = w.clone();
                for _ in 0..n {
                    v = naive_apply(&fib, &v);
                }
                v.len() >= 3 * w.len()
            })
        })
        .unwrap();
    match expansion_power(&rose_map(&["ab", "a"]), 64).map_err(|e| e.to_string())? {
        ExpansionVerdict::Power { n, scope: ExpansionScope::LegalLoops, .. } if n == oracle && n == 3 => {}
        v => bad.push(format!("fibonacci: {v:?}, oracle {oracle}")),
    }
    check(
        bad.is_empty(),
        format!("powers {powers:?} on {} x 1000 loops; fibonacci N = {oracle} {}", IMMERSIONS.len(), bad.join("; ")),
    )
}

/// `(I + A)^{n-1}` has no zero entry; a 1 x 1 matrix needs a positive entry.
fn oracle_irreducible(a: &[Vec<u64>]) -> bool {
    let n = a.len();
    if n == 1 {
        return a[0][0] > 0;
    }
    let mut m: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| u64::from(i == j || a[i][j] > 0)).collect()).collect();
    let step = m.clone();
    for _ in 1..n - 1 {
        m = (0..n)
            .map(|i| (0..n).map(|j| u64::from((0..n).any(|k| m[i][k] > 0 && step[k][j] > 0))).collect())
            .collect();
    }
    m.iter().flatten().all(|&x| x > 0)
}

fn pf_eigenvalues() -> Outcome {
    let t = Instant::now();
    let (mut count, mut worst, mut bad) = (0usize, 0f64, Vec::new());
    for n in 1..=3usize {
        for code in 0..4usize.pow((n * n) as u32) {
            let rows: Vec<Vec<u64>> = (0..n)
                .map(|i| (0..n).map(|j| (code / 4usize.pow((i * n + j) as u32) % 4) as u64).collect())
                .collect();
            let a = TransitionMatrix::from_rows(rows.clone()).unwrap();
            let irr = oracle_irreducible(&rows);
            if a.is_irreducible() != irr {
                bad.push(format!("{rows:?}: irreducibility"));
                continue;
            }
            if !irr {
                continue;
            }
            count += 1;
            match a.pf_eigenvalue(1e-13) {
                Ok(l) => {
                    let err = (l - pf_by_bisection(&rows)).abs();
                    worst = worst.max(err);
                    if err > 1e-9 {
                        bad.push(format!("{rows:?}: off by {err:e}"));
                    }
                }
                Err(e) => bad.push(format!("{rows:?}: {e}")),
            }
        }
    }
    if !bad.is_empty() {
        return Err(format!("{} failures, first {}", bad.len(), bad[0]));
    }
    within(t, Duration::from_secs(30), format!("{count} irreducible matrices, max error {worst:.1e}"))
}

/// The certified pair at its certified power, with 200 sampled loops.
fn audit_setup() -> Result<(u64, Vec<GraphMap>, Vec<EdgePath>), String> {
    let c = certify(&CertificationConfig::from_letters(CERTIFIED_PAIR).unwrap()).map_err(|e| e.to_string())?;
    let Verdict::CertifiedHyperbolic { n } = c.verdict else {
        return Err(format!("fixture not certified: {:?}", c.verdict));
    };
    let maps = powered(CERTIFIED_PAIR, n as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let loops = (0..200).map(|_| random_immersed_loop(maps[0].graph(), 12, &mut rng)).collect();
    Ok((n, maps, loops))
}

/// Ring lengths of a length-2 audit word around `w`, by substitution:
/// negative letters map the anchor leftwards, positive ones rightwards.
fn oracle_rings(images: &[Vec<Vec<i32>>], word: &AnnulusWord, w: &[i32]) -> [usize; 3] {
    let l = word.letters();
    let app = |j: i32, v: &[i32]| naive_cyclic_core(&naive_apply(&images[j.unsigned_abs() as usize - 1], v));
    match (l[0] < 0, l[1] < 0) {
        (false, false) => {
            let r1 = app(l[0], w);
            let r2 = app(l[1], &r1);
            [w.len(), r1.len(), r2.len()]
        }
        (true, false) => [app(l[0], w).len(), w.len(), app(l[1], w).len()],
        (true, true) => {
            let r1 = app(l[1], w);
            [app(l[0], &r1).len(), r1.len(), w.len()]
        }
        (false, true) => unreachable!("not admissible"),
    }
}

fn hyperbolicity_audit() -> Outcome {
    let (n, maps, loops) = audit_setup()?;
    let audit = audit_31_hyperbolicity(&maps, &loops, RingMode::Free).map_err(|e| e.to_string())?;
    let images: Vec<Vec<Vec<i32>>> = CERTIFIED_PAIR.iter().map(|i| letters(&endo(i).power(n as usize).unwrap())).collect();
    let mut oracle_bad = 0;
    for w in audit_words(2) {
        for l in &loops {
            let r = oracle_rings(&images, &w, maps[0].domain().read(l).letters());
            oracle_bad += usize::from(3 * r[1] > r[0].max(r[2]));
        }
    }
    check(
        audit.violations.is_empty() && oracle_bad == 0 && audit.annuli == audit_words(2).len() * 200,
        format!(
            "N = {n}, {} words x 200 loops = {} annuli, {} violations, {oracle_bad} by substitution",
            audit.words.len(),
            audit.annuli,
            audit.violations.len()
        ),
    )
}

fn flaring_audit() -> Outcome {
    let (n, maps, loops) = audit_setup()?;
    let audit = flaring_audit_all(&maps, &loops, 4, RingMode::Free).map_err(|e| e.to_string())?;
    let images: Vec<Vec<Vec<i32>>> = CERTIFIED_PAIR.iter().map(|i| letters(&endo(i).power(n as usize).unwrap())).collect();
    let (mut applicable, mut oracle_bad) = (0, 0);
    for w in audit_words(2) {
        for l in &loops {
            let r = oracle_rings(&images, &w, maps[0].domain().read(l).letters());
            let end = if w.letters()[1] > 0 { r[2] } else { r[0] };
            for rho in 1..=4 {
                if r[1] > 2 * rho {
                    applicable += 1;
                    oracle_bad += usize::from(end < 2 * r[1]);
                }
            }
        }
    }
    check(
        audit.violations.is_empty() && oracle_bad == 0 && audit.flaring == applicable,
        format!(
            "rho <= 4: {} annuli, {} with girth > 2 rho, {} thin, {} violations, {oracle_bad} by substitution",
            audit.annuli,
            audit.flaring,
            audit.thin_girth,
            audit.violations.len()
        ),
    )
}

fn admissibility() -> Outcome {
    let (_, maps, _) = audit_setup()?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pool: Vec<AnnulusWord> = (1..=3).flat_map(|k| AnnulusWord::admissible_words(2, k)).collect();
    let mut bad = Vec::new();
    for _ in 0..500 {
        let w = &pool[rng.random_range(0..pool.len())];
        let l = random_immersed_loop(maps[0].graph(), 6, &mut rng);
        match build_annulus_at(&l, w.negative_block(), w, &maps, RingMode::Free) {
            Ok(a) => {
                let stored = a.word.letters();
                let naive = stored.windows(2).all(|p| p[0] != -p[1] && !(p[0] > 0 && p[1] < 0));
                if !a.word.is_admissible() || !naive || a.thinness != 1 || !a.verify(&maps).unwrap_or(false) {
                    bad.push(w.to_string());
                }
            }
            Err(e) => bad.push(format!("{w}: {e}")),
        }
    }
    let mut rejected = 0;
    for text in ["D1 D1^-1", "D1 D2^-1"] {
        let w = AnnulusWord::parse(text).unwrap();
        rejected += usize::from(!w.is_admissible() && w.classify().is_err());
    }
    let l = random_immersed_loop(maps[0].graph(), 6, &mut rng);
    rejected += usize::from(build_annulus_at(&l, 0, &AnnulusWord::parse("D1 D1^-1").unwrap(), &maps, RingMode::Free).is_err());
    check(
        bad.is_empty() && rejected == 3,
        format!("500 annuli, {} bad; counterexamples rejected {rejected}/3 {}", bad.len(), bad.join("; ")),
    )
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let config = CertificationConfig::from_letters(CERTIFIED_PAIR).unwrap();
    let a = emit_report(&certify(&config).map_err(|e| e.to_string())?, ReportFormat::Json);
    let b = emit_report(&certify(&config).map_err(|e| e.to_string())?, ReportFormat::Json);
    if a != b {
        return Err("reports differ".into());
    }
    within(t, Duration::from_secs(300), format!("two runs, {} identical bytes", a.len()))
}

fn lamination_bound() -> Outcome {
    let f = rose_map(&["ab", "a"]);
    let images = letters(&endo(&["ab", "a"]));
    let starts: Vec<Vec<i32>> = all_words(2, 5)
        .into_iter()
        .filter(|w| !w.is_empty() && w.iter().all(|&l| l > 0))
        .collect();
    let (mut checks, mut bad) = (0, Vec::new());
    for big_l in 1..=4usize {
        let cat = LeafCatalog::new(&f, 8, 2 * big_l).map_err(|e| e.to_string())?;
        for s in &starts {
            let mut w = s.clone();
            for k in 0..=8usize {
                if k > 0 {
                    w = naive_apply(&images, &w);
                }
                let delta = (0..2).map(|e| leaf_segment(&f, e, k).unwrap().path.len()).min().unwrap() as i64;
                let l = f.domain().free_loop_of_word(&word(&w, 2)).map_err(|e| e.to_string())?;
                let got = weak_convergence_fraction(&l, &cat, big_l).map_err(|e| e.to_string())?;
                let got = Ratio::new(*got.numer() as i64, *got.denom() as i64);
                let bound = Ratio::new(delta - 2 * big_l as i64, delta);
                checks += 1;
                if got < bound {
                    bad.push(format!("{s:?} k={k} L={big_l}: {got} < {bound}"));
                }
            }
        }
    }
    check(bad.is_empty(), format!("{checks} checks over k <= 8, L <= 4, {} violations {}", bad.len(), bad.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("word kernel", word_kernel),
        ("stallings oracle", stallings_oracle),
        ("fiber product ranks", fiber_product_ranks),
        ("pullback filtration laws", filtration_laws),
        ("BS obstruction", bs_obstruction),
        ("expansion certificate", expansion_certificate),
        ("PF eigenvalue", pf_eigenvalues),
        ("(3,1) hyperbolicity audit", hyperbolicity_audit),
        ("flaring audit", flaring_audit),
        ("admissibility", admissibility),
        ("end-to-end determinism", determinism),
        ("lamination weak convergence", lamination_bound),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
