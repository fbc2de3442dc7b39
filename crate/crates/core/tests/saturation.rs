use std::collections::BTreeSet;

use msa::prover::{consequence, Logic};
use msa::random::{random_term, TermShape};
use msa::saturate::{build_countermodel, check_saturated, separable, witnesses_fresh, SaturationConfig};
use msa::syntax::{IndexSupply, Signature, Term};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape(quantified: bool) -> TermShape {
    TermShape { depth: 3, max_index: 1, modal: true, quantified, constants: false, sugar: true }
}

/// Random non-derivable pairs `A ⊬ B` with overlapping vocabularies.
fn pairs(logic: Logic, n: usize, seed: u64, quantified: bool) -> Vec<(Term, Term)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = vec!["p".to_string(), "q".to_string()];
    let right = vec!["q".to_string(), "r".to_string()];
    let mut out = Vec::new();
    while out.len() < n {
        let a = random_term(&mut rng, &left, &shape(quantified));
        let b = random_term(&mut rng, &right, &shape(quantified));
        if a.generators().is_empty() || b.generators().is_empty() {
            continue;
        }
        let sig = Signature::new().with("p", [0]).with("q", [0]).with("r", []);
        if !consequence(std::slice::from_ref(&a), std::slice::from_ref(&b), logic, 2, 1, &sig).unwrap().holds {
            out.push((a, b));
        }
    }
    out
}

#[test]
fn pipeline_builds_countermodels_for_random_pairs() {
    let sig = Signature::new().with("p", []).with("q", []).with("r", []);
    let mut failures = Vec::new();
    let mut total = 0;
    for logic in Logic::ALL {
        let cfg = SaturationConfig { logic, steps: 10, ..Default::default() };
        for (i, (a, b)) in pairs(logic, 25, 77 + logic as u64, false).into_iter().enumerate() {
            total += 1;
            let x1: BTreeSet<String> = a.generators();
            let x2: BTreeSet<String> = b.generators();
            let mut supply = IndexSupply::new(0);
            let m = build_countermodel(std::slice::from_ref(&a), std::slice::from_ref(&b), &x1, &x2, &cfg, &mut supply, &sig).unwrap();
            if !m.report.passed() {
                failures.push(format!("{logic} #{i}: {a} / {b}: {:?}", m.report));
                continue;
            }
            for w in &m.worlds {
                assert!(witnesses_fresh(&w.pair, &sig).unwrap());
            }
            for &(u, v) in &m.system.edges {
                assert!(m.worlds[u].pair.dilation_level <= m.worlds[v].pair.dilation_level);
            }
            let root = &m.worlds[0].pair;
            let common: BTreeSet<String> = x1.intersection(&x2).cloned().collect();
            for (t, f) in root.prefixes() {
                assert!(separable(&t, &f, &common, &cfg, &sig).unwrap().is_none(), "{logic}: trace step separable");
            }
            let rep = check_saturated(root, &root.universe(), &x1, &x2, &cfg, &sig).unwrap();
            assert!(rep.condition(2).unwrap().passed);
        }
    }
    assert!(failures.is_empty(), "{} of {total} failed:\n{}", failures.len(), failures.join("\n"));
}

#[test]
fn pipeline_handles_quantified_pairs() {
    let sig = Signature::new().with("p", [0]).with("q", [0]).with("r", []);
    let mut failures = Vec::new();
    let mut total = 0;
    for logic in Logic::ALL {
        let cfg = SaturationConfig { logic, steps: 4, ..Default::default() };
        for (a, b) in pairs(logic, 15, 1234 + logic as u64, true) {
            total += 1;
            let x1 = a.generators();
            let x2 = b.generators();
            let mut supply = IndexSupply::new(0);
            let m = build_countermodel(std::slice::from_ref(&a), std::slice::from_ref(&b), &x1, &x2, &cfg, &mut supply, &sig).unwrap();
            if !m.report.passed() {
                failures.push(format!("{logic}: {a} / {b}: {:?}", m.report));
            }
            for w in &m.worlds {
                assert!(witnesses_fresh(&w.pair, &sig).unwrap());
            }
        }
    }
    eprintln!("quantified pipeline: {} of {total} reports pass", total - failures.len());
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
