use msa::kripke::{random_system, ConcreteAlgebra, FrameConditions, Valuation};
use msa::prover::{
    bounded_countermodel_prop, extraction_fallbacks, ground_at, prove, GroundAtom, Logic,
    ProveResult, Sequent,
};
use msa::random::{random_term, TermShape};
use msa::syntax::{Signature, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(seed: u64, n: usize) -> Vec<Term> {
    let gens = vec!["p".to_string(), "q".to_string()];
    let shape = TermShape { depth: 5, quantified: false, sugar: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_term(&mut rng, &gens, &shape)).collect()
}

#[test]
fn prover_agrees_with_frame_oracle() {
    for (li, logic) in Logic::ALL.into_iter().enumerate() {
        for f in corpus(100 + li as u64, 300) {
            let res = prove(logic, &Sequent::goal(f.clone())).unwrap();
            let oracle = bounded_countermodel_prop(&f, logic, 4).unwrap();
            match (&res, &oracle) {
                (ProveResult::Provable(_), Some(m)) => {
                    panic!("{logic} proves {f} but oracle refutes it: {:?}", m.to_json())
                }
                (ProveResult::Refuted(m), _) => {
                    assert!(!m.value(&f).unwrap(), "{logic}: bad countermodel for {f}");
                    assert!(logic.conditions().admits(m.system.num_worlds(), &m.system.edges));
                }
                _ => {}
            }
        }
    }
    assert_eq!(extraction_fallbacks(), 0);
}

#[test]
fn k_theorems_hold_in_every_logic() {
    for f in corpus(7, 300) {
        if prove(Logic::K, &Sequent::goal(f.clone())).unwrap().is_provable() {
            for l in Logic::ALL {
                assert!(prove(l, &Sequent::goal(f.clone())).unwrap().is_provable(), "{l}: {f}");
            }
        }
    }
}

#[test]
fn grounding_matches_constant_domain_evaluation() {
    let sig = Signature::new().with("p", [0]).with("q", [0, 1]);
    let gens = vec!["p".to_string(), "q".to_string()];
    let shape = TermShape { depth: 4, max_index: 2, constants: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let t = random_term(&mut rng, &gens, &shape);
        let m = rng.gen_range(1..=2);
        let k0 = random_system(&mut rng, 3, 1, FrameConditions::default());
        let k = msa::kripke::KripkeSystem::constant(k0.num_worlds(), k0.edges.clone(), m);
        let alg = ConcreteAlgebra::new(&k, 2).unwrap();
        let mut val = Valuation::new();
        for g in &gens {
            val.insert(g.clone(), alg.random_restricted(&mut rng, sig.dims(g).unwrap()));
        }
        let e = alg.eval(&t, &val).unwrap();
        let domain = k.domain.clone();
        for (w, codes) in alg.space.valid.iter().enumerate() {
            for &c in codes {
                let x = alg.space.decode(c);
                let g = ground_at(&t, &x, &domain, &sig).unwrap();
                // induced propositional valuation
                let mut pv = Valuation::new();
                let prop = ConcreteAlgebra::new(&k, 0).unwrap();
                for a in g.generators() {
                    let atom = GroundAtom::parse(&a);
                    let dims = sig.dims(&atom.name).unwrap();
                    let el = prop.from_fn(|w2, _| {
                        let mut tuple = vec![0; 2];
                        for (&i, arg) in dims.iter().zip(&atom.args) {
                            tuple[i] = domain.iter().position(|d| d == arg).unwrap();
                        }
                        val[&atom.name].get(&alg.space, w2, &tuple)
                    });
                    pv.insert(a, el);
                }
                let ge = prop.eval(&g, &pv).unwrap();
                assert_eq!(ge.tables[w][0], e.tables[w][c], "{t} at w{w} {x:?}");
            }
        }
    }
}
