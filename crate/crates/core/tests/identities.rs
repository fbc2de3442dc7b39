use msa::random::{default_signature, random_term, TermShape};
use msa::rewrite::{check_identity, eq_at_bound, identity_names, normalize, Bounds, AX1_AS_PRINTED};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn catalogue_passes_at_default_bounds() {
    let b = Bounds::default();
    for id in identity_names() {
        let r = check_identity(id, 200, &b).unwrap();
        if id == AX1_AS_PRINTED {
            assert!(!r.passed(), "{id} should fail");
        } else {
            assert!(r.passed(), "{id}: {:?}", r.counterexample);
            assert_eq!(r.checked, 200, "{id} skipped {}", r.skipped);
        }
    }
}

#[test]
fn normalization_sound_on_500_terms() {
    let sig = default_signature(3);
    let gens: Vec<String> = sig.names().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let shape = TermShape::default();
    for _ in 0..500 {
        let t = random_term(&mut rng, &gens, &shape);
        let nt = normalize(&t, &sig).unwrap();
        assert_eq!(normalize(&nt, &sig).unwrap(), nt, "not idempotent on {t}");
        let out = eq_at_bound(&t, &nt, &sig, &Bounds::default()).unwrap();
        assert!(out.equal, "{t} normalized to {nt}: {:?}", out.witness);
    }
}
