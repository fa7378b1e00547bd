mod common {
    pub mod gradsuite;
}

use common::gradsuite::{model_check, op_checks, SEEDS, TOLERANCE};

#[test]
fn every_op_matches_central_differences() {
    for seed in SEEDS {
        for (name, r) in op_checks(seed).unwrap() {
            assert!(r.checked > 0, "{name}");
            assert!(r.max_rel_error <= TOLERANCE, "{name} seed {seed}: {r:?}");
        }
    }
}

#[test]
fn tiny_cg3d_matches_central_differences() {
    for seed in SEEDS {
        let r = model_check(seed).unwrap();
        assert!(r.checked > 50);
        assert!(r.max_rel_error <= TOLERANCE, "seed {seed}: {r:?}");
    }
}
