mod support;

use std::time::Instant;

use support::gradcheck::{gru_instance, logistic_instance};

#[test]
fn logistic_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let err = logistic_instance(seed);
        assert!(err < 1e-6, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn gru_gradient_matches_finite_differences() {
    let started = Instant::now();
    let shapes = [(1, 1, 1), (2, 3, 4), (4, 4, 6), (3, 2, 5), (4, 1, 2), (1, 4, 6)];
    for seed in 0..6 {
        for &(d_emb, d_hid, len) in &shapes {
            let err = gru_instance(seed, d_emb, d_hid, len);
            assert!(err < 1e-4, "seed {seed}, E={d_emb} H={d_hid} T={len}: relative error {err:e}");
        }
    }
    assert!(started.elapsed().as_secs() < 60);
}
