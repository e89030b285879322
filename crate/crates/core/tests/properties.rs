use proptest::prelude::*;
use resilience_core::snapshot::GridSnapshot;
use resilience_core::stencil::{lax_wendroff_steps, sum, sum_abs};
use resilience_core::{make_backup_lists, majority_vote, ChecksumWeights, FaultContext, FaultSpec, Value, Wire};

proptest! {
    #[test]
    fn weights_predict_the_output_sum(
        ext in proptest::collection::vec(-10.0f64..10.0, 12..80),
        steps in 0usize..5,
        courant in 0.05f64..1.0,
    ) {
        let out_len = ext.len() - 2 * steps;
        let w = ChecksumWeights::new(out_len, steps, courant);
        let actual = sum(&lax_wendroff_steps(&ext, steps, courant));
        prop_assert!((actual - w.dot(&ext)).abs() <= 1e-12 * sum_abs(&ext).max(1.0));
    }

    #[test]
    fn snapshot_round_trip(sub in 1u64..6, pts in 1u64..9, it in any::<u64>(), seed in any::<u64>()) {
        let values: Vec<f64> = (0..sub * pts).map(|i| f64::from_bits(seed.rotate_left(i as u32) | 1)).collect();
        let s = GridSnapshot { subdomains: sub, points: pts, iteration: it, values };
        let back = GridSnapshot::decode(&s.encode()).unwrap();
        prop_assert_eq!(back.iteration, it);
        prop_assert!(back.values.iter().zip(&s.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn fault_draws_are_pure(seed in any::<u64>(), loc in 0u32..16, id in any::<u64>(), attempt in 1u32..5) {
        let f = FaultSpec::new(0.3).unwrap().with_seed(seed);
        let ctx = FaultContext::new(loc, id, attempt);
        prop_assert_eq!(f.uniform(ctx).to_bits(), f.clone().uniform(ctx).to_bits());
        prop_assert!((0.0..1.0).contains(&f.uniform(ctx)));
    }

    #[test]
    fn backup_lists_avoid_the_source(k in 2u32..33, m in 0usize..33) {
        let m = m.min(k as usize);
        for s in 0..k {
            let l = make_backup_lists(s, k, m);
            prop_assert_eq!(l.len(), m);
            prop_assert!(l.iter().all(|&r| r != s && r < k));
        }
    }

    #[test]
    fn typed_wire_round_trip(a in any::<i64>(), b in proptest::collection::vec(any::<f64>(), 0..20), c in any::<bool>()) {
        let v = (a, b.clone(), c);
        let back = <(i64, Vec<f64>, bool)>::from_value(v.to_value()).unwrap();
        prop_assert_eq!(back.0, a);
        prop_assert_eq!(back.2, c);
        prop_assert!(back.1.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(Value::decode(&v.to_value().encode()).unwrap().bitwise_eq(&v.to_value()));
    }
}

#[test]
fn faulty_locality_is_ten_times_as_likely() {
    let f = FaultSpec::new(0.05).unwrap().with_faulty_localities([2]).with_seed(1);
    let hits = |loc| (0..100_000u64).filter(|&i| f.sample_failure(FaultContext::new(loc, i, 1))).count() as f64 / 1e5;
    assert!((hits(0) - 0.05).abs() < 0.005);
    assert!((hits(2) - 0.5).abs() < 0.01);
}

#[test]
fn vote_prefers_the_majority() {
    assert_eq!(majority_vote(vec![7, 3, 7]), 7);
    assert_eq!(majority_vote(vec![1, 2, 3]), 1);
}
