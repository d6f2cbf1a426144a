use proptest::prelude::*;
use qworklab::models::{random_hermitian, random_process};
use qworklab::operator::{diagonalize, max_abs_diff, CMatrix};
use qworklab::quasi::{cumulants, cumulants_from_moments, WorkQuasiDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn propagators_are_unitary(seed in any::<u64>(), dim in 2usize..9, t in -5.0f64..5.0) {
        let h = random_hermitian(dim, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let u = diagonalize(&h).unitary(t);
        let gram = u.adjoint() * &u;
        prop_assert!(max_abs_diff(&gram, &CMatrix::identity(dim, dim)) < 1e-12);
    }

    #[test]
    fn pq_is_normalized_and_symmetric_in_q(seed in any::<u64>(), n in 1usize..4, q in 0.0f64..1.0) {
        let p = random_process(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = p.pq(q).unwrap();
        let b = p.pq(1.0 - q).unwrap();
        prop_assert!((a.total_weight() - 1.0).abs() < 1e-12);
        prop_assert!(a.max_deviation(&b, 1e-8) < 1e-10);
        prop_assert!(a.negativity() >= 1.0 - 1e-12);
    }

    #[test]
    fn first_two_moments_do_not_depend_on_q(seed in any::<u64>(), n in 1usize..4, q in 0.0f64..1.0) {
        let p = random_process(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = p.pq(q).unwrap();
        let b = p.pq(0.0).unwrap();
        prop_assert!((a.mean() - b.mean()).abs() < 1e-9);
        prop_assert!((a.moment(2) - b.moment(2)).abs() < 1e-9);
    }

    #[test]
    fn distributions_survive_csv(seed in any::<u64>(), q in 0.0f64..1.0) {
        let p = random_process(2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let d = p.pq(q).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = WorkQuasiDistribution::read_csv(buf.as_slice(), d.merge_tol()).unwrap();
        prop_assert_eq!(back.len(), d.len());
        prop_assert!(back.max_deviation(&d, 0.0) < 1e-15);
    }

    #[test]
    fn cumulant_routes_agree(seed in any::<u64>(), q in 0.0f64..1.0) {
        let p = random_process(2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let d = p.pq(q).unwrap();
        let raw: Vec<f64> = (0..=4).map(|k| d.moment(k)).collect();
        let a = cumulants_from_moments(&raw);
        let b = cumulants(&d, 4);
        for k in 1..=4 {
            prop_assert!((a.get(k) - b.get(k)).abs() < 1e-8 * (1.0 + b.get(k).abs()));
        }
    }
}
