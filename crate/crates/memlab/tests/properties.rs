use memlab::cli::table::fmt_f64;
use memlab::expsum::{grad, loss, ExpSumModel};
use memlab::kernels::MemoryKernel;
use memlab::landscape::{stirling2, surjections};
use proptest::prelude::*;

fn terms(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|k| (prop::collection::vec(-2.0..2.0f64, k), prop::collection::vec(0.1..6.0f64, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_is_nonnegative_and_order_free((a, w) in terms(5), (ta, tw) in terms(4)) {
        let target = MemoryKernel::expsum(ta, tw).unwrap();
        let m = ExpSumModel::new(a.clone(), w.clone()).unwrap();
        let l = loss(&m, &target).unwrap();
        let scale = a.iter().zip(&w).map(|(x, r)| x * x / r).sum::<f64>() + target.l2_norm_sq().unwrap();
        prop_assert!(l >= -1e-12 * scale);
        let rev = ExpSumModel::new(a.into_iter().rev().collect(), w.into_iter().rev().collect()).unwrap();
        prop_assert!((loss(&rev, &target).unwrap() - l).abs() <= 1e-12 * scale);
    }

    #[test]
    fn exact_fit_is_stationary((a, w) in terms(4)) {
        let target = MemoryKernel::expsum(a.clone(), w.clone()).unwrap();
        let m = ExpSumModel::new(a, w).unwrap();
        let scale = target.l2_norm_sq().unwrap().max(1.0);
        prop_assert!(loss(&m, &target).unwrap().abs() <= 1e-12 * scale);
        prop_assert!(grad(&m, &target).unwrap().iter().all(|g| g.abs() <= 1e-8 * scale));
    }

    #[test]
    fn surjection_count_is_factorial_times_stirling(m in 1usize..=7, d in 1usize..=7) {
        prop_assume!(d <= m);
        let fact: u64 = (1..=d as u64).product();
        prop_assert_eq!(surjections(m, d).len() as u64, fact * stirling2(m, d).unwrap());
    }

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}
