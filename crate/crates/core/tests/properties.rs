//! Randomized invariants of the linear-algebra and sketching kernels.

use lowrank_core::linalg::{
    gaussian_matrix, msgn_exact, newton_schulz, nuclear_norm, qr_thin, singular_values, Matrix, PolarConfig,
};
use lowrank_core::optimizers::{ScheduleKind, ScheduleParams};
use lowrank_core::orthogonalize::{column_probabilities, sketch_sign, SketchSpec};
use lowrank_core::problems::container;
use lowrank_core::seeded_rng;
use proptest::prelude::*;

fn orthonormality_error(q: &Matrix) -> f64 {
    (q.tr_mul(q) - Matrix::identity(q.ncols(), q.ncols())).norm()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn msgn_is_a_partial_isometry(rows in 1usize..25, cols in 1usize..25, seed in any::<u64>()) {
        let m = gaussian_matrix(rows, cols, &mut seeded_rng(seed));
        let s = msgn_exact(&m).unwrap();
        for sv in singular_values(&s) {
            prop_assert!((sv - 1.0).abs() < 1e-10);
        }
        // <msgn(M), M> = ||M||_*.
        let nuc = nuclear_norm(&m);
        prop_assert!((s.dot(&m) - nuc).abs() <= 1e-10 * nuc);
    }

    #[test]
    fn msgn_is_scale_invariant(n in 2usize..15, scale in 1e-3f64..1e3, seed in any::<u64>()) {
        let m = gaussian_matrix(n, n + 3, &mut seeded_rng(seed));
        let a = msgn_exact(&m).unwrap();
        let b = msgn_exact(&(&m * scale)).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn qr_is_orthonormal_and_spans(rows in 1usize..30, cols_frac in 0.0f64..1.0, rank in 1usize..8, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let cols = 1 + (cols_frac * rows as f64) as usize % rows;
        let k = rank.min(rows).min(cols);
        let m = gaussian_matrix(rows, k, &mut rng) * gaussian_matrix(k, cols, &mut rng);
        let qr = qr_thin(&m).unwrap();
        prop_assert_eq!(qr.q.ncols(), k);
        prop_assert!(orthonormality_error(&qr.q) < 1e-10);
        let projected = &qr.q * qr.q.tr_mul(&m);
        prop_assert!((projected - &m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn newton_schulz_approaches_the_sign(n in 2usize..12, seed in any::<u64>()) {
        let m = gaussian_matrix(n, n, &mut seeded_rng(seed));
        let ns = newton_schulz(&m, &PolarConfig::newton_schulz(60)).unwrap();
        let svs = singular_values(&ns);
        // Near-zero singular values of M converge slowly; all iterates stay in [0, 1].
        prop_assert!(svs.iter().all(|&s| s <= 1.0 + 1e-9));
        let exact = msgn_exact(&m).unwrap();
        let top = singular_values(&m)[0];
        let well_conditioned = singular_values(&m).iter().all(|&s| s > 0.2 * top);
        if well_conditioned {
            prop_assert!((ns - exact).norm() < 1e-6);
        }
    }

    #[test]
    fn sketches_recover_low_rank_signs(rank in 1usize..6, extra in 0usize..4, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let m = gaussian_matrix(20, rank, &mut rng) * gaussian_matrix(rank, 18, &mut rng);
        let exact = msgn_exact(&m).unwrap();
        for spec in [SketchSpec::gaussian(rank + extra), SketchSpec::power(rank + extra, 1)] {
            let sign = sketch_sign(&m, &spec, &mut rng).unwrap();
            prop_assert!(orthonormality_error(&sign.q) < 1e-10);
            prop_assert!((sign.materialize() - &exact).norm() < 1e-8);
        }
    }

    #[test]
    fn column_probabilities_sum_to_one(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let m = gaussian_matrix(rows, cols, &mut seeded_rng(seed));
        let p = column_probabilities(&m).unwrap();
        prop_assert_eq!(p.len(), cols);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schedules_are_in_unit_interval(alpha in 1.01f64..=2.0, k in 0usize..1_000_000) {
        for params in [
            ScheduleParams::muon(alpha).unwrap(),
            ScheduleParams::gd(ScheduleKind::SafeguardedGd),
        ] {
            let (now, next) = (params.at(k), params.at(k + 1));
            prop_assert!(now.eta > 0.0 && now.eta <= 1.0);
            prop_assert!(next.eta <= now.eta);
            prop_assert!(next.delta.unwrap() <= now.delta.unwrap());
        }
    }

    #[test]
    fn container_roundtrips(shapes in proptest::collection::vec((0usize..6, 0usize..6), 0..4), seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let mats: Vec<Matrix> = shapes.iter().map(|&(r, c)| gaussian_matrix(r, c, &mut rng)).collect();
        let names: Vec<String> = (0..mats.len()).map(|i| format!("m{i}")).collect();
        let entries: Vec<(&str, &Matrix)> = names.iter().map(String::as_str).zip(&mats).collect();
        let mut buf = Vec::new();
        container::write(&mut buf, &entries).unwrap();
        let back = container::read(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), mats.len());
        for ((name, m), (n0, m0)) in back.iter().zip(&entries) {
            prop_assert_eq!(name.as_str(), *n0);
            prop_assert_eq!(m, *m0);
        }
    }
}
