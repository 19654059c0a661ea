use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use soseq::lifting::{equalizer_to_u, qvec, qvec_matrix, rank1_approx, svec, svec_inv, LiftedIndexMap};
use soseq::signal_model::C64;

fn symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    &a + a.transpose()
}

proptest! {
    #[test]
    fn svec_roundtrip(n in 1usize..7, entries in prop::collection::vec(-10.0f64..10.0, 36)) {
        let m = symmetric(n, &entries);
        let back = svec_inv(&svec(&m).unwrap()).unwrap();
        prop_assert!((back - &m).amax() <= 1e-12 * (1.0 + m.amax()));
    }

    #[test]
    fn qvec_svec_duality(n in 1usize..7, entries in prop::collection::vec(-10.0f64..10.0, 36), u in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = symmetric(n, &entries);
        let u = &u[..n];
        let uv = DVector::from_column_slice(u);
        let direct = uv.dot(&(&m * &uv));
        let lifted = qvec(u).dot(&svec(&m).unwrap());
        prop_assert!((direct - lifted).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn index_map_is_a_bijection(n in 1usize..12) {
        let map = LiftedIndexMap::new(n);
        prop_assert_eq!(map.dim(), n * (n + 1) / 2);
        for c in 0..map.dim() {
            let (i, j) = map.pair_of(c);
            prop_assert!(i <= j && j < n);
            prop_assert_eq!(map.index_of(i, j), c);
            prop_assert_eq!(map.index_of(j, i), c);
        }
    }

    #[test]
    fn rank1_recovers_lifted_vector(u in prop::collection::vec(-3.0f64..3.0, 1..7)) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3));
        let v = qvec(&u);
        let (r, lambda) = rank1_approx(&v).unwrap();
        let norm2: f64 = u.iter().map(|x| x * x).sum();
        prop_assert!((lambda - norm2).abs() <= 1e-9 * (1.0 + norm2));
        let same = u.iter().zip(r.iter()).all(|(a, b)| (a - b).abs() <= 1e-6 * (1.0 + norm2));
        let flipped = u.iter().zip(r.iter()).all(|(a, b)| (a + b).abs() <= 1e-6 * (1.0 + norm2));
        prop_assert!(same || flipped);
    }

    #[test]
    fn qvec_matrix_is_outer_product(u in prop::collection::vec(-3.0f64..3.0, 1..7)) {
        let m = qvec_matrix(&qvec(&u)).unwrap();
        let uv = DVector::from_column_slice(&u);
        prop_assert!((m - &uv * uv.transpose()).amax() <= 1e-12 * (1.0 + uv.norm_squared()));
    }

    #[test]
    fn equalizer_split_layout(re in prop::collection::vec(-2.0f64..2.0, 1..5), im in prop::collection::vec(-2.0f64..2.0, 5)) {
        let w: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        let u = equalizer_to_u(&w);
        prop_assert_eq!(u.len(), 2 * w.len());
        for (k, z) in w.iter().enumerate() {
            prop_assert_eq!(u[k], z.re);
            prop_assert_eq!(u[w.len() + k], z.im);
        }
    }
}
