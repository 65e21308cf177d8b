use instab::imtx;
use instability_core::linalg::Matrix;
use instability_core::representation::{
    cca_distance, center, cka_distance, op_distance, svcca_distance, DEFAULT_SVCCA_THRESHOLD,
};
use instability_core::{Precision, TensorMatrix};
use proptest::prelude::*;

fn matrix_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (3usize..20, 1usize..8).prop_flat_map(|(n, e)| {
        let cells = prop::collection::vec(-5.0f64..5.0, n * e);
        (cells.clone(), cells).prop_map(move |(a, b)| (Matrix::new(n, e, a).unwrap(), Matrix::new(n, e, b).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric_and_bounded((x, y) in matrix_pair()) {
        let (Ok(cx), Ok(cy)) = (center(&x), center(&y)) else { return Ok(()) };
        let pairs = [
            (op_distance(&cx, &cy), op_distance(&cy, &cx)),
            (cka_distance(&cx, &cy), cka_distance(&cy, &cx)),
            (cca_distance(&cx, &cy), cca_distance(&cy, &cx)),
            (
                svcca_distance(&cx, &cy, DEFAULT_SVCCA_THRESHOLD),
                svcca_distance(&cy, &cx, DEFAULT_SVCCA_THRESHOLD),
            ),
        ];
        for (a, b) in pairs {
            // constant columns make a side degenerate; both orders must agree on that
            prop_assert_eq!(a.is_ok(), b.is_ok());
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
                prop_assert!((-1e-10..=1.0 + 1e-10).contains(&a), "{}", a);
            }
        }
    }

    #[test]
    fn op_and_cka_ignore_isotropic_scaling((x, y) in matrix_pair(), a in 0.01f64..100.0) {
        let (Ok(cx), Ok(cy), Ok(sx)) = (center(&x), center(&y), center(&x.scaled(a))) else { return Ok(()) };
        if let (Ok(base), Ok(scaled)) = (op_distance(&cx, &cy), op_distance(&sx, &cy)) {
            prop_assert!((base - scaled).abs() <= 1e-9);
        }
        if let (Ok(base), Ok(scaled)) = (cka_distance(&cx, &cy), cka_distance(&sx, &cy)) {
            prop_assert!((base - scaled).abs() <= 1e-9);
        }
    }

    #[test]
    fn imtx_round_trips(rows in 1usize..12, cols in 1usize..12, wide in any::<bool>(), seed in any::<u64>()) {
        let precision = if wide { Precision::F64 } else { Precision::F32 };
        let values: Vec<f64> = (0..rows * cols)
            .map(|i| {
                let v = ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
                if wide { v } else { v as f32 as f64 }
            })
            .collect();
        let m = TensorMatrix::new(rows, cols, values, precision).unwrap();
        let bytes = imtx::encode(&m);
        let elem = if wide { 8 } else { 4 };
        prop_assert_eq!(bytes.len(), 24 + rows * cols * elem);
        let back = imtx::decode(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(imtx::encode(&back), bytes);
    }

    #[test]
    fn imtx_rejects_truncation(cut in 0usize..40) {
        let m = TensorMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], Precision::F32).unwrap();
        let bytes = imtx::encode(&m);
        prop_assume!(cut < bytes.len());
        prop_assert!(imtx::decode(&bytes[..cut]).is_err());
    }
}
