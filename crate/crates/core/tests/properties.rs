use std::path::Path;

use gllod::fem::{ComplexField, VectorField, VectorSpace};
use gllod::io::{decode, encode_scalar, encode_vector, read_csv, write_csv, ErrorRow, Field};
use gllod::lab::{compute_errors, fit_rate, Reference};
use gllod::flow::{FlowConfig, USpace};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_is_exact_on_power_laws(rate in -1.0f64..7.0, c in 1e-6f64..1e3, n in 2usize..7) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let h = 0.5f64.powi(i as i32 + 1);
            (h, c * h.powf(rate))
        }).collect();
        prop_assert!((fit_rate(&pts).unwrap() - rate).abs() < 1e-9);
    }

    #[test]
    fn scalar_files_roundtrip(level in 1u32..4, seed in any::<u64>()) {
        let mut u = ComplexField::zeros(level).unwrap();
        let mut s = seed;
        for v in &mut u.values {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let re = f64::from_bits(s >> 2);
            *v = Complex64::new(if re.is_finite() { re } else { 0.5 }, -((s >> 11) as f64));
        }
        let bytes = encode_scalar(&u).unwrap();
        prop_assert_eq!(decode(&bytes, Path::new("p")).unwrap(), Field::Scalar(u));
    }

    #[test]
    fn vector_files_roundtrip(level in 1u32..4, degree in 1u8..3, scale in -1e3f64..1e3) {
        let space = VectorSpace::new(level, degree).unwrap();
        let free: Vec<f64> = (0..space.dim()).map(|i| scale * (i as f64).sin()).collect();
        let a = VectorField::from_free(&space, &free);
        let bytes = encode_vector(&a).unwrap();
        prop_assert_eq!(decode(&bytes, Path::new("p")).unwrap(), Field::Vector(a));
    }

    #[test]
    fn csv_roundtrip(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 8), level in any::<u32>()) {
        let row = ErrorRow {
            kappa: vals[0], level, mesh_size: vals[1], err_l2_u: vals[2], err_h1k_u: vals[3],
            err_l2_a: vals[4], err_h1_a: vals[5], err_energy: vals[6],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let back = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, vec![row]);
    }

    #[test]
    fn errors_ignore_global_phase(omega in -3.2f64..3.2) {
        let u = ComplexField::interpolate(3, |x| Complex64::new(1.0 + x[0], x[1] - 0.3)).unwrap();
        let a = VectorField::zeros(3, 1).unwrap();
        let r = Reference {
            kappa: 5.0,
            config: FlowConfig::new(USpace::P1 { level: 3 }, 3, 1),
            u: u.clone(),
            a: a.clone(),
            energy_gl: 0.0,
            steps: 0,
            hash: 0,
        };
        let e = compute_errors(&u.scaled(Complex64::from_polar(1.0, omega)), &a, 0.0, &r).unwrap();
        prop_assert!(e.l2_u <= 1e-12 && e.h1k_u <= 1e-12);
    }
}
