use cvgpr::algorithm::encoding::{build_joint_input, encode_vector};
use cvgpr::algorithm::pipeline::{apply_direct_unitary, readout_calibration, readout_expectation, select_parameters};
use cvgpr::dilation::{embed_khat, hermitian_dilation, OneSparseDecomposition, DEFAULT_QUANTIZATION_CAP};
use cvgpr::gpr::{build_covariance_system, kernel_eval, KernelSpec, NoiseModel, TrainingSet};
use cvgpr::hybrid::{GaussianPair, HomodyneWindow};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.2
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_symmetric_and_gram_is_psd(
        xs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..6),
        ell in 0.2f64..3.0,
        amp in 0.1f64..3.0,
    ) {
        let kernel = KernelSpec::squared_exponential(ell, amp);
        for a in &xs {
            for b in &xs {
                prop_assert_eq!(kernel_eval(&kernel, a, b).unwrap(), kernel_eval(&kernel, b, a).unwrap());
            }
        }
        let ys = vec![0.0; xs.len()];
        let data = TrainingSet::new(xs, ys).unwrap();
        let sys = build_covariance_system(&data, &kernel, &NoiseModel::new(0.0).unwrap(), &[0.0, 0.0]).unwrap();
        let min = sys.k.symmetric_eigenvalues().min();
        prop_assert!(min > -1e-10 * amp);
    }

    #[test]
    fn khat_spectrum_is_that_of_k_plus_ones(k in (1usize..5).prop_flat_map(spd)) {
        let khat = embed_khat(&k).unwrap();
        let mut a: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
        a.extend(std::iter::repeat_n(1.0, khat.dim() - k.nrows()));
        let mut b = khat.eigenvalues();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn decomposition_sums_exactly(k in (1usize..5).prop_flat_map(spd), zeta in 0.02f64..0.5) {
        let khat = embed_khat(&k).unwrap();
        let dec = OneSparseDecomposition::from_khat(&khat, zeta, DEFAULT_QUANTIZATION_CAP).unwrap();
        prop_assert!(dec.reconstruction_residual().is_empty());
        prop_assert!(dec.max_quantization_error(&hermitian_dilation(&khat)) <= 2.0 * zeta + 1e-12);
        for t in &dec.terms {
            prop_assert!(t.validate().is_ok());
        }
        let dz = dec.dequantized_khat();
        prop_assert!((dz.matrix() - khat.matrix()).abs().max() <= 2.0 * zeta + 1e-12);
    }

    #[test]
    fn overlap_is_hermitian_and_bounded(xi in 0.05f64..2.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let ga = GaussianPair::with_shear(xi, a).unwrap();
        let gb = GaussianPair::with_shear(xi, b).unwrap();
        let ab = GaussianPair::overlap(&ga, &gb);
        let ba = GaussianPair::overlap(&gb, &ga);
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        prop_assert!(ab.norm() <= 1.0 + 1e-12);
        prop_assert!((GaussianPair::overlap(&ga, &ga).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_evolution_is_unitary_and_window_probability_is_a_probability(
        y in prop::collection::vec(-1.0f64..1.0, 2),
        ks in prop::collection::vec(-1.0f64..1.0, 2),
        gamma in 0.0f64..20.0,
        xi in 0.05f64..1.0,
    ) {
        let k = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.9]);
        let khat = embed_khat(&k).unwrap();
        let s = build_joint_input(&encode_vector(&y, None).unwrap(), &encode_vector(&ks, None).unwrap(), xi).unwrap();
        let out = apply_direct_unitary(&s, gamma, &khat, 1.0).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        let (proj, p) = out.window_project(&HomodyneWindow::new(xi).unwrap()).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        let r = readout_expectation(&proj, readout_calibration(2, xi, xi)).unwrap();
        prop_assert!(r.is_finite());
    }

    #[test]
    fn parameter_rule_scales(eps in 0.01f64..0.5, xi in 0.05f64..1.0) {
        let khat = embed_khat(&DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])).unwrap();
        let p = select_parameters(eps, xi, &khat).unwrap();
        prop_assert!(p.theta_min >= xi * xi / eps * (1.0 - 1e-12));
        prop_assert!(p.step_error_bound <= eps * (1.0 + 1e-12));
        let q = select_parameters(eps, 2.0 * xi, &khat).unwrap();
        prop_assert!((q.gamma / p.gamma - 4.0).abs() < 1e-9);
    }
}
