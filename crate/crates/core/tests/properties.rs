use approx::assert_relative_eq;
use monocov::covariance::{cov, cov_matrix, cov_spectral, kernel_matrix, qcov_as, qcov_as_commutator, qcov_s, qcov_s_anticommutator};
use monocov::inequality::{check_hierarchy, check_main_inequality, HypothesisGrid, Tolerances, Verdict};
use monocov::instance::sample_instance;
use monocov::monotone::{FopSpec, Kernel};
use monocov::states::{center, sample_density, sample_unitary_with, to_eigenbasis, CMatrix, DensityMatrix, Observable, ObservableTuple};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fop() -> impl Strategy<Value = FopSpec> {
    prop_oneof![
        Just(FopSpec::Sld),
        Just(FopSpec::Wy),
        Just(FopSpec::KuboMori),
        (-1.0f64..=2.0).prop_map(|b| FopSpec::wyd(b).unwrap()),
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    (-12.0f64..12.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fop_symmetry_and_normalization(f in fop(), x in positive()) {
        let fx = f.eval(x).unwrap();
        let sym = x * f.eval(1.0 / x).unwrap();
        prop_assert!((fx - sym).abs() <= 1e-10 * fx.max(1.0), "{f}: f({x}) = {fx}, x f(1/x) = {sym}");
        prop_assert!((f.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fop_is_between_harmonic_and_arithmetic(f in fop(), x in positive()) {
        let fx = f.eval(x).unwrap();
        let harmonic = 2.0 * x / (1.0 + x);
        let arithmetic = (1.0 + x) / 2.0;
        prop_assert!(fx >= harmonic * (1.0 - 1e-10) && fx <= arithmetic * (1.0 + 1e-10));
    }

    #[test]
    fn mean_is_symmetric_homogeneous_and_bracketed(f in fop(), x in positive(), y in positive(), c in 1e-3f64..1e3) {
        let m = f.mean(x, y).unwrap();
        prop_assert!((m - f.mean(y, x).unwrap()).abs() <= 1e-12 * m);
        prop_assert!((f.mean(c * x, c * y).unwrap() - c * m).abs() <= 1e-10 * c * m);
        prop_assert!(m >= x.min(y) * (1.0 - 1e-12) && m <= x.max(y) * (1.0 + 1e-12));
    }

    #[test]
    fn kernels_are_ordered(f in fop(), x in positive(), y in positive()) {
        let cl = Kernel::Classical.eval(x, y).unwrap();
        let s = Kernel::SymmetricF(f).eval(x, y).unwrap();
        let a = Kernel::AsymmetricF(f).eval(x, y).unwrap();
        let slack = 1e-12 * cl;
        prop_assert!(cl + slack >= s && s + slack >= a && a >= 0.0, "{f} at ({x}, {y}): {cl} {s} {a}");
    }

    #[test]
    fn covariance_matrices_are_psd(seed in any::<u64>(), n in 2usize..6, count in 1usize..4, f in fop()) {
        let inst = sample_instance(n, count, seed, 0.0).unwrap();
        for g in [Kernel::Classical, Kernel::SymmetricF(f), Kernel::AsymmetricF(f)] {
            let m = cov_matrix(&inst.density, &inst.observables, &g).unwrap();
            prop_assert!(m.min_eigenvalue() >= -1e-9 * m.scale());
        }
    }

    #[test]
    fn hierarchy_holds(seed in any::<u64>(), n in 2usize..5, count in 1usize..4, f in fop()) {
        let inst = sample_instance(n, count, seed, 0.0).unwrap();
        let reports = check_hierarchy(&inst.density, f, &inst.observables, &HypothesisGrid::with_points(40), &Tolerances::default()).unwrap();
        for r in reports {
            prop_assert_eq!(r.verdict, Verdict::Pass, "{:?}", r);
        }
    }
}

fn instances(count: usize, n: usize, tuple: usize) -> Vec<(DensityMatrix, ObservableTuple)> {
    (0..count as u64)
        .map(|s| {
            let inst = sample_instance(n, tuple, 1000 + s, 0.0).unwrap();
            (inst.density, inst.observables)
        })
        .collect()
}

#[test]
fn unitary_invariance_of_covariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (d, obs) in instances(20, 3, 2) {
        let v = sample_unitary_with(&mut rng, 3);
        let (dv, ov) = (d.conjugate(&v).unwrap(), obs.conjugate(&v).unwrap());
        for g in [Kernel::Classical, Kernel::SymmetricF(FopSpec::Wy), Kernel::AsymmetricF(FopSpec::KuboMori)] {
            let a = cov_matrix(&d, &obs, &g).unwrap();
            let b = cov_matrix(&dv, &ov, &g).unwrap();
            assert!((&a.entries - &b.entries).amax() <= 1e-10 * a.scale(), "{g}");
        }
    }
}

#[test]
fn dual_paths_agree() {
    for (d, obs) in instances(50, 4, 2) {
        let (a, b) = (&obs.as_slice()[0], &obs.as_slice()[1]);
        assert_relative_eq!(cov(&d, a, b).unwrap(), cov_spectral(&d, a, b).unwrap(), epsilon = 1e-12, max_relative = 1e-10);
        for f in FopSpec::catalog() {
            assert_relative_eq!(
                qcov_as(&d, f, a, b).unwrap(),
                qcov_as_commutator(&d, f, a, b).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
            assert_relative_eq!(
                qcov_s(&d, f, a, b).unwrap(),
                qcov_s_anticommutator(&d, f, a, b).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
        }
    }
}

#[test]
fn bilinearity_and_scaling() {
    for (d, obs) in instances(20, 3, 3) {
        let [a, b, c] = [&obs.as_slice()[0], &obs.as_slice()[1], &obs.as_slice()[2]];
        let sum = Observable::new(a.matrix() * Complex64::from(2.0) + b.matrix() * Complex64::from(-0.5)).unwrap();
        let f = FopSpec::Wy;
        let lhs = qcov_as(&d, f, &sum, c).unwrap();
        let rhs = 2.0 * qcov_as(&d, f, a, c).unwrap() - 0.5 * qcov_as(&d, f, b, c).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-10);

        let m = cov_matrix(&d, &obs, &Kernel::SymmetricF(f)).unwrap();
        let m3 = cov_matrix(&d, &obs.scale(3.0), &Kernel::SymmetricF(f)).unwrap();
        let scale = m.scale();
        assert!((m3.entries - m.entries * 9.0).amax() <= 1e-10 * scale * 9.0);
    }
}

#[test]
fn quadratic_form_matches_kernel_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    use rand::Rng;
    for (d, obs) in instances(30, 4, 3) {
        let g = Kernel::AsymmetricF(FopSpec::Sld);
        let m = cov_matrix(&d, &obs, &g).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xv = DMatrix::from_column_slice(3, 1, &x);
        let quad = (xv.transpose() * &m.entries * &xv)[(0, 0)];

        let mut combo = CMatrix::zeros(4, 4);
        for (xi, a) in x.iter().zip(obs.iter()) {
            combo += center(a, &d).unwrap().matrix() * Complex64::from(*xi);
        }
        let c = to_eigenbasis(&Observable::new(combo).unwrap(), &d).unwrap();
        let k = kernel_matrix(d.eigenvalues(), &g).unwrap();
        let mut direct = 0.0;
        for h in 0..4 {
            for j in 0..4 {
                direct += k[(h, j)] * c[(h, j)].norm_sqr();
            }
        }
        assert_relative_eq!(quad, direct, epsilon = 1e-14, max_relative = 1e-9);
    }
}

/// `f(A) <= f(B)` whenever `0 < A <= B`, on real symmetric 2x2 pairs.
#[test]
fn operator_monotone_on_2x2() {
    use rand::Rng;
    let apply = |f: FopSpec, m: &DMatrix<f64>| {
        let e = SymmetricEigen::new(m.clone());
        let vals = e.eigenvalues.map(|l| f.eval(l).unwrap());
        &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random_psd = |rng: &mut ChaCha8Rng, floor: f64| {
        let g = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(2, 2) * floor
    };
    for _ in 0..200 {
        let a = random_psd(&mut rng, 0.05);
        let b = &a + random_psd(&mut rng, 0.0);
        for f in FopSpec::catalog() {
            let diff = apply(f, &b) - apply(f, &a);
            let min = SymmetricEigen::new(diff).eigenvalues.min();
            assert!(min >= -1e-10, "{f}: min eigenvalue {min}");
        }
    }
}

/// With a single observable the determinants are scalars and the
/// inequality collapses to an equality.
#[test]
fn single_observable_is_an_equality() {
    let d = sample_density(3, 1, 0.0).unwrap();
    let a = Observable::from_real(3, &[1.0, 0.5, 0.0, 0.5, 2.0, 0.5, 0.0, 0.5, -1.0]).unwrap();
    let r = check_main_inequality(
        &d,
        &Kernel::Classical,
        &Kernel::AsymmetricF(FopSpec::Wy),
        &ObservableTuple::new(vec![a]).unwrap(),
        &HypothesisGrid::default(),
        &Tolerances::default(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.margin.abs() <= 1e-12 * r.lhs.max(1.0));
}
