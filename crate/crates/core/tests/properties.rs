use conjset::geometry::{christoffel, christoffel_closed_form, metric_from_morse_sturm, Causal};
use conjset::linalg::{j_matrix, max_abs};
use conjset::prescribe::{rho_jet, vanishing_function, ClosedSetDescriptor, RadiusCurve, ScalarCurve, VanishingOptions};
use conjset::sds::{conjugate_instants, AnalyticId, MatCurve, MorseSturm, SympDiffSystem};
use conjset::symform::{inertia, SpectralPath, DEFAULT_ZERO_TOL};
use conjset::symplectic::{algebra_residual, assemble_sp, chart, chart_inverse, symplectic_drift};
use conjset::{Grid, LagrangianFrame, Mat, SymmetricForm};
use proptest::prelude::*;

fn mat(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0..2.0_f64, n * n).prop_map(move |v| Mat::from_vec(n, n, v))
}

fn sym(n: usize) -> impl Strategy<Value = SymmetricForm> {
    mat(n).prop_map(|m| SymmetricForm::new((&m + m.transpose()) * 0.5))
}

/// Symmetric with eigenvalues bounded away from zero.
fn nondegenerate(n: usize) -> impl Strategy<Value = SymmetricForm> {
    (mat(n), prop::collection::vec((0.5..2.0_f64, any::<bool>()), n)).prop_map(move |(m, d)| {
        let q = nalgebra::linalg::QR::new(m + Mat::identity(n, n) * 5.0).q();
        let d: Vec<f64> = d.into_iter().map(|(x, s)| if s { x } else { -x }).collect();
        SymmetricForm::new(&q * Mat::from_diagonal(&nalgebra::DVector::from_vec(d)) * q.transpose())
    })
}

fn well_conditioned(n: usize) -> impl Strategy<Value = Mat> {
    mat(n).prop_map(move |m| m * 0.2 + Mat::identity(n, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn congruence_keeps_inertia(s in nondegenerate(3), z in well_conditioned(3)) {
        let a = inertia(&s, DEFAULT_ZERO_TOL);
        let b = inertia(&s.congruence(&z), DEFAULT_ZERO_TOL);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.n_plus + a.n_minus + a.n_zero, 3);
    }

    #[test]
    fn spectral_path_keeps_inertia(s0 in nondegenerate(2), s1 in nondegenerate(2)) {
        prop_assume!(inertia(&s0, DEFAULT_ZERO_TOL) == inertia(&s1, DEFAULT_ZERO_TOL));
        let path = SpectralPath::new(&s0, &s1).unwrap();
        prop_assert!(max_abs(&(path.eval(0.0).matrix() - s0.matrix())) < 1e-10);
        prop_assert!(max_abs(&(path.eval(1.0).matrix() - s1.matrix())) < 1e-10);
        for s in path.sample(16) {
            prop_assert_eq!(inertia(&s, DEFAULT_ZERO_TOL), inertia(&s0, DEFAULT_ZERO_TOL));
        }
    }

    #[test]
    fn assembled_blocks_are_in_the_algebra(a in mat(2), b in sym(2), c in sym(2)) {
        let x = assemble_sp(&a, &b, &c).m;
        prop_assert!(algebra_residual(&x) < 1e-14);
        // J X is symmetric for X in sp(2n)
        let jx = j_matrix(2) * &x;
        prop_assert!(max_abs(&(&jx - jx.transpose())) < 1e-14);
    }

    #[test]
    fn exponential_of_algebra_is_symplectic(a in mat(2), b in sym(2), c in sym(2)) {
        let x = assemble_sp(&a, &b, &c).m * 0.3;
        prop_assert!(symplectic_drift(&x.exp()) < 1e-10);
    }

    #[test]
    fn chart_inverts_its_inverse(s in sym(2)) {
        let (xi0, xi1) = (LagrangianFrame::horizontal(2), LagrangianFrame::l0(2));
        let l = chart_inverse(&xi0, &xi1, &s).unwrap();
        let back = chart(&xi0, &xi1, &l).unwrap();
        prop_assert!(max_abs(&(back.matrix() - s.matrix())) < 1e-12);
    }

    #[test]
    fn vanishing_function_is_zero_exactly_on_the_set(
        lo in 0.2..1.0_f64, len in 0.0..0.5_f64, gap in 0.05..0.5_f64, k in 0.1..0.9_f64, t in 0.0..2.0_f64,
    ) {
        let set = ClosedSetDescriptor::new(0.0, 2.0, vec![(lo, lo + len), (lo + len + gap, lo + len + gap)]).unwrap();
        let f = vanishing_function(&set, VanishingOptions { amplitude: k, width: 0.02 }).unwrap();
        let v = f.value(t);
        prop_assert!(v >= 0.0 && v <= k);
        if set.contains(t) {
            prop_assert_eq!(v, 0.0);
        } else if set.distance(t) > 0.02 {
            prop_assert!(v > 0.0);
        }
    }

    #[test]
    fn rho_determinants(k in 0.1..0.9_f64, t in 0.0..2.0_f64) {
        let set = ClosedSetDescriptor::parse("1.0", 0.0, 2.0).unwrap();
        let r = RadiusCurve(vanishing_function(&set, VanishingOptions { amplitude: k, width: 0.05 }).unwrap());
        let rho = rho_jet(&r, t, 1);
        let j = r.jet(t, 1);
        let (rv, rd) = (j.value(), j.deriv(1));
        let scale = 1.0 + rv * rv + rd * rd;
        prop_assert!((rho.0[0].determinant() - (1.0 - rv * rv)).abs() <= 1e-12 * scale);
        prop_assert!((rho.0[1].determinant() + rv * rv + rd * rd).abs() <= 1e-12 * scale);
    }

    #[test]
    fn christoffel_symbols_are_symmetric_and_match_closed_form(
        s in sym(2), x0 in -0.3..0.3_f64, x1 in -0.3..0.3_f64, t in 0.1..0.9_f64, timelike in any::<bool>(),
    ) {
        let g = SymmetricForm::diag(&[1.0, -1.0]);
        let r = g.matrix() * s.matrix();
        let ms = MorseSturm::new(g, MatCurve::constant(r), Grid::new(0.0, 1.0, 8).unwrap()).unwrap();
        let causal = if timelike { Causal::Timelike } else { Causal::Spacelike };
        let m = metric_from_morse_sturm(&ms, causal).unwrap();
        let x = [x0, x1, t];
        let fd = christoffel(&m, &x, 1e-4).unwrap();
        let exact = christoffel_closed_form(&m, &x).unwrap();
        for (a, b) in fd.iter().zip(&exact) {
            prop_assert!(max_abs(&(a - a.transpose())) < 1e-12);
            prop_assert!(max_abs(&(a - b)) < 1e-5);
        }
        prop_assert_eq!(m.index_of_metric(), if timelike { 2 } else { 1 });
    }

    #[test]
    fn oscillator_instants_are_multiples_of_pi_over_omega(omega in 0.5..3.0_f64) {
        let mut params = std::collections::BTreeMap::new();
        params.insert("omega".to_string(), omega);
        let grid = Grid::new(0.0, 6.0, 2048).unwrap();
        let sys = SympDiffSystem::from_id(1, grid, AnalyticId { id: "oscillator".into(), params }).unwrap();
        let r = conjugate_instants(&sys).unwrap();
        let want: Vec<f64> = (1..).map(|k| k as f64 * std::f64::consts::PI / omega).take_while(|&t| t < 6.0 - 1e-3).collect();
        prop_assert_eq!(r.instants.len(), want.len());
        for (i, w) in r.instants.iter().zip(&want) {
            prop_assert!((i.t - w).abs() < 1e-6);
        }
    }
}
