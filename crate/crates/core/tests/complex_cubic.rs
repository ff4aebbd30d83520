use kdvlab_core::complex_cubic::*;
use kdvlab_core::C64;
use proptest::prelude::*;

const I: C64 = C64::new(0.0, 1.0);

/// Weierstrass (Durand-Kerner) iteration, independent of the closed form.
fn durand_kerner(z: C64) -> [C64; 3] {
    let f = |l: C64| l * l * l + l + I * z;
    let seed = C64::new(0.4, 0.9);
    let scale = 1.0 + z.norm().cbrt();
    let mut r = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
    for _ in 0..500 {
        let old = r;
        for i in 0..3 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            r[i] -= f(r[i]) / den;
        }
        if (0..3).all(|i| (r[i] - old[i]).norm() <= 1e-15 * scale) {
            break;
        }
    }
    r
}

#[test]
fn zero_and_branch_examples() {
    let r = solve_cubic(C64::new(0.0, 0.0)).unwrap();
    assert!(set_distance(&r.lambda, &[-I, C64::new(0.0, 0.0), I]) < 1e-15);
    assert!((r.lambda[0] + I).norm() < 1e-15 && (r.lambda[2] - I).norm() < 1e-15);

    let zb = 2.0 / (3.0 * 3f64.sqrt());
    let r = solve_cubic(C64::new(zb, 0.0)).unwrap();
    assert!(r.near_branch);
    let s = 3f64.sqrt();
    let expected = [-I / s, -I / s, 2.0 * I / s];
    assert!(set_distance(&r.lambda, &expected) < 1e-7, "{:?}", r.lambda);
    assert!(r.residual() < 1e-12);
}

#[test]
fn large_z_matches_two_term_expansion() {
    let z = 1e6;
    let r = solve_cubic(C64::new(z, 0.0)).unwrap();
    let mu3 = C64::from_polar(1.0, -std::f64::consts::PI / 6.0);
    let expected = mu3 * z.cbrt() - 1.0 / (3.0 * mu3 * z.cbrt());
    let err = r.lambda.iter().map(|l| (l - expected).norm()).fold(f64::INFINITY, f64::min);
    assert!(err <= 10.0 * z.powf(-2.0 / 3.0), "err {err}");
}

#[test]
fn tilde_roots_examples() {
    let t = tilde_roots(0.5, 0.2).unwrap();
    let base = solve_cubic(C64::new(0.3, 0.0)).unwrap();
    assert!(set_distance(&t.lambda, &base.lambda.map(|l| l.conj())) < 1e-12);
    for z in [-3.0, 0.1, 2.5] {
        let t = tilde_roots(z, 0.0).unwrap();
        let b = solve_cubic(C64::new(z, 0.0)).unwrap();
        assert!(set_distance(&t.lambda, &b.lambda.map(|l| l.conj())) < 1e-14);
    }
    let z = 1e6;
    let t = tilde_roots(z, 1.0).unwrap();
    let m = C64::from_polar(1.0, std::f64::consts::PI / 6.0) * z.cbrt();
    let err = t.lambda.iter().map(|l| (l - m).norm()).fold(f64::INFINITY, f64::min);
    assert!(err < 1e-1, "err {err}");
}

#[test]
fn non_finite_is_domain_error() {
    assert!(solve_cubic(C64::new(f64::NAN, 0.0)).is_err());
    assert!(solve_cubic(C64::new(0.0, f64::INFINITY)).is_err());
}

#[test]
fn asymptotic_slope() {
    let zs: Vec<f64> = (2..=8).map(|k| 10f64.powi(k)).collect();
    let errs: Vec<f64> = zs.iter().map(|&z| asymptotic_error(z).unwrap()).collect();
    let xs: Vec<f64> = zs.iter().map(|z| z.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope <= -0.6, "slope {slope}, errors {errs:?}");
}

#[test]
fn continuity_around_branch_points() {
    for zb in branch_points() {
        let radius = 1e-3;
        let n = 400;
        let pts: Vec<[C64; 3]> = (0..=n)
            .map(|k| solve_cubic(C64::new(zb, 0.0) + C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).unwrap().lambda)
            .collect();
        let max_step = pts.windows(2).map(|w| set_distance(&w[0], &w[1])).fold(0.0, f64::max);
        assert!(max_step <= 0.1 * radius.sqrt(), "step {max_step}");
    }
}

#[test]
fn agrees_with_independent_iteration() {
    for z in [C64::new(0.3, 0.0), C64::new(-2.0, 0.5), C64::new(17.0, -40.0), C64::new(0.0, 3.0), C64::new(250.0, 1.0)] {
        let r = solve_cubic(z).unwrap();
        let dk = durand_kerner(z);
        assert!(set_distance(&r.lambda, &dk) <= 1e-10 * (1.0 + z.norm().cbrt()), "z = {z}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn vieta_and_residual(r in 0.0f64..1e3, th in 0.0f64..std::f64::consts::TAU) {
        let z = C64::from_polar(r.sqrt() * 1e3f64.sqrt(), th);
        let rt = solve_cubic(z).unwrap();
        let tol = 1e-12 * (1.0 + z.norm());
        prop_assert!(rt.residual() <= tol);
        for v in rt.vieta_residuals() {
            prop_assert!(v <= tol);
        }
    }

    #[test]
    fn ordering_convention(re in -50.0f64..50.0, im in -50.0f64..50.0) {
        let rt = solve_cubic(C64::new(re, im)).unwrap();
        prop_assert_eq!(rt.ordering, Ordering::ByRealPart);
        let l = rt.lambda;
        prop_assert!(l[0].re <= l[1].re + 1e-12 && l[1].re <= l[2].re + 1e-12);
    }

    #[test]
    fn conjugation_symmetry(re in -100.0f64..100.0, im in -100.0f64..100.0) {
        let z = C64::new(re, im);
        let a = solve_cubic(-z.conj()).unwrap();
        let b = solve_cubic(z).unwrap();
        prop_assert!(set_distance(&a.lambda, &b.lambda.map(|l| l.conj())) <= 1e-12 * (1.0 + z.norm()));
    }
}
