use kdvlab_core::control_tools::ControlSignal;
use kdvlab_core::toy_ode::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

#[test]
fn zero_control() {
    let u = ControlSignal::zeros(1.0, 1e-3);
    let s = toy_simulate(&u, 1.0, 1e-3).unwrap();
    assert_eq!((s.y1, s.y2, s.y3), (0.0, 0.0, 0.0));
    assert_eq!(toy_exact(&u, 1.0), (0.0, 0.0));
    assert!(toy_simulate(&u, 1.0, 2e-3).is_err());
}

#[test]
fn constant_control_quarter_period() {
    let t = PI / 2.0;
    let c = 0.7;
    let u = ControlSignal::from_fn(t, t / 2000.0, |_| c);
    let expected = c * c * (PI - 2.0);
    let s = toy_simulate(&u, t, t / 2000.0).unwrap();
    assert!((s.y2 - expected).abs() <= 1e-8, "{} vs {expected}", s.y2);
    assert!((toy_exact(&u, t).0 - expected).abs() <= 1e-8);
    assert!((s.y1 - c * t).abs() <= 1e-12);
}

#[test]
fn rk4_is_fourth_order() {
    let t = 2.0;
    let u = ControlSignal::from_fn(t, 0.02, |s| (3.0 * s).sin() + 0.5 * (7.0 * s).cos());
    let (y2, y3) = toy_exact(&u, t);
    let err = |dt: f64| {
        let s = toy_simulate(&u, t, dt).unwrap();
        (s.y2 - y2).abs().max((s.y3 - y3).abs())
    };
    let (e1, e2) = (err(2e-3), err(1e-3));
    println!("RK4 errors {e1:.3e} {e2:.3e} ratio {:.1}", e1 / e2);
    assert!(e2 < e1);
    assert!(e1 / e2 >= 14.0);
}

#[test]
fn quadrature_matches_simulation() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.gen_range(0.05..=2.0 * PI);
        let u = random_toy_control(&mut rng, t).unwrap();
        let s = toy_simulate(&u, t, 1e-3 * t).unwrap();
        let (y2, y3) = toy_exact(&u, t);
        worst = worst.max((s.y2 - y2).abs()).max((s.y3 - y3).abs());
    }
    println!("worst RK4/quadrature gap {worst:.3e}");
    assert!(worst <= 1e-7);
}

#[test]
fn y3_nonpositive_on_half_period_for_returning_controls() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let u = mean_free(&random_toy_control(&mut rng, PI).unwrap());
        let s = toy_simulate(&u, PI, 1e-3 * PI).unwrap();
        assert!(s.y1.abs() <= 1e-12);
        assert!(toy_exact(&u, PI).1 <= 0.0);
    }
}

#[test]
fn quadratic_homogeneity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let u = mean_free(&random_toy_control(&mut rng, 2.0).unwrap());
    let (a2, a3) = toy_exact(&u, 2.0);
    let (b2, b3) = toy_exact(&u.scaled(-3.0), 2.0);
    assert!((b2 - 9.0 * a2).abs() <= 1e-12 * b2.abs().max(1e-300));
    assert!((b3 - 9.0 * a3).abs() <= 1e-12 * b3.abs().max(1e-300));
}

#[test]
fn obstruction_checks() {
    let r = toy_obstruction_check(PI / 2.0, 200, 1).unwrap();
    assert!(r.y2_claim_applies);
    assert_eq!(r.y2_violations, 0);
    assert!(r.optimizer.is_none());

    let r = toy_obstruction_check(PI, 200, 1).unwrap();
    assert!(r.y3_claim_applies);
    assert_eq!(r.y3_violations, 0);
    println!("δ̂₃ at T = π: {:.3e}", r.delta3);
    assert!(r.delta3 > 0.0);

    let r = toy_obstruction_check(1.1 * PI, 20, 1).unwrap();
    let o = r.optimizer.clone().expect("optimizer runs beyond π");
    println!("T = 1.1π: best y₃ = {:.3e} (positive: {})", o.best_y3, o.found_positive);
    assert_eq!(r.to_csv().unwrap().lines().count(), 2 * 20 + 1);
    assert!(toy_obstruction_check(0.0, 1, 1).is_err());
}

#[test]
fn optimizer_stays_nonpositive_before_pi() {
    let o = maximize_y3(0.9 * PI, 32, 60).unwrap();
    assert!(!o.found_positive, "{o:?}");
}
