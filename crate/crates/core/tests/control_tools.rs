use kdvlab_core::control_tools::*;
use kdvlab_core::critical_lengths::CriticalPair;
use kdvlab_core::kdv_solver::Grid;
use kdvlab_core::obstruction_experiments::{random_bump_control, sample_rng};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn gaussian(t_final: f64, c: f64, sigma: f64, dt: f64) -> ControlSignal {
    ControlSignal::from_fn(t_final, dt, |t| (-(t - c).powi(2) / (2.0 * sigma * sigma)).exp())
}

#[test]
fn sobolev_zero_and_parseval() {
    let z = ControlSignal::zeros(1.0, 1e-3);
    assert_eq!(sobolev_norm(&z, -0.5).unwrap().value, 0.0);
    let u = bump_control(1.0, 0.5, 0.3, 2.0, 1e-3).unwrap();
    let l2 = (u.dt * u.samples.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let h0 = sobolev_norm(&u, 0.0).unwrap();
    assert!((h0.value - l2).abs() <= 1e-3 * l2, "{} vs {l2}", h0.value);
    assert!(h0.pad_factor >= 4);
}

#[test]
fn sobolev_gaussian_negative_index() {
    let sigma = 0.05;
    let u = gaussian(1.0, 0.5, sigma, 1e-3);
    let s = -2.0 / 3.0;
    // |û(ξ)|² = σ² e^{−σ²ξ²} for the unitary transform
    let cut = 12.0 / sigma;
    let exact = (2.0 * simpson(|x| sigma * sigma * (-(sigma * x).powi(2)).exp() * (1.0 + x * x).powf(s), 0.0, cut, 200_000)).sqrt();
    let v = sobolev_norm(&u, s).unwrap().value;
    assert!((v - exact).abs() <= 0.01 * exact, "{v} vs {exact}");
}

#[test]
fn sobolev_monotone_in_index_and_homogeneous() {
    let u = bump_control(2.0, 1.0, 0.4, 1.0, 1e-3).unwrap();
    let vals: Vec<f64> = [-2.0, -1.0, -2.0 / 3.0, 0.0, 0.5, 1.0].iter().map(|&s| sobolev_norm(&u, s).unwrap().value).collect();
    for w in vals.windows(2) {
        assert!(w[0] <= w[1]);
    }
    let a = sobolev_norm(&u.scaled(-3.0), -0.5).unwrap().value;
    let b = sobolev_norm(&u, -0.5).unwrap().value;
    assert!((a - 3.0 * b).abs() <= 1e-12 * a);
    assert!(sobolev_norm(&u, 1.5).is_err());
    assert!(sobolev_norm(&u, -2.5).is_err());
}

#[test]
fn bump_examples() {
    let u = bump_control(1.0, 0.5, 0.25, 1.0, 1e-3).unwrap();
    assert_eq!(u.u0(), 0.0);
    assert_eq!(u.at(0.25), 0.0);
    assert_eq!(u.at(0.75), 0.0);
    assert!((u.at(0.5) - 1.0).abs() < 1e-12);
    let v = bump_control(1.0, 0.5, 0.25, 2.5, 1e-3).unwrap();
    assert!((v.l2_norm() - 2.5 * u.l2_norm()).abs() <= 1e-12);
    assert!(bump_control(1.0, 0.2, 0.25, 1.0, 1e-3).is_err());
    assert!(bump_control(1.0, 0.9, 0.2, 1.0, 1e-3).is_err());
    assert!(bump_control(1.0, 0.5, 0.0, 1.0, 1e-3).is_err());

    let (c, w, a) = (0.5, 0.25, 1.0);
    let l2 = simpson(|t| (a * bump_profile((t - c) / w)).powi(2), c - w, c + w, 20_000);
    let d2 = simpson(|t| bump_derivative(t, c, w, a).powi(2), c - w, c + w, 20_000);
    let exact = (l2 + d2).sqrt();
    let h1 = sobolev_norm(&u, 1.0).unwrap().value;
    assert!((h1 - exact).abs() <= 5e-3 * exact, "{h1} vs {exact}");
}

#[test]
fn control_csv_round_trip() {
    let u = bump_control(1.0, 0.5, 0.25, 1.0, 0.01).unwrap();
    let back = ControlSignal::from_csv(&u.to_csv().unwrap()).unwrap();
    assert!((back.dt - u.dt).abs() < 1e-15);
    assert_eq!(back.samples.len(), u.samples.len());
    assert!(back.samples.iter().zip(&u.samples).all(|(a, b)| (a - b).abs() <= 1e-15));
    assert!(ControlSignal::from_csv("t,u\n0,0\n0.1,1\n0.3,2\n").is_err());
    assert!(ControlSignal::new(vec![0.0, f64::NAN], 0.1).is_err());
    assert_eq!(u.at(-0.1), 0.0);
    assert_eq!(u.at(1.1), 0.0);
}

fn sine_target(g: &Grid, m: f64) -> Vec<f64> {
    g.xs().iter().map(|x| (m * x).sin()).collect()
}

#[test]
fn hum_sine_at_2pi() {
    let g = Grid::new(2.0 * PI, 256, 1e-3, 2.0).unwrap();
    let r = hum_control(&g, &sine_target(&g, 1.0), 1e-8, false).unwrap();
    println!("sin residual {:.3e}", r.residual);
    assert!(r.converged && r.residual <= 1e-3);
    assert!(r.m_projection <= 1e-12);
    assert_eq!(r.control.u0(), 0.0);
    // the zero extension jumps at T, so only s < 1/2 is finite
    assert!(sobolev_norm(&r.control, 0.0).unwrap().value > 0.0);
    assert!(sobolev_norm(&r.control, 1.0).is_err());
}

#[test]
fn hum_zero_target() {
    let g = Grid::new(2.0 * PI, 64, 1e-2, 1.0).unwrap();
    let r = hum_control(&g, &vec![0.0; g.interior()], 1e-8, false).unwrap();
    assert!(r.control.samples.iter().all(|v| *v == 0.0));
    assert_eq!(r.residual, 0.0);
    assert!(hum_control(&g, &[0.0; 3], 1e-8, false).is_err());
    assert!(hum_control(&g, &vec![0.0; g.interior()], -1.0, false).is_err());
}

#[test]
fn hum_stalls_on_unreachable_direction() {
    let g = Grid::new(2.0 * PI, 128, 2e-3, 2.0).unwrap();
    let t: Vec<f64> = g.xs().iter().map(|x| 1.0 - x.cos()).collect();
    let r = hum_control(&g, &t, 1e-8, false).unwrap();
    println!("1 − cos: residual {:.3e}, M-projection {:.3}", r.residual, r.m_projection);
    assert!(!r.converged);
    assert!(r.m_projection > 0.99);
    let p = hum_control(&g, &t, 1e-8, true).unwrap();
    assert_eq!(p.residual, 0.0);
}

#[test]
fn hum_is_linear() {
    let g = Grid::new(2.0 * PI, 128, 2e-3, 2.0).unwrap();
    let t = sine_target(&g, 2.0);
    let a = hum_control(&g, &t, 1e-8, false).unwrap();
    let t3: Vec<f64> = t.iter().map(|v| -3.0 * v).collect();
    let b = hum_control(&g, &t3, 1e-8, false).unwrap();
    let scale = a.control.max_abs();
    for (x, y) in a.control.samples.iter().zip(&b.control.samples) {
        assert!((y + 3.0 * x).abs() <= 1e-8 * 3.0 * scale);
    }
}

#[test]
fn gramian_is_symmetric() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for len in [2.0 * PI, 5.0] {
        let g = Grid::new(len, 96, 2e-3, 1.0).unwrap();
        for _ in 0..3 {
            let a: Vec<f64> = (0..g.interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..g.interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = gramian_asymmetry(&g, &a, &b).unwrap();
            assert!(d <= 1e-8, "{d}");
        }
    }
}

#[test]
fn null_control_of_zero_is_zero() {
    let g = Grid::new(1.0, 64, 1e-3, 1.0).unwrap();
    let r = null_control(&g, &ControlSignal::zeros(0.5, 1e-3)).unwrap();
    assert!(r.control.samples.iter().all(|v| *v == 0.0));
    assert!(r.converged);
}

#[test]
fn null_control_non_critical() {
    let g = Grid::new(1.0, 64, 1e-3, 1.0).unwrap();
    let u = bump_control(0.5, 0.25, 0.2, 1e-2, 1e-3).unwrap();
    let r = null_control(&g, &u).unwrap();
    println!("L = 1 null control residual {:.3e}", r.residual);
    assert!(r.converged && r.residual <= 1e-5);
    assert_eq!(r.m_residual, 0.0);
    for (a, b) in r.control.samples.iter().zip(&u.samples).take(500) {
        assert_eq!(a, b);
    }
}

#[test]
fn null_control_critical() {
    let pair = CriticalPair::new(2, 1).unwrap();
    let g = Grid::new(pair.len, 128, 1e-3, 1.0).unwrap();
    let u = bump_control(0.5, 0.25, 0.2, 1e-2, 1e-3).unwrap();
    let r = null_control(&g, &u).unwrap();
    println!("L(2,1) null control residual {:.3e}, M part {:.3e}", r.residual, r.m_residual);
    assert!(r.residual <= 1e-5);
    assert!(r.m_residual <= 1e-5);
}

#[test]
fn null_controls_vanish_at_eigenfrequencies() {
    let pair = CriticalPair::new(2, 1).unwrap();
    let g = Grid::new(pair.len, 256, 1e-3, 1.0).unwrap();
    // û(±p) tracks ‖y(T)‖, so close well below the default tolerance
    let mut plan = NullControlPlan::projection(&g).unwrap();
    plan.tol = 1e-9;
    for s in 0..3 {
        let u = random_bump_control(&mut sample_rng(7, 0, s), 1.0, 1.0, 1e-3).unwrap();
        let nc = plan.close(&u).unwrap();
        assert!(nc.residual <= 1e-7, "residual {:e}", nc.residual);
        let c = &nc.control;
        let (_, spec) = c.fourier_grid(-40.0, 8 * c.samples.len(), 8 * c.samples.len()).unwrap();
        let peak = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for z in [pair.p, -pair.p] {
            let r = c.fourier(z).norm() / peak;
            assert!(r <= 1e-4, "sample {s}: |û({z})|/max = {r:e}");
        }
    }
}

#[test]
fn n_functional_zero_and_scaling() {
    let pair = CriticalPair::new(2, 1).unwrap();
    let z = ControlSignal::zeros(1.0, 1e-3);
    assert_eq!(n_functional(&z, &pair, 0.5).unwrap().value, 0.0);
    let u = bump_control(1.0, 0.4, 0.2, 1.0, 1e-3).unwrap();
    let plan = NPlan::new(&pair, &u, 0.0).unwrap();
    assert!(plan.min_h_prime > MIN_H_PRIME);
    assert!(GAMMA_SCAN.contains(&plan.gamma));
    let a = plan.value(&u).unwrap();
    let b = plan.value(&u.scaled(-2.5)).unwrap();
    assert!((b - 2.5 * a).abs() <= 1e-10 * b);
    assert!(plan.value(&ControlSignal::zeros(0.5, 1e-3)).is_err());
}

#[test]
fn n_functional_is_equivalent_to_negative_sobolev_norm() {
    let pair = CriticalPair::new(2, 1).unwrap();
    let g = Grid::new(pair.len, 128, 1e-3, 1.0).unwrap();
    let plan = NullControlPlan::projection(&g).unwrap();
    let mut ratios = Vec::new();
    let mut nplan: Option<NPlan> = None;
    for s in 0..20 {
        let u = random_bump_control(&mut sample_rng(21, 0, s), 1.0, 1.0, 1e-3).unwrap();
        let nc = plan.close(&u).unwrap();
        let np = nplan.get_or_insert_with(|| NPlan::new(&pair, &nc.control, 0.5).unwrap());
        let n = np.value(&nc.control).unwrap();
        let h = sobolev_norm(&nc.control, -2.0 / 3.0).unwrap().value;
        ratios.push(n / h);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    println!("N/H^(-2/3) in [{lo:.4}, {hi:.4}]");
    assert!(lo > 0.0 && hi / lo <= 50.0);
}

#[test]
fn frequency_null_control() {
    let pair = CriticalPair::new(2, 1).unwrap();
    let zero = null_control_frequency(&ControlSignal::zeros(1.0, 1e-3), &pair, 0.5, 128).unwrap();
    assert!(zero.control.samples.iter().all(|v| *v == 0.0));

    let w = ControlSignal::from_fn(1.0, 1e-3, |t| if (0.2..=0.8).contains(&t) { (-(t - 0.5f64).powi(2) / (2.0 * 0.05f64.powi(2))).exp() } else { 0.0 });
    let r = null_control_frequency(&w, &pair, 0.5, 128).unwrap();
    println!("frequency null control: leakage {:.4}, residual {:.4}, flagged {}", r.leakage, r.residual, r.flagged);
    assert!(r.leakage.is_finite() && r.residual.is_finite());
    assert_eq!(r.flagged, r.leakage > LEAKAGE_LIMIT);
    let m = r.u_hat.len();
    let jz = m / 2;
    for j in 1..=jz {
        assert!((r.u_hat[jz - j] - r.u_hat[jz + j].conj()).norm() <= 1e-12 * r.u_hat[jz + j].norm().max(1e-300));
    }
    assert!(r.u_hat[jz].im.abs() <= 1e-12 * r.u_hat[jz].norm().max(1e-300));

    let bad = ControlSignal::from_fn(1.0, 1e-3, |_| 1.0);
    assert!(null_control_frequency(&bad, &pair, 0.5, 128).is_err());
    assert!(null_control_frequency(&w, &pair, 0.0, 128).is_err());
}
