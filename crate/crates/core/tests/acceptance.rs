use kdvlab_core::complex_cubic::*;
use kdvlab_core::control_tools::*;
use kdvlab_core::critical_lengths::*;
use kdvlab_core::kdv_solver::*;
use kdvlab_core::numerics::cauchy_derivative;
use kdvlab_core::obstruction_experiments::*;
use kdvlab_core::spectral::*;
use kdvlab_core::toy_ode::*;
use kdvlab_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn verdict(id: u32, pass: bool, detail: String) {
    println!("criterion {id:2}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {detail}");
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn pair21() -> CriticalPair {
    CriticalPair::new(2, 1).unwrap()
}

#[test]
fn criterion_01_cubic_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let r = 10f64.powf(rng.gen_range(-4.0..7.0));
        let z = C64::from_polar(r, rng.gen_range(-PI..PI));
        let t = solve_cubic(z).unwrap();
        let v = t.vieta_residuals();
        let m = v.iter().cloned().fold(t.residual(), f64::max) / (1.0 + r);
        worst = worst.max(m);
    }
    let zs: Vec<f64> = (2..=8).map(|k| 10f64.powi(k)).collect();
    let errs: Vec<f64> = zs.iter().map(|&z| asymptotic_error(z).unwrap()).collect();
    let s = slope(&zs, &errs);
    verdict(1, worst <= 1e-12 && s <= -0.6, format!("max residual/(1+|z|) {worst:.2e}, asymptotic slope {s:.3}"));
}

#[test]
fn criterion_02_eigenfrequencies() {
    let mut pairs = Vec::new();
    for k in 1..=5u32 {
        for l in 1..=k {
            pairs.push((k, l));
        }
    }
    let mut worst_h = 0.0f64;
    let mut worst_eta = 0.0f64;
    let mut min_dh = f64::INFINITY;
    for &(k, l) in pairs.iter().take(10) {
        let pair = CriticalPair::new(k, l).unwrap();
        for z in [pair.p, -pair.p] {
            let w = C64::new(z, 0.0);
            worst_h = worst_h.max(h_value(w, pair.len).unwrap().norm());
            let dh = cauchy_derivative(|v| h_value(v, pair.len).unwrap(), w, 1e-4);
            min_dh = min_dh.min(dh.norm());
        }
        let roots = solve_cubic(C64::new(-pair.p, 0.0)).unwrap();
        worst_eta = worst_eta.max(set_distance(&roots.lambda, &pair.eta));
    }
    verdict(
        2,
        worst_h <= 1e-9 && worst_eta <= 1e-10 && min_dh > 1e-6,
        format!("10 pairs: max |H(±p)| {worst_h:.2e}, root set vs η {worst_eta:.2e}, min |H'| {min_dh:.3e}"),
    );
}

#[test]
fn criterion_03_e_cross_check() {
    let mut worst = 0.0f64;
    let mut zero_ok = true;
    let mut count = 0;
    for k in 1..=20u32 {
        for l in 1..=k {
            let pair = CriticalPair::new(k, l).unwrap();
            let closed = compute_e(&pair, EMethod::ClosedForm).unwrap();
            if (2 * k + l) % 3 == 0 {
                zero_ok &= closed == C64::new(0.0, 0.0) && pair.e == C64::new(0.0, 0.0);
                continue;
            }
            zero_ok &= closed != C64::new(0.0, 0.0);
            let direct = compute_e(&pair, EMethod::Direct).unwrap();
            worst = worst.max((direct - closed).norm() / closed.norm());
            count += 1;
        }
    }
    verdict(3, zero_ok && worst <= 1e-12, format!("{count} pairs: max |direct − closed|/|closed| {worst:.3e}, zero pattern {zero_ok}"));
}

#[test]
fn criterion_04_b_asymptotics() {
    let pair = pair21();
    let field = pair.psi();
    let e = pair.e;
    let zs: Vec<f64> = (3..=7).map(|k| 10f64.powi(k)).collect();
    let scaled: Vec<C64> = zs.iter().map(|&z| integral_b_field(z, &field, default_b_tolerance(z)).unwrap() * z.powf(4.0 / 3.0)).collect();
    let gap: Vec<f64> = scaled.iter().map(|v| (v - e).norm() / e.norm()).collect();
    let limit = b_asymptotic_constant(&pair);
    let gap_limit: Vec<f64> = scaled.iter().map(|v| (v - limit).norm() / limit.norm()).collect();
    let s = slope(&zs, &gap);
    let s_limit = slope(&zs, &gap_limit);
    verdict(
        4,
        gap[1] <= 0.1 && s <= -0.25,
        format!("gap to E at 1e4 {:.3}, slope {s:.3}; gap to E/5: {} (slope {s_limit:.3})", gap[1], sci(&gap_limit)),
    );
}

fn psi_error(n: usize, dt: f64) -> f64 {
    let pair = pair21();
    let f = pair.psi();
    let g = Grid::new(pair.len, n, dt, 1.0).unwrap();
    let xs = g.xs();
    let traj = solve_linear(&g, &f.sample_psi(0.0, &xs), &ControlSignal::zeros(1.0, dt), None).unwrap();
    let exact = f.sample_psi(1.0, &xs);
    let diff: Vec<f64> = traj.final_state().iter().zip(&exact).map(|(a, b)| a - b).collect();
    g.norm(&diff) / g.norm(&exact)
}

fn bracket(n: usize, dt: f64) -> (f64, f64) {
    let pair = pair21();
    let g = Grid::new(pair.len, n, dt, 0.5).unwrap();
    let y0: Vec<f64> = g.xs().iter().map(|x| 0.5 * (PI * x / pair.len).sin().powi(2) * (2.0 * PI * x / pair.len).sin()).collect();
    let t = solve_nonlinear(&g, &y0, &ControlSignal::zeros(0.5, dt)).unwrap();
    (psi_bracket_residual(&t, &pair.psi()), g.h + dt)
}

#[test]
fn criterion_05_solver_validation() {
    let e1 = psi_error(512, 1e-3);
    let e2 = psi_error(1024, 5e-4);
    let runs = [bracket(64, 4e-3), bracket(128, 2e-3), bracket(256, 1e-3)];
    let cs: Vec<f64> = runs.iter().map(|(r, s)| r / s).collect();
    let c = cs.iter().cloned().fold(0.0, f64::max);
    // C must not grow under refinement
    let bounded = cs[2] <= 1.5 * cs[0];
    verdict(
        5,
        e1 <= 5e-3 && e1 / e2 >= 1.8 && bounded,
        format!("Ψ error {e1:.2e}, refinement {:.2}; bracket residual/(h+dt) {cs:.3?}, C = {c:.3}", e1 / e2),
    );
}

#[test]
fn criterion_06_parseval() {
    let rep = sign_definiteness_sweep(&pair21(), &[0.5], 10, 6, SweepGrid::default()).unwrap();
    let worst = rep.records.iter().map(|r| r.parseval_rel).fold(0.0, f64::max);
    verdict(6, rep.records.len() == 10 && worst <= 0.02, format!("{} null controls, max relative mismatch {worst:.4}", rep.records.len()));
}

#[test]
fn criterion_07_sign_definiteness() {
    let rep = sign_definiteness_sweep(&pair21(), &[0.25, 0.5, 1.0], 50, 7, SweepGrid::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &rep.summaries {
        pass &= s.accepted == 50 && s.positive == 50 && s.min_coercivity > 0.0;
        parts.push(format!("T {}: {}/{} positive ({} skipped), min coercivity {:.3e}", s.t, s.positive, s.accepted, s.skipped, s.min_coercivity));
    }
    verdict(7, pass, parts.join("; "));
}

#[test]
fn criterion_08_monotone_ratio() {
    let rep = monotone_ratio_sweep(&pair21(), &[0.5, 0.25, 0.1], 20, 8, SweepGrid::default()).unwrap();
    let med: Vec<f64> = [0.5, 0.25, 0.1]
        .iter()
        .map(|&t| median(rep.records.iter().filter(|r| r.t == t).map(|r| r.ratio_gap).collect()))
        .collect();
    let med_limit: Vec<f64> = [0.5, 0.25, 0.1]
        .iter()
        .map(|&t| median(rep.records.iter().filter(|r| r.t == t).map(|r| r.ratio_gap_limit).collect()))
        .collect();
    let counts: Vec<usize> = rep.summaries.iter().map(|s| s.accepted).collect();
    let pass = med[1] < med[0] && med[2] < med[1] && med[1] <= 0.5;
    verdict(8, pass, format!("median gap to E over T = 0.5, 0.25, 0.1: {med:.3?} (samples {counts:?}); gap to E/5: {med_limit:.3?}"));
}

#[test]
fn criterion_09_hum() {
    let g = Grid::new(2.0 * PI, 256, 1e-3, 2.0).unwrap();
    let basis = unreachable_basis(&g).unwrap().expect("2π is critical");
    let xs = g.xs();
    let shapes: [Box<dyn Fn(f64) -> f64>; 5] = [
        Box::new(|x: f64| x.sin()),
        Box::new(|x: f64| (2.0 * x).sin()),
        Box::new(|x: f64| (3.0 * x).sin()),
        Box::new(|x: f64| x * (2.0 * PI - x) / 10.0),
        Box::new(|x: f64| (-(x - PI).powi(2)).exp()),
    ];
    let mut residuals = Vec::new();
    for f in &shapes {
        let raw: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let target = basis.project_out(&raw, g.h);
        residuals.push(hum_control(&g, &target, 1e-8, false).unwrap().residual);
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut asym = 0.0f64;
    for _ in 0..3 {
        let a: Vec<f64> = (0..g.interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..g.interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        asym = asym.max(gramian_asymmetry(&g, &a, &b).unwrap());
    }
    let stall_target: Vec<f64> = xs.iter().map(|x| 1.0 - x.cos()).collect();
    let stall = hum_control(&g, &stall_target, 1e-8, false).unwrap();
    let stalled = !stall.converged && stall.m_projection > 0.99;
    verdict(
        9,
        worst <= 1e-3 && asym <= 1e-8 && stalled,
        format!(
            "M⊥ residuals {}, Gramian asymmetry {asym:.2e}, 1 − cos x: residual {:.3} with M-projection {:.3}",
            sci(&residuals),
            stall.residual,
            stall.m_projection
        ),
    );
}

#[test]
fn criterion_10_toy_system() {
    let mut worst_const = 0.0f64;
    for c in [0.3, 1.0, -2.0] {
        let u = ControlSignal::from_fn(PI / 2.0, PI / 2000.0, |_| c);
        let s = toy_simulate(&u, PI / 2.0, 1e-3).unwrap();
        worst_const = worst_const.max((s.y2 - c * c * (PI - 2.0)).abs());
    }
    let a = toy_obstruction_check(PI / 2.0, 200, 10).unwrap();
    let b = toy_obstruction_check(PI, 200, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_rk = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen_range(0.5..3.5);
        let u = random_toy_control(&mut rng, t).unwrap();
        let s = toy_simulate(&u, t, u.dt).unwrap();
        let (y2, y3) = toy_exact(&u, t);
        worst_rk = worst_rk.max((s.y2 - y2).abs().max((s.y3 - y3).abs()));
    }
    verdict(
        10,
        worst_const <= 1e-8 && a.y2_violations == 0 && b.y3_violations == 0 && worst_rk <= 1e-7,
        format!(
            "constant-control error {worst_const:.2e}; violations y₂ {} (T = π/2), y₃ {} (T = π); RK4 vs exact {worst_rk:.2e}",
            a.y2_violations, b.y3_violations
        ),
    );
}

#[test]
fn criterion_11_steering() {
    let pair = pair21();
    let plan = SteerPlan::new(&pair, 1.2 * PI / pair.p, SteerConfig::default()).unwrap();
    let zero = vec![0.0; plan.grid.interior()];
    let rho = 1e-3;
    let mut parts = Vec::new();
    let mut pass = true;
    for angle in [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0] {
        let (c, s) = (angle.cos(), angle.sin());
        let dir: Vec<f64> = plan.basis.functions[0].iter().zip(&plan.basis.functions[1]).map(|(a, b)| c * a + s * b).collect();
        let n = plan.grid.norm(&dir);
        let target: Vec<f64> = dir.iter().map(|v| rho * v / n).collect();
        let out = nonlinear_steer(&plan, &zero, &target, rho, 3).unwrap();
        let r = &out.residuals;
        let reduction = r[0] / r[r.len().min(4) - 1];
        pass &= reduction >= 2.0 && !out.diverged;
        parts.push(format!("angle {:.0}°: residuals {}, reduction {reduction:.1}×", angle.to_degrees(), sci(r)));
    }
    verdict(11, pass, parts.join("; "));
}

#[test]
fn criterion_12_appendix_checks() {
    let mut var = 0.0f64;
    for len in [2.0 * PI, pair21().len] {
        for zb in branch_points() {
            let c = branch_loop_check(zb, 1e-2, 64, len).unwrap();
            var = var.max(c.g_variation).max(c.h_variation);
        }
    }
    let mut consts = Vec::new();
    for j in [0, 1] {
        let e = (2 - j) as f64 / 3.0;
        let normalized: Vec<f64> = (1..=6)
            .map(|k| {
                let z = 10f64.powi(k);
                let n = (1000f64.max(4.0 * z.cbrt())) as u64;
                pre1_sum(z, j, n).unwrap().value * (z + 2.0).powf(e) / (z + 2.0).ln()
            })
            .collect();
        consts.push(normalized.iter().cloned().fold(0.0, f64::max));
    }
    let ms: Vec<i64> = (5..=12).collect();
    let fit = detq_line_bound(2.0 * PI, &ms, 200).unwrap();
    let floors_ok = fit.bounded_away_from_zero() && fit.ln_floors.iter().all(|f| f.1.is_finite());
    let lo = fit.ln_floors.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    verdict(
        12,
        var <= 1e-6 && consts.iter().all(|c| c.is_finite()) && floors_ok,
        format!("loop variation {var:.2e}; fitted constants {consts:.3?}; line floors c = {:.3}, min ln floor {lo:.3}", fit.c),
    );
}
