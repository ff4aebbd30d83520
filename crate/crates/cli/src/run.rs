use crate::config::{bad, sha256_hex, CliError, Experiment, ExperimentConfig, Format};
use kdvlab_core::complex_cubic::solve_cubic;
use kdvlab_core::control_tools::{bump_control, bump_profile, hum_control, ControlSignal, NullControlPlan};
use kdvlab_core::critical_lengths::{enumerate_pairs, pair_table_csv, CriticalPair};
use kdvlab_core::kdv_solver::{empirical_frequency_response, solve_linear, solve_nonlinear, trajectory_csv, Grid, Trajectory};
use kdvlab_core::obstruction_experiments::{nonlinear_steer, random_bump_control, sample_rng, sign_definiteness_sweep, ObstructionReport, SteerConfig, SteerPlan, SweepGrid};
use kdvlab_core::spectral::{find_real_zeros_h, h_value, SIMPLE_THRESHOLD};
use kdvlab_core::toy_ode::{toy_exact, toy_obstruction_check, toy_simulate};
use kdvlab_core::C64;
use serde::Serialize;
use serde_json::json;
use std::f64::consts::PI;
use std::time::Instant;

pub const MANIFEST_SCHEMA: &str = "kdvlab-manifest/1";

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    pub passed: bool,
    pub summary: String,
}

fn artifact(name: &str, text: String) -> Artifact {
    Artifact { name: name.to_string(), bytes: text.into_bytes() }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv_rows(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut s = header.join(",") + "\n";
    for r in rows {
        s += &r.join(",");
        s.push('\n');
    }
    s
}

fn e(v: f64) -> String {
    format!("{v:.12e}")
}

fn pair_of(cfg: &ExperimentConfig) -> Result<CriticalPair, CliError> {
    match cfg.pair {
        Some([k, l]) => Ok(CriticalPair::new(k, l)?),
        None => bad("pair", "required"),
    }
}

fn length_of(cfg: &ExperimentConfig, default: Option<f64>) -> Result<f64, CliError> {
    match (cfg.pair, cfg.len, default) {
        (Some(_), _, _) => Ok(pair_of(cfg)?.len),
        (None, Some(l), _) => Ok(l),
        (None, None, Some(d)) => Ok(d),
        _ => bad("pair", "required (or `L`)"),
    }
}

fn sweep_grid(cfg: &ExperimentConfig) -> SweepGrid {
    let d = SweepGrid::default();
    SweepGrid { n: cfg.grid.n.unwrap_or(d.n), steps: cfg.grid.steps.unwrap_or(d.steps) }
}

fn control_csv(u: &ControlSignal) -> Result<String, CliError> {
    Ok(u.to_csv()?)
}

fn report_artifacts(cfg: &ExperimentConfig, stem: &str, r: &ObstructionReport) -> Result<Vec<Artifact>, CliError> {
    let mut out = vec![artifact(&format!("{stem}.json"), r.to_json()? + "\n")];
    if cfg.output.format == Format::Csv {
        out.push(artifact(&format!("{stem}_samples.csv"), r.to_csv()?));
        let rows = r
            .summaries
            .iter()
            .map(|s| {
                vec![
                    e(s.t),
                    s.accepted.to_string(),
                    s.skipped.to_string(),
                    s.positive.to_string(),
                    e(s.min_coercivity),
                    e(s.median_ratio_gap),
                    e(s.median_ratio_gap_limit),
                    e(s.max_parseval_rel),
                ]
            })
            .collect();
        out.push(artifact(
            &format!("{stem}_summary.csv"),
            csv_rows(&["T", "accepted", "skipped", "positive", "min_coercivity", "median_ratio_gap", "median_ratio_gap_limit", "max_parseval_rel"], rows),
        ));
    }
    Ok(out)
}

fn hum_target(name: &str, len: f64, xs: &[f64]) -> Vec<f64> {
    let w = 2.0 * PI / len;
    xs.iter()
        .map(|&x| match name {
            "sin2" => (2.0 * w * x).sin(),
            "one-minus-cos" => 1.0 - (w * x).cos(),
            "bump" => bump_profile((x - 0.5 * len) / (0.25 * len)),
            _ => (w * x).sin(),
        })
        .collect()
}

fn subsample(traj: &Trajectory, every: usize) -> Trajectory {
    let keep = |i: usize| i % every == 0 || i + 1 == traj.times.len();
    let pick = |v: &Vec<f64>| v.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| *x).collect::<Vec<f64>>();
    Trajectory {
        grid: traj.grid,
        times: pick(&traj.times),
        states: traj.states.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, s)| s.clone()).collect(),
        trace_left: pick(&traj.trace_left),
        trace_right: pick(&traj.trace_right),
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let p = &cfg.params;
    let seed = cfg.sampling.seed.unwrap_or(0);
    let json_out = cfg.output.format == Format::Json;
    match cfg.experiment {
        Experiment::Roots => {
            let z = C64::new(p.z.unwrap(), p.z_im.unwrap_or(0.0));
            let rt = solve_cubic(z)?;
            let res = rt.residual();
            let passed = res <= 1e-12 * (1.0 + z.norm());
            let art = if json_out {
                artifact("roots.json", to_json(&json!({ "schema": "roots/1", "roots": rt, "residual": res }))?)
            } else {
                let rows = rt.lambda.iter().enumerate().map(|(i, l)| vec![e(z.re), e(z.im), i.to_string(), e(l.re), e(l.im), e(res)]).collect();
                artifact("roots.csv", csv_rows(&["z_re", "z_im", "index", "re", "im", "residual"], rows))
            };
            Ok(RunOutcome { artifacts: vec![art], passed, summary: format!("roots at z = {z}: max residual {res:.2e}") })
        }
        Experiment::Spectrum => {
            let len = length_of(cfg, None)?;
            let zmax = p.zmax.unwrap_or(3.0);
            let points = p.points.unwrap_or(2001).max(2);
            let search = find_real_zeros_h(len, (-zmax, zmax))?;
            let mut line = Vec::with_capacity(points);
            for i in 0..points {
                let z = -zmax + 2.0 * zmax * i as f64 / (points - 1) as f64;
                let h = h_value(C64::new(z, 0.0), len)?;
                line.push(vec![e(z), e(h.norm()), e(h.re), e(h.im)]);
            }
            let passed = search.unresolved.is_empty() && search.zeros.iter().all(|z| z.dh_abs > SIMPLE_THRESHOLD);
            let mut arts = vec![artifact("h_line.csv", csv_rows(&["z", "abs_h", "re_h", "im_h"], line))];
            if json_out {
                arts.push(artifact("zeros.json", to_json(&json!({ "schema": "zeros/1", "L": len, "search": search }))?));
            } else {
                let rows = search.zeros.iter().map(|z| vec![e(z.z), z.multiplicity.to_string(), e(z.h_abs), e(z.dh_abs), format!("{:?}", z.source)]).collect();
                arts.push(artifact("zeros.csv", csv_rows(&["z", "multiplicity", "abs_h", "abs_dh", "source"], rows)));
            }
            Ok(RunOutcome { artifacts: arts, passed, summary: format!("{} real zeros of H in [-{zmax}, {zmax}] for L = {len}", search.zeros.len()) })
        }
        Experiment::Critical => {
            let pairs = enumerate_pairs(p.smax.unwrap())?;
            let art = if json_out {
                artifact("pairs.json", to_json(&json!({ "schema": "critical-pairs/1", "pairs": pairs }))?)
            } else {
                artifact("pairs.csv", pair_table_csv(&pairs)?)
            };
            Ok(RunOutcome { artifacts: vec![art], passed: true, summary: format!("{} critical pairs with k²+kl+l² ≤ {}", pairs.len(), p.smax.unwrap()) })
        }
        Experiment::Simulate => {
            let len = length_of(cfg, None)?;
            let t = cfg.grid.t.unwrap_or(1.0);
            let grid = Grid::new(len, cfg.grid.n.unwrap_or(128), cfg.grid.dt.unwrap_or(1e-3), t)?;
            let u = bump_control(t, 0.5 * t, 0.25 * t, p.amplitude.unwrap_or(1.0), grid.dt)?;
            let y0 = vec![0.0; grid.interior()];
            let traj = if p.nonlinear.unwrap_or(false) { solve_nonlinear(&grid, &y0, &u)? } else { solve_linear(&grid, &y0, &u, None)? };
            let sub = subsample(&traj, p.every.unwrap_or(10).max(1));
            let art = if json_out {
                artifact("trajectory.json", to_json(&json!({ "schema": "trajectory/1", "x": grid.xs(), "t": sub.times, "y": sub.states }))?)
            } else {
                artifact("trajectory.csv", trajectory_csv(&sub)?)
            };
            Ok(RunOutcome { artifacts: vec![art, artifact("control.csv", control_csv(&u)?)], passed: true, summary: format!("simulated {} steps, max ‖y‖ = {:.4e}", grid.steps(), traj.max_norm()) })
        }
        Experiment::Response => {
            let len = length_of(cfg, None)?;
            let grid = Grid::new(len, cfg.grid.n.unwrap_or(512), cfg.grid.dt.unwrap_or(1e-3), 0.0)?;
            let z = p.z.unwrap();
            let x = p.x.unwrap_or(0.5 * len);
            let r = empirical_frequency_response(&grid, z, x)?;
            let (e1, e2) = (r.relative_error(), r.relative_error_dx0());
            let passed = e1 <= 0.02 && e2 <= 0.05;
            let art = if json_out {
                artifact("response.json", to_json(&json!({ "schema": "response/1", "response": r, "relative_error": e1, "relative_error_dx0": e2 }))?)
            } else {
                let row = vec![e(z), e(x), e(r.empirical.re), e(r.empirical.im), e(r.closed_form.re), e(r.closed_form.im), e(e1), e(e2)];
                artifact("response.csv", csv_rows(&["z", "x", "re_empirical", "im_empirical", "re_closed", "im_closed", "rel_err", "rel_err_dx0"], vec![row]))
            };
            Ok(RunOutcome { artifacts: vec![art], passed, summary: format!("response at z = {z}: relative error {e1:.2e}, left-trace {e2:.2e}") })
        }
        Experiment::Hum => {
            let len = length_of(cfg, Some(2.0 * PI))?;
            let grid = Grid::new(len, cfg.grid.n.unwrap_or(256), cfg.grid.dt.unwrap_or(1e-3), cfg.grid.t.unwrap_or(2.0))?;
            let name = p.target.clone().unwrap_or_else(|| "sin".into());
            let target = hum_target(&name, len, &grid.xs());
            let r = hum_control(&grid, &target, p.tikhonov.unwrap_or(1e-8), p.project.unwrap_or(false))?;
            let summary = json!({
                "schema": "hum/1", "target": name, "L": len, "residual": r.residual, "converged": r.converged,
                "m_projection": r.m_projection, "alpha": r.alpha,
            });
            Ok(RunOutcome {
                artifacts: vec![artifact("hum.json", to_json(&summary)?), artifact("control.csv", control_csv(&r.control)?)],
                passed: r.converged,
                summary: format!("HUM target `{name}`: residual {:.3e} (M-projection {:.3})", r.residual, r.m_projection),
            })
        }
        Experiment::Nullctl => {
            let pair = pair_of(cfg)?;
            let t = cfg.grid.t.unwrap();
            let grid = sweep_grid(cfg).grid(&pair, t)?;
            let free = random_bump_control(&mut sample_rng(seed, 0, 0), t, t, grid.dt)?;
            let nc = NullControlPlan::projection(&grid)?.close(&free)?;
            let summary = json!({
                "schema": "nullctl/1", "pair": [pair.k, pair.l], "T": t, "seed": seed, "residual": nc.residual,
                "converged": nc.converged, "iterations": nc.iterations, "m_residual": nc.m_residual, "peak_norm": nc.peak_norm,
            });
            Ok(RunOutcome {
                artifacts: vec![artifact("nullctl.json", to_json(&summary)?), artifact("control.csv", control_csv(&nc.control)?)],
                passed: nc.converged,
                summary: format!("null control at T = {t}: residual {:.2e}", nc.residual),
            })
        }
        Experiment::Obstruction | Experiment::Monotone | Experiment::Sweep => {
            let pair = pair_of(cfg)?;
            let (default_t, default_n): (&[f64], usize) = match cfg.experiment {
                Experiment::Obstruction => (&[0.25, 0.5, 1.0], 50),
                Experiment::Monotone => (&[0.5, 0.25, 0.1], 20),
                _ => (&[0.25, 0.5, 1.0, 2.0, 4.0, 8.0], 20),
            };
            let t_list = p.t_list.clone().unwrap_or_else(|| default_t.to_vec());
            let n = cfg.sampling.n_samples.unwrap_or(default_n);
            let r = sign_definiteness_sweep(&pair, &t_list, n, seed, sweep_grid(cfg))?;
            let (passed, summary) = match cfg.experiment {
                Experiment::Obstruction => {
                    let ok = r.summaries.iter().all(|s| s.all_positive && s.max_parseval_rel <= 0.02);
                    let min = r.summaries.iter().map(|s| s.min_coercivity).fold(f64::INFINITY, f64::min);
                    (ok, format!("sign-definiteness over {} horizons: {}; min coercivity {min:.4}", t_list.len(), if ok { "all positive" } else { "mixed or inconsistent" }))
                }
                Experiment::Monotone => {
                    let mut s: Vec<_> = r.summaries.iter().map(|s| (s.t, s.median_ratio_gap)).collect();
                    s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
                    let monotone = s.windows(2).all(|w| w[1].1 < w[0].1);
                    let at_quarter = s.iter().find(|x| (x.0 - 0.25).abs() < 1e-12).map_or(true, |x| x.1 <= 0.5);
                    let gaps: Vec<String> = s.iter().map(|(t, g)| format!("T={t}: {g:.3}")).collect();
                    (monotone && at_quarter, format!("median |ratio − E|/|E|: {}", gaps.join(", ")))
                }
                _ => (true, format!("empirical threshold: {}", r.empirical_threshold.map_or("none".to_string(), |t| t.to_string()))),
            };
            let stem = match cfg.experiment {
                Experiment::Obstruction => "obstruction",
                Experiment::Monotone => "monotone",
                _ => "sweep",
            };
            Ok(RunOutcome { artifacts: report_artifacts(cfg, stem, &r)?, passed, summary })
        }
        Experiment::Steer => {
            let pair = pair_of(cfg)?;
            let t = p.t_factor.unwrap_or(1.2) * PI / pair.p;
            let d = SteerConfig::default();
            let sc = SteerConfig { n: cfg.grid.n.unwrap_or(d.n), dt_max: cfg.grid.dt.unwrap_or(d.dt_max), ..d };
            let plan = SteerPlan::new(&pair, t, sc)?;
            let rho = p.rho.unwrap_or(1e-3);
            let a = p.angle.unwrap_or(0.0).to_radians();
            let b = &plan.basis.functions;
            let y_t: Vec<f64> = b[0].iter().zip(&b[1]).map(|(u, v)| rho * (a.cos() * u + a.sin() * v)).collect();
            let y0 = vec![0.0; y_t.len()];
            let out = nonlinear_steer(&plan, &y0, &y_t, rho, p.iterations.unwrap_or(sc.max_iter))?;
            let r = &out.residuals;
            let best3 = r.iter().skip(1).take(3).cloned().fold(f64::INFINITY, f64::min);
            let reduction = if r[0] == 0.0 { f64::INFINITY } else { r[0] / best3 };
            let summary = json!({
                "schema": "steer/1", "pair": [pair.k, pair.l], "T": t, "rho": rho, "angle_deg": p.angle.unwrap_or(0.0),
                "residuals": r, "reduction_over_3": reduction, "diverged": out.diverged,
            });
            Ok(RunOutcome {
                artifacts: vec![artifact("steer.json", to_json(&summary)?), artifact("control.csv", control_csv(&out.control)?)],
                passed: !out.diverged && reduction >= 2.0,
                summary: format!("steering at T = {t:.4}: residuals {:?}", r.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()),
            })
        }
        Experiment::Toy => {
            let t = cfg.grid.t.unwrap();
            if p.check.unwrap_or(false) {
                let r = toy_obstruction_check(t, cfg.sampling.n_samples.unwrap_or(200), seed)?;
                let ok2 = !r.y2_claim_applies || r.y2_violations == 0;
                let ok3 = !r.y3_claim_applies || r.y3_violations == 0;
                let ok_opt = r.optimizer.as_ref().map_or(true, |o| o.found_positive);
                let mut arts = vec![artifact("toy.json", to_json(&json!({ "schema": "toy-report/1", "report": r }))?)];
                if !json_out {
                    arts.push(artifact("toy_samples.csv", r.to_csv()?));
                }
                let verdict = |applies: bool, v: usize| if applies { format!("{v} violations (claim applies)") } else { format!("{v} violations (claim does not apply)") };
                Ok(RunOutcome {
                    artifacts: arts,
                    passed: ok2 && ok3 && ok_opt,
                    summary: format!(
                        "T = {t}: y2 ≥ 0 check {}; y3 ≤ 0 check {}{}",
                        verdict(r.y2_claim_applies, r.y2_violations),
                        verdict(r.y3_claim_applies, r.y3_violations),
                        r.optimizer.as_ref().map_or(String::new(), |o| format!("; max y3 found {:.3e}", o.best_y3))
                    ),
                })
            } else {
                let c = p.amplitude.unwrap_or(1.0);
                let u = ControlSignal::from_fn(t, 1e-3 * t, |_| c);
                let s = toy_simulate(&u, t, 1e-3 * t)?;
                let (y2, y3) = toy_exact(&u, t);
                let gap = (s.y2 - y2).abs().max((s.y3 - y3).abs());
                let row = vec![e(t), e(c), e(s.y1), e(s.y2), e(s.y3), e(y2), e(y3)];
                Ok(RunOutcome {
                    artifacts: vec![artifact("toy.csv", csv_rows(&["T", "c", "y1", "y2_rk4", "y3_rk4", "y2_exact", "y3_exact"], vec![row]))],
                    passed: gap <= 1e-7,
                    summary: format!("toy state at T = {t}: y2 = {:.10}, y3 = {:.10} (RK4 vs exact {gap:.1e})", s.y2, s.y3),
                })
            }
        }
    }
}

/// Runs the experiment and writes artifacts plus manifest.json into the output directory.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut listed = Vec::new();
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
        listed.push(json!({ "name": a.name, "sha256": sha256_hex(&a.bytes) }));
    }
    let canonical = cfg.canonical()?;
    let manifest = json!({
        "schema": MANIFEST_SCHEMA,
        "experiment": cfg.experiment,
        "config": cfg,
        "config_hash": sha256_hex(canonical.as_bytes()),
        "library_version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "passed": outcome.passed,
        "artifacts": listed,
    });
    std::fs::write(dir.join("manifest.json"), to_json(&manifest)?)?;
    Ok(outcome)
}
