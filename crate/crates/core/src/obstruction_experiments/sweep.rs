use super::{parseval_quadratic, quadratic_form_with, BTable};
use crate::control_tools::{bump_control, sobolev_norm, ControlSignal, NPlan, NullControlPlan};
use crate::critical_lengths::{b_asymptotic_constant, CriticalPair};
use crate::error::{domain, KdvError, Result};
use crate::kdv_solver::{Grid, LinearStepper};
use crate::numerics::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: &str = "obstruction-report/1";

/// Grid used for a control horizon T: N cells, dt = T/steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: usize,
    pub steps: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { n: 256, steps: 2000 }
    }
}

impl SweepGrid {
    pub fn grid(&self, pair: &CriticalPair, t: f64) -> Result<Grid> {
        Grid::new(pair.len, self.n, t / self.steps as f64, t)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for (seed, horizon index, sample id).
pub fn sample_rng(seed: u64, t_index: usize, sample: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix((t_index as u64) << 32 | sample as u64)))
}

/// Sum of 3–6 bumps supported in (0, support), widths log-uniform in
/// [support/50, support/6], amplitudes uniform in [−1, 1]; horizon `t_final`.
pub fn random_bump_control<R: Rng>(rng: &mut R, support: f64, t_final: f64, dt: f64) -> Result<ControlSignal> {
    let atoms = rng.gen_range(3..=6);
    let mut u = ControlSignal::zeros(t_final, dt);
    let (lo, hi) = ((support / 50.0).ln(), (support / 6.0).ln());
    for _ in 0..atoms {
        let w = rng.gen_range(lo..hi).exp();
        let margin = w + 2.0 * dt;
        let c = rng.gen_range(margin..(support - margin));
        let a = rng.gen_range(-1.0..1.0);
        u = u.add(&bump_control(t_final, c, w, a, dt)?)?;
    }
    // bumps must not reach the closing window
    let k = (support / dt).round() as usize;
    for s in u.samples.iter_mut().skip(k) {
        *s = 0.0;
    }
    Ok(u)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub sample: usize,
    pub null_residual: f64,
    pub n_value: f64,
    pub hs_norm: f64,
    pub i_psi: f64,
    pub i_complex: C64,
    /// I_Ψ / ‖u‖²_{H^{−2/3}}.
    pub coercivity: f64,
    /// I_complex / N(u)².
    pub ratio: C64,
    /// |ratio − E| / |E|.
    pub ratio_gap: f64,
    /// |ratio − E/5| / |E/5|, against the large-|z| limit of |z|^{4/3}∫B.
    pub ratio_gap_limit: f64,
    pub parseval: C64,
    /// |I_complex − parseval| / |parseval|.
    pub parseval_rel: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub t: f64,
    pub accepted: usize,
    pub skipped: usize,
    pub positive: usize,
    pub min_coercivity: f64,
    pub median_ratio_gap: f64,
    pub median_ratio_gap_limit: f64,
    pub max_parseval_rel: f64,
    pub all_positive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairInfo {
    pub k: u32,
    pub l: u32,
    #[serde(rename = "L")]
    pub len: f64,
    pub p: f64,
    #[serde(rename = "E")]
    pub e: C64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub schema: String,
    pub pair: PairInfo,
    pub seed: u64,
    pub n_samples: usize,
    pub grid: SweepGrid,
    pub t_list: Vec<f64>,
    pub records: Vec<SampleRecord>,
    pub summaries: Vec<HorizonSummary>,
    /// Smallest T whose samples had mixed signs, if any.
    pub empirical_threshold: Option<f64>,
}

/// Shared per-horizon machinery.
pub struct HorizonContext {
    pub t: f64,
    pub grid: Grid,
    pub closer: NullControlPlan,
    pub stepper: LinearStepper,
    pub nplan: NPlan,
}

impl HorizonContext {
    pub fn new(pair: &CriticalPair, sg: SweepGrid, t: f64, gamma: f64) -> Result<Self> {
        let grid = sg.grid(pair, t)?;
        let closer = NullControlPlan::projection(&grid)?;
        let stepper = LinearStepper::for_grid(&grid)?;
        let nplan = NPlan::new(pair, &ControlSignal::zeros(t, grid.dt), gamma)?;
        Ok(HorizonContext { t, grid, closer, stepper, nplan })
    }
}

/// Measure one null control: returns the record (without skipping logic).
pub fn measure(ctx: &HorizonContext, pair: &CriticalPair, table: &BTable, u: &ControlSignal, null_residual: f64, sample: usize) -> Result<SampleRecord> {
    let field = pair.psi();
    let q = quadratic_form_with(&ctx.stepper, u, &field, &ctx.grid)?;
    let n_value = ctx.nplan.value(u)?;
    if n_value < 1e-12 {
        return Err(KdvError::Domain("N(u) below 1e-12".into()));
    }
    let hs = sobolev_norm(u, -2.0 / 3.0)?.value;
    let parseval = parseval_quadratic(u, table)?;
    let ratio = q.i_complex / (n_value * n_value);
    Ok(SampleRecord {
        t: ctx.t,
        sample,
        null_residual,
        n_value,
        hs_norm: hs,
        i_psi: q.i_psi,
        i_complex: q.i_complex,
        coercivity: q.i_psi / (hs * hs),
        ratio,
        ratio_gap: (ratio - pair.e).norm() / pair.e.norm(),
        ratio_gap_limit: (ratio - b_asymptotic_constant(pair)).norm() / b_asymptotic_constant(pair).norm(),
        parseval,
        parseval_rel: (q.i_complex - parseval).norm() / parseval.norm(),
    })
}

/// ∫B table wide enough for the finest grid in a sweep.
pub fn table_for(pair: &CriticalPair, sg: SweepGrid, t_list: &[f64]) -> Result<BTable> {
    let t_min = t_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let dt = t_min / sg.steps as f64;
    BTable::new(&pair.psi(), 3.0 * std::f64::consts::PI / dt + 1.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(t: f64, records: &[SampleRecord], skipped: usize) -> HorizonSummary {
    let positive = records.iter().filter(|r| r.i_psi > 0.0).count();
    HorizonSummary {
        t,
        accepted: records.len(),
        skipped,
        positive,
        min_coercivity: records.iter().map(|r| r.coercivity).fold(f64::INFINITY, f64::min),
        median_ratio_gap: median(records.iter().map(|r| r.ratio_gap).collect()),
        median_ratio_gap_limit: median(records.iter().map(|r| r.ratio_gap_limit).collect()),
        max_parseval_rel: records.iter().map(|r| r.parseval_rel).fold(0.0, f64::max),
        all_positive: !records.is_empty() && positive == records.len(),
    }
}

/// Random null controls per horizon: bump superpositions on (0, T) projected
/// onto the null controls.
pub fn sign_definiteness_sweep(pair: &CriticalPair, t_list: &[f64], n_samples: usize, seed: u64, sg: SweepGrid) -> Result<ObstructionReport> {
    if !pair.obstruction_applies {
        return domain(format!("pair ({}, {}) has E = 0: no obstruction to test", pair.k, pair.l));
    }
    let table = table_for(pair, sg, t_list)?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (ti, &t) in t_list.iter().enumerate() {
        let ctx = HorizonContext::new(pair, sg, t, 0.0)?;
        let outcomes: Vec<Option<SampleRecord>> = (0..n_samples)
            .into_par_iter()
            .map(|s| -> Result<Option<SampleRecord>> {
                let mut rng = sample_rng(seed, ti, s);
                let free = random_bump_control(&mut rng, t, t, ctx.grid.dt)?;
                let nc = ctx.closer.close(&free)?;
                if !nc.converged {
                    return Ok(None);
                }
                match measure(&ctx, pair, &table, &nc.control, nc.residual, s) {
                    Ok(r) => Ok(Some(r)),
                    Err(KdvError::NotDecayed { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let skipped = outcomes.iter().filter(|o| o.is_none()).count();
        let recs: Vec<SampleRecord> = outcomes.into_iter().flatten().collect();
        summaries.push(summarize(t, &recs, skipped));
        records.extend(recs);
    }
    let mut mixed: Vec<f64> = summaries.iter().filter(|s| !s.all_positive && s.accepted > 0).map(|s| s.t).collect();
    mixed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ObstructionReport {
        schema: REPORT_SCHEMA.to_string(),
        pair: PairInfo { k: pair.k, l: pair.l, len: pair.len, p: pair.p, e: pair.e },
        seed,
        n_samples,
        grid: sg,
        t_list: t_list.to_vec(),
        records,
        summaries,
        empirical_threshold: mixed.first().copied(),
    })
}

impl ObstructionReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| KdvError::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: ObstructionReport = serde_json::from_str(s).map_err(|e| KdvError::Parse(e.to_string()))?;
        if r.schema != REPORT_SCHEMA {
            return Err(KdvError::Parse(format!("unsupported schema {}", r.schema)));
        }
        Ok(r)
    }

    /// Flat table, one row per sample.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| KdvError::Parse(e.to_string());
        w.write_record([
            "T", "sample", "null_residual", "N", "hs_norm", "I_psi", "re_I_complex", "im_I_complex", "coercivity", "re_ratio", "im_ratio", "ratio_gap",
            "ratio_gap_limit", "parseval_rel",
        ])
        .map_err(err)?;
        for r in &self.records {
            let f = |v: f64| format!("{v:.12e}");
            w.write_record([
                f(r.t),
                r.sample.to_string(),
                f(r.null_residual),
                f(r.n_value),
                f(r.hs_norm),
                f(r.i_psi),
                f(r.i_complex.re),
                f(r.i_complex.im),
                f(r.coercivity),
                f(r.ratio.re),
                f(r.ratio.im),
                f(r.ratio_gap),
                f(r.ratio_gap_limit),
                f(r.parseval_rel),
            ])
            .map_err(err)?;
        }
        let b = w.into_inner().map_err(|e| KdvError::Parse(e.to_string()))?;
        String::from_utf8(b).map_err(|e| KdvError::Parse(e.to_string()))
    }
}

/// I_complex / N(u)² for a null control on the grid horizon.
pub fn monotone_ratio(u: &ControlSignal, pair: &CriticalPair, gamma: f64, grid: &Grid) -> Result<C64> {
    let st = LinearStepper::for_grid(grid)?;
    let q = quadratic_form_with(&st, u, &pair.psi(), grid)?;
    let n = NPlan::new(pair, u, gamma)?.value(u)?;
    if n < 1e-12 {
        return Err(KdvError::Domain(format!("N(u) = {n:e} is below 1e-12")));
    }
    Ok(q.i_complex / (n * n))
}

/// Median ratio gap per horizon over `n_controls` random null controls.
pub fn monotone_ratio_sweep(pair: &CriticalPair, t_list: &[f64], n_controls: usize, seed: u64, sg: SweepGrid) -> Result<ObstructionReport> {
    sign_definiteness_sweep(pair, t_list, n_controls, seed, sg)
}
