//! The acceptance scenarios and their pass/fail checks, shared by the test
//! suite and `soseq verify --acceptance`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::cost_gradient;
use crate::cost_builder::{CostCoefficients, CostMeta};
use crate::error::{Error, Result};
use crate::extraction::{extract_pp1, extract_pp2, ExtractionSettings};
use crate::harness::config::{AlgorithmSpec, BlindCost, ChannelSpec, ScenarioConfig};
use crate::harness::output::{power_mean_db, ResultRow};
use crate::harness::properties;
use crate::harness::runner::{run_scenario, RunOptions, ScenarioResult};
use crate::lifting::{qvec, svec, LiftedIndexMap};
use crate::sdp_solver::{solve, SolveStatus, SolverSettings};
use crate::sos_sdp::{assemble, assemble_general, SosSdpProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} ({}): {verdict}: {}", self.id, self.name, self.detail)
    }
}

pub const TABLE1_CO_CMA_DB: f64 = -10.11;
pub const TABLE1_OPTIMUM_DB: f64 = -10.18;

/// The certificate check holds `τ` to 1e-6 in absolute terms, while the
/// default tolerances are relative to the cost scale (which reaches ~10^2
/// for pilot costs); two more digits cover it.
pub fn acceptance_solver() -> SolverSettings {
    SolverSettings {
        eps_gap: 1e-9,
        eps_feas: 1e-10,
        ..SolverSettings::default()
    }
}

fn preset(name: &str) -> ChannelSpec {
    ChannelSpec::Preset { name: name.into() }
}

fn base(scenario: &str, channel: &str, constellation: &str, samples: usize, snr_db: f64, runs: usize) -> ScenarioConfig {
    ScenarioConfig {
        scenario: scenario.into(),
        channel: preset(channel),
        constellation: constellation.into(),
        samples,
        snr_db,
        equalizer_order: 5,
        runs,
        seed: 2024,
        algorithms: Vec::new(),
        solver: acceptance_solver(),
        extraction: ExtractionSettings::default(),
    }
}

/// Random 3-tap Rayleigh SISO channels, noiseless QPSK, all cost families
/// and the known-channel optimum.
pub fn table1_config() -> ScenarioConfig {
    ScenarioConfig {
        algorithms: vec![
            AlgorithmSpec::co(BlindCost::Cma),
            AlgorithmSpec {
                alpha: 0.5,
                ..AlgorithmSpec::co(BlindCost::Swa)
            },
            AlgorithmSpec {
                lambda_p: 2.0,
                ..AlgorithmSpec::co(BlindCost::Med)
            },
            AlgorithmSpec::optimum(),
        ],
        ..base("table1", "rayleigh3", "qpsk", 1000, f64::INFINITY, 50)
    }
}

/// Fixed 7-tap channel, 16-QAM at 14 dB: relaxation against descent from
/// the spike `[0 0 1 0 0 0]`.
pub fn bgd_config() -> ScenarioConfig {
    ScenarioConfig {
        algorithms: vec![
            AlgorithmSpec::co(BlindCost::Cma),
            AlgorithmSpec {
                step: 1e-3,
                spike: 2,
                ..AlgorithmSpec::bgd(BlindCost::Cma)
            },
        ],
        ..base("co-vs-bgd", "dogancay7", "16qam", 1000, 14.0, 50)
    }
}

/// Same channel with a short frame: blind against semiblind.
pub fn semiblind_config() -> ScenarioConfig {
    ScenarioConfig {
        algorithms: vec![
            AlgorithmSpec::co(BlindCost::Cma),
            AlgorithmSpec::co(BlindCost::Cma).semiblind(0.5, 8),
        ],
        ..base("semiblind-short", "dogancay7", "16qam", 200, 14.0, 50)
    }
}

/// Sequential separation of the 4x4 instantaneous mixture.
pub fn separation_config() -> ScenarioConfig {
    ScenarioConfig {
        equalizer_order: 0,
        algorithms: vec![AlgorithmSpec {
            lambda_cr: 1.0,
            delta: 0,
            ..AlgorithmSpec::co(BlindCost::Cma)
        }],
        ..base("separation", "mix4x4", "qpsk", 500, 10.0, 20)
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    run_scenario(
        cfg,
        RunOptions {
            timing: false,
            ..RunOptions::default()
        },
    )
}

fn rows_of<'a>(r: &'a ScenarioResult, algorithm: &str) -> Vec<&'a ResultRow> {
    r.rows.iter().filter(|row| row.algorithm == algorithm).collect()
}

/// Mean ISI of `algorithm`, averaged as linear power and reported in dB.
/// This is the averaging that reproduces the published table values; the
/// dB-domain mean is 5 to 6 dB lower on the same runs. Failed rows count as
/// 0 dB, so failures can only hurt.
pub fn mean_isi_db(r: &ScenarioResult, algorithm: &str) -> Option<f64> {
    let v: Vec<f64> = rows_of(r, algorithm).iter().map(|row| row.isi_db.unwrap_or(0.0)).collect();
    power_mean_db(&v)
}

fn failures(r: &ScenarioResult) -> usize {
    r.rows.iter().filter(|row| row.isi_db.is_none()).count()
}

fn fmt_db(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.3} dB"))
}

pub fn criterion1(r: &ScenarioResult) -> CriterionOutcome {
    let co = mean_isi_db(r, "co-cma-pp2");
    let opt = mean_isi_db(r, "optimum");
    let ok = |x: Option<f64>, target: f64| x.is_some_and(|v| (v - target).abs() <= 1.5);
    CriterionOutcome {
        id: 1,
        name: "random Rayleigh SISO, QPSK, noiseless",
        passed: ok(co, TABLE1_CO_CMA_DB) && ok(opt, TABLE1_OPTIMUM_DB),
        detail: format!(
            "co-cma-pp2 {} (target {TABLE1_CO_CMA_DB} ± 1.5), optimum {} (target {TABLE1_OPTIMUM_DB} ± 1.5), {} failed rows",
            fmt_db(co),
            fmt_db(opt),
            failures(r)
        ),
    }
}

pub fn criterion2(r: &ScenarioResult) -> CriterionOutcome {
    let names = ["co-cma-pp2", "co-swa-pp2", "co-med-pp2"];
    let means: Vec<Option<f64>> = names.iter().map(|n| mean_isi_db(r, n)).collect();
    let spread = if means.iter().all(Option::is_some) {
        let v: Vec<f64> = means.iter().flatten().copied().collect();
        Some(v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    CriterionOutcome {
        id: 2,
        name: "cost families agree",
        passed: spread.is_some_and(|s| s <= 0.3),
        detail: format!(
            "cma {}, swa {}, med {}, spread {} (bound 0.3 dB)",
            fmt_db(means[0]),
            fmt_db(means[1]),
            fmt_db(means[2]),
            fmt_db(spread)
        ),
    }
}

pub fn criterion3(r: &ScenarioResult) -> CriterionOutcome {
    let co = mean_isi_db(r, "co-cma-pp2");
    let bgd = mean_isi_db(r, "bgd-cma");
    let margin = co.zip(bgd).map(|(c, b)| b - c);
    CriterionOutcome {
        id: 3,
        name: "relaxation beats gradient descent",
        passed: margin.is_some_and(|m| m >= 1.0),
        detail: format!(
            "co-cma-pp2 {}, bgd-cma {}, margin {} (need >= 1 dB)",
            fmt_db(co),
            fmt_db(bgd),
            fmt_db(margin)
        ),
    }
}

pub fn criterion4(r: &ScenarioResult) -> CriterionOutcome {
    let blind = mean_isi_db(r, "co-cma-pp2");
    let sb = mean_isi_db(r, "co-sb-cma-pp2");
    CriterionOutcome {
        id: 4,
        name: "semiblind gain at short frames",
        passed: blind.zip(sb).is_some_and(|(b, s)| s < b),
        detail: format!("co-cma-pp2 {}, co-sb-cma-pp2 {}", fmt_db(blind), fmt_db(sb)),
    }
}

/// Minimum of a two-variable polynomial over `[-r, r]^2` by exhaustive
/// grid search followed by damped Newton polishing of the best cells.
pub fn brute_force_min(c: &CostCoefficients, r: f64, grid: usize) -> f64 {
    let step = 2.0 * r / (grid - 1) as f64;
    let mut cells: Vec<(f64, [f64; 2])> = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let u = [-r + i as f64 * step, -r + j as f64 * step];
            cells.push((c.evaluate(&u), u));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells
        .iter()
        .take(16)
        .map(|&(f, u)| polish(c, u).min(f))
        .fold(f64::INFINITY, f64::min)
}

fn polish(c: &CostCoefficients, mut u: [f64; 2]) -> f64 {
    let mut f = c.evaluate(&u);
    for _ in 0..200 {
        let g = cost_gradient(c, &u);
        let h = 1e-6;
        let mut hess = DMatrix::zeros(2, 2);
        for k in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let col = (cost_gradient(c, &up) - cost_gradient(c, &dn)) / (2.0 * h);
            hess.set_column(k, &col);
        }
        let hess = 0.5 * (&hess + hess.transpose());
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let cand = [u[0] + t * dir[0], u[1] + t * dir[1]];
            let fc = c.evaluate(&cand);
            if fc < f {
                u = cand;
                f = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || g.norm() < 1e-14 {
            break;
        }
    }
    f
}

/// Random coercive even quartic in two variables: `A22 = B B^T + I/2`.
pub fn random_quartic(rng: &mut ChaCha8Rng) -> Result<CostCoefficients> {
    let b = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a22 = &b * b.transpose() / 3.0 + DMatrix::identity(3, 3) * 0.5;
    let a20 = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a00 = rng.sample::<f64, _>(StandardNormal);
    CostCoefficients::new(a22, a20, a00, CostMeta::default())
}

/// `(u1^2 + u2^2 - 1)^2`, minimum 0 on the unit circle.
pub fn circle_quartic() -> Result<CostCoefficients> {
    let map = LiftedIndexMap::new(2);
    let s = DVector::from_iterator(3, map.pairs().iter().map(|&(i, j)| if i == j { 1.0 } else { 0.0 }));
    CostCoefficients::new(&s * s.transpose(), -&s, 1.0, CostMeta::default())
}

/// Radius outside of which `f(u) > f(0)`: with `|qvec(u)| >= (√3/2)|u|^2`
/// and `A22 >= λ I`, `f(u) >= λ|v|^2 - 2|A20||v| + A00`.
fn search_radius(c: &CostCoefficients) -> f64 {
    let lmin = c.a22.clone().symmetric_eigen().eigenvalues.min();
    let vmax = 2.0 * c.a20.norm() / lmin;
    (vmax * 2.0 / 3f64.sqrt()).sqrt().max(1.5) * 1.05
}

/// Same quartic part as `c` with a negative semidefinite degree-2 part
/// `-u^T B B^T u`, the sign structure of every blind cost.
pub fn blind_like(c: &CostCoefficients, rng: &mut ChaCha8Rng) -> Result<CostCoefficients> {
    let b = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a20 = -svec(&(&b * b.transpose()))? * 0.5;
    CostCoefficients::new(c.a22.clone(), a20, c.a00, CostMeta::default())
}

fn solved_tau(p: Result<SosSdpProblem>) -> Result<f64> {
    let sol = solve(&p?, &SolverSettings::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::InvalidInput(format!("solver status {}", sol.status.as_str())));
    }
    Ok(sol.tau)
}

/// Tightness against brute force. Arbitrary even quartics use the general
/// formulation; the reduced one is checked on blind-like quartics, where it
/// is exact, and as a valid lower bound everywhere.
pub fn criterion5() -> CriterionOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut errors = Vec::new();
    let mut general = vec![circle_quartic()];
    general.extend((0..20).map(|_| random_quartic(&mut rng)));
    let general: Vec<CostCoefficients> = general
        .into_iter()
        .enumerate()
        .filter_map(|(k, c)| c.map_err(|e| errors.push(format!("case {k}: {e}"))).ok())
        .collect();
    let blind: Vec<CostCoefficients> = general
        .iter()
        .skip(1)
        .filter_map(|c| blind_like(c, &mut rng).map_err(|e| errors.push(e.to_string())).ok())
        .collect();
    let (mut worst_general, mut worst_reduced, mut bound_violation) = (0.0f64, 0.0f64, 0.0f64);
    let mut reduced_tight = 0;
    for (k, c) in general.iter().enumerate() {
        let brute = brute_force_min(c, search_radius(c), 400);
        match (solved_tau(assemble_general(c)), solved_tau(assemble(c))) {
            (Ok(tg), Ok(tr)) => {
                worst_general = worst_general.max((tg - brute).abs());
                bound_violation = bound_violation.max(tr - brute);
                reduced_tight += usize::from((tr - brute).abs() <= 1e-4);
            }
            (Err(e), _) | (_, Err(e)) => errors.push(format!("case {k}: {e}")),
        }
    }
    for (k, c) in blind.iter().enumerate() {
        let brute = brute_force_min(c, search_radius(c), 400);
        match solved_tau(assemble(c)) {
            Ok(t) => worst_reduced = worst_reduced.max((t - brute).abs()),
            Err(e) => errors.push(format!("blind-like case {k}: {e}")),
        }
    }
    CriterionOutcome {
        id: 5,
        name: "relaxation is tight on two-variable quartics",
        passed: errors.is_empty() && worst_general <= 1e-4 && worst_reduced <= 1e-4 && bound_violation <= 1e-4,
        detail: format!(
            "{} general quartics: worst |tau - brute force| {worst_general:.2e}; {} blind-like quartics, reduced form: worst {worst_reduced:.2e} (bound 1e-4); reduced form on general quartics tight on {reduced_tight}/{}, max excess over brute force {bound_violation:.1e}{}",
            general.len(),
            blind.len(),
            general.len(),
            if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join("; ")) }
        ),
    }
}

/// Certificate and tightness over every row that carries a bound.
pub fn criterion6(results: &[&ScenarioResult]) -> CriterionOutcome {
    let rows: Vec<&ResultRow> = results.iter().flat_map(|r| r.rows.iter()).filter(|r| r.tau.is_some()).collect();
    let mut violations = 0;
    let mut tight = 0;
    let mut tight_raw = 0;
    for r in &rows {
        let tau = r.tau.expect("filtered");
        let (Some(f), Some(fr)) = (r.cost, r.cost_refined) else {
            violations += 1;
            continue;
        };
        if tau > f + 1e-6 || tau > fr + 1e-6 {
            violations += 1;
        }
        let tol = 1e-3 * (1.0 + tau.abs());
        tight += usize::from(fr - tau <= tol);
        tight_raw += usize::from(f - tau <= tol);
    }
    let n = rows.len().max(1) as f64;
    let frac = tight as f64 / n;
    CriterionOutcome {
        id: 6,
        name: "lower-bound certificate and tightness",
        passed: !rows.is_empty() && violations == 0 && frac >= 0.9,
        detail: format!(
            "{} solved instances, {violations} bound violations, tight at best gain {:.1}%, tight at raw extracted scale {:.1}%",
            rows.len(),
            100.0 * frac,
            100.0 * tight_raw as f64 / n
        ),
    }
}

pub fn criterion7() -> CriterionOutcome {
    let outcomes = properties::all(7);
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} [{}]", o.name, o.detail))
        .collect();
    CriterionOutcome {
        id: 7,
        name: "property suites",
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks passed", outcomes.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    }
}

pub fn criterion8(r: &ScenarioResult) -> CriterionOutcome {
    let mut bad_runs = Vec::new();
    let runs: std::collections::BTreeSet<usize> = r.rows.iter().map(|row| row.run).collect();
    for run in &runs {
        let mut sources: Vec<Option<usize>> = r.rows.iter().filter(|row| row.run == *run).map(|row| row.source).collect();
        let n = sources.len();
        sources.sort();
        sources.dedup();
        if n != 4 || sources.len() != 4 || sources.contains(&None) {
            bad_runs.push(*run);
        }
    }
    let ncci: Vec<f64> = r.rows.iter().map(|row| row.ncci_db.unwrap_or(0.0)).collect();
    let mean = power_mean_db(&ncci);
    CriterionOutcome {
        id: 8,
        name: "sequential separation of a 4x4 mixture",
        passed: bad_runs.is_empty() && mean.is_some_and(|m| m <= -7.0),
        detail: format!(
            "mean NCCI {} (bound -7 dB), runs without four distinct sources: {:?}",
            fmt_db(mean),
            bad_runs
        ),
    }
}

/// Null-space basis whose vectors all have a zero constant entry.
pub fn hazard_basis() -> DMatrix<f64> {
    let a = qvec(&[1.0, 0.5]);
    let b = qvec(&[-0.3, 1.0]);
    let mut m = DMatrix::zeros(4, 2);
    m.view_mut((0, 0), (3, 1)).copy_from(&a);
    m.view_mut((0, 1), (3, 1)).copy_from(&b);
    m.qr().q()
}

pub fn criterion9() -> CriterionOutcome {
    let v = hazard_basis();
    let settings = ExtractionSettings::default();
    let pp1 = extract_pp1(&v, &settings);
    let b = DVector::from_vec(vec![1.0, 0.0, 1.0]);
    let pp2 = extract_pp2(&v, &b, 1.0, &settings);
    let pp1_hazard = matches!(pp1, Err(Error::DivisionHazard { .. }));
    let pp2_valid = pp2
        .as_ref()
        .is_ok_and(|e| e.u.iter().all(|x| x.is_finite()) && (qvec(e.u.as_slice()).dot(&b) - 1.0).abs() < 1e-9);
    CriterionOutcome {
        id: 9,
        name: "power rescaling avoids the division hazard",
        passed: pp1_hazard && pp2_valid,
        detail: format!(
            "pp1: {}, pp2: {}",
            match &pp1 {
                Err(e) => e.to_string(),
                Ok(_) => "returned a vector".into(),
            },
            match &pp2 {
                Ok(e) => format!("u = {:?}", e.u.as_slice()),
                Err(e) => e.to_string(),
            }
        ),
    }
}

fn scenario_failure(id: u8, name: &'static str, e: &Error) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name,
        passed: false,
        detail: format!("scenario failed: {e}"),
    }
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    let t1 = run(&table1_config());
    let t3 = run(&bgd_config());
    let t4 = run(&semiblind_config());
    let t8 = run(&separation_config());
    let mut out = Vec::new();
    match &t1 {
        Ok(r) => {
            out.push(criterion1(r));
            out.push(criterion2(r));
        }
        Err(e) => {
            out.push(scenario_failure(1, "random Rayleigh SISO, QPSK, noiseless", e));
            out.push(scenario_failure(2, "cost families agree", e));
        }
    }
    out.push(match &t3 {
        Ok(r) => criterion3(r),
        Err(e) => scenario_failure(3, "relaxation beats gradient descent", e),
    });
    out.push(match &t4 {
        Ok(r) => criterion4(r),
        Err(e) => scenario_failure(4, "semiblind gain at short frames", e),
    });
    out.push(criterion5());
    let solved: Vec<&ScenarioResult> = [&t1, &t3, &t4].into_iter().filter_map(|r| r.as_ref().ok()).collect();
    out.push(criterion6(&solved));
    out.push(criterion7());
    out.push(match &t8 {
        Ok(r) => criterion8(r),
        Err(e) => scenario_failure(8, "sequential separation of a 4x4 mixture", e),
    });
    out.push(criterion9());
    out
}
