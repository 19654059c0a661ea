//! Monte Carlo orchestration: one independent pipeline per run.

use std::collections::HashMap;
use std::time::Instant;

use crate::baselines::{optimal_linear_equalizer, run_bgd, spike_init};
use crate::cost_builder::{
    add_penalty, best_gain, cma_cost, cross_corr_penalty, med_cost, semiblind, swa_cost, training_cost, CostCoefficients,
    Pilots,
};
use crate::error::{Error, Result};
use crate::extraction::{extract_pp1, extract_pp2, null_space_basis, u_to_equalizer, ExtractionSettings};
use crate::harness::config::{AlgorithmSpec, BlindCost, Method, PostProcessing, ScenarioConfig};
use crate::harness::output::{summarize, ResultRow, Summary};
use crate::lifting::{estimate_moments, MomentModel};
use crate::metrics::{dominant_tap, isi, ncci, ser, to_db};
use crate::sdp_solver::{solve, SolveStatus};
use crate::signal_model::{
    combined_response, equalize, generate_frame, ChannelModel, Constellation, ConstellationStats, EqualizerBank,
    SignalFrame, C64,
};
use crate::sos_sdp::{assemble, SosSdpProblem};

/// How runs are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs spread over the rayon pool; falls back to sequential when the
    /// `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Self::Parallel
        } else {
            Self::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub execution: Execution,
    /// Record wall time per algorithm; off gives byte-identical outputs.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of run `run`, recorded in every row.
pub fn run_seed(base: u64, run: usize) -> u64 {
    splitmix64(base.wrapping_add(run as u64))
}

const CHANNEL_SALT: u64 = 0xc4a2_7e11_0000_0001;

/// Everything an algorithm needs from one run.
pub struct RunData {
    pub run: usize,
    pub seed: u64,
    pub channel: ChannelModel,
    pub frame: SignalFrame,
    pub moments: MomentModel,
    pub constellation: Constellation,
    pub stats: ConstellationStats,
}

impl RunData {
    pub fn new(cfg: &ScenarioConfig, run: usize) -> Result<Self> {
        let seed = run_seed(cfg.seed, run);
        let channel = cfg.channel.realize(splitmix64(seed ^ CHANNEL_SALT))?;
        let constellation = cfg.constellation()?;
        let frame = generate_frame(&constellation, &channel, cfg.samples, cfg.snr_db, seed)?;
        let moments = estimate_moments(&frame, cfg.equalizer_order)?;
        let stats = constellation.stats();
        Ok(Self {
            run,
            seed,
            channel,
            frame,
            moments,
            constellation,
            stats,
        })
    }
}

pub fn blind_cost(spec: &AlgorithmSpec, m: &MomentModel, stats: &ConstellationStats) -> Result<CostCoefficients> {
    match spec.cost {
        BlindCost::Cma => cma_cost(m, stats.r2),
        BlindCost::Swa => swa_cost(m, stats.sigma_s2, stats.kurtosis, spec.alpha),
        BlindCost::Med => med_cost(m, stats.sigma_s2, spec.lambda_p),
    }
}

/// Outcome of minimizing one stream's cost.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFit {
    pub w: Vec<C64>,
    pub tau: Option<f64>,
    pub cost: f64,
    pub cost_refined: f64,
    pub solver_iters: usize,
    pub extraction_iters: usize,
    pub status: &'static str,
}

/// Solves the SOS relaxation of `cost` and extracts an equalizer.
pub fn fit_co(
    cost: &CostCoefficients,
    cfg: &ScenarioConfig,
    spec: &AlgorithmSpec,
    data: &RunData,
    stream: usize,
) -> Result<StreamFit> {
    let problem = assemble(cost)?;
    let sol = solve(&problem, &cfg.solver)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::InvalidInput("relaxation reported infeasible".into()));
    }
    let settings = ExtractionSettings {
        init_seed: splitmix64(data.seed ^ cfg.extraction.init_seed ^ stream as u64),
        ..cfg.extraction
    };
    let basis = null_space_basis(&sol.g, settings.gamma)?;
    let ext = match spec.post {
        PostProcessing::Pp1 => extract_pp1(&basis, &settings)?,
        PostProcessing::Pp2 => extract_pp2(&basis, &data.moments.b, data.stats.sigma_s2, &settings)?,
    };
    let u = ext.u.as_slice();
    let status = if sol.status == SolveStatus::MaxIters {
        "solver-max-iters"
    } else if !ext.converged {
        "extraction-not-converged"
    } else {
        "ok"
    };
    Ok(StreamFit {
        w: u_to_equalizer(u)?,
        tau: Some(sol.tau),
        cost: cost.evaluate(u),
        cost_refined: best_gain(cost, u).1,
        solver_iters: sol.iters,
        extraction_iters: ext.iters,
        status,
    })
}

/// Gradient descent from a unit spike on the real part of one tap.
pub fn fit_bgd(cost: &CostCoefficients, cfg: &ScenarioConfig, spec: &AlgorithmSpec, stream: usize) -> Result<StreamFit> {
    let n2 = cost.n2();
    let spike = (spec.spike + stream * (cfg.equalizer_order + 1)) % (n2 / 2);
    let u0 = spike_init(n2, spike)?;
    let r = run_bgd(cost, &u0, &spec.bgd_settings())?;
    let u = r.u.as_slice();
    Ok(StreamFit {
        w: u_to_equalizer(u)?,
        tau: None,
        cost: cost.evaluate(u),
        cost_refined: best_gain(cost, u).1,
        solver_iters: r.iters,
        extraction_iters: 0,
        status: if r.converged { "ok" } else { "bgd-not-converged" },
    })
}

/// Pilots of source `n`, placed right after the first full regressor.
pub fn pilots_for(frame: &SignalFrame, l_w: usize, n: usize, count: usize) -> Result<Pilots> {
    let src = &frame.sources[n];
    if l_w + count > src.len() {
        return Err(Error::Config(format!("{count} pilots do not fit in the frame")));
    }
    Ok(Pilots {
        first: l_w,
        symbols: src[l_w..l_w + count].to_vec(),
    })
}

/// Decision delay whose pilot window best matches the output of a blind
/// equalizer, by normalized correlation magnitude.
pub fn choose_delay(frame: &SignalFrame, l_w: usize, w_blind: &[C64], pilots: &Pilots, max_delay: usize) -> Result<usize> {
    let y = equalize(frame, w_blind, l_w)?;
    let sp: f64 = pilots.symbols.iter().map(|s| s.norm_sqr()).sum();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for d in 0..=max_delay {
        let last = pilots.first + pilots.symbols.len() - 1 + d;
        if last >= frame.len() {
            break;
        }
        let mut corr = C64::new(0.0, 0.0);
        let mut py = 0.0;
        for (t, s) in pilots.symbols.iter().enumerate() {
            let yk = y.samples[pilots.first + t + d - y.start];
            corr += yk * s.conj();
            py += yk.norm_sqr();
        }
        let score = if py > 0.0 { corr.norm_sqr() / (py * sp) } else { 0.0 };
        if score > best.0 {
            best = (score, d);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::Config("pilots leave no admissible decision delay".into()));
    }
    Ok(best.1)
}

type BlindCache = HashMap<String, Vec<Vec<C64>>>;

fn cache_key(spec: &AlgorithmSpec) -> String {
    let key = AlgorithmSpec {
        name: None,
        lambda: None,
        pilots: 0,
        ..spec.clone()
    };
    format!("{key:?}")
}

fn n_streams(spec: &AlgorithmSpec, data: &RunData) -> usize {
    spec.streams.unwrap_or(data.channel.n_tx())
}

/// Cost of stream `stream` given the equalizers already fixed.
fn stream_cost(
    spec: &AlgorithmSpec,
    cfg: &ScenarioConfig,
    data: &RunData,
    stream: usize,
    prev: &[Vec<C64>],
    cache: &mut BlindCache,
) -> Result<CostCoefficients> {
    let l_w = cfg.equalizer_order;
    let mut cost = blind_cost(spec, &data.moments, &data.stats)?;
    if let Some(lambda) = spec.lambda {
        let blind_spec = AlgorithmSpec {
            lambda: None,
            ..spec.clone()
        };
        let key = cache_key(&blind_spec);
        if !cache.contains_key(&key) {
            let fits = fit_streams(&blind_spec, cfg, data, cache)?;
            cache.insert(key.clone(), fits.into_iter().map(|f| f.w).collect());
        }
        let w_blind = &cache[&key][stream];
        let pilots = pilots_for(&data.frame, l_w, stream, spec.pilots)?;
        let d = choose_delay(&data.frame, l_w, w_blind, &pilots, data.channel.order() + l_w)?;
        cost = semiblind(&cost, &training_cost(&data.frame, l_w, &pilots, d)?, lambda)?;
    }
    if !prev.is_empty() && spec.lambda_cr > 0.0 {
        let q = cross_corr_penalty(prev, &data.frame, l_w, spec.delta)?;
        cost = add_penalty(&cost, &q, spec.lambda_cr)?;
    }
    Ok(cost)
}

/// Sequential recovery: each stream's cost is penalized by its
/// correlation with the outputs already recovered.
pub fn fit_streams(
    spec: &AlgorithmSpec,
    cfg: &ScenarioConfig,
    data: &RunData,
    cache: &mut BlindCache,
) -> Result<Vec<StreamFit>> {
    let mut fits: Vec<StreamFit> = Vec::new();
    for i in 0..n_streams(spec, data) {
        let prev: Vec<Vec<C64>> = fits.iter().map(|f| f.w.clone()).collect();
        let cost = stream_cost(spec, cfg, data, i, &prev, cache)?;
        let fit = match spec.method {
            Method::Co => fit_co(&cost, cfg, spec, data, i)?,
            Method::Bgd => fit_bgd(&cost, cfg, spec, i)?,
            Method::Optimum => unreachable!("optimum has no cost"),
        };
        fits.push(fit);
    }
    if spec.lambda.is_none() {
        cache.insert(cache_key(spec), fits.iter().map(|f| f.w.clone()).collect());
    }
    Ok(fits)
}

fn optimum_fits(cfg: &ScenarioConfig, data: &RunData) -> Result<Vec<StreamFit>> {
    let opt = optimal_linear_equalizer(
        &data.channel,
        cfg.equalizer_order,
        data.stats.sigma_s2,
        data.frame.noise_variance,
    )?;
    Ok((0..opt.bank.n_streams())
        .map(|i| StreamFit {
            w: opt.bank.stream(i).to_vec(),
            tau: None,
            cost: f64::NAN,
            cost_refined: f64::NAN,
            solver_iters: 0,
            extraction_iters: 0,
            status: "ok",
        })
        .collect())
}

pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::NoNullSpace { .. } => "no-null-space",
        Error::DivisionHazard { .. } => "division-hazard",
        Error::DegeneratePower { .. } => "degenerate-power",
        Error::Diverged { .. } => "diverged",
        Error::UndefinedMetric(_) => "undefined-metric",
        Error::Config(_) => "config-error",
        _ => "error",
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn rows_for(
    cfg: &ScenarioConfig,
    data: &RunData,
    label: &str,
    fits: Result<Vec<StreamFit>>,
    wall_ms: f64,
) -> Vec<ResultRow> {
    let base = ResultRow {
        run: data.run,
        seed: data.seed,
        scenario: cfg.scenario.clone(),
        algorithm: label.to_string(),
        stream: 0,
        snr_db: cfg.snr_db,
        samples: cfg.samples,
        isi_db: None,
        ncci_db: None,
        ser: None,
        source: None,
        tau: None,
        cost: None,
        cost_refined: None,
        solver_iters: 0,
        extraction_iters: 0,
        status: String::new(),
        wall_ms,
    };
    let fits = match fits {
        Ok(f) => f,
        Err(e) => {
            return vec![ResultRow {
                status: error_code(&e).into(),
                ..base
            }]
        }
    };
    let response = EqualizerBank::new(
        data.channel.n_rx(),
        cfg.equalizer_order,
        fits.iter().map(|f| f.w.clone()).collect(),
    )
    .and_then(|bank| combined_response(&data.channel, &bank));
    fits.iter()
        .enumerate()
        .map(|(i, f)| {
            let mut row = ResultRow {
                stream: i,
                tau: f.tau,
                cost: finite(f.cost),
                cost_refined: finite(f.cost_refined),
                solver_iters: f.solver_iters,
                extraction_iters: f.extraction_iters,
                status: f.status.into(),
                ..base.clone()
            };
            let metrics = response.as_ref().map_err(|e| error_code(e)).and_then(|resp| {
                let m = || -> Result<_> {
                    let y = equalize(&data.frame, &f.w, cfg.equalizer_order)?;
                    Ok((
                        to_db(isi(resp, i)?),
                        to_db(ncci(resp, i)?),
                        ser(&y, &data.frame.sources, resp, i, &data.constellation)?,
                        dominant_tap(resp, i)?.source,
                    ))
                };
                m().map_err(|e| error_code(&e))
            });
            match metrics {
                Ok((isi_db, ncci_db, s, src)) => {
                    row.isi_db = Some(isi_db);
                    row.ncci_db = Some(ncci_db);
                    row.ser = Some(s);
                    row.source = Some(src);
                }
                Err(code) => row.status = code.into(),
            }
            row
        })
        .collect()
}

/// All rows of one Monte Carlo run.
pub fn run_once(cfg: &ScenarioConfig, run: usize, timing: bool) -> Vec<ResultRow> {
    let data = match RunData::new(cfg, run) {
        Ok(d) => d,
        Err(e) => {
            let seed = run_seed(cfg.seed, run);
            return cfg
                .algorithms
                .iter()
                .map(|a| ResultRow {
                    run,
                    seed,
                    scenario: cfg.scenario.clone(),
                    algorithm: a.label(),
                    stream: 0,
                    snr_db: cfg.snr_db,
                    samples: cfg.samples,
                    isi_db: None,
                    ncci_db: None,
                    ser: None,
                    source: None,
                    tau: None,
                    cost: None,
                    cost_refined: None,
                    solver_iters: 0,
                    extraction_iters: 0,
                    status: error_code(&e).into(),
                    wall_ms: 0.0,
                })
                .collect();
        }
    };
    let mut cache = BlindCache::new();
    let mut rows = Vec::new();
    for spec in &cfg.algorithms {
        let start = Instant::now();
        let fits = match spec.method {
            Method::Optimum => optimum_fits(cfg, &data),
            _ => fit_streams(spec, cfg, &data, &mut cache),
        };
        let wall_ms = if timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        rows.extend(rows_for(cfg, &data, &spec.label(), fits, wall_ms));
    }
    rows
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioResult> {
    cfg.validate()?;
    let per_run: Vec<Vec<ResultRow>> = match opts.execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..cfg.runs).into_par_iter().map(|r| run_once(cfg, r, opts.timing)).collect()
        }
        _ => (0..cfg.runs).map(|r| run_once(cfg, r, opts.timing)).collect(),
    };
    let rows: Vec<ResultRow> = per_run.into_iter().flatten().collect();
    let summary = summarize(&cfg.scenario, cfg.runs, &rows);
    Ok(ScenarioResult { rows, summary })
}

/// SOS problem of the first stream of the first relaxation-based algorithm
/// in run 0.
pub fn first_problem(cfg: &ScenarioConfig) -> Result<SosSdpProblem> {
    cfg.validate()?;
    let spec = cfg
        .algorithms
        .iter()
        .find(|a| a.method == Method::Co)
        .ok_or_else(|| Error::Config("no relaxation-based algorithm in the scenario".into()))?;
    let data = RunData::new(cfg, 0)?;
    let cost = stream_cost(spec, cfg, &data, 0, &[], &mut BlindCache::new())?;
    assemble(&cost)
}
