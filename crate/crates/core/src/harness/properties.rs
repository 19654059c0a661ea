//! Randomized identity checks shared by `soseq verify` and the test suite.
//! Each check draws its own data from a fixed seed and reports the worst
//! deviation it saw.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::cost_gradient;
use crate::cost_builder::{add_penalty, cma_cost, cross_corr_penalty, med_cost, swa_cost, training_cost, CostCoefficients};
use crate::error::Result;
use crate::harness::config::{AlgorithmSpec, BlindCost, ChannelSpec, ScenarioConfig};
use crate::harness::output::write_csv;
use crate::harness::runner::{pilots_for, run_scenario, Execution, RunOptions};
use crate::lifting::{equalizer_to_u, estimate_moments, qvec, svec, svec_inv};
use crate::metrics::{isi_of, ncci_row};
use crate::signal_model::{equalize, generate_frame, ChannelModel, Constellation, SignalFrame, TapPower, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation and the bound it was held to.
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, bound: f64) -> PropertyOutcome {
    PropertyOutcome {
        name,
        passed: worst <= bound,
        detail: format!("worst {worst:.3e} (bound {bound:.0e})"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn complex_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Random noisy 16-QAM frame through a 2-receiver, 2-source FIR channel.
fn test_frame(seed: u64) -> Result<(SignalFrame, ChannelModel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = ChannelModel::rayleigh(2, 2, 2, TapPower::Total, &mut rng)?;
    let frame = generate_frame(&Constellation::qam16(), &ch, 300, 15.0, seed)?;
    Ok((frame, ch))
}

pub fn lifting_roundtrip(seed: u64) -> Result<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 1..=6 {
        let a = DMatrix::from_vec(n, n, normal_vec(&mut rng, n * n));
        let m = &a + a.transpose();
        let s = svec(&m)?;
        worst = worst.max((svec_inv(&s)? - &m).amax());
        let u = normal_vec(&mut rng, n);
        let uv = DVector::from_column_slice(&u);
        worst = worst.max(rel(qvec(&u).dot(&s), uv.dot(&(&m * &uv))));
    }
    Ok(outcome("svec/qvec roundtrip and duality", worst, 1e-10))
}

pub fn moment_oracle(seed: u64) -> Result<PropertyOutcome> {
    let (frame, _) = test_frame(seed)?;
    let l_w = 2;
    let m = estimate_moments(&frame, l_w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let w = complex_vec(&mut rng, 2 * (l_w + 1));
        let y = equalize(&frame, &w, l_w)?;
        let k = y.samples.len() as f64;
        let p2 = y.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / k;
        let p4 = y.samples.iter().map(|s| s.norm_sqr().powi(2)).sum::<f64>() / k;
        let v = qvec(equalizer_to_u(&w).as_slice());
        worst = worst.max((v.dot(&m.b) - p2).abs() / p2);
        worst = worst.max((v.dot(&(&m.c * &v)) - p4).abs() / p4);
    }
    Ok(outcome("moment model vs direct filtering", worst, 1e-9))
}

pub fn swa_offset(seed: u64) -> Result<PropertyOutcome> {
    let (frame, _) = test_frame(seed)?;
    let m = estimate_moments(&frame, 1)?;
    let s = Constellation::qam16().stats();
    let alpha = -s.r2 * s.sigma_s2 / s.kurtosis;
    let swa = swa_cost(&m, s.sigma_s2, s.kurtosis, alpha)?;
    let cma = cma_cost(&m, s.r2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u = normal_vec(&mut rng, m.n2);
        let (fs, fc) = (swa.evaluate(&u), cma.evaluate(&u));
        worst = worst.max((fs - fc + s.r2 * s.r2).abs() / (1.0 + fs.abs() + fc.abs()));
    }
    Ok(outcome("SWA equals CMA up to a constant", worst, 1e-12))
}

pub fn training_oracle(seed: u64) -> Result<PropertyOutcome> {
    let (frame, _) = test_frame(seed)?;
    let l_w = 1;
    let pilots = pilots_for(&frame, l_w, 0, 6)?;
    let d = 2;
    let cost = training_cost(&frame, l_w, &pilots, d)?;
    let mut xs = Vec::new();
    let mut ss = Vec::new();
    for (t, s) in pilots.symbols.iter().enumerate() {
        let x = crate::signal_model::build_regressor(&frame, l_w, pilots.first + t + d)?;
        xs.push(x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect::<Vec<_>>());
        ss.push(s.re);
        xs.push(x.iter().map(|z| z.im).chain(x.iter().map(|z| -z.re)).collect());
        ss.push(s.im);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let u = normal_vec(&mut rng, cost.n2());
        let dot = |x: &[f64]| x.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        let mut direct = 0.0;
        for p in 0..xs.len() {
            for q in p..xs.len() {
                direct += (dot(&xs[p]) * dot(&xs[q]) - ss[p] * ss[q]).powi(2);
            }
        }
        worst = worst.max((cost.evaluate(&u) - direct).abs() / (1.0 + direct));
    }
    Ok(outcome("pilot cost vs double loop", worst, 1e-9))
}

fn fd_error(c: &CostCoefficients, u: &[f64]) -> f64 {
    let g = cost_gradient(c, u);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let scale = g.amax().max(1e-300);
    for i in 0..u.len() {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[i] += h;
        dn[i] -= h;
        let fd = (c.evaluate(&up) - c.evaluate(&dn)) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / scale);
    }
    worst
}

pub fn gradient_check(seed: u64) -> Result<PropertyOutcome> {
    let (frame, _) = test_frame(seed)?;
    let l_w = 1;
    let m = estimate_moments(&frame, l_w)?;
    let s = Constellation::qam16().stats();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
    let prev = vec![complex_vec(&mut rng, 2 * (l_w + 1))];
    let cma = cma_cost(&m, s.r2)?;
    let costs = [
        cma.clone(),
        swa_cost(&m, s.sigma_s2, s.kurtosis, 0.5)?,
        med_cost(&m, s.sigma_s2, 2.0)?,
        training_cost(&frame, l_w, &pilots_for(&frame, l_w, 0, 4)?, 1)?,
        add_penalty(&cma, &cross_corr_penalty(&prev, &frame, l_w, 1)?, 1.0)?,
    ];
    let mut worst = 0.0f64;
    for c in &costs {
        for _ in 0..3 {
            let u: Vec<f64> = normal_vec(&mut rng, c.n2()).iter().map(|x| 0.5 * x).collect();
            worst = worst.max(fd_error(c, &u));
        }
    }
    Ok(outcome("gradient vs central differences", worst, 1e-5))
}

pub fn metric_scale_invariance(seed: u64) -> Result<PropertyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 1..8 {
        let taps = complex_vec(&mut rng, n);
        let a = complex_vec(&mut rng, 1)[0] * 3.7;
        let scaled: Vec<C64> = taps.iter().map(|t| t * a).collect();
        worst = worst.max(rel(isi_of(&taps)?, isi_of(&scaled)?));
        worst = worst.max(rel(ncci_row(&taps)?, ncci_row(&scaled)?));
    }
    Ok(outcome("ISI/NCCI scale invariance", worst, 1e-12))
}

/// Small end-to-end scenario used for the determinism check.
pub fn smoke_config() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "smoke".into(),
        channel: ChannelSpec::Random {
            n_rx: 1,
            n_tx: 1,
            taps: 2,
            power: TapPower::PerTap,
        },
        constellation: "qpsk".into(),
        samples: 200,
        snr_db: 20.0,
        equalizer_order: 1,
        runs: 3,
        seed: 7,
        algorithms: vec![
            AlgorithmSpec::co(BlindCost::Cma),
            AlgorithmSpec::co(BlindCost::Cma).semiblind(0.5, 4),
            AlgorithmSpec::optimum(),
        ],
        solver: Default::default(),
        extraction: Default::default(),
    }
}

pub fn determinism() -> Result<PropertyOutcome> {
    let cfg = smoke_config();
    let csv = |execution| -> Result<Vec<u8>> {
        let r = run_scenario(
            &cfg,
            RunOptions {
                execution,
                timing: false,
            },
        )?;
        let mut buf = Vec::new();
        write_csv(&r.rows, &mut buf)?;
        Ok(buf)
    };
    let a = csv(Execution::Sequential)?;
    let b = csv(Execution::Sequential)?;
    let c = csv(Execution::Parallel)?;
    Ok(PropertyOutcome {
        name: "pipeline determinism",
        passed: a == b && a == c,
        detail: format!("{} CSV bytes, reruns identical: {}", a.len(), a == b && a == c),
    })
}

type Check = Box<dyn Fn() -> Result<PropertyOutcome>>;

/// Every check, in a fixed order.
pub fn all(seed: u64) -> Vec<PropertyOutcome> {
    let checks: Vec<(&'static str, Check)> = vec![
        ("svec/qvec roundtrip and duality", Box::new(move || lifting_roundtrip(seed))),
        ("moment model vs direct filtering", Box::new(move || moment_oracle(seed))),
        ("SWA equals CMA up to a constant", Box::new(move || swa_offset(seed))),
        ("pilot cost vs double loop", Box::new(move || training_oracle(seed))),
        ("gradient vs central differences", Box::new(move || gradient_check(seed))),
        ("ISI/NCCI scale invariance", Box::new(move || metric_scale_invariance(seed))),
        ("pipeline determinism", Box::new(determinism)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| PropertyOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
