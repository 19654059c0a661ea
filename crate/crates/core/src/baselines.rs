//! Reference equalizers: batch gradient descent on any quartic cost, and
//! the delay-optimized linear MMSE equalizer computed from the true channel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost_builder::CostCoefficients;
use crate::error::{invalid, Error, Result};
use crate::lifting::{qvec, LiftedIndexMap};
use crate::metrics::isi_of;
use crate::signal_model::{combined_response, ChannelModel, EqualizerBank, C64};

/// Exact gradient `∇f(u) = 2 U(g) u` where `g = 2 A22 v + 2 A20` is the
/// gradient in `v = qvec(u)` and `U(g)` places `g_ii` on the diagonal and
/// `g_ij / 2` off it.
pub fn cost_gradient(c: &CostCoefficients, u: &[f64]) -> DVector<f64> {
    let map = LiftedIndexMap::for_dim(c.dim()).expect("validated cost");
    assert_eq!(u.len(), map.n2(), "u has the wrong length for this cost");
    let v = qvec(u);
    let g = 2.0 * (&c.a22 * &v + &c.a20);
    let mut grad = DVector::zeros(u.len());
    for (k, &(i, j)) in map.pairs().iter().enumerate() {
        if i == j {
            grad[i] += 2.0 * g[k] * u[i];
        } else {
            grad[i] += g[k] * u[j];
            grad[j] += g[k] * u[i];
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgdSettings {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the cost changes by less than this between iterations.
    pub tol: f64,
}

impl Default for BgdSettings {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_iters: 200_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BgdResult {
    pub u: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Cost before each step and after the last one.
    pub trace: Vec<f64>,
}

/// Cost above which a descent run is declared divergent.
pub const DIVERGENCE_COST: f64 = 1e12;

/// Fixed-step descent `u ← u - step ∇f(u)`.
pub fn run_bgd(c: &CostCoefficients, u0: &[f64], settings: &BgdSettings) -> Result<BgdResult> {
    if !(settings.step > 0.0) {
        return Err(invalid(format!("step must be positive, got {}", settings.step)));
    }
    let mut u = DVector::from_column_slice(u0);
    let mut cost = c.evaluate(u.as_slice());
    let mut trace = vec![cost];
    for k in 1..=settings.max_iters {
        let grad = cost_gradient(c, u.as_slice());
        u.axpy(-settings.step, &grad, 1.0);
        let next = c.evaluate(u.as_slice());
        trace.push(next);
        if !next.is_finite() || next > DIVERGENCE_COST {
            return Err(Error::Diverged {
                iters: k,
                cost: next,
                trace,
            });
        }
        let change = (next - cost).abs();
        cost = next;
        if change < settings.tol {
            return Ok(BgdResult {
                u,
                iters: k,
                converged: true,
                trace,
            });
        }
    }
    Ok(BgdResult {
        u,
        iters: settings.max_iters,
        converged: false,
        trace,
    })
}

/// `u0` with a single unit entry at `spike` (real part of tap `spike`).
pub fn spike_init(n2: usize, spike: usize) -> Result<Vec<f64>> {
    if spike >= n2 {
        return Err(Error::IndexOutOfRange {
            index: spike,
            lo: 0,
            hi: n2,
        });
    }
    let mut u = vec![0.0; n2];
    u[spike] = 1.0;
    Ok(u)
}

/// Known-channel benchmark for every source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalEqualizer {
    pub bank: EqualizerBank,
    /// Chosen decision delay per stream.
    pub delays: Vec<usize>,
    /// Linear MSE `E|y - s(k-d)|^2` per stream at the chosen delay.
    pub mse: Vec<f64>,
}

/// Block convolution matrix mapping stacked sources
/// `[s_n(k - t)]_{n, t}`, `t = 0 ..= L_h + L_w`, to the regressor `x(k)`.
pub fn convolution_matrix(ch: &ChannelModel, l_w: usize) -> DMatrix<C64> {
    let span = ch.order() + l_w + 1;
    let rows = ch.n_rx() * (l_w + 1);
    let mut h = DMatrix::zeros(rows, ch.n_tx() * span);
    for j in 0..ch.n_rx() {
        for l in 0..=l_w {
            for n in 0..ch.n_tx() {
                for (m, &hm) in ch.sub_channel(j, n).iter().enumerate() {
                    h[(j * (l_w + 1) + l, n * span + l + m)] = hm;
                }
            }
        }
    }
    h
}

/// For each source and each delay `d = 0 ..= L_h + L_w`, solves the MMSE
/// problem `min E|w^H x(k) - s_n(k - d)|^2` with the exact channel and
/// noise statistics, keeping the delay with the smallest resulting ISI.
pub fn optimal_linear_equalizer(
    ch: &ChannelModel,
    l_w: usize,
    sigma_s2: f64,
    noise_variance: f64,
) -> Result<OptimalEqualizer> {
    if !(sigma_s2 > 0.0) || !(noise_variance >= 0.0) {
        return Err(invalid("source power must be positive and noise variance nonnegative"));
    }
    let h = convolution_matrix(ch, l_w);
    let span = ch.order() + l_w + 1;
    let n = h.nrows();
    let mut r = &h * h.adjoint() * C64::new(sigma_s2, 0.0);
    for i in 0..n {
        r[(i, i)] += noise_variance;
    }
    let chol = match r.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-10 * (1.0 + (0..n).map(|i| r[(i, i)].re).sum::<f64>() / n as f64);
            for i in 0..n {
                r[(i, i)] += ridge;
            }
            r.cholesky()
                .ok_or_else(|| invalid("regressor covariance is singular even after regularization"))?
        }
    };
    let mut streams = Vec::with_capacity(ch.n_tx());
    let mut delays = Vec::with_capacity(ch.n_tx());
    let mut mses = Vec::with_capacity(ch.n_tx());
    for src in 0..ch.n_tx() {
        let mut best: Option<(f64, usize, Vec<C64>, f64)> = None;
        for d in 0..span {
            let p = h.column(src * span + d) * C64::new(sigma_s2, 0.0);
            let w = chol.solve(&p);
            let mse = sigma_s2 - p.dotc(&w).re;
            let w: Vec<C64> = w.iter().copied().collect();
            let bank = EqualizerBank::new(ch.n_rx(), l_w, vec![w.clone()])?;
            let resp = combined_response(ch, &bank)?;
            let isi = isi_of(resp.stream(0)).unwrap_or(f64::INFINITY);
            if best.as_ref().is_none_or(|b| isi < b.0) {
                best = Some((isi, d, w, mse));
            }
        }
        let (_, d, w, mse) = best.expect("at least one delay");
        streams.push(w);
        delays.push(d);
        mses.push(mse);
    }
    Ok(OptimalEqualizer {
        bank: EqualizerBank::new(ch.n_rx(), l_w, streams)?,
        delays,
        mse: mses,
    })
}
