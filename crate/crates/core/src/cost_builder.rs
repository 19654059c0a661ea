//! Even quartic cost functions of the real equalizer vector `u`.
//!
//! Every cost is stored as `f(u) = v^T A22 v + 2 A20·v + A00` with
//! `v = qvec(u)`. Builders exist for CMA, SWA, MED, the fourth-order pilot
//! cost, and the cross-correlation penalty used for sequential source
//! recovery.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::lifting::{qvec, real_split, svec, LiftedIndexMap, MomentModel};
use crate::signal_model::{build_regressor, SignalFrame, C64};

/// Label and parameters a cost was built from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostMeta {
    pub label: String,
    pub params: BTreeMap<String, f64>,
}

impl CostMeta {
    fn new(label: &str, params: &[(&str, f64)]) -> Self {
        Self {
            label: label.to_string(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostCoefficients {
    pub a22: DMatrix<f64>,
    pub a20: DVector<f64>,
    pub a00: f64,
    pub meta: CostMeta,
}

impl CostCoefficients {
    pub fn new(a22: DMatrix<f64>, a20: DVector<f64>, a00: f64, meta: CostMeta) -> Result<Self> {
        let d = a20.len();
        if a22.nrows() != d || a22.ncols() != d {
            return Err(invalid(format!(
                "A22 is {}x{} but A20 has length {d}",
                a22.nrows(),
                a22.ncols()
            )));
        }
        LiftedIndexMap::for_dim(d)?;
        for i in 0..d {
            for j in i + 1..d {
                if (a22[(i, j)] - a22[(j, i)]).abs() > 1e-9 * (1.0 + a22[(i, j)].abs()) {
                    return Err(invalid(format!("A22 not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { a22, a20, a00, meta })
    }

    /// Lifted dimension `D`.
    pub fn dim(&self) -> usize {
        self.a20.len()
    }

    /// Length of `u`.
    pub fn n2(&self) -> usize {
        LiftedIndexMap::for_dim(self.dim()).expect("validated").n2()
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        let v = qvec(u);
        self.evaluate_lifted(&v)
    }

    /// Cost as a function of the lifted vector.
    pub fn evaluate_lifted(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.a22 * v)) + 2.0 * self.a20.dot(v) + self.a00
    }
}

/// Gain `g >= 0` minimizing `f(g u)` and the minimum. Along a ray the cost
/// is `a g^4 + 2 c g^2 + A00` with `a = v^T A22 v`, `c = A20·v`.
pub fn best_gain(c: &CostCoefficients, u: &[f64]) -> (f64, f64) {
    let v = qvec(u);
    let a = v.dot(&(&c.a22 * &v));
    let b = c.a20.dot(&v);
    if a > 0.0 && b < 0.0 {
        ((-b / a).sqrt(), c.a00 - b * b / a)
    } else if a >= 0.0 && b >= 0.0 {
        (0.0, c.a00)
    } else {
        (1.0, c.evaluate(u))
    }
}

/// `f(u)`; panics if `u` has the wrong length.
pub fn evaluate_cost(c: &CostCoefficients, u: &[f64]) -> f64 {
    assert_eq!(u.len(), c.n2(), "u has the wrong length for this cost");
    c.evaluate(u)
}

fn bbt(b: &DVector<f64>) -> DMatrix<f64> {
    b * b.transpose()
}

/// `J = avg (|y|^2 - R2)^2`.
pub fn cma_cost(m: &MomentModel, r2: f64) -> Result<CostCoefficients> {
    if !(r2 > 0.0) {
        return Err(invalid(format!("R2 must be positive, got {r2}")));
    }
    CostCoefficients::new(m.c.clone(), -r2 * &m.b, r2 * r2, CostMeta::new("cma", &[("r2", r2)]))
}

/// `J = avg|y|^4 - (2 + (1+α)γ/σ^4)(avg|y|^2)^2 + 2α(γ/σ^2) avg|y|^2`.
pub fn swa_cost(m: &MomentModel, sigma_s2: f64, kurtosis: f64, alpha: f64) -> Result<CostCoefficients> {
    if !(sigma_s2 > 0.0) {
        return Err(invalid(format!("source power must be positive, got {sigma_s2}")));
    }
    let k4 = 2.0 + (1.0 + alpha) * kurtosis / (sigma_s2 * sigma_s2);
    CostCoefficients::new(
        &m.c - k4 * bbt(&m.b),
        (alpha * kurtosis / sigma_s2) * &m.b,
        0.0,
        CostMeta::new("swa", &[("alpha", alpha), ("kurtosis", kurtosis), ("sigma_s2", sigma_s2)]),
    )
}

/// `J = avg|y|^4 + λ_p (avg|y|^2 - σ^2)^2`.
pub fn med_cost(m: &MomentModel, sigma_s2: f64, lambda_p: f64) -> Result<CostCoefficients> {
    if !(lambda_p >= 0.0) {
        return Err(invalid(format!("lambda_p must be nonnegative, got {lambda_p}")));
    }
    CostCoefficients::new(
        &m.c + lambda_p * bbt(&m.b),
        (-lambda_p * sigma_s2) * &m.b,
        lambda_p * sigma_s2 * sigma_s2,
        CostMeta::new("med", &[("lambda_p", lambda_p), ("sigma_s2", sigma_s2)]),
    )
}

/// Sample correlation `avg_k x(k) x(k-l)^H` over the `k` for which both
/// regressors are fully populated.
pub fn regressor_correlation(frame: &SignalFrame, l_w: usize, lag: i64) -> Result<DMatrix<C64>> {
    let k_len = frame.len() as i64;
    let lo = (l_w as i64).max(l_w as i64 + lag);
    let hi = k_len.min(k_len + lag);
    if hi <= lo {
        return Err(invalid(format!("lag {lag} leaves no overlapping samples")));
    }
    let n = frame.n_rx() * (l_w + 1);
    let mut r = DMatrix::<C64>::zeros(n, n);
    for k in lo..hi {
        let a = DVector::from_vec(build_regressor(frame, l_w, k as usize)?);
        let b = DVector::from_vec(build_regressor(frame, l_w, (k - lag) as usize)?);
        r += &a * b.adjoint();
    }
    Ok(r / C64::new((hi - lo) as f64, 0.0))
}

/// Lifted penalty vector `q` with `q·qvec(u) = Σ_i Σ_{|l|<=δ} |avg y_i(k) y*(k-l)|^2`,
/// where `y = w^H x` is the stream being designed and `y_i` the outputs of
/// the already fixed equalizers `prev`.
pub fn cross_corr_penalty(
    prev: &[Vec<C64>],
    frame: &SignalFrame,
    l_w: usize,
    delta: i64,
) -> Result<DVector<f64>> {
    if delta < 0 {
        return Err(invalid(format!("lag range delta must be nonnegative, got {delta}")));
    }
    let n = frame.n_rx() * (l_w + 1);
    let map = LiftedIndexMap::new(2 * n);
    let mut q = DVector::zeros(map.dim());
    if prev.is_empty() {
        return Ok(q);
    }
    if let Some(w) = prev.iter().find(|w| w.len() != n) {
        return Err(invalid(format!(
            "fixed equalizer has length {}, expected {n}",
            w.len()
        )));
    }
    for lag in -delta..=delta {
        let r = regressor_correlation(frame, l_w, lag)?;
        let rh = r.adjoint();
        for w in prev {
            let p: Vec<C64> = (&rh * DVector::from_column_slice(w)).iter().copied().collect();
            let (pr, pi) = real_split(&p);
            q += svec(&(&pr * pr.transpose() + &pi * pi.transpose()))?;
        }
    }
    Ok(q)
}

/// Known pilot symbols `s(first + t)`, `t = 0 .. L_t-1`, of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilots {
    pub first: usize,
    pub symbols: Vec<C64>,
}

/// Fourth-order pilot cost for decision delay `d`:
/// `J_t = Σ_{p<=q} (u^T x_t(p) x_t(q)^T u - s_t(p) s_t(q))^2` over the
/// interleaved real pilot samples, where pilot `t` pairs with the regressor
/// at `first + t + d` (real part with `x_r`, imaginary part with `x_i`).
pub fn training_cost(frame: &SignalFrame, l_w: usize, pilots: &Pilots, d: usize) -> Result<CostCoefficients> {
    if pilots.symbols.is_empty() {
        return Err(invalid("no pilot symbols"));
    }
    let mut xs = Vec::with_capacity(2 * pilots.symbols.len());
    let mut ss = Vec::with_capacity(2 * pilots.symbols.len());
    for (t, s) in pilots.symbols.iter().enumerate() {
        let k = pilots.first + t + d;
        let x = build_regressor(frame, l_w, k).map_err(|_| {
            invalid(format!(
                "pilot {t} at delay {d} needs regressor {k}, outside {l_w}..{}",
                frame.len()
            ))
        })?;
        let (xr, xi) = real_split(&x);
        xs.push(xr);
        ss.push(s.re);
        xs.push(xi);
        ss.push(s.im);
    }
    let map = LiftedIndexMap::new(xs[0].len());
    let dim = map.dim();
    let mut a22 = DMatrix::zeros(dim, dim);
    let mut a20 = DVector::zeros(dim);
    let mut a00 = 0.0;
    for p in 0..xs.len() {
        for q in p..xs.len() {
            let x = DVector::from_iterator(
                dim,
                map.pairs().iter().map(|&(i, j)| {
                    let sym = 0.5 * (xs[p][i] * xs[q][j] + xs[q][i] * xs[p][j]);
                    if i == j {
                        sym
                    } else {
                        2.0 * sym
                    }
                }),
            );
            let target = ss[p] * ss[q];
            a22.ger(1.0, &x, &x, 1.0);
            a20.axpy(-target, &x, 1.0);
            a00 += target * target;
        }
    }
    CostCoefficients::new(
        a22,
        a20,
        a00,
        CostMeta::new(
            "training",
            &[("l_t", pilots.symbols.len() as f64), ("d", d as f64), ("first", pilots.first as f64)],
        ),
    )
}

/// Weighted sum of costs of equal dimension.
pub fn combine(costs: &[(&CostCoefficients, f64)]) -> Result<CostCoefficients> {
    let (first, _) = costs.first().ok_or_else(|| invalid("nothing to combine"))?;
    let d = first.dim();
    let mut a22 = DMatrix::zeros(d, d);
    let mut a20 = DVector::zeros(d);
    let mut a00 = 0.0;
    let mut labels = Vec::new();
    let mut params = BTreeMap::new();
    for (i, (c, wgt)) in costs.iter().enumerate() {
        if c.dim() != d {
            return Err(invalid(format!("cost {i} has dimension {}, expected {d}", c.dim())));
        }
        a22 += *wgt * &c.a22;
        a20 += *wgt * &c.a20;
        a00 += wgt * c.a00;
        labels.push(format!("{}*{}", wgt, c.meta.label));
        params.insert(format!("weight{i}"), *wgt);
        for (k, v) in &c.meta.params {
            params.entry(k.clone()).or_insert(*v);
        }
    }
    CostCoefficients::new(
        a22,
        a20,
        a00,
        CostMeta {
            label: labels.join("+"),
            params,
        },
    )
}

/// Semiblind combination `λ J_b + (1-λ) J_t`.
pub fn semiblind(blind: &CostCoefficients, training: &CostCoefficients, lambda: f64) -> Result<CostCoefficients> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let mut c = combine(&[(blind, lambda), (training, 1.0 - lambda)])?;
    c.meta.label = format!("sb-{}", blind.meta.label);
    c.meta.params.insert("lambda".into(), lambda);
    Ok(c)
}

/// Adds `λ_cr q·v` to the cost (an `A20` increment of `λ_cr q / 2`).
pub fn add_penalty(cost: &CostCoefficients, q: &DVector<f64>, lambda_cr: f64) -> Result<CostCoefficients> {
    if q.len() != cost.dim() {
        return Err(invalid(format!(
            "penalty has dimension {}, cost has {}",
            q.len(),
            cost.dim()
        )));
    }
    let mut c = cost.clone();
    c.a20 += (lambda_cr / 2.0) * q;
    c.meta.params.insert("lambda_cr".into(), lambda_cr);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::estimate_moments;
    use crate::signal_model::{generate_frame, ChannelModel, Constellation};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn identity_qpsk() -> (SignalFrame, MomentModel) {
        let ch = ChannelModel::siso(vec![c(1.0, 0.0)]).unwrap();
        let f = generate_frame(&Constellation::qpsk(), &ch, 100, f64::INFINITY, 1).unwrap();
        let m = estimate_moments(&f, 0).unwrap();
        (f, m)
    }

    #[test]
    fn cma_trivial_values() {
        let (_, m) = identity_qpsk();
        let cost = cma_cost(&m, 1.0).unwrap();
        assert!(cost.evaluate(&[1.0, 0.0]).abs() < 1e-12);
        assert_eq!(cost.evaluate(&[0.0, 0.0]), 1.0);
        assert!(cma_cost(&m, 0.0).is_err());
    }

    #[test]
    fn best_gain_on_cma() {
        let (_, m) = identity_qpsk();
        let cost = cma_cost(&m, 1.0).unwrap();
        let (g, v) = best_gain(&cost, &[0.5, 0.0]);
        assert!((g - 2.0).abs() < 1e-12 && v.abs() < 1e-12);
        assert_eq!(best_gain(&cost, &[0.0, 0.0]), (0.0, 1.0));
    }

    #[test]
    fn med_and_swa_at_zero() {
        let (_, m) = identity_qpsk();
        assert_eq!(med_cost(&m, 1.0, 2.0).unwrap().evaluate(&[0.0, 0.0]), 2.0);
        assert_eq!(swa_cost(&m, 1.0, -1.0, 0.5).unwrap().evaluate(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn training_cost_zero_at_ideal_equalizer() {
        let (f, _) = identity_qpsk();
        let pilots = Pilots {
            first: 0,
            symbols: f.sources[0][..8].to_vec(),
        };
        let t = training_cost(&f, 0, &pilots, 0).unwrap();
        assert!(t.evaluate(&[1.0, 0.0]).abs() < 1e-12);
        assert!(t.evaluate(&[0.0, 1.0]) > 0.1);
        assert!(training_cost(&f, 0, &pilots, 95).is_err());
    }

    #[test]
    fn penalty_empty_prev_is_zero() {
        let (f, _) = identity_qpsk();
        assert_eq!(cross_corr_penalty(&[], &f, 0, 0).unwrap().norm(), 0.0);
        assert!(cross_corr_penalty(&[], &f, 0, -1).is_err());
    }

    #[test]
    fn combine_weights() {
        let (_, m) = identity_qpsk();
        let a = cma_cost(&m, 1.0).unwrap();
        let b = med_cost(&m, 1.0, 2.0).unwrap();
        let only_a = combine(&[(&a, 1.0), (&b, 0.0)]).unwrap();
        assert_eq!(only_a.a22, a.a22);
        assert_eq!(only_a.a20, a.a20);
        let half = combine(&[(&a, 0.5), (&a, 0.5)]).unwrap();
        assert!((half.evaluate(&[0.3, -0.7]) - a.evaluate(&[0.3, -0.7])).abs() < 1e-14);
        assert!(semiblind(&a, &b, 1.5).is_err());
    }
}
