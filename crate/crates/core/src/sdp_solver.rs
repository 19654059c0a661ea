//! Solver for `max τ` over the equality system of an [`SosSdpProblem`]
//! with one PSD Gram block.
//!
//! τ is eliminated through an equality that carries it, leaving the
//! standard form `min <C, G> s.t. <A_i, G> = b_i, G ⪰ 0`. Two methods are
//! provided:
//!
//! * `Splitting` (default): ADMM on the dual, alternating an exact
//!   projection onto the affine set (the equality Gram matrix is factorized
//!   once; for assembled SOS problems it is the identity after row scaling)
//!   with eigenvalue clipping onto the PSD cone. Over-relaxation and an
//!   adaptive penalty balance primal and dual progress. Returned `G` is
//!   exactly PSD.
//! * `InteriorPoint`: HKM primal-dual path following with Mehrotra
//!   predictor-corrector steps and a dense Cholesky Schur complement.

use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sos_sdp::{verify_certificate, SosSdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    #[default]
    Splitting,
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative objective gap `|p - d| / (1 + |p| + |d|)`.
    pub eps_gap: f64,
    /// Relative primal and dual residual.
    pub eps_feas: f64,
    pub max_iters: usize,
    pub method: SolverMethod,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_gap: 1e-7,
            eps_feas: 1e-8,
            max_iters: 50_000,
            method: SolverMethod::Splitting,
        }
    }
}

impl SolverSettings {
    pub fn interior_point() -> Self {
        Self {
            max_iters: 100,
            method: SolverMethod::InteriorPoint,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_gap > 0.0 && self.eps_feas > 0.0) {
            return Err(invalid("solver tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("solver needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::MaxIters => "max-iters",
            Self::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub tau: f64,
    pub g: DMatrix<f64>,
    pub iters: usize,
    /// Achieved relative objective gap.
    pub gap: f64,
    /// Achieved relative residual, the larger of primal and dual.
    pub residual: f64,
    pub status: SolveStatus,
}

/// One scaled equality `Σ w G[r][c] = b` on the upper triangle.
type Row = Vec<(usize, usize, f64)>;

/// Standard form of the reduced problem.
struct StdForm {
    n: usize,
    rows: Vec<Row>,
    b: Vec<f64>,
    c: DMatrix<f64>,
    /// `τ = tau_rhs - <tau_row, G>` on the original scale.
    tau_row: Row,
    tau_rhs: f64,
    /// Cholesky factor of `A A^*` when the rows overlap; `None` means the
    /// rows have disjoint supports and unit norm, so `A A^* = I`.
    aat: Option<Cholesky<f64, nalgebra::Dyn>>,
}

fn merge(terms: impl IntoIterator<Item = (usize, usize, f64)>) -> Row {
    let mut acc: Vec<((usize, usize), f64)> = Vec::new();
    let mut pos: HashMap<(usize, usize), usize> = HashMap::new();
    for (r, c, w) in terms {
        let key = (r.min(c), r.max(c));
        match pos.get(&key) {
            Some(&i) => acc[i].1 += w,
            None => {
                pos.insert(key, acc.len());
                acc.push((key, w));
            }
        }
    }
    acc.sort_by_key(|e| e.0);
    acc.into_iter()
        .filter(|e| e.1 != 0.0)
        .map(|((r, c), w)| (r, c, w))
        .collect()
}

fn row_norm(row: &Row) -> f64 {
    row.iter()
        .map(|&(r, c, w)| if r == c { w * w } else { w * w / 2.0 })
        .sum::<f64>()
        .sqrt()
}

fn row_dot(a: &Row, b: &Row) -> f64 {
    // Both rows are sorted by position.
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let (ka, kb) = ((a[i].0, a[i].1), (b[j].0, b[j].1));
        if ka == kb {
            let f = if ka.0 == ka.1 { 1.0 } else { 0.5 };
            s += f * a[i].2 * b[j].2;
            i += 1;
            j += 1;
        } else if ka < kb {
            i += 1;
        } else {
            j += 1;
        }
    }
    s
}

fn apply_row(row: &Row, g: &DMatrix<f64>) -> f64 {
    row.iter().map(|&(r, c, w)| w * g[(r, c)]).sum()
}

fn row_matrix(n: usize, row: &Row, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    add_row(&mut m, row, scale);
    m
}

fn add_row(m: &mut DMatrix<f64>, row: &Row, scale: f64) {
    for &(r, c, w) in row {
        if r == c {
            m[(r, r)] += scale * w;
        } else {
            m[(r, c)] += 0.5 * scale * w;
            m[(c, r)] += 0.5 * scale * w;
        }
    }
}

enum Reduced {
    Ready(Box<StdForm>),
    Infeasible,
}

fn reduce(problem: &SosSdpProblem) -> Result<Reduced> {
    let n = problem.dim_g;
    for e in &problem.equalities {
        if let Some(&(r, c, _)) = e.terms.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(invalid(format!("term ({r},{c}) outside the {n}x{n} Gram matrix")));
        }
    }
    let t = problem
        .equalities
        .iter()
        .position(|e| e.tau != 0.0)
        .ok_or_else(|| invalid("no equality involves tau; the objective is unbounded"))?;
    let te = &problem.equalities[t];
    // τ = (rhs_t - <A_t, G>) / a_t
    let tau_row: Row = merge(te.terms.iter().map(|&(r, c, w)| (r, c, w / te.tau)));
    let tau_rhs = te.rhs / te.tau;
    let c = row_matrix(n, &tau_row, 1.0);

    let scale_rhs = 1.0 + problem.equalities.iter().map(|e| e.rhs.abs()).fold(0.0, f64::max);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut seen: HashMap<Vec<(usize, usize, u64)>, f64> = HashMap::new();
    for (i, e) in problem.equalities.iter().enumerate() {
        if i == t {
            continue;
        }
        let k = e.tau;
        let row = merge(
            e.terms
                .iter()
                .copied()
                .chain(tau_row.iter().map(|&(r, c, w)| (r, c, -k * w))),
        );
        let rhs = e.rhs - k * tau_rhs;
        let norm = row_norm(&row);
        if norm == 0.0 {
            if rhs.abs() > 1e-12 * scale_rhs {
                return Ok(Reduced::Infeasible);
            }
            continue;
        }
        let row: Row = row.into_iter().map(|(r, c, w)| (r, c, w / norm)).collect();
        let rhs = rhs / norm;
        let key: Vec<_> = row.iter().map(|&(r, c, w)| (r, c, w.to_bits())).collect();
        if let Some(&prev) = seen.get(&key) {
            if (prev - rhs).abs() > 1e-12 * (1.0 + rhs.abs()) {
                return Ok(Reduced::Infeasible);
            }
            continue;
        }
        seen.insert(key, rhs);
        rows.push(row);
        b.push(rhs);
    }

    let mut owner = vec![usize::MAX; n * n];
    let mut disjoint = true;
    'outer: for (i, row) in rows.iter().enumerate() {
        for &(r, c, _) in row {
            if owner[r * n + c] != usize::MAX {
                disjoint = false;
                break 'outer;
            }
            owner[r * n + c] = i;
        }
    }
    let aat = if disjoint {
        None
    } else {
        let m = rows.len();
        let mut gram = DMatrix::from_fn(m, m, |i, j| if i <= j { row_dot(&rows[i], &rows[j]) } else { 0.0 });
        for i in 0..m {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
            gram[(i, i)] += 1e-12;
        }
        let chol = Cholesky::new(gram).ok_or_else(|| invalid("equality Gram matrix is not positive definite"))?;
        // Consistency: the least-norm solution must reproduce b.
        let y = chol.solve(&DVector::from_column_slice(&b));
        let mut x0 = DMatrix::zeros(n, n);
        for (row, yi) in rows.iter().zip(y.iter()) {
            add_row(&mut x0, row, *yi);
        }
        let res: f64 = rows
            .iter()
            .zip(&b)
            .map(|(row, bi)| (apply_row(row, &x0) - bi).powi(2))
            .sum::<f64>()
            .sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res > 1e-8 * (1.0 + bn) {
            return Ok(Reduced::Infeasible);
        }
        Some(chol)
    };
    Ok(Reduced::Ready(Box::new(StdForm {
        n,
        rows,
        b,
        c,
        tau_row,
        tau_rhs,
        aat,
    })))
}

impl StdForm {
    fn a(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| apply_row(r, x)))
    }

    fn at(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (row, yi) in self.rows.iter().zip(y.iter()) {
            add_row(&mut m, row, *yi);
        }
        m
    }

    fn aat_solve(&self, r: DVector<f64>) -> DVector<f64> {
        match &self.aat {
            None => r,
            Some(ch) => ch.solve(&r),
        }
    }

    fn tau(&self, g: &DMatrix<f64>) -> f64 {
        self.tau_rhs - apply_row(&self.tau_row, g)
    }

    fn b_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

struct Progress {
    pinf: f64,
    dinf: f64,
    gap: f64,
}

/// Maximizes τ subject to the problem's equalities and `G ⪰ 0`.
pub fn solve(problem: &SosSdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    settings.validate()?;
    let sf = match reduce(problem)? {
        Reduced::Ready(sf) => sf,
        Reduced::Infeasible => {
            let g = DMatrix::zeros(problem.dim_g, problem.dim_g);
            return Ok(SdpSolution {
                tau: f64::NAN,
                g,
                iters: 0,
                gap: f64::INFINITY,
                residual: f64::INFINITY,
                status: SolveStatus::Infeasible,
            });
        }
    };
    let (x, iters, p) = match settings.method {
        SolverMethod::Splitting => admm(&sf, settings),
        SolverMethod::InteriorPoint => interior_point(&sf, settings),
    };
    let status = if p.gap <= settings.eps_gap && p.pinf <= settings.eps_feas && p.dinf <= settings.eps_feas {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIters
    };
    Ok(SdpSolution {
        tau: sf.tau(&x),
        g: x,
        iters,
        gap: p.gap,
        residual: p.pinf.max(p.dinf),
        status,
    })
}

/// ADMM on the dual (Wen, Goldfarb and Yin's alternating direction
/// augmented Lagrangian method).
fn admm(sf: &StdForm, settings: &SolverSettings) -> (DMatrix<f64>, usize, Progress) {
    const RHO: f64 = 1.6;
    const ADAPT_EVERY: usize = 10;
    const ADAPT_RATIO: f64 = 3.0;
    const ADAPT_FACTOR: f64 = 0.7;

    let n = sf.n;
    let b_raw = sf.b_vec();
    // Scale data to unit size; undone on return.
    let bs = b_raw.norm().max(1.0);
    let cs = frob(&sf.c).max(1.0);
    let b = &b_raw / bs;
    let c = &sf.c / cs;
    let bn = b.norm();
    let cn = frob(&c);

    let mut x = DMatrix::<f64>::zeros(n, n);
    let mut s = DMatrix::<f64>::zeros(n, n);
    let mut y: DVector<f64>;
    let mut mu = 1.0;
    let mut iters = 0;
    let mut best: Option<(f64, DMatrix<f64>, Progress)> = None;
    let mut last = Progress {
        pinf: f64::INFINITY,
        dinf: f64::INFINITY,
        gap: f64::INFINITY,
    };
    let mut pinf_acc = 0.0;
    let mut dinf_acc = 0.0;

    while iters < settings.max_iters {
        iters += 1;
        // y = -(AA*)^{-1} (mu (A(X) - b) + A(S - C))
        let rhs = mu * (sf.a(&x) - &b) + sf.a(&(&s - &c));
        y = -sf.aat_solve(rhs);
        let mut v = &c - sf.at(&y) - mu * &x;
        symmetrize(&mut v);
        let (values, vectors) = sym_eig(&v);
        let mut s_new = DMatrix::zeros(n, n);
        for (k, &lam) in values.iter().enumerate() {
            if lam > 0.0 {
                let q = vectors.column(k);
                s_new.ger(lam, &q, &q, 1.0);
            }
        }
        s = s_new;
        // X_hat = (S - V) / mu is the clipped negative part, PSD.
        let x_hat = (&s - &v) / mu;
        // The over-relaxed iterate may leave the cone; progress is measured
        // on (and the answer taken from) the PSD point X_hat.
        x = (1.0 - RHO) * &x + RHO * &x_hat;

        let pinf = (sf.a(&x_hat) - &b).norm() / (1.0 + bn);
        let dinf = frob(&(&c - sf.at(&y) - &s)) / (1.0 + cn);
        pinf_acc += pinf;
        dinf_acc += dinf;
        if iters % ADAPT_EVERY == 0 {
            if pinf_acc > ADAPT_RATIO * dinf_acc {
                mu /= ADAPT_FACTOR;
            } else if dinf_acc > ADAPT_RATIO * pinf_acc {
                mu *= ADAPT_FACTOR;
            }
            mu = mu.clamp(1e-8, 1e8);
            pinf_acc = 0.0;
            dinf_acc = 0.0;
        }
        let small = pinf <= settings.eps_feas && dinf <= settings.eps_feas;
        if small || iters % 25 == 0 || iters == settings.max_iters {
            let pobj = c.dot(&x_hat);
            let dobj = b.dot(&y);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            last = Progress { pinf, dinf, gap };
            let merit = pinf.max(dinf).max(gap);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, x_hat.clone(), Progress { pinf, dinf, gap }));
            }
            if small && gap <= settings.eps_gap {
                break;
            }
        }
    }
    let optimal = last.pinf <= settings.eps_feas && last.dinf <= settings.eps_feas && last.gap <= settings.eps_gap;
    let (_, bx, bp) = best.expect("at least one iteration");
    let (x, p) = if optimal { (bx, last) } else { (bx, bp) };
    // Undo the scaling: X solves the problem with b / bs.
    (x * bs, iters, p)
}

/// Eigen-decomposition of a symmetric matrix (faer is the faster kernel at
/// the sizes met here).
fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    match f.self_adjoint_eigen(faer::Side::Lower) {
        Ok(e) => {
            let s = e.S();
            let u = e.U();
            ((0..n).map(|i| s[i]).collect(), DMatrix::from_fn(n, n, |i, j| u[(i, j)]))
        }
        Err(_) => {
            let e = SymmetricEigen::new(m.clone());
            (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
        }
    }
}

/// Largest `α <= 1` with `X + α dX ⪰ 0`, using the Cholesky factor of `X`.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    let mut t = dx.clone();
    // T = L^{-1} dX L^{-T}
    l.solve_lower_triangular_mut(&mut t);
    let mut tt = t.transpose();
    l.solve_lower_triangular_mut(&mut tt);
    symmetrize(&mut tt);
    let lam_min = SymmetricEigen::new(tt)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let _ = n;
    if lam_min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam_min
    }
}

/// HKM primal-dual interior point method with Mehrotra correction.
fn interior_point(sf: &StdForm, settings: &SolverSettings) -> (DMatrix<f64>, usize, Progress) {
    const STEP_FRACTION: f64 = 0.98;
    let n = sf.n;
    let m = sf.rows.len();
    let b_raw = sf.b_vec();
    let bs = b_raw.norm().max(1.0);
    let cs = frob(&sf.c).max(1.0);
    let b = &b_raw / bs;
    let c = &sf.c / cs;
    let bn = b.norm();
    let cn = frob(&c);

    let mut x = DMatrix::<f64>::identity(n, n) * (n as f64).sqrt();
    let mut z = DMatrix::<f64>::identity(n, n) * (n as f64).sqrt();
    let mut y = DVector::<f64>::zeros(m);
    let mut best: Option<(f64, DMatrix<f64>, Progress)> = None;
    let mut iters = 0;

    // Each Gram entry's (row, weight), for reading Schur columns.
    while iters < settings.max_iters {
        let p = progress_scaled(sf, &b, &c, &x, &y, &z, bn, cn);
        let merit = p.pinf.max(p.dinf).max(p.gap);
        if best.as_ref().is_none_or(|bst| merit < bst.0) {
            best = Some((merit, x.clone(), Progress { ..p }));
        }
        if p.pinf <= settings.eps_feas && p.dinf <= settings.eps_feas && p.gap <= settings.eps_gap {
            break;
        }
        iters += 1;

        let Some(zc) = Cholesky::new(z.clone()) else { break };
        let Some(xc) = Cholesky::new(x.clone()) else { break };
        let zinv = zc.inverse();
        let mu = x.dot(&z) / n as f64;

        // Schur complement H_ij = <A_i, X A_j Z^{-1}>.
        let mut h = faer::Mat::<f64>::zeros(m, m);
        let mut bj = DMatrix::<f64>::zeros(n, n);
        for (j, row) in sf.rows.iter().enumerate() {
            bj.fill(0.0);
            for &(r, cc, w) in row {
                if r == cc {
                    bj.ger(w, &x.column(r), &zinv.row(r).transpose(), 1.0);
                } else {
                    bj.ger(0.5 * w, &x.column(r), &zinv.row(cc).transpose(), 1.0);
                    bj.ger(0.5 * w, &x.column(cc), &zinv.row(r).transpose(), 1.0);
                }
            }
            for (i, ri) in sf.rows.iter().enumerate().skip(j) {
                let v: f64 = ri
                    .iter()
                    .map(|&(r, cc, w)| {
                        if r == cc {
                            w * bj[(r, r)]
                        } else {
                            0.5 * w * (bj[(r, cc)] + bj[(cc, r)])
                        }
                    })
                    .sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let mut reg = 0.0;
        let diag_max = (0..m).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let llt = loop {
            let mut hr = h.clone();
            if reg > 0.0 {
                for i in 0..m {
                    hr[(i, i)] += reg * diag_max;
                }
            }
            match hr.llt(faer::Side::Lower) {
                Ok(f) => break Some(f),
                Err(_) if reg < 1e-2 => reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 },
                Err(_) => break None,
            }
        };
        let Some(llt) = llt else { break };
        let solve_h = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut r = faer::Mat::<f64>::from_fn(m, 1, |i, _| rhs[i]);
            llt.solve_in_place(&mut r);
            DVector::from_fn(m, |i, _| r[(i, 0)])
        };

        let rp = &b - sf.a(&x);
        let mut rd = &c - &z - sf.at(&y);
        symmetrize(&mut rd);
        let x_rd_zinv = &x * &rd * &zinv;
        let a_x_rd_zinv = sf.a(&x_rd_zinv);

        let direction = |rc: &DMatrix<f64>| -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
            let rhs = &rp - sf.a(rc) + &a_x_rd_zinv;
            let dy = solve_h(&rhs);
            let mut dz = &rd - sf.at(&dy);
            symmetrize(&mut dz);
            let mut dx = rc - &x * &dz * &zinv;
            symmetrize(&mut dx);
            (dx, dy, dz)
        };

        // Predictor.
        let rc_pred = -x.clone();
        let (dxp, _, dzp) = direction(&rc_pred);
        let ap = (STEP_FRACTION * max_step(xc.l_dirty(), &dxp)).min(1.0);
        let ad = (STEP_FRACTION * max_step(zc.l_dirty(), &dzp)).min(1.0);
        let mu_aff = (&x + ap * &dxp).dot(&(&z + ad * &dzp)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let mut corr = &dxp * &dzp * &zinv;
        symmetrize(&mut corr);
        let rc = sigma * mu * &zinv - &x - corr;
        let (dx, dy, dz) = direction(&rc);
        let ap = (STEP_FRACTION * max_step(xc.l_dirty(), &dx)).min(1.0);
        let ad = (STEP_FRACTION * max_step(zc.l_dirty(), &dz)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
        x += ap * dx;
        y += ad * dy;
        z += ad * dz;
        symmetrize(&mut x);
        symmetrize(&mut z);
    }
    let (_, bx, bp) = best.expect("progress recorded before the first step");
    (bx * bs, iters, bp)
}

#[allow(clippy::too_many_arguments)]
fn progress_scaled(
    sf: &StdForm,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    bn: f64,
    cn: f64,
) -> Progress {
    let pinf = (sf.a(x) - b).norm() / (1.0 + bn);
    let dinf = frob(&(c - sf.at(y) - z)) / (1.0 + cn);
    let pobj = c.dot(x);
    let dobj = b.dot(y);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Progress { pinf, dinf, gap }
}

/// Residual tolerance used by [`certify`], relative to the largest
/// right-hand side.
pub const CERTIFY_RESIDUAL: f64 = 1e-6;

/// Independent check of a returned solution: equalities hold, `G` is PSD
/// (smallest eigenvalue at least `-1e-7`), and `f(u) - τ = ũ^T G ũ` at
/// random points.
pub fn certify(solution: &SdpSolution, problem: &SosSdpProblem) -> bool {
    if solution.g.nrows() != problem.dim_g || solution.g.ncols() != problem.dim_g || !solution.tau.is_finite() {
        return false;
    }
    let scale = 1.0 + problem.equalities.iter().map(|e| e.rhs.abs()).fold(0.0, f64::max);
    let report = verify_certificate(problem, solution, 200);
    report.psd_ok()
        && report.max_eq_residual <= CERTIFY_RESIDUAL * scale
        && report.max_pointwise_gap <= CERTIFY_RESIDUAL * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos_sdp::{Equality, EqualityKind};

    /// `(terms, tau coefficient, rhs)` per equality.
    fn toy(rows: Vec<(Row, f64, f64)>, n: usize) -> SosSdpProblem {
        SosSdpProblem {
            dim_g: n,
            n2: 1,
            equalities: rows
                .into_iter()
                .map(|(terms, tau, rhs)| Equality {
                    kind: EqualityKind::Constant,
                    terms,
                    tau,
                    rhs,
                })
                .collect(),
        }
    }

    #[test]
    fn scalar_problem() {
        // G + τ = 3 with G >= 0: τ* = 3.
        let p = toy(vec![(vec![(0, 0, 1.0)], 1.0, 3.0)], 1);
        for s in [SolverSettings::default(), SolverSettings::interior_point()] {
            let sol = solve(&p, &s).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", s.method);
            assert!((sol.tau - 3.0).abs() < 1e-6, "{}", sol.tau);
        }
    }

    #[test]
    fn inconsistent_rows_reported_infeasible() {
        let p = toy(
            vec![
                (vec![(0, 0, 1.0)], 1.0, 3.0),
                (vec![(1, 1, 1.0)], 0.0, 1.0),
                (vec![(1, 1, 2.0)], 0.0, 5.0),
            ],
            2,
        );
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        let p = toy(vec![(vec![(0, 0, 1.0)], 1.0, 3.0), (vec![], 0.0, 1.0)], 1);
        assert_eq!(solve(&p, &SolverSettings::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn overlapping_rows_use_dense_projection() {
        // G00 + G11 = 2, G00 - G11 = 0, G11 + τ = 5  →  G = I, τ = 4.
        let p = toy(
            vec![
                (vec![(0, 0, 1.0), (1, 1, 1.0)], 0.0, 2.0),
                (vec![(0, 0, 1.0), (1, 1, -1.0)], 0.0, 0.0),
                (vec![(1, 1, 1.0)], 1.0, 5.0),
            ],
            2,
        );
        for s in [SolverSettings::default(), SolverSettings::interior_point()] {
            let sol = solve(&p, &s).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "{:?}", s.method);
            assert!((sol.tau - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_tau_rejected() {
        let p = toy(vec![(vec![(0, 0, 1.0)], 0.0, 3.0)], 1);
        assert!(solve(&p, &SolverSettings::default()).is_err());
        let bad = SolverSettings {
            max_iters: 0,
            ..SolverSettings::default()
        };
        let p = toy(vec![(vec![(0, 0, 1.0)], 1.0, 3.0)], 1);
        assert!(solve(&p, &bad).is_err());
    }
}
