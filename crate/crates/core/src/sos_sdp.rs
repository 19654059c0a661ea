//! Sum-of-squares SDP for an even quartic `f(u) = v^T A22 v + 2 A20·v + A00`.
//!
//! With `ũ = [qvec(u); 1]`, the task `max τ s.t. f(u) - τ = ũ^T G ũ, G ⪰ 0`
//! becomes linear equalities on the Gram matrix `G` (size `D + 1`, constant
//! entry last): one per degree-4 monomial, one per degree-2 monomial, and
//! `G_last,last + τ = A00`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cost_builder::CostCoefficients;
use crate::error::{invalid, Error, Result};
use crate::lifting::{qvec, LiftedIndexMap};
use crate::sdp_solver::SdpSolution;

/// Degree-4 monomials in `n2` variables and, for each, the tuples
/// `(a, b, c, d)` (distinct permutations with `a <= b`, `c <= d`) whose
/// lifted product `v_(a,b) v_(c,d)` produces it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticIndex {
    pub n2: usize,
    pub multisets: Vec<[usize; 4]>,
    pub q_tuples: Vec<Vec<[usize; 4]>>,
}

const PERMS: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

pub fn enumerate_quartics(n2: usize) -> Result<QuarticIndex> {
    if n2 == 0 {
        return Err(invalid("need at least one variable"));
    }
    let mut multisets = Vec::new();
    let mut q_tuples = Vec::new();
    for i in 0..n2 {
        for j in i..n2 {
            for l in j..n2 {
                for m in l..n2 {
                    let s = [i, j, l, m];
                    let mut q: Vec<[usize; 4]> = PERMS
                        .iter()
                        .map(|p| [s[p[0]], s[p[1]], s[p[2]], s[p[3]]])
                        .filter(|t| t[0] <= t[1] && t[2] <= t[3])
                        .collect();
                    q.sort_unstable();
                    q.dedup();
                    multisets.push(s);
                    q_tuples.push(q);
                }
            }
        }
    }
    Ok(QuarticIndex {
        n2,
        multisets,
        q_tuples,
    })
}

/// Which monomial an equality matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualityKind {
    /// Coefficient of `u_i u_j u_l u_m`.
    Quartic([usize; 4]),
    /// Coefficient of the lifted coordinate `v_c`.
    Pair(usize),
    /// Constant term.
    Constant,
    /// Entry `G[r][c]` pinned to zero (block structure of the general form).
    Zero(usize, usize),
}

/// `Σ w G[r][c] + tau·τ = rhs`, with terms on the upper triangle (`r <= c`).
/// An off-diagonal weight counts the entry once per ordered position, so a
/// symmetric pair contributes `w = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub kind: EqualityKind,
    pub terms: Vec<(usize, usize, f64)>,
    pub tau: f64,
    pub rhs: f64,
}

impl Equality {
    pub fn apply(&self, g: &DMatrix<f64>) -> f64 {
        self.terms.iter().map(|&(r, c, w)| w * g[(r, c)]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosSdpProblem {
    /// Gram matrix size `M = D + 1`.
    pub dim_g: usize,
    pub n2: usize,
    pub equalities: Vec<Equality>,
}

pub fn assemble(cost: &CostCoefficients) -> Result<SosSdpProblem> {
    let map = LiftedIndexMap::for_dim(cost.dim())?;
    let n2 = map.n2();
    let d = map.dim();
    let quartics = enumerate_quartics(n2)?;
    let mut equalities = Vec::with_capacity(quartics.multisets.len() + d + 1);
    for (s, q) in quartics.multisets.iter().zip(&quartics.q_tuples) {
        let mut terms: Vec<(usize, usize, f64)> = Vec::with_capacity(q.len());
        let mut rhs = 0.0;
        for t in q {
            let r = map.index_of(t[0], t[1]);
            let c = map.index_of(t[2], t[3]);
            rhs += cost.a22[(r, c)];
            let key = (r.min(c), r.max(c));
            match terms.iter_mut().find(|e| (e.0, e.1) == key) {
                Some(e) => e.2 += 1.0,
                None => terms.push((key.0, key.1, 1.0)),
            }
        }
        equalities.push(Equality {
            kind: EqualityKind::Quartic(*s),
            terms,
            tau: 0.0,
            rhs,
        });
    }
    for c in 0..d {
        equalities.push(Equality {
            kind: EqualityKind::Pair(c),
            terms: vec![(c, d, 1.0)],
            tau: 0.0,
            rhs: cost.a20[c],
        });
    }
    equalities.push(Equality {
        kind: EqualityKind::Constant,
        terms: vec![(d, d, 1.0)],
        tau: 1.0,
        rhs: cost.a00,
    });
    Ok(SosSdpProblem {
        dim_g: d + 1,
        n2,
        equalities,
    })
}

/// General even-quartic SOS over `[qvec(u); 1; u]`: the Gram matrix gains
/// a block on the linear monomials, which may carry part of every degree-2
/// coefficient. Couplings between the even and odd monomials are pinned
/// to zero, which loses nothing for even polynomials (averaging a
/// decomposition over `u -> -u` removes them). The reduced problem from
/// [`assemble`] is the special case of a zero linear block; it is exact
/// when the degree-2 part of the cost is negative semidefinite, as for
/// every blind cost, but can be loose otherwise (e.g. `u^4 + u^2`).
pub fn assemble_general(cost: &CostCoefficients) -> Result<SosSdpProblem> {
    let mut p = assemble(cost)?;
    let map = LiftedIndexMap::new(p.n2);
    let d = map.dim();
    let lin = |i: usize| d + 1 + i;
    for e in &mut p.equalities {
        if let EqualityKind::Pair(c) = e.kind {
            let (i, j) = map.pair_of(c);
            e.terms.push((lin(i), lin(j), if i == j { 0.5 } else { 1.0 }));
        }
    }
    for k in 0..p.n2 {
        for r in 0..=d {
            p.equalities.push(Equality {
                kind: EqualityKind::Zero(r, lin(k)),
                terms: vec![(r, lin(k), 1.0)],
                tau: 0.0,
                rhs: 0.0,
            });
        }
    }
    p.dim_g = d + 1 + p.n2;
    Ok(p)
}

impl SosSdpProblem {
    /// The quartic the problem was assembled from, read back from the
    /// right-hand sides.
    pub fn evaluate_polynomial(&self, u: &[f64]) -> f64 {
        let map = LiftedIndexMap::new(self.n2);
        let mut f = 0.0;
        for e in &self.equalities {
            f += match e.kind {
                EqualityKind::Quartic(s) => e.rhs * s.iter().map(|&i| u[i]).product::<f64>(),
                EqualityKind::Pair(c) => {
                    let (i, j) = map.pair_of(c);
                    2.0 * e.rhs * u[i] * u[j]
                }
                EqualityKind::Constant => e.rhs,
                EqualityKind::Zero(..) => 0.0,
            };
        }
        f
    }

    /// Largest absolute violation of the equalities at `(g, tau)`.
    pub fn max_residual(&self, g: &DMatrix<f64>, tau: f64) -> f64 {
        self.equalities
            .iter()
            .map(|e| (e.apply(g) + e.tau * tau - e.rhs).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the problem as plain text: a header, then per equality a line
    /// `eq <index> <kind> [monomial] <rhs> <tau> <nnz>` followed by `nnz`
    /// lines `row col weight` (0-based, upper triangle).
    pub fn export<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "sos-sdp 1").ok();
        writeln!(s, "dim {}", self.dim_g).ok();
        writeln!(s, "n2 {}", self.n2).ok();
        writeln!(s, "equalities {}", self.equalities.len()).ok();
        for (idx, e) in self.equalities.iter().enumerate() {
            let kind = match e.kind {
                EqualityKind::Quartic([i, j, l, m]) => format!("quartic {i} {j} {l} {m}"),
                EqualityKind::Pair(c) => format!("pair {c}"),
                EqualityKind::Constant => "const".to_string(),
                EqualityKind::Zero(r, c) => format!("zero {r} {c}"),
            };
            writeln!(s, "eq {idx} {kind} {:?} {:?} {}", e.rhs, e.tau, e.terms.len()).ok();
            for (r, c, w) in &e.terms {
                writeln!(s, "{r} {c} {w:?}").ok();
            }
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn import<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input)
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()));
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                Some(r) => {
                    let (n, l) = r?;
                    Ok((n, l.split_whitespace().map(str::to_string).collect()))
                }
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        fn perr(line: usize, msg: impl Into<String>) -> Error {
            Error::Parse {
                line,
                msg: msg.into(),
            }
        }
        fn num<T: std::str::FromStr>(line: usize, tok: Option<&String>) -> Result<T> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(line, format!("bad number {:?}", tok)))
        }
        fn header(line: usize, toks: &[String], key: &str) -> Result<usize> {
            if toks.first().map(String::as_str) != Some(key) {
                return Err(perr(line, format!("expected `{key}`")));
            }
            num(line, toks.get(1))
        }

        let (n, toks) = next("header")?;
        if toks.first().map(String::as_str) != Some("sos-sdp") {
            return Err(perr(n, "missing `sos-sdp` header"));
        }
        let (n, toks) = next("dim")?;
        let dim_g = header(n, &toks, "dim")?;
        let (n, toks) = next("n2")?;
        let n2 = header(n, &toks, "n2")?;
        let (n, toks) = next("equalities")?;
        let count = header(n, &toks, "equalities")?;
        let mut equalities = Vec::with_capacity(count);
        for idx in 0..count {
            let (n, toks) = next("eq")?;
            if toks.first().map(String::as_str) != Some("eq") || num::<usize>(n, toks.get(1))? != idx {
                return Err(perr(n, format!("expected `eq {idx}`")));
            }
            let (kind, rest) = match toks.get(2).map(String::as_str) {
                Some("quartic") => {
                    let mut s = [0; 4];
                    for (k, v) in s.iter_mut().enumerate() {
                        *v = num(n, toks.get(3 + k))?;
                    }
                    (EqualityKind::Quartic(s), 7)
                }
                Some("pair") => (EqualityKind::Pair(num(n, toks.get(3))?), 4),
                Some("const") => (EqualityKind::Constant, 3),
                Some("zero") => (EqualityKind::Zero(num(n, toks.get(3))?, num(n, toks.get(4))?), 5),
                other => return Err(perr(n, format!("unknown equality kind {other:?}"))),
            };
            let rhs: f64 = num(n, toks.get(rest))?;
            let tau: f64 = num(n, toks.get(rest + 1))?;
            let nnz: usize = num(n, toks.get(rest + 2))?;
            let mut terms = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let (n, t) = next("term")?;
                let r: usize = num(n, t.first())?;
                let c: usize = num(n, t.get(1))?;
                let w: f64 = num(n, t.get(2))?;
                if r > c || c >= dim_g {
                    return Err(perr(n, format!("term ({r},{c}) outside the upper triangle of {dim_g}")));
                }
                terms.push((r, c, w));
            }
            equalities.push(Equality { kind, terms, tau, rhs });
        }
        Ok(Self {
            dim_g,
            n2,
            equalities,
        })
    }
}

/// Outcome of [`verify_certificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub max_eq_residual: f64,
    pub min_eig_g: f64,
    pub max_pointwise_gap: f64,
}

impl CertificateReport {
    pub const PSD_TOL: f64 = 1e-7;

    pub fn psd_ok(&self) -> bool {
        self.min_eig_g >= -Self::PSD_TOL
    }
}

/// Re-checks equality residuals, the smallest eigenvalue of `G`, and the
/// identity `f(u) - τ = ũ^T G ũ` at `samples` random `u` with `E|u|^2 = 1`.
pub fn verify_certificate(problem: &SosSdpProblem, solution: &SdpSolution, samples: usize) -> CertificateReport {
    let g = &solution.g;
    let max_eq_residual = problem.max_residual(g, solution.tau);
    let min_eig_g = SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale = (problem.n2 as f64).sqrt().recip();
    let mut max_pointwise_gap: f64 = 0.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..problem.n2)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let mut ut = qvec(&u).as_slice().to_vec();
        ut.push(1.0);
        if g.nrows() > ut.len() {
            ut.extend_from_slice(&u);
        }
        let ut = DVector::from_vec(ut);
        let gram = ut.dot(&(g * &ut));
        let gap = problem.evaluate_polynomial(&u) - solution.tau - gram;
        max_pointwise_gap = max_pointwise_gap.max(gap.abs());
    }
    CertificateReport {
        max_eq_residual,
        min_eig_g,
        max_pointwise_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_enumeration_examples() {
        let q = enumerate_quartics(2).unwrap();
        assert_eq!(
            q.multisets,
            vec![[0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 1], [0, 1, 1, 1], [1, 1, 1, 1]]
        );
        assert_eq!(q.q_tuples[0], vec![[0, 0, 0, 0]]);
        assert_eq!(q.q_tuples[2], vec![[0, 0, 1, 1], [0, 1, 0, 1], [1, 1, 0, 0]]);
        assert!(enumerate_quartics(0).is_err());
    }

    #[test]
    fn quartic_count_is_binomial() {
        for n2 in 1..8 {
            let expect = (n2 + 3) * (n2 + 2) * (n2 + 1) * n2 / 24;
            assert_eq!(enumerate_quartics(n2).unwrap().multisets.len(), expect);
        }
    }
}
