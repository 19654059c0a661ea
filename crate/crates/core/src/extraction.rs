//! Recovery of equalizer coefficients from an optimal Gram matrix.
//!
//! Every global minimizer `u*` gives a lifted vector `[qvec(u*); 1]` in the
//! null space of `G_opt`. Both procedures alternate a projection onto the
//! (thresholded) null space with a rank-1 re-lifting; `pp1` fixes the scale
//! by dividing through the constant entry, `pp2` by matching the output
//! power to the source power.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lifting::{qvec, rank1_approx, LiftedIndexMap};
use crate::signal_model::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSettings {
    /// Eigenvalues below this span the null space.
    pub gamma: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
    pub init_seed: u64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            gamma: 1e-7,
            max_iters: 50,
            conv_tol: 1e-9,
            init_seed: 0,
        }
    }
}

impl ExtractionSettings {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.conv_tol > 0.0) {
            return Err(invalid("gamma and conv_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub u: DVector<f64>,
    /// Projection/re-lift rounds performed.
    pub iters: usize,
    pub converged: bool,
}

/// Orthonormal eigenvectors of `g` with eigenvalue below `gamma`, as columns.
pub fn null_space_basis(g: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(invalid("Gram matrix must be square and non-empty"));
    }
    let mut sym = g.clone();
    let n = sym.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] < gamma).collect();
    if idx.is_empty() {
        return Err(Error::NoNullSpace { gamma });
    }
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ok(DMatrix::from_fn(n, idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]))
}

/// Splits `u = [Re w; Im w]` back into `w`.
pub fn u_to_equalizer(u: &[f64]) -> Result<Vec<C64>> {
    if !u.len().is_multiple_of(2) {
        return Err(invalid(format!("u has odd length {}", u.len())));
    }
    let n = u.len() / 2;
    Ok((0..n).map(|k| C64::new(u[k], u[n + k])).collect())
}

fn lift(u: &DVector<f64>) -> DVector<f64> {
    let q = qvec(u.as_slice());
    let mut out = DVector::zeros(q.len() + 1);
    out.rows_mut(0, q.len()).copy_from(&q);
    out[q.len()] = 1.0;
    out
}

/// Distance between successive iterates modulo the blind phase ambiguity:
/// `min_φ ||w' - e^{jφ} w||` when `u` has the `[Re; Im]` layout, otherwise
/// `min(||u' - u||, ||u' + u||)`.
fn iterate_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    if new.len().is_multiple_of(2) {
        let a = u_to_equalizer(new.as_slice()).expect("even length");
        let b = u_to_equalizer(old.as_slice()).expect("even length");
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        let cross: C64 = a.iter().zip(&b).map(|(x, y)| y.conj() * x).sum();
        (na + nb - 2.0 * cross.norm()).max(0.0).sqrt()
    } else {
        (new - old).norm().min((new + old).norm())
    }
}

/// Orients a lifted vector so its quadratic part has nonnegative trace
/// (true of every `qvec(u)`), resolving the sign of null-space vectors.
fn orient(h: &mut DVector<f64>, map: &LiftedIndexMap) {
    let trace: f64 = map
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| i == j)
        .map(|(c, _)| h[c])
        .sum();
    if trace < 0.0 {
        h.neg_mut();
    }
}

fn check_basis(v: &DMatrix<f64>) -> Result<LiftedIndexMap> {
    if v.ncols() == 0 {
        return Err(invalid("empty null-space basis"));
    }
    if v.nrows() < 2 {
        return Err(invalid("basis vectors are too short to hold a lifted vector"));
    }
    LiftedIndexMap::for_dim(v.nrows() - 1)
}

fn random_start(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| StandardNormal.sample(&mut rng))
}

const HAZARD: f64 = 1e-12;

/// Normalization procedure: project, divide by the constant entry, take the
/// best rank-1 fit, re-lift.
pub fn extract_pp1(v: &DMatrix<f64>, settings: &ExtractionSettings) -> Result<Extracted> {
    settings.validate()?;
    let map = check_basis(v)?;
    let d = map.dim();
    let step = |h: &DVector<f64>| -> Result<DVector<f64>> {
        let last = h[d];
        if last.abs() < HAZARD {
            return Err(Error::DivisionHazard { value: last });
        }
        let scaled = h.rows(0, d) / last;
        Ok(rank1_approx(&scaled)?.0)
    };
    if v.ncols() == 1 {
        let u = step(&v.column(0).into_owned())?;
        return Ok(Extracted {
            u,
            iters: 1,
            converged: true,
        });
    }
    let mut ut = random_start(d + 1, settings.init_seed);
    let mut prev: Option<DVector<f64>> = None;
    for k in 1..=settings.max_iters {
        let h = v * (v.transpose() * &ut);
        let u = step(&h)?;
        let done = prev
            .as_ref()
            .is_some_and(|p| iterate_change(&u, p) <= settings.conv_tol * p.norm().max(1.0));
        ut = lift(&u);
        if done {
            return Ok(Extracted {
                u,
                iters: k,
                converged: true,
            });
        }
        prev = Some(u);
    }
    Ok(Extracted {
        u: prev.expect("at least one iteration"),
        iters: settings.max_iters,
        converged: false,
    })
}

/// Power-rescale procedure: project, take the best rank-1 fit, rescale so
/// the output power `qvec(u)·b` equals `sigma_s2`, re-lift.
pub fn extract_pp2(
    v: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma_s2: f64,
    settings: &ExtractionSettings,
) -> Result<Extracted> {
    settings.validate()?;
    let map = check_basis(v)?;
    let d = map.dim();
    if b.len() != d {
        return Err(invalid(format!("moment vector has length {}, expected {d}", b.len())));
    }
    if !(sigma_s2 > 0.0) {
        return Err(invalid("source power must be positive"));
    }
    let step = |mut h: DVector<f64>| -> Result<DVector<f64>> {
        orient(&mut h, &map);
        let (u, _) = rank1_approx(&h.rows(0, d).into_owned())?;
        let power = qvec(u.as_slice()).dot(b);
        if !(power > 0.0) {
            return Err(Error::DegeneratePower { power });
        }
        Ok(u * (sigma_s2 / power).sqrt())
    };
    if v.ncols() == 1 {
        let u = step(v.column(0).into_owned())?;
        return Ok(Extracted {
            u,
            iters: 1,
            converged: true,
        });
    }
    let mut ut = random_start(d + 1, settings.init_seed);
    let mut prev: Option<DVector<f64>> = None;
    for k in 1..=settings.max_iters {
        let h = v * (v.transpose() * &ut);
        let u = step(h)?;
        let done = prev
            .as_ref()
            .is_some_and(|p| iterate_change(&u, p) <= settings.conv_tol * p.norm().max(1.0));
        ut = lift(&u);
        if done {
            return Ok(Extracted {
                u,
                iters: k,
                converged: true,
            });
        }
        prev = Some(u);
    }
    Ok(Extracted {
        u: prev.expect("at least one iteration"),
        iters: settings.max_iters,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_examples() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let v = null_space_basis(&g, 1e-7).unwrap();
        assert_eq!(v.ncols(), 1);
        assert!((v[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(matches!(
            null_space_basis(&DMatrix::identity(3, 3), 1e-7),
            Err(Error::NoNullSpace { .. })
        ));
    }

    #[test]
    fn equalizer_split() {
        assert_eq!(u_to_equalizer(&[1.0, 0.0]).unwrap(), vec![C64::new(1.0, 0.0)]);
        assert_eq!(u_to_equalizer(&[0.0, 1.0]).unwrap(), vec![C64::new(0.0, 1.0)]);
        assert!(u_to_equalizer(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fixed_point_basis() {
        // V spans exactly [qvec(w); 1].
        let w = DVector::from_vec(vec![0.6, -0.8]);
        let mut l = lift(&w);
        l /= l.norm();
        let v = DMatrix::from_column_slice(4, 1, l.as_slice());
        let out = extract_pp1(&v, &ExtractionSettings::default()).unwrap();
        assert!((out.u.clone() - &w).norm().min((out.u + &w).norm()) < 1e-12);
    }
}
