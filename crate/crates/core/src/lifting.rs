//! Real-valued lifting of the equalizer output.
//!
//! With `u = [Re w; Im w]`, `x_r = [Re x; Im x]` and `x_i = [Im x; -Re x]`,
//! the output `y = w^H x` satisfies `Re y = u·x_r`, `Im y = u·x_i`, so
//! `|y|^2 = u^T X u` with the rank-2 matrix `X = x_r x_r^T + x_i x_i^T`.
//! Quadratic forms in `u` become linear in the lifted vector `qvec(u)`.
//!
//! Storage conventions: [`svec`] doubles off-diagonal entries while
//! [`qvec`] stores raw products, so `qvec(u)·svec(M) = u^T M u` with no
//! extra weights. Both use the lexicographic pair order of
//! [`LiftedIndexMap`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::signal_model::{SignalFrame, C64};

/// Bijection between pairs `i <= j` of `0..n2` and lifted coordinates,
/// in the order `(0,0), (0,1), .., (0,n2-1), (1,1), .., (n2-1,n2-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedIndexMap {
    n2: usize,
    pairs: Vec<(usize, usize)>,
    index: Vec<usize>,
}

impl LiftedIndexMap {
    pub fn new(n2: usize) -> Self {
        let mut pairs = Vec::with_capacity(n2 * (n2 + 1) / 2);
        let mut index = vec![0; n2 * n2];
        for i in 0..n2 {
            for j in i..n2 {
                index[i * n2 + j] = pairs.len();
                index[j * n2 + i] = pairs.len();
                pairs.push((i, j));
            }
        }
        Self { n2, pairs, index }
    }

    /// Infers `n2` from a lifted length `n2 (n2 + 1) / 2`.
    pub fn for_dim(dim: usize) -> Result<Self> {
        let n2 = ((((8 * dim + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        if n2 * (n2 + 1) / 2 != dim || dim == 0 {
            return Err(invalid(format!("{dim} is not a triangular number")));
        }
        Ok(Self::new(n2))
    }

    /// Length of the real vector `u`.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Lifted dimension `n2 (n2 + 1) / 2`.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_of(&self, coord: usize) -> (usize, usize) {
        self.pairs[coord]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Coordinate of the unordered pair `{i, j}`.
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        self.index[i * self.n2 + j]
    }
}

const SYM_TOL: f64 = 1e-9;

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > SYM_TOL * (1.0 + m[(i, j)].abs()) {
                return Err(invalid(format!("matrix not symmetric at ({i},{j}): off by {d:e}")));
            }
        }
    }
    Ok(())
}

/// Symmetric vectorization with doubled off-diagonal entries.
pub fn svec(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_symmetric(m)?;
    let map = LiftedIndexMap::new(m.nrows());
    Ok(DVector::from_iterator(
        map.dim(),
        map.pairs()
            .iter()
            .map(|&(i, j)| if i == j { m[(i, i)] } else { m[(i, j)] + m[(j, i)] }),
    ))
}

/// Inverse of [`svec`].
pub fn svec_inv(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let map = LiftedIndexMap::for_dim(v.len())?;
    let n = map.n2();
    let mut m = DMatrix::zeros(n, n);
    for (c, &(i, j)) in map.pairs().iter().enumerate() {
        if i == j {
            m[(i, i)] = v[c];
        } else {
            m[(i, j)] = v[c] / 2.0;
            m[(j, i)] = v[c] / 2.0;
        }
    }
    Ok(m)
}

/// All products `u_i u_j`, `i <= j`.
pub fn qvec(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(u[i] * u[j]);
        }
    }
    DVector::from_vec(out)
}

/// Symmetric matrix `U` with `U_ij` equal to the `(i,j)` coordinate of `v`,
/// the inverse of `qvec` on rank-1 inputs.
pub fn qvec_matrix(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let map = LiftedIndexMap::for_dim(v.len())?;
    let n = map.n2();
    let mut m = DMatrix::zeros(n, n);
    for (c, &(i, j)) in map.pairs().iter().enumerate() {
        m[(i, j)] = v[c];
        m[(j, i)] = v[c];
    }
    Ok(m)
}

/// Best rank-1 fit `u u^T` to the matrix behind a lifted vector.
///
/// Returns `u = sqrt(max(λ, 0))·e` for the largest eigenpair `(λ, e)`, with
/// the sign chosen so the largest-magnitude entry is positive.
pub fn rank1_approx(v: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let u_mat = qvec_matrix(v)?;
    let n = u_mat.nrows();
    let eig = SymmetricEigen::new(u_mat);
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let mut e: DVector<f64> = eig.eigenvectors.column(k).into_owned();
    let big = (0..n).max_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs())).unwrap_or(0);
    if e[big] < 0.0 {
        e.neg_mut();
    }
    Ok((e * lambda.max(0.0).sqrt(), lambda))
}

/// Real split `(x_r, x_i)` of a complex regressor.
pub fn real_split(x: &[C64]) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let mut xr = DVector::zeros(2 * n);
    let mut xi = DVector::zeros(2 * n);
    for (k, z) in x.iter().enumerate() {
        xr[k] = z.re;
        xr[n + k] = z.im;
        xi[k] = z.im;
        xi[n + k] = -z.re;
    }
    (xr, xi)
}

/// Rank-2 sample matrix `x_r x_r^T + x_i x_i^T`.
pub fn sample_matrix(x: &[C64]) -> DMatrix<f64> {
    let (xr, xi) = real_split(x);
    &xr * xr.transpose() + &xi * xi.transpose()
}

/// `svec` of [`sample_matrix`] without forming the matrix.
pub fn sample_svec(x: &[C64], map: &LiftedIndexMap) -> DVector<f64> {
    let (xr, xi) = real_split(x);
    DVector::from_iterator(
        map.dim(),
        map.pairs().iter().map(|&(i, j)| {
            let p = xr[i] * xr[j] + xi[i] * xi[j];
            if i == j {
                p
            } else {
                2.0 * p
            }
        }),
    )
}

/// `u = [Re w; Im w]`.
pub fn equalizer_to_u(w: &[C64]) -> DVector<f64> {
    let n = w.len();
    DVector::from_iterator(2 * n, w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)))
}

/// Sample second- and fourth-order output moments as linear and quadratic
/// forms in `v = qvec(u)`: `v·b = avg |y|^2`, `v^T C v = avg |y|^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentModel {
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub n2: usize,
    pub sample_count: usize,
}

/// Averages over every fully populated regressor `k = L_w .. K-1`.
pub fn estimate_moments(frame: &SignalFrame, l_w: usize) -> Result<MomentModel> {
    let k_len = frame.len();
    if k_len <= l_w {
        return Err(invalid(format!(
            "frame of {k_len} samples leaves no full regressor for L_w = {l_w}"
        )));
    }
    let n = frame.n_rx() * (l_w + 1);
    let map = LiftedIndexMap::new(2 * n);
    let count = k_len - l_w;
    let mut s = DMatrix::zeros(map.dim(), count);
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (col, k) in (l_w..k_len).enumerate() {
        for (j, xj) in frame.received.iter().enumerate() {
            for l in 0..=l_w {
                x[j * (l_w + 1) + l] = xj[k - l];
            }
        }
        s.set_column(col, &sample_svec(&x, &map));
    }
    let scale = 1.0 / count as f64;
    let b = s.column_sum() * scale;
    let mut c = &s * s.transpose() * scale;
    // The product is symmetric up to rounding; make it exact.
    for i in 0..c.nrows() {
        for j in i + 1..c.ncols() {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }
    Ok(MomentModel {
        b,
        c,
        n2: 2 * n,
        sample_count: count,
    })
}
