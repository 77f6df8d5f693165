//! Dense symmetric / positive-definite primitives.
//!
//! Positive definiteness is judged against a relative floor: a Cholesky pivot
//! or eigenvalue at or below `1e-12 ×` the largest diagonal entry (or `1e-12`
//! when no diagonal entry is positive) counts as singular.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub const PD_REL_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-12;

fn pd_floor(m: &DMatrix<f64>) -> f64 {
    let maxdiag = m.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if maxdiag > 0.0 {
        PD_REL_TOL * maxdiag
    } else {
        PD_REL_TOL
    }
}

fn check_square_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Structural(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Structural(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Cholesky factor of a symmetric PD matrix, with the relative pivot floor.
pub fn cholesky_pd(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    check_square_symmetric(m)?;
    let floor = pd_floor(m);
    let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|l| l * l).fold(f64::INFINITY, f64::min);
    if !(min_pivot > floor) {
        return Err(Error::NotPositiveDefinite(format!("pivot {min_pivot:e} below floor {floor:e}")));
    }
    Ok(chol)
}

/// `log det M` from the Cholesky diagonal: `2 Σ log L_ii`.
pub fn logdet_pd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_pd(m)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|l| l.ln()).sum::<f64>())
}

/// `M⁻¹` through the Cholesky factor, symmetrized.
pub fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = cholesky_pd(m)?.inverse();
    Ok(symmetrize(&inv))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Unique symmetric PD square root via the symmetric eigendecomposition.
pub fn pd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_symmetric(m)?;
    let floor = pd_floor(m);
    let eig = SymmetricEigen::new(symmetrize(m));
    let min_eig = eig.eigenvalues.min();
    if !(min_eig > floor) {
        return Err(Error::NotPositiveDefinite(format!("eigenvalue {min_eig:e} below floor {floor:e}")));
    }
    let v = &eig.eigenvectors;
    let root = eig.eigenvalues.map(f64::sqrt);
    let s = v * DMatrix::from_diagonal(&root) * v.transpose();
    Ok(symmetrize(&s))
}

/// Thin/complement split of `Aᵀ = [Q1 Q2] [R1; 0]` with `diag(R1) > 0`.
#[derive(Clone, Debug)]
pub struct QRSplit {
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub r1: DMatrix<f64>,
}

impl QRSplit {
    /// `[Q1 Q2]`.
    pub fn q(&self) -> DMatrix<f64> {
        let n = self.q1.nrows();
        let mut q = DMatrix::zeros(n, n);
        q.columns_mut(0, self.q1.ncols()).copy_from(&self.q1);
        q.columns_mut(self.q1.ncols(), self.q2.ncols()).copy_from(&self.q2);
        q
    }

    pub fn logdet_r1(&self) -> f64 {
        self.r1.diagonal().iter().map(|r| r.ln()).sum()
    }
}

/// Householder QR of an `n × m` matrix of full column rank, normalized so the
/// triangular factor has a strictly positive diagonal.
pub fn qr_pos_diag(at: &DMatrix<f64>) -> Result<QRSplit> {
    let (n, m) = at.shape();
    if m == 0 || m > n {
        return Err(Error::Structural(format!("qr_pos_diag expects n x m with 1 <= m <= n, got {n}x{m}")));
    }
    if at.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain("non-finite entry in QR input".into()));
    }

    let mut r = at.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let scale = at.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);

    for j in 0..m {
        let x = r.view((j, j), (n - j, 1)).clone_owned();
        let norm = x.norm();
        if !(norm > 1e-12 * scale) {
            return Err(Error::RankDeficient(format!("column {j} is dependent on the previous ones")));
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        v /= vnorm;
        // R[j.., :] -= 2 v (vᵀ R[j.., :])
        {
            let mut block = r.view_mut((j, 0), (n - j, m));
            let w = v.transpose() * &block;
            block -= &v * w * 2.0;
        }
        // Q[:, j..] -= 2 (Q[:, j..] v) vᵀ
        {
            let mut block = q.view_mut((0, j), (n, n - j));
            let w = &block * &v;
            block -= w * v.transpose() * 2.0;
        }
    }

    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for c in 0..m {
                r[(j, c)] = -r[(j, c)];
            }
            for row in 0..n {
                q[(row, j)] = -q[(row, j)];
            }
        }
    }

    let mut r1 = r.view((0, 0), (m, m)).clone_owned();
    for i in 0..m {
        for c in 0..i {
            r1[(i, c)] = 0.0;
        }
    }
    Ok(QRSplit {
        q1: q.columns(0, m).clone_owned(),
        q2: q.columns(m, n - m).clone_owned(),
        r1,
    })
}

/// `log det(Q1ᵀ J² Q1) − 2 log det(Q1ᵀ J Q1)`, nonnegative for symmetric PD `J`
/// and orthonormal `Q1`. It vanishes when `range(Q1)` is `J`-invariant but not
/// in general: `J = diag(1, 2)`, `Q1 = (1, 1)ᵀ/√2` gives `log 2.5 − log 2.25`.
pub fn det_square_gap(j: &DMatrix<f64>, q1: &DMatrix<f64>) -> Result<f64> {
    let jq = j * q1;
    let compressed = symmetrize(&(q1.transpose() * &jq));
    let squared = symmetrize(&(jq.transpose() * &jq));
    Ok(logdet_pd(&squared)? - 2.0 * logdet_pd(&compressed)?)
}
