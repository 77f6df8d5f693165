//! `F(B) = ½ Σ c_i log det B_i − ½ Σ d_j log det(A_j B A_jᵀ)` over
//! block-diagonal positive-definite `B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datum::BLDatum;
use crate::error::{Error, Result};
use crate::matkernels::{cholesky_pd, symmetrize, PD_REL_TOL, SYMMETRY_TOL};
use crate::serde_ext;

/// `diag(B_1, …, B_k)` with every block symmetric positive definite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPDMatrix {
    #[serde(with = "serde_ext::matrices")]
    blocks: Vec<DMatrix<f64>>,
}

impl BlockPDMatrix {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Structural("block matrix needs at least one block".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            cholesky_pd(b).map_err(|e| match e {
                Error::NotPositiveDefinite(msg) => Error::NotPositiveDefinite(format!("block {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(BlockPDMatrix { blocks })
    }

    /// One scalar `b_i > 0` per 1×1 block.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect())
    }

    pub fn identity(partition: &[usize]) -> Self {
        BlockPDMatrix { blocks: partition.iter().map(|&r| DMatrix::identity(r, r)).collect() }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        self.blocks
    }

    pub fn partition(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    /// The full `n × n` block-diagonal matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        assemble_blocks(&self.blocks)
    }

    /// `tB`; `t` must be positive.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("scale factor {t} must be positive and finite")));
        }
        Self::new(self.blocks.iter().map(|b| b * t).collect())
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn check_compatible(&self, datum: &BLDatum) -> Result<()> {
        if self.partition() != datum.partition() {
            return Err(Error::Structural(format!(
                "block sizes {:?} do not match partition {:?}",
                self.partition(),
                datum.partition()
            )));
        }
        Ok(())
    }
}

pub(crate) fn assemble_blocks(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.iter().map(|b| b.nrows()).sum();
    let mut full = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let r = b.nrows();
        full.view_mut((off, off), (r, r)).copy_from(b);
        off += r;
    }
    full
}

/// Symmetric block-diagonal matrix, used for gradients and tangent directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSymMatrix {
    #[serde(with = "serde_ext::matrices")]
    blocks: Vec<DMatrix<f64>>,
}

impl BlockSymMatrix {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if !b.is_square() {
                return Err(Error::Structural(format!("block {i} is not square")));
            }
            let scale = b.amax().max(1.0);
            if (b - b.transpose()).amax() > SYMMETRY_TOL * scale {
                return Err(Error::Structural(format!("block {i} is not symmetric")));
            }
        }
        Ok(BlockSymMatrix { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Frobenius inner product `Σ_i tr(X_iᵀ Y_i)`.
    pub fn inner(&self, other: &BlockSymMatrix) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dot(b)).sum()
    }

    /// Frobenius inner product with a PD block matrix.
    pub fn inner_pd(&self, other: &BlockPDMatrix) -> f64 {
        self.blocks.iter().zip(other.blocks()).map(|(a, b)| a.dot(b)).sum()
    }
}

/// Evaluates `F(B)`. Terms with zero coefficient are skipped.
pub fn objective(datum: &BLDatum, b: &BlockPDMatrix) -> Result<f64> {
    b.check_compatible(datum)?;
    objective_blocks(datum, b.blocks())
}

/// `F` on raw blocks, without re-validating them.
pub(crate) fn objective_blocks(datum: &BLDatum, blocks: &[DMatrix<f64>]) -> Result<f64> {
    objective_factors(datum, &cholesky_factors(blocks)?)
}

fn cholesky_factors(blocks: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    blocks.iter().map(|b| Ok(cholesky_pd(b)?.l())).collect()
}

/// `F` from lower-triangular factors `B_i = L_i L_iᵀ`. Map terms go through
/// the triangular factor of `(A_j L)ᵀ` rather than through `A_j B A_jᵀ`, so
/// rounding grows with `cond(A_j L)` instead of its square.
pub(crate) fn objective_factors(datum: &BLDatum, factors: &[DMatrix<f64>]) -> Result<f64> {
    let mut value = 0.0;
    for (&c, l) in datum.block_coeffs().iter().zip(factors) {
        if c != 0.0 {
            value += c * l.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>();
        }
    }
    let full = assemble_blocks(factors);
    for (&d, a) in datum.map_coeffs().iter().zip(datum.maps()) {
        if d != 0.0 {
            let r = map_factor(a, &full)?;
            value -= d * r.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>();
        }
    }
    Ok(value)
}

/// Upper-triangular `R` with `A L Lᵀ Aᵀ = Rᵀ R`.
pub(crate) fn map_factor(a: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = (a * l).transpose().qr().r();
    let scale = r.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    let min_pivot = r.diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if !(min_pivot > PD_REL_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotPositiveDefinite(format!("A B Aᵀ pivot {min_pivot:e} below floor")));
    }
    Ok(r)
}

/// Block-diagonal part of `∇F(B) = ½ Σ c_i diag(B_i⁻¹) − ½ Σ d_j A_jᵀ (A_j B A_jᵀ)⁻¹ A_j`.
pub fn gradient(datum: &BLDatum, b: &BlockPDMatrix) -> Result<BlockSymMatrix> {
    b.check_compatible(datum)?;
    Ok(BlockSymMatrix { blocks: gradient_blocks(datum, b.blocks())? })
}

pub(crate) fn gradient_blocks(datum: &BLDatum, blocks: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    gradient_factors(datum, &cholesky_factors(blocks)?)
}

/// Gradient from factors: `A_jᵀ (A_j B A_jᵀ)⁻¹ A_j = MᵀM` with `M = R⁻ᵀ A_j`,
/// and `B_i⁻¹ = L_i⁻ᵀ L_i⁻¹`.
pub(crate) fn gradient_factors(datum: &BLDatum, factors: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let n = datum.dim();
    let full = assemble_blocks(factors);
    let mut ambient = DMatrix::<f64>::zeros(n, n);
    for (&d, a) in datum.map_coeffs().iter().zip(datum.maps()) {
        if d != 0.0 {
            let r = map_factor(a, &full)?;
            let m = r
                .transpose()
                .solve_lower_triangular(a)
                .ok_or_else(|| Error::NotPositiveDefinite("singular map factor".into()))?;
            ambient -= m.transpose() * m * (0.5 * d);
        }
    }
    let mut out = Vec::with_capacity(factors.len());
    for ((&c, l), off) in datum.block_coeffs().iter().zip(factors).zip(datum.block_offsets()) {
        let r = l.nrows();
        let mut g = ambient.view((off, off), (r, r)).clone_owned();
        if c != 0.0 {
            let linv = l
                .solve_lower_triangular(&DMatrix::identity(r, r))
                .ok_or_else(|| Error::NotPositiveDefinite("singular block factor".into()))?;
            g += linv.transpose() * linv * (0.5 * c);
        }
        out.push(symmetrize(&g));
    }
    Ok(out)
}

/// `F(tB) − F(B) − ½ (Σ c_i r_i − Σ d_j n_j) log t`, zero up to rounding for
/// every datum.
pub fn scale_invariance_defect(datum: &BLDatum, b: &BlockPDMatrix, t: f64) -> Result<f64> {
    let scaled = b.scaled(t)?;
    let f_t = objective(datum, &scaled)?;
    let f_1 = objective(datum, b)?;
    Ok(f_t - f_1 - 0.5 * datum.balance() * t.ln())
}
