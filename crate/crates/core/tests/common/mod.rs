#![allow(dead_code)]

use blepi::{BLDatum, BlockPDMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; test-only.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random orthogonal matrix from the QR of a Gaussian matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, n).qr().q()
}

/// Symmetric PD matrix with eigenvalues log-uniform in `[lo, hi]`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = orthogonal(rng, n);
    let eig = DVector::from_fn(n, |_, _| (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp());
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Block PD matrix whose overall condition number is at most `cond`.
pub fn random_block_pd(rng: &mut ChaCha8Rng, partition: &[usize], cond: f64) -> BlockPDMatrix {
    let scale = (rng.random_range(-2.0..2.0_f64)).exp();
    BlockPDMatrix::new(partition.iter().map(|&r| random_pd(rng, r, scale, scale * cond)).collect()).unwrap()
}

/// Numerical rank of the columns of `a` selected by `mask`.
pub fn subset_rank(a: &DMatrix<f64>, mask: u32) -> usize {
    let cols: Vec<usize> = (0..a.ncols()).filter(|i| mask & (1 << i) != 0).collect();
    if cols.is_empty() {
        return 0;
    }
    let sub = a.select_columns(&cols);
    let sv = sub.singular_values();
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

/// Strict subcriticality for scalar-block data: every proper nonempty
/// coordinate subset `S` has `Σ_S c_i < Σ_j d_j rank(A_j[:, S])`.
pub fn strictly_subcritical(c: &[f64], d: &[f64], maps: &[DMatrix<f64>]) -> bool {
    let n = c.len();
    (1..(1u32 << n) - 1).all(|mask| {
        let lhs: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| c[i]).sum();
        let rhs: f64 = d.iter().zip(maps).map(|(d, a)| d * subset_rank(a, mask) as f64).sum();
        lhs < rhs - 1e-6
    })
}

/// Random datum with scalar blocks (2 ≤ n ≤ 6) and 1–2 Gaussian maps.
///
/// Balanced data are resampled until strictly subcritical, so `M_g` is
/// finite and attained. Unbalanced data get a shifted first weight.
pub fn random_datum(rng: &mut ChaCha8Rng, balanced: bool) -> BLDatum {
    loop {
        let n = rng.random_range(2..=6usize);
        let num_maps = rng.random_range(1..=2usize);
        let mut maps = Vec::new();
        let mut d = Vec::new();
        for _ in 0..num_maps {
            let m = rng.random_range(1..n);
            maps.push(gaussian_matrix(rng, m, n));
            d.push(rng.random_range(0.5..2.0));
        }
        let total: f64 = d.iter().zip(&maps).map(|(d, a)| d * a.nrows() as f64).sum();
        let mut c: Vec<f64> = (0..n).map(|_| 1.0 + rng.random_range(-0.3..0.3)).collect();
        let got: f64 = c.iter().sum();
        for ci in &mut c {
            *ci *= total / got;
        }
        if !balanced {
            c[0] += 0.5;
            return BLDatum::new(vec![1; n], c, d, maps).unwrap();
        }
        if strictly_subcritical(&c, &d, &maps) {
            return BLDatum::new(vec![1; n], c, d, maps).unwrap();
        }
    }
}

/// Lifts a scalar-block datum to 2×2 blocks: maps `M_j (A_j ⊗ I_2) U` with
/// `U` block-diagonal orthogonal and `M_j` well-conditioned. Returns the datum and the additive offset
/// `−Σ d_j log|det M_j|`, so that `M_g(lifted) = 2 M_g(scalar) + offset`.
pub fn lift_to_pairs(rng: &mut ChaCha8Rng, scalar: &BLDatum) -> (BLDatum, f64) {
    let n = scalar.dim();
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        u.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&orthogonal(rng, 2));
    }
    let mut offset = 0.0;
    let maps = scalar
        .maps()
        .iter()
        .zip(scalar.map_coeffs())
        .map(|(a, &d)| {
            let kron = a.kronecker(&DMatrix::<f64>::identity(2, 2));
            let m = kron.nrows();
            let scales = DVector::from_fn(m, |_, _| rng.random_range(0.5..2.0));
            let mix = orthogonal(rng, m) * DMatrix::from_diagonal(&scales);
            offset -= d * mix.determinant().abs().ln();
            mix * kron * &u
        })
        .collect();
    let datum = BLDatum::new(vec![2; n], scalar.block_coeffs().to_vec(), scalar.map_coeffs().to_vec(), maps).unwrap();
    (datum, offset)
}

/// Random PD matrix with condition number at most `cond`.
pub fn random_pd_cond(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> DMatrix<f64> {
    random_pd(rng, n, 1.0, cond)
}

/// `‖fd − ∇F‖ / ‖∇F‖` over every independent entry of every block, with
/// central differences stepped at `1e-5` times the block's smallest eigenvalue.
pub fn fd_gradient_error(datum: &BLDatum, b: &BlockPDMatrix) -> f64 {
    let g = blepi::gradient(datum, b).unwrap();
    let mut fd_all = Vec::new();
    let mut an_all = Vec::new();
    for (i, (bi, gi)) in b.blocks().iter().zip(g.blocks()).enumerate() {
        let r = bi.nrows();
        let step = 1e-5 * bi.symmetric_eigenvalues().min();
        for p in 0..r {
            for q in 0..=p {
                let mut e = DMatrix::zeros(r, r);
                e[(p, q)] = 1.0;
                e[(q, p)] = 1.0;
                let shifted = |s: f64| {
                    let mut blocks = b.blocks().to_vec();
                    blocks[i] = &blocks[i] + &e * s;
                    blepi::objective(datum, &BlockPDMatrix::new(blocks).unwrap()).unwrap()
                };
                fd_all.push((shifted(step) - shifted(-step)) / (2.0 * step));
                an_all.push(gi.dot(&e));
            }
        }
    }
    let fd = DVector::from_vec(fd_all);
    let an = DVector::from_vec(an_all);
    (&fd - &an).norm() / an.norm()
}
