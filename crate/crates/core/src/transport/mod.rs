//! Brenier maps from the standard Gaussian: linear PD maps between centred
//! Gaussians, monotone rearrangements onto 1-D targets, and block products.

mod distribution;
mod sampler;

pub use distribution::{parse_distribution_json, parse_targets_json, std_normal_cdf, std_normal_ln_pdf, std_normal_pdf, std_normal_quantile, Distribution};
pub use sampler::StdNormalSampler;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matkernels::{cholesky_pd, pd_sqrt};

/// Inputs are clamped to `|z| ≤ Z_CLAMP` before the quantile transform;
/// `Φ(8)` already rounds to 1.
pub const Z_CLAMP: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub enum TransportMap {
    /// `z ↦ S z` with `S` symmetric PD.
    LinearPd { s: DMatrix<f64> },
    /// `z ↦ F⁻¹(Φ(z))` onto a 1-D target.
    Monotone1d { target: Distribution },
    /// Blockwise `(T_1, …, T_k)`.
    Product { components: Vec<TransportMap> },
}

impl TransportMap {
    pub fn dim(&self) -> usize {
        match self {
            TransportMap::LinearPd { s } => s.nrows(),
            TransportMap::Monotone1d { .. } => 1,
            TransportMap::Product { components } => components.iter().map(|c| c.dim()).sum(),
        }
    }

    /// Evaluates `T(z)` into `out`.
    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(z.len())?;
        match self {
            TransportMap::LinearPd { s } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..z.len()).map(|k| s[(i, k)] * z[k]).sum();
                }
            }
            TransportMap::Monotone1d { target } => out[0] = monotone_value(target, z[0]),
            TransportMap::Product { components } => {
                let mut off = 0;
                for c in components {
                    let d = c.dim();
                    c.apply_into(&z[off..off + d], &mut out[off..off + d])?;
                    off += d;
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, z: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        self.apply_into(z, out.as_mut_slice())?;
        Ok(out)
    }

    /// `T'(z)` of a 1-D monotone map.
    pub fn derivative_1d(&self, z: f64) -> Result<f64> {
        match self {
            TransportMap::Monotone1d { target } => monotone_derivative(target, z),
            TransportMap::LinearPd { s } if s.nrows() == 1 => Ok(s[(0, 0)]),
            _ => Err(Error::Structural("derivative_1d needs a one-dimensional map".into())),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Structural(format!("point has dimension {len}, map has {}", self.dim())));
        }
        Ok(())
    }

    /// Whether the Jacobian is the same at every point.
    pub fn is_linear(&self) -> bool {
        match self {
            TransportMap::LinearPd { .. } => true,
            TransportMap::Monotone1d { target } => matches!(target, Distribution::Normal { .. }),
            TransportMap::Product { components } => components.iter().all(|c| c.is_linear()),
        }
    }
}

fn monotone_value(target: &Distribution, z: f64) -> f64 {
    if let Distribution::Normal { mu, sigma } = target {
        return mu + sigma * z;
    }
    let z = z.clamp(-Z_CLAMP, Z_CLAMP);
    if z <= 0.0 {
        target.quantile(std_normal_cdf(z))
    } else {
        target.quantile_upper(std_normal_cdf(-z))
    }
}

/// `T'(z) = φ(z) / f(T(z))`.
fn monotone_derivative(target: &Distribution, z: f64) -> Result<f64> {
    let deriv = match target {
        Distribution::Normal { sigma, .. } => *sigma,
        Distribution::Uniform { a, b } => (b - a) * std_normal_pdf(z.clamp(-Z_CLAMP, Z_CLAMP)),
        _ => {
            let zc = z.clamp(-Z_CLAMP, Z_CLAMP);
            let x = monotone_value(target, zc);
            (std_normal_ln_pdf(zc) - target.ln_pdf(x)).exp()
        }
    };
    if !(deriv > 0.0 && deriv.is_finite()) {
        return Err(Error::NumericalDomain(format!("map derivative {deriv} at z = {z} is not positive and finite")));
    }
    Ok(deriv)
}

/// Linear Brenier map `S = Σ^{1/2}` pushing `N(0, I)` to `N(0, Σ)`.
pub fn gaussian_brenier(sigma: &DMatrix<f64>) -> Result<TransportMap> {
    Ok(TransportMap::LinearPd { s: pd_sqrt(sigma)? })
}

/// Monotone rearrangement onto a 1-D target.
pub fn monotone_1d_map(target: Distribution) -> Result<TransportMap> {
    target.validate()?;
    Ok(TransportMap::Monotone1d { target })
}

/// Product of per-block maps; component dimensions must equal `partition`.
pub fn product_map(components: Vec<TransportMap>, partition: &[usize]) -> Result<TransportMap> {
    let dims: Vec<usize> = components.iter().map(|c| c.dim()).collect();
    if dims != partition {
        return Err(Error::Structural(format!("component dimensions {dims:?} do not match partition {partition:?}")));
    }
    Ok(TransportMap::Product { components })
}

/// `∇T(z)`, symmetric positive definite.
pub fn jacobian(map: &TransportMap, z: &[f64]) -> Result<DMatrix<f64>> {
    map.check_dim(z.len())?;
    let n = map.dim();
    let mut out = DMatrix::zeros(n, n);
    fill_jacobian(map, z, &mut out, 0)?;
    Ok(out)
}

fn fill_jacobian(map: &TransportMap, z: &[f64], out: &mut DMatrix<f64>, off: usize) -> Result<()> {
    match map {
        TransportMap::LinearPd { s } => {
            out.view_mut((off, off), (s.nrows(), s.ncols())).copy_from(s);
        }
        TransportMap::Monotone1d { target } => out[(off, off)] = monotone_derivative(target, z[0])?,
        TransportMap::Product { components } => {
            let mut local = 0;
            for c in components {
                let d = c.dim();
                fill_jacobian(c, &z[local..local + d], out, off + local)?;
                local += d;
            }
        }
    }
    Ok(())
}

/// Checks `jacobian` output for positive definiteness, mapping failures to
/// `NumericalDomain`.
pub fn checked_jacobian(map: &TransportMap, z: &[f64]) -> Result<DMatrix<f64>> {
    let j = jacobian(map, z)?;
    cholesky_pd(&j).map_err(|e| Error::NumericalDomain(format!("Jacobian is not PD: {e}")))?;
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> TransportMap {
        monotone_1d_map(Distribution::Exponential { rate: 1.0 }).unwrap()
    }

    #[test]
    fn gaussian_brenier_examples() {
        let m = gaussian_brenier(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(jacobian(&m, &[0.3, -1.0]).unwrap(), DMatrix::identity(2, 2));
        let m = gaussian_brenier(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let v = m.apply(&[1.0, 1.0]).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
        let sig = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let TransportMap::LinearPd { s } = gaussian_brenier(&sig).unwrap() else { panic!() };
        assert!((&s * &s - sig).amax() < 1e-12);
    }

    #[test]
    fn standard_normal_target_is_identity() {
        let t = monotone_1d_map(Distribution::Normal { mu: 0.0, sigma: 1.0 }).unwrap();
        for i in 0..=100 {
            let z = -5.0 + 0.1 * i as f64;
            assert!((t.apply(&[z]).unwrap()[0] - z).abs() < 1e-9);
        }
        let t = monotone_1d_map(Distribution::Normal { mu: 1.5, sigma: 2.0 }).unwrap();
        assert!((t.apply(&[0.7]).unwrap()[0] - (1.5 + 1.4)).abs() < 1e-14);
        assert_eq!(jacobian(&t, &[0.7]).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn exponential_map_values() {
        let t = exp1();
        assert!((t.apply(&[0.0]).unwrap()[0] - 2.0_f64.ln()).abs() < 1e-14);
        for z in [-3.0, -0.5, 0.4, 2.0, 6.0] {
            let expect = -std_normal_cdf(-z).ln();
            let got = t.apply(&[z]).unwrap()[0];
            assert!((got - expect).abs() < 1e-9 * expect.abs().max(1.0), "z = {z}");
        }
        let j = jacobian(&t, &[0.0]).unwrap()[(0, 0)];
        assert!((j - 0.7978846).abs() < 1e-7);
    }

    #[test]
    fn product_values_and_jacobian() {
        let p = product_map(
            vec![monotone_1d_map(Distribution::Normal { mu: 1.0, sigma: 2.0 }).unwrap(), exp1()],
            &[1, 1],
        )
        .unwrap();
        let v = p.apply(&[0.0, 0.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] - 0.6931472).abs() < 1e-7);
        let j = jacobian(&p, &[0.3, -0.8]).unwrap();
        assert_eq!(j[(0, 1)], 0.0);
        assert!(j[(0, 0)] > 0.0 && j[(1, 1)] > 0.0);

        let id = gaussian_brenier(&DMatrix::identity(1, 1)).unwrap();
        let p = product_map(vec![id.clone(), id], &[1, 1]).unwrap();
        assert_eq!(jacobian(&p, &[0.2, 0.4]).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(p.apply(&[0.2, 0.4]).unwrap().as_slice(), &[0.2, 0.4]);
    }

    #[test]
    fn product_dimension_mismatch() {
        assert!(matches!(product_map(vec![exp1()], &[2]), Err(Error::Structural(_))));
        assert!(matches!(exp1().apply(&[0.0, 1.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn mixed_block_product() {
        let lin = gaussian_brenier(&DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let p = product_map(vec![exp1(), lin], &[1, 2]).unwrap();
        let j = checked_jacobian(&p, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(j.nrows(), 3);
        assert_eq!(j[(0, 1)], 0.0);
        assert!(!p.is_linear());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let targets = [
            Distribution::Exponential { rate: 2.0 },
            Distribution::Uniform { a: -1.0, b: 3.0 },
            Distribution::GaussianMixture { weights: vec![0.3, 0.7], means: vec![-2.0, 1.5], sigmas: vec![0.5, 1.0] },
        ];
        for target in targets {
            let t = monotone_1d_map(target.clone()).unwrap();
            let h = 1e-5;
            for i in 0..=80 {
                let z = -4.0 + 0.1 * i as f64;
                let fd = (t.apply(&[z + h]).unwrap()[0] - t.apply(&[z - h]).unwrap()[0]) / (2.0 * h);
                let an = t.derivative_1d(z).unwrap();
                assert!(((an - fd) / an).abs() < 1e-6, "{target:?} z = {z}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let targets = [
            Distribution::Exponential { rate: 1.0 },
            Distribution::Uniform { a: 0.0, b: 1.0 },
            Distribution::Normal { mu: -1.0, sigma: 0.3 },
            Distribution::GaussianMixture { weights: vec![0.5, 0.5], means: vec![-3.0, 3.0], sigmas: vec![1.0, 1.0] },
        ];
        for t in targets {
            for i in 1..=99 {
                let p = i as f64 / 100.0;
                assert!((t.cdf(t.quantile(p)) - p).abs() < 1e-6, "{t:?} p = {p}");
                assert!((t.sf(t.quantile_upper(1.0 - p)) - (1.0 - p)).abs() < 1e-6);
            }
        }
    }
}
