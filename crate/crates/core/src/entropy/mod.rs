//! Differential entropy in nats: Gaussian closed form, plug-in Monte Carlo
//! with a known density, and the Kozachenko–Leonenko nearest-neighbour
//! estimator.

mod kdtree;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::matkernels::{cholesky_pd, logdet_pd};

/// `ln(2πe)`.
pub const LN_2PI_E: f64 = 2.837_877_066_409_345_3;

/// Above this many points (in dimension ≥ 2) neighbour search uses a k-d tree.
pub const BRUTE_FORCE_LIMIT: usize = 50_000;

pub const MAX_KNN_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyMethod {
    GaussianClosedForm,
    PlugIn,
    #[serde(rename = "KNN")]
    Knn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EntropyMethod,
    pub n_samples: usize,
}

impl EntropyEstimate {
    pub fn exact(value: f64) -> Self {
        EntropyEstimate { value, stderr: 0.0, method: EntropyMethod::GaussianClosedForm, n_samples: 0 }
    }
}

/// A set of points in ℝᵈ stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Structural("points need dimension >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Structural(format!("{} coordinates do not split into dimension {dim}", coords.len())));
        }
        Ok(Points { dim, coords })
    }

    pub fn from_scalars(values: Vec<f64>) -> Self {
        Points { dim: 1, coords: values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Applies `x ↦ a x + b` coordinatewise.
    pub fn affine(&self, a: f64, b: f64) -> Points {
        Points { dim: self.dim, coords: self.coords.iter().map(|x| a * x + b).collect() }
    }
}

/// `½ log((2πe)ⁿ det Σ)`.
pub fn gaussian_entropy(sigma: &DMatrix<f64>) -> Result<EntropyEstimate> {
    let n = sigma.nrows() as f64;
    Ok(EntropyEstimate::exact(0.5 * (n * LN_2PI_E + logdet_pd(sigma)?)))
}

/// `−(1/N) Σ log f(x_i)` with its Monte Carlo standard error.
pub fn plugin_entropy<F>(log_density: F, samples: &Points) -> Result<EntropyEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = samples.len();
    if n == 0 {
        return Err(Error::Parameter("plug-in entropy needs at least one sample".into()));
    }
    let terms: Vec<f64> = (0..n).into_par_iter().map(|i| -log_density(samples.point(i))).collect();
    if let Some(i) = terms.iter().position(|t| !t.is_finite()) {
        return Err(Error::NumericalDomain(format!("log-density is not finite at sample {i} ({:?})", samples.point(i))));
    }
    let (value, stderr) = mean_and_stderr(&terms);
    Ok(EntropyEstimate { value, stderr, method: EntropyMethod::PlugIn, n_samples: n })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnOptions {
    /// Perturb every coordinate by a deterministic offset of relative size
    /// `1e-10` before the search, breaking ties between repeated points.
    pub jitter: bool,
    pub jitter_seed: u64,
    /// In dimension ≥ 2, search in coordinates whitened by the sample
    /// covariance and add back `½ log det Σ̂`. The estimator's finite-sample
    /// bias grows with anisotropy; whitening removes most of it.
    pub whiten: bool,
}

impl Default for KnnOptions {
    fn default() -> Self {
        KnnOptions { jitter: false, jitter_seed: 0, whiten: true }
    }
}

pub const JITTER_AMPLITUDE: f64 = 1e-10;

pub fn knn_entropy(samples: &Points, k: usize) -> Result<EntropyEstimate> {
    knn_entropy_with(samples, k, &KnnOptions::default())
}

/// Kozachenko–Leonenko: `ψ(N) − ψ(k) + log V_d + (d/N) Σ log ρ_{k,i}`.
///
/// The standard error is the spread of the per-sample terms over `√N`.
/// See [`KnnOptions::whiten`] for the affine preconditioning in `d ≥ 2`.
pub fn knn_entropy_with(samples: &Points, k: usize, opts: &KnnOptions) -> Result<EntropyEstimate> {
    let n = samples.len();
    let d = samples.dim();
    if k == 0 || n <= k {
        return Err(Error::Parameter(format!("need N > k >= 1, got N = {n}, k = {k}")));
    }
    if d > MAX_KNN_DIM {
        return Err(Error::Parameter(format!("nearest-neighbour entropy is limited to dimension {MAX_KNN_DIM}, got {d}")));
    }
    if samples.coords().iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDomain("non-finite sample coordinate".into()));
    }

    let jittered;
    let pts = if opts.jitter {
        jittered = jitter(samples, opts.jitter_seed);
        &jittered
    } else {
        samples
    };

    let whitened;
    let (pts, ln_det_scale) = if opts.whiten && d >= 2 {
        let (w, shift) = whiten(pts)?;
        whitened = w;
        (&whitened, shift)
    } else {
        (pts, 0.0)
    };

    let radii = kth_neighbor_distances(pts, k);
    if let Some(i) = radii.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateSample(format!(
            "sample {i} has a zero distance to its {k}-th neighbour (repeated points); enable jitter"
        )));
    }

    let df = d as f64;
    let ln_unit_ball = 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df + 1.0);
    let offset = digamma(n as f64) - digamma(k as f64) + ln_unit_ball + ln_det_scale;
    let terms: Vec<f64> = radii.iter().map(|r| offset + df * r.ln()).collect();
    let (value, stderr) = mean_and_stderr(&terms);
    Ok(EntropyEstimate { value, stderr, method: EntropyMethod::Knn, n_samples: n })
}

/// `L⁻¹ (x − x̄)` with `L Lᵀ` the sample covariance, and `log det L`.
fn whiten(pts: &Points) -> Result<(Points, f64)> {
    let d = pts.dim();
    let n = pts.len() as f64;
    let mut mean = vec![0.0; d];
    for p in pts.coords().chunks(d) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in pts.coords().chunks(d) {
        for a in 0..d {
            for b in 0..=a {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov /= n - 1.0;
    let chol = cholesky_pd(&cov).map_err(|_| Error::DegenerateSample("sample covariance is singular".into()))?;
    let l = chol.l();
    let ln_det = l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let coords = pts
        .coords()
        .par_chunks(d)
        .flat_map_iter(|p| {
            // Forward substitution with the lower factor.
            let mut y = vec![0.0; d];
            for a in 0..d {
                let mut acc = p[a] - mean[a];
                for b in 0..a {
                    acc -= l[(a, b)] * y[b];
                }
                y[a] = acc / l[(a, a)];
            }
            y
        })
        .collect();
    Ok((Points { dim: d, coords }, ln_det))
}

fn jitter(samples: &Points, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6a69_7474_6572);
    let coords = samples
        .coords()
        .iter()
        .map(|&x| x + JITTER_AMPLITUDE * x.abs().max(1.0) * rng.random_range(-1.0..1.0))
        .collect();
    Points { dim: samples.dim(), coords }
}

/// Distance from every point to its k-th nearest other point.
pub(crate) fn kth_neighbor_distances(pts: &Points, k: usize) -> Vec<f64> {
    if pts.dim() == 1 {
        kth_distances_sorted(pts.coords(), k)
    } else if pts.len() <= BRUTE_FORCE_LIMIT {
        kth_distances_brute(pts, k)
    } else {
        kdtree::KdTree::build(pts).kth_distances(k)
    }
}

/// Exact 1-D search: the k nearest neighbours of a point are contiguous in
/// sorted order, so a two-pointer walk finds them in `O(k)`.
fn kth_distances_sorted(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let by_rank: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|pos| {
            let x = sorted[pos];
            let (mut lo, mut hi) = (pos, pos + 1);
            let mut dist = 0.0;
            for _ in 0..k {
                let left = if lo > 0 { x - sorted[lo - 1] } else { f64::INFINITY };
                let right = if hi < n { sorted[hi] - x } else { f64::INFINITY };
                if left <= right {
                    dist = left;
                    lo -= 1;
                } else {
                    dist = right;
                    hi += 1;
                }
            }
            dist
        })
        .collect();
    let mut out = vec![0.0; n];
    for (rank, &orig) in order.iter().enumerate() {
        out[orig] = by_rank[rank];
    }
    out
}

fn kth_distances_brute(pts: &Points, k: usize) -> Vec<f64> {
    let n = pts.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = pts.point(i);
            let mut best = vec![f64::INFINITY; k];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let q = pts.point(j);
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best[k - 1] {
                    let pos = best.partition_point(|&b| b <= d2);
                    best.insert(pos, d2);
                    best.pop();
                }
            }
            best[k - 1].sqrt()
        })
        .collect()
}

/// Mean and `sd/√N` with a fixed-order reduction.
pub(crate) fn mean_and_stderr(terms: &[f64]) -> (f64, f64) {
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    if terms.len() < 2 {
        return (mean, 0.0);
    }
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::StdNormalSampler;

    fn normals(dim: usize, n: usize, seed: u64) -> Points {
        Points::new(dim, StdNormalSampler::new(dim, seed, 0).samples(0, n)).unwrap()
    }

    fn uniforms(n: usize, seed: u64) -> Points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Points::from_scalars((0..n).map(|_| rng.random::<f64>()).collect())
    }

    #[test]
    fn gaussian_closed_forms() {
        let h1 = gaussian_entropy(&DMatrix::identity(1, 1)).unwrap();
        assert!((h1.value - 1.4189385).abs() < 1e-7);
        assert_eq!(h1.stderr, 0.0);
        assert_eq!(h1.method, EntropyMethod::GaussianClosedForm);
        let h4 = gaussian_entropy(&DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert!((h4.value - 2.1120857).abs() < 1e-7);
        let h2 = gaussian_entropy(&DMatrix::identity(2, 2)).unwrap();
        assert!((h2.value - 2.8378771).abs() < 1e-7);
        assert!(gaussian_entropy(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn plugin_standard_normal() {
        let pts = normals(1, 100_000, 1);
        let est = plugin_entropy(|x| -0.5 * x[0] * x[0] - 0.5 * (2.0 * std::f64::consts::PI).ln(), &pts).unwrap();
        assert!((est.value - 0.5 * LN_2PI_E).abs() < 3.0 * est.stderr);
        assert_eq!(est.method, EntropyMethod::PlugIn);
    }

    #[test]
    fn plugin_uniform_is_exactly_zero() {
        let est = plugin_entropy(|_| 0.0, &uniforms(1000, 3)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn plugin_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = Points::from_scalars((0..100_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect());
        let est = plugin_entropy(|x| -x[0], &pts).unwrap();
        assert!((est.value - 1.0).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn plugin_rejects_non_finite() {
        let pts = Points::from_scalars(vec![0.5, -1.0]);
        let err = plugin_entropy(|x| if x[0] < 0.0 { f64::NEG_INFINITY } else { 0.0 }, &pts).unwrap_err();
        assert!(matches!(err, Error::NumericalDomain(_)));
    }

    #[test]
    fn knn_calibration() {
        let est = knn_entropy(&normals(1, 20_000, 0), 5).unwrap();
        assert!((est.value - 0.5 * LN_2PI_E).abs() < 0.05, "{est:?}");
        let est = knn_entropy(&uniforms(20_000, 0), 5).unwrap();
        assert!(est.value.abs() < 0.05, "{est:?}");
        let est = knn_entropy(&normals(2, 20_000, 0), 5).unwrap();
        assert!((est.value - LN_2PI_E).abs() < 0.08, "{est:?}");
    }

    #[test]
    fn knn_duplicates_need_jitter() {
        let pts = Points::from_scalars(vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(knn_entropy(&pts, 1), Err(Error::DegenerateSample(_))));
        let opts = KnnOptions { jitter: true, ..Default::default() };
        let a = knn_entropy_with(&pts, 1, &opts).unwrap();
        let b = knn_entropy_with(&pts, 1, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.value.is_finite());
    }

    #[test]
    fn knn_parameter_errors() {
        let pts = Points::from_scalars(vec![0.0, 1.0, 2.0]);
        assert!(matches!(knn_entropy(&pts, 3), Err(Error::Parameter(_))));
        assert!(matches!(knn_entropy(&pts, 0), Err(Error::Parameter(_))));
        let hi = Points::new(11, vec![0.0; 11 * 20]).unwrap();
        assert!(matches!(knn_entropy(&hi, 2), Err(Error::Parameter(_))));
    }

    #[test]
    fn search_strategies_agree() {
        let pts = normals(1, 3000, 4);
        let sorted = kth_distances_sorted(pts.coords(), 4);
        let brute = kth_distances_brute(&pts, 4);
        assert_eq!(sorted, brute);

        let pts = normals(3, 3000, 5);
        let brute = kth_distances_brute(&pts, 5);
        let tree = kdtree::KdTree::build(&pts).kth_distances(5);
        assert_eq!(brute, tree);
    }
}
