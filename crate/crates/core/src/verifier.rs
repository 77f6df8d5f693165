//! Replays the transport argument numerically: both sides of the
//! change-of-variables lemma and of the entropy inequality, with Monte Carlo
//! error bars, plus a step-by-step audit of the lemma's chain.
//!
//! A sampled inequality `lhs ≥ rhs` passes iff `lhs − rhs ≥ −3·stderr`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::{numerical_rank, validate_datum, BLDatum, DEFAULT_RANK_TOL};
use crate::entropy::{gaussian_entropy, knn_entropy_with, mean_and_stderr, plugin_entropy, EntropyEstimate, KnnOptions, Points, LN_2PI_E};
use crate::error::{Error, Result};
use crate::matkernels::{logdet_pd, qr_pos_diag, symmetrize};
use crate::objective::{assemble_blocks, objective, objective_blocks, BlockPDMatrix};
use crate::serde_ext;
use crate::transport::{checked_jacobian, monotone_1d_map, product_map, std_normal_quantile, Distribution, StdNormalSampler, TransportMap};

/// Number of standard errors a sampled slack may fall below zero.
pub const PASS_SIGMAS: f64 = 3.0;

/// Slack allowed for the pointwise `F(∇T²) ≤ M_g` check.
pub const POINTWISE_TOL: f64 = 1e-6;

/// Closed-form gap tolerance in Gaussian mode.
pub const GAUSSIAN_GAP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierOptions {
    /// Neighbour rank for the Kozachenko–Leonenko estimator.
    pub k: usize,
    pub jitter: bool,
    /// Quantile cells for the conditional-entropy surrogate.
    pub strata: usize,
}

impl Default for VerifierOptions {
    fn default() -> Self {
        VerifierOptions { k: 5, jitter: false, strata: 8 }
    }
}

impl VerifierOptions {
    fn knn(&self, seed: u64) -> KnnOptions {
        KnnOptions { jitter: self.jitter, jitter_seed: seed, ..Default::default() }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McValue {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl McValue {
    fn from_terms(terms: &[f64]) -> Self {
        let (value, stderr) = mean_and_stderr(terms);
        McValue { value, stderr, n_samples: terms.len() }
    }
}

fn passes(slack: f64, stderr: f64) -> bool {
    slack >= -PASS_SIGMAS * stderr
}

fn combine(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// `h(AX)` by nearest neighbours.
    pub lhs: EntropyEstimate,
    /// `h(Z) = (m/2) log(2πe)`.
    pub rhs_exact_part: f64,
    /// `½ E log det(A (∇T)² Aᵀ)`.
    pub rhs_expect_part: McValue,
    pub slack: f64,
    pub slack_stderr: f64,
    pub passes: bool,
    pub n_samples: usize,
    pub seed: u64,
}

fn check_lemma_inputs(a: &DMatrix<f64>, map: &TransportMap, n_samples: usize, opts: &VerifierOptions) -> Result<()> {
    if a.ncols() != map.dim() {
        return Err(Error::Structural(format!("A has {} columns, map has dimension {}", a.ncols(), map.dim())));
    }
    if a.nrows() > a.ncols() || numerical_rank(a, DEFAULT_RANK_TOL) < a.nrows() {
        return Err(Error::RankDeficient("A must be surjective (full row rank)".into()));
    }
    if n_samples <= opts.k {
        return Err(Error::Parameter(format!("need more than k = {} samples", opts.k)));
    }
    Ok(())
}

/// Per-sample pushforward `A T(z)` and Jacobian-derived terms.
struct Pushforward {
    projected: Points,
    jacobians: Vec<DMatrix<f64>>,
}

fn push_forward(a: &DMatrix<f64>, map: &TransportMap, z: &[f64], n: usize) -> Result<Pushforward> {
    let dim = map.dim();
    let m = a.nrows();
    let rows: Vec<(Vec<f64>, DMatrix<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = &z[i * dim..(i + 1) * dim];
            let x = map.apply(zi)?;
            let y = a * x;
            Ok((y.iter().copied().collect(), checked_jacobian(map, zi)?))
        })
        .collect::<Result<_>>()?;
    let mut coords = Vec::with_capacity(n * m);
    let mut jacobians = Vec::with_capacity(n);
    for (y, j) in rows {
        coords.extend(y);
        jacobians.push(j);
    }
    Ok(Pushforward { projected: Points::new(m, coords)?, jacobians })
}

/// `½ log det(A J² Aᵀ)` for each Jacobian.
fn half_logdet_terms(a: &DMatrix<f64>, jacobians: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    jacobians
        .par_iter()
        .map(|j| {
            let aj = a * j;
            Ok(0.5 * logdet_pd(&symmetrize(&(&aj * aj.transpose())))?)
        })
        .collect()
}

pub fn lemma1_check(a: &DMatrix<f64>, map: &TransportMap, n_samples: usize, seed: u64) -> Result<LemmaReport> {
    lemma1_check_with(a, map, n_samples, seed, &VerifierOptions::default())
}

/// `h(AX)` against `h(Z) + ½ E log det(A (∇T(Z̃))² Aᵀ)` for `X = T(Z̃)`.
pub fn lemma1_check_with(a: &DMatrix<f64>, map: &TransportMap, n_samples: usize, seed: u64, opts: &VerifierOptions) -> Result<LemmaReport> {
    check_lemma_inputs(a, map, n_samples, opts)?;
    let z = StdNormalSampler::new(map.dim(), seed, 0).samples(0, n_samples);
    let pf = push_forward(a, map, &z, n_samples)?;
    let lhs = knn_entropy_with(&pf.projected, opts.k, &opts.knn(seed))?;
    let rhs_expect_part = McValue::from_terms(&half_logdet_terms(a, &pf.jacobians)?);
    let rhs_exact_part = 0.5 * a.nrows() as f64 * LN_2PI_E;
    let slack = lhs.value - rhs_exact_part - rhs_expect_part.value;
    let slack_stderr = combine(lhs.stderr, rhs_expect_part.stderr);
    Ok(LemmaReport {
        passes: passes(slack, slack_stderr),
        lhs,
        rhs_exact_part,
        rhs_expect_part,
        slack,
        slack_stderr,
        n_samples,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremMode {
    GaussianClosedForm,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermRole {
    /// `h(X_i)`, weighted by `c_i`.
    Block,
    /// `h(A_j X)`, weighted by `d_j`.
    Map,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub role: TermRole,
    pub index: usize,
    pub coefficient: f64,
    pub dim: usize,
    pub entropy: EntropyEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub mode: TheoremMode,
    /// `Σ c_i h(X_i) − Σ d_j h(A_j X)`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    #[serde(with = "serde_ext::extended_f64")]
    pub mg: f64,
    /// `M_g − lhs`.
    #[serde(with = "serde_ext::extended_f64")]
    pub gap: f64,
    pub gap_stderr: f64,
    pub passes: bool,
    pub balance: f64,
    pub terms: Vec<TermReport>,
    /// Largest `F(diag((∇T_i)²))` over the samples (sampled mode).
    pub pointwise_max: Option<f64>,
    pub pointwise_bound_holds: Option<bool>,
    pub n_samples: usize,
    pub seed: u64,
}

/// `(Σ c_i r_i/2 · log 2πe, Σ d_j n_j/2 · log 2πe)`: the standard-Gaussian
/// entropies on both sides, equal exactly when the datum is balanced.
pub fn reference_entropies(datum: &BLDatum) -> (f64, f64) {
    let blocks: f64 = datum.block_coeffs().iter().zip(datum.partition()).map(|(c, &r)| c * 0.5 * r as f64 * LN_2PI_E).sum();
    let maps: f64 = datum.map_coeffs().iter().zip(datum.maps()).map(|(d, a)| d * 0.5 * a.nrows() as f64 * LN_2PI_E).sum();
    (blocks, maps)
}

fn assert_reference_balance(datum: &BLDatum) -> Result<()> {
    let (b, m) = reference_entropies(datum);
    if (b - m).abs() > 1e-12 * b.abs().max(m.abs()).max(1.0) {
        return Err(Error::Consistency(format!("standard-Gaussian entropies differ: {b} vs {m}")));
    }
    Ok(())
}

fn require_valid(datum: &BLDatum) -> Result<()> {
    let rep = validate_datum(datum, DEFAULT_RANK_TOL);
    if !rep.ok {
        return Err(Error::Structural(format!("invalid datum: {}", rep.messages.join("; "))));
    }
    Ok(())
}

/// Exact Gaussian evaluation with independent blocks `X_i ~ N(0, Σ_i)`.
///
/// For balanced data the `2πe` terms cancel and the left side equals
/// `F(diag(Σ_i))`; this identity is checked to `1e-10`.
pub fn theorem_gap_gaussian(datum: &BLDatum, sigmas: &[DMatrix<f64>], mg: f64) -> Result<TheoremReport> {
    require_valid(datum)?;
    if !datum.is_balanced() {
        return Err(Error::Refused(format!(
            "datum has balance {}; Gaussian entropies no longer reduce to the log-det objective",
            datum.balance()
        )));
    }
    assert_reference_balance(datum)?;
    let b = BlockPDMatrix::new(sigmas.to_vec())?;
    b.check_compatible(datum)?;
    let full = b.assemble();

    let mut terms = Vec::new();
    let mut lhs = 0.0;
    let mut magnitude = 0.0;
    for (i, (c, s)) in datum.block_coeffs().iter().zip(sigmas).enumerate() {
        let h = gaussian_entropy(s)?;
        lhs += c * h.value;
        magnitude += (c * h.value).abs();
        terms.push(TermReport { role: TermRole::Block, index: i, coefficient: *c, dim: s.nrows(), entropy: h });
    }
    for (j, (d, a)) in datum.map_coeffs().iter().zip(datum.maps()).enumerate() {
        let h = gaussian_entropy(&symmetrize(&(a * &full * a.transpose())))?;
        lhs -= d * h.value;
        magnitude += (d * h.value).abs();
        terms.push(TermReport { role: TermRole::Map, index: j, coefficient: *d, dim: a.nrows(), entropy: h });
    }

    let f = objective(datum, &b)?;
    if (lhs - f).abs() > 1e-10 * magnitude.max(1.0) {
        return Err(Error::Consistency(format!("Gaussian left side {lhs} differs from F(Σ) = {f}")));
    }

    let gap = mg - lhs;
    Ok(TheoremReport {
        mode: TheoremMode::GaussianClosedForm,
        lhs,
        lhs_stderr: 0.0,
        mg,
        gap,
        gap_stderr: 0.0,
        passes: gap >= -GAUSSIAN_GAP_TOL,
        balance: datum.balance(),
        terms,
        pointwise_max: None,
        pointwise_bound_holds: None,
        n_samples: 0,
        seed: 0,
    })
}

pub fn theorem_check_sampled(datum: &BLDatum, targets: &[Distribution], n_samples: usize, seed: u64, mg: f64) -> Result<TheoremReport> {
    theorem_check_sampled_with(datum, targets, n_samples, seed, mg, &VerifierOptions::default())
}

/// Monte Carlo evaluation for scalar blocks `X_i = T_i(Z_i)`: `h(X_i)` by
/// plug-in with the known density, `h(A_j X)` by nearest neighbours.
///
/// `mg` may be `+∞` (unbounded datum), in which case the gap is infinite.
pub fn theorem_check_sampled_with(
    datum: &BLDatum,
    targets: &[Distribution],
    n_samples: usize,
    seed: u64,
    mg: f64,
    opts: &VerifierOptions,
) -> Result<TheoremReport> {
    require_valid(datum)?;
    if datum.partition().iter().any(|&r| r != 1) {
        return Err(Error::Refused("sampled mode supports scalar blocks only (all r_i = 1)".into()));
    }
    if targets.len() != datum.num_blocks() {
        return Err(Error::Structural(format!("{} targets for {} blocks", targets.len(), datum.num_blocks())));
    }
    if n_samples <= opts.k {
        return Err(Error::Parameter(format!("need more than k = {} samples", opts.k)));
    }
    if datum.is_balanced() {
        assert_reference_balance(datum)?;
    }

    let n = datum.dim();
    let components = targets.iter().cloned().map(monotone_1d_map).collect::<Result<Vec<_>>>()?;
    let map = product_map(components, datum.partition())?;
    let z = StdNormalSampler::new(n, seed, 0).samples(0, n_samples);

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let zi = &z[i * n..(i + 1) * n];
            let x = map.apply(zi)?;
            let j = checked_jacobian(&map, zi)?;
            Ok((x.iter().copied().collect(), j.diagonal().iter().copied().collect()))
        })
        .collect::<Result<_>>()?;

    let mut terms = Vec::new();
    let mut lhs = 0.0;
    let mut var = 0.0;
    for (i, (c, target)) in datum.block_coeffs().iter().zip(targets).enumerate() {
        let xs = Points::from_scalars(rows.iter().map(|(x, _)| x[i]).collect());
        let h = plugin_entropy(|p| target.ln_pdf(p[0]), &xs)?;
        lhs += c * h.value;
        var += (c * h.stderr).powi(2);
        terms.push(TermReport { role: TermRole::Block, index: i, coefficient: *c, dim: 1, entropy: h });
    }
    for (j, (d, a)) in datum.map_coeffs().iter().zip(datum.maps()).enumerate() {
        let m = a.nrows();
        let mut coords = Vec::with_capacity(n_samples * m);
        for (x, _) in &rows {
            let y = a * nalgebra::DVector::from_column_slice(x);
            coords.extend(y.iter());
        }
        let h = knn_entropy_with(&Points::new(m, coords)?, opts.k, &opts.knn(seed))?;
        lhs -= d * h.value;
        var += (d * h.stderr).powi(2);
        terms.push(TermReport { role: TermRole::Map, index: j, coefficient: *d, dim: m, entropy: h });
    }

    // F evaluated at B = diag((T_i')²), one sample at a time.
    let pointwise: Vec<f64> = rows
        .par_iter()
        .map(|(_, diag)| {
            let blocks: Vec<DMatrix<f64>> = diag.iter().map(|v| DMatrix::from_element(1, 1, v * v)).collect();
            objective_blocks(datum, &blocks)
        })
        .collect::<Result<_>>()?;
    let pointwise_max = pointwise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pointwise_bound_holds = mg.is_finite().then(|| pointwise_max <= mg + POINTWISE_TOL);

    let lhs_stderr = var.sqrt();
    let gap = mg - lhs;
    Ok(TheoremReport {
        mode: TheoremMode::Sampled,
        lhs,
        lhs_stderr,
        mg,
        gap,
        gap_stderr: lhs_stderr,
        passes: passes(gap, lhs_stderr) && pointwise_bound_holds != Some(false),
        balance: datum.balance(),
        terms,
        pointwise_max: Some(pointwise_max),
        pointwise_bound_holds,
        n_samples,
        seed,
    })
}

/// Per-step quantities of the lemma's chain.
///
/// * (a) `h(AX)`
/// * (b) `h(A T(Q1 Z + Q2 Z') | Z')`, averaged over quantile strata of `Z'`
/// * (c) `h(Z) + E log det(Q1ᵀ ∇T Q1) + log det R1` (change of variables)
/// * (d) `E[log det(Q1ᵀ ∇T² Q1) − 2 log det(Q1ᵀ ∇T Q1)]`, pointwise ≥ 0
///
/// The lemma's stated right side equals (c) + ½(d). Since (d) ≥ 0 that is
/// not implied by (a) ≥ (c); `lemma_rhs` is reported so the two can be
/// compared directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub a_entropy: EntropyEstimate,
    pub b_conditional: Option<McValue>,
    pub c_change_of_variables: McValue,
    pub d_det_gap: McValue,
    pub d_min_pointwise: f64,
    pub lemma_rhs: McValue,
    pub a_minus_b: Option<McValue>,
    pub b_minus_c: Option<McValue>,
    pub a_minus_c: McValue,
    pub a_minus_lemma_rhs: McValue,
    /// (a) ≥ (b) within 3·stderr.
    pub conditioning_holds: Option<bool>,
    /// |(b) − (c)| ≤ 3·stderr.
    pub change_of_variables_matches: Option<bool>,
    /// (d) ≥ 0 at every sample, up to 1e-10.
    pub det_gap_nonnegative: bool,
    pub strata: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

fn difference(a: f64, sa: f64, b: f64, sb: f64, n: usize) -> McValue {
    McValue { value: a - b, stderr: combine(sa, sb), n_samples: n }
}

pub fn proof_chain_audit(a: &DMatrix<f64>, map: &TransportMap, n_samples: usize, seed: u64) -> Result<AuditReport> {
    proof_chain_audit_with(a, map, n_samples, seed, &VerifierOptions::default())
}

pub fn proof_chain_audit_with(a: &DMatrix<f64>, map: &TransportMap, n_samples: usize, seed: u64, opts: &VerifierOptions) -> Result<AuditReport> {
    check_lemma_inputs(a, map, n_samples, opts)?;
    let n = map.dim();
    let m = a.nrows();
    let qr = qr_pos_diag(&a.transpose())?;
    let logdet_r1 = qr.logdet_r1();
    let h_z = 0.5 * m as f64 * LN_2PI_E;
    let mut notes = Vec::new();

    let z = StdNormalSampler::new(n, seed, 0).samples(0, n_samples);
    let pf = push_forward(a, map, &z, n_samples)?;
    let a_entropy = knn_entropy_with(&pf.projected, opts.k, &opts.knn(seed))?;

    let per_sample: Vec<(f64, f64)> = pf
        .jacobians
        .par_iter()
        .map(|j| {
            let jq = j * &qr.q1;
            let compressed = logdet_pd(&symmetrize(&(qr.q1.transpose() * &jq)))?;
            let squared = logdet_pd(&symmetrize(&(jq.transpose() * &jq)))?;
            Ok((compressed, squared - 2.0 * compressed))
        })
        .collect::<Result<_>>()?;
    let c_terms: Vec<f64> = per_sample.iter().map(|(c, _)| h_z + c + logdet_r1).collect();
    let d_terms: Vec<f64> = per_sample.iter().map(|(_, d)| *d).collect();
    let rhs_terms: Vec<f64> = c_terms.iter().zip(&d_terms).map(|(c, d)| c + 0.5 * d).collect();
    let c_cov = McValue::from_terms(&c_terms);
    let d_det_gap = McValue::from_terms(&d_terms);
    let lemma_rhs = McValue::from_terms(&rhs_terms);
    let d_min_pointwise = d_terms.iter().copied().fold(f64::INFINITY, f64::min);

    let b_conditional = if n == m {
        notes.push("A is square: Z' is empty, so the conditioning step is skipped".into());
        None
    } else {
        Some(conditional_entropy(a, map, &qr.q1, &qr.q2, n_samples, seed, opts)?)
    };

    let a_minus_b = b_conditional
        .as_ref()
        .map(|b| difference(a_entropy.value, a_entropy.stderr, b.value, b.stderr, n_samples));
    let b_minus_c = b_conditional.as_ref().map(|b| difference(b.value, b.stderr, c_cov.value, c_cov.stderr, n_samples));
    let a_minus_c = difference(a_entropy.value, a_entropy.stderr, c_cov.value, c_cov.stderr, n_samples);
    let a_minus_lemma_rhs = difference(a_entropy.value, a_entropy.stderr, lemma_rhs.value, lemma_rhs.stderr, n_samples);

    if map.is_linear() {
        notes.push("map is linear: (b) = (c) exactly and (a) = lemma right side".into());
    }
    if d_det_gap.value > 0.0 && !passes(a_minus_lemma_rhs.value, a_minus_lemma_rhs.stderr) {
        notes.push("(a) falls below the lemma's right side (c) + ½(d); (a) ≥ (c) is the bound the chain supports".into());
    }

    Ok(AuditReport {
        conditioning_holds: a_minus_b.as_ref().map(|v| passes(v.value, v.stderr)),
        change_of_variables_matches: b_minus_c.as_ref().map(|v| v.value.abs() <= PASS_SIGMAS * v.stderr),
        det_gap_nonnegative: d_min_pointwise >= -1e-10,
        a_entropy,
        b_conditional,
        c_change_of_variables: c_cov,
        d_det_gap,
        d_min_pointwise,
        lemma_rhs,
        a_minus_b,
        b_minus_c,
        a_minus_c,
        a_minus_lemma_rhs,
        strata: opts.strata,
        n_samples,
        seed,
        notes,
    })
}

/// Stratified estimate of `E_{Z'} h(A T(Q1 Z + Q2 z'))`.
///
/// Stratum `s` fixes one `z'` whose first coordinate is drawn from the `s`-th
/// quantile cell of `N(0, 1)` (the rest are plain normal draws) and estimates
/// the entropy over fresh `Z` samples by nearest neighbours.
fn conditional_entropy(
    a: &DMatrix<f64>,
    map: &TransportMap,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    n_samples: usize,
    seed: u64,
    opts: &VerifierOptions,
) -> Result<McValue> {
    let strata = opts.strata.max(1);
    let per = n_samples / strata;
    if per <= opts.k {
        return Err(Error::Parameter(format!("{n_samples} samples over {strata} strata leave too few per stratum")));
    }
    let m = q1.ncols();
    let rest = q2.ncols();

    let estimates: Vec<EntropyEstimate> = (0..strata)
        .map(|s| {
            let mut zp = StdNormalSampler::new(rest, seed, 1 + s as u64).sample(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + (strata + s) as u64);
            let u = (s as f64 + rng.random_range(0.0..1.0)) / strata as f64;
            zp[0] = std_normal_quantile(u.clamp(1e-300, 1.0 - 1e-16));
            let offset = q2 * nalgebra::DVector::from_vec(zp);

            let zs = StdNormalSampler::new(m, seed, 1 + (2 * strata + s) as u64).samples(0, per);
            let mut coords = Vec::with_capacity(per * m);
            for i in 0..per {
                let zi = nalgebra::DVector::from_column_slice(&zs[i * m..(i + 1) * m]);
                let full = q1 * zi + &offset;
                let y = a * map.apply(full.as_slice())?;
                coords.extend(y.iter());
            }
            knn_entropy_with(&Points::new(m, coords)?, opts.k, &opts.knn(seed.wrapping_add(s as u64)))
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let (mean, between_se) = mean_and_stderr(&values);
    let within: f64 = estimates.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / (strata * strata) as f64;
    Ok(McValue { value: mean, stderr: (within + between_se * between_se).sqrt(), n_samples: per * strata })
}

/// Product of per-block linear maps `Σ_i^{1/2}`.
pub fn gaussian_product_map(sigmas: &[DMatrix<f64>]) -> Result<TransportMap> {
    let partition: Vec<usize> = sigmas.iter().map(|s| s.nrows()).collect();
    let comps = sigmas.iter().map(crate::transport::gaussian_brenier).collect::<Result<Vec<_>>>()?;
    product_map(comps, &partition)
}

/// Joint covariance `diag(Σ_1, …, Σ_k)`.
pub fn joint_covariance(sigmas: &[DMatrix<f64>]) -> DMatrix<f64> {
    assemble_blocks(sigmas)
}
