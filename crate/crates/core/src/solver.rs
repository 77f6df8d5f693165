//! Computes `M_g = sup F(B)` by ascent over per-block Cholesky factors.
//!
//! Each block is written `B_i = L_i L_iᵀ` with `L_i` lower triangular and its
//! diagonal stored as logarithms, so every iterate is exactly PD and the line
//! search is unconstrained. Directions come from L-BFGS with an Armijo
//! backtracking / doubling line search; restarts run in parallel and are
//! merged in restart order.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::{validate_datum, BLDatum, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::objective::{
    assemble_blocks, gradient, gradient_factors, map_factor, objective, objective_factors, BlockPDMatrix, BlockSymMatrix,
};
use crate::serde_ext;

/// Eigenvalue spread (relative to the start) that counts as divergence.
pub const GROWTH_LIMIT: f64 = 1e8;

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_DOUBLINGS: usize = 40;
/// Largest change of any factor parameter in one iteration; a unit change in a
/// log-diagonal entry rescales the block by `e²`.
const MAX_PARAM_STEP: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub stat_tol: f64,
    pub step_init: f64,
    pub divergence_threshold: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 2000,
            stat_tol: 1e-8,
            step_init: 1.0,
            divergence_threshold: 1e8,
            seed: 0,
            restarts: 4,
        }
    }
}

impl SolverOptions {
    fn check(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("stat_tol", self.stat_tol),
            ("step_init", self.step_init),
            ("divergence_threshold", self.divergence_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MgStatus {
    Converged,
    Unbounded,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    #[serde(with = "serde_ext::extended_f64")]
    pub objective: f64,
    pub stationarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgResult {
    pub status: MgStatus,
    /// Best `F` found; equals `objective(datum, optimizer)`.
    #[serde(with = "serde_ext::extended_f64")]
    pub value: f64,
    pub optimizer: BlockPDMatrix,
    pub stationarity: f64,
    pub trace: Vec<TraceEntry>,
    pub witness: Option<BlockPDMatrix>,
    /// Restart that produced the reported run (0 is the identity start).
    pub restart: usize,
    pub balance: f64,
    pub message: String,
}

impl MgResult {
    /// `M_g` as an extended real: `+∞` when unbounded.
    pub fn mg(&self) -> f64 {
        match self.status {
            MgStatus::Unbounded => f64::INFINITY,
            _ => self.value,
        }
    }
}

/// Any feasible `B` certifies `F(B) ≤ M_g`.
pub fn certify_lower_bound(datum: &BLDatum, b: &BlockPDMatrix) -> Result<f64> {
    objective(datum, b)
}

/// Frobenius norm of the block gradient, with the scaling direction `B`
/// projected out when the datum is balanced.
pub fn stationarity_residual(datum: &BLDatum, b: &BlockPDMatrix) -> Result<f64> {
    let g = gradient(datum, b)?;
    Ok(projected_norm(datum, &g, b))
}

fn projected_norm(datum: &BLDatum, g: &BlockSymMatrix, b: &BlockPDMatrix) -> f64 {
    projected_norm_blocks(datum, g.blocks(), b.blocks())
}

fn projected_norm_blocks(datum: &BLDatum, g: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    if !datum.is_balanced() {
        return g.iter().map(|gi| gi.norm_squared()).sum::<f64>().sqrt();
    }
    let gb: f64 = g.iter().zip(b).map(|(gi, bi)| gi.dot(bi)).sum();
    let bb: f64 = b.iter().map(|bi| bi.norm_squared()).sum();
    let coef = gb / bb;
    g.iter()
        .zip(b)
        .map(|(gi, bi)| (gi - bi * coef).norm_squared())
        .sum::<f64>()
        .sqrt()
}

pub fn solve_mg(datum: &BLDatum, opts: &SolverOptions) -> Result<MgResult> {
    opts.check()?;
    let report = validate_datum(datum, DEFAULT_RANK_TOL);
    if !report.ok {
        return Err(Error::Structural(format!("invalid datum: {}", report.messages.join("; "))));
    }
    if !datum.is_balanced() {
        return Ok(balance_witness(datum));
    }

    let layout = Layout::new(datum.partition());
    let starts: Vec<DVector<f64>> = (0..=opts.restarts).map(|r| layout.start(r, opts.seed)).collect();
    let runs: Vec<Result<Run>> = starts.par_iter().map(|x0| ascend(datum, &layout, x0.clone(), opts)).collect();

    let mut best: Option<(usize, Run)> = None;
    for (idx, run) in runs.into_iter().enumerate() {
        let run = run?;
        if run.status == MgStatus::Unbounded {
            // A single divergent run settles the supremum.
            return finish(datum, &layout, idx, run);
        }
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let tie = (run.value - b.value).abs() <= 1e-12 * (1.0 + b.value.abs());
                if tie {
                    run.stationarity < b.stationarity
                } else {
                    run.value > b.value
                }
            }
        };
        if better {
            best = Some((idx, run));
        }
    }
    let (idx, run) = best.expect("at least one start");
    finish(datum, &layout, idx, run)
}

fn finish(datum: &BLDatum, layout: &Layout, restart: usize, run: Run) -> Result<MgResult> {
    let blocks = layout.blocks(&run.x);
    let raw = BlockPDMatrix::new(blocks)?;
    let (optimizer, witness) = match run.status {
        MgStatus::Unbounded => (raw.clone(), Some(raw)),
        _ => (normalize_gauge(&raw)?, None),
    };
    let value = objective(datum, &optimizer)?;
    let stationarity = gauge_stationarity(datum, &optimizer)?;
    Ok(MgResult {
        status: run.status,
        value,
        optimizer,
        stationarity,
        trace: run.trace,
        witness,
        restart,
        balance: datum.balance(),
        message: run.message,
    })
}

/// Rescales so that `Σ tr(B_i) = n`.
fn normalize_gauge(b: &BlockPDMatrix) -> Result<BlockPDMatrix> {
    let t = b.dim() as f64 / b.trace();
    b.scaled(t)
}

fn gauge_stationarity(datum: &BLDatum, b: &BlockPDMatrix) -> Result<f64> {
    stationarity_residual(datum, &normalize_gauge(b)?)
}

/// Unbalanced data: `F(tB) = F(B) + ½·balance·log t`, so `t → ∞` (positive
/// balance) or `t → 0` (negative) diverges.
fn balance_witness(datum: &BLDatum) -> MgResult {
    let balance = datum.balance();
    let dir: f64 = if balance > 0.0 { 10.0 } else { 0.1 };
    let id = BlockPDMatrix::identity(datum.partition());
    let mut trace = Vec::new();
    let mut last = id.clone();
    let mut last_value = 0.0;
    for k in 0..=9 {
        let b = id.scaled(dir.powi(k)).expect("positive scale");
        let f = objective(datum, &b).unwrap_or(f64::NAN);
        let s = stationarity_residual(datum, &b).unwrap_or(f64::NAN);
        trace.push(TraceEntry { iteration: k as usize, objective: f, stationarity: s });
        last = b;
        last_value = f;
    }
    MgResult {
        status: MgStatus::Unbounded,
        value: last_value,
        stationarity: trace.last().map(|t| t.stationarity).unwrap_or(f64::NAN),
        optimizer: last.clone(),
        witness: Some(last),
        trace,
        restart: 0,
        balance,
        message: format!("dimension balance {balance} is nonzero; F(tB) is unbounded along t"),
    }
}

/// Packing of the lower-triangular factors into one parameter vector.
struct Layout {
    partition: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(partition: &[usize]) -> Self {
        let len = partition.iter().map(|r| r * (r + 1) / 2).sum();
        Layout { partition: partition.to_vec(), len }
    }

    /// Restart 0 is the identity; later restarts draw from a seeded stream.
    fn start(&self, restart: usize, seed: u64) -> DVector<f64> {
        if restart == 0 {
            return DVector::zeros(self.len);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let mut x = DVector::zeros(self.len);
        let mut k = 0;
        for &r in &self.partition {
            for p in 0..r {
                for q in 0..=p {
                    x[k] = if p == q { rng.random_range(-1.0..1.0) } else { rng.random_range(-0.5..0.5) };
                    k += 1;
                }
            }
        }
        x
    }

    fn factors(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.partition.len());
        let mut k = 0;
        for &r in &self.partition {
            let mut l = DMatrix::zeros(r, r);
            for p in 0..r {
                for q in 0..=p {
                    l[(p, q)] = if p == q { x[k].exp() } else { x[k] };
                    k += 1;
                }
            }
            out.push(l);
        }
        out
    }

    /// `L(y) − L(x)` per block, with `expm1` on the log-diagonal so small
    /// steps keep their relative accuracy.
    fn factor_steps(&self, x: &DVector<f64>, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.partition.len());
        let mut k = 0;
        for &r in &self.partition {
            let mut dl = DMatrix::zeros(r, r);
            for p in 0..r {
                for q in 0..=p {
                    dl[(p, q)] = if p == q { x[k].exp() * (y[k] - x[k]).exp_m1() } else { y[k] - x[k] };
                    k += 1;
                }
            }
            out.push(dl);
        }
        out
    }

    /// `Σ_i c_i Σ_p (y_pp − x_pp)`: the block part of `F(y) − F(x)`.
    fn block_increment(&self, coeffs: &[f64], x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        let mut k = 0;
        for (&r, &c) in self.partition.iter().zip(coeffs) {
            for p in 0..r {
                for q in 0..=p {
                    if p == q && c != 0.0 {
                        total += c * (y[k] - x[k]);
                    }
                    k += 1;
                }
            }
        }
        total
    }

    fn blocks(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.factors(x).iter().map(|l| l * l.transpose()).collect()
    }

    /// Chain rule through `B = L Lᵀ`: `∂F/∂L = 2 G L`, times `L_pp` on the
    /// log-diagonal.
    fn pullback(&self, x: &DVector<f64>, grads: &[DMatrix<f64>]) -> DVector<f64> {
        let factors = self.factors(x);
        let mut out = DVector::zeros(self.len);
        let mut k = 0;
        for (l, g) in factors.iter().zip(grads) {
            let m = g * l * 2.0;
            for p in 0..l.nrows() {
                for q in 0..=p {
                    out[k] = if p == q { m[(p, p)] * l[(p, p)] } else { m[(p, q)] };
                    k += 1;
                }
            }
        }
        out
    }
}

struct Run {
    status: MgStatus,
    x: DVector<f64>,
    value: f64,
    stationarity: f64,
    trace: Vec<TraceEntry>,
    message: String,
}

struct Anchor {
    x: DVector<f64>,
    /// `(A_j L, R_j)` per map, `None` for zero coefficients.
    maps: Vec<Option<(DMatrix<f64>, DMatrix<f64>)>>,
}

struct Evaluator<'a> {
    datum: &'a BLDatum,
    layout: &'a Layout,
}

impl Evaluator<'_> {
    fn value(&self, x: &DVector<f64>) -> f64 {
        match objective_factors(self.datum, &self.layout.factors(x)) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Factorizations at `x` shared by every trial point of a line search.
    fn anchor(&self, x: &DVector<f64>) -> Result<Anchor> {
        let full = assemble_blocks(&self.layout.factors(x));
        let mut maps = Vec::with_capacity(self.datum.num_maps());
        for (&d, a) in self.datum.map_coeffs().iter().zip(self.datum.maps()) {
            maps.push(if d != 0.0 { Some((a * &full, map_factor(a, &full)?)) } else { None });
        }
        Ok(Anchor { x: x.clone(), maps })
    }

    /// `F(y) − F(x)` computed from the change in factors. Each map term is
    /// `−½ d_j Σ log1p(λ)` over the eigenvalues of
    /// `R⁻ᵀ (C' C'ᵀ − C Cᵀ) R⁻¹` with `C = A_j L`, which stays accurate when
    /// the increment is far below the rounding level of `F` itself.
    fn increment(&self, anchor: &Anchor, y: &DVector<f64>) -> f64 {
        let x = &anchor.x;
        let mut delta = self.layout.block_increment(self.datum.block_coeffs(), x, y);
        let dfull = assemble_blocks(&self.layout.factor_steps(x, y));
        for ((&d, a), base) in self.datum.map_coeffs().iter().zip(self.datum.maps()).zip(&anchor.maps) {
            let Some((c, r)) = base else { continue };
            let dc = a * &dfull;
            let cross = &dc * c.transpose();
            let change = &cross + cross.transpose() + &dc * dc.transpose();
            let rt = r.transpose();
            let Some(half) = rt.solve_lower_triangular(&change) else { return f64::NEG_INFINITY };
            let Some(e) = rt.solve_lower_triangular(&half.transpose()) else { return f64::NEG_INFINITY };
            let ev = SymmetricEigen::new((&e + e.transpose()) * 0.5).eigenvalues;
            if ev.iter().any(|&l| !(l > -1.0)) {
                return f64::NEG_INFINITY;
            }
            delta -= 0.5 * d * ev.iter().map(|l| l.ln_1p()).sum::<f64>();
        }
        if delta.is_finite() {
            delta
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Parameter gradient and the gauge-normalized stationarity residual.
    fn gradient(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let factors = self.layout.factors(x);
        let g = gradient_factors(self.datum, &factors)?;
        let blocks: Vec<DMatrix<f64>> = factors.iter().map(|l| l * l.transpose()).collect();
        let trace: f64 = blocks.iter().map(|b| b.trace()).sum();
        let scale = trace / self.datum.dim() as f64;
        let stat = projected_norm_blocks(self.datum, &g, &blocks) * scale;
        Ok((self.layout.pullback(x, &g), stat))
    }

    fn eigen_range(&self, x: &DVector<f64>) -> (f64, f64) {
        let blocks = self.layout.blocks(x);
        let trace: f64 = blocks.iter().map(|b| b.trace()).sum();
        let scale = self.layout.partition.iter().sum::<usize>() as f64 / trace;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for b in &blocks {
            let ev = SymmetricEigen::new(b * scale).eigenvalues;
            lo = lo.min(ev.min());
            hi = hi.max(ev.max());
        }
        (lo, hi)
    }
}

fn ascend(datum: &BLDatum, layout: &Layout, mut x: DVector<f64>, opts: &SolverOptions) -> Result<Run> {
    let eval = Evaluator { datum, layout };
    let mut f = eval.value(&x);
    if !f.is_finite() {
        return Err(Error::NumericalDomain("objective is not finite at the starting point".into()));
    }
    let (mut g, mut stat) = eval.gradient(&x)?;
    let (lo0, hi0) = eval.eigen_range(&x);
    let mut trace = vec![TraceEntry { iteration: 0, objective: f, stationarity: stat }];
    let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut alpha_prev = opts.step_init;

    let done = |status, x, value, stationarity, trace, message: &str| Run {
        status,
        x,
        value,
        stationarity,
        trace,
        message: message.to_string(),
    };

    for iter in 1..=opts.max_iters {
        if stat <= opts.stat_tol {
            return Ok(done(MgStatus::Converged, x, f, stat, trace, "stationarity below tolerance"));
        }

        let (mut dir, quasi_newton) = match lbfgs_direction(&g, &history) {
            Some(d) if d.dot(&g) > 0.0 => (d, true),
            _ => {
                history.clear();
                (g.clone(), false)
            }
        };
        let mut slope = dir.dot(&g);
        let mut alpha0 = if quasi_newton { 1.0 } else { (alpha_prev * 2.0).min(1e6) };

        let Ok(anchor) = eval.anchor(&x) else {
            return Ok(done(MgStatus::MaxIterations, x, f, stat, trace, "factorization lost precision"));
        };
        let mut step = line_search(&eval, &anchor, &dir, slope, alpha0);
        if step.is_none() && quasi_newton {
            history.clear();
            dir = g.clone();
            slope = dir.dot(&g);
            alpha0 = opts.step_init;
            step = line_search(&eval, &anchor, &dir, slope, alpha0);
        }
        let Some((alpha, gain)) = step else {
            let status = if stat <= opts.stat_tol { MgStatus::Converged } else { MgStatus::MaxIterations };
            return Ok(done(status, x, f, stat, trace, "line search stalled at rounding level"));
        };
        if !quasi_newton {
            alpha_prev = alpha;
        }

        let x_new = &x + &dir * alpha;
        let (g_new, stat_new) = eval.gradient(&x_new)?;
        let s = &x_new - &x;
        // Ascent on F is descent on −F: curvature pair uses y = −(g_new − g).
        let y = &g - &g_new;
        if s.dot(&y) > 1e-12 * s.norm() * y.norm() {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y));
        }
        x = x_new;
        // Tracking F through exact increments keeps the trace monotone.
        f += gain;
        g = g_new;
        stat = stat_new;
        trace.push(TraceEntry { iteration: iter, objective: f, stationarity: stat });

        if f > opts.divergence_threshold {
            return Ok(done(MgStatus::Unbounded, x, f, stat, trace, "objective exceeded the divergence threshold"));
        }
        let (lo, hi) = eval.eigen_range(&x);
        let growth = (hi / hi0).max(lo0 / lo);
        if growth > GROWTH_LIMIT {
            return Ok(done(MgStatus::Unbounded, x, f, stat, trace, "iterates degenerate while the objective keeps increasing"));
        }
    }
    let status = if stat <= opts.stat_tol { MgStatus::Converged } else { MgStatus::MaxIterations };
    Ok(done(status, x, f, stat, trace, "iteration budget exhausted"))
}

/// Two-loop recursion on the minimization of `−F`; returns an ascent direction.
fn lbfgs_direction(g: &DVector<f64>, history: &VecDeque<(DVector<f64>, DVector<f64>)>) -> Option<DVector<f64>> {
    let (s_last, y_last) = history.back()?;
    let mut q = -g;
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / y.dot(s);
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push((a, rho));
    }
    q *= s_last.dot(y_last) / y_last.dot(y_last);
    for ((s, y), (a, rho)) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    // q approximates H(−F)⁻¹ ∇(−F); the ascent direction is its negative.
    let d = -q;
    d.iter().all(|v| v.is_finite()).then_some(d)
}

/// Armijo backtracking, then doubling while the objective keeps improving.
/// Works on increments `F(x + α d) − F(x)`; near the optimum, where the
/// Armijo margin is below rounding, any strict increase is accepted.
fn line_search(eval: &Evaluator<'_>, anchor: &Anchor, dir: &DVector<f64>, slope: f64, alpha0: f64) -> Option<(f64, f64)> {
    let x = &anchor.x;
    let alpha_max = MAX_PARAM_STEP / dir.amax().max(f64::MIN_POSITIVE);
    let mut alpha = alpha0.min(alpha_max);
    let mut best_increase: Option<(f64, f64)> = None;
    for attempt in 0..MAX_BACKTRACKS {
        let gain = eval.increment(anchor, &(x + dir * alpha));
        if gain >= ARMIJO_C * alpha * slope && gain > 0.0 {
            let mut accepted = (alpha, gain);
            if attempt == 0 {
                for _ in 0..MAX_DOUBLINGS {
                    let a2 = accepted.0 * 2.0;
                    if a2 > alpha_max {
                        break;
                    }
                    let g2 = eval.increment(anchor, &(x + dir * a2));
                    if g2 > accepted.1 && g2 >= ARMIJO_C * a2 * slope {
                        accepted = (a2, g2);
                    } else {
                        break;
                    }
                }
            }
            return Some(accepted);
        }
        if gain > 0.0 && best_increase.map_or(true, |(_, gb)| gain > gb) {
            best_increase = Some((alpha, gain));
        }
        alpha *= 0.5;
    }
    best_increase
}
