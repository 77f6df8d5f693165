//! The inequality data `((c_i), (r_i), (d_j), (A_j))` and its validation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_ext;

/// Default relative singular-value threshold for the surjectivity check.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Block partition, coefficients and linear maps of one inequality instance.
///
/// Construction only enforces shapes; sign and rank conditions are reported by
/// [`validate_datum`] so that invalid instances can still be inspected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatumFile", into = "DatumFile")]
pub struct BLDatum {
    r: Vec<usize>,
    c: Vec<f64>,
    d: Vec<f64>,
    maps: Vec<DMatrix<f64>>,
}

/// On-disk layout: `{"r": [..], "c": [..], "d": [..], "maps": [[[..]]]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatumFile {
    r: Vec<usize>,
    c: Vec<f64>,
    d: Vec<f64>,
    #[serde(with = "serde_ext::matrices")]
    maps: Vec<DMatrix<f64>>,
}

impl TryFrom<DatumFile> for BLDatum {
    type Error = Error;

    fn try_from(f: DatumFile) -> Result<Self> {
        BLDatum::new(f.r, f.c, f.d, f.maps)
    }
}

impl From<BLDatum> for DatumFile {
    fn from(d: BLDatum) -> Self {
        DatumFile { r: d.r, c: d.c, d: d.d, maps: d.maps }
    }
}

impl BLDatum {
    pub fn new(r: Vec<usize>, c: Vec<f64>, d: Vec<f64>, maps: Vec<DMatrix<f64>>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Structural("at least one block is required".into()));
        }
        if maps.is_empty() {
            return Err(Error::Structural("at least one map is required".into()));
        }
        if let Some(i) = r.iter().position(|&ri| ri == 0) {
            return Err(Error::Structural(format!("block {i} has dimension 0")));
        }
        if c.len() != r.len() {
            return Err(Error::Structural(format!("{} block coefficients for {} blocks", c.len(), r.len())));
        }
        if d.len() != maps.len() {
            return Err(Error::Structural(format!("{} map coefficients for {} maps", d.len(), maps.len())));
        }
        if let Some(v) = c.iter().chain(&d).find(|v| !v.is_finite()) {
            return Err(Error::Structural(format!("non-finite coefficient {v}")));
        }
        let n: usize = r.iter().sum();
        for (j, a) in maps.iter().enumerate() {
            if a.ncols() != n {
                return Err(Error::Structural(format!(
                    "map {j} has {} columns but the partition has n = {n}",
                    a.ncols()
                )));
            }
            if a.nrows() == 0 {
                return Err(Error::Structural(format!("map {j} has no rows")));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Structural(format!("map {j} has non-finite entries")));
            }
        }
        Ok(BLDatum { r, c, d, maps })
    }

    /// Parses the JSON datum file format.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("datum serialization is infallible")
    }

    pub fn partition(&self) -> &[usize] {
        &self.r
    }

    pub fn block_coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn map_coeffs(&self) -> &[f64] {
        &self.d
    }

    pub fn maps(&self) -> &[DMatrix<f64>] {
        &self.maps
    }

    /// Ambient dimension `n = Σ r_i`.
    pub fn dim(&self) -> usize {
        self.r.iter().sum()
    }

    pub fn num_blocks(&self) -> usize {
        self.r.len()
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    /// Starting offset of every block within `0..n`.
    pub fn block_offsets(&self) -> Vec<usize> {
        self.r
            .iter()
            .scan(0, |acc, &ri| {
                let start = *acc;
                *acc += ri;
                Some(start)
            })
            .collect()
    }

    /// `Σ c_i r_i − Σ d_j n_j`.
    pub fn balance(&self) -> f64 {
        let lhs: f64 = self.c.iter().zip(&self.r).map(|(c, &r)| c * r as f64).sum();
        let rhs: f64 = self.d.iter().zip(&self.maps).map(|(d, a)| d * a.nrows() as f64).sum();
        lhs - rhs
    }

    /// Whether the dimension balance holds up to rounding in the coefficients.
    pub fn is_balanced(&self) -> bool {
        let lhs: f64 = self.c.iter().zip(&self.r).map(|(c, &r)| c.abs() * r as f64).sum();
        let rhs: f64 = self.d.iter().zip(&self.maps).map(|(d, a)| d.abs() * a.nrows() as f64).sum();
        self.balance().abs() <= 1e-12 * (lhs + rhs).max(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub balance: f64,
    pub rank_defects: Vec<usize>,
    pub messages: Vec<String>,
}

/// Checks coefficient signs and surjectivity of every map.
///
/// A map counts as surjective when it has `n_j` singular values above
/// `rank_tol` times its largest one. The balance is always reported, since a
/// nonzero balance does not make the datum invalid, only `M_g` infinite.
pub fn validate_datum(datum: &BLDatum, rank_tol: f64) -> ValidationReport {
    let mut messages = Vec::new();
    let mut signs_ok = true;
    for (i, &c) in datum.c.iter().enumerate() {
        if c < 0.0 {
            signs_ok = false;
            messages.push(format!("block coefficient c[{i}] = {c} is negative"));
        }
    }
    for (j, &d) in datum.d.iter().enumerate() {
        if d < 0.0 {
            signs_ok = false;
            messages.push(format!("map coefficient d[{j}] = {d} is negative"));
        }
    }

    let mut rank_defects = Vec::new();
    for (j, a) in datum.maps.iter().enumerate() {
        let rank = numerical_rank(a, rank_tol);
        if rank < a.nrows() {
            rank_defects.push(j);
            messages.push(format!("map {j} has rank {rank} < {} rows (not surjective)", a.nrows()));
        }
    }

    let balance = datum.balance();
    if !datum.is_balanced() {
        messages.push(format!("dimension balance is {balance}, so M_g is infinite"));
    }

    ValidationReport { ok: signs_ok && rank_defects.is_empty(), balance, rank_defects, messages }
}

pub(crate) fn numerical_rank(a: &DMatrix<f64>, rank_tol: f64) -> usize {
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Named fixtures mirroring the classical special cases.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    /// `k = 1`, `r = (n)`, `A = I_n`, `c = d = 1`.
    Identity(usize),
    /// Lieb's form of the entropy power inequality with weight `λ`.
    Epi(f64),
    /// `r = (1)`, `c = (2)`, `d = (1)`, `A = [1]`; balance 1.
    Unbalanced,
    /// Scalar blocks with unit weights and a single map `A` weighted by `d`.
    ZamirFeder { a: DMatrix<f64>, d: f64 },
}

pub fn builtin_datum(which: &Builtin) -> Result<BLDatum> {
    match which {
        Builtin::Identity(n) => {
            if *n == 0 {
                return Err(Error::Parameter("identity datum needs n >= 1".into()));
            }
            BLDatum::new(vec![*n], vec![1.0], vec![1.0], vec![DMatrix::identity(*n, *n)])
        }
        Builtin::Epi(lambda) => {
            let l = *lambda;
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Parameter(format!("epi weight {l} is outside (0, 1)")));
            }
            let a = DMatrix::from_row_slice(1, 2, &[l.sqrt(), (1.0 - l).sqrt()]);
            BLDatum::new(vec![1, 1], vec![l, 1.0 - l], vec![1.0], vec![a])
        }
        Builtin::Unbalanced => {
            BLDatum::new(vec![1], vec![2.0], vec![1.0], vec![DMatrix::from_element(1, 1, 1.0)])
        }
        Builtin::ZamirFeder { a, d } => {
            let n = a.ncols();
            if n == 0 || a.nrows() == 0 {
                return Err(Error::Parameter("zamir_feder needs a non-empty map".into()));
            }
            if numerical_rank(a, DEFAULT_RANK_TOL) < a.nrows() {
                return Err(Error::Parameter("zamir_feder map must have full row rank".into()));
            }
            BLDatum::new(vec![1; n], vec![1.0; n], vec![*d], vec![a.clone()])
        }
    }
}
