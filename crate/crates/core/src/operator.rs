//! Elements of the two concrete finite-trace algebras: scalar complex
//! matrices and circle-fibered operators (matrix-valued symbols on S^1),
//! together with the von Neumann trace, spectral density, heat trace,
//! zeta function and the Fuglede-Kadison log-determinant.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TorsionError};
use crate::numerics::{self, shift_profile};

pub type CMat = DMatrix<Complex64>;

/// Relative cutoff below which singular values count as kernel.
pub const SIGMA_REL_TOL: f64 = 1e-12;
/// Default fiber sampling resolution on the circle.
pub const DEFAULT_FIBERS: usize = 4096;
/// Finest cell width reached by adaptive refinement (2^-20).
pub const MIN_CELL: f64 = 1.0 / (1 << 20) as f64;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraTag {
    Scalar,
    CircleFibered,
}

/// Operator payload. Circle-fibered symbols come either as trigonometric
/// polynomials (finitely many Fourier modes with matrix coefficients) or as
/// fibers sampled at the midpoints (j + 1/2)/N of a uniform grid on [0,1).
#[derive(Clone, Debug)]
pub enum Payload {
    Scalar(CMat),
    TrigPoly(BTreeMap<i64, CMat>),
    Sampled(Vec<CMat>),
}

#[derive(Clone, Debug)]
pub struct Operator {
    tag: AlgebraTag,
    rows: usize,
    cols: usize,
    payload: Payload,
}

impl Operator {
    pub fn scalar(matrix: CMat) -> Self {
        let (rows, cols) = matrix.shape();
        Operator {
            tag: AlgebraTag::Scalar,
            rows,
            cols,
            payload: Payload::Scalar(matrix),
        }
    }

    pub fn trig_poly(rows: usize, cols: usize, terms: Vec<(i64, CMat)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, c) in terms {
            if c.shape() != (rows, cols) {
                return Err(TorsionError::DimensionMismatch(format!(
                    "coefficient of frequency {n} is {:?}, expected {rows}x{cols}",
                    c.shape()
                )));
            }
            let entry = map.entry(n).or_insert_with(|| CMat::zeros(rows, cols));
            *entry += c;
        }
        map.retain(|_, c: &mut CMat| c.norm() > 0.0);
        Ok(Operator {
            tag: AlgebraTag::CircleFibered,
            rows,
            cols,
            payload: Payload::TrigPoly(map),
        })
    }

    pub fn sampled(fibers: Vec<CMat>) -> Result<Self> {
        let first = fibers
            .first()
            .ok_or_else(|| TorsionError::InvalidInput("no fibers".into()))?;
        let (rows, cols) = first.shape();
        if fibers.iter().any(|f| f.shape() != (rows, cols)) {
            return Err(TorsionError::DimensionMismatch(
                "sampled fibers must share one shape".into(),
            ));
        }
        Ok(Operator {
            tag: AlgebraTag::CircleFibered,
            rows,
            cols,
            payload: Payload::Sampled(fibers),
        })
    }

    /// Circle-fibered multiplication operator by a scalar symbol.
    pub fn multiplication<F: Fn(f64) -> Complex64>(symbol: F, fibers: usize) -> Self {
        let fibers = (0..fibers)
            .map(|j| {
                let t = (j as f64 + 0.5) / fibers as f64;
                CMat::from_element(1, 1, symbol(t))
            })
            .collect();
        Operator::sampled(fibers).expect("nonempty fiber list")
    }

    pub fn identity(tag: AlgebraTag, dim: usize) -> Self {
        match tag {
            AlgebraTag::Scalar => Operator::scalar(CMat::identity(dim, dim)),
            AlgebraTag::CircleFibered => {
                Operator::trig_poly(dim, dim, vec![(0, CMat::identity(dim, dim))]).unwrap()
            }
        }
    }

    pub fn zero(tag: AlgebraTag, rows: usize, cols: usize) -> Self {
        match tag {
            AlgebraTag::Scalar => Operator::scalar(CMat::zeros(rows, cols)),
            AlgebraTag::CircleFibered => Operator::trig_poly(rows, cols, vec![]).unwrap(),
        }
    }

    pub fn algebra(&self) -> AlgebraTag {
        self.tag
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn payload(&self) -> &Payload {
        &self.payload
    }
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Fiber matrix at circle parameter `t` (Scalar operators are constant).
    pub fn fiber_at(&self, t: f64) -> CMat {
        match &self.payload {
            Payload::Scalar(m) => m.clone(),
            Payload::TrigPoly(terms) => {
                let mut out = CMat::zeros(self.rows, self.cols);
                for (&n, c) in terms {
                    let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * n as f64 * t);
                    out += c * phase;
                }
                out
            }
            Payload::Sampled(fibers) => {
                // linear interpolation on the periodic midpoint grid
                let n = fibers.len();
                let x = (t.rem_euclid(1.0)) * n as f64 - 0.5;
                let j0 = x.floor();
                let frac = x - j0;
                let i0 = (j0.rem_euclid(n as f64)) as usize % n;
                let i1 = (i0 + 1) % n;
                &fibers[i0] * Complex64::new(1.0 - frac, 0.0)
                    + &fibers[i1] * Complex64::new(frac, 0.0)
            }
        }
    }

    fn sample_count(&self) -> usize {
        match &self.payload {
            Payload::Scalar(_) => 1,
            Payload::TrigPoly(_) => DEFAULT_FIBERS,
            Payload::Sampled(fibers) => fibers.len().max(2),
        }
    }

    /// Resample a circle-fibered operator at `n` midpoints.
    pub fn resample(&self, n: usize) -> Result<Self> {
        match self.tag {
            AlgebraTag::Scalar => Err(TorsionError::AlgebraMismatch(
                "cannot resample a scalar operator".into(),
            )),
            AlgebraTag::CircleFibered => Operator::sampled(
                (0..n)
                    .map(|j| self.fiber_at((j as f64 + 0.5) / n as f64))
                    .collect(),
            ),
        }
    }

    /// Singular values per sampled fiber (one entry for scalar operators).
    pub fn fiber_singular_values(&self) -> Vec<Vec<f64>> {
        match &self.payload {
            Payload::Scalar(m) => vec![singular_values(m)],
            _ => {
                let n = self.sample_count();
                (0..n)
                    .map(|j| singular_values(&self.fiber_at((j as f64 + 0.5) / n as f64)))
                    .collect()
            }
        }
    }

    /// Largest singular value over the sample grid.
    pub fn op_norm(&self) -> f64 {
        self.fiber_singular_values()
            .iter()
            .flat_map(|svs| svs.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Operator {
        let payload = match &self.payload {
            Payload::Scalar(m) => Payload::Scalar(m.adjoint()),
            Payload::TrigPoly(terms) => Payload::TrigPoly(
                terms.iter().map(|(&n, c)| (-n, c.adjoint())).collect(),
            ),
            Payload::Sampled(fibers) => {
                Payload::Sampled(fibers.iter().map(|f| f.adjoint()).collect())
            }
        };
        Operator {
            tag: self.tag,
            rows: self.cols,
            cols: self.rows,
            payload,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        let payload = match &self.payload {
            Payload::Scalar(m) => Payload::Scalar(m * factor),
            Payload::TrigPoly(terms) => {
                Payload::TrigPoly(terms.iter().map(|(&n, c)| (n, c * factor)).collect())
            }
            Payload::Sampled(fibers) => {
                Payload::Sampled(fibers.iter().map(|f| f * factor).collect())
            }
        };
        Operator {
            tag: self.tag,
            rows: self.rows,
            cols: self.cols,
            payload,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        if self.tag != other.tag {
            return Err(TorsionError::AlgebraMismatch("add across algebras".into()));
        }
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(TorsionError::DimensionMismatch(format!(
                "add {}x{} to {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let payload = match (&self.payload, &other.payload) {
            (Payload::Scalar(a), Payload::Scalar(b)) => Payload::Scalar(a + b),
            (Payload::TrigPoly(a), Payload::TrigPoly(b)) => {
                let mut out = a.clone();
                for (&n, c) in b {
                    let entry = out
                        .entry(n)
                        .or_insert_with(|| CMat::zeros(self.rows, self.cols));
                    *entry += c;
                }
                out.retain(|_, c| c.norm() > 0.0);
                Payload::TrigPoly(out)
            }
            _ => {
                let n = self.sample_count().max(other.sample_count());
                Payload::Sampled(
                    (0..n)
                        .map(|j| {
                            let t = (j as f64 + 0.5) / n as f64;
                            self.fiber_at(t) + other.fiber_at(t)
                        })
                        .collect(),
                )
            }
        };
        Ok(Operator {
            tag: self.tag,
            rows: self.rows,
            cols: self.cols,
            payload,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Operator composition a.compose(b) = a * b (apply b first).
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.tag != other.tag {
            return Err(TorsionError::AlgebraMismatch(
                "compose across algebras".into(),
            ));
        }
        if self.cols != other.rows {
            return Err(TorsionError::DimensionMismatch(format!(
                "compose {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let payload = match (&self.payload, &other.payload) {
            (Payload::Scalar(a), Payload::Scalar(b)) => Payload::Scalar(a * b),
            (Payload::TrigPoly(a), Payload::TrigPoly(b)) => {
                let mut out: BTreeMap<i64, CMat> = BTreeMap::new();
                for (&na, ca) in a {
                    for (&nb, cb) in b {
                        let entry = out
                            .entry(na + nb)
                            .or_insert_with(|| CMat::zeros(self.rows, other.cols));
                        *entry += ca * cb;
                    }
                }
                out.retain(|_, c| c.norm() > 0.0);
                Payload::TrigPoly(out)
            }
            _ => {
                let n = self.sample_count().max(other.sample_count());
                Payload::Sampled(
                    (0..n)
                        .map(|j| {
                            let t = (j as f64 + 0.5) / n as f64;
                            self.fiber_at(t) * other.fiber_at(t)
                        })
                        .collect(),
                )
            }
        };
        Ok(Operator {
            tag: self.tag,
            rows: self.rows,
            cols: other.cols,
            payload,
        })
    }

    /// Max fiber-norm distance to another operator, probed on the sample grid.
    pub fn distance(&self, other: &Operator) -> f64 {
        if self.tag != other.tag || (self.rows, self.cols) != (other.rows, other.cols) {
            return f64::INFINITY;
        }
        match (&self.payload, &other.payload) {
            (Payload::Scalar(a), Payload::Scalar(b)) => (a - b).norm(),
            _ => {
                let n = self.sample_count().max(other.sample_count()).min(512);
                (0..n)
                    .map(|j| {
                        let t = (j as f64 + 0.5) / n as f64;
                        (self.fiber_at(t) - other.fiber_at(t)).norm()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Fiberwise inverse.
    pub fn inverse(&self) -> Result<Operator> {
        if !self.is_square() {
            return Err(TorsionError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let inv = |m: &CMat| -> Result<CMat> {
            m.clone().try_inverse().ok_or_else(|| {
                TorsionError::NotInvertible("singular fiber".into())
            })
        };
        match &self.payload {
            Payload::Scalar(m) => Ok(Operator::scalar(inv(m)?)),
            _ => {
                let n = self.sample_count();
                Operator::sampled(
                    (0..n)
                        .map(|j| inv(&self.fiber_at((j as f64 + 0.5) / n as f64)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
        }
    }

    /// Integer power (negative powers via the inverse).
    pub fn int_pow(&self, k: i64) -> Result<Operator> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut out = Operator::identity(self.tag, self.rows);
        for _ in 0..k.unsigned_abs() {
            out = out.compose(&base)?;
        }
        Ok(out)
    }

    /// |phi| = (phi* phi)^(1/2), fiberwise.
    pub fn abs(&self) -> Operator {
        let apply = |m: &CMat| -> CMat {
            let prod = m.adjoint() * m;
            hermitian_function(&prod, |lam| lam.max(0.0).sqrt())
        };
        let payload = match &self.payload {
            Payload::Scalar(m) => Payload::Scalar(apply(m)),
            _ => {
                let n = self.sample_count();
                Payload::Sampled(
                    (0..n)
                        .map(|j| apply(&self.fiber_at((j as f64 + 0.5) / n as f64)))
                        .collect(),
                )
            }
        };
        Operator {
            tag: self.tag,
            rows: self.cols,
            cols: self.cols,
            payload,
        }
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut svs: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    svs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    svs
}

/// Apply a real function to a Hermitian matrix through its eigendecomposition.
pub fn hermitian_function<F: Fn(f64) -> f64>(m: &CMat, f: F) -> CMat {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|lam| Complex64::new(f(lam), 0.0));
    &eig.eigenvectors * CMat::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

/// von Neumann trace: matrix trace for scalars, the fiber-trace integral
/// (equivalently the frequency-zero coefficient trace) on the circle.
pub fn vn_trace(op: &Operator) -> Result<Complex64> {
    if !op.is_square() {
        return Err(TorsionError::NotSquare {
            rows: op.rows,
            cols: op.cols,
        });
    }
    Ok(match op.payload() {
        Payload::Scalar(m) => m.trace(),
        Payload::TrigPoly(terms) => terms
            .get(&0)
            .map(|c| c.trace())
            .unwrap_or(Complex64::new(0.0, 0.0)),
        Payload::Sampled(fibers) => {
            fibers.iter().map(|f| f.trace()).sum::<Complex64>() / fibers.len() as f64
        }
    })
}

/// von Neumann dimension of the source module (rows for these realizations).
pub fn vn_dimension(op: &Operator) -> f64 {
    op.rows as f64
}

/// Trace norm ||phi||_tr = int lambda dF_{|phi|}.
pub fn trace_norm(op: &Operator) -> f64 {
    let per_fiber: Vec<f64> = op
        .fiber_singular_values()
        .iter()
        .map(|svs| svs.iter().sum())
        .collect();
    per_fiber.iter().sum::<f64>() / per_fiber.len() as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kernel_dim: f64,
}

/// Sampled spectral distribution F_{|phi|}(lambda) = Tr P_{|phi|}([0,lambda])
/// restricted to the positive part; `kernel_dim` counts the (numerical) kernel.
pub fn spectral_density(op: &Operator, grid: &[f64]) -> Result<SpectralDensity> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) || grid[0] < 0.0 {
        return Err(TorsionError::BadGrid);
    }
    let fibers = op.fiber_singular_values();
    let sigma_max = fibers
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max);
    let cutoff = SIGMA_REL_TOL * sigma_max.max(1.0);
    let nf = fibers.len() as f64;
    let kernel_dim = fibers
        .iter()
        .map(|svs| svs.iter().filter(|&&s| s <= cutoff).count() as f64)
        .sum::<f64>()
        / nf
        + (op.rows.min(op.cols) as f64 - fibers[0].len() as f64).max(0.0);
    // F(lambda) = Tr P_{|phi|}([0, lambda]): kernel mass included
    let deficiency = (op.rows.min(op.cols) as f64 - fibers[0].len() as f64).max(0.0);
    let values = grid
        .iter()
        .map(|&lam| {
            fibers
                .iter()
                .map(|svs| svs.iter().filter(|&&s| s <= lam).count() as f64)
                .sum::<f64>()
                / nf
                + deficiency
        })
        .collect();
    Ok(SpectralDensity {
        grid: grid.to_vec(),
        values,
        kernel_dim,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetClass {
    DeterminantClass,
    Divergent,
    Unresolved,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetClassVerdict {
    pub verdict: DetClass,
    /// Partial integrals int_{eps_k}^1 log(lambda) dF over shrinking eps_k.
    pub log_det_lower_bound_sequence: Vec<f64>,
    /// Fitted exponent p in |I_k| ~ C (log 1/eps_k)^p when diverging.
    pub divergence_rate_estimate: Option<f64>,
}

impl DetClassVerdict {
    pub fn is_determinant_class(&self) -> bool {
        self.verdict == DetClass::DeterminantClass
    }
}

/// Stabilization tolerance for the determinant-class surrogate test.
const DET_CLASS_TOL: f64 = 1e-4;

/// Geometric default epsilon sequence 2^-1, ..., 2^-40.
pub fn default_epsilon_sequence() -> Vec<f64> {
    (1..=40).map(|k| 0.5f64.powi(k)).collect()
}

/// Numerical surrogate for the determinant-class condition
/// int_{0+}^1 log(lambda) dF > -infinity: the partial integrals must
/// stabilize under geometric shrinkage of the lower limit.
pub fn determinant_class_check(op: &Operator, epsilons: &[f64]) -> DetClassVerdict {
    let fibers = op.fiber_singular_values();
    let nf = fibers.len() as f64;
    let partials: Vec<f64> = epsilons
        .iter()
        .map(|&eps| {
            fibers
                .iter()
                .map(|svs| {
                    svs.iter()
                        .filter(|&&s| s > eps && s <= 1.0)
                        .map(|&s| s.ln())
                        .sum::<f64>()
                })
                .sum::<f64>()
                / nf
        })
        .collect();
    let diffs: Vec<f64> = partials.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let stabilized = diffs.windows(3).any(|w| w.iter().all(|&d| d < DET_CLASS_TOL));
    if stabilized {
        return DetClassVerdict {
            verdict: DetClass::DeterminantClass,
            log_det_lower_bound_sequence: partials,
            divergence_rate_estimate: None,
        };
    }
    // fit |I_k| ~ C * (log 1/eps_k)^p on the tail
    let tail = partials.len() / 2;
    let pts: Vec<(f64, f64)> = partials
        .iter()
        .zip(epsilons)
        .skip(tail)
        .filter(|(i, _)| i.abs() > 1e-12)
        .map(|(&i, &eps)| ((1.0 / eps).ln().ln(), i.abs().ln()))
        .collect();
    let rate = fit_slope(&pts);
    let diverging = diffs
        .windows(3)
        .last()
        .map(|w| w.iter().all(|&d| d >= DET_CLASS_TOL))
        .unwrap_or(false);
    DetClassVerdict {
        verdict: if diverging {
            DetClass::Divergent
        } else {
            DetClass::Unresolved
        },
        log_det_lower_bound_sequence: partials,
        divergence_rate_estimate: rate,
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-12 {
        None
    } else {
        Some((n * sxy - sx * sy) / den)
    }
}

/// log of a fiber's reduced determinant: sum of log sigma over retained
/// singular values.
fn fiber_log_det(m: &CMat, cutoff: f64) -> f64 {
    singular_values(m)
        .iter()
        .filter(|&&s| s > cutoff)
        .map(|&s| s.ln())
        .sum()
}

/// Fuglede-Kadison log-determinant log det|phi| = (1/2) log det'(phi* phi).
///
/// Scalar operators reduce to the product of nonzero singular values. On the
/// circle the fiber integral is refined adaptively near fibers where the
/// smallest retained singular value is small, down to cells of width 2^-20.
pub fn fk_log_det(op: &Operator) -> Result<f64> {
    let verdict = determinant_class_check(op, &default_epsilon_sequence());
    if verdict.verdict == DetClass::Divergent {
        return Err(TorsionError::DivergentDeterminant(String::new()));
    }
    let sigma_max = op.op_norm();
    if sigma_max == 0.0 {
        // zero operator: empty positive spectrum, det' over nothing
        return Ok(0.0);
    }
    let cutoff = SIGMA_REL_TOL * sigma_max;
    match op.payload() {
        Payload::Scalar(m) => Ok(fiber_log_det(m, cutoff)),
        _ => {
            let n = op.sample_count();
            let near_kernel = 0.1 * sigma_max.min(1.0);
            let g = |t: f64| fiber_log_det(&op.fiber_at(t), cutoff);
            let mut total = 0.0;
            for j in 0..n {
                let lo = j as f64 / n as f64;
                let hi = (j + 1) as f64 / n as f64;
                let mid = op.fiber_at(0.5 * (lo + hi));
                let min_sv = singular_values(&mid)
                    .into_iter()
                    .filter(|&s| s > cutoff)
                    .fold(f64::INFINITY, f64::min);
                if min_sv < near_kernel {
                    total += numerics::adaptive_midpoint(&g, lo, hi, 1e-9, MIN_CELL);
                } else {
                    total += fiber_log_det(&mid, cutoff) * (hi - lo);
                }
            }
            Ok(total)
        }
    }
}

/// Heat trace theta_{|phi|}(t) = int e^{-t lambda} dF+ (kernel excluded).
pub fn heat_trace(op: &Operator, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(TorsionError::NonPositiveTime(t));
    }
    let fibers = op.fiber_singular_values();
    let sigma_max = fibers
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max);
    let cutoff = SIGMA_REL_TOL * sigma_max.max(1.0);
    let nf = fibers.len() as f64;
    Ok(fibers
        .iter()
        .map(|svs| {
            svs.iter()
                .filter(|&&s| s > cutoff)
                .map(|&s| (-t * s).exp())
                .sum::<f64>()
        })
        .sum::<f64>()
        / nf)
}

/// Growth exponent of Op(5), estimated from the spectral density tail.
/// Bounded operators (everything representable here) have alpha = 0.
pub fn growth_exponent(_op: &Operator) -> f64 {
    0.0
}

/// Partial zeta function zeta^I(s) = (1/Gamma(s)) int_0^1 t^{s-1} theta(t) dt
/// by composite quadrature in u = log t.
pub fn zeta_i(op: &Operator, s: Complex64) -> Result<Complex64> {
    let alpha = growth_exponent(op);
    if s.re <= alpha {
        return Err(TorsionError::ZetaDivergent {
            re_s: s.re,
            alpha,
        });
    }
    let fibers = op.fiber_singular_values();
    let sigma_max = fibers
        .iter()
        .flat_map(|v| v.iter().copied())
        .fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let cutoff = SIGMA_REL_TOL * sigma_max;
    let nf = fibers.len() as f64;
    let theta = |t: f64| -> f64 {
        fibers
            .iter()
            .map(|svs| {
                svs.iter()
                    .filter(|&&v| v > cutoff)
                    .map(|&v| (-t * v).exp())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / nf
    };
    // t^{s-1} dt = e^{su} du under t = e^u
    let integrand = |u: f64| (s * u).exp() * theta(u.exp());
    let lo = (1e-16f64).ln();
    let integral = numerics::simpson(&integrand, lo, 0.0, 4000);
    Ok(integral / numerics::gamma(s))
}

/// Spectral shift of Lemma-1.4 type: returns phi + f(phi) with
/// f = g - id, g smooth increasing, g = a below a and the identity above b.
pub fn spectral_shift(op: &Operator, a: f64, b: f64) -> Result<Operator> {
    if !(0.0 < a && a < b) {
        return Err(TorsionError::InvalidInput(format!(
            "need 0 < a < b, got a={a}, b={b}"
        )));
    }
    if !op.is_square() {
        return Err(TorsionError::NotSquare {
            rows: op.rows,
            cols: op.cols,
        });
    }
    let defect = op.distance(&op.adjoint());
    let tol = 1e-9 * op.op_norm().max(1.0);
    if defect > tol {
        return Err(TorsionError::NotSelfAdjoint { defect, tol });
    }
    let apply = |m: &CMat| hermitian_function(m, |lam| shift_profile(lam.max(0.0), a, b));
    match op.payload() {
        Payload::Scalar(m) => Ok(Operator::scalar(apply(m))),
        _ => {
            let n = op.sample_count();
            Operator::sampled(
                (0..n)
                    .map(|j| apply(&op.fiber_at((j as f64 + 0.5) / n as f64)))
                    .collect(),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(vals: &[f64]) -> Operator {
        Operator::scalar(CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| c(v, 0.0)),
        )))
    }

    /// alpha(t) = e^{2 pi i t} - 1 as a trig-poly symbol.
    fn alpha_reg() -> Operator {
        Operator::trig_poly(
            1,
            1,
            vec![
                (1, CMat::from_element(1, 1, c(1.0, 0.0))),
                (0, CMat::from_element(1, 1, c(-1.0, 0.0))),
            ],
        )
        .unwrap()
    }

    #[test]
    fn trace_of_identity_is_module_dimension() {
        let id = Operator::identity(AlgebraTag::CircleFibered, 1);
        assert_relative_eq!(vn_trace(&id).unwrap().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_scalar_diag() {
        assert_relative_eq!(vn_trace(&diag(&[2.0, 3.0])).unwrap().re, 5.0);
    }

    #[test]
    fn trace_of_pure_frequency_vanishes() {
        let op = Operator::trig_poly(1, 1, vec![(1, CMat::from_element(1, 1, c(1.0, 0.0)))])
            .unwrap();
        assert_relative_eq!(vn_trace(&op).unwrap().norm(), 0.0, epsilon = 1e-12);
        // oracle: dense sampling quadrature
        let sampled = op.resample(1024).unwrap();
        assert_relative_eq!(vn_trace(&sampled).unwrap().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_is_involutive() {
        let op = alpha_reg();
        assert!(op.adjoint().adjoint().distance(&op) < 1e-12);
    }

    #[test]
    fn compose_with_identity() {
        let op = alpha_reg();
        let id = Operator::identity(AlgebraTag::CircleFibered, 1);
        assert!(op.compose(&id).unwrap().distance(&op) < 1e-12);
    }

    #[test]
    fn adjoint_of_single_mode_conjugates_frequency() {
        let cmat = CMat::from_element(1, 1, c(0.3, 0.7));
        let op = Operator::trig_poly(1, 1, vec![(1, cmat.clone())]).unwrap();
        let adj = op.adjoint();
        match adj.payload() {
            Payload::TrigPoly(terms) => {
                assert_eq!(terms.len(), 1);
                assert!((terms[&-1][(0, 0)] - cmat[(0, 0)].conj()).norm() < 1e-15);
            }
            _ => panic!("expected trig poly"),
        }
        // oracle: sampled adjoint (linear interpolation limits the accuracy)
        let sampled_adj = op.resample(2048).unwrap().adjoint();
        assert!(adj.distance(&sampled_adj) < 1e-4);
    }

    #[test]
    fn density_of_identity() {
        let id = Operator::identity(AlgebraTag::CircleFibered, 3);
        let f = spectral_density(&id, &[0.5, 1.0]).unwrap();
        assert_relative_eq!(f.values[0], 0.0);
        assert_relative_eq!(f.values[1], 3.0);
    }

    #[test]
    fn density_of_two_sin() {
        // |e^{2 pi i t} - 1| = 2 |sin pi t|, F(lambda) = (2/pi) asin(lambda/2)
        let op = alpha_reg();
        let grid: Vec<f64> = (1..=19).map(|k| 0.1 * k as f64).collect();
        let f = spectral_density(&op, &grid).unwrap();
        for (lam, v) in grid.iter().zip(&f.values) {
            let expected = 2.0 / std::f64::consts::PI * (lam / 2.0).asin();
            assert_relative_eq!(*v, expected, epsilon = 2e-3);
        }
    }

    #[test]
    fn density_of_flat_function_symbol() {
        // alpha(x) = exp(-1/x^2): F(lambda) = (-log lambda)^{-1/2}
        let op = Operator::multiplication(
            |x| c((-1.0 / (x * x)).exp(), 0.0),
            8192,
        );
        for &lam in &[1e-6, 1e-4, 1e-2, 0.2] {
            let f = spectral_density(&op, &[lam]).unwrap();
            let expected = (-(lam.ln())).powf(-0.5);
            assert_relative_eq!(f.values[0], expected, max_relative = 0.02);
        }
    }

    #[test]
    fn fk_log_det_scalar() {
        assert_relative_eq!(fk_log_det(&diag(&[2.0, 3.0])).unwrap(), 6.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn fk_log_det_regular_representation_symbol() {
        // Jensen: int_0^1 log|e^{2 pi i t} - 1| dt = 0
        let v = fk_log_det(&alpha_reg()).unwrap();
        assert!(v.abs() < 1e-4, "got {v}");
    }

    #[test]
    fn fk_log_det_constant_symbol() {
        let op = Operator::trig_poly(1, 1, vec![(0, CMat::from_element(1, 1, c(0.0, 2.5)))])
            .unwrap();
        assert_relative_eq!(fk_log_det(&op).unwrap(), 2.5f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn heat_trace_values() {
        assert_relative_eq!(
            heat_trace(&diag(&[2.0]), 1.3).unwrap(),
            (-1.3 * 2.0f64).exp(),
            epsilon = 1e-12
        );
        let id = Operator::identity(AlgebraTag::CircleFibered, 4);
        assert_relative_eq!(
            heat_trace(&id, 1.0).unwrap(),
            4.0 * (-1.0f64).exp(),
            epsilon = 1e-10
        );
        assert_relative_eq!(heat_trace(&diag(&[0.0, 0.0]), 0.7).unwrap(), 0.0);
        assert!(heat_trace(&diag(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn zeta_i_closed_forms() {
        // zero operator
        let z = zeta_i(&diag(&[0.0]), c(1.5, 0.3)).unwrap();
        assert!(z.norm() < 1e-12);
        // diag(2) at s=1: (1 - e^-2)/2
        let z = zeta_i(&diag(&[2.0]), c(1.0, 0.0)).unwrap();
        assert_relative_eq!(z.re, (1.0 - (-2.0f64).exp()) / 2.0, epsilon = 1e-8);
        // identity (k=1) at s=1: 1 - e^-1
        let id = Operator::identity(AlgebraTag::Scalar, 1);
        let z = zeta_i(&id, c(1.0, 0.0)).unwrap();
        assert_relative_eq!(z.re, 1.0 - (-1.0f64).exp(), epsilon = 1e-8);
        assert!(zeta_i(&id, c(-0.5, 0.0)).is_err());
    }

    #[test]
    fn det_class_verdicts() {
        let eps = default_epsilon_sequence();
        let v = determinant_class_check(&alpha_reg(), &eps);
        assert!(v.is_determinant_class());
        let id = Operator::identity(AlgebraTag::Scalar, 2);
        let v = determinant_class_check(&id, &eps);
        assert!(v.is_determinant_class());
        assert_relative_eq!(*v.log_det_lower_bound_sequence.last().unwrap(), 0.0);
        let flat = Operator::multiplication(|x| c((-1.0 / (x * x)).exp(), 0.0), 8192);
        let v = determinant_class_check(&flat, &eps);
        assert_eq!(v.verdict, DetClass::Divergent);
        assert!(fk_log_det(&flat).is_err());
        // partial integrals must be nonincreasing as more tail is included
        assert!(v
            .log_det_lower_bound_sequence
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn spectral_shift_matches_profile() {
        // all spectrum above b: untouched
        let op = diag(&[2.0, 3.0]);
        let shifted = spectral_shift(&op, 0.5, 1.0).unwrap();
        assert!(shifted.distance(&op) < 1e-12);
        // below a: clamped to a
        let op = diag(&[0.1]);
        let shifted = spectral_shift(&op, 0.5, 1.0).unwrap();
        assert_relative_eq!(shifted.op_norm(), 0.5, epsilon = 1e-12);
        // not selfadjoint input rejected
        let bad = Operator::scalar(CMat::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ));
        assert!(spectral_shift(&bad, 0.5, 1.0).is_err());
    }

    #[test]
    fn spectral_shift_lemma_properties_on_circle_symbol() {
        // |alpha| for alpha = e^{2 pi i t} - 1 as a positive symbol
        let op = Operator::multiplication(
            |t| c(2.0 * (std::f64::consts::PI * t).sin().abs(), 0.0),
            2048,
        );
        let (a, b) = (0.3, 0.6);
        let shifted = spectral_shift(&op, a, b).unwrap();
        let grid: Vec<f64> = (1..=30).map(|k| 0.02 * k as f64).collect();
        let f_in = spectral_density(&op, &grid).unwrap();
        let f_out = spectral_density(&shifted, &grid).unwrap();
        for ((&lam, &fo), &fi) in grid.iter().zip(&f_out.values).zip(&f_in.values) {
            if lam < a {
                // (i) no spectrum below a
                assert!(fo < 1e-9, "F({lam}) = {fo}");
            }
            if lam >= b {
                // (iii) unchanged above b
                assert_relative_eq!(fo, fi, epsilon = 2e-3);
            }
        }
        // (ii) mass has accumulated at a
        let f_at_a = spectral_density(&shifted, &[a + 1e-6]).unwrap().values[0];
        let f_in_at_a = spectral_density(&op, &[a]).unwrap().values[0];
        assert!(f_at_a >= f_in_at_a - 1e-3);
    }

    #[test]
    fn fk_multiplicativity_on_invertible_pairs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let n = 3;
            let a = Operator::scalar(
                CMat::identity(n, n) * c(2.0, 0.0)
                    + CMat::from_fn(n, n, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.3
                    }),
            );
            let b = Operator::scalar(
                CMat::identity(n, n) * c(1.5, 0.0)
                    + CMat::from_fn(n, n, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.3
                    }),
            );
            let lhs = fk_log_det(&a.compose(&b).unwrap()).unwrap();
            let rhs = fk_log_det(&a).unwrap() + fk_log_det(&b).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-7);
        }
    }
}
