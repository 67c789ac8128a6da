//! Finite cochain complexes of finitely generated Hilbert modules with a
//! fixed basis, their Laplacians, Hodge projectors, reduced Betti numbers
//! and the torsion built from Fuglede-Kadison determinants.

use num_complex::Complex64;

use crate::error::{Result, TorsionError};
use crate::operator::{
    fk_log_det, hermitian_function, spectral_density, AlgebraTag, CMat, Operator, Payload,
    SIGMA_REL_TOL,
};

/// A complex 0 -> C^0 -> C^1 -> ... -> C^n -> 0. `diffs[q]` is the
/// differential C^q -> C^{q+1}; there are `dims.len() - 1` of them.
#[derive(Clone, Debug)]
pub struct HilbertComplex {
    tag: AlgebraTag,
    dims: Vec<usize>,
    diffs: Vec<Operator>,
}

/// Relative tolerance on ||d_{q+1} d_q|| for accepting a complex.
const D_SQUARED_TOL: f64 = 1e-8;

impl HilbertComplex {
    pub fn new(tag: AlgebraTag, dims: Vec<usize>, diffs: Vec<Operator>) -> Result<Self> {
        if dims.is_empty() {
            return Err(TorsionError::InvalidInput("complex with no degrees".into()));
        }
        if diffs.len() + 1 != dims.len() {
            return Err(TorsionError::DimensionMismatch(format!(
                "{} degrees need {} differentials, got {}",
                dims.len(),
                dims.len() - 1,
                diffs.len()
            )));
        }
        for (q, d) in diffs.iter().enumerate() {
            if d.algebra() != tag {
                return Err(TorsionError::AlgebraMismatch(format!(
                    "differential at degree {q} lives in a different algebra"
                )));
            }
            if d.rows() != dims[q + 1] || d.cols() != dims[q] {
                return Err(TorsionError::DimensionMismatch(format!(
                    "differential at degree {q} is {}x{}, expected {}x{}",
                    d.rows(),
                    d.cols(),
                    dims[q + 1],
                    dims[q]
                )));
            }
        }
        for q in 0..diffs.len().saturating_sub(1) {
            if dims[q] == 0 || dims[q + 2] == 0 {
                continue;
            }
            let comp = diffs[q + 1].compose(&diffs[q])?;
            let norm = comp.op_norm();
            let scale = (diffs[q].op_norm() * diffs[q + 1].op_norm()).max(1.0);
            if norm > D_SQUARED_TOL * scale {
                return Err(TorsionError::NotAComplex {
                    degree: q,
                    degree_plus_two: q + 2,
                    norm,
                });
            }
        }
        Ok(HilbertComplex { tag, dims, diffs })
    }

    pub fn algebra(&self) -> AlgebraTag {
        self.tag
    }

    /// Top degree n.
    pub fn top_degree(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, q: usize) -> usize {
        self.dims.get(q).copied().unwrap_or(0)
    }

    /// Differential C^q -> C^{q+1}; zero maps outside the support.
    pub fn differential(&self, q: usize) -> Operator {
        if q < self.diffs.len() {
            self.diffs[q].clone()
        } else {
            Operator::zero(self.tag, 0, self.dim(q))
        }
    }

    pub fn differentials(&self) -> &[Operator] {
        &self.diffs
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(q, &d)| if q % 2 == 0 { d as i64 } else { -(d as i64) })
            .sum()
    }

    /// Hodge Laplacian Delta_q = d_q* d_q + d_{q-1} d_{q-1}*.
    pub fn laplacian(&self, q: usize) -> Result<Operator> {
        let k = self.dim(q);
        let mut out = Operator::zero(self.tag, k, k);
        if q < self.diffs.len() {
            let d = &self.diffs[q];
            out = out.add(&d.adjoint().compose(d)?)?;
        }
        if q >= 1 && q - 1 < self.diffs.len() {
            let d = &self.diffs[q - 1];
            out = out.add(&d.compose(&d.adjoint())?)?;
        }
        Ok(out)
    }

    /// Reduced Betti number b_q = dim_tau ker Delta_q (von Neumann
    /// dimension; fractional values can occur in the circle-fibered case).
    pub fn reduced_betti(&self, q: usize) -> Result<f64> {
        if self.dim(q) == 0 {
            return Ok(0.0);
        }
        let delta = self.laplacian(q)?;
        Ok(spectral_density(&delta, &[1.0])?.kernel_dim)
    }

    pub fn reduced_betti_all(&self) -> Result<Vec<f64>> {
        (0..=self.top_degree()).map(|q| self.reduced_betti(q)).collect()
    }

    /// Numerically acyclic: every reduced Betti number below tolerance.
    pub fn is_acyclic(&self, tol: f64) -> Result<bool> {
        Ok(self.reduced_betti_all()?.iter().all(|&b| b < tol))
    }

    /// Orthogonal Hodge projectors at degree q: onto harmonics, onto the
    /// image of d_{q-1}, and onto the image of d_q^*.
    pub fn hodge_projectors(&self, q: usize) -> Result<HodgeProjectors> {
        let k = self.dim(q);
        let range_proj = |op: Option<&Operator>| -> Result<Operator> {
            match op {
                None => Ok(Operator::zero(self.tag, k, k)),
                Some(op) => {
                    let gram = op.compose(&op.adjoint())?;
                    let norm2 = gram.op_norm().max(1.0);
                    let project = move |m: &CMat| {
                        hermitian_function(m, |lam| {
                            if lam > SIGMA_REL_TOL * norm2 { 1.0 } else { 0.0 }
                        })
                    };
                    Ok(match gram.payload() {
                        Payload::Scalar(m) => Operator::scalar(project(m)),
                        _ => {
                            let n = 1024;
                            Operator::sampled(
                                (0..n)
                                    .map(|j| project(&gram.fiber_at((j as f64 + 0.5) / n as f64)))
                                    .collect(),
                            )?
                        }
                    })
                }
            }
        };
        let exact = range_proj(if q >= 1 && q - 1 < self.diffs.len() {
            Some(&self.diffs[q - 1])
        } else {
            None
        })?;
        let coexact_src = self.diffs.get(q).map(|d| d.adjoint());
        let coexact = range_proj(coexact_src.as_ref())?;
        let harmonic = Operator::identity(self.tag, k)
            .sub(&exact)?
            .sub(&coexact)?;
        Ok(HodgeProjectors {
            harmonic,
            exact,
            coexact,
        })
    }

    /// log T(C) = sum_q (-1)^q log det' |d_q|.
    ///
    /// This is the telescoped form of the alternating Laplacian determinant
    /// sum; `log_torsion_via_laplacians` evaluates that sum directly.
    pub fn log_torsion(&self) -> Result<f64> {
        let mut acc = 0.0;
        for (q, d) in self.diffs.iter().enumerate() {
            if d.rows() == 0 || d.cols() == 0 {
                continue;
            }
            let s = fk_log_det(d)?;
            acc += if q % 2 == 0 { s } else { -s };
        }
        Ok(acc)
    }

    /// log T(C) = (1/2) sum_q (-1)^{q+1} q log det' Delta_q.
    pub fn log_torsion_via_laplacians(&self) -> Result<f64> {
        let mut acc = 0.0;
        for q in 0..=self.top_degree() {
            if self.dim(q) == 0 || q == 0 {
                continue;
            }
            let delta = self.laplacian(q)?;
            if delta.op_norm() == 0.0 {
                continue;
            }
            let ld = fk_log_det(&delta)?;
            let sign = if (q + 1) % 2 == 0 { 1.0 } else { -1.0 };
            acc += 0.5 * sign * q as f64 * ld;
        }
        Ok(acc)
    }

    /// Dual complex: degree q holds (C^{n-q})^* with differential the adjoint
    /// of d_{n-q-1}.
    pub fn dual(&self) -> Result<HilbertComplex> {
        let n = self.top_degree();
        let dims: Vec<usize> = (0..=n).map(|q| self.dims[n - q]).collect();
        let diffs: Vec<Operator> = (0..n).map(|q| self.diffs[n - 1 - q].adjoint()).collect();
        HilbertComplex::new(self.tag, dims, diffs)
    }

    /// Suspension: shift all degrees up by one.
    pub fn suspension(&self) -> Result<HilbertComplex> {
        let mut dims = vec![0];
        dims.extend_from_slice(&self.dims);
        let mut diffs = vec![Operator::zero(self.tag, self.dims[0], 0)];
        diffs.extend(self.diffs.iter().cloned());
        HilbertComplex::new(self.tag, dims, diffs)
    }

    pub fn direct_sum(&self, other: &HilbertComplex) -> Result<HilbertComplex> {
        if self.tag != other.tag {
            return Err(TorsionError::AlgebraMismatch(
                "direct sum across algebras".into(),
            ));
        }
        let n = self.top_degree().max(other.top_degree());
        let dims: Vec<usize> = (0..=n).map(|q| self.dim(q) + other.dim(q)).collect();
        let diffs: Vec<Operator> = (0..n)
            .map(|q| {
                block_diag(
                    &self.diff_or_zero(q),
                    &other.diff_or_zero(q),
                )
            })
            .collect::<Result<_>>()?;
        HilbertComplex::new(self.tag, dims, diffs)
    }

    fn diff_or_zero(&self, q: usize) -> Operator {
        if q < self.diffs.len() {
            self.diffs[q].clone()
        } else {
            Operator::zero(self.tag, self.dim(q + 1), self.dim(q))
        }
    }

    /// Tensor product with the Koszul sign: degree q is the orthogonal sum of
    /// A^i (x) B^j over i + j = q and d = d_A (x) 1 + (-1)^i 1 (x) d_B.
    /// At most one factor may be circle-fibered; a scalar factor is promoted
    /// to constant fibers.
    pub fn tensor_product(&self, other: &HilbertComplex) -> Result<HilbertComplex> {
        if self.tag == AlgebraTag::CircleFibered && other.tag == AlgebraTag::CircleFibered {
            return Err(TorsionError::AlgebraMismatch(
                "tensor of two circle-fibered complexes is not supported".into(),
            ));
        }
        let tag = if self.tag == AlgebraTag::CircleFibered || other.tag == AlgebraTag::CircleFibered
        {
            AlgebraTag::CircleFibered
        } else {
            AlgebraTag::Scalar
        };
        let (na, nb) = (self.top_degree(), other.top_degree());
        let n = na + nb;
        let summand_dims = |q: usize| -> Vec<(usize, usize, usize)> {
            // (i, j, dim of A^i (x) B^j), i + j = q, in increasing i
            (0..=q)
                .filter(|&i| i <= na && q - i <= nb)
                .map(|i| (i, q - i, self.dim(i) * other.dim(q - i)))
                .collect()
        };
        let dims: Vec<usize> = (0..=n)
            .map(|q| summand_dims(q).iter().map(|s| s.2).sum())
            .collect();
        let mut diffs = Vec::new();
        for q in 0..n {
            let src = summand_dims(q);
            let dst = summand_dims(q + 1);
            let rows: usize = dst.iter().map(|s| s.2).sum();
            let cols: usize = src.iter().map(|s| s.2).sum();
            let mut blocks: Vec<Vec<Option<Operator>>> =
                vec![vec![None; src.len()]; dst.len()];
            for (ci, &(i, j, _)) in src.iter().enumerate() {
                // d_A (x) 1_B : (i, j) -> (i + 1, j)
                if i < na {
                    if let Some(ri) = dst.iter().position(|&(a, b, _)| (a, b) == (i + 1, j)) {
                        blocks[ri][ci] = Some(tensor_op(
                            &self.diffs[i],
                            &Operator::identity(other.tag, other.dim(j)),
                            tag,
                        )?);
                    }
                }
                // (-1)^i 1_A (x) d_B : (i, j) -> (i, j + 1)
                if j < nb {
                    if let Some(ri) = dst.iter().position(|&(a, b, _)| (a, b) == (i, j + 1)) {
                        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                        blocks[ri][ci] = Some(
                            tensor_op(
                                &Operator::identity(self.tag, self.dim(i)),
                                &other.diffs[j],
                                tag,
                            )?
                            .scale(Complex64::new(sign, 0.0)),
                        );
                    }
                }
            }
            diffs.push(assemble_blocks(
                tag,
                &dst.iter().map(|s| s.2).collect::<Vec<_>>(),
                &src.iter().map(|s| s.2).collect::<Vec<_>>(),
                &blocks,
                rows,
                cols,
            )?);
        }
        HilbertComplex::new(tag, dims, diffs)
    }
}

#[derive(Clone, Debug)]
pub struct HodgeProjectors {
    pub harmonic: Operator,
    pub exact: Operator,
    pub coexact: Operator,
}

/// Block-diagonal join of two operators.
pub fn block_diag(a: &Operator, b: &Operator) -> Result<Operator> {
    let tag = if a.algebra() == b.algebra() {
        a.algebra()
    } else {
        return Err(TorsionError::AlgebraMismatch("block_diag".into()));
    };
    let blocks = vec![
        vec![Some(a.clone()), None],
        vec![None, Some(b.clone())],
    ];
    assemble_blocks(
        tag,
        &[a.rows(), b.rows()],
        &[a.cols(), b.cols()],
        &blocks,
        a.rows() + b.rows(),
        a.cols() + b.cols(),
    )
}

/// Assemble a block matrix of operators (None = zero block), fiberwise in
/// the circle case.
pub fn assemble_blocks(
    tag: AlgebraTag,
    row_dims: &[usize],
    col_dims: &[usize],
    blocks: &[Vec<Option<Operator>>],
    rows: usize,
    cols: usize,
) -> Result<Operator> {
    let place = |t: Option<f64>| -> CMat {
        let mut out = CMat::zeros(rows, cols);
        let mut r0 = 0;
        for (ri, &rd) in row_dims.iter().enumerate() {
            let mut c0 = 0;
            for (ci, &cd) in col_dims.iter().enumerate() {
                if let Some(op) = &blocks[ri][ci] {
                    let m = match t {
                        Some(t) => op.fiber_at(t),
                        None => match op.payload() {
                            Payload::Scalar(m) => m.clone(),
                            _ => unreachable!("scalar assembly of fibered block"),
                        },
                    };
                    out.view_mut((r0, c0), (rd, cd)).copy_from(&m);
                }
                c0 += cd;
            }
            r0 += rd;
        }
        out
    };
    match tag {
        AlgebraTag::Scalar => Ok(Operator::scalar(place(None))),
        AlgebraTag::CircleFibered => {
            let n = blocks
                .iter()
                .flatten()
                .flatten()
                .map(sample_hint)
                .max()
                .unwrap_or(2)
                .max(2);
            Operator::sampled((0..n).map(|j| place(Some((j as f64 + 0.5) / n as f64))).collect())
        }
    }
}

fn sample_hint(op: &Operator) -> usize {
    match op.payload() {
        Payload::Scalar(_) => 1,
        Payload::TrigPoly(_) => crate::operator::DEFAULT_FIBERS,
        Payload::Sampled(fibers) => fibers.len(),
    }
}

/// Kronecker product of operators; a scalar factor is promoted to constant
/// fibers when the result is circle-fibered.
pub fn tensor_op(a: &Operator, b: &Operator, tag: AlgebraTag) -> Result<Operator> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows == 0 || cols == 0 {
        return Ok(Operator::zero(tag, rows, cols));
    }
    match tag {
        AlgebraTag::Scalar => {
            let (ma, mb) = match (a.payload(), b.payload()) {
                (Payload::Scalar(ma), Payload::Scalar(mb)) => (ma, mb),
                _ => {
                    return Err(TorsionError::AlgebraMismatch(
                        "scalar tensor of fibered operators".into(),
                    ))
                }
            };
            Ok(Operator::scalar(ma.kronecker(mb)))
        }
        AlgebraTag::CircleFibered => {
            let n = sample_hint(a).max(sample_hint(b)).max(2);
            Operator::sampled(
                (0..n)
                    .map(|j| {
                        let t = (j as f64 + 0.5) / n as f64;
                        a.fiber_at(t).kronecker(&b.fiber_at(t))
                    })
                    .collect(),
            )
        }
    }
}
