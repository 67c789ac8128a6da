//! Seeded random instances: complexes with prescribed dimensions, prescribed
//! harmonic content, and a construction-time torsion oracle.
//!
//! The construction splits each degree into incoming / harmonic / outgoing
//! frames, wires the outgoing frame of degree q isomorphically onto the
//! incoming frame of degree q+1, and then conjugates every degree by a random
//! unitary. Torsion is invariant under the conjugation, so the alternating
//! sum of the wiring log-volumes is an exact expected value.

use num_complex::Complex64;
use rand::prelude::*;
pub use rand_chacha::ChaCha8Rng;

use crate::complex::HilbertComplex;
use crate::operator::{singular_values, AlgebraTag, CMat, Operator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * th.cos(), r * th.sin())
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-ish random unitary via QR of a Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let qr = random_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix the phase so columns are well distributed
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// A well-conditioned random invertible matrix and its log-volume
/// (sum of log singular values).
pub fn random_invertible(n: usize, rng: &mut ChaCha8Rng) -> (CMat, f64) {
    let m = CMat::identity(n, n) * Complex64::new(2.0, 0.0) + random_matrix(n, n, rng) * Complex64::new(0.3, 0.0);
    let logvol = singular_values(&m).iter().map(|s| s.ln()).sum();
    (m, logvol)
}

#[derive(Clone, Debug)]
pub struct BuiltComplex {
    pub complex: HilbertComplex,
    pub expected_log_torsion: f64,
}

/// Random complex with degree dimensions `dims` and reduced Betti numbers
/// `harmonic` (padded with zeros). Panics if no complex with that shape
/// exists. The expected torsion is exact by construction.
pub fn random_complex(
    tag: AlgebraTag,
    dims: &[usize],
    harmonic: &[usize],
    seed: u64,
) -> BuiltComplex {
    let mut rng = rng(seed);
    let n = dims.len() - 1;
    let h = |q: usize| harmonic.get(q).copied().unwrap_or(0);
    // ranks: r[q] = rank d_q, determined by r[q] = dims[q] - h(q) - r[q-1]
    let mut ranks = vec![0usize; n + 1];
    let mut prev = 0usize;
    for q in 0..=n {
        let r = dims[q]
            .checked_sub(h(q) + prev)
            .unwrap_or_else(|| panic!("infeasible shape at degree {q}"));
        ranks[q] = r;
        prev = r;
    }
    assert_eq!(ranks[n], 0, "infeasible shape: nonzero top rank");

    let mut expected = 0.0;
    let mut wirings: Vec<CMat> = Vec::new();
    for (q, &r) in ranks.iter().enumerate().take(n) {
        let (a, logvol) = random_invertible(r, &mut rng);
        expected += if q % 2 == 0 { logvol } else { -logvol };
        wirings.push(a);
    }
    let unitaries: Vec<CMat> = dims.iter().map(|&d| random_unitary(d, &mut rng)).collect();

    // circle-fibered case: twist each wiring by a loop phase and a bounded
    // extra mode; the expected value then needs the fiber integral of the
    // wiring log-volumes, accumulated below
    let mut diffs = Vec::new();
    let mut expected_circle = 0.0;
    for q in 0..n {
        let r = ranks[q];
        // block map: kill incoming (r_{q-1}) and harmonic, send outgoing to
        // the incoming frame of degree q+1
        let base = |a: &CMat| -> CMat {
            let mut d = CMat::zeros(dims[q + 1], dims[q]);
            d.view_mut((0, dims[q] - r), (r, r)).copy_from(a);
            &unitaries[q + 1] * d * unitaries[q].adjoint()
        };
        match tag {
            AlgebraTag::Scalar => diffs.push(Operator::scalar(base(&wirings[q]))),
            AlgebraTag::CircleFibered => {
                let extra = random_matrix(r, r, &mut rng) * Complex64::new(0.15, 0.0);
                let nf = 256;
                let mut acc = 0.0;
                let fibers: Vec<CMat> = (0..nf)
                    .map(|j| {
                        let t = (j as f64 + 0.5) / nf as f64;
                        let phase =
                            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t);
                        let a = &wirings[q] + &extra * phase;
                        acc += singular_values(&a).iter().map(|s| s.ln()).sum::<f64>();
                        base(&a)
                    })
                    .collect();
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                expected_circle += sign * acc / nf as f64;
                diffs.push(Operator::sampled(fibers).unwrap());
            }
        }
    }
    let expected = match tag {
        AlgebraTag::Scalar => expected,
        AlgebraTag::CircleFibered => expected_circle,
    };
    BuiltComplex {
        complex: HilbertComplex::new(tag, dims.to_vec(), diffs).expect("built complex"),
        expected_log_torsion: expected,
    }
}

pub fn random_acyclic_complex(tag: AlgebraTag, dims: &[usize], seed: u64) -> BuiltComplex {
    random_complex(tag, dims, &[], seed)
}

/// Components of a degreewise-invertible self chain map lambda * id + d s + s d
/// with random degree-lowering s.
pub fn random_self_chain_map(
    complex: &HilbertComplex,
    lambda: f64,
    seed: u64,
) -> Vec<Operator> {
    let mut rng = rng(seed);
    let n = complex.top_degree();
    let tag = complex.algebra();
    // s_q : C^q -> C^{q-1}
    let s: Vec<Operator> = (0..=n)
        .map(|q| {
            let rows = if q >= 1 { complex.dim(q - 1) } else { 0 };
            match tag {
                AlgebraTag::Scalar => {
                    Operator::scalar(random_matrix(rows, complex.dim(q), &mut rng) * Complex64::new(0.2, 0.0))
                }
                AlgebraTag::CircleFibered => {
                    let base = random_matrix(rows, complex.dim(q), &mut rng) * Complex64::new(0.2, 0.0);
                    if rows == 0 || complex.dim(q) == 0 {
                        Operator::zero(tag, rows, complex.dim(q))
                    } else {
                        Operator::trig_poly(rows, complex.dim(q), vec![(0, base)]).unwrap()
                    }
                }
            }
        })
        .collect();
    (0..=n)
        .map(|q| {
            let mut f = Operator::identity(tag, complex.dim(q))
                .scale(Complex64::new(lambda, 0.0));
            if q >= 1 {
                f = f
                    .add(&complex.differential(q - 1).compose(&s[q]).unwrap())
                    .unwrap();
            }
            if q < n {
                f = f
                    .add(&s[q + 1].compose(&complex.differential(q)).unwrap())
                    .unwrap();
            }
            f
        })
        .collect()
}

/// Anticommuting coupling w_i : outer^i -> inner^{i+1} built from a random
/// homotopy g_i : outer^i -> inner^i as w = d_inner g - g d_outer, which
/// satisfies w_{i+1} d_outer,i + d_inner,i+1 w_i = 0 identically.
pub fn random_coupling(
    inner: &HilbertComplex,
    outer: &HilbertComplex,
    seed: u64,
) -> Vec<Operator> {
    let mut rng = rng(seed);
    let tag = inner.algebra();
    let n = inner.top_degree().max(outer.top_degree());
    let g: Vec<Operator> = (0..=n + 1)
        .map(|i| {
            let (rows, cols) = (inner.dim(i), outer.dim(i));
            let m = random_matrix(rows, cols, &mut rng) * Complex64::new(0.5, 0.0);
            match tag {
                AlgebraTag::Scalar => Operator::scalar(m),
                AlgebraTag::CircleFibered => {
                    if rows == 0 || cols == 0 {
                        Operator::zero(tag, rows, cols)
                    } else {
                        Operator::trig_poly(rows, cols, vec![(0, m)]).unwrap()
                    }
                }
            }
        })
        .collect();
    (0..=n)
        .map(|i| {
            let a = inner.differential(i).compose(&g[i]).unwrap();
            let b = g[i + 1].compose(&outer.differential(i)).unwrap();
            a.sub(&b).unwrap()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn random_unitary_is_unitary() {
        let mut r = rng(1);
        let u = random_unitary(4, &mut r);
        let gram = u.adjoint() * &u;
        assert!((gram - CMat::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn built_complex_has_requested_betti_numbers() {
        let built = random_complex(AlgebraTag::Scalar, &[3, 6, 4], &[1, 2, 2], 5);
        let b = built.complex.reduced_betti_all().unwrap();
        assert_relative_eq!(b[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-8);
        assert_relative_eq!(b[2], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn circle_fibered_oracle_matches() {
        let built = random_acyclic_complex(AlgebraTag::CircleFibered, &[2, 3, 1], 9);
        assert_relative_eq!(
            built.complex.log_torsion().unwrap(),
            built.expected_log_torsion,
            epsilon = 1e-4
        );
    }

    #[test]
    fn self_chain_map_commutes_with_differential() {
        let built = random_acyclic_complex(AlgebraTag::Scalar, &[2, 4, 2], 13);
        let f = random_self_chain_map(&built.complex, 2.0, 14);
        for q in 0..built.complex.top_degree() {
            let d = built.complex.differential(q);
            let defect = f[q + 1]
                .compose(&d)
                .unwrap()
                .sub(&d.compose(&f[q]).unwrap())
                .unwrap()
                .op_norm();
            assert!(defect < 1e-10, "degree {q}: defect {defect}");
        }
    }
}
