//! Seeded self-verification suite: every structural identity the library
//! claims, exercised on randomized corpora. Each check reports the worst
//! residual observed, the tolerance it is held to, and the independent
//! oracle the result is compared against.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::circle::{
    relative_torsion_circle_unitary, theorem01_rhs_circle, witten_spectrum_circle,
    AdmissibleStructure, CircleBundleSpec,
};
use crate::complex::HilbertComplex;
use crate::cone::{
    check_composition, check_cone_volume_formula, check_extension_additivity,
    check_long_sequence, ComplexMorphism,
};
use crate::error::Result;
use crate::gen;
use crate::morse::{
    common_subdivision, hermitian_anomaly_check, omega, subdivision_check, HermitianStructure,
    MorseDatum, Representation,
};
use crate::operator::{
    determinant_class_check, default_epsilon_sequence, fk_log_det, spectral_density, AlgebraTag,
    CMat, DetClass, Operator,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeProfile {
    Smoke,
    Desk,
    Deep,
}

impl SizeProfile {
    pub fn from_name(name: &str) -> Option<SizeProfile> {
        match name {
            "smoke" => Some(SizeProfile::Smoke),
            "desk" => Some(SizeProfile::Desk),
            "deep" => Some(SizeProfile::Deep),
            _ => None,
        }
    }

    /// Largest fiber dimension of randomly generated modules.
    pub fn max_dim(&self) -> usize {
        match self {
            SizeProfile::Smoke => 3,
            SizeProfile::Desk => 6,
            SizeProfile::Deep => 10,
        }
    }

    /// Fiber sampling resolution on the circle.
    pub fn fibers(&self) -> usize {
        match self {
            SizeProfile::Smoke => 1 << 10,
            SizeProfile::Desk => 1 << 12,
            SizeProfile::Deep => 1 << 14,
        }
    }

    /// Number of random instances per corpus check.
    pub fn instances(&self) -> usize {
        match self {
            SizeProfile::Smoke => 5,
            SizeProfile::Desk => 12,
            SizeProfile::Deep => 25,
        }
    }

    fn witten_grid(&self) -> usize {
        match self {
            SizeProfile::Smoke => 512,
            SizeProfile::Desk => 1024,
            SizeProfile::Deep => 2048,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// worst residual observed across the corpus
    pub residual: f64,
    pub tolerance: f64,
    /// independent quantity the result is compared against
    pub oracle: String,
    pub pass: bool,
}

fn finish(name: &str, oracle: &str, tolerance: f64, outcome: Result<f64>) -> CheckResult {
    match outcome {
        Ok(residual) => CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            oracle: oracle.to_string(),
            pass: residual.is_finite() && residual < tolerance,
        },
        Err(e) => CheckResult {
            name: name.to_string(),
            residual: f64::NAN,
            tolerance,
            oracle: format!("{oracle} (failed: {e})"),
            pass: false,
        },
    }
}

/// Random dimension vector of an acyclic complex: ranks r_q of the
/// differentials are drawn first and dims[q] = r_q + r_{q+1}, which keeps
/// every module dimension within the profile bound.
fn random_dims(rng: &mut gen::ChaCha8Rng, profile: SizeProfile) -> Vec<usize> {
    let len = rng.random_range(3..=5);
    let max_rank = (profile.max_dim() / 2).max(1);
    let ranks: Vec<usize> = (0..len - 1)
        .map(|_| rng.random_range(1..=max_rank))
        .collect();
    (0..len)
        .map(|q| {
            let below = if q > 0 { ranks[q - 1] } else { 0 };
            let above = if q < len - 1 { ranks[q] } else { 0 };
            below + above
        })
        .collect()
}

fn self_iso(complex: &HilbertComplex, seed: u64) -> Result<ComplexMorphism> {
    let comps = gen::random_self_chain_map(complex, 2.0, seed);
    ComplexMorphism::new(complex.clone(), complex.clone(), comps)
}

// --- individual checks -------------------------------------------------

fn check_cone_identity(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let tag = if k % 3 == 2 {
            AlgebraTag::CircleFibered
        } else {
            AlgebraTag::Scalar
        };
        let dims = random_dims(&mut rng, profile);
        let built = gen::random_acyclic_complex(tag, &dims, seed ^ (k as u64) << 8);
        let rel = ComplexMorphism::identity(&built.complex).relative_torsion()?;
        worst = worst.max(rel.abs());
    }
    Ok(worst)
}

fn check_suspension(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let dims = random_dims(&mut rng, profile);
        let built = gen::random_acyclic_complex(AlgebraTag::Scalar, &dims, seed ^ (k as u64) << 9);
        let t = built.complex.log_torsion()?;
        let ts = built.complex.suspension()?.log_torsion()?;
        worst = worst.max((ts + t).abs());
    }
    Ok(worst)
}

fn check_cone_volume(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let dims = random_dims(&mut rng, profile);
        let built = gen::random_acyclic_complex(AlgebraTag::Scalar, &dims, seed ^ (k as u64) << 10);
        let f = self_iso(&built.complex, seed ^ 0xc0 ^ (k as u64))?;
        worst = worst.max(check_cone_volume_formula(&f)?.residual);
    }
    Ok(worst)
}

fn check_extension(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let inner =
            gen::random_acyclic_complex(AlgebraTag::Scalar, &random_dims(&mut rng, profile), seed ^ 0xe1 ^ (k as u64) << 4);
        let outer =
            gen::random_acyclic_complex(AlgebraTag::Scalar, &random_dims(&mut rng, profile), seed ^ 0xe2 ^ (k as u64) << 4);
        let coupling = gen::random_coupling(&inner.complex, &outer.complex, seed ^ 0xe3 ^ (k as u64));
        let report = check_extension_additivity(&inner.complex, &outer.complex, &coupling)?;
        worst = worst.max(report.residual);
        for d in report.deformation_residuals {
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

fn check_composition_additivity(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let dims = random_dims(&mut rng, profile);
        let built = gen::random_acyclic_complex(AlgebraTag::Scalar, &dims, seed ^ 0xf1 ^ (k as u64) << 5);
        let f = self_iso(&built.complex, seed ^ 0xf2 ^ (k as u64))?;
        let g = self_iso(&built.complex, seed ^ 0xf3 ^ (k as u64))?;
        worst = worst.max(check_composition(&f, &g)?.residual);
    }
    Ok(worst)
}

fn check_milnor(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let sub = gen::random_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            &[],
            seed ^ 0xa1 ^ (k as u64) << 6,
        );
        let quot = gen::random_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            &[],
            seed ^ 0xa2 ^ (k as u64) << 6,
        );
        let (j, p) = direct_sum_sequence(&sub.complex, &quot.complex)?;
        worst = worst.max(check_long_sequence(&j, &p)?.residual);
    }
    Ok(worst)
}

/// Inclusion and projection of the direct sum B = A (+) C.
fn direct_sum_sequence(
    a: &HilbertComplex,
    c: &HilbertComplex,
) -> Result<(ComplexMorphism, ComplexMorphism)> {
    let b = a.direct_sum(c)?;
    let n = b.top_degree();
    let j = ComplexMorphism::new(
        a.clone(),
        b.clone(),
        (0..=n)
            .map(|i| {
                let mut m = CMat::zeros(b.dim(i), a.dim(i));
                m.view_mut((0, 0), (a.dim(i), a.dim(i)))
                    .copy_from(&CMat::identity(a.dim(i), a.dim(i)));
                Operator::scalar(m)
            })
            .collect(),
    )?;
    let p = ComplexMorphism::new(
        b.clone(),
        c.clone(),
        (0..=n)
            .map(|i| {
                let mut m = CMat::zeros(c.dim(i), b.dim(i));
                m.view_mut((0, a.dim(i)), (c.dim(i), c.dim(i)))
                    .copy_from(&CMat::identity(c.dim(i), c.dim(i)));
                Operator::scalar(m)
            })
            .collect(),
    )?;
    Ok((j, p))
}

fn check_duality(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let dims = random_dims(&mut rng, profile);
        let built = gen::random_acyclic_complex(AlgebraTag::Scalar, &dims, seed ^ 0xb1 ^ (k as u64) << 7);
        let n = dims.len() - 1;
        let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let t = built.complex.log_torsion()?;
        let td = built.complex.dual()?.log_torsion()?;
        worst = worst.max((td - sign * t).abs());
    }
    Ok(worst)
}

fn check_direct_sum(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let a = gen::random_acyclic_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            seed ^ 0xd1 ^ (k as u64) << 3,
        );
        let b = gen::random_acyclic_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            seed ^ 0xd2 ^ (k as u64) << 3,
        );
        let sum = a.complex.direct_sum(&b.complex)?.log_torsion()?;
        worst = worst
            .max((sum - a.complex.log_torsion()? - b.complex.log_torsion()?).abs());
    }
    Ok(worst)
}

fn check_tensor(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..profile.instances() {
        let a = gen::random_acyclic_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            seed ^ 0xc1 ^ (k as u64) << 2,
        );
        let b = gen::random_acyclic_complex(
            AlgebraTag::Scalar,
            &random_dims(&mut rng, profile),
            seed ^ 0xc2 ^ (k as u64) << 2,
        );
        let prod = a.complex.tensor_product(&b.complex)?;
        let expected = b.complex.euler_characteristic() as f64 * a.complex.log_torsion()?
            + a.complex.euler_characteristic() as f64 * b.complex.log_torsion()?;
        worst = worst.max((prod.log_torsion()? - expected).abs());
    }
    Ok(worst)
}

fn check_zeta_gold(_seed: u64, _profile: SizeProfile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let theta = k as f64 / 21.0;
        let expected = 4.0 * (std::f64::consts::PI * theta).sin().powi(2);
        worst = worst.max((crate::circle::zeta_det_circle(theta)? - expected).abs());
    }
    Ok(worst)
}

fn check_relative_unitary(_seed: u64, _profile: SizeProfile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for theta in [0.1, 0.25, 1.0 / 3.0, 0.41, 0.5, 0.77] {
        worst = worst.max(relative_torsion_circle_unitary(theta)?.abs());
    }
    Ok(worst)
}

fn check_det_class_certify(_seed: u64, profile: SizeProfile) -> Result<f64> {
    let alpha = Operator::multiplication(
        |t| Complex64::new((2.0 * std::f64::consts::PI * t).cos() - 1.0, (2.0 * std::f64::consts::PI * t).sin()),
        profile.fibers().max(4096),
    );
    let verdict = determinant_class_check(&alpha, &default_epsilon_sequence());
    if verdict.verdict != DetClass::DeterminantClass {
        return Ok(f64::INFINITY);
    }
    // Jensen: the regular-representation symbol has log-determinant zero
    fk_log_det(&alpha).map(f64::abs)
}

fn check_det_class_refute(_seed: u64, profile: SizeProfile) -> Result<f64> {
    let flat = Operator::multiplication(
        |x| Complex64::new((-1.0 / (x * x)).exp(), 0.0),
        profile.fibers().max(8192),
    );
    let verdict = determinant_class_check(&flat, &default_epsilon_sequence());
    Ok(if verdict.verdict == DetClass::Divergent {
        0.0
    } else {
        1.0
    })
}

fn check_density_profile(_seed: u64, profile: SizeProfile) -> Result<f64> {
    let flat = Operator::multiplication(
        |x| Complex64::new((-1.0 / (x * x)).exp(), 0.0),
        profile.fibers().max(8192),
    );
    let grid = [1e-6, 1e-4, 1e-2, 0.1, (-1.0f64).exp()];
    let density = spectral_density(&flat, &grid)?;
    let mut worst: f64 = 0.0;
    for (lam, v) in grid.iter().zip(&density.values) {
        let expected = (-(lam.ln())).powf(-0.5);
        worst = worst.max((v - expected).abs() / expected);
    }
    Ok(worst)
}

fn check_euler_invariant(_seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let cases: Vec<Operator> = vec![
        Operator::scalar(CMat::from_element(1, 1, Complex64::new(2.0, 0.0))),
        Operator::scalar(CMat::from_element(1, 1, Complex64::new(0.5, 0.0))),
        Operator::scalar(CMat::from_element(
            1,
            1,
            Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
        )),
        Operator::trig_poly(
            1,
            1,
            vec![
                (0, CMat::from_element(1, 1, Complex64::new(2.0, 0.0))),
                (1, CMat::from_element(1, 1, Complex64::new(1.0, 0.0))),
            ],
        )?,
    ];
    for a in cases {
        let a = match a.algebra() {
            AlgebraTag::CircleFibered => a.resample(profile.fibers())?,
            AlgebraTag::Scalar => a,
        };
        let expected = -0.5 * fk_log_det(&a)?;
        let spec = CircleBundleSpec::new(a)?;
        let rhs = theorem01_rhs_circle(&spec, &AdmissibleStructure::default())?;
        worst = worst.max((rhs.value - expected).abs());
    }
    Ok(worst)
}

/// Random smooth positive scalar Hermitian structure compatible with a
/// holonomy of modulus |a|.
fn random_scalar_mu(a: Complex64, rng: &mut gen::ChaCha8Rng) -> Result<HermitianStructure> {
    let c1: f64 = rng.random_range(-0.5..0.5);
    let c2: f64 = rng.random_range(-0.5..0.5);
    let c3: f64 = rng.random_range(-0.5..0.5);
    let base = a.norm_sqr();
    let tau = std::f64::consts::TAU;
    HermitianStructure::from_fn(
        |t| {
            let f = c1 * (tau * t).sin() + c2 * (tau * t).cos() + c3 * (2.0 * tau * t).sin();
            CMat::from_element(1, 1, Complex64::new(base.powf(t) * f.exp(), 0.0))
        },
        256,
        CMat::from_element(1, 1, Complex64::new(1.0, 0.0) / a),
    )
}

fn random_circle_datum(rng: &mut gen::ChaCha8Rng) -> Result<MorseDatum> {
    let pairs = rng.random_range(1..=3usize);
    let mut cuts: Vec<f64> = (0..2 * pairs).map(|_| rng.random_range(0.01..0.99)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // reject near-coincident points by nudging
    for i in 1..cuts.len() {
        if cuts[i] - cuts[i - 1] < 0.02 {
            cuts[i] = (cuts[i - 1] + 0.02).min(0.999);
        }
    }
    let mins: Vec<f64> = cuts.iter().step_by(2).copied().collect();
    let maxs: Vec<f64> = cuts.iter().skip(1).step_by(2).copied().collect();
    MorseDatum::circle(&mins, &maxs)
}

fn check_hermitian_anomaly(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed ^ 0x5151);
    let mut worst: f64 = 0.0;
    for _ in 0..profile.instances() {
        let a = Complex64::new(rng.random_range(1.5..4.0), rng.random_range(-0.5..0.5));
        let rho = Representation::scalar_holonomy(a);
        let datum = random_circle_datum(&mut rng)?;
        let mu1 = random_scalar_mu(a, &mut rng)?;
        let mu2 = random_scalar_mu(a, &mut rng)?;
        let report = hermitian_anomaly_check(&datum, &rho, &mu1, &mu2)?;
        worst = worst.max(report.residual);
    }
    Ok(worst)
}

fn check_subdivision(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed ^ 0x5252);
    let mut worst: f64 = 0.0;
    for _ in 0..profile.instances().min(8) {
        let a = Complex64::new(rng.random_range(1.5..4.0), 0.0);
        let rho = Representation::scalar_holonomy(a);
        let mu = random_scalar_mu(a, &mut rng)?;
        let tau1 = random_circle_datum(&mut rng)?;
        let tau2 = random_circle_datum(&mut rng)?;
        let report = subdivision_check(&tau1, &tau2, &rho, &mu)?;
        worst = worst.max(report.residual).max(report.cone_residual);
    }
    Ok(worst)
}

fn check_omega_cocycle(seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut rng = gen::rng(seed ^ 0x5353);
    let mut worst: f64 = 0.0;
    for _ in 0..profile.instances().min(6) {
        let a = Complex64::new(rng.random_range(1.5..4.0), 0.0);
        let rho = Representation::scalar_holonomy(a);
        let mu = random_scalar_mu(a, &mut rng)?;
        let t1 = random_circle_datum(&mut rng)?;
        let t2 = random_circle_datum(&mut rng)?;
        let t3 = random_circle_datum(&mut rng)?;
        let t0 = common_subdivision(&common_subdivision(&t1, &t2)?, &t3)?;
        let cocycle = omega(&t1, &t2, &t0, &rho, &mu)?
            + omega(&t2, &t3, &t0, &rho, &mu)?
            + omega(&t3, &t1, &t0, &rho, &mu)?;
        worst = worst.max(cocycle.abs());
    }
    Ok(worst)
}

fn check_scaling_coefficients(_seed: u64, _profile: SizeProfile) -> Result<f64> {
    let datum = MorseDatum::circle_standard(0.25, 0.75);
    let rho = Representation::scalar_holonomy(Complex64::new(3.0, 0.0));
    let report = crate::asymptotics::check_prop_3_1(&datum, &rho)?;
    Ok(report.linear_residual.max(report.log_residual))
}

fn check_scaling_routes(_seed: u64, _profile: SizeProfile) -> Result<f64> {
    let datum = MorseDatum::circle_standard(0.25, 0.75);
    let rho = Representation::scalar_holonomy(Complex64::new(3.0, 0.0));
    let report = crate::asymptotics::check_prop_3_1(&datum, &rho)?;
    Ok(report
        .max_route_residual
        .max(report.affine_fit_residual)
        .max(report.t_log_t_coefficient.abs()))
}

fn check_witten(_seed: u64, profile: SizeProfile) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in [25.0, 40.0, 60.0] {
        let report = witten_spectrum_circle(t, profile.witten_grid())?;
        // one minimum of the Morse function: exactly one low eigenvalue
        worst = worst.max((report.count_small as f64 - 1.0).abs());
        if report.gap_ratio < 1.5 {
            worst = worst.max(1.0);
        }
    }
    Ok(worst)
}

/// Run every check with the given seed and size profile.
pub fn run_all(seed: u64, profile: SizeProfile) -> Vec<CheckResult> {
    type Check = (&'static str, &'static str, f64, fn(u64, SizeProfile) -> Result<f64>);
    let checks: Vec<Check> = vec![
        (
            "cone_of_identity_vanishes",
            "zero",
            1e-9,
            check_cone_identity,
        ),
        (
            "suspension_negates_torsion",
            "sign flip of log-torsion",
            1e-9,
            check_suspension,
        ),
        (
            "cone_volume_formula",
            "alternating sum of component log-volumes",
            1e-8,
            check_cone_volume,
        ),
        (
            "extension_additivity",
            "sum of factor torsions, invariant along coupling deformation",
            1e-8,
            check_extension,
        ),
        (
            "composition_additivity",
            "sum of relative torsions",
            1e-8,
            check_composition_additivity,
        ),
        (
            "long_exact_sequence",
            "sub + quotient torsion corrected by the cohomology sequence",
            1e-7,
            check_milnor,
        ),
        (
            "duality_sign",
            "(-1)^{n+1} log-torsion of the original",
            1e-8,
            check_duality,
        ),
        (
            "direct_sum_additivity",
            "sum of summand torsions",
            1e-9,
            check_direct_sum,
        ),
        (
            "tensor_euler_weighting",
            "Euler-characteristic-weighted sum of factor torsions",
            1e-8,
            check_tensor,
        ),
        (
            "zeta_determinant_gold_values",
            "4 sin^2(pi theta)",
            1e-6,
            check_zeta_gold,
        ),
        (
            "relative_torsion_unitary_vanishes",
            "zero",
            1e-6,
            check_relative_unitary,
        ),
        (
            "det_class_certify_regular_symbol",
            "Jensen formula (log-determinant 0)",
            1e-4,
            check_det_class_certify,
        ),
        (
            "det_class_refute_flat_symbol",
            "divergent partial log integrals",
            0.5,
            check_det_class_refute,
        ),
        (
            "spectral_density_flat_profile",
            "(-log lambda)^{-1/2}",
            0.02,
            check_density_profile,
        ),
        (
            "euler_invariant_closed_form",
            "-(1/2) log-determinant of the holonomy",
            1e-4,
            check_euler_invariant,
        ),
        (
            "hermitian_anomaly",
            "alternating sum of V volumes at critical points",
            1e-8,
            check_hermitian_anomaly,
        ),
        (
            "subdivision_anomaly",
            "expansion-volume cocycle, and mapping-cone route",
            1e-8,
            check_subdivision,
        ),
        (
            "omega_cocycle",
            "zero",
            1e-10,
            check_omega_cocycle,
        ),
        (
            "scaling_expansion_coefficients",
            "predicted linear and log(pi/t) coefficients",
            1e-6,
            check_scaling_coefficients,
        ),
        (
            "scaling_route_agreement",
            "direct alternating-volume evaluation; no t log t term",
            1e-8,
            check_scaling_routes,
        ),
        (
            "witten_low_spectrum",
            "one low eigenvalue per critical point of index 0",
            0.5,
            check_witten,
        ),
    ];
    checks
        .into_iter()
        .map(|(name, oracle, tol, f)| finish(name, oracle, tol, f(seed, profile)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_suite_passes() {
        let results = run_all(424242, SizeProfile::Smoke);
        for r in &results {
            assert!(
                r.pass,
                "{} failed: residual {} vs tol {} ({})",
                r.name, r.residual, r.tolerance, r.oracle
            );
        }
        assert_eq!(results.len(), 21);
    }

    #[test]
    fn suite_is_deterministic() {
        let a = run_all(7, SizeProfile::Smoke);
        let b = run_all(7, SizeProfile::Smoke);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.residual.to_bits(), y.residual.to_bits(), "{}", x.name);
        }
    }
}
