//! Analytic side on the circle: zeta-regularized determinant of the twisted
//! Laplacian, the Witten-deformed spectrum split, and the Euler-structure
//! invariant evaluated from its boundary/holonomy data.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TorsionError};
use crate::morse::{ln_det_pd, HermitianStructure};
use crate::numerics::{hurwitz_zeta, smooth_step};
use crate::operator::{fk_log_det, Operator};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// zeta(s) of the Laplacian on S^1 twisted by the unitary e^{2 pi i theta}:
/// eigenvalues (2 pi (n + theta))^2, n in Z.
fn twisted_zeta(s: f64, theta: f64) -> f64 {
    let s = Complex64::new(s, 0.0);
    let sum = hurwitz_zeta(s * 2.0, theta) + hurwitz_zeta(s * 2.0, 1.0 - theta);
    ((TWO_PI).powf(-2.0 * s.re) * sum).re
}

/// Zeta-regularized det of the twisted 0-form Laplacian: exp(-zeta'(0)).
pub fn zeta_det_circle(theta: f64) -> Result<f64> {
    let frac = theta.rem_euclid(1.0);
    if frac.min(1.0 - frac) < 1e-9 {
        return Err(TorsionError::IntegralTwist(theta));
    }
    let theta = frac;
    // central differences of step 1e-4 on the continued series
    let h = 1e-4;
    let dz = (twisted_zeta(h, theta) - twisted_zeta(-h, theta)) / (2.0 * h);
    Ok((-dz).exp())
}

/// (1/2) log det Delta_1 - (1/2) log det delta* delta for the unitary twist
/// e^{2 pi i theta}; vanishes because the analytic and combinatorial
/// determinants agree on the circle.
pub fn relative_torsion_circle_unitary(theta: f64) -> Result<f64> {
    let analytic = 0.5 * zeta_det_circle(theta)?.ln();
    let delta = Operator::scalar(DMatrix::from_element(
        1,
        1,
        Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, TWO_PI * theta),
    ));
    let combinatorial = fk_log_det(&delta)?;
    Ok(analytic - combinatorial)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct WittenReport {
    pub eigenvalues: Vec<f64>,
    /// number of eigenvalues in [0, 1] (the small part of the spectrum)
    pub count_small: usize,
    /// smallest eigenvalue above the small part, divided by t
    pub gap_ratio: f64,
}

/// Spectrum of the Witten-deformed 0-form Laplacian
/// -d^2/ds^2 + t^2 (h')^2 - t h'' with h(s) = (cos 2 pi s + 1)/2,
/// discretized by trigonometric collocation at n nodes.
pub fn witten_spectrum_circle(t: f64, n: usize) -> Result<WittenReport> {
    if t < 0.0 {
        return Err(TorsionError::NonPositiveTime(t));
    }
    if n < 256 || n % 2 != 0 {
        return Err(TorsionError::InsufficientResolution(
            "need an even collocation grid of at least 256 nodes".into(),
        ));
    }
    // periodic second-derivative matrix for period 1 (period-2pi stencil
    // scaled by (2 pi)^2)
    let scale = TWO_PI * TWO_PI;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let d2 = if j == k {
                -(n as f64) * (n as f64) / 12.0 - 1.0 / 6.0
            } else {
                let diff = j as isize - k as isize;
                let sgn = if diff % 2 == 0 { 1.0 } else { -1.0 };
                let s = ((diff as f64) * std::f64::consts::PI / n as f64).sin();
                -sgn / (2.0 * s * s)
            };
            m[(j, k)] = -scale * d2;
        }
    }
    for j in 0..n {
        let s = j as f64 / n as f64;
        // h' = -pi sin 2 pi s, h'' = -2 pi^2 cos 2 pi s
        let hp = -std::f64::consts::PI * (TWO_PI * s).sin();
        let hpp = -2.0 * std::f64::consts::PI * std::f64::consts::PI * (TWO_PI * s).cos();
        m[(j, j)] += t * t * hp * hp - t * hpp;
    }
    let mut eigenvalues: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count_small = eigenvalues.iter().filter(|&&ev| ev <= 1.0).count();
    let first_large = eigenvalues
        .iter()
        .copied()
        .find(|&ev| ev > 1.0)
        .ok_or_else(|| TorsionError::InsufficientResolution("no large part resolved".into()))?;
    if t > 0.0 && first_large < 1.5 {
        return Err(TorsionError::InsufficientResolution(
            "spectral gap not resolved".into(),
        ));
    }
    Ok(WittenReport {
        eigenvalues,
        count_small,
        gap_ratio: if t > 0.0 { first_large / t } else { first_large },
    })
}

/// Admissible reference structure mu0(t) = (A* A)^{eta(t)}: flat (identity)
/// on [t_min - margin, t_max + margin] and rising smoothly by one power of
/// A* A across the complementary arc, which makes the seam equivariant.
#[derive(Clone, Debug)]
pub struct AdmissibleStructure {
    pub margin: f64,
    /// shape parameter (>= 1) of the interpolation profile
    pub warp: f64,
}

impl Default for AdmissibleStructure {
    fn default() -> Self {
        AdmissibleStructure {
            margin: 0.05,
            warp: 1.0,
        }
    }
}

impl AdmissibleStructure {
    /// eta on the fundamental domain [0, 1]: 0 on the flat region around
    /// [t_min, t_max]; the rise lives on (t_max + margin, 1] and carries
    /// over the seam so that eta(0) = eta(1) - 1 continues down to 0 on
    /// [0, t_min - margin].
    fn eta(&self, t_min: f64, t_max: f64, t: f64) -> f64 {
        let lo = t_max + self.margin;
        let hi = 1.0 + t_min - self.margin;
        // unwrap to the rising arc
        let u = if t >= lo - 1e-15 { t } else { t + 1.0 };
        if u <= lo {
            return 0.0;
        }
        if u >= hi {
            return 1.0;
        }
        smooth_step((u - lo) / (hi - lo)).powf(self.warp)
    }

    fn validate(&self, t_min: f64, t_max: f64) -> Result<()> {
        let ok = self.margin > 0.0
            && self.warp >= 1.0
            && t_min - self.margin > 0.0
            && t_max + self.margin < 1.0;
        if !ok {
            return Err(TorsionError::InvalidInput(
                "reference structure not admissible for these critical points".into(),
            ));
        }
        Ok(())
    }
}

/// Flat circle bundle with Morse function h(t) = (cos 2 pi (t - t_max) + 1)/2
/// style data: holonomy A, the two critical points, and an optional
/// Hermitian structure mu for the V terms (scalar algebra only; when absent
/// mu = mu0 and the V terms vanish).
#[derive(Clone, Debug)]
pub struct CircleBundleSpec {
    pub holonomy: Operator,
    pub t_min: f64,
    pub t_max: f64,
    pub mu: Option<HermitianStructure>,
}

impl CircleBundleSpec {
    pub fn new(holonomy: Operator) -> Result<Self> {
        if !holonomy.is_square() {
            return Err(TorsionError::NotSquare { rows: holonomy.rows(), cols: holonomy.cols() });
        }
        Ok(CircleBundleSpec {
            holonomy,
            t_min: 0.25,
            t_max: 0.75,
            mu: None,
        })
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EulerInvariantResult {
    pub value: f64,
    pub theta_integral_term: f64,
    pub v_term: f64,
    /// Euler-form contribution; identically 0 in odd dimension
    pub euler_form_term: f64,
}

/// Right-hand side of the invariant on the circle:
/// integral of theta(rho, mu0) against the transgression density (+1/2 off
/// [t_min, t_max], -1/2 inside) minus the alternating sum of the V volumes
/// at the critical points. For mu = mu0 this collapses to the closed form
/// (1/2) log vol(A^{-1}).
pub fn theorem01_rhs_circle(
    spec: &CircleBundleSpec,
    mu0: &AdmissibleStructure,
) -> Result<EulerInvariantResult> {
    mu0.validate(spec.t_min, spec.t_max)?;
    // log det(A* A) through the trace of the algebra
    let log_det_sq = 2.0 * fk_log_det(&spec.holonomy)?;
    let eta = |t: f64| mu0.eta(spec.t_min, spec.t_max, t);
    let eta_prime = |t: f64| {
        let h = 1e-6;
        (eta(t + h) - eta(t - h)) / (2.0 * h)
    };
    // admissibility: theta must vanish at the critical points
    for &t in &[spec.t_min, spec.t_max] {
        if eta_prime(t).abs() * log_det_sq.abs() > 1e-8 {
            return Err(TorsionError::InvalidInput(
                "reference structure is not flat at a critical point".into(),
            ));
        }
    }
    // theta(mu0)(t) = -1/2 eta'(t) log det(A* A); quadrature against the
    // piecewise-constant density
    let n = 4096;
    let mut theta_integral_term = 0.0;
    for j in 0..n {
        let t = (j as f64 + 0.5) / n as f64;
        let density = if t > spec.t_min && t < spec.t_max {
            -0.5
        } else {
            0.5
        };
        theta_integral_term += -0.5 * eta_prime(t) * log_det_sq * density / n as f64;
    }
    // V(mu, mu0) at the critical points; mu0 is identity there
    let v_term = match &spec.mu {
        None => 0.0,
        Some(mu) => {
            let v = |t: f64| -> Result<f64> { Ok(0.5 * (0.0 - ln_det_pd(&mu.at(t))?)) };
            -(v(spec.t_min)? - v(spec.t_max)?)
        }
    };
    let euler_form_term = 0.0;
    Ok(EulerInvariantResult {
        value: theta_integral_term + v_term + euler_form_term,
        theta_integral_term,
        v_term,
        euler_form_term,
    })
}

/// Invariant of a product bundle N x S^1 with Euler characteristic chi_n on
/// the first factor: chi_n times the circle invariant. Agrees with
/// -(chi_n / 2) log det(A* A)^{1/2}.
pub fn euler_invariant_product(a: &Operator, chi_n: i64) -> Result<f64> {
    let spec = CircleBundleSpec::new(a.clone())?;
    let rhs = theorem01_rhs_circle(&spec, &AdmissibleStructure::default())?;
    Ok(chi_n as f64 * rhs.value)
}
