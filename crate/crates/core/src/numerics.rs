//! Shared numerical kernels: special functions, smooth cutoffs and
//! adaptive quadrature for integrands with integrable log singularities.

use num_complex::Complex64;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// log Gamma(z) for complex z with Re z > 0 (reflection handled for Re z <= 0.5).
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let pi = std::f64::consts::PI;
        return Complex64::new(pi, 0.0).ln() - (Complex64::new(pi, 0.0) * z).sin().ln()
            - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - Complex64::new(1.0, 0.0);
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += Complex64::new(c, 0.0) / (z + Complex64::new(i as f64, 0.0));
    }
    let t = z + Complex64::new(7.5, 0.0);
    let half_log_two_pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    Complex64::new(half_log_two_pi, 0.0) + (z + Complex64::new(0.5, 0.0)) * t.ln() - t + x.ln()
}

pub fn gamma(z: Complex64) -> Complex64 {
    ln_gamma(z).exp()
}

/// Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta zeta(s, a) for a > 0 by Euler-Maclaurin: 50-term head sum
/// plus 8 correction terms. Analytic continuation is valid away from s = 1.
pub fn hurwitz_zeta(s: Complex64, a: f64) -> Complex64 {
    const HEAD: usize = 50;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..HEAD {
        sum += Complex64::new(n as f64 + a, 0.0).powc(-s);
    }
    let m = HEAD as f64 + a;
    let mc = Complex64::new(m, 0.0);
    // integral tail
    sum += mc.powc(Complex64::new(1.0, 0.0) - s) / (s - Complex64::new(1.0, 0.0));
    // half term
    sum += Complex64::new(0.5, 0.0) * mc.powc(-s);
    // Euler-Maclaurin corrections: B_{2j}/(2j)! * (s)(s+1)...(s+2j-2) * m^{-s-2j+1}
    let mut rising = s; // (s)_{1}
    let mut factorial = 1.0f64;
    for (j, &b2j) in BERNOULLI_EVEN.iter().enumerate() {
        let two_j = 2 * (j + 1);
        factorial *= (two_j - 1) as f64 * two_j as f64;
        sum += Complex64::new(b2j / factorial, 0.0)
            * rising
            * mc.powc(-s - Complex64::new((two_j - 1) as f64, 0.0));
        rising *= (s + Complex64::new((two_j - 1) as f64, 0.0))
            * (s + Complex64::new(two_j as f64, 0.0));
    }
    sum
}

/// A C-infinity monotone step: 0 for x <= 0, 1 for x >= 1.
pub fn smooth_step(x: f64) -> f64 {
    fn bump(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    let num = bump(x);
    let den = num + bump(1.0 - x);
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The spectral-shift profile of Lemma-1.4 type: a for x <= a, identity for
/// x >= b, a smooth increasing blend with g(x) <= x in between.
pub fn shift_profile(x: f64, a: f64, b: f64) -> f64 {
    a + (x - a) * smooth_step((x - a) / (b - a))
}

/// Adaptive midpoint quadrature of `f` over `[lo, hi]`, refining cells until
/// the two-subcell estimate agrees with the parent estimate or the cell is
/// narrower than `min_width`. Handles integrable log singularities.
pub fn adaptive_midpoint<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    tol: f64,
    min_width: f64,
) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        lo: f64,
        hi: f64,
        parent: f64,
        tol: f64,
        min_width: f64,
    ) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = f(0.5 * (lo + mid)) * (mid - lo);
        let right = f(0.5 * (mid + hi)) * (hi - mid);
        let refined = left + right;
        if (refined - parent).abs() <= tol || (hi - lo) <= min_width {
            refined
        } else {
            recurse(f, lo, mid, left, 0.5 * tol, min_width)
                + recurse(f, mid, hi, right, 0.5 * tol, min_width)
        }
    }
    let parent = f(0.5 * (lo + hi)) * (hi - lo);
    recurse(f, lo, hi, parent, tol, min_width)
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64, n: usize) -> Complex64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += Complex64::new(w, 0.0) * f(lo + k as f64 * h);
    }
    acc * Complex64::new(h / 3.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_matches_factorials() {
        for n in 1..8u32 {
            let g = gamma(Complex64::new(n as f64, 0.0)).re;
            let fact: f64 = (1..n).map(|k| k as f64).product();
            assert_relative_eq!(g, fact, max_relative = 1e-12);
        }
        assert_relative_eq!(
            gamma(Complex64::new(0.5, 0.0)).re,
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn hurwitz_zeta_special_values() {
        // zeta(2, 1) = pi^2/6
        let z = hurwitz_zeta(Complex64::new(2.0, 0.0), 1.0);
        assert_relative_eq!(z.re, std::f64::consts::PI.powi(2) / 6.0, max_relative = 1e-12);
        // zeta(0, a) = 1/2 - a
        for &a in &[0.25, 0.5, 0.9] {
            let z = hurwitz_zeta(Complex64::new(0.0, 0.0), a);
            assert_relative_eq!(z.re, 0.5 - a, epsilon = 1e-10);
        }
    }

    #[test]
    fn hurwitz_zeta_derivative_matches_log_gamma() {
        // zeta'(0, a) = log Gamma(a) - (1/2) log(2 pi)
        let h = 1e-4;
        for &a in &[0.3, 0.5, 0.7] {
            let d = (hurwitz_zeta(Complex64::new(h, 0.0), a)
                - hurwitz_zeta(Complex64::new(-h, 0.0), a))
                / Complex64::new(2.0 * h, 0.0);
            let expected = ln_gamma(Complex64::new(a, 0.0)).re
                - 0.5 * (2.0 * std::f64::consts::PI).ln();
            assert_relative_eq!(d.re, expected, epsilon = 1e-7);
        }
    }

    #[test]
    fn smooth_step_is_monotone_and_clamped() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        let mut prev = -1.0;
        for k in 0..=100 {
            let v = smooth_step(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn adaptive_midpoint_handles_log_singularity() {
        // int_0^1 log t dt = -1
        let v = adaptive_midpoint(&|t: f64| t.ln(), 0.0, 1.0, 1e-10, 1e-12);
        assert_relative_eq!(v, -1.0, epsilon = 1e-7);
    }
}
