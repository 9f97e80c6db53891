//! Complex Γ, ζ and the completed zeta ξ(s) = π^{-s/2} Γ(s/2) ζ(s), to about 1e-13.

use num::complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (z * PI).sin();
        return Complex64::new(PI, 0.0) / (s * gamma(Complex64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    x * (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp()
}

/// Borwein's alternating-series acceleration for η, valid for Re s > 0.
fn eta(s: Complex64) -> Complex64 {
    const N: usize = 60;
    let mut d = [0.0f64; N + 1];
    // d_k up to the common factor (N−1)!/N!, which cancels below
    let mut term = 1.0;
    let mut acc = 0.0;
    for (i, di) in d.iter_mut().enumerate() {
        if i > 0 {
            term *= 4.0 * ((N + i - 1) as f64) * ((N - i + 1) as f64) / (((2 * i) * (2 * i - 1)) as f64);
        }
        acc += term;
        *di = acc;
    }
    let dn = d[N];
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..N {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let pw = Complex64::new((k + 1) as f64, 0.0).powc(-s);
        sum += pw * (sign * (d[k] - dn));
    }
    -sum / dn
}

/// Riemann ζ(s) for Re s ≥ 1/2, s ≠ 1.
pub fn zeta_half_plane(s: Complex64) -> Complex64 {
    eta(s) / (Complex64::new(1.0, 0.0) - Complex64::new(2.0, 0.0).powc(Complex64::new(1.0, 0.0) - s))
}

/// Completed Riemann zeta, entire apart from simple poles at 0 and 1.
pub fn xi(s: Complex64) -> Complex64 {
    if s.re < 0.5 {
        return xi(Complex64::new(1.0, 0.0) - s);
    }
    Complex64::new(PI, 0.0).powc(-s / 2.0) * gamma(s / 2.0) * zeta_half_plane(s)
}

/// ζ_q(s) = (1 − q^{−s})^{−1}.
pub fn zeta_q(q: f64, s: Complex64) -> Complex64 {
    Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - Complex64::new(q, 0.0).powc(-s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(c(5.0)).re - 24.0).abs() < 1e-11);
        assert!((gamma(c(0.5)).re - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(c(-0.5)).re + 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta_half_plane(c(2.0)).re - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta_half_plane(c(4.0)).re - PI.powi(4) / 90.0).abs() < 1e-13);
        assert!((zeta_half_plane(c(0.5)).re + 1.460_354_508_809_586_8).abs() < 1e-12);
        // first nontrivial zero
        let z = zeta_half_plane(Complex64::new(0.5, 14.134_725_141_734_694));
        assert!(z.norm() < 1e-9);
    }

    #[test]
    fn xi_values() {
        assert!((xi(c(2.0)).re - PI / 6.0).abs() < 1e-10);
        assert!((xi(c(-1.0)) - xi(c(2.0))).norm() < 1e-13);
        let s = 1.0 + 1e-6;
        assert!(((s - 1.0) * xi(c(s)).re - 1.0).abs() < 1e-5);
        assert!((zeta_q(2.0, c(1.0)).re - 2.0).abs() < 1e-15);
    }
}
