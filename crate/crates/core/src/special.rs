//! Gamma and Beta functions.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln |Γ(x)|` via the Lanczos approximation, with reflection for `x < 1/2`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let s = (PI * x).sin().abs();
        return PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// `B(a, b)` for `a, b > 0`.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn integers_are_factorials() {
        let mut f = 1.0;
        for n in 1..20 {
            assert!(rel(gamma(n as f64), f) < 1e-13, "n={n}");
            f *= n as f64;
        }
    }

    #[test]
    fn half_integers() {
        // Γ(n + 1/2) = (2n)! √π / (4^n n!)
        let sp = PI.sqrt();
        let exact = [sp, sp / 2.0, 3.0 * sp / 4.0, 15.0 * sp / 8.0, 105.0 * sp / 16.0];
        for (n, e) in exact.iter().enumerate() {
            assert!(rel(gamma(n as f64 + 0.5), *e) < 1e-13);
        }
        assert!(rel(gamma(-0.5), -2.0 * sp) < 1e-13);
    }

    #[test]
    fn beta_closed_forms() {
        assert!(rel(beta(0.5, 0.5), PI) < 1e-13);
        assert!(rel(beta(1.5, 0.5), PI / 2.0) < 1e-13);
        assert!(rel(beta(2.0, 3.0), 1.0 / 12.0) < 1e-13);
        assert!(rel(beta(1.0, 0.25), 4.0) < 1e-13);
    }
}
