//! Log-gamma and digamma for positive real arguments.
//!
//! Both use upward recurrence into the asymptotic (Stirling / Bernoulli)
//! regime at `x >= 15`, where the truncated series is accurate to well under
//! one ulp for the terms kept.

use std::f64::consts::PI;

const SHIFT_TO: f64 = 15.0;

/// `ln Γ(x)` for `x > 0`. Returns NaN for non-positive or NaN input.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    // (x-1)! is exact in f64 up to 22!, so small integers are correctly rounded.
    if x.fract() == 0.0 && x <= 23.0 {
        return (2..x as u32).map(f64::from).product::<f64>().ln();
    }
    let mut z = x;
    let mut log_prod = 0.0;
    // Multiply in chunks so the running product cannot overflow.
    let mut prod = 1.0;
    while z < SHIFT_TO {
        prod *= z;
        z += 1.0;
        if prod > 1e280 {
            log_prod += prod.ln();
            prod = 1.0;
        }
    }
    log_prod += prod.ln();
    stirling(z) - log_prod
}

fn stirling(z: f64) -> f64 {
    // B_{2k} / (2k (2k-1)) for k = 1..8
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
}

/// `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_TO {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // B_{2k} / (2k) for k = 1..7
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let inv2 = 1.0 / (z * z);
    let mut series = 0.0;
    let mut pow = inv2;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    acc + z.ln() - 0.5 / z - series
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: u32) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn exact_zeros_at_one_and_two() {
        assert_eq!(ln_gamma(1.0), 0.0);
        assert_eq!(ln_gamma(2.0), 0.0);
    }

    #[test]
    fn integer_arguments_match_log_factorials() {
        assert!((ln_gamma(3.0) - 0.6931471805599453).abs() < 1e-15);
        for n in 3..200u32 {
            let expect = ln_factorial(n - 1);
            let got = ln_gamma(n as f64);
            assert!(
                ((got - expect) / expect).abs() < 1e-12,
                "n={n}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn half_integer_closed_form() {
        // Γ(3/2) = √π / 2
        let expect = (PI.sqrt() / 2.0).ln();
        assert!((ln_gamma(1.5) - expect).abs() < 1e-14);
    }

    #[test]
    fn matches_reference_implementation_on_range() {
        let mut x = 1.0;
        while x < 1e4 {
            let reference = statrs::function::gamma::ln_gamma(x);
            let got = ln_gamma(x);
            let err = if reference.abs() > 1e-3 {
                ((got - reference) / reference).abs()
            } else {
                (got - reference).abs()
            };
            assert!(err < 1e-12, "x={x}: {got} vs {reference}");
            x = x * 1.0173 + 0.011;
        }
    }

    #[test]
    fn recurrence_holds() {
        for &x in &[1.1, 1.7, 3.3, 12.5, 99.25, 4321.0] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + f64::ln(x);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn digamma_known_values() {
        const EULER: f64 = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + EULER).abs() < 1e-14);
        assert!((digamma(2.0) - (1.0 - EULER)).abs() < 1e-14);
        assert!((digamma(0.5) - (-EULER - 2.0 * 2f64.ln())).abs() < 1e-13);
    }

    #[test]
    fn digamma_is_derivative_of_ln_gamma() {
        for &x in &[1.0, 1.3, 2.0, 5.5, 17.0, 250.0] {
            let h = 1e-5 * x;
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn non_positive_is_nan() {
        assert!(ln_gamma(0.0).is_nan());
        assert!(ln_gamma(-1.5).is_nan());
        assert!(digamma(-0.0).is_nan());
    }
}
