/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`, finite for large x.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // Asymptotic series; at x >= 25 the fifth term is below 1e-13 relative.
    let z = 1.0 / (2.0 * x * x);
    let series = 1.0 - z + 3.0 * z * z - 15.0 * z.powi(3) + 105.0 * z.powi(4);
    series / (x * std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-15);
        let e1 = erfc(1.0); assert!((e1 - 0.157_299_207_050_285_13).abs() < 1e-16 * 8.0, "{e1:e}");
        assert!((erfc(-1.0) - 1.842_700_792_949_714_9).abs() < 1e-15 * 2.0);
    }

    #[test]
    fn erfcx_continuous_at_switch() {
        let lo = erfcx(25.0 - 1e-9);
        let hi = erfcx(25.0);
        assert!((lo - hi).abs() / hi < 1e-10, "{lo} {hi}");
    }
}
