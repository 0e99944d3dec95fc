//! Float math shims for `no_std` builds. Everything routes through `libm`.

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Rounds half away from zero, like `f64::round`.
#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// Normalized sinc: sin(pi x) / (pi x).
#[inline]
pub fn sinc(x: f64) -> f64 {
    if abs(x) < 1e-9 {
        1.0
    } else {
        let px = core::f64::consts::PI * x;
        sin(px) / px
    }
}

/// Modified Bessel function of the first kind, order zero, by power series.
/// Converges quickly for the argument range used by Kaiser windows.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        let f = half / k as f64;
        term *= f * f;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_i0_reference_values() {
        // Abramowitz & Stegun table values.
        assert!(abs(bessel_i0(0.0) - 1.0) < 1e-15);
        assert!(abs(bessel_i0(1.0) - 1.266_065_877_752_008_3) < 1e-12);
        assert!(abs(bessel_i0(5.0) - 27.239_871_823_604_45) < 1e-9);
    }

    #[test]
    fn sinc_at_zero_and_integers() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(abs(sinc(1.0)) < 1e-15);
        assert!(abs(sinc(-3.0)) < 1e-15);
    }
}
