use std::f64::consts::PI;

use super::config::SPEED_OF_LIGHT;

const SERIES_LIMIT: f64 = 12.0;

/// Zeroth-order Bessel function of the first kind.
///
/// Ascending power series for `|x| <= 12`, Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= -q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && (k as f64) > q.sqrt() {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    let z8 = 8.0 * x;
    let (mut p, mut q) = (1.0, 0.0);
    let mut c = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        c *= -odd * odd / (k as f64 * z8);
        if c.abs() > last {
            // terms started to grow; the series is asymptotic
            break;
        }
        last = c.abs();
        // c_k alternates sign via the factor (0 - (2j-1)^2); fold the (-1)^(k/2) pattern in
        match k % 4 {
            1 => q += c,
            2 => p -= c,
            3 => q -= c,
            _ => p += c,
        }
        if last < 1e-17 {
            break;
        }
    }
    let phase = x - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

/// Jakes-model correlation `J0(2π f_D T)` with `f_D = v f_c / c`.
pub fn doppler_correlation(velocity_mps: f64, carrier_hz: f64, slot_s: f64) -> f64 {
    let doppler = velocity_mps * carrier_hz / SPEED_OF_LIGHT;
    bessel_j0(2.0 * PI * doppler * slot_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_over_wide_range() {
        for i in 0..4000 {
            let x = i as f64 * 0.01;
            let err = (bessel_j0(x) - libm::j0(x)).abs();
            assert!(err < 1e-10, "x={x} err={err}");
        }
        for &x in &[11.999, 12.0, 12.001, 15.0, 50.0, 123.4] {
            assert!((bessel_j0(x) - libm::j0(x)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn first_zero_and_origin() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.404825557695773).abs() < 1e-8);
        assert_eq!(doppler_correlation(0.0, 5.9e9, 0.24e-3), 1.0);
    }

    #[test]
    fn default_vehicle_correlation() {
        let v = 200.0 / 3.6;
        let fd = v * 5.9e9 / SPEED_OF_LIGHT;
        assert!((fd - 1092.592592592).abs() < 1e-6);
        let rho = doppler_correlation(v, 5.9e9, 0.24e-3);
        assert!((rho - 0.428175359962208).abs() < 1e-10);
    }
}
