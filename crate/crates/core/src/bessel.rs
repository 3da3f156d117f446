//! Integer-order Bessel functions of the first kind by Miller's backward
//! recurrence.
//!
//! The recurrence `J_{m-1} = (2m/x) J_m - J_{m+1}` is run downward from an
//! order far above both `x` and the highest order requested, where `J` is
//! negligible. The resulting sequence is proportional to `J_m(x)`; it is
//! scaled so that `J_0^2 + 2 sum_{m>=1} J_m^2 = 1` and its sign is fixed by
//! `J_0 + 2 sum_{k>=1} J_{2k} = 1`.

const RESCALE_ABOVE: f64 = 1e100;
const RESCALE_BY: f64 = 1e-100;

/// Normalized `J_0(x) ..= J_M(x)` for some starting order `M >= max_order`.
///
/// The returned vector is longer than `max_order + 1`; its tail carries the
/// (tiny) higher orders so callers can sum tails exactly.
fn backward_sequence(x: f64, max_order: usize) -> Vec<f64> {
    assert!(
        x.is_finite() && x >= 0.0,
        "Bessel argument must be finite and >= 0"
    );
    if x == 0.0 {
        let mut v = vec![0.0; max_order + 1];
        v[0] = 1.0;
        return v;
    }

    let reach = (max_order as f64).max(x.ceil());
    let start = {
        let m = reach + (160.0 * reach).sqrt() + 20.0;
        let m = m.ceil() as usize;
        m + (m & 1)
    };

    let mut j = vec![0.0f64; start + 2];
    j[start] = 1.0;
    for m in (1..=start).rev() {
        j[m - 1] = (2.0 * m as f64 / x) * j[m] - j[m + 1];
        if j[m - 1].abs() > RESCALE_ABOVE {
            for v in &mut j[m - 1..] {
                *v *= RESCALE_BY;
            }
        }
    }
    j.truncate(start + 1);

    let mut sum_sq = j[0] * j[0];
    let mut even = j[0];
    for (m, v) in j.iter().enumerate().skip(1) {
        sum_sq += 2.0 * v * v;
        if m % 2 == 0 {
            even += 2.0 * v;
        }
    }
    let scale = sum_sq.sqrt().recip().copysign(even);
    for v in &mut j {
        *v *= scale;
    }
    j
}

/// `J_m(x)` for `m = 0 ..= max_order`, `x >= 0`.
pub fn bessel_j_sequence(x: f64, max_order: usize) -> Vec<f64> {
    let mut j = backward_sequence(x, max_order);
    j.truncate(max_order + 1);
    j
}

/// `J_m(x)` for `m = 0 ..= max_order` together with the two-sided tail masses
/// `tail[b] = sum_{|m| > b} J_m(x)^2` for the same range of `b`.
pub fn bessel_j_with_tails(x: f64, max_order: usize) -> (Vec<f64>, Vec<f64>) {
    let j = backward_sequence(x, max_order);
    let mut tails = vec![0.0; j.len()];
    let mut acc = 0.0;
    for m in (0..j.len()).rev() {
        tails[m] = acc;
        acc += 2.0 * j[m] * j[m];
    }
    let mut j = j;
    j.truncate(max_order + 1);
    tails.truncate(max_order + 1);
    (j, tails)
}

/// `J_n(x)` for any integer order, using `J_{-n} = (-1)^n J_n` and
/// `J_n(-x) = (-1)^n J_n(x)`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let order = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(x.abs(), order)[order];
    let flips = (n < 0 && order % 2 == 1) as u8 + (x < 0.0 && order % 2 == 1) as u8;
    if flips % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid rule on `J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt`,
    /// spectrally accurate for periodic integrands.
    fn quadrature_j(n: i64, x: f64) -> f64 {
        let pts = 1024;
        let h = std::f64::consts::TAU / pts as f64;
        (0..pts)
            .map(|k| {
                let t = k as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / pts as f64
    }

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(0, 5.0) - -0.177_596_771_314_338_3).abs() < 1e-15);
        assert!((bessel_j(2, 10.0) - 0.254_630_313_685_120_8).abs() < 1e-14);
    }

    #[test]
    fn matches_quadrature() {
        for &x in &[0.1, 0.5, 2.0, 5.0, 10.0, 16.0, 37.5] {
            for n in -60i64..=60 {
                let a = bessel_j(n, x);
                let b = quadrature_j(n, x);
                assert!((a - b).abs() < 1e-13, "J_{n}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_j_sequence(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn huge_orders_underflow_without_overflow() {
        let j = bessel_j_sequence(0.5, 300);
        assert!(j.iter().all(|v| v.is_finite()));
        assert!(j[300].abs() < 1e-300);
        assert!((j[0] - 0.938_469_807_240_812_9).abs() < 1e-15);
    }

    #[test]
    fn tails_are_consistent() {
        let (j, tails) = bessel_j_with_tails(5.0, 40);
        let total = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>() + tails[40];
        assert!((total - 1.0).abs() < 1e-15);
        assert!(tails.windows(2).all(|w| w[0] >= w[1]));
        assert!(tails[40] < 1e-30);
    }
}
