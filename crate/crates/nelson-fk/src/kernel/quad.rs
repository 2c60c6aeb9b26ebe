//! Radial quadrature helpers and spherical Bessel functions.

use crate::error::{Error, Result};
use gauss_quad::legendre::GaussLegendre;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = std::num::NonZeroUsize::new(n.max(1)).unwrap();
    let mut v: Vec<(f64, f64)> = GaussLegendre::new(n).as_node_weight_pairs().to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    v
}

/// Fixed-order Gauss-Legendre on `[a, b]` with a precomputed rule.
pub fn gl_apply(rule: &[(f64, f64)], a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// `sin z / z`.
pub fn j0(z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0)
    } else {
        z.sin() / z
    }
}

/// `(sin z - z cos z) / z^2`.
pub fn j1(z: f64) -> f64 {
    let a = z.abs();
    if a < 0.1 {
        let z2 = z * z;
        z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0 * (1.0 - z2 / 54.0)))
    } else {
        (z.sin() - z * z.cos()) / (z * z)
    }
}

/// `j1(z) / z`, finite at the origin.
pub fn j1_over_z(z: f64) -> f64 {
    let a = z.abs();
    if a < 0.1 {
        let z2 = z * z;
        (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0 * (1.0 - z2 / 54.0))) / 3.0
    } else {
        j1(z) / z
    }
}

/// Double-exponential quadrature on a finite interval to an absolute target.
pub fn de(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, abs_tol.max(1e-300)).integral
}

/// Integral of `g` over `[a, b]` split at `breaks`, to relative accuracy `rel`.
///
/// A coarse Gauss-Legendre pass fixes the scale, then every panel is
/// integrated by the double-exponential rule.
pub fn integrate_panels(g: &impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], rel: f64) -> f64 {
    let pts = panel_points(a, b, breaks);
    let rule = gauss_legendre(24);
    let scale: f64 = pts.windows(2).map(|w| gl_apply(&rule, w[0], w[1], |x| g(x).abs())).sum();
    let tol = rel * scale.max(1e-300) / (pts.len() as f64);
    // x = a + (b - a) u^2 on the first panel smooths square-root endpoint behaviour
    let (a0, b0) = (pts[0], pts[1]);
    let first = de(|u: f64| g(a0 + (b0 - a0) * u * u) * 2.0 * (b0 - a0) * u, 0.0, 1.0, tol);
    first + pts[1..].windows(2).map(|w| de(g, w[0], w[1], tol)).sum::<f64>()
}

fn panel_points(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![a];
    for &x in breaks {
        if x > a && x < b {
            pts.push(x);
        }
    }
    pts.push(b);
    pts
}

/// `int_a^inf g`, by the substitution `rho = a / u` (requires `a > 0`).
pub fn integrate_tail(g: &impl Fn(f64) -> f64, a: f64, rel: f64) -> f64 {
    debug_assert!(a > 0.0);
    let h = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            g(a / u) * a / (u * u)
        }
    };
    let rule = gauss_legendre(24);
    let scale = gl_apply(&rule, 0.0, 1.0, |u| h(u).abs());
    de(h, 0.0, 1.0, rel * scale.max(1e-300))
}

/// `int g(rho) * a(rho d) d rho` over `[0, upper]` (or `[0, inf)` when `upper`
/// is `None`), where `a` is an oscillatory angular factor bounded by 1 and
/// decaying like `1/z`.
///
/// Panels are refined to half the oscillation period. For an infinite range
/// the integration stops once a power-law bound on the remaining tail of
/// `|g| / (rho d)` drops below the tolerance.
pub fn oscillatory_radial(
    g: &impl Fn(f64) -> f64,
    a: &impl Fn(f64) -> f64,
    d: f64,
    upper: Option<f64>,
    breaks: &[f64],
    rel: f64,
) -> Result<f64> {
    let integrand = |r: f64| g(r) * a(r * d);
    if d == 0.0 {
        return match upper {
            Some(b) => Ok(integrate_panels(&integrand, 0.0, b, breaks, rel)),
            None => {
                let r0 = breaks.iter().copied().fold(1.0, f64::max);
                let head = integrate_panels(&integrand, 0.0, r0, breaks, rel);
                Ok(head + integrate_tail(&integrand, r0, rel))
            }
        };
    }
    let half = PI / d;
    let first = breaks.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let first = first.min(half).min(upper.unwrap_or(f64::INFINITY));
    let head = integrate_panels(&integrand, 0.0, first, &[], rel);
    let rule = gauss_legendre(16);
    let mut total = head;
    let mut lo = first;
    let hard_stop = upper.unwrap_or(f64::INFINITY);
    let mut scale = head.abs();
    let mut panels = 0usize;
    let mut brk: Vec<f64> = breaks.iter().copied().filter(|x| *x > first).collect();
    brk.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut bi = 0usize;
    loop {
        let mut hi = lo + half;
        while bi < brk.len() && brk[bi] <= lo {
            bi += 1;
        }
        if bi < brk.len() && brk[bi] < hi {
            hi = brk[bi];
        }
        if hi >= hard_stop {
            hi = hard_stop;
        }
        let part = gl_apply(&rule, lo, hi, integrand);
        total += part;
        scale = scale.max(total.abs()).max(part.abs());
        lo = hi;
        panels += 1;
        if lo >= hard_stop {
            return Ok(total);
        }
        if upper.is_none() {
            let g1 = g(lo).abs() / (lo * d);
            let g2 = g(2.0 * lo).abs() / (2.0 * lo * d);
            if g1 == 0.0 {
                return Ok(total);
            }
            let p = (g2 / g1).ln() / 2f64.ln();
            if p < -1.0 {
                let tail = g1 * lo / (-p - 1.0);
                if tail < rel * scale.max(1e-300) {
                    return Ok(total);
                }
            }
            if panels > 2_000_000 {
                return Err(Error::DivergentIntegral(format!("oscillatory tail not converging (decay power {p:.3})")));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_series_match_closed_forms() {
        for &z in &[0.05f64, 0.0999, 0.1001, 0.5, 3.0, 17.0] {
            let j1c = (z.sin() - z * z.cos()) / (z * z);
            assert!((j1(z) - j1c).abs() < 1e-13, "j1({z})");
            assert!((j0(z) - z.sin() / z).abs() < 1e-13);
            assert!((j1_over_z(z) - j1c / z).abs() < 1e-12);
        }
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
        assert!((j1_over_z(0.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn panels_handle_endpoint_singularity() {
        let v = integrate_panels(&|x: f64| 1.0 / x.sqrt(), 0.0, 4.0, &[1.0], 1e-12);
        assert!((v - 4.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn tail_of_power_law() {
        let v = integrate_tail(&|x: f64| x.powi(-3), 2.0, 1e-12);
        assert!((v - 0.125).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_sinc_integral() {
        // int_0^inf rho^2 e^{-rho} sin(rho d)/(rho d) = 2/(1+d^2)^2
        let d = 2.0;
        let v = oscillatory_radial(&|r: f64| r * r * (-r).exp(), &j0, d, None, &[], 1e-10).unwrap();
        assert!((v - 2.0 / 25.0).abs() < 1e-9, "{v}");
    }
}
