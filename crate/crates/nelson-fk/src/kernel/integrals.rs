//! One-dimensional radial reductions of momentum-space integrals.

use super::quad::{gauss_legendre, integrate_panels, j0, j1, j1_over_z, oscillatory_radial};
use super::{KernelId, ModelParams};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const REL: f64 = 1e-11;

/// `4 pi int rho^2 f beta` over `band` (default: everything), clipped to the
/// support of the cutoff.
pub fn renorm_energy(p: &ModelParams, band: Option<(f64, f64)>) -> Result<f64> {
    let (lo, hi) = band.unwrap_or((0.0, f64::INFINITY));
    if !(lo >= 0.0) || !(hi >= lo) {
        return Err(Error::Domain(format!("bad band [{lo}, {hi}]")));
    }
    let hi = match p.kappa.value() {
        Some(_) => hi.min(p.uv_extent()),
        None if hi.is_finite() => hi,
        None => {
            return Err(Error::DivergentIntegral("renormalization energy without cutoff needs a bounded band".into()))
        }
    };
    if p.eps == 0.0 || hi <= lo {
        return Ok(0.0);
    }
    let g = |r: f64| r * r * p.f(r) * p.beta(r);
    Ok(4.0 * PI * integrate_panels(&g, lo, hi, &p.radial_breaks(), REL))
}

/// `w(d) = 4 pi int rho^2 j0(rho d) omega beta_band^2`, the pair interaction
/// between two particles at distance `d`.
pub fn pair_potential(d: f64, p: &ModelParams) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("distance must be >= 0, got {d}")));
    }
    if p.eps == 0.0 {
        return Ok(0.0);
    }
    let g = |r: f64| r * r * p.omega(r) * p.beta_band(r).powi(2);
    let upper = p.kappa.value().map(|_| p.uv_extent());
    Ok(4.0 * PI * oscillatory_radial(&g, &j0, d, upper, &p.radial_breaks(), REL)?)
}

/// Closed-form constant controlling the time integral of the weighted
/// `S`-process, for `-1/2 < a < 0`.
pub fn mho(lambda: f64, a: f64) -> Result<f64> {
    if !(a > -0.5 && a < 0.0) {
        return Err(Error::Domain(format!("mho needs -1/2 < a < 0, got {a}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("mho needs lambda >= 0, got {lambda}")));
    }
    let aa = a.abs();
    let s = 1.0 - 2.0 * aa;
    let lo = lambda.min(1.0);
    let hi = lambda.max(1.0);
    // (1 - lo^s)/s, continuous as s -> 0
    let first = if lo == 0.0 { 1.0 / s } else { -(s * lo.ln()).exp_m1() / s };
    Ok(4.0 * PI * (6.0 * first + 8.0 / ((1.0 + 2.0 * aa) * hi.powf(1.0 + 2.0 * aa)) + 1.0 / (aa * hi.powf(2.0 * aa))))
}

/// `K(tau, d) = 4 pi int e^{-tau omega} f^2 j0(rho d) rho^2`, the kernel of the
/// double-time form of the action.
pub fn direct_kernel(tau: f64, d: f64, p: &ModelParams) -> Result<f64> {
    if !(tau >= 0.0) || !(d >= 0.0) {
        return Err(Error::Domain(format!("direct kernel needs tau, d >= 0 (got {tau}, {d})")));
    }
    if !p.kappa.is_finite() && tau == 0.0 {
        return Err(Error::CutoffRequired);
    }
    if p.eps == 0.0 {
        return Ok(0.0);
    }
    let g = |r: f64| r * r * (-tau * p.omega(r)).exp() * p.f(r).powi(2);
    let upper = match p.kappa.value() {
        Some(_) => p.uv_extent(),
        // e^{-tau rho} is negligible past this radius
        None => (p.radial_breaks().last().copied().unwrap_or(0.0)).max(60.0 / tau),
    };
    Ok(4.0 * PI * oscillatory_radial(&g, &j0, d, Some(upper), &p.radial_breaks(), REL)?)
}

/// A momentum-space function `k -> e^{-s omega} e^{-i k.x} r(k)`, where `r` is a
/// catalog kernel (times `k` for rank 1), optionally restricted to `|k| >= Lambda`.
#[derive(Clone, Copy, Debug)]
pub struct Atom {
    pub kernel: KernelId,
    pub damping: f64,
    pub x: [f64; 3],
    pub band: bool,
}

impl Atom {
    pub fn new(kernel: KernelId, damping: f64, x: [f64; 3]) -> Self {
        Atom { kernel, damping, x, band: false }
    }

    pub fn banded(mut self) -> Self {
        self.band = true;
        self
    }

    fn radial(&self, rho: f64, p: &ModelParams) -> f64 {
        if self.band && rho < p.lambda {
            return 0.0;
        }
        self.kernel.eval(rho, p)
    }

    /// Value at a momentum vector.
    pub fn eval(&self, k: [f64; 3], p: &ModelParams) -> AtomPoint {
        let rho = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let amp = self.radial(rho, p) * (-self.damping * p.omega(rho)).exp();
        let ph = -(k[0] * self.x[0] + k[1] * self.x[1] + k[2] * self.x[2]);
        let z = C64::from_polar(amp, ph);
        if self.kernel.rank() == 0 {
            AtomPoint::Scalar(z)
        } else {
            AtomPoint::Vector([z * k[0], z * k[1], z * k[2]])
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum AtomPoint {
    Scalar(C64),
    Vector([C64; 3]),
}

/// Result of an atom pairing, shaped by the two ranks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AtomPairValue {
    Scalar(C64),
    Vector([C64; 3]),
    Matrix([[C64; 3]; 3]),
}

impl AtomPairValue {
    /// Largest modulus of any component.
    pub fn max_abs(&self) -> f64 {
        match self {
            AtomPairValue::Scalar(z) => z.norm(),
            AtomPairValue::Vector(v) => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
            AtomPairValue::Matrix(m) => m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    /// Largest componentwise difference; `None` if the shapes differ.
    pub fn max_diff(&self, other: &AtomPairValue) -> Option<f64> {
        use AtomPairValue::*;
        Some(match (self, other) {
            (Scalar(a), Scalar(b)) => (a - b).norm(),
            (Vector(a), Vector(b)) => a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max),
            (Matrix(a), Matrix(b)) => {
                a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
            }
            _ => return None,
        })
    }

    pub fn conj(&self) -> AtomPairValue {
        use AtomPairValue::*;
        match self {
            Scalar(a) => Scalar(a.conj()),
            Vector(a) => Vector(a.map(|z| z.conj())),
            Matrix(a) => Matrix(a.map(|r| r.map(|z| z.conj()))),
        }
    }
}

/// `int omega^w conj(A(k)) B(k) d^3k` reduced to radial integrals.
///
/// With `r = x_A - x_B` the angular integrals are `4 pi j0(rho|r|)`,
/// `i 4 pi rho j1(rho|r|) rhat` and
/// `4 pi rho^2 [j1(z)/z delta + (j0(z) - 3 j1(z)/z) rhat rhat]` for the rank
/// combinations 0/0, 0/1 and 1/1.
pub fn atom_pair_integral(a: &Atom, b: &Atom, weight: f64, p: &ModelParams) -> Result<AtomPairValue> {
    let ra = a.kernel.rank();
    let rb = b.kernel.rank();
    let s = a.damping + b.damping;
    if !(s >= 0.0) {
        return Err(Error::Domain("damping must be >= 0".into()));
    }
    let r = [a.x[0] - b.x[0], a.x[1] - b.x[1], a.x[2] - b.x[2]];
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let ranks = (ra + rb) as f64;

    let ia = a.kernel.info();
    let ib = b.kernel.info();
    if !p.kappa.is_finite() && s == 0.0 {
        let pw = 2.0 + weight + ia.uv_power + ib.uv_power + ranks;
        let ok = if d > 0.0 { pw < 0.0 } else { pw < -1.0 };
        if !ok {
            return Err(Error::DivergentIntegral(format!(
                "radial integrand decays like rho^{pw} without cutoff or damping"
            )));
        }
    }
    if p.mu == 0.0 {
        let pw = 2.0 + weight + ia.ir_power + ib.ir_power + ranks;
        if pw <= -1.0 {
            return Err(Error::DivergentIntegral(format!("radial integrand behaves like rho^{pw} at the origin")));
        }
    }

    let g = |rho: f64| {
        if rho == 0.0 {
            return 0.0;
        }
        let w = p.omega(rho);
        rho * rho * w.powf(weight) * (-s * w).exp() * a.radial(rho, p) * b.radial(rho, p)
    };
    let upper = if p.kappa.is_finite() {
        Some(p.uv_extent())
    } else if s > 0.0 {
        Some(p.grid.rho_max.max(60.0 / s))
    } else {
        None
    };
    let breaks = p.radial_breaks();
    let rad = |extra: f64, ang: &dyn Fn(f64) -> f64| -> Result<f64> {
        let h = |rho: f64| g(rho) * rho.powf(extra);
        oscillatory_radial(&h, &|z: f64| ang(z), d, upper, &breaks, REL)
    };
    let rhat = if d > 0.0 { [r[0] / d, r[1] / d, r[2] / d] } else { [0.0; 3] };
    let four_pi = 4.0 * PI;
    match (ra, rb) {
        (0, 0) => Ok(AtomPairValue::Scalar(C64::new(four_pi * rad(0.0, &j0)?, 0.0))),
        (0, 1) | (1, 0) => {
            if d == 0.0 {
                return Ok(AtomPairValue::Vector([C64::new(0.0, 0.0); 3]));
            }
            let v = four_pi * rad(1.0, &j1)?;
            Ok(AtomPairValue::Vector(rhat.map(|c| C64::new(0.0, v * c))))
        }
        _ => {
            let diag = four_pi * rad(2.0, &j1_over_z)?;
            let aniso = if d == 0.0 { 0.0 } else { four_pi * rad(2.0, &|z: f64| j0(z) - 3.0 * j1_over_z(z))? };
            let mut m = [[C64::new(0.0, 0.0); 3]; 3];
            for (i, row) in m.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    let delta = if i == j { diag } else { 0.0 };
                    *e = C64::new(delta + aniso * rhat[i] * rhat[j], 0.0);
                }
            }
            Ok(AtomPairValue::Matrix(m))
        }
    }
}

/// Tabulated pair potential `w(d)` with local cubic interpolation in
/// `u = ln(1 + d)` and a measured error certificate.
#[derive(Clone, Debug)]
pub struct PairTable {
    u_max: f64,
    h: f64,
    values: Vec<f64>,
    /// Largest interpolation error seen at the cell midpoints.
    pub max_error: f64,
    params: ModelParams,
}

impl PairTable {
    pub fn build(p: &ModelParams, d_max: f64, cells: usize) -> Result<PairTable> {
        if !(d_max > 0.0) || cells < 4 {
            return Err(Error::Domain("pair table needs d_max > 0 and at least 4 cells".into()));
        }
        let u_max = d_max.ln_1p();
        let h = u_max / cells as f64;
        let values = (0..=cells).map(|i| pair_potential((i as f64 * h).exp_m1(), p)).collect::<Result<Vec<_>>>()?;
        let mut t = PairTable { u_max, h, values, max_error: 0.0, params: p.clone() };
        let mut err: f64 = 0.0;
        for i in 0..cells {
            let d = ((i as f64 + 0.5) * h).exp_m1();
            err = err.max((t.interp(d) - pair_potential(d, p)?).abs());
        }
        t.max_error = err;
        Ok(t)
    }

    fn interp(&self, d: f64) -> f64 {
        let u = d.ln_1p();
        let n = self.values.len() - 1;
        let x = (u / self.h).min(n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let s = x - i as f64;
        let y = |j: isize| -> f64 {
            let j = j.clamp(0, n as isize) as usize;
            self.values[j]
        };
        let (y0, y1) = (y(i as isize), y(i as isize + 1));
        // w is even in d, so the mirrored node supplies the slope at the origin
        let ym = if i == 0 { y(1) } else { y(i as isize - 1) };
        let y2 = if i + 1 == n { 2.0 * y1 - y0 } else { y(i as isize + 2) };
        let m0 = 0.5 * (y1 - ym);
        let m1 = 0.5 * (y2 - y0);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    /// `w(d)`; distances beyond the table are integrated directly.
    pub fn eval(&self, d: f64) -> Result<f64> {
        let d = d.abs();
        if d.ln_1p() > self.u_max {
            return pair_potential(d, &self.params);
        }
        Ok(self.interp(d))
    }
}

/// Product-rule reference for [`atom_pair_integral`]: Gauss-Legendre in
/// `rho` on `[0, upper]`, Gauss-Legendre in `cos theta`, uniform in `phi`.
pub fn atom_pair_bruteforce(
    a: &Atom,
    b: &Atom,
    weight: f64,
    p: &ModelParams,
    upper: f64,
    n_rho: usize,
    n_theta: usize,
    n_phi: usize,
) -> AtomPairValue {
    let rule_r = gauss_legendre(n_rho);
    let rule_t = gauss_legendre(n_theta);
    let mut pts = vec![0.0];
    pts.extend(p.radial_breaks().into_iter().filter(|x| *x < upper));
    pts.push(upper);
    let mut acc = [[C64::new(0.0, 0.0); 3]; 3];
    let mut scal = C64::new(0.0, 0.0);
    let mut vec = [C64::new(0.0, 0.0); 3];
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let hr = 0.5 * (hi - lo);
        for &(xr, wr) in &rule_r {
            let rho = 0.5 * (hi + lo) + hr * xr;
            let wrad = wr * hr * rho * rho * p.omega(rho).powf(weight);
            for &(ct, wt) in &rule_t {
                let st = (1.0 - ct * ct).sqrt();
                for ip in 0..n_phi {
                    let ph = 2.0 * PI * (ip as f64 + 0.5) / n_phi as f64;
                    let k = [rho * st * ph.cos(), rho * st * ph.sin(), rho * ct];
                    let wt_all = wrad * wt * 2.0 * PI / n_phi as f64;
                    match (a.eval(k, p), b.eval(k, p)) {
                        (AtomPoint::Scalar(x), AtomPoint::Scalar(y)) => scal += x.conj() * y * wt_all,
                        (AtomPoint::Scalar(x), AtomPoint::Vector(y)) => {
                            for i in 0..3 {
                                vec[i] += x.conj() * y[i] * wt_all;
                            }
                        }
                        (AtomPoint::Vector(x), AtomPoint::Scalar(y)) => {
                            for i in 0..3 {
                                vec[i] += x[i].conj() * y * wt_all;
                            }
                        }
                        (AtomPoint::Vector(x), AtomPoint::Vector(y)) => {
                            for i in 0..3 {
                                for j in 0..3 {
                                    acc[i][j] += x[i].conj() * y[j] * wt_all;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    match (a.kernel.rank(), b.kernel.rank()) {
        (0, 0) => AtomPairValue::Scalar(scal),
        (1, 1) => AtomPairValue::Matrix(acc),
        _ => AtomPairValue::Vector(vec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ChiProfile, Kappa};
    use std::f64::consts::LN_2;

    fn base() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn renorm_energy_closed_form() {
        let mut p = base();
        p.kappa = Kappa::Finite(2);
        let e = renorm_energy(&p, None).unwrap();
        assert!((e / (8.0 * PI * LN_2) - 1.0).abs() < 1e-8, "{e}");
        p.kappa = Kappa::Infinite;
        let e = renorm_energy(&p, Some((0.0, 10.0))).unwrap();
        assert!((e / (8.0 * PI * 6f64.ln()) - 1.0).abs() < 1e-8);
        assert!(matches!(renorm_energy(&p, None), Err(Error::DivergentIntegral(_))));
        p.eps = 0.0;
        assert_eq!(renorm_energy(&p, Some((0.0, 3.0))).unwrap(), 0.0);
    }

    #[test]
    fn renorm_energy_bands_add_up() {
        let mut p = base();
        p.mu = 0.7;
        p.kappa = Kappa::Finite(8);
        p.chi = ChiProfile::Taper { flat: 0.4 };
        let all = renorm_energy(&p, None).unwrap();
        let a = renorm_energy(&p, Some((0.0, 1.3))).unwrap();
        let b = renorm_energy(&p, Some((1.3, 1e9))).unwrap();
        assert!((a + b - all).abs() < 1e-10 * all);
    }

    #[test]
    fn pair_potential_closed_forms() {
        let mut p = base();
        p.kappa = Kappa::Infinite;
        let w = pair_potential(0.0, &p).unwrap();
        assert!((w / (8.0 * PI) - 1.0).abs() < 1e-8, "{w}");
        p.kappa = Kappa::Finite(6);
        p.lambda = 2.0;
        let w = pair_potential(0.0, &p).unwrap();
        assert!((w / (2.0 * PI) - 1.0).abs() < 1e-8, "{w}");
    }

    #[test]
    fn pair_potential_bounded_by_origin_value() {
        let mut p = base();
        p.kappa = Kappa::Infinite;
        let w0 = pair_potential(0.0, &p).unwrap();
        for &d in &[0.1, 0.5, 1.0, 3.0, 10.0] {
            let w = pair_potential(d, &p).unwrap();
            assert!(w <= w0 && w > 0.0, "w({d}) = {w}");
        }
    }

    #[test]
    fn mho_values() {
        let v = mho(1.0, -0.25).unwrap();
        assert!((v - 4.0 * PI * (16.0 / 3.0 + 4.0)).abs() < 1e-12);
        assert!(mho(1e12, -0.25).unwrap() < 1e-4);
        let v0 = mho(0.0, -0.25).unwrap();
        assert!((v0 - 4.0 * PI * (12.0 + 16.0 / 3.0 + 4.0)).abs() < 1e-12);
        let near = mho(0.5, -0.4999999).unwrap();
        let lim = 4.0 * PI * (6.0 * -(0.5f64.ln()) + 8.0 / 2.0 + 2.0);
        assert!((near - lim).abs() < 1e-4, "{near} vs {lim}");
        assert!(mho(1.0, 0.1).is_err());
        assert!(mho(1.0, -0.5).is_err());
    }

    #[test]
    fn atom_pair_f_f_at_same_point() {
        let mut p = base();
        p.kappa = Kappa::Finite(3);
        let a = Atom::new(KernelId::F, 0.0, [0.0; 3]);
        let v = atom_pair_integral(&a, &a, 0.0, &p).unwrap();
        match v {
            AtomPairValue::Scalar(z) => assert!((z.re - 2.0 * PI * 9.0).abs() < 1e-8),
            _ => panic!(),
        }
        let m = Atom::new(KernelId::MBeta, 0.0, [0.0; 3]);
        assert!(atom_pair_integral(&a, &m, 0.0, &p).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn atom_pair_matches_bruteforce() {
        let mut p = base();
        p.mu = 0.5;
        p.kappa = Kappa::Finite(4);
        let combos = [
            (KernelId::Beta, KernelId::F),
            (KernelId::F, KernelId::MBeta),
            (KernelId::MBeta, KernelId::Beta),
            (KernelId::MBeta, KernelId::MBeta),
        ];
        for (ka, kb) in combos {
            let a = Atom::new(ka, 0.1, [0.0, 0.0, 1.0]);
            let b = Atom::new(kb, 0.2, [0.3, -0.2, 0.1]);
            let exact = atom_pair_integral(&a, &b, 0.5, &p).unwrap();
            let brute = atom_pair_bruteforce(&a, &b, 0.5, &p, 4.0, 40, 40, 64);
            let err = exact.max_diff(&brute).unwrap();
            assert!(err < 1e-6 * exact.max_abs().max(1e-3), "{ka:?}/{kb:?}: {err}");
            let swapped = atom_pair_integral(&b, &a, 0.5, &p).unwrap();
            let sym = match (exact, swapped) {
                (AtomPairValue::Matrix(x), AtomPairValue::Matrix(y)) => {
                    let mut e: f64 = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            e = e.max((x[i][j] - y[j][i].conj()).norm());
                        }
                    }
                    e
                }
                (x, y) => x.max_diff(&y.conj()).unwrap(),
            };
            assert!(sym < 1e-12 * exact.max_abs().max(1.0), "symmetry {sym}");
        }
    }

    #[test]
    fn divergent_atoms_are_rejected() {
        let mut p = base();
        p.kappa = Kappa::Infinite;
        let a = Atom::new(KernelId::F, 0.0, [0.0; 3]);
        assert!(matches!(atom_pair_integral(&a, &a, 0.0, &p), Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn pair_table_certificate() {
        let mut p = base();
        p.kappa = Kappa::Finite(4);
        let t = PairTable::build(&p, 20.0, 200).unwrap();
        assert!(t.max_error < 1e-4, "{}", t.max_error);
        let d = 1.2345;
        assert!((t.eval(d).unwrap() - pair_potential(d, &p).unwrap()).abs() <= 2.0 * t.max_error + 1e-9);
    }

    #[test]
    fn direct_kernel_at_origin_is_renorm_integrand() {
        let mut p = base();
        p.kappa = Kappa::Finite(4);
        // int_0^inf K(tau, 0) dtau = 4 pi int f^2/omega rho^2 ; compare at tau -> small
        let k0 = direct_kernel(0.0, 0.0, &p).unwrap();
        assert!((k0 - 2.0 * PI * 16.0).abs() < 1e-8, "{k0}");
        assert!(matches!(
            direct_kernel(0.0, 0.0, &ModelParams { kappa: Kappa::Infinite, ..base() }),
            Err(Error::CutoffRequired)
        ));
    }
}
