//! Exponential vectors and the operators that map them to exponential vectors.
//!
//! A `CoherentVec` is `exp(log_prefactor) * zeta(param)` with `param` a
//! one-boson vector sampled on the momentum grid. Every operator here acts
//! in closed form on the pair `(log_prefactor, param)`.

use crate::error::{Error, Result};
use crate::fieldstate::{plane_wave, MomentumGrid};
use crate::kernel::Atom;
use crate::kernel::AtomPoint;
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentVec {
    pub log_prefactor: C64,
    pub param: Vec<C64>,
}

impl CoherentVec {
    pub fn new(log_prefactor: C64, param: Vec<C64>) -> Self {
        CoherentVec { log_prefactor, param }
    }

    /// `zeta(h)`.
    pub fn exp(param: Vec<C64>) -> Self {
        CoherentVec { log_prefactor: C64::new(0.0, 0.0), param }
    }

    pub fn vacuum(grid: &MomentumGrid) -> Self {
        Self::exp(vec![C64::new(0.0, 0.0); grid.len()])
    }

    /// `ln |A|^2 = 2 Re log + ||param||^2`.
    pub fn log_norm_sqr(&self, grid: &MomentumGrid) -> f64 {
        2.0 * self.log_prefactor.re + inner(grid, &self.param, &self.param).re
    }
}

/// `<a, b> = sum weight conj(a) b`.
pub fn inner(grid: &MomentumGrid, a: &[C64], b: &[C64]) -> C64 {
    (0..grid.len()).map(|n| a[n].conj() * b[n] * grid.weight[n]).sum()
}

pub fn norm_sqr(grid: &MomentumGrid, a: &[C64]) -> f64 {
    (0..grid.len()).map(|n| a[n].norm_sqr() * grid.weight[n]).sum()
}

/// `||g||_t^2 = ||g||^2 + ||(t omega)^{-1/2} g||^2`.
pub fn norm_t_sqr(grid: &MomentumGrid, g: &[C64], t: f64) -> f64 {
    (0..grid.len()).map(|n| g[n].norm_sqr() * grid.weight[n] * (1.0 + 1.0 / (t * grid.omega[n]))).sum()
}

/// Logarithm of `<A, B>`.
pub fn log_inner_coherent(grid: &MomentumGrid, a: &CoherentVec, b: &CoherentVec) -> C64 {
    a.log_prefactor.conj() + b.log_prefactor + inner(grid, &a.param, &b.param)
}

/// `<A, B> = exp(conj(log_A) + log_B + <param_A, param_B>)`.
pub fn inner_coherent(grid: &MomentumGrid, a: &CoherentVec, b: &CoherentVec) -> C64 {
    log_inner_coherent(grid, a, b).exp()
}

/// `W(f, Q) A` with `Q` multiplication by `e^{i k.x}` (identity when `x` is `None`).
pub fn apply_weyl(grid: &MomentumGrid, f: &[C64], phase_point: Option<[f64; 3]>, a: &CoherentVec) -> CoherentVec {
    let qh: Vec<C64> = match phase_point {
        Some(x) => plane_wave(grid, x).iter().zip(&a.param).map(|(e, h)| e.conj() * h).collect(),
        None => a.param.clone(),
    };
    let log = a.log_prefactor - 0.5 * norm_sqr(grid, f) - inner(grid, f, &qh);
    CoherentVec::new(log, f.iter().zip(&qh).map(|(x, y)| x + y).collect())
}

/// `F_{0,t}(g) A = zeta(e^{-t omega} h + g)`, or the adjoint
/// `F_{0,t}(g)^* A = e^{<g,h>} zeta(e^{-t omega} h)`.
pub fn apply_f(grid: &MomentumGrid, g: &[C64], t: f64, adjoint: bool, a: &CoherentVec) -> Result<CoherentVec> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("F operators need t > 0, got {t}")));
    }
    let damped: Vec<C64> = (0..grid.len()).map(|n| a.param[n] * (-t * grid.omega[n]).exp()).collect();
    Ok(if adjoint {
        CoherentVec::new(a.log_prefactor + inner(grid, g, &a.param), damped)
    } else {
        CoherentVec::new(a.log_prefactor, damped.iter().zip(g).map(|(x, y)| x + y).collect())
    })
}

/// `sup_h ||F_{0,t}(g) zeta(h)|| / ||zeta(h)|| = exp(sum weight |g|^2 / (2 (1 - e^{-2 t omega})))`.
pub fn f_norm_on_coherent(grid: &MomentumGrid, g: &[C64], t: f64) -> f64 {
    let s: f64 = (0..grid.len()).map(|n| grid.weight[n] * g[n].norm_sqr() / -(-2.0 * t * grid.omega[n]).exp_m1()).sum();
    (0.5 * s).exp()
}

/// `<zeta(a), a^dag(f_m) ... a^dag(f_1) F_{0,t}(g) zeta(h)>` for `m <= 2`.
pub fn creation_matrix_element(
    grid: &MomentumGrid,
    a: &[C64],
    f_list: &[&[C64]],
    g: &[C64],
    t: f64,
    h: &[C64],
) -> Result<C64> {
    if f_list.len() > 2 {
        return Err(Error::UnsupportedOrder(f_list.len()));
    }
    let fh = apply_f(grid, g, t, false, &CoherentVec::exp(h.to_vec()))?;
    let base = inner_coherent(grid, &CoherentVec::exp(a.to_vec()), &fh);
    Ok(f_list.iter().map(|f| inner(grid, a, f)).product::<C64>() * base)
}

/// `<zeta(a), a(f) zeta(h)> = <f, h> e^{<a, h>}`.
pub fn annihilation_matrix_element(grid: &MomentumGrid, a: &[C64], f: &[C64], h: &[C64]) -> C64 {
    inner(grid, f, h) * inner(grid, a, h).exp()
}

/// Where the quadratic form is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum HamContext {
    /// `dGamma(omega) + phi(sum_j e^{-ik.x_j} f)`.
    Position(Vec<[f64; 3]>),
    /// `(xi - dGamma(k))^2 / 2 + dGamma(omega) + phi(f)`.
    Fiber([f64; 3]),
}

/// `<zeta(a), H zeta(h)>` in closed form.
pub fn ham_form_element(grid: &MomentumGrid, a: &[C64], h: &[C64], ctx: &HamContext) -> Result<C64> {
    if !grid.params.kappa.is_finite() {
        return Err(Error::CutoffRequired);
    }
    let e = inner(grid, a, h).exp();
    let wh: Vec<C64> = (0..grid.len()).map(|n| h[n] * grid.omega[n]).collect();
    let mut val = inner(grid, a, &wh);
    let field: Vec<C64> = match ctx {
        HamContext::Position(xs) => {
            let mut fx = vec![C64::new(0.0, 0.0); grid.len()];
            for x in xs {
                for (n, p) in plane_wave(grid, *x).iter().enumerate() {
                    fx[n] += p * grid.f[n];
                }
            }
            fx
        }
        HamContext::Fiber(xi) => {
            let mut lin = [C64::new(0.0, 0.0); 3];
            let mut k2h = C64::new(0.0, 0.0);
            for n in 0..grid.len() {
                let z = a[n].conj() * h[n] * grid.weight[n];
                for c in 0..3 {
                    lin[c] += z * grid.k[n][c];
                }
                k2h += z * grid.rho[n] * grid.rho[n];
            }
            let xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let cross: C64 = (0..3).map(|c| lin[c] * xi[c]).sum();
            let sq: C64 = lin.iter().map(|l| l * l).sum();
            val += 0.5 * (xi2 - 2.0 * cross + sq + k2h);
            grid.f.iter().map(|f| C64::new(*f, 0.0)).collect()
        }
    };
    val += inner(grid, a, &field) + inner(grid, &field, h);
    Ok(val * e)
}

/// A scalar kernel atom sampled on the grid.
pub fn atom_on_grid(grid: &MomentumGrid, atom: &Atom) -> Result<Vec<C64>> {
    grid.k
        .iter()
        .map(|k| match atom.eval(*k, &grid.params) {
            AtomPoint::Scalar(z) => Ok(z),
            AtomPoint::Vector(_) => Err(Error::Domain("vector atoms are not one-boson vectors".into())),
        })
        .collect()
}

/// Gaussian probe `amp * exp(-|k|^2 / (2 width^2) - i k.y)`; conjugation
/// invariant for real `amp`.
pub fn gaussian_probe(grid: &MomentumGrid, amp: C64, width: f64, y: [f64; 3]) -> Vec<C64> {
    plane_wave(grid, y).iter().zip(&grid.rho).map(|(p, r)| p * amp * (-0.5 * r * r / (width * width)).exp()).collect()
}
