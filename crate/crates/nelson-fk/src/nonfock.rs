//! Gross-transformed (non-Fock) integrand.
//!
//! Only the transformed action and processes are built; the transformation
//! itself is never materialized, so `Lambda = 0` with `mu = 0` is allowed
//! everywhere except in the conjugation check.

use crate::error::{Error, Result};
use crate::fieldstate::{plane_wave, MomentumGrid};
use crate::fock::{apply_weyl, inner, inner_coherent, CoherentVec};
use crate::kernel::ModelParams;
use crate::mc::McControls;
use crate::paths::BrownianPath;
use crate::semigroup::{
    band_start, energy_fit, evaluate_fields, potential_integral, split_grid, w_adjoint_apply, EnergyFit, EnergySpec,
    PotentialSpec,
};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrossParams {
    /// Infrared split of the transformation.
    pub lambda: f64,
    pub model: ModelParams,
}

impl GrossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("Lambda must be finite and >= 0, got {}", self.lambda)));
        }
        self.model.validate()
    }

    /// Whether `beta_{Lambda,kappa}` is square integrable, so the unitary exists.
    pub fn unitary_exists(&self) -> bool {
        self.lambda > 0.0 || self.model.mu > 0.0
    }

    /// Momentum grid with a radial panel edge at `Lambda`.
    pub fn grid(&self) -> Result<MomentumGrid> {
        self.validate()?;
        split_grid(&self.model, self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TildeAction {
    pub t: f64,
    pub u: f64,
    pub b: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub u_tilde: f64,
}

/// `beta_Lambda^N(y) = 1_{rho >= Lambda} beta sum_l e^{-i k.y_l}`.
pub fn beta_n(grid: &MomentumGrid, from_panel: usize, y: &[[f64; 3]]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for yl in y {
        for (o, e) in out.iter_mut().zip(plane_wave(grid, *yl)) {
            *o += e;
        }
    }
    for (n, o) in out.iter_mut().enumerate() {
        *o *= if grid.panel[n] >= from_panel { grid.beta[n] } else { 0.0 };
    }
    out
}

fn endpoint(path: &BrownianPath, x: &[[f64; 3]], t_index: usize) -> Vec<[f64; 3]> {
    x.iter()
        .enumerate()
        .map(|(l, xl)| {
            let a = path.particle(t_index, l);
            [xl[0] + a[0], xl[1] + a[1], xl[2] + a[2]]
        })
        .collect()
}

/// Transformed action and processes `(u~, U~^+, U~^-)` at node `t_index`.
pub struct TildeFields {
    pub action: TildeAction,
    pub u_plus: Vec<C64>,
    pub u_minus: Vec<C64>,
    /// The untransformed evaluation, for conjugation checks.
    pub eval: crate::action::PathEvaluation,
    pub from_panel: usize,
}

/// `grid` must carry `lambda` as a panel edge, see [`GrossParams::grid`].
pub fn tilde_fields(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
    lambda: f64,
) -> Result<TildeFields> {
    let from = band_start(grid, lambda)?;
    let ev = evaluate_fields(grid, path, x, t_index)?;
    let s = &ev.last;
    let np = s.panels.len();
    let hi = s.sum(from..np);
    let u = s.u_total(0..np);
    let action = TildeAction {
        t: s.t,
        u,
        b: hi.b,
        c_minus: hi.c_minus,
        c_plus: hi.c_plus,
        u_tilde: u - hi.b + hi.c_minus + hi.c_plus,
    };
    let b0 = beta_n(grid, from, x);
    let bt = beta_n(grid, from, &endpoint(path, x, t_index));
    let (up, um) = (ev.u_plus.as_ref().unwrap(), ev.u_minus.as_ref().unwrap());
    let mut u_plus = Vec::with_capacity(grid.len());
    let mut u_minus = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let d = (-s.t * grid.omega[n]).exp();
        u_minus.push(b0[n] - d * bt[n] - um[n]);
        u_plus.push(bt[n] - d * b0[n] - up[n]);
    }
    Ok(TildeFields { action, u_plus, u_minus, eval: ev, from_panel: from })
}

/// `u~ = u - b_Lambda + c^-_Lambda + c^+_Lambda`.
pub fn tilde_action(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
    lambda: f64,
) -> Result<TildeAction> {
    Ok(tilde_fields(grid, path, x, t_index, lambda)?.action)
}

/// Logarithm of `<zeta(g), W~* zeta(h)> = exp(u~ - int V + <U~^+, h> + <g, e^{-t omega} h + U~^->)`.
pub fn tilde_log_element(grid: &MomentumGrid, tf: &TildeFields, vint: f64, g: &[C64], h: &[C64]) -> C64 {
    let t = tf.action.t;
    let damped: Vec<C64> = (0..grid.len()).map(|n| h[n] * (-t * grid.omega[n]).exp() + tf.u_minus[n]).collect();
    tf.action.u_tilde - vint + inner(grid, &tf.u_plus, h) + inner(grid, g, &damped)
}

pub fn tilde_w_matrix_element(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
    g: &[C64],
    h: &[C64],
    lambda: f64,
    v: &PotentialSpec,
) -> Result<C64> {
    let tf = tilde_fields(grid, path, x, t_index, lambda)?;
    Ok(tilde_log_element(grid, &tf, potential_integral(v, path, x, t_index), g, h).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugationReport {
    /// The transformed element.
    pub tilde: C64,
    /// `<zeta(g), W(beta(x)) W* W(-beta(x + b_t)) zeta(h)>`.
    pub conjugated: C64,
    /// `|tilde - conjugated| / |conjugated|`.
    pub rel_residual: f64,
}

/// Compare the transformed element with the Weyl-conjugated original.
pub fn idgross_residual(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
    g: &[C64],
    h: &[C64],
    lambda: f64,
    v: &PotentialSpec,
) -> Result<ConjugationReport> {
    if !(lambda > 0.0 || grid.params.mu > 0.0) {
        return Err(Error::Domain("the transformation is not unitary for Lambda = 0 and mu = 0".into()));
    }
    if !grid.params.kappa.is_finite() {
        return Err(Error::CutoffRequired);
    }
    let tf = tilde_fields(grid, path, x, t_index, lambda)?;
    let vint = potential_integral(v, path, x, t_index);
    let tilde = tilde_log_element(grid, &tf, vint, g, h).exp();
    let b0 = beta_n(grid, tf.from_panel, x);
    let bt: Vec<C64> = beta_n(grid, tf.from_panel, &endpoint(path, x, t_index)).iter().map(|z| -z).collect();
    let a = apply_weyl(grid, &bt, None, &CoherentVec::exp(h.to_vec()));
    let a = w_adjoint_apply(grid, &tf.eval, vint, &a)?;
    let a = apply_weyl(grid, &b0, None, &a);
    let conjugated = inner_coherent(grid, &CoherentVec::exp(g.to_vec()), &a);
    let rel_residual = (tilde - conjugated).norm() / conjugated.norm().max(f64::MIN_POSITIVE);
    Ok(ConjugationReport { tilde, conjugated, rel_residual })
}

/// Ground-state energy from the transformed action; equal in law to the
/// untransformed spectrum.
pub fn tilde_ground_energy(spec: &EnergySpec, lambda: f64, mc: &McControls) -> Result<EnergyFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("Lambda must be finite and >= 0, got {lambda}")));
    }
    energy_fit(spec, mc, Some(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::gaussian_probe;
    use crate::kernel::{AngularRule, Kappa};
    use crate::paths::sample_path;

    fn gp(lambda: f64, eps: f64) -> GrossParams {
        let mut p = ModelParams::default();
        p.kappa = Kappa::Finite(4);
        p.eps = eps;
        p.grid.radial_nodes = 16;
        p.grid.angular = AngularRule::Lebedev(14);
        GrossParams { lambda, model: p }
    }

    #[test]
    fn zero_coupling_is_free() {
        let g = gp(1.0, 0.0);
        let grid = g.grid().unwrap();
        let path = sample_path(1, 0, 20, 0.01, 1).unwrap();
        let a = tilde_action(&grid, &path, &[[0.0; 3]], 20, 1.0).unwrap();
        assert_eq!(a.u_tilde, 0.0);
        let h = gaussian_probe(&grid, C64::new(0.2, 0.1), 1.0, [0.0; 3]);
        let w = tilde_w_matrix_element(&grid, &path, &[[0.0; 3]], 20, &h, &h, 1.0, &PotentialSpec::Zero).unwrap();
        let damped: Vec<C64> = (0..grid.len()).map(|n| h[n] * (-0.2 * grid.omega[n]).exp()).collect();
        assert!((w - inner(&grid, &h, &damped).exp()).norm() < 1e-14);
    }

    #[test]
    fn band_above_cutoff_changes_nothing() {
        let g = gp(5.0, 1.0);
        let grid = g.grid().unwrap();
        let path = sample_path(1, 0, 20, 0.01, 1).unwrap();
        let a = tilde_action(&grid, &path, &[[0.0; 3]], 20, 5.0).unwrap();
        assert_eq!(a.u_tilde, a.u);
    }

    #[test]
    fn conjugation_identity_holds_per_path() {
        let g = gp(1.0, 1.0);
        let grid = g.grid().unwrap();
        let path = sample_path(4, 2, 50, 0.01, 2).unwrap();
        let x = [[0.1, 0.0, 0.0], [0.0, 0.5, 0.2]];
        let a = gaussian_probe(&grid, C64::new(0.3, 0.2), 1.0, [0.1, 0.0, 0.0]);
        let b = gaussian_probe(&grid, C64::new(-0.1, 0.4), 0.7, [0.0, 0.3, 0.0]);
        let v = PotentialSpec::Harmonic { omega0: 1.0, box_r: 2.0 };
        let r = idgross_residual(&grid, &path, &x, 50, &a, &b, 1.0, &v).unwrap();
        assert!(r.rel_residual < 1e-12, "{r:?}");
        let zero = g.model.clone();
        let mut z = GrossParams { lambda: 0.0, model: zero };
        z.model.mu = 0.0;
        let grid0 = z.grid().unwrap();
        assert!(matches!(idgross_residual(&grid0, &path, &x, 50, &a, &b, 0.0, &v), Err(Error::Domain(_))));
    }

    #[test]
    fn band_corrections_are_bounded() {
        for lambda in [1.0, 2.0] {
            let g = gp(lambda, 1.0);
            let grid = g.grid().unwrap();
            for s in 0..5 {
                let path = sample_path(8, s, 100, 0.01, 2).unwrap();
                let a = tilde_action(&grid, &path, &[[0.0; 3], [0.3, 0.0, 0.0]], 100, lambda).unwrap();
                let bound = 8.0 * std::f64::consts::PI * 4.0 / lambda;
                assert!(a.c_plus.abs() <= bound && a.c_minus.abs() <= bound, "{a:?}");
                assert!(a.b >= 0.0 && a.b <= 2.0 * bound);
            }
        }
    }

    #[test]
    fn transformed_processes_are_finite_without_infrared_cut() {
        let g = gp(0.0, 1.0);
        let grid = g.grid().unwrap();
        let path = sample_path(3, 1, 40, 0.01, 1).unwrap();
        let tf = tilde_fields(&grid, &path, &[[0.0; 3]], 40, 0.0).unwrap();
        let n = crate::fock::norm_t_sqr(&grid, &tf.u_plus, 0.4) + crate::fock::norm_t_sqr(&grid, &tf.u_minus, 0.4);
        assert!(n.is_finite());
    }
}
