//! Fixed total momentum: the fiber integrand and the dispersion `E(xi)`.
//!
//! One particle, no potential; all processes are started at the origin.

use crate::action::{evaluate, EvalOptions};
use crate::error::{Error, Result};
use crate::fieldstate::{plane_wave, MomentumGrid};
use crate::fock::inner;
use crate::kernel::ModelParams;
use crate::mc::{linear_fit, run_paths, McControls, McEstimate};
use crate::paths::{sample_path, BrownianPath};
use crate::semigroup::{evaluate_fields, fit_log_series, fit_times, time_indices, EnergyFit};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

fn check_single(p: &ModelParams) -> Result<()> {
    if p.n_particles != 1 {
        return Err(Error::Domain(format!("the fiber model has one particle, got {}", p.n_particles)));
    }
    Ok(())
}

/// `<zeta(g), W^* zeta(h)> = exp(u - <e^{ik.B_t} U^+, h> + <g, e^{-t omega - ik.B_t} h - U^->)`.
pub fn fiber_w_matrix_element(
    grid: &MomentumGrid,
    path: &BrownianPath,
    t_index: usize,
    g: &[C64],
    h: &[C64],
) -> Result<C64> {
    check_single(&grid.params)?;
    let ev = evaluate_fields(grid, path, &[[0.0; 3]], t_index)?;
    let (up, um) = (ev.u_plus.as_ref().unwrap(), ev.u_minus.as_ref().unwrap());
    let t = ev.last.t;
    // e^{-ik.B_t}
    let ph = plane_wave(grid, path.particle(t_index, 0));
    let up_rot: Vec<C64> = up.iter().zip(&ph).map(|(u, p)| u * p.conj()).collect();
    let arg: Vec<C64> = (0..grid.len()).map(|n| (-t * grid.omega[n]).exp() * ph[n] * h[n] - um[n]).collect();
    Ok((ev.breakdown().u_total - inner(grid, &up_rot, h) + inner(grid, g, &arg)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// One-particle model.
    pub params: ModelParams,
    pub t_grid: Vec<f64>,
    pub dt: f64,
    pub max_rel_err: f64,
    pub jackknife_blocks: usize,
}

/// Per-time complex moment `E[e^{u_t + i xi.B_t}]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberPoint {
    pub t: f64,
    pub re: McEstimate,
    pub im: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberFit {
    pub xi: [f64; 3],
    /// Fit of `ln Re E[e^{u_t + i xi.B_t}]`.
    pub fit: EnergyFit,
    pub moments: Vec<FiberPoint>,
    /// Largest `|Im| / stderr(Im)` over the time grid; zero in expectation.
    pub im_z_score: f64,
}

fn fiber_samples(
    spec: &FiberSpec,
    grid: Option<&MomentumGrid>,
    idx: &[usize],
    zeta: [C64; 3],
    stream: u64,
    seed: u64,
) -> Result<Vec<C64>> {
    let n_steps = *idx.last().unwrap();
    let path = sample_path(seed, stream, n_steps, spec.dt, 1)?;
    let us: Vec<f64> = match grid {
        Some(g) => {
            let every = idx.iter().fold(0, |a, b| gcd(a, *b));
            let opts = EvalOptions { direct: false, snapshot_every: Some(every), ..Default::default() };
            let ev = evaluate(g, &path, &[[0.0; 3]], n_steps, &opts)?;
            idx.iter()
                .map(|&i| ev.snapshots.iter().find(|s| s.t_index == i).map(|s| s.u_total(0..g.n_panels())).unwrap())
                .collect()
        }
        None => vec![0.0; idx.len()],
    };
    Ok(idx
        .iter()
        .zip(&us)
        .map(|(&i, u)| {
            let b = path.particle(i, 0);
            let phase: C64 = (0..3).map(|c| zeta[c] * b[c]).sum::<C64>() * C64::i();
            (u + phase).exp()
        })
        .collect())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn grid_for(p: &ModelParams) -> Result<Option<MomentumGrid>> {
    check_single(p)?;
    if p.eps == 0.0 {
        return Ok(None);
    }
    let mut q = p.clone();
    q.lambda = 0.0;
    Ok(Some(MomentumGrid::build(&q)?))
}

/// `E[e^{u_t + i zeta.B_t}]` at every time of the grid, for complex `zeta`.
pub fn fiber_moments(spec: &FiberSpec, zeta: [C64; 3], mc: &McControls) -> Result<Vec<FiberPoint>> {
    let idx = time_indices(&spec.t_grid, spec.dt)?;
    let grid = grid_for(&spec.params)?;
    let rows = run_paths(mc, |s| fiber_samples(spec, grid.as_ref(), &idx, zeta, s, mc.seed))?;
    Ok((0..idx.len())
        .map(|k| {
            let re: Vec<f64> = rows.iter().map(|r| r[k].re).collect();
            let im: Vec<f64> = rows.iter().map(|r| r[k].im).collect();
            FiberPoint { t: spec.t_grid[k], re: McEstimate::from_samples(&re), im: McEstimate::from_samples(&im) }
        })
        .collect())
}

/// `E(xi) = -lim (1/t) ln Re E[e^{u_t + i xi.B_t}]`.
pub fn fiber_energy(xi: [f64; 3], spec: &FiberSpec, mc: &McControls) -> Result<FiberFit> {
    if mc.n_paths < 2 * spec.jackknife_blocks.max(2) {
        return Err(Error::Domain("too few paths for the jackknife".into()));
    }
    fit_times(&spec.t_grid)?;
    let idx = time_indices(&spec.t_grid, spec.dt)?;
    let grid = grid_for(&spec.params)?;
    let zeta = xi.map(|v| C64::new(v, 0.0));
    let rows = run_paths(mc, |s| fiber_samples(spec, grid.as_ref(), &idx, zeta, s, mc.seed))?;
    let re: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|z| z.re).collect()).collect();
    let fit = fit_log_series(&spec.t_grid, &re, 1, spec.max_rel_err, spec.jackknife_blocks, "fiber")?;
    let moments: Vec<FiberPoint> = (0..idx.len())
        .map(|k| {
            let re: Vec<f64> = rows.iter().map(|r| r[k].re).collect();
            let im: Vec<f64> = rows.iter().map(|r| r[k].im).collect();
            FiberPoint { t: spec.t_grid[k], re: McEstimate::from_samples(&re), im: McEstimate::from_samples(&im) }
        })
        .collect();
    let im_z_score =
        moments.iter().map(|m| if m.im.stderr > 0.0 { m.im.mean.abs() / m.im.stderr } else { 0.0 }).fold(0.0, f64::max);
    Ok(FiberFit { xi, fit, moments, im_z_score })
}

/// `(E(0), m)` from `E(xi) = E(0) + |xi|^2 / (2 m)` on the given profile.
pub fn effective_mass(profile: &[([f64; 3], f64)]) -> Result<(f64, f64)> {
    if profile.len() < 2 {
        return Err(Error::Domain("need at least two momenta".into()));
    }
    let x: Vec<f64> = profile.iter().map(|(xi, _)| xi.iter().map(|v| v * v).sum()).collect();
    let y: Vec<f64> = profile.iter().map(|(_, e)| *e).collect();
    let (slope, e0) = linear_fit(&x, &y);
    Ok((e0, 0.5 / slope))
}

/// CSV body `xi_x,xi_y,xi_z,t,lnZ_re,lnZ_im,stderr,n_paths`; `lnZ_im` is the
/// argument of the complex moment.
pub fn write_fiber_csv(w: impl std::io::Write, fits: &[FiberFit]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Config(e.to_string());
    wr.write_record(["xi_x", "xi_y", "xi_z", "t", "lnZ_re", "lnZ_im", "stderr", "n_paths"]).map_err(err)?;
    for f in fits {
        for (p, m) in f.fit.points.iter().zip(&f.moments) {
            wr.write_record([
                f.xi[0].to_string(),
                f.xi[1].to_string(),
                f.xi[2].to_string(),
                p.t.to_string(),
                p.ln_z.to_string(),
                m.im.mean.atan2(m.re.mean).to_string(),
                p.stderr.to_string(),
                p.n_paths.to_string(),
            ])
            .map_err(err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::gaussian_probe;
    use crate::kernel::{AngularRule, Kappa};
    use crate::semigroup::{w_matrix_element, PotentialSpec};

    fn grid(eps: f64) -> MomentumGrid {
        let mut p = ModelParams::default();
        p.kappa = Kappa::Finite(4);
        p.eps = eps;
        p.grid.radial_nodes = 16;
        p.grid.angular = AngularRule::Lebedev(14);
        MomentumGrid::build(&p).unwrap()
    }

    #[test]
    fn vacuum_element_is_exp_action() {
        let g = grid(1.0);
        let path = sample_path(3, 0, 30, 0.01, 1).unwrap();
        let z = vec![C64::new(0.0, 0.0); g.len()];
        let w = fiber_w_matrix_element(&g, &path, 30, &z, &z).unwrap();
        let u = crate::action::action_decomposed(&g, &path, &[[0.0; 3]], 30).unwrap().u_total;
        assert!((w.re - u.exp()).abs() < 1e-13 * u.exp() && w.im == 0.0);
    }

    #[test]
    fn relation_to_position_element() {
        let g = grid(1.0);
        let path = sample_path(3, 5, 30, 0.01, 1).unwrap();
        let x = [0.3, -0.2, 0.5];
        let a = gaussian_probe(&g, C64::new(0.3, 0.2), 1.0, [0.1, 0.0, 0.0]);
        let b = gaussian_probe(&g, C64::new(-0.1, 0.4), 0.7, [0.0, 0.3, 0.0]);
        let pos = w_matrix_element(&g, &path, &[x], 30, &a, &b, &PotentialSpec::Zero).unwrap();
        let bt = path.particle(30, 0);
        let end = [x[0] + bt[0], x[1] + bt[1], x[2] + bt[2]];
        // <zeta(e^{ik.x} a), W^ zeta(e^{ik.(x+B_t)} b)>
        let ga: Vec<C64> = plane_wave(&g, x).iter().zip(&a).map(|(p, v)| p.conj() * v).collect();
        let hb: Vec<C64> = plane_wave(&g, end).iter().zip(&b).map(|(p, v)| p.conj() * v).collect();
        let fib = fiber_w_matrix_element(&g, &path, 30, &ga, &hb).unwrap();
        assert!((pos - fib).norm() < 1e-12 * pos.norm(), "{pos} {fib}");
    }

    #[test]
    fn free_dispersion_and_symmetry() {
        let mut p = ModelParams::default();
        p.eps = 0.0;
        let spec = FiberSpec {
            params: p,
            t_grid: vec![0.25, 0.5, 0.75, 1.0],
            dt: 0.05,
            max_rel_err: 0.5,
            jackknife_blocks: 10,
        };
        let mc = McControls { seed: 4, n_paths: 2000, first_stream: 0, threads: None };
        let plus = fiber_energy([0.5, 0.0, 0.0], &spec, &mc).unwrap();
        let minus = fiber_energy([-0.5, 0.0, 0.0], &spec, &mc).unwrap();
        assert_eq!(plus.fit.energy, minus.fit.energy);
        assert!((plus.fit.energy - 0.125).abs() < 4.0 * plus.fit.energy_err + 1e-3, "{:?}", plus.fit);
        let (e0, m) = effective_mass(&[([0.0; 3], 0.0), ([1.0, 0.0, 0.0], 0.5), ([2.0, 0.0, 0.0], 2.0)]).unwrap();
        assert!(e0.abs() < 1e-14 && (m - 1.0).abs() < 1e-14);
    }
}
