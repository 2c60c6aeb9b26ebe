//! Verification suites. Every check reports a residual and the tolerance it
//! was held to; a failing check is a report entry, not an error.

use super::config::RunConfig;
use crate::action::{action_convergence_stat, evaluate, ConvergenceSpec, EvalOptions, PathEvaluation};
use crate::bounds::{
    lower_formula, pair_lemma_check, pekar_energy, upper_formula, PairMap, PekarMesh, PekarTrial, SeedLaw, PEKAR_ENERGY,
};
use crate::error::{Error, Result};
use crate::fieldstate::{init_states, keith0_check, step_states, MomentumGrid, StepCoefs};
use crate::fock::{
    annihilation_matrix_element, apply_f, apply_weyl, creation_matrix_element, f_norm_on_coherent, gaussian_probe,
    ham_form_element, inner, inner_coherent, CoherentVec, HamContext,
};
use crate::kernel::{ChiProfile, Kappa, ModelParams};
use crate::mc::{linear_fit, run_paths, McControls, McEstimate};
use crate::nonfock::idgross_residual;
use crate::paths::{sample_path, BrownianPath};
use crate::semigroup::{markov_report, PotentialSpec};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    FockAlgebra,
    Identities,
    Moments,
    Convergence,
    Bounds,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::FockAlgebra, Suite::Identities, Suite::Moments, Suite::Convergence, Suite::Bounds];

    pub fn name(self) -> &'static str {
        match self {
            Suite::FockAlgebra => "fock-algebra",
            Suite::Identities => "identities",
            Suite::Moments => "moments",
            Suite::Convergence => "convergence",
            Suite::Bounds => "bounds",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s.trim()).ok_or_else(|| {
            Error::Config(format!("unknown suite '{s}' (fock-algebra | identities | moments | convergence | bounds)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub detail: String,
}

impl Check {
    /// Passes when `residual <= tolerance` (NaN fails).
    pub fn at_most(name: &str, residual: f64, tolerance: f64, seed: u64, detail: String) -> Check {
        Check { name: name.into(), residual, tolerance, passed: residual <= tolerance, seed, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::FockAlgebra => fock_algebra(cfg)?,
        Suite::Identities => identities(cfg)?,
        Suite::Moments => moments(cfg)?,
        Suite::Convergence => convergence(cfg)?,
        Suite::Bounds => bounds(cfg)?,
    };
    Ok(VerifyReport { suite, checks })
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `f^{(order)}(0)` by the trapezoidal Cauchy integral on `|z| = 0.15`;
/// exponentially accurate for entire `f`.
fn cauchy_derivative(f: impl Fn(C64) -> C64, order: u32) -> C64 {
    const M: usize = 64;
    let r = 0.15;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..M {
        let w = C64::from_polar(1.0, 2.0 * PI * j as f64 / M as f64);
        acc += f(w * r) * w.powi(-(order as i32));
    }
    let fact: f64 = (1..=order).map(f64::from).product();
    acc * fact / (M as f64 * r.powi(order as i32))
}

fn random_probe(grid: &MomentumGrid, rng: &mut ChaCha12Rng) -> Vec<C64> {
    let amp = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    gaussian_probe(grid, amp, rng.random_range(0.5..2.0), y)
}

fn finite_grid(cfg: &RunConfig) -> Result<(MomentumGrid, String)> {
    let mut p = cfg.model_params()?;
    let mut note = String::new();
    if !p.kappa.is_finite() {
        p.kappa = Kappa::Finite(4);
        note = "infinite cutoff replaced by 4".into();
    }
    Ok((MomentumGrid::build(&p)?, note))
}

fn fock_algebra(cfg: &RunConfig) -> Result<Vec<Check>> {
    let (grid, note) = finite_grid(cfg)?;
    let seed = cfg.mc.seed;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = grid.len();
    let probes = cfg.experiment.probes.max(1);
    let names = [
        "exponential vector inner product",
        "Weyl unitarity",
        "Weyl product law",
        "F adjoint",
        "F composition",
        "F norm bound",
        "single creation",
        "double creation",
        "annihilation",
        "free field energy",
        "Hamiltonian form",
        "fiber Hamiltonian form",
    ];
    let mut worst = [0.0f64; 12];
    for _ in 0..probes {
        let [a, b, f, g, h] = std::array::from_fn(|_| random_probe(&grid, &mut rng));
        let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let t = rng.random_range(0.1..1.0);
        let s = rng.random_range(0.1..1.0);
        let za = CoherentVec::exp(a.clone());
        let zb = CoherentVec::exp(b.clone());
        let zh = CoherentVec::exp(h.clone());
        let mut r = [0.0f64; 12];

        // sum_n <a,b>^n / n!
        let z = inner(&grid, &a, &b);
        let (mut term, mut series, mut k) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), 0.0);
        while term.norm() > 1e-18 * series.norm().max(1e-300) || k < 2.0 {
            series += term;
            k += 1.0;
            term *= z / k;
        }
        r[0] = rel(inner_coherent(&grid, &za, &zb), series);

        let wa = apply_weyl(&grid, &f, Some(x), &za);
        let wb = apply_weyl(&grid, &f, Some(x), &zb);
        r[1] = rel(inner_coherent(&grid, &wa, &wb), inner_coherent(&grid, &za, &zb));

        let fg: Vec<C64> = f.iter().zip(&g).map(|(p, q)| p + q).collect();
        let lhs = inner_coherent(&grid, &za, &apply_weyl(&grid, &f, None, &apply_weyl(&grid, &g, None, &zh)));
        let phase = C64::new(0.0, -inner(&grid, &f, &g).im).exp();
        r[2] = rel(lhs, phase * inner_coherent(&grid, &za, &apply_weyl(&grid, &fg, None, &zh)));

        let l = inner_coherent(&grid, &apply_f(&grid, &g, t, false, &za)?, &zb);
        r[3] = rel(l, inner_coherent(&grid, &za, &apply_f(&grid, &g, t, true, &zb)?));

        // F(g1, s) F(g2, t) = F(g1 + e^{-s omega} g2, s + t)
        let two = apply_f(&grid, &f, s, false, &apply_f(&grid, &g, t, false, &zh)?)?;
        let comb: Vec<C64> = (0..n).map(|m| f[m] + (-s * grid.omega[m]).exp() * g[m]).collect();
        let one = apply_f(&grid, &comb, s + t, false, &zh)?;
        r[4] = rel(inner_coherent(&grid, &za, &two), inner_coherent(&grid, &za, &one));

        let fh = apply_f(&grid, &g, t, false, &zh)?;
        let ratio = (0.5 * (fh.log_norm_sqr(&grid) - zh.log_norm_sqr(&grid))).exp();
        r[5] = (ratio / f_norm_on_coherent(&grid, &g, t) - 1.0).max(0.0);

        let along = |dir: &[C64], z: C64| -> Vec<C64> { (0..n).map(|m| g[m] + dir[m] * z).collect() };
        let m0 = |gz: &[C64]| creation_matrix_element(&grid, &a, &[], gz, t, &h).unwrap();
        let d1 = cauchy_derivative(|z| m0(&along(&f, z)), 1);
        r[6] = rel(creation_matrix_element(&grid, &a, &[&f], &g, t, &h)?, d1);

        let plus: Vec<C64> = f.iter().zip(&b).map(|(p, q)| p + q).collect();
        let minus: Vec<C64> = f.iter().zip(&b).map(|(p, q)| p - q).collect();
        let d2 =
            (cauchy_derivative(|z| m0(&along(&plus, z)), 2) - cauchy_derivative(|z| m0(&along(&minus, z)), 2)) / 4.0;
        r[7] = rel(creation_matrix_element(&grid, &a, &[&f, &b], &g, t, &h)?, d2);

        // <zeta(a + conj(z) f), zeta(h)> is holomorphic in z
        let ann = |fv: &[C64]| {
            cauchy_derivative(
                |z| {
                    let az: Vec<C64> = (0..n).map(|m| a[m] + fv[m] * z.conj()).collect();
                    inner_coherent(&grid, &CoherentVec::exp(az), &zh)
                },
                1,
            )
        };
        r[8] = rel(annihilation_matrix_element(&grid, &a, &f, &h), ann(&f));

        // -d/dz <zeta(a), Gamma(e^{-z omega}) zeta(h)>
        let gamma = |z: C64| -> C64 {
            let hz: Vec<C64> = (0..n).map(|m| h[m] * (-z * grid.omega[m]).exp()).collect();
            inner(&grid, &a, &hz).exp()
        };
        let free = -cauchy_derivative(gamma, 1);
        r[9] = rel(ham_form_element(&grid, &a, &h, &HamContext::Position(vec![]))?, free);

        let ys = vec![x, [0.0; 3]];
        let mut field_part = C64::new(0.0, 0.0);
        for y in &ys {
            let fy: Vec<C64> =
                crate::fieldstate::plane_wave(&grid, *y).iter().zip(&grid.f).map(|(p, w)| p * w).collect();
            let cre =
                cauchy_derivative(|z| inner(&grid, &a, &(0..n).map(|m| h[m] + fy[m] * z).collect::<Vec<_>>()).exp(), 1);
            field_part += cre + ann(&fy);
        }
        r[10] = rel(ham_form_element(&grid, &a, &h, &HamContext::Position(ys.clone()))?, free + field_part);

        let xi: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        let mom = |c: usize, order: u32| {
            cauchy_derivative(
                |z| {
                    let hz: Vec<C64> = (0..n).map(|m| h[m] * (z * grid.k[m][c]).exp()).collect();
                    inner(&grid, &a, &hz).exp()
                },
                order,
            )
        };
        let e0 = inner(&grid, &a, &h).exp();
        let mut kin = e0 * xi2;
        for (c, xc) in xi.iter().enumerate() {
            kin += -2.0 * xc * mom(c, 1) + mom(c, 2);
        }
        let f0: Vec<C64> = grid.f.iter().map(|v| C64::new(*v, 0.0)).collect();
        let cre0 =
            cauchy_derivative(|z| inner(&grid, &a, &(0..n).map(|m| h[m] + f0[m] * z).collect::<Vec<_>>()).exp(), 1);
        let fiber = 0.5 * kin + free + cre0 + ann(&f0);
        r[11] = rel(ham_form_element(&grid, &a, &h, &HamContext::Fiber(xi))?, fiber);

        for (w, v) in worst.iter_mut().zip(r) {
            *w = if v.is_nan() { f64::NAN } else { w.max(v) };
        }
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, w)| {
            let tol = if *name == "F norm bound" { 1e-12 } else { 1e-10 };
            let mut detail = format!("max relative residual over {probes} probes");
            if !note.is_empty() {
                detail.push_str("; ");
                detail.push_str(&note);
            }
            Check::at_most(name, w, tol, seed, detail)
        })
        .collect())
}

fn fields_eval(grid: &MomentumGrid, path: &BrownianPath, x: &[[f64; 3]], t_index: usize) -> Result<PathEvaluation> {
    evaluate(grid, path, x, t_index, &EvalOptions { direct: true, keep_fields: true, ..Default::default() })
}

fn moved(x: &[[f64; 3]], path: &BrownianPath, t_index: usize) -> Vec<[f64; 3]> {
    x.iter()
        .enumerate()
        .map(|(j, v)| {
            let a = path.particle(t_index, j);
            [v[0] + a[0], v[1] + a[1], v[2] + a[2]]
        })
        .collect()
}

fn max_rel_vec(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(f64::MIN_POSITIVE, f64::max);
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max) / scale
}

fn steps_for(cfg: &RunConfig) -> Result<(usize, f64)> {
    let t = *cfg.t_grid()?.last().unwrap();
    let n = (t / cfg.mc.dt).round() as usize;
    if n < 2 {
        return Err(Error::Config("mc.t / mc.dt must give at least two steps".into()));
    }
    Ok((n, cfg.mc.dt))
}

/// Mean per-path residual at step refinements `8, 4, 2, 1` of `dt` and the
/// fitted log-log order.
#[derive(Clone, Debug, Serialize)]
pub struct OrderStudy {
    pub dts: Vec<f64>,
    pub mean_residual: Vec<f64>,
    pub order: f64,
}

fn order_fit(dts: &[f64], res: &[f64]) -> f64 {
    let lx: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = res.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

const LEVELS: [usize; 4] = [8, 4, 2, 1];

/// Fine paths of `16 m` steps so every coarsening splits evenly in half.
fn fine_steps(t: f64, dt: f64) -> usize {
    ((t / dt / 16.0).round() as usize).max(1) * 16
}

/// `|u_direct - u_decomposed|` under step refinement.
pub fn decomposition_order(
    params: &ModelParams,
    x: &[[f64; 3]],
    t: f64,
    dt: f64,
    mc: &McControls,
) -> Result<OrderStudy> {
    if !params.kappa.is_finite() {
        return Err(Error::CutoffRequired);
    }
    let grid = MomentumGrid::build(params)?;
    let n = fine_steps(t, dt);
    let rows = run_paths(mc, |s| {
        let fine = sample_path(mc.seed, s, n, dt, params.n_particles)?;
        LEVELS
            .iter()
            .map(|&f| {
                let p = fine.coarsen(f)?;
                let b = evaluate(&grid, &p, x, p.n_steps, &EvalOptions::default())?.breakdown();
                Ok((b.u_direct.unwrap() - b.u_total).abs())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let dts: Vec<f64> = LEVELS.iter().map(|f| *f as f64 * dt).collect();
    let mean: Vec<f64> =
        (0..LEVELS.len()).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64).collect();
    Ok(OrderStudy { order: order_fit(&dts, &mean), dts, mean_residual: mean })
}

/// Relative Markov residual at `s = t = T/2` under step refinement.
pub fn markov_order(
    params: &ModelParams,
    x: &[[f64; 3]],
    t: f64,
    dt: f64,
    g: &[C64],
    h: &[C64],
    mc: &McControls,
) -> Result<OrderStudy> {
    let grid = MomentumGrid::build(params)?;
    let n = fine_steps(t, dt);
    let rows = run_paths(mc, |s| {
        let fine = sample_path(mc.seed, s, n, dt, params.n_particles)?;
        LEVELS
            .iter()
            .map(|&f| {
                let p = fine.coarsen(f)?;
                let half = p.n_steps / 2;
                Ok(markov_report(&grid, &p, x, half, half, g, h, &PotentialSpec::Zero)?.rel_residual)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let dts: Vec<f64> = LEVELS.iter().map(|f| *f as f64 * dt).collect();
    let mean: Vec<f64> =
        (0..LEVELS.len()).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64).collect();
    Ok(OrderStudy { order: order_fit(&dts, &mean), dts, mean_residual: mean })
}

fn order_check(name: &str, study: &OrderStudy, seed: u64) -> Check {
    Check::at_most(
        name,
        (study.order - 0.5).abs(),
        0.15,
        seed,
        format!("order {:.3} from mean residuals {:?} at dt {:?}", study.order, study.mean_residual, study.dts),
    )
}

fn identities(cfg: &RunConfig) -> Result<Vec<Check>> {
    let params = cfg.model_params()?;
    if !params.kappa.is_finite() {
        return Err(Error::CutoffRequired);
    }
    let grid = MomentumGrid::build(&params)?;
    let x = cfg.offsets()?;
    let (n_steps, dt) = steps_for(cfg)?;
    let seed = cfg.mc.seed;
    let np = params.n_particles;
    let ctrl = McControls { seed, n_paths: cfg.experiment.identity_paths.max(1), ..Default::default() };
    let half = n_steps / 2;
    let lambda = if cfg.model.lambda > 0.0 { cfg.model.lambda } else { 1.0 };
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed);
    let g = random_probe(&grid, &mut rng);
    let h = random_probe(&grid, &mut rng);
    let rows = run_paths(&ctrl, |s| {
        let path = sample_path(seed, s, n_steps, dt, np)?;
        let fwd = fields_eval(&grid, &path, &x, n_steps)?;
        let rev = fields_eval(&grid, &path.reverse(n_steps)?, &moved(&x, &path, n_steps), n_steps)?;
        let (fp, fm) = (fwd.u_plus.as_ref().unwrap(), fwd.u_minus.as_ref().unwrap());
        let (rp, rm) = (rev.u_plus.as_ref().unwrap(), rev.u_minus.as_ref().unwrap());
        let rev_fields = max_rel_vec(rp, fm).max(max_rel_vec(rm, fp));
        let (uf, ur) = (fwd.breakdown().u_direct.unwrap(), rev.breakdown().u_direct.unwrap());
        let rev_action = (uf - ur).abs() / (1.0 + uf.abs());

        let head = fields_eval(&grid, &path, &x, half)?;
        let tail = fields_eval(&grid, &path.shift(half)?, &moved(&x, &path, half), n_steps - half)?;
        let (t1, s1) = (half as f64 * dt, (n_steps - half) as f64 * dt);
        let (hm, hp) = (head.u_minus.as_ref().unwrap(), head.u_plus.as_ref().unwrap());
        let (tm, tp) = (tail.u_minus.as_ref().unwrap(), tail.u_plus.as_ref().unwrap());
        let um: Vec<C64> = (0..grid.len()).map(|k| hm[k] + (-t1 * grid.omega[k]).exp() * tm[k]).collect();
        let up: Vec<C64> = (0..grid.len()).map(|k| tp[k] + (-s1 * grid.omega[k]).exp() * hp[k]).collect();
        let shift_minus = max_rel_vec(&um, fm);
        let shift_plus = max_rel_vec(&up, fp);
        let cross = inner(&grid, tm, hp).re;
        let flow = tail.breakdown().u_direct.unwrap() + head.breakdown().u_direct.unwrap() + cross;
        let flow_res = (flow - uf).abs() / (1.0 + uf.abs());
        let gross = idgross_residual(&grid, &path, &x, n_steps, &g, &h, lambda, &PotentialSpec::Zero)?.rel_residual;
        Ok([rev_fields, rev_action, shift_minus, shift_plus, flow_res, gross])
    })?;
    let worst = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    let np_txt = format!("max over {} paths, {} steps of {}", ctrl.n_paths, n_steps, dt);
    let mut checks = vec![
        Check::at_most("field reversal", worst(0), 1e-12, seed, np_txt.clone()),
        Check::at_most("action reversal", worst(1), 1e-12, seed, np_txt.clone()),
        Check::at_most("U- shift", worst(2), 1e-12, seed, np_txt.clone()),
        Check::at_most("U+ shift", worst(3), 1e-12, seed, np_txt.clone()),
        Check::at_most("action flow", worst(4), 1e-10, seed, np_txt.clone()),
        Check::at_most("Gross conjugation", worst(5), 1e-6, seed, format!("Lambda = {lambda}; {np_txt}")),
    ];
    let omc = McControls { seed, n_paths: cfg.experiment.order_paths.max(2), ..Default::default() };
    let t = n_steps as f64 * dt;
    let mut p1 = params.clone();
    p1.n_particles = 1;
    checks.push(order_check("Markov property order", &markov_order(&p1, &[[0.0; 3]], t, dt, &g, &h, &omc)?, seed));
    checks.push(order_check("decomposition order", &decomposition_order(&params, &x, t, dt, &omc)?, seed));
    Ok(checks)
}

fn z_check(name: &str, e: &McEstimate, expect: f64, seed: u64) -> Check {
    let z = if e.stderr > 0.0 {
        (e.mean - expect).abs() / e.stderr
    } else if e.mean == expect {
        0.0
    } else {
        f64::INFINITY
    };
    Check::at_most(name, z, 4.0, seed, format!("mean {} +- {} against {}", e.mean, e.stderr, expect))
}

fn moments(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut params = cfg.model_params()?;
    let (n_steps, dt) = steps_for(cfg)?;
    let t = n_steps as f64 * dt;
    let mc = cfg.mc_controls()?;
    let seed = mc.seed;
    let np = params.n_particles;
    let mut checks = Vec::new();

    let sq = run_paths(&mc, |s| {
        let p = sample_path(seed, s, n_steps, dt, np)?;
        let q = sample_path(seed, s + mc.n_paths as u64, n_steps, dt, np)?;
        let b = p.particle(n_steps, 0);
        let (u, v) = (p.increment(0, 0), q.increment(0, 0));
        Ok((b.iter().map(|c| c * c).sum::<f64>(), (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / dt))
    })?;
    let e2 = McEstimate::from_samples(&sq.iter().map(|v| v.0).collect::<Vec<_>>());
    checks.push(z_check("E|b_t|^2 = 3t", &e2, 3.0 * t, seed));
    let ec = McEstimate::from_samples(&sq.iter().map(|v| v.1).collect::<Vec<_>>());
    checks.push(z_check("stream independence", &ec, 0.0, seed));

    if !params.kappa.is_finite() {
        params.kappa = Kappa::Finite(4);
    }
    params.n_particles = 1;
    let grid = MomentumGrid::build(&params)?;
    let coefs = StepCoefs::new(&grid, dt);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x150);
    let hv = random_probe(&grid, &mut rng);
    let x0 = [[0.0; 3]];
    let ito = run_paths(&mc, |s| {
        let path = sample_path(seed, s, n_steps, dt, 1)?;
        let mut bundle = init_states(&grid, 1);
        let mut qv = 0.0;
        for _ in 0..n_steps {
            let mut comp = [C64::new(0.0, 0.0); 3];
            for nn in 0..grid.len() {
                let z = hv[nn].conj()
                    * bundle.phase[0][nn]
                    * C64::new(0.0, grid.weight[nn] * bundle.damp[nn] * grid.beta[nn]);
                for c in 0..3 {
                    comp[c] += z * grid.k[nn][c];
                }
            }
            qv += dt * comp.iter().map(|z| z.norm_sqr()).sum::<f64>();
            step_states(&mut bundle, &grid, &coefs, &path)?;
        }
        let xm = inner(&grid, &hv, &bundle.m_minus[0]);
        let d = crate::fieldstate::d_vector(&bundle, &grid, &x0, 0)?;
        let k = keith0_check(&grid, &path, &x0, -0.25, 1.0)?;
        Ok((xm.norm_sqr() - qv, d, k.lhs - k.martingale, k.constant))
    })?;
    let iso = McEstimate::from_samples(&ito.iter().map(|v| v.0).collect::<Vec<_>>());
    checks.push(z_check("Ito isometry of M-", &iso, 0.0, seed));
    let dz = (0..3)
        .map(|c| {
            let e = McEstimate::from_samples(&ito.iter().map(|v| v.1[c]).collect::<Vec<_>>());
            if e.stderr > 0.0 {
                e.mean.abs() / e.stderr
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    checks.push(Check::at_most("d-vector mean", dz, 4.0, seed, "largest component z-score".into()));
    let kl = McEstimate::from_samples(&ito.iter().map(|v| v.2).collect::<Vec<_>>());
    let kc = ito[0].3;
    checks.push(Check::at_most(
        "S-integral bound in mean",
        (kl.mean - kc - 3.0 * kl.stderr).max(0.0),
        0.0,
        seed,
        format!("mean {} +- {} against constant {kc} (a = -1/4, Lambda = 1)", kl.mean, kl.stderr),
    ));
    Ok(checks)
}

fn convergence(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut params = cfg.model_params()?;
    params.chi = ChiProfile::Sharp;
    let (n_steps, dt) = steps_for(cfg)?;
    let mc = cfg.mc_controls()?;
    let seed = mc.seed;
    let kappas = if cfg.experiment.kappas.is_empty() { vec![2, 4, 8, 16, 32] } else { cfg.experiment.kappas.clone() };
    let spec = ConvergenceSpec {
        params: params.clone(),
        x: cfg.offsets()?,
        n_steps,
        dt,
        kappas,
        p: cfg.experiment.p,
        tail_tol: 0.5,
    };
    let table = action_convergence_stat(&spec, &mc)?;
    let increases = table.rows.windows(2).filter(|w| !(w[1].estimate < w[0].estimate)).count();
    let est: Vec<f64> = table.rows.iter().map(|r| r.estimate).collect();
    let mut checks = vec![
        Check::at_most("monotone in kappa", increases as f64, 0.0, seed, format!("estimates {est:?}")),
        Check::at_most(
            "cutoff rate",
            table.slope + 0.25,
            0.15,
            seed,
            format!("log-log slope {:.3} (rate bound -1/4)", table.slope),
        ),
    ];
    let mut fin = params.clone();
    if !fin.kappa.is_finite() {
        fin.kappa = Kappa::Finite(4);
    }
    let omc = McControls { seed, n_paths: cfg.experiment.order_paths.max(2), ..Default::default() };
    let t = n_steps as f64 * dt;
    checks.push(order_check("decomposition order", &decomposition_order(&fin, &spec.x, t, dt, &omc)?, seed));
    Ok(checks)
}

fn bounds(cfg: &RunConfig) -> Result<Vec<Check>> {
    let seed = cfg.mc.seed;
    let v = pekar_energy(&PekarTrial::Gaussian, &PekarMesh::default())?;
    let mut checks = vec![
        Check::at_most(
            "Gaussian Pekar value in (E_P, -0.095]",
            if v.energy > PEKAR_ENERGY && v.energy <= -0.095 { 0.0 } else { 1.0 },
            0.0,
            seed,
            format!("energy {}", v.energy),
        ),
        Check::at_most(
            "Gaussian Pekar closed form",
            (v.energy + 1.0 / (3.0 * PI)).abs(),
            1e-10,
            seed,
            "-1/(3 pi)".into(),
        ),
    ];
    let law = SeedLaw::LogNormal { mu: 0.0, sigma: 0.5 };
    for n in 2..=4 {
        let r = pair_lemma_check(n, law, PairMap::Mean, cfg.experiment.pair_trials, seed)?;
        let z = (r.lhs.mean - r.rhs) / r.lhs.stderr.hypot(r.rhs_stderr).max(f64::MIN_POSITIVE);
        checks.push(Check::at_most(
            &format!("pair lemma N = {n}"),
            z.max(0.0),
            3.0,
            seed,
            format!("E prod = {} +- {}, bound {}", r.lhs.mean, r.lhs.stderr, r.rhs),
        ));
    }
    let worst = [(1.5, 4), (2.0, 2), (1.0, 8)]
        .iter()
        .map(|&(eps, n)| (lower_formula(eps, n, 1.0, 1.0) - upper_formula(eps, n, 0.0, 1.0)).max(0.0))
        .fold(0.0, f64::max);
    checks.push(Check::at_most(
        "lower bound below upper bound",
        worst,
        0.0,
        seed,
        "eps^2 N in {9, 8, 8}, c = 1".into(),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.radial = 16;
        c.grid.angular = "14".into();
        c.mc.dt = 0.01;
        c.mc.t = "0.32".into();
        c.mc.paths = 64;
        c.experiment.probes = 20;
        c.experiment.identity_paths = 2;
        c.experiment.order_paths = 8;
        c.experiment.pair_trials = 20_000;
        c
    }

    #[test]
    fn cauchy_derivatives_of_exponential() {
        let c = C64::new(0.3, -0.7);
        for order in 0..4 {
            let d = cauchy_derivative(|z| (c * z).exp(), order);
            assert!((d - c.powi(order as i32)).norm() < 1e-12, "{order}: {d}");
        }
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn fock_algebra_passes() {
        let r = run_suite(Suite::FockAlgebra, &small()).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
        assert_eq!(r.checks.len(), 12);
    }

    #[test]
    fn exact_identities_pass_on_a_short_run() {
        let r = run_suite(Suite::Identities, &small()).unwrap();
        for c in r.checks.iter().filter(|c| !c.name.contains("order")) {
            assert!(c.passed, "{c:#?}");
        }
    }

    #[test]
    fn moment_checks_pass() {
        let r = run_suite(Suite::Moments, &small()).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
    }

    #[test]
    fn bound_checks_pass() {
        let r = run_suite(Suite::Bounds, &small()).unwrap();
        assert!(r.passed(), "{:#?}", r.checks);
    }
}
