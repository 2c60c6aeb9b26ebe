//! Feynman's complex action along Brownian paths.
//!
//! One pass over the path evolves the one-boson processes and accumulates
//! every term of the action per radial panel of the momentum grid:
//!
//! * the renormalized Ito decomposition `u = -b + c_minus - c_plus + v + m`,
//! * the direct double time integral (finite cutoff only),
//! * per-panel values, so a sharp cutoff at any panel edge is read off
//!   without re-running the path.
//!
//! Particle offsets enter only through differences `x_j - x_1`; for a single
//! particle the action is therefore independent of the offset bit for bit.

use crate::error::{Error, Result};
use crate::fieldstate::{
    combine, init_states, offset_phases, plane_wave, step_states, MomentumGrid, Process, StateBundle, StepCoefs,
};
use crate::kernel::{ChiProfile, Kappa, ModelParams};
use crate::mc::{linear_fit, run_paths, McControls, McEstimate};
use crate::paths::{sample_path, BrownianPath};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::ops::Range;

/// Contribution of one radial panel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelTerms {
    pub b: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub v: f64,
    pub m: f64,
    /// Double time integral, before the energy subtraction.
    pub direct: f64,
    /// `sum weight f beta` over the panel.
    pub e_ren: f64,
}

impl PanelTerms {
    pub fn u(&self) -> f64 {
        -self.b + self.c_minus - self.c_plus + self.v + self.m
    }

    fn add(&mut self, o: &PanelTerms) {
        self.b += o.b;
        self.c_minus += o.c_minus;
        self.c_plus += o.c_plus;
        self.v += o.v;
        self.m += o.m;
        self.direct += o.direct;
        self.e_ren += o.e_ren;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionBreakdown {
    pub b: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub v: f64,
    pub m: f64,
    pub u_total: f64,
    pub u_direct: Option<f64>,
    pub t: f64,
    pub params: ModelParams,
}

/// Per-panel terms at one grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t_index: usize,
    pub t: f64,
    pub panels: Vec<PanelTerms>,
}

impl Snapshot {
    pub fn sum(&self, panels: Range<usize>) -> PanelTerms {
        let mut s = PanelTerms::default();
        for p in &self.panels[panels] {
            s.add(p);
        }
        s
    }

    pub fn total(&self) -> PanelTerms {
        self.sum(0..self.panels.len())
    }

    /// Decomposed action restricted to `panels`.
    pub fn u_total(&self, panels: Range<usize>) -> f64 {
        self.panels[panels].iter().map(PanelTerms::u).sum()
    }

    /// Direct action restricted to `panels`, including the energy subtraction.
    pub fn u_direct(&self, panels: Range<usize>, n_particles: usize) -> f64 {
        let s = self.sum(panels);
        s.direct - self.t * n_particles as f64 * s.e_ren
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Accumulate the direct double integral.
    pub direct: bool,
    /// Record a snapshot every this many steps.
    pub snapshot_every: Option<usize>,
    /// Largest admissible `|u|` of the top panel when there is no cutoff.
    pub tail_tol: f64,
    /// Return `U^{N,+-}` at the final time.
    pub keep_fields: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { direct: true, snapshot_every: None, tail_tol: 0.5, keep_fields: false }
    }
}

#[derive(Clone, Debug)]
pub struct PathEvaluation {
    pub last: Snapshot,
    pub snapshots: Vec<Snapshot>,
    pub n_particles: usize,
    /// Largest imaginary part seen in any `d`-vector.
    pub d_imag_max: f64,
    /// `U^{N,+}_t[x, alpha]` with the absolute offsets.
    pub u_plus: Option<Vec<C64>>,
    pub u_minus: Option<Vec<C64>>,
    pub params: ModelParams,
}

impl PathEvaluation {
    pub fn breakdown(&self) -> ActionBreakdown {
        breakdown_of(&self.last, &self.params, self.n_particles)
    }

    /// `|u|` carried by the top radial panel.
    pub fn tail(&self) -> f64 {
        self.last.panels.last().map(|p| p.u().abs()).unwrap_or(0.0)
    }
}

fn breakdown_of(s: &Snapshot, params: &ModelParams, n: usize) -> ActionBreakdown {
    let tot = s.total();
    ActionBreakdown {
        b: tot.b,
        c_minus: tot.c_minus,
        c_plus: tot.c_plus,
        v: tot.v,
        m: tot.m,
        u_total: s.u_total(0..s.panels.len()),
        u_direct: params.kappa.is_finite().then(|| s.u_direct(0..s.panels.len(), n)),
        t: s.t,
        params: params.clone(),
    }
}

fn panel_ranges(grid: &MomentumGrid) -> Vec<Range<usize>> {
    let mut out = vec![0..0; grid.n_panels()];
    let mut start = 0;
    for n in 1..=grid.len() {
        if n == grid.len() || grid.panel[n] != grid.panel[start] {
            out[grid.panel[start]] = start..n;
            start = n;
        }
    }
    out
}

struct Walker<'a> {
    grid: &'a MomentumGrid,
    ranges: Vec<Range<usize>>,
    xp: Vec<Vec<C64>>,
    /// `weight * beta_band`.
    wb: Vec<f64>,
    /// `weight * omega * beta_band^2`.
    wwb2: Vec<f64>,
    e_ren: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn pair_w(&self, p: &[Vec<C64>]) -> Vec<f64> {
        let n = p.len();
        self.ranges
            .iter()
            .map(|r| {
                let mut acc = 0.0;
                for nn in r.clone() {
                    let mut s = 0.0;
                    for j in 0..n {
                        for l in j + 1..n {
                            s += (p[j][nn].conj() * p[l][nn]).re;
                        }
                    }
                    acc += self.wwb2[nn] * s;
                }
                acc
            })
            .collect()
    }

    fn snapshot(
        &self,
        bundle: &StateBundle,
        p_cur: &[Vec<C64>],
        acc: &[PanelTerms],
        t_index: usize,
        t: f64,
    ) -> Snapshot {
        let up = combine(bundle, Process::Uplus, &self.xp);
        let um = combine(bundle, Process::Uminus, &self.xp);
        let mut panels = acc.to_vec();
        for (ip, r) in self.ranges.iter().enumerate() {
            let (mut b, mut cp, mut cm) = (0.0, 0.0, 0.0);
            for nn in r.clone() {
                let a: C64 = self.xp.iter().map(|v| v[nn]).sum();
                let bb: C64 = p_cur.iter().map(|v| v[nn]).sum();
                let theta = a.norm_sqr() + bb.norm_sqr() - 2.0 * bundle.damp[nn] * (a.conj() * bb).re;
                let beta = self.grid.beta_band[nn];
                b += 0.5 * self.wb[nn] * beta * theta;
                cp += self.wb[nn] * (up[nn].conj() * bb).re;
                cm += self.wb[nn] * (a.conj() * um[nn]).re;
            }
            panels[ip].b = b;
            panels[ip].c_plus = cp;
            panels[ip].c_minus = cm;
            panels[ip].e_ren = self.e_ren[ip];
        }
        Snapshot { t_index, t, panels }
    }
}

/// Walk `path` up to node `t_index` from offsets `x` and accumulate the action.
pub fn evaluate(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
    opts: &EvalOptions,
) -> Result<PathEvaluation> {
    let n = path.n_particles;
    if x.len() != n {
        return Err(Error::Index(format!("{} offsets for {n} particles", x.len())));
    }
    if t_index > path.n_steps {
        return Err(Error::Index(format!("time index {t_index} beyond {} steps", path.n_steps)));
    }
    let rel: Vec<[f64; 3]> = x.iter().map(|v| [v[0] - x[0][0], v[1] - x[0][1], v[2] - x[0][2]]).collect();
    let ranges = panel_ranges(grid);
    let e_ren = ranges.iter().map(|r| r.clone().map(|nn| grid.weight[nn] * grid.f[nn] * grid.beta[nn]).sum()).collect();
    let w = Walker {
        grid,
        xp: offset_phases(grid, &rel),
        wb: (0..grid.len()).map(|nn| grid.weight[nn] * grid.beta_band[nn]).collect(),
        wwb2: (0..grid.len()).map(|nn| grid.weight[nn] * grid.omega[nn] * grid.beta_band[nn].powi(2)).collect(),
        e_ren,
        ranges,
    };
    let coefs = StepCoefs::new(grid, path.dt);
    let dt = path.dt;
    let mut bundle = init_states(grid, n);
    let mut p_cur = w.xp.clone();
    let mut p_next = w.xp.clone();
    let mut acc = vec![PanelTerms::default(); grid.n_panels()];
    let mut w_prev = if n > 1 { w.pair_w(&p_cur) } else { Vec::new() };
    let mut snapshots = Vec::new();
    let mut d_imag_max = 0.0f64;
    let mut dbs = vec![[0.0; 3]; n];
    for i in 0..t_index {
        let s_n = combine(&bundle, Process::S, &w.xp);
        let u0 = if opts.direct { combine(&bundle, Process::Uplus, &w.xp) } else { Vec::new() };
        for (l, db) in dbs.iter_mut().enumerate() {
            *db = path.increment(i, l);
        }
        // left-point martingale increment sum_l d^{[l]} . db_l
        let mut imag = vec![[0.0f64; 3]; n];
        for (ip, r) in w.ranges.iter().enumerate() {
            let mut mp = 0.0;
            for nn in r.clone() {
                let k = grid.k[nn];
                let sc = s_n[nn].conj();
                let mut s = 0.0;
                for l in 0..n {
                    let z = sc * p_cur[l][nn];
                    let db = dbs[l];
                    s -= (k[0] * db[0] + k[1] * db[1] + k[2] * db[2]) * z.im;
                    for c in 0..3 {
                        imag[l][c] += k[c] * w.wb[nn] * z.re;
                    }
                }
                mp += w.wb[nn] * s;
            }
            acc[ip].m += mp;
        }
        for v in imag.iter().flatten() {
            d_imag_max = d_imag_max.max(v.abs());
        }
        step_states(&mut bundle, grid, &coefs, path)?;
        for j in 0..n {
            for nn in 0..grid.len() {
                p_next[j][nn] = w.xp[j][nn] * bundle.phase[j][nn];
            }
        }
        if opts.direct {
            for (ip, r) in w.ranges.iter().enumerate() {
                let mut dsum = 0.0;
                for nn in r.clone() {
                    let pc: C64 = p_cur.iter().map(|v| v[nn]).sum();
                    let pn: C64 = p_next.iter().map(|v| v[nn]).sum();
                    let q = pn - pc;
                    let [p1, p2, p3, p4] = coefs.phi[nn];
                    let fd = grid.f[nn] * dt;
                    let j = (u0[nn].conj() * (pc * p1 + q * (p1 - p2))).re * fd
                        + fd * fd * ((pc.norm_sqr() + (pc.conj() * q).re) * p2 + q.norm_sqr() * (p3 - p4));
                    dsum += grid.weight[nn] * j;
                }
                acc[ip].direct += dsum;
            }
        }
        if n > 1 {
            let w_next = w.pair_w(&p_next);
            for ip in 0..acc.len() {
                acc[ip].v += dt * (w_prev[ip] + w_next[ip]);
            }
            w_prev = w_next;
        }
        std::mem::swap(&mut p_cur, &mut p_next);
        if let Some(every) = opts.snapshot_every {
            if every > 0 && (i + 1) % every == 0 && i + 1 < t_index {
                snapshots.push(w.snapshot(&bundle, &p_cur, &acc, i + 1, bundle.t));
            }
        }
    }
    let last = w.snapshot(&bundle, &p_cur, &acc, t_index, t_index as f64 * dt);
    if opts.snapshot_every.is_some_and(|e| e > 0) {
        snapshots.push(last.clone());
    }
    let (u_plus, u_minus) = if opts.keep_fields {
        let shift = plane_wave(grid, x[0]);
        let up = combine(&bundle, Process::Uplus, &w.xp);
        let um = combine(&bundle, Process::Uminus, &w.xp);
        (
            Some(up.iter().zip(&shift).map(|(a, s)| a * s).collect()),
            Some(um.iter().zip(&shift).map(|(a, s)| a * s).collect()),
        )
    } else {
        (None, None)
    };
    let ev =
        PathEvaluation { last, snapshots, n_particles: n, d_imag_max, u_plus, u_minus, params: grid.params.clone() };
    if !grid.params.kappa.is_finite() && grid.params.eps != 0.0 && ev.tail() > opts.tail_tol {
        return Err(Error::GridTail(format!(
            "top radial panel carries |u| = {:.3e} > {:.3e}; raise rho_max or refine",
            ev.tail(),
            opts.tail_tol
        )));
    }
    Ok(ev)
}

/// Renormalized Ito decomposition of the action at node `t_index`.
pub fn action_decomposed(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    t_index: usize,
) -> Result<ActionBreakdown> {
    let opts = EvalOptions { direct: grid.params.kappa.is_finite(), ..Default::default() };
    Ok(evaluate(grid, path, x, t_index, &opts)?.breakdown())
}

/// Direct action `sum_{j,l} int <U^+_s[alpha_j], e^{-ik.(x_l+alpha_l)} f> ds - t N E_ren`.
pub fn action_direct(grid: &MomentumGrid, path: &BrownianPath, x: &[[f64; 3]], t_index: usize) -> Result<f64> {
    if !grid.params.kappa.is_finite() {
        return Err(Error::CutoffRequired);
    }
    let ev = evaluate(grid, path, x, t_index, &EvalOptions::default())?;
    Ok(ev.last.u_direct(0..grid.n_panels(), ev.n_particles))
}

/// `(u_lt, u_gt)`: the double time integral over `|k| < Lambda`, and the
/// remainder `u - u_lt` from the band-limited decomposition.
pub fn ir_split(grid: &MomentumGrid, path: &BrownianPath, x: &[[f64; 3]], t_index: usize) -> Result<(f64, f64)> {
    let lambda = grid.params.lambda;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("infrared split needs Lambda > 0, got {lambda}")));
    }
    let ev = evaluate(grid, path, x, t_index, &EvalOptions::default())?;
    let below = grid.panels_below(lambda);
    let s = &ev.last;
    let lt = s.sum(0..below);
    let u_lt = lt.direct;
    let u_gt = s.u_total(0..grid.n_panels()) - s.t * ev.n_particles as f64 * lt.e_ren;
    Ok((u_lt, u_gt))
}

/// Controls of a cutoff-convergence study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    /// Model with a sharp cutoff profile; `kappa` is replaced by infinity.
    pub params: ModelParams,
    pub x: Vec<[f64; 3]>,
    pub n_steps: usize,
    pub dt: f64,
    pub kappas: Vec<u32>,
    pub p: f64,
    pub tail_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub kappa: u32,
    /// `E[sup_s |u_kappa - u_inf|^p]^{1/p}`.
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Slope of `ln estimate` against `ln kappa`.
    pub slope: f64,
}

/// Per-path `sup_s |u_kappa - u_inf|` for every cutoff of `spec`, from a
/// single evaluation on a grid whose panel edges include the cutoffs.
pub fn cutoff_sups(grid: &MomentumGrid, path: &BrownianPath, spec: &ConvergenceSpec) -> Result<Vec<f64>> {
    let opts = EvalOptions { direct: false, snapshot_every: Some(1), tail_tol: spec.tail_tol, keep_fields: false };
    let ev = evaluate(grid, path, &spec.x, path.n_steps, &opts)?;
    let np = grid.n_panels();
    spec.kappas
        .iter()
        .map(|&k| {
            let e = grid.panels_below(k as f64);
            if (grid.panel_edges[e] - k as f64).abs() > 1e-9 * k as f64 {
                return Err(Error::Config(format!("cutoff {k} is not a panel edge")));
            }
            Ok(ev.snapshots.iter().map(|s| s.u_total(e..np).abs()).fold(0.0, f64::max))
        })
        .collect()
}

/// Grid for a cutoff sweep: no cutoff, panel edges at every swept value.
pub fn sweep_grid(spec: &ConvergenceSpec) -> Result<MomentumGrid> {
    if spec.params.chi != ChiProfile::Sharp {
        return Err(Error::Config("cutoff sweeps need the sharp cutoff profile".into()));
    }
    let mut p = spec.params.clone();
    p.kappa = Kappa::Infinite;
    p.grid.extra_breaks.extend(spec.kappas.iter().map(|k| *k as f64));
    MomentumGrid::build(&p)
}

/// Monte Carlo estimate of `E[sup_{s<=t} |u_kappa - u_inf|^p]^{1/p}` with
/// common random numbers across cutoffs.
pub fn action_convergence_stat(spec: &ConvergenceSpec, mc: &McControls) -> Result<ConvergenceTable> {
    if !(spec.p >= 1.0) {
        return Err(Error::Domain(format!("moment order p must be >= 1, got {}", spec.p)));
    }
    let grid = sweep_grid(spec)?;
    let n = spec.params.n_particles;
    let per_path = run_paths(mc, |s| {
        let path = sample_path(mc.seed, s, spec.n_steps, spec.dt, n)?;
        cutoff_sups(&grid, &path, spec)
    })?;
    let mut rows = Vec::new();
    for (ik, &k) in spec.kappas.iter().enumerate() {
        let xs: Vec<f64> = per_path.iter().map(|v| v[ik].powf(spec.p)).collect();
        let e = McEstimate::from_samples(&xs);
        let est = e.mean.powf(1.0 / spec.p);
        let se = if e.mean > 0.0 { est * e.stderr / (spec.p * e.mean) } else { 0.0 };
        rows.push(ConvergenceRow { kappa: k, estimate: est, stderr: se });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| ((r.kappa as f64).ln(), r.estimate.ln())).unzip();
    let slope =
        if rows.len() >= 2 && rows.iter().all(|r| r.estimate > 0.0) { linear_fit(&lx, &ly).0 } else { f64::NAN };
    Ok(ConvergenceTable { rows, slope })
}

/// One line of the action CSV.
#[derive(Clone, Debug, Serialize)]
pub struct ActionCsvRow {
    pub sample_id: usize,
    pub t: f64,
    pub b: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub v: f64,
    pub m: f64,
    pub u_total: f64,
    pub u_direct: Option<f64>,
    pub kappa: String,
    pub seed: u64,
    pub stream: u64,
}

impl ActionCsvRow {
    pub fn new(sample_id: usize, a: &ActionBreakdown, seed: u64, stream: u64) -> Self {
        ActionCsvRow {
            sample_id,
            t: a.t,
            b: a.b,
            c_minus: a.c_minus,
            c_plus: a.c_plus,
            v: a.v,
            m: a.m,
            u_total: a.u_total,
            u_direct: a.u_direct,
            kappa: a.params.kappa.to_string(),
            seed,
            stream,
        }
    }
}

pub fn write_action_csv(w: impl Write, rows: &[ActionCsvRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldstate::phi_functions;
    use crate::kernel::quad::{gauss_legendre, gl_apply};
    use crate::kernel::AngularRule;

    fn params(kappa: Kappa, n: usize) -> ModelParams {
        let mut p = ModelParams::default();
        p.kappa = kappa;
        p.n_particles = n;
        p.grid.radial_nodes = 24;
        p.grid.angular = AngularRule::Lebedev(14);
        p.grid.rho_max = 64.0;
        p
    }

    #[test]
    fn step_kernels_are_exact_double_integrals() {
        // int_0^1 int_0^s e^{-z(s-r)} r^a s^b dr ds
        let rule = gauss_legendre(30);
        for &z in &[0.01, 0.7, 5.0] {
            let ph = phi_functions(z);
            let k = |a: i32, b: i32| {
                gl_apply(&rule, 0.0, 1.0, |s| gl_apply(&rule, 0.0, s, |r| (-z * (s - r)).exp() * r.powi(a)) * s.powi(b))
            };
            assert!((k(0, 0) - ph[1]).abs() < 1e-13);
            assert!((k(0, 1) - (ph[1] - ph[2])).abs() < 1e-13);
            assert!((k(1, 0) - ph[2]).abs() < 1e-13);
            assert!((k(1, 1) - (ph[2] - ph[3])).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_time_and_zero_coupling() {
        let g = MomentumGrid::build(&params(Kappa::Finite(4), 2)).unwrap();
        let path = sample_path(1, 0, 20, 0.01, 2).unwrap();
        let x = [[0.0; 3], [0.5, 0.0, 0.0]];
        let a = action_decomposed(&g, &path, &x, 0).unwrap();
        assert_eq!((a.b, a.c_minus, a.c_plus, a.v, a.m, a.u_total), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(a.u_direct, Some(0.0));
        let mut p = params(Kappa::Finite(4), 2);
        p.eps = 0.0;
        let g0 = MomentumGrid::build(&p).unwrap();
        let a = action_decomposed(&g0, &path, &x, 20).unwrap();
        assert_eq!((a.b, a.c_minus, a.c_plus, a.v, a.m, a.u_direct), (0.0, 0.0, 0.0, 0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn single_particle_has_no_pair_term_and_ignores_offset() {
        let g = MomentumGrid::build(&params(Kappa::Finite(4), 1)).unwrap();
        let path = sample_path(3, 1, 50, 0.01, 1).unwrap();
        let a = action_decomposed(&g, &path, &[[0.0; 3]], 50).unwrap();
        let b = action_decomposed(&g, &path, &[[3.0, -1.0, 2.0]], 50).unwrap();
        assert_eq!(a.v, 0.0);
        assert_eq!(a.u_total, b.u_total);
        assert_eq!(a.u_direct, b.u_direct);
        assert!(a.b >= 0.0);
        let sum = -a.b + a.c_minus - a.c_plus + a.v + a.m;
        assert!((sum - a.u_total).abs() <= 1e-14 * (1.0 + a.u_total.abs()));
    }

    #[test]
    fn direct_needs_cutoff() {
        let g = MomentumGrid::build(&params(Kappa::Infinite, 1)).unwrap();
        let path = sample_path(1, 0, 4, 0.01, 1).unwrap();
        assert!(matches!(action_direct(&g, &path, &[[0.0; 3]], 4), Err(Error::CutoffRequired)));
    }

    #[test]
    fn infrared_split_bound() {
        let mut p = params(Kappa::Finite(2), 2);
        p.lambda = 1.0;
        let g = MomentumGrid::build(&p).unwrap();
        let path = sample_path(9, 2, 1000, 1e-3, 2).unwrap();
        let x = [[0.0; 3], [0.3, 0.2, 0.0]];
        let (lt, gt) = ir_split(&g, &path, &x, 1000).unwrap();
        assert!(lt.abs() <= 4.0 * std::f64::consts::PI * 4.0 * 1.0 * 1.0);
        let full = action_direct(&MomentumGrid::build(&params(Kappa::Finite(2), 2)).unwrap(), &path, &x, 1000).unwrap();
        assert!((lt + gt - full).abs() < 0.1, "{lt} + {gt} vs {full}");
    }

    #[test]
    fn band_beyond_cutoff_is_all_infrared() {
        let mut p = params(Kappa::Finite(4), 2);
        p.lambda = 8.0;
        let g = MomentumGrid::build(&p).unwrap();
        let path = sample_path(4, 0, 50, 0.01, 2).unwrap();
        let x = [[0.0; 3], [0.3, 0.2, 0.0]];
        let (lt, gt) = ir_split(&g, &path, &x, 50).unwrap();
        let direct = action_direct(&g, &path, &x, 50).unwrap();
        let tne = 0.5 * 2.0 * g.renorm_energy();
        assert!((lt - (direct + tne)).abs() < 1e-12 * tne);
        assert!((gt + tne).abs() < 1e-12 * tne);
    }

    #[test]
    fn csv_has_expected_header() {
        let g = MomentumGrid::build(&params(Kappa::Finite(2), 1)).unwrap();
        let path = sample_path(1, 0, 3, 0.01, 1).unwrap();
        let a = action_decomposed(&g, &path, &[[0.0; 3]], 3).unwrap();
        let mut buf = Vec::new();
        write_action_csv(&mut buf, &[ActionCsvRow::new(0, &a, 1, 0)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("sample_id,t,b,c_minus,c_plus,v,m,u_total,u_direct,kappa,seed,stream\n"));
    }
}
