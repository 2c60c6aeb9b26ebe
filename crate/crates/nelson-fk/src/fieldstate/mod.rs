//! One-boson processes on a momentum grid and their time evolution.
//!
//! Within a step the phase `e^{-ik.b_s}` is interpolated linearly between the
//! grid times and integrated exactly against the exponential weights
//! (`phi`-functions of `-omega dt`). The time-grid reversal and shift maps
//! the interpolant onto itself, so reversal and shift identities hold to
//! roundoff. Stochastic integrals (`M`-processes) use left endpoints.

mod grid;

pub use grid::{angular_degree, angular_rule, radial_rule, MomentumGrid};

use crate::error::{Error, Result};
use crate::kernel::mho;
use crate::paths::BrownianPath;
use num_complex::Complex64 as C64;

/// `phi_k(-z)` for `k = 1..=4`, where `phi_0(x) = e^x` and
/// `phi_{k+1}(x) = (phi_k(x) - 1/k!) / x`.
pub fn phi_functions(z: f64) -> [f64; 4] {
    if z.abs() < 0.5 {
        // series phi_k(x) = sum_n x^n / (n+k)!
        let x = -z;
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            let k = k + 1;
            let mut term = 1.0 / (1..=k).map(|i| i as f64).product::<f64>();
            let mut sum = term;
            for n in 1..30 {
                term *= x / (n + k) as f64;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *o = sum;
        }
        return out;
    }
    let x = -z;
    let p1 = (x.exp() - 1.0) / x;
    let p2 = (p1 - 1.0) / x;
    let p3 = (p2 - 0.5) / x;
    let p4 = (p3 - 1.0 / 6.0) / x;
    [p1, p2, p3, p4]
}

/// Per-node constants of one time step of length `dt`.
#[derive(Clone, Debug)]
pub struct StepCoefs {
    pub dt: f64,
    /// `e^{-omega dt}`.
    pub decay: Vec<f64>,
    pub phi: Vec<[f64; 4]>,
}

impl StepCoefs {
    pub fn new(grid: &MomentumGrid, dt: f64) -> StepCoefs {
        let decay = grid.omega.iter().map(|w| (-w * dt).exp()).collect();
        let phi = grid.omega.iter().map(|w| phi_functions(w * dt)).collect();
        StepCoefs { dt, decay, phi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Uminus,
    Uplus,
    Maccum,
    Iaccum,
    S,
    Custom,
}

impl Role {
    /// Whether `sum_k weight omega^w |state|^2`-type pairings are admitted.
    pub fn allows(self, w: f64, kappa_finite: bool) -> bool {
        match self {
            Role::Uminus | Role::Uplus => {
                if kappa_finite {
                    (-1.0..=1.0).contains(&w)
                } else {
                    (-1.0..0.0).contains(&w)
                }
            }
            Role::Maccum | Role::S => (-1.0..1.0).contains(&w),
            Role::Iaccum => w > -2.0 && w < 2.0,
            Role::Custom => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Uminus => "Uminus",
            Role::Uplus => "Uplus",
            Role::Maccum => "Maccum",
            Role::Iaccum => "Iaccum",
            Role::S => "S",
            Role::Custom => "custom",
        }
    }
}

/// Node values of a one-boson object.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldValues {
    Scalar(Vec<C64>),
    Vector(Vec<[C64; 3]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub role: Role,
    pub values: FieldValues,
}

impl FieldState {
    pub fn scalar(role: Role, v: Vec<C64>) -> Self {
        FieldState { role, values: FieldValues::Scalar(v) }
    }
}

/// Result of a weighted pairing: scalar or 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pairing {
    Scalar(C64),
    Vector([C64; 3]),
}

/// `sum_k weight conj(A) omega^w B`, checked against the role allowlist.
pub fn weighted_inner(grid: &MomentumGrid, a: &FieldState, b: &FieldState, w: f64) -> Result<Pairing> {
    let fin = grid.params.kappa.is_finite();
    for r in [a.role, b.role] {
        if !r.allows(w, fin) {
            return Err(Error::WeightNotAllowed { role: r.name().into(), weight: w });
        }
    }
    let ow = |n: usize| grid.weight[n] * grid.omega[n].powf(w);
    let zero = C64::new(0.0, 0.0);
    Ok(match (&a.values, &b.values) {
        (FieldValues::Scalar(x), FieldValues::Scalar(y)) => {
            Pairing::Scalar((0..grid.len()).map(|n| x[n].conj() * y[n] * ow(n)).sum())
        }
        (FieldValues::Scalar(x), FieldValues::Vector(y)) => {
            let mut acc = [zero; 3];
            for n in 0..grid.len() {
                for c in 0..3 {
                    acc[c] += x[n].conj() * y[n][c] * ow(n);
                }
            }
            Pairing::Vector(acc)
        }
        (FieldValues::Vector(x), FieldValues::Scalar(y)) => {
            let mut acc = [zero; 3];
            for n in 0..grid.len() {
                for c in 0..3 {
                    acc[c] += x[n][c].conj() * y[n] * ow(n);
                }
            }
            Pairing::Vector(acc)
        }
        (FieldValues::Vector(x), FieldValues::Vector(y)) => Pairing::Scalar(
            (0..grid.len()).map(|n| (0..3).map(|c| x[n][c].conj() * y[n][c]).sum::<C64>() * ow(n)).sum(),
        ),
    })
}

/// `e^{-i k.x}` at every node.
pub fn plane_wave(grid: &MomentumGrid, x: [f64; 3]) -> Vec<C64> {
    grid.k
        .iter()
        .map(|k| {
            let ph = -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            if ph == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                let (s, c) = ph.sin_cos();
                C64::new(c, s)
            }
        })
        .collect()
}

/// Per-particle processes driven by `b_j` (without the offset phase).
#[derive(Clone, Debug)]
pub struct StateBundle {
    pub n_particles: usize,
    pub step: usize,
    pub t: f64,
    /// `e^{-i k.b_j(t)}`.
    pub phase: Vec<Vec<C64>>,
    pub u_minus: Vec<Vec<C64>>,
    pub u_plus: Vec<Vec<C64>>,
    /// `int e^{-s omega - ik.b_s} i k beta . db_s`.
    pub m_minus: Vec<Vec<C64>>,
    /// `int e^{-(t-s) omega - ik.b_s} i k beta . db_s`.
    pub m_tau: Vec<Vec<C64>>,
    pub i_acc: Vec<Vec<C64>>,
    /// `e^{-t omega}`.
    pub damp: Vec<f64>,
}

/// All processes zero at time 0.
pub fn init_states(grid: &MomentumGrid, n_particles: usize) -> StateBundle {
    let z = vec![C64::new(0.0, 0.0); grid.len()];
    let zs = vec![z.clone(); n_particles];
    StateBundle {
        n_particles,
        step: 0,
        t: 0.0,
        phase: vec![vec![C64::new(1.0, 0.0); grid.len()]; n_particles],
        u_minus: zs.clone(),
        u_plus: zs.clone(),
        m_minus: zs.clone(),
        m_tau: zs.clone(),
        i_acc: zs,
        damp: vec![1.0; grid.len()],
    }
}

/// Phase `e^{-ik.b}` at every node for a particle position.
pub fn phases_at(grid: &MomentumGrid, b: [f64; 3], out: &mut [C64]) {
    for (o, k) in out.iter_mut().zip(&grid.k) {
        let (s, c) = (-(k[0] * b[0] + k[1] * b[1] + k[2] * b[2])).sin_cos();
        *o = C64::new(c, s);
    }
}

/// Advance the bundle over step `bundle.step` of `path`.
pub fn step_states(
    bundle: &mut StateBundle,
    grid: &MomentumGrid,
    coefs: &StepCoefs,
    path: &BrownianPath,
) -> Result<()> {
    let i = bundle.step;
    if i >= path.n_steps {
        return Err(Error::Index(format!("step {i} beyond path length {}", path.n_steps)));
    }
    let dt = coefs.dt;
    let mut next = vec![C64::new(0.0, 0.0); grid.len()];
    for j in 0..bundle.n_particles {
        phases_at(grid, path.particle(i + 1, j), &mut next);
        let db = path.increment(i, j);
        let e = &bundle.phase[j];
        let (um, up, mm, mt, ia) = (
            &mut bundle.u_minus[j],
            &mut bundle.u_plus[j],
            &mut bundle.m_minus[j],
            &mut bundle.m_tau[j],
            &mut bundle.i_acc[j],
        );
        for n in 0..grid.len() {
            let [p1, p2, _, _] = coefs.phi[n];
            let dec = coefs.decay[n];
            let near = e[n] * (p1 - p2) + next[n] * p2;
            let far = e[n] * p2 + next[n] * (p1 - p2);
            let f = grid.f[n] * dt;
            up[n] = up[n] * dec + near * f;
            um[n] += far * (f * bundle.damp[n]);
            let k = grid.k[n];
            let kdb = k[0] * db[0] + k[1] * db[1] + k[2] * db[2];
            let dm = e[n] * C64::new(0.0, kdb * grid.beta[n]);
            mm[n] += dm * bundle.damp[n];
            mt[n] = (mt[n] + dm) * dec;
            ia[n] = ia[n] * dec + near * (2.0 * grid.omega[n] * grid.beta[n] * dt);
        }
        bundle.phase[j].copy_from_slice(&next);
    }
    for (d, dec) in bundle.damp.iter_mut().zip(&coefs.decay) {
        *d *= dec;
    }
    bundle.step += 1;
    bundle.t = bundle.step as f64 * dt;
    Ok(())
}

/// Which per-particle process to combine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Process {
    Uminus,
    Uplus,
    Mminus,
    Mtau,
    I,
    /// `M^{[t]} - I`.
    S,
}

/// `sum_j xphase_j * X_j`, the `N`-particle version of a process.
pub fn combine(bundle: &StateBundle, which: Process, xphase: &[Vec<C64>]) -> Vec<C64> {
    let len = bundle.damp.len();
    let mut out = vec![C64::new(0.0, 0.0); len];
    for j in 0..bundle.n_particles {
        let src: Box<dyn Fn(usize) -> C64 + '_> = match which {
            Process::Uminus => Box::new(|n| bundle.u_minus[j][n]),
            Process::Uplus => Box::new(|n| bundle.u_plus[j][n]),
            Process::Mminus => Box::new(|n| bundle.m_minus[j][n]),
            Process::Mtau => Box::new(|n| bundle.m_tau[j][n]),
            Process::I => Box::new(|n| bundle.i_acc[j][n]),
            Process::S => Box::new(|n| bundle.m_tau[j][n] - bundle.i_acc[j][n]),
        };
        for (n, o) in out.iter_mut().enumerate() {
            *o += xphase[j][n] * src(n);
        }
    }
    out
}

/// Offset phases `e^{-ik.x_j}` for every particle.
pub fn offset_phases(grid: &MomentumGrid, x: &[[f64; 3]]) -> Vec<Vec<C64>> {
    x.iter().map(|xj| plane_wave(grid, *xj)).collect()
}

/// `d^{[l]} = sum_k weight conj(S^N) e^{-ik.(x_l + b_l)} i k beta_band`, with
/// the largest imaginary part as a diagnostic.
pub fn d_vector_from(grid: &MomentumGrid, s_n: &[C64], p_l: &[C64]) -> ([f64; 3], f64) {
    let mut re = [0.0; 3];
    let mut im = [0.0; 3];
    for n in 0..grid.len() {
        let z = s_n[n].conj() * p_l[n] * C64::new(0.0, grid.weight[n] * grid.beta_band[n]);
        for c in 0..3 {
            re[c] += grid.k[n][c] * z.re;
            im[c] += grid.k[n][c] * z.im;
        }
    }
    (re, im.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// The `d`-vector of particle `l` for offsets `x` at the bundle's time.
pub fn d_vector(bundle: &StateBundle, grid: &MomentumGrid, x: &[[f64; 3]], l: usize) -> Result<[f64; 3]> {
    if l >= bundle.n_particles || x.len() != bundle.n_particles {
        return Err(Error::Index(format!("particle {l} of {}", bundle.n_particles)));
    }
    let xp = offset_phases(grid, x);
    let s = combine(bundle, Process::S, &xp);
    let p_l: Vec<C64> = (0..grid.len()).map(|n| xp[l][n] * bundle.phase[l][n]).collect();
    Ok(d_vector_from(grid, &s, &p_l).0)
}

/// Outcome of the weighted `S`-integral inequality on one path.
#[derive(Clone, Copy, Debug)]
pub struct Keith0Report {
    /// `int_0^t ||1_Lambda omega^{a+1/2} S^N||^2 ds`.
    pub lhs: f64,
    /// The martingale term.
    pub martingale: f64,
    /// `2 mho eps^2 N^2 t + (N t/2) ||1_Lambda omega^a i k beta||^2`.
    pub constant: f64,
    pub holds: bool,
}

/// Integrate the `S`-process along `path` and evaluate both sides of the
/// bound `int ||omega^{a+1/2} S||^2 <= l_t + const`.
pub fn keith0_check(
    grid: &MomentumGrid,
    path: &BrownianPath,
    x: &[[f64; 3]],
    a: f64,
    lambda: f64,
) -> Result<Keith0Report> {
    let n_p = path.n_particles;
    let coefs = StepCoefs::new(grid, path.dt);
    let mut bundle = init_states(grid, n_p);
    let xp = offset_phases(grid, x);
    let band: Vec<f64> = grid.rho.iter().map(|r| if *r >= lambda { 1.0 } else { 0.0 }).collect();
    let w_lhs: Vec<f64> =
        (0..grid.len()).map(|n| grid.weight[n] * band[n] * grid.omega[n].powf(2.0 * a + 1.0)).collect();
    let w_mart: Vec<f64> = (0..grid.len()).map(|n| grid.weight[n] * band[n] * grid.omega[n].powf(2.0 * a)).collect();
    let mut lhs = 0.0;
    let mut mart = 0.0;
    let mut prev = 0.0;
    for i in 0..path.n_steps {
        let s = combine(&bundle, Process::S, &xp);
        let cur: f64 = (0..grid.len()).map(|n| w_lhs[n] * s[n].norm_sqr()).sum();
        if i > 0 {
            lhs += 0.5 * (prev + cur) * path.dt;
        }
        prev = cur;
        for j in 0..n_p {
            let db = path.increment(i, j);
            let mut acc = 0.0;
            for n in 0..grid.len() {
                let k = grid.k[n];
                let kdb = k[0] * db[0] + k[1] * db[1] + k[2] * db[2];
                let z = s[n].conj() * xp[j][n] * bundle.phase[j][n] * C64::new(0.0, kdb * grid.beta[n]);
                acc += w_mart[n] * z.re;
            }
            mart += acc;
        }
        step_states(&mut bundle, grid, &coefs, path)?;
    }
    let s = combine(&bundle, Process::S, &xp);
    let cur: f64 = (0..grid.len()).map(|n| w_lhs[n] * s[n].norm_sqr()).sum();
    lhs += 0.5 * (prev + cur) * path.dt;
    let t = path.t_final();
    let nn = n_p as f64;
    let eps = grid.params.eps;
    let kb: f64 = (0..grid.len()).map(|n| w_mart[n] * grid.rho[n].powi(2) * grid.beta[n].powi(2)).sum();
    let constant = 2.0 * mho(lambda, a)? * eps * eps * nn * nn * t + 0.5 * nn * t * kb;
    Ok(Keith0Report { lhs, martingale: mart, constant, holds: lhs <= mart + constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kappa, ModelParams};
    use crate::paths::sample_path;

    fn small_grid(kappa: u32) -> MomentumGrid {
        let mut p = ModelParams::default();
        p.kappa = Kappa::Finite(kappa);
        p.grid.radial_nodes = 16;
        p.grid.angular = crate::kernel::AngularRule::Lebedev(14);
        MomentumGrid::build(&p).unwrap()
    }

    #[test]
    fn phi_functions_match_integrals() {
        for &z in &[1e-8, 0.3, 0.49, 0.51, 2.0, 30.0] {
            let ph = phi_functions(z);
            let rule = crate::kernel::quad::gauss_legendre(40);
            for (k, v) in ph.iter().enumerate() {
                // phi_k(-z) = int_0^1 e^{-z(1-s)} s^{k-1}/(k-1)! ds
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                let q = crate::kernel::quad::gl_apply(&rule, 0.0, 1.0, |s| {
                    (-z * (1.0 - s)).exp() * s.powi(k as i32) / fact
                });
                assert!((v - q).abs() < 1e-13 * q.abs().max(1e-3), "z={z} k={} {v} {q}", k + 1);
            }
        }
    }

    #[test]
    fn zero_states_stay_zero_without_coupling() {
        let mut p = ModelParams::default();
        p.eps = 0.0;
        p.grid.radial_nodes = 8;
        let g = MomentumGrid::build(&p).unwrap();
        let path = sample_path(1, 0, 10, 0.01, 1).unwrap();
        let c = StepCoefs::new(&g, 0.01);
        let mut b = init_states(&g, 1);
        for _ in 0..10 {
            step_states(&mut b, &g, &c, &path).unwrap();
        }
        assert!(b.u_plus[0].iter().chain(&b.m_tau[0]).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn one_step_from_rest() {
        let g = small_grid(4);
        let mut path = sample_path(1, 0, 1, 1e-3, 1).unwrap();
        path.values.iter_mut().for_each(|v| *v = 0.0);
        let c = StepCoefs::new(&g, 1e-3);
        let mut b = init_states(&g, 1);
        step_states(&mut b, &g, &c, &path).unwrap();
        for n in 0..g.len() {
            // int_0^dt e^{-(dt-s) omega} ds f
            let exact = g.f[n] * c.phi[n][0] * 1e-3;
            assert!((b.u_plus[0][n].re - exact).abs() < 1e-15 * exact.abs().max(1.0));
            assert!((b.u_plus[0][n].re - 1e-3 * g.f[n]).abs() < 1e-5 * g.f[n].abs().max(1.0));
        }
    }

    #[test]
    fn weight_allowlist() {
        let mut p = ModelParams::default();
        p.kappa = Kappa::Infinite;
        p.grid.rho_max = 16.0;
        p.grid.radial_nodes = 8;
        let g = MomentumGrid::build(&p).unwrap();
        let u = FieldState::scalar(Role::Uplus, vec![C64::new(1.0, 0.0); g.len()]);
        assert!(matches!(weighted_inner(&g, &u, &u, 0.0), Err(Error::WeightNotAllowed { .. })));
        assert!(weighted_inner(&g, &u, &u, -1.0).is_ok());
    }

    #[test]
    fn d_vanishes_at_time_zero() {
        let g = small_grid(4);
        let b = init_states(&g, 2);
        assert_eq!(d_vector(&b, &g, &[[0.0; 3], [1.0, 0.0, 0.0]], 1).unwrap(), [0.0; 3]);
    }
}
