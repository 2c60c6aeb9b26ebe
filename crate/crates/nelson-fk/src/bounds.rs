//! Closed-form bounds: exponential moments, spectral bounds, the Pekar
//! functional, and the moment inequality for products of pair variables.
//!
//! Unspecified universal constants default to 1.

use crate::error::{Error, Result};
use crate::kernel::quad::{gauss_legendre, j0};
use crate::mc::{run_paths, McControls, McEstimate};
use crate::paths::NormalStream;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Numerical value of the Pekar minimum.
pub const PEKAR_ENERGY: f64 = -0.10851;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub b: f64,
    pub c: f64,
    /// Second exponent of the running-supremum constant.
    pub q: f64,
    /// Exponential rate contributed by the negative part of the potential.
    pub potential_rate: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { b: 1.0, c: 1.0, q: 2.0, potential_rate: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentBound {
    /// `E[sup e^{p u}] <= b^N e^{c p^2 eps^4 N^3 t}`.
    Action,
    /// `E[sup e^{p ||U||^2}] <= b^N (1 + p eps^2 N (1 v t))^N e^{c p eps^2 N^2 (1 + ln(1 v t)) + c p^2 eps^4 N^3}`.
    Fields,
    /// `E[sup ||W||^p] <= e^{c p^2 eps^4 N^3 (1 v t) + A(p eps^2, N, t) + c_V t}`.
    Integrand,
    /// `c_{p,q} = [1 + (4 ^ q)(pi/q)/sin(pi/q)]^{1/p'}`.
    RunningSup,
}

/// `A(q, N, t) = c N (1 + ln[1 + q N (1 v t)]) + c q N^2 (1 + ln[1 v t])`.
pub fn log_growth(q: f64, n: usize, t: f64, c: f64) -> f64 {
    let n = n as f64;
    let tt = t.max(1.0);
    c * n * (1.0 + (1.0 + q * n * tt).ln()) + c * q * n * n * (1.0 + tt.ln())
}

/// Right-hand side of the chosen exponential moment bound.
pub fn exp_moment_rhs(which: MomentBound, p: f64, eps: f64, n: usize, t: f64, k: &BoundConstants) -> Result<f64> {
    if !(p > 0.0) || !eps.is_finite() || n == 0 || !(t >= 0.0) {
        return Err(Error::Domain(format!("need p > 0, finite eps, N >= 1, t >= 0 (p={p}, eps={eps}, N={n}, t={t})")));
    }
    let nf = n as f64;
    let e2 = eps * eps;
    let tt = t.max(1.0);
    Ok(match which {
        MomentBound::Action => k.b.powf(nf) * (k.c * p * p * e2 * e2 * nf.powi(3) * t).exp(),
        MomentBound::Fields => {
            k.b.powf(nf)
                * (1.0 + p * e2 * nf * tt).powf(nf)
                * (k.c * p * e2 * nf * nf * (1.0 + tt.ln()) + k.c * p * p * e2 * e2 * nf.powi(3)).exp()
        }
        MomentBound::Integrand => {
            (k.c * p * p * e2 * e2 * nf.powi(3) * tt + log_growth(p * e2, n, t, k.c) + k.potential_rate * t).exp()
        }
        MomentBound::RunningSup => {
            let q = k.q;
            if !(p > 1.0 && q > 1.0) {
                return Err(Error::Domain(format!("running-supremum constant needs p, q > 1 (p={p}, q={q})")));
            }
            let p_conj = p / (p - 1.0);
            (1.0 + q.min(4.0) * (PI / q) / (PI / q).sin()).powf(1.0 / p_conj)
        }
    })
}

/// Leading lower-bound coefficient `-256 pi^2`.
pub fn lower_leading() -> f64 {
    -256.0 * PI * PI
}

/// Leading upper-bound coefficient `8 pi^4 E_P`.
pub fn upper_leading() -> f64 {
    8.0 * PI.powi(4) * PEKAR_ENERGY
}

/// `-256 pi^2 q eps^4 N^3 - c eps^2 N^2` without the regime check.
pub fn lower_formula(eps: f64, n: usize, q: f64, c: f64) -> f64 {
    let (e2, nf) = (eps * eps, n as f64);
    lower_leading() * q * e2 * e2 * nf.powi(3) - c * e2 * nf * nf
}

/// `8 pi^4 eps^4 N^3 E_P + c (1 + mu + ln(eps^2 N)) eps^2 N^2` without the regime check.
pub fn upper_formula(eps: f64, n: usize, mu: f64, c: f64) -> f64 {
    let (e2, nf) = (eps * eps, n as f64);
    upper_leading() * e2 * e2 * nf.powi(3) + c * (1.0 + mu + (e2 * nf).ln()) * e2 * nf * nf
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub lower: f64,
    /// Present when `eps^2 N > 4`.
    pub upper: Option<f64>,
}

/// Bounds on the bottom of the spectrum, valid for `eps^2 N >= 1`.
pub fn spectral_bounds(eps: f64, n: usize, mu: f64, k: &BoundConstants) -> Result<SpectralBounds> {
    let s = eps * eps * n as f64;
    if !(s >= 1.0) {
        return Err(Error::Regime(format!("eps^2 N = {s} < 1: the lower bound is not established")));
    }
    Ok(SpectralBounds {
        lower: lower_formula(eps, n, 1.0, k.c),
        upper: (s > 4.0).then(|| upper_formula(eps, n, mu, k.c)),
    })
}

/// Radial trial profiles for the Pekar functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PekarTrial {
    /// `exp(-r^2 / 2)`.
    Gaussian,
    /// `exp(-r)`.
    Hydrogenic,
    /// Piecewise linear in `r`, zero beyond the table.
    Tabulated { r: Vec<f64>, g: Vec<f64> },
}

impl PekarTrial {
    fn check(&self) -> Result<()> {
        if let PekarTrial::Tabulated { r, g } = self {
            if r.len() < 2 || r.len() != g.len() || r[0] != 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Normalization("tabulated profile needs increasing radii from 0".into()));
            }
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !(gmax > 0.0) || g.iter().any(|v| !v.is_finite()) || g[g.len() - 1].abs() > 1e-6 * gmax {
                return Err(Error::Normalization(
                    "tabulated profile must be finite, nonzero and vanish at the end".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(g(r), g'(r))`.
    fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            PekarTrial::Gaussian => {
                let e = (-0.5 * r * r).exp();
                (e, -r * e)
            }
            PekarTrial::Hydrogenic => {
                let e = (-r).exp();
                (e, -e)
            }
            PekarTrial::Tabulated { r: rs, g } => {
                if r >= rs[rs.len() - 1] {
                    return (0.0, 0.0);
                }
                let i = rs.partition_point(|x| *x <= r) - 1;
                let s = (g[i + 1] - g[i]) / (rs[i + 1] - rs[i]);
                (g[i] + s * (r - rs[i]), s)
            }
        }
    }

    fn extent(&self) -> Option<f64> {
        match self {
            PekarTrial::Tabulated { r, .. } => Some(r[r.len() - 1]),
            _ => None,
        }
    }
}

/// Quadrature controls: `panels` Gauss-Legendre panels of `order` nodes,
/// on `[0, 1)` under `r = s u / (1 - u)` in position space and uniform on
/// `[0, k_max]` in momentum space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PekarMesh {
    pub panels: usize,
    pub order: usize,
    /// Momentum cutoff at unit dilation.
    pub k_max: f64,
    /// Attraction coefficient multiplying the field term (1 for the functional itself).
    pub attraction: f64,
}

impl Default for PekarMesh {
    fn default() -> Self {
        PekarMesh { panels: 48, order: 16, k_max: 60.0, attraction: 1.0 }
    }
}

fn half_line_nodes(mesh: &PekarMesh, scale: f64) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(mesh.order);
    let mut out = Vec::with_capacity(mesh.panels * mesh.order);
    for p in 0..mesh.panels {
        let (a, b) = (p as f64 / mesh.panels as f64, (p + 1) as f64 / mesh.panels as f64);
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        for &(x, w) in &rule {
            let u = c + h * x;
            let om = 1.0 - u;
            out.push((scale * u / om, w * h * scale / (om * om)));
        }
    }
    out
}

fn finite_nodes(mesh: &PekarMesh, end: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(mesh.order);
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().copied().filter(|x| *x > 0.0 && *x < end));
    pts.push(end);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let sub = mesh.panels.div_ceil(pts.len() - 1).max(1);
        for j in 0..sub {
            let a = w[0] + (w[1] - w[0]) * j as f64 / sub as f64;
            let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / sub as f64;
            let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
            out.extend(rule.iter().map(|&(x, wt)| (c + h * x, wt * h)));
        }
    }
    out
}

/// `E(g_s) = alpha s^2 - beta s` for `g_s(x) = s^{3/2} g(s x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PekarValue {
    /// `||grad g||^2 / 2` at unit scale.
    pub alpha: f64,
    /// `(4 pi / sqrt 2) int |rho^|^2 / k^2` at unit scale.
    pub beta: f64,
    pub best_scale: f64,
    /// `-beta^2 / (4 alpha)`.
    pub energy: f64,
}

impl PekarValue {
    pub fn at_scale(&self, s: f64) -> f64 {
        self.alpha * s * s - self.beta * s
    }
}

/// Both terms of the functional for the normalized `g(scale * r)`.
pub fn pekar_terms(trial: &PekarTrial, scale: f64, mesh: &PekarMesh) -> Result<(f64, f64)> {
    trial.check()?;
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("scale must be > 0, got {scale}")));
    }
    let r_nodes = match trial.extent() {
        Some(end) => {
            let PekarTrial::Tabulated { r, .. } = trial else { unreachable!() };
            let brk: Vec<f64> = r.iter().map(|x| x / scale).collect();
            finite_nodes(mesh, end / scale, &brk)
        }
        None => half_line_nodes(mesh, 2.0 / scale),
    };
    let vals: Vec<(f64, f64, f64)> = r_nodes
        .iter()
        .map(|&(r, w)| {
            let g = trial.eval(scale * r).0;
            (r, w * 4.0 * PI * r * r, g * g)
        })
        .collect();
    let norm: f64 = vals.iter().map(|(_, w, g2)| w * g2).sum();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Normalization(format!("trial norm {norm} is not positive and finite")));
    }
    let kin: f64 = r_nodes
        .iter()
        .map(|&(r, w)| {
            let dg = trial.eval(scale * r).1 * scale;
            w * 4.0 * PI * r * r * dg * dg
        })
        .sum::<f64>()
        / norm;
    let alpha = 0.5 * kin;
    let pref = (2.0 * PI).powf(-1.5) / norm;
    let k_nodes = finite_nodes(mesh, mesh.k_max * scale, &[]);
    let field: f64 = k_nodes
        .iter()
        .map(|&(k, wk)| {
            let rho_hat: f64 = vals.iter().map(|&(r, w, g2)| w * g2 * j0(k * r)).sum::<f64>() * pref;
            wk * rho_hat * rho_hat
        })
        .sum::<f64>()
        * 4.0
        * PI;
    let beta = mesh.attraction * 4.0 * PI / 2f64.sqrt() * field;
    Ok((alpha, beta))
}

/// Minimum of the functional over dilations of `trial`.
pub fn pekar_energy(trial: &PekarTrial, mesh: &PekarMesh) -> Result<PekarValue> {
    let (alpha, beta) = pekar_terms(trial, 1.0, mesh)?;
    if !(alpha > 0.0) {
        return Err(Error::Normalization("trial has no kinetic energy".into()));
    }
    Ok(PekarValue { alpha, beta, best_scale: beta / (2.0 * alpha), energy: -beta * beta / (4.0 * alpha) })
}

/// Law of the iid seeds `xi_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedLaw {
    LogNormal { mu: f64, sigma: f64 },
}

/// How a pair variable is built from its two seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMap {
    /// `(a + b) / 2`.
    Mean,
    /// `a b`; the bound is attained for even `N`.
    Product,
}

impl PairMap {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            PairMap::Mean => 0.5 * (a + b),
            PairMap::Product => a * b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairReport {
    pub n: usize,
    pub lhs: McEstimate,
    /// `Y(N-1)^{N/2}` for even `N`, `Y(N)^{(N-1)/2}` for odd `N`.
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub violated: bool,
}

/// Monte Carlo check of `E[prod_p X_p] <= Y(s)^e` for pair variables
/// `X_{(i,j)} = map(xi_i, xi_j)`. `Y` is pooled over pairs, which share one law.
pub fn pair_lemma_check(n: usize, law: SeedLaw, map: PairMap, trials: usize, seed: u64) -> Result<PairReport> {
    if !(2..=6).contains(&n) {
        return Err(Error::Domain(format!("N must be in 2..=6, got {n}")));
    }
    let SeedLaw::LogNormal { mu, sigma } = law;
    if !mu.is_finite() || !(sigma >= 0.0) {
        return Err(Error::Domain("lognormal needs finite mu and sigma >= 0".into()));
    }
    let (s, e) = if n % 2 == 0 { ((n - 1) as f64, n as f64 / 2.0) } else { (n as f64, (n - 1) as f64 / 2.0) };
    const BLOCK: usize = 1024;
    let blocks = trials.div_ceil(BLOCK).max(1);
    let ctrl = McControls { seed, n_paths: blocks, first_stream: 0, threads: None };
    let rows = run_paths(&ctrl, |b| {
        let mut gen = NormalStream::new(seed, b);
        let mut z = vec![0.0; n];
        let mut out = Vec::with_capacity(BLOCK);
        let count = BLOCK.min(trials - b as usize * BLOCK);
        for _ in 0..count {
            gen.fill(&mut z);
            let xi: Vec<f64> = z.iter().map(|v| (mu + sigma * v).exp()).collect();
            let (mut prod, mut ys, mut np) = (1.0, 0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    let x = map.apply(xi[i], xi[j]);
                    prod *= x;
                    ys += x.powf(s);
                    np += 1.0;
                }
            }
            out.push((prod, ys / np));
        }
        Ok(out)
    })?;
    let flat: Vec<(f64, f64)> = rows.into_iter().flatten().collect();
    let lhs = McEstimate::from_samples(&flat.iter().map(|p| p.0).collect::<Vec<_>>());
    let y = McEstimate::from_samples(&flat.iter().map(|p| p.1).collect::<Vec<_>>());
    if !lhs.mean.is_finite() || !y.mean.is_finite() || !(y.stderr <= 0.5 * y.mean) || !(lhs.stderr <= 0.5 * lhs.mean) {
        return Err(Error::Moment(format!("empirical moments of order {s} are not under control")));
    }
    let rhs = y.mean.powf(e);
    let rhs_stderr = e * y.mean.powf(e - 1.0) * y.stderr;
    let violated = lhs.mean > rhs + 3.0 * lhs.stderr.hypot(rhs_stderr);
    Ok(PairReport { n, lhs, rhs, rhs_stderr, violated })
}

/// One line of the bounds table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub quantity: String,
    pub formula: String,
    pub value: Option<f64>,
    pub regime: String,
    pub source: String,
}

/// Every bound evaluated at the given parameters.
pub fn bounds_table(eps: f64, n: usize, mu: f64, t: f64, p: f64, k: &BoundConstants) -> Result<Vec<BoundRow>> {
    let row = |q: &str, f: &str, v: Option<f64>, r: &str, s: &str| BoundRow {
        quantity: q.into(),
        formula: f.into(),
        value: v,
        regime: r.into(),
        source: s.into(),
    };
    let s = eps * eps * n as f64;
    let mut out = vec![
        row(
            "action moment",
            "b^N exp(c p^2 eps^4 N^3 t)",
            Some(exp_moment_rhs(MomentBound::Action, p, eps, n, t, k)?),
            "p > 0, t >= 0",
            "exponential moment of the action",
        ),
        row(
            "field moment",
            "b^N (1+p eps^2 N (1 v t))^N exp(c p eps^2 N^2 (1+ln(1 v t)) + c p^2 eps^4 N^3)",
            Some(exp_moment_rhs(MomentBound::Fields, p, eps, n, t, k)?),
            "p >= 0, t >= 0",
            "exponential moment of ||U^{N,+-}||_t^2",
        ),
        row(
            "integrand moment",
            "exp(c p^2 eps^4 N^3 (1 v t) + A(p eps^2, N, t) + c_V t)",
            Some(exp_moment_rhs(MomentBound::Integrand, p, eps, n, t, k)?),
            "p > 0, t >= 0",
            "p-th moment of the integrand norm",
        ),
        row(
            "running supremum constant",
            "[1 + (4 ^ q)(pi/q)/sin(pi/q)]^(1/p')",
            exp_moment_rhs(MomentBound::RunningSup, p, eps, n, t, k).ok(),
            "p, q > 1",
            "exponential martingale supremum",
        ),
        row("lower leading coefficient", "-256 pi^2", Some(lower_leading()), "eps^2 N >= 1", "spectral lower bound"),
        row("upper leading coefficient", "8 pi^4 E_P", Some(upper_leading()), "eps^2 N > 4", "spectral upper bound"),
        row(
            "spectral lower bound",
            "-256 pi^2 eps^4 N^3 - c eps^2 N^2",
            (s >= 1.0).then(|| lower_formula(eps, n, 1.0, k.c)),
            "eps^2 N >= 1",
            "spectral lower bound",
        ),
        row(
            "spectral upper bound",
            "8 pi^4 E_P eps^4 N^3 + c (1 + mu + ln(eps^2 N)) eps^2 N^2",
            (s > 4.0).then(|| upper_formula(eps, n, mu, k.c)),
            "eps^2 N > 4",
            "Pekar trial state",
        ),
        row("Pekar energy", "inf E_P", Some(PEKAR_ENERGY), "always", "numerical minimum"),
        row(
            "bound ratio",
            "256 pi^2 / (8 pi^4 |E_P|)",
            Some(lower_leading() / upper_leading()),
            "always",
            "leading coefficients",
        ),
    ];
    out.push(row(
        "log growth A",
        "c N (1+ln[1+q N (1 v t)]) + c q N^2 (1+ln[1 v t])",
        Some(log_growth(p * eps * eps, n, t, k.c)),
        "always",
        "integrand moment",
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_growth_at_unit_arguments() {
        assert!((log_growth(1.0, 1, 1.0, 1.0) - (2.0 + 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn running_sup_constant() {
        let k = BoundConstants { q: 2.0, ..Default::default() };
        let v = exp_moment_rhs(MomentBound::RunningSup, 2.0, 1.0, 1, 1.0, &k).unwrap();
        assert!((v - (1.0 + PI).sqrt()).abs() < 1e-14);
        assert!(exp_moment_rhs(MomentBound::RunningSup, 1.0, 1.0, 1, 1.0, &k).is_err());
    }

    #[test]
    fn zero_coupling_moments() {
        let k = BoundConstants { b: 1.7, ..Default::default() };
        let v = exp_moment_rhs(MomentBound::Action, 2.0, 0.0, 3, 5.0, &k).unwrap();
        assert!((v - 1.7f64.powi(3)).abs() < 1e-14);
        assert!(exp_moment_rhs(MomentBound::Action, 0.0, 1.0, 1, 1.0, &k).is_err());
    }

    #[test]
    fn monotone_in_time_and_coupling() {
        let k = BoundConstants::default();
        for w in [MomentBound::Action, MomentBound::Fields, MomentBound::Integrand] {
            let mut last = 0.0;
            for i in 0..20 {
                let v = exp_moment_rhs(w, 1.5, 0.8, 2, 0.25 * i as f64, &k).unwrap();
                assert!(v >= last);
                last = v;
            }
            let mut last = 0.0;
            for i in 0..20 {
                let v = exp_moment_rhs(w, 1.5, 0.1 * i as f64, 2, 2.0, &k).unwrap();
                assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn leading_coefficients() {
        assert!((lower_leading() + 2526.6187).abs() < 1e-3);
        assert!((upper_leading() + 84.554).abs() < 5e-3);
        let ratio = lower_leading() / upper_leading();
        assert!(ratio > 29.8 && ratio < 30.0);
        assert!(matches!(spectral_bounds(0.5, 1, 0.0, &BoundConstants::default()), Err(Error::Regime(_))));
        let b = spectral_bounds(1.0, 2, 0.0, &BoundConstants::default()).unwrap();
        assert!(b.upper.is_none() && b.lower < 0.0);
        assert!(spectral_bounds(3.0, 1, 0.0, &BoundConstants::default()).unwrap().upper.is_some());
    }

    #[test]
    fn gaussian_pekar_value() {
        let v = pekar_energy(&PekarTrial::Gaussian, &PekarMesh::default()).unwrap();
        assert!((v.alpha - 0.75).abs() < 1e-12);
        assert!((v.energy + 1.0 / (3.0 * PI)).abs() < 1e-10, "{v:?}");
        assert!(v.energy > PEKAR_ENERGY && v.energy <= -0.095);
        // exponential trial: self energy 5/8, kinetic 1/2
        let h = pekar_energy(&PekarTrial::Hydrogenic, &PekarMesh::default()).unwrap();
        assert!((h.energy + 25.0 / 256.0).abs() < 1e-10, "{h:?}");
    }

    /// `(4 pi / sqrt 2) int |rho^|^2 / k^2 = D(rho, rho) / sqrt 2`, with the
    /// Coulomb self energy of a radial density from the shell theorem.
    fn coulomb_oracle(g: impl Fn(f64) -> f64) -> f64 {
        let n = 20000;
        let h = 40.0 / n as f64;
        let r: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let rho: Vec<f64> = r.iter().map(|x| g(*x).powi(2)).collect();
        let simpson = |f: &dyn Fn(usize) -> f64| -> f64 {
            (0..=n)
                .map(|i| {
                    f(i) * if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    }
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let norm = simpson(&|i| 4.0 * PI * r[i] * r[i] * rho[i]);
        // enclosed charge q(r) and outer potential o(r) by cumulative trapezoids
        let mut q = vec![0.0; n + 1];
        let mut o = vec![0.0; n + 1];
        for i in 1..=n {
            q[i] = q[i - 1] + 0.5 * h * 4.0 * PI * (r[i - 1].powi(2) * rho[i - 1] + r[i].powi(2) * rho[i]);
        }
        for i in (0..n).rev() {
            o[i] = o[i + 1] + 0.5 * h * 4.0 * PI * (r[i] * rho[i] + r[i + 1] * rho[i + 1]);
        }
        let d = simpson(&|i| {
            let phi = if i == 0 { o[0] } else { q[i] / r[i] + o[i] };
            4.0 * PI * r[i] * r[i] * rho[i] * phi
        });
        d / (norm * norm) / 2f64.sqrt()
    }

    #[test]
    fn field_term_matches_shell_theorem() {
        let mesh = PekarMesh::default();
        let gauss = pekar_energy(&PekarTrial::Gaussian, &mesh).unwrap().beta;
        assert!((gauss - coulomb_oracle(|r| (-0.5 * r * r).exp())).abs() < 1e-6);
        let hyd = pekar_energy(&PekarTrial::Hydrogenic, &mesh).unwrap().beta;
        assert!((hyd - coulomb_oracle(|r| (-r).exp())).abs() < 1e-6, "{hyd}");
    }

    #[test]
    fn dilation_is_exactly_quadratic() {
        let mesh = PekarMesh::default();
        for trial in [PekarTrial::Gaussian, PekarTrial::Hydrogenic] {
            let v = pekar_energy(&trial, &mesh).unwrap();
            for s in [0.5, 1.0, 2.0] {
                let (a, b) = pekar_terms(&trial, s, &mesh).unwrap();
                assert!((a - b - v.at_scale(s)).abs() < 1e-10, "{trial:?} {s}");
            }
            assert!(v.energy >= PEKAR_ENERGY - 1e-4);
        }
    }

    #[test]
    fn no_attraction_gives_zero() {
        let mesh = PekarMesh { attraction: 0.0, ..Default::default() };
        assert_eq!(pekar_energy(&PekarTrial::Gaussian, &mesh).unwrap().energy, 0.0);
    }

    #[test]
    fn tabulated_profile() {
        let r: Vec<f64> = (0..=800).map(|i| i as f64 * 0.01).collect();
        let g: Vec<f64> = r.iter().map(|x| (-0.5 * x * x).exp() * if *x < 8.0 { 1.0 } else { 0.0 }).collect();
        let mut g = g;
        *g.last_mut().unwrap() = 0.0;
        let mesh = PekarMesh { panels: 400, order: 8, ..Default::default() };
        let v = pekar_energy(&PekarTrial::Tabulated { r, g }, &mesh).unwrap();
        assert!((v.energy + 1.0 / (3.0 * PI)).abs() < 1e-4, "{v:?}");
        let bad = PekarTrial::Tabulated { r: vec![0.0, 1.0], g: vec![1.0, 1.0] };
        assert!(matches!(pekar_energy(&bad, &mesh), Err(Error::Normalization(_))));
    }

    #[test]
    fn pair_lemma_small_n() {
        let law = SeedLaw::LogNormal { mu: 0.0, sigma: 0.25 };
        let two = pair_lemma_check(2, law, PairMap::Mean, 4000, 1).unwrap();
        assert!((two.lhs.mean - two.rhs).abs() < 1e-12);
        for n in [3, 4] {
            for map in [PairMap::Mean, PairMap::Product] {
                let r = pair_lemma_check(n, law, map, 20000, 2).unwrap();
                assert!(!r.violated, "{r:?}");
            }
        }
    }
}
