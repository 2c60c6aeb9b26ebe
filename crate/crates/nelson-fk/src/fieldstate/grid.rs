//! Momentum quadrature: radial panels times an antipodally symmetric
//! angular rule.

use crate::error::{Error, Result};
use crate::kernel::quad::gauss_legendre;
use crate::kernel::{AngularRule, ModelParams};
use std::f64::consts::PI;

/// Unit vectors and weights summing to `4 pi`.
pub fn angular_rule(rule: AngularRule) -> Result<Vec<([f64; 3], f64)>> {
    match rule {
        AngularRule::Lebedev(n) => lebedev(n),
        AngularRule::Product { n_theta, n_phi } => {
            if n_theta == 0 || n_phi == 0 || n_phi % 2 != 0 {
                return Err(Error::Config(format!(
                    "product rule needs n_theta >= 1 and even n_phi, got {n_theta}x{n_phi}"
                )));
            }
            let gl = gauss_legendre(n_theta);
            let mut out = Vec::with_capacity(n_theta * n_phi);
            for it in 0..n_theta {
                // mirror the rule so that antipodes are exact
                let (x, w) = if it < n_theta / 2 {
                    gl[it]
                } else if n_theta % 2 == 1 && it == n_theta / 2 {
                    (0.0, gl[it].1)
                } else {
                    let (x, w) = gl[n_theta - 1 - it];
                    (-x, w)
                };
                let st = (1.0 - x * x).max(0.0).sqrt();
                let half = n_phi / 2;
                for ip in 0..n_phi {
                    let ph = 2.0 * PI * ((ip % half) as f64 + 0.5) / n_phi as f64;
                    let sign = if ip < half { 1.0 } else { -1.0 };
                    out.push(([sign * st * ph.cos(), sign * st * ph.sin(), x], w * 2.0 * PI / n_phi as f64));
                }
            }
            Ok(out)
        }
    }
}

fn lebedev(n: usize) -> Result<Vec<([f64; 3], f64)>> {
    let mut pts: Vec<([f64; 3], f64)> = Vec::new();
    let orbit_a1 = |w: f64, pts: &mut Vec<([f64; 3], f64)>| {
        for axis in 0..3 {
            for s in [1.0, -1.0] {
                let mut v = [0.0; 3];
                v[axis] = s;
                pts.push((v, w));
            }
        }
    };
    let orbit_a2 = |w: f64, pts: &mut Vec<([f64; 3], f64)>| {
        let c = 0.5f64.sqrt();
        for zero in 0..3 {
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let mut v = [0.0; 3];
                    let (i, j) = ((zero + 1) % 3, (zero + 2) % 3);
                    v[i] = s1 * c;
                    v[j] = s2 * c;
                    pts.push((v, w));
                }
            }
        }
    };
    let orbit_a3 = |w: f64, pts: &mut Vec<([f64; 3], f64)>| {
        let c = 1.0 / 3f64.sqrt();
        for s0 in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    pts.push(([s0 * c, s1 * c, s2 * c], w));
                }
            }
        }
    };
    let orbit_llm = |l: f64, m: f64, w: f64, pts: &mut Vec<([f64; 3], f64)>| {
        for pos in 0..3 {
            for s0 in [1.0, -1.0] {
                for s1 in [1.0, -1.0] {
                    for s2 in [1.0, -1.0] {
                        let mut v = [l, l, l];
                        v[pos] = m;
                        pts.push(([s0 * v[0], s1 * v[1], s2 * v[2]], w));
                    }
                }
            }
        }
    };
    match n {
        6 => orbit_a1(1.0 / 6.0, &mut pts),
        14 => {
            orbit_a1(1.0 / 15.0, &mut pts);
            orbit_a3(3.0 / 40.0, &mut pts);
        }
        26 => {
            orbit_a1(1.0 / 21.0, &mut pts);
            orbit_a2(4.0 / 105.0, &mut pts);
            orbit_a3(9.0 / 280.0, &mut pts);
        }
        50 => {
            orbit_a1(4.0 / 315.0, &mut pts);
            orbit_a2(64.0 / 2835.0, &mut pts);
            orbit_a3(27.0 / 1280.0, &mut pts);
            orbit_llm(1.0 / 11f64.sqrt(), 3.0 / 11f64.sqrt(), 14641.0 / 725760.0, &mut pts);
        }
        _ => return Err(Error::Config(format!("Lebedev rule with {n} points is not available (6, 14, 26, 50)"))),
    }
    for p in pts.iter_mut() {
        p.1 *= 4.0 * PI;
    }
    Ok(pts)
}

/// Polynomial degree integrated exactly by an angular rule.
pub fn angular_degree(rule: AngularRule) -> usize {
    match rule {
        AngularRule::Lebedev(6) => 3,
        AngularRule::Lebedev(14) => 5,
        AngularRule::Lebedev(26) => 7,
        AngularRule::Lebedev(50) => 11,
        AngularRule::Lebedev(_) => 0,
        AngularRule::Product { n_theta, n_phi } => (2 * n_theta - 1).min(n_phi - 1),
    }
}

/// Radial nodes `(rho, weight including rho^2, panel)` and the panel edges.
pub fn radial_rule(p: &ModelParams) -> (Vec<(f64, f64, usize)>, Vec<f64>) {
    let extent = p.uv_extent();
    let mut edges = vec![0.0];
    let mut cand = p.radial_breaks();
    let mut o = 1.0;
    while o < extent {
        cand.push(o);
        o *= 2.0;
    }
    cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for c in cand {
        let last = *edges.last().unwrap();
        if c > last * (1.0 + 1e-9) + 1e-12 && c < extent * (1.0 - 1e-9) {
            edges.push(c);
        }
    }
    edges.push(extent);
    let octaves: Vec<f64> =
        edges.windows(2).enumerate().map(|(i, w)| if i == 0 { 2.0 } else { (w[1] / w[0]).log2().max(0.25) }).collect();
    let total: f64 = octaves.iter().sum();
    let n = p.grid.radial_nodes as f64;
    let mut nodes = Vec::new();
    for (ip, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let np = ((n * octaves[ip] / total).round() as usize).max(3);
        let gl = gauss_legendre(np);
        for &(x, wx) in &gl {
            let u = 0.5 * (x + 1.0);
            let wu = 0.5 * wx;
            let (rho, jac) = if ip == 0 {
                (b * u * u, 2.0 * b * u)
            } else {
                let r = a * (b / a).powf(u);
                (r, r * (b / a).ln())
            };
            nodes.push((rho, wu * jac * rho * rho, ip));
        }
    }
    (nodes, edges)
}

/// Quadrature nodes `k` in momentum space with the model data evaluated on them.
#[derive(Clone, Debug)]
pub struct MomentumGrid {
    pub k: Vec<[f64; 3]>,
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
    /// `d^3k` weight (radial times angular).
    pub weight: Vec<f64>,
    pub f: Vec<f64>,
    pub beta: Vec<f64>,
    /// `1{|k| >= Lambda} beta`.
    pub beta_band: Vec<f64>,
    pub panel: Vec<usize>,
    pub panel_edges: Vec<f64>,
    /// Index of the node at `-k`.
    pub antipode: Vec<usize>,
    pub n_angular: usize,
    pub params: ModelParams,
}

impl MomentumGrid {
    pub fn build(p: &ModelParams) -> Result<MomentumGrid> {
        p.validate()?;
        let ang = angular_rule(p.grid.angular)?;
        let na = ang.len();
        let ang_anti: Vec<usize> = (0..na)
            .map(|i| {
                let v = ang[i].0;
                (0..na)
                    .min_by(|&a, &b| {
                        let da = dist2(ang[a].0, [-v[0], -v[1], -v[2]]);
                        let db = dist2(ang[b].0, [-v[0], -v[1], -v[2]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap()
            })
            .collect();
        let (rad, edges) = radial_rule(p);
        let n = rad.len() * na;
        let mut g = MomentumGrid {
            k: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            omega: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
            beta: Vec::with_capacity(n),
            beta_band: Vec::with_capacity(n),
            panel: Vec::with_capacity(n),
            panel_edges: edges,
            antipode: Vec::with_capacity(n),
            n_angular: na,
            params: p.clone(),
        };
        for (ir, &(rho, wr, ip)) in rad.iter().enumerate() {
            let (om, f, b, bb) = (p.omega(rho), p.f(rho), p.beta(rho), p.beta_band(rho));
            for (ia, &(u, wa)) in ang.iter().enumerate() {
                g.k.push([rho * u[0], rho * u[1], rho * u[2]]);
                g.rho.push(rho);
                g.omega.push(om);
                g.weight.push(wr * wa);
                g.f.push(f);
                g.beta.push(b);
                g.beta_band.push(bb);
                g.panel.push(ip);
                g.antipode.push(ir * na + ang_anti[ia]);
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.panel_edges.len() - 1
    }

    /// `sum_k weight f beta`, the grid value of the renormalization energy.
    pub fn renorm_energy(&self) -> f64 {
        (0..self.len()).map(|n| self.weight[n] * self.f[n] * self.beta[n]).sum()
    }

    /// `sum_k weight g(k)` for a real function of the node index.
    pub fn integrate(&self, g: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|n| self.weight[n] * g(n)).sum()
    }

    /// Largest panel index whose upper edge is at most `kappa`.
    pub fn panels_below(&self, kappa: f64) -> usize {
        self.panel_edges[1..].iter().take_while(|e| **e <= kappa * (1.0 + 1e-12)).count()
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}
