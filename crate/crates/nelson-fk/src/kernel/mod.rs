//! Model data, dispersion relation, coupling kernels and the analytic
//! radial integrals built from them.

mod integrals;
pub mod quad;

pub use integrals::{
    atom_pair_bruteforce, atom_pair_integral, direct_kernel, mho, pair_potential, renorm_energy, Atom, AtomPairValue,
    AtomPoint, PairTable,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

/// Ultraviolet cutoff: a positive integer or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kappa {
    Finite(u32),
    Infinite,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Finite(k) => Some(k as f64),
            Kappa::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Kappa::Finite(_))
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Finite(k) => write!(f, "{k}"),
            Kappa::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Kappa {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Kappa::Infinite);
        }
        match t.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(Kappa::Finite(k)),
            _ => Err(Error::Config(format!("kappa must be a positive integer or 'inf', got '{s}'"))),
        }
    }
}

/// Shape of the ultraviolet cutoff function, evaluated at `|k|/kappa`.
///
/// `Taper { flat }` is `1` up to `flat`, then `cos^2(r - flat)` down to zero
/// at `flat + pi/2`. It is even, C^1, equals 1 at the origin and its slope
/// never exceeds 1 in modulus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChiProfile {
    Sharp,
    Taper { flat: f64 },
}

impl ChiProfile {
    pub fn eval(self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            ChiProfile::Sharp => {
                if r < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ChiProfile::Taper { flat } => {
                if r <= flat {
                    1.0
                } else if r < flat + FRAC_PI_2 {
                    let c = (r - flat).cos();
                    c * c
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius beyond which the profile vanishes.
    pub fn support(self) -> f64 {
        match self {
            ChiProfile::Sharp => 1.0,
            ChiProfile::Taper { flat } => flat + FRAC_PI_2,
        }
    }

    /// Points (in units of kappa) where the profile is not smooth.
    pub fn breakpoints(self) -> Vec<f64> {
        match self {
            ChiProfile::Sharp => vec![1.0],
            ChiProfile::Taper { flat } if flat > 0.0 => vec![flat, flat + FRAC_PI_2],
            ChiProfile::Taper { flat } => vec![flat + FRAC_PI_2],
        }
    }
}

impl FromStr for ChiProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "sharp" {
            return Ok(ChiProfile::Sharp);
        }
        if t == "taper" {
            return Ok(ChiProfile::Taper { flat: 0.5 });
        }
        if let Some(v) = t.strip_prefix("taper:") {
            let flat: f64 = v.parse().map_err(|_| Error::Config(format!("bad taper flat radius '{v}'")))?;
            if flat < 0.0 {
                return Err(Error::Config("taper flat radius must be >= 0".into()));
            }
            return Ok(ChiProfile::Taper { flat });
        }
        Err(Error::Config(format!("unknown chi profile '{s}' (sharp | taper | taper:W)")))
    }
}

/// Infrared profile of the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EtaProfile {
    One,
    /// Indicator of `|k| >= cut`.
    IrCut(f64),
}

impl EtaProfile {
    pub fn eval(self, rho: f64) -> f64 {
        match self {
            EtaProfile::One => 1.0,
            EtaProfile::IrCut(c) => {
                if rho >= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for EtaProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "one" {
            return Ok(EtaProfile::One);
        }
        if let Some(v) = t.strip_prefix("ir-cut:") {
            let c: f64 = v.parse().map_err(|_| Error::Config(format!("bad infrared cut '{v}'")))?;
            if !(c >= 0.0) {
                return Err(Error::Config("infrared cut must be >= 0".into()));
            }
            return Ok(EtaProfile::IrCut(c));
        }
        Err(Error::Config(format!("unknown eta profile '{s}' (one | ir-cut:L)")))
    }
}

/// Angular quadrature on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AngularRule {
    /// Lebedev rule with 6, 14, 26 or 50 points.
    Lebedev(usize),
    /// Gauss-Legendre in cos(theta) times an even number of uniform azimuths.
    Product { n_theta: usize, n_phi: usize },
}

impl FromStr for AngularRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some((a, b)) = t.split_once('x') {
            let n_theta = a.parse().map_err(|_| Error::Config(format!("bad angular rule '{s}'")))?;
            let n_phi = b.parse().map_err(|_| Error::Config(format!("bad angular rule '{s}'")))?;
            return Ok(AngularRule::Product { n_theta, n_phi });
        }
        let n: usize = t.parse().map_err(|_| Error::Config(format!("bad angular rule '{s}' (6|14|26|50|TxP)")))?;
        Ok(AngularRule::Lebedev(n))
    }
}

/// Momentum quadrature description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radial_nodes: usize,
    /// Upper radial limit used when kappa is infinite.
    pub rho_max: f64,
    pub angular: AngularRule,
    /// Additional radial breakpoints (for example every cutoff of a sweep).
    pub extra_breaks: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { radial_nodes: 128, rho_max: 1.0e3, angular: AngularRule::Lebedev(26), extra_breaks: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub eps: f64,
    pub n_particles: usize,
    pub eta: EtaProfile,
    pub chi: ChiProfile,
    pub kappa: Kappa,
    /// Infrared split parameter `Lambda`.
    pub lambda: f64,
    pub grid: GridSpec,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            mu: 0.0,
            eps: 1.0,
            n_particles: 1,
            eta: EtaProfile::One,
            chi: ChiProfile::Sharp,
            kappa: Kappa::Finite(4),
            lambda: 0.0,
            grid: GridSpec::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) {
            return Err(Error::Domain(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !self.eps.is_finite() {
            return Err(Error::Domain("eps must be finite".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::Domain("need at least one particle".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.grid.rho_max > 0.0) {
            return Err(Error::Domain("rho_max must be > 0".into()));
        }
        if self.grid.radial_nodes < 2 {
            return Err(Error::Domain("need at least two radial nodes".into()));
        }
        if let ChiProfile::Taper { flat } = self.chi {
            if !(flat >= 0.0) {
                return Err(Error::Domain("taper flat radius must be >= 0".into()));
            }
        }
        if let EtaProfile::IrCut(c) = self.eta {
            if !(c >= 0.0) {
                return Err(Error::Domain("infrared cut must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn omega(&self, rho: f64) -> f64 {
        dispersion(rho, self.mu)
    }

    /// `chi(rho/kappa)`, identically 1 without cutoff.
    pub fn chi_kappa(&self, rho: f64) -> f64 {
        match self.kappa.value() {
            Some(k) => self.chi.eval(rho / k),
            None => 1.0,
        }
    }

    /// Largest momentum carrying any coupling; `rho_max` when kappa is infinite.
    pub fn uv_extent(&self) -> f64 {
        match self.kappa.value() {
            Some(k) => k * self.chi.support(),
            None => self.grid.rho_max,
        }
    }

    /// Coupling function `f = eps * eta * omega^{-1/2} * chi_kappa`.
    pub fn f(&self, rho: f64) -> f64 {
        let w = self.omega(rho);
        if w == 0.0 {
            return 0.0;
        }
        self.eps * self.eta.eval(rho) * self.chi_kappa(rho) / w.sqrt()
    }

    /// `beta = f / (omega + rho^2/2)`.
    pub fn beta(&self, rho: f64) -> f64 {
        let d = self.omega(rho) + 0.5 * rho * rho;
        if d == 0.0 {
            return 0.0;
        }
        self.f(rho) / d
    }

    /// `1{rho >= Lambda} * f`.
    pub fn f_band(&self, rho: f64) -> f64 {
        if rho >= self.lambda {
            self.f(rho)
        } else {
            0.0
        }
    }

    /// `1{rho >= Lambda} * beta`.
    pub fn beta_band(&self, rho: f64) -> f64 {
        if rho >= self.lambda {
            self.beta(rho)
        } else {
            0.0
        }
    }

    /// Radii where radial integrands have kinks or jumps.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let mut b = Vec::new();
        if self.lambda > 0.0 {
            b.push(self.lambda);
        }
        if let EtaProfile::IrCut(c) = self.eta {
            if c > 0.0 {
                b.push(c);
            }
        }
        if let Some(k) = self.kappa.value() {
            for r in self.chi.breakpoints() {
                b.push(r * k);
            }
        }
        b.extend(self.grid.extra_breaks.iter().copied().filter(|x| *x > 0.0));
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() <= 1e-12 * c.abs().max(1.0));
        b
    }
}

/// `omega(rho) = sqrt(rho^2 + mu^2)`.
pub fn dispersion(rho: f64, mu: f64) -> f64 {
    rho.hypot(mu)
}

/// Dispersion at a momentum vector.
pub fn dispersion_vec(k: [f64; 3], mu: f64) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + mu * mu).sqrt()
}

/// Catalog of radial coupling kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelId {
    F,
    Beta,
    OmegaBeta,
    FBeta,
    BetaSq,
    MBeta,
    TwoOmegaBeta,
    OmegaHalfBeta,
    OmegaQuarterBeta,
}

pub struct KernelInfo {
    pub id: KernelId,
    pub name: &'static str,
    pub formula: &'static str,
    pub rank: u8,
    /// Power of rho of the radial factor at large rho (kappa infinite, eta = 1).
    pub uv_power: f64,
    /// Power of rho of the radial factor near zero (mu = 0, eta = 1).
    pub ir_power: f64,
}

pub const KERNEL_CATALOG: &[KernelInfo] = &[
    KernelInfo {
        id: KernelId::F,
        name: "f",
        formula: "eps*eta*omega^(-1/2)*chi(k/kappa)",
        rank: 0,
        uv_power: -0.5,
        ir_power: -0.5,
    },
    KernelInfo {
        id: KernelId::Beta,
        name: "beta",
        formula: "f/(omega+k^2/2)",
        rank: 0,
        uv_power: -2.5,
        ir_power: -1.5,
    },
    KernelInfo {
        id: KernelId::OmegaBeta,
        name: "omega_beta",
        formula: "omega*beta",
        rank: 0,
        uv_power: -1.5,
        ir_power: -0.5,
    },
    KernelInfo { id: KernelId::FBeta, name: "f_beta", formula: "f*beta", rank: 0, uv_power: -3.0, ir_power: -2.0 },
    KernelInfo { id: KernelId::BetaSq, name: "beta_sq", formula: "beta^2", rank: 0, uv_power: -5.0, ir_power: -3.0 },
    KernelInfo {
        id: KernelId::MBeta,
        name: "m_beta",
        formula: "k*beta (vector)",
        rank: 1,
        uv_power: -2.5,
        ir_power: -1.5,
    },
    KernelInfo {
        id: KernelId::TwoOmegaBeta,
        name: "two_omega_beta",
        formula: "2*omega*beta",
        rank: 0,
        uv_power: -1.5,
        ir_power: -0.5,
    },
    KernelInfo {
        id: KernelId::OmegaHalfBeta,
        name: "omega_half_beta",
        formula: "omega^(1/2)*beta",
        rank: 0,
        uv_power: -2.0,
        ir_power: -1.0,
    },
    KernelInfo {
        id: KernelId::OmegaQuarterBeta,
        name: "omega_quarter_beta",
        formula: "omega^(1/4)*beta",
        rank: 0,
        uv_power: -2.25,
        ir_power: -1.25,
    },
];

impl KernelId {
    pub fn info(self) -> &'static KernelInfo {
        KERNEL_CATALOG.iter().find(|k| k.id == self).expect("catalog is complete")
    }

    pub fn rank(self) -> u8 {
        self.info().rank
    }

    /// Radial factor at `rho` (for rank 1 kernels the vector is `k * value`).
    pub fn eval(self, rho: f64, p: &ModelParams) -> f64 {
        let w = p.omega(rho);
        match self {
            KernelId::F => p.f(rho),
            KernelId::Beta | KernelId::MBeta => p.beta(rho),
            KernelId::OmegaBeta => w * p.beta(rho),
            KernelId::FBeta => p.f(rho) * p.beta(rho),
            KernelId::BetaSq => p.beta(rho).powi(2),
            KernelId::TwoOmegaBeta => 2.0 * w * p.beta(rho),
            KernelId::OmegaHalfBeta => w.sqrt() * p.beta(rho),
            KernelId::OmegaQuarterBeta => w.powf(0.25) * p.beta(rho),
        }
    }
}

impl FromStr for KernelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KERNEL_CATALOG
            .iter()
            .find(|k| k.name == s)
            .map(|k| k.id)
            .ok_or_else(|| Error::Config(format!("unknown kernel '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(0.0, 0.0), 0.0);
        assert_eq!(dispersion(0.0, 1.0), 1.0);
        assert_eq!(dispersion_vec([3.0, 4.0, 0.0], 0.0), 5.0);
        assert_eq!(dispersion(2.5, 0.0), 2.5);
    }

    #[test]
    fn kappa_parsing() {
        assert_eq!("inf".parse::<Kappa>().unwrap(), Kappa::Infinite);
        assert_eq!("16".parse::<Kappa>().unwrap(), Kappa::Finite(16));
        assert!("0".parse::<Kappa>().is_err());
        assert!("x".parse::<Kappa>().is_err());
    }

    #[test]
    fn taper_is_c1_with_unit_slope_bound() {
        let chi = ChiProfile::Taper { flat: 0.3 };
        assert_eq!(chi.eval(0.0), 1.0);
        let h = 1e-6;
        let mut max_slope: f64 = 0.0;
        let mut r = 0.0;
        while r < 3.0 {
            let s = (chi.eval(r + h) - chi.eval(r - h)) / (2.0 * h);
            max_slope = max_slope.max(s.abs());
            r += 1e-3;
        }
        assert!(max_slope <= 1.0 + 1e-6, "slope {max_slope}");
        assert_eq!(chi.eval(0.3 + FRAC_PI_2 + 1e-9), 0.0);
        assert_eq!(chi.eval(-1.0), chi.eval(1.0));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = ModelParams::default();
        assert!(p.validate().is_ok());
        p.mu = -1.0;
        assert!(p.validate().is_err());
        p.mu = 0.0;
        p.n_particles = 0;
        assert!(p.validate().is_err());
    }
}
