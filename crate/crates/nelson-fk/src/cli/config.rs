//! Run configuration: a TOML file with `model`, `grid`, `mc` and
//! `experiment` tables, overridden by command-line flags.

use crate::error::{Error, Result};
use crate::kernel::{AngularRule, ChiProfile, EtaProfile, Kappa, ModelParams};
use crate::mc::McControls;
use crate::semigroup::PotentialSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub eps: f64,
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Positive integer or `"inf"`.
    pub kappa: String,
    pub lambda: f64,
    pub chi: String,
    pub eta: String,
    pub potential: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            eps: 1.0,
            mu: 0.0,
            n: 1,
            kappa: "4".into(),
            lambda: 0.0,
            chi: "sharp".into(),
            eta: "one".into(),
            potential: "zero".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub radial: usize,
    pub angular: String,
    pub rho_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { radial: 48, angular: "14".into(), rho_max: 1.0e3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
    /// `a:b:n` (n points from a to b), a comma list, or a single time.
    pub t: String,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { paths: 1000, seed: 1, dt: 1.0e-3, t: "1".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Half-width of the configuration box of the trial density.
    pub box_half: f64,
    pub max_rel_err: f64,
    pub jackknife_blocks: usize,
    /// Fiber momenta along `xi_dir`.
    pub xi: Vec<f64>,
    pub xi_dir: [f64; 3],
    /// Cutoffs of an action convergence sweep; empty disables the sweep.
    pub kappas: Vec<u32>,
    pub p: f64,
    /// Particle offsets; empty means particle `j` at `(0.5 j, 0, 0)`.
    pub offsets: Vec<[f64; 3]>,
    /// Coherent probes of the Fock-algebra suite.
    pub probes: usize,
    /// Paths of the per-path identity checks.
    pub identity_paths: usize,
    /// Paths of the step-refinement order fits.
    pub order_paths: usize,
    /// Also fit the untransformed energy on the same seed (nonfock).
    pub compare: bool,
    pub pair_trials: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            box_half: 3.0,
            max_rel_err: 0.05,
            jackknife_blocks: 10,
            xi: vec![0.0, 0.5, 1.0],
            xi_dir: [1.0, 0.0, 0.0],
            kappas: Vec::new(),
            p: 1.0,
            offsets: Vec::new(),
            probes: 100,
            identity_paths: 8,
            order_paths: 100,
            compare: false,
            pair_trials: 200_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub mc: McSection,
    pub experiment: ExperimentSection,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<RunConfig> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let s =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let g = &self.grid;
        let p = ModelParams {
            mu: m.mu,
            eps: m.eps,
            n_particles: m.n,
            eta: field("model.eta", m.eta.parse::<EtaProfile>())?,
            chi: field("model.chi", m.chi.parse::<ChiProfile>())?,
            kappa: field("model.kappa", m.kappa.parse::<Kappa>())?,
            lambda: m.lambda,
            grid: crate::kernel::GridSpec {
                radial_nodes: g.radial,
                rho_max: g.rho_max,
                angular: field("grid.angular", g.angular.parse::<AngularRule>())?,
                extra_breaks: Vec::new(),
            },
        };
        field("grid.angular", crate::fieldstate::angular_rule(p.grid.angular).map(|_| ()))?;
        field("model", p.validate())?;
        Ok(p)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let v = field("model.potential", self.model.potential.parse::<PotentialSpec>())?;
        field("model.potential", v.validate())?;
        Ok(v)
    }

    pub fn t_grid(&self) -> Result<Vec<f64>> {
        field("mc.t", parse_times(&self.mc.t))
    }

    pub fn mc_controls(&self) -> Result<McControls> {
        if self.mc.paths == 0 {
            return Err(Error::Config("mc.paths: must be >= 1".into()));
        }
        if !(self.mc.dt > 0.0) {
            return Err(Error::Config(format!("mc.dt: must be > 0, got {}", self.mc.dt)));
        }
        Ok(McControls { seed: self.mc.seed, n_paths: self.mc.paths, first_stream: 0, threads: None })
    }

    pub fn offsets(&self) -> Result<Vec<[f64; 3]>> {
        let n = self.model.n;
        let e = &self.experiment.offsets;
        if e.is_empty() {
            return Ok((0..n).map(|j| [0.5 * j as f64, 0.0, 0.0]).collect());
        }
        if e.len() != n {
            return Err(Error::Config(format!("experiment.offsets: {} entries for N = {n}", e.len())));
        }
        Ok(e.clone())
    }
}

/// `a:b:n`, `t1,t2,...` or a single value.
pub fn parse_times(s: &str) -> Result<Vec<f64>> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad time '{v}'")));
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| Error::Config(format!("bad point count '{n}'")))?;
            if n < 2 || !(b > a) {
                return Err(Error::Config(format!("'{s}' needs b > a and n >= 2")));
            }
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        }
        [one] => one.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(Error::Config(format!("bad time grid '{s}' (a:b:n | t1,t2,... | t)"))),
    };
    if out.iter().any(|t| !(*t > 0.0)) || out.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!("times in '{s}' must be positive and increasing")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn dotted_keys_and_unknown_fields() {
        let c = RunConfig::from_toml_str("model.eps = 0.5\nmodel.N = 2\nmc.t = \"0.5:2:4\"\n").unwrap();
        assert_eq!(c.model.eps, 0.5);
        assert_eq!(c.model.n, 2);
        assert_eq!(c.t_grid().unwrap(), vec![0.5, 1.0, 1.5, 2.0]);
        let e = RunConfig::from_toml_str("model.epsilon = 1\n").unwrap_err().to_string();
        assert!(e.contains("epsilon"), "{e}");
    }

    #[test]
    fn field_diagnostics() {
        let mut c = RunConfig::default();
        c.model.kappa = "zero".into();
        assert!(c.model_params().unwrap_err().to_string().contains("model.kappa"));
        c.model.kappa = "inf".into();
        c.grid.angular = "7".into();
        assert!(c.model_params().unwrap_err().to_string().contains("grid.angular"));
        assert!(parse_times("2:1:3").is_err());
        assert_eq!(parse_times("0.5,1").unwrap(), vec![0.5, 1.0]);
    }
}
