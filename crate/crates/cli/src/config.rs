//! Run configuration read from a TOML file.
//!
//! Every consumer of randomness draws from the single root `seed`: scenario
//! sets are sampled with `seed` itself, and a sweep reuses the same seed for
//! every sample size.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scenario_game::fixtures::{decoupled_quadratic, shared_budget_pair};
use scenario_game::rendezvous::{build_game, RendezvousConfig};
use scenario_game::{AdmmConfig, CertificateQuery, GameSpec, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Rendezvous,
    DecoupledQuadratic,
    SharedBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateSection {
    pub failure_prob: f64,
    pub objective_tol: f64,
    /// Defaults to the problem's declared objective bound.
    pub objective_bound: Option<f64>,
    /// Defaults to the problem's declared constraint structure.
    pub separable: Option<bool>,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self {
            failure_prob: 0.05,
            objective_tol: 0.5,
            objective_bound: None,
            separable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub extragradient_step: f64,
    pub extragradient_iters: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            extragradient_step: 0.5,
            extragradient_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub sizes: Vec<usize>,
    /// Largest sample size that still gets a centralized reference.
    pub reference_max_scenarios: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sizes: vec![10, 50, 100],
            reference_max_scenarios: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Problem,
    pub scenarios: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub rendezvous: RendezvousConfig,
    pub admm: AdmmConfig,
    pub certificate: CertificateSection,
    pub compare: CompareSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Rendezvous,
            scenarios: 10,
            seed: 0,
            out: PathBuf::from("out"),
            rendezvous: RendezvousConfig::default(),
            admm: AdmmConfig::default(),
            certificate: CertificateSection::default(),
            compare: CompareSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            bail!("scenarios must be >= 1");
        }
        if self.sweep.sizes.is_empty() || self.sweep.sizes.contains(&0) {
            bail!("sweep.sizes must be a nonempty list of positive sizes");
        }
        self.admm.validate()?;
        Ok(())
    }

    pub fn game(&self) -> Result<(GameSpec, Sampler)> {
        Ok(match self.problem {
            Problem::Rendezvous => {
                let g = build_game(&self.rendezvous)?;
                (g.spec, g.sampler)
            }
            Problem::DecoupledQuadratic => {
                let spec = decoupled_quadratic(2, 2, 1.0);
                let sampler = spec.param_sampler().clone();
                (spec, sampler)
            }
            Problem::SharedBudget => {
                let spec = shared_budget_pair();
                let sampler = spec.param_sampler().clone();
                (spec, sampler)
            }
        })
    }

    pub fn certificate_query(&self, spec: &GameSpec, sample_size: u64) -> CertificateQuery {
        let dims = spec.dims();
        CertificateQuery {
            sample_size,
            failure_prob: self.certificate.failure_prob,
            objective_tol: self.certificate.objective_tol,
            objective_bound: self
                .certificate
                .objective_bound
                .unwrap_or(spec.objective_bound()),
            num_players: dims.num_players as u64,
            decision_dim: dims.decision_dim as u64,
            separable: self
                .certificate
                .separable
                .unwrap_or(spec.separable_constraints()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn edited_config_round_trips() {
        let text = r#"
problem = "shared-budget"
scenarios = 4
seed = 11

[admm]
rho = 2.0
workers = 3

[certificate]
objective_bound = 5.0

[sweep]
sizes = [1, 2]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.problem, Problem::SharedBudget);
        assert_eq!(cfg.admm.workers, Some(3));
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(RunConfig::parse("scenarioz = 3\n").is_err());
        assert!(RunConfig::parse("[rendezvous]\nhorizn = 3\n").is_err());
    }

    #[test]
    fn invalid_values_fail() {
        assert!(RunConfig::parse("scenarios = 0\n").is_err());
        assert!(RunConfig::parse("[sweep]\nsizes = []\n").is_err());
        assert!(RunConfig::parse("[admm]\nrho = -1.0\n").is_err());
    }
}
