//! Experiment configuration, read from and rendered to TOML.

use std::path::{Path, PathBuf};

use autobid::covers::DEFAULT_COVER_CAP;
use autobid::dual::DualGradient;
use autobid::env::EnvSpec;
use autobid::learners::RestartGrid;
use autobid::oracle::CandidateSpec;
use autobid::orchestrator::RunSpec;
use autobid::policies::{Feedback, FixedBid};
use autobid::{Objective, PaymentRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default)]
    pub seeds: Seeds,
    pub rho: f64,
    #[serde(default)]
    pub exact_roi: bool,
    pub rule: PaymentRule,
    #[serde(default)]
    pub objective: Objective,
    pub env: EnvSpec,
    pub policy: PolicySpec,
    #[serde(default)]
    pub dual: DualConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Either a count `n` (seeds `0..n`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(1)
    }
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Tree {
        #[serde(default = "one")]
        lipschitz: f64,
        #[serde(default = "default_depth_cap")]
        depth_cap: u32,
        #[serde(default = "default_cover_cap")]
        cover_cap: usize,
        #[serde(default)]
        restart_grid: RestartGrid,
        #[serde(default)]
        goodness_check: bool,
    },
    BucketBandit {
        #[serde(default = "one")]
        lipschitz: f64,
    },
    Poly {
        #[serde(default = "one")]
        lipschitz: f64,
        #[serde(default)]
        restart_grid: RestartGrid,
    },
    Fixed {
        function: FixedBid,
    },
}

impl PolicySpec {
    pub fn feedback(&self) -> Feedback {
        match self {
            PolicySpec::BucketBandit { .. } => Feedback::Bandit,
            _ => Feedback::Full,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_depth_cap() -> u32 {
    3
}

fn default_cover_cap() -> usize {
    DEFAULT_COVER_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualConfig {
    /// Defaults to `1 / sqrt(T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "infinite")]
    pub cap: f64,
    #[serde(default)]
    pub gradient: DualGradient,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            step: None,
            cap: f64::INFINITY,
            gradient: DualGradient::Realized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub candidates: CandidateSpec,
    /// Grid used to atomize continuous marginals.
    pub resolution: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            candidates: CandidateSpec::EnvAtoms,
            resolution: autobid::env::DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub horizons: Vec<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(vec![e.to_string()]))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn run_spec(&self, horizon: usize, seed: u64) -> RunSpec {
        let mut spec = RunSpec::new(self.rule, self.objective, self.rho, horizon, seed);
        spec.feedback = self.policy.feedback();
        spec.dual_step = self.dual.step;
        spec.dual_cap = self.dual.cap;
        spec.dual_gradient = self.dual.gradient;
        spec
    }

    /// Horizons of a sweep: the `[sweep]` list, else the run horizon.
    pub fn horizons(&self) -> Vec<usize> {
        match &self.sweep {
            Some(s) => s.horizons.clone(),
            None => vec![self.horizon],
        }
    }

    /// Checks every field, reporting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut check = |field: &str, r: autobid::Result<()>| {
            if let Err(e) = r {
                errors.push(format!("{field}: {e}"));
            }
        };
        let seeds = self.seeds.to_vec();
        if seeds.is_empty() {
            check("seeds", Err(empty("seeds")));
        }
        let mut horizons = self.horizons();
        horizons.push(self.horizon);
        horizons.sort_unstable();
        horizons.dedup();
        for &t in &horizons {
            check("run", self.run_spec(t, 0).validate());
            check("env", self.env.build(t).map(|_| ()));
        }
        check("env", self.env.validate());
        match &self.policy {
            PolicySpec::Tree {
                lipschitz,
                depth_cap,
                cover_cap,
                ..
            } => {
                check("policy.lipschitz", positive("lipschitz", *lipschitz));
                if *depth_cap == 0 || *cover_cap == 0 {
                    check("policy", Err(empty("depth_cap and cover_cap")));
                }
            }
            PolicySpec::BucketBandit { lipschitz } | PolicySpec::Poly { lipschitz, .. } => {
                check("policy.lipschitz", positive("lipschitz", *lipschitz));
            }
            PolicySpec::Fixed { function } => check("policy.function", function.validate()),
        }
        check("dual.cap", positive("cap", self.dual.cap));
        let res = self.oracle.resolution;
        if !(res > 0.0 && res <= 1.0) {
            check(
                "oracle.resolution",
                Err(autobid::Error::OutOfRange {
                    name: "resolution",
                    value: res,
                    range: "(0, 1]",
                }),
            );
        }
        if let Some(sweep) = &self.sweep {
            if sweep.horizons.len() < 2 {
                check("sweep.horizons", Err(empty("at least two horizons")));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errors))
        }
    }
}

fn empty(name: &'static str) -> autobid::Error {
    autobid::Error::OutOfRange {
        name,
        value: 0.0,
        range: "[1, inf)",
    }
}

fn positive(name: &'static str, x: f64) -> autobid::Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(autobid::Error::OutOfRange {
            name,
            value: x,
            range: "(0, inf]",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 10
rho = 1.0
rule = { kind = "first_price" }
env = { kind = "product", value = { kind = "point", at = 1.0 }, competing = { kind = "point", at = 0.5 } }
policy = { kind = "fixed", function = { kind = "constant", bid = 0.5 } }
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seeds, Seeds::Count(1));
        assert_eq!(c.objective, Objective::ValueMax);
        assert_eq!(c.dual, DualConfig::default());
        assert!(!c.exact_roi);
        c.validate().unwrap();
    }

    #[test]
    fn render_round_trips() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(
            ExperimentConfig::parse(&text),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn validation_aggregates() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.rho = 2.0;
        c.oracle.resolution = 0.0;
        c.policy = PolicySpec::Poly {
            lipschitz: -1.0,
            restart_grid: RestartGrid::Off,
        };
        match c.validate() {
            Err(CliError::Validation(errors)) => assert_eq!(errors.len(), 3, "{errors:?}"),
            other => panic!("{other:?}"),
        }
    }
}
