//! Stochastic `(v, d)` generators, including the two lower-bound families.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::RoundSample;
use crate::error::{check_unit, Error, Result};

/// Tolerance on total probability mass.
pub const MASS_TOL: f64 = 1e-12;

/// Default resolution used to atomize uniform marginals.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// One marginal of a product environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `(point, probability)` pairs.
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    /// Uniform over the listed points.
    Grid {
        points: Vec<f64>,
    },
    /// Continuous uniform on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    Point {
        at: f64,
    },
}

/// Which lower-bound distribution of the competing bid to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BanditLbVariant {
    Base,
    Perturbed { j: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// `(v, d, probability)` triples.
    DiscreteJoint { atoms: Vec<(f64, f64, f64)> },
    Product {
        value: Marginal,
        competing: Marginal,
    },
    /// `(1, 0)` with probability `beta`, otherwise `((1 - 2 beta) / (1 - beta), 1)`.
    TightBeta { beta: f64 },
    /// `v = 1` and `d` from the lower-bound masses for `horizon` (the run
    /// horizon when absent).
    BanditLb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        variant: BanditLbVariant,
    },
}

/// A finite-support point of an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub v: f64,
    pub d: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum MarginalSampler {
    Discrete { points: Vec<f64>, cdf: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

impl MarginalSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalSampler::Discrete { points, cdf } => points[pick(cdf, rng.gen())],
            MarginalSampler::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        }
    }
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    probs
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn check_masses(what: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what}: negative or non-finite probability {p}"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: probabilities sum to {total}"
        )));
    }
    Ok(())
}

impl Marginal {
    fn validate(&self, name: &'static str) -> Result<()> {
        match self {
            Marginal::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidDistribution(format!("{name}: no atoms")));
                }
                for &(x, _) in atoms {
                    check_unit(name, x)?;
                }
                check_masses(name, atoms.iter().map(|a| a.1))
            }
            Marginal::Grid { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidDistribution(format!("{name}: no points")));
                }
                points
                    .iter()
                    .try_for_each(|&x| check_unit(name, x).map(|_| ()))
            }
            Marginal::Uniform { lo, hi } => {
                check_unit(name, *lo)?;
                check_unit(name, *hi)?;
                if lo > hi {
                    return Err(Error::InvalidDistribution(format!(
                        "{name}: uniform with lo > hi"
                    )));
                }
                Ok(())
            }
            Marginal::Point { at } => check_unit(name, *at).map(|_| ()),
        }
    }

    /// Finite support, atomizing continuous parts at `resolution`.
    pub fn atoms(&self, resolution: f64) -> Vec<(f64, f64)> {
        match self {
            Marginal::Atoms { atoms } => atoms.clone(),
            Marginal::Grid { points } => {
                let p = 1.0 / points.len() as f64;
                points.iter().map(|&x| (x, p)).collect()
            }
            Marginal::Point { at } => vec![(*at, 1.0)],
            Marginal::Uniform { lo, hi } => {
                if hi == lo {
                    return vec![(*lo, 1.0)];
                }
                let n = ((hi - lo) / resolution).ceil().max(1.0) as usize;
                let w = (hi - lo) / n as f64;
                (0..n)
                    .map(|i| (lo + (i as f64 + 0.5) * w, 1.0 / n as f64))
                    .collect()
            }
        }
    }

    fn sampler(&self) -> MarginalSampler {
        match self {
            Marginal::Uniform { lo, hi } => MarginalSampler::Uniform { lo: *lo, hi: *hi },
            other => {
                let atoms = other.atoms(DEFAULT_RESOLUTION);
                MarginalSampler::Discrete {
                    points: atoms.iter().map(|a| a.0).collect(),
                    cdf: cumulative(atoms.iter().map(|a| a.1)),
                }
            }
        }
    }

    fn is_discrete(&self) -> bool {
        !matches!(self, Marginal::Uniform { lo, hi } if lo != hi)
    }
}

/// Number of interior atoms of the lower-bound family:
/// `2 T^(1/3)` rounded to the nearest even integer, at least 2.
pub fn bandit_lb_k(horizon: usize) -> usize {
    let k = 2 * ((horizon as f64).cbrt().round() as usize);
    k.max(2)
}

/// Exact rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn le(self, other: Ratio) -> bool {
        self.num * other.den <= other.num * self.den
    }

    /// `self - other`, assuming `other <= self`.
    fn minus(self, other: Ratio) -> Ratio {
        Ratio {
            num: self.num * other.den - other.num * self.den,
            den: self.den * other.den,
        }
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `3 / (4 - d_i)` with `d_i = (K + i) / (3K)`, i.e. `9K / (11K - i)`.
fn base_cdf_at(k: usize, i: usize) -> Ratio {
    Ratio {
        num: 9 * k as u128,
        den: 11 * k as u128 - i as u128,
    }
}

/// Atom masses of the competing bid in the lower-bound family, as
/// `(d, probability)` pairs over `0, d_0, ..., d_{K-1}, 1`.
pub fn bandit_lb_masses(horizon: usize, variant: BanditLbVariant) -> Result<Vec<(f64, f64)>> {
    if horizon < 8 {
        return Err(Error::OutOfRange {
            name: "horizon",
            value: horizon as f64,
            range: "[8, inf)",
        });
    }
    let k = bandit_lb_k(horizon);
    let mut cdf = Vec::with_capacity(k + 2);
    cdf.push(Ratio { num: 3, den: 4 });
    cdf.extend((0..k).map(|i| base_cdf_at(k, i)));
    cdf.push(Ratio { num: 1, den: 1 });
    if let BanditLbVariant::Perturbed { j } = variant {
        if j >= k {
            return Err(Error::InvalidIndex { index: j, len: k });
        }
        cdf[j + 1] = base_cdf_at(k, j + 1);
    }
    if cdf.windows(2).any(|w| !w[0].le(w[1])) {
        return Err(Error::InvariantViolation(
            "lower-bound CDF is not monotone".into(),
        ));
    }

    let mut points = Vec::with_capacity(k + 2);
    points.push(0.0);
    points.extend((0..k).map(|i| (k + i) as f64 / (3 * k) as f64));
    points.push(1.0);

    let mut prev = Ratio { num: 0, den: 1 };
    Ok(points
        .into_iter()
        .zip(cdf)
        .map(|(d, c)| {
            let mass = c.minus(prev);
            prev = c;
            (d, mass.value())
        })
        .collect())
}

/// Spacing `1 / (3K)` of the lower-bound atoms.
pub fn bandit_lb_eps(horizon: usize) -> f64 {
    1.0 / (3.0 * bandit_lb_k(horizon) as f64)
}

impl EnvSpec {
    pub fn tight_beta(beta: f64) -> Result<Self> {
        let spec = EnvSpec::TightBeta { beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::DiscreteJoint { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidDistribution("joint env has no atoms".into()));
                }
                for &(v, d, _) in atoms {
                    check_unit("v", v)?;
                    check_unit("d", d)?;
                }
                check_masses("joint env", atoms.iter().map(|a| a.2))
            }
            EnvSpec::Product { value, competing } => {
                value.validate("v")?;
                competing.validate("d")
            }
            EnvSpec::TightBeta { beta } => {
                if !beta.is_finite() || *beta <= 0.0 || *beta > 0.5 {
                    return Err(Error::OutOfRange {
                        name: "beta",
                        value: *beta,
                        range: "(0, 0.5]",
                    });
                }
                Ok(())
            }
            EnvSpec::BanditLb { horizon, variant } => {
                if let Some(h) = horizon {
                    bandit_lb_masses(*h, *variant)?;
                }
                Ok(())
            }
        }
    }

    /// True when `v` and `d` are independent.
    pub fn is_independent(&self) -> bool {
        matches!(self, EnvSpec::Product { .. } | EnvSpec::BanditLb { .. })
    }

    /// Resolves the spec for a run of `horizon` rounds.
    pub fn build(&self, horizon: usize) -> Result<Env> {
        self.validate()?;
        let sampler = match self {
            EnvSpec::Product { value, competing } => Sampler::Product {
                v: value.sampler(),
                d: competing.sampler(),
            },
            _ => {
                let atoms = self.atoms_for(horizon, DEFAULT_RESOLUTION)?;
                Sampler::Joint {
                    cdf: cumulative(atoms.iter().map(|a| a.p)),
                    atoms: atoms.iter().map(|a| (a.v, a.d)).collect(),
                }
            }
        };
        Ok(Env {
            spec: self.clone(),
            horizon,
            sampler,
        })
    }

    /// Finite support for a run of `horizon` rounds, atomizing continuous
    /// marginals at `resolution`.
    pub fn atoms_for(&self, horizon: usize, resolution: f64) -> Result<Vec<Atom>> {
        self.validate()?;
        Ok(match self {
            EnvSpec::DiscreteJoint { atoms } => {
                atoms.iter().map(|&(v, d, p)| Atom { v, d, p }).collect()
            }
            EnvSpec::Product { value, competing } => {
                let vs = value.atoms(resolution);
                let ds = competing.atoms(resolution);
                vs.iter()
                    .flat_map(|&(v, pv)| ds.iter().map(move |&(d, pd)| Atom { v, d, p: pv * pd }))
                    .collect()
            }
            EnvSpec::TightBeta { beta } => vec![
                Atom {
                    v: 1.0,
                    d: 0.0,
                    p: *beta,
                },
                Atom {
                    v: (1.0 - 2.0 * beta) / (1.0 - beta),
                    d: 1.0,
                    p: 1.0 - beta,
                },
            ],
            EnvSpec::BanditLb {
                horizon: h,
                variant,
            } => bandit_lb_masses(h.unwrap_or(horizon), *variant)?
                .into_iter()
                .map(|(d, p)| Atom { v: 1.0, d, p })
                .collect(),
        })
    }

    /// True when [`EnvSpec::atoms_for`] is exact rather than atomized.
    pub fn is_finite(&self) -> bool {
        match self {
            EnvSpec::Product { value, competing } => value.is_discrete() && competing.is_discrete(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sampler {
    Joint {
        atoms: Vec<(f64, f64)>,
        cdf: Vec<f64>,
    },
    Product {
        v: MarginalSampler,
        d: MarginalSampler,
    },
}

/// A spec resolved for one horizon, ready to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    spec: EnvSpec,
    horizon: usize,
    sampler: Sampler,
}

impl Env {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RoundSample {
        match &self.sampler {
            Sampler::Joint { atoms, cdf } => {
                let (v, d) = atoms[pick(cdf, rng.gen())];
                RoundSample { v, d }
            }
            Sampler::Product { v, d } => {
                let v = v.sample(rng);
                let d = d.sample(rng);
                RoundSample { v, d }
            }
        }
    }

    pub fn atoms(&self, resolution: f64) -> Result<Vec<Atom>> {
        self.spec.atoms_for(self.horizon, resolution)
    }
}
