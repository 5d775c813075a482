use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::pdo::SymbolSpec;
use crate::rispaces::SpaceSpec;
use crate::sample::{max_grid_level, GridFunction};
use crate::weights::Weight;
use crate::young::YoungFunction;

/// The inequality a target evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "T1.1")]
    WeightedBound,
    #[serde(rename = "T1.2")]
    WeightedCommutator,
    #[serde(rename = "T1.3")]
    QuasiBanachBound,
    #[serde(rename = "T1.4")]
    QuasiBanachCommutator,
    #[serde(rename = "T1.5")]
    Modular,
    #[serde(rename = "T1.5-endpoint")]
    WeakEndpoint,
    #[serde(rename = "T1.6")]
    CommutatorModular,
    #[serde(rename = "L-mod-max")]
    ModularWeightedMaximal,
    #[serde(rename = "L-mod-Mr")]
    ModularPowerMaximal,
    #[serde(rename = "L-mod-sparse")]
    ModularSparse,
    #[serde(rename = "sparse-domination")]
    SparseDomination,
    #[serde(rename = "carleson")]
    Carleson,
    #[serde(rename = "product-hypothesis")]
    ProductHypothesis,
}

impl TargetKind {
    pub fn label(self) -> &'static str {
        match self {
            TargetKind::WeightedBound => "T1.1",
            TargetKind::WeightedCommutator => "T1.2",
            TargetKind::QuasiBanachBound => "T1.3",
            TargetKind::QuasiBanachCommutator => "T1.4",
            TargetKind::Modular => "T1.5",
            TargetKind::WeakEndpoint => "T1.5-endpoint",
            TargetKind::CommutatorModular => "T1.6",
            TargetKind::ModularWeightedMaximal => "L-mod-max",
            TargetKind::ModularPowerMaximal => "L-mod-Mr",
            TargetKind::ModularSparse => "L-mod-sparse",
            TargetKind::SparseDomination => "sparse-domination",
            TargetKind::Carleson => "carleson",
            TargetKind::ProductHypothesis => "product-hypothesis",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub level: u32,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        crate::dyadic::check_dim(self.n)?;
        let max = max_grid_level(self.n);
        if self.level > max {
            return Err(LabError::LevelOverflow {
                level: self.level,
                max_level: max,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    /// Every corpus function is multiplied by this amplitude.
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(s: &f64) -> bool {
    *s == 1.0
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 16,
            scale: 1.0,
        }
    }
}

fn center_or_default(center: &Option<Vec<f64>>, dim: usize) -> Vec<f64> {
    center.clone().unwrap_or_else(|| vec![0.5; dim])
}

fn torus_distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A weight family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum WeightSpec {
    Unit,
    Power {
        a: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    TwoStep {
        low: f64,
        high: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl WeightSpec {
    pub fn build(&self, dim: usize, level: u32) -> Result<Weight> {
        match self {
            WeightSpec::Unit => Ok(Weight::constant(dim, level, 1.0)),
            WeightSpec::Power { a, center } => Weight::power(*a, &center_or_default(center, dim), dim, level),
            WeightSpec::TwoStep { low, high } => Weight::two_step(*low, *high, dim, level),
            WeightSpec::Values { values } => Weight::new(GridFunction::new(dim, level, values.clone())?),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightSpec::Unit => "unit".into(),
            WeightSpec::Power { a, .. } => format!("power({a})"),
            WeightSpec::TwoStep { low, high } => format!("twoStep({low};{high})"),
            WeightSpec::Values { .. } => "values".into(),
        }
    }
}

/// A BMO symbol for one commutator slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum BSpec {
    Constant {
        c: f64,
    },
    /// `ln max(|x - center|, 2^(-L-1))`.
    LogDistance {
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Indicator of `x_1 < at`.
    Step {
        at: f64,
    },
    /// `cos(2 pi freq x_1)`.
    Cosine {
        freq: f64,
    },
    Values {
        values: Vec<f64>,
    },
}

impl BSpec {
    pub fn build(&self, dim: usize, level: u32) -> Result<GridFunction> {
        match self {
            BSpec::Constant { c } => Ok(GridFunction::constant(dim, level, *c)),
            BSpec::LogDistance { center } => {
                let c = center_or_default(center, dim);
                if c.len() != dim {
                    return Err(LabError::InvalidParameter("center has the wrong dimension".into()));
                }
                let floor = (-(level as f64) - 1.0).exp2();
                Ok(GridFunction::from_fn(dim, level, |x| torus_distance(x, &c).max(floor).ln()))
            }
            BSpec::Step { at } => Ok(GridFunction::from_fn(dim, level, |x| if x[0] < *at { 1.0 } else { 0.0 })),
            BSpec::Cosine { freq } => Ok(GridFunction::from_fn(dim, level, |x| {
                (2.0 * std::f64::consts::PI * freq * x[0]).cos()
            })),
            BSpec::Values { values } => GridFunction::new(dim, level, values.clone()),
        }
    }
}

fn default_weights() -> Vec<WeightSpec> {
    vec![WeightSpec::Unit]
}

fn default_threshold() -> f64 {
    2.0
}

fn default_beta() -> f64 {
    1.0
}

fn default_m() -> usize {
    2
}

fn default_q_grid() -> Vec<f64> {
    vec![1.1, 1.5, 2.0]
}

/// One experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TargetConfig {
    pub id: String,
    pub target: TargetKind,
    /// Target space `X`.
    #[serde(default)]
    pub space: Option<SpaceSpec>,
    /// Factor spaces `X_i`; a single entry is used for every slot.
    #[serde(default)]
    pub spaces: Vec<SpaceSpec>,
    #[serde(default = "default_weights")]
    pub weights: Vec<WeightSpec>,
    #[serde(default)]
    pub phi: Option<YoungFunction>,
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    /// One entry per slot; a single entry is used for every slot.
    #[serde(default)]
    pub bmo: Vec<BSpec>,
    #[serde(default)]
    pub r: Option<f64>,
    /// Candidate exponents `q` (favorable one recorded).
    #[serde(default = "default_q_grid")]
    pub q: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Runs a symbol without certified class metadata.
    #[serde(default)]
    pub allow_uncertified: bool,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub count: Option<usize>,
}

impl TargetConfig {
    pub fn new(id: &str, target: TargetKind) -> Self {
        Self {
            id: id.to_string(),
            target,
            space: None,
            spaces: Vec::new(),
            weights: default_weights(),
            phi: None,
            symbol: None,
            bmo: Vec::new(),
            r: None,
            q: default_q_grid(),
            threshold: default_threshold(),
            beta: default_beta(),
            m: default_m(),
            allow_uncertified: false,
            grid: None,
            count: None,
        }
    }

    /// Factor spaces expanded to `m` entries.
    pub fn factor_spaces(&self) -> Result<Vec<SpaceSpec>> {
        expand(&self.spaces, self.m, "spaces")
    }

    pub fn bmo_specs(&self) -> Result<Vec<BSpec>> {
        expand(&self.bmo, self.m, "bmo")
    }
}

fn expand<T: Clone>(items: &[T], m: usize, what: &str) -> Result<Vec<T>> {
    match items.len() {
        0 => Err(LabError::Config(format!("`{what}` is required for this target"))),
        1 => Ok(vec![items[0].clone(); m]),
        k if k == m => Ok(items.to_vec()),
        k => Err(LabError::Config(format!("`{what}` has {k} entries, expected 1 or {m}"))),
    }
}

/// A suite: shared grid and corpus, budgets keyed by target id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub budgets: BTreeMap<String, f64>,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
}

impl ExperimentConfig {
    /// Parses JSON, reporting the line and column of any error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| LabError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.targets {
            if !seen.insert(t.id.as_str()) {
                return Err(LabError::Config(format!("duplicate target id `{}`", t.id)));
            }
            if let Some(g) = t.grid {
                g.validate()?;
            }
            if t.m == 0 {
                return Err(LabError::Config(format!("target `{}`: m must be >= 1", t.id)));
            }
        }
        if !(self.corpus.scale > 0.0) || !self.corpus.scale.is_finite() {
            return Err(LabError::Config("corpus scale must be a finite number > 0".into()));
        }
        for (k, v) in &self.budgets {
            if v.is_nan() || *v < 0.0 {
                return Err(LabError::Config(format!("budget `{k}` must be >= 0")));
            }
        }
        Ok(())
    }
}
