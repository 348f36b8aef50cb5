//! Scenario configuration files.
//!
//! A scenario is a TOML document with `graph`, `protocol`, `scales` and `run`
//! tables plus an optional `reference` table of reference values the report
//! prints alongside the computed ones:
//!
//! ```toml
//! name = "example1_c2_gal"
//!
//! [graph]
//! directed = false
//! weights = [[0, 1], [1, 0]]
//!
//! [protocol]
//! kind = "gal"            # gal | double-power | signed-gal
//! rho = 2.0
//! kappa1 = 1.0
//! kappa2 = 1.0
//! gamma1 = "1/3"          # q/p, both odd, q < p
//! gamma2 = "5/3"          # m/n, both odd, n < m
//!
//! [scales]
//! setting = "C2"          # or: agents = ["x", "builtin:C1:2", ...]
//!
//! [run]
//! x0 = [-1.0, 1.0]
//! horizon = 5.0
//! step = 1e-4
//! epsilon = 1e-3
//! record_stride = 1e-3
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attracting_law::{AlParams, OddRatio};
use crate::graph::{self, DetailBalance, LaplacianAnalysis, WeightedGraph};
use crate::linalg::SquareMatrix;
use crate::protocol::{ProtocolKind, ProtocolSpec};
use crate::scales::{builtin_setting, resolve_scale, ScaleSetting};
use crate::simulator::{RunSettings, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("no scenario file or bundled scenario named {0:?}")]
    Unknown(String),
}

fn field_err(field: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub graph: GraphBlock,
    pub protocol: ProtocolBlock,
    pub scales: ScalesBlock,
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    #[serde(default)]
    pub directed: bool,
    /// Dense row-major weight matrix.
    pub weights: Vec<Vec<f64>>,
    /// Detail-balance parameters for a directed graph. Detected when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolBlock {
    pub kind: ProtocolKind,
    #[serde(default)]
    pub rho: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma1: OddRatio,
    pub gamma2: OddRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesBlock {
    /// Built-in setting applied agent by agent (`C1`..`C4`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<String>,
    /// Per-agent expressions or `builtin:<setting>:<index>` references.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<String>>,
}

fn default_horizon() -> f64 {
    RunSettings::default().horizon
}
fn default_step() -> f64 {
    RunSettings::default().step
}
fn default_epsilon() -> f64 {
    RunSettings::default().epsilon
}
fn default_stride() -> f64 {
    RunSettings::default().record_stride
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub x0: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_stride")]
    pub record_stride: f64,
    /// CSV file name, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Reference values to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_tolerance: Option<f64>,
}

/// Overrides applied on top of a config's `run` table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub epsilon: Option<f64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

/// A validated scenario plus what was derived from the graph on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    /// Algebraic connectivity of the (mirror) coupling graph.
    pub lambda2: f64,
    /// Detail-balance parameters used for a directed graph.
    pub balance: Option<Vec<f64>>,
    pub reference: Option<ReferenceBlock>,
    pub output: Option<String>,
}

pub const BUNDLED: [(&str, &str); 8] = [
    (
        "example1_c1_gal",
        include_str!("../scenarios/example1_c1_gal.toml"),
    ),
    (
        "example1_c1_dp",
        include_str!("../scenarios/example1_c1_dp.toml"),
    ),
    (
        "example1_c2_gal",
        include_str!("../scenarios/example1_c2_gal.toml"),
    ),
    (
        "example1_c2_dp",
        include_str!("../scenarios/example1_c2_dp.toml"),
    ),
    (
        "example2_c3_gal",
        include_str!("../scenarios/example2_c3_gal.toml"),
    ),
    (
        "example2_c3_dp",
        include_str!("../scenarios/example2_c3_dp.toml"),
    ),
    (
        "example2_c4_gal",
        include_str!("../scenarios/example2_c4_gal.toml"),
    ),
    (
        "example2_c4_dp",
        include_str!("../scenarios/example2_c4_dp.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<ScenarioConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| ScenarioConfig::from_toml_str(src).expect("bundled scenarios parse"))
}

/// Bundled scenarios belonging to `example1` or `example2`, sorted by name.
pub fn bundled_example(which: &str) -> Vec<ScenarioConfig> {
    let prefix = format!("{which}_");
    let mut out: Vec<ScenarioConfig> = BUNDLED
        .iter()
        .filter(|(n, _)| n.starts_with(&prefix))
        .map(|(n, _)| bundled(n).unwrap())
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(src)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario configs serialize")
    }

    /// Reads a scenario file, falling back to a bundled scenario of that name.
    pub fn load(path_or_name: &str) -> Result<Self, ConfigError> {
        let path = Path::new(path_or_name);
        if path.exists() {
            let src = fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            return Self::from_toml_str(&src);
        }
        bundled(path_or_name).ok_or_else(|| ConfigError::Unknown(path_or_name.to_string()))
    }

    pub fn apply(&mut self, o: &RunOverrides) {
        if let Some(v) = o.epsilon {
            self.run.epsilon = v;
        }
        if let Some(v) = o.step {
            self.run.step = v;
        }
        if let Some(v) = o.horizon {
            self.run.horizon = v;
        }
    }

    pub fn params(&self) -> Result<AlParams, ConfigError> {
        let p = &self.protocol;
        AlParams::new(p.rho, p.kappa1, p.kappa2, p.gamma1, p.gamma2)
            .map_err(|e| field_err("protocol", e))
    }

    /// Validates the document and assembles the scenario.
    pub fn prepare(&self) -> Result<PreparedScenario, ConfigError> {
        let kind = self.protocol.kind;
        let rows = &self.graph.weights;
        let g = if kind == ProtocolKind::SignedGal {
            if self.graph.directed {
                return Err(field_err(
                    "graph.directed",
                    "the signed-gal protocol needs an undirected signed graph",
                ));
            }
            WeightedGraph::signed(rows)
        } else if self.graph.directed {
            WeightedGraph::directed(rows)
        } else {
            WeightedGraph::undirected(rows)
        }
        .map_err(|e| field_err("graph.weights", e))?;

        if !graph::is_connected(&g) {
            let what = if g.is_directed() {
                "graph is not strongly connected"
            } else {
                "graph is not connected"
            };
            return Err(field_err("graph.weights", what));
        }

        let (weights, balance) = if g.is_directed() {
            let db = match &self.graph.balance {
                Some(p) => {
                    let db = DetailBalance::with_params(&g, p.clone());
                    if !db.valid {
                        return Err(field_err(
                            "graph.balance",
                            "p_i a_ij = p_j a_ji does not hold for the given parameters",
                        ));
                    }
                    db
                }
                None => {
                    let db = graph::analysis_detail_balance(&g);
                    if !db.valid {
                        return Err(field_err(
                            "graph.weights",
                            "directed graph is not detail-balanced (one-way edge or inconsistent weight ratios)",
                        ));
                    }
                    db
                }
            };
            let w = graph::mirror_weights(&g, &db).map_err(|e| field_err("graph.balance", e))?;
            (w, Some(db.p))
        } else {
            (g.weights().clone(), None)
        };
        if self.graph.balance.is_some() && !g.is_directed() {
            return Err(field_err(
                "graph.balance",
                "only directed graphs take balance parameters",
            ));
        }

        let abs_weights = SquareMatrix::from_fn(weights.dim(), |i, j| weights[(i, j)].abs());
        let lap = graph::laplacian(
            &WeightedGraph::from_matrix(abs_weights, false)
                .map_err(|e| field_err("graph.weights", e))?,
        );
        let lambda2 = LaplacianAnalysis::new(lap)
            .map_err(|e| field_err("graph.weights", e))?
            .lambda2;

        let params = self.params()?;
        let protocol =
            ProtocolSpec::new(kind, params, weights).map_err(|e| field_err("protocol", e))?;

        let n = g.n();
        let scales = match (&self.scales.setting, &self.scales.agents) {
            (Some(setting), None) => {
                let s: ScaleSetting = setting
                    .parse()
                    .map_err(|e| field_err("scales.setting", e))?;
                (1..=n)
                    .map(|i| {
                        builtin_setting(s.name(), i).map_err(|e| field_err("scales.setting", e))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            (None, Some(list)) => {
                if list.len() != n {
                    return Err(field_err(
                        "scales.agents",
                        format!("{} entries for {n} agents", list.len()),
                    ));
                }
                list.iter()
                    .enumerate()
                    .map(|(i, e)| {
                        resolve_scale(e)
                            .map_err(|err| field_err(format!("scales.agents[{i}]"), err))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            _ => {
                return Err(field_err(
                    "scales",
                    "give exactly one of `setting` or `agents`",
                ))
            }
        };

        if self.run.x0.len() != n {
            return Err(field_err(
                "run.x0",
                format!("{} entries for {n} agents", self.run.x0.len()),
            ));
        }
        let settings = RunSettings {
            horizon: self.run.horizon,
            step: self.run.step,
            epsilon: self.run.epsilon,
            record_stride: self.run.record_stride,
        };
        let scenario = Scenario::new(
            self.name.clone(),
            g,
            protocol,
            scales,
            self.run.x0.clone(),
            settings,
        )
        .map_err(|e| field_err("run", e))?;

        Ok(PreparedScenario {
            scenario,
            lambda2,
            balance,
            reference: self.reference.clone(),
            output: self.run.output.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_scenarios_prepare() {
        for (name, _) in BUNDLED {
            let cfg = bundled(name).unwrap();
            assert_eq!(cfg.name, name);
            let p = cfg.prepare().unwrap();
            assert_eq!(p.scenario.n(), 6);
        }
        assert_eq!(bundled_example("example1").len(), 4);
        assert_eq!(bundled_example("example2").len(), 4);
    }

    #[test]
    fn example2_balance_is_integer_scaled() {
        let p = bundled("example2_c3_gal").unwrap().prepare().unwrap();
        assert_eq!(p.balance.unwrap(), vec![10., 5., 2., 2., 4., 2.]);
        assert!((p.lambda2 - 0.9383).abs() < 5e-4);
    }

    #[test]
    fn round_trip_preserves_scenario() {
        for (name, _) in BUNDLED {
            let cfg = bundled(name).unwrap();
            let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(cfg, again);
            assert_eq!(cfg.prepare().unwrap(), again.prepare().unwrap());
        }
    }

    fn base() -> ScenarioConfig {
        bundled("example1_c2_gal").unwrap()
    }

    fn field_of(e: ConfigError) -> String {
        match e {
            ConfigError::Field { field, .. } => field,
            other => panic!("{other}"),
        }
    }

    #[test]
    fn one_way_edge_reports_detail_balance_failure() {
        let mut cfg = base();
        cfg.graph.directed = true;
        cfg.graph.weights = vec![vec![0., 1., 0.], vec![1., 0., 1.], vec![1., 1., 0.]];
        cfg.run.x0 = vec![1., 2., 3.];
        cfg.scales = ScalesBlock {
            setting: None,
            agents: Some(vec!["x".into(); 3]),
        };
        let err = cfg.prepare().unwrap_err();
        assert!(err.to_string().contains("not detail-balanced"), "{err}");
    }

    #[test]
    fn field_precise_errors() {
        let mut cfg = base();
        cfg.run.x0.pop();
        assert_eq!(field_of(cfg.prepare().unwrap_err()), "run.x0");

        let mut cfg = base();
        cfg.scales = ScalesBlock {
            setting: None,
            agents: Some(vec![
                "x".into(),
                "x".into(),
                "2*y".into(),
                "x".into(),
                "x".into(),
                "x".into(),
            ]),
        };
        assert_eq!(field_of(cfg.prepare().unwrap_err()), "scales.agents[2]");

        let mut cfg = base();
        cfg.graph.weights[0][1] = 0.0;
        cfg.graph.weights[1][0] = 0.0;
        cfg.graph.weights[0][2] = 0.0;
        cfg.graph.weights[2][0] = 0.0;
        cfg.graph.weights[0][3] = 0.0;
        cfg.graph.weights[3][0] = 0.0;
        let err = cfg.prepare().unwrap_err();
        assert!(err.to_string().contains("not connected"), "{err}");

        let mut cfg = base();
        cfg.protocol.kappa1 = 0.0;
        assert_eq!(field_of(cfg.prepare().unwrap_err()), "protocol");

        let mut cfg = base();
        cfg.run.step = 3e-4;
        assert_eq!(field_of(cfg.prepare().unwrap_err()), "run");
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let src = bundled_src("example1_c2_gal").replace("gamma1 = \"1/3\"", "gamma1 = \"2/4\"");
        let err = ScenarioConfig::from_toml_str(&src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("q, p, m, n are odd numbers"), "{msg}");
        assert!(msg.contains("line"), "{msg}");

        let src = bundled_src("example1_c2_gal").replace("[run]", "[run]\nbogus = 1");
        assert!(ScenarioConfig::from_toml_str(&src)
            .unwrap_err()
            .to_string()
            .contains("bogus"));
    }

    fn bundled_src(name: &str) -> &'static str {
        BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = base();
        cfg.apply(&RunOverrides {
            epsilon: Some(1e-2),
            step: None,
            horizon: Some(2.0),
        });
        assert_eq!(cfg.run.epsilon, 1e-2);
        assert_eq!(cfg.run.horizon, 2.0);
        assert_eq!(cfg.run.step, 1e-4);
    }

    #[test]
    fn load_falls_back_to_bundled() {
        assert_eq!(
            ScenarioConfig::load("example2_c4_dp").unwrap().name,
            "example2_c4_dp"
        );
        assert!(matches!(
            ScenarioConfig::load("no_such_scenario"),
            Err(ConfigError::Unknown(_))
        ));
    }
}
