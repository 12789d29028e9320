//! Experiment configuration: a TOML file describing the graph, exposure
//! model, outcome table, estimand and the list of (design, estimator)
//! strategies to evaluate.

use std::sync::Arc;

use serde::Deserialize;

use crate::design::{greedy_partition, partition_from_text, Design, DEFAULT_SUPPORT_CAP};
use crate::error::{Error, Result};
use crate::exposure::{Cell, ExposureModel};
use crate::graph::{generate_graph, GraphModel, InterferenceGraph, DEFAULT_REWIRE_P};
use crate::outcomes::{generate_params, ParamSpec, PotentialOutcomeTable};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub exposure: ExposureSpec,
    pub outcomes: OutcomeSpec,
    pub experiment: ExperimentSpec,
    #[serde(rename = "strategy")]
    pub strategies: Vec<StrategySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// `file` or one of the generator names.
    pub source: String,
    pub path: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub min_degree: Option<usize>,
    pub attractiveness: Option<f64>,
    pub neighborhood_size: Option<usize>,
    pub rewire_p: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureSpec {
    /// `binary`, `symmetric` or `general`.
    pub model: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    /// `uncorrelated`, `correlated` or `file`.
    pub source: String,
    pub seed: Option<u64>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// `dte`, `tte`, `gamma1`, `gamma2` or `marginal_self`.
    pub estimand: String,
    pub replicates: u64,
    pub master_seed: u64,
    /// `monte_carlo` or `exact_enumeration`.
    pub mode: String,
    #[serde(default = "default_propensity_samples")]
    pub propensity_samples: u64,
    #[serde(default = "default_support_cap")]
    pub support_cap: u64,
}

fn default_propensity_samples() -> u64 {
    100_000
}

fn default_support_cap() -> u64 {
    DEFAULT_SUPPORT_CAP as u64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub design: DesignSpec,
    pub estimator: String,
    /// Shrinkage factor for `shrunk_ht`.
    pub k: Option<f64>,
    /// Constants for the generalized difference estimator.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Crd {
        n_t: usize,
    },
    Bernoulli {
        p: f64,
    },
    RestrictedBernoulli {
        p: f64,
    },
    Cluster {
        k_t: usize,
        /// Number of clusters grown greedily; alternatively a partition file.
        clusters: Option<usize>,
        partition: Option<String>,
        #[serde(default)]
        partition_seed: u64,
    },
    IndependentSet {
        k_t: usize,
        #[serde(default = "default_mix_p")]
        mix_p: f64,
    },
    Rerandomized {
        base: Box<DesignSpec>,
        /// Required `(z, e)` cells with minimum counts.
        cells: Vec<(u8, u32)>,
        min_count: usize,
        #[serde(default = "default_max_tries")]
        max_tries: u64,
    },
}

fn default_mix_p() -> f64 {
    1.0
}

fn default_max_tries() -> u64 {
    100_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_graph(&self) -> Result<InterferenceGraph> {
        let spec = &self.graph;
        let need_n = || {
            spec.n
                .ok_or_else(|| Error::Config("graph.n is required for generators".into()))
        };
        match spec.source.as_str() {
            "file" => {
                let path = spec.path.as_ref().ok_or_else(|| {
                    Error::Config("graph.path is required for file graphs".into())
                })?;
                InterferenceGraph::from_edge_list_text(&std::fs::read_to_string(path)?)
            }
            "erdos_renyi" => generate_graph(
                GraphModel::ErdosRenyi {
                    p: spec
                        .p
                        .ok_or_else(|| Error::Config("graph.p is required".into()))?,
                },
                need_n()?,
                spec.seed.unwrap_or(0),
            ),
            "barabasi_albert" => generate_graph(
                GraphModel::BarabasiAlbert {
                    min_degree: spec
                        .min_degree
                        .ok_or_else(|| Error::Config("graph.min_degree is required".into()))?,
                    attractiveness: spec
                        .attractiveness
                        .ok_or_else(|| Error::Config("graph.attractiveness is required".into()))?,
                },
                need_n()?,
                spec.seed.unwrap_or(0),
            ),
            "small_world" => generate_graph(
                GraphModel::SmallWorld {
                    neighborhood_size: spec.neighborhood_size.ok_or_else(|| {
                        Error::Config("graph.neighborhood_size is required".into())
                    })?,
                    rewire_p: spec.rewire_p.unwrap_or(DEFAULT_REWIRE_P),
                },
                need_n()?,
                spec.seed.unwrap_or(0),
            ),
            other => Err(Error::Config(format!("unknown graph source `{other}`"))),
        }
    }

    pub fn exposure_model(&self) -> Result<ExposureModel> {
        ExposureModel::parse(&self.exposure.model)
    }

    pub fn build_table(&self, g: &InterferenceGraph) -> Result<PotentialOutcomeTable> {
        match self.outcomes.source.as_str() {
            "uncorrelated" => Ok(generate_params(
                ParamSpec::Uncorrelated,
                g,
                self.outcomes.seed.unwrap_or(0),
            )),
            "correlated" => Ok(generate_params(
                ParamSpec::Correlated,
                g,
                self.outcomes.seed.unwrap_or(0),
            )),
            "file" => {
                let path = self.outcomes.path.as_ref().ok_or_else(|| {
                    Error::Config("outcomes.path is required for file tables".into())
                })?;
                PotentialOutcomeTable::from_columnar_text(&std::fs::read_to_string(path)?)
            }
            other => Err(Error::Config(format!("unknown outcome source `{other}`"))),
        }
    }
}

impl DesignSpec {
    pub fn build(&self, g: &Arc<InterferenceGraph>, model: ExposureModel) -> Result<Design> {
        match self {
            DesignSpec::Crd { n_t } => Design::crd(g.n(), *n_t),
            DesignSpec::Bernoulli { p } => Design::bernoulli(g.n(), *p),
            DesignSpec::RestrictedBernoulli { p } => Design::restricted_bernoulli(g.n(), *p),
            DesignSpec::Cluster {
                k_t,
                clusters,
                partition,
                partition_seed,
            } => {
                let part = match (clusters, partition) {
                    (_, Some(path)) => partition_from_text(&std::fs::read_to_string(path)?, g.n())?,
                    (Some(k), None) => greedy_partition(g, *k, *partition_seed)?,
                    (None, None) => {
                        return Err(Error::Config(
                            "cluster design needs `clusters` or a `partition` file".into(),
                        ))
                    }
                };
                Design::cluster(part, *k_t)
            }
            DesignSpec::IndependentSet { k_t, mix_p } => {
                Design::independent_set(g.clone(), *k_t, *mix_p)
            }
            DesignSpec::Rerandomized {
                base,
                cells,
                min_count,
                max_tries,
            } => {
                let base = base.build(g, model)?;
                let required = cells
                    .iter()
                    .map(|&(z, e)| (Cell::new(z, e), *min_count))
                    .collect();
                Design::rerandomized(base, g.clone(), model, required, *max_tries)
            }
        }
    }
}
