//! Strategy evaluation: run (design × estimator) pairs against a target
//! estimand over Monte-Carlo replicates or by exact enumeration, and emit
//! bias / variance / MSE tables.

pub mod config;

use std::sync::Arc;

use rayon::prelude::*;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{self, CellWeights, Contrast, Estimate, ResolvedContrast};
use crate::exposure::{ExposureAssignment, ExposureModel};
use crate::graph::InterferenceGraph;
use crate::outcomes::{
    marginal_estimand, marginal_estimand_mc, EstimandKind, ExposedConvention, MarginalForm,
    PotentialOutcomeTable,
};
use crate::propensity::{auto_propensity, AutoOpts, PropensityTable};
use crate::util::{derive_rng, fnv1a, pairwise_sum};

pub use config::{DesignSpec, ExperimentConfig, StrategySpec};

/// Estimators the harness can dispatch, with their per-strategy knobs.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    /// Treated-minus-control means, exposure-blind.
    Naive,
    /// Difference of means over the two contrast cells.
    Dom,
    /// Fixed inverse-propensity weights.
    Ht,
    /// Self-normalized inverse-propensity weights.
    Hajek,
    /// Generalized difference with constant auxiliaries.
    Gd {
        a: f64,
        b: f64,
        lambda1: f64,
        lambda2: f64,
    },
    /// Regression estimator on `(1, z, e, z·e)` plus covariates.
    Greg,
    /// Minimum-norm weights that are unbiased under additive interference.
    ModelDep,
    /// `(1−k)` times the fixed-weight estimate.
    ShrunkHt { k: f64 },
}

impl EstimatorSpec {
    pub fn parse(spec: &StrategySpec) -> Result<Self> {
        Ok(match spec.estimator.as_str() {
            "naive" => Self::Naive,
            "dom" => Self::Dom,
            "ht" => Self::Ht,
            "hajek" => Self::Hajek,
            "gd" => Self::Gd {
                a: spec.a.unwrap_or(0.0),
                b: spec.b.unwrap_or(0.0),
                lambda1: spec.lambda1.unwrap_or(-1.0),
                lambda2: spec.lambda2.unwrap_or(-1.0),
            },
            "greg" => Self::Greg,
            "model_dep" => Self::ModelDep,
            "shrunk_ht" => Self::ShrunkHt {
                k: spec
                    .k
                    .ok_or_else(|| Error::Config("shrunk_ht needs a shrinkage factor k".into()))?,
            },
            other => return Err(Error::Config(format!("unknown estimator `{other}`"))),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Naive => "naive".into(),
            Self::Dom => "dom".into(),
            Self::Ht => "ht".into(),
            Self::Hajek => "hajek".into(),
            Self::Gd { .. } => "gd".into(),
            Self::Greg => "greg".into(),
            Self::ModelDep => "model_dep".into(),
            Self::ShrunkHt { k } => format!("shrunk_ht({k})"),
        }
    }

    pub fn needs_propensities(&self) -> bool {
        !matches!(self, Self::Naive | Self::Dom)
    }
}

/// The estimand a run targets: an average effect from the table, or the
/// design's own marginal contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Average(EstimandKind),
    /// `theta(psi)` with the policy equal to the strategy's design;
    /// estimated by the naive estimator.
    MarginalSelf,
}

impl Target {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "dte" => Self::Average(EstimandKind::Dte),
            "tte" => Self::Average(EstimandKind::Tte),
            "gamma1" => Self::Average(EstimandKind::Gamma1),
            "gamma2" => Self::Average(EstimandKind::Gamma2),
            "marginal_self" => Self::MarginalSelf,
            other => return Err(Error::Config(format!("unknown estimand `{other}`"))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Average(EstimandKind::Dte) => "dte",
            Self::Average(EstimandKind::Tte) => "tte",
            Self::Average(EstimandKind::Gamma1) => "gamma1",
            Self::Average(EstimandKind::Gamma2) => "gamma2",
            Self::MarginalSelf => "marginal_self",
        }
    }

    pub fn contrast(&self) -> Option<Contrast> {
        match self {
            Self::Average(EstimandKind::Dte) => Some(Contrast::dte()),
            Self::Average(EstimandKind::Tte) => Some(Contrast::tte()),
            Self::Average(EstimandKind::Gamma1) => Some(Contrast::gamma1()),
            Self::Average(EstimandKind::Gamma2) => Some(Contrast::gamma2()),
            Self::MarginalSelf => None,
        }
    }
}

/// Per-strategy evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub strategy: String,
    pub design: String,
    pub estimator: String,
    pub estimand: String,
    pub bias: f64,
    pub bias_se: f64,
    pub variance: f64,
    pub mse: f64,
    pub undef_rate: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// A strategy the run refused to evaluate, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedStrategy {
    pub strategy: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<StrategyResult>,
    pub skipped: Vec<SkippedStrategy>,
}

/// Everything needed to turn one realized draw into an estimate.
pub struct StrategyContext {
    spec: EstimatorSpec,
    rc: Option<ResolvedContrast>,
    pi: Option<PropensityTable>,
    weights: Option<CellWeights>,
    aux_treated: Vec<f64>,
    aux_baseline: Vec<f64>,
    covariates: Option<Vec<f64>>,
}

impl StrategyContext {
    /// Builds the context, computing propensities (closed-form, enumerated
    /// or Monte-Carlo, in that order of preference) when the estimator
    /// needs them.
    pub fn build(
        spec: EstimatorSpec,
        design: &Design,
        g: &InterferenceGraph,
        model: ExposureModel,
        table: &PotentialOutcomeTable,
        contrast: Option<Contrast>,
        pi_opts: &AutoOpts,
    ) -> Result<Self> {
        let rc = contrast.map(|c| c.resolve(g, model));
        let pi = if spec.needs_propensities() {
            Some(auto_propensity(design, g, model, pi_opts)?)
        } else {
            None
        };
        let weights = if let EstimatorSpec::ModelDep = spec {
            Some(estimator::model_dependent_weights(
                pi.as_ref().expect("model_dep needs propensities"),
            )?)
        } else {
            None
        };
        let n = g.n();
        let (aux_treated, aux_baseline) = match spec {
            EstimatorSpec::Gd { a, b, .. } => (vec![a; n], vec![b; n]),
            _ => (Vec::new(), Vec::new()),
        };
        let covariates = table
            .units()
            .iter()
            .map(|u| u.covariate)
            .collect::<Option<Vec<f64>>>();
        Ok(Self {
            spec,
            rc,
            pi,
            weights,
            aux_treated,
            aux_baseline,
            covariates,
        })
    }

    fn rc(&self) -> Result<&ResolvedContrast> {
        self.rc.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "estimator `{}` needs a cell contrast; the marginal estimand supports `naive` only",
                self.spec.label()
            ))
        })
    }

    /// One draw in, one estimate out.
    pub fn estimate(&self, obs: &[f64], a: &ExposureAssignment) -> Result<Estimate> {
        match &self.spec {
            EstimatorSpec::Naive => Ok(estimator::naive_dim(obs, a)),
            EstimatorSpec::Dom => Ok(estimator::cell_dim(obs, a, self.rc()?)),
            EstimatorSpec::Ht => {
                estimator::horvitz_thompson(obs, a, self.pi.as_ref().unwrap(), self.rc()?)
            }
            EstimatorSpec::Hajek => estimator::hajek(obs, a, self.pi.as_ref().unwrap(), self.rc()?),
            EstimatorSpec::Gd {
                lambda1, lambda2, ..
            } => estimator::generalized_difference(
                obs,
                a,
                self.pi.as_ref().unwrap(),
                self.rc()?,
                &self.aux_treated,
                &self.aux_baseline,
                *lambda1,
                *lambda2,
            ),
            EstimatorSpec::Greg => estimator::greg(
                obs,
                a,
                self.pi.as_ref().unwrap(),
                self.rc()?,
                self.covariates.as_deref(),
            ),
            EstimatorSpec::ModelDep => Ok(estimator::estimate_with_cell_weights(
                obs,
                a,
                self.weights.as_ref().unwrap(),
            )),
            EstimatorSpec::ShrunkHt { k } => {
                estimator::shrunk_ht(obs, a, self.pi.as_ref().unwrap(), self.rc()?, *k)
            }
        }
    }

    /// Positivity pre-check over the contrast cells, where applicable.
    pub fn precheck(&self) -> std::result::Result<(), String> {
        let (Some(pi), Some(rc)) = (&self.pi, &self.rc) else {
            return Ok(());
        };
        if matches!(self.spec, EstimatorSpec::ModelDep) {
            return Ok(()); // feasibility already established by the solver
        }
        for i in 0..rc.n() {
            for cell in [rc.tau1[i], rc.tau0[i]] {
                let p = pi.pi(i, cell);
                if !(p > 0.0 && p < 1.0) {
                    return Err(format!(
                        "unit {i} has propensity {p} for cell {cell}; no unbiased weighting exists"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Exact mean, variance and undefined mass of a per-draw statistic over a
/// design's support. Undefined draws are excluded from the conditional
/// moments and their probability mass reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub expectation: f64,
    pub variance: f64,
    pub undefined_mass: f64,
    pub support_points: u64,
}

/// Enumerates the support and aggregates an arbitrary statistic. This is
/// the oracle behind every closed-form cross-check.
pub fn exact_expectation_with<F>(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    support_cap: u128,
    mut f: F,
) -> Result<ExactMoments>
where
    F: FnMut(&[u8], &ExposureAssignment) -> Option<f64>,
{
    let support = design.enumerate_support(support_cap)?;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut undefined = 0.0;
    let mut points = 0u64;
    for (z, p) in &support {
        let a = model.expose(g, z);
        match f(z, &a) {
            Some(v) => {
                mean += p * v;
                second += p * v * v;
            }
            None => undefined += p,
        }
        points += 1;
    }
    let defined = 1.0 - undefined;
    if defined <= 0.0 {
        return Err(Error::EstimatorPrecondition(
            "the statistic is undefined on the entire support".into(),
        ));
    }
    let expectation = mean / defined;
    let variance = (second / defined - expectation * expectation).max(0.0);
    Ok(ExactMoments {
        expectation,
        variance,
        undefined_mass: undefined,
        support_points: points,
    })
}

/// Exact moments of a named estimator on a table. Propensities for the
/// weighted estimators come from exact enumeration.
pub fn exact_expectation(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    table: &PotentialOutcomeTable,
    spec: EstimatorSpec,
    contrast: Contrast,
    support_cap: u128,
) -> Result<ExactMoments> {
    let ctx = StrategyContext::build(
        spec,
        design,
        g,
        model,
        table,
        Some(contrast),
        &AutoOpts {
            support_cap,
            ..AutoOpts::default()
        },
    )?;
    exact_expectation_with(design, g, model, support_cap, |_, a| {
        let obs = table.realize(a);
        match ctx.estimate(&obs, a) {
            Ok(e) => e.value,
            Err(_) => None,
        }
    })
}

/// Runs every strategy in the config. Deterministic in the config,
/// including the master seed; replicates are evaluated on independent
/// derived streams, so strategy order and parallel scheduling do not
/// change any number.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = Arc::new(cfg.build_graph()?);
    let model = cfg.exposure_model()?;
    let table = Arc::new(cfg.build_table(&g)?);
    let target = Target::parse(&cfg.experiment.estimand)?;
    let support_cap = cfg.experiment.support_cap as u128;
    let master = cfg.experiment.master_seed;
    let exact_mode = match cfg.experiment.mode.as_str() {
        "monte_carlo" => false,
        "exact_enumeration" => true,
        other => return Err(Error::Config(format!("unknown mode `{other}`"))),
    };

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for strat in &cfg.strategies {
        let spec = EstimatorSpec::parse(strat)?;
        let design = strat.design.build(&g, model)?;
        let label = format!("{}+{}", design.label(), spec.label());

        let theta = match target {
            Target::Average(kind) => {
                table.true_estimand(kind, ExposedConvention::AllNeighborsTreated)?
            }
            Target::MarginalSelf => {
                if !matches!(spec, EstimatorSpec::Naive) {
                    skipped.push(SkippedStrategy {
                        strategy: label,
                        reason: "the marginal estimand is evaluated with the naive estimator only"
                            .into(),
                    });
                    continue;
                }
                match marginal_estimand(
                    &table,
                    &g,
                    model,
                    &design,
                    None,
                    MarginalForm::ConditionalContrast,
                    support_cap,
                ) {
                    Ok(m) => m.value,
                    Err(Error::SupportTooLarge { .. }) => {
                        marginal_estimand_mc(
                            &table,
                            &g,
                            model,
                            &design,
                            None,
                            MarginalForm::ConditionalContrast,
                            cfg.experiment.propensity_samples,
                            derive_seed(master, &label, 0xead),
                        )?
                        .value
                    }
                    Err(e) => return Err(e),
                }
            }
        };

        let pi_opts = AutoOpts {
            support_cap,
            mc_samples: cfg.experiment.propensity_samples,
            seed: derive_seed(master, &label, 0x91),
        };
        let ctx = match StrategyContext::build(
            spec.clone(),
            &design,
            &g,
            model,
            &table,
            target.contrast(),
            &pi_opts,
        ) {
            Ok(ctx) => ctx,
            Err(Error::InfeasibleWeights { unit, reason }) => {
                skipped.push(SkippedStrategy {
                    strategy: label,
                    reason: format!("weight system infeasible for unit {unit}: {reason}"),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Err(reason) = ctx.precheck() {
            skipped.push(SkippedStrategy {
                strategy: label,
                reason,
            });
            continue;
        }

        let result = if exact_mode {
            let moments = exact_expectation_with(&design, &g, model, support_cap, |_, a| {
                let obs = table.realize(a);
                match ctx.estimate(&obs, a) {
                    Ok(e) => e.value,
                    Err(_) => None,
                }
            })?;
            let bias = moments.expectation - theta;
            StrategyResult {
                strategy: label.clone(),
                design: design.label(),
                estimator: spec.label(),
                estimand: target.label().into(),
                bias,
                bias_se: 0.0,
                variance: moments.variance,
                mse: bias * bias + moments.variance,
                undef_rate: moments.undefined_mass,
                replicates: moments.support_points,
                seed: master,
            }
        } else {
            let replicates = cfg.experiment.replicates;
            let strategy_tag = fnv1a(&label);
            let draws: Vec<Option<f64>> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = derive_rng(master, &[strategy_tag, r]);
                    let z = design.sample(&mut rng).ok()?;
                    let a = model.expose(&g, &z);
                    let obs = table.realize(&a);
                    match ctx.estimate(&obs, &a) {
                        Ok(e) => e.value,
                        Err(_) => None,
                    }
                })
                .collect();
            let defined: Vec<f64> = draws.iter().copied().flatten().collect();
            if defined.is_empty() {
                skipped.push(SkippedStrategy {
                    strategy: label,
                    reason: "every replicate was undefined".into(),
                });
                continue;
            }
            let r = defined.len() as f64;
            let mean = pairwise_sum(&defined) / r;
            let centered: Vec<f64> = defined.iter().map(|v| (v - mean).powi(2)).collect();
            let variance = pairwise_sum(&centered) / r;
            let sq_err: Vec<f64> = defined.iter().map(|v| (v - theta).powi(2)).collect();
            let mse = pairwise_sum(&sq_err) / r;
            let bias = mean - theta;
            StrategyResult {
                strategy: label.clone(),
                design: design.label(),
                estimator: spec.label(),
                estimand: target.label().into(),
                bias,
                bias_se: (variance / r).sqrt(),
                variance,
                mse,
                undef_rate: 1.0 - r / replicates as f64,
                replicates,
                seed: master,
            }
        };
        results.push(result);
    }
    Ok(RunOutput { results, skipped })
}

fn derive_seed(master: u64, label: &str, tag: u64) -> u64 {
    use rand::RngCore;
    derive_rng(master, &[fnv1a(label), tag]).next_u64()
}

/// Output format for [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str =
    "strategy,design,estimator,estimand,bias,bias_se,var,mse,undef_rate,replicates,seed";

/// Renders results as CSV with a stable column order and formatting, so
/// identical configs produce byte-identical files.
pub fn to_csv(results: &[StrategyResult]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6},{},{}",
            r.strategy,
            r.design,
            r.estimator,
            r.estimand,
            r.bias,
            r.bias_se,
            r.variance,
            r.mse,
            r.undef_rate,
            r.replicates,
            r.seed
        );
    }
    s
}

/// Renders results as a JSON array mirroring the CSV columns.
pub fn to_json(results: &[StrategyResult]) -> String {
    let records: Vec<serde_json::Value> = results
        .iter()
        .map(|r| {
            serde_json::json!({
                "strategy": r.strategy,
                "design": r.design,
                "estimator": r.estimator,
                "estimand": r.estimand,
                "bias": r.bias,
                "bias_se": r.bias_se,
                "var": r.variance,
                "mse": r.mse,
                "undef_rate": r.undef_rate,
                "replicates": r.replicates,
                "seed": r.seed,
            })
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("plain records always serialize")
}

/// Writes results to a file in the chosen format.
pub fn emit(results: &[StrategyResult], format: EmitFormat, path: &std::path::Path) -> Result<()> {
    let body = match format {
        EmitFormat::Csv => to_csv(results),
        EmitFormat::Json => to_json(results),
    };
    std::fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Design;
    use crate::outcomes::linear_symmetric_table;

    fn config_text(mode: &str, estimand: &str, seed: u64) -> String {
        format!(
            r#"
[graph]
source = "erdos_renyi"
n = 9
p = 0.2
seed = 4

[exposure]
model = "binary"

[outcomes]
source = "uncorrelated"
seed = 2

[experiment]
estimand = "{estimand}"
replicates = 400
master_seed = {seed}
mode = "{mode}"

[[strategy]]
design = {{ kind = "crd", n_t = 3 }}
estimator = "ht"

[[strategy]]
design = {{ kind = "crd", n_t = 3 }}
estimator = "naive"

[[strategy]]
design = {{ kind = "independent_set", k_t = 2 }}
estimator = "dom"
"#
        )
    }

    #[test]
    fn exact_mode_ht_is_unbiased() {
        let cfg = ExperimentConfig::from_toml(&config_text("exact_enumeration", "dte", 1)).unwrap();
        let out = run(&cfg).unwrap();
        assert!(out.skipped.is_empty(), "skipped: {:?}", out.skipped);
        let ht = out.results.iter().find(|r| r.estimator == "ht").unwrap();
        assert!(ht.bias.abs() < 1e-10, "ht bias {}", ht.bias);
        // mse = bias² + variance for exact results.
        assert!((ht.mse - (ht.bias * ht.bias + ht.variance)).abs() < 1e-12);
    }

    #[test]
    fn mc_and_exact_agree_within_monte_carlo_error() {
        let exact =
            run(&ExperimentConfig::from_toml(&config_text("exact_enumeration", "dte", 1)).unwrap())
                .unwrap();
        let mc = run(&ExperimentConfig::from_toml(&config_text("monte_carlo", "dte", 1)).unwrap())
            .unwrap();
        for (e, m) in exact.results.iter().zip(&mc.results) {
            assert_eq!(e.strategy, m.strategy);
            let se = m.bias_se.max(1e-6);
            assert!(
                (e.bias - m.bias).abs() < 4.0 * se,
                "{}: exact {} vs mc {} (se {se})",
                e.strategy,
                e.bias,
                m.bias
            );
        }
    }

    #[test]
    fn mc_results_are_deterministic_and_mse_identity_holds() {
        let cfg = ExperimentConfig::from_toml(&config_text("monte_carlo", "dte", 7)).unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(to_csv(&a.results), to_csv(&b.results));
        for r in &a.results {
            assert!(
                (r.mse - (r.bias * r.bias + r.variance)).abs() < 1e-9,
                "{}: mse {} vs {}",
                r.strategy,
                r.mse,
                r.bias * r.bias + r.variance
            );
        }
    }

    #[test]
    fn strategy_order_does_not_change_results() {
        let cfg_text = config_text("monte_carlo", "dte", 7);
        let cfg = ExperimentConfig::from_toml(&cfg_text).unwrap();
        let mut reversed = cfg.clone();
        reversed.strategies.reverse();
        let a = run(&cfg).unwrap();
        let b = run(&reversed).unwrap();
        for r in &a.results {
            let twin = b.results.iter().find(|x| x.strategy == r.strategy).unwrap();
            assert_eq!(r, twin);
        }
    }

    #[test]
    fn cluster_ht_dte_is_skipped_with_reason() {
        let toml = r#"
[graph]
source = "file"
path = "UNUSED"

[exposure]
model = "binary"

[outcomes]
source = "uncorrelated"

[experiment]
estimand = "dte"
replicates = 10
master_seed = 1
mode = "monte_carlo"

[[strategy]]
design = { kind = "cluster", k_t = 1, clusters = 2 }
estimator = "ht"
"#;
        // Use an in-memory graph instead of a file: build config pieces by hand.
        let mut cfg = ExperimentConfig::from_toml(toml).unwrap();
        cfg.graph.source = "erdos_renyi".into();
        cfg.graph.path = None;
        cfg.graph.n = Some(6);
        cfg.graph.p = Some(0.9);
        cfg.graph.seed = Some(1);
        let out = run(&cfg).unwrap();
        assert!(out.results.is_empty());
        assert_eq!(out.skipped.len(), 1);
        assert!(out.skipped[0].reason.contains("propensity"));
    }

    #[test]
    fn marginal_self_naive_is_exactly_unbiased() {
        let mut cfg =
            ExperimentConfig::from_toml(&config_text("exact_enumeration", "marginal_self", 3))
                .unwrap();
        cfg.strategies.truncate(2); // keep crd+ht (skipped) and crd+naive
        let out = run(&cfg).unwrap();
        assert_eq!(out.skipped.len(), 1, "ht is not defined for marginal_self");
        let naive = &out.results[0];
        assert_eq!(naive.estimator, "naive");
        assert!(naive.bias.abs() < 1e-10, "bias {}", naive.bias);
    }

    #[test]
    fn mc_mode_reproduces_the_zero_bias_corner() {
        // Additive two-by-two outcomes with fewer controls than any degree:
        // the naive estimator is exactly unbiased, so the Monte-Carlo bias
        // estimate must sit within its own noise band.
        let toml = r#"
[graph]
source = "erdos_renyi"
n = 5
p = 0.5
seed = 0

[exposure]
model = "binary"

[outcomes]
source = "file"
path = "UNSET"

[experiment]
estimand = "dte"
replicates = 2000
master_seed = 5
mode = "monte_carlo"

[[strategy]]
design = { kind = "crd", n_t = 4 }
estimator = "naive"
"#;
        let mut cfg = ExperimentConfig::from_toml(toml).unwrap();
        // Cycle graph (all degrees 2 > n_c = 1) with an additive table.
        let dir = std::env::temp_dir().join("il-zero-bias-corner");
        std::fs::create_dir_all(&dir).unwrap();
        let g = InterferenceGraph::cycle(5);
        let t = crate::outcomes::binary_table(
            &g,
            &[1.0, 0.4, -0.2, 0.8, 1.3],
            &[0.5, 1.0, 0.7, 0.2, 0.9],
            &[0.6, 0.3, 0.9, 0.4, 0.7],
            &[0.0; 5],
        )
        .unwrap();
        let graph_path = dir.join("g.txt");
        let table_path = dir.join("t.txt");
        std::fs::write(&graph_path, g.to_edge_list_text()).unwrap();
        std::fs::write(&table_path, t.to_columnar_text()).unwrap();
        cfg.graph.source = "file".into();
        cfg.graph.path = Some(graph_path.display().to_string());
        cfg.outcomes.path = Some(table_path.display().to_string());
        let out = run(&cfg).unwrap();
        let r = &out.results[0];
        assert!(
            r.bias.abs() < 3.0 * r.bias_se,
            "bias {} ± {}",
            r.bias,
            r.bias_se
        );
    }

    #[test]
    fn exact_expectation_constant_statistic() {
        let g = InterferenceGraph::path(4);
        let d = Design::crd(4, 2).unwrap();
        let m = exact_expectation_with(&d, &g, ExposureModel::BinaryAny, 1 << 20, |_, _| Some(2.5))
            .unwrap();
        assert!((m.expectation - 2.5).abs() < 1e-12);
        assert!(m.variance.abs() < 1e-15);
        assert_eq!(m.undefined_mass, 0.0);
        assert_eq!(m.support_points, 6);
    }

    #[test]
    fn exact_expectation_reports_undefined_mass() {
        // Unrestricted coin flips leave the naive estimator undefined on
        // the two all-same draws.
        let g = InterferenceGraph::empty(3);
        let d = Design::bernoulli(3, 0.5).unwrap();
        let t = linear_symmetric_table(&g, &[1.0; 3], &[1.0; 3], &[0.0; 3], &[0.0; 3]).unwrap();
        let model = ExposureModel::BinaryAny;
        let m = exact_expectation_with(&d, &g, model, 1 << 20, |_, a| {
            let obs = t.realize(a);
            crate::estimator::naive_dim(&obs, a).value
        })
        .unwrap();
        assert!((m.undefined_mass - 0.25).abs() < 1e-12);
        assert!((m.expectation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_json_round_trip_shape() {
        let results = vec![StrategyResult {
            strategy: "crd(3)+ht".into(),
            design: "crd(3)".into(),
            estimator: "ht".into(),
            estimand: "dte".into(),
            bias: 0.5,
            bias_se: 0.01,
            variance: 2.0,
            mse: 2.25,
            undef_rate: 0.0,
            replicates: 100,
            seed: 42,
        }];
        let csv = to_csv(&results);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("crd(3)+ht,crd(3),ht,dte,"));
        assert_eq!(row.split(',').count(), 11);
        assert!(lines.next().is_none());

        let json = to_json(&results);
        let parsed: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0]["mse"], 2.25);
        // Empty results: header-only CSV.
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    }
}
