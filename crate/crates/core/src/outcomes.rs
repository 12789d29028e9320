//! Fixed potential outcomes and the estimands defined on them.
//!
//! Every unit's potential outcomes are stored through the linear
//! decomposition
//!
//! ```text
//! Y_i(z, e) = alpha_i + beta_i·z + B_i(e) + z·C_i(e),    B_i(0) = C_i(0) = 0
//! ```
//!
//! which parametrizes all `2·K_i` outcomes of a unit with `2·K_i` numbers
//! and cleanly separates the direct part (`alpha`, `beta`) from the
//! interference part (`B`) and their interaction (`C`).

use rand_distr::{Bernoulli, Distribution, Gamma, LogNormal, Normal, Uniform};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::exposure::{ExposureAssignment, ExposureModel};
use crate::graph::InterferenceGraph;
use crate::propensity;
use crate::util::derive_rng;

/// Decomposed potential outcomes of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitOutcomes {
    pub alpha: f64,
    pub beta: f64,
    /// `b[e]` is the additive interference effect at level `e`; `b[0] = 0`.
    pub b: Vec<f64>,
    /// `c[e]` is the treatment-interference interaction at level `e`; `c[0] = 0`.
    pub c: Vec<f64>,
    /// Optional numeric covariate (used by regression estimators).
    pub covariate: Option<f64>,
    /// Optional binary covariate.
    pub group: Option<u8>,
    /// Exposure level this unit takes when every other unit is treated.
    pub exposed_level: u32,
}

impl UnitOutcomes {
    pub fn levels(&self) -> u32 {
        self.b.len() as u32
    }
}

/// The full table of fixed potential outcomes, one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeTable {
    units: Vec<UnitOutcomes>,
}

/// Which level counts as "exposed" in total-effect style estimands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposedConvention {
    /// The level a unit reaches when all its neighbors are treated
    /// (default; makes the total effect agree with the all-treated vs
    /// all-control policy contrast on any graph).
    AllNeighborsTreated,
    /// Literal level 1, e.g. exactly one treated neighbor under the
    /// count model. Errors on units that do not carry level 1.
    LevelOne,
}

/// The average causal effects the engine knows how to target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimandKind {
    /// Direct treatment effect: mean of `Y(1,0) − Y(0,0)`.
    Dte,
    /// Total treatment effect: mean of `Y(1,exposed) − Y(0,0)`.
    Tte,
    /// Interference effect on controls: mean of `Y(0,exposed) − Y(0,0)`.
    Gamma1,
    /// Interference effect on treated: mean of `Y(1,exposed) − Y(1,0)`.
    Gamma2,
}

impl PotentialOutcomeTable {
    pub fn new(units: Vec<UnitOutcomes>) -> Result<Self> {
        for (i, u) in units.iter().enumerate() {
            if u.b.is_empty() || u.c.len() != u.b.len() {
                return Err(Error::InvalidParam(format!(
                    "unit {i}: B and C must cover the same nonempty level range"
                )));
            }
            if u.b[0] != 0.0 || u.c[0] != 0.0 {
                return Err(Error::InvalidParam(format!(
                    "unit {i}: B(0) and C(0) must be exactly 0"
                )));
            }
            if u.exposed_level >= u.levels() {
                return Err(Error::InvalidParam(format!(
                    "unit {i}: exposed level {} out of range",
                    u.exposed_level
                )));
            }
        }
        Ok(Self { units })
    }

    /// Rebuilds the decomposition from raw outcomes `y0[e] = Y(0,e)`,
    /// `y1[e] = Y(1,e)`. The inverse map is exact, so
    /// [`potential_outcome`](Self::potential_outcome) reproduces every input.
    pub fn from_raw(raw: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut units = Vec::with_capacity(raw.len());
        for (i, (y0, y1)) in raw.iter().enumerate() {
            if y0.is_empty() || y0.len() != y1.len() {
                return Err(Error::InvalidParam(format!(
                    "unit {i}: raw rows must be nonempty and of equal length"
                )));
            }
            let alpha = y0[0];
            let beta = y1[0] - y0[0];
            let b: Vec<f64> = y0.iter().map(|v| v - y0[0]).collect();
            let c: Vec<f64> = y0
                .iter()
                .zip(y1)
                .map(|(v0, v1)| v1 - y1[0] - v0 + y0[0])
                .collect();
            units.push(UnitOutcomes {
                alpha,
                beta,
                b,
                c,
                covariate: None,
                group: None,
                exposed_level: (y0.len() - 1) as u32,
            });
        }
        Self::new(units)
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, i: usize) -> &UnitOutcomes {
        &self.units[i]
    }

    pub fn units(&self) -> &[UnitOutcomes] {
        &self.units
    }

    pub fn levels(&self, i: usize) -> u32 {
        self.units[i].levels()
    }

    /// `Y_i(z, e)`.
    pub fn potential_outcome(&self, i: usize, z: u8, e: u32) -> Result<f64> {
        let u = &self.units[i];
        if e >= u.levels() {
            return Err(Error::LevelOutOfRange {
                unit: i,
                level: e,
                levels: u.levels(),
            });
        }
        let z = z as f64;
        Ok(u.alpha + u.beta * z + u.b[e as usize] + z * u.c[e as usize])
    }

    /// Observed outcomes under a realized assignment: `Y_i^obs = Y_i(z_i, e_i)`.
    ///
    /// Panics if the assignment hits an exposure level the table does not
    /// carry, which means the table was built for a different graph or model.
    pub fn realize(&self, a: &ExposureAssignment) -> Vec<f64> {
        assert_eq!(a.n(), self.n(), "assignment length must equal table size");
        (0..self.n())
            .map(|i| {
                self.potential_outcome(i, a.treatment(i), a.level(i))
                    .expect("assignment level outside table range")
            })
            .collect()
    }

    /// Resolves the "exposed" level of a unit under a convention.
    pub fn exposed_level(&self, i: usize, conv: ExposedConvention) -> Result<u32> {
        match conv {
            ExposedConvention::AllNeighborsTreated => Ok(self.units[i].exposed_level),
            ExposedConvention::LevelOne => {
                if self.units[i].levels() < 2 {
                    Err(Error::MissingLevel { unit: i, level: 1 })
                } else {
                    Ok(1)
                }
            }
        }
    }

    /// True value of an average causal effect, straight from the table.
    pub fn true_estimand(&self, which: EstimandKind, conv: ExposedConvention) -> Result<f64> {
        let n = self.n() as f64;
        let mut total = 0.0;
        for i in 0..self.n() {
            let u = &self.units[i];
            total += match which {
                EstimandKind::Dte => u.beta,
                EstimandKind::Tte => {
                    let l = self.exposed_level(i, conv)?;
                    self.potential_outcome(i, 1, l)? - u.alpha
                }
                EstimandKind::Gamma1 => {
                    let l = self.exposed_level(i, conv)?;
                    u.b[l as usize]
                }
                EstimandKind::Gamma2 => {
                    let l = self.exposed_level(i, conv)?;
                    u.b[l as usize] + u.c[l as usize]
                }
            };
        }
        Ok(total / n)
    }

    /// Serializes to the columnar replay format, one line per unit:
    /// `unit alpha beta b0,b1,… c0,c1,… x y exposed` with `-` marking an
    /// absent covariate.
    pub fn to_columnar_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "# unit alpha beta b_levels c_levels x y exposed");
        for (i, u) in self.units.iter().enumerate() {
            let b =
                u.b.iter()
                    .map(|v| format!("{v:e}"))
                    .collect::<Vec<_>>()
                    .join(",");
            let c =
                u.c.iter()
                    .map(|v| format!("{v:e}"))
                    .collect::<Vec<_>>()
                    .join(",");
            let x = u.covariate.map_or("-".to_string(), |v| format!("{v:e}"));
            let y = u.group.map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{i} {:e} {:e} {b} {c} {x} {y} {}",
                u.alpha, u.beta, u.exposed_level
            );
        }
        s
    }

    /// Parses the format written by [`to_columnar_text`](Self::to_columnar_text).
    pub fn from_columnar_text(text: &str) -> Result<Self> {
        let mut units = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(Error::Parse(format!(
                    "line {}: expected 8 columns, found {}",
                    ln + 1,
                    fields.len()
                )));
            }
            let bad = |what: &str, e: std::num::ParseFloatError| {
                Error::Parse(format!("line {}: bad {what}: {e}", ln + 1))
            };
            let alpha: f64 = fields[1].parse().map_err(|e| bad("alpha", e))?;
            let beta: f64 = fields[2].parse().map_err(|e| bad("beta", e))?;
            let parse_levels = |s: &str, what: &str| -> Result<Vec<f64>> {
                s.split(',')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("line {}: bad {what}: {e}", ln + 1)))
                    })
                    .collect()
            };
            let b = parse_levels(fields[3], "B level")?;
            let c = parse_levels(fields[4], "C level")?;
            let covariate = if fields[5] == "-" {
                None
            } else {
                Some(fields[5].parse().map_err(|e| bad("covariate", e))?)
            };
            let group = if fields[6] == "-" {
                None
            } else {
                Some(
                    fields[6]
                        .parse::<u8>()
                        .map_err(|e| Error::Parse(format!("line {}: bad group: {e}", ln + 1)))?,
                )
            };
            let exposed_level: u32 = fields[7]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: bad exposed level: {e}", ln + 1)))?;
            units.push(UnitOutcomes {
                alpha,
                beta,
                b,
                c,
                covariate,
                group,
                exposed_level,
            });
        }
        Self::new(units)
    }
}

/// Structural restrictions that tie a unit's potential outcomes together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StructuralModel {
    Unrestricted,
    /// No treatment-interference interaction: `C_i ≡ 0`.
    Additive,
    /// Shared parameters across units (population means substituted).
    ConstantEffects,
    /// Interference enters linearly in the level: `B_i(e) = B_i(1)·e`,
    /// `C_i(e) = C_i(1)·e`.
    Linear,
    /// Constant direct effects and no interaction.
    ConstantAdditive,
    /// Common direct effect `beta` for every unit.
    SharpNull {
        beta: f64,
    },
}

impl StructuralModel {
    /// Projects a table onto the restricted class. Level ranges and the
    /// `B(0) = C(0) = 0` normalization are preserved.
    pub fn restrict(&self, table: &PotentialOutcomeTable) -> PotentialOutcomeTable {
        let mut units = table.units.clone();
        match self {
            StructuralModel::Unrestricted => {}
            StructuralModel::Additive => {
                for u in &mut units {
                    u.c.iter_mut().for_each(|v| *v = 0.0);
                }
            }
            StructuralModel::ConstantEffects => {
                let n = units.len() as f64;
                let alpha = units.iter().map(|u| u.alpha).sum::<f64>() / n;
                let beta = units.iter().map(|u| u.beta).sum::<f64>() / n;
                let max_levels = units.iter().map(|u| u.b.len()).max().unwrap_or(1);
                for e in 1..max_levels {
                    let have: Vec<(f64, f64)> = units
                        .iter()
                        .filter(|u| u.b.len() > e)
                        .map(|u| (u.b[e], u.c[e]))
                        .collect();
                    let k = have.len() as f64;
                    let b = have.iter().map(|(b, _)| b).sum::<f64>() / k;
                    let c = have.iter().map(|(_, c)| c).sum::<f64>() / k;
                    for u in &mut units {
                        if u.b.len() > e {
                            u.b[e] = b;
                            u.c[e] = c;
                        }
                    }
                }
                for u in &mut units {
                    u.alpha = alpha;
                    u.beta = beta;
                }
            }
            StructuralModel::Linear => {
                for u in &mut units {
                    let gb = if u.b.len() > 1 { u.b[1] } else { 0.0 };
                    let gc = if u.c.len() > 1 { u.c[1] } else { 0.0 };
                    for e in 0..u.b.len() {
                        u.b[e] = gb * e as f64;
                        u.c[e] = gc * e as f64;
                    }
                }
            }
            StructuralModel::ConstantAdditive => {
                let n = units.len() as f64;
                let alpha = units.iter().map(|u| u.alpha).sum::<f64>() / n;
                let beta = units.iter().map(|u| u.beta).sum::<f64>() / n;
                for u in &mut units {
                    u.alpha = alpha;
                    u.beta = beta;
                    u.c.iter_mut().for_each(|v| *v = 0.0);
                }
            }
            StructuralModel::SharpNull { beta } => {
                for u in &mut units {
                    u.beta = *beta;
                }
            }
        }
        PotentialOutcomeTable::new(units).expect("restriction preserves invariants")
    }
}

/// Builds a table for the count-exposure linear model
/// `Y = alpha_i + beta_i·z + gamma_i·e + theta_i·z·e`, `e ∈ 0..=d_i`.
pub fn linear_symmetric_table(
    g: &InterferenceGraph,
    alphas: &[f64],
    betas: &[f64],
    gammas: &[f64],
    thetas: &[f64],
) -> Result<PotentialOutcomeTable> {
    let n = g.n();
    if [alphas.len(), betas.len(), gammas.len(), thetas.len()] != [n, n, n, n] {
        return Err(Error::InvalidParam(
            "parameter vectors must all have length n".into(),
        ));
    }
    let units = (0..n)
        .map(|i| {
            let d = g.degree(i);
            UnitOutcomes {
                alpha: alphas[i],
                beta: betas[i],
                b: (0..=d).map(|e| gammas[i] * e as f64).collect(),
                c: (0..=d).map(|e| thetas[i] * e as f64).collect(),
                covariate: None,
                group: None,
                exposed_level: d as u32,
            }
        })
        .collect();
    PotentialOutcomeTable::new(units)
}

/// Builds a table for the two-by-two (binary exposure) model
/// `Y = alpha_i + beta_i·z + gamma_i·e + delta_i·z·e`, `e ∈ {0,1}`.
pub fn binary_table(
    g: &InterferenceGraph,
    alphas: &[f64],
    betas: &[f64],
    gammas: &[f64],
    deltas: &[f64],
) -> Result<PotentialOutcomeTable> {
    let n = g.n();
    if [alphas.len(), betas.len(), gammas.len(), deltas.len()] != [n, n, n, n] {
        return Err(Error::InvalidParam(
            "parameter vectors must all have length n".into(),
        ));
    }
    let units = (0..n)
        .map(|i| UnitOutcomes {
            alpha: alphas[i],
            beta: betas[i],
            b: vec![0.0, gammas[i]],
            c: vec![0.0, deltas[i]],
            covariate: None,
            group: None,
            exposed_level: (g.degree(i) > 0) as u32,
        })
        .collect();
    PotentialOutcomeTable::new(units)
}

/// The two stock outcome-parameter generators used by the simulation
/// harness. Both produce binary-exposure tables (one `gamma`, one `delta`
/// per unit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpec {
    /// Independent draws: `alpha ~ N(1, 0.1)`, `beta, gamma ~ U(0,1)`,
    /// `delta ~ N(2, 0.1)`.
    Uncorrelated,
    /// Parameters driven by two covariates `x ~ LogNormal(3, 0.5)` and
    /// `y ~ Bernoulli(0.4)`; the covariates are stored in the table so
    /// regression estimators can use them.
    Correlated,
}

/// Draws a parameter table. Deterministic in `(spec, seed)`.
pub fn generate_params(spec: ParamSpec, g: &InterferenceGraph, seed: u64) -> PotentialOutcomeTable {
    let mut rng = derive_rng(seed, &[0x6f75u64]);
    let n = g.n();
    let mut units = Vec::with_capacity(n);
    match spec {
        ParamSpec::Uncorrelated => {
            let alpha_d = Normal::new(1.0, 0.1).unwrap();
            let unif = Uniform::new(0.0, 1.0);
            let delta_d = Normal::new(2.0, 0.1).unwrap();
            for i in 0..n {
                units.push(UnitOutcomes {
                    alpha: alpha_d.sample(&mut rng),
                    beta: unif.sample(&mut rng),
                    b: vec![0.0, unif.sample(&mut rng)],
                    c: vec![0.0, delta_d.sample(&mut rng)],
                    covariate: None,
                    group: None,
                    exposed_level: (g.degree(i) > 0) as u32,
                });
            }
        }
        ParamSpec::Correlated => {
            let x_d = LogNormal::new(3.0, 0.5).unwrap();
            let y_d = Bernoulli::new(0.4).unwrap();
            let gamma22 = Gamma::new(2.0, 0.5).unwrap(); // shape 2, rate 2
            for i in 0..n {
                let x: f64 = x_d.sample(&mut rng);
                let y = y_d.sample(&mut rng) as u8;
                let lx = x.ln();
                let alpha = 1.0 + 15.0 * lx - 0.5 * y as f64
                    + Normal::new(0.0, 1.0 + y as f64 * lx.abs())
                        .unwrap()
                        .sample(&mut rng);
                let beta = -2.0 - 0.8 * x
                    + 0.8 * y as f64
                    + Normal::new(0.0, 2.0).unwrap().sample(&mut rng);
                let gamma = 3.0
                    + 4.0 * lx
                    + Normal::new(0.0, 0.1 * alpha.abs())
                        .unwrap()
                        .sample(&mut rng);
                let delta = 2.0 * lx + gamma22.sample(&mut rng);
                units.push(UnitOutcomes {
                    alpha,
                    beta,
                    b: vec![0.0, gamma],
                    c: vec![0.0, delta],
                    covariate: Some(x),
                    group: Some(y),
                    exposed_level: (g.degree(i) > 0) as u32,
                });
            }
        }
    }
    PotentialOutcomeTable::new(units).expect("generators satisfy table invariants")
}

/// Which marginal contrast to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalForm {
    /// `theta(phi)`: mean over units of `E[Y | Z=1] − E[Y | Z=0]`
    /// under the policy `phi`.
    ConditionalContrast,
    /// `theta(phi; psi)`: mean over units of `E_phi[Y] − E_psi[Y]`.
    PolicyContrast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub value: f64,
    /// Monte-Carlo standard error; absent when computed by exact enumeration.
    pub mc_se: Option<f64>,
}

/// Computes a marginal (policy-averaged) effect exactly by support
/// enumeration.
pub fn marginal_estimand(
    table: &PotentialOutcomeTable,
    g: &InterferenceGraph,
    model: ExposureModel,
    phi: &Design,
    psi: Option<&Design>,
    form: MarginalForm,
    support_cap: u128,
) -> Result<MarginalEstimate> {
    let n = table.n() as f64;
    let (pi_phi, _) = propensity::enumerated_propensity(phi, g, model, support_cap)?;
    match form {
        MarginalForm::ConditionalContrast => {
            let mut total = 0.0;
            for i in 0..table.n() {
                let mut mass = [0.0f64; 2];
                let mut mean = [0.0f64; 2];
                for (cell, p) in pi_phi.unit_cells(i) {
                    mass[cell.z as usize] += p;
                    mean[cell.z as usize] += p * table.potential_outcome(i, cell.z, cell.e)?;
                }
                for z in [0u8, 1u8] {
                    if mass[z as usize] <= 0.0 {
                        return Err(Error::UndefinedConditional { unit: i, z });
                    }
                }
                total += mean[1] / mass[1] - mean[0] / mass[0];
            }
            Ok(MarginalEstimate {
                value: total / n,
                mc_se: None,
            })
        }
        MarginalForm::PolicyContrast => {
            let psi = psi.ok_or_else(|| {
                Error::InvalidParam("policy contrast needs a second policy".into())
            })?;
            let (pi_psi, _) = propensity::enumerated_propensity(psi, g, model, support_cap)?;
            let mut total = 0.0;
            for i in 0..table.n() {
                for (cell, p) in pi_phi.unit_cells(i) {
                    total += p * table.potential_outcome(i, cell.z, cell.e)?;
                }
                for (cell, p) in pi_psi.unit_cells(i) {
                    total -= p * table.potential_outcome(i, cell.z, cell.e)?;
                }
            }
            Ok(MarginalEstimate {
                value: total / n,
                mc_se: None,
            })
        }
    }
}

/// Monte-Carlo version of [`marginal_estimand`] for designs whose support
/// is too large to enumerate. The standard error comes from splitting the
/// draws into 20 batches.
#[allow(clippy::too_many_arguments)]
pub fn marginal_estimand_mc(
    table: &PotentialOutcomeTable,
    g: &InterferenceGraph,
    model: ExposureModel,
    phi: &Design,
    psi: Option<&Design>,
    form: MarginalForm,
    draws: u64,
    seed: u64,
) -> Result<MarginalEstimate> {
    if draws == 0 {
        return Err(Error::InvalidParam("draws must be positive".into()));
    }
    let batches = 20u64.min(draws);
    let per_batch = draws / batches;
    let mut batch_values = Vec::with_capacity(batches as usize);
    let mut rng = derive_rng(seed, &[0x9au64]);
    for _ in 0..batches {
        match form {
            MarginalForm::ConditionalContrast => {
                let mut count = vec![[0u64; 2]; table.n()];
                let mut sum = vec![[0.0f64; 2]; table.n()];
                for _ in 0..per_batch {
                    let z = phi.sample(&mut rng)?;
                    let a = model.expose(g, &z);
                    for i in 0..table.n() {
                        let zi = a.treatment(i) as usize;
                        count[i][zi] += 1;
                        sum[i][zi] += table.potential_outcome(i, a.treatment(i), a.level(i))?;
                    }
                }
                let mut total = 0.0;
                for i in 0..table.n() {
                    for z in [0usize, 1usize] {
                        if count[i][z] == 0 {
                            return Err(Error::UndefinedConditional {
                                unit: i,
                                z: z as u8,
                            });
                        }
                    }
                    total += sum[i][1] / count[i][1] as f64 - sum[i][0] / count[i][0] as f64;
                }
                batch_values.push(total / table.n() as f64);
            }
            MarginalForm::PolicyContrast => {
                let psi = psi.ok_or_else(|| {
                    Error::InvalidParam("policy contrast needs a second policy".into())
                })?;
                let mut acc = 0.0;
                for _ in 0..per_batch {
                    let z1 = phi.sample(&mut rng)?;
                    let a1 = model.expose(g, &z1);
                    let z0 = psi.sample(&mut rng)?;
                    let a0 = model.expose(g, &z0);
                    let y1: f64 = table.realize(&a1).iter().sum();
                    let y0: f64 = table.realize(&a0).iter().sum();
                    acc += (y1 - y0) / table.n() as f64;
                }
                batch_values.push(acc / per_batch as f64);
            }
        }
    }
    let b = batch_values.len() as f64;
    let mean = batch_values.iter().sum::<f64>() / b;
    let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b * (b - 1.0));
    Ok(MarginalEstimate {
        value: mean,
        mc_se: Some(var.sqrt()),
    })
}

/// A table whose rows are all equal and interference-free; handy in tests.
pub fn constant_table(
    g: &InterferenceGraph,
    model: ExposureModel,
    alpha: f64,
    beta: f64,
) -> Result<PotentialOutcomeTable> {
    let units = (0..g.n())
        .map(|i| {
            let k = model.level_count(g, i)?;
            Ok(UnitOutcomes {
                alpha,
                beta,
                b: vec![0.0; k as usize],
                c: vec![0.0; k as usize],
                covariate: None,
                group: None,
                exposed_level: model.level_at_all_treated(g, i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialOutcomeTable::new(units)
}
