//! Propensity scores `π_i(z,e)`: the probability, under a design, that
//! unit `i` realizes treatment `z` and exposure level `e`.
//!
//! Three sources are available and cross-check one another:
//! closed forms for the classical design/exposure pairs
//! ([`analytic_propensity`]), exact summation over an enumerated support
//! ([`enumerated_propensity`]), and Monte-Carlo frequencies
//! ([`mc_propensity`]).

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::design::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::exposure::{Cell, ExposureModel};
use crate::graph::InterferenceGraph;
use crate::util::{binom, derive_rng, falling};

/// How a table's entries were obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Enumerated,
    MonteCarlo {
        samples: u64,
    },
    /// Closed forms where available, with the listed units filled from an
    /// exact or sampled fallback.
    Mixed {
        fallback_units: Vec<usize>,
    },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Analytic => write!(f, "analytic"),
            Provenance::Enumerated => write!(f, "enumerated"),
            Provenance::MonteCarlo { samples } => write!(f, "monte_carlo({samples})"),
            Provenance::Mixed { fallback_units } => {
                write!(f, "mixed({} fallback units)", fallback_units.len())
            }
        }
    }
}

/// Per-unit map from `(z, e)` cells to probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityTable {
    cells: Vec<BTreeMap<Cell, f64>>,
    se: Option<Vec<BTreeMap<Cell, f64>>>,
    provenance: Provenance,
}

impl PropensityTable {
    pub fn new(cells: Vec<BTreeMap<Cell, f64>>, provenance: Provenance) -> Self {
        Self {
            cells,
            se: None,
            provenance,
        }
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    /// `π_i(z,e)`; cells never observed or outside the support read as 0.
    pub fn pi(&self, i: usize, cell: Cell) -> f64 {
        self.cells[i].get(&cell).copied().unwrap_or(0.0)
    }

    pub fn unit_cells(&self, i: usize) -> &BTreeMap<Cell, f64> {
        &self.cells[i]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Standard error of a Monte-Carlo cell estimate, if applicable.
    pub fn se(&self, i: usize, cell: Cell) -> Option<f64> {
        self.se
            .as_ref()
            .map(|t| t[i].get(&cell).copied().unwrap_or(0.0))
    }

    /// Cells among `required` that carry zero estimated probability,
    /// fatal if used as inverse weights.
    pub fn zero_cells(&self, required: &[(usize, Cell)]) -> Vec<(usize, Cell)> {
        required
            .iter()
            .copied()
            .filter(|&(i, cell)| self.pi(i, cell) <= 0.0)
            .collect()
    }

    /// CSV export: `unit,z,e,pi,provenance,se`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("unit,z,e,pi,provenance,se\n");
        for (i, cells) in self.cells.iter().enumerate() {
            for (cell, p) in cells {
                let se = self
                    .se(i, *cell)
                    .map_or(String::new(), |v| format!("{v:.6e}"));
                let _ = writeln!(
                    s,
                    "{i},{},{},{:.12e},{},{se}",
                    cell.z, cell.e, p, self.provenance
                );
            }
        }
        s
    }

    /// Largest deviation of any unit's total cell mass from 1.
    pub fn max_mass_error(&self) -> f64 {
        self.cells
            .iter()
            .map(|m| (m.values().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Sparse joint propensities `π_ij((z,e), (z',e'))` for ordered pairs
/// `i < j`; lookups symmetrize automatically.
#[derive(Debug, Clone, Default)]
pub struct JointPropensityTable {
    map: BTreeMap<(usize, usize), BTreeMap<(Cell, Cell), f64>>,
}

impl JointPropensityTable {
    pub fn pi2(&self, i: usize, ci: Cell, j: usize, cj: Cell) -> f64 {
        let (key, cells) = if i <= j {
            ((i, j), (ci, cj))
        } else {
            ((j, i), (cj, ci))
        };
        self.map
            .get(&key)
            .and_then(|m| m.get(&cells))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn insert(&mut self, i: usize, ci: Cell, j: usize, cj: Cell, p: f64) {
        assert_ne!(i, j, "joint propensities are defined for distinct units");
        let (key, cells) = if i < j {
            ((i, j), (ci, cj))
        } else {
            ((j, i), (cj, ci))
        };
        *self.map.entry(key).or_default().entry(cells).or_insert(0.0) += p;
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Exact propensities (and joints) by summing design probabilities over
/// the enumerated support.
pub fn enumerated_propensity(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    support_cap: u128,
) -> Result<(PropensityTable, JointPropensityTable)> {
    let support = design.enumerate_support(support_cap)?;
    let n = g.n();
    let mut cells: Vec<BTreeMap<Cell, f64>> = vec![BTreeMap::new(); n];
    let mut joint = JointPropensityTable::default();
    for (z, p) in &support {
        let a = model.expose(g, z);
        for i in 0..n {
            let ci = Cell::new(a.treatment(i), a.level(i));
            *cells[i].entry(ci).or_insert(0.0) += p;
            for j in (i + 1)..n {
                let cj = Cell::new(a.treatment(j), a.level(j));
                joint.insert(i, ci, j, cj, *p);
            }
        }
    }
    Ok((PropensityTable::new(cells, Provenance::Enumerated), joint))
}

/// Monte-Carlo propensity estimates with per-cell standard errors.
/// Sampling is split into chunks on independent derived streams; counts
/// are integers, so the result does not depend on scheduling.
pub fn mc_propensity(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    samples: u64,
    seed: u64,
) -> Result<PropensityTable> {
    if samples == 0 {
        return Err(Error::InvalidParam(
            "mc_propensity needs samples ≥ 1".into(),
        ));
    }
    let n = g.n();
    let chunk_size = 4096u64;
    let chunks: Vec<(u64, u64)> = (0..samples.div_ceil(chunk_size))
        .map(|c| (c, chunk_size.min(samples - c * chunk_size)))
        .collect();
    let partials: Result<Vec<Vec<BTreeMap<Cell, u64>>>> = chunks
        .par_iter()
        .map(|&(chunk_idx, len)| {
            let mut rng = derive_rng(seed, &[0x70, chunk_idx]);
            let mut counts: Vec<BTreeMap<Cell, u64>> = vec![BTreeMap::new(); n];
            for _ in 0..len {
                let z = design.sample(&mut rng)?;
                let a = model.expose(g, &z);
                for i in 0..n {
                    *counts[i]
                        .entry(Cell::new(a.treatment(i), a.level(i)))
                        .or_insert(0) += 1;
                }
            }
            Ok(counts)
        })
        .collect();
    let mut counts: Vec<BTreeMap<Cell, u64>> = vec![BTreeMap::new(); n];
    for partial in partials? {
        for (i, m) in partial.into_iter().enumerate() {
            for (cell, c) in m {
                *counts[i].entry(cell).or_insert(0) += c;
            }
        }
    }
    let total = samples as f64;
    let mut cells = Vec::with_capacity(n);
    let mut ses = Vec::with_capacity(n);
    for m in counts {
        let mut cm = BTreeMap::new();
        let mut sm = BTreeMap::new();
        for (cell, c) in m {
            let p = c as f64 / total;
            cm.insert(cell, p);
            sm.insert(cell, (p * (1.0 - p) / total).sqrt());
        }
        cells.push(cm);
        ses.push(sm);
    }
    let mut table = PropensityTable::new(cells, Provenance::MonteCarlo { samples });
    table.se = Some(ses);
    Ok(table)
}

/// Monte-Carlo joint propensities restricted to the given cells (per-unit
/// resolved), for variance formulas at scales where enumeration is out of
/// reach. `cells[k][i]` is the k-th tracked cell of unit `i`.
pub fn mc_joint_propensity(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    tracked: &[Vec<Cell>],
    samples: u64,
    seed: u64,
) -> Result<JointPropensityTable> {
    if samples == 0 {
        return Err(Error::InvalidParam("mc joints need samples ≥ 1".into()));
    }
    let n = g.n();
    let mut rng = derive_rng(seed, &[0x71]);
    let mut counts: BTreeMap<(usize, usize, Cell, Cell), u64> = BTreeMap::new();
    for _ in 0..samples {
        let z = design.sample(&mut rng)?;
        let a = model.expose(g, &z);
        let hit: Vec<Option<Cell>> = (0..n)
            .map(|i| {
                let c = Cell::new(a.treatment(i), a.level(i));
                tracked.iter().any(|t| t[i] == c).then_some(c)
            })
            .collect();
        for i in 0..n {
            let Some(ci) = hit[i] else { continue };
            for j in (i + 1)..n {
                let Some(cj) = hit[j] else { continue };
                *counts.entry((i, j, ci, cj)).or_insert(0) += 1;
            }
        }
    }
    let mut joint = JointPropensityTable::default();
    for ((i, j, ci, cj), c) in counts {
        joint.insert(i, ci, j, cj, c as f64 / samples as f64);
    }
    Ok(joint)
}

/// Closed-form propensities for the pairs with published formulas:
/// CRD and Bernoulli under count or binary exposure, and the cluster
/// design under binary exposure. Cluster units the formula does not cover
/// (isolated, or with every neighbor in a foreign cluster) fall back to
/// enumeration over cluster assignments, or Monte Carlo when that is too
/// large; such units are listed in the `Mixed` provenance.
pub fn analytic_propensity(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
) -> Result<PropensityTable> {
    analytic_propensity_with(design, g, model, &AutoOpts::default())
}

/// Knobs for fallback paths (cluster-uncovered units, auto selection).
#[derive(Debug, Clone)]
pub struct AutoOpts {
    pub support_cap: u128,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for AutoOpts {
    fn default() -> Self {
        Self {
            support_cap: crate::design::DEFAULT_SUPPORT_CAP,
            mc_samples: 100_000,
            seed: 0x5eed,
        }
    }
}

pub fn analytic_propensity_with(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    opts: &AutoOpts,
) -> Result<PropensityTable> {
    let n = g.n();
    match (design.kind(), model) {
        (DesignKind::Crd { n_t }, ExposureModel::SymmetricCount) => {
            let table = (0..n)
                .map(|i| crd_symmetric_cells(n, *n_t, g.degree(i)))
                .collect();
            Ok(PropensityTable::new(table, Provenance::Analytic))
        }
        (DesignKind::Crd { n_t }, ExposureModel::BinaryAny) => {
            let table = (0..n)
                .map(|i| crd_binary_cells(n, *n_t, g.degree(i)))
                .collect();
            Ok(PropensityTable::new(table, Provenance::Analytic))
        }
        (DesignKind::Bernoulli { p }, ExposureModel::SymmetricCount) => {
            let table = (0..n)
                .map(|i| bernoulli_symmetric_cells(*p, g.degree(i)))
                .collect();
            Ok(PropensityTable::new(table, Provenance::Analytic))
        }
        (DesignKind::Bernoulli { p }, ExposureModel::BinaryAny) => {
            let table = (0..n)
                .map(|i| bernoulli_binary_cells(*p, g.degree(i)))
                .collect();
            Ok(PropensityTable::new(table, Provenance::Analytic))
        }
        (
            DesignKind::Cluster {
                partition,
                clusters,
                k_t,
            },
            ExposureModel::BinaryAny,
        ) => cluster_binary_table(design, g, partition, *clusters, *k_t, opts),
        (DesignKind::RestrictedBernoulli { .. }, _) => Err(Error::NoAnalyticFormula(
            "restricted Bernoulli propensities are exact only by enumeration; the \
             unrestricted closed forms ignore the restriction"
                .into(),
        )),
        _ => Err(Error::NoAnalyticFormula(format!(
            "{} × {}",
            design.label(),
            model.name()
        ))),
    }
}

/// Picks the cheapest exact source available: closed form, else
/// enumeration, else Monte Carlo.
pub fn auto_propensity(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    opts: &AutoOpts,
) -> Result<PropensityTable> {
    match analytic_propensity_with(design, g, model, opts) {
        Ok(t) => Ok(t),
        Err(Error::NoAnalyticFormula(_)) => {
            match enumerated_propensity(design, g, model, opts.support_cap) {
                Ok((t, _)) => Ok(t),
                Err(Error::SupportTooLarge { .. }) => {
                    mc_propensity(design, g, model, opts.mc_samples, opts.seed)
                }
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

fn crd_symmetric_cells(n: usize, n_t: usize, d: usize) -> BTreeMap<Cell, f64> {
    let (n, n_t, d) = (n as i64, n_t as i64, d as i64);
    let n_c = n - n_t;
    let denom = binom(n - 1, d);
    let mut m = BTreeMap::new();
    for e in 0..=d {
        let p1 = n_t as f64 / n as f64 * binom(n_t - 1, e) * binom(n_c, d - e) / denom;
        let p0 = n_c as f64 / n as f64 * binom(n_t, e) * binom(n_c - 1, d - e) / denom;
        if p1 > 0.0 {
            m.insert(Cell::new(1, e as u32), p1);
        }
        if p0 > 0.0 {
            m.insert(Cell::new(0, e as u32), p0);
        }
    }
    m
}

fn crd_binary_cells(n: usize, n_t: usize, d: usize) -> BTreeMap<Cell, f64> {
    let (n, n_t, d) = (n as i64, n_t as i64, d as i64);
    let n_c = n - n_t;
    let denom = binom(n - 1, d);
    let pt = n_t as f64 / n as f64;
    let pc = n_c as f64 / n as f64;
    // All-control neighborhoods, given own assignment.
    let none_given_treated = binom(n_c, d) / denom;
    let none_given_control = binom(n_c - 1, d) / denom;
    let mut m = BTreeMap::new();
    let entries = [
        (Cell::new(1, 0), pt * none_given_treated),
        (Cell::new(1, 1), pt * (1.0 - none_given_treated)),
        (Cell::new(0, 0), pc * none_given_control),
        (Cell::new(0, 1), pc * (1.0 - none_given_control)),
    ];
    for (cell, p) in entries {
        if p > 0.0 {
            m.insert(cell, p);
        }
    }
    m
}

fn bernoulli_symmetric_cells(p: f64, d: usize) -> BTreeMap<Cell, f64> {
    let q = 1.0 - p;
    let mut m = BTreeMap::new();
    for e in 0..=d as i64 {
        let shape = binom(d as i64, e) * p.powi(e as i32) * q.powi(d as i32 - e as i32);
        m.insert(Cell::new(1, e as u32), p * shape);
        m.insert(Cell::new(0, e as u32), q * shape);
    }
    m
}

fn bernoulli_binary_cells(p: f64, d: usize) -> BTreeMap<Cell, f64> {
    let q = 1.0 - p;
    let none = q.powi(d as i32);
    let mut m = BTreeMap::new();
    m.insert(Cell::new(1, 0), p * none);
    m.insert(Cell::new(0, 0), q * none);
    if d > 0 {
        m.insert(Cell::new(1, 1), p * (1.0 - none));
        m.insert(Cell::new(0, 1), q * (1.0 - none));
    }
    m
}

fn cluster_binary_table(
    design: &Design,
    g: &InterferenceGraph,
    partition: &[usize],
    clusters: usize,
    k_t: usize,
    opts: &AutoOpts,
) -> Result<PropensityTable> {
    let n = g.n();
    let k = clusters as f64;
    let k_c = (clusters - k_t) as f64;
    let mut cells: Vec<BTreeMap<Cell, f64>> = vec![BTreeMap::new(); n];
    let mut fallback_units = Vec::new();
    for i in 0..n {
        let own = partition[i];
        let within = g.neighbors(i).iter().any(|&j| partition[j] == own);
        if g.degree(i) == 0 || !within {
            // The printed formula assumes a within-cluster neighbor; these
            // units are resolved exactly below.
            fallback_units.push(i);
            continue;
        }
        // Clusters touched by the unit and its neighborhood.
        let mut touched: Vec<usize> = g.neighbors(i).iter().map(|&j| partition[j]).collect();
        touched.push(own);
        touched.sort_unstable();
        touched.dedup();
        let u = touched.len() as u32;
        let m = &mut cells[i];
        m.insert(Cell::new(1, 1), k_t as f64 / k);
        // Treated with an untreated neighborhood is impossible here.
        let all_control = falling(k_c, u) / falling(k, u);
        if all_control > 0.0 {
            m.insert(Cell::new(0, 0), all_control);
        }
        let p01 = k_c / k - all_control;
        if p01 > 0.0 {
            m.insert(Cell::new(0, 1), p01);
        }
    }
    if !fallback_units.is_empty() {
        let fb = match enumerated_propensity(design, g, ExposureModel::BinaryAny, opts.support_cap)
        {
            Ok((t, _)) => t,
            Err(Error::SupportTooLarge { .. }) => mc_propensity(
                design,
                g,
                ExposureModel::BinaryAny,
                opts.mc_samples,
                opts.seed,
            )?,
            Err(e) => return Err(e),
        };
        for &i in &fallback_units {
            cells[i] = fb.unit_cells(i).clone();
        }
        return Ok(PropensityTable::new(
            cells,
            Provenance::Mixed { fallback_units },
        ));
    }
    Ok(PropensityTable::new(cells, Provenance::Analytic))
}

/// Denominator convention for the weighted exposure probabilities that
/// drive difference-in-means bias formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellDenominator {
    /// `α_i(z,e) = E[ 1{Z_i=z, E_i=e} / Σ_j 1{Z_j=z} ]` (arm totals).
    ByTreatment,
    /// `β_i(z,e) = E[ 1{Z_i=z, E_i=e} / Σ_j 1{Z_j=z, E_j=e} ]` (cell totals).
    ByCell,
}

/// Closed-form arm-weighted exposure probabilities for CRD and the
/// (restricted) Bernoulli design. The Bernoulli expectation runs over the
/// restricted treated-count distribution on `1..n−1`, which is exact for
/// the restricted design and accurate to boundary terms of order `p^n`
/// for the unrestricted one.
pub fn weighted_exposure_probs_analytic(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
) -> Result<Vec<BTreeMap<Cell, f64>>> {
    let n = g.n() as i64;
    let per_unit = |d: usize| -> Result<BTreeMap<Cell, f64>> {
        let d = d as i64;
        match design.kind() {
            DesignKind::Crd { n_t } => {
                let n_t = *n_t as i64;
                let n_c = n - n_t;
                let denom = binom(n - 1, d);
                let sym: Vec<(i64, f64, f64)> = (0..=d)
                    .map(|e| {
                        let a1 = binom(n_t - 1, e) * binom(n_c, d - e) / denom / n as f64;
                        let a0 = binom(n_t, e) * binom(n_c - 1, d - e) / denom / n as f64;
                        (e, a1, a0)
                    })
                    .collect();
                Ok(reduce_levels(model, d, &sym))
            }
            DesignKind::Bernoulli { p } | DesignKind::RestrictedBernoulli { p } => {
                let q = 1.0 - p;
                let norm = 1.0 - q.powi(n as i32) - p.powi(n as i32);
                let denom = binom(n - 1, d);
                let mut sym = vec![(0i64, 0.0f64, 0.0f64); (d + 1) as usize];
                for (e, entry) in sym.iter_mut().enumerate() {
                    entry.0 = e as i64;
                }
                for t in 1..n {
                    let pmf = binom(n, t) * p.powi(t as i32) * q.powi((n - t) as i32) / norm;
                    for e in 0..=d {
                        let r1 = binom(t - 1, e) * binom(n - t, d - e) / denom;
                        let r0 = binom(t, e) * binom(n - t - 1, d - e) / denom;
                        sym[e as usize].1 += pmf * r1 / n as f64;
                        sym[e as usize].2 += pmf * r0 / n as f64;
                    }
                }
                Ok(reduce_levels(model, d, &sym))
            }
            _ => Err(Error::NoAnalyticFormula(format!(
                "weighted exposure probabilities for {}",
                design.label()
            ))),
        }
    };
    (0..g.n()).map(|i| per_unit(g.degree(i))).collect()
}

/// Collapses count-level weights to binary levels when needed.
fn reduce_levels(model: ExposureModel, d: i64, sym: &[(i64, f64, f64)]) -> BTreeMap<Cell, f64> {
    let mut m = BTreeMap::new();
    match model {
        ExposureModel::SymmetricCount => {
            for &(e, a1, a0) in sym {
                m.insert(Cell::new(1, e as u32), a1);
                m.insert(Cell::new(0, e as u32), a0);
            }
        }
        ExposureModel::BinaryAny => {
            m.insert(Cell::new(1, 0), sym[0].1);
            m.insert(Cell::new(0, 0), sym[0].2);
            if d > 0 {
                m.insert(Cell::new(1, 1), sym[1..].iter().map(|v| v.1).sum());
                m.insert(Cell::new(0, 1), sym[1..].iter().map(|v| v.2).sum());
            }
        }
        ExposureModel::GeneralPattern => {
            // No closed form is published for pattern exposure.
            m.clear();
        }
    }
    m
}

/// Exact weighted exposure probabilities by support enumeration, under
/// either denominator convention. Draws whose denominator group is empty
/// contribute zero (the numerator indicator is then zero as well).
pub fn weighted_exposure_probs_enumerated(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    denom: CellDenominator,
    support_cap: u128,
) -> Result<Vec<BTreeMap<Cell, f64>>> {
    let support = design.enumerate_support(support_cap)?;
    let n = g.n();
    let mut out: Vec<BTreeMap<Cell, f64>> = vec![BTreeMap::new(); n];
    for (z, p) in &support {
        let a = model.expose(g, z);
        match denom {
            CellDenominator::ByTreatment => {
                let treated = z.iter().map(|&v| v as usize).sum::<usize>();
                let counts = [n - treated, treated];
                for i in 0..n {
                    let cell = Cell::new(a.treatment(i), a.level(i));
                    let group = counts[cell.z as usize];
                    if group > 0 {
                        *out[i].entry(cell).or_insert(0.0) += p / group as f64;
                    }
                }
            }
            CellDenominator::ByCell => {
                let mut counts: BTreeMap<Cell, usize> = BTreeMap::new();
                for &(zz, ee) in &a.pairs {
                    *counts.entry(Cell::new(zz, ee)).or_insert(0) += 1;
                }
                for i in 0..n {
                    let cell = Cell::new(a.treatment(i), a.level(i));
                    *out[i].entry(cell).or_insert(0.0) += p / counts[&cell] as f64;
                }
            }
        }
    }
    Ok(out)
}
