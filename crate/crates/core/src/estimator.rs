//! Estimators of average causal contrasts from one realized experiment.
//!
//! All estimators are pure functions of `(observed outcomes, assignment,
//! propensities, auxiliaries)`. Difference-in-means estimators return an
//! undefined estimate when a required denominator group is empty; the
//! inverse-weighted estimators instead fail hard when positivity is
//! violated.

use std::collections::BTreeMap;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::exposure::{Cell, ExposureAssignment, ExposureModel, LevelSpec};
use crate::graph::InterferenceGraph;
use crate::propensity::PropensityTable;

/// A contrast between two treatment-and-exposure conditions, with levels
/// given either literally or by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contrast {
    pub treated: (u8, LevelSpec),
    pub baseline: (u8, LevelSpec),
}

impl Contrast {
    /// Direct effect: `(1,0)` vs `(0,0)`.
    pub fn dte() -> Self {
        Self {
            treated: (1, LevelSpec::Exact(0)),
            baseline: (0, LevelSpec::Exact(0)),
        }
    }

    /// Total effect: `(1, fully exposed)` vs `(0,0)`.
    pub fn tte() -> Self {
        Self {
            treated: (1, LevelSpec::FullyExposed),
            baseline: (0, LevelSpec::Exact(0)),
        }
    }

    /// Interference on controls: `(0, fully exposed)` vs `(0,0)`.
    pub fn gamma1() -> Self {
        Self {
            treated: (0, LevelSpec::FullyExposed),
            baseline: (0, LevelSpec::Exact(0)),
        }
    }

    /// Interference on treated: `(1, fully exposed)` vs `(1,0)`.
    pub fn gamma2() -> Self {
        Self {
            treated: (1, LevelSpec::FullyExposed),
            baseline: (1, LevelSpec::Exact(0)),
        }
    }

    /// Pins the per-unit cells on a concrete graph and exposure model.
    pub fn resolve(&self, g: &InterferenceGraph, model: ExposureModel) -> ResolvedContrast {
        let tau1 = (0..g.n())
            .map(|i| Cell::new(self.treated.0, self.treated.1.resolve(model, g, i)))
            .collect();
        let tau0 = (0..g.n())
            .map(|i| Cell::new(self.baseline.0, self.baseline.1.resolve(model, g, i)))
            .collect();
        ResolvedContrast { tau1, tau0 }
    }
}

/// Per-unit contrast cells after resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedContrast {
    pub tau1: Vec<Cell>,
    pub tau0: Vec<Cell>,
}

impl ResolvedContrast {
    pub fn n(&self) -> usize {
        self.tau1.len()
    }

    fn in_tau1(&self, i: usize, a: &ExposureAssignment) -> bool {
        Cell::new(a.treatment(i), a.level(i)) == self.tau1[i]
    }

    fn in_tau0(&self, i: usize, a: &ExposureAssignment) -> bool {
        Cell::new(a.treatment(i), a.level(i)) == self.tau0[i]
    }
}

/// Diagnostics attached to every estimate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Units realized in the treated / baseline contrast cell.
    pub n_tau1: usize,
    pub n_tau0: usize,
    /// Why the value is undefined, when it is.
    pub undefined_reason: Option<String>,
    /// Extremes of the weights actually applied (inverse-weighted
    /// estimators only).
    pub min_weight: Option<f64>,
    pub max_weight: Option<f64>,
    /// Regression fell back to a ridge-regularized solve.
    pub ridge_fallback: bool,
}

/// An estimate plus its diagnostics. `value` is `None` when the estimator
/// is undefined on this draw (an empty mean, never a silent zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    fn defined(value: f64, diagnostics: Diagnostics) -> Self {
        Self {
            value: Some(value),
            diagnostics,
        }
    }

    fn undefined(reason: &str, diagnostics: Diagnostics) -> Self {
        Self {
            value: None,
            diagnostics: Diagnostics {
                undefined_reason: Some(reason.to_string()),
                ..diagnostics
            },
        }
    }
}

fn cell_counts(rc: &ResolvedContrast, a: &ExposureAssignment) -> (usize, usize) {
    let mut n1 = 0;
    let mut n0 = 0;
    for i in 0..rc.n() {
        if rc.in_tau1(i, a) {
            n1 += 1;
        }
        if rc.in_tau0(i, a) {
            n0 += 1;
        }
    }
    (n1, n0)
}

/// Classic difference in means: treated average minus control average,
/// ignoring exposure entirely.
pub fn naive_dim(obs: &[f64], a: &ExposureAssignment) -> Estimate {
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    for i in 0..a.n() {
        let z = a.treatment(i) as usize;
        sum[z] += obs[i];
        count[z] += 1;
    }
    let diagnostics = Diagnostics {
        n_tau1: count[1],
        n_tau0: count[0],
        ..Diagnostics::default()
    };
    if count[0] == 0 || count[1] == 0 {
        return Estimate::undefined("an arm is empty", diagnostics);
    }
    Estimate::defined(
        sum[1] / count[1] as f64 - sum[0] / count[0] as f64,
        diagnostics,
    )
}

/// Difference of cell means over the two contrast cells.
pub fn cell_dim(obs: &[f64], a: &ExposureAssignment, rc: &ResolvedContrast) -> Estimate {
    let mut sum1 = 0.0;
    let mut sum0 = 0.0;
    let (n1, n0) = cell_counts(rc, a);
    for i in 0..rc.n() {
        if rc.in_tau1(i, a) {
            sum1 += obs[i];
        }
        if rc.in_tau0(i, a) {
            sum0 += obs[i];
        }
    }
    let diagnostics = Diagnostics {
        n_tau1: n1,
        n_tau0: n0,
        ..Diagnostics::default()
    };
    if n1 == 0 || n0 == 0 {
        return Estimate::undefined("a contrast cell is empty", diagnostics);
    }
    Estimate::defined(sum1 / n1 as f64 - sum0 / n0 as f64, diagnostics)
}

/// Validates that every unit's propensity for both contrast cells is
/// strictly positive (and at most one). Required for unbiased inverse
/// weighting; violations name the failing unit.
fn check_positivity(pi: &PropensityTable, rc: &ResolvedContrast) -> Result<()> {
    for i in 0..rc.n() {
        for cell in [rc.tau1[i], rc.tau0[i]] {
            let p = pi.pi(i, cell);
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::PositivityViolation {
                    unit: i,
                    z: cell.z,
                    e: cell.e,
                    pi: p,
                });
            }
        }
    }
    Ok(())
}

/// Inverse-propensity weighting with fixed weights `±1/(n·π_i(cell))`.
/// Defined on every draw; units outside both contrast cells contribute 0.
pub fn horvitz_thompson(
    obs: &[f64],
    a: &ExposureAssignment,
    pi: &PropensityTable,
    rc: &ResolvedContrast,
) -> Result<Estimate> {
    check_positivity(pi, rc)?;
    let n = rc.n() as f64;
    let mut total = 0.0;
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    let (n1, n0) = cell_counts(rc, a);
    for i in 0..rc.n() {
        if rc.in_tau1(i, a) {
            let w = 1.0 / (n * pi.pi(i, rc.tau1[i]));
            total += w * obs[i];
            min_w = min_w.min(w);
            max_w = max_w.max(w);
        }
        if rc.in_tau0(i, a) {
            let w = -1.0 / (n * pi.pi(i, rc.tau0[i]));
            total += w * obs[i];
            min_w = min_w.min(w);
            max_w = max_w.max(w);
        }
    }
    Ok(Estimate::defined(
        total,
        Diagnostics {
            n_tau1: n1,
            n_tau0: n0,
            min_weight: (n1 + n0 > 0).then_some(min_w),
            max_weight: (n1 + n0 > 0).then_some(max_w),
            ..Diagnostics::default()
        },
    ))
}

/// Ratio form of inverse-propensity weighting: within each contrast cell
/// the weights are normalized by their realized sum, which trades exact
/// unbiasedness for location stability and usually less variance.
pub fn hajek(
    obs: &[f64],
    a: &ExposureAssignment,
    pi: &PropensityTable,
    rc: &ResolvedContrast,
) -> Result<Estimate> {
    check_positivity(pi, rc)?;
    let mut num = [0.0f64; 2];
    let mut den = [0.0f64; 2];
    let (n1, n0) = cell_counts(rc, a);
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    for i in 0..rc.n() {
        if rc.in_tau1(i, a) {
            let w = 1.0 / pi.pi(i, rc.tau1[i]);
            num[1] += w * obs[i];
            den[1] += w;
            min_w = min_w.min(w);
            max_w = max_w.max(w);
        }
        if rc.in_tau0(i, a) {
            let w = 1.0 / pi.pi(i, rc.tau0[i]);
            num[0] += w * obs[i];
            den[0] += w;
            min_w = min_w.min(w);
            max_w = max_w.max(w);
        }
    }
    let diagnostics = Diagnostics {
        n_tau1: n1,
        n_tau0: n0,
        min_weight: (n1 + n0 > 0).then_some(min_w),
        max_weight: (n1 + n0 > 0).then_some(max_w),
        ..Diagnostics::default()
    };
    if n1 == 0 || n0 == 0 {
        return Ok(Estimate::undefined("a contrast cell is empty", diagnostics));
    }
    Ok(Estimate::defined(
        num[1] / den[1] - num[0] / den[0],
        diagnostics,
    ))
}

/// Difference estimator with auxiliary guesses `a_i ≈ Y_i(tau1)`,
/// `b_i ≈ Y_i(tau0)` and tuning constants `lambda1`, `lambda2`. Unbiased
/// for any fixed auxiliaries; `lambda1 = lambda2 = −1` recovers the plain
/// difference estimator, and zero auxiliaries reduce to inverse weighting.
#[allow(clippy::too_many_arguments)]
pub fn generalized_difference(
    obs: &[f64],
    asg: &ExposureAssignment,
    pi: &PropensityTable,
    rc: &ResolvedContrast,
    aux_treated: &[f64],
    aux_baseline: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<Estimate> {
    if aux_treated.len() != rc.n() || aux_baseline.len() != rc.n() {
        return Err(Error::EstimatorPrecondition(
            "auxiliary vectors must have length n".into(),
        ));
    }
    check_positivity(pi, rc)?;
    let n = rc.n() as f64;
    let (n1, n0) = cell_counts(rc, asg);
    let mut arm1 = 0.0;
    let mut arm0 = 0.0;
    for i in 0..rc.n() {
        if rc.in_tau1(i, asg) {
            let w = 1.0 / pi.pi(i, rc.tau1[i]);
            arm1 += obs[i] * w + lambda1 * aux_treated[i] * w;
        }
        if rc.in_tau0(i, asg) {
            let w = 1.0 / pi.pi(i, rc.tau0[i]);
            arm0 += obs[i] * w + lambda2 * aux_baseline[i] * w;
        }
        arm1 -= lambda1 * aux_treated[i];
        arm0 -= lambda2 * aux_baseline[i];
    }
    Ok(Estimate::defined(
        (arm1 - arm0) / n,
        Diagnostics {
            n_tau1: n1,
            n_tau0: n0,
            ..Diagnostics::default()
        },
    ))
}

/// Regression (model-assisted) estimator: weighted least squares of the
/// observed outcomes on `(1, z, e, z·e)` plus any unit covariates, with
/// design weights `1/π(Z_i, E_i)`; predictions for the two contrast cells
/// are corrected by inverse-weighted residuals of the realized cells.
pub fn greg(
    obs: &[f64],
    a: &ExposureAssignment,
    pi: &PropensityTable,
    rc: &ResolvedContrast,
    covariates: Option<&[f64]>,
) -> Result<Estimate> {
    let n = rc.n();
    let p = 4 + usize::from(covariates.is_some());
    let mut distinct: BTreeMap<(u8, u32), ()> = BTreeMap::new();
    for &(z, e) in &a.pairs {
        distinct.insert((z, e), ());
    }
    if distinct.len() < 2 {
        return Err(Error::EstimatorPrecondition(
            "regression needs at least two distinct observed design rows".into(),
        ));
    }
    check_positivity(pi, rc)?;

    let row = |z: f64, e: f64, i: usize| -> Vec<f64> {
        let mut r = vec![1.0, z, e, z * e];
        if let Some(x) = covariates {
            r.push(x[i]);
        }
        r
    };

    // Normal equations X'WX b = X'Wy.
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for i in 0..n {
        let cell = Cell::new(a.treatment(i), a.level(i));
        let pr = pi.pi(i, cell);
        if pr <= 0.0 {
            return Err(Error::PositivityViolation {
                unit: i,
                z: cell.z,
                e: cell.e,
                pi: pr,
            });
        }
        let w = 1.0 / pr;
        let r = row(cell.z as f64, cell.e as f64, i);
        for (a_idx, ra) in r.iter().enumerate() {
            for (b_idx, rb) in r.iter().enumerate() {
                xtx[a_idx][b_idx] += w * ra * rb;
            }
            xty[a_idx] += w * ra * obs[i];
        }
    }
    let (coef, ridge_fallback) = solve_spd(xtx, xty)?;

    let predict = |cell: Cell, i: usize| -> f64 {
        let r = row(cell.z as f64, cell.e as f64, i);
        r.iter().zip(&coef).map(|(a, b)| a * b).sum()
    };

    let (n1, n0) = cell_counts(rc, a);
    let nf = n as f64;
    let mut arm1 = 0.0;
    let mut arm0 = 0.0;
    for i in 0..n {
        arm1 += predict(rc.tau1[i], i) / nf;
        arm0 += predict(rc.tau0[i], i) / nf;
        if rc.in_tau1(i, a) {
            arm1 += (obs[i] - predict(rc.tau1[i], i)) / (nf * pi.pi(i, rc.tau1[i]));
        }
        if rc.in_tau0(i, a) {
            arm0 += (obs[i] - predict(rc.tau0[i], i)) / (nf * pi.pi(i, rc.tau0[i]));
        }
    }
    Ok(Estimate::defined(
        arm1 - arm0,
        Diagnostics {
            n_tau1: n1,
            n_tau0: n0,
            ridge_fallback,
            ..Diagnostics::default()
        },
    ))
}

/// Solves a small symmetric positive-semidefinite system by Gaussian
/// elimination with partial pivoting; singular systems retry with a ridge
/// penalty of 1e-8 on the non-intercept diagonal, which keeps the fit
/// equivariant under outcome level shifts.
fn solve_spd(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<(Vec<f64>, bool)> {
    let p = rhs.len();
    let scale: f64 = (0..p).map(|k| m[k][k].abs()).fold(0.0, f64::max).max(1.0);
    match gauss(&mut m.clone(), &mut rhs.clone(), 1e-12 * scale) {
        Some(sol) => Ok((sol, false)),
        None => {
            let first = usize::from(p > 1);
            for (k, row) in m.iter_mut().enumerate().skip(first) {
                row[k] += 1e-8 * scale;
            }
            match gauss(&mut m, &mut rhs, 0.0) {
                Some(sol) => Ok((sol, true)),
                None => Err(Error::EstimatorPrecondition(
                    "regression normal equations are singular even with ridge".into(),
                )),
            }
        }
    }
}

fn gauss(m: &mut [Vec<f64>], rhs: &mut [f64], pivot_floor: f64) -> Option<Vec<f64>> {
    let p = rhs.len();
    for col in 0..p {
        let pivot_row =
            (col..p).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[pivot_row][col].abs() <= pivot_floor {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..p {
            let f = m[r][col] / m[col][col];
            for c in col..p {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut sol = vec![0.0; p];
    for col in (0..p).rev() {
        let mut v = rhs[col];
        for c in (col + 1)..p {
            v -= m[col][c] * sol[c];
        }
        if m[col][col] == 0.0 {
            return None;
        }
        sol[col] = v / m[col][col];
    }
    Some(sol)
}

/// Per-unit cell weights `w_i(z,e)` for linear estimators of the form
/// `Σ_i w_i(z_i, e_i)·Y_i^obs`.
pub type CellWeights = Vec<BTreeMap<Cell, f64>>;

/// Solves, for every unit, the linear system that makes the weighted
/// estimator unbiased for the direct effect when interference is additive
/// (`C_i ≡ 0`): the treated-cell weights must integrate to `1/n` and each
/// exposure level must balance between arms. Among the solutions the
/// minimum-norm one is returned.
pub fn model_dependent_weights(pi: &PropensityTable) -> Result<CellWeights> {
    let n = pi.n();
    let mut weights: CellWeights = vec![BTreeMap::new(); n];
    for i in 0..n {
        // Levels where both arms are reachable; only these can carry mass.
        let mut usable: Vec<(u32, f64, f64)> = Vec::new();
        let levels: Vec<u32> = pi
            .unit_cells(i)
            .keys()
            .map(|c| c.e)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for &e in &levels {
            let p1 = pi.pi(i, Cell::new(1, e));
            let p0 = pi.pi(i, Cell::new(0, e));
            if p1 > 0.0 && p0 > 0.0 {
                usable.push((e, p1, p0));
            }
        }
        if usable.is_empty() {
            return Err(Error::InfeasibleWeights {
                unit: i,
                reason: "no exposure level is reachable from both arms".into(),
            });
        }
        // Minimize Σ w² subject to Σ_e t_e = 1/n with t_e = w(1,e)·π(1,e):
        // the cost of level e is c_e = 1/π(1,e)² + 1/π(0,e)².
        let inv_costs: Vec<f64> = usable
            .iter()
            .map(|&(_, p1, p0)| 1.0 / (1.0 / (p1 * p1) + 1.0 / (p0 * p0)))
            .collect();
        let total: f64 = inv_costs.iter().sum();
        for (k, &(e, p1, p0)) in usable.iter().enumerate() {
            let t = inv_costs[k] / total / n as f64;
            weights[i].insert(Cell::new(1, e), t / p1);
            weights[i].insert(Cell::new(0, e), -t / p0);
        }
    }
    Ok(weights)
}

/// Applies fixed cell weights to one realized draw.
pub fn estimate_with_cell_weights(
    obs: &[f64],
    a: &ExposureAssignment,
    weights: &CellWeights,
) -> Estimate {
    let mut total = 0.0;
    for i in 0..a.n() {
        let cell = Cell::new(a.treatment(i), a.level(i));
        total += weights[i].get(&cell).copied().unwrap_or(0.0) * obs[i];
    }
    Estimate::defined(total, Diagnostics::default())
}

/// Shrunk inverse weighting: `(1−k)` times the fixed-weight estimate.
/// A suitable `k` strictly improves mean squared error whenever the cell
/// counts are random.
pub fn shrunk_ht(
    obs: &[f64],
    a: &ExposureAssignment,
    pi: &PropensityTable,
    rc: &ResolvedContrast,
    k: f64,
) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidParam(format!(
            "shrinkage k = {k} outside [0,1]"
        )));
    }
    let mut est = horvitz_thompson(obs, a, pi, rc)?;
    est.value = est.value.map(|v| (1.0 - k) * v);
    Ok(est)
}

/// Outcome of checking a weight system against the unbiasedness equations.
#[derive(Debug, Clone)]
pub struct WeightCheckReport {
    pub passed: bool,
    /// First violated equation: `(unit, cell, achieved, required)`.
    pub first_violation: Option<(usize, Cell, f64, f64)>,
    pub max_residual: f64,
}

/// Verifies, by exact enumeration, that draw-dependent weights
/// `w_i(z)` satisfy the linear-unbiasedness system for the contrast: the
/// weighted design mass over each unit's treated cell must be `1/n`, over
/// the baseline cell `−1/n`, and zero over every other cell.
pub fn verify_unbiased_weights(
    weights: &dyn Fn(usize, &[u8]) -> f64,
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    rc: &ResolvedContrast,
    tol: f64,
    support_cap: u128,
) -> Result<WeightCheckReport> {
    let support = design.enumerate_support(support_cap)?;
    let n = g.n();
    let mut sums: Vec<BTreeMap<Cell, f64>> = vec![BTreeMap::new(); n];
    for (z, p) in &support {
        let a = model.expose(g, z);
        for i in 0..n {
            let cell = Cell::new(a.treatment(i), a.level(i));
            *sums[i].entry(cell).or_insert(0.0) += weights(i, z) * p;
        }
    }
    let mut first_violation = None;
    let mut max_residual = 0.0f64;
    for i in 0..n {
        // Every cell with support mass, plus the contrast cells (which may
        // be unreachable: a positivity failure the check must flag).
        let mut cells: Vec<Cell> = sums[i].keys().copied().collect();
        for c in [rc.tau1[i], rc.tau0[i]] {
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
        for cell in cells {
            let achieved = sums[i].get(&cell).copied().unwrap_or(0.0);
            let required = if cell == rc.tau1[i] {
                1.0 / n as f64
            } else if cell == rc.tau0[i] {
                -1.0 / n as f64
            } else {
                0.0
            };
            let residual = (achieved - required).abs();
            max_residual = max_residual.max(residual);
            if residual > tol && first_violation.is_none() {
                first_violation = Some((i, cell, achieved, required));
            }
        }
    }
    Ok(WeightCheckReport {
        passed: first_violation.is_none(),
        first_violation,
        max_residual,
    })
}

/// Convenience: the fixed-weight inverse-propensity system as a weight
/// function, for feeding to [`verify_unbiased_weights`].
pub fn ht_weight_fn<'a>(
    pi: &'a PropensityTable,
    rc: &'a ResolvedContrast,
    model: ExposureModel,
    g: &'a InterferenceGraph,
) -> impl Fn(usize, &[u8]) -> f64 + 'a {
    let n = g.n() as f64;
    move |i: usize, z: &[u8]| {
        let cell = Cell::new(z[i], model.level_of(g, i, z));
        if cell == rc.tau1[i] {
            1.0 / (n * pi.pi(i, cell))
        } else if cell == rc.tau0[i] {
            -1.0 / (n * pi.pi(i, cell))
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Design;
    use crate::exposure::ExposureModel;
    use crate::outcomes::{binary_table, linear_symmetric_table, PotentialOutcomeTable};
    use crate::propensity::{analytic_propensity, enumerated_propensity};

    /// Exact expectation of an estimator closure over a design's support,
    /// with undefined draws excluded and their mass returned.
    fn exact_mean(
        design: &Design,
        g: &InterferenceGraph,
        model: ExposureModel,
        table: &PotentialOutcomeTable,
        f: &dyn Fn(&[f64], &ExposureAssignment) -> Option<f64>,
    ) -> (f64, f64) {
        let mut mean = 0.0;
        let mut undefined = 0.0;
        for (z, p) in design.enumerate_support(1 << 20).unwrap() {
            let a = model.expose(g, &z);
            let obs = table.realize(&a);
            match f(&obs, &a) {
                Some(v) => mean += p * v,
                None => undefined += p,
            }
        }
        (mean / (1.0 - undefined), undefined)
    }

    #[test]
    fn naive_equals_classic_difference_without_interference() {
        let g = InterferenceGraph::empty(4);
        let t = linear_symmetric_table(&g, &[1.0, 2.0, 0.5, 1.5], &[1.0; 4], &[0.0; 4], &[0.0; 4])
            .unwrap();
        let model = ExposureModel::BinaryAny;
        let a = model.expose(&g, &[1, 0, 1, 0]);
        let obs = t.realize(&a);
        let est = naive_dim(&obs, &a);
        let expect = (obs[0] + obs[2]) / 2.0 - (obs[1] + obs[3]) / 2.0;
        assert!((est.value.unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn naive_undefined_when_an_arm_is_empty() {
        let g = InterferenceGraph::empty(3);
        let model = ExposureModel::BinaryAny;
        let a = model.expose(&g, &[1, 1, 1]);
        let est = naive_dim(&[1.0, 1.0, 1.0], &a);
        assert!(est.value.is_none());
        assert_eq!(est.diagnostics.n_tau0, 0);
    }

    #[test]
    fn cell_dim_reduces_to_naive_on_empty_graph() {
        let g = InterferenceGraph::empty(5);
        let model = ExposureModel::BinaryAny;
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 0, 0, 1, 0]);
        let obs = vec![2.0, 1.0, 3.0, 4.0, 0.0];
        let c = cell_dim(&obs, &a, &rc).value.unwrap();
        let nv = naive_dim(&obs, &a).value.unwrap();
        assert!((c - nv).abs() < 1e-15);
    }

    #[test]
    fn cell_dim_single_unit_cell() {
        let g = InterferenceGraph::path(3);
        let model = ExposureModel::BinaryAny;
        let rc = Contrast::dte().resolve(&g, model);
        // z = (1,0,0): unit 0 is (1,0)? its neighbor 1 is control → yes.
        let a = model.expose(&g, &[1, 0, 0]);
        let obs = vec![5.0, 1.0, 2.0];
        let est = cell_dim(&obs, &a, &rc);
        assert_eq!(est.diagnostics.n_tau1, 1);
        // Baseline cell = units 2 (unit 1 is exposed).
        assert_eq!(est.diagnostics.n_tau0, 1);
        assert!((est.value.unwrap() - (5.0 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn cell_dim_expectation_matches_cell_weighted_outcomes() {
        // The exact mean of each cell average (empty cells contributing
        // zero) equals the potential outcomes weighted by the cell-
        // denominator exposure probabilities, for the direct and the
        // exposed contrast alike.
        use crate::propensity::{weighted_exposure_probs_enumerated, CellDenominator};
        let g = InterferenceGraph::cycle(6);
        let model = ExposureModel::BinaryAny;
        let t = binary_table(
            &g,
            &[1.0, -0.2, 0.7, 0.3, 1.4, 0.0],
            &[0.5, 1.1, 0.2, 0.9, 0.4, 0.8],
            &[0.6, 0.3, 0.8, 0.1, 0.5, 0.9],
            &[0.2, 0.7, 0.4, 0.6, 0.0, 0.3],
        )
        .unwrap();
        let d = Design::crd(6, 2).unwrap();
        let beta_w =
            weighted_exposure_probs_enumerated(&d, &g, model, CellDenominator::ByCell, 1 << 20)
                .unwrap();
        for contrast in [Contrast::dte(), Contrast::tte()] {
            let rc = contrast.resolve(&g, model);
            let mut arm = [0.0f64; 2];
            for (z, p) in d.enumerate_support(1 << 20).unwrap() {
                let a = model.expose(&g, &z);
                let obs = t.realize(&a);
                let mut sum = [0.0f64; 2];
                let mut count = [0usize; 2];
                for i in 0..6 {
                    if rc.in_tau1(i, &a) {
                        sum[1] += obs[i];
                        count[1] += 1;
                    }
                    if rc.in_tau0(i, &a) {
                        sum[0] += obs[i];
                        count[0] += 1;
                    }
                }
                for s in [0, 1] {
                    if count[s] > 0 {
                        arm[s] += p * sum[s] / count[s] as f64;
                    }
                }
            }
            let mut expect = 0.0;
            for i in 0..6 {
                let y1 = t.potential_outcome(i, rc.tau1[i].z, rc.tau1[i].e).unwrap();
                let y0 = t.potential_outcome(i, rc.tau0[i].z, rc.tau0[i].e).unwrap();
                expect += y1 * beta_w[i].get(&rc.tau1[i]).copied().unwrap_or(0.0);
                expect -= y0 * beta_w[i].get(&rc.tau0[i]).copied().unwrap_or(0.0);
            }
            assert!(
                (arm[1] - arm[0] - expect).abs() < 1e-12,
                "{contrast:?}: {} vs {expect}",
                arm[1] - arm[0]
            );
        }
    }

    #[test]
    fn ht_exactly_unbiased_by_enumeration() {
        let g = InterferenceGraph::path(5);
        let t = linear_symmetric_table(
            &g,
            &[1.0, -0.5, 2.0, 0.0, 1.5],
            &[0.7, 1.1, -0.2, 0.4, 0.9],
            &[0.5; 5],
            &[0.25; 5],
        )
        .unwrap();
        let model = ExposureModel::SymmetricCount;
        let d = Design::crd(5, 2).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let (mean, undef) = exact_mean(&d, &g, model, &t, &|obs, a| {
            horvitz_thompson(obs, a, &pi, &rc).unwrap().value
        });
        assert_eq!(undef, 0.0);
        let dte = t
            .true_estimand(
                crate::outcomes::EstimandKind::Dte,
                crate::outcomes::ExposedConvention::AllNeighborsTreated,
            )
            .unwrap();
        assert!((mean - dte).abs() < 1e-12, "E[ht] = {mean}, dte = {dte}");
    }

    #[test]
    fn ht_point_mass_design_violates_positivity() {
        // Conditioning coin flips on "all three units treated" leaves a
        // point mass: the realized cell has propensity one and the baseline
        // cell zero, so fixed-weight estimation must refuse.
        let g = std::sync::Arc::new(InterferenceGraph::empty(3));
        let model = ExposureModel::BinaryAny;
        let d = Design::rerandomized(
            Design::bernoulli(3, 0.4).unwrap(),
            g.clone(),
            model,
            vec![(Cell::new(1, 0), 3)],
            1000,
        )
        .unwrap();
        let t = binary_table(&g, &[1.0, 2.0, 3.0], &[0.5; 3], &[0.0; 3], &[0.0; 3]).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 10).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 1, 1]);
        let obs = t.realize(&a);
        let err = horvitz_thompson(&obs, &a, &pi, &rc).unwrap_err();
        assert!(matches!(err, Error::PositivityViolation { .. }));
    }

    #[test]
    fn cluster_direct_contrast_errors_with_failing_unit() {
        let g = InterferenceGraph::from_edge_list(4, &[(0, 1), (2, 3)]).unwrap();
        let model = ExposureModel::BinaryAny;
        let d = Design::cluster(vec![0, 0, 1, 1], 1).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 1, 0, 0]);
        let obs = vec![1.0; 4];
        let err = horvitz_thompson(&obs, &a, &pi, &rc).unwrap_err();
        match err {
            Error::PositivityViolation { unit, z, e, pi } => {
                assert_eq!((z, e), (1, 0));
                assert_eq!(pi, 0.0);
                assert_eq!(unit, 0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn hajek_equals_cell_dim_under_equal_weights() {
        let g = InterferenceGraph::empty(4);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(4, 2).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 0, 1, 0]);
        let obs = vec![4.0, 3.0, 1.0, 2.0];
        let h = hajek(&obs, &a, &pi, &rc).unwrap().value.unwrap();
        let c = cell_dim(&obs, &a, &rc).value.unwrap();
        assert!((h - c).abs() < 1e-14);
    }

    #[test]
    fn hajek_is_location_stable_and_ht_is_not() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(4, 1).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 0, 0, 0]);
        let obs = vec![2.0, 1.0, 0.5, 3.0];
        let shifted: Vec<f64> = obs.iter().map(|v| v + 10.0).collect();
        let h0 = hajek(&obs, &a, &pi, &rc).unwrap().value.unwrap();
        let h1 = hajek(&shifted, &a, &pi, &rc).unwrap().value.unwrap();
        assert!((h0 - h1).abs() < 1e-12);
        let t0 = horvitz_thompson(&obs, &a, &pi, &rc).unwrap().value.unwrap();
        let t1 = horvitz_thompson(&shifted, &a, &pi, &rc)
            .unwrap()
            .value
            .unwrap();
        assert!((t0 - t1).abs() > 1e-6, "ht should move under a level shift");
        // Constant outcomes: the ratio form is exactly zero.
        let consts = vec![7.0; 4];
        let hc = hajek(&consts, &a, &pi, &rc).unwrap().value.unwrap();
        assert_eq!(hc, 0.0);
    }

    #[test]
    fn gd_with_zero_auxiliaries_is_plain_inverse_weighting() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(4, 1).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[0, 1, 0, 0]);
        let obs = vec![1.0, 4.0, 2.0, 3.0];
        let zeros = vec![0.0; 4];
        let gd = generalized_difference(&obs, &a, &pi, &rc, &zeros, &zeros, -1.0, -1.0)
            .unwrap()
            .value
            .unwrap();
        let ht = horvitz_thompson(&obs, &a, &pi, &rc).unwrap().value.unwrap();
        assert!((gd - ht).abs() < 1e-14);
    }

    #[test]
    fn gd_with_oracle_auxiliaries_has_zero_variance() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::BinaryAny;
        let t = binary_table(
            &g,
            &[1.0, 2.0, 0.0, -1.0],
            &[0.5, 1.5, 1.0, 2.0],
            &[0.3; 4],
            &[0.7; 4],
        )
        .unwrap();
        let d = Design::crd(4, 1).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let aux1: Vec<f64> = (0..4)
            .map(|i| t.potential_outcome(i, 1, 0).unwrap())
            .collect();
        let aux0: Vec<f64> = (0..4)
            .map(|i| t.potential_outcome(i, 0, 0).unwrap())
            .collect();
        let dte = t
            .true_estimand(
                crate::outcomes::EstimandKind::Dte,
                crate::outcomes::ExposedConvention::AllNeighborsTreated,
            )
            .unwrap();
        for (z, _) in d.enumerate_support(1 << 20).unwrap() {
            let a = model.expose(&g, &z);
            let obs = t.realize(&a);
            let v = generalized_difference(&obs, &a, &pi, &rc, &aux1, &aux0, -1.0, -1.0)
                .unwrap()
                .value
                .unwrap();
            assert!((v - dte).abs() < 1e-12, "draw {z:?} gave {v}, want {dte}");
        }
    }

    #[test]
    fn gd_unbiased_for_arbitrary_auxiliaries() {
        let g = InterferenceGraph::cycle(5);
        let model = ExposureModel::BinaryAny;
        let t = binary_table(
            &g,
            &[0.2, -0.7, 1.8, 0.9, 0.0],
            &[1.0, 0.3, -0.4, 0.8, 1.2],
            &[0.6; 5],
            &[0.1; 5],
        )
        .unwrap();
        let d = Design::crd(5, 1).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let aux1: Vec<f64> = (0..5).map(|i| (i as f64).sin()).collect();
        let aux0: Vec<f64> = (0..5).map(|i| (i as f64).cos()).collect();
        let (mean, undef) = exact_mean(&d, &g, model, &t, &|obs, a| {
            generalized_difference(obs, a, &pi, &rc, &aux1, &aux0, 0.7, -0.3)
                .unwrap()
                .value
        });
        assert_eq!(undef, 0.0);
        let dte = t
            .true_estimand(
                crate::outcomes::EstimandKind::Dte,
                crate::outcomes::ExposedConvention::AllNeighborsTreated,
            )
            .unwrap();
        assert!((mean - dte).abs() < 1e-12);
    }

    #[test]
    fn greg_recovers_exactly_linear_outcomes() {
        let g = InterferenceGraph::path(6);
        let model = ExposureModel::SymmetricCount;
        // Outcomes exactly linear in (1, z, e, z·e) with shared parameters.
        let t = linear_symmetric_table(&g, &[2.0; 6], &[1.5; 6], &[0.5; 6], &[0.25; 6]).unwrap();
        let d = Design::crd(6, 3).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let dte = 1.5;
        let mut full_rank_draws = 0;
        for (z, _) in d.enumerate_support(1 << 20).unwrap() {
            let a = model.expose(&g, &z);
            let obs = t.realize(&a);
            let est = greg(&obs, &a, &pi, &rc, None).unwrap();
            // Draws whose realized (z,e) rows span the regressors fit the
            // truth exactly; rank-deficient draws fall back to ridge.
            if !est.diagnostics.ridge_fallback {
                full_rank_draws += 1;
                assert!((est.value.unwrap() - dte).abs() < 1e-9, "draw {z:?}");
            }
        }
        assert!(full_rank_draws > 0);
    }

    #[test]
    fn greg_is_location_invariant_on_every_draw() {
        // Shifting all outcomes by a constant moves only the intercept,
        // including on rank-deficient draws where the ridge fallback kicks
        // in (the intercept carries no penalty).
        let g = InterferenceGraph::path(6);
        let model = ExposureModel::SymmetricCount;
        let t = linear_symmetric_table(
            &g,
            &[1.0, 0.2, -0.5, 0.9, 1.3, 0.4],
            &[0.8, 1.2, 0.3, 0.6, 1.0, 0.5],
            &[0.4; 6],
            &[0.2; 6],
        )
        .unwrap();
        let d = Design::crd(6, 3).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let mut ridge_draws = 0;
        for (z, _) in d.enumerate_support(1 << 20).unwrap() {
            let a = model.expose(&g, &z);
            let obs = t.realize(&a);
            let shifted: Vec<f64> = obs.iter().map(|v| v + 100.0).collect();
            let base = greg(&obs, &a, &pi, &rc, None).unwrap();
            let moved = greg(&shifted, &a, &pi, &rc, None).unwrap();
            ridge_draws += usize::from(base.diagnostics.ridge_fallback);
            // The ridge system's conditioning (about 1e8) bounds how
            // closely the two solves can agree on degenerate draws.
            let tol = if base.diagnostics.ridge_fallback {
                1e-4
            } else {
                1e-9
            };
            assert!(
                (base.value.unwrap() - moved.value.unwrap()).abs() < tol,
                "draw {z:?}: {} vs {}",
                base.value.unwrap(),
                moved.value.unwrap()
            );
        }
        assert!(ridge_draws > 0, "the instance should exercise the fallback");
    }

    #[test]
    fn greg_uses_covariates_when_present() {
        // Outcomes depend on a unit covariate; the regression recovers the
        // contrast exactly once the covariate is in the design matrix, and
        // stays merely approximate without it.
        let g = InterferenceGraph::path(6);
        let model = ExposureModel::BinaryAny;
        let xs: Vec<f64> = (0..6).map(|i| 1.0 + 0.5 * i as f64).collect();
        let alphas: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let t = binary_table(&g, &alphas, &[1.5; 6], &[0.5; 6], &[0.25; 6]).unwrap();
        let d = Design::crd(6, 3).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let mut exact_hits = 0;
        for (z, _) in d.enumerate_support(1 << 20).unwrap() {
            let a = model.expose(&g, &z);
            let obs = t.realize(&a);
            let with_x = greg(&obs, &a, &pi, &rc, Some(&xs)).unwrap();
            if !with_x.diagnostics.ridge_fallback {
                assert!((with_x.value.unwrap() - 1.5).abs() < 1e-8, "draw {z:?}");
                exact_hits += 1;
            }
        }
        assert!(exact_hits > 0);
    }

    #[test]
    fn greg_needs_two_design_rows() {
        let g = InterferenceGraph::empty(3);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(3, 1).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[0, 0, 0]);
        let err = greg(&[1.0, 1.0, 1.0], &a, &pi, &rc, None).unwrap_err();
        assert!(matches!(err, Error::EstimatorPrecondition(_)));
    }

    #[test]
    fn model_dependent_weights_reduce_to_inverse_weighting_without_interference() {
        let g = InterferenceGraph::empty(4);
        let model = ExposureModel::SymmetricCount;
        let d = Design::crd(4, 1).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let w = model_dependent_weights(&pi).unwrap();
        for unit in &w {
            assert!((unit[&Cell::new(1, 0)] - 1.0 / (4.0 * 0.25)).abs() < 1e-12);
            assert!((unit[&Cell::new(0, 0)] + 1.0 / (4.0 * 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn model_dependent_weights_unbiased_on_additive_tables_only() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::SymmetricCount;
        let d = Design::crd(4, 2).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let w = model_dependent_weights(&pi).unwrap();
        let additive = linear_symmetric_table(
            &g,
            &[1.0, 0.3, -0.5, 2.0],
            &[0.4, 1.0, 0.6, -0.2],
            &[0.8; 4],
            &[0.0; 4],
        )
        .unwrap();
        let (mean, _) = exact_mean(&d, &g, model, &additive, &|obs, a| {
            estimate_with_cell_weights(obs, a, &w).value
        });
        let dte = additive
            .true_estimand(
                crate::outcomes::EstimandKind::Dte,
                crate::outcomes::ExposedConvention::AllNeighborsTreated,
            )
            .unwrap();
        assert!((mean - dte).abs() < 1e-12);

        // With interaction terms the same weights are biased.
        let interactive = linear_symmetric_table(
            &g,
            &[1.0, 0.3, -0.5, 2.0],
            &[0.4, 1.0, 0.6, -0.2],
            &[0.8; 4],
            &[0.9; 4],
        )
        .unwrap();
        let (mean_bad, _) = exact_mean(&d, &g, model, &interactive, &|obs, a| {
            estimate_with_cell_weights(obs, a, &w).value
        });
        let dte_bad = interactive
            .true_estimand(
                crate::outcomes::EstimandKind::Dte,
                crate::outcomes::ExposedConvention::AllNeighborsTreated,
            )
            .unwrap();
        assert!((mean_bad - dte_bad).abs() > 1e-3);
    }

    #[test]
    fn model_dependent_weights_have_minimal_norm() {
        // Any other solution of the per-unit system concentrates mass
        // differently across levels; the returned weights must not lose to
        // the single-level alternatives.
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::SymmetricCount;
        let d = Design::crd(4, 2).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let w = model_dependent_weights(&pi).unwrap();
        for i in 0..4 {
            let norm: f64 = w[i].values().map(|v| v * v).sum();
            let usable: Vec<u32> = w[i].keys().filter(|c| c.z == 1).map(|c| c.e).collect();
            for &e in &usable {
                let p1 = pi.pi(i, Cell::new(1, e));
                let p0 = pi.pi(i, Cell::new(0, e));
                let single = (1.0 / (4.0 * p1)).powi(2) + (1.0 / (4.0 * p0)).powi(2);
                assert!(
                    norm <= single + 1e-12,
                    "unit {i}: norm {norm} beats single-level {single} at e={e}"
                );
            }
        }
    }

    #[test]
    fn model_dependent_weights_infeasible_when_never_treated() {
        // A point-mass design that never treats unit 0.
        let g = std::sync::Arc::new(InterferenceGraph::empty(3));
        let model = ExposureModel::BinaryAny;
        let d = Design::rerandomized(
            Design::crd(3, 1).unwrap(),
            g.clone(),
            model,
            vec![(Cell::new(1, 0), 1)],
            100,
        )
        .unwrap();
        // Restrict further: only draws where unit 2 is the treated one.
        let support: Vec<_> = d.enumerate_support(1 << 10).unwrap();
        assert!(!support.is_empty());
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 10).unwrap();
        // Under CRD(1) on 3 units every unit is sometimes treated, so this
        // table is feasible; drop unit 0's treated cell to force failure.
        let mut cells: Vec<std::collections::BTreeMap<Cell, f64>> =
            (0..3).map(|i| pi.unit_cells(i).clone()).collect();
        cells[0].remove(&Cell::new(1, 0));
        let broken = PropensityTable::new(cells, crate::propensity::Provenance::Enumerated);
        let err = model_dependent_weights(&broken).unwrap_err();
        assert!(matches!(err, Error::InfeasibleWeights { unit: 0, .. }));
    }

    #[test]
    fn shrinkage_limits() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(4, 1).unwrap();
        let pi = analytic_propensity(&d, &g, model).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let a = model.expose(&g, &[1, 0, 0, 0]);
        let obs = vec![2.0, 1.0, 0.5, 3.0];
        let ht = horvitz_thompson(&obs, &a, &pi, &rc).unwrap().value.unwrap();
        let s0 = shrunk_ht(&obs, &a, &pi, &rc, 0.0).unwrap().value.unwrap();
        let s1 = shrunk_ht(&obs, &a, &pi, &rc, 1.0).unwrap().value.unwrap();
        assert_eq!(s0, ht);
        assert_eq!(s1, 0.0);
        assert!(shrunk_ht(&obs, &a, &pi, &rc, 1.5).is_err());
    }

    #[test]
    fn weight_verifier_accepts_inverse_weights_and_rejects_perturbations() {
        let g = InterferenceGraph::path(4);
        let model = ExposureModel::BinaryAny;
        let d = Design::crd(4, 1).unwrap();
        let (pi, _) = enumerated_propensity(&d, &g, model, 1 << 20).unwrap();
        let rc = Contrast::dte().resolve(&g, model);
        let w = ht_weight_fn(&pi, &rc, model, &g);
        let report = verify_unbiased_weights(&w, &d, &g, model, &rc, 1e-10, 1 << 20).unwrap();
        assert!(report.passed, "residual {}", report.max_residual);

        // All-zero weights violate the first equation family.
        let zero = |_: usize, _: &[u8]| 0.0;
        let report = verify_unbiased_weights(&zero, &d, &g, model, &rc, 1e-10, 1 << 20).unwrap();
        assert!(!report.passed);
        let (_, _, achieved, required) = report.first_violation.unwrap();
        assert_eq!(achieved, 0.0);
        assert!((required.abs() - 0.25).abs() < 1e-15);

        // Perturbing a single positive-probability draw breaks exactness.
        let support = d.enumerate_support(1 << 20).unwrap();
        let target = support[0].0.clone();
        let perturbed = move |i: usize, z: &[u8]| {
            let base = w(i, z);
            if i == 0 && z == target.as_slice() {
                base + 0.01
            } else {
                base
            }
        };
        let report =
            verify_unbiased_weights(&perturbed, &d, &g, model, &rc, 1e-10, 1 << 20).unwrap();
        assert!(!report.passed);
    }
}
