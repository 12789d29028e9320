//! Closed-form bias and variance expressions for difference-in-means and
//! inverse-weighted estimators, each paired with an enumeration
//! cross-check at desk scale.
//!
//! Expectations of ratio statistics follow the convention that an empty
//! denominator group contributes zero (the numerator indicator is zero on
//! exactly those draws), which is also what the closed forms integrate.

use std::collections::BTreeMap;

use crate::design::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::estimator::ResolvedContrast;
use crate::exposure::{Cell, ExposureModel};
use crate::graph::InterferenceGraph;
use crate::outcomes::{EstimandKind, PotentialOutcomeTable};
use crate::propensity::{
    weighted_exposure_probs_enumerated, CellDenominator, JointPropensityTable, PropensityTable,
};
use crate::util::{binom, derive_rng};

/// A closed-form bias value with its inspection trail: the three
/// decomposition terms and, when requested, the enumeration oracle value.
#[derive(Debug, Clone)]
pub struct BiasReport {
    pub analytic_value: f64,
    pub oracle_value: Option<f64>,
    /// Named contributions, e.g. the arm-weight term vs the two
    /// nuisance-outcome terms.
    pub decomposition: Vec<(String, f64)>,
}

/// Bias of the treated-minus-control means estimator for the direct or
/// total effect, on any enumerable design, assembled from the arm-weighted
/// exposure probabilities and the outcome decomposition. Setting
/// `with_oracle` also computes the bias by direct enumeration.
pub fn bias_naive_general(
    table: &PotentialOutcomeTable,
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    target: EstimandKind,
    with_oracle: bool,
    support_cap: u128,
) -> Result<BiasReport> {
    if !matches!(target, EstimandKind::Dte | EstimandKind::Tte) {
        return Err(Error::InvalidParam(
            "bias decomposition targets the direct or total effect".into(),
        ));
    }
    let n = g.n();
    let nf = n as f64;
    let alpha = weighted_exposure_probs_enumerated(
        design,
        g,
        model,
        CellDenominator::ByTreatment,
        support_cap,
    )?;

    let mut a_term = 0.0;
    let mut b_term = 0.0;
    let mut c_term = 0.0;
    for i in 0..n {
        let u = table.unit(i);
        let arm = |z: u8| -> f64 {
            alpha[i]
                .iter()
                .filter(|(c, _)| c.z == z)
                .map(|(_, v)| v)
                .sum()
        };
        let a1 = u.alpha + u.beta;
        let a0 = u.alpha;
        a_term += a1 * (arm(1) - 1.0 / nf) - a0 * (arm(0) - 1.0 / nf);
        for e in 1..u.levels() {
            let w1 = alpha[i].get(&Cell::new(1, e)).copied().unwrap_or(0.0);
            let w0 = alpha[i].get(&Cell::new(0, e)).copied().unwrap_or(0.0);
            b_term += u.b[e as usize] * (w1 - w0);
            c_term += u.c[e as usize] * w1;
        }
        if target == EstimandKind::Tte {
            let l = u.exposed_level as usize;
            b_term -= u.b[l] / nf;
            c_term -= u.c[l] / nf;
        }
    }
    let analytic_value = a_term + b_term + c_term;

    let oracle_value = if with_oracle {
        let est_mean = zero_convention_naive_mean(design, g, model, table, support_cap)?;
        let theta = table.true_estimand(
            target,
            crate::outcomes::ExposedConvention::AllNeighborsTreated,
        )?;
        Some(est_mean - theta)
    } else {
        None
    };

    Ok(BiasReport {
        analytic_value,
        oracle_value,
        decomposition: vec![
            ("arm_weight_term".into(), a_term),
            ("interference_term".into(), b_term),
            ("interaction_term".into(), c_term),
        ],
    })
}

/// Exact mean of the treated-minus-control means statistic, with each arm
/// average contributing zero on draws where that arm is empty.
fn zero_convention_naive_mean(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    table: &PotentialOutcomeTable,
    support_cap: u128,
) -> Result<f64> {
    let mut mean = 0.0;
    for (z, p) in design.enumerate_support(support_cap)? {
        let a = model.expose(g, &z);
        let obs = table.realize(&a);
        let mut sum = [0.0f64; 2];
        let mut count = [0usize; 2];
        for i in 0..g.n() {
            let zi = a.treatment(i) as usize;
            sum[zi] += obs[i];
            count[zi] += 1;
        }
        let arm1 = if count[1] > 0 {
            sum[1] / count[1] as f64
        } else {
            0.0
        };
        let arm0 = if count[0] > 0 {
            sum[0] / count[0] as f64
        } else {
            0.0
        };
        mean += p * (arm1 - arm0);
    }
    Ok(mean)
}

/// Designs covered by the constant-`gamma` linear bias formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearBiasDesign {
    Crd,
    RestrictedBernoulli,
}

/// Bias of the naive estimator for the direct effect under the additive
/// linear count model with shared interference slope `gamma`:
/// `−gamma·2m/(n(n−1))`, the same for any treated count or coin
/// probability.
pub fn bias_linear(_design: LinearBiasDesign, g: &InterferenceGraph, gamma: f64) -> f64 {
    let n = g.n() as f64;
    -gamma * 2.0 * g.edge_count() as f64 / (n * (n - 1.0))
}

/// Bias of the naive estimator for the direct effect under the two-by-two
/// model with per-unit `gamma_i` (additive) and `theta_i` (interaction).
/// Covered designs: completely randomized and unrestricted coin flips (the
/// latter exact up to boundary terms of order `(1−p)^n`, which vanish for
/// moderate `n`).
pub fn bias_binary(
    design: &Design,
    g: &InterferenceGraph,
    gammas: &[f64],
    thetas: &[f64],
) -> Result<f64> {
    let n = g.n();
    if gammas.len() != n || thetas.len() != n {
        return Err(Error::InvalidParam("gamma/theta must have length n".into()));
    }
    let nf = n as f64;
    match design.kind() {
        DesignKind::Crd { n_t } => {
            let n_c = (n - n_t) as i64;
            let mut bias = 0.0;
            for i in 0..n {
                let d = g.degree(i) as i64;
                let denom = binom(n as i64 - 1, d);
                bias += -gammas[i] * binom(n_c - 1, d - 1) / denom / nf
                    + thetas[i] * (1.0 - binom(n_c, d) / denom) / nf;
            }
            Ok(bias)
        }
        DesignKind::Bernoulli { p } => {
            let q = 1.0 - p;
            let mut bias = 0.0;
            for i in 0..n {
                let d = g.degree(i);
                let qd = q.powi(d as i32);
                bias += -(d as f64) * gammas[i] * qd / (nf * (nf - d as f64))
                    + thetas[i] * (1.0 - qd) / nf;
            }
            Ok(bias)
        }
        _ => Err(Error::NoAnalyticFormula(format!(
            "two-by-two bias for {}",
            design.label()
        ))),
    }
}

/// Source of the distributional moments behind the plug-in variance and
/// cluster-bias formulas.
#[derive(Debug, Clone, Copy)]
pub enum MomentSource {
    /// Exact summation over the enumerated support (or over cluster
    /// assignments, where that is the natural support).
    Enumerate { support_cap: u128 },
    /// Monte-Carlo frequencies.
    Mc { samples: u64, seed: u64 },
}

/// Bias of the naive estimator for the direct effect under a cluster
/// design and the shared-slope linear count model. The random cluster
/// totals enter through the per-cluster expectations
/// `E[n_k z_k / n_T]` and `E[n_k (1−z_k) / n_C]`, and the interference
/// slope through the cluster-aggregated edge matrix; all are integrated
/// exactly over the `C(K, K_t)` cluster assignments (or estimated by
/// Monte Carlo when that is too large).
pub fn bias_cluster_linear(
    design: &Design,
    g: &InterferenceGraph,
    table: &PotentialOutcomeTable,
    source: MomentSource,
    with_oracle: bool,
) -> Result<BiasReport> {
    let DesignKind::Cluster {
        partition,
        clusters,
        k_t,
    } = design.kind()
    else {
        return Err(Error::InvalidParam(
            "cluster bias needs a cluster design".into(),
        ));
    };
    let n = g.n();
    let k = *clusters;
    let gamma = shared_linear_slope(table)?;

    // Cluster-level aggregates.
    let mut sizes = vec![0usize; k];
    let mut alpha_bar = vec![0.0f64; k];
    let mut beta_bar = vec![0.0f64; k];
    for i in 0..n {
        let c = partition[i];
        sizes[c] += 1;
        alpha_bar[c] += table.unit(i).alpha;
        beta_bar[c] += table.unit(i).beta;
    }
    for c in 0..k {
        alpha_bar[c] /= sizes[c] as f64;
        beta_bar[c] /= sizes[c] as f64;
    }
    // Ordered-pair edge counts between clusters.
    let mut edge_matrix = vec![vec![0.0f64; k]; k];
    for &(i, j) in g.edges() {
        edge_matrix[partition[i]][partition[j]] += 1.0;
        edge_matrix[partition[j]][partition[i]] += 1.0;
    }

    let mut h_t = vec![0.0f64; k];
    let mut h_c = vec![0.0f64; k];
    let mut edge_term = 0.0f64;
    let mut accumulate = |zc: &[u8], w: f64| {
        let n_treated: f64 = (0..k)
            .filter(|&c| zc[c] == 1)
            .map(|c| sizes[c] as f64)
            .sum();
        let n_control = n as f64 - n_treated;
        let mut w_t = 0.0;
        let mut w_c = 0.0;
        for a in 0..k {
            if zc[a] == 1 {
                h_t[a] += w * sizes[a] as f64 / n_treated;
            } else {
                h_c[a] += w * sizes[a] as f64 / n_control;
            }
            for b in 0..k {
                if zc[b] == 1 {
                    if zc[a] == 1 {
                        w_t += edge_matrix[a][b];
                    } else {
                        w_c += edge_matrix[a][b];
                    }
                }
            }
        }
        edge_term += w * (w_t / n_treated - w_c / n_control);
    };

    match source {
        MomentSource::Enumerate { support_cap } => {
            let points = binom(k as i64, *k_t as i64);
            if points as u128 > support_cap {
                return Err(Error::SupportTooLarge {
                    size: points as u128,
                    cap: support_cap,
                });
            }
            let w = 1.0 / points;
            for_each_cluster_subset(k, *k_t, &mut |zc| accumulate(zc, w));
        }
        MomentSource::Mc { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParam("cluster bias needs samples ≥ 1".into()));
            }
            let mut rng = derive_rng(seed, &[0xc1]);
            let w = 1.0 / samples as f64;
            for _ in 0..samples {
                let idx = rand::seq::index::sample(&mut rng, k, *k_t);
                let mut zc = vec![0u8; k];
                for c in idx {
                    zc[c] = 1;
                }
                accumulate(&zc, w);
            }
        }
    }

    let beta_mean: f64 = table.units().iter().map(|u| u.beta).sum::<f64>() / n as f64;
    let beta_weight_term: f64 = (0..k).map(|c| beta_bar[c] * h_t[c]).sum::<f64>() - beta_mean;
    let alpha_weight_term: f64 = (0..k).map(|c| alpha_bar[c] * (h_t[c] - h_c[c])).sum();
    let interference_term = gamma * edge_term;
    let analytic_value = beta_weight_term + alpha_weight_term + interference_term;

    let oracle_value = if with_oracle {
        let mean =
            zero_convention_naive_mean(design, g, ExposureModel::SymmetricCount, table, 1 << 24)?;
        Some(mean - beta_mean)
    } else {
        None
    };

    Ok(BiasReport {
        analytic_value,
        oracle_value,
        decomposition: vec![
            ("beta_weight_term".into(), beta_weight_term),
            ("alpha_weight_term".into(), alpha_weight_term),
            ("interference_term".into(), interference_term),
        ],
    })
}

fn for_each_cluster_subset(k: usize, k_t: usize, f: &mut impl FnMut(&[u8])) {
    let mut zc = vec![0u8; k];
    let limit = 1u64 << k;
    let mut mask = (1u64 << k_t) - 1;
    while mask < limit {
        for (c, v) in zc.iter_mut().enumerate() {
            *v = ((mask >> c) & 1) as u8;
        }
        f(&zc);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r >= limit {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
    }
}

/// Extracts the shared interference slope of a linear additive count
/// table (`B_i(e) = gamma·e`, `C_i ≡ 0`), failing if the table departs
/// from that structure.
fn shared_linear_slope(table: &PotentialOutcomeTable) -> Result<f64> {
    let mut gamma: Option<f64> = None;
    for (i, u) in table.units().iter().enumerate() {
        if u.c.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParam(format!(
                "unit {i}: interaction terms present; the cluster formula needs an additive table"
            )));
        }
        if u.b.len() > 1 {
            let slope = u.b[1];
            for (e, &b) in u.b.iter().enumerate() {
                if (b - slope * e as f64).abs() > 1e-9 {
                    return Err(Error::InvalidParam(format!(
                        "unit {i}: B is not linear in the level"
                    )));
                }
            }
            match gamma {
                None => gamma = Some(slope),
                Some(v) if (v - slope).abs() > 1e-9 => {
                    return Err(Error::InvalidParam(
                        "interference slope differs across units".into(),
                    ))
                }
                _ => {}
            }
        }
    }
    Ok(gamma.unwrap_or(0.0))
}

/// Population variance of the inverse-weighted estimator from unit-level
/// and pairwise cell probabilities.
pub fn var_ht(
    table: &PotentialOutcomeTable,
    rc: &ResolvedContrast,
    pi: &PropensityTable,
    pij: &JointPropensityTable,
) -> Result<f64> {
    let n = rc.n();
    let y1: Vec<f64> = (0..n)
        .map(|i| table.potential_outcome(i, rc.tau1[i].z, rc.tau1[i].e))
        .collect::<Result<_>>()?;
    let y0: Vec<f64> = (0..n)
        .map(|i| table.potential_outcome(i, rc.tau0[i].z, rc.tau0[i].e))
        .collect::<Result<_>>()?;
    let p1: Vec<f64> = (0..n).map(|i| pi.pi(i, rc.tau1[i])).collect();
    let p0: Vec<f64> = (0..n).map(|i| pi.pi(i, rc.tau0[i])).collect();
    for i in 0..n {
        if p1[i] <= 0.0 || p0[i] <= 0.0 {
            return Err(Error::PositivityViolation {
                unit: i,
                z: if p1[i] <= 0.0 {
                    rc.tau1[i].z
                } else {
                    rc.tau0[i].z
                },
                e: if p1[i] <= 0.0 {
                    rc.tau1[i].e
                } else {
                    rc.tau0[i].e
                },
                pi: p1[i].min(p0[i]),
            });
        }
    }

    let mut total = 0.0;
    for i in 0..n {
        total += y1[i] * y1[i] * (1.0 - p1[i]) / p1[i];
        total += y0[i] * y0[i] * (1.0 - p0[i]) / p0[i];
    }
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let j11 = pij.pi2(i, rc.tau1[i], j, rc.tau1[j]);
            total += y1[i] * y1[j] * (j11 - p1[i] * p1[j]) / (p1[i] * p1[j]);
            let j00 = pij.pi2(i, rc.tau0[i], j, rc.tau0[j]);
            total += y0[i] * y0[j] * (j00 - p0[i] * p0[j]) / (p0[i] * p0[j]);
            let j10 = pij.pi2(i, rc.tau1[i], j, rc.tau0[j]);
            cross += y1[i] * y0[j] * j10 / (p1[i] * p0[j]);
        }
    }
    let s1: f64 = y1.iter().sum();
    let s0: f64 = y0.iter().sum();
    total -= 2.0 * (cross - s1 * s0);
    Ok(total / (n as f64 * n as f64))
}

/// Variance of the naive estimator under a completely randomized design
/// and the shared-slope linear count model with unit effects of variance
/// `sigma2`:
/// `sigma²(1/n_t + 1/n_c) + gamma²·(c1·m + c2·m² + c3·Σd² + c4·Σ_{i≠j}d_i d_j)`.
pub fn var_naive_linear_crd(
    g: &InterferenceGraph,
    n_t: usize,
    gamma: f64,
    sigma2: f64,
) -> Result<f64> {
    let n = g.n();
    if n <= 3 {
        return Err(Error::InvalidParam(
            "the linear variance constants need n ≥ 4".into(),
        ));
    }
    if n_t == 0 || n_t >= n {
        return Err(Error::InvalidParam("need 0 < n_t < n".into()));
    }
    let (c1, c2, c3, c4) = linear_variance_constants(n, n_t);
    let m = g.edge_count() as f64;
    let sum_d2: f64 = g.degrees().iter().map(|&d| (d * d) as f64).sum();
    let sum_d: f64 = 2.0 * m;
    let sum_didj = sum_d * sum_d - sum_d2;
    let nf_t = n_t as f64;
    let nf_c = (n - n_t) as f64;
    Ok(sigma2 * (1.0 / nf_t + 1.0 / nf_c)
        + gamma * gamma * (c1 * m + c2 * m * m + c3 * sum_d2 + c4 * sum_didj))
}

/// The four printed constants of the linear-model variance.
pub fn linear_variance_constants(n: usize, n_t: usize) -> (f64, f64, f64, f64) {
    let n = n as f64;
    let nt = n_t as f64;
    let nc = n - nt;
    let c1 = 4.0 * n / ((n - 1.0) * (n - 2.0) * (n - 3.0)) * (1.0 - 1.0 / nt) * (1.0 - 1.0 / nc);
    let c2 = 8.0 * (nt - 1.0) * (6.0 * nt - 3.0 * n + 3.0 * n * n - 5.0 * n * nt)
        / (n * (n - 1.0) * (n - 1.0) * (n - 2.0) * (n - 3.0) * nt * nc);
    let c3 = 4.0 * n * (nt - 1.0) * (nt - 2.0) / (nt * nc * (n - 1.0) * (n - 2.0) * (n - 3.0))
        + nt / (nc * n * n)
        - 4.0 * (nt - 1.0) / (nc * (n - 1.0) * (n - 2.0));
    let c4 = -nt / (nc * n * n * (n - 1.0));
    (c1, c2, c3, c4)
}

/// `Var( Σ_{ij} g_ij Z_i Z_j )` under a completely randomized design,
/// i.e. the variance of twice the doubly-treated edge count.
pub fn var_treated_pair_sum(g: &InterferenceGraph, n_t: usize) -> f64 {
    let n = g.n() as f64;
    let nt = n_t as f64;
    let nc = n - nt;
    let m = g.edge_count() as f64;
    let sum_d2: f64 = g.degrees().iter().map(|&d| (d * d) as f64).sum();
    4.0 * nt * nc * (nt - 1.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
        * (m * (nc - 1.0)
            + 2.0 * m * m * (3.0 * n + 3.0 * nt - 2.0 * n * nt - 3.0) / (n * (n - 1.0))
            + (nt - 2.0) * sum_d2)
}

/// `Var( Σ_i d_i Z_i )` under a completely randomized design.
pub fn var_treated_degree_sum(g: &InterferenceGraph, n_t: usize) -> f64 {
    let n = g.n() as f64;
    let nt = n_t as f64;
    let nc = n - nt;
    let sum_d2: f64 = g.degrees().iter().map(|&d| (d * d) as f64).sum();
    let sum_d: f64 = g.degrees().iter().map(|&d| d as f64).sum();
    let sum_didj = sum_d * sum_d - sum_d2;
    nt * nc / (n * n) * (sum_d2 - sum_didj / (n - 1.0))
}

/// `Cov( Σ_{ij} g_ij Z_i Z_j, Σ_i d_i Z_i )` under a completely
/// randomized design.
pub fn cov_pair_degree_sums(g: &InterferenceGraph, n_t: usize) -> f64 {
    let n = g.n() as f64;
    let nt = n_t as f64;
    let nc = n - nt;
    let m = g.edge_count() as f64;
    let sum_d2: f64 = g.degrees().iter().map(|&d| (d * d) as f64).sum();
    2.0 * nt * nc * (nt - 1.0) / (n * (n - 1.0) * (n - 2.0)) * (sum_d2 - 4.0 * m * m / n)
}

/// Same variance as [`var_naive_linear_crd`] but assembled from the three
/// covariance helpers instead of the flattened constants.
pub fn var_naive_linear_crd_from_helpers(
    g: &InterferenceGraph,
    n_t: usize,
    gamma: f64,
    sigma2: f64,
) -> f64 {
    let n = g.n() as f64;
    let nt = n_t as f64;
    let nc = n - nt;
    let var_zz = var_treated_pair_sum(g, n_t);
    let var_dz = var_treated_degree_sum(g, n_t);
    let cov = cov_pair_degree_sums(g, n_t);
    sigma2 * (1.0 / nt + 1.0 / nc)
        + gamma
            * gamma
            * (n * n / (nt * nt * nc * nc) * var_zz + var_dz / (nc * nc)
                - 2.0 * n / (nc * nc * nt) * cov)
}

/// Distribution moments feeding the two-by-two plug-in variance: unit and
/// pairwise probabilities of the exposed cells, plus the mixed
/// exposure-treatment products.
#[derive(Debug, Clone)]
pub struct BinaryNaiveMoments {
    pub n_t: usize,
    /// `P(Z_i = 1, E_i = 1)`.
    pub rho: Vec<f64>,
    /// `P(E_i = 1)`.
    pub pi_e: Vec<f64>,
    /// `P(E_i = 1, E_j = 1)` for reporting; not used by the assembly.
    pub pi_pair: Vec<Vec<f64>>,
    /// `P(E_i=1, E_j=1, Z_i=1, Z_j=1)`.
    pub rho_pair: Vec<Vec<f64>>,
    /// `P(E_i=1, E_j=1, Z_i=0, Z_j=0)`.
    pub both_control_pair: Vec<Vec<f64>>,
    /// `P(E_i=1, E_j=1, Z_i=1, Z_j=0)`.
    pub split_pair: Vec<Vec<f64>>,
    /// `P(E_j=1, Z_i=1, Z_j=1)`.
    pub exposed_with_both_treated: Vec<Vec<f64>>,
    /// `P(E_j=1, Z_i=1, Z_j=0)`.
    pub exposed_with_i_treated: Vec<Vec<f64>>,
}

/// Collects the moments exactly (enumeration) or by Monte Carlo.
pub fn binary_naive_moments(
    g: &InterferenceGraph,
    design: &Design,
    source: MomentSource,
) -> Result<BinaryNaiveMoments> {
    let DesignKind::Crd { n_t } = design.kind() else {
        return Err(Error::InvalidParam(
            "the two-by-two variance is derived for a completely randomized design".into(),
        ));
    };
    let n = g.n();
    let mut m = BinaryNaiveMoments {
        n_t: *n_t,
        rho: vec![0.0; n],
        pi_e: vec![0.0; n],
        pi_pair: vec![vec![0.0; n]; n],
        rho_pair: vec![vec![0.0; n]; n],
        both_control_pair: vec![vec![0.0; n]; n],
        split_pair: vec![vec![0.0; n]; n],
        exposed_with_both_treated: vec![vec![0.0; n]; n],
        exposed_with_i_treated: vec![vec![0.0; n]; n],
    };
    let model = ExposureModel::BinaryAny;
    let mut accumulate = |z: &[u8], w: f64| {
        let a = model.expose(g, z);
        for i in 0..n {
            let (zi, ei) = (a.treatment(i), a.level(i));
            if ei == 1 {
                m.pi_e[i] += w;
                if zi == 1 {
                    m.rho[i] += w;
                }
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (zj, ej) = (a.treatment(j), a.level(j));
                if ei == 1 && ej == 1 {
                    m.pi_pair[i][j] += w;
                    if zi == 1 && zj == 1 {
                        m.rho_pair[i][j] += w;
                    }
                    if zi == 0 && zj == 0 {
                        m.both_control_pair[i][j] += w;
                    }
                    if zi == 1 && zj == 0 {
                        m.split_pair[i][j] += w;
                    }
                }
                if ej == 1 && zi == 1 {
                    if zj == 1 {
                        m.exposed_with_both_treated[i][j] += w;
                    } else {
                        m.exposed_with_i_treated[i][j] += w;
                    }
                }
            }
        }
    };
    match source {
        MomentSource::Enumerate { support_cap } => {
            for (z, p) in design.enumerate_support(support_cap)? {
                accumulate(&z, p);
            }
        }
        MomentSource::Mc { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParam(
                    "moment sampling needs samples ≥ 1".into(),
                ));
            }
            let mut rng = derive_rng(seed, &[0xb1]);
            let w = 1.0 / samples as f64;
            for _ in 0..samples {
                let z = design.sample(&mut rng)?;
                accumulate(&z, w);
            }
        }
    }
    Ok(m)
}

/// Variance of the naive estimator under the additive two-by-two model
/// with a common direct effect, assembled from plug-in moments. The three
/// blocks are the baseline-level variance, the interference variance and
/// their covariance.
pub fn var_naive_binary(
    g: &InterferenceGraph,
    design: &Design,
    table: &PotentialOutcomeTable,
    source: MomentSource,
) -> Result<f64> {
    let n = g.n();
    // Model preconditions: binary additive, common beta.
    let beta0 = table.unit(0).beta;
    for (i, u) in table.units().iter().enumerate() {
        if u.levels() > 2 {
            return Err(Error::InvalidParam(format!(
                "unit {i}: the two-by-two variance needs binary exposure tables"
            )));
        }
        if u.c.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParam(format!(
                "unit {i}: interaction terms present; additivity is required"
            )));
        }
        if (u.beta - beta0).abs() > 1e-9 {
            return Err(Error::InvalidParam(
                "direct effects must be constant across units".into(),
            ));
        }
    }
    let m = binary_naive_moments(g, design, source)?;
    let alphas: Vec<f64> = table.units().iter().map(|u| u.alpha).collect();
    let gammas: Vec<f64> = table
        .units()
        .iter()
        .map(|u| u.b.get(1).copied().unwrap_or(0.0))
        .collect();
    Ok(assemble_binary_naive_variance(n, &m, &alphas, &gammas))
}

/// The plug-in assembly itself, separated so moment sets from different
/// sources can be compared.
pub fn assemble_binary_naive_variance(
    n: usize,
    m: &BinaryNaiveMoments,
    alphas: &[f64],
    gammas: &[f64],
) -> f64 {
    let nf = n as f64;
    let nt = m.n_t as f64;
    let nc = nf - nt;

    // Baseline block: Var(Σ α_i u_i) with u_i = (n·z_i − n_t)/(n_t·n_c).
    let sum_a2: f64 = alphas.iter().map(|a| a * a).sum();
    let sum_a = alphas.iter().sum::<f64>();
    let sum_aiaj = sum_a * sum_a - sum_a2;
    let var_alpha = sum_a2 / (nt * nc) - sum_aiaj / (nt * nc * (nf - 1.0));

    // Interference block: Var(Σ γ_i v_i), v_i = e_i·(z_i/n_t − (1−z_i)/n_c).
    let ev = |i: usize| m.rho[i] / nt - (m.pi_e[i] - m.rho[i]) / nc;
    let mut var_gamma = 0.0;
    for i in 0..n {
        let second = m.rho[i] / (nt * nt) + (m.pi_e[i] - m.rho[i]) / (nc * nc);
        var_gamma += gammas[i] * gammas[i] * (second - ev(i) * ev(i));
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let second = m.rho_pair[i][j] / (nt * nt) + m.both_control_pair[i][j] / (nc * nc)
                - (m.split_pair[i][j] + m.split_pair[j][i]) / (nt * nc);
            var_gamma += gammas[i] * gammas[j] * (second - ev(i) * ev(j));
        }
    }

    // Covariance block: 2·Σ_{i,j} α_i γ_j E[u_i v_j]  (E[u_i] = 0).
    let denom = (nt * nc) * (nt * nc);
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e_uv = if i == j {
                (nf * nf * m.rho[i] - 2.0 * nf * nt * m.rho[i] + nt * nt * m.pi_e[i]) / denom
            } else {
                let e_zz = m.exposed_with_both_treated[i][j];
                let e_zi = e_zz + m.exposed_with_i_treated[i][j];
                (nf * nf * e_zz - nf * nt * (e_zi + m.rho[j]) + nt * nt * m.pi_e[j]) / denom
            };
            cov += alphas[i] * gammas[j] * e_uv;
        }
    }

    var_alpha + var_gamma + 2.0 * cov
}

/// Locates a shrinkage factor in `(0,1]` whose scaled estimator strictly
/// beats the unshrunk one in mean squared error, given exact first and
/// second moments. Returns `(k, mse(k), mse(0))`; a positive gap exists
/// whenever the estimator's variance is positive.
pub fn shrinkage_search(expectation: f64, variance: f64, grid: usize) -> Option<(f64, f64, f64)> {
    // For an unbiased estimator: mse((1−k)·est) = mse + k²(var + θ²) − 2k·var.
    let theta = expectation;
    let mse0 = variance;
    let mut best: Option<(f64, f64)> = None;
    for step in 1..=grid {
        let k = step as f64 / grid as f64;
        let mse = mse0 + k * k * (variance + theta * theta) - 2.0 * k * variance;
        if mse < mse0 && best.is_none_or(|(_, b)| mse < b) {
            best = Some((k, mse));
        }
    }
    best.map(|(k, mse)| (k, mse, mse0))
}

/// Exact mean and variance of fixed cell weights applied to a table, by
/// support enumeration; the small-scale oracle used in several checks.
pub fn enumerate_cell_weight_moments(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    table: &PotentialOutcomeTable,
    weights: &[BTreeMap<Cell, f64>],
    support_cap: u128,
) -> Result<(f64, f64)> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (z, p) in design.enumerate_support(support_cap)? {
        let a = model.expose(g, &z);
        let obs = table.realize(&a);
        let mut v = 0.0;
        for i in 0..g.n() {
            let cell = Cell::new(a.treatment(i), a.level(i));
            v += weights[i].get(&cell).copied().unwrap_or(0.0) * obs[i];
        }
        mean += p * v;
        second += p * v * v;
    }
    Ok((mean, second - mean * mean))
}

/// Draws `samples` realizations of the naive estimator with fresh unit
/// effects each replicate (`alpha_i = alpha + eps_i`, `eps ~ N(0, sigma)`),
/// returning the sample variance. Used to validate the dual-randomness
/// reading of the linear variance formula.
pub fn mc_naive_variance_with_unit_noise(
    g: &InterferenceGraph,
    n_t: usize,
    gamma: f64,
    sigma: f64,
    beta: f64,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    use rand_distr::{Distribution, Normal};
    let design = Design::crd(g.n(), n_t)?;
    let model = ExposureModel::SymmetricCount;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut rng = derive_rng(seed, &[0xe5]);
    let mut values = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let alphas: Vec<f64> = (0..g.n()).map(|_| noise.sample(&mut rng)).collect();
        let table = crate::outcomes::linear_symmetric_table(
            g,
            &alphas,
            &vec![beta; g.n()],
            &vec![gamma; g.n()],
            &vec![0.0; g.n()],
        )?;
        let z = design.sample(&mut rng)?;
        let a = model.expose(g, &z);
        let obs = table.realize(&a);
        let est = crate::estimator::naive_dim(&obs, &a);
        values.push(est.value.expect("both arms nonempty under a CRD"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64)
}
