//! Treatment-assignment mechanisms: sampleable distributions over
//! `{0,1}^n`, each with exact support enumeration at small `n`.
//!
//! Designs are immutable. [`Design::sample`] takes the RNG by argument so
//! replicates can run on independent streams without shared state.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exposure::{Cell, ExposureModel};
use crate::graph::InterferenceGraph;
use crate::propensity;
use crate::util::{binom, derive_rng};

/// Default cap on enumerable support size.
pub const DEFAULT_SUPPORT_CAP: u128 = 1 << 20;

#[derive(Debug, Clone)]
pub enum DesignKind {
    /// Completely randomized: exactly `n_t` treated units, uniform over
    /// all such vectors.
    Crd { n_t: usize },
    /// Independent coin flips with success probability `p`.
    Bernoulli { p: f64 },
    /// Coin flips conditioned on at least one treated and one control unit.
    RestrictedBernoulli { p: f64 },
    /// Unit `i` inherits the assignment of its cluster; clusters get a
    /// completely randomized assignment with `k_t` treated.
    Cluster {
        partition: Arc<Vec<usize>>,
        clusters: usize,
        k_t: usize,
    },
    /// Greedy random independent set: ego units get a completely
    /// randomized assignment with `min(k_t, #egos)` treated, alters always
    /// receive control.
    IndependentSet {
        graph: Arc<InterferenceGraph>,
        k_t: usize,
        mix_p: f64,
    },
    /// Rejection-sample the base design until every required cell holds at
    /// least its minimum count of units.
    Rerandomized {
        base: Box<Design>,
        graph: Arc<InterferenceGraph>,
        model: ExposureModel,
        required: Vec<(Cell, usize)>,
        max_tries: u64,
    },
}

/// A probability distribution over treatment vectors of length `n`.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    kind: DesignKind,
}

impl Design {
    pub fn crd(n: usize, n_t: usize) -> Result<Self> {
        if n_t == 0 || n_t >= n {
            return Err(Error::InvalidParam(format!(
                "crd needs 0 < n_t < n, got n_t = {n_t}, n = {n}"
            )));
        }
        Ok(Self {
            n,
            kind: DesignKind::Crd { n_t },
        })
    }

    pub fn bernoulli(n: usize, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParam(format!(
                "bernoulli needs 0 < p < 1, got p = {p}"
            )));
        }
        Ok(Self {
            n,
            kind: DesignKind::Bernoulli { p },
        })
    }

    pub fn restricted_bernoulli(n: usize, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParam(format!(
                "restricted bernoulli needs 0 < p < 1, got p = {p}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParam(
                "restricted bernoulli needs at least 2 units".into(),
            ));
        }
        Ok(Self {
            n,
            kind: DesignKind::RestrictedBernoulli { p },
        })
    }

    /// `partition[i]` is the cluster of unit `i`; ids must cover
    /// `0..K` with every cluster nonempty.
    pub fn cluster(partition: Vec<usize>, k_t: usize) -> Result<Self> {
        let n = partition.len();
        let clusters = partition.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; clusters];
        for &c in &partition {
            sizes[c] += 1;
        }
        if clusters == 0 || sizes.contains(&0) {
            return Err(Error::InvalidParam(
                "cluster ids must cover 0..K with no empty cluster".into(),
            ));
        }
        if k_t == 0 || k_t >= clusters {
            return Err(Error::InvalidParam(format!(
                "cluster design needs 0 < K_t < K, got K_t = {k_t}, K = {clusters}"
            )));
        }
        Ok(Self {
            n,
            kind: DesignKind::Cluster {
                partition: Arc::new(partition),
                clusters,
                k_t,
            },
        })
    }

    pub fn independent_set(graph: Arc<InterferenceGraph>, k_t: usize, mix_p: f64) -> Result<Self> {
        if k_t == 0 {
            return Err(Error::InvalidParam("independent set needs k_t ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&mix_p) {
            return Err(Error::InvalidParam(format!(
                "independent set needs mix_p in [0,1], got {mix_p}"
            )));
        }
        Ok(Self {
            n: graph.n(),
            kind: DesignKind::IndependentSet { graph, k_t, mix_p },
        })
    }

    pub fn rerandomized(
        base: Design,
        graph: Arc<InterferenceGraph>,
        model: ExposureModel,
        required: Vec<(Cell, usize)>,
        max_tries: u64,
    ) -> Result<Self> {
        if base.n() != graph.n() {
            return Err(Error::InvalidParam(
                "re-randomization base and graph sizes differ".into(),
            ));
        }
        if required.is_empty() {
            return Err(Error::InvalidParam(
                "re-randomization needs at least one required cell".into(),
            ));
        }
        Ok(Self {
            n: graph.n(),
            kind: DesignKind::Rerandomized {
                base: Box::new(base),
                graph,
                model,
                required,
                max_tries,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    /// Short label for CSV output and seed derivation.
    pub fn label(&self) -> String {
        match &self.kind {
            DesignKind::Crd { n_t } => format!("crd({n_t})"),
            DesignKind::Bernoulli { p } => format!("bernoulli({p})"),
            DesignKind::RestrictedBernoulli { p } => format!("restricted_bernoulli({p})"),
            DesignKind::Cluster { clusters, k_t, .. } => format!("cluster({k_t}/{clusters})"),
            DesignKind::IndependentSet { k_t, mix_p, .. } => {
                format!("independent_set({k_t},mix={mix_p})")
            }
            DesignKind::Rerandomized { base, .. } => format!("rerandomized[{}]", base.label()),
        }
    }

    /// Draws one treatment vector.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<Vec<u8>> {
        match &self.kind {
            DesignKind::Crd { n_t } => Ok(crd_draw(self.n, *n_t, rng)),
            DesignKind::Bernoulli { p } => {
                Ok((0..self.n).map(|_| rng.gen_bool(*p) as u8).collect())
            }
            DesignKind::RestrictedBernoulli { p } => loop {
                let z: Vec<u8> = (0..self.n).map(|_| rng.gen_bool(*p) as u8).collect();
                let t: usize = z.iter().map(|&v| v as usize).sum();
                if t > 0 && t < self.n {
                    return Ok(z);
                }
            },
            DesignKind::Cluster {
                partition,
                clusters,
                k_t,
            } => {
                let zc = crd_draw(*clusters, *k_t, rng);
                Ok(partition.iter().map(|&c| zc[c]).collect())
            }
            DesignKind::IndependentSet { graph, k_t, mix_p } => {
                let (egos, _) = greedy_independent_set(graph, rng, *mix_p);
                let k_eff = (*k_t).min(egos.len());
                let mut z = vec![0u8; self.n];
                let mut order = egos;
                order.shuffle(rng);
                for &u in order.iter().take(k_eff) {
                    z[u] = 1;
                }
                Ok(z)
            }
            DesignKind::Rerandomized {
                base,
                graph,
                model,
                required,
                max_tries,
            } => {
                for _ in 0..*max_tries {
                    let z = base.sample(rng)?;
                    if satisfies_counts(&z, graph, *model, required) {
                        return Ok(z);
                    }
                }
                Err(Error::RerandomizationExhausted {
                    tries: *max_tries,
                    acceptance_rate: 1.0 / *max_tries as f64,
                })
            }
        }
    }

    /// Rough support size, used to refuse enumeration early. `None` means
    /// it does not fit in a `u128`.
    pub fn support_size_hint(&self) -> Option<u128> {
        match &self.kind {
            DesignKind::Crd { n_t } => Some(binom(self.n as i64, *n_t as i64) as u128),
            DesignKind::Bernoulli { .. } => 1u128.checked_shl(self.n as u32),
            DesignKind::RestrictedBernoulli { .. } => {
                1u128.checked_shl(self.n as u32).map(|v| v - 2)
            }
            DesignKind::Cluster { clusters, k_t, .. } => {
                Some(binom(*clusters as i64, *k_t as i64) as u128)
            }
            DesignKind::IndependentSet { .. } => 1u128.checked_shl(self.n as u32),
            DesignKind::Rerandomized { base, .. } => base.support_size_hint(),
        }
    }

    /// Lists every support point with its probability. Probabilities sum
    /// to one up to rounding. Fails when the support exceeds `cap`.
    pub fn enumerate_support(&self, cap: u128) -> Result<Vec<(Vec<u8>, f64)>> {
        // The coin-flip walks below hold the point count in a u64; the
        // greedy-process recursion additionally needs a small unit count.
        let width_limit: u128 = match &self.kind {
            DesignKind::IndependentSet { .. } => 1 << 24,
            DesignKind::Bernoulli { .. } | DesignKind::RestrictedBernoulli { .. } => 1 << 62,
            _ => u128::MAX,
        };
        let cap = cap.min(width_limit);
        match self.support_size_hint() {
            Some(hint) if hint <= cap => {}
            Some(hint) => return Err(Error::SupportTooLarge { size: hint, cap }),
            None => {
                return Err(Error::SupportTooLarge {
                    size: u128::MAX,
                    cap,
                })
            }
        }
        match &self.kind {
            DesignKind::Crd { n_t } => {
                let mut out = Vec::new();
                let total = binom(self.n as i64, *n_t as i64);
                for_each_combination(self.n, *n_t, &mut |treated| {
                    out.push((indices_to_vec(treated, self.n), 1.0 / total));
                });
                Ok(out)
            }
            DesignKind::Bernoulli { p } => {
                let mut out = Vec::with_capacity(1 << self.n);
                for mask in 0u64..(1u64 << self.n) {
                    let t = mask.count_ones() as i32;
                    let prob = p.powi(t) * (1.0 - p).powi(self.n as i32 - t);
                    out.push((mask_to_vec(mask, self.n), prob));
                }
                Ok(out)
            }
            DesignKind::RestrictedBernoulli { p } => {
                let norm = 1.0 - p.powi(self.n as i32) - (1.0 - p).powi(self.n as i32);
                let mut out = Vec::with_capacity((1 << self.n) - 2);
                for mask in 1u64..((1u64 << self.n) - 1) {
                    let t = mask.count_ones() as i32;
                    let prob = p.powi(t) * (1.0 - p).powi(self.n as i32 - t) / norm;
                    out.push((mask_to_vec(mask, self.n), prob));
                }
                Ok(out)
            }
            DesignKind::Cluster {
                partition,
                clusters,
                k_t,
            } => {
                let total = binom(*clusters as i64, *k_t as i64);
                let mut out = Vec::new();
                for_each_combination(*clusters, *k_t, &mut |treated| {
                    let zc = indices_to_vec(treated, *clusters);
                    let z: Vec<u8> = partition.iter().map(|&c| zc[c]).collect();
                    out.push((z, 1.0 / total));
                });
                Ok(out)
            }
            DesignKind::IndependentSet { graph, k_t, mix_p } => {
                let egosets = enumerate_ego_sets(graph, *mix_p)?;
                let mut merged: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
                for (egos, p_set) in egosets {
                    let k = egos.len();
                    let k_eff = (*k_t).min(k);
                    let combos = binom(k as i64, k_eff as i64);
                    for_each_combination(k, k_eff, &mut |picks| {
                        let mut z = vec![0u8; self.n];
                        for &slot in picks {
                            z[egos[slot]] = 1;
                        }
                        *merged.entry(z).or_insert(0.0) += p_set / combos;
                    });
                }
                Ok(merged.into_iter().collect())
            }
            DesignKind::Rerandomized {
                base,
                graph,
                model,
                required,
                ..
            } => {
                let raw = base.enumerate_support(cap)?;
                let kept: Vec<(Vec<u8>, f64)> = raw
                    .into_iter()
                    .filter(|(z, _)| satisfies_counts(z, graph, *model, required))
                    .collect();
                let mass: f64 = kept.iter().map(|(_, p)| p).sum();
                if mass <= 0.0 {
                    return Err(Error::InvalidParam(
                        "re-randomization predicate is never satisfied".into(),
                    ));
                }
                Ok(kept.into_iter().map(|(z, p)| (z, p / mass)).collect())
            }
        }
    }
}

fn crd_draw(n: usize, n_t: usize, rng: &mut impl Rng) -> Vec<u8> {
    let idx = rand::seq::index::sample(rng, n, n_t);
    let mut z = vec![0u8; n];
    for i in idx {
        z[i] = 1;
    }
    z
}

fn mask_to_vec(mask: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
}

fn indices_to_vec(ones: &[usize], n: usize) -> Vec<u8> {
    let mut z = vec![0u8; n];
    for &i in ones {
        z[i] = 1;
    }
    z
}

/// Calls `f` with every size-`k` subset of `0..n` in lexicographic order,
/// passed as a sorted index slice. Works for any `n`; only the subset
/// count matters.
fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance the rightmost index that still has room.
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + n - k {
                idx[pos] += 1;
                for j in (pos + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
        if k == 0 {
            return;
        }
    }
}

fn satisfies_counts(
    z: &[u8],
    g: &InterferenceGraph,
    model: ExposureModel,
    required: &[(Cell, usize)],
) -> bool {
    let a = model.expose(g, z);
    required.iter().all(|&(cell, min_count)| {
        let count = a
            .pairs
            .iter()
            .filter(|&&(zz, ee)| zz == cell.z && ee == cell.e)
            .count();
        count >= min_count
    })
}

/// Runs the greedy random independent-set construction: repeatedly pick a
/// unit (uniformly with probability `mix_p`, otherwise uniformly among the
/// minimum-degree units of the remaining graph), adopt it as an ego and
/// delete it together with its neighbors. Returns `(egos, alters)`; every
/// unit lands in exactly one of the two, and no two egos are adjacent.
pub fn greedy_independent_set(
    g: &InterferenceGraph,
    rng: &mut impl Rng,
    mix_p: f64,
) -> (Vec<usize>, Vec<usize>) {
    let n = g.n();
    let mut alive = vec![true; n];
    let mut degree: Vec<isize> = g.degrees().iter().map(|&d| d as isize).collect();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut pos: Vec<usize> = (0..n).collect();
    let mut egos = Vec::new();

    fn remove(
        g: &InterferenceGraph,
        u: usize,
        alive: &mut [bool],
        degree: &mut [isize],
        remaining: &mut Vec<usize>,
        pos: &mut [usize],
    ) {
        alive[u] = false;
        let p = pos[u];
        remaining.swap_remove(p);
        if p < remaining.len() {
            pos[remaining[p]] = p;
        }
        for &v in g.neighbors(u) {
            if alive[v] {
                degree[v] -= 1;
            }
        }
    }

    while !remaining.is_empty() {
        let pick = if mix_p >= 1.0 || (mix_p > 0.0 && rng.gen_bool(mix_p)) {
            remaining[rng.gen_range(0..remaining.len())]
        } else {
            let min_d = remaining.iter().map(|&u| degree[u]).min().unwrap();
            let lows: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&u| degree[u] == min_d)
                .collect();
            lows[rng.gen_range(0..lows.len())]
        };
        egos.push(pick);
        let nbrs: Vec<usize> = g
            .neighbors(pick)
            .iter()
            .copied()
            .filter(|&v| alive[v])
            .collect();
        remove(g, pick, &mut alive, &mut degree, &mut remaining, &mut pos);
        for v in nbrs {
            remove(g, v, &mut alive, &mut degree, &mut remaining, &mut pos);
        }
    }
    egos.sort_unstable();
    let alters: Vec<usize> = (0..n)
        .filter(|&u| egos.binary_search(&u).is_err())
        .collect();
    (egos, alters)
}

/// Exact distribution of the greedy ego-set process, by recursion over the
/// remaining-unit bitmask. Only usable at small `n`.
fn enumerate_ego_sets(g: &InterferenceGraph, mix_p: f64) -> Result<Vec<(Vec<usize>, f64)>> {
    if g.n() > 24 {
        return Err(Error::SupportTooLarge {
            size: 1u128 << g.n().min(127),
            cap: 1 << 24,
        });
    }
    let full: u64 = (1u64 << g.n()) - 1;
    let mut memo: HashMap<u64, BTreeMap<u64, f64>> = HashMap::new();
    let dist = ego_dist(g, full, mix_p, &mut memo);
    Ok(dist
        .iter()
        .map(|(&mask, &p)| {
            let egos: Vec<usize> = (0..g.n()).filter(|&u| (mask >> u) & 1 == 1).collect();
            (egos, p)
        })
        .collect())
}

fn ego_dist(
    g: &InterferenceGraph,
    mask: u64,
    mix_p: f64,
    memo: &mut HashMap<u64, BTreeMap<u64, f64>>,
) -> BTreeMap<u64, f64> {
    if mask == 0 {
        return BTreeMap::from([(0u64, 1.0)]);
    }
    if let Some(d) = memo.get(&mask) {
        return d.clone();
    }
    let units: Vec<usize> = (0..g.n()).filter(|&u| (mask >> u) & 1 == 1).collect();
    let mut pick_prob: BTreeMap<usize, f64> = BTreeMap::new();
    if mix_p > 0.0 {
        let uniform_share = mix_p / units.len() as f64;
        for &u in &units {
            *pick_prob.entry(u).or_insert(0.0) += uniform_share;
        }
    }
    if mix_p < 1.0 {
        let deg = |u: usize| {
            g.neighbors(u)
                .iter()
                .filter(|&&v| (mask >> v) & 1 == 1)
                .count()
        };
        let min_d = units.iter().map(|&u| deg(u)).min().unwrap();
        let lows: Vec<usize> = units.iter().copied().filter(|&u| deg(u) == min_d).collect();
        let share = (1.0 - mix_p) / lows.len() as f64;
        for u in lows {
            *pick_prob.entry(u).or_insert(0.0) += share;
        }
    }
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    for (u, p_u) in pick_prob {
        let mut next = mask & !(1u64 << u);
        for &v in g.neighbors(u) {
            next &= !(1u64 << v);
        }
        for (sub_mask, sub_p) in ego_dist(g, next, mix_p, memo) {
            *out.entry(sub_mask | (1u64 << u)).or_insert(0.0) += p_u * sub_p;
        }
    }
    memo.insert(mask, out.clone());
    out
}

/// Grows `k` balanced clusters by breadth-first search from random seeds;
/// cluster sizes differ by at most one. Deterministic in `seed`.
pub fn greedy_partition(g: &InterferenceGraph, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!(
            "partition needs 1 ≤ K ≤ n, got K = {k}, n = {n}"
        )));
    }
    let mut rng = derive_rng(seed, &[0x9c]);
    let base = n / k;
    let extra = n % k;
    let mut assignment = vec![usize::MAX; n];
    for c in 0..k {
        let target = base + usize::from(c < extra);
        let mut queue = std::collections::VecDeque::new();
        let mut taken = 0;
        while taken < target {
            let u = match queue.pop_front() {
                Some(u) => u,
                None => {
                    // Jump to a random unassigned unit (fresh cluster seed,
                    // or a disconnected leftover).
                    let unassigned: Vec<usize> =
                        (0..n).filter(|&u| assignment[u] == usize::MAX).collect();
                    unassigned[rng.gen_range(0..unassigned.len())]
                }
            };
            if assignment[u] != usize::MAX {
                continue;
            }
            assignment[u] = c;
            taken += 1;
            for &v in g.neighbors(u) {
                if assignment[v] == usize::MAX {
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(assignment)
}

/// Loads a partition from lines of `unit cluster` pairs.
pub fn partition_from_text(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut part = vec![usize::MAX; n];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let unit: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing unit", ln + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        let cluster: usize = it
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: missing cluster", ln + 1)))?
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        if unit >= n {
            return Err(Error::Parse(format!(
                "line {}: unit {unit} ≥ n = {n}",
                ln + 1
            )));
        }
        part[unit] = cluster;
    }
    if part.contains(&usize::MAX) {
        return Err(Error::Parse("partition does not cover every unit".into()));
    }
    Ok(part)
}

/// Per-unit positivity verdicts for a set of required cells.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    /// `(unit, cell, propensity, ok)` for every unit × required cell.
    pub entries: Vec<(usize, Cell, f64, bool)>,
}

impl PositivityReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|&(_, _, _, ok)| ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &(usize, Cell, f64, bool)> {
        self.entries.iter().filter(|&&(_, _, _, ok)| !ok)
    }
}

/// Knobs for the propensity source used by [`positivity_check`].
#[derive(Debug, Clone)]
pub struct PositivityOpts {
    pub support_cap: u128,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for PositivityOpts {
    fn default() -> Self {
        Self {
            support_cap: DEFAULT_SUPPORT_CAP,
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

/// Flags units whose propensity for a required cell is 0 or 1, the
/// condition under which no unbiased estimator of that contrast exists.
/// This reports rather than errors; estimators enforce the hard failures.
pub fn positivity_check(
    design: &Design,
    g: &InterferenceGraph,
    model: ExposureModel,
    required: &[(u8, crate::exposure::LevelSpec)],
    opts: &PositivityOpts,
) -> Result<PositivityReport> {
    let pi = propensity::auto_propensity(
        design,
        g,
        model,
        &propensity::AutoOpts {
            support_cap: opts.support_cap,
            mc_samples: opts.mc_samples,
            seed: opts.seed,
        },
    )?;
    let mut entries = Vec::new();
    for i in 0..g.n() {
        for &(z, spec) in required {
            let cell = Cell::new(z, spec.resolve(model, g, i));
            let p = pi.pi(i, cell);
            let ok = p > 0.0 && p < 1.0;
            entries.push((i, cell, p, ok));
        }
    }
    Ok(PositivityReport { entries })
}
