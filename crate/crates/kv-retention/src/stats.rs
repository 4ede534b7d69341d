//! Paired deltas, cluster bootstrap, Bonferroni family test, probe-grid
//! selection, and the pre-committed branch decision.
//!
//! The unit of analysis is the problem: per-problem correctness is the
//! mean over seeds, arms are differenced per problem, and the bootstrap
//! resamples problems (clusters) with replacement. All randomness comes
//! from ChaCha8 seeded by the caller, with one counter-mode stream per
//! resample, so results are identical across runs, platforms, and any
//! parallel execution order.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (problem, model, budget, method, lambda, seed) evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub problem_id: String,
    pub model: String,
    pub budget: u64,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub seed: i64,
    pub correct: bool,
    pub extracted: bool,
    pub mean_cache: f64,
    pub peak_cache: u64,
    /// Unknown input fields, preserved verbatim.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Per-(model, budget) paired result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub budget: u64,
    pub delta_pp: f64,
    pub ci95: [f64; 2],
    pub p: f64,
    #[serde(default)]
    pub bonferroni_pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_problems: Option<usize>,
}

impl CellResult {
    pub fn label(&self) -> String {
        format!("{} b={}", self.model, self.budget)
    }
}

/// One probe-grid entry: the dev-split delta for a (model, budget, lambda)
/// cell and the number of problems present at that cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeCell {
    pub model: String,
    pub budget: u64,
    pub lambda: f64,
    pub delta_pp: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeTable {
    pub cells: Vec<ProbeCell>,
}

/// Mean delta for one lambda arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaMean {
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_delta_pp: Option<f64>,
    pub cells_used: usize,
}

/// Output of the probe-grid selection rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSelection {
    pub winner_lambda: f64,
    /// Unweighted mean over every cell present in each arm.
    pub lambda_means: Vec<LambdaMean>,
    /// Robustness recomputation: each arm's mean over only its complete
    /// cells, where a cell is complete when its n equals the largest n
    /// observed for that (model, budget) across arms.
    pub excluded_means: Vec<LambdaMean>,
    /// Lambdas ordered by the excluded-means recomputation, best first.
    pub excluded_ranking: Vec<f64>,
    pub warnings: Vec<String>,
    /// True when no arm has a strictly positive mean.
    pub no_positive_mean: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    A,
    B,
    C,
}

/// Which model qualifies and which is guarded, plus significance levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchConfig {
    /// Model whose cells can qualify the primary claim.
    pub qualifying_model: String,
    /// Model held to the positive-mean and no-significant-negative guards.
    pub guard_model: String,
    pub per_cell_alpha: f64,
    /// Alpha for the negative guard; 0.05 by default (stricter than the
    /// Bonferroni threshold).
    pub guard_alpha: f64,
}

impl BranchConfig {
    pub fn new(qualifying_model: &str, guard_model: &str) -> Self {
        Self {
            qualifying_model: qualifying_model.to_string(),
            guard_model: guard_model.to_string(),
            per_cell_alpha: 0.05,
            guard_alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchVerdict {
    pub branch: Branch,
    /// Qualifying-model cells with a positive delta at per-cell p < alpha.
    pub qualifying_cells: Vec<String>,
    pub guard_mean_delta_pp: f64,
    /// Significantly negative guard-model cells (the rule as registered).
    pub negative_guard_violations: Vec<String>,
    /// Branch under the stricter guard over cells of both models.
    pub symmetric_guard_branch: Branch,
    pub symmetric_guard_violations: Vec<String>,
}

/// Per-problem paired delta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedDelta {
    pub problem_id: String,
    pub delta: f64,
}

/// Point estimate, percentile CI, and two-sided bootstrap p, all over
/// per-problem deltas in [-1, 1]; point and CI reported in percentage
/// points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub point_pp: f64,
    pub ci95_pp: [f64; 2],
    pub p_two_sided: f64,
}

fn seed_means<'a>(records: &[&'a ProblemOutcome]) -> BTreeMap<&'a str, f64> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.problem_id.as_str()).or_insert((0.0, 0));
        e.0 += if r.correct { 1.0 } else { 0.0 };
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

/// Per-problem deltas between two arms of the same cell: mean-over-seeds
/// correctness in arm a minus arm b, one delta per problem.
pub fn paired_deltas(arm_a: &[ProblemOutcome], arm_b: &[ProblemOutcome]) -> Result<Vec<PairedDelta>> {
    let a_refs: Vec<&ProblemOutcome> = arm_a.iter().collect();
    let b_refs: Vec<&ProblemOutcome> = arm_b.iter().collect();
    let ma = seed_means(&a_refs);
    let mb = seed_means(&b_refs);
    let only: Vec<String> = ma
        .keys()
        .filter(|k| !mb.contains_key(*k))
        .chain(mb.keys().filter(|k| !ma.contains_key(*k)))
        .map(|s| s.to_string())
        .collect();
    if !only.is_empty() {
        return Err(Error::UnpairedProblems(only));
    }
    Ok(ma
        .iter()
        .map(|(id, &acc_a)| PairedDelta {
            problem_id: id.to_string(),
            delta: acc_a - mb[id],
        })
        .collect())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Cluster bootstrap over per-problem deltas.
///
/// Resamples the problem list with replacement `n_boot` times; each
/// resample draws from its own ChaCha8 stream `(rng_seed, resample index)`.
/// The CI is the 2.5/97.5 percentile of resampled means, and p is the
/// doubled smaller tail with add-one smoothing:
/// `2 * (min(count) + 1) / (n_boot + 1)`, clipped to [0, 1].
pub fn cluster_bootstrap(deltas: &[f64], n_boot: usize, rng_seed: u64) -> Result<BootstrapSummary> {
    if deltas.is_empty() {
        return Err(Error::EmptyInput("deltas".into()));
    }
    if n_boot == 0 {
        return Err(Error::InvalidParam("n_boot must be >= 1".into()));
    }
    let n = deltas.len();
    let point = deltas.iter().sum::<f64>() / n as f64;

    let mut means = Vec::with_capacity(n_boot);
    let mut le = 0usize;
    let mut ge = 0usize;
    for b in 0..n_boot {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(b as u64);
        let mut sum = 0.0f64;
        for _ in 0..n {
            sum += deltas[rng.gen_range(0..n)];
        }
        let mean = sum / n as f64;
        if mean <= 0.0 {
            le += 1;
        }
        if mean >= 0.0 {
            ge += 1;
        }
        means.push(mean);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci_lo = percentile(&means, 0.025) * 100.0;
    let ci_hi = percentile(&means, 0.975) * 100.0;
    let tail = le.min(ge) as f64;
    let p = (2.0 * (tail + 1.0) / (n_boot as f64 + 1.0)).min(1.0);
    Ok(BootstrapSummary {
        point_pp: point * 100.0,
        ci95_pp: [ci_lo, ci_hi],
        p_two_sided: p,
    })
}

/// Mark each cell's Bonferroni verdict: pass iff `p < family_alpha / |cells|`
/// and the delta is positive.
pub fn bonferroni_evaluate(cells: &mut [CellResult], family_alpha: f64) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::EmptyInput("cells".into()));
    }
    let threshold = family_alpha / cells.len() as f64;
    for cell in cells.iter_mut() {
        cell.bonferroni_pass = cell.p < threshold && cell.delta_pp > 0.0;
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pick the winning lambda from a probe table: maximize the unweighted
/// mean delta across cells, ties within `tie_tol_pp` broken toward the
/// smaller lambda. Also reports the complete-cells-only recomputation.
pub fn phase1_select(table: &ProbeTable, tie_tol_pp: f64) -> Result<ProbeSelection> {
    if table.cells.is_empty() {
        return Err(Error::EmptyInput("probe table".into()));
    }
    let mut lambdas: Vec<f64> = table.cells.iter().map(|c| c.lambda).collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambdas.dedup();

    let cell_keys: BTreeSet<(String, u64)> = table
        .cells
        .iter()
        .map(|c| (c.model.clone(), c.budget))
        .collect();

    let mut warnings = Vec::new();
    let mut lambda_means = Vec::new();
    for &l in &lambdas {
        let present: Vec<&ProbeCell> = table.cells.iter().filter(|c| c.lambda == l).collect();
        if present.len() < cell_keys.len() {
            warnings.push(format!(
                "lambda {l}: only {} of {} cells present; mean computed over present cells",
                present.len(),
                cell_keys.len()
            ));
        }
        let deltas: Vec<f64> = present.iter().map(|c| c.delta_pp).collect();
        lambda_means.push(LambdaMean {
            lambda: l,
            mean_delta_pp: Some(mean(&deltas)),
            cells_used: deltas.len(),
        });
    }

    let best_mean = lambda_means
        .iter()
        .filter_map(|m| m.mean_delta_pp)
        .fold(f64::NEG_INFINITY, f64::max);
    // lambdas are ascending, so the first arm inside the tie tolerance is
    // the smallest qualifying lambda.
    let winner_lambda = lambda_means
        .iter()
        .find(|m| m.mean_delta_pp.unwrap() >= best_mean - tie_tol_pp)
        .map(|m| m.lambda)
        .unwrap();

    // Complete-cells recomputation: a (model, budget) observation is short
    // in an arm when its n is below the largest n seen for that cell.
    let mut full_n: BTreeMap<(String, u64), usize> = BTreeMap::new();
    for c in &table.cells {
        let e = full_n.entry((c.model.clone(), c.budget)).or_insert(0);
        *e = (*e).max(c.n);
    }
    let mut excluded_means = Vec::new();
    for &l in &lambdas {
        let deltas: Vec<f64> = table
            .cells
            .iter()
            .filter(|c| c.lambda == l && c.n == full_n[&(c.model.clone(), c.budget)])
            .map(|c| c.delta_pp)
            .collect();
        if deltas.is_empty() {
            warnings.push(format!("lambda {l}: no complete cells; excluded mean unavailable"));
        }
        excluded_means.push(LambdaMean {
            lambda: l,
            mean_delta_pp: if deltas.is_empty() { None } else { Some(mean(&deltas)) },
            cells_used: deltas.len(),
        });
    }
    let mut ranking: Vec<&LambdaMean> = excluded_means
        .iter()
        .filter(|m| m.mean_delta_pp.is_some())
        .collect();
    ranking.sort_by(|a, b| {
        b.mean_delta_pp
            .unwrap()
            .partial_cmp(&a.mean_delta_pp.unwrap())
            .unwrap()
            .then(a.lambda.partial_cmp(&b.lambda).unwrap())
    });
    let excluded_ranking = ranking.iter().map(|m| m.lambda).collect();

    let no_positive_mean = best_mean <= 0.0;
    if no_positive_mean {
        warnings.push("no lambda arm has a positive mean delta".into());
    }

    Ok(ProbeSelection {
        winner_lambda,
        lambda_means,
        excluded_means,
        excluded_ranking,
        warnings,
        no_positive_mean,
    })
}

/// Apply the pre-committed branch rule to the registered four-cell family.
///
/// Branch A needs a qualifying-model cell with a positive delta at
/// per-cell significance, a positive mean delta across guard-model cells,
/// and no significantly negative guard-model cell. Branch B has the
/// qualifying cell but fails a guard condition; Branch C has no
/// qualifying cell. The symmetric variant applies the negative guard to
/// cells of both models.
pub fn branch_decide(cells: &[CellResult], cfg: &BranchConfig) -> Result<BranchVerdict> {
    let qual: Vec<&CellResult> = cells.iter().filter(|c| c.model == cfg.qualifying_model).collect();
    let guard: Vec<&CellResult> = cells.iter().filter(|c| c.model == cfg.guard_model).collect();
    if qual.len() != 2 || guard.len() != 2 || cells.len() != 4 {
        return Err(Error::InvalidParam(format!(
            "registered family requires exactly 2 cells for '{}' and 2 for '{}', got {} and {} of {}",
            cfg.qualifying_model,
            cfg.guard_model,
            qual.len(),
            guard.len(),
            cells.len()
        )));
    }
    for arm in [&qual, &guard] {
        if arm[0].budget == arm[1].budget {
            return Err(Error::InvalidParam(format!(
                "duplicate budget {} within model '{}'",
                arm[0].budget, arm[0].model
            )));
        }
    }

    let qualifying_cells: Vec<String> = qual
        .iter()
        .filter(|c| c.delta_pp > 0.0 && c.p < cfg.per_cell_alpha)
        .map(|c| c.label())
        .collect();
    let guard_mean_delta_pp = mean(&guard.iter().map(|c| c.delta_pp).collect::<Vec<_>>());
    let is_violation = |c: &CellResult| c.delta_pp < 0.0 && c.p < cfg.guard_alpha;
    let negative_guard_violations: Vec<String> =
        guard.iter().filter(|c| is_violation(c)).map(|c| c.label()).collect();
    let symmetric_guard_violations: Vec<String> =
        cells.iter().filter(|c| is_violation(c)).map(|c| c.label()).collect();

    let decide = |violations: &[String]| {
        if qualifying_cells.is_empty() {
            Branch::C
        } else if guard_mean_delta_pp > 0.0 && violations.is_empty() {
            Branch::A
        } else {
            Branch::B
        }
    };
    Ok(BranchVerdict {
        branch: decide(&negative_guard_violations),
        symmetric_guard_branch: decide(&symmetric_guard_violations),
        qualifying_cells,
        guard_mean_delta_pp,
        negative_guard_violations,
        symmetric_guard_violations,
    })
}
