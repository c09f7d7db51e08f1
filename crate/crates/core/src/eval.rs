//! Experiment harness: run the structural x textual anonymization matrix,
//! attack every copy with the configured metrics, and report success
//! rates in the four-case layout.
//!
//! Cells run sequentially (each holds a dense matrix for the DP copies);
//! the per-user attack inside a cell is parallel. All seeds derive from
//! the plan's base seed, so a plan is reproducible byte-for-byte.

use std::collections::BTreeMap;

use rand::seq::index::sample as index_sample;
use serde::Deserialize;

use crate::anonymize::{build_release, StructAnonConfig, StructMethod, TextMethod};
use crate::attack::{AttackConfig, Attacker, CandidateScore, Metric};
use crate::dp::DPConfig;
use crate::error::{Error, Result};
use crate::model::{GroundTruth, SocialNetwork, UserId};
use crate::seed::{derive_seed_labeled, rng_from_seed};
use crate::target::{BudgetTotals, MatchMode, TargetConfig, TargetNetwork};

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub structural: Vec<StructMethod>,
    pub textual: Vec<TextMethod>,
    pub metrics: Vec<Metric>,
    pub repetitions: usize,
    pub base_seed: u64,
    /// Edge fraction for sparsification/switching/perturbation.
    pub p: f64,
    /// k for the k-degree anonymity schemes.
    pub k_anon: usize,
    pub epsilon: f64,
    pub sensitivity_override: Option<f64>,
    /// Seed-set size for the seed-based baseline metrics.
    pub nu: usize,
    pub query_limit: usize,
    pub query_mode: MatchMode,
    pub attack: AttackConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            structural: StructMethod::ALL.to_vec(),
            textual: TextMethod::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            repetitions: 5,
            base_seed: 42,
            p: 0.1,
            k_anon: 10,
            epsilon: 0.01,
            sensitivity_override: None,
            nu: 20,
            query_limit: 100,
            query_mode: MatchMode::All,
            attack: AttackConfig::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.structural.is_empty() || self.textual.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config(
                "plan needs at least one structural method, textual method and metric".into(),
            ));
        }
        self.attack.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| Error::Config(format!("plan file: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Case number from the anonymization matrix: 1 = neither aspect
/// anonymized, 2 = text only, 3 = structure only, 4 = both. Naive
/// structural counts as un-anonymized structure; the five non-naive
/// schemes count as anonymized.
pub fn case_label(structural: StructMethod, textual: TextMethod) -> u8 {
    match (structural == StructMethod::Naive, textual == TextMethod::Naive) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    }
}

/// Fraction of users whose true identity appears in their top-h list.
pub fn success_rate(
    mapping: &BTreeMap<UserId, Vec<CandidateScore>>,
    truth: &GroundTruth,
    h: usize,
) -> f64 {
    if mapping.is_empty() {
        return 0.0;
    }
    let hits = mapping
        .iter()
        .filter(|(pseudonym, ranked)| {
            truth.true_id(**pseudonym).is_some_and(|real| {
                ranked
                    .iter()
                    .take(h)
                    .any(|score| score.candidate == real)
            })
        })
        .count();
    hits as f64 / mapping.len() as f64
}

/// One (structural, textual, metric) cell aggregated over repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub structural: StructMethod,
    pub textual: TextMethod,
    pub metric: Metric,
    pub mean_x: f64,
    pub std_x: f64,
    pub case: u8,
    pub n_users: usize,
    pub seeds: Vec<u64>,
    pub rates: Vec<f64>,
    pub budget: BudgetTotals,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuccessReport {
    pub cells: Vec<CellResult>,
}

impl SuccessReport {
    pub fn cell(
        &self,
        structural: StructMethod,
        textual: TextMethod,
        metric: Metric,
    ) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.structural == structural && c.textual == textual && c.metric == metric)
    }

    /// Mean success over all cells of one case for one metric.
    pub fn case_mean(&self, case: u8, metric: Metric) -> Option<f64> {
        let rates: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.case == case && c.metric == metric)
            .map(|c| c.mean_x)
            .collect();
        if rates.is_empty() {
            None
        } else {
            Some(rates.iter().sum::<f64>() / rates.len() as f64)
        }
    }
}

/// Samples nu seed pairs (pseudonym -> true identity) from ground truth.
pub fn sample_seed_map(truth: &GroundTruth, nu: usize, seed: u64) -> BTreeMap<UserId, UserId> {
    let pairs: Vec<(UserId, UserId)> = truth.iter().collect();
    let take = nu.min(pairs.len());
    let mut rng = rng_from_seed(seed);
    index_sample(&mut rng, pairs.len(), take)
        .into_iter()
        .map(|i| pairs[i])
        .collect()
}

struct CellKey {
    structural: StructMethod,
    textual: TextMethod,
    metric: Metric,
}

/// Runs the full plan against a network. Per-cell failures are recorded
/// in the report and do not abort the run.
pub fn run_matrix(plan: &ExperimentPlan, network: &SocialNetwork) -> Result<SuccessReport> {
    plan.validate()?;
    let target = TargetNetwork::build(
        network,
        TargetConfig {
            query_limit: plan.query_limit,
            query_mode: plan.query_mode,
            caps: Default::default(),
        },
    );

    let mut order: Vec<CellKey> = Vec::new();
    let mut rates: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut budgets: BTreeMap<usize, BudgetTotals> = BTreeMap::new();
    let mut failures: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut seeds_used: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for &structural in &plan.structural {
        for &textual in &plan.textual {
            for &metric in &plan.metrics {
                order.push(CellKey {
                    structural,
                    textual,
                    metric,
                });
            }
        }
    }
    let cell_index = |s: StructMethod, t: TextMethod, m: Metric| -> usize {
        order
            .iter()
            .position(|k| k.structural == s && k.textual == t && k.metric == m)
            .expect("cell enumerated above")
    };

    for (si, &structural) in plan.structural.iter().enumerate() {
        for (ti, &textual) in plan.textual.iter().enumerate() {
            for rep in 0..plan.repetitions {
                let stream = ((si as u64) << 32) | ((ti as u64) << 16) | rep as u64;
                let cell_seed = derive_seed_labeled(plan.base_seed, "cell", stream);
                for &metric in &plan.metrics {
                    seeds_used
                        .entry(cell_index(structural, textual, metric))
                        .or_default()
                        .push(cell_seed);
                }

                let release = build_release(
                    network,
                    &StructAnonConfig {
                        method: structural,
                        p: plan.p,
                        k: plan.k_anon,
                        rng_seed: cell_seed,
                    },
                    textual,
                    &DPConfig {
                        epsilon: plan.epsilon,
                        rng_seed: derive_seed_labeled(cell_seed, "dp", 0),
                        sensitivity_override: plan.sensitivity_override,
                    },
                );
                let release = match release {
                    Ok(r) => r,
                    Err(e) => {
                        for &metric in &plan.metrics {
                            failures
                                .entry(cell_index(structural, textual, metric))
                                .or_default()
                                .push(format!("rep {rep}: anonymization failed: {e}"));
                        }
                        continue;
                    }
                };

                let attack_seed = derive_seed_labeled(cell_seed, "attack", 0);
                let seed_map =
                    sample_seed_map(&release.truth, plan.nu, derive_seed_labeled(cell_seed, "seeds", 0));
                for &metric in &plan.metrics {
                    let idx = cell_index(structural, textual, metric);
                    let session = target.session();
                    let cfg = AttackConfig {
                        rng_seed: attack_seed,
                        ..plan.attack.clone()
                    };
                    let needs_seeds =
                        matches!(metric, Metric::Narayanan | Metric::Ada);
                    let attacker = Attacker::new(
                        &release.dataset,
                        &session,
                        &cfg,
                        metric,
                        if needs_seeds {
                            seed_map.clone()
                        } else {
                            BTreeMap::new()
                        },
                    );
                    let outcome = attacker.and_then(|a| a.run_all());
                    match outcome {
                        Ok(mapping) => {
                            let rate = success_rate(&mapping, &release.truth, plan.attack.h);
                            rates.entry(idx).or_default().push(rate);
                            *budgets.entry(idx).or_default() += session.totals();
                        }
                        Err(e) => {
                            failures
                                .entry(idx)
                                .or_default()
                                .push(format!("rep {rep}: attack failed: {e}"));
                        }
                    }
                }
            }
        }
    }

    let cells = order
        .into_iter()
        .enumerate()
        .map(|(idx, key)| {
            let cell_rates = rates.remove(&idx).unwrap_or_default();
            let mean = if cell_rates.is_empty() {
                0.0
            } else {
                cell_rates.iter().sum::<f64>() / cell_rates.len() as f64
            };
            let std = if cell_rates.len() > 1 {
                let var = cell_rates
                    .iter()
                    .map(|r| (r - mean) * (r - mean))
                    .sum::<f64>()
                    / (cell_rates.len() - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            CellResult {
                structural: key.structural,
                textual: key.textual,
                metric: key.metric,
                mean_x: mean,
                std_x: std,
                case: case_label(key.structural, key.textual),
                n_users: network.n_users(),
                seeds: seeds_used.remove(&idx).unwrap_or_default(),
                rates: cell_rates,
                budget: budgets.remove(&idx).unwrap_or_default(),
                failures: failures.remove(&idx).unwrap_or_default(),
            }
        })
        .collect();
    Ok(SuccessReport { cells })
}

/// CSV rendering: one row per cell with the columns
/// structural,textual,metric,mean_X,std_X,case,n_users,seeds.
pub fn render_csv(report: &SuccessReport) -> String {
    let mut out = String::from("structural,textual,metric,mean_X,std_X,case,n_users,seeds\n");
    for c in &report.cells {
        let seeds = c
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join("/");
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{},{},{}\n",
            c.structural, c.textual, c.metric, c.mean_x, c.std_x, c.case, c.n_users, seeds
        ));
    }
    out
}

/// Text table grouped by structural scheme, metric columns split by
/// textual scheme, case numbers in parentheses; followed by query-budget
/// totals and any per-cell failures.
pub fn render_text(report: &SuccessReport) -> String {
    let mut structurals: Vec<StructMethod> = Vec::new();
    let mut columns: Vec<(Metric, TextMethod)> = Vec::new();
    for c in &report.cells {
        if !structurals.contains(&c.structural) {
            structurals.push(c.structural);
        }
        if !columns.iter().any(|&(m, t)| m == c.metric && t == c.textual) {
            columns.push((c.metric, c.textual));
        }
    }
    columns.sort_by_key(|&(m, t)| {
        (
            Metric::ALL.iter().position(|&x| x == m).unwrap_or(9),
            TextMethod::ALL.iter().position(|&x| x == t).unwrap_or(9),
        )
    });

    let mut out = String::from("De-anonymization success rates (mean +/- std over repetitions)\n");
    out.push_str(&format!("{:<16}", "structural"));
    for &(m, t) in &columns {
        out.push_str(&format!("{:<26}", format!("{m}/{t}")));
    }
    out.push('\n');
    for &s in &structurals {
        out.push_str(&format!("{:<16}", s.to_string()));
        for &(m, t) in &columns {
            match report.cell(s, t, m) {
                Some(c) => out.push_str(&format!(
                    "{:<26}",
                    format!("{:.4} +/- {:.4} ({})", c.mean_x, c.std_x, c.case)
                )),
                None => out.push_str(&format!("{:<26}", "-")),
            }
        }
        out.push('\n');
    }

    out.push_str("\nQuery budget totals per cell (search/posts/neighbors)\n");
    for c in &report.cells {
        out.push_str(&format!(
            "{:<16}{:<8}{:<12}{}/{}/{}\n",
            c.structural.to_string(),
            c.textual.to_string(),
            c.metric.to_string(),
            c.budget.search_calls,
            c.budget.post_calls,
            c.budget.neighbor_calls
        ));
    }
    let failing: Vec<&CellResult> = report.cells.iter().filter(|c| !c.failures.is_empty()).collect();
    if !failing.is_empty() {
        out.push_str("\nFailures\n");
        for c in failing {
            for f in &c.failures {
                out.push_str(&format!(
                    "{}/{}/{}: {}\n",
                    c.structural, c.textual, c.metric, f
                ));
            }
        }
    }
    out
}
