//! Structural anonymization schemes for the directed graph.
//!
//! Six schemes: naive (relabel only), sparsification (remove p|E| edges),
//! switching (degree-preserving edge swaps), perturbation (remove p|E|
//! then add the same number of random false edges), and k-degree
//! anonymity by edge addition or by simultaneous addition/removal.
//! Every scheme ends with pseudonymization: user ids are replaced by
//! fresh random identifiers and the mapping is kept as ground truth.

mod kdeg;
mod release;

pub use kdeg::{kdeg_add, kdeg_add_del, verify_k_anonymity, KAnonReport, KdegOutcome};
pub use release::{build_release, Release, TextMethod};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{GroundTruth, SocialNetwork, UserId};
use crate::seed::rng_from_seed;

pub type Edge = (UserId, UserId);
pub type EdgeSet = BTreeSet<Edge>;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructMethod {
    Naive,
    Sparsification,
    KdegAdd,
    KdegAddDel,
    Switching,
    Perturbation,
}

impl StructMethod {
    pub const ALL: [StructMethod; 6] = [
        StructMethod::Naive,
        StructMethod::Sparsification,
        StructMethod::KdegAdd,
        StructMethod::KdegAddDel,
        StructMethod::Switching,
        StructMethod::Perturbation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StructMethod::Naive => "naive",
            StructMethod::Sparsification => "sparsification",
            StructMethod::KdegAdd => "kdeg_add",
            StructMethod::KdegAddDel => "kdeg_add_del",
            StructMethod::Switching => "switching",
            StructMethod::Perturbation => "perturbation",
        }
    }
}

impl fmt::Display for StructMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StructMethod::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown structural method '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct StructAnonConfig {
    pub method: StructMethod,
    /// Anonymization coefficient for sparsification/switching/perturbation.
    pub p: f64,
    /// k-anonymity parameter for the kdeg methods.
    pub k: usize,
    pub rng_seed: u64,
}

impl StructAnonConfig {
    pub fn validate(&self) -> Result<()> {
        match self.method {
            StructMethod::Sparsification | StructMethod::Switching | StructMethod::Perturbation => {
                if !(0.0..=1.0).contains(&self.p) {
                    return Err(Error::Config(format!(
                        "p must be in [0, 1] for {}, got {}",
                        self.method, self.p
                    )));
                }
            }
            StructMethod::KdegAdd | StructMethod::KdegAddDel => {
                if self.k < 1 {
                    return Err(Error::Config("k must be >= 1".into()));
                }
            }
            StructMethod::Naive => {}
        }
        Ok(())
    }
}

/// Result of a structural anonymization run, before the textual pipeline.
#[derive(Clone, Debug)]
pub struct StructuralRelease {
    /// Pseudonyms in ascending order.
    pub users: Vec<UserId>,
    /// Edges under pseudonyms.
    pub edges: EdgeSet,
    pub truth: GroundTruth,
    /// Number of edges added plus removed relative to the input.
    pub edits: usize,
    /// Non-fatal shortfalls, e.g. switching running out of legal swaps.
    pub warnings: Vec<String>,
}

/// Runs the configured scheme and pseudonymizes the result.
pub fn anonymize_structure(
    network: &SocialNetwork,
    cfg: &StructAnonConfig,
) -> Result<StructuralRelease> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.rng_seed);
    let original = network.edges();
    let mut warnings = Vec::new();
    let edges = match cfg.method {
        StructMethod::Naive => naive_anonymize(network),
        StructMethod::Sparsification => sparsify(network, cfg.p, &mut rng),
        StructMethod::Switching => {
            let outcome = switch(network, cfg.p, &mut rng);
            if outcome.performed < outcome.requested {
                warnings.push(format!(
                    "switching performed {}/{} swaps before exhausting attempts",
                    outcome.performed, outcome.requested
                ));
            }
            outcome.edges
        }
        StructMethod::Perturbation => perturb(network, cfg.p, &mut rng)?,
        StructMethod::KdegAdd => kdeg_add(network, cfg.k)?,
        StructMethod::KdegAddDel => kdeg_add_del(network, cfg.k)?.edges,
    };
    let edits = original.symmetric_difference(&edges).count();
    let (users, edges, truth) = pseudonymize(network, &edges, &mut rng);
    Ok(StructuralRelease {
        users,
        edges,
        truth,
        edits,
        warnings,
    })
}

/// Keeps the graph structure untouched; only identifiers change (in the
/// pseudonymization step shared by all schemes).
pub fn naive_anonymize(network: &SocialNetwork) -> EdgeSet {
    network.edges().clone()
}

/// Removes exactly floor(p * |E|) distinct edges, chosen uniformly.
pub fn sparsify(network: &SocialNetwork, p: f64, rng: &mut impl Rng) -> EdgeSet {
    let edges: Vec<Edge> = network.edges().iter().copied().collect();
    let remove = (p * edges.len() as f64).floor() as usize;
    let mut doomed = vec![false; edges.len()];
    for i in sample(rng, edges.len(), remove.min(edges.len())) {
        doomed[i] = true;
    }
    edges
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| !doomed[i])
        .map(|(_, e)| e)
        .collect()
}

pub struct SwitchOutcome {
    pub edges: EdgeSet,
    /// Swaps actually performed.
    pub performed: usize,
    /// Swaps requested: floor(p * |E| / 2).
    pub requested: usize,
}

/// Performs floor(p * |E| / 2) edge swaps: pick edges (i1, j1), (i2, j2)
/// and replace them with (i1, j2), (i2, j1) when neither replacement
/// exists and no self-loop arises. In- and out-degrees are preserved
/// exactly. Rejection sampling is bounded by 100 * |E| attempts; falling
/// short is reported, not fatal.
pub fn switch(network: &SocialNetwork, p: f64, rng: &mut impl Rng) -> SwitchOutcome {
    let mut edges: Vec<Edge> = network.edges().iter().copied().collect();
    let mut present: BTreeSet<Edge> = network.edges().clone();
    let requested = (p * edges.len() as f64 / 2.0).floor() as usize;
    let budget = 100usize.saturating_mul(edges.len());

    let mut performed = 0;
    let mut attempts = 0;
    while performed < requested && attempts < budget {
        attempts += 1;
        let a = rng.random_range(0..edges.len());
        let b = rng.random_range(0..edges.len());
        if a == b {
            continue;
        }
        let (i1, j1) = edges[a];
        let (i2, j2) = edges[b];
        // New edges must not be self-loops and must not already exist;
        // the membership test also rejects degenerate overlaps like
        // i1 == i2 or j1 == j2.
        if i1 == j2 || i2 == j1 {
            continue;
        }
        if present.contains(&(i1, j2)) || present.contains(&(i2, j1)) {
            continue;
        }
        present.remove(&(i1, j1));
        present.remove(&(i2, j2));
        present.insert((i1, j2));
        present.insert((i2, j1));
        edges[a] = (i1, j2);
        edges[b] = (i2, j1);
        performed += 1;
    }

    SwitchOutcome {
        edges: present,
        performed,
        requested,
    }
}

/// Removes floor(p * |E|) edges uniformly, then adds the same number of
/// false edges drawn uniformly from the non-edges of the original graph,
/// keeping |E| exact. Errors when the graph has too few non-edges.
pub fn perturb(network: &SocialNetwork, p: f64, rng: &mut impl Rng) -> Result<EdgeSet> {
    let users: Vec<UserId> = network.users().collect();
    let n = users.len();
    let edges: Vec<Edge> = network.edges().iter().copied().collect();
    let remove = (p * edges.len() as f64).floor() as usize;

    let possible = n.saturating_mul(n.saturating_sub(1));
    if possible - edges.len() < remove {
        return Err(Error::Invalid(format!(
            "perturbation needs {remove} non-edges but only {} exist",
            possible - edges.len()
        )));
    }

    let mut result: EdgeSet = edges.iter().copied().collect();
    for i in sample(rng, edges.len(), remove.min(edges.len())) {
        result.remove(&edges[i]);
    }

    let original: BTreeSet<Edge> = edges.into_iter().collect();
    let mut added = 0;
    // Rejection sampling is fast while the graph is sparse; fall back to
    // exact enumeration if the acceptance rate collapses.
    let mut attempts = 0;
    let budget = 100 * remove + 1000;
    while added < remove && attempts < budget {
        attempts += 1;
        let a = users[rng.random_range(0..n)];
        let b = users[rng.random_range(0..n)];
        if a == b || original.contains(&(a, b)) || result.contains(&(a, b)) {
            continue;
        }
        result.insert((a, b));
        added += 1;
    }
    if added < remove {
        let mut free: Vec<Edge> = Vec::new();
        for &a in &users {
            for &b in &users {
                if a != b && !original.contains(&(a, b)) && !result.contains(&(a, b)) {
                    free.push((a, b));
                }
            }
        }
        for i in sample(rng, free.len(), remove - added) {
            result.insert(free[i]);
        }
    }
    Ok(result)
}

/// Replaces user ids with fresh random pseudonyms and rewrites the edge
/// set; records the mapping as ground truth.
pub fn pseudonymize(
    network: &SocialNetwork,
    edges: &EdgeSet,
    rng: &mut impl Rng,
) -> (Vec<UserId>, EdgeSet, GroundTruth) {
    let mut taken = BTreeSet::new();
    let mut mapping: BTreeMap<UserId, UserId> = BTreeMap::new();
    let mut forward: BTreeMap<UserId, UserId> = BTreeMap::new();
    for user in network.users() {
        let pseudonym = loop {
            let candidate = UserId(rng.random_range(0..1u64 << 48));
            if taken.insert(candidate) {
                break candidate;
            }
        };
        mapping.insert(pseudonym, user);
        forward.insert(user, pseudonym);
    }
    let users: Vec<UserId> = mapping.keys().copied().collect();
    let edges = edges
        .iter()
        .map(|&(a, b)| (forward[&a], forward[&b]))
        .collect();
    let truth = GroundTruth::new(mapping).expect("pseudonyms are unique by construction");
    (users, edges, truth)
}
