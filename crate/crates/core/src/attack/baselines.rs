//! Seed-based baseline similarity metrics.
//!
//! Both baselines run inside the ATHD three-step pipeline with only the
//! ranking metric swapped. They start from a small seed set of
//! pre-mapped users and, being seed-based techniques, are granted direct
//! (background-knowledge) access to the target graph's adjacency.
//!
//! The first counts seed-mapped common neighbors, normalized by
//! sqrt(deg * deg) to compare across candidate degrees. The second mixes
//! degree-centrality closeness, cosine similarity of seed-proximity
//! vectors (BFS distances capped at 4 hops) and the seed-mapped neighbor
//! overlap in equal parts.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Arc, RwLock};

use crate::error::Result;
use crate::model::{AnonymizedDataset, UserId};
use crate::target::TargetNetwork;
use crate::vector::cosine_dense;

/// BFS depth cap for seed-proximity vectors.
const MAX_HOPS: usize = 4;

/// Shared state for the baseline metrics: the seed mapping in both id
/// spaces plus proximity-vector caches for the two graphs.
pub struct SeedContext {
    /// Seed pairs (release user row, true identity), ordered by pseudonym.
    seeds: Vec<(usize, UserId)>,
    /// Release user row -> mapped true identity, for neighbor lookups.
    mapped_rows: HashMap<usize, UserId>,
    /// Undirected release adjacency by user row.
    release_adj: Vec<Vec<usize>>,
    release_prox: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
    target_prox: RwLock<HashMap<UserId, Arc<Vec<f64>>>>,
}

impl SeedContext {
    pub fn new(
        dataset: &AnonymizedDataset,
        _target: &TargetNetwork,
        followers: &[Vec<usize>],
        followees: &[Vec<usize>],
        seed_map: BTreeMap<UserId, UserId>,
    ) -> Self {
        let row_of: BTreeMap<UserId, usize> = dataset
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| (*u, i))
            .collect();
        let mut seeds = Vec::new();
        let mut mapped_rows = HashMap::new();
        for (pseudonym, real) in seed_map {
            if let Some(&row) = row_of.get(&pseudonym) {
                seeds.push((row, real));
                mapped_rows.insert(row, real);
            }
        }
        let release_adj: Vec<Vec<usize>> = (0..dataset.users.len())
            .map(|r| {
                let mut adj = followers[r].clone();
                adj.extend(&followees[r]);
                adj.sort_unstable();
                adj.dedup();
                adj
            })
            .collect();
        Self {
            seeds,
            mapped_rows,
            release_adj,
            release_prox: RwLock::new(HashMap::new()),
            target_prox: RwLock::new(HashMap::new()),
        }
    }

    pub fn n_seeds(&self) -> usize {
        self.seeds.len()
    }

    /// Proximity of `start` to every seed in the release graph:
    /// 5 - hops for seeds within MAX_HOPS, else 0.
    fn release_proximities(&self, start: usize) -> Arc<Vec<f64>> {
        if let Some(hit) = self.release_prox.read().unwrap().get(&start) {
            return hit.clone();
        }
        let dist = bounded_bfs(&|v| self.release_adj[v].clone(), start, self.release_adj.len());
        let prox: Vec<f64> = self
            .seeds
            .iter()
            .map(|&(row, _)| proximity(dist.get(&row).copied()))
            .collect();
        let prox = Arc::new(prox);
        self.release_prox
            .write()
            .unwrap()
            .insert(start, prox.clone());
        prox
    }

    /// Proximity of a target user to every seed's true identity.
    fn target_proximities(&self, target: &TargetNetwork, start: UserId) -> Result<Arc<Vec<f64>>> {
        if let Some(hit) = self.target_prox.read().unwrap().get(&start) {
            return Ok(hit.clone());
        }
        let start_idx = target.background_index(start)?;
        let dist = bounded_bfs(
            &|v| {
                let id = target.background_id(v);
                let mut adj: Vec<usize> = target
                    .background_followers(id)
                    .unwrap_or(&[])
                    .iter()
                    .chain(target.background_followees(id).unwrap_or(&[]))
                    .map(|&u| target.background_index(u).expect("adjacency ids exist"))
                    .collect();
                adj.sort_unstable();
                adj.dedup();
                adj
            },
            start_idx,
            target.n_users(),
        );
        let prox: Vec<f64> = self
            .seeds
            .iter()
            .map(|&(_, real)| {
                let idx = target.background_index(real).ok();
                proximity(idx.and_then(|i| dist.get(&i).copied()))
            })
            .collect();
        let prox = Arc::new(prox);
        self.target_prox
            .write()
            .unwrap()
            .insert(start, prox.clone());
        Ok(prox)
    }
}

fn proximity(hops: Option<usize>) -> f64 {
    match hops {
        Some(d) if d <= MAX_HOPS => (MAX_HOPS + 1 - d) as f64,
        _ => 0.0,
    }
}

/// BFS with depth cap MAX_HOPS; returns node -> hops for reached nodes.
fn bounded_bfs(adjacency: &dyn Fn(usize) -> Vec<usize>, start: usize, n: usize) -> HashMap<usize, usize> {
    let mut dist: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(start, 0);
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == MAX_HOPS {
            continue;
        }
        for w in adjacency(v) {
            debug_assert!(w < n);
            if !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Number of the released user's neighbors whose seed-mapped identities
/// are neighbors of the candidate in the target network.
pub fn narayanan_overlap(
    seeds: &SeedContext,
    user_row: usize,
    candidate: UserId,
    target: &TargetNetwork,
) -> Result<usize> {
    let cand_followers = target.background_followers(candidate)?;
    let cand_followees = target.background_followees(candidate)?;
    let mut overlap = 0;
    for &w in &seeds.release_adj[user_row] {
        if let Some(&real) = seeds.mapped_rows.get(&w) {
            if cand_followers.binary_search(&real).is_ok()
                || cand_followees.binary_search(&real).is_ok()
            {
                overlap += 1;
            }
        }
    }
    Ok(overlap)
}

/// Seed-mapped common-neighbor count normalized by sqrt of the two total
/// degrees; 0 when either side is isolated or no seeds are mapped.
pub fn narayanan_similarity(
    seeds: &SeedContext,
    user_row: usize,
    candidate: UserId,
    _followers: &[Vec<usize>],
    _followees: &[Vec<usize>],
    total_degree: &[usize],
    target: &TargetNetwork,
) -> Result<f64> {
    let raw = narayanan_overlap(seeds, user_row, candidate, target)?;
    if raw == 0 {
        return Ok(0.0);
    }
    let deg_u = total_degree[user_row];
    let deg_c = target.background_followers(candidate)?.len()
        + target.background_followees(candidate)?.len();
    if deg_u == 0 || deg_c == 0 {
        return Ok(0.0);
    }
    Ok(raw as f64 / ((deg_u * deg_c) as f64).sqrt())
}

/// Equal-weight mix of degree-centrality closeness (per direction,
/// averaged), seed-proximity cosine, and the normalized neighbor overlap.
pub fn ada_similarity(
    seeds: &SeedContext,
    user_row: usize,
    candidate: UserId,
    followers: &[Vec<usize>],
    followees: &[Vec<usize>],
    total_degree: &[usize],
    target: &TargetNetwork,
) -> Result<f64> {
    let in_u = followers[user_row].len();
    let out_u = followees[user_row].len();
    let in_c = target.background_followers(candidate)?.len();
    let out_c = target.background_followees(candidate)?.len();
    let closeness = |a: usize, b: usize| -> f64 {
        let max = a.max(b);
        if max == 0 {
            1.0
        } else {
            1.0 - (a.abs_diff(b) as f64) / max as f64
        }
    };
    let degree_part = (closeness(in_u, in_c) + closeness(out_u, out_c)) / 2.0;

    let u_prox = seeds.release_proximities(user_row);
    let c_prox = seeds.target_proximities(target, candidate)?;
    let distance_part = cosine_dense(&u_prox, &c_prox);

    let inheritance_part = narayanan_similarity(
        seeds,
        user_row,
        candidate,
        followers,
        followees,
        total_degree,
        target,
    )?;

    Ok((degree_part + distance_part + inheritance_part) / 3.0)
}
