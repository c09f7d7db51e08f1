//! The ATHD de-anonymization engine.
//!
//! Three steps per released user u: (1) score u's post vectors and keep
//! the top-k most revealing ones, (2) turn each into a keyword query
//! (words weighted above the post's mean) and union the search results
//! into a candidate set, (3) rank candidates by similarity. The simple
//! metric combines structural and textual cosine similarity; the improved
//! metric adds the fitness of the two neighbor sets, borrowing the
//! non-local-means idea of denoising a value with its neighborhood.
//! Two seed-based baseline metrics plug into step 3 unchanged.
//!
//! The attacker sees only the release on the anonymized side (features
//! come from the released edge set and matrix) and only the public API on
//! the target side.

mod baselines;

pub use baselines::{ada_similarity, narayanan_overlap, narayanan_similarity, SeedContext};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{AnonymizedDataset, UserId};
use crate::seed::{derive_seed_labeled, rng_from_seed};
use crate::target::{SearchQuery, Session};
use crate::text::vectorize_document;
use crate::vector::{cosine_dense, cosine_row_sparse, RowRef, SparseVector};

#[derive(Clone, Debug, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Top revealing posts queried per user.
    pub k_posts: usize,
    /// Weight of structural vs textual similarity.
    pub alpha: f64,
    /// Weight of individual vs neighbor similarity.
    pub beta: f64,
    /// Neighbor sample size per side.
    pub lambda: usize,
    /// Recent posts collected per candidate.
    pub theta: usize,
    /// Degree histogram bin count.
    pub bins: usize,
    /// Degree histogram bin width.
    pub bin_width: usize,
    /// Candidates returned per user.
    pub h: usize,
    pub rng_seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            k_posts: 10,
            alpha: 0.5,
            beta: 0.7,
            lambda: 20,
            theta: 50,
            bins: 7,
            bin_width: 50,
            h: 1,
            rng_seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("alpha and beta must be in [0, 1]".into()));
        }
        if self.bins == 0 || self.bin_width == 0 {
            return Err(Error::Config("bins and bin_width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Simple,
    Improved,
    Narayanan,
    Ada,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Improved,
        Metric::Simple,
        Metric::Ada,
        Metric::Narayanan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Simple => "simple",
            Metric::Improved => "improved",
            Metric::Narayanan => "narayanan",
            Metric::Ada => "ada",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown attack metric '{s}'")))
    }
}

/// Binned neighbor-degree histogram: follower bins then followee bins.
#[derive(Clone, Debug, PartialEq)]
pub struct StructFeature(pub Vec<f64>);

impl StructFeature {
    pub fn zeros(bins: usize) -> Self {
        Self(vec![0.0; 2 * bins])
    }

    pub fn add(&mut self, other: &StructFeature) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Histogram of degrees into `bins` bins of width `bin_width`; degrees at
/// or beyond bins * bin_width land in the last bin.
pub fn degree_histogram(degrees: &[usize], bins: usize, bin_width: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins];
    for &d in degrees {
        let bin = (d / bin_width).min(bins - 1);
        hist[bin] += 1.0;
    }
    hist
}

/// Concatenated follower/followee degree histograms.
pub fn struct_feature(
    follower_degrees: &[usize],
    followee_degrees: &[usize],
    bins: usize,
    bin_width: usize,
) -> StructFeature {
    let mut v = degree_histogram(follower_degrees, bins, bin_width);
    v.extend(degree_histogram(followee_degrees, bins, bin_width));
    StructFeature(v)
}

/// Mean coordinate of a post vector over the whole word space: the
/// revealing-post score. Rare (high-IDF) words push it up.
pub fn post_score(row: RowRef<'_>, vocab_size: usize) -> f64 {
    debug_assert!(vocab_size > 0);
    row.sum() / vocab_size as f64
}

/// Row indices of a user's posts sorted by score descending (ties by
/// ascending row), truncated to k_posts. Errors when the user owns no
/// posts; such users are excluded from datasets upstream.
pub fn top_revealing(
    dataset: &AnonymizedDataset,
    user_row: usize,
    k_posts: usize,
) -> Result<Vec<usize>> {
    let rows = dataset.user_post.posts_of(user_row);
    if rows.is_empty() {
        return Err(Error::Invalid(format!(
            "user row {user_row} has no posts to attack"
        )));
    }
    let vocab_size = dataset.post_word.n_cols();
    let mut scored: Vec<(usize, f64)> = rows
        .into_iter()
        .map(|r| (r, post_score(dataset.post_word.row(r), vocab_size)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k_posts)
        .map(|(r, _)| r)
        .collect())
}

/// Builds the search query for one post: the words whose weight strictly
/// exceeds the post's mean score. Returns None when no word qualifies
/// (e.g. a uniform vector); such queries are skipped, not fatal.
pub fn build_query(
    row: RowRef<'_>,
    score: f64,
    vocab: &crate::text::Vocabulary,
) -> Option<SearchQuery> {
    let mut words = Vec::new();
    match row {
        RowRef::Sparse(v) => {
            for (c, w) in v.iter() {
                if w > score {
                    words.push(vocab.word(c).to_string());
                }
            }
        }
        RowRef::Dense(v) => {
            for (c, &w) in v.iter().enumerate() {
                if w > score {
                    words.push(vocab.word(c).to_string());
                }
            }
        }
    }
    SearchQuery::new(words).ok()
}

/// Union of search results over all non-skipped queries, deduplicated and
/// sorted ascending. May be empty: the user then counts as not
/// re-identified.
pub fn gather_candidates(
    queries: &[SearchQuery],
    session: &Session<'_>,
    limit: Option<usize>,
) -> Result<Vec<UserId>> {
    let mut set = BTreeSet::new();
    for q in queries {
        set.extend(session.search(q, limit)?);
    }
    Ok(set.into_iter().collect())
}

/// One scored candidate. The composition invariant holds exactly:
/// sim_total = beta * (alpha * sim_struct + (1 - alpha) * sim_text)
///           + (1 - beta) * sim_neighbor.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub candidate: UserId,
    pub sim_struct: f64,
    pub sim_text: f64,
    pub sim_neighbor: f64,
    pub sim_total: f64,
}

/// Eq-9 style combination of the two similarity aspects.
pub fn sim_simple(sim_struct: f64, sim_text: f64, alpha: f64) -> f64 {
    alpha * sim_struct + (1.0 - alpha) * sim_text
}

/// Eq-12 style combination of individual and neighbor similarity.
pub fn sim_total(sim_individual: f64, sim_neighbor: f64, beta: f64) -> f64 {
    beta * sim_individual + (1.0 - beta) * sim_neighbor
}

/// Candidate-side features fetched through the target API, cached per
/// candidate within one attack run (they do not depend on which released
/// user is being matched).
struct CandidateFeatures {
    struct_feat: StructFeature,
    text_vec: SparseVector,
    /// Pooled neighbor features (improved metric only).
    nbr_struct: Option<StructFeature>,
    nbr_text: Option<SparseVector>,
}

/// A single attack run: one release, one metric, one budget session.
pub struct Attacker<'a> {
    dataset: &'a AnonymizedDataset,
    session: &'a Session<'a>,
    cfg: &'a AttackConfig,
    metric: Metric,
    seeds: Option<SeedContext>,
    // Release-side precomputation, indexed by user row.
    followers: Vec<Vec<usize>>,
    followees: Vec<Vec<usize>>,
    total_degree: Vec<usize>,
    own_struct: Vec<StructFeature>,
    pooled_text: Vec<SparseVector>,
    row_norms: Vec<f64>,
    // Target-side caches keyed by true user id.
    cand_cache: RwLock<HashMap<UserId, Arc<CandidateFeatures>>>,
    nbr_feat_cache: RwLock<HashMap<UserId, Arc<StructFeature>>>,
}

impl<'a> Attacker<'a> {
    /// `seed_map` is required by the seed-based baseline metrics and
    /// ignored by the ATHD metrics.
    pub fn new(
        dataset: &'a AnonymizedDataset,
        session: &'a Session<'a>,
        cfg: &'a AttackConfig,
        metric: Metric,
        seed_map: BTreeMap<UserId, UserId>,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = dataset.users.len();
        let row_of: BTreeMap<UserId, usize> = dataset
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| (*u, i))
            .collect();
        let mut followers: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut followees: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &dataset.edges {
            let (ra, rb) = (row_of[&a], row_of[&b]);
            followees[ra].push(rb);
            followers[rb].push(ra);
        }
        for list in followers.iter_mut().chain(followees.iter_mut()) {
            list.sort_unstable();
        }
        let total_degree: Vec<usize> = (0..n)
            .map(|r| followers[r].len() + followees[r].len())
            .collect();

        let own_struct: Vec<StructFeature> = (0..n)
            .map(|r| {
                let fd: Vec<usize> = followers[r].iter().map(|&w| total_degree[w]).collect();
                let ed: Vec<usize> = followees[r].iter().map(|&w| total_degree[w]).collect();
                struct_feature(&fd, &ed, cfg.bins, cfg.bin_width)
            })
            .collect();

        let pooled_text: Vec<SparseVector> = (0..n)
            .map(|r| dataset.post_word.pooled_rows(&dataset.user_post.posts_of(r)))
            .collect();

        let row_norms: Vec<f64> = (0..dataset.post_word.n_rows())
            .into_par_iter()
            .map(|r| dataset.post_word.row(r).norm())
            .collect();

        let seeds = match metric {
            Metric::Narayanan | Metric::Ada => Some(SeedContext::new(
                dataset,
                session.network(),
                &followers,
                &followees,
                seed_map,
            )),
            _ => None,
        };

        Ok(Self {
            dataset,
            session,
            cfg,
            metric,
            seeds,
            followers,
            followees,
            total_degree,
            own_struct,
            pooled_text,
            row_norms,
            cand_cache: RwLock::new(HashMap::new()),
            nbr_feat_cache: RwLock::new(HashMap::new()),
        })
    }

    /// Release-side structural feature of a user: histogram over all its
    /// released neighbors' released degrees.
    pub fn user_struct_feature(&self, user_row: usize) -> &StructFeature {
        &self.own_struct[user_row]
    }

    /// Target-side own feature of a user, through the API with sampling.
    fn target_struct_feature(&self, user: UserId) -> Result<Arc<StructFeature>> {
        if let Some(hit) = self.nbr_feat_cache.read().unwrap().get(&user) {
            return Ok(hit.clone());
        }
        let mut rng = rng_from_seed(derive_seed_labeled(self.cfg.rng_seed, "tgt-own", user.0));
        let (followers, followees) = self.session.neighbors(user, self.cfg.lambda, &mut rng)?;
        let mut fd = Vec::with_capacity(followers.len());
        for w in followers {
            let (i, o) = self.session.degree_of(w)?;
            fd.push(i + o);
        }
        let mut ed = Vec::with_capacity(followees.len());
        for w in followees {
            let (i, o) = self.session.degree_of(w)?;
            ed.push(i + o);
        }
        let feat = Arc::new(struct_feature(&fd, &ed, self.cfg.bins, self.cfg.bin_width));
        self.nbr_feat_cache
            .write()
            .unwrap()
            .insert(user, feat.clone());
        Ok(feat)
    }

    /// Candidate-side textual feature: theta recent posts concatenated in
    /// one document and weighted with the released corpus statistics.
    fn candidate_text_vec(&self, candidate: UserId) -> Result<SparseVector> {
        let posts = self.session.recent_posts(candidate, self.cfg.theta)?;
        let mut tokens: Vec<&str> = Vec::new();
        for p in posts {
            tokens.extend(p.tokens.iter().map(String::as_str));
        }
        Ok(vectorize_document(
            &tokens,
            &self.dataset.vocab,
            &self.dataset.stats,
        ))
    }

    fn candidate_features(&self, candidate: UserId) -> Result<Arc<CandidateFeatures>> {
        if let Some(hit) = self.cand_cache.read().unwrap().get(&candidate) {
            return Ok(hit.clone());
        }
        let struct_feat = (*self.target_struct_feature(candidate)?).clone();
        let text_vec = self.candidate_text_vec(candidate)?;

        let (nbr_struct, nbr_text) = if self.metric == Metric::Improved {
            let mut rng =
                rng_from_seed(derive_seed_labeled(self.cfg.rng_seed, "cand-nbr", candidate.0));
            let (followers, followees) =
                self.session.neighbors(candidate, self.cfg.lambda, &mut rng)?;
            let mut union: Vec<UserId> = followers;
            union.extend(followees);
            union.sort_unstable();
            union.dedup();
            // Subsample the union back to lambda so both sides of the
            // neighbor comparison use samples of the same size.
            let sampled: Vec<UserId> = if union.len() > self.cfg.lambda {
                rand::seq::index::sample(&mut rng, union.len(), self.cfg.lambda)
                    .into_iter()
                    .map(|i| union[i])
                    .collect()
            } else {
                union
            };
            let mut pooled = StructFeature::zeros(self.cfg.bins);
            let mut tokens: Vec<String> = Vec::new();
            for w in &sampled {
                pooled.add(self.target_struct_feature(*w)?.as_ref());
                for p in self.session.recent_posts(*w, self.cfg.theta)? {
                    tokens.extend(p.tokens.iter().cloned());
                }
            }
            let doc = vectorize_document(&tokens, &self.dataset.vocab, &self.dataset.stats);
            (Some(pooled), Some(doc))
        } else {
            (None, None)
        };

        let feat = Arc::new(CandidateFeatures {
            struct_feat,
            text_vec,
            nbr_struct,
            nbr_text,
        });
        self.cand_cache
            .write()
            .unwrap()
            .insert(candidate, feat.clone());
        Ok(feat)
    }

    /// Mean cosine between each of the user's post vectors and the
    /// candidate document (Eq-10 style, divided by the post count).
    fn text_similarity(&self, post_rows: &[usize], doc: &SparseVector) -> f64 {
        if post_rows.is_empty() {
            return 0.0;
        }
        let total: f64 = post_rows
            .iter()
            .map(|&r| {
                cosine_row_sparse(self.dataset.post_word.row(r), self.row_norms[r], doc)
            })
            .sum();
        total / post_rows.len() as f64
    }

    /// Neighbor fitness: cosine of pooled neighbor struct features plus
    /// the mean cosine of each release-side neighbor's pooled text
    /// against the candidate's pooled neighbor document.
    fn neighbor_similarity(&self, user_row: usize, cand: &CandidateFeatures) -> f64 {
        let (Some(c_struct), Some(c_text)) = (&cand.nbr_struct, &cand.nbr_text) else {
            return 0.0;
        };
        let pseudonym = self.dataset.users[user_row];
        let mut rng = rng_from_seed(derive_seed_labeled(
            self.cfg.rng_seed,
            "user-nbr",
            pseudonym.0,
        ));
        let mut union: Vec<usize> = self.followers[user_row].clone();
        union.extend(&self.followees[user_row]);
        union.sort_unstable();
        union.dedup();
        let sampled: Vec<usize> = if union.len() > self.cfg.lambda {
            rand::seq::index::sample(&mut rng, union.len(), self.cfg.lambda)
                .into_iter()
                .map(|i| union[i])
                .collect()
        } else {
            union
        };
        if sampled.is_empty() {
            return 0.0;
        }

        let mut pooled = StructFeature::zeros(self.cfg.bins);
        for &w in &sampled {
            pooled.add(&self.own_struct[w]);
        }
        let s_part = cosine_dense(&pooled.0, &c_struct.0);

        let t_part = sampled
            .iter()
            .map(|&w| crate::vector::cosine_sparse(&self.pooled_text[w], c_text))
            .sum::<f64>()
            / sampled.len() as f64;

        sim_simple(s_part, t_part, self.cfg.alpha)
    }

    fn score_candidate(&self, user_row: usize, candidate: UserId) -> Result<CandidateScore> {
        match self.metric {
            Metric::Simple | Metric::Improved => {
                let cand = self.candidate_features(candidate)?;
                let s = cosine_dense(&self.own_struct[user_row].0, &cand.struct_feat.0);
                let post_rows = self.dataset.user_post.posts_of(user_row);
                let t = self.text_similarity(&post_rows, &cand.text_vec);
                let n = if self.metric == Metric::Improved {
                    self.neighbor_similarity(user_row, &cand)
                } else {
                    0.0
                };
                let total = sim_total(sim_simple(s, t, self.cfg.alpha), n, self.cfg.beta);
                Ok(CandidateScore {
                    candidate,
                    sim_struct: s,
                    sim_text: t,
                    sim_neighbor: n,
                    sim_total: total,
                })
            }
            Metric::Narayanan => {
                let seeds = self.seeds.as_ref().expect("seed context for baselines");
                let score = narayanan_similarity(
                    seeds,
                    user_row,
                    candidate,
                    &self.followers,
                    &self.followees,
                    &self.total_degree,
                    self.session.network(),
                )?;
                Ok(CandidateScore {
                    candidate,
                    sim_struct: 0.0,
                    sim_text: 0.0,
                    sim_neighbor: 0.0,
                    sim_total: score,
                })
            }
            Metric::Ada => {
                let seeds = self.seeds.as_ref().expect("seed context for baselines");
                let score = ada_similarity(
                    seeds,
                    user_row,
                    candidate,
                    &self.followers,
                    &self.followees,
                    &self.total_degree,
                    self.session.network(),
                )?;
                Ok(CandidateScore {
                    candidate,
                    sim_struct: 0.0,
                    sim_text: 0.0,
                    sim_neighbor: 0.0,
                    sim_total: score,
                })
            }
        }
    }

    /// De-anonymizes one released user: runs the three steps and returns
    /// the top-h candidates, ranked by the metric (ties broken by
    /// ascending candidate id). The ranking key for the simple metric is
    /// the Eq-9 combination; for improved, the Eq-12 total; baselines use
    /// their own scores.
    pub fn deanonymize(&self, pseudonym: UserId) -> Result<Vec<CandidateScore>> {
        let Some(user_row) = self.dataset.user_row(pseudonym) else {
            return Err(Error::UnknownUser(pseudonym));
        };
        let rows = top_revealing(self.dataset, user_row, self.cfg.k_posts)?;
        let vocab_size = self.dataset.post_word.n_cols();
        let queries: Vec<SearchQuery> = rows
            .iter()
            .filter_map(|&r| {
                let row = self.dataset.post_word.row(r);
                build_query(row, post_score(row, vocab_size), &self.dataset.vocab)
            })
            .collect();
        let candidates = gather_candidates(&queries, self.session, None)?;
        if candidates.is_empty() {
            return Ok(Vec::new());
        }

        let mut scored: Vec<CandidateScore> = Vec::with_capacity(candidates.len());
        for c in candidates {
            scored.push(self.score_candidate(user_row, c)?);
        }
        let key = |s: &CandidateScore| match self.metric {
            Metric::Simple => sim_simple(s.sim_struct, s.sim_text, self.cfg.alpha),
            _ => s.sim_total,
        };
        scored.sort_by(|a, b| {
            key(b)
                .total_cmp(&key(a))
                .then(a.candidate.cmp(&b.candidate))
        });
        scored.truncate(self.cfg.h);
        Ok(scored)
    }

    /// Runs the attack over every released user in parallel. Per-user RNG
    /// streams derive from (seed, pseudonym), so results are independent
    /// of scheduling. Users that cannot be attacked (no posts) yield
    /// empty candidate lists.
    pub fn run_all(&self) -> Result<BTreeMap<UserId, Vec<CandidateScore>>> {
        let results: Vec<(UserId, Vec<CandidateScore>)> = self
            .dataset
            .users
            .par_iter()
            .map(|&u| {
                let ranked = match self.deanonymize(u) {
                    Ok(r) => Ok(r),
                    Err(Error::Invalid(_)) => Ok(Vec::new()),
                    Err(e) => Err(e),
                };
                ranked.map(|r| (u, r))
            })
            .collect::<Result<_>>()?;
        Ok(results.into_iter().collect())
    }
}

#[cfg(test)]
mod tests;
