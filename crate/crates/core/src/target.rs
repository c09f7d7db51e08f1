//! Simulated target social network.
//!
//! The un-anonymized ground-truth network exposed the way an attacker
//! would see a live platform: a keyword search engine over posts plus a
//! per-user API (recent posts, sampled neighbors, degrees), with call
//! accounting to model rate limits. Everything is read-only after
//! construction; budget counters are atomic so sessions can be shared
//! across worker threads.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::index::sample;
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Post, SocialNetwork, UserId};

/// Conjunctive (all words) or disjunctive (any word) search semantics.
/// Real advanced-search engines default to all-words mode, so does this.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    All,
    Any,
}

/// A keyword query; words must be non-empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchQuery {
    words: Vec<String>,
}

impl SearchQuery {
    pub fn new(mut words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Invalid("search query needs at least one word".into()));
        }
        words.sort();
        words.dedup();
        Ok(Self { words })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Optional per-kind call caps.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
pub struct BudgetCaps {
    pub search: Option<u64>,
    pub posts: Option<u64>,
    pub neighbors: Option<u64>,
}

/// Monotone call counters, one per API kind.
#[derive(Debug, Default)]
pub struct QueryBudget {
    caps: BudgetCaps,
    search_calls: AtomicU64,
    post_calls: AtomicU64,
    neighbor_calls: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BudgetTotals {
    pub search_calls: u64,
    pub post_calls: u64,
    pub neighbor_calls: u64,
}

impl std::ops::AddAssign for BudgetTotals {
    fn add_assign(&mut self, rhs: Self) {
        self.search_calls += rhs.search_calls;
        self.post_calls += rhs.post_calls;
        self.neighbor_calls += rhs.neighbor_calls;
    }
}

impl QueryBudget {
    pub fn new(caps: BudgetCaps) -> Self {
        Self {
            caps,
            ..Self::default()
        }
    }

    fn charge(counter: &AtomicU64, cap: Option<u64>, what: &'static str) -> Result<()> {
        match cap {
            None => {
                counter.fetch_add(1, Ordering::Relaxed);
                Ok(())
            }
            Some(cap) => {
                // Only count calls that are actually served.
                let mut current = counter.load(Ordering::Relaxed);
                loop {
                    if current >= cap {
                        return Err(Error::BudgetExhausted(what));
                    }
                    match counter.compare_exchange_weak(
                        current,
                        current + 1,
                        Ordering::Relaxed,
                        Ordering::Relaxed,
                    ) {
                        Ok(_) => return Ok(()),
                        Err(seen) => current = seen,
                    }
                }
            }
        }
    }

    pub fn totals(&self) -> BudgetTotals {
        BudgetTotals {
            search_calls: self.search_calls.load(Ordering::Relaxed),
            post_calls: self.post_calls.load(Ordering::Relaxed),
            neighbor_calls: self.neighbor_calls.load(Ordering::Relaxed),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct TargetConfig {
    /// Maximum results returned per search call.
    pub query_limit: usize,
    pub query_mode: MatchMode,
    #[serde(default)]
    pub caps: BudgetCaps,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            query_limit: 100,
            query_mode: MatchMode::All,
            caps: BudgetCaps::default(),
        }
    }
}

/// The simulator. Owns tokenized posts, adjacency in both directions and
/// an inverted word index built once at construction.
pub struct TargetNetwork {
    cfg: TargetConfig,
    ids: Vec<UserId>,
    index_of: BTreeMap<UserId, usize>,
    /// Posts per user in recency order (oldest first), PII-stripped.
    posts: Vec<Vec<Post>>,
    /// Sorted token multiset per (user, post) for conjunctive checks.
    sorted_tokens: Vec<Vec<Vec<String>>>,
    followers: Vec<Vec<UserId>>,
    followees: Vec<Vec<UserId>>,
    /// word -> (user index, post index), sorted.
    inverted: HashMap<String, Vec<(u32, u32)>>,
}

impl TargetNetwork {
    pub fn build(network: &SocialNetwork, cfg: TargetConfig) -> Self {
        let ids: Vec<UserId> = network.users().collect();
        let index_of: BTreeMap<UserId, usize> =
            ids.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let n = ids.len();

        let mut posts: Vec<Vec<Post>> = Vec::with_capacity(n);
        let mut sorted_tokens: Vec<Vec<Vec<String>>> = Vec::with_capacity(n);
        let mut inverted: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (u, &id) in ids.iter().enumerate() {
            let user_posts: Vec<Post> = network
                .posts_of(id)
                .iter()
                .map(|p| Post {
                    author: p.author,
                    tokens: p.tokens.clone(),
                    raw: None,
                })
                .collect();
            let mut per_post_sorted = Vec::with_capacity(user_posts.len());
            for (j, post) in user_posts.iter().enumerate() {
                let mut sorted = post.tokens.clone();
                sorted.sort();
                let mut unique = sorted.clone();
                unique.dedup();
                for word in &unique {
                    inverted
                        .entry(word.clone())
                        .or_default()
                        .push((u as u32, j as u32));
                }
                per_post_sorted.push(sorted);
            }
            posts.push(user_posts);
            sorted_tokens.push(per_post_sorted);
        }
        for list in inverted.values_mut() {
            list.sort_unstable();
        }

        let mut followers: Vec<Vec<UserId>> = vec![Vec::new(); n];
        let mut followees: Vec<Vec<UserId>> = vec![Vec::new(); n];
        for &(a, b) in network.edges() {
            followees[index_of[&a]].push(b);
            followers[index_of[&b]].push(a);
        }
        for list in followers.iter_mut().chain(followees.iter_mut()) {
            list.sort_unstable();
        }

        Self {
            cfg,
            ids,
            index_of,
            posts,
            sorted_tokens,
            followers,
            followees,
            inverted,
        }
    }

    pub fn config(&self) -> &TargetConfig {
        &self.cfg
    }

    pub fn n_users(&self) -> usize {
        self.ids.len()
    }

    pub fn user_ids(&self) -> &[UserId] {
        &self.ids
    }

    /// Opens an accounting session with the network's configured caps.
    pub fn session(&self) -> Session<'_> {
        Session {
            net: self,
            budget: QueryBudget::new(self.cfg.caps),
        }
    }

    fn resolve(&self, user: UserId) -> Result<usize> {
        self.index_of
            .get(&user)
            .copied()
            .ok_or(Error::UnknownUser(user))
    }

    fn post_matches(&self, user: usize, post: usize, words: &[String]) -> bool {
        let tokens = &self.sorted_tokens[user][post];
        match self.cfg.query_mode {
            MatchMode::All => words
                .iter()
                .all(|w| tokens.binary_search(w).is_ok()),
            MatchMode::Any => words
                .iter()
                .any(|w| tokens.binary_search(w).is_ok()),
        }
    }

    /// Match counting shared by `search` and the test oracle path: users
    /// with at least one matching post, ordered by most matching posts
    /// first, then ascending id.
    fn ranked_matches(&self, query: &SearchQuery) -> Vec<(UserId, usize)> {
        let mut per_user: BTreeMap<usize, usize> = BTreeMap::new();
        match self.cfg.query_mode {
            MatchMode::All => {
                // Probe the rarest word's posting list, verify the rest.
                let shortest = query
                    .words()
                    .iter()
                    .map(|w| self.inverted.get(w).map(Vec::as_slice).unwrap_or(&[]))
                    .min_by_key(|l| l.len())
                    .unwrap_or(&[]);
                for &(u, j) in shortest {
                    if self.post_matches(u as usize, j as usize, query.words()) {
                        *per_user.entry(u as usize).or_default() += 1;
                    }
                }
            }
            MatchMode::Any => {
                let mut hits: Vec<(u32, u32)> = Vec::new();
                for w in query.words() {
                    if let Some(list) = self.inverted.get(w) {
                        hits.extend_from_slice(list);
                    }
                }
                hits.sort_unstable();
                hits.dedup();
                for (u, _) in hits {
                    *per_user.entry(u as usize).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(UserId, usize)> = per_user
            .into_iter()
            .map(|(u, count)| (self.ids[u], count))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }
}

/// A budgeted view of the target network; one per attack run.
pub struct Session<'a> {
    net: &'a TargetNetwork,
    budget: QueryBudget,
}

impl<'a> Session<'a> {
    pub fn with_caps(net: &'a TargetNetwork, caps: BudgetCaps) -> Self {
        Self {
            net,
            budget: QueryBudget::new(caps),
        }
    }

    pub fn network(&self) -> &TargetNetwork {
        self.net
    }

    pub fn totals(&self) -> BudgetTotals {
        self.budget.totals()
    }

    /// Users who published posts matching the query, truncated to `limit`
    /// (the configured default when `None`).
    pub fn search(&self, query: &SearchQuery, limit: Option<usize>) -> Result<Vec<UserId>> {
        QueryBudget::charge(
            &self.budget.search_calls,
            self.budget.caps.search,
            "search",
        )?;
        let limit = limit.unwrap_or(self.net.cfg.query_limit);
        Ok(self
            .net
            .ranked_matches(query)
            .into_iter()
            .take(limit)
            .map(|(u, _)| u)
            .collect())
    }

    /// Up to `theta` most recent posts, most recent first.
    pub fn recent_posts(&self, user: UserId, theta: usize) -> Result<Vec<&'a Post>> {
        QueryBudget::charge(&self.budget.post_calls, self.budget.caps.posts, "posts")?;
        let u = self.net.resolve(user)?;
        let posts = &self.net.posts[u];
        let take = theta.min(posts.len());
        Ok(posts.iter().rev().take(take).collect())
    }

    /// Uniform samples without replacement of min(lambda, count) from the
    /// followers and followees of a user, each returned ascending.
    pub fn neighbors(
        &self,
        user: UserId,
        lambda: usize,
        rng: &mut impl Rng,
    ) -> Result<(Vec<UserId>, Vec<UserId>)> {
        QueryBudget::charge(
            &self.budget.neighbor_calls,
            self.budget.caps.neighbors,
            "neighbors",
        )?;
        let u = self.net.resolve(user)?;
        let pick = |list: &[UserId], rng: &mut dyn rand::RngCore| -> Vec<UserId> {
            let take = lambda.min(list.len());
            let mut out: Vec<UserId> = sample(rng, list.len(), take)
                .into_iter()
                .map(|i| list[i])
                .collect();
            out.sort_unstable();
            out
        };
        let followers = pick(&self.net.followers[u], rng);
        let followees = pick(&self.net.followees[u], rng);
        Ok((followers, followees))
    }

    /// Exact (in, out) degree of a user; charged like a neighbor lookup.
    pub fn degree_of(&self, user: UserId) -> Result<(usize, usize)> {
        QueryBudget::charge(
            &self.budget.neighbor_calls,
            self.budget.caps.neighbors,
            "neighbors",
        )?;
        let u = self.net.resolve(user)?;
        Ok((self.net.followers[u].len(), self.net.followees[u].len()))
    }
}

/// Un-budgeted adjacency access for the seed-based baseline metrics,
/// which assume pre-collected background knowledge of the target graph.
impl TargetNetwork {
    pub fn background_followers(&self, user: UserId) -> Result<&[UserId]> {
        Ok(&self.followers[self.resolve(user)?])
    }

    pub fn background_followees(&self, user: UserId) -> Result<&[UserId]> {
        Ok(&self.followees[self.resolve(user)?])
    }

    pub fn background_index(&self, user: UserId) -> Result<usize> {
        self.resolve(user)
    }

    pub fn background_id(&self, index: usize) -> UserId {
        self.ids[index]
    }
}
