use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Opaque user identifier. Pseudonymized ids are drawn at random and carry
/// no ordering relation to the original ids.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct UserId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single post. `tokens` is the PII-stripped unigram sequence used for
/// indexing and vectorization; `raw` is the original text and exists only
/// in the un-anonymized network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Post {
    pub author: UserId,
    pub tokens: Vec<String>,
    pub raw: Option<String>,
}

/// Direction selector for degree computations on the directed graph.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    In,
    Out,
}

/// Directed user graph with per-user post lists. Edges point
/// follower -> followee. Post order within a user is recency order
/// (oldest first).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SocialNetwork {
    users: BTreeSet<UserId>,
    edges: BTreeSet<(UserId, UserId)>,
    posts: BTreeMap<UserId, Vec<Post>>,
    handles: BTreeMap<UserId, String>,
    stoplist: String,
}

impl SocialNetwork {
    pub fn new() -> Self {
        Self {
            stoplist: "english".to_string(),
            ..Self::default()
        }
    }

    /// Name of the stoplist posts were (and must be) preprocessed with.
    pub fn stoplist(&self) -> &str {
        &self.stoplist
    }

    pub fn set_stoplist(&mut self, name: impl Into<String>) {
        self.stoplist = name.into();
    }

    pub fn add_user(&mut self, id: UserId) -> bool {
        self.users.insert(id)
    }

    pub fn set_handle(&mut self, id: UserId, handle: impl Into<String>) -> Result<()> {
        if !self.users.contains(&id) {
            return Err(Error::UnknownUser(id));
        }
        self.handles.insert(id, handle.into());
        Ok(())
    }

    /// Inserts a directed edge. Rejects self-loops and unknown endpoints;
    /// returns whether the edge was new.
    pub fn add_edge(&mut self, from: UserId, to: UserId) -> Result<bool> {
        if from == to {
            return Err(Error::Invalid(format!("self-loop on user {from}")));
        }
        if !self.users.contains(&from) {
            return Err(Error::UnknownUser(from));
        }
        if !self.users.contains(&to) {
            return Err(Error::UnknownUser(to));
        }
        Ok(self.edges.insert((from, to)))
    }

    /// Appends a post for its author. The token sequence must be non-empty:
    /// only users with at least one retained post are part of the dataset.
    pub fn add_post(&mut self, post: Post) -> Result<()> {
        if !self.users.contains(&post.author) {
            return Err(Error::UnknownUser(post.author));
        }
        if post.tokens.is_empty() {
            return Err(Error::Invalid(format!(
                "post by user {} has no tokens after preprocessing",
                post.author
            )));
        }
        self.posts.entry(post.author).or_default().push(post);
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_posts(&self) -> usize {
        self.posts.values().map(Vec::len).sum()
    }

    /// Users in canonical (ascending id) order.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.users.iter().copied()
    }

    pub fn contains_user(&self, id: UserId) -> bool {
        self.users.contains(&id)
    }

    pub fn edges(&self) -> &BTreeSet<(UserId, UserId)> {
        &self.edges
    }

    pub fn posts_of(&self, id: UserId) -> &[Post] {
        self.posts.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn handle_of(&self, id: UserId) -> Option<&str> {
        self.handles.get(&id).map(String::as_str)
    }

    pub fn handles(&self) -> impl Iterator<Item = (UserId, &str)> {
        self.handles.iter().map(|(id, h)| (*id, h.as_str()))
    }

    pub fn out_neighbors(&self, id: UserId) -> impl Iterator<Item = UserId> + '_ {
        self.edges
            .range((id, UserId(u64::MIN))..=(id, UserId(u64::MAX)))
            .map(|&(_, to)| to)
    }
}

/// One degree per user, aligned with the canonical (ascending id) user
/// ordering. An empty graph yields an empty list.
pub fn degree_sequence(network: &SocialNetwork, direction: Direction) -> Vec<usize> {
    let index: BTreeMap<UserId, usize> = network
        .users()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let mut degrees = vec![0usize; index.len()];
    for &(from, to) in network.edges() {
        let touched = match direction {
            Direction::Out => from,
            Direction::In => to,
        };
        degrees[index[&touched]] += 1;
    }
    degrees
}
