use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::UserId;
use crate::text::Vocabulary;
use crate::vector::PostWordMatrix;

/// User-post matrix W. Each post has exactly one author, so the matrix is
/// stored as one author row index per post column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserPostMatrix {
    n_users: usize,
    author_row: Vec<u32>,
}

impl UserPostMatrix {
    pub fn new(n_users: usize, author_row: Vec<u32>) -> Result<Self> {
        if let Some(&bad) = author_row.iter().find(|&&r| r as usize >= n_users) {
            return Err(Error::Invalid(format!(
                "user-post matrix references user row {bad} out of {n_users}"
            )));
        }
        Ok(Self {
            n_users,
            author_row,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_posts(&self) -> usize {
        self.author_row.len()
    }

    /// W[i][j] as 0/1.
    pub fn get(&self, user_row: usize, post: usize) -> u8 {
        u8::from(self.author_row[post] as usize == user_row)
    }

    pub fn author_of(&self, post: usize) -> usize {
        self.author_row[post] as usize
    }

    /// Post column indices owned by a user row, ascending.
    pub fn posts_of(&self, user_row: usize) -> Vec<usize> {
        self.author_row
            .iter()
            .enumerate()
            .filter(|&(_, &r)| r as usize == user_row)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        let mut sums = vec![0usize; self.n_users];
        for &r in &self.author_row {
            sums[r as usize] += 1;
        }
        sums
    }
}

/// Released corpus statistics: total post count and per-word document
/// frequency, published alongside the vocabulary so attack-side documents
/// can be weighted consistently with the release.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub n_posts: usize,
    pub doc_freq: Vec<u32>,
}

/// The published anonymized dataset: pseudonymized users and edges, the
/// post-word matrix X, the user-post matrix W, and the vocabulary with its
/// released statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct AnonymizedDataset {
    pub users: Vec<UserId>,
    pub edges: BTreeSet<(UserId, UserId)>,
    pub post_word: PostWordMatrix,
    pub user_post: UserPostMatrix,
    pub vocab: Vocabulary,
    pub stats: CorpusStats,
}

impl AnonymizedDataset {
    /// Checks the cross-field invariants: sorted unique users, edge
    /// endpoints known, no self-loops, X rows == W columns, vocabulary
    /// size == X columns == stats length.
    pub fn validate(&self) -> Result<()> {
        if self.users.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "release users must be sorted and unique".into(),
            ));
        }
        let known: BTreeSet<UserId> = self.users.iter().copied().collect();
        for &(a, b) in &self.edges {
            if a == b {
                return Err(Error::Invalid(format!("self-loop on {a}")));
            }
            if !known.contains(&a) || !known.contains(&b) {
                return Err(Error::Invalid(format!("edge ({a}, {b}) has unknown endpoint")));
            }
        }
        if self.post_word.n_rows() != self.user_post.n_posts() {
            return Err(Error::Invalid(format!(
                "X has {} rows but W has {} post columns",
                self.post_word.n_rows(),
                self.user_post.n_posts()
            )));
        }
        if self.user_post.n_users() != self.users.len() {
            return Err(Error::Invalid(format!(
                "W has {} user rows but release has {} users",
                self.user_post.n_users(),
                self.users.len()
            )));
        }
        if self.post_word.n_cols() != self.vocab.len() {
            return Err(Error::Invalid(format!(
                "X has {} columns but vocabulary has {} words",
                self.post_word.n_cols(),
                self.vocab.len()
            )));
        }
        if self.stats.doc_freq.len() != self.vocab.len() || self.stats.n_posts != self.post_word.n_rows()
        {
            return Err(Error::Invalid(
                "released corpus statistics do not match matrix shape".into(),
            ));
        }
        Ok(())
    }

    /// Row index of a pseudonym in the canonical (ascending) user order.
    pub fn user_row(&self, pseudonym: UserId) -> Option<usize> {
        self.users.binary_search(&pseudonym).ok()
    }
}

/// Bijection pseudonym -> true identity, kept by the evaluator only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    map: BTreeMap<UserId, UserId>,
}

impl GroundTruth {
    pub fn new(map: BTreeMap<UserId, UserId>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for target in map.values() {
            if !seen.insert(*target) {
                return Err(Error::Invalid(format!(
                    "ground truth maps two pseudonyms to {target}"
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn true_id(&self, pseudonym: UserId) -> Option<UserId> {
        self.map.get(&pseudonym).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.map.iter().map(|(a, b)| (*a, *b))
    }

    pub fn pseudonyms(&self) -> impl Iterator<Item = UserId> + '_ {
        self.map.keys().copied()
    }
}
