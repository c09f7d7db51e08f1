//! Text preprocessing and TF-IDF vectorization.
//!
//! The pipeline is: strip PII from raw text, tokenize, drop stopwords,
//! build the vocabulary over the whole corpus, then weight each post with
//! raw term frequency times ln(M / n_t). Both the publisher and the
//! attacker run the same code so their feature spaces line up.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{CorpusStats, SocialNetwork, UserId, UserPostMatrix};
use crate::vector::{PostWordMatrix, SparseVector};

pub use crate::vector::{cosine_dense, cosine_row_sparse, cosine_sparse, RowRef};

const ENGLISH: &str = include_str!("stopwords_english.txt");
const SYNTHETIC: &str = include_str!("stopwords_synthetic.txt");

fn parse_stoplist(raw: &str) -> HashSet<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Returns the words of a named stoplist shipped with the crate.
pub fn stoplist(name: &str) -> Result<HashSet<String>> {
    match name {
        "english" => Ok(parse_stoplist(ENGLISH)),
        "synthetic" => Ok(parse_stoplist(SYNTHETIC)),
        "none" => Ok(HashSet::new()),
        other => Err(Error::Config(format!("unknown stoplist '{other}'"))),
    }
}

/// PII stripping plus tokenization. Holds the stoplist and the known
/// user-name dictionary.
#[derive(Clone, Debug, Default)]
pub struct Preprocessor {
    stoplist_name: String,
    stopwords: HashSet<String>,
    usernames: HashSet<String>,
}

impl Preprocessor {
    pub fn new(stoplist_name: &str) -> Result<Self> {
        Ok(Self {
            stoplist_name: stoplist_name.to_string(),
            stopwords: stoplist(stoplist_name)?,
            usernames: HashSet::new(),
        })
    }

    /// Custom stopword set, mostly for tests.
    pub fn with_stopwords(words: impl IntoIterator<Item = String>) -> Self {
        Self {
            stoplist_name: "custom".into(),
            stopwords: words.into_iter().collect(),
            usernames: HashSet::new(),
        }
    }

    pub fn stoplist_name(&self) -> &str {
        &self.stoplist_name
    }

    /// Registers known user names (handles); they are removed from text
    /// like any other PII. Matching is case-insensitive.
    pub fn add_usernames<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) {
        self.usernames
            .extend(names.into_iter().map(|n| n.to_lowercase()));
    }

    /// Builds a preprocessor matching how a network's posts were tokenized.
    pub fn for_network(network: &SocialNetwork) -> Result<Self> {
        let mut p = Self::new(network.stoplist())?;
        p.add_usernames(network.handles().map(|(_, h)| h));
        Ok(p)
    }

    fn is_mention(token: &str) -> bool {
        token.len() > 1 && token.starts_with('@')
    }

    fn is_url(token: &str) -> bool {
        let t = token.to_ascii_lowercase();
        t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.") || t.contains("://")
    }

    /// Removes mentions, URLs and known user names, then lowercases,
    /// strips punctuation and drops stopwords. An empty result is allowed.
    pub fn strip_pii(&self, raw: &str) -> Vec<String> {
        let mut out = Vec::new();
        for token in raw.split_whitespace() {
            if Self::is_mention(token) || Self::is_url(token) {
                continue;
            }
            for part in token.split(|c: char| !c.is_alphanumeric()) {
                if part.is_empty() {
                    continue;
                }
                let word = part.to_lowercase();
                if self.stopwords.contains(&word) || self.usernames.contains(&word) {
                    continue;
                }
                out.push(word);
            }
        }
        out
    }
}

/// Ordered word feature space with a reverse index.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
    }
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let index: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if index.len() != words.len() {
            return Err(Error::Invalid("vocabulary contains duplicate words".into()));
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, col: usize) -> &str {
        &self.words[col]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn col(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Distinct unigrams across all posts, sorted lexicographically. Posts
/// must already be PII-stripped (stopwords were removed there).
pub fn build_vocab<S: AsRef<str>>(posts: &[Vec<S>]) -> Result<Vocabulary> {
    let mut set = BTreeSet::new();
    for post in posts {
        for token in post {
            set.insert(token.as_ref().to_string());
        }
    }
    if set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Vocabulary::from_words(set.into_iter().collect())
}

/// TF-IDF weighting of every post over the given vocabulary:
/// X[l][t] = count(t in post l) * ln(M / n_t), with M the corpus post count
/// and n_t the number of posts containing t. Tokens outside the vocabulary
/// are skipped. Errors if some vocabulary word never occurs (n_t = 0).
pub fn tfidf<S: AsRef<str>>(
    posts: &[Vec<S>],
    vocab: &Vocabulary,
) -> Result<(PostWordMatrix, CorpusStats)> {
    let m = posts.len();
    let mut doc_freq = vec![0u32; vocab.len()];
    let mut post_cols: Vec<Vec<usize>> = Vec::with_capacity(m);
    for post in posts {
        let mut cols: Vec<usize> = post
            .iter()
            .filter_map(|t| vocab.col(t.as_ref()))
            .collect();
        cols.sort_unstable();
        let mut seen = cols.clone();
        seen.dedup();
        for &c in &seen {
            doc_freq[c] += 1;
        }
        post_cols.push(cols);
    }
    if let Some(col) = doc_freq.iter().position(|&n| n == 0) {
        return Err(Error::Invalid(format!(
            "vocabulary word '{}' does not occur in the corpus (n_t = 0)",
            vocab.word(col)
        )));
    }

    let stats = CorpusStats {
        n_posts: m,
        doc_freq,
    };
    let rows = post_cols
        .into_iter()
        .map(|cols| row_from_sorted_cols(&cols, &stats))
        .collect();
    Ok((
        PostWordMatrix::Sparse {
            n_cols: vocab.len(),
            rows,
        },
        stats,
    ))
}

fn row_from_sorted_cols(cols: &[usize], stats: &CorpusStats) -> SparseVector {
    let m = stats.n_posts as f64;
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    let mut i = 0;
    while i < cols.len() {
        let c = cols[i];
        let mut count = 0usize;
        while i < cols.len() && cols[i] == c {
            count += 1;
            i += 1;
        }
        let weight = count as f64 * (m / stats.doc_freq[c] as f64).ln();
        pairs.push((c, weight));
    }
    SparseVector::from_pairs(pairs)
}

/// Vectorizes an attack-side document with the *released* corpus
/// statistics, so both sides share IDF weights. Unknown words are dropped.
pub fn vectorize_document<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    stats: &CorpusStats,
) -> SparseVector {
    let mut cols: Vec<usize> = tokens
        .iter()
        .filter_map(|t| vocab.col(t.as_ref()))
        .collect();
    cols.sort_unstable();
    row_from_sorted_cols(&cols, stats)
}

/// Builds W for a network: rows are users in canonical order, columns are
/// posts ordered by (user, recency). Exactly one 1 per column.
pub fn build_user_post_matrix(network: &SocialNetwork) -> UserPostMatrix {
    let row_of: BTreeMap<UserId, u32> = network
        .users()
        .enumerate()
        .map(|(i, id)| (id, i as u32))
        .collect();
    let mut author_row = Vec::with_capacity(network.n_posts());
    for user in network.users() {
        for _ in network.posts_of(user) {
            author_row.push(row_of[&user]);
        }
    }
    UserPostMatrix::new(network.n_users(), author_row).expect("rows derived from the same ordering")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Post;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn strip_pii_removes_mentions_and_urls() {
        let p = Preprocessor::with_stopwords(["the".to_string()]);
        assert_eq!(
            p.strip_pii("@bob check https://x.co now"),
            toks(&["check", "now"])
        );
        assert_eq!(p.strip_pii(""), Vec::<String>::new());
    }

    #[test]
    fn strip_pii_handles_punctuation_case_and_usernames() {
        let mut p = Preprocessor::with_stopwords(["and".to_string()]);
        p.add_usernames(["karla99"]);
        assert_eq!(
            p.strip_pii("Karla99 said: Hello, WORLD and www.spam.io!"),
            toks(&["said", "hello", "world"])
        );
    }

    #[test]
    fn build_vocab_sorted_union() {
        let posts = vec![toks(&["a", "b"]), toks(&["b", "c"])];
        let v = build_vocab(&posts).unwrap();
        assert_eq!(v.words(), &["a", "b", "c"]);
        assert_eq!(v.col("c"), Some(2));
    }

    #[test]
    fn build_vocab_empty_corpus_errors() {
        let posts: Vec<Vec<String>> = vec![vec![], vec![]];
        assert!(matches!(build_vocab(&posts), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn tfidf_hand_computed_two_posts() {
        // posts: [x x y], [y]; M=2, n_x=1, n_y=2
        let posts = vec![toks(&["x", "x", "y"]), toks(&["y"])];
        let vocab = build_vocab(&posts).unwrap();
        let (x, stats) = tfidf(&posts, &vocab).unwrap();
        let cx = vocab.col("x").unwrap();
        let cy = vocab.col("y").unwrap();
        assert!((x.get(0, cx) - 2.0 * (2.0f64).ln()).abs() < 1e-15);
        assert_eq!(x.get(0, cy), 0.0);
        assert_eq!(x.get(1, cy), 0.0);
        assert_eq!(stats.doc_freq[cx], 1);
        assert_eq!(stats.doc_freq[cy], 2);
    }

    #[test]
    fn word_in_every_post_gets_zero_column() {
        let posts = vec![toks(&["w", "a"]), toks(&["w", "b"]), toks(&["w"])];
        let vocab = build_vocab(&posts).unwrap();
        let (x, _) = tfidf(&posts, &vocab).unwrap();
        let cw = vocab.col("w").unwrap();
        for row in 0..3 {
            assert_eq!(x.get(row, cw), 0.0);
        }
    }

    #[test]
    fn tfidf_rejects_unused_vocab_word() {
        let posts = vec![toks(&["a"])];
        let vocab = Vocabulary::from_words(vec!["a".into(), "ghost".into()]).unwrap();
        assert!(tfidf(&posts, &vocab).is_err());
    }

    #[test]
    fn tfidf_deterministic() {
        let posts = vec![toks(&["p", "q", "p"]), toks(&["q", "r"])];
        let vocab = build_vocab(&posts).unwrap();
        let (x1, _) = tfidf(&posts, &vocab).unwrap();
        let (x2, _) = tfidf(&posts, &vocab).unwrap();
        assert_eq!(x1, x2);
    }

    #[test]
    fn user_post_matrix_single_user() {
        let mut n = SocialNetwork::new();
        n.add_user(UserId(5));
        for _ in 0..2 {
            n.add_post(Post {
                author: UserId(5),
                tokens: toks(&["hi"]),
                raw: None,
            })
            .unwrap();
        }
        let w = build_user_post_matrix(&n);
        assert_eq!(w.n_users(), 1);
        assert_eq!(w.n_posts(), 2);
        assert_eq!(w.get(0, 0), 1);
        assert_eq!(w.get(0, 1), 1);
    }
}
