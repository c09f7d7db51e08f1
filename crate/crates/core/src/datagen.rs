//! Synthetic social network generator.
//!
//! Produces a directed preferential-attachment graph with homophilous
//! edges (same-topic users attract) and topic-driven posts with a Zipf
//! word distribution per topic. Each user additionally owns a couple of
//! rare "signature" words from their topic's tail, so text carries both
//! shared topical vocabulary and identity-revealing rare words. Raw post
//! text is salted with PII-shaped tokens (mentions, URLs, bare handles)
//! and stoplist filler so that PII stripping has real work to do.
//!
//! Generation is single-threaded on one sequential RNG stream: the same
//! seed yields byte-identical networks.

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Post, SocialNetwork, UserId};
use crate::seed::rng_from_seed;
use crate::text::Preprocessor;

/// Probability that a post carries one of its author's signature words.
const SIGNATURE_RATE: f64 = 0.45;
/// Zipf exponent for within-topic word ranks.
const ZIPF_EXPONENT: f64 = 1.1;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub n_users: usize,
    /// Preferential-attachment out-links per new node.
    pub m_attach: usize,
    pub n_topics: usize,
    pub vocab_size: usize,
    /// Inclusive [min, max] posts per user; min must be >= 1.
    pub posts_per_user: [usize; 2],
    /// Inclusive [min, max] content words per post.
    pub words_per_post: [usize; 2],
    /// How strongly a user sticks to its topic vocabulary; the per-token
    /// probability of drawing from the topic is c / (c + 1).
    pub topic_mix_concentration: f64,
    /// Probability a new edge targets a same-topic user before falling
    /// back to degree-proportional choice over everyone.
    pub homophily_strength: f64,
    pub rng_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            m_attach: 3,
            n_topics: 5,
            vocab_size: 4000,
            posts_per_user: [3, 8],
            words_per_post: [6, 12],
            topic_mix_concentration: 8.0,
            homophily_strength: 0.7,
            rng_seed: 7,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 1 {
            return Err(Error::Config("n_users must be >= 1".into()));
        }
        if self.n_topics < 1 {
            return Err(Error::Config("n_topics must be >= 1".into()));
        }
        if self.posts_per_user[0] < 1 || self.posts_per_user[0] > self.posts_per_user[1] {
            return Err(Error::Config(
                "posts_per_user must be an ordered range with min >= 1".into(),
            ));
        }
        if self.words_per_post[0] < 1 || self.words_per_post[0] > self.words_per_post[1] {
            return Err(Error::Config(
                "words_per_post must be an ordered range with min >= 1".into(),
            ));
        }
        if self.vocab_size < self.words_per_post[1] {
            return Err(Error::Config(format!(
                "vocab_size {} is smaller than words_per_post.max {}",
                self.vocab_size, self.words_per_post[1]
            )));
        }
        if self.vocab_size < self.n_topics * 8 {
            return Err(Error::Config(
                "vocab_size must allow at least 8 words per topic".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.homophily_strength) {
            return Err(Error::Config("homophily_strength must be in [0, 1]".into()));
        }
        if self.topic_mix_concentration <= 0.0 {
            return Err(Error::Config(
                "topic_mix_concentration must be positive".into(),
            ));
        }
        Ok(())
    }
}

const CONSONANTS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "st",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn syllable(i: usize) -> String {
    let n = CONSONANTS.len() * VOWELS.len();
    let i = i % n;
    format!("{}{}", CONSONANTS[i / VOWELS.len()], VOWELS[i % VOWELS.len()])
}

/// Deterministic layout of the generator vocabulary: which word string a
/// vocabulary index maps to and which index range belongs to each topic.
#[derive(Clone, Debug)]
pub struct VocabLayout {
    pub vocab_size: usize,
    pub n_topics: usize,
}

impl VocabLayout {
    pub fn new(cfg: &GenConfig) -> Self {
        Self {
            vocab_size: cfg.vocab_size,
            n_topics: cfg.n_topics,
        }
    }

    /// Word string for a vocabulary index. Indices are scrambled with a
    /// multiplicative bijection so word strings do not cluster by topic.
    pub fn word(&self, index: usize) -> String {
        debug_assert!(index < self.vocab_size);
        let scrambled = (index as u64).wrapping_mul(0x9E37_79B1) % self.vocab_size as u64;
        let n = scrambled as usize;
        let base = CONSONANTS.len() * VOWELS.len();
        let mut w = String::new();
        w.push_str(&syllable(n % base));
        w.push_str(&syllable((n / base) % base));
        w.push_str(&syllable(n / (base * base) + 1));
        w
    }

    pub fn words_per_topic(&self) -> usize {
        self.vocab_size / self.n_topics
    }

    /// Index range owned by a topic. The trailing remainder of the vocab
    /// belongs to no topic and is only reachable via the global mix.
    pub fn topic_range(&self, topic: usize) -> std::ops::Range<usize> {
        let per = self.words_per_topic();
        topic * per..(topic + 1) * per
    }

    /// The rare half of a topic's range, used for signature words.
    fn topic_tail(&self, topic: usize) -> std::ops::Range<usize> {
        let r = self.topic_range(topic);
        (r.start + (r.end - r.start) / 2)..r.end
    }

    /// The two signature word indices of the `rank`-th user of a topic.
    pub fn signature_indices(&self, topic: usize, rank: usize) -> [usize; 2] {
        let tail = self.topic_tail(topic);
        let len = tail.len().max(1);
        [
            tail.start + (rank * 2) % len,
            tail.start + (rank * 2 + 1) % len,
        ]
    }

    pub fn handle(&self, user: usize) -> String {
        let base = CONSONANTS.len() * VOWELS.len();
        let scrambled = (user as u64).wrapping_mul(0x85EB_CA6B) as usize;
        format!(
            "{}{}{:03}",
            syllable(scrambled % base),
            syllable((scrambled / base) % base),
            user % 1000
        )
    }
}

struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    fn new(len: usize) -> Self {
        let mut cumulative = Vec::with_capacity(len);
        let mut acc = 0.0;
        for rank in 0..len {
            acc += 1.0 / ((rank + 1) as f64).powf(ZIPF_EXPONENT);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c < x)
    }
}

fn range_sample(rng: &mut impl Rng, range: [usize; 2]) -> usize {
    rng.random_range(range[0]..=range[1])
}

/// Weighted pick proportional to (total degree + 1) over the allowed
/// candidate indices. Returns None if `allowed` is empty.
fn degree_proportional_pick(
    rng: &mut impl Rng,
    degrees: &[usize],
    allowed: &[usize],
) -> Option<usize> {
    if allowed.is_empty() {
        return None;
    }
    let total: usize = allowed.iter().map(|&v| degrees[v] + 1).sum();
    let mut x = rng.random_range(0..total);
    for &v in allowed {
        let w = degrees[v] + 1;
        if x < w {
            return Some(v);
        }
        x -= w;
    }
    None
}

/// Generates a network plus the per-user topic assignment. The topic
/// assignment is diagnostic metadata and is never part of any release.
pub fn generate(cfg: &GenConfig) -> Result<(SocialNetwork, Vec<usize>)> {
    cfg.validate()?;
    let layout = VocabLayout::new(cfg);
    let mut rng = rng_from_seed(cfg.rng_seed);

    let mut network = SocialNetwork::new();
    network.set_stoplist("synthetic");

    let topics: Vec<usize> = (0..cfg.n_users)
        .map(|_| rng.random_range(0..cfg.n_topics))
        .collect();
    let mut topic_rank = vec![0usize; cfg.n_users];
    let mut seen_per_topic = vec![0usize; cfg.n_topics];
    for u in 0..cfg.n_users {
        topic_rank[u] = seen_per_topic[topics[u]];
        seen_per_topic[topics[u]] += 1;
    }

    for u in 0..cfg.n_users {
        network.add_user(UserId(u as u64));
        network.set_handle(UserId(u as u64), layout.handle(u))?;
    }

    // Directed preferential attachment with a homophily shortcut: each new
    // node links to m distinct earlier nodes, preferring same-topic ones
    // with probability homophily_strength.
    let mut total_degree = vec![0usize; cfg.n_users];
    let mut per_topic_nodes: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_topics];
    for v in 0..cfg.n_users {
        let m = cfg.m_attach.min(v);
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        for _ in 0..m {
            let mut pick = None;
            for _attempt in 0..16 {
                let use_topic = rng.random::<f64>() < cfg.homophily_strength;
                let candidate = if use_topic {
                    let same: Vec<usize> = per_topic_nodes[topics[v]]
                        .iter()
                        .copied()
                        .filter(|t| !chosen.contains(t))
                        .collect();
                    degree_proportional_pick(&mut rng, &total_degree, &same).or_else(|| {
                        let all: Vec<usize> =
                            (0..v).filter(|t| !chosen.contains(t)).collect();
                        degree_proportional_pick(&mut rng, &total_degree, &all)
                    })
                } else {
                    let all: Vec<usize> = (0..v).filter(|t| !chosen.contains(t)).collect();
                    degree_proportional_pick(&mut rng, &total_degree, &all)
                };
                if candidate.is_some() {
                    pick = candidate;
                    break;
                }
            }
            let Some(t) = pick else { break };
            chosen.push(t);
            network.add_edge(UserId(v as u64), UserId(t as u64))?;
            total_degree[v] += 1;
            total_degree[t] += 1;
        }
        per_topic_nodes[topics[v]].push(v);
    }

    let zipf = ZipfTable::new(layout.words_per_topic());
    let topic_prob = cfg.topic_mix_concentration / (cfg.topic_mix_concentration + 1.0);
    let preproc = {
        let mut p = Preprocessor::new("synthetic")?;
        p.add_usernames((0..cfg.n_users).map(|u| layout.handle(u)).collect::<Vec<_>>().iter().map(String::as_str));
        p
    };
    let fillers: Vec<&str> = vec!["the", "and", "of", "to", "in", "is", "was", "for", "with", "on"];

    for u in 0..cfg.n_users {
        let n_posts = range_sample(&mut rng, cfg.posts_per_user);
        let signature = layout.signature_indices(topics[u], topic_rank[u]);
        for _ in 0..n_posts {
            let n_words = range_sample(&mut rng, cfg.words_per_post);
            let mut content: Vec<String> = Vec::with_capacity(n_words);
            let sig_here = rng.random::<f64>() < SIGNATURE_RATE;
            for slot in 0..n_words {
                let index = if sig_here && slot == 0 {
                    signature[rng.random_range(0..2)]
                } else if rng.random::<f64>() < topic_prob {
                    layout.topic_range(topics[u]).start + zipf.sample(&mut rng)
                } else {
                    rng.random_range(0..cfg.vocab_size)
                };
                content.push(layout.word(index));
            }

            let raw = assemble_raw(&mut rng, &network, u, &content, &fillers, &layout);
            let tokens = preproc.strip_pii(&raw);
            debug_assert_eq!(tokens, content, "raw assembly must strip back to content");
            network.add_post(Post {
                author: UserId(u as u64),
                tokens,
                raw: Some(raw),
            })?;
        }
    }

    Ok((network, topics))
}

/// Assembles raw post text around the content words: random casing and
/// punctuation, stoplist filler, and PII-shaped tokens (mentions of a
/// neighbor's handle, short URLs, bare handles).
fn assemble_raw(
    rng: &mut impl Rng,
    network: &SocialNetwork,
    author: usize,
    content: &[String],
    fillers: &[&str],
    layout: &VocabLayout,
) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(content.len() * 2 + 4);

    if rng.random::<f64>() < 0.3 {
        let target = network
            .out_neighbors(UserId(author as u64))
            .next()
            .map(|n| n.0 as usize)
            .unwrap_or(author);
        parts.push(format!("@{}", layout.handle(target)));
    }

    for word in content {
        if rng.random::<f64>() < 0.35 {
            parts.push(fillers[rng.random_range(0..fillers.len())].to_string());
        }
        let mut w = word.clone();
        if rng.random::<f64>() < 0.12 {
            w = capitalize(&w);
        }
        if rng.random::<f64>() < 0.2 {
            w.push(match rng.random_range(0..3) {
                0 => '.',
                1 => ',',
                _ => '!',
            });
        }
        parts.push(w);
    }

    if rng.random::<f64>() < 0.2 {
        let tag: String = (0..4)
            .map(|_| {
                let c = rng.random_range(0..36u32);
                char::from_digit(c % 10, 10).unwrap_or(char::from(b'a' + (c % 26) as u8))
            })
            .collect();
        parts.push(format!("https://sho.rt/{tag}"));
    }
    if rng.random::<f64>() < 0.15 {
        parts.push(layout.handle(rng.random_range(0..network.n_users())));
    }

    parts.join(" ")
}

fn capitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{degree_sequence, save_network, Direction};

    fn small_cfg() -> GenConfig {
        GenConfig {
            n_users: 60,
            m_attach: 2,
            n_topics: 3,
            vocab_size: 600,
            posts_per_user: [2, 4],
            words_per_post: [4, 8],
            topic_mix_concentration: 8.0,
            homophily_strength: 0.6,
            rng_seed: 11,
        }
    }

    #[test]
    fn single_user_network() {
        let cfg = GenConfig {
            n_users: 1,
            ..small_cfg()
        };
        let (net, topics) = generate(&cfg).unwrap();
        assert_eq!(net.n_users(), 1);
        assert_eq!(net.n_edges(), 0);
        assert!(!net.posts_of(UserId(0)).is_empty());
        assert_eq!(topics.len(), 1);
    }

    #[test]
    fn same_seed_gives_byte_identical_networks() {
        let cfg = small_cfg();
        let (a, _) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg).unwrap();
        assert_eq!(a, b);

        let dir = std::env::temp_dir().join("athd-datagen-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let (pa, pb) = (dir.join("a.sn"), dir.join("b.sn"));
        save_network(&a, &pa).unwrap();
        save_network(&b, &pb).unwrap();
        assert_eq!(
            std::fs::read(&pa).unwrap(),
            std::fs::read(&pb).unwrap()
        );
    }

    #[test]
    fn degenerate_config_is_rejected() {
        let cfg = GenConfig {
            vocab_size: 5,
            ..small_cfg()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn every_user_has_a_post_and_graph_is_simple() {
        let (net, _) = generate(&small_cfg()).unwrap();
        for u in net.users() {
            assert!(!net.posts_of(u).is_empty(), "user {u} has no posts");
        }
        for &(a, b) in net.edges() {
            assert_ne!(a, b);
        }
    }

    fn same_topic_fraction(cfg: &GenConfig) -> f64 {
        let (net, topics) = generate(cfg).unwrap();
        let same = net
            .edges()
            .iter()
            .filter(|&&(a, b)| topics[a.0 as usize] == topics[b.0 as usize])
            .count();
        same as f64 / net.n_edges() as f64
    }

    #[test]
    fn homophily_raises_same_topic_edge_fraction() {
        let base = GenConfig {
            n_users: 500,
            vocab_size: 3000,
            n_topics: 4,
            rng_seed: 5,
            ..small_cfg()
        };
        let with = same_topic_fraction(&GenConfig {
            homophily_strength: 0.8,
            ..base.clone()
        });
        let without = same_topic_fraction(&GenConfig {
            homophily_strength: 0.0,
            ..base
        });
        assert!(
            with > without,
            "homophilous fraction {with} should exceed baseline {without}"
        );
    }

    #[test]
    fn degree_distribution_is_heavy_tailed() {
        let cfg = GenConfig {
            n_users: 300,
            rng_seed: 3,
            ..small_cfg()
        };
        let (net, _) = generate(&cfg).unwrap();
        let mut totals: Vec<usize> = degree_sequence(&net, Direction::In)
            .iter()
            .zip(degree_sequence(&net, Direction::Out))
            .map(|(i, o)| i + o)
            .collect();
        totals.sort_unstable();
        let median = totals[totals.len() / 2];
        let max = *totals.last().unwrap();
        assert!(
            max > 3 * median,
            "max total degree {max} should exceed 3x median {median}"
        );
    }

    #[test]
    fn tokens_are_predominantly_topical() {
        let cfg = GenConfig {
            topic_mix_concentration: 10.0,
            ..small_cfg()
        };
        let (net, topics) = generate(&cfg).unwrap();
        let layout = VocabLayout::new(&cfg);
        let topic_words: Vec<std::collections::HashSet<String>> = (0..cfg.n_topics)
            .map(|t| layout.topic_range(t).map(|i| layout.word(i)).collect())
            .collect();
        let mut topical = 0usize;
        let mut total = 0usize;
        for u in net.users() {
            let t = topics[u.0 as usize];
            for post in net.posts_of(u) {
                for tok in &post.tokens {
                    total += 1;
                    if topic_words[t].contains(tok) {
                        topical += 1;
                    }
                }
            }
        }
        assert!(
            topical as f64 > 0.5 * total as f64,
            "only {topical}/{total} tokens were topical"
        );
    }

    #[test]
    fn raw_text_carries_pii_that_strips_away() {
        let (net, _) = generate(&small_cfg()).unwrap();
        let mut saw_mention = false;
        let mut saw_url = false;
        for u in net.users() {
            for post in net.posts_of(u) {
                let raw = post.raw.as_ref().unwrap();
                saw_mention |= raw.split_whitespace().any(|t| t.starts_with('@'));
                saw_url |= raw.contains("https://");
                for tok in &post.tokens {
                    assert!(!tok.starts_with('@'));
                    assert!(!tok.contains("://"));
                }
            }
        }
        assert!(saw_mention, "generator never injected a mention");
        assert!(saw_url, "generator never injected a URL");
    }
}
