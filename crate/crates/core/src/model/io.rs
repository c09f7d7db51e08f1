//! Line-oriented on-disk formats for networks, releases and ground truth.
//!
//! The formats are plain text for diffability; reals are printed with
//! Rust's shortest round-trip representation so save/load is bit-exact.
//! The exact grammar lives in `docs/formats.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    AnonymizedDataset, CorpusStats, GroundTruth, Post, SocialNetwork, UserId, UserPostMatrix,
};
use crate::text::{Preprocessor, Vocabulary};
use crate::vector::{PostWordMatrix, SparseVector};

pub const FORMAT_VERSION: u32 = 1;

struct LineCursor<R: BufRead> {
    reader: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> LineCursor<R> {
    fn new(reader: R) -> Self {
        Self {
            reader: reader.lines(),
            line_no: 0,
        }
    }

    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.reader.next() {
            Some(Ok(line)) => Ok(line),
            Some(Err(e)) => Err(e.into()),
            None => Err(Error::parse(self.line_no, "unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line_no, msg)
    }

    fn expect_header(&mut self, magic: &str) -> Result<()> {
        let line = self.next_line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(magic) {
            return Err(self.err(format!("expected '{magic}' header")));
        }
        let version: u32 = self.parse_field(it.next(), "format version")?;
        if version != FORMAT_VERSION {
            return Err(self.err(format!("unsupported format version {version}")));
        }
        Ok(())
    }

    fn expect_section(&mut self, name: &str) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(name) {
            return Err(self.err(format!("expected '{name}' section")));
        }
        Ok(it.map(str::to_string).collect())
    }

    fn parse_field<T: std::str::FromStr>(&self, field: Option<&str>, what: &str) -> Result<T> {
        field
            .ok_or_else(|| self.err(format!("missing {what}")))?
            .parse()
            .map_err(|_| self.err(format!("malformed {what}")))
    }
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open_cursor(path: &Path) -> Result<LineCursor<BufReader<File>>> {
    Ok(LineCursor::new(BufReader::new(File::open(path)?)))
}

/// Writes a social network (the un-anonymized target). Raw post text is
/// stored; tokens are reproduced at load time from the named stoplist and
/// the handle dictionary.
pub fn save_network(network: &SocialNetwork, path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "socialnet {FORMAT_VERSION}")?;
    writeln!(w, "stoplist {}", network.stoplist())?;
    writeln!(w, "users {}", network.n_users())?;
    for user in network.users() {
        writeln!(w, "{} {}", user, network.handle_of(user).unwrap_or("-"))?;
    }
    writeln!(w, "edges {}", network.n_edges())?;
    for &(a, b) in network.edges() {
        writeln!(w, "{a} {b}")?;
    }
    writeln!(w, "posts {}", network.n_posts())?;
    for user in network.users() {
        for post in network.posts_of(user) {
            let text = match &post.raw {
                Some(raw) => raw.clone(),
                None => post.tokens.join(" "),
            };
            writeln!(w, "{user}\t{text}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<SocialNetwork> {
    let mut c = open_cursor(path)?;
    c.expect_header("socialnet")?;

    let args = c.expect_section("stoplist")?;
    let stoplist = args
        .first()
        .ok_or_else(|| c.err("missing stoplist name"))?
        .clone();

    let mut network = SocialNetwork::new();
    network.set_stoplist(&stoplist);

    let args = c.expect_section("users")?;
    let n_users: usize = c.parse_field(args.first().map(String::as_str), "user count")?;
    for _ in 0..n_users {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let id: u64 = c.parse_field(it.next(), "user id")?;
        let handle = it.next().ok_or_else(|| c.err("missing handle field"))?;
        network.add_user(UserId(id));
        if handle != "-" {
            network
                .set_handle(UserId(id), handle)
                .map_err(|e| c.err(e.to_string()))?;
        }
    }

    let args = c.expect_section("edges")?;
    let n_edges: usize = c.parse_field(args.first().map(String::as_str), "edge count")?;
    for _ in 0..n_edges {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let a: u64 = c.parse_field(it.next(), "edge source")?;
        let b: u64 = c.parse_field(it.next(), "edge target")?;
        network
            .add_edge(UserId(a), UserId(b))
            .map_err(|e| c.err(e.to_string()))?;
    }

    let preproc = Preprocessor::for_network(&network).map_err(|e| c.err(e.to_string()))?;
    let args = c.expect_section("posts")?;
    let n_posts: usize = c.parse_field(args.first().map(String::as_str), "post count")?;
    for _ in 0..n_posts {
        let line = c.next_line()?;
        let (author_str, raw) = line
            .split_once('\t')
            .ok_or_else(|| c.err("post line must be '<author>\\t<text>'"))?;
        let author: u64 = c.parse_field(Some(author_str.trim()), "post author")?;
        let tokens = preproc.strip_pii(raw);
        network
            .add_post(Post {
                author: UserId(author),
                tokens,
                raw: Some(raw.to_string()),
            })
            .map_err(|e| c.err(e.to_string()))?;
    }
    Ok(network)
}

/// Writes an anonymized release: pseudonyms, edges, vocabulary with
/// document frequencies, the W author map and the X matrix as
/// (row, col, value) triplets.
pub fn save_dataset(dataset: &AnonymizedDataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut w = open_writer(path)?;
    writeln!(w, "anonnet {FORMAT_VERSION}")?;
    writeln!(w, "users {}", dataset.users.len())?;
    for user in &dataset.users {
        writeln!(w, "{user}")?;
    }
    writeln!(w, "edges {}", dataset.edges.len())?;
    for &(a, b) in &dataset.edges {
        writeln!(w, "{a} {b}")?;
    }
    writeln!(
        w,
        "vocab {} posts {}",
        dataset.vocab.len(),
        dataset.stats.n_posts
    )?;
    for (word, df) in dataset.vocab.words().iter().zip(&dataset.stats.doc_freq) {
        writeln!(w, "{word} {df}")?;
    }
    writeln!(w, "authors {}", dataset.user_post.n_posts())?;
    for post in 0..dataset.user_post.n_posts() {
        writeln!(w, "{post} {}", dataset.user_post.author_of(post))?;
    }
    match &dataset.post_word {
        PostWordMatrix::Sparse { rows, .. } => {
            let nnz: usize = rows.iter().map(SparseVector::nnz).sum();
            writeln!(w, "matrix sparse {nnz}")?;
            for (r, row) in rows.iter().enumerate() {
                for (col, value) in row.iter() {
                    writeln!(w, "{r} {col} {value}")?;
                }
            }
        }
        PostWordMatrix::Dense { n_cols, rows } => {
            writeln!(w, "matrix dense {}", rows.len() * n_cols)?;
            for (r, row) in rows.iter().enumerate() {
                for (col, value) in row.iter().enumerate() {
                    writeln!(w, "{r} {col} {value}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<AnonymizedDataset> {
    let mut c = open_cursor(path)?;
    c.expect_header("anonnet")?;

    let args = c.expect_section("users")?;
    let n_users: usize = c.parse_field(args.first().map(String::as_str), "user count")?;
    let mut users = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let line = c.next_line()?;
        let id: u64 = c.parse_field(Some(line.trim()), "user id")?;
        users.push(UserId(id));
    }
    if users.windows(2).any(|w| w[0] >= w[1]) {
        return Err(c.err("release users must be sorted and unique"));
    }

    let args = c.expect_section("edges")?;
    let n_edges: usize = c.parse_field(args.first().map(String::as_str), "edge count")?;
    let mut edges = BTreeSet::new();
    for _ in 0..n_edges {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let a: u64 = c.parse_field(it.next(), "edge source")?;
        let b: u64 = c.parse_field(it.next(), "edge target")?;
        edges.insert((UserId(a), UserId(b)));
    }

    let args = c.expect_section("vocab")?;
    let n_words: usize = c.parse_field(args.first().map(String::as_str), "vocab size")?;
    if args.get(1).map(String::as_str) != Some("posts") {
        return Err(c.err("expected 'vocab <n> posts <m>'"));
    }
    let n_posts: usize = c.parse_field(args.get(2).map(String::as_str), "post count")?;
    let mut words = Vec::with_capacity(n_words);
    let mut doc_freq = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let word = it.next().ok_or_else(|| c.err("missing vocab word"))?;
        let df: u32 = c.parse_field(it.next(), "document frequency")?;
        words.push(word.to_string());
        doc_freq.push(df);
    }
    let vocab = Vocabulary::from_words(words).map_err(|e| c.err(e.to_string()))?;

    let args = c.expect_section("authors")?;
    let n_author_rows: usize = c.parse_field(args.first().map(String::as_str), "author count")?;
    if n_author_rows != n_posts {
        return Err(c.err("author section size does not match post count"));
    }
    let mut author_row = vec![0u32; n_posts];
    for _ in 0..n_posts {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let post: usize = c.parse_field(it.next(), "post index")?;
        let row: u32 = c.parse_field(it.next(), "author row")?;
        if post >= n_posts {
            return Err(c.err(format!("post index {post} out of range")));
        }
        author_row[post] = row;
    }
    let user_post = UserPostMatrix::new(n_users, author_row).map_err(|e| c.err(e.to_string()))?;

    let args = c.expect_section("matrix")?;
    let kind = args.first().map(String::as_str);
    let n_entries: usize = c.parse_field(args.get(1).map(String::as_str), "entry count")?;
    let post_word = match kind {
        Some("sparse") => {
            let mut pairs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_posts];
            for _ in 0..n_entries {
                let line = c.next_line()?;
                let mut it = line.split_whitespace();
                let row: usize = c.parse_field(it.next(), "matrix row")?;
                let col: usize = c.parse_field(it.next(), "matrix column")?;
                let value: f64 = c.parse_field(it.next(), "matrix value")?;
                if row >= n_posts || col >= n_words {
                    return Err(c.err(format!("matrix entry ({row}, {col}) out of range")));
                }
                pairs[row].push((col, value));
            }
            PostWordMatrix::Sparse {
                n_cols: n_words,
                rows: pairs.into_iter().map(SparseVector::from_pairs).collect(),
            }
        }
        Some("dense") => {
            if n_entries != n_posts * n_words {
                return Err(c.err("dense matrix must enumerate every cell"));
            }
            let mut rows = vec![vec![0.0f64; n_words]; n_posts];
            for _ in 0..n_entries {
                let line = c.next_line()?;
                let mut it = line.split_whitespace();
                let row: usize = c.parse_field(it.next(), "matrix row")?;
                let col: usize = c.parse_field(it.next(), "matrix column")?;
                let value: f64 = c.parse_field(it.next(), "matrix value")?;
                if row >= n_posts || col >= n_words {
                    return Err(c.err(format!("matrix entry ({row}, {col}) out of range")));
                }
                rows[row][col] = value;
            }
            PostWordMatrix::Dense {
                n_cols: n_words,
                rows,
            }
        }
        _ => return Err(c.err("matrix kind must be 'sparse' or 'dense'")),
    };

    let dataset = AnonymizedDataset {
        users,
        edges,
        post_word,
        user_post,
        vocab,
        stats: CorpusStats { n_posts, doc_freq },
    };
    dataset.validate().map_err(|e| match e {
        Error::Invalid(msg) => c.err(msg),
        other => other,
    })?;
    Ok(dataset)
}

/// Writes the pseudonym -> true identity sidecar.
pub fn save_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "truth {FORMAT_VERSION}")?;
    writeln!(w, "map {}", truth.len())?;
    for (pseudonym, real) in truth.iter() {
        writeln!(w, "{pseudonym} {real}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    let mut c = open_cursor(path)?;
    c.expect_header("truth")?;
    let args = c.expect_section("map")?;
    let n: usize = c.parse_field(args.first().map(String::as_str), "mapping count")?;
    let mut map = BTreeMap::new();
    for _ in 0..n {
        let line = c.next_line()?;
        let mut it = line.split_whitespace();
        let pseudonym: u64 = c.parse_field(it.next(), "pseudonym")?;
        let real: u64 = c.parse_field(it.next(), "true id")?;
        map.insert(UserId(pseudonym), UserId(real));
    }
    GroundTruth::new(map)
}
