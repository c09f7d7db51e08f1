//! Sparse vectors and the post-word matrix.
//!
//! TF-IDF rows are sparse and non-negative; rows that went through the
//! Laplace mechanism are dense and may be negative. `PostWordMatrix`
//! carries both forms behind one interface so the attack code does not
//! care which anonymization produced the release.

/// Sparse real vector over vocabulary columns, sorted by column index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from unordered (column, weight) pairs; weights on the same
    /// column are summed, exact zeros are dropped.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(c, _)| c);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (c, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == c => last.1 += w,
                _ => entries.push((c, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        Self { entries }
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.entries.binary_search_by_key(&col, |&(c, _)| c) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn add_assign(&mut self, other: &SparseVector) {
        if other.entries.is_empty() {
            return;
        }
        let mut merged = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, wa) = self.entries[i];
            let (cb, wb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => {
                    merged.push((ca, wa));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push((cb, wb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let w = wa + wb;
                    if w != 0.0 {
                        merged.push((ca, w));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.entries[i..]);
        merged.extend_from_slice(&other.entries[j..]);
        self.entries = merged;
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (short, long) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        // Merge when sizes are comparable, probe when one side is tiny.
        if long.nnz() > 8 * short.nnz() {
            short.iter().map(|(c, w)| w * long.get(c)).sum()
        } else {
            let mut acc = 0.0;
            let (mut i, mut j) = (0, 0);
            while i < short.entries.len() && j < long.entries.len() {
                let (ca, wa) = short.entries[i];
                let (cb, wb) = long.entries[j];
                match ca.cmp(&cb) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        acc += wa * wb;
                        i += 1;
                        j += 1;
                    }
                }
            }
            acc
        }
    }

    /// L1 distance, treating missing columns as zero.
    pub fn l1_distance(&self, other: &SparseVector) -> f64 {
        let mut acc = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, wa) = self.entries[i];
            let (cb, wb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => {
                    acc += wa.abs();
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    acc += wb.abs();
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    acc += (wa - wb).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        acc += self.entries[i..].iter().map(|&(_, w)| w.abs()).sum::<f64>();
        acc += other.entries[j..].iter().map(|&(_, w)| w.abs()).sum::<f64>();
        acc
    }
}

/// Borrowed view of one matrix row.
#[derive(Clone, Copy)]
pub enum RowRef<'a> {
    Sparse(&'a SparseVector),
    Dense(&'a [f64]),
}

impl<'a> RowRef<'a> {
    pub fn get(&self, col: usize) -> f64 {
        match self {
            RowRef::Sparse(v) => v.get(col),
            RowRef::Dense(v) => v[col],
        }
    }

    pub fn sum(&self) -> f64 {
        match self {
            RowRef::Sparse(v) => v.sum(),
            RowRef::Dense(v) => v.iter().sum(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            RowRef::Sparse(v) => v.norm(),
            RowRef::Dense(v) => v.iter().map(|w| w * w).sum::<f64>().sqrt(),
        }
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        match self {
            RowRef::Sparse(v) => v.dot(other),
            RowRef::Dense(v) => other.iter().map(|(c, w)| w * v[c]).sum(),
        }
    }

    /// Materializes the row as a `SparseVector` (dense rows keep every
    /// non-zero coordinate).
    pub fn to_sparse(&self) -> SparseVector {
        match self {
            RowRef::Sparse(v) => (*v).clone(),
            RowRef::Dense(v) => SparseVector::from_pairs(
                v.iter()
                    .enumerate()
                    .filter(|&(_, w)| *w != 0.0)
                    .map(|(c, w)| (c, *w))
                    .collect(),
            ),
        }
    }
}

/// Cosine similarity with the zero-vector convention: if either side has
/// zero norm the similarity is 0.
pub fn cosine_sparse(a: &SparseVector, b: &SparseVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

/// Cosine between dense slices with the same zero convention.
pub fn cosine_dense(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|w| w * w).sum::<f64>().sqrt();
    let nb = b.iter().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Cosine between a matrix row and a sparse vector, reusing a precomputed
/// row norm.
pub fn cosine_row_sparse(row: RowRef<'_>, row_norm: f64, v: &SparseVector) -> f64 {
    let nv = v.norm();
    if row_norm == 0.0 || nv == 0.0 {
        return 0.0;
    }
    row.dot_sparse(v) / (row_norm * nv)
}

/// Post-word matrix X: one row per post, one column per vocabulary word.
#[derive(Clone, Debug, PartialEq)]
pub enum PostWordMatrix {
    Sparse { n_cols: usize, rows: Vec<SparseVector> },
    Dense { n_cols: usize, rows: Vec<Vec<f64>> },
}

impl PostWordMatrix {
    pub fn n_rows(&self) -> usize {
        match self {
            PostWordMatrix::Sparse { rows, .. } => rows.len(),
            PostWordMatrix::Dense { rows, .. } => rows.len(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            PostWordMatrix::Sparse { n_cols, .. } => *n_cols,
            PostWordMatrix::Dense { n_cols, .. } => *n_cols,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, PostWordMatrix::Dense { .. })
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        match self {
            PostWordMatrix::Sparse { rows, .. } => RowRef::Sparse(&rows[i]),
            PostWordMatrix::Dense { rows, .. } => RowRef::Dense(&rows[i]),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.row(row).get(col)
    }

    /// Sum of `row(u's posts)` as one vector; used for per-user pooled text.
    pub fn pooled_rows(&self, rows: &[usize]) -> SparseVector {
        match self {
            PostWordMatrix::Sparse {
                rows: all_rows, ..
            } => {
                let mut acc = SparseVector::new();
                for &r in rows {
                    acc.add_assign(&all_rows[r]);
                }
                acc
            }
            PostWordMatrix::Dense {
                n_cols,
                rows: all_rows,
            } => {
                let mut dense = vec![0.0; *n_cols];
                for &r in rows {
                    for (c, w) in all_rows[r].iter().enumerate() {
                        dense[c] += w;
                    }
                }
                SparseVector::from_pairs(
                    dense
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, w)| w != 0.0)
                        .collect(),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sorts_merges_and_drops_zeros() {
        let v = SparseVector::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 0.5), (0, 0.0)]);
        assert_eq!(v.iter().collect::<Vec<_>>(), vec![(1, 2.0), (3, 1.5)]);
        assert_eq!(v.get(3), 1.5);
        assert_eq!(v.get(2), 0.0);
    }

    #[test]
    fn l1_distance_hand_checked() {
        let a = SparseVector::from_pairs(vec![(0, 1.0)]);
        let b = SparseVector::from_pairs(vec![(1, 2.0)]);
        assert_eq!(a.l1_distance(&b), 3.0);
        assert_eq!(a.l1_distance(&a), 0.0);
    }

    #[test]
    fn cosine_conventions() {
        let a = SparseVector::from_pairs(vec![(0, 1.0), (1, 1.0)]);
        let zero = SparseVector::new();
        assert_eq!(cosine_sparse(&a, &zero), 0.0);
        assert!((cosine_sparse(&a, &a) - 1.0).abs() < 1e-15);
        let b = SparseVector::from_pairs(vec![(2, 5.0)]);
        assert_eq!(cosine_sparse(&a, &b), 0.0);
    }

    #[test]
    fn dot_merge_and_probe_paths_agree() {
        let a = SparseVector::from_pairs((0..40).map(|c| (c, c as f64 + 1.0)).collect());
        let b = SparseVector::from_pairs(vec![(3, 2.0), (39, 1.0)]);
        assert_eq!(a.dot(&b), b.dot(&a));
        assert_eq!(a.dot(&b), 4.0 * 2.0 + 40.0);
    }
}
