//! Textual anonymization: epsilon-differential-privacy release of the
//! post-word matrix via the Laplace mechanism, plus the naive baseline.
//!
//! The identity query releases each row of X; its sensitivity is the
//! maximum L1 distance between any two rows, computed exactly by a
//! pairwise scan of the realized matrix (an override hook exists for
//! experiments). Noise is i.i.d. Laplace(0, sensitivity / epsilon) on
//! every coordinate, zeros included, so the released matrix is dense.
//! Negative values are not clamped: the attacker must cope with raw
//! noised vectors.

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CorpusStats, UserPostMatrix};
use crate::seed::{derive_seed, rng_from_seed};
use crate::text::{build_vocab, tfidf, Preprocessor, Vocabulary};
use crate::vector::PostWordMatrix;

#[derive(Clone, Debug, Deserialize)]
pub struct DPConfig {
    pub epsilon: f64,
    pub rng_seed: u64,
    /// Replaces the computed sensitivity when set; must be positive.
    pub sensitivity_override: Option<f64>,
}

impl DPConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be a positive real, got {}",
                self.epsilon
            )));
        }
        if let Some(s) = self.sensitivity_override {
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Config(format!(
                    "sensitivity override must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Exact sensitivity of the identity query on X: the maximum L1 distance
/// over all row pairs. O(M^2) scan, parallel over rows.
pub fn sensitivity(x: &PostWordMatrix) -> Result<f64> {
    let m = x.n_rows();
    if m < 2 {
        return Err(Error::Invalid(format!(
            "sensitivity needs at least 2 rows, matrix has {m}"
        )));
    }
    let max = match x {
        PostWordMatrix::Sparse { rows, .. } => (0..m - 1)
            .into_par_iter()
            .map(|i| {
                let mut local: f64 = 0.0;
                for j in i + 1..m {
                    local = local.max(rows[i].l1_distance(&rows[j]));
                }
                local
            })
            .reduce(|| 0.0, f64::max),
        PostWordMatrix::Dense { rows, .. } => (0..m - 1)
            .into_par_iter()
            .map(|i| {
                let mut local: f64 = 0.0;
                for j in i + 1..m {
                    let d: f64 = rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    local = local.max(d);
                }
                local
            })
            .reduce(|| 0.0, f64::max),
    };
    Ok(max)
}

/// Inverse-CDF transform for the zero-mean Laplace distribution:
/// u in (-1/2, 1/2) maps to -scale * sign(u) * ln(1 - 2|u|).
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One Laplace(0, scale) draw.
pub fn laplace_sample(scale: f64, rng: &mut impl Rng) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        // random() covers [0, 1); reject the single point mapping to -1/2.
        if u > -0.5 {
            return laplace_inverse_cdf(u, scale);
        }
    }
}

/// Adds i.i.d. Laplace noise to every coordinate of every row. Rows get
/// independent RNG streams derived from (seed, row index), so the result
/// is deterministic and row-parallel. The input matrix is untouched.
pub fn dp_anonymize(x: &PostWordMatrix, cfg: &DPConfig) -> Result<PostWordMatrix> {
    cfg.validate()?;
    let delta = match cfg.sensitivity_override {
        Some(s) => s,
        None => {
            let s = sensitivity(x)?;
            if s <= 0.0 {
                return Err(Error::ZeroSensitivity);
            }
            s
        }
    };
    let scale = delta / cfg.epsilon;
    let n_cols = x.n_cols();
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(cfg.rng_seed, r as u64));
            let mut row: Vec<f64> = match x.row(r) {
                crate::vector::RowRef::Sparse(v) => {
                    let mut dense = vec![0.0; n_cols];
                    for (c, w) in v.iter() {
                        dense[c] = w;
                    }
                    dense
                }
                crate::vector::RowRef::Dense(v) => v.to_vec(),
            };
            for value in row.iter_mut() {
                *value += laplace_sample(scale, &mut rng);
            }
            row
        })
        .collect();
    Ok(PostWordMatrix::Dense { n_cols, rows })
}

/// The naive textual baseline: strip PII from the raw posts, then
/// vectorize with TF-IDF. `posts_by_user` groups raw posts per user in
/// canonical user order; posts left empty by stripping are dropped.
/// Returns X, W, the vocabulary and the released corpus statistics.
pub fn naive_text_anonymize<S: AsRef<str>>(
    posts_by_user: &[Vec<S>],
    preproc: &Preprocessor,
) -> Result<(PostWordMatrix, UserPostMatrix, Vocabulary, CorpusStats)> {
    let mut tokenized: Vec<Vec<String>> = Vec::new();
    let mut author_row: Vec<u32> = Vec::new();
    for (row, posts) in posts_by_user.iter().enumerate() {
        for raw in posts {
            let tokens = preproc.strip_pii(raw.as_ref());
            if tokens.is_empty() {
                continue;
            }
            tokenized.push(tokens);
            author_row.push(row as u32);
        }
    }
    let vocab = build_vocab(&tokenized)?;
    let (x, stats) = tfidf(&tokenized, &vocab)?;
    let w = UserPostMatrix::new(posts_by_user.len(), author_row)?;
    Ok((x, w, vocab, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::SparseVector;

    fn sparse(rows: Vec<Vec<(usize, f64)>>, n_cols: usize) -> PostWordMatrix {
        PostWordMatrix::Sparse {
            n_cols,
            rows: rows.into_iter().map(SparseVector::from_pairs).collect(),
        }
    }

    #[test]
    fn sensitivity_trivial_cases() {
        let x = sparse(vec![vec![(0, 1.0)], vec![(0, 1.0)]], 2);
        assert_eq!(sensitivity(&x).unwrap(), 0.0);

        let x = sparse(vec![vec![(0, 1.0)], vec![(1, 2.0)]], 2);
        assert_eq!(sensitivity(&x).unwrap(), 3.0);

        let x = sparse(vec![vec![(0, 1.0)]], 2);
        assert!(sensitivity(&x).is_err());
    }

    #[test]
    fn sensitivity_matches_dense_double_loop_oracle() {
        let mut rng = crate::seed::rng_from_seed(42);
        for _ in 0..5 {
            let n_cols = 30;
            let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
            for _ in 0..50 {
                let mut row = Vec::new();
                for c in 0..n_cols {
                    if rng.random::<f64>() < 0.3 {
                        row.push((c, rng.random::<f64>() * 4.0));
                    }
                }
                rows.push(row);
            }
            let dense: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let mut d = vec![0.0; n_cols];
                    for &(c, w) in r {
                        d[c] = w;
                    }
                    d
                })
                .collect();
            let mut oracle: f64 = 0.0;
            for i in 0..dense.len() {
                for j in 0..dense.len() {
                    let l1: f64 = dense[i]
                        .iter()
                        .zip(&dense[j])
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    oracle = oracle.max(l1);
                }
            }
            let x = sparse(rows, n_cols);
            assert_eq!(sensitivity(&x).unwrap(), oracle);
        }
    }

    #[test]
    fn inverse_cdf_median_is_zero() {
        assert_eq!(laplace_inverse_cdf(0.0, 3.0), 0.0);
    }

    #[test]
    fn laplace_moments() {
        let mut rng = crate::seed::rng_from_seed(7);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| laplace_sample(1.0, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((1.9..=2.1).contains(&var), "variance {var}");
    }

    #[test]
    fn dp_anonymize_is_deterministic_and_leaves_input_alone() {
        let x = sparse(vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 4.0)]], 3);
        let before = x.clone();
        let cfg = DPConfig {
            epsilon: 0.5,
            rng_seed: 9,
            sensitivity_override: None,
        };
        let a = dp_anonymize(&x, &cfg).unwrap();
        let b = dp_anonymize(&x, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(x, before);
        assert!(a.is_dense());
        assert_eq!(a.n_rows(), 2);
        assert_eq!(a.n_cols(), 3);
    }

    #[test]
    fn huge_epsilon_means_negligible_noise() {
        let x = sparse(vec![vec![(0, 1.0)], vec![(1, 5.0)]], 2);
        let delta = sensitivity(&x).unwrap();
        let cfg = DPConfig {
            epsilon: 1e9,
            rng_seed: 1,
            sensitivity_override: None,
        };
        let noised = dp_anonymize(&x, &cfg).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((noised.get(r, c) - x.get(r, c)).abs() < delta * 1e-3);
            }
        }
    }

    #[test]
    fn mean_absolute_perturbation_tracks_scale() {
        // 50x100 matrix; mean |Y| of Laplace(scale) is scale itself.
        let mut rng = crate::seed::rng_from_seed(3);
        let rows: Vec<Vec<(usize, f64)>> = (0..50)
            .map(|_| (0..100).map(|c| (c, rng.random::<f64>())).collect())
            .collect();
        let x = sparse(rows, 100);
        let cfg = DPConfig {
            epsilon: 0.01,
            rng_seed: 11,
            sensitivity_override: None,
        };
        let delta = sensitivity(&x).unwrap();
        let scale = delta / cfg.epsilon;
        let noised = dp_anonymize(&x, &cfg).unwrap();
        let mut total = 0.0;
        for r in 0..50 {
            for c in 0..100 {
                total += (noised.get(r, c) - x.get(r, c)).abs();
            }
        }
        let mean_abs = total / 5000.0;
        assert!(
            (mean_abs - scale).abs() < 0.2 * scale,
            "mean |perturbation| {mean_abs} vs scale {scale}"
        );
    }

    #[test]
    fn zero_sensitivity_without_override_errors() {
        let x = sparse(vec![vec![(0, 1.0)], vec![(0, 1.0)]], 1);
        let cfg = DPConfig {
            epsilon: 1.0,
            rng_seed: 0,
            sensitivity_override: None,
        };
        assert!(matches!(dp_anonymize(&x, &cfg), Err(Error::ZeroSensitivity)));
        let with_override = DPConfig {
            sensitivity_override: Some(2.0),
            ..cfg
        };
        assert!(dp_anonymize(&x, &with_override).is_ok());
    }

    #[test]
    fn smaller_epsilon_means_more_noise() {
        let x = sparse(
            vec![vec![(0, 1.0), (1, 3.0)], vec![(2, 2.0)], vec![(0, 4.0)]],
            3,
        );
        let mut wins = 0;
        for seed in 0..10 {
            let noisy = |eps: f64| {
                let cfg = DPConfig {
                    epsilon: eps,
                    rng_seed: seed,
                    sensitivity_override: None,
                };
                let out = dp_anonymize(&x, &cfg).unwrap();
                let mut total = 0.0;
                for r in 0..x.n_rows() {
                    for c in 0..x.n_cols() {
                        total += (out.get(r, c) - x.get(r, c)).abs();
                    }
                }
                total
            };
            if noisy(0.1) > noisy(1.0) {
                wins += 1;
            }
        }
        assert_eq!(wins, 10, "smaller budget must add more noise on every seed");
    }

    #[test]
    fn naive_text_excludes_pii_from_vocab() {
        let mut preproc = Preprocessor::with_stopwords(["the".to_string()]);
        preproc.add_usernames(["zana12"]);
        let posts = vec![
            vec!["@zana12 loves the ocean https://x.io/a"],
            vec!["ocean currents zana12"],
        ];
        let (x, w, vocab, stats) = naive_text_anonymize(&posts, &preproc).unwrap();
        assert!(vocab.col("zana12").is_none());
        assert!(vocab.col("ocean").is_some());
        assert_eq!(w.n_posts(), x.n_rows());
        assert_eq!(stats.n_posts, 2);

        // A PII-free corpus equals the plain strip-then-tfidf composition.
        let clean = vec![vec!["ocean waves"], vec!["salt water"]];
        let (x2, _, vocab2, _) = naive_text_anonymize(&clean, &preproc).unwrap();
        let tokenized: Vec<Vec<String>> = clean
            .iter()
            .flatten()
            .map(|raw| preproc.strip_pii(raw))
            .collect();
        let vocab_oracle = build_vocab(&tokenized).unwrap();
        let (x_oracle, _) = tfidf(&tokenized, &vocab_oracle).unwrap();
        assert_eq!(vocab2, vocab_oracle);
        assert_eq!(x2, x_oracle);
    }
}
