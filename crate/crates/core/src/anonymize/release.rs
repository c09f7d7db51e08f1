//! Assembles a complete anonymized release from a network and the chosen
//! structural + textual schemes.
//!
//! Post rows are ordered by (pseudonym ascending, recency); pseudonyms
//! are random, so the row order leaks nothing about original ids. The
//! differential-privacy variant noises the naive TF-IDF matrix.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::anonymize::{anonymize_structure, StructAnonConfig, StructuralRelease};
use crate::dp::{dp_anonymize, naive_text_anonymize, DPConfig};
use crate::error::{Error, Result};
use crate::model::{AnonymizedDataset, GroundTruth, SocialNetwork};
use crate::text::Preprocessor;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMethod {
    Naive,
    Dp,
}

impl TextMethod {
    pub const ALL: [TextMethod; 2] = [TextMethod::Naive, TextMethod::Dp];

    pub fn name(&self) -> &'static str {
        match self {
            TextMethod::Naive => "naive",
            TextMethod::Dp => "dp",
        }
    }
}

impl fmt::Display for TextMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TextMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TextMethod::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown textual method '{s}'")))
    }
}

/// A release plus everything the evaluator needs to score it.
#[derive(Clone, Debug)]
pub struct Release {
    pub dataset: AnonymizedDataset,
    pub truth: GroundTruth,
    pub warnings: Vec<String>,
    /// Structural edit count (edges added + removed).
    pub edits: usize,
}

/// Runs the structural scheme, orders posts by pseudonym, applies the
/// naive text pipeline and, for [`TextMethod::Dp`], noises the matrix.
pub fn build_release(
    network: &SocialNetwork,
    struct_cfg: &StructAnonConfig,
    text_method: TextMethod,
    dp_cfg: &DPConfig,
) -> Result<Release> {
    let StructuralRelease {
        users,
        edges,
        truth,
        edits,
        warnings,
    } = anonymize_structure(network, struct_cfg)?;

    let preproc = Preprocessor::for_network(network)?;
    let posts_by_user: Vec<Vec<&str>> = users
        .iter()
        .map(|pseudonym| {
            let original = truth.true_id(*pseudonym).expect("truth covers all users");
            network
                .posts_of(original)
                .iter()
                .map(|p| p.raw.as_deref().unwrap_or(""))
                .collect()
        })
        .collect();
    let (x, w, vocab, stats) = naive_text_anonymize(&posts_by_user, &preproc)?;

    let post_word = match text_method {
        TextMethod::Naive => x,
        TextMethod::Dp => dp_anonymize(&x, dp_cfg)?,
    };

    let dataset = AnonymizedDataset {
        users,
        edges,
        post_word,
        user_post: w,
        vocab,
        stats,
    };
    dataset.validate()?;
    Ok(Release {
        dataset,
        truth,
        warnings,
        edits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymize::StructMethod;
    use crate::datagen::{generate, GenConfig};

    fn test_network() -> SocialNetwork {
        let cfg = GenConfig {
            n_users: 40,
            m_attach: 2,
            n_topics: 2,
            vocab_size: 400,
            posts_per_user: [2, 4],
            words_per_post: [4, 8],
            topic_mix_concentration: 6.0,
            homophily_strength: 0.5,
            rng_seed: 17,
        };
        generate(&cfg).unwrap().0
    }

    #[test]
    fn naive_release_validates_and_keeps_counts() {
        let net = test_network();
        let release = build_release(
            &net,
            &StructAnonConfig {
                method: StructMethod::Naive,
                p: 0.1,
                k: 10,
                rng_seed: 5,
            },
            TextMethod::Naive,
            &DPConfig {
                epsilon: 0.01,
                rng_seed: 5,
                sensitivity_override: None,
            },
        )
        .unwrap();
        assert_eq!(release.dataset.users.len(), net.n_users());
        assert_eq!(release.dataset.edges.len(), net.n_edges());
        assert_eq!(release.dataset.post_word.n_rows(), net.n_posts());
        assert_eq!(release.truth.len(), net.n_users());
        // Column sums of W are exactly 1 by construction.
        let w = &release.dataset.user_post;
        assert_eq!(w.row_sums().iter().sum::<usize>(), w.n_posts());
        // Vocabulary contains no handles or mentions.
        for (_, handle) in net.handles() {
            assert!(release.dataset.vocab.col(handle).is_none());
        }
    }

    #[test]
    fn dp_release_is_dense_and_deterministic() {
        let net = test_network();
        let build = || {
            build_release(
                &net,
                &StructAnonConfig {
                    method: StructMethod::Sparsification,
                    p: 0.1,
                    k: 10,
                    rng_seed: 8,
                },
                TextMethod::Dp,
                &DPConfig {
                    epsilon: 0.01,
                    rng_seed: 8,
                    sensitivity_override: Some(0.001),
                },
            )
            .unwrap()
        };
        let a = build();
        let b = build();
        assert!(a.dataset.post_word.is_dense());
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn generated_release_round_trips_through_disk() {
        let net = test_network();
        let release = build_release(
            &net,
            &StructAnonConfig {
                method: StructMethod::Perturbation,
                p: 0.1,
                k: 10,
                rng_seed: 2,
            },
            TextMethod::Naive,
            &DPConfig {
                epsilon: 0.01,
                rng_seed: 2,
                sensitivity_override: None,
            },
        )
        .unwrap();
        let dir = std::env::temp_dir().join("athd-release-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("release.an");
        crate::model::save_dataset(&release.dataset, &path).unwrap();
        let back = crate::model::load_dataset(&path).unwrap();
        assert_eq!(release.dataset, back);
    }
}
