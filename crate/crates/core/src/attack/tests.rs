use super::*;
use crate::anonymize::{build_release, StructAnonConfig, StructMethod, TextMethod};
use crate::dp::DPConfig;
use crate::model::{Post, SocialNetwork};
use crate::seed::rng_from_seed;
use crate::target::{TargetConfig, TargetNetwork};
use crate::text::Vocabulary;
use crate::vector::{cosine_sparse, PostWordMatrix};
use rand::Rng;

fn sv(pairs: &[(usize, f64)]) -> SparseVector {
    SparseVector::from_pairs(pairs.to_vec())
}

#[test]
fn post_score_examples() {
    let zero = sv(&[]);
    assert_eq!(post_score(RowRef::Sparse(&zero), 10), 0.0);

    let single = sv(&[(2, 2.0 * (2.0f64).ln())]);
    let got = post_score(RowRef::Sparse(&single), 4);
    assert!((got - 2.0 * (2.0f64).ln() / 4.0).abs() < 1e-15);
    assert!((got - 0.3466).abs() < 1e-4);
}

#[test]
fn post_score_ranking_matches_sum_oracle() {
    let mut rng = rng_from_seed(31);
    let mut rows = Vec::new();
    for _ in 0..40 {
        let mut pairs = Vec::new();
        for c in 0..25 {
            if rng.random::<f64>() < 0.4 {
                pairs.push((c, rng.random::<f64>() * 5.0));
            }
        }
        rows.push(SparseVector::from_pairs(pairs));
    }
    let x = PostWordMatrix::Sparse {
        n_cols: 25,
        rows: rows.clone(),
    };
    let mut by_score: Vec<usize> = (0..40).collect();
    by_score.sort_by(|&a, &b| {
        post_score(x.row(b), 25)
            .total_cmp(&post_score(x.row(a), 25))
            .then(a.cmp(&b))
    });
    let mut by_sum: Vec<usize> = (0..40).collect();
    by_sum.sort_by(|&a, &b| rows[b].sum().total_cmp(&rows[a].sum()).then(a.cmp(&b)));
    assert_eq!(by_score, by_sum);
}

#[test]
fn build_query_examples() {
    let vocab = Vocabulary::from_words(vec![
        "alpha".into(),
        "beta".into(),
        "gamma".into(),
        "delta".into(),
    ])
    .unwrap();

    // Uniform vector: no coordinate strictly exceeds the mean.
    let uniform = vec![1.5; 4];
    let row = RowRef::Dense(&uniform);
    assert!(build_query(row, post_score(row, 4), &vocab).is_none());

    // [4, 0, 0, 0]: mean 1, only word 0 qualifies.
    let spiky = sv(&[(0, 4.0)]);
    let row = RowRef::Sparse(&spiky);
    let q = build_query(row, post_score(row, 4), &vocab).unwrap();
    assert_eq!(q.words(), &["alpha".to_string()]);
}

#[test]
fn build_query_matches_threshold_oracle_on_noised_rows() {
    let words: Vec<String> = (0..30).map(|i| format!("w{i:02}")).collect();
    let vocab = Vocabulary::from_words(words).unwrap();
    let mut rng = rng_from_seed(77);
    for _ in 0..50 {
        let dense: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
        let row = RowRef::Dense(&dense);
        let s = post_score(row, 30);
        let got: Vec<String> = build_query(row, s, &vocab)
            .map(|q| q.words().to_vec())
            .unwrap_or_default();
        let mut expected: Vec<String> = dense
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v > s)
            .map(|(c, _)| vocab.word(c).to_string())
            .collect();
        expected.sort();
        assert_eq!(got, expected);
    }
}

#[test]
fn queries_are_scale_invariant_per_post() {
    // Scaling a post vector scales its mean identically, so the selected
    // word set and the revealing-post order are unchanged.
    let vocab = Vocabulary::from_words((0..8).map(|i| format!("w{i}")).collect()).unwrap();
    let mut rng = rng_from_seed(13);
    for _ in 0..20 {
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for c in 0..8 {
            if rng.random::<f64>() < 0.6 {
                pairs.push((c, rng.random::<f64>() * 3.0));
            }
        }
        let v = SparseVector::from_pairs(pairs.clone());
        let scaled = SparseVector::from_pairs(
            pairs.iter().map(|&(c, w)| (c, w * 7.25)).collect(),
        );
        let q1 = build_query(RowRef::Sparse(&v), post_score(RowRef::Sparse(&v), 8), &vocab);
        let q2 = build_query(
            RowRef::Sparse(&scaled),
            post_score(RowRef::Sparse(&scaled), 8),
            &vocab,
        );
        assert_eq!(q1, q2);
    }
}

#[test]
fn struct_feature_examples() {
    let empty = struct_feature(&[], &[], 7, 50);
    assert_eq!(empty.0, vec![0.0; 14]);

    let per_direction = [3usize, 52, 49];
    let feat = struct_feature(&per_direction, &per_direction, 7, 50);
    let mut expected_half = vec![0.0; 7];
    expected_half[0] = 2.0; // degrees 3 and 49
    expected_half[1] = 1.0; // degree 52
    let expected: Vec<f64> = expected_half
        .iter()
        .chain(expected_half.iter())
        .copied()
        .collect();
    assert_eq!(feat.0, expected);

    // Degrees at or past bins * width land in the last bin.
    let overflow = degree_histogram(&[350, 351, 10_000], 7, 50);
    assert_eq!(overflow[6], 3.0);
}

#[test]
fn degree_histogram_matches_binning_oracle() {
    let mut rng = rng_from_seed(3);
    for _ in 0..50 {
        let degrees: Vec<usize> = (0..rng.random_range(0..40))
            .map(|_| rng.random_range(0..500))
            .collect();
        let (bins, width) = (7, 50);
        let got = degree_histogram(&degrees, bins, width);
        let mut expected = vec![0.0; bins];
        for &d in &degrees {
            let mut b = d / width;
            if b >= bins {
                b = bins - 1;
            }
            expected[b] += 1.0;
        }
        assert_eq!(got, expected);
    }
}

#[test]
fn sim_combination_examples() {
    assert_eq!(sim_simple(1.0, 1.0, 0.5), 1.0);
    assert_eq!(sim_simple(0.0, 0.0, 0.5), 0.0);
    // Degenerate weights collapse the total onto one component.
    assert_eq!(sim_total(0.42, 0.9, 1.0), 0.42);
    assert_eq!(sim_total(0.42, 0.9, 0.0), 0.9);

    let mut rng = rng_from_seed(8);
    for _ in 0..50 {
        let (s, t, n) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let (alpha, beta) = (rng.random::<f64>(), rng.random::<f64>());
        let total = sim_total(sim_simple(s, t, alpha), n, beta);
        let oracle = beta * (alpha * s + (1.0 - alpha) * t) + (1.0 - beta) * n;
        assert!((total - oracle).abs() < 1e-12);
    }
}

/// Hand-built six-user network: user 2 owns a globally unique word, so a
/// naive/naive release must recover it at rank 1.
fn demo_network() -> SocialNetwork {
    let mut net = SocialNetwork::new();
    net.set_stoplist("none");
    for u in 0..6u64 {
        net.add_user(UserId(u));
    }
    for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (2, 0), (3, 1)] {
        net.add_edge(UserId(a), UserId(b)).unwrap();
    }
    let posts: [(u64, &[&str]); 8] = [
        (0, &["mountain", "trail", "running"]),
        (0, &["trail", "maps"]),
        (1, &["mountain", "weather", "report"]),
        (2, &["zephyrine", "mountain", "trail"]),
        (2, &["weather", "trail"]),
        (3, &["weather", "maps", "running"]),
        (4, &["running", "report"]),
        (5, &["maps", "report", "mountain"]),
    ];
    for (author, words) in posts {
        net.add_post(Post {
            author: UserId(author),
            tokens: words.iter().map(|w| w.to_string()).collect(),
            raw: Some(words.join(" ")),
        })
        .unwrap();
    }
    net
}

struct Fixture {
    net: SocialNetwork,
    release: crate::anonymize::Release,
    target: TargetNetwork,
}

fn fixture(method: StructMethod, text: TextMethod) -> Fixture {
    let net = demo_network();
    let release = build_release(
        &net,
        &StructAnonConfig {
            method,
            p: 0.1,
            k: 2,
            rng_seed: 41,
        },
        text,
        &DPConfig {
            epsilon: 0.01,
            rng_seed: 41,
            sensitivity_override: Some(1e-6),
        },
    )
    .unwrap();
    let target = TargetNetwork::build(&net, TargetConfig::default());
    Fixture {
        net,
        release,
        target,
    }
}

#[test]
fn unique_word_user_is_recovered_at_rank_one() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig::default();
    let attacker = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Improved,
        BTreeMap::new(),
    )
    .unwrap();

    let pseudonym = f
        .release
        .truth
        .iter()
        .find(|&(_, real)| real == UserId(2))
        .map(|(p, _)| p)
        .unwrap();
    let ranked = attacker.deanonymize(pseudonym).unwrap();
    assert!(!ranked.is_empty());
    assert_eq!(ranked[0].candidate, UserId(2));
    // Composition invariant holds exactly on every score.
    for s in &ranked {
        let recomposed = sim_total(
            sim_simple(s.sim_struct, s.sim_text, cfg.alpha),
            s.sim_neighbor,
            cfg.beta,
        );
        assert_eq!(s.sim_total, recomposed);
    }
}

#[test]
fn h_zero_returns_nothing_and_results_are_deterministic() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig {
        h: 0,
        ..AttackConfig::default()
    };
    let attacker = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Improved,
        BTreeMap::new(),
    )
    .unwrap();
    let u = f.release.dataset.users[0];
    assert!(attacker.deanonymize(u).unwrap().is_empty());

    let cfg = AttackConfig::default();
    let run = || {
        let session = f.target.session();
        let attacker = Attacker::new(
            &f.release.dataset,
            &session,
            &cfg,
            Metric::Improved,
            BTreeMap::new(),
        )
        .unwrap();
        attacker.run_all().unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn gather_candidates_unions_and_dedups() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let q1 = SearchQuery::new(vec!["mountain".into()]).unwrap();
    let q2 = SearchQuery::new(vec!["maps".into()]).unwrap();
    let got = gather_candidates(&[q1.clone(), q2.clone()], &session, None).unwrap();
    // Oracle: union over per-query full scans of the raw network.
    let mut expected: Vec<UserId> = Vec::new();
    for q in [&q1, &q2] {
        for u in f.net.users() {
            if f.net
                .posts_of(u)
                .iter()
                .any(|p| q.words().iter().all(|w| p.tokens.contains(w)))
            {
                expected.push(u);
            }
        }
    }
    expected.sort_unstable();
    expected.dedup();
    assert_eq!(got, expected);
    assert!(gather_candidates(&[], &session, None).unwrap().is_empty());
}

#[test]
fn candidate_text_matches_composition_oracle() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig::default();
    let attacker = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Simple,
        BTreeMap::new(),
    )
    .unwrap();

    // Oracle: concatenate user 5's posts (most recent first) and
    // vectorize with the released stats.
    let doc = attacker.candidate_text_vec(UserId(5)).unwrap();
    let mut tokens: Vec<String> = Vec::new();
    for p in f.net.posts_of(UserId(5)).iter().rev() {
        tokens.extend(p.tokens.clone());
    }
    let expected = vectorize_document(&tokens, &f.release.dataset.vocab, &f.release.dataset.stats);
    assert_eq!(doc, expected);

    // A candidate whose whole document is one released post points in
    // exactly that post's direction.
    let doc1 = attacker.candidate_text_vec(UserId(1)).unwrap();
    let pseudonym1 = f
        .release
        .truth
        .iter()
        .find(|&(_, real)| real == UserId(1))
        .map(|(p, _)| p)
        .unwrap();
    let row1 = f.release.dataset.user_row(pseudonym1).unwrap();
    let rows = f.release.dataset.user_post.posts_of(row1);
    assert_eq!(rows.len(), 1);
    let released_row = f.release.dataset.post_word.row(rows[0]).to_sparse();
    assert!((cosine_sparse(&doc1, &released_row) - 1.0).abs() < 1e-12);
}

#[test]
fn narayanan_manual_count() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig::default();

    // Map true users 0, 1, 3 as seeds (pseudonym -> real).
    let seed_map: BTreeMap<UserId, UserId> = f
        .release
        .truth
        .iter()
        .filter(|&(_, real)| [UserId(0), UserId(1), UserId(3)].contains(&real))
        .collect();
    let attacker = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Narayanan,
        seed_map,
    )
    .unwrap();
    let seeds = attacker.seeds.as_ref().unwrap();

    // True user 2's neighbors are {0, 1, 3} (edges 1->2, 2->3, 2->0), all
    // seed-mapped. Candidate 2's target neighbors are the same set, so
    // the overlap is 3.
    let pseudonym2 = f
        .release
        .truth
        .iter()
        .find(|&(_, real)| real == UserId(2))
        .map(|(p, _)| p)
        .unwrap();
    let row2 = f.release.dataset.user_row(pseudonym2).unwrap();
    let overlap = narayanan_overlap(seeds, row2, UserId(2), &f.target).unwrap();
    assert_eq!(overlap, 3);
    let score = narayanan_similarity(
        seeds,
        row2,
        UserId(2),
        &attacker.followers,
        &attacker.followees,
        &attacker.total_degree,
        &f.target,
    )
    .unwrap();
    // deg(u) = deg(c) = 3 (edges 1->2, 2->3, 2->0): 3 / sqrt(9) = 1.
    assert!((score - 1.0).abs() < 1e-12);

    // Candidate 4 has target neighbors {3, 5}; only 3 is a mapped image
    // of one of u's neighbors.
    let overlap4 = narayanan_overlap(seeds, row2, UserId(4), &f.target).unwrap();
    assert_eq!(overlap4, 1);

    // Empty seed map scores zero everywhere.
    let empty = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Narayanan,
        BTreeMap::new(),
    )
    .unwrap();
    let seeds0 = empty.seeds.as_ref().unwrap();
    assert_eq!(
        narayanan_similarity(
            seeds0,
            row2,
            UserId(2),
            &empty.followers,
            &empty.followees,
            &empty.total_degree,
            &f.target
        )
        .unwrap(),
        0.0
    );
}

#[test]
fn ada_components_behave_on_hand_built_case() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig::default();
    let seed_map: BTreeMap<UserId, UserId> = f
        .release
        .truth
        .iter()
        .filter(|&(_, real)| [UserId(0), UserId(4)].contains(&real))
        .collect();
    let attacker =
        Attacker::new(&f.release.dataset, &session, &cfg, Metric::Ada, seed_map).unwrap();
    let seeds = attacker.seeds.as_ref().unwrap();

    // Naive structure: u and its true candidate have identical degrees
    // and identical seed distances, so (a) = (b) = 1 and the score is
    // (1 + 1 + inheritance) / 3 with inheritance in [0, 1].
    for (pseudonym, real) in f.release.truth.iter() {
        let row = f.release.dataset.user_row(pseudonym).unwrap();
        let score = ada_similarity(
            seeds,
            row,
            real,
            &attacker.followers,
            &attacker.followees,
            &attacker.total_degree,
            &f.target,
        )
        .unwrap();
        let inheritance = narayanan_similarity(
            seeds,
            row,
            real,
            &attacker.followers,
            &attacker.followees,
            &attacker.total_degree,
            &f.target,
        )
        .unwrap();
        assert!(
            (score - (2.0 + inheritance) / 3.0).abs() < 1e-12,
            "user {real}: {score} vs inheritance {inheritance}"
        );
    }

    // An isolated released user gets degree-part 0 against connected
    // candidates, unreachable seeds, and no overlap: score 0.
    let mut lonely = demo_network();
    lonely.add_user(UserId(9));
    lonely
        .add_post(Post {
            author: UserId(9),
            tokens: vec!["hermit".into()],
            raw: Some("hermit".into()),
        })
        .unwrap();
    let release = build_release(
        &lonely,
        &StructAnonConfig {
            method: StructMethod::Naive,
            p: 0.0,
            k: 2,
            rng_seed: 5,
        },
        TextMethod::Naive,
        &DPConfig {
            epsilon: 1.0,
            rng_seed: 5,
            sensitivity_override: None,
        },
    )
    .unwrap();
    let target = TargetNetwork::build(&lonely, TargetConfig::default());
    let session = target.session();
    let seed_map: BTreeMap<UserId, UserId> = release
        .truth
        .iter()
        .filter(|&(_, real)| [UserId(0), UserId(4)].contains(&real))
        .collect();
    let attacker =
        Attacker::new(&release.dataset, &session, &cfg, Metric::Ada, seed_map).unwrap();
    let seeds = attacker.seeds.as_ref().unwrap();
    let pseudonym9 = release
        .truth
        .iter()
        .find(|&(_, real)| real == UserId(9))
        .map(|(p, _)| p)
        .unwrap();
    let row9 = release.dataset.user_row(pseudonym9).unwrap();
    let score = ada_similarity(
        seeds,
        row9,
        UserId(2),
        &attacker.followers,
        &attacker.followees,
        &attacker.total_degree,
        &target,
    )
    .unwrap();
    assert_eq!(score, 0.0);
}

#[test]
fn top_revealing_cases() {
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let d = &f.release.dataset;
    // Single-post user returns that post.
    let row1 = d
        .user_row(
            f.release
                .truth
                .iter()
                .find(|&(_, real)| real == UserId(1))
                .map(|(p, _)| p)
                .unwrap(),
        )
        .unwrap();
    let rows = top_revealing(d, row1, 10).unwrap();
    assert_eq!(rows, d.user_post.posts_of(row1));

    // k = 0 selects nothing.
    assert!(top_revealing(d, row1, 0).unwrap().is_empty());

    // Full sort oracle on a user with several posts.
    let row0 = d
        .user_row(
            f.release
                .truth
                .iter()
                .find(|&(_, real)| real == UserId(0))
                .map(|(p, _)| p)
                .unwrap(),
        )
        .unwrap();
    let got = top_revealing(d, row0, 1).unwrap();
    let mut oracle = d.user_post.posts_of(row0);
    oracle.sort_by(|&a, &b| {
        post_score(d.post_word.row(b), d.post_word.n_cols())
            .total_cmp(&post_score(d.post_word.row(a), d.post_word.n_cols()))
            .then(a.cmp(&b))
    });
    assert_eq!(got, oracle[..1]);
}

#[test]
fn sim_neighbors_identity_and_isolated_conventions() {
    // Identical neighbor sets with lambda >= degree give fitness 1
    // on a naive release attacked against its own network.
    let f = fixture(StructMethod::Naive, TextMethod::Naive);
    let session = f.target.session();
    let cfg = AttackConfig {
        lambda: 100,
        ..AttackConfig::default()
    };
    let attacker = Attacker::new(
        &f.release.dataset,
        &session,
        &cfg,
        Metric::Improved,
        BTreeMap::new(),
    )
    .unwrap();
    // Both isolated: a network of two unconnected users.
    let mut pair = SocialNetwork::new();
    pair.set_stoplist("none");
    pair.add_user(UserId(0));
    pair.add_user(UserId(1));
    for u in 0..2u64 {
        pair.add_post(Post {
            author: UserId(u),
            tokens: vec![format!("word{u}")],
            raw: Some(format!("word{u}")),
        })
        .unwrap();
    }
    let release = build_release(
        &pair,
        &StructAnonConfig {
            method: StructMethod::Naive,
            p: 0.0,
            k: 1,
            rng_seed: 1,
        },
        TextMethod::Naive,
        &DPConfig {
            epsilon: 1.0,
            rng_seed: 1,
            sensitivity_override: None,
        },
    )
    .unwrap();
    let target2 = TargetNetwork::build(&pair, TargetConfig::default());
    let session2 = target2.session();
    let attacker2 = Attacker::new(
        &release.dataset,
        &session2,
        &cfg,
        Metric::Improved,
        BTreeMap::new(),
    )
    .unwrap();
    let cand = attacker2.candidate_features(UserId(0)).unwrap();
    assert_eq!(attacker2.neighbor_similarity(0, &cand), 0.0);

    // Self-match on the connected network: neighbor fitness must be high
    // (sampling differs between the two sides, so allow slack below 1).
    let (pseudonym, real) = f
        .release
        .truth
        .iter()
        .find(|&(_, real)| real == UserId(2))
        .unwrap();
    let row = f.release.dataset.user_row(pseudonym).unwrap();
    let cand = attacker.candidate_features(real).unwrap();
    let fitness = attacker.neighbor_similarity(row, &cand);
    assert!(
        fitness > 0.8,
        "self neighbor fitness should be near 1, got {fitness}"
    );
}
