//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

use ragam_core::baselines::{CooccurrenceModel, FpmcHyper, FpmcModel, PopularityModel, RandomModel};
use ragam_core::corpus::{generate_synthetic, Concert, Corpus, RagamId, SyntheticConfig, Vocabulary};
use ragam_core::embeddings::{
    generate_walks, sgns_gradient, sgns_loss, train_skipgram, EmbeddingTable, SkipgramHyper, WalkConfig,
};
use ragam_core::eval::{
    expand_corpus, fit_embeddings, fit_ragamai_with_embeddings, ndcg_at_k, precision_at_k, run_ablation,
    run_evaluation, split_corpus, EvalError, EvalReport, PipelineConfig,
};
use ragam_core::linalg::{cosine, Matrix};
use ragam_core::network::RaagaNetwork;
use ragam_core::persist::AnyModel;
use ragam_core::ranking::Recommender;
use ragam_core::recommender::{ModelConfig, ModelVariant, RagamAIModel, TrainingInstance};
use ragam_service::{router, AppState, CreatedSession, Recommendations};

const BENCH_SPLIT: f64 = 0.8;
const BENCH_SEED: u64 = 7;
const K: usize = 15;
const ABLATION_SEEDS: [u64; 3] = [1, 2, 3];
const ABLATION_TIE: f64 = 0.01;
const GRAD_TOL: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- metrics

fn brute_precision(ranking: &[RagamId], relevant: &[RagamId], k: usize) -> f64 {
    let mut hits = 0usize;
    for pos in 0..k {
        if pos < ranking.len() && relevant.iter().any(|r| *r == ranking[pos]) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

fn brute_ndcg(ranking: &[RagamId], relevant: &[RagamId], k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let gains: Vec<f64> = ranking
        .iter()
        .take(k)
        .map(|id| if relevant.contains(id) { 1.0 } else { 0.0 })
        .collect();
    let dcg: f64 = gains
        .iter()
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).ln() * std::f64::consts::LN_2)
        .sum();
    let mut ideal_gains = vec![1.0; relevant.len()];
    ideal_gains.resize(k.max(relevant.len()), 0.0);
    let idcg: f64 = ideal_gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).ln() * std::f64::consts::LN_2)
        .sum();
    Some(dcg / idcg)
}

fn check_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_ndcg, mut precision_mismatch) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=40u32);
        let mut pool: Vec<RagamId> = (0..n).map(RagamId).collect();
        pool.shuffle(&mut rng);
        let ranking: Vec<RagamId> = pool[..rng.gen_range(0..=n as usize)].to_vec();
        let relevant: Vec<RagamId> = (0..n).map(RagamId).filter(|_| rng.gen_bool(0.3)).collect();
        let k = rng.gen_range(1..=n as usize + 3);
        let set: BTreeSet<RagamId> = relevant.iter().copied().collect();

        if precision_at_k(&ranking, &set, k) != brute_precision(&ranking, &relevant, k) {
            precision_mismatch += 1;
        }
        match (ndcg_at_k(&ranking, &set, k), brute_ndcg(&ranking, &relevant, k)) {
            (Some(a), Some(b)) => worst_ndcg = worst_ndcg.max((a - b).abs()),
            (None, None) => {}
            _ => worst_ndcg = f64::INFINITY,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        precision_mismatch == 0 && worst_ndcg <= 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "1000 triples, precision mismatches {precision_mismatch}, max nDCG diff {worst_ndcg:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// -------------------------------------------------------------- gradients

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

fn central_difference(values: &mut [f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let orig = values[i];
            values[i] = orig + FD_STEP;
            let up = loss(values);
            values[i] = orig - FD_STEP;
            let down = loss(values);
            values[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn neg_refs(negs: &[Vec<f64>]) -> Vec<&[f64]> {
    negs.iter().map(Vec::as_slice).collect()
}

fn sgns_worst(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.gen_range(2..=8);
    let n_neg = rng.gen_range(1..=5);
    let center = random_vec(rng, d);
    let context = random_vec(rng, d);
    let negatives: Vec<Vec<f64>> = (0..n_neg).map(|_| random_vec(rng, d)).collect();
    let g = sgns_gradient(&center, &context, &neg_refs(&negatives));

    let mut worst = rel_error(
        &g.d_center,
        &central_difference(&mut center.clone(), |v| sgns_loss(v, &context, &neg_refs(&negatives))),
    );
    worst = worst.max(rel_error(
        &g.d_context,
        &central_difference(&mut context.clone(), |u| sgns_loss(&center, u, &neg_refs(&negatives))),
    ));
    for j in 0..n_neg {
        let numeric = central_difference(&mut negatives[j].clone(), |n| {
            let mut negs = negatives.clone();
            negs[j] = n.to_vec();
            sgns_loss(&center, &context, &neg_refs(&negs))
        });
        worst = worst.max(rel_error(&g.d_negatives[j], &numeric));
    }
    worst
}

fn small_model(rng: &mut ChaCha8Rng, variant: ModelVariant) -> (RagamAIModel, TrainingInstance) {
    let n = rng.gen_range(4..=10);
    let d = rng.gen_range(2..=8);
    let vocab = generate_synthetic(&SyntheticConfig {
        n_concerts: 1,
        n_ragams: n,
        seed: rng.gen(),
        length_range: 1..=1,
    })
    .unwrap()
    .vocabulary;
    let mut table = EmbeddingTable::zeros(n, d);
    table.in_vectors = Matrix::uniform(n, d, 1.0, rng);
    let config = ModelConfig { variant, full_mela: false, seed: rng.gen() };
    let mut model = RagamAIModel::new(vocab, table, &config).unwrap();
    if variant.trains_embeddings() {
        model.embeddings.in_vectors = Matrix::uniform(n, d, 1.0, rng);
    }
    model.w1 = Matrix::uniform(d, d, 1.0, rng);
    model.w2 = Matrix::uniform(d, d, 1.0, rng);
    model.c = random_vec(rng, d);
    model.w3 = Matrix::uniform(model.w3.rows(), model.w3.cols(), 1.0, rng);

    let mut ids: Vec<RagamId> = (0..n as u32).map(RagamId).collect();
    ids.shuffle(rng);
    let cut = rng.gen_range(1..n);
    let n_targets = rng.gen_range(1..=n - cut);
    let instance = TrainingInstance::new(ids[..cut].to_vec(), ids[cut..cut + n_targets].to_vec()).unwrap();
    (model, instance)
}

fn model_worst(model: &RagamAIModel, instance: &TrainingInstance) -> f64 {
    let (_, grads) = model.instance_gradients(instance);
    let mut probe = model.clone();
    let mut worst = 0.0f64;

    let mut w1 = model.w1.as_slice().to_vec();
    let numeric = central_difference(&mut w1, |w| {
        probe.w1.as_mut_slice().copy_from_slice(w);
        probe.instance_loss(instance)
    });
    probe.w1 = model.w1.clone();
    worst = worst.max(rel_error(grads.w1.as_slice(), &numeric));

    let mut w2 = model.w2.as_slice().to_vec();
    let numeric = central_difference(&mut w2, |w| {
        probe.w2.as_mut_slice().copy_from_slice(w);
        probe.instance_loss(instance)
    });
    probe.w2 = model.w2.clone();
    worst = worst.max(rel_error(grads.w2.as_slice(), &numeric));

    let mut c = model.c.clone();
    let numeric = central_difference(&mut c, |v| {
        probe.c.copy_from_slice(v);
        probe.instance_loss(instance)
    });
    probe.c = model.c.clone();
    worst = worst.max(rel_error(&grads.c, &numeric));

    let mut w3 = model.w3.as_slice().to_vec();
    let numeric = central_difference(&mut w3, |w| {
        probe.w3.as_mut_slice().copy_from_slice(w);
        probe.instance_loss(instance)
    });
    probe.w3 = model.w3.clone();
    worst = worst.max(rel_error(grads.w3.as_slice(), &numeric));

    if let Some(emb) = &grads.embeddings {
        let mut e = model.embeddings.in_vectors.as_slice().to_vec();
        let numeric = central_difference(&mut e, |v| {
            probe.embeddings.in_vectors.as_mut_slice().copy_from_slice(v);
            probe.instance_loss(instance)
        });
        worst = worst.max(rel_error(emb.as_slice(), &numeric));
    }
    worst
}

fn check_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 24;
    let sgns = (0..n).map(|_| sgns_worst(&mut rng)).fold(0.0f64, f64::max);
    let model = (0..n)
        .map(|i| {
            let (m, inst) = small_model(&mut rng, ModelVariant::ALL[i % ModelVariant::ALL.len()]);
            model_worst(&m, &inst)
        })
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    outcome(
        sgns <= GRAD_TOL && model <= GRAD_TOL && elapsed < Duration::from_secs(30),
        format!(
            "{n} skip-gram and {n} model instances, max rel error {sgns:.2e} / {model:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- network

fn check_network_counting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    for round in 0..200 {
        let n = rng.gen_range(2..=8);
        let vocab = generate_synthetic(&SyntheticConfig {
            n_concerts: 1,
            n_ragams: n,
            seed: round,
            length_range: 1..=1,
        })
        .unwrap()
        .vocabulary;
        let concerts: Vec<Concert> = (0..rng.gen_range(1..=6))
            .map(|i| Concert {
                concert_id: format!("c{i}"),
                date: None,
                items: (0..rng.gen_range(1..=7)).map(|_| RagamId(rng.gen_range(0..n as u32))).collect(),
            })
            .collect();

        let mut oracle: BTreeMap<(RagamId, RagamId), u64> = BTreeMap::new();
        for c in &concerts {
            for i in 1..c.items.len() {
                *oracle.entry((c.items[i - 1], c.items[i])).or_default() += 1;
            }
        }
        let expected_total: u64 = concerts.iter().map(|c| c.items.len() as u64 - 1).sum();
        let net = RaagaNetwork::build(&Corpus { vocabulary: vocab, concerts });
        let built: BTreeMap<(RagamId, RagamId), u64> = net.edges().map(|(s, d, w)| ((s, d), w)).collect();
        if built != oracle || net.total_weight() != expected_total {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("200 corpora, {failures} mismatches"))
}

// ------------------------------------------------------------------ walks

fn check_walk_bias() -> Outcome {
    let weights = [1u64, 2, 3, 5, 9];
    let edges: Vec<_> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (RagamId(0), RagamId(i as u32 + 1), *w))
        .collect();
    let net = RaagaNetwork::from_edges(weights.len() + 1, &edges).unwrap();
    let n_walks = 10_000;
    let cfg = WalkConfig { walks_per_node: n_walks, walk_length: 2, p: 0.5, q: 2.0, seed: 17 };
    let walks = generate_walks(&net, &cfg).unwrap();

    let mut counts: HashMap<RagamId, usize> = HashMap::new();
    let mut from_center = 0;
    for walk in walks.iter().filter(|w| w[0] == RagamId(0)) {
        from_center += 1;
        *counts.entry(walk[1]).or_default() += 1;
    }
    let total: u64 = weights.iter().sum();
    let mut worst_z = 0.0f64;
    for (i, w) in weights.iter().enumerate() {
        let p = *w as f64 / total as f64;
        let observed = counts.get(&RagamId(i as u32 + 1)).copied().unwrap_or(0) as f64;
        let sigma = (n_walks as f64 * p * (1.0 - p)).sqrt();
        worst_z = worst_z.max((observed - n_walks as f64 * p).abs() / sigma);
    }
    outcome(
        from_center == n_walks && worst_z <= 3.0,
        format!("{from_center} walks, max |z| {worst_z:.2}"),
    )
}

// ------------------------------------------------------------- embeddings

fn clique_pair(size: usize) -> RaagaNetwork {
    let mut edges = Vec::new();
    for base in [0, size] {
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    edges.push((RagamId((base + i) as u32), RagamId((base + j) as u32), 1));
                }
            }
        }
    }
    RaagaNetwork::from_edges(2 * size, &edges).unwrap()
}

fn separation(table: &EmbeddingTable, size: usize) -> f64 {
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
    for i in 0..2 * size {
        for j in (i + 1)..2 * size {
            let c = cosine(table.in_vectors.row(i), table.in_vectors.row(j));
            if (i < size) == (j < size) {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    intra / n_intra as f64 - inter / n_inter as f64
}

fn check_embedding_separation() -> Outcome {
    let start = Instant::now();
    let size = 8;
    let net = clique_pair(size);
    let gaps: Vec<f64> = [1u64, 2, 3]
        .iter()
        .map(|&seed| {
            let walks = generate_walks(&net, &WalkConfig { seed, ..Default::default() }).unwrap();
            let hyper = SkipgramHyper { dim: 16, window: 5, epochs: 20, seed, ..Default::default() };
            let (table, _) = train_skipgram(&walks, 2 * size, &hyper).unwrap();
            separation(&table, size)
        })
        .collect();
    let elapsed = start.elapsed();
    outcome(
        gaps.iter().all(|g| *g > 0.2) && elapsed < Duration::from_secs(60),
        format!("gaps {:?}, {:.2}s", gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>(), elapsed.as_secs_f64()),
    )
}

// -------------------------------------------------------------- benchmark

struct Bench {
    corpus: Corpus,
    train: Corpus,
    test: Corpus,
    ragamai: RagamAIModel,
    itemknn: CooccurrenceModel,
    fpmc: FpmcModel,
    popularity: PopularityModel,
    random: RandomModel,
    network_sources: BTreeSet<String>,
    embedding_sources: BTreeSet<String>,
    report: EvalReport,
    elapsed: Duration,
}

fn run_bench() -> Bench {
    let start = Instant::now();
    let corpus = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let (train, test) = split_corpus(&corpus, BENCH_SPLIT, BENCH_SEED).unwrap();
    let cfg = PipelineConfig::default();
    let network_sources = RaagaNetwork::build(&train)
        .source_concerts()
        .into_iter()
        .map(String::from)
        .collect();
    let (table, embedding_sources) = fit_embeddings(&train, &cfg).unwrap();
    let ragamai =
        fit_ragamai_with_embeddings(&train, ModelVariant::Full, table, &embedding_sources, &cfg).unwrap();
    let itemknn = CooccurrenceModel::fit(&train);
    let fpmc = FpmcModel::fit(&train, &FpmcHyper::default()).unwrap();
    let popularity = PopularityModel::fit(&train);
    let random = RandomModel::new(corpus.vocabulary.clone(), BENCH_SEED);
    let models: [&dyn Recommender; 5] = [&ragamai, &itemknn, &fpmc, &popularity, &random];
    let report = run_evaluation(&models, &test, K, BENCH_SEED).unwrap();
    let elapsed = start.elapsed();
    Bench {
        corpus,
        train,
        test,
        ragamai,
        itemknn,
        fpmc,
        popularity,
        random,
        network_sources,
        embedding_sources,
        report,
        elapsed,
    }
}

/// Expected precision@1 of uniformly random scores over the eligible
/// (unplayed) ragams, with its standard error.
fn random_floor(corpus: &Corpus) -> (f64, f64, usize) {
    let n = corpus.vocabulary.len();
    let ps: Vec<f64> = expand_corpus(corpus)
        .iter()
        .map(|inst| {
            let played: BTreeSet<RagamId> = inst.prefix.iter().copied().collect();
            let eligible = n - played.len();
            inst.relevant.difference(&played).count() as f64 / eligible as f64
        })
        .collect();
    let count = ps.len();
    let mean = ps.iter().sum::<f64>() / count as f64;
    let sd = ps.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt() / count as f64;
    (mean, sd, count)
}

fn check_benchmark(b: &Bench) -> Outcome {
    let ndcg = |name: &str| b.report.model(name).unwrap().ndcg_at(K);
    let (ragamai, pop, rand_ndcg) = (ndcg("ragamai"), ndcg("popularity"), ndcg("random"));
    let (knn, fpmc) = (ndcg("itemknn"), ndcg("fpmc"));

    let (expect_test, sd_test, _) = random_floor(&b.test);
    let p1_test = b.report.model("random").unwrap().precision_at(1);
    let z_test = (p1_test - expect_test) / sd_test;

    // The random model is fit on nothing, so the whole corpus is a valid and
    // larger sample for the floor check.
    let full = run_evaluation(&[&b.random as &dyn Recommender], &b.corpus, 1, BENCH_SEED).unwrap();
    let (expect_full, sd_full, n_full) = random_floor(&b.corpus);
    let p1_full = full.model("random").unwrap().precision_at(1);
    let z_full = (p1_full - expect_full) / sd_full;

    let pass = ragamai >= 1.5 * pop
        && ragamai > rand_ndcg
        && z_test.abs() <= 3.0
        && z_full.abs() <= 3.0
        && knn > rand_ndcg
        && fpmc > rand_ndcg
        && b.elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "nDCG@15 ragamai {ragamai:.4} ({:.2}x popularity {pop:.4}), itemknn {knn:.4}, fpmc {fpmc:.4}, random {rand_ndcg:.4}; \
             random P@1 {p1_test:.4} vs expected {expect_test:.4} (z {z_test:+.2}, {} instances), \
             full corpus {p1_full:.4} vs {expect_full:.4} (z {z_full:+.2}, {n_full} instances), uniform 1/40 = {:.4}; {:.1}s",
            ragamai / pop,
            b.report.instances,
            1.0 / 40.0,
            b.elapsed.as_secs_f64()
        ),
    )
}

// --------------------------------------------------------------- ablation

fn check_ablation(corpus: &Corpus) -> Outcome {
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let mut violated = 0;
    let mut notes = Vec::new();
    let mut shape_ok = true;
    for seed in ABLATION_SEEDS {
        let table = run_ablation(corpus, seed, &cfg).unwrap();
        println!("  ablation seed {seed}:");
        for line in table.to_tsv().lines() {
            println!("    {line}");
        }
        shape_ok &= table.rows.len() == 4
            && table
                .rows
                .iter()
                .all(|r| (0.0..=1.0).contains(&r.precision) && (0.0..=1.0).contains(&r.ndcg));
        let full = table.row(ModelVariant::Full).unwrap().ndcg;
        let worst = table
            .rows
            .iter()
            .filter(|r| r.variant != ModelVariant::Full)
            .map(|r| full - r.ndcg)
            .fold(f64::INFINITY, f64::min);
        if worst < -ABLATION_TIE {
            violated += 1;
        }
        notes.push(format!("seed {seed} full minus best single {worst:+.4}"));
    }
    outcome(
        shape_ok && violated < ABLATION_SEEDS.len(),
        format!(
            "{}; violations {violated}/3; {:.1}s",
            notes.join(", "),
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- leakage

fn check_leakage(b: &Bench) -> Outcome {
    let test_ids: BTreeSet<&str> = b.test.concert_ids().collect();
    let overlap = |ids: &BTreeSet<String>| ids.iter().filter(|id| test_ids.contains(id.as_str())).count();
    let counts = [
        ("network", overlap(&b.network_sources)),
        ("embeddings", overlap(&b.embedding_sources)),
        ("ragamai", overlap(b.ragamai.training_concerts())),
        ("itemknn", overlap(b.itemknn.training_concerts())),
        ("fpmc", overlap(b.fpmc.training_concerts())),
        ("popularity", overlap(b.popularity.training_concerts())),
    ];
    let clean = counts.iter().all(|(_, n)| *n == 0);
    let covered = b.network_sources.len() == b.train.concerts.len()
        && b.ragamai.training_concerts().len() == b.train.concerts.len();

    let leaky = PopularityModel::fit(&b.corpus);
    let refused = matches!(
        run_evaluation(&[&leaky as &dyn Recommender], &b.test, K, BENCH_SEED),
        Err(EvalError::Leakage { .. })
    );
    outcome(
        clean && covered && refused,
        format!(
            "overlaps {}; provenance covers {} train concerts; model fit on test concerts refused: {refused}",
            counts.iter().map(|(s, n)| format!("{s}={n}")).collect::<Vec<_>>().join(" "),
            b.train.concerts.len()
        ),
    )
}

// ---------------------------------------------------------------- service

async fn request(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b)).unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn cli_recommend(model_path: &std::path::Path, names: &[&str], k: usize, mask: bool) -> Vec<(String, f64)> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ragamai"));
    cmd.arg("recommend")
        .arg("--model")
        .arg(model_path)
        .arg("--prefix")
        .arg(names.join(","))
        .arg("--k")
        .arg(k.to_string());
    if !mask {
        cmd.arg("--no-mask");
    }
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|line| {
            let fields: Vec<&str> = line.split('\t').collect();
            (fields[1].to_string(), fields[2].parse().unwrap())
        })
        .collect()
}

fn check_service_cli(model: &RagamAIModel) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.rgmd");
    AnyModel::from(model.clone()).save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let state = Arc::new(AppState::from_model_bytes(&bytes, Duration::from_secs(3600)).unwrap());
    let app = router(state);
    let vocab: &Vocabulary = &model.vocab;

    let runtime = tokio::runtime::Runtime::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut mismatches, mut items_compared) = (0, 0);
    for _ in 0..50 {
        let len = rng.gen_range(1..=8);
        let mask = rng.gen_bool(0.8);
        let ids: Vec<RagamId> = if mask {
            rand::seq::index::sample(&mut rng, vocab.len(), len)
                .into_iter()
                .map(|i| RagamId(i as u32))
                .collect()
        } else {
            (0..len).map(|_| RagamId(rng.gen_range(0..vocab.len() as u32))).collect()
        };
        let names: Vec<&str> = ids.iter().map(|id| vocab.name(*id)).collect();
        let k = rng.gen_range(1..=K);

        let from_cli = cli_recommend(&path, &names, k, mask);
        let from_service = runtime.block_on(async {
            let (status, body) = request(&app, "POST", "/sessions", None).await;
            assert_eq!(status, StatusCode::CREATED);
            let id = serde_json::from_slice::<CreatedSession>(&body).unwrap().session_id;
            for name in &names {
                let body = serde_json::json!({ "name": name }).to_string();
                let (status, _) =
                    request(&app, "POST", &format!("/sessions/{id}/items?allow_repeat=true"), Some(body)).await;
                assert_eq!(status, StatusCode::OK);
            }
            let (status, body) =
                request(&app, "GET", &format!("/sessions/{id}/recommendations?k={k}&mask={mask}"), None).await;
            assert_eq!(status, StatusCode::OK);
            serde_json::from_slice::<Recommendations>(&body).unwrap()
        });
        let service: Vec<(String, f64)> = from_service.items.into_iter().map(|i| (i.name, i.score)).collect();
        items_compared += service.len();
        if service != from_cli || service.len() != k {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("50 prefixes, {items_compared} items compared, {mismatches} mismatching responses"),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    record("metric oracles", check_metric_oracles());
    record("gradient suite", check_gradients());
    record("network counting", check_network_counting());
    record("walk bias", check_walk_bias());
    record("embedding separation", check_embedding_separation());
    let bench = run_bench();
    record("end-to-end benchmark", check_benchmark(&bench));
    record("ablation shape", check_ablation(&bench.corpus));
    record("no-leakage audit", check_leakage(&bench));
    record("service/cli equivalence", check_service_cli(&bench.ragamai));

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
