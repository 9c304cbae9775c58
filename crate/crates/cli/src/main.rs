use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ragam_core::baselines::{CooccurrenceModel, FpmcHyper, FpmcModel, PopularityModel, RandomModel};
use ragam_core::corpus::{
    generate_synthetic, parse_corpus, parse_metadata, write_corpus, write_metadata, Corpus, RagamId,
    SyntheticConfig,
};
use ragam_core::embeddings::{generate_walks, train_skipgram, EmbeddingTable, SkipgramHyper, WalkConfig};
use ragam_core::eval::{audit_leakage, run_ablation, run_evaluation, split_corpus, PipelineConfig};
use ragam_core::network::RaagaNetwork;
use ragam_core::persist::AnyModel;
use ragam_core::ranking::{RecommendError, Recommender};
use ragam_core::recommender::{ModelConfig, ModelVariant, RagamAIModel, TrainHyper};

#[derive(Parser)]
#[command(name = "ragamai", version, about = "Session-based ragam recommendation for concert planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Itemknn,
    Fpmc,
    Popularity,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with a planted transition structure.
    GenSynthetic {
        #[arg(long, default_value_t = 1000)]
        n_concerts: usize,
        #[arg(long, default_value_t = 40)]
        n_ragams: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 9)]
        min_len: usize,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
        #[arg(long)]
        out_corpus: PathBuf,
        #[arg(long)]
        out_meta: PathBuf,
    },
    /// Build the transition network and write it as `src,dst,weight` CSV.
    BuildNetwork {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train node2vec embeddings on a network CSV.
    TrainEmbeddings {
        #[arg(long)]
        network: PathBuf,
        /// Metadata file; fixes the vocabulary size when some ragams have no edges.
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        walks: usize,
        #[arg(long, default_value_t = 20)]
        walk_len: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        neg: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a ragamAI model (or an ablation variant) on frozen embeddings.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// ragamai, attention, concert-embedding or attention-without-node2vec.
        #[arg(long, default_value = "ragamai")]
        variant: ModelVariant,
        #[arg(long, default_value_t = TrainHyper::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainHyper::default().lr)]
        lr: f64,
        #[arg(long, default_value_t = TrainHyper::default().batch)]
        batch: usize,
        #[arg(long, default_value_t = TrainHyper::default().l2)]
        l2: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// One slot per mela instead of six buckets.
        #[arg(long)]
        full_mela: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a comparison model.
    TrainBaseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `rank<TAB>name<TAB>score` for a comma-separated prefix.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        prefix: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        no_mask: bool,
    },
    /// Concert-level train/test split.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Precision@k and nDCG@k curves of saved models on a test corpus.
    Evaluate {
        #[arg(long)]
        train_corpus: PathBuf,
        #[arg(long)]
        test_corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        /// Comma-separated model files.
        #[arg(long, value_delimiter = ',')]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 15)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write `model,k,precision,ndcg` rows here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train and score the four variants at k = 15 for each seed.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = TrainHyper::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainHyper::default().lr)]
        lr: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP planner service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 24.0)]
        session_ttl_hours: f64,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_corpus(corpus: &Path, meta: &Path) -> Result<Corpus> {
    let metas = parse_metadata(open(meta)?).with_context(|| format!("parsing {}", meta.display()))?;
    parse_corpus(open(corpus)?, metas).with_context(|| format!("parsing {}", corpus.display()))
}

fn load_model(path: &Path) -> Result<AnyModel> {
    AnyModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn save_model(model: AnyModel, path: &Path) -> Result<()> {
    model.save(path).with_context(|| format!("writing model {}", path.display()))
}

fn parse_prefix(model: &AnyModel, prefix: &str) -> Result<Vec<RagamId>> {
    prefix
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            model
                .vocabulary()
                .lookup(name)
                .with_context(|| format!("unknown ragam {name:?}"))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic {
            n_concerts,
            n_ragams,
            seed,
            min_len,
            max_len,
            out_corpus,
            out_meta,
        } => {
            let corpus = generate_synthetic(&SyntheticConfig {
                n_concerts,
                n_ragams,
                seed,
                length_range: min_len..=max_len,
            })?;
            write_metadata(&corpus.vocabulary, create(&out_meta)?)?;
            write_corpus(&corpus, create(&out_corpus)?)?;
            eprintln!("wrote {} concerts over {} ragams", corpus.concerts.len(), corpus.vocabulary.len());
        }

        Command::BuildNetwork { corpus, meta, out } => {
            let corpus = load_corpus(&corpus, &meta)?;
            let net = RaagaNetwork::build(&corpus);
            net.write_edge_csv(create(&out)?)?;
            eprintln!("{} nodes, {} edges, total weight {}", net.n_nodes(), net.edge_count(), net.total_weight());
        }

        Command::TrainEmbeddings {
            network,
            meta,
            dim,
            walks,
            walk_len,
            window,
            neg,
            p,
            q,
            epochs,
            lr,
            seed,
            out,
        } => {
            let n_nodes = match meta {
                Some(m) => Some(parse_metadata(open(&m)?)?.len()),
                None => None,
            };
            let net = RaagaNetwork::read_edge_csv(open(&network)?, n_nodes)?;
            let walk_cfg = WalkConfig {
                walks_per_node: walks,
                walk_length: walk_len,
                p,
                q,
                seed,
            };
            let hyper = SkipgramHyper {
                dim,
                window,
                negatives: neg,
                epochs,
                lr,
                seed,
            };
            let corpus_walks = generate_walks(&net, &walk_cfg)?;
            let (table, losses) = train_skipgram(&corpus_walks, net.n_nodes(), &hyper)?;
            table.write(create(&out)?)?;
            for (e, l) in losses.iter().enumerate() {
                eprintln!("epoch {}\tloss {l:.6}", e + 1);
            }
        }

        Command::Train {
            corpus,
            meta,
            embeddings,
            variant,
            epochs,
            lr,
            batch,
            l2,
            seed,
            full_mela,
            out,
        } => {
            let corpus = load_corpus(&corpus, &meta)?;
            let table = EmbeddingTable::read(open(&embeddings)?)
                .with_context(|| format!("reading embeddings {}", embeddings.display()))?;
            let cfg = ModelConfig {
                variant,
                full_mela,
                seed,
            };
            let mut model = RagamAIModel::new(corpus.vocabulary.clone(), table, &cfg)?;
            let hyper = TrainHyper {
                epochs,
                lr,
                batch,
                seed,
                l2,
            };
            let trace = model.train(&corpus, &hyper)?;
            for (e, l) in trace.iter().enumerate() {
                eprintln!("epoch {}\tloss {l:.6}", e + 1);
            }
            save_model(model.into(), &out)?;
        }

        Command::TrainBaseline {
            kind,
            corpus,
            meta,
            seed,
            out,
        } => {
            let corpus = load_corpus(&corpus, &meta)?;
            let model: AnyModel = match kind {
                BaselineKind::Itemknn => CooccurrenceModel::fit(&corpus).into(),
                BaselineKind::Fpmc => FpmcModel::fit(
                    &corpus,
                    &FpmcHyper {
                        seed,
                        ..Default::default()
                    },
                )?
                .into(),
                BaselineKind::Popularity => PopularityModel::fit(&corpus).into(),
                BaselineKind::Random => RandomModel::new(corpus.vocabulary.clone(), seed).into(),
            };
            save_model(model, &out)?;
        }

        Command::Recommend {
            model,
            prefix,
            k,
            no_mask,
        } => {
            let model = load_model(&model)?;
            let prefix = parse_prefix(&model, &prefix)?;
            if k == 0 {
                bail!("k must be at least 1");
            }
            let ranked = match model.recommend(&prefix, k, !no_mask) {
                Err(RecommendError::KTooLarge) => Vec::new(),
                other => other?,
            };
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for (rank, (id, score)) in ranked.iter().enumerate() {
                writeln!(out, "{}\t{}\t{}", rank + 1, model.vocabulary().name(*id), score)?;
            }
        }

        Command::Split {
            corpus,
            meta,
            ratio,
            seed,
            out_train,
            out_test,
        } => {
            let corpus = load_corpus(&corpus, &meta)?;
            let (train, test) = split_corpus(&corpus, ratio, seed)?;
            write_corpus(&train, create(&out_train)?)?;
            write_corpus(&test, create(&out_test)?)?;
            eprintln!("{} train / {} test concerts", train.concerts.len(), test.concerts.len());
        }

        Command::Evaluate {
            train_corpus,
            test_corpus,
            meta,
            models,
            k_max,
            seed,
            out,
            csv,
        } => {
            let train = load_corpus(&train_corpus, &meta)?;
            let test = load_corpus(&test_corpus, &meta)?;
            audit_leakage("train corpus", train.concert_ids(), &test)?;
            let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&dyn Recommender> = loaded.iter().map(|m| m as &dyn Recommender).collect();
            let report = run_evaluation(&refs, &test, k_max, seed)?;
            serde_json::to_writer_pretty(create(&out)?, &report)?;
            if let Some(path) = csv {
                report.write_csv(create(&path)?)?;
            }
            for m in &report.models {
                eprintln!(
                    "{:28} precision@{k_max} {:.4}  ndcg@{k_max} {:.4}",
                    m.name,
                    m.precision_at(k_max),
                    m.ndcg_at(k_max)
                );
            }
        }

        Command::Ablate {
            corpus,
            meta,
            seeds,
            dim,
            epochs,
            lr,
            out,
        } => {
            let corpus = load_corpus(&corpus, &meta)?;
            let cfg = PipelineConfig {
                skipgram: SkipgramHyper {
                    dim,
                    ..Default::default()
                },
                train: TrainHyper {
                    epochs,
                    lr,
                    ..Default::default()
                },
                ..Default::default()
            };
            let mut tables = Vec::new();
            for seed in seeds {
                let table = run_ablation(&corpus, seed, &cfg)?;
                print!("seed {seed}\n{}", table.to_tsv());
                tables.push(table);
            }
            if let Some(path) = out {
                serde_json::to_writer_pretty(create(&path)?, &tables)?;
            }
        }

        Command::Serve {
            model,
            port,
            host,
            session_ttl_hours,
        } => {
            let bytes = std::fs::read(&model).with_context(|| format!("reading {}", model.display()))?;
            let ttl = Duration::from_secs_f64(session_ttl_hours * 3600.0);
            let state = Arc::new(ragam_service::AppState::from_model_bytes(&bytes, ttl)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                ragam_service::serve(state, listener).await
            })?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
