// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use walkdir::WalkDir;

use scopy::commitcpg::{build_commit_cpg, SliceOptions};
use scopy::embed::embed_graph;
use scopy::embed::EmbeddedGraph;
use scopy::ingest::{CommitBundle, CommitSource, FixtureSource, HttpSource, COMMIT_API_ENV};
use scopy::keywords::{extract_keywords, fit_lda, lda_tokens, score_tokens, ExtractConfig, KeywordSet, LdaConfig};
use scopy::model::{init_params, train, AttentionMode, Checkpoint, ModelConfig};
use scopy::patterns::{report, tag, PatternCategory};
use scopy::pipeline::{run_augmented, run_base, run_pilot, Classifier, PipelineConfig, StageReport};
use scopy::store::http::{serve, AppState};
use scopy::store::{Store, StoreConfig, VoteLabel};

#[derive(Parser)]
#[command(name = "scopy", version, about = "Find security-fixing commits and manage their review")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "SCOPY_DATA_DIR", default_value = "scopy-data")]
    data_dir: PathBuf,
    /// Worker threads for per-commit stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct AnalysisArgs {
    /// Glob of paths to leave out; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    /// Secure API table for pattern tagging.
    #[arg(long)]
    api_table: Option<PathBuf>,
    /// Keyword file; the built-in list when omitted.
    #[arg(long)]
    keywords: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EmbedArgs {
    #[arg(long, default_value_t = scopy::embed::DEFAULT_EMBED_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    embed_seed: u64,
    /// Token-vector file (`token<TAB>v1,...,vd`) instead of hashing.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attention {
    Shared,
    PerEdgeType,
}

#[derive(Clone, Copy, ValueEnum)]
enum VoteArg {
    Security,
    NonSecurity,
    Unsure,
}

#[derive(Subcommand)]
enum Command {
    /// Store commits linked from a CVE reference table (`cve<TAB>url[<TAB>cwe]`).
    Ingest {
        #[arg(long)]
        cve_refs: PathBuf,
        /// Read commits from a fixture tree instead of the commit API.
        #[arg(long)]
        source_dir: Option<PathBuf>,
        /// Commit API base URL.
        #[arg(long, env = COMMIT_API_ENV)]
        api: Option<String>,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Store commits whose messages match a security keyword.
    Filter {
        #[arg(long)]
        commits: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Score commits with a trained model and store those above threshold.
    Classify {
        #[arg(long)]
        commits: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Write the sliced commit graph of every commit as JSON lines.
    BuildGraph {
        #[arg(long)]
        commits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Write featurized commit graphs as JSON lines.
    Embed {
        #[arg(long)]
        commits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label attached to every graph (1 = security fix).
        #[arg(long)]
        label: Option<u8>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Train the classifier on labeled graph files.
    Train {
        /// Graph JSON-lines files.
        #[arg(long, required = true, num_args = 1..)]
        graphs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 32)]
        mlp_hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "shared")]
        attention: Attention,
    },
    /// Mine security keywords from two sets of commit messages.
    MineKeywords {
        /// Directory of security-fix messages (`*.txt` files).
        #[arg(long)]
        security: PathBuf,
        #[arg(long)]
        nonsecurity: PathBuf,
        /// Topics for the topic-model channel; 0 disables it.
        #[arg(long, default_value_t = 10)]
        lda_topics: usize,
        #[arg(long, default_value_t = 5)]
        freq_min: u64,
        #[arg(long, default_value_t = 0.8)]
        corr_min: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tag bundles with fix-pattern categories and print the distribution.
    TagPatterns {
        /// JSON lines of commit bundles.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        api_table: Option<PathBuf>,
        /// Per-commit labels as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics as JSON.
    Stats {
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Record an annotator's vote.
    Vote {
        commit_id: String,
        #[arg(long)]
        annotator: String,
        #[arg(long, value_enum)]
        label: VoteArg,
    },
    /// Write every record to a JSON-lines file.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Load records from an export file.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Serve the triage API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn open_store(cli: &Cli) -> Result<Store> {
    Store::open(&cli.data_dir, &StoreConfig::default()).with_context(|| format!("opening store {}", cli.data_dir.display()))
}

fn pipeline_config(cli: &Cli, a: &AnalysisArgs) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(&cli.data_dir);
    cfg.exclude = a.exclude.clone();
    cfg.api_table = a.api_table.clone();
    cfg.keyword_file = a.keywords.clone();
    cfg.workers = cli.workers;
    cfg
}

fn finish(report: StageReport) -> Result<()> {
    for s in &report.skipped {
        log::warn!("skipped {}: {} ({})", s.item, s.code, s.message);
    }
    print_json(&report)
}

fn commit_bundles(dir: &Path) -> Result<Vec<Result<CommitBundle, String>>> {
    let src = FixtureSource::new(dir);
    Ok(src
        .list()?
        .into_iter()
        .map(|r| src.fetch_commit(&r.owner, &r.repo, &r.hash).map_err(|e| format!("{}/{}@{}: {e}", r.owner, r.repo, r.hash)))
        .collect())
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn messages(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "txt") {
            out.push(std::fs::read_to_string(entry.path())?);
        }
    }
    if out.is_empty() {
        bail!("no .txt messages under {}", dir.display());
    }
    Ok(out)
}

fn embed_config(a: &EmbedArgs) -> scopy::pipeline::EmbedConfig {
    scopy::pipeline::EmbedConfig {
        dim: a.dim,
        seed: a.embed_seed,
        vectors: a.vectors.clone(),
    }
}

fn filter_for(exclude: &[String]) -> scopy::ingest::SourceFilter {
    scopy::ingest::SourceFilter {
        exclude: exclude.to_vec(),
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            cve_refs,
            source_dir,
            api,
            analysis,
        } => {
            let store = open_store(&cli)?;
            let cfg = pipeline_config(&cli, analysis);
            let source: Box<dyn CommitSource> = match (source_dir, api) {
                (Some(d), _) => Box::new(FixtureSource::new(d)),
                (None, Some(url)) => Box::new(HttpSource::new(url.clone())),
                (None, None) => bail!("give --source-dir or --api (or set {COMMIT_API_ENV})"),
            };
            finish(run_base(&cfg, &store, source.as_ref(), cve_refs)?)
        }
        Command::Filter { commits, analysis } => {
            let store = open_store(&cli)?;
            let cfg = pipeline_config(&cli, analysis);
            let keywords = cfg.keywords()?;
            finish(run_pilot(&cfg, &store, commits, &keywords)?)
        }
        Command::Classify {
            commits,
            checkpoint,
            threshold,
            embed,
            analysis,
        } => {
            let store = open_store(&cli)?;
            let mut cfg = pipeline_config(&cli, analysis);
            cfg.checkpoint = Some(checkpoint.clone());
            cfg.threshold = *threshold;
            cfg.embed = embed_config(embed);
            let model = Classifier::load(&cfg)?;
            finish(run_augmented(&cfg, &store, commits, &model)?)
        }
        Command::BuildGraph { commits, out, exclude } => {
            let filter = filter_for(exclude);
            let mut docs = Vec::new();
            for b in commit_bundles(commits)? {
                match b.map_err(|e| e.to_string()).and_then(|b| build_commit_cpg(&b, &filter, &SliceOptions::default()).map_err(|e| format!("{}: {e}", b.commit_id()))) {
                    Ok(g) => docs.push(g.to_document()),
                    Err(e) => log::warn!("skipped {e}"),
                }
            }
            write_lines(out, &docs)?;
            eprintln!("wrote {} graphs to {}", docs.len(), out.display());
            Ok(())
        }
        Command::Embed {
            commits,
            out,
            label,
            embed,
            exclude,
        } => {
            if label.is_some_and(|l| l > 1) {
                bail!("label must be 0 or 1");
            }
            let embedder = embed_config(embed).embedder()?;
            let filter = filter_for(exclude);
            let mut graphs: Vec<EmbeddedGraph> = Vec::new();
            for b in commit_bundles(commits)? {
                let b = match b {
                    Ok(b) => b,
                    Err(e) => {
                        log::warn!("skipped {e}");
                        continue;
                    }
                };
                match build_commit_cpg(&b, &filter, &SliceOptions::default()) {
                    Ok(g) => graphs.push(embed_graph(&g.graph, embedder.as_ref(), &b.commit_id(), *label)?),
                    Err(e) => log::warn!("skipped {}: {e}", b.commit_id()),
                }
            }
            write_lines(out, &graphs)?;
            eprintln!("wrote {} graphs to {}", graphs.len(), out.display());
            Ok(())
        }
        Command::Train {
            graphs,
            out,
            epochs,
            lr,
            hidden,
            heads,
            mlp_hidden,
            seed,
            threshold,
            attention,
        } => {
            let mut data: Vec<EmbeddedGraph> = Vec::new();
            for g in graphs {
                data.extend(read_lines::<EmbeddedGraph>(g)?);
            }
            let embed_dim = data.first().map(|g| g.feature_dim()).context("no training graphs")?;
            let cfg = ModelConfig {
                embed_dim,
                hidden_dim: *hidden,
                heads: *heads,
                mlp_hidden: *mlp_hidden,
                learning_rate: *lr,
                epochs: *epochs,
                seed: *seed,
                threshold: *threshold,
                attention: match attention {
                    Attention::Shared => AttentionMode::Shared,
                    Attention::PerEdgeType => AttentionMode::PerEdgeType,
                },
                ..ModelConfig::default()
            };
            let (params, history) = train(&init_params(&cfg, cfg.seed)?, &data, &cfg)?;
            Checkpoint::new(&cfg, &params, &history).save(out)?;
            eprintln!("trained on {} graphs; final loss {:.6}", data.len(), history.last().copied().unwrap_or(f64::NAN));
            Ok(())
        }
        Command::MineKeywords {
            security,
            nonsecurity,
            lda_topics,
            freq_min,
            corr_min,
            seed,
            out,
        } => {
            let sec = messages(security)?;
            let non = messages(nonsecurity)?;
            let sec_refs: Vec<&str> = sec.iter().map(String::as_str).collect();
            let non_refs: Vec<&str> = non.iter().map(String::as_str).collect();
            let table = score_tokens(&sec_refs, &non_refs);
            let lda = if *lda_topics > 0 {
                let docs: Vec<Vec<String>> = sec.iter().map(|m| lda_tokens(m)).collect();
                Some(fit_lda(
                    &docs,
                    &LdaConfig {
                        topics: *lda_topics,
                        seed: *seed,
                        ..LdaConfig::default()
                    },
                )?)
            } else {
                None
            };
            let defaults = KeywordSet::default();
            let seeds = defaults.phrases(1);
            let cfg = ExtractConfig {
                freq_min: *freq_min,
                corr_min: *corr_min,
                ..ExtractConfig::default()
            };
            let ks = extract_keywords(&table, &cfg, lda.as_ref(), &seeds);
            ks.save(out)?;
            eprintln!("wrote {} keywords to {}", ks.len(), out.display());
            Ok(())
        }
        Command::TagPatterns { input, api_table, out } => {
            let table = match api_table {
                Some(p) => scopy::patterns::SecureApiTable::load(p)?,
                None => Default::default(),
            };
            let bundles: Vec<CommitBundle> = read_lines(input)?;
            #[derive(Serialize)]
            struct Tagged {
                commit_id: String,
                #[serde(flatten)]
                label: scopy::patterns::PatternLabel,
            }
            let tagged: Vec<Tagged> = bundles
                .iter()
                .map(|b| Tagged {
                    commit_id: b.commit_id(),
                    label: tag(b, &table),
                })
                .collect();
            if let Some(p) = out {
                write_lines(p, &tagged)?;
            }
            let cats: Vec<PatternCategory> = tagged.iter().map(|t| t.label.category).collect();
            print!("{}", report(&cats)?.to_tsv());
            Ok(())
        }
        Command::Stats { top } => print_json(&open_store(&cli)?.stats(*top)),
        Command::Vote { commit_id, annotator, label } => {
            let label = match label {
                VoteArg::Security => VoteLabel::Security,
                VoteArg::NonSecurity => VoteLabel::NonSecurity,
                VoteArg::Unsure => VoteLabel::Unsure,
            };
            print_json(&open_store(&cli)?.vote_and_settle(commit_id, annotator, label)?)
        }
        Command::Export { out } => {
            let n = open_store(&cli)?.export(out)?;
            eprintln!("exported {n} records to {}", out.display());
            Ok(())
        }
        Command::Import { input } => {
            let n = open_store(&cli)?.import(input)?;
            eprintln!("imported {n} records");
            Ok(())
        }
        Command::Serve { port, host } => {
            let store = Arc::new(open_store(&cli)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(Arc::new(AppState::new(store)), addr))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
