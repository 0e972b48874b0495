//! `sdm`: run, replay and compare semantic divergence experiments.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 provider error,
//! 4 metric or degenerate-input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdm_core::corpus::load_bundle;
use sdm_core::diagnostics::{self, se_suite};
use sdm_core::metrics::JointTopicMatrix;
use sdm_core::pipeline::{self, compare_runs, PipelineError, RunConfig, RunOutput};
use sdm_core::textproc::{provider_from_config, Embedder, EmbeddingCache, EmbeddingBackend};

#[derive(Parser)]
#[command(name = "sdm", version, about = "Semantic divergence metrics for LLM prompt/answer ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a paraphrase/answer ensemble and score it.
    Run {
        #[command(flatten)]
        common: Common,
        /// Prompt text (overrides the config).
        #[arg(long, conflicts_with = "prompt_file")]
        prompt: Option<String>,
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        /// Skip generation and score a stored bundle instead.
        #[arg(long)]
        from_bundle: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Score a stored bundle offline.
    Replay {
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Side-by-side table of two or more reports (files or run directories).
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a heatmap SVG from its CSV (or from a run directory).
    Heatmap {
        input: PathBuf,
        /// Defaults to heatmap.svg next to the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semantic entropy baseline of a stored bundle, as JSON on stdout.
    SeBaseline {
        bundle: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        se_threshold: Option<f64>,
        /// Use the offline hashing embedder regardless of the config.
        #[arg(long)]
        offline: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Exact run directory (default: a timestamped one under the output dir).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    s_star: Option<f64>,
    #[arg(long)]
    kl_star: Option<f64>,
    #[arg(long)]
    se_threshold: Option<f64>,
    /// Skip the semantic entropy baseline.
    #[arg(long)]
    no_se: bool,
    /// Use the offline hashing embedder regardless of the config.
    #[arg(long)]
    offline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn offline(cfg: &mut RunConfig) {
    cfg.embedding.backend = EmbeddingBackend::Hashing;
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = self.s_star {
            cfg.diagnostics.s_star = v;
        }
        if let Some(v) = self.kl_star {
            cfg.diagnostics.kl_star = v;
        }
        if let Some(v) = self.se_threshold {
            cfg.diagnostics.se_threshold = v;
        }
        if self.no_se {
            cfg.diagnostics.semantic_entropy = false;
        }
        if self.offline {
            offline(&mut cfg);
        }
        Ok(cfg)
    }
}

fn print_outcome(out: &RunOutput) {
    let r = &out.report;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!("run directory: {}", out.run_dir.display());
    println!("topics k = {}", r.k);
    println!("S_H = {}  KL score = {}  phi = {}", fmt(r.s_h), fmt(r.kl_score), fmt(r.phi));
    match &out.verdict {
        Some(v) => println!("semantic box: {:?}", v.regime),
        None => println!("semantic box: n/a (prompt entropy is zero)"),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| PipelineError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn heatmap(input: &Path, out: Option<PathBuf>) -> Result<(), PipelineError> {
    let csv_path = if input.is_dir() { input.join("heatmap.csv") } else { input.to_path_buf() };
    let text = std::fs::read_to_string(&csv_path).map_err(|source| PipelineError::Io { path: csv_path.clone(), source })?;
    let rows = diagnostics::parse_heatmap_csv(&text)?;
    let k = rows.len();
    let mut probs: Vec<f64> = rows.into_iter().flatten().collect();
    // The CSV is rounded to six decimals; renormalize before validation.
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    let joint = JointTopicMatrix::from_probs(k, probs, 0)?;
    let svg_path = out.unwrap_or_else(|| csv_path.with_file_name("heatmap.svg"));
    std::fs::write(&svg_path, diagnostics::heatmap_svg(&joint))
        .map_err(|source| PipelineError::Io { path: svg_path.clone(), source })?;
    println!("{}", svg_path.display());
    Ok(())
}

fn se_baseline(bundle: &Path, config: Option<&Path>, threshold: Option<f64>, offline_mode: bool) -> Result<(), PipelineError> {
    let mut cfg = load_config(config)?;
    if offline_mode {
        offline(&mut cfg);
    }
    if let Some(t) = threshold {
        cfg.diagnostics.se_threshold = t;
    }
    cfg.validate()?;
    let bundle = load_bundle(bundle).map_err(PipelineError::Bundle)?;
    let provider = provider_from_config(&cfg.embedding)
        .map_err(|e| PipelineError::Embed(sdm_core::textproc::EmbedError::Provider(e)))?;
    let mut embedder = Embedder::new(provider.as_ref(), cfg.embedding.dimension)
        .with_max_parallel(cfg.embedding.max_parallel_requests);
    if let Some(dir) = &cfg.embedding.cache_dir {
        embedder = embedder.with_cache(EmbeddingCache::new(dir));
    }
    let se = se_suite(&bundle, cfg.diagnostics.se_threshold, &embedder)?;
    println!("{}", serde_json::to_string_pretty(&se).expect("SE result serializes"));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run { common, prompt, prompt_file, from_bundle, m, n } => {
            let mut cfg = common.config()?;
            if prompt.is_some() || prompt_file.is_some() {
                cfg.prompt = prompt;
                cfg.prompt_file = prompt_file;
            }
            if let Some(m) = m {
                cfg.m_paraphrases = m;
            }
            if let Some(n) = n {
                cfg.n_answers = n;
            }
            let out = match from_bundle {
                Some(bundle) => pipeline::replay(&cfg, &bundle, common.run_dir)?,
                None => pipeline::run(&cfg, common.run_dir)?,
            };
            print_outcome(&out);
        }
        Command::Replay { bundle, common } => {
            let cfg = common.config()?;
            print_outcome(&pipeline::replay(&cfg, &bundle, common.run_dir)?);
        }
        Command::Compare { reports, format, out } => {
            let table = compare_runs(&reports)?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Markdown => table.to_markdown(),
            };
            write_or_print(out.as_deref(), &text)?;
        }
        Command::Heatmap { input, out } => heatmap(&input, out)?,
        Command::SeBaseline { bundle, config, se_threshold, offline } => {
            se_baseline(&bundle, config.as_deref(), se_threshold, offline)?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
