use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrq_core::eval::GridPoint;
use mrq_core::index::INDEX_MAGIC;
use mrq_core::pca::{energy_fraction, DEFAULT_SAMPLE_LIMIT, PCA_MAGIC};
use mrq_core::quant::{DEFAULT_EPSILON0, DEFAULT_QUERY_BITS};
use mrq_core::synth::SpectralGaussian;
use mrq_core::*;

#[derive(Parser)]
#[command(
    name = "mrq",
    version,
    about = "Approximate nearest-neighbor search with MRQ indexes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus
    Generate(GenerateArgs),
    /// Fit the PCA rotation of a corpus
    TrainPca(TrainPcaArgs),
    /// Build and save an index
    Build(BuildArgs),
    /// Exact K nearest neighbors of every query
    Groundtruth(GroundtruthArgs),
    /// Query an index
    Search(SearchArgs),
    /// Recall and latency over a parameter grid, as CSV
    Bench(BenchArgs),
    /// PCA variance spectrum and energy levels
    Spectrum(SpectrumArgs),
    /// Describe an index, PCA model or vecs file
    Info(InfoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Corpus {
    GistLike,
    EmbedLike,
    PowerLaw,
    Isotropic,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Corpus,
    /// Number of vectors
    #[arg(long)]
    n: usize,
    /// Dimension for power-law and isotropic corpora
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 1.5)]
    exponent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A vecs file; the element type comes from the extension unless `--kind` says otherwise.
#[derive(Args)]
struct Input {
    base: PathBuf,
    #[arg(long)]
    kind: Option<ElementKind>,
}

#[derive(Args)]
struct TrainPcaArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_LIMIT)]
    sample_limit: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildOptions {
    /// Quantized head dimension
    #[arg(long)]
    d: Option<usize>,
    /// Number of clusters
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_QUERY_BITS)]
    query_bits: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reuse a model written by `train-pca`
    #[arg(long)]
    pca: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    options: BuildOptions,
    /// Default bound parameters stored with the index
    #[arg(long, default_value_t = DEFAULT_EPSILON0)]
    epsilon0: f32,
    #[arg(long, default_value_t = distance::DEFAULT_M)]
    m: f32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroundtruthArgs {
    #[command(flatten)]
    input: Input,
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    topk: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Either a saved index or a corpus to build one from on the fly.
#[derive(Args)]
struct IndexSource {
    #[arg(long, required_unless_present = "base", conflicts_with = "base")]
    index: Option<PathBuf>,
    #[arg(long)]
    base: Option<PathBuf>,
    #[command(flatten)]
    build: BuildOptions,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    source: IndexSource,
    queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[arg(long, default_value_t = 16)]
    nprobe: usize,
    /// Overrides the value stored in the index
    #[arg(long)]
    epsilon0: Option<f32>,
    /// Overrides the value stored in the index
    #[arg(long)]
    m: Option<f32>,
    #[arg(long, default_value = "full")]
    mode: SearchMode,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Report recall against these neighbor ids
    #[arg(long)]
    groundtruth: Option<PathBuf>,
    /// Write result ids as ivecs
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: IndexSource,
    queries: PathBuf,
    groundtruth: PathBuf,
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    nprobe: Vec<usize>,
    /// Comma-separated; defaults to the value stored in the index
    #[arg(long, value_delimiter = ',')]
    epsilon0: Vec<f32>,
    /// Comma-separated; defaults to the value stored in the index
    #[arg(long, value_delimiter = ',')]
    m: Vec<f32>,
    #[arg(long, default_value = "full")]
    mode: SearchMode,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_LIMIT)]
    sample_limit: usize,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Per-dimension CSV destination
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    path: PathBuf,
    #[arg(long)]
    kind: Option<ElementKind>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &MrqError) -> u8 {
    match e {
        MrqError::InvalidConfig(_) => 1,
        MrqError::Query { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::TrainPca(a) => {
            let data = a.input.read()?;
            let t = Instant::now();
            let pca = train_pca(&data, a.sample_limit)?;
            std::fs::write(&a.out, pca.to_bytes())?;
            eprintln!("trained {}-dim PCA in {:.1?}", pca.dim(), t.elapsed());
            Ok(())
        }
        Command::Build(a) => {
            let data = a.input.read()?;
            let index = a.options.build(&data, a.epsilon0, a.m)?;
            index.save(&a.out)?;
            Ok(())
        }
        Command::Groundtruth(a) => {
            let data = a.input.read()?;
            let queries = read_matrix(&a.queries, None)?;
            let gt = pool(a.threads)?.install(|| generate_groundtruth(&data, &queries, a.topk))?;
            write_ivecs(&a.out, &gt)
        }
        Command::Search(a) => search_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Spectrum(a) => {
            let data = a.input.read()?;
            let report = pool(a.threads)?.install(|| spectrum_report(&data, a.sample_limit))?;
            for (frac, d) in report.levels() {
                println!("{:>3}% variance: d = {d}", (frac * 100.0).round());
            }
            if let Some(out) = a.out {
                std::fs::write(out, report.to_csv())?;
            }
            Ok(())
        }
        Command::Info(a) => info(&a.path, a.kind),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let g = match a.kind {
        Corpus::GistLike => SpectralGaussian::gist_like(),
        Corpus::EmbedLike => SpectralGaussian::embed_like(),
        Corpus::PowerLaw => SpectralGaussian::power_law(a.dim, a.exponent, a.seed),
        Corpus::Isotropic => SpectralGaussian::isotropic(a.dim, a.seed),
    };
    let kind = ElementKind::from_path(&a.out).unwrap_or(ElementKind::F32);
    write_vecs(&a.out, &g.sample(a.n, a.seed), kind)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MrqError::InvalidConfig(format!("cannot start worker pool: {e}")))
}

fn read_matrix(path: &Path, kind: Option<ElementKind>) -> Result<Matrix> {
    let kind = kind
        .or_else(|| ElementKind::from_path(path))
        .ok_or_else(|| {
            MrqError::InvalidConfig(format!(
                "cannot tell the element type of {}; pass --kind",
                path.display()
            ))
        })?;
    read_vecs(path, kind)
}

impl Input {
    fn read(&self) -> Result<Matrix> {
        read_matrix(&self.base, self.kind)
    }
}

impl BuildOptions {
    fn build(&self, data: &Matrix, epsilon0: f32, m: f32) -> Result<IvfIndex> {
        let d = self
            .d
            .ok_or_else(|| MrqError::InvalidConfig("--d is required to build an index".into()))?;
        let config = IndexConfig {
            k: self.k,
            epsilon0,
            m,
            query_bits: self.query_bits,
            seed: self.seed,
            ..IndexConfig::new(d)
        };
        let t = Instant::now();
        let index = match &self.pca {
            Some(path) => {
                let pca = PcaModel::from_bytes(&std::fs::read(path)?)?;
                IvfIndex::build_with_pca(data, pca, &config)?
            }
            None => IvfIndex::build(data, &config)?,
        };
        eprintln!(
            "built {} vectors into {} clusters (D = {}, d = {}) in {:.1?}",
            index.len(),
            index.k(),
            index.dim(),
            index.d(),
            t.elapsed()
        );
        Ok(index)
    }
}

impl IndexSource {
    fn open(&self) -> Result<IvfIndex> {
        match (&self.index, &self.base) {
            (Some(path), _) => IvfIndex::load(path),
            (None, Some(base)) => self.build.build(
                &read_matrix(base, None)?,
                DEFAULT_EPSILON0,
                distance::DEFAULT_M,
            ),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn search_cmd(a: SearchArgs) -> Result<()> {
    let index = a.source.open()?;
    let queries = read_matrix(&a.queries, None)?;
    let mut params = SearchParams::for_index(&index, a.topk, a.nprobe).with_mode(a.mode);
    params.epsilon0 = a.epsilon0.unwrap_or(params.epsilon0);
    params.m = a.m.unwrap_or(params.m);
    let t = Instant::now();
    let out = batch_search(&queries, &index, &params, a.threads)?;
    let elapsed = t.elapsed();
    let ids: Vec<Vec<u32>> = out
        .results
        .iter()
        .map(|r| r.iter().map(|n| n.id).collect())
        .collect();
    let n = queries.rows().max(1) as f64;
    println!("queries: {}", queries.rows());
    println!(
        "elapsed: {:.3} s ({:.3} ms/query)",
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e3 / n
    );
    println!(
        "scanned/query: {:.1}",
        out.stats.candidates_scanned as f64 / n
    );
    println!("exact ratio: {:.4}", out.stats.exact_ratio());
    if let Some(gt) = a.groundtruth {
        println!(
            "recall@{}: {:.4}",
            a.topk,
            recall_at_k(&ids, &read_ivecs(gt)?, a.topk)?
        );
    }
    if let Some(path) = a.out {
        write_ivecs(path, &ids)?;
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let index = a.source.open()?;
    let queries = read_matrix(&a.queries, None)?;
    let gt = read_ivecs(&a.groundtruth)?;
    let eps = if a.epsilon0.is_empty() {
        vec![index.config().epsilon0]
    } else {
        a.epsilon0
    };
    let ms = if a.m.is_empty() {
        vec![index.config().m]
    } else {
        a.m
    };
    let mut nprobes = a.nprobe;
    nprobes.sort_unstable();
    let mut grid = Vec::new();
    for &epsilon0 in &eps {
        for &m in &ms {
            for &nprobe in &nprobes {
                grid.push(GridPoint {
                    nprobe,
                    epsilon0,
                    m,
                    mode: a.mode,
                });
            }
        }
    }
    let csv = bench(&index, &queries, &gt, a.topk, &grid)?.to_csv();
    match a.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn info(path: &Path, kind: Option<ElementKind>) -> Result<()> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(INDEX_MAGIC) {
        let index = IvfIndex::from_bytes(&bytes)?;
        let sizes: Vec<usize> = index.blocks().iter().map(|b| b.len()).collect();
        let c = index.config();
        println!(
            "index: {} vectors, D = {}, d = {}",
            index.len(),
            index.dim(),
            index.d()
        );
        println!(
            "clusters: {} (sizes {}..={})",
            index.k(),
            sizes.iter().min().unwrap_or(&0),
            sizes.iter().max().unwrap_or(&0)
        );
        println!(
            "head energy: {:.4}",
            energy_fraction(index.pca(), index.d())
        );
        println!(
            "epsilon0 = {}, m = {}, query bits = {}, seed = {}",
            c.epsilon0, c.m, c.query_bits, c.seed
        );
        println!("file size: {} bytes", bytes.len());
    } else if bytes.starts_with(PCA_MAGIC) {
        let pca = PcaModel::from_bytes(&bytes)?;
        println!("pca: D = {}", pca.dim());
        for (frac, d) in SpectrumReport::from_model(&pca)?.levels() {
            println!("{:>3}% variance: d = {d}", (frac * 100.0).round());
        }
    } else {
        let kind = kind
            .or_else(|| ElementKind::from_path(path))
            .ok_or_else(|| {
                MrqError::InvalidConfig(format!(
                    "{} is not an index or PCA file; pass --kind for vecs files",
                    path.display()
                ))
            })?;
        let f = DatasetFile::inspect(path, kind)?;
        println!("{}: {} vectors of dimension {}", f.kind, f.count, f.dim);
    }
    Ok(())
}
