//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 computation error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datasets::{generate_swiss_roll, SwissRollSpec};
use crate::error::{Error, Result};
use crate::harness::{evaluate, normalize_cloud, Normalization, ScoreOptions};
use crate::io::{
    load_labeled_csv, read_labeled_csv, read_profile_csv, write_labeled_csv, write_report_csv,
    write_similarity_csv, CandidateManifest, DEFAULT_LABEL_COLUMN,
};
use crate::model::{IndexId, IndexScore, LabeledPointCloud};
use crate::psi::{CentroidMode, PairScore};
use crate::scoring::Scorer;
use crate::seed::derive_seed;
use crate::significance::{is_significant, NullModelSummary, DEFAULT_ALPHA, DEFAULT_REPLICATES};
use crate::similarity::{similarity_map, IndexProfileMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "sepscore", version, about = "Group separability indices for labeled embeddings")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Master seed for every random step.
    #[arg(long, global = true, env = "SEPSCORE_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CentroidArg {
    Mean,
    Median,
    Mode,
}

impl From<CentroidArg> for CentroidMode {
    fn from(c: CentroidArg) -> Self {
        match c {
            CentroidArg::Mean => CentroidMode::Mean,
            CentroidArg::Median => CentroidMode::Median,
            CentroidArg::Mode => CentroidMode::Mode,
        }
    }
}

#[derive(Debug, Args)]
struct CloudInput {
    /// Labeled CSV file; `-` or nothing reads standard input.
    input: Option<PathBuf>,

    #[arg(long = "label-col", default_value = DEFAULT_LABEL_COLUMN)]
    label_col: String,

    /// Normalization applied to the coordinates before scoring.
    #[arg(long, default_value = "NON", value_parser = parse_normalization)]
    normalize: Normalization,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one labeled cloud.
    Score {
        #[command(flatten)]
        cloud: CloudInput,
        /// Comma-separated indices (default: all nine).
        #[arg(long, value_delimiter = ',', value_parser = parse_index)]
        indices: Vec<IndexId>,
        #[arg(long, value_enum, default_value_t = CentroidArg::Median)]
        centroid: CentroidArg,
        /// Also run the label-permutation null model.
        #[arg(long)]
        null: bool,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Score every candidate of a manifest and rank the methods.
    Evaluate {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_index)]
        indices: Vec<IndexId>,
        #[arg(long, value_enum, default_value_t = CentroidArg::Median)]
        centroid: CentroidArg,
        /// Null-model replicates per index; 0 skips the null model.
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Permutation null model of one index.
    Nullmodel {
        #[command(flatten)]
        cloud: CloudInput,
        #[arg(long, value_parser = parse_index)]
        index: IndexId,
        #[arg(long, value_enum, default_value_t = CentroidArg::Median)]
        centroid: CentroidArg,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Index-similarity map from a profile CSV or from evaluation reports.
    Similarity {
        /// One profile CSV (`index,<columns...>`) or one or more JSON reports.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Generate a swiss roll split into arcs, as labeled CSV.
    #[command(name = "gen-swissroll")]
    GenSwissroll {
        #[arg(long = "n", default_value_t = 723)]
        n_points: usize,
        #[arg(long, default_value_t = 3)]
        arcs: usize,
        #[arg(long = "gap-fraction", default_value_t = 0.1)]
        gap_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Also write the spiral parameter of every point to this CSV.
        #[arg(long = "t-out")]
        t_out: Option<PathBuf>,
    },
}

fn parse_index(s: &str) -> std::result::Result<IndexId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_normalization(s: &str) -> std::result::Result<Normalization, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("sepscore: usage error: {}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("sepscore: usage error: {m}");
            1
        }
        Err(CliError::Run(e)) if e.is_data_error() => {
            eprintln!("sepscore: data error: {e}");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("sepscore: computation error: {e}");
            3
        }
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

fn dispatch(cli: Cli) -> std::result::Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Score { alpha, .. } | Command::Evaluate { alpha, .. } | Command::Nullmodel { alpha, .. }
            if !(*alpha > 0.0 && *alpha < 1.0) =>
        {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
        }
        Command::Nullmodel { replicates: 0, .. } => {
            return Err(CliError::Usage("--replicates must be at least 1".into()));
        }
        Command::Score { null: true, replicates: 0, .. } => {
            return Err(CliError::Usage("--replicates must be at least 1 with --null".into()));
        }
        _ => {}
    }
    let pool = match g.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Usage(e.to_string()))?,
        None => rayon::ThreadPoolBuilder::new().build().map_err(|e| CliError::Usage(e.to_string()))?,
    };
    pool.install(|| run_command(&cli))
}

fn run_command(cli: &Cli) -> std::result::Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Score { cloud, indices, centroid, null, replicates, alpha } => {
            let (name, cloud) = read_cloud(cloud)?;
            let indices = or_all(indices);
            let out = score_cloud(&name, &cloud, &indices, (*centroid).into(), null.then_some(*replicates), g.seed, *alpha)?;
            emit(g, |w, fmt| match fmt {
                Format::Json => write_json(w, &out),
                Format::Csv => write_score_csv(w, &out),
            })?;
        }
        Command::Evaluate { manifest, indices, centroid, replicates, alpha } => {
            let m = CandidateManifest::load(manifest)?;
            let candidates = m.load_candidates()?;
            let opts = ScoreOptions { mode: (*centroid).into(), replicates: *replicates, seed: g.seed };
            let report = evaluate(&m.dataset, &candidates, &or_all(indices), &opts, *alpha)?;
            emit(g, |w, fmt| match fmt {
                Format::Json => write_json(w, &report),
                Format::Csv => write_report_csv(&report, w),
            })?;
        }
        Command::Nullmodel { cloud, index, centroid, replicates, alpha } => {
            let (name, cloud) = read_cloud(cloud)?;
            let scorer = Scorer::new(&cloud, (*centroid).into());
            let summary = scorer.null_model(*index, *replicates, g.seed)?;
            let out = NullOutput {
                schema_version: SCHEMA_VERSION,
                dataset: name,
                centroid: (*centroid).into(),
                alpha: *alpha,
                significant: is_significant(&summary, *alpha),
                null: summary,
            };
            emit(g, |w, fmt| match fmt {
                Format::Json => write_json(w, &out),
                Format::Csv => {
                    let s = &out.null;
                    let mut c = csv::Writer::from_writer(w);
                    c.write_record(["index", "observed", "null_mean", "null_se", "p", "p_conservative", "replicates", "seed", "significant"])?;
                    c.write_record([
                        index.to_string(),
                        fmt_num(s.observed),
                        fmt_num(s.null_mean),
                        fmt_num(s.null_se),
                        fmt_num(s.p_value),
                        fmt_num(s.p_conservative),
                        s.replicates.to_string(),
                        s.seed.to_string(),
                        out.significant.to_string(),
                    ])?;
                    c.flush().map_err(|e| Error::io("<stdout>", e))
                }
            })?;
        }
        Command::Similarity { inputs } => {
            let matrix = read_profile(inputs)?;
            let map = similarity_map(&matrix)?;
            emit(g, |w, fmt| match fmt {
                Format::Json => write_json(w, &map),
                Format::Csv => write_similarity_csv(&map, w),
            })?;
        }
        Command::GenSwissroll { n_points, arcs, gap_fraction, noise, t_out } => {
            let spec = SwissRollSpec {
                n_points: *n_points,
                n_arcs: *arcs,
                gap_fraction: *gap_fraction,
                noise_sd: *noise,
                seed: g.seed,
                ..Default::default()
            };
            let roll = generate_swiss_roll(&spec)?;
            emit(g, |w, _| write_labeled_csv(&roll.cloud, w, Some(&["x", "y", "z"]), DEFAULT_LABEL_COLUMN))?;
            if let Some(p) = t_out {
                let f = File::create(p).map_err(|e| Error::io(p, e))?;
                let mut c = csv::Writer::from_writer(BufWriter::new(f));
                c.write_record(["t", "label"]).map_err(Error::from)?;
                for (t, l) in roll.t.iter().zip(roll.cloud.labels()) {
                    c.write_record([format!("{t:?}"), l.clone()]).map_err(Error::from)?;
                }
                c.flush().map_err(|e| Error::io(p, e))?;
            }
        }
    }
    Ok(())
}

fn or_all(indices: &[IndexId]) -> Vec<IndexId> {
    if indices.is_empty() {
        IndexId::ALL.to_vec()
    } else {
        let mut seen = Vec::new();
        for &i in indices {
            if !seen.contains(&i) {
                seen.push(i);
            }
        }
        seen
    }
}

fn read_cloud(input: &CloudInput) -> Result<(String, LabeledPointCloud)> {
    let (name, cloud) = match input.input.as_deref() {
        None => ("-".to_string(), read_stdin_cloud(&input.label_col)?),
        Some(p) if p == Path::new("-") => ("-".to_string(), read_stdin_cloud(&input.label_col)?),
        Some(p) => (p.display().to_string(), load_labeled_csv(p, &input.label_col)?),
    };
    Ok((name, normalize_cloud(&cloud, input.normalize)?))
}

fn read_stdin_cloud(label_col: &str) -> Result<LabeledPointCloud> {
    let mut buf = Vec::new();
    io::stdin().read_to_end(&mut buf).map_err(|e| Error::io("<stdin>", e))?;
    read_labeled_csv(buf.as_slice(), label_col)
}

fn read_profile(inputs: &[PathBuf]) -> Result<IndexProfileMatrix> {
    let is_json = |p: &PathBuf| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if inputs.iter().all(is_json) {
        let reports = inputs
            .iter()
            .map(|p| {
                let f = File::open(p).map_err(|e| Error::io(p, e))?;
                Ok(serde_json::from_reader(io::BufReader::new(f))?)
            })
            .collect::<Result<Vec<_>>>()?;
        return IndexProfileMatrix::from_reports(&reports);
    }
    match inputs {
        [p] => {
            let f = File::open(p).map_err(|e| Error::io(p, e))?;
            read_profile_csv(f)
        }
        _ => Err(Error::InvalidArgument("give either one profile CSV or only JSON reports".into())),
    }
}

#[derive(Debug, Serialize)]
pub struct ScoreOutput {
    pub schema_version: u32,
    pub dataset: String,
    pub n_points: usize,
    pub n_dims: usize,
    pub groups: BTreeMap<String, usize>,
    pub centroid: CentroidMode,
    pub scores: BTreeMap<IndexId, IndexScore>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub psi_pairs: Vec<PairScore>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub null: BTreeMap<IndexId, NullWithVerdict>,
}

#[derive(Debug, Serialize)]
pub struct NullWithVerdict {
    #[serde(flatten)]
    pub summary: NullModelSummary,
    pub significant: bool,
}

#[derive(Debug, Serialize)]
struct NullOutput {
    schema_version: u32,
    dataset: String,
    centroid: CentroidMode,
    alpha: f64,
    null: NullModelSummary,
    significant: bool,
}

/// Scores and optional null models for one cloud, as emitted by `score`.
pub fn score_cloud(
    name: &str,
    cloud: &LabeledPointCloud,
    indices: &[IndexId],
    mode: CentroidMode,
    replicates: Option<usize>,
    seed: u64,
    alpha: f64,
) -> Result<ScoreOutput> {
    let scorer = Scorer::new(cloud, mode);
    let scores = scorer.score(indices)?.into_iter().map(|s| (s.index_id, s)).collect();
    let psi_pairs = if indices.iter().any(|i| i.is_psi()) {
        scorer.psi(cloud.grouping())?.per_pair
    } else {
        Vec::new()
    };
    let mut null = BTreeMap::new();
    if let Some(r) = replicates {
        for &id in indices {
            let summary = scorer.null_model(id, r, derive_seed(seed, &format!("score/null/{id}")))?;
            let significant = is_significant(&summary, alpha);
            null.insert(id, NullWithVerdict { summary, significant });
        }
    }
    let g = cloud.grouping();
    Ok(ScoreOutput {
        schema_version: SCHEMA_VERSION,
        dataset: name.to_string(),
        n_points: cloud.len(),
        n_dims: cloud.n_dims(),
        groups: g.names().iter().cloned().zip(g.sizes()).collect(),
        centroid: mode,
        scores,
        psi_pairs,
        null,
    })
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_score_csv(w: &mut dyn Write, out: &ScoreOutput) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["index", "value", "flag", "null_mean", "null_se", "p", "significant"])?;
    for (id, s) in &out.scores {
        let n = out.null.get(id);
        let flag = s
            .flag
            .and_then(|f| serde_json::to_value(f).ok())
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        c.write_record([
            id.to_string(),
            fmt_num(s.value),
            flag,
            n.map(|n| fmt_num(n.summary.null_mean)).unwrap_or_default(),
            n.map(|n| fmt_num(n.summary.null_se)).unwrap_or_default(),
            n.map(|n| fmt_num(n.summary.p_value)).unwrap_or_default(),
            n.map(|n| n.significant.to_string()).unwrap_or_default(),
        ])?;
    }
    c.flush().map_err(|e| Error::io("<output>", e))
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w).map_err(|e| Error::io("<output>", e))
}

fn emit<F>(g: &GlobalOpts, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write, Format) -> Result<()>,
{
    match &g.out {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w, g.format)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w, g.format)?;
            w.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}
