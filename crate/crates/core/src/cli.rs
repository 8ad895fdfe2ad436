//! Command implementations behind the `latent-spread` binary.
//!
//! Each `cmd_*` function writes its outputs under the requested directory and
//! returns what it wrote, so the commands can also be driven from code.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::batch::{
    avg_pairwise_across_batches, avg_sampled_pairs, coverage_all_pairs, coverage_at_least, coverage_combination,
    coverage_genders_and_ethnicities, Checked, CommandProvider, Ethnicity, Gender, MeanEstimate, PairwiseDistance,
    PixelL2Provider, PROVIDER_ENV,
};
use crate::color::{summarize, ChannelMeans, ColorBatchStats, DominanceFactor};
use crate::io::report::compare_reports;
use crate::io::{
    image_channel_means, load_manifest, read_labels, read_report, write_latents, write_manifest, write_npy,
    write_report, BatchManifest, DiversityReport, ManifestBatch, MetricValue,
};
use crate::sampler::{
    batch_min_distance, preset_config, sample, Preset, SampleError, SampleTrace, SamplerConfig, Strategy,
};
use crate::tensor::LatentShape;
use crate::Error;

/// Batch size above which cap-style sampling gets a warning.
pub const LARGE_BATCH: usize = 50;

/// Group name for manifest batches without a strategy tag.
pub const UNTAGGED: &str = "untagged";

#[derive(Debug, Parser)]
#[command(name = "latent-spread", version, about = "Diverse initial latents and batch-diversity metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw latent batches with a diversity strategy.
    Sample(SampleArgs),
    /// Dominant-color metrics over image batches.
    AnalyzeColor(ColorArgs),
    /// Mean pairwise distance through a distance provider.
    Pairwise(PairwiseArgs),
    /// Gender and ethnicity coverage from a label table.
    Coverage(CoverageArgs),
    /// Multiplicative improvement of one report over another.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, default_value = "pooling_max")]
    pub strategy: Strategy,
    #[arg(long, default_value = "standard")]
    pub preset: Preset,
    /// Batch sizes, comma separated.
    #[arg(short = 'B', long = "batch-size", value_delimiter = ',', default_value = "3,5,10,50")]
    pub batch_sizes: Vec<usize>,
    /// Batches per batch size; batch j uses seed + j.
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u64>,
    #[arg(long)]
    pub pool_kernel: Option<usize>,
    #[arg(long)]
    pub attempt_budget: Option<u64>,
    #[arg(long, default_value = "4x64x64")]
    pub shape: LatentShape,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a `.npy` array next to each latent file.
    #[arg(long)]
    pub npy: bool,
}

impl SampleArgs {
    pub fn new(strategy: Strategy, batch_sizes: Vec<usize>, out: impl Into<PathBuf>) -> Self {
        SampleArgs {
            strategy,
            preset: Preset::Standard,
            batch_sizes,
            batches: 1,
            seed: 0,
            d_min: None,
            n_max: None,
            pool_kernel: None,
            attempt_budget: None,
            shape: LatentShape::default(),
            out: out.into(),
            npy: false,
        }
    }

    pub fn config(&self, batch_size: usize, seed: u64) -> SamplerConfig {
        let mut c = preset_config(self.preset, self.strategy, batch_size, seed).with_shape(self.shape);
        if let Some(d) = self.d_min {
            c = c.with_d_min(d);
        }
        if let Some(n) = self.n_max {
            c = c.with_n_max(n);
        }
        if let Some(k) = self.pool_kernel {
            c = c.with_pool_kernel(k);
        }
        if let Some(b) = self.attempt_budget {
            c = c.with_attempt_budget(b);
        }
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRun {
    pub file: PathBuf,
    pub config: SamplerConfig,
    pub fingerprint: String,
    /// Smallest pairwise distance in the batch under the strategy's metric;
    /// absent for single-latent batches.
    pub batch_min_distance: Option<f64>,
    pub trace: SampleTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub manifest: PathBuf,
    pub runs: Vec<SampleRun>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| crate::io::FormatError::io(dir, e).into())
}

/// Non-fatal advice for the operator, if any.
pub fn sample_guidance(strategy: Strategy, batch_size: usize) -> Option<String> {
    (strategy.is_cap() && batch_size > LARGE_BATCH).then(|| {
        format!(
            "note: {strategy} slows down sharply for batches above {LARGE_BATCH} (B={batch_size}); \
             pooling_max is recommended for large batches"
        )
    })
}

pub fn cmd_sample(args: &SampleArgs) -> Result<SampleSummary, Error> {
    if args.batch_sizes.is_empty() {
        return Err(Error::Usage("at least one batch size is required".into()));
    }
    if args.batches == 0 {
        return Err(Error::Usage("--batches must be at least 1".into()));
    }
    create_dir(&args.out)?;
    let mut manifest = BatchManifest::default();
    let mut runs = Vec::new();
    for &b in &args.batch_sizes {
        if let Some(note) = sample_guidance(args.strategy, b) {
            eprintln!("{note}");
        }
        for j in 0..args.batches {
            let config = args.config(b, args.seed.wrapping_add(j as u64));
            let drawn = sample(&config)?;
            let id = format!("{}_b{b}_{j}", args.strategy);
            let name = format!("{id}.dlt");
            let fingerprint = config.fingerprint();
            write_latents(args.out.join(&name), &drawn.latents, fingerprint)?;
            if args.npy {
                write_npy(args.out.join(format!("{id}.npy")), &drawn.latents)?;
            }
            let min = batch_min_distance(&drawn.latents, config.distance_mode()).map_err(SampleError::from)?;
            manifest.batches.push(ManifestBatch {
                id,
                items: vec![PathBuf::from(&name)],
                prompt: None,
                strategy: Some(args.strategy.to_string()),
            });
            runs.push(SampleRun {
                file: args.out.join(&name),
                fingerprint: hex(&fingerprint),
                config,
                batch_min_distance: min.is_finite().then_some(min),
                trace: drawn.trace,
            });
        }
    }
    let manifest_path = args.out.join("manifest.json");
    write_manifest(&manifest_path, &manifest)?;
    Ok(SampleSummary {
        manifest: manifest_path,
        runs,
    })
}

fn parse_factor(s: &str) -> Result<DominanceFactor, String> {
    let k: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    DominanceFactor::new(k).map_err(|e| e.to_string())
}

fn parse_context(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Options shared by every report-producing command.
#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    /// Group whose fractions are the denominator of improvement ratios.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Extra provenance recorded in the report and its fingerprint, such as
    /// `preset=standard` or `shape=4x64x64`. Repeatable.
    #[arg(long = "context", value_parser = parse_context)]
    pub context: Vec<(String, String)>,
    #[arg(long)]
    pub out: PathBuf,
}

impl ReportArgs {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        ReportArgs {
            baseline: None,
            context: Vec::new(),
            out: out.into(),
        }
    }

    fn context(&self, own: &[(&str, String)]) -> Result<BTreeMap<String, String>, Error> {
        let mut ctx: BTreeMap<String, String> = own.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        for (k, v) in &self.context {
            if ctx.contains_key(k) {
                return Err(Error::Usage(format!("context key {k:?} is reserved")));
            }
            ctx.insert(k.clone(), v.clone());
        }
        Ok(ctx)
    }

    /// Applies the baseline and writes `report.json`, `report.csv` and, with
    /// a baseline, `improvements.csv`.
    fn finish(&self, mut report: DiversityReport) -> Result<DiversityReport, Error> {
        if let Some(b) = &self.baseline {
            report.set_baseline(b)?;
        }
        write_outputs(&self.out, "report", &report)?;
        Ok(report)
    }
}

fn write_outputs(dir: &Path, stem: &str, report: &DiversityReport) -> Result<(), Error> {
    create_dir(dir)?;
    write_report(report, dir.join(format!("{stem}.json")))?;
    let write = |name: String, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::from(crate::io::FormatError::io(&path, e)))
    };
    write(format!("{stem}.csv"), report.metrics_csv())?;
    if !report.improvements.is_empty() {
        write("improvements.csv".into(), report.improvements_csv())?;
    }
    Ok(())
}

fn group_of(batch: &ManifestBatch) -> String {
    batch.strategy.clone().unwrap_or_else(|| UNTAGGED.to_string())
}

/// Manifest batches by group, in manifest order within each group.
fn grouped(manifest: &BatchManifest) -> BTreeMap<String, Vec<&ManifestBatch>> {
    let mut groups: BTreeMap<String, Vec<&ManifestBatch>> = BTreeMap::new();
    for b in &manifest.batches {
        groups.entry(group_of(b)).or_default().push(b);
    }
    groups
}

#[derive(Debug, Clone, Args)]
pub struct ColorArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dominance factors, comma separated.
    #[arg(short = 'K', long = "factors", value_delimiter = ',', value_parser = parse_factor, default_value = "1,1.1,1.2")]
    pub factors: Vec<DominanceFactor>,
    #[command(flatten)]
    pub report: ReportArgs,
}

pub fn color_metric_key(k: DominanceFactor, metric: &str) -> String {
    format!("K={k}/{metric}")
}

pub fn cmd_analyze_color(args: &ColorArgs) -> Result<DiversityReport, Error> {
    if args.factors.is_empty() {
        return Err(Error::Usage("at least one dominance factor is required".into()));
    }
    let manifest = load_manifest(&args.manifest)?;
    let factors = args.factors.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
    let mut report = DiversityReport::new("color", args.report.context(&[("factors", factors)])?);
    for (group, batches) in grouped(&manifest) {
        let stats = batches
            .iter()
            .map(|b| {
                let means = b
                    .items
                    .iter()
                    .map(image_channel_means)
                    .collect::<Result<Vec<ChannelMeans>, _>>()?;
                Ok(ColorBatchStats::compute(&means, &args.factors)?)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        for &k in &args.factors {
            let s = summarize(&stats, k)?;
            let counts: Vec<f64> = stats.iter().map(|b| b.n_k(k).unwrap_or(0) as f64).collect();
            let spread = MeanEstimate::from_values(&counts).expect("group has batches");
            report.insert(
                &group,
                &color_metric_key(k, "avg"),
                MetricValue {
                    value: s.avg,
                    ..MetricValue::mean(&spread)
                },
            );
            report.insert(&group, &color_metric_key(k, "c3"), MetricValue::fraction(s.c3, s.batches));
            report.insert(&group, &color_metric_key(k, "c2"), MetricValue::fraction(s.c2, s.batches));
        }
    }
    args.report.finish(report)
}

#[derive(Debug, Clone, Args)]
pub struct PairwiseArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Provider command line; defaults to the LATENT_SPREAD_PROVIDER variable.
    #[arg(long, conflicts_with = "builtin")]
    pub provider: Option<String>,
    /// Use the built-in pixel RMS distance instead of an external provider.
    #[arg(long)]
    pub builtin: bool,
    /// Pooling kernel for the built-in distance.
    #[arg(long, default_value_t = 1, requires = "builtin")]
    pub kernel: u32,
    /// Also average N random same-prompt pairs per prompt, across batches.
    #[arg(long)]
    pub prompt_pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

fn resolve_provider(args: &PairwiseArgs) -> Result<(Box<dyn PairwiseDistance>, String), Error> {
    if args.builtin {
        let p = PixelL2Provider { kernel: args.kernel };
        return Ok((Box::new(p), format!("builtin-pixel-rms:kernel={}", args.kernel)));
    }
    let line = match &args.provider {
        Some(line) => line.clone(),
        None => std::env::var(PROVIDER_ENV).map_err(|_| {
            Error::Usage(format!("no distance provider: pass --provider, set {PROVIDER_ENV}, or use --builtin"))
        })?,
    };
    let cmd = CommandProvider::from_command_line(&line)
        .ok_or_else(|| Error::Usage("provider command line is empty".into()))?;
    Ok((Box::new(cmd), line.trim().to_string()))
}

fn item_ids(batch: &ManifestBatch) -> Vec<String> {
    batch.items.iter().map(|p| p.to_string_lossy().into_owned()).collect()
}

pub fn cmd_pairwise(args: &PairwiseArgs) -> Result<DiversityReport, Error> {
    let manifest = load_manifest(&args.manifest)?;
    if let Some(b) = manifest.batches.iter().find(|b| b.items.len() < 2) {
        return Err(Error::Usage(format!(
            "batch {:?} has {} item(s); pairwise distance needs at least 2",
            b.id,
            b.items.len()
        )));
    }
    let (provider, label) = resolve_provider(args)?;
    let provider = Checked(provider);
    let mut own = vec![("provider", label)];
    if let Some(n) = args.prompt_pairs {
        own.push(("prompt_pairs", n.to_string()));
        own.push(("prompt_pairs_seed", args.seed.to_string()));
    }
    let mut report = DiversityReport::new("pairwise", args.report.context(&own)?);
    for (group, batches) in grouped(&manifest) {
        let ids: Vec<Vec<String>> = batches.iter().map(|b| item_ids(b)).collect();
        let summary = avg_pairwise_across_batches(&ids, &provider)?;
        report.insert(&group, "avg_pairwise", MetricValue::mean(&summary.across));
        for (b, mean) in batches.iter().zip(&summary.per_batch) {
            let n = b.items.len() * (b.items.len() - 1) / 2;
            let value = mean.expect("every batch has at least 2 items");
            let one = MeanEstimate {
                mean: value,
                half_width: None,
                n,
            };
            report.insert(&group, &format!("batch/{}", b.id), MetricValue::mean(&one));
        }
        if let Some(n) = args.prompt_pairs {
            let mut by_prompt: BTreeMap<&str, Vec<String>> = BTreeMap::new();
            for b in &batches {
                let prompt = b.prompt.as_deref().unwrap_or(&b.id);
                by_prompt.entry(prompt).or_default().extend(item_ids(b));
            }
            let prompts: Vec<Vec<String>> = by_prompt.into_values().collect();
            let est = avg_sampled_pairs(&prompts, n, args.seed, &provider)?;
            report.insert(&group, "prompt_pairs", MetricValue::mean(&est));
        }
    }
    args.report.finish(report)
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Group name for this label table, typically the strategy.
    #[arg(long, default_value = UNTAGGED)]
    pub group: String,
    #[command(flatten)]
    pub report: ReportArgs,
}

pub fn cmd_coverage(args: &CoverageArgs) -> Result<DiversityReport, Error> {
    let set = read_labels(&args.labels)?;
    let n = set.batches.len();
    let mut report = DiversityReport::new("coverage", args.report.context(&[])?);
    let g = args.group.as_str();
    report.insert(g, "all_pairs", MetricValue::fraction(coverage_all_pairs(&set)?, n));
    report.insert(
        g,
        "genders_and_ethnicities",
        MetricValue::fraction(coverage_genders_and_ethnicities(&set)?, n),
    );
    for m in 1..=Ethnicity::ALL.len() {
        report.insert(g, &format!("at_least_{m}"), MetricValue::fraction(coverage_at_least(&set, m)?, n));
    }
    for gender in Gender::ALL {
        for ethnicity in Ethnicity::ALL {
            let p = coverage_combination(&set, gender, ethnicity)?;
            report.insert(g, &format!("combo/{gender}/{ethnicity}"), MetricValue::fraction(p, n));
        }
    }
    args.report.finish(report)
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub method: PathBuf,
    #[arg(long)]
    pub baseline: PathBuf,
    /// Baseline group to score every method group against; by default a
    /// single-group baseline is used for all, otherwise groups pair by name.
    #[arg(long)]
    pub baseline_group: Option<String>,
    /// Compare even if the evaluation fingerprints differ.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<DiversityReport, Error> {
    let method = read_report(&args.method)?;
    let baseline = read_report(&args.baseline)?;
    let out = compare_reports(&method, &baseline, args.baseline_group.as_deref(), args.force)?;
    write_outputs(&args.out, "comparison", &out)?;
    Ok(out)
}

pub fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Sample(a) => {
            let summary = cmd_sample(a)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::AnalyzeColor(a) => {
            print!("{}", cmd_analyze_color(a)?.metrics_csv());
        }
        Command::Pairwise(a) => {
            print!("{}", cmd_pairwise(a)?.metrics_csv());
        }
        Command::Coverage(a) => {
            print!("{}", cmd_coverage(a)?.metrics_csv());
        }
        Command::Compare(a) => {
            print!("{}", cmd_compare(a)?.improvements_csv());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
