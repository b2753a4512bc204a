//! Command implementations behind the `objblur` binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use objblur_core::compositor::BlurVariant;
use objblur_core::layouts::{filter_layouts_with_stats, parse_manifest, FilterRules, ManifestWarning};
use objblur_core::pipeline::{bench, sample_file_name, DirectorySink, Pipeline, PipelineConfig, ThroughputReport};
use objblur_core::resample::strength_to_resolution;
use objblur_core::schedules::{enumerate_families, Pow2Geometry, ScheduleFamily, ScheduleSpec, TrainClock};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "objblur", version, about = "Curriculum object-level blurring for layout datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the augmentation pipeline and write samples plus a provenance log.
    Augment(AugmentArgs),
    /// Render both branches of one image at selected steps.
    Preview(PreviewArgs),
    /// Write schedule curves as CSV.
    Schedule(ScheduleArgs),
    /// Measure throughput.
    Bench(BenchArgs),
    /// Report manifest filtering statistics.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Minimum box area as a fraction of the image area.
    #[arg(long)]
    pub min_area: Option<f64>,
    #[arg(long)]
    pub min_objects: Option<usize>,
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Drop layouts containing this class id (repeatable).
    #[arg(long = "exclude-class")]
    pub exclude_class: Vec<i64>,
}

/// Flags shared by every command that drives the pipeline. Unset flags fall
/// back to `--config`, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Image root directory (defaults to the manifest's directory).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Schedule: none, linear, step:N, pow2, sin, exp:K.
    #[arg(long, allow_hyphen_values = true)]
    pub schedule: Option<String>,
    /// Fraction of training with an active curriculum, in (0, 1].
    #[arg(long)]
    pub duration: Option<f64>,
    /// objblur, fullblur, cutblur, randmask or none.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub p_obj: Option<f64>,
    #[arg(long)]
    pub start_res: Option<u32>,
    #[arg(long)]
    pub cutblur_min: Option<f64>,
    #[arg(long)]
    pub cutblur_max: Option<f64>,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, conflicts_with = "epochs")]
    pub steps: Option<u64>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub image_id: String,
    /// Steps to render, comma separated.
    #[arg(long = "t", value_delimiter = ',', required = true)]
    pub t: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Family spec or `all` (repeatable).
    #[arg(long, default_value = "sin", allow_hyphen_values = true)]
    pub family: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub points: u64,
    /// Total steps T (defaults to points - 1).
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, default_value_t = objblur_core::schedules::DEFAULT_DURATION)]
    pub duration: f64,
    /// Full image side used for the W_t, H_t columns.
    #[arg(long, default_value_t = 128)]
    pub size: u32,
    #[arg(long, default_value_t = 8)]
    pub start_res: u32,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Wall time per measurement, in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub seconds: f64,
    /// Benchmark these variants instead of the configured one (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
}

/// Error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        error: e.into(),
    }
}

fn failure(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: EXIT_FAILURE,
        error: e.into(),
    }
}

impl PipelineArgs {
    /// Merges config file, flags and defaults, then validates without
    /// touching the dataset.
    pub fn resolve(&self, out: Option<&Path>) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))
                    .map_err(usage)?;
                serde_json::from_str::<PipelineConfig>(&text)
                    .with_context(|| format!("invalid config {}", path.display()))
                    .map_err(usage)?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { c.$field = v.clone(); } )* };
        }
        overlay!(manifest, schedule, duration, p_obj, start_res, cutblur_min, cutblur_max, batch_size, seed, workers);
        if let Some(v) = &self.images {
            c.images = Some(v.clone());
        }
        if let Some(v) = &self.variant {
            c.variant = v.parse().map_err(usage)?;
        }
        if self.steps.is_some() {
            c.steps = self.steps;
            c.epochs = None;
        }
        if self.epochs.is_some() {
            c.epochs = self.epochs;
            c.steps = None;
        }
        if let Some(v) = self.filter.min_area {
            c.min_area = v;
        }
        if let Some(v) = self.filter.min_objects {
            c.min_objects = v;
        }
        if let Some(v) = self.filter.max_objects {
            c.max_objects = v;
        }
        if !self.filter.exclude_class.is_empty() {
            c.exclude_classes = self.filter.exclude_class.iter().copied().collect();
        }
        if let Some(out) = out {
            c.out = Some(out.to_path_buf());
        }
        c.validate().map_err(usage)?;
        Ok(c)
    }
}

impl FilterArgs {
    fn rules(&self) -> FilterRules {
        let d = FilterRules::default();
        FilterRules {
            min_area_frac: self.min_area.unwrap_or(d.min_area_frac),
            min_objects: self.min_objects.unwrap_or(d.min_objects),
            max_objects: self.max_objects.unwrap_or(d.max_objects),
            excluded_classes: self.exclude_class.iter().copied().collect::<BTreeSet<_>>(),
        }
    }
}

/// The resolved configuration as a flag list that reproduces it.
pub fn config_as_flags(c: &PipelineConfig) -> String {
    let mut s = String::new();
    let mut flag = |name: &str, value: String| {
        let _ = write!(s, " --{name} {value}");
    };
    flag("manifest", c.manifest.display().to_string());
    if let Some(p) = &c.images {
        flag("images", p.display().to_string());
    }
    if let Some(p) = &c.out {
        flag("out", p.display().to_string());
    }
    flag("schedule", c.schedule.clone());
    flag("duration", format!("{:?}", c.duration));
    flag("variant", c.variant.to_string());
    flag("p-obj", format!("{:?}", c.p_obj));
    flag("start-res", c.start_res.to_string());
    flag("cutblur-min", format!("{:?}", c.cutblur_min));
    flag("cutblur-max", format!("{:?}", c.cutblur_max));
    flag("min-area", format!("{:?}", c.min_area));
    flag("min-objects", c.min_objects.to_string());
    flag("max-objects", c.max_objects.to_string());
    for id in &c.exclude_classes {
        flag("exclude-class", id.to_string());
    }
    if let Some(t) = c.steps {
        flag("steps", t.to_string());
    }
    if let Some(e) = c.epochs {
        flag("epochs", e.to_string());
    }
    flag("batch-size", c.batch_size.to_string());
    flag("seed", c.seed.to_string());
    flag("workers", c.workers.to_string());
    s.trim_start().to_string()
}

fn announce(pipeline: &Pipeline) {
    eprintln!("# config: {}", pipeline.describe());
    eprintln!("# flags: {}", config_as_flags(pipeline.config()));
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<i32, CliError> {
    let config = args.pipeline.resolve(args.out.as_deref())?;
    let Some(out) = config.out.clone() else {
        return Err(usage(anyhow::anyhow!("--out is required")));
    };
    let mut pipeline = Pipeline::open(config).map_err(failure)?;
    announce(&pipeline);
    let mut sink = DirectorySink::create(&out).map_err(failure)?;
    let report = pipeline.run(|s| sink.write(&s)).map_err(failure)?;
    sink.finish().map_err(failure)?;
    eprintln!(
        "delivered {} samples over {} steps ({:.1} samples/s)",
        report.delivered, report.steps, report.samples_per_sec
    );
    if report.skipped > 0 {
        eprintln!("warning: {} samples skipped", report.skipped);
    }
    Ok(EXIT_OK)
}

pub fn cmd_preview(args: &PreviewArgs) -> Result<i32, CliError> {
    let config = args.pipeline.resolve(None)?;
    let pipeline = Pipeline::open(config).map_err(failure)?;
    announce(&pipeline);
    let samples = pipeline.preview(&args.image_id, &args.t).map_err(failure)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(failure)?;
    for s in &samples {
        let name = sample_file_name(&s.ticket.image_id, s.ticket.step, s.provenance.branch);
        s.image.save_png(&args.out.join(&name)).map_err(failure)?;
        println!(
            "{name} s={} lr={}x{}",
            s.provenance.strength.value(),
            s.provenance.lr_size.0,
            s.provenance.lr_size.1
        );
    }
    Ok(EXIT_OK)
}

/// File name stem for a schedule family.
pub fn schedule_file_name(family: &ScheduleFamily) -> String {
    format!("schedule_{}.csv", family.to_string().replace(':', "_"))
}

/// CSV rows `t,tau,s,W_t,H_t` at `points` evenly spaced steps of `0..=total`.
pub fn schedule_csv(spec: &ScheduleSpec, points: u64, total: u64, size: u32, start: u32) -> anyhow::Result<String> {
    let mut csv = String::from("t,tau,s,W_t,H_t\n");
    for i in 0..points {
        let t = if points == 1 {
            0
        } else {
            // round(i * total / (points - 1)) in integers
            (2 * i * total + (points - 1)) / (2 * (points - 1))
        };
        let clock = TrainClock::new(t, total)?;
        let tau = spec.progress(clock);
        let s = spec.strength(clock);
        let (w, h) = strength_to_resolution(s, (size, size), (start, start))?;
        writeln!(csv, "{t},{tau},{},{w},{h}", s.value())?;
    }
    Ok(csv)
}

pub fn cmd_schedule(args: &ScheduleArgs) -> Result<i32, CliError> {
    if args.points == 0 {
        return Err(usage(anyhow::anyhow!("--points must be at least 1")));
    }
    if args.start_res == 0 || args.start_res > args.size {
        return Err(usage(anyhow::anyhow!("--start-res must lie in [1, --size]")));
    }
    let total = args.steps.unwrap_or(args.points.saturating_sub(1).max(1));
    if total == 0 {
        return Err(usage(anyhow::anyhow!("--steps must be at least 1")));
    }
    let mut specs = Vec::new();
    for f in &args.family {
        if f == "all" {
            for spec in enumerate_families() {
                specs.push(spec.with_duration(args.duration).map_err(usage)?);
            }
        } else {
            let family: ScheduleFamily = f.parse().map_err(usage)?;
            specs.push(ScheduleSpec::new(family, args.duration).map_err(usage)?);
        }
    }
    let geom = Pow2Geometry {
        full: args.size,
        start: args.start_res,
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(failure)?;
    for spec in specs {
        let spec = spec.with_pow2_geometry(geom);
        let csv = schedule_csv(&spec, args.points, total, args.size, args.start_res).map_err(failure)?;
        let path = args.out.join(schedule_file_name(&spec.family()));
        std::fs::write(&path, csv)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(failure)?;
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}

/// Runs the benchmark for each requested variant.
pub fn run_bench(args: &BenchArgs) -> Result<Vec<(BlurVariant, ThroughputReport)>, CliError> {
    let config = args.pipeline.resolve(None)?;
    if !(args.seconds >= 0.0 && args.seconds.is_finite()) {
        return Err(usage(anyhow::anyhow!("--seconds must be a non-negative number")));
    }
    let variants: Vec<BlurVariant> = if args.variants.is_empty() {
        vec![config.variant]
    } else {
        args.variants.iter().map(|v| v.parse()).collect::<Result<_, _>>().map_err(usage)?
    };
    let pipeline = Pipeline::open(config.clone()).map_err(failure)?;
    announce(&pipeline);
    let budget = Duration::from_secs_f64(args.seconds);
    variants
        .into_iter()
        .map(|variant| {
            let report = bench(&PipelineConfig { variant, ..config.clone() }, budget).map_err(failure)?;
            Ok((variant, report))
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let reports = run_bench(args)?;
    let json: Vec<serde_json::Value> = reports
        .iter()
        .map(|(v, r)| serde_json::json!({"variant": v.to_string(), "report": r}))
        .collect();
    println!("{}", serde_json::to_string_pretty(&json).map_err(failure)?);
    Ok(EXIT_OK)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    let rules = args.filter.rules();
    if rules.min_objects > rules.max_objects {
        return Err(usage(anyhow::anyhow!("--min-objects exceeds --max-objects")));
    }
    let bytes = std::fs::read(&args.manifest)
        .with_context(|| format!("cannot read {}", args.manifest.display()))
        .map_err(failure)?;
    let parsed = parse_manifest(&bytes)
        .with_context(|| format!("invalid manifest {}", args.manifest.display()))
        .map_err(failure)?;
    let (_, stats) = filter_layouts_with_stats(&parsed.layouts, &rules);
    let clamped = parsed.warnings.iter().filter(|w| matches!(w, ManifestWarning::Clamped { .. })).count();
    let outside = parsed.warnings.len() - clamped;
    let mut stdout = std::io::stdout().lock();
    let report = format!(
        "layouts: {}\nboxes clamped: {clamped}\nboxes outside image: {outside}\nboxes removed by area rule: {}\n\
         layouts dropped by class rule: {}\nlayouts dropped by count rule: {}\ndropped: {}\nsurviving: {}\n",
        stats.layouts_in,
        stats.boxes_removed_area,
        stats.layouts_dropped_excluded,
        stats.layouts_dropped_count,
        stats.layouts_dropped(),
        stats.layouts_out,
    );
    stdout.write_all(report.as_bytes()).map_err(failure)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    if stats.layouts_out == 0 {
        return Err(failure(anyhow::anyhow!("no layouts survive filtering")));
    }
    Ok(EXIT_OK)
}

pub fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Augment(a) => cmd_augment(a),
        Command::Preview(a) => cmd_preview(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

// Core errors already embed their sources in the message.
fn render_chain(error: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(CliError { code, error }) => {
            eprintln!("error: {}", render_chain(&error));
            if code == EXIT_USAGE {
                eprintln!("\nRun `objblur help` for usage.");
            }
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_overlay_config_and_last_horizon_wins() {
        let base = PipelineArgs {
            manifest: Some("m.json".into()),
            steps: Some(10),
            p_obj: Some(0.25),
            ..PipelineArgs::default()
        };
        let c = base.resolve(Some(Path::new("out"))).unwrap();
        assert_eq!((c.steps, c.epochs, c.p_obj), (Some(10), None, 0.25));
        assert_eq!(c.out.as_deref(), Some(Path::new("out")));

        let bad = PipelineArgs {
            variant: Some("gaussian".into()),
            ..base
        };
        assert_eq!(bad.resolve(None).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn flag_echo_parses_back_to_same_config() {
        let mut c = PipelineConfig::with_manifest("data/m.json");
        c.steps = Some(7);
        c.exclude_classes = [3, 9].into();
        c.schedule = "exp:-5".into();
        let line = format!("objblur augment {}", config_as_flags(&c));
        let Command::Augment(a) = Cli::try_parse_from(line.split(' ')).unwrap().command else {
            panic!("augment expected");
        };
        assert_eq!(a.pipeline.resolve(None).unwrap(), c);
    }

    #[test]
    fn schedule_rows_hit_both_ends() {
        let spec = ScheduleSpec::new(ScheduleFamily::Linear, 1.0).unwrap();
        let csv = schedule_csv(&spec, 5, 8, 128, 4).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1], "0,0,1,4,4");
        assert_eq!(rows[3], "4,0.5,0.5,66,66");
        assert_eq!(rows[5], "8,1,0,128,128");
        assert_eq!(schedule_file_name(&ScheduleFamily::Step(4)), "schedule_step_4.csv");
    }
}
