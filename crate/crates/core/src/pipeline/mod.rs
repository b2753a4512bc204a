//! Dataset-level orchestration: batching, schedule evaluation, blur and
//! compositing per sample, and ordered parallel delivery.
//!
//! Step `t` takes positions `t*B .. (t+1)*B` of an endless sequence of
//! per-epoch permutations of the filtered layouts. All randomness comes from
//! keyed streams (see [`crate::rng`]), so the delivered stream is the same
//! for any worker count.

mod bench;
mod config;
mod sink;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::compositor::{
    composite_cutblur, composite_fullblur, composite_objblur, composite_randmask, sample_cutblur_patch, BlurPolicy,
    BlurVariant, BranchDecision, CompositeError,
};
use crate::image::{Image, ImageError};
use crate::layouts::{
    filter_layouts_with_stats, parse_manifest, rasterize_mask, BBox, FilterStats, Layout, ManifestError,
    ManifestWarning,
};
use crate::resample::{blur, strength_to_resolution, BlurStrength, ResampleError};
use crate::rng::{stream, Purpose};
use crate::schedules::{Pow2Geometry, ScheduleError, ScheduleSpec, TrainClock};

pub use bench::{bench, peak_memory_bytes, ThroughputReport, WorkerThroughput};
pub use config::PipelineConfig;
pub use sink::{sample_file_name, DirectorySink, ProvenanceRecord, PROVENANCE_LOG};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Policy(#[from] CompositeError),
    #[error("cannot read manifest {path}: {source}")]
    ManifestIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: ManifestError,
    },
    #[error("no layouts survive filtering")]
    NoLayouts,
    #[error("unknown image id `{0}`")]
    UnknownImage(String),
    #[error("sample {image_id}: {source}")]
    Sample {
        image_id: String,
        #[source]
        source: SampleError,
    },
    #[error("output: {0}")]
    Output(String),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// Per-sample failures; the pipeline skips the sample and counts it.
#[derive(Debug, Error)]
pub enum SampleError {
    #[error(transparent)]
    Load(#[from] ImageError),
    #[error("image is {actual:?} but the manifest says {expected:?}")]
    SizeMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
}

/// Identifies one sample of the stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleTicket {
    pub step: u64,
    pub index: usize,
    /// Position of the layout in the filtered dataset.
    pub layout: usize,
    pub image_id: String,
}

/// Which pixels were blurred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "obj")]
    Objects,
    #[serde(rename = "bg")]
    Background,
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "cut")]
    Patch,
    #[serde(rename = "none")]
    Clean,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Objects => "obj",
            Branch::Background => "bg",
            Branch::Full => "full",
            Branch::Patch => "cut",
            Branch::Clean => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Mask {
        digest: String,
        /// Image id whose layout produced the mask.
        source: String,
        ones: u64,
    },
    Patch(BBox),
    Full,
    Nothing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub strength: BlurStrength,
    pub lr_size: (u32, u32),
    pub variant: BlurVariant,
    pub branch: Branch,
    pub decision: Option<BranchDecision>,
    pub rng_draws: Vec<f64>,
    pub region: Region,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub decode: Duration,
    pub blur: Duration,
    pub composite: Duration,
    pub encode: Duration,
}

impl std::ops::AddAssign for StageTimes {
    fn add_assign(&mut self, o: Self) {
        self.decode += o.decode;
        self.blur += o.blur;
        self.composite += o.composite;
        self.encode += o.encode;
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedSample {
    pub ticket: SampleTicket,
    pub image: Image,
    pub layout: Arc<Layout>,
    pub provenance: Provenance,
    pub timings: StageTimes,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub steps: u64,
    pub delivered: u64,
    pub skipped: u64,
    pub objects_blurred: u64,
    pub background_blurred: u64,
    pub elapsed: Duration,
    pub samples_per_sec: f64,
    pub stages: StageTimes,
}

impl RunReport {
    /// Share of branch decisions that blurred the objects.
    pub fn objects_fraction(&self) -> Option<f64> {
        let n = self.objects_blurred + self.background_blurred;
        (n > 0).then(|| self.objects_blurred as f64 / n as f64)
    }

    fn count(&mut self, sample: &AugmentedSample) {
        self.delivered += 1;
        self.stages += sample.timings;
        match sample.provenance.branch {
            Branch::Objects => self.objects_blurred += 1,
            Branch::Background => self.background_blurred += 1,
            _ => {}
        }
    }
}

/// Samples produced for one step plus the number skipped.
#[derive(Debug)]
pub struct StepOutput {
    pub step: u64,
    pub samples: Vec<AugmentedSample>,
    pub skipped: usize,
}

/// An opened, validated pipeline over a filtered dataset.
pub struct Pipeline {
    config: PipelineConfig,
    layouts: Vec<Arc<Layout>>,
    image_root: PathBuf,
    schedule: ScheduleSpec,
    policy: BlurPolicy,
    total_steps: u64,
    filter_stats: FilterStats,
    warnings: Vec<ManifestWarning>,
    pool: rayon::ThreadPool,
    epoch_cache: Option<(u64, Arc<Vec<usize>>)>,
    next_step: u64,
    /// PNG-encode each sample in the worker to time the encode stage.
    encode_stage: bool,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .field("layouts", &self.layouts.len())
            .field("next_step", &self.next_step)
            .finish_non_exhaustive()
    }
}

/// Strength and intermediate resolution for one image at one step.
struct StepParams {
    clock: TrainClock,
    strength: BlurStrength,
}

impl Pipeline {
    /// Validates the config, reads and filters the manifest. No images are
    /// loaded yet.
    pub fn open(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let bytes = std::fs::read(&config.manifest).map_err(|source| PipelineError::ManifestIo {
            path: config.manifest.clone(),
            source,
        })?;
        let parsed = parse_manifest(&bytes).map_err(|source| PipelineError::Manifest {
            path: config.manifest.clone(),
            source,
        })?;
        for w in &parsed.warnings {
            log::warn!("{w}");
        }
        let (layouts, filter_stats) = filter_layouts_with_stats(&parsed.layouts, &config.filter_rules());
        if layouts.is_empty() {
            return Err(PipelineError::NoLayouts);
        }

        let mut config = config;
        let per_epoch = layouts.len().div_ceil(config.batch_size) as u64;
        let total_steps = match (config.steps, config.epochs) {
            (Some(t), _) => t,
            (None, Some(e)) => e * per_epoch,
            (None, None) => per_epoch,
        };
        config.steps = Some(total_steps);
        config.epochs = None;
        if config.images.is_none() {
            config.images = Some(config.image_root());
        }

        let policy = config.policy();
        let nominal = layouts[0].width;
        let schedule = config.schedule_spec()?.with_pow2_geometry(Pow2Geometry {
            full: nominal,
            start: policy.start.0.min(nominal),
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;

        Ok(Self {
            image_root: config.image_root(),
            config,
            layouts: layouts.into_iter().map(Arc::new).collect(),
            schedule,
            policy,
            total_steps,
            filter_stats,
            warnings: parsed.warnings,
            pool,
            epoch_cache: None,
            next_step: 0,
            encode_stage: false,
        })
    }

    /// Fully resolved configuration as one-line JSON. Feeding it back via
    /// `--config` reproduces the same stream.
    pub fn describe(&self) -> String {
        self.config.to_json()
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn layouts(&self) -> &[Arc<Layout>] {
        &self.layouts
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn batch_size(&self) -> usize {
        self.config.batch_size
    }

    pub fn schedule(&self) -> &ScheduleSpec {
        &self.schedule
    }

    pub fn filter_stats(&self) -> FilterStats {
        self.filter_stats
    }

    pub fn warnings(&self) -> &[ManifestWarning] {
        &self.warnings
    }

    /// Blur strength the schedule assigns to step `t`.
    pub fn strength_at(&self, t: u64) -> BlurStrength {
        let clock = TrainClock::new(t.min(self.total_steps), self.total_steps).expect("t clamped to total");
        self.schedule.strength(clock)
    }

    fn epoch_order(&mut self, epoch: u64) -> Arc<Vec<usize>> {
        if let Some((e, order)) = &self.epoch_cache {
            if *e == epoch {
                return order.clone();
            }
        }
        let mut order: Vec<usize> = (0..self.layouts.len()).collect();
        order.shuffle(&mut stream(self.config.seed, Purpose::Epoch, epoch, ""));
        let order = Arc::new(order);
        self.epoch_cache = Some((epoch, order.clone()));
        order
    }

    /// Tickets for step `t`, in within-batch order.
    pub fn tickets(&mut self, t: u64) -> Vec<SampleTicket> {
        let n = self.layouts.len() as u64;
        let b = self.config.batch_size as u64;
        (0..b)
            .map(|i| {
                let pos = t * b + i;
                let order = self.epoch_order(pos / n);
                let layout = order[(pos % n) as usize];
                SampleTicket {
                    step: t,
                    index: i as usize,
                    layout,
                    image_id: self.layouts[layout].image_id.clone(),
                }
            })
            .collect()
    }

    /// Batch permutation for the shuffled-mask variant: sample `i` borrows
    /// the mask of sample `perm[i]`.
    pub fn mask_permutation(&self, t: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.config.batch_size).collect();
        perm.shuffle(&mut stream(self.config.seed, Purpose::Shuffle, t, ""));
        perm
    }

    fn load(&self, layout: &Layout) -> Result<(Image, Duration), SampleError> {
        let start = Instant::now();
        let img = Image::load(&self.image_root.join(&layout.file))?;
        if img.dims() != layout.image_size() {
            return Err(SampleError::SizeMismatch {
                expected: layout.image_size(),
                actual: img.dims(),
            });
        }
        Ok((img, start.elapsed()))
    }

    fn start_for(&self, dims: (u32, u32)) -> (u32, u32) {
        (self.policy.start.0.min(dims.0), self.policy.start.1.min(dims.1))
    }

    fn augment(
        &self,
        ticket: SampleTicket,
        params: &StepParams,
        foreign: Option<&Layout>,
    ) -> Result<AugmentedSample, SampleError> {
        let layout = self.layouts[ticket.layout].clone();
        let (hr, decode) = self.load(&layout)?;
        let mut timings = StageTimes {
            decode,
            ..Default::default()
        };
        let seed = self.config.seed;
        let t = params.clock.t();
        let start = self.start_for(hr.dims());
        let lr_size = strength_to_resolution(params.strength, hr.dims(), start)?;

        let blur_start = Instant::now();
        let lr = match self.policy.variant {
            BlurVariant::None => hr.clone(),
            _ => blur(&hr, params.strength, start)?,
        };
        timings.blur = blur_start.elapsed();

        let comp_start = Instant::now();
        let draw_branch = || BranchDecision::from_draw(stream(seed, Purpose::Branch, t, &ticket.image_id).random(), self.policy.p_obj);
        let (image, branch, decision, rng_draws, region) = match self.policy.variant {
            BlurVariant::None => (hr, Branch::Clean, None, vec![], Region::Nothing),
            BlurVariant::FullBlur => (composite_fullblur(&hr, &lr)?, Branch::Full, None, vec![], Region::Full),
            BlurVariant::CutBlur => {
                let mut rng = stream(seed, Purpose::CutBlur, t, &ticket.image_id);
                let patch = sample_cutblur_patch(&mut rng, hr.width(), hr.height(), self.policy.cutblur_area);
                let draws = vec![patch.x, patch.y, patch.w, patch.h];
                (composite_cutblur(&hr, &lr, patch)?, Branch::Patch, None, draws, Region::Patch(patch))
            }
            BlurVariant::ObjBlur | BlurVariant::RandMask => {
                let decision = draw_branch();
                let mask_layout = match (self.policy.variant, foreign) {
                    (BlurVariant::RandMask, Some(f)) => f.rescaled(hr.width(), hr.height()),
                    _ => (*layout).clone(),
                };
                let mask = rasterize_mask(&mask_layout);
                let out = if self.policy.variant == BlurVariant::RandMask {
                    composite_randmask(&hr, &lr, &mask, decision.blur_objects)?
                } else {
                    composite_objblur(&hr, &lr, &mask, decision.blur_objects)?
                };
                let branch = if decision.blur_objects { Branch::Objects } else { Branch::Background };
                let region = Region::Mask {
                    digest: mask.digest(),
                    source: mask_layout.image_id.clone(),
                    ones: mask.count_ones(),
                };
                (out, branch, Some(decision), vec![decision.rng_draw], region)
            }
        };
        timings.composite = comp_start.elapsed();
        if self.encode_stage {
            let enc_start = Instant::now();
            image.encode_png()?;
            timings.encode = enc_start.elapsed();
        }

        Ok(AugmentedSample {
            ticket,
            image,
            layout,
            provenance: Provenance {
                strength: params.strength,
                lr_size,
                variant: self.policy.variant,
                branch,
                decision,
                rng_draws,
                region,
            },
            timings,
        })
    }

    /// Produces every sample of the given steps, in (step, index) order.
    fn process_steps(&mut self, steps: std::ops::Range<u64>) -> Vec<(u64, Vec<Result<AugmentedSample, PipelineError>>)> {
        let mut jobs = Vec::new();
        for t in steps.clone() {
            let tickets = self.tickets(t);
            let perm = (self.policy.variant == BlurVariant::RandMask).then(|| self.mask_permutation(t));
            for ticket in tickets.iter() {
                let foreign = perm.as_ref().map(|p| tickets[p[ticket.index]].layout);
                jobs.push((ticket.clone(), foreign));
            }
        }
        let this = &*self;
        let results: Vec<Result<AugmentedSample, PipelineError>> = self.pool.install(|| {
            use rayon::prelude::*;
            jobs.into_par_iter()
                .map(|(ticket, foreign)| {
                    let params = StepParams {
                        clock: TrainClock::new(ticket.step, this.total_steps).expect("step within range"),
                        strength: this.strength_at(ticket.step),
                    };
                    let image_id = ticket.image_id.clone();
                    this.augment(ticket, &params, foreign.map(|i| &*this.layouts[i]))
                        .map_err(|source| PipelineError::Sample { image_id, source })
                })
                .collect()
        });
        let b = self.config.batch_size;
        let mut it = results.into_iter();
        steps.map(|t| (t, it.by_ref().take(b).collect())).collect()
    }

    /// Advances one step. `None` once all steps have been produced.
    pub fn next_batch(&mut self) -> Option<StepOutput> {
        if self.next_step >= self.total_steps {
            return None;
        }
        let t = self.next_step;
        self.next_step += 1;
        let (step, results) = self.process_steps(t..t + 1).pop().expect("one step");
        Some(collect_step(step, results))
    }

    /// Runs steps `0..T`, delivering samples to `consumer` in (step, index)
    /// order. Unloadable samples are logged, skipped and counted.
    pub fn run<F>(&mut self, mut consumer: F) -> Result<RunReport, PipelineError>
    where
        F: FnMut(AugmentedSample) -> Result<(), PipelineError>,
    {
        let begin = Instant::now();
        let mut report = RunReport::default();
        let window = (4 * self.config.workers).div_ceil(self.config.batch_size).max(1) as u64;
        let mut t = 0;
        while t < self.total_steps {
            let end = (t + window).min(self.total_steps);
            for (step, results) in self.process_steps(t..end) {
                let out = collect_step(step, results);
                report.steps += 1;
                report.skipped += out.skipped as u64;
                for sample in out.samples {
                    report.count(&sample);
                    consumer(sample)?;
                }
            }
            t = end;
        }
        report.elapsed = begin.elapsed();
        report.samples_per_sec = rate(report.delivered, report.elapsed);
        Ok(report)
    }

    /// Both branches for one image at each requested step. Consumes no
    /// pipeline state.
    pub fn preview(&self, image_id: &str, steps: &[u64]) -> Result<Vec<AugmentedSample>, PipelineError> {
        let idx = self
            .layouts
            .iter()
            .position(|l| l.image_id == image_id)
            .ok_or_else(|| PipelineError::UnknownImage(image_id.to_string()))?;
        let layout = self.layouts[idx].clone();
        let wrap = |source: SampleError| PipelineError::Sample {
            image_id: image_id.to_string(),
            source,
        };
        let (hr, _) = self.load(&layout).map_err(wrap)?;
        let start = self.start_for(hr.dims());
        let mask = rasterize_mask(&layout);
        let mut out = Vec::with_capacity(steps.len() * 2);
        for &t in steps {
            let strength = self.strength_at(t);
            let lr_size = strength_to_resolution(strength, hr.dims(), start).map_err(|e| wrap(e.into()))?;
            let lr = match self.policy.variant {
                BlurVariant::None => hr.clone(),
                _ => blur(&hr, strength, start).map_err(|e| wrap(e.into()))?,
            };
            for (index, blur_objects) in [(0usize, true), (1, false)] {
                let (image, branch, region) = match self.policy.variant {
                    BlurVariant::None => (hr.clone(), Branch::Clean, Region::Nothing),
                    BlurVariant::FullBlur => (lr.clone(), Branch::Full, Region::Full),
                    BlurVariant::CutBlur => {
                        let mut rng = stream(self.config.seed, Purpose::CutBlur, t, image_id);
                        let patch = sample_cutblur_patch(&mut rng, hr.width(), hr.height(), self.policy.cutblur_area);
                        let img = composite_cutblur(&hr, &lr, patch).map_err(|e| wrap(e.into()))?;
                        (img, Branch::Patch, Region::Patch(patch))
                    }
                    BlurVariant::ObjBlur | BlurVariant::RandMask => {
                        let img = composite_objblur(&hr, &lr, &mask, blur_objects).map_err(|e| wrap(e.into()))?;
                        let branch = if blur_objects { Branch::Objects } else { Branch::Background };
                        let region = Region::Mask {
                            digest: mask.digest(),
                            source: image_id.to_string(),
                            ones: mask.count_ones(),
                        };
                        (img, branch, region)
                    }
                };
                out.push(AugmentedSample {
                    ticket: SampleTicket {
                        step: t,
                        index,
                        layout: idx,
                        image_id: image_id.to_string(),
                    },
                    image,
                    layout: layout.clone(),
                    provenance: Provenance {
                        strength,
                        lr_size,
                        variant: self.policy.variant,
                        branch,
                        decision: None,
                        rng_draws: vec![],
                        region,
                    },
                    timings: StageTimes::default(),
                });
            }
        }
        Ok(out)
    }
}

fn collect_step(step: u64, results: Vec<Result<AugmentedSample, PipelineError>>) -> StepOutput {
    let mut samples = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => {
                log::error!("step {step}: skipping sample: {e}");
                skipped += 1;
            }
        }
    }
    StepOutput { step, samples, skipped }
}

fn rate(n: u64, elapsed: Duration) -> f64 {
    let secs = elapsed.as_secs_f64();
    if secs > 0.0 {
        n as f64 / secs
    } else {
        0.0
    }
}

/// Opens the pipeline described by `config` and runs it to completion.
pub fn run_epochal<F>(config: PipelineConfig, consumer: F) -> Result<RunReport, PipelineError>
where
    F: FnMut(AugmentedSample) -> Result<(), PipelineError>,
{
    Pipeline::open(config)?.run(consumer)
}
