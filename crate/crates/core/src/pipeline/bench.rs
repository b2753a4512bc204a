use std::time::{Duration, Instant};

use serde::Serialize;

use super::{rate, Pipeline, PipelineConfig, PipelineError, StageTimes};

/// Throughput of one worker-count setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkerThroughput {
    pub workers: usize,
    pub samples: u64,
    pub skipped: u64,
    pub elapsed: Duration,
    pub samples_per_sec: f64,
    /// Summed over all samples (CPU time across workers).
    pub stages: StageTimes,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub runs: Vec<WorkerThroughput>,
    pub peak_memory_bytes: Option<u64>,
}

impl ThroughputReport {
    pub fn for_workers(&self, workers: usize) -> Option<&WorkerThroughput> {
        self.runs.iter().find(|r| r.workers == workers)
    }
}

/// Peak resident set size of this process, where the OS reports it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn measure(config: &PipelineConfig, workers: usize, budget: Duration) -> Result<WorkerThroughput, PipelineError> {
    let mut pipeline = Pipeline::open(PipelineConfig {
        workers,
        ..config.clone()
    })?;
    pipeline.encode_stage = true;
    let window = (4 * workers).div_ceil(pipeline.config.batch_size).max(1) as u64;
    let total = pipeline.total_steps;
    let mut out = WorkerThroughput {
        workers,
        samples: 0,
        skipped: 0,
        elapsed: Duration::ZERO,
        samples_per_sec: 0.0,
        stages: StageTimes::default(),
    };
    let begin = Instant::now();
    let mut t = 0;
    while begin.elapsed() < budget {
        let end = (t + window).min(total);
        for (_, results) in pipeline.process_steps(t..end) {
            for r in results {
                match r {
                    Ok(sample) => {
                        out.samples += 1;
                        out.stages += sample.timings;
                    }
                    Err(_) => out.skipped += 1,
                }
            }
        }
        t = if end >= total { 0 } else { end };
    }
    out.elapsed = begin.elapsed();
    out.samples_per_sec = rate(out.samples, out.elapsed);
    Ok(out)
}

/// Measures samples per second with one worker and with `config.workers`
/// workers, each for `duration` of wall time. A zero duration gives an
/// empty report.
pub fn bench(config: &PipelineConfig, duration: Duration) -> Result<ThroughputReport, PipelineError> {
    config.validate()?;
    let mut report = ThroughputReport::default();
    if duration.is_zero() {
        return Ok(report);
    }
    report.runs.push(measure(config, 1, duration)?);
    if config.workers > 1 {
        report.runs.push(measure(config, config.workers, duration)?);
    }
    report.peak_memory_bytes = peak_memory_bytes();
    Ok(report)
}
