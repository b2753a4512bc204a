use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AugmentedSample, Branch, PipelineError, Region};

pub const PROVENANCE_LOG: &str = "provenance.jsonl";

/// One line of the provenance log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProvenanceRecord {
    pub step: u64,
    pub index: usize,
    pub image_id: String,
    pub s_t: f64,
    pub lr_size: [u32; 2],
    pub variant: String,
    pub branch: Branch,
    pub rng_draws: Vec<f64>,
    pub mask_digest: Option<String>,
    pub mask_source: Option<String>,
    pub patch: Option<[f64; 4]>,
    /// PNG written for this sample, when delivered to a directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// SHA-256 of the delivered 8-bit pixels.
    pub digest: String,
}

impl ProvenanceRecord {
    pub fn from_sample(s: &AugmentedSample) -> Self {
        let p = &s.provenance;
        let (mask_digest, mask_source, patch) = match &p.region {
            Region::Mask { digest, source, .. } => (Some(digest.clone()), Some(source.clone()), None),
            Region::Patch(b) => (None, None, Some([b.x, b.y, b.w, b.h])),
            Region::Full | Region::Nothing => (None, None, None),
        };
        Self {
            step: s.ticket.step,
            index: s.ticket.index,
            image_id: s.ticket.image_id.clone(),
            s_t: p.strength.value(),
            lr_size: [p.lr_size.0, p.lr_size.1],
            variant: p.variant.to_string(),
            branch: p.branch,
            rng_draws: p.rng_draws.clone(),
            mask_digest,
            mask_source,
            patch,
            file: None,
            digest: s.image.sha256_hex(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record is serializable")
    }
}

/// File name for a sample: `{image_id}_t{step}_{branch}.png`.
pub fn sample_file_name(image_id: &str, step: u64, branch: Branch) -> String {
    let safe: String = image_id
        .chars()
        .map(|c| if matches!(c, '/' | '\\') { '_' } else { c })
        .collect();
    format!("{safe}_t{step}_{}.png", branch.as_str())
}

/// Writes each sample as PNG plus one provenance line.
///
/// An image drawn twice in one step (at an epoch boundary) gets its batch
/// index appended to the second file name.
pub struct DirectorySink {
    dir: PathBuf,
    log: BufWriter<File>,
    step: Option<u64>,
    names: HashSet<String>,
}

impl DirectorySink {
    pub fn create(dir: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Output(format!("{}: {e}", dir.display())))?;
        let path = dir.join(PROVENANCE_LOG);
        let log = File::create(&path).map_err(|e| PipelineError::Output(format!("{}: {e}", path.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log: BufWriter::new(log),
            step: None,
            names: HashSet::new(),
        })
    }

    pub fn write(&mut self, sample: &AugmentedSample) -> Result<(), PipelineError> {
        let step = sample.ticket.step;
        if self.step != Some(step) {
            self.step = Some(step);
            self.names.clear();
        }
        let mut name = sample_file_name(&sample.ticket.image_id, step, sample.provenance.branch);
        if !self.names.insert(name.clone()) {
            name = format!("{}_{}.png", name.trim_end_matches(".png"), sample.ticket.index);
            self.names.insert(name.clone());
        }
        sample
            .image
            .save_png(&self.dir.join(&name))
            .map_err(|e| PipelineError::Output(e.to_string()))?;
        let record = ProvenanceRecord {
            file: Some(name),
            ..ProvenanceRecord::from_sample(sample)
        };
        writeln!(self.log, "{}", record.to_json_line())
            .map_err(|e| PipelineError::Output(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), PipelineError> {
        self.log.flush().map_err(|e| PipelineError::Output(e.to_string()))
    }
}
