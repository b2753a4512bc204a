use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositor::{BlurPolicy, BlurVariant};
use crate::layouts::FilterRules;
use crate::schedules::{ScheduleFamily, ScheduleSpec, DEFAULT_DURATION};

use super::PipelineError;

/// Flat pipeline configuration. Keys mirror the command line flags and the
/// JSON accepted by `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    /// Image root; the manifest's directory when unset.
    pub images: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub schedule: String,
    pub duration: f64,
    pub variant: BlurVariant,
    pub p_obj: f64,
    pub start_res: u32,
    pub cutblur_min: f64,
    pub cutblur_max: f64,
    pub min_area: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub exclude_classes: BTreeSet<i64>,
    /// Total training steps. When unset, derived from `epochs`.
    pub steps: Option<u64>,
    /// Dataset passes, converted to steps once the dataset size is known.
    pub epochs: Option<u64>,
    pub batch_size: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let policy = BlurPolicy::default();
        let rules = FilterRules::default();
        Self {
            manifest: PathBuf::new(),
            images: None,
            out: None,
            schedule: "sin".into(),
            duration: DEFAULT_DURATION,
            variant: policy.variant,
            p_obj: policy.p_obj,
            start_res: policy.start.0,
            cutblur_min: policy.cutblur_area.0,
            cutblur_max: policy.cutblur_area.1,
            min_area: rules.min_area_frac,
            min_objects: rules.min_objects,
            max_objects: rules.max_objects,
            exclude_classes: BTreeSet::new(),
            steps: None,
            epochs: None,
            batch_size: 8,
            seed: 0,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn with_manifest(manifest: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            ..Default::default()
        }
    }

    pub fn schedule_spec(&self) -> Result<ScheduleSpec, PipelineError> {
        let family: ScheduleFamily = self.schedule.parse()?;
        Ok(ScheduleSpec::new(family, self.duration)?)
    }

    pub fn policy(&self) -> BlurPolicy {
        BlurPolicy {
            variant: self.variant,
            p_obj: self.p_obj,
            start: (self.start_res, self.start_res),
            cutblur_area: (self.cutblur_min, self.cutblur_max),
        }
    }

    pub fn filter_rules(&self) -> FilterRules {
        FilterRules {
            min_area_frac: self.min_area,
            min_objects: self.min_objects,
            max_objects: self.max_objects,
            excluded_classes: self.exclude_classes.clone(),
        }
    }

    pub fn image_root(&self) -> PathBuf {
        match &self.images {
            Some(p) => p.clone(),
            None => self.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
        }
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.manifest.as_os_str().is_empty() {
            return bad("manifest path is required".into());
        }
        self.schedule_spec()?;
        self.policy().validate()?;
        if self.steps == Some(0) {
            return bad("steps must be at least 1".into());
        }
        if self.epochs == Some(0) {
            return bad("epochs must be at least 1".into());
        }
        if self.steps.is_some() && self.epochs.is_some() {
            return bad("give either steps or epochs, not both".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.min_area) {
            return bad(format!("min_area {} outside [0, 1)", self.min_area));
        }
        if self.min_objects > self.max_objects {
            return bad("min_objects exceeds max_objects".into());
        }
        Ok(())
    }

    /// Canonical one-line JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is serializable")
    }
}
