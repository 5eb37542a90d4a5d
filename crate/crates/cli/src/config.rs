//! The single run-configuration document shared by all subcommands.
//!
//! One JSON file carries every tunable and every input path; each command
//! reads the sections it needs. Unknown keys are rejected so typos fail
//! loudly before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use perfquant_core::deconv::DeconvConfig;
use perfquant_core::phantom::PhantomConfig;
use perfquant_core::stnet::TrainConfig;
use perfquant_core::tracer_kinetics::KineticConstants;
use perfquant_core::Real;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsSection {
    pub rho: f64,
    pub h_lv: f64,
    pub h_sv: f64,
    pub x_scale: f64,
}

impl Default for KineticsSection {
    fn default() -> Self {
        KineticsSection {
            rho: 1.04,
            h_lv: 0.45,
            h_sv: 0.25,
            x_scale: 1.0,
        }
    }
}

impl KineticsSection {
    pub fn constants(&self) -> KineticConstants<Real> {
        KineticConstants {
            rho: self.rho,
            h_lv: self.h_lv,
            h_sv: self.h_sv,
            x_scale: self.x_scale,
        }
    }
}

/// Input file locations. Each command validates that the paths it needs are
/// present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub volume: Option<PathBuf>,
    pub brain_mask: Option<PathBuf>,
    pub lesion_mask: Option<PathBuf>,
    pub aif: Option<PathBuf>,
    pub vof: Option<PathBuf>,
    pub truth_maps: Option<PathBuf>,
    pub estimate_maps: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    // second data set for sweep runs (training side)
    pub train_volume: Option<PathBuf>,
    pub train_truth_maps: Option<PathBuf>,
    pub train_brain_mask: Option<PathBuf>,
    pub train_lesion_mask: Option<PathBuf>,
    pub train_aif: Option<PathBuf>,
    pub train_vof: Option<PathBuf>,
}

impl PathsSection {
    pub fn require(&self, field: &'static str) -> CliResult<&Path> {
        let opt = match field {
            "volume" => &self.volume,
            "brain_mask" => &self.brain_mask,
            "lesion_mask" => &self.lesion_mask,
            "aif" => &self.aif,
            "vof" => &self.vof,
            "truth_maps" => &self.truth_maps,
            "estimate_maps" => &self.estimate_maps,
            "checkpoint" => &self.checkpoint,
            "train_volume" => &self.train_volume,
            "train_truth_maps" => &self.train_truth_maps,
            "train_brain_mask" => &self.train_brain_mask,
            "train_lesion_mask" => &self.train_lesion_mask,
            "train_aif" => &self.train_aif,
            "train_vof" => &self.train_vof,
            _ => unreachable!("unknown path field {field}"),
        };
        opt.as_deref()
            .ok_or_else(|| CliError::Config(format!("paths.{field} is required by this command")))
    }
}

/// Either a fixed Tmax cutoff in seconds or ROC-based selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Fixed(f64),
    Auto,
}

impl Serialize for ThresholdSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ThresholdSpec::Fixed(v) => s.serialize_f64(*v),
            ThresholdSpec::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ThresholdSpec::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(ThresholdSpec::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "threshold must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentSection {
    /// Clinical default: 6 seconds.
    pub threshold: ThresholdSpec,
}

impl Default for SegmentSection {
    fn default() -> Self {
        SegmentSection {
            threshold: ThresholdSpec::Fixed(6.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Stride,
    Ratio,
    WPhys,
    Lr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Inference batch size reported alongside the timings.
    pub batch: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { batch: 512 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub kinetics: KineticsSection,
    pub deconv: DeconvConfig,
    pub train: TrainConfig,
    pub phantom: Option<PhantomConfig>,
    pub paths: PathsSection,
    pub segment: SegmentSection,
    pub sweep: Option<SweepSection>,
    pub bench: BenchSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config schema violation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.kinetics.constants().validate()?;
        self.deconv.validate()?;
        self.train.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values must not be empty".into()));
            }
        }
        if self.bench.batch == 0 {
            return Err(CliError::Config("bench.batch must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.kinetics.rho, 1.04);
        assert_eq!(back.train.batch, 512);
        assert_eq!(back.segment.threshold, ThresholdSpec::Fixed(6.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"kinetics": {"rho": 1.0, "bogus": 2}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(serde_json::from_str::<RunConfig>(r#"{"not_a_section": {}}"#).is_err());
    }

    #[test]
    fn threshold_spec_parses_both_forms() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"segment": {"threshold": "auto"}}"#).unwrap();
        assert_eq!(cfg.segment.threshold, ThresholdSpec::Auto);
        let cfg: RunConfig = serde_json::from_str(r#"{"segment": {"threshold": 4.5}}"#).unwrap();
        assert_eq!(cfg.segment.threshold, ThresholdSpec::Fixed(4.5));
        assert!(serde_json::from_str::<RunConfig>(r#"{"segment": {"threshold": "soon"}}"#).is_err());
    }
}
