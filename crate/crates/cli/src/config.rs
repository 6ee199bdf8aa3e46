use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hkq_core::frames::sample_general_frame;
use hkq_core::local_model::{QuadricModel, QuadricSpec};
use hkq_core::morse::ClassifyingGroup;
use hkq_core::sampling::{rng, state_in_ball};
use hkq_core::{ActionModel, FlowOptions, Frame, ModelSpec, Objective, State};

use crate::error::{CliError, Result};

/// One experiment, read from a single JSON document. Every field except the
/// ones a subcommand needs may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub flow: FlowOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Truncation degree for Poincaré series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Number of leading starts whose traces are written as CSV.
    #[serde(default)]
    pub traces: usize,
    /// Quadric cone for `blowup-check`; all shipped cones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadric: Option<QuadricSource>,
    /// Points of the exceptional divisor sampled per chart.
    #[serde(default = "default_chart_samples")]
    pub chart_samples: usize,
    /// Explicit base-minus-strata data for `poincare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly: Option<AssemblySpec>,
}

fn default_objective() -> Objective {
    Objective::F23OnV
}

fn default_chart_samples() -> usize {
    50
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrameSpec {
    #[default]
    Identity,
    /// Rows of a rotation matrix.
    Explicit { rows: [[f64; 3]; 3] },
    /// First Haar-random frame from `seed` passing the general-frame test.
    SampleGeneral { seed: u64 },
}

/// Starts drawn uniformly from the ball `‖z‖ ≤ radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub count: usize,
    pub radius: f64,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            count: 100,
            radius: 3.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuadricSource {
    Shipped(String),
    Inline(QuadricSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblySpec {
    pub base: ClassifyingGroup,
    pub strata: Vec<StratumSpec>,
}

/// A stratum through a component fixed by `stabilizer`, contributing
/// `t^index · P_t(B stabilizer) · component`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSpec {
    pub index: usize,
    pub stabilizer: ClassifyingGroup,
    #[serde(default = "unit_series")]
    pub component: Vec<i64>,
    #[serde(default)]
    pub label: String,
}

fn unit_series() -> Vec<i64> {
    vec![1]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if !(self.sampler.radius > 0.0 && self.sampler.radius.is_finite()) {
            return Err(CliError::Invalid("sampler.radius must be positive".into()));
        }
        if let FrameSpec::Explicit { rows } = &self.frame {
            Frame::from_rows(*rows).map_err(|e| CliError::Invalid(format!("frame: {e}")))?;
        }
        if let Some(model) = &self.model {
            model.build().map_err(|e| CliError::Invalid(format!("model: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with the output location removed
    /// so that the hash describes the experiment rather than where it ran.
    pub fn hash(&self) -> String {
        let canonical = Self {
            out: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("configs always serialize");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn require_model(&self) -> Result<(ModelSpec, ActionModel)> {
        let spec = self
            .model
            .clone()
            .ok_or_else(|| CliError::Invalid("this subcommand needs a model".into()))?;
        let model = spec.build().map_err(|e| CliError::Invalid(format!("model: {e}")))?;
        Ok((spec, model))
    }

    /// The frame and, for sampled frames, the number of candidates drawn.
    pub fn resolve_frame(&self, model: &ActionModel) -> Result<(Frame, Option<usize>)> {
        match &self.frame {
            FrameSpec::Identity => Ok((Frame::identity(), None)),
            FrameSpec::Explicit { rows } => Ok((Frame::from_rows(*rows).map_err(|e| CliError::Invalid(format!("frame: {e}")))?, None)),
            FrameSpec::SampleGeneral { seed } => {
                let s = sample_general_frame(model, *seed)?;
                Ok((s.frame, Some(s.attempts)))
            }
        }
    }

    pub fn starts(&self, n: usize) -> Vec<State> {
        let mut r = rng(self.sampler.seed);
        let rho_max = self.sampler.radius * self.sampler.radius;
        (0..self.sampler.count).map(|_| state_in_ball(&mut r, n, rho_max)).collect()
    }

    pub fn quadrics(&self) -> Result<Vec<(String, QuadricModel)>> {
        match &self.quadric {
            None => Ok(QuadricModel::shipped().into_iter().map(|(n, q)| (n.to_owned(), q)).collect()),
            Some(QuadricSource::Shipped(name)) => QuadricModel::shipped()
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(n, q)| vec![(n.to_owned(), q)])
                .ok_or_else(|| CliError::Invalid(format!("unknown quadric '{name}'"))),
            Some(QuadricSource::Inline(spec)) => {
                let q = QuadricModel::from_spec(spec).map_err(|e| CliError::Invalid(format!("quadric: {e}")))?;
                Ok(vec![("inline".to_owned(), q)])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"model": {"kind": "circle", "n": 2}}"#).unwrap();
        assert_eq!(cfg.frame, FrameSpec::Identity);
        assert_eq!(cfg.objective, Objective::F23OnV);
        assert_eq!(cfg.sampler, SamplerSpec::default());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"modle": {}}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a: ExperimentConfig = serde_json::from_str(r#"{"cap": 6}"#).unwrap();
        let h = a.hash();
        a.out = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.cap = Some(8);
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn frames_parse_in_all_forms() {
        let f: FrameSpec = serde_json::from_str(r#"{"kind": "sample-general", "seed": 18446744073709551615}"#).unwrap();
        assert_eq!(f, FrameSpec::SampleGeneral { seed: u64::MAX });
        let f: FrameSpec = serde_json::from_str(r#"{"kind": "explicit", "rows": [[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap();
        assert!(matches!(f, FrameSpec::Explicit { .. }));
    }

    #[test]
    fn invalid_radius_fails_validation() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"sampler": {"radius": -1}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn quadrics_resolve_by_name() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"quadric": "node-c2"}"#).unwrap();
        assert_eq!(cfg.quadrics().unwrap().len(), 1);
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"quadric": "nope"}"#).unwrap();
        assert!(cfg.quadrics().is_err());
    }
}
