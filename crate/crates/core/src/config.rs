//! Run configuration shared by the command-line tools.
//!
//! A [`RunConfig`] is read from TOML; every section and field is optional and
//! falls back to its default. Command-line flags are applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyConfig, EnergyWeights};
use crate::error::{Error, Result};
use crate::lines::{CompletionPenalty, HistogramBins};
use crate::optimizer::DescentParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinesConfig {
    pub bins: HistogramBins,
    pub penalty: CompletionPenalty,
    /// Longest gap that completion may bridge, in domain units.
    pub gap_max: f64,
    /// Direction of the projection line, radians from the x-axis.
    pub axis_angle: f64,
}

impl Default for LinesConfig {
    fn default() -> Self {
        Self {
            bins: HistogramBins::default(),
            penalty: CompletionPenalty::default(),
            gap_max: 0.25,
            axis_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weights: EnergyWeights,
    /// Scale, levels, thresholds and the regularity constants.
    pub energy: EnergyConfig,
    /// Descent parameters; its `seed` is replaced by the top-level seed.
    pub descent: DescentParams,
    pub lines: LinesConfig,
    pub paths: Paths,
    /// The only source of randomness for a run.
    pub seed: u64,
    /// Worker threads; `None` lets the thread pool decide.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.energy.validate()?;
        self.descent_params().validate()?;
        self.lines.bins.validate()?;
        self.lines.penalty.validate()?;
        if !(self.lines.gap_max > 0.0 && self.lines.gap_max.is_finite()) {
            return Err(Error::Validation(format!("gap_max must be positive, got {}", self.lines.gap_max)));
        }
        if self.threads == Some(0) {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn descent_params(&self) -> DescentParams {
        DescentParams {
            seed: self.seed,
            ..self.descent.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.weights, EnergyWeights::uniform(1.0));
        assert_eq!(c.energy.scale, 1.0);
        assert_eq!(c.energy.levels, 8);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::from_toml_str(
            "seed = 7\n[weights]\ngamma7 = 0.0\n[energy]\nscale = 0.5\n[energy.regularity]\nepsilon = 0.01\n[descent]\nmax_iters = 3\n",
        )
        .unwrap();
        assert_eq!(c.weights.gamma7, 0.0);
        assert_eq!(c.weights.gamma1, 1.0);
        assert_eq!(c.energy.scale, 0.5);
        assert_eq!(c.energy.regularity.epsilon, 0.01);
        assert_eq!(c.energy.regularity.jump_factor, 2.0);
        assert_eq!(c.descent_params().seed, 7);
        assert_eq!(c.descent_params().max_iters, 3);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.seed = 11;
        c.threads = Some(2);
        c.paths.input = Some("in.pgm".into());
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn invalid_values_and_unknown_keys_are_rejected() {
        for text in [
            "[weights]\ngamma3 = -1.0\n",
            "[energy]\nlevels = 0\n",
            "[energy]\nscale = 0.0\n",
            "[descent]\nregion_size = 2\n",
            "threads = 0\n",
            "colour = 3\n",
            "[lines]\ngap_max = 0.0\n",
        ] {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Validation(_)), "{text}: {err}");
        }
    }
}
