//! One TOML file configures every stage; missing sections take defaults.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::MfccConfig;
use crate::emotion::ForestHyper;
use crate::error::{Error, Result};
use crate::proximity::ProximityConfig;
use crate::sim::ScenarioParams;
use crate::trigger::TriggerConfig;
use crate::vad::{HysteresisConfig, SvmHyper};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mfcc: MfccConfig,
    pub hysteresis: HysteresisConfig,
    pub svm: SvmHyper,
    pub proximity: ProximityConfig,
    pub trigger: TriggerConfig,
    pub forest: ForestHyper,
    pub sim: ScenarioParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mfcc.validate()?;
        self.hysteresis.validate()?;
        self.proximity.validate()?;
        self.trigger.validate()?;
        self.sim.validate()?;
        if self.sim.audio.sample_rate != self.mfcc.sample_rate {
            return Err(Error::Config(format!(
                "sim.audio.sample_rate {} differs from mfcc.sample_rate {}",
                self.sim.audio.sample_rate, self.mfcc.sample_rate
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, context: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{context}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
