//! Run configuration: loaded from TOML, overridden by flags, echoed into the
//! output directory of every run.

use std::path::Path;

use graspsense::controller::ControllerConfig;
use graspsense::dataset::GenerateConfig;
use graspsense::models::{ClassifierTrainConfig, PredictorTrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Propagated into every seed below when the config is resolved.
    pub seed: u64,
    /// Invocation that produced an echoed config. Ignored on load.
    pub invocation: Option<toml::Table>,
    pub generate: GenerateConfig,
    pub classifier: ClassifierTrainConfig,
    pub predictor: PredictorTrainConfig,
    pub controller: ControllerConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.invocation = None;
        Ok(cfg)
    }

    /// Applies `seed` (or the config's own) to every seeded component and
    /// checks the controller settings.
    pub fn resolve(mut self, seed: Option<u64>) -> CliResult<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.generate.base_seed = self.seed;
        self.classifier.sgd.seed = self.seed;
        self.predictor.sgd.seed = self.seed;
        self.controller
            .validate()
            .map_err(|e| CliError::usage(format!("controller config: {e}")))?;
        Ok(self)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("cannot serialize config: {e}")))
    }

    /// Writes the effective config with the invocation that used it.
    pub fn echo<A: Serialize>(
        &self,
        dir: &Path,
        name: &str,
        command: &str,
        args: &A,
    ) -> CliResult<()> {
        let mut invocation = toml::Table::new();
        invocation.insert("command".into(), toml::Value::String(command.into()));
        let args = toml::Table::try_from(args)
            .map_err(|e| CliError::usage(format!("cannot serialize arguments: {e}")))?;
        invocation.insert("args".into(), toml::Value::Table(args));
        let echoed = RunConfig {
            invocation: Some(invocation),
            ..self.clone()
        };
        let path = dir.join(name);
        std::fs::write(&path, echoed.to_toml()?).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default().resolve(Some(9)).unwrap();
        let back = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back.resolve(None).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = RunConfig::parse("[predictor.sgd]\nepochs = 2\n").unwrap();
        assert_eq!(cfg.predictor.sgd.epochs, 2);
        assert_eq!(cfg.classifier, ClassifierTrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[generate]\ntrial_count = 3\n").is_err());
    }

    #[test]
    fn seed_flag_reaches_every_component() {
        let cfg = RunConfig::default().resolve(Some(41)).unwrap();
        assert_eq!(cfg.generate.base_seed, 41);
        assert_eq!(cfg.classifier.sgd.seed, 41);
        assert_eq!(cfg.predictor.sgd.seed, 41);
    }

    #[test]
    fn echoed_invocation_is_ignored_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default().resolve(Some(3)).unwrap();
        cfg.echo(
            dir.path(),
            "run.toml",
            "generate",
            &[("trials", 1)]
                .into_iter()
                .collect::<std::collections::BTreeMap<_, _>>(),
        )
        .unwrap();
        let text = std::fs::read_to_string(dir.path().join("run.toml")).unwrap();
        assert!(text.contains("command = \"generate\""));
        assert_eq!(RunConfig::parse(&text).unwrap().resolve(None).unwrap(), cfg);
    }
}
