//! Default and material-specific predictors, keyed by motion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::predictor::{Scope, SlipPredictor};
use crate::controller::motion::MotionKind;
use crate::{Error, Material, Result};

pub const CLASSIFIER_FILE: &str = "classifier.bin";

/// File name a predictor of `scope` for `motion` is stored under.
pub fn predictor_file_name(scope: Scope, motion: MotionKind) -> String {
    match scope {
        Scope::Default => format!("predictor-default-{motion}.bin"),
        Scope::Material(m) => format!("predictor-material-{motion}-{m}.bin"),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ModelRegistry {
    default_models: BTreeMap<MotionKind, SlipPredictor>,
    material_models: BTreeMap<(MotionKind, Material), SlipPredictor>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files under the model's own scope and motion.
    pub fn insert(&mut self, model: SlipPredictor) {
        match model.scope() {
            Scope::Default => {
                self.default_models.insert(model.motion(), model);
            }
            Scope::Material(m) => {
                self.material_models.insert((model.motion(), m), model);
            }
        }
    }

    pub fn default_model(&self, motion: MotionKind) -> Option<&SlipPredictor> {
        self.default_models.get(&motion)
    }

    pub fn material_model(&self, motion: MotionKind, material: Material) -> Option<&SlipPredictor> {
        self.material_models.get(&(motion, material))
    }

    pub fn motions(&self) -> impl Iterator<Item = MotionKind> + '_ {
        self.default_models.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.default_models.len() + self.material_models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Material-specific model when one is given and registered, the motion's
    /// default otherwise.
    pub fn select_model(
        &self,
        motion: MotionKind,
        material: Option<Material>,
    ) -> Result<&SlipPredictor> {
        let default = self
            .default_models
            .get(&motion)
            .ok_or_else(|| Error::UnknownMotion(motion.name().to_string()))?;
        match material {
            None => Ok(default),
            Some(m) => match self.material_models.get(&(motion, m)) {
                Some(model) => Ok(model),
                None => {
                    log::info!("no {motion}/{m} predictor registered, falling back to the {motion} default");
                    Ok(default)
                }
            },
        }
    }

    /// Loads every predictor file found in `dir`. Each default motion must be
    /// present; material models are optional.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut reg = ModelRegistry::new();
        for motion in MotionKind::ALL {
            let path = dir.join(predictor_file_name(Scope::Default, motion));
            if !path.exists() {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "default predictor missing"),
                ));
            }
            reg.insert(load_checked(&path, Scope::Default, motion)?);
            for m in Material::ALL {
                let scope = Scope::Material(m);
                let path = dir.join(predictor_file_name(scope, motion));
                if path.exists() {
                    reg.insert(load_checked(&path, scope, motion)?);
                }
            }
        }
        Ok(reg)
    }

    /// Default models first, then material models, each in key order.
    pub fn models(&self) -> impl Iterator<Item = &SlipPredictor> {
        self.default_models
            .values()
            .chain(self.material_models.values())
    }

    /// Writes every model and returns the paths written.
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.models()
            .map(|m| {
                let path = dir.join(predictor_file_name(m.scope(), m.motion()));
                m.save(&path)?;
                Ok(path)
            })
            .collect()
    }
}

fn load_checked(path: &Path, scope: Scope, motion: MotionKind) -> Result<SlipPredictor> {
    let model = SlipPredictor::load(path)?;
    if model.scope() != scope || model.motion() != motion {
        return Err(Error::malformed(
            path.display().to_string(),
            format!("holds a {} {} model", model.scope(), model.motion()),
        ));
    }
    Ok(model)
}
