//! Material classes and their simulator parameters.
//!
//! Every material fills the same bottle with one cup of contents. Masses are
//! rough kitchen-scale figures; the acoustic and sloshing parameters are
//! simulator calibration chosen so the classes are spectrally separable
//! (impact centroids at least 400 Hz apart), not measured physical values.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, SAMPLE_RATE};

/// Mass of the empty bottle, kg.
pub const BOTTLE_MASS: f64 = 0.10;

/// Container contents class. The order is the class index used by the
/// classifier, the posterior and every confusion matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Rice,
    Cereal,
    Gummies,
    Vitamins,
    Empty,
}

impl Material {
    pub const COUNT: usize = 5;
    pub const ALL: [Material; Material::COUNT] = [
        Material::Rice,
        Material::Cereal,
        Material::Gummies,
        Material::Vitamins,
        Material::Empty,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Material> {
        Material::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Rice => "rice",
            Material::Cereal => "cereal",
            Material::Gummies => "gummies",
            Material::Vitamins => "vitamins",
            Material::Empty => "empty",
        }
    }

    /// Parameters from [`material_table`].
    pub fn params(self) -> MaterialParams {
        PARAMS[self.index()].clone()
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Material::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown material {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: Material,
    /// Bottle plus contents, kg.
    pub total_mass: f64,
    /// Contents only, kg.
    pub contents_mass: f64,
    pub particle_count: u32,
    /// Centre frequency of a single particle impact, Hz.
    pub impact_centroid_hz: f64,
    /// Width of the uniform jitter around the centroid, Hz.
    pub impact_bandwidth_hz: f64,
    /// Exponential decay constant of one impact, s.
    pub impact_decay_s: f64,
    pub restitution: f64,
    /// Natural frequency of the contents' sloshing mode, Hz.
    pub slosh_hz: f64,
    /// Damping ratio of the sloshing mode.
    pub slosh_damping: f64,
}

impl MaterialParams {
    pub fn bottle_mass(&self) -> f64 {
        self.total_mass - self.contents_mass
    }

    pub fn validate(&self) -> crate::Result<()> {
        let nyquist = f64::from(SAMPLE_RATE) / 2.0;
        let ok = self.total_mass > 0.0
            && self.contents_mass >= 0.0
            && self.contents_mass < self.total_mass
            && (self.particle_count > 0 || self.name == Material::Empty)
            && self.impact_centroid_hz > 0.0
            && self.impact_centroid_hz + self.impact_bandwidth_hz / 2.0 < nyquist
            && self.impact_decay_s > 0.0
            && (0.0..=1.0).contains(&self.restitution);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "material parameters for {} violate invariants",
                self.name
            )))
        }
    }
}

const PARAMS: [MaterialParams; Material::COUNT] = [
    MaterialParams {
        name: Material::Rice,
        total_mass: 0.30,
        contents_mass: 0.20,
        particle_count: 6000,
        impact_centroid_hz: 3800.0,
        impact_bandwidth_hz: 300.0,
        impact_decay_s: 0.006,
        restitution: 0.55,
        slosh_hz: 9.0,
        slosh_damping: 0.5,
    },
    MaterialParams {
        name: Material::Cereal,
        total_mass: 0.14,
        contents_mass: 0.04,
        particle_count: 1500,
        impact_centroid_hz: 1400.0,
        impact_bandwidth_hz: 400.0,
        impact_decay_s: 0.012,
        restitution: 0.45,
        slosh_hz: 6.0,
        slosh_damping: 0.6,
    },
    MaterialParams {
        name: Material::Gummies,
        total_mass: 0.26,
        contents_mass: 0.16,
        particle_count: 80,
        impact_centroid_hz: 600.0,
        impact_bandwidth_hz: 150.0,
        impact_decay_s: 0.020,
        restitution: 0.35,
        slosh_hz: 5.0,
        slosh_damping: 0.3,
    },
    MaterialParams {
        name: Material::Vitamins,
        total_mass: 0.23,
        contents_mass: 0.13,
        particle_count: 200,
        impact_centroid_hz: 2600.0,
        impact_bandwidth_hz: 250.0,
        impact_decay_s: 0.009,
        restitution: 0.60,
        slosh_hz: 7.0,
        slosh_damping: 0.4,
    },
    MaterialParams {
        name: Material::Empty,
        total_mass: BOTTLE_MASS,
        contents_mass: 0.0,
        particle_count: 0,
        impact_centroid_hz: 1000.0,
        impact_bandwidth_hz: 0.0,
        impact_decay_s: 0.010,
        restitution: 0.0,
        slosh_hz: 1.0,
        slosh_damping: 1.0,
    },
];

/// The five material classes keyed by label.
pub fn material_table() -> BTreeMap<Material, MaterialParams> {
    Material::ALL.iter().map(|&m| (m, m.params())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_five_classes() {
        let table = material_table();
        assert_eq!(table.len(), 5);
        for m in Material::ALL {
            assert!(table.contains_key(&m));
            table[&m].validate().unwrap();
        }
    }

    #[test]
    fn empty_has_no_particles() {
        assert_eq!(material_table()[&Material::Empty].particle_count, 0);
    }

    #[test]
    fn rice_has_more_particles_than_vitamins() {
        let t = material_table();
        assert!(t[&Material::Rice].particle_count > t[&Material::Vitamins].particle_count);
    }

    #[test]
    fn centroids_are_separated() {
        let mut c: Vec<f64> = Material::ALL
            .iter()
            .map(|m| m.params().impact_centroid_hz)
            .collect();
        c.sort_by(f64::total_cmp);
        for pair in c.windows(2) {
            assert!(pair[1] - pair[0] >= 400.0, "{pair:?}");
        }
    }

    #[test]
    fn names_round_trip() {
        for m in Material::ALL {
            assert_eq!(m.name().parse::<Material>().unwrap(), m);
            assert_eq!(Material::from_index(m.index()), Some(m));
        }
        assert!("sand".parse::<Material>().is_err());
    }
}
