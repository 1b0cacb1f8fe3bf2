//! Impact sound synthesis for the granular contents.
//!
//! Impacts arrive as a Poisson process whose rate grows with the excitation
//! and with sqrt(particle_count). Each impact is an exponentially decaying
//! sinusoid near the material's centroid; its amplitude is normalised by the
//! decay constant so every material radiates the same energy per impact at
//! equal excitation and restitution.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::material::MaterialParams;
use crate::SAMPLE_RATE;

/// Impacts per second per (m/s² of excitation · sqrt(particle)).
pub const IMPACT_RATE: f64 = 0.4;
/// Peak impact amplitude per m/s² of excitation, before restitution.
pub const IMPACT_GAIN: f64 = 0.004;
/// Decay constant at which the amplitude normalisation is unity, s.
pub const REFERENCE_DECAY_S: f64 = 0.010;
/// Standard deviation of the microphone noise floor (full scale = 1).
pub const NOISE_FLOOR: f64 = 0.001;
/// Bursts are truncated after this many decay constants.
const BURST_SPAN_DECAYS: f64 = 5.0;

/// Round to the 16-bit PCM grid used on disk.
pub fn quantize_pcm(x: f64) -> f64 {
    // + 0.0 folds -0.0, which PCM cannot represent
    (x.clamp(-1.0, 1.0) * 32767.0).round() / 32767.0 + 0.0
}

/// Expected impacts per second.
pub fn impact_rate(material: &MaterialParams, excitation: f64) -> f64 {
    IMPACT_RATE * excitation.abs() * f64::from(material.particle_count).sqrt()
}

/// Adds this step's impacts into `pending` (which starts at the current chunk)
/// and returns the number of impacts emitted.
pub(crate) fn emit_impacts(
    rng: &mut ChaCha8Rng,
    material: &MaterialParams,
    excitation: f64,
    chunk_len: usize,
    dt: f64,
    pending: &mut Vec<f64>,
) -> u32 {
    let lambda = impact_rate(material, excitation) * dt;
    if lambda <= 0.0 || material.particle_count == 0 {
        return 0;
    }
    let count = Poisson::new(lambda)
        .map(|p| p.sample(rng) as u32)
        .unwrap_or(0);
    let sr = f64::from(SAMPLE_RATE);
    let tau = material.impact_decay_s;
    let burst_len = (BURST_SPAN_DECAYS * tau * sr).ceil() as usize;
    let norm = (REFERENCE_DECAY_S / tau).sqrt();
    for _ in 0..count {
        let onset = rng.random_range(0..chunk_len);
        let jitter = material.impact_bandwidth_hz * (rng.random::<f64>() - 0.5);
        let freq = material.impact_centroid_hz + jitter;
        let phase = rng.random::<f64>() * 2.0 * PI;
        let amp = IMPACT_GAIN
            * excitation.abs()
            * material.restitution
            * rng.random_range(0.7..1.3)
            * norm;
        let end = onset + burst_len;
        if pending.len() < end {
            pending.resize(end, 0.0);
        }
        let w = 2.0 * PI * freq / sr;
        let decay = (-1.0 / (tau * sr)).exp();
        let mut env = amp;
        for (k, slot) in pending[onset..end].iter_mut().enumerate() {
            *slot += env * (w * k as f64 + phase).sin();
            env *= decay;
        }
    }
    count
}

/// Pops one chunk off `pending`, adds the noise floor and quantises it.
pub(crate) fn take_chunk(
    rng: &mut ChaCha8Rng,
    pending: &mut Vec<f64>,
    chunk_len: usize,
) -> Vec<f64> {
    if pending.len() < chunk_len {
        pending.resize(chunk_len, 0.0);
    }
    let noise = Normal::new(0.0, NOISE_FLOOR).expect("valid noise std");
    let chunk: Vec<f64> = pending
        .drain(..chunk_len)
        .map(|x| quantize_pcm(x + noise.sample(rng)))
        .collect();
    chunk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Material;
    use rand::SeedableRng;

    #[test]
    fn quantize_is_idempotent() {
        for x in [-1.5, -1.0, -0.3333, 0.0, 1e-7, 0.5, 0.99999, 2.0] {
            let q = quantize_pcm(x);
            assert_eq!(quantize_pcm(q), q);
            assert!(q.abs() <= 1.0);
        }
    }

    #[test]
    fn empty_container_emits_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pending = Vec::new();
        let n = emit_impacts(
            &mut rng,
            &Material::Empty.params(),
            30.0,
            80,
            0.005,
            &mut pending,
        );
        assert_eq!(n, 0);
        assert!(pending.is_empty());
    }

    #[test]
    fn rate_grows_with_particles_and_excitation() {
        let rice = Material::Rice.params();
        let vit = Material::Vitamins.params();
        assert!(impact_rate(&rice, 5.0) > impact_rate(&vit, 5.0));
        assert!(impact_rate(&rice, 10.0) > impact_rate(&rice, 5.0));
        assert_eq!(impact_rate(&rice, 0.0), 0.0);
    }
}
