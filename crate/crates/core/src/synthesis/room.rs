use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

/// Energy of the diffuse tail relative to the direct tap, per second of decay.
const TAIL_RATIO_PER_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomIrParams {
    pub decay_s: f64,
    pub seed: u64,
    pub length: usize,
}

/// Direct tap plus exponentially decaying Gaussian noise, scaled to unit
/// energy so broadband material keeps its level.
pub fn synth_room_ir(decay_s: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    if !(0.05..=1.0).contains(&decay_s) {
        return Err(Error::invalid_input(format!("room decay {decay_s} s outside [0.05, 1]")));
    }
    AudioBuffer::new(room_ir(decay_s, sample_rate, seed), sample_rate)
}

pub(crate) fn room_ir(decay_s: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = decay_s * sample_rate as f64;
    // e^-7 on the amplitude is about -61 dB.
    let len = (7.0 * tau).ceil() as usize + 1;
    let mut h = vec![0.0; len.max(1)];
    h[0] = 1.0;
    let mut tail_energy = 0.0;
    for (n, v) in h.iter_mut().enumerate().skip(1) {
        let w: f64 = StandardNormal.sample(&mut rng);
        *v = w * (-(n as f64) / tau).exp();
        tail_energy += *v * *v;
    }
    let ratio = TAIL_RATIO_PER_S * decay_s;
    if tail_energy > 0.0 {
        let g = (ratio / tail_energy).sqrt();
        h[1..].iter_mut().for_each(|v| *v *= g);
    }
    let norm = 1.0 / (1.0 + if tail_energy > 0.0 { ratio } else { 0.0 }).sqrt();
    h.iter_mut().for_each(|v| *v *= norm);
    h
}

/// Draws a decay uniformly from `[lo, hi]` and a fresh IR seed.
pub(crate) fn draw_room(rng: &mut impl Rng, lo: f64, hi: f64, sample_rate: u32) -> (RoomIrParams, Vec<f64>) {
    let decay_s = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let seed = rng.random();
    let ir = room_ir(decay_s, sample_rate, seed);
    (
        RoomIrParams {
            decay_s,
            seed,
            length: ir.len(),
        },
        ir,
    )
}
