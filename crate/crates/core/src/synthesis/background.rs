use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::config::{PinkConfig, Range};
use super::room::room_ir;
use crate::error::{Error, Result};
use crate::signal::filters::{cascade, fft_convolve_truncated, Biquad};
use crate::signal::AudioBuffer;
use crate::util::db_to_amp;

/// RMS of the raw pink noise before shaping, about -20 dBFS.
const PINK_RMS: f64 = 0.1;
/// Below this the 1/f slope is flattened.
const PINK_FLOOR_HZ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqBand {
    pub freq_hz: f64,
    pub q: f64,
    pub gain_db: f64,
}

impl EqBand {
    pub fn biquad(&self, sample_rate: u32) -> Biquad {
        Biquad::peaking(sample_rate as f64, self.freq_hz, self.q, self.gain_db)
    }
}

/// Draws `n` peaking bands with log-uniform centres, clipped below Nyquist.
pub(crate) fn draw_eq(
    rng: &mut impl Rng,
    n: usize,
    freq: Range,
    q: Range,
    gain_db: f64,
    sample_rate: u32,
) -> Vec<EqBand> {
    let top = freq.max.min(0.45 * sample_rate as f64).max(freq.min);
    (0..n)
        .map(|_| EqBand {
            freq_hz: log_uniform(rng, freq.min, top),
            q: uniform(rng, q),
            gain_db: if gain_db > 0.0 { rng.random_range(-gain_db..=gain_db) } else { 0.0 },
        })
        .collect()
}

pub(crate) fn uniform(rng: &mut impl Rng, r: Range) -> f64 {
    if r.max > r.min {
        rng.random_range(r.min..=r.max)
    } else {
        r.min
    }
}

pub(crate) fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (rng.random_range(lo.ln()..=hi.ln())).exp()
    } else {
        lo
    }
}

/// Breakpoint of the slow gain contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub time_s: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinkParams {
    pub seed: u64,
    pub eq: Vec<EqBand>,
    pub contour: Vec<ContourPoint>,
    pub reverb_decay_s: f64,
    pub noise_floor_db: f64,
}

fn pink_noise(n: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = sample_rate as f64 / n as f64;
    buf[0] = Complex64::default();
    for k in 1..n {
        let f = k.min(n - k) as f64 * df;
        buf[k] /= f.max(PINK_FLOOR_HZ).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    x.into_iter().map(|v| v * PINK_RMS / rms).collect()
}

fn draw_contour(rng: &mut impl Rng, duration_s: f64, cfg: &PinkConfig) -> Vec<ContourPoint> {
    let mut points = Vec::new();
    let mut t = 0.0;
    loop {
        let gain_db = if cfg.contour_db > 0.0 {
            rng.random_range(-cfg.contour_db..=cfg.contour_db)
        } else {
            0.0
        };
        points.push(ContourPoint { time_s: t, gain_db });
        if t >= duration_s {
            break;
        }
        t += uniform(rng, cfg.contour_segment_s);
    }
    points
}

fn contour_gain(points: &[ContourPoint], t: f64) -> f64 {
    let i = points.partition_point(|p| p.time_s <= t);
    let db = if i == 0 {
        points[0].gain_db
    } else if i == points.len() {
        points[i - 1].gain_db
    } else {
        let (a, b) = (points[i - 1], points[i]);
        a.gain_db + (b.gain_db - a.gain_db) * (t - a.time_s) / (b.time_s - a.time_s)
    };
    db_to_amp(db)
}

/// Pink noise with random EQ, a slow gain contour, a short reverb and a
/// Gaussian noise floor.
pub fn gen_pink_background(
    cfg: &PinkConfig,
    duration_s: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<(AudioBuffer, PinkParams)> {
    cfg.validate()?;
    if !(duration_s > 0.0) || sample_rate == 0 {
        return Err(Error::invalid_input("background duration and rate must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * sample_rate as f64).round() as usize;
    let eq = draw_eq(&mut rng, cfg.eq_bands, cfg.eq_freq_hz, cfg.eq_q, cfg.eq_gain_db, sample_rate);
    let contour = draw_contour(&mut rng, duration_s, cfg);
    let reverb_decay_s = uniform(&mut rng, cfg.reverb_decay_s);
    let ir = room_ir(reverb_decay_s, sample_rate, rng.random());

    // Pre-roll of one IR length so the reverb tail is built up at t = 0.
    let pre = ir.len();
    let mut x = pink_noise(n + pre, sample_rate, &mut rng);
    let sections: Vec<Biquad> = eq.iter().map(|b| b.biquad(sample_rate)).collect();
    cascade(&sections, &mut x);
    for (i, v) in x.iter_mut().enumerate() {
        let t = (i as f64 - pre as f64) / sample_rate as f64;
        *v *= contour_gain(&contour, t.max(0.0));
    }
    let wet = fft_convolve_truncated(&x, &ir);
    let mut y = wet[pre..].to_vec();
    let rms = (y.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    let sd = rms * db_to_amp(cfg.noise_floor_db);
    for v in y.iter_mut() {
        let w: f64 = StandardNormal.sample(&mut rng);
        *v += sd * w;
    }
    let params = PinkParams {
        seed,
        eq,
        contour,
        reverb_decay_s,
        noise_floor_db: cfg.noise_floor_db,
    };
    Ok((AudioBuffer::new(y, sample_rate)?, params))
}
