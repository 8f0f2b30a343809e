use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::background::log_uniform;
use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

const MAX_PARTIALS: usize = 12;
const MAX_AR_ORDER: usize = 8;
const MAX_POLE_RADIUS: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseKind {
    Chirp,
    Harmonic,
    ArNoise,
}

impl ImpulseKind {
    pub const ALL: [ImpulseKind; 3] = [ImpulseKind::Chirp, ImpulseKind::Harmonic, ImpulseKind::ArNoise];

    pub fn label(self) -> &'static str {
        match self {
            ImpulseKind::Chirp => "chirp",
            ImpulseKind::Harmonic => "harmonic",
            ImpulseKind::ArNoise => "ar_noise",
        }
    }
}

impl std::str::FromStr for ImpulseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ImpulseKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::invalid_input(format!("unknown impulse kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Carrier {
    Chirp { f0_hz: f64, f1_hz: f64, sweep: Sweep },
    Harmonic { f0_hz: f64, partials: usize, alpha: f64 },
    ArNoise { poles: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseParams {
    pub seed: u64,
    pub sigma_attack_s: f64,
    pub sigma_decay_s: f64,
    pub peak_s: f64,
    pub carrier: Carrier,
}

/// Asymmetric Gaussian: `sigma_a` before the peak, `sigma_d` after.
pub fn asymmetric_gaussian(t: f64, peak: f64, sigma_a: f64, sigma_d: f64) -> f64 {
    let d = t - peak;
    let s = if d < 0.0 { sigma_a } else { sigma_d };
    (-0.5 * (d / s).powi(2)).exp()
}

fn chirp(rng: &mut impl Rng, n: usize, rate: f64) -> (Vec<f64>, Carrier) {
    let top = 12_000f64.min(0.45 * rate);
    let f0 = log_uniform(rng, 100.0, top);
    let f1 = log_uniform(rng, 100.0, top);
    let sweep = if rng.random_bool(0.5) { Sweep::Linear } else { Sweep::Exponential };
    let dur = n as f64 / rate;
    let phi0 = rng.random_range(0.0..2.0 * PI);
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let phase = match sweep {
                Sweep::Exponential if (f1 / f0 - 1.0).abs() > 1e-6 => {
                    let k = (f1 / f0).ln();
                    2.0 * PI * f0 * dur / k * ((k * t / dur).exp() - 1.0)
                }
                _ => 2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * dur)),
            };
            (phase + phi0).sin()
        })
        .collect();
    (x, Carrier::Chirp { f0_hz: f0, f1_hz: f1, sweep })
}

fn harmonic(rng: &mut impl Rng, n: usize, rate: f64) -> (Vec<f64>, Carrier) {
    let f0 = log_uniform(rng, 80.0, 1000.0);
    let fit = ((0.45 * rate / f0).floor() as usize).clamp(1, MAX_PARTIALS);
    let partials = rng.random_range(1..=fit);
    let alpha = rng.random_range(0.5..=2.0);
    let phases: Vec<f64> = (0..partials).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            phases
                .iter()
                .enumerate()
                .map(|(k, ph)| {
                    let h = (k + 1) as f64;
                    (2.0 * PI * h * f0 * t + ph).sin() / h.powf(alpha)
                })
                .sum()
        })
        .collect();
    (x, Carrier::Harmonic { f0_hz: f0, partials, alpha })
}

/// Expands `prod (1 - p z^-1)` over complex conjugate pole pairs and real
/// poles into denominator coefficients `[1, a1, ..]`.
fn poles_to_denominator(poles: &[[f64; 2]]) -> Vec<f64> {
    let mut a = vec![1.0];
    let mul = |a: &Vec<f64>, f: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; a.len() + f.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in f.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    for &[r, theta] in poles {
        if theta == 0.0 || theta == PI {
            let p = r * theta.cos();
            a = mul(&a, &[1.0, -p]);
        } else {
            a = mul(&a, &[1.0, -2.0 * r * theta.cos(), r * r]);
        }
    }
    a
}

fn ar_noise(rng: &mut impl Rng, n: usize) -> (Vec<f64>, Carrier) {
    loop {
        let order = rng.random_range(2..=MAX_AR_ORDER);
        let mut poles = Vec::new();
        for _ in 0..order / 2 {
            poles.push([rng.random_range(0.5..MAX_POLE_RADIUS), rng.random_range(0.02 * PI..0.98 * PI)]);
        }
        if order % 2 == 1 {
            let theta = if rng.random_bool(0.5) { 0.0 } else { PI };
            poles.push([rng.random_range(0.0..MAX_POLE_RADIUS), theta]);
        }
        let a = poles_to_denominator(&poles);
        let settle = 2048;
        let mut y = vec![0.0; n + settle];
        for i in 0..y.len() {
            let mut v: f64 = StandardNormal.sample(rng);
            for (k, ak) in a.iter().enumerate().skip(1) {
                if i >= k {
                    v -= ak * y[i - k];
                }
            }
            y[i] = v;
        }
        if y.iter().all(|v| v.is_finite()) {
            return (y.split_off(settle), Carrier::ArNoise { poles });
        }
    }
}

/// One synthetic impulse, peak-normalised, at most one second long.
pub fn gen_synthetic_impulse(kind: ImpulseKind, sample_rate: u32, seed: u64) -> Result<(AudioBuffer, ImpulseParams)> {
    if sample_rate < 8000 {
        return Err(Error::invalid_input(format!("impulse rate {sample_rate} Hz is too low")));
    }
    let rate = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma_a = rng.random_range(0.001..=0.010);
    let sigma_d = log_uniform(&mut rng, 0.010, 0.200);
    let peak_s = 4.0 * sigma_a;
    let n = (((peak_s + 4.5 * sigma_d) * rate).ceil() as usize).min(sample_rate as usize);
    let (carrier_samples, carrier) = match kind {
        ImpulseKind::Chirp => chirp(&mut rng, n, rate),
        ImpulseKind::Harmonic => harmonic(&mut rng, n, rate),
        ImpulseKind::ArNoise => ar_noise(&mut rng, n),
    };
    let mut x: Vec<f64> = carrier_samples
        .iter()
        .enumerate()
        .map(|(i, v)| v * asymmetric_gaussian(i as f64 / rate, peak_s, sigma_a, sigma_d))
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    let params = ImpulseParams {
        seed,
        sigma_attack_s: sigma_a,
        sigma_decay_s: sigma_d,
        peak_s,
        carrier,
    };
    Ok((AudioBuffer::new(x, sample_rate)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::{impulsiveness_filter, ImpulsivenessConfig};

    #[test]
    fn deterministic_and_bounded() {
        for kind in ImpulseKind::ALL {
            for seed in 0..20 {
                let (a, pa) = gen_synthetic_impulse(kind, 44_100, seed).unwrap();
                let (b, pb) = gen_synthetic_impulse(kind, 44_100, seed).unwrap();
                assert_eq!(a, b);
                assert_eq!(pa, pb);
                assert!(a.len() <= 44_100);
                assert!((a.peak() - 1.0).abs() < 1e-12);
                assert!((0.001..=0.010).contains(&pa.sigma_attack_s));
                assert!((0.010..=0.200).contains(&pa.sigma_decay_s));
            }
        }
    }

    #[test]
    fn kinds_parse() {
        for kind in ImpulseKind::ALL {
            assert_eq!(kind.label().parse::<ImpulseKind>().unwrap(), kind);
        }
        assert!("drum".parse::<ImpulseKind>().is_err());
    }

    #[test]
    fn ar_poles_stay_inside_the_radius() {
        for seed in 0..50 {
            let (_, p) = gen_synthetic_impulse(ImpulseKind::ArNoise, 44_100, seed).unwrap();
            let Carrier::ArNoise { poles } = p.carrier else { panic!() };
            let order: usize = poles.iter().map(|&[_, th]| if th == 0.0 || th == PI { 1 } else { 2 }).sum();
            assert!((2..=MAX_AR_ORDER).contains(&order));
            assert!(poles.iter().all(|&[r, _]| r < MAX_POLE_RADIUS));
        }
    }

    #[test]
    fn denominator_of_conjugate_pair() {
        let a = poles_to_denominator(&[[0.5, PI / 2.0], [0.25, 0.0]]);
        // (1 + 0.25 z^-2)(1 - 0.25 z^-1)
        let want = [1.0, -0.25, 0.25, -0.0625];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_outlasts_attack() {
        for seed in 0..40 {
            let (x, p) = gen_synthetic_impulse(ImpulseKind::Harmonic, 44_100, seed).unwrap();
            if p.sigma_decay_s <= p.sigma_attack_s {
                continue;
            }
            // Envelope crossings of -20 dB around the peak.
            let rate = 44_100.0;
            let level: f64 = 0.1;
            let t_rise = p.peak_s - p.sigma_attack_s * (2.0 * (1.0 / level).ln()).sqrt();
            let t_fall = p.peak_s + p.sigma_decay_s * (2.0 * (1.0 / level).ln()).sqrt();
            assert!(t_fall - p.peak_s > p.peak_s - t_rise);
            if p.sigma_decay_s < 2.0 * p.sigma_attack_s {
                continue;
            }
            // The waveform agrees: 1 ms RMS frames above -20 dB of the
            // loudest span more time after the loudest frame than before.
            let frame = 44;
            let env: Vec<f64> = x
                .samples()
                .chunks(frame)
                .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
                .collect();
            let (imax, max) = env.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            let first = env.iter().position(|&v| v >= level * max).unwrap();
            let last = env.iter().rposition(|&v| v >= level * max).unwrap();
            assert!(last - imax >= imax - first, "seed {seed}: {first} {imax} {last} at {rate}");
        }
    }

    #[test]
    fn nearly_all_pass_the_impulsiveness_filter() {
        let cfg = ImpulsivenessConfig::default();
        let mut accepted = 0;
        let total = 999;
        for i in 0..total {
            let kind = ImpulseKind::ALL[i % 3];
            let (x, _) = gen_synthetic_impulse(kind, 44_100, 10_000 + i as u64).unwrap();
            if impulsiveness_filter(&x, &cfg).unwrap().is_accept() {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / total as f64;
        assert!(rate >= 0.99, "accept rate {rate:.3}");
    }
}
