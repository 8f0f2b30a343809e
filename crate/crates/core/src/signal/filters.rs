//! Small filtering helpers shared by the level meter, synthesis and curation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Direct-form-II-transposed biquad with `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// RBJ peaking equaliser.
    pub fn peaking(sample_rate: f64, freq: f64, q: f64, gain_db: f64) -> Self {
        let amp = 10f64.powf(gain_db / 40.0);
        let w0 = 2.0 * PI * freq / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        let a0 = 1.0 + alpha / amp;
        Self {
            b: [
                (1.0 + alpha * amp) / a0,
                -2.0 * cos / a0,
                (1.0 - alpha * amp) / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha / amp) / a0],
        }
    }

    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[0] + z2 * self.a[1])
    }

    pub fn process(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * out + s2;
            s2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

pub fn cascade(sections: &[Biquad], x: &mut [f64]) {
    for s in sections {
        s.process(x);
    }
}

/// Linear convolution truncated to `signal.len()` samples (causal filtering).
pub fn fft_convolve_truncated(signal: &[f64], ir: &[f64]) -> Vec<f64> {
    if signal.is_empty() || ir.is_empty() {
        return vec![0.0; signal.len()];
    }
    let n = (signal.len() + ir.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = signal
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::default()))
        .take(n)
        .collect();
    let mut b: Vec<Complex64> = ir
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::default()))
        .take(n)
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..signal.len()].iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaking_gain_at_centre() {
        let bq = Biquad::peaking(44100.0, 1000.0, 1.0, 6.0);
        let w = 2.0 * PI * 1000.0 / 44100.0;
        assert!((20.0 * bq.response(w).norm().log10() - 6.0).abs() < 1e-9);
        assert!((bq.response(0.0).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let h = [1.0, -0.5, 0.25, 0.125];
        let y = fft_convolve_truncated(&x, &h);
        for n in 0..x.len() {
            let direct: f64 = (0..h.len()).filter(|&j| j <= n).map(|j| h[j] * x[n - j]).sum();
            assert!((y[n] - direct).abs() < 1e-10);
        }
    }
}
