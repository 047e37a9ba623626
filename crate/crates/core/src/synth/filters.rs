use std::f64::consts::PI;

/// Second-order section, transposed direct form II.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn from_rbj(b: [f64; 3], a: [f64; 3]) -> Self {
        Self { b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]], a: [a[1] / a[0], a[2] / a[0]], z: [0.0; 2] }
    }

    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w = 2.0 * PI * fc / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_rbj([(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w = 2.0 * PI * fc / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_rbj([(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Section Q factors of a 4th-order Butterworth response.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_5];

/// 4th-order Butterworth high-pass followed by 4th-order low-pass.
#[derive(Debug, Clone)]
pub struct Bandpass {
    sections: Vec<Biquad>,
}

impl Bandpass {
    pub fn new(lo_hz: f64, hi_hz: f64, fs: f64) -> Self {
        let hi = hi_hz.min(0.45 * fs);
        let lo = lo_hz.clamp(0.1, hi * 0.9);
        let mut sections = Vec::with_capacity(4);
        for q in BUTTER4_Q {
            sections.push(Biquad::highpass(lo, fs, q));
        }
        for q in BUTTER4_Q {
            sections.push(Biquad::lowpass(hi, fs, q));
        }
        Self { sections }
    }

    pub fn process(&mut self, x: &mut [f64]) {
        for v in x.iter_mut() {
            let mut y = *v;
            for s in &mut self.sections {
                y = s.step(y);
            }
            *v = y;
        }
    }
}

/// First-order IIR low-pass `y += a (x - y)` with `a = 1 - exp(-2 pi fc / fs)`.
pub fn one_pole_lowpass(x: &mut [f64], fc: f64, fs: f64) {
    let a = 1.0 - (-2.0 * PI * fc.max(1e-3) / fs).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y += a * (*v - y);
        *v = y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain(filter: &mut Bandpass, f: f64, fs: f64) -> f64 {
        let n = 8000;
        let mut x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        filter.process(&mut x);
        let tail = &x[n / 2..];
        (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    }

    #[test]
    fn bandpass_passes_midband_and_cuts_edges() {
        let fs = 2000.0;
        assert!((gain(&mut Bandpass::new(20.0, 450.0, fs), 150.0, fs) - 1.0).abs() < 0.02);
        assert!((gain(&mut Bandpass::new(20.0, 450.0, fs), 450.0, fs) - 0.5f64.sqrt()).abs() < 0.02);
        assert!(gain(&mut Bandpass::new(20.0, 450.0, fs), 3.0, fs) < 1e-3);
        assert!(gain(&mut Bandpass::new(20.0, 450.0, fs), 900.0, fs) < 0.02);
    }
}
