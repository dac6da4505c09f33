use std::f64::consts::PI;

/// Fourth-order Butterworth low-pass as two bilinear-transform biquads.
#[derive(Clone, Debug)]
pub struct Butterworth4 {
    sections: [Biquad; 2],
}

#[derive(Clone, Copy, Debug)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Biquad {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        // Transposed direct form II, zero initial state.
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

impl Butterworth4 {
    pub fn lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        // Pole-pair quality factors of the 4th-order Butterworth prototype.
        let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
        let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
        Butterworth4 {
            sections: [
                Biquad::lowpass(cutoff_hz, sample_rate_hz, q1),
                Biquad::lowpass(cutoff_hz, sample_rate_hz, q2),
            ],
        }
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y);
        }
        y
    }

    /// Forward-backward (zero-phase) filtering; the magnitude response is
    /// squared.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y
    }
}
