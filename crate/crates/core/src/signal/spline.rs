use super::Waveform;
use crate::error::{Error, Result};

/// Resample through a natural cubic spline fitted to the input samples.
///
/// Output has `round(len * target / source)` samples on the uniform grid of
/// the target rate, starting at the first input sample. Positions past the
/// last knot follow the natural (linear) extension of the spline.
pub fn resample_cubic_spline(w: &Waveform, target_rate_hz: f64) -> Result<Waveform> {
    let y = w.samples();
    let n = y.len();
    if n < 4 {
        return Err(Error::SplineTooShort(n));
    }
    if !(target_rate_hz > 0.0 && target_rate_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target rate must be positive, got {target_rate_hz}"
        )));
    }
    let ratio = target_rate_hz / w.sample_rate_hz();
    let out_len = ((n as f64) * ratio).round() as usize;
    if out_len == 0 {
        return Err(Error::InvalidArgument("resampled length is zero".into()));
    }
    let m = second_derivatives(y);
    let step = w.sample_rate_hz() / target_rate_hz;
    let out = (0..out_len)
        .map(|j| evaluate(y, &m, j as f64 * step))
        .collect();
    Waveform::new(out, target_rate_hz)
}

/// Second derivatives of the natural spline at unit-spaced knots.
fn second_derivatives(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    // Thomas algorithm on the interior system M[i-1] + 4 M[i] + M[i+1] = rhs.
    let mut c_prime = vec![0.0; inner];
    let mut d_prime = vec![0.0; inner];
    for k in 0..inner {
        let i = k + 1;
        let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
        if k == 0 {
            c_prime[k] = 1.0 / 4.0;
            d_prime[k] = rhs / 4.0;
        } else {
            let denom = 4.0 - c_prime[k - 1];
            c_prime[k] = 1.0 / denom;
            d_prime[k] = (rhs - d_prime[k - 1]) / denom;
        }
    }
    for k in (0..inner).rev() {
        let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
        m[k + 1] = d_prime[k] - c_prime[k] * next;
    }
    m
}

fn evaluate(y: &[f64], m: &[f64], x: f64) -> f64 {
    let n = y.len();
    let last = (n - 1) as f64;
    if x >= last {
        // Natural boundary: zero curvature, so the spline continues linearly.
        let slope = (y[n - 1] - y[n - 2]) + (2.0 * m[n - 1] + m[n - 2]) / 6.0;
        return y[n - 1] + slope * (x - last);
    }
    let i = (x.floor() as usize).min(n - 2);
    let t = x - i as f64;
    let u = 1.0 - t;
    u * y[i]
        + t * y[i + 1]
        + ((u * u * u - u) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(samples: Vec<f64>, rate: f64) -> Waveform {
        Waveform::new(samples, rate).unwrap()
    }

    #[test]
    fn one_second_at_5100_becomes_8000_samples() {
        let w = wave(
            (0..5100).map(|i| (i as f64 * 0.01).sin()).collect(),
            5100.0,
        );
        let out = resample_cubic_spline(&w, 8000.0).unwrap();
        assert_eq!(out.len(), 8000);
        assert_eq!(out.sample_rate_hz(), 8000.0);
    }

    #[test]
    fn constants_are_reproduced() {
        let w = wave(vec![0.3712; 257], 5100.0);
        for rate in [8000.0, 4000.0, 10_000.0, 5100.0] {
            let out = resample_cubic_spline(&w, rate).unwrap();
            for s in out.samples() {
                assert!((s - 0.3712).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_input_is_rejected() {
        let w = wave(vec![1.0, 2.0, 3.0], 5100.0);
        let err = resample_cubic_spline(&w, 8000.0).unwrap_err();
        assert!(err.to_string().contains("input too short for cubic spline"));
    }

    #[test]
    fn end_extension_is_linear_for_linear_data() {
        let w = wave((0..50).map(|i| 2.0 * i as f64 - 1.0).collect(), 100.0);
        let out = resample_cubic_spline(&w, 160.0).unwrap();
        for (j, s) in out.samples().iter().enumerate() {
            let x = j as f64 * 100.0 / 160.0;
            assert!((s - (2.0 * x - 1.0)).abs() < 1e-9, "j={j}");
        }
    }
}
