use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Discrete Fourier magnitudes `|X_k| / N` for `k = 0..=N/2` of uniformly
/// spaced samples.
pub fn spectrum(samples: &[f64]) -> Vec<f64> {
    assert!(samples.len() >= 64, "spectrum needs at least 64 samples");
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm() / n as f64).collect()
}
