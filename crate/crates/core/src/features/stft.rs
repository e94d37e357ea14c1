use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub const WINDOW: usize = 1024;
pub const HOP: usize = 512;
pub const BINS: usize = WINDOW / 2 + 1;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Pads by reflection (edge sample excluded) on both sides.
pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    let reflect = |i: isize| -> f64 {
        if n == 1 {
            return x[0];
        }
        let period = 2 * (n as isize - 1);
        let mut j = i.rem_euclid(period);
        if j >= n as isize {
            j = period - j;
        }
        x[j as usize]
    };
    for i in -(pad as isize)..(n + pad) as isize {
        out.push(reflect(i));
    }
    out
}

/// Centered short-time Fourier transform with a Hann window.
///
/// Returns one vector of `WINDOW / 2 + 1` complex bins per frame; frame `t`
/// is centred on sample `t * HOP`.
pub fn stft(samples: &[f64]) -> Vec<Vec<Complex64>> {
    if samples.is_empty() {
        return Vec::new();
    }
    let padded = reflect_pad(samples, WINDOW / 2);
    let window = hann(WINDOW);
    let frames = 1 + (padded.len() - WINDOW) / HOP;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(WINDOW);
    let mut buf = vec![Complex64::new(0.0, 0.0); WINDOW];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    (0..frames)
        .map(|t| {
            let start = t * HOP;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(padded[start + i] * window[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf[..BINS].to_vec()
        })
        .collect()
}

/// Squared magnitudes of a complex spectrogram.
pub fn power(spec: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    spec.iter()
        .map(|frame| frame.iter().map(|c| c.norm_sqr()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn three_seconds_give_94_frames() {
        assert_eq!(stft(&vec![0.0; 48_000]).len(), 94);
    }

    #[test]
    fn silence_has_zero_magnitude() {
        let spec = stft(&vec![0.0; 48_000]);
        assert!(spec.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn tone_peaks_at_bin_64() {
        let x: Vec<f64> = (0..48_000)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 16_000.0).sin())
            .collect();
        let spec = power(&stft(&x));
        // edge frames see the reflected signal
        for frame in &spec[1..spec.len() - 1] {
            let peak = frame
                .iter()
                .enumerate()
                .fold(
                    (0, 0.0),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0;
            assert_eq!(peak, 64);
        }
    }

    #[test]
    fn parseval_per_frame() {
        let mut rng = rng_from(8);
        let x: Vec<f64> = (0..8_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let spec = stft(&x);
        let padded = reflect_pad(&x, WINDOW / 2);
        let w = hann(WINDOW);
        for (t, frame) in spec.iter().enumerate() {
            let time_energy: f64 = (0..WINDOW)
                .map(|i| (padded[t * HOP + i] * w[i]).powi(2))
                .sum();
            // one-sided spectrum: interior bins stand for two conjugate bins
            let mut freq_energy = frame[0].norm_sqr() + frame[BINS - 1].norm_sqr();
            freq_energy += 2.0 * frame[1..BINS - 1].iter().map(|c| c.norm_sqr()).sum::<f64>();
            freq_energy /= WINDOW as f64;
            assert!((time_energy - freq_energy).abs() / time_energy < 1e-6);
        }
    }

    #[test]
    fn reflect_padding_mirrors_without_edge() {
        assert_eq!(
            reflect_pad(&[1.0, 2.0, 3.0], 2),
            vec![3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]
        );
    }
}
