//! Reverberation, additive noise and lossy codec chains applied to speech.

mod bridge;
mod codec;
mod plan;

pub use bridge::{CodecBridge, CodecTemplate};
pub use codec::{
    apply_codec_chain, simulated_codec, CodecId, CodecStep, AMR_NB_KBPS, GSM_KBPS, MAX_CHAIN,
    MP3_KBPS,
};
pub use plan::{
    apply_plan, sample_degradation, CodecChoice, DegradationPlan, DegradationProfile, NoiseConfig,
    NoiseSource, SnrLaw,
};

use std::fmt;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, WavError};
use crate::room_sim::Air;

#[derive(Debug, Error)]
pub enum DegradeError {
    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("length mismatch: signal has {signal} samples, noise {noise}")]
    LengthMismatch { signal: usize, noise: usize },
    #[error("noise source is silent at finite SNR")]
    SilentNoiseSource,
    #[error("codec unavailable: {0}")]
    CodecUnavailable(String),
    #[error("codec failed: {0}")]
    CodecFailure(String),
    #[error("invalid codec step: {0}")]
    InvalidStep(String),
    #[error("codec chain of {0} steps exceeds the limit of {MAX_CHAIN}")]
    ChainTooLong(usize),
    #[error("degradation profile cannot produce a plan: {0}")]
    EmptyProfile(String),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Signal-to-noise ratio in dB; `Infinite` means no noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    Finite(f64),
    Infinite,
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Finite(db) => write!(f, "{db}"),
            Snr::Infinite => f.write_str("inf"),
        }
    }
}

/// Full linear convolution via FFT, length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let lift = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = lift(a);
    let mut fb = lift(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Reverberant speech `s = a * r`, cropped or zero-padded to the standard
/// clip length and rescaled to 0.9 peak if it would clip.
pub fn convolve_reverb(speech: &AudioClip, air: &Air) -> Result<AudioClip, DegradeError> {
    if speech.sample_rate != air.sample_rate {
        return Err(DegradeError::SampleRateMismatch {
            expected: speech.sample_rate,
            got: air.sample_rate,
        });
    }
    let wet = convolve(&speech.samples, &air.samples);
    Ok(AudioClip::new(speech.sample_rate, wet)
        .standardize_length()
        .limit_peak())
}

/// Noise gain giving `snr_db` on full-clip RMS.
pub fn noise_gain(signal_rms: f64, noise_rms: f64, snr_db: f64) -> f64 {
    signal_rms / (noise_rms * 10f64.powf(snr_db / 20.0))
}

/// `signal + alpha * noise` at the requested SNR; the mixture is rescaled to
/// 0.9 peak if it exceeds full scale.
pub fn mix_noise(
    signal: &AudioClip,
    noise: &AudioClip,
    snr: Snr,
) -> Result<AudioClip, DegradeError> {
    let Snr::Finite(db) = snr else {
        return Ok(signal.clone());
    };
    if noise.sample_rate != signal.sample_rate {
        return Err(DegradeError::SampleRateMismatch {
            expected: signal.sample_rate,
            got: noise.sample_rate,
        });
    }
    if noise.len() != signal.len() {
        return Err(DegradeError::LengthMismatch {
            signal: signal.len(),
            noise: noise.len(),
        });
    }
    let noise_rms = noise.rms();
    if noise_rms == 0.0 {
        return Err(DegradeError::SilentNoiseSource);
    }
    let alpha = noise_gain(signal.rms(), noise_rms, db);
    let mixed = signal
        .samples
        .iter()
        .zip(&noise.samples)
        .map(|(s, n)| s + alpha * n)
        .collect();
    Ok(AudioClip::new(signal.sample_rate, mixed).limit_peak())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room_sim::AirLabels;
    use crate::seed::rng_from;
    use rand::Rng as _;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn air(samples: Vec<f64>) -> Air {
        Air {
            sample_rate: 16_000,
            samples,
            room_id: "test".into(),
            grid_index: (0, 0),
            labels: AirLabels {
                volume: 1.0,
                rt60_sabine: 0.1,
                rt60_schroeder: 0.1,
            },
        }
    }

    #[test]
    fn spectral_matches_direct_convolution() {
        let (a, b) = (random(1000, 1), random(1000, 2));
        let fast = convolve(&a, &b);
        let slow = direct(&a, &b);
        assert_eq!(fast.len(), 1999);
        let num: f64 = fast.iter().zip(&slow).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = slow.iter().map(|y| y * y).sum();
        assert!((num / den).sqrt() <= 1e-6);
    }

    #[test]
    fn convolution_is_linear() {
        let (a, b, r) = (random(700, 3), random(700, 4), random(300, 5));
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lhs = convolve(&sum, &r);
        let (ca, cb) = (convolve(&a, &r), convolve(&b, &r));
        let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..lhs.len() {
            assert!((lhs[i] - ca[i] - cb[i]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn impulse_and_delay() {
        let speech = AudioClip::new(16_000, random(48_000, 6).iter().map(|x| x * 0.5).collect());
        let same = convolve_reverb(&speech, &air(vec![1.0])).unwrap();
        for (x, y) in same.samples.iter().zip(&speech.samples) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut delta = vec![0.0; 11];
        delta[10] = 1.0;
        let shifted = convolve_reverb(&speech, &air(delta)).unwrap();
        assert_eq!(shifted.len(), 48_000);
        assert!(shifted.samples[..10].iter().all(|v| v.abs() < 1e-12));
        for i in 10..48_000 {
            assert!((shifted.samples[i] - speech.samples[i - 10]).abs() < 1e-12);
        }
    }

    #[test]
    fn loud_reverb_is_limited() {
        let speech = AudioClip::new(16_000, vec![0.8; 48_000]);
        let out = convolve_reverb(&speech, &air(vec![1.0, 1.0, 1.0])).unwrap();
        assert!((out.peak() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reverb_rate_mismatch() {
        let speech = AudioClip::new(8_000, vec![0.0; 10]);
        assert!(matches!(
            convolve_reverb(&speech, &air(vec![1.0])),
            Err(DegradeError::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn realized_snr_matches_request() {
        let s = AudioClip::new(16_000, random(48_000, 7).iter().map(|x| x * 0.3).collect());
        let n = AudioClip::new(16_000, random(48_000, 8));
        for db in [-10.0, -3.3, 0.0, 12.5, 50.0] {
            let out = mix_noise(&s, &n, Snr::Finite(db)).unwrap();
            let alpha = noise_gain(s.rms(), n.rms(), db);
            let scaled: Vec<f64> = n.samples.iter().map(|v| v * alpha).collect();
            let realized = 20.0 * (s.rms() / crate::audio::rms(&scaled)).log10();
            assert!((realized - db).abs() < 1e-6, "{db}: {realized}");
            let unlimited = s
                .samples
                .iter()
                .zip(&scaled)
                .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
            if unlimited <= 1.0 {
                let residual: Vec<f64> = out
                    .samples
                    .iter()
                    .zip(&s.samples)
                    .map(|(o, x)| o - x)
                    .collect();
                assert!((crate::audio::rms(&residual) - crate::audio::rms(&scaled)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unit_rms_gains() {
        assert!((noise_gain(1.0, 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((noise_gain(1.0, 1.0, 20.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn infinite_snr_is_identity() {
        let s = AudioClip::new(16_000, random(100, 9));
        let silent = AudioClip::silent(16_000, 100);
        assert_eq!(mix_noise(&s, &silent, Snr::Infinite).unwrap(), s);
        assert!(matches!(
            mix_noise(&s, &silent, Snr::Finite(10.0)),
            Err(DegradeError::SilentNoiseSource)
        ));
    }
}
