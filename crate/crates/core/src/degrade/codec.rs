use std::fmt;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::bridge::CodecBridge;
use super::DegradeError;
use crate::audio::AudioClip;

/// Most compressions a chain may hold.
pub const MAX_CHAIN: usize = 3;

pub const MP3_KBPS: [f64; 12] = [
    8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0, 80.0, 96.0, 112.0, 128.0,
];
pub const AMR_NB_KBPS: [f64; 8] = [4.75, 5.15, 5.9, 6.7, 7.4, 7.95, 10.2, 12.2];
pub const GSM_KBPS: [f64; 1] = [13.0];

const FRAME: usize = 1024;
const BAND: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodecId {
    #[serde(rename = "MP3")]
    Mp3,
    #[serde(rename = "AMR-NB")]
    AmrNb,
    #[serde(rename = "GSM")]
    Gsm,
    #[serde(rename = "VORBIS")]
    Vorbis,
    #[serde(rename = "EXTERNAL")]
    External,
    #[serde(rename = "SIMULATED")]
    Simulated,
}

impl CodecId {
    pub fn name(self) -> &'static str {
        match self {
            CodecId::Mp3 => "MP3",
            CodecId::AmrNb => "AMR-NB",
            CodecId::Gsm => "GSM",
            CodecId::Vorbis => "VORBIS",
            CodecId::External => "EXTERNAL",
            CodecId::Simulated => "SIMULATED",
        }
    }

    /// Fixed bitrate set, for codecs that have one.
    pub fn bitrates(self) -> Option<&'static [f64]> {
        match self {
            CodecId::Mp3 => Some(&MP3_KBPS),
            CodecId::AmrNb => Some(&AMR_NB_KBPS),
            CodecId::Gsm => Some(&GSM_KBPS),
            _ => None,
        }
    }

    /// Native rate of the narrowband speech codecs.
    pub fn native_rate(self) -> Option<u32> {
        match self {
            CodecId::AmrNb | CodecId::Gsm => Some(8_000),
            _ => None,
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecStep {
    pub codec: CodecId,
    pub bitrate_kbps: f64,
}

impl CodecStep {
    pub fn new(codec: CodecId, bitrate_kbps: f64) -> Result<Self, DegradeError> {
        let step = Self {
            codec,
            bitrate_kbps,
        };
        step.validate()?;
        Ok(step)
    }

    pub fn validate(&self) -> Result<(), DegradeError> {
        if !(self.bitrate_kbps.is_finite() && self.bitrate_kbps > 0.0) {
            return Err(DegradeError::InvalidStep(format!(
                "bitrate {} kbps",
                self.bitrate_kbps
            )));
        }
        if let Some(set) = self.codec.bitrates() {
            if !set.iter().any(|&b| (b - self.bitrate_kbps).abs() < 1e-9) {
                return Err(DegradeError::InvalidStep(format!(
                    "{} does not offer {} kbps",
                    self.codec, self.bitrate_kbps
                )));
            }
        }
        Ok(())
    }
}

/// Hermetic lossy transform standing in for a real codec.
///
/// Brick-wall low-pass at `min(sr / 2, 350 * kbps)` Hz, then per 1024-sample
/// frame the magnitudes in each 32-bin band are quantized to
/// `max(2, round(kbps))` levels of the band maximum. Phases are kept.
pub fn simulated_codec(signal: &AudioClip, bitrate_kbps: f64) -> AudioClip {
    let sr = signal.sample_rate as f64;
    let cutoff = (sr / 2.0).min(350.0 * bitrate_kbps);
    let levels = bitrate_kbps.round().max(2.0);
    let steps = levels - 1.0;
    let half = FRAME / 2;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(FRAME);
    let inv = planner.plan_fft_inverse(FRAME);
    let mut out = Vec::with_capacity(signal.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); FRAME];
    for chunk in signal.samples.chunks(FRAME) {
        buf.fill(Complex64::new(0.0, 0.0));
        for (b, &x) in buf.iter_mut().zip(chunk) {
            b.re = x;
        }
        fwd.process(&mut buf);
        let mut half_spec: Vec<Complex64> = buf[..=half].to_vec();
        for (k, c) in half_spec.iter_mut().enumerate() {
            if k as f64 * sr / FRAME as f64 > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        for band in half_spec.chunks_mut(BAND) {
            let top = band.iter().fold(0.0f64, |m, c| m.max(c.norm()));
            if top == 0.0 {
                continue;
            }
            for c in band.iter_mut() {
                let mag = c.norm();
                if mag == 0.0 {
                    continue;
                }
                let q = (mag / top * steps).round() / steps * top;
                *c *= q / mag;
            }
        }
        buf[..=half].copy_from_slice(&half_spec);
        for k in 1..half {
            buf[FRAME - k] = half_spec[k].conj();
        }
        // DC and Nyquist bins of a real signal are real
        buf[0].im = 0.0;
        buf[half].im = 0.0;
        inv.process(&mut buf);
        out.extend(buf[..chunk.len()].iter().map(|c| c.re / FRAME as f64));
    }
    AudioClip::new(signal.sample_rate, out)
}

/// Applies compression steps left to right, returning to the input rate
/// after each. An empty chain returns the input untouched; otherwise the
/// result is standardized to 3 s and peak-limited.
pub fn apply_codec_chain(
    signal: &AudioClip,
    chain: &[CodecStep],
    bridge: Option<&CodecBridge>,
) -> Result<AudioClip, DegradeError> {
    if chain.len() > MAX_CHAIN {
        return Err(DegradeError::ChainTooLong(chain.len()));
    }
    if chain.is_empty() {
        return Ok(signal.clone());
    }
    let mut current = signal.clone();
    for step in chain {
        step.validate()?;
        current = match step.codec {
            CodecId::Simulated => simulated_codec(&current, step.bitrate_kbps),
            codec => {
                let bridge = bridge.ok_or_else(|| {
                    DegradeError::CodecUnavailable(format!(
                        "{codec} needs a codec bridge configuration"
                    ))
                })?;
                bridge.transcode(&current, *step)?
            }
        };
        current = current.resampled(signal.sample_rate);
    }
    Ok(current.standardize_length().limit_peak())
}
