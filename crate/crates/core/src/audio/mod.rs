//! Mono audio buffers, WAV I/O, resampling and a synthetic speech source.

mod resample;
mod synth;
mod wav;

pub use resample::resample;
pub use synth::{synth_speech, SpeechStyle};
pub use wav::{read_wav_mono, write_wav_f32, WavError};

/// Working sample rate of the whole pipeline.
pub const WORKING_RATE: u32 = 16_000;
/// Clip duration used for every training and test sample.
pub const CLIP_SECONDS: f64 = 3.0;
/// Peak level a clip is rescaled to when it would otherwise clip.
pub const LIMIT_PEAK: f64 = 0.9;

/// A mono clip in floating point, nominal range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Self {
        Self {
            sample_rate,
            samples,
        }
    }

    pub fn silent(sample_rate: u32, len: usize) -> Self {
        Self::new(sample_rate, vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Number of samples in a standard-length clip at this clip's rate.
    pub fn standard_len(sample_rate: u32) -> usize {
        (CLIP_SECONDS * sample_rate as f64).round() as usize
    }

    /// Crops or zero-pads to exactly [`CLIP_SECONDS`].
    pub fn standardize_length(mut self) -> Self {
        let n = Self::standard_len(self.sample_rate);
        self.samples.resize(n, 0.0);
        self
    }

    pub fn is_standard_length(&self) -> bool {
        self.samples.len() == Self::standard_len(self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|x| x.is_finite())
    }

    /// Rescales to a peak of [`LIMIT_PEAK`] only if the clip exceeds full scale.
    pub fn limit_peak(mut self) -> Self {
        let peak = self.peak();
        if peak > 1.0 {
            let g = LIMIT_PEAK / peak;
            self.samples.iter_mut().for_each(|x| *x *= g);
        }
        self
    }

    pub fn resampled(&self, rate: u32) -> Self {
        if rate == self.sample_rate {
            return self.clone();
        }
        Self::new(rate, resample(&self.samples, self.sample_rate, rate))
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
