use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bridge::CodecBridge;
use super::codec::{
    apply_codec_chain, CodecId, CodecStep, AMR_NB_KBPS, GSM_KBPS, MAX_CHAIN, MP3_KBPS,
};
use super::{mix_noise, DegradeError, Snr};
use crate::audio::{read_wav_mono, AudioClip};
use crate::seed::{rng_from, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    White,
    Wav(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub snr: Snr,
    pub source: NoiseSource,
}

/// Noise, compression chain and the seed that fixes the noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationPlan {
    pub noise: NoiseConfig,
    pub chain: Vec<CodecStep>,
    pub seed: u64,
}

impl DegradationPlan {
    pub fn clean() -> Self {
        Self {
            noise: NoiseConfig {
                snr: Snr::Infinite,
                source: NoiseSource::White,
            },
            chain: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrLaw {
    Fixed(Snr),
    /// Uniform dB in `[min, max]`, or no noise with probability `p_infinite`.
    Uniform {
        min: f64,
        max: f64,
        p_infinite: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecChoice {
    pub codec: CodecId,
    pub bitrates: Vec<f64>,
}

/// What [`sample_degradation`] may draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationProfile {
    pub snr: SnrLaw,
    pub noise_source: NoiseSource,
    pub codecs: Vec<CodecChoice>,
    /// Chain lengths, drawn uniformly.
    pub chain_lengths: Vec<usize>,
}

impl DegradationProfile {
    /// Reverberant speech only.
    pub fn clean() -> Self {
        Self {
            snr: SnrLaw::Fixed(Snr::Infinite),
            noise_source: NoiseSource::White,
            codecs: Vec::new(),
            chain_lengths: vec![0],
        }
    }

    /// SNR uniform over [-10, 50] dB plus a no-noise outcome weighted like
    /// one more 1 dB bin, and at most one MP3, AMR-NB or GSM compression.
    pub fn training() -> Self {
        Self {
            snr: SnrLaw::Uniform {
                min: -10.0,
                max: 50.0,
                p_infinite: 1.0 / 63.0,
            },
            noise_source: NoiseSource::White,
            codecs: vec![
                CodecChoice {
                    codec: CodecId::Mp3,
                    bitrates: MP3_KBPS.to_vec(),
                },
                CodecChoice {
                    codec: CodecId::AmrNb,
                    bitrates: AMR_NB_KBPS.to_vec(),
                },
                CodecChoice {
                    codec: CodecId::Gsm,
                    bitrates: GSM_KBPS.to_vec(),
                },
            ],
            chain_lengths: vec![0, 1],
        }
    }

    /// A single pass through the built-in codec at a fixed bitrate.
    pub fn simulated(bitrate_kbps: f64) -> Self {
        Self {
            codecs: vec![CodecChoice {
                codec: CodecId::Simulated,
                bitrates: vec![bitrate_kbps],
            }],
            chain_lengths: vec![1],
            ..Self::clean()
        }
    }

    pub fn validate(&self) -> Result<(), DegradeError> {
        if self.chain_lengths.is_empty() {
            return Err(DegradeError::EmptyProfile("no chain lengths".into()));
        }
        if let Some(&n) = self.chain_lengths.iter().find(|&&n| n > MAX_CHAIN) {
            return Err(DegradeError::ChainTooLong(n));
        }
        if self.chain_lengths.iter().any(|&n| n > 0) && self.codecs.is_empty() {
            return Err(DegradeError::EmptyProfile(
                "chains requested but no codecs listed".into(),
            ));
        }
        for c in &self.codecs {
            if c.bitrates.is_empty() {
                return Err(DegradeError::EmptyProfile(format!(
                    "{} has no bitrates",
                    c.codec
                )));
            }
            for &b in &c.bitrates {
                CodecStep::new(c.codec, b)?;
            }
        }
        if let SnrLaw::Uniform {
            min,
            max,
            p_infinite,
        } = self.snr
        {
            if !(min <= max && (0.0..=1.0).contains(&p_infinite)) {
                return Err(DegradeError::EmptyProfile(format!(
                    "bad SNR law [{min}, {max}], p={p_infinite}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws one plan from a profile.
pub fn sample_degradation(
    rng: &mut Rng,
    profile: &DegradationProfile,
) -> Result<DegradationPlan, DegradeError> {
    profile.validate()?;
    let snr = match profile.snr {
        SnrLaw::Fixed(s) => s,
        SnrLaw::Uniform {
            min,
            max,
            p_infinite,
        } => {
            if rng.gen::<f64>() < p_infinite {
                Snr::Infinite
            } else {
                Snr::Finite(min + (max - min) * rng.gen::<f64>())
            }
        }
    };
    let len = *profile
        .chain_lengths
        .choose(rng)
        .expect("validated non-empty");
    let chain = (0..len)
        .map(|_| {
            let c = profile.codecs.choose(rng).expect("validated non-empty");
            CodecStep {
                codec: c.codec,
                bitrate_kbps: *c.bitrates.choose(rng).expect("validated non-empty"),
            }
        })
        .collect();
    Ok(DegradationPlan {
        noise: NoiseConfig {
            snr,
            source: profile.noise_source.clone(),
        },
        chain,
        seed: rng.gen(),
    })
}

fn noise_for(
    source: &NoiseSource,
    like: &AudioClip,
    rng: &mut Rng,
) -> Result<AudioClip, DegradeError> {
    let n = like.len();
    let samples = match source {
        NoiseSource::White => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
        NoiseSource::Wav(path) => {
            let file = read_wav_mono(path)?.resampled(like.sample_rate);
            if file.is_empty() {
                return Err(DegradeError::SilentNoiseSource);
            }
            let offset = rng.gen_range(0..file.len());
            (0..n)
                .map(|i| file.samples[(offset + i) % file.len()])
                .collect()
        }
    };
    Ok(AudioClip::new(like.sample_rate, samples))
}

/// Adds noise to reverberant speech, then runs the codec chain.
pub fn apply_plan(
    reverberant: &AudioClip,
    plan: &DegradationPlan,
    bridge: Option<&CodecBridge>,
) -> Result<AudioClip, DegradeError> {
    let noisy = match plan.noise.snr {
        Snr::Infinite => reverberant.clone(),
        snr => {
            let noise = noise_for(&plan.noise.source, reverberant, &mut rng_from(plan.seed))?;
            mix_noise(reverberant, &noise, snr)?
        }
    };
    apply_codec_chain(&noisy, &plan.chain, bridge)
}
