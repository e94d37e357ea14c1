use std::path::Path;

use hound::{SampleFormat, WavSpec};
use thiserror::Error;

use super::AudioClip;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("{0} contains no samples")]
    Empty(String),
}

/// Reads any PCM or float WAV and downmixes it to mono by channel mean.
pub fn read_wav_mono(path: &Path) -> Result<AudioClip, WavError> {
    let read_err = |source| WavError::Read {
        path: path.display().to_string(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(read_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(read_err)?,
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(read_err)?
        }
    };
    if interleaved.is_empty() {
        return Err(WavError::Empty(path.display().to_string()));
    }
    let samples = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    Ok(AudioClip::new(spec.sample_rate, samples))
}

/// Writes a mono 32-bit float WAV.
pub fn write_wav_f32(path: &Path, clip: &AudioClip) -> Result<(), WavError> {
    let write_err = |source| WavError::Write {
        path: path.display().to_string(),
        source,
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(write_err)?;
    for &s in &clip.samples {
        writer.write_sample(s as f32).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}
