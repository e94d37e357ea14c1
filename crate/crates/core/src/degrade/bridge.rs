use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::codec::{CodecId, CodecStep};
use super::DegradeError;
use crate::audio::{read_wav_mono, write_wav_f32, AudioClip};

/// Encoder and decoder command lines for one codec.
///
/// Templates are split on whitespace; `{input}`, `{output}` and `{bitrate}`
/// (in kbps) are substituted inside each token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecTemplate {
    pub encode: String,
    pub decode: String,
    /// Container extension of the encoded file.
    #[serde(default = "default_extension")]
    pub extension: String,
    /// Rate the codec is fed at; narrowband codecs default to 8 kHz.
    #[serde(default)]
    pub sample_rate: Option<u32>,
}

fn default_extension() -> String {
    "bin".into()
}

/// Command-template bridge to external encoders, keyed by codec name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodecBridge {
    pub templates: BTreeMap<CodecId, CodecTemplate>,
}

impl CodecBridge {
    pub fn from_json(text: &str) -> Result<Self, DegradeError> {
        serde_json::from_str(text)
            .map_err(|e| DegradeError::CodecUnavailable(format!("bad bridge config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, DegradeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Encodes and decodes one clip in a private temporary directory.
    /// The result is at the codec's rate; callers resample back.
    pub fn transcode(&self, clip: &AudioClip, step: CodecStep) -> Result<AudioClip, DegradeError> {
        let template = self.templates.get(&step.codec).ok_or_else(|| {
            DegradeError::CodecUnavailable(format!("no bridge template for {}", step.codec))
        })?;
        let rate = template
            .sample_rate
            .or(step.codec.native_rate())
            .unwrap_or(clip.sample_rate);
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("input.wav");
        let encoded = dir.path().join(format!("encoded.{}", template.extension));
        let decoded = dir.path().join("decoded.wav");
        write_wav_f32(&input, &clip.resampled(rate))?;
        let bitrate = format!("{}", step.bitrate_kbps);
        run(&template.encode, &input, &encoded, &bitrate)?;
        run(&template.decode, &encoded, &decoded, &bitrate)?;
        let out = read_wav_mono(&decoded).map_err(|e| {
            DegradeError::CodecFailure(format!("{} output undecodable: {e}", step.codec))
        })?;
        if !out.is_finite() {
            return Err(DegradeError::CodecFailure(format!(
                "{} produced non-finite samples",
                step.codec
            )));
        }
        Ok(out)
    }
}

fn run(template: &str, input: &Path, output: &Path, bitrate: &str) -> Result<(), DegradeError> {
    let args: Vec<String> = template
        .split_whitespace()
        .map(|t| {
            t.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
                .replace("{bitrate}", bitrate)
        })
        .collect();
    let (program, rest) = args
        .split_first()
        .ok_or_else(|| DegradeError::CodecUnavailable("empty command template".into()))?;
    let result = Command::new(program).args(rest).output();
    let out = match result {
        Ok(o) => o,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(DegradeError::CodecUnavailable(format!(
                "{program} not found"
            )));
        }
        Err(e) => return Err(DegradeError::CodecFailure(format!("{program}: {e}"))),
    };
    if !out.status.success() {
        return Err(DegradeError::CodecFailure(format!(
            "{program} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::apply_codec_chain;

    fn bridge(encode: &str) -> CodecBridge {
        CodecBridge::from_json(&format!(
            r#"{{"MP3": {{"encode": "{encode}", "decode": "cp {{input}} {{output}}", "extension": "wav"}},
                 "GSM": {{"encode": "cp {{input}} {{output}}", "decode": "cp {{input}} {{output}}"}}}}"#
        ))
        .unwrap()
    }

    fn tone() -> AudioClip {
        AudioClip::new(
            16_000,
            (0..48_000).map(|n| 0.4 * (n as f64 * 0.05).sin()).collect(),
        )
    }

    #[test]
    fn passthrough_codec_round_trips() {
        let b = bridge("cp {input} {output}");
        let x = tone();
        let y = apply_codec_chain(
            &x,
            &[CodecStep::new(CodecId::Mp3, 128.0).unwrap()],
            Some(&b),
        )
        .unwrap();
        assert_eq!(y.len(), x.len());
        for (a, c) in x.samples.iter().zip(&y.samples) {
            assert!((a - c).abs() < 1e-6);
        }
    }

    #[test]
    fn narrowband_codec_runs_at_8k() {
        let b = bridge("cp {input} {output}");
        let x = tone();
        let raw = b
            .transcode(&x, CodecStep::new(CodecId::Gsm, 13.0).unwrap())
            .unwrap();
        assert_eq!(raw.sample_rate, 8_000);
        let y = apply_codec_chain(&x, &[CodecStep::new(CodecId::Gsm, 13.0).unwrap()], Some(&b))
            .unwrap();
        assert_eq!((y.sample_rate, y.len()), (16_000, 48_000));
    }

    #[test]
    fn missing_tool_and_failing_tool() {
        let step = CodecStep::new(CodecId::Mp3, 64.0).unwrap();
        let missing = bridge("no-such-encoder-binary {input} {output}");
        assert!(matches!(
            missing.transcode(&tone(), step),
            Err(DegradeError::CodecUnavailable(_))
        ));
        let failing = bridge("false");
        assert!(matches!(
            failing.transcode(&tone(), step),
            Err(DegradeError::CodecFailure(_))
        ));
        let empty = CodecBridge::default();
        assert!(matches!(
            empty.transcode(&tone(), step),
            Err(DegradeError::CodecUnavailable(_))
        ));
    }
}
