/// log(x + 1e-10) applied to Mel energies.
pub const LOG_EPS: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Antiderivative of a unit-height triangle on `(left, centre, right)`.
fn triangle_integral(x: f64, left: f64, centre: f64, right: f64) -> f64 {
    if x <= left {
        0.0
    } else if x <= centre {
        (x - left).powi(2) / (2.0 * (centre - left))
    } else if x <= right {
        let rise = (centre - left) / 2.0;
        rise + ((right - centre).powi(2) - (right - x).powi(2)) / (2.0 * (right - centre))
    } else {
        (right - left) / 2.0
    }
}

/// Triangular filters on the HTK Mel scale spanning 0 Hz to Nyquist.
///
/// Each weight is the triangle's mean over the frequency interval an FFT bin
/// covers rather than its value at the bin centre, so even filters narrower
/// than one bin keep a positive area.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `weights[m][k]` couples filter `m` to FFT bin `k`.
    pub weights: Vec<Vec<f64>>,
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let bins = n_fft / 2 + 1;
        let bin_width = sample_rate as f64 / n_fft as f64;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let weights = (0..n_mels)
            .map(|m| {
                let (l, c, r) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
                (0..bins)
                    .map(|k| {
                        let centre = k as f64 * bin_width;
                        let a = centre - bin_width / 2.0;
                        let b = centre + bin_width / 2.0;
                        (triangle_integral(b, l, c, r) - triangle_integral(a, l, c, r)) / bin_width
                    })
                    .collect()
            })
            .collect();
        Self { weights, edges_hz }
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, power_frame: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power_frame).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Log-Mel energies per frame, without any padding.
pub fn log_mel(power: &[Vec<f64>], bank: &MelFilterbank) -> Vec<Vec<f64>> {
    power
        .iter()
        .map(|frame| {
            bank.apply(frame)
                .into_iter()
                .map(|e| (e + LOG_EPS).ln())
                .collect()
        })
        .collect()
}

/// Log-Mel spectrogram with the time axis cropped or padded to `frames`
/// rows; padding rows hold the log floor.
pub fn mel_spectrogram(power: &[Vec<f64>], bank: &MelFilterbank, frames: usize) -> Vec<Vec<f64>> {
    let mut rows = log_mel(power, bank);
    rows.truncate(frames);
    let floor = LOG_EPS.ln();
    rows.resize(frames, vec![floor; bank.n_mels()]);
    rows
}
