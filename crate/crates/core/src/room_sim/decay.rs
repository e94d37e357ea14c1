use super::{RoomError, RoomSpec, FRACTIONAL_DELAY_TAPS};

const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -25.0;
/// Floor applied to the decay curve once the remaining energy is exactly zero.
const DECAY_FLOOR_DB: f64 = -300.0;

/// Sabine reverberation time `0.161 V / (a S)`.
pub fn sabine_rt60(room: &RoomSpec) -> f64 {
    0.161 * room.volume() / (room.absorption * room.surface_area())
}

/// Schroeder backward-integrated energy decay curve in dB, normalized to 0 dB
/// at the first sample.
pub fn energy_decay_db(ir: &[f64]) -> Vec<f64> {
    let mut edc = vec![0.0f64; ir.len()];
    let mut acc = 0.0;
    for i in (0..ir.len()).rev() {
        acc += ir[i] * ir[i];
        edc[i] = acc;
    }
    let total = acc;
    edc.iter()
        .map(|&e| {
            if total <= 0.0 || e <= 0.0 {
                DECAY_FLOOR_DB
            } else {
                (10.0 * (e / total).log10()).max(DECAY_FLOOR_DB)
            }
        })
        .collect()
}

/// Samples skipped after the strongest peak before the decay is integrated.
/// Covers the band-limited direct-path pulse, whose energy otherwise swamps
/// the -5..-25 dB window at short source distances.
pub const DIRECT_SOUND_GUARD: usize = FRACTIONAL_DELAY_TAPS / 2 + 1;

/// RT60 from a least-squares line through the -5..-25 dB span of the
/// reverberant tail's decay curve, extrapolated to 60 dB (three times T20).
///
/// The tail starts [`DIRECT_SOUND_GUARD`] samples after the largest-magnitude
/// sample.
pub fn schroeder_rt60(ir: &[f64], sample_rate: u32) -> Result<f64, RoomError> {
    let onset = ir
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| {
            if v.abs() > bv {
                (i, v.abs())
            } else {
                (bi, bv)
            }
        })
        .0;
    let start = (onset + DIRECT_SOUND_GUARD).min(ir.len());
    let edc = energy_decay_db(&ir[start..]);
    if !edc.iter().any(|&v| v <= FIT_END_DB) {
        return Err(RoomError::DecayTooShort);
    }
    let fs = sample_rate as f64;
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in edc.iter().enumerate() {
        if v < FIT_END_DB {
            break;
        }
        if v <= FIT_START_DB {
            let t = i as f64 / fs;
            n += 1.0;
            sx += t;
            sy += v;
            sxx += t * t;
            sxy += t * v;
        }
    }
    if n < 2.0 {
        return Err(RoomError::DecayTooShort);
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if !(slope < 0.0) {
        return Err(RoomError::DecayTooShort);
    }
    Ok(-60.0 / slope)
}
