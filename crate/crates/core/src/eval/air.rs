use crate::room_sim::energy_decay_db;

/// Decay curves are clipped here so the numerical floor of a finished
/// response does not dominate the correlation.
pub const DECAY_FLOOR_DB: f64 = -100.0;

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] - ma, b[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Schroeder decay curve in dB on a shared time axis of `len` samples:
/// truncated, or held at its last value past the end of the response.
pub fn decay_profile(ir: &[f64], len: usize) -> Vec<f64> {
    let mut edc: Vec<f64> = energy_decay_db(ir)
        .into_iter()
        .map(|v| v.max(DECAY_FLOOR_DB))
        .collect();
    let last = edc.last().copied().unwrap_or(DECAY_FLOOR_DB);
    edc.resize(len, last);
    edc
}

/// Mean Pearson coefficient over all cross-pool pairs of decay profiles.
pub fn air_pool_correlation(pool_a: &[&[f64]], pool_b: &[&[f64]]) -> f64 {
    let len = pool_a
        .iter()
        .chain(pool_b)
        .map(|ir| ir.len())
        .max()
        .unwrap_or(0);
    if len == 0 {
        return 0.0;
    }
    let pa: Vec<Vec<f64>> = pool_a.iter().map(|ir| decay_profile(ir, len)).collect();
    let pb: Vec<Vec<f64>> = pool_b.iter().map(|ir| decay_profile(ir, len)).collect();
    let mut total = 0.0;
    for a in &pa {
        for b in &pb {
            total += pearson(a, b);
        }
    }
    total / (pa.len() * pb.len()) as f64
}
