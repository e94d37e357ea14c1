use std::f64::consts::PI;

/// Orthonormal DCT-II basis, `n_coeff` rows of length `n`.
pub fn dct_basis(n_coeff: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n_coeff)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Cepstral coefficients of each log-Mel frame: orthonormal DCT-II along the
/// Mel axis, first `n_coeff` kept.
pub fn mfcc(log_mel: &[Vec<f64>], n_coeff: usize) -> Vec<Vec<f64>> {
    let Some(first) = log_mel.first() else {
        return Vec::new();
    };
    let basis = dct_basis(n_coeff, first.len());
    log_mel
        .iter()
        .map(|frame| {
            basis
                .iter()
                .map(|row| row.iter().zip(frame).map(|(b, x)| b * x).sum())
                .collect()
        })
        .collect()
}
