use std::f64::consts::PI;

/// Zero crossings of the interpolation kernel on each side, at the lower rate.
const HALF_ZEROS: f64 = 32.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
///
/// When downsampling, the kernel cutoff moves to the output Nyquist rate so
/// the result is anti-aliased.
pub fn resample(input: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || input.is_empty() {
        return input.to_vec();
    }
    let ratio = from as f64 / to as f64;
    let cutoff = (to as f64 / from as f64).min(1.0);
    let reach = HALF_ZEROS / cutoff;
    let out_len = ((input.len() as f64) / ratio).round() as usize;
    let last = input.len() as isize - 1;
    (0..out_len)
        .map(|n| {
            let t = n as f64 * ratio;
            let lo = ((t - reach).ceil() as isize).max(0);
            let hi = ((t + reach).floor() as isize).min(last);
            let mut acc = 0.0;
            for k in lo..=hi {
                let x = t - k as f64;
                acc += input[k as usize] * kernel(x, cutoff, reach);
            }
            acc
        })
        .collect()
}

fn kernel(x: f64, cutoff: f64, reach: f64) -> f64 {
    if x.abs() >= reach {
        return 0.0;
    }
    let window = 0.5 * (1.0 + (PI * x / reach).cos());
    let arg = cutoff * x;
    let sinc = if arg.abs() < 1e-12 {
        1.0
    } else {
        (PI * arg).sin() / (PI * arg)
    };
    cutoff * sinc * window
}
