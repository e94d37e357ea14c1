//! Single-sample kernels on channel-major `[C, H, W]` buffers.

use super::float::{gemm, Float};

/// Unrolls 3x3 neighbourhoods (zero padding 1) into a `[cin * 9, h * w]` matrix.
pub(crate) fn im2col<T: Float>(x: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut cols = vec![T::zero(); cin * 9 * hw];
    for c in 0..cin {
        let plane = &x[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
pub(crate) fn col2im<T: Float>(cols: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut dx = vec![T::zero(); cin * hw];
    for c in 0..cin {
        let plane = &mut dx[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, &s)| *d = *d + s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, &s)| *d = *d + s),
                    }
                }
            }
        }
    }
    dx
}

/// 3x3 same-padding convolution followed by a rectifier.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_relu<T: Float>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    cout: usize,
) -> Vec<T> {
    let hw = h * w;
    let cols = im2col(x, cin, h, w);
    let mut out = vec![T::zero(); cout * hw];
    for (o, &b) in bias.iter().enumerate() {
        out[o * hw..(o + 1) * hw].fill(b);
    }
    gemm(
        cout,
        cin * 9,
        hw,
        weight,
        false,
        &cols,
        false,
        &mut out,
        true,
    );
    for v in &mut out {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

/// Backward through [`conv_relu`] given the rectified output `act` and its
/// gradient. Accumulates into `dweight`/`dbias`; returns the input gradient
/// when `need_dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_relu_backward<T: Float>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    cout: usize,
    act: &[T],
    mut dact: Vec<T>,
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    let hw = h * w;
    for (d, &a) in dact.iter_mut().zip(act) {
        if a <= T::zero() {
            *d = T::zero();
        }
    }
    for (o, db) in dbias.iter_mut().enumerate() {
        *db = *db + dact[o * hw..(o + 1) * hw].iter().copied().sum();
    }
    let cols = im2col(x, cin, h, w);
    gemm(cout, hw, cin * 9, &dact, false, &cols, true, dweight, true);
    if !need_dx {
        return None;
    }
    let mut dcols = cols;
    gemm(
        cin * 9,
        cout,
        hw,
        weight,
        true,
        &dact,
        false,
        &mut dcols,
        false,
    );
    Some(col2im(&dcols, cin, h, w))
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Returns the pooled map and the flat argmax of each window.
pub(crate) fn max_pool<T: Float>(x: &[T], c: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let i0 = base + 2 * y * w + 2 * xx;
                let mut best = i0;
                for i in [i0 + 1, i0 + w, i0 + w + 1] {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

pub(crate) fn max_pool_backward<T: Float>(dout: &[T], arg: &[u32], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&d, &i) in dout.iter().zip(arg) {
        dx[i as usize] = dx[i as usize] + d;
    }
    dx
}

/// `y = W x + b` with `W` stored `[out, in]`.
pub(crate) fn dense<T: Float>(x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let mut y = bias.to_vec();
    gemm(
        bias.len(),
        x.len(),
        1,
        weight,
        false,
        x,
        false,
        &mut y,
        true,
    );
    y
}

/// Accumulates parameter gradients of [`dense`] and returns `W^T dy`.
pub(crate) fn dense_backward<T: Float>(
    x: &[T],
    weight: &[T],
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let (out, inp) = (dy.len(), x.len());
    gemm(out, 1, inp, dy, false, x, false, dweight, true);
    for (b, &d) in dbias.iter_mut().zip(dy) {
        *b = *b + d;
    }
    let mut dx = vec![T::zero(); inp];
    gemm(inp, out, 1, weight, true, dy, false, &mut dx, false);
    dx
}

pub(crate) fn relu_in_place<T: Float>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

pub(crate) fn relu_mask<T: Float>(act: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}
