//! Forward and backward kernels. Activations are channel-major: a tensor
//! with `c` channels over a batch of `n` windows of length `len` is stored as
//! `c` rows of `n·len` values, window after window.

use super::real::{gemm, Real};

/// Left padding for "same" convolution; an even kernel puts the extra zero
/// on the right.
pub(crate) const fn same_pad_left(kernel: usize) -> usize {
    (kernel - 1) / 2
}

/// Unfolds `x` (`cin × n·len`) into `cin·kernel × n·len` shifted copies.
pub(crate) fn im2col<T: Real>(x: &[T], cin: usize, n: usize, len: usize, kernel: usize) -> Vec<T> {
    let nl = n * len;
    let pad = same_pad_left(kernel) as isize;
    let mut cols = vec![T::zero(); cin * kernel * nl];
    for c in 0..cin {
        for k in 0..kernel {
            let shift = k as isize - pad;
            let row = &mut cols[(c * kernel + k) * nl..][..nl];
            let (lo, hi) = valid_range(shift, len);
            if lo == hi {
                continue;
            }
            for e in 0..n {
                let src = &x[c * nl + e * len..][..len];
                let dst = &mut row[e * len..][..len];
                let s = (lo as isize + shift) as usize;
                dst[lo..hi].copy_from_slice(&src[s..s + (hi - lo)]);
            }
        }
    }
    cols
}

/// Output positions `l` for which `l + shift` indexes inside a window.
fn valid_range(shift: isize, len: usize) -> (usize, usize) {
    let lo = (-shift).clamp(0, len as isize) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

fn col2im<T: Real>(dcols: &[T], cin: usize, n: usize, len: usize, kernel: usize) -> Vec<T> {
    let nl = n * len;
    let pad = same_pad_left(kernel) as isize;
    let mut dx = vec![T::zero(); cin * nl];
    for c in 0..cin {
        for k in 0..kernel {
            let shift = k as isize - pad;
            let row = &dcols[(c * kernel + k) * nl..][..nl];
            let (lo, hi) = valid_range(shift, len);
            if lo == hi {
                continue;
            }
            for e in 0..n {
                let src = &row[e * len..][..len];
                let dst = &mut dx[c * nl + e * len..][..len];
                let s = (lo as isize + shift) as usize;
                for (d, &g) in dst[s..s + (hi - lo)].iter_mut().zip(&src[lo..hi]) {
                    *d += g;
                }
            }
        }
    }
    dx
}

/// Stride-1 "same" convolution. Returns the output and the unfolded input
/// needed by the backward pass.
pub(crate) fn conv_forward<T: Real>(
    x: &[T],
    cin: usize,
    n: usize,
    len: usize,
    kernel_w: &[T],
    bias: &[T],
    kernel: usize,
) -> (Vec<T>, Vec<T>) {
    let cout = bias.len();
    let nl = n * len;
    let cols = im2col(x, cin, n, len, kernel);
    let mut y = vec![T::zero(); cout * nl];
    gemm(false, false, cout, nl, cin * kernel, T::one(), kernel_w, cin * kernel, &cols, nl, T::zero(), &mut y, nl);
    for (row, &b) in y.chunks_mut(nl).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
    (y, cols)
}

pub(crate) struct ConvGrads<T> {
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
    pub input: Option<Vec<T>>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Real>(
    dy: &[T],
    cols: &[T],
    kernel_w: &[T],
    cin: usize,
    n: usize,
    len: usize,
    kernel: usize,
    need_input: bool,
) -> ConvGrads<T> {
    let nl = n * len;
    let cout = dy.len() / nl;
    let ck = cin * kernel;
    let mut dk = vec![T::zero(); cout * ck];
    gemm(false, true, cout, ck, nl, T::one(), dy, nl, cols, nl, T::zero(), &mut dk, ck);
    let db = dy.chunks(nl).map(|r| r.iter().copied().sum()).collect();
    let input = need_input.then(|| {
        let mut dcols = vec![T::zero(); ck * nl];
        gemm(true, false, ck, nl, cout, T::one(), kernel_w, ck, dy, nl, T::zero(), &mut dcols, nl);
        col2im(&dcols, cin, n, len, kernel)
    });
    ConvGrads { kernel: dk, bias: db, input }
}

pub(crate) fn relu_inplace<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| *v = v.max(T::zero()));
}

/// Zeroes `dy` wherever the ReLU output was not positive.
pub(crate) fn relu_backward_inplace<T: Real>(dy: &mut [T], out: &[T]) {
    for (g, &o) in dy.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Per-channel batch statistics from training-mode normalization.
pub(crate) struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

pub(crate) fn bn_train_forward<T: Real>(x: &[T], scale: &[T], shift: &[T], eps: T) -> (Vec<T>, BnCache<T>) {
    let c = scale.len();
    let row_len = x.len() / c;
    let count = row_len as f64;
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let (mut inv_std, mut mean, mut var) = (Vec::with_capacity(c), Vec::with_capacity(c), Vec::with_capacity(c));
    for ch in 0..c {
        let row = &x[ch * row_len..][..row_len];
        let mu = row.iter().map(|v| v.to_f64().unwrap_or(0.0)).sum::<f64>() / count;
        let sigma2 = row
            .iter()
            .map(|v| (v.to_f64().unwrap_or(0.0) - mu).powi(2))
            .sum::<f64>()
            / count;
        let (mu_t, var_t) = (T::lit(mu), T::lit(sigma2));
        let istd = (var_t + eps).sqrt().recip();
        let (g, b) = (scale[ch], shift[ch]);
        for ((yo, xo), &v) in y[ch * row_len..][..row_len]
            .iter_mut()
            .zip(&mut xhat[ch * row_len..][..row_len])
            .zip(row)
        {
            *xo = (v - mu_t) * istd;
            *yo = g * *xo + b;
        }
        inv_std.push(istd);
        mean.push(mu_t);
        var.push(var_t);
    }
    (y, BnCache { xhat, inv_std, mean, var })
}

pub(crate) fn bn_infer<T: Real>(x: &mut [T], scale: &[T], shift: &[T], mean: &[T], var: &[T], eps: T) {
    let row_len = x.len() / scale.len();
    for (ch, row) in x.chunks_mut(row_len).enumerate() {
        let a = scale[ch] / (var[ch] + eps).sqrt();
        let b = shift[ch] - a * mean[ch];
        row.iter_mut().for_each(|v| *v = a * *v + b);
    }
}

/// Returns `(dx, dscale, dshift)`.
pub(crate) fn bn_backward<T: Real>(dy: &[T], cache: &BnCache<T>, scale: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let c = scale.len();
    let row_len = dy.len() / c;
    let m = T::lit(row_len as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dscale = Vec::with_capacity(c);
    let mut dshift = Vec::with_capacity(c);
    for ch in 0..c {
        let g = &dy[ch * row_len..][..row_len];
        let xh = &cache.xhat[ch * row_len..][..row_len];
        let sum_g: T = g.iter().copied().sum();
        let sum_gx: T = g.iter().zip(xh).map(|(&a, &b)| a * b).sum();
        dscale.push(sum_gx);
        dshift.push(sum_g);
        let k = scale[ch] * cache.inv_std[ch] / m;
        for ((d, &gi), &xi) in dx[ch * row_len..][..row_len].iter_mut().zip(g).zip(xh) {
            *d = k * (m * gi - sum_g - xi * sum_gx);
        }
    }
    (dx, dscale, dshift)
}

/// Width-2, stride-2 max pooling per window (odd tails are dropped). The
/// second output lists, for every pooled value, the input offset it came from.
pub(crate) fn maxpool2_forward<T: Real>(x: &[T], c: usize, n: usize, len: usize) -> (Vec<T>, Vec<u32>) {
    let half = len / 2;
    let mut y = Vec::with_capacity(c * n * half);
    let mut arg = Vec::with_capacity(c * n * half);
    for ch in 0..c {
        for e in 0..n {
            let base = ch * n * len + e * len;
            for j in 0..half {
                let i = base + 2 * j;
                let pick = if x[i + 1] > x[i] { i + 1 } else { i };
                y.push(x[pick]);
                arg.push(pick as u32);
            }
        }
    }
    (y, arg)
}

pub(crate) fn maxpool2_backward<T: Real>(dy: &[T], arg: &[u32], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in dy.iter().zip(arg) {
        dx[i as usize] += g;
    }
    dx
}

/// Mean over time; returns an `n × c` row-major matrix.
pub(crate) fn global_avg_pool<T: Real>(x: &[T], c: usize, n: usize, len: usize) -> Vec<T> {
    let inv = T::lit(1.0 / len as f64);
    let mut g = vec![T::zero(); n * c];
    for ch in 0..c {
        for e in 0..n {
            let s: T = x[ch * n * len + e * len..][..len].iter().copied().sum();
            g[e * c + ch] = s * inv;
        }
    }
    g
}

pub(crate) fn global_avg_pool_backward<T: Real>(dg: &[T], c: usize, n: usize, len: usize) -> Vec<T> {
    let inv = T::lit(1.0 / len as f64);
    let mut dx = vec![T::zero(); c * n * len];
    for ch in 0..c {
        for e in 0..n {
            let v = dg[e * c + ch] * inv;
            dx[ch * n * len + e * len..][..len].iter_mut().for_each(|d| *d = v);
        }
    }
    dx
}

/// `y[n×out] = x[n×in]·w[in×out] + b`.
pub(crate) fn dense_forward<T: Real>(x: &[T], n: usize, w: &[T], b: &[T]) -> Vec<T> {
    let out = b.len();
    let inp = w.len() / out;
    let mut y: Vec<T> = b.iter().copied().cycle().take(n * out).collect();
    gemm(false, false, n, out, inp, T::one(), x, inp, w, out, T::one(), &mut y, out);
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn dense_backward<T: Real>(dy: &[T], x: &[T], n: usize, w: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let out = dy.len() / n;
    let inp = w.len() / out;
    let mut dw = vec![T::zero(); inp * out];
    gemm(true, false, inp, out, n, T::one(), x, inp, dy, out, T::zero(), &mut dw, out);
    let mut db = vec![T::zero(); out];
    for row in dy.chunks(out) {
        db.iter_mut().zip(row).for_each(|(d, &g)| *d += g);
    }
    let mut dx = vec![T::zero(); n * inp];
    gemm(false, true, n, inp, out, T::one(), dy, out, w, out, T::zero(), &mut dx, inp);
    (dx, dw, db)
}
