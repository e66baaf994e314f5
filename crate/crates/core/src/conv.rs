//! 2D convolution (cross-correlation) and the adaptive-blurring mixture
//! primitive, with reverse-mode gradients.
//!
//! Inner loops run over contiguous row slices so the stride-1 paths
//! autovectorize; that is what makes CPU training viable.

use alloc::vec;
use alloc::vec::Vec;

use crate::gauss::KernelBank;
use crate::tensor::{op_node, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Reflect,
}

/// Per-axis padding applied symmetrically to both spatial axes.
/// Even kernels need `before + 1 == after` to preserve the spatial size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Padding {
    pub mode: PadMode,
    pub before: usize,
    pub after: usize,
}

impl Padding {
    pub fn none() -> Padding {
        Padding { mode: PadMode::Zero, before: 0, after: 0 }
    }

    pub fn symmetric(mode: PadMode, width: usize) -> Padding {
        Padding { mode, before: width, after: width }
    }

    /// Size-preserving padding for a stride-1 kernel of side `k`:
    /// `(k-1)/2` before and the remainder after.
    pub fn for_kernel(mode: PadMode, k: usize) -> Padding {
        let before = (k - 1) / 2;
        Padding { mode, before, after: k - 1 - before }
    }
}

/// Reflection without repeating the edge sample (period 2n-2).
#[inline]
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Maps padded indices to source indices; `None` marks zero padding.
fn axis_map(n: usize, pad: &Padding) -> Vec<Option<usize>> {
    let padded = n + pad.before + pad.after;
    (0..padded)
        .map(|i| {
            let src = i as isize - pad.before as isize;
            match pad.mode {
                PadMode::Zero => {
                    if src < 0 || src >= n as isize {
                        None
                    } else {
                        Some(src as usize)
                    }
                }
                PadMode::Reflect => Some(reflect_index(src, n)),
            }
        })
        .collect()
}

/// Copies one H x W plane into an (H+pads) x (W+pads) buffer. The interior
/// span of every row is a straight memcpy; only the pad borders go through
/// the index maps.
fn pad_plane(
    src: &[f64],
    w: usize,
    before: usize,
    map_y: &[Option<usize>],
    map_x: &[Option<usize>],
    dst: &mut [f64],
) {
    let wp = map_x.len();
    for (py, my) in map_y.iter().enumerate() {
        let drow = &mut dst[py * wp..(py + 1) * wp];
        match my {
            None => drow.fill(0.0),
            Some(sy) => {
                let srow = &src[sy * w..sy * w + w];
                // Interior span [before, before + w) is a straight copy;
                // only the borders go through the index map.
                for (d, m) in drow[..before].iter_mut().zip(map_x[..before].iter()) {
                    *d = match m {
                        None => 0.0,
                        Some(sx) => srow[*sx],
                    };
                }
                drow[before..before + w].copy_from_slice(srow);
                for (d, m) in drow[before + w..].iter_mut().zip(map_x[before + w..].iter()) {
                    *d = match m {
                        None => 0.0,
                        Some(sx) => srow[*sx],
                    };
                }
            }
        }
    }
}

/// Scatters a padded-plane gradient back onto the source plane.
fn unpad_accumulate(
    gpad: &[f64],
    w: usize,
    before: usize,
    map_y: &[Option<usize>],
    map_x: &[Option<usize>],
    dst: &mut [f64],
) {
    let wp = map_x.len();
    for (py, my) in map_y.iter().enumerate() {
        let Some(sy) = my else { continue };
        let grow = &gpad[py * wp..(py + 1) * wp];
        let drow = &mut dst[sy * w..sy * w + w];
        for (gv, m) in grow[..before].iter().zip(map_x[..before].iter()) {
            if let Some(sx) = m {
                drow[*sx] += gv;
            }
        }
        for (d, gv) in drow.iter_mut().zip(grow[before..before + w].iter()) {
            *d += gv;
        }
        for (gv, m) in grow[before + w..].iter().zip(map_x[before + w..].iter()) {
            if let Some(sx) = m {
                drow[*sx] += gv;
            }
        }
    }
}

/// Dot product with four independent accumulators; the partial sums hide
/// floating-point add latency and the fixed order keeps results
/// deterministic.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let ta = ca.remainder();
    let tb = cb.remainder();
    for (qa, qb) in ca.zip(cb) {
        acc[0] += qa[0] * qb[0];
        acc[1] += qa[1] * qb[1];
        acc[2] += qa[2] * qb[2];
        acc[3] += qa[3] * qb[3];
    }
    let mut tail = 0.0;
    for (x, y) in ta.iter().zip(tb.iter()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// dst += k0*src + k1*src[1..] + k2*src[2..], bounds-check free.
#[inline]
fn tap3(dst: &mut [f64], src: &[f64], k0: f64, k1: f64, k2: f64) {
    let n = dst.len();
    let s0 = &src[..n];
    let s1 = &src[1..1 + n];
    let s2 = &src[2..2 + n];
    for (((d, &a), &b), &c) in dst.iter_mut().zip(s0).zip(s1).zip(s2) {
        *d += k0 * a + k1 * b + k2 * c;
    }
}

/// Full 3x3 window in one pass over the output row.
#[inline]
fn tap3x3(dst: &mut [f64], r0: &[f64], r1: &[f64], r2: &[f64], k: &[f64]) {
    let n = dst.len();
    let (a0, a1, a2) = (&r0[..n], &r0[1..1 + n], &r0[2..2 + n]);
    let (b0, b1, b2) = (&r1[..n], &r1[1..1 + n], &r1[2..2 + n]);
    let (c0, c1, c2) = (&r2[..n], &r2[1..1 + n], &r2[2..2 + n]);
    for (i, d) in dst.iter_mut().enumerate() {
        *d += k[0] * a0[i] + k[1] * a1[i] + k[2] * a2[i]
            + k[3] * b0[i] + k[4] * b1[i] + k[5] * b2[i]
            + k[6] * c0[i] + k[7] * c1[i] + k[8] * c2[i];
    }
}

/// out += padded correlated with the kernel window, row-at-a-time over
/// contiguous slices. The 3-wide case (the encoder/decoder kernels) and the
/// wide case (the bank kernels) get shapes the vectorizer handles well.
fn corr_accumulate(
    padded: &[f64],
    wp: usize,
    kernel: &[f64],
    kh: usize,
    kw: usize,
    stride: usize,
    out: &mut [f64],
    oh: usize,
    ow: usize,
) {
    if stride == 1 {
        if kh == 3 && kw == 3 {
            for oy in 0..oh {
                tap3x3(
                    &mut out[oy * ow..(oy + 1) * ow],
                    &padded[oy * wp..oy * wp + ow + 2],
                    &padded[(oy + 1) * wp..(oy + 1) * wp + ow + 2],
                    &padded[(oy + 2) * wp..(oy + 2) * wp + ow + 2],
                    kernel,
                );
            }
            return;
        }
        for ky in 0..kh {
            let krow = &kernel[ky * kw..(ky + 1) * kw];
            if kw == 3 {
                for oy in 0..oh {
                    let base = (oy + ky) * wp;
                    tap3(
                        &mut out[oy * ow..(oy + 1) * ow],
                        &padded[base..base + ow + 2],
                        krow[0],
                        krow[1],
                        krow[2],
                    );
                }
            } else {
                for oy in 0..oh {
                    let base = (oy + ky) * wp;
                    let src = &padded[base..base + ow + kw - 1];
                    let dst = &mut out[oy * ow..(oy + 1) * ow];
                    for (i, d) in dst.iter_mut().enumerate() {
                        *d += dot(krow, &src[i..i + kw]);
                    }
                }
            }
        }
    } else {
        for ky in 0..kh {
            for kx in 0..kw {
                let kv = kernel[ky * kw + kx];
                if kv == 0.0 {
                    continue;
                }
                for oy in 0..oh {
                    let row = (oy * stride + ky) * wp + kx;
                    let dst = &mut out[oy * ow..(oy + 1) * ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        *d += kv * padded[row + ox * stride];
                    }
                }
            }
        }
    }
}

/// dkernel[tap] += <g, padded window at tap> for every kernel tap.
fn corr_weight_grad(
    padded: &[f64],
    wp: usize,
    g: &[f64],
    oh: usize,
    ow: usize,
    stride: usize,
    dkernel: &mut [f64],
    kh: usize,
    kw: usize,
) {
    for ky in 0..kh {
        for kx in 0..kw {
            let mut acc = 0.0;
            if stride == 1 {
                for oy in 0..oh {
                    let src = &padded[(oy + ky) * wp + kx..(oy + ky) * wp + kx + ow];
                    let grow = &g[oy * ow..(oy + 1) * ow];
                    acc += dot(grow, src);
                }
            } else {
                for oy in 0..oh {
                    let row = (oy * stride + ky) * wp + kx;
                    let grow = &g[oy * ow..(oy + 1) * ow];
                    for (ox, gv) in grow.iter().enumerate() {
                        acc += gv * padded[row + ox * stride];
                    }
                }
            }
            dkernel[ky * kw + kx] += acc;
        }
    }
}

/// gpad += kernel scattered by g (adjoint of `corr_accumulate`). The
/// stride-1 path is rewritten as a gather: padded position p collects
/// `sum_kx k[kx] * g[p - kx]`, a correlation with the reversed kernel row.
fn corr_input_grad(
    g: &[f64],
    oh: usize,
    ow: usize,
    kernel: &[f64],
    kh: usize,
    kw: usize,
    stride: usize,
    gpad: &mut [f64],
    wp: usize,
) {
    if stride == 1 {
        let mut rev = vec![0.0; kw];
        let full_lo = kw - 1;
        let full_hi = ow;
        for ky in 0..kh {
            let krow = &kernel[ky * kw..(ky + 1) * kw];
            for (i, r) in rev.iter_mut().enumerate() {
                *r = krow[kw - 1 - i];
            }
            for oy in 0..oh {
                let grow = &g[oy * ow..(oy + 1) * ow];
                let base = (oy + ky) * wp;
                let dst = &mut gpad[base..base + ow + kw - 1];
                for (p, d) in dst.iter_mut().enumerate().take(full_lo) {
                    let kx_lo = (p + 1).saturating_sub(ow);
                    let mut acc = 0.0;
                    for kx in kx_lo..=p {
                        acc += krow[kx] * grow[p - kx];
                    }
                    *d += acc;
                }
                if full_hi > full_lo {
                    if kw == 3 {
                        tap3(&mut dst[full_lo..full_hi], grow, rev[0], rev[1], rev[2]);
                    } else {
                        for p in full_lo..full_hi {
                            dst[p] += dot(&rev, &grow[p + 1 - kw..p + 1]);
                        }
                    }
                }
                for (p, d) in dst.iter_mut().enumerate().skip(full_hi.max(full_lo)) {
                    let kx_lo = p + 1 - ow;
                    let mut acc = 0.0;
                    for kx in kx_lo..kw.min(p + 1) {
                        acc += krow[kx] * grow[p - kx];
                    }
                    *d += acc;
                }
            }
        }
        return;
    }
    for ky in 0..kh {
        for kx in 0..kw {
            let kv = kernel[ky * kw + kx];
            if kv == 0.0 {
                continue;
            }
            for oy in 0..oh {
                let row = (oy * stride + ky) * wp + kx;
                let grow = &g[oy * ow..(oy + 1) * ow];
                for (ox, gv) in grow.iter().enumerate() {
                    gpad[row + ox * stride] += kv * gv;
                }
            }
        }
    }
}

struct ConvDims {
    n: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    hp: usize,
    wp: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: &Padding,
) -> Result<ConvDims, TensorError> {
    if stride == 0 {
        return Err(TensorError::ZeroStride);
    }
    let ishape = input.shape();
    if ishape.len() != 4 {
        return Err(TensorError::NotBatched(ishape.to_vec()));
    }
    let wshape = weight.shape();
    if wshape.len() != 4 {
        return Err(TensorError::BadWeightShape(wshape.to_vec()));
    }
    let (n, c_in, h, w) = (ishape[0], ishape[1], ishape[2], ishape[3]);
    let (c_out, wc, kh, kw) = (wshape[0], wshape[1], wshape[2], wshape[3]);
    if wc != c_in {
        return Err(TensorError::ChannelMismatch { input: c_in, weight: wc });
    }
    if bias.shape() != [c_out] {
        return Err(TensorError::BadBiasShape { expected: c_out, got: bias.numel() });
    }
    let hp = h + pad.before + pad.after;
    let wp = w + pad.before + pad.after;
    if hp < kh || wp < kw {
        return Err(TensorError::InputTooSmall { padded: (hp, wp), kernel: (kh, kw) });
    }
    let oh = (hp - kh) / stride + 1;
    let ow = (wp - kw) / stride + 1;
    Ok(ConvDims { n, c_in, h, w, c_out, kh, kw, hp, wp, oh, ow })
}

/// Batched 2D cross-correlation with bias.
///
/// `input` is [N, C, H, W], `weight` [C_out, C, kh, kw], `bias` [C_out];
/// the output extent per axis is `(padded - k) / stride + 1`. Differentiable
/// with respect to input, weight and bias.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: Padding,
) -> Result<Tensor, TensorError> {
    let d = conv_dims(input, weight, bias, stride, &pad)?;
    let map_y = axis_map(d.h, &pad);
    let map_x = axis_map(d.w, &pad);

    let x = input.data();
    let wt = weight.data();
    let b = bias.data();
    let mut out = vec![0.0; d.n * d.c_out * d.oh * d.ow];
    let mut padded = vec![0.0; d.c_in * d.hp * d.wp];
    let plane_in = d.h * d.w;
    let plane_pad = d.hp * d.wp;
    let plane_out = d.oh * d.ow;
    let ksize = d.kh * d.kw;
    for n in 0..d.n {
        for c in 0..d.c_in {
            pad_plane(
                &x[(n * d.c_in + c) * plane_in..(n * d.c_in + c + 1) * plane_in],
                d.w,
                pad.before,
                &map_y,
                &map_x,
                &mut padded[c * plane_pad..(c + 1) * plane_pad],
            );
        }
        for o in 0..d.c_out {
            let oplane = &mut out[(n * d.c_out + o) * plane_out..(n * d.c_out + o + 1) * plane_out];
            oplane.fill(b[o]);
            for c in 0..d.c_in {
                corr_accumulate(
                    &padded[c * plane_pad..(c + 1) * plane_pad],
                    d.wp,
                    &wt[(o * d.c_in + c) * ksize..(o * d.c_in + c + 1) * ksize],
                    d.kh,
                    d.kw,
                    stride,
                    oplane,
                    d.oh,
                    d.ow,
                );
            }
        }
    }
    drop(x);
    drop(wt);
    drop(b);

    let shape = vec![d.n, d.c_out, d.oh, d.ow];
    let parents = vec![input.clone(), weight.clone(), bias.clone()];
    Ok(op_node(
        shape,
        out,
        parents,
        alloc::boxed::Box::new(move |g, parents| {
            conv2d_backward(g, parents, stride, pad);
        }),
    ))
}

fn conv2d_backward(g: &[f64], parents: &[Tensor], stride: usize, pad: Padding) {
    let input = &parents[0];
    let weight = &parents[1];
    let bias = &parents[2];
    let d = conv_dims(input, weight, bias, stride, &pad).expect("shapes validated in forward");
    let map_y = axis_map(d.h, &pad);
    let map_x = axis_map(d.w, &pad);
    let plane_in = d.h * d.w;
    let plane_pad = d.hp * d.wp;
    let plane_out = d.oh * d.ow;
    let ksize = d.kh * d.kw;

    if bias.requires_grad() {
        let mut db = vec![0.0; d.c_out];
        for n in 0..d.n {
            for (o, dbo) in db.iter_mut().enumerate() {
                let gplane = &g[(n * d.c_out + o) * plane_out..(n * d.c_out + o + 1) * plane_out];
                *dbo += gplane.iter().sum::<f64>();
            }
        }
        crate::tensor::accumulate_pending(bias, &db);
    }

    let need_weight = weight.requires_grad();
    let need_input = input.requires_grad();
    if !need_weight && !need_input {
        return;
    }

    let x = input.data();
    let wt = weight.data();
    let mut dw = if need_weight { vec![0.0; weight.numel()] } else { Vec::new() };
    let mut dx = if need_input { vec![0.0; input.numel()] } else { Vec::new() };
    let mut padded = vec![0.0; d.c_in * plane_pad];
    let mut gpad = vec![0.0; d.c_in * plane_pad];
    for n in 0..d.n {
        if need_weight {
            for c in 0..d.c_in {
                pad_plane(
                    &x[(n * d.c_in + c) * plane_in..(n * d.c_in + c + 1) * plane_in],
                    d.w,
                    pad.before,
                    &map_y,
                    &map_x,
                    &mut padded[c * plane_pad..(c + 1) * plane_pad],
                );
            }
        }
        if need_input {
            gpad.fill(0.0);
        }
        for o in 0..d.c_out {
            let gplane = &g[(n * d.c_out + o) * plane_out..(n * d.c_out + o + 1) * plane_out];
            for c in 0..d.c_in {
                if need_weight {
                    corr_weight_grad(
                        &padded[c * plane_pad..(c + 1) * plane_pad],
                        d.wp,
                        gplane,
                        d.oh,
                        d.ow,
                        stride,
                        &mut dw[(o * d.c_in + c) * ksize..(o * d.c_in + c + 1) * ksize],
                        d.kh,
                        d.kw,
                    );
                }
                if need_input {
                    corr_input_grad(
                        gplane,
                        d.oh,
                        d.ow,
                        &wt[(o * d.c_in + c) * ksize..(o * d.c_in + c + 1) * ksize],
                        d.kh,
                        d.kw,
                        stride,
                        &mut gpad[c * plane_pad..(c + 1) * plane_pad],
                        d.wp,
                    );
                }
            }
        }
        if need_input {
            for c in 0..d.c_in {
                unpad_accumulate(
                    &gpad[c * plane_pad..(c + 1) * plane_pad],
                    d.w,
                    pad.before,
                    &map_y,
                    &map_x,
                    &mut dx[(n * d.c_in + c) * plane_in..(n * d.c_in + c + 1) * plane_in],
                );
            }
        }
    }
    drop(x);
    drop(wt);
    if need_weight {
        crate::tensor::accumulate_pending(weight, &dw);
    }
    if need_input {
        crate::tensor::accumulate_pending(input, &dx);
    }
}

/// Channel-wise blurring with a learned mixture over the fixed kernel bank.
///
/// For each channel c: `out_c = sum_k weights[c, k] * (feat_c corr kernel_k)`
/// with reflect padding and the spatial size preserved. Gradients flow to
/// `feat` and `weights` only; the bank stays fixed.
pub fn abl_mix(feat: &Tensor, weights: &Tensor, bank: &KernelBank) -> Result<Tensor, TensorError> {
    let fshape = feat.shape();
    if fshape.len() != 4 {
        return Err(TensorError::NotBatched(fshape.to_vec()));
    }
    let wshape = weights.shape();
    if wshape.len() != 2 {
        return Err(TensorError::NotMatrix(wshape.to_vec()));
    }
    let (n, c, h, w) = (fshape[0], fshape[1], fshape[2], fshape[3]);
    if wshape[0] != c {
        return Err(TensorError::ChannelMismatch { input: c, weight: wshape[0] });
    }
    let k = wshape[1];
    if k != bank.len() {
        return Err(TensorError::BankMismatch { weights: k, kernels: bank.len() });
    }
    let ks = bank.size();
    let pad = Padding::for_kernel(PadMode::Reflect, ks);
    let hp = h + pad.before + pad.after;
    let wp = w + pad.before + pad.after;
    if hp < ks || wp < ks {
        return Err(TensorError::InputTooSmall { padded: (hp, wp), kernel: (ks, ks) });
    }
    let map_y = axis_map(h, &pad);
    let map_x = axis_map(w, &pad);

    // Mixing the kernels first is algebraically identical to mixing the
    // per-kernel convolutions and K times cheaper.
    let wv = weights.data();
    let eff = effective_kernels(&wv, c, k, bank);
    drop(wv);

    let x = feat.data();
    let plane = h * w;
    let plane_pad = hp * wp;
    let mut out = vec![0.0; n * c * plane];
    let mut padded = vec![0.0; plane_pad];
    for ni in 0..n {
        for ci in 0..c {
            let src = &x[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            pad_plane(src, w, pad.before, &map_y, &map_x, &mut padded);
            corr_accumulate(
                &padded,
                wp,
                &eff[ci * ks * ks..(ci + 1) * ks * ks],
                ks,
                ks,
                1,
                &mut out[(ni * c + ci) * plane..(ni * c + ci + 1) * plane],
                h,
                w,
            );
        }
    }
    drop(x);

    let bank_copy = bank.clone();
    Ok(op_node(
        fshape.to_vec(),
        out,
        vec![feat.clone(), weights.clone()],
        alloc::boxed::Box::new(move |g, parents| {
            abl_backward(g, parents, &bank_copy);
        }),
    ))
}

fn effective_kernels(weights: &[f64], c: usize, k: usize, bank: &KernelBank) -> Vec<f64> {
    let ks = bank.size();
    let mut eff = vec![0.0; c * ks * ks];
    for ci in 0..c {
        let dst = &mut eff[ci * ks * ks..(ci + 1) * ks * ks];
        for ki in 0..k {
            let wv = weights[ci * k + ki];
            for (d, s) in dst.iter_mut().zip(bank.kernel(ki).grid().iter()) {
                *d += wv * s;
            }
        }
    }
    eff
}

fn abl_backward(g: &[f64], parents: &[Tensor], bank: &KernelBank) {
    let feat = &parents[0];
    let weights = &parents[1];
    let fshape = feat.shape();
    let (n, c, h, w) = (fshape[0], fshape[1], fshape[2], fshape[3]);
    let k = weights.shape()[1];
    let ks = bank.size();
    let pad = Padding::for_kernel(PadMode::Reflect, ks);
    let hp = h + pad.before + pad.after;
    let wp = w + pad.before + pad.after;
    let map_y = axis_map(h, &pad);
    let map_x = axis_map(w, &pad);
    let plane = h * w;
    let plane_pad = hp * wp;

    let need_feat = feat.requires_grad();
    let need_weights = weights.requires_grad();

    let x = feat.data();
    let wv = weights.data();
    let eff = if need_feat { effective_kernels(&wv, c, k, bank) } else { Vec::new() };
    drop(wv);

    // d(effective kernel): one ks x ks gradient per channel, projected onto
    // the bank to produce the mixture-weight gradient.
    let mut deff = if need_weights { vec![0.0; c * ks * ks] } else { Vec::new() };
    let mut dx = if need_feat { vec![0.0; feat.numel()] } else { Vec::new() };
    let mut padded = vec![0.0; plane_pad];
    let mut gpad = vec![0.0; plane_pad];
    for ni in 0..n {
        for ci in 0..c {
            let gplane = &g[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            if need_weights {
                let src = &x[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                pad_plane(src, w, pad.before, &map_y, &map_x, &mut padded);
                corr_weight_grad(
                    &padded,
                    wp,
                    gplane,
                    h,
                    w,
                    1,
                    &mut deff[ci * ks * ks..(ci + 1) * ks * ks],
                    ks,
                    ks,
                );
            }
            if need_feat {
                gpad.fill(0.0);
                corr_input_grad(
                    gplane,
                    h,
                    w,
                    &eff[ci * ks * ks..(ci + 1) * ks * ks],
                    ks,
                    ks,
                    1,
                    &mut gpad,
                    wp,
                );
                unpad_accumulate(
                    &gpad,
                    w,
                    pad.before,
                    &map_y,
                    &map_x,
                    &mut dx[(ni * c + ci) * plane..(ni * c + ci + 1) * plane],
                );
            }
        }
    }
    drop(x);

    if need_weights {
        let mut dw = vec![0.0; c * k];
        for ci in 0..c {
            let de = &deff[ci * ks * ks..(ci + 1) * ks * ks];
            for ki in 0..k {
                let mut acc = 0.0;
                for (dv, kv) in de.iter().zip(bank.kernel(ki).grid().iter()) {
                    acc += dv * kv;
                }
                dw[ci * k + ki] = acc;
            }
        }
        crate::tensor::accumulate_pending(weights, &dw);
    }
    if need_feat {
        crate::tensor::accumulate_pending(feat, &dx);
    }
}
