//! Dense kernels on channel-major `(channels, length)` buffers.

/// `c = alpha · a · b + beta · c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    debug_assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the asserted extents keep every strided access inside the
    // slices, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Shape of a 1-D convolution with zero padding `(kernel − 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub len_in: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn len_out(&self) -> usize {
        (self.len_in + 2 * self.pad() - self.kernel) / self.stride + 1
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel
    }

    fn rows(&self) -> usize {
        self.c_in * self.kernel
    }
}

/// Column buffer `col[(ci·K + k), t] = x[ci, t·s + k − pad]`.
pub(crate) fn im2col(s: &ConvShape, x: &[f64]) -> Vec<f64> {
    let lo = s.len_out();
    let mut col = vec![0.0; s.rows() * lo];
    let pad = s.pad() as isize;
    for ci in 0..s.c_in {
        let xrow = &x[ci * s.len_in..(ci + 1) * s.len_in];
        for k in 0..s.kernel {
            let row = &mut col[(ci * s.kernel + k) * lo..(ci * s.kernel + k + 1) * lo];
            for (t, out) in row.iter_mut().enumerate() {
                let src = (t * s.stride) as isize + k as isize - pad;
                if src >= 0 && (src as usize) < s.len_in {
                    *out = xrow[src as usize];
                }
            }
        }
    }
    col
}

fn col2im_add(s: &ConvShape, col: &[f64], dx: &mut [f64]) {
    let lo = s.len_out();
    let pad = s.pad() as isize;
    for ci in 0..s.c_in {
        for k in 0..s.kernel {
            let row = &col[(ci * s.kernel + k) * lo..(ci * s.kernel + k + 1) * lo];
            for (t, &g) in row.iter().enumerate() {
                let dst = (t * s.stride) as isize + k as isize - pad;
                if dst >= 0 && (dst as usize) < s.len_in {
                    dx[ci * s.len_in + dst as usize] += g;
                }
            }
        }
    }
}

/// `y = W · col + b`; returns `(y, col)`.
pub(crate) fn conv_forward(s: &ConvShape, w: &[f64], b: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = s.len_out();
    let col = im2col(s, x);
    let mut y = vec![0.0; s.c_out * lo];
    for (co, row) in y.chunks_mut(lo).enumerate() {
        row.fill(b[co]);
    }
    gemm(
        s.c_out,
        s.rows(),
        lo,
        1.0,
        w,
        (s.rows(), 1),
        &col,
        (lo, 1),
        1.0,
        &mut y,
        (lo, 1),
    );
    (y, col)
}

/// Accumulates `dW`, `db` and (optionally) `dx` from `dy`.
pub(crate) fn conv_backward(
    s: &ConvShape,
    w: &[f64],
    col: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let lo = s.len_out();
    let rows = s.rows();
    for (co, row) in dy.chunks(lo).enumerate() {
        db[co] += row.iter().sum::<f64>();
    }
    gemm(
        s.c_out,
        lo,
        rows,
        1.0,
        dy,
        (lo, 1),
        col,
        (1, lo),
        1.0,
        dw,
        (rows, 1),
    );
    if let Some(dx) = dx {
        let mut dcol = vec![0.0; rows * lo];
        gemm(
            rows,
            s.c_out,
            lo,
            1.0,
            w,
            (1, rows),
            dy,
            (lo, 1),
            0.0,
            &mut dcol,
            (lo, 1),
        );
        col2im_add(s, &dcol, dx);
    }
}

/// Non-overlapping average pool by `factor` along the length axis.
pub(crate) fn avg_pool(x: &[f64], channels: usize, len: usize, factor: usize) -> Vec<f64> {
    let lo = len / factor;
    let inv = 1.0 / factor as f64;
    let mut y = vec![0.0; channels * lo];
    for c in 0..channels {
        for t in 0..lo {
            let base = c * len + t * factor;
            y[c * lo + t] = x[base..base + factor].iter().sum::<f64>() * inv;
        }
    }
    y
}

pub(crate) fn avg_pool_backward(
    dy: &[f64],
    channels: usize,
    len: usize,
    factor: usize,
    dx: &mut [f64],
) {
    let lo = len / factor;
    let inv = 1.0 / factor as f64;
    for c in 0..channels {
        for t in 0..lo {
            let g = dy[c * lo + t] * inv;
            for v in &mut dx[c * len + t * factor..c * len + (t + 1) * factor] {
                *v += g;
            }
        }
    }
}

pub(crate) fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Masks `dy` in place by `pre > 0`.
pub(crate) fn relu_backward(pre: &[f64], dy: &mut [f64]) {
    for (g, &p) in dy.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// `y = W x + b` with `W` row-major `(out, in)`.
pub(crate) fn dense_forward(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    gemm(
        b.len(),
        x.len(),
        1,
        1.0,
        w,
        (x.len(), 1),
        x,
        (1, 1),
        1.0,
        &mut y,
        (1, 1),
    );
    y
}

pub(crate) fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let (n_out, n_in) = (dy.len(), x.len());
    for (a, g) in db.iter_mut().zip(dy) {
        *a += g;
    }
    gemm(
        n_out,
        1,
        n_in,
        1.0,
        dy,
        (1, 1),
        x,
        (1, 1),
        1.0,
        dw,
        (n_in, 1),
    );
    if let Some(dx) = dx {
        gemm(
            n_in,
            n_out,
            1,
            1.0,
            w,
            (1, n_in),
            dy,
            (1, 1),
            1.0,
            dx,
            (1, 1),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(s: &ConvShape, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let lo = s.len_out();
        let mut y = vec![0.0; s.c_out * lo];
        for co in 0..s.c_out {
            for t in 0..lo {
                let mut acc = b[co];
                for ci in 0..s.c_in {
                    for k in 0..s.kernel {
                        let src = (t * s.stride + k) as isize - s.pad() as isize;
                        if src >= 0 && (src as usize) < s.len_in {
                            acc += w[(co * s.c_in + ci) * s.kernel + k]
                                * x[ci * s.len_in + src as usize];
                        }
                    }
                }
                y[co * lo + t] = acc;
            }
        }
        y
    }

    fn ramp(n: usize, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|i| ((i * 7919 % 113) as f64 / 113.0 - 0.5) * scale)
            .collect()
    }

    #[test]
    fn conv_matches_direct_sum() {
        for (kernel, stride) in [(7, 2), (3, 1), (1, 1)] {
            let s = ConvShape {
                c_in: 3,
                c_out: 5,
                kernel,
                stride,
                len_in: 20,
            };
            let w = ramp(s.weight_len(), 1.0);
            let b = ramp(5, 0.3);
            let x = ramp(60, 2.0);
            let (y, _) = conv_forward(&s, &w, &b, &x);
            let z = naive_conv(&s, &w, &b, &x);
            assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert_eq!(
            ConvShape {
                c_in: 3,
                c_out: 16,
                kernel: 7,
                stride: 2,
                len_in: 2048
            }
            .len_out(),
            1024
        );
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // ⟨dy, conv(x)⟩ derivatives against the direct form
        let s = ConvShape {
            c_in: 2,
            c_out: 3,
            kernel: 3,
            stride: 2,
            len_in: 9,
        };
        let w = ramp(s.weight_len(), 1.0);
        let b = vec![0.0; 3];
        let x = ramp(18, 1.0);
        let dy = ramp(3 * s.len_out(), 1.5);
        let (_, col) = conv_forward(&s, &w, &b, &x);
        let (mut dw, mut db, mut dx) = (vec![0.0; w.len()], vec![0.0; 3], vec![0.0; x.len()]);
        conv_backward(&s, &w, &col, &dy, &mut dw, &mut db, Some(&mut dx));
        let dot = |y: &[f64]| y.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let fd = (dot(&naive_conv(&s, &w, &b, &xp)) - dot(&naive_conv(&s, &w, &b, &x))) / h;
            assert!((fd - dx[i]).abs() < 1e-6);
        }
        for i in 0..w.len() {
            let mut wp = w.clone();
            wp[i] += h;
            let fd = (dot(&naive_conv(&s, &wp, &b, &x)) - dot(&naive_conv(&s, &w, &b, &x))) / h;
            assert!((fd - dw[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn pooling_and_dense() {
        let x = vec![1.0, 3.0, 5.0, 7.0, 2.0, 2.0, 0.0, 4.0];
        assert_eq!(avg_pool(&x, 2, 4, 2), vec![2.0, 6.0, 2.0, 2.0]);
        let mut dx = vec![0.0; 8];
        avg_pool_backward(&[1.0, 2.0, 3.0, 4.0], 2, 4, 2, &mut dx);
        assert_eq!(dx, vec![0.5, 0.5, 1.0, 1.0, 1.5, 1.5, 2.0, 2.0]);

        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = dense_forward(&w, &[0.5, -0.5], &[1.0, 0.0, -1.0]);
        assert_eq!(y, vec![-1.5, -2.5]);
        let (mut dw, mut db, mut dxx) = (vec![0.0; 6], vec![0.0; 2], vec![0.0; 3]);
        dense_backward(
            &w,
            &[1.0, 0.0, -1.0],
            &[1.0, 2.0],
            &mut dw,
            &mut db,
            Some(&mut dxx),
        );
        assert_eq!(dw, vec![1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
        assert_eq!(db, vec![1.0, 2.0]);
        assert_eq!(dxx, vec![9.0, 12.0, 15.0]);
    }
}
