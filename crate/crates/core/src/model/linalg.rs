//! Row-major dense kernels. Weight matrices are stored `[out, in]`.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += W x` for `W: [rows, cols]`.
pub fn matvec_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ y` for `W: [rows, cols]`.
pub fn matvec_t_acc(w: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (yi, row) in y.iter().zip(w.chunks_exact(cols)) {
        if *yi != 0.0 {
            for (o, wv) in out.iter_mut().zip(row) {
                *o += yi * wv;
            }
        }
    }
}

/// `W += y xᵀ`.
pub fn outer_acc(w: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (yi, row) in y.iter().zip(w.chunks_exact_mut(cols)) {
        if *yi != 0.0 {
            for (wv, xv) in row.iter_mut().zip(x) {
                *wv += yi * xv;
            }
        }
    }
}

/// `X Wᵀ + b` for `X: [n, k]`, `W: [m, k]`; returns `[n, m]`.
pub fn linear(x: &[f64], k: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut out = Vec::with_capacity(x.len() / k * m);
    for row in x.chunks_exact(k) {
        for (wr, bj) in w.chunks_exact(k).zip(b) {
            out.push(dot(row, wr) + bj);
        }
    }
    out
}

/// Backward of [`linear`]: accumulates `dW += dYᵀ X`, `db += Σ dY` and
/// returns `dX = dY W`.
pub fn linear_backward(
    x: &[f64],
    k: usize,
    w: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let m = db.len();
    let mut dx = vec![0.0; x.len()];
    for ((xr, dyr), dxr) in x.chunks_exact(k).zip(dy.chunks_exact(m)).zip(dx.chunks_exact_mut(k)) {
        for (j, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[j] += g;
            let wr = &w[j * k..(j + 1) * k];
            let dwr = &mut dw[j * k..(j + 1) * k];
            for t in 0..k {
                dwr[t] += g * xr[t];
                dxr[t] += g * wr[t];
            }
        }
    }
    dx
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
