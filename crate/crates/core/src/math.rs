//! Small dense-vector helpers shared by the numeric modules.

/// Dot product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `max + ln Σ exp(x - max)`; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log-softmax in place.
pub fn log_softmax_in_place(logits: &mut [f64]) {
    let lse = log_sum_exp(logits);
    for l in logits.iter_mut() {
        *l -= lse;
    }
}

/// `out += m · x` for a row-major `rows × cols` matrix.
#[inline]
pub fn gemv_add(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o += dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// `out += mᵀ · y` for a row-major `rows × cols` matrix.
#[inline]
pub fn gemv_t_add(m: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let yr = y[r];
        if yr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, w) in out.iter_mut().zip(row) {
            *o += yr * w;
        }
    }
}

/// `g += scale · y xᵀ` into a row-major `y.len() × x.len()` block.
#[inline]
pub fn outer_add(g: &mut [f64], y: &[f64], x: &[f64], scale: f64) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        let s = scale * yr;
        if s == 0.0 {
            continue;
        }
        for (gv, xv) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gv += s * xv;
        }
    }
}
