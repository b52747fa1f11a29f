use super::{Matrix, NumericsError, Result};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic function. Errors on non-finite input.
pub fn sigmoid(v: &[f64]) -> Result<Vec<f64>> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(NumericsError::NonFinite("sigmoid input"));
    }
    Ok(v.iter().map(|&x| sigmoid_scalar(x)).collect())
}

/// `W x (+ U h) + b` for a single vector. `U` and `h` come as a pair or not
/// at all. Errors on any shape mismatch or a non-finite result.
pub fn affine(
    w: &Matrix,
    x: &[f64],
    uh: Option<(&Matrix, &[f64])>,
    b: &[f64],
) -> Result<Vec<f64>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(NumericsError::ShapeMismatch {
            op: "affine",
            lhs: format!("W {}x{}", w.rows(), w.cols()),
            rhs: format!("x len {}, b len {}", x.len(), b.len()),
        });
    }
    if let Some((u, h)) = uh {
        if u.cols() != h.len() || u.rows() != w.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "affine",
                lhs: format!("U {}x{}", u.rows(), u.cols()),
                rhs: format!("h len {}, W rows {}", h.len(), w.rows()),
            });
        }
    }
    let mut out = vec![0.0; w.rows()];
    affine_row_into(&mut out, w, x, uh, b);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(NumericsError::NonFinite("affine output"));
    }
    Ok(out)
}

/// Mean of `(prediction - target)^2` over entries where `mask` is 1.
/// An all-zero mask yields 0.
pub fn mse_loss(prediction: &[f64], target: &[f64], mask: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() || prediction.len() != mask.len() {
        return Err(NumericsError::ShapeMismatch {
            op: "mse_loss",
            lhs: format!("prediction len {}", prediction.len()),
            rhs: format!("target len {}, mask len {}", target.len(), mask.len()),
        });
    }
    let count: f64 = mask.iter().sum();
    if count == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = prediction
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((p, t), m)| m * (p - t) * (p - t))
        .sum();
    let loss = sum / count;
    if !loss.is_finite() {
        return Err(NumericsError::NonFinite("mse_loss"));
    }
    Ok(loss)
}

// ---- shared kernels ------------------------------------------------------
//
// Both the untaped evaluation path and the tape's eager forward pass go
// through these, so the two paths produce bit-identical values.

/// Dot product with a fixed 4-way accumulation order (deterministic, and
/// breaks the sequential add dependency so the loop pipelines).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let (mut s0, mut s1, mut s2, mut s3) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        s0 += pa[0] * pb[0];
        s1 += pa[1] * pb[1];
        s2 += pa[2] * pb[2];
        s3 += pa[3] * pb[3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

/// `y += a * x`.
#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One output row of an affine transform: `out[j] = b[j] + w[j]·x (+ u[j]·h)`.
#[inline]
pub(crate) fn affine_row_into(
    out: &mut [f64],
    w: &Matrix,
    x: &[f64],
    uh: Option<(&Matrix, &[f64])>,
    b: &[f64],
) {
    match uh {
        None => {
            for (j, o) in out.iter_mut().enumerate() {
                *o = b[j] + dot(w.row(j), x);
            }
        }
        Some((u, h)) => {
            for (j, o) in out.iter_mut().enumerate() {
                *o = b[j] + dot(w.row(j), x) + dot(u.row(j), h);
            }
        }
    }
}

/// Batch affine: `out[r] = b + W x[r] (+ U h[r])` row by row.
#[inline]
pub(crate) fn affine_batch_into(
    out: &mut Matrix,
    w: &Matrix,
    x: &Matrix,
    uh: Option<(&Matrix, &Matrix)>,
    b: &[f64],
) {
    for r in 0..x.rows() {
        let uh_row = uh.map(|(u, h)| (u, h.row(r)));
        // Split-borrow: output row r does not alias the read-only inputs.
        let out_row =
            &mut out.as_mut_slice()[r * w.rows()..(r + 1) * w.rows()];
        affine_row_into(out_row, w, x.row(r), uh_row, b);
    }
}
