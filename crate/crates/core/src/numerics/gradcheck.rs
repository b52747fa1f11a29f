use super::{NumericsError, ParamGrads, ParameterSet, Result};

/// Central finite-difference verification of tape gradients.
///
/// Perturbs every parameter entry by plus/minus `epsilon`, re-evaluates the
/// loss through `loss_fn` (which must be a deterministic function of the
/// parameters), and compares `(L+ - L-) / 2eps` against `analytic`. Returns
/// the maximum relative error
/// `|g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8)` over all entries.
pub fn grad_check<F>(
    params: &ParameterSet,
    mut loss_fn: F,
    analytic: &ParamGrads,
    epsilon: f64,
) -> Result<f64>
where
    F: FnMut(&ParameterSet) -> f64,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(NumericsError::BadEpsilon(epsilon));
    }
    let mut work = params.clone();
    let mut max_rel = 0.0_f64;
    for (id, _, tensor) in params.iter() {
        for r in 0..tensor.rows() {
            for c in 0..tensor.cols() {
                let orig = tensor.get(r, c);
                work.get_mut(id).set(r, c, orig + epsilon);
                let l_plus = loss_fn(&work);
                work.get_mut(id).set(r, c, orig - epsilon);
                let l_minus = loss_fn(&work);
                work.get_mut(id).set(r, c, orig);
                let g_fd = (l_plus - l_minus) / (2.0 * epsilon);
                let g_ad = analytic.get(id).get(r, c);
                if !g_fd.is_finite() {
                    return Err(NumericsError::NonFinite("finite-difference loss"));
                }
                let rel = (g_ad - g_fd).abs() / g_ad.abs().max(g_fd.abs()).max(1e-8);
                max_rel = max_rel.max(rel);
            }
        }
    }
    Ok(max_rel)
}
