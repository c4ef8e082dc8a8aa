//! Central finite-difference gradient checker. Lives beside the engine but
//! evaluates the loss as a black box, so it stays independent of the
//! reverse-mode path it is used to verify.

#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares analytic gradients against (f(x+h) - f(x-h)) / 2h at the given
/// (group, coordinate) positions. `loss` must be a pure function of the
/// parameter groups.
pub fn finite_difference_check(
    params: &[Vec<f64>],
    analytic: &[Vec<f64>],
    h: f64,
    coords: &[(usize, usize)],
    mut loss: impl FnMut(&[Vec<f64>]) -> f64,
) -> FdReport {
    assert_eq!(params.len(), analytic.len());
    let mut work: Vec<Vec<f64>> = params.to_vec();
    let mut max_rel_err = 0.0f64;
    for &(g, i) in coords {
        let orig = work[g][i];
        work[g][i] = orig + h;
        let plus = loss(&work);
        work[g][i] = orig - h;
        let minus = loss(&work);
        work[g][i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic[g][i];
        let denom = a.abs().max(fd.abs()).max(1e-8);
        max_rel_err = max_rel_err.max((a - fd).abs() / denom);
    }
    FdReport {
        max_rel_err,
        checked: coords.len(),
    }
}
