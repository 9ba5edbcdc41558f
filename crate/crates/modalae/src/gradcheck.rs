//! Central-difference gradients over a [`ParamSet`], the numerical oracle the
//! analytic backward passes are checked against.

use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Central finite differences (L(θ+εe) − L(θ−εe)) / 2ε per coordinate.
///
/// The loss must be deterministic. A non-finite loss evaluation fails with a
/// numeric error naming the perturbed coordinate.
pub fn finite_diff_grad<F>(loss: F, params: &ParamSet, eps: f64) -> Result<ParamSet>
where
    F: Fn(&ParamSet) -> f64,
{
    assert!(eps > 0.0, "eps must be positive");
    let (d, m) = params.dims();
    let mut grad = ParamSet::zeros(d, m);
    let mut probe = params.clone();
    for i in 0..params.n_coords() {
        let orig = probe.coord(i);
        *probe.coord_mut(i) = orig + eps;
        let plus = loss(&probe);
        *probe.coord_mut(i) = orig - eps;
        let minus = loss(&probe);
        *probe.coord_mut(i) = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss while perturbing {}",
                params.coord_name(i)
            )));
        }
        *grad.coord_mut(i) = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Relative error between two gradients: ‖a−b‖ / max(‖a‖, ‖b‖, 1e−12).
pub fn grad_relative_error(a: &ParamSet, b: &ParamSet) -> f64 {
    let n = a.n_coords();
    assert_eq!(n, b.n_coords(), "gradient shapes differ");
    let mut diff_sq = 0.0;
    for i in 0..n {
        let d = a.coord(i) - b.coord(i);
        diff_sq += d * d;
    }
    diff_sq.sqrt() / a.norm().max(b.norm()).max(1e-12)
}
