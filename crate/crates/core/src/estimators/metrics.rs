//! Normalized mean square error.

use crate::error::{dim_err, OtfsError, Result};
use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;

fn ratio<'a>(hat: impl Iterator<Item = &'a Complex64>, truth: impl Iterator<Item = &'a Complex64>) -> Result<f64> {
    let (mut err, mut energy) = (0.0, 0.0);
    for (a, b) in hat.zip(truth) {
        err += (a - b).norm_sqr();
        energy += b.norm_sqr();
    }
    if energy == 0.0 {
        return Err(OtfsError::Undefined("true channel has zero energy".into()));
    }
    Ok(err / energy)
}

/// `‖Ĥ - H‖² / ‖H‖²` for one delay-Doppler matrix.
pub fn nmse_dd(hat: &Array2<Complex64>, truth: &Array2<Complex64>) -> Result<f64> {
    if hat.dim() != truth.dim() {
        return Err(dim_err(format!("estimate is {:?}, truth is {:?}", hat.dim(), truth.dim())));
    }
    ratio(hat.iter(), truth.iter())
}

/// `‖Ĥ - H‖_F² / ‖H‖_F²` over a whole tensor.
pub fn nmse_dda(hat: &Array3<Complex64>, truth: &Array3<Complex64>) -> Result<f64> {
    if hat.dim() != truth.dim() {
        return Err(dim_err(format!("estimate is {:?}, truth is {:?}", hat.dim(), truth.dim())));
    }
    ratio(hat.iter(), truth.iter())
}

/// Per-antenna [`nmse_dd`] over the last axis, averaged over antennas.
pub fn nmse_per_antenna(hat: &Array3<Complex64>, truth: &Array3<Complex64>) -> Result<f64> {
    if hat.dim() != truth.dim() {
        return Err(dim_err(format!("estimate is {:?}, truth is {:?}", hat.dim(), truth.dim())));
    }
    let n_t = truth.dim().2;
    let mut total = 0.0;
    for (h, t) in hat.axis_iter(Axis(2)).zip(truth.axis_iter(Axis(2))) {
        total += ratio(h.iter(), t.iter())?;
    }
    Ok(total / n_t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> Array2<Complex64> {
        Array2::from_shape_fn((4, 4), |(i, j)| Complex64::new(i as f64 + 1.0, j as f64))
    }

    #[test]
    fn nmse_examples() {
        let h = truth();
        assert_eq!(nmse_dd(&h, &h).unwrap(), 0.0);
        assert_eq!(nmse_dd(&Array2::zeros((4, 4)), &h).unwrap(), 1.0);
        let energy: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        let mut noisy = h.clone();
        noisy[[0, 0]] += Complex64::new((0.01 * energy).sqrt(), 0.0);
        assert!((nmse_dd(&noisy, &h).unwrap() - 0.01).abs() < 1e-12);
        assert!(matches!(nmse_dd(&h, &Array2::zeros((4, 4))), Err(OtfsError::Undefined(_))));
        assert!(nmse_dd(&h, &Array2::zeros((3, 4))).is_err());
    }

    #[test]
    fn tensor_metrics() {
        let t = Array3::from_shape_fn((2, 2, 2), |(a, b, c)| Complex64::new(1.0 + a as f64, (b * c) as f64));
        assert_eq!(nmse_dda(&t, &t).unwrap(), 0.0);
        assert_eq!(nmse_per_antenna(&Array3::zeros((2, 2, 2)), &t).unwrap(), 1.0);
        let mut hat = t.clone();
        for v in hat.index_axis_mut(Axis(2), 0).iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        assert!((nmse_per_antenna(&hat, &t).unwrap() - 0.5).abs() < 1e-12);
    }
}
