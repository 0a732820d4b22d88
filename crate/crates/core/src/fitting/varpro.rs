//! Linear inner problem of variable projection.
//!
//! For fixed decay rates the models are linear in the amplitudes and the
//! offset, so the best amplitudes come from one least-squares solve and
//! the outer search only has to move the rates.

use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero,
/// which keeps nearly-collinear exponentials from blowing up.
const CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Projection {
    /// One amplitude per rate, then the constant offset.
    pub coeffs: Vec<f64>,
    pub residual: Vec<f64>,
    pub ssr: f64,
}

/// Columns `exp(-rate * v)` for each rate, followed by a column of ones.
pub fn basis(rates: &[f64], cycles: &[f64]) -> DMatrix<f64> {
    let cols = rates.len() + 1;
    DMatrix::from_fn(cycles.len(), cols, |r, c| if c < rates.len() { (-rates[c] * cycles[r]).exp() } else { 1.0 })
}

pub fn project(rates: &[f64], cycles: &[f64], forces: &[f64]) -> Projection {
    let phi = basis(rates, cycles);
    let y = DVector::from_column_slice(forces);
    let svd = phi.clone().svd(true, true);
    let eps = CUTOFF * svd.singular_values.max();
    let theta = svd.solve(&y, eps).expect("U and V^T were requested");
    let residual = &y - &phi * &theta;
    let ssr = residual.norm_squared();
    Projection { coeffs: theta.iter().copied().collect(), residual: residual.iter().copied().collect(), ssr }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_orthogonal_to_basis() {
        let v: Vec<f64> = (1..=60).map(f64::from).collect();
        let f: Vec<f64> = v.iter().map(|x| 1.2 + 0.4 * (-0.07 * x).exp() + 0.01 * (x * 1.7).sin()).collect();
        for rates in [vec![0.05], vec![0.02, 0.4]] {
            let p = project(&rates, &v, &f);
            let phi = basis(&rates, &v);
            for col in phi.column_iter() {
                let dot: f64 = col.iter().zip(&p.residual).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-8, "{dot}");
            }
        }
    }

    #[test]
    fn exact_data_has_zero_residual() {
        let v: Vec<f64> = (1..=30).map(f64::from).collect();
        let f: Vec<f64> = v.iter().map(|x| 0.6 * (-0.1 * x).exp() + 1.5).collect();
        let p = project(&[0.1], &v, &f);
        assert!((p.coeffs[0] - 0.6).abs() < 1e-12 && (p.coeffs[1] - 1.5).abs() < 1e-12);
        assert!(p.ssr < 1e-25);
    }

    #[test]
    fn collinear_rates_stay_finite() {
        let v: Vec<f64> = (1..=30).map(f64::from).collect();
        let f: Vec<f64> = v.iter().map(|x| 0.6 * (-0.1 * x).exp() + 1.5).collect();
        let p = project(&[0.1, 0.1], &v, &f);
        assert!(p.coeffs.iter().all(|c| c.is_finite()));
        assert!(p.ssr < 1e-20);
    }
}
