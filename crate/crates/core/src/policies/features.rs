//! Feature bases shared by policies and critics.

use ndarray::Array1;

/// Fully-coupled Fourier cosine basis on `[0, 1]^d`.
///
/// Every coefficient vector `c ∈ {0, …, order}^d` contributes one feature
/// `cos(π · cᵀs)`, including the constant `c = 0`, for `(order + 1)^d`
/// features in `[−1, 1]`. Inputs outside the unit cube are clipped
/// component-wise before projection.
///
/// # References
///
/// Konidaris, Osentoski & Thomas (2011), "Value Function Approximation in
/// Reinforcement Learning using the Fourier Basis".
pub fn fourier_features(state: &[f64], order: u32) -> Array1<f64> {
    let d = state.len();
    let clipped: Vec<f64> = state.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    let n = (order as usize + 1).pow(d as u32);
    let mut out = Array1::zeros(n);
    // Enumerate coefficient vectors in mixed radix (order + 1).
    for (i, feature) in out.iter_mut().enumerate() {
        let mut rem = i;
        let mut dot = 0.0;
        for &s in &clipped {
            let c = (rem % (order as usize + 1)) as f64;
            rem /= order as usize + 1;
            dot += c * s;
        }
        *feature = (std::f64::consts::PI * dot).cos();
    }
    out
}

/// Bias-plus-identity state features `φ(s) = [1, s₁, …, s_d]`, the per-action
/// block used by [`crate::policies::LinearGibbs`] and as its baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearBasis {
    pub state_dim: usize,
}

impl LinearBasis {
    pub fn new(state_dim: usize) -> Self {
        Self { state_dim }
    }

    /// Output dimension (`state_dim + 1` for the bias).
    pub fn dim(&self) -> usize {
        self.state_dim + 1
    }

    pub fn features(&self, state: &[f64]) -> Array1<f64> {
        assert_eq!(
            state.len(),
            self.state_dim,
            "state dimension mismatch in linear basis"
        );
        let mut phi = Array1::zeros(self.dim());
        phi[0] = 1.0;
        for (i, &s) in state.iter().enumerate() {
            phi[i + 1] = s;
        }
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_dimension_is_order_plus_one_to_the_d() {
        assert_eq!(fourier_features(&[0.3], 3).len(), 4);
        assert_eq!(fourier_features(&[0.3, 0.7], 3).len(), 16);
    }

    #[test]
    fn fourier_at_zero_is_all_ones() {
        let f = fourier_features(&[0.0, 0.0], 3);
        assert!(f.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn fourier_one_dimensional_alternates_at_one() {
        // c = 0..3 at s = 1: cos(0), cos(π), cos(2π), cos(3π).
        let f = fourier_features(&[1.0], 3);
        let expect = [1.0, -1.0, 1.0, -1.0];
        for (got, want) in f.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn fourier_stays_in_unit_band_and_clips_out_of_range() {
        let f = fourier_features(&[1.7, -0.4], 3);
        let g = fourier_features(&[1.0, 0.0], 3);
        assert_eq!(f, g);
        assert!(f.iter().all(|&x| (-1.0..=1.0).contains(&x)));
    }

    #[test]
    fn linear_basis_prepends_bias() {
        let basis = LinearBasis::new(2);
        let phi = basis.features(&[0.5, -1.5]);
        assert_eq!(phi.to_vec(), vec![1.0, 0.5, -1.5]);
    }
}
