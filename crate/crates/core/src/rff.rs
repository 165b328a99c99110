//! Random Fourier features for the RBF kernel.
//!
//! Frequencies `ω_j` are drawn i.i.d. from `N(0, σ⁻² I)`. The map is
//! `z(x) = √(1/D) [cos(ω₁ᵀx) … cos(ω_Dᵀx), sin(ω₁ᵀx) … sin(ω_Dᵀx)]`,
//! so `z(x)ᵀz(x′) ≈ exp(−‖x−x′‖² / 2σ²)` and `‖z(x)‖ = 1`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::matrix::dot;
use crate::{Error, Matrix, Result};

/// Frozen frequency matrix (`D × d`) plus bandwidth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RffMap {
    omegas: Matrix,
    sigma: f64,
}

impl RffMap {
    /// Samples `D` frequency vectors of dimension `d`, seeded.
    pub fn sample(d: usize, num_features: usize, sigma: f64, rng_seed: u64) -> Result<Self> {
        let mut rng = crate::rng::stream_rng(rng_seed, crate::rng::stream::RFF);
        Self::sample_with(d, num_features, sigma, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(d: usize, num_features: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        if d == 0 || num_features == 0 {
            return Err(Error::argument("RffMap: input dim and feature count must be positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::argument("RffMap: sigma must be a positive finite number"));
        }
        let normal = Normal::new(0.0, 1.0 / sigma).map_err(|_| Error::argument("RffMap: invalid sigma"))?;
        let omegas = Matrix::from_fn(num_features, d, |_, _| normal.sample(rng));
        Ok(RffMap { omegas, sigma })
    }

    pub fn from_parts(omegas: Matrix, sigma: f64) -> Result<Self> {
        if omegas.rows() == 0 || omegas.cols() == 0 {
            return Err(Error::argument("RffMap: empty frequency matrix"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::argument("RffMap: sigma must be a positive finite number"));
        }
        Ok(RffMap { omegas, sigma })
    }

    pub fn omegas(&self) -> &Matrix {
        &self.omegas
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.omegas.cols()
    }

    /// Number of frequency vectors `D`.
    pub fn num_features(&self) -> usize {
        self.omegas.rows()
    }

    /// Length of a mapped vector, `2D`.
    pub fn output_dim(&self) -> usize {
        2 * self.omegas.rows()
    }

    /// Projections `ω_jᵀx` for every frequency.
    pub fn projections(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("RffMap projections", self.input_dim(), x.len()));
        }
        Ok(self.omegas.iter_rows().map(|w| dot(w, x)).collect())
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let proj = self.projections(x)?;
        let dim = self.num_features();
        let scale = libm::sqrt(1.0 / dim as f64);
        let mut z = alloc::vec![0.0; 2 * dim];
        for (j, &p) in proj.iter().enumerate() {
            let (s, c) = libm::sincos(p);
            z[j] = scale * c;
            z[dim + j] = scale * s;
        }
        Ok(z)
    }

    /// Maps every row of a batch; output is `n × 2D`.
    pub fn map_batch(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape("RffMap::map_batch", self.input_dim(), batch.cols()));
        }
        let proj = batch.matmul_t(&self.omegas)?;
        let dim = self.num_features();
        let scale = libm::sqrt(1.0 / dim as f64);
        let mut z = Matrix::zeros(batch.rows(), 2 * dim);
        for i in 0..batch.rows() {
            let row = z.row_mut(i);
            for (j, &p) in proj.row(i).iter().enumerate() {
                let (s, c) = libm::sincos(p);
                row[j] = scale * c;
                row[dim + j] = scale * s;
            }
        }
        Ok(z)
    }

    /// Approximate kernel value `z(x)ᵀz(x′)`.
    pub fn approx_kernel(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(dot(&self.map(x)?, &self.map(x2)?))
    }
}

/// Exact RBF kernel `exp(−‖x−x′‖² / 2σ²)`.
pub fn rbf_kernel(x: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::shape("rbf_kernel", x.len(), x2.len()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::argument("rbf_kernel: sigma must be positive"));
    }
    let sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::exp(-sq / (2.0 * sigma * sigma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn random_vec(rng: &mut impl rand::Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn frequency_scale_matches_bandwidth() {
        let rff = RffMap::sample(2, 500, 3.0, 1).unwrap();
        let v = rff.omegas().as_slice();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 1.0 / 3.0).abs() <= 0.05 / 3.0, "std {std}");
    }

    #[test]
    fn sampling_is_seeded() {
        assert_eq!(RffMap::sample(3, 10, 2.0, 4).unwrap(), RffMap::sample(3, 10, 2.0, 4).unwrap());
        assert_ne!(RffMap::sample(3, 10, 2.0, 4).unwrap(), RffMap::sample(3, 10, 2.0, 5).unwrap());
    }

    #[test]
    fn huge_bandwidth_collapses_frequencies() {
        let rff = RffMap::sample(4, 200, 1e9, 2).unwrap();
        assert!(rff.omegas().as_slice().iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn invalid_arguments() {
        assert!(RffMap::sample(0, 10, 1.0, 0).is_err());
        assert!(RffMap::sample(2, 0, 1.0, 0).is_err());
        assert!(RffMap::sample(2, 10, 0.0, 0).is_err());
        assert!(RffMap::sample(2, 10, -1.0, 0).is_err());
        let rff = RffMap::sample(2, 10, 1.0, 0).unwrap();
        assert!(matches!(rff.map(&[1.0]), Err(Error::Shape { .. })));
        assert!(rbf_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn origin_maps_to_cosine_block() {
        let rff = RffMap::sample(3, 7, 3.0, 3).unwrap();
        let z = rff.map(&[0.0; 3]).unwrap();
        let s = (1.0f64 / 7.0).sqrt();
        assert!(z[..7].iter().all(|&v| v == s));
        assert!(z[7..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_map_matches_single() {
        let rff = RffMap::sample(3, 5, 3.0, 3).unwrap();
        let mut rng = stream_rng(1, 50);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 3, 2.0)).collect();
        let batch = Matrix::from_rows(&rows).unwrap();
        let z = rff.map_batch(&batch).unwrap();
        for (i, r) in rows.iter().enumerate() {
            for (a, b) in z.row(i).iter().zip(rff.map(r).unwrap()) {
                assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[0.3, -1.0], &[0.3, -1.0], 2.0).unwrap(), 1.0);
        // ‖x−x′‖² = 2σ² → e⁻¹
        let sigma = 1.5f64;
        let x2 = [(2.0 * sigma * sigma).sqrt(), 0.0];
        assert!((rbf_kernel(&[0.0, 0.0], &x2, sigma).unwrap() - (-1.0f64).exp()).abs() <= 1e-15);
        assert!((rbf_kernel(&[0.0, 0.0], &[3.0, 4.0], 3.0).unwrap() - 0.249_352_208_777_296_1).abs() <= 1e-12);
    }

    #[test]
    fn approximation_converges_with_more_features() {
        let mut rng = stream_rng(7, 51);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
            .map(|_| (random_vec(&mut rng, 4, 1.5), random_vec(&mut rng, 4, 1.5)))
            .collect();
        let max_err = |dim: usize| {
            let rff = RffMap::sample(4, dim, 3.0, 8).unwrap();
            pairs
                .iter()
                .map(|(a, b)| (rff.approx_kernel(a, b).unwrap() - rbf_kernel(a, b, 3.0).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let coarse = max_err(50);
        let fine = max_err(10_000);
        assert!(fine <= 0.05, "fine {fine}");
        assert!(fine < coarse);
    }

    #[test]
    fn kernel_estimate_is_shift_invariant() {
        let rff = RffMap::sample(3, 10_000, 3.0, 9).unwrap();
        let mut rng = stream_rng(8, 52);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 3, 2.0);
            let y = random_vec(&mut rng, 3, 2.0);
            let c = random_vec(&mut rng, 3, 5.0);
            let xs: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
            let ys: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a + b).collect();
            let k = rff.approx_kernel(&x, &y).unwrap();
            let ks = rff.approx_kernel(&xs, &ys).unwrap();
            assert!((k - ks).abs() <= 0.05);
        }
    }

    proptest! {
        #[test]
        fn mapped_vectors_have_unit_norm(x in proptest::collection::vec(-50.0f64..50.0, 5)) {
            let rff = RffMap::sample(5, 64, 3.0, 10).unwrap();
            let z = rff.map(&x).unwrap();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
}
