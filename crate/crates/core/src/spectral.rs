//! FFTs along periodic axes of row-major arrays, wavenumbers, and the
//! periodic 1D Poisson solve for the electric field.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;

type C = Complex64;

/// Signed integer frequencies `0, 1, ..., -1` in FFT order.
pub fn frequencies(n: usize) -> Vec<i64> {
    (0..n)
        .map(|j| {
            if j <= n / 2 {
                j as i64
            } else {
                j as i64 - n as i64
            }
        })
        .collect()
}

/// Angular wavenumbers `2πn/L` in FFT order. The Nyquist mode of an even
/// grid is reported with a positive sign.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    frequencies(n)
        .into_iter()
        .map(|m| 2.0 * PI * m as f64 / length)
        .collect()
}

/// Whether index `j` of an `n`-point spectrum is the unpaired Nyquist mode.
pub fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

/// Cache of FFT plans by (length, direction).
#[derive(Default, Clone)]
pub struct FftCache {
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftCache")
            .field("plans", &self.plans.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl FftCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn plan(&mut self, n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        self.plans
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    }

    /// Unnormalized forward transform along `axis` of a row-major array.
    pub fn forward(&mut self, data: &mut [C], shape: &[usize], axis: usize) -> Result<()> {
        self.transform(data, shape, axis, false)
    }

    /// Inverse transform along `axis`, normalized by `1/N`.
    pub fn inverse(&mut self, data: &mut [C], shape: &[usize], axis: usize) -> Result<()> {
        self.transform(data, shape, axis, true)
    }

    fn transform(
        &mut self,
        data: &mut [C],
        shape: &[usize],
        axis: usize,
        inverse: bool,
    ) -> Result<()> {
        let total: usize = shape.iter().product();
        if axis >= shape.len() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for a {}-d array",
                shape.len()
            )));
        }
        if data.len() != total {
            return Err(Error::ShapeMismatch {
                expected: total,
                got: data.len(),
            });
        }
        let n = shape[axis];
        if n == 0 {
            return Ok(());
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let fft = self.plan(n, inverse);
        let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
        let run_rows = |rows: &mut [C]| {
            let mut scratch = vec![C::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(rows, &mut scratch);
            if inverse {
                rows.iter_mut().for_each(|x| *x *= scale);
            }
        };
        if inner == 1 {
            let rows_per_chunk = (1 << 14) / n + 1;
            par::for_each_chunk_mut(data, rows_per_chunk * n, |_, chunk| run_rows(chunk));
            return Ok(());
        }
        // bring the axis last within each [n][inner] block, transform, and restore
        let block = n * inner;
        par::for_each_chunk_mut(data, block, |_, blk| {
            let mut t = vec![C::new(0.0, 0.0); block];
            for i in 0..n {
                for j in 0..inner {
                    t[j * n + i] = blk[i * inner + j];
                }
            }
            run_rows(&mut t);
            for i in 0..n {
                for j in 0..inner {
                    blk[i * inner + j] = t[j * n + i];
                }
            }
        });
        Ok(())
    }
}

/// Complex array with per-axis periodic lengths and a transformed flag.
#[derive(Debug, Clone)]
pub struct SpectralField {
    shape: Vec<usize>,
    lengths: Vec<f64>,
    transformed: Vec<bool>,
    data: Vec<C>,
    ffts: FftCache,
}

impl SpectralField {
    /// Zero field in physical space.
    pub fn zeros(shape: &[usize], lengths: &[f64]) -> Result<Self> {
        if shape.len() != lengths.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.len(),
                got: lengths.len(),
            });
        }
        let n = shape.iter().product();
        Ok(Self {
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
            transformed: vec![false; shape.len()],
            data: vec![C::new(0.0, 0.0); n],
            ffts: FftCache::new(),
        })
    }

    /// Physical-space field from real values.
    pub fn from_real(shape: &[usize], lengths: &[f64], values: &[f64]) -> Result<Self> {
        let mut f = Self::zeros(shape, lengths)?;
        if values.len() != f.data.len() {
            return Err(Error::ShapeMismatch {
                expected: f.data.len(),
                got: values.len(),
            });
        }
        for (d, &v) in f.data.iter_mut().zip(values) {
            *d = C::new(v, 0.0);
        }
        Ok(f)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn is_transformed(&self, axis: usize) -> bool {
        self.transformed[axis]
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C> {
        self.data
    }

    /// Forward transform along `axis`; a no-op if already transformed.
    pub fn fft_axis(&mut self, axis: usize) -> Result<()> {
        if axis >= self.shape.len() {
            return Err(Error::InvalidParameter(format!("no axis {axis}")));
        }
        if !self.transformed[axis] {
            self.ffts.forward(&mut self.data, &self.shape, axis)?;
            self.transformed[axis] = true;
        }
        Ok(())
    }

    /// Inverse transform along `axis`; a no-op if in physical space.
    pub fn ifft_axis(&mut self, axis: usize) -> Result<()> {
        if axis >= self.shape.len() {
            return Err(Error::InvalidParameter(format!("no axis {axis}")));
        }
        if self.transformed[axis] {
            self.ffts.inverse(&mut self.data, &self.shape, axis)?;
            self.transformed[axis] = false;
        }
        Ok(())
    }

    /// Wavenumbers of `axis`.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        wavenumbers(self.shape[axis], self.lengths[axis])
    }
}

/// Electric field from a periodic charge density.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub e: Vec<f64>,
    /// Mean of ρ minus one: nonzero when the background does not neutralize
    /// the plasma. Reported, never absorbed into E.
    pub deficit: f64,
}

/// Solves `∂_x E = ρ − 1` on a periodic grid of length `length` with zero
/// mean E (`Ê_k = ρ̂_k / (ik)`, `Ê_0 = 0`). The unpaired Nyquist mode of an
/// even grid is dropped.
pub fn poisson_e(rho: &[f64], length: f64, ffts: &mut FftCache) -> Result<PoissonSolution> {
    let n = rho.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty density".into()));
    }
    let mut hat: Vec<C> = rho.iter().map(|&r| C::new(r, 0.0)).collect();
    ffts.forward(&mut hat, &[n], 0)?;
    let deficit = hat[0].re / n as f64 - 1.0;
    let ks = wavenumbers(n, length);
    for (j, h) in hat.iter_mut().enumerate() {
        *h = if j == 0 || is_nyquist(j, n) {
            C::new(0.0, 0.0)
        } else {
            *h / C::new(0.0, ks[j])
        };
    }
    ffts.inverse(&mut hat, &[n], 0)?;
    Ok(PoissonSolution {
        e: hat.into_iter().map(|h| h.re).collect(),
        deficit,
    })
}

/// Spectral derivative of a real periodic sample (Nyquist mode dropped).
pub fn spectral_derivative(values: &[f64], length: f64, ffts: &mut FftCache) -> Result<Vec<f64>> {
    let n = values.len();
    let mut hat: Vec<C> = values.iter().map(|&r| C::new(r, 0.0)).collect();
    ffts.forward(&mut hat, &[n], 0)?;
    let ks = wavenumbers(n, length);
    for (j, h) in hat.iter_mut().enumerate() {
        *h = if is_nyquist(j, n) {
            C::new(0.0, 0.0)
        } else {
            *h * C::new(0.0, ks[j])
        };
    }
    ffts.inverse(&mut hat, &[n], 0)?;
    Ok(hat.into_iter().map(|h| h.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, length: f64) -> Vec<f64> {
        (0..n).map(|j| j as f64 * length / n as f64).collect()
    }

    #[test]
    fn constant_field_is_a_single_mode() {
        let mut f = SpectralField::from_real(&[8], &[1.0], &[3.0; 8]).unwrap();
        f.fft_axis(0).unwrap();
        assert_abs_diff_eq!(f.data()[0].re, 24.0, epsilon = 1e-12);
        for d in &f.data()[1..] {
            assert!(d.norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_is_a_delta() {
        let n = 12;
        let mut f = SpectralField::zeros(&[n], &[1.0]).unwrap();
        for (j, d) in f.data_mut().iter_mut().enumerate() {
            *d = C::from_polar(1.0, 2.0 * PI * 3.0 * j as f64 / n as f64);
        }
        f.fft_axis(0).unwrap();
        for (j, d) in f.data().iter().enumerate() {
            let want = if j == 3 { n as f64 } else { 0.0 };
            assert_abs_diff_eq!(d.norm(), want, epsilon = 1e-11);
        }
    }

    #[test]
    fn middle_axis_transform_matches_contiguous_rows() {
        let shape = [3, 5, 4];
        let vals: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut f = SpectralField::from_real(&shape, &[1.0; 3], &vals).unwrap();
        f.fft_axis(1).unwrap();
        let mut ffts = FftCache::new();
        for a in 0..3 {
            for c in 0..4 {
                let mut line: Vec<C> = (0..5)
                    .map(|b| C::new(vals[(a * 5 + b) * 4 + c], 0.0))
                    .collect();
                ffts.forward(&mut line, &[5], 0).unwrap();
                for b in 0..5 {
                    assert!((line[b] - f.data()[(a * 5 + b) * 4 + c]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut ffts = FftCache::new();
        let mut data = vec![C::new(0.0, 0.0); 5];
        assert!(matches!(
            ffts.forward(&mut data, &[2, 3], 0),
            Err(Error::ShapeMismatch {
                expected: 6,
                got: 5
            })
        ));
    }

    #[test]
    fn neutral_plasma_has_no_field() {
        let sol = poisson_e(&[1.0; 16], 2.0 * PI, &mut FftCache::new()).unwrap();
        assert!(sol.e.iter().all(|e| e.abs() < 1e-15));
        assert_abs_diff_eq!(sol.deficit, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn landau_initial_field() {
        let l = 4.0 * PI;
        for n in [64, 81] {
            let x = grid(n, l);
            let rho: Vec<f64> = x.iter().map(|x| 1.0 + 0.001 * (0.5 * x).cos()).collect();
            let sol = poisson_e(&rho, l, &mut FftCache::new()).unwrap();
            for (e, x) in sol.e.iter().zip(&x) {
                assert_abs_diff_eq!(*e, 0.002 * (0.5 * x).sin(), epsilon = 1e-15);
            }
            let sup = sol.e.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            assert!(sup <= 2e-3 + 1e-15 && sup > 1.99e-3);
        }
    }

    #[test]
    fn field_l2_norm_oracle() {
        let (l, k, alpha, n) = (2.0 * PI / 0.3, 0.3, 0.04, 96);
        let rho: Vec<f64> = grid(n, l)
            .iter()
            .map(|x| 1.0 + alpha * (k * x).cos())
            .collect();
        let sol = poisson_e(&rho, l, &mut FftCache::new()).unwrap();
        let norm = (sol.e.iter().map(|e| e * e).sum::<f64>() * l / n as f64).sqrt();
        assert_abs_diff_eq!(norm, alpha / k * (l / 2.0).sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn deficit_is_reported_not_absorbed() {
        let sol = poisson_e(&[1.5; 8], 1.0, &mut FftCache::new()).unwrap();
        assert_abs_diff_eq!(sol.deficit, 0.5, epsilon = 1e-15);
        assert!(sol.e.iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn frequencies_are_signed() {
        assert_eq!(frequencies(5), vec![0, 1, 2, -2, -1]);
        assert_eq!(frequencies(4), vec![0, 1, 2, -1]);
    }
}
