//! Velocity-space differencing: centered second-order differences and
//! WENO5 upwind fluxes.
//!
//! Columns are the values `f_0 .. f_{N-1}` on a [`VGrid`]; boundary
//! treatment is described by [`Boundary`], which supplies up to three ghost
//! values on each side.

use crate::error::{Error, Result};

/// Uniform velocity grid `v_j = −v_max + jΔv`, `Δv = 2 v_max / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VGrid {
    pub n: usize,
    pub v_max: f64,
    pub dv: f64,
}

impl VGrid {
    pub fn new(n: usize, v_max: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 velocity nodes, got {n}"
            )));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "v_max must be positive, got {v_max}"
            )));
        }
        Ok(Self {
            n,
            v_max,
            dv: 2.0 * v_max / n as f64,
        })
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        -self.v_max + j as f64 * self.dv
    }

    /// Node position for any (possibly ghost) index.
    #[inline]
    pub fn v_at(&self, j: isize) -> f64 {
        -self.v_max + j as f64 * self.dv
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.v(j)).collect()
    }

    /// Trapezoid weights on the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dv; self.n];
        w[0] *= 0.5;
        w[self.n - 1] *= 0.5;
        w
    }

    /// `∫ f dv` by the trapezoid rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        let inner: f64 = f.iter().sum();
        self.dv * (inner - 0.5 * (f[0] + f[self.n - 1]))
    }
}

/// Ghost values beyond the ends of a column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// All ghosts are zero.
    Zero,
    /// Prescribed ghosts: `left = [f_{-3}, f_{-2}, f_{-1}]`,
    /// `right = [f_N, f_{N+1}, f_{N+2}]`.
    Fixed { left: [f64; 3], right: [f64; 3] },
    /// Periodic wrap-around.
    Periodic,
    /// Zero ghosts and no flux through the two outer interfaces: nothing
    /// enters or leaves the truncated domain.
    Closed,
}

pub const GHOSTS: usize = 3;

/// Writes `f` with three ghost values on each side into `ext`.
pub fn extend(f: &[f64], boundary: Boundary, ext: &mut Vec<f64>) {
    let n = f.len();
    ext.clear();
    ext.reserve(n + 2 * GHOSTS);
    match boundary {
        Boundary::Zero | Boundary::Closed => ext.extend_from_slice(&[0.0; GHOSTS]),
        Boundary::Fixed { left, .. } => ext.extend_from_slice(&left),
        Boundary::Periodic => (0..GHOSTS).for_each(|g| ext.push(f[(n * GHOSTS + g - GHOSTS) % n])),
    }
    ext.extend_from_slice(f);
    match boundary {
        Boundary::Zero | Boundary::Closed => ext.extend_from_slice(&[0.0; GHOSTS]),
        Boundary::Fixed { right, .. } => ext.extend_from_slice(&right),
        Boundary::Periodic => (0..GHOSTS).for_each(|g| ext.push(f[g % n])),
    }
}

/// Centered difference `(f_{j+1} − f_{j−1}) / (2Δv)` at every node.
///
/// With [`Boundary::Closed`] the end nodes use the flux form with midpoint
/// fluxes and zero flux through the ends, so `Σ_j out_j = 0`.
pub fn cd2_dv(f: &[f64], dv: f64, boundary: Boundary, out: &mut [f64]) {
    let n = f.len();
    assert!(n >= 3, "CD2 needs at least three nodes");
    assert_eq!(out.len(), n);
    let (left, right) = match boundary {
        Boundary::Zero => (0.0, 0.0),
        Boundary::Closed => (-f[0], -f[n - 1]),
        Boundary::Fixed { left, right } => (left[2], right[0]),
        Boundary::Periodic => (f[n - 1], f[0]),
    };
    let inv = 0.5 / dv;
    out[0] = (f[1] - left) * inv;
    for j in 1..n - 1 {
        out[j] = (f[j + 1] - f[j - 1]) * inv;
    }
    out[n - 1] = (right - f[n - 2]) * inv;
}

/// Ideal WENO5 weights.
pub const GAMMA: [f64; 3] = [0.1, 0.6, 0.3];

/// Smoothness indicators, `α`, and normalized weights at one interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WenoWeights {
    pub beta: [f64; 3],
    pub alpha: [f64; 3],
    pub w: [f64; 3],
}

impl WenoWeights {
    /// From the indicators with regularization `eps`.
    pub fn from_beta(beta: [f64; 3], eps: f64) -> Self {
        let mut alpha = [0.0; 3];
        for i in 0..3 {
            let d = eps + beta[i];
            alpha[i] = GAMMA[i] / (d * d);
        }
        let sum: f64 = alpha.iter().sum();
        Self {
            beta,
            alpha,
            w: [alpha[0] / sum, alpha[1] / sum, alpha[2] / sum],
        }
    }

    /// Weights for the left-biased reconstruction from `[f_{j-2} .. f_{j+2}]`.
    pub fn plus(s: &[f64; 5], eps: f64) -> Self {
        let [a, b, c, d, e] = *s;
        let beta = [
            13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2),
            13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2),
            13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2),
        ];
        Self::from_beta(beta, eps)
    }

    /// Weights for the right-biased reconstruction from `[f_{j-1} .. f_{j+3}]`.
    pub fn minus(s: &[f64; 5], eps: f64) -> Self {
        let [a, b, c, d, e] = *s;
        let beta = [
            13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2),
            13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2),
            13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2),
        ];
        Self::from_beta(beta, eps)
    }
}

/// Upwind direction of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Left-biased, for positive advection speed.
    Plus,
    /// Right-biased, for negative advection speed.
    Minus,
}

/// WENO5 reconstruction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weno5 {
    pub eps: f64,
    /// Use the ideal weights everywhere (the linear fifth-order scheme).
    pub frozen: bool,
}

impl Default for Weno5 {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            frozen: false,
        }
    }
}

impl Weno5 {
    pub fn frozen() -> Self {
        Self {
            frozen: true,
            ..Self::default()
        }
    }

    /// `f^±_{j+1/2}` from the five values `[f_{j-2} .. f_{j+2}]` (plus) or
    /// `[f_{j-1} .. f_{j+3}]` (minus).
    #[inline]
    pub fn interface(&self, s: &[f64; 5], sign: Sign) -> f64 {
        let [a, b, c, d, e] = *s;
        let sixth = 1.0 / 6.0;
        match sign {
            Sign::Plus => {
                let w = if self.frozen {
                    GAMMA
                } else {
                    WenoWeights::plus(s, self.eps).w
                };
                w[0] * (2.0 * a - 7.0 * b + 11.0 * c) * sixth
                    + w[1] * (-b + 5.0 * c + 2.0 * d) * sixth
                    + w[2] * (2.0 * c + 5.0 * d - e) * sixth
            }
            Sign::Minus => {
                let w = if self.frozen {
                    GAMMA
                } else {
                    WenoWeights::minus(s, self.eps).w
                };
                w[2] * (-a + 5.0 * b + 2.0 * c) * sixth
                    + w[1] * (2.0 * b + 5.0 * c - d) * sixth
                    + w[0] * (11.0 * c - 7.0 * d + 2.0 * e) * sixth
            }
        }
    }

    /// Interface values `f^±_{j+1/2}` for `j = −1 .. N−1` (N + 1 values)
    /// from a ghost-extended column `ext` of length `N + 6`.
    pub fn fluxes(&self, ext: &[f64], sign: Sign, out: &mut Vec<f64>) {
        let n = ext.len() - 2 * GHOSTS;
        out.clear();
        for j in -1..n as isize {
            // ext index of f_j is j + GHOSTS
            let base = match sign {
                Sign::Plus => j + GHOSTS as isize - 2,
                Sign::Minus => j + GHOSTS as isize - 1,
            } as usize;
            let s: &[f64; 5] = ext[base..base + 5].try_into().expect("five-point stencil");
            out.push(self.interface(s, sign));
        }
    }

    /// `(f^±_{j+1/2} − f^±_{j−1/2}) / Δv` at each node; `closed` zeroes
    /// the two outer fluxes.
    pub fn difference(
        &self,
        ext: &[f64],
        sign: Sign,
        dv: f64,
        closed: bool,
        flux: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        self.fluxes(ext, sign, flux);
        if closed {
            let last = flux.len() - 1;
            flux[0] = 0.0;
            flux[last] = 0.0;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = (flux[j + 1] - flux[j]) / dv;
        }
    }

    /// `E⁺ D⁺f + E⁻ D⁻f` for a single column with field value `e`.
    pub fn transport(
        &self,
        f: &[f64],
        e: f64,
        dv: f64,
        boundary: Boundary,
        work: &mut WenoWork,
        out: &mut [f64],
    ) {
        assert_eq!(f.len(), out.len());
        if e == 0.0 {
            out.fill(0.0);
            return;
        }
        extend(f, boundary, &mut work.ext);
        let sign = if e > 0.0 { Sign::Plus } else { Sign::Minus };
        let closed = boundary == Boundary::Closed;
        self.difference(&work.ext, sign, dv, closed, &mut work.flux, out);
        out.iter_mut().for_each(|o| *o *= e);
    }
}

/// Scratch buffers reused across columns.
#[derive(Debug, Clone, Default)]
pub struct WenoWork {
    ext: Vec<f64>,
    flux: Vec<f64>,
}

/// Velocity scheme selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VScheme {
    Cd2,
    Weno5(Weno5),
}

impl VScheme {
    pub fn name(&self) -> &'static str {
        match self {
            VScheme::Cd2 => "cd2",
            VScheme::Weno5(_) => "weno5",
        }
    }
}

impl std::str::FromStr for VScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cd2" => Ok(VScheme::Cd2),
            "weno5" => Ok(VScheme::Weno5(Weno5::default())),
            other => Err(Error::InvalidParameter(format!(
                "unknown velocity scheme `{other}`"
            ))),
        }
    }
}

/// `E ∂_v f` for one column by the selected scheme.
pub fn v_transport_term(
    scheme: VScheme,
    f: &[f64],
    e: f64,
    dv: f64,
    boundary: Boundary,
    work: &mut WenoWork,
    out: &mut [f64],
) {
    match scheme {
        VScheme::Cd2 => {
            cd2_dv(f, dv, boundary, out);
            out.iter_mut().for_each(|o| *o *= e);
        }
        VScheme::Weno5(w) => w.transport(f, e, dv, boundary, work, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::lw5_symbol;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn grid_nodes() {
        let g = VGrid::new(128, 8.0).unwrap();
        assert_eq!(g.dv, 0.125);
        assert_eq!(g.v(0), -8.0);
        assert_eq!(g.v(64), 0.0);
        assert!(VGrid::new(2, 1.0).is_err());
        assert!(VGrid::new(8, 0.0).is_err());
    }

    #[test]
    fn cd2_examples() {
        let g = VGrid::new(16, 2.0).unwrap();
        let v = g.nodes();
        let mut out = vec![0.0; 16];
        cd2_dv(&[4.0; 16], g.dv, Boundary::Periodic, &mut out);
        assert!(out.iter().all(|d| *d == 0.0));
        cd2_dv(&v, g.dv, Boundary::Zero, &mut out);
        for d in &out[1..15] {
            assert_abs_diff_eq!(*d, 1.0, epsilon = 1e-13);
        }
        let sq: Vec<f64> = v.iter().map(|v| v * v).collect();
        cd2_dv(&sq, g.dv, Boundary::Zero, &mut out);
        for j in 1..15 {
            assert_abs_diff_eq!(out[j], 2.0 * v[j], epsilon = 1e-13);
        }
    }

    #[test]
    fn cd2_uses_fixed_ghosts() {
        let f = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        let b = Boundary::Fixed {
            left: [0.0, 0.0, 0.0],
            right: [4.0, 5.0, 6.0],
        };
        cd2_dv(&f, 1.0, b, &mut out);
        assert_eq!(out, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_data_uses_ideal_weights() {
        let w = WenoWeights::plus(&[2.0; 5], 1e-6);
        assert_eq!(w.beta, [0.0; 3]);
        for i in 0..3 {
            assert_abs_diff_eq!(w.w[i], GAMMA[i], epsilon = 1e-15);
        }
        let w = Weno5::default();
        assert_abs_diff_eq!(w.interface(&[2.0; 5], Sign::Plus), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.interface(&[2.0; 5], Sign::Minus), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn linear_data_reconstructs_midpoints() {
        let w = Weno5::default();
        let f: Vec<f64> = (0..12).map(|j| j as f64).collect();
        let mut ext = Vec::new();
        extend(&f, Boundary::Periodic, &mut ext);
        let mut flux = Vec::new();
        w.fluxes(&ext, Sign::Plus, &mut flux);
        for j in 2..9 {
            // flux[j + 1] is the interface j + 1/2
            assert_abs_diff_eq!(flux[j + 1], j as f64 + 0.5, epsilon = 1e-12);
        }
        w.fluxes(&ext, Sign::Minus, &mut flux);
        for j in 2..9 {
            assert_abs_diff_eq!(flux[j + 1], j as f64 + 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn weights_are_a_partition_of_unity() {
        let w = WenoWeights::minus(&[0.0, 1.0, 0.0, 5.0, -2.0], 1e-6);
        assert!(w.w.iter().all(|x| *x >= 0.0));
        assert_abs_diff_eq!(w.w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn frozen_plus_stencil_has_the_lw5_symbol() {
        let n = 64;
        let (v_max, dv) = (4.0, 8.0 / 64.0);
        let w = Weno5::frozen();
        let mut work = WenoWork::default();
        for m in [1i64, 3, 7, 20, 31] {
            let theta = m as f64 * PI * dv / v_max;
            let re: Vec<f64> = (0..n).map(|j| (j as f64 * theta).cos()).collect();
            let im: Vec<f64> = (0..n).map(|j| (j as f64 * theta).sin()).collect();
            let (mut dre, mut dim) = (vec![0.0; n], vec![0.0; n]);
            w.transport(&re, 1.0, dv, Boundary::Periodic, &mut work, &mut dre);
            w.transport(&im, 1.0, dv, Boundary::Periodic, &mut work, &mut dim);
            let mu = lw5_symbol(m, dv, v_max);
            for j in 0..n {
                let got = Complex64::new(dre[j], dim[j]);
                let want = mu * Complex64::from_polar(1.0, j as f64 * theta);
                assert!((got - want).norm() < 1e-12, "m = {m}, j = {j}");
            }
        }
    }

    #[test]
    fn transport_telescopes() {
        let f: Vec<f64> = (0..40)
            .map(|j| (-((j as f64 - 20.0) / 2.5).powi(2)).exp())
            .collect();
        let mut out = vec![0.0; 40];
        let mut work = WenoWork::default();
        for e in [0.7, -1.3] {
            Weno5::default().transport(&f, e, 0.1, Boundary::Zero, &mut work, &mut out);
            assert!(out.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn closed_ends_conserve_exactly() {
        let f: Vec<f64> = (0..24).map(|j| 1.0 + (j as f64 * 0.7).sin()).collect();
        let mut out = vec![0.0; 24];
        let mut work = WenoWork::default();
        cd2_dv(&f, 0.1, Boundary::Closed, &mut out);
        assert!(out.iter().sum::<f64>().abs() < 1e-12);
        for e in [0.9, -0.4] {
            Weno5::default().transport(&f, e, 0.1, Boundary::Closed, &mut work, &mut out);
            assert!(out.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_gives_zero_term() {
        let f = [1.0, 5.0, 2.0, 7.0];
        let mut out = [9.0; 4];
        let mut work = WenoWork::default();
        v_transport_term(
            VScheme::Cd2,
            &f,
            0.0,
            0.1,
            Boundary::Zero,
            &mut work,
            &mut out,
        );
        assert_eq!(out, [0.0; 4]);
        v_transport_term(
            VScheme::Weno5(Weno5::default()),
            &f,
            0.0,
            0.1,
            Boundary::Zero,
            &mut work,
            &mut out,
        );
        assert_eq!(out, [0.0; 4]);
    }

    #[test]
    fn trapezoid_integrates_gaussian() {
        let g = VGrid::new(128, 8.0).unwrap();
        let f: Vec<f64> = g
            .nodes()
            .iter()
            .map(|v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt())
            .collect();
        assert_abs_diff_eq!(g.integrate(&f), 1.0, epsilon = 1e-12);
    }
}
