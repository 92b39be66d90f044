//! Explicit Runge-Kutta tableaus and the φ functions used by exponential methods.

use num_complex::Complex64;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Coefficients of an explicit Runge-Kutta method.
///
/// `a` is stored densely; only the strictly lower triangle is read.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: u32,
}

/// Registered tableaus, addressable by a short key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableauId {
    Rk44,
    Rk33,
    Rk32Best,
    Rk22,
}

impl TableauId {
    pub const ALL: [TableauId; 4] = [
        TableauId::Rk44,
        TableauId::Rk33,
        TableauId::Rk32Best,
        TableauId::Rk22,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TableauId::Rk44 => "rk44",
            TableauId::Rk33 => "rk33",
            TableauId::Rk32Best => "rk32best",
            TableauId::Rk22 => "rk22",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.key() == key)
    }

    pub fn tableau(self) -> ButcherTableau {
        match self {
            TableauId::Rk44 => ButcherTableau::rk44(),
            TableauId::Rk33 => ButcherTableau::rk33(),
            TableauId::Rk32Best => ButcherTableau::rk32_best(),
            TableauId::Rk22 => ButcherTableau::rk22_midpoint(),
        }
    }
}

impl ButcherTableau {
    /// Classic four stage, fourth order method.
    pub fn rk44() -> Self {
        Self {
            name: "RK(4,4)",
            a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
            order: 4,
        }
    }

    /// Classic three stage, third order method.
    pub fn rk33() -> Self {
        Self {
            name: "RK(3,3)",
            a: vec![vec![], vec![0.5], vec![-1.0, 2.0]],
            b: vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 1.0],
            order: 3,
        }
    }

    /// Three stage, second order method with an enlarged imaginary-axis interval.
    pub fn rk32_best() -> Self {
        Self {
            name: "RK(3,2) best",
            a: vec![vec![], vec![0.5], vec![0.0, 0.5]],
            b: vec![0.0, 0.0, 1.0],
            c: vec![0.0, 0.5, 0.5],
            order: 2,
        }
    }

    /// Explicit midpoint rule.
    pub fn rk22_midpoint() -> Self {
        Self {
            name: "RK(2,2) midpoint",
            a: vec![vec![], vec![0.5]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
            order: 2,
        }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Coefficient `a[l][j]` for `j < l`, zero elsewhere.
    #[inline]
    pub fn a(&self, l: usize, j: usize) -> f64 {
        if j < l {
            self.a[l].get(j).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Checks explicitness, row-sum and consistency conditions.
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if s == 0 || self.c.len() != s || self.a.len() != s {
            return Err(Error::InvalidTableau(format!(
                "{}: inconsistent stage counts",
                self.name
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidTableau(format!(
                "{}: order must be positive",
                self.name
            )));
        }
        for (l, row) in self.a.iter().enumerate() {
            if row.len() > l {
                return Err(Error::InvalidTableau(format!(
                    "{}: row {l} is not strictly lower triangular",
                    self.name
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - self.c[l]).abs() > 1e-14 {
                return Err(Error::InvalidTableau(format!(
                    "{}: c[{l}] = {} but row sum is {sum}",
                    self.name, self.c[l]
                )));
            }
        }
        let bsum: f64 = self.b.iter().sum();
        if (bsum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidTableau(format!(
                "{}: weights sum to {bsum}",
                self.name
            )));
        }
        Ok(())
    }

    /// One explicit RK step for a scalar complex ODE `u' = rhs(t, u)`.
    pub fn scalar_step<F>(&self, mut rhs: F, t: f64, u: Complex64, dt: f64) -> Complex64
    where
        F: FnMut(f64, Complex64) -> Complex64,
    {
        let s = self.stages();
        let mut k = Vec::with_capacity(s);
        for l in 0..s {
            let mut stage = u;
            for (j, kj) in k.iter().enumerate() {
                stage += dt * self.a(l, j) * kj;
            }
            k.push(rhs(t + self.c[l] * dt, stage));
        }
        k.iter()
            .zip(&self.b)
            .fold(u, |acc, (kj, bj)| acc + dt * bj * kj)
    }

    /// Stability function: one step of the method on `u' = z u` with unit step.
    pub fn stability_function(&self, z: Complex64) -> Complex64 {
        self.scalar_step(|_, u| z * u, 0.0, Complex64::new(1.0, 0.0), 1.0)
    }

    /// Aligned text dump of the tableau.
    pub fn dump(&self) -> String {
        let s = self.stages();
        let mut out = String::new();
        let _ = writeln!(out, "{} (s = {s}, p = {})", self.name, self.order);
        for l in 0..s {
            let _ = write!(out, "{:>10.6} |", self.c[l]);
            for j in 0..l {
                let _ = write!(out, " {:>10.6}", self.a(l, j));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}", "-".repeat(12 + 11 * s));
        let _ = write!(out, "{:>10} |", "");
        for bj in &self.b {
            let _ = write!(out, " {:>10.6}", bj);
        }
        out.push('\n');
        out
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Radius below which φ functions are summed from their power series.
const PHI_SERIES_RADIUS: f64 = 2.0;

/// φ_ℓ(z) = (e^z − Σ_{k<ℓ} z^k/k!) / z^ℓ, with φ_0 = exp.
///
/// For |z| < 2 the power series Σ_k z^k/(k+ℓ)! is summed to machine
/// precision; outside, the closed form is well conditioned.
pub fn phi(l: usize, z: Complex64) -> Complex64 {
    if l == 0 {
        return z.exp();
    }
    if z.norm() < PHI_SERIES_RADIUS {
        phi_series(l, z)
    } else {
        phi_closed(l, z)
    }
}

fn phi_series(l: usize, z: Complex64) -> Complex64 {
    // terms decay like 2^k/(k+ℓ)!, 40 terms are far past double precision
    let mut term = Complex64::new(1.0 / factorial(l), 0.0);
    let mut sum = term;
    for k in 1..40 {
        term = term * z / (k + l) as f64;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn phi_closed(l: usize, z: Complex64) -> Complex64 {
    let mut acc = z.exp();
    let mut zk = Complex64::new(1.0, 0.0);
    for k in 0..l {
        acc -= zk / factorial(k);
        zk *= z;
    }
    acc / zk
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn registry_tableaus_are_valid() {
        for id in TableauId::ALL {
            id.tableau().validate().unwrap();
            assert_eq!(TableauId::from_key(id.key()), Some(id));
        }
    }

    #[test]
    fn implicit_row_is_rejected() {
        let mut t = ButcherTableau::rk33();
        t.a[1] = vec![0.25, 0.25];
        assert!(t.validate().is_err());
    }

    #[test]
    fn stability_function_examples() {
        let rk4 = ButcherTableau::rk44();
        assert_relative_eq!(rk4.stability_function(c(0.0, 0.0)).re, 1.0);
        let r = rk4.stability_function(c(0.0, 1.0));
        // 1 + i - 1/2 - i/6 + 1/24
        assert_relative_eq!(r.re, 13.0 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(r.im, 5.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(r.norm(), 0.993_905, epsilon = 1e-6);

        let rk3 = ButcherTableau::rk33();
        let r = rk3.stability_function(c(0.0, 3f64.sqrt()));
        assert_relative_eq!(r.re, -0.5, epsilon = 1e-14);
        assert_relative_eq!(r.im, 3f64.sqrt() / 2.0, epsilon = 1e-14);
        assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn classic_methods_match_truncated_exponential() {
        for (t, p) in [(ButcherTableau::rk33(), 3), (ButcherTableau::rk44(), 4)] {
            for &z in &[c(0.3, -1.2), c(-2.0, 0.5), c(0.0, 2.5), c(1.0, 1.0)] {
                let mut series = c(0.0, 0.0);
                let mut zk = c(1.0, 0.0);
                for k in 0..=p {
                    series += zk / factorial(k);
                    zk *= z;
                }
                let r = t.stability_function(z);
                assert!((r - series).norm() <= 1e-14 * series.norm().max(1.0));
            }
        }
    }

    #[test]
    fn rk32_best_polynomial() {
        let t = ButcherTableau::rk32_best();
        let z = c(0.7, -0.4);
        let expect = c(1.0, 0.0) + z + z * z / 2.0 + z * z * z / 4.0;
        assert!((t.stability_function(z) - expect).norm() < 1e-15);
    }

    #[test]
    fn phi_limits_and_values() {
        assert_relative_eq!(phi(0, c(0.0, 0.0)).re, 1.0);
        assert_relative_eq!(phi(1, c(0.0, 0.0)).re, 1.0);
        assert_relative_eq!(phi(2, c(0.0, 0.0)).re, 0.5);
        assert_relative_eq!(phi(3, c(0.0, 0.0)).re, 1.0 / 6.0);
        let v = phi(1, c(0.0, std::f64::consts::PI));
        assert!(v.re.abs() < 1e-15);
        assert_relative_eq!(v.im, 2.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn phi_recurrence() {
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let r = 1e-2 * (1000f64).powf(i as f64 / 199.0);
            for ang in [0.0, 0.7, std::f64::consts::FRAC_PI_2, 2.4, std::f64::consts::PI, -1.1] {
                let z = Complex64::from_polar(r, ang);
                for l in 0..=3 {
                    let lhs = phi(l + 1, z);
                    let rhs = (phi(l, z) - 1.0 / factorial(l)) / z;
                    worst = worst.max((lhs - rhs).norm() / lhs.norm());
                }
            }
        }
        assert!(worst < 1e-12, "worst relative recurrence defect {worst:e}");
    }

    #[test]
    fn phi_series_and_closed_form_agree_at_switch() {
        for l in 1..=4 {
            for ang in [0.0, 1.0, 2.0, 3.0] {
                let z = Complex64::from_polar(PHI_SERIES_RADIUS, ang);
                let (s, c) = (phi_series(l, z), phi_closed(l, z));
                let d = (s - c).norm() / c.norm();
                assert!(d < 1e-13, "l={l} ang={ang} rel={d:e}");
            }
        }
    }

    #[test]
    fn dump_lists_weights() {
        let text = ButcherTableau::rk33().dump();
        assert!(text.contains("RK(3,3)"));
        assert!(text.contains("0.666667"));
    }
}
