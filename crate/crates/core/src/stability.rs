//! Linear stability of Lawson and exponential methods on the test equation
//! `u' = i a u + λ u`, where `i a` is the part integrated exactly and `λ`
//! the part treated explicitly.
//!
//! All arguments are the dimensionless products `aΔt` and `z = λΔt`.

use num_complex::Complex64;
use std::convert::Infallible;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrators::{DiagonalPropagator, Integrator, MethodId};
use crate::par;
use crate::tableaux::ButcherTableau;

type C = Complex64;

/// Sample spacing used before bisecting a stability boundary.
pub const SCAN_STEP: f64 = 1e-3;
/// Default bisection tolerance.
pub const BISECT_TOL: f64 = 1e-6;
/// Slack on `|R| ≤ 1` that absorbs round-off on the boundary itself.
const ROUNDOFF: f64 = 1e-14;

/// Amplification of one method at fixed `aΔt`, evaluated for many `z` at once
/// by stepping a batch of scalar test problems.
pub struct Amplifier {
    method: MethodId,
    stepper: Integrator,
    a_dt: f64,
    props: Vec<(usize, DiagonalPropagator)>,
}

impl Amplifier {
    pub fn new(method: MethodId, a_dt: f64) -> Self {
        Self {
            method,
            stepper: Integrator::new(method),
            a_dt,
            props: Vec::new(),
        }
    }

    pub fn method(&self) -> MethodId {
        self.method
    }

    fn propagator(&mut self, n: usize) -> &mut DiagonalPropagator {
        let i = match self.props.iter().position(|(len, _)| *len == n) {
            Some(i) => i,
            None => {
                let sym = C::new(0.0, self.a_dt);
                self.props
                    .push((n, DiagonalPropagator::with_repeat(vec![sym], n)));
                self.props.len() - 1
            }
        };
        &mut self.props[i].1
    }

    /// Complex amplification factors `R(aΔt, z)` for each `z`.
    pub fn factors(&mut self, zs: &[C]) -> Vec<C> {
        let mut u = vec![C::new(1.0, 0.0); zs.len()];
        if zs.is_empty() {
            return u;
        }
        let mut stepper = self.stepper.clone();
        let prop = self.propagator(zs.len());
        let mut rhs = |_: f64, x: &[C], out: &mut [C]| -> Result<(), Infallible> {
            for ((o, xi), zi) in out.iter_mut().zip(x).zip(zs) {
                *o = zi * xi;
            }
            Ok(())
        };
        let _ = stepper.step(prop, &mut rhs, 0.0, &mut u, 1.0);
        self.stepper = stepper;
        u
    }

    /// `|R(aΔt, z)|` for each `z`.
    pub fn moduli(&mut self, zs: &[C]) -> Vec<f64> {
        self.factors(zs).into_iter().map(|r| r.norm()).collect()
    }

    pub fn modulus(&mut self, z: C) -> f64 {
        self.moduli(&[z])[0]
    }
}

/// `|R|` after one step of `method` on `u' = (i aΔt + z) u` with unit step.
pub fn amplification(method: MethodId, a_dt: f64, z: C) -> f64 {
    Amplifier::new(method, a_dt).modulus(z)
}

/// Refines a bracketed boundary: `inside(lo)` holds, `inside(hi)` does not.
fn bisect<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, mut inside: F) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Length of the initial segment `[0, r]` on which `inside` holds, sampled
/// with `step` up to `r_max` and then bisected. `None` if it never fails.
/// A failure at the first sample means the segment is empty at this
/// resolution and gives zero.
fn first_exit<F: FnMut(f64) -> bool>(
    step: f64,
    r_max: f64,
    tol: f64,
    mut inside: F,
) -> Option<f64> {
    let n = (r_max / step).ceil() as usize;
    let mut prev = 0.0;
    for k in 1..=n {
        let r = (k as f64 * step).min(r_max);
        if !inside(r) {
            if k == 1 {
                return Some(0.0);
            }
            return Some(bisect(prev, r, tol, inside));
        }
        prev = r;
    }
    None
}

/// Largest `y` with `|φ(iy')| ≤ 1` on `[0, y]` for the RK stability
/// polynomial of `tableau`. Zero if the imaginary axis is excluded.
pub fn ymax_lawson(tableau: &ButcherTableau, tol: f64) -> f64 {
    let r_max = tableau.stages() as f64 + 1.0;
    let inside = |y: f64| tableau.stability_function(C::new(0.0, y)).norm() <= 1.0 + ROUNDOFF;
    first_exit(SCAN_STEP, r_max, tol, inside).unwrap_or(r_max)
}

/// Settings for the relaxed imaginary-axis scan of exponential methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpScanConfig {
    /// `aΔt` samples; negative values are covered by conjugate symmetry.
    pub a_dt: Vec<f64>,
    pub y_step: f64,
    /// Upper end of the `y` search; reported as the bound if never left.
    pub y_limit: f64,
    pub tol: f64,
}

impl ExpScanConfig {
    /// Uniform grid `0, step, ..., a_max`.
    pub fn uniform(a_max: f64, a_step: f64) -> Self {
        let n = (a_max / a_step).round() as usize;
        Self {
            a_dt: (0..=n).map(|k| k as f64 * a_step).collect(),
            y_step: SCAN_STEP,
            y_limit: 6.0,
            tol: BISECT_TOL,
        }
    }
}

impl Default for ExpScanConfig {
    fn default() -> Self {
        Self::uniform(40.0, 0.01)
    }
}

/// Per-`aΔt` imaginary-axis data of a stability scan.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityScan {
    pub method: MethodId,
    pub epsilon: f64,
    pub a_dt: Vec<f64>,
    pub y_plus: Vec<f64>,
    /// Stored as non-positive values.
    pub y_minus: Vec<f64>,
    pub y_max: Vec<f64>,
}

impl StabilityScan {
    /// `min` over the `aΔt` grid of the symmetric interval half-length.
    pub fn min_y_max(&self) -> f64 {
        self.y_max.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the binding `aΔt`.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &y) in self.y_max.iter().enumerate() {
            if y < self.y_max[best] {
                best = i;
            }
        }
        best
    }

    /// CSV with columns `a_dt,y_plus,y_minus,y_max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a_dt,y_plus,y_minus,y_max\n");
        for i in 0..self.a_dt.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.a_dt[i], self.y_plus[i], self.y_minus[i], self.y_max[i]
            ));
        }
        out
    }
}

/// `(y₊, y₋)` at one `aΔt`: the imaginary-axis segment `i(y₋, y₊)` through
/// the origin contained in `D_ε = {|R| ≤ 1 + ε}`.
pub fn imaginary_interval(
    method: MethodId,
    a_dt: f64,
    epsilon: f64,
    cfg: &ExpScanConfig,
) -> (f64, f64) {
    let mut amp = Amplifier::new(method, a_dt);
    let bound = 1.0 + epsilon + ROUNDOFF;
    let n = (cfg.y_limit / cfg.y_step).ceil() as usize;
    let mut side = |sign: f64| {
        let zs: Vec<C> = (1..=n)
            .map(|k| C::new(0.0, sign * (k as f64 * cfg.y_step).min(cfg.y_limit)))
            .collect();
        let moduli = amp.moduli(&zs);
        match moduli.iter().position(|&m| !(m <= bound)) {
            None => cfg.y_limit,
            Some(0) => 0.0,
            Some(k) => {
                let lo = k as f64 * cfg.y_step;
                let hi = ((k + 1) as f64 * cfg.y_step).min(cfg.y_limit);
                bisect(lo, hi, cfg.tol, |y| {
                    amp.modulus(C::new(0.0, sign * y)) <= bound
                })
            }
        }
    };
    let plus = side(1.0);
    let minus = side(-1.0);
    (plus, -minus)
}

/// Relaxed CFL number of an exponential (or Lawson) method: the smallest,
/// over the `aΔt` grid, symmetric interval `i(−y, y) ⊂ D_ε`.
pub fn ymax_exp(
    method: MethodId,
    epsilon: f64,
    cfg: &ExpScanConfig,
) -> Result<(f64, StabilityScan)> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if cfg.a_dt.is_empty() || !(cfg.y_step > 0.0) || !(cfg.y_limit > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter(
            "empty or degenerate stability scan grid".into(),
        ));
    }
    let pairs = par::map_collect(cfg.a_dt.len(), |i| {
        imaginary_interval(method, cfg.a_dt[i], epsilon, cfg)
    });
    let y_plus: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y_minus: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let y_max = pairs.iter().map(|&(p, m)| p.min(-m)).collect();
    let scan = StabilityScan {
        method,
        epsilon,
        a_dt: cfg.a_dt.clone(),
        y_plus,
        y_minus,
        y_max,
    };
    Ok((scan.min_y_max(), scan))
}

/// Literal LW5 symbol `μ_m` of the frozen-weight fifth-order upwind
/// derivative, `(∂_v f)^_m ≈ μ_m f^_m`, with `θ = mπΔv/v_max`.
pub fn lw5_symbol(m: i64, dv: f64, v_max: f64) -> C {
    lw5_symbol_theta(m as f64 * PI * dv / v_max) / dv
}

/// `Δv·μ` as a function of the phase `θ`.
pub fn lw5_symbol_theta(theta: f64) -> C {
    let e = |k: f64| C::from_polar(1.0, k * theta);
    -e(-3.0) / 30.0 + e(-2.0) / 4.0 - e(-1.0) + 1.0 / 3.0 + e(1.0) / 2.0 - e(2.0) / 20.0
}

/// Eigenvalue of the semi-discrete operator `−∂_v` for mode `m`; has
/// non-positive real part.
pub fn lw5_eigenvalue(m: i64, dv: f64, v_max: f64) -> C {
    -lw5_symbol(m, dv, v_max)
}

/// First crossing of `|φ(z)| = 1` along the ray `z = r e^{iα}`.
pub fn boundary_radius(tableau: &ButcherTableau, angle: f64, r_max: f64, tol: f64) -> Result<f64> {
    let dir = C::from_polar(1.0, angle);
    let inside = |r: f64| tableau.stability_function(dir * r).norm() <= 1.0 + ROUNDOFF;
    first_exit(SCAN_STEP, r_max, tol, inside).ok_or(Error::RayMiss {
        angle,
        radius: r_max,
    })
}

/// Default ray search radius for RK stability boundaries.
pub const RAY_LIMIT: f64 = 10.0;

/// Stability boundary sampled along rays at the given angles, closed by
/// repeating the first point.
pub fn boundary_trace(tableau: &ButcherTableau, angles: &[f64]) -> Result<Vec<C>> {
    let radii = par::map_collect(angles.len(), |i| {
        boundary_radius(tableau, angles[i], RAY_LIMIT, BISECT_TOL)
    });
    let mut pts = Vec::with_capacity(angles.len() + 1);
    for (r, &a) in radii.into_iter().zip(angles) {
        pts.push(C::from_polar(r?, a));
    }
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    Ok(pts)
}

/// One row of the σ table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSample {
    /// Phase `θ` of the Fourier mode.
    pub theta: f64,
    /// Argument of the normalized eigenvalue `Δv·λ(θ)`.
    pub angle: f64,
    /// Stretching factor admissible at this eigenvalue.
    pub sigma: f64,
}

/// Result of the σ scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaScan {
    pub sigma: f64,
    pub samples: Vec<SigmaSample>,
}

impl SigmaScan {
    /// CSV with columns `angle,sigma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle,sigma\n");
        for s in &self.samples {
            out.push_str(&format!("{:.17e},{:.17e}\n", s.angle, s.sigma));
        }
        out
    }
}

/// Largest factor `σ` such that every scaled LW5 eigenvalue `σ Δv λ(θ)`
/// lies in the RK stability domain of `tableau`.
///
/// The eigenvalue locus is sampled at `n_angles` phases in `[−π, π]`; for
/// each, the boundary radius along the eigenvalue's direction divided by its
/// modulus gives `σ(θ)`, and the minimum is returned.
pub fn sigma_lw5(tableau: &ButcherTableau, n_angles: usize, tol: f64) -> Result<SigmaScan> {
    if n_angles < 64 {
        return Err(Error::InvalidParameter(format!(
            "need at least 64 angles, got {n_angles}"
        )));
    }
    // even count keeps θ = 0 (the annihilated constant mode) off the grid
    let n = n_angles + n_angles % 2;
    let thetas: Vec<f64> = (0..n)
        .map(|k| -PI + (k as f64 + 0.5) * 2.0 * PI / n as f64)
        .collect();
    let rows = par::map_collect(n, |k| -> Result<SigmaSample> {
        let lam = -lw5_symbol_theta(thetas[k]);
        let angle = lam.arg();
        let r = boundary_radius(tableau, angle, RAY_LIMIT, tol)?;
        Ok(SigmaSample {
            theta: thetas[k],
            angle,
            sigma: r / lam.norm(),
        })
    });
    let samples = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sigma = samples
        .iter()
        .map(|s| s.sigma)
        .fold(f64::INFINITY, f64::min);
    Ok(SigmaScan { sigma, samples })
}
