//! Browser demo bindings: RK stability boundaries, the relaxed `y_max(aΔt)`
//! curves of the exponential methods, and the LW5 σ scan.
//!
//! Everything is returned as flat `f64` arrays so the page can draw it on a
//! canvas without any glue beyond the generated bindings.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use kinetic_core::stability::{
    boundary_trace, lw5_symbol_theta, sigma_lw5, ymax_exp, ymax_lawson, ExpScanConfig, BISECT_TOL,
    SCAN_STEP,
};
use kinetic_core::{MethodId, TableauId};
use wasm_bindgen::prelude::*;

fn tableau(key: &str) -> Result<TableauId, String> {
    TableauId::from_key(key).ok_or_else(|| format!("unknown tableau `{key}`"))
}

/// Keys accepted by the tableau arguments.
#[wasm_bindgen]
pub fn tableau_keys() -> Vec<String> {
    TableauId::ALL.iter().map(|t| t.key().to_string()).collect()
}

/// Names of the exponential methods accepted by [`ymax_curve`].
#[wasm_bindgen]
pub fn exponential_methods() -> Vec<String> {
    MethodId::EXPONENTIAL
        .iter()
        .map(|m| m.name().to_string())
        .collect()
}

/// Boundary of `{|R(z)| ≤ 1}` as interleaved `re, im` pairs (closed).
#[wasm_bindgen]
pub fn stability_boundary(key: &str, points: usize) -> Result<Vec<f64>, String> {
    if points < 3 {
        return Err("need at least 3 points".into());
    }
    let angles: Vec<f64> = (0..points)
        .map(|k| 2.0 * PI * k as f64 / points as f64)
        .collect();
    let pts = boundary_trace(&tableau(key)?.tableau(), &angles).map_err(|e| e.to_string())?;
    Ok(pts.iter().flat_map(|z| [z.re, z.im]).collect())
}

/// Imaginary-axis CFL number of a Lawson tableau.
#[wasm_bindgen]
pub fn lawson_ymax(key: &str) -> Result<f64, String> {
    Ok(ymax_lawson(&tableau(key)?.tableau(), BISECT_TOL))
}

/// Relaxed scan over `aΔt ∈ [0, a_max]`.
#[wasm_bindgen]
pub struct YmaxCurve {
    a_dt: Vec<f64>,
    y_plus: Vec<f64>,
    y_minus: Vec<f64>,
    y_max: Vec<f64>,
    min: f64,
    argmin: f64,
}

#[wasm_bindgen]
impl YmaxCurve {
    pub fn a_dt(&self) -> Vec<f64> {
        self.a_dt.clone()
    }

    pub fn y_plus(&self) -> Vec<f64> {
        self.y_plus.clone()
    }

    /// Non-positive.
    pub fn y_minus(&self) -> Vec<f64> {
        self.y_minus.clone()
    }

    pub fn y_max(&self) -> Vec<f64> {
        self.y_max.clone()
    }

    /// `min_a y_max(a)`.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// `aΔt` at which the minimum is attained.
    pub fn argmin(&self) -> f64 {
        self.argmin
    }
}

#[wasm_bindgen]
pub fn ymax_curve(
    method: &str,
    epsilon: f64,
    a_max: f64,
    a_step: f64,
) -> Result<YmaxCurve, String> {
    let m: MethodId = method
        .parse()
        .map_err(|e: kinetic_core::Error| e.to_string())?;
    if !(a_step > 0.0) || !(a_max >= 0.0) || a_max / a_step > 1e5 {
        return Err("need a_step > 0, a_max >= 0 and at most 1e5 samples".into());
    }
    let mut cfg = ExpScanConfig::uniform(a_max, a_step);
    cfg.y_step = SCAN_STEP;
    let (min, scan) = ymax_exp(m, epsilon, &cfg).map_err(|e| e.to_string())?;
    Ok(YmaxCurve {
        argmin: scan.a_dt[scan.argmin()],
        a_dt: scan.a_dt,
        y_plus: scan.y_plus,
        y_minus: scan.y_minus,
        y_max: scan.y_max,
        min,
    })
}

/// LW5 σ scan of a tableau.
#[wasm_bindgen]
pub struct SigmaResult {
    sigma: f64,
    angles: Vec<f64>,
    sigmas: Vec<f64>,
    locus: Vec<f64>,
}

#[wasm_bindgen]
impl SigmaResult {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Eigenvalue arguments, one per sample.
    pub fn angles(&self) -> Vec<f64> {
        self.angles.clone()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.sigmas.clone()
    }

    /// The LW5 eigenvalue locus scaled by σ, as interleaved `re, im`.
    pub fn locus(&self) -> Vec<f64> {
        self.locus.clone()
    }
}

#[wasm_bindgen]
pub fn sigma_scan(key: &str, n_angles: usize) -> Result<SigmaResult, String> {
    let scan =
        sigma_lw5(&tableau(key)?.tableau(), n_angles, BISECT_TOL).map_err(|e| e.to_string())?;
    let locus = scan
        .samples
        .iter()
        .flat_map(|s| {
            let z = -lw5_symbol_theta(s.theta) * scan.sigma;
            [z.re, z.im]
        })
        .collect();
    Ok(SigmaResult {
        sigma: scan.sigma,
        angles: scan.samples.iter().map(|s| s.angle).collect(),
        sigmas: scan.samples.iter().map(|s| s.sigma).collect(),
        locus,
    })
}
