//! Adaptive step size selection from a Richardson local-error estimate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrators::{DiagonalPropagator, Integrator, MethodId};
use crate::tableaux::TableauId;

type C = Complex64;

/// Default safety factor.
pub const SAFETY: f64 = 0.8;
/// Default number of consecutive rejections before giving up.
pub const MAX_REJECTIONS: usize = 50;

/// A one-step method on a complex state vector.
pub trait Stepper {
    /// Convergence order `p`.
    fn order(&self) -> u32;

    fn step(&mut self, t: f64, u: &mut [C], dt: f64) -> Result<()>;

    /// Norm used for the error estimate; the max modulus by default.
    fn error_norm(&mut self, d: &[C]) -> Result<f64> {
        Ok(d.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Weight used in the extrapolant `(2^q ũ − u)/(2^q − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolation {
    /// `q = p + 1`.
    #[default]
    Shifted,
    /// `q = p`, the textbook Richardson weight.
    Classical,
}

impl Extrapolation {
    pub fn exponent(self, p: u32) -> u32 {
        match self {
            Extrapolation::Shifted => p + 1,
            Extrapolation::Classical => p,
        }
    }
}

/// Outcome of one full step and two half steps from the same state.
#[derive(Debug, Clone)]
pub struct Richardson {
    pub full: Vec<C>,
    pub half2: Vec<C>,
    pub extrapolated: Vec<C>,
    /// `‖u_R − u_full‖`.
    pub error: f64,
}

pub fn richardson_step<S: Stepper + ?Sized>(
    stepper: &mut S,
    u: &[C],
    t: f64,
    dt: f64,
    extrapolation: Extrapolation,
) -> Result<Richardson> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut full = u.to_vec();
    stepper.step(t, &mut full, dt)?;
    let mut half2 = u.to_vec();
    stepper.step(t, &mut half2, 0.5 * dt)?;
    stepper.step(t + 0.5 * dt, &mut half2, 0.5 * dt)?;
    let w = 2f64.powi(extrapolation.exponent(stepper.order()) as i32);
    let extrapolated: Vec<C> = half2
        .iter()
        .zip(&full)
        .map(|(h, f)| (h * w - f) / (w - 1.0))
        .collect();
    let diff: Vec<C> = extrapolated.iter().zip(&full).map(|(a, b)| a - b).collect();
    let error = stepper.error_norm(&diff)?;
    Ok(Richardson {
        full,
        half2,
        extrapolated,
        error,
    })
}

/// `min(Δt_max, s Δt (tol/e)^{1/(p+1)})`; `Δt_max` when `e = 0`.
pub fn propose_dt(e: f64, tol: f64, dt: f64, p: u32, s: f64, dt_max: f64) -> f64 {
    if e == 0.0 {
        return dt_max;
    }
    if !e.is_finite() {
        return (0.5 * dt).min(dt_max);
    }
    (s * dt * (tol / e).powf(1.0 / (p as f64 + 1.0))).min(dt_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Accept iff `e ≤ tol` (a non-finite estimate is always rejected).
pub fn accept_or_reject(e: f64, tol: f64) -> Decision {
    if e.is_finite() && e <= tol {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Step size cap used for a method when none is given (coarse grids).
pub fn default_dt_max(method: MethodId) -> f64 {
    if method == MethodId::Lawson(TableauId::Rk32Best) {
        return 30.0;
    }
    match method.order() {
        0..=2 => 11.0,
        3 => 30.0,
        _ => 40.0,
    }
}

/// One controller trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub t: f64,
    pub dt_tried: f64,
    pub error: f64,
    pub accepted: bool,
}

/// Richardson step size controller.
#[derive(Debug, Clone)]
pub struct Controller {
    pub tol: f64,
    pub safety: f64,
    pub dt_max: f64,
    pub max_rejections: usize,
    pub extrapolation: Extrapolation,
    dt: f64,
    accepted: usize,
    rejected: usize,
    trace: Vec<TrialRecord>,
}

impl Controller {
    /// Starts at `Δt = Δt_max`.
    pub fn new(tol: f64, dt_max: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        if !(dt_max > 0.0) || !dt_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt_max must be positive, got {dt_max}"
            )));
        }
        Ok(Self {
            tol,
            safety: SAFETY,
            dt_max,
            max_rejections: MAX_REJECTIONS,
            extrapolation: Extrapolation::default(),
            dt: dt_max,
            accepted: 0,
            rejected: 0,
            trace: Vec::new(),
        })
    }

    pub fn with_initial_dt(mut self, dt: f64) -> Self {
        self.dt = dt.min(self.dt_max);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn trace(&self) -> &[TrialRecord] {
        &self.trace
    }

    /// Advances `u` by one accepted step (retrying from `t` on rejection),
    /// never past `t_end`. Returns the step taken.
    pub fn advance<S: Stepper + ?Sized>(
        &mut self,
        stepper: &mut S,
        t: f64,
        u: &mut [C],
        t_end: f64,
    ) -> Result<f64> {
        let p = stepper.order();
        let mut streak = 0;
        loop {
            let dt = self.dt.min(t_end - t);
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "no time left to advance at t = {t}"
                )));
            }
            let r = richardson_step(stepper, u, t, dt, self.extrapolation)?;
            let decision = accept_or_reject(r.error, self.tol);
            self.trace.push(TrialRecord {
                t,
                dt_tried: dt,
                error: r.error,
                accepted: decision == Decision::Accept,
            });
            self.dt = propose_dt(r.error, self.tol, dt, p, self.safety, self.dt_max);
            match decision {
                Decision::Accept => {
                    u.copy_from_slice(&r.half2);
                    self.accepted += 1;
                    return Ok(dt);
                }
                Decision::Reject => {
                    self.rejected += 1;
                    streak += 1;
                    if streak >= self.max_rejections {
                        return Err(Error::RejectionCap(streak));
                    }
                }
            }
        }
    }
}

/// Integrator plus diagonal linear part plus nonlinear term, as a [`Stepper`].
pub struct OdeStepper<F> {
    pub integrator: Integrator,
    pub prop: DiagonalPropagator,
    pub rhs: F,
}

impl<F> Stepper for OdeStepper<F>
where
    F: FnMut(f64, &[C], &mut [C]) -> Result<()>,
{
    fn order(&self) -> u32 {
        self.integrator.order()
    }

    fn step(&mut self, t: f64, u: &mut [C], dt: f64) -> Result<()> {
        self.integrator
            .step(&mut self.prop, &mut self.rhs, t, u, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(
        lambda: C,
        method: MethodId,
    ) -> OdeStepper<impl FnMut(f64, &[C], &mut [C]) -> Result<()>> {
        OdeStepper {
            integrator: Integrator::new(method),
            prop: DiagonalPropagator::new(vec![C::new(0.0, 0.0)]),
            rhs: move |_: f64, u: &[C], out: &mut [C]| {
                out[0] = lambda * u[0];
                Ok(())
            },
        }
    }

    #[test]
    fn proposals() {
        assert!((propose_dt(1e-2, 1e-2, 1.0, 3, 0.8, 40.0) - 0.8).abs() < 1e-15);
        assert!((propose_dt(1e-2 * 16.0, 1e-2, 1.0, 3, 1.0, 40.0) - 0.5).abs() < 1e-15);
        assert!((propose_dt(1e-2 * 16.0, 1e-2, 1.0, 3, 0.8, 40.0) - 0.4).abs() < 1e-15);
        assert_eq!(propose_dt(0.0, 1e-2, 1.0, 3, 0.8, 40.0), 40.0);
        assert_eq!(propose_dt(1e-30, 1e-2, 1.0, 3, 0.8, 40.0), 40.0);
        assert_eq!(propose_dt(f64::NAN, 1e-2, 1.0, 3, 0.8, 40.0), 0.5);
    }

    #[test]
    fn decisions() {
        assert_eq!(accept_or_reject(0.5e-2, 1e-2), Decision::Accept);
        assert_eq!(accept_or_reject(1e-2, 1e-2), Decision::Accept);
        assert_eq!(accept_or_reject(2e-2, 1e-2), Decision::Reject);
        assert_eq!(accept_or_reject(f64::INFINITY, 1e-2), Decision::Reject);
    }

    #[test]
    fn exact_stepper_has_zero_error() {
        // F ≡ 0: the Lawson step is the exact exponential
        let mut s = OdeStepper {
            integrator: Integrator::new(MethodId::Lawson(TableauId::Rk44)),
            prop: DiagonalPropagator::new(vec![C::new(-0.3, 2.0)]),
            rhs: |_: f64, _: &[C], out: &mut [C]| {
                out[0] = C::new(0.0, 0.0);
                Ok(())
            },
        };
        let r = richardson_step(
            &mut s,
            &[C::new(1.0, 0.5)],
            0.0,
            0.7,
            Extrapolation::Shifted,
        )
        .unwrap();
        assert!(r.error < 1e-15);
    }

    #[test]
    fn error_scales_with_order() {
        for (m, p) in [
            (TableauId::Rk22, 2),
            (TableauId::Rk33, 3),
            (TableauId::Rk44, 4),
        ] {
            let mut s = scalar(C::new(-1.0, 0.5), MethodId::Lawson(m));
            let u = [C::new(1.0, 0.0)];
            let e1 = richardson_step(&mut s, &u, 0.0, 0.1, Extrapolation::Classical)
                .unwrap()
                .error;
            let e2 = richardson_step(&mut s, &u, 0.0, 0.05, Extrapolation::Classical)
                .unwrap()
                .error;
            let ratio = e1 / e2;
            let expect = 2f64.powi(p + 1);
            assert!((ratio / expect - 1.0).abs() < 0.15, "{m:?}: ratio {ratio}");
        }
    }

    #[test]
    fn extrapolation_weights() {
        let mut s = scalar(C::new(-1.0, 0.0), MethodId::Lawson(TableauId::Rk22));
        let u = [C::new(1.0, 0.0)];
        let a = richardson_step(&mut s, &u, 0.0, 0.2, Extrapolation::Shifted).unwrap();
        let b = richardson_step(&mut s, &u, 0.0, 0.2, Extrapolation::Classical).unwrap();
        let d = a.half2[0] - a.full[0];
        assert!((a.error - d.norm() * 8.0 / 7.0).abs() < 1e-15);
        assert!((b.error - d.norm() * 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejection_cap_aborts() {
        // every call kicks harder, so each retry sees a larger estimate
        struct Diverging(f64);
        impl Stepper for Diverging {
            fn order(&self) -> u32 {
                1
            }
            fn step(&mut self, _: f64, u: &mut [C], _: f64) -> Result<()> {
                self.0 += 1.0;
                u[0] += C::new(self.0, 0.0);
                Ok(())
            }
        }
        let mut c = Controller::new(1e-3, 1.0).unwrap();
        let mut u = [C::new(0.0, 0.0)];
        let err = c
            .advance(&mut Diverging(0.0), 0.0, &mut u, 10.0)
            .unwrap_err();
        assert!(matches!(err, Error::RejectionCap(50)));
        assert_eq!(c.rejected(), 50);
        assert_eq!(u[0], C::new(0.0, 0.0));
        assert!(c.trace().windows(2).all(|w| w[1].error > w[0].error));
    }

    #[test]
    fn lands_on_end_time() {
        let mut s = scalar(C::new(-0.1, 0.0), MethodId::Lawson(TableauId::Rk44));
        let mut c = Controller::new(1e-6, 0.75).unwrap();
        let mut u = [C::new(1.0, 0.0)];
        let mut t = 0.0;
        while t < 2.0 {
            t += c.advance(&mut s, t, &mut u, 2.0).unwrap();
        }
        assert_eq!(t, 2.0);
        assert!((u[0].re - (-0.2f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn step_size_tracks_stability_limit() {
        // slow decaying mode plus a fast oscillation seeded at round-off level
        let fast = 10.0;
        let mut s = OdeStepper {
            integrator: Integrator::new(MethodId::Lawson(TableauId::Rk44)),
            prop: DiagonalPropagator::new(vec![C::new(0.0, 0.0); 2]),
            rhs: move |_: f64, u: &[C], out: &mut [C]| {
                out[0] = u[0] * -0.01;
                out[1] = u[1] * C::new(0.0, fast);
                Ok(())
            },
        };
        let mut c = Controller::new(1e-2, 5.0).unwrap();
        let mut u = [C::new(1.0, 0.0), C::new(1e-12, 0.0)];
        let mut t = 0.0;
        let mut dts = Vec::new();
        while t < 400.0 {
            let dt = c.advance(&mut s, t, &mut u, 400.0).unwrap();
            t += dt;
            dts.push(dt);
        }
        // the propagated solution takes two half steps per accepted step
        let tail = &dts[dts.len() / 2..dts.len() - 1];
        let mean = tail.iter().map(|dt| 0.5 * dt).sum::<f64>() / tail.len() as f64;
        let limit = 2.0 * 2f64.sqrt() / fast;
        assert!((mean / limit - 1.0).abs() < 0.2, "mean {mean} vs {limit}");
        assert!(u[1].norm() < 1e-2);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut s = scalar(C::new(-0.5, 3.0), MethodId::CoxMatthews);
            let mut c = Controller::new(1e-5, 1.0).unwrap();
            let mut u = [C::new(1.0, 0.0)];
            let mut t = 0.0;
            while t < 5.0 {
                t += c.advance(&mut s, t, &mut u, 5.0).unwrap();
            }
            (c.trace().to_vec(), u[0])
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dt_max_defaults() {
        assert_eq!(default_dt_max(MethodId::ExpRk22), 11.0);
        assert_eq!(default_dt_max(MethodId::Lawson(TableauId::Rk33)), 30.0);
        assert_eq!(default_dt_max(MethodId::Lawson(TableauId::Rk32Best)), 30.0);
        assert_eq!(default_dt_max(MethodId::Lawson(TableauId::Rk44)), 40.0);
        assert_eq!(default_dt_max(MethodId::Krogstad), 40.0);
    }
}
