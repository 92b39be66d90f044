//! Lawson and exponential Runge-Kutta steppers for `u' = A u + F(t, u)` with
//! `A` diagonal in the chosen basis.
//!
//! State vectors are flat complex slices. The linear part is described by a
//! [`DiagonalPropagator`]: one complex symbol per block of `repeat`
//! consecutive entries, so `(A u)[i] = symbols[i / repeat] * u[i]`. This
//! covers spectral layouts where the symbol only depends on a few of the
//! axes (e.g. `-i v k` broadcast over a radial/poloidal plane).

use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::par;
use crate::tableaux::{phi, ButcherTableau, TableauId};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const CHUNK: usize = 4096;

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Lawson(TableauId),
    ExpEuler,
    ExpRk22,
    Krogstad,
    CoxMatthews,
    HochbruckOstermann,
}

impl MethodId {
    pub const ALL: [MethodId; 9] = [
        MethodId::Lawson(TableauId::Rk44),
        MethodId::Lawson(TableauId::Rk33),
        MethodId::Lawson(TableauId::Rk32Best),
        MethodId::Lawson(TableauId::Rk22),
        MethodId::ExpEuler,
        MethodId::ExpRk22,
        MethodId::Krogstad,
        MethodId::CoxMatthews,
        MethodId::HochbruckOstermann,
    ];

    /// The four φ-based exponential Runge-Kutta methods (excluding Euler).
    pub const EXPONENTIAL: [MethodId; 4] = [
        MethodId::ExpRk22,
        MethodId::Krogstad,
        MethodId::CoxMatthews,
        MethodId::HochbruckOstermann,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Lawson(TableauId::Rk44) => "lawson_rk44",
            MethodId::Lawson(TableauId::Rk33) => "lawson_rk33",
            MethodId::Lawson(TableauId::Rk32Best) => "lawson_rk32best",
            MethodId::Lawson(TableauId::Rk22) => "lawson_rk22",
            MethodId::ExpEuler => "exp_euler",
            MethodId::ExpRk22 => "exprk22",
            MethodId::Krogstad => "krogstad",
            MethodId::CoxMatthews => "cox_matthews",
            MethodId::HochbruckOstermann => "hochbruck_ostermann",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            MethodId::Lawson(t) => t.tableau().order,
            MethodId::ExpEuler => 1,
            MethodId::ExpRk22 => 2,
            MethodId::Krogstad | MethodId::CoxMatthews | MethodId::HochbruckOstermann => 4,
        }
    }

    pub fn stages(self) -> usize {
        match self {
            MethodId::Lawson(t) => t.tableau().stages(),
            MethodId::ExpEuler => 1,
            MethodId::ExpRk22 => 2,
            MethodId::Krogstad | MethodId::CoxMatthews => 4,
            MethodId::HochbruckOstermann => 5,
        }
    }

    pub fn is_lawson(self) -> bool {
        matches!(self, MethodId::Lawson(_))
    }

    /// Stage nodes c.
    pub fn nodes(self) -> Vec<f64> {
        match self {
            MethodId::Lawson(t) => t.tableau().c,
            MethodId::ExpEuler => vec![0.0],
            MethodId::ExpRk22 => vec![0.0, 1.0],
            MethodId::Krogstad | MethodId::CoxMatthews => vec![0.0, 0.5, 0.5, 1.0],
            MethodId::HochbruckOstermann => vec![0.0, 0.5, 0.5, 1.0, 0.5],
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match key.as_str() {
            "cm" | "coxmatthews" => "cox_matthews",
            "ho" | "hochbruckostermann" => "hochbruck_ostermann",
            "expeuler" => "exp_euler",
            "exp_rk22" => "exprk22",
            other => other,
        };
        MethodId::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Coefficients a_{ℓj}(z), b_j(z) of an exponential RK method at one symbol.
#[derive(Debug, Clone, Copy)]
pub struct ExpCoefficients {
    pub a: [[C; 5]; 5],
    pub b: [C; 5],
}

/// Evaluates the φ-combinations of an exponential method at `z = Δt·d`.
pub fn exp_coefficients(method: MethodId, z: C) -> Result<ExpCoefficients> {
    let mut a = [[ZERO; 5]; 5];
    let mut b = [ZERO; 5];
    let h = 0.5 * z;
    match method {
        MethodId::ExpEuler => {
            b[0] = phi(1, z);
        }
        MethodId::ExpRk22 => {
            let (p1, p2) = (phi(1, z), phi(2, z));
            a[1][0] = p1;
            b[0] = p1 - p2;
            b[1] = p2;
        }
        MethodId::Krogstad => {
            let (p1, p2, p3) = (phi(1, z), phi(2, z), phi(3, z));
            let (q1, q2) = (phi(1, h), phi(2, h));
            a[1][0] = 0.5 * q1;
            a[2][0] = 0.5 * q1 - q2;
            a[2][1] = q2;
            a[3][0] = p1 - 2.0 * p2;
            a[3][2] = 2.0 * p2;
            b[0] = p1 - 3.0 * p2 + 4.0 * p3;
            b[1] = 2.0 * p2 - 4.0 * p3;
            b[2] = 2.0 * p2 - 4.0 * p3;
            b[3] = -p2 + 4.0 * p3;
        }
        MethodId::CoxMatthews => {
            let (p1, p2, p3) = (phi(1, z), phi(2, z), phi(3, z));
            let q1 = phi(1, h);
            a[1][0] = 0.5 * q1;
            a[2][1] = 0.5 * q1;
            a[3][0] = 0.5 * q1 * (h.exp() - 1.0);
            a[3][2] = q1;
            b[0] = p1 - 3.0 * p2 + 4.0 * p3;
            b[1] = 2.0 * p2 - 4.0 * p3;
            b[2] = 2.0 * p2 - 4.0 * p3;
            b[3] = 4.0 * p3 - p2;
        }
        MethodId::HochbruckOstermann => {
            let (p1, p2, p3) = (phi(1, z), phi(2, z), phi(3, z));
            let (q1, q2, q3) = (phi(1, h), phi(2, h), phi(3, h));
            a[1][0] = 0.5 * q1;
            a[2][0] = 0.5 * q1 - q2;
            a[2][1] = q2;
            a[3][0] = p1 - 2.0 * p2;
            a[3][1] = p2;
            a[3][2] = p2;
            let a52 = 0.5 * q2 - p3 + 0.25 * p2 - 0.5 * q3;
            let a54 = 0.25 * q2 - a52;
            a[4][0] = 0.5 * q1 - 2.0 * a52 - a54;
            a[4][1] = a52;
            a[4][2] = a52;
            a[4][3] = a54;
            b[0] = p1 - 3.0 * p2 + 4.0 * p3;
            b[3] = -p2 + 4.0 * p3;
            // weights must sum to φ1; 4φ2 − 8φ3 is the consistent last weight
            b[4] = 4.0 * p2 - 8.0 * p3;
        }
        MethodId::Lawson(_) => {
            return Err(Error::UnsupportedMethod {
                method: method.name().into(),
                reason: "Lawson methods have no φ-coefficient tableau".into(),
            })
        }
    }
    Ok(ExpCoefficients { a, b })
}

#[derive(Debug, Clone)]
struct CacheEntry {
    dt: f64,
    /// exp(c Δt d) tables keyed by c.
    exps: Vec<(f64, Vec<C>)>,
    coeffs: Option<(MethodId, Vec<ExpCoefficients>)>,
}

impl CacheEntry {
    fn exp_table(&self, c: f64) -> &[C] {
        self.exps
            .iter()
            .find(|(key, _)| *key == c)
            .map(|(_, t)| t.as_slice())
            .expect("exponential table prepared before use")
    }
}

/// Diagonal linear operator with cached exponential / φ tables.
#[derive(Debug, Clone)]
pub struct DiagonalPropagator {
    symbols: Vec<C>,
    repeat: usize,
    cache: Vec<CacheEntry>,
}

const CACHE_SLOTS: usize = 4;

impl DiagonalPropagator {
    /// One symbol per entry.
    pub fn new(symbols: Vec<C>) -> Self {
        Self::with_repeat(symbols, 1)
    }

    /// Each symbol applies to `repeat` consecutive entries.
    pub fn with_repeat(symbols: Vec<C>, repeat: usize) -> Self {
        assert!(repeat > 0, "repeat must be positive");
        Self {
            symbols,
            repeat,
            cache: Vec::new(),
        }
    }

    pub fn symbols(&self) -> &[C] {
        &self.symbols
    }

    pub fn repeat(&self) -> usize {
        self.repeat
    }

    /// Number of state entries the operator acts on.
    pub fn len(&self) -> usize {
        self.symbols.len() * self.repeat
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Applies `exp(c Δt A)` in place.
    pub fn apply_exp(&mut self, c: f64, dt: f64, u: &mut [C]) {
        let slot = self.prepare(dt, &[c], None).expect("exp tables never fail");
        let table = self.cache[slot].exp_table(c);
        let rep = self.repeat;
        par::for_each_chunk_mut(u, block_len(rep), |off, chunk| {
            for (k, x) in chunk.iter_mut().enumerate() {
                *x *= table[(off + k) / rep];
            }
        });
    }

    /// Cached `exp(c Δt d)` table (one entry per symbol).
    pub fn exp_values(&mut self, c: f64, dt: f64) -> &[C] {
        let slot = self.prepare(dt, &[c], None).expect("exp tables never fail");
        self.cache[slot].exp_table(c)
    }

    /// Cached φ-coefficients for an exponential method.
    pub fn exp_coefficient_values(
        &mut self,
        method: MethodId,
        dt: f64,
    ) -> Result<&[ExpCoefficients]> {
        let slot = self.prepare(dt, &[], Some(method))?;
        Ok(&self.cache[slot].coeffs.as_ref().expect("prepared").1)
    }

    fn prepare(&mut self, dt: f64, exps: &[f64], method: Option<MethodId>) -> Result<usize> {
        let slot = match self.cache.iter().position(|e| e.dt == dt) {
            Some(i) => i,
            None => {
                if self.cache.len() >= CACHE_SLOTS {
                    self.cache.remove(0);
                }
                self.cache.push(CacheEntry {
                    dt,
                    exps: Vec::new(),
                    coeffs: None,
                });
                self.cache.len() - 1
            }
        };
        let symbols = &self.symbols;
        let entry = &mut self.cache[slot];
        for &c in exps {
            if !entry.exps.iter().any(|(key, _)| *key == c) {
                let table = symbols.iter().map(|&d| (c * dt * d).exp()).collect();
                entry.exps.push((c, table));
            }
        }
        if let Some(m) = method {
            if entry.coeffs.as_ref().map(|(cm, _)| *cm) != Some(m) {
                let table = symbols
                    .iter()
                    .map(|&d| exp_coefficients(m, dt * d))
                    .collect::<Result<Vec<_>>>()?;
                entry.coeffs = Some((m, table));
            }
        }
        Ok(slot)
    }
}

fn block_len(rep: usize) -> usize {
    rep * (CHUNK / rep).max(1)
}

/// Reusable stepper with preallocated stage storage.
#[derive(Debug, Clone)]
pub struct Integrator {
    method: MethodId,
    tableau: Option<ButcherTableau>,
    stage_f: Vec<Vec<C>>,
    stage_u: Vec<C>,
}

impl Integrator {
    pub fn new(method: MethodId) -> Self {
        let tableau = match method {
            MethodId::Lawson(t) => Some(t.tableau()),
            _ => None,
        };
        Self {
            method,
            tableau,
            stage_f: Vec::new(),
            stage_u: Vec::new(),
        }
    }

    /// Lawson integrator for an arbitrary (possibly unregistered) tableau.
    pub fn with_tableau(tableau: ButcherTableau) -> Result<Self> {
        tableau.validate()?;
        Ok(Self {
            method: MethodId::Lawson(TableauId::Rk44),
            tableau: Some(tableau),
            stage_f: Vec::new(),
            stage_u: Vec::new(),
        })
    }

    pub fn method(&self) -> MethodId {
        self.method
    }

    pub fn order(&self) -> u32 {
        match &self.tableau {
            Some(t) => t.order,
            None => self.method.order(),
        }
    }

    fn ensure_storage(&mut self, stages: usize, n: usize) {
        if self.stage_f.len() != stages || self.stage_u.len() != n {
            self.stage_f = vec![vec![ZERO; n]; stages];
            self.stage_u = vec![ZERO; n];
        }
    }

    /// Advances `u` from `t` to `t + dt` in place.
    pub fn step<E, F>(
        &mut self,
        prop: &mut DiagonalPropagator,
        rhs: &mut F,
        t: f64,
        u: &mut [C],
        dt: f64,
    ) -> Result<(), E>
    where
        F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
    {
        assert_eq!(
            u.len(),
            prop.len(),
            "state length must match the propagator"
        );
        assert!(dt > 0.0, "time step must be positive");
        if self.tableau.is_some() {
            self.lawson_step(prop, rhs, t, u, dt)
        } else {
            self.exponential_step(prop, rhs, t, u, dt)
        }
    }

    fn lawson_step<E, F>(
        &mut self,
        prop: &mut DiagonalPropagator,
        rhs: &mut F,
        t: f64,
        u: &mut [C],
        dt: f64,
    ) -> Result<(), E>
    where
        F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
    {
        let tab = self.tableau.clone().expect("Lawson stepper has a tableau");
        let s = tab.stages();
        self.ensure_storage(s, u.len());

        let mut exps = vec![1.0];
        for l in 0..s {
            exps.push(tab.c[l]);
            exps.push(1.0 - tab.c[l]);
            for j in 0..l {
                exps.push(tab.c[l] - tab.c[j]);
            }
        }
        let slot = prop
            .prepare(dt, &exps, None)
            .expect("exp tables never fail");
        let rep = prop.repeat;

        for l in 0..s {
            let terms: Vec<(usize, f64, &[C])> = (0..l)
                .filter(|&j| tab.a(l, j) != 0.0)
                .map(|j| {
                    (
                        j,
                        tab.a(l, j),
                        prop.cache[slot].exp_table(tab.c[l] - tab.c[j]),
                    )
                })
                .collect();
            let e_l = prop.cache[slot].exp_table(tab.c[l]);
            let fs = &self.stage_f;
            let un: &[C] = u;
            par::for_each_chunk_mut(&mut self.stage_u, block_len(rep), |off, out| {
                for (k, x) in out.iter_mut().enumerate() {
                    let i = off + k;
                    let sym = i / rep;
                    let mut acc = e_l[sym] * un[i];
                    for (j, alj, e) in &terms {
                        acc += dt * alj * e[sym] * fs[*j][i];
                    }
                    *x = acc;
                }
            });
            let (_, rest) = self.stage_f.split_at_mut(l);
            rhs(t + tab.c[l] * dt, &self.stage_u, &mut rest[0])?;
        }

        let weights: Vec<(usize, f64, &[C])> = (0..s)
            .filter(|&j| tab.b[j] != 0.0)
            .map(|j| (j, tab.b[j], prop.cache[slot].exp_table(1.0 - tab.c[j])))
            .collect();
        let e_full = prop.cache[slot].exp_table(1.0);
        let fs = &self.stage_f;
        par::for_each_chunk_mut(u, block_len(rep), |off, out| {
            for (k, x) in out.iter_mut().enumerate() {
                let i = off + k;
                let sym = i / rep;
                let mut acc = e_full[sym] * *x;
                for (j, bj, e) in &weights {
                    acc += dt * bj * e[sym] * fs[*j][i];
                }
                *x = acc;
            }
        });
        Ok(())
    }

    fn exponential_step<E, F>(
        &mut self,
        prop: &mut DiagonalPropagator,
        rhs: &mut F,
        t: f64,
        u: &mut [C],
        dt: f64,
    ) -> Result<(), E>
    where
        F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
    {
        let method = self.method;
        let s = method.stages();
        let c = method.nodes();
        self.ensure_storage(s, u.len());
        let slot = prop
            .prepare(dt, &[], Some(method))
            .expect("exponential methods have coefficient tables");
        let rep = prop.repeat;
        let symbols = &prop.symbols;
        let coeffs = &prop.cache[slot].coeffs.as_ref().expect("prepared").1;

        rhs(t, u, &mut self.stage_f[0])?;
        for l in 1..s {
            let fs = &self.stage_f;
            let un: &[C] = u;
            par::for_each_chunk_mut(&mut self.stage_u, block_len(rep), |off, out| {
                for (k, x) in out.iter_mut().enumerate() {
                    let i = off + k;
                    let sym = i / rep;
                    let au = symbols[sym] * un[i];
                    let row = &coeffs[sym].a[l];
                    let mut acc = ZERO;
                    for j in 0..l {
                        acc += row[j] * (fs[j][i] + au);
                    }
                    *x = un[i] + dt * acc;
                }
            });
            let (_, rest) = self.stage_f.split_at_mut(l);
            rhs(t + c[l] * dt, &self.stage_u, &mut rest[0])?;
        }

        let fs = &self.stage_f;
        par::for_each_chunk_mut(u, block_len(rep), |off, out| {
            for (k, x) in out.iter_mut().enumerate() {
                let i = off + k;
                let sym = i / rep;
                let au = symbols[sym] * *x;
                let b = &coeffs[sym].b;
                let mut acc = ZERO;
                for j in 0..s {
                    acc += b[j] * (fs[j][i] + au);
                }
                *x += dt * acc;
            }
        });
        Ok(())
    }
}

/// One Lawson step driven by an arbitrary explicit tableau.
pub fn lawson_step<E, F>(
    tableau: &ButcherTableau,
    prop: &mut DiagonalPropagator,
    mut rhs: F,
    t: f64,
    u: &mut [C],
    dt: f64,
) -> Result<(), E>
where
    F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
{
    let mut stepper = Integrator::with_tableau(tableau.clone()).expect("valid tableau");
    stepper.step(prop, &mut rhs, t, u, dt)
}

/// One step of an exponential Runge-Kutta method.
pub fn exp_step<E, F>(
    method: MethodId,
    prop: &mut DiagonalPropagator,
    mut rhs: F,
    t: f64,
    u: &mut [C],
    dt: f64,
) -> Result<(), E>
where
    F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
{
    assert!(!method.is_lawson(), "exp_step expects a φ-based method");
    Integrator::new(method).step(prop, &mut rhs, t, u, dt)
}

/// Exponential Euler: `u ← e^{ΔtA} u + Δt φ1(ΔtA) F(u)`.
pub fn exp_euler_step<E, F>(
    prop: &mut DiagonalPropagator,
    rhs: F,
    t: f64,
    u: &mut [C],
    dt: f64,
) -> Result<(), E>
where
    F: FnMut(f64, &[C], &mut [C]) -> Result<(), E>,
{
    exp_step(MethodId::ExpEuler, prop, rhs, t, u, dt)
}
