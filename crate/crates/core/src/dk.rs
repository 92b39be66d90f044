//! 4D slab drift-kinetic model in `(r, θ, z, v)` with a quasi-neutrality
//! potential, advanced with `−v ∂_z` as the diagonal linear part.
//!
//! The state is `f̂[k_z][v][r][θ]`: Fourier in z, physical in the rest.
//! The two r-boundary rows are held at their boundary values (`f_eq` for the
//! direct formulation, zero for the perturbation formulation).

use num_complex::Complex64;
use std::f64::consts::PI;
use std::str::FromStr;

use crate::control::{Controller, Stepper, TrialRecord};
use crate::error::{Error, Result};
use crate::integrators::{DiagonalPropagator, Integrator, MethodId};
use crate::par;
pub use crate::snapshot::{Axis, Snapshot};
use crate::spectral::{frequencies, wavenumbers, FftCache};
use crate::vadv::VGrid;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Default domain constants (medium ITG case).
pub mod medium {
    pub const R_MIN: f64 = 0.1;
    pub const R_MAX: f64 = 14.5;
    pub const LENGTH: f64 = 1506.759067;
    pub const V_MAX: f64 = 7.32;
    pub const KAPPA_N0: f64 = 0.055;
    pub const KAPPA_T: f64 = 0.27586;
    pub const WIDTH_T: f64 = 1.45;
    pub const WIDTH_N0: f64 = 2.0 * WIDTH_T;
    pub const EPSILON: f64 = 1e-6;
    pub const M: i64 = 5;
    pub const N: i64 = 1;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkGrid {
    pub nr: usize,
    pub ntheta: usize,
    pub nz: usize,
    pub v: VGrid,
    pub r_min: f64,
    pub r_max: f64,
    pub length: f64,
}

impl DkGrid {
    /// Grid on the default domain.
    pub fn new(nr: usize, ntheta: usize, nz: usize, nv: usize) -> Result<Self> {
        Self::with_domain(
            nr,
            ntheta,
            nz,
            nv,
            medium::R_MIN,
            medium::R_MAX,
            medium::LENGTH,
            medium::V_MAX,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_domain(
        nr: usize,
        ntheta: usize,
        nz: usize,
        nv: usize,
        r_min: f64,
        r_max: f64,
        length: f64,
        v_max: f64,
    ) -> Result<Self> {
        if nr < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 radial nodes, got {nr}"
            )));
        }
        if ntheta < 3 || nz < 1 {
            return Err(Error::InvalidParameter(format!(
                "need ntheta >= 3 and nz >= 1, got {ntheta} and {nz}"
            )));
        }
        if !(r_min > 0.0) || !(r_max > r_min) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self {
            nr,
            ntheta,
            nz,
            v: VGrid::new(nv, v_max)?,
            r_min,
            r_max,
            length,
        })
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / (self.nr - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn dz(&self) -> f64 {
        self.length / self.nz as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.dz()
    }

    pub fn r_p(&self) -> f64 {
        0.5 * (self.r_min + self.r_max)
    }

    /// Points per `(r, θ)` slice.
    pub fn slice_len(&self) -> usize {
        self.nr * self.ntheta
    }

    /// Points per z-plane `[v][r][θ]`.
    pub fn plane_len(&self) -> usize {
        self.v.n * self.slice_len()
    }

    pub fn len(&self) -> usize {
        self.nz * self.plane_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// z-wavenumbers with the unpaired Nyquist mode set to zero.
    pub fn z_wavenumbers(&self) -> Vec<f64> {
        let mut k = wavenumbers(self.nz, self.length);
        if self.nz.is_multiple_of(2) {
            k[self.nz / 2] = 0.0;
        }
        k
    }

    /// Trapezoid weights in r times the Jacobian `r`.
    pub fn radial_weights(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.nr)
            .map(|i| {
                let end = i == 0 || i == self.nr - 1;
                self.r(i) * if end { 0.5 * dr } else { dr }
            })
            .collect()
    }
}

/// `C exp(−κ w tanh((r − r_p)/w))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub c: f64,
    pub kappa: f64,
    pub width: f64,
}

impl Profile {
    pub fn value(&self, r: f64, r_p: f64) -> f64 {
        self.c * (-self.kappa * self.width * ((r - r_p) / self.width).tanh()).exp()
    }

    /// `P′/P = −κ sech²((r − r_p)/w)`.
    pub fn log_derivative(&self, r: f64, r_p: f64) -> f64 {
        let s = 1.0 / ((r - r_p) / self.width).cosh();
        -self.kappa * s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfiles {
    pub n0: Profile,
    pub ti: Profile,
    pub te: Profile,
    pub r_p: f64,
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

impl RadialProfiles {
    /// Medium-case profiles on `[r_min, r_max]`, with `C_{n₀}` normalizing
    /// `∫ n₀ dr` to `r_max − r_min`.
    pub fn medium(r_min: f64, r_max: f64) -> Self {
        let r_p = 0.5 * (r_min + r_max);
        let t = |kappa| Profile {
            c: 1.0,
            kappa,
            width: medium::WIDTH_T,
        };
        let mut n0 = Profile {
            c: 1.0,
            kappa: medium::KAPPA_N0,
            width: medium::WIDTH_N0,
        };
        n0.c = (r_max - r_min) / simpson(r_min, r_max, 20_000, |r| n0.value(r, r_p));
        Self {
            n0,
            ti: t(medium::KAPPA_T),
            te: t(medium::KAPPA_T),
            r_p,
        }
    }

    pub fn n0(&self, r: f64) -> f64 {
        self.n0.value(r, self.r_p)
    }

    pub fn ti(&self, r: f64) -> f64 {
        self.ti.value(r, self.r_p)
    }

    pub fn te(&self, r: f64) -> f64 {
        self.te.value(r, self.r_p)
    }

    pub fn dlog_n0(&self, r: f64) -> f64 {
        self.n0.log_derivative(r, self.r_p)
    }
}

/// `n₀(r) exp(−v²/(2T_i(r))) / √(2π T_i(r))`.
pub fn equilibrium(r: f64, v: f64, p: &RadialProfiles) -> f64 {
    let ti = p.ti(r);
    p.n0(r) * (-0.5 * v * v / ti).exp() / (2.0 * PI * ti).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Evolve `f` with `f_eq` boundary values.
    Direct,
    /// Evolve `δf = f − f_eq` with homogeneous boundaries and source terms.
    Perturbation,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Direct => "direct",
            Formulation::Perturbation => "pert",
        }
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Formulation::Direct),
            "pert" | "perturbation" => Ok(Formulation::Perturbation),
            other => Err(Error::InvalidParameter(format!(
                "unknown formulation `{other}`"
            ))),
        }
    }
}

/// Radial boundary treatment of [`arakawa_bracket`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialEnds {
    /// Rows wrap around (used to check the discrete invariants).
    Periodic,
    /// First and last rows are boundary data; their output is zero.
    Fixed,
}

/// Arakawa Jacobian `J(φ, f) ≈ ∂_rφ ∂_θf − ∂_θφ ∂_rf` on an `nr × nθ`
/// slice, periodic in θ.
#[allow(clippy::too_many_arguments)]
pub fn arakawa_bracket(
    phi: &[f64],
    f: &[f64],
    nr: usize,
    nt: usize,
    dr: f64,
    dtheta: f64,
    ends: RadialEnds,
    out: &mut [f64],
) {
    assert_eq!(phi.len(), nr * nt);
    assert_eq!(f.len(), nr * nt);
    assert_eq!(out.len(), nr * nt);
    let scale = 1.0 / (12.0 * dr * dtheta);
    let rows = match ends {
        RadialEnds::Periodic => 0..nr,
        RadialEnds::Fixed => {
            out[..nt].fill(0.0);
            out[(nr - 1) * nt..].fill(0.0);
            1..nr - 1
        }
    };
    for i in rows {
        let im = (i + nr - 1) % nr * nt;
        let ip = (i + 1) % nr * nt;
        let ic = i * nt;
        for j in 0..nt {
            let jm = (j + nt - 1) % nt;
            let jp = (j + 1) % nt;
            let p = |r: usize, c: usize| phi[r + c];
            let g = |r: usize, c: usize| f[r + c];
            let jpp = (p(ip, j) - p(im, j)) * (g(ic, jp) - g(ic, jm))
                - (p(ic, jp) - p(ic, jm)) * (g(ip, j) - g(im, j));
            let jpx = p(ip, j) * (g(ip, jp) - g(ip, jm))
                - p(im, j) * (g(im, jp) - g(im, jm))
                - p(ic, jp) * (g(ip, jp) - g(im, jp))
                + p(ic, jm) * (g(ip, jm) - g(im, jm));
            let jxp = g(ic, jp) * (p(ip, jp) - p(im, jp))
                - g(ic, jm) * (p(ip, jm) - p(im, jm))
                - g(ip, j) * (p(ip, jp) - p(ip, jm))
                + g(im, j) * (p(im, jp) - p(im, jm));
            out[ic + j] = (jpp + jpx + jxp) * scale;
        }
    }
}

/// `(ΣJ, Σ fJ, Σ φJ)` of a bracket `j = J(φ, f)`, each divided by the
/// matching sum of moduli (0 when that sum vanishes).
pub fn bracket_sums(phi: &[f64], f: &[f64], j: &[f64]) -> [f64; 3] {
    let ratio = |s: f64, a: f64| if a > 0.0 { s / a } else { 0.0 };
    let (mut s, mut a) = ([0.0; 3], [0.0; 3]);
    for ((&p, &g), &x) in phi.iter().zip(f).zip(j) {
        s[0] += x;
        a[0] += x.abs();
        s[1] += g * x;
        a[1] += (g * x).abs();
        s[2] += p * x;
        a[2] += (p * x).abs();
    }
    [ratio(s[0], a[0]), ratio(s[1], a[1]), ratio(s[2], a[2])]
}

/// Quasi-neutrality solver: tridiagonal in r for every `(m, k_z)` pair,
/// homogeneous Dirichlet at both radial ends.
#[derive(Debug, Clone)]
pub struct QnSolver {
    grid: DkGrid,
    /// `(lower, upper, base diagonal, 1/r², 1/T_e)` at each radial node.
    lower: Vec<f64>,
    upper: Vec<f64>,
    diag: Vec<f64>,
    inv_r2: Vec<f64>,
    inv_te: Vec<f64>,
    m: Vec<i64>,
    n: Vec<i64>,
}

impl QnSolver {
    pub fn new(grid: &DkGrid, profiles: &RadialProfiles) -> Self {
        let dr = grid.dr();
        let (mut lower, mut upper, mut diag, mut inv_r2, mut inv_te) =
            (vec![], vec![], vec![], vec![], vec![]);
        for i in 0..grid.nr {
            let r = grid.r(i);
            let g = 1.0 / r + profiles.dlog_n0(r);
            lower.push(-(1.0 / (dr * dr) - g / (2.0 * dr)));
            upper.push(-(1.0 / (dr * dr) + g / (2.0 * dr)));
            diag.push(2.0 / (dr * dr));
            inv_r2.push(1.0 / (r * r));
            inv_te.push(1.0 / profiles.te(r));
        }
        Self {
            grid: *grid,
            lower,
            upper,
            diag,
            inv_r2,
            inv_te,
            m: frequencies(grid.ntheta),
            n: frequencies(grid.nz),
        }
    }

    fn diagonal(&self, i: usize, m: i64, kz_zero: bool) -> f64 {
        let te = if kz_zero { 0.0 } else { self.inv_te[i] };
        self.diag[i] + (m * m) as f64 * self.inv_r2[i] + te
    }

    /// Applies the discrete operator to `φ̂[k_z][r][m]` (boundary rows are
    /// taken as zero and produce zero).
    pub fn apply(&self, phi: &[C], out: &mut [C]) {
        let (nr, nt) = (self.grid.nr, self.grid.ntheta);
        for (kz, (blk, o)) in phi.chunks(nr * nt).zip(out.chunks_mut(nr * nt)).enumerate() {
            o.fill(ZERO);
            for i in 1..nr - 1 {
                for (c, &m) in self.m.iter().enumerate() {
                    let at = |r: usize| {
                        if r == 0 || r == nr - 1 {
                            ZERO
                        } else {
                            blk[r * nt + c]
                        }
                    };
                    o[i * nt + c] = at(i - 1) * self.lower[i]
                        + at(i) * self.diagonal(i, m, kz == 0)
                        + at(i + 1) * self.upper[i];
                }
            }
        }
    }

    /// Solves in place; `data` is `[k_z][r][m]` and holds the right-hand side
    /// on entry. Boundary rows are set to zero.
    pub fn solve(&self, data: &mut [C]) -> Result<()> {
        let (nr, nt) = (self.grid.nr, self.grid.ntheta);
        if data.len() != self.grid.nz * nr * nt {
            return Err(Error::ShapeMismatch {
                expected: self.grid.nz * nr * nt,
                got: data.len(),
            });
        }
        let failures: Vec<Option<(i64, i64)>> = {
            let mut fails = vec![None; self.grid.nz];
            let blocks: Vec<(usize, &mut [C])> = data.chunks_mut(nr * nt).enumerate().collect();
            let results = par_blocks(blocks, |kz, blk| self.solve_block(kz, blk));
            for (kz, r) in results.into_iter().enumerate() {
                fails[kz] = r;
            }
            fails
        };
        match failures.into_iter().flatten().next() {
            Some((m, n)) => Err(Error::SingularMode { m, n }),
            None => Ok(()),
        }
    }

    fn solve_block(&self, kz: usize, blk: &mut [C]) -> Option<(i64, i64)> {
        let (nr, nt) = (self.grid.nr, self.grid.ntheta);
        let ni = nr - 2;
        let mut cp = vec![0.0; ni];
        let mut dp = vec![ZERO; ni];
        for (c, &m) in self.m.iter().enumerate() {
            // Thomas algorithm over interior rows 1..nr-1
            for k in 0..ni {
                let i = k + 1;
                let b = self.diagonal(i, m, kz == 0);
                let (a, up) = (if k == 0 { 0.0 } else { self.lower[i] }, self.upper[i]);
                let denom = b - a * if k == 0 { 0.0 } else { cp[k - 1] };
                if !denom.is_finite() || denom.abs() < 1e-14 * b.abs().max(1.0) {
                    return Some((m, self.n[kz]));
                }
                cp[k] = if k + 1 < ni { up / denom } else { 0.0 };
                let prev = if k == 0 { ZERO } else { dp[k - 1] };
                dp[k] = (blk[i * nt + c] - prev * a) / denom;
            }
            for k in (0..ni).rev() {
                let next = if k + 1 < ni {
                    blk[(k + 2) * nt + c]
                } else {
                    ZERO
                };
                blk[(k + 1) * nt + c] = dp[k] - next * cp[k];
            }
            blk[c] = ZERO;
            blk[(nr - 1) * nt + c] = ZERO;
        }
        None
    }
}

/// Runs `f` over `(index, block)` pairs, in parallel when enabled.
fn par_blocks<R, F>(blocks: Vec<(usize, &mut [C])>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &mut [C]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        blocks.into_par_iter().map(|(k, b)| f(k, b)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        blocks.into_iter().map(|(k, b)| f(k, b)).collect()
    }
}

/// Transform along the leading z axis of a `[nz][inner]` array.
fn z_transform(
    data: &mut [C],
    nz: usize,
    scratch: &mut Vec<C>,
    ffts: &mut FftCache,
    inverse: bool,
) -> Result<()> {
    let inner = data.len() / nz;
    scratch.resize(data.len(), ZERO);
    par::transpose(data, nz, inner, scratch);
    if inverse {
        ffts.inverse(scratch, &[inner, nz], 1)?;
    } else {
        ffts.forward(scratch, &[inner, nz], 1)?;
    }
    par::transpose(scratch, inner, nz, data);
    Ok(())
}

/// Restores `f̂(−k) = conj f̂(k)` block-wise along the leading z axis.
pub fn enforce_hermitian_z(hat: &mut [C], nz: usize) {
    let inner = hat.len() / nz;
    for z in &mut hat[..inner] {
        z.im = 0.0;
    }
    for k in 1..nz.div_ceil(2) {
        let (lo, hi) = hat.split_at_mut((nz - k) * inner);
        let a = &mut lo[k * inner..(k + 1) * inner];
        let b = &mut hi[..inner];
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let avg = (*x + y.conj()) * 0.5;
            *x = avg;
            *y = avg.conj();
        }
    }
    if nz.is_multiple_of(2) && nz > 1 {
        for z in &mut hat[nz / 2 * inner..(nz / 2 + 1) * inner] {
            z.im = 0.0;
        }
    }
}

/// Potential fields derived from a state.
#[derive(Debug, Clone, Default)]
pub struct Potential {
    /// `φ̂[k_z][r][θ]`.
    pub hat: Vec<C>,
    /// `φ[z][r][θ]`.
    pub phi: Vec<f64>,
    /// `∂_zφ[z][r][θ]`.
    pub dz_phi: Vec<f64>,
    /// `n[z][r][θ] = ∫ f dv` (trapezoid) of the stored state.
    pub density: Vec<f64>,
}

/// Evaluates the nonlinear term `F` (or `F_pert`).
#[derive(Debug, Clone)]
pub struct DkRhs {
    grid: DkGrid,
    profiles: RadialProfiles,
    formulation: Formulation,
    qn: QnSolver,
    ffts: FftCache,
    kz: Vec<f64>,
    /// `f_eq[v][r]`, `∂_r f_eq[v][r]` (centered), `∂_v f_eq[v][r]`.
    feq: Vec<f64>,
    dr_feq: Vec<f64>,
    dv_feq: Vec<f64>,
    /// `f_eq` at the ghost velocities `v_{−1}` and `v_{N_v}`, per r.
    feq_ghost: [Vec<f64>; 2],
    inv_n0: Vec<f64>,
    work: Vec<C>,
    scratch: Vec<C>,
    phys: Vec<f64>,
    term: Vec<f64>,
    potential: Potential,
}

impl DkRhs {
    pub fn new(grid: DkGrid, profiles: RadialProfiles, formulation: Formulation) -> Self {
        let (nr, nv) = (grid.nr, grid.v.n);
        let dr = grid.dr();
        let mut feq = vec![0.0; nv * nr];
        let mut dr_feq = vec![0.0; nv * nr];
        let mut dv_feq = vec![0.0; nv * nr];
        for j in 0..nv {
            let v = grid.v.v(j);
            for i in 0..nr {
                let r = grid.r(i);
                let fe = equilibrium(r, v, &profiles);
                feq[j * nr + i] = fe;
                dv_feq[j * nr + i] = -v / profiles.ti(r) * fe;
                if i > 0 && i + 1 < nr {
                    dr_feq[j * nr + i] = (equilibrium(r + dr, v, &profiles)
                        - equilibrium(r - dr, v, &profiles))
                        / (2.0 * dr);
                }
            }
        }
        let ghost = |v: f64| {
            (0..nr)
                .map(|i| equilibrium(grid.r(i), v, &profiles))
                .collect()
        };
        Self {
            qn: QnSolver::new(&grid, &profiles),
            kz: grid.z_wavenumbers(),
            feq_ghost: [ghost(grid.v.v_at(-1)), ghost(grid.v.v_at(nv as isize))],
            inv_n0: (0..nr).map(|i| 1.0 / profiles.n0(grid.r(i))).collect(),
            grid,
            profiles,
            formulation,
            ffts: FftCache::new(),
            feq,
            dr_feq,
            dv_feq,
            work: Vec::new(),
            scratch: Vec::new(),
            phys: Vec::new(),
            term: Vec::new(),
            potential: Potential::default(),
        }
    }

    pub fn grid(&self) -> &DkGrid {
        &self.grid
    }

    pub fn profiles(&self) -> &RadialProfiles {
        &self.profiles
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    /// Fields of the most recent [`DkRhs::solve_potential`] or [`DkRhs::eval`].
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `f_eq[v][r]` on the grid.
    pub fn equilibrium_table(&self) -> &[f64] {
        &self.feq
    }

    pub fn ffts(&mut self) -> &mut FftCache {
        &mut self.ffts
    }

    /// Physical values `[z][v][r][θ]` of a z-Fourier array.
    pub fn to_physical(&mut self, hat: &[C]) -> Result<Vec<f64>> {
        self.work.clear();
        self.work.extend_from_slice(hat);
        z_transform(
            &mut self.work,
            self.grid.nz,
            &mut self.scratch,
            &mut self.ffts,
            true,
        )?;
        Ok(self.work.iter().map(|z| z.re).collect())
    }

    /// z-Fourier coefficients of physical values.
    pub fn to_spectral(&mut self, phys: &[f64]) -> Result<Vec<C>> {
        let mut out: Vec<C> = phys.iter().map(|&x| C::new(x, 0.0)).collect();
        z_transform(
            &mut out,
            self.grid.nz,
            &mut self.scratch,
            &mut self.ffts,
            false,
        )?;
        Ok(out)
    }

    /// Solves quasi-neutrality for the state `hat`.
    pub fn solve_potential(&mut self, hat: &[C]) -> Result<()> {
        let g = self.grid;
        let (nz, nv, nr, nt) = (g.nz, g.v.n, g.nr, g.ntheta);
        let sl = g.slice_len();
        if hat.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                got: hat.len(),
            });
        }
        let w = g.v.trapezoid_weights();
        let mut dens = vec![ZERO; nz * sl];
        par::for_each_chunk_mut(&mut dens, sl, |off, d| {
            let kz = off / sl;
            let plane = &hat[kz * nv * sl..(kz + 1) * nv * sl];
            for (j, wj) in w.iter().enumerate() {
                for (x, h) in d.iter_mut().zip(&plane[j * sl..(j + 1) * sl]) {
                    *x += h * *wj;
                }
            }
        });
        let mut rhs: Vec<C> = dens
            .iter()
            .enumerate()
            .map(|(idx, x)| x * self.inv_n0[(idx % sl) / nt])
            .collect();
        if self.formulation == Formulation::Direct {
            for x in &mut rhs[..sl] {
                *x -= nz as f64;
            }
        }
        self.ffts.forward(&mut rhs, &[nz, nr, nt], 2)?;
        self.qn.solve(&mut rhs)?;
        self.ffts.inverse(&mut rhs, &[nz, nr, nt], 2)?;
        let mut dz: Vec<C> = rhs
            .chunks(sl)
            .zip(&self.kz)
            .flat_map(|(blk, &k)| blk.iter().map(move |x| x * C::new(0.0, k)))
            .collect();
        let phi_hat = rhs.clone();
        let mut phi = rhs;
        z_transform(&mut phi, nz, &mut self.scratch, &mut self.ffts, true)?;
        z_transform(&mut dz, nz, &mut self.scratch, &mut self.ffts, true)?;
        z_transform(&mut dens, nz, &mut self.scratch, &mut self.ffts, true)?;
        self.potential = Potential {
            hat: phi_hat,
            phi: phi.iter().map(|z| z.re).collect(),
            dz_phi: dz.iter().map(|z| z.re).collect(),
            density: dens.iter().map(|z| z.re).collect(),
        };
        Ok(())
    }

    /// `out = F̂(hat)`.
    pub fn eval(&mut self, hat: &[C], out: &mut [C]) -> Result<()> {
        let g = self.grid;
        let (nv, nr, nt) = (g.v.n, g.nr, g.ntheta);
        let sl = g.slice_len();
        if out.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                got: out.len(),
            });
        }
        self.solve_potential(hat)?;
        self.phys = self.to_physical(hat)?;
        self.term.resize(g.len(), 0.0);
        let (dr, dth, dv) = (g.dr(), g.dtheta(), g.v.dv);
        let pert = self.formulation == Formulation::Perturbation;
        let (phys, pot) = (&self.phys, &self.potential);
        let (dr_feq, dv_feq, ghost) = (&self.dr_feq, &self.dv_feq, &self.feq_ghost);
        let r: Vec<f64> = (0..nr).map(|i| g.r(i)).collect();
        par::for_each_chunk_mut(&mut self.term, sl, |off, out_s| {
            let slice = off / sl;
            let (z, j) = (slice / nv, slice % nv);
            let plane = &phys[z * nv * sl..(z + 1) * nv * sl];
            let f = &plane[j * sl..(j + 1) * sl];
            let phi = &pot.phi[z * sl..(z + 1) * sl];
            let phiz = &pot.dz_phi[z * sl..(z + 1) * sl];
            arakawa_bracket(phi, f, nr, nt, dr, dth, RadialEnds::Fixed, out_s);
            for i in 1..nr - 1 {
                let inv_r = 1.0 / r[i];
                for c in 0..nt {
                    let idx = i * nt + c;
                    let below = if j > 0 {
                        plane[(j - 1) * sl + idx]
                    } else if pert {
                        -f[idx]
                    } else {
                        ghost[0][i]
                    };
                    let above = if j + 1 < nv {
                        plane[(j + 1) * sl + idx]
                    } else if pert {
                        -f[idx]
                    } else {
                        ghost[1][i]
                    };
                    let mut t = -out_s[idx] * inv_r + phiz[idx] * (above - below) / (2.0 * dv);
                    if pert {
                        let dth_phi = (phi[i * nt + (c + 1) % nt]
                            - phi[i * nt + (c + nt - 1) % nt])
                            / (2.0 * dth);
                        t += dth_phi * inv_r * dr_feq[j * nr + i] + phiz[idx] * dv_feq[j * nr + i];
                    }
                    out_s[idx] = t;
                }
            }
        });
        for (o, t) in out.iter_mut().zip(&self.term) {
            *o = C::new(*t, 0.0);
        }
        z_transform(out, g.nz, &mut self.scratch, &mut self.ffts, false)
    }
}

/// `d = −i v k_z` for every `(k_z, v)` pair, repeated over each `(r, θ)` slice.
pub fn linear_propagator(grid: &DkGrid) -> DiagonalPropagator {
    let k = grid.z_wavenumbers();
    let symbols = k
        .iter()
        .flat_map(|&kz| (0..grid.v.n).map(move |j| (kz, j)))
        .map(|(kz, j)| C::new(0.0, -grid.v.v(j) * kz))
        .collect();
    DiagonalPropagator::with_repeat(symbols, grid.slice_len())
}

/// Physical initial data `[z][v][r][θ]` in the given formulation: the
/// equilibrium with a `(m, n)` perturbation of relative size `ε`, boundary
/// rows left unperturbed.
pub fn initial_condition(
    grid: &DkGrid,
    profiles: &RadialProfiles,
    formulation: Formulation,
    epsilon: f64,
    m: i64,
    n: i64,
) -> Vec<f64> {
    let (nr, nt) = (grid.nr, grid.ntheta);
    let width = 4.0 * profiles.n0.width / profiles.ti.width;
    let r_p = profiles.r_p;
    let mut out = vec![0.0; grid.len()];
    for (idx, x) in out.iter_mut().enumerate() {
        let c = idx % nt;
        let i = (idx / nt) % nr;
        let j = (idx / (nr * nt)) % grid.v.n;
        let z = idx / grid.plane_len();
        let r = grid.r(i);
        let fe = equilibrium(r, grid.v.v(j), profiles);
        let interior = i > 0 && i + 1 < nr;
        let bump = if interior {
            epsilon
                * (-(r - r_p).powi(2) / width).exp()
                * (2.0 * PI * n as f64 * grid.z(z) / grid.length + m as f64 * grid.theta(c)).cos()
        } else {
            0.0
        };
        *x = match formulation {
            Formulation::Direct => fe * (1.0 + bump),
            Formulation::Perturbation => fe * bump,
        };
    }
    out
}

/// Time control of a drift-kinetic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DkTime {
    Fixed(f64),
    Richardson { tol: f64, dt_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DkParams {
    pub grid: DkGrid,
    pub profiles: RadialProfiles,
    pub formulation: Formulation,
    pub method: MethodId,
    pub epsilon: f64,
    pub mode: (i64, i64),
    pub time: DkTime,
    pub t_final: f64,
}

impl DkParams {
    /// Default case on an `nr × nθ × nz × nv` grid.
    pub fn medium(
        nr: usize,
        ntheta: usize,
        nz: usize,
        nv: usize,
        formulation: Formulation,
        method: MethodId,
        time: DkTime,
    ) -> Result<Self> {
        let grid = DkGrid::new(nr, ntheta, nz, nv)?;
        Ok(Self {
            profiles: RadialProfiles::medium(grid.r_min, grid.r_max),
            grid,
            formulation,
            method,
            epsilon: medium::EPSILON,
            mode: (medium::M, medium::N),
            time,
            t_final: 3000.0,
        })
    }
}

/// One row of the run history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkRecord {
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    /// Richardson estimate, when a controller is used.
    pub error: Option<f64>,
    pub electric_energy: f64,
    pub mass_rel_err: f64,
    pub energy_rel_err: f64,
}

impl DkRecord {
    pub const CSV_HEADER: &'static str =
        "t,dt,accepted,elec_energy,mass_rel_err,energy_rel_err,error";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{}",
            self.t,
            self.dt,
            self.accepted as u8,
            self.electric_energy,
            self.mass_rel_err,
            self.energy_rel_err,
            self.error.map(|e| format!("{e:.17e}")).unwrap_or_default()
        )
    }
}

/// Scalar diagnostics of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkDiagnostics {
    /// `(∫∫ φ²(r_p, θ, z) dθ dz)^{1/2}`.
    pub electric_energy: f64,
    /// `∫ f r dr dθ dz dv` of the full distribution.
    pub mass: f64,
    /// `∫ (v²/2) f + ∫ f φ` with the same measure.
    pub energy: f64,
}

struct DkStepper<'a> {
    integrator: &'a mut Integrator,
    prop: &'a mut DiagonalPropagator,
    rhs: &'a mut DkRhs,
}

impl Stepper for DkStepper<'_> {
    fn order(&self) -> u32 {
        self.integrator.order()
    }

    fn step(&mut self, t: f64, u: &mut [C], dt: f64) -> Result<()> {
        let rhs = &mut *self.rhs;
        let mut f = |_: f64, x: &[C], out: &mut [C]| rhs.eval(x, out);
        self.integrator.step(self.prop, &mut f, t, u, dt)?;
        enforce_hermitian_z(u, rhs.grid.nz);
        Ok(())
    }

    /// Max modulus over physical phase space.
    fn error_norm(&mut self, d: &[C]) -> Result<f64> {
        let mut w = d.to_vec();
        let mut scratch = Vec::new();
        z_transform(
            &mut w,
            self.rhs.grid.nz,
            &mut scratch,
            &mut self.rhs.ffts,
            true,
        )?;
        Ok(w.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DkRun {
    pub records: Vec<DkRecord>,
    pub trace: Vec<TrialRecord>,
}

impl DkRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(DkRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

pub struct DkSolver {
    params: DkParams,
    rhs: DkRhs,
    prop: DiagonalPropagator,
    integrator: Integrator,
    state: Vec<C>,
    t: f64,
    /// Mass and energy of `f_eq` (added for the perturbation formulation).
    eq_mass: f64,
    eq_kinetic: f64,
    reference: Option<DkDiagnostics>,
}

impl std::fmt::Debug for DkSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DkSolver")
            .field("params", &self.params)
            .field("t", &self.t)
            .finish()
    }
}

impl DkSolver {
    pub fn new(params: DkParams) -> Result<Self> {
        if let DkTime::Fixed(dt) = params.time {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "time step must be positive, got {dt}"
                )));
            }
        }
        let g = params.grid;
        let mut rhs = DkRhs::new(g, params.profiles, params.formulation);
        let init = initial_condition(
            &g,
            &params.profiles,
            params.formulation,
            params.epsilon,
            params.mode.0,
            params.mode.1,
        );
        let mut state = rhs.to_spectral(&init)?;
        enforce_hermitian_z(&mut state, g.nz);
        let (eq_mass, eq_kinetic) = match params.formulation {
            Formulation::Direct => (0.0, 0.0),
            Formulation::Perturbation => {
                let wr = g.radial_weights();
                let (mut m, mut k) = (0.0, 0.0);
                for j in 0..g.v.n {
                    let v = g.v.v(j);
                    for (i, w) in wr.iter().enumerate() {
                        let fe = rhs.feq[j * g.nr + i] * w;
                        m += fe;
                        k += 0.5 * v * v * fe;
                    }
                }
                let s = g.v.dv * g.length * 2.0 * PI;
                (m * s, k * s)
            }
        };
        let mut solver = Self {
            prop: linear_propagator(&g),
            integrator: Integrator::new(params.method),
            params,
            rhs,
            state,
            t: 0.0,
            eq_mass,
            eq_kinetic,
            reference: None,
        };
        solver.reference = Some(solver.diagnostics()?);
        Ok(solver)
    }

    pub fn params(&self) -> &DkParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[C] {
        &self.state
    }

    pub fn rhs(&mut self) -> &mut DkRhs {
        &mut self.rhs
    }

    /// Stored quantity (`f` or `δf`) in physical space.
    pub fn physical(&mut self) -> Result<Vec<f64>> {
        self.rhs.to_physical(&self.state)
    }

    /// Full distribution `f` in physical space.
    pub fn distribution(&mut self) -> Result<Vec<f64>> {
        let mut f = self.physical()?;
        if self.params.formulation == Formulation::Perturbation {
            let g = self.params.grid;
            let (nr, nt) = (g.nr, g.ntheta);
            for (idx, x) in f.iter_mut().enumerate() {
                let j = (idx / (nr * nt)) % g.v.n;
                *x += self.rhs.feq[j * nr + (idx / nt) % nr];
            }
        }
        Ok(f)
    }

    pub fn diagnostics(&mut self) -> Result<DkDiagnostics> {
        let g = self.params.grid;
        let (nv, nr, nt) = (g.v.n, g.nr, g.ntheta);
        let sl = g.slice_len();
        self.rhs.solve_potential(&self.state)?;
        let pot = self.rhs.potential();
        let wr = g.radial_weights();
        let cell = g.dtheta() * g.dz();

        let (ip, frac) = {
            let x = (g.r_p() - g.r_min) / g.dr();
            let i = (x.floor() as usize).min(nr - 2);
            (i, x - i as f64)
        };
        let mut e2 = 0.0;
        for z in 0..g.nz {
            for c in 0..nt {
                let a = pot.phi[z * sl + ip * nt + c];
                let b = pot.phi[z * sl + (ip + 1) * nt + c];
                let p = a + frac * (b - a);
                e2 += p * p;
            }
        }
        let electric_energy = (e2 * cell).sqrt();

        // z-sums come from the k_z = 0 block
        let zero = &self.state[..nv * sl];
        let (mut mass, mut kinetic) = (0.0, 0.0);
        for j in 0..nv {
            let v = g.v.v(j);
            for i in 0..nr {
                let s: f64 = zero[j * sl + i * nt..j * sl + (i + 1) * nt]
                    .iter()
                    .map(|x| x.re)
                    .sum();
                mass += wr[i] * s;
                kinetic += 0.5 * v * v * wr[i] * s;
            }
        }
        let scale = g.v.dv * g.dtheta() * g.dz();
        mass *= scale;
        kinetic *= scale;

        // ∫ f φ = ∫ n φ with n from the same velocity rule
        let mut n_eq = vec![0.0; nr];
        if self.params.formulation == Formulation::Perturbation {
            for j in 0..nv {
                for (i, x) in n_eq.iter_mut().enumerate() {
                    *x += self.rhs.feq[j * nr + i] * g.v.dv;
                }
            }
        }
        let mut fphi = 0.0;
        let phys = self.rhs.to_physical(&self.state)?;
        for z in 0..g.nz {
            for i in 0..nr {
                for c in 0..nt {
                    let mut n = n_eq[i];
                    for j in 0..nv {
                        n += phys[(z * nv + j) * sl + i * nt + c] * g.v.dv;
                    }
                    fphi += wr[i] * n * self.rhs.potential().phi[z * sl + i * nt + c];
                }
            }
        }
        fphi *= cell;
        Ok(DkDiagnostics {
            electric_energy,
            mass: mass + self.eq_mass,
            energy: kinetic + self.eq_kinetic + fphi,
        })
    }

    /// Amplitudes `|φ̂(r_p; m, n)|` over all `(m, n)` pairs, largest first.
    pub fn mode_spectrum(&mut self) -> Result<Vec<((i64, i64), f64)>> {
        let g = self.params.grid;
        let (nr, nt) = (g.nr, g.ntheta);
        self.rhs.solve_potential(&self.state)?;
        let x = (g.r_p() - g.r_min) / g.dr();
        let ip = (x.floor() as usize).min(nr - 2);
        let frac = x - ip as f64;
        let hat = &self.rhs.potential().hat;
        let mut at_rp: Vec<C> = Vec::with_capacity(g.nz * nt);
        for kz in 0..g.nz {
            for c in 0..nt {
                let a = hat[kz * nr * nt + ip * nt + c];
                let b = hat[kz * nr * nt + (ip + 1) * nt + c];
                at_rp.push(a + (b - a) * frac);
            }
        }
        self.rhs.ffts().forward(&mut at_rp, &[g.nz, nt], 1)?;
        let (ms, ns) = (frequencies(nt), frequencies(g.nz));
        let mut out: Vec<((i64, i64), f64)> = at_rp
            .iter()
            .enumerate()
            .map(|(idx, a)| ((ms[idx % nt], ns[idx / nt]), a.norm()))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(out)
    }

    fn record(&mut self, dt: f64, accepted: bool, error: Option<f64>) -> Result<DkRecord> {
        let d = self.diagnostics()?;
        let r = self.reference.expect("reference set at construction");
        Ok(DkRecord {
            t: self.t,
            dt,
            accepted,
            error,
            electric_energy: d.electric_energy,
            mass_rel_err: (d.mass - r.mass) / r.mass,
            energy_rel_err: (d.energy - r.energy) / r.energy,
        })
    }

    /// One fixed step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let mut s = DkStepper {
            integrator: &mut self.integrator,
            prop: &mut self.prop,
            rhs: &mut self.rhs,
        };
        s.step(self.t, &mut self.state, dt)?;
        self.t += dt;
        Ok(())
    }

    /// Runs to `t_final`, calling `observe` after every accepted step.
    pub fn run_with(&mut self, mut observe: impl FnMut(&mut Self) -> Result<()>) -> Result<DkRun> {
        let mut records = vec![self.record(0.0, true, None)?];
        let t_final = self.params.t_final;
        let mut controller = match self.params.time {
            DkTime::Richardson { tol, dt_max } => Some(Controller::new(tol, dt_max)?),
            DkTime::Fixed(_) => None,
        };
        observe(self)?;
        while self.t < t_final * (1.0 - 1e-12) {
            match (&mut controller, self.params.time) {
                (Some(c), _) => {
                    let before = c.trace().len();
                    let mut s = DkStepper {
                        integrator: &mut self.integrator,
                        prop: &mut self.prop,
                        rhs: &mut self.rhs,
                    };
                    let dt = c.advance(&mut s, self.t, &mut self.state, t_final)?;
                    self.t += dt;
                    let trials = c.trace()[before..].to_vec();
                    let last = *records.last().expect("initial record");
                    for tr in &trials[..trials.len() - 1] {
                        records.push(DkRecord {
                            dt: tr.dt_tried,
                            accepted: false,
                            error: Some(tr.error),
                            ..last
                        });
                    }
                    let e = trials.last().map(|tr| tr.error);
                    records.push(self.record(dt, true, e)?);
                }
                (None, DkTime::Fixed(dt)) => {
                    let dt = dt.min(t_final - self.t);
                    self.step(dt)?;
                    records.push(self.record(dt, true, None)?);
                }
                (None, DkTime::Richardson { .. }) => unreachable!("controller built above"),
            }
            let last = records.last().expect("record pushed");
            if !last.electric_energy.is_finite() {
                return Err(Error::BlowUp {
                    t: self.t,
                    what: "non-finite electric energy".into(),
                });
            }
            observe(self)?;
        }
        let trace = controller.map(|c| c.trace().to_vec()).unwrap_or_default();
        Ok(DkRun { records, trace })
    }

    pub fn run(&mut self) -> Result<DkRun> {
        self.run_with(|_| Ok(()))
    }

    /// Largest relative bracket sums (see [`bracket_sums`]) over all
    /// `(z, v)` slices of the evolved state, with the given radial closure.
    pub fn bracket_invariants(&mut self, ends: RadialEnds) -> Result<[f64; 3]> {
        let g = self.params.grid;
        let sl = g.slice_len();
        let f = self.physical()?;
        self.rhs.solve_potential(&self.state)?;
        let phi = &self.rhs.potential().phi;
        let mut worst = [0.0f64; 3];
        let mut j = vec![0.0; sl];
        for (idx, fs) in f.chunks(sl).enumerate() {
            let ph = &phi[idx / g.v.n * sl..][..sl];
            arakawa_bracket(ph, fs, g.nr, g.ntheta, g.dr(), g.dtheta(), ends, &mut j);
            for (w, s) in worst.iter_mut().zip(bracket_sums(ph, fs, &j)) {
                *w = w.max(s.abs());
            }
        }
        Ok(worst)
    }

    /// `f(r, θ)` at `z = 0`, `v ≈ 0` and `n(r, θ) = ∫ f dv` at `z = 0`.
    pub fn snapshots(&mut self) -> Result<(Snapshot, Snapshot)> {
        let g = self.params.grid;
        let sl = g.slice_len();
        let f = self.distribution()?;
        let j0 = (0..g.v.n)
            .min_by(|&a, &b| g.v.v(a).abs().total_cmp(&g.v.v(b).abs()))
            .expect("non-empty v grid");
        let slice = f[j0 * sl..(j0 + 1) * sl].to_vec();
        let w = g.v.trapezoid_weights();
        let mut dens = vec![0.0; sl];
        for (j, wj) in w.iter().enumerate() {
            for (d, x) in dens.iter_mut().zip(&f[j * sl..(j + 1) * sl]) {
                *d += wj * x;
            }
        }
        let rows = Axis {
            name: "r",
            n: g.nr,
            min: g.r_min,
            max: g.r_max,
        };
        let cols = Axis {
            name: "theta",
            n: g.ntheta,
            min: 0.0,
            max: 2.0 * PI,
        };
        let mk = |name: &str, values| Snapshot {
            name: name.to_string(),
            t: self.t,
            rows,
            cols,
            values,
        };
        Ok((mk("f(z=0,v=0)", slice), mk("density(z=0)", dens)))
    }
}

/// Least-squares slope of `ln y` against `t` over `t ∈ [t0, t1]`.
pub fn growth_rate(t: &[f64], y: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t >= t0 && **t <= t1 && **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableaux::TableauId;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }

    fn small_grid() -> DkGrid {
        DkGrid::new(12, 16, 8, 16).unwrap()
    }

    #[test]
    fn profiles_at_peak_and_normalization() {
        let p = RadialProfiles::medium(medium::R_MIN, medium::R_MAX);
        assert!((p.ti(p.r_p) - 1.0).abs() < 1e-15);
        assert!((p.te(p.r_p) - 1.0).abs() < 1e-15);
        let int = simpson(medium::R_MIN, medium::R_MAX, 40_000, |r| p.n0(r));
        assert!((int - (medium::R_MAX - medium::R_MIN)).abs() < 1e-10);
        // T_i falls with r
        assert!(p.ti(2.0) > 1.0 && p.ti(12.0) < 1.0);
        let h = 1e-5;
        let r = 5.0;
        let fd = (p.n0(r + h).ln() - p.n0(r - h).ln()) / (2.0 * h);
        assert!((fd - p.dlog_n0(r)).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_density() {
        let p = RadialProfiles::medium(medium::R_MIN, medium::R_MAX);
        let v = VGrid::new(256, 12.0).unwrap();
        for r in [0.5, 7.3, 14.0] {
            let col: Vec<f64> = v.nodes().iter().map(|&x| equilibrium(r, x, &p)).collect();
            assert!((v.integrate(&col) / p.n0(r) - 1.0).abs() < 1e-8);
        }
        // linear in C_{n0}
        let mut q = p;
        q.n0.c *= 2.0;
        assert!((equilibrium(3.0, 0.4, &q) - 2.0 * equilibrium(3.0, 0.4, &p)).abs() < 1e-15);
    }

    #[test]
    fn arakawa_constant_arguments() {
        let (nr, nt) = (9, 12);
        let mut seed = 1;
        let f: Vec<f64> = (0..nr * nt).map(|_| lcg(&mut seed)).collect();
        let c = vec![2.5; nr * nt];
        let mut out = vec![1.0; nr * nt];
        arakawa_bracket(&c, &f, nr, nt, 0.1, 0.2, RadialEnds::Periodic, &mut out);
        assert!(out.iter().all(|x| x.abs() < 1e-12));
        arakawa_bracket(&f, &c, nr, nt, 0.1, 0.2, RadialEnds::Fixed, &mut out);
        assert!(out.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn arakawa_invariants_periodic() {
        let (nr, nt) = (16, 20);
        let mut seed = 7;
        let phi: Vec<f64> = (0..nr * nt).map(|_| lcg(&mut seed)).collect();
        let f: Vec<f64> = (0..nr * nt).map(|_| lcg(&mut seed)).collect();
        let mut j = vec![0.0; nr * nt];
        arakawa_bracket(&phi, &f, nr, nt, 0.3, 0.1, RadialEnds::Periodic, &mut j);
        let scale: f64 = j.iter().map(|x| x.abs()).sum();
        let s0: f64 = j.iter().sum();
        let s1: f64 = j.iter().zip(&f).map(|(a, b)| a * b).sum();
        let s2: f64 = j.iter().zip(&phi).map(|(a, b)| a * b).sum();
        for s in [s0, s1, s2] {
            assert!(s.abs() < 1e-12 * scale, "{s} vs {scale}");
        }
    }

    #[test]
    fn arakawa_invariants_with_fixed_ends() {
        // no flux crosses the half cell next to a fixed row when φ vanishes
        // on the two outermost rows at each end
        let (nr, nt) = (10, 14);
        let mut seed = 3;
        let mut phi: Vec<f64> = (0..nr * nt).map(|_| lcg(&mut seed)).collect();
        phi[..2 * nt].fill(0.0);
        phi[(nr - 2) * nt..].fill(0.0);
        let f: Vec<f64> = (0..nr * nt).map(|_| lcg(&mut seed)).collect();
        let mut j = vec![0.0; nr * nt];
        arakawa_bracket(&phi, &f, nr, nt, 0.3, 0.1, RadialEnds::Fixed, &mut j);
        let scale: f64 = j.iter().map(|x| x.abs()).sum();
        let s0: f64 = j.iter().sum();
        let s1: f64 = j.iter().zip(&f).map(|(a, b)| a * b).sum();
        let s2: f64 = j.iter().zip(&phi).map(|(a, b)| a * b).sum();
        for s in [s0, s1, s2] {
            assert!(s.abs() < 1e-12 * scale, "{s} vs {scale}");
        }
        // with φ nonzero on the first interior row the sum picks up a flux
        phi[nt + 3] = 1.0;
        arakawa_bracket(&phi, &f, nr, nt, 0.3, 0.1, RadialEnds::Fixed, &mut j);
        assert!(j.iter().sum::<f64>().abs() > 1e-6 * scale);
    }

    #[test]
    fn arakawa_approximates_jacobian() {
        // J(φ, f) for φ = r² sin θ, f = r cos θ is −r²(1 + sin²θ)
        let err = |n: usize| {
            let (nr, nt) = (n, 2 * n);
            let (r0, dr, dth) = (1.0, 1.0 / (nr - 1) as f64, 2.0 * PI / nt as f64);
            let mut phi = vec![0.0; nr * nt];
            let mut f = vec![0.0; nr * nt];
            for i in 0..nr {
                for c in 0..nt {
                    let (r, th) = (r0 + i as f64 * dr, c as f64 * dth);
                    phi[i * nt + c] = r * r * th.sin();
                    f[i * nt + c] = r * th.cos();
                }
            }
            let mut j = vec![0.0; nr * nt];
            arakawa_bracket(&phi, &f, nr, nt, dr, dth, RadialEnds::Fixed, &mut j);
            (1..nr - 1)
                .flat_map(|i| (0..nt).map(move |c| (i, c)))
                .map(|(i, c)| {
                    let (r, th) = (r0 + i as f64 * dr, c as f64 * dth);
                    (j[i * nt + c] + r * r * (1.0 + th.sin().powi(2))).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 < 0.1, "{e1}");
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn qn_zero_rhs() {
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let qn = QnSolver::new(&g, &p);
        let mut d = vec![ZERO; g.nz * g.slice_len()];
        qn.solve(&mut d).unwrap();
        assert!(d.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn qn_manufactured_solution() {
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let qn = QnSolver::new(&g, &p);
        let (nr, nt) = (g.nr, g.ntheta);
        let mut phys = vec![0.0; g.nz * nr * nt];
        for z in 0..g.nz {
            for i in 0..nr {
                for c in 0..nt {
                    let s = (PI * (g.r(i) - g.r_min) / (g.r_max - g.r_min)).sin();
                    phys[(z * nr + i) * nt + c] =
                        s * (5.0 * g.theta(c)).cos() * (2.0 * PI * g.z(z) / g.length).cos();
                }
            }
        }
        let mut ffts = FftCache::new();
        let mut exact: Vec<C> = phys.iter().map(|&x| C::new(x, 0.0)).collect();
        ffts.forward(&mut exact, &[g.nz, nr, nt], 0).unwrap();
        ffts.forward(&mut exact, &[g.nz, nr, nt], 2).unwrap();
        let mut rhs = vec![ZERO; exact.len()];
        qn.apply(&exact, &mut rhs);
        qn.solve(&mut rhs).unwrap();
        let err = rhs
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn qn_axisymmetric_mode_matches_dense_solve() {
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let qn = QnSolver::new(&g, &p);
        let (nr, nt) = (g.nr, g.ntheta);
        let ni = nr - 2;
        let b: Vec<f64> = (0..ni).map(|k| 1.0 + 0.3 * k as f64).collect();
        // dense matrix for (m, k_z) = (0, 0), solved by Gaussian elimination
        let mut a = vec![vec![0.0; ni + 1]; ni];
        for k in 0..ni {
            let i = k + 1;
            a[k][k] = qn.diagonal(i, 0, true);
            if k > 0 {
                a[k][k - 1] = qn.lower[i];
            }
            if k + 1 < ni {
                a[k][k + 1] = qn.upper[i];
            }
            a[k][ni] = b[k];
        }
        for col in 0..ni {
            let piv = (col..ni)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in 0..ni {
                if row != col {
                    let fac = a[row][col] / a[col][col];
                    for k in col..=ni {
                        a[row][k] -= fac * a[col][k];
                    }
                }
            }
        }
        let dense: Vec<f64> = (0..ni).map(|k| a[k][ni] / a[k][k]).collect();
        let mut d = vec![ZERO; g.nz * nr * nt];
        for k in 0..ni {
            d[(k + 1) * nt] = C::new(b[k], 0.0);
        }
        qn.solve(&mut d).unwrap();
        for k in 0..ni {
            assert!((d[(k + 1) * nt].re - dense[k]).abs() < 1e-10 * dense[k].abs().max(1.0));
        }
    }

    #[test]
    fn equilibrium_is_steady_in_perturbation_form() {
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let mut rhs = DkRhs::new(g, p, Formulation::Perturbation);
        let zero = vec![ZERO; g.len()];
        let mut out = vec![C::new(1.0, 1.0); g.len()];
        rhs.eval(&zero, &mut out).unwrap();
        assert!(out.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn direct_equilibrium_residual_converges() {
        let residual = |nr: usize| {
            let g = DkGrid::new(nr, 8, 4, 32).unwrap();
            let p = RadialProfiles::medium(g.r_min, g.r_max);
            let mut rhs = DkRhs::new(g, p, Formulation::Direct);
            let f = initial_condition(&g, &p, Formulation::Direct, 0.0, 5, 1);
            let hat = rhs.to_spectral(&f).unwrap();
            let mut out = vec![ZERO; g.len()];
            rhs.eval(&hat, &mut out).unwrap();
            out.iter().map(|x| x.norm()).fold(0.0, f64::max)
        };
        // f_eq is θ-independent, so only the density mismatch drives φ
        let (a, b) = (residual(16), residual(32));
        assert!(a < 1e-6 && b <= a, "{a} {b}");
    }

    #[test]
    fn initial_condition_single_mode() {
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let eq = initial_condition(&g, &p, Formulation::Direct, 0.0, 5, 1);
        let direct = initial_condition(&g, &p, Formulation::Direct, 1e-6, 5, 1);
        let pert = initial_condition(&g, &p, Formulation::Perturbation, 1e-6, 5, 1);
        for ((a, b), c) in direct.iter().zip(&eq).zip(&pert) {
            assert!((a - b - c).abs() < 1e-16);
            assert!(c.abs() <= 1e-6 * b + 1e-300);
        }
        // (θ, z) spectrum of one (v, r) column
        let (nr, nt) = (g.nr, g.ntheta);
        let (j, i) = (g.v.n / 2, nr / 2);
        let mut col: Vec<C> = (0..g.nz)
            .flat_map(|z| (0..nt).map(move |c| (z, c)))
            .map(|(z, c)| C::new(pert[((z * g.v.n + j) * nr + i) * nt + c], 0.0))
            .collect();
        let mut ffts = FftCache::new();
        ffts.forward(&mut col, &[g.nz, nt], 0).unwrap();
        ffts.forward(&mut col, &[g.nz, nt], 1).unwrap();
        let (ms, ns) = (frequencies(nt), frequencies(g.nz));
        let peak = col.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for (idx, x) in col.iter().enumerate() {
            let (m, n) = (ms[idx % nt], ns[idx / nt]);
            if (m, n) != (5, 1) && (m, n) != (-5, -1) {
                assert!(x.norm() < 1e-12 * peak, "({m}, {n}) = {}", x.norm());
            }
        }
    }

    #[test]
    fn axisymmetric_state_has_no_parallel_term() {
        // z-independent data: ∂_zφ ≡ 0, only the bracket acts
        let g = small_grid();
        let p = RadialProfiles::medium(g.r_min, g.r_max);
        let mut rhs = DkRhs::new(g, p, Formulation::Perturbation);
        let mut f = initial_condition(&g, &p, Formulation::Perturbation, 1e-3, 3, 0);
        for x in f.iter_mut() {
            *x *= 1.0;
        }
        let hat = rhs.to_spectral(&f).unwrap();
        let mut out = vec![ZERO; g.len()];
        rhs.eval(&hat, &mut out).unwrap();
        assert!(rhs.potential().dz_phi.iter().all(|x| x.abs() < 1e-15));
        let pl = g.plane_len();
        assert!(out[pl..].iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn perturbation_run_conserves_mass() {
        let g = DkGrid::new(10, 12, 6, 16).unwrap();
        let mut params = DkParams::medium(
            10,
            12,
            6,
            16,
            Formulation::Perturbation,
            MethodId::Lawson(TableauId::Rk44),
            DkTime::Fixed(20.0),
        )
        .unwrap();
        params.grid = g;
        params.t_final = 200.0;
        let mut s = DkSolver::new(params).unwrap();
        let run = s.run().unwrap();
        assert_eq!(run.records.len(), 11);
        for r in &run.records {
            assert!(r.mass_rel_err.abs() < 1e-13, "{}", r.mass_rel_err);
        }
        assert!(run.records.iter().all(|r| r.electric_energy > 0.0));
    }

    #[test]
    fn hermitian_projection() {
        let nz = 6;
        let mut seed = 11;
        let mut h: Vec<C> = (0..nz * 3)
            .map(|_| C::new(lcg(&mut seed), lcg(&mut seed)))
            .collect();
        enforce_hermitian_z(&mut h, nz);
        for k in 1..nz {
            for c in 0..3 {
                assert_eq!(h[k * 3 + c], h[(nz - k) * 3 + c].conj());
            }
        }
        assert!(h[..3].iter().all(|x| x.im == 0.0));
    }

    #[test]
    fn growth_rate_of_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (0.02 * t).exp()).collect();
        assert!((growth_rate(&t, &y, 10.0, 40.0).unwrap() - 0.02).abs() < 1e-12);
    }
}
