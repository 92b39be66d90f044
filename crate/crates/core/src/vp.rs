//! 1D1V Vlasov-Poisson: Fourier in x, CD2 or WENO5 in v, Lawson or
//! exponential time stepping with the free streaming `v ∂_x` as linear part.
//!
//! The state is `f̂[j][n]`: velocity node `j` (row) and x-Fourier mode `n`
//! (column, FFT order).

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrators::{DiagonalPropagator, Integrator, MethodId};
use crate::par;
use crate::snapshot::{Axis, Snapshot};
use crate::spectral::{is_nyquist, poisson_e, wavenumbers, FftCache};
use crate::vadv::{cd2_dv, v_transport_term, Boundary, VGrid, VScheme, WenoWork};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Phase-space grid: `N_x` periodic points on `[0, L)` times a [`VGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpGrid {
    pub nx: usize,
    pub length: f64,
    pub v: VGrid,
}

impl VpGrid {
    pub fn new(nx: usize, length: f64, nv: usize, v_max: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 x points, got {nx}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            nx,
            length,
            v: VGrid::new(nv, v_max)?,
        })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn len(&self) -> usize {
        self.nx * self.v.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wavenumbers used by the streaming operator; the unpaired Nyquist mode
    /// of an even grid does not move.
    pub fn stream_wavenumbers(&self) -> Vec<f64> {
        let mut k = wavenumbers(self.nx, self.length);
        if self.nx.is_multiple_of(2) {
            k[self.nx / 2] = 0.0;
        }
        k
    }
}

/// `d_{j,n} = −i v_j k_n`, one symbol per state entry.
pub fn linear_propagator(grid: &VpGrid) -> DiagonalPropagator {
    let k = grid.stream_wavenumbers();
    let mut symbols = Vec::with_capacity(grid.len());
    for j in 0..grid.v.n {
        let v = grid.v.v(j);
        symbols.extend(k.iter().map(|&kn| C::new(0.0, -v * kn)));
    }
    DiagonalPropagator::new(symbols)
}

/// Forward transform of real samples `f[j][i]` along x.
pub fn to_spectral(grid: &VpGrid, f: &[f64], ffts: &mut FftCache) -> Result<Vec<C>> {
    let mut hat: Vec<C> = f.iter().map(|&x| C::new(x, 0.0)).collect();
    ffts.forward(&mut hat, &[grid.v.n, grid.nx], 1)?;
    Ok(hat)
}

/// Real samples `f[j][i]` from the spectral state.
pub fn to_physical(grid: &VpGrid, hat: &[C], ffts: &mut FftCache) -> Result<Vec<f64>> {
    let mut buf = hat.to_vec();
    ffts.inverse(&mut buf, &[grid.v.n, grid.nx], 1)?;
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Largest deviation from `f̂_{-n} = conj(f̂_n)` over all rows.
pub fn hermitian_defect(grid: &VpGrid, hat: &[C]) -> f64 {
    let nx = grid.nx;
    let mut worst = 0.0f64;
    for row in hat.chunks(nx) {
        for n in 0..nx {
            let m = (nx - n) % nx;
            worst = worst.max((row[n] - row[m].conj()).norm());
        }
    }
    worst
}

/// Projects every row onto Hermitian-symmetric spectra (real `f`).
pub fn enforce_hermitian(grid: &VpGrid, hat: &mut [C]) {
    let nx = grid.nx;
    for row in hat.chunks_mut(nx) {
        row[0].im = 0.0;
        for n in 1..=(nx - 1) / 2 {
            let avg = 0.5 * (row[n] + row[nx - n].conj());
            row[n] = avg;
            row[nx - n] = avg.conj();
        }
        if is_nyquist(nx / 2, nx) {
            row[nx / 2].im = 0.0;
        }
    }
}

/// Evaluates the nonlinear term `F = −(E ∂_v f)^` and related fields.
#[derive(Debug, Clone)]
pub struct VpRhs {
    grid: VpGrid,
    scheme: VScheme,
    ffts: FftCache,
    phys: Vec<C>,
    cols: Vec<f64>,
    term: Vec<f64>,
    field: Vec<f64>,
    deficit: f64,
}

impl VpRhs {
    pub fn new(grid: VpGrid, scheme: VScheme) -> Self {
        let n = grid.len();
        Self {
            grid,
            scheme,
            ffts: FftCache::new(),
            phys: vec![ZERO; n],
            cols: vec![0.0; n],
            term: vec![0.0; n],
            field: vec![0.0; grid.nx],
            deficit: 0.0,
        }
    }

    pub fn grid(&self) -> &VpGrid {
        &self.grid
    }

    /// E on the x-grid from the most recent evaluation.
    pub fn field(&self) -> &[f64] {
        &self.field
    }

    /// Mean of `∫f dv` minus one at the most recent evaluation.
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Density `∫ f dv` on the x-grid from physical samples `f[j][i]`.
    pub fn density(grid: &VpGrid, f: &[f64]) -> Vec<f64> {
        let w = grid.v.trapezoid_weights();
        let mut rho = vec![0.0; grid.nx];
        for (j, row) in f.chunks(grid.nx).enumerate() {
            for (r, x) in rho.iter_mut().zip(row) {
                *r += w[j] * x;
            }
        }
        rho
    }

    /// Updates [`Self::field`] from the spectral state and returns `‖E‖_∞`.
    pub fn compute_field(&mut self, hat: &[C]) -> Result<f64> {
        self.load_physical(hat)?;
        self.solve_field()?;
        Ok(self.field.iter().fold(0.0f64, |m, e| m.max(e.abs())))
    }

    fn load_physical(&mut self, hat: &[C]) -> Result<()> {
        if hat.len() != self.grid.len() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                got: hat.len(),
            });
        }
        self.phys.copy_from_slice(hat);
        self.ffts
            .inverse(&mut self.phys, &[self.grid.v.n, self.grid.nx], 1)
    }

    fn solve_field(&mut self) -> Result<()> {
        let real: Vec<f64> = self.phys.iter().map(|z| z.re).collect();
        let rho = Self::density(&self.grid, &real);
        let sol = poisson_e(&rho, self.grid.length, &mut self.ffts)?;
        self.field = sol.e;
        self.deficit = sol.deficit;
        Ok(())
    }

    /// `out = −(E ∂_v f)^`, closed at `±v_max` (zero ghosts, no boundary flux).
    pub fn eval(&mut self, hat: &[C], out: &mut [C]) -> Result<()> {
        let (nx, nv) = (self.grid.nx, self.grid.v.n);
        self.load_physical(hat)?;
        self.solve_field()?;
        let real: Vec<f64> = self.phys.iter().map(|z| z.re).collect();
        par::transpose(&real, nv, nx, &mut self.cols);
        let (scheme, dv, field, cols) = (self.scheme, self.grid.v.dv, &self.field, &self.cols);
        par::for_each_chunk_mut(&mut self.term, nv * 8, |off, chunk| {
            let mut work = WenoWork::default();
            for (r, out_col) in chunk.chunks_mut(nv).enumerate() {
                let i = off / nv + r;
                let col = &cols[i * nv..(i + 1) * nv];
                v_transport_term(
                    scheme,
                    col,
                    field[i],
                    dv,
                    Boundary::Closed,
                    &mut work,
                    out_col,
                );
            }
        });
        let mut rows = vec![0.0; nv * nx];
        par::transpose(&self.term, nx, nv, &mut rows);
        for (o, t) in out.iter_mut().zip(&rows) {
            *o = C::new(-t, 0.0);
        }
        self.ffts.forward(out, &[nv, nx], 1)
    }
}

/// Per-step scalar outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpRecord {
    pub t: f64,
    pub dt: f64,
    /// `‖E‖_{L²}`.
    pub electric_energy: f64,
    /// `½∫∫v²f + ½∫E²`.
    pub total_energy: f64,
    /// `∫∫ f` by the rectangle rule in v, the exact invariant of the closed scheme.
    pub mass: f64,
    /// `(∫∫ f²)^{1/2}` (rectangle rule).
    pub l2norm: f64,
    pub e_inf: f64,
}

impl VpRecord {
    pub const CSV_HEADER: &'static str = "t,dt,electric_energy,total_energy,mass,l2norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t, self.dt, self.electric_energy, self.total_energy, self.mass, self.l2norm
        )
    }
}

/// Diagnostics from physical samples and the field on the x-grid.
pub fn diagnostics_from(grid: &VpGrid, f: &[f64], field: &[f64]) -> (f64, f64, f64, f64) {
    let dx = grid.dx();
    let w = grid.v.trapezoid_weights();
    let (mut mass, mut kinetic, mut sq) = (0.0, 0.0, 0.0);
    for (j, row) in f.chunks(grid.nx).enumerate() {
        let v = grid.v.v(j);
        let s: f64 = row.iter().sum();
        mass += s;
        kinetic += w[j] * v * v * s;
        sq += row.iter().map(|x| x * x).sum::<f64>();
    }
    let e2: f64 = field.iter().map(|e| e * e).sum::<f64>() * dx;
    let electric = e2.sqrt();
    (
        electric,
        0.5 * kinetic * dx + 0.5 * e2,
        mass * dx * grid.v.dv,
        (sq * dx * grid.v.dv).sqrt(),
    )
}

/// Time step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// `Δt_n = min(cap, C Δv / ‖E^n‖_∞)`.
    Cfl {
        c: f64,
        cap: Option<f64>,
    },
}

/// `C Δv / ‖E‖_∞`, clamped by `cap`; infinite without a cap when E ≡ 0.
pub fn cfl_dt(c: f64, e_inf: f64, dv: f64, cap: Option<f64>) -> f64 {
    let raw = if e_inf > 0.0 {
        c * dv / e_inf
    } else {
        f64::INFINITY
    };
    match cap {
        Some(cap) => raw.min(cap),
        None => raw,
    }
}

/// Initial data of the named test cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VpInit {
    /// `M(v)(1 + α cos(kx))`.
    Landau { alpha: f64, k: f64 },
    /// `[0.9 M(v) + 0.2 e^{−2(v−4.5)²}/√(2π)](1 + α cos(kx))`.
    BumpOnTail { alpha: f64, k: f64 },
}

impl VpInit {
    pub fn landau() -> Self {
        VpInit::Landau {
            alpha: 0.001,
            k: 0.5,
        }
    }

    pub fn bump_on_tail() -> Self {
        VpInit::BumpOnTail {
            alpha: 0.04,
            k: 0.3,
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        match self {
            VpInit::Landau { k, .. } => VpInit::Landau { alpha, k },
            VpInit::BumpOnTail { k, .. } => VpInit::BumpOnTail { alpha, k },
        }
    }

    pub fn with_k(self, k: f64) -> Self {
        match self {
            VpInit::Landau { alpha, .. } => VpInit::Landau { alpha, k },
            VpInit::BumpOnTail { alpha, .. } => VpInit::BumpOnTail { alpha, k },
        }
    }

    pub fn value(&self, x: f64, v: f64) -> f64 {
        let norm = 1.0 / (2.0 * PI).sqrt();
        match *self {
            VpInit::Landau { alpha, k } => {
                norm * (-0.5 * v * v).exp() * (1.0 + alpha * (k * x).cos())
            }
            VpInit::BumpOnTail { alpha, k } => {
                let bulk = 0.9 * norm * (-0.5 * v * v).exp();
                let beam = 0.2 * norm * (-2.0 * (v - 4.5).powi(2)).exp();
                (bulk + beam) * (1.0 + alpha * (k * x).cos())
            }
        }
    }

    /// Samples `f[j][i]` on the grid.
    pub fn sample(&self, grid: &VpGrid) -> Vec<f64> {
        let mut f = Vec::with_capacity(grid.len());
        for j in 0..grid.v.n {
            let v = grid.v.v(j);
            f.extend((0..grid.nx).map(|i| self.value(grid.x(i), v)));
        }
        f
    }
}

/// Settings of a Vlasov-Poisson run.
#[derive(Debug, Clone, PartialEq)]
pub struct VpParams {
    pub grid: VpGrid,
    pub init: VpInit,
    pub method: MethodId,
    pub scheme: VScheme,
    pub step: TimeStep,
    pub t_final: f64,
    /// Stop when `‖f‖` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
}

impl VpParams {
    /// Landau damping on `[0, 4π] × [−8, 8]` with 81 × 128 points.
    pub fn landau(method: MethodId, scheme: VScheme, dt: f64) -> Self {
        Self {
            grid: VpGrid::new(81, 4.0 * PI, 128, 8.0).expect("valid grid"),
            init: VpInit::landau(),
            method,
            scheme,
            step: TimeStep::Fixed(dt),
            t_final: 40.0,
            blowup_factor: 1e6,
        }
    }

    /// Bump-on-tail on `[0, 20π] × [−8, 8]` with 135 × 256 points.
    pub fn bump_on_tail(method: MethodId, scheme: VScheme, step: TimeStep) -> Self {
        Self {
            grid: VpGrid::new(135, 20.0 * PI, 256, 8.0).expect("valid grid"),
            init: VpInit::bump_on_tail(),
            method,
            scheme,
            step,
            t_final: 40.0,
            blowup_factor: 1e6,
        }
    }
}

/// Result of a run: per-step records and the blow-up time if any.
#[derive(Debug, Clone, PartialEq)]
pub struct VpRun {
    pub records: Vec<VpRecord>,
    pub blowup: Option<f64>,
}

impl VpRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(VpRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Time-stepping driver.
#[derive(Debug, Clone)]
pub struct VpSolver {
    params: VpParams,
    rhs: VpRhs,
    prop: DiagonalPropagator,
    stepper: Integrator,
    state: Vec<C>,
    t: f64,
}

impl VpSolver {
    pub fn new(params: VpParams) -> Result<Self> {
        let grid = params.grid;
        let mut ffts = FftCache::new();
        let state = to_spectral(&grid, &params.init.sample(&grid), &mut ffts)?;
        Ok(Self {
            rhs: VpRhs::new(grid, params.scheme),
            prop: linear_propagator(&grid),
            stepper: Integrator::new(params.method),
            state,
            t: 0.0,
            params,
        })
    }

    pub fn state(&self) -> &[C] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [C] {
        &mut self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &VpParams {
        &self.params
    }

    /// Physical samples `f[j][i]`.
    pub fn physical(&mut self) -> Result<Vec<f64>> {
        to_physical(&self.params.grid, &self.state, &mut self.rhs.ffts)
    }

    /// Current diagnostics; `dt` is the step that produced this state.
    pub fn record(&mut self, dt: f64) -> Result<VpRecord> {
        let e_inf = self.rhs.compute_field(&self.state)?;
        let f = self.physical()?;
        let (electric_energy, total_energy, mass, l2norm) =
            diagnostics_from(&self.params.grid, &f, self.rhs.field());
        Ok(VpRecord {
            t: self.t,
            dt,
            electric_energy,
            total_energy,
            mass,
            l2norm,
            e_inf,
        })
    }

    /// One step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let rhs = &mut self.rhs;
        let mut f = |_: f64, u: &[C], out: &mut [C]| rhs.eval(u, out);
        self.stepper
            .step(&mut self.prop, &mut f, self.t, &mut self.state, dt)?;
        enforce_hermitian(&self.params.grid, &mut self.state);
        self.t += dt;
        Ok(())
    }

    /// Step size for the next step from the current state.
    pub fn next_dt(&mut self) -> Result<f64> {
        let remaining = self.params.t_final - self.t;
        let dt = match self.params.step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl { c, cap } => {
                let e_inf = self.rhs.compute_field(&self.state)?;
                cfl_dt(c, e_inf, self.params.grid.v.dv, cap)
            }
        };
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} is not usable; set a cap"
            )));
        }
        // land on t_final without a sliver step
        Ok(if dt >= remaining * (1.0 - 1e-12) {
            remaining
        } else {
            dt
        })
    }

    /// `f(v, x)` as a slice dump.
    pub fn snapshot(&mut self) -> Result<Snapshot> {
        let g = self.params.grid;
        Ok(Snapshot {
            name: "f".to_string(),
            t: self.t,
            rows: Axis {
                name: "v",
                n: g.v.n,
                min: -g.v.v_max,
                max: g.v.v_max,
            },
            cols: Axis {
                name: "x",
                n: g.nx,
                min: 0.0,
                max: g.length,
            },
            values: self.physical()?,
        })
    }

    /// Runs to `t_final`, recording after every step; stops early on blow-up.
    pub fn run(&mut self) -> Result<VpRun> {
        self.run_with(|_| Ok(()))
    }

    /// As [`VpSolver::run`], calling `observe` on the initial state and after
    /// every step.
    pub fn run_with(&mut self, mut observe: impl FnMut(&mut Self) -> Result<()>) -> Result<VpRun> {
        let first = self.record(0.0)?;
        observe(self)?;
        let limit = first.l2norm * self.params.blowup_factor;
        let mut records = vec![first];
        let mut blowup = None;
        while self.params.t_final - self.t > 1e-12 * self.params.t_final.max(1.0) {
            let dt = self.next_dt()?;
            self.step(dt)?;
            let rec = self.record(dt)?;
            records.push(rec);
            observe(self)?;
            if !(rec.l2norm <= limit) || !rec.total_energy.is_finite() {
                blowup = Some(self.t);
                break;
            }
        }
        Ok(VpRun { records, blowup })
    }
}

/// Damping (or growth) rate from a least-squares line through the
/// logarithms of the local maxima of `values`.
pub fn fit_peak_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let mut pts = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] > 0.0 {
            pts.push((times[i], values[i].ln()));
        }
    }
    linear_fit(&pts).map(|(slope, _)| slope)
}

/// Least-squares `(slope, intercept)`; `None` with fewer than two points.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Constant-coefficient transport `∂_t f + d ∂_x f + b ∂_v f = 0` on
/// `[0, 2π) × [−v_max, v_max)`, periodic in both directions, CD2 in v.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransport {
    pub d: f64,
    pub b: f64,
    pub nx: usize,
    pub nv: usize,
    pub v_max: f64,
    pub method: MethodId,
    pub dt: f64,
    pub steps: usize,
}

impl LinearTransport {
    /// The discontinuous-data setting: `d = b = 1`, `v_max = 3`, 100 steps
    /// with `Δt = y Δv / b` on a `128 × 128` grid, fine enough in x for
    /// `k Δt` to reach the `aΔt` where the relaxed domains are narrowest.
    pub fn disc(method: MethodId, y: f64) -> Self {
        let (nx, nv, v_max) = (128, 128, 3.0);
        let dv = 2.0 * v_max / nv as f64;
        Self {
            d: 1.0,
            b: 1.0,
            nx,
            nv,
            v_max,
            method,
            dt: y * dv,
            steps: 100,
        }
    }
}

/// Indicator of the unit disc centred at `(π, 0)`.
pub fn disc_indicator(x: f64, v: f64) -> f64 {
    if ((x - PI).powi(2) + v * v).sqrt() <= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Runs the linear transport problem and returns `‖fⁿ‖²/‖f⁰‖²` for
/// `n = 0..=steps`.
pub fn run_linear_transport(
    p: &LinearTransport,
    init: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    let grid = VpGrid::new(p.nx, 2.0 * PI, p.nv, p.v_max)?;
    let mut ffts = FftCache::new();
    let mut f0 = Vec::with_capacity(grid.len());
    for j in 0..p.nv {
        let v = grid.v.v(j);
        f0.extend((0..p.nx).map(|i| init(grid.x(i), v)));
    }
    let mut u = to_spectral(&grid, &f0, &mut ffts)?;
    let k = grid.stream_wavenumbers();
    let symbols: Vec<C> = (0..p.nv)
        .flat_map(|_| k.iter().map(|&kn| C::new(0.0, -p.d * kn)))
        .collect();
    let mut prop = DiagonalPropagator::new(symbols);
    let mut stepper = Integrator::new(p.method);
    let (nx, nv, dv, b) = (p.nx, p.nv, grid.v.dv, p.b);
    let mut rhs = |_: f64, u: &[C], out: &mut [C]| -> Result<()> {
        let mut re = vec![0.0; nv];
        let mut im = vec![0.0; nv];
        let mut dre = vec![0.0; nv];
        let mut dim = vec![0.0; nv];
        for n in 0..nx {
            for j in 0..nv {
                re[j] = u[j * nx + n].re;
                im[j] = u[j * nx + n].im;
            }
            cd2_dv(&re, dv, Boundary::Periodic, &mut dre);
            cd2_dv(&im, dv, Boundary::Periodic, &mut dim);
            for j in 0..nv {
                out[j * nx + n] = -b * C::new(dre[j], dim[j]);
            }
        }
        Ok(())
    };
    let norm2 = |u: &[C]| u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let n0 = norm2(&u);
    let mut ratios = vec![1.0];
    let mut t = 0.0;
    for _ in 0..p.steps {
        stepper.step(&mut prop, &mut rhs, t, &mut u, p.dt)?;
        t += p.dt;
        ratios.push(norm2(&u) / n0);
    }
    Ok(ratios)
}
