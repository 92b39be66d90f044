use std::path::PathBuf;

use clap::{Args, ValueEnum};
use kinetic_core::config::{Experiment, RunConfig, RunParams};
use kinetic_core::dk::{DkParams, DkRun, DkSolver};
use kinetic_core::vp::{
    disc_indicator, run_linear_transport, LinearTransport, VpParams, VpRun, VpSolver,
};
use kinetic_core::{Error, MethodId, Result};

use crate::output::{csv, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VpCase {
    Landau,
    Bot,
    Linear,
}

#[derive(Debug, Args)]
pub struct VpRunArgs {
    /// TOML file with overrides; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub case: Option<VpCase>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub vscheme: Option<String>,
    #[arg(long)]
    pub nx: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nv: Option<i64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// CFL number `C` of `Δt = C Δv / ‖E‖_∞` (for `linear`: `Δt = C Δv`).
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Times at which `f` is dumped.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DkRunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `direct` or `pert`.
    #[arg(long)]
    pub formulation: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    /// `NR,NT,NZ,NV`.
    #[arg(long)]
    pub grid: Option<String>,
    /// `fixed:DT` or `richardson:TOL[,DTMAX]`.
    #[arg(long)]
    pub controller: Option<String>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad {what} `{s}`")))
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig, fallback: &str) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn snapshot_times(flag: &[f64], cfg: &RunConfig) -> Result<Vec<f64>> {
    let mut t = if flag.is_empty() {
        cfg.output.snapshots.clone().unwrap_or_default()
    } else {
        flag.to_vec()
    };
    if t.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "snapshot times must be non-negative".into(),
        ));
    }
    t.sort_by(f64::total_cmp);
    Ok(t)
}

pub fn vp_run(a: VpRunArgs) -> Result<()> {
    let mut cfg = load(&a.config)?;
    if let Some(m) = &a.method {
        cfg.method = Some(m.clone());
    }
    if let Some(s) = &a.vscheme {
        cfg.scheme = Some(s.clone());
    }
    cfg.grid.nx = a.nx.or(cfg.grid.nx);
    cfg.grid.nv = a.nv.or(cfg.grid.nv);
    if a.dt.is_some() {
        cfg.time.dt = a.dt;
        cfg.time.cfl = None;
    }
    if a.cfl.is_some() {
        cfg.time.cfl = a.cfl;
        cfg.time.dt = None;
    }
    cfg.time.t_final = a.tfinal.or(cfg.time.t_final);
    if let Some(dir) = &a.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    let case = match (a.case, &cfg.experiment) {
        (Some(c), _) => c,
        (None, Some(e)) => match e.parse::<Experiment>()? {
            Experiment::Landau => VpCase::Landau,
            Experiment::BumpOnTail => VpCase::Bot,
            Experiment::DriftKinetic => {
                return Err(Error::InvalidParameter(
                    "config names a drift-kinetic experiment; use `dk run`".into(),
                ))
            }
        },
        (None, None) => VpCase::Landau,
    };
    cfg.validate()?;
    let snaps = snapshot_times(&a.snapshots, &cfg)?;
    let dir = out_dir(
        &a.out,
        &cfg,
        &format!("out/vp_{}", format!("{case:?}").to_lowercase()),
    );
    let mut art = Artifacts::create(&dir, "vp run")?;
    art.set_config(&cfg);

    if case == VpCase::Linear {
        let method = cfg
            .method
            .as_deref()
            .map(str::parse::<MethodId>)
            .transpose()?
            .unwrap_or(MethodId::HochbruckOstermann);
        let mut p = LinearTransport::disc(method, cfg.time.cfl.unwrap_or(1.0));
        p.nx = cfg.grid.nx.map_or(p.nx, |n| n as usize);
        p.nv = cfg.grid.nv.map_or(p.nv, |n| n as usize);
        let dv = 2.0 * p.v_max / p.nv as f64;
        if let Some(dt) = cfg.time.dt {
            p.dt = dt;
        } else {
            p.dt = cfg.time.cfl.unwrap_or(1.0) * dv;
        }
        if let Some(tf) = cfg.time.t_final {
            p.steps = (tf / p.dt).round().max(1.0) as usize;
        }
        art.resolved("linear", &p);
        let ratios = run_linear_transport(&p, disc_indicator)?;
        art.write(
            "diag.csv",
            csv(
                "step,t,norm2_ratio",
                ratios
                    .iter()
                    .enumerate()
                    .map(|(n, r)| vec![n as f64, n as f64 * p.dt, *r]),
            ),
        )?;
        println!(
            "linear transport: {} steps, final ratio {:.6e}",
            p.steps, ratios[p.steps]
        );
        art.finish()?;
        return Ok(());
    }

    let experiment = if case == VpCase::Landau {
        Experiment::Landau
    } else {
        Experiment::BumpOnTail
    };
    let RunParams::Vp(params) = cfg.resolve(experiment)? else {
        unreachable!("vp experiment resolves to vp params")
    };
    art.resolved("vp", &params);
    let run = execute_vp(&mut art, params, &snaps, "")?;
    summarize_vp(&run);
    art.finish()?;
    match run.blowup {
        Some(t) => Err(Error::BlowUp {
            t,
            what: "distribution norm exceeded the blow-up threshold".into(),
        }),
        None => Ok(()),
    }
}

pub fn summarize_vp(run: &VpRun) {
    let last = run.records.last().expect("initial record");
    println!(
        "vp: {} steps to t = {:.4}, |dH/H| = {:.3e}, |dM/M| = {:.3e}{}",
        run.records.len() - 1,
        last.t,
        ((last.total_energy - run.records[0].total_energy) / run.records[0].total_energy).abs(),
        ((last.mass - run.records[0].mass) / run.records[0].mass).abs(),
        run.blowup
            .map_or(String::new(), |t| format!(", blow-up at t = {t:.4}"))
    );
}

/// Runs a VP case writing `{prefix}diag.csv` and `{prefix}f_t{T}.bin`
/// snapshots at the first step at or after each requested time.
pub fn execute_vp(
    art: &mut Artifacts,
    params: VpParams,
    snaps: &[f64],
    prefix: &str,
) -> Result<VpRun> {
    let mut solver = VpSolver::new(params)?;
    let mut next = 0;
    let run = solver.run_with(|s| {
        while next < snaps.len() && s.time() >= snaps[next] - 1e-9 {
            art.write(
                &format!("{prefix}f_t{}.bin", snaps[next]),
                s.snapshot()?.to_bytes(),
            )?;
            next += 1;
        }
        Ok(())
    })?;
    art.write(&format!("{prefix}diag.csv"), run.to_csv())?;
    Ok(run)
}

fn parse_grid(s: &str) -> Result<[i64; 4]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "grid must be NR,NT,NZ,NV, got `{s}`"
        )));
    }
    let mut g = [0i64; 4];
    for (x, p) in g.iter_mut().zip(parts) {
        *x = p
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad grid size `{p}`")))?;
    }
    Ok(g)
}

/// Applies a `fixed:DT` / `richardson:TOL[,DTMAX]` spec to the config.
fn apply_controller(cfg: &mut RunConfig, spec: &str) -> Result<()> {
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "fixed" => {
            cfg.time.dt = Some(parse_f64(args, "time step")?);
            cfg.time.tol = None;
        }
        "richardson" => {
            cfg.time.dt = None;
            let mut it = args.split(',').filter(|s| !s.is_empty());
            cfg.time.tol = it.next().map(|s| parse_f64(s, "tolerance")).transpose()?;
            if let Some(m) = it.next() {
                cfg.time.dt_max = Some(parse_f64(m, "dt_max")?);
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "controller must be fixed:DT or richardson:TOL[,DTMAX], got `{other}`"
            )))
        }
    }
    Ok(())
}

pub fn dk_run(a: DkRunArgs) -> Result<()> {
    let mut cfg = load(&a.config)?;
    if let Some(f) = &a.formulation {
        cfg.formulation = Some(f.clone());
    }
    if let Some(m) = &a.method {
        cfg.method = Some(m.clone());
    }
    if let Some(g) = &a.grid {
        let [nr, nt, nz, nv] = parse_grid(g)?;
        cfg.grid.nr = Some(nr);
        cfg.grid.ntheta = Some(nt);
        cfg.grid.nz = Some(nz);
        cfg.grid.nv = Some(nv);
    }
    if let Some(c) = &a.controller {
        apply_controller(&mut cfg, c)?;
    }
    cfg.time.t_final = a.tfinal.or(cfg.time.t_final);
    if let Some(dir) = &a.out {
        cfg.output.dir = Some(dir.display().to_string());
    }
    cfg.validate()?;
    if let Some(e) = &cfg.experiment {
        if e.parse::<Experiment>()? != Experiment::DriftKinetic {
            return Err(Error::InvalidParameter(
                "config names a Vlasov-Poisson experiment; use `vp run`".into(),
            ));
        }
    }
    let snaps = snapshot_times(&a.snapshots, &cfg)?;
    let RunParams::Dk(params) = cfg.resolve(Experiment::DriftKinetic)? else {
        unreachable!("dk experiment resolves to dk params")
    };
    let dir = out_dir(
        &a.out,
        &cfg,
        &format!("out/dk_{}", params.formulation.name()),
    );
    let mut art = Artifacts::create(&dir, "dk run")?;
    art.set_config(&cfg);
    art.resolved("dk", &params);
    let run = execute_dk(&mut art, params, &snaps, "")?;
    summarize_dk(&run);
    art.finish()?;
    Ok(())
}

pub fn summarize_dk(run: &DkRun) {
    let accepted = run.records.iter().filter(|r| r.accepted).count() - 1;
    let rejected = run.records.len() - 1 - accepted;
    let last = run
        .records
        .iter()
        .rev()
        .find(|r| r.accepted)
        .expect("initial record");
    println!(
        "dk: {accepted} steps ({rejected} rejected) to t = {:.2}, E = {:.4e}, |dM/M| = {:.3e}, |dN/N| = {:.3e}",
        last.t, last.electric_energy, last.mass_rel_err, last.energy_rel_err
    );
}

/// Runs a DK case writing `{prefix}diag.csv` and `f`/density slices at the
/// first accepted step at or after each requested time.
pub fn execute_dk(
    art: &mut Artifacts,
    params: DkParams,
    snaps: &[f64],
    prefix: &str,
) -> Result<DkRun> {
    let mut solver = DkSolver::new(params)?;
    let mut next = 0;
    let run = solver.run_with(|s| {
        while next < snaps.len() && s.time() >= snaps[next] - 1e-9 {
            let (f, n) = s.snapshots()?;
            art.write(&format!("{prefix}f_t{}.bin", snaps[next]), f.to_bytes())?;
            art.write(
                &format!("{prefix}density_t{}.bin", snaps[next]),
                n.to_bytes(),
            )?;
            next += 1;
        }
        Ok(())
    })?;
    art.write(&format!("{prefix}diag.csv"), run.to_csv())?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controller_specs() {
        let mut c = RunConfig::default();
        apply_controller(&mut c, "fixed:20").unwrap();
        assert_eq!(c.time.dt, Some(20.0));
        apply_controller(&mut c, "richardson:1e-3,30").unwrap();
        assert_eq!(
            (c.time.dt, c.time.tol, c.time.dt_max),
            (None, Some(1e-3), Some(30.0))
        );
        assert!(apply_controller(&mut c, "pid:1").is_err());
        assert!(apply_controller(&mut c, "fixed:x").is_err());
    }

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("32,32,16,64").unwrap(), [32, 32, 16, 64]);
        assert!(parse_grid("32,32").is_err());
    }
}
