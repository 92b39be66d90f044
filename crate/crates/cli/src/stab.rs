use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use kinetic_core::stability::{
    amplification, boundary_trace, sigma_lw5, ymax_exp, ymax_lawson, ExpScanConfig, BISECT_TOL,
};
use kinetic_core::{Complex64, Error, MethodId, Result, TableauId};

use crate::output::{csv, Artifacts};

#[derive(Debug, Subcommand)]
pub enum StabCmd {
    /// Imaginary-axis CFL numbers of the Lawson tableaus.
    YmaxLawson,
    /// Relaxed imaginary-axis CFL number of a method and its per-aΔt curve.
    YmaxExp(YmaxExpArgs),
    /// LW5 stretching factor of a tableau.
    Sigma(SigmaArgs),
    /// Stability boundary polyline of a tableau.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct YmaxExpArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 40.0)]
    pub a_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub a_step: f64,
    /// Directory for the per-aΔt CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    #[arg(long, default_value = "rk44")]
    pub tableau: String,
    #[arg(long, default_value_t = 2048)]
    pub angles: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value = "rk44")]
    pub tableau: String,
    #[arg(long, default_value_t = 720)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn tableau_id(key: &str) -> Result<TableauId> {
    TableauId::from_key(&key.to_ascii_lowercase())
        .ok_or_else(|| Error::UnknownMethod(key.to_string()))
}

pub fn run(cmd: StabCmd) -> Result<()> {
    match cmd {
        StabCmd::YmaxLawson => print!("{}", table1()),
        StabCmd::YmaxExp(a) => {
            let method: MethodId = a.method.parse()?;
            if !(a.a_step > 0.0) || !(a.a_max >= 0.0) {
                return Err(Error::InvalidParameter(
                    "need a_step > 0 and a_max >= 0".into(),
                ));
            }
            let (y, scan) = ymax_exp(
                method,
                a.epsilon,
                &ExpScanConfig::uniform(a.a_max, a.a_step),
            )?;
            println!(
                "{} eps={} y_max={:.6} at a_dt={}",
                method,
                a.epsilon,
                y,
                scan.a_dt[scan.argmin()]
            );
            if let Some(dir) = a.out {
                let mut art = Artifacts::create(&dir, "stab ymax-exp")?;
                art.write(
                    &format!("ymax_{}_eps{}.csv", method.name(), a.epsilon),
                    scan.to_csv(),
                )?;
                art.finish()?;
            }
        }
        StabCmd::Sigma(a) => {
            let id = tableau_id(&a.tableau)?;
            let scan = sigma_lw5(&id.tableau(), a.angles, BISECT_TOL)?;
            println!("{} sigma={:.6}", id.key(), scan.sigma);
            if let Some(dir) = a.out {
                let mut art = Artifacts::create(&dir, "stab sigma")?;
                art.write(&format!("sigma_{}.csv", id.key()), scan.to_csv())?;
                art.finish()?;
            }
        }
        StabCmd::Trace(a) => {
            let id = tableau_id(&a.tableau)?;
            let text = trace_csv(id, a.points)?;
            match a.out {
                Some(dir) => {
                    let mut art = Artifacts::create(&dir, "stab trace")?;
                    art.write(&format!("boundary_{}.csv", id.key()), text)?;
                    art.finish()?;
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

pub fn table1() -> String {
    let mut s = String::from("tableau     y_max        closed form\n");
    for (id, exact) in [
        (TableauId::Rk32Best, "2"),
        (TableauId::Rk33, "sqrt(3)"),
        (TableauId::Rk44, "2 sqrt(2)"),
        (TableauId::Rk22, "0"),
    ] {
        let y = ymax_lawson(&id.tableau(), BISECT_TOL);
        let _ = writeln!(s, "{:<11} {:<12.7} {}", id.key(), y, exact);
    }
    s
}

pub const TABLE3_EPS: [f64; 4] = [0.0, 1e-3, 1e-2, 1e-1];

/// Relaxed CFL numbers of the exponential methods; returns the table text
/// and the per-aΔt curves keyed by file name.
pub fn table3(cfg: &ExpScanConfig) -> Result<(String, Vec<(String, String)>)> {
    let mut s = String::from("method               eps=0      eps=1e-3   eps=1e-2   eps=1e-1\n");
    let mut curves = Vec::new();
    for m in MethodId::EXPONENTIAL {
        let _ = write!(s, "{:<20}", m.name());
        for eps in TABLE3_EPS {
            let (y, scan) = ymax_exp(m, eps, cfg)?;
            let _ = write!(s, " {:<10.4}", y);
            curves.push((format!("ymax_{}_eps{}.csv", m.name(), eps), scan.to_csv()));
        }
        s.push('\n');
    }
    Ok((s, curves))
}

pub const TABLE4: [TableauId; 3] = [TableauId::Rk32Best, TableauId::Rk33, TableauId::Rk44];

pub fn table4(n_angles: usize) -> Result<(String, Vec<(String, String)>)> {
    let mut s = String::from("tableau     sigma\n");
    let mut curves = Vec::new();
    for id in TABLE4 {
        let scan = sigma_lw5(&id.tableau(), n_angles, BISECT_TOL)?;
        let _ = writeln!(s, "{:<11} {:.4}", id.key(), scan.sigma);
        curves.push((format!("sigma_{}.csv", id.key()), scan.to_csv()));
    }
    Ok((s, curves))
}

/// `re,im` polyline of the RK stability boundary.
pub fn trace_csv(id: TableauId, points: usize) -> Result<String> {
    if points < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 points, got {points}"
        )));
    }
    let angles: Vec<f64> = (0..points)
        .map(|k| 2.0 * PI * k as f64 / points as f64)
        .collect();
    let pts = boundary_trace(&id.tableau(), &angles)?;
    Ok(csv("re,im", pts.iter().map(|z| vec![z.re, z.im])))
}

/// `|R(z)|` of `method` at fixed `aΔt` on a rectangle of the z-plane.
pub fn amplification_grid(
    method: MethodId,
    a_dt: f64,
    re: (f64, f64),
    im: (f64, f64),
    n: usize,
) -> String {
    let lin = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = Complex64::new(lin(re, j), lin(im, i));
            rows.push(vec![z.re, z.im, amplification(method, a_dt, z)]);
        }
    }
    csv("re,im,amplification", rows)
}
