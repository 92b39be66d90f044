use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use kinetic_core::dk::{DkParams, DkSolver, DkTime, Formulation, RadialEnds};
use kinetic_core::stability::{ymax_exp, ExpScanConfig};
use kinetic_core::vadv::{VScheme, Weno5};
use kinetic_core::vp::{
    cfl_dt, disc_indicator, fit_peak_rate, run_linear_transport, LinearTransport, TimeStep, VpGrid,
    VpParams,
};
use kinetic_core::{MethodId, Result, TableauId};

use crate::output::{csv, Artifacts};
use crate::runs::{execute_dk, execute_vp, summarize_dk, summarize_vp};
use crate::stab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Target {
    Table1,
    Table3,
    Table4,
    FigRkDomains,
    FigExpDomains,
    FigYmaxCurves,
    FigInstab,
    Landau,
    BotEnergy,
    BotSnapshots,
    CflSharpness,
    DkCoarseDirect,
    DkCoarsePert,
    DkConservation,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// Output directory (default `out/<target>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shortens the simulated time of the kinetic targets.
    #[arg(long)]
    pub tfinal: Option<f64>,
}

const LRK44: MethodId = MethodId::Lawson(TableauId::Rk44);

/// Reference relaxed CFL numbers used as the time steps of the
/// discontinuous-data experiment, per method and ε.
pub const INSTAB_STEPS: [(MethodId, [(f64, f64); 3]); 2] = [
    (
        MethodId::HochbruckOstermann,
        [(1e-3, 0.250), (1e-2, 0.501), (1e-1, 1.702)],
    ),
    (
        MethodId::CoxMatthews,
        [(1e-3, 0.150), (1e-2, 0.450), (1e-1, 1.351)],
    ),
];

pub fn run(a: ReproduceArgs) -> Result<()> {
    let name = a
        .target
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    let mut art = Artifacts::create(&dir, &format!("reproduce {name}"))?;
    let tf = a.tfinal;
    match a.target {
        Target::Table1 => {
            let t = stab::table1();
            print!("{t}");
            art.write("table1.txt", t)?;
        }
        Target::Table3 => {
            let cfg = ExpScanConfig::default();
            art.resolved(
                "scan",
                &(
                    cfg.a_dt.len(),
                    cfg.a_dt.last(),
                    cfg.y_step,
                    cfg.y_limit,
                    cfg.tol,
                ),
            );
            let (t, curves) = stab::table3(&cfg)?;
            print!("{t}");
            art.write("table3.txt", t)?;
            for (file, body) in curves {
                art.write(&file, body)?;
            }
        }
        Target::Table4 => {
            let (t, curves) = stab::table4(2048)?;
            print!("{t}");
            art.write("table4.txt", t)?;
            for (file, body) in curves {
                art.write(&file, body)?;
            }
        }
        Target::FigRkDomains => {
            for id in TableauId::ALL {
                art.write(
                    &format!("boundary_{}.csv", id.key()),
                    stab::trace_csv(id, 720)?,
                )?;
            }
        }
        Target::FigExpDomains => {
            for m in MethodId::EXPONENTIAL {
                for a_dt in [1.1, 3.4] {
                    art.write(
                        &format!("domain_{}_a{}.csv", m.name(), a_dt),
                        stab::amplification_grid(m, a_dt, (-4.0, 2.0), (-4.0, 4.0), 161),
                    )?;
                }
            }
        }
        Target::FigYmaxCurves => {
            let cfg = ExpScanConfig::uniform(40.0, 0.01);
            let mut s = String::from("method eps y_max a_dt\n");
            for (m, eps) in [
                (MethodId::ExpRk22, 1e-2),
                (MethodId::HochbruckOstermann, 1e-2),
                (MethodId::CoxMatthews, 0.0),
                (MethodId::CoxMatthews, 1e-2),
            ] {
                let (y, scan) = ymax_exp(m, eps, &cfg)?;
                let _ = writeln!(
                    s,
                    "{} {} {:.6} {}",
                    m.name(),
                    eps,
                    y,
                    scan.a_dt[scan.argmin()]
                );
                art.write(&format!("ymax_{}_eps{}.csv", m.name(), eps), scan.to_csv())?;
            }
            print!("{s}");
            art.write("summary.txt", s)?;
        }
        Target::FigInstab => {
            let mut s = String::from("method eps y n=100 ratio bound\n");
            for (m, rows) in INSTAB_STEPS {
                for (eps, y) in rows {
                    let p = LinearTransport::disc(m, y);
                    art.resolved(&format!("{} eps={eps}", m.name()), &p);
                    let ratios = run_linear_transport(&p, disc_indicator)?;
                    let bound = |n: usize| (1.0 + eps).powi(2 * n as i32);
                    art.write(
                        &format!("instab_{}_eps{}.csv", m.name(), eps),
                        csv(
                            "step,norm2_ratio,bound",
                            ratios
                                .iter()
                                .enumerate()
                                .map(|(n, r)| vec![n as f64, *r, bound(n)]),
                        ),
                    )?;
                    let _ = writeln!(
                        s,
                        "{} {} {} {:.6e} {:.6e}",
                        m.name(),
                        eps,
                        y,
                        ratios[100],
                        bound(100)
                    );
                }
            }
            print!("{s}");
            art.write("summary.txt", s)?;
        }
        Target::Landau => {
            let mut p = VpParams::landau(LRK44, VScheme::Weno5(Weno5::default()), 0.125);
            p.t_final = tf.unwrap_or(p.t_final);
            art.resolved("lawson_rk44+weno5", &p);
            let run = execute_vp(&mut art, p, &[], "")?;
            summarize_vp(&run);
            let t: Vec<f64> = run.records.iter().map(|r| r.t).collect();
            let e: Vec<f64> = run.records.iter().map(|r| r.electric_energy).collect();
            let rate = fit_peak_rate(&t, &e);
            let mut q = VpParams::landau(MethodId::HochbruckOstermann, VScheme::Cd2, 1.0);
            q.t_final = tf.unwrap_or(q.t_final);
            art.resolved("hochbruck_ostermann+cd2", &q);
            let ho = execute_vp(&mut art, q, &[], "ho_cd2_")?;
            summarize_vp(&ho);
            let s = format!(
                "damping rate (peak fit, lawson_rk44+weno5, dt=1/8): {}\nhochbruck_ostermann+cd2 dt=1 blow-up: {:?}\n",
                rate.map_or("n/a".to_string(), |r| format!("{r:.5}")),
                ho.blowup
            );
            print!("{s}");
            art.write("rate.txt", s)?;
        }
        Target::BotEnergy | Target::BotSnapshots => {
            let snaps = if a.target == Target::BotSnapshots {
                vec![tf.unwrap_or(40.0)]
            } else {
                vec![]
            };
            for (label, p) in bot_suite(tf)? {
                art.resolved(&label, &p);
                let run = execute_vp(&mut art, p, &snaps, &format!("{label}_"))?;
                print!("{label}: ");
                summarize_vp(&run);
            }
        }
        Target::CflSharpness => {
            let c_weno = 1.73;
            let c_cd2 = 2.0 * SQRT_2;
            for (label, scheme, dt, c) in [
                (
                    "weno5_dt0.09",
                    VScheme::Weno5(Weno5::default()),
                    0.09,
                    c_weno,
                ),
                (
                    "weno5_dt0.13",
                    VScheme::Weno5(Weno5::default()),
                    0.13,
                    c_weno,
                ),
                ("cd2_dt0.14", VScheme::Cd2, 0.14, c_cd2),
                ("cd2_dt0.2", VScheme::Cd2, 0.2, c_cd2),
            ] {
                let p = cfl_case(scheme, dt, tf.unwrap_or(60.0));
                art.resolved(label, &p);
                let dv = p.grid.v.dv;
                let run = execute_vp(&mut art, p, &[], &format!("{label}_"))?;
                print!("{label}: ");
                summarize_vp(&run);
                art.write(
                    &format!("{label}_cfl.csv"),
                    csv(
                        "t,dt,electric_energy,cfl_limit",
                        run.records.iter().map(|r| {
                            vec![r.t, r.dt, r.electric_energy, cfl_dt(c, r.e_inf, dv, None)]
                        }),
                    ),
                )?;
            }
        }
        Target::DkCoarseDirect | Target::DkCoarsePert => {
            let form = if a.target == Target::DkCoarseDirect {
                Formulation::Direct
            } else {
                Formulation::Perturbation
            };
            let p = dk_case(form, LRK44, tf)?;
            let t_final = p.t_final;
            art.resolved("dk", &p);
            let snaps: Vec<f64> = [1000.0, 2000.0, 3000.0]
                .into_iter()
                .filter(|t| *t <= t_final)
                .collect();
            let run = execute_dk(&mut art, p, &snaps, "")?;
            summarize_dk(&run);
        }
        Target::DkConservation => {
            for m in [LRK44, MethodId::CoxMatthews] {
                let p = dk_case(Formulation::Perturbation, m, tf)?;
                art.resolved(m.name(), &p);
                let mut solver = DkSolver::new(p)?;
                let mut rows = Vec::new();
                let run = solver.run_with(|s| {
                    let d = s.bracket_invariants(RadialEnds::Fixed)?;
                    rows.push((s.time(), d));
                    Ok(())
                })?;
                print!("{}: ", m.name());
                summarize_dk(&run);
                art.write(&format!("{}_diag.csv", m.name()), run.to_csv())?;
                art.write(
                    &format!("{}_bracket.csv", m.name()),
                    csv(
                        "t,sum_j,sum_fj,sum_phij",
                        rows.iter().map(|(t, d)| vec![*t, d[0], d[1], d[2]]),
                    ),
                )?;
            }
        }
    }
    let dir = art.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// The nine bump-on-tail configurations with the `min(0.1, C Δv/‖E‖_∞)` rule.
pub fn bot_suite(t_final: Option<f64>) -> Result<Vec<(String, VpParams)>> {
    let weno = VScheme::Weno5(Weno5::default());
    let mut cases = Vec::new();
    for id in [TableauId::Rk44, TableauId::Rk33, TableauId::Rk32Best] {
        let sigma = kinetic_core::stability::sigma_lw5(&id.tableau(), 2048, 1e-6)?.sigma;
        cases.push((MethodId::Lawson(id), weno, sigma));
        let y = kinetic_core::stability::ymax_lawson(&id.tableau(), 1e-6);
        cases.push((MethodId::Lawson(id), VScheme::Cd2, y));
    }
    let cfg = ExpScanConfig::uniform(40.0, 0.01);
    for m in [
        MethodId::CoxMatthews,
        MethodId::Krogstad,
        MethodId::HochbruckOstermann,
    ] {
        let (y, _) = ymax_exp(m, 1e-2, &cfg)?;
        cases.push((m, VScheme::Cd2, y));
    }
    Ok(cases
        .into_iter()
        .map(|(m, s, c)| {
            let mut p = VpParams::bump_on_tail(m, s, TimeStep::Cfl { c, cap: Some(0.1) });
            p.t_final = t_final.unwrap_or(p.t_final);
            (format!("{}_{}", m.name(), s.name()), p)
        })
        .collect())
}

/// Bump-on-tail on the refined `81 × 512` mesh with a fixed step.
pub fn cfl_case(scheme: VScheme, dt: f64, t_final: f64) -> VpParams {
    let mut p = VpParams::bump_on_tail(LRK44, scheme, TimeStep::Fixed(dt));
    p.grid = VpGrid::new(81, 20.0 * PI, 512, 8.0).expect("valid grid");
    p.t_final = t_final;
    p
}

/// Desk-scale drift-kinetic setup: `32³ × 64`, Richardson `tol = 1e-2`.
pub fn dk_case(form: Formulation, method: MethodId, t_final: Option<f64>) -> Result<DkParams> {
    let time = DkTime::Richardson {
        tol: 1e-2,
        dt_max: kinetic_core::control::default_dt_max(method),
    };
    let mut p = DkParams::medium(32, 32, 32, 64, form, method, time)?;
    p.t_final = t_final.unwrap_or(p.t_final);
    Ok(p)
}
