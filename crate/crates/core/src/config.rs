//! Run configuration files (TOML) and the manifest written next to outputs.
//!
//! Every key is optional; an empty file plus an experiment name gives the
//! default setup of that experiment. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

use crate::control::default_dt_max;
use crate::dk::{DkGrid, DkParams, DkTime, Formulation, RadialProfiles};
use crate::error::{Error, Result};
use crate::integrators::MethodId;
use crate::tableaux::TableauId;
use crate::vadv::{VScheme, Weno5};
use crate::vp::{TimeStep, VpGrid, VpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Landau,
    BumpOnTail,
    DriftKinetic,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Landau => "landau",
            Experiment::BumpOnTail => "bump_on_tail",
            Experiment::DriftKinetic => "drift_kinetic",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landau" => Ok(Experiment::Landau),
            "bump_on_tail" | "bot" => Ok(Experiment::BumpOnTail),
            "drift_kinetic" | "dk" => Ok(Experiment::DriftKinetic),
            other => Err(Error::InvalidParameter(format!(
                "unknown experiment `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nv: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nr: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ntheta: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nz: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Periodic length in x (VP) or z (DK).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Initial perturbation amplitude.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Initial perturbation wavenumber (VP).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Fixed step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// CFL number `C` of `Δt = C Δv / ‖E‖_∞` (VP).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    /// Upper bound for CFL steps (VP).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Richardson tolerance (DK).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Times at which slice snapshots are written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
}

/// Parsed configuration: overrides on top of an experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formulation: Option<String>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub time: TimeConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputConfig,
}

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn size(name: &str, value: Option<i64>, min: i64) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(n) if n >= min => Ok(Some(n as usize)),
        Some(n) => Err(Error::InvalidParameter(format!(
            "{name} must be at least {min}, got {n}"
        ))),
    }
}

fn positive(name: &str, value: Option<f64>) -> Result<Option<f64>> {
    match value {
        Some(x) if !(x > 0.0) || !x.is_finite() => Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {x}"
        ))),
        other => Ok(other),
    }
}

/// Resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum RunParams {
    Vp(VpParams),
    Dk(DkParams),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }

    /// Domain checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        size("nx", g.nx, 1)?;
        size("nv", g.nv, 3)?;
        size("nr", g.nr, 3)?;
        size("ntheta", g.ntheta, 3)?;
        size("nz", g.nz, 1)?;
        let d = &self.domain;
        positive("length", d.length)?;
        positive("v_max", d.v_max)?;
        positive("r_min", d.r_min)?;
        positive("r_max", d.r_max)?;
        positive("k", d.k)?;
        if let (Some(a), Some(b)) = (d.r_min, d.r_max) {
            if b <= a {
                return Err(Error::InvalidParameter(format!(
                    "r_max ({b}) must exceed r_min ({a})"
                )));
            }
        }
        if let Some(e) = d.epsilon {
            if !(e >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be non-negative, got {e}"
                )));
            }
        }
        let t = &self.time;
        positive("dt", t.dt)?;
        positive("cfl", t.cfl)?;
        positive("cap", t.cap)?;
        positive("tol", t.tol)?;
        positive("dt_max", t.dt_max)?;
        positive("t_final", t.t_final)?;
        if let Some(s) = &self.output.snapshots {
            if s.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidParameter(
                    "snapshot times must be non-negative".into(),
                ));
            }
        }
        if let Some(m) = &self.method {
            m.parse::<MethodId>()?;
        }
        if let Some(s) = &self.scheme {
            s.parse::<VScheme>()?;
        }
        if let Some(f) = &self.formulation {
            f.parse::<Formulation>()?;
        }
        if let Some(e) = &self.experiment {
            e.parse::<Experiment>()?;
        }
        Ok(())
    }

    /// Experiment named in the file, else `fallback`.
    pub fn experiment_or(&self, fallback: Option<Experiment>) -> Result<Experiment> {
        match (&self.experiment, fallback) {
            (Some(e), _) => e.parse(),
            (None, Some(e)) => Ok(e),
            (None, None) => Err(Error::InvalidParameter("no experiment given".into())),
        }
    }

    /// Applies the overrides to the defaults of `experiment`.
    pub fn resolve(&self, experiment: Experiment) -> Result<RunParams> {
        self.validate()?;
        let method = self
            .method
            .as_deref()
            .map(str::parse::<MethodId>)
            .transpose()?;
        let scheme = self
            .scheme
            .as_deref()
            .map(str::parse::<VScheme>)
            .transpose()?;
        let g = &self.grid;
        let d = &self.domain;
        let t = &self.time;
        match experiment {
            Experiment::Landau | Experiment::BumpOnTail => {
                let method = method.unwrap_or(MethodId::Lawson(TableauId::Rk44));
                let mut p = if experiment == Experiment::Landau {
                    VpParams::landau(
                        method,
                        scheme.unwrap_or(VScheme::Weno5(Weno5::default())),
                        0.125,
                    )
                } else {
                    let step = TimeStep::Cfl {
                        c: 2.0 * 2f64.sqrt(),
                        cap: Some(0.1),
                    };
                    VpParams::bump_on_tail(method, scheme.unwrap_or(VScheme::Cd2), step)
                };
                let nx = size("nx", g.nx, 1)?.unwrap_or(p.grid.nx);
                let nv = size("nv", g.nv, 3)?.unwrap_or(p.grid.v.n);
                p.grid = VpGrid::new(
                    nx,
                    d.length.unwrap_or(p.grid.length),
                    nv,
                    d.v_max.unwrap_or(p.grid.v.v_max),
                )?;
                if let Some(e) = d.epsilon {
                    p.init = p.init.with_alpha(e);
                }
                if let Some(k) = d.k {
                    p.init = p.init.with_k(k);
                }
                p.step = match (t.dt, t.cfl) {
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidParameter(
                            "give either time.dt or time.cfl, not both".into(),
                        ))
                    }
                    (Some(dt), None) => TimeStep::Fixed(dt),
                    (None, Some(c)) => TimeStep::Cfl {
                        c,
                        cap: t.cap.or(match p.step {
                            TimeStep::Cfl { cap, .. } => cap,
                            TimeStep::Fixed(_) => None,
                        }),
                    },
                    (None, None) => match (p.step, t.cap) {
                        (TimeStep::Cfl { c, .. }, Some(cap)) => TimeStep::Cfl { c, cap: Some(cap) },
                        (s, _) => s,
                    },
                };
                if let Some(tf) = t.t_final {
                    p.t_final = tf;
                }
                Ok(RunParams::Vp(p))
            }
            Experiment::DriftKinetic => {
                let method = method.unwrap_or(MethodId::Lawson(TableauId::Rk44));
                let formulation = self
                    .formulation
                    .as_deref()
                    .map(str::parse::<Formulation>)
                    .transpose()?
                    .unwrap_or(Formulation::Perturbation);
                let time = match (t.dt, t.tol) {
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidParameter(
                            "give either time.dt or time.tol, not both".into(),
                        ))
                    }
                    (Some(dt), None) => DkTime::Fixed(dt),
                    (None, tol) => DkTime::Richardson {
                        tol: tol.unwrap_or(1e-2),
                        dt_max: t.dt_max.unwrap_or_else(|| default_dt_max(method)),
                    },
                };
                let mut p = DkParams::medium(32, 32, 32, 64, formulation, method, time)?;
                let r_min = d.r_min.unwrap_or(p.grid.r_min);
                let r_max = d.r_max.unwrap_or(p.grid.r_max);
                p.grid = DkGrid::with_domain(
                    size("nr", g.nr, 3)?.unwrap_or(p.grid.nr),
                    size("ntheta", g.ntheta, 3)?.unwrap_or(p.grid.ntheta),
                    size("nz", g.nz, 1)?.unwrap_or(p.grid.nz),
                    size("nv", g.nv, 3)?.unwrap_or(p.grid.v.n),
                    r_min,
                    r_max,
                    d.length.unwrap_or(p.grid.length),
                    d.v_max.unwrap_or(p.grid.v.v_max),
                )?;
                p.profiles = RadialProfiles::medium(r_min, r_max);
                if let Some(e) = d.epsilon {
                    p.epsilon = e;
                }
                if let Some(tf) = t.t_final {
                    p.t_final = tf;
                }
                Ok(RunParams::Dk(p))
            }
        }
    }
}

/// Record written next to every artifact set.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub target: String,
    pub version: String,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Overrides as given.
    pub config: RunConfig,
    /// Fully resolved parameters (debug rendering).
    pub resolved: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        let RunParams::Vp(p) = c.resolve(Experiment::Landau).unwrap() else {
            panic!()
        };
        let d = VpParams::landau(
            MethodId::Lawson(TableauId::Rk44),
            VScheme::Weno5(Weno5::default()),
            0.125,
        );
        assert_eq!(p, d);
        let RunParams::Dk(p) = c.resolve(Experiment::DriftKinetic).unwrap() else {
            panic!()
        };
        assert_eq!(p.grid.nr, 32);
        assert_eq!(
            p.time,
            DkTime::Richardson {
                tol: 1e-2,
                dt_max: 40.0
            }
        );
        assert_eq!(p.formulation, Formulation::Perturbation);
    }

    #[test]
    fn overrides_are_applied_and_echoed() {
        let c = RunConfig::parse("experiment = \"landau\"\n[grid]\nnv = 512\n").unwrap();
        let RunParams::Vp(p) = c.resolve(c.experiment_or(None).unwrap()).unwrap() else {
            panic!()
        };
        assert_eq!(p.grid.v.n, 512);
        assert!(c.to_toml().contains("nv = 512"));
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn negative_size_is_a_validation_error() {
        let e = RunConfig::parse("[grid]\nnv = -1\n").unwrap_err();
        assert!(matches!(e, Error::InvalidParameter(_)), "{e}");
    }

    #[test]
    fn r_min_must_be_positive() {
        let e = RunConfig::parse("[domain]\nr_min = 0.0\n").unwrap_err();
        assert!(matches!(e, Error::InvalidParameter(_)));
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = RunConfig::parse("method = \"krogstad\"\n\n[time]\nt_fianl = 3.0\n").unwrap_err();
        match e {
            Error::ConfigParse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("t_fianl"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_method_name() {
        assert!(matches!(
            RunConfig::parse("method = \"rk5\"").unwrap_err(),
            Error::UnknownMethod(_)
        ));
    }

    #[test]
    fn conflicting_time_controls() {
        let c = RunConfig::parse("[time]\ndt = 0.1\ncfl = 1.0\n").unwrap();
        assert!(c.resolve(Experiment::BumpOnTail).is_err());
        let c = RunConfig::parse("[time]\ndt = 5.0\n").unwrap();
        let RunParams::Dk(p) = c.resolve(Experiment::DriftKinetic).unwrap() else {
            panic!()
        };
        assert_eq!(p.time, DkTime::Fixed(5.0));
    }
}
