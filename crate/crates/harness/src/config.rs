//! Run configuration: named presets, TOML files and command-line overrides.
//!
//! A file may name a `preset` and override any of its fields; unknown keys are
//! rejected. Top-level keys apply to every problem kind, the `[scalar]`,
//! `[system]`, `[hopping]` and `[reference]` sections to one kind each.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ngo_core::coeff::{ClampMode, ClampPolicy};
use ngo_core::hopping::TauIntegrator;
use ngo_core::system::DriftSign;
use ngo_core::{InitMode, PhaseMethod};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::registry;

pub const PRESETS: &[&str] = &[
    "scalar_smooth",
    "scalar_vanishing_a",
    "scalar_timeseries",
    "system",
    "hopping",
    "hopping_eps1",
    "hopping_eps1_32",
    "hopping_eps1_256",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Scalar,
    System,
    Hopping,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Scalar => "scalar",
            ProblemKind::System => "system",
            ProblemKind::Hopping => "hopping",
        }
    }

    fn default_preset(&self) -> &'static str {
        match self {
            ProblemKind::Scalar => "scalar_smooth",
            ProblemKind::System => "system",
            ProblemKind::Hopping => "hopping",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(ProblemKind::Scalar),
            "system" => Ok(ProblemKind::System),
            "hopping" => Ok(ProblemKind::Hopping),
            other => Err(HarnessError::Config(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// Time-step rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtRule {
    /// `dt = courant · dx / max|speed|` (speed floor 1).
    Courant(f64),
    Fixed(f64),
}

impl DtRule {
    pub fn dt(&self, dx: f64, max_speed: f64) -> f64 {
        match *self {
            DtRule::Courant(k) => k * dx / max_speed.max(1.0),
            DtRule::Fixed(dt) => dt,
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::Courant(k) => write!(f, "courant={k}"),
            DtRule::Fixed(dt) => write!(f, "dt={dt}"),
        }
    }
}

/// Oracle used for error measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReferenceSolver {
    /// Scalar: RK4 along characteristics at the NGO nodes.
    Characteristics,
    /// Scalar: pseudo-spectral RK4 on `N_d` nodes.
    SpectralRk4,
    /// Scalar: Lie splitting with upwind transport on `N_d` nodes.
    Direct,
    /// System: Strang splitting, exact Fourier transport.
    StrangSpectral,
    /// System: Lie splitting, upwind transport.
    LieUpwind,
    /// Hopping: splitting with spectral transport.
    Kinetic,
}

impl ReferenceSolver {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceSolver::Characteristics => "characteristics",
            ReferenceSolver::SpectralRk4 => "spectral_rk4",
            ReferenceSolver::Direct => "direct",
            ReferenceSolver::StrangSpectral => "strang_spectral",
            ReferenceSolver::LieUpwind => "lie_upwind",
            ReferenceSolver::Kinetic => "kinetic",
        }
    }

    fn kind(&self) -> ProblemKind {
        match self {
            ReferenceSolver::Characteristics | ReferenceSolver::SpectralRk4 | ReferenceSolver::Direct => {
                ProblemKind::Scalar
            }
            ReferenceSolver::StrangSpectral | ReferenceSolver::LieUpwind => ProblemKind::System,
            ReferenceSolver::Kinetic => ProblemKind::Hopping,
        }
    }
}

impl FromStr for ReferenceSolver {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "characteristics" => ReferenceSolver::Characteristics,
            "spectral_rk4" => ReferenceSolver::SpectralRk4,
            "direct" => ReferenceSolver::Direct,
            "strang_spectral" => ReferenceSolver::StrangSpectral,
            "lie_upwind" => ReferenceSolver::LieUpwind,
            "kinetic" => ReferenceSolver::Kinetic,
            other => return Err(HarnessError::Config(format!("unknown reference solver `{other}`"))),
        })
    }
}

/// Reference discretisation; `None` selects the automatic rule for each ε.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSettings {
    pub solver: ReferenceSolver,
    pub n_d: Option<usize>,
    pub dt_d: Option<f64>,
    /// Hopping only: momentum nodes of the reference.
    pub n_p: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSettings {
    pub c: String,
    pub a: String,
    pub r: String,
    pub alpha: String,
    pub beta: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSettings {
    pub a1: String,
    pub a2: String,
    pub e: String,
    pub cmat: [[f64; 2]; 2],
    pub f1: String,
    pub f2: String,
    pub drift: DriftSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoppingSettings {
    pub e: String,
    pub u: String,
    pub bi: String,
    pub data: String,
    pub n_p: usize,
    pub tau_integrator: TauIntegrator,
    /// Momentum nodes for NGO densities; defaults to the reference's.
    pub density_np: Option<usize>,
    /// Also run the direct reference.
    pub run_reference: bool,
    /// NGO timing is the minimum over this many runs.
    pub repeats: usize,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub preset: String,
    pub epsilons: Vec<f64>,
    pub n_ts: Vec<usize>,
    pub n_tau: usize,
    pub phase: PhaseMethod,
    pub init: InitMode,
    pub t_final: f64,
    pub dt_rule: DtRule,
    pub clamp: ClampPolicy<f64>,
    /// `(lower, length)` of the periodic space interval.
    pub domain: (f64, f64),
    pub scalar: ScalarSettings,
    pub system: SystemSettings,
    pub hopping: HoppingSettings,
    pub reference: ReferenceSettings,
    pub out: PathBuf,
}

fn scalar_defaults() -> ScalarSettings {
    ScalarSettings {
        c: "cos2".into(),
        a: "three_halves_plus_cos2x".into(),
        r: "rational_r".into(),
        alpha: "scalar_smooth".into(),
        beta: "zero".into(),
    }
}

fn system_defaults() -> SystemSettings {
    SystemSettings {
        a1: "1".into(),
        a2: "4".into(),
        e: "E_3half_cos".into(),
        cmat: [[0.0, 1.0], [-1.0, 0.0]],
        f1: "system_smooth".into(),
        f2: "system_smooth".into(),
        drift: DriftSign::Plus,
    }
}

fn hopping_defaults() -> HoppingSettings {
    HoppingSettings {
        e: "E_avoided".into(),
        u: "zero".into(),
        bi: "b_avoided".into(),
        data: "gaussian_maxwellian".into(),
        n_p: 64,
        tau_integrator: TauIntegrator::ImplicitEuler,
        density_np: None,
        run_reference: true,
        repeats: 1,
    }
}

/// The named preset.
pub fn preset(name: &str) -> Result<RunConfig> {
    let scalar = |preset: &str| RunConfig {
        kind: ProblemKind::Scalar,
        preset: preset.into(),
        epsilons: vec![1.0, 1e-1, 1e-2, 1e-3],
        n_ts: vec![20, 40, 100, 200, 1000],
        n_tau: 64,
        phase: PhaseMethod::SpectralRk4,
        init: InitMode::Corrected,
        t_final: 0.1,
        dt_rule: DtRule::Courant(0.5),
        clamp: ClampPolicy::default(),
        domain: (-PI / 2.0, PI),
        scalar: scalar_defaults(),
        system: system_defaults(),
        hopping: hopping_defaults(),
        reference: ReferenceSettings {
            solver: ReferenceSolver::Characteristics,
            n_d: None,
            dt_d: None,
            n_p: None,
        },
        out: PathBuf::from("out"),
    };
    let hopping = |preset: &str, epsilons: Vec<f64>, t_final: f64| RunConfig {
        kind: ProblemKind::Hopping,
        epsilons,
        n_ts: vec![32],
        n_tau: 8,
        phase: PhaseMethod::Exact,
        t_final,
        dt_rule: DtRule::Fixed(0.05),
        domain: (-TAU, 2.0 * TAU),
        reference: ReferenceSettings { solver: ReferenceSolver::Kinetic, n_d: None, dt_d: None, n_p: None },
        ..scalar(preset)
    };
    let config = match name {
        "scalar_smooth" => scalar(name),
        "scalar_vanishing_a" => {
            let mut c = scalar(name);
            c.scalar.a = "one_plus_cos2x".into();
            c
        }
        "scalar_timeseries" => {
            let mut c = scalar(name);
            c.epsilons = vec![5e-3];
            c.n_ts = vec![100];
            c.n_tau = 16;
            c.t_final = 1.0;
            c.phase = PhaseMethod::Exact;
            c.reference = ReferenceSettings {
                solver: ReferenceSolver::SpectralRk4,
                n_d: Some(4000),
                dt_d: Some(5e-4),
                n_p: None,
            };
            c
        }
        "system" => RunConfig {
            kind: ProblemKind::System,
            phase: PhaseMethod::Exact,
            domain: (0.0, TAU),
            reference: ReferenceSettings {
                solver: ReferenceSolver::StrangSpectral,
                n_d: None,
                dt_d: None,
                n_p: None,
            },
            ..scalar(name)
        },
        "hopping" => hopping(name, vec![1.0, 1.0 / 32.0], 2.0),
        "hopping_eps1" => hopping(name, vec![1.0], 2.0),
        "hopping_eps1_32" => hopping(name, vec![1.0 / 32.0], 2.0),
        "hopping_eps1_256" => hopping(name, vec![1.0 / 256.0], 0.2),
        other => {
            return Err(HarnessError::Config(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(config)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kind: Option<String>,
    preset: Option<String>,
    epsilons: Option<Vec<f64>>,
    n_ts: Option<Vec<usize>>,
    n_tau: Option<usize>,
    phase: Option<String>,
    init: Option<String>,
    t_final: Option<f64>,
    courant: Option<f64>,
    dt: Option<f64>,
    clamp: Option<String>,
    corr_cap: Option<f64>,
    domain: Option<[f64; 2]>,
    out: Option<PathBuf>,
    scalar: Option<ScalarSection>,
    system: Option<SystemSection>,
    hopping: Option<HoppingSection>,
    reference: Option<ReferenceSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarSection {
    c: Option<String>,
    a: Option<String>,
    r: Option<String>,
    alpha: Option<String>,
    beta: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    a1: Option<String>,
    a2: Option<String>,
    e: Option<String>,
    c: Option<[[f64; 2]; 2]>,
    f1: Option<String>,
    f2: Option<String>,
    drift: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoppingSection {
    e: Option<String>,
    u: Option<String>,
    bi: Option<String>,
    data: Option<String>,
    n_p: Option<usize>,
    tau_integrator: Option<String>,
    density_np: Option<usize>,
    run_reference: Option<bool>,
    repeats: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceSection {
    solver: Option<String>,
    n_d: Option<usize>,
    dt_d: Option<f64>,
    n_p: Option<usize>,
}

/// Command-line overrides, applied last.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub epsilons: Option<Vec<f64>>,
    pub n_ts: Option<Vec<usize>>,
    pub init: Option<InitMode>,
    pub phase: Option<PhaseMethod>,
    pub out: Option<PathBuf>,
}

fn parse<V: FromStr>(value: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| HarnessError::Config(e.to_string()))
}

fn set<V>(slot: &mut V, value: Option<V>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    /// Parses TOML text on top of `default_preset` (or the file's own preset).
    pub fn from_toml(text: &str, default_preset: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let kind = file.kind.as_deref().map(parse::<ProblemKind>).transpose()?;
        let name = match (&file.preset, kind) {
            (Some(p), _) => p.clone(),
            (None, Some(k)) => k.default_preset().to_string(),
            (None, None) => default_preset.to_string(),
        };
        let mut c = preset(&name)?;
        if let Some(k) = kind {
            if k != c.kind {
                return Err(HarnessError::Config(format!("preset `{name}` is a {} problem, not {k}", c.kind)));
            }
        }
        c.apply_file(file)?;
        Ok(c)
    }

    /// Loads `path`, or the default preset when no file is given.
    pub fn load(path: Option<&Path>, default_preset: &str) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text, default_preset)
            }
            None => preset(default_preset),
        }
    }

    fn apply_file(&mut self, f: ConfigFile) -> Result<()> {
        set(&mut self.epsilons, f.epsilons);
        set(&mut self.n_ts, f.n_ts);
        set(&mut self.n_tau, f.n_tau);
        set(&mut self.phase, f.phase.as_deref().map(parse).transpose()?);
        set(&mut self.init, f.init.as_deref().map(parse).transpose()?);
        set(&mut self.t_final, f.t_final);
        match (f.courant, f.dt) {
            (Some(_), Some(_)) => return Err(HarnessError::Config("give either `courant` or `dt`, not both".into())),
            (Some(k), None) => self.dt_rule = DtRule::Courant(k),
            (None, Some(dt)) => self.dt_rule = DtRule::Fixed(dt),
            (None, None) => {}
        }
        set(&mut self.clamp.mode, f.clamp.as_deref().map(parse::<ClampMode>).transpose()?);
        set(&mut self.clamp.cap, f.corr_cap);
        set(&mut self.domain, f.domain.map(|[lo, hi]| (lo, hi - lo)));
        set(&mut self.out, f.out);
        if let Some(s) = f.scalar {
            let d = &mut self.scalar;
            set(&mut d.c, s.c);
            set(&mut d.a, s.a);
            set(&mut d.r, s.r);
            set(&mut d.alpha, s.alpha);
            set(&mut d.beta, s.beta);
        }
        if let Some(s) = f.system {
            let d = &mut self.system;
            set(&mut d.a1, s.a1);
            set(&mut d.a2, s.a2);
            set(&mut d.e, s.e);
            set(&mut d.cmat, s.c);
            set(&mut d.f1, s.f1);
            set(&mut d.f2, s.f2);
            set(&mut d.drift, s.drift.as_deref().map(parse).transpose()?);
        }
        if let Some(s) = f.hopping {
            let d = &mut self.hopping;
            set(&mut d.e, s.e);
            set(&mut d.u, s.u);
            set(&mut d.bi, s.bi);
            set(&mut d.data, s.data);
            set(&mut d.n_p, s.n_p);
            set(&mut d.tau_integrator, s.tau_integrator.as_deref().map(parse).transpose()?);
            if s.density_np.is_some() {
                d.density_np = s.density_np;
            }
            set(&mut d.run_reference, s.run_reference);
            set(&mut d.repeats, s.repeats);
        }
        if let Some(s) = f.reference {
            let d = &mut self.reference;
            set(&mut d.solver, s.solver.as_deref().map(parse).transpose()?);
            if s.n_d.is_some() {
                d.n_d = s.n_d;
            }
            if s.dt_d.is_some() {
                d.dt_d = s.dt_d;
            }
            if s.n_p.is_some() {
                d.n_p = s.n_p;
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.epsilons, o.epsilons.clone());
        set(&mut self.n_ts, o.n_ts.clone());
        set(&mut self.init, o.init);
        set(&mut self.phase, o.phase);
        set(&mut self.out, o.out.clone());
    }

    /// Checks values and that every named function resolves; sorts the
    /// ε list (descending) and the resolution list (ascending).
    pub fn validate(&mut self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.epsilons.is_empty() || self.n_ts.is_empty() {
            return bad("`epsilons` and `n_ts` must be non-empty".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("epsilon must be positive, got {e}"));
        }
        if let Some(n) = self.n_ts.iter().find(|n| **n < 2) {
            return bad(format!("n_ts values must be at least 2, got {n}"));
        }
        self.epsilons.sort_by(|a, b| b.total_cmp(a));
        self.epsilons.dedup();
        self.n_ts.sort_unstable();
        self.n_ts.dedup();
        if self.n_tau < 2 {
            return bad("n_tau must be at least 2".into());
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        match self.dt_rule {
            DtRule::Courant(k) if !(k > 0.0 && k < 1.0) => {
                return bad(format!("courant must lie in (0, 1), got {k}"));
            }
            DtRule::Fixed(dt) if !(dt.is_finite() && dt > 0.0) => return bad(format!("dt must be positive, got {dt}")),
            _ => {}
        }
        if !(self.clamp.cap > 0.0) {
            return bad("corr_cap must be positive".into());
        }
        if !(self.domain.1.is_finite() && self.domain.1 > 0.0 && self.domain.0.is_finite()) {
            return bad("domain must be an interval [lower, upper] with upper > lower".into());
        }
        if self.reference.solver.kind() != self.kind {
            return bad(format!(
                "reference solver `{}` does not apply to {} problems",
                self.reference.solver.as_str(),
                self.kind
            ));
        }
        if let Some(n) = self.reference.n_d.filter(|n| *n < 2) {
            return bad(format!("reference n_d must be at least 2, got {n}"));
        }
        if let Some(dt) = self.reference.dt_d.filter(|dt| !(dt.is_finite() && *dt > 0.0)) {
            return bad(format!("reference dt_d must be positive, got {dt}"));
        }
        let eps = self.epsilons[0];
        match self.kind {
            ProblemKind::Scalar => {
                let s = &self.scalar;
                registry::real(&s.c, eps)?;
                registry::real(&s.a, eps)?;
                registry::real(&s.beta, eps)?;
                registry::source(&s.r)?;
                registry::data(&s.alpha)?;
            }
            ProblemKind::System => {
                let s = &self.system;
                registry::real(&s.a1, eps)?;
                registry::real(&s.a2, eps)?;
                registry::real(&s.e, eps)?;
                registry::data(&s.f1)?;
                registry::data(&s.f2)?;
            }
            ProblemKind::Hopping => {
                let h = &self.hopping;
                registry::real(&h.e, eps)?;
                registry::real(&h.u, eps)?;
                registry::coupling(&h.bi)?;
                registry::kinetic(&h.data)?;
                if h.n_p < 2 {
                    return bad("hopping n_p must be at least 2".into());
                }
            }
        }
        Ok(())
    }

    /// Short description of the solver settings shared by all rows.
    pub fn solver_tag(&self) -> String {
        match self.kind {
            ProblemKind::Hopping => format!(
                "n_p={};n_tau={};init={};tau={}",
                self.hopping.n_p,
                self.n_tau,
                self.init,
                self.hopping.tau_integrator.as_str()
            ),
            _ => format!("phase={};init={};n_tau={};t_f={}", self.phase, self.init, self.n_tau, self.t_final),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let mut c = preset(name).unwrap();
            c.validate().unwrap();
        }
    }

    #[test]
    fn file_overrides_preset() {
        let text = r#"
            preset = "scalar_vanishing_a"
            epsilons = [0.01, 1.0, 0.01]
            n_ts = [40, 20]
            init = "uncorrected"
            [scalar]
            r = "zero"
            [reference]
            solver = "spectral_rk4"
            n_d = 512
        "#;
        let mut c = RunConfig::from_toml(text, "scalar_smooth").unwrap();
        c.validate().unwrap();
        assert_eq!(c.scalar.a, "one_plus_cos2x");
        assert_eq!(c.scalar.r, "zero");
        assert_eq!(c.epsilons, vec![1.0, 0.01]);
        assert_eq!(c.n_ts, vec![20, 40]);
        assert_eq!(c.init, InitMode::Uncorrected);
        assert_eq!(c.reference.n_d, Some(512));
    }

    #[test]
    fn kind_selects_its_default_preset() {
        let c = RunConfig::from_toml("kind = \"system\"", "scalar_smooth").unwrap();
        assert_eq!(c.preset, "system");
        assert!(RunConfig::from_toml("kind = \"system\"\npreset = \"hopping\"", "scalar_smooth").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["epsilon = [1.0]", "[scalar]\nspeed = \"cos2\"", "[sweep]\nn = 3"] {
            let err = RunConfig::from_toml(text, "scalar_smooth").unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "epsilons = [0.0]",
            "courant = 1.5",
            "courant = 0.5\ndt = 0.1",
            "[scalar]\nc = \"nope\"",
            "phase = \"rk2\"",
            "[reference]\nsolver = \"kinetic\"",
        ] {
            let mut c = match RunConfig::from_toml(text, "scalar_smooth") {
                Ok(c) => c,
                Err(e) => {
                    assert_eq!(e.exit_code(), 2);
                    continue;
                }
            };
            assert_eq!(c.validate().unwrap_err().exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn overrides_apply_last() {
        let mut c = preset("system").unwrap();
        c.apply(&Overrides { epsilons: Some(vec![0.5]), phase: Some(PhaseMethod::Upwind1), ..Default::default() });
        assert_eq!(c.epsilons, vec![0.5]);
        assert_eq!(c.phase, PhaseMethod::Upwind1);
    }
}
