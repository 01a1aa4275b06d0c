//! The run configuration: one TOML file with flat sections, plus
//! `section.key=value` overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relwave::bundle::{DerivationScheme, MIN_EPSILON};
use relwave::evolution::io::CsvColumns;
use relwave::evolution::Method;
use relwave::frames::{FrameFamily, FrameScope, DEFAULT_CONDITION_BOUND};
use relwave::harness::{ConvergenceSubject, SuiteConfig};
use relwave::lattice::Grid;
use relwave::models::{ModelKind, PhysicalParams, Potentials};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub evolution: EvolutionSection,
    pub bundle: BundleSection,
    pub output: OutputSection,
    pub verify: VerifySection,
    pub convergence: ConvergenceSection,
    /// A scalar equation given by coefficient expressions; replaces the
    /// model's own reduction in `reduce`.
    pub equation: Option<EquationSection>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    Zero,
    Uniform,
    PlaneWave,
    GaussianPulse,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub name: ModelKind,
    pub mass: f64,
    pub charge: f64,
    pub c: f64,
    pub hbar: f64,
    pub potential: PotentialKind,
    /// `φ` (uniform) or `φ₀` (plane wave, pulse).
    pub phi: f64,
    /// `A` (uniform) or `A₀` (plane wave).
    pub a: [f64; 3],
    pub k: [f64; 3],
    pub omega: f64,
    pub phase: f64,
    pub center: [f64; 3],
    pub width: f64,
    pub t0: f64,
    pub duration: f64,
    /// CSV with header `phi,ax,ay,az`, one row per site.
    pub potential_file: Option<PathBuf>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = PhysicalParams::default();
        ModelSection {
            name: ModelKind::Dirac,
            mass: p.mass,
            charge: p.charge,
            c: p.c,
            hbar: p.hbar,
            potential: PotentialKind::Zero,
            phi: 0.0,
            a: [0.0; 3],
            k: [0.0; 3],
            omega: 0.0,
            phase: 0.0,
            center: [0.0; 3],
            width: 1.0,
            t0: 0.0,
            duration: 1.0,
            potential_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: 1, points: 64, length: 16.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Gaussian,
    PlaneWave,
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// Packet centre; the middle of the box when absent.
    pub center: Option<[f64; 3]>,
    /// Packet width; a tenth of the first axis when absent.
    pub width: Option<f64>,
    /// Mode index of the carrier wave (`k = 2πm/L` per axis).
    pub mode: [i64; 3],
    /// Fibre spinor as `[re, im]` pairs; a fixed generic spinor when absent.
    pub spinor: Option<Vec<[f64; 2]>>,
    /// Snapshot file for `kind = "snapshot"`.
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { kind: InitialKind::Gaussian, center: None, width: None, mode: [1, 0, 0], spinor: None, path: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub method: Method,
    /// Write every `stride`-th state to the trajectory CSV.
    pub stride: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection { t0: 0.0, t1: 1.0, steps: 1000, method: Method::CrankNicolson, stride: 1 }
    }
}

impl EvolutionSection {
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    #[default]
    Identity,
    ScalarPhase,
    SmoothRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BundleSection {
    pub frames: FrameKind,
    pub seed: u64,
    /// Step of the derivation along the path; a multiple of the time step.
    pub epsilon: f64,
    pub scheme: DerivationScheme,
    pub richardson: bool,
    pub amplitude: f64,
    pub harmonics: usize,
    pub frequency: f64,
    /// Scalar phase frames: `θ₀` and `ω`.
    pub theta0: f64,
    pub omega: f64,
    pub condition_bound: f64,
    /// Number of sample times for the Γ and residual exports.
    pub samples: usize,
    /// Bound on `‖DΨ‖/‖Ψ‖` reported by `transport`.
    pub residual_tolerance: f64,
}

impl Default for BundleSection {
    fn default() -> Self {
        BundleSection {
            frames: FrameKind::Identity,
            seed: SuiteConfig::default().seed,
            epsilon: 1e-3,
            scheme: DerivationScheme::Coefficients,
            richardson: false,
            amplitude: 0.3,
            harmonics: 1,
            frequency: 0.5,
            theta0: 0.0,
            omega: 1.0,
            condition_bound: DEFAULT_CONDITION_BOUND,
            samples: 11,
            residual_tolerance: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub prefix: String,
    pub columns: CsvColumns,
    pub snapshot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), prefix: "run".into(), columns: CsvColumns::Norms, snapshot: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub points_3d: usize,
    pub length_3d: f64,
    pub tolerance: Option<f64>,
    pub only: Vec<String>,
}

impl Default for VerifySection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        VerifySection { points_3d: s.points_3d, length_3d: s.length_3d, tolerance: None, only: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    #[default]
    Harmonic,
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub subject: SubjectKind,
    pub omega: f64,
    pub mode: [i64; 3],
    pub total_time: f64,
    pub dts: Vec<f64>,
    pub expected_order: f64,
    pub band: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            subject: SubjectKind::Harmonic,
            omega: 2.0,
            mode: [1, 0, 0],
            total_time: 1.0,
            dts: vec![0.02, 0.01, 0.005, 0.0025],
            expected_order: 2.0,
            band: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    /// `f₀ … f_{n-1}` of `∂ⁿφ/∂tⁿ = Σ fᵢ ∂ⁱφ/∂tⁱ` as expressions over
    /// `identity`, `zero`, `laplacian`, `p2`, `d_x`, `d_y`, `d_z`.
    pub coefficients: Vec<String>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

fn config_error(what: impl std::fmt::Display) -> CliError {
    CliError::Config(what.to_string())
}

/// Parses `text`, applies `overrides` and validates the result.
pub fn parse(text: &str, base_dir: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(config_error)?;
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        cfg = table.try_into().map_err(|e| config_error(format!("after overrides: {e}")))?;
    }
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, &base, overrides).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `section.key=value`; the value is read as a TOML value, or as a bare
/// string when it does not parse as one.
fn apply_override(table: &mut toml::Table, text: &str) -> Result<(), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key `{key}` is malformed")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn check(ok: bool, key: &str, msg: impl std::fmt::Display) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(config_error(format!("{key}: {msg}")))
    }
}

impl RunConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        self.grid()?;
        let m = &self.model;
        if m.potential == PotentialKind::File {
            let p = m.potential_file.as_ref().ok_or_else(|| config_error("model.potential_file: required when potential = \"file\""))?;
            check(self.resolve(p).is_file(), "model.potential_file", format!("{} does not exist", p.display()))?;
        }
        if m.potential == PotentialKind::GaussianPulse {
            check(m.width > 0.0 && m.duration > 0.0, "model.width", "pulse width and duration must be positive")?;
        }
        let i = &self.initial;
        if i.kind == InitialKind::Snapshot {
            let p = i.path.as_ref().ok_or_else(|| config_error("initial.path: required when kind = \"snapshot\""))?;
            check(self.resolve(p).is_file(), "initial.path", format!("{} does not exist", p.display()))?;
        }
        if let Some(w) = i.width {
            check(w > 0.0 && w.is_finite(), "initial.width", "must be positive")?;
        }
        if let Some(s) = &i.spinor {
            check(s.len() == self.model.name.fibre_dim(), "initial.spinor", format!("needs {} entries", self.model.name.fibre_dim()))?;
        }
        let e = &self.evolution;
        check(e.t0.is_finite() && e.t1.is_finite() && e.t1 > e.t0, "evolution.t1", "must exceed evolution.t0")?;
        check(e.steps >= 1, "evolution.steps", "must be at least 1")?;
        check(e.stride >= 1, "evolution.stride", "must be at least 1")?;
        let b = &self.bundle;
        check(b.epsilon >= MIN_EPSILON && b.epsilon.is_finite(), "bundle.epsilon", format!("must be at least {MIN_EPSILON:e}"))?;
        check(b.condition_bound > 1.0, "bundle.condition_bound", "must exceed 1")?;
        check(b.samples >= 2, "bundle.samples", "must be at least 2")?;
        check(b.residual_tolerance >= 0.0, "bundle.residual_tolerance", "must be non-negative")?;
        check(b.amplitude >= 0.0 && b.amplitude.is_finite(), "bundle.amplitude", "must be non-negative")?;
        let v = &self.verify;
        check(v.length_3d > 0.0, "verify.length_3d", "must be positive")?;
        if let Some(t) = v.tolerance {
            check(t >= 0.0, "verify.tolerance", "must be non-negative")?;
        }
        let names = SuiteConfig { only: v.only.clone(), ..SuiteConfig::default() };
        names.validate().map_err(|e| config_error(format!("verify.only: {e}")))?;
        let c = &self.convergence;
        check(c.dts.len() >= 3, "convergence.dts", "needs at least 3 entries")?;
        check(c.total_time > 0.0, "convergence.total_time", "must be positive")?;
        check(c.band > 0.0, "convergence.band", "must be positive")?;
        if let Some(eq) = &self.equation {
            check(!eq.coefficients.is_empty(), "equation.coefficients", "needs at least one coefficient")?;
            if let Some(n) = &eq.names {
                check(n.len() == eq.coefficients.len(), "equation.names", "needs one name per coefficient")?;
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<PhysicalParams, CliError> {
        let m = &self.model;
        PhysicalParams::new(m.mass, m.charge, m.c, m.hbar).map_err(|e| config_error(format!("model: {e}")))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        Grid::new(g.dim, g.points, g.length).map_err(|e| config_error(format!("grid: {e}")))
    }

    pub fn potentials(&self, grid: &Grid) -> Result<Potentials, CliError> {
        let m = &self.model;
        let p = match m.potential {
            PotentialKind::Zero => Potentials::Zero,
            PotentialKind::Uniform => Potentials::Uniform { phi: m.phi, a: m.a },
            PotentialKind::PlaneWave => Potentials::PlaneWave { phi0: m.phi, a0: m.a, k: m.k, omega: m.omega, phase: m.phase },
            PotentialKind::GaussianPulse => Potentials::GaussianPulse {
                phi0: m.phi,
                center: m.center,
                width: m.width,
                t0: m.t0,
                duration: m.duration,
            },
            PotentialKind::File => {
                let path = self.resolve(m.potential_file.as_deref().unwrap_or(Path::new("")));
                Potentials::from_csv(&path, grid).map_err(|e| config_error(format!("model.potential_file: {e}")))?
            }
        };
        p.validate(grid).map_err(|e| config_error(format!("model.potential: {e}")))?;
        Ok(p)
    }

    pub fn frames(&self, fibre: usize) -> Result<FrameFamily, CliError> {
        let b = &self.bundle;
        let f = match b.frames {
            FrameKind::Identity => FrameFamily::identity(),
            FrameKind::ScalarPhase => FrameFamily::scalar_phase(b.theta0, b.omega),
            FrameKind::SmoothRandom => {
                FrameFamily::smooth_random(fibre, FrameScope::Local, b.seed, b.amplitude, b.harmonics, b.frequency)
                    .map_err(|e| config_error(format!("bundle: {e}")))?
            }
        };
        Ok(f.with_condition_bound(b.condition_bound))
    }

    pub fn suite_config(&self) -> SuiteConfig {
        let p = PhysicalParams { mass: self.model.mass, charge: self.model.charge, c: self.model.c, hbar: self.model.hbar };
        SuiteConfig {
            points: self.grid.points,
            length: self.grid.length,
            points_3d: self.verify.points_3d,
            length_3d: self.verify.length_3d,
            params: p,
            steps: self.evolution.steps,
            dt: self.evolution.dt(),
            seed: self.bundle.seed,
            tolerance: self.verify.tolerance,
            only: self.verify.only.clone(),
        }
    }

    pub fn convergence_subject(&self) -> Result<ConvergenceSubject, CliError> {
        Ok(match self.convergence.subject {
            SubjectKind::Harmonic => ConvergenceSubject::Harmonic { omega: self.convergence.omega },
            SubjectKind::Model => ConvergenceSubject::Model {
                model: self.model.name,
                params: self.params()?,
                dim: self.grid.dim,
                points: self.grid.points,
                length: self.grid.length,
                mode: self.convergence.mode,
            },
        })
    }

    pub fn output_path(&self, suffix: &str) -> PathBuf {
        self.resolve(&self.output.dir).join(format!("{}{suffix}", self.output.prefix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("", Path::new("."), &[]).unwrap();
        assert_eq!(c.model.name, ModelKind::Dirac);
        assert_eq!(c.evolution.steps, 1000);
        assert_eq!(c.suite_config(), SuiteConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse("[evolution]\nstepz = 3\n", Path::new("."), &[]).unwrap_err().to_string();
        assert!(err.contains("stepz"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        let err = parse("", Path::new("."), &["grid.pointz=8".into()]).unwrap_err().to_string();
        assert!(err.contains("pointz"), "{err}");
    }

    #[test]
    fn overrides_take_typed_values() {
        let c = parse(
            "[model]\nname = \"dirac\"\n",
            Path::new("."),
            &["evolution.steps=20".into(), "model.name=kg_canonical".into(), "output.prefix=abc".into()],
        )
        .unwrap();
        assert_eq!(c.evolution.steps, 20);
        assert_eq!(c.model.name, ModelKind::KgCanonical);
        assert_eq!(c.output.prefix, "abc");
        assert!(matches!(parse("", Path::new("."), &["steps".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn ranges_and_files_are_checked() {
        assert!(parse("[evolution]\nsteps = 0\n", Path::new("."), &[]).is_err());
        assert!(parse("[grid]\npoints = 5\n", Path::new("."), &[]).is_err());
        assert!(parse("[bundle]\nepsilon = 1e-12\n", Path::new("."), &[]).is_err());
        let err = parse("[model]\npotential = \"file\"\npotential_file = \"missing.csv\"\n", Path::new("."), &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing.csv"), "{err}");
    }
}
