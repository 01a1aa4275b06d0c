use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Grid;

type ScalarFn = Arc<dyn Fn(f64, [f64; 3]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync>;

/// External electromagnetic 4-potential `(φ, A)`.
///
/// Components of `A` along axes the grid does not have are ignored.
#[derive(Clone)]
pub enum Potentials {
    Zero,
    Uniform { phi: f64, a: [f64; 3] },
    /// `φ = φ₀ cos(k·x - ωt + θ)`, `A = A₀ cos(k·x - ωt + θ)`.
    PlaneWave { phi0: f64, a0: [f64; 3], k: [f64; 3], omega: f64, phase: f64 },
    /// `φ = φ₀ exp(-|x - x₀|²/2w² - (t - t₀)²/2τ²)` with minimum-image
    /// distances on the periodic box; `A = 0`.
    GaussianPulse { phi0: f64, center: [f64; 3], width: f64, t0: f64, duration: f64 },
    /// Static values per site in site order.
    Gridded { phi: Vec<f64>, a: Vec<[f64; 3]> },
    /// Analytic user potentials. Without `dphi_dt`, the time derivative is
    /// taken by central differences with step `fd_eps` when one is given.
    Custom { phi: ScalarFn, a: VectorFn, dphi_dt: Option<ScalarFn>, fd_eps: Option<f64>, is_static: bool },
}

impl fmt::Debug for Potentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potentials::Zero => write!(f, "Zero"),
            Potentials::Uniform { phi, a } => write!(f, "Uniform {{ phi: {phi}, a: {a:?} }}"),
            Potentials::PlaneWave { phi0, a0, k, omega, phase } => {
                write!(f, "PlaneWave {{ phi0: {phi0}, a0: {a0:?}, k: {k:?}, omega: {omega}, phase: {phase} }}")
            }
            Potentials::GaussianPulse { phi0, center, width, t0, duration } => write!(
                f,
                "GaussianPulse {{ phi0: {phi0}, center: {center:?}, width: {width}, t0: {t0}, duration: {duration} }}"
            ),
            Potentials::Gridded { phi, .. } => write!(f, "Gridded {{ sites: {} }}", phi.len()),
            Potentials::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Potentials {
    pub fn custom(
        phi: impl Fn(f64, [f64; 3]) -> f64 + Send + Sync + 'static,
        a: impl Fn(f64, [f64; 3]) -> [f64; 3] + Send + Sync + 'static,
        dphi_dt: Option<ScalarFn>,
        fd_eps: Option<f64>,
        is_static: bool,
    ) -> Self {
        Potentials::Custom { phi: Arc::new(phi), a: Arc::new(a), dphi_dt, fd_eps, is_static }
    }

    /// Reads a gridded potential from CSV with header `phi,ax,ay,az` and one
    /// row per site in site order.
    pub fn from_csv(path: &Path, grid: &Grid) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let expected = ["phi", "ax", "ay", "az"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::Format(format!(
                "{}: header must be phi,ax,ay,az",
                path.display()
            )));
        }
        let mut phi = Vec::new();
        let mut a = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), line + 2)))?;
            phi.push(vals[0]);
            a.push([vals[1], vals[2], vals[3]]);
        }
        let p = Potentials::Gridded { phi, a };
        p.validate(grid)?;
        Ok(p)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            Potentials::Gridded { phi, a } => {
                if phi.len() != grid.num_sites() || a.len() != grid.num_sites() {
                    return Err(Error::DimensionMismatch(format!(
                        "gridded potential has {} rows for {} sites",
                        phi.len(),
                        grid.num_sites()
                    )));
                }
                if phi.iter().chain(a.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("gridded potential has non-finite values".into()));
                }
            }
            Potentials::GaussianPulse { width, duration, .. }
                if (!(*width > 0.0) || !(*duration > 0.0)) => {
                    return Err(Error::InvalidParameter("pulse width and duration must be positive".into()));
                }
            _ => {}
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potentials::Zero => true,
            Potentials::Uniform { phi, a } => *phi == 0.0 && a.iter().all(|v| *v == 0.0),
            Potentials::PlaneWave { phi0, a0, .. } => *phi0 == 0.0 && a0.iter().all(|v| *v == 0.0),
            Potentials::GaussianPulse { phi0, .. } => *phi0 == 0.0,
            Potentials::Gridded { phi, a } => phi.iter().chain(a.iter().flatten()).all(|v| *v == 0.0),
            Potentials::Custom { .. } => false,
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            Potentials::Zero | Potentials::Uniform { .. } | Potentials::Gridded { .. } => true,
            Potentials::PlaneWave { omega, .. } => *omega == 0.0,
            Potentials::GaussianPulse { .. } => self.is_zero(),
            Potentials::Custom { is_static, .. } => *is_static,
        }
    }

    /// Zero or uniform potentials keep the Hamiltonian translation invariant.
    pub fn is_translation_invariant(&self) -> bool {
        matches!(self, Potentials::Zero | Potentials::Uniform { .. }) || self.is_zero()
    }

    fn phase(k: &[f64; 3], x: [f64; 3], omega: f64, phase: f64, t: f64) -> f64 {
        k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - omega * t + phase
    }

    fn min_image(grid: &Grid, x: [f64; 3], c: [f64; 3]) -> f64 {
        let mut r2 = 0.0;
        for axis in 0..grid.dim() {
            let l = grid.length(axis);
            let mut d = (x[axis] - c[axis]).rem_euclid(l);
            if d > 0.5 * l {
                d -= l;
            }
            r2 += d * d;
        }
        r2
    }

    /// `φ` at every site.
    pub fn phi(&self, grid: &Grid, t: f64) -> Vec<f64> {
        let n = grid.num_sites();
        match self {
            Potentials::Zero => vec![0.0; n],
            Potentials::Uniform { phi, .. } => vec![*phi; n],
            Potentials::PlaneWave { phi0, k, omega, phase, .. } => (0..n)
                .map(|s| phi0 * Self::phase(k, grid.position(s), *omega, *phase, t).cos())
                .collect(),
            Potentials::GaussianPulse { phi0, center, width, t0, duration } => {
                let temporal = (-(t - t0).powi(2) / (2.0 * duration * duration)).exp();
                (0..n)
                    .map(|s| {
                        let r2 = Self::min_image(grid, grid.position(s), *center);
                        phi0 * temporal * (-r2 / (2.0 * width * width)).exp()
                    })
                    .collect()
            }
            Potentials::Gridded { phi, .. } => phi.clone(),
            Potentials::Custom { phi, .. } => (0..n).map(|s| phi(t, grid.position(s))).collect(),
        }
    }

    /// `A` at every site, zeroed along axes the grid does not have.
    pub fn vector(&self, grid: &Grid, t: f64) -> Vec<[f64; 3]> {
        let n = grid.num_sites();
        let mut out: Vec<[f64; 3]> = match self {
            Potentials::Zero | Potentials::GaussianPulse { .. } => vec![[0.0; 3]; n],
            Potentials::Uniform { a, .. } => vec![*a; n],
            Potentials::PlaneWave { a0, k, omega, phase, .. } => (0..n)
                .map(|s| {
                    let c = Self::phase(k, grid.position(s), *omega, *phase, t).cos();
                    [a0[0] * c, a0[1] * c, a0[2] * c]
                })
                .collect(),
            Potentials::Gridded { a, .. } => a.clone(),
            Potentials::Custom { a, .. } => (0..n).map(|s| a(t, grid.position(s))).collect(),
        };
        for v in &mut out {
            for comp in v.iter_mut().skip(grid.dim()) {
                *comp = 0.0;
            }
        }
        out
    }

    /// `∂φ/∂t` at every site.
    pub fn dphi_dt(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        let n = grid.num_sites();
        Ok(match self {
            Potentials::Zero | Potentials::Uniform { .. } | Potentials::Gridded { .. } => vec![0.0; n],
            Potentials::PlaneWave { phi0, k, omega, phase, .. } => (0..n)
                .map(|s| phi0 * omega * Self::phase(k, grid.position(s), *omega, *phase, t).sin())
                .collect(),
            Potentials::GaussianPulse { t0, duration, .. } => {
                let factor = -(t - t0) / (duration * duration);
                self.phi(grid, t).into_iter().map(|v| v * factor).collect()
            }
            Potentials::Custom { dphi_dt: Some(d), .. } => (0..n).map(|s| d(t, grid.position(s))).collect(),
            Potentials::Custom { dphi_dt: None, fd_eps: Some(h), .. } => {
                let (p, m) = (self.phi(grid, t + h), self.phi(grid, t - h));
                p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            }
            Potentials::Custom { dphi_dt: None, fd_eps: None, is_static, .. } => {
                if *is_static {
                    vec![0.0; n]
                } else {
                    return Err(Error::Missing("time derivative of the scalar potential".into()));
                }
            }
        })
    }
}
