use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::linalg::{self, Eigen};
use crate::models::{self, ModelKind, PhysicalParams, Potentials};
use crate::C64;

/// Exact data for one Fourier mode of a translation-invariant model.
#[derive(Clone, Debug)]
pub struct ModeOracle {
    pub model: ModelKind,
    pub mode: [i64; 3],
    pub k: [f64; 3],
    /// `Σ k̃ᵢ²` with `k̃ = sin(kΔ)/Δ`.
    pub k_tilde2: f64,
    pub hbar: f64,
    pub matrix: DMatrix<C64>,
    pub eigen: Eigen,
}

impl ModeOracle {
    pub fn is_defective(&self) -> bool {
        self.eigen.defective
    }

    /// Eigenvalues sorted by real part, then imaginary part.
    pub fn spectrum(&self) -> Vec<C64> {
        let mut v = self.eigen.values.clone();
        v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        v
    }

    /// `exp(-i dt H_k / ħ)` through the eigenbasis; defective modes are
    /// refused.
    pub fn propagator(&self, dt: f64) -> Result<DMatrix<C64>> {
        let k = C64::new(0.0, -dt / self.hbar);
        self.eigen.apply_function(|l| (l * k).exp())
    }
}

/// `Σ k̃ᵢ²` over the axes of `grid`.
pub fn discrete_k2(grid: &Grid, k: [f64; 3]) -> f64 {
    (0..grid.dim()).map(|a| grid.discrete_momentum(a, k[a]).powi(2)).sum()
}

/// Closed-form per-mode spectrum of the free model, sorted ascending.
pub fn analytic_spectrum(kind: ModelKind, params: &PhysicalParams, grid: &Grid, k: [f64; 3]) -> Vec<f64> {
    let k2 = discrete_k2(grid, k);
    let e = params.energy(k2);
    let mut v = match kind {
        ModelKind::Dirac => vec![-e, -e, e, e],
        ModelKind::KgCanonical | ModelKind::KgFeshbachVillars => vec![-e, e],
        ModelKind::KgFiveComponent => vec![-e, 0.0, 0.0, 0.0, e],
        ModelKind::Maxwell => {
            let w = params.c * params.hbar * k2.sqrt();
            vec![-w, -w, 0.0, 0.0, w, w]
        }
        ModelKind::Spin1 => [vec![-e; 4], vec![e; 4]].concat(),
    };
    v.sort_by(f64::total_cmp);
    v
}

/// Builds the mode matrix of `kind` at `mode` and decomposes it.
pub fn fourier_oracle(
    kind: ModelKind,
    params: &PhysicalParams,
    grid: &Grid,
    potentials: &Potentials,
    mode: [i64; 3],
) -> Result<ModeOracle> {
    if !potentials.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant(format!(
            "{} with site- or time-dependent potentials has no per-mode oracle",
            kind.name()
        )));
    }
    let h = models::build(kind, grid, params, potentials)?;
    if !h.is_constant() {
        return Err(Error::NotTranslationInvariant(format!("{} is time dependent", kind.name())));
    }
    let op = h.evaluate(0.0)?;
    if !op.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant(format!("{} is not translation invariant", kind.name())));
    }
    let k = grid.wavevector(mode);
    let matrix = op.mode_matrix(k)?;
    let eigen = Eigen::new(&matrix)?;
    Ok(ModeOracle { model: kind, mode, k, k_tilde2: discrete_k2(grid, k), hbar: params.hbar, matrix, eigen })
}

/// Largest deviation between the oracle spectrum and the closed form.
pub fn spectrum_error(oracle: &ModeOracle, params: &PhysicalParams, grid: &Grid) -> f64 {
    let exact = analytic_spectrum(oracle.model, params, grid, oracle.k);
    oracle
        .spectrum()
        .iter()
        .zip(&exact)
        .map(|(v, e)| (v - C64::new(*e, 0.0)).norm())
        .fold(0.0, f64::max)
}

/// Exact evolution of a whole-lattice field by per-mode propagators.
pub fn evolve_by_modes(oracles: &[ModeOracle], grid: &Grid, fibre: usize, field: &[C64], dt: f64) -> Result<Vec<C64>> {
    let mut coeffs = crate::lattice::fourier_forward(grid, fibre, field);
    for (o, chunk) in oracles.iter().zip(coeffs.chunks_mut(fibre)) {
        let u = o.propagator(dt)?;
        let out = linalg::mat_vec(&u, chunk);
        chunk.copy_from_slice(&out);
    }
    Ok(crate::lattice::fourier_inverse(grid, fibre, &coeffs))
}

/// Oracles for every mode of `grid`, in site order of the mode index.
pub fn all_mode_oracles(kind: ModelKind, params: &PhysicalParams, grid: &Grid) -> Result<Vec<ModeOracle>> {
    grid.modes().into_iter().map(|m| fourier_oracle(kind, params, grid, &Potentials::Zero, m)).collect()
}
