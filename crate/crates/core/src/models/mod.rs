//! Concrete Hamiltonians: Dirac, three Klein-Gordon reductions, Maxwell and
//! the spin-1 block composition.

mod dirac;
mod klein_gordon;
mod maxwell;
mod potentials;

use serde::{Deserialize, Serialize};

pub use dirac::{dirac_hamiltonian, DiracMatrices};
pub use klein_gordon::{
    feshbach_villars_frame, kg_canonical, kg_equation_spec, kg_f0, kg_feshbach_villars, kg_five_component,
    spin1_block, KgReduction,
};
pub use maxwell::{maxwell_constraints, maxwell_energy, maxwell_hamiltonian};
pub use potentials::Potentials;

use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::reduction::Hamiltonian;

/// Physical constants of a model, in natural units by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    pub mass: f64,
    pub charge: f64,
    pub c: f64,
    pub hbar: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { mass: 1.0, charge: 0.0, c: 1.0, hbar: 1.0 }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, charge: f64, c: f64, hbar: f64) -> Result<Self> {
        let p = PhysicalParams { mass, charge, c, hbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be non-negative, got {}", self.mass)));
        }
        if !self.charge.is_finite() {
            return Err(Error::InvalidParameter("charge must be finite".into()));
        }
        Ok(())
    }

    /// Rest energy `mc²`.
    pub fn rest_energy(&self) -> f64 {
        self.mass * self.c * self.c
    }

    /// `Ω = √(c²k̃² + m²c⁴/ħ²)` for a squared discrete momentum `k̃²`.
    pub fn kg_frequency(&self, k2: f64) -> f64 {
        (self.c * self.c * k2 + (self.rest_energy() / self.hbar).powi(2)).sqrt()
    }

    /// Relativistic energy `√(c²ħ²k̃² + m²c⁴)`.
    pub fn energy(&self, k2: f64) -> f64 {
        self.hbar * self.kg_frequency(k2)
    }
}

/// The model families known to the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dirac,
    KgCanonical,
    KgFeshbachVillars,
    KgFiveComponent,
    Maxwell,
    Spin1,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Dirac,
        ModelKind::KgCanonical,
        ModelKind::KgFeshbachVillars,
        ModelKind::KgFiveComponent,
        ModelKind::Maxwell,
        ModelKind::Spin1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Dirac => "dirac",
            ModelKind::KgCanonical => "kg_canonical",
            ModelKind::KgFeshbachVillars => "kg_feshbach_villars",
            ModelKind::KgFiveComponent => "kg_five_component",
            ModelKind::Maxwell => "maxwell",
            ModelKind::Spin1 => "spin1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model '{s}'")))
    }

    /// Components per site.
    pub fn fibre_dim(&self) -> usize {
        match self {
            ModelKind::Dirac => 4,
            ModelKind::KgCanonical | ModelKind::KgFeshbachVillars => 2,
            ModelKind::KgFiveComponent => 5,
            ModelKind::Maxwell => 6,
            ModelKind::Spin1 => 8,
        }
    }
}

/// Builds the Hamiltonian of `kind`. Models without potential coupling
/// (five-component KG, Maxwell) reject non-zero potentials.
pub fn build(kind: ModelKind, grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<Hamiltonian> {
    let free_only = |what: &str| -> Result<()> {
        if potentials.is_zero() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what} is defined for the free field only")))
        }
    };
    match kind {
        ModelKind::Dirac => dirac_hamiltonian(grid, params, potentials),
        ModelKind::KgCanonical => kg_canonical(grid, params, potentials),
        ModelKind::KgFeshbachVillars => kg_feshbach_villars(grid, params, potentials),
        ModelKind::KgFiveComponent => {
            free_only("the five-component reduction")?;
            kg_five_component(grid, params)
        }
        ModelKind::Maxwell => {
            free_only("the Maxwell model")?;
            maxwell_hamiltonian(grid, params)
        }
        ModelKind::Spin1 => spin1_block(grid, params, potentials, KgReduction::Canonical),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(PhysicalParams::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, 1.0, -1.0).is_err());
        assert!(PhysicalParams::new(-1.0, 0.0, 1.0, 1.0).is_err());
        let p = PhysicalParams::new(2.0, 0.5, 3.0, 0.5).unwrap();
        assert_eq!(p.rest_energy(), 18.0);
        assert!((p.energy(0.0) - 18.0).abs() < 1e-14);
    }

    #[test]
    fn model_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.name()).unwrap(), k);
        }
        assert!(ModelKind::parse("proca").is_err());
    }
}
