use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PhysicalParams, Potentials};
use crate::error::{Error, Result};
use crate::lattice::{central_difference, momentum_op, momentum_squared_op, Grid, Hermiticity, LatticeOperator};
use crate::reduction::{companion_system, Coefficient, EquationSpec, Hamiltonian};
use crate::C64;

/// Which first-order form of the Klein-Gordon equation to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgReduction {
    #[default]
    Canonical,
    FeshbachVillars,
}

fn real_field(values: impl IntoIterator<Item = f64>) -> Vec<C64> {
    values.into_iter().map(|v| C64::new(v, 0.0)).collect()
}

/// `(p - (e/c)A)²` expanded as `p² - (e/c)(p·A + A·p) + (e/c)² A²`.
fn kinetic_square(grid: &Grid, params: &PhysicalParams, potentials: &Potentials, t: f64) -> Result<LatticeOperator> {
    let mut op = momentum_squared_op(grid, params.hbar)?;
    let e = params.charge;
    if e == 0.0 || potentials.is_zero() {
        return Ok(op);
    }
    let q = e / params.c;
    let a = potentials.vector(grid, t);
    let mut a2 = vec![0.0; grid.num_sites()];
    for axis in 0..grid.dim() {
        if a.iter().all(|v| v[axis] == 0.0) {
            continue;
        }
        let p = momentum_op(grid, axis, params.hbar)?;
        let ai = LatticeOperator::multiplication(grid, &real_field(a.iter().map(|v| v[axis])))?;
        let sym = p.compose(&ai)?.add(&ai.compose(&p)?)?;
        op = op.lincomb(C64::new(1.0, 0.0), &sym, C64::new(-q, 0.0))?;
        for (acc, v) in a2.iter_mut().zip(&a) {
            *acc += v[axis] * v[axis];
        }
    }
    let a2 = LatticeOperator::multiplication(grid, &real_field(a2.into_iter().map(|v| q * q * v)))?;
    Ok(op.add(&a2)?.with_hermiticity(Hermiticity::Hermitian))
}

/// `f₀ = -(c²/ħ²)(p - (e/c)A)² - m²c⁴/ħ² + (e²/ħ²)φ² + (2e/iħ) ∂φ/∂t`.
pub fn kg_f0(grid: &Grid, params: &PhysicalParams, potentials: &Potentials, t: f64) -> Result<LatticeOperator> {
    let (c, hbar, e) = (params.c, params.hbar, params.charge);
    let kin = kinetic_square(grid, params, potentials, t)?;
    let mass = (params.rest_energy() / hbar).powi(2);
    let mut f0 = kin.lincomb(
        C64::new(-c * c / (hbar * hbar), 0.0),
        &LatticeOperator::identity(grid, 1),
        C64::new(-mass, 0.0),
    )?;
    if e != 0.0 && !potentials.is_zero() {
        let phi = potentials.phi(grid, t);
        let dphi = potentials.dphi_dt(grid, t)?;
        let diag: Vec<C64> = phi
            .iter()
            .zip(&dphi)
            .map(|(p, d)| C64::new(e * e * p * p / (hbar * hbar), -2.0 * e * d / hbar))
            .collect();
        f0 = f0.add(&LatticeOperator::multiplication(grid, &diag)?)?;
    }
    Ok(f0)
}

fn kg_f1(grid: &Grid, params: &PhysicalParams, potentials: &Potentials, t: f64) -> Result<LatticeOperator> {
    // (2e/iħ) φ
    let k = -2.0 * params.charge / params.hbar;
    let vals: Vec<C64> = potentials.phi(grid, t).iter().map(|p| C64::new(0.0, k * p)).collect();
    LatticeOperator::multiplication(grid, &vals)
}

fn check_derivative_available(grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<()> {
    if params.charge != 0.0 && !potentials.is_zero() {
        potentials.dphi_dt(grid, 0.0)?;
    }
    Ok(())
}

/// The second-order equation `∂²φ/∂t² = f₀φ + (2e/iħ)φ_em ∂φ/∂t`.
pub fn kg_equation_spec(grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<EquationSpec> {
    params.validate()?;
    potentials.validate(grid)?;
    check_derivative_available(grid, params, potentials)?;
    let coefficients = if potentials.is_static() || params.charge == 0.0 {
        vec![
            Coefficient::Constant(kg_f0(grid, params, potentials, 0.0)?),
            Coefficient::Constant(kg_f1(grid, params, potentials, 0.0)?),
        ]
    } else {
        let (g0, p0, pot0) = (grid.clone(), *params, potentials.clone());
        let (g1, p1, pot1) = (grid.clone(), *params, potentials.clone());
        vec![
            Coefficient::time_dependent(move |t| kg_f0(&g0, &p0, &pot0, t)),
            Coefficient::time_dependent(move |t| kg_f1(&g1, &p1, &pot1, t)),
        ]
    };
    EquationSpec::new(grid.clone(), 1, params.hbar, coefficients)?.with_names(vec!["kg_f0".into(), "kg_f1".into()])
}

/// Canonical reduction on `ψ = (φ, ∂φ/∂t)`: `iħ [[0, 1], [f₀, (2e/iħ)φ_em]]`.
pub fn kg_canonical(grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<Hamiltonian> {
    Ok(companion_system(&kg_equation_spec(grid, params, potentials)?)?.with_label("kg_canonical"))
}

/// The constant frame `A` with `(ψ₊, ψ₋) = A (φ, ∂φ/∂t)`,
/// `ψ± = φ ± (iħ/mc²) ∂φ/∂t`.
pub fn feshbach_villars_frame(params: &PhysicalParams) -> Result<DMatrix<C64>> {
    require_mass(params)?;
    let a = C64::new(0.0, params.hbar / params.rest_energy());
    let one = C64::new(1.0, 0.0);
    Ok(DMatrix::from_row_slice(2, 2, &[one, a, one, -a]))
}

fn require_mass(params: &PhysicalParams) -> Result<()> {
    if !(params.mass > 0.0) {
        return Err(Error::InvalidParameter("the Feshbach-Villars split needs m > 0".into()));
    }
    Ok(())
}

fn fv_operator(grid: &Grid, params: &PhysicalParams, potentials: &Potentials, t: f64) -> Result<LatticeOperator> {
    let mc2 = params.rest_energy();
    let f0 = kg_f0(grid, params, potentials, t)?;
    // ħ² f₀ / mc²
    let g = f0.scale(C64::new(params.hbar * params.hbar / mc2, 0.0));
    let phi = potentials.phi(grid, t);
    let e = if potentials.is_zero() { 0.0 } else { params.charge };
    let diag = |sign_m: f64, sign_phi: f64| -> Result<LatticeOperator> {
        LatticeOperator::multiplication(grid, &real_field(phi.iter().map(|p| sign_m * mc2 + sign_phi * 2.0 * e * p)))
    };
    let half = C64::new(0.5, 0.0);
    let neg_half = C64::new(-0.5, 0.0);
    let blocks = vec![
        vec![Some(diag(1.0, 1.0)?.lincomb(half, &g, neg_half)?), Some(diag(-1.0, -1.0)?.lincomb(half, &g, neg_half)?)],
        vec![Some(diag(1.0, -1.0)?.lincomb(half, &g, half)?), Some(diag(-1.0, 1.0)?.lincomb(half, &g, half)?)],
    ];
    LatticeOperator::from_blocks(grid, &blocks)
}

/// The two-component form on `ψ± = φ ± (iħ/mc²) ∂φ/∂t`. In the free case it
/// is pseudo-Hermitian with metric `η = diag(1, -1)`.
pub fn kg_feshbach_villars(grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<Hamiltonian> {
    params.validate()?;
    require_mass(params)?;
    potentials.validate(grid)?;
    check_derivative_available(grid, params, potentials)?;
    let free = potentials.is_zero() || params.charge == 0.0;
    let h = if potentials.is_static() || free {
        Hamiltonian::constant(fv_operator(grid, params, potentials, 0.0)?, params.hbar)?
    } else {
        let (g, p, pot) = (grid.clone(), *params, potentials.clone());
        Hamiltonian::dynamic(grid.clone(), 2, params.hbar, Hermiticity::General, move |t| fv_operator(&g, &p, &pot, t))?
    };
    let h = h.with_label("kg_feshbach_villars");
    if free {
        h.with_metric(vec![1.0, -1.0])
    } else {
        Ok(h)
    }
}

/// Free five-component form on `ψ = (mc²φ, ∂φ/∂t, ∇φ)`, `H = iħK` with
/// `K` the generator of `∂ψ/∂t = Kψ` implied by the free equation.
pub fn kg_five_component(grid: &Grid, params: &PhysicalParams) -> Result<Hamiltonian> {
    params.validate()?;
    if grid.dim() != 3 {
        return Err(Error::InvalidGrid(format!("the five-component form needs dim = 3, got {}", grid.dim())));
    }
    let (c, hbar, mc2) = (params.c, params.hbar, params.rest_energy());
    let id = LatticeOperator::identity(grid, 1);
    let d: Vec<LatticeOperator> = (0..3).map(|a| central_difference(grid, a)).collect::<Result<_>>()?;
    let mut blocks: Vec<Vec<Option<LatticeOperator>>> = vec![vec![None; 5]; 5];
    blocks[0][1] = Some(id.scale(C64::new(mc2, 0.0)));
    blocks[1][0] = Some(id.scale(C64::new(-mc2 / (hbar * hbar), 0.0)));
    for a in 0..3 {
        blocks[1][2 + a] = Some(d[a].scale(C64::new(c * c, 0.0)));
        blocks[2 + a][1] = Some(d[a].clone());
    }
    // keep every block row/column non-empty even when m = 0
    for (i, row) in blocks.iter_mut().enumerate() {
        if row[i].is_none() {
            row[i] = Some(LatticeOperator::zero(grid, 1));
        }
    }
    let k = LatticeOperator::from_blocks(grid, &blocks)?;
    Ok(Hamiltonian::constant(k.scale(C64::new(0.0, hbar)).with_hermiticity(Hermiticity::General), hbar)?
        .with_label("kg_five_component"))
}

/// `diag(H₀, H₁, H₂, H₃)`: one Klein-Gordon block per component of a
/// 4-vector field.
pub fn spin1_block(
    grid: &Grid,
    params: &PhysicalParams,
    potentials: &Potentials,
    reduction: KgReduction,
) -> Result<Hamiltonian> {
    let one = match reduction {
        KgReduction::Canonical => kg_canonical(grid, params, potentials)?,
        KgReduction::FeshbachVillars => kg_feshbach_villars(grid, params, potentials)?,
    };
    Ok(Hamiltonian::block_diagonal(&[one.clone(), one.clone(), one.clone(), one])?.with_label("spin1"))
}
