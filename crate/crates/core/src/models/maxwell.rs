use super::PhysicalParams;
use crate::error::{Error, Result};
use crate::lattice::{curl_op, div_op, Grid, Hermiticity, LatticeOperator};
use crate::reduction::Hamiltonian;
use crate::state::StateVector;
use crate::C64;

/// `H = iħ [[0, c curl], [-c curl, 0]]` on `(E, H)` with six components per
/// site.
pub fn maxwell_hamiltonian(grid: &Grid, params: &PhysicalParams) -> Result<Hamiltonian> {
    params.validate()?;
    let curl = curl_op(grid)?.scale(C64::new(params.c, 0.0));
    let blocks = vec![
        vec![None, Some(curl.clone())],
        vec![Some(curl.scale(C64::new(-1.0, 0.0))), None],
    ];
    let h = LatticeOperator::from_blocks(grid, &blocks)?
        .scale(C64::new(0.0, params.hbar))
        .with_hermiticity(Hermiticity::Hermitian);
    Ok(Hamiltonian::constant(h, params.hbar)?.with_label("maxwell"))
}

fn split_fields(state: &StateVector) -> Result<(Vec<C64>, Vec<C64>)> {
    if state.fibre_dim() != 6 {
        return Err(Error::DimensionMismatch(format!(
            "Maxwell states have 6 components per site, got {}",
            state.fibre_dim()
        )));
    }
    let mut e = Vec::with_capacity(state.len() / 2);
    let mut h = Vec::with_capacity(state.len() / 2);
    for chunk in state.data().chunks(6) {
        e.extend_from_slice(&chunk[..3]);
        h.extend_from_slice(&chunk[3..]);
    }
    Ok((e, h))
}

/// `(div E, div H)` at every site.
pub fn maxwell_constraints(state: &StateVector) -> Result<(Vec<C64>, Vec<C64>)> {
    let (e, h) = split_fields(state)?;
    let div = div_op(state.grid())?;
    Ok((div.apply(&e)?, div.apply(&h)?))
}

/// `½ Σ (|E|² + |H|²) ΔV`.
pub fn maxwell_energy(state: &StateVector) -> Result<f64> {
    let (e, h) = split_fields(state)?;
    let sum: f64 = e.iter().chain(&h).map(|v| v.norm_sqr()).sum();
    Ok(0.5 * sum * state.grid().cell_volume())
}
