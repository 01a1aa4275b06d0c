use nalgebra::DMatrix;

use super::{PhysicalParams, Potentials};
use crate::error::Result;
use crate::lattice::{momentum_op, Grid, Hermiticity, LatticeOperator};
use crate::reduction::Hamiltonian;
use crate::C64;

/// `β` and `α¹, α², α³` in the standard (Dirac) representation.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracMatrices {
    pub beta: DMatrix<C64>,
    pub alpha: [DMatrix<C64>; 3],
}

impl DiracMatrices {
    pub fn standard() -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let sigma = [
            [[z, o], [o, z]],
            [[z, -i], [i, z]],
            [[o, z], [z, -o]],
        ];
        let alpha = sigma.map(|s| {
            let mut m = DMatrix::zeros(4, 4);
            for r in 0..2 {
                for c in 0..2 {
                    m[(r, c + 2)] = s[r][c];
                    m[(r + 2, c)] = s[r][c];
                }
            }
            m
        });
        let beta = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![o, o, -o, -o]));
        DiracMatrices { beta, alpha }
    }

    /// Largest deviation from `β² = 1`, `(αⁱ)² = 1`, `{αⁱ, αʲ} = 2δⁱʲ`,
    /// `{αⁱ, β} = 0` and Hermiticity.
    pub fn algebra_defect(&self) -> f64 {
        let id = DMatrix::<C64>::identity(4, 4);
        let dev = |m: DMatrix<C64>| m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst = dev(&self.beta * &self.beta - &id).max(dev(&self.beta - self.beta.adjoint()));
        for i in 0..3 {
            let a = &self.alpha[i];
            worst = worst.max(dev(a - a.adjoint()));
            worst = worst.max(dev(a * &self.beta + &self.beta * a));
            for j in 0..3 {
                let anti = a * &self.alpha[j] + &self.alpha[j] * a;
                let target = if i == j { id.scale(2.0) } else { DMatrix::zeros(4, 4) };
                worst = worst.max(dev(anti - target));
            }
        }
        worst
    }
}

fn dirac_operator(grid: &Grid, params: &PhysicalParams, potentials: &Potentials, t: f64) -> Result<LatticeOperator> {
    let m = DiracMatrices::standard();
    let mut h = LatticeOperator::local(grid, &m.beta.map(|v| v * params.rest_energy()), Hermiticity::Hermitian);
    for axis in 0..grid.dim() {
        let p = momentum_op(grid, axis, params.hbar)?;
        h = h.add(&p.kron_fibre(&m.alpha[axis].map(|v| v * params.c))?)?;
    }
    let e = params.charge;
    if e != 0.0 && !potentials.is_zero() {
        let phi: Vec<C64> = potentials.phi(grid, t).iter().map(|v| C64::new(e * v, 0.0)).collect();
        h = h.add(&LatticeOperator::multiplication(grid, &phi)?.kron_fibre(&DMatrix::identity(4, 4))?)?;
        let a = potentials.vector(grid, t);
        for axis in 0..grid.dim() {
            let comp: Vec<C64> = a.iter().map(|v| C64::new(-e * v[axis], 0.0)).collect();
            if comp.iter().any(|v| v.re != 0.0) {
                h = h.add(&LatticeOperator::multiplication(grid, &comp)?.kron_fibre(&m.alpha[axis])?)?;
            }
        }
    }
    Ok(h.with_hermiticity(Hermiticity::Hermitian))
}

/// `H_D = eφ + c α·(p - (e/c)A) + mc²β` on 4-spinors.
pub fn dirac_hamiltonian(grid: &Grid, params: &PhysicalParams, potentials: &Potentials) -> Result<Hamiltonian> {
    params.validate()?;
    potentials.validate(grid)?;
    let h = if potentials.is_static() || params.charge == 0.0 {
        Hamiltonian::constant(dirac_operator(grid, params, potentials, 0.0)?, params.hbar)?
    } else {
        let (g, p, pot) = (grid.clone(), *params, potentials.clone());
        Hamiltonian::dynamic(grid.clone(), 4, params.hbar, Hermiticity::Hermitian, move |t| {
            dirac_operator(&g, &p, &pot, t)
        })?
    };
    Ok(h.with_label("dirac"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, Eigen};

    #[test]
    fn standard_representation_satisfies_the_algebra() {
        // integer matrices: the relations hold exactly
        assert_eq!(DiracMatrices::standard().algebra_defect(), 0.0);
    }

    #[test]
    fn zero_mode_spectrum_is_rest_energy() {
        let g = Grid::new(1, 8, 6.0).unwrap();
        let p = PhysicalParams::new(1.3, 0.0, 2.0, 1.0).unwrap();
        let h = dirac_hamiltonian(&g, &p, &Potentials::Zero).unwrap();
        let hk = h.evaluate(0.0).unwrap().mode_matrix([0.0; 3]).unwrap();
        let ev = linalg::sorted_eigenvalues(&hk).unwrap();
        let mc2 = p.rest_energy();
        for (v, e) in ev.iter().zip([-mc2, -mc2, mc2, mc2]) {
            assert!((v - C64::new(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mode_spectrum_uses_discrete_momentum() {
        let g = Grid::new(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let p = PhysicalParams::new(0.7, 0.0, 1.5, 0.9).unwrap();
        let h = dirac_hamiltonian(&g, &p, &Potentials::Zero).unwrap();
        let k = g.wavenumber(0, 3);
        let kt = g.discrete_momentum(0, k);
        let e = ((p.c * p.hbar * kt).powi(2) + p.rest_energy().powi(2)).sqrt();
        let hk = h.evaluate(0.0).unwrap().mode_matrix([k, 0.0, 0.0]).unwrap();
        let eig = Eigen::new(&hk).unwrap();
        let mut ev: Vec<f64> = eig.values.iter().map(|v| v.re).collect();
        ev.sort_by(f64::total_cmp);
        for (v, x) in ev.iter().zip([-e, -e, e, e]) {
            assert!((v - x).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_hamiltonian_is_hermitian() {
        let g = Grid::new(2, 6, 3.0).unwrap();
        let p = PhysicalParams::new(1.0, 0.8, 1.0, 1.0).unwrap();
        let pot = Potentials::PlaneWave { phi0: 0.4, a0: [0.2, -0.3, 0.5], k: [2.0, 1.0, 0.0], omega: 1.1, phase: 0.3 };
        let h = dirac_hamiltonian(&g, &p, &pot).unwrap();
        assert!(!h.is_constant());
        for t in [0.0, 0.37, 1.2] {
            let op = h.evaluate(t).unwrap();
            assert!(op.hermiticity_defect() <= 1e-12);
        }
    }
}
