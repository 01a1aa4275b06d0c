//! Reduction of n-th-order-in-time linear equations
//! `∂ⁿφ/∂tⁿ = f₀φ + f₁∂φ/∂t + … + f_{n-1}∂ⁿ⁻¹φ/∂tⁿ⁻¹` to first-order
//! Schrödinger-type systems `iħ ∂ψ/∂t = H ψ` on the stacked derivatives,
//! and frame changes `ψ̃ = Aψ` of such systems.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frames::{FibreMap, FrameFamily, DEFAULT_CONDITION_BOUND};
use crate::lattice::{Grid, Hermiticity, LatticeOperator};
use crate::sparse::CsrMatrix;
use crate::state::StateVector;
use crate::C64;

pub type OperatorFn = Arc<dyn Fn(f64) -> Result<LatticeOperator> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Constant(Arc<LatticeOperator>),
    Dynamic(OperatorFn),
}

/// A possibly time-dependent generator `H(t)` of `iħ ∂ψ/∂t = H ψ`.
#[derive(Clone)]
pub struct Hamiltonian {
    grid: Grid,
    fibre_dim: usize,
    hbar: f64,
    source: Source,
    hermiticity: Hermiticity,
    metric: Option<Vec<f64>>,
    label: String,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("label", &self.label)
            .field("fibre_dim", &self.fibre_dim)
            .field("sites", &self.grid.num_sites())
            .field("constant", &self.is_constant())
            .field("hermiticity", &self.hermiticity)
            .finish()
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
    }
    Ok(())
}

impl Hamiltonian {
    pub fn constant(op: LatticeOperator, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        if op.fibre_in() != op.fibre_out() {
            return Err(Error::DimensionMismatch("a Hamiltonian must be square".into()));
        }
        Ok(Hamiltonian {
            grid: op.grid().clone(),
            fibre_dim: op.fibre_dim(),
            hbar,
            hermiticity: op.hermiticity(),
            source: Source::Constant(Arc::new(op)),
            metric: None,
            label: String::new(),
        })
    }

    pub fn dynamic(
        grid: Grid,
        fibre_dim: usize,
        hbar: f64,
        hermiticity: Hermiticity,
        f: impl Fn(f64) -> Result<LatticeOperator> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_hbar(hbar)?;
        Ok(Hamiltonian {
            grid,
            fibre_dim,
            hbar,
            source: Source::Dynamic(Arc::new(f)),
            hermiticity,
            metric: None,
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Declares the diagonal metric `η` (one sign per fibre component) for
    /// which `η H = H† η`.
    pub fn with_metric(mut self, signs: Vec<f64>) -> Result<Self> {
        if signs.len() != self.fibre_dim || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "metric must have {} entries of ±1",
                self.fibre_dim
            )));
        }
        self.metric = Some(signs);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn total_dim(&self) -> usize {
        self.fibre_dim * self.grid.num_sites()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn hermiticity(&self) -> Hermiticity {
        self.hermiticity
    }

    pub fn metric(&self) -> Option<&[f64]> {
        self.metric.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.source, Source::Constant(_))
    }

    /// `H(t)`.
    pub fn evaluate(&self, t: f64) -> Result<Arc<LatticeOperator>> {
        let op = match &self.source {
            Source::Constant(op) => return Ok(op.clone()),
            Source::Dynamic(f) => f(t)?,
        };
        if op.grid() != &self.grid || op.fibre_in() != self.fibre_dim || op.fibre_out() != self.fibre_dim {
            return Err(Error::DimensionMismatch(format!(
                "H({t}) has fibre {}->{} but the Hamiltonian declares {}",
                op.fibre_in(),
                op.fibre_out(),
                self.fibre_dim
            )));
        }
        if op.matrix().triplets().any(|(_, _, v)| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("H({t}) has non-finite entries")));
        }
        Ok(Arc::new(op))
    }

    /// Largest entry of `ηH(t) - H(t)†η`, or of `H - H†` without a metric.
    pub fn pseudo_hermiticity_defect(&self, t: f64) -> Result<f64> {
        let h = self.evaluate(t)?;
        let eta = self.metric_matrix();
        let lhs = eta.matmul(h.matrix());
        let rhs = h.matrix().adjoint().matmul(&eta);
        Ok(lhs.max_abs_diff(&rhs))
    }

    fn metric_matrix(&self) -> CsrMatrix {
        let signs = self.metric.clone().unwrap_or_else(|| vec![1.0; self.fibre_dim]);
        let diag: Vec<C64> = (0..self.total_dim())
            .map(|i| C64::new(signs[i % self.fibre_dim], 0.0))
            .collect();
        CsrMatrix::diagonal(&diag)
    }

    /// Block-diagonal sum acting on the concatenated fibres.
    pub fn block_diagonal(parts: &[Hamiltonian]) -> Result<Hamiltonian> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty block-diagonal composition".into()))?;
        let grid = first.grid.clone();
        let hbar = first.hbar;
        if parts.iter().any(|p| p.grid != grid || p.hbar != hbar) {
            return Err(Error::DimensionMismatch("blocks must share grid and hbar".into()));
        }
        let fibre: usize = parts.iter().map(|p| p.fibre_dim).sum();
        let hermiticity = if parts.iter().all(|p| p.hermiticity == Hermiticity::Hermitian) {
            Hermiticity::Hermitian
        } else {
            Hermiticity::General
        };
        let metric = if parts.iter().all(|p| p.metric.is_some()) {
            Some(parts.iter().flat_map(|p| p.metric.clone().unwrap()).collect())
        } else {
            None
        };
        let assemble = {
            let grid = grid.clone();
            move |ops: Vec<Arc<LatticeOperator>>| -> Result<LatticeOperator> {
                let k = ops.len();
                let blocks: Vec<Vec<Option<LatticeOperator>>> = (0..k)
                    .map(|i| (0..k).map(|j| (i == j).then(|| (*ops[i]).clone())).collect())
                    .collect();
                Ok(LatticeOperator::from_blocks(&grid, &blocks)?.with_hermiticity(hermiticity))
            }
        };
        let mut out = if parts.iter().all(Hamiltonian::is_constant) {
            let ops = parts.iter().map(|p| p.evaluate(0.0)).collect::<Result<Vec<_>>>()?;
            Hamiltonian::constant(assemble(ops)?, hbar)?
        } else {
            let parts = parts.to_vec();
            Hamiltonian::dynamic(grid, fibre, hbar, hermiticity, move |t| {
                let ops = parts.iter().map(|p| p.evaluate(t)).collect::<Result<Vec<_>>>()?;
                assemble(ops)
            })?
        };
        out.hermiticity = hermiticity;
        out.metric = metric;
        Ok(out)
    }
}

/// One coefficient operator `f_i(t)` of an [`EquationSpec`].
#[derive(Clone)]
pub enum Coefficient {
    Constant(LatticeOperator),
    TimeDependent(OperatorFn),
}

impl Coefficient {
    pub fn time_dependent(f: impl Fn(f64) -> Result<LatticeOperator> + Send + Sync + 'static) -> Self {
        Coefficient::TimeDependent(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> Result<LatticeOperator> {
        match self {
            Coefficient::Constant(op) => Ok(op.clone()),
            Coefficient::TimeDependent(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

/// `∂ⁿφ/∂tⁿ = Σ_i f_i(t) ∂ⁱφ/∂tⁱ` for a field with `component_dim`
/// components per site.
#[derive(Clone)]
pub struct EquationSpec {
    grid: Grid,
    component_dim: usize,
    hbar: f64,
    coefficients: Vec<Coefficient>,
    names: Vec<String>,
}

impl fmt::Debug for EquationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EquationSpec")
            .field("order", &self.order())
            .field("component_dim", &self.component_dim)
            .field("names", &self.names)
            .finish()
    }
}

impl EquationSpec {
    pub fn new(grid: Grid, component_dim: usize, hbar: f64, coefficients: Vec<Coefficient>) -> Result<Self> {
        check_hbar(hbar)?;
        if coefficients.is_empty() {
            return Err(Error::InvalidParameter("an equation needs order n >= 1".into()));
        }
        if component_dim == 0 {
            return Err(Error::InvalidParameter("component dimension must be at least 1".into()));
        }
        let spec = EquationSpec {
            names: (0..coefficients.len()).map(|i| format!("f{i}")).collect(),
            grid,
            component_dim,
            hbar,
            coefficients,
        };
        for (i, c) in spec.coefficients.iter().enumerate() {
            if let Coefficient::Constant(op) = c {
                spec.check_coefficient(i, op, 0.0)?;
            }
        }
        Ok(spec)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.order() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} coefficients",
                names.len(),
                self.order()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component_dim(&self) -> usize {
        self.component_dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.iter().all(Coefficient::is_constant)
    }

    fn check_coefficient(&self, i: usize, op: &LatticeOperator, t: f64) -> Result<()> {
        if op.grid() != &self.grid
            || op.fibre_in() != self.component_dim
            || op.fibre_out() != self.component_dim
        {
            return Err(Error::DimensionMismatch(format!(
                "coefficient f{i} acts {}->{} but the equation has {} components",
                op.fibre_in(),
                op.fibre_out(),
                self.component_dim
            )));
        }
        if op.matrix().triplets().any(|(_, _, v)| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient f{i} is not finite at t = {t}")));
        }
        Ok(())
    }

    /// `f_i(t)`, validated.
    pub fn coefficient(&self, i: usize, t: f64) -> Result<LatticeOperator> {
        let c = self
            .coefficients
            .get(i)
            .ok_or(Error::ComponentOutOfRange { index: i, order: self.order() })?;
        let op = c.at(t)?;
        self.check_coefficient(i, &op, t)?;
        Ok(op)
    }
}

/// The companion Hamiltonian at time `t`:
/// `iħ [[0, 1, 0, …], …, [0, …, 0, 1], [f₀, f₁, …, f_{n-1}]]`, or `iħ f₀`
/// when `n = 1`.
pub fn companion_hamiltonian(spec: &EquationSpec, t: f64) -> Result<LatticeOperator> {
    let ih = C64::new(0.0, spec.hbar);
    let n = spec.order();
    let fs = (0..n).map(|i| spec.coefficient(i, t)).collect::<Result<Vec<_>>>()?;
    if n == 1 {
        return Ok(fs[0].scale(ih));
    }
    let id = LatticeOperator::identity(&spec.grid, spec.component_dim);
    let mut blocks: Vec<Vec<Option<LatticeOperator>>> = vec![vec![None; n]; n];
    for (i, row) in blocks.iter_mut().enumerate().take(n - 1) {
        row[i + 1] = Some(id.clone());
    }
    for (j, f) in fs.into_iter().enumerate() {
        blocks[n - 1][j] = Some(f);
    }
    Ok(LatticeOperator::from_blocks(&spec.grid, &blocks)?.scale(ih))
}

/// The companion system as a [`Hamiltonian`]; constant when every
/// coefficient is.
pub fn companion_system(spec: &EquationSpec) -> Result<Hamiltonian> {
    let fibre = spec.order() * spec.component_dim;
    let label = format!("companion(n={})", spec.order());
    if spec.is_constant() {
        return Ok(Hamiltonian::constant(companion_hamiltonian(spec, 0.0)?, spec.hbar)?.with_label(label));
    }
    let s = spec.clone();
    Ok(Hamiltonian::dynamic(spec.grid.clone(), fibre, spec.hbar, Hermiticity::General, move |t| companion_hamiltonian(&s, t))?
        .with_label(label))
}

/// `ψ = (φ, ∂φ/∂t, …, ∂ⁿ⁻¹φ/∂tⁿ⁻¹)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionState {
    grid: Grid,
    component_dim: usize,
    blocks: Vec<Vec<C64>>,
    time: f64,
}

/// Stacks the time derivatives `0..n` of a field into a companion state.
pub fn companion_pack(grid: &Grid, component_dim: usize, derivatives: Vec<Vec<C64>>, time: f64) -> Result<CompanionState> {
    if derivatives.is_empty() {
        return Err(Error::InvalidParameter("at least one block is required".into()));
    }
    let len = grid.num_sites() * component_dim;
    for (i, d) in derivatives.iter().enumerate() {
        if d.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "block {i} has {} entries, expected {len}",
                d.len()
            )));
        }
    }
    Ok(CompanionState { grid: grid.clone(), component_dim, blocks: derivatives, time })
}

impl CompanionState {
    pub fn order(&self) -> usize {
        self.blocks.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// The `k`-th time derivative.
    pub fn unpack(&self, k: usize) -> Result<&[C64]> {
        self.blocks
            .get(k)
            .map(Vec::as_slice)
            .ok_or(Error::ComponentOutOfRange { index: k, order: self.order() })
    }

    /// Interleaves the blocks into one state with fibre `n × component_dim`.
    pub fn to_state(&self) -> StateVector {
        let (n, cd) = (self.order(), self.component_dim);
        StateVector::from_fn(&self.grid, n * cd, self.time, |site, a| self.blocks[a / cd][site * cd + a % cd])
    }

    pub fn from_state(state: &StateVector, order: usize) -> Result<Self> {
        if order == 0 || !state.fibre_dim().is_multiple_of(order) {
            return Err(Error::DimensionMismatch(format!(
                "fibre {} is not a multiple of order {order}",
                state.fibre_dim()
            )));
        }
        let cd = state.fibre_dim() / order;
        let f = state.fibre_dim();
        let sites = state.grid().num_sites();
        let blocks = (0..order)
            .map(|k| {
                (0..sites)
                    .flat_map(|s| (0..cd).map(move |a| (s, a)))
                    .map(|(s, a)| state.data()[s * f + k * cd + a])
                    .collect()
            })
            .collect();
        Ok(CompanionState { grid: state.grid().clone(), component_dim: cd, blocks, time: state.time() })
    }
}

/// `H̃ = A H A⁻¹ + iħ (∂A/∂t) A⁻¹`, the generator of `ψ̃ = Aψ`.
pub fn frame_change(h: &LatticeOperator, a: &FibreMap, da: &FibreMap, hbar: f64, t: f64) -> Result<LatticeOperator> {
    frame_change_bounded(h, a, da, hbar, t, DEFAULT_CONDITION_BOUND)
}

pub fn frame_change_bounded(
    h: &LatticeOperator,
    a: &FibreMap,
    da: &FibreMap,
    hbar: f64,
    t: f64,
    bound: f64,
) -> Result<LatticeOperator> {
    let ainv = a.inverse(t, bound)?;
    frame_change_with_inverse(h, a, da, &ainv, hbar)
}

fn frame_change_with_inverse(
    h: &LatticeOperator,
    a: &FibreMap,
    da: &FibreMap,
    ainv: &FibreMap,
    hbar: f64,
) -> Result<LatticeOperator> {
    check_hbar(hbar)?;
    let (g, f) = (h.grid(), h.fibre_dim());
    if matches!(a, FibreMap::Identity) && *da == FibreMap::zero() {
        return Ok(h.clone());
    }
    let a_op = a.to_operator(g, f)?;
    let ainv_op = ainv.to_operator(g, f)?;
    let conj = a_op.compose(h)?.compose(&ainv_op)?;
    let drift = da.to_operator(g, f)?.compose(&ainv_op)?.scale(C64::new(0.0, hbar));
    conj.add(&drift)
}

/// The Hamiltonian of `ψ̃(t) = A(t)ψ(t)` for a frame family `A`.
pub fn frame_changed(h: &Hamiltonian, frames: &FrameFamily) -> Result<Hamiltonian> {
    let (h0, fr) = (h.clone(), frames.clone());
    let hbar = h.hbar();
    Hamiltonian::dynamic(h.grid().clone(), h.fibre_dim(), hbar, Hermiticity::General, move |t| {
        let op = h0.evaluate(t)?;
        let a = fr.at(t)?;
        let da = fr.derivative(t)?;
        let ainv = fr.inverse_at(t)?;
        frame_change_with_inverse(&op, &a, &da, &ainv, hbar)
    })
    .map(|x| x.with_label(format!("{} (frame changed)", h.label())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FrameScope;
    use crate::linalg::{self, Eigen};
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar_op(v: C64) -> LatticeOperator {
        LatticeOperator::from_dense(&DMatrix::from_element(1, 1, v), Hermiticity::General)
    }

    #[test]
    fn first_order_case_is_ih_f0() {
        let w = 1.7;
        let spec = EquationSpec::new(Grid::single_site(), 1, 1.0, vec![Coefficient::Constant(scalar_op(c(0.0, -w)))]).unwrap();
        let h = companion_hamiltonian(&spec, 0.0).unwrap();
        assert_eq!(h.to_dense()[(0, 0)], c(w, 0.0));
    }

    #[test]
    fn harmonic_companion_spectrum() {
        let (w, hbar) = (2.5, 0.7);
        let spec = EquationSpec::new(
            Grid::single_site(),
            1,
            hbar,
            vec![Coefficient::Constant(scalar_op(c(-w * w, 0.0))), Coefficient::Constant(scalar_op(c(0.0, 0.0)))],
        )
        .unwrap();
        let h = companion_hamiltonian(&spec, 0.0).unwrap().to_dense();
        let expect = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, hbar), c(0.0, -hbar * w * w), c(0.0, 0.0)]);
        assert_eq!(h, expect);
        let ev = linalg::sorted_eigenvalues(&h).unwrap();
        assert!((ev[0] - c(-hbar * w, 0.0)).norm() < 1e-13);
        assert!((ev[1] - c(hbar * w, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let phi: Vec<C64> = (0..8).map(|i| c(i as f64, -1.0)).collect();
        let dphi: Vec<C64> = (0..8).map(|i| c(0.5, i as f64)).collect();
        let st = companion_pack(&g, 2, vec![phi.clone(), dphi.clone()], 0.0).unwrap();
        assert_eq!(st.unpack(0).unwrap(), phi.as_slice());
        assert_eq!(st.unpack(1).unwrap(), dphi.as_slice());
        assert!(matches!(st.unpack(2), Err(Error::ComponentOutOfRange { index: 2, order: 2 })));
        let back = CompanionState::from_state(&st.to_state(), 2).unwrap();
        assert_eq!(back, st);
        assert!(companion_pack(&g, 2, vec![phi, vec![c(0.0, 0.0); 3]], 0.0).is_err());
    }

    #[test]
    fn identity_frame_change_is_exact() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let h = LatticeOperator::from_dense(&linalg::random_hermitian(4, &mut rng), Hermiticity::Hermitian);
        let out = frame_change(&h, &FibreMap::Identity, &FibreMap::zero(), 1.0, 0.0).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn phase_frame_shifts_energy() {
        // A = e^{iωt}: H̃ = H - ħω
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(2);
        let (w, hbar, t) = (0.9, 1.3, 0.4);
        let hm = linalg::random_hermitian(3, &mut rng);
        let h = LatticeOperator::from_dense(&hm, Hermiticity::Hermitian);
        let fr = FrameFamily::scalar_phase(0.0, w);
        let out = frame_change(&h, &fr.at(t).unwrap(), &fr.derivative(t).unwrap(), hbar, t).unwrap();
        let expect = &hm - DMatrix::<C64>::identity(3, 3).map(|v| v * (hbar * w));
        assert!(linalg::max_abs_diff(&out.to_dense(), &expect) < 1e-14);
    }

    #[test]
    fn frame_change_involution() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let hm = linalg::random_hermitian(5, &mut rng);
        let h = LatticeOperator::from_dense(&hm, Hermiticity::Hermitian);
        let fr = FrameFamily::smooth_random(5, FrameScope::Dense, 4, 0.6, 2, 1.0).unwrap();
        let t = 0.3;
        let once = frame_change(&h, &fr.at(t).unwrap(), &fr.derivative(t).unwrap(), 1.0, t).unwrap();
        let back = frame_change(&once, &fr.inverse_at(t).unwrap(), &fr.inverse_derivative(t).unwrap(), 1.0, t).unwrap();
        assert!(linalg::max_abs_diff(&back.to_dense(), &hm) < 1e-12);
    }

    #[test]
    fn metric_and_block_diagonal() {
        let hm = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-2.0, 0.0)]);
        let h = Hamiltonian::constant(LatticeOperator::from_dense(&hm, Hermiticity::General), 1.0)
            .unwrap()
            .with_metric(vec![1.0, -1.0])
            .unwrap();
        assert!(h.pseudo_hermiticity_defect(0.0).unwrap() < 1e-15);
        let both = Hamiltonian::block_diagonal(&[h.clone(), h]).unwrap();
        assert_eq!(both.fibre_dim(), 4);
        assert_eq!(both.metric().unwrap(), &[1.0, -1.0, 1.0, -1.0]);
        let e = Eigen::new(&both.evaluate(0.0).unwrap().to_dense()).unwrap();
        assert!(e.values.iter().all(|v| (v.re.abs() - 3f64.sqrt()).abs() < 1e-12));
    }
}
