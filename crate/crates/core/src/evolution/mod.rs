//! Time stepping for `iħ ∂ψ/∂t = H(t) ψ`, trajectories, composable
//! propagators and a posteriori residual checks.

pub mod io;
mod propagator;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use propagator::{propagator_matrix, propagator_matrix_capped, Propagator, DEFAULT_DIMENSION_CAP};

use crate::error::{Error, Result};
use crate::lattice::{fourier_forward, fourier_inverse, Grid, LatticeOperator};
use crate::linalg::{self, Eigen};
use crate::reduction::Hamiltonian;
use crate::solver::LinearSolver;
use crate::sparse::CsrMatrix;
use crate::state::StateVector;
use crate::C64;

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Cayley form `(1 + iδH/2ħ)ψ' = (1 - iδH/2ħ)ψ` with `H` at the midpoint.
    #[default]
    CrankNicolson,
    /// `exp(-iδH_k/ħ)` per Fourier mode; translation-invariant `H` only.
    ExactPerMode,
    /// Second-order explicit midpoint rule, for diagnostics.
    ExplicitMidpoint,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::CrankNicolson => "crank_nicolson",
            Method::ExactPerMode => "exact_per_mode",
            Method::ExplicitMidpoint => "explicit_midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Method::CrankNicolson, Method::ExactPerMode, Method::ExplicitMidpoint]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Clone)]
enum Prepared {
    Identity,
    Cn { solver: Arc<LinearSolver>, rhs: Arc<CsrMatrix> },
    Modes { grid: Grid, fibre: usize, props: Arc<Vec<DMatrix<C64>>> },
    Midpoint { h0: Arc<LatticeOperator>, hm: Arc<LatticeOperator> },
}

/// Repeated stepping with one Hamiltonian. For constant `H` the
/// factorization (or the per-mode exponentials) is reused while `dt` does
/// not change.
#[derive(Clone)]
pub struct Stepper {
    h: Hamiltonian,
    method: Method,
    cache: Option<(f64, Prepared)>,
}

impl Stepper {
    pub fn new(h: &Hamiltonian, method: Method) -> Self {
        Stepper { h: h.clone(), method, cache: None }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    pub fn method(&self) -> Method {
        self.method
    }

    fn prepare(&mut self, t: f64, dt: f64) -> Result<Prepared> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let constant = self.h.is_constant();
        if constant && self.method != Method::ExplicitMidpoint {
            if let Some((cdt, p)) = &self.cache {
                if *cdt == dt {
                    return Ok(p.clone());
                }
            }
        }
        let hbar = self.h.hbar();
        let mid = t + 0.5 * dt;
        let prepared = match self.method {
            Method::CrankNicolson => {
                let hm = self.h.evaluate(mid)?;
                if hm.is_zero() {
                    Prepared::Identity
                } else {
                    let n = hm.size();
                    let id = CsrMatrix::identity(n);
                    let a = C64::new(0.0, 0.5 * dt / hbar);
                    let lhs = id.lincomb(C64::new(1.0, 0.0), hm.matrix(), a);
                    let rhs = id.lincomb(C64::new(1.0, 0.0), hm.matrix(), -a);
                    let solver = LinearSolver::factorize(&lhs).map_err(|e| match e {
                        Error::SingularSystem(msg) => {
                            Error::SingularSystem(format!("Crank-Nicolson at t = {t}, dt = {dt}: {msg}"))
                        }
                        other => other,
                    })?;
                    Prepared::Cn { solver: Arc::new(solver), rhs: Arc::new(rhs) }
                }
            }
            Method::ExactPerMode => {
                let hm = self.h.evaluate(mid)?;
                if hm.is_zero() {
                    Prepared::Identity
                } else {
                    if !hm.is_translation_invariant() {
                        return Err(Error::NotTranslationInvariant(
                            "exact_per_mode needs a translation-invariant Hamiltonian".into(),
                        ));
                    }
                    let grid = hm.grid().clone();
                    let props = mode_propagators(&hm, dt, hbar)?;
                    Prepared::Modes { grid, fibre: hm.fibre_dim(), props: Arc::new(props) }
                }
            }
            Method::ExplicitMidpoint => Prepared::Midpoint { h0: self.h.evaluate(t)?, hm: self.h.evaluate(mid)? },
        };
        if constant {
            self.cache = Some((dt, prepared.clone()));
        }
        Ok(prepared)
    }

    fn apply(prepared: &Prepared, psi: &[C64], dt: f64, hbar: f64) -> Result<Vec<C64>> {
        match prepared {
            Prepared::Identity => Ok(psi.to_vec()),
            Prepared::Cn { solver, rhs } => solver.solve(&rhs.matvec(psi)),
            Prepared::Modes { grid, fibre, props } => {
                let f = *fibre;
                let mut coeffs = fourier_forward(grid, f, psi);
                for (m, chunk) in coeffs.chunks_mut(f).enumerate() {
                    let out = linalg::mat_vec(&props[m], chunk);
                    chunk.copy_from_slice(&out);
                }
                Ok(fourier_inverse(grid, f, &coeffs))
            }
            Prepared::Midpoint { h0, hm } => {
                let k = C64::new(0.0, -1.0 / hbar);
                let k1 = h0.apply(psi)?;
                let half: Vec<C64> = psi.iter().zip(&k1).map(|(p, v)| p + k * v * (0.5 * dt)).collect();
                let k2 = hm.apply(&half)?;
                Ok(psi.iter().zip(&k2).map(|(p, v)| p + k * v * dt).collect())
            }
        }
    }

    /// Advances raw state data from `t` to `t + dt`.
    pub fn advance(&mut self, psi: &[C64], t: f64, dt: f64) -> Result<Vec<C64>> {
        if psi.len() != self.h.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, Hamiltonian acts on {}",
                psi.len(),
                self.h.total_dim()
            )));
        }
        let p = self.prepare(t, dt)?;
        Self::apply(&p, psi, dt, self.h.hbar())
    }

    /// Advances several independent states with one preparation, in
    /// parallel.
    pub fn advance_many(&mut self, psis: &mut [Vec<C64>], t: f64, dt: f64) -> Result<()> {
        let n = self.h.total_dim();
        if psis.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch("state length does not match the Hamiltonian".into()));
        }
        let p = self.prepare(t, dt)?;
        let hbar = self.h.hbar();
        psis.par_iter_mut().try_for_each(|psi| {
            *psi = Self::apply(&p, psi, dt, hbar)?;
            Ok(())
        })
    }

    pub fn step(&mut self, psi: &StateVector, t: f64, dt: f64) -> Result<StateVector> {
        let data = self.advance(psi.data(), t, dt)?;
        psi.with_data(data, t + dt)
    }
}

/// `exp(-i dt H_k / ħ)` for every mode, in site order of the mode index.
fn mode_propagators(h: &LatticeOperator, dt: f64, hbar: f64) -> Result<Vec<DMatrix<C64>>> {
    let grid = h.grid();
    grid.modes()
        .par_iter()
        .map(|&m| {
            let hk = h.mode_matrix_unchecked(grid.wavevector(m));
            mode_exponential(&hk, dt, hbar)
        })
        .collect()
}

/// `exp(-i dt H / ħ)` through the eigendecomposition, with a Padé
/// fallback for defective matrices.
pub fn mode_exponential(hk: &DMatrix<C64>, dt: f64, hbar: f64) -> Result<DMatrix<C64>> {
    let k = C64::new(0.0, -dt / hbar);
    let e = Eigen::new(hk)?;
    if e.defective {
        Ok(linalg::expm(&hk.map(|v| v * k)))
    } else {
        e.apply_function(|l| (l * k).exp())
    }
}

/// One step of `method` from `t` to `t + dt`.
pub fn step(h: &Hamiltonian, psi: &StateVector, t: f64, dt: f64, method: Method) -> Result<StateVector> {
    Stepper::new(h, method).step(psi, t, dt)
}

/// A sampled solution with per-sample diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub method: Method,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// `‖ψ(t)‖` per sample.
    pub norms: Vec<f64>,
    /// `⟨ψ|η|ψ⟩` per sample when the Hamiltonian declares a metric.
    pub forms: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectories are never empty")
    }

    /// `max_t |‖ψ(t)‖ - ‖ψ(t₀)‖|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }

    /// `max_t |⟨ψ|η|ψ⟩(t) - ⟨ψ|η|ψ⟩(t₀)| / |⟨ψ|η|ψ⟩(t₀)|`.
    pub fn form_drift(&self) -> Option<f64> {
        self.forms.as_ref().map(|f| {
            let f0 = f[0];
            f.iter().map(|v| (v - f0).abs()).fold(0.0, f64::max) / f0.abs()
        })
    }
}

fn check_span(t0: f64, t1: f64, n_steps: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    Ok((t1 - t0) / n_steps as f64)
}

/// Uniform stepping from `t0` to `t1`, recording every state.
pub fn propagate(
    h: &Hamiltonian,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    n_steps: usize,
    method: Method,
) -> Result<Trajectory> {
    let dt = check_span(t0, t1, n_steps)?;
    let metric = h.metric().map(<[f64]>::to_vec);
    let mut psi = psi0.with_data(psi0.data().to_vec(), t0)?;
    let mut tr = Trajectory {
        method,
        times: vec![t0],
        norms: vec![psi.norm()],
        forms: metric.as_ref().map(|m| psi.indefinite_form(m)).transpose()?.map(|f| vec![f]),
        states: vec![psi.clone()],
    };
    let mut stepper = Stepper::new(h, method);
    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        let t_next = if i + 1 == n_steps { t1 } else { t0 + (i + 1) as f64 * dt };
        let data = stepper.advance(psi.data(), t, dt)?;
        psi = psi.with_data(data, t_next)?;
        tr.times.push(t_next);
        tr.norms.push(psi.norm());
        if let (Some(forms), Some(m)) = (tr.forms.as_mut(), metric.as_ref()) {
            forms.push(psi.indefinite_form(m)?);
        }
        tr.states.push(psi.clone());
    }
    Ok(tr)
}

/// Uniform stepping that hands every state (including the initial one) to
/// `observe` instead of storing it; returns the final state.
pub fn propagate_observed(
    h: &Hamiltonian,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    n_steps: usize,
    method: Method,
    mut observe: impl FnMut(usize, &StateVector) -> Result<()>,
) -> Result<StateVector> {
    let dt = check_span(t0, t1, n_steps)?;
    let mut psi = psi0.with_data(psi0.data().to_vec(), t0)?;
    observe(0, &psi)?;
    let mut stepper = Stepper::new(h, method);
    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        let t_next = if i + 1 == n_steps { t1 } else { t0 + (i + 1) as f64 * dt };
        let data = stepper.advance(psi.data(), t, dt)?;
        psi = psi.with_data(data, t_next)?;
        observe(i + 1, &psi)?;
    }
    Ok(psi)
}

/// `max_i ‖iħ (ψ_{i+1} - ψ_{i-1}) / (t_{i+1} - t_{i-1}) - H(t_i) ψ_i‖`
/// over interior samples, each divided by the largest of the three norms
/// involved.
pub fn schrodinger_residual(h: &Hamiltonian, tr: &Trajectory) -> Result<f64> {
    if tr.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: tr.len() });
    }
    let ih = C64::new(0.0, h.hbar());
    let mut worst: f64 = 0.0;
    for i in 1..tr.len() - 1 {
        let (a, b, c) = (&tr.states[i - 1], &tr.states[i], &tr.states[i + 1]);
        let dt = tr.times[i + 1] - tr.times[i - 1];
        let hpsi = h.evaluate(tr.times[i])?.apply(b.data())?;
        let r: Vec<C64> = c
            .data()
            .iter()
            .zip(a.data())
            .zip(&hpsi)
            .map(|((x, y), hp)| ih * (x - y) / dt - hp)
            .collect();
        let scale = a.norm().max(b.norm()).max(c.norm());
        if scale > 0.0 {
            worst = worst.max(linalg::vec_norm(&r) / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Hermiticity;
    use crate::reduction::{companion_system, Coefficient, EquationSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn harmonic(w: f64) -> Hamiltonian {
        let op = |v: C64| LatticeOperator::from_dense(&DMatrix::from_element(1, 1, v), Hermiticity::General);
        let spec = EquationSpec::new(
            Grid::single_site(),
            1,
            1.0,
            vec![Coefficient::Constant(op(c(-w * w, 0.0))), Coefficient::Constant(op(c(0.0, 0.0)))],
        )
        .unwrap();
        companion_system(&spec).unwrap()
    }

    fn single(v: Vec<C64>) -> StateVector {
        let n = v.len();
        StateVector::new(Grid::single_site(), n, v, 0.0).unwrap()
    }

    // closed-form companion solution with φ(0) = 1, φ'(0) = 0
    fn exact_harmonic(w: f64, t: f64) -> [C64; 2] {
        [c((w * t).cos(), 0.0), c(-w * (w * t).sin(), 0.0)]
    }

    #[test]
    fn zero_hamiltonian_is_bitwise_identity() {
        let h = Hamiltonian::constant(LatticeOperator::zero(&Grid::single_site(), 3), 1.0).unwrap();
        let psi = single(vec![c(0.1, 0.2), c(-3.0, 1e-300), c(7.0, 0.0)]);
        for m in [Method::CrankNicolson, Method::ExactPerMode, Method::ExplicitMidpoint] {
            assert_eq!(step(&h, &psi, 0.0, 0.1, m).unwrap().data(), psi.data());
        }
    }

    #[test]
    fn cn_local_error_is_third_order() {
        let w = 1.3;
        let h = harmonic(w);
        let psi = single(exact_harmonic(w, 0.0).to_vec());
        let err = |dt: f64| {
            let out = step(&h, &psi, 0.0, dt, Method::CrankNicolson).unwrap();
            let ex = exact_harmonic(w, dt);
            linalg::vec_norm(&linalg::sub(out.data(), &ex))
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 8.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn cn_preserves_norm_for_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hm = linalg::random_hermitian(8, &mut rng);
        let h = Hamiltonian::constant(LatticeOperator::from_dense(&hm, Hermiticity::Hermitian), 1.0).unwrap();
        let psi = single(linalg::random_vector(8, &mut rng));
        let out = step(&h, &psi, 0.0, 0.3, Method::CrankNicolson).unwrap();
        assert!((out.norm() - psi.norm()).abs() <= 1e-14);
    }

    #[test]
    fn one_step_trajectory_equals_step() {
        let h = harmonic(2.0);
        let psi = single(vec![c(1.0, 0.0), c(0.5, 0.0)]);
        let tr = propagate(&h, &psi, 0.0, 0.1, 1, Method::CrankNicolson).unwrap();
        assert_eq!(tr.last().data(), step(&h, &psi, 0.0, 0.1, Method::CrankNicolson).unwrap().data());
        assert_eq!(tr.times, vec![0.0, 0.1]);
    }

    #[test]
    fn harmonic_period_error_bound() {
        let w = 2.0;
        let h = harmonic(w);
        let period = 2.0 * std::f64::consts::PI / w;
        let n = 200;
        let dt = period / n as f64;
        let psi = single(exact_harmonic(w, 0.0).to_vec());
        let tr = propagate(&h, &psi, 0.0, period, n, Method::CrankNicolson).unwrap();
        let rel = tr.last().distance(&psi).unwrap() / psi.norm();
        assert!(rel <= (w * dt).powi(2) * std::f64::consts::PI, "{rel}");
    }

    #[test]
    fn exact_per_mode_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::new(1, 6, 2.0).unwrap();
        let d = crate::lattice::central_difference(&g, 0).unwrap();
        let hm = linalg::random_hermitian(2, &mut rng);
        let op = d
            .kron_fibre(&hm.map(|v| v * c(0.0, 1.0)))
            .unwrap()
            .add(&LatticeOperator::local(&g, &hm, Hermiticity::Hermitian))
            .unwrap();
        let h = Hamiltonian::constant(op.clone(), 0.8).unwrap();
        let psi = StateVector::new(g.clone(), 2, linalg::random_vector(12, &mut rng), 0.0).unwrap();
        let out = step(&h, &psi, 0.0, 0.37, Method::ExactPerMode).unwrap();
        let u = linalg::expm(&op.to_dense().map(|v| v * c(0.0, -0.37 / 0.8)));
        let ex = linalg::mat_vec(&u, psi.data());
        assert!(linalg::vec_norm(&linalg::sub(out.data(), &ex)) < 1e-12);
    }

    #[test]
    fn exact_per_mode_rejects_site_dependent_operators() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let v: Vec<C64> = (0..4).map(|i| c(i as f64, 0.0)).collect();
        let h = Hamiltonian::constant(LatticeOperator::multiplication(&g, &v).unwrap(), 1.0).unwrap();
        let psi = StateVector::zeros(&g, 1, 0.0);
        assert!(matches!(step(&h, &psi, 0.0, 0.1, Method::ExactPerMode), Err(Error::NotTranslationInvariant(_))));
    }

    #[test]
    fn singular_cn_system_is_reported() {
        // 1 + i dt H / 2ħ = 0 for H = 2iħ/dt
        let dt = 0.5;
        let hm = DMatrix::from_element(1, 1, c(0.0, 2.0 / dt));
        let h = Hamiltonian::constant(LatticeOperator::from_dense(&hm, Hermiticity::General), 1.0).unwrap();
        let psi = single(vec![c(1.0, 0.0)]);
        assert!(matches!(step(&h, &psi, 0.0, dt, Method::CrankNicolson), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn residual_detects_corruption_and_scales_with_dt() {
        let w = 1.0;
        let h = harmonic(w);
        let psi = single(exact_harmonic(w, 0.0).to_vec());
        let run = |n: usize| propagate(&h, &psi, 0.0, 1.0, n, Method::ExactPerMode).unwrap();
        let (r1, r2) = (schrodinger_residual(&h, &run(50)).unwrap(), schrodinger_residual(&h, &run(100)).unwrap());
        assert!((r1 / r2 - 4.0).abs() < 0.05, "{}", r1 / r2);
        let mut bad = run(1000);
        let z = bad.states[10].with_data(vec![c(0.0, 0.0); 2], bad.times[10]).unwrap();
        bad.states[10] = z;
        assert!(schrodinger_residual(&h, &bad).unwrap() > 1e2);
        let short = propagate(&h, &psi, 0.0, 1.0, 1, Method::CrankNicolson).unwrap();
        assert!(matches!(schrodinger_residual(&h, &short), Err(Error::TooFewSamples { .. })));
        let zero = Hamiltonian::constant(LatticeOperator::zero(&Grid::single_site(), 2), 1.0).unwrap();
        assert_eq!(schrodinger_residual(&zero, &propagate(&zero, &psi, 0.0, 1.0, 4, Method::CrankNicolson).unwrap()).unwrap(), 0.0);
    }
}
