use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Method, Stepper};
use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::linalg;
use crate::reduction::Hamiltonian;
use crate::state::StateVector;
use crate::C64;

/// Largest total dimension for which dense propagators are assembled.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

#[derive(Clone)]
enum Action {
    Steps { h: Hamiltonian, method: Method, n_steps: usize },
    Matrix(Arc<DMatrix<C64>>),
}

#[derive(Clone)]
struct Segment {
    start: f64,
    end: f64,
    action: Action,
}

impl Segment {
    fn dt(&self) -> Option<f64> {
        match &self.action {
            Action::Steps { n_steps, .. } => Some((self.end - self.start) / *n_steps as f64),
            Action::Matrix(_) => None,
        }
    }

    fn apply_many(&self, cols: &mut [Vec<C64>]) -> Result<()> {
        match &self.action {
            Action::Steps { h, method, n_steps } => {
                let dt = (self.end - self.start) / *n_steps as f64;
                let mut stepper = Stepper::new(h, *method);
                for i in 0..*n_steps {
                    stepper.advance_many(cols, self.start + i as f64 * dt, dt)?;
                }
                Ok(())
            }
            Action::Matrix(u) => {
                for c in cols.iter_mut() {
                    *c = linalg::mat_vec(u, c);
                }
                Ok(())
            }
        }
    }

    /// Index of `t` on this segment's step grid.
    fn grid_index(&self, t: f64) -> Result<usize> {
        if t == self.start {
            return Ok(0);
        }
        let (n, dt) = match &self.action {
            Action::Steps { n_steps, .. } => (*n_steps, self.dt().unwrap_or(0.0)),
            Action::Matrix(_) => (1, self.end - self.start),
        };
        if t == self.end {
            return Ok(n);
        }
        let x = (t - self.start) / dt;
        let i = x.round();
        if (x - i).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not on the step grid of segment [{}, {}]",
                self.start, self.end
            )));
        }
        Ok(i as usize)
    }

    fn slice(&self, i: usize, j: usize) -> Segment {
        match &self.action {
            Action::Steps { h, method, n_steps } => {
                let dt = (self.end - self.start) / *n_steps as f64;
                let at = |k: usize| if k == *n_steps { self.end } else { self.start + k as f64 * dt };
                Segment {
                    start: at(i),
                    end: at(j),
                    action: Action::Steps { h: h.clone(), method: *method, n_steps: j - i },
                }
            }
            Action::Matrix(_) => self.clone(),
        }
    }
}

/// Discrete evolution operator `U(t, s)` as an ordered list of contiguous
/// segments, each a run of uniform steps or an explicit matrix.
#[derive(Clone)]
pub struct Propagator {
    grid: Grid,
    fibre_dim: usize,
    hbar: f64,
    start: f64,
    end: f64,
    segments: Vec<Segment>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("segments", &self.segments.len())
            .field("dim", &self.dim())
            .finish()
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl Propagator {
    /// `U(t₀, t₀)`.
    pub fn identity(grid: &Grid, fibre_dim: usize, hbar: f64, t0: f64) -> Self {
        Propagator { grid: grid.clone(), fibre_dim, hbar, start: t0, end: t0, segments: Vec::new() }
    }

    /// `n_steps` uniform steps of `method` from `t0` to `t1`.
    pub fn uniform(h: &Hamiltonian, t0: f64, t1: f64, n_steps: usize, method: Method) -> Result<Self> {
        super::check_span(t0, t1, n_steps)?;
        Ok(Propagator {
            grid: h.grid().clone(),
            fibre_dim: h.fibre_dim(),
            hbar: h.hbar(),
            start: t0,
            end: t1,
            segments: vec![Segment { start: t0, end: t1, action: Action::Steps { h: h.clone(), method, n_steps } }],
        })
    }

    /// A single explicit segment `U(t1, t0) = u`.
    pub fn from_matrix(grid: &Grid, fibre_dim: usize, hbar: f64, t0: f64, t1: f64, u: DMatrix<C64>) -> Result<Self> {
        let n = grid.num_sites() * fibre_dim;
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::DimensionMismatch(format!("propagator matrix must be {n}x{n}")));
        }
        if !(t1 >= t0) {
            return Err(Error::InvalidParameter(format!("need t1 >= t0, got [{t0}, {t1}]")));
        }
        Ok(Propagator {
            grid: grid.clone(),
            fibre_dim,
            hbar,
            start: t0,
            end: t1,
            segments: vec![Segment { start: t0, end: t1, action: Action::Matrix(Arc::new(u)) }],
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn dim(&self) -> usize {
        self.grid.num_sites() * self.fibre_dim
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// `next ∘ self`; `next` must start where `self` ends.
    pub fn then(&self, next: &Propagator) -> Result<Propagator> {
        if next.dim() != self.dim() || next.fibre_dim != self.fibre_dim {
            return Err(Error::DimensionMismatch("propagators act on different spaces".into()));
        }
        if !same_time(self.end, next.start) {
            return Err(Error::InvalidParameter(format!(
                "segments are not contiguous: {} then {}",
                self.end, next.start
            )));
        }
        let mut segments = self.segments.clone();
        segments.extend(next.segments.iter().cloned());
        Ok(Propagator { segments, end: next.end, ..self.clone() })
    }

    /// Applies the segments in order to several raw states.
    pub fn apply_many(&self, cols: &mut [Vec<C64>]) -> Result<()> {
        self.segments.iter().try_for_each(|s| s.apply_many(cols))
    }

    /// `U(end, start) ψ`, stamped with the end time.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.len() != self.dim() || psi.fibre_dim() != self.fibre_dim {
            return Err(Error::DimensionMismatch("state does not match the propagator".into()));
        }
        let mut cols = vec![psi.data().to_vec()];
        self.apply_many(&mut cols)?;
        psi.with_data(cols.pop().unwrap_or_default(), self.end)
    }

    /// Dense matrix of the whole propagator, assembled column by column.
    pub fn matrix(&self) -> Result<DMatrix<C64>> {
        self.matrix_capped(DEFAULT_DIMENSION_CAP)
    }

    pub fn matrix_capped(&self, cap: usize) -> Result<DMatrix<C64>> {
        let n = self.dim();
        if n > cap {
            return Err(Error::DimensionCap { dim: n, cap });
        }
        let mut cols: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[j] = C64::new(1.0, 0.0);
                e
            })
            .collect();
        self.apply_many(&mut cols)?;
        Ok(DMatrix::from_fn(n, n, |r, c| cols[c][r]))
    }

    fn check_inside(&self, t: f64) -> Result<()> {
        if t < self.start && !same_time(t, self.start) || t > self.end && !same_time(t, self.end) {
            return Err(Error::OutsideSpan { time: t, start: self.start, end: self.end });
        }
        Ok(())
    }

    fn locate(&self, t: f64) -> Result<(usize, usize)> {
        for (k, s) in self.segments.iter().enumerate() {
            if same_time(t, s.start) {
                return Ok((k, 0));
            }
            if t < s.end && !same_time(t, s.end) {
                return Ok((k, s.grid_index(t)?));
            }
            if same_time(t, s.end) && k + 1 == self.segments.len() {
                return Ok((k, s.grid_index(s.end)?));
            }
        }
        Ok((self.segments.len(), 0))
    }

    /// `U(t, s)` for `start ≤ s ≤ t ≤ end`, with `s` and `t` on the step
    /// grid. Reuses the same steps, so composing pieces reproduces the whole.
    pub fn between(&self, t: f64, s: f64) -> Result<Propagator> {
        self.check_inside(t)?;
        self.check_inside(s)?;
        if t < s {
            return Err(Error::InvalidParameter(format!(
                "between needs t >= s (got t = {t}, s = {s}); use matrix_between for backward maps"
            )));
        }
        let mut out = Propagator::identity(&self.grid, self.fibre_dim, self.hbar, s);
        if same_time(t, s) {
            return Ok(out);
        }
        let (ks, is) = self.locate(s)?;
        let (kt, it) = self.locate(t)?;
        for k in ks..=kt.min(self.segments.len().saturating_sub(1)) {
            let seg = &self.segments[k];
            let i = if k == ks { is } else { 0 };
            let j = if k == kt { it } else { seg.grid_index(seg.end)? };
            if j > i {
                if let Action::Matrix(_) = seg.action {
                    if i != 0 || j != 1 {
                        return Err(Error::InvalidParameter("cannot split an explicit matrix segment".into()));
                    }
                }
                out.segments.push(seg.slice(i, j));
            }
        }
        out.end = t;
        Ok(out)
    }

    /// Dense `U(t, s)` for any `s, t` in the span; backward maps are the
    /// inverse of the forward ones.
    pub fn matrix_between(&self, t: f64, s: f64) -> Result<DMatrix<C64>> {
        if t >= s {
            self.between(t, s)?.matrix()
        } else {
            linalg::inverse(&self.between(s, t)?.matrix()?)
        }
    }
}

/// Dense `U(t, s)` from `n_steps` Crank-Nicolson steps, with the default cap.
pub fn propagator_matrix(h: &Hamiltonian, t: f64, s: f64, n_steps: usize) -> Result<DMatrix<C64>> {
    propagator_matrix_capped(h, t, s, n_steps, DEFAULT_DIMENSION_CAP)
}

pub fn propagator_matrix_capped(h: &Hamiltonian, t: f64, s: f64, n_steps: usize, cap: usize) -> Result<DMatrix<C64>> {
    let n = h.total_dim();
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    if t == s {
        return Ok(DMatrix::identity(n, n));
    }
    if t > s {
        Propagator::uniform(h, s, t, n_steps, Method::CrankNicolson)?.matrix_capped(cap)
    } else {
        linalg::inverse(&Propagator::uniform(h, t, s, n_steps, Method::CrankNicolson)?.matrix_capped(cap)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Hermiticity, LatticeOperator};
    use crate::reduction::{companion_system, Coefficient, EquationSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_h(seed: u64) -> Hamiltonian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = linalg::random_hermitian(8, &mut rng);
        Hamiltonian::constant(LatticeOperator::from_dense(&m, Hermiticity::Hermitian), 1.0).unwrap()
    }

    #[test]
    fn equal_times_give_exact_identity() {
        let h = random_h(1);
        let u = propagator_matrix(&h, 0.3, 0.3, 10).unwrap();
        assert_eq!(u, DMatrix::identity(8, 8));
        let p = Propagator::identity(h.grid(), 8, 1.0, 0.3);
        assert_eq!(p.matrix().unwrap(), DMatrix::identity(8, 8));
    }

    #[test]
    fn composition_over_commensurate_grids() {
        let h = random_h(2);
        let (t1, t2, t3) = (0.0, 0.4, 1.0);
        let dt = 0.01;
        let u31 = propagator_matrix(&h, t3, t1, 100).unwrap();
        let u32 = propagator_matrix(&h, t3, t2, 60).unwrap();
        let u21 = propagator_matrix(&h, t2, t1, 40).unwrap();
        assert!(linalg::max_abs_diff(&u31, &(&u32 * &u21)) <= 1e-10);
        let whole = Propagator::uniform(&h, t1, t3, ((t3 - t1) / dt) as usize, Method::CrankNicolson).unwrap();
        let a = whole.between(t2, t1).unwrap();
        let b = whole.between(t3, t2).unwrap();
        let joined = a.then(&b).unwrap();
        assert!(linalg::max_abs_diff(&joined.matrix().unwrap(), &whole.matrix().unwrap()) <= 1e-10);
        let back = whole.matrix_between(t1, t3).unwrap();
        assert!(linalg::max_abs_diff(&(&back * &u31), &DMatrix::identity(8, 8)) <= 1e-10);
    }

    #[test]
    fn harmonic_closed_form() {
        let w = 1.0;
        let op = |v: f64| {
            LatticeOperator::from_dense(&DMatrix::from_element(1, 1, C64::new(v, 0.0)), Hermiticity::General)
        };
        let spec = EquationSpec::new(
            Grid::single_site(),
            1,
            1.0,
            vec![Coefficient::Constant(op(-w * w)), Coefficient::Constant(op(0.0))],
        )
        .unwrap();
        let h = companion_system(&spec).unwrap();
        // 10³ steps per period
        let t = 0.25;
        let n = (t / (2.0 * std::f64::consts::PI / w / 1000.0)).round() as usize;
        let u = propagator_matrix(&h, t, 0.0, n).unwrap();
        let (c, s) = ((w * t).cos(), (w * t).sin());
        let ex = DMatrix::from_row_slice(2, 2, &[c, s / w, -w * s, c]).map(|v| C64::new(v, 0.0));
        assert!(linalg::max_abs_diff(&u, &ex) <= 1e-6);
    }

    #[test]
    fn dimension_cap_and_span_errors() {
        let h = random_h(3);
        assert!(matches!(propagator_matrix_capped(&h, 1.0, 0.0, 4, 4), Err(Error::DimensionCap { dim: 8, cap: 4 })));
        let p = Propagator::uniform(&h, 0.0, 1.0, 10, Method::CrankNicolson).unwrap();
        assert!(matches!(p.between(1.5, 0.0), Err(Error::OutsideSpan { .. })));
        assert!(p.between(0.55, 0.0).is_err());
        let q = Propagator::uniform(&h, 2.0, 3.0, 10, Method::CrankNicolson).unwrap();
        assert!(p.then(&q).is_err());
    }
}
