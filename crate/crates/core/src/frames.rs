//! Invertible fibre maps and smooth families of them along a time
//! parameter. Used for frame changes of Hamiltonians and for the
//! identifications `l_x` of the bundle layer.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{Grid, Hermiticity, LatticeOperator};
use crate::linalg;
use crate::sparse::CsrMatrix;
use crate::C64;

/// Default bound on the condition number of a frame.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e8;

/// A linear map of the full state space (sites × fibre components).
#[derive(Clone, Debug, PartialEq)]
pub enum FibreMap {
    Identity,
    /// Multiplication by a complex number.
    Scalar(C64),
    /// The same fibre matrix at every site.
    Local(DMatrix<C64>),
    /// An arbitrary matrix on the whole state vector.
    Dense(DMatrix<C64>),
}

impl FibreMap {
    pub fn zero() -> Self {
        FibreMap::Scalar(C64::new(0.0, 0.0))
    }

    /// Dimension the map is pinned to, if any.
    pub fn size(&self) -> Option<usize> {
        match self {
            FibreMap::Identity | FibreMap::Scalar(_) => None,
            FibreMap::Local(m) | FibreMap::Dense(m) => Some(m.nrows()),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        match self {
            FibreMap::Local(m) if !len.is_multiple_of(m.nrows()) => Err(Error::DimensionMismatch(format!(
                "fibre matrix of size {} does not divide state length {len}",
                m.nrows()
            ))),
            FibreMap::Dense(m) if m.nrows() != len => Err(Error::DimensionMismatch(format!(
                "dense frame of size {} applied to state of length {len}",
                m.nrows()
            ))),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check(v.len())?;
        Ok(match self {
            FibreMap::Identity => v.to_vec(),
            FibreMap::Scalar(a) => v.iter().map(|x| a * x).collect(),
            FibreMap::Local(m) => {
                let f = m.nrows();
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                for (chunk_in, chunk_out) in v.chunks(f).zip(out.chunks_mut(f)) {
                    for a in 0..f {
                        let mut acc = C64::new(0.0, 0.0);
                        for b in 0..f {
                            acc += m[(a, b)] * chunk_in[b];
                        }
                        chunk_out[a] = acc;
                    }
                }
                out
            }
            FibreMap::Dense(m) => linalg::mat_vec(m, v),
        })
    }

    /// Inverse map, rejected when the condition number exceeds `bound`.
    pub fn inverse(&self, t: f64, bound: f64) -> Result<FibreMap> {
        match self {
            FibreMap::Identity => Ok(FibreMap::Identity),
            FibreMap::Scalar(a) => {
                if a.norm() == 0.0 {
                    Err(Error::IllConditioned { time: t, condition: f64::INFINITY, bound })
                } else {
                    Ok(FibreMap::Scalar(1.0 / a))
                }
            }
            FibreMap::Local(m) | FibreMap::Dense(m) => {
                let cond = linalg::condition_number(m);
                if !(cond <= bound) {
                    return Err(Error::IllConditioned { time: t, condition: cond, bound });
                }
                let inv = linalg::inverse(m)?;
                Ok(match self {
                    FibreMap::Local(_) => FibreMap::Local(inv),
                    _ => FibreMap::Dense(inv),
                })
            }
        }
    }

    pub fn condition_number(&self) -> f64 {
        match self {
            FibreMap::Identity => 1.0,
            FibreMap::Scalar(a) => {
                if a.norm() == 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                }
            }
            FibreMap::Local(m) | FibreMap::Dense(m) => linalg::condition_number(m),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FibreMap) -> Result<FibreMap> {
        use FibreMap::*;
        Ok(match (self, other) {
            (Identity, x) | (x, Identity) => x.clone(),
            (Scalar(a), Scalar(b)) => Scalar(a * b),
            (Scalar(a), Local(m)) | (Local(m), Scalar(a)) => Local(m.map(|v| v * a)),
            (Scalar(a), Dense(m)) | (Dense(m), Scalar(a)) => Dense(m.map(|v| v * a)),
            (Local(a), Local(b)) => {
                same_size(a, b)?;
                Local(a * b)
            }
            (Dense(a), Dense(b)) => {
                same_size(a, b)?;
                Dense(a * b)
            }
            (Local(l), Dense(d)) => Dense(local_to_dense(l, d.nrows())? * d),
            (Dense(d), Local(l)) => Dense(d * local_to_dense(l, d.nrows())?),
        })
    }

    pub fn scale(&self, a: C64) -> FibreMap {
        match self {
            FibreMap::Identity => FibreMap::Scalar(a),
            FibreMap::Scalar(b) => FibreMap::Scalar(a * b),
            FibreMap::Local(m) => FibreMap::Local(m.map(|v| v * a)),
            FibreMap::Dense(m) => FibreMap::Dense(m.map(|v| v * a)),
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: C64, other: &FibreMap, b: C64) -> Result<FibreMap> {
        use FibreMap::*;
        let scalar = |m: &FibreMap| match m {
            Identity => Some(C64::new(1.0, 0.0)),
            Scalar(s) => Some(*s),
            _ => None,
        };
        if let (Some(x), Some(y)) = (scalar(self), scalar(other)) {
            return Ok(Scalar(a * x + b * y));
        }
        let size = self.size().or(other.size()).expect("a non-scalar operand");
        let dense = matches!(self, Dense(_)) || matches!(other, Dense(_));
        let full = |m: &FibreMap| -> Result<DMatrix<C64>> {
            match (m, dense) {
                (Identity, _) => Ok(DMatrix::identity(size, size)),
                (Scalar(s), _) => Ok(DMatrix::<C64>::identity(size, size).map(|v| v * s)),
                (Local(l), true) => local_to_dense(l, size),
                (Local(l), false) | (Dense(l), _) => Ok(l.clone()),
            }
        };
        let (x, y) = (full(self)?, full(other)?);
        same_size(&x, &y)?;
        let m = x.map(|v| v * a) + y.map(|v| v * b);
        Ok(if dense { Dense(m) } else { Local(m) })
    }

    /// Matrix of the map on a state of `len` entries.
    pub fn to_dense(&self, len: usize) -> Result<DMatrix<C64>> {
        self.check(len)?;
        Ok(match self {
            FibreMap::Identity => DMatrix::identity(len, len),
            FibreMap::Scalar(a) => DMatrix::<C64>::identity(len, len).map(|v| v * a),
            FibreMap::Local(m) => local_to_dense(m, len)?,
            FibreMap::Dense(m) => m.clone(),
        })
    }

    /// The map as a lattice operator on `grid` with fibre `fibre`.
    pub fn to_operator(&self, grid: &Grid, fibre: usize) -> Result<LatticeOperator> {
        let n = grid.num_sites() * fibre;
        self.check(n)?;
        let matrix = match self {
            FibreMap::Identity => CsrMatrix::identity(n),
            FibreMap::Scalar(a) => CsrMatrix::identity(n).scale(*a),
            FibreMap::Local(m) => {
                if m.nrows() != fibre {
                    return Err(Error::DimensionMismatch(format!(
                        "local frame of size {} for fibre {fibre}",
                        m.nrows()
                    )));
                }
                CsrMatrix::identity(grid.num_sites()).kron(m)
            }
            FibreMap::Dense(m) => CsrMatrix::from_dense(m),
        };
        LatticeOperator::from_matrix(grid.clone(), fibre, fibre, matrix, Hermiticity::General)
    }
}

fn same_size(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "fibre maps of sizes {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

fn local_to_dense(m: &DMatrix<C64>, len: usize) -> Result<DMatrix<C64>> {
    let f = m.nrows();
    if !len.is_multiple_of(f) {
        return Err(Error::DimensionMismatch(format!("fibre {f} does not divide {len}")));
    }
    let mut out = DMatrix::zeros(len, len);
    for s in 0..len / f {
        out.view_mut((s * f, s * f), (f, f)).copy_from(m);
    }
    Ok(out)
}

/// Where the matrices of a smooth random family act.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameScope {
    /// One fibre matrix shared by every site.
    Local,
    /// One matrix on the whole state vector.
    Dense,
}

type FrameFn = Arc<dyn Fn(f64) -> Result<FibreMap> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Identity,
    ScalarPhase { theta0: f64, omega: f64 },
    SmoothRandom { scope: FrameScope, frequency: f64, terms: Vec<(DMatrix<C64>, DMatrix<C64>)> },
    Custom { at: FrameFn, derivative: Option<FrameFn> },
}

/// A family `t ↦ l(t)` of invertible fibre maps together with its time
/// derivative.
#[derive(Clone)]
pub struct FrameFamily {
    kind: Kind,
    condition_bound: f64,
    fd_eps: f64,
}

impl fmt::Debug for FrameFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameFamily")
            .field("kind", &self.kind_name())
            .field("condition_bound", &self.condition_bound)
            .finish()
    }
}

impl FrameFamily {
    fn with_kind(kind: Kind) -> Self {
        FrameFamily { kind, condition_bound: DEFAULT_CONDITION_BOUND, fd_eps: 1e-5 }
    }

    pub fn identity() -> Self {
        Self::with_kind(Kind::Identity)
    }

    /// `l(t) = e^{i(θ₀ + ωt)}`.
    pub fn scalar_phase(theta0: f64, omega: f64) -> Self {
        Self::with_kind(Kind::ScalarPhase { theta0, omega })
    }

    /// `l(t) = exp(S(t))` with `S(t) = Σ_j a (C_j cos(jνt) + D_j sin(jνt))`,
    /// `j = 0..=harmonics`, and seeded random complex matrices `C_j`, `D_j`
    /// scaled so that `‖S‖` stays of order `amplitude`.
    pub fn smooth_random(
        size: usize,
        scope: FrameScope,
        seed: u64,
        amplitude: f64,
        harmonics: usize,
        frequency: f64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("frame size must be positive".into()));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() || !frequency.is_finite() {
            return Err(Error::InvalidParameter("frame amplitude/frequency must be finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm = amplitude / ((size as f64).sqrt() * (harmonics as f64 + 1.0));
        let terms = (0..=harmonics)
            .map(|_| {
                let c = linalg::random_matrix(size, size, &mut rng).map(|v| v * norm);
                let d = linalg::random_matrix(size, size, &mut rng).map(|v| v * norm);
                (c, d)
            })
            .collect();
        Ok(Self::with_kind(Kind::SmoothRandom { scope, frequency, terms }))
    }

    /// A user-supplied family. Without an analytic derivative, `dl/dt` is
    /// taken by central differences with the configured step.
    pub fn custom(
        at: impl Fn(f64) -> Result<FibreMap> + Send + Sync + 'static,
        derivative: Option<Arc<dyn Fn(f64) -> Result<FibreMap> + Send + Sync>>,
    ) -> Self {
        Self::with_kind(Kind::Custom { at: Arc::new(at), derivative })
    }

    pub fn with_condition_bound(mut self, bound: f64) -> Self {
        self.condition_bound = bound;
        self
    }

    pub fn with_fd_eps(mut self, eps: f64) -> Self {
        self.fd_eps = eps;
        self
    }

    pub fn condition_bound(&self) -> f64 {
        self.condition_bound
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Identity => "identity",
            Kind::ScalarPhase { .. } => "scalar_phase",
            Kind::SmoothRandom { .. } => "smooth_random",
            Kind::Custom { .. } => "custom",
        }
    }

    fn generator(&self, t: f64) -> Option<(FrameScope, DMatrix<C64>, DMatrix<C64>)> {
        if let Kind::SmoothRandom { scope, frequency, terms } = &self.kind {
            let n = terms[0].0.nrows();
            let mut s = DMatrix::zeros(n, n);
            let mut ds = DMatrix::zeros(n, n);
            for (j, (c, d)) in terms.iter().enumerate() {
                let w = j as f64 * frequency;
                let (sn, cs) = (w * t).sin_cos();
                s += c.map(|v| v * cs) + d.map(|v| v * sn);
                ds += c.map(|v| v * (-w * sn)) + d.map(|v| v * (w * cs));
            }
            Some((*scope, s, ds))
        } else {
            None
        }
    }

    fn wrap(scope: FrameScope, m: DMatrix<C64>) -> FibreMap {
        match scope {
            FrameScope::Local => FibreMap::Local(m),
            FrameScope::Dense => FibreMap::Dense(m),
        }
    }

    /// `l(t)`.
    pub fn at(&self, t: f64) -> Result<FibreMap> {
        match &self.kind {
            Kind::Identity => Ok(FibreMap::Identity),
            Kind::ScalarPhase { theta0, omega } => Ok(FibreMap::Scalar(C64::from_polar(1.0, theta0 + omega * t))),
            Kind::SmoothRandom { .. } => {
                let (scope, s, _) = self.generator(t).expect("smooth random");
                Ok(Self::wrap(scope, linalg::expm(&s)))
            }
            Kind::Custom { at, .. } => at(t),
        }
    }

    /// `dl/dt`.
    pub fn derivative(&self, t: f64) -> Result<FibreMap> {
        match &self.kind {
            Kind::Identity => Ok(FibreMap::zero()),
            Kind::ScalarPhase { theta0, omega } => {
                Ok(FibreMap::Scalar(C64::new(0.0, *omega) * C64::from_polar(1.0, theta0 + omega * t)))
            }
            Kind::SmoothRandom { .. } => {
                let (scope, s, ds) = self.generator(t).expect("smooth random");
                Ok(Self::wrap(scope, linalg::expm_with_derivative(&s, &ds).1))
            }
            Kind::Custom { derivative: Some(d), .. } => d(t),
            Kind::Custom { at, derivative: None } => {
                let h = self.fd_eps;
                let plus = at(t + h)?;
                let minus = at(t - h)?;
                plus.lincomb(C64::new(0.5 / h, 0.0), &minus, C64::new(-0.5 / h, 0.0))
            }
        }
    }

    /// `l(t)⁻¹`, checked against the condition bound.
    pub fn inverse_at(&self, t: f64) -> Result<FibreMap> {
        match &self.kind {
            Kind::SmoothRandom { .. } => {
                let (scope, s, _) = self.generator(t).expect("smooth random");
                let l = linalg::expm(&s);
                let cond = linalg::condition_number(&l);
                if !(cond <= self.condition_bound) {
                    return Err(Error::IllConditioned { time: t, condition: cond, bound: self.condition_bound });
                }
                Ok(Self::wrap(scope, linalg::expm(&(-s))))
            }
            _ => self.at(t)?.inverse(t, self.condition_bound),
        }
    }

    /// `d(l⁻¹)/dt = -l⁻¹ (dl/dt) l⁻¹`.
    pub fn inverse_derivative(&self, t: f64) -> Result<FibreMap> {
        let inv = self.inverse_at(t)?;
        let d = self.derivative(t)?;
        Ok(inv.compose(&d)?.compose(&inv)?.scale(C64::new(-1.0, 0.0)))
    }
}
