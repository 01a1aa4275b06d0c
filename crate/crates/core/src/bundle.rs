//! Fibre-bundle description of the dynamics: paths, liftings through frame
//! families, evolution transport, transport coefficients and the
//! derivation along paths.
//!
//! Conventions: a lifting is `Ψ(t) = l(t)⁻¹ ψ(t)`, the transport is
//! `U_γ(t, s) = l(t)⁻¹ U(t, s) l(s)` and the coefficients are
//! `Γ(s) = ∂_t U_γ(t, s)|_{t=s} = -(i/ħ) H_γ(s)` with the bundle Hamiltonian
//! `H_γ = l⁻¹ H l + iħ (∂_t l⁻¹) l`. Transported liftings solve `Ψ' = ΓΨ`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::io::fmt_f64;
use crate::evolution::{Propagator, Trajectory, DEFAULT_DIMENSION_CAP};
use crate::frames::{FibreMap, FrameFamily};
use crate::lattice::LatticeOperator;
use crate::linalg;
use crate::reduction::Hamiltonian;
use crate::state::StateVector;
use crate::C64;

/// Smallest step accepted by the finite-difference routes.
pub const MIN_EPSILON: f64 = 1e-10;

type SpatialMap = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// A world line `γ(t) = (t, x(t))` sampled at ascending times in `[t_a, t_b]`.
#[derive(Clone)]
pub struct Path {
    start: f64,
    end: f64,
    times: Vec<f64>,
    spatial: SpatialMap,
}

impl std::fmt::Debug for Path {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Path").field("start", &self.start).field("end", &self.end).field("samples", &self.times.len()).finish()
    }
}

impl Path {
    /// A path through `x(t)` sampled at `times`; the span is the sample range.
    pub fn new(times: Vec<f64>, spatial: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("path times must be finite and strictly ascending".into()));
        }
        for &t in &times {
            if spatial(t).iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("path position is not finite at t = {t}")));
            }
        }
        Ok(Path { start: times[0], end: *times.last().unwrap_or(&times[0]), times, spatial: Arc::new(spatial) })
    }

    /// An observer at rest at `x0`, sampled `n + 1` times uniformly on `[t_a, t_b]`.
    pub fn stationary(t_a: f64, t_b: f64, n: usize, x0: [f64; 3]) -> Result<Self> {
        if n == 0 || !(t_b > t_a) {
            return Err(Error::InvalidParameter(format!("need n >= 1 and t_b > t_a, got {n} on [{t_a}, {t_b}]")));
        }
        let times = (0..=n).map(|i| if i == n { t_b } else { t_a + (t_b - t_a) * i as f64 / n as f64 }).collect();
        Path::new(times, move |_| x0)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Base point `(t, x, y, z)`.
    pub fn point(&self, t: f64) -> [f64; 4] {
        let x = (self.spatial)(t);
        [t, x[0], x[1], x[2]]
    }

    /// Largest `|Δx| / Δt` between consecutive samples.
    pub fn max_speed(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| {
                let (a, b) = (self.point(w[0]), self.point(w[1]));
                let d: f64 = (1..4).map(|i| (b[i] - a[i]).powi(2)).sum::<f64>().sqrt();
                d / (w[1] - w[0])
            })
            .fold(0.0, f64::max)
    }
}

/// Fibre values `Ψ_γ(t)` over the sample times of a path.
#[derive(Clone, Debug)]
pub struct Lifting {
    path: Path,
    values: Vec<StateVector>,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
}

impl Lifting {
    pub fn new(path: Path, values: Vec<StateVector>) -> Result<Self> {
        if values.len() != path.times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} path samples",
                values.len(),
                path.times.len()
            )));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.len() != first.len() || v.fibre_dim() != first.fibre_dim()) {
                return Err(Error::DimensionMismatch("lifting values have inconsistent shapes".into()));
            }
        }
        Ok(Lifting { path, values })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn values(&self) -> &[StateVector] {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.path.times
    }

    /// The sample at `t`.
    pub fn at(&self, t: f64) -> Result<&StateVector> {
        let times = &self.path.times;
        if (t < self.path.start && !same_time(t, self.path.start)) || (t > self.path.end && !same_time(t, self.path.end)) {
            return Err(Error::OutsideSpan { time: t, start: self.path.start, end: self.path.end });
        }
        let i = times.partition_point(|&x| x < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < times.len() && same_time(times[j], t))
            .map(|j| &self.values[j])
            .next()
            .ok_or_else(|| Error::Missing(format!("lifting has no sample at t = {t}")))
    }
}

/// `Ψ(t) = l(t)⁻¹ ψ(t)`.
pub fn lift_state(frames: &FrameFamily, psi: &StateVector, t: f64) -> Result<StateVector> {
    if matches!(frames.at(t)?, FibreMap::Identity) {
        return psi.with_data(psi.data().to_vec(), t);
    }
    psi.with_data(frames.inverse_at(t)?.apply(psi.data())?, t)
}

/// `ψ(t) = l(t) Ψ(t)`.
pub fn lower_state(frames: &FrameFamily, lifted: &StateVector, t: f64) -> Result<StateVector> {
    lifted.with_data(frames.at(t)?.apply(lifted.data())?, t)
}

/// Lifts every state of a trajectory along a stationary path at `x0`.
pub fn lift_trajectory(frames: &FrameFamily, tr: &Trajectory, x0: [f64; 3]) -> Result<Lifting> {
    let path = Path::new(tr.times.clone(), move |_| x0)?;
    let values = tr.times.iter().zip(&tr.states).map(|(t, s)| lift_state(frames, s, *t)).collect::<Result<_>>()?;
    Lifting::new(path, values)
}

/// `A_γ(t) = l(t)⁻¹ A l(t)`.
pub fn lift_operator(frames: &FrameFamily, a: &LatticeOperator, t: f64) -> Result<LatticeOperator> {
    let l = frames.at(t)?;
    if matches!(l, FibreMap::Identity) {
        return Ok(a.clone());
    }
    let (g, f) = (a.grid(), a.fibre_dim());
    let lop = l.to_operator(g, f)?;
    let linv = frames.inverse_at(t)?.to_operator(g, f)?;
    Ok(linv.compose(a)?.compose(&lop)?.with_hermiticity(crate::lattice::Hermiticity::General))
}

/// Evolution transport `U_γ(t, s) = l(t)⁻¹ U(t, s) l(s)` for a propagator
/// and a frame family.
#[derive(Clone, Debug)]
pub struct EvolutionTransport {
    frames: FrameFamily,
    propagator: Propagator,
}

impl EvolutionTransport {
    pub fn new(frames: FrameFamily, propagator: Propagator) -> Self {
        EvolutionTransport { frames, propagator }
    }

    pub fn frames(&self) -> &FrameFamily {
        &self.frames
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn hbar(&self) -> f64 {
        self.propagator.hbar()
    }

    /// Dense `U_γ(t, s)`; backward maps use the inverse propagator.
    pub fn matrix(&self, t: f64, s: f64) -> Result<DMatrix<C64>> {
        let n = self.propagator.dim();
        if n > DEFAULT_DIMENSION_CAP {
            return Err(Error::DimensionCap { dim: n, cap: DEFAULT_DIMENSION_CAP });
        }
        let u = self.propagator.matrix_between(t, s)?;
        let (lt, ls) = (self.frames.at(t)?, self.frames.at(s)?);
        if matches!(lt, FibreMap::Identity) && matches!(ls, FibreMap::Identity) {
            return Ok(u);
        }
        let linv = self.frames.inverse_at(t)?.to_dense(n)?;
        Ok(linv * u * ls.to_dense(n)?)
    }

    /// `U_γ(t, s) Ψ` for `t ≥ s` without assembling matrices.
    pub fn apply(&self, t: f64, s: f64, lifted: &StateVector) -> Result<StateVector> {
        if t < s {
            let m = self.matrix(t, s)?;
            return lifted.with_data(linalg::mat_vec(&m, lifted.data()), t);
        }
        let psi = lifted.with_data(self.frames.at(s)?.apply(lifted.data())?, s)?;
        let moved = self.propagator.between(t, s)?.apply(&psi)?;
        lift_state(&self.frames, &moved, t)
    }
}

/// Dense `U_γ(t, s)`.
pub fn evolution_transport(frames: &FrameFamily, u: &Propagator, t: f64, s: f64) -> Result<DMatrix<C64>> {
    EvolutionTransport::new(frames.clone(), u.clone()).matrix(t, s)
}

/// `H_γ(t) = l⁻¹ H l + iħ (∂_t l⁻¹) l` as a dense matrix.
pub fn bundle_hamiltonian(frames: &FrameFamily, h: &Hamiltonian, t: f64) -> Result<DMatrix<C64>> {
    let n = h.total_dim();
    if n > DEFAULT_DIMENSION_CAP {
        return Err(Error::DimensionCap { dim: n, cap: DEFAULT_DIMENSION_CAP });
    }
    let hm = h.evaluate(t)?.to_dense();
    let l = frames.at(t)?;
    if matches!(l, FibreMap::Identity) {
        return Ok(hm);
    }
    let ld = l.to_dense(n)?;
    let linv = frames.inverse_at(t)?.to_dense(n)?;
    let dlinv = frames.inverse_derivative(t)?.to_dense(n)?;
    let drift = (dlinv * &ld).map(|v| v * C64::new(0.0, h.hbar()));
    Ok(linv * hm * ld + drift)
}

/// `Γ(t) = -(i/ħ) H_γ(t)`.
pub fn transport_coefficients_from_hamiltonian(frames: &FrameFamily, h: &Hamiltonian, t: f64) -> Result<DMatrix<C64>> {
    let k = C64::new(0.0, -1.0 / h.hbar());
    Ok(bundle_hamiltonian(frames, h, t)?.map(|v| v * k))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= MIN_EPSILON) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {eps} is below the roundoff floor {MIN_EPSILON}"
        )));
    }
    Ok(())
}

/// `Γ(s) ≈ (U_γ(s + ε, s) - 1) / ε`; `s + ε` must lie on the propagator's
/// step grid.
pub fn transport_coefficients_from_transport(transport: &EvolutionTransport, s: f64, eps: f64) -> Result<DMatrix<C64>> {
    check_eps(eps)?;
    let u = transport.matrix(s + eps, s)?;
    let n = u.nrows();
    Ok((u - DMatrix::identity(n, n)).map(|v| v / eps))
}

/// `iħ Γ`, the inverse of the correspondence.
pub fn hamiltonian_from_coefficients(gamma: &DMatrix<C64>, hbar: f64) -> DMatrix<C64> {
    gamma.map(|v| v * C64::new(0.0, hbar))
}

/// How the derivation along a path is discretized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivationScheme {
    /// `(U_γ(s, s + ε) λ(s + ε) - λ(s)) / ε`.
    Transport,
    /// `(λ(s + ε) - λ(s)) / ε - Γ(s) λ(s)`, with `Γ` from the Hamiltonian.
    #[default]
    Coefficients,
}

/// Data needed to differentiate liftings along a path.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub scheme: DerivationScheme,
    pub transport: EvolutionTransport,
    pub hamiltonian: Hamiltonian,
    /// Combine steps `ε` and `ε/2` as `2 D(ε/2) - D(ε)`.
    pub richardson: bool,
}

impl Derivation {
    pub fn new(transport: EvolutionTransport, hamiltonian: Hamiltonian, scheme: DerivationScheme) -> Self {
        Derivation { scheme, transport, hamiltonian, richardson: false }
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    fn raw(&self, lifting: &Lifting, s: f64, eps: f64) -> Result<Vec<C64>> {
        let l0 = lifting.at(s)?;
        let l1 = lifting.at(s + eps)?;
        match self.scheme {
            DerivationScheme::Transport => {
                let u = self.transport.matrix(s, s + eps)?;
                let moved = linalg::mat_vec(&u, l1.data());
                Ok(moved.iter().zip(l0.data()).map(|(a, b)| (a - b) / eps).collect())
            }
            DerivationScheme::Coefficients => {
                let gamma = transport_coefficients_from_hamiltonian(self.transport.frames(), &self.hamiltonian, s)?;
                let g = linalg::mat_vec(&gamma, l0.data());
                Ok(l1.data().iter().zip(l0.data()).zip(&g).map(|((a, b), gv)| (a - b) / eps - gv).collect())
            }
        }
    }

    /// `D_s λ`; vanishes to first order in `ε` for transported liftings.
    pub fn apply(&self, lifting: &Lifting, s: f64, eps: f64) -> Result<Vec<C64>> {
        check_eps(eps)?;
        let d = self.raw(lifting, s, eps)?;
        if !self.richardson {
            return Ok(d);
        }
        check_eps(0.5 * eps)?;
        let half = self.raw(lifting, s, 0.5 * eps)?;
        Ok(half.iter().zip(&d).map(|(h, f)| 2.0 * h - f).collect())
    }
}

/// `D_s λ` with the given scheme and no extrapolation.
pub fn derivation_along_path(
    transport: &EvolutionTransport,
    hamiltonian: &Hamiltonian,
    lifting: &Lifting,
    s: f64,
    eps: f64,
    scheme: DerivationScheme,
) -> Result<Vec<C64>> {
    Derivation::new(transport.clone(), hamiltonian.clone(), scheme).apply(lifting, s, eps)
}

/// `⟨Ψ₁|Ψ₂⟩_t = ⟨l(t)Ψ₁ | l(t)Ψ₂⟩`.
pub fn fibre_inner(frames: &FrameFamily, t: f64, a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("fibre vectors of different lengths".into()));
    }
    let l = frames.at(t)?;
    if matches!(l, FibreMap::Identity) {
        return Ok(linalg::inner(a.data(), b.data()));
    }
    Ok(linalg::inner(&l.apply(a.data())?, &l.apply(b.data())?))
}

/// `⟨Ψ|A_γΨ⟩_t / ⟨Ψ|Ψ⟩_t`.
pub fn mean_value(frames: &FrameFamily, a_lifted: &LatticeOperator, lifted: &StateVector, t: f64) -> Result<C64> {
    let norm = fibre_inner(frames, t, lifted, lifted)?;
    if norm.re == 0.0 {
        return Err(Error::InvalidParameter("mean value of a zero-norm state".into()));
    }
    let image = lifted.with_data(a_lifted.apply(lifted.data())?, t)?;
    Ok(fibre_inner(frames, t, lifted, &image)? / norm)
}

/// `⟨ψ|Aψ⟩ / ⟨ψ|ψ⟩` in the flat state space.
pub fn hilbert_mean_value(a: &LatticeOperator, psi: &StateVector) -> Result<C64> {
    let norm = psi.norm().powi(2);
    if norm == 0.0 {
        return Err(Error::InvalidParameter("mean value of a zero-norm state".into()));
    }
    Ok(linalg::inner(psi.data(), &a.apply(psi.data())?) / norm)
}

/// Sampled `Γ(t)`.
#[derive(Clone, Debug)]
pub struct TransportCoefficients {
    pub times: Vec<f64>,
    pub values: Vec<DMatrix<C64>>,
}

impl TransportCoefficients {
    pub fn from_hamiltonian(frames: &FrameFamily, h: &Hamiltonian, times: &[f64]) -> Result<Self> {
        let values = times
            .iter()
            .map(|&t| transport_coefficients_from_hamiltonian(frames, h, t))
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|m| m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite transport coefficients".into()));
        }
        Ok(TransportCoefficients { times: times.to_vec(), values })
    }

    /// Long-format CSV `t,row,col,re,im` listing the nonzero entries.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["t", "row", "col", "re", "im"]).map_err(err)?;
        for (t, m) in self.times.iter().zip(&self.values) {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let v = m[(r, c)];
                    if v.re != 0.0 || v.im != 0.0 {
                        w.write_record([fmt_f64(*t), r.to_string(), c.to_string(), fmt_f64(v.re), fmt_f64(v.im)])
                            .map_err(err)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
