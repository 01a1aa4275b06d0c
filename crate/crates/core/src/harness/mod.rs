//! Exact per-mode oracles, the invariant suite and convergence studies.

mod convergence;
mod oracle;
mod report;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use convergence::{convergence_study, fit_order, ConvergenceStudy, ConvergenceSubject, ROUNDOFF_FLOOR};
pub use oracle::{
    all_mode_oracles, analytic_spectrum, discrete_k2, evolve_by_modes, fourier_oracle, spectrum_error, ModeOracle,
};
pub use report::{CheckResult, Report};

use crate::bundle::{self, EvolutionTransport};
use crate::error::{Error, Result};
use crate::evolution::{propagate, propagate_observed, propagator_matrix, Method, Propagator};
use crate::frames::{FibreMap, FrameFamily, FrameScope};
use crate::lattice::{central_difference, curl_op, div_op, Grid, Hermiticity, LatticeOperator};
use crate::linalg;
use crate::models::{self, DiracMatrices, ModelKind, PhysicalParams, Potentials};
use crate::reduction::{companion_hamiltonian, frame_change, frame_changed, Hamiltonian};
use crate::state::StateVector;
use crate::C64;

/// A normalized Gaussian packet `exp(-|x - x₀|²/2w²) e^{ik₀·x} u` using
/// minimum-image distances.
pub fn gaussian_packet(grid: &Grid, center: [f64; 3], width: f64, k0: [f64; 3], spinor: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(grid.num_sites() * spinor.len());
    for s in 0..grid.num_sites() {
        let x = grid.position(s);
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..grid.dim() {
            let l = grid.length(a);
            let mut d = x[a] - center[a];
            d -= l * (d / l).round();
            r2 += d * d;
            phase += k0[a] * d;
        }
        let amp = C64::from_polar((-0.5 * r2 / (width * width)).exp(), phase);
        out.extend(spinor.iter().map(|u| u * amp));
    }
    let n = linalg::vec_norm(&out);
    out.iter().map(|v| v / n).collect()
}

/// The harmonic oscillator `φ'' = -ω²φ` in companion form.
pub fn harmonic_companion(omega: f64) -> Result<Hamiltonian> {
    let op = |v: f64| LatticeOperator::from_dense(&DMatrix::from_element(1, 1, C64::new(v, 0.0)), Hermiticity::General);
    let spec = crate::reduction::EquationSpec::new(
        Grid::single_site(),
        1,
        1.0,
        vec![
            crate::reduction::Coefficient::Constant(op(-omega * omega)),
            crate::reduction::Coefficient::Constant(op(0.0)),
        ],
    )?;
    crate::reduction::companion_system(&spec)
}

/// `max_t ‖ψ̃(t) - A(t)ψ(t)‖` where `ψ` evolves under `h` and `ψ̃` under the
/// frame-changed Hamiltonian, both by Crank-Nicolson.
pub fn frame_covariance_error(h: &Hamiltonian, frames: &FrameFamily, psi0: &StateVector, t_end: f64, steps: usize) -> Result<f64> {
    let ht = frame_changed(h, frames)?;
    let plain = propagate(h, psi0, 0.0, t_end, steps, Method::CrankNicolson)?;
    let start = psi0.with_data(frames.at(0.0)?.apply(psi0.data())?, 0.0)?;
    let changed = propagate(&ht, &start, 0.0, t_end, steps, Method::CrankNicolson)?;
    let mut worst: f64 = 0.0;
    for ((t, a), b) in plain.times.iter().zip(&plain.states).zip(&changed.states) {
        let mapped = frames.at(*t)?.apply(a.data())?;
        worst = worst.max(linalg::vec_norm(&linalg::sub(b.data(), &mapped)));
    }
    Ok(worst)
}

/// Time span of the 100-step frame covariance run.
pub const FRAME_COVARIANCE_HORIZON: f64 = 0.05;

/// Settings of the invariant suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    /// Lattice points of the 1-D grid used by the Dirac and Klein-Gordon checks.
    pub points: usize,
    pub length: f64,
    /// Points per axis of the 3-D grid used by the Maxwell and five-component checks.
    pub points_3d: usize,
    pub length_3d: f64,
    pub params: PhysicalParams,
    /// Steps of the long unitarity and conserved-form runs.
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// Replaces every check's tolerance when set.
    pub tolerance: Option<f64>,
    /// Check names (or dotted prefixes) to run; empty runs everything.
    pub only: Vec<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            points: 64,
            length: 16.0,
            points_3d: 4,
            length_3d: 4.0,
            params: PhysicalParams::default(),
            steps: 1000,
            dt: 1e-3,
            seed: 20240607,
            tolerance: None,
            only: Vec::new(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        Grid::new(1, self.points, self.length)?;
        Grid::new(3, self.points_3d, self.length_3d)?;
        self.params.validate()?;
        if self.params.mass <= 0.0 {
            return Err(Error::InvalidParameter("the suite needs a positive mass".into()));
        }
        if self.steps < 2 || !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter("steps must be at least 2 and dt positive".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {t}")));
            }
        }
        let names: Vec<&str> = CHECKS.iter().map(|c| c.name).collect();
        for f in &self.only {
            if !names.iter().any(|n| selects(f, n)) {
                return Err(Error::InvalidParameter(format!("no check matches '{f}'")));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(1, self.points, self.length)
    }

    fn grid3(&self) -> Result<Grid> {
        Grid::new(3, self.points_3d, self.length_3d)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

fn selects(filter: &str, name: &str) -> bool {
    name == filter || name.strip_prefix(filter).is_some_and(|rest| rest.starts_with('.'))
}

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn(&SuiteConfig) -> Result<f64>,
}

/// Names of every check in the suite, sorted.
pub fn check_names() -> Vec<&'static str> {
    let mut v: Vec<&str> = CHECKS.iter().map(|c| c.name).collect();
    v.sort_unstable();
    v
}

/// Runs the selected checks in parallel and collects a sorted report.
/// Failing checks are recorded; only configuration errors abort.
pub fn run_invariant_suite(config: &SuiteConfig) -> Result<Report> {
    config.validate()?;
    let selected: Vec<&Check> = CHECKS
        .iter()
        .filter(|c| config.only.is_empty() || config.only.iter().any(|f| selects(f, c.name)))
        .collect();
    let results = selected
        .par_iter()
        .map(|c| {
            let tol = config.tolerance.unwrap_or(c.tolerance);
            let start = Instant::now();
            let out = (c.run)(config);
            let secs = start.elapsed().as_secs_f64();
            match out {
                Ok(m) => CheckResult::at_most(c.name, m, tol, secs),
                Err(e) => CheckResult::failed(c.name, tol, secs, e.to_string()),
            }
        })
        .collect();
    Ok(Report::new(results))
}

const CHECKS: &[Check] = &[
    Check { name: "bundle.derivation_residual", tolerance: 1e-3, run: bundle_derivation_residual },
    Check { name: "bundle.fibre_norm", tolerance: 1e-12, run: bundle_fibre_norm },
    Check { name: "bundle.gamma_identity_frames", tolerance: 0.0, run: bundle_gamma_identity },
    Check { name: "bundle.gamma_routes", tolerance: 1e-2, run: bundle_gamma_routes },
    Check { name: "bundle.gauge_law", tolerance: 1e-8, run: bundle_gauge_law },
    Check { name: "bundle.mean_value_frames", tolerance: 1e-12, run: bundle_mean_values },
    Check { name: "bundle.transport_composition", tolerance: 1e-10, run: bundle_transport_composition },
    Check { name: "dirac.algebra", tolerance: 0.0, run: dirac_algebra },
    Check { name: "dirac.dispersion", tolerance: 1e-12, run: dirac_dispersion },
    Check { name: "dirac.hermiticity", tolerance: 1e-12, run: dirac_hermiticity },
    Check { name: "dirac.unitarity", tolerance: 1e-12, run: dirac_unitarity },
    Check { name: "evolution.cn_unitarity", tolerance: 1e-13, run: evolution_cn_unitarity },
    Check { name: "evolution.composition", tolerance: 1e-10, run: evolution_composition },
    Check { name: "evolution.convergence_order", tolerance: 0.1, run: evolution_convergence_order },
    Check { name: "evolution.harmonic_period", tolerance: 1e-4, run: evolution_harmonic_period },
    Check { name: "harness.oracle_self_consistency", tolerance: 1e-11, run: oracle_self_consistency },
    Check { name: "kg_canonical.companion_form", tolerance: 0.0, run: kg_companion_form },
    Check { name: "kg_canonical.dispersion", tolerance: 1e-12, run: kg_dispersion },
    Check { name: "kg_feshbach_villars.frame_change", tolerance: 1e-12, run: kg_fv_frame_change },
    Check { name: "kg_feshbach_villars.indefinite_form", tolerance: 1e-10, run: kg_fv_form },
    Check { name: "kg_feshbach_villars.pseudo_hermiticity", tolerance: 1e-12, run: kg_fv_pseudo_hermiticity },
    Check { name: "kg_five_component.equivalence", tolerance: 1e-8, run: kg_five_equivalence },
    Check { name: "lattice.div_curl", tolerance: 1e-12, run: lattice_div_curl },
    Check { name: "maxwell.divergence", tolerance: 1e-10, run: maxwell_divergence },
    Check { name: "maxwell.dispersion", tolerance: 1e-12, run: maxwell_dispersion },
    Check { name: "maxwell.unitarity", tolerance: 1e-12, run: maxwell_unitarity },
    Check { name: "reduction.frame_covariance", tolerance: 1e-8, run: reduction_frame_covariance },
    Check { name: "spin1.block_leakage", tolerance: 1e-14, run: spin1_leakage },
];

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn unit_spinor(f: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..f).map(|a| C64::new(1.0 / (a + 1) as f64, 0.25 * a as f64)).collect();
    let n = linalg::vec_norm(&v);
    v.iter().map(|x| x / n).collect()
}

fn dirac_packet(c: &SuiteConfig) -> Result<(Hamiltonian, StateVector)> {
    let g = c.grid()?;
    let h = models::dirac_hamiltonian(&g, &c.params, &Potentials::Zero)?;
    let data = gaussian_packet(&g, [0.5 * c.length, 0.0, 0.0], c.length / 10.0, [2.0 * std::f64::consts::PI / c.length, 0.0, 0.0], &unit_spinor(4));
    Ok((h, StateVector::new(g, 4, data, 0.0)?))
}

fn random_hermitian_system(c: &SuiteConfig, salt: u64) -> Result<(Hamiltonian, StateVector, FrameFamily)> {
    let mut rng = c.rng(salt);
    let m = linalg::random_hermitian(8, &mut rng);
    let h = Hamiltonian::constant(LatticeOperator::from_dense(&m, Hermiticity::Hermitian), 1.0)?;
    let psi = StateVector::new(Grid::single_site(), 8, linalg::random_vector(8, &mut rng), 0.0)?;
    let frames = FrameFamily::smooth_random(8, FrameScope::Local, c.seed ^ salt, 0.5, 2, 1.3)?;
    Ok((h, psi, frames))
}

fn dirac_algebra(_: &SuiteConfig) -> Result<f64> {
    Ok(DiracMatrices::standard().algebra_defect())
}

fn dirac_hermiticity(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let mut p = c.params;
    p.charge = if p.charge == 0.0 { 0.5 } else { p.charge };
    let pot = Potentials::PlaneWave { phi0: 0.3, a0: [0.2, 0.0, 0.0], k: [2.0 * std::f64::consts::PI / c.length, 0.0, 0.0], omega: 1.0, phase: 0.1 };
    let h = models::dirac_hamiltonian(&g, &p, &pot)?;
    Ok(max_of([0.0, 0.4, 1.1].iter().map(|&t| h.evaluate(t).map(|o| o.hermiticity_defect()).unwrap_or(f64::NAN))))
}

fn dirac_unitarity(c: &SuiteConfig) -> Result<f64> {
    let (h, psi) = dirac_packet(c)?;
    let tr = propagate(&h, &psi, 0.0, c.steps as f64 * c.dt, c.steps, Method::CrankNicolson)?;
    Ok(tr.norm_drift())
}

fn dirac_dispersion(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let oracles = all_mode_oracles(ModelKind::Dirac, &c.params, &g)?;
    Ok(max_of(oracles.iter().map(|o| spectrum_error(o, &c.params, &g))))
}

fn oracle_self_consistency(c: &SuiteConfig) -> Result<f64> {
    let (h, psi) = dirac_packet(c)?;
    let g = h.grid().clone();
    let oracles = all_mode_oracles(ModelKind::Dirac, &c.params, &g)?;
    let t = 0.5;
    let by_modes = evolve_by_modes(&oracles, &g, 4, psi.data(), t)?;
    let k = C64::new(0.0, -t / c.params.hbar);
    let u = linalg::expm(&h.evaluate(0.0)?.to_dense().map(|v| v * k));
    Ok(linalg::vec_norm(&linalg::sub(&by_modes, &linalg::mat_vec(&u, psi.data()))))
}

fn kg_companion_form(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let mut p = c.params;
    p.charge = if p.charge == 0.0 { 0.5 } else { p.charge };
    let pot = Potentials::Uniform { phi: 0.3, a: [0.2, 0.0, 0.0] };
    let h = models::kg_canonical(&g, &p, &pot)?.evaluate(0.0)?;
    let spec = models::kg_equation_spec(&g, &p, &pot)?;
    let comp = companion_hamiltonian(&spec, 0.0)?;
    Ok(h.matrix().max_abs_diff(comp.matrix()))
}

fn kg_dispersion(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::KgCanonical, ModelKind::KgFeshbachVillars, ModelKind::Spin1] {
        let oracles = all_mode_oracles(kind, &c.params, &g)?;
        worst = worst.max(max_of(oracles.iter().map(|o| spectrum_error(o, &c.params, &g))));
    }
    Ok(worst)
}

fn kg_fv_frame_change(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let mut p = c.params;
    p.charge = if p.charge == 0.0 { 0.5 } else { p.charge };
    let pot = Potentials::Uniform { phi: 0.3, a: [0.2, 0.0, 0.0] };
    let canon = models::kg_canonical(&g, &p, &pot)?.evaluate(0.0)?;
    let fv = models::kg_feshbach_villars(&g, &p, &pot)?.evaluate(0.0)?;
    let a = FibreMap::Local(models::feshbach_villars_frame(&p)?);
    let changed = frame_change(&canon, &a, &FibreMap::zero(), p.hbar, 0.0)?;
    let scale = fv.matrix().max_abs().max(f64::MIN_POSITIVE);
    Ok(fv.matrix().max_abs_diff(changed.matrix()) / scale)
}

fn free_fv(c: &SuiteConfig) -> Result<Hamiltonian> {
    let mut p = c.params;
    p.charge = 0.0;
    models::kg_feshbach_villars(&c.grid()?, &p, &Potentials::Zero)
}

fn kg_fv_pseudo_hermiticity(c: &SuiteConfig) -> Result<f64> {
    free_fv(c)?.pseudo_hermiticity_defect(0.0)
}

fn kg_fv_form(c: &SuiteConfig) -> Result<f64> {
    let h = free_fv(c)?;
    let g = h.grid().clone();
    let data = gaussian_packet(&g, [0.3 * c.length, 0.0, 0.0], c.length / 8.0, [0.0; 3], &[C64::new(1.0, 0.0), C64::new(0.2, 0.1)]);
    let psi = StateVector::new(g, 2, data, 0.0)?;
    let tr = propagate(&h, &psi, 0.0, c.steps as f64 * c.dt, c.steps, Method::CrankNicolson)?;
    tr.form_drift().ok_or_else(|| Error::Missing("the free Feshbach-Villars form declares no metric".into()))
}

fn kg_five_equivalence(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid3()?;
    let p = c.params;
    let canon = models::kg_canonical(&g, &p, &Potentials::Zero)?;
    let five = models::kg_five_component(&g, &p)?;
    let mut rng = c.rng(5);
    let phi = linalg::random_vector(g.num_sites(), &mut rng);
    let dphi = linalg::random_vector(g.num_sites(), &mut rng);
    let grads: Vec<Vec<C64>> = (0..3).map(|a| central_difference(&g, a)?.apply(&phi)).collect::<Result<_>>()?;
    let mc2 = p.rest_energy();
    let s2 = StateVector::from_fn(&g, 2, 0.0, |s, a| if a == 0 { phi[s] } else { dphi[s] });
    let s5 = StateVector::from_fn(&g, 5, 0.0, |s, a| match a {
        0 => phi[s] * mc2,
        1 => dphi[s],
        _ => grads[a - 2][s],
    });
    let steps = 100;
    let t = steps as f64 * c.dt;
    let a = propagate(&canon, &s2, 0.0, t, steps, Method::CrankNicolson)?;
    let b = propagate(&five, &s5, 0.0, t, steps, Method::CrankNicolson)?;
    let mut worst: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        for s in 0..g.num_sites() {
            let e0 = (x.data()[2 * s] - y.data()[5 * s] / mc2).norm();
            let e1 = (x.data()[2 * s + 1] - y.data()[5 * s + 1]).norm();
            worst = worst.max(e0).max(e1);
        }
    }
    Ok(worst)
}

fn div_free_maxwell_state(g: &Grid, rng: &mut ChaCha8Rng) -> Result<StateVector> {
    let curl = curl_op(g)?;
    let e = curl.apply(&linalg::random_vector(3 * g.num_sites(), rng))?;
    let h = curl.apply(&linalg::random_vector(3 * g.num_sites(), rng))?;
    Ok(StateVector::from_fn(g, 6, 0.0, |s, a| if a < 3 { e[3 * s + a] } else { h[3 * s + a - 3] }))
}

fn maxwell_run(c: &SuiteConfig, steps: usize, mut observe: impl FnMut(&StateVector) -> Result<()>) -> Result<()> {
    let g = c.grid3()?;
    let h = models::maxwell_hamiltonian(&g, &c.params)?;
    let psi = div_free_maxwell_state(&g, &mut c.rng(10))?;
    propagate_observed(&h, &psi, 0.0, steps as f64 * c.dt, steps, Method::CrankNicolson, |_, s| observe(s))?;
    Ok(())
}

fn maxwell_divergence(c: &SuiteConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    maxwell_run(c, 100, |s| {
        let (de, dh) = models::maxwell_constraints(s)?;
        worst = worst.max(max_of(de.iter().chain(&dh).map(|v| v.norm())));
        Ok(())
    })?;
    Ok(worst)
}

fn maxwell_unitarity(c: &SuiteConfig) -> Result<f64> {
    let mut norms = Vec::new();
    maxwell_run(c, 100, |s| {
        norms.push(s.norm());
        Ok(())
    })?;
    Ok(max_of(norms.iter().map(|n| (n - norms[0]).abs() / norms[0])))
}

fn maxwell_dispersion(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid3()?;
    let oracles = all_mode_oracles(ModelKind::Maxwell, &c.params, &g)?;
    Ok(max_of(oracles.iter().map(|o| spectrum_error(o, &c.params, &g))))
}

fn lattice_div_curl(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid3()?;
    let v = linalg::random_vector(3 * g.num_sites(), &mut c.rng(11));
    let out = div_op(&g)?.apply(&curl_op(&g)?.apply(&v)?)?;
    Ok(max_of(out.iter().map(|x| x.norm())))
}

fn spin1_leakage(c: &SuiteConfig) -> Result<f64> {
    let g = c.grid()?;
    let h = models::spin1_block(&g, &c.params, &Potentials::Zero, models::KgReduction::Canonical)?;
    let packet = gaussian_packet(&g, [0.5 * c.length, 0.0, 0.0], c.length / 10.0, [0.0; 3], &[C64::new(1.0, 0.0)]);
    let psi = StateVector::from_fn(&g, 8, 0.0, |s, a| if a == 0 { packet[s] } else { C64::new(0.0, 0.0) });
    let mut worst: f64 = 0.0;
    propagate_observed(&h, &psi, 0.0, 100.0 * c.dt, 100, Method::CrankNicolson, |_, s| {
        worst = worst.max(max_of(s.data().chunks(8).flat_map(|ch| ch[2..].iter().map(|v| v.norm()))));
        Ok(())
    })?;
    Ok(worst)
}

fn evolution_cn_unitarity(c: &SuiteConfig) -> Result<f64> {
    let (h, psi, _) = random_hermitian_system(c, 1)?;
    let tr = propagate(&h, &psi, 0.0, 0.5, 10, Method::CrankNicolson)?;
    Ok(tr.norm_drift() / tr.norms[0])
}

fn evolution_composition(c: &SuiteConfig) -> Result<f64> {
    let (h, _, _) = random_hermitian_system(c, 2)?;
    let u31 = propagator_matrix(&h, 1.0, 0.0, 100)?;
    let u32 = propagator_matrix(&h, 1.0, 0.3, 70)?;
    let u21 = propagator_matrix(&h, 0.3, 0.0, 30)?;
    Ok(linalg::max_abs_diff(&u31, &(u32 * u21)))
}

fn evolution_harmonic_period(_: &SuiteConfig) -> Result<f64> {
    let w = 1.0;
    let h = harmonic_companion(w)?;
    let period = 2.0 * std::f64::consts::PI / w;
    let psi = StateVector::new(Grid::single_site(), 2, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0)?;
    let tr = propagate(&h, &psi, 0.0, period, 1000, Method::CrankNicolson)?;
    Ok(tr.last().distance(&psi)? / psi.norm())
}

fn evolution_convergence_order(_: &SuiteConfig) -> Result<f64> {
    let s = convergence_study(&ConvergenceSubject::Harmonic { omega: 2.0 }, Method::CrankNicolson, 1.0, &[0.02, 0.01, 0.005, 0.0025])?;
    let p = s.order.ok_or_else(|| Error::Missing("no order fitted".into()))?;
    Ok((p - 2.0).abs())
}

fn reduction_frame_covariance(c: &SuiteConfig) -> Result<f64> {
    let h = harmonic_companion(1.0)?;
    let frames = FrameFamily::smooth_random(2, FrameScope::Local, c.seed, 0.5, 2, 1.0)?;
    let psi = StateVector::new(Grid::single_site(), 2, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5)], 0.0)?;
    // the mismatch is CN truncation, growing like dt²·T; 100 steps over 0.05
    frame_covariance_error(&h, &frames, &psi, FRAME_COVARIANCE_HORIZON, 100)
}

fn bundle_transport_composition(c: &SuiteConfig) -> Result<f64> {
    let (h, _, frames) = random_hermitian_system(c, 3)?;
    let tr = EvolutionTransport::new(frames, Propagator::uniform(&h, 0.0, 1.0, 100, Method::CrankNicolson)?);
    let lhs = tr.matrix(0.9, 0.4)? * tr.matrix(0.4, 0.1)?;
    let id = tr.matrix(0.5, 0.5)?;
    Ok(linalg::max_abs_diff(&lhs, &tr.matrix(0.9, 0.1)?).max(linalg::max_abs_diff(&id, &DMatrix::identity(8, 8))))
}

fn bundle_gamma_identity(c: &SuiteConfig) -> Result<f64> {
    let (h, _, _) = random_hermitian_system(c, 4)?;
    let g = bundle::transport_coefficients_from_hamiltonian(&FrameFamily::identity(), &h, 0.0)?;
    let ex = h.evaluate(0.0)?.to_dense().map(|v| v * C64::new(0.0, -1.0 / h.hbar()));
    Ok(linalg::max_abs_diff(&g, &ex))
}

fn bundle_gamma_routes(c: &SuiteConfig) -> Result<f64> {
    let (h, _, frames) = random_hermitian_system(c, 5)?;
    let u = Propagator::uniform(&h, 0.0, 1.0, 10_000, Method::ExactPerMode)?;
    let tr = EvolutionTransport::new(frames.clone(), u);
    let exact = bundle::transport_coefficients_from_hamiltonian(&frames, &h, 0.3)?;
    let fd = bundle::transport_coefficients_from_transport(&tr, 0.3, 1e-4)?;
    Ok(linalg::spectral_norm(&(fd - &exact)) / linalg::spectral_norm(&exact))
}

fn bundle_gauge_law(c: &SuiteConfig) -> Result<f64> {
    let (h, _, a) = random_hermitian_system(c, 6)?;
    let ht = frame_changed(&h, &a)?;
    let id = FrameFamily::identity();
    let t = 0.7;
    let g = bundle::transport_coefficients_from_hamiltonian(&id, &h, t)?;
    let gt = bundle::transport_coefficients_from_hamiltonian(&id, &ht, t)?;
    let am = a.at(t)?.to_dense(8)?;
    let ainv = linalg::inverse(&am)?;
    let da = a.derivative(t)?.to_dense(8)?;
    Ok(linalg::max_abs_diff(&gt, &(&am * g * &ainv + da * &ainv)))
}

fn bundle_fibre_norm(c: &SuiteConfig) -> Result<f64> {
    let (h, psi, frames) = random_hermitian_system(c, 7)?;
    let tr = propagate(&h, &psi, 0.0, 1.0, 100, Method::CrankNicolson)?;
    let lifting = bundle::lift_trajectory(&frames, &tr, [0.0; 3])?;
    let norms: Vec<f64> = lifting
        .times()
        .iter()
        .zip(lifting.values())
        .map(|(t, v)| bundle::fibre_inner(&frames, *t, v, v).map(|z| z.re))
        .collect::<Result<_>>()?;
    Ok(max_of(norms.iter().map(|n| (n - norms[0]).abs() / norms[0])))
}

fn bundle_mean_values(c: &SuiteConfig) -> Result<f64> {
    let (_, psi, frames) = random_hermitian_system(c, 8)?;
    let a = LatticeOperator::from_dense(&linalg::random_hermitian(8, &mut c.rng(80)), Hermiticity::Hermitian);
    let t = 0.45;
    let means: Vec<C64> = [FrameFamily::identity(), FrameFamily::scalar_phase(0.3, 1.7), frames]
        .iter()
        .map(|f| {
            let lifted = bundle::lift_state(f, &psi, t)?;
            bundle::mean_value(f, &bundle::lift_operator(f, &a, t)?, &lifted, t)
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            worst = worst.max((means[i] - means[j]).norm());
        }
    }
    Ok(worst)
}

fn bundle_derivation_residual(c: &SuiteConfig) -> Result<f64> {
    let (h, psi) = dirac_packet(c)?;
    let frames = FrameFamily::smooth_random(4, FrameScope::Local, c.seed, 0.3, 1, 0.5)?;
    let steps = 20;
    let t_end = steps as f64 * c.dt;
    let tr = propagate(&h, &psi, 0.0, t_end, steps, Method::CrankNicolson)?;
    let lifting = bundle::lift_trajectory(&frames, &tr, [0.0; 3])?;
    let transport = EvolutionTransport::new(frames, Propagator::uniform(&h, 0.0, t_end, steps, Method::CrankNicolson)?);
    let s = 10.0 * c.dt;
    let d = bundle::derivation_along_path(&transport, &h, &lifting, s, c.dt, bundle::DerivationScheme::Coefficients)?;
    Ok(linalg::vec_norm(&d) / lifting.at(s)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = run_invariant_suite(&SuiteConfig::default()).unwrap();
        assert!(r.pass(), "{}", r.to_text());
        assert_eq!(r.checks.len(), CHECKS.len());
        let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, check_names());
    }

    #[test]
    fn zero_tolerance_breaks_unitarity_checks() {
        let cfg = SuiteConfig { tolerance: Some(0.0), only: vec!["dirac.unitarity".into(), "evolution.cn_unitarity".into()], ..SuiteConfig::default() };
        let r = run_invariant_suite(&cfg).unwrap();
        assert_eq!(r.checks.len(), 2);
        assert!(r.checks.iter().all(|c| !c.pass));
    }

    #[test]
    fn selection_by_name_and_prefix() {
        let one = SuiteConfig { only: vec!["dirac.algebra".into()], ..SuiteConfig::default() };
        let r = run_invariant_suite(&one).unwrap();
        assert_eq!(r.checks.len(), 1);
        assert_eq!(r.checks[0].name, "dirac.algebra");
        let prefix = SuiteConfig { only: vec!["maxwell".into()], ..SuiteConfig::default() };
        assert_eq!(run_invariant_suite(&prefix).unwrap().checks.len(), 3);
        let bad = SuiteConfig { only: vec!["nope".into()], ..SuiteConfig::default() };
        assert!(run_invariant_suite(&bad).is_err());
    }

    #[test]
    fn suite_report_is_deterministic() {
        let cfg = SuiteConfig { only: vec!["bundle".into(), "evolution".into()], ..SuiteConfig::default() };
        let a = run_invariant_suite(&cfg).unwrap().to_json_deterministic().unwrap();
        let b = run_invariant_suite(&cfg).unwrap().to_json_deterministic().unwrap();
        assert_eq!(a, b);
    }
}
