use serde::{Deserialize, Serialize};

use super::oracle::fourier_oracle;
use super::report::{CheckResult, Report};
use crate::error::{Error, Result};
use crate::evolution::{propagate, Method};
use crate::lattice::{plane_wave, Grid};
use crate::linalg;
use crate::models::{self, ModelKind, PhysicalParams, Potentials};
use crate::reduction::Hamiltonian;
use crate::state::StateVector;
use crate::C64;

/// Errors below this are treated as roundoff; no order is fitted.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// What a convergence study integrates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvergenceSubject {
    /// `φ'' = -ω²φ` in companion form from `φ = 1, φ' = 0`.
    Harmonic { omega: f64 },
    /// A single plane wave of a free model, checked against its mode oracle.
    Model { model: ModelKind, params: PhysicalParams, dim: usize, points: usize, length: f64, mode: [i64; 3] },
}

/// Errors of one method over a halving `dt` ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub method: Method,
    pub total_time: f64,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub norm_drifts: Vec<f64>,
    /// Least-squares slope of `log error` against `log dt`; `None` at the
    /// roundoff floor.
    pub order: Option<f64>,
    pub monotone: bool,
    pub at_floor: bool,
}

/// Slope of the least-squares line through `(log dt, log err)`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> f64 {
    let n = dts.len() as f64;
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn check_ladder(total_time: f64, dts: &[f64]) -> Result<Vec<usize>> {
    if dts.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: dts.len() });
    }
    if !(total_time > 0.0) {
        return Err(Error::InvalidParameter(format!("total time must be positive, got {total_time}")));
    }
    if dts.windows(2).any(|w| ((w[1] / w[0]) - 0.5).abs() > 1e-9) {
        return Err(Error::InvalidParameter("each dt must be half of the previous one".into()));
    }
    dts.iter()
        .map(|&dt| {
            let n = total_time / dt;
            if !(dt > 0.0) || (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
                Err(Error::InvalidParameter(format!("dt = {dt} does not divide the total time {total_time}")))
            } else {
                Ok(n.round() as usize)
            }
        })
        .collect()
}

/// Hamiltonian, initial state and exact final state of a subject.
fn setup(subject: &ConvergenceSubject, total_time: f64) -> Result<(Hamiltonian, StateVector, Vec<C64>)> {
    match subject {
        ConvergenceSubject::Harmonic { omega } => {
            let w = *omega;
            if !(w > 0.0) {
                return Err(Error::InvalidParameter(format!("omega must be positive, got {w}")));
            }
            let h = super::harmonic_companion(w)?;
            let psi = StateVector::new(Grid::single_site(), 2, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.0)?;
            let exact = vec![C64::new((w * total_time).cos(), 0.0), C64::new(-w * (w * total_time).sin(), 0.0)];
            Ok((h, psi, exact))
        }
        ConvergenceSubject::Model { model, params, dim, points, length, mode } => {
            let grid = Grid::new(*dim, *points, *length)?;
            let oracle = fourier_oracle(*model, params, &grid, &Potentials::Zero, *mode)?;
            let f = model.fibre_dim();
            let spinor: Vec<C64> = (0..f).map(|a| C64::new(1.0 / (a + 1) as f64, 0.3 * a as f64)).collect();
            let u = oracle.propagator(total_time)?;
            let exact = plane_wave(&grid, *mode, &linalg::mat_vec(&u, &spinor));
            let psi = StateVector::new(grid.clone(), f, plane_wave(&grid, *mode, &spinor), 0.0)?;
            let h = models::build(*model, &grid, params, &Potentials::Zero)?;
            Ok((h, psi, exact))
        }
    }
}

/// Integrates `subject` to `total_time` with each `dt` of a halving ladder
/// and compares with the exact solution.
pub fn convergence_study(
    subject: &ConvergenceSubject,
    method: Method,
    total_time: f64,
    dt_ladder: &[f64],
) -> Result<ConvergenceStudy> {
    let steps = check_ladder(total_time, dt_ladder)?;
    let (h, psi, exact) = setup(subject, total_time)?;
    let scale = linalg::vec_norm(&exact);
    let mut errors = Vec::new();
    let mut norm_drifts = Vec::new();
    for &n in &steps {
        let tr = propagate(&h, &psi, 0.0, total_time, n, method)?;
        errors.push(linalg::vec_norm(&linalg::sub(tr.last().data(), &exact)) / scale);
        norm_drifts.push(tr.norm_drift() / tr.norms[0]);
    }
    let at_floor = errors.iter().all(|e| *e <= ROUNDOFF_FLOOR);
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let order = (!at_floor).then(|| fit_order(dt_ladder, &errors));
    Ok(ConvergenceStudy {
        method,
        total_time,
        dts: dt_ladder.to_vec(),
        errors,
        norm_drifts,
        order,
        monotone,
        at_floor,
    })
}

impl ConvergenceStudy {
    /// `order` passes when within `band` of `expected`; `monotone` fails on a
    /// non-decreasing error ladder unless the errors sit at the roundoff floor.
    pub fn report(&self, expected: f64, band: f64) -> Report {
        let prefix = format!("convergence.{}", self.method.name());
        let drift = self.norm_drifts.iter().cloned().fold(0.0, f64::max);
        let order = match self.order {
            Some(p) => CheckResult::at_most(format!("{prefix}.order"), (p - expected).abs(), band, 0.0)
                .with_note(format!("fitted order {p:.4}, max relative norm drift {drift:.3e}")),
            None => CheckResult::at_most(
                format!("{prefix}.order"),
                self.errors.iter().cloned().fold(0.0, f64::max),
                ROUNDOFF_FLOOR,
                0.0,
            )
            .with_note("errors at roundoff floor, fit skipped"),
        };
        let increases = self.errors.windows(2).filter(|w| w[1] >= w[0]).count();
        let monotone = if self.at_floor {
            CheckResult::at_most(format!("{prefix}.monotone"), 0.0, 0.0, 0.0).with_note("at roundoff floor")
        } else {
            CheckResult::at_most(format!("{prefix}.monotone"), increases as f64, 0.0, 0.0)
                .with_note("number of dt halvings that did not reduce the error")
        };
        Report::new(vec![order, monotone])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LADDER: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];

    #[test]
    fn crank_nicolson_is_second_order_on_the_harmonic_oracle() {
        let s = convergence_study(&ConvergenceSubject::Harmonic { omega: 2.0 }, Method::CrankNicolson, 1.0, &LADDER).unwrap();
        let p = s.order.unwrap();
        assert!((1.9..=2.1).contains(&p), "{p}");
        assert!(s.monotone);
        assert!(s.report(2.0, 0.1).pass());
    }

    #[test]
    fn exact_method_sits_at_the_floor() {
        let subject = ConvergenceSubject::Model {
            model: ModelKind::Dirac,
            params: PhysicalParams::default(),
            dim: 1,
            points: 8,
            length: 4.0,
            mode: [1, 0, 0],
        };
        let s = convergence_study(&subject, Method::ExactPerMode, 1.0, &LADDER).unwrap();
        assert!(s.at_floor && s.order.is_none());
        assert!(s.report(2.0, 0.1).pass());
    }

    #[test]
    fn explicit_midpoint_is_second_order_but_drifts() {
        let subject = ConvergenceSubject::Model {
            model: ModelKind::Dirac,
            params: PhysicalParams::default(),
            dim: 1,
            points: 8,
            length: 4.0,
            mode: [1, 0, 0],
        };
        let s = convergence_study(&subject, Method::ExplicitMidpoint, 1.0, &LADDER).unwrap();
        let p = s.order.unwrap();
        assert!((1.9..=2.1).contains(&p), "{p}");
        assert!(s.norm_drifts.iter().all(|d| *d > 1e-12));
    }

    #[test]
    fn ladder_validation_and_monotonicity_flag() {
        let h = ConvergenceSubject::Harmonic { omega: 1.0 };
        assert!(convergence_study(&h, Method::CrankNicolson, 1.0, &[0.1, 0.05]).is_err());
        assert!(convergence_study(&h, Method::CrankNicolson, 1.0, &[0.1, 0.04, 0.02]).is_err());
        let fake = ConvergenceStudy {
            method: Method::CrankNicolson,
            total_time: 1.0,
            dts: LADDER.to_vec(),
            errors: vec![1e-3, 2.5e-4, 3e-4, 1e-5],
            norm_drifts: vec![0.0; 4],
            order: Some(fit_order(&LADDER, &[1e-3, 2.5e-4, 3e-4, 1e-5])),
            monotone: false,
            at_floor: false,
        };
        let r = fake.report(2.0, 5.0);
        assert!(!r.get("convergence.crank_nicolson.monotone").unwrap().pass);
        assert!((fit_order(&[0.1, 0.05, 0.025], &[4.0, 1.0, 0.25]) - 2.0).abs() < 1e-12);
    }
}
