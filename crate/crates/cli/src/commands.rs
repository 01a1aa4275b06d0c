//! Subcommands. Each returns `Ok(true)` when every check it runs passes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use relwave::bundle::{self, Derivation, EvolutionTransport, TransportCoefficients};
use relwave::evolution::io::{atomic_write, fmt_f64, read_snapshot, write_snapshot, write_trajectory_csv};
use relwave::evolution::{propagate, Propagator, Trajectory};
use relwave::harness::{analytic_spectrum, convergence_study, fourier_oracle, gaussian_packet, run_invariant_suite, CheckResult, Report};
use relwave::lattice::{plane_wave, Hermiticity, LatticeOperator};
use relwave::linalg;
use relwave::models::{self, ModelKind};
use relwave::reduction::{companion_hamiltonian, Coefficient, EquationSpec, Hamiltonian};
use relwave::state::StateVector;
use relwave::C64;

use crate::config::{InitialKind, RunConfig};
use crate::expr::parse_coefficient;
use crate::CliError;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output.dir {}: {e}", dir.display())))?;
    }
    atomic_write(path, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json(v: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Failure(e.to_string()))
}

fn hamiltonian(cfg: &RunConfig) -> Result<Hamiltonian, CliError> {
    let grid = cfg.grid()?;
    let pot = cfg.potentials(&grid)?;
    Ok(models::build(cfg.model.name, &grid, &cfg.params()?, &pot)?)
}

fn default_spinor(f: usize) -> Vec<C64> {
    (0..f).map(|a| C64::new(1.0 / (a + 1) as f64, 0.25 * a as f64)).collect()
}

/// The initial state described by `[initial]`, at `evolution.t0`.
pub fn initial_state(cfg: &RunConfig, h: &Hamiltonian) -> Result<StateVector, CliError> {
    let grid = h.grid();
    let f = h.fibre_dim();
    let i = &cfg.initial;
    let t0 = cfg.evolution.t0;
    let spinor = match &i.spinor {
        Some(s) => s.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
        None => default_spinor(f),
    };
    if spinor.len() != f {
        return Err(CliError::Config(format!("initial.spinor: needs {f} entries for {}", cfg.model.name.name())));
    }
    let data = match i.kind {
        InitialKind::Gaussian => {
            let mut center = [0.0; 3];
            let mut k0 = [0.0; 3];
            for a in 0..grid.dim() {
                center[a] = 0.5 * grid.length(a);
                k0[a] = grid.wavenumber(a, i.mode[a]);
            }
            let center = i.center.unwrap_or(center);
            let width = i.width.unwrap_or(grid.length(0) / 10.0);
            gaussian_packet(grid, center, width, k0, &spinor)
        }
        InitialKind::PlaneWave => {
            let v = plane_wave(grid, i.mode, &spinor);
            let n = linalg::vec_norm(&v);
            if n == 0.0 {
                return Err(CliError::Config("initial.spinor: must not be zero".into()));
            }
            v.iter().map(|x| x / n).collect()
        }
        InitialKind::Snapshot => {
            let path = cfg.resolve(i.path.as_deref().unwrap_or(Path::new("")));
            let bytes = fs::read(&path).map_err(|e| CliError::Config(format!("initial.path {}: {e}", path.display())))?;
            let s = read_snapshot(bytes.as_slice()).map_err(|e| CliError::Config(format!("initial.path: {e}")))?;
            if s.grid() != grid || s.fibre_dim() != f {
                return Err(CliError::Config("initial.path: snapshot grid or fibre does not match the model".into()));
            }
            s.into_data()
        }
    };
    Ok(StateVector::new(grid.clone(), f, data, t0)?)
}

fn triplets_text(op: &LatticeOperator) -> String {
    let m = op.matrix();
    let mut s = String::from("%%MatrixMarket matrix coordinate complex general\n");
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (r, c, v) in m.triplets() {
        let _ = writeln!(s, "{} {} {} {}", r + 1, c + 1, fmt_f64(v.re), fmt_f64(v.im));
    }
    s
}

#[derive(Serialize)]
struct GridDescriptor {
    dim: usize,
    points: Vec<usize>,
    lengths: Vec<f64>,
}

#[derive(Serialize)]
struct SystemDescriptor {
    source: String,
    order: usize,
    component_dim: usize,
    fibre_dim: usize,
    grid: GridDescriptor,
    total_dim: usize,
    hbar: f64,
    coefficients: Vec<String>,
    companion: &'static str,
    time_dependent: bool,
    evaluated_at: f64,
    nnz: usize,
}

fn equation_spec(cfg: &RunConfig) -> Result<(String, EquationSpec), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    if let Some(eq) = &cfg.equation {
        let coeffs = eq
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, text)| {
                parse_coefficient(text, &grid, params.hbar)
                    .map(Coefficient::Constant)
                    .map_err(|e| CliError::Config(format!("equation.coefficients[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec = EquationSpec::new(grid, 1, params.hbar, coeffs)?;
        if let Some(names) = &eq.names {
            spec = spec.with_names(names.clone())?;
        }
        return Ok(("equation".into(), spec));
    }
    let kind = cfg.model.name;
    let pot = cfg.potentials(&grid)?;
    let spec = match kind {
        ModelKind::KgCanonical | ModelKind::KgFeshbachVillars | ModelKind::KgFiveComponent => {
            models::kg_equation_spec(&grid, &params, &pot)?
        }
        _ => {
            // first order already: f₀ = -(i/ħ) H
            let h = models::build(kind, &grid, &params, &pot)?;
            let k = C64::new(0.0, -1.0 / params.hbar);
            let f = h.fibre_dim();
            let coeff = if h.is_constant() {
                Coefficient::Constant(h.evaluate(0.0)?.scale(k).with_hermiticity(Hermiticity::General))
            } else {
                Coefficient::time_dependent(move |t| Ok(h.evaluate(t)?.scale(k).with_hermiticity(Hermiticity::General)))
            };
            EquationSpec::new(grid, f, params.hbar, vec![coeff])?.with_names(vec!["f0".into()])?
        }
    };
    Ok((kind.name().to_string(), spec))
}

pub fn reduce(cfg: &RunConfig) -> Result<bool, CliError> {
    let (source, spec) = equation_spec(cfg)?;
    let t = cfg.evolution.t0;
    let op = companion_hamiltonian(&spec, t)?;
    let grid = spec.grid();
    let desc = SystemDescriptor {
        source,
        order: spec.order(),
        component_dim: spec.component_dim(),
        fibre_dim: op.fibre_dim(),
        grid: GridDescriptor {
            dim: grid.dim(),
            points: (0..grid.dim()).map(|a| grid.points(a)).collect(),
            lengths: (0..grid.dim()).map(|a| grid.length(a)).collect(),
        },
        total_dim: op.size(),
        hbar: spec.hbar(),
        coefficients: spec.names().to_vec(),
        companion: if spec.order() == 1 { "none" } else { "block" },
        time_dependent: !spec.is_constant(),
        evaluated_at: t,
        nnz: op.matrix().nnz(),
    };
    write_file(&cfg.output_path("_hamiltonian.mtx"), triplets_text(&op).as_bytes())?;
    write_file(&cfg.output_path("_system.json"), to_json(&desc)?.as_bytes())?;
    println!("order {} companion {} dimension {} nonzeros {}", desc.order, desc.companion, desc.total_dim, desc.nnz);
    Ok(true)
}

fn thin(tr: Trajectory, stride: usize) -> Trajectory {
    let last = tr.len() - 1;
    let keep = |i: usize| i.is_multiple_of(stride) || i == last;
    let pick = |v: Vec<_>| v.into_iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| x).collect();
    Trajectory {
        method: tr.method,
        times: pick_f64(&tr.times, keep),
        norms: pick_f64(&tr.norms, keep),
        forms: tr.forms.as_ref().map(|f| pick_f64(f, keep)),
        states: pick(tr.states),
    }
}

fn pick_f64(v: &[f64], keep: impl Fn(usize) -> bool) -> Vec<f64> {
    v.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| *x).collect()
}

pub fn evolve(cfg: &RunConfig) -> Result<bool, CliError> {
    let h = hamiltonian(cfg)?;
    let psi = initial_state(cfg, &h)?;
    let e = &cfg.evolution;
    let tr = propagate(&h, &psi, e.t0, e.t1, e.steps, e.method)?;
    let drift = tr.norm_drift();
    let form = tr.form_drift();
    let last = tr.last().clone();
    let tr = thin(tr, e.stride);
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &tr, cfg.output.columns)?;
    write_file(&cfg.output_path("_trajectory.csv"), &csv)?;
    if cfg.output.snapshot {
        let mut snap = Vec::new();
        write_snapshot(&mut snap, &last)?;
        write_file(&cfg.output_path("_final.snap"), &snap)?;
    }
    print!("{} {} steps of {}: norm drift {drift:.3e}", cfg.model.name.name(), e.steps, e.method.name());
    match form {
        Some(f) => println!(", form drift {f:.3e}"),
        None => println!(),
    }
    Ok(true)
}

fn sample_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
}

pub fn transport(cfg: &RunConfig) -> Result<bool, CliError> {
    let h = hamiltonian(cfg)?;
    let f = h.fibre_dim();
    let frames = cfg.frames(f)?;
    let e = &cfg.evolution;
    let b = &cfg.bundle;
    let dt = e.dt();
    let ratio = b.epsilon / dt;
    let m = ratio.round() as usize;
    if m == 0 || (ratio - m as f64).abs() > 1e-9 * ratio || m > e.steps {
        return Err(CliError::Config(format!(
            "bundle.epsilon: {} must be a multiple of the time step {dt} within the span",
            b.epsilon
        )));
    }
    if b.richardson && !m.is_multiple_of(2) {
        return Err(CliError::Config("bundle.epsilon: Richardson extrapolation needs an even multiple of the time step".into()));
    }

    let gamma = TransportCoefficients::from_hamiltonian(&frames, &h, &sample_times(e.t0, e.t1, b.samples))?;
    let mut buf = Vec::new();
    gamma.write_csv(&mut buf)?;
    write_file(&cfg.output_path("_gamma.csv"), &buf)?;

    let psi = initial_state(cfg, &h)?;
    let tr = propagate(&h, &psi, e.t0, e.t1, e.steps, e.method)?;
    let lifting = bundle::lift_trajectory(&frames, &tr, [0.0; 3])?;
    let transport = EvolutionTransport::new(frames.clone(), Propagator::uniform(&h, e.t0, e.t1, e.steps, e.method)?);
    let derivation = Derivation::new(transport.clone(), h.clone(), b.scheme).with_richardson(b.richardson);
    let mut idx: Vec<usize> = (0..b.samples).map(|k| ((k * (e.steps - m)) as f64 / (b.samples - 1) as f64).round() as usize).collect();
    idx.dedup();
    let mut residual_csv = String::from("t,residual,norm\n");
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let s = tr.times[i];
        let d = derivation.apply(&lifting, s, b.epsilon)?;
        let n = lifting.values()[i].norm();
        let r = linalg::vec_norm(&d) / n;
        worst = worst.max(r);
        let _ = writeln!(residual_csv, "{},{},{}", fmt_f64(s), fmt_f64(r), fmt_f64(n));
    }
    write_file(&cfg.output_path("_lifting_residual.csv"), residual_csv.as_bytes())?;

    let mut checks = vec![CheckResult::at_most("transport.derivation_residual", worst, b.residual_tolerance, 0.0)
        .with_note(format!("max ||D Psi||/||Psi|| at epsilon {:e}", b.epsilon))];
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let probes: Vec<StateVector> = (0..4)
        .map(|_| StateVector::new(h.grid().clone(), f, linalg::random_vector(h.grid().num_sites() * f, &mut rng), e.t0))
        .collect::<Result<_, _>>()?;
    let mid = tr.times[e.steps / 2];
    let (mut comp, mut ident): (f64, f64) = (0.0, 0.0);
    for p in &probes {
        let direct = transport.apply(e.t1, e.t0, p)?;
        let split = transport.apply(e.t1, mid, &transport.apply(mid, e.t0, p)?)?;
        comp = comp.max(direct.distance(&split)? / p.norm());
        ident = ident.max(transport.apply(mid, mid, p)?.distance(p)? / p.norm());
    }
    checks.push(CheckResult::at_most("transport.composition", comp, 1e-10, 0.0));
    checks.push(CheckResult::at_most("transport.identity", ident, 1e-12, 0.0));
    if h.hermiticity() == Hermiticity::Hermitian {
        let norms: Vec<f64> = lifting
            .times()
            .iter()
            .zip(lifting.values())
            .map(|(t, v)| bundle::fibre_inner(&frames, *t, v, v).map(|z| z.re.sqrt()))
            .collect::<Result<_, _>>()?;
        let drift = norms.iter().map(|n| (n - norms[0]).abs() / norms[0]).fold(0.0, f64::max);
        checks.push(CheckResult::at_most("transport.fibre_norm", drift, 1e-10, 0.0));
    }
    finish_report(cfg, "_transport", Report::new(checks))
}

fn finish_report(cfg: &RunConfig, suffix: &str, report: Report) -> Result<bool, CliError> {
    print!("{}", report.to_text());
    let mut stable = report.clone();
    stable.checks.iter_mut().for_each(|c| c.seconds = 0.0);
    write_file(&cfg.output_path(&format!("{suffix}.json")), (stable.to_json()? + "\n").as_bytes())?;
    write_file(&cfg.output_path(&format!("{suffix}.txt")), stable.to_text().as_bytes())?;
    Ok(report.pass())
}

pub fn verify(cfg: &RunConfig) -> Result<bool, CliError> {
    let suite = cfg.suite_config();
    suite.validate().map_err(|e| CliError::Config(format!("verify: {e}")))?;
    let report = run_invariant_suite(&suite)?;
    finish_report(cfg, "_verify", report)
}

pub fn oracle(cfg: &RunConfig) -> Result<bool, CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let pot = cfg.potentials(&grid)?;
    let free = pot.is_zero();
    let mut out = String::from("mode_x,mode_y,mode_z,k_tilde2,index,re,im,analytic,defective\n");
    let mut worst: f64 = 0.0;
    for mode in grid.modes() {
        let o = fourier_oracle(cfg.model.name, &params, &grid, &pot, mode)?;
        let exact = free.then(|| analytic_spectrum(o.model, &params, &grid, o.k));
        for (j, v) in o.spectrum().iter().enumerate() {
            let analytic = match &exact {
                Some(ex) => {
                    worst = worst.max((v - C64::new(ex[j], 0.0)).norm());
                    fmt_f64(ex[j])
                }
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{j},{},{},{analytic},{}",
                mode[0],
                mode[1],
                mode[2],
                fmt_f64(o.k_tilde2),
                fmt_f64(v.re),
                fmt_f64(v.im),
                o.is_defective()
            );
        }
    }
    write_file(&cfg.output_path("_spectra.csv"), out.as_bytes())?;
    if free {
        println!("{} modes, max deviation from the closed form {worst:.3e}", grid.num_sites());
    } else {
        println!("{} modes", grid.num_sites());
    }
    Ok(true)
}

pub fn convergence(cfg: &RunConfig) -> Result<bool, CliError> {
    let c = &cfg.convergence;
    let study = convergence_study(&cfg.convergence_subject()?, cfg.evolution.method, c.total_time, &c.dts)?;
    let mut csv = String::from("dt,error,norm_drift\n");
    for ((dt, e), d) in study.dts.iter().zip(&study.errors).zip(&study.norm_drifts) {
        let _ = writeln!(csv, "{},{},{}", fmt_f64(*dt), fmt_f64(*e), fmt_f64(*d));
    }
    write_file(&cfg.output_path("_convergence.csv"), csv.as_bytes())?;
    write_file(&cfg.output_path("_convergence_study.json"), to_json(&study)?.as_bytes())?;
    finish_report(cfg, "_convergence", study.report(c.expected_order, c.band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    #[test]
    fn default_initial_state_is_normalized() {
        let cfg = parse("[grid]\npoints = 16\n", Path::new("."), &[]).unwrap();
        let h = hamiltonian(&cfg).unwrap();
        let s = initial_state(&cfg, &h).unwrap();
        assert!((s.norm() - 1.0).abs() <= 1e-14);
        assert_eq!(s.fibre_dim(), 4);
    }

    #[test]
    fn first_order_models_reduce_to_themselves() {
        let cfg = parse("[grid]\npoints = 8\n", Path::new("."), &[]).unwrap();
        let (_, spec) = equation_spec(&cfg).unwrap();
        assert_eq!(spec.order(), 1);
        let op = companion_hamiltonian(&spec, 0.0).unwrap();
        let h = hamiltonian(&cfg).unwrap().evaluate(0.0).unwrap();
        assert!(op.matrix().max_abs_diff(h.matrix()) <= 1e-15);
    }

    #[test]
    fn thinning_keeps_the_last_sample() {
        let cfg = parse("[grid]\npoints = 8\n", Path::new("."), &[]).unwrap();
        let h = hamiltonian(&cfg).unwrap();
        let psi = initial_state(&cfg, &h).unwrap();
        let tr = propagate(&h, &psi, 0.0, 0.1, 10, relwave::evolution::Method::CrankNicolson).unwrap();
        let t = thin(tr, 4);
        assert_eq!(t.times.len(), 4);
        assert_eq!(t.states.len(), 4);
        assert!((t.times[3] - 0.1).abs() < 1e-15);
    }
}
