//! Small dense linear algebra: complex Schur form, eigendecomposition,
//! matrix functions and a few helpers shared by the oracles and the bundle
//! layer.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Complex Schur decomposition `A = Z T Z†` with `T` upper triangular.
///
/// Householder reduction to Hessenberg form followed by single-shift QR
/// sweeps with Wilkinson shifts.
pub fn schur(a: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch("schur needs a square matrix".into()));
    }
    let mut h = a.clone();
    let mut z = DMatrix::<C64>::identity(n, n);
    hessenberg(&mut h, &mut z);
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 || n == 1 {
        return Ok((z, h));
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter_since_deflation = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        // find active block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= eps * diag.max(eps * scale) {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter_since_deflation = 0;
            continue;
        }
        total += 1;
        iter_since_deflation += 1;
        if total > 100 * n {
            return Err(Error::Defective("QR iteration did not converge".into()));
        }
        let shift = if iter_since_deflation % 11 == 10 {
            // exceptional shift
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(&mut h, &mut z, lo, hi, shift);
    }
    // clean strictly lower part
    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = ZERO;
        }
    }
    Ok((z, h))
}

fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha_norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 { ONE } else { v[0] / v[0].norm() };
        v[0] += phase * alpha_norm;
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H <- P H P, P = I - 2 v v† / (v†v)
        for j in 0..n {
            let mut s = ZERO;
            for (idx, i) in (k + 1..n).enumerate() {
                s += v[idx].conj() * h[(i, j)];
            }
            let s = s * (2.0 / vnorm2);
            for (idx, i) in (k + 1..n).enumerate() {
                h[(i, j)] -= v[idx] * s;
            }
        }
        for i in 0..n {
            let mut s = ZERO;
            for (idx, j) in (k + 1..n).enumerate() {
                s += h[(i, j)] * v[idx];
            }
            let s = s * (2.0 / vnorm2);
            for (idx, j) in (k + 1..n).enumerate() {
                h[(i, j)] -= s * v[idx].conj();
            }
        }
        for i in 0..n {
            let mut s = ZERO;
            for (idx, j) in (k + 1..n).enumerate() {
                s += z[(i, j)] * v[idx];
            }
            let s = s * (2.0 / vnorm2);
            for (idx, j) in (k + 1..n).enumerate() {
                z[(i, j)] -= s * v[idx].conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Givens rotation `G` with `G [a; b] = [r; 0]`, returned as `(c, s)` for
/// `G = [[c, s], [-s̄, c]]`, `c` real.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = (na * na + nb * nb).sqrt();
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn qr_sweep(h: &mut DMatrix<C64>, z: &mut DMatrix<C64>, lo: usize, hi: usize, shift: C64) {
    let n = h.nrows();
    let mut x = h[(lo, lo)] - shift;
    let mut y = h[(lo + 1, lo)];
    for k in lo..hi {
        let (c, s) = givens(x, y);
        // rows k, k+1
        let col_start = if k > lo { k - 1 } else { lo };
        for j in col_start..n {
            let a = h[(k, j)];
            let b = h[(k + 1, j)];
            h[(k, j)] = a * c + s * b;
            h[(k + 1, j)] = -s.conj() * a + b * c;
        }
        // columns k, k+1
        let row_end = (k + 2).min(hi);
        for i in 0..=row_end {
            let a = h[(i, k)];
            let b = h[(i, k + 1)];
            h[(i, k)] = a * c + b * s.conj();
            h[(i, k + 1)] = -a * s + b * c;
        }
        for i in 0..n {
            let a = z[(i, k)];
            let b = z[(i, k + 1)];
            z[(i, k)] = a * c + b * s.conj();
            z[(i, k + 1)] = -a * s + b * c;
        }
        if k + 1 < hi {
            x = h[(k + 1, k)];
            y = h[(k + 2, k)];
        }
    }
}

/// Eigendecomposition `A = V Λ V⁻¹` of a general complex matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
    /// `V⁻¹`; `None` when the matrix was found defective.
    pub inverse: Option<DMatrix<C64>>,
    /// `‖V Λ V⁻¹ - A‖_max / ‖A‖_max`.
    pub reconstruction_error: f64,
    pub defective: bool,
}

impl Eigen {
    /// Relative reconstruction threshold above which a matrix is flagged
    /// defective.
    pub const RECONSTRUCTION_TOL: f64 = 1e-12;

    pub fn new(a: &DMatrix<C64>) -> Result<Self> {
        let n = a.nrows();
        let (z, t) = schur(a)?;
        let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let degenerate_tol = 1e-10 * scale;
        let mut x = DMatrix::<C64>::zeros(n, n);
        let mut clash = false;
        for i in 0..n {
            let lambda = values[i];
            x[(i, i)] = ONE;
            for j in (0..i).rev() {
                let mut num = ZERO;
                for l in (j + 1)..=i {
                    num += t[(j, l)] * x[(l, i)];
                }
                let den = t[(j, j)] - lambda;
                if den.norm() <= degenerate_tol {
                    if num.norm() > degenerate_tol * 1e2 {
                        clash = true;
                    }
                    x[(j, i)] = ZERO;
                } else {
                    x[(j, i)] = -num / den;
                }
            }
            let norm = x.column(i).norm();
            x.column_mut(i).unscale_mut(norm);
        }
        let vectors = &z * &x;
        let inverse = vectors.clone().try_inverse();
        let amax = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (reconstruction_error, inverse) = match inverse {
            Some(inv) if inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => {
                let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values.clone()));
                let rec = &vectors * lam * &inv;
                let err = (rec - a).iter().map(|v| v.norm()).fold(0.0, f64::max);
                (if amax > 0.0 { err / amax } else { err }, Some(inv))
            }
            _ => (f64::INFINITY, None),
        };
        let defective = clash || !(reconstruction_error <= Self::RECONSTRUCTION_TOL);
        Ok(Eigen {
            values,
            vectors,
            inverse: if defective { None } else { inverse },
            reconstruction_error,
            defective,
        })
    }

    /// `f(A) = V f(Λ) V⁻¹`.
    pub fn apply_function(&self, f: impl Fn(C64) -> C64) -> Result<DMatrix<C64>> {
        let inv = self
            .inverse
            .as_ref()
            .ok_or_else(|| Error::Defective("no eigenbasis for a defective matrix".into()))?;
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fl;
            }
        }
        Ok(scaled * inv)
    }
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn sorted_eigenvalues(a: &DMatrix<C64>) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    let mut v: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(v)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.exp()
}

/// `exp(S)` together with its directional derivative along `dS`, from the
/// block identity `exp([[S, dS], [0, S]]) = [[e^S, D], [0, e^S]]`.
pub fn expm_with_derivative(s: &DMatrix<C64>, ds: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let n = s.nrows();
    let mut big = DMatrix::<C64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(s);
    big.view_mut((n, n), (n, n)).copy_from(s);
    big.view_mut((0, n), (n, n)).copy_from(ds);
    let e = big.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, n)).into_owned())
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &DMatrix<C64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("matrix is not invertible".into()))
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    a.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩`, antilinear in the first slot.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn mat_vec(a: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let x = nalgebra::DVector::from_column_slice(v);
    (a * x).as_slice().to_vec()
}

/// Random complex matrix with entries uniform in the unit square.
pub fn random_matrix(n: usize, m: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    DMatrix::from_fn(n, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random Hermitian matrix `(B + B†)/2`.
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let b = random_matrix(n, n, rng);
    (&b + b.adjoint()).scale(0.5)
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}
