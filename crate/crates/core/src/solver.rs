//! Direct solvers for the implicit time steps: dense LU for small systems
//! and a banded LU with partial pivoting (after reverse Cuthill-McKee
//! reordering) for stencil-structured ones.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::C64;

/// Systems up to this size always use the dense factorization.
pub const DENSE_THRESHOLD: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Auto,
    Dense,
    Banded,
}

#[derive(Clone, Debug)]
enum Factor {
    Dense(LU<C64, Dyn, Dyn>),
    Banded(BandedLu),
}

/// A factorized square system ready for repeated solves.
#[derive(Clone, Debug)]
pub struct LinearSolver {
    n: usize,
    /// `perm[new] = old`; `None` for the natural ordering.
    perm: Option<Vec<usize>>,
    factor: Factor,
}

impl LinearSolver {
    pub fn factorize(a: &CsrMatrix) -> Result<Self> {
        Self::factorize_with(a, SolverChoice::Auto)
    }

    pub fn factorize_with(a: &CsrMatrix, choice: SolverChoice) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "linear system must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let use_dense = match choice {
            SolverChoice::Dense => true,
            SolverChoice::Banded => false,
            SolverChoice::Auto => n <= DENSE_THRESHOLD,
        };
        if use_dense {
            return Self::dense(a);
        }
        let (kl0, ku0) = a.bandwidths();
        let perm = rcm_ordering(a);
        let permuted = a.permute(&perm);
        let (kl1, ku1) = permuted.bandwidths();
        let (matrix, perm, kl, ku) = if kl1 + ku1 < kl0 + ku0 {
            (permuted, Some(perm), kl1, ku1)
        } else {
            (a.clone(), None, kl0, ku0)
        };
        // banded work ~ n kl (kl + ku) against n³/3 for dense
        let banded_cost = (n as f64) * (kl as f64 + 1.0) * ((kl + ku) as f64 + 1.0);
        let dense_cost = (n as f64).powi(3) / 3.0;
        if choice == SolverChoice::Auto && banded_cost > dense_cost {
            return Self::dense(a);
        }
        let factor = BandedLu::factorize(&matrix, kl, ku)?;
        Ok(LinearSolver { n, perm, factor: Factor::Banded(factor) })
    }

    fn dense(a: &CsrMatrix) -> Result<Self> {
        let lu = a.to_dense().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("zero pivot in dense LU".into()));
        }
        Ok(LinearSolver { n: a.nrows(), perm: None, factor: Factor::Dense(lu) })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_banded(&self) -> bool {
        matches!(self.factor, Factor::Banded(_))
    }

    /// Bandwidths `(kl, ku)` of the factored ordering, if banded.
    pub fn bandwidths(&self) -> Option<(usize, usize)> {
        match &self.factor {
            Factor::Banded(b) => Some((b.kl, b.ku)),
            Factor::Dense(_) => None,
        }
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {} for a {}-dimensional system",
                b.len(),
                self.n
            )));
        }
        let x = match &self.factor {
            Factor::Dense(lu) => {
                let rhs = DVector::from_column_slice(b);
                lu.solve(&rhs)
                    .ok_or_else(|| Error::SingularSystem("dense LU solve failed".into()))?
                    .as_slice()
                    .to_vec()
            }
            Factor::Banded(f) => match &self.perm {
                None => f.solve(b.to_vec()),
                Some(perm) => {
                    let pb: Vec<C64> = perm.iter().map(|&old| b[old]).collect();
                    let px = f.solve(pb);
                    let mut x = vec![C64::new(0.0, 0.0); self.n];
                    for (new, &old) in perm.iter().enumerate() {
                        x[old] = px[new];
                    }
                    x
                }
            },
        };
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        Ok(x)
    }
}

/// LU factorization with partial pivoting of a band matrix, stored column
/// by column with `2 kl + ku + 1` rows (the extra `kl` rows hold fill-in
/// from row interchanges).
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factorize(a: &CsrMatrix, kl: usize, ku: usize) -> Result<Self> {
        let n = a.nrows();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for (r, c, v) in a.triplets() {
            if r > c + kl || c > r + ku {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside the declared band ({kl}, {ku})"
                )));
            }
            ab[c * ldab + kv + r - c] = v;
        }
        let at = |r: usize, c: usize| c * ldab + kv + r - c;
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[at(j, j)].norm();
            for t in 1..=km {
                let v = ab[at(j + t, j)].norm();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(at(j, c), at(j + jp, c));
                }
            }
            let piv = ab[at(j, j)];
            for t in 1..=km {
                ab[at(j + t, j)] /= piv;
            }
            for c in j + 1..=ju {
                let u = ab[at(j, c)];
                if u == C64::new(0.0, 0.0) {
                    continue;
                }
                for t in 1..=km {
                    let l = ab[at(j + t, j)];
                    ab[at(j + t, c)] -= l * u;
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ldab, ab, ipiv })
    }

    pub fn solve(&self, mut b: Vec<C64>) -> Vec<C64> {
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        let at = |r: usize, c: usize| c * ldab + kv + r - c;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            for t in 1..=km {
                b[j + t] -= self.ab[at(j + t, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[at(j, j)];
            let bj = b[j];
            for (i, bi) in b.iter_mut().enumerate().take(j).skip(j.saturating_sub(kv)) {
                *bi -= self.ab[at(i, j)] * bj;
            }
        }
        b
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern,
/// returned as `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in a.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree[v])
            .expect("unvisited vertex");
        let root = pseudo_peripheral(&adj, &degree, start, &visited);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> (usize, Vec<usize>) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX && !blocked[w] {
                dist[w] = dist[v] + 1;
                if dist[w] > depth {
                    depth = dist[w];
                    last.clear();
                }
                if dist[w] == depth {
                    last.push(w);
                }
                queue.push_back(w);
            }
        }
    }
    (depth, last)
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], start: usize, blocked: &[bool]) -> usize {
    let mut root = start;
    let (mut depth, mut last) = bfs_levels(adj, root, blocked);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).expect("nonempty level");
        let (d, l) = bfs_levels(adj, cand, blocked);
        if d <= depth {
            break;
        }
        root = cand;
        depth = d;
        last = l;
    }
    root
}

/// Dense helper used by tests and small problems: solves `A x = b`.
pub fn dense_solve(a: &DMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    let lu = a.clone().lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::SingularSystem("dense LU solve failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_vector, vec_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn periodic_tridiagonal(n: usize, rng: &mut impl Rng) -> CsrMatrix {
        let mut trips = Vec::new();
        for i in 0..n {
            let mut r = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            trips.push((i, i, r() + C64::new(0.1, 0.0)));
            trips.push((i, (i + 1) % n, r()));
            trips.push((i, (i + n - 1) % n, r()));
        }
        CsrMatrix::from_triplets(n, n, trips)
    }

    fn residual(a: &CsrMatrix, x: &[C64], b: &[C64]) -> f64 {
        let ax = a.matvec(x);
        vec_norm(&crate::linalg::sub(&ax, b)) / vec_norm(b)
    }

    #[test]
    fn banded_matches_dense_on_periodic_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = periodic_tridiagonal(200, &mut rng);
        let b = random_vector(200, &mut rng);
        let banded = LinearSolver::factorize_with(&a, SolverChoice::Banded).unwrap();
        assert!(banded.is_banded());
        let (kl, ku) = banded.bandwidths().unwrap();
        assert!(kl + ku <= 4, "rcm bandwidth {kl} {ku}");
        let x = banded.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-11);
        let xd = LinearSolver::factorize_with(&a, SolverChoice::Dense).unwrap().solve(&b).unwrap();
        assert!(vec_norm(&crate::linalg::sub(&x, &xd)) / vec_norm(&xd) < 1e-10);
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] blocks along the diagonal
        let n = 80;
        let trips = (0..n).map(|i| (i, i ^ 1, C64::new(1.0 + i as f64, 0.0)));
        let a = CsrMatrix::from_triplets(n, n, trips);
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let s = LinearSolver::factorize_with(&a, SolverChoice::Banded).unwrap();
        let x = s.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = CsrMatrix::from_triplets(100, 100, (0..99).map(|i| (i, i, C64::new(1.0, 0.0))));
        assert!(matches!(
            LinearSolver::factorize_with(&a, SolverChoice::Banded),
            Err(Error::SingularSystem(_))
        ));
        assert!(matches!(
            LinearSolver::factorize_with(&a, SolverChoice::Dense),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = periodic_tridiagonal(37 * 2, &mut rng);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..74).collect::<Vec<_>>());
    }
}
