//! Periodic grids and central-difference lattice operators.
//!
//! Sites are ordered row-major with axis 0 fastest. A field with `f` fibre
//! components is stored site-major: component `a` of site `s` lives at index
//! `s * f + a`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::C64;

/// Hermiticity of an operator as declared by its constructor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hermiticity {
    Hermitian,
    AntiHermitian,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: [usize; 3],
    lengths: [f64; 3],
}

impl Grid {
    /// Uniform grid with the same point count and length on every axis.
    pub fn new(dim: usize, points_per_axis: usize, length_per_axis: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        Self::with_axes(&vec![points_per_axis; dim], &vec![length_per_axis; dim])
    }

    pub fn with_axes(points: &[usize], lengths: &[f64]) -> Result<Self> {
        let dim = points.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} lengths for {} axes",
                lengths.len(),
                dim
            )));
        }
        let mut p = [1; 3];
        let mut l = [1.0; 3];
        for axis in 0..dim {
            if points[axis] < 4 || !points[axis].is_multiple_of(2) {
                return Err(Error::InvalidGrid(format!(
                    "points must be even and >= 4, got {} on axis {axis}",
                    points[axis]
                )));
            }
            if !(lengths[axis] > 0.0) || !lengths[axis].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "length must be positive, got {} on axis {axis}",
                    lengths[axis]
                )));
            }
            p[axis] = points[axis];
            l[axis] = lengths[axis];
        }
        Ok(Grid { dim, points: p, lengths: l })
    }

    /// A zero-dimensional grid with one site, used for plain matrix ODEs and
    /// per-mode problems.
    pub fn single_site() -> Self {
        Grid { dim: 0, points: [1; 3], lengths: [1.0; 3] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    pub fn num_sites(&self) -> usize {
        self.points.iter().product()
    }

    pub fn site_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.points[0] * (idx[1] + self.points[1] * idx[2])
    }

    pub fn site_coords(&self, site: usize) -> [usize; 3] {
        let i0 = site % self.points[0];
        let rest = site / self.points[0];
        [i0, rest % self.points[1], rest / self.points[1]]
    }

    /// Neighbour of `site` displaced by `delta` along `axis`, with periodic wrap.
    pub fn shift(&self, site: usize, axis: usize, delta: isize) -> usize {
        let mut idx = self.site_coords(site);
        let n = self.points[axis] as isize;
        idx[axis] = (idx[axis] as isize + delta).rem_euclid(n) as usize;
        self.site_index(idx)
    }

    pub fn position(&self, site: usize) -> [f64; 3] {
        let idx = self.site_coords(site);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Wavenumber of mode `m` on `axis`, folded into `[-π/Δ, π/Δ)`.
    pub fn wavenumber(&self, axis: usize, m: i64) -> f64 {
        if axis >= self.dim {
            return 0.0;
        }
        let n = self.points[axis] as i64;
        let mut mm = m.rem_euclid(n);
        if mm >= n / 2 {
            mm -= n;
        }
        2.0 * PI * mm as f64 / self.lengths[axis]
    }

    pub fn wavevector(&self, mode: [i64; 3]) -> [f64; 3] {
        [
            self.wavenumber(0, mode[0]),
            self.wavenumber(1, mode[1]),
            self.wavenumber(2, mode[2]),
        ]
    }

    /// Discrete momentum `sin(kΔ)/Δ` of the central-difference stencil.
    pub fn discrete_momentum(&self, axis: usize, k: f64) -> f64 {
        if axis >= self.dim {
            return 0.0;
        }
        let d = self.spacing(axis);
        (k * d).sin() / d
    }

    /// All mode indices in site order.
    pub fn modes(&self) -> Vec<[i64; 3]> {
        (0..self.num_sites())
            .map(|s| {
                let c = self.site_coords(s);
                [c[0] as i64, c[1] as i64, c[2] as i64]
            })
            .collect()
    }

    /// Volume element of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }
}

/// Linear operator on fields over the sites of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    grid: Grid,
    fibre_in: usize,
    fibre_out: usize,
    matrix: CsrMatrix,
    hermiticity: Hermiticity,
}

impl LatticeOperator {
    pub fn from_matrix(
        grid: Grid,
        fibre_in: usize,
        fibre_out: usize,
        matrix: CsrMatrix,
        hermiticity: Hermiticity,
    ) -> Result<Self> {
        let n = grid.num_sites();
        if matrix.nrows() != n * fibre_out || matrix.ncols() != n * fibre_in {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} does not fit {} sites with fibres {}->{}",
                matrix.nrows(),
                matrix.ncols(),
                n,
                fibre_in,
                fibre_out
            )));
        }
        if hermiticity != Hermiticity::General && fibre_in != fibre_out {
            return Err(Error::DimensionMismatch(
                "only square operators can be (anti-)Hermitian".into(),
            ));
        }
        Ok(LatticeOperator { grid, fibre_in, fibre_out, matrix, hermiticity })
    }

    /// A dense operator on a single-site grid.
    pub fn from_dense(m: &DMatrix<C64>, hermiticity: Hermiticity) -> Self {
        let (r, c) = m.shape();
        LatticeOperator {
            grid: Grid::single_site(),
            fibre_in: c,
            fibre_out: r,
            matrix: CsrMatrix::from_dense(m),
            hermiticity,
        }
    }

    pub fn identity(grid: &Grid, fibre: usize) -> Self {
        LatticeOperator {
            grid: grid.clone(),
            fibre_in: fibre,
            fibre_out: fibre,
            matrix: CsrMatrix::identity(grid.num_sites() * fibre),
            hermiticity: Hermiticity::Hermitian,
        }
    }

    pub fn zero(grid: &Grid, fibre: usize) -> Self {
        let n = grid.num_sites() * fibre;
        LatticeOperator {
            grid: grid.clone(),
            fibre_in: fibre,
            fibre_out: fibre,
            matrix: CsrMatrix::zeros(n, n),
            hermiticity: Hermiticity::Hermitian,
        }
    }

    /// Pointwise multiplication by a scalar field.
    pub fn multiplication(grid: &Grid, values: &[C64]) -> Result<Self> {
        if values.len() != grid.num_sites() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values for {} sites",
                values.len(),
                grid.num_sites()
            )));
        }
        let real = values.iter().all(|v| v.im == 0.0);
        Ok(LatticeOperator {
            grid: grid.clone(),
            fibre_in: 1,
            fibre_out: 1,
            matrix: CsrMatrix::diagonal(values),
            hermiticity: if real { Hermiticity::Hermitian } else { Hermiticity::General },
        })
    }

    /// The same fibre matrix acting at every site.
    pub fn local(grid: &Grid, fibre_matrix: &DMatrix<C64>, hermiticity: Hermiticity) -> Self {
        let (r, c) = fibre_matrix.shape();
        LatticeOperator {
            grid: grid.clone(),
            fibre_in: c,
            fibre_out: r,
            matrix: CsrMatrix::identity(grid.num_sites()).kron(fibre_matrix),
            hermiticity,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fibre_in(&self) -> usize {
        self.fibre_in
    }

    pub fn fibre_out(&self) -> usize {
        self.fibre_out
    }

    /// Fibre dimension of a square operator.
    pub fn fibre_dim(&self) -> usize {
        self.fibre_in
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn hermiticity(&self) -> Hermiticity {
        self.hermiticity
    }

    pub fn with_hermiticity(mut self, h: Hermiticity) -> Self {
        self.hermiticity = h;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.is_zero()
    }

    pub fn apply(&self, field: &[C64]) -> Result<Vec<C64>> {
        if field.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "field length {} but operator expects {}",
                field.len(),
                self.matrix.ncols()
            )));
        }
        Ok(self.matrix.matvec(field))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    fn check_same_space(&self, other: &LatticeOperator) -> Result<()> {
        if self.grid != other.grid
            || self.fibre_in != other.fibre_in
            || self.fibre_out != other.fibre_out
        {
            return Err(Error::DimensionMismatch(format!(
                "operators act between different spaces ({}->{} vs {}->{})",
                self.fibre_in, self.fibre_out, other.fibre_in, other.fibre_out
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: C64, other: &LatticeOperator, b: C64) -> Result<Self> {
        self.check_same_space(other)?;
        let real = a.im == 0.0 && b.im == 0.0;
        let hermiticity = if real && self.hermiticity == other.hermiticity {
            self.hermiticity
        } else {
            Hermiticity::General
        };
        Ok(LatticeOperator {
            grid: self.grid.clone(),
            fibre_in: self.fibre_in,
            fibre_out: self.fibre_out,
            matrix: self.matrix.lincomb(a, &other.matrix, b),
            hermiticity,
        })
    }

    pub fn add(&self, other: &LatticeOperator) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        self.lincomb(one, other, one)
    }

    pub fn sub(&self, other: &LatticeOperator) -> Result<Self> {
        self.lincomb(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, a: C64) -> Self {
        let hermiticity = match (self.hermiticity, a.im == 0.0, a.re == 0.0) {
            (h, true, _) => h,
            (Hermiticity::Hermitian, false, true) => Hermiticity::AntiHermitian,
            (Hermiticity::AntiHermitian, false, true) => Hermiticity::Hermitian,
            _ => Hermiticity::General,
        };
        LatticeOperator {
            grid: self.grid.clone(),
            fibre_in: self.fibre_in,
            fibre_out: self.fibre_out,
            matrix: self.matrix.scale(a),
            hermiticity,
        }
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &LatticeOperator) -> Result<Self> {
        if self.grid != other.grid || self.fibre_in != other.fibre_out {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}->{} after {}->{}",
                self.fibre_in, self.fibre_out, other.fibre_in, other.fibre_out
            )));
        }
        Ok(LatticeOperator {
            grid: self.grid.clone(),
            fibre_in: other.fibre_in,
            fibre_out: self.fibre_out,
            matrix: self.matrix.matmul(&other.matrix),
            hermiticity: Hermiticity::General,
        })
    }

    pub fn adjoint(&self) -> Self {
        LatticeOperator {
            grid: self.grid.clone(),
            fibre_in: self.fibre_out,
            fibre_out: self.fibre_in,
            matrix: self.matrix.adjoint(),
            hermiticity: self.hermiticity,
        }
    }

    /// Tensor a scalar (fibre 1) operator with a fibre matrix.
    pub fn kron_fibre(&self, fibre_matrix: &DMatrix<C64>) -> Result<Self> {
        if self.fibre_in != 1 || self.fibre_out != 1 {
            return Err(Error::DimensionMismatch(
                "kron_fibre needs a scalar operator".into(),
            ));
        }
        let (r, c) = fibre_matrix.shape();
        let herm_fibre = r == c && (fibre_matrix - fibre_matrix.adjoint()).iter().all(|v| *v == C64::new(0.0, 0.0));
        let hermiticity = if herm_fibre && self.hermiticity == Hermiticity::Hermitian {
            Hermiticity::Hermitian
        } else {
            Hermiticity::General
        };
        Ok(LatticeOperator {
            grid: self.grid.clone(),
            fibre_in: c,
            fibre_out: r,
            matrix: self.matrix.kron(fibre_matrix),
            hermiticity,
        })
    }

    /// Assembles a block operator. `blocks[i][j]` maps fibre block `j` to
    /// fibre block `i`; `None` is a zero block. Block fibre sizes are taken
    /// from the supplied operators and must be consistent across rows and
    /// columns.
    pub fn from_blocks(grid: &Grid, blocks: &[Vec<Option<LatticeOperator>>]) -> Result<Self> {
        let nr = blocks.len();
        if nr == 0 {
            return Err(Error::DimensionMismatch("empty block layout".into()));
        }
        let nc = blocks[0].len();
        if blocks.iter().any(|row| row.len() != nc) {
            return Err(Error::DimensionMismatch("ragged block layout".into()));
        }
        let mut row_dims = vec![None; nr];
        let mut col_dims = vec![None; nc];
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(op) = b {
                    if op.grid != *grid {
                        return Err(Error::DimensionMismatch(format!("block ({i},{j}) on another grid")));
                    }
                    for (slot, d, what) in [
                        (&mut row_dims[i], op.fibre_out, "row"),
                        (&mut col_dims[j], op.fibre_in, "column"),
                    ] {
                        match slot {
                            None => *slot = Some(d),
                            Some(prev) if *prev != d => {
                                return Err(Error::DimensionMismatch(format!(
                                    "block ({i},{j}) {what} fibre {d} disagrees with {prev}"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        let row_dims: Vec<usize> = row_dims
            .into_iter()
            .enumerate()
            .map(|(i, d)| d.ok_or_else(|| Error::DimensionMismatch(format!("block row {i} is empty"))))
            .collect::<Result<_>>()?;
        let col_dims: Vec<usize> = col_dims
            .into_iter()
            .enumerate()
            .map(|(j, d)| d.ok_or_else(|| Error::DimensionMismatch(format!("block column {j} is empty"))))
            .collect::<Result<_>>()?;
        let fout: usize = row_dims.iter().sum();
        let fin: usize = col_dims.iter().sum();
        let row_off: Vec<usize> = offsets(&row_dims);
        let col_off: Vec<usize> = offsets(&col_dims);
        let mut trips = Vec::new();
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(op) = b {
                    let (bo, bi) = (op.fibre_out, op.fibre_in);
                    for (r, c, v) in op.matrix.triplets() {
                        let (sr, ar) = (r / bo, r % bo);
                        let (sc, ac) = (c / bi, c % bi);
                        trips.push((sr * fout + row_off[i] + ar, sc * fin + col_off[j] + ac, v));
                    }
                }
            }
        }
        let n = grid.num_sites();
        Ok(LatticeOperator {
            grid: grid.clone(),
            fibre_in: fin,
            fibre_out: fout,
            matrix: CsrMatrix::from_triplets(n * fout, n * fin, trips),
            hermiticity: Hermiticity::General,
        })
    }

    /// Largest entry of `A - A†` (or `A + A†` for anti-Hermitian operators).
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.matrix.adjoint();
        match self.hermiticity {
            Hermiticity::AntiHermitian => self.matrix.add(&adj).max_abs(),
            _ => self.matrix.sub(&adj).max_abs(),
        }
    }

    /// Checks that every row has the same offset pattern as the row of the
    /// same fibre component at site 0.
    pub fn is_translation_invariant(&self) -> bool {
        let g = &self.grid;
        let n = g.num_sites();
        let (fo, fi) = (self.fibre_out, self.fibre_in);
        for s in 0..n {
            for a in 0..fo {
                let (cols, vals) = self.matrix.row(s * fo + a);
                let (cols0, vals0) = self.matrix.row(a);
                if cols.len() != cols0.len() {
                    return false;
                }
                for (&c0, &v0) in cols0.iter().zip(vals0) {
                    let target = translate_site(g, c0 / fi, s) * fi + c0 % fi;
                    match cols.binary_search(&target) {
                        Ok(k) if vals[k] == v0 => {}
                        _ => return false,
                    }
                }
            }
        }
        true
    }

    /// Symbol of a translation-invariant operator at wavevector `k`: the
    /// `fibre_out × fibre_in` matrix `H_k` with `H (v e^{ik·x}) = (H_k v) e^{ik·x}`.
    pub fn mode_matrix(&self, k: [f64; 3]) -> Result<DMatrix<C64>> {
        if !self.is_translation_invariant() {
            return Err(Error::NotTranslationInvariant(
                "mode matrices need a stencil that is the same at every site".into(),
            ));
        }
        Ok(self.mode_matrix_unchecked(k))
    }

    pub(crate) fn mode_matrix_unchecked(&self, k: [f64; 3]) -> DMatrix<C64> {
        let (fo, fi) = (self.fibre_out, self.fibre_in);
        let mut m = DMatrix::zeros(fo, fi);
        for a in 0..fo {
            let (cols, vals) = self.matrix.row(a);
            for (&c, &v) in cols.iter().zip(vals) {
                let x = self.grid.position(c / fi);
                let phase: f64 = (0..3).map(|ax| k[ax] * x[ax]).sum();
                m[(a, c % fi)] += v * C64::from_polar(1.0, phase);
            }
        }
        m
    }
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    dims.iter()
        .map(|d| {
            let o = acc;
            acc += d;
            o
        })
        .collect()
}

/// Site `site` translated by the coordinates of `by`.
fn translate_site(g: &Grid, site: usize, by: usize) -> usize {
    let a = g.site_coords(site);
    let b = g.site_coords(by);
    let mut idx = [0; 3];
    for axis in 0..3 {
        idx[axis] = (a[axis] + b[axis]) % g.points[axis];
    }
    g.site_index(idx)
}

/// Central difference `(f(x+Δ) - f(x-Δ)) / 2Δ` along `axis`, without any
/// prefactor. Anti-Hermitian.
pub fn central_difference(grid: &Grid, axis: usize) -> Result<LatticeOperator> {
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: grid.dim() });
    }
    let h = 1.0 / (2.0 * grid.spacing(axis));
    let n = grid.num_sites();
    let trips = (0..n).flat_map(|s| {
        [
            (s, grid.shift(s, axis, 1), C64::new(h, 0.0)),
            (s, grid.shift(s, axis, -1), C64::new(-h, 0.0)),
        ]
    });
    LatticeOperator::from_matrix(
        grid.clone(),
        1,
        1,
        CsrMatrix::from_triplets(n, n, trips),
        Hermiticity::AntiHermitian,
    )
}

/// Momentum `p = -iħ ∂` along `axis` realised with central differences.
pub fn momentum_op(grid: &Grid, axis: usize, hbar: f64) -> Result<LatticeOperator> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
    }
    Ok(central_difference(grid, axis)?
        .scale(C64::new(0.0, -hbar))
        .with_hermiticity(Hermiticity::Hermitian))
}

/// Compact three-point Laplacian `Σ (f(x+Δ) - 2f + f(x-Δ)) / Δ²`.
pub fn laplacian_op(grid: &Grid) -> Result<LatticeOperator> {
    if grid.dim() == 0 {
        return Err(Error::InvalidGrid("laplacian needs at least one axis".into()));
    }
    let n = grid.num_sites();
    let mut trips = Vec::with_capacity(3 * n * grid.dim());
    for axis in 0..grid.dim() {
        let w = 1.0 / grid.spacing(axis).powi(2);
        for s in 0..n {
            trips.push((s, s, C64::new(-2.0 * w, 0.0)));
            trips.push((s, grid.shift(s, axis, 1), C64::new(w, 0.0)));
            trips.push((s, grid.shift(s, axis, -1), C64::new(w, 0.0)));
        }
    }
    LatticeOperator::from_matrix(
        grid.clone(),
        1,
        1,
        CsrMatrix::from_triplets(n, n, trips),
        Hermiticity::Hermitian,
    )
}

/// `Σ_i p_i²` from the momentum stencil, i.e. `-ħ² Σ D_i²`. Its symbol is
/// `ħ² |k̃|²`, which is the dispersion variable used by all the models.
pub fn momentum_squared_op(grid: &Grid, hbar: f64) -> Result<LatticeOperator> {
    let mut acc = LatticeOperator::zero(grid, 1);
    for axis in 0..grid.dim() {
        let p = momentum_op(grid, axis, hbar)?;
        acc = acc.add(&p.compose(&p)?)?;
    }
    Ok(acc.with_hermiticity(Hermiticity::Hermitian))
}

fn require_3d(grid: &Grid, what: &str) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::InvalidGrid(format!("{what} needs dim = 3, got {}", grid.dim())));
    }
    Ok(())
}

/// Curl of a 3-vector field (fibre 3 → fibre 3) with central differences.
pub fn curl_op(grid: &Grid) -> Result<LatticeOperator> {
    require_3d(grid, "curl")?;
    let d: Vec<LatticeOperator> = (0..3).map(|a| central_difference(grid, a)).collect::<Result<_>>()?;
    let neg = |op: &LatticeOperator| op.scale(C64::new(-1.0, 0.0));
    let blocks = vec![
        vec![None, Some(neg(&d[2])), Some(d[1].clone())],
        vec![Some(d[2].clone()), None, Some(neg(&d[0]))],
        vec![Some(neg(&d[1])), Some(d[0].clone()), None],
    ];
    Ok(LatticeOperator::from_blocks(grid, &blocks)?.with_hermiticity(Hermiticity::Hermitian))
}

/// Divergence of a 3-vector field (fibre 3 → fibre 1).
pub fn div_op(grid: &Grid) -> Result<LatticeOperator> {
    require_3d(grid, "div")?;
    let blocks = vec![(0..3)
        .map(|a| central_difference(grid, a).map(Some))
        .collect::<Result<Vec<_>>>()?];
    LatticeOperator::from_blocks(grid, &blocks)
}

/// Gradient of a scalar field (fibre 1 → fibre 3).
pub fn grad_op(grid: &Grid) -> Result<LatticeOperator> {
    require_3d(grid, "grad")?;
    let blocks = (0..3)
        .map(|a| central_difference(grid, a).map(|d| vec![Some(d)]))
        .collect::<Result<Vec<_>>>()?;
    LatticeOperator::from_blocks(grid, &blocks)
}

/// Discrete Fourier transform of a fibre field:
/// `f̂(m, a) = Σ_x f(x, a) e^{-i k_m · x}`, modes in site order.
pub fn fourier_forward(grid: &Grid, fibre: usize, field: &[C64]) -> Vec<C64> {
    dft(grid, fibre, field, -1.0)
}

/// Inverse of [`fourier_forward`].
pub fn fourier_inverse(grid: &Grid, fibre: usize, coeffs: &[C64]) -> Vec<C64> {
    let n = grid.num_sites() as f64;
    dft(grid, fibre, coeffs, 1.0).into_iter().map(|v| v / n).collect()
}

// Separable direct transform, one axis at a time.
fn dft(grid: &Grid, fibre: usize, input: &[C64], sign: f64) -> Vec<C64> {
    assert_eq!(input.len(), grid.num_sites() * fibre, "dft: field length");
    let mut data = input.to_vec();
    for axis in 0..grid.dim() {
        let n = grid.points(axis);
        let twiddle: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); data.len()];
        for s in 0..grid.num_sites() {
            let idx = grid.site_coords(s);
            let m = idx[axis];
            for j in 0..n {
                let mut src = idx;
                src[axis] = j;
                let t = twiddle[(m * j) % n];
                let base = grid.site_index(src) * fibre;
                for a in 0..fibre {
                    out[s * fibre + a] += t * data[base + a];
                }
            }
        }
        data = out;
    }
    data
}

/// Plane wave `v e^{ik·x}` on the grid for mode `mode`.
pub fn plane_wave(grid: &Grid, mode: [i64; 3], spinor: &[C64]) -> Vec<C64> {
    let k = grid.wavevector(mode);
    let f = spinor.len();
    let mut out = Vec::with_capacity(grid.num_sites() * f);
    for s in 0..grid.num_sites() {
        let x = grid.position(s);
        let ph = C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
        out.extend(spinor.iter().map(|&v| v * ph));
    }
    out
}
