use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::linalg;
use crate::C64;

/// A time-stamped complex field with `fibre_dim` components per site,
/// stored site-major (`site * fibre_dim + component`).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    grid: Grid,
    fibre_dim: usize,
    data: Vec<C64>,
    time: f64,
}

impl StateVector {
    pub fn new(grid: Grid, fibre_dim: usize, data: Vec<C64>, time: f64) -> Result<Self> {
        if fibre_dim == 0 {
            return Err(Error::InvalidParameter("fibre dimension must be at least 1".into()));
        }
        if data.len() != grid.num_sites() * fibre_dim {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, expected {} sites x {} components",
                data.len(),
                grid.num_sites(),
                fibre_dim
            )));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("state has non-finite entries".into()));
        }
        Ok(StateVector { grid, fibre_dim, data, time })
    }

    pub fn zeros(grid: &Grid, fibre_dim: usize, time: f64) -> Self {
        StateVector {
            grid: grid.clone(),
            fibre_dim,
            data: vec![C64::new(0.0, 0.0); grid.num_sites() * fibre_dim],
            time,
        }
    }

    /// Builds a state from `f(site, component)`.
    pub fn from_fn(grid: &Grid, fibre_dim: usize, time: f64, f: impl Fn(usize, usize) -> C64) -> Self {
        let data = (0..grid.num_sites())
            .flat_map(|s| (0..fibre_dim).map(move |a| (s, a)))
            .map(|(s, a)| f(s, a))
            .collect();
        StateVector { grid: grid.clone(), fibre_dim, data, time }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn with_data(&self, data: Vec<C64>, time: f64) -> Result<Self> {
        StateVector::new(self.grid.clone(), self.fibre_dim, data, time)
    }

    /// Euclidean norm over all sites and components.
    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.data)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_shape(other)?;
        Ok(linalg::inner(&self.data, &other.data))
    }

    /// `Σ η_a |ψ_a|²` with one sign per fibre component.
    pub fn indefinite_form(&self, metric: &[f64]) -> Result<f64> {
        if metric.len() != self.fibre_dim {
            return Err(Error::DimensionMismatch(format!(
                "metric has {} signs for fibre dimension {}",
                metric.len(),
                self.fibre_dim
            )));
        }
        Ok(self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| metric[i % self.fibre_dim] * v.norm_sqr())
            .sum())
    }

    /// Field of one fibre component.
    pub fn component(&self, a: usize) -> Result<Vec<C64>> {
        if a >= self.fibre_dim {
            return Err(Error::ComponentOutOfRange { index: a, order: self.fibre_dim });
        }
        Ok(self.data.iter().skip(a).step_by(self.fibre_dim).copied().collect())
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(linalg::vec_norm(&linalg::sub(&self.data, &other.data)))
    }

    fn check_same_shape(&self, other: &StateVector) -> Result<()> {
        if self.grid != other.grid || self.fibre_dim != other.fibre_dim {
            return Err(Error::DimensionMismatch("states live on different spaces".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_components() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let s = StateVector::from_fn(&g, 2, 0.5, |site, a| C64::new(site as f64, a as f64));
        assert_eq!(s.data()[3], C64::new(1.0, 1.0));
        assert_eq!(s.component(1).unwrap()[2], C64::new(2.0, 1.0));
        assert!(matches!(s.component(2), Err(Error::ComponentOutOfRange { .. })));
        assert_eq!(s.indefinite_form(&[1.0, -1.0]).unwrap(), 14.0 - 14.0 - 4.0);
    }

    #[test]
    fn rejects_wrong_length() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        assert!(StateVector::new(g, 2, vec![C64::new(0.0, 0.0); 7], 0.0).is_err());
    }
}
