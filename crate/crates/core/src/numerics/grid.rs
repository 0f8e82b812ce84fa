use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

pub const MIN_NODES: usize = 64;

/// How the nodes of a [`RadialGrid`] are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridKind<T> {
    Uniform,
    /// Gauss–Lobatto points of `[0, R]`, clustered at both ends.
    Chebyshev,
    /// `r = R·sinh(βs)/sinh(β)` for uniform `s`; clustered at the origin.
    Sinh {
        stretch: T,
    },
}

/// Radial nodes `0 = r₀ < r₁ < … < r_{N−1} = R` for radial functions in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid<T> {
    n: usize,
    kind: GridKind<T>,
    nodes: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn new(n: usize, radius: T, count: usize, kind: GridKind<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension {
                n,
                reason: "radial grid needs n >= 2",
            });
        }
        if count < MIN_NODES {
            return Err(Error::invalid(format!(
                "radial grid needs at least {MIN_NODES} nodes, got {count}"
            )));
        }
        if !(radius > T::zero()) {
            return Err(Error::invalid("radial grid radius must be positive"));
        }
        let last = T::from_usize_(count - 1);
        let nodes: Vec<T> = (0..count)
            .map(|i| {
                let s = T::from_usize_(i) / last;
                let r = match kind {
                    GridKind::Uniform => radius * s,
                    GridKind::Chebyshev => radius * T::lit(0.5) * (T::one() - (T::PI() * s).cos()),
                    GridKind::Sinh { stretch } => radius * (stretch * s).sinh() / stretch.sinh(),
                };
                if i == count - 1 {
                    radius
                } else {
                    r
                }
            })
            .collect();
        if let GridKind::Sinh { stretch } = kind {
            if !(stretch > T::zero()) {
                return Err(Error::invalid("sinh stretch must be positive"));
            }
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid nodes not strictly increasing"));
        }
        Ok(Self { n, kind, nodes })
    }

    pub fn uniform(n: usize, radius: T, count: usize) -> Result<Self> {
        Self::new(n, radius, count, GridKind::Uniform)
    }

    pub fn chebyshev(n: usize, radius: T, count: usize) -> Result<Self> {
        Self::new(n, radius, count, GridKind::Chebyshev)
    }

    pub fn sinh(n: usize, radius: T, count: usize, stretch: T) -> Result<Self> {
        Self::new(n, radius, count, GridKind::Sinh { stretch })
    }

    /// Same distribution with every interval halved; old nodes are kept.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.n, self.radius(), 2 * self.len() - 1, self.kind)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GridKind<T> {
        self.kind
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radius(&self) -> T {
        *self.nodes.last().expect("non-empty grid")
    }

    /// Finite-volume cell measures `|S^{n−1}|(r_{i+½}ⁿ − r_{i−½}ⁿ)/n`, with
    /// half cells at both ends. They sum to the ball volume.
    pub fn cell_volumes(&self) -> Result<Vec<T>> {
        let surface = super::sphere_measure::<T>(self.n)?;
        let nf = T::from_usize_(self.n);
        let nn = self.n as i32;
        let half = T::lit(0.5);
        let k = self.nodes.len();
        Ok((0..k)
            .map(|i| {
                let lo = if i == 0 {
                    T::zero()
                } else {
                    half * (self.nodes[i - 1] + self.nodes[i])
                };
                let hi = if i + 1 == k {
                    self.nodes[i]
                } else {
                    half * (self.nodes[i] + self.nodes[i + 1])
                };
                surface * (hi.powi(nn) - lo.powi(nn)) / nf
            })
            .collect())
    }

    /// Largest spacing between consecutive nodes.
    pub fn max_spacing(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_hold_for_all_kinds() {
        for kind in [
            GridKind::Uniform,
            GridKind::Chebyshev,
            GridKind::Sinh { stretch: 4.0 },
        ] {
            let g = RadialGrid::new(6, 2.0, 65, kind).unwrap();
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(g.radius(), 2.0);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(RadialGrid::<f64>::uniform(6, 1.0, 5).is_err());
        assert!(RadialGrid::<f64>::uniform(6, 1.0, MIN_NODES - 1).is_err());
    }

    #[test]
    fn refinement_is_nested() {
        let g = RadialGrid::<f64>::sinh(6, 1.0, 65, 3.0).unwrap();
        let f = g.refined().unwrap();
        assert_eq!(f.len(), 129);
        for (i, r) in g.nodes().iter().enumerate() {
            assert!((f.nodes()[2 * i] - r).abs() < 1e-15);
        }
    }

    #[test]
    fn cell_volumes_sum_to_ball() {
        let g = RadialGrid::<f64>::chebyshev(6, 1.0, 100).unwrap();
        let total: f64 = g.cell_volumes().unwrap().iter().sum();
        let exact = std::f64::consts::PI.powi(3) / 6.0;
        assert!((total - exact).abs() < 1e-12);
    }
}
