use super::{RadialGrid, Real};
use crate::error::{Error, Result};

/// Finite-difference weights for derivatives `0..=max_order` at `z` on the
/// nodes `x` (Fornberg's recursion). `w[k][j]` multiplies `f(x[j])` in the
/// `k`-th derivative.
pub fn fornberg_weights<T: Real>(z: T, x: &[T], max_order: usize) -> Vec<Vec<T>> {
    let m = x.len();
    let mut c = vec![vec![T::zero(); m]; max_order + 1];
    if m == 0 {
        return c;
    }
    let mut c1 = T::one();
    let mut c4 = x[0] - z;
    c[0][0] = T::one();
    for i in 1..m {
        let mn = i.min(max_order);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 = c2 * c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    let kf = T::from_usize_(k);
                    c[k][i] = c1 * (kf * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                let kf = T::from_usize_(k);
                c[k][j] = (c4 * c[k][j] - kf * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Radial Laplacian `u'' + (n−1)u'/r` at every node, with stencils of
/// `order + 1` points (`order` even).
///
/// Near the origin the stencil reaches into mirrored nodes `−r_j` carrying
/// `u(r_j)`; at `r = 0` the limit `n·u''(0)` is used. Near the outer end the
/// stencil is shifted inward and gains one extra point.
pub fn radial_laplacian<T: Real>(u: &[T], grid: &RadialGrid<T>, order: usize) -> Result<Vec<T>> {
    let r = grid.nodes();
    if u.len() != r.len() {
        return Err(Error::invalid(format!(
            "sample count {} does not match grid size {}",
            u.len(),
            r.len()
        )));
    }
    if order < 2 || order % 2 == 1 {
        return Err(Error::invalid("stencil order must be even and at least 2"));
    }
    let len = r.len();
    let hw = order / 2;
    if len < 2 * hw + 3 {
        return Err(Error::invalid("grid too small for the requested stencil"));
    }
    let nm1 = T::from_usize_(grid.dimension() - 1);
    let nf = T::from_usize_(grid.dimension());
    let mut out = vec![T::zero(); len];
    let mut xs = Vec::with_capacity(2 * hw + 2);
    let mut vs = Vec::with_capacity(2 * hw + 2);
    for i in 0..len {
        xs.clear();
        vs.clear();
        if i + hw < len {
            for k in 0..=2 * hw {
                let j = i as isize + k as isize - hw as isize;
                if j < 0 {
                    xs.push(-r[(-j) as usize]);
                    vs.push(u[(-j) as usize]);
                } else {
                    xs.push(r[j as usize]);
                    vs.push(u[j as usize]);
                }
            }
        } else {
            let start = len - (2 * hw + 2);
            for j in start..len {
                xs.push(r[j]);
                vs.push(u[j]);
            }
        }
        let w = fornberg_weights(r[i], &xs, 2);
        let d1: T = w[1]
            .iter()
            .zip(&vs)
            .fold(T::zero(), |s, (a, b)| s + *a * *b);
        let d2: T = w[2]
            .iter()
            .zip(&vs)
            .fold(T::zero(), |s, (a, b)| s + *a * *b);
        out[i] = if i == 0 {
            nf * d2
        } else {
            d2 + nm1 * d1 / r[i]
        };
    }
    Ok(out)
}

/// Second-order discrete `Δ²u` for radial samples.
pub fn radial_bilaplacian<T: Real>(u: &[T], grid: &RadialGrid<T>) -> Result<Vec<T>> {
    radial_bilaplacian_order(u, grid, 2)
}

/// Discrete `Δ²u = Δ(Δu)` with stencils of the given even order.
pub fn radial_bilaplacian_order<T: Real>(
    u: &[T],
    grid: &RadialGrid<T>,
    order: usize,
) -> Result<Vec<T>> {
    if grid.len() < 5 {
        return Err(Error::invalid("bilaplacian needs at least 5 nodes"));
    }
    let w = radial_laplacian(u, grid, order)?;
    radial_laplacian(&w, grid, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(0.0f64, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn quadratic_is_biharmonic() {
        let g = RadialGrid::<f64>::uniform(6, 1.0, 101).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|r| r * r).collect();
        let lap = radial_laplacian(&u, &g, 2).unwrap();
        assert!(lap.iter().all(|v| (v - 12.0).abs() < 1e-8));
        let bi = radial_bilaplacian(&u, &g).unwrap();
        assert!(bi.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn quartic_bilaplacian_n6() {
        let g = RadialGrid::<f64>::uniform(6, 1.0, 101).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|r| r.powi(4)).collect();
        let bi = radial_bilaplacian_order(&u, &g, 4).unwrap();
        assert!(
            bi.iter().all(|v| (v - 384.0).abs() < 1e-4),
            "{:?}",
            &bi[..3]
        );
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let g = RadialGrid::<f64>::uniform(6, 1.0, 64).unwrap();
        assert!(radial_bilaplacian(&[1.0; 10], &g).is_err());
    }
}
