//! Midpoint-rule quadrature on tensor-product grids over the unit cube.
//!
//! All integrals in this crate are over [0,1]^d with smooth, periodic-ish
//! integrands, for which the composite midpoint rule is accurate and, unlike
//! adaptive schemes, exactly reproducible. Nodes sit strictly inside (0,1)^d.

use crate::{Error, Result};
use num_complex::Complex64;

/// Node-count guard: tensor grids beyond this are refused unless the caller
/// explicitly opts out via [`GridSpec::new_unguarded`].
const NODE_GUARD: f64 = 1e8;

/// A uniform tensor grid on [0,1]^d for the midpoint rule.
///
/// Axis nodes are `(i + 0.5) / points_per_axis`, so the full grid has
/// `points_per_axis^d` nodes, each of weight `points_per_axis^{-d}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    dim: usize,
    points_per_axis: usize,
}

impl GridSpec {
    /// Create a grid, refusing node counts beyond 10^8.
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("grid dimension must be at least 1"));
        }
        if points_per_axis == 0 {
            return Err(Error::domain("points_per_axis must be at least 1"));
        }
        let nodes = (points_per_axis as f64).powi(dim as i32);
        if nodes > NODE_GUARD {
            return Err(Error::GridTooLarge {
                nodes,
                guard: NODE_GUARD,
            });
        }
        Ok(GridSpec {
            dim,
            points_per_axis,
        })
    }

    /// Create a grid without the node-count guard. The caller owns the cost.
    pub fn new_unguarded(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 || points_per_axis == 0 {
            return Err(Error::domain("grid dimension and points_per_axis must be at least 1"));
        }
        Ok(GridSpec {
            dim,
            points_per_axis,
        })
    }

    /// Default resolution per dimension: 2048 (d=1), 256 (d=2), 64 (d=3).
    /// Dimensions of 4 and above are refused; construct explicitly to override.
    pub fn default_for_dim(dim: usize) -> Result<Self> {
        let ppa = match dim {
            1 => 2048,
            2 => 256,
            3 => 64,
            0 => return Err(Error::domain("grid dimension must be at least 1")),
            _ => {
                return Err(Error::domain(format!(
                    "no default grid for dimension {dim}; construct a GridSpec explicitly"
                )))
            }
        };
        GridSpec::new(dim, ppa)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// The shared 1-d node positions `(i + 0.5) / points_per_axis`.
    pub fn axis_nodes(&self) -> Vec<f64> {
        let g = self.points_per_axis as f64;
        (0..self.points_per_axis)
            .map(|i| (i as f64 + 0.5) / g)
            .collect()
    }

    /// Visit every node in a fixed row-major order (last axis fastest).
    ///
    /// The closure receives the node index and its coordinates. Field arrays
    /// produced elsewhere (e.g. KDE values on the grid) use this same order.
    pub fn for_each_node<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let axis = self.axis_nodes();
        let d = self.dim;
        let g = self.points_per_axis;
        let mut idx = vec![0usize; d];
        let mut buf = vec![axis[0]; d];
        let total = self.node_count();
        for flat in 0..total {
            f(flat, &buf);
            // odometer increment, last axis fastest
            for c in (0..d).rev() {
                idx[c] += 1;
                if idx[c] < g {
                    buf[c] = axis[idx[c]];
                    break;
                }
                idx[c] = 0;
                buf[c] = axis[0];
            }
        }
    }
}

/// Midpoint-rule integral of `f` over [0,1]^d.
///
/// Errors if `f` is non-finite at any node, reporting the node.
pub fn integrate<F: FnMut(&[f64]) -> f64>(f: F, grid: &GridSpec) -> Result<f64> {
    let mut f = f;
    let mut sum = 0.0;
    let mut bad: Option<(f64, Vec<f64>)> = None;
    grid.for_each_node(|_, x| {
        if bad.is_some() {
            return;
        }
        let v = f(x);
        if !v.is_finite() {
            bad = Some((v, x.to_vec()));
            return;
        }
        sum += v;
    });
    if let Some((v, x)) = bad {
        return Err(Error::NonFinite(format!(
            "integrand is {v} at grid node {x:?}"
        )));
    }
    Ok(sum / grid.node_count() as f64)
}

/// Midpoint-rule integral of a complex-valued integrand, componentwise.
pub fn integrate_complex<F: FnMut(&[f64]) -> Complex64>(f: F, grid: &GridSpec) -> Result<Complex64> {
    let mut f = f;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut bad: Option<(Complex64, Vec<f64>)> = None;
    grid.for_each_node(|_, x| {
        if bad.is_some() {
            return;
        }
        let v = f(x);
        if !v.re.is_finite() || !v.im.is_finite() {
            bad = Some((v, x.to_vec()));
            return;
        }
        sum += v;
    });
    if let Some((v, x)) = bad {
        return Err(Error::NonFinite(format!(
            "integrand is {v} at grid node {x:?}"
        )));
    }
    Ok(sum / grid.node_count() as f64)
}

/// Mean of `values.powf`-style node data; helper for integrands already
/// tabulated on the grid in `for_each_node` order.
pub fn integrate_values(values: &[f64], grid: &GridSpec) -> Result<f64> {
    if values.len() != grid.node_count() {
        return Err(Error::DimensionMismatch(values.len(), grid.node_count()));
    }
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "tabulated integrand is {v} at node index {i}"
            )));
        }
        sum += v;
    }
    Ok(sum / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn test_constant_is_exact() {
        let grid = GridSpec::new(2, 32).unwrap();
        let v = integrate(|_| 1.0, &grid).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn test_linear_symmetry() {
        let grid = GridSpec::new(1, 1000).unwrap();
        let v = integrate(|x| x[0], &grid).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn test_cos_squared() {
        // ∫ cos²(2πx) dx = 1/2 on [0,1]
        let grid = GridSpec::new(1, 1000).unwrap();
        let v = integrate(|x| (2.0 * PI * x[0]).cos().powi(2), &grid).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn test_complex_constant() {
        let grid = GridSpec::new(1, 64).unwrap();
        let v = integrate_complex(|_| Complex64::new(2.0, 0.0), &grid).unwrap();
        assert_eq!(v, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn test_complex_unit_modulus() {
        // φ_k · conj(φ_k) ≡ 1
        let grid = GridSpec::new(1, 512).unwrap();
        let v = integrate_complex(
            |x| {
                let z = Complex64::from_polar(1.0, 2.0 * PI * 3.0 * x[0]);
                z * z.conj()
            },
            &grid,
        )
        .unwrap();
        assert!((v.re - 1.0).abs() < 1e-6);
        assert!(v.im.abs() < 1e-6);
    }

    #[test]
    fn test_orthogonality_of_exponentials() {
        // ∫ φ_2 φ_{-5} = 0 since 2 + (-5) ≠ 0; brute-force summation agrees.
        let grid = GridSpec::new(1, 1024).unwrap();
        let f = |x: &[f64]| {
            Complex64::from_polar(1.0, 2.0 * PI * 2.0 * x[0])
                * Complex64::from_polar(1.0, 2.0 * PI * -5.0 * x[0])
        };
        let v = integrate_complex(f, &grid).unwrap();
        // independent check: direct sum over the same nodes
        let axis = grid.axis_nodes();
        let mut brute = Complex64::new(0.0, 0.0);
        for &x in &axis {
            brute += f(&[x]);
        }
        brute /= axis.len() as f64;
        assert!(v.norm() < 1e-8, "got {v}");
        assert!((v - brute).norm() < 1e-12);
    }

    #[test]
    fn test_nonfinite_reports_node() {
        let grid = GridSpec::new(1, 16).unwrap();
        let err = integrate(|x| if x[0] > 0.5 { f64::NAN } else { 1.0 }, &grid).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("NaN"), "message was: {msg}");
    }

    #[test]
    fn test_node_guard() {
        assert!(GridSpec::new(4, 200).is_err());
        assert!(GridSpec::new_unguarded(4, 200).is_ok());
        assert!(GridSpec::default_for_dim(4).is_err());
    }

    #[test]
    fn test_refinement_improves() {
        let f = |x: &[f64]| (2.0 * PI * x[0]).sin().exp();
        let coarse = integrate(f, &GridSpec::new(1, 32).unwrap()).unwrap();
        let mid = integrate(f, &GridSpec::new(1, 64).unwrap()).unwrap();
        let fine = integrate(f, &GridSpec::new(1, 4096).unwrap()).unwrap();
        assert!((mid - fine).abs() <= (coarse - fine).abs());
    }

    #[test]
    fn test_linearity() {
        let grid = GridSpec::new(1, 256).unwrap();
        let f = |x: &[f64]| x[0].powi(2);
        let g = |x: &[f64]| (3.0 * x[0]).cos();
        let (a, b) = (2.5, -1.25);
        let combined = integrate(|x| a * f(x) + b * g(x), &grid).unwrap();
        let separate = a * integrate(f, &grid).unwrap() + b * integrate(g, &grid).unwrap();
        assert!((combined - separate).abs() < 1e-12);
    }

    #[test]
    fn test_node_order_matches_field_indexing() {
        let grid = GridSpec::new(2, 3).unwrap();
        let mut seen = Vec::new();
        grid.for_each_node(|i, x| seen.push((i, x.to_vec())));
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[0].1, vec![0.5 / 3.0, 0.5 / 3.0]);
        // last axis fastest
        assert_eq!(seen[1].1, vec![0.5 / 3.0, 1.5 / 3.0]);
        assert_eq!(seen[3].1, vec![1.5 / 3.0, 0.5 / 3.0]);
        assert_eq!(seen[8].0, 8);
    }
}
