//! Higher-order smoothing kernels on (-1,1), built from Legendre polynomials.
//!
//! A kernel of order t integrates to one and has vanishing moments
//! `∫ u^r K(u) du = 0` for `1 ≤ r ≤ t`. Products of such kernels give the
//! multivariate kernels used by the density estimator: every mixed moment
//! factorizes, so the product kernel inherits the moment conditions.
//!
//! Kernels are stored and evaluated in the Legendre basis (three-term
//! recurrence); the power basis conditions badly past order ~10.

use crate::quadrature::{integrate, GridSpec};
use crate::{Error, Result};

/// Order used for smoothness `s`: the largest integer *strictly* smaller
/// than `s`. Note integer `s` maps to `s - 1` (e.g. s=2 gives order 1),
/// unlike the usual floor; this is what the smoothness-class definition
/// prescribes and it changes the kernel order at integer smoothness.
pub fn smoothness_order(s: f64) -> Result<u32> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("smoothness must be positive, got {s}")));
    }
    Ok((s.ceil() - 1.0) as u32)
}

/// A one-dimensional kernel: a polynomial restricted to (-1,1), zero
/// outside, held as coefficients over the Legendre polynomials P_m.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1D {
    order: u32,
    /// Coefficient of P_m, index m. Odd entries are zero (the kernel is even).
    legendre_coeffs: Vec<f64>,
}

impl Kernel1D {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Coefficients over P_0, P_1, ... defining the polynomial on (-1,1).
    pub fn legendre_coefficients(&self) -> &[f64] {
        &self.legendre_coeffs
    }

    /// Evaluate the kernel. Exactly zero for |u| >= 1.
    pub fn evaluate(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let mut acc = self.legendre_coeffs[0];
        if self.legendre_coeffs.len() == 1 {
            return acc;
        }
        let mut p_prev = 1.0; // P_0
        let mut p = u; // P_1
        acc += self.legendre_coeffs[1] * p;
        for m in 1..self.legendre_coeffs.len() - 1 {
            let mf = m as f64;
            let p_next = ((2.0 * mf + 1.0) * u * p - mf * p_prev) / (mf + 1.0);
            p_prev = p;
            p = p_next;
            acc += self.legendre_coeffs[m + 1] * p;
        }
        acc
    }

    /// Exact moment ∫_{-1}^{1} u^r K(u) du via the closed form for
    /// ∫ u^r P_m du (nonzero only for m ≤ r with r - m even).
    pub fn moment_analytic(&self, r: u32) -> f64 {
        let mut acc = 0.0;
        for (m, &c) in self.legendre_coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += c * power_legendre_integral(r, m as u32);
            }
        }
        acc
    }
}

/// `∫_{-1}^{1} u^r P_m(u) du = 2^{m+1} r! ((r+m)/2)! / (((r-m)/2)! (r+m+1)!)`
/// when m ≤ r and r - m is even, zero otherwise.
fn power_legendre_integral(r: u32, m: u32) -> f64 {
    if m > r || (r - m) % 2 != 0 {
        return 0.0;
    }
    let factorial = |k: u32| -> f64 { (1..=k).map(|v| v as f64).product() };
    2f64.powi(m as i32 + 1) * factorial(r) * factorial((r + m) / 2)
        / (factorial((r - m) / 2) * factorial(r + m + 1))
}

/// `P_m(0)`: zero for odd m, `-(m-1)/m · P_{m-2}(0)` for even m.
fn legendre_at_zero(m: u32) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut k = 2u32;
    while k <= m {
        v *= -((k - 1) as f64) / k as f64;
        k += 2;
    }
    v
}

/// Construct the order-`t` kernel `K(u) = Σ_{m=0}^{t} φ_m(0) φ_m(u)` on (-1,1),
/// where φ_m are the Legendre polynomials orthonormal on [-1,1].
///
/// The construction reproduces polynomials of degree ≤ t at the origin, so
/// ∫K = 1 and ∫u^r K = 0 for 1 ≤ r ≤ t; both are verified before returning.
/// Orders above 20 are refused.
pub fn legendre_kernel(order: u32) -> Result<Kernel1D> {
    if order > 20 {
        return Err(Error::KernelOrder(order));
    }
    let mut legendre_coeffs = vec![0.0; order as usize + 1];
    for m in 0..=order {
        let p0 = legendre_at_zero(m);
        if p0 != 0.0 {
            // φ_m(0) φ_m(u) = ((2m+1)/2) P_m(0) P_m(u)
            legendre_coeffs[m as usize] = (2.0 * m as f64 + 1.0) / 2.0 * p0;
        }
    }
    let kernel = Kernel1D {
        order,
        legendre_coeffs,
    };
    let mass = kernel.moment_analytic(0);
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::NonFinite(format!(
            "kernel of order {order} has mass {mass}, expected 1"
        )));
    }
    for r in 1..=order {
        let m = kernel.moment_analytic(r);
        if m.abs() > 1e-10 {
            return Err(Error::NonFinite(format!(
                "kernel of order {order} has moment {m} at r={r}, expected 0"
            )));
        }
    }
    Ok(kernel)
}

/// Moment ∫ u^r K(u) du by quadrature (the grid must be one-dimensional);
/// the [-1,1] support is mapped onto the unit interval.
pub fn kernel_moment(kernel: &Kernel1D, r: u32, grid: &GridSpec) -> Result<f64> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch(grid.dim(), 1));
    }
    integrate(
        |x| {
            let u = 2.0 * x[0] - 1.0;
            2.0 * u.powi(r as i32) * kernel.evaluate(u)
        },
        grid,
    )
}

/// A product kernel on (-1,1)^d.
#[derive(Debug, Clone)]
pub struct KernelD {
    axes: Vec<Kernel1D>,
}

impl KernelD {
    /// d independent copies of the same 1-d kernel.
    pub fn product_of(kernel: Kernel1D, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("kernel dimension must be at least 1"));
        }
        Ok(KernelD {
            axes: vec![kernel; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, c: usize) -> &Kernel1D {
        &self.axes[c]
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.axes.len());
        let mut acc = 1.0;
        for (k, &uc) in self.axes.iter().zip(u) {
            acc *= k.evaluate(uc);
            if acc == 0.0 {
                return 0.0;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment_grid() -> GridSpec {
        GridSpec::new_unguarded(1, 200_000).unwrap()
    }

    #[test]
    fn test_order_zero_is_box() {
        let k = legendre_kernel(0).unwrap();
        assert!((k.evaluate(0.3) - 0.5).abs() < 1e-15);
        assert_eq!(k.evaluate(1.0), 0.0);
        assert!((kernel_moment(&k, 0, &moment_grid()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn test_order_one_equals_order_zero() {
        // odd moments vanish by symmetry, so the order-1 kernel is the box
        let k0 = legendre_kernel(0).unwrap();
        let k1 = legendre_kernel(1).unwrap();
        for u in [-0.9, -0.4, 0.0, 0.7] {
            assert!((k0.evaluate(u) - k1.evaluate(u)).abs() < 1e-15);
        }
        assert!(k1.moment_analytic(1).abs() < 1e-15);
    }

    #[test]
    fn test_box_second_moment_is_one_third() {
        let k = legendre_kernel(0).unwrap();
        let m2 = kernel_moment(&k, 2, &moment_grid()).unwrap();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-8, "got {m2}");
    }

    #[test]
    fn test_order_three_kills_second_moment() {
        let k = legendre_kernel(3).unwrap();
        let m2 = kernel_moment(&k, 2, &moment_grid()).unwrap();
        assert!(m2.abs() < 1e-8, "got {m2}");
    }

    #[test]
    fn test_order_two_explicit_polynomial() {
        // K = ½P₀ + (5/2)P₂(0)P₂ = ½ - (5/4)(3u²-1)/2 = (9 - 15u²)/8
        let k = legendre_kernel(2).unwrap();
        for u in [-0.8, -0.3, 0.0, 0.5, 0.95] {
            let expect = (9.0 - 15.0 * u * u) / 8.0;
            assert!((k.evaluate(u) - expect).abs() < 1e-14, "at {u}");
        }
    }

    #[test]
    fn test_vanishing_moments_all_orders() {
        for order in 0..=20 {
            let k = legendre_kernel(order).unwrap();
            assert!((k.moment_analytic(0) - 1.0).abs() < 1e-10);
            for r in 1..=order {
                assert!(
                    k.moment_analytic(r).abs() < 1e-10,
                    "order {order} moment {r}"
                );
            }
        }
    }

    #[test]
    fn test_evenness() {
        let k = legendre_kernel(4).unwrap();
        for u in [0.1, 0.35, 0.77, 0.99] {
            assert_eq!(k.evaluate(u), k.evaluate(-u));
        }
    }

    #[test]
    fn test_support_is_open_interval() {
        let k = legendre_kernel(5).unwrap();
        assert_eq!(k.evaluate(1.0), 0.0);
        assert_eq!(k.evaluate(-1.0), 0.0);
        assert_eq!(k.evaluate(1.5), 0.0);
        assert!(k.evaluate(0.999).abs() > 0.0);
    }

    #[test]
    fn test_order_guard() {
        assert!(legendre_kernel(21).is_err());
        assert!(legendre_kernel(20).is_ok());
    }

    #[test]
    fn test_smoothness_order_strict_floor() {
        assert_eq!(smoothness_order(0.5).unwrap(), 0);
        assert_eq!(smoothness_order(1.0).unwrap(), 0);
        assert_eq!(smoothness_order(2.0).unwrap(), 1);
        assert_eq!(smoothness_order(2.5).unwrap(), 2);
        assert_eq!(smoothness_order(4.0).unwrap(), 3);
        assert!(smoothness_order(0.0).is_err());
        assert!(smoothness_order(-1.0).is_err());
    }

    #[test]
    fn test_product_kernel_factorizes() {
        let k1 = legendre_kernel(2).unwrap();
        let kd = KernelD::product_of(k1.clone(), 3).unwrap();
        let u = [0.2, -0.5, 0.8];
        let expect = k1.evaluate(0.2) * k1.evaluate(-0.5) * k1.evaluate(0.8);
        assert!((kd.evaluate(&u) - expect).abs() < 1e-15);
        assert_eq!(kd.evaluate(&[0.2, 1.0, 0.3]), 0.0);
    }
}
