//! Riemann theta function theta(u) = sum_k exp(1/2 (Bk, k) + (u, k)) with a
//! certified truncation of the lattice sum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::quatgeo::C64;

/// Default bound on the relative tail of the lattice sum.
pub const THETA_TOL: f64 = 1e-12;
/// Largest number of lattice points summed per evaluation.
pub const LATTICE_CAP: usize = 4_000_000;

/// Box radius R of the summation and the tail bound it guarantees,
/// relative to the largest Gaussian term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTruncation {
    pub radius: usize,
    pub tail_bound: f64,
}

impl ThetaTruncation {
    /// Smallest radius whose tail bound is below `tol`.
    pub fn certify(alpha: f64, genus: usize, tol: f64) -> Result<Self> {
        let mut radius = 1;
        loop {
            let tail_bound = tail_bound(alpha, genus, radius);
            if tail_bound <= tol {
                return Ok(Self { radius, tail_bound });
            }
            radius += 1;
            if box_size(radius, genus).is_none_or(|n| n > LATTICE_CAP) {
                return Err(GeomError::ThetaConvergence(radius));
            }
        }
    }

    pub fn fixed(alpha: f64, genus: usize, radius: usize) -> Result<Self> {
        if box_size(radius, genus).is_none_or(|n| n > LATTICE_CAP) {
            return Err(GeomError::ThetaConvergence(radius));
        }
        Ok(Self { radius, tail_bound: tail_bound(alpha, genus, radius) })
    }
}

fn box_size(radius: usize, genus: usize) -> Option<usize> {
    (2 * radius + 1).checked_pow(genus as u32)
}

/// Bound on sum over |k - c|_inf > R of exp(-alpha |k - k*|^2) where c is
/// the lattice point nearest k*.
fn tail_bound(alpha: f64, genus: usize, radius: usize) -> f64 {
    let r = radius as f64 + 0.5;
    let edge = (-alpha * r * r).exp() / (1.0 - (-2.0 * alpha * r).exp());
    let full = 1.0 + (std::f64::consts::PI / alpha).sqrt();
    2.0 * genus as f64 * edge * full.powi(genus as i32 - 1)
}

/// Theta function of a fixed period matrix.
#[derive(Debug, Clone)]
pub struct Theta {
    b: DMatrix<C64>,
    /// (Re B)^{-1}, used to centre the summation box.
    re_inv: DMatrix<f64>,
    alpha: f64,
    pub truncation: ThetaTruncation,
}

impl Theta {
    pub fn new(b: DMatrix<C64>, tol: f64) -> Result<Self> {
        let (re_inv, alpha) = Self::analyse(&b)?;
        let truncation = ThetaTruncation::certify(alpha, b.nrows(), tol)?;
        Ok(Self { b, re_inv, alpha, truncation })
    }

    pub fn with_radius(b: DMatrix<C64>, radius: usize) -> Result<Self> {
        let (re_inv, alpha) = Self::analyse(&b)?;
        let truncation = ThetaTruncation::fixed(alpha, b.nrows(), radius)?;
        Ok(Self { b, re_inv, alpha, truncation })
    }

    fn analyse(b: &DMatrix<C64>) -> Result<(DMatrix<f64>, f64)> {
        let g = b.nrows();
        if g == 0 || b.ncols() != g {
            return Err(GeomError::Shape(format!("period matrix must be square, got {}x{}", b.nrows(), b.ncols())));
        }
        let re = b.map(|v| v.re);
        let sym = (&re + re.transpose()) * 0.5;
        let lmax = sym.clone().symmetric_eigen().eigenvalues.max();
        if !(lmax < 0.0) {
            return Err(GeomError::Invalid(format!("Re B not negative definite (largest eigenvalue {lmax:e})")));
        }
        let re_inv = sym.try_inverse().ok_or_else(|| GeomError::Singular("Re B".into()))?;
        Ok((re_inv, -0.5 * lmax))
    }

    pub fn genus(&self) -> usize {
        self.b.nrows()
    }

    pub fn period_matrix(&self) -> &DMatrix<C64> {
        &self.b
    }

    /// Decay rate alpha = -lambda_max(Re B) / 2 of the Gaussian terms.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self, u: &[C64]) -> C64 {
        self.sum(u, false).0
    }

    /// theta(u) and its gradient in u.
    pub fn value_and_gradient(&self, u: &[C64]) -> (C64, Vec<C64>) {
        self.sum(u, true)
    }

    /// Largest term modulus exp(-1/2 k*^T Re B k*); the tail bound is
    /// relative to it.
    pub fn peak(&self, u: &[C64]) -> f64 {
        let re_u = DVector::from_iterator(u.len(), u.iter().map(|v| v.re));
        let kstar = -(&self.re_inv * &re_u);
        (-0.5 * re_u.dot(&kstar)).exp()
    }

    fn sum(&self, u: &[C64], grad: bool) -> (C64, Vec<C64>) {
        let g = self.genus();
        assert_eq!(u.len(), g, "theta argument has wrong length");
        let re_u = DVector::from_iterator(g, u.iter().map(|v| v.re));
        let kstar = -(&self.re_inv * &re_u);
        let centre: Vec<i64> = kstar.iter().map(|v| v.round() as i64).collect();
        let r = self.truncation.radius as i64;
        let mut offs = vec![-r; g];
        let mut k = vec![0i64; g];
        let mut total = C64::ZERO;
        let mut gradient = vec![C64::ZERO; if grad { g } else { 0 }];
        loop {
            for n in 0..g {
                k[n] = centre[n] + offs[n];
            }
            let mut expo = C64::ZERO;
            for a in 0..g {
                let ka = k[a] as f64;
                expo += u[a] * ka;
                let mut row = C64::ZERO;
                for bi in 0..g {
                    row += self.b[(a, bi)] * k[bi] as f64;
                }
                expo += 0.5 * row * ka;
            }
            let term = expo.exp();
            total += term;
            for (n, gr) in gradient.iter_mut().enumerate() {
                *gr += term * k[n] as f64;
            }
            // odometer over the box
            let mut n = 0;
            while n < g {
                offs[n] += 1;
                if offs[n] <= r {
                    break;
                }
                offs[n] = -r;
                n += 1;
            }
            if n == g {
                break;
            }
        }
        (total, gradient)
    }
}

/// theta(u) with the default certified truncation.
pub fn theta(u: &[C64], b: &DMatrix<C64>) -> Result<C64> {
    Ok(Theta::new(b.clone(), THETA_TOL)?.value(u))
}
