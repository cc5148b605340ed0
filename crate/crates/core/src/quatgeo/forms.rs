use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::grid::{Diff, Lattice, Stencil};
use super::quat::{ImVec3, Quaternion, C64};
use crate::error::{GeomError, Result};

pub type Mat2r = Matrix2<f64>;

/// Relative cutoff below which Q counts as an umbilic.
pub const UMBILIC_REL: f64 = 1e-9;

/// Sampled Bonnet data: log conformal factor, Hopf coefficient, mean curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalData {
    pub lattice: Lattice,
    pub u: Vec<f64>,
    pub q: Vec<C64>,
    pub h: Vec<f64>,
}

impl FundamentalData {
    pub fn new(lattice: Lattice, u: Vec<f64>, q: Vec<C64>, h: Vec<f64>) -> Result<Self> {
        lattice.check_len(u.len(), "u")?;
        lattice.check_len(q.len(), "Q")?;
        lattice.check_len(h.len(), "H")?;
        Ok(Self { lattice, u, q, h })
    }

    /// Samples closed-form data at every node.
    pub fn from_fn(lattice: Lattice, f: impl Fn(C64) -> (f64, C64, f64)) -> Self {
        let (mut u, mut q, mut h) = (Vec::new(), Vec::new(), Vec::new());
        for z in lattice.nodes() {
            let (a, b, c) = f(z);
            u.push(a);
            q.push(b);
            h.push(c);
        }
        Self { lattice, u, q, h }
    }

    /// Restriction to the nodes at least `margin` away from the boundary.
    pub fn cropped(&self, margin: usize) -> Result<Self> {
        let (lattice, map) = self.lattice.cropped(margin)?;
        Ok(Self {
            lattice,
            u: map.iter().map(|&k| self.u[k]).collect(),
            q: map.iter().map(|&k| self.q[k]).collect(),
            h: map.iter().map(|&k| self.h[k]).collect(),
        })
    }

    /// Nodes where |Q| < 1e-9 max|Q|.
    pub fn umbilics(&self) -> Vec<usize> {
        let qmax = self.q.iter().map(|q| q.norm()).fold(0.0, f64::max);
        self.q
            .iter()
            .enumerate()
            .filter(|(_, q)| q.norm() <= UMBILIC_REL * qmax)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Sampled immersion with its unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub lattice: Lattice,
    pub f: Vec<ImVec3>,
    pub normal: Vec<ImVec3>,
    pub frame: Option<Vec<Quaternion>>,
    /// Exact F_x, F_y samples when the construction provides them.
    pub tangents: Option<(Vec<ImVec3>, Vec<ImVec3>)>,
    pub periods: Option<(C64, C64)>,
}

impl SurfaceGrid {
    pub fn new(lattice: Lattice, f: Vec<ImVec3>, normal: Vec<ImVec3>) -> Result<Self> {
        lattice.check_len(f.len(), "F")?;
        lattice.check_len(normal.len(), "N")?;
        Ok(Self { lattice, f, normal, frame: None, tangents: None, periods: None })
    }

    /// Builds the normal from F_x x F_y.
    pub fn from_immersion(lattice: Lattice, f: Vec<ImVec3>, stencil: Stencil) -> Result<Self> {
        lattice.check_len(f.len(), "F")?;
        let d = Diff::new(lattice, stencil)?;
        let (fx, fy) = (d.dx(&f), d.dy(&f));
        let normal = normals_from_tangents(&fx, &fy)?;
        Self::new(lattice, f, normal)
    }

    pub fn with_tangents(mut self, fx: Vec<ImVec3>, fy: Vec<ImVec3>) -> Self {
        self.tangents = Some((fx, fy));
        self
    }

    /// max | |N| - 1 |.
    pub fn normal_defect(&self) -> f64 {
        self.normal.iter().map(|n| (n.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    fn first_derivatives(&self, d: &Diff) -> (Vec<ImVec3>, Vec<ImVec3>) {
        match &self.tangents {
            Some((fx, fy)) => (fx.clone(), fy.clone()),
            None => (d.dx(&self.f), d.dy(&self.f)),
        }
    }

    /// Conformality and normal residuals on full-order interior nodes:
    /// (max |<F_z,F_z>|, max |<F_z,N>|, max ||N|-1|).
    pub fn conformality(&self, stencil: Stencil) -> Result<(f64, f64, f64)> {
        let d = Diff::new(self.lattice, stencil)?;
        let (fx, fy) = self.first_derivatives(&d);
        let c = d.interior_max(|k| {
            let a = fx[k].dot(fx[k]) - fy[k].dot(fy[k]);
            let b = 2.0 * fx[k].dot(fy[k]);
            0.25 * (a * a + b * b).sqrt()
        });
        let n = d.interior_max(|k| {
            let (a, b) = (fx[k].dot(self.normal[k]), fy[k].dot(self.normal[k]));
            0.5 * (a * a + b * b).sqrt()
        });
        Ok((c, n, self.normal_defect()))
    }
}

pub fn normals_from_tangents(fx: &[ImVec3], fy: &[ImVec3]) -> Result<Vec<ImVec3>> {
    fx.iter()
        .zip(fy)
        .enumerate()
        .map(|(k, (a, b))| {
            let n = a.cross(*b);
            let len = n.norm();
            if len <= 0.0 || !len.is_finite() {
                return Err(GeomError::DegenerateNode { index: k, value: len });
            }
            Ok(n * (1.0 / len))
        })
        .collect()
}

/// First and second fundamental forms in conformal coordinates.
pub fn fundamental_forms(u: f64, q: C64, h: f64) -> (Mat2r, Mat2r) {
    let eu = u.exp();
    let first = Mat2r::identity() * eu;
    let re2 = 2.0 * q.re;
    // i (Q - Qbar) = -2 Im Q
    let off = -2.0 * q.im;
    let second = Mat2r::new(re2 + h * eu, off, off, -re2 + h * eu);
    (first, second)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvatures {
    pub k1: f64,
    pub k2: f64,
    pub mean: f64,
    pub gauss: f64,
}

/// Principal curvatures (k1 >= k2) as eigenvalues of II I^{-1}.
pub fn curvatures(first: &Mat2r, second: &Mat2r) -> Result<Curvatures> {
    let det = first.determinant();
    if !(det > 0.0) {
        return Err(GeomError::DegenerateMetric(det));
    }
    let inv = first.try_inverse().ok_or(GeomError::DegenerateMetric(det))?;
    let w = second * inv;
    let tr = w.trace();
    let dt = w.determinant();
    let mean = 0.5 * tr;
    let disc = (mean * mean - dt).max(0.0).sqrt();
    Ok(Curvatures { k1: mean + disc, k2: mean - disc, mean, gauss: dt })
}

/// K = H^2 - 4|Q|^2 e^{-2u}.
pub fn gauss_curvature(u: f64, q: C64, h: f64) -> f64 {
    h * h - 4.0 * q.norm_sqr() * (-2.0 * u).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussCodazzi {
    pub gauss: Vec<f64>,
    pub codazzi: Vec<C64>,
    pub gauss_max: f64,
    pub codazzi_max: f64,
}

pub fn gauss_codazzi_residual(fd: &FundamentalData) -> Result<GaussCodazzi> {
    gauss_codazzi_residual_with(fd, Stencil::default())
}

/// gauss = u_zzbar + H^2 e^u / 2 - 2|Q|^2 e^{-u}, codazzi = Q_zbar - H_z e^u / 2.
/// Max-norms are taken over the full-order interior.
pub fn gauss_codazzi_residual_with(fd: &FundamentalData, stencil: Stencil) -> Result<GaussCodazzi> {
    let lat = fd.lattice;
    let m = stencil.margin();
    lat.require_nodes((2 * m + 3).max(4))?;
    let d = Diff::new(lat, stencil)?;
    let lap = d.dzdzbar(&fd.u);
    let qzb = d.dzbar(&fd.q);
    let hc: Vec<C64> = fd.h.iter().map(|&v| C64::from(v)).collect();
    let hz = d.dz(&hc);
    let mut gauss = Vec::with_capacity(lat.len());
    let mut codazzi = Vec::with_capacity(lat.len());
    for k in 0..lat.len() {
        let eu = fd.u[k].exp();
        gauss.push(lap[k] + 0.5 * fd.h[k] * fd.h[k] * eu - 2.0 * fd.q[k].norm_sqr() / eu);
        codazzi.push(qzb[k] - hz[k] * (0.5 * eu));
    }
    let gauss_max = d.interior_max(|k| gauss[k].abs());
    let codazzi_max = d.interior_max(|k| codazzi[k].norm());
    Ok(GaussCodazzi { gauss, codazzi, gauss_max, codazzi_max })
}

pub fn estimate_fundamental_data(s: &SurfaceGrid) -> Result<FundamentalData> {
    estimate_fundamental_data_with(s, Stencil::default(), 1e-12)
}

/// e^u = 2<F_z,F_zbar>, Q = <F_zz,N>, H = 2<F_zzbar,N> e^{-u}.
pub fn estimate_fundamental_data_with(s: &SurfaceGrid, stencil: Stencil, min_metric: f64) -> Result<FundamentalData> {
    let lat = s.lattice;
    let d = Diff::new(lat, stencil)?;
    let (fx, fy, fxx, fyy, fxy) = match &s.tangents {
        Some((fx, fy)) => {
            let fxy_a = d.dy(fx);
            let fxy_b = d.dx(fy);
            let fxy: Vec<ImVec3> = fxy_a.iter().zip(&fxy_b).map(|(a, b)| (*a + *b) * 0.5).collect();
            (fx.clone(), fy.clone(), d.dx(fx), d.dy(fy), fxy)
        }
        None => (d.dx(&s.f), d.dy(&s.f), d.dxx(&s.f), d.dyy(&s.f), d.dxy(&s.f)),
    };
    let mut u = Vec::with_capacity(lat.len());
    let mut q = Vec::with_capacity(lat.len());
    let mut h = Vec::with_capacity(lat.len());
    for k in 0..lat.len() {
        let eu = 0.5 * (fx[k].dot(fx[k]) + fy[k].dot(fy[k]));
        if !(eu > min_metric) {
            return Err(GeomError::DegenerateNode { index: k, value: eu });
        }
        let n = s.normal[k];
        let (a, b, c) = (fxx[k].dot(n), fyy[k].dot(n), fxy[k].dot(n));
        u.push(eu.ln());
        q.push(C64::new(0.25 * (a - b), -0.5 * c));
        h.push(0.5 * (a + b) / eu);
    }
    FundamentalData::new(lat, u, q, h)
}

/// max |Im Q|: zero exactly when the coordinate is isothermic for this data.
pub fn isothermic_residual(q: &[C64]) -> f64 {
    q.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
}

/// Observed order log2(e_h / e_{h/2}).
pub fn convergence_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
