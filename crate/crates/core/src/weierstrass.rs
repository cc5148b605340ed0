//! Spinor data solving the Dirac system, and the immersion obtained by
//! integrating the closed forms built from it.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::quatgeo::grid::{imvec_norm, integrate_form};
use crate::quatgeo::{Diff, ImVec3, Lattice, Quaternion, Stencil, SurfaceGrid, C64};

/// Default tolerance on the x-first / y-first path defect.
pub const PATH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorPair {
    pub lattice: Lattice,
    pub s1: Vec<C64>,
    pub s2: Vec<C64>,
}

impl SpinorPair {
    pub fn new(lattice: Lattice, s1: Vec<C64>, s2: Vec<C64>) -> Result<Self> {
        lattice.check_len(s1.len(), "s1")?;
        lattice.check_len(s2.len(), "s2")?;
        Ok(Self { lattice, s1, s2 })
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(C64) -> (C64, C64)) -> Self {
        let (s1, s2) = lattice.nodes().into_iter().map(f).unzip();
        Self { lattice, s1, s2 }
    }

    /// e^{u/2} = |s1|^2 + |s2|^2 at every node.
    pub fn half_metric(&self) -> Vec<f64> {
        self.s1.iter().zip(&self.s2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect()
    }

    /// Mean curvature H = 2 p e^{-u/2}.
    pub fn mean_curvature(&self, p: &DiracPotential) -> Vec<f64> {
        self.half_metric().iter().zip(&p.p).map(|(m, p)| 2.0 * p / m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracPotential {
    pub p: Vec<f64>,
}

impl DiracPotential {
    pub fn constant(lattice: &Lattice, p: f64) -> Self {
        Self { p: vec![p; lattice.len()] }
    }
}

/// Max over full-order interior nodes of the two components
/// d_z conj(s2) - p s1 and -d_zbar s1 - p conj(s2).
pub fn dirac_residual(sp: &SpinorPair, p: &DiracPotential) -> Result<f64> {
    dirac_residual_at(sp, p).map(|r| {
        let d = Diff::new(sp.lattice, Stencil::default()).expect("validated");
        d.interior_max(|k| r[k])
    })
}

/// Pointwise Dirac residual, all nodes.
pub fn dirac_residual_at(sp: &SpinorPair, p: &DiracPotential) -> Result<Vec<f64>> {
    sp.lattice.check_len(p.p.len(), "p")?;
    let d = Diff::new(sp.lattice, Stencil::default())?;
    let s2bar: Vec<C64> = sp.s2.iter().map(|v| v.conj()).collect();
    let a = d.dz(&s2bar);
    let b = d.dzbar(&sp.s1);
    Ok((0..sp.lattice.len())
        .map(|k| {
            let r1 = a[k] - sp.s1[k] * p.p[k];
            let r2 = -b[k] - s2bar[k] * p.p[k];
            r1.norm().max(r2.norm())
        })
        .collect())
}

/// Phi = [[s1, -s2], [conj s2, conj s1]] as a quaternion.
pub fn spinor_quaternion(s1: C64, s2: C64) -> Quaternion {
    Quaternion::new(s1.re, s2.im, s2.re, -s1.im)
}

pub fn frame_from_spinors(sp: &SpinorPair) -> Result<Vec<Quaternion>> {
    sp.s1
        .iter()
        .zip(&sp.s2)
        .enumerate()
        .map(|(k, (a, b))| {
            if a.norm_sqr() + b.norm_sqr() <= 0.0 {
                return Err(GeomError::ZeroSpinor(k));
            }
            Ok(spinor_quaternion(*a, *b))
        })
        .collect()
}

/// F_x and F_y of the represented immersion at one node.
pub fn tangents(s1: C64, s2: C64) -> (ImVec3, ImVec3) {
    let a = s1 * s1;
    let b = s2.conj() * s2.conj();
    let gx = a - b;
    let gy = (a + b) * C64::new(0.0, 1.0);
    let m = s1 * s2;
    (ImVec3::new(gx.re, gx.im, 2.0 * m.re), ImVec3::new(gy.re, gy.im, -2.0 * m.im))
}

pub fn weierstrass_integrate(sp: &SpinorPair) -> Result<SurfaceGrid> {
    weierstrass_integrate_with(sp, PATH_TOL)
}

/// Integrates F1 + iF2 = int s1^2 dz - conj(s2)^2 dzbar and
/// F3 = int s1 s2 dz + conj(s1 s2) dzbar from the grid centre, where F = 0.
pub fn weierstrass_integrate_with(sp: &SpinorPair, path_tol: f64) -> Result<SurfaceGrid> {
    let lat = sp.lattice;
    let d = Diff::new(lat, Stencil::default())?;
    let frame = frame_from_spinors(sp)?;
    let (fx, fy): (Vec<ImVec3>, Vec<ImVec3>) = sp.s1.iter().zip(&sp.s2).map(|(a, b)| tangents(*a, *b)).unzip();
    let (f, defect) = integrate_form(&d, &fx, &fy, lat.center_node(), imvec_norm);
    if defect > path_tol {
        return Err(GeomError::PathDependence { defect, tol: path_tol });
    }
    let normal = frame
        .iter()
        .map(|phi| {
            let inv = phi.inverse().unwrap_or(Quaternion::ONE);
            (inv * Quaternion::K * *phi).imag()
        })
        .collect();
    let mut s = SurfaceGrid::new(lat, f, normal)?.with_tangents(fx, fy);
    s.frame = Some(frame);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatgeo::estimate_fundamental_data;

    fn lat() -> Lattice {
        Lattice::centered(C64::ZERO, 21, 21, 0.05)
    }

    #[test]
    fn holomorphic_pairs_have_zero_residual() {
        let l = lat();
        let p0 = DiracPotential::constant(&l, 0.0);
        let enneper = SpinorPair::from_fn(l, |z| (C64::ONE, z));
        assert!(dirac_residual(&enneper, &p0).unwrap() < 1e-12);
        let flat = SpinorPair::from_fn(l, |_| (C64::ONE, C64::ZERO));
        assert_eq!(dirac_residual(&flat, &p0).unwrap(), 0.0);
    }

    #[test]
    fn nonzero_potential_residual_at_origin() {
        let l = lat();
        let p1 = DiracPotential::constant(&l, 1.0);
        let sp = SpinorPair::from_fn(l, |z| (C64::ONE, z));
        let r = dirac_residual_at(&sp, &p1).unwrap();
        let (i, j) = l.center_node();
        assert!((r[l.index(i, j)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_from_constant_spinor() {
        let l = lat();
        let s = weierstrass_integrate(&SpinorPair::from_fn(l, |_| (C64::ONE, C64::ZERO))).unwrap();
        for (k, z) in l.nodes().iter().enumerate() {
            assert!((s.f[k] - ImVec3::new(z.re, z.im, 0.0)).norm() < 1e-14);
        }
        let fd = estimate_fundamental_data(&s).unwrap();
        assert!(fd.u.iter().all(|u| u.abs() < 1e-14));
        assert!(fd.h.iter().all(|h| h.abs() < 1e-12));
    }

    #[test]
    fn frame_determinant() {
        let l = Lattice::new(1, 1, 1.0, 0.0, 1.0, 1.0);
        let sp = SpinorPair::from_fn(l, |z| (C64::ONE, z));
        let phi = frame_from_spinors(&sp).unwrap()[0];
        assert!((phi.norm_sqr() - 2.0).abs() < 1e-15);
        let id = frame_from_spinors(&SpinorPair::from_fn(l, |_| (C64::ONE, C64::ZERO))).unwrap()[0];
        assert_eq!(id, Quaternion::ONE);
    }

    #[test]
    fn zero_spinor_rejected() {
        let l = Lattice::new(2, 1, 0.0, 0.0, 1.0, 1.0);
        let sp = SpinorPair::new(l, vec![C64::ONE, C64::ZERO], vec![C64::ZERO, C64::ZERO]).unwrap();
        assert_eq!(frame_from_spinors(&sp), Err(GeomError::ZeroSpinor(1)));
    }

    #[test]
    fn non_closed_forms_are_detected() {
        let l = lat();
        // violates the Dirac system for every real p
        let sp = SpinorPair::from_fn(l, |z| (C64::ONE + z.conj() * z.conj(), z * 0.3));
        let err = weierstrass_integrate(&sp).unwrap_err();
        assert!(matches!(err, GeomError::PathDependence { .. }));
    }

    #[test]
    fn second_frame_column_solves_dirac() {
        // cylinder spinors: s1 = cos x, s2 = sin x with p = 1/2
        let l = lat();
        let p = DiracPotential::constant(&l, 0.5);
        let sp = SpinorPair::from_fn(l, |z| (C64::from(z.re.cos()), C64::from(z.re.sin())));
        assert!(dirac_residual(&sp, &p).unwrap() < 1e-6);
        let col = SpinorPair::new(l, sp.s2.iter().map(|v| -v).collect(), sp.s1.clone()).unwrap();
        assert!(dirac_residual(&col, &p).unwrap() < 1e-6);
    }
}
