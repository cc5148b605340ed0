//! Finite-gap solutions of the sinh-Gordon equation and their CMC frames,
//! built from theta functions of a hyperelliptic spectral curve.

pub mod curve;
pub mod theta;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use curve::{abel_point, compute_periods, Contours, HyperellipticCurve, MarkedPoint, PeriodData};
pub use theta::{theta, Theta, ThetaTruncation, THETA_TOL};

use crate::error::{GeomError, Result};
use crate::frameflow::CmcField;
use crate::quatgeo::{det2, Lattice, Mat2, C64, I};

/// Input record of a finite-gap solution. `p0` is the loop parameter
/// lambda0 of the marked point (|lambda0| = 1, L0 = lambda0^2); `d` must be
/// purely imaginary for a real solution. `truncation` fixes the theta box
/// radius instead of certifying one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub genus: usize,
    pub branch_points: Vec<[f64; 2]>,
    #[serde(rename = "D")]
    pub d: Vec<[f64; 2]>,
    #[serde(rename = "P0")]
    pub p0: [f64; 2],
    #[serde(default)]
    pub truncation: Option<usize>,
}

impl SpectralData {
    pub fn genus_one_example() -> Self {
        let t = std::f64::consts::FRAC_PI_4;
        Self { genus: 1, branch_points: vec![[0.25, 0.0]], d: vec![[0.0, 0.0]], p0: [t.cos(), t.sin()], truncation: None }
    }
}

fn c(p: &[f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Debug, Clone)]
pub struct FiniteGapSolution {
    pub curve: HyperellipticCurve,
    pub periods: PeriodData,
    pub point: MarkedPoint,
    pub d: Vec<C64>,
    pub theta: Theta,
}

/// theta(W) below this fraction of theta(W + Delta) in modulus counts as hitting the divisor.
pub const DIVISOR_GUARD: f64 = 1e-10;

impl FiniteGapSolution {
    pub fn new(sd: &SpectralData) -> Result<Self> {
        if sd.branch_points.len() != sd.genus || sd.d.len() != sd.genus {
            return Err(GeomError::Invalid(format!(
                "genus {} needs {0} branch points and {0} entries of D, got {} and {}",
                sd.genus,
                sd.branch_points.len(),
                sd.d.len()
            )));
        }
        let d: Vec<C64> = sd.d.iter().map(c).collect();
        if let Some(v) = d.iter().find(|v| v.re.abs() > 1e-12) {
            return Err(GeomError::Invalid(format!("D must be purely imaginary, got {v}")));
        }
        let curve = HyperellipticCurve::new(sd.branch_points.iter().map(c).collect())?;
        let periods = compute_periods(&curve)?;
        let point = abel_point(&curve, &periods, c(&sd.p0))?;
        let theta = match sd.truncation {
            Some(r) => Theta::with_radius(periods.b.clone(), r)?,
            None => Theta::new(periods.b.clone(), THETA_TOL)?,
        };
        Ok(Self { curve, periods, point, d, theta })
    }

    fn shifted(&self, w: &[C64], by: &[C64], sign: f64) -> Vec<C64> {
        w.iter().zip(by).map(|(a, b)| a + b * sign).collect()
    }

    /// W = i Re(U z) + D.
    pub fn w(&self, z: C64) -> Vec<C64> {
        self.periods.u.iter().zip(&self.d).map(|(u, d)| I * (u * z).re + d).collect()
    }

    fn theta_pair(&self, z: C64) -> Result<((C64, Vec<C64>), (C64, Vec<C64>))> {
        let w = self.w(z);
        let lo = self.theta.value_and_gradient(&w);
        let hi = self.theta.value_and_gradient(&self.shifted(&w, &self.periods.delta, 1.0));
        if lo.0.norm() < DIVISOR_GUARD * hi.0.norm() || lo.0.norm() == 0.0 {
            return Err(GeomError::ThetaDivisor(0));
        }
        Ok((lo, hi))
    }

    /// Complex 2 log(theta(W + Delta)/theta(W)); real for imaginary D.
    pub fn u_complex(&self, z: C64) -> Result<C64> {
        let ((lo, _), (hi, _)) = self.theta_pair(z)?;
        Ok(2.0 * (hi / lo).ln())
    }

    pub fn u(&self, z: C64) -> Result<f64> {
        self.u_complex(z).map(|v| v.re)
    }

    /// u and u_z, the latter from the theta gradient with dW/dz = iU/2.
    pub fn u_and_uz(&self, z: C64) -> Result<(f64, C64)> {
        let ((lo, glo), (hi, ghi)) = self.theta_pair(z)?;
        let mut uz = C64::ZERO;
        for (n, u) in self.periods.u.iter().enumerate() {
            let dw = I * u * 0.5;
            uz += 2.0 * dw * (ghi[n] / hi - glo[n] / lo);
        }
        Ok((2.0 * (hi / lo).ln().re, uz))
    }

    /// Theta-quotient frame at z, solving the loop system at lambda0.
    pub fn frame(&self, z: C64) -> Result<Mat2> {
        let w = self.w(z);
        let delta = &self.periods.delta;
        let l = &self.point.l;
        let wd = self.shifted(&w, delta, 1.0);
        let th = |v: &[C64]| self.theta.value(v);
        let (t0, td) = (th(&w), th(&wd));
        if t0.norm() < DIVISOR_GUARD * td.norm() || t0.norm() == 0.0 {
            return Err(GeomError::ThetaDivisor(0));
        }
        let pre = I / (t0 * td).sqrt();
        let e = (z * self.point.big_l).re;
        let (ep, em) = (C64::from_polar(1.0, e), C64::from_polar(1.0, -e));
        Ok(Mat2::new(
            pre * th(&self.shifted(&w, l, 1.0)) * ep,
            pre * th(&self.shifted(&w, l, -1.0)) * em,
            pre * th(&self.shifted(&wd, l, 1.0)) * ep,
            -pre * th(&self.shifted(&wd, l, -1.0)) * em,
        ))
    }

    /// 2 theta(l) theta(l + Delta) / (theta(0) theta(Delta)).
    pub fn det_normalization(&self) -> C64 {
        let g = self.periods.genus;
        let zero = vec![C64::ZERO; g];
        let l = &self.point.l;
        let ld = self.shifted(l, &self.periods.delta, 1.0);
        2.0 * self.theta.value(l) * self.theta.value(&ld) / (self.theta.value(&zero) * self.theta.value(&self.periods.delta))
    }

    pub fn lambda0(&self) -> C64 {
        self.point.lambda0
    }

    /// u sampled on a lattice.
    pub fn sample_u(&self, lattice: &Lattice) -> Result<Vec<f64>> {
        lattice
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, z)| self.u(*z).map_err(|e| relabel(e, k)))
            .collect()
    }

    /// Max |det Phi - normalization| over the lattice.
    pub fn det_defect(&self, lattice: &Lattice) -> Result<f64> {
        let target = self.det_normalization();
        let mut worst: f64 = 0.0;
        for (k, z) in lattice.nodes().iter().enumerate() {
            let phi = self.frame(*z).map_err(|e| relabel(e, k))?;
            worst = worst.max((det2(&phi) - target).norm());
        }
        Ok(worst)
    }

    /// Max over the lattice of |Phi_z Phi^{-1} - U0| and |Phi_zbar Phi^{-1} - V0|
    /// with central differences of step `h`.
    pub fn lax_residual(&self, lattice: &Lattice, h: f64) -> Result<f64> {
        let lambda = self.lambda0();
        let mut worst: f64 = 0.0;
        for (k, z) in lattice.nodes().iter().enumerate() {
            let relab = |e| relabel(e, k);
            let p = self.frame(*z).map_err(relab)?;
            // the square-root prefactor is fixed up to sign; align neighbours
            let at = |dz: C64| -> Result<Mat2> {
                let q = self.frame(z + dz)?;
                Ok(if (q - p).norm() <= (q + p).norm() { q } else { -q })
            };
            let dx = (at(C64::from(h)).map_err(relab)? - at(C64::from(-h)).map_err(relab)?) / C64::from(2.0 * h);
            let dy = (at(I * h).map_err(relab)? - at(-I * h).map_err(relab)?) / C64::from(2.0 * h);
            let pz = (dx - dy * I) * C64::from(0.5);
            let pzb = (dx + dy * I) * C64::from(0.5);
            let inv = crate::quatgeo::inv2(&p).ok_or(GeomError::Singular(format!("theta frame at node {k}")))?;
            let (u, uz) = self.u_and_uz(*z).map_err(relab)?;
            let (u0, v0) = crate::frameflow::uv_cmc_at(u, uz, C64::from(0.5), lambda);
            worst = worst.max((pz * inv - u0).norm()).max((pzb * inv - v0).norm());
        }
        Ok(worst)
    }
}

fn relabel(e: GeomError, k: usize) -> GeomError {
    match e {
        GeomError::ThetaDivisor(_) => GeomError::ThetaDivisor(k),
        other => other,
    }
}

/// Finite-gap data seen as an H = 1 surface with Q = 1/2. Theta-divisor
/// hits yield NaN, which the frame integrator rejects.
impl CmcField for FiniteGapSolution {
    fn u(&self, z: C64) -> f64 {
        FiniteGapSolution::u(self, z).unwrap_or(f64::NAN)
    }
    fn u_z(&self, z: C64) -> C64 {
        self.u_and_uz(z).map(|v| v.1).unwrap_or(C64::new(f64::NAN, f64::NAN))
    }
    fn q(&self, _: C64) -> C64 {
        C64::from(0.5)
    }
}

/// u = 2 log theta(W + Delta)/theta(W) at z.
pub fn sinh_gordon_u(z: C64, sol: &FiniteGapSolution) -> Result<f64> {
    sol.u(z)
}

/// Distances to the closing conditions for periods Z1, Z2. Nothing is searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityReport {
    /// Per period: max_n dist(Re(Z U_n), 2 pi Z).
    pub theta_lattice: [f64; 2],
    /// Per period: dist(Re(2 Z L), 2 pi Z).
    pub frame_phase: [f64; 2],
    /// |Omega_inf / dL| at the marked point.
    pub omega_at_p0: f64,
}

fn dist_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    r.min(TAU - r)
}

pub fn periodicity_check(sol: &FiniteGapSolution, z1: C64, z2: C64) -> PeriodicityReport {
    let per = |z: C64| -> (f64, f64) {
        let lat = sol.periods.u.iter().map(|u| dist_2pi((z * u).re)).fold(0.0, f64::max);
        (lat, dist_2pi((2.0 * z * sol.point.big_l).re))
    };
    let (a1, b1) = per(z1);
    let (a2, b2) = per(z2);
    let lam0 = sol.point.lambda0 * sol.point.lambda0;
    let omega = (sol.periods.omega_inf_numerator(lam0) / sol.curve.m(lam0)).norm();
    PeriodicityReport { theta_lattice: [a1, a2], frame_phase: [b1, b2], omega_at_p0: omega }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatgeo::{Diff, Stencil};

    fn sol() -> FiniteGapSolution {
        FiniteGapSolution::new(&SpectralData::genus_one_example()).unwrap()
    }

    #[test]
    fn spectral_json_round_trip() {
        let sd = SpectralData::genus_one_example();
        let s = serde_json::to_string(&sd).unwrap();
        assert!(s.contains("\"D\"") && s.contains("\"P0\""));
        assert_eq!(serde_json::from_str::<SpectralData>(&s).unwrap(), sd);
    }

    #[test]
    fn rejects_real_shift_and_bad_lengths() {
        let mut sd = SpectralData::genus_one_example();
        sd.d = vec![[0.1, 0.0]];
        assert!(FiniteGapSolution::new(&sd).is_err());
        sd.d = vec![];
        assert!(FiniteGapSolution::new(&sd).is_err());
    }

    #[test]
    fn u_is_real_and_solves_sinh_gordon() {
        let s = sol();
        let h = 1e-3;
        let lat = Lattice::centered(C64::new(0.1, 0.2), 11, 11, h);
        for z in lat.nodes() {
            assert!(s.u_complex(z).unwrap().im.abs() < 1e-10);
        }
        let u = s.sample_u(&lat).unwrap();
        let d = Diff::new(lat, Stencil::Second).unwrap();
        let uc: Vec<C64> = u.iter().map(|&v| C64::from(v)).collect();
        let lap = d.dzdzbar(&uc);
        let res = d.interior_max(|k| (lap[k].re + u[k].sinh()).abs());
        assert!(res < 1e-5, "{res}");
    }

    #[test]
    fn u_invariant_under_lattice_shift() {
        let s = sol();
        let mut shifted = s.clone();
        shifted.d = vec![C64::new(0.0, TAU)];
        let z = C64::new(0.3, -0.4);
        assert!((s.u(z).unwrap() - shifted.u(z).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn exact_uz_matches_difference() {
        let s = sol();
        let z = C64::new(0.2, 0.1);
        let h = 1e-5;
        let dx = (s.u(z + h).unwrap() - s.u(z - h).unwrap()) / (2.0 * h);
        let dy = (s.u(z + I * h).unwrap() - s.u(z - I * h).unwrap()) / (2.0 * h);
        let (_, uz) = s.u_and_uz(z).unwrap();
        assert!((uz - C64::new(dx, -dy) * 0.5).norm() < 1e-8);
    }

    #[test]
    fn frame_determinant_and_lax_system() {
        let s = sol();
        let lat = Lattice::centered(C64::new(0.1, 0.2), 5, 5, 0.1);
        assert!(s.det_defect(&lat).unwrap() < 1e-8);
        let r1 = s.lax_residual(&lat, 1e-3).unwrap();
        let r2 = s.lax_residual(&lat, 5e-4).unwrap();
        assert!(r1 < 1e-5 && r2 < 0.3 * r1, "{r1} {r2}");
    }

    #[test]
    fn periodicity_report() {
        let s = sol();
        let r = periodicity_check(&s, C64::ZERO, C64::ZERO);
        assert_eq!(r.theta_lattice, [0.0, 0.0]);
        assert_eq!(r.frame_phase, [0.0, 0.0]);
        assert!(r.omega_at_p0 > 0.0);
        let g = periodicity_check(&s, C64::new(0.37, 0.11), C64::new(-0.2, 1.3));
        assert!(g.theta_lattice[0] > 0.0 && g.frame_phase[1] > 0.0);
        assert_eq!(g.omega_at_p0, r.omega_at_p0);
    }

    #[test]
    fn genus_two_solution() {
        let sd = SpectralData {
            genus: 2,
            branch_points: vec![[0.3, 0.0], [0.4 * 2f64.cos(), 0.4 * 2f64.sin()]],
            d: vec![[0.0, 0.2], [0.0, -0.5]],
            p0: [0.3f64.cos(), 0.3f64.sin()],
            truncation: None,
        };
        let s = FiniteGapSolution::new(&sd).unwrap();
        let lat = Lattice::centered(C64::new(0.1, 0.2), 7, 7, 1e-3);
        for z in lat.nodes() {
            assert!(s.u_complex(z).unwrap().im.abs() < 1e-10);
        }
        let u = s.sample_u(&lat).unwrap();
        let d = Diff::new(lat, Stencil::Second).unwrap();
        let uc: Vec<C64> = u.iter().map(|&v| C64::from(v)).collect();
        let lap = d.dzdzbar(&uc);
        assert!(d.interior_max(|k| (lap[k].re + u[k].sinh()).abs()) < 1e-5);
        let coarse = Lattice::centered(C64::new(0.1, 0.2), 3, 3, 0.2);
        assert!(s.det_defect(&coarse).unwrap() < 1e-8);
        assert!(s.lax_residual(&coarse, 1e-3).unwrap() < 1e-4);
    }

    #[test]
    fn sym_surface_has_unit_mean_curvature() {
        use crate::frameflow::{cmc_sym_surface, TDerivative};
        let s = sol();
        let lat = Lattice::centered(C64::new(0.1, 0.2), 21, 21, 1e-3);
        let surf = cmc_sym_surface(&s, &lat, std::f64::consts::FRAC_PI_4, TDerivative::Exact).unwrap();
        let fd = crate::quatgeo::estimate_fundamental_data(&surf).unwrap();
        let d = Diff::new(lat, Stencil::Fourth).unwrap();
        let u = s.sample_u(&lat).unwrap();
        assert!(d.interior_max(|k| (fd.h[k] - 1.0).abs()) < 1e-3);
        assert!(d.interior_max(|k| (fd.u[k] - u[k]).abs()) < 1e-3);
        assert!(d.interior_max(|k| (fd.q[k].norm() - 0.5).abs()) < 1e-3);
    }
}
