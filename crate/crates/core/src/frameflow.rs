//! Moving-frame integration Phi_z = U Phi, Phi_zbar = V Phi on a lattice,
//! the CMC loop-parameter family, the Sym formula and gauge normalization.

use std::f64::consts::FRAC_PI_2;

use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::error::{GeomError, Result};
use crate::quatgeo::grid::interpolate;
use crate::quatgeo::{inv2, sigma3, Diff, FundamentalData, ImVec3, Lattice, Mat2, Quaternion, Stencil, SurfaceGrid, C64, I};

pub type Mat4 = SMatrix<C64, 4, 4>;

/// Potential norm above which each RK4 step is split in four.
pub const SUBSTEP_NORM: f64 = 10.0;
/// Default integration tolerance; a relative path defect above 100x this is rejected.
pub const FRAME_TOL: f64 = 1e-8;
/// Default t-step of the central-difference Sym derivative.
pub const SYM_DELTA: f64 = 1e-3;

/// Sampled U, V on a lattice, optionally tagged with the loop parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePotentials {
    pub lattice: Lattice,
    pub u: Vec<Mat2>,
    pub v: Vec<Mat2>,
    pub lambda: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub lattice: Lattice,
    pub phi: Vec<Mat2>,
    /// Relative disagreement between x-first and y-first integration.
    pub path_defect: f64,
}

/// U, V for the conformal frame with det Phi = e^{u/2}.
pub fn uv_at(u: f64, uz: C64, q: C64, h: f64) -> (Mat2, Mat2) {
    let (ep, em) = ((0.5 * u).exp(), (-0.5 * u).exp());
    let hu = C64::from(0.5 * h * ep);
    let uu = Mat2::new(uz * 0.5, -q * em, hu, C64::ZERO);
    let vv = Mat2::new(C64::ZERO, -hu, q.conj() * em, uz.conj() * 0.5);
    (uu, vv)
}

/// U0(lambda), V0(lambda) of the H = 1 loop family.
pub fn uv_cmc_at(u: f64, uz: C64, q: C64, lambda: C64) -> (Mat2, Mat2) {
    let (ep, em) = ((0.5 * u).exp(), (-0.5 * u).exp());
    let uu = Mat2::new(uz * 0.25, I * lambda * q * em, I * lambda * 0.5 * ep, -uz * 0.25);
    let vv = Mat2::new(-uz.conj() * 0.25, I / lambda * 0.5 * ep, I / lambda * q.conj() * em, uz.conj() * 0.25);
    (uu, vv)
}

/// d/dlambda of [`uv_cmc_at`].
pub fn uv_cmc_dlambda(u: f64, q: C64, lambda: C64) -> (Mat2, Mat2) {
    let (ep, em) = ((0.5 * u).exp(), (-0.5 * u).exp());
    let l2 = lambda * lambda;
    let uu = Mat2::new(C64::ZERO, I * q * em, I * 0.5 * ep, C64::ZERO);
    let vv = Mat2::new(C64::ZERO, -I / l2 * 0.5 * ep, -I / l2 * q.conj() * em, C64::ZERO);
    (uu, vv)
}

fn u_z(d: &Diff, u: &[f64]) -> Vec<C64> {
    let uc: Vec<C64> = u.iter().map(|&v| C64::from(v)).collect();
    d.dz(&uc)
}

pub fn build_uv(fd: &FundamentalData) -> Result<FramePotentials> {
    let d = Diff::new(fd.lattice, Stencil::default())?;
    let uz = u_z(&d, &fd.u);
    let (u, v) = (0..fd.lattice.len()).map(|k| uv_at(fd.u[k], uz[k], fd.q[k], fd.h[k])).unzip();
    Ok(FramePotentials { lattice: fd.lattice, u, v, lambda: None })
}

pub fn build_uv_cmc(lattice: Lattice, u: &[f64], q: &[C64], lambda: C64) -> Result<FramePotentials> {
    lattice.check_len(u.len(), "u")?;
    lattice.check_len(q.len(), "Q")?;
    let d = Diff::new(lattice, Stencil::default())?;
    let uz = u_z(&d, u);
    let (uu, vv) = (0..lattice.len()).map(|k| uv_cmc_at(u[k], uz[k], q[k], lambda)).unzip();
    Ok(FramePotentials { lattice, u: uu, v: vv, lambda: Some(lambda) })
}

impl FramePotentials {
    /// Max interior norm of U_zbar - V_z + [U, V].
    pub fn zero_curvature_residual(&self) -> Result<f64> {
        let d = Diff::new(self.lattice, Stencil::default())?;
        let entry = |m: &[Mat2], r: usize, c: usize| -> Vec<C64> { m.iter().map(|x| x[(r, c)]).collect() };
        let mut res = vec![Mat2::zeros(); self.lattice.len()];
        for r in 0..2 {
            for c in 0..2 {
                let uzb = d.dzbar(&entry(&self.u, r, c));
                let vz = d.dz(&entry(&self.v, r, c));
                for k in 0..self.lattice.len() {
                    res[k][(r, c)] += uzb[k] - vz[k];
                }
            }
        }
        for (k, m) in res.iter_mut().enumerate() {
            *m += self.u[k] * self.v[k] - self.v[k] * self.u[k];
        }
        Ok(d.interior_max(|k| res[k].norm()))
    }

    /// Potentials at an arbitrary point by bicubic interpolation.
    pub fn at(&self, z: C64) -> (Mat2, Mat2) {
        (interpolate_mat(&self.lattice, &self.u, z), interpolate_mat(&self.lattice, &self.v, z))
    }
}

fn interpolate_mat(lat: &Lattice, f: &[Mat2], z: C64) -> Mat2 {
    let entry = |r: usize, c: usize| -> C64 {
        let e: Vec<C64> = f.iter().map(|m| m[(r, c)]).collect();
        interpolate(lat, &e, z)
    };
    Mat2::new(entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1))
}

fn rk4_step<const N: usize, const K: usize, F>(field: &F, dir: Dir, z: C64, step: f64, psi: SMatrix<C64, N, K>) -> SMatrix<C64, N, K>
where
    F: Fn(C64) -> (SMatrix<C64, N, N>, SMatrix<C64, N, N>),
{
    let gen = |z: C64| -> SMatrix<C64, N, N> {
        let (u, v) = field(z);
        match dir {
            Dir::X => u + v,
            Dir::Y => (u - v) * I,
        }
    };
    let unit = match dir {
        Dir::X => C64::ONE,
        Dir::Y => I,
    };
    let sub = if gen(z).norm() > SUBSTEP_NORM { 4 } else { 1 };
    let hs = step / sub as f64;
    let mut psi = psi;
    let mut zc = z;
    for _ in 0..sub {
        let a0 = gen(zc);
        let am = gen(zc + unit * (0.5 * hs));
        let a1 = gen(zc + unit * hs);
        let k1 = a0 * psi;
        let k2 = am * (psi + k1 * C64::from(0.5 * hs));
        let k3 = am * (psi + k2 * C64::from(0.5 * hs));
        let k4 = a1 * (psi + k3 * C64::from(hs));
        psi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(hs / 6.0);
        zc += unit * hs;
    }
    psi
}

#[derive(Debug, Clone, Copy)]
enum Dir {
    X,
    Y,
}

fn sweep<const N: usize, const K: usize, F>(field: &F, lat: &Lattice, dir: Dir, fixed: usize, start: usize, value: SMatrix<C64, N, K>) -> Vec<SMatrix<C64, N, K>>
where
    F: Fn(C64) -> (SMatrix<C64, N, N>, SMatrix<C64, N, N>),
{
    let (n, h) = match dir {
        Dir::X => (lat.nx, lat.hx),
        Dir::Y => (lat.ny, lat.hy),
    };
    let node = |s: usize| match dir {
        Dir::X => lat.z(s, fixed),
        Dir::Y => lat.z(fixed, s),
    };
    let mut out = vec![value; n];
    for s in start + 1..n {
        out[s] = rk4_step(field, dir, node(s - 1), h, out[s - 1]);
    }
    for s in (0..start).rev() {
        out[s] = rk4_step(field, dir, node(s + 1), -h, out[s + 1]);
    }
    out
}

/// RK4 integration of Psi_z = U Psi, Psi_zbar = V Psi along grid lines
/// starting at `node`: x-first along the base row, then up and down every
/// column. A y-first pass measures the relative path defect; above
/// `100 * tol` the potentials are rejected as incompatible.
pub fn integrate_linear<const N: usize, const K: usize, F>(
    lattice: &Lattice,
    field: F,
    base: SMatrix<C64, N, K>,
    node: (usize, usize),
    tol: f64,
) -> Result<(Vec<SMatrix<C64, N, K>>, f64)>
where
    F: Fn(C64) -> (SMatrix<C64, N, N>, SMatrix<C64, N, N>) + Sync,
{
    lattice.validate()?;
    let lat = *lattice;
    let (i0, j0) = node;
    if i0 >= lat.nx || j0 >= lat.ny {
        return Err(GeomError::Invalid(format!("base node ({i0},{j0}) outside lattice")));
    }
    let row = sweep(&field, &lat, Dir::X, j0, i0, base);
    let cols: Vec<Vec<_>> = (0..lat.nx).into_par_iter().map(|i| sweep(&field, &lat, Dir::Y, i, j0, row[i])).collect();
    let mut out = vec![base; lat.len()];
    for (i, c) in cols.iter().enumerate() {
        for (j, v) in c.iter().enumerate() {
            out[lat.index(i, j)] = *v;
        }
    }
    let col = sweep(&field, &lat, Dir::Y, i0, j0, base);
    let rows: Vec<Vec<_>> = (0..lat.ny).into_par_iter().map(|j| sweep(&field, &lat, Dir::X, j, i0, col[j])).collect();
    let scale = out.iter().map(|m| m.norm()).fold(1.0, f64::max);
    let mut defect: f64 = 0.0;
    for (j, r) in rows.iter().enumerate() {
        for (i, v) in r.iter().enumerate() {
            defect = defect.max((out[lat.index(i, j)] - v).norm() / scale);
        }
    }
    if !defect.is_finite() || defect > 100.0 * tol {
        return Err(GeomError::PathDependence { defect, tol: 100.0 * tol });
    }
    Ok((out, defect))
}

/// Frame integration from sampled potentials; half-step values come from
/// bicubic interpolation of the samples.
pub fn integrate_frame(fp: &FramePotentials, phi0: Mat2, node: (usize, usize)) -> Result<FrameField> {
    let (phi, path_defect) = integrate_linear(&fp.lattice, |z| fp.at(z), phi0, node, FRAME_TOL)?;
    Ok(FrameField { lattice: fp.lattice, phi, path_defect })
}

/// Frame integration from potentials known in closed form.
pub fn integrate_frame_fn<F>(lattice: &Lattice, field: F, phi0: Mat2, node: (usize, usize), tol: f64) -> Result<FrameField>
where
    F: Fn(C64) -> (Mat2, Mat2) + Sync,
{
    let (phi, path_defect) = integrate_linear(lattice, field, phi0, node, tol)?;
    Ok(FrameField { lattice: *lattice, phi, path_defect })
}

/// Q^t = e^{2it} Q.
pub fn associated_family(q: &[C64], t: f64) -> Vec<C64> {
    let ph = C64::from_polar(1.0, 2.0 * t);
    q.iter().map(|v| v * ph).collect()
}

/// Conformal data of an H = 1 surface evaluated anywhere on the chart.
pub trait CmcField: Sync {
    fn u(&self, z: C64) -> f64;
    fn u_z(&self, z: C64) -> C64;
    fn q(&self, z: C64) -> C64;
}

/// u = 0, Q = 1/2: the cylinder of radius 1/2.
#[derive(Debug, Clone, Copy, Default)]
pub struct Vacuum;

impl CmcField for Vacuum {
    fn u(&self, _: C64) -> f64 {
        0.0
    }
    fn u_z(&self, _: C64) -> C64 {
        C64::ZERO
    }
    fn q(&self, _: C64) -> C64 {
        C64::new(0.5, 0.0)
    }
}

/// Lattice samples of (u, u_z, Q), interpolated between nodes.
#[derive(Debug, Clone)]
pub struct SampledCmc {
    pub lattice: Lattice,
    pub u: Vec<f64>,
    pub uz: Vec<C64>,
    pub q: Vec<C64>,
}

impl SampledCmc {
    pub fn new(lattice: Lattice, u: Vec<f64>, q: Vec<C64>) -> Result<Self> {
        lattice.check_len(u.len(), "u")?;
        lattice.check_len(q.len(), "Q")?;
        let d = Diff::new(lattice, Stencil::default())?;
        let uz = u_z(&d, &u);
        Ok(Self { lattice, u, uz, q })
    }
}

impl CmcField for SampledCmc {
    fn u(&self, z: C64) -> f64 {
        interpolate(&self.lattice, &self.u, z)
    }
    fn u_z(&self, z: C64) -> C64 {
        interpolate(&self.lattice, &self.uz, z)
    }
    fn q(&self, z: C64) -> C64 {
        interpolate(&self.lattice, &self.q, z)
    }
}

/// SU(2) frame at loop parameter `lambda`, identity at the grid centre.
pub fn cmc_frame<C: CmcField>(field: &C, lattice: &Lattice, lambda: C64) -> Result<FrameField> {
    integrate_frame_fn(
        lattice,
        |z| uv_cmc_at(field.u(z), field.u_z(z), field.q(z), lambda),
        Mat2::identity(),
        lattice.center_node(),
        FRAME_TOL,
    )
}

/// Frame and exact t-derivative at lambda = e^{it}, from the
/// lambda-differentiated system integrated alongside the frame.
pub fn cmc_frame_exact_dt<C: CmcField>(field: &C, lattice: &Lattice, t: f64) -> Result<(Vec<Mat2>, Vec<Mat2>)> {
    let lambda = C64::from_polar(1.0, t);
    let block = |z: C64| -> (SMatrix<C64, 4, 4>, SMatrix<C64, 4, 4>) {
        let (u, uz, q) = (field.u(z), field.u_z(z), field.q(z));
        let (a, b) = uv_cmc_at(u, uz, q, lambda);
        let (da, db) = uv_cmc_dlambda(u, q, lambda);
        (stack(&a, &da), stack(&b, &db))
    };
    let mut base = SMatrix::<C64, 4, 2>::zeros();
    base.fixed_view_mut::<2, 2>(2, 0).copy_from(&Mat2::identity());
    let (psi, _) = integrate_linear(lattice, block, base, lattice.center_node(), FRAME_TOL)?;
    let mut phi = Vec::with_capacity(psi.len());
    let mut dphi = Vec::with_capacity(psi.len());
    for p in psi {
        phi.push(p.fixed_view::<2, 2>(2, 0).into_owned());
        dphi.push(p.fixed_view::<2, 2>(0, 0).into_owned() * (I * lambda));
    }
    Ok((phi, dphi))
}

fn stack(a: &Mat2, da: &Mat2) -> SMatrix<C64, 4, 4> {
    let mut m = SMatrix::<C64, 4, 4>::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(da);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(a);
    m
}

/// How the t-derivative in the Sym formula is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TDerivative {
    Central { delta: f64 },
    Exact,
}

/// F = -Phi^{-1} Phi_t + (i/2) Phi^{-1} sigma3 Phi and N = -i Phi^{-1} sigma3 Phi.
pub fn sym_immersion(lattice: &Lattice, phi: &[Mat2], phi_t: &[Mat2]) -> Result<SurfaceGrid> {
    lattice.check_len(phi.len(), "Phi")?;
    lattice.check_len(phi_t.len(), "Phi_t")?;
    let s3 = sigma3();
    let mut f = Vec::with_capacity(phi.len());
    let mut normal = Vec::with_capacity(phi.len());
    for (k, (p, pt)) in phi.iter().zip(phi_t).enumerate() {
        let inv = inv2(p).ok_or(GeomError::NonUnitNormal { index: k, norm: 0.0 })?;
        let rot = inv * s3 * p;
        let n = ImVec3::from_matrix(&(rot * -I));
        let len = n.norm();
        if (len - 1.0).abs() > 1e-6 {
            return Err(GeomError::NonUnitNormal { index: k, norm: len });
        }
        f.push(ImVec3::from_matrix(&(-(inv * pt) + rot * (I * 0.5))));
        normal.push(n);
    }
    SurfaceGrid::new(*lattice, f, normal)
}

/// Sym immersion of the CMC surface at lambda = e^{it}.
pub fn cmc_sym_surface<C: CmcField>(field: &C, lattice: &Lattice, t: f64, mode: TDerivative) -> Result<SurfaceGrid> {
    let (phi, phi_t) = match mode {
        TDerivative::Exact => cmc_frame_exact_dt(field, lattice, t)?,
        TDerivative::Central { delta } => {
            let phi = cmc_frame(field, lattice, C64::from_polar(1.0, t))?.phi;
            let plus = cmc_frame(field, lattice, C64::from_polar(1.0, t + delta))?.phi;
            let minus = cmc_frame(field, lattice, C64::from_polar(1.0, t - delta))?.phi;
            let dt = plus.iter().zip(&minus).map(|(a, b)| (a - b) / C64::from(2.0 * delta)).collect();
            (phi, dt)
        }
    };
    sym_immersion(lattice, &phi, &phi_t)
}

/// Coefficient A in phi_z phi^{-1} = A lambda + B, from frames at two loop parameters.
pub fn lambda_linear_part(lattice: &Lattice, phi1: &[Mat2], l1: C64, phi2: &[Mat2], l2: C64) -> Result<Vec<Mat2>> {
    let d = Diff::new(*lattice, Stencil::default())?;
    let log_der = |phi: &[Mat2]| -> Result<Vec<Mat2>> {
        let mut out = vec![Mat2::zeros(); phi.len()];
        for r in 0..2 {
            for c in 0..2 {
                let e: Vec<C64> = phi.iter().map(|m| m[(r, c)]).collect();
                for (k, v) in d.dz(&e).into_iter().enumerate() {
                    out[k][(r, c)] = v;
                }
            }
        }
        out.iter_mut()
            .zip(phi)
            .enumerate()
            .map(|(k, (m, p))| inv2(p).map(|pi| *m * pi).ok_or(GeomError::Singular(format!("frame at node {k}"))))
            .collect()
    };
    let (m1, m2) = (log_der(phi1)?, log_der(phi2)?);
    Ok(m1.iter().zip(&m2).map(|(a, b)| (a - b) / (l1 - l2)).collect())
}

/// Phi0 = exp((i/2) gamma sigma3) phi with gamma = arg A21 - pi/2, which
/// makes the lambda-linear (2,1) entry positive imaginary as in U0.
pub fn gauge_normalize(phi: &[Mat2], a21: &[C64]) -> Result<Vec<Mat2>> {
    let amax = a21.iter().map(|a| a.norm()).fold(0.0, f64::max);
    phi.iter()
        .zip(a21)
        .enumerate()
        .map(|(k, (p, a))| {
            if a.norm() <= 1e-12 * amax.max(1e-300) {
                return Err(GeomError::VanishingA21(k));
            }
            let g = 0.5 * (a.arg() - FRAC_PI_2);
            let gauge = Mat2::new(C64::from_polar(1.0, g), C64::ZERO, C64::ZERO, C64::from_polar(1.0, -g));
            Ok(gauge * p)
        })
        .collect()
}

/// Max over nodes of |Phi^* Phi - Id|.
pub fn unitarity_defect(phi: &[Mat2]) -> f64 {
    phi.iter().map(|p| (p.adjoint() * p - Mat2::identity()).norm()).fold(0.0, f64::max)
}

/// Max over nodes of |det Phi - target|.
pub fn det_defect(phi: &[Mat2], target: impl Fn(usize) -> C64) -> f64 {
    phi.iter()
        .enumerate()
        .map(|(k, p)| (crate::quatgeo::det2(p) - target(k)).norm())
        .fold(0.0, f64::max)
}

/// Quaternion frame of the conformal system, N = Phi^{-1} k Phi.
pub fn normals_from_frame(phi: &[Mat2]) -> Vec<ImVec3> {
    phi.iter()
        .map(|p| {
            let q = Quaternion::from_matrix(p);
            let inv = q.inverse().unwrap_or(Quaternion::ONE);
            (inv * Quaternion::K * q).imag()
        })
        .collect()
}

/// F_x = e^{u/2} Phi^{-1} i Phi and F_y = e^{u/2} Phi^{-1} j Phi for a frame
/// normalized by det Phi = e^{u/2}.
pub fn tangents_from_frame(phi: &[Mat2]) -> (Vec<ImVec3>, Vec<ImVec3>) {
    phi.iter()
        .map(|p| {
            let q = Quaternion::from_matrix(p);
            let n2 = q.norm_sqr();
            let inv = q.conj() * (1.0 / n2);
            // e^{u/2} = |Phi|^2
            ((inv * Quaternion::I * q).imag() * n2, (inv * Quaternion::J * q).imag() * n2)
        })
        .unzip()
}

/// Immersion of a conformal frame: tangents from [`tangents_from_frame`]
/// integrated from the base node, normals N = Phi^{-1} k Phi.
pub fn immersion_from_frame(lattice: &Lattice, phi: &[Mat2], base: (usize, usize), path_tol: f64) -> Result<SurfaceGrid> {
    lattice.check_len(phi.len(), "Phi")?;
    let d = Diff::new(*lattice, Stencil::default())?;
    let (fx, fy) = tangents_from_frame(phi);
    let (f, defect) = crate::quatgeo::integrate_form(&d, &fx, &fy, base, crate::quatgeo::grid::imvec_norm);
    if defect > path_tol {
        return Err(GeomError::PathDependence { defect, tol: path_tol });
    }
    let normal = normals_from_frame(phi);
    let mut s = SurfaceGrid::new(*lattice, f, normal)?.with_tangents(fx, fy);
    s.frame = Some(phi.iter().map(Quaternion::from_matrix).collect());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatgeo::{det2, expm2, sigma1, FundamentalData};

    #[test]
    fn cylinder_potentials() {
        let (u, v) = uv_at(0.0, C64::ZERO, C64::new(0.5, 0.0), 1.0);
        let expect = Mat2::new(C64::ZERO, C64::from(-0.5), C64::from(0.5), C64::ZERO);
        assert!((u - expect).norm() < 1e-15 && (v - expect).norm() < 1e-15);
        let (u, v) = uv_at(0.0, C64::ZERO, C64::ZERO, 0.0);
        assert_eq!(u, Mat2::zeros());
        assert_eq!(v, Mat2::zeros());
    }

    #[test]
    fn traces_match_metric_derivative() {
        let uz = C64::new(0.3, -0.7);
        let (u, v) = uv_at(0.4, uz, C64::new(0.1, 0.2), 0.9);
        assert!((u.trace() - uz * 0.5).norm() < 1e-15);
        assert!((v.trace() - uz.conj() * 0.5).norm() < 1e-15);
    }

    #[test]
    fn cmc_potential_values_and_symmetry() {
        let (u, _) = uv_cmc_at(0.0, C64::ZERO, C64::new(0.5, 0.0), C64::ONE);
        assert!((u - sigma1() * (I * 0.5)).norm() < 1e-15);
        let s3 = sigma3();
        for lam in [I, C64::from_polar(1.0, 0.4)] {
            let (a, b) = uv_cmc_at(0.3, C64::new(0.2, 0.1), C64::new(0.4, -0.3), lam);
            let (am, bm) = uv_cmc_at(0.3, C64::new(0.2, 0.1), C64::new(0.4, -0.3), -lam);
            assert!((am - s3 * a * s3).norm() < 1e-15);
            assert!((bm - s3 * b * s3).norm() < 1e-15);
        }
    }

    #[test]
    fn vacuum_zero_curvature() {
        let lat = Lattice::centered(C64::ZERO, 11, 11, 0.1);
        let fp = build_uv_cmc(lat, &vec![0.0; lat.len()], &vec![C64::new(0.5, 0.0); lat.len()], C64::from_polar(1.0, 0.3)).unwrap();
        assert!(fp.zero_curvature_residual().unwrap() < 1e-14);
    }

    #[test]
    fn trivial_potential_gives_identity() {
        let lat = Lattice::centered(C64::ZERO, 9, 7, 0.1);
        let fd = FundamentalData::from_fn(lat, |_| (0.0, C64::ZERO, 0.0));
        let fp = build_uv(&fd).unwrap();
        let ff = integrate_frame(&fp, Mat2::identity(), lat.center_node()).unwrap();
        assert!(ff.phi.iter().all(|p| (p - Mat2::identity()).norm() < 1e-15));
    }

    #[test]
    fn vacuum_frame_is_matrix_exponential() {
        let lat = Lattice::centered(C64::ZERO, 21, 21, 0.01);
        let lambda = C64::from_polar(1.0, 0.7);
        let ff = cmc_frame(&Vacuum, &lat, lambda).unwrap();
        let (u0, v0) = uv_cmc_at(0.0, C64::ZERO, C64::new(0.5, 0.0), lambda);
        let z0 = lat.z(lat.center_node().0, lat.center_node().1);
        for (k, z) in lat.nodes().iter().enumerate() {
            let dz = z - z0;
            let e = expm2(&(u0 * dz + v0 * dz.conj()));
            assert!((ff.phi[k] - e).norm() < 1e-10);
        }
        assert!(unitarity_defect(&ff.phi) < 1e-10);
    }

    #[test]
    fn associated_family_phases() {
        let q = vec![C64::new(0.5, 0.0), C64::new(-0.1, 0.3)];
        assert_eq!(associated_family(&q, 0.0), q);
        for (a, b) in associated_family(&q, std::f64::consts::PI).iter().zip(&q) {
            assert!((a - b).norm() < 1e-15);
        }
        for (a, b) in associated_family(&q, std::f64::consts::FRAC_PI_4).iter().zip(&q) {
            assert!((a - b * I).norm() < 1e-15);
        }
    }

    #[test]
    fn vacuum_sym_is_half_cylinder() {
        let lat = Lattice::centered(C64::ZERO, 21, 21, 0.01);
        let s = cmc_sym_surface(&Vacuum, &lat, 0.0, TDerivative::Exact).unwrap();
        for (k, z) in lat.nodes().iter().enumerate() {
            let e = ImVec3::new(-z.im, 0.5 * (2.0 * z.re).sin(), -0.5 * (2.0 * z.re).cos());
            assert!((s.f[k] - e).norm() < 1e-9, "{k}");
            assert!((s.normal[k].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sym_tangent_matches_frame_formula() {
        let lat = Lattice::centered(C64::ZERO, 21, 21, 0.02);
        let t = 0.4;
        let lambda = C64::from_polar(1.0, t);
        let (phi, dphi) = cmc_frame_exact_dt(&Vacuum, &lat, t).unwrap();
        let s = sym_immersion(&lat, &phi, &dphi).unwrap();
        let d = Diff::new(lat, Stencil::Fourth).unwrap();
        let (fx, fy) = (d.dx(&s.f), d.dy(&s.f));
        let e21 = Mat2::new(C64::ZERO, C64::ZERO, C64::ONE, C64::ZERO);
        for k in 0..lat.len() {
            if !d.is_interior(k) {
                continue;
            }
            let fz = (fx[k].to_matrix() - fy[k].to_matrix() * I) * C64::from(0.5);
            let expect = inv2(&phi[k]).unwrap() * e21 * phi[k] * lambda;
            assert!((fz - expect).norm() < 1e-7);
        }
    }

    #[test]
    fn gauge_undoes_constant_rotation() {
        let lat = Lattice::centered(C64::ZERO, 15, 15, 0.01);
        let (l1, l2) = (C64::from_polar(1.0, 0.3), C64::from_polar(1.0, 0.5));
        let p1 = cmc_frame(&Vacuum, &lat, l1).unwrap().phi;
        let p2 = cmc_frame(&Vacuum, &lat, l2).unwrap().phi;
        let th = 0.37;
        let g = expm2(&(sigma3() * (I * th)));
        let r1: Vec<Mat2> = p1.iter().map(|p| g * p).collect();
        let r2: Vec<Mat2> = p2.iter().map(|p| g * p).collect();
        let a = lambda_linear_part(&lat, &r1, l1, &r2, l2).unwrap();
        let a21: Vec<C64> = a.iter().map(|m| m[(1, 0)]).collect();
        let fixed = gauge_normalize(&r1, &a21).unwrap();
        let d = Diff::new(lat, Stencil::Fourth).unwrap();
        assert!(d.interior_max(|k| (fixed[k] - p1[k]).norm()) < 1e-8);
        // one-sided boundary stencils are only second order
        assert!(fixed.iter().zip(&p1).all(|(f, p)| (f - p).norm() < 1e-4));
        assert!(matches!(gauge_normalize(&r1, &vec![C64::ZERO; r1.len()]), Err(GeomError::VanishingA21(0))));
    }

    #[test]
    fn frame_determinant_conserved() {
        // cylinder of the conformal system: det Phi = e^{u/2} = 1
        let lat = Lattice::centered(C64::ZERO, 15, 15, 0.01);
        let fd = FundamentalData::from_fn(lat, |_| (0.0, C64::new(0.5, 0.0), 1.0));
        let fp = build_uv(&fd).unwrap();
        let ff = integrate_frame(&fp, Mat2::identity(), lat.center_node()).unwrap();
        assert!(det_defect(&ff.phi, |_| C64::ONE) < 1e-12);
        assert!(ff.phi.iter().all(|p| (det2(p) - C64::ONE).norm() < 1e-12));
    }

    #[test]
    fn sym_family_rotates_hopf_differential() {
        let lat = Lattice::centered(C64::ZERO, 21, 21, 0.01);
        let t = std::f64::consts::FRAC_PI_4;
        let s = cmc_sym_surface(&Vacuum, &lat, t, TDerivative::Exact).unwrap();
        let fd = crate::quatgeo::estimate_fundamental_data(&s).unwrap();
        let d = Diff::new(lat, Stencil::Fourth).unwrap();
        assert!(d.interior_max(|k| (fd.q[k] - I * 0.5).norm()) < 1e-6);
        assert!(d.interior_max(|k| (fd.h[k] - 1.0).abs()) < 1e-6);
        assert!(d.interior_max(|k| fd.u[k].abs()) < 1e-6);
    }

    #[test]
    fn conformal_frame_reproduces_cylinder_data() {
        let lat = Lattice::centered(C64::ZERO, 21, 21, 0.02);
        let fd = FundamentalData::from_fn(lat, |_| (0.0, C64::new(0.5, 0.0), 1.0));
        let fp = build_uv(&fd).unwrap();
        let ff = integrate_frame(&fp, Mat2::identity(), lat.center_node()).unwrap();
        let s = immersion_from_frame(&lat, &ff.phi, lat.center_node(), 1e-8).unwrap();
        let est = crate::quatgeo::estimate_fundamental_data(&s).unwrap();
        let d = Diff::new(lat, Stencil::Fourth).unwrap();
        assert!(d.interior_max(|k| est.u[k].abs()) < 1e-8);
        assert!(d.interior_max(|k| (est.q[k] - 0.5).norm()) < 1e-7);
        assert!(d.interior_max(|k| (est.h[k] - 1.0).abs()) < 1e-7);
    }
}
