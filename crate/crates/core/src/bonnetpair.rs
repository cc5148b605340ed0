//! Bonnet pairs from isothermic surfaces: quaternionic duality, the
//! Bianchi-KPP forms, the 4x4 pair Lax system and the Sym-type formula
//! for both mates.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::frameflow::{integrate_linear, uv_at, Mat4, FRAME_TOL};
use crate::quatgeo::grid::quat_norm;
use crate::quatgeo::{
    estimate_fundamental_data, integrate_form, inv2, normals_from_tangents, Diff, FundamentalData, ImVec3, Lattice, Mat2,
    Quaternion, Stencil, SurfaceGrid, C64,
};

/// Smallest |f_x|, |f_y| accepted as an immersion.
pub const IMMERSION_GUARD: f64 = 1e-8;
/// Relative cutoff below which h = Q2 - Q1 is masked.
pub const HOPF_MASK_REL: f64 = 1e-6;
/// Allowed real part of the pair forms and path defect of their integrals.
pub const PAIR_TOL: f64 = 1e-8;
/// Default step for central differences in the loop parameter.
pub const LAMBDA_DELTA: f64 = 1e-3;

/// Sampled map into the quaternions, with exact tangents when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuatSurface {
    pub lattice: Lattice,
    pub f: Vec<Quaternion>,
    pub tangents: Option<(Vec<Quaternion>, Vec<Quaternion>)>,
}

/// Sampled grid as read from JSON: `f` holds [q0, q1, q2, q3] row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuatSamples {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub f: Vec<[f64; 4]>,
}

impl QuatSurface {
    pub fn new(lattice: Lattice, f: Vec<Quaternion>) -> Result<Self> {
        lattice.check_len(f.len(), "f")?;
        Ok(Self { lattice, f, tangents: None })
    }

    pub fn from_samples(s: &QuatSamples) -> Result<Self> {
        let lat = Lattice::new(s.nx, s.ny, 0.0, 0.0, s.h, s.h);
        lat.validate()?;
        Self::new(lat, s.f.iter().map(|a| Quaternion::from_array(*a)).collect())
    }

    /// Exact tangents if stored, otherwise 4th-order differences.
    pub fn derivatives(&self) -> Result<(Vec<Quaternion>, Vec<Quaternion>)> {
        match &self.tangents {
            Some(t) => Ok(t.clone()),
            None => {
                let d = Diff::new(self.lattice, Stencil::Fourth)?;
                Ok((d.dx(&self.f), d.dy(&self.f)))
            }
        }
    }
}

/// R and its derivatives up to second order at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsothermicJet {
    pub r: Quaternion,
    pub rx: Quaternion,
    pub ry: Quaternion,
    pub rxx: Quaternion,
    pub rxy: Quaternion,
    pub ryy: Quaternion,
}

/// Isothermic surface in Im H known in closed form.
pub trait IsothermicPatch: Sync {
    fn jet(&self, z: C64) -> IsothermicJet;

    fn sample(&self, lattice: &Lattice) -> Result<QuatSurface> {
        lattice.validate()?;
        let jets: Vec<IsothermicJet> = lattice.nodes().into_iter().map(|z| self.jet(z)).collect();
        Ok(QuatSurface {
            lattice: *lattice,
            f: jets.iter().map(|j| j.r).collect(),
            tangents: Some((jets.iter().map(|j| j.rx).collect(), jets.iter().map(|j| j.ry).collect())),
        })
    }
}

/// Round cylinder (cos x) i + (sin x) j + y k.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cylinder;

impl IsothermicPatch for Cylinder {
    fn jet(&self, z: C64) -> IsothermicJet {
        let (s, c) = z.re.sin_cos();
        IsothermicJet {
            r: Quaternion::new(0.0, c, s, z.im),
            rx: Quaternion::new(0.0, -s, c, 0.0),
            ry: Quaternion::K,
            rxx: Quaternion::new(0.0, -c, -s, 0.0),
            rxy: Quaternion::default(),
            ryy: Quaternion::default(),
        }
    }
}

/// Unit sphere in Mercator coordinates (cos y / cosh x, sin y / cosh x, tanh x).
#[derive(Debug, Clone, Copy, Default)]
pub struct MercatorSphere;

impl IsothermicPatch for MercatorSphere {
    fn jet(&self, z: C64) -> IsothermicJet {
        let (x, y) = (z.re, z.im);
        let (sy, cy) = y.sin_cos();
        let (ch, th) = (x.cosh(), x.tanh());
        let sech = 1.0 / ch;
        // d/dx sech = -sech tanh, d/dx tanh = sech^2
        let a = sech;
        let ax = -sech * th;
        let axx = sech * (th * th - sech * sech);
        IsothermicJet {
            r: Quaternion::new(0.0, cy * a, sy * a, th),
            rx: Quaternion::new(0.0, cy * ax, sy * ax, sech * sech),
            ry: Quaternion::new(0.0, -sy * a, cy * a, 0.0),
            rxx: Quaternion::new(0.0, cy * axx, sy * axx, -2.0 * sech * sech * th),
            rxy: Quaternion::new(0.0, -sy * ax, cy * ax, 0.0),
            ryy: Quaternion::new(0.0, -cy * a, -sy * a, 0.0),
        }
    }
}

fn inverse_checked(q: Quaternion, k: usize) -> Result<Quaternion> {
    q.inverse().ok_or(GeomError::NonImmersion(k))
}

/// Max over nodes of the part of f_xy normal to span{f_x, f_y} in R^4, plus
/// the conformality defects ||f_x|^2 - |f_y|^2| and |<f_x, f_y>|.
pub fn isothermic_residual4(f: &QuatSurface) -> Result<f64> {
    let (fx, fy) = f.derivatives()?;
    let d = Diff::new(f.lattice, Stencil::Fourth)?;
    let fxy_a = d.dy(&fx);
    let fxy_b = d.dx(&fy);
    let mut worst: f64 = 0.0;
    for k in 0..f.lattice.len() {
        let (a, b) = (fx[k], fy[k]);
        if a.norm() <= IMMERSION_GUARD || b.norm() <= IMMERSION_GUARD {
            return Err(GeomError::NonImmersion(k));
        }
        if !d.is_interior(k) {
            continue;
        }
        let m = (fxy_a[k] + fxy_b[k]) * 0.5;
        // Gram-Schmidt projection onto span{a, b}
        let e1 = a * (1.0 / a.norm());
        let b_perp = b - e1 * b.dot(e1);
        let mut rest = m - e1 * m.dot(e1);
        if b_perp.norm() > IMMERSION_GUARD {
            let e2 = b_perp * (1.0 / b_perp.norm());
            rest = rest - e2 * rest.dot(e2);
        }
        let conf = (a.norm_sqr() - b.norm_sqr()).abs() + a.dot(b).abs();
        worst = worst.max(rest.norm() + conf);
    }
    Ok(worst)
}

/// Max interior norm of d/dy a - d/dx b for the form a dx + b dy.
pub fn closedness_defect(lattice: &Lattice, a: &[Quaternion], b: &[Quaternion]) -> Result<f64> {
    let d = Diff::new(*lattice, Stencil::Fourth)?;
    let (ay, bx) = (d.dy(a), d.dx(b));
    Ok(d.interior_max(|k| (ay[k] - bx[k]).norm()))
}

/// Integrates df* = -f_x^{-1} dx + f_y^{-1} dy from the lattice centre.
pub fn dual_surface(f: &QuatSurface, path_tol: f64) -> Result<QuatSurface> {
    let (fx, fy) = f.derivatives()?;
    let a: Vec<Quaternion> = fx.iter().enumerate().map(|(k, q)| inverse_checked(*q, k).map(|v| -v)).collect::<Result<_>>()?;
    let b: Vec<Quaternion> = fy.iter().enumerate().map(|(k, q)| inverse_checked(*q, k)).collect::<Result<_>>()?;
    let d = Diff::new(f.lattice, Stencil::Fourth)?;
    let (dual, defect) = integrate_form(&d, &a, &b, f.lattice.center_node(), quat_norm);
    if defect > path_tol {
        return Err(GeomError::PathDependence { defect, tol: path_tol });
    }
    Ok(QuatSurface { lattice: f.lattice, f: dual, tangents: Some((a, b)) })
}

/// T = (1 + R)(1 - R)^{-1}, a map into the unit quaternions.
pub fn stereographic_t(r: &[ImVec3]) -> Result<Vec<Quaternion>> {
    r.iter()
        .enumerate()
        .map(|(k, v)| {
            let q = Quaternion::from(*v);
            let den = (Quaternion::ONE - q).inverse().ok_or(GeomError::Pole(k))?;
            Ok((Quaternion::ONE + q) * den)
        })
        .collect()
}

/// dT = 2 (1 - R)^{-1} dR (1 - R)^{-1} for one tangent direction.
pub fn stereographic_differential(r: ImVec3, dr: ImVec3) -> Result<Quaternion> {
    let inv = (Quaternion::ONE - Quaternion::from(r)).inverse().ok_or(GeomError::Pole(0))?;
    Ok(inv * Quaternion::from(dr) * inv * 2.0)
}

/// Bonnet mates of an isothermic surface R in Im H with their forms.
#[derive(Debug, Clone, PartialEq)]
pub struct BonnetPair {
    pub r: QuatSurface,
    pub dual: QuatSurface,
    pub f1: SurfaceGrid,
    pub f2: SurfaceGrid,
    /// Largest real part of dF1, dF2 before projection to Im H.
    pub real_leak: f64,
    /// Largest path defect of the integrated forms.
    pub path_defect: f64,
}

fn pair_form(r: Quaternion, ds: Quaternion, sign: f64) -> Quaternion {
    let rs = r * sign;
    (Quaternion::ONE - rs) * ds * (Quaternion::ONE + rs) * 0.5
}

fn integrate_mate(lat: &Lattice, fx: Vec<Quaternion>, fy: Vec<Quaternion>, leak: &mut f64, path: &mut f64) -> Result<SurfaceGrid> {
    for q in fx.iter().chain(&fy) {
        *leak = leak.max(q.real().abs());
    }
    let fx: Vec<ImVec3> = fx.iter().map(|q| q.imag()).collect();
    let fy: Vec<ImVec3> = fy.iter().map(|q| q.imag()).collect();
    let d = Diff::new(*lat, Stencil::Fourth)?;
    let (f, defect) = integrate_form(&d, &fx, &fy, lat.center_node(), crate::quatgeo::grid::imvec_norm);
    *path = path.max(defect);
    let normal = normals_from_tangents(&fx, &fy)?;
    Ok(SurfaceGrid::new(*lat, f, normal)?.with_tangents(fx, fy))
}

/// dF1 = 1/2 (1 - R) dR* (1 + R), dF2 = 1/2 (1 + R) dR* (1 - R).
pub fn bonnet_pair_from_isothermic(r: &QuatSurface) -> Result<BonnetPair> {
    if let Some(k) = r.f.iter().position(|q| q.real().abs() > PAIR_TOL) {
        return Err(GeomError::Invalid(format!("R must be imaginary, node {k} has real part {}", r.f[k].real())));
    }
    let dual = dual_surface(r, PAIR_TOL.max(1e-6))?;
    let (sx, sy) = dual.tangents.clone().expect("dual carries its form");
    let lat = r.lattice;
    let mut leak: f64 = 0.0;
    let mut path = 0.0;
    let form = |sign: f64| -> (Vec<Quaternion>, Vec<Quaternion>) {
        (
            r.f.iter().zip(&sx).map(|(rr, s)| pair_form(*rr, *s, sign)).collect(),
            r.f.iter().zip(&sy).map(|(rr, s)| pair_form(*rr, *s, sign)).collect(),
        )
    };
    let (a1, b1) = form(1.0);
    let (a2, b2) = form(-1.0);
    let f1 = integrate_mate(&lat, a1, b1, &mut leak, &mut path)?;
    let f2 = integrate_mate(&lat, a2, b2, &mut leak, &mut path)?;
    if leak > PAIR_TOL {
        return Err(GeomError::RealLeak(leak));
    }
    if path > 1e-6 {
        return Err(GeomError::PathDependence { defect: path, tol: 1e-6 });
    }
    Ok(BonnetPair { r: r.clone(), dual, f1, f2, real_leak: leak, path_defect: path })
}

/// Largest |dF2 - T dF1 T^{-1}| over the nodes, T = (1 + R)/(1 - R).
pub fn conjugation_defect(pair: &BonnetPair) -> Result<f64> {
    let rs: Vec<ImVec3> = pair.r.f.iter().map(|q| q.imag()).collect();
    let t = stereographic_t(&rs)?;
    let (t1x, t1y) = pair.f1.tangents.as_ref().expect("pair tangents");
    let (t2x, t2y) = pair.f2.tangents.as_ref().expect("pair tangents");
    let mut worst: f64 = 0.0;
    for k in 0..t.len() {
        let ti = inverse_checked(t[k], k)?;
        for (a, b) in [(t1x[k], t2x[k]), (t1y[k], t2y[k])] {
            worst = worst.max((Quaternion::from(b) - t[k] * Quaternion::from(a) * ti).norm());
        }
    }
    Ok(worst)
}

/// h = Q2 - Q1 and the real function alpha with Q1 = h(i alpha - 1)/2,
/// Q2 = h(i alpha + 1)/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfSplit {
    pub h: Vec<C64>,
    pub alpha: Vec<f64>,
    /// Nodes where |h| is below the cutoff; alpha is NaN there.
    pub masked: Vec<usize>,
    pub max_im_alpha: f64,
}

pub fn decompose_hopf(q1: &[C64], q2: &[C64], tol: f64) -> Result<HopfSplit> {
    if q1.len() != q2.len() {
        return Err(GeomError::Shape(format!("{} vs {} Hopf samples", q1.len(), q2.len())));
    }
    let h: Vec<C64> = q1.iter().zip(q2).map(|(a, b)| b - a).collect();
    let hmax = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if hmax == 0.0 {
        return Err(GeomError::Invalid("Q1 = Q2 everywhere, the surfaces are congruent".into()));
    }
    let mut alpha = Vec::with_capacity(h.len());
    let mut masked = Vec::new();
    let mut max_im: f64 = 0.0;
    for k in 0..h.len() {
        if h[k].norm() < HOPF_MASK_REL * hmax {
            masked.push(k);
            alpha.push(f64::NAN);
            continue;
        }
        let a = -C64::i() * (q1[k] + q2[k]) / h[k];
        max_im = max_im.max(a.im.abs());
        alpha.push(a.re);
    }
    if max_im > tol {
        return Err(GeomError::Invalid(format!("alpha has imaginary part {max_im:e}, |Q1| != |Q2|")));
    }
    Ok(HopfSplit { h, alpha, masked, max_im_alpha: max_im })
}

/// Residuals comparing the two mates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub metric: f64,
    pub hopf_modulus: f64,
    pub mean_curvature: f64,
    pub holomorphy: f64,
    pub min_hopf_gap: f64,
    pub max_im_alpha: f64,
    pub conjugation: f64,
}

/// Compares estimated (u, Q, H) of the mates over the full-order interior.
pub fn pair_report(pair: &BonnetPair) -> Result<PairReport> {
    let d1 = estimate_fundamental_data(&pair.f1)?;
    let d2 = estimate_fundamental_data(&pair.f2)?;
    let d = Diff::new(pair.f1.lattice, Stencil::Fourth)?;
    let metric = d.interior_max(|k| (d1.u[k].exp() - d2.u[k].exp()).abs());
    let hopf_modulus = d.interior_max(|k| (d1.q[k].norm() - d2.q[k].norm()).abs());
    let mean_curvature = d.interior_max(|k| (d1.h[k] - d2.h[k]).abs());
    let split = decompose_hopf(&d1.q, &d2.q, f64::INFINITY)?;
    let hz = d.dzbar(&split.h);
    // the estimate itself is one order lower next to the boundary
    let (inner, map) = pair.f1.lattice.cropped(2)?;
    let di = Diff::new(inner, Stencil::Fourth)?;
    let holomorphy = di.interior_max(|k| hz[map[k]].norm());
    let min_hopf_gap = (0..d1.q.len()).filter(|&k| d.is_interior(k)).map(|k| split.h[k].norm()).fold(f64::INFINITY, f64::min);
    Ok(PairReport {
        metric,
        hopf_modulus,
        mean_curvature,
        holomorphy,
        min_hopf_gap,
        max_im_alpha: split.max_im_alpha,
        conjugation: conjugation_defect(pair)?,
    })
}

/// Pair data at a point: common u, u_z, H and both Hopf coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPoint {
    pub u: f64,
    pub uz: C64,
    pub h: f64,
    pub q1: C64,
    pub q2: C64,
}

/// Exact first and second derivatives of a mate (sign +1 for F1, -1 for F2).
fn mate_jet(j: &IsothermicJet, sign: f64) -> Result<[Quaternion; 5]> {
    let ix = inverse_checked(j.rx, 0)?;
    let iy = inverse_checked(j.ry, 0)?;
    let (sx, sy) = (-ix, iy);
    let sxx = ix * j.rxx * ix;
    let sxy = ix * j.rxy * ix;
    let syy = -(iy * j.ryy * iy);
    let a = Quaternion::ONE - j.r * sign;
    let b = Quaternion::ONE + j.r * sign;
    let d = |rd: Quaternion, s: Quaternion, sd: Quaternion| -> Quaternion {
        (-(rd * sign) * s * b + a * sd * b + a * s * (rd * sign)) * 0.5
    };
    Ok([(a * sx * b) * 0.5, (a * sy * b) * 0.5, d(j.rx, sx, sxx), d(j.ry, sx, sxy), d(j.ry, sy, syy)])
}

/// (u, u_z, Q, H) of one mate from its exact jet.
fn mate_data(j: &IsothermicJet, sign: f64) -> Result<(f64, C64, C64, f64)> {
    let [fx, fy, fxx, fxy, fyy] = mate_jet(j, sign)?;
    let (ax, ay) = (fx.imag(), fy.imag());
    let eu = 0.5 * (ax.dot(ax) + ay.dot(ay));
    let n = ax.cross(ay);
    let n = n * (1.0 / n.norm());
    let (a, b, c) = (fxx.imag().dot(n), fyy.imag().dot(n), fxy.imag().dot(n));
    // d(e^u)/dx = 2 <F_x, F_xx>, d(e^u)/dy = 2 <F_x, F_xy>
    let uz = C64::new(ax.dot(fxx.imag()), -ax.dot(fxy.imag())) / eu;
    Ok((eu.ln(), uz, C64::new(0.25 * (a - b), -0.5 * c), 0.5 * (a + b) / eu))
}

/// Pair data of the mates of an analytic isothermic patch.
pub fn pair_point<P: IsothermicPatch + ?Sized>(patch: &P, z: C64) -> Result<PairPoint> {
    let j = patch.jet(z);
    let (u, uz, q1, h) = mate_data(&j, 1.0)?;
    let (_, _, q2, _) = mate_data(&j, -1.0)?;
    Ok(PairPoint { u, uz, h, q1, q2 })
}

/// 4x4 pair potentials: the traceless mate frames on the diagonal and the
/// lambda couplings off the diagonal.
pub fn pair_lax_uv(p: &PairPoint, lambda: C64) -> (Mat4, Mat4) {
    let (u0, v0) = pair_lax_uv_split(p);
    let (u1, v1) = pair_coupling(p.u);
    (u0 + u1 * lambda, v0 + v1 * lambda)
}

/// Lambda-independent part.
fn pair_lax_uv_split(p: &PairPoint) -> (Mat4, Mat4) {
    let mut u = Mat4::zeros();
    let mut v = Mat4::zeros();
    for (off, q) in [(0, p.q1), (2, p.q2)] {
        let (a, b) = uv_at(p.u, p.uz, q, p.h);
        let a = a - Mat2::identity() * (p.uz * 0.25);
        let b = b - Mat2::identity() * (p.uz.conj() * 0.25);
        u.fixed_view_mut::<2, 2>(off, off).copy_from(&a);
        v.fixed_view_mut::<2, 2>(off, off).copy_from(&b);
    }
    (u, v)
}

/// Coefficients of lambda.
fn pair_coupling(u: f64) -> (Mat4, Mat4) {
    let mi = -C64::i();
    let (ep, em) = ((0.5 * u).exp(), (-0.5 * u).exp());
    let mut a = Mat4::zeros();
    let mut b = Mat4::zeros();
    a[(1, 2)] = mi * ep;
    a[(2, 1)] = mi * em;
    b[(0, 3)] = mi * ep;
    b[(3, 0)] = mi * em;
    (a, b)
}

/// Zero-curvature residual U_zbar - V_z + [U, V] at z, derivatives by
/// central differences of step `eps`.
pub fn pair_zero_curvature<F: Fn(C64) -> PairPoint>(field: F, z: C64, lambda: C64, eps: f64) -> f64 {
    let uv = |w: C64| pair_lax_uv(&field(w), lambda);
    let (ux1, vx1) = uv(z + eps);
    let (ux0, vx0) = uv(z - eps);
    let (uy1, vy1) = uv(z + C64::i() * eps);
    let (uy0, vy0) = uv(z - C64::i() * eps);
    let s = C64::from(1.0 / (4.0 * eps));
    let u_zbar = ((ux1 - ux0) + (uy1 - uy0) * C64::i()) * s;
    let v_z = ((vx1 - vx0) - (vy1 - vy0) * C64::i()) * s;
    let (u, v) = uv(z);
    (u_zbar - v_z + u * v - v * u).norm()
}

/// Taylor coefficients Phi = P0 + lambda P1 + lambda^2 P2 of a normalized
/// pair frame on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFrame4 {
    pub lattice: Lattice,
    pub p0: Vec<Mat4>,
    pub p1: Vec<Mat4>,
    pub p2: Vec<Mat4>,
}

/// How lambda-derivatives at 0 are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaDerivative {
    /// Central differences of frames at lambda = 0, +-delta, +-delta/2 with
    /// Richardson extrapolation.
    Central { delta: f64 },
    /// Integration of the Taylor coefficients as one block system.
    Exact,
}

/// Initial value G(lambda) = [[1, 0], [lambda, 1]] at the base node, which
/// makes T = Phi2^{-1} Phi1 there and keeps Phi in the twisted loop group.
fn initial_taylor() -> (Mat4, Mat4) {
    let mut p1 = Mat4::zeros();
    p1[(2, 0)] = C64::ONE;
    p1[(3, 1)] = C64::ONE;
    (Mat4::identity(), p1)
}

fn frame_at_lambda<F>(lattice: &Lattice, field: &F, node: (usize, usize), lambda: f64) -> Result<Vec<Mat4>>
where
    F: Fn(C64) -> PairPoint + Sync,
{
    let (p0, p1) = initial_taylor();
    let base = p0 + p1 * C64::from(lambda);
    let lam = C64::from(lambda);
    Ok(integrate_linear(lattice, |z| pair_lax_uv(&field(z), lam), base, node, FRAME_TOL)?.0)
}

/// Normalized pair frame of the data `field`, starting at `node`.
pub fn pair_frame<F>(lattice: &Lattice, field: F, node: (usize, usize), mode: LambdaDerivative) -> Result<PairFrame4>
where
    F: Fn(C64) -> PairPoint + Sync,
{
    match mode {
        LambdaDerivative::Exact => {
            let (p0, p1) = initial_taylor();
            let mut base = SMatrix::<C64, 12, 4>::zeros();
            base.fixed_view_mut::<4, 4>(0, 0).copy_from(&p0);
            base.fixed_view_mut::<4, 4>(4, 0).copy_from(&p1);
            let block = |z: C64| {
                let p = field(z);
                let (u0, v0) = pair_lax_uv_split(&p);
                let (u1, v1) = pair_coupling(p.u);
                let stack = |a0: Mat4, a1: Mat4| {
                    let mut m = SMatrix::<C64, 12, 12>::zeros();
                    for b in 0..3 {
                        m.fixed_view_mut::<4, 4>(4 * b, 4 * b).copy_from(&a0);
                    }
                    m.fixed_view_mut::<4, 4>(4, 0).copy_from(&a1);
                    m.fixed_view_mut::<4, 4>(8, 4).copy_from(&a1);
                    m
                };
                (stack(u0, u1), stack(v0, v1))
            };
            let (sol, _) = integrate_linear(lattice, block, base, node, FRAME_TOL)?;
            let part = |b: usize| -> Vec<Mat4> { sol.iter().map(|m| m.fixed_view::<4, 4>(4 * b, 0).into_owned()).collect() };
            Ok(PairFrame4 { lattice: *lattice, p0: part(0), p1: part(1), p2: part(2) })
        }
        LambdaDerivative::Central { delta } => {
            if !(delta > 0.0) {
                return Err(GeomError::Invalid(format!("lambda step must be positive, got {delta}")));
            }
            let zero = frame_at_lambda(lattice, &field, node, 0.0)?;
            let coeffs = |d: f64| -> Result<(Vec<Mat4>, Vec<Mat4>)> {
                let plus = frame_at_lambda(lattice, &field, node, d)?;
                let minus = frame_at_lambda(lattice, &field, node, -d)?;
                let s1 = C64::from(1.0 / (2.0 * d));
                let s2 = C64::from(1.0 / (2.0 * d * d));
                Ok((
                    plus.iter().zip(&minus).map(|(p, m)| (p - m) * s1).collect(),
                    plus.iter().zip(&minus).zip(&zero).map(|((p, m), c)| (p + m - c * C64::from(2.0)) * s2).collect(),
                ))
            };
            let (a1, a2) = coeffs(delta)?;
            let (b1, b2) = coeffs(0.5 * delta)?;
            let rich = |a: &[Mat4], b: &[Mat4]| -> Vec<Mat4> {
                a.iter().zip(b).map(|(x, y)| (y * C64::from(4.0) - x) * C64::from(1.0 / 3.0)).collect()
            };
            Ok(PairFrame4 { lattice: *lattice, p0: zero, p1: rich(&a1, &b1), p2: rich(&a2, &b2) })
        }
    }
}

fn block(m: &Mat4, r: usize, c: usize) -> Mat2 {
    m.fixed_view::<2, 2>(r, c).into_owned()
}

/// Both mates from a normalized pair frame:
/// F1 = (1/2 Phi^{-1} Phi_ll)_{11} = (P0^{-1} P2)_{11} and
/// F2 = (1/2 Phi^{-1} Phi_ll - (Phi^{-1} Phi_l)_l)_{22} = ((P0^{-1} P1)^2 - P0^{-1} P2)_{22}.
pub fn sym_pair_immersion(frame: &PairFrame4, tol: f64) -> Result<(Vec<ImVec3>, Vec<ImVec3>)> {
    let mut f1 = Vec::with_capacity(frame.p0.len());
    let mut f2 = Vec::with_capacity(frame.p0.len());
    for k in 0..frame.p0.len() {
        let inv = frame.p0[k].try_inverse().ok_or_else(|| GeomError::Singular(format!("pair frame at node {k}")))?;
        let a = inv * frame.p1[k];
        let b = inv * frame.p2[k];
        let t = block(&a, 2, 0);
        let tq = Quaternion::from_matrix(&t);
        let t_defect = Quaternion::matrix_defect(&t) + (tq.norm() - 1.0).abs();
        if t_defect > tol {
            return Err(GeomError::Normalization(format!("T fails |T| = 1 by {t_defect:e} at node {k}")));
        }
        let m1 = block(&b, 0, 0);
        let m2 = block(&(a * a - b), 2, 2);
        for m in [&m1, &m2] {
            let q = Quaternion::from_matrix(m);
            let defect = Quaternion::matrix_defect(m) + q.real().abs();
            if defect > tol {
                return Err(GeomError::Normalization(format!("immersion block is not imaginary ({defect:e}) at node {k}")));
            }
        }
        f1.push(Quaternion::from_matrix(&m1).imag());
        f2.push(Quaternion::from_matrix(&m2).imag());
    }
    Ok((f1, f2))
}

/// Mates of an analytic patch through the pair Lax system.
pub fn sym_pair_surfaces<P: IsothermicPatch>(patch: &P, lattice: &Lattice, mode: LambdaDerivative, tol: f64) -> Result<(SurfaceGrid, SurfaceGrid)> {
    let field = |z: C64| pair_point(patch, z).unwrap_or(PairPoint { u: f64::NAN, uz: C64::ZERO, h: f64::NAN, q1: C64::ZERO, q2: C64::ZERO });
    let frame = pair_frame(lattice, field, lattice.center_node(), mode)?;
    let (f1, f2) = sym_pair_immersion(&frame, tol)?;
    Ok((
        SurfaceGrid::from_immersion(*lattice, f1, Stencil::Fourth)?,
        SurfaceGrid::from_immersion(*lattice, f2, Stencil::Fourth)?,
    ))
}

/// T = Phi2^{-1} Phi1 from the diagonal blocks of P0.
pub fn frame_quotient(frame: &PairFrame4) -> Result<Vec<Quaternion>> {
    frame
        .p0
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let p2 = inv2(&block(m, 2, 2)).ok_or_else(|| GeomError::Singular(format!("Phi2 at node {k}")))?;
            Ok(Quaternion::from_matrix(&(p2 * block(m, 0, 0))))
        })
        .collect()
}

/// Estimated (u, Q, H) of both mates, for comparisons.
pub fn mate_data_grids(pair: (&SurfaceGrid, &SurfaceGrid)) -> Result<(FundamentalData, FundamentalData)> {
    Ok((estimate_fundamental_data(pair.0)?, estimate_fundamental_data(pair.1)?))
}
