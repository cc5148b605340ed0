//! The curve M^2 = L prod (L - L_i)(L - 1/conj L_i), its cuts and cycles,
//! and the normalized differentials integrated over them.

use std::f64::consts::{PI, TAU};

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::quatgeo::{C64, I};

/// Relative agreement required between quadrature orders q and 2q.
pub const QUAD_TOL: f64 = 1e-12;
const START_ORDER: usize = 16;
const MAX_ORDER: usize = 1024;

/// Branch values L_1..L_g inside the unit disc. The cuts are the radial
/// segments [L_i, 1/conj L_i] and a ray from 0 to infinity chosen in the
/// widest angular gap between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperellipticCurve {
    branch: Vec<C64>,
    cut_ray: f64,
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn sqrt_principal(z: C64) -> C64 {
    z.sqrt()
}

impl HyperellipticCurve {
    pub fn new(branch: Vec<C64>) -> Result<Self> {
        if branch.is_empty() {
            return Err(GeomError::Invalid("genus must be at least 1".into()));
        }
        for (i, b) in branch.iter().enumerate() {
            if !(b.norm() > 1e-12 && b.norm() < 1.0 - 1e-12) || !b.re.is_finite() || !b.im.is_finite() {
                return Err(GeomError::Invalid(format!("branch value {i} must satisfy 0 < |L| < 1, got {b}")));
            }
        }
        for i in 0..branch.len() {
            for j in 0..i {
                if angle_gap(branch[i].arg(), branch[j].arg()) < 1e-6 {
                    return Err(GeomError::Invalid(format!("branch values {j} and {i} lie on one ray; their cuts would meet")));
                }
            }
        }
        let mut args: Vec<f64> = branch.iter().map(|b| b.arg().rem_euclid(TAU)).collect();
        args.sort_by(f64::total_cmp);
        let mut cut_ray = args[0] + PI;
        let mut widest = 0.0;
        for k in 0..args.len() {
            let next = if k + 1 < args.len() { args[k + 1] } else { args[0] + TAU };
            if next - args[k] > widest {
                widest = next - args[k];
                cut_ray = args[k] + 0.5 * widest;
            }
        }
        Ok(Self { branch, cut_ray: cut_ray.rem_euclid(TAU) })
    }

    pub fn genus(&self) -> usize {
        self.branch.len()
    }

    pub fn branch_values(&self) -> &[C64] {
        &self.branch
    }

    /// Finite branch points: 0, then L_i and 1/conj L_i.
    pub fn branch_points(&self) -> Vec<C64> {
        let mut out = vec![C64::ZERO];
        for b in &self.branch {
            out.push(*b);
            out.push(1.0 / b.conj());
        }
        out
    }

    /// Direction of the cut joining 0 to infinity.
    pub fn cut_ray(&self) -> f64 {
        self.cut_ray
    }

    /// Contours stay at least this far from branch points they do not end on.
    pub fn safety_radius(&self) -> f64 {
        let p = self.branch_points();
        let mut m = f64::INFINITY;
        for i in 0..p.len() {
            for j in 0..i {
                m = m.min((p[i] - p[j]).norm());
            }
        }
        1e-3 * m
    }

    pub fn cut(&self, n: usize) -> (C64, C64) {
        (self.branch[n], 1.0 / self.branch[n].conj())
    }

    /// sqrt(L) with its cut on the ray `cut_ray`.
    pub fn sqrt_branch(&self, lam: C64) -> C64 {
        let rot = C64::from_polar(1.0, self.cut_ray + PI);
        C64::from_polar(1.0, 0.5 * (self.cut_ray + PI)) * sqrt_principal(lam / rot)
    }

    /// prod sqrt((L - L_i)(L - 1/conj L_i)), cut along each segment.
    pub fn cut_product(&self, lam: C64) -> C64 {
        self.branch
            .iter()
            .map(|b| {
                let (lo, hi) = (*b, 1.0 / b.conj());
                let c = 0.5 * (lo + hi);
                let d = 0.5 * (hi - lo);
                let w = lam - c;
                w * sqrt_principal(C64::ONE - d * d / (w * w))
            })
            .product()
    }

    /// The sheet of M analytic off the cuts, M ~ sqrt(L) L^g at infinity.
    pub fn m(&self, lam: C64) -> C64 {
        self.sqrt_branch(lam) * self.cut_product(lam)
    }

    /// M in the local parameter s = L^{-1/2} at infinity: M = s^{-(2g+1)} m(s).
    pub fn m_at_infinity(&self, s: C64) -> C64 {
        let s2 = s * s;
        self.branch
            .iter()
            .map(|b| sqrt_principal(C64::ONE - b * s2) * sqrt_principal(C64::ONE - s2 / b.conj()))
            .product()
    }
}

fn gl_rule(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(order).expect("order >= 2").as_node_weight_pairs().to_vec()
}

/// Composite Gauss-Legendre over `panels` of a vector integrand, doubling
/// the order until two successive results agree.
fn integrate_panels<F>(panels: &[(f64, f64)], len: usize, f: F) -> Result<(Vec<C64>, usize)>
where
    F: Fn(f64, &mut [C64]),
{
    let eval = |order: usize| -> Vec<C64> {
        let rule = gl_rule(order);
        let mut acc = vec![C64::ZERO; len];
        let mut buf = vec![C64::ZERO; len];
        for &(a, b) in panels {
            let (half, mid) = (0.5 * (b - a), 0.5 * (b + a));
            for &(x, w) in &rule {
                f(mid + half * x, &mut buf);
                for (s, v) in acc.iter_mut().zip(&buf) {
                    *s += v * (w * half);
                }
            }
        }
        acc
    };
    let mut order = START_ORDER;
    let mut prev = eval(order);
    while order < MAX_ORDER {
        order *= 2;
        let next = eval(order);
        let scale = next.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let diff = next.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(GeomError::Quadrature("non-finite integrand on contour".into()));
        }
        if diff <= QUAD_TOL * scale {
            return Ok((next, order));
        }
        prev = next;
    }
    Err(GeomError::Quadrature(format!("no convergence up to order {MAX_ORDER}")))
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = ((p - a) * ab.conj()).re / ab.norm_sqr();
    (p - (a + ab * t.clamp(0.0, 1.0))).norm()
}

/// Confocal ellipse c + d cosh(eta + i phi) around one cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub centre: C64,
    pub focal: C64,
    pub eta: f64,
}

impl Ellipse {
    pub fn point(&self, phi: f64) -> C64 {
        self.centre + self.focal * C64::new(self.eta, phi).cosh()
    }

    pub fn tangent(&self, phi: f64) -> C64 {
        self.focal * I * C64::new(self.eta, phi).sinh()
    }
}

/// Homology basis: a_n encircles cut n; b_n runs on the first sheet from
/// the branch point 0 to L_n and back on the second.
#[derive(Debug, Clone, PartialEq)]
pub struct Contours {
    pub a: Vec<Ellipse>,
}

impl Contours {
    pub fn new(curve: &HyperellipticCurve) -> Result<Self> {
        let g = curve.genus();
        let far = 1e3 * curve.branch_points().iter().map(|p| p.norm()).fold(1.0, f64::max);
        let ray_end = C64::from_polar(far, curve.cut_ray());
        let safety = curve.safety_radius();
        let mut a = Vec::with_capacity(g);
        for n in 0..g {
            let (lo, hi) = curve.cut(n);
            let centre = 0.5 * (lo + hi);
            let focal = 0.5 * (hi - lo);
            let mut obstacles = vec![(C64::ZERO, ray_end)];
            for m in 0..g {
                if m != n {
                    let (l2, h2) = curve.cut(m);
                    obstacles.push((l2, h2));
                    obstacles.push((C64::ZERO, l2));
                }
            }
            let clearance = |e: &Ellipse| -> f64 {
                (0..256)
                    .map(|k| {
                        let p = e.point(TAU * k as f64 / 256.0);
                        obstacles.iter().map(|(s, t)| segment_distance(p, *s, *t)).fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let mut eta = 1.0;
            let chosen = loop {
                let e = Ellipse { centre, focal, eta };
                let gap = clearance(&e);
                // obstacles at least as far away as the ellipse is from its own cut
                if gap >= 0.5 * focal.norm() * eta.sinh() {
                    break e;
                }
                eta *= 0.8;
                if focal.norm() * (eta.cosh() - 1.0) < safety {
                    return Err(GeomError::Quadrature(format!("no admissible a-contour around cut {n}")));
                }
            };
            a.push(chosen);
        }
        Ok(Self { a })
    }
}

const ELLIPSE_PANELS: [(f64, f64); 4] = [(0.0, 0.5 * PI), (0.5 * PI, PI), (PI, 1.5 * PI), (1.5 * PI, TAU)];

/// Closed-contour integrals of L^k dL/M for k = -1..=g around cut n.
fn a_integrals(curve: &HyperellipticCurve, e: &Ellipse) -> Result<(Vec<C64>, usize)> {
    let g = curve.genus();
    integrate_panels(&ELLIPSE_PANELS, g + 2, |phi, out| {
        let lam = e.point(phi);
        let base = e.tangent(phi) / (curve.m(lam) * lam);
        let mut p = base;
        for v in out.iter_mut() {
            *v = p;
            p *= lam;
        }
    })
}

/// 2 int_0^{L_n} L^k dL/M for k = 0..=g on the first sheet, and the finite
/// part of the same integral for k = -1.
fn b_integrals(curve: &HyperellipticCurve, n: usize) -> Result<(Vec<C64>, usize)> {
    let g = curve.genus();
    let end = curve.branch_values()[n];
    let h0 = C64::ONE / curve.cut_product(C64::ZERO);
    let (mut v, order) = integrate_panels(&[(0.0, 0.5 * PI), (0.5 * PI, PI)], g + 2, |tau, out| {
        let s = (0.5 * tau).sin();
        let lam = end * s * s;
        let dlam = end * (0.5 * tau.sin());
        let root = curve.sqrt_branch(lam);
        let rest = curve.cut_product(lam);
        // L^{-3/2}(1/rest - 1/rest(0)) is integrable at 0
        out[0] = (C64::ONE / rest - h0) / (lam * root) * dlam * 2.0;
        let mut p = dlam / (root * rest) * 2.0;
        for v in out[1..].iter_mut() {
            *v = p;
            p *= lam;
        }
    })?;
    // FP int_0^a L^{-3/2} dL = -2 a^{-1/2}
    v[0] -= h0 * 4.0 / curve.sqrt_branch(end);
    Ok((v, order))
}

/// Normalized holomorphic differentials, period matrix and the b-periods
/// of the second-kind differentials with poles at infinity and 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodData {
    pub genus: usize,
    /// Row m holds the coefficients of omega_m in L^0..L^{g-1} over M.
    pub normalization: DMatrix<C64>,
    pub b: DMatrix<C64>,
    /// Numerator coefficients of Omega_inf in L^0..L^g (the last is 1/2).
    pub omega_inf: Vec<C64>,
    /// Numerator coefficients of Omega_0 in L^{-1}, L^0..L^{g-1}.
    pub omega_zero: Vec<C64>,
    /// b-periods of Omega_inf.
    pub u: Vec<C64>,
    /// b-periods of Omega_0.
    pub v: Vec<C64>,
    pub delta: Vec<C64>,
    /// Max |int_{a_n} omega_m - 2 pi i delta_nm|.
    pub a_residual: f64,
    /// Max a-period of Omega_inf and Omega_0.
    pub second_kind_residual: f64,
    pub symmetry_defect: f64,
    /// Sign applied to each b-cycle so that Re B has a negative diagonal.
    pub b_orientation: Vec<f64>,
    pub quadrature_order: usize,
}

/// Closed-contour and path integrals shared by every differential.
#[derive(Debug, Clone)]
pub struct CycleIntegrals {
    /// a[n][k + 1] = int_{a_n} L^k dL/M for k = -1..=g.
    pub a: Vec<Vec<C64>>,
    /// b[n][k + 1] likewise over b_n (finite part for k = -1).
    pub b: Vec<Vec<C64>>,
    pub order: usize,
}

pub fn cycle_integrals(curve: &HyperellipticCurve, contours: &Contours) -> Result<CycleIntegrals> {
    let g = curve.genus();
    let mut a = Vec::with_capacity(g);
    let mut b = Vec::with_capacity(g);
    let mut order = 0;
    for n in 0..g {
        let (va, oa) = a_integrals(curve, &contours.a[n])?;
        let (vb, ob) = b_integrals(curve, n)?;
        order = order.max(oa).max(ob);
        a.push(va);
        b.push(vb);
    }
    Ok(CycleIntegrals { a, b, order })
}

pub fn compute_periods(curve: &HyperellipticCurve) -> Result<PeriodData> {
    let contours = Contours::new(curve)?;
    let ints = cycle_integrals(curve, &contours)?;
    periods_from_integrals(curve, &ints)
}

pub fn periods_from_integrals(curve: &HyperellipticCurve, ints: &CycleIntegrals) -> Result<PeriodData> {
    let g = curve.genus();
    // amat[(n, k)] = int_{a_n} L^k dL / M
    let amat = DMatrix::from_fn(g, g, |n, k| ints.a[n][k + 1]);
    let bmat = DMatrix::from_fn(g, g, |n, k| ints.b[n][k + 1]);
    let two_pi_i = C64::new(0.0, TAU);
    let at_inv = amat.transpose().try_inverse().ok_or_else(|| GeomError::Singular("a-period matrix".into()))?;
    let normalization = at_inv * two_pi_i;
    let raw_b = &normalization * bmat.transpose();
    let b_orientation: Vec<f64> = (0..g).map(|n| if raw_b[(n, n)].re > 0.0 { -1.0 } else { 1.0 }).collect();
    let mut b = DMatrix::from_fn(g, g, |m, n| raw_b[(m, n)] * b_orientation[n]);
    // b-cycles sharing the branch point 0 may intersect; replacing b_n by
    // b_n - k a_m makes the basis canonical and B symmetric
    for n in 0..g {
        for m in 0..n {
            let k = ((b[(m, n)] - b[(n, m)]).im / TAU).round();
            b[(m, n)] -= two_pi_i * k;
        }
    }

    let lu = amat.clone().lu();
    let rhs_inf = DVector::from_fn(g, |n, _| -0.5 * ints.a[n][g + 1]);
    let p = lu.solve(&rhs_inf).ok_or_else(|| GeomError::Singular("Omega_inf a-periods".into()))?;
    let mut omega_inf: Vec<C64> = p.iter().copied().collect();
    omega_inf.push(C64::from(0.5));
    // Omega_0 ~ d(L^{-1/2}) at 0: coefficient of L^{-1} is -M/(2 sqrt L) at 0
    let alpha = -0.5 * curve.cut_product(C64::ZERO);
    let rhs_zero = DVector::from_fn(g, |n, _| -alpha * ints.a[n][0]);
    let q = lu.solve(&rhs_zero).ok_or_else(|| GeomError::Singular("Omega_0 a-periods".into()))?;
    let mut omega_zero = vec![alpha];
    omega_zero.extend(q.iter().copied());

    let mut a_residual: f64 = 0.0;
    for m in 0..g {
        for n in 0..g {
            let v: C64 = (0..g).map(|k| normalization[(m, k)] * ints.a[n][k + 1]).sum();
            let target = if m == n { two_pi_i } else { C64::ZERO };
            a_residual = a_residual.max((v - target).norm());
        }
    }
    let mut second_kind_residual: f64 = 0.0;
    let mut u = Vec::with_capacity(g);
    let mut v = Vec::with_capacity(g);
    for n in 0..g {
        let ai: C64 = (0..=g).map(|k| omega_inf[k] * ints.a[n][k + 1]).sum();
        let a0: C64 = (0..=g).map(|k| omega_zero[k] * ints.a[n][k]).sum();
        second_kind_residual = second_kind_residual.max(ai.norm()).max(a0.norm());
        let bi: C64 = (0..=g).map(|k| omega_inf[k] * ints.b[n][k + 1]).sum();
        let b0: C64 = (0..=g).map(|k| omega_zero[k] * ints.b[n][k]).sum();
        u.push(bi * b_orientation[n]);
        v.push(b0 * b_orientation[n]);
    }
    let symmetry_defect = (&b - b.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if symmetry_defect > 1e-8 {
        return Err(GeomError::Quadrature(format!("period matrix not symmetric: {symmetry_defect:e}")));
    }
    let re = b.map(|v| v.re);
    let lmax = ((&re + re.transpose()) * 0.5).symmetric_eigen().eigenvalues.max();
    if !(lmax < 0.0) {
        return Err(GeomError::Quadrature(format!("Re B not negative definite: {lmax:e}")));
    }
    Ok(PeriodData {
        genus: g,
        normalization,
        b,
        omega_inf,
        omega_zero,
        u,
        v,
        delta: vec![C64::new(0.0, PI); g],
        a_residual,
        second_kind_residual,
        symmetry_defect,
        b_orientation,
        quadrature_order: ints.order,
    })
}

impl PeriodData {
    /// Numerator of Omega_inf at L, so that Omega_inf = value dL / M.
    pub fn omega_inf_numerator(&self, lam: C64) -> C64 {
        self.omega_inf.iter().rev().fold(C64::ZERO, |acc, c| acc * lam + c)
    }

    /// Omega_inf / d sqrt(L) on the first sheet, tending to 1 at infinity.
    pub fn omega_inf_ratio(&self, curve: &HyperellipticCurve, lam: C64) -> C64 {
        self.omega_inf_numerator(lam) * 2.0 * curve.sqrt_branch(lam) / curve.m(lam)
    }
}

/// Abel image of the marked point lambda0 on the unit circle, integrated
/// from infinity along a straight path in s = 1/lambda, and the
/// regularized integral L of Omega_inf along the same path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub lambda0: C64,
    pub l: Vec<C64>,
    pub big_l: C64,
}

pub fn abel_point(curve: &HyperellipticCurve, pd: &PeriodData, lambda0: C64) -> Result<MarkedPoint> {
    if (lambda0.norm() - 1.0).abs() > 1e-12 {
        return Err(GeomError::Invalid(format!("marked point must lie on |lambda| = 1, got {lambda0}")));
    }
    let lam0 = lambda0 * lambda0;
    for (i, b) in curve.branch_values().iter().enumerate() {
        if angle_gap(lam0.arg(), b.arg()) < 1e-6 {
            return Err(GeomError::Invalid(format!("marked point lies on cut {i}")));
        }
    }
    let g = curve.genus();
    let s0 = C64::ONE / lambda0;
    let (ints, _) = integrate_panels(&[(0.0, 0.5), (0.5, 1.0)], g + 1, |r, out| {
        let s = s0 * r;
        let s2 = s * s;
        let m = curve.m_at_infinity(s);
        for k in 0..g {
            out[k] = -2.0 * s2.powu((g - 1 - k) as u32) / m * s0;
        }
        let num: C64 = C64::ONE + 2.0 * (0..g).map(|k| pd.omega_inf[k] * s2.powu((g - k) as u32)).sum::<C64>();
        out[g] = if r == 0.0 { C64::ZERO } else { (m - num) / (m * s2) * s0 };
    })?;
    let basis = DVector::from_column_slice(&ints[..g]);
    let l = (&pd.normalization * basis).iter().copied().collect();
    Ok(MarkedPoint { lambda0, l, big_l: C64::ONE / s0 + ints[g] })
}
