//! Bonnet families: the Hazzidakis equation of each Cartan type, the
//! Painleve VI correspondence of type B, and assembly of the immersions
//! of a family.

mod ode;
mod painleve;

pub use ode::{
    bv_series_solve, bv_solution, hazzidakis_rhs, integrate_hazzidakis, BvSeries, HazzidakisSolution, HazzidakisType, OdeOptions,
    State,
};
pub use painleve::{
    first_integral, h_to_y, pvi_residual, pvi_rhs, quotient_conditioning, t_of_x, to_x_coordinates, x_of_t, xform_h3, xform_residual, y_to_h,
    PainleveState, XSample,
};

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::frameflow::{immersion_from_frame, integrate_frame_fn, uv_at, FRAME_TOL};
use crate::quatgeo::{FundamentalData, Lattice, Mat2, SurfaceGrid, C64};

/// Distance kept from the ends of the domain, where e^u blows up.
pub const DOMAIN_MARGIN: f64 = 0.05;
/// Path-dependence bound for integrating the tangents of a built surface.
pub const SURFACE_PATH_TOL: f64 = 1e-6;

/// The variable H depends on: t = w + conj(w), or s = |w|^2 for BV.
pub fn chart_variable(ty: HazzidakisType, w: C64) -> f64 {
    match ty {
        HazzidakisType::BV(_) => w.norm_sqr(),
        _ => 2.0 * w.re,
    }
}

fn check_point(ty: HazzidakisType, w: C64, margin: f64) -> Result<()> {
    let v = chart_variable(ty, w);
    let (a, b) = ty.domain();
    let ok = match ty {
        HazzidakisType::BV(_) => v < b - margin,
        _ => v > a + margin && v < b - margin,
    };
    if ok {
        Ok(())
    } else {
        Err(GeomError::Domain(format!("w = {w} outside the chart domain of {ty:?}")))
    }
}

/// Hopf coefficient of the family member T. Types A, B, C use the imaginary
/// translation w -> w + iT; BV uses the rotation w -> e^{iT} w, with the
/// factor e^{2iT} from the change of coordinate.
pub fn cartan_q(ty: HazzidakisType, w: C64, big_t: f64) -> Result<C64> {
    check_point(ty, w, 0.0)?;
    let t = 2.0 * w.re;
    let i = C64::i();
    let q = match ty {
        HazzidakisType::A1 => {
            let v = w + i * big_t;
            -2.0 * (2.0 * v.conj()).sin() / (2.0 * v).sin() / (2.0 * t).sin()
        }
        HazzidakisType::A2 => {
            let v = w + i * big_t;
            2.0 * (2.0 * v.conj()).cos() / (2.0 * v).cos() / (2.0 * t).sin()
        }
        HazzidakisType::B => {
            let v = w + i * big_t;
            -2.0 * (2.0 * v.conj()).sinh() / (2.0 * v).sinh() / (2.0 * t).sinh()
        }
        HazzidakisType::C => {
            let v = w + i * big_t;
            -(v.conj() / v) / t
        }
        HazzidakisType::BV(j) => {
            let rot = C64::from_polar(1.0, big_t);
            let v = rot * w;
            let n = j as i32 + 2;
            let s = w.norm_sqr();
            rot * rot * (n as f64) * (C64::ONE - v.conj().powi(n)) / (C64::ONE - v.powi(n)) * v.powi(j as i32) / (1.0 - s.powi(n))
        }
    };
    if !q.is_finite() {
        return Err(GeomError::Pole(0));
    }
    Ok(q)
}

/// (u, u_w, H) of the family at w.
pub fn metric_and_curvature(ty: HazzidakisType, sol: &HazzidakisSolution, w: C64) -> Result<(f64, C64, f64)> {
    let v = chart_variable(ty, w);
    let y = sol.eval(v)?;
    match ty {
        HazzidakisType::BV(j) => {
            let n = j as f64 + 2.0;
            let (p, dlogp) = match &sol.series {
                Some((ser, sm)) if v <= *sm => {
                    let (p, dp) = ser.p_and_derivative(v);
                    (p, dp / p)
                }
                _ => (y[1] / v.powi(j as i32), y[2] / y[1] - j as f64 / v),
            };
            if !(p < 0.0) {
                return Err(GeomError::SignFlip { at: v });
            }
            let den = 1.0 - v.powf(n);
            let eu = -2.0 * n * n / (den * den * p);
            let uw = w.conj() * (2.0 * n * v.powf(n - 1.0) / den - dlogp);
            Ok((eu.ln(), uw, y[0]))
        }
        _ => {
            if !(y[1] < 0.0) {
                return Err(GeomError::SignFlip { at: v });
            }
            let eu = -2.0 * ty.q_modulus_sqr(v) / y[1];
            Ok((eu.ln(), C64::from(ty.q_log_derivative(v) - y[2] / y[1]), y[0]))
        }
    }
}

/// Check that the chart lies inside the domain with margin and inside the
/// integrated range of the solution.
pub fn validate_chart(ty: HazzidakisType, sol: &HazzidakisSolution, chart: &Lattice) -> Result<()> {
    chart.validate()?;
    let (lo, hi) = sol.range();
    for k in 0..chart.len() {
        let w = chart.z_at(k);
        check_point(ty, w, DOMAIN_MARGIN)?;
        let v = chart_variable(ty, w);
        if v < lo || v > hi {
            return Err(GeomError::Domain(format!("chart node {k} at {v} outside the solved range [{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// Sampled (u, Q, H) of the member T on the chart.
pub fn bonnet_data(ty: HazzidakisType, sol: &HazzidakisSolution, big_t: f64, chart: &Lattice) -> Result<FundamentalData> {
    validate_chart(ty, sol, chart)?;
    let (mut u, mut q, mut h) = (Vec::new(), Vec::new(), Vec::new());
    for w in chart.nodes() {
        let (a, _, c) = metric_and_curvature(ty, sol, w)?;
        u.push(a);
        q.push(cartan_q(ty, w, big_t)?);
        h.push(c);
    }
    FundamentalData::new(*chart, u, q, h)
}

/// Immersion of the member T: the conformal frame is integrated from
/// e^{u0/4} Id at the chart centre, then its tangents.
pub fn build_bonnet_surface(ty: HazzidakisType, sol: &HazzidakisSolution, big_t: f64, chart: &Lattice) -> Result<SurfaceGrid> {
    if sol.ty != ty {
        return Err(GeomError::Invalid(format!("solution of type {:?} used for {ty:?}", sol.ty)));
    }
    validate_chart(ty, sol, chart)?;
    let centre = chart.center_node();
    let (u0, _, _) = metric_and_curvature(ty, sol, chart.z(centre.0, centre.1))?;
    let field = |w: C64| match (metric_and_curvature(ty, sol, w), cartan_q(ty, w, big_t)) {
        (Ok((u, uw, h)), Ok(q)) => uv_at(u, uw, q, h),
        _ => {
            let nan = Mat2::from_element(C64::new(f64::NAN, f64::NAN));
            (nan, nan)
        }
    };
    let phi0 = Mat2::identity() * C64::from((0.25 * u0).exp());
    let frame = integrate_frame_fn(chart, field, phi0, centre, FRAME_TOL)?;
    if frame.phi.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeomError::Domain("frame potentials left the solved range".into()));
    }
    immersion_from_frame(chart, &frame.phi, centre, SURFACE_PATH_TOL)
}

/// Rectangular chart in the w-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub w_min: [f64; 2],
    pub w_max: [f64; 2],
    pub n: usize,
}

impl Chart {
    pub fn lattice(&self) -> Result<Lattice> {
        if self.n < 2 || !(self.w_max[0] > self.w_min[0]) || !(self.w_max[1] > self.w_min[1]) {
            return Err(GeomError::Invalid(format!("bad chart {self:?}")));
        }
        let m = (self.n - 1) as f64;
        Ok(Lattice::new(
            self.n,
            self.n,
            self.w_min[0],
            self.w_min[1],
            (self.w_max[0] - self.w_min[0]) / m,
            (self.w_max[1] - self.w_min[1]) / m,
        ))
    }
}

/// Bonnet-family scenario. For BV, `H0` is H(0) and `H0'` the leading
/// coefficient of H - H(0) at s = 0. With `x0` (type B) the derivatives
/// are taken in x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonnetScenario {
    #[serde(rename = "type")]
    pub tag: String,
    #[serde(rename = "J", default)]
    pub j: Option<u32>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub x0: Option<f64>,
    #[serde(rename = "H0")]
    pub h0: f64,
    #[serde(rename = "H0'")]
    pub h0p: f64,
    #[serde(rename = "H0''", default)]
    pub h0pp: f64,
    pub chart: Chart,
    #[serde(rename = "T_values", default)]
    pub t_values: Vec<f64>,
}

/// Terms kept in the BV series.
pub const BV_SERIES_ORDER: usize = 12;

impl BonnetScenario {
    pub fn hazzidakis_type(&self) -> Result<HazzidakisType> {
        Ok(match self.tag.as_str() {
            "A1" => HazzidakisType::A1,
            "A2" => HazzidakisType::A2,
            "B" => HazzidakisType::B,
            "C" => HazzidakisType::C,
            "BV" => HazzidakisType::BV(self.j.ok_or_else(|| GeomError::Invalid("type BV needs J".into()))?),
            other => return Err(GeomError::Invalid(format!("unknown Bonnet type {other:?}"))),
        })
    }

    /// Initial point and data in the t variable.
    fn initial(&self, ty: HazzidakisType) -> Result<(f64, State)> {
        match (self.t0, self.x0) {
            (Some(t0), None) => Ok((t0, [self.h0, self.h0p, self.h0pp])),
            (None, Some(x0)) if ty == HazzidakisType::B => {
                if !(x0 > 0.0 && x0 < 1.0) {
                    return Err(GeomError::Invalid(format!("x0 = {x0} outside (0, 1)")));
                }
                Ok(XSample { x: x0, h: self.h0, h1: self.h0p, h2: self.h0pp }.to_t())
            }
            _ => Err(GeomError::Invalid("give exactly one of t0 (any type) or x0 (type B)".into())),
        }
    }

    /// Solution covering the chart.
    pub fn solve(&self) -> Result<HazzidakisSolution> {
        let ty = self.hazzidakis_type()?;
        let lat = self.chart.lattice()?;
        let vals: Vec<f64> = lat.nodes().iter().map(|w| chart_variable(ty, *w)).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let opts = OdeOptions::default();
        if let HazzidakisType::BV(j) = ty {
            if !(hi < 1.0) {
                return Err(GeomError::Domain("BV chart must stay inside the unit disc".into()));
            }
            return bv_solution(j, self.h0, self.h0p, BV_SERIES_ORDER, hi.max(1e-3), &opts);
        }
        let (t0, y0) = self.initial(ty)?;
        integrate_hazzidakis(ty, t0, y0, (lo.min(t0), hi.max(t0)), &opts)
    }
}
