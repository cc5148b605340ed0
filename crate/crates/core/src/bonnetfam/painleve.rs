//! Type B in the coordinate x = exp(-4t): the first integral and the maps
//! between the Hazzidakis equation and Painleve VI.

use serde::{Deserialize, Serialize};

use super::ode::{HazzidakisSolution, HazzidakisType, State};
use crate::error::{GeomError, Result};

pub fn x_of_t(t: f64) -> f64 {
    (-4.0 * t).exp()
}

pub fn t_of_x(x: f64) -> f64 {
    -0.25 * x.ln()
}

/// H and its first two x-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XSample {
    pub x: f64,
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
}

impl XSample {
    /// Chain rule from (H, H_t, H_tt) at t, with x_t = -4x and x_tt = 16x.
    pub fn from_t(t: f64, y: &State) -> Self {
        let x = x_of_t(t);
        let h1 = y[1] / (-4.0 * x);
        let h2 = (y[2] - 16.0 * x * h1) / (16.0 * x * x);
        Self { x, h: y[0], h1, h2 }
    }

    /// Inverse of `from_t`.
    pub fn to_t(&self) -> (f64, State) {
        let x = self.x;
        (t_of_x(x), [self.h, -4.0 * x * self.h1, 16.0 * x * x * self.h2 + 16.0 * x * self.h1])
    }
}

/// Resampled type-B trajectory at its accepted steps.
pub fn to_x_coordinates(sol: &HazzidakisSolution) -> Result<Vec<XSample>> {
    if sol.ty != HazzidakisType::B {
        return Err(GeomError::Invalid(format!("x coordinates need a type B solution, got {:?}", sol.ty)));
    }
    Ok(sol.t.iter().zip(&sol.y).map(|(t, y)| XSample::from_t(*t, y)).collect())
}

fn check_x(x: f64, h1: f64) -> Result<()> {
    if h1 == 0.0 {
        return Err(GeomError::ZeroDivision("H'(x) = 0"));
    }
    if x == 1.0 {
        return Err(GeomError::Domain("x = 1".into()));
    }
    Ok(())
}

/// Third x-derivative solved from
/// 4 (x H''/H')' + H' = 4/(x-1)^2 (2 + H^2/(4x H')).
pub fn xform_h3(s: &XSample) -> Result<f64> {
    let XSample { x, h, h1, h2 } = *s;
    check_x(x, h1)?;
    let forcing = 4.0 / (x - 1.0).powi(2) * (2.0 + h * h / (4.0 * x * h1));
    Ok(((forcing - h1) * h1 * h1 / 4.0 + x * h2 * h2) / (x * h1) - h2 / x)
}

/// Residual of the x-form equation given an independent third derivative.
pub fn xform_residual(s: &XSample, h3: f64) -> Result<f64> {
    let XSample { x, h, h1, h2 } = *s;
    check_x(x, h1)?;
    let lhs = 4.0 * ((h2 + x * h3) * h1 - x * h2 * h2) / (h1 * h1) + h1;
    Ok(lhs - 4.0 / (x - 1.0).powi(2) * (2.0 + h * h / (4.0 * x * h1)))
}

/// The conserved quantity theta^2 of the x-form equation.
pub fn first_integral(x: f64, h: f64, h1: f64, h2: f64) -> Result<f64> {
    check_x(x, h1)?;
    let xm = x - 1.0;
    Ok(x * x * (h2 / h1 + 2.0 / xm).powi(2) + x * h1 / 2.0 + h * h / (2.0 * xm * xm * h1) + h * (x + 1.0) / (2.0 * xm))
}

/// A point of a Painleve VI trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PainleveState {
    pub x: f64,
    pub y: f64,
    pub yp: f64,
    pub theta: f64,
}

fn check_singular(x: f64, y: f64) -> Result<()> {
    let scale = 1e-14 * (1.0 + y.abs());
    if y.abs() < scale || (y - 1.0).abs() < scale || (y - x).abs() < scale {
        return Err(GeomError::SingularLocus(format!("y = {y} at x = {x}")));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(GeomError::Domain(format!("x = {x} outside (0, 1)")));
    }
    Ok(())
}

/// |H + (x-1)H'| / (|H| + |H'|): relative size of the denominator of the
/// map to y. Errors in H are amplified by about its inverse square.
pub fn quotient_conditioning(s: &XSample) -> f64 {
    (s.h + (s.x - 1.0) * s.h1).abs() / (s.h.abs() + s.h1.abs())
}

/// y = -(2/H') ((x(x-1)H'' + (theta - x(theta-2))H') / (H + (x-1)H'))^2 and its
/// x-derivative, which uses the x-form equation for H'''.
pub fn h_to_y(s: &XSample, theta: f64) -> Result<PainleveState> {
    let XSample { x, h, h1, h2 } = *s;
    check_x(x, h1)?;
    let den = h + (x - 1.0) * h1;
    if den.abs() < 1e-14 * (h.abs() + h1.abs()).max(1.0) {
        return Err(GeomError::SingularLocus(format!("H + (x-1)H' = 0 at x = {x}")));
    }
    let h3 = xform_h3(s)?;
    let num = x * (x - 1.0) * h2 + (theta - x * (theta - 2.0)) * h1;
    let dnum = (2.0 * x - 1.0) * h2 + x * (x - 1.0) * h3 - (theta - 2.0) * h1 + (theta - x * (theta - 2.0)) * h2;
    let dden = 2.0 * h1 + (x - 1.0) * h2;
    let r = num / den;
    let dr = (dnum * den - num * dden) / (den * den);
    let y = -2.0 / h1 * r * r;
    let yp = 2.0 * h2 / (h1 * h1) * r * r - 4.0 / h1 * r * dr;
    Ok(PainleveState { x, y, yp, theta })
}

/// Right-hand side y'' of Painleve VI with the coefficients of the
/// Hazzidakis correspondence.
pub fn pvi_rhs(x: f64, y: f64, yp: f64, theta: f64) -> Result<f64> {
    check_singular(x, y)?;
    let (ym, yx, xm) = (y - 1.0, y - x, x - 1.0);
    let quad = 0.5 * (1.0 / y + 1.0 / ym + 1.0 / yx) * yp * yp;
    let lin = (1.0 / x + 1.0 / xm + 1.0 / yx) * yp;
    let pot = y * ym * yx / (2.0 * x * x * xm * xm) * (theta * theta * xm / (ym * ym) - theta * (theta + 2.0) * x * xm / (yx * yx));
    Ok(quad - lin + pot)
}

pub fn pvi_residual(y: f64, yp: f64, ypp: f64, x: f64, theta: f64) -> Result<f64> {
    Ok((ypp - pvi_rhs(x, y, yp, theta)?).abs())
}

/// H = -2(x-1)(theta^2 y^2 - x^2 y'^2) / (y(y-1)(y-x)).
pub fn y_to_h(st: &PainleveState) -> Result<f64> {
    let PainleveState { x, y, yp, theta } = *st;
    check_singular(x, y)?;
    let a = theta * theta * y * y;
    let b = x * x * yp * yp;
    if (a - b).abs() <= 1e-12 * (a + b) {
        return Err(GeomError::ExcludedFamily);
    }
    Ok(-2.0 * (x - 1.0) * (a - b) / (y * (y - 1.0) * (y - x)))
}

impl HazzidakisSolution {
    /// First integral at the given t (type B only).
    pub fn first_integral_at(&self, t: f64) -> Result<f64> {
        if self.ty != HazzidakisType::B {
            return Err(GeomError::Invalid("first integral is defined for type B".into()));
        }
        let s = XSample::from_t(t, &self.eval(t)?);
        first_integral(s.x, s.h, s.h1, s.h2)
    }

    /// Non-negative root theta of the first integral of the initial data.
    pub fn theta(&self) -> Result<f64> {
        if self.ty != HazzidakisType::B {
            return Err(GeomError::Invalid("first integral is defined for type B".into()));
        }
        let s = XSample::from_t(self.origin.0, &self.origin.1);
        let th2 = first_integral(s.x, s.h, s.h1, s.h2)?;
        if th2 < 0.0 {
            return Err(GeomError::Domain(format!("theta^2 = {th2} is negative, theta not real")));
        }
        Ok(th2.sqrt())
    }

    /// Largest |theta^2 - theta^2(t_0)| over the accepted nodes.
    pub fn first_integral_drift(&self) -> Result<f64> {
        let samples = to_x_coordinates(self)?;
        let base = self.theta()?.powi(2);
        samples.iter().try_fold(0.0f64, |m, s| Ok(m.max((first_integral(s.x, s.h, s.h1, s.h2)? - base).abs())))
    }

    /// Mapped Painleve state at x.
    pub fn painleve_at(&self, x: f64, theta: f64) -> Result<PainleveState> {
        h_to_y(&XSample::from_t(t_of_x(x), &self.eval(t_of_x(x))?), theta)
    }

    /// PVI residual of the mapped y at x. y'' comes from central differences
    /// of the exact y' at spacings `step` and `step`/2, Richardson-combined.
    /// Neighbours are carried from the state at x, so the differences see
    /// no switch between integration nodes.
    pub fn mapped_pvi_residual(&self, x: f64, theta: f64, step: f64) -> Result<f64> {
        let t = t_of_x(x);
        let base = (t, self.eval(t)?);
        let at = |xs: f64| -> Result<PainleveState> {
            let ts = t_of_x(xs);
            h_to_y(&XSample::from_t(ts, &self.carry(base, ts)?), theta)
        };
        let c = h_to_y(&XSample::from_t(t, &base.1), theta)?;
        let diff = |d: f64| -> Result<f64> { Ok((at(x + d)?.yp - at(x - d)?.yp) / (2.0 * d)) };
        let ypp = (4.0 * diff(0.5 * step)? - diff(step)?) / 3.0;
        pvi_residual(c.y, c.yp, ypp, x, theta)
    }
}
