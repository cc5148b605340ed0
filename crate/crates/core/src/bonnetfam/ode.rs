//! Third-order Hazzidakis equations for the mean curvature, an adaptive
//! RK4 integrator for them, and the power series at a critical point.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Cartan types of Bonnet families; `BV(J)` is the critical point of index -J.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HazzidakisType {
    A1,
    A2,
    B,
    C,
    BV(u32),
}

impl HazzidakisType {
    /// Domain of the variable t (or s = |w|^2 for BV).
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::A1 | Self::A2 => (0.0, std::f64::consts::FRAC_PI_2),
            Self::B | Self::C => (0.0, f64::INFINITY),
            Self::BV(_) => (0.0, 1.0),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = self.domain();
        t > a && t < b
    }

    /// |Q|^2 as a function of t for types A, B, C.
    pub fn q_modulus_sqr(&self, t: f64) -> f64 {
        match self {
            Self::A1 | Self::A2 => 4.0 / (2.0 * t).sin().powi(2),
            Self::B => 4.0 / (2.0 * t).sinh().powi(2),
            Self::C => 1.0 / (t * t),
            Self::BV(_) => f64::NAN,
        }
    }

    /// d/dt log |Q|^2.
    pub fn q_log_derivative(&self, t: f64) -> f64 {
        match self {
            Self::A1 | Self::A2 => -4.0 / (2.0 * t).tan(),
            Self::B => -4.0 / (2.0 * t).tanh(),
            Self::C => -2.0 / t,
            Self::BV(_) => f64::NAN,
        }
    }
}

/// H''' of the Hazzidakis equation of the given type at (t, H, H', H'').
pub fn hazzidakis_rhs(ty: HazzidakisType, t: f64, h: f64, h1: f64, h2: f64) -> Result<f64> {
    if h1 == 0.0 {
        return Err(GeomError::ZeroDivision("H' = 0 in the Hazzidakis equation"));
    }
    if !ty.contains(t) {
        return Err(GeomError::Domain(format!("t = {t} outside the domain of {ty:?}")));
    }
    match ty {
        HazzidakisType::BV(j) => {
            let j = j as f64;
            let r = (j + 2.0).powi(2) * t.powf(j + 1.0) / (1.0 - t.powf(j + 2.0)).powi(2);
            let rhs = r * (2.0 - h * h / (t * h1));
            Ok((h1 * (h1 + rhs) - h2) / t + h2 * h2 / h1)
        }
        _ => {
            let q = ty.q_modulus_sqr(t);
            Ok(h1 * h1 + q * (2.0 * h1 - h * h) + h2 * h2 / h1)
        }
    }
}

/// Integration tolerance (relative, per step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, h_init: 1e-3, h_min: 1e-12, max_steps: 1_000_000 }
    }
}

pub type State = [f64; 3];

fn deriv(ty: HazzidakisType, t: f64, y: &State) -> Result<State> {
    Ok([y[1], y[2], hazzidakis_rhs(ty, t, y[0], y[1], y[2])?])
}

fn rk4(ty: HazzidakisType, t: f64, y: &State, h: f64) -> Result<State> {
    let add = |a: &State, k: &State, s: f64| [a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2]];
    let k1 = deriv(ty, t, y)?;
    let k2 = deriv(ty, t + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = deriv(ty, t + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = deriv(ty, t + h, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Accepted steps of one direction, starting at t0 and ending at t1.
fn integrate_leg(ty: HazzidakisType, t0: f64, y0: State, t1: f64, opts: &OdeOptions) -> Result<Vec<(f64, State)>> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut out = vec![(t0, y0)];
    let (mut t, mut y) = (t0, y0);
    let mut h = opts.h_init.min((t1 - t0).abs()).max(opts.h_min);
    let mut steps = 0;
    while (t1 - t) * dir > 1e-14 * t1.abs().max(1.0) {
        steps += 1;
        if steps > opts.max_steps {
            return Err(GeomError::Domain(format!("step budget exhausted at t = {t}")));
        }
        h = h.min((t1 - t).abs());
        let attempt = (|| -> Result<(State, f64)> {
            let full = rk4(ty, t, &y, dir * h)?;
            let half = rk4(ty, t, &y, 0.5 * dir * h)?;
            let two = rk4(ty, t + 0.5 * dir * h, &half, 0.5 * dir * h)?;
            let mut err: f64 = 0.0;
            for i in 0..3 {
                err = err.max((two[i] - full[i]).abs() / 15.0 / (opts.rtol * two[i].abs().max(1.0)));
            }
            // Richardson extrapolation of the doubled step
            let y_new = std::array::from_fn(|i| two[i] + (two[i] - full[i]) / 15.0);
            Ok((y_new, err))
        })();
        match attempt {
            Ok((y_new, err)) if err <= 1.0 && y_new[1] < 0.0 && y_new.iter().all(|v| v.is_finite()) => {
                t += dir * h;
                y = y_new;
                out.push((t, y));
                let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 4.0 };
                h *= grow.clamp(0.2, 4.0);
            }
            Ok((y_new, err)) => {
                // refine; a persistent sign change of H' is reported
                let shrink = if err > 1.0 && err.is_finite() { 0.9 * err.powf(-0.25) } else { 0.25 };
                h *= shrink.clamp(0.1, 0.5);
                if h < opts.h_min {
                    if y_new[1] >= 0.0 {
                        return Err(GeomError::SignFlip { at: t });
                    }
                    return Err(GeomError::Domain(format!("step size underflow at t = {t}")));
                }
            }
            Err(GeomError::ZeroDivision(_)) => return Err(GeomError::SignFlip { at: t }),
            Err(e) => {
                h *= 0.25;
                if h < opts.h_min {
                    return Err(e);
                }
            }
        }
    }
    Ok(out)
}

/// Power series H(s) = H(0) + s^{J+1} sum_i H_i s^i at a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvSeries {
    pub j: u32,
    pub h_zero: f64,
    pub coeffs: Vec<f64>,
}

/// Cauchy product truncated at `n` terms.
fn mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|k| (0..=k).filter(|&i| i < a.len() && k - i < b.len()).map(|i| a[i] * b[k - i]).sum()).collect()
}

/// Series reciprocal, a[0] != 0.
fn recip(a: &[f64], n: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    r[0] = 1.0 / a[0];
    for k in 1..n {
        let s: f64 = (1..=k).filter(|&i| i < a.len()).map(|i| a[i] * r[k - i]).sum();
        r[k] = -s / a[0];
    }
    r
}

/// Coefficients H_0..H_order of the critical-point series, from the equation
/// written for A = sH''/H' and P = H'/s^J:
/// A' - s^J P = (J+2)^2 (1 - s^{J+2})^{-2} (2 s^{J+1} - H^2/P).
pub fn bv_series_solve(j: u32, h_zero: f64, lead: f64, order: usize) -> Result<BvSeries> {
    if lead == 0.0 {
        return Err(GeomError::Recurrence(0));
    }
    let ju = j as usize;
    let jf = j as f64;
    let n_terms = order + 1;
    let mut coeffs = vec![0.0; n_terms];
    coeffs[0] = lead;
    let mut p = vec![0.0; n_terms];
    p[0] = (jf + 1.0) * lead;
    let mut a = vec![0.0; n_terms];
    a[0] = jf;
    // (1 - s^{J+2})^{-2}
    let kernel: Vec<f64> = (0..n_terms).map(|m| if m % (ju + 2) == 0 { (m / (ju + 2) + 1) as f64 } else { 0.0 }).collect();
    let c2 = (jf + 2.0).powi(2);
    for n in 1..n_terms {
        // H as a series in s up to order n - 1
        let mut hs = vec![0.0; n];
        hs[0] = h_zero;
        for (i, c) in coeffs.iter().enumerate() {
            if ju + 1 + i < n {
                hs[ju + 1 + i] = *c;
            }
        }
        let h2 = mul(&hs, &hs, n);
        let quot = mul(&h2, &recip(&p[..n], n), n);
        let mut g: Vec<f64> = quot.iter().map(|v| -v).collect();
        if ju + 1 < n {
            g[ju + 1] += 2.0;
        }
        let g = mul(&kernel, &g, n);
        let sjp = if n > ju { p[n - 1 - ju] } else { 0.0 };
        a[n] = (sjp + c2 * g[n - 1]) / n as f64;
        let conv: f64 = (1..n).map(|k| a[k] * p[n - k]).sum();
        p[n] = (a[n] * p[0] + conv) / n as f64;
        coeffs[n] = p[n] / (jf + 1.0 + n as f64);
        if !coeffs[n].is_finite() {
            return Err(GeomError::Recurrence(n));
        }
    }
    Ok(BvSeries { j, h_zero, coeffs })
}

impl BvSeries {
    /// (H, H', H'') at s.
    pub fn eval(&self, s: f64) -> State {
        let j = self.j as i32;
        let (mut h, mut h1, mut h2) = (self.h_zero, 0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = j + 1 + i as i32;
            let ef = e as f64;
            h += c * s.powi(e);
            h1 += c * ef * s.powi(e - 1);
            h2 += c * ef * (ef - 1.0) * s.powi(e - 2);
        }
        [h, h1, h2]
    }

    /// P = H'/s^J and P' = dP/ds, regular at s = 0.
    pub fn p_and_derivative(&self, s: f64) -> (f64, f64) {
        let j = self.j as f64;
        let mut p = 0.0;
        let mut dp = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = j + 1.0 + i as f64;
            p += c * k * s.powi(i as i32);
            if i > 0 {
                dp += c * k * i as f64 * s.powi(i as i32 - 1);
            }
        }
        (p, dp)
    }

    /// Radius where the last retained term drops below `tol`, capped at `cap`.
    pub fn matching_radius(&self, tol: f64, cap: f64) -> f64 {
        let last = *self.coeffs.last().expect("non-empty series");
        if last == 0.0 {
            return cap;
        }
        let e = self.j as f64 + self.coeffs.len() as f64;
        (tol / last.abs()).powf(1.0 / e).min(cap)
    }
}

/// Accepted RK4 steps of a Hazzidakis trajectory, possibly preceded by a
/// critical-point series on [0, s_match].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazzidakisSolution {
    pub ty: HazzidakisType,
    pub t: Vec<f64>,
    pub y: Vec<State>,
    pub series: Option<(BvSeries, f64)>,
    /// Initial point and data the trajectory was integrated from.
    pub origin: (f64, State),
}

/// Adaptive RK4 from t0 across [t_lo, t_hi], which must contain t0. H' < 0
/// is required initially and enforced on every accepted step.
pub fn integrate_hazzidakis(ty: HazzidakisType, t0: f64, y0: State, interval: (f64, f64), opts: &OdeOptions) -> Result<HazzidakisSolution> {
    let (lo, hi) = interval;
    if !(lo <= t0 && t0 <= hi) {
        return Err(GeomError::Invalid(format!("t0 = {t0} outside [{lo}, {hi}]")));
    }
    if !(ty.contains(lo) && ty.contains(hi)) {
        return Err(GeomError::Domain(format!("[{lo}, {hi}] not inside the domain of {ty:?}")));
    }
    if !(y0[1] < 0.0) {
        return Err(GeomError::Invalid(format!("initial H' must be negative, got {}", y0[1])));
    }
    let back = integrate_leg(ty, t0, y0, lo, opts)?;
    let fwd = integrate_leg(ty, t0, y0, hi, opts)?;
    let mut t: Vec<f64> = back.iter().rev().map(|p| p.0).collect();
    let mut y: Vec<State> = back.iter().rev().map(|p| p.1).collect();
    for (tt, yy) in fwd.into_iter().skip(1) {
        t.push(tt);
        y.push(yy);
    }
    Ok(HazzidakisSolution { ty, t, y, series: None, origin: (t0, y0) })
}

/// Series on [0, s_match] continued numerically to `s_end`.
pub fn bv_solution(j: u32, h_zero: f64, lead: f64, order: usize, s_end: f64, opts: &OdeOptions) -> Result<HazzidakisSolution> {
    let series = bv_series_solve(j, h_zero, lead, order)?;
    let s_match = series.matching_radius(1e-12, 0.5 * s_end.min(0.5));
    let y0 = series.eval(s_match);
    let mut sol = integrate_hazzidakis(HazzidakisType::BV(j), s_match, y0, (s_match, s_end), opts)?;
    sol.series = Some((series, s_match));
    Ok(sol)
}

impl HazzidakisSolution {
    pub fn range(&self) -> (f64, f64) {
        let lo = if self.series.is_some() { 0.0 } else { self.t[0] };
        (lo, *self.t.last().expect("non-empty"))
    }

    /// (H, H', H'') at t: the series below the matching radius, otherwise
    /// two RK4 half steps from the nearest accepted node.
    /// State at `t` carried from a known state by two RK4 half steps.
    pub(crate) fn carry(&self, from: (f64, State), t: f64) -> Result<State> {
        let dt = t - from.0;
        let half = rk4(self.ty, from.0, &from.1, 0.5 * dt)?;
        rk4(self.ty, from.0 + 0.5 * dt, &half, 0.5 * dt)
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        if let Some((series, s_match)) = &self.series {
            if t <= *s_match {
                return Ok(series.eval(t));
            }
        }
        let (lo, hi) = (self.t[0], *self.t.last().expect("non-empty"));
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(GeomError::Domain(format!("t = {t} outside the integrated range [{lo}, {hi}]")));
        }
        let k = match self.t.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => return Ok(self.y[k]),
            Err(k) => k,
        };
        let near = if k == 0 {
            0
        } else if k >= self.t.len() || (t - self.t[k - 1]) <= (self.t[k] - t) {
            k - 1
        } else {
            k
        };
        let dt = t - self.t[near];
        let half = rk4(self.ty, self.t[near], &self.y[near], 0.5 * dt)?;
        rk4(self.ty, self.t[near] + 0.5 * dt, &half, 0.5 * dt)
    }

    /// Max over accepted nodes of H'.
    pub fn max_h1(&self) -> f64 {
        self.y.iter().map(|y| y[1]).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_c_closed_form_satisfies_rhs() {
        for t in [0.5, 1.0, 3.0] {
            let r = hazzidakis_rhs(HazzidakisType::C, t, 2.0 / t, -2.0 / (t * t), 4.0 / t.powi(3)).unwrap();
            assert!((r + 12.0 / t.powi(4)).abs() < 1e-12);
        }
        assert!(matches!(hazzidakis_rhs(HazzidakisType::C, 1.0, 1.0, 0.0, 1.0), Err(GeomError::ZeroDivision(_))));
        assert!(hazzidakis_rhs(HazzidakisType::A1, 2.0, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn type_c_trajectory() {
        let sol = integrate_hazzidakis(HazzidakisType::C, 1.0, [2.0, -2.0, 4.0], (0.5, 5.0), &OdeOptions::default()).unwrap();
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - 2.0 / t).abs() < 1e-9, "{t}");
        }
        for t in [0.51, 0.77, 2.3, 4.99] {
            assert!((sol.eval(t).unwrap()[0] - 2.0 / t).abs() < 1e-9);
        }
        assert!(sol.max_h1() < 0.0);
    }

    #[test]
    fn rejects_positive_derivative_and_bad_interval() {
        let o = OdeOptions::default();
        assert!(integrate_hazzidakis(HazzidakisType::C, 1.0, [2.0, 1.0, 0.0], (0.5, 2.0), &o).is_err());
        assert!(integrate_hazzidakis(HazzidakisType::C, 3.0, [2.0, -1.0, 0.0], (0.5, 2.0), &o).is_err());
        assert!(integrate_hazzidakis(HazzidakisType::A1, 1.0, [2.0, -1.0, 0.0], (0.5, 1.6), &o).is_err());
    }

    #[test]
    fn series_solves_equation_near_zero() {
        for j in [0u32, 1, 2] {
            let ser = bv_series_solve(j, 0.7, -1.3, 14).unwrap();
            let ty = HazzidakisType::BV(j);
            for s in [0.05, 0.1] {
                let y = ser.eval(s);
                let h = 1e-4;
                let d3 = (ser.eval(s + h)[2] - ser.eval(s - h)[2]) / (2.0 * h);
                let r = hazzidakis_rhs(ty, s, y[0], y[1], y[2]).unwrap();
                assert!((d3 - r).abs() < 1e-5 * r.abs().max(1.0), "J={j} s={s} {d3} {r}");
            }
        }
    }

    #[test]
    fn series_leading_asymptotics() {
        let ser = bv_series_solve(1, 0.4, -2.0, 12).unwrap();
        for s in [1e-3, 2e-3] {
            let rest = ser.eval(s)[0] - 0.4 - s * s * -2.0;
            assert!((rest / s.powi(3) - ser.coeffs[1]).abs() < 1e-2 * ser.coeffs[1].abs().max(1.0));
        }
        assert!(matches!(bv_series_solve(1, 0.4, 0.0, 12), Err(GeomError::Recurrence(0))));
    }

    #[test]
    fn series_hands_off_to_integrator() {
        let sol = bv_solution(2, 0.5, -1.0, 12, 0.6, &OdeOptions::default()).unwrap();
        let (ser, sm) = sol.series.clone().unwrap();
        assert!(sm > 0.0 && sm < 0.3);
        let a = sol.eval(sm).unwrap();
        let b = ser.eval(sm);
        assert!((a[0] - b[0]).abs() < 1e-14);
        assert!(sol.max_h1() < 0.0);
    }
}
