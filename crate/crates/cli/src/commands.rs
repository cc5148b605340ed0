//! `sweep`, `theta-eval` and `pvi-roundtrip`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surface_forge_core::bonnetfam::{h_to_y, quotient_conditioning, t_of_x, x_of_t, y_to_h, HazzidakisType, XSample};
use surface_forge_core::quatgeo::{Diff, Stencil, C64};
use surface_forge_core::thetagap::{FiniteGapSolution, Theta, THETA_TOL};

use crate::obj::fmt_f64;
use crate::report::{ReportBuilder, ResidualReport};
use crate::run::{run, Outcome};
use crate::scenario::{Kind, Scenario};
use crate::Failure;

/// Family parameter of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Associated-family angle (CMC kinds).
    T,
    /// Bonnet-family parameter.
    BigT,
    /// Angle of the marked point lambda0 (finite-gap).
    Lambda0,
    /// Imaginary parts of the shift D (finite-gap).
    D,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self, Failure> {
        Ok(match s {
            "t" => Self::T,
            "T" => Self::BigT,
            "lambda0" => Self::Lambda0,
            "D" => Self::D,
            _ => return Err(Failure::validation(format!("unknown sweep parameter {s:?} (t, T, lambda0, D)"))),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::T => "t",
            Self::BigT => "T",
            Self::Lambda0 => "lambda0",
            Self::D => "D",
        }
    }
}

/// Entries are separated by `;`. Without a `;`, a scalar parameter also
/// accepts commas between entries; vector entries use commas inside.
pub fn parse_values(param: SweepParam, s: &str) -> Result<Vec<Vec<f64>>, Failure> {
    let entries: Vec<&str> = if s.contains(';') || param == SweepParam::D { s.split(';').collect() } else { s.split(',').collect() };
    let out: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| {
            e.split(',')
                .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Failure::validation(format!("bad sweep value {e:?}")))
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() || (param != SweepParam::D && out.iter().any(|v| v.len() != 1)) {
        return Err(Failure::validation(format!("bad sweep values {s:?}")));
    }
    Ok(out)
}

fn with_value(base: &Scenario, param: SweepParam, v: &[f64]) -> Result<Scenario, Failure> {
    let mut s = base.clone();
    match (&mut s.kind, param) {
        (Kind::CmcVacuum(p), SweepParam::T) => p.t = v[0],
        (Kind::CmcFinitegap(p), SweepParam::T) => p.t = Some(v[0]),
        (Kind::CmcFinitegap(p), SweepParam::Lambda0) => {
            p.spectral.p0 = [v[0].cos(), v[0].sin()];
            p.t = Some(v[0]);
        }
        (Kind::CmcFinitegap(p), SweepParam::D) => {
            if v.len() != p.spectral.genus {
                return Err(Failure::validation(format!("D needs {} entries", p.spectral.genus)));
            }
            p.spectral.d = v.iter().map(|x| [0.0, *x]).collect();
        }
        (Kind::BonnetFamily(p), SweepParam::BigT) => p.t_values = vec![v[0]],
        (k, p) => return Err(Failure::validation(format!("parameter {} does not apply to {}", p.name(), k.name()))),
    }
    Ok(s)
}

/// One CSV row per value: the residuals of that member and the largest
/// change of estimated u and H against the first member.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[Vec<f64>]) -> Result<(String, bool), Failure> {
    let scenarios: Vec<Scenario> = values.iter().map(|v| with_value(base, param, v)).collect::<Result<_, _>>()?;
    let outcomes: Vec<Outcome> = scenarios.par_iter().map(run).collect::<Result<_, _>>()?;
    let first = &outcomes[0];
    let d = Diff::new(first.data.lattice, Stencil::Fourth).map_err(Failure::validation_from)?;
    let mut csv = String::from("param,value");
    for r in &first.report.residuals {
        let _ = write!(csv, ",{}", r.name);
    }
    csv.push_str(",u_delta,H_delta,pass\n");
    let mut all = true;
    for (v, o) in values.iter().zip(&outcomes) {
        let du = d.interior_max(|k| (o.data.u[k] - first.data.u[k]).abs());
        let dh = d.interior_max(|k| (o.data.h[k] - first.data.h[k]).abs());
        let value: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
        let _ = write!(csv, "{},{}", param.name(), value.join(" "));
        for r in &o.report.residuals {
            let _ = write!(csv, ",{}", fmt_f64(r.value));
        }
        let _ = writeln!(csv, ",{},{},{}", fmt_f64(du), fmt_f64(dh), o.report.passed);
        all &= o.report.passed;
    }
    Ok((csv, all))
}

/// Direct theta query: period matrix rows of [re, im] and argument vectors.
#[derive(Debug, Clone, Deserialize)]
pub struct ThetaQuery {
    pub period_matrix: Vec<Vec<[f64; 2]>>,
    pub points: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaAnswer {
    pub values: Vec<[f64; 2]>,
    pub truncation_radius: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodAnswer {
    pub genus: usize,
    pub period_matrix: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "U")]
    pub u: Vec<[f64; 2]>,
    #[serde(rename = "V")]
    pub v: Vec<[f64; 2]>,
    pub delta: Vec<[f64; 2]>,
    pub l: Vec<[f64; 2]>,
    #[serde(rename = "L")]
    pub big_l: [f64; 2],
    pub theta_zero: [f64; 2],
    pub det_normalization: [f64; 2],
    pub a_residual: f64,
    pub symmetry_defect: f64,
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| pair(*c)).collect()
}

/// Theta values for a query, or periods and marked-point data for a
/// `cmc-finitegap` scenario.
pub fn theta_eval(text: &str) -> Result<String, Failure> {
    let m = "thetagap";
    if let Ok(q) = serde_json::from_str::<ThetaQuery>(text) {
        let g = q.period_matrix.len();
        if g == 0 || q.period_matrix.iter().any(|r| r.len() != g) || q.points.iter().any(|p| p.len() != g) {
            return Err(Failure::validation(format!("period matrix must be {g}x{g} with points of length {g}")));
        }
        let b = DMatrix::from_fn(g, g, |i, j| C64::new(q.period_matrix[i][j][0], q.period_matrix[i][j][1]));
        let th = Theta::new(b, THETA_TOL).map_err(Failure::validation_from)?;
        let values = q.points.iter().map(|p| pair(th.value(&p.iter().map(|c| C64::new(c[0], c[1])).collect::<Vec<_>>()))).collect();
        let ans = ThetaAnswer { values, truncation_radius: th.truncation.radius };
        return Ok(serde_json::to_string_pretty(&ans).expect("serializes") + "\n");
    }
    let s = Scenario::from_json(text)?;
    let Kind::CmcFinitegap(p) = &s.kind else {
        return Err(Failure::validation("theta-eval takes a theta query or a cmc-finitegap scenario"));
    };
    let sol = FiniteGapSolution::new(&p.spectral).map_err(|e| Failure::numeric(m, e))?;
    let pd = &sol.periods;
    let g = pd.genus;
    let ans = PeriodAnswer {
        genus: g,
        period_matrix: (0..g).map(|i| (0..g).map(|j| pair(pd.b[(i, j)])).collect()).collect(),
        u: pairs(&pd.u),
        v: pairs(&pd.v),
        delta: pairs(&pd.delta),
        l: pairs(&sol.point.l),
        big_l: pair(sol.point.big_l),
        theta_zero: pair(sol.theta.value(&vec![C64::ZERO; g])),
        det_normalization: pair(sol.det_normalization()),
        a_residual: pd.a_residual,
        symmetry_defect: pd.symmetry_defect,
    };
    Ok(serde_json::to_string_pretty(&ans).expect("serializes") + "\n")
}

/// Sample points for the Painleve checks.
pub const PVI_POINTS: usize = 20;
/// Spacing of the differences of y'.
pub const PVI_STEP: f64 = 1e-4;
/// Points where the H -> y quotient is conditioned worse than this are
/// left out of the PVI residual.
pub const PVI_CONDITIONING: f64 = 2e-2;

/// First-integral drift, H -> y -> H round trip on the +theta image and
/// the PVI residual of the image selected by `minus`, at evenly spaced
/// points inside the solved x-range. Points next to the zero of
/// H + (x-1)H' are skipped for PVI and counted in the report.
pub fn pvi_roundtrip(s: &Scenario, minus: bool) -> Result<ResidualReport, Failure> {
    let m = "bonnetfam";
    let Kind::BonnetFamily(p) = &s.kind else {
        return Err(Failure::validation("pvi-roundtrip needs a bonnet-family scenario"));
    };
    if p.hazzidakis_type().map_err(Failure::validation_from)? != HazzidakisType::B {
        return Err(Failure::validation("pvi-roundtrip needs type B"));
    }
    let sol = p.solve().map_err(|e| Failure::numeric(m, e))?;
    let theta = sol.theta().map_err(|e| Failure::numeric(m, e))?;
    let (t_lo, t_hi) = sol.range();
    let (x_lo, x_hi) = (x_of_t(t_hi), x_of_t(t_lo));
    let pad = 0.05 * (x_hi - x_lo);
    let xs: Vec<f64> = (0..PVI_POINTS).map(|i| x_lo + pad + (x_hi - x_lo - 2.0 * pad) * i as f64 / (PVI_POINTS - 1) as f64).collect();
    let mut round: f64 = 0.0;
    let mut pvi: f64 = 0.0;
    let mut skipped = 0;
    let branch = if minus { -theta } else { theta };
    for &x in &xs {
        let t = t_of_x(x);
        let sample = XSample::from_t(t, &sol.eval(t).map_err(|e| Failure::numeric(m, e))?);
        let st = h_to_y(&sample, theta).map_err(|e| Failure::numeric(m, e))?;
        round = round.max((y_to_h(&st).map_err(|e| Failure::numeric(m, e))? - sample.h).abs());
        if quotient_conditioning(&sample) < PVI_CONDITIONING {
            skipped += 1;
            continue;
        }
        pvi = pvi.max(sol.mapped_pvi_residual(x, branch, PVI_STEP).map_err(|e| Failure::numeric(m, e))?);
    }
    let lat = s.lattice()?;
    let mut b = ReportBuilder::for_scenario(s, lat);
    b.max("first-integral", sol.first_integral_drift().map_err(|e| Failure::numeric(m, e))?, 1e-8);
    b.max("round-trip", round, 1e-8);
    b.max("pvi", pvi, 1e-6);
    b.info("theta", theta);
    b.info("x_min", xs[0]);
    b.info("x_max", xs[PVI_POINTS - 1]);
    b.info("pvi_points_skipped", skipped as f64);
    Ok(b.finish())
}
