//! Scenario files: one JSON object with a `kind`, its `params` block, an
//! optional grid and tolerance overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use surface_forge_core::bonnetfam::BonnetScenario;
use surface_forge_core::bonnetpair::QuatSamples;
use surface_forge_core::quatgeo::{Lattice, C64};
use surface_forge_core::thetagap::SpectralData;

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: Kind,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Overrides every residual tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Per-residual tolerance overrides, by residual name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Kind {
    CmcVacuum(VacuumParams),
    CmcFinitegap(FinitegapParams),
    BonnetFamily(BonnetScenario),
    BonnetPair(PairParams),
    Weierstrass(WeierstrassParams),
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::CmcVacuum(_) => "cmc-vacuum",
            Kind::CmcFinitegap(_) => "cmc-finitegap",
            Kind::BonnetFamily(_) => "bonnet-family",
            Kind::BonnetPair(_) => "bonnet-pair",
            Kind::Weierstrass(_) => "weierstrass",
        }
    }
}

/// u = 0, Q = 1/2 at loop parameter e^{it}.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VacuumParams {
    #[serde(default)]
    pub t: f64,
}

/// Spectral data; `t` defaults to arg lambda0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitegapParams {
    #[serde(flatten)]
    pub spectral: SpectralData,
    #[serde(default)]
    pub t: Option<f64>,
}

impl FinitegapParams {
    pub fn loop_angle(&self) -> f64 {
        self.t.unwrap_or_else(|| self.spectral.p0[1].atan2(self.spectral.p0[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSurface {
    Cylinder,
    MercatorSphere,
    Samples(QuatSamples),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub surface: PairSurface,
}

/// Spinors as polynomials in z (ascending coefficients [re, im]) and a
/// constant Dirac potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassParams {
    pub s1: Vec<[f64; 2]>,
    pub s2: Vec<[f64; 2]>,
    #[serde(default)]
    pub p: f64,
}

pub fn polynomial(coeffs: &[[f64; 2]], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::ZERO, |acc, c| acc * z + C64::new(c[0], c[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

/// Smallest side accepted: Gauss-Codazzi needs 7 nodes after two rings are cropped.
pub const MIN_NODES: usize = 11;

impl GridSpec {
    pub fn lattice(&self) -> Lattice {
        Lattice::centered(C64::new(self.center[0], self.center[1]), self.nx, self.ny, self.h)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.nx < MIN_NODES || self.ny < MIN_NODES {
            return Err(Failure::validation(format!("grid {}x{} is smaller than {MIN_NODES}x{MIN_NODES}", self.nx, self.ny)));
        }
        if !(self.h.is_finite() && self.h > 0.0) || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Failure::validation(format!("grid step {} or centre {:?} is not usable", self.h, self.center)));
        }
        Ok(())
    }

    /// Parses `nx,ny,h`.
    pub fn parse_override(s: &str) -> Result<(usize, usize, f64), Failure> {
        let p: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Failure::validation(format!("--grid expects nx,ny,h, got {s:?}"));
        if p.len() != 3 {
            return Err(bad());
        }
        Ok((p[0].parse().map_err(|_| bad())?, p[1].parse().map_err(|_| bad())?, p[2].parse().map_err(|_| bad())?))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::validation(format!("scenario: {e}")))
    }

    /// Grid used when the scenario gives none.
    fn default_grid(&self) -> Option<GridSpec> {
        let g = |n, h, c: [f64; 2]| Some(GridSpec { nx: n, ny: n, h, center: c });
        match &self.kind {
            Kind::CmcVacuum(_) => g(21, 0.01, [0.0, 0.0]),
            Kind::CmcFinitegap(_) => g(21, 1e-3, [0.1, 0.2]),
            Kind::BonnetPair(_) => g(21, 0.01, [0.3, 0.2]),
            Kind::Weierstrass(_) => g(21, 0.01, [0.0, 0.0]),
            Kind::BonnetFamily(_) => None,
        }
    }

    /// Applies `--grid` and `--tol` and checks everything that can be
    /// checked without computing.
    pub fn prepare(mut self, grid: Option<&str>, tol: Option<f64>) -> Result<Self, Failure> {
        if self.grid.is_none() {
            self.grid = self.default_grid();
        }
        if let Some(s) = grid {
            let (nx, ny, h) = GridSpec::parse_override(s)?;
            let center = match (&self.grid, &self.kind) {
                (Some(g), _) => g.center,
                (None, Kind::BonnetFamily(b)) => [0.5 * (b.chart.w_min[0] + b.chart.w_max[0]), 0.5 * (b.chart.w_min[1] + b.chart.w_max[1])],
                _ => [0.0, 0.0],
            };
            self.grid = Some(GridSpec { nx, ny, h, center });
        }
        if let Some(t) = tol {
            self.tol = Some(t);
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Failure::validation(format!("tolerance {t} must be positive")));
            }
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Failure::validation(format!("tolerance {k} = {v} must be positive")));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        match &self.kind {
            Kind::BonnetFamily(b) => {
                b.hazzidakis_type().map_err(Failure::validation_from)?;
                if self.grid.is_none() {
                    let lat = b.chart.lattice().map_err(Failure::validation_from)?;
                    if lat.nx < MIN_NODES {
                        return Err(Failure::validation(format!("chart n = {} is smaller than {MIN_NODES}", lat.nx)));
                    }
                }
                if b.t_values.iter().any(|t| !t.is_finite()) {
                    return Err(Failure::validation("T_values must be finite"));
                }
            }
            Kind::CmcFinitegap(f) => {
                let sd = &f.spectral;
                if sd.branch_points.len() != sd.genus || sd.d.len() != sd.genus {
                    return Err(Failure::validation(format!("genus {} needs that many branch points and D entries", sd.genus)));
                }
            }
            Kind::Weierstrass(w) => {
                if w.s1.is_empty() && w.s2.is_empty() {
                    return Err(Failure::validation("spinor polynomials are both empty"));
                }
            }
            Kind::BonnetPair(PairParams { surface: PairSurface::Samples(s) }) => {
                if s.nx < MIN_NODES || s.ny < MIN_NODES || s.f.len() != s.nx * s.ny || !(s.h > 0.0) {
                    return Err(Failure::validation(format!("sampled surface {}x{} with {} values", s.nx, s.ny, s.f.len())));
                }
            }
            Kind::CmcVacuum(_) | Kind::BonnetPair(_) => {}
        }
        Ok(self)
    }

    /// Lattice of the computation; bonnet-family falls back to its chart.
    pub fn lattice(&self) -> Result<Lattice, Failure> {
        match (&self.grid, &self.kind) {
            (Some(g), _) => Ok(g.lattice()),
            (None, Kind::BonnetFamily(b)) => b.chart.lattice().map_err(Failure::validation_from),
            (None, _) => Err(Failure::validation("scenario has no grid")),
        }
    }
}
