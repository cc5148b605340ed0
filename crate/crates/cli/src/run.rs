//! Per-kind computations behind `generate`, `verify` and `sweep`.

use surface_forge_core::bonnetfam::{bonnet_data, build_bonnet_surface, BonnetScenario, HazzidakisType};
use surface_forge_core::bonnetpair::{
    bonnet_pair_from_isothermic, isothermic_residual4, pair_report, Cylinder, IsothermicPatch, MercatorSphere, QuatSurface,
};
use surface_forge_core::frameflow::{cmc_sym_surface, TDerivative, Vacuum};
use surface_forge_core::quatgeo::{
    estimate_fundamental_data, gauss_codazzi_residual, gauss_curvature, Diff, FundamentalData, Lattice, Stencil, SurfaceGrid, C64,
};
use surface_forge_core::thetagap::FiniteGapSolution;
use surface_forge_core::weierstrass::{dirac_residual, weierstrass_integrate, DiracPotential, SpinorPair};

use crate::obj::surface_obj;
use crate::report::{ReportBuilder, ResidualReport};
use crate::scenario::{polynomial, FinitegapParams, Kind, PairParams, PairSurface, Scenario, VacuumParams, WeierstrassParams};
use crate::Failure;

/// Report, meshes by file name, and the estimated data of the primary
/// surface (used for family deltas).
pub struct Outcome {
    pub report: ResidualReport,
    pub meshes: Vec<(String, String)>,
    pub data: FundamentalData,
}

pub fn run(s: &Scenario) -> Result<Outcome, Failure> {
    let lat = s.lattice()?;
    match &s.kind {
        Kind::CmcVacuum(p) => vacuum(s, p, lat),
        Kind::CmcFinitegap(p) => finitegap(s, p, lat),
        Kind::BonnetFamily(p) => bonnet_family(s, p, lat),
        Kind::BonnetPair(p) => bonnet_pair(s, p, lat),
        Kind::Weierstrass(p) => weierstrass(s, p, lat),
    }
}

/// Gauss, Codazzi and conformality of a built surface. Gauss-Codazzi uses
/// the estimate without its two outer rings, where it is one-sided.
pub fn surface_checks(b: &mut ReportBuilder, prefix: &str, surf: &SurfaceGrid, tol: f64) -> Result<FundamentalData, Failure> {
    let m = "quatgeo";
    let fd = estimate_fundamental_data(surf).map_err(|e| Failure::numeric(m, e))?;
    let inner = fd.cropped(2).map_err(|e| Failure::numeric(m, e))?;
    let gc = gauss_codazzi_residual(&inner).map_err(|e| Failure::numeric(m, e))?;
    let (conf, _, _) = surf.conformality(Stencil::Fourth).map_err(|e| Failure::numeric(m, e))?;
    b.max(&format!("{prefix}gauss"), gc.gauss_max, tol);
    b.max(&format!("{prefix}codazzi"), gc.codazzi_max, tol);
    b.max(&format!("{prefix}conformality"), conf, tol);
    Ok(fd)
}

fn interior(lat: Lattice) -> Result<Diff, Failure> {
    Diff::new(lat, Stencil::Fourth).map_err(Failure::validation_from)
}

fn vacuum(s: &Scenario, p: &VacuumParams, lat: Lattice) -> Result<Outcome, Failure> {
    let surf = cmc_sym_surface(&Vacuum, &lat, p.t, TDerivative::Exact).map_err(|e| Failure::numeric("frameflow", e))?;
    let mut b = ReportBuilder::for_scenario(s, lat);
    let fd = surface_checks(&mut b, "", &surf, 1e-8)?;
    let d = interior(lat)?;
    b.max("isometry", d.interior_max(|k| fd.u[k].abs()), 1e-8);
    b.max("H-equality", d.interior_max(|k| (fd.h[k] - 1.0).abs()), 1e-8);
    b.info("max_abs_Q", d.interior_max(|k| fd.q[k].norm()));
    Ok(Outcome { report: b.finish(), meshes: vec![("surface.obj".into(), surface_obj(&surf))], data: fd })
}

fn finitegap(s: &Scenario, p: &FinitegapParams, lat: Lattice) -> Result<Outcome, Failure> {
    let m = "thetagap";
    let sol = FiniteGapSolution::new(&p.spectral).map_err(|e| Failure::numeric(m, e))?;
    let mut b = ReportBuilder::for_scenario(s, lat);
    let mut reality: f64 = 0.0;
    let mut u = Vec::with_capacity(lat.len());
    for z in lat.nodes() {
        let c = sol.u_complex(z).map_err(|e| Failure::numeric(m, e))?;
        reality = reality.max(c.im.abs());
        u.push(c.re);
    }
    b.max("reality", reality, 1e-10);
    let d2 = Diff::new(lat, Stencil::Second).map_err(Failure::validation_from)?;
    let uc: Vec<C64> = u.iter().map(|&v| C64::from(v)).collect();
    let lap = d2.dzdzbar(&uc);
    b.max("sinh-gordon", d2.interior_max(|k| (lap[k].re + u[k].sinh()).abs()), 1e-5);
    b.max("determinant", sol.det_defect(&lat).map_err(|e| Failure::numeric(m, e))?, 1e-8);
    let surf = cmc_sym_surface(&sol, &lat, p.loop_angle(), TDerivative::Exact).map_err(|e| Failure::numeric("frameflow", e))?;
    let fd = surface_checks(&mut b, "", &surf, 1e-3)?;
    let d = interior(lat)?;
    b.max("isometry", d.interior_max(|k| (fd.u[k] - u[k]).abs()), 1e-3);
    b.max("H-equality", d.interior_max(|k| (fd.h[k] - 1.0).abs()), 1e-3);
    b.info("det_normalization_re", sol.det_normalization().re);
    b.info("det_normalization_im", sol.det_normalization().im);
    Ok(Outcome { report: b.finish(), meshes: vec![("surface.obj".into(), surface_obj(&surf))], data: fd })
}

fn weierstrass(s: &Scenario, p: &WeierstrassParams, lat: Lattice) -> Result<Outcome, Failure> {
    let m = "weierstrass";
    let sp = SpinorPair::from_fn(lat, |z| (polynomial(&p.s1, z), polynomial(&p.s2, z)));
    let pot = DiracPotential::constant(&lat, p.p);
    let mut b = ReportBuilder::for_scenario(s, lat);
    b.max("dirac", dirac_residual(&sp, &pot).map_err(|e| Failure::numeric(m, e))?, 1e-8);
    let surf = weierstrass_integrate(&sp).map_err(|e| Failure::numeric(m, e))?;
    let d = interior(lat)?;
    if let Some((fx, fy)) = &surf.tangents {
        let (ay, bx) = (d.dy(fx), d.dx(fy));
        b.max("closedness", d.interior_max(|k| (ay[k] - bx[k]).norm()), 1e-8);
    }
    // Gauss-Codazzi here measures difference truncation of the check itself
    let fd = surface_checks(&mut b, "", &surf, 1e-6)?;
    let half = sp.half_metric();
    let hm = sp.mean_curvature(&pot);
    b.max("isometry", d.interior_max(|k| (fd.u[k].exp() - half[k] * half[k]).abs()), 1e-8);
    b.max("H-equality", d.interior_max(|k| (fd.h[k] - hm[k]).abs()), 1e-8);
    Ok(Outcome { report: b.finish(), meshes: vec![("surface.obj".into(), surface_obj(&surf))], data: fd })
}

fn bonnet_family(s: &Scenario, p: &BonnetScenario, lat: Lattice) -> Result<Outcome, Failure> {
    let m = "bonnetfam";
    let ty = p.hazzidakis_type().map_err(Failure::validation_from)?;
    let sol = p.solve().map_err(|e| Failure::numeric(m, e))?;
    let ts = if p.t_values.is_empty() { vec![0.0] } else { p.t_values.clone() };
    let mut b = ReportBuilder::for_scenario(s, lat);
    let d = interior(lat)?;
    let mut meshes = Vec::new();
    let mut first: Option<FundamentalData> = None;
    let (mut gauss, mut codazzi, mut conf, mut fit, mut iso, mut heq, mut curv) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for (i, &t) in ts.iter().enumerate() {
        let surf = build_bonnet_surface(ty, &sol, t, &lat).map_err(|e| Failure::numeric(m, e))?;
        let exact = bonnet_data(ty, &sol, t, &lat).map_err(|e| Failure::numeric(m, e))?;
        let mut local = ReportBuilder::for_scenario(s, lat);
        let fd = surface_checks(&mut local, "", &surf, 1.0)?;
        let r = local.finish();
        gauss = gauss.max(r.get("gauss").unwrap_or(f64::NAN));
        codazzi = codazzi.max(r.get("codazzi").unwrap_or(f64::NAN));
        conf = conf.max(r.get("conformality").unwrap_or(f64::NAN));
        fit = fit.max(d.interior_max(|k| (fd.u[k] - exact.u[k]).abs() + (fd.h[k] - exact.h[k]).abs()));
        curv = curv.max(d.interior_max(|k| gauss_curvature(fd.u[k], fd.q[k], fd.h[k]).abs()));
        if let Some(f0) = &first {
            iso = iso.max(d.interior_max(|k| (fd.u[k] - f0.u[k]).abs()));
            heq = heq.max(d.interior_max(|k| (fd.h[k] - f0.h[k]).abs()));
        }
        let name = if ts.len() == 1 { "surface.obj".to_string() } else { format!("surface_T{i}.obj") };
        meshes.push((name, surface_obj(&surf)));
        if first.is_none() {
            first = Some(fd);
        }
    }
    b.max("gauss", gauss, 1e-6);
    b.max("codazzi", codazzi, 1e-6);
    b.max("conformality", conf, 1e-6);
    b.max("input-fit", fit, 1e-6);
    b.max("isometry", iso, 1e-6);
    b.max("H-equality", heq, 1e-6);
    if ty == HazzidakisType::B {
        b.max("first-integral", sol.first_integral_drift().map_err(|e| Failure::numeric(m, e))?, 1e-8);
        if let Ok(th) = sol.theta() {
            b.info("theta", th);
        }
    }
    b.info("max_abs_gauss_curvature", curv);
    b.info("max_H1", sol.max_h1());
    Ok(Outcome { report: b.finish(), meshes, data: first.expect("at least one T") })
}

fn bonnet_pair(s: &Scenario, p: &PairParams, lat: Lattice) -> Result<Outcome, Failure> {
    let m = "bonnetpair";
    let r = match &p.surface {
        PairSurface::Cylinder => Cylinder.sample(&lat),
        PairSurface::MercatorSphere => MercatorSphere.sample(&lat),
        PairSurface::Samples(q) => QuatSurface::from_samples(q),
    }
    .map_err(Failure::validation_from)?;
    let lat = r.lattice;
    let mut b = ReportBuilder::for_scenario(s, lat);
    b.max("isothermic", isothermic_residual4(&r).map_err(|e| Failure::numeric(m, e))?, 1e-6);
    let pair = bonnet_pair_from_isothermic(&r).map_err(|e| Failure::numeric(m, e))?;
    b.max("closedness", pair.path_defect, 1e-8);
    let rep = pair_report(&pair).map_err(|e| Failure::numeric(m, e))?;
    b.max("isometry", rep.metric, 1e-8);
    b.max("hopf-modulus", rep.hopf_modulus, 1e-8);
    b.max("H-equality", rep.mean_curvature, 1e-4);
    b.max("holomorphy", rep.holomorphy, 1e-6);
    b.max("conjugation", rep.conjugation, 1e-8);
    b.min("non-congruence", rep.min_hopf_gap, 1e-3);
    let fd = surface_checks(&mut b, "f1-", &pair.f1, 1e-6)?;
    surface_checks(&mut b, "f2-", &pair.f2, 1e-6)?;
    b.info("real_leak", pair.real_leak);
    b.info("max_im_alpha", rep.max_im_alpha);
    Ok(Outcome {
        report: b.finish(),
        meshes: vec![("f1.obj".into(), surface_obj(&pair.f1)), ("f2.obj".into(), surface_obj(&pair.f2))],
        data: fd,
    })
}

/// Checks of a bare mesh: estimated data, Gauss-Codazzi, conformality.
pub fn verify_mesh(surf: &SurfaceGrid, tol: Option<f64>) -> Result<ResidualReport, Failure> {
    let mut b = ReportBuilder::new("mesh", surf.lattice, tol, Default::default());
    let fd = surface_checks(&mut b, "", surf, 1e-6)?;
    let d = interior(surf.lattice)?;
    b.info("max_abs_H", d.interior_max(|k| fd.h[k].abs()));
    b.info("max_abs_Q", d.interior_max(|k| fd.q[k].norm()));
    b.info("max_abs_gauss_curvature", d.interior_max(|k| gauss_curvature(fd.u[k], fd.q[k], fd.h[k]).abs()));
    Ok(b.finish())
}
