use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use super::quat::{ImVec3, Mat2, Quaternion, C64};
use crate::error::{GeomError, Result};

/// Rectangular lattice; node (i, j) sits at z = (x0 + i hx) + i (y0 + j hy).
/// Samples are stored row-major: index = j * nx + i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Lattice {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, hx: f64, hy: f64) -> Self {
        Self { nx, ny, x0, y0, hx, hy }
    }

    /// Square-spaced lattice centred on `center`.
    pub fn centered(center: C64, nx: usize, ny: usize, h: f64) -> Self {
        let x0 = center.re - h * (nx as f64 - 1.0) / 2.0;
        let y0 = center.im - h * (ny as f64 - 1.0) / 2.0;
        Self::new(nx, ny, x0, y0, h, h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn z(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    pub fn z_at(&self, k: usize) -> C64 {
        let (i, j) = self.coords(k);
        self.z(i, j)
    }

    pub fn nodes(&self) -> Vec<C64> {
        (0..self.len()).map(|k| self.z_at(k)).collect()
    }

    pub fn center_node(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }

    /// Same extent with spacing halved.
    pub fn refined(&self) -> Self {
        Self::new(
            2 * self.nx - 1,
            2 * self.ny - 1,
            self.x0,
            self.y0,
            self.hx / 2.0,
            self.hy / 2.0,
        )
    }

    /// Sub-lattice without `margin` nodes on each side, and the map from its
    /// node indices to ours.
    pub fn cropped(&self, margin: usize) -> Result<(Self, Vec<usize>)> {
        if self.nx <= 2 * margin || self.ny <= 2 * margin {
            return Err(GeomError::GridTooSmall { nx: self.nx, ny: self.ny, min: 2 * margin + 1 });
        }
        let inner = Self::new(
            self.nx - 2 * margin,
            self.ny - 2 * margin,
            self.x0 + margin as f64 * self.hx,
            self.y0 + margin as f64 * self.hy,
            self.hx,
            self.hy,
        );
        let map = (0..inner.len())
            .map(|k| {
                let (i, j) = inner.coords(k);
                self.index(i + margin, j + margin)
            })
            .collect();
        Ok((inner, map))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(GeomError::GridTooSmall { nx: self.nx, ny: self.ny, min: 1 });
        }
        if !(self.hx > 0.0 && self.hy > 0.0 && self.hx.is_finite() && self.hy.is_finite()) {
            return Err(GeomError::Invalid(format!("spacings must be positive, got {} {}", self.hx, self.hy)));
        }
        Ok(())
    }

    pub fn require_nodes(&self, min: usize) -> Result<()> {
        self.validate()?;
        if self.nx < min || self.ny < min {
            return Err(GeomError::GridTooSmall { nx: self.nx, ny: self.ny, min });
        }
        Ok(())
    }

    pub fn check_len(&self, n: usize, what: &str) -> Result<()> {
        if n != self.len() {
            return Err(GeomError::Shape(format!("{what}: {n} samples for a {}x{} lattice", self.nx, self.ny)));
        }
        Ok(())
    }
}

/// Values that finite differences and quadrature can act on.
pub trait Field: Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {}

impl<T> Field for T where T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Send + Sync {}

/// Accuracy of the interior stencils. Boundary nodes always use one-sided
/// second-order formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Stencil {
    Second,
    #[default]
    Fourth,
}

impl Stencil {
    /// Nodes from the edge before the full-order interior begins.
    pub fn margin(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }
}

fn d1_line<T: Field>(f: &[T], h: f64, st: Stencil, out: &mut [T]) {
    let n = f.len();
    let inv2h = 1.0 / (2.0 * h);
    out[0] = (f[1] * 4.0 - f[0] * 3.0 - f[2]) * inv2h;
    out[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * inv2h;
    for i in 1..n - 1 {
        let fourth = st == Stencil::Fourth && i >= 2 && i + 2 < n;
        out[i] = if fourth {
            (f[i - 2] - f[i + 2] + (f[i + 1] - f[i - 1]) * 8.0) * (1.0 / (12.0 * h))
        } else {
            (f[i + 1] - f[i - 1]) * inv2h
        };
    }
}

fn d2_line<T: Field>(f: &[T], h: f64, st: Stencil, out: &mut [T]) {
    let n = f.len();
    let ih2 = 1.0 / (h * h);
    out[0] = (f[0] * 2.0 - f[1] * 5.0 + f[2] * 4.0 - f[3]) * ih2;
    out[n - 1] = (f[n - 1] * 2.0 - f[n - 2] * 5.0 + f[n - 3] * 4.0 - f[n - 4]) * ih2;
    for i in 1..n - 1 {
        let fourth = st == Stencil::Fourth && i >= 2 && i + 2 < n;
        out[i] = if fourth {
            ((f[i - 1] + f[i + 1]) * 16.0 - f[i - 2] - f[i + 2] - f[i] * 30.0) * (ih2 / 12.0)
        } else {
            (f[i - 1] + f[i + 1] - f[i] * 2.0) * ih2
        };
    }
}

fn along_x<T: Field>(lat: &Lattice, f: &[T], op: impl Fn(&[T], &mut [T])) -> Vec<T> {
    let mut out = vec![T::default(); f.len()];
    for j in 0..lat.ny {
        let r = j * lat.nx..(j + 1) * lat.nx;
        op(&f[r.clone()], &mut out[r]);
    }
    out
}

fn along_y<T: Field>(lat: &Lattice, f: &[T], op: impl Fn(&[T], &mut [T])) -> Vec<T> {
    let mut out = vec![T::default(); f.len()];
    let mut col = vec![T::default(); lat.ny];
    let mut res = vec![T::default(); lat.ny];
    for i in 0..lat.nx {
        for j in 0..lat.ny {
            col[j] = f[j * lat.nx + i];
        }
        op(&col, &mut res);
        for j in 0..lat.ny {
            out[j * lat.nx + i] = res[j];
        }
    }
    out
}

/// Finite-difference operators bound to one lattice and stencil.
#[derive(Debug, Clone, Copy)]
pub struct Diff {
    pub lattice: Lattice,
    pub stencil: Stencil,
}

impl Diff {
    pub fn new(lattice: Lattice, stencil: Stencil) -> Result<Self> {
        lattice.require_nodes(4)?;
        Ok(Self { lattice, stencil })
    }

    pub fn dx<T: Field>(&self, f: &[T]) -> Vec<T> {
        let (h, st) = (self.lattice.hx, self.stencil);
        along_x(&self.lattice, f, |a, b| d1_line(a, h, st, b))
    }

    pub fn dy<T: Field>(&self, f: &[T]) -> Vec<T> {
        let (h, st) = (self.lattice.hy, self.stencil);
        along_y(&self.lattice, f, |a, b| d1_line(a, h, st, b))
    }

    pub fn dxx<T: Field>(&self, f: &[T]) -> Vec<T> {
        let (h, st) = (self.lattice.hx, self.stencil);
        along_x(&self.lattice, f, |a, b| d2_line(a, h, st, b))
    }

    pub fn dyy<T: Field>(&self, f: &[T]) -> Vec<T> {
        let (h, st) = (self.lattice.hy, self.stencil);
        along_y(&self.lattice, f, |a, b| d2_line(a, h, st, b))
    }

    pub fn dxy<T: Field>(&self, f: &[T]) -> Vec<T> {
        self.dy(&self.dx(f))
    }

    /// d/dz = (d/dx - i d/dy)/2 of a complex grid.
    pub fn dz(&self, f: &[C64]) -> Vec<C64> {
        let (fx, fy) = (self.dx(f), self.dy(f));
        fx.iter().zip(&fy).map(|(a, b)| (a - b * C64::new(0.0, 1.0)) * 0.5).collect()
    }

    /// d/dzbar = (d/dx + i d/dy)/2 of a complex grid.
    pub fn dzbar(&self, f: &[C64]) -> Vec<C64> {
        let (fx, fy) = (self.dx(f), self.dy(f));
        fx.iter().zip(&fy).map(|(a, b)| (a + b * C64::new(0.0, 1.0)) * 0.5).collect()
    }

    /// d^2/dz dzbar = Laplacian / 4.
    pub fn dzdzbar<T: Field>(&self, f: &[T]) -> Vec<T> {
        let (a, b) = (self.dxx(f), self.dyy(f));
        a.iter().zip(&b).map(|(p, q)| (*p + *q) * 0.25).collect()
    }

    /// Whether node (i, j) is reached by full-order stencils in both directions.
    pub fn is_interior(&self, k: usize) -> bool {
        let m = self.stencil.margin();
        let (i, j) = self.lattice.coords(k);
        i >= m && j >= m && i + m < self.lattice.nx && j + m < self.lattice.ny
    }

    pub fn interior_max(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.lattice.len()).filter(|&k| self.is_interior(k)).map(f).fold(0.0, f64::max)
    }
}

fn lagrange4(t: f64) -> [f64; 4] {
    // nodes at -1, 0, 1, 2
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn stencil_start(pos: f64, n: usize) -> (usize, f64) {
    let base = pos.floor().clamp(0.0, (n - 1) as f64);
    let start = (base as isize - 1).clamp(0, n as isize - 4) as usize;
    (start, pos - start as f64 - 1.0)
}

/// Bicubic Lagrange interpolation of a lattice sample at an arbitrary point.
pub fn interpolate<T: Field>(lat: &Lattice, f: &[T], z: C64) -> T {
    let px = (z.re - lat.x0) / lat.hx;
    let py = (z.im - lat.y0) / lat.hy;
    let snap = |p: f64| if (p - p.round()).abs() < 1e-9 { p.round() } else { p };
    let (px, py) = (snap(px), snap(py));
    let (sx, wx) = if px.fract() == 0.0 && px >= 0.0 && (px as usize) < lat.nx {
        (px as usize, None)
    } else {
        let (s, t) = stencil_start(px, lat.nx);
        (s, Some(lagrange4(t)))
    };
    let (sy, wy) = if py.fract() == 0.0 && py >= 0.0 && (py as usize) < lat.ny {
        (py as usize, None)
    } else {
        let (s, t) = stencil_start(py, lat.ny);
        (s, Some(lagrange4(t)))
    };
    let row = |j: usize| -> T {
        match wx {
            None => f[lat.index(sx, j)],
            Some(w) => (0..4).fold(T::default(), |acc, a| acc + f[lat.index(sx + a, j)] * w[a]),
        }
    };
    match wy {
        None => row(sy),
        Some(w) => (0..4).fold(T::default(), |acc, b| acc + row(sy + b) * w[b]),
    }
}

/// Cumulative integral of a 1-D sample by the trapezoid rule with the
/// first Euler-Maclaurin endpoint correction; `df` are derivative samples.
pub fn cumulative_line<T: Field>(f: &[T], df: &[T], h: f64, start: usize) -> Vec<T> {
    let n = f.len();
    let mut out = vec![T::default(); n];
    let mut acc = T::default();
    for k in start + 1..n {
        acc = acc + (f[k - 1] + f[k]) * (0.5 * h);
        out[k] = acc - (df[k] - df[start]) * (h * h / 12.0);
    }
    acc = T::default();
    for k in (0..start).rev() {
        acc = acc - (f[k + 1] + f[k]) * (0.5 * h);
        out[k] = acc - (df[k] - df[start]) * (h * h / 12.0);
    }
    out
}

/// Integrates the closed 1-form `a dx + b dy` over the lattice from `base`,
/// x-first and y-first. Returns (x-first potential, max path defect).
pub fn integrate_form<T: Field>(d: &Diff, a: &[T], b: &[T], base: (usize, usize), norm: impl Fn(T) -> f64) -> (Vec<T>, f64) {
    let lat = d.lattice;
    let (ax, by) = (d.dx(a), d.dy(b));
    let row = |j: usize, src: &[T], dsrc: &[T], start: usize| -> Vec<T> {
        let r = j * lat.nx..(j + 1) * lat.nx;
        cumulative_line(&src[r.clone()], &dsrc[r], lat.hx, start)
    };
    let col = |i: usize, src: &[T], dsrc: &[T], start: usize| -> Vec<T> {
        let c: Vec<T> = (0..lat.ny).map(|j| src[lat.index(i, j)]).collect();
        let dc: Vec<T> = (0..lat.ny).map(|j| dsrc[lat.index(i, j)]).collect();
        cumulative_line(&c, &dc, lat.hy, start)
    };
    let (i0, j0) = base;
    let mut xfirst = vec![T::default(); lat.len()];
    let base_row = row(j0, a, &ax, i0);
    for i in 0..lat.nx {
        let c = col(i, b, &by, j0);
        for j in 0..lat.ny {
            xfirst[lat.index(i, j)] = base_row[i] + c[j];
        }
    }
    let mut defect: f64 = 0.0;
    let base_col = col(i0, b, &by, j0);
    for j in 0..lat.ny {
        let r = row(j, a, &ax, i0);
        for i in 0..lat.nx {
            let k = lat.index(i, j);
            defect = defect.max(norm(xfirst[k] - (base_col[j] + r[i])));
        }
    }
    (xfirst, defect)
}

pub fn c64_norm(c: C64) -> f64 {
    c.norm()
}

pub fn imvec_norm(v: ImVec3) -> f64 {
    v.norm()
}

pub fn quat_norm(q: Quaternion) -> f64 {
    q.norm()
}

pub fn mat2_norm(m: Mat2) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> Lattice {
        Lattice::centered(C64::new(0.3, -0.2), 21, 17, 0.05)
    }

    #[test]
    fn wirtinger_of_z() {
        let l = lat();
        let d = Diff::new(l, Stencil::Second).unwrap();
        let z = l.nodes();
        let dz = d.dz(&z);
        let dzb = d.dzbar(&z);
        for k in 0..l.len() {
            assert!((dz[k] - C64::ONE).norm() < 1e-12);
            assert!(dzb[k].norm() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_is_exact_on_quartics() {
        let l = lat();
        let d = Diff::new(l, Stencil::Fourth).unwrap();
        let f: Vec<f64> = l.nodes().iter().map(|z| z.re.powi(4) + z.im.powi(3) * z.re).collect();
        let fxx = d.dxx(&f);
        let fxy = d.dxy(&f);
        for k in 0..l.len() {
            if d.is_interior(k) {
                let z = l.z_at(k);
                assert!((fxx[k] - 12.0 * z.re * z.re).abs() < 1e-9);
                assert!((fxy[k] - 3.0 * z.im * z.im).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_sided_boundaries_exact_on_quadratics() {
        let l = lat();
        let d = Diff::new(l, Stencil::Second).unwrap();
        let f: Vec<f64> = l.nodes().iter().map(|z| z.re * z.re - 2.0 * z.im).collect();
        let fx = d.dx(&f);
        let fxx = d.dxx(&f);
        for k in 0..l.len() {
            assert!((fx[k] - 2.0 * l.z_at(k).re).abs() < 1e-11);
            assert!((fxx[k] - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let l = lat();
        let f: Vec<f64> = l.nodes().iter().map(|z| z.re.powi(3) - z.re * z.im * z.im).collect();
        for z in [C64::new(0.31, -0.17), C64::new(-0.19, 0.19), C64::new(0.0, 0.0)] {
            let v = interpolate(&l, &f, z);
            assert!((v - (z.re.powi(3) - z.re * z.im * z.im)).abs() < 1e-12);
        }
    }

    #[test]
    fn corrected_trapezoid_exact_on_cubic() {
        let h = 0.1;
        let xs: Vec<f64> = (0..11).map(|k| k as f64 * h).collect();
        let f: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let df: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let v = cumulative_line(&f, &df, h, 4);
        for (k, x) in xs.iter().enumerate() {
            let exact = (x.powi(3) - xs[4].powi(3)) / 3.0;
            assert!((v[k] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn form_integration_recovers_potential() {
        let l = lat();
        let d = Diff::new(l, Stencil::Fourth).unwrap();
        let z = l.nodes();
        let a: Vec<f64> = z.iter().map(|z| 2.0 * z.re * z.im).collect();
        let b: Vec<f64> = z.iter().map(|z| z.re * z.re + 3.0 * z.im * z.im).collect();
        let base = l.center_node();
        let (p, defect) = integrate_form(&d, &a, &b, base, |v: f64| v.abs());
        let z0 = l.z(base.0, base.1);
        let pot = |z: C64| z.re * z.re * z.im + z.im.powi(3);
        for k in 0..l.len() {
            assert!((p[k] - (pot(z[k]) - pot(z0))).abs() < 1e-11);
        }
        assert!(defect < 1e-11);
    }
}
