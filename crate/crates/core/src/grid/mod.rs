//! Uniform tensor grids over a box with homogeneous Dirichlet data.
//!
//! Unknowns live on interior nodes; gradient components live on the faces
//! (edge midpoints) between neighbouring nodes along each axis, boundary
//! faces included. With equal node and face weights `h_1 ⋯ h_N` the
//! discrete divergence is the exact negative adjoint of the gradient.
//!
//! Storage is row-major with axis 0 slowest.

mod io;
mod poincare;

pub use io::{read_grid_function, write_grid_function, GridFormat};
pub use poincare::{dirichlet_eigenvalue_exact, poincare_constant, EigenEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths: Vec<f64>,
    cells: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1, 2 or 3 (got {})",
                lengths.len()
            )));
        }
        if lengths.len() != cells.len() {
            return Err(Error::InvalidDomain(
                "lengths and cells differ in length".into(),
            ));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!("non-positive extent {l}")));
        }
        if let Some(n) = cells.iter().find(|n| **n < 2) {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 cells per axis (got {n})"
            )));
        }
        Ok(Self { lengths, cells })
    }

    /// `(0,1)^dim` with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(vec![1.0; dim], vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    /// Interior node counts per axis (`n_i - 1`).
    pub fn interior_shape(&self) -> Vec<usize> {
        self.cells.iter().map(|n| n - 1).collect()
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|n| n - 1).product()
    }

    /// Quadrature weight of every node and face.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h(a)).product()
    }

    /// `|Ω|`
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn diameter(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Number of gradient samples along `axis`.
    pub fn face_count(&self, axis: usize) -> usize {
        self.face_shape(axis).iter().product()
    }

    pub fn face_shape(&self, axis: usize) -> Vec<usize> {
        let mut s = self.interior_shape();
        s[axis] = self.cells[axis];
        s
    }

    /// Interior extent along `axis` and the stride of that axis.
    #[inline]
    fn line_layout(&self, axis: usize) -> (usize, usize) {
        let inner: usize = self.cells[axis + 1..].iter().map(|n| n - 1).product();
        (self.cells[axis] - 1, inner)
    }

    /// Multi-index of an interior node.
    pub fn node_multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.dim()).rev() {
            let m = self.cells[a] - 1;
            idx[a] = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn node_position(&self, flat: usize) -> [f64; 3] {
        let idx = self.node_multi_index(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = (idx[a] + 1) as f64 * self.h(a);
        }
        x
    }

    pub fn face_position(&self, axis: usize, mut flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in (0..self.dim()).rev() {
            let m = if a == axis { self.cells[a] } else { self.cells[a] - 1 };
            let i = flat % m;
            flat /= m;
            x[a] = if a == axis {
                (i as f64 + 0.5) * self.h(a)
            } else {
                (i + 1) as f64 * self.h(a)
            };
        }
        x
    }

    /// Interior node indices on either side of a face; `None` marks the
    /// boundary node.
    #[inline]
    pub fn face_neighbours(&self, axis: usize, face: usize) -> (Option<usize>, Option<usize>) {
        let (m, inner) = self.line_layout(axis);
        let n = m + 1;
        let r = face % inner;
        let rest = face / inner;
        let j = rest % n;
        let o = rest / n;
        let node = |i: usize| (o * m + i) * inner + r;
        let left = if j >= 1 { Some(node(j - 1)) } else { None };
        let right = if j < m { Some(node(j)) } else { None };
        (left, right)
    }

    /// Faces to the left and right of an interior node along `axis`.
    #[inline]
    pub fn node_faces(&self, axis: usize, node: usize) -> (usize, usize) {
        let (m, inner) = self.line_layout(axis);
        let n = m + 1;
        let r = node % inner;
        let rest = node / inner;
        let i = rest % m;
        let o = rest / m;
        let face = |j: usize| (o * n + j) * inner + r;
        (face(i), face(i + 1))
    }

    /// Neighbouring interior nodes along `axis`; `None` past the boundary.
    #[inline]
    pub fn node_neighbours(&self, axis: usize, node: usize) -> (Option<usize>, Option<usize>) {
        let (m, inner) = self.line_layout(axis);
        let i = (node / inner) % m;
        let left = if i >= 1 { Some(node - inner) } else { None };
        let right = if i + 1 < m { Some(node + inner) } else { None };
        (left, right)
    }
}

/// Real field on the interior nodes; the boundary trace is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: BoxDomain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: &BoxDomain) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![0.0; domain.node_count()],
        }
    }

    pub fn from_values(domain: &BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                domain.node_count(),
                values.len()
            )));
        }
        Ok(Self {
            domain: domain.clone(),
            values,
        })
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn<F>(domain: &BoxDomain, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let dim = domain.dim();
        let mut values = vec![0.0; domain.node_count()];
        exec::fill_indexed(&mut values, |i| f(&domain.node_position(i)[..dim]));
        Self {
            domain: domain.clone(),
            values,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete `L²(Ω)` norm.
    pub fn norm(&self) -> f64 {
        (self.domain.cell_volume() * exec::dot(&self.values, &self.values)).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &GridFunction) -> Self {
        debug_assert_eq!(self.domain, other.domain);
        let mut out = self.clone();
        exec::axpy(a, &other.values, &mut out.values);
        out
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn axpy(&mut self, a: f64, other: &GridFunction) {
        exec::axpy(a, &other.values, &mut self.values);
    }
}

/// One component per axis, sampled on that axis' faces.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    domain: BoxDomain,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(domain: &BoxDomain) -> Self {
        Self {
            domain: domain.clone(),
            components: (0..domain.dim())
                .map(|a| vec![0.0; domain.face_count(a)])
                .collect(),
        }
    }

    pub fn from_components(domain: &BoxDomain, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} components, got {}",
                domain.dim(),
                components.len()
            )));
        }
        for (a, c) in components.iter().enumerate() {
            if c.len() != domain.face_count(a) {
                return Err(Error::InvalidArgument(format!(
                    "component {a}: expected {} face values, got {}",
                    domain.face_count(a),
                    c.len()
                )));
            }
        }
        Ok(Self {
            domain: domain.clone(),
            components,
        })
    }

    /// Samples component `a` of `f` at the faces normal to axis `a`.
    pub fn from_fn<F>(domain: &BoxDomain, f: F) -> Self
    where
        F: Fn(usize, &[f64]) -> f64 + Sync + Send,
    {
        let dim = domain.dim();
        let components = (0..dim)
            .map(|a| {
                let mut c = vec![0.0; domain.face_count(a)];
                exec::fill_indexed(&mut c, |i| f(a, &domain.face_position(a, i)[..dim]));
                c
            })
            .collect();
        Self {
            domain: domain.clone(),
            components,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        inner_vec_unchecked(self, self).sqrt()
    }

    pub fn add_scaled(&self, a: f64, other: &VectorField) -> Self {
        let mut out = self.clone();
        for (c, o) in out.components.iter_mut().zip(&other.components) {
            exec::axpy(a, o, c);
        }
        out
    }
}

/// Forward difference onto faces, with zero boundary values.
pub fn gradient(u: &GridFunction) -> VectorField {
    let d = &u.domain;
    let vals = &u.values;
    let components = (0..d.dim())
        .map(|a| {
            let inv_h = 1.0 / d.h(a);
            let mut g = vec![0.0; d.face_count(a)];
            exec::fill_indexed(&mut g, |f| {
                let (l, r) = d.face_neighbours(a, f);
                let ul = l.map_or(0.0, |i| vals[i]);
                let ur = r.map_or(0.0, |i| vals[i]);
                (ur - ul) * inv_h
            });
            g
        })
        .collect();
    VectorField {
        domain: d.clone(),
        components,
    }
}

/// Backward difference from faces to nodes; `inner(divergence(q), v) =
/// -inner_vec(q, gradient(v))` holds exactly.
pub fn divergence(q: &VectorField) -> GridFunction {
    let d = &q.domain;
    let dim = d.dim();
    let inv_h: Vec<f64> = (0..dim).map(|a| 1.0 / d.h(a)).collect();
    let mut out = vec![0.0; d.node_count()];
    exec::fill_indexed(&mut out, |i| {
        let mut s = 0.0;
        for a in 0..dim {
            let (fl, fr) = d.node_faces(a, i);
            s += (q.components[a][fr] - q.components[a][fl]) * inv_h[a];
        }
        s
    });
    GridFunction {
        domain: d.clone(),
        values: out,
    }
}

/// `-Δ_h u`, the standard `(2N+1)`-point Dirichlet Laplacian. Equal to
/// `-divergence(gradient(u))`.
pub fn neg_laplacian(u: &GridFunction) -> GridFunction {
    let d = &u.domain;
    let dim = d.dim();
    let inv_h2: Vec<f64> = (0..dim).map(|a| 1.0 / (d.h(a) * d.h(a))).collect();
    let vals = &u.values;
    let mut out = vec![0.0; d.node_count()];
    exec::fill_indexed(&mut out, |i| {
        let mut s = 0.0;
        for a in 0..dim {
            let (l, r) = d.node_neighbours(a, i);
            let ul = l.map_or(0.0, |k| vals[k]);
            let ur = r.map_or(0.0, |k| vals[k]);
            s += (2.0 * vals[i] - ul - ur) * inv_h2[a];
        }
        s
    });
    GridFunction {
        domain: d.clone(),
        values: out,
    }
}

pub fn inner(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    if u.domain != v.domain {
        return Err(Error::DomainMismatch);
    }
    Ok(u.domain.cell_volume() * exec::dot(&u.values, &v.values))
}

pub fn inner_vec(q: &VectorField, r: &VectorField) -> Result<f64> {
    if q.domain != r.domain {
        return Err(Error::DomainMismatch);
    }
    Ok(inner_vec_unchecked(q, r))
}

fn inner_vec_unchecked(q: &VectorField, r: &VectorField) -> f64 {
    let w = q.domain.cell_volume();
    w * q
        .components
        .iter()
        .zip(&r.components)
        .map(|(a, b)| exec::dot(a, b))
        .sum::<f64>()
}

/// `‖∇u‖²` in the discrete face norm.
pub fn dirichlet_energy(u: &GridFunction) -> f64 {
    let g = gradient(u);
    inner_vec_unchecked(&g, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_fn(d: &BoxDomain, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..d.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridFunction::from_values(d, v).unwrap()
    }

    fn random_field(d: &BoxDomain, rng: &mut ChaCha8Rng) -> VectorField {
        let c = (0..d.dim())
            .map(|a| (0..d.face_count(a)).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        VectorField::from_components(d, c).unwrap()
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(BoxDomain::new(vec![1.0], vec![1]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![4]).is_err());
        assert!(BoxDomain::new(vec![1.0; 4], vec![4; 4]).is_err());
        assert!(BoxDomain::new(vec![1.0, 1.0], vec![4]).is_err());
    }

    #[test]
    fn counts_match_layout() {
        let d = BoxDomain::new(vec![1.0, 2.0, 0.5], vec![4, 5, 6]).unwrap();
        assert_eq!(d.node_count(), 3 * 4 * 5);
        assert_eq!(d.face_count(0), 4 * 4 * 5);
        assert_eq!(d.face_count(1), 3 * 5 * 5);
        assert_eq!(d.face_count(2), 3 * 4 * 6);
        assert!((d.h(1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let d = BoxDomain::unit(2, 8).unwrap();
        let g = gradient(&GridFunction::zeros(&d));
        assert!(g.components().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_of_hat_is_piecewise_constant() {
        // hat with peak 1 at x = 1/2 on 4 cells: interior values 0.5, 1, 0.5
        let d = BoxDomain::unit(1, 4).unwrap();
        let u = GridFunction::from_values(&d, vec![0.5, 1.0, 0.5]).unwrap();
        let g = gradient(&u);
        assert_eq!(g.component(0), &[2.0, 2.0, -2.0, -2.0]);
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let err = |n: usize| {
            let d = BoxDomain::unit(1, n).unwrap();
            let u = GridFunction::from_fn(&d, |x| (PI * x[0]).sin());
            let g = gradient(&u);
            (0..d.face_count(0))
                .map(|f| {
                    let x = d.face_position(0, f)[0];
                    (g.component(0)[f] - PI * (PI * x).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn divergence_is_negative_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [
            BoxDomain::unit(1, 9).unwrap(),
            BoxDomain::new(vec![1.0, 0.7], vec![6, 9]).unwrap(),
            BoxDomain::new(vec![1.0, 2.0, 1.5], vec![4, 5, 3]).unwrap(),
        ] {
            for _ in 0..50 {
                let q = random_field(&d, &mut rng);
                let v = random_fn(&d, &mut rng);
                let lhs = inner(&divergence(&q), &v).unwrap();
                let rhs = -inner_vec(&q, &gradient(&v)).unwrap();
                let scale = q.norm() * gradient(&v).norm();
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn divergence_of_constant_field_vanishes() {
        let d = BoxDomain::unit(2, 6).unwrap();
        let q = VectorField::from_fn(&d, |a, _| if a == 0 { 3.0 } else { -1.5 });
        assert!(divergence(&q).values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn neg_laplacian_matches_div_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = BoxDomain::new(vec![1.0, 2.0, 1.0], vec![5, 4, 6]).unwrap();
        let u = random_fn(&d, &mut rng);
        let a = neg_laplacian(&u);
        let b = divergence(&gradient(&u)).scaled(-1.0);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn inner_of_sine_squared_is_quarter() {
        let d = BoxDomain::unit(2, 64).unwrap();
        let u = GridFunction::from_fn(&d, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let ip = inner(&u, &u).unwrap();
        // node sum of sin² is exact for the trapezoid rule here
        assert!((ip - 0.25).abs() < 1e-12);
    }

    #[test]
    fn inner_is_bilinear_symmetric_and_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = BoxDomain::unit(2, 7).unwrap();
        for _ in 0..20 {
            let (u, v, w) = (
                random_fn(&d, &mut rng),
                random_fn(&d, &mut rng),
                random_fn(&d, &mut rng),
            );
            let a: f64 = rng.gen_range(-3.0..3.0);
            let lhs = inner(&u.add_scaled(a, &v), &w).unwrap();
            let rhs = inner(&u, &w).unwrap() + a * inner(&v, &w).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
            assert_eq!(inner(&u, &v).unwrap(), inner(&v, &u).unwrap());
            assert!(inner(&u, &u).unwrap() > 0.0);
        }
        let z = GridFunction::zeros(&d);
        assert_eq!(inner(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_mismatched_domains() {
        let a = GridFunction::zeros(&BoxDomain::unit(2, 4).unwrap());
        let b = GridFunction::zeros(&BoxDomain::unit(2, 5).unwrap());
        assert!(matches!(inner(&a, &b), Err(Error::DomainMismatch)));
    }
}
