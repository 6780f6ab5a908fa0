//! Synthetic corresponded cohort for tests and demos.
//!
//! Every shape is a UV sphere mapped onto a lopsided ellipsoid carrying two
//! landmark structures: a raised ridge along one parallel (class 1) and a
//! groove along part of one meridian (class 2). Shapes differ by a smooth
//! random radial deformation, a per-axis size change and a random rigid
//! pose. Labels are defined on the shared parameterization, so they hold for
//! every member of the cohort.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::datagen::random_rotation;
use crate::error::{Error, Result};
use crate::mesh::{ClassTable, Face, LabelMap, Point, TriangleMesh};

/// Base radius in millimetres.
pub const BASE_RADIUS: f64 = 100.0;
const AXES: [f64; 3] = [1.0, 0.75, 0.5];
// Egg-shaped bulges towards +x and +z break the ellipsoid's mirror
// symmetries.
const EGG: [f64; 2] = [0.2, 0.15];

const RIDGE_THETA: f64 = 0.56 * PI;
const RIDGE_HALF_WIDTH: f64 = 0.08 * PI;
const RIDGE_HEIGHT: f64 = 0.10;

const GROOVE_PHI: f64 = 0.0;
const GROOVE_HALF_WIDTH: f64 = 0.15 * PI;
const GROOVE_THETA: (f64, f64) = (0.10 * PI, 0.44 * PI);
const GROOVE_DEPTH: f64 = 0.12;

// Share of the bump support that is labeled.
const LABEL_CORE: f64 = 0.75;

pub struct Fixture {
    pub meshes: Vec<TriangleMesh>,
    /// Ground-truth labels on the shared vertex indexing.
    pub labels: LabelMap,
    pub rings: usize,
    pub segments: usize,
}

/// Number of interior latitude rings giving at least `n_vertices` vertices.
pub fn ring_count(n_vertices: usize) -> usize {
    let mut rings = 2;
    while 2 + 2 * rings * rings < n_vertices {
        rings += 1;
    }
    rings
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * t).cos())
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Smooth 0..1 ramp over the groove's theta extent.
fn groove_taper(theta: f64) -> f64 {
    let (a, b) = GROOVE_THETA;
    let ramp = 0.05 * PI;
    let up = ((theta - (a - ramp)) / ramp).clamp(0.0, 1.0);
    let down = (((b + ramp) - theta) / ramp).clamp(0.0, 1.0);
    let s = |x: f64| x * x * (3.0 - 2.0 * x);
    s(up) * s(down)
}

fn label_of(theta: f64, phi: f64) -> u32 {
    if ((theta - RIDGE_THETA) / RIDGE_HALF_WIDTH).abs() < LABEL_CORE {
        1
    } else if (wrap_angle(phi - GROOVE_PHI) / GROOVE_HALF_WIDTH).abs() < LABEL_CORE
        && theta >= GROOVE_THETA.0
        && theta <= GROOVE_THETA.1
    {
        2
    } else {
        0
    }
}

/// Grid parameters (theta, phi) of every vertex, poles first and last.
fn grid(rings: usize, segments: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2 + rings * segments);
    out.push((0.0, 0.0));
    for i in 0..rings {
        let theta = PI * (i + 1) as f64 / (rings + 1) as f64;
        for j in 0..segments {
            out.push((theta, 2.0 * PI * j as f64 / segments as f64));
        }
    }
    out.push((PI, 0.0));
    out
}

fn faces(rings: usize, segments: usize) -> Vec<Face> {
    let at = |i: usize, j: usize| 1 + i * segments + (j % segments);
    let south = 1 + rings * segments;
    let mut f = Vec::with_capacity(2 * rings * segments);
    for j in 0..segments {
        f.push([0, at(0, j), at(0, j + 1)]);
    }
    for i in 0..rings - 1 {
        for j in 0..segments {
            f.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
            f.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    for j in 0..segments {
        f.push([south, at(rings - 1, j + 1), at(rings - 1, j)]);
    }
    f
}

/// Low-order smooth functions on the sphere used for per-shape deformation.
fn deformation_basis(theta: f64, phi: f64) -> [f64; 8] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [
        ct,
        st * cp,
        st * sp,
        0.5 * (3.0 * ct * ct - 1.0),
        st * st * (2.0 * phi).cos(),
        st * st * (2.0 * phi).sin(),
        st * ct * cp,
        st * ct * sp,
    ]
}

/// `n_shapes` corresponded meshes of at least `n_vertices` vertices each.
pub fn generate(n_shapes: usize, n_vertices: usize, seed: u64) -> Result<Fixture> {
    if n_shapes < 2 {
        return Err(Error::InvalidArgument(format!(
            "fixture needs at least 2 shapes, got {n_shapes}"
        )));
    }
    if n_vertices < 100 {
        return Err(Error::InvalidArgument(format!(
            "fixture needs at least 100 vertices, got {n_vertices}"
        )));
    }
    let rings = ring_count(n_vertices);
    let segments = 2 * rings;
    let params = grid(rings, segments);
    let topology = faces(rings, segments);

    let labels: Vec<u32> = params.iter().map(|&(t, p)| {
        if t == 0.0 || t == PI { 0 } else { label_of(t, p) }
    }).collect();
    let labels = LabelMap::new(labels, ClassTable::landmarks())?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let coeff = Normal::new(0.0, 0.03).expect("valid normal");
    let size = Normal::new(0.0, 0.06).expect("valid normal");
    let mut meshes = Vec::with_capacity(n_shapes);
    for _ in 0..n_shapes {
        let c: [f64; 8] = std::array::from_fn(|_| coeff.sample(&mut rng));
        let axes: [f64; 3] = std::array::from_fn(|a| AXES[a] * (1.0 + size.sample(&mut rng)));
        let ridge_gain = 1.0 + 0.15 * rng.random_range(-1.0..1.0);
        let groove_gain = 1.0 + 0.15 * rng.random_range(-1.0..1.0);
        let rotation = random_rotation(&mut rng);
        let shift = Vector3::from_fn(|_, _| rng.random_range(-50.0..50.0));

        let vertices = params
            .iter()
            .map(|&(theta, phi)| {
                let basis = deformation_basis(theta, phi);
                let field: f64 = basis.iter().zip(&c).map(|(b, c)| b * c).sum();
                let ridge = RIDGE_HEIGHT * ridge_gain * bump((theta - RIDGE_THETA) / RIDGE_HALF_WIDTH);
                let groove = GROOVE_DEPTH
                    * groove_gain
                    * bump(wrap_angle(phi - GROOVE_PHI) / GROOVE_HALF_WIDTH)
                    * groove_taper(theta);
                let egg = EGG[0] * theta.sin() * phi.cos() + EGG[1] * theta.cos();
                let radial = 1.0 + egg + field + ridge - groove;
                let (st, ct) = theta.sin_cos();
                let (sp, cp) = phi.sin_cos();
                let local = Vector3::new(axes[0] * st * cp, axes[1] * st * sp, axes[2] * ct)
                    * (BASE_RADIUS * radial);
                Point::from(rotation * local + shift)
            })
            .collect();
        meshes.push(TriangleMesh::new(vertices, topology.clone())?);
    }
    Ok(Fixture {
        meshes,
        labels,
        rings,
        segments,
    })
}
