#![allow(dead_code)]

use islab::scenario::InitialSpec;
use islab::{SwarmState, Vec3};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded admissible state: unit velocities in a cone about z, tangent spins, positions in a box.
pub fn cone_state(n: usize, seed: u64, angle: f64, spin: f64) -> SwarmState {
    InitialSpec::Generated { n, cone_half_angle: angle, spin_scale: spin, box_size: 1.0, seed }
        .swarm_state()
        .unwrap()
}

/// Unit velocities uniform on the sphere, tangent spins.
pub fn sphere_state(n: usize, seed: u64, spin: f64) -> SwarmState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut v = Vec::new();
    let mut s = Vec::new();
    for _ in 0..n {
        let g = Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)).normalize();
        let raw = Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * spin;
        x.push(Vec3::new(rng.random(), rng.random(), rng.random()));
        s.push(raw - g * raw.dot(&g));
        v.push(g);
    }
    SwarmState::new(0.0, x, v, s).unwrap()
}

fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let w: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * w).cos()
}

/// Orthogonal matrix from Gram-Schmidt on a seeded random matrix; `flip` forces det = −1.
pub fn random_orthogonal(seed: u64, flip: bool) -> Matrix3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec3> = (0..3)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let e0 = cols[0].normalize();
    let e1 = (cols[1] - e0 * e0.dot(&cols[1])).normalize();
    let mut e2 = cols[2] - e0 * e0.dot(&cols[2]) - e1 * e1.dot(&cols[2]);
    e2 = e2.normalize();
    let mut o = Matrix3::from_columns(&[e0, e1, e2]);
    if (o.determinant() < 0.0) != flip {
        o.set_column(2, &-e2);
    }
    o
}
