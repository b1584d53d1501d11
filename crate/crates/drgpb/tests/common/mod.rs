#![allow(dead_code)]

use drgpb_core::{Matrix, MjlsModel, ModeMatrices, Vector};
use rand::Rng;

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random symmetric positive definite matrix with eigenvalues bounded below.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + Matrix::identity(n, n) * 0.2
}

pub fn random_stochastic<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut m = Matrix::from_fn(n, n, |_, _| rng.gen_range(0.05..1.0));
    for i in 0..n {
        let s: f64 = m.row(i).sum();
        m.row_mut(i).scale_mut(1.0 / s);
    }
    m
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vector {
    let v = Vector::from_fn(n, |_, _| rng.gen_range(0.05..1.0));
    let s = v.sum();
    v / s
}

/// Random MJLS with stable per-mode dynamics (spectral norm of each A below 0.95).
pub fn random_model<R: Rng>(rng: &mut R, n_x: usize, n_y: usize, n_theta: usize) -> MjlsModel {
    let modes = (0..n_theta)
        .map(|_| {
            let a = random_matrix(rng, n_x, n_x);
            let norm = a.norm().max(1e-3);
            ModeMatrices {
                a: a * (rng.gen_range(0.3..0.95) / norm),
                b: random_matrix(rng, n_x, n_x),
                c: random_matrix(rng, n_y, n_x),
                d: Matrix::identity(n_y, n_y) + random_matrix(rng, n_y, n_y) * 0.2,
            }
        })
        .collect();
    MjlsModel {
        n_x,
        n_y,
        n_w: n_x,
        n_v: n_y,
        modes,
        w: random_spd(rng, n_x),
        v: random_spd(rng, n_y),
        pi: random_stochastic(rng, n_theta),
        p0_mode: random_simplex(rng, n_theta),
        x0_mean: Vector::from_fn(n_x, |_, _| rng.gen_range(-1.0..1.0)),
        x0_cov: random_spd(rng, n_x),
    }
}

/// Textbook Kalman filter with an explicit inverse, for comparison.
pub fn textbook_kalman(model: &MjlsModel, ys: &[Vector]) -> Vec<(Vector, Matrix)> {
    let m = &model.modes[0];
    let mut x = model.x0_mean.clone();
    let mut p = model.x0_cov.clone();
    let mut out = Vec::new();
    for y in ys {
        let xp = &m.a * &x;
        let pp = &m.a * &p * m.a.transpose() + &m.b * &model.w * m.b.transpose();
        let s = &m.c * &pp * m.c.transpose() + &m.d * &model.v * m.d.transpose();
        let k = &pp * m.c.transpose() * s.clone().try_inverse().unwrap();
        x = &xp + &k * (y - &m.c * &xp);
        p = &pp - &k * &s * k.transpose();
        p = (&p + p.transpose()) * 0.5;
        out.push((x.clone(), p.clone()));
    }
    out
}
