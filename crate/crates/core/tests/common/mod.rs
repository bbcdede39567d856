//! Shared oracles for integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use pdcone::matcore::{norm_from_spectrum, CMat};
use pdcone::{HermMatrix, PParams, PosDefMatrix};
use rayon::prelude::*;

pub fn pp(p: f64) -> PParams {
    PParams::new(p).unwrap()
}

pub fn diag_posdef(d: &[f64]) -> PosDefMatrix {
    PosDefMatrix::new(HermMatrix::from_diagonal(d)).unwrap()
}

pub fn sigma_x() -> HermMatrix {
    HermMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

pub fn sigma_y() -> HermMatrix {
    let m = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => Complex64::new(0.0, -1.0),
        (1, 0) => Complex64::new(0.0, 1.0),
        _ => Complex64::new(0.0, 0.0),
    });
    HermMatrix::new(m).unwrap()
}

pub fn sigma_z() -> HermMatrix {
    HermMatrix::from_diagonal(&[1.0, -1.0])
}

/// `h -> d_p(b, exp(diag(h)))`, from the spectrum of `e^{-h/2} b e^{-h/2}`.
pub fn diagonal_objective(b: &PosDefMatrix, h: &[f64], pp: PParams) -> f64 {
    let m = b.as_matrix();
    let c = CMat::from_fn(h.len(), h.len(), |i, j| m[(i, j)] * (-(h[i] + h[j]) / 2.0).exp());
    let eig = HermMatrix::new(c).unwrap().eig().unwrap();
    let logs: Vec<f64> = eig.values.iter().map(|l| l.ln()).collect();
    norm_from_spectrum(&logs, pp)
}

/// Minimum of `h -> d_p(b, exp(diag(h)))` over `[-3, 3]^n` by nested grid
/// refinement: step 0.1 over the box, then 0.01 and 0.001 around the best
/// point of the previous level.
pub fn nested_grid_min(b: &PosDefMatrix, pp: PParams) -> (f64, Vec<f64>) {
    let n = b.dim();
    let mut center = vec![0.0; n];
    let mut half: f64 = 3.0;
    let mut best = (f64::INFINITY, center.clone());
    for step in [0.1, 0.01, 0.001] {
        let k = (half / step).round() as i64;
        let side = (2 * k + 1) as usize;
        let total = side.pow(n as u32);
        let level = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut rem = idx;
                let h: Vec<f64> = (0..n)
                    .map(|i| {
                        let c = (rem % side) as i64 - k;
                        rem /= side;
                        center[i] + c as f64 * step
                    })
                    .collect();
                (diagonal_objective(b, &h, pp), idx, h)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .expect("non-empty grid");
        if level.0 < best.0 {
            best = (level.0, level.2);
        }
        center = best.1.clone();
        half = step;
    }
    best
}
