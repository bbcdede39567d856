//! Birkhoff orthogonality, nearest points in the flat p-norm, and the
//! nearest-point projection onto a convex exponential set `K = exp(H)`.
//!
//! Everything here needs `1 < p < inf`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::convexity::{k_membership, ExponentialSet, HermSubspace};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, GeodesicSegment};
use crate::matcore::{norm_from_spectrum, EigDecomp, HermMatrix, PParams, PosDefMatrix};
use crate::sampling;

/// Singular values below this are raised to it inside the pairing weight
/// `|lambda|^{p-1}`.
pub const PAIRING_FLOOR: f64 = 1e-13;

fn exponent(pp: PParams) -> Result<f64> {
    pp.require_uniformly_convex()?;
    Ok(pp.p())
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `sign(l) |l|^{p-1}` with the floor applied to nonzero `|l|`.
fn weight(l: f64, p: f64) -> f64 {
    if l == 0.0 {
        0.0
    } else {
        l.signum() * l.abs().max(PAIRING_FLOOR).powf(p - 1.0)
    }
}

/// Derivative of [`weight`].
fn weight_slope(l: f64, p: f64) -> f64 {
    (p - 1.0) * l.abs().max(PAIRING_FLOOR).powf(p - 2.0)
}

/// `u |v|^{p-1}` from a decomposition of `v`.
fn weight_matrix(e: &EigDecomp, p: f64) -> HermMatrix {
    let w: Vec<f64> = e.values.iter().map(|&l| weight(l, p)).collect();
    e.with_values(&w)
}

/// `tau(|v|^{p-1} u w)` where `v = u |v|` is the Hermitian polar decomposition.
pub fn duality_pair(v: &HermMatrix, w: &HermMatrix, pp: PParams) -> Result<f64> {
    let p = exponent(pp)?;
    same_dim(v.dim(), w.dim())?;
    Ok(weight_matrix(&v.eig()?, p).inner(w))
}

/// Flat nearest point in `H` together with its optimality certificate.
#[derive(Clone, Debug)]
pub struct LinearProjection {
    pub point: HermMatrix,
    /// `max_i |duality_pair(x - h, b_i)| / ||x - h||_p^{p-1}`.
    pub residual: f64,
    pub iterations: usize,
}

pub const LINEAR_TOL: f64 = 1e-10;
pub const LINEAR_MAX_ITER: usize = 200;

/// Value, gradient and certificate of `c -> tau(|x - sum c_i b_i|^p)`.
struct FlatState {
    value: f64,
    grad: Vec<f64>,
    residual: f64,
    eig: EigDecomp,
}

fn flat_state(x: &HermMatrix, h: &HermSubspace, c: &[f64], p: f64) -> Result<FlatState> {
    let v = x - &h.combine(c);
    let eig = v.eig()?;
    let n = eig.dim() as f64;
    let value = eig.values.iter().map(|l| l.abs().powf(p)).sum::<f64>() / n;
    let g = weight_matrix(&eig, p);
    let pairs: Vec<f64> = h.basis().iter().map(|b| g.inner(b)).collect();
    let scale = value.powf((p - 1.0) / p);
    let residual = if scale > 0.0 {
        pairs.iter().fold(0.0_f64, |m, d| m.max(d.abs())) / scale
    } else {
        0.0
    };
    Ok(FlatState {
        value,
        grad: pairs.iter().map(|d| -p * d).collect(),
        residual,
        eig,
    })
}

/// Hessian of the flat objective from the divided differences of the weight.
fn flat_hessian(h: &HermSubspace, e: &EigDecomp, p: f64) -> DMatrix<f64> {
    let l = &e.values;
    let m = l.len();
    let kernel = DMatrix::<f64>::from_fn(m, m, |i, j| {
        let (a, b) = (l[i], l[j]);
        if (a - b).abs() <= 1e-9 * (a.abs() + b.abs()).max(PAIRING_FLOOR) {
            weight_slope(0.5 * (a + b), p)
        } else {
            (weight(a, p) - weight(b, p)) / (a - b)
        }
    });
    let z: Vec<_> = h.basis().iter().map(|b| e.to_eigenbasis(b.as_matrix())).collect();
    let d = z.len();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut s = 0.0;
            for r in 0..m {
                for c in 0..m {
                    s += kernel[(r, c)] * (z[i][(r, c)] * z[j][(r, c)].conj()).re;
                }
            }
            let v = p * s / m as f64;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Nearest point to `x` in `H` for `||.||_p`, by damped Newton iteration on
/// `tau(|x - h|^p)` in the coordinates of `H`.
pub fn linear_project_with(
    x: &HermMatrix,
    h: &HermSubspace,
    pp: PParams,
    tol: f64,
    max_iter: usize,
) -> Result<LinearProjection> {
    let p = exponent(pp)?;
    same_dim(h.ambient_dim(), x.dim())?;
    let mut c = h.coords(x);
    let start = h.combine(&c);
    if h.dim() == 0 || (x - &start).norm2() <= 1e-12 * (1.0 + x.norm2()) || p == 2.0 {
        let residual = if p == 2.0 && h.dim() > 0 {
            flat_state(x, h, &c, p)?.residual
        } else {
            0.0
        };
        return Ok(LinearProjection { point: start, residual, iterations: 0 });
    }
    let mut state = flat_state(x, h, &c, p)?;
    for it in 0..max_iter {
        if state.residual <= tol {
            return Ok(LinearProjection { point: h.combine(&c), residual: state.residual, iterations: it });
        }
        let g = DVector::from_column_slice(&state.grad);
        let hess = flat_hessian(h, &state.eig, p);
        let mut dir = match hess.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        if dir.dot(&g) >= 0.0 {
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = c.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
            let s = flat_state(x, h, &trial, p)?;
            let armijo = s.value <= state.value + 1e-4 * alpha * slope;
            let flat = s.value <= state.value * (1.0 + 1e-14) && s.residual < state.residual;
            if armijo || flat {
                accepted = Some((trial, s));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, s)) => {
                c = trial;
                state = s;
            }
            None => {
                return Err(Error::NoConvergence { iterations: it, residual: state.residual });
            }
        }
    }
    if state.residual <= tol {
        return Ok(LinearProjection { point: h.combine(&c), residual: state.residual, iterations: max_iter });
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: state.residual })
}

/// Nearest point to `x` in `H` for `||.||_p` with the default tolerance.
pub fn linear_project(x: &HermMatrix, h: &HermSubspace, pp: PParams) -> Result<HermMatrix> {
    Ok(linear_project_with(x, h, pp, LINEAR_TOL, LINEAR_MAX_ITER)?.point)
}

pub const BIRKHOFF_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orthogonality {
    pub orthogonal: bool,
    /// `max_w |duality_pair(y, w)| / max(1, ||y||_p^{p-1})` with `y = a^{-1/2} v a^{-1/2}`.
    pub residual: f64,
}

/// Birkhoff orthogonality of the tangent vector `v` at `a` to `H`.
pub fn birkhoff_orthogonal(v: &HermMatrix, h: &HermSubspace, a: &PosDefMatrix, pp: PParams) -> Result<Orthogonality> {
    let p = exponent(pp)?;
    same_dim(a.dim(), v.dim())?;
    same_dim(h.ambient_dim(), v.dim())?;
    let y = v.sandwich(&a.inv_sqrt());
    let e = y.eig()?;
    let g = weight_matrix(&e, p);
    let worst = h.basis().iter().fold(0.0_f64, |m, b| m.max(g.inner(b).abs()));
    let scale = norm_from_spectrum(&e.values, pp).powf(p - 1.0).max(1.0);
    let residual = worst / scale;
    Ok(Orthogonality { orthogonal: residual <= BIRKHOFF_TOL, residual })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectOptions {
    /// Target for the first-order residual.
    pub tol: f64,
    /// Budget of descent cycles.
    pub max_iter: usize,
    /// Random starting point in `K` instead of `exp(proj ln b)`.
    pub seed: Option<u64>,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions { tol: 1e-7, max_iter: 500, seed: None }
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub argmin: PosDefMatrix,
    pub distance: f64,
    pub first_order_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest operator norm of a random starting point `ln a0`.
pub const START_NORM_CAP: f64 = 2.0;

/// Distance from `c` to `exp(t x)` and its derivative in `t`:
/// `f(t) = ||ln(e^{-tx/2} c e^{-tx/2})||_p`,
/// `f'(t) = -duality_pair(y_t, x) / ||y_t||_p^{p-1}`.
fn line_eval(c: &HermMatrix, x: &EigDecomp, xm: &HermMatrix, t: f64, pp: PParams) -> Result<(f64, f64)> {
    let p = pp.p();
    let ct = if t == 0.0 {
        c.clone()
    } else {
        let half: Vec<f64> = x.values.iter().map(|l| (-0.5 * t * l).exp()).collect();
        c.sandwich(&x.with_values(&half))
    };
    let e = ct.eig()?;
    let logs = log_values(&e)?;
    let dist = norm_from_spectrum(&logs, pp);
    if dist == 0.0 {
        return Ok((0.0, 0.0));
    }
    let y = EigDecomp { values: logs, vectors: e.vectors };
    let d = -weight_matrix(&y, p).inner(xm) / dist.powf(p - 1.0);
    Ok((dist, d))
}

fn log_values(e: &EigDecomp) -> Result<Vec<f64>> {
    e.values
        .iter()
        .map(|&l| if l > 0.0 { Ok(l.ln()) } else { Err(Error::Domain { eigenvalue: l }) })
        .collect()
}

/// Minimizer of the convex function `t -> f(t)` of [`line_eval`].
///
/// The minimizer lies within `|t| <= 2 f(0) / ||x||_p` because
/// `f(t) >= |t| ||x||_p - f(0)`, so the derivative changes sign on that
/// bracket; the root of `f'` is found by Illinois regula falsi.
fn line_min(c: &HermMatrix, x: &EigDecomp, xm: &HermMatrix, pp: PParams, dtol: f64) -> Result<f64> {
    let (f0, d0) = line_eval(c, x, xm, 0.0, pp)?;
    if d0.abs() <= dtol || f0 == 0.0 {
        return Ok(0.0);
    }
    let xnorm = norm_from_spectrum(&x.values, pp);
    if xnorm == 0.0 {
        return Ok(0.0);
    }
    let dir = -d0.signum();
    let g = |s: f64| -> Result<f64> { Ok(dir * line_eval(c, x, xm, dir * s, pp)?.1) };
    let (mut lo, mut glo) = (0.0, dir * d0);
    let mut hi = 2.0 * f0 / xnorm;
    let mut ghi = g(hi)?;
    if ghi <= 0.0 {
        return Ok(dir * hi);
    }
    let mut side = 0;
    let mut s = lo;
    for _ in 0..200 {
        s = (lo * ghi - hi * glo) / (ghi - glo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let gs = g(s)?;
        if gs.abs() <= dtol || hi - lo <= 1e-15 * hi {
            break;
        }
        if gs < 0.0 {
            lo = s;
            glo = gs;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            ghi = gs;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(dir * s)
}

/// Current iterate `a` with `c = a^{-1/2} b a^{-1/2}`.
struct Frame {
    a: PosDefMatrix,
    c: HermMatrix,
}

impl Frame {
    fn new(a: PosDefMatrix, b: &PosDefMatrix) -> Frame {
        let c = b.as_herm().sandwich(&a.inv_sqrt());
        Frame { a, c }
    }

    /// Move to `a^{1/2} exp(t x) a^{1/2}`.
    fn moved(&self, x: &EigDecomp, t: f64, b: &PosDefMatrix) -> Result<Frame> {
        let ex: Vec<f64> = x.values.iter().map(|l| (t * l).exp()).collect();
        let a = PosDefMatrix::new(x.with_values(&ex).sandwich(&self.a.sqrt()))?;
        Ok(Frame::new(a, b))
    }
}

/// `max_i |f_i'(0)|` over the basis directions: the first-order residual.
fn first_order_residual(c: &HermMatrix, basis: &[HermMatrix], pp: PParams) -> Result<f64> {
    let e = c.eig()?;
    let logs = log_values(&e)?;
    let dist = norm_from_spectrum(&logs, pp);
    if dist == 0.0 {
        return Ok(0.0);
    }
    let g = weight_matrix(&EigDecomp { values: logs, vectors: e.vectors }, pp.p());
    let scale = dist.powf(pp.p() - 1.0);
    Ok(basis.iter().fold(0.0_f64, |m, b| m.max((g.inner(b) / scale).abs())))
}

/// `exp(proj_H ln a)`, pulling a numerically drifted iterate back onto `K`.
fn reproject(h: &HermSubspace, a: &PosDefMatrix) -> Result<PosDefMatrix> {
    PosDefMatrix::exp_of(&h.project(&a.ln()))
}

/// Nearest point to `b` in `K` for `d_p`.
///
/// Geodesic coordinate descent: each cycle minimizes exactly along the
/// geodesics `t -> a^{1/2} exp(t b_i) a^{1/2}` for the basis `b_i` of `H`,
/// then along the net displacement of the cycle. A cycle ends with
/// `a <- exp(proj_H ln a)` and the first-order residual test.
pub fn project_to_k(b: &PosDefMatrix, k: &ExponentialSet, pp: PParams, opts: ProjectOptions) -> Result<ProjectionResult> {
    exponent(pp)?;
    let member = k_membership(k, b)?;
    if member.member {
        return Ok(ProjectionResult {
            argmin: b.clone(),
            distance: 0.0,
            first_order_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let h = k.subspace();
    let basis = h.basis();
    let eigs: Vec<EigDecomp> = basis.iter().map(|x| x.eig()).collect::<Result<_>>()?;
    let start = match opts.seed {
        None => PosDefMatrix::exp_of(&h.project(&b.ln()))?,
        Some(s) => {
            let mut rng = sampling::rng_for(s, 0);
            PosDefMatrix::exp_of(&sampling::in_subspace(&mut rng, h, START_NORM_CAP)?)?
        }
    };
    let dtol = 1e-3 * opts.tol;
    let mut frame = Frame::new(start, b);
    let mut residual = first_order_residual(&frame.c, basis, pp)?;
    let mut best = (frame.a.clone(), residual);
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let cycle_start = frame.a.clone();
        for (x, xm) in eigs.iter().zip(basis) {
            let t = line_min(&frame.c, x, xm, pp, dtol)?;
            if t != 0.0 {
                frame = frame.moved(x, t, b)?;
            }
        }
        let disp = h.project(&frame.a.as_herm().sandwich(&cycle_start.inv_sqrt()).eig()?.apply(f64::ln)?);
        let dn = disp.norm2();
        if dn > 1e-14 {
            let dm = disp.scale(1.0 / dn);
            let de = dm.eig()?;
            let t = line_min(&frame.c, &de, &dm, pp, dtol)?;
            if t != 0.0 {
                frame = frame.moved(&de, t, b)?;
            }
        }
        frame = Frame::new(reproject(h, &frame.a)?, b);
        residual = first_order_residual(&frame.c, basis, pp)?;
        if residual < best.1 {
            best = (frame.a.clone(), residual);
        }
    }
    let (argmin, first_order_residual) = best;
    let distance = geodesic_distance(b, &argmin, pp)?;
    Ok(ProjectionResult {
        argmin,
        distance,
        first_order_residual,
        iterations,
        converged: first_order_residual <= opts.tol,
    })
}

/// `w_r(t) = t^r (1 - t) + t (1 - t)^r`.
pub fn w_r(t: f64, r: f64) -> f64 {
    t.powf(r) * (1.0 - t) + t * (1.0 - t).powf(r)
}

/// Interior grid on which `h(t)` is sampled.
pub fn bp_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

/// `h(t) = [(1-t) f(0) + t f(1) - f(t)] / w_r(t)` on `grid`, with
/// `f(t) = (d_p(a, gamma_t) / d_p(gamma_0, gamma_1))^r`. `None` when the
/// geodesic is degenerate.
pub fn bp_profile(a: &PosDefMatrix, seg: &GeodesicSegment, pp: PParams, grid: &[f64]) -> Result<Option<Vec<f64>>> {
    exponent(pp)?;
    let len = seg.length(pp);
    if len < 1e-8 {
        return Ok(None);
    }
    let r = pp.r();
    let f = |t: f64| -> Result<f64> {
        let pt = if t == 1.0 { seg.end().clone() } else { seg.point(t)? };
        Ok((geodesic_distance(a, &pt, pp)? / len).powf(r))
    };
    let (f0, f1) = (f(0.0)?, f(1.0)?);
    grid.iter()
        .map(|&t| Ok(((1.0 - t) * f0 + t * f1 - f(t)?) / w_r(t, r)))
        .collect::<Result<Vec<f64>>>()
        .map(Some)
}

/// Configurations are resampled when `a` comes this close (relative to the
/// geodesic length) to a grid point of the geodesic.
pub const BP_ON_GEODESIC: f64 = 1e-3;

/// Sampling ranges for [`estimate_bp_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpSampling {
    pub n_min: usize,
    pub n_max: usize,
    pub norm_cap: f64,
}

impl Default for BpSampling {
    fn default() -> Self {
        BpSampling { n_min: 2, n_max: 6, norm_cap: 2.5 }
    }
}

/// Empirical lower bound for `inf h(t)` over random `(a, gamma)`.
pub fn estimate_bp(samples: usize, pp: PParams, seed: u64) -> Result<f64> {
    estimate_bp_with(samples, pp, seed, BpSampling::default())
}

pub fn estimate_bp_with(samples: usize, pp: PParams, seed: u64, cfg: BpSampling) -> Result<f64> {
    exponent(pp)?;
    if samples == 0 || cfg.n_min == 0 || cfg.n_min > cfg.n_max {
        return Err(Error::InvalidInput("estimate_bp needs samples > 0 and 1 <= n_min <= n_max".into()));
    }
    let grid = bp_grid();
    let mins: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let mut rng = sampling::rng_for(sampling::trial_seed(seed, i), 11);
            for _ in 0..32 {
                let (a, seg) = bp_configuration(&mut rng, cfg)?;
                if near_geodesic(&a, &seg, pp, &grid)? {
                    continue;
                }
                if let Some(h) = bp_profile(&a, &seg, pp, &grid)? {
                    return Ok(Some(h.into_iter().fold(f64::INFINITY, f64::min)));
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;
    let m = mins.into_iter().flatten().fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::InvalidInput("every sampled configuration was degenerate".into()))
    }
}

/// Random `(a, gamma_{b,c})` for the `h(t)` estimates.
pub fn bp_configuration<R: rand::Rng + ?Sized>(rng: &mut R, cfg: BpSampling) -> Result<(PosDefMatrix, GeodesicSegment)> {
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let a = sampling::posdef(rng, n, cfg.norm_cap)?;
    let g0 = sampling::posdef(rng, n, cfg.norm_cap)?;
    let g1 = sampling::posdef(rng, n, cfg.norm_cap)?;
    Ok((a, GeodesicSegment::new(&g0, &g1)?))
}

/// Whether `a` is within [`BP_ON_GEODESIC`] of the sampled geodesic.
pub fn near_geodesic(a: &PosDefMatrix, seg: &GeodesicSegment, pp: PParams, grid: &[f64]) -> Result<bool> {
    let len = seg.length(pp);
    if len == 0.0 {
        return Ok(true);
    }
    for &t in grid.iter().chain([0.0, 1.0].iter()) {
        if geodesic_distance(a, &seg.point(t)?, pp)? < BP_ON_GEODESIC * len {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pp(p: f64) -> PParams {
        PParams::new(p).unwrap()
    }

    #[test]
    fn duality_pair_examples() {
        let mut rng = sampling::rng_for(41, 0);
        for &p in &[1.5, 2.0, 3.0, 4.0] {
            let v = sampling::hermitian(&mut rng, 4, 2.0).unwrap();
            let np = v.norm(pp(p)).unwrap().powf(p);
            assert_abs_diff_eq!(duality_pair(&v, &v, pp(p)).unwrap(), np, epsilon = 1e-12 * (1.0 + np));
        }
        let v = HermMatrix::from_diagonal(&[1.0, -1.0]);
        let w = HermMatrix::identity(2);
        assert_abs_diff_eq!(duality_pair(&v, &w, pp(2.0)).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn duality_pair_rejects_endpoints() {
        let v = HermMatrix::identity(2);
        assert!(matches!(duality_pair(&v, &v, pp(1.0)), Err(Error::UnsupportedExponent { .. })));
        assert!(matches!(duality_pair(&v, &v, PParams::infinity()), Err(Error::UnsupportedExponent { .. })));
    }

    #[test]
    fn duality_pair_matches_finite_difference() {
        let mut rng = sampling::rng_for(42, 0);
        let h = 1e-6;
        for &p in &[1.5, 2.0, 3.0, 4.0] {
            for _ in 0..5 {
                let v = sampling::hermitian(&mut rng, 3, 2.0).unwrap();
                let w = sampling::hermitian(&mut rng, 3, 1.0).unwrap();
                let nv = v.norm(pp(p)).unwrap();
                let fd = ((&v - &w.scale(h)).norm(pp(p)).unwrap() - (&v + &w.scale(h)).norm(pp(p)).unwrap()) / (2.0 * h);
                let exact = duality_pair(&v, &w, pp(p)).unwrap() / nv.powf(p - 1.0);
                assert!((fd + exact).abs() <= 1e-4 * exact.abs().max(1e-3), "p={p} fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn linear_project_of_member_is_identity() {
        let h = HermSubspace::diagonals(3);
        let x = HermMatrix::from_diagonal(&[1.0, -2.0, 0.5]);
        for &p in &[1.5, 3.0] {
            assert!(linear_project(&x, &h, pp(p)).unwrap().max_abs_diff(&x) < 1e-14);
        }
    }

    #[test]
    fn linear_project_p2_is_orthogonal_projection() {
        let mut rng = sampling::rng_for(43, 0);
        let h = HermSubspace::real_symmetric(3);
        let x = sampling::hermitian(&mut rng, 3, 2.0).unwrap();
        assert!(linear_project(&x, &h, pp(2.0)).unwrap().max_abs_diff(&h.project(&x)) <= 1e-9);
    }

    #[test]
    fn linear_project_certificate_and_idempotence() {
        let mut rng = sampling::rng_for(44, 0);
        let h = HermSubspace::diagonals(3);
        for &p in &[1.5, 3.0, 4.0] {
            let x = sampling::hermitian(&mut rng, 3, 2.0).unwrap();
            let r = linear_project_with(&x, &h, pp(p), LINEAR_TOL, LINEAR_MAX_ITER).unwrap();
            assert!(r.residual <= LINEAR_TOL);
            let v = &x - &r.point;
            let again = linear_project(&v, &h, pp(p)).unwrap();
            assert!(again.max_abs() <= 1e-8, "p={p}: {}", again.max_abs());
            let o = birkhoff_orthogonal(&v, &h, &PosDefMatrix::identity(3), pp(p)).unwrap();
            assert!(o.orthogonal);
        }
    }

    #[test]
    fn linear_project_p4_matches_coordinate_scans() {
        // x with an off-diagonal part; minimize over each diagonal coordinate
        // by dense 1-D scans cycled to a fixed point
        let x = HermMatrix::from_real_rows(&[vec![1.0, 0.8, 0.0], vec![0.8, -0.5, 0.3], vec![0.0, 0.3, 0.2]]).unwrap();
        let h = HermSubspace::diagonals(3);
        let p4 = pp(4.0);
        let got = linear_project(&x, &h, p4).unwrap();
        let mut d = [0.0; 3];
        let obj = |d: &[f64; 3]| (&x - &HermMatrix::from_diagonal(d)).norm(p4).unwrap();
        for _ in 0..60 {
            for i in 0..3 {
                let (mut lo, mut hi) = (-3.0, 3.0);
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    let (mut a, mut b) = (d, d);
                    a[i] = m1;
                    b[i] = m2;
                    if obj(&a) < obj(&b) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                d[i] = 0.5 * (lo + hi);
            }
        }
        assert!(got.max_abs_diff(&HermMatrix::from_diagonal(&d)) <= 1e-6);
    }

    #[test]
    fn birkhoff_examples() {
        let h = HermSubspace::diagonals(2);
        let id = PosDefMatrix::identity(2);
        assert!(birkhoff_orthogonal(&HermMatrix::zeros(2), &h, &id, pp(3.0)).unwrap().orthogonal);
        let off = HermMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(birkhoff_orthogonal(&off, &h, &id, pp(2.0)).unwrap().orthogonal);
        let v = HermMatrix::from_diagonal(&[1.0, 2.0]);
        assert!(!birkhoff_orthogonal(&v, &h, &id, pp(3.0)).unwrap().orthogonal);
    }

    #[test]
    fn project_member_short_circuits() {
        let k = ExponentialSet::verified(HermSubspace::diagonals(2)).unwrap();
        let b = PosDefMatrix::new(HermMatrix::from_diagonal(&[2.0, 0.5])).unwrap();
        let r = project_to_k(&b, &k, pp(3.0), ProjectOptions::default()).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.converged && r.iterations == 0);
        assert!(r.argmin.max_abs_diff(&b) == 0.0);
    }

    #[test]
    fn project_rejects_bad_inputs() {
        let b = PosDefMatrix::identity(2);
        let k = ExponentialSet::verified(HermSubspace::diagonals(2)).unwrap();
        assert!(project_to_k(&b, &k, pp(1.0), ProjectOptions::default()).is_err());
        let mut e11 = vec![vec![0.0; 3]; 3];
        e11[0][0] = 1.0;
        let mut e12 = vec![vec![0.0; 3]; 3];
        e12[0][1] = 1.0;
        e12[1][0] = 1.0;
        let h = HermSubspace::from_spanning(
            3,
            &[HermMatrix::from_real_rows(&e11).unwrap(), HermMatrix::from_real_rows(&e12).unwrap()],
        )
        .unwrap();
        let bad = ExponentialSet::new(h);
        assert!(matches!(
            project_to_k(&PosDefMatrix::identity(3), &bad, pp(2.0), ProjectOptions::default()),
            Err(Error::NotLieTripleSystem)
        ));
    }

    #[test]
    fn project_converges_with_certificate() {
        let mut rng = sampling::rng_for(45, 0);
        let k = ExponentialSet::verified(HermSubspace::diagonals(3)).unwrap();
        for &p in &[1.5, 2.0, 3.0] {
            let b = sampling::posdef(&mut rng, 3, 2.0).unwrap();
            let r = project_to_k(&b, &k, pp(p), ProjectOptions::default()).unwrap();
            assert!(r.converged, "p={p} residual={}", r.first_order_residual);
            assert!(r.first_order_residual <= 1e-7);
            assert_abs_diff_eq!(r.distance, geodesic_distance(&b, &r.argmin, pp(p)).unwrap(), epsilon = 1e-10);
            assert!(k_membership(&k, &r.argmin).unwrap().member);
        }
    }

    #[test]
    fn line_min_matches_scan() {
        let mut rng = sampling::rng_for(46, 0);
        let c = sampling::posdef(&mut rng, 3, 1.5).unwrap().as_herm().clone();
        let x = HermMatrix::from_diagonal(&[1.0, 0.0, -1.0]);
        let xe = x.eig().unwrap();
        let p3 = pp(3.0);
        let t = line_min(&c, &xe, &x, p3, 1e-12).unwrap();
        let f = |s: f64| line_eval(&c, &xe, &x, s, p3).unwrap().0;
        for &ds in &[1e-3, -1e-3, 0.1, -0.1] {
            assert!(f(t) <= f(t + ds) + 1e-14);
        }
    }

    #[test]
    fn line_derivative_matches_finite_difference() {
        let mut rng = sampling::rng_for(47, 0);
        let c = sampling::posdef(&mut rng, 3, 1.5).unwrap().as_herm().clone();
        let x = sampling::hermitian(&mut rng, 3, 1.0).unwrap();
        let xe = x.eig().unwrap();
        for &p in &[1.5, 2.0, 4.0] {
            for &t in &[0.0, 0.3, -0.7] {
                let (_, d) = line_eval(&c, &xe, &x, t, pp(p)).unwrap();
                let h = 1e-6;
                let fd = (line_eval(&c, &xe, &x, t + h, pp(p)).unwrap().0 - line_eval(&c, &xe, &x, t - h, pp(p)).unwrap().0)
                    / (2.0 * h);
                assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()), "p={p} t={t}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn w_r_vanishes_at_ends() {
        assert_eq!(w_r(0.0, 3.0), 0.0);
        assert_eq!(w_r(1.0, 3.0), 0.0);
        assert_abs_diff_eq!(w_r(0.5, 2.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn estimate_bp_is_positive() {
        for &p in &[1.5, 3.0] {
            let b = estimate_bp(40, pp(p), 9).unwrap();
            assert!(b > 0.0, "p={p}: {b}");
            assert_eq!(b, estimate_bp(40, pp(p), 9).unwrap());
        }
    }
}
