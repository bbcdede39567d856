//! The Finsler manifold of positive-definite matrices.
//!
//! Each tangent space is the space of Hermitian matrices, normed at a base
//! point `a` by `||x||_{a,p} = ||a^{-1/2} x a^{-1/2}||_p`. The curves
//!
//! ```text
//! gamma_{a,b}(t) = a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}
//! ```
//!
//! have constant speed `||ln(a^{-1/2} b a^{-1/2})||_p` and are shortest for
//! every `p`, which gives the closed-form distance
//! `d_p(a, b) = ||ln(a^{-1/2} b a^{-1/2})||_p`.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::matcore::{norm_from_spectrum, re, CMat, EigDecomp, HermMatrix, PParams, PosDefMatrix};

/// A tangent vector `dir` at the point `base`.
#[derive(Clone, Debug)]
pub struct TangentVec {
    pub base: PosDefMatrix,
    pub dir: HermMatrix,
}

impl TangentVec {
    pub fn new(base: PosDefMatrix, dir: HermMatrix) -> Result<Self> {
        if base.dim() != dir.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: dir.dim(),
            });
        }
        Ok(TangentVec { base, dir })
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `||a^{-1/2} x a^{-1/2}||_p`.
pub fn finsler_norm(v: &TangentVec, pp: PParams) -> Result<f64> {
    v.dir.sandwich(&v.base.inv_sqrt()).norm(pp)
}

/// `a^{-1/2} b a^{-1/2}`, positive definite whenever `a` and `b` are.
fn relative(a: &PosDefMatrix, b: &PosDefMatrix) -> Result<HermMatrix> {
    check_dims(a.dim(), b.dim())?;
    Ok(b.as_herm().sandwich(&a.inv_sqrt()))
}

/// Eigenvalues of `ln(a^{-1/2} b a^{-1/2})`.
fn log_spectrum(a: &PosDefMatrix, b: &PosDefMatrix) -> Result<Vec<f64>> {
    let e = relative(a, b)?.eig()?;
    e.values
        .iter()
        .map(|&l| {
            if l > 0.0 {
                Ok(l.ln())
            } else {
                Err(Error::Domain { eigenvalue: l })
            }
        })
        .collect()
}

/// Geodesic distance `||ln(a^{-1/2} b a^{-1/2})||_p`.
pub fn geodesic_distance(a: &PosDefMatrix, b: &PosDefMatrix, pp: PParams) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    if a.as_matrix() == b.as_matrix() {
        return Ok(0.0);
    }
    Ok(norm_from_spectrum(&log_spectrum(a, b)?, pp))
}

/// `Exp^a(x) = a^{1/2} exp(a^{-1/2} x a^{-1/2}) a^{1/2}`.
pub fn exp_a(base: &PosDefMatrix, x: &HermMatrix) -> Result<PosDefMatrix> {
    check_dims(base.dim(), x.dim())?;
    let inner = x.sandwich(&base.inv_sqrt());
    let e = inner.eig()?.apply(f64::exp)?;
    PosDefMatrix::new(e.sandwich(&base.sqrt()))
}

/// Inverse of [`exp_a`]: `a^{1/2} ln(a^{-1/2} b a^{-1/2}) a^{1/2}`.
pub fn log_a(base: &PosDefMatrix, b: &PosDefMatrix) -> Result<HermMatrix> {
    let l = relative(base, b)?.eig()?.apply(f64::ln)?;
    Ok(l.sandwich(&base.sqrt()))
}

/// `sinh(z)/z` by its even Taylor series, accurate for `|z| < 1e-3`.
fn sinhc_series(z: f64) -> f64 {
    let z2 = z * z;
    1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0))
}

fn sinhc(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        sinhc_series(z)
    } else {
        z.sinh() / z
    }
}

/// First divided difference of `exp` at `(a, b)`.
fn exp_divided_difference(a: f64, b: f64) -> f64 {
    if (a - b).abs() < 1e-7 * (1.0 + a.abs() + b.abs()) {
        ((a + b) / 2.0).exp() * sinhc_series((a - b) / 2.0)
    } else {
        (a.exp() - b.exp()) / (a - b)
    }
}

/// Apply the entrywise kernel `k(lambda_i, lambda_j)` to `y` in the eigenbasis
/// of `eig`.
fn schur_kernel(eig: &EigDecomp, y: &HermMatrix, k: impl Fn(f64, f64) -> f64) -> Result<HermMatrix> {
    check_dims(eig.dim(), y.dim())?;
    let mut z = eig.to_eigenbasis(y.as_matrix());
    let l = &eig.values;
    for i in 0..l.len() {
        for j in 0..l.len() {
            z[(i, j)] *= re(k(l[i], l[j]));
        }
    }
    HermMatrix::new(eig.from_eigenbasis(&z))
}

/// Differential of the exponential map at `x` applied to `y`,
/// `int_0^1 e^{(1-t)x} y e^{tx} dt`, computed with divided differences in the
/// eigenbasis of `x`.
pub fn dexp(x: &HermMatrix, y: &HermMatrix) -> Result<HermMatrix> {
    schur_kernel(&x.eig()?, y, exp_divided_difference)
}

/// `F(ad x/2)(y)` with `F(z) = sinh(z)/z`. Equals `e^{-x/2} dexp(x, y) e^{-x/2}`.
pub fn sinhc_ad_half(x: &HermMatrix, y: &HermMatrix) -> Result<HermMatrix> {
    schur_kernel(&x.eig()?, y, |a, b| sinhc((a - b) / 2.0))
}

/// Geodesic symmetry `sigma_a(b) = a b^{-1} a`.
pub fn geodesic_symmetry(a: &PosDefMatrix, b: &PosDefMatrix) -> Result<PosDefMatrix> {
    check_dims(a.dim(), b.dim())?;
    PosDefMatrix::new(b.inv().sandwich(a.as_herm()))
}

/// Minimum ratio `sigma_min / sigma_max` accepted by [`congruence`].
pub const CONGRUENCE_CONDITION: f64 = 1e-12;

/// `I_g(a) = g* a g` for invertible `g`.
pub fn congruence(g: &CMat, a: &PosDefMatrix) -> Result<PosDefMatrix> {
    if g.nrows() != g.ncols() {
        return Err(Error::NotSquare {
            rows: g.nrows(),
            cols: g.ncols(),
        });
    }
    check_dims(a.dim(), g.nrows())?;
    let sv = SVD::new(g.clone(), false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio > CONGRUENCE_CONDITION) {
        return Err(Error::SingularCongruence { ratio });
    }
    PosDefMatrix::new(a.as_herm().congruence(g))
}

/// The geodesic `gamma_{a,b}` with its endpoint data precomputed.
#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    a: PosDefMatrix,
    b: PosDefMatrix,
    a_half: HermMatrix,
    a_neg_half: HermMatrix,
    w: HermMatrix,
    w_eig: EigDecomp,
}

impl GeodesicSegment {
    pub fn new(a: &PosDefMatrix, b: &PosDefMatrix) -> Result<Self> {
        check_dims(a.dim(), b.dim())?;
        let a_half = a.sqrt();
        let a_neg_half = a.inv_sqrt();
        let rel = b.as_herm().sandwich(&a_neg_half).eig()?;
        let w_eig = EigDecomp {
            values: rel
                .values
                .iter()
                .map(|&l| if l > 0.0 { Ok(l.ln()) } else { Err(Error::Domain { eigenvalue: l }) })
                .collect::<Result<_>>()?,
            vectors: rel.vectors,
        };
        let w = w_eig.reconstruct();
        Ok(GeodesicSegment {
            a: a.clone(),
            b: b.clone(),
            a_half,
            a_neg_half,
            w,
            w_eig,
        })
    }

    pub fn start(&self) -> &PosDefMatrix {
        &self.a
    }

    pub fn end(&self) -> &PosDefMatrix {
        &self.b
    }

    /// `ln(a^{-1/2} b a^{-1/2})`.
    pub fn log_ratio(&self) -> &HermMatrix {
        &self.w
    }

    pub fn a_half(&self) -> &HermMatrix {
        &self.a_half
    }

    pub fn a_neg_half(&self) -> &HermMatrix {
        &self.a_neg_half
    }

    /// `(a^{-1/2} b a^{-1/2})^t = exp(t w)`.
    fn ratio_power(&self, t: f64) -> HermMatrix {
        let v: Vec<f64> = self.w_eig.values.iter().map(|l| (t * l).exp()).collect();
        self.w_eig.with_values(&v)
    }

    /// `gamma_{a,b}(t)`; any real `t` is allowed.
    pub fn point(&self, t: f64) -> Result<PosDefMatrix> {
        if t == 0.0 {
            return Ok(self.a.clone());
        }
        if t == 1.0 {
            return Ok(self.b.clone());
        }
        PosDefMatrix::new(self.ratio_power(t).sandwich(&self.a_half))
    }

    /// `d/dt gamma(t) = a^{1/2} w exp(t w) a^{1/2}`.
    pub fn velocity(&self, t: f64) -> HermMatrix {
        let v: Vec<f64> = self.w_eig.values.iter().map(|l| l * (t * l).exp()).collect();
        self.w_eig.with_values(&v).sandwich(&self.a_half)
    }

    /// Initial velocity `log_a(a, b)`.
    pub fn initial_velocity(&self) -> HermMatrix {
        self.w.sandwich(&self.a_half)
    }

    /// The exact length `||w||_p`, which is also `d_p(a, b)`.
    pub fn length(&self, pp: PParams) -> f64 {
        norm_from_spectrum(&self.w_eig.values, pp)
    }

    /// Finsler speed at `gamma(t)`, computed from the point and velocity.
    pub fn speed(&self, t: f64, pp: PParams) -> Result<f64> {
        finsler_norm(&TangentVec::new(self.point(t)?, self.velocity(t))?, pp)
    }
}

/// `gamma_{a,b}(t)`.
pub fn geodesic_point(seg: &GeodesicSegment, t: f64) -> Result<PosDefMatrix> {
    seg.point(t)
}

/// A C^1 curve in the cone, parametrized over `[0, 1]`.
pub trait SmoothCurve {
    fn point(&self, t: f64) -> Result<PosDefMatrix>;
    fn velocity(&self, t: f64) -> Result<HermMatrix>;

    /// Closed-form length, when known.
    fn exact_length(&self, _pp: PParams) -> Option<f64> {
        None
    }
}

impl SmoothCurve for GeodesicSegment {
    fn point(&self, t: f64) -> Result<PosDefMatrix> {
        GeodesicSegment::point(self, t)
    }

    fn velocity(&self, t: f64) -> Result<HermMatrix> {
        Ok(GeodesicSegment::velocity(self, t))
    }

    fn exact_length(&self, pp: PParams) -> Option<f64> {
        Some(self.length(pp))
    }
}

/// The straight segment `(1 - t) a + t b`, which stays in the cone.
#[derive(Clone, Debug)]
pub struct LinearSegment {
    pub a: PosDefMatrix,
    pub b: PosDefMatrix,
}

impl SmoothCurve for LinearSegment {
    fn point(&self, t: f64) -> Result<PosDefMatrix> {
        PosDefMatrix::new(&self.a.as_herm().scale(1.0 - t) + &self.b.as_herm().scale(t))
    }

    fn velocity(&self, _t: f64) -> Result<HermMatrix> {
        Ok(self.b.as_herm() - self.a.as_herm())
    }
}

/// Curve given by a pair of closures for position and velocity.
pub struct FnCurve<P, V> {
    pub point: P,
    pub velocity: V,
}

impl<P, V> SmoothCurve for FnCurve<P, V>
where
    P: Fn(f64) -> Result<PosDefMatrix>,
    V: Fn(f64) -> Result<HermMatrix>,
{
    fn point(&self, t: f64) -> Result<PosDefMatrix> {
        (self.point)(t)
    }

    fn velocity(&self, t: f64) -> Result<HermMatrix> {
        (self.velocity)(t)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if order == 1 { x } else { p1 };
            let pm = if order == 1 { 1.0 } else { p0 };
            dp = n * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule with `panels` equal panels on `[lo, hi]`.
pub fn composite_gl<F>(f: F, lo: f64, hi: f64, panels: usize, order: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (nodes, weights) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            total += w * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(total * 0.5 * h)
}

const GL_ORDER: usize = 16;
const GL_PANELS: usize = 8;
const GL_MAX_PANELS: usize = 1024;
const GL_REL_TOL: f64 = 1e-9;

/// Length `int_0^1 ||gamma^{-1/2} gamma' gamma^{-1/2}||_p dt` by composite
/// 16-node Gauss–Legendre quadrature, doubling the panel count until the
/// relative change falls below `1e-9`.
pub fn quadrature_length<C: SmoothCurve + ?Sized>(curve: &C, pp: PParams) -> Result<f64> {
    let speed = |t: f64| finsler_norm(&TangentVec::new(curve.point(t)?, curve.velocity(t)?)?, pp);
    let mut panels = GL_PANELS;
    let mut prev = composite_gl(speed, 0.0, 1.0, panels, GL_ORDER)?;
    while panels < GL_MAX_PANELS {
        panels *= 2;
        let next = composite_gl(speed, 0.0, 1.0, panels, GL_ORDER)?;
        if (next - prev).abs() <= GL_REL_TOL * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Curve length, using the closed form when the curve provides one.
pub fn curve_length<C: SmoothCurve + ?Sized>(curve: &C, pp: PParams) -> Result<f64> {
    match curve.exact_length(pp) {
        Some(l) => Ok(l),
        None => quadrature_length(curve, pp),
    }
}

/// One sample `(t, gamma(t))` of a tabulated curve.
#[derive(Clone, Debug)]
pub struct CurveSample {
    pub t: f64,
    pub point: PosDefMatrix,
}

/// Length of a tabulated curve.
///
/// Velocities come from second-order finite differences on the (possibly
/// nonuniform) grid, one-sided at the ends; the speed is integrated with the
/// trapezoidal rule. Consecutive samples at the same point are dropped.
pub fn sampled_curve_length(samples: &[CurveSample], pp: PParams) -> Result<f64> {
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotoneParameter { index: i + 1 });
        }
        check_dims(w[0].point.dim(), w[1].point.dim())?;
    }
    let mut pts: Vec<&CurveSample> = Vec::with_capacity(samples.len());
    for s in samples {
        if let Some(last) = pts.last() {
            let scale = last.point.as_herm().max_abs().max(1.0);
            if s.point.max_abs_diff(&last.point) <= 1e-14 * scale {
                continue;
            }
        }
        pts.push(s);
    }
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let m = pts.len();
    let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let f = |i: usize| pts[i].point.as_herm();
    let mut speeds = Vec::with_capacity(m);
    for i in 0..m {
        let d = if m == 2 {
            (f(1) - f(0)).scale(1.0 / (t[1] - t[0]))
        } else if i == 0 {
            let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
            let c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
            let c1 = (h1 + h2) / (h1 * h2);
            let c2 = -h1 / (h2 * (h1 + h2));
            &(&f(0).scale(c0) + &f(1).scale(c1)) + &f(2).scale(c2)
        } else if i == m - 1 {
            let (h1, h2) = (t[m - 2] - t[m - 3], t[m - 1] - t[m - 2]);
            let c0 = h2 / (h1 * (h1 + h2));
            let c1 = -(h1 + h2) / (h1 * h2);
            let c2 = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
            &(&f(m - 3).scale(c0) + &f(m - 2).scale(c1)) + &f(m - 1).scale(c2)
        } else {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            let c0 = -h2 / (h1 * (h1 + h2));
            let c1 = (h2 - h1) / (h1 * h2);
            let c2 = h1 / (h2 * (h1 + h2));
            &(&f(i - 1).scale(c0) + &f(i).scale(c1)) + &f(i + 1).scale(c2)
        };
        speeds.push(finsler_norm(&TangentVec::new(pts[i].point.clone(), d)?, pp)?);
    }
    Ok((1..m).map(|i| 0.5 * (speeds[i] + speeds[i - 1]) * (t[i] - t[i - 1])).sum())
}
