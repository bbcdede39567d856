//! Dense Hermitian linear algebra over the complex numbers.
//!
//! The algebra is `M_n(C)` equipped with the normalized trace `tau = tr / n`,
//! so `tau(I) = 1`. Every p-norm in this crate is taken with respect to the
//! normalized trace:
//!
//! ```text
//! ||x||_p = ((1/n) * sum_i s_i^p)^(1/p)        ||x||_inf = max_i s_i
//! ```
//!
//! where `s_i` are the singular values of `x`. These values differ from the
//! conventional Schatten norms by the factor `n^(-1/p)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

const EIG_MAX_SWEEPS_PER_DIM: usize = 1000;

/// Relative positive-definiteness threshold on the smallest eigenvalue.
pub const POSDEF_THRESHOLD: f64 = 1e-12;

pub(crate) fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Normalized trace `tr(x) / n`.
pub fn ntrace(x: &CMat) -> Complex64 {
    x.trace() / re(x.nrows() as f64)
}

/// `((1/n) sum s^p)^(1/p)` over nonnegative values, scaled by the maximum to
/// avoid overflow for large `p`.
fn power_mean(values: &[f64], p: f64) -> f64 {
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 || values.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return peak;
    }
    let n = values.len() as f64;
    let sum: f64 = values.iter().map(|s| (s / peak).powf(p)).sum();
    peak * (sum / n).powf(1.0 / p)
}

/// p-norm (normalized trace) from a list of singular values or eigenvalues.
pub fn norm_from_spectrum(values: &[f64], pp: PParams) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    power_mean(&abs, pp.p())
}

/// p-norm of an arbitrary square matrix, computed from its singular values.
pub fn schatten_norm(x: &CMat, pp: PParams) -> Result<f64> {
    check_square(x)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = x.nrows();
    let svd = SVD::try_new(x.clone(), false, false, f64::EPSILON, EIG_MAX_SWEEPS_PER_DIM * n.max(1))
        .ok_or(Error::EigenNoConvergence {
            iterations: EIG_MAX_SWEEPS_PER_DIM * n.max(1),
        })?;
    Ok(power_mean(svd.singular_values.as_slice(), pp.p()))
}

fn check_square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    Ok(())
}

/// The exponent triple `(p, q, r)` with `1/p + 1/q = 1` and `r = max(p, q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PParams {
    p: f64,
    q: f64,
    r: f64,
}

impl PParams {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(format!("exponent p = {p} must lie in [1, inf]")));
        }
        let q = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            1.0
        } else {
            p / (p - 1.0)
        };
        Ok(PParams { p, q, r: p.max(q) })
    }

    pub fn infinity() -> Self {
        PParams {
            p: f64::INFINITY,
            q: 1.0,
            r: f64::INFINITY,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `1 < p < inf`, the range where the uniform convexity results apply.
    pub fn is_uniformly_convex(&self) -> bool {
        self.p > 1.0 && self.p.is_finite()
    }

    pub fn require_uniformly_convex(&self) -> Result<()> {
        if self.is_uniformly_convex() {
            Ok(())
        } else {
            Err(Error::UnsupportedExponent { p: self.p })
        }
    }
}

impl fmt::Display for PParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.p)
        }
    }
}

impl FromStr for PParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(PParams::infinity());
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidInput(format!("cannot parse exponent '{s}'")))?;
        PParams::new(p)
    }
}

impl serde::Serialize for PParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.p)
        }
    }
}

impl<'de> serde::Deserialize<'de> for PParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(p) => PParams::new(p).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Self-adjoint element of `M_n(C)`.
///
/// The constructor symmetrizes its input as `(x + x*)/2`, so the stored
/// matrix is exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix {
    m: CMat,
}

impl HermMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self::symmetrized(m))
    }

    /// Like [`HermMatrix::new`] but first rejects inputs whose asymmetry
    /// exceeds `tol * max(1, max|x_ij|)`.
    pub fn new_checked(m: CMat, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let asym = max_abs_diff(&m, &m.adjoint());
        if !(asym <= tol * max_abs(&m).max(1.0)) {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }
        Self::new(m)
    }

    pub(crate) fn symmetrized(m: CMat) -> Self {
        let adj = m.adjoint();
        let mut out = (m + adj) * re(0.5);
        for i in 0..out.nrows() {
            out[(i, i)].im = 0.0;
        }
        HermMatrix { m: out }
    }

    pub fn zeros(n: usize) -> Self {
        HermMatrix { m: CMat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        HermMatrix { m: CMat::identity(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        HermMatrix {
            m: CMat::from_fn(n, n, |i, j| if i == j { re(d[i]) } else { Complex64::new(0.0, 0.0) }),
        }
    }

    /// Real symmetric matrix from rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        Self::new(CMat::from_fn(n, n, |i, j| re(rows[i][j])))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn max_abs_diff(&self, other: &HermMatrix) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }

    pub fn scale(&self, s: f64) -> HermMatrix {
        HermMatrix { m: &self.m * re(s) }
    }

    /// `g* x g`.
    pub fn congruence(&self, g: &CMat) -> HermMatrix {
        Self::symmetrized(g.adjoint() * &self.m * g)
    }

    /// `s x s` for Hermitian `s`.
    pub fn sandwich(&self, s: &HermMatrix) -> HermMatrix {
        Self::symmetrized(&s.m * &self.m * &s.m)
    }

    /// Real inner product `Re tau(x y)`.
    pub fn inner(&self, other: &HermMatrix) -> f64 {
        // Re tr(xy) = sum_ij Re(x_ij y_ji) = sum_ij Re(x_ij conj(y_ij)) for Hermitian y
        let n = self.dim() as f64;
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            / n
    }

    pub fn eig(&self) -> Result<EigDecomp> {
        herm_eig(self)
    }

    /// p-norm from the eigenvalues.
    pub fn norm(&self, pp: PParams) -> Result<f64> {
        Ok(norm_from_spectrum(&self.eig()?.values, pp))
    }

    /// Operator norm `max |lambda_i|`.
    pub fn op_norm(&self) -> Result<f64> {
        Ok(self.eig()?.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }

    /// `sqrt(Re tau(x^2))`, the p = 2 norm, without an eigendecomposition.
    pub fn norm2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }
}

impl Add for &HermMatrix {
    type Output = HermMatrix;
    fn add(self, rhs: &HermMatrix) -> HermMatrix {
        HermMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermMatrix {
    type Output = HermMatrix;
    fn sub(self, rhs: &HermMatrix) -> HermMatrix {
        HermMatrix { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermMatrix {
    type Output = HermMatrix;
    fn neg(self) -> HermMatrix {
        HermMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &HermMatrix {
    type Output = HermMatrix;
    fn mul(self, s: f64) -> HermMatrix {
        self.scale(s)
    }
}

/// Spectral decomposition `x = V diag(values) V*`.
///
/// Eigenvalues are sorted ascending. Each eigenvector column is rotated so
/// that its largest-modulus component (the first one, on ties) is real and positive.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V diag(f(values)) V*`; fails if `f` is not finite at some eigenvalue.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<HermMatrix> {
        let mut fv = Vec::with_capacity(self.values.len());
        for &l in &self.values {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::Domain { eigenvalue: l });
            }
            fv.push(v);
        }
        Ok(self.with_values(&fv))
    }

    /// `V diag(values) V*` for an arbitrary list of values in the stored order.
    pub fn with_values(&self, values: &[f64]) -> HermMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        HermMatrix::symmetrized(scaled * self.vectors.adjoint())
    }

    /// Rotate `y` into the eigenbasis: `V* y V`.
    pub fn to_eigenbasis(&self, y: &CMat) -> CMat {
        self.vectors.adjoint() * y * &self.vectors
    }

    /// Rotate back from the eigenbasis: `V z V*`.
    pub fn from_eigenbasis(&self, z: &CMat) -> CMat {
        &self.vectors * z * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> HermMatrix {
        self.with_values(&self.values)
    }
}

/// Eigendecomposition of a Hermitian matrix with the ordering and phase
/// conventions of [`EigDecomp`].
pub fn herm_eig(x: &HermMatrix) -> Result<EigDecomp> {
    let n = x.dim();
    let max_iter = EIG_MAX_SWEEPS_PER_DIM * n.max(1);
    let eig = SymmetricEigen::try_new(x.m.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNoConvergence { iterations: max_iter })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let best = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let k = col.iter().position(|z| z.norm() >= best * (1.0 - 1e-10)).unwrap_or(0);
        let phase = if best > 0.0 { col[k].conj() / re(best) } else { re(1.0) };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
        vectors[(k, dst)].im = 0.0;
    }
    Ok(EigDecomp { values, vectors })
}

/// Spectral functional calculus `f(x) = V diag(f(lambda)) V*`.
pub fn func_calc(x: &HermMatrix, f: impl Fn(f64) -> f64) -> Result<HermMatrix> {
    x.eig()?.apply(f)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Spectral sign `u` of a Hermitian `v`, so that `v = u |v|` (with sign(0) = 0).
pub fn polar_sign(v: &HermMatrix) -> Result<HermMatrix> {
    func_calc(v, sign)
}

/// Spectral absolute value `|v|`.
pub fn abs(v: &HermMatrix) -> Result<HermMatrix> {
    func_calc(v, f64::abs)
}

/// Commutator `[x, y] = xy - yx` (skew-Hermitian for Hermitian arguments).
pub fn bracket(x: &HermMatrix, y: &HermMatrix) -> CMat {
    &x.m * &y.m - &y.m * &x.m
}

/// `[x, [y, z]]`, Hermitian whenever `x, y, z` are.
pub fn triple_bracket(x: &HermMatrix, y: &HermMatrix, z: &HermMatrix) -> HermMatrix {
    let inner = bracket(y, z);
    HermMatrix::symmetrized(&x.m * &inner - &inner * &x.m)
}

/// `[x, [x, y]] = ad^2 x (y)`.
pub fn double_bracket(x: &HermMatrix, y: &HermMatrix) -> HermMatrix {
    triple_bracket(x, x, y)
}

/// Positive invertible element of `M_n(C)` with a cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct PosDefMatrix {
    herm: HermMatrix,
    eig: EigDecomp,
}

impl PosDefMatrix {
    /// Rejects matrices whose smallest eigenvalue is `<= 1e-12 * max(1, ||a||_inf)`.
    pub fn new(herm: HermMatrix) -> Result<Self> {
        let eig = herm.eig()?;
        Self::check(&eig)?;
        Ok(PosDefMatrix { herm, eig })
    }

    pub fn from_matrix(m: CMat) -> Result<Self> {
        Self::new(HermMatrix::new(m)?)
    }

    /// Build from a known spectral decomposition without re-diagonalizing.
    pub fn from_eig(eig: EigDecomp) -> Result<Self> {
        Self::check(&eig)?;
        let herm = eig.reconstruct();
        Ok(PosDefMatrix { herm, eig })
    }

    fn check(eig: &EigDecomp) -> Result<()> {
        let threshold = POSDEF_THRESHOLD * eig.max().abs().max(1.0);
        if !(eig.min() > threshold) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: eig.min(),
                threshold,
            });
        }
        Ok(())
    }

    pub fn identity(n: usize) -> Self {
        Self::new(HermMatrix::identity(n)).expect("identity is positive definite")
    }

    /// `exp(x)`, reusing the eigenbasis of `x`.
    pub fn exp_of(x: &HermMatrix) -> Result<Self> {
        let e = x.eig()?;
        Self::from_eig(EigDecomp {
            values: e.values.iter().map(|v| v.exp()).collect(),
            vectors: e.vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.herm.dim()
    }

    pub fn as_herm(&self) -> &HermMatrix {
        &self.herm
    }

    pub fn as_matrix(&self) -> &CMat {
        self.herm.as_matrix()
    }

    pub fn eig(&self) -> &EigDecomp {
        &self.eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.min()
    }

    pub fn pow(&self, t: f64) -> HermMatrix {
        let v: Vec<f64> = self.eig.values.iter().map(|l| l.powf(t)).collect();
        self.eig.with_values(&v)
    }

    pub fn sqrt(&self) -> HermMatrix {
        let v: Vec<f64> = self.eig.values.iter().map(|l| l.sqrt()).collect();
        self.eig.with_values(&v)
    }

    pub fn inv_sqrt(&self) -> HermMatrix {
        let v: Vec<f64> = self.eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
        self.eig.with_values(&v)
    }

    pub fn inv(&self) -> HermMatrix {
        let v: Vec<f64> = self.eig.values.iter().map(|l| 1.0 / l).collect();
        self.eig.with_values(&v)
    }

    pub fn ln(&self) -> HermMatrix {
        let v: Vec<f64> = self.eig.values.iter().map(|l| l.ln()).collect();
        self.eig.with_values(&v)
    }

    pub fn max_abs_diff(&self, other: &PosDefMatrix) -> f64 {
        self.herm.max_abs_diff(&other.herm)
    }
}
