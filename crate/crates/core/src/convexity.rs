//! Lie triple systems and the exponential sets `K = exp(H)` they generate.
//!
//! A real subspace `H` of Hermitian matrices is a Lie triple system when it is
//! closed under `(x, y, z) -> [x, [y, z]]`. Exactly then `K = exp(H)` is
//! geodesically convex, closed under `(a, b) -> a b a` and under the geodesic
//! symmetries `b -> a b^{-1} a`.
//!
//! Subspaces are stored through a basis orthonormal for `Re tau(x y)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{geodesic_symmetry, GeodesicSegment};
use crate::matcore::{triple_bracket, HermMatrix, PosDefMatrix};
use crate::sampling;

/// Relative tolerance for Gram–Schmidt acceptance and for the triple-bracket
/// residual in [`lts_check`].
pub const SUBSPACE_TOL: f64 = 1e-9;

/// Relative tolerance on `||ln a - proj ln a||_2` for membership in `K`.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// A real subspace of the `n x n` Hermitian matrices.
#[derive(Clone, Debug)]
pub struct HermSubspace {
    n: usize,
    basis: Vec<HermMatrix>,
}

impl HermSubspace {
    /// Zero subspace of the `n x n` Hermitian matrices.
    pub fn zero(n: usize) -> Self {
        HermSubspace { n, basis: Vec::new() }
    }

    /// Orthonormalized span of `gens`; directions that are numerically
    /// dependent on the previous ones are dropped.
    pub fn from_spanning(n: usize, gens: &[HermMatrix]) -> Result<Self> {
        let mut h = Self::zero(n);
        for g in gens {
            if g.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: g.dim() });
            }
            h.try_extend(g);
        }
        Ok(h)
    }

    /// Real diagonal matrices (an abelian Lie triple system).
    pub fn diagonals(n: usize) -> Self {
        let gens: Vec<HermMatrix> = (0..n)
            .map(|i| {
                let mut d = vec![0.0; n];
                d[i] = 1.0;
                HermMatrix::from_diagonal(&d)
            })
            .collect();
        Self::from_spanning(n, &gens).expect("dimensions agree")
    }

    /// Real symmetric matrices.
    pub fn real_symmetric(n: usize) -> Self {
        let mut gens = Vec::new();
        for i in 0..n {
            for j in i..n {
                let mut rows = vec![vec![0.0; n]; n];
                rows[i][j] = 1.0;
                rows[j][i] = 1.0;
                gens.push(HermMatrix::from_real_rows(&rows).expect("square"));
            }
        }
        Self::from_spanning(n, &gens).expect("dimensions agree")
    }

    /// All Hermitian matrices.
    pub fn full(n: usize) -> Self {
        let mut gens = Self::real_symmetric(n).basis;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut m = crate::matcore::CMat::zeros(n, n);
                m[(i, j)] = num_complex::Complex64::new(0.0, 1.0);
                m[(j, i)] = num_complex::Complex64::new(0.0, -1.0);
                gens.push(HermMatrix::new(m).expect("finite"));
            }
        }
        Self::from_spanning(n, &gens).expect("dimensions agree")
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[HermMatrix] {
        &self.basis
    }

    /// Coordinates `Re tau(x b_i)` of the orthogonal projection.
    pub fn coords(&self, x: &HermMatrix) -> Vec<f64> {
        self.basis.iter().map(|b| x.inner(b)).collect()
    }

    /// `sum_i c_i b_i`.
    pub fn combine(&self, coords: &[f64]) -> HermMatrix {
        let mut acc = HermMatrix::zeros(self.n);
        for (b, &c) in self.basis.iter().zip(coords) {
            acc = &acc + &b.scale(c);
        }
        acc
    }

    /// Orthogonal projection `sum_i Re tau(x b_i) b_i`.
    pub fn project(&self, x: &HermMatrix) -> HermMatrix {
        self.combine(&self.coords(x))
    }

    /// `x - proj(x)`, projected twice for accuracy.
    fn reject(&self, x: &HermMatrix) -> HermMatrix {
        let r = x - &self.project(x);
        &r - &self.project(&r)
    }

    /// Scaled residual `||x - proj x||_2 / (1 + ||x||_2)`.
    pub fn relative_residual(&self, x: &HermMatrix) -> f64 {
        self.reject(x).norm2() / (1.0 + x.norm2())
    }

    /// Gram–Schmidt step: add the normalized rejection of `v` if it is not
    /// numerically in the span. Returns whether the basis grew.
    pub fn try_extend(&mut self, v: &HermMatrix) -> bool {
        if v.dim() != self.n || self.basis.len() >= self.n * self.n {
            return false;
        }
        let r = self.reject(v);
        let norm = r.norm2();
        if norm <= SUBSPACE_TOL * (1.0 + v.norm2()) {
            return false;
        }
        self.basis.push(r.scale(1.0 / norm));
        true
    }

    /// Largest `|Re tau(b_i b_j) - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b) - target).abs());
            }
        }
        worst
    }
}

/// Outcome of [`lts_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LtsCheck {
    pub is_lts: bool,
    /// Worst `||w - proj w||_2 / (1 + ||w||_2)` over `w = [b_i, [b_j, b_k]]`.
    pub max_residual: f64,
}

/// Tests closure under `[x, [y, z]]` on all basis triples.
pub fn lts_check(h: &HermSubspace) -> LtsCheck {
    let b = h.basis();
    let d = b.len();
    let per_i: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..d {
                for k in (j + 1)..d {
                    let w = triple_bracket(&b[i], &b[j], &b[k]);
                    worst = worst.max(h.relative_residual(&w));
                }
            }
            worst
        })
        .collect();
    let max_residual = per_i.into_iter().fold(0.0, f64::max);
    LtsCheck {
        is_lts: max_residual <= SUBSPACE_TOL,
        max_residual,
    }
}

/// Smallest subspace containing `generators` and closed under the triple
/// bracket, found by breadth-first extension until a fixed point.
pub fn lts_closure(generators: &[HermMatrix]) -> Result<HermSubspace> {
    let first = generators
        .first()
        .ok_or_else(|| Error::InvalidInput("closure needs at least one generator".into()))?;
    let mut h = HermSubspace::from_spanning(first.dim(), generators)?;
    let mut frontier = 0;
    loop {
        let d = h.dim();
        let mut grew = false;
        for i in 0..d {
            for j in 0..d {
                for k in (j + 1)..d {
                    if i.max(k) < frontier {
                        continue;
                    }
                    let w = triple_bracket(&h.basis[i], &h.basis[j], &h.basis[k]);
                    grew |= h.try_extend(&w);
                }
            }
        }
        if !grew {
            return Ok(h);
        }
        frontier = d;
    }
}

/// `K = exp(H)` together with the outcome of the Lie triple check on `H`.
#[derive(Clone, Debug)]
pub struct ExponentialSet {
    h: HermSubspace,
    lts_verified: bool,
    lts_residual: f64,
}

impl ExponentialSet {
    /// Runs [`lts_check`] and records the outcome.
    pub fn new(h: HermSubspace) -> Self {
        let c = lts_check(&h);
        ExponentialSet {
            h,
            lts_verified: c.is_lts,
            lts_residual: c.max_residual,
        }
    }

    /// Like [`ExponentialSet::new`] but fails unless `H` is a Lie triple system.
    pub fn verified(h: HermSubspace) -> Result<Self> {
        let k = Self::new(h);
        if !k.lts_verified {
            return Err(Error::NotLieTripleSystem);
        }
        Ok(k)
    }

    pub fn subspace(&self) -> &HermSubspace {
        &self.h
    }

    pub fn lts_verified(&self) -> bool {
        self.lts_verified
    }

    pub fn lts_residual(&self) -> f64 {
        self.lts_residual
    }

    pub fn dim(&self) -> usize {
        self.h.ambient_dim()
    }

    /// `exp(x)` for `x` in `H` (the caller guarantees membership).
    pub fn exp_of(&self, x: &HermMatrix) -> Result<PosDefMatrix> {
        PosDefMatrix::exp_of(x)
    }
}

/// Scaled distance of `ln a` from `H`.
pub fn membership_residual(h: &HermSubspace, a: &PosDefMatrix) -> Result<f64> {
    if a.dim() != h.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.ambient_dim(),
            found: a.dim(),
        });
    }
    Ok(h.relative_residual(&a.ln()))
}

/// Outcome of [`k_membership`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
}

/// Whether `a` lies in `K`, i.e. `ln a` lies in `H`.
pub fn k_membership(k: &ExponentialSet, a: &PosDefMatrix) -> Result<Membership> {
    if !k.lts_verified {
        return Err(Error::NotLieTripleSystem);
    }
    let residual = membership_residual(&k.h, a)?;
    Ok(Membership {
        member: residual <= MEMBERSHIP_TOL,
        residual,
    })
}

/// Largest operator norm of the random `H` elements used by the probe.
pub const PROBE_NORM_CAP: f64 = 1.5;

/// Geodesic parameters sampled by the probe.
pub const PROBE_T_GRID: [f64; 7] = [0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9];

/// Worst membership residuals seen by [`convexity_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReport {
    pub trials: usize,
    /// `a b a` for `a, b` in `K`.
    pub product_residual: f64,
    /// `gamma_{a,b}(t)` on [`PROBE_T_GRID`].
    pub geodesic_residual: f64,
    /// `sigma_a(b) = a b^{-1} a`.
    pub symmetry_residual: f64,
    /// Seed of the trial with the largest residual.
    pub worst_seed: u64,
}

impl ProbeReport {
    pub fn max_residual(&self) -> f64 {
        self.product_residual.max(self.geodesic_residual).max(self.symmetry_residual)
    }
}

/// Samples `a, b` in `K` and measures how far `a b a`, the geodesic
/// `gamma_{a,b}` and `sigma_a(b)` fall outside `K`.
///
/// The probe does not require `K` to be verified: on a non-LTS subspace the
/// residuals expose the failure of convexity. Trials run in parallel with
/// per-trial seeds, so the report does not depend on scheduling.
pub fn convexity_probe(k: &ExponentialSet, trials: usize, seed: u64) -> Result<ProbeReport> {
    let h = &k.h;
    let rows: Vec<(u64, [f64; 3])> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let s = sampling::trial_seed(seed, trial);
            let mut rng = sampling::rng_for(s, 0);
            let a = PosDefMatrix::exp_of(&sampling::in_subspace(&mut rng, h, PROBE_NORM_CAP)?)?;
            let b = PosDefMatrix::exp_of(&sampling::in_subspace(&mut rng, h, PROBE_NORM_CAP)?)?;
            let aba = PosDefMatrix::new(b.as_herm().sandwich(a.as_herm()))?;
            let prod = membership_residual(h, &aba)?;
            let seg = GeodesicSegment::new(&a, &b)?;
            let mut geo: f64 = 0.0;
            for &t in &PROBE_T_GRID {
                geo = geo.max(membership_residual(h, &seg.point(t)?)?);
            }
            let sym = membership_residual(h, &geodesic_symmetry(&a, &b)?)?;
            Ok((s, [prod, geo, sym]))
        })
        .collect::<Result<_>>()?;
    let mut report = ProbeReport {
        trials,
        product_residual: 0.0,
        geodesic_residual: 0.0,
        symmetry_residual: 0.0,
        worst_seed: seed,
    };
    let mut worst = -1.0;
    for (s, r) in rows {
        report.product_residual = report.product_residual.max(r[0]);
        report.geodesic_residual = report.geodesic_residual.max(r[1]);
        report.symmetry_residual = report.symmetry_residual.max(r[2]);
        let m = r[0].max(r[1]).max(r[2]);
        if m > worst {
            worst = m;
            report.worst_seed = s;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{CMat, PParams};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn sz() -> HermMatrix {
        HermMatrix::from_diagonal(&[1.0, -1.0])
    }

    fn sx() -> HermMatrix {
        HermMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn sy() -> HermMatrix {
        let i = Complex64::new(0.0, 1.0);
        HermMatrix::new(CMat::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), -i, i, Complex64::new(0.0, 0.0)])).unwrap()
    }

    /// Brute-force closure oracle: repeatedly append every triple bracket of
    /// the current spanning list and measure the rank through the Gram matrix.
    fn brute_force_closure_dim(gens: &[HermMatrix]) -> usize {
        let mut span: Vec<HermMatrix> = gens.to_vec();
        let mut last = 0;
        for _ in 0..6 {
            let cur = span.clone();
            for x in &cur {
                for y in &cur {
                    for z in &cur {
                        span.push(triple_bracket(x, y, z));
                    }
                }
            }
            // rank of the real Gram matrix
            let m = span.len();
            let g = nalgebra::DMatrix::<f64>::from_fn(m, m, |i, j| span[i].inner(&span[j]));
            let ev = nalgebra::SymmetricEigen::new(g).eigenvalues;
            let top = ev.iter().copied().fold(0.0, f64::max);
            let rank = ev.iter().filter(|&&v| v > 1e-10 * top).count();
            if rank == last {
                return rank;
            }
            last = rank;
            // keep a basis-sized spanning list to stay small
            span = HermSubspace::from_spanning(gens[0].dim(), &span).unwrap().basis;
        }
        last
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in 1..5 {
            assert!(HermSubspace::diagonals(n).orthonormality_defect() < 1e-12);
            assert!(HermSubspace::full(n).orthonormality_defect() < 1e-12);
            assert_eq!(HermSubspace::full(n).dim(), n * n);
            assert_eq!(HermSubspace::real_symmetric(n).dim(), n * (n + 1) / 2);
        }
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let mut rng = sampling::rng_for(31, 0);
        let h = HermSubspace::real_symmetric(3);
        let x = sampling::hermitian(&mut rng, 3, 2.0).unwrap();
        let y = sampling::hermitian(&mut rng, 3, 2.0).unwrap();
        let px = h.project(&x);
        assert!(h.project(&px).max_abs_diff(&px) < 1e-12);
        assert_abs_diff_eq!(px.inner(&y), x.inner(&h.project(&y)), epsilon = 1e-10);
    }

    #[test]
    fn lts_check_examples() {
        let d = lts_check(&HermSubspace::diagonals(3));
        assert!(d.is_lts);
        assert_eq!(d.max_residual, 0.0);
        let mut rng = sampling::rng_for(32, 0);
        let x = sampling::hermitian(&mut rng, 3, 1.0).unwrap();
        assert!(lts_check(&HermSubspace::from_spanning(3, &[x]).unwrap()).is_lts);
        assert!(lts_check(&HermSubspace::from_spanning(2, &[sz(), sx()]).unwrap()).is_lts);
        assert!(lts_check(&HermSubspace::from_spanning(2, &[sz(), sx(), sy()]).unwrap()).is_lts);
        assert!(lts_check(&HermSubspace::real_symmetric(4)).is_lts);
        assert!(lts_check(&HermSubspace::full(3)).is_lts);
    }

    #[test]
    fn lts_check_rejects_non_lts() {
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
        let c = lts_check(&h);
        assert!(!c.is_lts);
        assert!(c.max_residual > 1e-2);
    }

    #[test]
    fn closure_examples() {
        assert_eq!(lts_closure(&[sz()]).unwrap().dim(), 1);
        // {diag(1,-1), sigma_x} already spans the real symmetric traceless
        // matrices, which are closed under the triple bracket
        let gens = [sz(), sx()];
        let c = lts_closure(&gens).unwrap();
        assert_eq!(c.dim(), brute_force_closure_dim(&gens));
        assert_eq!(c.dim(), 2);
        // adding sigma_y gives all traceless Hermitian 2x2 matrices
        let gens3 = [sz(), sx(), sy()];
        assert_eq!(lts_closure(&gens3).unwrap().dim(), 3);
        assert!(lts_closure(&[]).is_err());
    }

    #[test]
    fn closure_matches_brute_force_on_random_generators() {
        let mut rng = sampling::rng_for(33, 0);
        for n in 2..4 {
            let gens = vec![
                sampling::hermitian(&mut rng, n, 1.0).unwrap(),
                sampling::hermitian(&mut rng, n, 1.0).unwrap(),
            ];
            let c = lts_closure(&gens).unwrap();
            assert_eq!(c.dim(), brute_force_closure_dim(&gens), "n={n}");
            assert!(lts_check(&c).is_lts);
        }
        let e11 = {
            let mut r = vec![vec![0.0; 3]; 3];
            r[0][0] = 1.0;
            HermMatrix::from_real_rows(&r).unwrap()
        };
        let e12 = {
            let mut r = vec![vec![0.0; 3]; 3];
            r[0][1] = 1.0;
            r[1][0] = 1.0;
            HermMatrix::from_real_rows(&r).unwrap()
        };
        let gens = [e11, e12];
        let c = lts_closure(&gens).unwrap();
        assert_eq!(c.dim(), brute_force_closure_dim(&gens));
    }

    #[test]
    fn closure_is_idempotent() {
        let mut rng = sampling::rng_for(34, 0);
        let gens = [sampling::hermitian(&mut rng, 3, 1.0).unwrap()];
        let c = lts_closure(&[gens[0].clone(), HermMatrix::from_diagonal(&[1.0, 0.0, -1.0])]).unwrap();
        let again = lts_closure(c.basis()).unwrap();
        assert_eq!(again.dim(), c.dim());
        for b in again.basis() {
            assert!(c.relative_residual(b) < 1e-9);
        }
    }

    #[test]
    fn membership_examples() {
        let k = ExponentialSet::verified(HermSubspace::diagonals(2)).unwrap();
        let m = k_membership(&k, &PosDefMatrix::identity(2)).unwrap();
        assert!(m.member && m.residual == 0.0);
        let full = ExponentialSet::verified(HermSubspace::full(2)).unwrap();
        assert!(k_membership(&full, &PosDefMatrix::identity(2)).unwrap().member);
        let d = PosDefMatrix::new(HermMatrix::from_diagonal(&[2.0, 5.0])).unwrap();
        assert!(k_membership(&k, &d).unwrap().member);
        let off = PosDefMatrix::exp_of(&sx().scale(0.7)).unwrap();
        let m = k_membership(&k, &off).unwrap();
        assert!(!m.member && m.residual > 0.1);
        let not_lts = ExponentialSet::new(HermSubspace::zero(2));
        assert!(not_lts.lts_verified());
    }

    #[test]
    fn membership_requires_verification() {
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
        let k = ExponentialSet::new(h.clone());
        assert!(!k.lts_verified());
        assert!(matches!(k_membership(&k, &PosDefMatrix::identity(3)), Err(Error::NotLieTripleSystem)));
        assert!(matches!(ExponentialSet::verified(h), Err(Error::NotLieTripleSystem)));
    }

    #[test]
    fn geodesics_stay_in_k_for_all_real_t() {
        let k = ExponentialSet::verified(lts_closure(&[sz(), sx()]).unwrap()).unwrap();
        let mut rng = sampling::rng_for(35, 0);
        for _ in 0..5 {
            let a = PosDefMatrix::exp_of(&sampling::in_subspace(&mut rng, k.subspace(), 1.5).unwrap()).unwrap();
            let b = PosDefMatrix::exp_of(&sampling::in_subspace(&mut rng, k.subspace(), 1.5).unwrap()).unwrap();
            let seg = GeodesicSegment::new(&a, &b).unwrap();
            for &t in &[-1.0, -0.5, 0.25, 0.5, 0.75, 1.5] {
                assert!(k_membership(&k, &seg.point(t).unwrap()).unwrap().member, "t={t}");
            }
        }
        let _ = PParams::new(2.0);
    }

    #[test]
    fn probe_is_deterministic() {
        let k = ExponentialSet::new(HermSubspace::from_spanning(2, &[sz(), sx()]).unwrap());
        let a = convexity_probe(&k, 20, 5).unwrap();
        let b = convexity_probe(&k, 20, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.max_residual() <= 1e-8);
    }
}
