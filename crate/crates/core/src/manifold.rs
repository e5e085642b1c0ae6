//! Geometry of `M = Skew(r) × Sym₊(r) × R^{r×m} × R^{p×r}`.
//!
//! The skew and Euclidean factors carry the flat Frobenius metric; the SPD
//! factor carries the affine-invariant metric `tr(R⁻¹ η₁ R⁻¹ η₂)`, whose
//! exponential map `R^{1/2} exp(R^{-1/2} η R^{-1/2}) R^{1/2}` never leaves
//! the SPD cone.

use std::ops::{Add, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, frob_inner, skew, sym, Mat};

const STRUCTURE_TOL: f64 = 1e-10;

/// A reduced model `(J, R, B, C)` with `J` skew and `R` SPD.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    j: Mat,
    r: Mat,
    b: Mat,
    c: Mat,
    r_inv: Mat,
}

impl ManifoldPoint {
    /// Validates the structure and removes round-off asymmetry.
    pub fn new(j: Mat, r: Mat, b: Mat, c: Mat) -> Result<Self> {
        let n = linalg::check_square(&j, "J")?;
        if r.shape() != (n, n) || b.nrows() != n || c.ncols() != n {
            return Err(Error::dims(format!(
                "inconsistent point shapes J {:?}, R {:?}, B {:?}, C {:?}",
                j.shape(),
                r.shape(),
                b.shape(),
                c.shape()
            )));
        }
        let scale_j = j.amax().max(1.0);
        if (&j + j.transpose()).amax() > STRUCTURE_TOL * scale_j {
            return Err(Error::ManifoldViolation("J is not skew-symmetric".into()));
        }
        let scale_r = r.amax().max(1.0);
        if (&r - r.transpose()).amax() > STRUCTURE_TOL * scale_r {
            return Err(Error::ManifoldViolation("R is not symmetric".into()));
        }
        let j = skew(&j);
        let r = sym(&r);
        let l = linalg::cholesky_lower(&r)
            .map_err(|e| Error::ManifoldViolation(format!("R is not positive definite ({e})")))?;
        let l_inv = linalg::solve_lower(&l, &Mat::identity(n, n))?;
        let r_inv = sym(&(l_inv.transpose() * l_inv));
        Ok(Self { j, r, b, c, r_inv })
    }

    pub fn j(&self) -> &Mat {
        &self.j
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn r_inv(&self) -> &Mat {
        &self.r_inv
    }

    /// `J - R`, the state matrix of the reduced model.
    pub fn state_matrix(&self) -> Mat {
        &self.j - &self.r
    }

    pub fn order(&self) -> usize {
        self.j.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Dimension of the manifold at this point's sizes.
    pub fn dimension(&self) -> usize {
        let r = self.order();
        r * (r - 1) / 2 + r * (r + 1) / 2 + r * self.inputs() + self.outputs() * r
    }
}

/// An element of the ambient space `R^{r×r} × R^{r×r} × R^{r×m} × R^{p×r}`,
/// e.g. a Euclidean gradient or an unprojected direction.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientVector {
    pub j: Mat,
    pub r: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl AmbientVector {
    /// Frobenius pairing summed over the four factors.
    pub fn pair(&self, t: &TangentVector) -> f64 {
        frob_inner(&self.j, &t.xi)
            + frob_inner(&self.r, &t.eta)
            + frob_inner(&self.b, &t.zeta)
            + frob_inner(&self.c, &t.kappa)
    }
}

/// Tangent vector `(ξ, η, ζ, κ)` with `ξ` skew and `η` symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub xi: Mat,
    pub eta: Mat,
    pub zeta: Mat,
    pub kappa: Mat,
}

impl TangentVector {
    pub fn zeros(p: &ManifoldPoint) -> Self {
        let (r, m, q) = (p.order(), p.inputs(), p.outputs());
        Self {
            xi: Mat::zeros(r, r),
            eta: Mat::zeros(r, r),
            zeta: Mat::zeros(r, m),
            kappa: Mat::zeros(q, r),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            xi: &self.xi * s,
            eta: &self.eta * s,
            zeta: &self.zeta * s,
            kappa: &self.kappa * s,
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &TangentVector) {
        self.xi += &other.xi * s;
        self.eta += &other.eta * s;
        self.zeta += &other.zeta * s;
        self.kappa += &other.kappa * s;
    }

    pub fn is_zero(&self) -> bool {
        self.xi.amax() == 0.0
            && self.eta.amax() == 0.0
            && self.zeta.amax() == 0.0
            && self.kappa.amax() == 0.0
    }

    fn check_shape(&self, p: &ManifoldPoint) -> Result<()> {
        let (r, m, q) = (p.order(), p.inputs(), p.outputs());
        if self.xi.shape() != (r, r)
            || self.eta.shape() != (r, r)
            || self.zeta.shape() != (r, m)
            || self.kappa.shape() != (q, r)
        {
            return Err(Error::dims("tangent vector shape does not match point"));
        }
        Ok(())
    }
}

impl Add for &TangentVector {
    type Output = TangentVector;
    fn add(self, rhs: &TangentVector) -> TangentVector {
        TangentVector {
            xi: &self.xi + &rhs.xi,
            eta: &self.eta + &rhs.eta,
            zeta: &self.zeta + &rhs.zeta,
            kappa: &self.kappa + &rhs.kappa,
        }
    }
}

impl Sub for &TangentVector {
    type Output = TangentVector;
    fn sub(self, rhs: &TangentVector) -> TangentVector {
        TangentVector {
            xi: &self.xi - &rhs.xi,
            eta: &self.eta - &rhs.eta,
            zeta: &self.zeta - &rhs.zeta,
            kappa: &self.kappa - &rhs.kappa,
        }
    }
}

impl Mul<f64> for &TangentVector {
    type Output = TangentVector;
    fn mul(self, s: f64) -> TangentVector {
        self.scale(s)
    }
}

impl Neg for &TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        self.scale(-1.0)
    }
}

/// Riemannian metric at `p`.
pub fn inner(p: &ManifoldPoint, t1: &TangentVector, t2: &TangentVector) -> f64 {
    let ri = p.r_inv();
    frob_inner(&t1.xi, &t2.xi)
        + (ri * &t1.eta * ri * &t2.eta).trace()
        + frob_inner(&t1.zeta, &t2.zeta)
        + frob_inner(&t1.kappa, &t2.kappa)
}

pub fn norm(p: &ManifoldPoint, t: &TangentVector) -> f64 {
    inner(p, t, t).max(0.0).sqrt()
}

/// Orthogonal projection of an ambient vector onto the tangent space.
pub fn project_tangent(p: &ManifoldPoint, raw: &AmbientVector) -> Result<TangentVector> {
    let t = TangentVector {
        xi: skew(&raw.j),
        eta: sym(&raw.r),
        zeta: raw.b.clone(),
        kappa: raw.c.clone(),
    };
    t.check_shape(p)?;
    Ok(t)
}

/// Converts a Euclidean gradient of the flat extension into the Riemannian
/// gradient: `(sk(G_J), R sym(G_R) R, G_B, G_C)`.
pub fn egrad_to_rgrad(p: &ManifoldPoint, eg: &AmbientVector) -> Result<TangentVector> {
    let mut t = project_tangent(p, eg)?;
    t.eta = sym(&(p.r() * &t.eta * p.r()));
    Ok(t)
}

/// Exponential map of the product metric.
pub fn exp_map(p: &ManifoldPoint, t: &TangentVector) -> Result<ManifoldPoint> {
    t.check_shape(p)?;
    let (half, inv_half) = linalg::spd_sqrt_pair(p.r())
        .map_err(|e| Error::ManifoldViolation(e.to_string()))?;
    let inner_arg = sym(&(&inv_half * sym(&t.eta) * &inv_half));
    let r_new = sym(&(&half * linalg::sym_exp(&inner_arg)? * &half));
    ManifoldPoint::new(
        skew(&(p.j() + &t.xi)),
        r_new,
        p.b() + &t.zeta,
        p.c() + &t.kappa,
    )
}

/// Random tangent vector of unit Riemannian norm, reproducible from `seed`.
pub fn random_tangent(p: &ManifoldPoint, seed: u64) -> TangentVector {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    };
    let (r, m, q) = (p.order(), p.inputs(), p.outputs());
    let raw = AmbientVector {
        j: draw(r, r),
        r: draw(r, r),
        b: draw(r, m),
        c: draw(q, r),
    };
    let t = project_tangent(p, &raw).expect("shapes built from the point");
    let nrm = norm(p, &t);
    t.scale(1.0 / nrm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;
    use nalgebra::dmatrix;

    fn point(seed: u64, r: usize, m: usize, p: usize) -> ManifoldPoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ManifoldPoint::new(
            skew(&random_mat(&mut rng, r, r)),
            random_spd(&mut rng, r),
            random_mat(&mut rng, r, m),
            random_mat(&mut rng, p, r),
        )
        .unwrap()
    }

    fn ambient(seed: u64, p: &ManifoldPoint) -> AmbientVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        AmbientVector {
            j: random_mat(&mut rng, p.order(), p.order()),
            r: random_mat(&mut rng, p.order(), p.order()),
            b: random_mat(&mut rng, p.order(), p.inputs()),
            c: random_mat(&mut rng, p.outputs(), p.order()),
        }
    }

    #[test]
    fn rejects_bad_points() {
        let id = Mat::identity(2, 2);
        let b = Mat::zeros(2, 1);
        let c = Mat::zeros(1, 2);
        assert!(matches!(
            ManifoldPoint::new(id.clone(), id.clone(), b.clone(), c.clone()),
            Err(Error::ManifoldViolation(_))
        ));
        assert!(matches!(
            ManifoldPoint::new(Mat::zeros(2, 2), -&id, b.clone(), c.clone()),
            Err(Error::ManifoldViolation(_))
        ));
        assert!(matches!(
            ManifoldPoint::new(Mat::zeros(2, 2), id, Mat::zeros(3, 1), c),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inner_at_identity_is_frobenius() {
        let mut p = point(1, 3, 2, 2);
        p = ManifoldPoint::new(p.j().clone(), Mat::identity(3, 3), p.b().clone(), p.c().clone()).unwrap();
        let t1 = random_tangent(&p, 1);
        let t2 = random_tangent(&p, 2);
        let flat = frob_inner(&t1.xi, &t2.xi)
            + frob_inner(&t1.eta, &t2.eta)
            + frob_inner(&t1.zeta, &t2.zeta)
            + frob_inner(&t1.kappa, &t2.kappa);
        assert!((inner(&p, &t1, &t2) - flat).abs() < 1e-14);
        assert!((inner(&p, &t1, &t2) - inner(&p, &t2, &t1)).abs() < 1e-14);
    }

    #[test]
    fn inner_with_diagonal_r() {
        let p = ManifoldPoint::new(
            Mat::zeros(2, 2),
            dmatrix![1.0, 0.0; 0.0, 4.0],
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let mut t = TangentVector::zeros(&p);
        t.eta = dmatrix![0.0, 0.0; 0.0, 1.0];
        assert!((inner(&p, &t, &t) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn projection() {
        let p = point(2, 3, 1, 2);
        let mut raw = ambient(3, &p);
        let t = project_tangent(&p, &raw).unwrap();
        let raw2 = AmbientVector { j: t.xi.clone(), r: t.eta.clone(), b: t.zeta.clone(), c: t.kappa.clone() };
        assert_eq!(project_tangent(&p, &raw2).unwrap(), t);
        raw.j = sym(&raw.j);
        raw.r = skew(&raw.r);
        let t = project_tangent(&p, &raw).unwrap();
        assert!(t.xi.amax() < 1e-15 && t.eta.amax() < 1e-15);
        raw.b = Mat::zeros(5, 5);
        assert!(project_tangent(&p, &raw).is_err());
    }

    #[test]
    fn rgrad_examples() {
        let p = ManifoldPoint::new(
            Mat::zeros(2, 2),
            dmatrix![2.0, 0.0; 0.0, 1.0],
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let eg = AmbientVector {
            j: dmatrix![1.0, 2.0; 2.0, 3.0],
            r: Mat::identity(2, 2),
            b: Mat::zeros(2, 1),
            c: Mat::zeros(1, 2),
        };
        let g = egrad_to_rgrad(&p, &eg).unwrap();
        assert!(g.xi.amax() == 0.0);
        assert!((&g.eta - dmatrix![4.0, 0.0; 0.0, 1.0]).amax() < 1e-15);
    }

    #[test]
    fn rgrad_riesz_property() {
        for seed in 0..5 {
            let p = point(10 + seed, 3, 2, 2);
            let eg = ambient(20 + seed, &p);
            let g = egrad_to_rgrad(&p, &eg).unwrap();
            for k in 0..20 {
                let t = random_tangent(&p, 100 * seed + k);
                let lhs = inner(&p, &g, &t);
                let rhs = eg.pair(&t);
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn exp_map_examples() {
        let p = point(4, 3, 2, 1);
        let q = exp_map(&p, &TangentVector::zeros(&p)).unwrap();
        assert!((q.r() - p.r()).amax() < 1e-13);
        assert_eq!(q.j(), p.j());

        let id = ManifoldPoint::new(Mat::zeros(2, 2), Mat::identity(2, 2), Mat::zeros(2, 1), Mat::zeros(1, 2))
            .unwrap();
        let mut t = TangentVector::zeros(&id);
        t.eta = dmatrix![0.3, -0.7; -0.7, 1.1];
        let q = exp_map(&id, &t).unwrap();
        assert!((q.r() - linalg::mat_exp(&t.eta).unwrap()).amax() < 1e-13);

        let d = ManifoldPoint::new(
            Mat::zeros(2, 2),
            dmatrix![1.0, 0.0; 0.0, 4.0],
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let mut t = TangentVector::zeros(&d);
        t.eta = dmatrix![0.0, 0.0; 0.0, 4.0 * 2f64.ln()];
        let q = exp_map(&d, &t).unwrap();
        assert!((q.r() - dmatrix![1.0, 0.0; 0.0, 8.0]).amax() < 1e-13);
    }

    #[test]
    fn exp_map_stays_spd_for_large_steps() {
        let p = point(5, 4, 1, 1);
        for seed in 0..20 {
            let t = random_tangent(&p, seed).scale(25.0);
            let q = exp_map(&p, &t).unwrap();
            assert!(linalg::is_spd(q.r()));
            assert_eq!(q.j(), &(-q.j().transpose()));
        }
    }

    #[test]
    fn random_tangent_properties() {
        let p = point(6, 3, 2, 2);
        let t1 = random_tangent(&p, 1);
        let t2 = random_tangent(&p, 2);
        assert!((inner(&p, &t1, &t1) - 1.0).abs() < 1e-12);
        assert_ne!(t1, t2);
        let s = point(7, 1, 1, 1);
        let t = random_tangent(&s, 3);
        assert_eq!(t.xi[(0, 0)], 0.0);
        assert_eq!(s.dimension(), 3);
    }
}
