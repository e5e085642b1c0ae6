//! Conversion between general stable realizations and the `(J - R)` form
//! with `J` skew-symmetric and `R` symmetric positive definite.

use crate::error::{Error, Result};
use crate::linalg::{self, skew, sym, Mat};
use crate::lti::StateSpace;
use crate::manifold::ManifoldPoint;

/// Realization `ẋ = (J - R)x + Bu`, `y = Cx`.
#[derive(Clone, Debug)]
pub struct StructuredRealization {
    pub jt: Mat,
    pub rt: Mat,
    pub bt: Mat,
    pub ct: Mat,
}

impl StructuredRealization {
    pub fn state_matrix(&self) -> Mat {
        &self.jt - &self.rt
    }

    pub fn order(&self) -> usize {
        self.jt.nrows()
    }

    pub fn to_state_space(&self) -> Result<StateSpace> {
        StateSpace::new(self.state_matrix(), self.bt.clone(), self.ct.clone())
    }

    /// View as a manifold point (requires `R` strictly positive definite).
    pub fn to_point(&self) -> Result<ManifoldPoint> {
        ManifoldPoint::new(self.jt.clone(), self.rt.clone(), self.bt.clone(), self.ct.clone())
    }
}

/// Lyapunov certificate `Q` (with `AᵀQ + QA + W = 0`) and its Cholesky factor.
#[derive(Clone, Debug)]
pub struct StructuredTransform {
    pub q: Mat,
    pub l: Mat,
}

/// `J = ½(AQ⁻¹ - Q⁻¹Aᵀ)` and `R = -½(AQ⁻¹ + Q⁻¹Aᵀ)`, so that `A = (J - R)Q`.
pub fn jr_factors(a: &Mat, q: &Mat) -> Result<(Mat, Mat)> {
    let aq_inv = q
        .clone()
        .lu()
        .solve(&a.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular certificate".into()))?
        .transpose();
    let q_inv_at = aq_inv.transpose();
    Ok(((&aq_inv - &q_inv_at) * 0.5, (&aq_inv + &q_inv_at) * -0.5))
}

/// Structured form using the certificate from `AᵀQ + QA + I = 0`.
pub fn to_structured(sys: &StateSpace) -> Result<(StructuredRealization, StructuredTransform)> {
    let n = sys.order();
    to_structured_with(sys, &Mat::identity(n, n))
}

/// Structured form using the certificate from `AᵀQ + QA + W = 0` for a
/// positive definite `W`.
///
/// With `Q = LLᵀ` and coordinates `x̃ = Lᵀx` the state matrix becomes
/// `Ã = Lᵀ A L⁻ᵀ`, whose skew part is `LᵀJL` and whose negated symmetric part
/// is `LᵀRL = ½ L⁻¹ W L⁻ᵀ`.
pub fn to_structured_with(
    sys: &StateSpace,
    w: &Mat,
) -> Result<(StructuredRealization, StructuredTransform)> {
    let q = linalg::solve_lyapunov_dual(&sys.a, w)?;
    let l = linalg::cholesky_lower(&q)?;
    // L⁻¹Aᵀ, so A L⁻ᵀ is its transpose
    let l_inv_at = linalg::solve_lower(&l, &sys.a.transpose())?;
    let a_tilde = l.transpose() * l_inv_at.transpose();
    let ct = linalg::solve_lower(&l, &sys.c.transpose())?.transpose();
    let realization = StructuredRealization {
        jt: skew(&a_tilde),
        rt: -sym(&a_tilde),
        bt: l.transpose() * &sys.b,
        ct,
    };
    linalg::cholesky_lower(&realization.rt)?;
    Ok((realization, StructuredTransform { q, l }))
}

/// State-space model `(J - R, B, C)` of a manifold point.
pub fn point_to_state_space(p: &ManifoldPoint) -> Result<StateSpace> {
    let sys = StateSpace::new(p.state_matrix(), p.b().clone(), p.c().clone())?;
    let max_real = linalg::max_real_eigenvalue(&sys.a)?;
    if max_real >= 0.0 {
        return Err(Error::NotStable { max_real });
    }
    Ok(sys)
}

/// `A = (J - R)Q` with input and output matrices attached.
pub fn assemble_from_jrq(j: &Mat, r: &Mat, q: &Mat, b: &Mat, c: &Mat) -> Result<StateSpace> {
    let n = linalg::check_square(j, "J")?;
    if r.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::dims(format!(
            "J {:?}, R {:?} and Q {:?} must share one square shape",
            j.shape(),
            r.shape(),
            q.shape()
        )));
    }
    StateSpace::new((j - r) * q, b.clone(), c.clone())
}
