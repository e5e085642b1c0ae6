//! Squared H² error between a fixed full-order model and a reduced model
//! parametrized on the manifold, with its Riemannian gradient and Hessian.
//!
//! For the full model `(Ã, B̃, C̃)` with `Ã = J̃ - R̃` and a reduced model
//! `(A_r, B_r, C_r)` with `A_r = J_r - R_r`:
//!
//! ```text
//! f = tr(C̃ Σc C̃ᵀ + C_r P C_rᵀ - 2 C_r Xᵀ C̃ᵀ)
//!   = tr(B̃ᵀ Σo B̃ + B_rᵀ Q B_r + 2 B̃ᵀ Y B_r)
//!
//! A_r P + P A_rᵀ + B_r B_rᵀ = 0        Ã X + X A_rᵀ + B̃ B_rᵀ = 0
//! A_rᵀ Q + Q A_r + C_rᵀ C_r = 0        Ãᵀ Y + Y A_r - C̃ᵀ C_r = 0
//! ```

use crate::error::{Error, Result};
use crate::linalg::{self, skew, sym, Mat, RealSchur};
use crate::manifold::{egrad_to_rgrad, AmbientVector, ManifoldPoint, TangentVector};
use crate::structured::{to_structured, StructuredRealization};
use crate::lti::StateSpace;

/// Quantities of the full model that do not depend on the reduced model.
#[derive(Clone, Debug)]
pub struct ObjectiveData {
    full: StructuredRealization,
    schur_a: RealSchur,
    schur_at: RealSchur,
    sigma_c: Mat,
    sigma_o: Mat,
    const_term: f64,
}

impl ObjectiveData {
    pub fn full(&self) -> &StructuredRealization {
        &self.full
    }

    pub fn sigma_c(&self) -> &Mat {
        &self.sigma_c
    }

    pub fn sigma_o(&self) -> &Mat {
        &self.sigma_o
    }

    /// `tr(C̃ Σc C̃ᵀ) = ‖G‖²_H²`.
    pub fn const_term(&self) -> f64 {
        self.const_term
    }

    /// `tr(B̃ᵀ Σo B̃)`, the same norm through the observability Gramian.
    pub fn const_term_dual(&self) -> f64 {
        (self.full.bt.transpose() * &self.sigma_o * &self.full.bt).trace()
    }

    pub fn inputs(&self) -> usize {
        self.full.bt.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.full.ct.nrows()
    }

    fn check_point(&self, p: &ManifoldPoint) -> Result<()> {
        if p.inputs() != self.inputs() || p.outputs() != self.outputs() {
            return Err(Error::dims(format!(
                "reduced model is {}x{} (p x m), full model is {}x{}",
                p.outputs(),
                p.inputs(),
                self.outputs(),
                self.inputs()
            )));
        }
        Ok(())
    }
}

/// One-time Gramian solves on the full structured model.
pub fn build_data(full: StructuredRealization) -> Result<ObjectiveData> {
    let a = full.state_matrix();
    let schur_a = RealSchur::new(&a)?;
    let max_real = schur_a.max_real();
    if max_real >= -linalg::EPS_STAB {
        return Err(Error::NotStable { max_real });
    }
    let schur_at = RealSchur::new(&a.transpose())?;
    let sigma_c = sym(&linalg::solve_sylvester_factored(
        &schur_a,
        &schur_at,
        &(&full.bt * full.bt.transpose()),
    )?);
    let sigma_o = sym(&linalg::solve_sylvester_factored(
        &schur_at,
        &schur_a,
        &(full.ct.transpose() * &full.ct),
    )?);
    let const_term = (&full.ct * &sigma_c * full.ct.transpose()).trace();
    Ok(ObjectiveData { full, schur_a, schur_at, sigma_c, sigma_o, const_term })
}

/// Convenience: structure a general stable model, then build the data.
pub fn build_data_from_state_space(sys: &StateSpace) -> Result<ObjectiveData> {
    let (full, _) = to_structured(sys)?;
    build_data(full)
}

/// Per-point solutions `P, Q, X, Y` and the Schur factors of `A_r`, `A_rᵀ`.
#[derive(Clone, Debug)]
pub struct PointWorkspace {
    pub p: Mat,
    pub q: Mat,
    pub x: Mat,
    pub y: Mat,
    schur_r: RealSchur,
    schur_rt: RealSchur,
    /// `QP + YᵀX`, half the Euclidean gradient with respect to `A_r`.
    g: Mat,
}

/// Directional derivatives `P', Q', X', Y'` along a tangent vector.
#[derive(Clone, Debug)]
pub struct DerivativeWorkspace {
    pub pp: Mat,
    pub qp: Mat,
    pub xp: Mat,
    pub yp: Mat,
}

/// Objective value at `p`, together with the workspace reused by the
/// gradient and Hessian at the same point.
pub fn eval_f(data: &ObjectiveData, p: &ManifoldPoint) -> Result<(f64, PointWorkspace)> {
    data.check_point(p)?;
    let a_r = p.state_matrix();
    let schur_r = RealSchur::new(&a_r)?;
    let schur_rt = RealSchur::new(&a_r.transpose())?;
    let (bt, ct) = (&data.full.bt, &data.full.ct);
    let (br, cr) = (p.b(), p.c());

    let pm = sym(&linalg::solve_sylvester_factored(&schur_r, &schur_rt, &(br * br.transpose()))?);
    let qm = sym(&linalg::solve_sylvester_factored(&schur_rt, &schur_r, &(cr.transpose() * cr))?);
    let x = linalg::solve_sylvester_factored(&data.schur_a, &schur_rt, &(bt * br.transpose()))?;
    let y = linalg::solve_sylvester_factored(&data.schur_at, &schur_r, &(-(ct.transpose() * cr)))?;

    let value = data.const_term + (cr * &pm * cr.transpose()).trace()
        - 2.0 * (cr * x.transpose() * ct.transpose()).trace();
    let g = &qm * &pm + y.transpose() * &x;
    let ws = PointWorkspace { p: pm, q: qm, x, y, schur_r, schur_rt, g };
    Ok((value.max(0.0), ws))
}

/// The observability-side expression of the same objective value.
pub fn eval_f_dual(data: &ObjectiveData, p: &ManifoldPoint, ws: &PointWorkspace) -> f64 {
    let (bt, br) = (&data.full.bt, p.b());
    data.const_term_dual()
        + (br.transpose() * &ws.q * br).trace()
        + 2.0 * (bt.transpose() * &ws.y * br).trace()
}

/// Gradient of the flat extension to the ambient space:
/// `2(QP + YᵀX, -(QP + YᵀX), QB_r + YᵀB̃, C_rP - C̃X)`.
pub fn euclidean_gradient(data: &ObjectiveData, p: &ManifoldPoint, ws: &PointWorkspace) -> AmbientVector {
    AmbientVector {
        j: &ws.g * 2.0,
        r: &ws.g * -2.0,
        b: (&ws.q * p.b() + ws.y.transpose() * &data.full.bt) * 2.0,
        c: (p.c() * &ws.p - &data.full.ct * &ws.x) * 2.0,
    }
}

pub fn riemannian_gradient(data: &ObjectiveData, p: &ManifoldPoint, ws: &PointWorkspace) -> TangentVector {
    egrad_to_rgrad(p, &euclidean_gradient(data, p, ws)).expect("gradient shapes follow the point")
}

/// Solves the differentiated Lyapunov/Sylvester equations along `t`.
pub fn derivative_workspace(
    data: &ObjectiveData,
    p: &ManifoldPoint,
    ws: &PointWorkspace,
    t: &TangentVector,
) -> Result<DerivativeWorkspace> {
    let da = &t.xi - &t.eta;
    let (db, dc) = (&t.zeta, &t.kappa);
    let (br, cr) = (p.b(), p.c());
    let (bt, ct) = (&data.full.bt, &data.full.ct);

    let wp = &da * &ws.p + &ws.p * da.transpose() + db * br.transpose() + br * db.transpose();
    let wq = da.transpose() * &ws.q + &ws.q * &da + dc.transpose() * cr + cr.transpose() * dc;
    let wx = &ws.x * da.transpose() + bt * db.transpose();
    let wy = &ws.y * &da - ct.transpose() * dc;

    Ok(DerivativeWorkspace {
        pp: sym(&linalg::solve_sylvester_factored(&ws.schur_r, &ws.schur_rt, &wp)?),
        qp: sym(&linalg::solve_sylvester_factored(&ws.schur_rt, &ws.schur_r, &wq)?),
        xp: linalg::solve_sylvester_factored(&data.schur_a, &ws.schur_rt, &wx)?,
        yp: linalg::solve_sylvester_factored(&data.schur_at, &ws.schur_r, &wy)?,
    })
}

/// Riemannian Hessian applied to `t`.
pub fn hessian_vec(
    data: &ObjectiveData,
    p: &ManifoldPoint,
    ws: &PointWorkspace,
    t: &TangentVector,
) -> Result<TangentVector> {
    let d = derivative_workspace(data, p, ws, t)?;
    let (br, cr) = (p.b(), p.c());
    let dg = &d.qp * &ws.p + &ws.q * &d.pp + d.yp.transpose() * &ws.x + ws.y.transpose() * &d.xp;
    let r = p.r();
    let eta = -(r * sym(&dg) * r) * 2.0 - sym(&(&t.eta * sym(&ws.g) * r)) * 2.0;
    Ok(TangentVector {
        xi: skew(&dg) * 2.0,
        eta: sym(&eta),
        zeta: (&d.qp * br + &ws.q * &t.zeta + d.yp.transpose() * &data.full.bt) * 2.0,
        kappa: (&t.kappa * &ws.p + cr * &d.pp - &data.full.ct * &d.xp) * 2.0,
    })
}
