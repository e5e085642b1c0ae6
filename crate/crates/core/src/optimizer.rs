//! Riemannian trust-region method with a Steihaug–Toint truncated CG
//! subproblem solver.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::manifold::{exp_map, inner, norm, random_tangent, ManifoldPoint, TangentVector};
use crate::objective::{eval_f, hessian_vec, riemannian_gradient, ObjectiveData, PointWorkspace};

/// Trust-region parameters. `None` fields are resolved from the problem at
/// the start of a run (see [`TrustRegionConfig::resolve`]).
#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegionConfig {
    /// Maximum radius `Δ̄`; defaults to `sqrt(dim M)`.
    pub delta_bar: Option<f64>,
    /// Initial radius `Δ₀`; defaults to `Δ̄ / 8`.
    pub delta0: Option<f64>,
    /// Acceptance threshold `γ'` in `[0, 1/4)`.
    pub gamma_prime: f64,
    pub max_iters: usize,
    /// Gradient-norm stopping threshold; defaults to `1e-6 · max(1, ‖grad f(p₀)‖)`.
    pub grad_tol: Option<f64>,
    /// Inner CG iteration cap; defaults to `dim M`.
    pub tcg_max_inner: Option<usize>,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    /// Number of perturbed restarts after convergence (0 disables).
    pub restarts: usize,
    pub restart_seed: u64,
    /// Keep every accepted iterate in the result.
    pub keep_iterates: bool,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            delta_bar: None,
            delta0: None,
            gamma_prime: 0.1,
            max_iters: 500,
            grad_tol: None,
            tcg_max_inner: None,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            restarts: 0,
            restart_seed: 0,
            keep_iterates: false,
        }
    }
}

/// Fully resolved parameters for one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub delta_bar: f64,
    pub delta0: f64,
    pub gamma_prime: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub tcg: TcgParams,
}

impl TrustRegionConfig {
    pub fn resolve(&self, dim: usize, initial_grad_norm: f64) -> Result<ResolvedConfig> {
        let delta_bar = self.delta_bar.unwrap_or((dim as f64).sqrt());
        let delta0 = self.delta0.unwrap_or(delta_bar / 8.0);
        let grad_tol = self.grad_tol.unwrap_or(1e-6 * initial_grad_norm.max(1.0));
        if !(delta_bar > 0.0) || !(delta0 > 0.0 && delta0 < delta_bar) {
            return Err(Error::Domain(format!(
                "need 0 < delta0 < delta_bar (got {delta0}, {delta_bar})"
            )));
        }
        if !(0.0..0.25).contains(&self.gamma_prime) {
            return Err(Error::Domain(format!(
                "gamma' must lie in [0, 1/4), got {}",
                self.gamma_prime
            )));
        }
        if !(grad_tol > 0.0) || !(self.tcg_kappa > 0.0) || !(self.tcg_theta > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        Ok(ResolvedConfig {
            delta_bar,
            delta0,
            gamma_prime: self.gamma_prime,
            max_iters: self.max_iters,
            grad_tol,
            tcg: TcgParams {
                max_inner: self.tcg_max_inner.unwrap_or(dim).max(1),
                kappa: self.tcg_kappa,
                theta: self.tcg_theta,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcgParams {
    pub max_inner: usize,
    pub kappa: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcgStopReason {
    NegativeCurvature,
    ExceededTrustRegion,
    LinearConvergence,
    SuperlinearConvergence,
    MaxInnerIterations,
    ModelIncreased,
}

impl TcgStopReason {
    /// The step was pushed to the trust-region boundary.
    pub fn on_boundary(self) -> bool {
        matches!(self, Self::NegativeCurvature | Self::ExceededTrustRegion)
    }
}

impl fmt::Display for TcgStopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NegativeCurvature => "negative_curvature",
            Self::ExceededTrustRegion => "exceeded_trust_region",
            Self::LinearConvergence => "linear_convergence",
            Self::SuperlinearConvergence => "superlinear_convergence",
            Self::MaxInnerIterations => "max_inner_iterations",
            Self::ModelIncreased => "model_increased",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TcgResult {
    pub step: TangentVector,
    /// Hessian applied to `step`, accumulated along the CG recursion.
    pub hess_step: TangentVector,
    pub reason: TcgStopReason,
    pub inner_iterations: usize,
}

/// Approximately minimizes `⟨g, s⟩ + ½⟨H s, s⟩` over `‖s‖ ≤ Δ`.
///
/// The first iterate is the Cauchy point, so the model decrease is never
/// worse than along steepest descent.
pub fn truncated_cg<H>(
    p: &ManifoldPoint,
    grad: &TangentVector,
    mut hess: H,
    delta: f64,
    params: &TcgParams,
) -> Result<TcgResult>
where
    H: FnMut(&TangentVector) -> Result<TangentVector>,
{
    let mut eta = TangentVector::zeros(p);
    let mut h_eta = TangentVector::zeros(p);
    let mut r = grad.clone();
    let mut r_r = inner(p, &r, &r);
    let grad_norm = r_r.sqrt();
    let mut d = -&r;
    let mut e_pe = 0.0;
    let mut model = 0.0;
    let stop_at = grad_norm * grad_norm.powf(params.theta).min(params.kappa);
    let delta2 = delta * delta;

    for j in 0..params.max_inner {
        let hd = hess(&d)?;
        let d_hd = inner(p, &d, &hd);
        let e_pd = inner(p, &eta, &d);
        let d_pd = inner(p, &d, &d);
        let alpha = r_r / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

        if d_hd <= 0.0 || e_pe_new >= delta2 {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (delta2 - e_pe)).max(0.0).sqrt()) / d_pd;
            eta.axpy(tau, &d);
            h_eta.axpy(tau, &hd);
            let reason = if d_hd <= 0.0 {
                TcgStopReason::NegativeCurvature
            } else {
                TcgStopReason::ExceededTrustRegion
            };
            return Ok(TcgResult { step: eta, hess_step: h_eta, reason, inner_iterations: j + 1 });
        }

        let mut eta_new = eta.clone();
        eta_new.axpy(alpha, &d);
        let mut h_eta_new = h_eta.clone();
        h_eta_new.axpy(alpha, &hd);
        let model_new = inner(p, grad, &eta_new) + 0.5 * inner(p, &eta_new, &h_eta_new);
        if model_new >= model && j > 0 {
            return Ok(TcgResult {
                step: eta,
                hess_step: h_eta,
                reason: TcgStopReason::ModelIncreased,
                inner_iterations: j + 1,
            });
        }
        eta = eta_new;
        h_eta = h_eta_new;
        model = model_new;
        e_pe = e_pe_new;

        r.axpy(alpha, &hd);
        let r_r_new = inner(p, &r, &r);
        if r_r_new.sqrt() <= stop_at {
            let reason = if params.kappa < grad_norm.powf(params.theta) {
                TcgStopReason::LinearConvergence
            } else {
                TcgStopReason::SuperlinearConvergence
            };
            return Ok(TcgResult { step: eta, hess_step: h_eta, reason, inner_iterations: j + 1 });
        }
        let beta = r_r_new / r_r;
        r_r = r_r_new;
        d = &d.scale(beta) - &r;
    }
    Ok(TcgResult {
        step: eta,
        hess_step: h_eta,
        reason: TcgStopReason::MaxInnerIterations,
        inner_iterations: params.max_inner,
    })
}

/// Quadratic model `f₀ + ⟨grad, s⟩ + ½⟨H s, s⟩`.
pub fn model_value<H>(
    p: &ManifoldPoint,
    f0: f64,
    grad: &TangentVector,
    mut hess: H,
    step: &TangentVector,
) -> Result<f64>
where
    H: FnMut(&TangentVector) -> Result<TangentVector>,
{
    let hs = hess(step)?;
    Ok(f0 + inner(p, grad, step) + 0.5 * inner(p, &hs, step))
}

/// One outer iteration of the trust-region method.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Objective at the iterate entering this iteration.
    pub f_value: f64,
    pub grad_norm: f64,
    /// Radius `Δ_k` used for the subproblem.
    pub delta: f64,
    /// Actual-to-predicted decrease ratio `γ_k`.
    pub rho: f64,
    pub step_accepted: bool,
    pub tcg_stop_reason: TcgStopReason,
    pub tcg_inner: usize,
    /// Objective at the candidate point (infinite if it could not be evaluated).
    pub f_candidate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterationsReached,
    /// The radius collapsed below machine precision before the gradient
    /// tolerance was met.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct TrustRegionResult {
    pub point: ManifoldPoint,
    pub value: f64,
    pub grad_norm: f64,
    pub status: Status,
    pub config: ResolvedConfig,
    pub trace: Vec<IterationRecord>,
    /// Start point and every accepted iterate, if requested.
    pub iterates: Vec<ManifoldPoint>,
}

impl TrustRegionResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn accepted_steps(&self) -> usize {
        self.trace.iter().filter(|r| r.step_accepted).count()
    }
}

struct Iterate {
    point: ManifoldPoint,
    value: f64,
    ws: PointWorkspace,
    grad: TangentVector,
    grad_norm: f64,
}

impl Iterate {
    fn new(data: &ObjectiveData, point: ManifoldPoint) -> Result<Self> {
        let (value, ws) = eval_f(data, &point)?;
        let grad = riemannian_gradient(data, &point, &ws);
        let grad_norm = norm(&point, &grad);
        Ok(Self { point, value, ws, grad, grad_norm })
    }
}

/// Minimizes the squared H² error over the manifold starting from `p0`.
pub fn trust_region_solve(
    data: &ObjectiveData,
    p0: ManifoldPoint,
    cfg: &TrustRegionConfig,
) -> Result<TrustRegionResult> {
    let start = Iterate::new(data, p0)?;
    let resolved = cfg.resolve(start.point.dimension(), start.grad_norm)?;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let keep = cfg.keep_iterates.then_some(&mut iterates);
    let (mut best, status) = run(data, start, &resolved, &mut trace, keep)?;

    for restart in 0..cfg.restarts {
        if status != Status::Converged {
            break;
        }
        let kick = random_tangent(&best.point, cfg.restart_seed.wrapping_add(restart as u64))
            .scale(0.01 * resolved.delta0);
        let Ok(perturbed) = exp_map(&best.point, &kick).and_then(|p| Iterate::new(data, p)) else {
            break;
        };
        let mut sub_trace = Vec::new();
        let keep = cfg.keep_iterates.then_some(&mut iterates);
        let (candidate, sub_status) = run(data, perturbed, &resolved, &mut sub_trace, keep)?;
        let offset = trace.len();
        trace.extend(sub_trace.into_iter().map(|mut r| {
            r.k += offset;
            r
        }));
        if candidate.value < best.value && sub_status == Status::Converged {
            best = candidate;
        }
    }

    Ok(TrustRegionResult {
        value: best.value,
        grad_norm: best.grad_norm,
        point: best.point,
        status,
        config: resolved,
        trace,
        iterates,
    })
}

fn run(
    data: &ObjectiveData,
    mut it: Iterate,
    cfg: &ResolvedConfig,
    trace: &mut Vec<IterationRecord>,
    mut iterates: Option<&mut Vec<ManifoldPoint>>,
) -> Result<(Iterate, Status)> {
    if let Some(v) = iterates.as_deref_mut() {
        v.push(it.point.clone());
    }
    let mut delta = cfg.delta0;
    for k in 0..cfg.max_iters {
        if it.grad_norm <= cfg.grad_tol {
            return Ok((it, Status::Converged));
        }
        if delta < f64::EPSILON * cfg.delta_bar {
            return Ok((it, Status::Stalled));
        }

        let tcg = truncated_cg(
            &it.point,
            &it.grad,
            |t| hessian_vec(data, &it.point, &it.ws, t),
            delta,
            &cfg.tcg,
        )?;
        let model_decrease =
            -(inner(&it.point, &it.grad, &tcg.step) + 0.5 * inner(&it.point, &tcg.hess_step, &tcg.step));

        let candidate = exp_map(&it.point, &tcg.step).and_then(|p| Iterate::new(data, p));
        let f_candidate = candidate.as_ref().map_or(f64::INFINITY, |c| c.value);
        let rho = if !f_candidate.is_finite() {
            f64::NEG_INFINITY
        } else if model_decrease.abs() < 1e-14 * (1.0 + it.value.abs()) {
            1.0
        } else {
            (it.value - f_candidate) / model_decrease
        };

        let next_delta = if rho < 0.25 {
            delta / 4.0
        } else if rho > 0.75 && tcg.reason.on_boundary() {
            (2.0 * delta).min(cfg.delta_bar)
        } else {
            delta
        };
        let accepted = rho > cfg.gamma_prime && f_candidate <= it.value;

        trace.push(IterationRecord {
            k,
            f_value: it.value,
            grad_norm: it.grad_norm,
            delta,
            rho,
            step_accepted: accepted,
            tcg_stop_reason: tcg.reason,
            tcg_inner: tcg.inner_iterations,
            f_candidate,
        });
        if accepted {
            it = candidate.expect("accepted candidates were evaluated");
            if let Some(v) = iterates.as_deref_mut() {
                v.push(it.point.clone());
            }
        }
        delta = next_delta;
    }
    let status = if it.grad_norm <= cfg.grad_tol {
        Status::Converged
    } else {
        Status::MaxIterationsReached
    };
    Ok((it, status))
}

/// Trace as CSV: `k,f,grad_norm,delta,rho,accepted,tcg_reason`.
pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("k,f,grad_norm,delta,rho,accepted,tcg_reason\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{}",
            r.k, r.f_value, r.grad_norm, r.delta, r.rho, r.step_accepted, r.tcg_stop_reason
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::skew;
    use crate::testutil::*;
    use rand::SeedableRng;

    fn point(seed: u64, r: usize) -> ManifoldPoint {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ManifoldPoint::new(
            skew(&random_mat(&mut rng, r, r)),
            random_spd(&mut rng, r),
            random_mat(&mut rng, r, 1),
            random_mat(&mut rng, 1, r),
        )
        .unwrap()
    }

    fn params(max_inner: usize) -> TcgParams {
        TcgParams { max_inner, kappa: 0.1, theta: 1.0 }
    }

    #[test]
    fn identity_hessian_gives_newton_step() {
        let p = point(1, 2);
        let g = random_tangent(&p, 3).scale(0.5);
        let res = truncated_cg(&p, &g, |t| Ok(t.clone()), 1e6, &params(p.dimension())).unwrap();
        assert!(norm(&p, &(&res.step + &g)) < 1e-12);
    }

    #[test]
    fn negative_curvature_hits_boundary() {
        let p = point(2, 2);
        let g = random_tangent(&p, 4);
        let res = truncated_cg(&p, &g, |t| Ok(t.scale(-1.0)), 0.3, &params(10)).unwrap();
        assert_eq!(res.reason, TcgStopReason::NegativeCurvature);
        assert!((norm(&p, &res.step) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn small_radius_exceeds_region() {
        let p = point(2, 2);
        let g = random_tangent(&p, 5);
        let res = truncated_cg(&p, &g, |t| Ok(t.clone()), 0.1, &params(10)).unwrap();
        assert_eq!(res.reason, TcgStopReason::ExceededTrustRegion);
        assert!((norm(&p, &res.step) - 0.1).abs() < 1e-12);
    }

    /// Oracle: the interior minimizer of the model for an SPD operator is
    /// `-H⁻¹ g`, computed here by assembling the operator in an orthonormal
    /// basis of the tangent space and solving densely.
    #[test]
    fn interior_solution_matches_dense_solve() {
        let p = point(3, 2);
        let dim = p.dimension();
        // orthonormalize random tangents with respect to the metric
        let mut basis: Vec<TangentVector> = Vec::new();
        let mut seed = 0;
        while basis.len() < dim {
            let mut t = random_tangent(&p, 500 + seed);
            seed += 1;
            for b in &basis {
                let c = inner(&p, &t, b);
                t.axpy(-c, b);
            }
            let n = norm(&p, &t);
            if n > 1e-6 {
                basis.push(t.scale(1.0 / n));
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let spd = random_spd(&mut rng, dim);
        let apply = |t: &TangentVector| -> Result<TangentVector> {
            let coords: Vec<f64> = basis.iter().map(|b| inner(&p, t, b)).collect();
            let mut out = TangentVector::zeros(&p);
            for (i, b) in basis.iter().enumerate() {
                let v: f64 = (0..dim).map(|j| spd[(i, j)] * coords[j]).sum();
                out.axpy(v, b);
            }
            Ok(out)
        };
        let g = random_tangent(&p, 9).scale(1e-3);
        let tight = TcgParams { max_inner: 10 * dim, kappa: 1e-12, theta: 1.0 };
        let res = truncated_cg(&p, &g, apply, 1e6, &tight).unwrap();
        let gc = nalgebra::DVector::from_iterator(dim, basis.iter().map(|b| inner(&p, &g, b)));
        let sol = spd.clone().lu().solve(&(-gc)).unwrap();
        let mut expected = TangentVector::zeros(&p);
        for (i, b) in basis.iter().enumerate() {
            expected.axpy(sol[i], b);
        }
        assert!(norm(&p, &(&res.step - &expected)) <= 1e-8 * norm(&p, &expected));
    }

    #[test]
    fn model_value_examples() {
        let p = point(4, 3);
        let g = random_tangent(&p, 1);
        let zero = TangentVector::zeros(&p);
        assert_eq!(model_value(&p, 2.5, &g, |t| Ok(t.clone()), &zero).unwrap(), 2.5);
        let s = random_tangent(&p, 2);
        let linear = model_value(&p, 1.0, &g, |_| Ok(TangentVector::zeros(&p)), &s).unwrap();
        assert!((linear - (1.0 + inner(&p, &g, &s))).abs() < 1e-15);

        // explicit trace arithmetic with H = 3·Id
        let ri = p.r_inv();
        let quad = s.xi.norm_squared()
            + (ri * &s.eta * ri * &s.eta).trace()
            + s.zeta.norm_squared()
            + s.kappa.norm_squared();
        let lin = (g.xi.transpose() * &s.xi).trace()
            + (ri * &g.eta * ri * &s.eta).trace()
            + (g.zeta.transpose() * &s.zeta).trace()
            + (g.kappa.transpose() * &s.kappa).trace();
        let mv = model_value(&p, 0.5, &g, |t| Ok(t.scale(3.0)), &s).unwrap();
        assert!((mv - (0.5 + lin + 1.5 * quad)).abs() < 1e-13);
    }

    #[test]
    fn config_validation() {
        let bad = TrustRegionConfig { gamma_prime: 0.3, ..Default::default() };
        assert!(bad.resolve(10, 1.0).is_err());
        let bad = TrustRegionConfig { delta0: Some(5.0), delta_bar: Some(1.0), ..Default::default() };
        assert!(bad.resolve(10, 1.0).is_err());
        let ok = TrustRegionConfig::default().resolve(16, 0.5).unwrap();
        assert_eq!(ok.delta_bar, 4.0);
        assert_eq!(ok.delta0, 0.5);
        assert_eq!(ok.grad_tol, 1e-6);
        assert_eq!(ok.tcg.max_inner, 16);
    }

    #[test]
    fn trace_csv_header() {
        let csv = trace_csv(&[]);
        assert_eq!(csv, "k,f,grad_norm,delta,rho,accepted,tcg_reason\n");
    }
}
