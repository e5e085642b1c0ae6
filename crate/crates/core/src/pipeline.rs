//! End-to-end reduction runs: balanced truncation alone, or balanced
//! truncation followed by trust-region refinement.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::balanced::{bt_initial_point, BtMethod};
use crate::error::{Error, Result};
use crate::lti::{hinf_norm, HinfOptions, StateSpace};
use crate::manifold::{norm, ManifoldPoint};
use crate::objective::{build_data_from_state_space, eval_f, riemannian_gradient, ObjectiveData};
use crate::optimizer::{trust_region_solve, IterationRecord, Status, TrustRegionConfig};
use crate::structured::point_to_state_space;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bt,
    Riemannian,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bt" => Ok(Method::Bt),
            "riemannian" => Ok(Method::Riemannian),
            other => Err(Error::Domain(format!("unknown method `{other}` (expected bt or riemannian)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bt => "bt",
            Method::Riemannian => "riemannian",
        })
    }
}

/// Summary of one reduction, one row of the benchmark tables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub method: Method,
    pub r: usize,
    pub h2_error: f64,
    pub hinf_error: f64,
    /// `σ_{r+1}` of the full model.
    pub sigma_next: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct ReduceOptions {
    pub order: usize,
    pub method: Method,
    pub bt_method: BtMethod,
    pub trust_region: TrustRegionConfig,
    pub hinf: HinfOptions,
    /// Start point for the trust-region run in place of balanced truncation.
    pub init: Option<ManifoldPoint>,
}

impl ReduceOptions {
    pub fn new(order: usize, method: Method) -> Self {
        Self {
            order,
            method,
            bt_method: BtMethod::default(),
            trust_region: TrustRegionConfig::default(),
            hinf: HinfOptions::default(),
            init: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub point: ManifoldPoint,
    pub reduced: StateSpace,
    pub report: RunReport,
    pub trace: Vec<IterationRecord>,
    /// Optimizer status (`None` for balanced truncation).
    pub status: Option<Status>,
}

fn grad_norm_at(data: &ObjectiveData, p: &ManifoldPoint) -> Result<(f64, f64)> {
    let (f, ws) = eval_f(data, p)?;
    Ok((f, norm(p, &riemannian_gradient(data, p, &ws))))
}

/// Reduces `full` with precomputed objective data.
pub fn reduce_with(full: &StateSpace, data: &ObjectiveData, opts: &ReduceOptions) -> Result<Reduction> {
    let start = Instant::now();
    let (bt_point, bt) = bt_initial_point(full, opts.order, opts.bt_method)?;
    let exact = opts.order == full.order() && opts.init.is_none();

    let (point, f, grad_norm, trace, status) = match opts.method {
        Method::Bt => {
            let (f, g) = grad_norm_at(data, &bt_point)?;
            (bt_point, f, g, Vec::new(), None)
        }
        Method::Riemannian => {
            let p0 = opts.init.clone().unwrap_or(bt_point);
            if p0.order() != opts.order {
                return Err(Error::dims(format!(
                    "initial point has order {}, requested {}",
                    p0.order(),
                    opts.order
                )));
            }
            let res = trust_region_solve(data, p0, &opts.trust_region)?;
            (res.point, res.value, res.grad_norm, res.trace, Some(res.status))
        }
    };

    let reduced = point_to_state_space(&point)?;
    // an order-n balanced reduction is the full model itself
    let (h2_error, hinf_error) = if exact && opts.method == Method::Bt {
        (0.0, 0.0)
    } else {
        (f.max(0.0).sqrt(), hinf_norm(&full.difference(&reduced)?, opts.hinf)?.value)
    };
    let iterations = trace.len();
    Ok(Reduction {
        point,
        reduced,
        report: RunReport {
            method: opts.method,
            r: opts.order,
            h2_error,
            hinf_error,
            sigma_next: bt.sigma_next(),
            grad_norm_final: grad_norm,
            iterations,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        trace,
        status,
    })
}

pub fn reduce(full: &StateSpace, opts: &ReduceOptions) -> Result<Reduction> {
    let data = build_data_from_state_space(full)?;
    reduce_with(full, &data, opts)
}
