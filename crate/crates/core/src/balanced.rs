//! Square-root balanced truncation and singular perturbation.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::lti::{gramians, hankel_singular_values, psd_factor, HankelSpectrum, StateSpace};
use crate::manifold::ManifoldPoint;
use crate::structured::to_structured;

/// How the weak states of the balanced realization are removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BtMethod {
    /// Residualize the weak states (`ẋ₂ = 0`), matching the DC gain. The
    /// resulting feedthrough term is discarded so the reduced model is
    /// strictly proper.
    #[default]
    MatchDc,
    /// Keep the leading block of the balanced realization.
    Truncate,
}

impl std::str::FromStr for BtMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matchdc" | "match-dc" | "match_dc" | "spa" => Ok(Self::MatchDc),
            "truncate" | "truncation" => Ok(Self::Truncate),
            other => Err(Error::Domain(format!("unknown balanced truncation method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BtResult {
    pub reduced: StateSpace,
    /// Hankel singular values of the full model.
    pub sigmas: HankelSpectrum,
    pub method: BtMethod,
}

impl BtResult {
    /// `σ_{r+1}`, or 0 if the full model has no further states.
    pub fn sigma_next(&self) -> f64 {
        self.sigmas.sigma(self.reduced.order() + 1).unwrap_or(0.0)
    }

    /// `2 Σ_{k>r} σ_k`.
    pub fn tail_bound(&self) -> f64 {
        2.0 * self.sigmas.sigmas().iter().skip(self.reduced.order()).sum::<f64>()
    }
}

/// Balanced realization restricted to its controllable and observable part.
struct Balanced {
    sys: StateSpace,
    sigmas: Vec<f64>,
}

fn balance(sys: &StateSpace) -> Result<Balanced> {
    let (sc, so) = gramians(sys)?;
    let zc = psd_factor(&sc);
    let zo = psd_factor(&so);
    let svd = (zo.transpose() * &zc).svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma1 = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > 1e-14 * sigma1)
        .collect();
    let k = keep.len();
    if k == 0 {
        return Err(Error::DegenerateTruncation { gap: 0.0 });
    }

    let n = sys.order();
    let mut t = Mat::zeros(n, k);
    let mut t_inv = Mat::zeros(k, n);
    let zc_v = &zc * v_t.transpose();
    let zo_u = &zo * &u;
    for (col, &i) in keep.iter().enumerate() {
        let s = svd.singular_values[i];
        let scale = s.sqrt().recip();
        // first nonzero entry of each left singular vector is made positive
        let lead = u.column(i).iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        let sign = if lead < 0.0 { -scale } else { scale };
        t.set_column(col, &(zc_v.column(i) * sign));
        t_inv.set_row(col, &(zo_u.column(i).transpose() * sign));
    }
    let sigmas = keep.iter().map(|&i| svd.singular_values[i]).collect();
    let sys = StateSpace::new(&t_inv * &sys.a * &t, &t_inv * &sys.b, &sys.c * &t)?;
    Ok(Balanced { sys, sigmas })
}

/// Reduces a stable model to order `r` by balancing.
pub fn bt_reduce(sys: &StateSpace, r: usize, method: BtMethod) -> Result<BtResult> {
    let n = sys.order();
    if r == 0 || r > n {
        return Err(Error::Domain(format!("reduced order must satisfy 1 <= r <= {n}, got {r}")));
    }
    sys.ensure_stable()?;
    if r == n {
        let sigmas = hankel_singular_values(sys)?;
        return Ok(BtResult { reduced: sys.clone(), sigmas, method });
    }
    let bal = balance(sys)?;
    let k = bal.sigmas.len();
    if r > k {
        return Err(Error::Domain(format!(
            "reduced order {r} exceeds the minimal order {k}"
        )));
    }
    let sigma1 = bal.sigmas[0];
    if r < k {
        let gap = bal.sigmas[r - 1] - bal.sigmas[r];
        if gap < 1e-12 * sigma1 {
            return Err(Error::DegenerateTruncation { gap });
        }
    }

    let (a, b, c) = (&bal.sys.a, &bal.sys.b, &bal.sys.c);
    let a11 = a.view((0, 0), (r, r)).into_owned();
    let b1 = b.rows(0, r).into_owned();
    let c1 = c.columns(0, r).into_owned();
    let reduced = match method {
        BtMethod::Truncate => StateSpace::new(a11, b1, c1)?,
        BtMethod::MatchDc if r == k => StateSpace::new(a11, b1, c1)?,
        BtMethod::MatchDc => {
            let a12 = a.view((0, r), (r, k - r));
            let a21 = a.view((r, 0), (k - r, r));
            let a22 = a.view((r, r), (k - r, k - r)).into_owned();
            let b2 = b.rows(r, k - r);
            let c2 = c.columns(r, k - r);
            let lu = a22.lu();
            let rhs = {
                let mut m = Mat::zeros(k - r, r + b.ncols());
                m.view_mut((0, 0), (k - r, r)).copy_from(&a21);
                m.view_mut((0, r), (k - r, b.ncols())).copy_from(&b2);
                m
            };
            let sol = lu.solve(&rhs).ok_or(Error::DegenerateTruncation { gap: 0.0 })?;
            let x21 = sol.columns(0, r);
            let xb2 = sol.columns(r, b.ncols());
            StateSpace::new(a11 - a12 * x21, b1 - a12 * xb2, c1 - c2 * x21)?
        }
    };
    let mut sigmas = bal.sigmas;
    sigmas.resize(n, 0.0);
    Ok(BtResult { reduced, sigmas: HankelSpectrum(sigmas), method })
}

/// Balanced reduction followed by conversion to a manifold point.
pub fn bt_initial_point(sys: &StateSpace, r: usize, method: BtMethod) -> Result<(ManifoldPoint, BtResult)> {
    let bt = bt_reduce(sys, r, method)?;
    let (structured, _) = to_structured(&bt.reduced)?;
    Ok((structured.to_point()?, bt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{hinf_norm, log_grid, transfer_eval, HinfOptions};
    use crate::testutil::*;
    use nalgebra::dmatrix;
    use rand::SeedableRng;

    fn random_sys(seed: u64, n: usize) -> StateSpace {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        StateSpace::new(random_stable(&mut rng, n), random_mat(&mut rng, n, 2), random_mat(&mut rng, 2, n))
            .unwrap()
    }

    #[test]
    fn diagonal_example() {
        let sys = StateSpace::new(
            dmatrix![-1.0, 0.0; 0.0, -10.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, 1.0],
        )
        .unwrap();
        let bt = bt_reduce(&sys, 1, BtMethod::Truncate).unwrap();
        assert_eq!(bt.reduced.order(), 1);
        assert!(bt.reduced.is_stable());
        let hsv = hankel_singular_values(&sys).unwrap();
        for (a, b) in bt.sigmas.sigmas().iter().zip(hsv.sigmas()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_orders() {
        let sys = random_sys(1, 4);
        assert!(matches!(bt_reduce(&sys, 0, BtMethod::MatchDc), Err(Error::Domain(_))));
        assert!(matches!(bt_reduce(&sys, 5, BtMethod::MatchDc), Err(Error::Domain(_))));
        assert_eq!(bt_reduce(&sys, 4, BtMethod::MatchDc).unwrap().reduced.a, sys.a);
    }

    #[test]
    fn repeated_sigma_is_degenerate() {
        // two identical decoupled channels give equal Hankel singular values
        let sys = StateSpace::new(
            dmatrix![-1.0, 0.0; 0.0, -1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
        )
        .unwrap();
        assert!(matches!(bt_reduce(&sys, 1, BtMethod::Truncate), Err(Error::DegenerateTruncation { .. })));
    }

    #[test]
    fn truncation_obeys_error_bound_and_stays_stable() {
        for seed in 0..6 {
            let sys = random_sys(seed, 8);
            for r in 1..8 {
                let bt = match bt_reduce(&sys, r, BtMethod::Truncate) {
                    Ok(bt) => bt,
                    Err(Error::DegenerateTruncation { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                assert!(bt.reduced.is_stable());
                let err = hinf_norm(&sys.difference(&bt.reduced).unwrap(), HinfOptions::default())
                    .unwrap()
                    .value;
                assert!(err <= bt.tail_bound() * (1.0 + 1e-6) + 1e-10, "seed {seed} r {r}");
            }
        }
    }

    #[test]
    fn match_dc_preserves_dc_gain_up_to_feedthrough() {
        let sys = random_sys(3, 6);
        let bt = bt_reduce(&sys, 3, BtMethod::MatchDc).unwrap();
        assert!(bt.reduced.is_stable());
        // singular perturbation with the feedthrough retained matches G(0)
        let bal = balance(&sys).unwrap();
        let r = 3;
        let k = bal.sigmas.len();
        let a22 = bal.sys.a.view((r, r), (k - r, k - r)).into_owned();
        let d = -bal.sys.c.columns(r, k - r) * a22.lu().solve(&bal.sys.b.rows(r, k - r).into_owned()).unwrap();
        let dc = |s: &StateSpace| -&s.c * s.a.clone().lu().solve(&s.b).unwrap();
        let dc_full = dc(&sys);
        let dc_red = dc(&bt.reduced) + d;
        assert!((dc_full - dc_red).amax() < 1e-9);
    }

    #[test]
    fn balanced_gramians_are_equal_and_diagonal() {
        let sys = random_sys(9, 5);
        let bal = balance(&sys).unwrap();
        let (sc, so) = gramians(&bal.sys).unwrap();
        let diag = Mat::from_diagonal(&nalgebra::DVector::from_vec(bal.sigmas.clone()));
        assert!((&sc - &diag).amax() < 1e-9);
        assert!((&so - &diag).amax() < 1e-9);
    }

    #[test]
    fn initial_point_reproduces_reduced_model() {
        let sys = random_sys(4, 6);
        let (p, bt) = bt_initial_point(&sys, 2, BtMethod::MatchDc).unwrap();
        let via_point = crate::structured::point_to_state_space(&p).unwrap();
        for w in log_grid(1e-3, 1e3, 100) {
            let g1 = transfer_eval(&bt.reduced, w).unwrap();
            let g2 = transfer_eval(&via_point, w).unwrap();
            assert!((&g1 - &g2).norm() <= 1e-8 * (1.0 + g1.norm()));
        }
    }
}
