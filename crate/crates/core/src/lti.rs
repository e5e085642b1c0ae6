//! Continuous-time LTI analysis: transfer functions, Gramians, system norms,
//! Hankel singular values, frequency responses and time simulation.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, RealSchur};

pub type CMat = DMatrix<Complex<f64>>;

/// State-space realization `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let n = linalg::check_square(&a, "A")?;
        if b.nrows() != n {
            return Err(Error::dims(format!("B has {} rows, A is {n}x{n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::dims(format!("C has {} columns, A is {n}x{n}", c.ncols())));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::dims("system needs at least one input and one output"));
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_stable(&self) -> bool {
        linalg::is_stable(&self.a, 0.0)
    }

    pub fn ensure_stable(&self) -> Result<()> {
        let max_real = linalg::max_real_eigenvalue(&self.a)?;
        if max_real >= -linalg::EPS_STAB {
            return Err(Error::NotStable { max_real });
        }
        Ok(())
    }

    /// Similarity transform `x = T z`: `(T⁻¹AT, T⁻¹B, CT)`.
    pub fn similarity(&self, t: &Mat) -> Result<Self> {
        let lu = t.clone().lu();
        let ta = lu
            .solve(&(&self.a * t))
            .ok_or_else(|| Error::Domain("singular similarity transform".into()))?;
        let tb = lu
            .solve(&self.b)
            .ok_or_else(|| Error::Domain("singular similarity transform".into()))?;
        Self::new(ta, tb, &self.c * t)
    }

    /// Error system realizing `G_self - G_other`.
    pub fn difference(&self, other: &StateSpace) -> Result<Self> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::dims(format!(
                "systems have I/O sizes {}x{} and {}x{}",
                self.outputs(),
                self.inputs(),
                other.outputs(),
                other.inputs()
            )));
        }
        let (n, r) = (self.order(), other.order());
        let mut a = Mat::zeros(n + r, n + r);
        a.view_mut((0, 0), (n, n)).copy_from(&self.a);
        a.view_mut((n, n), (r, r)).copy_from(&other.a);
        let mut b = Mat::zeros(n + r, self.inputs());
        b.view_mut((0, 0), (n, self.inputs())).copy_from(&self.b);
        b.view_mut((n, 0), (r, self.inputs())).copy_from(&other.b);
        let mut c = Mat::zeros(self.outputs(), n + r);
        c.view_mut((0, 0), (self.outputs(), n)).copy_from(&self.c);
        c.view_mut((0, n), (self.outputs(), r)).copy_from(&(-&other.c));
        Self::new(a, b, c)
    }
}

/// Evaluates `G(iω) = C (iωI - A)⁻¹ B`.
pub fn transfer_eval(sys: &StateSpace, omega: f64) -> Result<CMat> {
    let n = sys.order();
    let resolvent = CMat::from_fn(n, n, |i, j| {
        let diag = if i == j { Complex::new(0.0, omega) } else { Complex::new(0.0, 0.0) };
        diag - Complex::new(sys.a[(i, j)], 0.0)
    });
    let b = sys.b.map(|v| Complex::new(v, 0.0));
    let x = resolvent
        .lu()
        .solve(&b)
        .ok_or(Error::SingularResolvent { omega })?;
    let g = sys.c.map(|v| Complex::new(v, 0.0)) * x;
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularResolvent { omega });
    }
    Ok(g)
}

fn sigma_max(sys: &StateSpace, omega: f64) -> Result<f64> {
    let g = transfer_eval(sys, omega)?;
    Ok(g.singular_values().max())
}

/// Controllability and observability Gramians.
pub fn gramians(sys: &StateSpace) -> Result<(Mat, Mat)> {
    let wc = &sys.b * sys.b.transpose();
    let wo = sys.c.transpose() * &sys.c;
    let sc = linalg::solve_lyapunov_primal(&sys.a, &wc)?;
    let so = linalg::solve_lyapunov_dual(&sys.a, &wo)?;
    Ok((sc, so))
}

/// Squared H² norm via the controllability Gramian, `tr(C Σc Cᵀ)`.
pub fn h2_norm_squared(sys: &StateSpace) -> Result<f64> {
    let sc = linalg::solve_lyapunov_primal(&sys.a, &(&sys.b * sys.b.transpose()))?;
    Ok((&sys.c * sc * sys.c.transpose()).trace())
}

/// Squared H² norm via the observability Gramian, `tr(Bᵀ Σo B)`.
pub fn h2_norm_squared_dual(sys: &StateSpace) -> Result<f64> {
    let so = linalg::solve_lyapunov_dual(&sys.a, &(sys.c.transpose() * &sys.c))?;
    Ok((sys.b.transpose() * so * &sys.b).trace())
}

pub fn h2_norm(sys: &StateSpace) -> Result<f64> {
    Ok(h2_norm_squared(sys)?.max(0.0).sqrt())
}

/// `‖G_full - G_reduced‖_H²` computed on the augmented error system.
pub fn h2_error_norm(full: &StateSpace, reduced: &StateSpace) -> Result<f64> {
    h2_norm(&full.difference(reduced)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfOptions {
    /// Relative accuracy of the returned value.
    pub tol: f64,
    /// Skip the Hamiltonian iteration and use the refined frequency grid only.
    pub grid_only: bool,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self { tol: 1e-6, grid_only: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfNorm {
    pub value: f64,
    /// Frequency (rad/s) at which the peak gain is attained.
    pub omega: f64,
}

const HINF_GRID_POINTS: usize = 400;

/// Peak gain `sup_ω σ̄(G(iω))`.
///
/// A log-spaced scan over `[1e-3, 1e3]` rad/s (plus DC and the pole
/// frequencies) gives a lower bound, which is raised with the
/// Boyd–Balakrishnan/Bruinsma–Steinbuch level-set iteration: at level `γ`
/// the imaginary-axis eigenvalues of the Hamiltonian
/// `[[A, BBᵀ/γ], [-CᵀC/γ, -Aᵀ]]` are exactly the frequencies where some
/// singular value of `G(iω)` equals `γ`.
pub fn hinf_norm(sys: &StateSpace, opts: HinfOptions) -> Result<HinfNorm> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    sys.ensure_stable()?;
    if sys.b.amax() == 0.0 || sys.c.amax() == 0.0 {
        return Ok(HinfNorm { value: 0.0, omega: 0.0 });
    }

    let mut freqs: Vec<f64> = vec![0.0];
    freqs.extend(log_grid(1e-3, 1e3, HINF_GRID_POINTS));
    let poles = RealSchur::new(&sys.a)?.eigenvalues();
    freqs.extend(poles.iter().map(|z| z.im.abs()).filter(|&w| w > 0.0));
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();

    let mut best = HinfNorm { value: -1.0, omega: 0.0 };
    let mut best_idx = 0;
    for (i, &w) in freqs.iter().enumerate() {
        let s = sigma_max(sys, w)?;
        if s > best.value {
            best = HinfNorm { value: s, omega: w };
            best_idx = i;
        }
    }
    let lo = if best_idx == 0 { 0.0 } else { freqs[best_idx - 1] };
    let hi = freqs.get(best_idx + 1).copied().unwrap_or(best.omega * 2.0 + 1.0);
    best = golden_refine(sys, lo, hi, best)?;

    if opts.grid_only {
        return Ok(best);
    }

    let n = sys.order();
    let bb = &sys.b * sys.b.transpose();
    let cc = sys.c.transpose() * &sys.c;
    for _ in 0..60 {
        let gamma = (1.0 + 2.0 * opts.tol) * best.value;
        let mut h = Mat::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&sys.a);
        h.view_mut((0, n), (n, n)).copy_from(&(&bb / gamma));
        h.view_mut((n, 0), (n, n)).copy_from(&(-&cc / gamma));
        h.view_mut((n, n), (n, n)).copy_from(&(-sys.a.transpose()));
        let tol_re = 1e-7 * h.norm().max(1.0);
        let mut crossings: Vec<f64> = match RealSchur::new(&h) {
            Ok(s) => s
                .eigenvalues()
                .iter()
                .filter(|z| z.re.abs() <= tol_re && z.im >= 0.0)
                .map(|z| z.im)
                .collect(),
            Err(_) => break,
        };
        if crossings.is_empty() {
            break;
        }
        crossings.sort_by(f64::total_cmp);
        let mut probes = crossings.clone();
        probes.extend(crossings.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        if crossings.len() == 1 {
            probes.push(0.0);
        }
        let mut improved = best;
        for w in probes {
            let s = sigma_max(sys, w)?;
            if s > improved.value {
                improved = HinfNorm { value: s, omega: w };
            }
        }
        if improved.value <= best.value * (1.0 + 1e-14) {
            break;
        }
        best = improved;
    }
    Ok(best)
}

fn golden_refine(sys: &StateSpace, mut lo: f64, mut hi: f64, best: HinfNorm) -> Result<HinfNorm> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = best;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = sigma_max(sys, x1)?;
    let mut f2 = sigma_max(sys, x2)?;
    for _ in 0..80 {
        if hi - lo <= 1e-12 * hi.max(1e-12) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = sigma_max(sys, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = sigma_max(sys, x2)?;
        }
    }
    for (w, s) in [(x1, f1), (x2, f2)] {
        if s > best.value {
            best = HinfNorm { value: s, omega: w };
        }
    }
    Ok(best)
}

pub fn log_grid(wmin: f64, wmax: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![wmin];
    }
    let (l0, l1) = (wmin.log10(), wmax.log10());
    (0..points)
        .map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / (points - 1) as f64))
        .collect()
}

/// Hankel singular values, sorted descending.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelSpectrum(pub Vec<f64>);

impl HankelSpectrum {
    pub fn sigmas(&self) -> &[f64] {
        &self.0
    }

    /// `σ_k` with 1-based index, as in the usual notation.
    pub fn sigma(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }
}

/// Square-root factor `Z` with `S = Z Zᵀ` for a positive semidefinite `S`,
/// built from the symmetric eigendecomposition (negative round-off clipped).
pub fn psd_factor(s: &Mat) -> Mat {
    let eig = linalg::sym(s).symmetric_eigen();
    let vecs = eig.eigenvectors;
    Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| {
        vecs[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt()
    })
}

pub fn hankel_singular_values(sys: &StateSpace) -> Result<HankelSpectrum> {
    let (sc, so) = gramians(sys)?;
    let zc = psd_factor(&sc);
    let zo = psd_factor(&so);
    let mut sigmas: Vec<f64> = (zo.transpose() * zc).singular_values().iter().copied().collect();
    sigmas.sort_by(|a, b| b.total_cmp(a));
    Ok(HankelSpectrum(sigmas))
}

/// Frequency response on a grid.
#[derive(Clone, Debug)]
pub struct FrequencyResponse {
    pub frequencies: Vec<f64>,
    pub values: Vec<CMat>,
}

impl FrequencyResponse {
    pub fn outputs(&self) -> usize {
        self.values.first().map_or(0, |g| g.nrows())
    }

    pub fn inputs(&self) -> usize {
        self.values.first().map_or(0, |g| g.ncols())
    }

    pub fn magnitude_db(&self, k: usize, i: usize, j: usize) -> f64 {
        20.0 * self.values[k][(i, j)].norm().log10()
    }

    pub fn phase_deg(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[k][(i, j)].arg().to_degrees()
    }

    fn header(&self, prefix: &str) -> Vec<String> {
        let mut cols = Vec::new();
        for kind in ["mag_db", "phase_deg"] {
            for i in 0..self.outputs() {
                for j in 0..self.inputs() {
                    cols.push(format!("{prefix}{kind}_{}{}", i + 1, j + 1));
                }
            }
        }
        cols
    }

    fn row(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.outputs() {
            for j in 0..self.inputs() {
                out.push(self.magnitude_db(k, i, j));
            }
        }
        for i in 0..self.outputs() {
            for j in 0..self.inputs() {
                out.push(self.phase_deg(k, i, j));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        bode_csv(std::slice::from_ref(self)).expect("single response is always consistent")
    }
}

/// CSV with one `omega` column followed by magnitude and phase columns of
/// each response. With several responses the columns are prefixed `s<k>_`.
pub fn bode_csv(responses: &[FrequencyResponse]) -> Result<String> {
    let first = responses
        .first()
        .ok_or_else(|| Error::Domain("no frequency responses given".into()))?;
    if responses.iter().any(|r| r.frequencies != first.frequencies) {
        return Err(Error::Domain("responses use different frequency grids".into()));
    }
    let multi = responses.len() > 1;
    let mut header = vec!["omega".to_string()];
    for (s, r) in responses.iter().enumerate() {
        let prefix = if multi { format!("s{s}_") } else { String::new() };
        header.extend(r.header(&prefix));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, w) in first.frequencies.iter().enumerate() {
        let mut line = format!("{w:e}");
        for r in responses {
            for v in r.row(k) {
                let _ = write!(line, ",{v:e}");
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Log-spaced frequency response between `wmin` and `wmax`.
pub fn bode_data(sys: &StateSpace, wmin: f64, wmax: f64, points: usize) -> Result<FrequencyResponse> {
    if !(wmin > 0.0) || !(wmax > wmin) || points < 2 {
        return Err(Error::Domain(format!(
            "need 0 < wmin < wmax and points >= 2 (got {wmin}, {wmax}, {points})"
        )));
    }
    let frequencies = log_grid(wmin, wmax, points);
    let values = frequencies
        .iter()
        .map(|&w| transfer_eval(sys, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyResponse { frequencies, values })
}

/// Uniformly sampled input/output trajectory.
#[derive(Clone, Debug)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

impl SimulationTrace {
    pub fn to_csv(&self) -> String {
        let m = self.inputs.first().map_or(0, |u| u.len());
        let p = self.outputs.first().map_or(0, |y| y.len());
        let mut out = String::from("t");
        for i in 0..m {
            let _ = write!(out, ",u{}", i + 1);
        }
        for i in 0..p {
            let _ = write!(out, ",y{}", i + 1);
        }
        out.push('\n');
        for ((t, u), y) in self.times.iter().zip(&self.inputs).zip(&self.outputs) {
            let _ = write!(out, "{t:e}");
            for v in u.iter().chain(y.iter()) {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed-step RK4 simulation from `x(0) = 0` with a continuous input signal.
pub fn simulate_with<F>(sys: &StateSpace, u: F, steps: usize, dt: f64) -> Result<SimulationTrace>
where
    F: Fn(f64) -> DVector<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let m = sys.inputs();
    let deriv = |x: &DVector<f64>, uu: &DVector<f64>| &sys.a * x + &sys.b * uu;
    let mut x = DVector::zeros(sys.order());
    let mut trace = SimulationTrace {
        times: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
    };
    let mut u0 = u(0.0);
    if u0.len() != m {
        return Err(Error::dims(format!("input has {} channels, system has {m}", u0.len())));
    }
    for k in 0..=steps {
        let t = k as f64 * dt;
        trace.times.push(t);
        trace.outputs.push(&sys.c * &x);
        trace.inputs.push(u0.clone());
        if k == steps {
            break;
        }
        let uh = u(t + 0.5 * dt);
        let u1 = u(t + dt);
        let k1 = deriv(&x, &u0);
        let k2 = deriv(&(&x + &k1 * (0.5 * dt)), &uh);
        let k3 = deriv(&(&x + &k2 * (0.5 * dt)), &uh);
        let k4 = deriv(&(&x + &k3 * dt), &u1);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        u0 = u1;
    }
    Ok(trace)
}

/// RK4 simulation driven by uniformly sampled inputs (`inputs[k]` at `k·dt`),
/// linearly interpolated between samples.
pub fn simulate(sys: &StateSpace, inputs: &[DVector<f64>], dt: f64) -> Result<SimulationTrace> {
    if inputs.is_empty() {
        return Err(Error::Domain("input trace is empty".into()));
    }
    let last = inputs.len() - 1;
    let sample = |t: f64| {
        let pos = (t / dt).clamp(0.0, last as f64);
        let k = (pos.floor() as usize).min(last);
        let frac = pos - k as f64;
        if k == last || frac == 0.0 {
            inputs[k].clone()
        } else {
            &inputs[k] * (1.0 - frac) + &inputs[k + 1] * frac
        }
    };
    simulate_with(sys, sample, last, dt)
}

/// Trapezoidal `L²` norm of a sampled signal.
pub fn l2_norm(samples: &[DVector<f64>], dt: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * dt * (w[0].norm_squared() + w[1].norm_squared()))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    /// `max_t ‖y(t) - ŷ(t)‖`.
    pub lhs: f64,
    /// `‖G - Ĝ‖_H² · ‖u‖_L²`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖y - ŷ‖_L∞ ≤ ‖G - Ĝ‖_H² ‖u‖_L²` on a simulated trajectory.
pub fn linf_bound_check(
    full: &StateSpace,
    reduced: &StateSpace,
    inputs: &[DVector<f64>],
    dt: f64,
) -> Result<BoundCheck> {
    let err_sys = full.difference(reduced)?;
    let y = simulate(full, inputs, dt)?;
    let y_r = simulate(reduced, inputs, dt)?;
    let lhs = y
        .outputs
        .iter()
        .zip(&y_r.outputs)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let rhs = h2_norm(&err_sys)? * l2_norm(inputs, dt);
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-3) })
}
