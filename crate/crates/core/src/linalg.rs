//! Dense matrix-equation kernels.
//!
//! Lyapunov and Sylvester equations are solved with the Bartels–Stewart
//! method: both coefficient matrices are reduced to real Schur form and the
//! transformed equation is solved by block back-substitution over the
//! quasi-triangular factors (1×1 and 2×2 diagonal blocks).

use nalgebra::{Complex, DMatrix, Schur};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Default stability tolerance: eigenvalues with real part ≥ `-EPS_STAB` are
/// treated as unstable by the solvers.
pub const EPS_STAB: f64 = 1e-12;

const SCHUR_MAX_SWEEPS: usize = 200;

/// Symmetric part `(A + Aᵀ)/2`.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Skew-symmetric part `(A - Aᵀ)/2`.
pub fn skew(a: &Mat) -> Mat {
    (a - a.transpose()) * 0.5
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub(crate) fn check_square(a: &Mat, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::dims(format!("{what} must have order >= 1")));
    }
    Ok(a.nrows())
}

/// Real Schur factorization `A = Q T Qᵀ` with `T` upper quasi-triangular.
#[derive(Clone, Debug)]
pub struct RealSchur {
    pub q: Mat,
    pub t: Mat,
    /// Diagonal blocks as `(start, size)` with size 1 or 2.
    blocks: Vec<(usize, usize)>,
}

impl RealSchur {
    pub fn new(a: &Mat) -> Result<Self> {
        let n = check_square(a, "Schur argument")?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS * n.max(1))
            .ok_or(Error::NoConvergence {
                what: "real Schur decomposition",
            })?;
        let (q, t) = schur.unpack();
        let mut blocks = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        Ok(Self { q, t, blocks })
    }

    pub fn order(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.order());
        for &(s, size) in &self.blocks {
            out.extend(block_eigenvalues(&self.t, s, size));
        }
        out
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn block_eigenvalues(t: &Mat, s: usize, size: usize) -> Vec<Complex<f64>> {
    if size == 1 {
        return vec![Complex::new(t[(s, s)], 0.0)];
    }
    let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![Complex::new(half_tr + r, 0.0), Complex::new(half_tr - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        vec![Complex::new(half_tr, r), Complex::new(half_tr, -r)]
    }
}

/// Largest real part over the spectrum of `a`.
pub fn max_real_eigenvalue(a: &Mat) -> Result<f64> {
    Ok(RealSchur::new(a)?.max_real())
}

/// `true` iff every eigenvalue of `a` has real part `< -margin`.
pub fn is_stable(a: &Mat, margin: f64) -> bool {
    match RealSchur::new(a) {
        Ok(s) => s.max_real() < -margin,
        Err(_) => false,
    }
}

fn ensure_stable(s: &RealSchur) -> Result<()> {
    let max_real = s.max_real();
    if max_real >= -EPS_STAB {
        return Err(Error::NotStable { max_real });
    }
    Ok(())
}

/// Solves `A X + X B + W = 0` given Schur factorizations of `A` and `B`.
pub fn solve_sylvester_factored(a: &RealSchur, b: &RealSchur, w: &Mat) -> Result<Mat> {
    let (n, r) = (a.order(), b.order());
    if w.nrows() != n || w.ncols() != r {
        return Err(Error::dims(format!(
            "right-hand side is {}x{}, expected {n}x{r}",
            w.nrows(),
            w.ncols()
        )));
    }
    let f = -(a.q.transpose() * w * &b.q);
    let z = solve_quasi_triangular(a, b, f)?;
    Ok(&a.q * z * b.q.transpose())
}

/// Solves `S Z + Z T = F` for quasi-triangular `S = a.t`, `T = b.t`.
fn solve_quasi_triangular(a: &RealSchur, b: &RealSchur, f: Mat) -> Result<Mat> {
    let s = &a.t;
    let t = &b.t;
    let (n, r) = (s.nrows(), t.nrows());
    let scale = s.amax().max(t.amax()).max(f64::MIN_POSITIVE);
    let mut z = Mat::zeros(n, r);

    for &(j0, jb) in &b.blocks {
        for &(i0, ib) in a.blocks.iter().rev() {
            let i_end = i0 + ib;
            let mut rhs = f.view((i0, j0), (ib, jb)).clone_owned();
            if i_end < n {
                rhs -= s.view((i0, i_end), (ib, n - i_end)) * z.view((i_end, j0), (n - i_end, jb));
            }
            if j0 > 0 {
                rhs -= z.view((i0, 0), (ib, j0)) * t.view((0, j0), (j0, jb));
            }

            let gap = block_eigenvalues(s, i0, ib)
                .iter()
                .flat_map(|&l| block_eigenvalues(t, j0, jb).into_iter().map(move |m| (l + m).norm()))
                .fold(f64::INFINITY, f64::min);
            if gap <= 1e-13 * scale {
                return Err(Error::SingularPencil { gap });
            }

            let sol = solve_block(
                &s.view((i0, i0), (ib, ib)).clone_owned(),
                &t.view((j0, j0), (jb, jb)).clone_owned(),
                &rhs,
            )
            .ok_or(Error::SingularPencil { gap })?;
            z.view_mut((i0, j0), (ib, jb)).copy_from(&sol);
        }
    }
    Ok(z)
}

/// Solves the small (≤ 2×2 by ≤ 2×2) Sylvester block `S Z + Z T = C` through
/// its Kronecker form `(I ⊗ S + Tᵀ ⊗ I) vec(Z) = vec(C)`.
fn solve_block(s: &Mat, t: &Mat, c: &Mat) -> Option<Mat> {
    let (a, b) = (s.nrows(), t.nrows());
    let dim = a * b;
    let mut k = [[0.0f64; 4]; 4];
    let mut rhs = [0.0f64; 4];
    // vec index of Z[(i, j)] is j * a + i
    for j in 0..b {
        for i in 0..a {
            let row = j * a + i;
            rhs[row] = c[(i, j)];
            for l in 0..a {
                k[row][j * a + l] += s[(i, l)];
            }
            for q in 0..b {
                k[row][q * a + i] += t[(q, j)];
            }
        }
    }
    let x = gauss_solve(&mut k, &mut rhs, dim)?;
    Some(Mat::from_fn(a, b, |i, j| x[j * a + i]))
}

fn gauss_solve(k: &mut [[f64; 4]; 4], rhs: &mut [f64; 4], n: usize) -> Option<[f64; 4]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| k[x][col].abs().total_cmp(&k[y][col].abs()))?;
        if k[piv][col] == 0.0 {
            return None;
        }
        k.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let factor = k[row][col] / k[col][col];
            for c in col..n {
                k[row][c] -= factor * k[col][c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= k[row][c] * x[c];
        }
        x[row] = acc / k[row][row];
    }
    Some(x)
}

fn check_rhs(a: &Mat, w: &Mat) -> Result<usize> {
    let n = check_square(a, "coefficient matrix")?;
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::dims(format!(
            "right-hand side is {}x{}, coefficient is {n}x{n}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(n)
}

/// Solves `A X + X Aᵀ + W = 0`.
pub fn solve_lyapunov_primal(a: &Mat, w: &Mat) -> Result<Mat> {
    check_rhs(a, w)?;
    let sa = RealSchur::new(a)?;
    ensure_stable(&sa)?;
    let sat = RealSchur::new(&a.transpose())?;
    Ok(sym(&solve_sylvester_factored(&sa, &sat, w)?))
}

/// Solves `Aᵀ X + X A + W = 0`.
pub fn solve_lyapunov_dual(a: &Mat, w: &Mat) -> Result<Mat> {
    check_rhs(a, w)?;
    let sa = RealSchur::new(a)?;
    ensure_stable(&sa)?;
    let sat = RealSchur::new(&a.transpose())?;
    Ok(sym(&solve_sylvester_factored(&sat, &sa, w)?))
}

/// Solves `A X + X B + W = 0` for `A` n×n, `B` r×r, `W` n×r.
pub fn solve_sylvester(a: &Mat, b: &Mat, w: &Mat) -> Result<Mat> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    let sa = RealSchur::new(a)?;
    let sb = RealSchur::new(b)?;
    solve_sylvester_factored(&sa, &sb, w)
}

/// Lower Cholesky factor `L` with `S = L Lᵀ` and positive diagonal.
pub fn cholesky_lower(s: &Mat) -> Result<Mat> {
    let n = check_square(s, "Cholesky argument")?;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "Cholesky pivot {j} is {d:.3e}"
            )));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

pub fn is_spd(s: &Mat) -> bool {
    cholesky_lower(s).is_ok()
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Mat, b: &Mat) -> Result<Mat> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| Error::NotPositiveDefinite("singular triangular factor".into()))
}

/// Solves `U X = B` for upper-triangular `U`.
pub fn solve_upper(u: &Mat, b: &Mat) -> Result<Mat> {
    u.solve_upper_triangular(b)
        .ok_or_else(|| Error::NotPositiveDefinite("singular triangular factor".into()))
}

fn spd_eigen(s: &Mat) -> Result<(nalgebra::DVector<f64>, Mat)> {
    check_square(s, "SPD argument")?;
    let eig = sym(s).symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(Error::NotPositiveDefinite(format!(
            "eigenvalue range [{min:.3e}, {max:.3e}]"
        )));
    }
    Ok((eig.eigenvalues, eig.eigenvectors))
}

fn from_eigen(vals: &nalgebra::DVector<f64>, vecs: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * f(vals[j]));
    sym(&(scaled * vecs.transpose()))
}

/// Principal square root of an SPD matrix.
pub fn spd_sqrt(s: &Mat) -> Result<Mat> {
    let (vals, vecs) = spd_eigen(s)?;
    Ok(from_eigen(&vals, &vecs, f64::sqrt))
}

/// Returns `(S^{1/2}, S^{-1/2})`.
pub fn spd_sqrt_pair(s: &Mat) -> Result<(Mat, Mat)> {
    let (vals, vecs) = spd_eigen(s)?;
    Ok((
        from_eigen(&vals, &vecs, f64::sqrt),
        from_eigen(&vals, &vecs, |x| 1.0 / x.sqrt()),
    ))
}

/// Exponential of a symmetric matrix through its eigendecomposition; the
/// result is SPD whenever no eigenvalue underflows.
pub fn sym_exp(s: &Mat) -> Result<Mat> {
    check_square(s, "exponential argument")?;
    let eig = sym(s).symmetric_eigen();
    Ok(from_eigen(&eig.eigenvalues, &eig.eigenvectors, f64::exp))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13.
pub fn mat_exp(x: &Mat) -> Result<Mat> {
    let n = check_square(x, "exponential argument")?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let ident = Mat::identity(n, n);
    let norm = one_norm(x);

    let low: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (coeffs, theta) in low.iter().zip(THETA) {
        if norm <= theta {
            return pade_low(x, coeffs, &ident);
        }
    }

    let s = if norm > THETA[4] {
        (norm / THETA[4]).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = x / 2f64.powi(s);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Mat, b: &[f64], ident: &Mat) -> Result<Mat> {
    let a2 = a * a;
    let mut even_pow = ident.clone();
    let mut u_inner = Mat::zeros(a.nrows(), a.ncols());
    let mut v = Mat::zeros(a.nrows(), a.ncols());
    for k in (0..b.len()).step_by(2) {
        v += &even_pow * b[k];
        u_inner += &even_pow * b[k + 1];
        even_pow = &even_pow * &a2;
    }
    let u = a * u_inner;
    pade_solve(&u, &v)
}

fn pade_solve(u: &Mat, v: &Mat) -> Result<Mat> {
    (v - u)
        .lu()
        .solve(&(v + u))
        .ok_or(Error::NoConvergence {
            what: "Pade denominator solve",
        })
}
