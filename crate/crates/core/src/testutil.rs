use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, Mat};

pub fn random_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random (generally non-normal) stable matrix with spectral abscissa near -0.5.
pub fn random_stable<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let m = random_mat(rng, n, n);
    let shift = linalg::max_real_eigenvalue(&m).unwrap() + 0.5;
    m - Mat::identity(n, n) * shift
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let m = random_mat(rng, n, n);
    &m * m.transpose() + Mat::identity(n, n)
}
