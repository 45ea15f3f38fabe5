#![allow(dead_code)]

use carascale::caratheodory::{ActiveBasis, MirrEvent, SimplexPoint};
use carascale::linalg::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n points in ℝᵐ with iid standard normal coordinates, one per row.
pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseMatrix {
    let data = (0..n * m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    DenseMatrix::from_row_major(n, m, data).unwrap()
}

pub fn represented(points: &DenseMatrix, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; points.cols()];
    for (i, wi) in w.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(points.row(i)) {
            *o += wi * a;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One step of a random mIRR sequence: mix `x` toward a vertex outside the
/// active basis, then call `mirr`. Returns the represented point after the
/// mix (which `mirr` must preserve), or `None` when every index is active.
pub struct MirrStep {
    pub target: Vec<f64>,
    pub entering: usize,
    pub event: MirrEvent,
}

pub fn random_mirr_step(
    rng: &mut ChaCha8Rng,
    points: &DenseMatrix,
    ab: &mut ActiveBasis,
    x: &mut SimplexPoint,
) -> Option<MirrStep> {
    let n = points.rows();
    let outside: Vec<usize> = (0..n).filter(|i| !ab.contains(*i)).collect();
    if outside.is_empty() {
        return None;
    }
    let j = outside[rng.random_range(0..outside.len())];
    let theta: f64 = rng.random_range(0.05..0.95);
    let mut w: Vec<f64> = x.weights().iter().map(|v| v * (1.0 - theta)).collect();
    w[j] += theta;
    *x = SimplexPoint::from_weights(w).unwrap();
    let target = x.represented(points);
    let event = ab.mirr(points, x, j).unwrap();
    Some(MirrStep {
        target,
        entering: j,
        event,
    })
}
