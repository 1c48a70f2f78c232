//! Reference solutions for strictly convex QPs: exhaustive active-set
//! enumeration and an equality-constrained KKT certificate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fowfsim::qp::{solve, QpProblem};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
}

/// Strictly convex QP with a known interior point, so it is feasible.
pub fn random_problem(seed: u64, n: usize, m: usize) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = random_matrix(&mut rng, n, n);
    let h = root.transpose() * &root + DMatrix::identity(n, n) * 0.5;
    let g = random_vector(&mut rng, n, 5.0);
    let a = random_matrix(&mut rng, m, n);
    let interior = random_vector(&mut rng, n, 0.5);
    let margin = DVector::from_fn(m, |_, _| rng.random_range(0.05..1.0));
    let b = &a * interior + margin;
    QpProblem::new(h, g, a, b).unwrap()
}

/// Minimizer of the QP with the rows in `active` held as equalities, with
/// their multipliers. `None` when the KKT matrix is singular.
pub fn equality_kkt(p: &QpProblem, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = p.g.len();
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
    rhs.rows_mut(0, n).copy_from(&(-&p.g));
    for (r, &i) in active.iter().enumerate() {
        let row = p.a_ineq.row(i);
        kkt.view_mut((n + r, 0), (1, n)).copy_from(&row);
        kkt.view_mut((0, n + r), (n, 1)).copy_from(&row.transpose());
        rhs[n + r] = p.b_ineq[i];
    }
    let sol = kkt.lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

pub fn feasible(p: &QpProblem, z: &DVector<f64>, tol: f64) -> bool {
    (&p.a_ineq * z - &p.b_ineq).iter().all(|r| *r <= tol)
}

/// Global minimizer by enumerating every active set.
pub fn brute_force(p: &QpProblem) -> DVector<f64> {
    let m = p.b_ineq.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > p.g.len() {
            continue;
        }
        let Some((z, _)) = equality_kkt(p, &active) else {
            continue;
        };
        if !feasible(p, &z, 1e-9) {
            continue;
        }
        let f = p.objective(&z);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, z));
        }
    }
    best.expect("feasible by construction").1
}

/// Largest solver error against enumeration on seeded 4-variable,
/// 8-constraint problems.
pub fn enumeration_worst(seeds: std::ops::Range<u64>) -> f64 {
    seeds
        .map(|seed| {
            let p = random_problem(seed, 4, 8);
            (&solve(&p).unwrap().z - brute_force(&p)).amax()
        })
        .fold(0.0, f64::max)
}

/// Certificate for one full-size instance: the number of active rows and the
/// distance to the KKT point of that active set. Errors describe a broken
/// certificate.
pub fn certify(seed: u64, n: usize, m: usize) -> Result<(usize, f64), String> {
    let p = random_problem(seed, n, m);
    let sol = solve(&p).map_err(|e| e.to_string())?;
    let slack = &p.b_ineq - &p.a_ineq * &sol.z;
    let active: Vec<usize> = (0..m).filter(|&i| slack[i] < 1e-7).collect();
    let (z, lambda) = equality_kkt(&p, &active).ok_or("singular active set")?;
    if !feasible(&p, &z, 1e-9) {
        return Err(format!("seed {seed}: certificate point infeasible"));
    }
    if lambda.iter().any(|l| *l < -1e-9) {
        return Err(format!("seed {seed}: negative multiplier {}", lambda.min()));
    }
    Ok((active.len(), (&sol.z - &z).amax()))
}
