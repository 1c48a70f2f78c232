//! Dense convex QP solver: `min ½ zᵀHz + gᵀz  s.t.  Gz ≤ h`.
//!
//! Mehrotra predictor-corrector interior point method. Each iteration reduces
//! to one Cholesky factorization of `H + Gᵀ W G` with `W = Λ S⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Inequality multipliers.
    pub lambda: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
    ) -> Result<Self> {
        let n = g.len();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::Dimension(format!(
                "H is {}x{}, expected {n}x{n}",
                h.nrows(),
                h.ncols()
            )));
        }
        if a_ineq.ncols() != n || a_ineq.nrows() != b_ineq.len() {
            return Err(Error::Dimension(format!(
                "G is {}x{} with {} bounds, expected {} columns",
                a_ineq.nrows(),
                a_ineq.ncols(),
                b_ineq.len(),
                n
            )));
        }
        Ok(Self {
            h,
            g,
            a_ineq,
            b_ineq,
        })
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// KKT residuals scaled by the problem data.
    pub fn kkt(&self, z: &DVector<f64>, lambda: &DVector<f64>) -> KktResiduals {
        let grad = &self.h * z + &self.g + self.a_ineq.transpose() * lambda;
        let slack = &self.b_ineq - &self.a_ineq * z;
        let scale = 1.0 + self.g.amax().max(self.h.amax());
        let primal = slack.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
        let dual = lambda.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max);
        let comp = slack
            .iter()
            .zip(lambda.iter())
            .map(|(s, l)| (s * l).abs())
            .fold(0.0, f64::max);
        KktResiduals {
            stationarity: grad.amax() / scale,
            primal: primal / (1.0 + self.b_ineq.amax()),
            dual,
            complementarity: comp / scale,
        }
    }
}

fn cholesky_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut reg = 0.0;
    let base = m.diagonal().amax().max(1.0);
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..n {
            mm[(i, i)] += reg;
        }
        if let Some(ch) = mm.cholesky() {
            return Ok(ch.solve(rhs));
        }
        reg = if reg == 0.0 {
            1e-12 * base
        } else {
            reg * 100.0
        };
    }
    Err(Error::InvalidInput(
        "QP Hessian is not positive definite".into(),
    ))
}

fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

pub fn solve(p: &QpProblem) -> Result<QpSolution> {
    let n = p.g.len();
    let m = p.b_ineq.len();
    let gt = p.a_ineq.transpose();

    if m == 0 {
        let z = cholesky_solve(p.h.clone(), &(-&p.g))?;
        return Ok(QpSolution {
            objective: p.objective(&z),
            z,
            lambda: DVector::zeros(0),
            iterations: 1,
        });
    }

    let mut z = DVector::zeros(n);
    let mut s = (&p.b_ineq - &p.a_ineq * &z).map(|v| v.max(1.0));
    let mut lam = DVector::from_element(m, 1.0);
    let scale = 1.0 + p.g.amax().max(p.b_ineq.amax());

    for it in 0..MAX_ITER {
        let rd = &p.h * &z + &p.g + &gt * &lam;
        let rp = &p.a_ineq * &z + &s - &p.b_ineq;
        let mu = s.dot(&lam) / m as f64;
        if rd.amax() < TOL * scale && rp.amax() < TOL * scale && mu < 1e-3 * TOL * scale {
            return Ok(QpSolution {
                objective: p.objective(&z),
                z,
                lambda: lam,
                iterations: it,
            });
        }

        let w = lam.component_div(&s);
        let mut kkt = p.h.clone();
        let wg = DMatrix::from_fn(m, n, |i, j| w[i] * p.a_ineq[(i, j)]);
        kkt += &gt * &wg;
        let factor = {
            let mut k = kkt.clone();
            let base = k.diagonal().amax().max(1.0);
            let mut reg = 0.0;
            loop {
                if let Some(ch) = k.clone().cholesky() {
                    break ch;
                }
                reg = if reg == 0.0 {
                    1e-12 * base
                } else {
                    reg * 100.0
                };
                if reg > base {
                    return Err(Error::InvalidInput(
                        "QP Hessian is not positive definite".into(),
                    ));
                }
                for i in 0..n {
                    k[(i, i)] = kkt[(i, i)] + reg;
                }
            }
        };

        let direction = |rc: &DVector<f64>| {
            let t = w.component_mul(&rp) - rc.component_div(&s);
            let dz = factor.solve(&(-&rd - &gt * &t));
            let dlam = w.component_mul(&(&p.a_ineq * &dz + &rp)) - rc.component_div(&s);
            let ds = -(rc + s.component_mul(&dlam)).component_div(&lam);
            (dz, ds, dlam)
        };

        let rc_aff = s.component_mul(&lam);
        let (_, ds_a, dl_a) = direction(&rc_aff);
        let a_aff = step_to_boundary(&s, &ds_a).min(step_to_boundary(&lam, &dl_a));
        let mu_aff = (&s + &ds_a * a_aff).dot(&(&lam + &dl_a * a_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let rc = &rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, sigma * mu);
        let (dz, ds, dl) = direction(&rc);
        let alpha = (0.99 * step_to_boundary(&s, &ds).min(step_to_boundary(&lam, &dl))).min(1.0);
        z += &dz * alpha;
        s += &ds * alpha;
        lam += &dl * alpha;
        s.apply(|v| *v = v.max(1e-300));
        lam.apply(|v| *v = v.max(1e-300));
        if !(z.iter().all(|v| v.is_finite()) && lam.iter().all(|v| v.is_finite())) {
            break;
        }
    }

    let rd = &p.h * &z + &p.g + &gt * &lam;
    let viol = &p.a_ineq * &z - &p.b_ineq;
    if viol.max() < 1e-7 * scale && rd.amax() < 1e-7 * scale {
        return Ok(QpSolution {
            objective: p.objective(&z),
            z,
            lambda: lam,
            iterations: MAX_ITER,
        });
    }
    let (worst, amount) = viol.iter().enumerate().fold((0, 0.0_f64), |acc, (i, v)| {
        let v = if v.is_finite() { *v } else { f64::INFINITY };
        if v > acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    Err(Error::QpInfeasible {
        constraint: worst,
        violation: amount,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_matches_linear_solve() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let p = QpProblem::new(
            h.clone(),
            g.clone(),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        let exact = h.lu().solve(&(-g)).unwrap();
        assert!((sol.z - exact).amax() < 1e-8);
    }

    #[test]
    fn one_dimensional_bound_example() {
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, -4.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-6);
        assert!((sol.lambda[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn inactive_constraint_leaves_unconstrained_minimum() {
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, -4.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 5.0),
        )
        .unwrap();
        let sol = solve(&p).unwrap();
        assert!((sol.z[0] - 2.0).abs() < 1e-6);
        assert!(sol.lambda[0].abs() < 1e-6);
    }

    #[test]
    fn contradictory_bounds_are_reported() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![-1.0, -1.0]);
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1), a, b).unwrap();
        assert!(matches!(solve(&p), Err(Error::QpInfeasible { .. })));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let r = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(3),
            DMatrix::zeros(0, 3),
            DVector::zeros(0),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }
}
