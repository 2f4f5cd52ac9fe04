//! Damped Newton maximization with a step cap, optional ball constraint and
//! domain guard. Shared by pseudolikelihood, exact and Monte Carlo fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Objective {
    pub value: f64,
    pub gradient: DVector<f64>,
    /// Curvature model: negated Hessian or an information matrix.
    pub neg_hessian: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct NewtonSettings {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Initial and largest step length; halved after every rejected step.
    pub max_step: f64,
    /// Iterates are kept inside the ball `|theta - center| <= radius`.
    pub ball: Option<(DVector<f64>, f64)>,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iter: 200,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            max_step: 1.0,
            ball: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub theta: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub neg_hessian: DMatrix<f64>,
    pub iterations: usize,
    pub last_step: f64,
    pub converged: bool,
}

/// Solves `(h + lambda I) x = g`, raising `lambda` until the system is positive definite.
pub fn damped_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let q = h.nrows();
    let scale = (0..q).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-12);
    let mut lambda = 0.0;
    for _ in 0..40 {
        let mut a = h.clone();
        for i in 0..q {
            a[(i, i)] += lambda;
        }
        if let Some(ch) = a.cholesky() {
            let x = ch.solve(g);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        lambda = if lambda == 0.0 { 1e-10 * scale } else { lambda * 10.0 };
    }
    None
}

pub fn maximize(
    theta0: DVector<f64>,
    settings: &NewtonSettings,
    in_domain: &dyn Fn(&[f64]) -> bool,
    eval: &mut dyn FnMut(&[f64]) -> Result<Objective>,
) -> Result<NewtonOutcome> {
    let mut theta = theta0;
    let mut obj = eval(theta.as_slice())?;
    if !obj.value.is_finite() {
        return Err(Error::Estimation("objective not finite at start".into()));
    }
    let mut cap = settings.max_step;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iter {
        iterations += 1;
        let gnorm = obj.gradient.norm();
        let Some(mut step) = damped_solve(&obj.neg_hessian, &obj.gradient) else {
            break;
        };
        let len = step.norm();
        if gnorm < settings.grad_tol && len < settings.step_tol {
            last_step = len;
            converged = true;
            break;
        }
        if len > cap {
            step *= cap / len;
        }
        let mut cand = &theta + &step;
        if let Some((center, radius)) = &settings.ball {
            let off = &cand - center;
            let r = off.norm();
            if r > *radius {
                cand = center + off * (*radius / r);
            }
        }
        let moved = (&cand - &theta).norm();
        if moved < settings.step_tol {
            last_step = moved;
            converged = gnorm < settings.grad_tol;
            break;
        }
        let accepted = if in_domain(cand.as_slice()) {
            match eval(cand.as_slice()) {
                Ok(o) if o.value.is_finite() && o.value >= obj.value - 1e-12 * obj.value.abs() => {
                    Some(o)
                }
                Ok(_) | Err(Error::LowEss { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        match accepted {
            Some(o) => {
                theta = cand;
                obj = o;
                last_step = moved;
                cap = (cap * 2.0).min(settings.max_step);
            }
            None => {
                cap = moved / 2.0;
                if cap < settings.step_tol {
                    converged = gnorm < settings.grad_tol;
                    break;
                }
            }
        }
    }
    Ok(NewtonOutcome {
        theta,
        value: obj.value,
        gradient: obj.gradient,
        neg_hessian: obj.neg_hessian,
        iterations,
        last_step,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(center: [f64; 2]) -> impl FnMut(&[f64]) -> Result<Objective> {
        move |t: &[f64]| {
            let d = DVector::from_vec(vec![t[0] - center[0], t[1] - center[1]]);
            Ok(Objective {
                value: -0.5 * d.norm_squared(),
                gradient: -d,
                neg_hessian: DMatrix::identity(2, 2),
            })
        }
    }

    #[test]
    fn finds_quadratic_maximum() {
        let mut f = quad([3.0, -1.0]);
        let out = maximize(DVector::zeros(2), &NewtonSettings::default(), &|_| true, &mut f).unwrap();
        assert!(out.converged);
        assert!((out.theta[0] - 3.0).abs() < 1e-9 && (out.theta[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn respects_ball() {
        let mut f = quad([3.0, 0.0]);
        let s = NewtonSettings {
            ball: Some((DVector::zeros(2), 0.5)),
            ..Default::default()
        };
        let out = maximize(DVector::zeros(2), &s, &|_| true, &mut f).unwrap();
        assert!((out.theta.norm() - 0.5).abs() < 1e-12);
        assert!(!out.converged);
    }

    #[test]
    fn respects_domain() {
        let mut f = quad([-3.0, 0.0]);
        let out = maximize(DVector::from_vec(vec![1.0, 0.0]), &NewtonSettings::default(), &|t| t[0] > 0.0, &mut f).unwrap();
        assert!(out.theta[0] > 0.0 && out.theta[0] < 1e-6);
        assert!(!out.converged);
    }

    #[test]
    fn indefinite_hessian_is_damped() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let x = damped_solve(&h, &g).unwrap();
        assert!(x.dot(&g) > 0.0);
    }
}
