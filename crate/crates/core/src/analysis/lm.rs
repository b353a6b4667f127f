//! Damped Gauss–Newton (Levenberg–Marquardt) for small parameter counts.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    /// `(JᵀJ)⁻¹` at the solution, unscaled.
    pub inverse_hessian: Option<DMatrix<f64>>,
    pub ssr: f64,
    pub converged: bool,
}

const MAX_ITER: usize = 500;

fn ssr(x: &[f64], y: &[f64], p: &[f64], model: &dyn Fn(f64, &[f64]) -> f64) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| (yi - model(*xi, p)).powi(2)).sum()
}

fn jacobian(x: &[f64], p: &[f64], model: &dyn Fn(f64, &[f64]) -> f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(x.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-7 * p[k].abs().max(1e-7);
        q[k] = p[k] + h;
        let up: Vec<f64> = x.iter().map(|xi| model(*xi, &q)).collect();
        q[k] = p[k] - h;
        for (i, xi) in x.iter().enumerate() {
            j[(i, k)] = (up[i] - model(*xi, &q)) / (2.0 * h);
        }
        q[k] = p[k];
    }
    j
}

/// Minimise `Σ (y − model(x, p))²` from `p0`. A step is accepted only if it
/// lowers the residual; the damping shrinks on success and grows otherwise.
pub(crate) fn fit(x: &[f64], y: &[f64], p0: &[f64], model: &dyn Fn(f64, &[f64]) -> f64) -> LmOutcome {
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut cost = ssr(x, y, &p, model);
    let mut lambda = 1e-3;
    let mut converged = false;
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITER {
        if !cost.is_finite() {
            break;
        }
        if cost <= 1e-30 * scale {
            converged = true;
            break;
        }
        let j = jacobian(x, &p, model);
        let r = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(xi, yi)| yi - model(*xi, &p)));
        let jtj = j.transpose() * &j;
        let g = j.transpose() * r;
        if g.amax() <= 1e-14 * scale.sqrt() {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = ssr(x, y, &trial, model);
            if c.is_finite() && c < cost {
                let rel_step = step
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| s.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                let rel_cost = (cost - c) / cost;
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel_step < 1e-12 || rel_cost < 1e-15 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let j = jacobian(x, &p, model);
    let inverse_hessian = (j.transpose() * j).try_inverse();
    LmOutcome {
        params: p,
        inverse_hessian,
        ssr: cost,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_line_exactly() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let out = fit(&x, &y, &[1.0, 1.0], &|x, p| p[0] + p[1] * x);
        assert!(out.converged);
        assert!((out.params[0] - 3.0).abs() < 1e-10 && (out.params[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn recovers_nonlinear_rate() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * (-0.7 * v).exp()).collect();
        let out = fit(&x, &y, &[1.0, 0.2], &|x, p| p[0] * (-p[1] * x).exp());
        assert!(out.converged);
        assert!((out.params[1] / 0.7 - 1.0).abs() < 1e-9);
    }
}
