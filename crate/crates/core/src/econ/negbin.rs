//! Negative Binomial MLE with separate linear predictors for the mean and
//! the dispersion (log links on both).
//!
//! Parameterization: μ = exp(x·β), dispersion α = exp(z·γ), so the
//! conditional variance is μ + α μ². Estimation alternates damped Newton
//! blocks on β and γ until the joint gradient max-norm passes tolerance;
//! the covariance comes from the full joint observed information.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{
    covariance_from_hessian, newton_maximize, solve_ascent, EconError, FitResult,
    GRADIENT_TOLERANCE, MAX_NEWTON_ITERATIONS,
};
use crate::stats::trigamma;

const LINK_BOUND: f64 = 30.0;

struct NbEval {
    ll: f64,
    grad_mean: DVector<f64>,
    grad_disp: DVector<f64>,
    hess_mm: DMatrix<f64>,
    hess_md: DMatrix<f64>,
    hess_dd: DMatrix<f64>,
}

#[allow(clippy::too_many_arguments)]
fn nb_eval(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    y: &[f64],
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
) -> NbEval {
    let n = x.nrows();
    let p = x.ncols();
    let q = z.ncols();
    let eta = x * beta;
    let rho = z * gamma;

    let mut ll = 0.0;
    let mut grad_mean = DVector::zeros(p);
    let mut grad_disp = DVector::zeros(q);
    let mut hess_mm = DMatrix::zeros(p, p);
    let mut hess_md = DMatrix::zeros(p, q);
    let mut hess_dd = DMatrix::zeros(q, q);

    for i in 0..n {
        let yi = y[i];
        let mu = eta[i].clamp(-LINK_BOUND, LINK_BOUND).exp();
        // r = 1/α with α = exp(z·γ)
        let r = (-rho[i].clamp(-LINK_BOUND, LINK_BOUND)).exp();
        let denom = r + mu;

        ll += ln_gamma(yi + r) - ln_gamma(r) - ln_gamma(yi + 1.0) + r * (r.ln() - denom.ln())
            + yi * (mu.ln() - denom.ln());

        // mean block: ∂ll/∂η = (y − μ) r / (r + μ)
        let gm = (yi - mu) * r / denom;
        // dispersion block: h = r · ∂ll/∂r; ∂ll/∂(z·γ) = −h
        let g_r = digamma(yi + r) - digamma(r) + r.ln() + 1.0 - denom.ln() - (r + yi) / denom;
        let h = r * g_r;
        // second derivatives
        let a_mm = -mu * r * (r + yi) / (denom * denom); // ∂²ll/∂η²
        let c_md = r * mu * (yi - mu) / (denom * denom); // ∂²ll/∂η∂(ln r)
        let gprime_r = trigamma(yi + r) - trigamma(r) + 1.0 / r - 1.0 / denom
            - (mu - yi) / (denom * denom);
        let d_dd = r * (g_r + r * gprime_r); // ∂²ll/∂(ln r)²

        let xrow = x.row(i);
        let zrow = z.row(i);
        for a in 0..p {
            grad_mean[a] += gm * xrow[a];
            for b in a..p {
                hess_mm[(a, b)] += a_mm * xrow[a] * xrow[b];
            }
            for b in 0..q {
                // ∂(ln r)/∂γ = −z, so the cross block flips sign
                hess_md[(a, b)] += -c_md * xrow[a] * zrow[b];
            }
        }
        for a in 0..q {
            grad_disp[a] += -h * zrow[a];
            for b in a..q {
                hess_dd[(a, b)] += d_dd * zrow[a] * zrow[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            hess_mm[(a, b)] = hess_mm[(b, a)];
        }
    }
    for a in 0..q {
        for b in 0..a {
            hess_dd[(a, b)] = hess_dd[(b, a)];
        }
    }
    NbEval { ll, grad_mean, grad_disp, hess_mm, hess_md, hess_dd }
}

fn poisson_start(x: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>, EconError> {
    let p = x.ncols();
    let out = newton_maximize(
        DVector::zeros(p),
        |beta| {
            let eta = x * beta;
            let mut ll = 0.0;
            let mut grad = DVector::zeros(p);
            let mut hess = DMatrix::zeros(p, p);
            for i in 0..x.nrows() {
                let mu = eta[i].clamp(-LINK_BOUND, LINK_BOUND).exp();
                ll += y[i] * eta[i] - mu - ln_gamma(y[i] + 1.0);
                let row = x.row(i);
                for a in 0..p {
                    grad[a] += (y[i] - mu) * row[a];
                    for b in a..p {
                        hess[(a, b)] -= mu * row[a] * row[b];
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
            (ll, grad, hess)
        },
        100,
    )?;
    Ok(out.theta)
}

/// Joint MLE of the mean block (names prefixed `mean:`) and the dispersion
/// block (`disp:`).
pub fn fit_negbin(
    x_mean: &DMatrix<f64>,
    names_mean: &[String],
    x_disp: &DMatrix<f64>,
    names_disp: &[String],
    y: &[f64],
) -> Result<FitResult, EconError> {
    let n = y.len();
    if x_mean.nrows() != n || x_disp.nrows() != n {
        return Err(EconError::Shape(format!(
            "{} mean rows, {} dispersion rows, {} responses",
            x_mean.nrows(),
            x_disp.nrows(),
            n
        )));
    }
    if let Some(&bad) = y.iter().find(|&&v| v < 0.0 || (v - v.round()).abs() > 1e-9) {
        return Err(EconError::NotCount(bad));
    }
    let p = x_mean.ncols();
    let q = x_disp.ncols();

    let mut beta = poisson_start(x_mean, y)?;
    let mut gamma = DVector::zeros(q);
    let mut eval = nb_eval(x_mean, x_disp, y, &beta, &gamma);
    let mut ll_trace = vec![eval.ll];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=MAX_NEWTON_ITERATIONS {
        iterations = iter;
        let joint_grad = eval.grad_mean.amax().max(eval.grad_disp.amax());
        if joint_grad < GRADIENT_TOLERANCE {
            converged = true;
            iterations = iter - 1;
            break;
        }
        let ll_slack = 1e-12 * eval.ll.abs().max(1.0);
        let accept = |trial: &NbEval, current: &NbEval| {
            trial.ll.is_finite()
                && (trial.ll > current.ll - ll_slack
                    || trial.grad_mean.amax().max(trial.grad_disp.amax()) < GRADIENT_TOLERANCE)
        };
        // β block
        let dir = solve_ascent(&eval.hess_mm, &eval.grad_mean)?;
        let mut step = 1.0;
        for _ in 0..50 {
            let candidate = &beta + &dir * step;
            let trial = nb_eval(x_mean, x_disp, y, &candidate, &gamma);
            if accept(&trial, &eval) {
                beta = candidate;
                eval = trial;
                ll_trace.push(eval.ll);
                break;
            }
            step /= 2.0;
        }
        // γ block
        let dir = solve_ascent(&eval.hess_dd, &eval.grad_disp)?;
        let mut step = 1.0;
        for _ in 0..50 {
            let candidate = &gamma + &dir * step;
            let trial = nb_eval(x_mean, x_disp, y, &beta, &candidate);
            if accept(&trial, &eval) {
                gamma = candidate;
                eval = trial;
                ll_trace.push(eval.ll);
                break;
            }
            step /= 2.0;
        }
    }
    if !converged {
        let joint_grad = eval.grad_mean.amax().max(eval.grad_disp.amax());
        converged = joint_grad < GRADIENT_TOLERANCE;
        if !converged {
            return Err(EconError::NotConverged(iterations));
        }
    }

    // Full joint observed information for the covariance.
    let mut hess = DMatrix::zeros(p + q, p + q);
    hess.view_mut((0, 0), (p, p)).copy_from(&eval.hess_mm);
    hess.view_mut((0, p), (p, q)).copy_from(&eval.hess_md);
    hess.view_mut((p, 0), (q, p)).copy_from(&eval.hess_md.transpose());
    hess.view_mut((p, p), (q, q)).copy_from(&eval.hess_dd);
    let covariance = covariance_from_hessian(&hess)?;

    let mut coefficients = DVector::zeros(p + q);
    coefficients.rows_mut(0, p).copy_from(&beta);
    coefficients.rows_mut(p, q).copy_from(&gamma);
    let mut names: Vec<String> = names_mean.iter().map(|m| format!("mean:{m}")).collect();
    names.extend(names_disp.iter().map(|d| format!("disp:{d}")));

    Ok(FitResult {
        model: "negbin",
        names,
        coefficients,
        covariance,
        loglik: eval.ll,
        iterations,
        converged,
        n,
        ll_trace,
    })
}
