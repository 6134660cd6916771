//! Probit MLE with analytic gradient and observed Hessian.

use nalgebra::{DMatrix, DVector};

use super::{
    covariance_from_hessian, inv_mills, newton_maximize, norm_log_cdf, EconError, FitResult,
    MAX_NEWTON_ITERATIONS,
};

/// Coefficient magnitude past which a binary fit is treated as separated;
/// on the probit scale anything near this is already numerically saturated.
const SEPARATION_BOUND: f64 = 25.0;

pub(crate) fn probit_eval(
    x: &DMatrix<f64>,
    y: &[f64],
    beta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let eta = x * beta;
    let mut ll = 0.0;
    let mut weights_g = DVector::zeros(n);
    let mut weights_h = DVector::zeros(n);
    for i in 0..n {
        let q = 2.0 * y[i] - 1.0;
        let z = q * eta[i];
        ll += norm_log_cdf(z);
        let m = inv_mills(z);
        weights_g[i] = q * m;
        weights_h[i] = m * (z + m);
    }
    let grad = x.transpose() * &weights_g;
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..p {
            let wa = weights_h[i] * row[a];
            for b in a..p {
                hess[(a, b)] -= wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            hess[(a, b)] = hess[(b, a)];
        }
    }
    (ll, grad, hess)
}

/// Fit a probit model of a 0/1 response on the design matrix columns.
pub fn fit_probit(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<FitResult, EconError> {
    if x.nrows() != y.len() {
        return Err(EconError::Shape(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(EconError::NotBinary(bad));
    }
    let p = x.ncols();
    let out = newton_maximize(
        DVector::zeros(p),
        |beta| probit_eval(x, y, beta),
        MAX_NEWTON_ITERATIONS,
    )?;

    // A separated column drives its coefficient toward infinity while the
    // likelihood keeps rising; the saturated fit is numerically "converged".
    let monotone = out.ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-13);
    if out.theta.amax() > SEPARATION_BOUND && monotone {
        let worst = (0..p).max_by(|&a, &b| {
            out.theta[a].abs().partial_cmp(&out.theta[b].abs()).expect("finite")
        });
        let column = worst.map(|j| names[j].clone()).unwrap_or_default();
        return Err(EconError::Separation { column });
    }
    if !out.converged {
        return Err(EconError::NotConverged(out.iterations));
    }

    let covariance = covariance_from_hessian(&out.hessian)?;
    Ok(FitResult {
        model: "probit",
        names: names.to_vec(),
        coefficients: out.theta,
        covariance,
        loglik: out.loglik,
        iterations: out.iterations,
        converged: out.converged,
        n: y.len(),
        ll_trace: out.ll_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn intercept_only_matches_inverse_cdf() {
        let y: Vec<f64> = (0..1000).map(|i| f64::from(i % 4 == 0)).collect();
        let x = DMatrix::from_element(1000, 1, 1.0);
        let fit = fit_probit(&x, &y, &names(&["const"])).unwrap();
        let q = 0.25;
        let expected = Normal::new(0.0, 1.0).unwrap().inverse_cdf(q);
        assert!((fit.coefficients[0] - expected).abs() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn recovers_simulated_coefficients_within_three_se() {
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let truth = [0.3, -0.8, 0.5];
        let mut x = DMatrix::zeros(n, 3);
        let mut y = vec![0.0; n];
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = rng.random::<f64>() * 2.0 - 1.0;
            x[(i, 2)] = f64::from(rng.random::<f64>() < 0.4);
            let eta: f64 = (0..3).map(|j| truth[j] * x[(i, j)]).sum();
            let noise = normal.inverse_cdf(rng.random::<f64>());
            y[i] = f64::from(eta + noise > 0.0);
        }
        let fit = fit_probit(&x, &y, &names(&["const", "x1", "d"])).unwrap();
        let se = fit.se();
        for j in 0..3 {
            assert!(
                (fit.coefficients[j] - truth[j]).abs() < 3.0 * se[j],
                "coef {j}: {} vs {} (se {})",
                fit.coefficients[j],
                truth[j],
                se[j]
            );
        }
    }

    #[test]
    fn separated_data_names_the_column() {
        // y is a deterministic threshold of x: perfectly separated
        let n = 60;
        let mut x = DMatrix::zeros(n, 2);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let v = i as f64 / n as f64 - 0.5;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = v;
            y[i] = f64::from(v > 0.0);
        }
        match fit_probit(&x, &y, &names(&["const", "xsep"])) {
            Err(EconError::Separation { column }) => assert_eq!(column, "xsep"),
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_binary_response() {
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(
            fit_probit(&x, &[0.0, 2.0, 1.0], &names(&["const"])),
            Err(EconError::NotBinary(_))
        ));
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = DMatrix::zeros(n, 3);
        let mut y = vec![0.0; n];
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = rng.random::<f64>() - 0.5;
            x[(i, 2)] = rng.random::<f64>() - 0.5;
            y[i] = f64::from(rng.random::<f64>() < 0.5);
        }
        let beta = DVector::from_vec(vec![0.2, -0.4, 0.7]);
        let (_, _, hess) = probit_eval(&x, &y, &beta);
        let h = 1e-6;
        for j in 0..3 {
            let mut plus = beta.clone();
            plus[j] += h;
            let mut minus = beta.clone();
            minus[j] -= h;
            let (_, gp, _) = probit_eval(&x, &y, &plus);
            let (_, gm, _) = probit_eval(&x, &y, &minus);
            for k in 0..3 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                let rel = (hess[(j, k)] - fd).abs() / fd.abs().max(1e-6);
                assert!(rel < 1e-4, "H[{j},{k}] = {} vs fd {}", hess[(j, k)], fd);
            }
        }
    }

    #[test]
    fn column_permutation_leaves_loglik_unchanged() {
        let n = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = DMatrix::zeros(n, 3);
        let mut y = vec![0.0; n];
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = rng.random::<f64>() - 0.5;
            x[(i, 2)] = f64::from(rng.random::<f64>() < 0.5);
            y[i] = f64::from(rng.random::<f64>() < 0.3 + 0.3 * x[(i, 2)]);
        }
        let fit_a = fit_probit(&x, &y, &names(&["const", "x", "d"])).unwrap();
        let mut xp = DMatrix::zeros(n, 3);
        xp.set_column(0, &x.column(2));
        xp.set_column(1, &x.column(0));
        xp.set_column(2, &x.column(1));
        let fit_b = fit_probit(&xp, &y, &names(&["d", "const", "x"])).unwrap();
        assert!((fit_a.loglik - fit_b.loglik).abs() < 1e-8);
        assert!((fit_a.coefficient("d").unwrap() - fit_b.coefficient("d").unwrap()).abs() < 1e-6);
    }
}

