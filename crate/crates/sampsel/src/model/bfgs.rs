//! Quasi-Newton minimizer with numerically differenced gradients.
//!
//! Gradients are central differences with step `1e-6 * (1 + |theta_i|)`.
//! The caller supplies an objective that may return non-finite values outside
//! its domain; such points are treated as uphill by the line search.

use nalgebra::{DMatrix, DVector};

pub struct MinimizeResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// Gradient max-norm fell below the tolerance.
    pub gradient_converged: bool,
    /// Final inverse-Hessian approximation, usable for polishing steps.
    pub hinv: DMatrix<f64>,
}

pub fn numerical_gradient<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>) -> DVector<f64> {
    let d = x.len();
    let mut g = DVector::zeros(d);
    let mut xp = x.clone();
    for i in 0..d {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Dense numerical Hessian by second-order central differences, step
/// `1e-4 * (1 + |theta_i|)` shrunk near the caller-declared lower bounds.
pub fn numerical_hessian<F: Fn(&DVector<f64>) -> f64>(
    f: &F,
    x: &DVector<f64>,
    step_cap: &[f64],
) -> DMatrix<f64> {
    let d = x.len();
    let h: Vec<f64> = (0..d)
        .map(|i| {
            let base = 1e-4 * (1.0 + x[i].abs());
            if step_cap[i] > 0.0 {
                base.min(step_cap[i])
            } else {
                base
            }
        })
        .collect();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    for i in 0..d {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            xp[i] = x[i] + h[i];
            xp[j] = x[j] + h[j];
            let fpp = f(&xp);
            xp[j] = x[j] - h[j];
            let fpm = f(&xp);
            xp[i] = x[i] - h[i];
            let fmm = f(&xp);
            xp[j] = x[j] + h[j];
            let fmp = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// BFGS with backtracking line search. Stops when the numerical gradient
/// max-norm drops below `gtol`, on objective stagnation, or at `max_iter`.
pub fn minimize<F: Fn(&DVector<f64>) -> f64>(
    f: &F,
    x0: &DVector<f64>,
    max_iter: usize,
    gtol: f64,
) -> MinimizeResult {
    let d = x0.len();
    let mut x = x0.clone();
    let mut fx = f(&x);
    if !fx.is_finite() {
        let d = x.len();
        return MinimizeResult {
            x,
            f: fx,
            grad_inf_norm: f64::INFINITY,
            iterations: 0,
            gradient_converged: false,
            hinv: DMatrix::identity(d, d),
        };
    }
    let mut g = numerical_gradient(f, &x);
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut stalled = 0usize;
    let mut iter = 0usize;

    while iter < max_iter {
        let ginf = g.amax();
        if ginf < gtol {
            return MinimizeResult {
                x,
                f: fx,
                grad_inf_norm: ginf,
                iterations: iter,
                gradient_converged: true,
                hinv,
            };
        }
        let mut dir = -(&hinv * &g);
        if dir.dot(&g) >= 0.0 {
            // not a descent direction; reset curvature
            hinv = DMatrix::identity(d, d);
            dir = -g.clone();
        }

        // backtracking Armijo search
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..50 {
            x_new = &x + &dir * t;
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }

        let g_new = numerical_gradient(f, &x_new);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            // standard BFGS inverse-Hessian update
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            let shy = &s * hy.transpose();
            hinv = hinv - (&shy + shy.transpose()) * rho
                + (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        if (fx - f_new).abs() < 1e-13 * (1.0 + fx.abs()) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        iter += 1;
        if stalled >= 3 {
            break;
        }
    }

    let ginf = g.amax();
    MinimizeResult {
        x,
        f: fx,
        grad_inf_norm: ginf,
        iterations: iter,
        gradient_converged: ginf < gtol,
        hinv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &DVector<f64>| {
            (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 0.5 * x[0] * x[1]
        };
        let res = minimize(&f, &DVector::from_row_slice(&[5.0, 5.0]), 200, 1e-7);
        assert!(res.gradient_converged);
        // stationary point of the exact gradient system
        assert!((res.x[0] - 1.5094339622641509).abs() < 1e-4);
        assert!((res.x[1] + 2.0377358490566038).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &DVector<f64>| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let res = minimize(&f, &DVector::from_row_slice(&[-1.2, 1.0]), 500, 1e-6);
        assert!((res.x[0] - 1.0).abs() < 1e-3, "x = {:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &DVector<f64>| 2.0 * x[0] * x[0] + 3.0 * x[0] * x[1] + 4.0 * x[1] * x[1];
        let h = numerical_hessian(&f, &DVector::from_row_slice(&[0.3, -0.7]), &[0.0, 0.0]);
        assert!((h[(0, 0)] - 4.0).abs() < 1e-4);
        assert!((h[(0, 1)] - 3.0).abs() < 1e-4);
        assert!((h[(1, 1)] - 8.0).abs() < 1e-4);
    }
}
