// quick debug binary
use nalgebra::{DMatrix, DVector};
use sampsel::model::{mle_fit, two_step_fit, Dataset};
use sampsel::RngStream;

fn simulate(n: usize, alpha0: f64, alpha: &DVector<f64>, beta0: f64, beta: &DVector<f64>, sigma: f64, rho: f64, rng: &mut RngStream) -> Dataset {
    let q = alpha.len();
    let w = DMatrix::from_fn(n, q, |_, _| rng.standard_normal());
    let x = w.clone();
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let z2 = rng.standard_normal();
        let zu = rng.standard_normal();
        let e1 = sigma * (rho * z2 + (1.0 - rho * rho).sqrt() * zu);
        let sel = alpha0 + (w.row(i) * alpha)[0] + z2 > 0.0;
        s.push(sel);
        y.push(if sel { Some(beta0 + (x.row(i) * beta)[0] + e1) } else { None });
    }
    Dataset::new(x, w, s, y).unwrap()
}

fn main() {
    let mut rng = RngStream::new(105, 0);
    let alpha = DVector::from_row_slice(&[0.9]);
    let beta = DVector::from_row_slice(&[0.7]);
    let data = simulate(3000, 0.3, &alpha, 0.5, &beta, 1.0, 0.0, &mut rng);
    let ts = two_step_fit(&data).unwrap();
    println!("two-step ll {} converged {}", ts.loglik, ts.converged);
    let mle = mle_fit(&data, None).unwrap();
    println!("mle ll {} converged {} iters {} stderr? {}", mle.loglik, mle.converged, mle.iterations, mle.stderr.is_some());
    println!("params alpha {:?} beta {:?} sigma {} rho {}", mle.params.alpha[0], mle.params.beta[0], mle.params.sigma, mle.params.rho);
}
