//! Quasi-Newton descent and an augmented-Lagrangian penalty driver.

/// Result of an unconstrained minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 10, max_iter: 500, grad_tol: 1e-9 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Limited-memory BFGS with Armijo backtracking. `f` returns the value and
/// writes the gradient into its second argument.
pub fn lbfgs<F>(mut f: F, x0: &[f64], opts: LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < opts.max_iter {
        if inf_norm(&g) < opts.grad_tol || !fx.is_finite() {
            break;
        }
        iterations += 1;

        // two-loop recursion
        dir.copy_from_slice(&g);
        let m = s_hist.len();
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &dir);
            alpha_buf[i] = a;
            dir.iter_mut().zip(&y_hist[i]).for_each(|(d, y)| *d -= a * y);
        }
        let gamma = if m > 0 {
            dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1])
        } else {
            1.0 / inf_norm(&g).max(1.0)
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &dir);
            dir.iter_mut().zip(&s_hist[i]).for_each(|(d, s)| *d += s * (alpha_buf[i] - b));
        }
        dir.iter_mut().for_each(|d| *d = -*d);

        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi * scale);
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..40 {
            x_new.iter_mut().zip(x.iter().zip(&dir)).for_each(|(xn, (xi, di))| *xn = xi + step * di);
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let f_old = fx;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        if f_old - fx <= 1e-15 * fx.abs().max(1e-300) {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Minimum { grad_norm: inf_norm(&g), x, value: fx, iterations }
}

/// Value, gradient, constraint values and row-major constraint Jacobian at a point.
pub struct ConstrainedEval {
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub constraints: Vec<f64>,
    pub jacobian: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct PenaltyOptions {
    pub rho0: f64,
    pub max_outer: usize,
    pub tol: f64,
    pub inner: LbfgsOptions,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions { rho0: 10.0, max_outer: 40, tol: 1e-8, inner: LbfgsOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct ConstrainedMinimum {
    pub x: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub outer_iterations: usize,
}

/// Minimizes `objective` subject to `constraints = 0` by an augmented
/// Lagrangian: L = f + λ·c + ρ/2 |c|², with the multiplier update λ += ρc and
/// penalty doubling whenever the residual fails to shrink by a factor 4.
pub fn augmented_lagrangian<F>(eval: F, x0: &[f64], opts: PenaltyOptions) -> ConstrainedMinimum
where
    F: Fn(&[f64]) -> ConstrainedEval,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let first = eval(&x);
    let m = first.constraints.len();
    let mut lambda = vec![0.0; m];
    let mut rho = opts.rho0;
    let residual_of = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut residual = residual_of(&first.constraints);
    let mut outer = 0;

    while outer < opts.max_outer {
        outer += 1;
        let lam = lambda.clone();
        let r = rho;
        let inner = LbfgsOptions { grad_tol: opts.inner.grad_tol.max(1e-2 * residual.min(1.0)), ..opts.inner };
        let res = lbfgs(
            |xv, grad| {
                let e = eval(xv);
                let mut value = e.objective;
                grad.copy_from_slice(&e.gradient);
                for (k, ck) in e.constraints.iter().enumerate() {
                    let w = lam[k] + r * ck;
                    value += lam[k] * ck + 0.5 * r * ck * ck;
                    let row = &e.jacobian[k * n..(k + 1) * n];
                    grad.iter_mut().zip(row).for_each(|(g, j)| *g += w * j);
                }
                value
            },
            &x,
            inner,
        );
        x = res.x;
        let e = eval(&x);
        let new_residual = residual_of(&e.constraints);
        for (l, c) in lambda.iter_mut().zip(&e.constraints) {
            *l += rho * c;
        }
        if new_residual > 0.25 * residual {
            rho *= 2.0;
        }
        residual = new_residual;
        if residual < opts.tol {
            break;
        }
    }
    let e = eval(&x);
    ConstrainedMinimum { objective: e.objective, residual: residual_of(&e.constraints), x, outer_iterations: outer }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_rosenbrock() {
        let r = lbfgs(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            LbfgsOptions { max_iter: 2000, ..Default::default() },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn penalty_on_circle() {
        // min x + y on the unit circle -> (-1/√2, -1/√2)
        let r = augmented_lagrangian(
            |x| ConstrainedEval {
                objective: x[0] + x[1],
                gradient: vec![1.0, 1.0],
                constraints: vec![x[0] * x[0] + x[1] * x[1] - 1.0],
                jacobian: vec![2.0 * x[0], 2.0 * x[1]],
            },
            &[0.3, -0.2],
            PenaltyOptions::default(),
        );
        let s = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.x[0] - s).abs() < 1e-6 && (r.x[1] - s).abs() < 1e-6);
        assert!(r.residual < 1e-8);
    }
}
