//! Full GMRES with modified Gram-Schmidt and right preconditioning.

use crate::sparse::{dot, norm2};

/// Stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol_abs: 1e-8, tol_rel: 1e-8, max_iter: 500 }
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// `|b - A x|_2` recomputed after the solve.
    pub final_true_residual: f64,
    /// Set when the Krylov space became invariant before reaching the tolerance.
    pub breakdown: bool,
}

impl SolveReport {
    /// Whether the recorded residuals never increase.
    pub fn is_monotone(&self) -> bool {
        self.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

/// Solves `A x = b` starting from `x = 0`; with a preconditioner the iteration
/// runs on `A P^{-1} y = b`, `x = P^{-1} y`, so the monitored residual is the true one.
pub fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    precond: Option<&dyn Fn(&mut [f64])>,
    opts: &GmresOptions,
) -> (Vec<f64>, SolveReport) {
    assert!(opts.max_iter >= 1);
    let n = b.len();
    let beta = norm2(b);
    let tol = opts.tol_abs.max(opts.tol_rel * beta);
    let mut report = SolveReport { residual_history: vec![beta], ..Default::default() };
    if beta <= tol {
        report.converged = true;
        return (vec![0.0; n], report);
    }
    let m = opts.max_iter.min(n.max(1));
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Hessenberg columns, already rotated
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..m {
        z.copy_from_slice(&basis[k]);
        if let Some(p) = precond {
            p(&mut z);
        }
        apply(&z, &mut w);
        let mut h = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            h[i] = hij;
            for (wl, vl) in w.iter_mut().zip(v) {
                *wl -= hij * vl;
            }
        }
        let hnext = norm2(&w);
        h[k + 1] = hnext;
        for i in 0..k {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let r = h[k].hypot(h[k + 1]);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (h[k] / r, h[k + 1] / r) };
        cs.push(c);
        sn.push(s);
        h[k] = r;
        h[k + 1] = 0.0;
        g.push(-s * g[k]);
        g[k] *= c;
        hcols.push(h);
        let res = g[k + 1].abs();
        report.iterations = k + 1;
        report.residual_history.push(res);
        if res <= tol {
            report.converged = true;
            break;
        }
        if hnext <= 1e-14 * beta {
            report.breakdown = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }
    // back substitution for the Krylov coefficients
    let k = report.iterations;
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= hcols[j][i] * y[j];
        }
        y[i] = if hcols[i][i] != 0.0 { s / hcols[i][i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (xl, vl) in x.iter_mut().zip(v) {
            *xl += yi * vl;
        }
    }
    if let Some(p) = precond {
        p(&mut x);
    }
    apply(&x, &mut w);
    report.final_true_residual = b.iter().zip(&w).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    if report.breakdown && report.final_true_residual <= tol {
        report.converged = true;
    }
    (x, report)
}
