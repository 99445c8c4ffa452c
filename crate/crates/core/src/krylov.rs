//! Matrix-free (preconditioned) conjugate gradient with sequential,
//! fixed-order reductions.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Relative residual target `||W r|| <= tol ||W b||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional additional bound on `max |r|`.
    pub abs_inf_tol: Option<f64>,
    /// Norm the residual is measured against instead of `||W b||`.
    pub reference_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final relative residual in the weighted norm.
    pub rel_residual: f64,
    pub converged: bool,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

fn weighted_norm(r: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => dot(r, r).sqrt(),
        Some(w) => {
            let mut s = 0.0;
            for (x, y) in r.iter().zip(w) {
                let t = x * y;
                s += t * t;
            }
            s.sqrt()
        }
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves `A x = b` for symmetric positive (semi)definite `A` given by `apply`.
///
/// `x` holds the initial guess on entry. `precond` maps a residual to the
/// preconditioned residual (identity when `None`), `weights` changes the norm
/// of the stopping test to `||weights * r||`, and `project` is applied to
/// every residual, e.g. to keep it mean-free for a singular Neumann operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    precond: Option<&dyn Fn(&[f64], &mut [f64])>,
    weights: Option<&[f64]>,
    project: Option<&dyn Fn(&mut [f64])>,
    settings: &CgSettings,
) -> CgReport {
    let n = b.len();
    let bnorm = settings.reference_norm.unwrap_or_else(|| weighted_norm(b, weights));
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    if let Some(p) = project {
        p(&mut r);
    }
    if bnorm == 0.0 {
        let res = weighted_norm(&r, weights);
        if res == 0.0 {
            return CgReport {
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
            };
        }
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let done = |r: &[f64], rel: f64| -> bool {
        rel <= settings.tol && settings.abs_inf_tol.is_none_or(|t| inf_norm(r) <= t)
    };
    let mut rel = weighted_norm(&r, weights) / scale;
    if done(&r, rel) {
        return CgReport {
            iterations: 0,
            rel_residual: rel,
            converged: true,
        };
    }
    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Some(m) => m(r, z),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=settings.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgReport {
                iterations: it,
                rel_residual: rel,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        rel = weighted_norm(&r, weights) / scale;
        if done(&r, rel) {
            return CgReport {
                iterations: it,
                rel_residual: rel,
                converged: true,
            };
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    CgReport {
        iterations: settings.max_iter,
        rel_residual: rel,
        converged: false,
    }
}
