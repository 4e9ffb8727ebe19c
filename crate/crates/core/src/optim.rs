//! Gradient-free local minimization (Nelder–Mead with box clamping).

/// Stopping rules. The search ends once every enabled tolerance holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Spread of objective values across the simplex.
    pub f_tol: Option<f64>,
    /// Largest vertex distance from the best vertex (infinity norm).
    pub x_tol: Option<f64>,
    pub max_evals: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { f_tol: Some(1e-6), x_tol: Some(1e-4), max_evals: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn clamp_into(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Minimizes `f` starting from `x0` with an axis-aligned initial simplex of size `steps`.
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: Option<&[(f64, f64)]>,
    cfg: NelderMeadConfig,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    clamp_into(&mut start, bounds);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut p = start.clone();
        p[i] += steps[i];
        clamp_into(&mut p, bounds);
        if p[i] == start[i] {
            p[i] -= steps[i];
            clamp_into(&mut p, bounds);
        }
        let v = eval(&p, &mut evals);
        simplex.push((p, v));
    }

    let mut converged = false;
    while evals < cfg.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_done = cfg.f_tol.is_none_or(|ft| best.is_finite() && (worst - best).abs() <= ft);
        let x_done = cfg.x_tol.is_none_or(|xt| {
            let size = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            size <= xt
        });
        if (cfg.f_tol.is_some() || cfg.x_tol.is_some()) && f_done && x_done {
            converged = true;
            break;
        }
        if n == 0 {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp_into(&mut p, bounds);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let b = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = b.iter().zip(&item.0).map(|(bv, v)| bv + 0.5 * (v - bv)).collect();
            clamp_into(&mut p, bounds);
            let v = eval(&p, &mut evals);
            *item = (p, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals, converged }
}
