//! Nelder-Mead simplex descent with standard reflection, expansion,
//! contraction and shrink coefficients (1, 2, 0.5, 0.5).
//!
//! Convergence requires both a collapsed simplex (per-coordinate diameter
//! below `tol * (1 + |x_i|)` around the best vertex) and a flat one (value
//! spread below `value_spread_tol` absolute). Budgeted by objective
//! evaluations; the best vertex is returned either way.

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub tol: f64,
    pub value_spread_tol: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

pub(crate) fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    opts: &SimplexOptions,
) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len());
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for d in 0..dim {
        let mut x = x0.to_vec();
        x[d] += steps[d];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = &simplex[0];
        let diameter_ok = (0..dim).all(|d| {
            let scale = 1.0 + best.0[d].abs();
            simplex
                .iter()
                .all(|(x, _)| (x[d] - best.0[d]).abs() <= opts.tol * scale)
        });
        let spread = simplex[dim].1 - simplex[0].1;
        if diameter_ok && spread.abs() <= opts.value_spread_tol {
            return SimplexOutcome {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                evals,
                converged: true,
            };
        }
        if evals >= opts.max_evals {
            return SimplexOutcome {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                evals,
                converged: false,
            };
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let combine = |a: &[f64], t: f64, b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(&ai, &bi)| ai + t * (ai - bi))
                .collect()
        };

        let reflected = combine(&centroid, 1.0, &worst.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, 2.0, &worst.0);
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        // Contract: outside toward the reflected point if it improved on
        // the worst vertex, inside toward the worst otherwise.
        let (contracted, fc) = if fr < worst.1 {
            let x = combine(&centroid, 0.5, &worst.0);
            let v = eval(&x, &mut evals);
            if v <= fr {
                (x, v)
            } else {
                shrink(&mut simplex, &mut eval, &mut evals);
                continue;
            }
        } else {
            let x = combine(&centroid, -0.5, &worst.0);
            let v = eval(&x, &mut evals);
            if v < worst.1 {
                (x, v)
            } else {
                shrink(&mut simplex, &mut eval, &mut evals);
                continue;
            }
        };
        simplex[dim] = (contracted, fc);
    }
}

fn shrink<E>(simplex: &mut [(Vec<f64>, f64)], eval: &mut E, evals: &mut usize)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let best = simplex[0].0.clone();
    for vertex in simplex.iter_mut().skip(1) {
        for (xi, bi) in vertex.0.iter_mut().zip(&best) {
            *xi = bi + 0.5 * (*xi - bi);
        }
        vertex.1 = eval(&vertex.0, evals);
    }
}
