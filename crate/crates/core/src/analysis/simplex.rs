//! Nelder–Mead on the unit box `[0, 1]^n`; trial points are clamped into the box.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// stop when `f_worst − f_best ≤ tolerance·|f_best| + absolute_floor`
    pub tolerance: f64,
    pub absolute_floor: f64,
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// best value after each iteration
    pub history: Vec<f64>,
}

fn clamp_unit(p: &mut [f64]) {
    for v in p {
        *v = v.clamp(0.0, 1.0);
    }
}

fn eval<F>(f: &F, p: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let v = f(p)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteResidual(p.to_vec()))
    }
}

pub fn minimize<F>(f: &F, start: &[f64], opts: &SimplexOptions) -> Result<SimplexOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = start.len();
    let mut x0 = start.to_vec();
    clamp_unit(&mut x0);
    let mut points = vec![x0.clone()];
    for i in 0..n {
        let mut p = x0.clone();
        // step inward when the start sits on the upper face
        p[i] = if p[i] + opts.initial_step <= 1.0 {
            p[i] + opts.initial_step
        } else {
            p[i] - opts.initial_step
        };
        points.push(p);
    }
    let values: Vec<Result<f64>> = points.par_iter().map(|p| eval(f, p)).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = points
        .into_iter()
        .zip(values)
        .map(|(p, v)| v.map(|v| (p, v)))
        .collect::<Result<_>>()?;

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst - best <= opts.tolerance * best.abs() + opts.absolute_floor {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp_unit(&mut p);
            p
        };

        let xr = along(1.0);
        let fr = eval(f, &xr)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(f, &xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(0.5);
                let fc = eval(f, &xc)?;
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(f, &xc)?;
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best_point = simplex[0].0.clone();
                let shrunk: Vec<Vec<f64>> = simplex[1..]
                    .iter()
                    .map(|(p, _)| best_point.iter().zip(p).map(|(b, v)| b + 0.5 * (v - b)).collect())
                    .collect();
                let values: Vec<Result<f64>> = shrunk.par_iter().map(|p| eval(f, p)).collect();
                for (slot, (p, v)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(values)) {
                    *slot = (p, v?);
                }
            }
        }
        let best_now = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        history.push(best_now);
    }
    let (point, value) = simplex.swap_remove(0);
    Ok(SimplexOutcome {
        point,
        value,
        iterations,
        converged,
        history,
    })
}
