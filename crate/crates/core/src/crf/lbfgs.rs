//! Limited-memory BFGS minimizer with Armijo backtracking.

use std::collections::VecDeque;

use super::train::StopReason;
use super::CrfError;

pub(crate) struct Options {
    pub history: usize,
    pub max_iterations: usize,
    pub tol_objective: f64,
    pub tol_gradient: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
    /// Function value after each accepted iterate, starting with `x0`.
    pub trace: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `-H g` by the two-loop recursion.
fn direction(g: &[f64], memory: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for p in memory.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(p) = memory.back() {
        let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for (p, a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &Options) -> Result<Outcome, CrfError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), CrfError>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(CrfError::NonFiniteObjective(fx));
    }
    let mut trace = vec![fx];
    let mut memory: VecDeque<Pair> = VecDeque::new();
    let mut iterations = 0;
    let finish = |x, value, gradient, iterations, reason, trace| {
        Ok(Outcome { x, value, gradient, iterations, reason, trace })
    };

    if inf_norm(&g) < opts.tol_gradient {
        return finish(x, fx, g, 0, StopReason::Gradient, trace);
    }
    loop {
        let mut d = direction(&g, &memory);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = if memory.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        let mut any_finite = false;
        for _ in 0..MAX_BACKTRACKS {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fxn, gn) = f(&xn)?;
            if fxn.is_finite() {
                any_finite = true;
                if fxn <= fx + ARMIJO * step * slope {
                    accepted = Some((xn, fxn, gn));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((xn, fxn, gn)) = accepted else {
            if !memory.is_empty() {
                memory.clear();
                continue;
            }
            if !any_finite {
                return Err(CrfError::NonFiniteObjective(f64::NAN));
            }
            return finish(x, fx, g, iterations, StopReason::LineSearch, trace);
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 {
            memory.push_back(Pair { s, y, rho: 1.0 / sy });
            if memory.len() > opts.history {
                memory.pop_front();
            }
        }
        let relative = (fx - fxn).abs() / fx.abs().max(fxn.abs()).max(1.0);
        x = xn;
        fx = fxn;
        g = gn;
        iterations += 1;
        trace.push(fx);

        let reason = if inf_norm(&g) < opts.tol_gradient {
            Some(StopReason::Gradient)
        } else if relative < opts.tol_objective {
            Some(StopReason::Objective)
        } else if iterations >= opts.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(reason) = reason {
            return finish(x, fx, g, iterations, reason, trace);
        }
    }
}
