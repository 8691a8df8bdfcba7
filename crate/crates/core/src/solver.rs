//! Box-constrained Broyden root finder.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroydenOptions {
    /// Converged once `max |f_i| <= tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra attempts from perturbed starting points.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BroydenOptions {
    fn default() -> Self {
        BroydenOptions {
            tolerance: 1e-10,
            max_iterations: 200,
            restarts: 5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    pub x: Vec<f64>,
    /// `max |f_i|` at `x`.
    pub residual: f64,
    /// Iterations summed over all attempts.
    pub iterations: usize,
    /// Attempts beyond the first that were needed.
    pub restarts: usize,
    pub converged: bool,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve `f(x) = 0` for `x` in the box `[lower, upper]^n`. Returns the best
/// point found; check `converged` before trusting it. Errors from `f` are
/// propagated.
pub fn broyden<F>(mut f: F, x0: &[f64], lower: f64, upper: f64, opts: &BroydenOptions) -> Result<RootReport>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<RootReport> = None;
    let mut iterations = 0;
    for attempt in 0..=opts.restarts {
        // Restarts spread over the box: its centre, a shrunken start, then
        // uniform random points. Perturbing the start alone tends to stay
        // inside the same flat region.
        let start: Vec<f64> = match attempt {
            0 => x0.to_vec(),
            1 => vec![0.5 * (lower + upper); x0.len()],
            2 => x0.iter().map(|&x| lower + 0.5 * (x - lower)).collect(),
            _ => x0.iter().map(|_| rng.gen_range(lower..=upper)).collect(),
        };
        let (x, residual, used) = attempt_solve(&mut f, &start, lower, upper, opts)?;
        iterations += used;
        let report = RootReport {
            x,
            residual,
            iterations,
            restarts: attempt,
            converged: residual <= opts.tolerance,
        };
        if report.converged {
            return Ok(report);
        }
        if best.as_ref().map_or(true, |b| report.residual < b.residual) {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least one attempt");
    best.iterations = iterations;
    Ok(best)
}

fn attempt_solve<F>(
    f: &mut F,
    start: &[f64],
    lower: f64,
    upper: f64,
    opts: &BroydenOptions,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = start.len();
    let clamp = |v: &DVector<f64>| v.map(|x| x.clamp(lower, upper));
    let eval = |f: &mut F, x: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(f(x.as_slice())?))
    };

    let mut x = clamp(&DVector::from_column_slice(start));
    let mut fx = eval(f, &x)?;
    let mut norm = max_abs(&fx);
    let mut h = match inverse_jacobian(f, &x, &fx, lower, upper)? {
        Some(h) => h,
        None => return Ok((x.as_slice().to_vec(), norm, 0)),
    };
    let mut fresh = true;
    let mut it = 0;
    while it < opts.max_iterations && norm > opts.tolerance {
        it += 1;
        let dx = -(&h * &fx);
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..12 {
            let trial = clamp(&(&x + &dx * t));
            let ft = eval(f, &trial)?;
            let nt = max_abs(&ft);
            if nt.is_finite() && nt < norm {
                accepted = Some((trial, ft, nt));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((xn, fnew, nn)) => {
                let s = &xn - &x;
                let y = &fnew - &fx;
                let hy = &h * &y;
                let denom = s.dot(&hy);
                if denom.abs() > 1e-300 && s.norm() > 0.0 {
                    let st_h = s.transpose() * &h;
                    h += (&s - &hy) * st_h / denom;
                }
                x = xn;
                fx = fnew;
                norm = nn;
                fresh = false;
            }
            None if !fresh => {
                match inverse_jacobian(f, &x, &fx, lower, upper)? {
                    Some(hn) => h = hn,
                    None => break,
                }
                fresh = true;
            }
            None => break,
        }
    }
    debug_assert_eq!(x.len(), n);
    Ok((x.as_slice().to_vec(), norm, it))
}

/// Forward-difference Jacobian, inverted. Steps point into the box.
fn inverse_jacobian<F>(
    f: &mut F,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    lower: f64,
    upper: f64,
) -> Result<Option<DMatrix<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(fx.len(), n);
    for j in 0..n {
        let mut step = 1e-7 * x[j].abs().max(1e-2);
        if x[j] + step > upper {
            step = -step;
        }
        let mut xp = x.clone();
        xp[j] = (x[j] + step).clamp(lower, upper);
        let actual = xp[j] - x[j];
        if actual == 0.0 {
            continue;
        }
        let fp = DVector::from_vec(f(xp.as_slice())?);
        jac.set_column(j, &((fp - fx) / actual));
    }
    if let Some(inv) = jac.clone().try_inverse() {
        return Ok(Some(inv));
    }
    let scale = jac.amax().max(1.0);
    Ok((jac + DMatrix::identity(n, n) * (1e-10 * scale)).try_inverse())
}
