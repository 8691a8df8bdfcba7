//! Closed-form thresholds, finite-size and scaling analysis, percolation
//! exponent tables and interdependent-network critical points.

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netcore::{theta_from_c, theta_from_p, LatticeFamily};
use crate::rules::{ParallelAcc, RuleSystem};
use crate::spreduce::bethe_exact_value;

pub use crate::fastapprox::ThresholdEstimate;

/// Bethe-lattice thresholds in units of `pi/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetheThresholds {
    pub k: usize,
    /// From `2 sin^2(theta) = 1/(k-1)`.
    pub classical: f64,
    pub cep: f64,
    pub qep_swap: f64,
    pub qep_ghz: f64,
    pub concurrence: f64,
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(invalid(format!("coordination number k = {k} must be >= 3")));
    }
    Ok(())
}

pub fn bethe_thresholds(k: usize) -> Result<BetheThresholds> {
    check_k(k)?;
    let km1 = (k - 1) as f64;
    Ok(BetheThresholds {
        k,
        classical: theta_from_p(1.0 / km1)? / FRAC_PI_4,
        cep: 4.0 / PI * (1.0 / (2.0 * km1).sqrt()).asin(),
        qep_swap: qep_swap_threshold(k)?.theta_quarter_pi,
        qep_ghz: qep_ghz_threshold(k)?.theta_quarter_pi,
        concurrence: 2.0 / PI * (1.0 / km1.sqrt()).asin(),
    })
}

/// Root of a scalar equation and the threshold it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QepRoot {
    pub root: f64,
    pub residual: f64,
    /// Singlet conversion probability at threshold.
    pub probability: f64,
    pub theta_quarter_pi: f64,
}

/// First sign change of `f` on a grid over `(lo, hi)`, refined by bisection.
pub fn bracket_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> Result<f64> {
    let xs: Vec<f64> = (0..=grid)
        .map(|i| lo + (hi - lo) * i as f64 / grid as f64)
        .collect();
    let pair = xs
        .windows(2)
        .find(|w| {
            let (a, b) = (f(w[0]), f(w[1]));
            a == 0.0 || a.signum() != b.signum()
        })
        .ok_or(Error::NoBracket { lo, hi })?;
    let (mut a, mut b) = (pair[0], pair[1]);
    let mut fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn qep_theta(probability: f64) -> f64 {
    4.0 / PI * (probability / 2.0).sqrt().asin()
}

/// `2x + x^k (kx - x - k - 1) - (1 - x)/(k - 1)`.
pub fn swap_polynomial(k: usize, x: f64) -> f64 {
    let kf = k as f64;
    2.0 * x + x.powi(k as i32) * (kf * x - x - kf - 1.0) - (1.0 - x) / (kf - 1.0)
}

/// q-swapping threshold on the Bethe lattice: `P = 2x - x^2`.
pub fn qep_swap_threshold(k: usize) -> Result<QepRoot> {
    check_k(k)?;
    // x = 1 is always a root; the physical one lies strictly inside.
    let x = bracket_root(|x| swap_polynomial(k, x), 1e-12, 1.0 - 1e-9, 1000)?;
    let probability = 2.0 * x - x * x;
    Ok(QepRoot {
        root: x,
        residual: swap_polynomial(k, x).abs(),
        probability,
        theta_quarter_pi: qep_theta(probability),
    })
}

/// `1 - (1 - y) sum_{i=0}^{floor(k/2 - 1)} C(2i, i) 4^-i (2y - y^2)^i - 1/(k - 1)`.
pub fn ghz_equation(k: usize, y: f64) -> f64 {
    let top = (k as f64 / 2.0 - 1.0).floor().max(0.0) as usize;
    let z = 2.0 * y - y * y;
    let mut term = 1.0; // C(2i, i) 4^-i z^i
    let mut sum = 0.0;
    for i in 0..=top {
        if i > 0 {
            term *= (2 * i - 1) as f64 / (2 * i) as f64 * z;
        }
        sum += term;
    }
    1.0 - (1.0 - y) * sum - 1.0 / (k as f64 - 1.0)
}

/// GHZ-assisted threshold on the Bethe lattice: `P = y`.
pub fn qep_ghz_threshold(k: usize) -> Result<QepRoot> {
    check_k(k)?;
    let y = bracket_root(|y| ghz_equation(k, y), 1e-12, 1.0 - 1e-12, 1000)?;
    Ok(QepRoot {
        root: y,
        residual: ghz_equation(k, y).abs(),
        probability: y,
        theta_quarter_pi: qep_theta(y),
    })
}

/// Published regular-lattice thresholds in units of `pi/4`. These come from
/// numerical studies and are stored, not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeReference {
    pub family: LatticeFamily,
    pub cep: f64,
    pub qep: f64,
    pub qep_ghz: f64,
    pub concurrence: f64,
    /// Uncertainty in the last printed digit of `concurrence`.
    pub concurrence_error: f64,
}

pub fn lattice_reference(family: LatticeFamily) -> LatticeReference {
    let (cep, qep, qep_ghz, concurrence) = match family {
        LatticeFamily::Square => (0.670, 0.670, 0.584, 0.42),
        LatticeFamily::Honeycomb => (0.777, 0.761, 0.745, 0.51),
        LatticeFamily::Triangular => (0.545, 0.545, 0.481, 0.32),
    };
    LatticeReference {
        family,
        cep,
        qep,
        qep_ghz,
        concurrence,
        concurrence_error: 0.08,
    }
}

/// Exact bond-percolation threshold of the infinite lattice.
pub fn bond_threshold(family: LatticeFamily) -> f64 {
    let s = (PI / 18.0).sin();
    match family {
        LatticeFamily::Square => 0.5,
        LatticeFamily::Honeycomb => 1.0 - 2.0 * s,
        LatticeFamily::Triangular => 2.0 * s,
    }
}

/// CEP threshold implied by the bond threshold, `(4/pi) asin sqrt(p_c / 2)`.
pub fn cep_from_bond_threshold(family: LatticeFamily) -> f64 {
    qep_theta(bond_threshold(family))
}

/// Concurrence above which a Bethe tree (root to all leaves) is exactly 1.
pub fn bethe_saturation(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(invalid(format!("coordination number k = {k} must be >= 2")));
    }
    let kf = k as f64;
    let num = 0.5f64.powf(1.0 / kf) - 0.25f64.powf(1.0 / kf);
    let den = 0.5f64.powf((kf - 1.0) / kf) - 0.25f64.powf((kf - 1.0) / kf);
    Ok((num / den).sqrt())
}

/// Terminal value of Bethe trees of every depth `1..=max_layers` at link
/// value `x`, in one pass.
pub fn bethe_depth_profile(k: usize, system: RuleSystem, x: f64, max_layers: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_layers);
    // Value below a non-root node whose subtree has the current depth.
    let mut sub = 1.0;
    for _ in 0..max_layers {
        let mut root = ParallelAcc::new(system);
        root.push_many(system.series2(x, sub), k as f64);
        out.push(root.finish());
        let mut inner = ParallelAcc::new(system);
        inner.push_many(system.series2(x, sub), (k - 1) as f64);
        sub = inner.finish();
    }
    out
}

/// Options for [`finite_size_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflectionOptions {
    /// Central-difference step.
    pub step: f64,
    /// Scan points across the bracket.
    pub grid: usize,
    /// Final bracket width.
    pub tolerance: f64,
}

impl Default for InflectionOptions {
    fn default() -> Self {
        InflectionOptions {
            step: 1e-4,
            grid: 400,
            tolerance: 1e-6,
        }
    }
}

/// Inflection point of an increasing sigmoid on `[lo, hi]`: the first place
/// the central-difference second derivative turns from positive to negative.
pub fn finite_size_threshold<F>(f: F, lo: f64, hi: f64, opts: &InflectionOptions) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = opts.step;
    let d2 = |x: f64| -> Result<f64> { Ok((f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h)) };
    let (a0, b0) = (lo + h, hi - h);
    if b0 <= a0 {
        return Err(invalid("inflection bracket narrower than the difference step"));
    }
    let mut prev_x = a0;
    let mut prev = d2(a0)?;
    let mut bracket = None;
    for i in 1..=opts.grid {
        let x = a0 + (b0 - a0) * i as f64 / opts.grid as f64;
        let cur = d2(x)?;
        if prev > 0.0 && cur <= 0.0 {
            bracket = Some((prev_x, x));
            break;
        }
        prev_x = x;
        prev = cur;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoBracket { lo, hi })?;
    while b - a > opts.tolerance {
        let m = 0.5 * (a + b);
        if d2(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Half-point and inflection estimates for a uniform Bethe tree, in units of `pi/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetheFiniteSize {
    pub layers: usize,
    pub half_point: f64,
    pub inflection: f64,
}

pub fn bethe_finite_size(k: usize, layers: usize, system: RuleSystem) -> Result<BetheFiniteSize> {
    if k < 2 || layers < 1 {
        return Err(invalid("Bethe tree needs k >= 2 and L >= 1"));
    }
    let value = |theta: f64| -> Result<f64> {
        let w = crate::netcore::LinkWeight::new(theta.clamp(0.0, FRAC_PI_4))?;
        Ok(bethe_exact_value(k, layers, system, system.value(w)))
    };
    let (mut lo, mut hi) = (0.0, FRAC_PI_4);
    while hi - lo > crate::fastapprox::HALFPOINT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if value(mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let inflection = finite_size_threshold(value, 1e-3, FRAC_PI_4 - 1e-3, &Default::default())?;
    Ok(BetheFiniteSize {
        layers,
        half_point: 0.5 * (lo + hi) / FRAC_PI_4,
        inflection: inflection / FRAC_PI_4,
    })
}

/// Ordinary least squares `y = a + b x`: `(b, se(b), a, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::InsufficientData(format!("{n} points for a line fit")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("no spread in x".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok((slope, se, intercept, r2))
}

/// Decay of the terminal value with path length at fixed distance from threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCurve {
    /// `|x - x_th|` in the rule system's link variable.
    pub distance: f64,
    pub lengths: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fitted quantity, e.g. `"z_nu"` or `"1/z_nu"`.
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub distance_window: (f64, f64),
    pub length_window: (f64, f64),
    pub r_squared: f64,
    /// `(distance, cutoff length)` or `(length, threshold shift)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// Fit `value ~ l^-a exp(-l / l*)` per curve, then `l* ~ distance^-z_nu`.
/// Needs at least five curves spanning two decades in distance.
pub fn fit_cutoff_scaling(
    curves: &[CutoffCurve],
    prefactor_exponent: f64,
    length_window: (f64, f64),
) -> Result<ScalingFit> {
    if curves.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} curves; need at least 5",
            curves.len()
        )));
    }
    let dmin = curves.iter().map(|c| c.distance).fold(f64::INFINITY, f64::min);
    let dmax = curves.iter().map(|c| c.distance).fold(0.0, f64::max);
    if !(dmin > 0.0) || dmax / dmin < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "distances span [{dmin:e}, {dmax:e}]; need two decades"
        )));
    }
    let mut points = Vec::with_capacity(curves.len());
    for c in curves {
        let (xs, ys): (Vec<f64>, Vec<f64>) = c
            .lengths
            .iter()
            .zip(&c.values)
            .filter(|(&l, &v)| l >= length_window.0 && l <= length_window.1 && v > 0.0)
            .map(|(&l, &v)| (l, v.ln() + prefactor_exponent * l.ln()))
            .unzip();
        let (slope, ..) = linear_fit(&xs, &ys)?;
        if slope >= 0.0 {
            return Err(Error::InsufficientData(format!(
                "no exponential decay at distance {:e}",
                c.distance
            )));
        }
        points.push((c.distance, -1.0 / slope));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, se, _, r2) = linear_fit(&lx, &ly)?;
    Ok(ScalingFit {
        name: "z_nu".into(),
        value: -slope,
        stderr: se.max(f64::EPSILON * slope.abs()),
        distance_window: (dmin, dmax),
        length_window,
        r_squared: r2,
        points,
    })
}

/// Fit windows for the Bethe cutoff-length analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingWindow {
    pub distance_min: f64,
    pub distance_max: f64,
    pub distances: usize,
    pub length_min: f64,
    pub length_max: f64,
    pub length_samples: usize,
}

impl Default for ScalingWindow {
    fn default() -> Self {
        ScalingWindow {
            distance_min: 1e-6,
            distance_max: 1e-4,
            distances: 5,
            length_min: 1e3,
            length_max: 1e5,
            length_samples: 200,
        }
    }
}

/// Critical link value of the Bethe lattice in the system's own variable:
/// `1/(k-1)` for `p`, `1/sqrt(k-1)` for `c`.
pub fn bethe_critical_value(k: usize, system: RuleSystem) -> f64 {
    let km1 = (k - 1) as f64;
    match system {
        RuleSystem::Classical => 1.0 / km1,
        RuleSystem::Concurrence => 1.0 / km1.sqrt(),
    }
}

/// Decay curves of Bethe trees just below threshold, one per distance.
pub fn bethe_cutoff_curves(k: usize, system: RuleSystem, window: &ScalingWindow) -> Result<Vec<CutoffCurve>> {
    check_k(k)?;
    if window.distances < 2 || window.length_samples < 3 {
        return Err(invalid("scaling window needs at least 2 distances and 3 lengths"));
    }
    let critical = bethe_critical_value(k, system);
    let max_layers = window.length_max.ceil() as usize;
    let ratio = (window.distance_max / window.distance_min).ln();
    let distances: Vec<f64> = (0..window.distances)
        .map(|i| window.distance_min * (ratio * i as f64 / (window.distances - 1) as f64).exp())
        .collect();
    let mut lengths: Vec<usize> = (0..window.length_samples)
        .map(|i| {
            let t = i as f64 / (window.length_samples - 1) as f64;
            (window.length_min + t * (window.length_max - window.length_min)) as usize
        })
        .collect();
    lengths.dedup();
    Ok(distances
        .par_iter()
        .map(|&d| {
            let profile = bethe_depth_profile(k, system, critical - d, max_layers);
            CutoffCurve {
                distance: d,
                lengths: lengths.iter().map(|&l| l as f64).collect(),
                values: lengths.iter().map(|&l| profile[l - 1]).collect(),
            }
        })
        .collect())
}

/// Prefactor exponent `a` in `value ~ l^-a exp(-l/l*)` for Bethe trees:
/// `1/2` for concurrence, `1` for classical percolation.
pub fn bethe_prefactor_exponent(system: RuleSystem) -> f64 {
    match system {
        RuleSystem::Classical => 1.0,
        RuleSystem::Concurrence => 0.5,
    }
}

pub fn bethe_cutoff_scaling(k: usize, system: RuleSystem, window: &ScalingWindow) -> Result<ScalingFit> {
    let curves = bethe_cutoff_curves(k, system, window)?;
    fit_cutoff_scaling(
        &curves,
        bethe_prefactor_exponent(system),
        (window.length_min, window.length_max),
    )
}

/// Inflection thresholds `x_th(l)` of Bethe trees in the system's link
/// variable, and the fit of `|x_th(l) - x_th| ~ l^(-1/z_nu)`.
pub fn bethe_threshold_shift(k: usize, system: RuleSystem, lengths: &[usize]) -> Result<ScalingFit> {
    check_k(k)?;
    let critical = bethe_critical_value(k, system);
    let points = lengths
        .par_iter()
        .map(|&l| {
            // The transition sharpens like 1/l, so scale the difference step with it.
            let opts = InflectionOptions {
                step: (0.05 / l as f64).min(1e-4),
                grid: 400,
                tolerance: (1e-3 / l as f64).min(1e-6),
            };
            let half_width = (20.0 / l as f64).min(0.3);
            let x = finite_size_threshold(
                |x| Ok(bethe_exact_value(k, l, system, x.clamp(0.0, 1.0))),
                critical - half_width,
                critical + half_width,
                &opts,
            )?;
            Ok((l as f64, (critical - x).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, se, _, r2) = linear_fit(&lx, &ly)?;
    let lmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let lmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(ScalingFit {
        name: "1/z_nu".into(),
        value: -slope,
        stderr: se.max(f64::EPSILON * slope.abs()),
        distance_window: (0.0, 0.0),
        length_window: (lmin, lmax),
        r_squared: r2,
        points,
    })
}

/// Critical exponents of classical percolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub lambda: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub nu: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Fractal dimension, absent where it is not defined.
    pub fractal_dim: Option<f64>,
}

impl ExponentSet {
    /// `beta - (tau - 2)/sigma` and `gamma - (3 - tau)/sigma`.
    pub fn scaling_residuals(&self) -> (f64, f64) {
        (
            self.beta - (self.tau - 2.0) / self.sigma,
            self.gamma - (3.0 - self.tau) / self.sigma,
        )
    }

    /// `d_f - (d - beta/nu)` for a lattice of dimension `d`.
    pub fn hyperscaling_residual(&self, d: f64) -> Option<f64> {
        self.fractal_dim.map(|df| df - (d - self.beta / self.nu))
    }
}

/// Exponents of percolation on scale-free networks with degree exponent
/// `lambda > 2`. `lambda = 3` separates two regimes and is rejected.
pub fn scale_free_exponents(lambda: f64) -> Result<ExponentSet> {
    if !(lambda > 2.0) || !lambda.is_finite() {
        return Err(invalid(format!("degree exponent {lambda} must be finite and > 2")));
    }
    let l = lambda;
    let set = if l < 3.0 {
        ExponentSet {
            lambda: Some(l),
            beta: 1.0 / (3.0 - l),
            gamma: -1.0,
            nu: (l - 1.0) / (3.0 - l),
            sigma: (3.0 - l) / (l - 2.0),
            tau: (2.0 * l - 3.0) / (l - 2.0),
            fractal_dim: None,
        }
    } else if l == 3.0 {
        return Err(invalid("lambda = 3 is a marginal case with logarithmic corrections"));
    } else if l < 4.0 {
        ExponentSet {
            lambda: Some(l),
            beta: 1.0 / (l - 3.0),
            gamma: 1.0,
            nu: (l - 1.0) / (l - 3.0),
            sigma: (l - 3.0) / (l - 2.0),
            tau: (2.0 * l - 3.0) / (l - 2.0),
            fractal_dim: Some(2.0 * (l - 2.0) / (l - 3.0)),
        }
    } else {
        ExponentSet {
            lambda: Some(l),
            beta: 1.0,
            gamma: 1.0,
            nu: 3.0,
            sigma: 0.5,
            tau: 2.5,
            fractal_dim: Some(4.0),
        }
    };
    Ok(set)
}

/// Two-dimensional lattice percolation exponents.
pub fn two_dimensional_exponents() -> ExponentSet {
    ExponentSet {
        lambda: None,
        beta: 5.0 / 36.0,
        gamma: 43.0 / 18.0,
        nu: 4.0 / 3.0,
        sigma: 36.0 / 91.0,
        tau: 187.0 / 91.0,
        fractal_dim: Some(91.0 / 48.0),
    }
}

/// Mean-field percolation exponents (upper critical dimension 6).
pub fn mean_field_exponents() -> ExponentSet {
    ExponentSet {
        lambda: None,
        beta: 1.0,
        gamma: 1.0,
        nu: 0.5,
        sigma: 0.5,
        tau: 2.5,
        fractal_dim: Some(4.0),
    }
}

/// Lower real branch of the Lambert function: `w e^w = x`, `w <= -1`,
/// for `x` in `[-1/e, 0)`.
pub fn lambert_w_minus(x: f64) -> Result<f64> {
    let branch_point = -(-1.0f64).exp();
    if (x - branch_point).abs() <= 1e-15 {
        return Ok(-1.0);
    }
    if !(x > branch_point && x < 0.0) {
        return Err(Error::OutOfRange {
            what: "Lambert W_-1 argument",
            value: x,
            lo: branch_point,
            hi: 0.0,
        });
    }
    let f = |w: f64| w * w.exp() - x;
    let mut lo = -2.0;
    while f(lo) <= 0.0 {
        lo *= 2.0;
    }
    let mut hi = -1.0;
    // f decreases on the bracket.
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if f(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = (w + 1.0) * w.exp();
        if d == 0.0 {
            break;
        }
        let next = w - f(w) / d;
        if f(next).abs() >= f(w).abs() {
            break;
        }
        w = next;
    }
    Ok(w)
}

/// Giant-component fraction of `n` interdependent ER layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdepPoint {
    pub mean_degree: f64,
    pub p: f64,
    pub layers: usize,
    pub giant: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn interdep_map(mean_degree: f64, p: f64, n: usize, giant: f64) -> f64 {
    p * (-(-mean_degree * giant).exp_m1()).powi(n as i32)
}

const INTERDEP_MAX_ITER: usize = 2_000_000;

/// Fixed point of `P = p [1 - exp(-k P)]^n` by damped iteration from `start`.
pub fn interdep_iterate(mean_degree: f64, p: f64, n: usize, start: f64) -> Result<InterdepPoint> {
    if !(mean_degree > 0.0) || !(0.0..=1.0).contains(&p) || n < 1 {
        return Err(invalid(format!(
            "need mean degree > 0, p in [0, 1], n >= 1 (got {mean_degree}, {p}, {n})"
        )));
    }
    let mut giant = start;
    let mut iterations = 0;
    while iterations < INTERDEP_MAX_ITER {
        iterations += 1;
        let next = 0.5 * giant + 0.5 * interdep_map(mean_degree, p, n, giant);
        let step = (next - giant).abs();
        giant = next;
        if step <= 1e-15 * giant.max(1e-300) || giant < 1e-300 {
            break;
        }
    }
    if giant < 1e-12 {
        giant = 0.0;
    }
    let residual = (giant - interdep_map(mean_degree, p, n, giant)).abs();
    Ok(InterdepPoint {
        mean_degree,
        p,
        layers: n,
        giant,
        residual,
        iterations,
    })
}

/// Largest fixed point, reached by iterating down from `P = 1`.
pub fn interdep_giant_component(mean_degree: f64, p: f64, n: usize) -> Result<InterdepPoint> {
    interdep_iterate(mean_degree, p, n, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdepCritical {
    pub mean_degree: f64,
    pub layers: usize,
    /// Lambert `W_-1(-(1/n) e^(-1/n))`.
    pub w: f64,
    pub p_th: f64,
    pub giant_at_threshold: f64,
}

pub fn interdep_critical(mean_degree: f64, n: usize) -> Result<InterdepCritical> {
    if !(mean_degree > 0.0) || n < 1 {
        return Err(invalid(format!(
            "need mean degree > 0 and n >= 1 (got {mean_degree}, {n})"
        )));
    }
    let nf = n as f64;
    let w = lambert_w_minus(-(1.0 / nf) * (-1.0 / nf).exp())?;
    let p_th = -w / (mean_degree * (1.0 + 1.0 / (nf * w)).powi(n as i32 - 1));
    let giant = -(w + 1.0 / nf) / mean_degree;
    Ok(InterdepCritical {
        mean_degree,
        layers: n,
        w,
        p_th,
        giant_at_threshold: giant.max(0.0),
    })
}

/// One grid point of a hysteresis sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterdepSweepPoint {
    pub p: f64,
    /// Branch followed while decreasing `p`, starting from `P = 1`.
    pub down: f64,
    /// Branch followed while increasing `p`, seeded from the previous point.
    pub up: f64,
}

/// Sweep `p` in both directions. A first-order transition shows up as a
/// range where the two branches disagree.
pub fn interdep_sweep(mean_degree: f64, n: usize, ps: &[f64]) -> Result<Vec<InterdepSweepPoint>> {
    if ps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sweep values of p must be strictly increasing"));
    }
    let mut down = vec![0.0; ps.len()];
    let mut state: f64 = 1.0;
    for (i, &p) in ps.iter().enumerate().rev() {
        state = interdep_iterate(mean_degree, p, n, state.max(1e-9))?.giant;
        down[i] = state;
    }
    let mut up = vec![0.0; ps.len()];
    let mut state: f64 = 1e-6;
    for (i, &p) in ps.iter().enumerate() {
        state = interdep_iterate(mean_degree, p, n, state.max(1e-6))?.giant;
        up[i] = state;
    }
    Ok(ps
        .iter()
        .zip(down.iter().zip(&up))
        .map(|(&p, (&d, &u))| InterdepSweepPoint { p, down: d, up: u })
        .collect())
}

/// Where the giant component from `P = 1` collapses, located by a sweep
/// over `[lo, hi]` and refined by bisection to `tolerance`. Returns the
/// point and the jump in `P` across it.
pub fn interdep_collapse(
    mean_degree: f64,
    n: usize,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let alive = |p: f64| -> Result<bool> { Ok(interdep_giant_component(mean_degree, p, n)?.giant > 0.0) };
    if alive(lo)? || !alive(hi)? {
        return Err(Error::NoBracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tolerance {
        let m = 0.5 * (a + b);
        if alive(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    let jump = interdep_giant_component(mean_degree, b, n)?.giant
        - interdep_giant_component(mean_degree, a, n)?.giant;
    Ok((0.5 * (a + b), jump))
}

/// Helper for callers working in angles: `theta/(pi/4)` from a concurrence.
pub fn quarter_pi_from_c(c: f64) -> Result<f64> {
    Ok(theta_from_c(c)? / FRAC_PI_4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{bethe_lattice, LinkWeight};
    use crate::spreduce::reduce_sp;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bethe_closed_forms() {
        let t = bethe_thresholds(3).unwrap();
        assert!((t.classical - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.cep - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.concurrence - 0.5).abs() < 1e-12);
        assert!((bethe_thresholds(5).unwrap().concurrence - 1.0 / 3.0).abs() < 1e-12);
        assert!((bethe_thresholds(4).unwrap().concurrence - 0.3918).abs() < 1e-4);
        for k in 3..10 {
            let t = bethe_thresholds(k).unwrap();
            assert!((t.classical - t.cep).abs() < 1e-12);
        }
        assert!(bethe_thresholds(2).is_err());
    }

    #[test]
    fn qep_roots() {
        let s = qep_swap_threshold(3).unwrap();
        assert!((s.root - 0.21400).abs() < 1e-5);
        assert!((s.theta_quarter_pi - 0.5761).abs() < 1e-4);
        assert!(s.residual <= 1e-12);
        assert!((qep_swap_threshold(4).unwrap().theta_quarter_pi - 0.4760).abs() < 1e-4);
        let g = qep_ghz_threshold(3).unwrap();
        assert!((g.root - 0.5).abs() < 1e-12);
        assert!((g.theta_quarter_pi - 2.0 / 3.0).abs() < 1e-10);
        assert!((qep_ghz_threshold(4).unwrap().theta_quarter_pi - 0.6800).abs() < 1e-4);
        for k in 3..12 {
            assert!(qep_swap_threshold(k).unwrap().residual <= 1e-12);
            assert!(qep_ghz_threshold(k).unwrap().residual <= 1e-12);
        }
    }

    #[test]
    fn saturation_point() {
        let c = bethe_saturation(3).unwrap();
        assert!((c - 0.838102).abs() < 1e-6);
        assert!((quarter_pi_from_c(c).unwrap() - 0.6327).abs() < 1e-4);
        assert!((bethe_saturation(2).unwrap() - 1.0).abs() < 1e-12);
        for k in 3..20 {
            assert!(bethe_saturation(k).unwrap() >= bethe_critical_value(k, RuleSystem::Concurrence));
        }
        // Just above saturation the tree is exactly 1, just below it is not.
        let above = bethe_lattice(3, 4, LinkWeight::from_c(c + 1e-9).unwrap()).unwrap();
        assert_eq!(reduce_sp(&above, RuleSystem::Concurrence).unwrap(), 1.0);
        // Shallow trees saturate earlier, deep ones only at the limit.
        assert!(bethe_exact_value(3, 5000, RuleSystem::Concurrence, c - 1e-4) < 1.0);
        assert_eq!(bethe_exact_value(3, 5000, RuleSystem::Concurrence, c + 1e-9), 1.0);
    }

    #[test]
    fn depth_profile_matches_recursion() {
        let prof = bethe_depth_profile(3, RuleSystem::Concurrence, 0.7, 20);
        for (l, &v) in prof.iter().enumerate() {
            let exact = bethe_exact_value(3, l + 1, RuleSystem::Concurrence, 0.7);
            assert!((v - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn inflection_of_logistic() {
        let f = |x: f64| Ok(1.0 / (1.0 + (-(x - 0.6) / 0.02).exp()));
        let x = finite_size_threshold(f, 0.0, 1.0, &Default::default()).unwrap();
        assert!((x - 0.6).abs() < 1e-5, "{x}");
        assert!(finite_size_threshold(|x| Ok(x), 0.0, 1.0, &Default::default()).is_err());
    }

    fn synthetic(z_nu: f64, noise: f64, seed: u64) -> Vec<CutoffCurve> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..7)
            .map(|i| {
                let d = 1e-6 * 10f64.powf(i as f64 / 3.0);
                let lstar = 0.5 * d.powf(-z_nu);
                let lengths: Vec<f64> = (0..100).map(|j| 1e3 + j as f64 * 1e3).collect();
                let values = lengths
                    .iter()
                    .map(|&l| l.powf(-0.5) * (-l / lstar).exp() * (1.0 + noise * rng.gen_range(-1.0..1.0)))
                    .collect();
                CutoffCurve {
                    distance: d,
                    lengths,
                    values,
                }
            })
            .collect()
    }

    #[test]
    fn recovers_planted_exponent() {
        let fit = fit_cutoff_scaling(&synthetic(1.0, 0.0, 1), 0.5, (1e3, 1e5)).unwrap();
        assert!((fit.value - 1.0).abs() < 1e-9, "{fit:?}");
        assert!(fit.stderr > 0.0);
        let noisy = fit_cutoff_scaling(&synthetic(1.0, 0.01, 2), 0.5, (1e3, 1e5)).unwrap();
        assert!((noisy.value - 1.0).abs() < 0.02);
    }

    #[test]
    fn fit_requires_dynamic_range() {
        let mut curves = synthetic(1.0, 0.0, 1);
        curves.truncate(4);
        assert!(matches!(
            fit_cutoff_scaling(&curves, 0.5, (1e3, 1e5)),
            Err(Error::InsufficientData(_))
        ));
        let narrow: Vec<CutoffCurve> = synthetic(1.0, 0.0, 1)
            .into_iter()
            .map(|mut c| {
                c.distance = 1e-5 * (1.0 + c.distance * 1e3);
                c
            })
            .collect();
        assert!(fit_cutoff_scaling(&narrow, 0.5, (1e3, 1e5)).is_err());
    }

    #[test]
    fn exponent_rows() {
        let hi = scale_free_exponents(5.0).unwrap();
        assert_eq!((hi.beta, hi.gamma, hi.nu, hi.sigma, hi.tau), (1.0, 1.0, 3.0, 0.5, 2.5));
        assert_eq!(hi.fractal_dim, Some(4.0));
        let mid = scale_free_exponents(3.5).unwrap();
        assert!((mid.tau - 4.0 / 1.5).abs() < 1e-12);
        assert!(scale_free_exponents(2.5).unwrap().fractal_dim.is_none());
        assert!(scale_free_exponents(2.0).is_err());
        assert!(scale_free_exponents(3.0).is_err());
        let two_d = two_dimensional_exponents();
        assert!(two_d.hyperscaling_residual(2.0).unwrap().abs() < 1e-12);
        let (a, b) = two_d.scaling_residuals();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        assert!(mean_field_exponents().hyperscaling_residual(6.0).unwrap().abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scaling_relations_hold(lambda in 2.001..20.0f64) {
            prop_assume!((lambda - 3.0).abs() > 1e-6);
            let e = scale_free_exponents(lambda).unwrap();
            let (a, b) = e.scaling_residuals();
            prop_assert!(a.abs() < 1e-9 * (1.0 + e.beta.abs()));
            prop_assert!(b.abs() < 1e-9 * (1.0 + e.gamma.abs()));
        }

        #[test]
        fn lambert_residual(x in -0.3678794..-1e-6f64) {
            let w = lambert_w_minus(x).unwrap();
            prop_assert!(w <= -1.0);
            prop_assert!((w * w.exp() - x).abs() <= 1e-12);
        }

        #[test]
        fn single_layer_is_er_giant_component(k in 0.5..8.0f64, p in 0.0..=1.0f64) {
            let pt = interdep_giant_component(k, p, 1).unwrap();
            // Independent route: S = 1 - exp(-k p S), P = p S, by bisection.
            let f = |s: f64| s + (-k * p * s).exp_m1();
            let s = if k * p <= 1.0 { 0.0 } else { bracket_root(f, 1e-9, 1.0, 2000).unwrap() };
            prop_assert!((pt.giant - p * s).abs() < 1e-6, "{} vs {}", pt.giant, p * s);
        }
    }

    #[test]
    fn giant_component_examples() {
        assert_eq!(interdep_giant_component(4.0, 0.0, 2).unwrap().giant, 0.0);
        let one = interdep_giant_component(4.0, 1.0, 1).unwrap();
        assert!((one.giant - 0.98017).abs() < 1e-5);
        assert!(one.residual <= 1e-10);
    }

    #[test]
    fn critical_points() {
        let c = interdep_critical(5.0, 1).unwrap();
        assert_eq!(c.w, -1.0);
        assert!((c.p_th - 0.2).abs() < 1e-15);
        assert_eq!(c.giant_at_threshold, 0.0);
        let two = interdep_critical(4.0, 2).unwrap();
        assert!((two.p_th - 0.6139).abs() < 1e-3, "{two:?}");
        let sweep = interdep_sweep(4.0, 2, &[0.5, 0.6, 0.62, 0.7]).unwrap();
        assert_eq!(sweep[1].down, 0.0);
        assert!(sweep[2].down > 0.3);
        assert_eq!(sweep[2].up, 0.0);
    }
}
