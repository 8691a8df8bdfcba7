//! Series and parallel composition for classical and concurrence percolation.
//!
//! Values are `p` (classical) or `c` (concurrence), both in `[0, 1]`.
//! Series composition multiplies in both systems. Classical parallel is
//! `1 - prod(1 - p_i)`. Concurrence parallel goes through the singlet-fraction
//! `g(c) = (1 + sqrt(1 - c^2)) / 2`: with `F = max(1/2, prod g(c_i))` the result
//! is `2 sqrt(F - F^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netcore::LinkWeight;

/// Inputs this close outside `[0, 1]` are treated as rounding noise and clamped.
const CLAMP_SLACK: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleSystem {
    Classical,
    Concurrence,
}

impl std::str::FromStr for RuleSystem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" | "cp" => Ok(RuleSystem::Classical),
            "concurrence" | "conc" => Ok(RuleSystem::Concurrence),
            _ => Err(invalid(format!("unknown rule system {s:?}"))),
        }
    }
}

impl std::fmt::Display for RuleSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RuleSystem::Classical => "classical",
            RuleSystem::Concurrence => "concurrence",
        })
    }
}

impl RuleSystem {
    /// The link value this system works with.
    pub fn value(self, w: LinkWeight) -> f64 {
        match self {
            RuleSystem::Classical => w.p(),
            RuleSystem::Concurrence => w.c(),
        }
    }

    pub fn weight(self, value: f64) -> Result<LinkWeight> {
        match self {
            RuleSystem::Classical => LinkWeight::from_p(value),
            RuleSystem::Concurrence => LinkWeight::from_c(value),
        }
    }

    /// Series composition; the empty product is 1.
    pub fn series(self, values: &[f64]) -> Result<f64> {
        let mut acc = 1.0;
        for &x in values {
            acc *= checked(x)?;
        }
        Ok(acc)
    }

    /// Parallel composition; the empty combination is 0.
    pub fn parallel(self, values: &[f64]) -> Result<f64> {
        let mut acc = ParallelAcc::new(self);
        for &x in values {
            acc.push(checked(x)?);
        }
        Ok(acc.finish())
    }

    pub fn series2(self, a: f64, b: f64) -> f64 {
        a * b
    }

    pub fn parallel2(self, a: f64, b: f64) -> f64 {
        let mut acc = ParallelAcc::new(self);
        acc.push(a);
        acc.push(b);
        acc.finish()
    }
}

fn checked(x: f64) -> Result<f64> {
    if (-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(Error::OutOfRange {
            what: "link value",
            value: x,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// `1 - g(c)` without cancellation for small `c`.
pub fn singlet_deficit(c: f64) -> f64 {
    c * c / (2.0 * (1.0 + (1.0 - c * c).max(0.0).sqrt()))
}

/// `g(c) = (1 + sqrt(1 - c^2)) / 2`.
pub fn singlet_fraction(c: f64) -> f64 {
    0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt())
}

/// Concurrence of a pure state with singlet fraction `f`, given `1 - f`
/// separately so tiny results keep full precision.
fn concurrence_from_fraction(f: f64, one_minus_f: f64) -> f64 {
    if f <= 0.5 {
        1.0
    } else {
        (2.0 * (f * one_minus_f).sqrt()).min(1.0)
    }
}

/// Running parallel combination. Keeps the log of the complement so that
/// many small contributions stay accurate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParallelAcc {
    system: RuleSystem,
    // Sum of ln(1 - p_i) or ln(g(c_i)).
    log_keep: f64,
    // Plain product of g(c_i) for the saturation test.
    product: f64,
}

impl ParallelAcc {
    pub(crate) fn new(system: RuleSystem) -> Self {
        ParallelAcc {
            system,
            log_keep: 0.0,
            product: 1.0,
        }
    }

    pub(crate) fn push(&mut self, x: f64) {
        self.push_many(x, 1.0);
    }

    /// Add `count` identical branches of value `x`.
    pub(crate) fn push_many(&mut self, x: f64, count: f64) {
        match self.system {
            RuleSystem::Classical => self.log_keep += count * (-x).ln_1p(),
            RuleSystem::Concurrence => {
                let l = (-singlet_deficit(x)).ln_1p();
                self.log_keep += count * l;
                self.product = if count == 1.0 {
                    self.product * singlet_fraction(x)
                } else {
                    self.product * (count * l).exp()
                };
            }
        }
    }

    pub(crate) fn finish(self) -> f64 {
        // `+ 0.0` turns a negative zero from `-expm1(0)` into `0`.
        0.0 + match self.system {
            RuleSystem::Classical => -self.log_keep.exp_m1(),
            RuleSystem::Concurrence => {
                if self.product <= 0.5 {
                    1.0
                } else {
                    concurrence_from_fraction(self.product, -self.log_keep.exp_m1())
                }
            }
        }
    }
}

/// Composition mode for the angle-form rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Series,
    Parallel,
}

fn check_thetas(thetas: &[f64]) -> Result<()> {
    for &t in thetas {
        LinkWeight::new(t)?;
    }
    Ok(())
}

/// Concurrence rules written in `theta`: series `sin 2t = prod sin 2t_i`,
/// parallel `cos t = max(1/sqrt 2, prod cos t_i)`.
pub fn det_combine(thetas: &[f64], mode: Mode) -> Result<f64> {
    check_thetas(thetas)?;
    Ok(match mode {
        Mode::Series => {
            let s: f64 = thetas.iter().map(|t| (2.0 * t).sin()).product();
            0.5 * s.min(1.0).asin()
        }
        Mode::Parallel => {
            let c: f64 = thetas.iter().map(|t| t.cos()).product();
            c.max(0.5f64.sqrt()).min(1.0).acos()
        }
    })
}

/// Classical rules written in `theta`: series `2 sin^2 t = prod 2 sin^2 t_i`,
/// parallel `cos 2t = prod cos 2t_i`.
pub fn cep_combine(thetas: &[f64], mode: Mode) -> Result<f64> {
    check_thetas(thetas)?;
    Ok(match mode {
        Mode::Series => {
            let p: f64 = thetas.iter().map(|t| 2.0 * t.sin().powi(2)).product();
            (p / 2.0).sqrt().min(1.0).asin()
        }
        Mode::Parallel => {
            let c: f64 = thetas.iter().map(|t| (2.0 * t).cos()).product();
            0.5 * c.clamp(0.0, 1.0).acos()
        }
    })
}

/// Outcome of comparing the two angle-form rules on one tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub theta_cep: f64,
    pub theta_det: f64,
    pub det_ge_cep: bool,
}

/// Compare `det_combine` against `cep_combine`, allowing `1e-12` rounding slack.
pub fn dominance_check(thetas: &[f64], mode: Mode) -> Result<Dominance> {
    let theta_cep = cep_combine(thetas, mode)?;
    let theta_det = det_combine(thetas, mode)?;
    Ok(Dominance {
        theta_cep,
        theta_det,
        det_ge_cep: theta_det >= theta_cep - 1e-12,
    })
}
