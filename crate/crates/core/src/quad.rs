//! Globally adaptive Gauss–Kronrod quadrature.
//!
//! A 7-point Gauss rule embedded in a 15-point Kronrod rule gives the value
//! and error estimate per panel; the panel with the largest error estimate is
//! bisected until the summed estimate meets the tolerance. Integrable endpoint
//! singularities are handled by the bisection, optionally helped by caller
//! supplied breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_panels: 4000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    if !value.is_finite() {
        return Err(Error::numeric(
            "quadrature",
            format!("non-finite integrand on [{a}, {b}]"),
        ));
    }
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_panels(f, &[a, b])
    }

    /// Integrates over the union of consecutive panels `[p0,p1], [p1,p2], ...`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        breakpoints: &[f64],
    ) -> Result<Estimate> {
        if breakpoints.len() < 2 {
            return Err(Error::domain("quadrature needs at least two breakpoints"));
        }
        let mut heap = BinaryHeap::new();
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut evaluations = 0;
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(a < b) {
                if a == b {
                    continue;
                }
                return Err(Error::domain(format!("breakpoints not increasing: {a} >= {b}")));
            }
            let (value, error) = kronrod15(&mut f, a, b)?;
            evaluations += 15;
            total += value;
            total_err += error;
            heap.push(Panel { a, b, value, error });
        }
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_panels {
                return Err(Error::numeric(
                    "quadrature",
                    format!(
                        "no convergence after {} panels: value {total:e}, error estimate {total_err:e}",
                        heap.len()
                    ),
                ));
            }
            let worst = match heap.pop() {
                Some(p) => p,
                None => break,
            };
            let mid = 0.5 * (worst.a + worst.b);
            if !(worst.a < mid && mid < worst.b) {
                // Panel cannot be split further in floating point; accept it.
                heap.push(Panel {
                    error: 0.0,
                    ..worst
                });
                total_err -= worst.error;
                continue;
            }
            let (v1, e1) = kronrod15(&mut f, worst.a, mid)?;
            let (v2, e2) = kronrod15(&mut f, mid, worst.b)?;
            evaluations += 30;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // Re-sum to shed accumulated cancellation from the running updates.
        let value = heap.iter().map(|p| p.value).sum();
        let error = heap.iter().map(|p| p.error).sum();
        Ok(Estimate {
            value,
            error,
            evaluations,
        })
    }

    /// Integrates over `[a, ∞)` with the substitution `x = a + scale·r/(1−r)`.
    ///
    /// `scale` should be of the order of the region where the integrand carries
    /// its mass.
    pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        scale: f64,
    ) -> Result<Estimate> {
        if !(scale > 0.0) {
            return Err(Error::domain("semi-infinite quadrature scale must be positive"));
        }
        let g = |r: f64| {
            let one_minus = 1.0 - r;
            let x = a + scale * r / one_minus;
            if !x.is_finite() {
                return 0.0;
            }
            let jac = scale / (one_minus * one_minus);
            let fx = f(x);
            if fx == 0.0 {
                0.0
            } else {
                fx * jac
            }
        };
        self.integrate_panels(g, &[0.0, 0.125, 0.25, 0.5, 0.75, 0.875, 1.0])
    }
}
