//! The transform chain behind the extinction-time algebra.
//!
//! `V(x) = int_1^x u^(gamma-1) / L(u) du` is regularly varying with index
//! `gamma`; `W` is its inverse (index `1/gamma`); `Psi(x) = x^alpha / l(x)`
//! encodes the immigrant tail and `Psi^{-1}` inverts it. Constant scale
//! functions take closed-form fast paths; the general family goes through
//! quadrature and bracketed monotone root finding.

use crate::error::{Error, Result};
use crate::laws::LawSet;
use crate::quad;
use std::sync::Mutex;

/// Arguments are capped here; `W` and `Psi^{-1}` explode like `y^(1/gamma)`
/// and `y^(1/alpha)` and quickly leave the representable range.
pub const RANGE_CAP: f64 = 1e300;
const LN_RANGE_CAP: f64 = 690.77552789821368; // ln(1e300)

#[derive(Debug, Default)]
struct InvCache {
    last: Option<(f64, f64)>, // (target y, solved x)
}

/// Evaluators for `V`, `W`, `Psi`, `Psi^{-1}` over one `LawSet`.
#[derive(Debug)]
pub struct TransformChain {
    pub lawset: LawSet,
    pub v_quad_tol: f64,
    pub inv_tol: f64,
    w_cache: Mutex<InvCache>,
    psi_cache: Mutex<InvCache>,
}

impl TransformChain {
    pub fn new(lawset: LawSet, v_quad_tol: f64, inv_tol: f64) -> Result<Self> {
        if !(v_quad_tol > 0.0) || !(inv_tol > 0.0) {
            return Err(Error::Domain {
                what: "tolerance",
                value: v_quad_tol.min(inv_tol),
                expected: "(0, inf)",
            });
        }
        let chain = Self {
            lawset,
            v_quad_tol,
            inv_tol,
            w_cache: Mutex::new(InvCache::default()),
            psi_cache: Mutex::new(InvCache::default()),
        };
        chain.validate_psi_monotone()?;
        Ok(chain)
    }

    pub fn with_defaults(lawset: LawSet) -> Result<Self> {
        Self::new(lawset, 1e-10, 1e-12)
    }

    fn validate_psi_monotone(&self) -> Result<()> {
        if self.lawset.immigration.scale.is_constant() {
            return Ok(());
        }
        let mut prev = self.psi(1.0)?;
        let mut x = 1.0f64;
        while x < 1e12 {
            x *= 1.3;
            let cur = self.psi(x)?;
            if cur <= prev {
                return Err(Error::Domain {
                    what: "Psi monotonicity at x",
                    value: x,
                    expected: "strictly increasing Psi on [1, inf)",
                });
            }
            prev = cur;
        }
        Ok(())
    }

    /// `V(x)` for `x >= 1`.
    pub fn v(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                expected: "[1, inf)",
            });
        }
        if x > RANGE_CAP {
            return Err(Error::Range {
                what: "V argument",
                value: x,
            });
        }
        let g = self.lawset.offspring.gamma;
        let scale = &self.lawset.offspring.scale;
        if scale.is_constant() {
            // (x^gamma - 1) / (gamma c), cancellation-free near x = 1.
            return Ok((g * x.ln()).exp_m1() / (g * scale.c));
        }
        self.v_quadrature(x)
    }

    /// Quadrature path for `V`, valid for every scale family. After the
    /// substitution `u = e^w` the integrand is `e^(gamma w) / L(e^w)` on
    /// `[0, ln x]`; panels are laid out right-to-left with doubling widths
    /// since the mass concentrates at the upper end.
    pub(crate) fn v_quadrature(&self, x: f64) -> Result<f64> {
        let g = self.lawset.offspring.gamma;
        let scale = self.lawset.offspring.scale;
        let ln_x = x.ln();
        let f = move |w: f64| (g * w).exp() / scale.value_at_log(w);
        let mut total = 0.0f64;
        let mut hi = ln_x;
        let mut width = 1.0f64.min(ln_x);
        while hi > 0.0 {
            let lo = (hi - width).max(0.0);
            let floor = self.v_quad_tol * total.abs() * 0.1;
            total += quad::adaptive(&f, lo, hi, self.v_quad_tol, floor)?;
            hi = lo;
            width *= 2.0;
        }
        Ok(total)
    }

    /// `W(y)`: the unique `x >= 1` with `V(x) = y`, for `y >= 0`.
    pub fn w(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain {
                what: "y",
                value: y,
                expected: "[0, inf)",
            });
        }
        if y == 0.0 {
            return Ok(1.0);
        }
        if y > RANGE_CAP {
            return Err(Error::Range {
                what: "W argument",
                value: y,
            });
        }
        let g = self.lawset.offspring.gamma;
        let scale = &self.lawset.offspring.scale;
        if scale.is_constant() {
            let ln_w = (g * scale.c * y).ln_1p() / g;
            if ln_w > LN_RANGE_CAP {
                return Err(Error::Range {
                    what: "W value exponent",
                    value: ln_w,
                });
            }
            return Ok(ln_w.exp());
        }
        self.invert_monotone(y, &self.w_cache, 1.0 / g, |x| self.v(x))
    }

    /// `Psi(x) = x^alpha / l(x)` for `x >= 1`.
    pub fn psi(&self, x: f64) -> Result<f64> {
        if !(x >= 1.0) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                expected: "[1, inf)",
            });
        }
        if x > RANGE_CAP {
            return Err(Error::Range {
                what: "Psi argument",
                value: x,
            });
        }
        let a = self.lawset.immigration.alpha;
        Ok(x.powf(a) / self.lawset.immigration.scale.value(x))
    }

    /// `Psi^{-1}(y)` for `y >= 1`. Values of `y` below `Psi(1)` (possible
    /// when `l(1) < 1`) clamp to 1.
    pub fn psi_inv(&self, y: f64) -> Result<f64> {
        if !(y >= 1.0) {
            return Err(Error::Domain {
                what: "y",
                value: y,
                expected: "[1, inf)",
            });
        }
        if y > RANGE_CAP {
            return Err(Error::Range {
                what: "Psi^-1 argument",
                value: y,
            });
        }
        let a = self.lawset.immigration.alpha;
        let scale = &self.lawset.immigration.scale;
        if scale.is_constant() {
            let ln_x = (scale.c * y).ln() / a;
            if ln_x > LN_RANGE_CAP {
                return Err(Error::Range {
                    what: "Psi^-1 value exponent",
                    value: ln_x,
                });
            }
            return Ok(ln_x.exp().max(1.0));
        }
        if y <= self.psi(1.0)? {
            return Ok(1.0);
        }
        self.invert_monotone(y, &self.psi_cache, 1.0 / a, |x| self.psi(x))
    }

    /// Bracketed root finding for a strictly increasing map on `[1, inf)`,
    /// performed on `ln x`. `growth_inv` is the reciprocal regular-variation
    /// index, used both for the initial guess and for bracket expansion.
    fn invert_monotone<F: Fn(f64) -> Result<f64>>(
        &self,
        y: f64,
        cache: &Mutex<InvCache>,
        growth_inv: f64,
        eval: F,
    ) -> Result<f64> {
        let guess = {
            let cached = cache.lock().map_err(|_| Error::IntegrationFailure("poisoned cache"))?;
            match cached.last {
                Some((py, px)) if py > 0.0 && px >= 1.0 => {
                    (px.ln() + growth_inv * (y / py).ln()).clamp(0.0, LN_RANGE_CAP)
                }
                _ => (growth_inv * y.ln()).clamp(0.0, LN_RANGE_CAP),
            }
        };

        // Expand to a straddling bracket in log space.
        let mut lo = 0.0f64; // ln 1; V(1)=0 <= y and Psi(1) <= y by caller
        let mut hi = guess.max(1e-3);
        let mut step = 1.0;
        loop {
            let v_hi = eval(hi.exp())?;
            if v_hi >= y {
                break;
            }
            lo = hi;
            hi += step * growth_inv.max(1.0);
            step *= 2.0;
            if hi > LN_RANGE_CAP {
                let v_cap = eval(RANGE_CAP)?;
                if v_cap < y {
                    return Err(Error::Range {
                        what: "monotone inverse bracket",
                        value: y,
                    });
                }
                hi = LN_RANGE_CAP;
                break;
            }
        }

        // Bisection with secant acceleration on g(t) = eval(e^t) - y.
        let mut g_lo = eval(lo.exp())? - y;
        let mut g_hi = eval(hi.exp())? - y;
        if g_lo > 0.0 {
            // y below the value at the left edge; left edge is the answer.
            return Ok(lo.exp());
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            if hi - lo <= self.inv_tol {
                break;
            }
            // Secant proposal clamped into the middle of the bracket.
            let denom = g_hi - g_lo;
            let mut t = if denom.abs() > 0.0 {
                lo - g_lo * (hi - lo) / denom
            } else {
                0.5 * (lo + hi)
            };
            let margin = 0.05 * (hi - lo);
            if !(t > lo + margin && t < hi - margin) {
                t = 0.5 * (lo + hi);
            }
            let g_t = eval(t.exp())? - y;
            if g_t == 0.0 {
                x = t;
                break;
            } else if g_t < 0.0 {
                lo = t;
                g_lo = g_t;
            } else {
                hi = t;
                g_hi = g_t;
            }
            x = 0.5 * (lo + hi);
        }
        let solved = x.exp().max(1.0);
        let mut cached = cache.lock().map_err(|_| Error::IntegrationFailure("poisoned cache"))?;
        cached.last = Some((y, solved));
        Ok(solved)
    }
}
