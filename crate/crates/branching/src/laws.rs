//! Parametric families for the three input laws: offspring, immigration,
//! and Poisson intensity.
//!
//! The offspring generating function has the heavy-tailed form
//! `f(s) = s + (1-s)^(1+gamma) * L(1/(1-s))` with `gamma` in (0,1], the
//! immigrant generating function is `g(s) = 1 - (1-s)^alpha * l(1/(1-s))`
//! with `alpha` in (0,1], and the intensity is the regularized decreasing
//! rate `r(t) = L_R(t) * (t + tau0)^(-theta)`. `L`, `l`, `L_R` are slowly
//! varying scale functions drawn from a small closed family.

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Shape of a slowly varying scale function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvfKind {
    /// `value(x) = c`.
    Constant,
    /// `value(x) = c * ln(e + x)^beta`.
    LogPower,
}

/// A slowly varying function from the closed family used by all three laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowlyVarying {
    pub kind: SvfKind,
    pub c: f64,
    pub beta: f64,
}

impl SlowlyVarying {
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(SvfKind::Constant, c, 0.0)
    }

    pub fn log_power(c: f64, beta: f64) -> Result<Self> {
        Self::new(SvfKind::LogPower, c, beta)
    }

    pub fn new(kind: SvfKind, c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain {
                what: "svf scale c",
                value: c,
                expected: "(0, inf)",
            });
        }
        if !beta.is_finite() {
            return Err(Error::Domain {
                what: "svf exponent beta",
                value: beta,
                expected: "finite",
            });
        }
        Ok(Self { kind, c, beta })
    }

    pub fn is_constant(&self) -> bool {
        self.kind == SvfKind::Constant
    }

    /// Evaluate at `x >= 0`.
    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            SvfKind::Constant => self.c,
            SvfKind::LogPower => self.c * (std::f64::consts::E + x).ln().powf(self.beta),
        }
    }

    /// Evaluate at `x = exp(ln_x)` without forming `x`; stable for
    /// arguments far beyond the representable range.
    pub fn value_at_log(&self, ln_x: f64) -> f64 {
        match self.kind {
            SvfKind::Constant => self.c,
            SvfKind::LogPower => {
                // ln(e + e^v) = v + ln1p(e^(1-v)) for large v.
                let ln_log = if ln_x > 40.0 {
                    ln_x + (1.0 - ln_x).exp().ln_1p()
                } else {
                    (std::f64::consts::E + ln_x.exp()).ln()
                };
                self.c * ln_log.powf(self.beta)
            }
        }
    }
}

/// Critical offspring law with tail index `1 + gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    pub gamma: f64,
    pub scale: SlowlyVarying,
}

impl OffspringLaw {
    pub fn new(gamma: f64, scale: SlowlyVarying) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain {
                what: "gamma",
                value: gamma,
                expected: "(0, 1]",
            });
        }
        let law = Self { gamma, scale };
        law.validate()?;
        Ok(law)
    }

    /// Constant scale `1/(1+gamma)`: the family admitting closed forms
    /// throughout the transform chain.
    pub fn standard(gamma: f64) -> Result<Self> {
        let scale = SlowlyVarying::constant(1.0 / (1.0 + gamma))?;
        Self::new(gamma, scale)
    }

    fn validate(&self) -> Result<()> {
        // p0 = f(0) must sit in [0,1); constant-scale mass tables further
        // need p1 = 1 - (1+gamma)c >= 0.
        let p0 = self.drift(0.0);
        if !(p0 >= 0.0 && p0 < 1.0) {
            return Err(Error::Domain {
                what: "f(0)",
                value: p0,
                expected: "[0, 1)",
            });
        }
        if self.scale.is_constant() && (1.0 + self.gamma) * self.scale.c > 1.0 + 1e-12 {
            return Err(Error::Domain {
                what: "(1+gamma)*c",
                value: (1.0 + self.gamma) * self.scale.c,
                expected: "<= 1 (p1 >= 0)",
            });
        }
        // f must stay below 1 on [0,1); grid check for the log-power family.
        for i in 1..1000 {
            let s = i as f64 / 1000.0;
            if self.drift(s) > 1.0 - s {
                return Err(Error::Domain {
                    what: "f(s)",
                    value: s + self.drift(s),
                    expected: "<= 1 on [0,1]",
                });
            }
        }
        Ok(())
    }

    /// `f(s) - s = (1-s)^(1+gamma) L(1/(1-s))`, evaluated without
    /// cancellation. Zero at `s = 1`.
    pub fn drift(&self, s: f64) -> f64 {
        let w = 1.0 - s;
        if w <= 0.0 {
            return 0.0;
        }
        w.powf(1.0 + self.gamma) * self.scale.value(1.0 / w)
    }

    /// The probability generating function `f(s)`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        check_unit_interval("s", s)?;
        Ok((s + self.drift(s)).min(1.0))
    }

    /// First `kmax + 1` point masses `p_0 .. p_kmax` of the offspring law.
    ///
    /// Only available for constant scale functions, where the binomial
    /// series of `(1-s)^(1+gamma)` gives `p_0 = c`, `p_1 = 1 - (1+gamma)c`,
    /// `p_2 = c (1+gamma) gamma / 2`, and
    /// `p_{k+1} = p_k (k - 1 - gamma) / (k + 1)` for `k >= 2`.
    pub fn masses(&self, kmax: usize) -> Result<Vec<f64>> {
        if !self.scale.is_constant() {
            return Err(Error::UnsupportedFamily(
                "offspring mass expansion requires a constant scale function",
            ));
        }
        if kmax < 2 {
            return Err(Error::Domain {
                what: "kmax",
                value: kmax as f64,
                expected: ">= 2",
            });
        }
        let c = self.scale.c;
        let g = self.gamma;
        let mut p = Vec::with_capacity(kmax + 1);
        p.push(c);
        p.push((1.0 - (1.0 + g) * c).max(0.0));
        p.push(c * (1.0 + g) * g / 2.0);
        for k in 2..kmax {
            let next = p[k] * (k as f64 - 1.0 - g) / (k as f64 + 1.0);
            p.push(next.max(0.0));
        }
        Ok(p)
    }

    /// Tail probability `P(xi > k)` for the constant-scale family:
    /// `c * gamma * Gamma(k - gamma) / (Gamma(1 - gamma) Gamma(k + 1))`
    /// for `k >= 1`, and `1 - c` at `k = 0`.
    pub fn tail(&self, k: u64) -> Result<f64> {
        if !self.scale.is_constant() {
            return Err(Error::UnsupportedFamily(
                "offspring tail requires a constant scale function",
            ));
        }
        let c = self.scale.c;
        let g = self.gamma;
        if k == 0 {
            return Ok(1.0 - c);
        }
        if g >= 1.0 {
            // Binary splitting: mass only at 0 and 2.
            return Ok(if k == 1 { c } else { 0.0 });
        }
        let kf = k as f64;
        let ln = g.ln() + ln_gamma(kf - g) - ln_gamma(1.0 - g) - ln_gamma(kf + 1.0);
        Ok(c * ln.exp())
    }
}

/// Immigration batch-size law with tail index `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationLaw {
    pub alpha: f64,
    pub scale: SlowlyVarying,
}

impl ImmigrationLaw {
    pub fn new(alpha: f64, scale: SlowlyVarying) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                expected: "(0, 1]",
            });
        }
        let law = Self { alpha, scale };
        law.validate()?;
        Ok(law)
    }

    /// The Sibuya-type family `l == 1`, for which exact sampling exists.
    pub fn sibuya(alpha: f64) -> Result<Self> {
        Self::new(alpha, SlowlyVarying::constant(1.0)?)
    }

    fn validate(&self) -> Result<()> {
        // g(0) = 1 - l(1) must be >= 0, and g must be non-decreasing,
        // i.e. the survival factor (1-s)^alpha l(1/(1-s)) non-increasing.
        let g0 = self.survival(1.0);
        if g0 > 1.0 + 1e-12 {
            return Err(Error::Domain {
                what: "1 - g(0)",
                value: g0,
                expected: "<= 1",
            });
        }
        let mut prev = self.survival(1.0);
        for i in 1..1000 {
            let w = 1.0 - i as f64 / 1000.0;
            let cur = self.survival(w);
            if cur > prev + 1e-12 {
                return Err(Error::Domain {
                    what: "g monotonicity at 1-s",
                    value: w,
                    expected: "g non-decreasing on [0,1]",
                });
            }
            prev = cur;
        }
        Ok(())
    }

    /// `1 - g(1 - w) = w^alpha l(1/w)` for `w = 1 - s`, cancellation free.
    pub fn survival(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        w.powf(self.alpha) * self.scale.value(1.0 / w)
    }

    /// The probability generating function `g(s)`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        check_unit_interval("s", s)?;
        Ok((1.0 - self.survival(1.0 - s)).clamp(0.0, 1.0))
    }
}

/// Regularized decreasing Poisson intensity
/// `r(t) = L_R(t) * (t + tau0)^(-theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityLaw {
    pub theta: f64,
    pub scale: SlowlyVarying,
    pub tau0: f64,
}

impl IntensityLaw {
    pub fn new(theta: f64, scale: SlowlyVarying, tau0: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
                expected: "(0, inf)",
            });
        }
        if !(tau0 >= 0.0) || !tau0.is_finite() {
            return Err(Error::Domain {
                what: "tau0",
                value: tau0,
                expected: "[0, inf)",
            });
        }
        let law = Self { theta, scale, tau0 };
        law.validate()?;
        Ok(law)
    }

    pub fn standard(theta: f64, c: f64) -> Result<Self> {
        Self::new(theta, SlowlyVarying::constant(c)?, 1.0)
    }

    fn validate(&self) -> Result<()> {
        // The thinning sampler and the survival asymptotics both rely on a
        // non-increasing rate; log-power scales with beta > 0 can violate
        // this near zero, so check on a geometric grid.
        if self.scale.is_constant() || self.scale.beta <= 0.0 {
            return Ok(());
        }
        if self.tau0 == 0.0 {
            return Ok(()); // singular at 0; monotone check starts where finite
        }
        let mut t = 0.0f64;
        let mut prev = self.rate(t).unwrap_or(f64::INFINITY);
        while t < 1e12 {
            t = if t == 0.0 { 1e-6 } else { t * 1.25 };
            let cur = self.rate(t)?;
            if cur > prev * (1.0 + 1e-9) {
                return Err(Error::Domain {
                    what: "r(t) monotonicity at t",
                    value: t,
                    expected: "non-increasing intensity",
                });
            }
            prev = cur;
        }
        Ok(())
    }

    /// The intensity `r(t)`, for `t >= 0`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain {
                what: "t",
                value: t,
                expected: "[0, inf)",
            });
        }
        if t + self.tau0 <= 0.0 {
            return Err(Error::Singularity("r(0) with tau0 = 0"));
        }
        Ok(self.scale.value(t) * (t + self.tau0).powf(-self.theta))
    }
}

/// Complete model parameterization: offspring splitting, immigrant batch
/// sizes, immigration intensity, and the exponential lifetime rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LawSet {
    pub offspring: OffspringLaw,
    pub immigration: ImmigrationLaw,
    pub intensity: IntensityLaw,
    pub mu: f64,
}

impl LawSet {
    pub fn new(
        offspring: OffspringLaw,
        immigration: ImmigrationLaw,
        intensity: IntensityLaw,
        mu: f64,
    ) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Domain {
                what: "mu",
                value: mu,
                expected: "(0, inf)",
            });
        }
        Ok(Self {
            offspring,
            immigration,
            intensity,
            mu,
        })
    }

    /// Tail-index ratio `alpha / gamma`, the axis of the regime split.
    pub fn rho(&self) -> f64 {
        self.immigration.alpha / self.offspring.gamma
    }
}

fn check_unit_interval(what: &'static str, s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain {
            what,
            value: s,
            expected: "[0, 1]",
        });
    }
    Ok(())
}
