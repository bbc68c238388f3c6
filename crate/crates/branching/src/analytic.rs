//! Exact (numerical) evaluation of the process's distributional objects.
//!
//! `F(t;s)` comes from the transform identity
//! `1/(1 - F(t;s)) = W(mu t + V(1/(1-s)))`, with an independent
//! backward-equation ODE integrator (`f_ode`) kept as a cross-check.
//! On top of `F` sit `q(t;s) = 1 - g(F(t;s))`, the tail integrals
//! `Delta(s)`, `Q`, the cumulative mean measures `R(t)`, `Q(t)`, the
//! convolution `I(t;s)`, and the generating functional `Phi(t;s)` of the
//! immigration-fed process.

use crate::error::{Error, Result};
use crate::laws::LawSet;
use crate::quad;
use crate::transforms::TransformChain;

/// A tail integral that may diverge; divergence is a classification
/// outcome, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralValue {
    Finite(f64),
    Divergent,
}

impl IntegralValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            IntegralValue::Finite(v) => Some(v),
            IntegralValue::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, IntegralValue::Divergent)
    }
}

/// Normalization rule for scaled (conditional) Laplace transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// No rescaling: the limit is a discrete law in the generating-function
    /// domain.
    None,
    /// Divide by `W(mu t)`.
    WMuT,
    /// Divide by `Psi^{-1}(R(t))`.
    PsiInvRT,
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Normalization::None => write!(f, "none"),
            Normalization::WMuT => write!(f, "W(mu*t)"),
            Normalization::PsiInvRT => write!(f, "PsiInv(R(t))"),
        }
    }
}

/// Evaluator bundle over one `LawSet`.
#[derive(Debug)]
pub struct AnalyticEngine {
    pub chain: TransformChain,
    pub quad_tol: f64,
    pub ode_tol: f64,
}

impl AnalyticEngine {
    pub fn new(lawset: LawSet, quad_tol: f64, ode_tol: f64) -> Result<Self> {
        Ok(Self {
            chain: TransformChain::with_defaults(lawset)?,
            quad_tol,
            ode_tol,
        })
    }

    pub fn with_defaults(lawset: LawSet) -> Result<Self> {
        Self::new(lawset, 1e-10, 1e-9)
    }

    pub fn lawset(&self) -> &LawSet {
        &self.chain.lawset
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain {
                what: "t",
                value: t,
                expected: "[0, inf)",
            });
        }
        Ok(())
    }

    fn check_s(s: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain {
                what: "s",
                value: s,
                expected: "[0, 1]",
            });
        }
        Ok(())
    }

    /// `F(t;s) = 1 - 1/W(mu t + V(1/(1-s)))`; equals 1 at `s = 1`.
    pub fn f(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_time(t)?;
        Self::check_s(s)?;
        if s >= 1.0 {
            return Ok(1.0);
        }
        let arg = self.chain.lawset.mu * t + self.chain.v(1.0 / (1.0 - s))?;
        Ok(1.0 - 1.0 / self.chain.w(arg)?)
    }

    /// Backward-equation oracle for `F`: integrates
    /// `dF/dt = mu (f(F) - F)` from `F(0;s) = s` with an adaptive
    /// Cash–Karp 4(5) pair at local tolerance `ode_tol`.
    pub fn f_ode(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_time(t)?;
        Self::check_s(s)?;
        let mu = self.chain.lawset.mu;
        let off = &self.chain.lawset.offspring;
        let rhs = |y: f64| mu * off.drift(y.clamp(0.0, 1.0));

        let mut y = s;
        let mut x = 0.0f64;
        let mut h = (t / 16.0).min(0.1).max(1e-8);
        if t == 0.0 {
            return Ok(s);
        }
        // Cash–Karp tableau.
        const A: [[f64; 5]; 5] = [
            [0.2, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
            [0.3, -0.9, 1.2, 0.0, 0.0],
            [-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0, 0.0],
            [
                1631.0 / 55296.0,
                175.0 / 512.0,
                575.0 / 13824.0,
                44275.0 / 110592.0,
                253.0 / 4096.0,
            ],
        ];
        const B5: [f64; 6] = [
            37.0 / 378.0,
            0.0,
            250.0 / 621.0,
            125.0 / 594.0,
            0.0,
            512.0 / 1771.0,
        ];
        const B4: [f64; 6] = [
            2825.0 / 27648.0,
            0.0,
            18575.0 / 48384.0,
            13525.0 / 55296.0,
            277.0 / 14336.0,
            0.25,
        ];

        let mut steps = 0usize;
        while x < t {
            if steps > 5_000_000 {
                return Err(Error::IntegrationFailure("ODE step budget exhausted"));
            }
            steps += 1;
            h = h.min(t - x);
            let k1 = rhs(y);
            let k2 = rhs(y + h * A[0][0] * k1);
            let k3 = rhs(y + h * (A[1][0] * k1 + A[1][1] * k2));
            let k4 = rhs(y + h * (A[2][0] * k1 + A[2][1] * k2 + A[2][2] * k3));
            let k5 = rhs(y + h * (A[3][0] * k1 + A[3][1] * k2 + A[3][2] * k3 + A[3][3] * k4));
            let k6 = rhs(
                y + h * (A[4][0] * k1 + A[4][1] * k2 + A[4][2] * k3 + A[4][3] * k4 + A[4][4] * k5),
            );
            let y5 = y + h * (B5[0] * k1 + B5[2] * k3 + B5[3] * k4 + B5[5] * k6);
            let y4 = y + h * (B4[0] * k1 + B4[2] * k3 + B4[3] * k4 + B4[4] * k5 + B4[5] * k6);
            let err = (y5 - y4).abs();
            let tol = self.ode_tol;
            if err <= tol || h <= 1e-13 * t.max(1.0) {
                if h <= 1e-13 * t.max(1.0) && err > tol {
                    return Err(Error::IntegrationFailure("ODE step size underflow"));
                }
                x += h;
                y = y5.clamp(0.0, 1.0);
            }
            let scale = if err > 0.0 {
                0.9 * (tol / err).powf(0.2)
            } else {
                5.0
            };
            h *= scale.clamp(0.2, 5.0);
        }
        Ok(y)
    }

    /// `q(t;s) = 1 - g(F(t;s)) = 1 / Psi(W(mu t + V(1/(1-s))))`; zero at
    /// `s = 1`.
    pub fn q(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_time(t)?;
        Self::check_s(s)?;
        if s >= 1.0 {
            return Ok(0.0);
        }
        let arg = self.chain.lawset.mu * t + self.chain.v(1.0 / (1.0 - s))?;
        Ok(1.0 / self.chain.psi(self.chain.w(arg)?)?)
    }

    /// `q(t) = q(t;0)`.
    pub fn q0(&self, t: f64) -> Result<f64> {
        self.q(t, 0.0)
    }

    /// Whether `Delta(s)` (equivalently `Q`) converges: the integrand
    /// behaves like `(1-u)^(alpha-gamma-1)` times a ratio of slowly varying
    /// factors, so convergence is decided by `alpha > gamma`, with the
    /// log-power difference breaking the tie at `alpha = gamma`.
    fn delta_converges(&self) -> bool {
        let a = self.chain.lawset.immigration.alpha;
        let g = self.chain.lawset.offspring.gamma;
        if a > g {
            return true;
        }
        if a < g {
            return false;
        }
        let p = self.chain.lawset.immigration.scale.beta - self.chain.lawset.offspring.scale.beta;
        p < -1.0
    }

    /// `Delta(s) = int_s^1 (1 - g(u)) / (mu (f(u) - u)) du`, with the
    /// divergent case flagged rather than raised.
    pub fn delta(&self, s: f64) -> Result<IntegralValue> {
        Self::check_s(s)?;
        if !self.delta_converges() {
            return Ok(IntegralValue::Divergent);
        }
        if s >= 1.0 {
            return Ok(IntegralValue::Finite(0.0));
        }
        let a = self.chain.lawset.immigration.alpha;
        let g = self.chain.lawset.offspring.gamma;
        let mu = self.chain.lawset.mu;
        let l_imm = self.chain.lawset.immigration.scale;
        let l_off = self.chain.lawset.offspring.scale;
        let w = 1.0 - s;
        if a > g {
            // Substituting z = (1-u)^(alpha-gamma) flattens the endpoint
            // power exactly; what is left is the slowly varying ratio.
            let d = a - g;
            let f = move |z: f64| {
                let ln_x = -z.ln() / d;
                l_imm.value_at_log(ln_x) / l_off.value_at_log(ln_x)
            };
            let z_max = w.powf(d);
            let val = quad::adaptive(&f, 0.0, z_max, self.quad_tol, 1e-300)?;
            Ok(IntegralValue::Finite(val / (mu * d)))
        } else {
            // alpha = gamma with log-power ratio p < -1: in y = ln(1/(1-u))
            // the integrand is the slowly varying ratio itself; integrate a
            // finite window and close with the exact power-of-log tail.
            let p = l_imm.beta - l_off.beta;
            let y0 = -w.ln();
            let y_cut = (y0 + 50.0).max(200.0);
            let f = move |y: f64| l_imm.value_at_log(y) / l_off.value_at_log(y);
            let head = quad::adaptive_power_tail(&f, y0.max(0.0), y_cut, self.quad_tol, 1e-300)?;
            let tail = (l_imm.c / l_off.c) * y_cut.powf(p + 1.0) / (-1.0 - p);
            Ok(IntegralValue::Finite((head + tail) / mu))
        }
    }

    /// `Q = Delta(0) = int_0^1 (1 - g(u)) / (mu (f(u) - u)) du`.
    pub fn q_total(&self) -> Result<IntegralValue> {
        self.delta(0.0)
    }

    /// Mean measure `R(t) = int_0^t r(u) du` of the immigration process.
    pub fn r_cum(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let law = &self.chain.lawset.intensity;
        let theta = law.theta;
        let tau0 = law.tau0;
        if law.scale.is_constant() {
            let c = law.scale.c;
            if tau0 == 0.0 && theta >= 1.0 {
                return Ok(f64::INFINITY); // non-integrable at the origin
            }
            if (theta - 1.0).abs() < 1e-12 {
                return Ok(c * ((t + tau0) / tau0).ln());
            }
            return Ok(c * ((t + tau0).powf(1.0 - theta) - tau0.powf(1.0 - theta)) / (1.0 - theta));
        }
        let f = |u: f64| law.scale.value(u) * (u + tau0).powf(-theta);
        quad::adaptive_power_tail(&f, 0.0, t, self.quad_tol, 1e-300)
    }

    /// Total mass `R = int_0^infty r(u) du`, divergence flagged.
    pub fn r_total(&self) -> Result<IntegralValue> {
        let law = &self.chain.lawset.intensity;
        let theta = law.theta;
        let tau0 = law.tau0;
        let beta = law.scale.beta;
        let finite = theta > 1.0 || ((theta - 1.0).abs() < 1e-12 && beta < -1.0);
        if !finite || tau0 == 0.0 {
            return Ok(IntegralValue::Divergent);
        }
        if law.scale.is_constant() {
            let c = law.scale.c;
            return Ok(IntegralValue::Finite(c * tau0.powf(1.0 - theta) / (theta - 1.0)));
        }
        let head = self.r_cum(1.0)?;
        let scale = law.scale;
        if theta > 1.0 {
            // u + tau0 = e^v: integrand L_R(e^v - tau0) e^((1-theta) v),
            // exponentially damped; march doubling windows until spent.
            let f = move |v: f64| {
                let ln_u = v + (-tau0 * (-v).exp()).ln_1p();
                scale.value_at_log(ln_u) * ((1.0 - theta) * v).exp()
            };
            let v0 = (1.0 + tau0).ln();
            let v_end = v0 + 780.0 / (theta - 1.0);
            let mut total = 0.0f64;
            let mut lo = v0;
            let mut width = 4.0 / (theta - 1.0);
            while lo < v_end {
                let hi = (lo + width).min(v_end);
                total += quad::adaptive(&f, lo, hi, self.quad_tol, self.quad_tol * total.abs() + 1e-300)?;
                lo = hi;
                width *= 2.0;
            }
            Ok(IntegralValue::Finite(head + total))
        } else {
            // theta = 1 with beta < -1: slowly varying integrand in v with
            // an exact power-of-log tail.
            let f = move |v: f64| {
                let ln_u = v + (-tau0 * (-v).exp()).ln_1p();
                scale.value_at_log(ln_u) * ((1.0 - theta) * v).exp()
            };
            let v0 = (1.0 + tau0).ln();
            let v_cut = v0.max(200.0) + 50.0;
            let mid = quad::adaptive_power_tail(&f, v0, v_cut, self.quad_tol, 1e-300)?;
            let tail = scale.c * v_cut.powf(beta + 1.0) / (-1.0 - beta);
            Ok(IntegralValue::Finite(head + mid + tail))
        }
    }

    /// `Q(t) = int_0^t q(u) du`.
    pub fn q_cum(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let f = |u: f64| self.q0(u).unwrap_or(f64::NAN);
        quad::adaptive_power_tail(&f, 0.0, t, self.quad_tol, 1e-300)
    }

    /// Convolution `I(t;s) = int_0^t r(t-u) q(u;s) du`. The intensity
    /// factor peaks at `u = t` (bounded there thanks to the `tau0`
    /// regularization) and `q` peaks at `u = 0`; each half is integrated
    /// toward its own active endpoint.
    pub fn i_conv(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_time(t)?;
        Self::check_s(s)?;
        if t == 0.0 || s >= 1.0 {
            return Ok(0.0);
        }
        let rate = |u: f64| self.chain.lawset.intensity.rate(u).unwrap_or(f64::NAN);
        let qs = |u: f64| self.q(u, s).unwrap_or(f64::NAN);
        if t <= 4.0 {
            let f = |u: f64| rate(t - u) * qs(u);
            return quad::adaptive(&f, 0.0, t, self.quad_tol, 1e-300);
        }
        let m = 0.5 * t;
        let lower = |u: f64| rate(t - u) * qs(u);
        let upper = |w: f64| rate(w) * qs(t - w);
        let a = quad::adaptive_power_tail(&lower, 0.0, m, self.quad_tol, 1e-300)?;
        let b = quad::adaptive_power_tail(&upper, 0.0, m, self.quad_tol, 1e-300)?;
        Ok(a + b)
    }

    /// `Phi(t;s) = exp(-I(t;s))`: the generating functional of the
    /// immigration-fed population started empty.
    pub fn phi(&self, t: f64, s: f64) -> Result<f64> {
        Ok((-self.i_conv(t, s)?).exp())
    }

    /// `P_t = P{Y(t) > 0} = 1 - Phi(t;0)`.
    pub fn p_survival(&self, t: f64) -> Result<f64> {
        Ok(-(-self.i_conv(t, 0.0)?).exp_m1())
    }

    /// Conditional generating function `E[s^Y(t) | Y(t) > 0]`.
    pub fn cond_pgf(&self, t: f64, s: f64) -> Result<f64> {
        let p = self.p_survival(t)?;
        if p < 1e-300 {
            return Err(Error::Degenerate("survival probability underflows"));
        }
        let num = -(-self.i_conv(t, s)?).exp_m1();
        Ok(1.0 - num / p)
    }

    /// Normalization value `n(t)` for scaled Laplace transforms.
    pub fn normalization_value(&self, t: f64, norm: Normalization) -> Result<f64> {
        match norm {
            Normalization::WMuT => self.chain.w(self.chain.lawset.mu * t),
            Normalization::PsiInvRT => {
                let r = self.r_cum(t)?;
                self.chain.psi_inv(r.max(1.0))
            }
            Normalization::None => Err(Error::Domain {
                what: "normalization",
                value: f64::NAN,
                expected: "a rescaling rule (W(mu t) or PsiInv(R(t)))",
            }),
        }
    }

    /// Conditional Laplace transform
    /// `E[exp(-lambda Y(t)/n(t)) | Y(t) > 0] = cond_pgf(t, exp(-lambda/n(t)))`.
    pub fn cond_laplace(&self, t: f64, lambda: f64, norm: Normalization) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain {
                what: "lambda",
                value: lambda,
                expected: "(0, inf)",
            });
        }
        let n = self.normalization_value(t, norm)?;
        self.cond_pgf(t, (-lambda / n).exp().min(1.0))
    }
}
