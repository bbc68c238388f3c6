//! Regime classification, survival-probability asymptotes, and the catalog
//! of limiting distributions.
//!
//! The split is driven by three tail indices: `theta` (intensity decay),
//! `alpha` (immigrant batches), `gamma` (offspring), through `rho =
//! alpha/gamma` and the slowly varying factors. Constant scale functions
//! are classified symbolically; log-power scales fall back to large-`t`
//! probes that must agree across three decades, surfacing `Unresolved`
//! rather than guessing.

use crate::analytic::{AnalyticEngine, IntegralValue, Normalization};
use crate::error::{Error, Result};
use crate::laws::LawSet;
use crate::quad;
use crate::special;

pub use crate::special::beta as eval_beta;

/// Which survival-probability theorem governs the law set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeTag {
    A,
    B,
    C,
    D1,
    D2,
    D3,
}

impl RegimeTag {
    /// Interface label of the regime.
    pub fn label(self) -> &'static str {
        match self {
            RegimeTag::A => "A_Thm41",
            RegimeTag::B => "B_Thm42i",
            RegimeTag::C => "C_Thm42ii",
            RegimeTag::D1 => "D1_Thm43i",
            RegimeTag::D2 => "D2_Thm43ii",
            RegimeTag::D3 => "D3_Thm43iii",
        }
    }

    /// Governing survival theorem of the underlying theory.
    pub fn theorem(self) -> &'static str {
        match self {
            RegimeTag::A => "4.1",
            RegimeTag::B => "4.2(i)",
            RegimeTag::C => "4.2(ii)",
            RegimeTag::D1 => "4.3(i)",
            RegimeTag::D2 => "4.3(ii)",
            RegimeTag::D3 => "4.3(iii)",
        }
    }
}

impl std::fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which limiting-distribution theorem applies, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitTag {
    /// Discrete stationary-type limit of the conditional law.
    Stationary,
    /// `W(mu t)`-scaled limit with transform `1 - x^a/(1+x^g)^(a/g)`.
    Scaled,
    /// The singular pair: discrete law with an atom at infinity plus a
    /// scaled law with an atom at zero.
    Mixture,
    /// `W(mu t)`-scaled limit on the `theta = 1`, `alpha = gamma` boundary.
    ScaledGammaD,
    /// Scaled limit with the incomplete-beta-type transform.
    D1,
    /// Scaled limit when the survival probability converges inside (0,1).
    D2,
    /// Unconditional stable limit normalized by `PsiInv(R(t))`.
    Stable,
    /// Numeric limit detection disagreed between probe points, or the
    /// parameter combination is outside the proved catalog.
    Unresolved,
}

impl LimitTag {
    pub fn label(self) -> &'static str {
        match self {
            LimitTag::Stationary => "Stationary_51i_52i_54ii",
            LimitTag::Scaled => "Scaled_51ii_52ii_54i",
            LimitTag::Mixture => "Mixture_51iii",
            LimitTag::ScaledGammaD => "Scaled_53",
            LimitTag::D1 => "D1_55i",
            LimitTag::D2 => "D2_55ii",
            LimitTag::Stable => "Stable_55iii",
            LimitTag::Unresolved => "Unresolved",
        }
    }

    pub fn theorem(self) -> &'static str {
        match self {
            LimitTag::Stationary => "5.1(i)/5.2(i)/5.4(ii)",
            LimitTag::Scaled => "5.1(ii)/5.2(ii)/5.4(i)",
            LimitTag::Mixture => "5.1(iii)",
            LimitTag::ScaledGammaD => "5.3",
            LimitTag::D1 => "5.5(i)",
            LimitTag::D2 => "5.5(ii)",
            LimitTag::Stable => "5.5(iii)",
            LimitTag::Unresolved => "-",
        }
    }

    /// Normalization of the scaled limit (None for discrete limits).
    pub fn normalization(self) -> Normalization {
        match self {
            LimitTag::Scaled | LimitTag::ScaledGammaD | LimitTag::D1 | LimitTag::D2 => {
                Normalization::WMuT
            }
            LimitTag::Stable => Normalization::PsiInvRT,
            LimitTag::Mixture => Normalization::WMuT, // for its scaled half
            LimitTag::Stationary | LimitTag::Unresolved => Normalization::None,
        }
    }
}

impl std::fmt::Display for LimitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of classifying a `LawSet`: regime and limit tags plus whichever
/// auxiliary constants the governing theorems need.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub tag: RegimeTag,
    pub limit_tag: LimitTag,
    /// `Q = int_0^inf q(u) du` when finite.
    pub q_total: Option<f64>,
    /// `R = int_0^inf r(u) du` when finite.
    pub r_total: Option<f64>,
    /// Limit of `r/q` (mixture) or of `r Q(t) / (q R(t))` (boundary case).
    pub d: Option<f64>,
    /// Limit of `L_R(t) L_Q(t)` on the `theta + rho = 1` boundary.
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ProbeLimit {
    Zero,
    Infinite,
    Constant(f64),
    Undecided,
}

/// Evaluate `f` at three probe points spanning four decades and commit to
/// a limit only when the probes agree: monotone by a factor >= 2 per step
/// declares 0 or infinity, agreement within 1% declares a constant.
fn probe_limit<F: FnMut(f64) -> Result<f64>>(mut f: F) -> Result<ProbeLimit> {
    let ts = [1e8, 1e10, 1e12];
    let mut v = [0.0f64; 3];
    for (i, &t) in ts.iter().enumerate() {
        v[i] = f(t)?;
        if !v[i].is_finite() || v[i] < 0.0 {
            return Ok(ProbeLimit::Undecided);
        }
    }
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    if max <= min * 1.01 {
        return Ok(ProbeLimit::Constant(v.iter().sum::<f64>() / 3.0));
    }
    if v[1] <= 0.5 * v[0] && v[2] <= 0.5 * v[1] {
        return Ok(ProbeLimit::Zero);
    }
    if v[1] >= 2.0 * v[0] && v[2] >= 2.0 * v[1] {
        return Ok(ProbeLimit::Infinite);
    }
    Ok(ProbeLimit::Undecided)
}

fn all_scales_constant(lawset: &LawSet) -> bool {
    lawset.offspring.scale.is_constant()
        && lawset.immigration.scale.is_constant()
        && lawset.intensity.scale.is_constant()
}

/// Asymptotic constant of `L_Q(t) = q(t) t^rho` for all-constant scales:
/// `c_l (gamma c_L mu)^(-rho)`.
fn lq_limit_constant(lawset: &LawSet) -> f64 {
    let rho = lawset.rho();
    let g = lawset.offspring.gamma;
    lawset.immigration.scale.c * (g * lawset.offspring.scale.c * lawset.mu).powf(-rho)
}

const BOUNDARY_EPS: f64 = 1e-12;

fn cmp_boundary(x: f64, y: f64) -> std::cmp::Ordering {
    if (x - y).abs() <= BOUNDARY_EPS * x.abs().max(y.abs()).max(1.0) {
        std::cmp::Ordering::Equal
    } else if x < y {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

/// Classify a law set into its survival regime and limiting-distribution
/// case.
pub fn classify(engine: &AnalyticEngine) -> Result<Regime> {
    let lawset = engine.lawset();
    let theta = lawset.intensity.theta;
    let rho = lawset.rho();
    let constant = all_scales_constant(lawset);

    let q_total = engine.q_total()?;
    let r_total = engine.r_total()?;

    use std::cmp::Ordering::*;
    let theta_ge_1 = cmp_boundary(theta, 1.0) != Less;
    let rho_ge_1 = cmp_boundary(rho, 1.0) != Less;

    let mut d = None;
    let mut k = None;

    let (tag, limit_tag) = match (theta_ge_1, rho_ge_1) {
        (true, true) => {
            let tag = RegimeTag::A;
            let limit = match (q_total, r_total) {
                (IntegralValue::Finite(_), IntegralValue::Finite(_)) => {
                    // Trichotomy on lim r(t)/q(t).
                    match ratio_limit_r_over_q(engine, constant)? {
                        ProbeLimit::Zero => LimitTag::Scaled,
                        ProbeLimit::Infinite => LimitTag::Stationary,
                        ProbeLimit::Constant(val) => {
                            d = Some(val);
                            LimitTag::Mixture
                        }
                        ProbeLimit::Undecided => LimitTag::Unresolved,
                    }
                }
                (IntegralValue::Divergent, _) => {
                    // Q(t) diverges, which inside this quadrant means
                    // alpha = gamma.
                    if cmp_boundary(theta, 1.0) == Greater {
                        LimitTag::Scaled
                    } else {
                        match boundary_d(engine, constant)? {
                            Some(val) => {
                                d = Some(val);
                                LimitTag::ScaledGammaD
                            }
                            None => LimitTag::Unresolved,
                        }
                    }
                }
                (IntegralValue::Finite(_), IntegralValue::Divergent) => {
                    if cmp_boundary(rho, 1.0) == Greater {
                        LimitTag::Stationary
                    } else {
                        // Q finite with rho = 1 needs a strong log factor;
                        // with R also divergent no proved case applies.
                        LimitTag::Unresolved
                    }
                }
            };
            (tag, limit)
        }
        (true, false) => (RegimeTag::B, LimitTag::Scaled),
        (false, true) => {
            let limit = if q_total.is_divergent() {
                LimitTag::Unresolved
            } else {
                LimitTag::Stationary
            };
            (RegimeTag::C, limit)
        }
        (false, false) => {
            // Trichotomy on t r(t) q(t) = L_R(t) L_Q(t) t^(1-theta-rho).
            let exponent = 1.0 - theta - rho;
            let sub = if constant {
                match cmp_boundary(exponent, 0.0) {
                    Less => ProbeLimit::Zero,
                    Greater => ProbeLimit::Infinite,
                    Equal => {
                        ProbeLimit::Constant(lawset.intensity.scale.c * lq_limit_constant(lawset))
                    }
                }
            } else {
                probe_limit(|t| Ok(t * lawset.intensity.rate(t)? * engine.q0(t)?))?
            };
            match sub {
                ProbeLimit::Zero => (RegimeTag::D1, LimitTag::D1),
                ProbeLimit::Infinite => (RegimeTag::D3, LimitTag::Stable),
                ProbeLimit::Constant(val) => {
                    k = Some(val);
                    (RegimeTag::D2, LimitTag::D2)
                }
                ProbeLimit::Undecided => {
                    // The probes could not commit; pick the tag from the
                    // exponent alone and surface the ambiguity.
                    let tag = match cmp_boundary(exponent, 0.0) {
                        Less => RegimeTag::D1,
                        Greater => RegimeTag::D3,
                        Equal => RegimeTag::D2,
                    };
                    (tag, LimitTag::Unresolved)
                }
            }
        }
    };

    Ok(Regime {
        tag,
        limit_tag,
        q_total: q_total.finite(),
        r_total: r_total.finite(),
        d,
        k,
    })
}

/// Limit of `r(t)/q(t)` inside regime A.
fn ratio_limit_r_over_q(engine: &AnalyticEngine, constant: bool) -> Result<ProbeLimit> {
    let lawset = engine.lawset();
    let theta = lawset.intensity.theta;
    let rho = lawset.rho();
    if constant {
        use std::cmp::Ordering::*;
        return Ok(match cmp_boundary(rho, theta) {
            Greater => ProbeLimit::Infinite, // q decays faster
            Less => ProbeLimit::Zero,
            Equal => ProbeLimit::Constant(lawset.intensity.scale.c / lq_limit_constant(lawset)),
        });
    }
    probe_limit(|t| Ok(lawset.intensity.rate(t)? / engine.q0(t)?))
}

/// Limit of `r(t) Q(t) / (q(t) R(t))` on the `theta = 1`, `alpha = gamma`
/// boundary; equals 1 identically for constant scales.
fn boundary_d(engine: &AnalyticEngine, constant: bool) -> Result<Option<f64>> {
    if constant {
        return Ok(Some(1.0));
    }
    let lawset = engine.lawset();
    match probe_limit(|t| {
        let num = lawset.intensity.rate(t)? * engine.q_cum(t)?;
        let den = engine.q0(t)? * engine.r_cum(t)?;
        Ok(num / den)
    })? {
        ProbeLimit::Constant(v) => Ok(Some(v)),
        ProbeLimit::Zero => Ok(Some(0.0)),
        _ => Ok(None),
    }
}

/// The survival-probability asymptote of the regime evaluated at finite `t`.
pub fn predict_survival(regime: &Regime, engine: &AnalyticEngine, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            what: "t",
            value: t,
            expected: "(0, inf)",
        });
    }
    let lawset = engine.lawset();
    match regime.tag {
        RegimeTag::A => {
            Ok(engine.r_cum(t)? * engine.q0(t)? + engine.q_cum(t)? * lawset.intensity.rate(t)?)
        }
        RegimeTag::B => Ok(engine.r_cum(t)? * engine.q0(t)?),
        RegimeTag::C => Ok(engine.q_cum(t)? * lawset.intensity.rate(t)?),
        RegimeTag::D1 => {
            let b = special::beta(1.0 - lawset.rho(), 1.0 - lawset.intensity.theta)?;
            Ok(t * lawset.intensity.rate(t)? * engine.q0(t)? * b)
        }
        RegimeTag::D2 => {
            let k = regime
                .k
                .ok_or(Error::UnavailableConstant("K for the boundary regime"))?;
            let theta = lawset.intensity.theta;
            Ok(-(-k * std::f64::consts::PI / (std::f64::consts::PI * theta).sin()).exp_m1())
        }
        RegimeTag::D3 => Ok(1.0),
    }
}

/// Kind of limiting-law evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Pgf,
    LaplaceTransform,
}

#[derive(Debug, Clone, PartialEq)]
enum LimitForm {
    StationaryPgf,
    MixturePgf {
        d: f64,
        q_total: f64,
        r_total: f64,
    },
    ScaledLaplace {
        alpha: f64,
        gamma: f64,
    },
    MixtureLaplace {
        d: f64,
        q_total: f64,
        r_total: f64,
        alpha: f64,
        gamma: f64,
    },
    GammaDLaplace {
        gamma: f64,
        d: f64,
    },
    D1Laplace {
        theta: f64,
        alpha: f64,
        gamma: f64,
    },
    D2Laplace {
        theta: f64,
        alpha: f64,
        gamma: f64,
        k: f64,
    },
    StableLaplace {
        alpha: f64,
    },
}

/// A limiting distribution in transform form, with its normalization rule
/// and atom structure.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLaw {
    pub kind: LimitKind,
    pub normalization: Normalization,
    pub atom_at_zero: f64,
    pub atom_at_infinity: f64,
    /// Whether the limit statement conditions on `{Y(t) > 0}`.
    pub conditional_on_survival: bool,
    form: LimitForm,
}

impl LimitLaw {
    /// Evaluate the transform at `s` (Pgf kind) or `lambda` (Laplace kind).
    pub fn evaluate(&self, engine: &AnalyticEngine, arg: f64) -> Result<f64> {
        match &self.form {
            LimitForm::StationaryPgf => {
                let q = engine
                    .q_total()?
                    .finite()
                    .ok_or(Error::UnavailableConstant("Q"))?;
                let delta = engine
                    .delta(arg)?
                    .finite()
                    .ok_or(Error::UnavailableConstant("Delta(s)"))?;
                Ok(1.0 - delta / q)
            }
            LimitForm::MixturePgf {
                d,
                q_total,
                r_total,
            } => {
                let delta = engine
                    .delta(arg)?
                    .finite()
                    .ok_or(Error::UnavailableConstant("Delta(s)"))?;
                let dq = d * q_total;
                Ok(dq / (dq + r_total) * (1.0 - delta / q_total))
            }
            LimitForm::ScaledLaplace { alpha, gamma } => Ok(d_hat(*alpha, *gamma, arg)),
            LimitForm::MixtureLaplace {
                d,
                q_total,
                r_total,
                alpha,
                gamma,
            } => {
                let dq = d * q_total;
                Ok((dq + r_total * d_hat(*alpha, *gamma, arg)) / (dq + r_total))
            }
            LimitForm::GammaDLaplace { gamma, d } => Ok(gamma_d_hat(*gamma, *d, arg)),
            LimitForm::D1Laplace {
                theta,
                alpha,
                gamma,
            } => d1_hat(*theta, *alpha, *gamma, arg),
            LimitForm::D2Laplace {
                theta,
                alpha,
                gamma,
                k,
            } => d2_hat(*theta, *alpha, *gamma, *k, arg),
            LimitForm::StableLaplace { alpha } => Ok(d3_hat(*alpha, arg)),
        }
    }
}

/// Build the limiting-law evaluator(s) for a classified regime. The
/// mixture case returns both members of its singular pair: the discrete
/// generating-function law (atom at infinity) and the scaled Laplace law
/// (atom at zero).
pub fn limit_laws(regime: &Regime, lawset: &LawSet) -> Result<Vec<LimitLaw>> {
    let alpha = lawset.immigration.alpha;
    let gamma = lawset.offspring.gamma;
    let theta = lawset.intensity.theta;
    match regime.limit_tag {
        LimitTag::Stationary => Ok(vec![LimitLaw {
            kind: LimitKind::Pgf,
            normalization: Normalization::None,
            atom_at_zero: 0.0,
            atom_at_infinity: 0.0,
            conditional_on_survival: true,
            form: LimitForm::StationaryPgf,
        }]),
        LimitTag::Scaled => Ok(vec![LimitLaw {
            kind: LimitKind::LaplaceTransform,
            normalization: Normalization::WMuT,
            atom_at_zero: 0.0,
            atom_at_infinity: 0.0,
            conditional_on_survival: true,
            form: LimitForm::ScaledLaplace { alpha, gamma },
        }]),
        LimitTag::Mixture => {
            let d = regime.d.ok_or(Error::UnavailableConstant("d"))?;
            let q_total = regime.q_total.ok_or(Error::UnavailableConstant("Q"))?;
            let r_total = regime.r_total.ok_or(Error::UnavailableConstant("R"))?;
            let dq = d * q_total;
            Ok(vec![
                LimitLaw {
                    kind: LimitKind::Pgf,
                    normalization: Normalization::None,
                    atom_at_zero: 0.0,
                    atom_at_infinity: r_total / (dq + r_total),
                    conditional_on_survival: true,
                    form: LimitForm::MixturePgf {
                        d,
                        q_total,
                        r_total,
                    },
                },
                LimitLaw {
                    kind: LimitKind::LaplaceTransform,
                    normalization: Normalization::WMuT,
                    atom_at_zero: dq / (dq + r_total),
                    atom_at_infinity: 0.0,
                    conditional_on_survival: true,
                    form: LimitForm::MixtureLaplace {
                        d,
                        q_total,
                        r_total,
                        alpha,
                        gamma,
                    },
                },
            ])
        }
        LimitTag::ScaledGammaD => {
            let d = regime.d.ok_or(Error::UnavailableConstant("d"))?;
            Ok(vec![LimitLaw {
                kind: LimitKind::LaplaceTransform,
                normalization: Normalization::WMuT,
                atom_at_zero: d / (1.0 + d),
                atom_at_infinity: 0.0,
                conditional_on_survival: true,
                form: LimitForm::GammaDLaplace { gamma, d },
            }])
        }
        LimitTag::D1 => Ok(vec![LimitLaw {
            kind: LimitKind::LaplaceTransform,
            normalization: Normalization::WMuT,
            atom_at_zero: 0.0,
            atom_at_infinity: 0.0,
            conditional_on_survival: true,
            form: LimitForm::D1Laplace {
                theta,
                alpha,
                gamma,
            },
        }]),
        LimitTag::D2 => {
            let k = regime.k.ok_or(Error::UnavailableConstant("K"))?;
            Ok(vec![LimitLaw {
                kind: LimitKind::LaplaceTransform,
                normalization: Normalization::WMuT,
                atom_at_zero: 0.0,
                atom_at_infinity: 0.0,
                conditional_on_survival: true,
                form: LimitForm::D2Laplace {
                    theta,
                    alpha,
                    gamma,
                    k,
                },
            }])
        }
        LimitTag::Stable => Ok(vec![LimitLaw {
            kind: LimitKind::LaplaceTransform,
            normalization: Normalization::PsiInvRT,
            atom_at_zero: 0.0,
            atom_at_infinity: 0.0,
            conditional_on_survival: false,
            form: LimitForm::StableLaplace { alpha },
        }]),
        LimitTag::Unresolved => Err(Error::UnavailableConstant(
            "limit law for an unresolved classification",
        )),
    }
}

/// `ln(1 + e^u)` without overflow.
fn ln_one_plus_exp(u: f64) -> f64 {
    if u > 35.0 {
        u + (-u).exp()
    } else {
        u.exp().ln_1p()
    }
}

/// Scaled limit transform `1 - lambda^alpha / (1 + lambda^gamma)^(alpha/gamma)`.
pub fn d_hat(alpha: f64, gamma: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let rho = alpha / gamma;
    let exponent = alpha * lambda.ln() - rho * ln_one_plus_exp(gamma * lambda.ln());
    1.0 - exponent.exp()
}

/// Boundary-case transform `d/(1+d) + 1/((1+d)(1 + lambda^gamma))`.
pub fn gamma_d_hat(gamma: f64, d: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    d / (1.0 + d) + (-ln_one_plus_exp(gamma * lambda.ln())).exp() / (1.0 + d)
}

/// The kernel `int_0^1 (1-u)^(-theta) (u lambda^gamma + 1)^(-alpha/gamma) du`,
/// integrated after flattening the right-endpoint power with
/// `1 - u = z^(1/(1-theta))`.
fn d1_kernel(theta: f64, alpha: f64, gamma: f64, lambda: f64) -> Result<f64> {
    let rho = alpha / gamma;
    let lam_g = (gamma * lambda.ln()).exp();
    let inv = 1.0 / (1.0 - theta);
    let f = move |z: f64| {
        let u = 1.0 - z.powf(inv);
        inv * (-rho * (u * lam_g).ln_1p()).exp()
    };
    quad::adaptive(&f, 0.0, 1.0, 1e-11, 1e-300)
}

/// Scaled limit transform for the `t r q -> 0` sub-regime.
pub fn d1_hat(theta: f64, alpha: f64, gamma: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(1.0);
    }
    let rho = alpha / gamma;
    let j = d1_kernel(theta, alpha, gamma, lambda)?;
    Ok(1.0 - lambda.powf(alpha) * j / special::beta(1.0 - theta, 1.0 - rho)?)
}

/// Scaled limit transform for the `t r q -> K` sub-regime. The kernel is
/// shared with the `t r q -> 0` case: on this boundary `1 - theta` equals
/// `alpha/gamma`, so the two transforms must agree through the same
/// integrand; a variant with the kernel exponents sign-flipped fails that
/// consistency and is rejected by the Monte Carlo harness.
pub fn d2_hat(theta: f64, alpha: f64, gamma: f64, k: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Ok(1.0);
    }
    let j = d1_kernel(theta, alpha, gamma, lambda)?;
    let num = -(-k * lambda.powf(alpha) * j).exp_m1();
    let den = -(-k * special::beta(theta, 1.0 - theta)?).exp_m1();
    Ok(1.0 - num / den)
}

/// Unconditional stable limit transform `exp(-lambda^alpha)`.
pub fn d3_hat(alpha: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    (-lambda.powf(alpha)).exp()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{ImmigrationLaw, IntensityLaw, OffspringLaw, SlowlyVarying};

    fn constant_lawset(theta: f64, alpha: f64, gamma: f64) -> LawSet {
        LawSet::new(
            OffspringLaw::standard(gamma).unwrap(),
            ImmigrationLaw::sibuya(alpha).unwrap(),
            IntensityLaw::standard(theta, 1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    fn engine(theta: f64, alpha: f64, gamma: f64) -> AnalyticEngine {
        AnalyticEngine::with_defaults(constant_lawset(theta, alpha, gamma)).unwrap()
    }

    #[test]
    fn classify_examples() {
        // theta=2, alpha=0.8, gamma=0.5: regime A, r = o(q) -> scaled.
        let r = classify(&engine(2.0, 0.8, 0.5)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Scaled);

        // theta=1.5, alpha=0.9, gamma=0.5: q = o(r) -> stationary, Q = 3.75.
        let r = classify(&engine(1.5, 0.9, 0.5)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Stationary);
        let q = r.q_total.unwrap();
        assert!((q - 3.75).abs() < 1e-8 * 3.75);

        // theta=0.5, alpha=0.3, gamma=0.75: theta + rho = 0.9 < 1 -> D3.
        let r = classify(&engine(0.5, 0.3, 0.75)).unwrap();
        assert_eq!(r.tag, RegimeTag::D3);
        assert_eq!(r.limit_tag, LimitTag::Stable);
    }

    #[test]
    fn classify_boundary_cases() {
        // theta = 1, rho > 1: R diverges, stationary limit survives.
        let r = classify(&engine(1.0, 0.9, 0.5)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Stationary);
        assert!(r.r_total.is_none());

        // theta = 1 = rho: the gamma-d boundary with d = 1.
        let r = classify(&engine(1.0, 0.5, 0.5)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::ScaledGammaD);
        assert_eq!(r.d, Some(1.0));

        // theta > 1, rho = 1: Q(t) diverges, scaled limit.
        let r = classify(&engine(2.0, 0.6, 0.6)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Scaled);
        assert!(r.q_total.is_none());

        // theta = 2, alpha = 0.4, gamma = 0.8: regime B.
        let r = classify(&engine(2.0, 0.4, 0.8)).unwrap();
        assert_eq!(r.tag, RegimeTag::B);
        assert_eq!(r.limit_tag, LimitTag::Scaled);

        // theta = 0.5, alpha = 0.9, gamma = 0.5: regime C stationary.
        let r = classify(&engine(0.5, 0.9, 0.5)).unwrap();
        assert_eq!(r.tag, RegimeTag::C);
        assert_eq!(r.limit_tag, LimitTag::Stationary);

        // Regime C with alpha = gamma: Q diverges, no proved limit.
        let r = classify(&engine(0.5, 0.6, 0.6)).unwrap();
        assert_eq!(r.tag, RegimeTag::C);
        assert_eq!(r.limit_tag, LimitTag::Unresolved);

        // Mixture: theta = rho with finite Q and R.
        let r = classify(&engine(1.125, 0.9, 0.8)).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Mixture);
        let d = r.d.unwrap();
        let expect = 1.0 / lq_limit_constant(&constant_lawset(1.125, 0.9, 0.8));
        assert!((d - expect).abs() < 1e-12 * expect);

        // D1 and D2.
        let r = classify(&engine(0.7, 0.42, 0.7)).unwrap();
        assert_eq!(r.tag, RegimeTag::D1);
        assert_eq!(r.limit_tag, LimitTag::D1);
        let r = classify(&engine(0.5, 0.4, 0.8)).unwrap();
        assert_eq!(r.tag, RegimeTag::D2);
        assert_eq!(r.limit_tag, LimitTag::D2);
        let lq = lq_limit_constant(&constant_lawset(0.5, 0.4, 0.8));
        assert!((r.k.unwrap() - lq).abs() < 1e-12 * lq);
    }

    #[test]
    fn classify_log_power_probes() {
        // Log-power intensity scale: same regime decisions via probes.
        let ls = LawSet::new(
            OffspringLaw::standard(0.5).unwrap(),
            ImmigrationLaw::sibuya(0.8).unwrap(),
            IntensityLaw::new(2.0, SlowlyVarying::log_power(1.0, -1.0).unwrap(), 1.0).unwrap(),
            1.0,
        )
        .unwrap();
        let e = AnalyticEngine::with_defaults(ls).unwrap();
        let r = classify(&e).unwrap();
        assert_eq!(r.tag, RegimeTag::A);
        assert_eq!(r.limit_tag, LimitTag::Scaled);

        // Slow log-power drift on the D boundary: probes cannot commit.
        let ls = LawSet::new(
            OffspringLaw::standard(0.8).unwrap(),
            ImmigrationLaw::sibuya(0.4).unwrap(),
            IntensityLaw::new(0.5, SlowlyVarying::log_power(1.0, -1.5).unwrap(), 1.0).unwrap(),
            1.0,
        )
        .unwrap();
        let e = AnalyticEngine::with_defaults(ls).unwrap();
        let r = classify(&e).unwrap();
        assert_eq!(r.tag, RegimeTag::D2);
        assert_eq!(r.limit_tag, LimitTag::Unresolved);
        assert!(limit_laws(&r, e.lawset()).is_err());
    }

    #[test]
    fn classification_exhaustive_sweep() {
        // Deterministic pseudo-random sweep of (theta, alpha, gamma).
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let theta = 3.0 * next() + 1e-3;
            let alpha = next().clamp(1e-3, 1.0);
            let gamma = next().clamp(1e-3, 1.0);
            let e = AnalyticEngine::with_defaults(constant_lawset(theta, alpha, gamma)).unwrap();
            let r = classify(&e).unwrap();
            // Off the boundary set, the limit tag must be resolved.
            let rho = alpha / gamma;
            let off_boundary = (theta - 1.0).abs() > 1e-9
                && (rho - 1.0).abs() > 1e-9
                && (theta + rho - 1.0).abs() > 1e-9
                && (theta - rho).abs() > 1e-9;
            if off_boundary {
                assert_ne!(
                    r.limit_tag,
                    LimitTag::Unresolved,
                    "theta={theta} alpha={alpha} gamma={gamma}"
                );
            }
        }
    }

    #[test]
    fn predict_survival_examples() {
        // D2 with K = 1, theta = 0.5: P -> 1 - e^(-pi).
        let regime = Regime {
            tag: RegimeTag::D2,
            limit_tag: LimitTag::D2,
            q_total: None,
            r_total: None,
            d: None,
            k: Some(1.0),
        };
        let e = engine(0.5, 0.4, 0.8);
        let p = predict_survival(&regime, &e, 100.0).unwrap();
        assert!((p - (1.0 - (-std::f64::consts::PI).exp())).abs() < 1e-12);
        assert!((p - 0.956_786).abs() < 1e-6);

        // D3: identically 1.
        let e3 = engine(0.5, 0.3, 0.75);
        let r3 = classify(&e3).unwrap();
        assert_eq!(predict_survival(&r3, &e3, 123.0).unwrap(), 1.0);

        // Regime A: R(t) q(t) + Q(t) r(t).
        let ea = engine(1.5, 0.9, 0.5);
        let ra = classify(&ea).unwrap();
        let t = 37.0;
        let expect = ea.r_cum(t).unwrap() * ea.q0(t).unwrap()
            + ea.q_cum(t).unwrap() * ea.lawset().intensity.rate(t).unwrap();
        assert!((predict_survival(&ra, &ea, t).unwrap() - expect).abs() < 1e-12);
        assert!(predict_survival(&ra, &ea, 0.0).is_err());
    }

    #[test]
    fn scaled_transform_values() {
        // alpha = gamma: 1 - lambda^g/(1+lambda^g) at lambda = 1 is 1/2.
        assert!((d_hat(0.5, 0.5, 1.0) - 0.5).abs() < 1e-14);
        assert!((d_hat(1.0, 1.0, 1.0) - 0.5).abs() < 1e-14);
        // D-hat(0.4, 0.8; 1) = 1 - 1/sqrt(2).
        let v = d_hat(0.4, 0.8, 1.0);
        assert!((v - (1.0 - 0.5f64.sqrt())).abs() < 1e-14);
        assert!((v - 0.29289).abs() < 1e-5);
        // Extremes.
        assert!((d_hat(0.8, 0.9, 1e-8) - 1.0).abs() < 1e-6);
        assert!(d_hat(0.8, 0.9, 1e8) < 1e-6);
    }

    #[test]
    fn stable_transform_values() {
        assert!((d3_hat(0.5, 1.0) - (-1.0f64).exp()).abs() < 1e-14);
        assert!((d3_hat(0.5, 1.0) - 0.367879).abs() < 1e-6);
        assert!((d3_hat(0.3, 1e-12) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gamma_d_transform_values() {
        // d = 1: atom at zero 1/2; lambda -> infinity leaves the atom.
        assert!((gamma_d_hat(0.9, 1.0, 1e8) - 0.5).abs() < 1e-6);
        assert!((gamma_d_hat(0.5, 0.0, 1.0) - 0.5).abs() < 1e-14);
        assert!((gamma_d_hat(0.9, 1.0, 1e-8) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stationary_law_closed_form() {
        // phi(s) = 1 - (1-s)^(alpha-gamma) for the constant family.
        let e = engine(1.5, 0.9, 0.5);
        let regime = classify(&e).unwrap();
        let laws = limit_laws(&regime, e.lawset()).unwrap();
        assert_eq!(laws.len(), 1);
        let law = &laws[0];
        assert_eq!(law.kind, LimitKind::Pgf);
        assert_eq!(law.normalization, Normalization::None);
        assert!(law.conditional_on_survival);
        let v = law.evaluate(&e, 0.5).unwrap();
        let expect = 1.0 - 0.5f64.powf(0.4);
        assert!((v - expect).abs() < 1e-8, "{v} vs {expect}");
        assert!((v - 0.24214).abs() < 1e-5);
        // Pgf invariant: evaluate(1) = 1 - atom_at_infinity.
        assert!((law.evaluate(&e, 1.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_pair_structure() {
        let e = engine(1.125, 0.9, 0.8);
        let regime = classify(&e).unwrap();
        let laws = limit_laws(&regime, e.lawset()).unwrap();
        assert_eq!(laws.len(), 2);
        let pgf = &laws[0];
        let lap = &laws[1];
        assert_eq!(pgf.kind, LimitKind::Pgf);
        assert_eq!(lap.kind, LimitKind::LaplaceTransform);
        // Mass balance: the two atoms partition the conditional mass.
        assert!((pgf.atom_at_infinity + lap.atom_at_zero - 1.0).abs() < 1e-14);
        // Pgf invariant at s = 1.
        let at_one = pgf.evaluate(&e, 1.0).unwrap();
        assert!((at_one - (1.0 - pgf.atom_at_infinity)).abs() < 1e-9);
        // Laplace endpoints: 1 at 0+, atom at the infinity end.
        let lo = lap.evaluate(&e, 1e-8).unwrap();
        assert!((lo - 1.0).abs() < 1e-4, "lo = {lo}");
        let hi = lap.evaluate(&e, 1e8).unwrap();
        assert!((hi - lap.atom_at_zero).abs() < 1e-4, "hi = {hi}");
    }

    #[test]
    fn laplace_laws_limits_at_extremes() {
        // With alpha, gamma >= 0.8 the power-law gap at lambda = 1e-8 and
        // 1e8 sits under 1e-6.
        let scaled = d_hat(0.9, 0.9, 1e-8);
        assert!((scaled - 1.0).abs() < 1e-6);
        assert!(d_hat(0.9, 0.9, 1e8) < 1e-6);
        let gd0 = gamma_d_hat(0.9, 0.7, 1e-8);
        assert!((gd0 - 1.0).abs() < 1e-6);
        let gd1 = gamma_d_hat(0.9, 0.7, 1e8);
        assert!((gd1 - 0.7 / 1.7).abs() < 1e-6);
        // D1/D2 close their lambda -> infinity gap like
        // lambda^(-gamma(1-rho)); check the monotone approach instead of a
        // fixed window.
        let (theta, alpha, gamma) = (0.5, 0.3, 0.75);
        let d1_lo = d1_hat(theta, alpha, gamma, 1e-8).unwrap();
        assert!((d1_lo - 1.0).abs() < 1e-2);
        let mut prev = f64::INFINITY;
        for lam in [1e2, 1e4, 1e6, 1e8] {
            let v = d1_hat(theta, alpha, gamma, lam).unwrap();
            assert!(v < prev && v >= -1e-9);
            prev = v;
        }
        assert!(prev < 1e-2);
        let d2_lo = d2_hat(0.5, 0.4, 0.8, 1.5, 1e-12).unwrap();
        assert!((d2_lo - 1.0).abs() < 1e-3, "d2_lo = {d2_lo}");
        let d2_hi = d2_hat(0.5, 0.4, 0.8, 1.5, 1e8).unwrap();
        assert!(d2_hi.abs() < 1e-2);
    }

    #[test]
    fn laplace_laws_monotone_in_lambda() {
        let grid: Vec<f64> = (0..60).map(|i| 10f64.powf(-3.0 + i as f64 * 0.1)).collect();
        let mut prev = [f64::INFINITY; 4];
        for &lam in &grid {
            let vals = [
                d_hat(0.4, 0.8, lam),
                gamma_d_hat(0.6, 0.5, lam),
                d1_hat(0.5, 0.3, 0.75, lam).unwrap(),
                d3_hat(0.3, lam),
            ];
            for (i, v) in vals.iter().enumerate() {
                assert!(*v <= prev[i] + 1e-12, "law {i} at lambda={lam}");
                prev[i] = *v;
            }
        }
    }

    #[test]
    fn d1_theta_zero_degenerates_to_plain_kernel() {
        // At theta = 0 the kernel is int_0^1 (u lambda^g + 1)^(-rho) du.
        let (alpha, gamma, lam) = (0.3, 0.75, 2.0);
        let rho = alpha / gamma;
        let j = d1_kernel(0.0, alpha, gamma, lam).unwrap();
        let n = 2_000_000;
        let lam_g = lam.powf(gamma);
        let mut oracle = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            oracle += (u * lam_g + 1.0).powf(-rho) / n as f64;
        }
        assert!((j - oracle).abs() < 1e-8, "j={j} oracle={oracle}");
    }

    #[test]
    fn tauberian_slope_of_scaled_law() {
        // 1 - D-hat(lambda) ~ lambda^alpha as lambda -> 0.
        let (alpha, gamma) = (0.4, 0.8);
        let pts: Vec<(f64, f64)> = (0..=30)
            .map(|i| {
                let lam = 10f64.powf(-6.0 + i as f64 * 0.1);
                (lam, 1.0 - d_hat(alpha, gamma, lam))
            })
            .collect();
        let slope = log_log_slope(&pts);
        assert!((slope - alpha).abs() < 0.01, "slope = {slope}");
    }

    #[test]
    fn unavailable_constants_reported() {
        // Stationary evaluation against a divergent-Q engine must refuse.
        let e = engine(1.0, 0.5, 0.5);
        let regime = classify(&e).unwrap();
        assert_eq!(regime.limit_tag, LimitTag::ScaledGammaD);
        let stationary = LimitLaw {
            kind: LimitKind::Pgf,
            normalization: Normalization::None,
            atom_at_zero: 0.0,
            atom_at_infinity: 0.0,
            conditional_on_survival: true,
            form: LimitForm::StationaryPgf,
        };
        assert!(stationary.evaluate(&e, 0.5).is_err());
    }
}
