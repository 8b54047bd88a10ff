//! Bivariate linking copulas.
//!
//! Each family provides the cdf C(u,v), the density c(u,v), the h-function
//! h(u,v) = dC/dv (the conditional cdf of U given V = v), its left inverse in
//! the first argument, Kendall-tau conversions, and the parameter derivatives
//! needed by the analytic score. Arguments strictly inside (0,1) but closer
//! than 1e-10 to an endpoint are clamped to [1e-10, 1-1e-10] before
//! evaluation; all five families have boundary singularities and quadrature
//! nodes or discrete-margin cdf values can land arbitrarily close to 0 or 1.

mod clayton;
mod frank;
mod gaussian;
mod gumbel;
mod student;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Interior clamp applied to copula arguments before evaluation.
pub const UV_CLAMP: f64 = 1e-10;

/// Frank parameters below this magnitude use the independence limit branch.
const FRANK_INDEP_EPS: f64 = 1e-6;

#[inline]
pub(crate) fn clamp_uv(u: f64) -> f64 {
    u.clamp(UV_CLAMP, 1.0 - UV_CLAMP)
}

/// The supported copula kinds.
///
/// `Independence` is the no-dependence baseline (the GLM/GLMM analogue); the
/// five parametric families are the ones exercised in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaKind {
    Clayton,
    Frank,
    Gumbel,
    Gaussian,
    Student,
    Independence,
}

impl CopulaKind {
    pub fn name(self) -> &'static str {
        match self {
            CopulaKind::Clayton => "clayton",
            CopulaKind::Frank => "frank",
            CopulaKind::Gumbel => "gumbel",
            CopulaKind::Gaussian => "gaussian",
            CopulaKind::Student => "student",
            CopulaKind::Independence => "independence",
        }
    }
}

/// A copula family: the kind plus, for Student, the fixed degrees of freedom.
///
/// The degrees of freedom are set at construction and never estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaFamily {
    kind: CopulaKind,
    df: f64,
}

impl CopulaFamily {
    pub const DEFAULT_STUDENT_DF: f64 = 15.0;

    pub fn new(kind: CopulaKind) -> Self {
        CopulaFamily { kind, df: Self::DEFAULT_STUDENT_DF }
    }

    pub fn clayton() -> Self {
        Self::new(CopulaKind::Clayton)
    }

    pub fn frank() -> Self {
        Self::new(CopulaKind::Frank)
    }

    pub fn gumbel() -> Self {
        Self::new(CopulaKind::Gumbel)
    }

    pub fn gaussian() -> Self {
        Self::new(CopulaKind::Gaussian)
    }

    pub fn student(df: f64) -> Result<Self> {
        if !(df > 2.0) {
            return Err(Error::domain(format!("Student copula requires df > 2, got {df}")));
        }
        Ok(CopulaFamily { kind: CopulaKind::Student, df })
    }

    pub fn independence() -> Self {
        Self::new(CopulaKind::Independence)
    }

    /// Parse the lowercase family name used in configs and on the CLI.
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "clayton" => Ok(Self::clayton()),
            "frank" => Ok(Self::frank()),
            "gumbel" => Ok(Self::gumbel()),
            "gaussian" => Ok(Self::gaussian()),
            "student" => Self::student(Self::DEFAULT_STUDENT_DF),
            "independence" => Ok(Self::independence()),
            other => Err(Error::input(format!(
                "unknown copula family '{other}' (expected clayton, frank, gumbel, gaussian, student or independence)"
            ))),
        }
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Whether the family carries an estimable dependence parameter.
    pub fn has_parameter(&self) -> bool {
        self.kind != CopulaKind::Independence
    }

    /// Map a real linear predictor onto the family's parameter range.
    ///
    /// Clayton: 2 e^s, Gumbel: 1 + e^s, Frank: s, Gaussian/Student: tanh(s).
    pub fn param_from_predictor(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::domain(format!("non-finite copula predictor {s}")));
        }
        Ok(match self.kind {
            CopulaKind::Clayton => 2.0 * s.exp(),
            CopulaKind::Gumbel => 1.0 + s.exp(),
            CopulaKind::Frank => s,
            CopulaKind::Gaussian | CopulaKind::Student => {
                s.tanh().clamp(-(1.0 - UV_CLAMP), 1.0 - UV_CLAMP)
            }
            CopulaKind::Independence => 0.0,
        })
    }

    /// Inverse of [`Self::param_from_predictor`] on the interior of the range.
    pub fn predictor_from_param(&self, param: f64) -> Result<f64> {
        self.check_param(param)?;
        Ok(match self.kind {
            CopulaKind::Clayton => (param / 2.0).ln(),
            CopulaKind::Gumbel => (param - 1.0).ln(),
            CopulaKind::Frank => param,
            CopulaKind::Gaussian | CopulaKind::Student => param.atanh(),
            CopulaKind::Independence => 0.0,
        })
    }

    /// Derivative of the parameter with respect to the linear predictor,
    /// expressed as a function of the parameter value.
    pub fn dparam_dpredictor(&self, param: f64) -> f64 {
        match self.kind {
            CopulaKind::Clayton => param,
            CopulaKind::Gumbel => param - 1.0,
            CopulaKind::Frank => 1.0,
            CopulaKind::Gaussian | CopulaKind::Student => 1.0 - param * param,
            CopulaKind::Independence => 0.0,
        }
    }

    pub fn param_valid(&self, param: f64) -> bool {
        if !param.is_finite() {
            return false;
        }
        match self.kind {
            CopulaKind::Clayton => param > 0.0,
            CopulaKind::Gumbel => param >= 1.0,
            CopulaKind::Frank => param.abs() <= 300.0,
            CopulaKind::Gaussian | CopulaKind::Student => param.abs() < 1.0,
            CopulaKind::Independence => true,
        }
    }

    fn check_param(&self, param: f64) -> Result<()> {
        if self.param_valid(param) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "parameter {param} out of range for {} copula",
                self.name()
            )))
        }
    }

    /// Copula cdf C(u, v). Boundary arguments are handled exactly.
    pub fn cdf(&self, param: f64, u: f64, v: f64) -> Result<f64> {
        self.check_param(param)?;
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("cdf arguments ({u}, {v}) outside [0,1]")));
        }
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        let (u, v) = (clamp_uv(u), clamp_uv(v));
        Ok(match self.kind {
            CopulaKind::Clayton => clayton::cdf(param, u, v),
            CopulaKind::Frank => {
                if param.abs() < FRANK_INDEP_EPS {
                    u * v
                } else {
                    frank::cdf(param, u, v)
                }
            }
            CopulaKind::Gumbel => gumbel::cdf(param, u, v),
            CopulaKind::Gaussian => gaussian::cdf(param, u, v),
            CopulaKind::Student => student::cdf(param, self.df, u, v),
            CopulaKind::Independence => u * v,
        })
    }

    /// h-function h(u, v) = dC(u, v)/dv, the conditional cdf of U given V=v.
    pub fn hfunc(&self, param: f64, u: f64, v: f64) -> Result<f64> {
        self.check_param(param)?;
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("hfunc requires v in (0,1), got {v}")));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("hfunc requires u in [0,1], got {u}")));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(1.0);
        }
        let prep = self.prepare(param);
        let (uc, vc) = (prep.u_coord(u), prep.v_coord(v));
        Ok(prep.hfunc_c(uc, vc))
    }

    /// Left inverse of the h-function in its first argument:
    /// the smallest w with h(w, v) >= u (exact for the continuous families).
    pub fn hinv(&self, param: f64, w: f64, v: f64) -> Result<f64> {
        self.check_param(param)?;
        if !(w > 0.0 && w < 1.0) || !(v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("hinv requires w, v in (0,1), got ({w}, {v})")));
        }
        let v = clamp_uv(v);
        match self.kind {
            CopulaKind::Clayton => Ok(clayton::hinv(param, w, v)),
            CopulaKind::Frank => {
                if param.abs() < FRANK_INDEP_EPS {
                    Ok(w)
                } else {
                    Ok(frank::hinv(param, w, v))
                }
            }
            CopulaKind::Gaussian => Ok(gaussian::hinv(param, w, v)),
            CopulaKind::Student => Ok(student::hinv(param, self.df, w, v)),
            CopulaKind::Independence => Ok(w),
            CopulaKind::Gumbel => self.hinv_numeric(param, w, v),
        }
    }

    /// Copula density c(u, v).
    pub fn density(&self, param: f64, u: f64, v: f64) -> Result<f64> {
        Ok(self.log_density(param, u, v)?.exp())
    }

    /// log c(u, v); errors outside the open unit square.
    pub fn log_density(&self, param: f64, u: f64, v: f64) -> Result<f64> {
        self.check_param(param)?;
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("density requires u, v in (0,1), got ({u}, {v})")));
        }
        let prep = self.prepare(param);
        let (uc, vc) = (prep.u_coord(u), prep.v_coord(v));
        Ok(prep.log_density_c(uc, vc))
    }

    /// Kendall's tau as a function of the parameter.
    pub fn tau(&self, param: f64) -> Result<f64> {
        self.check_param(param)?;
        Ok(match self.kind {
            CopulaKind::Clayton => param / (param + 2.0),
            CopulaKind::Gumbel => 1.0 - 1.0 / param,
            CopulaKind::Gaussian | CopulaKind::Student => {
                2.0 * param.asin() / std::f64::consts::PI
            }
            CopulaKind::Frank => frank::tau(param),
            CopulaKind::Independence => 0.0,
        })
    }

    /// Inverse Kendall-tau map; errors when tau is unachievable for the family.
    pub fn tau_to_param(&self, tau: f64) -> Result<f64> {
        if !tau.is_finite() || tau.abs() >= 1.0 {
            return Err(Error::domain(format!("tau {tau} outside (-1, 1)")));
        }
        match self.kind {
            CopulaKind::Clayton => {
                if tau <= 0.0 {
                    Err(Error::domain(format!("Clayton copula requires tau in (0,1), got {tau}")))
                } else {
                    Ok(2.0 * tau / (1.0 - tau))
                }
            }
            CopulaKind::Gumbel => {
                if tau < 0.0 {
                    Err(Error::domain(format!("Gumbel copula requires tau in [0,1), got {tau}")))
                } else {
                    Ok(1.0 / (1.0 - tau))
                }
            }
            CopulaKind::Gaussian | CopulaKind::Student => {
                Ok((std::f64::consts::FRAC_PI_2 * tau).sin())
            }
            CopulaKind::Frank => frank::tau_to_param(tau),
            CopulaKind::Independence => {
                if tau == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::domain("independence copula has tau fixed at 0"))
                }
            }
        }
    }

    /// Safeguarded bisection with Newton polish for families without a
    /// closed-form h-inverse (Gumbel). The h-function is increasing in u with
    /// derivative c(u, v).
    fn hinv_numeric(&self, param: f64, w: f64, v: f64) -> Result<f64> {
        let prep = self.prepare(param);
        let vc = prep.v_coord(v);
        let h = |u: f64| prep.hfunc_c(prep.u_coord(u), vc);
        let mut lo = UV_CLAMP;
        let mut hi = 1.0 - UV_CLAMP;
        if h(lo) >= w {
            return Ok(lo);
        }
        if h(hi) <= w {
            return Ok(hi);
        }
        let mut u = w; // independence guess
        let tol = 1e-10;
        for _ in 0..200 {
            let hu = h(u);
            if hu > w {
                hi = u;
            } else {
                lo = u;
            }
            if hi - lo < tol {
                return Ok(0.5 * (lo + hi));
            }
            // Newton step using the copula density as the derivative.
            let deriv = prep.log_density_c(prep.u_coord(u), vc).exp();
            let mut next = if deriv > 1e-12 { u - (hu - w) / deriv } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() < tol {
                let residual = (h(next) - w).abs();
                if residual < 1e-8 {
                    return Ok(next);
                }
            }
            u = next;
        }
        let residual = (h(u) - w).abs();
        if residual < 1e-8 {
            Ok(u)
        } else {
            Err(Error::numeric(format!(
                "hinv root solve did not converge for {} copula (residual {residual:.3e})",
                self.name()
            )))
        }
    }

    /// Prepared evaluator used by the likelihood hot loop; transforms of the
    /// unit-scale arguments (normal or t scores) can be cached by the caller.
    pub(crate) fn prepare(&self, param: f64) -> PreparedCopula {
        PreparedCopula { kind: self.kind, param, df: self.df }
    }
}

/// Evaluation handle that works on pre-transformed coordinates.
///
/// For the Gaussian and Student families the "coordinate" of an argument is
/// its normal or t score; for the other families it is the argument itself
/// (after clamping). This lets the likelihood transform each observation and
/// each quadrature node once per parameter value.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedCopula {
    kind: CopulaKind,
    param: f64,
    df: f64,
}

impl PreparedCopula {
    pub fn u_coord(&self, u: f64) -> f64 {
        let u = clamp_uv(u);
        match self.kind {
            CopulaKind::Gaussian => crate::special::norm_quantile(u),
            CopulaKind::Student => crate::special::t_quantile(u, self.df),
            _ => u,
        }
    }

    pub fn v_coord(&self, v: f64) -> f64 {
        self.u_coord(v)
    }

    pub fn log_density_c(&self, uc: f64, vc: f64) -> f64 {
        match self.kind {
            CopulaKind::Clayton => clayton::log_density(self.param, uc, vc),
            CopulaKind::Frank => {
                if self.param.abs() < FRANK_INDEP_EPS {
                    0.0
                } else {
                    frank::log_density(self.param, uc, vc)
                }
            }
            CopulaKind::Gumbel => gumbel::log_density(self.param, uc, vc),
            CopulaKind::Gaussian => gaussian::log_density_xy(self.param, uc, vc),
            CopulaKind::Student => student::log_density_xy(self.param, self.df, uc, vc),
            CopulaKind::Independence => 0.0,
        }
    }

    pub fn hfunc_c(&self, uc: f64, vc: f64) -> f64 {
        let h = match self.kind {
            CopulaKind::Clayton => clayton::hfunc(self.param, uc, vc),
            CopulaKind::Frank => {
                if self.param.abs() < FRANK_INDEP_EPS {
                    uc
                } else {
                    frank::hfunc(self.param, uc, vc)
                }
            }
            CopulaKind::Gumbel => gumbel::hfunc(self.param, uc, vc),
            CopulaKind::Gaussian => gaussian::hfunc_xy(self.param, uc, vc),
            CopulaKind::Student => student::hfunc_xy(self.param, self.df, uc, vc),
            CopulaKind::Independence => uc,
        };
        h.clamp(0.0, 1.0)
    }

    /// d log c / du at the original (unit) scale.
    pub fn dlogc_du_c(&self, uc: f64, vc: f64) -> f64 {
        match self.kind {
            CopulaKind::Clayton => clayton::dlogc_du(self.param, uc, vc),
            CopulaKind::Frank => {
                if self.param.abs() < FRANK_INDEP_EPS {
                    // limit of the exact derivative as theta -> 0
                    -self.param * (1.0 - 2.0 * vc)
                } else {
                    frank::dlogc_du(self.param, uc, vc)
                }
            }
            CopulaKind::Gumbel => gumbel::dlogc_du(self.param, uc, vc),
            CopulaKind::Gaussian => gaussian::dlogc_du_xy(self.param, uc, vc),
            CopulaKind::Student => student::dlogc_du_xy(self.param, self.df, uc, vc),
            CopulaKind::Independence => 0.0,
        }
    }

    /// d log c / dparam.
    pub fn dlogc_dparam_c(&self, uc: f64, vc: f64) -> f64 {
        match self.kind {
            CopulaKind::Clayton => clayton::dlogc_dtheta(self.param, uc, vc),
            CopulaKind::Frank => {
                if self.param.abs() < FRANK_INDEP_EPS {
                    0.5 * (1.0 - 2.0 * uc) * (1.0 - 2.0 * vc)
                } else {
                    frank::dlogc_dtheta(self.param, uc, vc)
                }
            }
            CopulaKind::Gumbel => gumbel::dlogc_dtheta(self.param, uc, vc),
            CopulaKind::Gaussian => gaussian::dlogc_drho_xy(self.param, uc, vc),
            CopulaKind::Student => student::dlogc_drho_xy(self.param, self.df, uc, vc),
            CopulaKind::Independence => 0.0,
        }
    }

    /// dh(u, v)/dparam.
    pub fn dh_dparam_c(&self, uc: f64, vc: f64) -> f64 {
        match self.kind {
            CopulaKind::Clayton => clayton::dh_dtheta(self.param, uc, vc),
            CopulaKind::Frank => {
                if self.param.abs() < FRANK_INDEP_EPS {
                    0.5 * uc * (1.0 - uc) * (1.0 - 2.0 * vc)
                } else {
                    frank::dh_dtheta(self.param, uc, vc)
                }
            }
            CopulaKind::Gumbel => gumbel::dh_dtheta(self.param, uc, vc),
            CopulaKind::Gaussian => gaussian::dh_drho_xy(self.param, uc, vc),
            CopulaKind::Student => student::dh_drho_xy(self.param, self.df, uc, vc),
            CopulaKind::Independence => 0.0,
        }
    }

    /// Density on the unit scale (derivative of the h-function in u).
    pub fn density_c(&self, uc: f64, vc: f64) -> f64 {
        self.log_density_c(uc, vc).exp()
    }
}

/// Covariate link for the copula parameter: a linear predictor
/// `beta_1 + sum_j beta_{j+1} x_j` mapped through the family's range map.
#[derive(Debug, Clone)]
pub struct CopulaLink {
    pub family: CopulaFamily,
    /// Intercept followed by one coefficient per copula covariate.
    pub coefficients: Vec<f64>,
}

impl CopulaLink {
    pub fn new(family: CopulaFamily, coefficients: Vec<f64>) -> Self {
        CopulaLink { family, coefficients }
    }

    /// Linear predictor at covariate row `x` (without the intercept column).
    pub fn predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() + 1 != self.coefficients.len() {
            return Err(Error::dimension(format!(
                "copula link expects {} covariates, got {}",
                self.coefficients.len() - 1,
                x.len()
            )));
        }
        let mut s = self.coefficients[0];
        for (b, xi) in self.coefficients[1..].iter().zip(x) {
            s += b * xi;
        }
        Ok(s)
    }

    /// Copula parameter at covariate row `x`.
    pub fn param_at(&self, x: &[f64]) -> Result<f64> {
        self.family.param_from_predictor(self.predictor(x)?)
    }
}
