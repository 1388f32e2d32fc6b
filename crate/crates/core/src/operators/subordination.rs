use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::multiplier::{apply_symbol, check_group, check_mean};
use crate::dilation::DilationGroup;
use crate::error::{invalid_param, Result};
use crate::field::{SampledField, SpectralField};

fn check_unit_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid_param(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

/// `W_alpha(t, s) = (t^alpha - (t - min(t, s))^alpha) / alpha`.
pub fn w_alpha(alpha: f64, t: f64, s: f64) -> Result<f64> {
    check_unit_alpha(alpha)?;
    if !(t >= 0.0 && s >= 0.0) {
        return Err(invalid_param(format!(
            "t = {t} and s = {s} must be nonnegative"
        )));
    }
    if s >= t {
        return Ok(t.powf(alpha) / alpha);
    }
    // t^a (1 - (1 - s/t)^a) without the cancellation for s << t
    Ok((-t.powf(alpha) * (alpha * (-s / t).ln_1p()).exp_m1() / alpha).max(0.0))
}

/// Nodes `s_m = s_lo * ratio^m` of the trapezoid rule in `ln s`, chosen from
/// the band limits of the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinationQuadrature {
    pub alpha: f64,
    pub ratio: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub nodes: usize,
    pub band: (f64, f64),
    /// Bound on the relative mass dropped below `s_lo` plus above `s_hi`.
    pub tail_bound: f64,
}

pub const SUBORDINATION_RATIO: f64 = 1.189_207_115_002_721; // 2^{1/4}
const TAIL_TARGET: f64 = 1e-12;

/// Smallest and largest `rho` carrying spectral mass above `1e-14` of the peak.
pub(crate) fn band_limits(spec: &SpectralField, rho: &[f64]) -> Option<(f64, f64)> {
    let peak = spec
        .coefficients()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (c, &r) in spec.coefficients().iter().zip(rho) {
        if r > 0.0 && c.norm() > 1e-14 * peak {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (hi > 0.0).then_some((lo, hi))
}

impl SubordinationQuadrature {
    pub fn plan(alpha: f64, band: (f64, f64)) -> Result<Self> {
        check_unit_alpha(alpha)?;
        let (lo, hi) = band;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid_param(format!("invalid band [{lo}, {hi}]")));
        }
        // int_0^{s_lo} s^{a-1} e^{-cs} ds / int_0^inf <= (c s_lo)^a / Gamma(1+a)
        let g1 = gamma(1.0 + alpha);
        let s_lo = (TAIL_TARGET * g1).powf(1.0 / alpha) / (2.0 * PI * hi);
        // above s_hi the integrand is below e^{-c s}, tail under Gamma(a, c s_hi)
        let c_lo = 2.0 * PI * lo;
        let mut s_hi = 1.0 / c_lo;
        while upper_tail(alpha, c_lo * s_hi) > TAIL_TARGET {
            s_hi *= 2.0;
        }
        let nodes = ((s_hi / s_lo).ln() / SUBORDINATION_RATIO.ln()).ceil() as usize + 1;
        let tail_bound = (2.0 * PI * hi * s_lo).powf(alpha) / g1 + upper_tail(alpha, c_lo * s_hi);
        Ok(Self {
            alpha,
            ratio: SUBORDINATION_RATIO,
            s_lo,
            s_hi,
            nodes,
            band,
            tail_bound,
        })
    }

    /// `Gamma(alpha)^{-1} sum_m s_m^alpha e^{-2 pi (t + s_m) r} ln(ratio)`.
    pub fn symbol(&self, t: f64, r: f64) -> f64 {
        let h = self.ratio.ln();
        let c = 2.0 * PI * r;
        let mut sum = 0.0;
        let mut s = self.s_lo;
        for _ in 0..self.nodes {
            let e = c * s;
            if e > 745.0 {
                break;
            }
            sum += s.powf(self.alpha) * (-e).exp();
            s *= self.ratio;
        }
        sum * h * (-c * t).exp() / gamma(self.alpha)
    }
}

// relative mass of int_x^inf u^{a-1} e^{-u} du
fn upper_tail(alpha: f64, x: f64) -> f64 {
    // for a < 1, u^{a-1} <= x^{a-1} on [x, inf)
    x.powf(alpha - 1.0) * (-x).exp() / gamma(alpha)
}

/// `Gamma(alpha)^{-1} int_0^inf K_{t+s} * f s^{alpha-1} ds` by the log-spaced
/// trapezoid rule. Should agree with `K_t * I_alpha f`.
pub fn subordination(
    f: &SampledField,
    alpha: f64,
    t: f64,
    group: &DilationGroup,
) -> Result<SampledField> {
    Ok(subordination_with_plan(f, alpha, t, group)?.0)
}

/// [`subordination`] also returning the quadrature that was used.
pub fn subordination_with_plan(
    f: &SampledField,
    alpha: f64,
    t: f64,
    group: &DilationGroup,
) -> Result<(SampledField, Option<SubordinationQuadrature>)> {
    check_group(group, f.grid())?;
    check_unit_alpha(alpha)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid_param(format!("t = {t} must be positive")));
    }
    let spec = f.forward();
    check_mean(&spec, f.lp_norm(2.0)?)?;
    let rho = group.rho_spectrum(f.grid());
    let Some(band) = band_limits(&spec, &rho) else {
        return Ok((SampledField::zeros(f.grid().clone()), None));
    };
    let quad = SubordinationQuadrature::plan(alpha, band)?;
    let out = apply_symbol(&spec, &rho, |_, r| {
        Complex64::new(if r > 0.0 { quad.symbol(t, r) } else { 0.0 }, 0.0)
    });
    Ok((out, Some(quad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_band_limited;
    use crate::grid::GridSpec;
    use crate::operators::{poisson_semigroup, riesz_potential};
    use approx::assert_relative_eq;
    use gauss_quad::GaussLegendre;

    #[test]
    fn w_alpha_examples() {
        assert_relative_eq!(
            w_alpha(0.5, 4.0, 1.0).unwrap(),
            2.0 * (2.0 - 3f64.sqrt()),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            w_alpha(0.3, 2.0, 5.0).unwrap(),
            2f64.powf(0.3) / 0.3,
            epsilon = 1e-14
        );
        assert_eq!(w_alpha(0.7, 3.0, 0.0).unwrap(), 0.0);
        assert!(w_alpha(1.0, 1.0, 1.0).is_err());
        assert!(w_alpha(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn w_alpha_matches_defining_integral() {
        // substitute v = (t - u)^alpha to remove the endpoint singularity
        let gl = GaussLegendre::new(20.try_into().unwrap());
        for &(a, t, s) in &[(0.5, 4.0, 1.0), (0.3, 1.0, 0.4), (0.7, 2.5, 2.5)] {
            let m: f64 = f64::min(t, s);
            let v_lo: f64 = (t - m).powf(a);
            let v_hi: f64 = t.powf(a);
            let direct = gl.integrate(v_lo, v_hi, |_| 1.0 / a);
            assert_relative_eq!(w_alpha(a, t, s).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn symbol_matches_gamma_identity() {
        for &a in &[0.3, 0.5, 0.7] {
            let q = SubordinationQuadrature::plan(a, (0.5, 4.0)).unwrap();
            for &r in &[0.5, 1.3, 4.0] {
                for &t in &[0.5, 1.0, 2.0] {
                    let want = (2.0 * PI * r).powf(-a) * (-2.0 * PI * t * r).exp();
                    assert_relative_eq!(q.symbol(t, r), want, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn agrees_with_semigroup_of_potential() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let f = make_band_limited(&grid, &g, 11).unwrap();
        let a = 0.5;
        let t = 1.0;
        let direct = poisson_semigroup(&riesz_potential(&f, a, &g).unwrap(), t, &g).unwrap();
        let sub = subordination(&f, a, t, &g).unwrap();
        let err = sub.sub(&direct).unwrap().lp_norm(2.0).unwrap();
        assert!(err < 1e-8 * direct.lp_norm(2.0).unwrap());
        let far = subordination(&f, a, 30.0 / (2.0 * PI), &g).unwrap();
        assert!(far.max_abs() < 1e-10);
    }
}
