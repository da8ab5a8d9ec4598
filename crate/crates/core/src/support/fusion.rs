//! Variance-weighted plane fusion and traversability scoring.

use serde::{Deserialize, Serialize};

use super::{SupportError, SupportEstimate};
use crate::geom::PlaneEstimate;

/// Largest traversability assigned to a node; keeps `d / (1 - tau)` finite.
pub const TAU_MAX: f64 = 1.0 - 1e-6;

const AGREEMENT_TOL: f64 = 1e-6;

/// Weight on the proprioceptive value for one channel,
/// `var_ep / (var_ep + var_pro)`.
pub fn fusion_weight(var_pro: f64, var_ep: f64) -> f64 {
    if var_ep.is_infinite() {
        return if var_pro.is_infinite() { 0.5 } else { 1.0 };
    }
    if var_pro.is_infinite() {
        return 0.0;
    }
    var_ep / (var_ep + var_pro)
}

fn fuse_channel(pro: (f64, f64), ep: (f64, f64)) -> Result<(f64, f64), SupportError> {
    let ((vp, sp), (ve, se)) = (pro, ep);
    if sp == 0.0 && se == 0.0 {
        if (vp - ve).abs() > AGREEMENT_TOL {
            return Err(SupportError::DegenerateVariance);
        }
        return Ok((0.5 * (vp + ve), 0.0));
    }
    let w = fusion_weight(sp, se);
    let value = if w == 1.0 {
        vp
    } else if w == 0.0 {
        ve
    } else {
        w * vp + (1.0 - w) * ve
    };
    let var = if se.is_infinite() {
        sp
    } else if sp.is_infinite() {
        se
    } else {
        sp * se / (sp + se)
    };
    Ok((value, var))
}

/// Fuses the trajectory plane with the exteroceptive plane channel by
/// channel (z, roll, pitch). The fused variance is the inverse-variance
/// posterior of two independent estimates.
pub fn fuse(pro: &PlaneEstimate, ep: &PlaneEstimate) -> Result<PlaneEstimate, SupportError> {
    let (pc, ec) = (pro.channels(), ep.channels());
    let mut out = [(0.0, 0.0); 3];
    for i in 0..3 {
        out[i] = fuse_channel(pc[i], ec[i])?;
    }
    Ok(PlaneEstimate::with_channels(pro.x, pro.y, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraversabilityConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Maximum allowable slope (rad).
    pub s_crit: f64,
    /// Maximum allowable uncertainty.
    pub eps_crit: f64,
    /// Vegetation height above which a node is an obstacle (m).
    pub h_crit: f64,
    /// Weight of the attitude variances in the uncertainty term.
    pub mu: f64,
}

impl Default for TraversabilityConfig {
    fn default() -> Self {
        Self { alpha1: 0.4, alpha2: 0.3, alpha3: 0.3, s_crit: 0.35, eps_crit: 0.02, h_crit: 0.4, mu: 1.0 }
    }
}

impl TraversabilityConfig {
    pub fn validate(&self) -> Result<(), String> {
        let alphas = [self.alpha1, self.alpha2, self.alpha3];
        if alphas.iter().any(|a| !(*a >= 0.0)) || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("traversability weights must be non-negative and sum to 1: {alphas:?}"));
        }
        if !(self.s_crit > 0.0 && self.eps_crit > 0.0 && self.h_crit > 0.0) || !(self.mu >= 0.0) {
            return Err("critical values must be positive and mu non-negative".into());
        }
        Ok(())
    }

    /// Uncertainty `var_z + mu (var_roll + var_pitch)` of a plane.
    pub fn uncertainty(&self, p: &PlaneEstimate) -> f64 {
        p.var_z + self.mu * (p.var_roll + p.var_pitch)
    }

    /// Unclamped `alpha1 s/s_crit + alpha2 eps/eps_crit + alpha3 h/h_crit`.
    pub fn raw_score(&self, slope: f64, eps: f64, veg_height: f64) -> f64 {
        self.alpha1 * slope / self.s_crit + self.alpha2 * eps / self.eps_crit + self.alpha3 * veg_height / self.h_crit
    }
}

/// Traversability of an estimate, clamped to `[0, TAU_MAX]`.
pub fn traversability(est: &SupportEstimate, cfg: &TraversabilityConfig) -> f64 {
    let s = &est.s_plane;
    cfg.raw_score(s.slope(), cfg.uncertainty(s), est.veg_height).clamp(0.0, TAU_MAX)
}
