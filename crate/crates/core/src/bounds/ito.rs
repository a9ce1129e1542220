//! Lower bounds on level crossings of the exponentially reweighted L¹ mass
//! `M(t) = e^{-(T-t)α} ‖u(·,t)‖₁`, which is a martingale for the linear
//! system under Itô white noise.
//!
//! Optional stopping at the two-sided exit `{L J_0 e^{-Tα}, L J_2}` gives the
//! exact ruin probability `(J_1 - J_0)/(J_2 e^{Tα} - J_0)`; restraining the
//! exit to happen before T costs the quadratic-variation penalty
//! `(J_2 e^{Tα}/J_0 - J_1/J_0) · L/(√ζ_0 σ_I) · T^{-1/2}`, which can push the
//! bound negative (reported raw and clipped).

use crate::bounds::opt::maximize_over_time;
use crate::bounds::{BoundProvenance, BoundResult};
use crate::error::{domain, usage, Result};
use crate::grid::{norm_1, Field};

/// Level triple and model constants for the martingale bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoBoundQuery {
    pub j0: f64,
    pub j1: f64,
    pub j2: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub length: f64,
    pub sigma_i: f64,
    pub zeta0: f64,
}

impl ItoBoundQuery {
    /// Builds the query with `J_1 = ‖q_0‖₁ / L`.
    pub fn from_initial_field(
        q0: &Field,
        j0: f64,
        j2: f64,
        alpha: f64,
        horizon: f64,
        sigma_i: f64,
        zeta0: f64,
    ) -> Result<Self> {
        let length = q0.grid().length();
        let q = ItoBoundQuery {
            j0,
            j1: norm_1(q0) / length,
            j2,
            alpha,
            horizon,
            length,
            sigma_i,
            zeta0,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j0", self.j0),
            ("j1", self.j1),
            ("j2", self.j2),
            ("alpha", self.alpha),
            ("horizon", self.horizon),
            ("length", self.length),
            ("sigma_i", self.sigma_i),
            ("zeta0", self.zeta0),
        ] {
            if !v.is_finite() {
                return Err(domain(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.j0 > 0.0) {
            return Err(usage(format!("levels require J0 > 0, got {}", self.j0)));
        }
        if self.j0 > self.j1 || self.j1 > self.j2 {
            return Err(usage(format!(
                "levels must be ordered J0 ≤ J1 ≤ J2, got {} / {} / {}",
                self.j0, self.j1, self.j2
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(usage(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.length > 0.0) {
            return Err(usage(format!("length must be positive, got {}", self.length)));
        }
        if self.alpha < 0.0 {
            return Err(usage(format!("dissipation must be nonnegative, got {}", self.alpha)));
        }
        if self.sigma_i < 0.0 || self.zeta0 < 0.0 {
            return Err(usage("σ_I and ζ_0 must be nonnegative".to_string()));
        }
        Ok(())
    }

    fn ruin_at(&self, t: f64) -> f64 {
        (self.j1 - self.j0) / (self.j2 * (t * self.alpha).exp() - self.j0)
    }

    fn penalty_at(&self, t: f64) -> f64 {
        let growth = (self.j2 / self.j0) * (t * self.alpha).exp() - self.j1 / self.j0;
        growth * self.length / (self.zeta0.sqrt() * self.sigma_i) / t.sqrt()
    }
}

/// Exact exit probability `P(M(τ) = L J_2) = (J_1 - J_0)/(J_2 e^{Tα} - J_0)`.
pub fn gambler_ruin(query: &ItoBoundQuery) -> Result<f64> {
    query.validate()?;
    Ok(query.ruin_at(query.horizon))
}

/// Ruin probability minus the finite-horizon penalty; may be negative.
pub fn ito_restrained_bound(query: &ItoBoundQuery) -> Result<BoundResult> {
    query.validate()?;
    if !(query.sigma_i > 0.0) || !(query.zeta0 > 0.0) {
        return Err(usage("the restrained bound requires σ_I > 0 and ζ_0 > 0".to_string()));
    }
    let ruin = query.ruin_at(query.horizon);
    let penalty = query.penalty_at(query.horizon);
    let raw = ruin - penalty;
    Ok(BoundResult {
        raw,
        clipped: raw.clamp(0.0, 1.0),
        mean: ruin,
        stdev: penalty,
        phi_argument: f64::NAN,
        optimal_time: None,
        tail_estimate: 0.0,
        provenance: BoundProvenance::MartingaleRuinRestrained,
    })
}

/// Supremum of the restrained bound over horizons `t ∈ [t_min, T]`; the level
/// claim on the turbulence field needs `J_2 < 2`.
pub fn ito_sup_bound(query: &ItoBoundQuery, t_min: f64) -> Result<BoundResult> {
    query.validate()?;
    if !(query.sigma_i > 0.0) || !(query.zeta0 > 0.0) {
        return Err(usage("the restrained bound requires σ_I > 0 and ζ_0 > 0".to_string()));
    }
    if !(query.j2 < 2.0) {
        return Err(usage(format!(
            "the sup-norm level claim requires J2 < 2, got {}",
            query.j2
        )));
    }
    if !(t_min > 0.0) || t_min >= query.horizon {
        return Err(usage(format!(
            "need 0 < t_min < horizon, got t_min = {t_min}, horizon = {}",
            query.horizon
        )));
    }
    let objective = |t: f64| query.ruin_at(t) - query.penalty_at(t);
    let (t_star, raw) = maximize_over_time(objective, t_min, query.horizon, 512);
    Ok(BoundResult {
        raw,
        clipped: raw.clamp(0.0, 1.0),
        mean: query.ruin_at(t_star),
        stdev: query.penalty_at(t_star),
        phi_argument: f64::NAN,
        optimal_time: Some(t_star),
        tail_estimate: 0.0,
        provenance: BoundProvenance::MartingaleRuinSup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_query() -> ItoBoundQuery {
        ItoBoundQuery {
            j0: 0.25,
            j1: 0.5,
            j2: 1.0,
            alpha: 0.0,
            horizon: 1.0,
            length: 10.0,
            sigma_i: 0.5,
            zeta0: 1.0,
        }
    }

    #[test]
    fn classical_ruin_without_dissipation() {
        let q = base_query();
        assert!((gambler_ruin(&q).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ruin_vanishes_when_start_equals_lower_level() {
        let q = ItoBoundQuery { j1: 0.25, ..base_query() };
        assert_eq!(gambler_ruin(&q).unwrap(), 0.0);
    }

    #[test]
    fn ruin_with_dissipation() {
        let q = ItoBoundQuery { j0: 0.1, j1: 0.5, j2: 1.0, alpha: 1.0, ..base_query() };
        let expected = 0.4 / (std::f64::consts::E - 0.1); // 0.152773
        assert!((gambler_ruin(&q).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1527727).abs() < 1e-6);
    }

    #[test]
    fn ordering_violations_are_usage_errors() {
        assert!(gambler_ruin(&ItoBoundQuery { j0: 0.6, ..base_query() }).is_err());
        assert!(gambler_ruin(&ItoBoundQuery { j2: 0.4, ..base_query() }).is_err());
        assert!(gambler_ruin(&ItoBoundQuery { j0: -0.1, ..base_query() }).is_err());
    }

    #[test]
    fn restrained_bound_approaches_ruin_for_large_noise() {
        let q = ItoBoundQuery { sigma_i: 1e9, ..base_query() };
        let b = ito_restrained_bound(&q).unwrap();
        assert!((b.raw - gambler_ruin(&q).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn restrained_bound_blows_down_for_short_horizons() {
        let q = ItoBoundQuery { horizon: 1e-9, ..base_query() };
        let b = ito_restrained_bound(&q).unwrap();
        assert!(b.raw < -1e3);
        assert_eq!(b.clipped, 0.0);
    }

    #[test]
    fn sup_bound_matches_dense_scan_and_is_monotone_in_horizon() {
        // Parameters with an interior positive optimum.
        let q = ItoBoundQuery {
            j0: 0.45,
            j1: 0.5,
            j2: 0.55,
            alpha: 0.02,
            horizon: 50.0,
            length: 0.5,
            sigma_i: 4.0,
            zeta0: 1.0,
        };
        let sup = ito_sup_bound(&q, 0.01).unwrap();
        let objective = |t: f64| {
            (q.j1 - q.j0) / (q.j2 * (t * q.alpha).exp() - q.j0)
                - ((q.j2 / q.j0) * (t * q.alpha).exp() - q.j1 / q.j0) * q.length
                    / (q.zeta0.sqrt() * q.sigma_i)
                    / t.sqrt()
        };
        let mut best_t = 0.01;
        let mut best = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let t = 0.01 + (50.0 - 0.01) * i as f64 / 9_999.0;
            if objective(t) > best {
                best = objective(t);
                best_t = t;
            }
        }
        assert!(sup.raw >= best - 1e-12);
        assert!((sup.optimal_time.unwrap() - best_t).abs() < 2.0 * (50.0 - 0.01) / 9_999.0);
        assert!(sup.raw > 0.0, "interior optimum should be positive here");
        // Larger horizon: supremum over a superset can only grow.
        let shorter = ito_sup_bound(&ItoBoundQuery { horizon: 5.0, ..q }, 0.01).unwrap();
        assert!(sup.raw >= shorter.raw - 1e-12);
        // Once the horizon passes the argmax the value stabilises.
        let longer = ito_sup_bound(&ItoBoundQuery { horizon: 80.0, ..q }, 0.01).unwrap();
        assert!((longer.raw - sup.raw).abs() < 1e-9);
    }

    #[test]
    fn sup_bound_clips_to_zero_when_always_negative() {
        let q = ItoBoundQuery { horizon: 0.1, j2: 1.25, ..base_query() };
        let b = ito_sup_bound(&q, 0.01).unwrap();
        assert!(b.raw < 0.0);
        assert_eq!(b.clipped, 0.0);
    }

    #[test]
    fn sup_bound_enforces_level_cap() {
        let q = ItoBoundQuery { j2: 2.5, ..base_query() };
        assert!(ito_sup_bound(&q, 0.01).is_err());
    }
}
