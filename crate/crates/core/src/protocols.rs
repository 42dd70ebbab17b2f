//! Coupling-profile generators and transfer-time calculators for the three
//! state-transfer schemes, plus the transfer-time compatibility check.

use std::f64::consts::PI;

use crate::error::{Error, Result, Warning};
use crate::model::{ArrayConfig, CellParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Pst,
    Eigenmode,
    Tunneling,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Pst => "pst",
            Scheme::Eigenmode => "eigenmode",
            Scheme::Tunneling => "tunneling",
        }
    }
}

/// Result of [`check_time_compatibility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCompatibility {
    pub ok: bool,
    /// max(τ_A, τ_B) / min(τ_A, τ_B).
    pub ratio: f64,
    /// Nearest odd integer to the ratio.
    pub nearest_odd: u64,
}

/// An engineered hopping profile with the transfer times of the two
/// polariton chains.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlan {
    pub scheme: Scheme,
    /// Physical optical hops J₁..J_{N−1} (rad/s).
    pub hops: Vec<f64>,
    /// Â-chain transfer time (s).
    pub tau_a: f64,
    /// B̂-chain transfer time (s).
    pub tau_b: f64,
    /// Mechanical detuning +δ to apply to the endpoint cells
    /// (tunneling scheme only).
    pub endpoint_detuning: Option<f64>,
    pub compatibility: TimeCompatibility,
    pub warnings: Vec<Warning>,
}

impl TransferPlan {
    /// Common transfer time (τ_A here; equal to τ_B for all built-in schemes).
    pub fn tau(&self) -> f64 {
        self.tau_a
    }

    fn assemble(
        scheme: Scheme,
        hops: Vec<f64>,
        tau_a: f64,
        tau_b: f64,
        endpoint_detuning: Option<f64>,
        warnings: Vec<Warning>,
    ) -> Self {
        let compatibility = check_time_compatibility(tau_a, tau_b, 1e-9);
        TransferPlan {
            scheme,
            hops,
            tau_a,
            tau_b,
            endpoint_detuning,
            compatibility,
            warnings,
        }
    }
}

/// Mirror-symmetric profile Jₙ = (J/√2)√(n(N−n)).
///
/// Both polariton chains then carry Christandl couplings
/// (J/(2√2))√(n(N−n)), i.e. effective rate J/√2, so the mirror transfer
/// completes at τ = √2·π/J (exact for the decoupled chains; the full model
/// adds O((J/G)²) leakage).
pub fn pst_profile(n: usize, j: f64) -> Result<TransferPlan> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "pst profile needs N >= 2, got {n}"
        )));
    }
    if !(j > 0.0) {
        return Err(Error::InvalidParams(format!(
            "pst profile needs J > 0, got {j}"
        )));
    }
    let hops: Vec<f64> = (1..n)
        .map(|k| (j / 2f64.sqrt()) * ((k * (n - k)) as f64).sqrt())
        .collect();
    let tau = 2f64.sqrt() * PI / j;
    Ok(TransferPlan::assemble(Scheme::Pst, hops, tau, tau, None, Vec::new()))
}

pub const DEFAULT_SEPARATION_MARGIN: f64 = 10.0;

/// Eigenmode-mediated profile: end bonds λ, interior bonds J, N odd.
/// τ = (π/λ)√(2(N+1)).
pub fn eigenmode_profile(n: usize, lambda: f64, j: f64) -> Result<TransferPlan> {
    eigenmode_profile_with_margin(n, lambda, j, DEFAULT_SEPARATION_MARGIN)
}

pub fn eigenmode_profile_with_margin(
    n: usize,
    lambda: f64,
    j: f64,
    margin: f64,
) -> Result<TransferPlan> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidParams(format!(
            "eigenmode profile needs odd N >= 3, got {n}"
        )));
    }
    if !(lambda > 0.0) || !(j > 0.0) {
        return Err(Error::InvalidParams(
            "eigenmode profile needs lambda > 0 and J > 0".into(),
        ));
    }
    let mut warnings = Vec::new();
    if lambda > j / margin {
        warnings.push(Warning::MarginViolated {
            what: "eigenmode scheme needs lambda << J; lambda".into(),
            value: lambda,
            limit: j / margin,
        });
    }
    let mut hops = vec![j; n - 1];
    hops[0] = lambda;
    hops[n - 2] = lambda;
    let tau = (PI / lambda) * (2.0 * (n as f64 + 1.0)).sqrt();
    Ok(TransferPlan::assemble(
        Scheme::Eigenmode,
        hops,
        tau,
        tau,
        None,
        warnings,
    ))
}

/// Tunneling-like profile: end bonds λ, interior bonds J, endpoint
/// mechanical detuning +δ. τ = Nπδ/(2λ²).
pub fn tunneling_profile(n: usize, lambda: f64, delta: f64, j: f64) -> Result<TransferPlan> {
    tunneling_profile_with_margin(n, lambda, delta, j, DEFAULT_SEPARATION_MARGIN)
}

pub fn tunneling_profile_with_margin(
    n: usize,
    lambda: f64,
    delta: f64,
    j: f64,
    margin: f64,
) -> Result<TransferPlan> {
    if n < 3 {
        return Err(Error::InvalidParams(format!(
            "tunneling profile needs N >= 3, got {n}"
        )));
    }
    if !(lambda > 0.0) || !(j > 0.0) {
        return Err(Error::InvalidParams(
            "tunneling profile needs lambda > 0 and J > 0".into(),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!(
            "tunneling profile needs delta > 0, got {delta}"
        )));
    }
    let mut warnings = Vec::new();
    if lambda > delta / margin {
        warnings.push(Warning::MarginViolated {
            what: "tunneling scheme needs lambda << delta; lambda".into(),
            value: lambda,
            limit: delta / margin,
        });
    }
    if delta > j / margin {
        warnings.push(Warning::MarginViolated {
            what: "tunneling scheme needs delta << J; delta".into(),
            value: delta,
            limit: j / margin,
        });
    }
    let mut hops = vec![j; n - 1];
    hops[0] = lambda;
    hops[n - 2] = lambda;
    let tau = n as f64 * PI * delta / (2.0 * lambda * lambda);
    Ok(TransferPlan::assemble(
        Scheme::Tunneling,
        hops,
        tau,
        tau,
        Some(delta),
        warnings,
    ))
}

/// Array configuration realizing a plan: N copies of `cell` with the plan's
/// hops, plus the endpoint mechanical detuning when the plan carries one
/// (the pump detuning tracks −ω_m so red-sideband validation still holds).
pub fn apply_plan(
    cell: &CellParams,
    plan: &TransferPlan,
    model_kind: crate::model::ModelKind,
) -> Result<ArrayConfig> {
    let n = plan.hops.len() + 1;
    let mut cells = vec![cell.clone(); n];
    if let Some(delta) = plan.endpoint_detuning {
        for idx in [0, n - 1] {
            cells[idx].omega_m += delta;
            cells[idx].delta_p = -cells[idx].omega_m;
        }
    }
    ArrayConfig::new(cells, plan.hops.clone(), model_kind)
}

/// The two chains interfere constructively at the receiver only when the
/// transfer times are equal or odd multiples of each other.
pub fn check_time_compatibility(tau_a: f64, tau_b: f64, rel_tol: f64) -> TimeCompatibility {
    assert!(tau_a > 0.0 && tau_b > 0.0, "transfer times must be positive");
    let ratio = tau_a.max(tau_b) / tau_a.min(tau_b);
    let k = {
        let rounded = 2.0 * ((ratio - 1.0) / 2.0).round() + 1.0;
        if rounded < 1.0 {
            1
        } else {
            rounded as u64
        }
    };
    TimeCompatibility {
        ok: (ratio - k as f64).abs() <= rel_tol * k as f64,
        ratio,
        nearest_odd: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn pst_profile_values_n4() {
        let plan = pst_profile(4, 1.0).unwrap();
        assert_relative_eq!(plan.hops[0], 1.224744871391589, epsilon = 1e-12);
        assert_relative_eq!(plan.hops[1], 1.414213562373095, epsilon = 1e-12);
        assert_relative_eq!(plan.hops[2], 1.224744871391589, epsilon = 1e-12);
        assert_relative_eq!(plan.tau(), 2f64.sqrt() * PI, epsilon = 1e-14);
        assert!(plan.compatibility.ok);
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn pst_profile_single_bond() {
        let plan = pst_profile(2, 1.0).unwrap();
        assert_eq!(plan.hops.len(), 1);
        assert_relative_eq!(plan.hops[0], 0.7071067811865476, epsilon = 1e-14);
    }

    #[test]
    fn pst_profile_mirror_symmetry_exact() {
        for n in 2..=50 {
            let plan = pst_profile(n, 0.37).unwrap();
            for k in 0..plan.hops.len() {
                assert_eq!(plan.hops[k], plan.hops[plan.hops.len() - 1 - k], "N = {n}");
            }
        }
    }

    #[test]
    fn pst_profile_midpoint_value_even_n() {
        // formula value at the midpoint bond of an even-N chain:
        // (J/sqrt2) * (N/2); N=8, J=1 -> 4/sqrt2 = 2.828...
        let plan = pst_profile(8, 1.0).unwrap();
        assert_relative_eq!(plan.hops[3], 8.0 / 2.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn pst_errors() {
        assert!(pst_profile(1, 1.0).is_err());
        assert!(pst_profile(4, 0.0).is_err());
    }

    #[test]
    fn pst_tau_rescales_inversely_with_j() {
        let p1 = pst_profile(6, 1.0).unwrap();
        let p3 = pst_profile(6, 3.0).unwrap();
        assert_relative_eq!(p1.tau() / 3.0, p3.tau(), epsilon = 1e-14);
        for (a, b) in p1.hops.iter().zip(&p3.hops) {
            assert_relative_eq!(a * 3.0, *b, epsilon = 1e-12);
        }
        assert!(p1.tau() > 0.0 && p3.tau() > 0.0);
    }

    #[test]
    fn eigenmode_profile_n5() {
        let plan = eigenmode_profile(5, 0.01, 1.0).unwrap();
        assert_eq!(plan.hops, vec![0.01, 1.0, 1.0, 0.01]);
        assert_relative_eq!(plan.tau(), (PI / 0.01) * 12f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(plan.tau(), 1088.2796185405307, epsilon = 1e-9);
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn eigenmode_profile_n3_and_margin() {
        let plan = eigenmode_profile(3, 0.05, 1.0).unwrap();
        assert_relative_eq!(plan.tau(), (PI / 0.05) * 8f64.sqrt(), epsilon = 1e-10);
        // margin violation is a warning, not a failure
        let loose = eigenmode_profile(3, 0.5, 1.0).unwrap();
        assert_eq!(loose.warnings.len(), 1);
    }

    #[test]
    fn eigenmode_rejects_even_n() {
        assert!(matches!(
            eigenmode_profile(4, 0.01, 1.0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn tunneling_profile_values() {
        let plan = tunneling_profile(4, 0.01, 0.1, 1.0).unwrap();
        assert_relative_eq!(plan.tau(), 2.0e3 * PI, epsilon = 1e-9);
        assert_eq!(plan.endpoint_detuning, Some(0.1));
        assert_eq!(plan.hops, vec![0.01, 1.0, 0.01]);
        // mirror symmetry
        let p6 = tunneling_profile(6, 0.001, 0.01, 1.0).unwrap();
        for k in 0..p6.hops.len() {
            assert_eq!(p6.hops[k], p6.hops[p6.hops.len() - 1 - k]);
        }
    }

    #[test]
    fn tunneling_zero_delta_fails() {
        assert!(tunneling_profile(4, 0.01, 0.0, 1.0).is_err());
    }

    #[test]
    fn tunneling_margin_warnings() {
        let plan = tunneling_profile(4, 0.05, 0.1, 1.0).unwrap();
        assert_eq!(plan.warnings.len(), 1); // lambda !<< delta
        let plan = tunneling_profile(4, 0.06, 0.5, 1.0).unwrap();
        assert_eq!(plan.warnings.len(), 2); // both margins
    }

    #[test]
    fn apply_plan_detunes_endpoints() {
        use crate::model::ModelKind;
        let cell = CellParams::new(1.0, -1.0, 0.05).unwrap();
        let plan = tunneling_profile(4, 0.001, 0.01, 1.0).unwrap();
        let cfg = apply_plan(&cell, &plan, ModelKind::RedSideband).unwrap();
        assert_relative_eq!(cfg.cells[0].omega_m, 1.01, epsilon = 1e-14);
        assert_relative_eq!(cfg.cells[3].omega_m, 1.01, epsilon = 1e-14);
        assert_relative_eq!(cfg.cells[1].omega_m, 1.0, epsilon = 1e-14);
        assert_eq!(cfg.hops, plan.hops);
        // pst plan leaves cells untouched
        let pst = pst_profile(4, 1.0).unwrap();
        let cfg = apply_plan(&cell, &pst, ModelKind::RedSideband).unwrap();
        assert!(cfg.cells.iter().all(|c| c.omega_m == 1.0));
    }

    #[test]
    fn time_compatibility() {
        let c = check_time_compatibility(PI, PI, 1e-9);
        assert!(c.ok);
        assert_relative_eq!(c.ratio, 1.0, epsilon = 1e-15);
        let c = check_time_compatibility(PI, 3.0 * PI, 1e-9);
        assert!(c.ok);
        assert_eq!(c.nearest_odd, 3);
        let c = check_time_compatibility(2.0 * PI, PI, 1e-9);
        assert!(!c.ok);
        assert_relative_eq!(c.ratio, 2.0, epsilon = 1e-15);
    }
}
