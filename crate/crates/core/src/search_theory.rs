//! Optimal-search machinery: the exponential detection function, detection
//! probability, the coverage budget equation for the optimal allocation
//! `max(ln p − α, 0)`, and the two mismatch fields the controllers descend.

use crate::domain::ScalarField;
use crate::{Error, Result};

/// Default support floor: cells at or below `1e-12 / cell_area` probability
/// mass are treated as empty (log-density −∞).
pub fn default_p_floor(cell_area: f64) -> f64 {
    1e-12 / cell_area
}

/// Conditional probability that a target co-located with coverage `c` has
/// been detected under locally random search: `1 − e^{−c}`.
pub fn detection_function(c: f64) -> Result<f64> {
    if c < 0.0 {
        return Err(Error::NumericDomain(format!(
            "detection function needs nonnegative coverage, got {c}"
        )));
    }
    Ok(1.0 - (-c).exp())
}

/// Probability of detection by now: `∫ p · F(c_σ) dx` by midpoint quadrature.
pub fn detection_probability(p: &ScalarField, c_sigma: &ScalarField) -> Result<f64> {
    p.check_same_grid(c_sigma, "detection probability")?;
    check_normalized(p)?;
    let mut acc = 0.0;
    for (pv, cv) in p.values().iter().zip(c_sigma.values()) {
        acc += pv * detection_function(cv.max(0.0))?;
    }
    Ok(acc * p.cell_area())
}

fn check_normalized(p: &ScalarField) -> Result<()> {
    let total = p.integrate();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::config(format!(
            "probability field must integrate to 1, got {total}"
        )));
    }
    Ok(())
}

/// The optimal coverage allocation for a budget of agent-hours.
#[derive(Clone, Debug)]
pub struct KoopmanPlan {
    /// Log-density threshold.
    pub alpha: f64,
    /// `max(ln p − α, 0)` on the support of `p`.
    pub c_opt: ScalarField,
    /// The requested budget (agent-hours).
    pub budget: f64,
}

/// Solves the budget equation `∫ max(ln p − α, 0) dx = budget` for `α` by
/// bisection, excluding cells with `p ≤ p_floor` from the support.
///
/// `budget = 0` yields the valid degenerate plan `α = max ln p`, `c_opt ≡ 0`.
pub fn solve_alpha(p: &ScalarField, budget: f64, p_floor: Option<f64>) -> Result<KoopmanPlan> {
    if budget < 0.0 {
        return Err(Error::config("coverage budget must be nonnegative"));
    }
    check_normalized(p)?;
    let floor = p_floor.unwrap_or_else(|| default_p_floor(p.cell_area()));
    let cell_area = p.cell_area();

    let log_p: Vec<f64> = p
        .values()
        .iter()
        .map(|&v| if v > floor { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let max_log = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_log == f64::NEG_INFINITY {
        return Err(Error::Degenerate(
            "probability field has no support above the floor".into(),
        ));
    }

    let spent = |alpha: f64| -> f64 {
        log_p
            .iter()
            .map(|&lp| (lp - alpha).max(0.0))
            .filter(|v| v.is_finite())
            .sum::<f64>()
            * cell_area
    };

    let tol = 1e-6 * budget.max(1.0);
    let alpha = if budget == 0.0 {
        max_log
    } else {
        let mut hi = max_log;
        let mut lo = floor.ln().min(max_log - 1.0);
        // extend the bracket for budgets beyond the floor cut
        let mut guard = 0;
        while spent(lo) < budget {
            lo -= 2.0 * (hi - lo).max(1.0);
            guard += 1;
            if guard > 64 {
                return Err(Error::Solver(format!(
                    "alpha bracket expansion failed for budget {budget}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spent(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let mut c_opt = ScalarField::zeros(p.domain, p.nx, p.ny)?;
    for (dst, &lp) in c_opt.values_mut().iter_mut().zip(&log_p) {
        let v = (lp - alpha).max(0.0);
        *dst = if v.is_finite() { v } else { 0.0 };
    }
    let residual = (c_opt.integrate() - budget).abs();
    if residual > tol {
        return Err(Error::Solver(format!(
            "alpha solver residual {residual} exceeds tolerance {tol}"
        )));
    }
    Ok(KoopmanPlan {
        alpha,
        c_opt,
        budget,
    })
}

/// Which mismatch law produced a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MismatchVariant {
    /// `max(ln p − α − c_σ, 0)`: the Koopman shortfall, zero over-searched.
    Mdsmc,
    /// `p − c/(Nt)`: plain density-minus-normalized-coverage; may be negative.
    Dsmc,
}

/// A mismatch field tagged with the law that produced it.
#[derive(Clone, Debug)]
pub struct MismatchField {
    pub field: ScalarField,
    pub variant: MismatchVariant,
}

/// Koopman mismatch `s_σ = max(ln p − α − c_σ, 0)`; cells with
/// `p ≤ p_floor` are zero.
pub fn mismatch_mdsmc(
    p: &ScalarField,
    alpha: f64,
    c_sigma: &ScalarField,
    p_floor: Option<f64>,
) -> Result<MismatchField> {
    p.check_same_grid(c_sigma, "mdsmc mismatch")?;
    let floor = p_floor.unwrap_or_else(|| default_p_floor(p.cell_area()));
    let mut field = ScalarField::zeros(p.domain, p.nx, p.ny)?;
    for ((dst, &pv), &cv) in field
        .values_mut()
        .iter_mut()
        .zip(p.values())
        .zip(c_sigma.values())
    {
        *dst = if pv > floor {
            (pv.ln() - alpha - cv).max(0.0)
        } else {
            0.0
        };
    }
    Ok(MismatchField {
        field,
        variant: MismatchVariant::Mdsmc,
    })
}

/// DSMC mismatch `s = p − c/(N·t)`; `t = 0` (no search yet) gives `s = p`.
pub fn mismatch_dsmc(
    p: &ScalarField,
    coverage: &ScalarField,
    n_agents: usize,
    t_hours: f64,
) -> Result<MismatchField> {
    p.check_same_grid(coverage, "dsmc mismatch")?;
    let mut field = p.clone();
    if t_hours > 0.0 && n_agents > 0 {
        let norm = 1.0 / (n_agents as f64 * t_hours);
        for (dst, &cv) in field.values_mut().iter_mut().zip(coverage.values()) {
            *dst -= cv * norm;
        }
    }
    Ok(MismatchField {
        field,
        variant: MismatchVariant::Dsmc,
    })
}
