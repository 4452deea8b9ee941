//! Pauli-Villars mass/coefficient schemes and the averaged ultraviolet
//! cutoff.
//!
//! A scheme is the triple `(m₀, m₁, m₂)` of the physical mass and two
//! auxiliary regulator masses with coefficients `(1, c₁, c₂)` chosen so that
//!
//! ```text
//! Σⱼ cⱼ = 0   and   Σⱼ cⱼ mⱼ² = 0.
//! ```
//!
//! These two conditions make every `j`-summed momentum integrand in the
//! crate absolutely integrable: individual species diverge, their weighted
//! combination does not. The effective momentum scale of the regulator is
//! the averaged cutoff `Λ`, `log Λ² = −Σⱼ cⱼ log mⱼ²`.

use crate::fmt_g17;
use thiserror::Error;

/// An immutable, validated Pauli-Villars scheme. Construct through
/// [`scheme_from_masses`] or [`scheme_from_cutoff`]; the constructors
/// enforce every invariant so downstream code can rely on the sum rules.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliVillarsScheme {
    masses: [f64; 3],
    coefficients: [f64; 3],
    cutoff: f64,
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("masses must satisfy 0 < m0 < m1 < m2, got ({m0}, {m1}, {m2})")]
    NonOrderedMasses { m0: f64, m1: f64, m2: f64 },
    #[error("degenerate scheme: m1 = m2 = {m} makes the coefficients singular")]
    Degenerate { m: f64 },
    #[error(
        "no mass m1 yields cutoff {target} at ratio {ratio} (minimum attainable {attainable_min})"
    )]
    InfeasibleCutoff {
        target: f64,
        ratio: f64,
        attainable_min: f64,
    },
    #[error("cutoff root-finder failed to converge after {iterations} iterations")]
    NonConvergent { iterations: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl PauliVillarsScheme {
    pub fn masses(&self) -> [f64; 3] {
        self.masses
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.coefficients
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `Σⱼ |cⱼ|/mⱼ`, the prefactor of the `‖F‖⁴` remainder bound.
    pub fn abs_coeff_over_mass(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.masses.iter())
            .map(|(c, m)| c.abs() / m)
            .sum()
    }

    /// `Σⱼ |cⱼ|/mⱼ²`, the prefactor of the `‖F‖⁶` remainder bound.
    pub fn abs_coeff_over_mass_sq(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.masses.iter())
            .map(|(c, m)| c.abs() / (m * m))
            .sum()
    }

    /// JSON document with 17-significant-digit numbers (lossless binary64).
    pub fn to_json(&self) -> String {
        format!(
            "{{\"m\": [{}, {}, {}], \"c\": [{}, {}, {}], \"cutoff\": {}}}",
            fmt_g17(self.masses[0]),
            fmt_g17(self.masses[1]),
            fmt_g17(self.masses[2]),
            fmt_g17(self.coefficients[0]),
            fmt_g17(self.coefficients[1]),
            fmt_g17(self.coefficients[2]),
            fmt_g17(self.cutoff),
        )
    }

    /// Parses the JSON produced by [`PauliVillarsScheme::to_json`],
    /// revalidating through [`scheme_from_masses`].
    pub fn from_json(text: &str) -> Result<Self, SchemeError> {
        #[derive(serde::Deserialize)]
        struct Doc {
            m: [f64; 3],
        }
        let doc: Doc = serde_json::from_str(text)
            .map_err(|e| SchemeError::InvalidParameter(format!("scheme JSON: {e}")))?;
        scheme_from_masses(doc.m[0], doc.m[1], doc.m[2])
    }
}

/// Builds the scheme from its three masses via the closed forms
/// `c₁ = (m₀²−m₂²)/(m₂²−m₁²)` and `c₂ = (m₁²−m₀²)/(m₂²−m₁²)`, which solve
/// the two Pauli-Villars sum rules exactly, then evaluates the averaged
/// cutoff.
pub fn scheme_from_masses(m0: f64, m1: f64, m2: f64) -> Result<PauliVillarsScheme, SchemeError> {
    if !(m0 > 0.0 && m1 > 0.0 && m2 > 0.0 && m0.is_finite() && m1.is_finite() && m2.is_finite()) {
        return Err(SchemeError::NonOrderedMasses { m0, m1, m2 });
    }
    if m1 == m2 {
        return Err(SchemeError::Degenerate { m: m1 });
    }
    if !(m0 < m1 && m1 < m2) {
        return Err(SchemeError::NonOrderedMasses { m0, m1, m2 });
    }
    let (s0, s1, s2) = (m0 * m0, m1 * m1, m2 * m2);
    let c1 = (s0 - s2) / (s2 - s1);
    let c2 = (s1 - s0) / (s2 - s1);
    let coefficients = [1.0, c1, c2];
    let log_cutoff_sq = -(s0.ln() + c1 * s1.ln() + c2 * s2.ln());
    let cutoff = (0.5 * log_cutoff_sq).exp();
    Ok(PauliVillarsScheme {
        masses: [m0, m1, m2],
        coefficients,
        cutoff,
    })
}

const CUTOFF_ROOT_REL_TOL: f64 = 1e-12;
const CUTOFF_MAX_ITERATIONS: usize = 200;

/// Builds a scheme achieving a prescribed averaged cutoff, with the mass
/// parametrisation `m₂ = ratio · m₁` and `m₁` found by bracketed bisection.
/// At fixed ratio the cutoff is monotone increasing in `m₁` and the
/// coefficients stay bounded as `Λ → ∞`, which is all the regularisation
/// needs.
pub fn scheme_from_cutoff(
    m0: f64,
    target_cutoff: f64,
    mass_ratio: f64,
) -> Result<PauliVillarsScheme, SchemeError> {
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(SchemeError::InvalidParameter(format!(
            "m0 must be positive, got {m0}"
        )));
    }
    if !(mass_ratio > 1.0) {
        return Err(SchemeError::InvalidParameter(format!(
            "mass_ratio must exceed 1, got {mass_ratio}"
        )));
    }
    if !(target_cutoff > m0) {
        return Err(SchemeError::InvalidParameter(format!(
            "target cutoff {target_cutoff} must exceed m0 = {m0}"
        )));
    }
    let cutoff_at = |m1: f64| -> f64 {
        scheme_from_masses(m0, m1, mass_ratio * m1)
            .map(|s| s.cutoff())
            .unwrap_or(f64::NAN)
    };
    // Lower bracket: m1 → m0⁺. The cutoff approaches a strictly positive
    // limit above m0 there, so targets below that limit are infeasible.
    let mut lo = m0 * (1.0 + 1e-9);
    let cutoff_lo = cutoff_at(lo);
    if !(cutoff_lo < target_cutoff) {
        return Err(SchemeError::InfeasibleCutoff {
            target: target_cutoff,
            ratio: mass_ratio,
            attainable_min: cutoff_lo,
        });
    }
    // Upper bracket: Λ grows without bound with m1; expand geometrically.
    let mut hi = 2.0 * m0;
    let mut expansions = 0;
    while cutoff_at(hi) < target_cutoff {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(SchemeError::NonConvergent { iterations: expansions });
        }
    }
    for iteration in 0..CUTOFF_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if cutoff_at(mid) < target_cutoff {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= CUTOFF_ROOT_REL_TOL * mid {
            let scheme = scheme_from_masses(m0, hi, mass_ratio * hi)?;
            let achieved = scheme.cutoff();
            if (achieved - target_cutoff).abs() <= 1e-10 * target_cutoff {
                return Ok(scheme);
            }
            return Err(SchemeError::NonConvergent {
                iterations: iteration + 1,
            });
        }
    }
    Err(SchemeError::NonConvergent {
        iterations: CUTOFF_MAX_ITERATIONS,
    })
}
