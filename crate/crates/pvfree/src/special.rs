//! Analytic substrate shared by the multiplier evaluators: Matsubara
//! frequencies, the `x·tanh x` partial-fraction series, the Jacobi θ₂
//! function in both of its representations, the modified Bessel function
//! `K_ν` through the Sommerfeld integral, and the scalar Fermi
//! thermodynamic identities.
//!
//! Every expression containing `e^{βλ}` or `e^{X cosh t}` is rewritten in
//! terms of `e^{−|·|}` before evaluation: `β cosh t` exceeds the double
//! exponent range almost immediately, and the source formulas assume exact
//! arithmetic.

use crate::quadrature::{self, QuadratureSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecialFunctionError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not reach the requested accuracy (achieved {achieved:e})")]
    Accuracy { achieved: f64 },
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
}

/// The fermionic Matsubara frequency `ω(l,β) = (2l−1)π/β`. The odd numerator
/// means the result is nonzero for every integer `l` — the frequency lattice
/// never touches the origin, which is what keeps all thermal sums finite
/// without an infrared prescription.
pub fn matsubara_frequency(l: i64, beta: f64) -> Result<f64, SpecialFunctionError> {
    if !(beta > 0.0) {
        return Err(SpecialFunctionError::Domain(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok((2 * l - 1) as f64 * std::f64::consts::PI / beta)
}

/// Symmetric partial sum of the partial-fraction expansion
/// `x tanh x = Σ_{l∈Z} 4x² / ((2l−1)²π² + 4x²)`, truncated to
/// `l ∈ [−terms+1, terms]`. Converges monotonically from below.
pub fn x_tanh_x_partial(x: f64, terms: u32) -> f64 {
    let x2 = 4.0 * x * x;
    let mut acc = 0.0;
    // l and 1−l contribute identically ((2l−1)² is shared), so sum l ≥ 1
    // and double.
    for l in 1..=terms as i64 {
        let odd = (2 * l - 1) as f64 * std::f64::consts::PI;
        acc += x2 / (odd * odd + x2);
    }
    2.0 * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta2Representation {
    /// `Σ_{l∈Z} e^{−s ω(l,β)²}` summed term by term; fast when `s ω₁² ≳ 1`.
    Direct,
    /// Poisson-resummed form `(πs)^{−1/2}(β/2)[1 + 2 Σ_{n≥1}(−1)^n e^{−β²n²/(4s)}]`;
    /// fast in the complementary small-`s` regime.
    Poisson,
}

const THETA2_TERM_CUTOFF: f64 = 1e-18;

/// Jacobi θ₂ over the fermionic frequency lattice, in the requested
/// representation. Both series are truncated adaptively once the next term
/// falls below `1e−18` of the running sum.
pub fn theta2(
    s: f64,
    beta: f64,
    representation: Theta2Representation,
) -> Result<f64, SpecialFunctionError> {
    if !(s > 0.0) || !(beta > 0.0) {
        return Err(SpecialFunctionError::Domain(format!(
            "theta2 requires s > 0 and beta > 0, got s = {s}, beta = {beta}"
        )));
    }
    match representation {
        Theta2Representation::Direct => {
            let mut acc = 0.0;
            for l in 1..=1_000_000i64 {
                let omega = (2 * l - 1) as f64 * std::f64::consts::PI / beta;
                let term = 2.0 * (-s * omega * omega).exp();
                acc += term;
                if term < THETA2_TERM_CUTOFF * acc.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            Ok(acc)
        }
        Theta2Representation::Poisson => {
            let prefactor = (std::f64::consts::PI * s).sqrt().recip() * 0.5 * beta;
            // The resummed bracket 1 + 2Σ(−1)ⁿ e^{−β²n²/4s} is θ₄(q) with
            // q = e^{−β²/4s}. Near q → 1 the alternating series cancels
            // order-one terms down to e^{−π²s/β²·...} and loses all relative
            // accuracy, so it is evaluated through the Jacobi triple product
            // θ₄(q) = Π (1−q^{2m})(1−q^{2m−1})², whose factors are all
            // positive: full relative precision at every (s, β).
            let x = beta * beta / (4.0 * s);
            let mut bracket = 1.0f64;
            for m in 1..=100_000_000i64 {
                let mf = m as f64;
                let even = -(-2.0 * mf * x).exp_m1();
                let odd = -(-(2.0 * mf - 1.0) * x).exp_m1();
                bracket *= even * odd * odd;
                // Past q^{2m−1} < 1e−19 every remaining factor is 1 to
                // double precision.
                if (2.0 * mf - 1.0) * x > 43.8 {
                    break;
                }
            }
            Ok(prefactor * bracket)
        }
    }
}

/// θ₂ with the representation chosen automatically: the direct series when
/// `4π²s/β² ≥ 1` (its first term is already small), the Poisson form
/// otherwise. Each series converges fastest exactly where the other stalls.
pub fn theta2_auto(s: f64, beta: f64) -> Result<f64, SpecialFunctionError> {
    let rep = if 4.0 * std::f64::consts::PI.powi(2) * s / (beta * beta) >= 1.0 {
        Theta2Representation::Direct
    } else {
        Theta2Representation::Poisson
    };
    theta2(s, beta, rep)
}

/// Largest exponent magnitude a double can carry before `e^{−y}` underflows.
pub(crate) const EXP_UNDERFLOW: f64 = 745.0;

/// Modified Bessel function of the second kind through the Sommerfeld
/// representation `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt`, evaluated by
/// adaptive quadrature. The integral is cut at `t_max` where
/// `x cosh t_max ≥ 745`, past which the integrand underflows to zero.
pub fn bessel_k(nu: f64, x: f64, tol: f64) -> Result<f64, SpecialFunctionError> {
    if !(x > 0.0) {
        return Err(SpecialFunctionError::Domain(format!(
            "Sommerfeld representation requires x > 0, got {x}"
        )));
    }
    if !(nu >= 0.0) {
        return Err(SpecialFunctionError::Domain(format!(
            "nu must be non-negative, got {nu}"
        )));
    }
    if x >= EXP_UNDERFLOW {
        // e^{-x} underflows everywhere on the contour.
        return Ok(0.0);
    }
    let t_max = (EXP_UNDERFLOW / x).acosh();
    let spec = QuadratureSpec {
        rel_tol: tol,
        abs_tol: 1e-300,
        ..Default::default()
    };
    // cosh(νt) ≤ e^{νt}; rewrite as e^{νt−x cosh t}(1+e^{−2νt})/2 so the
    // exponent is assembled before a single exp call.
    let result = quadrature::integrate_interval(
        |t| {
            let c = t.cosh();
            let grow = nu * t - x * c;
            if grow < -EXP_UNDERFLOW {
                0.0
            } else {
                0.5 * grow.exp() * (1.0 + (-2.0 * nu * t).exp())
            }
        },
        0.0,
        t_max,
        &spec,
    )?;
    if !result.converged {
        return Err(SpecialFunctionError::Accuracy {
            achieved: result.error_estimate / result.value.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(result.value)
}

/// One point of the scalar Fermi thermodynamics: occupation, entropy, and
/// the free-energy density of a single eigenvalue `λ` at inverse
/// temperature `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    pub lambda: f64,
    pub beta: f64,
    pub occupation: f64,
    pub entropy: f64,
    pub free_energy_density: f64,
}

/// Evaluates the minimiser `f = 1/(1+e^{βλ})`, its entropy
/// `S = −f ln f − (1−f) ln(1−f)`, and the free-energy density
/// `−(1/β) ln(2 cosh(βλ/2))`, all in overflow-safe form. The three satisfy
/// the convex-duality identity `λ(f−1/2) − S/β = density` exactly.
pub fn fermi_thermo(lambda: f64, beta: f64) -> Result<ThermoPoint, SpecialFunctionError> {
    if !(beta > 0.0) {
        return Err(SpecialFunctionError::Domain(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let t = beta * lambda;
    let at = t.abs();
    // e^{-|t|} never overflows; assemble everything from it.
    let e = (-at).exp();
    // Occupation: for t ≥ 0, f = e^{-t}/(1+e^{-t}); for t < 0, f = 1/(1+e^{t}).
    let small_side = e / (1.0 + e); // value in (0, 1/2]
    let occupation = if t >= 0.0 { small_side } else { 1.0 - small_side };
    // Entropy in terms of σ = e^{-|t|}/(1+e^{-|t|}):
    // S = ln(1+e^{-|t|}) + |t|·σ.
    let entropy = e.ln_1p() + at * small_side;
    // ln(2 cosh(t/2)) = |t|/2 + ln(1+e^{-|t|}).
    let free_energy_density = -(0.5 * at + e.ln_1p()) / beta;
    Ok(ThermoPoint {
        lambda,
        beta,
        occupation,
        entropy,
        free_energy_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matsubara_examples() {
        let pi = std::f64::consts::PI;
        assert_eq!(matsubara_frequency(1, pi).unwrap(), 1.0);
        assert_eq!(matsubara_frequency(0, pi).unwrap(), -1.0);
        assert!((matsubara_frequency(-3, 2.0).unwrap() + 7.0 * pi / 2.0).abs() < 1e-15);
        assert!(matsubara_frequency(1, 0.0).is_err());
    }

    #[test]
    fn x_tanh_x_converges_from_below() {
        assert_eq!(x_tanh_x_partial(0.0, 17), 0.0);
        let target = 1.0f64.tanh();
        let v = x_tanh_x_partial(1.0, 10_000);
        assert!(v < target);
        assert!((v - target).abs() < 1e-4);
        assert_eq!(x_tanh_x_partial(-2.0, 50), x_tanh_x_partial(2.0, 50));
        // Monotone in the truncation order.
        assert!(x_tanh_x_partial(1.5, 100) < x_tanh_x_partial(1.5, 200));
    }

    #[test]
    fn theta2_dual_representation() {
        let direct = theta2(1.0, 2.0 * std::f64::consts::PI, Theta2Representation::Direct)
            .unwrap();
        let poisson = theta2(1.0, 2.0 * std::f64::consts::PI, Theta2Representation::Poisson)
            .unwrap();
        assert!((direct - 1.7722707).abs() < 1e-6);
        assert!((direct - poisson).abs() < 1e-12 * direct);
        for &s in &[0.05, 0.5, 5.0] {
            for &beta in &[0.5, 2.0, 10.0] {
                let d = theta2(s, beta, Theta2Representation::Direct).unwrap();
                let p = theta2(s, beta, Theta2Representation::Poisson).unwrap();
                assert!((d - p).abs() <= 1e-10 * d.abs(), "s={s} beta={beta}: {d} vs {p}");
            }
        }
    }

    #[test]
    fn bessel_half_integer_closed_form() {
        for &x in &[0.5f64, 1.0, 5.0] {
            let reference = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
            let v = bessel_k(0.5, x, 1e-10).unwrap();
            assert!(
                (v - reference).abs() < 1e-8 * reference,
                "x={x}: {v} vs {reference}"
            );
        }
        assert!((bessel_k(0.0, 1.0, 1e-10).unwrap() - 0.4210244).abs() < 1e-6);
        assert!((bessel_k(1.0, 1.0, 1e-10).unwrap() - 0.6019072).abs() < 1e-6);
        assert!(bessel_k(0.5, 0.0, 1e-8).is_err());
    }

    #[test]
    fn bessel_decreasing_in_x() {
        let mut prev = f64::INFINITY;
        for &x in &[0.3, 0.7, 1.5, 3.0, 8.0, 20.0] {
            let v = bessel_k(1.0, x, 1e-10).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn fermi_identity_and_symmetry() {
        let p = fermi_thermo(0.0, 2.0).unwrap();
        assert!((p.occupation - 0.5).abs() < 1e-15);
        assert!((p.entropy - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((p.free_energy_density + std::f64::consts::LN_2 / 2.0).abs() < 1e-15);

        let p = fermi_thermo(1.0, 1.0).unwrap();
        assert!((p.free_energy_density + 0.8132616).abs() < 1e-6);
        let lhs = p.lambda * (p.occupation - 0.5) - p.entropy / p.beta;
        assert!((lhs - p.free_energy_density).abs() < 1e-12);

        let a = fermi_thermo(3.0, 0.7).unwrap().occupation;
        let b = fermi_thermo(-3.0, 0.7).unwrap().occupation;
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fermi_identity_extreme_arguments() {
        // |βλ| up to 5000 must not overflow and must keep the identity.
        for &(lambda, beta) in &[(50.0, 100.0), (-50.0, 100.0), (5000.0, 1.0), (-0.01, 0.01)] {
            let p = fermi_thermo(lambda, beta).unwrap();
            let lhs = p.lambda * (p.occupation - 0.5) - p.entropy / p.beta;
            let tol = 1e-12 * f64::max(1.0, lambda.abs());
            assert!(
                (lhs - p.free_energy_density).abs() <= tol,
                "lambda={lambda} beta={beta}"
            );
            assert!(p.entropy >= 0.0);
            // At |βλ| ≳ 37 the occupation saturates to exactly 0 or 1 in
            // binary64; only the range invariant survives.
            assert!((0.0..=1.0).contains(&p.occupation));
        }
    }
}
