//! Numerical evaluation of the Pauli-Villars-regularised free energy of the
//! Dirac vacuum in classical electromagnetic fields at positive temperature.
//!
//! The library computes the three linear-response multipliers that govern the
//! quadratic free energy `F₂`:
//!
//! * `M⁰(k)` — the zero-temperature vacuum-polarization multiplier,
//! * `M^T(k,β)` — its thermal correction (exponentially suppressed at low
//!   temperature),
//! * `Γ(k,β)` — the purely thermal electrostatic channel responsible for
//!   Debye-type screening, assembled from eight closed-form components,
//!
//! together with independent brute-force Matsubara-sum oracles that verify
//! every closed form, an FFT field pipeline for discretised four-potentials
//! on periodic grids, and the `F₂` assembly itself.
//!
//! All quantities are expressed in natural units (ħ = c = 1); temperatures
//! enter through the inverse temperature β and masses through a
//! [`pv_scheme::PauliVillarsScheme`].

pub mod cli;
pub mod fields;
pub mod free_energy;
pub mod multipliers;
pub mod oracles;
pub mod pv_scheme;
pub mod quadrature;
pub mod special;

/// Formats a float with 17 significant digits, the shortest representation
/// guaranteeing lossless binary64 round-trips. Used for every number the
/// artifacts (CSV tables, JSON reports) emit, so outputs are byte-stable.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    format!("{:.16e}", x)
}
