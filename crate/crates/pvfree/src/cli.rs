//! Command-line surface: scheme construction, multiplier tables,
//! free-energy evaluation, the Uehling probe, and the verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3
//! runtime/numeric error. Worker count is taken from `PVFREE_THREADS`
//! (default: available processors); every artifact is reduced in fixed
//! order, so output bytes do not depend on it.

use crate::fields;
use crate::fmt_g17;
use crate::free_energy;
use crate::multipliers::{self, KSpacing, TableQuantity};
use crate::oracles::{self, OracleSpec};
use crate::pv_scheme::{self, PauliVillarsScheme};
use crate::quadrature::{self, QuadratureSpec};
use crate::special;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandOutcome {
    fn ok(summary: impl Into<String>) -> Self {
        CommandOutcome {
            exit_code: 0,
            artifacts: Vec::new(),
            summary: summary.into(),
        }
    }

    fn failed(code: i32, summary: impl Into<String>) -> Self {
        CommandOutcome {
            exit_code: code,
            artifacts: Vec::new(),
            summary: summary.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pvfree",
    about = "Pauli-Villars-regularised Dirac vacuum free energy at positive temperature",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantityArg {
    M0,
    Mt,
    Gamma,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Pv,
    Theta,
    Bessel,
    Fermi,
    Uehling,
    GammaOracle,
    MultiplierOracle,
    Fields,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Build and print a Pauli-Villars scheme from masses or a target cutoff.
    Scheme {
        #[arg(long)]
        m0: f64,
        #[arg(long)]
        m1: Option<f64>,
        #[arg(long)]
        m2: Option<f64>,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        ratio: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a multiplier table over a |k| grid and write it as CSV.
    Table {
        #[arg(long, value_enum)]
        quantity: QuantityArg,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        k_min: f64,
        #[arg(long)]
        k_max: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        log_k: bool,
        #[arg(long)]
        scheme_file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble the quadratic free energy F₂ for a field file.
    Energy {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        scheme_file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite; exit 1 on any failed invariant.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print the Uehling multiplier U(k).
    Uehling {
        #[arg(long)]
        k: f64,
    },
}

fn init_worker_pool() {
    if let Ok(text) = std::env::var("PVFREE_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n > 0 {
                // Ignore the error: the global pool can only be built once
                // per process, which is fine for repeated invocations in
                // tests.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Dispatches a full argv (including the program name).
pub fn execute_command(argv: &[String]) -> CommandOutcome {
    init_worker_pool();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return CommandOutcome::failed(code, "usage");
        }
    };
    match cli.command {
        Command::Scheme {
            m0,
            m1,
            m2,
            cutoff,
            ratio,
            json,
        } => run_scheme(m0, m1, m2, cutoff, ratio, json),
        Command::Table {
            quantity,
            beta,
            k_min,
            k_max,
            samples,
            log_k,
            scheme_file,
            out,
        } => run_table(quantity, beta, k_min, k_max, samples, log_k, &scheme_file, &out),
        Command::Energy {
            field,
            beta,
            scheme_file,
            kappa,
            tol,
            out,
        } => run_energy(&field, beta, &scheme_file, kappa, tol, &out),
        Command::Verify { suite, tol } => run_verify(suite, tol),
        Command::Uehling { k } => run_uehling(k),
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let argv: Vec<String> = std::env::args().collect();
    let outcome = execute_command(&argv);
    if outcome.exit_code == 3 {
        eprintln!("error: {}", outcome.summary);
    }
    outcome.exit_code
}

fn load_scheme(path: &PathBuf) -> Result<PauliVillarsScheme, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("reading scheme file {}: {e}", path.display()))?;
    PauliVillarsScheme::from_json(&text).map_err(|e| format!("scheme file {}: {e}", path.display()))
}

fn run_scheme(
    m0: f64,
    m1: Option<f64>,
    m2: Option<f64>,
    cutoff: Option<f64>,
    ratio: f64,
    json: Option<PathBuf>,
) -> CommandOutcome {
    let scheme = match (m1, m2, cutoff) {
        (Some(m1), Some(m2), None) => pv_scheme::scheme_from_masses(m0, m1, m2),
        (None, None, Some(target)) => pv_scheme::scheme_from_cutoff(m0, target, ratio),
        _ => {
            eprintln!("usage: scheme needs either --m1 and --m2, or --cutoff [--ratio]");
            return CommandOutcome::failed(2, "usage");
        }
    };
    let scheme = match scheme {
        Ok(s) => s,
        Err(e) => return CommandOutcome::failed(3, format!("scheme construction: {e}")),
    };
    let doc = scheme.to_json();
    println!("{doc}");
    let mut outcome = CommandOutcome::ok(format!("cutoff = {}", fmt_g17(scheme.cutoff())));
    if let Some(path) = json {
        if let Err(e) = std::fs::write(&path, format!("{doc}\n")) {
            return CommandOutcome::failed(3, format!("writing {}: {e}", path.display()));
        }
        outcome.artifacts.push(path);
    }
    outcome
}

fn run_table(
    quantity: QuantityArg,
    beta: f64,
    k_min: f64,
    k_max: f64,
    samples: usize,
    log_k: bool,
    scheme_file: &PathBuf,
    out: &PathBuf,
) -> CommandOutcome {
    if samples < 2 || !(k_max > k_min) || k_min < 0.0 {
        eprintln!("usage: table needs samples >= 2 and 0 <= k-min < k-max");
        return CommandOutcome::failed(2, "usage");
    }
    if log_k && k_min == 0.0 {
        eprintln!("usage: --log-k requires k-min > 0");
        return CommandOutcome::failed(2, "usage");
    }
    let scheme = match load_scheme(scheme_file) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::failed(3, e),
    };
    let spacing = if log_k { KSpacing::Log } else { KSpacing::Linear };
    let ks = multipliers::k_grid(k_min, k_max, samples, spacing);
    let quantity = match quantity {
        QuantityArg::M0 => TableQuantity::MZero,
        QuantityArg::Mt => TableQuantity::MThermal,
        QuantityArg::Gamma => TableQuantity::Gamma,
        QuantityArg::All => TableQuantity::All,
    };
    let spec = QuadratureSpec::default();
    let mut table = match multipliers::build_table(&scheme, beta, &ks, quantity, &spec) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::failed(3, format!("table evaluation: {e}")),
    };
    table.k_spacing = spacing;
    if let Err(e) = std::fs::write(out, table.to_csv()) {
        return CommandOutcome::failed(3, format!("writing {}: {e}", out.display()));
    }
    let mut outcome = CommandOutcome::ok(format!("{} rows -> {}", samples, out.display()));
    outcome.artifacts.push(out.clone());
    outcome
}

fn run_energy(
    field_path: &PathBuf,
    beta: f64,
    scheme_file: &PathBuf,
    kappa: f64,
    tol: Option<f64>,
    out: &PathBuf,
) -> CommandOutcome {
    let scheme = match load_scheme(scheme_file) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::failed(3, e),
    };
    let bytes = match std::fs::read(field_path) {
        Ok(b) => b,
        Err(e) => {
            return CommandOutcome::failed(3, format!("reading {}: {e}", field_path.display()))
        }
    };
    let grid = match fields::load_grid_field(&bytes) {
        Ok(g) => g,
        Err(e) => return CommandOutcome::failed(3, format!("field file: {e}")),
    };
    let spectral = fields::coulomb_project(&fields::spectral_transform(&grid));
    let spectra = match fields::field_spectra_and_norms(&spectral) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::failed(3, format!("spectra: {e}")),
    };
    let spec = QuadratureSpec {
        rel_tol: tol.unwrap_or(1e-7),
        abs_tol: 1e-12,
        ..Default::default()
    };
    let report =
        match free_energy::quadratic_free_energy(&spectral, &spectra, beta, &scheme, &spec, kappa) {
            Ok(r) => r,
            Err(e) => return CommandOutcome::failed(3, format!("free energy: {e}")),
        };
    let json = free_energy::report_to_json(&report, &scheme, &spectral);
    if let Err(e) = std::fs::write(out, format!("{json}\n")) {
        return CommandOutcome::failed(3, format!("writing {}: {e}", out.display()));
    }
    println!("{json}");
    let mut outcome = CommandOutcome::ok(format!("F2 = {}", fmt_g17(report.f2_total)));
    outcome.artifacts.push(out.clone());
    outcome
}

fn run_uehling(k: f64) -> CommandOutcome {
    match multipliers::uehling(k, &QuadratureSpec::default()) {
        Ok(u) => {
            println!("{}", fmt_g17(u));
            CommandOutcome::ok(format!("U({k})"))
        }
        Err(e) => CommandOutcome::failed(3, format!("uehling at k = {k}: {e}")),
    }
}

/// Collects pass/fail lines for a verification run and renders the
/// machine-readable failure list.
struct Verifier {
    failures: Vec<String>,
    checks: usize,
}

impl Verifier {
    fn new() -> Self {
        Verifier {
            failures: Vec::new(),
            checks: 0,
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks += 1;
        if pass {
            println!("PASS {name} ({detail})");
        } else {
            println!("FAIL {name} ({detail})");
            self.failures.push(format!("{name}: {detail}"));
        }
    }

    fn error(&mut self, name: &str, detail: String) {
        self.checks += 1;
        println!("FAIL {name} (error: {detail})");
        self.failures.push(format!("{name}: error: {detail}"));
    }
}

fn run_verify(suite: SuiteArg, tol: Option<f64>) -> CommandOutcome {
    let mut v = Verifier::new();
    let all = suite == SuiteArg::All;
    if all || suite == SuiteArg::Pv {
        verify_pv(&mut v);
    }
    if all || suite == SuiteArg::Theta {
        verify_theta(&mut v, tol.unwrap_or(1e-10));
    }
    if all || suite == SuiteArg::Bessel {
        verify_bessel(&mut v, tol.unwrap_or(1e-6));
    }
    if all || suite == SuiteArg::Fermi {
        verify_fermi(&mut v, tol.unwrap_or(1e-12));
    }
    if all || suite == SuiteArg::Uehling {
        verify_uehling(&mut v, tol.unwrap_or(5e-3));
    }
    if all || suite == SuiteArg::GammaOracle {
        verify_gamma_oracle(&mut v, tol.unwrap_or(1e-3));
    }
    if all || suite == SuiteArg::MultiplierOracle {
        verify_multiplier_oracle(&mut v, tol.unwrap_or(1e-3));
    }
    if all || suite == SuiteArg::Fields {
        verify_fields(&mut v);
    }
    if v.failures.is_empty() {
        CommandOutcome::ok(format!("{} checks passed", v.checks))
    } else {
        let list = serde_json::to_string(&v.failures).expect("failure list serialisation");
        println!("FAILURES {list}");
        CommandOutcome::failed(1, format!("{} of {} checks failed", v.failures.len(), v.checks))
    }
}

fn verify_pv(v: &mut Verifier) {
    match pv_scheme::scheme_from_masses(1.0, 2.0, 3.0) {
        Ok(s) => {
            let c = s.coefficients();
            let m = s.masses();
            let sum_c: f64 = c.iter().sum();
            let sum_cm2: f64 = c.iter().zip(m.iter()).map(|(c, m)| c * m * m).sum();
            v.check(
                "pv.coefficients",
                (c[1] + 1.6).abs() <= 1e-12 && (c[2] - 0.6).abs() <= 1e-12,
                format!("c = ({}, {}, {})", c[0], c[1], c[2]),
            );
            v.check("pv.sum_rule_c", sum_c.abs() <= 1e-14, format!("Σc = {sum_c:e}"));
            v.check(
                "pv.sum_rule_cm2",
                sum_cm2.abs() <= 1e-12,
                format!("Σc·m² = {sum_cm2:e}"),
            );
            v.check(
                "pv.cutoff",
                (s.cutoff() - 1.56811).abs() <= 1e-4,
                format!("Λ = {}", s.cutoff()),
            );
        }
        Err(e) => v.error("pv.scheme_from_masses", e.to_string()),
    }
    v.check(
        "pv.infeasible_cutoff_detected",
        matches!(
            pv_scheme::scheme_from_cutoff(1.0, 1.0 + 1e-12, 2.0),
            Err(pv_scheme::SchemeError::InfeasibleCutoff { .. })
        ),
        "target within the infeasible band".to_string(),
    );
}

fn verify_theta(v: &mut Verifier, tol: f64) {
    for &s in &[0.05, 0.5, 5.0] {
        for &beta in &[0.5, 2.0, 10.0] {
            let direct = special::theta2(s, beta, special::Theta2Representation::Direct);
            let poisson = special::theta2(s, beta, special::Theta2Representation::Poisson);
            match (direct, poisson) {
                (Ok(d), Ok(p)) => {
                    let rel = (d - p).abs() / d.abs().max(f64::MIN_POSITIVE);
                    v.check(
                        &format!("theta.s{s}_beta{beta}"),
                        rel <= tol,
                        format!("relative {rel:e}"),
                    );
                }
                (Err(e), _) | (_, Err(e)) => {
                    v.error(&format!("theta.s{s}_beta{beta}"), e.to_string())
                }
            }
        }
    }
}

fn verify_bessel(v: &mut Verifier, tol: f64) {
    for &x in &[0.5, 1.0, 5.0] {
        match special::bessel_k(0.5, x, 1e-10) {
            Ok(val) => {
                let reference = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
                let rel = (val - reference).abs() / reference;
                v.check(
                    &format!("bessel.k_half_x{x}"),
                    rel <= 1e-8,
                    format!("relative {rel:e}"),
                );
            }
            Err(e) => v.error(&format!("bessel.k_half_x{x}"), e.to_string()),
        }
    }
    let spec = QuadratureSpec::default();
    for &(nu, alpha, gamma) in &[(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (0.5, 0.25, 4.0)] {
        match oracles::bessel_integral_identity_check(nu, alpha, gamma, &spec) {
            Ok(c) => {
                let rel = (c.lhs - c.rhs_corrected).abs() / c.lhs.abs();
                v.check(
                    &format!("bessel.identity_nu{nu}"),
                    rel <= tol,
                    format!("relative {rel:e}"),
                );
                if nu == 0.0 {
                    v.check(
                        "bessel.printed_argument_diverges",
                        c.rhs_as_printed.is_infinite(),
                        format!("sentinel {}", c.rhs_as_printed),
                    );
                }
            }
            Err(e) => v.error(&format!("bessel.identity_nu{nu}"), e.to_string()),
        }
    }
}

fn verify_fermi(v: &mut Verifier, tol: f64) {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut worst: f64 = 0.0;
    let mut points = Vec::with_capacity(100);
    for _ in 0..96 {
        let lambda = rng.gen_range(-50.0..50.0);
        let beta = 10f64.powf(rng.gen_range(-2.0..2.0));
        points.push((lambda, beta));
    }
    points.extend_from_slice(&[(5000.0, 1.0), (-5000.0, 1.0), (50.0, 100.0), (-50.0, 100.0)]);
    let mut failed_at = None;
    for &(lambda, beta) in &points {
        match special::fermi_thermo(lambda, beta) {
            Ok(p) => {
                let lhs = p.lambda * (p.occupation - 0.5) - p.entropy / p.beta;
                let err = (lhs - p.free_energy_density).abs() / f64::max(1.0, lambda.abs());
                if err > worst {
                    worst = err;
                }
                if err > tol && failed_at.is_none() {
                    failed_at = Some((lambda, beta));
                }
            }
            Err(e) => {
                v.error("fermi.identity", format!("({lambda}, {beta}): {e}"));
                return;
            }
        }
    }
    v.check(
        "fermi.identity_100_points",
        failed_at.is_none(),
        match failed_at {
            None => format!("worst normalised error {worst:e}"),
            Some((l, b)) => format!("failed at (λ, β) = ({l}, {b})"),
        },
    );
}

fn verify_uehling(v: &mut Verifier, tol: f64) {
    let spec = QuadratureSpec::default();
    let two_thirds_pi = 2.0 / (3.0 * std::f64::consts::PI);
    for &k in &[0.5, 1.0, 5.0] {
        let mut previous = f64::INFINITY;
        let mut monotone = true;
        let mut final_deficit = f64::NAN;
        for &lambda_prime in &[10.0, 100.0, 1000.0] {
            let scheme =
                match pv_scheme::scheme_from_masses(1.0, lambda_prime, 2.0 * lambda_prime) {
                    Ok(s) => s,
                    Err(e) => {
                        v.error("uehling.scheme", e.to_string());
                        return;
                    }
                };
            let m0k = match multipliers::m_zero(k, &scheme, &spec) {
                Ok(x) => x,
                Err(e) => {
                    v.error("uehling.m_zero", format!("k = {k}: {e}"));
                    return;
                }
            };
            let u = match multipliers::uehling(k, &spec) {
                Ok(x) => x,
                Err(e) => {
                    v.error("uehling.u", format!("k = {k}: {e}"));
                    return;
                }
            };
            let deficit = (two_thirds_pi * scheme.cutoff().ln() - m0k - u).abs();
            if deficit >= previous {
                monotone = false;
            }
            previous = deficit;
            final_deficit = deficit;
        }
        v.check(
            &format!("uehling.deficit_k{k}"),
            monotone && final_deficit <= tol,
            format!("deficit at Λ' = 1000: {final_deficit:e}, decreasing: {monotone}"),
        );
    }
}

fn verify_gamma_oracle(v: &mut Verifier, tol: f64) {
    let scheme = match pv_scheme::scheme_from_masses(1.0, 2.0, 3.0) {
        Ok(s) => s,
        Err(e) => {
            v.error("gamma_oracle.scheme", e.to_string());
            return;
        }
    };
    let quad = QuadratureSpec {
        rel_tol: 1e-9,
        abs_tol: 1e-14,
        ..Default::default()
    };
    let oracle_spec = OracleSpec::default();
    for &(k, beta) in &[(0.5, 1.0), (2.0, 0.5), (1.0, 2.0)] {
        let closed = match multipliers::gamma_total(k, beta, &scheme, &quad) {
            Ok(x) => x,
            Err(e) => {
                v.error(&format!("gamma_oracle.k{k}_beta{beta}"), e.to_string());
                continue;
            }
        };
        let oracle = match oracles::gamma_matsubara_oracle(k, beta, &scheme, &oracle_spec) {
            Ok(x) => x,
            Err(e) => {
                v.error(&format!("gamma_oracle.k{k}_beta{beta}"), e.to_string());
                continue;
            }
        };
        let rel = (closed - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
        v.check(
            &format!("gamma_oracle.k{k}_beta{beta}"),
            rel <= tol,
            format!("closed {closed:e} vs oracle {oracle:e}, relative {rel:e}"),
        );
    }
}

/// β-average of a per-b oracle by a fixed 16-point Gauss rule — adequate for
/// the 1e−3 oracle comparison, and cheap enough to keep the suite inside
/// its runtime budget.
fn beta_average_oracle(
    f: &dyn Fn(f64) -> Result<f64, oracles::OracleError>,
    beta: f64,
) -> Result<f64, oracles::OracleError> {
    let failure = std::cell::RefCell::new(None);
    let integral = quadrature::gauss_legendre(
        |b| match f(b) {
            Ok(x) => x,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                f64::NAN
            }
        },
        0.0,
        beta,
        16,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(integral / beta)
}

fn verify_multiplier_oracle(v: &mut Verifier, tol: f64) {
    let scheme = match pv_scheme::scheme_from_masses(1.0, 2.0, 3.0) {
        Ok(s) => s,
        Err(e) => {
            v.error("multiplier_oracle.scheme", e.to_string());
            return;
        }
    };
    let quad = QuadratureSpec {
        rel_tol: 1e-9,
        abs_tol: 1e-14,
        ..Default::default()
    };
    let oracle_spec = OracleSpec {
        l_max: 200,
        p_quadrature: QuadratureSpec {
            rel_tol: 1e-7,
            abs_tol: 1e-13,
            ..Default::default()
        },
        tail_extrapolation: true,
    };
    let k2_over_8pi = |k: f64| k * k / (8.0 * std::f64::consts::PI);
    for &(k, beta) in &[(0.5, 1.0), (1.0, 0.8)] {
        // Vector channel: β-averaged a(k,·) = (k²/8π)(M⁰+M^T).
        let vector = beta_average_oracle(
            &|b| oracles::vector_multiplier_oracle(k, b, &scheme, &oracle_spec),
            beta,
        );
        let m_combined = multipliers::m_combined(k, beta, &scheme, &quad);
        match (vector, &m_combined) {
            (Ok(av), Ok(mc)) => {
                let expect = k2_over_8pi(k) * mc;
                let rel = (av - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
                v.check(
                    &format!("multiplier_oracle.vector_k{k}_beta{beta}"),
                    rel <= tol,
                    format!("oracle {av:e} vs closed {expect:e}, relative {rel:e}"),
                );
            }
            (Err(e), _) => v.error(&format!("multiplier_oracle.vector_k{k}_beta{beta}"), e.to_string()),
            (_, Err(e)) => v.error(&format!("multiplier_oracle.vector_k{k}_beta{beta}"), e.to_string()),
        }
        // Scalar channel: β-averaged v(k,·) = −(k²/8π)(M⁰+M^T) + Γ̄.
        let scalar = beta_average_oracle(
            &|b| oracles::scalar_multiplier_oracle(k, b, &scheme, &oracle_spec),
            beta,
        );
        let gamma_bar = multipliers::gamma_beta_averaged(k, beta, &scheme, &quad);
        match (scalar, m_combined, gamma_bar) {
            (Ok(av), Ok(mc), Ok(gb)) => {
                let expect = -k2_over_8pi(k) * mc + gb;
                let rel = (av - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
                v.check(
                    &format!("multiplier_oracle.scalar_k{k}_beta{beta}"),
                    rel <= tol,
                    format!("oracle {av:e} vs closed {expect:e}, relative {rel:e}"),
                );
            }
            (Err(e), _, _) => {
                v.error(&format!("multiplier_oracle.scalar_k{k}_beta{beta}"), e.to_string())
            }
            (_, Err(e), _) => {
                v.error(&format!("multiplier_oracle.scalar_k{k}_beta{beta}"), e.to_string())
            }
            (_, _, Err(e)) => {
                v.error(&format!("multiplier_oracle.scalar_k{k}_beta{beta}"), e.to_string())
            }
        }
    }
}

fn verify_fields(v: &mut Verifier) {
    let field = match fields::gaussian_test_field(1.0, 1.0, [64, 64, 64], [20.0, 20.0, 20.0]) {
        Ok(f) => f,
        Err(e) => {
            v.error("fields.gaussian", e.to_string());
            return;
        }
    };
    let hat = fields::spectral_transform(&field);

    // Plancherel on the potential.
    let dx: f64 = field
        .box_length()
        .iter()
        .zip(field.n().iter())
        .map(|(l, &n)| l / n as f64)
        .product();
    let lhs: f64 = field.v().iter().map(|x| x * x * dx).sum();
    let rhs: f64 = hat.v_hat().iter().map(|z| z.norm_sqr() * hat.dk_volume()).sum();
    let rel = (lhs - rhs).abs() / lhs;
    v.check("fields.plancherel", rel <= 1e-12, format!("relative {rel:e}"));

    // Projector idempotence.
    let once = fields::coulomb_project(&hat);
    let twice = fields::coulomb_project(&once);
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        for idx in 0..once.len() {
            worst = worst.max((once.a_hat()[axis][idx] - twice.a_hat()[axis][idx]).norm());
        }
    }
    v.check(
        "fields.projector_idempotent",
        worst <= 1e-15,
        format!("max deviation {worst:e}"),
    );

    // ‖F‖² of the unit Gaussian.
    match fields::field_spectra_and_norms(&once) {
        Ok(spectra) => {
            let reference = 8.3525;
            let rel = (spectra.l2_f_squared - reference).abs() / reference;
            v.check(
                "fields.gaussian_norm",
                rel <= 5e-3,
                format!("‖F‖² = {}, relative {rel:e}", spectra.l2_f_squared),
            );
        }
        Err(e) => v.error("fields.gaussian_norm", e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(parts: &[&str]) -> Vec<String> {
        std::iter::once("pvfree")
            .chain(parts.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let outcome = execute_command(&argv(&["frobnicate"]));
        assert_eq!(outcome.exit_code, 2);
    }

    #[test]
    fn scheme_requires_a_complete_parameter_set() {
        let outcome = execute_command(&argv(&["scheme", "--m0", "1", "--m1", "2"]));
        assert_eq!(outcome.exit_code, 2);
    }

    #[test]
    fn scheme_emits_worked_example() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scheme.json");
        let outcome = execute_command(&argv(&[
            "scheme",
            "--m0",
            "1",
            "--m1",
            "2",
            "--m2",
            "3",
            "--json",
            path.to_str().unwrap(),
        ]));
        assert_eq!(outcome.exit_code, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        let scheme = PauliVillarsScheme::from_json(&text).unwrap();
        assert!((scheme.cutoff() - 1.56811).abs() < 1e-4);
        assert!((scheme.coefficients()[1] + 1.6).abs() < 1e-12);
    }

    #[test]
    fn infeasible_scheme_is_runtime_error() {
        let outcome =
            execute_command(&argv(&["scheme", "--m0", "1", "--cutoff", "1.0000000000001"]));
        assert_eq!(outcome.exit_code, 3);
    }

    #[test]
    fn uehling_prints_value() {
        let outcome = execute_command(&argv(&["uehling", "--k", "1"]));
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn verify_pv_suite_passes() {
        let outcome = execute_command(&argv(&["verify", "--suite", "pv"]));
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn verify_theta_suite_passes() {
        let outcome = execute_command(&argv(&["verify", "--suite", "theta"]));
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn verify_fermi_suite_passes() {
        let outcome = execute_command(&argv(&["verify", "--suite", "fermi"]));
        assert_eq!(outcome.exit_code, 0);
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scheme_path = dir.path().join("scheme.json");
        let csv_path = dir.path().join("table.csv");
        assert_eq!(
            execute_command(&argv(&[
                "scheme",
                "--m0",
                "1",
                "--m1",
                "2",
                "--m2",
                "3",
                "--json",
                scheme_path.to_str().unwrap(),
            ]))
            .exit_code,
            0
        );
        let outcome = execute_command(&argv(&[
            "table",
            "--quantity",
            "m0",
            "--beta",
            "1",
            "--k-min",
            "0",
            "--k-max",
            "2",
            "--samples",
            "5",
            "--scheme-file",
            scheme_path.to_str().unwrap(),
            "--out",
            csv_path.to_str().unwrap(),
        ]));
        assert_eq!(outcome.exit_code, 0);
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        assert!(csv.starts_with("k,M0,MT,Gamma,Gamma_over_k2,err\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
