//! Acceptance suite: one test per criterion, each emitting a single
//! `criterion NN PASS/FAIL` line. Runtime budgets are asserted alongside
//! the numerical targets.

use pvfree::fields;
use pvfree::free_energy;
use pvfree::multipliers;
use pvfree::oracles::{self, OracleSpec};
use pvfree::pv_scheme;
use pvfree::quadrature::{self, QuadratureSpec};
use pvfree::special;
use std::time::{Duration, Instant};

fn report(number: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:02} {verdict}: {detail}");
    assert!(pass, "criterion {number:02}: {detail}");
}

#[test]
fn criterion_01_pv_scheme() {
    let start = Instant::now();
    let scheme = pv_scheme::scheme_from_masses(1.0, 2.0, 3.0).expect("worked scheme");
    let elapsed = start.elapsed();
    let c = scheme.coefficients();
    let m = scheme.masses();
    let sum_c: f64 = c.iter().sum();
    let sum_cm2: f64 = c.iter().zip(m.iter()).map(|(c, m)| c * m * m).sum();
    let ok = (c[0] - 1.0).abs() <= 1e-14
        && (c[1] + 1.6).abs() <= 1e-12
        && (c[2] - 0.6).abs() <= 1e-12
        && sum_c.abs() <= 1e-14
        && sum_cm2.abs() <= 1e-12
        && (scheme.cutoff() - 1.56811).abs() <= 1e-4
        && elapsed < Duration::from_millis(1);
    report(
        1,
        ok,
        &format!(
            "c = ({}, {}, {}), Λ = {}, |Σc| = {sum_c:e}, |Σc·m²| = {sum_cm2:e}, {elapsed:?}",
            c[0],
            c[1],
            c[2],
            scheme.cutoff()
        ),
    );
}

#[test]
fn criterion_02_theta2_dual_representation() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &s in &[0.05, 0.5, 5.0] {
        for &beta in &[0.5, 2.0, 10.0] {
            let d = special::theta2(s, beta, special::Theta2Representation::Direct).unwrap();
            let p = special::theta2(s, beta, special::Theta2Representation::Poisson).unwrap();
            worst = worst.max((d - p).abs() / d.abs().max(f64::MIN_POSITIVE));
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-10 && elapsed < Duration::from_secs(1);
    report(2, ok, &format!("worst relative {worst:e}, {elapsed:?}"));
}

#[test]
fn criterion_03_bessel_layer() {
    let start = Instant::now();
    let mut worst_half: f64 = 0.0;
    for &x in &[0.5, 1.0, 5.0] {
        let reference = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        let v = special::bessel_k(0.5, x, 1e-10).unwrap();
        worst_half = worst_half.max((v - reference).abs() / reference);
    }
    let spec = QuadratureSpec::default();
    let mut worst_identity: f64 = 0.0;
    let mut sentinel_ok = false;
    for &(nu, alpha, gamma) in &[(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (0.5, 0.25, 4.0)] {
        let c = oracles::bessel_integral_identity_check(nu, alpha, gamma, &spec).unwrap();
        worst_identity = worst_identity.max((c.lhs - c.rhs_corrected).abs() / c.lhs.abs());
        if nu == 0.0 {
            sentinel_ok = c.rhs_as_printed.is_infinite();
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_half <= 1e-8
        && worst_identity <= 1e-6
        && sentinel_ok
        && elapsed < Duration::from_secs(5);
    report(
        3,
        ok,
        &format!(
            "K_1/2 worst {worst_half:e}, identity worst {worst_identity:e}, \
             printed-argument sentinel at ν=0 divergent: {sentinel_ok}, {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_04_fermi_identity() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(4);
    let mut points: Vec<(f64, f64)> = (0..96)
        .map(|_| {
            (
                rng.gen_range(-50.0..50.0),
                10f64.powf(rng.gen_range(-2.0..2.0)),
            )
        })
        .collect();
    points.extend_from_slice(&[(5000.0, 1.0), (-5000.0, 1.0), (2500.0, 2.0), (-0.001, 0.01)]);
    let mut worst: f64 = 0.0;
    for &(lambda, beta) in &points {
        let p = special::fermi_thermo(lambda, beta).unwrap();
        let lhs = p.lambda * (p.occupation - 0.5) - p.entropy / p.beta;
        worst = worst.max((lhs - p.free_energy_density).abs() / f64::max(1.0, lambda.abs()));
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    report(
        4,
        ok,
        &format!("{} points, worst normalised error {worst:e}, {elapsed:?}", points.len()),
    );
}

#[test]
fn criterion_05_uehling_limit() {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let two_thirds_pi = 2.0 / (3.0 * std::f64::consts::PI);
    let mut ok = true;
    let mut detail = String::new();
    for &k in &[0.5, 1.0, 5.0] {
        let u = multipliers::uehling(k, &spec).unwrap();
        let mut previous = f64::INFINITY;
        let mut last = f64::NAN;
        for &lambda_prime in &[10.0, 100.0, 1000.0] {
            let scheme =
                pv_scheme::scheme_from_masses(1.0, lambda_prime, 2.0 * lambda_prime).unwrap();
            let m0k = multipliers::m_zero(k, &scheme, &spec).unwrap();
            let deficit = (two_thirds_pi * scheme.cutoff().ln() - m0k - u).abs();
            if deficit >= previous {
                ok = false;
            }
            previous = deficit;
            last = deficit;
        }
        if last > 5e-3 {
            ok = false;
        }
        detail.push_str(&format!("k={k}: deficit(Λ'=10³)={last:e}; "));
    }
    let elapsed = start.elapsed();
    ok = ok && elapsed < Duration::from_secs(30);
    report(5, ok, &format!("{detail}{elapsed:?}"));
}

#[test]
fn criterion_06_gamma_oracle() {
    let scheme = pv_scheme::scheme_from_masses(1.0, 2.0, 3.0).unwrap();
    let quad = QuadratureSpec {
        rel_tol: 1e-9,
        abs_tol: 1e-14,
        ..Default::default()
    };
    let oracle_spec = OracleSpec::default();
    let mut ok = true;
    let mut detail = String::new();
    for &(k, beta) in &[(0.5, 1.0), (2.0, 0.5), (1.0, 2.0)] {
        let start = Instant::now();
        let closed = multipliers::gamma_total(k, beta, &scheme, &quad).unwrap();
        let oracle = oracles::gamma_matsubara_oracle(k, beta, &scheme, &oracle_spec).unwrap();
        let elapsed = start.elapsed();
        let rel = (closed - oracle).abs() / oracle.abs();
        if rel > 1e-3 || elapsed > Duration::from_secs(300) {
            ok = false;
        }
        detail.push_str(&format!(
            "(k={k}, β={beta}): closed {closed:e} vs oracle {oracle:e} rel {rel:e} in {elapsed:?}; "
        ));
    }
    report(6, ok, &detail);
}

fn beta_average_oracle<F: Fn(f64) -> f64>(f: F, beta: f64) -> f64 {
    quadrature::gauss_legendre(f, 0.0, beta, 16) / beta
}

#[test]
fn criterion_07_multiplier_oracle_identities() {
    let start = Instant::now();
    let scheme = pv_scheme::scheme_from_masses(1.0, 2.0, 3.0).unwrap();
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
    let mut ok = true;
    let mut detail = String::new();
    for &(k, beta) in &[(0.5, 1.0), (1.0, 0.8)] {
        let mc = multipliers::m_combined(k, beta, &scheme, &quad).unwrap();
        let gb = multipliers::gamma_beta_averaged(k, beta, &scheme, &quad).unwrap();
        let k2_8pi = k * k / (8.0 * std::f64::consts::PI);

        let vector_avg = beta_average_oracle(
            |b| oracles::vector_multiplier_oracle(k, b, &scheme, &oracle_spec).unwrap(),
            beta,
        );
        let vector_expect = k2_8pi * mc;
        let vector_rel = (vector_avg - vector_expect).abs() / vector_expect.abs();

        let scalar_avg = beta_average_oracle(
            |b| oracles::scalar_multiplier_oracle(k, b, &scheme, &oracle_spec).unwrap(),
            beta,
        );
        let scalar_expect = -k2_8pi * mc + gb;
        let scalar_rel = (scalar_avg - scalar_expect).abs() / scalar_expect.abs();

        if vector_rel > 1e-3 || scalar_rel > 1e-3 {
            ok = false;
        }
        detail.push_str(&format!(
            "(k={k}, β={beta}): vector rel {vector_rel:e}, scalar rel {scalar_rel:e}; "
        ));
    }
    let elapsed = start.elapsed();
    ok = ok && elapsed < Duration::from_secs(600);
    report(7, ok, &format!("{detail}{elapsed:?}"));
}

#[test]
fn criterion_08_thermal_suppression() {
    let start = Instant::now();
    let scheme = pv_scheme::scheme_from_masses(1.0, 2.0, 3.0).unwrap();
    let spec = QuadratureSpec::default();
    let beta = 40.0;
    let mut ok = true;
    let mut detail = String::new();
    for &k in &[0.0, 1.0, 5.0] {
        let mt = multipliers::m_thermal(k, beta, &scheme, &spec).unwrap();
        let gt = multipliers::gamma_thermal_part(k, beta, &scheme, &spec)
            .unwrap()
            .sum;
        if mt.abs() > 1e-10 || gt.abs() > 1e-10 {
            ok = false;
        }
        detail.push_str(&format!("k={k}: |M^T|={:e}, |Γ_T|={:e}; ", mt.abs(), gt.abs()));
    }
    let elapsed = start.elapsed();
    ok = ok && elapsed < Duration::from_secs(30);
    report(8, ok, &format!("β·m0 = 40: {detail}{elapsed:?}"));
}

#[test]
fn criterion_09_pv_cancellation_necessity() {
    let start = Instant::now();
    let m = [1.0, 2.0, 3.0];
    let c = [1.0, 0.0, 0.0];
    let spec = OracleSpec {
        l_max: 400,
        p_quadrature: QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            ..Default::default()
        },
        tail_extrapolation: true,
    };
    let diverged = matches!(
        oracles::gamma_matsubara_oracle_raw(&m, &c, 0.5, 1.0, &spec),
        Err(oracles::OracleError::NonConvergentTail { .. })
    );
    let partials = oracles::gamma_oracle_partial_sums_raw(&m, &c, 0.5, 1.0, &spec).unwrap();
    let probes: Vec<f64> = [50usize, 100, 200, 400]
        .iter()
        .map(|&l| partials[l - 1].abs())
        .collect();
    let monotone = probes.windows(2).all(|w| w[1] > w[0]);
    let elapsed = start.elapsed();
    let ok = diverged && monotone && elapsed < Duration::from_secs(120);
    report(
        9,
        ok,
        &format!(
            "divergence error raised: {diverged}; |partial sums| at l_max 50/100/200/400 = \
             {probes:?} monotone: {monotone}; {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_10_field_pipeline() {
    let start = Instant::now();
    let field = fields::gaussian_test_field(1.0, 1.0, [64, 64, 64], [20.0, 20.0, 20.0]).unwrap();
    let hat = fields::spectral_transform(&field);

    let dx: f64 = field
        .box_length()
        .iter()
        .zip(field.n().iter())
        .map(|(l, &n)| l / n as f64)
        .product();
    let real_norm: f64 = field.v().iter().map(|x| x * x * dx).sum();
    let spectral_norm: f64 = hat
        .v_hat()
        .iter()
        .map(|z| z.norm_sqr() * hat.dk_volume())
        .sum();
    let plancherel_rel = (real_norm - spectral_norm).abs() / real_norm;

    let once = fields::coulomb_project(&hat);
    let twice = fields::coulomb_project(&once);
    let mut idempotence: f64 = 0.0;
    for axis in 0..3 {
        for idx in 0..once.len() {
            idempotence =
                idempotence.max((once.a_hat()[axis][idx] - twice.a_hat()[axis][idx]).norm());
        }
    }

    let spectra = fields::field_spectra_and_norms(&once).unwrap();
    let norm_rel = (spectra.l2_f_squared - 8.3525).abs() / 8.3525;

    let elapsed = start.elapsed();
    let ok = plancherel_rel <= 1e-12
        && idempotence <= 1e-15
        && norm_rel <= 5e-3
        && elapsed < Duration::from_secs(30);
    report(
        10,
        ok,
        &format!(
            "Plancherel rel {plancherel_rel:e}, projector idempotence {idempotence:e}, \
             ‖F‖² = {} (rel {norm_rel:e}), {elapsed:?}",
            spectra.l2_f_squared
        ),
    );
}

#[test]
fn criterion_11_f2_assembly() {
    let start = Instant::now();
    let scheme = pv_scheme::scheme_from_masses(1.0, 2.0, 3.0).unwrap();
    let beta = 1.0;
    let spec = QuadratureSpec {
        rel_tol: 1e-7,
        abs_tol: 1e-12,
        ..Default::default()
    };

    // Grid evaluation on the Gaussian electric reference.
    let field = fields::gaussian_test_field(1.0, 1.0, [64, 64, 64], [20.0, 20.0, 20.0]).unwrap();
    let hat = fields::coulomb_project(&fields::spectral_transform(&field));
    let spectra = fields::field_spectra_and_norms(&hat).unwrap();
    let grid_report =
        free_energy::quadratic_free_energy(&hat, &spectra, beta, &scheme, &spec, 1.0).unwrap();

    // Independent radial reference: |Ê(k)|² = |k|² e^{−|k|²} is spherically
    // symmetric, so F₂ collapses to 1D integrals in r = |k|:
    //   me = −(1/2)∫ (M⁰+M^T)(r) r⁴ e^{−r²} dr,
    //   γ  = 4π ∫ Γ̄(r) r² e^{−r²} dr.
    let me_ref = -0.5
        * quadrature::gauss_legendre(
            |r| {
                multipliers::m_combined(r, beta, &scheme, &spec).unwrap()
                    * r.powi(4)
                    * (-r * r).exp()
            },
            0.0,
            8.0,
            32,
        );
    let gamma_ref = 4.0
        * std::f64::consts::PI
        * quadrature::gauss_legendre(
            |r| {
                multipliers::gamma_beta_averaged(r, beta, &scheme, &spec).unwrap()
                    * r
                    * r
                    * (-r * r).exp()
            },
            0.0,
            8.0,
            32,
        );
    let f2_ref = me_ref + gamma_ref;
    let f2_rel = (grid_report.f2_total - f2_ref).abs() / f2_ref.abs();

    // Quadratic amplitude scaling on a cheap grid.
    let small = fields::gaussian_test_field(1.0, 1.0, [8, 8, 8], [10.0, 10.0, 10.0]).unwrap();
    let small_hat = fields::coulomb_project(&fields::spectral_transform(&small));
    let small_spectra = fields::field_spectra_and_norms(&small_hat).unwrap();
    let r1 = free_energy::quadratic_free_energy(&small_hat, &small_spectra, beta, &scheme, &spec, 1.0)
        .unwrap();
    let small3 = fields::gaussian_test_field(3.0, 1.0, [8, 8, 8], [10.0, 10.0, 10.0]).unwrap();
    let small3_hat = fields::coulomb_project(&fields::spectral_transform(&small3));
    let small3_spectra = fields::field_spectra_and_norms(&small3_hat).unwrap();
    let r3 = free_energy::quadratic_free_energy(
        &small3_hat,
        &small3_spectra,
        beta,
        &scheme,
        &spec,
        1.0,
    )
    .unwrap();
    let scaling_rel = (r3.f2_total - 9.0 * r1.f2_total).abs() / (9.0 * r1.f2_total.abs());

    let elapsed = start.elapsed();
    let ok = f2_rel <= 1e-2 && scaling_rel <= 1e-12 && elapsed < Duration::from_secs(300);
    report(
        11,
        ok,
        &format!(
            "grid F₂ {:e} vs radial reference {f2_ref:e} (rel {f2_rel:e}), \
             amplitude-scaling deviation {scaling_rel:e}, {elapsed:?}",
            grid_report.f2_total
        ),
    );
}

#[test]
fn criterion_12_determinism_across_worker_counts() {
    use std::process::Command;
    let binary = env!("CARGO_BIN_EXE_pvfree");
    let dir = tempfile::tempdir().unwrap();
    let scheme_path = dir.path().join("scheme.json");
    let field_path = dir.path().join("field.json");

    let status = Command::new(binary)
        .args([
            "scheme", "--m0", "1", "--m1", "2", "--m2", "3", "--json",
        ])
        .arg(&scheme_path)
        .status()
        .unwrap();
    assert!(status.success());
    let field = fields::gaussian_test_field(1.0, 1.0, [12, 12, 12], [12.0, 12.0, 12.0]).unwrap();
    std::fs::write(&field_path, field.to_document()).unwrap();

    let run = |threads: &str, suffix: &str| -> (Vec<u8>, Vec<u8>) {
        let table = dir.path().join(format!("table_{suffix}.csv"));
        let report = dir.path().join(format!("report_{suffix}.json"));
        let status = Command::new(binary)
            .env("PVFREE_THREADS", threads)
            .args([
                "table", "--quantity", "all", "--beta", "1", "--k-min", "0.2", "--k-max", "3",
                "--samples", "7", "--scheme-file",
            ])
            .arg(&scheme_path)
            .arg("--out")
            .arg(&table)
            .status()
            .unwrap();
        assert!(status.success(), "table run with {threads} workers");
        let status = Command::new(binary)
            .env("PVFREE_THREADS", threads)
            .args(["energy", "--field"])
            .arg(&field_path)
            .args(["--beta", "1", "--scheme-file"])
            .arg(&scheme_path)
            .arg("--out")
            .arg(&report)
            .status()
            .unwrap();
        assert!(status.success(), "energy run with {threads} workers");
        (
            std::fs::read(&table).unwrap(),
            std::fs::read(&report).unwrap(),
        )
    };

    let (table_1, report_1) = run("1", "w1");
    let (table_n, report_n) = run("4", "w4");
    let ok = table_1 == table_n && report_1 == report_n;
    report(
        12,
        ok,
        &format!(
            "table bytes identical: {}, energy report bytes identical: {}",
            table_1 == table_n,
            report_1 == report_n
        ),
    );
}
