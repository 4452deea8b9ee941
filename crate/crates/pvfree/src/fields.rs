//! Discretised four-potentials on periodic grids: file ingestion, the
//! unitary Fourier transform, Coulomb-gauge projection, and the spectra
//! `|Ê(k)|²`, `|B̂(k)|²` that feed the quadratic free energy.
//!
//! Conventions (all fixed for bit-exact artifacts):
//! * arrays are x-fastest, `index = ix + n₁·(iy + n₂·iz)`;
//! * the transform is the unitary `f̂(k) = (2π)^{−3/2} ∫ f e^{−ik·x} dx`,
//!   discretised as `(Δx₁Δx₂Δx₃/(2π)^{3/2}) Σ f e^{−ik·x}`, so Plancherel
//!   holds without stray 2π factors: `Σ|f̂|²Δk = Σ|f|²Δx`;
//! * lattice wavevectors use signed frequencies `k = 2π·f/L`,
//!   `f ∈ {0,…,⌊n/2⌋, ⌊n/2⌋−n+1,…,−1}`.

use base64::Engine;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("unsupported field-file version {found} (expected 1)")]
    UnsupportedVersion { found: u64 },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("operation requires a gauge-projected spectral field")]
    GaugePrecondition,
}

/// A real four-potential `(V, A)` sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: [usize; 3],
    box_length: [f64; 3],
    v: Vec<f64>,
    a: [Vec<f64>; 3],
}

/// The Fourier-space image of a [`GridField`] on the signed-frequency
/// lattice.
#[derive(Debug, Clone)]
pub struct SpectralField {
    n: [usize; 3],
    box_length: [f64; 3],
    v_hat: Vec<Complex<f64>>,
    a_hat: [Vec<Complex<f64>>; 3],
    gauge_projected: bool,
}

/// Everything the `F₂` assembly needs from a projected field: the `E`/`B`
/// power spectra on the lattice and the two field norms of the theorem
/// hypotheses.
#[derive(Debug, Clone)]
pub struct FieldSpectra {
    pub e_spectrum: Vec<f64>,
    pub b_spectrum: Vec<f64>,
    /// `‖F‖² = ‖∇V‖² + ‖curl A‖² = Σ(|Ê|²+|B̂|²)·Δk`.
    pub l2_f_squared: f64,
    /// `‖E‖_{L¹} = Σ|E(x)|·Δx`, from the inverse transform of `Ê`.
    pub l1_e: f64,
}

#[derive(Serialize, Deserialize)]
struct GridMeta {
    n: [usize; 3],
    box_length: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct FieldDocument {
    version: u64,
    grid: GridMeta,
    units: String,
    v: String,
    a: [String; 3],
}

fn decode_array(encoded: &str, expect_len: usize, name: &str) -> Result<Vec<f64>, FieldError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(encoded)
        .map_err(|e| FieldError::MalformedPayload(format!("array {name}: {e}")))?;
    if bytes.len() != 8 * expect_len {
        return Err(FieldError::MalformedPayload(format!(
            "array {name}: got {} bytes, expected {}",
            bytes.len(),
            8 * expect_len
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
        return Err(FieldError::InvalidData(format!(
            "array {name}: non-finite value at index {bad}"
        )));
    }
    Ok(values)
}

fn encode_array(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(8 * values.len());
    for &x in values {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

impl GridField {
    pub fn new(
        n: [usize; 3],
        box_length: [f64; 3],
        v: Vec<f64>,
        a: [Vec<f64>; 3],
    ) -> Result<Self, FieldError> {
        if n.iter().any(|&d| d == 0) {
            return Err(FieldError::InvalidData(format!("grid dims {n:?}")));
        }
        if box_length.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(FieldError::InvalidData(format!(
                "box lengths {box_length:?}"
            )));
        }
        let total = n[0] * n[1] * n[2];
        for (name, arr) in std::iter::once(("v", &v)).chain(["ax", "ay", "az"].iter().copied().zip(a.iter()))
        {
            if arr.len() != total {
                return Err(FieldError::InvalidData(format!(
                    "array {name} has length {}, grid needs {total}",
                    arr.len()
                )));
            }
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(FieldError::InvalidData(format!(
                    "array {name} contains a non-finite value"
                )));
            }
        }
        Ok(GridField {
            n,
            box_length,
            v,
            a,
        })
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn box_length(&self) -> [f64; 3] {
        self.box_length
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn a(&self) -> &[Vec<f64>; 3] {
        &self.a
    }

    /// Serialises to the version-1 field-file JSON (base64 of little-endian
    /// binary64, x-fastest); bit-exact round-trippable through
    /// [`load_grid_field`].
    pub fn to_document(&self) -> String {
        let doc = FieldDocument {
            version: 1,
            grid: GridMeta {
                n: self.n,
                box_length: self.box_length,
            },
            units: "natural".to_string(),
            v: encode_array(&self.v),
            a: [
                encode_array(&self.a[0]),
                encode_array(&self.a[1]),
                encode_array(&self.a[2]),
            ],
        };
        serde_json::to_string(&doc).expect("field document serialisation cannot fail")
    }
}

/// Decodes a version-1 field file.
pub fn load_grid_field(document: &[u8]) -> Result<GridField, FieldError> {
    let doc: FieldDocument = serde_json::from_slice(document)
        .map_err(|e| FieldError::MalformedPayload(format!("field JSON: {e}")))?;
    if doc.version != 1 {
        return Err(FieldError::UnsupportedVersion { found: doc.version });
    }
    let total = doc.grid.n[0] * doc.grid.n[1] * doc.grid.n[2];
    let v = decode_array(&doc.v, total, "v")?;
    let a = [
        decode_array(&doc.a[0], total, "ax")?,
        decode_array(&doc.a[1], total, "ay")?,
        decode_array(&doc.a[2], total, "az")?,
    ];
    GridField::new(doc.grid.n, doc.grid.box_length, v, a)
}

/// Signed lattice frequency for index `i` on an axis of `n` points.
fn signed_frequency(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i <= n / 2 {
        i
    } else {
        i - n
    }
}

/// In-place 3D DFT over an x-fastest array, one axis at a time. `inverse`
/// selects the `e^{+ik·x}` kernel; no normalisation is applied here.
fn dft3(data: &mut [Complex<f64>], n: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    let [nx, ny, nz] = n;

    let mut plan = |len: usize| {
        if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        }
    };

    // x-axis: contiguous lines, one batched call.
    plan(nx).process(data);

    // y-axis: gather strided lines.
    let fft_y = plan(ny);
    let mut line = vec![Complex::default(); ny];
    for iz in 0..nz {
        for ix in 0..nx {
            for iy in 0..ny {
                line[iy] = data[ix + nx * (iy + ny * iz)];
            }
            fft_y.process(&mut line);
            for iy in 0..ny {
                data[ix + nx * (iy + ny * iz)] = line[iy];
            }
        }
    }

    // z-axis.
    let fft_z = plan(nz);
    let mut line = vec![Complex::default(); nz];
    for iy in 0..ny {
        for ix in 0..nx {
            for iz in 0..nz {
                line[iz] = data[ix + nx * (iy + ny * iz)];
            }
            fft_z.process(&mut line);
            for iz in 0..nz {
                data[ix + nx * (iy + ny * iz)] = line[iz];
            }
        }
    }
}

const TWO_PI_POW_3_2: f64 = 15.749609945722419; // (2π)^{3/2}

/// Unitary discrete Fourier transform of the four-potential,
/// `f̂(k) = (Δx₁Δx₂Δx₃/(2π)^{3/2}) Σ f(x) e^{−ik·x}`.
pub fn spectral_transform(field: &GridField) -> SpectralField {
    let n = field.n;
    let scale = field.dx_volume() / TWO_PI_POW_3_2;
    let transform = |values: &[f64]| -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> =
            values.iter().map(|&x| Complex::new(x, 0.0)).collect();
        dft3(&mut data, n, false);
        for z in data.iter_mut() {
            *z *= scale;
        }
        data
    };
    SpectralField {
        n,
        box_length: field.box_length,
        v_hat: transform(&field.v),
        a_hat: [
            transform(&field.a[0]),
            transform(&field.a[1]),
            transform(&field.a[2]),
        ],
        gauge_projected: false,
    }
}

impl GridField {
    fn dx_volume(&self) -> f64 {
        (self.box_length[0] / self.n[0] as f64)
            * (self.box_length[1] / self.n[1] as f64)
            * (self.box_length[2] / self.n[2] as f64)
    }
}

impl SpectralField {
    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn box_length(&self) -> [f64; 3] {
        self.box_length
    }

    pub fn v_hat(&self) -> &[Complex<f64>] {
        &self.v_hat
    }

    pub fn a_hat(&self) -> &[Vec<Complex<f64>>; 3] {
        &self.a_hat
    }

    pub fn gauge_projected(&self) -> bool {
        self.gauge_projected
    }

    /// Reciprocal-lattice cell volume `Δk = (2π)³/(L₁L₂L₃)`.
    pub fn dk_volume(&self) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        (two_pi / self.box_length[0])
            * (two_pi / self.box_length[1])
            * (two_pi / self.box_length[2])
    }

    fn dx_volume(&self) -> f64 {
        (self.box_length[0] / self.n[0] as f64)
            * (self.box_length[1] / self.n[1] as f64)
            * (self.box_length[2] / self.n[2] as f64)
    }

    /// The wavevector at flat index `idx` (x-fastest layout).
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let [nx, ny, _] = self.n;
        let ix = idx % nx;
        let iy = (idx / nx) % ny;
        let iz = idx / (nx * ny);
        let two_pi = 2.0 * std::f64::consts::PI;
        [
            two_pi * signed_frequency(ix, self.n[0]) as f64 / self.box_length[0],
            two_pi * signed_frequency(iy, self.n[1]) as f64 / self.box_length[1],
            two_pi * signed_frequency(iz, self.n[2]) as f64 / self.box_length[2],
        ]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Projects `â` onto divergence-free fields,
/// `â(k) ← â(k) − (k·â(k)) k/|k|²` for `k ≠ 0`; the zero mode is left
/// untouched. Orthogonal projector: idempotent and non-expansive.
pub fn coulomb_project(spectral: &SpectralField) -> SpectralField {
    let mut out = spectral.clone();
    for idx in 0..out.len() {
        let k = out.wavevector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        let dot = k[0] * out.a_hat[0][idx] + k[1] * out.a_hat[1][idx] + k[2] * out.a_hat[2][idx];
        for axis in 0..3 {
            out.a_hat[axis][idx] -= dot * (k[axis] / k2);
        }
    }
    out.gauge_projected = true;
    out
}

/// `E`/`B` spectra and field norms: `Ê = −ik v̂`, `B̂ = ik × â`, with
/// `‖F‖²` from Plancherel on the lattice and `‖E‖_{L¹}` from the inverse
/// transform.
pub fn field_spectra_and_norms(spectral: &SpectralField) -> Result<FieldSpectra, FieldError> {
    if !spectral.gauge_projected {
        return Err(FieldError::GaugePrecondition);
    }
    let total = spectral.len();
    let mut e_spectrum = vec![0.0; total];
    let mut b_spectrum = vec![0.0; total];
    let mut e_hat: [Vec<Complex<f64>>; 3] = [
        vec![Complex::default(); total],
        vec![Complex::default(); total],
        vec![Complex::default(); total],
    ];
    for idx in 0..total {
        let k = spectral.wavevector(idx);
        let v = spectral.v_hat[idx];
        let a = [
            spectral.a_hat[0][idx],
            spectral.a_hat[1][idx],
            spectral.a_hat[2][idx],
        ];
        // Ê = −i k v̂.
        let i = Complex::new(0.0, 1.0);
        let e = [-i * k[0] * v, -i * k[1] * v, -i * k[2] * v];
        // B̂ = i k × â.
        let b = [
            i * (k[1] * a[2] - k[2] * a[1]),
            i * (k[2] * a[0] - k[0] * a[2]),
            i * (k[0] * a[1] - k[1] * a[0]),
        ];
        e_spectrum[idx] = e.iter().map(|z| z.norm_sqr()).sum();
        b_spectrum[idx] = b.iter().map(|z| z.norm_sqr()).sum();
        for axis in 0..3 {
            e_hat[axis][idx] = e[axis];
        }
    }
    let dk = spectral.dk_volume();
    let l2_f_squared: f64 = e_spectrum
        .iter()
        .zip(b_spectrum.iter())
        .map(|(e, b)| (e + b) * dk)
        .sum();

    // ‖E‖_{L¹}: invert Ê with the inverse unitary convention
    // E(x) = (Δk/(2π)^{3/2}) Σ Ê e^{+ik·x}.
    let inv_scale = dk / TWO_PI_POW_3_2;
    for axis in e_hat.iter_mut() {
        dft3(axis, spectral.n, true);
    }
    let dx = spectral.dx_volume();
    let mut l1_e = 0.0;
    for idx in 0..total {
        let mag2: f64 = e_hat.iter().map(|axis| (axis[idx] * inv_scale).norm_sqr()).sum();
        l1_e += mag2.sqrt() * dx;
    }
    Ok(FieldSpectra {
        e_spectrum,
        b_spectrum,
        l2_f_squared,
        l1_e,
    })
}

/// `V(x) = amplitude·e^{−|x−x₀|²/2w²}` centred in the box, `A = 0`. Warns
/// on stderr when the box is too small (< 10 widths) to neglect the
/// periodic images.
pub fn gaussian_test_field(
    amplitude: f64,
    width: f64,
    n: [usize; 3],
    box_length: [f64; 3],
) -> Result<GridField, FieldError> {
    if !(width > 0.0) {
        return Err(FieldError::InvalidData(format!(
            "gaussian width must be positive, got {width}"
        )));
    }
    if box_length.iter().any(|&l| l < 10.0 * width) {
        eprintln!(
            "warning: box {box_length:?} is under 10 gaussian widths ({width}); \
             periodic images will contaminate the spectrum"
        );
    }
    let total = n[0] * n[1] * n[2];
    let mut v = vec![0.0; total];
    let centre = [
        box_length[0] / 2.0,
        box_length[1] / 2.0,
        box_length[2] / 2.0,
    ];
    let dx = [
        box_length[0] / n[0] as f64,
        box_length[1] / n[1] as f64,
        box_length[2] / n[2] as f64,
    ];
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let r2 = (ix as f64 * dx[0] - centre[0]).powi(2)
                    + (iy as f64 * dx[1] - centre[1]).powi(2)
                    + (iz as f64 * dx[2] - centre[2]).powi(2);
                v[ix + n[0] * (iy + n[1] * iz)] =
                    amplitude * (-r2 / (2.0 * width * width)).exp();
            }
        }
    }
    GridField::new(n, box_length, v, [vec![0.0; total], vec![0.0; total], vec![0.0; total]])
}
