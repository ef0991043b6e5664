//! Brute-force time evolution of the full cavity + mirror + continuum
//! Hamiltonian in the single-photon subspace.
//!
//! The continuum is a flat band of `M_c` modes with spacing `dk = 2W / M_c`,
//! each coupled to the cavity with strength `sqrt(gamma_c / 2 pi) sqrt(dk)`.
//! The band is laid out in total energy: in phonon sector `l` the modes carry
//! energies `E_j = -W + j dk` (photon detuning `E_j - l`), so every sector
//! sees the same band and the finite-band level shift is the same for all of
//! them. The cavity block `b^dag b - g0 (b + b^dag)` is kept in the bare number
//! basis. States are propagated with a Chebyshev expansion of `exp(-i H t)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::{LorentzianPacket, SystemParams};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::special::bessel_j_sequence;
use crate::spectra::{real_spectrum_value, LambdaSource};
use crate::spectrum::{Spectrum, DETUNING_MATCH_TOLERANCE};
use crate::state::MechanicalState;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_T_FINAL_DECAY_TIMES: f64 = 15.0;
pub const MIN_T_FINAL_DECAY_TIMES: f64 = 10.0;
/// Cap on the number of basis states `n_d (M_c + 1)`.
pub const DEFAULT_MAX_DIMENSION: usize = 20_000_000;
// Chebyshev argument `a dt` per propagation chunk
const CHUNK_ARGUMENT: f64 = 1500.0;
// terms with |J_k| below this are dropped
const BESSEL_CUTOFF: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumDiscretization<T> {
    window: T,
    modes: usize,
}

impl<T: Real> ContinuumDiscretization<T> {
    /// Half-width `window` (units of omega_m) and mode count. The spacing must
    /// divide omega_m so every phonon sector shares one detuning lattice.
    pub fn new(window: T, modes: usize) -> Result<Self> {
        if !window.is_finite() || window <= T::zero() {
            return Err(invalid("continuum window must be finite and > 0"));
        }
        if modes < 2 {
            return Err(invalid("continuum needs at least two modes"));
        }
        let d = Self { window, modes };
        let per_unit = 1.0 / to_f64(d.spacing());
        let half = to_f64(window) * per_unit;
        if (per_unit - per_unit.round()).abs() > 1e-6 || (half - half.round()).abs() > 1e-6 {
            return Err(invalid(format!(
                "mode spacing {:e} must divide both omega_m and the window",
                to_f64(d.spacing())
            )));
        }
        Ok(d)
    }

    /// Window `W` with spacing `dk`, i.e. `2 W / dk` modes.
    pub fn with_spacing(window: T, spacing: T) -> Result<Self> {
        let modes = (to_f64(window) * 2.0 / to_f64(spacing)).round();
        if !(modes >= 2.0) {
            return Err(invalid("spacing too large for the window"));
        }
        Self::new(window, modes as usize)
    }

    pub fn window(&self) -> T {
        self.window
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn spacing(&self) -> T {
        lit::<T>(2.0) * self.window / from_usize::<T>(self.modes)
    }

    fn steps_per_omega(&self) -> usize {
        (1.0 / to_f64(self.spacing())).round() as usize
    }

    /// Energy of mode `j`.
    pub fn energy(&self, j: usize) -> T {
        -self.window + from_usize::<T>(j) * self.spacing()
    }

    /// Revival time `2 pi / dk` of the discretized band.
    pub fn revival_time(&self) -> T {
        lit::<T>(2.0) * T::pi() / self.spacing()
    }

    /// Checks the band against the system: `dk <= gamma_c / 10` and
    /// `W >= delta + n_d + 10 gamma_c` so every level of the truncated cavity
    /// block lies well inside the band.
    pub fn validate(&self, params: &SystemParams<T>, n_d: usize) -> Result<()> {
        let dk = self.spacing();
        if dk > params.gamma_c() / lit(10.0) {
            return Err(invalid(format!(
                "mode spacing {:e} exceeds gamma_c / 10 = {:e}; increase the mode count",
                to_f64(dk),
                to_f64(params.gamma_c()) / 10.0
            )));
        }
        let needed = params.delta() + from_usize::<T>(n_d) + lit::<T>(10.0) * params.gamma_c();
        if self.window < needed {
            return Err(invalid(format!(
                "window {:e} below delta + n_d + 10 gamma_c = {:e}",
                to_f64(self.window),
                to_f64(needed)
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhotonInput<T> {
    /// Photon starts in the cavity.
    Emission,
    /// Photon starts as a Lorentzian packet in the continuum.
    Scattering(LorentzianPacket<T>),
}

/// Amplitudes over the single-photon basis: `cavity[l]` for `|1>_a |l>_b`
/// and `continuum[l * M_c + j]` for `|0>_a |l>_b |1_j>`.
#[derive(Clone, Debug, PartialEq)]
pub struct WavefunctionState<T: Real> {
    n_d: usize,
    modes: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> WavefunctionState<T> {
    pub fn zeros(n_d: usize, modes: usize) -> Self {
        Self {
            n_d,
            modes,
            data: vec![Complex::new(T::zero(), T::zero()); n_d * (modes + 1)],
        }
    }

    pub fn cavity(&self) -> &[Complex<T>] {
        &self.data[..self.n_d]
    }

    pub fn sector(&self, l: usize) -> &[Complex<T>] {
        let start = self.n_d + l * self.modes;
        &self.data[start..start + self.modes]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn cavity_population(&self) -> T {
        self.cavity().iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    fn sector_mut(&mut self, l: usize) -> &mut [Complex<T>] {
        let start = self.n_d + l * self.modes;
        &mut self.data[start..start + self.modes]
    }

    fn scale(&mut self, s: T) {
        for z in &mut self.data {
            *z = *z * s;
        }
    }
}

/// Single-photon Hamiltonian, applied matrix-free. It is real symmetric.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian<T: Real> {
    params: SystemParams<T>,
    disc: ContinuumDiscretization<T>,
    n_d: usize,
    hopping: T,
    energies: Vec<T>,
    // -g0 sqrt(l + 1) couples cavity levels l and l + 1
    ladder: Vec<T>,
}

pub fn build_hamiltonian<T: Real>(
    params: &SystemParams<T>,
    disc: &ContinuumDiscretization<T>,
    n_d: usize,
    max_dimension: usize,
) -> Result<SparseHamiltonian<T>> {
    if n_d == 0 {
        return Err(invalid("cavity truncation n_d must be >= 1"));
    }
    let dim = n_d.checked_mul(disc.modes() + 1).unwrap_or(usize::MAX);
    if dim > max_dimension {
        return Err(Error::Resource(format!(
            "single-photon basis has {dim} states, above the cap of {max_dimension}"
        )));
    }
    let hopping = params.continuum_coupling() * disc.spacing().sqrt();
    Ok(SparseHamiltonian {
        params: *params,
        disc: *disc,
        n_d,
        hopping,
        energies: (0..disc.modes()).map(|j| disc.energy(j)).collect(),
        ladder: (0..n_d.saturating_sub(1))
            .map(|l| -params.g0() * from_usize::<T>(l + 1).sqrt())
            .collect(),
    })
}

impl<T: Real> SparseHamiltonian<T> {
    pub fn dim(&self) -> usize {
        self.n_d * (self.disc.modes() + 1)
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    pub fn discretization(&self) -> &ContinuumDiscretization<T> {
        &self.disc
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    /// Cavity-to-mode hopping `sqrt(gamma_c / 2 pi) sqrt(dk)`.
    pub fn hopping(&self) -> T {
        self.hopping
    }

    /// `n_d x n_d` block `b^dag b - g0 (b + b^dag)` in the bare number basis.
    pub fn cavity_block(&self) -> DMatrix<T> {
        let mut h = DMatrix::zeros(self.n_d, self.n_d);
        for l in 0..self.n_d {
            h[(l, l)] = from_usize(l);
        }
        for (l, &c) in self.ladder.iter().enumerate() {
            h[(l, l + 1)] = c;
            h[(l + 1, l)] = c;
        }
        h
    }

    /// Dense matrix, for small test systems only.
    pub fn to_dense(&self) -> DMatrix<T> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        let cav = self.cavity_block();
        for i in 0..self.n_d {
            for j in 0..self.n_d {
                h[(i, j)] = cav[(i, j)];
            }
        }
        let m = self.disc.modes();
        for l in 0..self.n_d {
            for j in 0..m {
                let idx = self.n_d + l * m + j;
                h[(idx, idx)] = self.energies[j];
                h[(l, idx)] = self.hopping;
                h[(idx, l)] = self.hopping;
            }
        }
        h
    }

    /// `y = H x`.
    pub fn apply(&self, x: &WavefunctionState<T>, y: &mut WavefunctionState<T>) {
        let m = self.disc.modes();
        let n_d = self.n_d;
        for l in 0..n_d {
            let a = x.data[l];
            let mut sum = Complex::new(T::zero(), T::zero());
            let src = &x.data[n_d + l * m..n_d + (l + 1) * m];
            let dst = &mut y.data[n_d + l * m..n_d + (l + 1) * m];
            for j in 0..m {
                sum += src[j];
                dst[j] = src[j] * self.energies[j] + a * self.hopping;
            }
            let mut v = a * from_usize::<T>(l) + sum * self.hopping;
            if l > 0 {
                v += x.data[l - 1] * self.ladder[l - 1];
            }
            if l + 1 < n_d {
                v += x.data[l + 1] * self.ladder[l];
            }
            y.data[l] = v;
        }
    }

    /// Interval containing the spectrum: Gershgorin bounds on the diagonal
    /// blocks widened by the coupling norm `hopping sqrt(M_c)` (Weyl).
    pub fn spectral_bounds(&self) -> (T, T) {
        let mut lo = self.energies[0];
        let mut hi = *self.energies.last().unwrap();
        for l in 0..self.n_d {
            let mut radius = T::zero();
            if l > 0 {
                radius += self.ladder[l - 1].abs();
            }
            if l + 1 < self.n_d {
                radius += self.ladder[l].abs();
            }
            lo = lo.min(from_usize::<T>(l) - radius);
            hi = hi.max(from_usize::<T>(l) + radius);
        }
        let coupling = self.hopping * from_usize::<T>(self.disc.modes()).sqrt();
        let pad = (hi - lo) * lit(1e-6);
        (lo - coupling - pad, hi + coupling + pad)
    }

    // next = 2 (H - c)/a cur - prev, written over prev; acc += coef next.
    // cur_sums[l] = sum_j cur sector l; fills next_sums likewise.
    #[allow(clippy::too_many_arguments)]
    fn chebyshev_step(
        &self,
        cur: &[Complex<T>],
        cur_sums: &[Complex<T>],
        prev: &mut [Complex<T>],
        acc: &mut [Complex<T>],
        coef: Complex<T>,
        next_sums: &mut [Complex<T>],
        scaled_energy: &[T],
        centre: T,
        inv_half_width: T,
    ) {
        let m = self.disc.modes();
        let n_d = self.n_d;
        let two_over_a = inv_half_width + inv_half_width;
        let hop2 = self.hopping * two_over_a;
        for l in 0..n_d {
            let mut v = cur[l] * (from_usize::<T>(l) - centre) + cur_sums[l] * self.hopping;
            if l > 0 {
                v += cur[l - 1] * self.ladder[l - 1];
            }
            if l + 1 < n_d {
                v += cur[l + 1] * self.ladder[l];
            }
            let next = v * two_over_a - prev[l];
            prev[l] = next;
            acc[l] += coef * next;
        }
        for l in 0..n_d {
            let drive = cur[l] * hop2;
            let base = n_d + l * m;
            let c = &cur[base..base + m];
            let p = &mut prev[base..base + m];
            let r = &mut acc[base..base + m];
            let mut sum = Complex::new(T::zero(), T::zero());
            for j in 0..m {
                let next = c[j] * scaled_energy[j] + drive - p[j];
                p[j] = next;
                r[j] += coef * next;
                sum += next;
            }
            next_sums[l] = sum;
        }
    }

    /// `exp(-i H dt) psi` by a Chebyshev expansion truncated where the
    /// Bessel coefficients fall below round-off. Returns the number of terms.
    fn propagate_chunk(&self, psi: &mut WavefunctionState<T>, dt: T, work: &mut Workspace<T>) -> usize {
        let (lo, hi) = self.spectral_bounds();
        let half: T = lit(0.5);
        let centre = (hi + lo) * half;
        let a = (hi - lo) * half;
        let z = a * dt;
        let zf = to_f64(z);
        let k_guess = (zf + 12.0 * zf.cbrt() + 60.0).ceil() as usize;
        let bessel = bessel_j_sequence(z, k_guess);
        let cutoff: T = lit(BESSEL_CUTOFF);
        let mut k_max = bessel.len() - 1;
        while k_max > 1 && bessel[k_max].abs() < cutoff && from_usize::<T>(k_max) > z {
            k_max -= 1;
        }
        let inv_a = T::one() / a;
        let scaled: Vec<T> = self
            .energies
            .iter()
            .map(|&e| (e - centre) * (inv_a + inv_a))
            .collect();
        let zero = Complex::new(T::zero(), T::zero());
        let n_d = self.n_d;
        let m = self.disc.modes();

        // phi_0 = psi, phi_1 = (H - c)/a psi
        work.prev.data.copy_from_slice(&psi.data);
        self.apply(psi, &mut work.cur);
        for (v, &p) in work.cur.data.iter_mut().zip(&psi.data) {
            *v = (*v - p * centre) * inv_a;
        }
        let coef = |k: usize| -> Complex<T> {
            // (2 - delta_k0) (-i)^k J_k(z)
            let w = if k == 0 { bessel[0] } else { bessel[k] + bessel[k] };
            match k % 4 {
                0 => Complex::new(w, T::zero()),
                1 => Complex::new(T::zero(), -w),
                2 => Complex::new(-w, T::zero()),
                _ => Complex::new(T::zero(), w),
            }
        };
        let c0 = coef(0);
        let c1 = coef(1);
        for ((r, &p0), &p1) in work.acc.data.iter_mut().zip(&work.prev.data).zip(&work.cur.data) {
            *r = p0 * c0 + p1 * c1;
        }
        for l in 0..n_d {
            let s = &work.cur.data[n_d + l * m..n_d + (l + 1) * m];
            work.sums[l] = s.iter().fold(zero, |acc, &x| acc + x);
        }
        for k in 2..=k_max {
            self.chebyshev_step(
                &work.cur.data,
                &work.sums,
                &mut work.prev.data,
                &mut work.acc.data,
                coef(k),
                &mut work.next_sums,
                &scaled,
                centre,
                inv_a,
            );
            std::mem::swap(&mut work.cur, &mut work.prev);
            std::mem::swap(&mut work.sums, &mut work.next_sums);
        }
        // global phase exp(-i c dt)
        let (s, c) = (centre * dt).sin_cos();
        let phase = Complex::new(c, -s);
        for (dst, &src) in psi.data.iter_mut().zip(&work.acc.data) {
            *dst = src * phase;
        }
        k_max + 1
    }
}

struct Workspace<T: Real> {
    prev: WavefunctionState<T>,
    cur: WavefunctionState<T>,
    acc: WavefunctionState<T>,
    sums: Vec<Complex<T>>,
    next_sums: Vec<Complex<T>>,
}

impl<T: Real> Workspace<T> {
    fn new(n_d: usize, modes: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            prev: WavefunctionState::zeros(n_d, modes),
            cur: WavefunctionState::zeros(n_d, modes),
            acc: WavefunctionState::zeros(n_d, modes),
            sums: vec![zero; n_d],
            next_sums: vec![zero; n_d],
        }
    }
}

/// Diagnostics of one propagation, serializable for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub t_final: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Largest `|norm(t) - norm(0)|` over the chunk boundaries.
    pub max_norm_drift: f64,
    pub cavity_population: f64,
    pub revival_time: f64,
    /// `1 - t_final / revival_time`.
    pub revival_margin: f64,
    pub chebyshev_terms: usize,
    pub chunks: usize,
}

fn check_revival<T: Real>(h: &SparseHamiltonian<T>, t: T) -> Result<()> {
    let revival = h.disc.revival_time();
    if t >= revival {
        return Err(invalid(format!(
            "t_final {:e} is not below the revival time 2 pi / dk = {:e}",
            to_f64(t),
            to_f64(revival)
        )));
    }
    Ok(())
}

/// Propagates `init` to every time in `times` (ascending, starting at or
/// after 0). Fails if the norm drifts by more than `10 tol`.
pub fn evolve_times<T: Real>(
    h: &SparseHamiltonian<T>,
    init: &WavefunctionState<T>,
    times: &[T],
    tol: T,
) -> Result<(Vec<WavefunctionState<T>>, EvolutionReport)> {
    if init.n_d != h.n_d || init.modes != h.disc.modes() {
        return Err(invalid("state shape does not match the Hamiltonian"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().map_or(false, |&t| t < T::zero()) {
        return Err(invalid("evolution times must be ascending and >= 0"));
    }
    let t_end = times.last().copied().unwrap_or(T::zero());
    check_revival(h, t_end)?;
    let (lo, hi) = h.spectral_bounds();
    let a = (hi - lo) * lit(0.5);
    let max_dt = lit::<T>(CHUNK_ARGUMENT) / a;

    let mut work = Workspace::new(h.n_d, h.disc.modes());
    let mut psi = init.clone();
    let norm0 = psi.norm_sqr();
    let mut t = T::zero();
    let mut out = Vec::with_capacity(times.len());
    let mut drift = T::zero();
    let mut terms = 0;
    let mut chunks = 0;
    let limit = tol * lit(10.0);
    for &target in times {
        while t < target {
            let dt = (target - t).min(max_dt);
            terms += h.propagate_chunk(&mut psi, dt, &mut work);
            chunks += 1;
            t = if target - t <= max_dt { target } else { t + dt };
            let d = (psi.norm_sqr() - norm0).abs();
            drift = drift.max(d);
            if d > limit {
                return Err(Error::Integrator(format!(
                    "norm drift {:e} at t = {:e} exceeds 10 tol = {:e}",
                    to_f64(d),
                    to_f64(t),
                    to_f64(limit)
                )));
            }
        }
        out.push(psi.clone());
    }
    let revival = h.disc.revival_time();
    let report = EvolutionReport {
        t_final: to_f64(t_end),
        initial_norm: to_f64(norm0),
        final_norm: to_f64(psi.norm_sqr()),
        max_norm_drift: to_f64(drift),
        cavity_population: to_f64(psi.cavity_population()),
        revival_time: to_f64(revival),
        revival_margin: 1.0 - to_f64(t_end / revival),
        chebyshev_terms: terms,
        chunks,
    };
    Ok((out, report))
}

pub fn evolve<T: Real>(
    h: &SparseHamiltonian<T>,
    init: &WavefunctionState<T>,
    t_final: T,
    tol: T,
) -> Result<(WavefunctionState<T>, EvolutionReport)> {
    let (mut states, report) = evolve_times(h, init, &[t_final], tol)?;
    Ok((states.pop().unwrap(), report))
}

/// Initial state for the mirror in `|n0>` and the given photon input.
pub fn initial_state<T: Real>(
    h: &SparseHamiltonian<T>,
    input: &PhotonInput<T>,
    n0: usize,
) -> Result<WavefunctionState<T>> {
    if n0 >= h.n_d {
        return Err(invalid(format!("mechanical state {n0} outside n_d = {}", h.n_d)));
    }
    let m = h.disc.modes();
    let mut psi = WavefunctionState::zeros(h.n_d, m);
    match input {
        PhotonInput::Emission => psi.data[n0] = Complex::new(T::one(), T::zero()),
        PhotonInput::Scattering(packet) => {
            let (d0, eps) = (packet.center(), packet.width());
            let detuning_lo = h.disc.energy(0) - from_usize::<T>(n0);
            let detuning_hi = h.disc.energy(m - 1) - from_usize::<T>(n0);
            if d0 <= detuning_lo || d0 >= detuning_hi {
                return Err(invalid(format!(
                    "packet centre {:e} outside the band of sector {n0}",
                    to_f64(d0)
                )));
            }
            let pref = (eps / T::pi()).sqrt() * h.disc.spacing().sqrt();
            let sector = psi.sector_mut(n0);
            for (j, b) in sector.iter_mut().enumerate() {
                let d = h.disc.energy(j) - from_usize::<T>(n0);
                *b = Complex::new(pref, T::zero()) / Complex::new(d - d0, eps);
            }
            let norm = psi.norm_sqr();
            psi.scale(T::one() / norm.sqrt());
        }
    }
    Ok(psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings<T> {
    pub n_d: usize,
    /// Defaults to `15 / gamma_c` (emission) or `15 / gamma_c + 10 / epsilon`
    /// (scattering).
    pub t_final: Option<T>,
    pub tol: T,
    pub max_dimension: usize,
}

impl<T: Real> OracleSettings<T> {
    pub fn new(n_d: usize) -> Self {
        Self {
            n_d,
            t_final: None,
            tol: lit(DEFAULT_TOLERANCE),
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

/// Long-time outgoing amplitudes for one initial Fock state.
#[derive(Debug)]
pub struct AmplitudeSet<T: Real> {
    pub state: WavefunctionState<T>,
    pub report: EvolutionReport,
}

/// Machine-readable summary of everything the oracle has evolved so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub window: f64,
    pub modes: usize,
    pub spacing: f64,
    pub n_d: usize,
    pub t_final: f64,
    pub tol: f64,
    pub revival_time: f64,
    pub revival_margin: f64,
    pub max_norm_drift: f64,
    pub max_cavity_population: f64,
    pub evolutions: Vec<(usize, EvolutionReport)>,
}

/// Spectrum generator backed by time evolution. Amplitude sets are cached
/// per initial Fock state.
pub struct Oracle<T: Real> {
    hamiltonian: SparseHamiltonian<T>,
    input: PhotonInput<T>,
    t_final: T,
    tol: T,
    cache: Mutex<HashMap<usize, Arc<AmplitudeSet<T>>>>,
}

impl<T: Real> Oracle<T> {
    pub fn new(
        params: &SystemParams<T>,
        disc: &ContinuumDiscretization<T>,
        input: PhotonInput<T>,
        settings: &OracleSettings<T>,
    ) -> Result<Self> {
        disc.validate(params, settings.n_d)?;
        if !(settings.tol > T::zero()) {
            return Err(invalid("oracle tolerance must be > 0"));
        }
        let decay = T::one() / params.gamma_c();
        let t_final = match (settings.t_final, &input) {
            (Some(t), _) => t,
            (None, PhotonInput::Emission) => decay * lit(DEFAULT_T_FINAL_DECAY_TIMES),
            (None, PhotonInput::Scattering(p)) => {
                decay * lit(DEFAULT_T_FINAL_DECAY_TIMES) + lit::<T>(10.0) / p.width()
            }
        };
        if t_final < decay * lit(MIN_T_FINAL_DECAY_TIMES) {
            return Err(invalid(format!(
                "t_final {:e} is shorter than 10 / gamma_c",
                to_f64(t_final)
            )));
        }
        let hamiltonian = build_hamiltonian(params, disc, settings.n_d, settings.max_dimension)?;
        check_revival(&hamiltonian, t_final)?;
        Ok(Self {
            hamiltonian,
            input,
            t_final,
            tol: settings.tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian<T> {
        &self.hamiltonian
    }

    pub fn input(&self) -> &PhotonInput<T> {
        &self.input
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    /// Evolves `|n0>` (once; later calls hit the cache).
    pub fn amplitudes(&self, n0: usize) -> Result<Arc<AmplitudeSet<T>>> {
        if let Some(hit) = self.cache.lock().unwrap().get(&n0) {
            return Ok(Arc::clone(hit));
        }
        let psi0 = initial_state(&self.hamiltonian, &self.input, n0)?;
        let (state, report) = evolve(&self.hamiltonian, &psi0, self.t_final, self.tol)?;
        let leak_bound = (-self.hamiltonian.params.gamma_c() * self.t_final * lit(0.5)).exp();
        if report.cavity_population > to_f64(leak_bound + self.tol) {
            return Err(Error::Integrator(format!(
                "cavity population {:e} at t_final exceeds exp(-gamma_c t / 2) = {:e}",
                report.cavity_population,
                to_f64(leak_bound)
            )));
        }
        let set = Arc::new(AmplitudeSet { state, report });
        let mut cache = self.cache.lock().unwrap();
        Ok(Arc::clone(cache.entry(n0).or_insert(set)))
    }

    /// Detunings at which every phonon sector has a mode:
    /// `[-W, W - dk - (n_d - 1)]`.
    pub fn grid(&self) -> Vec<T> {
        let disc = &self.hamiltonian.disc;
        let count = disc.modes() - (self.hamiltonian.n_d - 1) * disc.steps_per_omega();
        (0..count).map(|j| disc.energy(j)).collect()
    }

    // mode index in sector l for photon detuning `detuning`
    fn mode_index(&self, l: usize, detuning: T) -> Option<usize> {
        let disc = &self.hamiltonian.disc;
        let pos = to_f64((detuning + from_usize::<T>(l) + disc.window) / disc.spacing());
        let j = pos.round();
        let tol = DETUNING_MATCH_TOLERANCE / to_f64(disc.spacing());
        if (pos - j).abs() > tol || j < 0.0 || j >= disc.modes() as f64 {
            return None;
        }
        Some(j as usize)
    }

    fn lambda_from_sets(
        &self,
        sets: &[Arc<AmplitudeSet<T>>],
        detuning: T,
    ) -> Result<DMatrix<Complex<T>>> {
        let dim = sets.len();
        let n_d = self.hamiltonian.n_d;
        let inv_dk = T::one() / self.hamiltonian.disc.spacing();
        let mut idx = Vec::with_capacity(n_d);
        for l in 0..n_d {
            idx.push(
                self.mode_index(l, detuning)
                    .ok_or_else(|| Error::MissingPoints(vec![to_f64(detuning)]))?,
            );
        }
        let mut lam = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
        for n in 0..dim {
            let mut diag = T::zero();
            for (l, &j) in idx.iter().enumerate() {
                diag += sets[n].state.sector(l)[j].norm_sqr();
            }
            lam[(n, n)] = Complex::new(diag * inv_dk, T::zero());
            for m in (n + 1)..dim {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (l, &j) in idx.iter().enumerate() {
                    acc += sets[n].state.sector(l)[j].conj() * sets[m].state.sector(l)[j];
                }
                lam[(n, m)] = acc * inv_dk;
                lam[(m, n)] = (acc * inv_dk).conj();
            }
        }
        Ok(lam)
    }

    fn sets(&self, dim: usize) -> Result<Vec<Arc<AmplitudeSet<T>>>> {
        (0..dim).map(|n| self.amplitudes(n)).collect()
    }

    /// Spectrum of `state` on `grid` (defaults to [`Oracle::grid`]). Diagonal
    /// states only evolve and combine the populated Fock components.
    pub fn spectrum(&self, state: &MechanicalState<T>, grid: Option<&[T]>) -> Result<Spectrum<T>> {
        let owned;
        let grid = match grid {
            Some(g) => g,
            None => {
                owned = self.grid();
                &owned
            }
        };
        let dim = state.dim();
        if dim > self.hamiltonian.n_d {
            return Err(invalid(format!(
                "state dimension {dim} exceeds oracle n_d = {}",
                self.hamiltonian.n_d
            )));
        }
        let mut missing = Vec::new();
        let mut indices = Vec::with_capacity(grid.len());
        for &d in grid {
            let idx: Option<Vec<usize>> =
                (0..self.hamiltonian.n_d).map(|l| self.mode_index(l, d)).collect();
            match idx {
                Some(i) => indices.push(i),
                None => missing.push(to_f64(d)),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingPoints(missing));
        }
        let inv_dk = T::one() / self.hamiltonian.disc.spacing();
        let values = match state {
            MechanicalState::Diagonal(p) => {
                let mut values = vec![T::zero(); grid.len()];
                for (n, &w) in p.values().iter().enumerate() {
                    if w == T::zero() {
                        continue;
                    }
                    let set = self.amplitudes(n)?;
                    for (v, idx) in values.iter_mut().zip(&indices) {
                        let s = idx
                            .iter()
                            .enumerate()
                            .fold(T::zero(), |acc, (l, &j)| acc + set.state.sector(l)[j].norm_sqr());
                        *v += w * s * inv_dk;
                    }
                }
                values
            }
            MechanicalState::General(rho) => {
                let sets = self.sets(dim)?;
                grid.iter()
                    .map(|&d| {
                        let lam = self.lambda_from_sets(&sets, d)?;
                        real_spectrum_value(rho, &lam, d)
                    })
                    .collect::<Result<Vec<T>>>()?
            }
        };
        Spectrum::new(grid.to_vec(), values)
    }

    pub fn report(&self) -> OracleReport {
        let disc = &self.hamiltonian.disc;
        let cache = self.cache.lock().unwrap();
        let mut evolutions: Vec<(usize, EvolutionReport)> =
            cache.iter().map(|(&n, s)| (n, s.report.clone())).collect();
        evolutions.sort_by_key(|(n, _)| *n);
        let revival = to_f64(disc.revival_time());
        OracleReport {
            window: to_f64(disc.window()),
            modes: disc.modes(),
            spacing: to_f64(disc.spacing()),
            n_d: self.hamiltonian.n_d,
            t_final: to_f64(self.t_final),
            tol: to_f64(self.tol),
            revival_time: revival,
            revival_margin: 1.0 - to_f64(self.t_final) / revival,
            max_norm_drift: evolutions.iter().fold(0.0, |a, (_, r)| a.max(r.max_norm_drift)),
            max_cavity_population: evolutions
                .iter()
                .fold(0.0, |a, (_, r)| a.max(r.cavity_population)),
            evolutions,
        }
    }
}

impl<T: Real> LambdaSource<T> for Oracle<T> {
    fn lambda_matrix(&self, dim: usize, detuning: T) -> Result<DMatrix<Complex<T>>> {
        if dim > self.hamiltonian.n_d {
            return Err(invalid("dimension exceeds oracle n_d"));
        }
        let sets = self.sets(dim)?;
        self.lambda_from_sets(&sets, detuning)
    }

    fn engine(&self) -> String {
        let disc = &self.hamiltonian.disc;
        let kind = match self.input {
            PhotonInput::Emission => "emission".to_string(),
            PhotonInput::Scattering(p) => format!(
                "scattering(center={}, width={})",
                to_f64(p.center()),
                to_f64(p.width())
            ),
        };
        format!(
            "oracle({kind}, W={}, M_c={}, n_d={}, t_final={})",
            to_f64(disc.window()),
            disc.modes(),
            self.hamiltonian.n_d,
            to_f64(self.t_final)
        )
    }
}

/// One-shot spectrum of `state` on the oracle's native grid.
pub fn oracle_spectrum<T: Real>(
    params: &SystemParams<T>,
    disc: &ContinuumDiscretization<T>,
    state: &MechanicalState<T>,
    input: PhotonInput<T>,
    settings: &OracleSettings<T>,
) -> Result<Spectrum<T>> {
    Oracle::new(params, disc, input, settings)?.spectrum(state, None)
}
