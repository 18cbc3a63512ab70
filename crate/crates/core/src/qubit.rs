//! Exact two-level-system states and propagators in the rotating frame.
//!
//! Conventions, fixed throughout the crate:
//!
//! * Basis order is (|0⟩, |1⟩). |0⟩ sits at the south pole of the Bloch
//!   sphere (z = −1) and |1⟩ at the north pole.
//! * Spin matrices in that basis are `σx = [[0,1],[1,0]]`,
//!   `σy = [[0,−i],[i,0]]`, `σz = [[−1,0],[0,1]]`, so that the Bloch vector
//!   is `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
//! * A rotation by `θ` about `n` is `exp(−iθ n·σ/2)`. With these matrices a
//!   π/2 rotation about y takes |0⟩ to (|0⟩+|1⟩)/√2 and a second one
//!   completes the flip to |1⟩.
//! * Free evolution under detuning Δ is `exp(+iΔt σz/2)` (the Hamiltonian
//!   is `−Δσz/2`, ħ = 1), which advances the equatorial phase
//!   φ = arg(a₁) − arg(a₀) by +Δt.
//!
//! All frequencies are angular (rad/s). The carrier ω₀ never appears: the
//! counter-rotating drive term is dropped, so these propagators are exact
//! only within the rotating-wave approximation.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance for the normalization checks on [`PureState`].
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit_vector(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// A normalized pure state a₀|0⟩ + a₁|1⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState {
    amp0: C64,
    amp1: C64,
}

impl PureState {
    /// Fails unless |a₀|² + |a₁|² = 1 within [`NORM_TOLERANCE`]. Use
    /// [`PureState::normalized`] to rescale explicitly.
    pub fn new(amp0: C64, amp1: C64) -> Result<Self> {
        let norm = amp0.norm_sqr() + amp1.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(Self { amp0, amp1 })
    }

    pub fn normalized(amp0: C64, amp1: C64) -> Result<Self> {
        let norm = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self {
            amp0: amp0 / norm,
            amp1: amp1 / norm,
        })
    }

    pub fn ground() -> Self {
        Self { amp0: ONE, amp1: ZERO }
    }

    pub fn excited() -> Self {
        Self { amp0: ZERO, amp1: ONE }
    }

    /// (|0⟩ + e^{iφ}|1⟩)/√2.
    pub fn equator(phase: f64) -> Self {
        Self {
            amp0: C64::new(FRAC_1_SQRT_2, 0.0),
            amp1: C64::from_polar(FRAC_1_SQRT_2, phase),
        }
    }

    pub fn amp0(&self) -> C64 {
        self.amp0
    }

    pub fn amp1(&self) -> C64 {
        self.amp1
    }

    /// arg(a₁) − arg(a₀); the equatorial longitude on the Bloch sphere.
    pub fn relative_phase(&self) -> f64 {
        (self.amp1 * self.amp0.conj()).arg()
    }

    pub fn with_global_phase(self, phase: f64) -> Self {
        let w = C64::from_polar(1.0, phase);
        Self {
            amp0: self.amp0 * w,
            amp1: self.amp1 * w,
        }
    }
}

/// A single-qubit density matrix.
///
/// Only ρ₀₀, ρ₁₁ and ρ₀₁ are stored; ρ₁₀ = conj(ρ₀₁) holds by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    rho00: f64,
    rho11: f64,
    rho01: C64,
}

impl DensityMatrix {
    pub fn from_pure(state: &PureState) -> Self {
        Self {
            rho00: state.amp0.norm_sqr(),
            rho11: state.amp1.norm_sqr(),
            rho01: state.amp0 * state.amp1.conj(),
        }
    }

    pub fn ground() -> Self {
        Self::from_pure(&PureState::ground())
    }

    pub fn excited() -> Self {
        Self::from_pure(&PureState::excited())
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho00: 0.5,
            rho11: 0.5,
            rho01: ZERO,
        }
    }

    /// Builds ρ from its entries, checking trace and positivity.
    pub fn from_entries(rho00: f64, rho11: f64, rho01: C64) -> Result<Self> {
        let rho = Self { rho00, rho11, rho01 };
        rho.check_physical(1e-12)?;
        Ok(rho)
    }

    pub fn from_bloch(v: BlochVector) -> Result<Self> {
        if v.length() > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!(
                "Bloch vector length {} exceeds 1",
                v.length()
            )));
        }
        Ok(Self {
            rho00: 0.5 * (1.0 - v.z),
            rho11: 0.5 * (1.0 + v.z),
            rho01: C64::new(0.5 * v.x, -0.5 * v.y),
        })
    }

    pub fn rho00(&self) -> f64 {
        self.rho00
    }

    pub fn rho11(&self) -> f64 {
        self.rho11
    }

    pub fn rho01(&self) -> C64 {
        self.rho01
    }

    pub fn rho10(&self) -> C64 {
        self.rho01.conj()
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [
            [C64::new(self.rho00, 0.0), self.rho01],
            [self.rho01.conj(), C64::new(self.rho11, 0.0)],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.rho00 + self.rho11
    }

    /// tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.rho00 * self.rho00 + self.rho11 * self.rho11 + 2.0 * self.rho01.norm_sqr()
    }

    pub fn determinant(&self) -> f64 {
        self.rho00 * self.rho11 - self.rho01.norm_sqr()
    }

    /// Magnitude of the off-diagonal element.
    pub fn coherence(&self) -> f64 {
        self.rho01.norm()
    }

    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let values = [self.rho00, self.rho11, self.rho01.re, self.rho01.im];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite density matrix entry".into()));
        }
        if (self.trace() - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {} != 1", self.trace())));
        }
        if self.determinant() < -tol || self.rho00 < -tol || self.rho11 < -tol {
            return Err(Error::InvalidState("density matrix is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &Propagator) -> Self {
        let m = self.matrix();
        let um = mat_mul(&u.m, &m);
        let out = mat_mul(&um, &u.dagger().m);
        Self {
            rho00: out[0][0].re,
            rho11: out[1][1].re,
            rho01: out[0][1],
        }
    }
}

/// Bloch-sphere coordinates (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Equatorial longitude atan2(y, x).
    pub fn longitude(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// A 2×2 unitary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator {
    m: [[C64; 2]; 2],
}

impl Propagator {
    pub fn identity() -> Self {
        Self {
            m: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    /// exp(−iθ n·σ/2) for a unit vector `n`.
    pub fn rotation(n: [f64; 3], angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        let [nx, ny, nz] = n;
        // n·σ = [[-nz, nx - i ny], [nx + i ny, nz]]
        Self {
            m: [
                [C64::new(c, s * nz), C64::new(-s * ny, -s * nx)],
                [C64::new(s * ny, -s * nx), C64::new(c, -s * nz)],
            ],
        }
    }

    pub fn about(axis: Axis, angle: f64) -> Self {
        Self::rotation(axis.unit_vector(), angle)
    }

    /// Free evolution exp(+iΔt σz/2).
    pub fn free(detuning: f64, t: f64) -> Self {
        Self::phase(detuning * t)
    }

    /// Free evolution that accumulates equatorial phase `phi`.
    pub fn phase(phi: f64) -> Self {
        Self::rotation([0.0, 0.0, 1.0], -phi)
    }

    /// Propagator of H = −(Δ/2)σz + (Ω/2)σ_axis for time `t`.
    pub fn driven(axis: Axis, rabi_frequency: f64, detuning: f64, t: f64) -> Self {
        let [ax, ay, az] = axis.unit_vector();
        let h = [
            rabi_frequency * ax,
            rabi_frequency * ay,
            rabi_frequency * az - detuning,
        ];
        let omega = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        if omega == 0.0 {
            return Self::identity();
        }
        Self::rotation([h[0] / omega, h[1] / omega, h[2] / omega], omega * t)
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn dagger(&self) -> Self {
        let m = self.m;
        Self {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    /// `self` applied after `first`.
    pub fn then_after(&self, first: &Propagator) -> Self {
        Self {
            m: mat_mul(&self.m, &first.m),
        }
    }

    pub fn apply(&self, state: &PureState) -> PureState {
        let m = self.m;
        PureState {
            amp0: m[0][0] * state.amp0 + m[0][1] * state.amp1,
            amp1: m[1][0] * state.amp0 + m[1][1] * state.amp1,
        }
    }
}

fn mat_mul(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Free precession under a constant detuning (rad/s) for `t` seconds.
///
/// Populations are untouched; the phase of ρ₁₀ advances by Δ·t.
pub fn free_evolve(state: &DensityMatrix, detuning: f64, t: f64) -> DensityMatrix {
    accumulate_phase(state, detuning * t)
}

/// Free precession by a given accumulated phase.
pub fn accumulate_phase(state: &DensityMatrix, phi: f64) -> DensityMatrix {
    // diagonal propagator: ρ01 picks up e^{-iφ}
    DensityMatrix {
        rho00: state.rho00,
        rho11: state.rho11,
        rho01: state.rho01 * C64::from_polar(1.0, -phi),
    }
}

/// Ideal (instantaneous) rotation exp(−i·angle·σ_axis/2).
pub fn rotate(state: &DensityMatrix, axis: Axis, angle: f64) -> DensityMatrix {
    state.conjugate(&Propagator::about(axis, angle))
}

/// Resonant driving about y with Rabi frequency Ω at detuning Δ for `t`.
///
/// At Δ = 0 starting from |0⟩ the |1⟩ population is sin²(Ωt/2).
pub fn rabi_oscillation(state: &DensityMatrix, rabi_frequency: f64, detuning: f64, t: f64) -> DensityMatrix {
    driven_evolution(state, Axis::Y, rabi_frequency, detuning, t)
}

/// Driven evolution with the drive about an arbitrary axis.
pub fn driven_evolution(
    state: &DensityMatrix,
    axis: Axis,
    rabi_frequency: f64,
    detuning: f64,
    t: f64,
) -> DensityMatrix {
    state.conjugate(&Propagator::driven(axis, rabi_frequency, detuning, t))
}

/// Probability of finding the qubit in |1⟩.
pub fn population_one(state: &DensityMatrix) -> f64 {
    state.rho11
}

pub fn to_bloch(state: &DensityMatrix) -> BlochVector {
    let rho10 = state.rho10();
    BlochVector {
        x: 2.0 * rho10.re,
        y: 2.0 * rho10.im,
        z: state.rho11 - state.rho00,
    }
}

/// Convex combination Σ wᵢ ρᵢ; weights must be non-negative and sum to 1
/// within 1e-9.
pub fn mix(states: &[DensityMatrix], weights: &[f64]) -> Result<DensityMatrix> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(Error::param(
            "weights",
            format!("need one weight per state ({} states, {} weights)", states.len(), weights.len()),
        ));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::param("weights", "weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param("weights", format!("weights sum to {total}, expected 1")));
    }
    let mut out = DensityMatrix {
        rho00: 0.0,
        rho11: 0.0,
        rho01: ZERO,
    };
    for (rho, &w) in states.iter().zip(weights) {
        out.rho00 += w * rho.rho00;
        out.rho11 += w * rho.rho11;
        out.rho01 += rho.rho01 * w;
    }
    Ok(out)
}
