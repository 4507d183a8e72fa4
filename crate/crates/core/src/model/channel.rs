use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws one circularly-symmetric `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Small-scale fading of all users in one slot and the slot before it.
///
/// Row `k` of each matrix holds `h_k^H`, so `(H p)_k = h_k^H p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub slot_index: u64,
    pub h_current: DMatrix<Complex64>,
    /// One-slot-old channel, the only CSI available at the transmitter.
    pub h_previous: DMatrix<Complex64>,
}

impl ChannelState {
    /// Slot-0 state: a fresh Rayleigh draw with no history (the pilot-only slot).
    pub fn initial<R: Rng + ?Sized>(n_users: usize, n_antennas: usize, rng: &mut R) -> Self {
        let h = gaussian_matrix(n_users, n_antennas, rng);
        Self { slot_index: 0, h_previous: h.clone(), h_current: h }
    }

    pub fn n_users(&self) -> usize {
        self.h_current.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.h_current.ncols()
    }

    /// Outdated CSIT used for precoding in the current slot.
    pub fn csit(&self) -> &DMatrix<Complex64> {
        &self.h_previous
    }
}

/// First-order Gauss–Markov step `h[m] = ρ h[m-1] + sqrt(1-ρ²) e[m]`.
pub fn evolve_channel<R: Rng + ?Sized>(state: &ChannelState, rho: f64, rng: &mut R) -> ChannelState {
    debug_assert!(rho.abs() <= 1.0);
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let old = &state.h_current;
    let next = if innovation == 0.0 {
        old.clone()
    } else {
        DMatrix::from_fn(old.nrows(), old.ncols(), |i, j| {
            old[(i, j)] * rho + complex_gaussian(rng) * innovation
        })
    };
    ChannelState { slot_index: state.slot_index + 1, h_previous: old.clone(), h_current: next }
}
