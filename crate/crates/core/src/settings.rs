//! Numerical knobs shared by the checkers, the simulator and the field code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Unbounded ranges are cut at `upper + cutoff_k * span` of the domain.
    pub cutoff_k: f64,
    /// Relative width of the band around a decision boundary that yields
    /// an inconclusive verdict.
    pub band: f64,
    /// Relative tolerance of the parallelism test for constant-force pairs.
    pub tol_parallel: f64,
    /// Eigenvalues above `-tol_eig` count as non-negative.
    pub tol_eig: f64,
    /// Seed for every randomized probe set.
    pub seed: u64,
    /// Random pairs drawn by the monotonicity checks.
    pub probes: usize,
    /// Label samples per axis for (x, y) quantification.
    pub grid_x: usize,
    /// Target samples per label for (x, y) quantification.
    pub grid_y: usize,
    /// Multi-d collision threshold relative to the initial pair distance.
    pub eps_collision: f64,
    /// Output times per simulation run.
    pub output_times: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            cutoff_k: 10.0,
            band: 1e-9,
            tol_parallel: 1e-10,
            tol_eig: 1e-10,
            seed: 0,
            probes: 4096,
            grid_x: 48,
            grid_y: 48,
            eps_collision: 1e-3,
            output_times: 256,
        }
    }
}

impl Settings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Independent random stream for one purpose. Streams are keyed by the
    /// seed and a purpose id, so draws never depend on execution order.
    pub fn rng(&self, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(purpose);
        rng
    }
}

/// Stream ids for [`Settings::rng`].
pub mod stream {
    pub const FORCE_PAIRS: u64 = 1;
    pub const VELOCITY_PAIRS: u64 = 2;
    pub const REFINE: u64 = 3;
}
