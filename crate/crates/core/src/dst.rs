//! Fast solver for `c·(-Δ_h) + s` on the interior of a Dirichlet box, via the
//! type-I discrete sine transform (computed with a complex FFT of the odd extension).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct ShiftedLaplacian {
    nx: usize,
    ny: usize,
    scale: f64,
    shift: f64,
    fft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

fn eigenvalues(n: usize) -> Vec<f64> {
    (1..=n).map(|p| 4.0 * (PI * p as f64 / (2.0 * (n + 1) as f64)).sin().powi(2)).collect()
}

impl ShiftedLaplacian {
    /// `nx × ny` interior unknowns; the stencil is `scale·(4x - Σ neighbours) + shift·x`.
    pub(crate) fn new(nx: usize, ny: usize, scale: f64, shift: f64) -> Self {
        let mut planner = FftPlanner::new();
        ShiftedLaplacian {
            nx,
            ny,
            scale,
            shift,
            fft_x: planner.plan_fft_forward(2 * (nx + 1)),
            fft_y: planner.plan_fft_forward(2 * (ny + 1)),
            eig_x: eigenvalues(nx),
            eig_y: eigenvalues(ny),
        }
    }

    /// In-place DST-I of every row (`along_x`) or column.
    fn transform(&self, data: &mut [Complex64], along_x: bool) {
        let (n, lines, fft) = if along_x { (self.nx, self.ny, &self.fft_x) } else { (self.ny, self.nx, &self.fft_y) };
        let at = |line: usize, k: usize| if along_x { line * self.nx + k } else { k * self.nx + line };
        let mut buf = vec![Complex64::default(); 2 * (n + 1)];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for line in 0..lines {
            buf[0] = Complex64::default();
            buf[n + 1] = Complex64::default();
            for k in 0..n {
                let v = data[at(line, k)];
                buf[k + 1] = v;
                buf[2 * (n + 1) - (k + 1)] = -v;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                data[at(line, k)] = buf[k + 1] * Complex64::new(0.0, 0.5);
            }
        }
    }

    pub(crate) fn solve(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        self.transform(data, false);
        let norm = 4.0 / ((self.nx + 1) * (self.ny + 1)) as f64;
        for q in 0..self.ny {
            for p in 0..self.nx {
                data[q * self.nx + p] *= norm / (self.scale * (self.eig_x[p] + self.eig_y[q]) + self.shift);
            }
        }
        self.transform(data, true);
        self.transform(data, false);
    }

    pub(crate) fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut nb = Complex64::default();
                if i > 0 { nb += x[k - 1]; }
                if i + 1 < nx { nb += x[k + 1]; }
                if j > 0 { nb += x[k - nx]; }
                if j + 1 < ny { nb += x[k + nx]; }
                out[k] = self.scale * (4.0 * x[k] - nb) + self.shift * x[k];
            }
        }
    }
}
