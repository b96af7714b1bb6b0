//! Jump (and Brownian) terms acting along the `v` axis.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::{Domain, Grid, SolverError};
use crate::special::zeta;
use crate::stable_noise::{c_alpha, StableSpec};

/// How jumps that leave `(-1, 1)` are accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExteriorJumps {
    /// Jumps landing outside the domain remove mass at the exact rate
    /// `K/alpha ((1+x)^-alpha + (1-x)^-alpha)`.
    #[default]
    Absorbed,
    /// Only the truncated integral over `(-1-x, 1-x)` is kept.
    Truncated,
}

/// The discrete jump operator. Along each row it is the Toeplitz-plus-diagonal
/// matrix
///
/// ```text
/// (L P)_i = C_hx (P_{i-1} - 2 P_i + P_{i+1}) / h^2
///         + K h sum''_{m=-J..J, m != i} (P_m - P_i) / |x_m - x_i|^(1+alpha)
///         - kill_i P_i
/// ```
///
/// with `K = (2 sigma / (b - a))^alpha C_alpha`,
/// `C_hx = -K zeta(alpha - 1) h^(2 - alpha)`, the double-prime sum halving
/// the two end terms (`m = +-J`, where `P = 0`), and `kill_i` the exterior
/// rate when jumps are absorbed.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub alpha: f64,
    /// `K` above.
    pub coefficient: f64,
    pub c_hx: f64,
    /// `out = P . matrix`, indices `[source, target]`.
    matrix: Array2<f64>,
}

impl NonlocalOperator {
    pub fn new(
        spec: &StableSpec,
        grid: Grid,
        domain: &Domain,
        exterior: ExteriorJumps,
    ) -> Result<Self, SolverError> {
        let alpha = spec.alpha;
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(SolverError::AlphaOutOfRange(alpha));
        }
        let k = domain.noise_factor(spec) * c_alpha(alpha)?;
        let h = grid.h();
        let j = grid.j as i64;
        let n = grid.n();
        let c_hx = -k * zeta(alpha - 1.0) * h.powf(2.0 - alpha);
        // weights K h / |k h|^(1 + alpha) = K h^-alpha |k|^-(1+alpha)
        let base = k * h.powf(-alpha);
        let weight = |d: i64| base * (d.abs() as f64).powf(-1.0 - alpha);

        let mut matrix = Array2::zeros((n, n));
        for t in 0..n {
            let i = grid.node_index(t);
            let mut diag = 0.0;
            for m in -j..=j {
                if m == i {
                    continue;
                }
                let w = weight(m - i);
                let end = if m.abs() == j { 0.5 } else { 1.0 };
                diag -= end * w;
                if m.abs() < j {
                    matrix[[(m + j - 1) as usize, t]] += w;
                }
            }
            diag -= 2.0 * c_hx / (h * h);
            if t > 0 {
                matrix[[t - 1, t]] += c_hx / (h * h);
            }
            if t + 1 < n {
                matrix[[t + 1, t]] += c_hx / (h * h);
            }
            if exterior == ExteriorJumps::Absorbed {
                let x = i as f64 * h;
                diag -= k / alpha * ((1.0 + x).powf(-alpha) + (1.0 - x).powf(-alpha));
            }
            matrix[[t, t]] += diag;
        }
        Ok(Self {
            alpha,
            coefficient: k,
            c_hx,
            matrix,
        })
    }

    /// `out = beta * out + P . L` for every row of `p`.
    pub fn apply(&self, p: ArrayView2<f64>, beta: f64, out: &mut ArrayViewMut2<f64>) {
        general_mat_mul(1.0, &p, &self.matrix, beta, out);
    }

    /// Largest diagonal magnitude, which bounds the explicit step.
    pub fn max_rate(&self) -> f64 {
        self.matrix
            .diag()
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

/// Brownian term `(sigma^2 / 2) p_vv` in rescaled form, central differences
/// with homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy)]
pub struct LocalDiffusion {
    /// `(2 / (b - a))^2 sigma^2 / 2`
    pub coefficient: f64,
    h: f64,
}

impl LocalDiffusion {
    pub fn new(sigma: f64, grid: Grid, domain: &Domain) -> Self {
        let s = domain.v_factor() * sigma;
        Self {
            coefficient: 0.5 * s * s,
            h: grid.h(),
        }
    }

    pub fn apply(&self, p: ArrayView2<f64>, beta: f64, out: &mut ArrayViewMut2<f64>) {
        let r = self.coefficient / (self.h * self.h);
        let n = p.ncols();
        for (row_in, mut row_out) in p.rows().into_iter().zip(out.rows_mut()) {
            for c in 0..n {
                let left = if c > 0 { row_in[c - 1] } else { 0.0 };
                let right = if c + 1 < n { row_in[c + 1] } else { 0.0 };
                row_out[c] = beta * row_out[c] + r * (left - 2.0 * row_in[c] + right);
            }
        }
    }

    pub fn max_rate(&self) -> f64 {
        2.0 * self.coefficient / (self.h * self.h)
    }
}
