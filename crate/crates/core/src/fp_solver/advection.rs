//! Drift transport with global Lax-Friedrichs flux splitting.
//!
//! For each axis `k` the flux `f_k P` is split as
//! `(f_k P)^+- = (f_k P +- a_k P) / 2` with `a_k >= max |f_k|`, so the `+`
//! part moves right and the `-` part moves left. Each part is differenced
//! with a stencil biased against its own wind. Outside the interior `P = 0`.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::{Domain, Grid};
use crate::model::{vector_field, MlParams, State};

/// Reconstruction used for the split fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    /// First-order one-sided differences.
    Upwind1,
    /// Fifth-order WENO reconstruction of the upwind-biased fluxes.
    #[default]
    Weno5,
}

/// Global Lax-Friedrichs speeds `a_1 >= max|f_1|`, `a_2 >= max|f_2|`, in
/// original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfSpeeds {
    pub a1: f64,
    pub a2: f64,
}

/// Samples per axis when estimating the speeds.
pub const LF_SAMPLES: usize = 200;
pub const LF_SAFETY: f64 = 1.1;

impl LfSpeeds {
    /// Maximum of `|f_k|` on a `200 x 200` lattice over the closed domain,
    /// times 1.1.
    pub fn estimate(params: &MlParams, domain: &Domain) -> Self {
        let (mut a1, mut a2) = (0.0f64, 0.0f64);
        let last = (LF_SAMPLES - 1) as f64;
        for r in 0..LF_SAMPLES {
            let w = domain.w_min + (domain.w_max - domain.w_min) * r as f64 / last;
            for c in 0..LF_SAMPLES {
                let v = domain.v_min + (domain.v_max - domain.v_min) * c as f64 / last;
                let (f1, f2) = vector_field(State::new(v, w), params);
                a1 = a1.max(f1.abs());
                a2 = a2.max(f2.abs());
            }
        }
        Self {
            a1: LF_SAFETY * a1,
            a2: LF_SAFETY * a2,
        }
    }
}

/// Drift operator with the velocity sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct Advection {
    f1: Array2<f64>,
    f2: Array2<f64>,
    pub speeds: LfSpeeds,
    v_factor: f64,
    w_factor: f64,
    h: f64,
    pub scheme: AdvectionScheme,
}

impl Advection {
    pub fn new(
        params: &MlParams,
        grid: Grid,
        domain: &Domain,
        speeds: LfSpeeds,
        scheme: AdvectionScheme,
    ) -> Self {
        let n = grid.n();
        let mut f1 = Array2::zeros((n, n));
        let mut f2 = Array2::zeros((n, n));
        for r in 0..n {
            for c in 0..n {
                let s = domain.from_rescaled(grid.coord(c), grid.coord(r));
                let (a, b) = vector_field(s, params);
                f1[[r, c]] = a;
                f2[[r, c]] = b;
            }
        }
        Self::from_velocity(f1, f2, grid, domain, speeds, scheme)
    }

    /// Operator for an arbitrary nodal velocity field (original units).
    pub fn from_velocity(
        f1: Array2<f64>,
        f2: Array2<f64>,
        grid: Grid,
        domain: &Domain,
        speeds: LfSpeeds,
        scheme: AdvectionScheme,
    ) -> Self {
        assert_eq!(f1.dim(), (grid.n(), grid.n()));
        assert_eq!(f2.dim(), (grid.n(), grid.n()));
        Self {
            f1,
            f2,
            speeds,
            v_factor: domain.v_factor(),
            w_factor: domain.w_factor(),
            h: grid.h(),
            scheme,
        }
    }

    /// Largest rescaled signal speed, `2 a_1/(b-a) + 2 a_2/(d-c)`.
    pub fn max_speed(&self) -> f64 {
        self.v_factor * self.speeds.a1 + self.w_factor * self.speeds.a2
    }

    /// `out += -(2/(b-a)) d_x(f1 P) - (2/(d-c)) d_y(f2 P)`.
    pub fn accumulate(&self, p: ArrayView2<f64>, out: &mut ArrayViewMut2<f64>) {
        let n = p.ncols();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut deriv = vec![0.0; n];
        let mut iface = vec![0.0; n + 1];

        // x direction: rows are contiguous lines
        let sx = -self.v_factor / self.h;
        for r in 0..p.nrows() {
            for c in 0..n {
                let q = p[[r, c]];
                let f = self.f1[[r, c]] * q;
                plus[c] = 0.5 * (f + self.speeds.a1 * q);
                minus[c] = 0.5 * (f - self.speeds.a1 * q);
            }
            line_derivative(self.scheme, &plus, &minus, &mut iface, &mut deriv);
            for c in 0..n {
                out[[r, c]] += sx * deriv[c];
            }
        }

        // y direction: gather each column
        let m = p.nrows();
        plus.resize(m, 0.0);
        minus.resize(m, 0.0);
        deriv.resize(m, 0.0);
        iface.resize(m + 1, 0.0);
        let sy = -self.w_factor / self.h;
        for c in 0..n {
            for r in 0..m {
                let q = p[[r, c]];
                let f = self.f2[[r, c]] * q;
                plus[r] = 0.5 * (f + self.speeds.a2 * q);
                minus[r] = 0.5 * (f - self.speeds.a2 * q);
            }
            line_derivative(self.scheme, &plus, &minus, &mut iface, &mut deriv);
            for r in 0..m {
                out[[r, c]] += sy * deriv[r];
            }
        }
    }
}

/// Interface fluxes `H_{k+1/2}` for `k = -1 ..= n-1` and their differences
/// `deriv[k] = H_{k+1/2} - H_{k-1/2}` (not yet divided by `h`).
fn line_derivative(
    scheme: AdvectionScheme,
    plus: &[f64],
    minus: &[f64],
    iface: &mut [f64],
    deriv: &mut [f64],
) {
    let n = plus.len();
    let at = |v: &[f64], k: i64| -> f64 {
        if k < 0 || k >= n as i64 {
            0.0
        } else {
            v[k as usize]
        }
    };
    for (slot, h) in iface.iter_mut().enumerate() {
        let k = slot as i64 - 1; // interface k + 1/2
        *h = match scheme {
            AdvectionScheme::Upwind1 => at(plus, k) + at(minus, k + 1),
            AdvectionScheme::Weno5 => {
                let hp = weno5(
                    at(plus, k - 2),
                    at(plus, k - 1),
                    at(plus, k),
                    at(plus, k + 1),
                    at(plus, k + 2),
                );
                let hm = weno5(
                    at(minus, k + 3),
                    at(minus, k + 2),
                    at(minus, k + 1),
                    at(minus, k),
                    at(minus, k - 1),
                );
                hp + hm
            }
        };
    }
    // outer faces only let mass out
    iface[0] = iface[0].min(0.0);
    iface[n] = iface[n].max(0.0);
    for k in 0..n {
        deriv[k] = iface[k + 1] - iface[k];
    }
}

/// Jiang-Shu WENO5 value at the right face of the centre cell `c` of the
/// stencil `a b c d e`, biased to the left.
#[inline]
fn weno5(a: f64, b: f64, c: f64, d: f64, e: f64) -> f64 {
    const EPS: f64 = 1e-6;
    let b0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);
    let w0 = 0.1 / (EPS + b0).powi(2);
    let w1 = 0.6 / (EPS + b1).powi(2);
    let w2 = 0.3 / (EPS + b2).powi(2);
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;
    (w0 * q0 + w1 * q1 + w2 * q2) / (w0 + w1 + w2)
}
