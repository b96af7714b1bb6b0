//! Special functions used by the nonlocal operator and the stable-law constants.

use std::f64::consts::PI;

pub use statrs::function::gamma::gamma;

/// Terms in the Borwein alternating-series acceleration.
const BORWEIN_TERMS: usize = 40;

/// Riemann zeta function on the real line, `s != 1`.
///
/// Uses Borwein's accelerated Dirichlet-eta series for `s > -1` and the
/// functional equation to reflect smaller arguments into `[2, inf)`.
pub fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s <= -1.0 {
        // zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1-s) zeta(1-s)
        let reflected = 1.0 - s;
        return 2f64.powf(s)
            * PI.powf(s - 1.0)
            * (PI * s / 2.0).sin()
            * gamma(reflected)
            * zeta(reflected);
    }
    borwein_zeta(s)
}

fn borwein_zeta(s: f64) -> f64 {
    let n = BORWEIN_TERMS;
    let nf = n as f64;
    // d_k = n * sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    let mut d = Vec::with_capacity(n + 1);
    let mut term = 1.0;
    let mut acc = term;
    d.push(acc);
    for i in 0..n {
        let fi = i as f64;
        term *= 4.0 * (nf + fi) * (nf - fi) / ((2.0 * fi + 1.0) * (2.0 * fi + 2.0));
        acc += term;
        d.push(acc);
    }
    let dn = d[n];
    let mut sum = 0.0;
    for (k, dk) in d.iter().take(n).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - dn) / ((k + 1) as f64).powf(s);
    }
    // 1 - 2^(1-s) without cancellation near s = 1
    let eta_factor = -((1.0 - s) * std::f64::consts::LN_2).exp_m1();
    -sum / (dn * eta_factor)
}
