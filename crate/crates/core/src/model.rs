//! Deterministic Morris-Lecar dynamics.
//!
//! The planar system
//!
//! ```text
//! C dv/dt = -g_Ca m_inf(v) (v - V_Ca) - g_K w (v - V_K) - g_L (v - V_L) + I
//!   dw/dt = phi (w_inf(v) - w) / tau_w(v)
//! ```
//!
//! with the default parameter set is bistable: a weakly attracting spiral
//! sink coexists with a large stable limit cycle, and a small unstable cycle
//! separates the two basins. This module integrates the flow, locates the
//! fixed point, extracts both cycles through a Poincare return map and
//! classifies initial states by basin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default RK4 step (ms).
pub const DEFAULT_DT: f64 = 0.01;

/// Sanity band for the recovery variable during integration.
pub const W_SANITY: (f64, f64) = (-0.05, 1.05);

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-10;
const SECTION_TOL: f64 = 1e-6;
const SECTION_MAX_RETURNS: usize = 4000;
const MAX_POLYLINE_VERTICES: usize = 1500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("state left the sanity band or became non-finite at t = {time} ms: ({v}, {w})")]
    NonFinite { time: f64, v: f64, w: f64 },
    #[error("integration arguments invalid: dt = {dt}, duration = {duration}")]
    BadStep { dt: f64, duration: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Poincare return map failed: {0}")]
    NoCycle(String),
    #[error("state ({v}, {w}) lies within the ambiguity band of the separatrix")]
    Ambiguous { v: f64, w: f64 },
}

/// Morris-Lecar constants. Units: mV, ms, uF/cm^2, uS/cm^2, uA/cm^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlParams {
    pub c: f64,
    pub g_ca: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub v_ca: f64,
    pub v_k: f64,
    pub v_l: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub phi: f64,
    pub i_app: f64,
}

impl Default for MlParams {
    /// The type II excitability set with I = 92, which is bistable.
    fn default() -> Self {
        Self {
            c: 20.0,
            g_ca: 4.4,
            g_k: 8.0,
            g_l: 2.0,
            v_ca: 120.0,
            v_k: -84.0,
            v_l: -60.0,
            v1: -1.2,
            v2: 18.0,
            v3: 2.0,
            v4: 30.0,
            phi: 0.04,
            i_app: 92.0,
        }
    }
}

impl MlParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ModelError::InvalidParams {
                field,
                reason: reason.to_string(),
            })
        };
        let all = [
            self.c, self.g_ca, self.g_k, self.g_l, self.v_ca, self.v_k, self.v_l, self.v1,
            self.v2, self.v3, self.v4, self.phi, self.i_app,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("model", "all parameters must be finite");
        }
        if self.c <= 0.0 {
            return bad("c", "capacitance must be positive");
        }
        if self.v2 == 0.0 {
            return bad("v2", "must be nonzero");
        }
        if self.v4 == 0.0 {
            return bad("v4", "must be nonzero");
        }
        if self.g_ca < 0.0 {
            return bad("g_ca", "conductance must be nonnegative");
        }
        if self.g_k < 0.0 {
            return bad("g_k", "conductance must be nonnegative");
        }
        if self.g_l < 0.0 {
            return bad("g_l", "conductance must be nonnegative");
        }
        if self.phi <= 0.0 {
            return bad("phi", "rate scale must be positive");
        }
        Ok(())
    }
}

/// A point of the (v, w) phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub v: f64,
    pub w: f64,
}

impl State {
    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    fn axpy(self, k: f64, d: (f64, f64)) -> Self {
        Self::new(self.v + k * d.0, self.w + k * d.1)
    }
}

/// Steady-state gating values at one membrane potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gating {
    pub m_inf: f64,
    pub w_inf: f64,
    pub tau_w: f64,
}

pub fn gating(v: f64, p: &MlParams) -> Gating {
    Gating {
        m_inf: 0.5 * (1.0 + ((v - p.v1) / p.v2).tanh()),
        w_inf: 0.5 * (1.0 + ((v - p.v3) / p.v4).tanh()),
        tau_w: 1.0 / ((v - p.v3) / (2.0 * p.v4)).cosh(),
    }
}

/// Right-hand side `(dv/dt, dw/dt)`.
#[inline]
pub fn vector_field(s: State, p: &MlParams) -> (f64, f64) {
    let g = gating(s.v, p);
    let dv = (-p.g_ca * g.m_inf * (s.v - p.v_ca) - p.g_k * s.w * (s.v - p.v_k)
        - p.g_l * (s.v - p.v_l)
        + p.i_app)
        / p.c;
    let dw = p.phi * (g.w_inf - s.w) / g.tau_w;
    (dv, dw)
}

/// Analytic Jacobian `[[df1/dv, df1/dw], [df2/dv, df2/dw]]`.
pub fn jacobian(s: State, p: &MlParams) -> [[f64; 2]; 2] {
    let g = gating(s.v, p);
    let sech2 = |x: f64| {
        let c = x.cosh();
        1.0 / (c * c)
    };
    let dm = 0.5 * sech2((s.v - p.v1) / p.v2) / p.v2;
    let dwinf = 0.5 * sech2((s.v - p.v3) / p.v4) / p.v4;
    let u = (s.v - p.v3) / (2.0 * p.v4);
    let df1_dv = (-p.g_ca * (dm * (s.v - p.v_ca) + g.m_inf) - p.g_k * s.w - p.g_l) / p.c;
    let df1_dw = -p.g_k * (s.v - p.v_k) / p.c;
    let df2_dv = p.phi * (dwinf * u.cosh() + (g.w_inf - s.w) * u.sinh() / (2.0 * p.v4));
    let df2_dw = -p.phi * u.cosh();
    [[df1_dv, df1_dw], [df2_dv, df2_dw]]
}

/// Integration direction. `Backward` integrates the time-reversed field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One classical RK4 step of size `dt` in the given direction.
#[inline]
pub fn rk4_step(s: State, dt: f64, dir: Direction, p: &MlParams) -> State {
    let sg = dir.sign();
    let f = |x: State| {
        let (a, b) = vector_field(x, p);
        (sg * a, sg * b)
    };
    let k1 = f(s);
    let k2 = f(s.axpy(0.5 * dt, k1));
    let k3 = f(s.axpy(0.5 * dt, k2));
    let k4 = f(s.axpy(dt, k3));
    State::new(
        s.v + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.w + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn check_sane(s: State, time: f64) -> Result<(), ModelError> {
    if !s.v.is_finite() || !s.w.is_finite() || s.w < W_SANITY.0 || s.w > W_SANITY.1 {
        return Err(ModelError::NonFinite {
            time,
            v: s.v,
            w: s.w,
        });
    }
    Ok(())
}

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Orbit {
    pub fn last(&self) -> State {
        *self.states.last().expect("orbit is never empty")
    }
}

/// Fixed-step RK4 over `[0, duration]`. The final step is shortened so the
/// orbit ends exactly at `duration`.
pub fn integrate(s0: State, duration: f64, dt: f64, p: &MlParams) -> Result<Orbit, ModelError> {
    integrate_dir(s0, duration, dt, Direction::Forward, p)
}

pub fn integrate_dir(
    s0: State,
    duration: f64,
    dt: f64,
    dir: Direction,
    p: &MlParams,
) -> Result<Orbit, ModelError> {
    if !(dt > 0.0) || !(duration >= dt) || !duration.is_finite() {
        return Err(ModelError::BadStep { dt, duration });
    }
    check_sane(s0, 0.0)?;
    let full = (duration / dt).floor() as usize;
    let rem = duration - full as f64 * dt;
    let extra = rem > 1e-12 * duration;
    let mut times = Vec::with_capacity(full + 2);
    let mut states = Vec::with_capacity(full + 2);
    times.push(0.0);
    states.push(s0);
    let mut s = s0;
    for k in 1..=full {
        s = rk4_step(s, dt, dir, p);
        let t = k as f64 * dt;
        check_sane(s, t)?;
        times.push(t);
        states.push(s);
    }
    if extra {
        s = rk4_step(s, rem, dir, p);
        check_sane(s, duration)?;
        times.push(duration);
        states.push(s);
    }
    Ok(Orbit { times, states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub location: State,
    pub eigenvalues: [Complex64; 2],
    pub stability: Stability,
    /// Newton iterations used.
    pub iterations: usize,
}

impl FixedPoint {
    pub fn is_spiral(&self) -> bool {
        self.eigenvalues[0].im.abs() > 0.0
    }
}

fn eigenvalues(j: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

/// Newton's method on the vector field from `guess`.
pub fn find_fixed_point(guess: State, p: &MlParams) -> Result<FixedPoint, ModelError> {
    let mut s = guess;
    let mut residual = f64::INFINITY;
    for it in 0..=NEWTON_MAX_ITER {
        let (f1, f2) = vector_field(s, p);
        residual = f1.hypot(f2);
        if residual < NEWTON_TOL {
            let eig = eigenvalues(jacobian(s, p));
            let stability = if eig.iter().all(|e| e.re < 0.0) {
                Stability::Stable
            } else {
                Stability::Unstable
            };
            return Ok(FixedPoint {
                location: s,
                eigenvalues: eig,
                stability,
                iterations: it,
            });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let j = jacobian(s, p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dv = (f1 * j[1][1] - f2 * j[0][1]) / det;
        let dw = (j[0][0] * f2 - j[1][0] * f1) / det;
        s = State::new(s.v - dv, s.w - dw);
        if !s.v.is_finite() || !s.w.is_finite() {
            break;
        }
    }
    Err(ModelError::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

/// A closed polyline approximating a periodic orbit. The first and last
/// vertices coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCycle {
    pub polyline: Vec<State>,
    pub period: f64,
    pub stability: Stability,
}

/// Half-widths of the ambiguity band around a polyline, per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub dv: f64,
    pub dw: f64,
}

impl LimitCycle {
    /// Even-odd ray casting against the polyline.
    pub fn contains(&self, s: State) -> bool {
        let pts = &self.polyline;
        let mut inside = false;
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if (a.w > s.w) != (b.w > s.w) {
                let v_cross = a.v + (s.w - a.w) / (b.w - a.w) * (b.v - a.v);
                if s.v < v_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Largest per-axis spacing between consecutive vertices.
    pub fn resolution(&self) -> Band {
        let mut band = Band { dv: 0.0, dw: 0.0 };
        for seg in self.polyline.windows(2) {
            band.dv = band.dv.max((seg[1].v - seg[0].v).abs());
            band.dw = band.dw.max((seg[1].w - seg[0].w).abs());
        }
        band
    }

    /// Distance from `s` to the polyline in band-scaled coordinates; values
    /// below 1 fall inside the band.
    pub fn scaled_distance(&self, s: State, band: Band) -> f64 {
        let (x, y) = (s.v / band.dv, s.w / band.dw);
        self.polyline
            .windows(2)
            .map(|seg| {
                let (ax, ay) = (seg[0].v / band.dv, seg[0].w / band.dw);
                let (bx, by) = (seg[1].v / band.dv, seg[1].w / band.dw);
                point_segment_distance((x, y), (ax, ay), (bx, by))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the nearest vertex, with each axis divided by `scale`.
    pub fn nearest_vertex_distance(&self, s: State, scale: Band) -> f64 {
        self.polyline
            .iter()
            .map(|q| ((q.v - s.v) / scale.dv).hypot((q.w - s.w) / scale.dw))
            .fold(f64::INFINITY, f64::min)
    }

    /// True if no two non-adjacent segments intersect.
    pub fn is_simple(&self) -> bool {
        let segs: Vec<(State, State)> =
            self.polyline.windows(2).map(|s| (s[0], s[1])).collect();
        let n = segs.len();
        for i in 0..n {
            for k in (i + 2)..n {
                if i == 0 && k == n - 1 {
                    continue; // share the closing vertex
                }
                if segments_cross(segs[i], segs[k]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_closed(&self) -> bool {
        match (self.polyline.first(), self.polyline.last()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// `(v, w)` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,w\n");
        for s in &self.polyline {
            out.push_str(&format!("{},{}\n", s.v, s.w));
        }
        out
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn segments_cross(s1: (State, State), s2: (State, State)) -> bool {
    let orient = |a: State, b: State, c: State| (b.v - a.v) * (c.w - a.w) - (b.w - a.w) * (c.v - a.v);
    let d1 = orient(s2.0, s2.1, s1.0);
    let d2 = orient(s2.0, s2.1, s1.1);
    let d3 = orient(s1.0, s1.1, s2.0);
    let d4 = orient(s1.0, s1.1, s2.1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Section `w = level` restricted to the half-line `v > v_min`.
#[derive(Debug, Clone, Copy)]
struct Section {
    level: f64,
    v_min: f64,
}

/// Integrate from `s` until the orbit crosses the section; returns the
/// crossing point (refined by secant iteration on the last step length) and
/// the elapsed time.
fn next_crossing(
    s: State,
    dt: f64,
    dir: Direction,
    sec: Section,
    p: &MlParams,
    max_time: f64,
) -> Result<(State, f64), ModelError> {
    let mut cur = s;
    let mut t = 0.0;
    // leave the section before looking for a crossing
    let mut armed = false;
    while t < max_time {
        let nxt = rk4_step(cur, dt, dir, p);
        check_sane(nxt, t + dt)?;
        let g0 = cur.w - sec.level;
        let g1 = nxt.w - sec.level;
        if armed && g0 < 0.0 && g1 >= 0.0 && nxt.v > sec.v_min
            || armed && g0 > 0.0 && g1 <= 0.0 && nxt.v > sec.v_min
        {
            // secant on the partial step length
            let (mut ta, mut ga) = (0.0, g0);
            let (mut tb, mut gb) = (dt, g1);
            let mut hit = nxt;
            let mut tau = dt;
            for _ in 0..50 {
                if gb == ga {
                    break;
                }
                tau = tb - gb * (tb - ta) / (gb - ga);
                hit = rk4_step(cur, tau, dir, p);
                let g = hit.w - sec.level;
                if g.abs() < 1e-15 {
                    break;
                }
                ta = tb;
                ga = gb;
                tb = tau;
                gb = g;
            }
            return Ok((State::new(hit.v, sec.level), t + tau));
        }
        if g1.abs() > 1e-9 || nxt.v <= sec.v_min {
            armed = true;
        }
        cur = nxt;
        t += dt;
    }
    Err(ModelError::NoCycle(format!(
        "no section crossing within {max_time} ms"
    )))
}

/// Iterate the return map from `start` until the section coordinate settles
/// within `SECTION_TOL`; then sample one period into a polyline.
fn poincare_cycle(
    start: State,
    sec: Section,
    dir: Direction,
    stability: Stability,
    p: &MlParams,
) -> Result<LimitCycle, ModelError> {
    let dt = DEFAULT_DT;
    let max_time = 5000.0;
    let (mut x, _) = next_crossing(start, dt, dir, sec, p, max_time)?;
    let mut converged = false;
    let mut prev_delta = f64::INFINITY;
    for _ in 0..SECTION_MAX_RETURNS {
        let (y, _) = next_crossing(x, dt, dir, sec, p, max_time)?;
        let delta = y.v - x.v;
        if delta.abs() < SECTION_TOL {
            x = y;
            converged = true;
            break;
        }
        // Slow linear contraction: jump to the fixed point of the secant
        // through two successive returns.
        if delta.abs() < 1e-2 && prev_delta.is_finite() && delta.abs() < prev_delta.abs() {
            let (z, _) = next_crossing(y, dt, dir, sec, p, max_time)?;
            let d2 = z.v - y.v;
            let ratio = d2 / delta;
            if ratio.abs() < 0.999 && ratio.is_finite() {
                let guess = y.v + d2 * ratio / (1.0 - ratio);
                prev_delta = d2;
                x = State::new(guess, sec.level);
                continue;
            }
            prev_delta = d2;
            x = z;
            continue;
        }
        prev_delta = delta;
        x = y;
    }
    if !converged {
        return Err(ModelError::NoCycle(format!(
            "return map did not settle within {SECTION_MAX_RETURNS} returns"
        )));
    }
    let (_, period) = next_crossing(x, dt, dir, sec, p, max_time)?;
    let steps = (period / dt).ceil() as usize;
    let stride = steps.div_ceil(MAX_POLYLINE_VERTICES).max(1);
    let mut poly = Vec::with_capacity(steps / stride + 2);
    poly.push(x);
    let mut s = x;
    for k in 1..steps {
        s = rk4_step(s, dt, dir, p);
        if k % stride == 0 {
            poly.push(s);
        }
    }
    poly.push(x);
    if dir == Direction::Backward {
        poly.reverse();
    }
    Ok(LimitCycle {
        polyline: poly,
        period,
        stability,
    })
}

/// Fixed point plus both limit cycles of a bistable parameter set.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub params: MlParams,
    pub fixed_point: FixedPoint,
    pub stable: LimitCycle,
    pub unstable: LimitCycle,
}

/// Guess used to locate the resting state of the default parameter set.
pub const REST_GUESS: State = State::new(-26.0, 0.13);

impl Landscape {
    pub fn compute(p: &MlParams) -> Result<Self, ModelError> {
        p.validate()?;
        let fixed_point = find_fixed_point(REST_GUESS, p)?;
        let stable = extract_stable_cycle_from(&fixed_point, p)?;
        let unstable = extract_unstable_cycle_from(&fixed_point, &stable, p)?;
        Ok(Self {
            params: *p,
            fixed_point,
            stable,
            unstable,
        })
    }
}

fn section_for(fp: &FixedPoint) -> Section {
    Section {
        level: fp.location.w,
        v_min: fp.location.v,
    }
}

/// Stable cycle by forward iteration of the return map on `w = w*`, where
/// `w*` is the fixed point's recovery value.
pub fn extract_stable_cycle(p: &MlParams) -> Result<LimitCycle, ModelError> {
    p.validate()?;
    let fp = find_fixed_point(REST_GUESS, p)?;
    extract_stable_cycle_from(&fp, p)
}

fn extract_stable_cycle_from(fp: &FixedPoint, p: &MlParams) -> Result<LimitCycle, ModelError> {
    let sec = section_for(fp);
    // well outside the small cycle: the upper branch of the w-nullcline
    let start = State::new(fp.location.v + 40.0, fp.location.w);
    poincare_cycle(start, sec, Direction::Forward, Stability::Stable, p)
}

/// Unstable cycle by iterating the return map of the time-reversed field
/// from the middle of the annulus between the fixed point and the stable
/// cycle.
pub fn extract_unstable_cycle(p: &MlParams) -> Result<LimitCycle, ModelError> {
    p.validate()?;
    let fp = find_fixed_point(REST_GUESS, p)?;
    let stable = extract_stable_cycle_from(&fp, p)?;
    extract_unstable_cycle_from(&fp, &stable, p)
}

fn extract_unstable_cycle_from(
    fp: &FixedPoint,
    stable: &LimitCycle,
    p: &MlParams,
) -> Result<LimitCycle, ModelError> {
    let sec = section_for(fp);
    let outer = stable.polyline[0];
    let start = State::new(0.5 * (fp.location.v + outer.v), sec.level);
    poincare_cycle(start, sec, Direction::Backward, Stability::Unstable, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basin {
    Rest,
    Oscillate,
}

/// Point-in-polygon basin test with the default ambiguity band (the
/// polyline's own sampling resolution).
pub fn classify_basin(s: State, unstable: &LimitCycle) -> Result<Basin, ModelError> {
    classify_basin_with_band(s, unstable, unstable.resolution())
}

pub fn classify_basin_with_band(
    s: State,
    unstable: &LimitCycle,
    band: Band,
) -> Result<Basin, ModelError> {
    if unstable.scaled_distance(s, band) < 1.0 {
        return Err(ModelError::Ambiguous { v: s.v, w: s.w });
    }
    Ok(if unstable.contains(s) {
        Basin::Rest
    } else {
        Basin::Oscillate
    })
}

/// Slow basin test: integrate forward until the orbit settles near the fixed
/// point or near the stable cycle.
pub fn classify_basin_by_integration(
    s: State,
    landscape: &Landscape,
    max_time: f64,
) -> Result<Basin, ModelError> {
    let p = &landscape.params;
    let dt = 0.05;
    let fp = landscape.fixed_point.location;
    let tol = Band { dv: 0.5, dw: 0.005 };
    let mut cur = s;
    let mut t = 0.0;
    let mut k = 0usize;
    while t < max_time {
        cur = rk4_step(cur, dt, Direction::Forward, p);
        t += dt;
        k += 1;
        check_sane(cur, t)?;
        if ((cur.v - fp.v) / tol.dv).hypot((cur.w - fp.w) / tol.dw) < 1.0 {
            return Ok(Basin::Rest);
        }
        // the stable cycle reaches far beyond the unstable one; test sparsely
        if k % 20 == 0 && landscape.stable.nearest_vertex_distance(cur, tol) < 1.0 {
            return Ok(Basin::Oscillate);
        }
    }
    Err(ModelError::NoCycle(format!(
        "orbit from ({}, {}) settled nowhere within {max_time} ms",
        s.v, s.w
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> MlParams {
        MlParams::default()
    }

    #[test]
    fn gating_trivial_points() {
        let g = gating(-1.2, &p());
        assert_relative_eq!(g.m_inf, 0.5, epsilon = 1e-15);
        let g = gating(2.0, &p());
        assert_relative_eq!(g.w_inf, 0.5, epsilon = 1e-15);
        assert_relative_eq!(g.tau_w, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gating_at_zero_matches_direct_evaluation() {
        // 0.5 * (1 + tanh(1.2 / 18)), evaluated with mpmath
        let expected = 0.533284038251131;
        assert_relative_eq!(gating(0.0, &p()).m_inf, expected, max_relative = 1e-13);
    }

    #[test]
    fn gating_is_monotone_and_bounded() {
        let mut prev = gating(-100.0, &p());
        for k in 1..=400 {
            let v = -100.0 + k as f64 * 0.5;
            let g = gating(v, &p());
            assert!(g.m_inf > prev.m_inf && g.w_inf > prev.w_inf);
            assert!(g.m_inf > 0.0 && g.m_inf < 1.0);
            assert!(g.tau_w > 0.0 && g.tau_w <= 1.0);
            prev = g;
        }
    }

    #[test]
    fn vector_field_term_by_term() {
        // (0, 0.5), default parameters, term by term
        let m0 = 0.5 * (1.0 + (1.2f64 / 18.0).tanh());
        let dv = (-4.4 * m0 * (0.0 - 120.0) - 8.0 * 0.5 * (0.0 + 84.0) - 2.0 * (0.0 + 60.0) + 92.0)
            / 20.0;
        let winf = 0.5 * (1.0 + (-2.0f64 / 30.0).tanh());
        let dw = 0.04 * (winf - 0.5) * (-2.0f64 / 60.0).cosh();
        let (a, b) = vector_field(State::new(0.0, 0.5), &p());
        assert_relative_eq!(a, dv, max_relative = 1e-14);
        assert_relative_eq!(b, dw, max_relative = 1e-14);
        // numeric spot value from an independent mpmath evaluation
        assert_relative_eq!(a, -4.121301390170134, max_relative = 1e-12);
    }

    #[test]
    fn nullcline_has_zero_w_velocity() {
        for v in [-50.0, -20.0, 0.0, 30.0] {
            let w = gating(v, &p()).w_inf;
            assert!(vector_field(State::new(v, w), &p()).1.abs() < 1e-16);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = State::new(-20.0, 0.2);
        let j = jacobian(s, &p());
        let e = 1e-6;
        let fd = |dv: f64, dw: f64| {
            let a = vector_field(State::new(s.v + dv, s.w + dw), &p());
            let b = vector_field(State::new(s.v - dv, s.w - dw), &p());
            ((a.0 - b.0) / (2.0 * e), (a.1 - b.1) / (2.0 * e))
        };
        let (c0, c1) = (fd(e, 0.0), fd(0.0, e));
        assert_relative_eq!(j[0][0], c0.0, max_relative = 1e-6);
        assert_relative_eq!(j[1][0], c0.1, max_relative = 1e-6);
        assert_relative_eq!(j[0][1], c1.0, max_relative = 1e-6);
        assert_relative_eq!(j[1][1], c1.1, max_relative = 1e-6);
    }

    #[test]
    fn integrate_rejects_bad_steps() {
        let s = State::new(-30.0, 0.2);
        assert!(matches!(integrate(s, 1.0, 0.0, &p()), Err(ModelError::BadStep { .. })));
        assert!(matches!(integrate(s, 0.001, 0.01, &p()), Err(ModelError::BadStep { .. })));
    }

    #[test]
    fn integrate_flags_insane_states() {
        let s = State::new(-30.0, 2.0);
        assert!(matches!(integrate(s, 1.0, 0.01, &p()), Err(ModelError::NonFinite { .. })));
    }

    #[test]
    fn integrate_ends_exactly_at_duration() {
        let o = integrate(State::new(-30.0, 0.2), 1.005, 0.01, &p()).unwrap();
        assert_relative_eq!(*o.times.last().unwrap(), 1.005, epsilon = 1e-15);
        assert!(o.times.windows(2).all(|t| t[1] > t[0]));
        assert_eq!(o.times.len(), o.states.len());
    }

    #[test]
    fn fixed_point_is_spiral_sink() {
        let fp = find_fixed_point(State::new(-26.0, 0.1), &p()).unwrap();
        let (a, b) = vector_field(fp.location, &p());
        assert!(a.hypot(b) < 1e-10);
        assert_eq!(fp.stability, Stability::Stable);
        assert!(fp.is_spiral());
        assert!(fp.eigenvalues[0].re < 0.0);
        let again = find_fixed_point(fp.location, &p()).unwrap();
        assert!(again.iterations <= 1);
        assert_relative_eq!(again.location.v, fp.location.v, epsilon = 1e-9);
    }

    #[test]
    fn fixed_point_agrees_with_nullcline_bisection() {
        // independent route: on the w-nullcline w = w_inf(v), bisect dv/dt
        let params = p();
        let g = |v: f64| vector_field(State::new(v, gating(v, &params).w_inf), &params).0;
        let (mut lo, mut hi) = (-30.0, -20.0);
        assert!(g(lo).signum() != g(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == g(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fp = find_fixed_point(State::new(-26.0, 0.1), &params).unwrap();
        assert_relative_eq!(fp.location.v, 0.5 * (lo + hi), epsilon = 1e-9);
    }

    #[test]
    fn fixed_point_with_zero_current_matches_grid_scan() {
        let mut params = p();
        params.i_app = 0.0;
        // dense scan of the reduced nullcline function for a sign change
        let g = |v: f64| vector_field(State::new(v, gating(v, &params).w_inf), &params).0;
        let mut root = None;
        let mut v = -80.0;
        while v < 40.0 {
            if g(v).signum() != g(v + 0.01).signum() {
                root = Some(v);
                break;
            }
            v += 0.01;
        }
        let root = root.expect("scan finds a root");
        let fp = find_fixed_point(State::new(root, gating(root, &params).w_inf), &params).unwrap();
        let (a, b) = vector_field(fp.location, &params);
        assert!(a.hypot(b) < 1e-10);
        assert!((fp.location.v - root).abs() < 0.02);
        let default_fp = find_fixed_point(REST_GUESS, &p()).unwrap();
        assert!((fp.location.v - default_fp.location.v).abs() > 1.0);
    }

    #[test]
    fn params_validation() {
        let mut q = p();
        q.c = 0.0;
        assert!(matches!(q.validate(), Err(ModelError::InvalidParams { field: "c", .. })));
        let mut q = p();
        q.v4 = 0.0;
        assert!(q.validate().is_err());
        let mut q = p();
        q.g_k = -1.0;
        assert!(q.validate().is_err());
        assert!(p().validate().is_ok());
    }

    fn square() -> LimitCycle {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)];
        LimitCycle {
            polyline: pts.iter().map(|&(v, w)| State::new(v, w)).collect(),
            period: 1.0,
            stability: Stability::Unstable,
        }
    }

    #[test]
    fn ray_casting_on_square() {
        let sq = square();
        assert!(sq.contains(State::new(0.5, 0.5)));
        assert!(!sq.contains(State::new(1.5, 0.5)));
        assert!(!sq.contains(State::new(0.5, -0.5)));
        assert!(sq.is_simple());
        assert!(sq.is_closed());
        let band = Band { dv: 0.1, dw: 0.1 };
        assert!(matches!(
            classify_basin_with_band(State::new(0.95, 0.5), &sq, band),
            Err(ModelError::Ambiguous { .. })
        ));
        assert_eq!(
            classify_basin_with_band(State::new(0.5, 0.5), &sq, band).unwrap(),
            Basin::Rest
        );
    }

    #[test]
    fn bowtie_is_not_simple() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)];
        let c = LimitCycle {
            polyline: pts.iter().map(|&(v, w)| State::new(v, w)).collect(),
            period: 1.0,
            stability: Stability::Stable,
        };
        assert!(!c.is_simple());
    }
}
