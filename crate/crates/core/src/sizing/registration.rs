//! Robust all-pairs registration of per-frame detection centroids.
//!
//! Every frame `i > 0` gets a rigid transform `T_i(c) = Exp(w_i) c + t_i`;
//! frame 0 is pinned to the identity. The objective sums the robust loss
//! `rho(z) = s^2 atan(z / s^2)` of the squared distance `z` between every
//! pair of corrected centroids from different frames, plus a small
//! quadratic pull of each rotation vector toward zero.

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Pose, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationParams {
    /// Robust loss scale `s`, metres.
    pub loss_scale: f64,
    pub rotation_weight: f64,
    /// Scale multipliers solved in sequence, each warm-starting the next;
    /// the last should be 1.
    pub continuation: Vec<f64>,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
    /// Ignore pairs farther apart than this before optimisation.
    pub pair_gate: Option<f64>,
    /// Plain squared loss instead of the robust loss.
    pub squared_loss: bool,
    /// After the continuation solve, try moving single frames by one
    /// detection-to-detection shift and re-solving; a move is kept when it
    /// lowers the objective. Up to this many sweeps over the frames.
    pub frame_hops: usize,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            loss_scale: 0.005,
            rotation_weight: 1e-3,
            continuation: vec![8.0, 4.0, 2.0, 1.0],
            max_iterations: 200,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-8,
            pair_gate: None,
            squared_loss: false,
            frame_hops: 3,
        }
    }
}

/// Recovered transforms, one per frame, mapping frame coordinates into the
/// frame-0 gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTransformSet {
    pub transforms: Vec<Pose>,
    pub converged: bool,
    pub iterations: usize,
    pub cost: f64,
}

impl FrameTransformSet {
    pub fn identity(n: usize) -> Self {
        Self {
            transforms: vec![Pose::identity(); n],
            converged: true,
            iterations: 0,
            cost: 0.0,
        }
    }

    pub fn apply(&self, frame: usize, p: &Vec3) -> Vec3 {
        self.transforms[frame].transform_point(&(*p).into()).coords
    }

    /// Displacement the transform of `frame` applies at `p`.
    pub fn displacement_at(&self, frame: usize, p: &Vec3) -> Vec3 {
        self.apply(frame, p) - p
    }
}

#[inline]
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn exp_so3(w: &Vec3) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Right Jacobian of SO(3): `Exp(w + dw) ~ Exp(w) Exp(Jr(w) dw)`.
pub fn right_jacobian(w: &Vec3) -> Matrix3<f64> {
    let th2 = w.norm_squared();
    let k = skew(w);
    if th2 < 1e-10 {
        return Matrix3::identity() - k * 0.5 + k * k / 6.0;
    }
    let th = th2.sqrt();
    Matrix3::identity() - k * ((1.0 - th.cos()) / th2) + k * k * ((th - th.sin()) / (th2 * th))
}

/// `(rho(z), rho'(z))`.
#[inline]
pub fn arctan_loss(z: f64, scale: f64) -> (f64, f64) {
    let s2 = scale * scale;
    let u = z / s2;
    (s2 * u.atan(), 1.0 / (1.0 + u * u))
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Pair {
    pub fi: usize,
    pub fj: usize,
    pub ci: Vec3,
    pub cj: Vec3,
}

pub(crate) fn build_pairs(frames: &[Vec<Vec3>], gate: Option<f64>) -> Vec<Pair> {
    let mut pairs = Vec::new();
    for fi in 0..frames.len() {
        for fj in fi + 1..frames.len() {
            for ci in &frames[fi] {
                for cj in &frames[fj] {
                    if gate.is_none_or(|g| (ci - cj).norm() <= g) {
                        pairs.push(Pair { fi, fj, ci: *ci, cj: *cj });
                    }
                }
            }
        }
    }
    pairs
}

/// Frame state: rotation vector and translation for frames `1..n`.
#[derive(Clone, Debug)]
pub(crate) struct State {
    pub x: DVector<f64>,
}

impl State {
    fn rot(&self, f: usize) -> (Vec3, Matrix3<f64>) {
        if f == 0 {
            return (Vec3::zeros(), Matrix3::identity());
        }
        let o = 6 * (f - 1);
        let w = Vec3::new(self.x[o], self.x[o + 1], self.x[o + 2]);
        (w, exp_so3(&w))
    }

    fn trans(&self, f: usize) -> Vec3 {
        if f == 0 {
            return Vec3::zeros();
        }
        let o = 6 * (f - 1) + 3;
        Vec3::new(self.x[o], self.x[o + 1], self.x[o + 2])
    }
}

/// Pair residual and its Jacobian blocks `[d/dw_i, d/dt_i]`, `[d/dw_j, d/dt_j]`
/// (each 3x6).
pub(crate) fn pair_residual(
    state: &State,
    p: &Pair,
) -> (Vec3, nalgebra::Matrix3x6<f64>, nalgebra::Matrix3x6<f64>) {
    let (wi, ri) = state.rot(p.fi);
    let (wj, rj) = state.rot(p.fj);
    let r = ri * p.ci + state.trans(p.fi) - rj * p.cj - state.trans(p.fj);
    let mut ji = nalgebra::Matrix3x6::zeros();
    let mut jj = nalgebra::Matrix3x6::zeros();
    ji.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-ri * skew(&p.ci) * right_jacobian(&wi)));
    ji.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    jj.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rj * skew(&p.cj) * right_jacobian(&wj)));
    jj.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Matrix3::identity()));
    (r, ji, jj)
}

pub(crate) fn objective(state: &State, pairs: &[Pair], n_frames: usize, params: &RegistrationParams, scale: f64) -> f64 {
    let mut cost = 0.0;
    for p in pairs {
        let (r, _, _) = pair_residual(state, p);
        let z = r.norm_squared();
        cost += if params.squared_loss { z } else { arctan_loss(z, scale).0 };
    }
    for f in 1..n_frames {
        cost += params.rotation_weight * state.rot(f).0.norm_squared();
    }
    0.5 * cost
}

/// Gradient and Gauss-Newton normal matrix of the robust objective, with
/// residual blocks reweighted by `rho'(z)`.
pub(crate) fn normal_equations(
    state: &State,
    pairs: &[Pair],
    n_frames: usize,
    params: &RegistrationParams,
    scale: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = 6 * (n_frames - 1);
    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for p in pairs {
        let (r, ji, jj) = pair_residual(state, p);
        let wgt = if params.squared_loss { 1.0 } else { arctan_loss(r.norm_squared(), scale).1 };
        let blocks = [(p.fi, ji), (p.fj, jj)];
        for (fa, ja) in &blocks {
            if *fa == 0 {
                continue;
            }
            let oa = 6 * (fa - 1);
            let ga = ja.transpose() * r * wgt;
            let mut gv = g.rows_mut(oa, 6);
            gv += ga;
            for (fb, jb) in &blocks {
                if *fb == 0 {
                    continue;
                }
                let ob = 6 * (fb - 1);
                let hab = ja.transpose() * jb * wgt;
                let mut hv = h.view_mut((oa, ob), (6, 6));
                hv += hab;
            }
        }
    }
    for f in 1..n_frames {
        let o = 6 * (f - 1);
        let w = state.rot(f).0;
        for k in 0..3 {
            g[o + k] += params.rotation_weight * w[k];
            h[(o + k, o + k)] += params.rotation_weight;
        }
    }
    (h, g)
}

fn to_pose(state: &State, f: usize) -> Pose {
    let (_, r) = state.rot(f);
    Isometry3::from_parts(
        Translation3::from(state.trans(f)),
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
    )
}

/// Levenberg-Marquardt on one loss scale. Returns (iterations, converged).
fn solve_stage(
    state: &mut State,
    pairs: &[Pair],
    n_frames: usize,
    params: &RegistrationParams,
    scale: f64,
) -> (usize, bool) {
    let mut lambda = 1e-3;
    let mut cost = objective(state, pairs, n_frames, params, scale);
    for it in 0..params.max_iterations {
        let (h, g) = normal_equations(state, pairs, n_frames, params, scale);
        if g.amax() < params.gradient_tolerance {
            return (it, true);
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = h.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = State { x: &state.x + &step };
            let trial_cost = objective(&trial, pairs, n_frames, params, scale);
            if trial_cost <= cost {
                let small = step.norm() < params.step_tolerance;
                *state = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small {
                    return (it + 1, true);
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent at any damping: a stationary point to working precision
            return (it + 1, true);
        }
    }
    (params.max_iterations, false)
}

/// Registers `frames` (per-frame detection centroids) into frame 0's gauge.
pub fn register_global(frames: &[Vec<Vec3>], params: &RegistrationParams) -> FrameTransformSet {
    let n = frames.len();
    if n <= 1 {
        return FrameTransformSet::identity(n);
    }
    let pairs = build_pairs(frames, params.pair_gate);
    let (mut state, mut iterations, mut converged) = solve_from(DVector::zeros(6 * (n - 1)), &pairs, n, params);
    if !params.squared_loss {
        let scale = params.loss_scale;
        let mut cost = objective(&state, &pairs, n, params, scale);
        let trial_params = RegistrationParams {
            max_iterations: params.max_iterations.min(HOP_ITERATIONS),
            ..params.clone()
        };
        let mut hopped = false;
        for _ in 0..params.frame_hops {
            let mut improved = false;
            for f in 0..n {
                for d in hops(frames, &state, f, scale, HOP_CANDIDATES) {
                    let mut trial = state.clone();
                    shift_frame(&mut trial, frames, f, &d);
                    iterations += solve_stage(&mut trial, &pairs, n, &trial_params, scale).0;
                    let c = objective(&trial, &pairs, n, params, scale);
                    if c < cost - 1e-12 {
                        state = trial;
                        cost = c;
                        hopped = true;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if hopped {
            let (it, ok) = solve_stage(&mut state, &pairs, n, params, scale);
            iterations += it;
            converged = ok;
        }
    }
    if !converged {
        log::warn!("registration stopped at the iteration limit");
    }
    FrameTransformSet {
        transforms: (0..n).map(|f| to_pose(&state, f)).collect(),
        converged,
        iterations,
        cost: objective(&state, &pairs, n, params, params.loss_scale),
    }
}

fn solve_from(x: DVector<f64>, pairs: &[Pair], n: usize, params: &RegistrationParams) -> (State, usize, bool) {
    let mut state = State { x };
    let stages: Vec<f64> = if params.squared_loss || params.continuation.is_empty() {
        vec![1.0]
    } else {
        params.continuation.clone()
    };
    let mut iterations = 0;
    let mut converged = true;
    let last = stages.len() - 1;
    for (k, mult) in stages.iter().enumerate() {
        let (it, ok) = solve_stage(&mut state, pairs, n, params, params.loss_scale * mult);
        iterations += it;
        if k == last {
            converged = ok;
        }
    }
    (state, iterations, converged)
}

const HOP_CANDIDATES: usize = 4;
const HOP_MIN: f64 = 1e-3;
const HOP_ITERATIONS: usize = 10;

/// Up to `k` distinct shifts of frame `f`, at least 1 mm long, among all
/// detection-to-detection offsets against the other frames at their current
/// transforms; ranked by the loss of the pairs involving `f` after the shift.
fn hops(frames: &[Vec<Vec3>], state: &State, f: usize, scale: f64, k: usize) -> Vec<Vec3> {
    let world: Vec<Vec<Vec3>> = frames
        .iter()
        .enumerate()
        .map(|(g, pts)| {
            let (_, r) = state.rot(g);
            let t = state.trans(g);
            pts.iter().map(|c| r * c + t).collect()
        })
        .collect();
    let others: Vec<Vec3> = world
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != f)
        .flat_map(|(_, p)| p.iter().copied())
        .collect();
    let mine = &world[f];
    let score = |d: &Vec3| -> f64 {
        let mut c = 0.0;
        for a in &others {
            for b in mine {
                c += arctan_loss((b + d - a).norm_squared(), scale).0;
            }
        }
        c
    };
    let mut cands: Vec<(f64, Vec3)> = Vec::new();
    for a in &others {
        for b in mine {
            let d = a - b;
            if d.norm() >= HOP_MIN {
                cands.push((score(&d), d));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec3> = Vec::new();
    for (_, d) in cands {
        if out.len() == k {
            break;
        }
        if out.iter().all(|o| (o - d).norm() >= HOP_MIN) {
            out.push(d);
        }
    }
    out
}

/// Moves frame `f` by `d` in world coordinates, resetting its rotation
/// about the centroid of its detections. Frame 0 is the gauge, so moving it
/// moves every other frame by `-d` instead.
fn shift_frame(state: &mut State, frames: &[Vec<Vec3>], f: usize, d: &Vec3) {
    let n = frames.len();
    if f == 0 {
        for g in 1..n {
            let o = 6 * (g - 1) + 3;
            for k in 0..3 {
                state.x[o + k] -= d[k];
            }
        }
        return;
    }
    let c = frames[f].iter().sum::<Vec3>() / frames[f].len().max(1) as f64;
    let (_, r) = state.rot(f);
    let t = r * c + state.trans(f) + d - c;
    let o = 6 * (f - 1);
    for k in 0..3 {
        state.x[o + k] = 0.0;
        state.x[o + 3 + k] = t[k];
    }
}

/// Objective and the gradient the solver uses, at stacked parameters
/// `[w_1, t_1, w_2, t_2, ...]` for frames `1..n`, with loss scale `scale`.
pub fn objective_gradient(frames: &[Vec<Vec3>], x: &[f64], params: &RegistrationParams, scale: f64) -> (f64, Vec<f64>) {
    let n = frames.len();
    assert_eq!(x.len(), 6 * n.saturating_sub(1), "parameter length");
    let pairs = build_pairs(frames, params.pair_gate);
    let state = State {
        x: DVector::from_column_slice(x),
    };
    if n <= 1 {
        return (0.0, Vec::new());
    }
    let (_, g) = normal_equations(&state, &pairs, n, params, scale);
    (objective(&state, &pairs, n, params, scale), g.as_slice().to_vec())
}

/// Objective of `transforms` on `frames` at the configured final scale.
pub fn registration_objective(frames: &[Vec<Vec3>], transforms: &[Pose], params: &RegistrationParams) -> f64 {
    let pairs = build_pairs(frames, params.pair_gate);
    let mut cost = 0.0;
    for p in &pairs {
        let a = transforms[p.fi].transform_point(&p.ci.into());
        let b = transforms[p.fj].transform_point(&p.cj.into());
        let z = (a - b).norm_squared();
        cost += if params.squared_loss { z } else { arctan_loss(z, params.loss_scale).0 };
    }
    0.5 * cost
}
