use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ellipse in pixel coordinates with full axis lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub major: f64,
    pub minor: f64,
    /// Direction of the major axis, radians in `(-pi/2, pi/2]`.
    pub angle: f64,
    /// Conic `[A, B, C, D, E, F]` of `A x^2 + B xy + C y^2 + D x + E y + F = 0`.
    pub conic: [f64; 6],
}

impl Ellipse {
    /// First-order geometric distance of `(x, y)` to the conic.
    pub fn sampson_distance(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e, f] = self.conic;
        let q = a * x * x + b * x * y + c * y * y + d * x + e * y + f;
        let gx = 2.0 * a * x + b * y + d;
        let gy = b * x + 2.0 * c * y + e;
        q.abs() / (gx * gx + gy * gy).sqrt()
    }
}

/// Direct least-squares ellipse fit with the ellipse-specific constraint
/// `4AC - B^2 = 1`, solved through the reduced 3x3 eigenproblem on
/// centred and scaled coordinates, then refined by minimising orthogonal
/// point-to-ellipse distances.
///
/// The algebraic fit alone shrinks elongated ellipses by up to about a
/// pixel at the tips; the geometric refinement removes that. If the
/// refinement fails the algebraic solution is returned.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<Ellipse> {
    if points.len() < 5 {
        return Err(Error::InvalidParams(format!("ellipse fit needs 5 points, got {}", points.len())));
    }
    let algebraic = conic_to_ellipse(direct_fit(points)?)?;
    Ok(refine_geometric(points, &algebraic).unwrap_or(algebraic))
}

fn direct_fit(points: &[(f64, f64)]) -> Result<[f64; 6]> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let scale = (points.iter().map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2)).sum::<f64>() / n).sqrt();
    if !(scale > 1e-12) {
        return Err(Error::InvalidParams("degenerate point set".into()));
    }
    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for p in points {
        let (x, y) = ((p.0 - mx) / scale, (p.1 - my) / scale);
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("collinear points".into()))?;
    let t = -s3_inv * s2.transpose();
    let reduced = s1 + s2 * t;
    // inverse of the constraint block [[0, 0, 2], [0, -1, 0], [2, 0, 0]]
    let c1_inv = Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let m = c1_inv * reduced;
    let eig = m
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidParams("complex eigenvalues in ellipse fit".into()))?;
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in eig.iter() {
        let shifted = m - Matrix3::identity() * *lambda;
        let rows = [shifted.row(0).transpose(), shifted.row(1).transpose(), shifted.row(2).transpose()];
        let v = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])]
            .into_iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        if v.norm() < 1e-300 {
            continue;
        }
        let v = v.normalize();
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 && best.is_none_or(|(c, _)| cond > c) {
            best = Some((cond, v));
        }
    }
    let (_, a1) = best.ok_or_else(|| Error::InvalidParams("no elliptical solution".into()))?;
    let a2 = t * a1;
    // conic in normalized coordinates, mapped back to pixels
    let (a, b, c, d, e, f) = (a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]);
    let s = scale;
    let (a, b, c) = (a / (s * s), b / (s * s), c / (s * s));
    let (d, e) = (d / s, e / s);
    Ok([
        a,
        b,
        c,
        d - 2.0 * a * mx - b * my,
        e - 2.0 * c * my - b * mx,
        a * mx * mx + b * mx * my + c * my * my - d * mx - e * my + f,
    ])
}

/// Root of the distance equation for a first-quadrant point, by bisection.
fn distance_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = s0;
    for _ in 0..160 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let g = (n0 / (s + r0)).powi(2) + (z1 / (s + 1.0)).powi(2) - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Closest point on the axis-aligned ellipse with semi-axes `e0 >= e1` to
/// the first-quadrant point `(y0, y1)`.
fn closest_point_q1(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let (z0, z1) = (y0 / e0, y1 / e1);
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return (y0, y1);
            }
            let r0 = (e0 / e1).powi(2);
            let s = distance_root(r0, z0, z1, g);
            (r0 * y0 / (s + r0), y1 / (s + 1.0))
        } else {
            (0.0, e1)
        }
    } else {
        let (num, den) = (e0 * y0, e0 * e0 - e1 * e1);
        if num < den {
            let x = num / den;
            (e0 * x, e1 * (1.0 - x * x).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Signed orthogonal distance of `p` to the ellipse `[cx, cy, a, b, theta]`
/// (semi-axes) and its gradient with respect to those parameters.
fn orthogonal_residual(p: (f64, f64), x: &[f64; 5]) -> (f64, [f64; 5]) {
    let [cx, cy, a, b, th] = *x;
    let (c, s) = (th.cos(), th.sin());
    let (dx, dy) = (p.0 - cx, p.1 - cy);
    let (qx, qy) = (dx * c + dy * s, -dx * s + dy * c);
    let (fx, fy) = if a >= b {
        closest_point_q1(a, b, qx.abs(), qy.abs())
    } else {
        let (u, v) = closest_point_q1(b, a, qy.abs(), qx.abs());
        (v, u)
    };
    let (fx, fy) = (fx.copysign(qx), fy.copysign(qy));
    let (cphi, sphi) = (fx / a, fy / b);
    let (nx, ny) = (cphi / a, sphi / b);
    let nn = nx.hypot(ny);
    let (nx, ny) = (nx / nn, ny / nn);
    let r = nx * (qx - fx) + ny * (qy - fy);
    // the foot point is stationary, so only its explicit parameter
    // dependence enters the gradient
    let (wx, wy) = (nx * c - ny * s, nx * s + ny * c);
    let da = -(wx * cphi * c + wy * cphi * s);
    let db = -(-wx * sphi * s + wy * sphi * c);
    let dth = -(wx * (-fx * s - fy * c) + wy * (fx * c - fy * s));
    (r, [-wx, -wy, da, db, dth])
}

fn refine_geometric(points: &[(f64, f64)], init: &Ellipse) -> Option<Ellipse> {
    use nalgebra::{SMatrix, SVector};
    let mut x = [init.center.0, init.center.1, init.major / 2.0, init.minor / 2.0, init.angle];
    let cost = |x: &[f64; 5]| points.iter().map(|p| orthogonal_residual(*p, x).0.powi(2)).sum::<f64>();
    let mut current = cost(&x);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let mut h = SMatrix::<f64, 5, 5>::zeros();
        let mut g = SVector::<f64, 5>::zeros();
        for p in points {
            let (r, j) = orthogonal_residual(*p, &x);
            let j = SVector::<f64, 5>::from(j);
            h += j * j.transpose();
            g += j * r;
        }
        let mut moved = false;
        for _ in 0..20 {
            let mut damped = h;
            for k in 0..5 {
                damped[(k, k)] *= 1.0 + lambda;
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = std::array::from_fn(|k| x[k] + step[k]);
            let c = cost(&trial);
            if c.is_finite() && c <= current && trial[2] > 0.0 && trial[3] > 0.0 {
                x = trial;
                current = c;
                lambda = (lambda / 3.0).max(1e-12);
                moved = step.norm() > 1e-7;
                break;
            }
            lambda *= 4.0;
        }
        if !moved {
            break;
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    let [cx, cy, a, b, th] = x;
    let (c, s) = (th.cos(), th.sin());
    let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
    let ca = c * c * ia + s * s * ib;
    let cb = 2.0 * c * s * (ia - ib);
    let cc = s * s * ia + c * c * ib;
    let conic = [
        ca,
        cb,
        cc,
        -2.0 * ca * cx - cb * cy,
        -cb * cx - 2.0 * cc * cy,
        ca * cx * cx + cb * cx * cy + cc * cy * cy - 1.0,
    ];
    conic_to_ellipse(conic).ok()
}

pub fn conic_to_ellipse(conic: [f64; 6]) -> Result<Ellipse> {
    let [a, b, c, d, e, f] = conic;
    let q = Matrix2::new(2.0 * a, b, b, 2.0 * c);
    let center = q
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("conic has no centre".into()))?
        * nalgebra::Vector2::new(-d, -e);
    let f0 = f + (d * center.x + e * center.y) / 2.0;
    let eig = SymmetricEigen::new(Matrix2::new(a, b / 2.0, b / 2.0, c));
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let r0 = -f0 / l0;
    let r1 = -f0 / l1;
    if !(r0 > 0.0 && r1 > 0.0) {
        return Err(Error::InvalidParams("conic is not a real ellipse".into()));
    }
    let (ax0, ax1) = (2.0 * r0.sqrt(), 2.0 * r1.sqrt());
    let (major, minor, dir) = if ax0 >= ax1 {
        (ax0, ax1, eig.eigenvectors.column(0).into_owned())
    } else {
        (ax1, ax0, eig.eigenvectors.column(1).into_owned())
    };
    let mut angle = dir.y.atan2(dir.x);
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    } else if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    }
    Ok(Ellipse {
        center: (center.x, center.y),
        major,
        minor,
        angle,
        conic,
    })
}
