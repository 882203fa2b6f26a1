/// Hamilton quaternion `[w, x, y, z]`.
pub type Quat = [f64; 4];

pub fn mul(a: Quat, b: Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn conj(q: Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

pub fn normalize(q: Quat) -> Quat {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

/// `exp` of the rotation vector `v`: `(cos(θ/2), sin(θ/2) v/θ)`.
pub fn from_rotvec(v: [f64; 3]) -> Quat {
    let t = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if t == 0.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let s = (t / 2.0).sin() / t;
    [(t / 2.0).cos(), v[0] * s, v[1] * s, v[2] * s]
}

/// Rotation vector of `q` with angle in `[0, π]`.
pub fn to_rotvec(q: Quat) -> [f64; 3] {
    let q = if q[0] < 0.0 { q.map(|v| -v) } else { q };
    let s = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if s == 0.0 {
        return [0.0; 3];
    }
    let angle = 2.0 * s.atan2(q[0]);
    [q[1] / s * angle, q[2] / s * angle, q[3] / s * angle]
}

/// Row-major rotation matrix of a unit quaternion.
pub fn to_matrix(q: Quat) -> [[f64; 3]; 3] {
    let [w, x, y, z] = normalize(q);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Spherical linear interpolation on the short arc.
pub fn slerp(a: Quat, b: Quat, s: f64) -> Quat {
    let mut d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let b = if d < 0.0 {
        d = -d;
        b.map(|v| -v)
    } else {
        b
    };
    if d > 1.0 - 1e-15 {
        return normalize([0, 1, 2, 3].map(|i| a[i] + s * (b[i] - a[i])));
    }
    let omega = d.clamp(-1.0, 1.0).acos();
    let (wa, wb) = (((1.0 - s) * omega).sin() / omega.sin(), (s * omega).sin() / omega.sin());
    [0, 1, 2, 3].map(|i| wa * a[i] + wb * b[i])
}

/// Integrates body rates with quaternion products:
/// `q_n = q_{n-1} ⊗ exp(ω_n dt_n)`.
pub fn integrate(q0: Quat, omega: &[[f64; 3]], t: &[f64]) -> Vec<Quat> {
    let mut out = vec![q0];
    let mut q = q0;
    for n in 1..omega.len() {
        let dt = t[n] - t[n - 1];
        q = normalize(mul(q, from_rotvec(omega[n].map(|w| w * dt))));
        out.push(q);
    }
    out
}
