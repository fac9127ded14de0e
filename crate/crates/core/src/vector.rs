//! Small dense-vector helpers.

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Infinity norm of `diag(d) * v`.
pub fn scaled_inf_norm(d: &[f64], v: &[f64]) -> f64 {
    d.iter()
        .zip(v)
        .fold(0.0f64, |acc, (s, x)| acc.max((s * x).abs()))
}

/// Elementwise projection onto the box `[l, u]`.
pub fn project_box(v: f64, l: f64, u: f64) -> f64 {
    v.max(l).min(u)
}
