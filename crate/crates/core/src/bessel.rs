//! Bessel functions of the first kind by ascending power series.
//!
//! Arguments in this crate are modulation indices, always well below the
//! series' comfortable range (|x| < 8). Terms are accumulated until they fall
//! below 1e-16 of the running sum.

/// J_n(x) for integer order n (negative orders via J_{-n} = (-1)^n J_n).
pub fn jn(order: i64, x: f64) -> f64 {
    if order < 0 {
        let v = jn(-order, x);
        return if order % 2 == 0 { v } else { -v };
    }
    let n = order as u64;
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // Leading term (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = half * half;
    for k in 1..200u64 {
        term *= -q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

pub fn j0(x: f64) -> f64 {
    jn(0, x)
}

pub fn j1(x: f64) -> f64 {
    jn(1, x)
}
