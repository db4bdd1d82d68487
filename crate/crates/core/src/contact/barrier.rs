//! Log barrier on the unsigned distance and the smoothed friction transition.

/// `b(d) = -(d - dhat)^2 ln(d / dhat)` on `(0, dhat)`, zero beyond.
pub fn barrier(d: f64, dhat: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let g = d - dhat;
    -g * g * (d / dhat).ln()
}

/// `db/dd`.
pub fn barrier_derivative(d: f64, dhat: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let g = d - dhat;
    -2.0 * g * (d / dhat).ln() - g * g / d
}

/// `d^2 b/dd^2`.
pub fn barrier_second_derivative(d: f64, dhat: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let g = d - dhat;
    -2.0 * (d / dhat).ln() - 4.0 * g / d + g * g / (d * d)
}

/// Smoothed static-to-dynamic transition on the tangential displacement
/// magnitude `y`, reaching 1 at `y = h eps_v`.
pub fn f1(y: f64, eps_v: f64, h: f64) -> f64 {
    let eh = eps_v * h;
    if y >= eh {
        1.0
    } else if y <= 0.0 {
        0.0
    } else {
        -y * y / (eh * eh) + 2.0 * y / eh
    }
}

/// Antiderivative of [`f1`] with `f0(h eps_v) = h eps_v`.
pub fn f0(x: f64, eps_v: f64, h: f64) -> f64 {
    let eh = eps_v * h;
    if x >= eh {
        x
    } else {
        -x * x * x / (3.0 * eh * eh) + x * x / eh + eh / 3.0
    }
}

/// `f1(y) / y`, finite at `y = 0`.
pub fn f1_over_y(y: f64, eps_v: f64, h: f64) -> f64 {
    let eh = eps_v * h;
    if y >= eh {
        1.0 / y
    } else {
        -y / (eh * eh) + 2.0 / eh
    }
}
