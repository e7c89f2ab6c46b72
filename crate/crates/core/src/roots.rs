//! Scalar root isolation: bracket expansion, bisection and sign-change scans.

/// Default absolute bracket width at which bisection stops.
pub const ROOT_TOL: f64 = 1e-10;

/// Bisection on a sign change of `f` in `[a, b]`.
///
/// Runs until the bracket is no wider than `tol`, cannot be halved any further
/// in floating point, or `f` hits zero exactly; returns the midpoint of the
/// final bracket. `f(a)` and `f(b)` must have opposite signs.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if (b - a).abs() <= tol {
            break;
        }
    }
    0.5 * (a + b)
}

/// Walks away from `start` in direction `dir` (±1) with geometrically growing
/// steps (first step `initial`) until `accept(f(x))` holds. Gives up once the
/// step exceeds `cap`.
pub fn expand_bracket(
    mut f: impl FnMut(f64) -> f64,
    start: f64,
    dir: f64,
    initial: f64,
    cap: f64,
    accept: impl Fn(f64) -> bool,
) -> Option<f64> {
    let mut step = initial;
    while step <= cap {
        let x = start + dir * step;
        if accept(f(x)) {
            return Some(x);
        }
        step *= 2.0;
    }
    None
}

/// Evaluates `f` on `points + 1` equispaced nodes of `[a, b]` and returns the
/// sub-brackets where the sign changes, with their function values.
pub fn sign_changes(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, points: usize) -> Vec<(f64, f64)> {
    let points = points.max(1);
    let h = (b - a) / points as f64;
    let mut out = Vec::new();
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 1..=points {
        let x1 = if i == points { b } else { a + h * i as f64 };
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push((x0, x0));
        } else if f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push((x0, x0));
    }
    out
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
