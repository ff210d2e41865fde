//! Bessel functions of the first kind `J_k(x)` for a run of integer orders.

/// Values below this are treated as zero when truncating an expansion.
pub const TAIL_TOL: f64 = 1e-16;

/// Order beyond which `|J_k(x)|` is negligible in double precision.
pub fn order_bound(x: f64) -> usize {
    let x = x.abs();
    (x + 12.0 * x.cbrt() + 30.0).ceil() as usize
}

/// `J_0(x) .. J_{kmax}(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum J_{2k} = 1`.
pub fn bessel_j_run(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = kmax.max(order_bound(ax)) + 16 + (10.0 * ax.sqrt()) as usize;
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    let mut k = start;
    loop {
        if k <= kmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = (2.0 * k as f64 / ax) * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut().skip(k + 1) {
                *v *= s;
            }
        }
    }
    let inv = 1.0 / norm;
    for (k, v) in out.iter_mut().enumerate() {
        *v *= inv;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Bessel run truncated after the last order whose magnitude exceeds `TAIL_TOL`.
pub fn bessel_j_truncated(x: f64) -> Vec<f64> {
    let mut j = bessel_j_run(x, order_bound(x));
    let keep = j
        .iter()
        .rposition(|v| v.abs() > TAIL_TOL)
        .map_or(1, |p| p + 1);
    j.truncate(keep);
    j
}
