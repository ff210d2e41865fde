//! Matrix-free application of `D - g * sum_j X_j`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::par::Execution;

/// Bits `0..TILE_BITS` are handled inside cache-sized tiles.
const TILE_BITS: usize = 10;
pub(crate) const CHUNK: usize = 4096;

/// Complex vector stored as separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct CVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CVec {
    pub fn zeros(len: usize) -> Self {
        CVec {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn uniform(len: usize) -> Self {
        let a = 1.0 / (len as f64).sqrt();
        CVec {
            re: vec![a; len],
            im: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn norm_sqr(&self, exec: Execution) -> f64 {
        chunked_sum(exec, self.len(), |lo, hi| {
            let mut s = 0.0;
            for i in lo..hi {
                s += self.re[i] * self.re[i] + self.im[i] * self.im[i];
            }
            s
        })
    }

    /// `sum_z w[z] |psi_z|^2`
    pub fn weighted_prob(&self, exec: Execution, w: &[f64]) -> f64 {
        chunked_sum(exec, self.len(), |lo, hi| {
            let mut s = 0.0;
            for i in lo..hi {
                s += w[i] * (self.re[i] * self.re[i] + self.im[i] * self.im[i]);
            }
            s
        })
    }

    /// Multiply by `e^{-i phi}`.
    pub fn rotate(&mut self, phi: f64) {
        let (s, c) = (-phi).sin_cos();
        for (r, i) in self.re.iter_mut().zip(self.im.iter_mut()) {
            let (a, b) = (*r, *i);
            *r = c * a - s * b;
            *i = s * a + c * b;
        }
    }

    /// `<self|other>`
    pub fn dot(&self, other: &CVec) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..self.len() {
            re += self.re[i] * other.re[i] + self.im[i] * other.im[i];
            im += self.re[i] * other.im[i] - self.im[i] * other.re[i];
        }
        (re, im)
    }
}

/// Sum of per-chunk partials in index order. Same chunking in both modes, so
/// the result does not depend on the execution mode.
pub(crate) fn chunked_sum<F>(exec: Execution, len: usize, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let part = |c: usize| f(c * CHUNK, ((c + 1) * CHUNK).min(len));
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && chunks > 1 {
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(part).collect();
        return parts.iter().sum();
    }
    let _ = exec;
    (0..chunks).map(part).sum()
}

/// `acc += c * x` elementwise.
pub(crate) fn axpy_real(exec: Execution, c: f64, x: &[f64], acc: &mut [f64]) {
    if c == 0.0 {
        return;
    }
    let body = |a: &mut [f64], x: &[f64]| {
        for (a, x) in a.iter_mut().zip(x) {
            *a += c * x;
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && x.len() > CHUNK {
        acc.par_chunks_mut(CHUNK)
            .zip(x.par_chunks(CHUNK))
            .for_each(|(a, x)| body(a, x));
        return;
    }
    let _ = exec;
    body(acc, x);
}

/// Diagonal-plus-hop operator on `m` qubits.
#[derive(Clone, Copy, Debug)]
pub struct Hop<'a> {
    pub m: usize,
    pub diag: &'a [f64],
    pub g: f64,
}

impl Hop<'_> {
    /// `dst = alpha * dst + (D - g sum_j X_j) src`, with `alpha` in {0, -1}.
    pub fn apply(&self, exec: Execution, src: &CVec, dst: &mut CVec, alpha: f64) {
        self.apply_real(exec, &src.re, &mut dst.re, alpha);
        self.apply_real(exec, &src.im, &mut dst.im, alpha);
    }

    pub fn apply_real(&self, exec: Execution, src: &[f64], dst: &mut [f64], alpha: f64) {
        let n = 1usize << self.m;
        debug_assert!(src.len() == n && dst.len() == n && self.diag.len() == n);
        if self.m < 3 {
            self.apply_small(src, dst, alpha);
            return;
        }
        let tb = TILE_BITS.min(self.m);
        let ts = 1usize << tb;
        let g = self.g;
        let tile = |((o, s), d): ((&mut [f64], &[f64]), &[f64])| tile_kernel(tb, g, alpha, d, s, o);
        #[cfg(feature = "parallel")]
        if exec.is_parallel() {
            dst.par_chunks_mut(ts)
                .zip(src.par_chunks(ts))
                .zip(self.diag.par_chunks(ts))
                .for_each(tile);
            for j in tb..self.m {
                par_pass(j, g, src, dst);
            }
            return;
        }
        let _ = exec;
        dst.chunks_mut(ts)
            .zip(src.chunks(ts))
            .zip(self.diag.chunks(ts))
            .for_each(tile);
        for j in tb..self.m {
            pass(j, g, src, dst);
        }
    }

    fn apply_small(&self, src: &[f64], dst: &mut [f64], alpha: f64) {
        for z in 0..1usize << self.m {
            let hop: f64 = (0..self.m).map(|j| src[z ^ (1 << j)]).sum();
            dst[z] = alpha * dst[z] + self.diag[z] * src[z] - self.g * hop;
        }
    }
}

#[inline]
fn tile_kernel(tb: usize, g: f64, alpha: f64, d: &[f64], src: &[f64], dst: &mut [f64]) {
    // bits 0..3 fused with the diagonal, eight amplitudes at a time
    for ((o, r), d) in dst
        .chunks_exact_mut(8)
        .zip(src.chunks_exact(8))
        .zip(d.chunks_exact(8))
    {
        for k in 0..8 {
            let h = r[k ^ 1] + r[k ^ 2] + r[k ^ 4];
            o[k] = alpha * o[k] + d[k] * r[k] - g * h;
        }
    }
    for j in 3..tb {
        pass(j, g, src, dst);
    }
}

#[inline]
fn pairs(lo_d: &mut [f64], hi_d: &mut [f64], lo_s: &[f64], hi_s: &[f64], g: f64) {
    for (((a, b), x), y) in lo_d.iter_mut().zip(hi_d.iter_mut()).zip(lo_s).zip(hi_s) {
        *a -= g * y;
        *b -= g * x;
    }
}

fn pass(j: usize, g: f64, src: &[f64], dst: &mut [f64]) {
    let s = 1usize << j;
    for (dc, sc) in dst.chunks_exact_mut(2 * s).zip(src.chunks_exact(2 * s)) {
        let (lo_d, hi_d) = dc.split_at_mut(s);
        let (lo_s, hi_s) = sc.split_at(s);
        pairs(lo_d, hi_d, lo_s, hi_s, g);
    }
}

#[cfg(feature = "parallel")]
fn par_pass(j: usize, g: f64, src: &[f64], dst: &mut [f64]) {
    type Job<'a> = (&'a mut [f64], &'a mut [f64], &'a [f64], &'a [f64]);
    let s = 1usize << j;
    let c = s.min(CHUNK);
    let mut jobs: Vec<Job> = Vec::with_capacity(dst.len() / (2 * c));
    for (dc, sc) in dst.chunks_exact_mut(2 * s).zip(src.chunks_exact(2 * s)) {
        let (lo_d, hi_d) = dc.split_at_mut(s);
        let (lo_s, hi_s) = sc.split_at(s);
        for (((a, b), x), y) in lo_d
            .chunks_mut(c)
            .zip(hi_d.chunks_mut(c))
            .zip(lo_s.chunks(c))
            .zip(hi_s.chunks(c))
        {
            jobs.push((a, b, x, y));
        }
    }
    jobs.into_par_iter().for_each(|(a, b, x, y)| pairs(a, b, x, y, g));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, d: &[f64], g: f64, src: &CVec, dst: &CVec, alpha: f64) -> CVec {
        let n = 1 << m;
        let mut out = CVec::zeros(n);
        for z in 0..n {
            out.re[z] = alpha * dst.re[z] + d[z] * src.re[z];
            out.im[z] = alpha * dst.im[z] + d[z] * src.im[z];
            for j in 0..m {
                out.re[z] -= g * src.re[z ^ (1 << j)];
                out.im[z] -= g * src.im[z ^ (1 << j)];
            }
        }
        out
    }

    fn vecs(m: usize) -> (Vec<f64>, CVec, CVec) {
        let n = 1usize << m;
        let d = (0..n).map(|i| ((i * 7 + 3) as f64).sin()).collect();
        let src = CVec {
            re: (0..n).map(|i| (i as f64 * 0.3).cos()).collect(),
            im: (0..n).map(|i| (i as f64 * 0.11).sin()).collect(),
        };
        let dst = CVec {
            re: (0..n).map(|i| (i as f64 * 0.05).sin()).collect(),
            im: (0..n).map(|i| (i as f64 * 0.7).cos()).collect(),
        };
        (d, src, dst)
    }

    #[test]
    fn matches_naive_all_sizes() {
        for m in 1..=13 {
            for &alpha in &[0.0, -1.0] {
                let (d, src, dst0) = vecs(m);
                let h = Hop { m, diag: &d, g: 0.37 };
                let expect = naive(m, &d, 0.37, &src, &dst0, alpha);
                for exec in [Execution::Sequential, Execution::Parallel] {
                    let mut dst = dst0.clone();
                    h.apply(exec, &src, &mut dst, alpha);
                    for z in 0..1 << m {
                        assert!((dst.re[z] - expect.re[z]).abs() < 1e-12, "m={m} z={z}");
                        assert!((dst.im[z] - expect.im[z]).abs() < 1e-12, "m={m} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn modes_bitwise_equal() {
        let (d, src, dst0) = vecs(14);
        let h = Hop { m: 14, diag: &d, g: 1.1 };
        let mut a = dst0.clone();
        let mut b = dst0;
        h.apply(Execution::Sequential, &src, &mut a, -1.0);
        h.apply(Execution::Parallel, &src, &mut b, -1.0);
        assert_eq!(a, b);
        assert_eq!(
            a.norm_sqr(Execution::Sequential).to_bits(),
            a.norm_sqr(Execution::Parallel).to_bits()
        );
    }
}
