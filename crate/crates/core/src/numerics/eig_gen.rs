use num_complex::Complex64;

use super::{CMat, Mat, NumericsError};

/// Eigendecomposition of a real square matrix.
pub struct GenEig {
    /// eigenvalues sorted by (re, im); conjugates appear as separate entries
    pub values: Vec<Complex64>,
    /// column j is a unit right eigenvector for values[j]
    pub vectors: CMat,
}

/// Eigenvalues and right eigenvectors of a general real matrix.
///
/// Pipeline: diagonal balancing, Householder reduction to Hessenberg form,
/// then the Francis double-shift QR iteration with accumulated
/// transformations (the EISPACK balanc/orthes/hqr2 chain as arranged in the
/// Jama translation), followed by back-scaling of the vectors.
pub fn gen_eig(a: &Mat) -> Result<GenEig, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    a.check_finite()?;
    let n = a.rows();
    if n == 0 {
        return Ok(GenEig {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }

    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    let scale = balance(&mut h);
    let mut v = vec![vec![0.0f64; n]; n];
    orthes(&mut h, &mut v);
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    hqr2(&mut h, &mut v, &mut d, &mut e)?;

    // undo balancing: right eigenvectors of the original matrix have row i
    // multiplied by scale[i]
    for (i, row) in v.iter_mut().enumerate() {
        for x in row.iter_mut() {
            *x *= scale[i];
        }
    }

    // unpack the compressed real storage into complex columns
    let mut vectors = CMat::zeros(n, n);
    let mut j = 0;
    while j < n {
        if e[j] == 0.0 {
            for i in 0..n {
                vectors.set(i, j, Complex64::new(v[i][j], 0.0));
            }
            j += 1;
        } else {
            // conjugate pair: columns j, j+1 hold (re, im) of the vector for
            // the eigenvalue with positive imaginary part
            for i in 0..n {
                vectors.set(i, j, Complex64::new(v[i][j], v[i][j + 1]));
                vectors.set(i, j + 1, Complex64::new(v[i][j], -v[i][j + 1]));
            }
            j += 2;
        }
    }

    // normalize each column and fix its phase so the largest-magnitude
    // component is real and positive; keeps output deterministic
    for j in 0..n {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        let mut norm = 0.0f64;
        for i in 0..n {
            let m = vectors.at(i, j).norm();
            norm += m * m;
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let pivot = vectors.at(best, j);
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let f = phase / norm;
        for i in 0..n {
            let x = vectors.at(i, j) * f;
            vectors.set(i, j, x);
        }
    }

    // sort eigenvalues (and columns) by (re, im)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        (d[p], e[p])
            .partial_cmp(&(d[q], e[q]))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<Complex64> = order.iter().map(|&k| Complex64::new(d[k], e[k])).collect();
    let mut sorted = CMat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted.set(i, new_j, vectors.at(i, old_j));
        }
    }

    Ok(GenEig {
        values,
        vectors: sorted,
    })
}

/// Eigenvalues only, sorted by (re, im).
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>, NumericsError> {
    Ok(gen_eig(a)?.values)
}

/// max Re λ(A)
pub fn spectral_abscissa(a: &Mat) -> Result<f64, NumericsError> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Per-state factors t of a diagonal similarity T = diag(t) such that
/// T A T^{-1} has roughly equal row and column norms. All factors are
/// powers of two, so applying the scaling is exact in floating point.
pub fn balance_scales(a: &Mat) -> Vec<f64> {
    let n = a.rows();
    let mut work: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    balance(&mut work).iter().map(|s| 1.0 / s).collect()
}

/// Iterative diagonal similarity scaling that roughly equalizes row and
/// column norms; returns the per-row scale factors.
fn balance(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut scale = vec![1.0f64; n];
    let radix = 2.0f64;
    let b2 = radix * radix;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= b2;
            }
            g = r * radix;
            while c >= g {
                f /= radix;
                c /= b2;
            }
            if (c + r) / f < 0.95 * s {
                let ginv = 1.0 / f;
                scale[i] *= f;
                converged = false;
                for j in 0..n {
                    a[i][j] *= ginv;
                }
                for j in 0..n {
                    a[j][i] *= f;
                }
            }
        }
    }
    scale
}

/// Householder reduction to upper Hessenberg form, with the orthogonal
/// transformation accumulated into `v`.
fn orthes(h: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let n = h.len();
    let low = 0usize;
    let high = n - 1;
    let mut ort = vec![0.0f64; n];

    let mut m = low + 1;
    while m + 1 <= high {
        let mut sc = 0.0;
        for i in m..=high {
            sc += h[i][m - 1].abs();
        }
        if sc != 0.0 {
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[i][m - 1] / sc;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[i][j];
                }
                f /= hh;
                for i in m..=high {
                    h[i][j] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[i][j];
                }
                f /= hh;
                for j in m..=high {
                    h[i][j] -= f * ort[j];
                }
            }
            ort[m] *= sc;
            h[m][m - 1] = sc * g;
        }
        m += 1;
    }

    for i in 0..n {
        for j in 0..n {
            v[i][j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut m = high.saturating_sub(1);
    while m >= low + 1 {
        if h[m][m - 1] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[i][m - 1];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[i][j];
                }
                // double division avoids possible underflow
                g = (g / ort[m]) / h[m][m - 1];
                for i in m..=high {
                    v[i][j] += g * ort[i];
                }
            }
        }
        if m == low + 1 {
            break;
        }
        m -= 1;
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on a Hessenberg matrix, with eigenvector back
/// substitution. Eigenvalues land in (d, e); `v` ends up holding the
/// eigenvectors of the balanced matrix in compressed real storage.
fn hqr2(
    h: &mut [Vec<f64>],
    v: &mut [Vec<f64>],
    d: &mut [f64],
    e: &mut [f64],
) -> Result<(), NumericsError> {
    let nn = h.len();
    let mut n: isize = nn as isize - 1;
    let low: isize = 0;
    let high: isize = nn as isize - 1;
    let eps = 2.0f64.powi(-52);
    let mut exshift = 0.0f64;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y);

    macro_rules! hm {
        ($i:expr, $j:expr) => {
            h[$i as usize][$j as usize]
        };
    }
    macro_rules! vm {
        ($i:expr, $j:expr) => {
            v[$i as usize][$j as usize]
        };
    }

    let mut norm = 0.0f64;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total = 64 * nn.max(1);
    while n >= low {
        // look for a single small subdiagonal element
        let mut l = n;
        while l > low {
            s = hm!(l - 1, l - 1).abs() + hm!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if hm!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one root found
            hm!(n, n) += exshift;
            d[n as usize] = hm!(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // two roots found
            w = hm!(n, n - 1) * hm!(n - 1, n);
            p = (hm!(n - 1, n - 1) - hm!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            hm!(n, n) += exshift;
            hm!(n - 1, n - 1) += exshift;
            x = hm!(n, n);

            if q >= 0.0 {
                // real pair
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = hm!(n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (n - 1)..(nn as isize) {
                    z = hm!(n - 1, j);
                    hm!(n - 1, j) = q * z + p * hm!(n, j);
                    hm!(n, j) = q * hm!(n, j) - p * z;
                }
                for i in 0..=n {
                    z = hm!(i, n - 1);
                    hm!(i, n - 1) = q * z + p * hm!(i, n);
                    hm!(i, n) = q * hm!(i, n) - p * z;
                }
                for i in low..=high {
                    z = vm!(i, n - 1);
                    vm!(i, n - 1) = q * z + p * vm!(i, n);
                    vm!(i, n) = q * vm!(i, n) - p * z;
                }
            } else {
                // complex pair
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // no convergence yet; form shift
            x = hm!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = hm!(n - 1, n - 1);
                w = hm!(n, n - 1) * hm!(n - 1, n);
            }

            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    hm!(i, i) -= x;
                }
                s = hm!(n, n - 1).abs() + hm!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        hm!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > max_total {
                return Err(NumericsError::NoConvergence {
                    iterations: total_iter,
                });
            }

            // look for two consecutive small subdiagonal elements
            let mut m = n - 2;
            while m >= l {
                z = hm!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / hm!(m + 1, m) + hm!(m, m + 1);
                q = hm!(m + 1, m + 1) - z - r - s;
                r = hm!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if hm!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (hm!(m - 1, m - 1).abs() + z.abs() + hm!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=n {
                hm!(i, i - 2) = 0.0;
                if i > m + 2 {
                    hm!(i, i - 3) = 0.0;
                }
            }

            // double QR step on rows l..=n and columns m..=n
            for k in m..=(n - 1) {
                let notlast = k != n - 1;
                if k != m {
                    p = hm!(k, k - 1);
                    q = hm!(k + 1, k - 1);
                    r = if notlast { hm!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hm!(k, k - 1) = -s * x;
                    } else if l != m {
                        hm!(k, k - 1) = -hm!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..(nn as isize) {
                        p = hm!(k, j) + q * hm!(k + 1, j);
                        if notlast {
                            p += r * hm!(k + 2, j);
                            hm!(k + 2, j) -= p * z;
                        }
                        hm!(k, j) -= p * x;
                        hm!(k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * hm!(i, k) + y * hm!(i, k + 1);
                        if notlast {
                            p += z * hm!(i, k + 2);
                            hm!(i, k + 2) -= p * r;
                        }
                        hm!(i, k) -= p;
                        hm!(i, k + 1) -= p * q;
                    }
                    for i in low..=high {
                        p = x * vm!(i, k) + y * vm!(i, k + 1);
                        if notlast {
                            p += z * vm!(i, k + 2);
                            vm!(i, k + 2) -= p * r;
                        }
                        vm!(i, k) -= p;
                        vm!(i, k + 1) -= p * q;
                    }
                }
            }
        }
    }

    // back substitution: eigenvectors of the quasi-triangular form
    if norm == 0.0 {
        return Ok(());
    }
    for nb in (0..nn as isize).rev() {
        p = d[nb as usize];
        q = e[nb as usize];

        if q == 0.0 {
            // real vector
            let mut l = nb;
            hm!(nb, nb) = 1.0;
            for i in (0..nb).rev() {
                w = hm!(i, i) - p;
                r = 0.0;
                for j in l..=nb {
                    r += hm!(i, j) * hm!(j, nb);
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        if w != 0.0 {
                            hm!(i, nb) = -r / w;
                        } else {
                            hm!(i, nb) = -r / (eps * norm);
                        }
                    } else {
                        // solve the 2x2 real block
                        x = hm!(i, i + 1);
                        y = hm!(i + 1, i);
                        q = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        hm!(i, nb) = t;
                        if x.abs() > z.abs() {
                            hm!(i + 1, nb) = (-r - w * t) / x;
                        } else {
                            hm!(i + 1, nb) = (-s - y * t) / z;
                        }
                    }
                    // overflow control
                    t = hm!(i, nb).abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=nb {
                            hm!(j, nb) /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // complex vector (process the second of the pair)
            let mut l = nb - 1;
            if hm!(nb, nb - 1).abs() > hm!(nb - 1, nb).abs() {
                hm!(nb - 1, nb - 1) = q / hm!(nb, nb - 1);
                hm!(nb - 1, nb) = -(hm!(nb, nb) - p) / hm!(nb, nb - 1);
            } else {
                let (cr, ci) = cdiv(0.0, -hm!(nb - 1, nb), hm!(nb - 1, nb - 1) - p, q);
                hm!(nb - 1, nb - 1) = cr;
                hm!(nb - 1, nb) = ci;
            }
            hm!(nb, nb - 1) = 0.0;
            hm!(nb, nb) = 1.0;
            for i in (0..(nb - 1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=nb {
                    ra += hm!(i, j) * hm!(j, nb - 1);
                    sa += hm!(i, j) * hm!(j, nb);
                }
                w = hm!(i, i) - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        hm!(i, nb - 1) = cr;
                        hm!(i, nb) = ci;
                    } else {
                        // solve the complex 2x2 block
                        x = hm!(i, i + 1);
                        y = hm!(i + 1, i);
                        let mut vr = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize]
                            - q * q;
                        let vi = (d[i as usize] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps
                                * norm
                                * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        hm!(i, nb - 1) = cr;
                        hm!(i, nb) = ci;
                        if x.abs() > z.abs() + q.abs() {
                            hm!(i + 1, nb - 1) =
                                (-ra - w * hm!(i, nb - 1) + q * hm!(i, nb)) / x;
                            hm!(i + 1, nb) = (-sa - w * hm!(i, nb) - q * hm!(i, nb - 1)) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * hm!(i, nb - 1), -s - y * hm!(i, nb), z, q);
                            hm!(i + 1, nb - 1) = cr;
                            hm!(i + 1, nb) = ci;
                        }
                    }
                    // overflow control
                    t = hm!(i, nb - 1).abs().max(hm!(i, nb).abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=nb {
                            hm!(j, nb - 1) /= t;
                            hm!(j, nb) /= t;
                        }
                    }
                }
            }
        }
    }

    // multiply back into the accumulated basis
    for j in ((low)..(nn as isize)).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += vm!(i, k) * hm!(k, j);
            }
            vm!(i, j) = z;
        }
    }
    Ok(())
}
