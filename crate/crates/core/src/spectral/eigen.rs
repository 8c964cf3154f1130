//! Dense symmetric eigenvalues: Householder reduction to tridiagonal form
//! followed by the implicit QL iteration with Wilkinson-style shifts.

use ndarray::Array2;

const MAX_SWEEPS: usize = 60;

/// Eigenvalues of a symmetric matrix in ascending order. Only the lower
/// triangle is read. Returns the index of the eigenvalue that failed to
/// converge on error.
pub fn symmetric_eigenvalues(m: &Array2<f64>) -> Result<Vec<f64>, usize> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    let (mut d, mut e) = tridiagonalize(&mut a);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

/// Returns (diagonal, subdiagonal) with `e[i]` coupling rows `i-1` and `i`.
fn tridiagonalize(a: &mut Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        if l == 0 {
            e[i] = a[[i, l]];
            continue;
        }
        let scale: f64 = (0..=l).map(|k| a[[i, k]].abs()).sum();
        if scale == 0.0 {
            e[i] = a[[i, l]];
            continue;
        }
        let mut h = 0.0;
        for k in 0..=l {
            a[[i, k]] /= scale;
            h += a[[i, k]] * a[[i, k]];
        }
        let f = a[[i, l]];
        let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        a[[i, l]] = f - g;
        let mut f = 0.0;
        for j in 0..=l {
            let mut g = 0.0;
            for k in 0..=j {
                g += a[[j, k]] * a[[i, k]];
            }
            for k in (j + 1)..=l {
                g += a[[k, j]] * a[[i, k]];
            }
            e[j] = g / h;
            f += e[j] * a[[i, j]];
        }
        let hh = f / (h + h);
        for j in 0..=l {
            let f = a[[i, j]];
            let g = e[j] - hh * f;
            e[j] = g;
            for k in 0..=j {
                a[[j, k]] -= f * e[k] + g * a[[i, k]];
            }
        }
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[[i, i]];
    }
    (d, e)
}

fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<(), usize> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(l);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
