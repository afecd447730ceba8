//! Eigenvalues of real nonsymmetric matrices.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis double-shift QR iteration on the Hessenberg matrix. Only
//! eigenvalues are produced; no Schur vectors are accumulated.

use num_complex::Complex64;

use super::{LinalgError, Matrix};

/// Total QR sweeps allowed per unit of dimension.
pub const SWEEPS_PER_DIM: usize = 40;

/// Eigenvalues of a square matrix with derived radius and abscissa.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// `max |λ|`
    pub radius: f64,
    /// `max Re λ`
    pub abscissa: f64,
}

impl Spectrum {
    fn from_eigenvalues(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let abscissa = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            eigenvalues,
            radius,
            abscissa,
        }
    }
}

/// Computes all eigenvalues of `a`.
pub fn spectrum(a: &Matrix) -> Result<Spectrum, LinalgError> {
    let n = a.ensure_square()?;
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    match n {
        0 => return Ok(Spectrum::from_eigenvalues(Vec::new())),
        1 => {
            return Ok(Spectrum::from_eigenvalues(vec![Complex64::new(
                a[(0, 0)],
                0.0,
            )]))
        }
        _ => {}
    }
    // 1-based working copy keeps the QR sweep indices readable.
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    balance(&mut h, n);
    hessenberg(&mut h, n);
    let eig = hessenberg_qr(&mut h, n)?;
    Ok(Spectrum::from_eigenvalues(eig))
}

pub fn spectral_radius(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(spectrum(a)?.radius)
}

pub fn spectral_abscissa(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(spectrum(a)?.abscissa)
}

const RADIX: f64 = 2.0;

fn balance(a: &mut [Vec<f64>], n: usize) {
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
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
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 1..=n {
                    a[i][j] *= g;
                }
                for row in a.iter_mut().take(n + 1).skip(1) {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form (in place).
fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    let mut v = vec![0.0; n + 1];
    for k in 1..n.saturating_sub(1) {
        // Annihilate a[k+2..=n][k].
        let scale: f64 = ((k + 1)..=n).map(|i| a[i][k].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut norm2 = 0.0;
        for i in (k + 1)..=n {
            v[i] = a[i][k] / scale;
            norm2 += v[i] * v[i];
        }
        let alpha = if v[k + 1] > 0.0 {
            -norm2.sqrt()
        } else {
            norm2.sqrt()
        };
        let vnorm2 = norm2 - v[k + 1] * alpha;
        v[k + 1] -= alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        // Left: A ← (I − v vᵀ / vnorm2) A on rows k+1..n.
        for j in k..=n {
            let dot: f64 = ((k + 1)..=n).map(|i| v[i] * a[i][j]).sum();
            let f = dot / vnorm2;
            for i in (k + 1)..=n {
                a[i][j] -= f * v[i];
            }
        }
        // Right: A ← A (I − v vᵀ / vnorm2) on columns k+1..n.
        for row in a.iter_mut().take(n + 1).skip(1) {
            let dot: f64 = ((k + 1)..=n).map(|j| row[j] * v[j]).sum();
            let f = dot / vnorm2;
            for j in (k + 1)..=n {
                row[j] -= f * v[j];
            }
        }
        a[k + 1][k] = alpha * scale;
        for row in a.iter_mut().take(n + 1).skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on a 1-based upper Hessenberg matrix.
fn hessenberg_qr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>, LinalgError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let cap = SWEEPS_PER_DIM * n;
    let mut sweeps = 0usize;
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z);
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if sweeps >= cap {
                return Err(LinalgError::NoConvergence { sweeps });
            }
            if its > 0 && its.is_multiple_of(10) {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        p = x * row[k] + y * row[k + 1];
                        if k != nn - 1 {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k + 1] -= p * q;
                        row[k] -= p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}
