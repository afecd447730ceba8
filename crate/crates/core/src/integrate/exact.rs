use crate::discretize::LiTauDelay;
use crate::error::{Error, Result};
use crate::linalg::{expm, Lu, Matrix};
use crate::stability::BoundMatrices;

/// Advances the lattice vector `(x(0), x(−τ), …, x(−n_τ τ))` one `τ` at a time
/// with the variation-of-parameters formula
/// `x(τ) = e^{M₀τ}x(0) + M₀⁻¹(e^{M₀τ} − I) Σ Mᵢ x(−nᵢτ)`.
///
/// Returns `steps + 1` vectors, starting with `phi_grid`.
pub fn exact_step_linear(
    b: &BoundMatrices,
    li: &LiTauDelay,
    phi_grid: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = b.dim();
    let n_tau = li.n_tau;
    if phi_grid.len() != (n_tau + 1) * d {
        return Err(Error::Dimension {
            what: "lattice vector",
            expected: (n_tau + 1) * d,
            got: phi_grid.len(),
        });
    }
    if li.delay_count() != b.delay_count() {
        return Err(Error::Dimension {
            what: "LI_tau delay",
            expected: b.delay_count(),
            got: li.delay_count(),
        });
    }
    let m0 = b.effective_m0();
    let e = expm(&m0, li.tau)?;
    let e_minus_i = &e - &Matrix::identity(d);
    let lu = Lu::factor(&m0)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = phi_grid.to_vec();
    out.push(v.clone());
    let mut forcing = vec![0.0; d];
    for k in 0..steps {
        forcing.iter_mut().for_each(|f| *f = 0.0);
        for (m, &n) in b.mi.iter().zip(li.indices(k)) {
            let y = &v[n * d..(n + 1) * d];
            for (i, f) in forcing.iter_mut().enumerate() {
                *f += m.row(i).iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        let particular = lu.solve_vec(&e_minus_i.mul_vec(&forcing));
        let homogeneous = e.mul_vec(&v[..d]);
        let mut next = Vec::with_capacity(v.len());
        next.extend(homogeneous.iter().zip(&particular).map(|(a, p)| a + p));
        next.extend_from_slice(&v[..n_tau * d]);
        v = next;
        out.push(v.clone());
    }
    Ok(out)
}
