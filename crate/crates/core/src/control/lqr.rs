//! Continuous-time LQR synthesis.
//!
//! The algebraic Riccati equation is solved by Newton–Kleinman iteration:
//! each step solves a Lyapunov equation for the closed-loop cost and
//! re-derives the gain, converging quadratically from any stabilizing seed.
//! The seed comes from Bass's construction, which stabilizes every
//! controllable pair without an eigensolver. All steps are deterministic.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const RICCATI_TOL: f64 = 1e-10;
const MAX_NEWTON_ITERS: usize = 60;

/// State-feedback gain `u = −K·x` from an LQR design.
#[derive(Clone, Debug)]
pub struct LqrGains {
    k: DMatrix<f64>,
}

impl LqrGains {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn n_states(&self) -> usize {
        self.k.ncols()
    }

    pub fn n_inputs(&self) -> usize {
        self.k.nrows()
    }
}

/// Solve `AᵀP + PA = −W` for symmetric `P` via the Kronecker linear system.
fn solve_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(AᵀP + PA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P)
    let system = eye.kronecker(&a.transpose()) + a.transpose().kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-w).as_slice());
    let lu = system.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Lyapunov system".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Bass's stabilizing initial gain: with `β > max Re λ(A)`, solve
/// `(A + βI)Z + Z(A + βI)ᵀ = 2BBᵀ` and take `K₀ = BᵀZ⁻¹`.
fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::<f64>::identity(n, n) * beta;
    // AZ + ZAᵀ = C  ⇔  (Aᵀ)ᵀZ + Z(Aᵀ) ... reuse the Lyapunov solver on Aᵀ
    let z = solve_lyapunov(&shifted.transpose(), &(-2.0 * b * b.transpose()))?;
    let z_inv = z.clone().try_inverse().ok_or_else(|| {
        Error::ControlDesign("pair (A, B) appears uncontrollable (singular Gramian)".into())
    })?;
    let k0 = b.transpose() * z_inv;
    if max_real_eigenvalue(&(a - b * &k0)) >= 0.0 {
        return Err(Error::ControlDesign("failed to find a stabilizing initial gain".into()));
    }
    Ok(k0)
}

fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).amax()
}

/// Design continuous-time LQR gains for `ẋ = Ax + Bu` with cost
/// `∫ xᵀQx + uᵀRu`.
///
/// `Q` must be symmetric positive semi-definite and `R` symmetric positive
/// definite; the pair `(A, B)` must be stabilizable.
pub fn lqr_design(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrGains> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::ControlDesign("inconsistent LQR matrix dimensions".into()));
    }
    if (q - q.transpose()).amax() > 1e-9 || q.clone().symmetric_eigen().eigenvalues.min() < -1e-10 {
        return Err(Error::ControlDesign("Q must be symmetric positive semi-definite".into()));
    }
    if (r - r.transpose()).amax() > 1e-9 {
        return Err(Error::ControlDesign("R must be symmetric".into()));
    }
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::ControlDesign("R must be positive definite".into()))?
        .inverse();

    let mut k = stabilizing_gain(a, b)?;
    let mut converged = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let a_cl = a - b * &k;
        let w = q + k.transpose() * r * &k;
        let p = solve_lyapunov(&a_cl, &w)?;
        k = &r_inv * b.transpose() * &p;
        if riccati_residual(a, b, q, &r_inv, &p) < RICCATI_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ControlDesign(format!(
            "Riccati iteration did not reach residual {RICCATI_TOL}"
        )));
    }
    if max_real_eigenvalue(&(a - b * &k)) >= 0.0 {
        return Err(Error::ControlDesign("closed loop is not strictly stable".into()));
    }
    Ok(LqrGains { k })
}
