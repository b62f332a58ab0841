use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthonormal, spectral_norm, Matrix};
use crate::problems::container;
use crate::seeded_rng;

/// `f(X) = 1/2 ||A X B - C||_F^2` with `A: p x n`, `B: n x p`, `X: n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRegressionInstance {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub x_star: Matrix,
    /// The standard-normal draw `E` in `C = A X* B + noise_scale E`.
    pub noise: Matrix,
    pub noise_scale: f64,
    pub sv_base: f64,
    /// `p ||A||^2 ||B||^2`, an upper bound on the nuclear/spectral Lipschitz
    /// constant of the gradient.
    pub lipschitz_upper: f64,
}

fn lipschitz_upper(a: &Matrix, b: &Matrix) -> f64 {
    let p = a.nrows().min(b.ncols()) as f64;
    p * spectral_norm(a).powi(2) * spectral_norm(b).powi(2)
}

/// `A = U_A S V_A^T`, `B = U_B S V_B^T` with `S = diag(base, ..., base^p)` and
/// random column-orthogonal factors; `X*` and `E` standard normal.
pub fn gen_matrix_regression(
    n: usize,
    p: usize,
    sv_base: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<MatrixRegressionInstance> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "matrix regression needs 1 <= p <= n, got n = {n}, p = {p}"
        )));
    }
    if !(sv_base > 1.0) {
        return Err(Error::InvalidArgument(format!("sv_base must exceed 1, got {sv_base}")));
    }
    let mut rng = seeded_rng(seed);
    let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_fn(p, |i, _| sv_base.powi(i as i32 + 1)));
    let u_a = random_orthonormal(p, p, &mut rng);
    let v_a = random_orthonormal(n, p, &mut rng);
    let u_b = random_orthonormal(n, p, &mut rng);
    let v_b = random_orthonormal(p, p, &mut rng);
    let a = &u_a * &sigma * v_a.transpose();
    let b = &u_b * &sigma * v_b.transpose();
    let x_star = gaussian_matrix(n, n, &mut rng);
    let noise = gaussian_matrix(p, p, &mut rng);
    let mut c = &a * &x_star * &b;
    c += &noise * noise_scale;
    Ok(MatrixRegressionInstance {
        lipschitz_upper: lipschitz_upper(&a, &b),
        a,
        b,
        c,
        x_star,
        noise,
        noise_scale,
        sv_base,
    })
}

impl MatrixRegressionInstance {
    /// Instance from explicit data; `x_star` and the noise draw are zero.
    pub fn from_data(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let (p, n) = a.shape();
        if b.shape() != (n, c.ncols()) || c.nrows() != p {
            return Err(Error::ShapeMismatch {
                expected: (n, c.ncols()),
                got: b.shape(),
            });
        }
        Ok(Self {
            lipschitz_upper: lipschitz_upper(&a, &b),
            x_star: Matrix::zeros(n, n),
            noise: Matrix::zeros(c.nrows(), c.ncols()),
            noise_scale: 0.0,
            sv_base: f64::NAN,
            a,
            b,
            c,
        })
    }

    /// Shape of the decision variable.
    pub fn dims(&self) -> (usize, usize) {
        (self.a.ncols(), self.b.nrows())
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                got: x.shape(),
            });
        }
        Ok(())
    }

    fn residual(&self, x: &Matrix) -> Matrix {
        (&self.a * x) * &self.b - &self.c
    }

    pub fn objective(&self, x: &Matrix) -> Result<f64> {
        self.check(x)?;
        Ok(0.5 * self.residual(x).norm_squared())
    }

    /// `A^T (A X B - C) B^T`.
    pub fn gradient(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.objective_and_gradient(x)?.1)
    }

    pub fn objective_and_gradient(&self, x: &Matrix) -> Result<(f64, Matrix)> {
        self.check(x)?;
        let r = self.residual(x);
        let g = crate::linalg::t_mul(&self.a, &r) * self.b.transpose();
        Ok((0.5 * r.norm_squared(), g))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let scalars = Matrix::from_row_slice(1, 3, &[self.noise_scale, self.sv_base, self.lipschitz_upper]);
        container::write_file(
            path,
            &[
                ("A", &self.a),
                ("B", &self.b),
                ("C", &self.c),
                ("X_star", &self.x_star),
                ("E", &self.noise),
                ("scalars", &scalars),
            ],
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut entries = container::read_file(path)?;
        let mut take = |name: &str| {
            entries
                .iter()
                .position(|(n, _)| n == name)
                .map(|i| entries.swap_remove(i).1)
                .ok_or_else(|| Error::Format(format!("missing matrix `{name}`")))
        };
        let (a, b, c, x_star, noise, scalars) =
            (take("A")?, take("B")?, take("C")?, take("X_star")?, take("E")?, take("scalars")?);
        if scalars.len() != 3 {
            return Err(Error::Format("scalars block must hold 3 values".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            x_star,
            noise,
            noise_scale: scalars[(0, 0)],
            sv_base: scalars[(0, 1)],
            lipschitz_upper: scalars[(0, 2)],
        })
    }
}

pub fn objective(inst: &MatrixRegressionInstance, x: &Matrix) -> Result<f64> {
    inst.objective(x)
}

pub fn gradient(inst: &MatrixRegressionInstance, x: &Matrix) -> Result<Matrix> {
    inst.gradient(x)
}
