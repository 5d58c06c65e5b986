//! Keys cubic-convolution interpolation of gridded scalars, with the
//! analytic gradient of the interpolant.
//!
//! Outside-the-grid stencil values come from the cubic-preserving
//! extrapolation `f(-1) = 3f(0) - 3f(1) + f(2)`, so the interpolant
//! reproduces quadratics exactly up to the edges.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone)]
pub struct Bicubic {
    field: ScalarField,
}

fn kernel(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        (1.5 * s - 2.5) * s * s + 1.0
    } else if s < 2.0 {
        ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0
    } else {
        0.0
    }
}

fn kernel_deriv(s: f64) -> f64 {
    let a = s.abs();
    let d = if a <= 1.0 {
        (4.5 * a - 5.0) * a
    } else if a < 2.0 {
        (-1.5 * a + 5.0) * a - 4.0
    } else {
        0.0
    };
    d * s.signum()
}

/// Cell index and fractional offset along one axis, clamped to the grid.
fn locate(coord: f64, h: f64, n: usize) -> (usize, f64) {
    let s = coord / h;
    let i = (s.floor().max(0.0) as usize).min(n - 2);
    (i, s - i as f64)
}

fn weights(t: f64) -> ([f64; 4], [f64; 4]) {
    (
        [kernel(t + 1.0), kernel(t), kernel(1.0 - t), kernel(2.0 - t)],
        [
            kernel_deriv(t + 1.0),
            kernel_deriv(t),
            -kernel_deriv(1.0 - t),
            -kernel_deriv(2.0 - t),
        ],
    )
}

impl Bicubic {
    pub fn new(field: ScalarField) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    fn fetch(&self, i: isize, j: isize) -> f64 {
        let g = self.field.grid();
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        if i < 0 {
            return 3.0 * self.fetch(0, j) - 3.0 * self.fetch(1, j) + self.fetch(2, j);
        }
        if i >= nx {
            return 3.0 * self.fetch(nx - 1, j) - 3.0 * self.fetch(nx - 2, j)
                + self.fetch(nx - 3, j);
        }
        if j < 0 {
            return 3.0 * self.fetch(i, 0) - 3.0 * self.fetch(i, 1) + self.fetch(i, 2);
        }
        if j >= ny {
            return 3.0 * self.fetch(i, ny - 1) - 3.0 * self.fetch(i, ny - 2)
                + self.fetch(i, ny - 3);
        }
        self.field.at(i as usize, j as usize)
    }

    fn check(&self, x: f64, y: f64) -> Result<()> {
        if self.field.grid().contains(x, y) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x, y })
        }
    }

    /// Interpolated value and gradient at `(x, y)`.
    pub fn eval_with_gradient(&self, x: f64, y: f64) -> Result<(f64, [f64; 2])> {
        self.check(x, y)?;
        let g = self.field.grid();
        let (i, tx) = locate(x, g.hx(), g.nx());
        let (j, ty) = locate(y, g.hy(), g.ny());
        let (wx, dx) = weights(tx);
        let (wy, dy) = weights(ty);
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for (b, (&wyb, &dyb)) in wy.iter().zip(&dy).enumerate() {
            for (a, (&wxa, &dxa)) in wx.iter().zip(&dx).enumerate() {
                let f = self.fetch(i as isize - 1 + a as isize, j as isize - 1 + b as isize);
                v += wxa * wyb * f;
                gx += dxa * wyb * f;
                gy += wxa * dyb * f;
            }
        }
        Ok((v, [gx / g.hx(), gy / g.hy()]))
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval_with_gradient(x, y)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_quadratics() {
        let g = Grid::new(17, 21, 1.5, 1.0).unwrap();
        let q = |x: f64, y: f64| 1.0 + 2.0 * x - y + 0.5 * x * x - 1.5 * x * y + 3.0 * y * y;
        let f = Bicubic::new(ScalarField::from_fn(g, q));
        assert!((f.eval(g.x(3), g.y(7)).unwrap() - q(g.x(3), g.y(7))).abs() < 1e-13);
        for &(x, y) in &[
            (0.0, 0.0),
            (0.013, 0.97),
            (1.5, 1.0),
            (0.77, 0.031),
            (1.49, 0.5),
        ] {
            let (v, grad) = f.eval_with_gradient(x, y).unwrap();
            assert!((v - q(x, y)).abs() < 1e-12, "value at ({x}, {y})");
            assert!((grad[0] - (2.0 + x - 1.5 * y)).abs() < 1e-10);
            assert!((grad[1] - (-1.0 - 1.5 * x + 6.0 * y)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_points_outside() {
        let g = Grid::unit_square(16).unwrap();
        let f = Bicubic::new(ScalarField::zeros(g));
        assert!(matches!(f.eval(1.01, 0.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn smooth_field_error_shrinks_at_third_order() {
        let err = |n: usize| {
            let g = Grid::unit_square(n).unwrap();
            let f = Bicubic::new(ScalarField::from_fn(g, |x, y| {
                (2.0 * x).sin() * (3.0 * y).cos()
            }));
            let mut worst: f64 = 0.0;
            for k in 0..50 {
                let (x, y) = (0.0193 * k as f64, 0.0171 * k as f64 + 0.07);
                worst =
                    worst.max((f.eval(x, y).unwrap() - (2.0 * x).sin() * (3.0 * y).cos()).abs());
            }
            worst
        };
        assert!(err(32) / err(64) > 6.0);
    }
}
