//! Pinning weights `b(x) > 0`.

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{Grid, ScalarField};
use crate::interp::Bicubic;

/// One Gaussian dip `depth * exp(-|x - center|^2 / width^2)` subtracted from 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Well {
    pub center: [f64; 2],
    pub depth: f64,
    pub width: f64,
}

impl Well {
    fn dip(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let w2 = self.width * self.width;
        let v = self.depth * (-(dx * dx + dy * dy) / w2).exp();
        (v, [-2.0 * dx / w2 * v, -2.0 * dy / w2 * v])
    }

    fn validate(&self) -> Result<()> {
        if !(self.depth > 0.0 && self.depth < 1.0) {
            return Err(Error::InvalidLandscape(format!(
                "well depth {} outside (0, 1)",
                self.depth
            )));
        }
        if !(self.width > 0.0) || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidLandscape(
                "well width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A closed-form expression for `b` together with its partial derivatives.
#[derive(Debug, Clone)]
pub struct ExprLandscape {
    pub b: Expr,
    dx: Expr,
    dy: Expr,
}

impl ExprLandscape {
    pub fn new(b: Expr) -> Self {
        let dx = b.derivative(Var::X);
        let dy = b.derivative(Var::Y);
        Self { b, dx, dy }
    }
}

#[derive(Debug, Clone)]
pub enum PinningLandscape {
    Constant(f64),
    GaussianWell(Well),
    MultiWell(Vec<Well>),
    /// Nodal samples, interpolated bicubically off the nodes.
    Sampled(Bicubic),
    Expression(ExprLandscape),
}

impl PinningLandscape {
    pub fn kind(&self) -> &'static str {
        match self {
            PinningLandscape::Constant(_) => "constant",
            PinningLandscape::GaussianWell(_) => "gaussian_well",
            PinningLandscape::MultiWell(_) => "multi_well",
            PinningLandscape::Sampled(_) => "sampled",
            PinningLandscape::Expression(_) => "expression",
        }
    }

    pub fn sampled(field: ScalarField) -> Self {
        PinningLandscape::Sampled(Bicubic::new(field))
    }

    pub fn expression(src: &str) -> Result<Self> {
        let e = Expr::parse(src).map_err(|e| Error::InvalidLandscape(e.to_string()))?;
        Ok(PinningLandscape::Expression(ExprLandscape::new(e)))
    }

    /// `b` and `grad b` at a point.
    pub fn eval(&self, x: f64, y: f64) -> Result<(f64, [f64; 2])> {
        match self {
            PinningLandscape::Constant(c) => Ok((*c, [0.0, 0.0])),
            PinningLandscape::GaussianWell(w) => {
                let (v, g) = w.dip(x, y);
                Ok((1.0 - v, [-g[0], -g[1]]))
            }
            PinningLandscape::MultiWell(ws) => Ok(ws.iter().fold((1.0, [0.0, 0.0]), |acc, w| {
                let (v, g) = w.dip(x, y);
                (acc.0 - v, [acc.1[0] - g[0], acc.1[1] - g[1]])
            })),
            PinningLandscape::Sampled(f) => f.eval_with_gradient(x, y),
            PinningLandscape::Expression(e) => {
                Ok((e.b.eval(x, y), [e.dx.eval(x, y), e.dy.eval(x, y)]))
            }
        }
    }

    pub fn b(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval(x, y)?.0)
    }

    /// `grad log b = grad b / b`.
    pub fn grad_log_b(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        let (b, g) = self.eval(x, y)?;
        Ok([g[0] / b, g[1] / b])
    }

    fn validate(&self) -> Result<()> {
        match self {
            PinningLandscape::Constant(c) if !(*c > 0.0 && c.is_finite()) => Err(
                Error::InvalidLandscape(format!("constant weight {c} is not positive")),
            ),
            PinningLandscape::GaussianWell(w) => w.validate(),
            PinningLandscape::MultiWell(ws) => ws.iter().try_for_each(Well::validate),
            _ => Ok(()),
        }
    }

    /// Nodal samples of `b` on `grid`, checked for `0 < inf b` and finiteness.
    pub fn realize(&self, grid: Grid) -> Result<ScalarField> {
        self.validate()?;
        let b = match self {
            PinningLandscape::Sampled(f) => {
                if !f.grid().same_shape(&grid) {
                    return Err(Error::ShapeMismatch(format!(
                        "sampled landscape is {}x{}, grid is {}x{}",
                        f.grid().nx(),
                        f.grid().ny(),
                        grid.nx(),
                        grid.ny()
                    )));
                }
                ScalarField::from_vec_unchecked(grid, f.field().data().to_vec())
            }
            _ => {
                let mut data = Vec::with_capacity(grid.len());
                for j in 0..grid.ny() {
                    for i in 0..grid.nx() {
                        data.push(self.b(grid.x(i), grid.y(j))?);
                    }
                }
                ScalarField::from_vec_unchecked(grid, data)
            }
        };
        if !b.is_finite() {
            return Err(Error::InvalidLandscape("b has non-finite samples".into()));
        }
        if b.min() <= 0.0 {
            return Err(Error::InvalidLandscape(format!(
                "min b = {} on the grid",
                b.min()
            )));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_gradient_matches_finite_difference() {
        let l = PinningLandscape::GaussianWell(Well {
            center: [0.4, 0.6],
            depth: 0.5,
            width: 0.2,
        });
        let (x, y, d) = (0.47, 0.51, 1e-6);
        let g = l.grad_log_b(x, y).unwrap();
        let fd = |dx: f64, dy: f64| l.b(x + dx, y + dy).unwrap().ln();
        assert!((g[0] - (fd(d, 0.0) - fd(-d, 0.0)) / (2.0 * d)).abs() < 1e-7);
        assert!((g[1] - (fd(0.0, d) - fd(0.0, -d)) / (2.0 * d)).abs() < 1e-7);
        assert!((l.b(0.4, 0.6).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expression_and_well_agree() {
        let w = PinningLandscape::GaussianWell(Well {
            center: [0.5, 0.5],
            depth: 0.3,
            width: 0.25,
        });
        let e =
            PinningLandscape::expression("1 - 0.3*exp(-((x-0.5)^2 + (y-0.5)^2)/0.0625)").unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.7, 0.35)] {
            let (a, ga) = w.eval(x, y).unwrap();
            let (b, gb) = e.eval(x, y).unwrap();
            assert!((a - b).abs() < 1e-14);
            assert!((ga[0] - gb[0]).abs() < 1e-12 && (ga[1] - gb[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn realize_rejects_nonpositive_weights() {
        let g = Grid::unit_square(16).unwrap();
        assert!(matches!(
            PinningLandscape::Constant(0.0).realize(g),
            Err(Error::InvalidLandscape(_))
        ));
        let overlapping = PinningLandscape::MultiWell(vec![
            Well {
                center: [0.5, 0.5],
                depth: 0.6,
                width: 0.3,
            },
            Well {
                center: [0.5, 0.5],
                depth: 0.6,
                width: 0.3,
            },
        ]);
        assert!(matches!(
            overlapping.realize(g),
            Err(Error::InvalidLandscape(_))
        ));
        assert!(matches!(
            PinningLandscape::expression("x - 0.5").unwrap().realize(g),
            Err(Error::InvalidLandscape(_))
        ));
    }

    #[test]
    fn sampled_round_trips_nodes() {
        let g = Grid::unit_square(16).unwrap();
        let b = ScalarField::from_fn(g, |x, y| 1.0 + x * y);
        let l = PinningLandscape::sampled(b.clone());
        assert_eq!(l.realize(g).unwrap(), b);
        let other = Grid::unit_square(17).unwrap();
        assert!(matches!(l.realize(other), Err(Error::ShapeMismatch(_))));
    }
}
