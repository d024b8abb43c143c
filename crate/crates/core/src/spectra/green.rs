use super::DirichletBox;
use crate::model::{Configuration, ModelConfig};
use crate::transfer::piece_transfer_real;
use crate::{Error, Result};

/// Relative energy distance below which `λ` counts as a box eigenvalue.
pub const PROXIMITY_TOL: f64 = 1e-10;

/// Solution data `(u, u') = dir · e^{log_scale}` with `|dir| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub dir: [f64; 2],
    pub log_scale: f64,
}

impl Scaled {
    fn unit(v: [f64; 2], log_scale: f64) -> Self {
        let r = v[0].hypot(v[1]);
        Self { dir: [v[0] / r, v[1] / r], log_scale: log_scale + r.ln() }
    }

    /// `log |u|`.
    pub fn log_abs_u(&self) -> f64 {
        self.dir[0].abs().ln() + self.log_scale
    }

    /// `log (u² + u'²/s)^{1/2}`, a smooth amplitude for oscillating solutions
    /// with local wave number `√s`.
    pub fn log_amplitude(&self, s: f64) -> f64 {
        0.5 * (self.dir[0].powi(2) + self.dir[1].powi(2) / s).ln() + self.log_scale
    }
}

/// The Dirichlet solutions of one box at energy `λ`: `u₋` with data `(0, 1)`
/// at `-L/2`, propagated to the right, and `u₊` with data `(0, 1)` at `L/2`,
/// propagated to the left. Both are stored at every piece boundary.
#[derive(Debug, Clone)]
pub struct BoxSolutions<'a> {
    bx: &'a DirichletBox,
    lambda: f64,
    minus: Vec<Scaled>,
    plus: Vec<Scaled>,
}

impl<'a> BoxSolutions<'a> {
    pub fn new(bx: &'a DirichletBox, lambda: f64) -> Self {
        let pieces = bx.pieces();
        let mut minus = Vec::with_capacity(pieces.len() + 1);
        minus.push(Scaled { dir: [0.0, 1.0], log_scale: 0.0 });
        for p in pieces {
            let last = minus.last().unwrap();
            let v = piece_transfer_real(p.value, p.width, lambda).apply(last.dir);
            minus.push(Scaled::unit(v, last.log_scale));
        }
        let mut plus = vec![Scaled { dir: [0.0, 1.0], log_scale: 0.0 }; pieces.len() + 1];
        for (k, p) in pieces.iter().enumerate().rev() {
            let next = plus[k + 1];
            let v = piece_transfer_real(p.value, p.width, lambda).inverse().apply(next.dir);
            plus[k] = Scaled::unit(v, next.log_scale);
        }
        Self { bx, lambda, minus, plus }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn u_minus(&self, x: f64) -> Scaled {
        let k = self.bx.piece_index(x);
        let p = self.bx.pieces()[k];
        let s = self.minus[k];
        Scaled::unit(piece_transfer_real(p.value, x - p.start, self.lambda).apply(s.dir), s.log_scale)
    }

    pub fn u_plus(&self, x: f64) -> Scaled {
        let k = self.bx.piece_index(x);
        let p = self.bx.pieces()[k];
        let s = self.plus[k + 1];
        let back = piece_transfer_real(p.value, p.start + p.width - x, self.lambda).inverse();
        Scaled::unit(back.apply(s.dir), s.log_scale)
    }

    /// `W(u₊, u₋) = u₊u₋' − u₊'u₋`, evaluated at `L/2`, as `(sign, log|W|)`.
    pub fn wronskian(&self) -> (f64, f64) {
        let end = self.minus.last().unwrap();
        (-end.dir[0].signum(), end.dir[0].abs().ln() + end.log_scale)
    }
}

/// Resolvent kernel of the Dirichlet box at a non-eigenvalue energy.
#[derive(Debug, Clone)]
pub struct GreenKernel<'a> {
    solutions: BoxSolutions<'a>,
    w_sign: f64,
    w_log: f64,
}

impl<'a> GreenKernel<'a> {
    /// Fails with `EigenvalueProximity` when a box eigenvalue lies within
    /// `PROXIMITY_TOL · max(1, |λ|)` of `λ`.
    pub fn new(bx: &'a DirichletBox, lambda: f64) -> Result<Self> {
        check_proximity(bx, lambda)?;
        let solutions = BoxSolutions::new(bx, lambda);
        let (w_sign, w_log) = solutions.wronskian();
        Ok(Self { solutions, w_sign, w_log })
    }

    pub fn solutions(&self) -> &BoxSolutions<'a> {
        &self.solutions
    }

    /// `log |W(u₊, u₋)|`.
    pub fn log_abs_wronskian(&self) -> f64 {
        self.w_log
    }

    /// `(sign, log|G|)` of `G(x, y)`.
    pub fn signed_log(&self, x: f64, y: f64) -> (f64, f64) {
        let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
        let up = self.solutions.u_plus(hi);
        let um = self.solutions.u_minus(lo);
        let sign = up.dir[0].signum() * um.dir[0].signum() * self.w_sign;
        (sign, up.log_abs_u() + um.log_abs_u() - self.w_log)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (sign, log) = self.signed_log(x, y);
        sign * log.exp()
    }
}

/// Energy distance test against the box spectrum via the counting function.
pub(crate) fn check_proximity(bx: &DirichletBox, lambda: f64) -> Result<()> {
    let delta = PROXIMITY_TOL * lambda.abs().max(1.0);
    if bx.count(lambda + delta) == bx.count(lambda - delta) {
        return Ok(());
    }
    let nearest = bx
        .eigenvalues(lambda - delta, lambda + delta, delta * 1e-6)
        .into_iter()
        .map(|e| (e - lambda).abs())
        .fold(delta, f64::min);
    Err(Error::EigenvalueProximity { lambda, distance: nearest })
}

/// `G_Λ(λ; x, y)` for the Dirichlet box `[-L/2, L/2]`.
pub fn green_function(
    model: &ModelConfig,
    config: &Configuration,
    length: u32,
    lambda: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let bx = DirichletBox::new(model, config, length)?;
    for (name, v) in [("x", x), ("y", y)] {
        if !(bx.left()..=bx.right()).contains(&v) {
            return Err(Error::InvalidInput(format!("{name} = {v} lies outside the box [{}, {}]", bx.left(), bx.right())));
        }
    }
    Ok(GreenKernel::new(&bx, lambda)?.value(x, y))
}
