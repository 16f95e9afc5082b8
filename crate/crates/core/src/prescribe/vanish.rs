use super::set::ClosedSetDescriptor;
use crate::jet::{Jet, MatJet};
use crate::symform::SymmetricForm;
use crate::{Error, Mat, Result};

/// A smooth real curve given by its jets.
pub trait ScalarCurve: Send + Sync {
    fn jet(&self, t: f64, order: usize) -> Jet;

    fn value(&self, t: f64) -> f64 {
        self.jet(t, 0).value()
    }
}

/// `exp(−1/x)` for `x > 0`, zero otherwise.
pub fn flat_exp(x: &Jet) -> Jet {
    if x.value() <= 0.0 {
        return Jet::constant(0.0, x.order());
    }
    x.recip().scale(-1.0).exp()
}

/// Smooth nondecreasing step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, flat at both ends.
pub fn smooth_step(x: &Jet) -> Jet {
    let v = x.value();
    if v <= 0.0 {
        return Jet::constant(0.0, x.order());
    }
    if v >= 1.0 {
        return Jet::constant(1.0, x.order());
    }
    let e0 = flat_exp(x);
    let e1 = flat_exp(&x.scale(-1.0).add_const(1.0));
    e0.div(&(&e0 + &e1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanishingOptions {
    /// Height of every bump.
    pub amplitude: f64,
    /// Length scale of the bump edges.
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Piece {
    Whole,
    Left { q: f64 },
    Right { p: f64 },
    Bounded { p: f64, q: f64, norm: f64 },
}

/// `f ≥ 0` with `f⁻¹(0) = F`: one bump on each component of `ℝ ∖ F`.
#[derive(Clone, Debug)]
pub struct VanishingFunction {
    pieces: Vec<Piece>,
    pub options: VanishingOptions,
}

pub fn vanishing_function(set: &ClosedSetDescriptor, options: VanishingOptions) -> Result<VanishingFunction> {
    if !(options.amplitude > 0.0 && options.amplitude < 1.0) || !(options.width > 0.0) {
        return Err(Error::Invalid("bump amplitude must lie in ]0, 1[ and width must be positive".into()));
    }
    let w = options.width;
    let iv = &set.intervals;
    let pieces = if iv.is_empty() {
        vec![Piece::Whole]
    } else {
        let mut p = vec![Piece::Left { q: iv[0].0 }];
        for pair in iv.windows(2) {
            let (lo, hi) = (pair[0].1, pair[1].0);
            p.push(Piece::Bounded { p: lo, q: hi, norm: (4.0 * w / (hi - lo)).exp() });
        }
        p.push(Piece::Right { p: iv[iv.len() - 1].1 });
        p
    };
    Ok(VanishingFunction { pieces, options })
}

impl VanishingFunction {
    fn piece(&self, t: f64) -> Option<&Piece> {
        self.pieces.iter().find(|p| match **p {
            Piece::Whole => true,
            Piece::Left { q } => t < q,
            Piece::Right { p } => t > p,
            Piece::Bounded { p, q, .. } => t > p && t < q,
        })
    }
}

impl ScalarCurve for VanishingFunction {
    fn jet(&self, t: f64, order: usize) -> Jet {
        let k = self.options.amplitude;
        let w = self.options.width;
        let x = Jet::variable(t, order);
        match self.piece(t) {
            None => Jet::constant(0.0, order),
            Some(Piece::Whole) => Jet::constant(k, order),
            Some(&Piece::Left { q }) => flat_exp(&x.scale(-1.0 / w).add_const(q / w)).scale(k),
            Some(&Piece::Right { p }) => flat_exp(&x.scale(1.0 / w).add_const(-p / w)).scale(k),
            Some(&Piece::Bounded { p, q, norm }) => {
                let l = flat_exp(&x.scale(1.0 / w).add_const(-p / w));
                let r = flat_exp(&x.scale(-1.0 / w).add_const(q / w));
                (&l * &r).scale(k * norm)
            }
        }
    }
}

/// `R = 1 − f`.
#[derive(Clone, Debug)]
pub struct RadiusCurve(pub VanishingFunction);

impl ScalarCurve for RadiusCurve {
    fn jet(&self, t: f64, order: usize) -> Jet {
        self.0.jet(t, order).scale(-1.0).add_const(1.0)
    }
}

/// Jet of `ρ(t) = [[1 + R cos t, R sin t], [R sin t, 1 − R cos t]]`.
pub fn rho_jet(r: &dyn ScalarCurve, t: f64, order: usize) -> MatJet {
    let rj = r.jet(t, order);
    let (s, c) = Jet::variable(t, order).sin_cos();
    let rc = &rj * &c;
    let rs = &rj * &s;
    MatJet(
        (0..=order)
            .map(|k| {
                let one = if k == 0 { 1.0 } else { 0.0 };
                Mat::from_row_slice(2, 2, &[one + rc.0[k], rs.0[k], rs.0[k], one - rc.0[k]])
            })
            .collect(),
    )
}

pub fn rho_curve(r: &dyn ScalarCurve, t: f64) -> Result<SymmetricForm> {
    let rv = r.value(t);
    if !(rv > 0.0) {
        return Err(Error::Invalid(format!("R({t}) = {rv} is not positive")));
    }
    Ok(SymmetricForm::new(rho_jet(r, t, 0).0.swap_remove(0)))
}

pub fn rho_derivative(r: &dyn ScalarCurve, t: f64) -> Result<SymmetricForm> {
    let rv = r.value(t);
    if !(rv > 0.0) {
        return Err(Error::Invalid(format!("R({t}) = {rv} is not positive")));
    }
    Ok(SymmetricForm::new(rho_jet(r, t, 1).deriv(1)))
}
