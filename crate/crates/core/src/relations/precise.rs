//! Extended-precision evaluation of `t^e · D_A^(α)(P‖Q_t)` along a mixture
//! path, used where finite differences would otherwise drown in rounding
//! error.

use astro_float::{BigFloat, Consts, RoundingMode};

const PREC: usize = 128;
const RM: RoundingMode = RoundingMode::ToEven;

pub(crate) struct PrecisePath {
    consts: Consts,
    p: Vec<BigFloat>,
    /// `q - p`, exactly zero where the two measures agree.
    diff: Vec<BigFloat>,
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn normalized(w: &[f64]) -> Vec<BigFloat> {
    let total = w
        .iter()
        .fold(big(0.0), |acc, &x| acc.add(&big(x), PREC, RM));
    w.iter().map(|&x| big(x).div(&total, PREC, RM)).collect()
}

pub(crate) fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    format!("{x}").parse().unwrap_or(f64::NAN)
}

impl PrecisePath {
    pub fn new(p: &[f64], q: &[f64]) -> Self {
        let p = normalized(p);
        let q = normalized(q);
        let diff = q
            .iter()
            .zip(&p)
            .map(|(q, p)| q.sub(p, PREC, RM))
            .collect();
        Self {
            consts: Consts::new().expect("astro-float constants"),
            p,
            diff,
        }
    }

    /// Derivative of `t ↦ t^exponent · D_A^(α)(P‖Q_t)` by a central
    /// difference, or the one-sided second-order stencil
    /// `(3g(t) - 4g(t-h) + g(t-2h)) / 2h` when `one_sided`. The stencil is
    /// combined before rounding to `f64`.
    pub fn derivative(
        &mut self,
        t: f64,
        h: f64,
        exponent: f64,
        alpha: f64,
        one_sided: bool,
    ) -> Option<f64> {
        let (bt, bh) = (big(t), big(h));
        let stencil: &[(f64, f64)] = if one_sided {
            &[(0.0, 3.0), (-1.0, -4.0), (-2.0, 1.0)]
        } else {
            &[(1.0, 1.0), (-1.0, -1.0)]
        };
        let mut num = big(0.0);
        for &(offset, weight) in stencil {
            let x = bt.add(&big(offset).mul(&bh, PREC, RM), PREC, RM);
            let g = self.scaled(&x, exponent, alpha)?;
            num = num.add(&g.mul(&big(weight), PREC, RM), PREC, RM);
        }
        Some(to_f64(&num.div(&bh.mul(&big(2.0), PREC, RM), PREC, RM)))
    }

    /// `x^e` for `x > 0`; multiples of 1/2 go through `sqrt` and products,
    /// which cost far less than `ln` and `exp`.
    fn pow(&mut self, x: &BigFloat, e: f64) -> BigFloat {
        let twice = 2.0 * e;
        if twice == twice.round() && twice.abs() <= 64.0 {
            let n = twice.abs() as u32;
            let mut r = if n % 2 == 1 { x.sqrt(PREC, RM) } else { big(1.0) };
            for _ in 0..n / 2 {
                r = r.mul(x, PREC, RM);
            }
            if e < 0.0 {
                big(1.0).div(&r, PREC, RM)
            } else {
                r
            }
        } else {
            x.ln(PREC, RM, &mut self.consts)
                .mul(&big(e), PREC, RM)
                .exp(PREC, RM, &mut self.consts)
        }
    }

    pub fn divergence_at(&mut self, t: f64, alpha: f64) -> Option<f64> {
        self.divergence(&big(t), alpha).map(|v| to_f64(&v))
    }

    /// `t^exponent · D_A^(α)(P‖Q_t)` with `Q_t = P + t(Q - P)`, or `None` if
    /// the divergence is infinite.
    pub fn scaled(&mut self, t: &BigFloat, exponent: f64, alpha: f64) -> Option<BigFloat> {
        let d = self.divergence(t, alpha)?;
        let factor = self.pow(t, exponent);
        Some(d.mul(&factor, PREC, RM))
    }

    pub fn divergence(&mut self, t: &BigFloat, alpha: f64) -> Option<BigFloat> {
        let a = big(alpha);
        let one = big(1.0);
        let am1 = a.sub(&one, PREC, RM);
        let mut total = big(0.0);
        for i in 0..self.p.len() {
            let p = &self.p[i];
            let q = p.add(&self.diff[i].mul(t, PREC, RM), PREC, RM);
            let term = match (p.is_zero(), q.is_zero()) {
                (true, true) => continue,
                (true, false) => {
                    if alpha <= 0.0 {
                        return None;
                    }
                    q.div(&a, PREC, RM)
                }
                (false, true) => {
                    if alpha >= 1.0 {
                        return None;
                    }
                    p.div(&one.sub(&a, PREC, RM), PREC, RM)
                }
                (false, false) => {
                    let ratio = p.div(&q, PREC, RM);
                    let dev = ratio.sub(&one, PREC, RM);
                    let f = if alpha == 1.0 {
                        // u ln u - (u - 1)
                        let lr = ratio.ln(PREC, RM, &mut self.consts);
                        ratio.mul(&lr, PREC, RM).sub(&dev, PREC, RM)
                    } else if alpha == 0.0 {
                        // (u - 1) - ln u
                        let lr = ratio.ln(PREC, RM, &mut self.consts);
                        dev.sub(&lr, PREC, RM)
                    } else {
                        let pw = self.pow(&ratio, alpha);
                        let num = pw
                            .sub(&one, PREC, RM)
                            .sub(&a.mul(&dev, PREC, RM), PREC, RM);
                        num.div(&a.mul(&am1, PREC, RM), PREC, RM)
                    };
                    q.mul(&f, PREC, RM)
                }
            };
            total = total.add(&term, PREC, RM);
        }
        Some(total)
    }
}
