//! Small monomial algebra used to build the reference velocity spaces.

/// A scalar polynomial in up to three variables, stored as
/// `(coefficient, [ex, ey, ez])` terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Poly(pub Vec<(f64, [u32; 3])>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn monomial(c: f64, e: [u32; 3]) -> Self {
        Poly(vec![(c, e)])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, e)| {
                let mut v = *c;
                for (a, &k) in e.iter().enumerate() {
                    if k > 0 {
                        v *= x[a].powi(k as i32);
                    }
                }
                v
            })
            .sum()
    }

    pub fn derivative(&self, a: usize) -> Poly {
        Poly(
            self.0
                .iter()
                .filter(|(_, e)| e[a] > 0)
                .map(|&(c, mut e)| {
                    let k = e[a];
                    e[a] -= 1;
                    (c * k as f64, e)
                })
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|&(c, e)| (c * s, e)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        Poly(out)
    }
}

/// A `d`-component vector polynomial.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct VecPoly(pub Vec<Poly>);

impl VecPoly {
    /// `e_a * x^e` for a monomial `x^e`.
    pub fn unit(dim: usize, a: usize, e: [u32; 3]) -> Self {
        let mut comps = vec![Poly::zero(); dim];
        comps[a] = Poly::monomial(1.0, e);
        VecPoly(comps)
    }

    /// 2D curl of a scalar stream function: `(dpsi/dy, -dpsi/dx)`.
    pub fn curl2(psi: &Poly) -> Self {
        VecPoly(vec![psi.derivative(1), psi.derivative(0).scaled(-1.0)])
    }

    /// 3D curl of a vector potential.
    pub fn curl3(a: [&Poly; 3]) -> Self {
        VecPoly(vec![
            a[2].derivative(1).add(&a[1].derivative(2).scaled(-1.0)),
            a[0].derivative(2).add(&a[2].derivative(0).scaled(-1.0)),
            a[1].derivative(0).add(&a[0].derivative(1).scaled(-1.0)),
        ])
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.0) {
            *o = p.eval(x);
        }
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        self.0.iter().enumerate().map(|(a, p)| p.derivative(a).eval(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_and_eval() {
        // 3 x^2 y
        let p = Poly::monomial(3.0, [2, 1, 0]);
        assert_eq!(p.eval(&[2.0, 0.5]), 6.0);
        assert_eq!(p.derivative(0).eval(&[2.0, 0.5]), 6.0);
        assert_eq!(p.derivative(1).eval(&[2.0, 0.5]), 12.0);
        assert!(p.derivative(2).0.is_empty());
    }

    #[test]
    fn curls_are_divergence_free() {
        let psi = Poly::monomial(1.0, [2, 1, 0]);
        let c = VecPoly::curl2(&psi);
        let mut v = [0.0; 2];
        c.eval(&[0.3, 0.7], &mut v);
        assert!((v[0] - 0.09).abs() < 1e-15 && (v[1] + 0.42).abs() < 1e-15);
        assert_eq!(c.divergence(&[0.3, 0.7]), 0.0);

        let z = Poly::zero();
        let a = Poly::monomial(1.0, [1, 1, 1]);
        let c3 = VecPoly::curl3([&z, &z, &a]);
        assert!(c3.divergence(&[0.2, 0.4, 0.9]).abs() < 1e-15);
    }
}
