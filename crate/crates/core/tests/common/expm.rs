//! Reference `e^A` for 2×2 matrices: Taylor series plus scaling and squaring,
//! carried out in double-double arithmetic so that stiff blocks keep full
//! double accuracy after many squarings.

use nalgebra::Matrix2;

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb) + self.lo + o.lo;
        quick_two_sum(s, e)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + self.hi * o.lo + self.lo * o.hi;
        quick_two_sum(p, e)
    }

    fn div(self, k: f64) -> Dd {
        let q = self.hi / k;
        let r = self.add(Dd::from(q).mul(Dd::from(-k)));
        quick_two_sum(q, r.hi / k)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

type M = [[Dd; 2]; 2];

fn mat_mul(a: &M, b: &M) -> M {
    let mut c = [[Dd::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0].mul(b[0][j]).add(a[i][1].mul(b[1][j]));
        }
    }
    c
}

pub fn expm_oracle(a: Matrix2<f64>) -> Matrix2<f64> {
    let mut squarings = 0;
    let mut scale = 1.0;
    while a.abs().row_sum().max() * scale > 0.125 {
        scale *= 0.5;
        squarings += 1;
    }
    let x: M = [
        [Dd::from(a[(0, 0)] * scale), Dd::from(a[(0, 1)] * scale)],
        [Dd::from(a[(1, 0)] * scale), Dd::from(a[(1, 1)] * scale)],
    ];
    let mut sum: M = [[Dd::ONE, Dd::ZERO], [Dd::ZERO, Dd::ONE]];
    let mut term = sum;
    for k in 1..32 {
        term = mat_mul(&term, &x);
        for row in term.iter_mut() {
            for e in row.iter_mut() {
                *e = e.div(k as f64);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] = sum[i][j].add(term[i][j]);
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    Matrix2::new(sum[0][0].value(), sum[0][1].value(), sum[1][0].value(), sum[1][1].value())
}
