//! Reference arithmetic for the tests: plain complex arrays and the
//! generators written as Pauli products, built without the library.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::Rng;

pub type M2 = [[C; 2]; 2];
pub type M4 = [[C; 4]; 4];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

pub fn pauli(i: usize) -> M2 {
    match i {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        3 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => unreachable!(),
    }
}

pub fn kron(a: &M2, b: &M2) -> M4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    m
}

/// L_k = s τ_a ⊗ τ_b.
const L_TABLE: [(f64, usize, usize); 15] = [
    (1.0, 3, 0),
    (1.0, 0, 3),
    (1.0, 3, 3),
    (1.0, 0, 1),
    (1.0, 0, 2),
    (1.0, 3, 1),
    (1.0, 3, 2),
    (1.0, 1, 0),
    (1.0, 2, 0),
    (1.0, 1, 3),
    (1.0, 2, 3),
    (1.0, 1, 1),
    (1.0, 1, 2),
    (-1.0, 2, 2),
    (1.0, 2, 1),
];

pub fn l(k: usize) -> M4 {
    let (s, a, b) = L_TABLE[k - 1];
    scale(&kron(&pauli(a), &pauli(b)), C::new(s, 0.0))
}

pub fn mul<const N: usize>(a: &[[C; N]; N], b: &[[C; N]; N]) -> [[C; N]; N] {
    let mut m = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            for k in 0..N {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}

pub fn add<const N: usize>(a: &[[C; N]; N], b: &[[C; N]; N]) -> [[C; N]; N] {
    let mut m = *a;
    for i in 0..N {
        for j in 0..N {
            m[i][j] += b[i][j];
        }
    }
    m
}

pub fn scale<const N: usize>(a: &[[C; N]; N], s: C) -> [[C; N]; N] {
    let mut m = *a;
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    m
}

pub fn trace<const N: usize>(a: &[[C; N]; N]) -> C {
    (0..N).map(|i| a[i][i]).sum()
}

pub fn anti<const N: usize>(a: &[[C; N]; N], b: &[[C; N]; N]) -> [[C; N]; N] {
    add(&mul(a, b), &mul(b, a))
}

pub fn dagger<const N: usize>(a: &[[C; N]; N]) -> [[C; N]; N] {
    let mut m = [[ZERO; N]; N];
    for i in 0..N {
        for j in 0..N {
            m[i][j] = a[j][i].conj();
        }
    }
    m
}

pub fn identity<const N: usize>() -> [[C; N]; N] {
    let mut m = [[ZERO; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

/// e·τ + e₀.
pub fn op2(e: &[f64], e0: f64) -> M2 {
    let mut m = scale(&identity(), C::new(e0, 0.0));
    for (k, x) in e.iter().enumerate() {
        m = add(&m, &scale(&pauli(k + 1), C::new(*x, 0.0)));
    }
    m
}

pub fn op4(e: &[f64]) -> M4 {
    let mut m = [[ZERO; 4]; 4];
    for (k, x) in e.iter().enumerate() {
        m = add(&m, &scale(&l(k + 1), C::new(*x, 0.0)));
    }
    m
}

pub fn rho2(r: &[f64]) -> M2 {
    scale(&add(&identity(), &op2(r, 0.0)), C::new(0.5, 0.0))
}

pub fn rho4(f: &[f64]) -> M4 {
    scale(&add(&identity(), &op4(f)), C::new(0.25, 0.0))
}

pub fn projector4(psi: &[C; 4]) -> M4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = psi[i] * psi[j].conj();
        }
    }
    m
}

pub fn max_diff<const N: usize>(a: &[[C; N]; N], b: &[[C; N]; N]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            d = d.max((a[i][j] - b[i][j]).norm());
        }
    }
    d
}

pub fn unit3(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

/// Unit 3-vector from two angles.
pub fn polar(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

pub fn random_psi(rng: &mut impl Rng) -> [C; 4] {
    loop {
        let v: [C; 4] =
            std::array::from_fn(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.map(|z| z / n);
        }
    }
}
