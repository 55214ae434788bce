//! Exact arithmetic in the cyclotomic ring `Z[ζ_n]`, `ζ_n = e^{2πi/n}`.
//!
//! Elements are kept in canonical form: integer coordinates in the power
//! basis `1, ζ, …, ζ^{d-1}` with `d = φ(n)`, reduced modulo the cyclotomic
//! polynomial `Φ_n`. Equality and zero tests are therefore exact.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Precomputed data for one cyclotomic ring.
#[derive(Debug)]
pub struct CyclotomicField {
    order: u64,
    /// Monic `Φ_n`, lowest degree first, length `degree + 1`.
    modulus: Vec<i64>,
    /// Canonical coordinates of `ζ^k` for `k in 0..order`.
    powers: Vec<Vec<i64>>,
    roots: Vec<Complex64>,
}

fn field_cache() -> &'static Mutex<HashMap<u64, Arc<CyclotomicField>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<CyclotomicField>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn ck_mul(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("cyclotomic coefficient overflow")
}

fn ck_add(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("cyclotomic coefficient overflow")
}

/// Exact division of integer polynomials by a monic divisor.
fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    debug_assert_eq!(den[dd], 1);
    if rem.len() <= dd {
        return vec![0];
    }
    let mut quot = vec![0i64; rem.len() - dd];
    for k in (dd..rem.len()).rev() {
        let c = rem[k];
        if c == 0 {
            continue;
        }
        quot[k - dd] = c;
        for (i, &d) in den.iter().enumerate() {
            rem[k - dd + i] -= ck_mul(c, d);
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0), "inexact cyclotomic division");
    quot
}

fn cyclotomic_polynomial(n: u64) -> Vec<i64> {
    // x^n - 1 divided by Φ_d for every proper divisor d.
    let mut poly = vec![0i64; n as usize + 1];
    poly[0] = -1;
    poly[n as usize] = 1;
    for d in 1..n {
        if n.is_multiple_of(d) {
            poly = poly_div_exact(&poly, &CyclotomicField::get(d).modulus);
        }
    }
    poly
}

impl CyclotomicField {
    /// Shared field of order `n` (built once, then cached).
    pub fn get(order: u64) -> Arc<CyclotomicField> {
        assert!(order >= 1, "cyclotomic order must be positive");
        if let Some(f) = field_cache().lock().unwrap().get(&order) {
            return Arc::clone(f);
        }
        // Built outside the lock: construction recurses into smaller orders.
        let field = Arc::new(Self::build(order));
        let mut cache = field_cache().lock().unwrap();
        Arc::clone(cache.entry(order).or_insert(field))
    }

    fn build(order: u64) -> Self {
        let modulus = cyclotomic_polynomial(order);
        let degree = modulus.len() - 1;
        let mut powers = Vec::with_capacity(order as usize);
        let mut cur = vec![0i64; degree];
        cur[0] = 1;
        for _ in 0..order {
            powers.push(cur.clone());
            // multiply by ζ: shift up, then fold the overflow coordinate
            let top = cur[degree - 1];
            for i in (1..degree).rev() {
                cur[i] = cur[i - 1];
            }
            cur[0] = 0;
            if top != 0 {
                for i in 0..degree {
                    cur[i] -= ck_mul(top, modulus[i]);
                }
            }
        }
        let roots = (0..order)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / order as f64))
            .collect();
        CyclotomicField { order, modulus, powers, roots }
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    fn reduce(&self, mut poly: Vec<i64>) -> Vec<i64> {
        let d = self.degree();
        for k in (d..poly.len()).rev() {
            let c = poly[k];
            if c == 0 {
                continue;
            }
            for i in 0..=d {
                poly[k - d + i] -= ck_mul(c, self.modulus[i]);
            }
        }
        poly.truncate(d);
        poly.resize(d, 0);
        poly
    }
}

/// An element of `Z[ζ_n]` in canonical form.
#[derive(Clone)]
pub struct Cyclotomic {
    field: Arc<CyclotomicField>,
    coords: Vec<i64>,
}

impl Cyclotomic {
    pub fn zero(field: &Arc<CyclotomicField>) -> Self {
        Cyclotomic { field: Arc::clone(field), coords: vec![0; field.degree()] }
    }

    /// `ζ_n^k` for any integer `k`.
    pub fn root(field: &Arc<CyclotomicField>, k: i64) -> Self {
        let idx = k.rem_euclid(field.order as i64) as usize;
        Cyclotomic { field: Arc::clone(field), coords: field.powers[idx].clone() }
    }

    pub fn integer(field: &Arc<CyclotomicField>, value: i64) -> Self {
        let mut z = Self::zero(field);
        z.coords[0] = value;
        z
    }

    /// `re + i·im`; requires `4 | n` so that `i` lies in the ring.
    pub fn gaussian(field: &Arc<CyclotomicField>, re: i64, im: i64) -> Self {
        assert!(field.order.is_multiple_of(4), "i is not in Z[ζ_{}]", field.order);
        let i = Self::root(field, field.order as i64 / 4);
        Self::integer(field, re).add(&i.scale(im))
    }

    pub fn field(&self) -> &Arc<CyclotomicField> {
        &self.field
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(
            self.field.order, other.field.order,
            "mixing cyclotomic rings of different orders"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        let coords = self.coords.iter().zip(&other.coords).map(|(&a, &b)| ck_add(a, b)).collect();
        Cyclotomic { field: Arc::clone(&self.field), coords }
    }

    pub fn neg(&self) -> Self {
        Cyclotomic {
            field: Arc::clone(&self.field),
            coords: self.coords.iter().map(|&c| c.checked_neg().expect("cyclotomic coefficient overflow")).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> Self {
        Cyclotomic {
            field: Arc::clone(&self.field),
            coords: self.coords.iter().map(|&c| ck_mul(c, k)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_same(other);
        let d = self.field.degree();
        let mut prod = vec![0i64; 2 * d];
        for (i, &a) in self.coords.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coords.iter().enumerate() {
                if b != 0 {
                    prod[i + j] = ck_add(prod[i + j], ck_mul(a, b));
                }
            }
        }
        Cyclotomic { field: Arc::clone(&self.field), coords: self.field.reduce(prod) }
    }

    /// Multiplication by `ζ^k`.
    pub fn mul_root(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.mul(&Self::root(&self.field, k))
    }

    /// Complex conjugate: `ζ^k ↦ ζ^{-k}`.
    pub fn conj(&self) -> Self {
        let n = self.field.order as usize;
        let d = self.field.degree();
        let mut out = vec![0i64; d];
        for (k, &c) in self.coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let pw = &self.field.powers[(n - k) % n];
            for i in 0..d {
                out[i] = ck_add(out[i], ck_mul(c, pw[i]));
            }
        }
        Cyclotomic { field: Arc::clone(&self.field), coords: out }
    }

    pub fn to_complex(&self) -> Complex64 {
        self.coords
            .iter()
            .zip(&self.field.roots)
            .map(|(&c, &r)| r * c as f64)
            .sum()
    }
}

impl PartialEq for Cyclotomic {
    fn eq(&self, other: &Self) -> bool {
        self.field.order == other.field.order && self.coords == other.coords
    }
}

impl Eq for Cyclotomic {}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "(")?;
        for (k, &c) in self.coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·ζ{}^{k}", self.field.order)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_cyclotomic_polynomials() {
        assert_eq!(CyclotomicField::get(1).modulus, vec![-1, 1]);
        assert_eq!(CyclotomicField::get(4).modulus, vec![1, 0, 1]);
        assert_eq!(CyclotomicField::get(12).modulus, vec![1, 0, -1, 0, 1]);
        // Φ_105 is the first with a coefficient of magnitude 2
        let phi105 = &CyclotomicField::get(105).modulus;
        assert_eq!(phi105.len() - 1, 48);
        assert!(phi105.contains(&-2));
    }

    #[test]
    fn roots_multiply_exactly() {
        let f = CyclotomicField::get(28);
        for a in -30..30 {
            for b in [-7, 0, 3, 13, 27] {
                let lhs = Cyclotomic::root(&f, a).mul(&Cyclotomic::root(&f, b));
                assert_eq!(lhs, Cyclotomic::root(&f, a + b));
            }
        }
    }

    #[test]
    fn sum_of_all_roots_vanishes() {
        let f = CyclotomicField::get(20);
        let s = (0..20).fold(Cyclotomic::zero(&f), |acc, k| acc.add(&Cyclotomic::root(&f, k)));
        assert!(s.is_zero());
    }

    #[test]
    fn conjugation_matches_complex() {
        let f = CyclotomicField::get(28);
        let z = Cyclotomic::gaussian(&f, 3, -2).add(&Cyclotomic::root(&f, 5).scale(4));
        let c = z.conj().to_complex();
        let expect = z.to_complex().conj();
        assert!((c - expect).norm() < 1e-12);
        assert_eq!(z.conj().conj(), z);
    }

    #[test]
    fn gaussian_i_squared() {
        let f = CyclotomicField::get(8);
        let i = Cyclotomic::gaussian(&f, 0, 1);
        assert_eq!(i.mul(&i), Cyclotomic::integer(&f, -1));
    }
}
