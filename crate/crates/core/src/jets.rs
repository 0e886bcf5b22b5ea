//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients `∂^α f / α!` of a function of
//! `dim` perturbation variables, for every multi-index with `|α| ≤ order`.
//! Coefficients are kept densely in graded-lexicographic order, so the
//! coefficients of degree `≤ k` always form a prefix of the storage.
//!
//! The coefficient type is generic: `Jet<f64>` for real geometry,
//! `Jet<Complex64>` for fiber-valued data, and `Jet<Jet<_>>` for nested
//! differentiation.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::scalar::{fm, Real, Scalar};

/// Errors raised by the checked jet operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("{function} is not defined at base value {base}")]
    Domain {
        function: &'static str,
        base: Complex64,
    },
    #[error("derivative of order {requested} requested from a jet of order {order}")]
    OrderExceeded { requested: usize, order: usize },
    #[error("multi-index has {got} entries but the jet has {dim} variables")]
    DimensionMismatch { got: usize, dim: usize },
}

/// Shape of a jet: number of variables, truncation order and the precomputed
/// index tables used by multiplication, differentiation and composition.
pub struct Layout {
    dim: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    degree_start: Vec<usize>,
    products: Vec<(u32, u32, u32)>,
    // For each slot of degree ≥ 1: (variable, slot of α − e_variable).
    parent: Vec<(u8, u32)>,
    // shift[v][k] = slot of α_k + e_v, for slots k of degree < order.
    shift: Vec<Vec<u32>>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layout(dim={}, order={})", self.dim, self.order)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of coefficients of a jet in `dim` variables truncated at `order`.
pub fn jet_len(dim: usize, order: usize) -> usize {
    binomial(dim + order, order)
}

impl Layout {
    /// Returns the (shared) layout for the given dimension and order.
    pub fn new(dim: usize, order: usize) -> Arc<Layout> {
        assert!(dim >= 1, "jets need at least one variable");
        #[cfg(feature = "std")]
        {
            use std::collections::BTreeMap;
            use std::sync::Mutex;
            static CACHE: Mutex<BTreeMap<(usize, usize), Arc<Layout>>> =
                Mutex::new(BTreeMap::new());
            let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
            cache
                .entry((dim, order))
                .or_insert_with(|| Arc::new(Layout::build(dim, order)))
                .clone()
        }
        #[cfg(not(feature = "std"))]
        {
            Arc::new(Layout::build(dim, order))
        }
    }

    fn build(dim: usize, order: usize) -> Layout {
        let mut indices: Vec<Vec<u8>> = Vec::with_capacity(jet_len(dim, order));
        let mut degree_start = Vec::with_capacity(order + 2);
        for deg in 0..=order {
            degree_start.push(indices.len());
            let mut current = vec![0u8; dim];
            enumerate_degree(dim, deg, 0, &mut current, &mut indices);
        }
        degree_start.push(indices.len());

        let lookup = |alpha: &[u8]| -> Option<usize> {
            let deg: usize = alpha.iter().map(|&a| a as usize).sum();
            if deg > order {
                return None;
            }
            (degree_start[deg]..degree_start[deg + 1]).find(|&k| indices[k] == alpha)
        };

        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let da: usize = a.iter().map(|&x| x as usize).sum();
            for (j, b) in indices.iter().enumerate() {
                let db: usize = b.iter().map(|&x| x as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let k = lookup(&sum).expect("sum of multi-indices within order");
                products.push((i as u32, j as u32, k as u32));
            }
        }

        let mut parent = vec![(0u8, 0u32); indices.len()];
        for (k, alpha) in indices.iter().enumerate().skip(1) {
            let v = alpha.iter().position(|&a| a > 0).unwrap();
            let mut p = alpha.clone();
            p[v] -= 1;
            parent[k] = (v as u8, lookup(&p).unwrap() as u32);
        }

        let lower = if order == 0 { 0 } else { degree_start[order] };
        let shift = (0..dim)
            .map(|v| {
                (0..lower)
                    .map(|k| {
                        let mut a = indices[k].clone();
                        a[v] += 1;
                        lookup(&a).unwrap() as u32
                    })
                    .collect()
            })
            .collect();

        Layout {
            dim,
            order,
            indices,
            degree_start,
            products,
            parent,
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Multi-index stored in slot `k`.
    pub fn multi_index(&self, k: usize) -> &[u8] {
        &self.indices[k]
    }

    pub fn degree_of(&self, k: usize) -> usize {
        self.degree_start.partition_point(|&s| s <= k) - 1
    }

    /// Slot of the multi-index `alpha`, if it is within the truncation order.
    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        if alpha.len() != self.dim {
            return None;
        }
        let deg: usize = alpha.iter().sum();
        if deg > self.order {
            return None;
        }
        (self.degree_start[deg]..self.degree_start[deg + 1]).find(|&k| {
            self.indices[k]
                .iter()
                .zip(alpha)
                .all(|(&a, &b)| a as usize == b)
        })
    }
}

fn enumerate_degree(
    dim: usize,
    remaining: usize,
    var: usize,
    cur: &mut [u8],
    out: &mut Vec<Vec<u8>>,
) {
    if var == dim - 1 {
        cur[var] = remaining as u8;
        out.push(cur.to_vec());
        return;
    }
    for a in (0..=remaining).rev() {
        cur[var] = a as u8;
        enumerate_degree(dim, remaining - a, var + 1, cur, out);
    }
    cur[var] = 0;
}

/// Truncated multivariate Taylor expansion with coefficients in `T`.
///
/// A jet without a layout is a bare constant; it combines with any other jet.
#[derive(Clone)]
pub struct Jet<T> {
    layout: Option<Arc<Layout>>,
    c: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.layout {
            None => write!(f, "Jet::const({:?})", self.c[0]),
            Some(l) => write!(f, "Jet(d={}, N={}, {:?})", l.dim, l.order, self.c),
        }
    }
}

impl<T: Scalar> Jet<T> {
    /// Constant without a layout.
    pub fn constant(v: T) -> Self {
        Jet {
            layout: None,
            c: vec![v],
        }
    }

    /// Constant carrying an explicit layout.
    pub fn constant_in(layout: &Arc<Layout>, v: T) -> Self {
        let mut c = vec![T::zero(); layout.len()];
        c[0] = v;
        Jet {
            layout: Some(layout.clone()),
            c,
        }
    }

    /// The independent variable `var` shifted to `value`.
    pub fn variable(layout: &Arc<Layout>, value: T, var: usize) -> Self {
        let mut j = Self::constant_in(layout, value);
        if layout.order >= 1 {
            j.c[1 + var] = T::one();
        }
        j
    }

    pub fn from_coeffs(layout: &Arc<Layout>, c: Vec<T>) -> Self {
        assert_eq!(c.len(), layout.len());
        Jet {
            layout: Some(layout.clone()),
            c,
        }
    }

    /// Lifts a point: component `i` becomes `x_i + ε_i`.
    pub fn lift(layout: &Arc<Layout>, x: &[T]) -> Vec<Self> {
        x.iter()
            .enumerate()
            .map(|(i, v)| Self::variable(layout, v.clone(), i))
            .collect()
    }

    pub fn layout(&self) -> Option<&Arc<Layout>> {
        self.layout.as_ref()
    }

    pub fn order(&self) -> usize {
        self.layout.as_ref().map_or(0, |l| l.order)
    }

    pub fn value(&self) -> &T {
        &self.c[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.c
    }

    /// Taylor coefficient at `alpha` (zero when the jet is a bare constant).
    pub fn coeff(&self, alpha: &[usize]) -> T {
        match &self.layout {
            None => {
                if alpha.iter().all(|&a| a == 0) {
                    self.c[0].clone()
                } else {
                    T::zero()
                }
            }
            Some(l) => l
                .index_of(alpha)
                .map_or_else(T::zero, |k| self.c[k].clone()),
        }
    }

    /// Derivative `∂^α f` at the base point.
    pub fn extract(&self, alpha: &[usize]) -> Result<T, JetError> {
        if let Some(l) = &self.layout {
            if alpha.len() != l.dim {
                return Err(JetError::DimensionMismatch {
                    got: alpha.len(),
                    dim: l.dim,
                });
            }
        }
        let deg: usize = alpha.iter().sum();
        if deg > self.order() {
            return Err(JetError::OrderExceeded {
                requested: deg,
                order: self.order(),
            });
        }
        let fact: f64 = alpha.iter().map(|&a| factorial(a)).product();
        Ok(self.coeff(alpha).scale(fact))
    }

    /// First partial derivative in variable `var`; the result has order one less.
    pub fn derivative(&self, var: usize) -> Self {
        let l = match &self.layout {
            None => return Self::constant(T::zero()),
            Some(l) => l,
        };
        if l.order == 0 {
            return Self::constant(T::zero());
        }
        let lower = Layout::new(l.dim, l.order - 1);
        let c = (0..lower.len())
            .map(|k| {
                let m = l.indices[k][var] as f64 + 1.0;
                self.c[l.shift[var][k] as usize].scale(m)
            })
            .collect();
        Jet {
            layout: Some(lower),
            c,
        }
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        match &self.layout {
            Some(l) if order < l.order => {
                let lay = Layout::new(l.dim, order);
                Jet {
                    c: self.c[..lay.len()].to_vec(),
                    layout: Some(lay),
                }
            }
            _ => self.clone(),
        }
    }

    /// Multiplies each coefficient of degree `k` by `f^k`, i.e. substitutes
    /// `ε → f ε`.
    pub fn scale_vars(&self, f: f64) -> Self {
        let l = match &self.layout {
            None => return self.clone(),
            Some(l) => l,
        };
        let mut out = self.clone();
        let mut pw = 1.0;
        for deg in 1..=l.order {
            pw *= f;
            for k in l.degree_start[deg]..l.degree_start[deg + 1] {
                out.c[k] = out.c[k].scale(pw);
            }
        }
        out
    }

    /// Substitutes the perturbation variables by jets `args[i]` (whose base
    /// values must vanish), returning a jet in the layout of `args`.
    pub fn compose(&self, args: &[Jet<T>]) -> Jet<T> {
        let l = match &self.layout {
            None => return self.clone(),
            Some(l) => l,
        };
        assert_eq!(args.len(), l.dim);
        let target = args.iter().find_map(|a| a.layout.clone());
        let mut monos: Vec<Jet<T>> = Vec::with_capacity(l.len());
        let one = match &target {
            Some(t) => Jet::constant_in(t, T::one()),
            None => Jet::constant(T::one()),
        };
        monos.push(one);
        let mut out = monos[0].clone() * &Jet::constant(self.c[0].clone());
        for k in 1..l.len() {
            let (v, p) = l.parent[k];
            let m = monos[p as usize].clone() * &args[v as usize];
            out = out + &(m.clone() * &Jet::constant(self.c[k].clone()));
            monos.push(m);
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Jet<U> {
        Jet {
            layout: self.layout.clone(),
            c: self.c.iter().map(f).collect(),
        }
    }

    /// The jet minus its base value.
    pub fn nilpotent(&self) -> Self {
        let mut h = self.clone();
        h.c[0] = T::zero();
        h
    }

    /// Evaluates `Σ_k series[k] h^k` where `h` is the nilpotent part of `self`.
    fn horner(&self, series: &[T]) -> Self {
        let h = self.nilpotent();
        let n = series.len().min(self.order() + 1);
        let mut acc = Jet::constant(series[n - 1].clone());
        for k in (0..n - 1).rev() {
            acc = acc * &h;
            acc.c[0] = acc.c[0].clone() + &series[k];
        }
        acc
    }

    fn shape_from(a: &Self, b: &Self) -> Option<Arc<Layout>> {
        match (&a.layout, &b.layout) {
            (None, None) => None,
            (Some(l), None) | (None, Some(l)) => Some(l.clone()),
            (Some(la), Some(lb)) => {
                assert_eq!(la.dim, lb.dim, "jets with different variable counts");
                if la.order <= lb.order {
                    Some(la.clone())
                } else {
                    Some(lb.clone())
                }
            }
        }
    }

    fn add_impl(&self, o: &Self, sign: f64) -> Self {
        match (&self.layout, &o.layout) {
            (_, None) => {
                let mut r = self.clone();
                r.c[0] = if sign > 0.0 {
                    r.c[0].clone() + &o.c[0]
                } else {
                    r.c[0].clone() - &o.c[0]
                };
                r
            }
            (None, Some(_)) => {
                let mut r = if sign > 0.0 { o.clone() } else { -o.clone() };
                r.c[0] = r.c[0].clone() + &self.c[0];
                r
            }
            _ => {
                let lay = Self::shape_from(self, o).unwrap();
                let n = lay.len();
                let c = if sign > 0.0 {
                    (0..n).map(|k| self.c[k].clone() + &o.c[k]).collect()
                } else {
                    (0..n).map(|k| self.c[k].clone() - &o.c[k]).collect()
                };
                Jet {
                    layout: Some(lay),
                    c,
                }
            }
        }
    }

    fn mul_impl(&self, o: &Self) -> Self {
        match (&self.layout, &o.layout) {
            (_, None) => Jet {
                layout: self.layout.clone(),
                c: self.c.iter().map(|x| x.clone() * &o.c[0]).collect(),
            },
            (None, Some(_)) => Jet {
                layout: o.layout.clone(),
                c: o.c.iter().map(|x| self.c[0].clone() * x).collect(),
            },
            (Some(la), Some(lb)) => {
                let lay = Self::shape_from(self, o).unwrap();
                let n = lay.len();
                let mut c = vec![T::zero(); n];
                let table = if la.order <= lb.order {
                    &la.products
                } else {
                    &lb.products
                };
                for &(i, j, k) in table {
                    c[k as usize].mul_acc(&self.c[i as usize], &o.c[j as usize]);
                }
                Jet {
                    layout: Some(lay),
                    c,
                }
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.add_impl(&o, 1.0)
    }
}
impl<'a, T: Scalar> Add<&'a Jet<T>> for Jet<T> {
    type Output = Self;
    fn add(self, o: &'a Self) -> Self {
        self.add_impl(o, 1.0)
    }
}
impl<T: Scalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.add_impl(&o, -1.0)
    }
}
impl<'a, T: Scalar> Sub<&'a Jet<T>> for Jet<T> {
    type Output = Self;
    fn sub(self, o: &'a Self) -> Self {
        self.add_impl(o, -1.0)
    }
}
impl<T: Scalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.mul_impl(&o)
    }
}
impl<'a, T: Scalar> Mul<&'a Jet<T>> for Jet<T> {
    type Output = Self;
    fn mul(self, o: &'a Self) -> Self {
        self.mul_impl(o)
    }
}
impl<T: Scalar> Div for Jet<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self.mul_impl(&Scalar::recip(&o))
    }
}
impl<T: Scalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet {
            layout: self.layout,
            c: self.c.into_iter().map(|x| -x).collect(),
        }
    }
}

impl<T: Scalar> Scalar for Jet<T> {
    fn from_f64(v: f64) -> Self {
        Jet::constant(T::from_f64(v))
    }

    fn base(&self) -> Complex64 {
        self.c[0].base()
    }

    fn scale(&self, f: f64) -> Self {
        Jet {
            layout: self.layout.clone(),
            c: self.c.iter().map(|x| x.scale(f)).collect(),
        }
    }

    fn conj(&self) -> Self {
        self.map(|x| x.conj())
    }

    fn mul_acc(&mut self, a: &Self, b: &Self) {
        match (&self.layout, &a.layout, &b.layout) {
            (Some(ls), Some(la), Some(lb)) if ls.order <= la.order && ls.order <= lb.order => {
                for &(i, j, k) in &ls.products {
                    self.c[k as usize].mul_acc(&a.c[i as usize], &b.c[j as usize]);
                }
            }
            _ => {
                let p = a.mul_impl(b);
                *self = self.add_impl(&p, 1.0);
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    fn recip(&self) -> Self {
        let n = self.order();
        let inv = self.c[0].recip();
        let mut series = Vec::with_capacity(n + 1);
        let mut term = inv.clone();
        for _ in 0..=n {
            series.push(term.clone());
            term = -(term * &inv);
        }
        self.horner(&series)
    }

    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let series: Vec<T> = (0..=self.order())
            .map(|k| e.scale(1.0 / factorial(k)))
            .collect();
        self.horner(&series)
    }

    fn ln(&self) -> Self {
        let a = &self.c[0];
        let inv = a.recip();
        let mut series = Vec::with_capacity(self.order() + 1);
        series.push(a.ln());
        let mut pw = T::one();
        for k in 1..=self.order() {
            pw = pw * &inv;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(pw.scale(sign / k as f64));
        }
        self.horner(&series)
    }

    fn sin(&self) -> Self {
        let s = self.c[0].sin();
        let c = self.c[0].cos();
        let series: Vec<T> = (0..=self.order())
            .map(|k| {
                let v = match k % 4 {
                    0 => s.clone(),
                    1 => c.clone(),
                    2 => -s.clone(),
                    _ => -c.clone(),
                };
                v.scale(1.0 / factorial(k))
            })
            .collect();
        self.horner(&series)
    }

    fn cos(&self) -> Self {
        let s = self.c[0].sin();
        let c = self.c[0].cos();
        let series: Vec<T> = (0..=self.order())
            .map(|k| {
                let v = match k % 4 {
                    0 => c.clone(),
                    1 => -s.clone(),
                    2 => -c.clone(),
                    _ => s.clone(),
                };
                v.scale(1.0 / factorial(k))
            })
            .collect();
        self.horner(&series)
    }

    fn tan(&self) -> Self {
        self.sin() * &Scalar::recip(&self.cos())
    }

    fn sinh(&self) -> Self {
        let s = self.c[0].sinh();
        let c = self.c[0].cosh();
        let series: Vec<T> = (0..=self.order())
            .map(|k| {
                let v = if k % 2 == 0 { s.clone() } else { c.clone() };
                v.scale(1.0 / factorial(k))
            })
            .collect();
        self.horner(&series)
    }

    fn cosh(&self) -> Self {
        let s = self.c[0].sinh();
        let c = self.c[0].cosh();
        let series: Vec<T> = (0..=self.order())
            .map(|k| {
                let v = if k % 2 == 0 { c.clone() } else { s.clone() };
                v.scale(1.0 / factorial(k))
            })
            .collect();
        self.horner(&series)
    }

    fn atan(&self) -> Self {
        // atan(a + h) = atan(a) + atan(h / (1 + a (a + h)))
        let a = Jet::constant(self.c[0].clone());
        let h = self.nilpotent();
        let denom = Jet::constant(T::one()) + &(a * self);
        let u = h * &Scalar::recip(&denom);
        let series: Vec<T> = (0..=self.order())
            .map(|k| {
                if k % 2 == 0 {
                    T::zero()
                } else {
                    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    T::from_f64(sign / k as f64)
                }
            })
            .collect();
        let mut r = u.horner_full(&series);
        r.c[0] = self.c[0].atan();
        r
    }

    fn powf(&self, p: f64) -> Self {
        let a = &self.c[0];
        let ap = a.powf(p);
        let inv = a.recip();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        let mut pw = T::one();
        for k in 0..=self.order() {
            series.push((ap.clone() * &pw).scale(binom));
            binom *= (p - k as f64) / (k as f64 + 1.0);
            pw = pw * &inv;
        }
        self.horner(&series)
    }
}

impl<T: Scalar> Jet<T> {
    // Horner on the full jet (its base value must already be zero).
    fn horner_full(&self, series: &[T]) -> Self {
        let n = series.len().min(self.order() + 1);
        let mut acc = Jet::constant(series[n - 1].clone());
        for k in (0..n - 1).rev() {
            acc = acc * self;
            acc.c[0] = acc.c[0].clone() + &series[k];
        }
        acc
    }
}

impl<T: Real> Real for Jet<T> {
    type Complex = Jet<T::Complex>;

    fn to_complex(&self) -> Jet<T::Complex> {
        self.map(|x| x.to_complex())
    }

    fn complex(re: &Self, im: &Self) -> Jet<T::Complex> {
        let lay = Jet::shape_from(re, im);
        match lay {
            None => Jet::constant(T::complex(&re.c[0], &im.c[0])),
            Some(l) => {
                let get = |j: &Jet<T>, k: usize| -> T {
                    if j.layout.is_none() {
                        if k == 0 {
                            j.c[0].clone()
                        } else {
                            T::zero()
                        }
                    } else {
                        j.c[k].clone()
                    }
                };
                let c = (0..l.len())
                    .map(|k| T::complex(&get(re, k), &get(im, k)))
                    .collect();
                Jet { layout: Some(l), c }
            }
        }
    }

    fn re_part(z: &Jet<T::Complex>) -> Self {
        z.map(|x| T::re_part(x))
    }

    fn im_part(z: &Jet<T::Complex>) -> Self {
        z.map(|x| T::im_part(x))
    }
}

/// Elementary functions accepted by [`elementary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Pow(f64),
    Sinh,
    Cosh,
    Atan,
    Neg,
    Recip,
}

/// Checked Taylor composition of an elementary function with a jet.
pub fn elementary<T: Scalar>(f: Elementary, j: &Jet<T>) -> Result<Jet<T>, JetError> {
    let b = j.base();
    let on_real_axis = b.im == 0.0;
    let fail = |name| {
        Err(JetError::Domain {
            function: name,
            base: b,
        })
    };
    match f {
        Elementary::Recip if b == Complex64::new(0.0, 0.0) => return fail("recip"),
        Elementary::Ln if b == Complex64::new(0.0, 0.0) || (on_real_axis && b.re < 0.0) => {
            return fail("ln")
        }
        Elementary::Sqrt if (on_real_axis && b.re < 0.0) || (b.norm() == 0.0 && j.order() > 0) => {
            return fail("sqrt")
        }
        Elementary::Pow(p) => {
            let integer = fm::fract(p) == 0.0;
            if !integer && ((on_real_axis && b.re < 0.0) || (b.norm() == 0.0 && j.order() > 0)) {
                return fail("pow");
            }
            if integer && p < 0.0 && b.norm() == 0.0 {
                return fail("pow");
            }
        }
        Elementary::Tan if j.value().cos().base().norm() == 0.0 => return fail("tan"),
        Elementary::Atan
            if !on_real_axis
                && (b - Complex64::new(0.0, 1.0)).norm()
                    * (b + Complex64::new(0.0, 1.0)).norm()
                    == 0.0 =>
        {
            return fail("atan")
        }
        _ => {}
    }
    Ok(match f {
        Elementary::Sin => j.sin(),
        Elementary::Cos => j.cos(),
        Elementary::Tan => j.tan(),
        Elementary::Exp => j.exp(),
        Elementary::Ln => j.ln(),
        Elementary::Sqrt => j.sqrt(),
        Elementary::Pow(p) if fm::fract(p) == 0.0 && p.abs() < 64.0 => j.powi(p as i32),
        Elementary::Pow(p) => j.powf(p),
        Elementary::Sinh => j.sinh(),
        Elementary::Cosh => j.cosh(),
        Elementary::Atan => j.atan(),
        Elementary::Neg => -j.clone(),
        Elementary::Recip => Scalar::recip(j),
    })
}

/// Lifts a real point to complex jets: `x_i + ε_i`, truncated at `order`.
pub fn lift_point(x: &[f64], order: usize) -> Vec<Jet<Complex64>> {
    let lay = Layout::new(x.len().max(1), order);
    x.iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(&lay, Complex64::new(v, 0.0), i))
        .collect()
}

/// Real-coefficient variant of [`lift_point`].
pub fn lift_point_real(x: &[f64], order: usize) -> Vec<Jet<f64>> {
    let lay = Layout::new(x.len().max(1), order);
    Jet::lift(&lay, x)
}

/// Derivative `∂^α f` at the base point; errors if `|α|` exceeds the order.
pub fn extract<T: Scalar>(j: &Jet<T>, alpha: &[usize]) -> Result<T, JetError> {
    j.extract(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn close(a: Complex64, b: f64, tol: f64) -> bool {
        (a - c(b)).norm() <= tol
    }

    #[test]
    fn square_of_lifted_three() {
        let x = lift_point(&[3.0], 2);
        let sq = x[0].clone() * &x[0];
        let want = [9.0, 6.0, 1.0];
        for (k, w) in want.iter().enumerate() {
            assert!(close(sq.coeffs()[k], *w, 1e-15));
        }
    }

    #[test]
    fn sin_maclaurin() {
        let x = lift_point(&[0.0], 3);
        let s = elementary(Elementary::Sin, &x[0]).unwrap();
        let want = [0.0, 1.0, 0.0, -1.0 / 6.0];
        for (k, w) in want.iter().enumerate() {
            assert!(close(s.coeffs()[k], *w, 1e-15), "{k}: {:?}", s.coeffs()[k]);
        }
    }

    #[test]
    fn product_rule_two_vars() {
        let x = lift_point(&[1.0, 2.0], 1);
        let p = x[0].clone() * &x[1];
        assert!(close(p.extract(&[0, 0]).unwrap(), 2.0, 1e-15));
        assert!(close(p.extract(&[1, 0]).unwrap(), 2.0, 1e-15));
        assert!(close(p.extract(&[0, 1]).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn exp_and_recip_series() {
        let x = lift_point(&[0.0], 3);
        let e = elementary(Elementary::Exp, &x[0]).unwrap();
        for (k, w) in [1.0, 1.0, 0.5, 1.0 / 6.0].iter().enumerate() {
            assert!(close(e.coeffs()[k], *w, 1e-15));
        }
        let x = lift_point(&[2.0], 2);
        let r = elementary(Elementary::Recip, &x[0]).unwrap();
        for (k, w) in [0.5, -0.25, 0.125].iter().enumerate() {
            assert!(close(r.coeffs()[k], *w, 1e-15));
        }
    }

    #[test]
    fn sqrt_matches_finite_differences() {
        // Oracle: symmetric finite differences of sqrt(4 + t).
        let f = |t: f64| (4.0 + t).sqrt();
        let h = 1e-3;
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h) / 2.0;
        assert!((d1 - 0.25).abs() < 1e-6);
        assert!((d2 + 1.0 / 64.0).abs() < 1e-6);
        let x = lift_point(&[4.0], 2);
        let s = elementary(Elementary::Sqrt, &x[0]).unwrap();
        for (k, w) in [2.0, 0.25, -1.0 / 64.0].iter().enumerate() {
            assert!(close(s.coeffs()[k], *w, 1e-15));
        }
    }

    #[test]
    fn extract_normalization_and_errors() {
        let x = lift_point(&[3.0], 2);
        let sq = x[0].clone() * &x[0];
        assert!(close(sq.extract(&[2]).unwrap(), 2.0, 1e-15));
        assert!(close(sq.extract(&[0]).unwrap(), 9.0, 1e-15));
        assert_eq!(
            sq.extract(&[3]),
            Err(JetError::OrderExceeded {
                requested: 3,
                order: 2
            })
        );
        let xy = lift_point(&[1.0, 2.0], 2);
        let p = xy[0].clone() * &xy[1];
        assert!(close(p.extract(&[1, 1]).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn domain_errors() {
        let z = lift_point(&[0.0], 2);
        assert!(matches!(
            elementary(Elementary::Recip, &z[0]),
            Err(JetError::Domain {
                function: "recip",
                ..
            })
        ));
        let n = lift_point(&[-1.0], 2);
        assert!(elementary(Elementary::Ln, &n[0]).is_err());
        assert!(elementary(Elementary::Sqrt, &n[0]).is_err());
        assert!(elementary(Elementary::Pow(0.5), &n[0]).is_err());
        assert!(elementary(Elementary::Pow(2.0), &n[0]).is_ok());
    }

    #[test]
    fn remaining_elementaries_match_derivatives() {
        let a = 0.7;
        let x = lift_point(&[a], 2);
        let check = |f: Elementary, v: f64, d1: f64, d2: f64| {
            let j = elementary(f, &x[0]).unwrap();
            assert!(close(j.extract(&[0]).unwrap(), v, 1e-13), "{f:?}");
            assert!(close(j.extract(&[1]).unwrap(), d1, 1e-13), "{f:?}");
            assert!(close(j.extract(&[2]).unwrap(), d2, 1e-13), "{f:?}");
        };
        let t = a.tan();
        check(Elementary::Tan, t, 1.0 + t * t, 2.0 * t * (1.0 + t * t));
        check(
            Elementary::Atan,
            a.atan(),
            1.0 / (1.0 + a * a),
            -2.0 * a / (1.0 + a * a).powi(2),
        );
        check(Elementary::Sinh, a.sinh(), a.cosh(), a.sinh());
        check(Elementary::Cosh, a.cosh(), a.sinh(), a.cosh());
        check(Elementary::Ln, a.ln(), 1.0 / a, -1.0 / (a * a));
        check(Elementary::Cos, a.cos(), -a.sin(), -a.cos());
        check(
            Elementary::Pow(1.5),
            a.powf(1.5),
            1.5 * a.sqrt(),
            0.75 / a.sqrt(),
        );
        check(Elementary::Neg, -a, -1.0, 0.0);
    }

    #[test]
    fn derivative_and_compose() {
        let lay = Layout::new(2, 3);
        let x = Jet::lift(&lay, &[0.5, -0.2]);
        let f = x[0].clone() * &x[0] * &x[1];
        let fx = f.derivative(0);
        // ∂x (x² y) = 2xy
        assert!((fx.value() - 2.0 * 0.5 * -0.2).abs() < 1e-15);
        assert_eq!(fx.order(), 2);
        // compose with a scaling of the variables
        let lay1 = Layout::new(1, 3);
        let t = Jet::variable(&lay1, 0.0, 0);
        let g = f.compose(&[t.scale(2.0), t.scale(3.0)]);
        // f(0.5 + 2t, -0.2 + 3t) at t-derivative: ∂x f·2 + ∂y f·3
        let d = g.extract(&[1]).unwrap();
        assert!((d - (2.0 * 0.5 * -0.2 * 2.0 + 0.25 * 3.0)).abs() < 1e-14);
        let s = f.scale_vars(2.0);
        assert!((s.coeff(&[1, 0]) - 2.0 * f.coeff(&[1, 0])).abs() < 1e-15);
    }

    #[test]
    fn layout_is_graded() {
        let lay = Layout::new(2, 2);
        let order: Vec<&[u8]> = (0..lay.len()).map(|k| lay.multi_index(k)).collect();
        assert_eq!(
            order,
            vec![&[0u8, 0][..], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]
        );
        assert_eq!(lay.degree_of(4), 2);
        assert_eq!(jet_len(3, 4), 35);
    }
}
