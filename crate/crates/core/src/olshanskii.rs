//! Exact structure theory of `su(n,1)` over `ℚ(i)` and the invariant-cone
//! orderability test for `PU(2,1)` acting on `S³`.
//!
//! Coordinates on `h_Re = j·h` are taken in the basis `(jE₁, …, jEₙ)`. The
//! Killing form is normalized so that `Q(jE₁, jE₁) = 2`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::{rho_j, sphere_points, C64};
use crate::maps::{extract_hamiltonian, PathFamily};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

/// A Gaussian rational `re + i·im`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GaussRat {
    pub re: Rat,
    pub im: Rat,
}

impl GaussRat {
    pub fn new(re: Rat, im: Rat) -> Self {
        Self { re, im }
    }

    pub fn real(re: Rat) -> Self {
        Self { re, im: Rat::zero() }
    }

    pub fn zero() -> Self {
        Self::real(Rat::zero())
    }

    pub fn one() -> Self {
        Self::real(Rat::one())
    }

    pub fn i() -> Self {
        Self::new(Rat::zero(), Rat::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }
}

impl Add for GaussRat {
    type Output = GaussRat;
    fn add(self, o: GaussRat) -> GaussRat {
        GaussRat::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for GaussRat {
    type Output = GaussRat;
    fn sub(self, o: GaussRat) -> GaussRat {
        GaussRat::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for GaussRat {
    type Output = GaussRat;
    fn mul(self, o: GaussRat) -> GaussRat {
        GaussRat::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
}

impl Neg for GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat::new(-self.re, -self.im)
    }
}

/// Square matrix over `ℚ(i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussMatrix {
    pub n: usize,
    e: Vec<GaussRat>,
}

impl GaussMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, e: vec![GaussRat::zero(); n * n] }
    }

    pub fn get(&self, r: usize, c: usize) -> &GaussRat {
        &self.e[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: GaussRat) {
        self.e[r * self.n + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(GaussRat::is_zero)
    }

    pub fn mul(&self, o: &GaussMatrix) -> GaussMatrix {
        let n = self.n;
        let mut m = GaussMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = GaussRat::zero();
                for k in 0..n {
                    acc = acc + self.get(r, k).clone() * o.get(k, c).clone();
                }
                m.set(r, c, acc);
            }
        }
        m
    }

    pub fn add(&self, o: &GaussMatrix) -> GaussMatrix {
        GaussMatrix { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    pub fn sub(&self, o: &GaussMatrix) -> GaussMatrix {
        GaussMatrix { n: self.n, e: self.e.iter().zip(&o.e).map(|(a, b)| a.clone() - b.clone()).collect() }
    }

    pub fn scale(&self, s: &GaussRat) -> GaussMatrix {
        GaussMatrix { n: self.n, e: self.e.iter().map(|a| a.clone() * s.clone()).collect() }
    }

    pub fn adjoint(&self) -> GaussMatrix {
        let mut m = GaussMatrix::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                m.set(c, r, self.get(r, c).conj());
            }
        }
        m
    }

    pub fn trace(&self) -> GaussRat {
        (0..self.n).fold(GaussRat::zero(), |acc, k| acc + self.get(k, k).clone())
    }

    pub fn commutator(&self, o: &GaussMatrix) -> GaussMatrix {
        self.mul(o).sub(&o.mul(self))
    }
}

/// Matrix over `ℚ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    pub rows: usize,
    pub cols: usize,
    e: Vec<Rat>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, e: vec![Rat::zero(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
        Self { rows: r, cols: c, e: rows.into_iter().flatten().collect() }
    }

    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| rat(x)).collect()).collect())
    }

    pub fn get(&self, r: usize, c: usize) -> &Rat {
        &self.e[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        self.e[r * self.cols + c] = v;
    }

    pub fn mul(&self, o: &RationalMatrix) -> RationalMatrix {
        let mut m = RationalMatrix::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for c in 0..o.cols {
                let mut acc = Rat::zero();
                for k in 0..self.cols {
                    acc += self.get(r, k) * o.get(k, c);
                }
                m.set(r, c, acc);
            }
        }
        m
    }

    pub fn apply(&self, v: &[Rat]) -> Vec<Rat> {
        (0..self.rows).map(|r| (0..self.cols).fold(Rat::zero(), |acc, k| acc + self.get(r, k) * &v[k])).collect()
    }

    pub fn trace(&self) -> Rat {
        (0..self.rows.min(self.cols)).fold(Rat::zero(), |acc, k| acc + self.get(k, k))
    }

    pub fn scale(&self, s: &Rat) -> RationalMatrix {
        RationalMatrix { rows: self.rows, cols: self.cols, e: self.e.iter().map(|a| a * s).collect() }
    }

    /// Bilinear form `xᵀ M y`.
    pub fn form(&self, x: &[Rat], y: &[Rat]) -> Rat {
        dot(x, &self.apply(y))
    }

    /// Exact solution of `M x = b` by Gaussian elimination.
    pub fn solve(&self, b: &[Rat]) -> Result<Vec<Rat>> {
        let n = self.rows;
        if self.cols != n || b.len() != n {
            return arg("solve needs a square system");
        }
        let mut a: Vec<Vec<Rat>> = (0..n).map(|r| (0..n).map(|c| self.get(r, c).clone()).chain([b[r].clone()]).collect()).collect();
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or_else(|| Error::Degenerate("singular rational matrix".into()))?;
            a.swap(col, piv);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v = &*v / &p;
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    let pivot = a[col].clone();
                    for (x, y) in a[r].iter_mut().zip(&pivot).skip(col) {
                        *x -= &f * y;
                    }
                }
            }
        }
        Ok(a.into_iter().map(|row| row[n].clone()).collect())
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c).to_string()).collect()).collect()
    }
}

fn dot(x: &[Rat], y: &[Rat]) -> Rat {
    x.iter().zip(y).fold(Rat::zero(), |acc, (a, b)| acc + a * b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    /// Skew-Hermitian, in `t`.
    Compact,
    /// Hermitian, in `p`.
    NonCompact,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisElement {
    pub name: String,
    pub matrix: GaussMatrix,
    pub part: Part,
}

/// Hook for the unitary Lie algebras `su(n,1)`.
///
/// The basis must list the Cartan elements first, followed by real pairs
/// `(B, B̃)` spanning `ad(h)`-invariant planes.
pub trait UnitaryLieAlgebra {
    fn n(&self) -> usize;
    fn basis(&self) -> Vec<BasisElement>;
    fn cartan_dim(&self) -> usize;
    /// Real coordinates of `x` in the basis, or `None` if `x` is outside the algebra.
    fn coordinates(&self, x: &GaussMatrix) -> Option<Vec<Rat>>;
}

/// `su(n,1)`: traceless `A` with `A*I + IA = 0`, `I = diag(1, …, 1, −1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuN1 {
    pub n: usize,
}

fn unit(n: usize, entries: &[(usize, usize, GaussRat)]) -> GaussMatrix {
    let mut m = GaussMatrix::zeros(n);
    for (r, c, v) in entries {
        m.set(*r, *c, v.clone());
    }
    m
}

impl SuN1 {
    pub fn indefinite_form(&self) -> GaussMatrix {
        let d = self.n + 1;
        let mut m = GaussMatrix::zeros(d);
        for k in 0..d {
            m.set(k, k, GaussRat::real(rat(if k < self.n { 1 } else { -1 })));
        }
        m
    }

    pub fn contains(&self, x: &GaussMatrix) -> bool {
        let i = self.indefinite_form();
        x.n == self.n + 1 && x.trace().is_zero() && x.adjoint().mul(&i).add(&i.mul(x)).is_zero()
    }
}

impl UnitaryLieAlgebra for SuN1 {
    fn n(&self) -> usize {
        self.n
    }

    fn cartan_dim(&self) -> usize {
        self.n
    }

    fn basis(&self) -> Vec<BasisElement> {
        let (n, d) = (self.n, self.n + 1);
        let one = GaussRat::one();
        let i = GaussRat::i();
        let mut out = Vec::new();
        for k in 0..n {
            out.push(BasisElement { name: format!("E{}", k + 1), matrix: unit(d, &[(k, k, i.clone()), (n, n, -i.clone())]), part: Part::Compact });
        }
        for j in 0..n {
            for k in j + 1..n {
                let suffix = if n == 2 { String::new() } else { format!("{}{}", j + 1, k + 1) };
                out.push(BasisElement { name: format!("F{suffix}"), matrix: unit(d, &[(j, k, one.clone()), (k, j, -one.clone())]), part: Part::Compact });
                out.push(BasisElement { name: format!("F~{suffix}"), matrix: unit(d, &[(j, k, i.clone()), (k, j, i.clone())]), part: Part::Compact });
            }
        }
        for k in 0..n {
            out.push(BasisElement { name: format!("G{}", k + 1), matrix: unit(d, &[(k, n, one.clone()), (n, k, one.clone())]), part: Part::NonCompact });
            out.push(BasisElement { name: format!("G~{}", k + 1), matrix: unit(d, &[(k, n, i.clone()), (n, k, -i.clone())]), part: Part::NonCompact });
        }
        out
    }

    fn coordinates(&self, x: &GaussMatrix) -> Option<Vec<Rat>> {
        let n = self.n;
        if x.n != n + 1 {
            return None;
        }
        let mut c: Vec<Rat> = (0..n).map(|k| x.get(k, k).im.clone()).collect();
        for j in 0..n {
            for k in j + 1..n {
                c.push(x.get(j, k).re.clone());
                c.push(x.get(j, k).im.clone());
            }
        }
        for k in 0..n {
            c.push(x.get(k, n).re.clone());
            c.push(x.get(k, n).im.clone());
        }
        let rebuilt = self.basis().iter().zip(&c).fold(GaussMatrix::zeros(n + 1), |acc, (b, v)| acc.add(&b.matrix.scale(&GaussRat::real(v.clone()))));
        (rebuilt == *x).then_some(c)
    }
}

/// Basis, `ad` of the Cartan elements and the Killing form on `h_Re`.
#[derive(Clone, Debug)]
pub struct Structure {
    pub algebra: SuN1,
    pub basis: Vec<BasisElement>,
    /// `ad(E_k)` in the basis, one per Cartan element.
    pub ad: Vec<RationalMatrix>,
    /// `B(jE_k, jE_l) = −tr(ad E_k ad E_l)`.
    pub killing_raw: RationalMatrix,
    /// Positive scalar with `killing_raw = scale · q`.
    pub scale: Rat,
    pub q: RationalMatrix,
}

pub fn ad_matrix(alg: &SuN1, basis: &[BasisElement], x: &GaussMatrix) -> Result<RationalMatrix> {
    let dim = basis.len();
    let mut m = RationalMatrix::zeros(dim, dim);
    for (c, b) in basis.iter().enumerate() {
        let coords = alg.coordinates(&x.commutator(&b.matrix)).ok_or_else(|| Error::Numerical("commutator left the algebra".into()))?;
        for (r, v) in coords.into_iter().enumerate() {
            m.set(r, c, v);
        }
    }
    Ok(m)
}

pub fn structure(alg: SuN1) -> Result<Structure> {
    if alg.n < 2 {
        return arg("su(n,1) structure needs n >= 2");
    }
    let basis = alg.basis();
    let h = alg.cartan_dim();
    let ad: Vec<RationalMatrix> = basis[..h].iter().map(|b| ad_matrix(&alg, &basis, &b.matrix)).collect::<Result<_>>()?;
    let mut killing_raw = RationalMatrix::zeros(h, h);
    for k in 0..h {
        for l in 0..h {
            killing_raw.set(k, l, -ad[k].mul(&ad[l]).trace());
        }
    }
    let scale = killing_raw.get(0, 0) / rat(2);
    if !scale.is_positive() {
        return Err(Error::Numerical("Killing form is not positive on h_Re".into()));
    }
    let q = killing_raw.scale(&(Rat::one() / &scale));
    Ok(Structure { algebra: alg, basis, ad, killing_raw, scale, q })
}

pub fn su21_structure() -> Structure {
    structure(SuN1 { n: 2 }).expect("su(2,1) structure is exact")
}

/// The real Jordan block `J = [[0, −1], [1, 0]]` scaled by `c`.
fn block_coefficient(ad: &RationalMatrix, i: usize) -> Result<Rat> {
    let c = ad.get(i + 1, i).clone();
    let expected = [(i, i, Rat::zero()), (i + 1, i + 1, Rat::zero()), (i, i + 1, -c.clone())];
    if expected.iter().any(|(r, k, v)| ad.get(*r, *k) != v) {
        return Err(Error::Numerical(format!("ad(h) is not a rotation on the plane at {i}")));
    }
    for r in 0..ad.rows {
        if r != i && r != i + 1 && (!ad.get(r, i).is_zero() || !ad.get(r, i + 1).is_zero()) {
            return Err(Error::Numerical(format!("plane at {i} is not ad(h)-invariant")));
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Root {
    /// Values on `(jE₁, …, jEₙ)`.
    pub functional: Vec<Rat>,
    /// Killing-dual vector in `h_Re`.
    pub vector: Vec<Rat>,
    pub part: Part,
    pub positive: bool,
    /// Root vector in `g_ℂ ≅ sl(n+1, ℂ)`.
    pub eigenvector: GaussMatrix,
    pub plane: (String, String),
}

fn lex_positive(v: &[Rat]) -> bool {
    v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_positive())
}

/// Roots by exact diagonalization of `ad(h)` over `ℚ(i)`, each verified by `[jE_k, V] = λ_k V`.
pub fn root_system(s: &Structure) -> Result<Vec<Root>> {
    let h = s.algebra.cartan_dim();
    let mut roots = Vec::new();
    let mut i = h;
    while i + 1 < s.basis.len() {
        let c: Vec<Rat> = s.ad.iter().map(|a| block_coefficient(a, i)).collect::<Result<_>>()?;
        let (b, bt) = (&s.basis[i], &s.basis[i + 1]);
        for sign in [1i64, -1] {
            // V = B − sign·i·B̃ satisfies ad(E)V = sign·i·c(E)·V, so ad(jE)V = −sign·c(E)·V.
            let v = b.matrix.sub(&bt.matrix.scale(&GaussRat::new(Rat::zero(), rat(sign))));
            let functional: Vec<Rat> = c.iter().map(|x| x * rat(-sign)).collect();
            for (k, e) in s.basis[..h].iter().enumerate() {
                let je = e.matrix.scale(&GaussRat::i());
                if je.commutator(&v) != v.scale(&GaussRat::real(functional[k].clone())) {
                    return Err(Error::Numerical(format!("root vector check failed on plane {}", b.name)));
                }
            }
            let vector = s.q.solve(&functional)?;
            roots.push(Root { positive: lex_positive(&vector), functional, vector, part: b.part, eigenvector: v, plane: (b.name.clone(), bt.name.clone()) });
        }
        i += 2;
    }
    Ok(roots)
}

/// A pointed cone in `ℚ²` by generators and equivalent inequalities `nᵢ·x ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalCone2 {
    pub generators: [[Rat; 2]; 2],
    pub normals: [[Rat; 2]; 2],
}

fn cross(a: &[Rat; 2], b: &[Rat; 2]) -> Rat {
    &a[0] * &b[1] - &a[1] * &b[0]
}

fn dot2(a: &[Rat; 2], b: &[Rat; 2]) -> Rat {
    &a[0] * &b[0] + &a[1] * &b[1]
}

fn perp(v: &[Rat; 2]) -> [Rat; 2] {
    [-v[1].clone(), v[0].clone()]
}

fn neg2(v: &[Rat; 2]) -> [Rat; 2] {
    [-v[0].clone(), -v[1].clone()]
}

fn is_zero2(v: &[Rat; 2]) -> bool {
    v[0].is_zero() && v[1].is_zero()
}

fn same_ray(a: &[Rat; 2], b: &[Rat; 2]) -> bool {
    cross(a, b).is_zero() && dot2(a, b).is_positive()
}

pub fn vec2(v: &[Rat]) -> [Rat; 2] {
    [v[0].clone(), v[1].clone()]
}

impl RationalCone2 {
    pub fn from_generators(g1: [Rat; 2], g2: [Rat; 2]) -> Result<Self> {
        if is_zero2(&g1) || is_zero2(&g2) {
            return Err(Error::Degenerate("cone generator is zero".into()));
        }
        if cross(&g1, &g2).is_zero() {
            return Err(Error::Degenerate("cone generators are collinear (ray or half-plane)".into()));
        }
        let orient = |g: &[Rat; 2], other: &[Rat; 2]| {
            let p = perp(g);
            if dot2(&p, other).is_positive() {
                p
            } else {
                neg2(&p)
            }
        };
        let normals = [orient(&g1, &g2), orient(&g2, &g1)];
        Ok(Self { generators: [g1, g2], normals })
    }

    /// `{x : n₁·x ≥ 0, n₂·x ≥ 0}`, cross-checked against the generator form.
    pub fn from_inequalities(n1: [Rat; 2], n2: [Rat; 2]) -> Result<Self> {
        if is_zero2(&n1) || is_zero2(&n2) || cross(&n1, &n2).is_zero() {
            return Err(Error::Degenerate("inequalities do not cut out a pointed cone".into()));
        }
        let on_boundary = |n: &[Rat; 2], other: &[Rat; 2]| {
            let p = perp(n);
            if dot2(other, &p).is_positive() {
                p
            } else {
                neg2(&p)
            }
        };
        let cone = Self::from_generators(on_boundary(&n1, &n2), on_boundary(&n2, &n1))?;
        let consistent = (same_ray(&cone.normals[0], &n1) && same_ray(&cone.normals[1], &n2)) || (same_ray(&cone.normals[0], &n2) && same_ray(&cone.normals[1], &n1));
        if !consistent {
            return Err(Error::Numerical("generator and inequality forms disagree".into()));
        }
        Ok(cone)
    }

    /// Smallest cone containing the vectors; errors unless it is pointed.
    pub fn hull(vectors: &[[Rat; 2]]) -> Result<Self> {
        let vs: Vec<&[Rat; 2]> = vectors.iter().filter(|v| !is_zero2(v)).collect();
        for a in &vs {
            for b in &vs {
                if cross(a, b).is_positive() && vs.iter().all(|w| !cross(a, w).is_negative() && !cross(w, b).is_negative()) {
                    return Self::from_generators((*a).clone(), (*b).clone());
                }
            }
        }
        Err(Error::Degenerate("vectors do not span a pointed two-dimensional cone".into()))
    }

    pub fn contains(&self, x: &[Rat; 2]) -> bool {
        self.normals.iter().all(|n| !dot2(n, x).is_negative())
    }

    pub fn contains_cone(&self, other: &RationalCone2) -> bool {
        other.generators.iter().all(|g| self.contains(g))
    }

    pub fn same_cone(&self, other: &RationalCone2) -> bool {
        self.contains_cone(other) && other.contains_cone(self)
    }

    pub fn negated(&self) -> RationalCone2 {
        RationalCone2 { generators: [neg2(&self.generators[0]), neg2(&self.generators[1])], normals: [neg2(&self.normals[0]), neg2(&self.normals[1])] }
    }

    pub fn generator_strings(&self) -> Vec<[String; 2]> {
        self.generators.iter().map(|g| [g[0].to_string(), g[1].to_string()]).collect()
    }
}

fn check_positive_definite(q: &RationalMatrix) -> Result<()> {
    if q.rows != 2 || q.cols != 2 || q.get(0, 1) != q.get(1, 0) {
        return arg("form must be a symmetric 2x2 matrix");
    }
    let det = q.get(0, 0) * q.get(1, 1) - q.get(0, 1) * q.get(1, 0);
    if !q.get(0, 0).is_positive() || !det.is_positive() {
        return arg("form must be positive definite");
    }
    Ok(())
}

/// `{y : Q(x, y) ≥ 0 ∀ x ∈ cone}`.
pub fn dual_cone(cone: &RationalCone2, q: &RationalMatrix) -> Result<RationalCone2> {
    check_positive_definite(q)?;
    let n = |g: &[Rat; 2]| vec2(&q.apply(g));
    RationalCone2::from_inequalities(n(&cone.generators[0]), n(&cone.generators[1]))
}

/// Intermediate data of the `c₀` construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct C0Construction {
    pub orthogonal_subsystem: Vec<usize>,
    pub h1: [Rat; 2],
    pub z: [Rat; 2],
    pub h0: [Rat; 2],
    pub weyl_orbit: Vec<[Rat; 2]>,
    pub c_min: RationalCone2,
    pub c1: RationalCone2,
    pub c0: RationalCone2,
}

fn reflect(x: &[Rat; 2], r: &[Rat; 2], q: &RationalMatrix) -> [Rat; 2] {
    let f = rat(2) * q.form(x, r) / q.form(r, r);
    [&x[0] - &f * &r[0], &x[1] - &f * &r[1]]
}

/// Steps 1–3: `H₁`, `Z`, `H₀ = Z − H₁`, `c₁ = cone(W·H₀ ∪ c_min)` and `c₀ = c₁^∨`.
pub fn build_c0(s: &Structure, roots: &[Root]) -> Result<C0Construction> {
    if s.algebra.cartan_dim() != 2 {
        return arg("cone construction is implemented for rank two");
    }
    let q = &s.q;
    let pos_nc: Vec<usize> = (0..roots.len()).filter(|&k| roots[k].positive && roots[k].part == Part::NonCompact).collect();
    let mut subsystem: Vec<usize> = Vec::new();
    for &k in &pos_nc {
        if subsystem.iter().all(|&j| q.form(&roots[j].vector, &roots[k].vector).is_zero()) {
            subsystem.push(k);
        }
    }
    let mut h1 = [Rat::zero(), Rat::zero()];
    for &k in &subsystem {
        let a = vec2(&roots[k].vector);
        let sc = rat(2) / q.form(&a, &a);
        h1 = [&h1[0] + &sc * &a[0], &h1[1] + &sc * &a[1]];
    }
    // j·ζ is the common kernel of the compact roots.
    let compact: Vec<&Root> = roots.iter().filter(|r| r.positive && r.part == Part::Compact).collect();
    let dir = match compact.first() {
        Some(r) => [-r.functional[1].clone(), r.functional[0].clone()],
        None => return Err(Error::Degenerate("no compact roots; centre of t is all of h".into())),
    };
    if compact.iter().any(|r| !dot2(&vec2(&r.functional), &dir).is_zero()) {
        return Err(Error::Degenerate("centre of t is trivial".into()));
    }
    let first = vec2(&roots[pos_nc[0]].vector);
    let zs = rat(2) / q.form(&first, &dir);
    let z = [&zs * &dir[0], &zs * &dir[1]];
    if pos_nc.iter().any(|&k| q.form(&roots[k].vector, &z) != rat(2)) {
        return Err(Error::Precondition("no Z in j·zeta pairs to 2 with every positive non-compact root".into()));
    }
    let h0 = [&z[0] - &h1[0], &z[1] - &h1[1]];
    let mut orbit = vec![h0.clone()];
    let mut k = 0;
    while k < orbit.len() {
        for r in &compact {
            let y = reflect(&orbit[k], &vec2(&r.vector), q);
            if !orbit.contains(&y) {
                orbit.push(y);
            }
        }
        k += 1;
    }
    let c_min = RationalCone2::hull(&pos_nc.iter().map(|&k| vec2(&roots[k].vector)).collect::<Vec<_>>())?;
    let mut span = orbit.clone();
    span.extend(c_min.generators.iter().cloned());
    let c1 = RationalCone2::hull(&span)?;
    let c0 = dual_cone(&c1, q)?;
    if !dual_cone(&c0, q)?.same_cone(&c1) {
        return Err(Error::Numerical("cone duality is not involutive".into()));
    }
    Ok(C0Construction { orthogonal_subsystem: subsystem, h1, z, h0, weyl_orbit: orbit, c_min, c1, c0 })
}

/// `C ∩ h = {2a + b ≥ 0, a + 2b ≥ 0}`.
pub fn contact_cone_su21() -> RationalCone2 {
    RationalCone2::from_inequalities([rat(2), rat(1)], [rat(1), rat(2)]).expect("pointed cone")
}

/// Angular rates on `z_k = u_k/u_{n+1}` of the flow of each Cartan element.
/// Row `k` gives `(rate of z_k under E₁, …, under Eₙ)`.
pub fn projected_rates(s: &Structure) -> Vec<Vec<Rat>> {
    let n = s.algebra.n;
    (0..n).map(|k| s.basis[..n].iter().map(|e| &e.matrix.get(k, k).im - &e.matrix.get(n, n).im).collect()).collect()
}

/// `C ∩ h` read off from the flows: `β(X) ≥ 0` on `S³` iff every rate is non-negative.
pub fn contact_cone_from_flow(s: &Structure) -> Result<RationalCone2> {
    if s.algebra.n != 2 {
        return arg("contact cone derivation is implemented for n = 2");
    }
    let r = projected_rates(s);
    RationalCone2::from_inequalities(vec2(&r[0]), vec2(&r[1]))
}

/// Largest deviation on `S³` between the extracted Hamiltonian of the flow of
/// `aE₁ + bE₂` and `[(2a+b)ρ₁ + (a+2b)ρ₂]/(2π)`.
pub fn flow_hamiltonian_deviation(a: f64, b: f64, samples: usize, seed: u64) -> f64 {
    let s = su21_structure();
    let r = projected_rates(&s);
    let rate = |k: usize| a * r[k][0].to_f64().unwrap_or(f64::NAN) + b * r[k][1].to_f64().unwrap_or(f64::NAN);
    let (w1, w2) = (rate(0), rate(1));
    let rot = move |t: f64, z: &[C64]| vec![z[0] * C64::from_polar(1.0, w1 * t), z[1] * C64::from_polar(1.0, w2 * t)];
    let flow = PathFamily::new("pu21-cartan", 2, rot).with_inverse(move |t, z| rot(-t, z));
    let h = extract_hamiltonian(&flow);
    sphere_points(4, samples, seed)
        .iter()
        .map(|x| {
            let z = [C64::new(x[0], x[2]), C64::new(x[1], x[3])];
            let exact = ((2.0 * a + b) * rho_j(&z, 0) + (a + 2.0 * b) * rho_j(&z, 1)) / (2.0 * PI);
            (h.eval(&z, 0.37) - exact).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderVerdict {
    OrderCompatible,
    NonOrderable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictReport {
    pub verdict: OrderVerdict,
    pub in_plus_c0: bool,
    pub in_minus_c0: bool,
    /// A generator of the contact cone outside `c₀`.
    pub witness: Option<[Rat; 2]>,
}

pub fn orderability_verdict_with(contact: &RationalCone2, c0: &RationalCone2) -> VerdictReport {
    let plus = c0.contains_cone(contact);
    let minus = c0.negated().contains_cone(contact);
    let witness = contact.generators.iter().find(|g| !c0.contains(g)).cloned();
    let verdict = if plus || minus { OrderVerdict::OrderCompatible } else { OrderVerdict::NonOrderable };
    VerdictReport { verdict, in_plus_c0: plus, in_minus_c0: minus, witness }
}

/// Tests `contact ⊂ ±c₀` for the `c₀` of `su(2,1)`.
pub fn orderability_verdict(contact: &RationalCone2) -> Result<VerdictReport> {
    let s = su21_structure();
    let roots = root_system(&s)?;
    let c = build_c0(&s, &roots)?;
    Ok(orderability_verdict_with(contact, &c.c0))
}

/// Serializable summary with rationals rendered as `p/q` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlshanskiiReport {
    pub killing: Vec<Vec<String>>,
    pub killing_scale: String,
    pub roots: Vec<RootSummary>,
    pub h1: [String; 2],
    pub z: [String; 2],
    pub h0: [String; 2],
    pub c_min: Vec<[String; 2]>,
    pub c1: Vec<[String; 2]>,
    pub c0: Vec<[String; 2]>,
    pub c0_equals_c_min: bool,
    pub contact_cone: Vec<[String; 2]>,
    pub contact_cone_matches_flow: bool,
    pub verdict: OrderVerdict,
    pub witness: Option<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSummary {
    pub vector: [String; 2],
    pub positive: bool,
    pub part: Part,
}

fn s2(v: &[Rat; 2]) -> [String; 2] {
    [v[0].to_string(), v[1].to_string()]
}

pub fn olshanskii_report() -> Result<OlshanskiiReport> {
    let s = su21_structure();
    let roots = root_system(&s)?;
    let c = build_c0(&s, &roots)?;
    let contact = contact_cone_su21();
    let v = orderability_verdict_with(&contact, &c.c0);
    let mut set = BTreeSet::new();
    let root_summaries = roots
        .iter()
        .filter(|r| set.insert(r.vector.clone()))
        .map(|r| RootSummary { vector: s2(&vec2(&r.vector)), positive: r.positive, part: r.part })
        .collect();
    Ok(OlshanskiiReport {
        killing: s.q.to_strings(),
        killing_scale: s.scale.to_string(),
        roots: root_summaries,
        h1: s2(&c.h1),
        z: s2(&c.z),
        h0: s2(&c.h0),
        c_min: c.c_min.generator_strings(),
        c1: c.c1.generator_strings(),
        c0: c.c0.generator_strings(),
        c0_equals_c_min: c.c0.same_cone(&c.c_min),
        contact_cone: contact.generator_strings(),
        contact_cone_matches_flow: contact_cone_from_flow(&s)?.same_cone(&contact),
        verdict: v.verdict,
        witness: v.witness.as_ref().map(s2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r2(a: i64, b: i64) -> [Rat; 2] {
        [rat(a), rat(b)]
    }

    #[test]
    fn basis_membership() {
        let alg = SuN1 { n: 2 };
        let basis = alg.basis();
        assert_eq!(basis.iter().map(|b| b.name.as_str()).collect::<Vec<_>>(), ["E1", "E2", "F", "F~", "G1", "G~1", "G2", "G~2"]);
        for b in &basis {
            assert!(alg.contains(&b.matrix), "{}", b.name);
        }
        assert!(!alg.contains(&GaussMatrix::zeros(3).add(&unit(3, &[(0, 1, GaussRat::one())]))));
    }

    #[test]
    fn ad_blocks() {
        let s = su21_structure();
        let j = |c: i64| RationalMatrix::from_ints(&[&[0, -c], &[c, 0]]);
        let block = |m: &RationalMatrix, i: usize| RationalMatrix::from_rows(vec![vec![m.get(i, i).clone(), m.get(i, i + 1).clone()], vec![m.get(i + 1, i).clone(), m.get(i + 1, i + 1).clone()]]);
        for (k, coeffs) in [(0, [1, 2, 1]), (1, [-1, 1, 2])] {
            for (b, c) in [2, 4, 6].iter().zip(coeffs) {
                assert_eq!(block(&s.ad[k], *b), j(c));
            }
        }
        // [E₁, F] = F̃.
        let e1 = &s.basis[0].matrix;
        assert_eq!(e1.commutator(&s.basis[2].matrix), s.basis[3].matrix);
    }

    #[test]
    fn killing_normalization() {
        let s = su21_structure();
        assert_eq!(s.q, RationalMatrix::from_ints(&[&[2, 1], &[1, 2]]));
        assert_eq!(s.scale, rat(6));
    }

    #[test]
    fn roots_and_parts() {
        let s = su21_structure();
        let roots = root_system(&s).unwrap();
        assert_eq!(roots.len(), 6);
        let find = |v: [Rat; 2]| roots.iter().find(|r| vec2(&r.vector) == v).unwrap();
        for (v, part) in [(r2(1, -1), Part::Compact), (r2(1, 0), Part::NonCompact), (r2(0, 1), Part::NonCompact)] {
            assert!(find(v.clone()).positive);
            assert_eq!(find(v.clone()).part, part);
            assert!(!find(neg2(&v)).positive);
        }
    }

    #[test]
    fn c0_construction() {
        let s = su21_structure();
        let c = build_c0(&s, &root_system(&s).unwrap()).unwrap();
        assert_eq!(c.h1, r2(1, 0));
        assert_eq!(c.z, [ratio(2, 3), ratio(2, 3)]);
        assert_eq!(c.h0, [ratio(-1, 3), ratio(2, 3)]);
        assert!(c.c1.same_cone(&RationalCone2::from_generators([ratio(-1, 3), ratio(2, 3)], [ratio(2, 3), ratio(-1, 3)]).unwrap()));
        assert!(c.c0.same_cone(&c.c_min));
        assert!(c.c_min.same_cone(&RationalCone2::from_generators(r2(1, 0), r2(0, 1)).unwrap()));
    }

    #[test]
    fn dual_examples() {
        let q = RationalMatrix::from_ints(&[&[2, 1], &[1, 2]]);
        let quad = RationalCone2::from_generators(r2(1, 0), r2(0, 1)).unwrap();
        let d = dual_cone(&quad, &q).unwrap();
        let g = [ratio(-1, 3), ratio(2, 3)];
        assert!(d.contains(&g));
        assert_eq!(q.form(&g, &r2(1, 0)), rat(0));
        assert_eq!(q.form(&g, &r2(0, 1)), rat(1));
        assert!(dual_cone(&d, &q).unwrap().same_cone(&quad));
        assert!(RationalCone2::from_generators(r2(0, 1), r2(0, -1)).is_err());
        assert!(dual_cone(&quad, &RationalMatrix::from_ints(&[&[1, 2], &[2, 1]])).is_err());
    }

    #[test]
    fn verdicts() {
        let c = contact_cone_su21();
        let v = orderability_verdict(&c).unwrap();
        assert_eq!(v.verdict, OrderVerdict::NonOrderable);
        let w = [rat(1), ratio(-1, 2)];
        assert!(c.contains(&w));
        assert!(!RationalCone2::from_generators(r2(1, 0), r2(0, 1)).unwrap().contains(&w));
        let quad = RationalCone2::from_generators(r2(1, 0), r2(0, 1)).unwrap();
        assert_eq!(orderability_verdict(&quad).unwrap().verdict, OrderVerdict::OrderCompatible);
        assert_eq!(orderability_verdict(&quad.negated()).unwrap().verdict, OrderVerdict::OrderCompatible);
        assert!(contact_cone_from_flow(&su21_structure()).unwrap().same_cone(&c));
    }

    #[test]
    fn flow_cross_check() {
        for (a, b) in [(0.3, -0.1), (-0.2, 0.45), (0.5, 0.5)] {
            assert!(flow_hamiltonian_deviation(a, b, 200, 3) < 1e-10);
        }
    }

    #[test]
    fn su31_hook() {
        let alg = SuN1 { n: 3 };
        assert!(alg.basis().iter().all(|b| alg.contains(&b.matrix)));
        assert_eq!(alg.basis().len(), 15);
        let s = structure(alg).unwrap();
        assert_eq!(root_system(&s).unwrap().len(), 12);
        assert!(build_c0(&s, &root_system(&s).unwrap()).is_err());
    }

    #[test]
    fn report_is_complete() {
        let r = olshanskii_report().unwrap();
        assert_eq!(r.verdict, OrderVerdict::NonOrderable);
        assert!(r.c0_equals_c_min && r.contact_cone_matches_flow);
        assert_eq!(r.roots.len(), 6);
        assert_eq!(r.z, ["2/3".to_string(), "2/3".to_string()]);
    }
}
