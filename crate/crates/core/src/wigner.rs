//! Angular-momentum recoupling coefficients.
//!
//! Quantum numbers are carried as [`Spin`], which stores twice the value so
//! half-integers stay exact. Both coefficients use Racah's closed-form sums,
//! evaluated in `f64` with a precomputed factorial table; the arguments that
//! occur for alkali hyperfine structure keep every factorial below 30!.

use std::fmt;

/// An angular-momentum quantum number (integer or half-integer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Spin(u32);

impl Spin {
    pub const fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub const fn integer(n: u32) -> Self {
        Spin(2 * n)
    }

    /// Parses a value such as `1.5`; fails unless it is a non-negative multiple of 1/2.
    pub fn from_f64(value: f64) -> Option<Self> {
        let twice = 2.0 * value;
        if value >= 0.0 && (twice - twice.round()).abs() < 1e-9 {
            Some(Spin(twice.round() as u32))
        } else {
            None
        }
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// 2j + 1.
    pub const fn multiplicity(self) -> u32 {
        self.0 + 1
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// All j' from |a - b| to a + b in unit steps.
    pub fn couple(a: Spin, b: Spin) -> impl Iterator<Item = Spin> {
        let lo = a.0.abs_diff(b.0);
        let hi = a.0 + b.0;
        (lo..=hi).step_by(2).map(Spin)
    }

    /// Projections m = -j, -j+1, ..., j, as doubled signed integers.
    pub fn projections(self) -> impl Iterator<Item = i32> {
        let j = self.0 as i32;
        (-j..=j).step_by(2)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

const FACT_LEN: usize = 64;

fn factorial(n: i32) -> f64 {
    static TABLE: std::sync::OnceLock<[f64; FACT_LEN]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [1.0; FACT_LEN];
        for i in 1..FACT_LEN {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });
    assert!(
        (0..FACT_LEN as i32).contains(&n),
        "factorial argument {n} out of table range"
    );
    table[n as usize]
}

/// Half of a doubled sum, which must be even.
fn half(twice: i32) -> i32 {
    debug_assert!(twice % 2 == 0);
    twice / 2
}

fn triangle_ok(a: u32, b: u32, c: u32) -> bool {
    c >= a.abs_diff(b) && c <= a + b && (a + b + c) % 2 == 0
}

/// Δ(abc) with doubled arguments.
fn triangle_coeff(a: i32, b: i32, c: i32) -> f64 {
    (factorial(half(a + b - c)) * factorial(half(a - b + c)) * factorial(half(-a + b + c))
        / factorial(half(a + b + c) + 1))
    .sqrt()
}

/// Wigner 6-j symbol {j1 j2 j3; j4 j5 j6}.
pub fn six_j(j1: Spin, j2: Spin, j3: Spin, j4: Spin, j5: Spin, j6: Spin) -> f64 {
    let [a, b, c, d, e, f] = [j1, j2, j3, j4, j5, j6].map(|s| s.0);
    if !(triangle_ok(a, b, c) && triangle_ok(a, e, f) && triangle_ok(d, b, f) && triangle_ok(d, e, c))
    {
        return 0.0;
    }
    let [a, b, c, d, e, f] = [a, b, c, d, e, f].map(|x| x as i32);
    let prefactor = triangle_coeff(a, b, c)
        * triangle_coeff(a, e, f)
        * triangle_coeff(d, b, f)
        * triangle_coeff(d, e, c);
    let alphas = [
        half(a + b + c),
        half(a + e + f),
        half(d + b + f),
        half(d + e + c),
    ];
    let betas = [half(a + b + d + e), half(b + c + e + f), half(c + a + f + d)];
    let t_min = *alphas.iter().max().unwrap();
    let t_max = *betas.iter().min().unwrap();
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        let denom: f64 = alphas.iter().map(|&al| factorial(t - al)).product::<f64>()
            * betas.iter().map(|&be| factorial(be - t)).product::<f64>();
        sum += sign * factorial(t + 1) / denom;
    }
    prefactor * sum
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m>. Projections are doubled.
pub fn clebsch_gordan(j1: Spin, m1: i32, j2: Spin, m2: i32, j: Spin, m: i32) -> f64 {
    let (tj1, tj2, tj) = (j1.0 as i32, j2.0 as i32, j.0 as i32);
    let projection_ok = |tj: i32, tm: i32| tm.abs() <= tj && (tj + tm) % 2 == 0;
    if m1 + m2 != m
        || !projection_ok(tj1, m1)
        || !projection_ok(tj2, m2)
        || !projection_ok(tj, m)
        || !triangle_ok(j1.0, j2.0, j.0)
    {
        return 0.0;
    }
    let norm = (f64::from(j.multiplicity()) * factorial(half(tj + tj1 - tj2))
        * factorial(half(tj - tj1 + tj2))
        * factorial(half(tj1 + tj2 - tj))
        / factorial(half(tj1 + tj2 + tj) + 1))
    .sqrt();
    let proj = (factorial(half(tj + m))
        * factorial(half(tj - m))
        * factorial(half(tj1 - m1))
        * factorial(half(tj1 + m1))
        * factorial(half(tj2 - m2))
        * factorial(half(tj2 + m2)))
    .sqrt();
    let args = |k: i32| {
        [
            k,
            half(tj1 + tj2 - tj) - k,
            half(tj1 - m1) - k,
            half(tj2 + m2) - k,
            half(tj - tj2 + m1) + k,
            half(tj - tj1 - m2) + k,
        ]
    };
    let mut sum = 0.0;
    for k in 0..=half(tj1 + tj2 - tj) {
        let a = args(k);
        if a.iter().any(|&x| x < 0) {
            continue;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / a.iter().map(|&x| factorial(x)).product::<f64>();
    }
    norm * proj * sum
}
