//! Brute-force line strengths from explicitly coupled Zeeman sublevels. The
//! coupled states are built numerically with lowering operators and
//! Gram-Schmidt, so nothing is shared with the 6-j evaluation.

use std::collections::HashMap;

/// Coupled states |J M> of j1 (x) j2, keyed by doubled (J, M), as coefficient
/// maps over doubled (m1, m2).
pub type Coupled = HashMap<(i32, i32), HashMap<(i32, i32), f64>>;

fn jm(j: i32, m: i32) -> f64 {
    // <j m-1| J- |j m> with doubled arguments
    let (j, m) = (f64::from(j) / 2.0, f64::from(m) / 2.0);
    (j * (j + 1.0) - m * (m - 1.0)).sqrt()
}

pub fn couple(j1: i32, j2: i32) -> Coupled {
    let mut out: Coupled = HashMap::new();
    let mut big_j = j1 + j2;
    while big_j >= (j1 - j2).abs() {
        // top state: orthogonal to all higher-J states with the same M
        let mut top: HashMap<(i32, i32), f64> = HashMap::new();
        let basis: Vec<(i32, i32)> = (-j1..=j1)
            .step_by(2)
            .flat_map(|m1| (-j2..=j2).step_by(2).map(move |m2| (m1, m2)))
            .filter(|(m1, m2)| m1 + m2 == big_j)
            .collect();
        for seed in &basis {
            let mut v: HashMap<(i32, i32), f64> = basis.iter().map(|b| (*b, if b == seed { 1.0 } else { 0.0 })).collect();
            for (_, other) in out.iter().filter(|(key, _)| key.1 == big_j) {
                let dot: f64 = v.iter().map(|(k, x)| x * other.get(k).copied().unwrap_or(0.0)).sum();
                for (k, x) in other {
                    *v.entry(*k).or_insert(0.0) -= dot * x;
                }
            }
            let norm: f64 = v.values().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                top = v.into_iter().map(|(k, x)| (k, x / norm)).collect();
                break;
            }
        }
        out.insert((big_j, big_j), top.clone());
        let mut state = top;
        let mut m = big_j;
        while m > -big_j {
            let mut lowered: HashMap<(i32, i32), f64> = HashMap::new();
            for (&(m1, m2), &c) in &state {
                if m1 > -j1 {
                    *lowered.entry((m1 - 2, m2)).or_insert(0.0) += c * jm(j1, m1);
                }
                if m2 > -j2 {
                    *lowered.entry((m1, m2 - 2)).or_insert(0.0) += c * jm(j2, m2);
                }
            }
            let norm = jm(big_j, m);
            state = lowered.into_iter().map(|(k, x)| (k, x / norm)).collect();
            m -= 2;
            out.insert((big_j, m), state.clone());
        }
        big_j -= 2;
    }
    out
}

/// Sum over all sublevels and polarizations of |<Fe me| d_q |Fg mg>|^2 with
/// the dipole acting on J only (reduced element 1).
pub fn brute_force(i: i32, jg: i32, je: i32, fg: i32, fe: i32) -> f64 {
    let ground = couple(jg, i);
    let excited = couple(je, i);
    // <Je mJ'| d_q |Jg mJ> = coefficient of |mJ, q> in the coupled (Jg x 1) -> Je state
    let dipole = couple(jg, 2);
    let mut total = 0.0;
    for mg in (-fg..=fg).step_by(2) {
        for me in (-fe..=fe).step_by(2) {
            for q in [-2, 0, 2] {
                let mut amp = 0.0;
                for (&(mj, mi), &cg) in &ground[&(fg, mg)] {
                    let mjp = mj + q;
                    let Some(ce) = excited[&(fe, me)].get(&(mjp, mi)) else { continue };
                    let Some(state) = dipole.get(&(je, mjp)) else { continue };
                    let d = state.get(&(mj, q)).copied().unwrap_or(0.0);
                    amp += ce * cg * d;
                }
                total += amp * amp;
            }
        }
    }
    total
}
