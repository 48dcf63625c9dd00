//! Line strengths against a brute-force Zeeman-sublevel sum.

mod common;

use common::zeeman::{brute_force, couple};
use vaporcell::atomic::{line_strength, AtomicData, ElectronicState, Isotope, TransitionLabel};
use vaporcell::wigner::Spin;

#[test]
fn coupled_states_are_orthonormal() {
    let c = couple(3, 5);
    let keys: Vec<_> = c.keys().copied().collect();
    for a in &keys {
        for b in &keys {
            let dot: f64 = c[a].iter().map(|(k, x)| x * c[b].get(k).copied().unwrap_or(0.0)).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-12, "{a:?} {b:?} {dot}");
        }
    }
}

#[test]
fn six_j_strengths_equal_zeeman_brute_force() {
    let atoms = AtomicData::bundled();
    let jg = ElectronicState::Ground.j();
    let je = ElectronicState::D2Excited.j();
    for t in atoms.transition_table(TransitionLabel::REFERENCE).unwrap() {
        let i = atoms.isotope(t.isotope).nuclear_spin;
        let bf = brute_force(i.twice() as i32, jg.twice() as i32, je.twice() as i32, 2 * t.fg as i32, 2 * t.fe as i32);
        let want = f64::from(je.multiplicity()) * t.rel_strength;
        assert!((bf - want).abs() <= 1e-10 * want, "{}: {bf} vs {want}", t.label());
    }
}

#[test]
fn rb87_f2_ratios_from_brute_force() {
    let s = |fe| brute_force(3, 1, 3, 4, fe);
    let (s3, s2, s1) = (s(6), s(4), s(2));
    // 28 : 10 : 2 in the usual per-sublevel normalization
    assert!((s3 / s1 - 14.0).abs() < 1e-10);
    assert!((s2 / s1 - 5.0).abs() < 1e-10);
}

#[test]
fn sum_rule_holds_for_both_isotopes() {
    let atoms = AtomicData::bundled();
    let table = atoms.transition_table(TransitionLabel::REFERENCE).unwrap();
    for iso in Isotope::ALL {
        let spin = atoms.isotope(iso).nuclear_spin;
        for fg in Spin::couple(ElectronicState::Ground.j(), spin) {
            let fgi = fg.twice() / 2;
            let sum: f64 = table
                .iter()
                .filter(|t| t.isotope == iso && t.fg == fgi)
                .map(|t| t.rel_strength)
                .sum::<f64>()
                / f64::from(fg.multiplicity());
            assert!((sum - 0.5).abs() < 1e-10 * 0.5, "{iso} F={fgi}: {sum}");
        }
        let total: f64 = table.iter().filter(|t| t.isotope == iso).map(|t| t.rel_strength).sum();
        assert!((total - f64::from(spin.multiplicity())).abs() < 1e-10);
    }
}

#[test]
fn forbidden_lines_have_zero_strength() {
    let i = Spin::from_twice(3);
    let s = line_strength(i, Spin::from_twice(1), Spin::from_twice(3), Spin::integer(1), Spin::integer(3));
    assert_eq!(s, 0.0);
}

#[test]
fn rb87_excited_levels_from_the_closed_form() {
    // A = 84.7185, B = 12.4965 MHz, I = J = 3/2: K = F(F+1) - 15/2
    let (a, b) = (84.7185, 12.4965);
    let e = |f: f64| {
        let k = f * (f + 1.0) - 7.5;
        0.5 * a * k + b * (1.5 * k * (k + 1.0) - 2.0 * 3.75 * 3.75) / (4.0 * 1.5 * 2.0 * 1.5 * 2.0)
    };
    let atoms = AtomicData::bundled();
    let levels = atoms.rb87.hyperfine_levels(ElectronicState::D2Excited).unwrap();
    for l in levels {
        assert!((l.shift - e(l.f.value())).abs() < 1e-9, "F={}", l.f);
    }
}

#[test]
fn d2_line_list_is_complete() {
    let atoms = AtomicData::bundled();
    let table = atoms.transition_table(TransitionLabel::REFERENCE).unwrap();
    let count = |iso: Isotope, fg: u32| table.iter().filter(|t| t.isotope == iso && t.fg == fg).count();
    assert_eq!(count(Isotope::Rb87, 2), 3);
    assert_eq!(count(Isotope::Rb85, 2), 3);
    assert_eq!(count(Isotope::Rb85, 3), 3);
    assert_eq!(count(Isotope::Rb87, 1), 3);
    assert!(table.iter().all(|t| t.fe.abs_diff(t.fg) <= 1 && t.rel_strength > 0.0));
}
