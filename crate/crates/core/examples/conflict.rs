//! Degree of conflict between three hand-written mass functions on a
//! three-class frame, and the plausibility that two objects share a class.
//!
//! cargo run --example conflict

use nnevclus::focalsets::Subset;
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::Full)?;
    let mass = |entries: &[(u64, f64)]| {
        let mut m = vec![0.0; fs.len()];
        for &(bits, v) in entries {
            m[fs.index_of(Subset(bits)).expect("full scheme holds every subset")] = v;
        }
        m
    };
    // bit k stands for class k + 1
    let m1 = mass(&[(0b001, 0.6), (0b011, 0.3), (0b111, 0.1)]);
    let m2 = mass(&[(0b011, 0.5), (0b100, 0.2), (0b111, 0.3)]);
    let m3 = mass(&[(0b001, 0.1), (0b010, 0.1), (0b100, 0.8)]);

    let names = fs.column_names();
    for (name, m) in [("m1", &m1), ("m2", &m2), ("m3", &m3)] {
        let focal: Vec<String> =
            names.iter().zip(m.iter()).filter(|(_, &v)| v > 0.0).map(|(s, v)| format!("{s}:{v}")).collect();
        println!("{name} = {{{}}}, contour {:.2}", focal.join(", "), fs.contour(m)?);
    }
    for (label, a, b) in [("1,2", &m1, &m2), ("1,3", &m1, &m3), ("2,3", &m2, &m3)] {
        let kappa = fs.degree_of_conflict(a, b)?;
        let (same, different) = fs.plausibility_same(a, b)?;
        println!("objects {label}: kappa = {kappa:.4}, Pl(same) = {same:.4}, Pl(different) = {different:.4}");
    }
    Ok(())
}
