//! The evolved exp2 programs f2..f10 shipped with the crate, with the error
//! bounds they are known to meet on (0, 1].

use crate::graph::{parse, ProgramGraph};

pub struct Evolved {
    pub name: &'static str,
    pub source: &'static str,
    /// Published maximum relative error bound.
    pub bound: f64,
}

impl Evolved {
    pub fn graph(&self) -> ProgramGraph {
        parse(self.source).expect("bundled fixture parses")
    }
}

pub const EVOLVED: [Evolved; 9] = [
    Evolved { name: "f2", source: include_str!("../fixtures/f2.txt"), bound: 0.0415 },
    Evolved { name: "f3", source: include_str!("../fixtures/f3.txt"), bound: 0.00123 },
    Evolved { name: "f4", source: include_str!("../fixtures/f4.txt"), bound: 3.072e-4 },
    Evolved { name: "f5", source: include_str!("../fixtures/f5.txt"), bound: 6.372e-6 },
    Evolved { name: "f6", source: include_str!("../fixtures/f6.txt"), bound: 4.016e-7 },
    Evolved { name: "f7", source: include_str!("../fixtures/f7.txt"), bound: 8.417e-10 },
    Evolved { name: "f8", source: include_str!("../fixtures/f8.txt"), bound: 1.360e-11 },
    Evolved { name: "f9", source: include_str!("../fixtures/f9.txt"), bound: 2.15e-13 },
    Evolved { name: "f10", source: include_str!("../fixtures/f10.txt"), bound: 5.40e-15 },
];

/// `f10` with its constants spelled out as arithmetic, for folding checks.
pub const F10_BLOATED: &str = include_str!("../fixtures/f10_bloated.txt");

pub fn evolved(name: &str) -> Option<&'static Evolved> {
    EVOLVED.iter().find(|e| e.name == name)
}
