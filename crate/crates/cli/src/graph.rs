use std::fmt::Write;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::io::{name, EdgeList};

pub const MIN_PENWIDTH: f64 = 0.5;
pub const MAX_PENWIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    PartialCorrelation,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Dot,
}

/// Undirected DOT graph with `penwidth` proportional to the absolute edge weight, scaled so
/// the heaviest edge gets [`MAX_PENWIDTH`] and clamped below at [`MIN_PENWIDTH`].
pub fn to_dot(list: &EdgeList, weights: WeightSource) -> String {
    let weight = |e: &crate::io::EdgeRecord| match weights {
        WeightSource::PartialCorrelation => e.partial_correlation.abs(),
        WeightSource::Omega => e.omega.abs(),
    };
    let max = list.edges.iter().map(weight).fold(0.0, f64::max);
    let labels = list.labels.as_deref();
    let mut out = String::from("graph attractor {\n");
    for j in 0..list.p {
        writeln!(out, "  {j} [label={:?}];", name(labels, j)).unwrap();
    }
    for e in &list.edges {
        let w = weight(e);
        let pen = if max > 0.0 { (MAX_PENWIDTH * w / max).max(MIN_PENWIDTH) } else { MIN_PENWIDTH };
        writeln!(out, "  {} -- {} [penwidth={pen:.4}, weight={w:.6}];", e.i, e.j).unwrap();
    }
    out.push_str("}\n");
    out
}
