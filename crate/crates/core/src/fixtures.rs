//! Bundled kernel descriptions used by tests, examples and the CLI.

use crate::design::HlsDesign;

pub const VECTOR_MUL: &str = include_str!("../fixtures/vector_mul.json");
pub const GEMM: &str = include_str!("../fixtures/gemm.json");
pub const ROW_NORM: &str = include_str!("../fixtures/row_norm.json");
pub const VADD16: &str = include_str!("../fixtures/vadd16.json");
pub const MAC2D: &str = include_str!("../fixtures/mac2d.json");
pub const TINY: &str = include_str!("../fixtures/tiny.json");

fn load(text: &str) -> HlsDesign {
    HlsDesign::from_json(text).expect("bundled fixture is valid")
}

/// Single loop `mul` (1024 iterations) over arrays A, B, C.
pub fn vector_mul() -> HlsDesign {
    load(VECTOR_MUL)
}

/// Perfect 3-deep nest i/j/k of 64 iterations each.
pub fn gemm() -> HlsDesign {
    load(GEMM)
}

/// Imperfect 3-deep nest: `row` holds two sibling sub-loops, `col` (with inner `acc`) and `norm`.
pub fn row_norm() -> HlsDesign {
    load(ROW_NORM)
}

pub fn vadd16() -> HlsDesign {
    load(VADD16)
}

pub fn mac2d() -> HlsDesign {
    load(MAC2D)
}

/// One 4-trip loop over one 4-element array; 96 points.
pub fn tiny() -> HlsDesign {
    load(TINY)
}

/// Looks a bundled fixture up by kernel name.
pub fn by_name(name: &str) -> Option<HlsDesign> {
    let text = match name {
        "vector_mul" => VECTOR_MUL,
        "gemm" => GEMM,
        "row_norm" => ROW_NORM,
        "vadd16" => VADD16,
        "mac2d" => MAC2D,
        "tiny" => TINY,
        _ => return None,
    };
    Some(load(text))
}
