//! Maintenance utility: regenerate the in-repo desk code alist.
//!
//! Usage: cargo run --release --example gen_code [-- <out_path>]

use nleq::ldpc::codegen::{generate_regular, has_no_4cycles, DESK_SPEC};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crates/nleq/codes/desk_n4200_r08.alist".into());
    let code = generate_regular(&DESK_SPEC).expect("desk code generation failed");
    assert!(has_no_4cycles(&code), "generated code has a 4-cycle");
    assert_eq!(code.info_cols, (0..code.k).collect::<Vec<_>>());
    std::fs::write(&out, code.to_alist()).expect("write alist");
    println!(
        "wrote {} (n={}, k={}, rate={:.3}, edges={})",
        out,
        code.n,
        code.k,
        code.rate(),
        code.n_edges
    );
}
