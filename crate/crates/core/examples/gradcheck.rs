//! Finite-difference checks for a few operators.
//!
//! cargo run --release --example gradcheck

use svctx::gradcheck::check_op;

fn main() -> svctx::Result<()> {
    for op in ["paired_conv", "sv_conv", "denoise", "network"] {
        let r = check_op(op, 5, 0)?;
        println!("{op:<12} worst relative error {:.2e} (tolerance {:.0e})", r.worst(), r.tolerance);
        for a in &r.args {
            println!("    {:<18} {:.2e}", a.name, a.max_rel_error);
        }
    }
    Ok(())
}
