//! The invariant suite behind `gllod check`.

use gllod::check;

fn main() {
    for (name, r) in check::suite() {
        match r {
            Ok(o) => println!("{o}"),
            Err(e) => println!("FAIL {name}: {e}"),
        }
    }
}
