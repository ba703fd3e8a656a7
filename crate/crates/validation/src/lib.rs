//! Holds the `acceptance` test target, which checks every acceptance
//! criterion of the toolkit and prints one PASS/FAIL line per criterion.
//! Run it with `cargo test -p universality-validation --test acceptance`.
