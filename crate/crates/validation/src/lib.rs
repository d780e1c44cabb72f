//! Holds the `acceptance` test target, which runs the end-to-end checks of
//! `lpp-core` and prints one line per check. Run it on its own with
//! `cargo test -p lpp-validation --test acceptance`.
