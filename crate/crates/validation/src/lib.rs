//! Holds the `acceptance` test target; run it with
//! `cargo test -p qcgla-validation --test acceptance`.
