//! Holds the `acceptance` test target; run it with
//! `cargo test -p ciwnls-repro --test acceptance`.
//!
//! Kept out of the `ciwnls` package so the multi-minute ensembles do not
//! slow the library's own tests, and so a red criterion does not stop the
//! other packages' suites under cargo's fail-fast default.
