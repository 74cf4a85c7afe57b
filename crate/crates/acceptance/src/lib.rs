//! Holds the `acceptance` test target only. Run it with
//! `cargo test -p ultraslow-acceptance --test acceptance`.
