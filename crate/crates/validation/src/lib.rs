//! Host crate of the `acceptance` test target; see `tests/acceptance.rs`.
