//! End-to-end acceptance checks for `vlp-core`, run as the `acceptance` test
//! target. Each check prints one `[PASS]` or `[FAIL]` line.
