//! Holds the `acceptance` test target, kept apart so it runs after the
//! library's own test suites.
