//! Holds the end-to-end acceptance run in `tests/acceptance.rs`. It lives in
//! its own package so it runs after every other test target in the workspace.
