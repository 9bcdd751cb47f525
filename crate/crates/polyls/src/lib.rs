//! File formats, benchmark suites and the command-line front end for
//! [`polyls_core`].

pub mod bench;
pub mod cli;
pub mod io;
