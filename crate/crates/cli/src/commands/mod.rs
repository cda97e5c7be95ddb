pub mod bench;
pub mod eval;
pub mod hwmodel;
pub mod ternarize;
pub mod train;

use crate::error::CliError;

/// Parses `784x64x64x10` into layer widths.
pub fn parse_arch(s: &str) -> Result<Vec<usize>, CliError> {
    let arch = s
        .split(['x', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::usage(format!("bad architecture {s:?}, expected e.g. 784x64x64x10")))?;
    if arch.len() < 2 || arch.contains(&0) {
        return Err(CliError::usage(format!(
            "architecture {s:?} needs at least two positive widths"
        )));
    }
    Ok(arch)
}

pub fn fmt_arch(arch: &[usize]) -> String {
    arch.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}
