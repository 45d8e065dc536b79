//! Explicit-state export for exchange with external probabilistic model
//! checkers.
//!
//! Transition file (`.tra`): first line `dtmc`, then one `src dst prob`
//! line per sparse entry, grouped by ascending source and then ascending
//! target, probabilities in shortest round-trip decimal form.
//!
//! Label file (`.lab`): a `#DECLARATION ... #END` header listing all label
//! names including `init`, then one `idx: lab1 lab2 ...` line per labeled
//! state in ascending index order. State 0 always carries `init`; states
//! with an empty label set get no line.

use super::InducedDtmc;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Write `.tra` and `.lab` files for the chain.
pub fn export_explicit(
    dtmc: &InducedDtmc,
    tra_path: &Path,
    lab_path: &Path,
) -> std::io::Result<()> {
    let mut tra = BufWriter::new(File::create(tra_path)?);
    writeln!(tra, "dtmc")?;
    for (src, row) in dtmc.rows().iter().enumerate() {
        for (dst, prob) in row {
            writeln!(tra, "{src} {dst} {prob}")?;
        }
    }
    tra.flush()?;

    let mut lab = BufWriter::new(File::create(lab_path)?);
    writeln!(lab, "#DECLARATION")?;
    let names: Vec<&str> = dtmc.label_universe().iter().map(String::as_str).collect();
    writeln!(lab, "{}", names.join(" "))?;
    writeln!(lab, "#END")?;
    for (idx, labels) in (0..dtmc.num_states()).map(|i| (i, dtmc.labels_of(i))) {
        if labels.is_empty() {
            continue;
        }
        let line: Vec<&str> = labels.iter().map(String::as_str).collect();
        writeln!(lab, "{idx}: {}", line.join(" "))?;
    }
    lab.flush()
}
