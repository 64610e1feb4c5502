//! Layout CSV: one metadata line, then `x_um,y_um,z_um` rows.
//!
//! ```text
//! # n=12,provenance=shells,seed=1,spacing_um=10,occupancies=12
//! x_um,y_um,z_um
//! 3.1,-8.2,4.7
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::Vector3;

use super::{CrystalLayout, Provenance, ShellSpec};
use crate::error::{Error, Result};

pub fn write_layout_csv<W: Write>(layout: &CrystalLayout, mut out: W) -> Result<()> {
    let mut meta = format!(
        "# n={},provenance={},seed={},spacing_um={}",
        layout.len(),
        layout.provenance.label(),
        layout.seed,
        layout.spacing()
    );
    if let Provenance::Shells(spec) = &layout.provenance {
        let occ: Vec<String> = spec.occupancies.iter().map(usize::to_string).collect();
        meta.push_str(&format!(",occupancies={}", occ.join(";")));
    }
    writeln!(out, "{meta}")?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["x_um", "y_um", "z_um"])?;
    for p in &layout.positions {
        writer.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_layout_csv<R: BufRead>(mut input: R) -> Result<CrystalLayout> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta: HashMap<&str, &str> = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Layout("missing metadata line".into()))?
        .split(',')
        .filter_map(|kv| kv.trim().split_once('='))
        .collect();
    let field = |key: &str| {
        meta.get(key)
            .copied()
            .ok_or_else(|| Error::Layout(format!("metadata lacks `{key}`")))
    };
    let parse_err = |key: &str| Error::Layout(format!("bad value for `{key}`"));

    let n: usize = field("n")?.parse().map_err(|_| parse_err("n"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| parse_err("seed"))?;
    let spacing: f64 = field("spacing_um")?.parse().map_err(|_| parse_err("spacing_um"))?;
    let provenance = match field("provenance")? {
        "shells" => {
            let occupancies = field("occupancies")?
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|_| parse_err("occupancies")))
                .collect::<Result<Vec<_>>>()?;
            Provenance::Shells(ShellSpec { occupancies, spacing })
        }
        "bcc" => Provenance::Bcc { u: spacing },
        other => return Err(Error::Layout(format!("unknown provenance `{other}`"))),
    };

    let mut reader = csv::Reader::from_reader(input);
    let mut positions = Vec::with_capacity(n);
    for row in reader.deserialize::<(f64, f64, f64)>() {
        let (x, y, z) = row?;
        positions.push(Vector3::new(x, y, z));
    }
    if positions.len() != n {
        return Err(Error::Layout(format!(
            "metadata announces {n} ions, file has {}",
            positions.len()
        )));
    }
    Ok(CrystalLayout {
        positions,
        provenance,
        seed,
    })
}
