//! Column layouts of every CSV artifact.

use std::path::Path;

pub struct Schema {
    pub file: &'static str,
    pub columns: &'static [&'static str],
    pub description: &'static str,
}

/// Columns that hold text; every other column is a number.
pub const TEXT_COLUMNS: [&str; 6] = ["label", "signal", "series", "variant", "error", "finetune_converged"];

pub const SCHEMAS: &[Schema] = &[
    Schema {
        file: "envelope.csv",
        columns: &["time_s", "omega_re", "omega_im", "omega_r_squared"],
        description: "sampled envelope Ω(t) in rad/s and Ω_R² in rad²/s²",
    },
    Schema {
        file: "spectrum.csv",
        columns: &["freq_rad_s", "abs_ft_omega", "abs_ft_omega_sq"],
        description: "|FT(Ω)| and |FT(Ω_R²)| on the frequency grid",
    },
    Schema {
        file: "notches.csv",
        columns: &["label", "signal", "freq_rad_s", "relative_depth"],
        description: "predicted spectral zeros and |FT| there relative to the peak",
    },
    Schema {
        file: "trajectory.csv",
        columns: &["t", "P*", "x", "y", "z"],
        description: "level populations P0..P(d-1) and qubit Bloch vector during the pulse",
    },
    Schema {
        file: "ale_scan.csv",
        columns: &["theta_rad", "n", "p2", "p3"],
        description: "ALE populations per virtual-Z phase and repetition count",
    },
    Schema { file: "aae.csv", columns: &["n", "p1_minus_p0"], description: "AAE signal per repetition count" },
    Schema { file: "ape.csv", columns: &["n", "re", "im"], description: "APE complex signal per repetition count" },
    Schema { file: "rabi.csv", columns: &["amplitude_rad_per_s", "p1"], description: "P1 after one pulse per amplitude" },
    Schema {
        file: "curves.csv",
        columns: &["series", "length", "mean", "sem"],
        description: "benchmark signal per sequence length for the reference and interleaved series",
    },
    Schema {
        file: "sweep.csv",
        columns: &[
            "t_p_ns",
            "alpha12",
            "alpha02",
            "alpha13",
            "amplitude_rad_per_s",
            "detuning_rad_per_s",
            "eps_leak_2",
            "eps_leak_3",
            "cost",
            "error",
        ],
        description: "calibrated optimum per pulse length",
    },
    Schema {
        file: "comparison.csv",
        columns: &[
            "variant",
            "alpha12",
            "alpha02",
            "alpha13",
            "amplitude_rad_per_s",
            "detuning_rad_per_s",
            "eps_leak_2",
            "eps_leak_3",
            "eps_leak_total",
            "phi_e",
            "omega_e",
            "finetune_converged",
            "rb_eps_tot",
            "lrb_eps_leak",
        ],
        description: "R2D and DRAG optima side by side",
    },
];

pub fn schema_for(file: &str) -> Option<&'static Schema> {
    SCHEMAS.iter().find(|s| s.file == file)
}

fn header_matches(schema: &Schema, header: &[String]) -> bool {
    match schema.columns.iter().position(|c| *c == "P*") {
        None => header.iter().map(String::as_str).eq(schema.columns.iter().copied()),
        Some(i) => {
            let tail = schema.columns.len() - i - 1;
            if header.len() < schema.columns.len() {
                return false;
            }
            let middle = &header[i..header.len() - tail];
            header[..i].iter().map(String::as_str).eq(schema.columns[..i].iter().copied())
                && header[header.len() - tail..].iter().map(String::as_str).eq(schema.columns[i + 1..].iter().copied())
                && middle.iter().enumerate().all(|(j, h)| *h == format!("P{j}"))
        }
    }
}

/// Checks the header against the documented schema and that every numeric
/// cell parses. Returns the number of data rows.
pub fn validate_csv(path: &Path) -> Result<usize, String> {
    let name = path.file_name().and_then(|n| n.to_str()).ok_or("bad file name")?;
    let schema = schema_for(name).ok_or_else(|| format!("{name} has no documented schema"))?;
    let mut rd = csv::Reader::from_path(path).map_err(|e| format!("{name}: {e}"))?;
    let header: Vec<String> = rd.headers().map_err(|e| format!("{name}: {e}"))?.iter().map(str::to_string).collect();
    if !header_matches(schema, &header) {
        return Err(format!("{name}: header {header:?} does not match {:?}", schema.columns));
    }
    let mut rows = 0;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| format!("{name} row {}: {e}", i + 1))?;
        for (col, cell) in header.iter().zip(rec.iter()) {
            if !TEXT_COLUMNS.contains(&col.as_str()) && cell.parse::<f64>().is_err() {
                return Err(format!("{name} row {}: column {col} holds {cell:?}, not a number", i + 1));
            }
        }
        rows += 1;
    }
    Ok(rows)
}
