//! Gnuplot data and script stubs derived from CSV artifacts.

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactType {
    Trajectory,
    Density,
    PhaseDiagram,
    Polyline,
}

impl ArtifactType {
    pub fn detect(header: &[&str]) -> Option<Self> {
        match header {
            ["t", "v", "w", "pmax"] => Some(Self::Trajectory),
            ["i", "j", "v", "w", "p"] => Some(Self::Density),
            ["alpha", "sigma", "mark"] => Some(Self::PhaseDiagram),
            ["v", "w"] => Some(Self::Polyline),
            _ => None,
        }
    }
}

fn rows(name: &str, csv_text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::Artifact(format!("{name}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Artifact(format!("{name}: {e}")))?;
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, out))
}

fn stem(name: &str) -> &str {
    name.strip_suffix(".csv").unwrap_or(name)
}

/// Builds `<stem>.dat` and `<stem>.gp` for the CSV artifact `name`. The
/// artifact type is recognised from the header row.
pub fn emit_plotdata(name: &str, csv_text: &str) -> Result<Vec<(String, String)>, CliError> {
    let (header, records) = rows(name, csv_text)?;
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    let kind = ArtifactType::detect(&cols).ok_or_else(|| CliError::UnknownArtifact(name.to_string()))?;
    let stem = stem(name);
    let dat_name = format!("{stem}.dat");
    let (dat, script) = match kind {
        ArtifactType::Trajectory => {
            let mut dat = String::from("# t v w\n");
            for r in &records {
                dat.push_str(&format!("{} {} {}\n", r[0], r[1], r[2]));
            }
            let gp = format!(
                "set xlabel 'v (mV)'\nset ylabel 'w'\nplot '{dat_name}' using 2:3 with linespoints pt 7 ps 0.4 title 'maximal likely trajectory'\n"
            );
            (dat, gp)
        }
        ArtifactType::Density => {
            let mut dat = String::from("# v w p\n");
            let mut prev_row: Option<&str> = None;
            for r in &records {
                if prev_row.is_some_and(|p| p != r[1]) {
                    dat.push('\n');
                }
                prev_row = Some(&r[1]);
                dat.push_str(&format!("{} {} {}\n", r[2], r[3], r[4]));
            }
            let gp = format!(
                "set xlabel 'v (mV)'\nset ylabel 'w'\nset view map\nset pm3d at b\nsplot '{dat_name}' using 1:2:3 with pm3d notitle\n"
            );
            (dat, gp)
        }
        ArtifactType::PhaseDiagram => {
            let mut dat = String::new();
            for (k, (mark, label)) in [("o", "stay"), ("x", "transition"), ("+", "split")]
                .iter()
                .enumerate()
            {
                if k > 0 {
                    dat.push_str("\n\n");
                }
                dat.push_str(&format!("# {label}: alpha sigma\n"));
                for r in records.iter().filter(|r| r[2] == *mark) {
                    dat.push_str(&format!("{} {}\n", r[0], r[1]));
                }
            }
            let gp = format!(
                "set xlabel 'alpha'\nset ylabel 'sigma'\nplot '{dat_name}' index 0 with points pt 6 lc rgb 'green' title 'o', \\\n     '' index 1 with points pt 2 lc rgb 'red' title 'x', \\\n     '' index 2 with points pt 1 lc rgb 'blue' title '+'\n"
            );
            (dat, gp)
        }
        ArtifactType::Polyline => {
            let mut dat = String::from("# v w\n");
            for r in &records {
                dat.push_str(&format!("{} {}\n", r[0], r[1]));
            }
            let gp = format!("set xlabel 'v (mV)'\nset ylabel 'w'\nplot '{dat_name}' using 1:2 with lines notitle\n");
            (dat, gp)
        }
    };
    Ok(vec![(dat_name, dat), (format!("{stem}.gp"), script)])
}
